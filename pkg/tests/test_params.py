import pytest

from mg_spectra.params import ModeParams, PhysicalParams


def test_defaults():
    phys = PhysicalParams()
    assert phys.omega == 1.0
    assert phys.eta == 1.0
    assert phys.beta == 1.0
    assert phys.kappa == 0.0
    assert phys.mu == 1.0


def test_mu_property():
    phys = PhysicalParams(beta=3.0, eta=2.0)
    assert phys.mu == 4.5


def test_from_mu():
    phys = PhysicalParams.from_mu(omega=2.0, mu=5.0)
    assert phys.omega == 2.0
    assert phys.mu == pytest.approx(5.0)
    assert phys.eta == 1.0


@pytest.mark.parametrize("kwargs", [
    {"omega": 0.0},
    {"omega": -1.0},
    {"eta": 0.0},
    {"beta": 0.0},
    {"kappa": -1e-9},
])
def test_physical_validation(kwargs):
    with pytest.raises(ValueError):
        PhysicalParams(**kwargs)


@pytest.mark.parametrize("kwargs", [
    {"a": 0.0},
    {"a": -2.0},
    {"m": 0},
    {"m": -1},
    {"k1": 0},
    {"k2": 0},
    {"k1": -3},
])
def test_mode_validation(kwargs):
    with pytest.raises(ValueError):
        ModeParams(**kwargs)


def test_mode_ksq():
    mp = ModeParams(k1=3, k2=4)
    assert mp.ksq == 25
    assert ModeParams().ksq == 2


def test_frozen():
    mp = ModeParams()
    with pytest.raises(Exception):
        mp.a = 2.0
