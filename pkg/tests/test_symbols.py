import os
from fractions import Fraction

import numpy as np
import pytest

from mg_spectra.params import PhysicalParams
from mg_spectra import symbols
from mg_spectra.fields import SpectralField

UNIT = PhysicalParams()

# exact rational values, checked by hand from the defining formulas
POINT_VALUES = {
    (1, 1, 1): (Fraction(5, 13), Fraction(-7, 13), Fraction(2, 13)),
    (1, 1, -1): (Fraction(-5, 13), Fraction(7, 13), Fraction(2, 13)),
    (2, 1, 3): (Fraction(78, 505), Fraction(-171, 505), Fraction(1, 101)),
}


@pytest.mark.parametrize("k,expected", sorted(POINT_VALUES.items()))
def test_m_symbol_exact_points(k, expected):
    assert symbols.m_symbol_exact(k, 1, 1) == expected


@pytest.mark.parametrize("k", sorted(POINT_VALUES))
def test_m_symbol_float_matches_exact(k):
    m = symbols.m_symbol(k, UNIT)
    exact = [float(v) for v in POINT_VALUES[k]]
    assert np.allclose(m, exact, rtol=0, atol=1e-15)


@pytest.mark.parametrize("k", [(3, 5, 0), (0, 0, 0), (-7, 2, 0)])
def test_m_symbol_vanishes_on_plane(k):
    assert np.all(symbols.m_symbol(k, UNIT) == 0.0)


def test_divergence_exact_is_zero():
    rng = np.random.default_rng(5)
    for _ in range(50):
        k = tuple(int(v) for v in rng.integers(-20, 21, size=3))
        assert symbols.divergence_exact(k, 1, 1) == 0
        assert symbols.divergence_exact(k, 2, 3) == 0


def test_t_symbol_contraction_and_link():
    for k in [(1, 1, 1), (3, -2, 5), (-4, 7, -1)]:
        kv = np.array(k, dtype=float)
        T = symbols.t_symbol(k, UNIT)
        m = symbols.m_symbol(k, UNIT)
        # M_j = i k_i T_ij and k_i k_j T_ij = 0
        assert np.allclose((1j * kv) @ T, m, atol=1e-15)
        assert abs(kv @ T @ kv) <= 1e-14
    assert np.all(symbols.t_symbol((2, 1, 0), UNIT) == 0.0)


def test_t_symbol_exact_matches_float():
    k = (2, -3, 4)
    T = symbols.t_symbol(k, UNIT)
    Te = symbols.t_symbol_exact(k, 1, 1)
    for i in range(3):
        for j in range(3):
            assert T[i, j].real == 0.0
            assert T[i, j].imag == pytest.approx(float(Te[i][j]), abs=1e-16)


def test_b_symbol_relation():
    k = (2, 3, -1)
    ksq = 4 + 9 + 1
    b = symbols.b_symbol(k, UNIT)
    m = symbols.m_symbol(k, UNIT)
    assert np.allclose(b, (1j * 3 / ksq) * m, atol=1e-16)
    assert np.all(symbols.b_symbol((1, 1, 0), UNIT) == 0.0)


def test_grids_match_pointwise():
    n = 3
    m1, m2, m3 = symbols.m_symbol_grids(n, UNIT)
    b1, b2, b3 = symbols.b_symbol_grids(n, UNIT)
    for k1 in range(-n, n + 1):
        for k2 in range(-n, n + 1):
            for k3 in range(-n, n + 1):
                idx = (k1 + n, k2 + n, k3 + n)
                m = symbols.m_symbol((k1, k2, k3), UNIT)
                b = symbols.b_symbol((k1, k2, k3), UNIT)
                assert np.allclose([m1[idx], m2[idx], m3[idx]], m, atol=1e-15)
                assert np.allclose([b1[idx], b2[idx], b3[idx]], b, atol=1e-15)


def test_grids_even_symmetry():
    m1, m2, m3 = symbols.m_symbol_grids(4, UNIT)
    for g in (m1, m2, m3):
        assert np.array_equal(g, g[::-1, ::-1, ::-1])


def test_apply_multiplier_scalar_and_vector():
    f = SpectralField.from_modes(2, {(1, 0, 1): 1.0 + 0j, (-1, 0, -1): 1.0})
    doubled = symbols.apply_multiplier(f, lambda k: 2.0)
    assert np.allclose(doubled.coeffs, 2.0 * f.coeffs)
    u = symbols.apply_multiplier(f, lambda k: symbols.m_symbol(k, UNIT))
    assert len(u) == 3
    m = symbols.m_symbol((1, 0, 1), UNIT)
    n = f.n
    assert u[0][(1, 0, 1)] == pytest.approx(m[0])
    assert u[2][(-1, 0, -1)] == pytest.approx(m[2])


def test_apply_multiplier_rejects_nonfinite():
    f = SpectralField.from_modes(1, {(1, 0, 1): 1.0})
    with pytest.raises(symbols.SymbolError):
        symbols.apply_multiplier(f, lambda k: float("inf"))


def test_asymptotics_report():
    with pytest.raises(ValueError):
        symbols.symbol_asymptotics_report(0.75, [1, 2], UNIT)
    rep = symbols.symbol_asymptotics_report(0.5, [4, 16, 64, 256], UNIT)
    bounds = rep.ratio_bounds()
    for lo, hi in bounds:
        assert lo > 0
        assert hi / lo < 10.0
    # |M2| itself is unbounded along the curve
    m2 = [row[3] for row in rep.rows]
    assert m2[-1] > 10.0 * m2[0]


def test_growth_constant():
    out = symbols.symbol_growth_constant(UNIT, n_max=24)
    assert out["curve_max"] <= out["c_fit"] <= 2.0 * out["curve_max"]


def test_symbol_table_csv(tmp_path):
    path = os.path.join(tmp_path, "sym.csv")
    symbols.symbol_table_csv(path, 2, UNIT)
    lines = open(path).read().strip().splitlines()
    assert lines[0] == "k1,k2,k3,M1,M2,M3"
    assert len(lines) == 1 + 5 ** 3
