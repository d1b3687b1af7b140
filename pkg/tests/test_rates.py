import json
import math
from fractions import Fraction as F
from itertools import product
from pathlib import Path

import numpy as np
import pytest
from scipy.special import ellipkm1

from latticecount import rates
from latticecount.errors import LatticeCountError, LocalDivergenceError

GOLDEN = json.loads((Path(__file__).parent / "golden" / "golden.json").read_text())


@pytest.mark.parametrize("p,expected", [(2, 1), (4, 2), (6, 4), (3, 2), (5, 4), (8, 4), (10, 6), (4.5, 4)])
def test_n_e(p, expected):
    assert rates.n_e(p) == expected


def test_n_e_rejects_small_p():
    with pytest.raises(ValueError):
        rates.n_e(1.9)


def test_spectral_profile():
    sp = rates.SpectralProfile(6)
    assert (sp.n_e, sp.kappa) == (4, F(1, 8))
    assert rates.SpectralProfile(6, sharp=True).kappa == F(1, 6)


def test_error_constant_examples():
    assert rates.error_constant_A(1, 1, 1, 1, 1) == pytest.approx(2.0)
    assert rates.error_constant_A(4, 1, 1, 1, 1) == pytest.approx(1.0)
    rho, a = 2.0, 0.7
    base = rates.error_constant_A(1.0, rho, a, 1.3, 0.2)
    scaled = rates.error_constant_A(3.0, rho, a, 1.3, 0.2)
    assert scaled / base == pytest.approx(3.0 ** (-a / (rho + a)))
    with pytest.raises(ValueError):
        rates.error_constant_A(0, 1, 1, 1, 1)


def test_counting_exponent():
    assert rates.counting_exponent(F(1, 2), 1, 2) == F(1, 6)
    assert rates.counting_exponent(0.3, math.inf, 2) == 0.3
    assert rates.counting_exponent(0, 1, 2) == 0


def test_slm_examples():
    assert rates.slm_profile(2).exponent == F(5, 6)
    assert rates.slm_profile(3).exponent == 1 - F(1, 24)
    assert rates.slm_profile(10).exponent == 1 - F(1, 990)
    prof = rates.slm_profile(3)
    assert (prof.p, prof.d, prof.a) == (4, 5, 1)


def test_slm_identity_range():
    for m in range(2, 21):
        assert rates.slm_profile(m).exponent == 1 - F(1, m**3 - m)


def test_slm_identity_with_tensor_power_exponent():
    # with 2 n_e(p) in place of p the identity survives only where the two agree
    holds = [m for m in range(2, 21)
             if rates.thm41_exponent(2 * (m - 1), 1, m * (m + 1) // 2 - 1) == 1 - F(1, m**3 - m)]
    assert holds == [2] + list(range(3, 21, 2))


def test_sector_exponent_examples():
    r = rates.thm32_sector(2, 2)
    assert r.error_exponent == F(7, 8) and r.relative_exponent == F(1, 8)
    assert rates.thm32_sector(3, 2).error_exponent == F(13, 7)
    assert "psi" in r.main_coeff_rule
    with pytest.raises(ValueError):
        rates.thm32_sector(2, 2, psi=0.0)


def test_cross_formula_identity():
    assert rates.thm32_sector(2, 2).relative_exponent == rates.bisector_zeta(2, 3, 0, 1) == F(1, 8)


def test_rank_deformed_exponent():
    assert rates.thm43_exponent(2, 1, 0) == F(3, 4)
    values = [float(rates.thm43_exponent(2, 1, r)) for r in np.linspace(0, 0.999, 50)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(1.0, abs=2e-3)
    with pytest.raises(ValueError):
        rates.thm43_exponent(2, 1, 1.0)


def test_other_formulas():
    assert rates.affine_zeta(2, 3) == F(1, 20)
    assert rates.bisector_zeta(2, 3, 0, 1) == F(1, 8)
    assert rates.bisector_zeta(2, 3, F(9, 10), 1) == F(1, 10)
    assert rates.cor53_theta(2, 2) == F(1, 6)
    assert rates.thm61_exponent(2, 1, 2) == 1 - F(1, 12)
    assert rates.thm41_exponent(4, 1, 5, sharp=True) == 1 - F(1, 24)
    with pytest.raises(ValueError):
        rates.bisector_zeta(2, 3, 1, 1)


def test_group_profile():
    g = rates.GroupProfile.builtin("SL2")
    assert (g.dim_G, g.dim_K, g.rho, g.alpha, g.alpha0) == (3, 1, 2, 1.0, 0.0)
    with pytest.raises(LatticeCountError):
        rates.GroupProfile.builtin("SL3")


def hc_oracle(s):
    return 2 / math.pi * math.exp(-s / 2) * float(ellipkm1(math.exp(-2 * s)))


@pytest.mark.parametrize("s", [0.0, 0.1, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0])
def test_harish_chandra_against_elliptic_oracle(s):
    assert rates.harish_chandra_real(s) == pytest.approx(hc_oracle(s), rel=1e-10)


def test_harish_chandra_examples():
    assert rates.harish_chandra_real(0.0) == pytest.approx(1.0, abs=1e-12)
    vals = [rates.harish_chandra_real(s) for s in range(11)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    grid = np.linspace(0, 20, 401)
    ratio = [rates.harish_chandra_real(s) * math.exp(s / 2) for s in grid]
    assert min(ratio) >= 1 - 1e-12
    C = max(r / (1 + s) for r, s in zip(ratio, grid))
    assert C <= 2
    assert C == pytest.approx(GOLDEN["hc_envelope_C_0_20"], rel=1e-9)


def test_hc_decay_threshold():
    T = rates.hc_decay_threshold(0.05)
    assert 0 < T < 600
    for t in np.arange(math.ceil(T), 600, 7.0):
        assert rates.harish_chandra_real(t) <= math.exp(-(0.5 - 0.05) * t)
    assert rates.harish_chandra_real(T - 1) > math.exp(-(0.5 - 0.05) * (T - 1))


def tree_brute_force(q, n):
    """Average of q^(h/2) over the radius-n sphere of an explicit (q+1)-regular tree.

    Vertices are reduced words; the fixed end is the ray of all-zero letters and
    the horocycle height of a word w is 2 * (common prefix with that ray) - |w|.
    """
    total, count = F(0), 0
    for first in range(q + 1):
        for rest in product(range(q), repeat=n - 1):
            word = (first,) + rest
            j = 0
            while j < n and word[j] == 0:
                j += 1
            h = 2 * j - n
            total += F(q) ** ((h + n) // 2)
            count += 1
    return total / count, count


@pytest.mark.parametrize("q,n", [(2, 1), (2, 2), (2, 5), (3, 3), (3, 4), (5, 3)])
def test_tree_recursion_against_explicit_tree(q, n):
    avg, size = tree_brute_force(q, n)
    assert rates.tree_spherical_scaled(q, n) == avg
    assert rates.double_coset_volume(q, n) == size


def test_tree_examples():
    assert rates.tree_spherical(3, 0) == 1.0
    assert rates.double_coset_volume(3, 0) == 1
    assert rates.double_coset_volume(2, 3) == 12
    with pytest.raises(ValueError):
        rates.tree_spherical(4, 2)


def test_tree_lower_bound_constant():
    for q in (2, 3, 5):
        scaled = [rates.tree_spherical(q, n) * q ** (n / 2) for n in range(41)]
        assert min(scaled) >= 1.0


def test_tree_closed_form():
    for q in (2, 3, 5, 7):
        for n in range(0, 30):
            assert rates.tree_spherical_scaled(q, n) == 1 + F(n * (q - 1), q + 1)


def test_local_factor_uses_tree_values():
    q, p = 3, 4.5
    direct = 1 + sum(rates.tree_spherical(q, n) ** p * rates.double_coset_volume(q, n) for n in range(1, 200))
    assert rates.local_factor(q, p) == pytest.approx(direct, rel=1e-13)


def test_primes():
    assert rates.primes_up_to(30).tolist() == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert len(rates.primes_up_to(10**5)) == 9592


def test_adelic_divergence_checks():
    with pytest.raises(LocalDivergenceError):
        rates.adelic_hc_partial_product(2.0, 100)
    with pytest.raises(ValueError):
        rates.adelic_hc_partial_product(4.5, 10**6 + 1)


def test_adelic_monotone_and_ordered_in_p():
    a3 = rates.adelic_hc_partial_product(3.0, 10**4)
    a4 = rates.adelic_hc_partial_product(4.0, 10**4)
    a45 = rates.adelic_hc_partial_product(4.5, 10**4)
    for r in (a3, a4, a45):
        assert np.all(np.diff(r.log_partial_products) > 0)
    assert np.all(np.diff(a3.log_partial_products) > np.diff(a4.log_partial_products))
    assert a4.loglog_slope() > 0
