import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stepsplit import bounds, qcore
from stepsplit.qcore import BellKind, MeasBasis, Qubit


def mp_entropy_bound(g):
    mpmath.mp.dps = 50
    g = mpmath.mpf(g)
    out = mpmath.mpf(0)
    if g < 1:
        out -= (1 - g) * mpmath.log(1 - g, 2)
    if g > 0:
        out -= g * mpmath.log(g / 3, 2)
    return float(out)


def coincidence_oracle(rho):
    """Probability that both parties agree, basis chosen uniformly; plain kron algebra."""
    total = 0.0
    for basis in MeasBasis:
        for a, k in enumerate(basis.kets):
            v = np.kron(k, k)
            total += 0.5 * np.vdot(v, rho @ v).real
    return total


def test_entropy_bound_values():
    assert bounds.entropy_upper_bound(0.0) == 0.0
    assert bounds.entropy_upper_bound(0.75) == pytest.approx(2.0, abs=1e-12)
    assert bounds.entropy_upper_bound(1.0) == pytest.approx(math.log2(3), abs=1e-12)
    assert bounds.entropy_upper_bound(0.5) == pytest.approx(mp_entropy_bound("0.5"), abs=1e-12)
    assert bounds.entropy_upper_bound(0.75, base=math.e) == pytest.approx(math.log(4), abs=1e-12)


@pytest.mark.parametrize("g", [-0.1, 1.1, float("nan")])
def test_entropy_bound_domain(g):
    with pytest.raises(ValueError):
        bounds.entropy_upper_bound(g)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1))
def test_entropy_bound_matches_high_precision(g):
    assert bounds.entropy_upper_bound(g) == pytest.approx(mp_entropy_bound(g), abs=1e-9)


def test_entropy_bound_peak_is_global_max():
    grid = np.linspace(0, 1, 4001)
    values = [bounds.entropy_upper_bound(g) for g in grid]
    assert grid[int(np.argmax(values))] == pytest.approx(0.75)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1))
def test_max_entropy_state_has_gamma_and_entropy(g):
    rho = bounds.max_entropy_state(g)
    assert bounds.gamma_of(rho) == pytest.approx(g, abs=1e-12)
    assert qcore.von_neumann_entropy(rho) == pytest.approx(bounds.entropy_upper_bound(g), abs=1e-9)
    assert bounds.detection_exact(rho) == pytest.approx(2 * g / 3, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.2, 0.5, 1.0])
def test_depolarized_singlet_is_max_entropy_state(p):
    rho = qcore.depolarize(qcore.SINGLET_RHO, Qubit.B, p)
    np.testing.assert_allclose(rho, bounds.max_entropy_state(3 * p / 4), atol=1e-15)


def test_intercept_resend_point():
    rho = np.eye(4) / 4
    assert bounds.gamma_of(rho) == pytest.approx(0.75)
    assert bounds.detection_exact(rho) == pytest.approx(0.5)
    assert bounds.detection_lower_bound(0.75) == 0.375


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_detection_exact_matches_oracle_and_bound(seed, rank):
    rho = qcore.random_density_matrix(np.random.default_rng(seed), rank=rank)
    d = bounds.detection_exact(rho)
    assert d == pytest.approx(coincidence_oracle(rho), abs=1e-12)
    assert d >= bounds.gamma_of(rho) / 2 - 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda w: sum(w) > 1e-3))
def test_entropy_dominance_on_bell_diagonal(w):
    pops = np.array(w) / sum(w)
    result = bounds.verify_entropy_dominance(qcore.bell_diagonal(pops))
    assert result.holds, result


def test_dominance_is_tight_on_max_entropy_line():
    for g in np.linspace(0, 1, 11):
        assert abs(bounds.verify_entropy_dominance(bounds.max_entropy_state(g)).margin) <= 1e-9


def test_bound_sweep_rows():
    rows = bounds.bound_sweep(bounds.parse_grid("0:1:0.25"))
    assert [r.gamma for r in rows] == [0.0, 0.25, 0.5, 0.75, 1.0]
    three_q = rows[3]
    assert three_q.s_max_bits == pytest.approx(2.0) and three_q.d_lower == 0.375 and three_q.d_exact == pytest.approx(0.5)
    assert all(r.d_exact >= r.d_lower - 1e-12 for r in rows)


@pytest.mark.parametrize("spec,n", [("0:1:0.25", 5), ("0:1:0.1", 11), ("0.5:0.5:0.1", 1), ("0:0.75:0.25", 4)])
def test_parse_grid(spec, n):
    assert len(bounds.parse_grid(spec)) == n


@pytest.mark.parametrize("spec", ["0:1", "a:b:c", "0:1:0", "1:0:0.1", "0:2:0.5", "-0.5:1:0.5"])
def test_parse_grid_rejects(spec):
    with pytest.raises(ValueError):
        bounds.parse_grid(spec)


def test_holevo_singlet_two_bits():
    assert bounds.encoding_holevo(qcore.singlet()) == pytest.approx(2.0, abs=1e-9)
    assert bounds.encoding_holevo(np.eye(4) / 4) == pytest.approx(0.0, abs=1e-9)


def test_holevo_monotone_on_grid():
    rows, ok = bounds.holevo_monotonicity_grid(bounds.bell_diagonal_family(9), np.linspace(0.1, 0.9, 9))
    assert ok and len(rows) == 81


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_holevo_monotone_random_states(seed, p):
    rho = qcore.random_density_matrix(np.random.default_rng(seed))
    _, ok = bounds.holevo_monotonicity_grid([rho], [p])
    assert ok


def test_bell_diagonal_family_is_valid():
    fam = bounds.bell_diagonal_family(9)
    assert len(fam) == 9
    for rho in fam:
        qcore.validate_state(rho)
        probs = qcore.bell_probabilities(rho)
        np.testing.assert_allclose(rho, qcore.bell_diagonal(probs), atol=1e-12)
    assert qcore.bell_probabilities(fam[0])[BellKind.PsiMinus.value] == pytest.approx(0.9)


@pytest.mark.parametrize("g", [5e-324, 1e-300, 1 - 1e-16])
def test_entropy_bound_extreme_gamma(g):
    assert bounds.entropy_upper_bound(g) == pytest.approx(mp_entropy_bound(g), abs=1e-12)
