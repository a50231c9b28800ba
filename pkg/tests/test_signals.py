import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from esc_sat.signals import (
    DitherSpec,
    common_period,
    eval_M,
    eval_M_dot,
    eval_S,
    eval_S_dot,
    validate_frequencies,
)


# ---------------------------------------------------------------------------
# frequency admissibility


def exclusion_oracle(mults):
    """Exhaustive re-enumeration of the exclusion set, independent of the
    implementation's loops: collect every forbidden value for each index."""
    mults = [Fraction(m) for m in mults]
    n = len(mults)
    for i in range(n):
        forbidden = set()
        for j in range(n):
            if j != i:
                forbidden.add(mults[j])
        for j, k in product(range(n), range(n)):
            if not (i == j == k) and i not in (j, k) and j != k:
                forbidden.add(Fraction(mults[j] + mults[k], 2))
        for j, k in product(range(n), range(n)):
            if not (i == j == k):
                forbidden.add(mults[j] + 2 * mults[k])
        for j, k in product(range(n), range(n)):
            if not (i == j == k):
                forbidden.add(mults[j] + mults[k])
            if j != k:
                forbidden.add(mults[j] - mults[k])
        if mults[i] in forbidden:
            return False
    return True


def test_example_pair_is_admissible():
    report = validate_frequencies([10, 70])
    assert report.valid
    assert report.violations == ()


def test_sum_violation_detected():
    report = validate_frequencies([20, 30, 50])
    assert not report.valid
    kinds = {(v.kind, v.indices) for v in report.violations}
    assert ("sum", (2, 0, 1)) in kinds
    assert any(v.value == 50 for v in report.violations)


def test_singleton_is_admissible():
    assert validate_frequencies([10]).valid


def test_example2_multipliers_flagged():
    # 70 = 10 + 2*30: flagged, though simulation is still allowed to proceed
    report = validate_frequencies([10, 30, 70])
    assert not report.valid
    assert any(v.kind == "shifted-double" for v in report.violations)


@pytest.mark.parametrize("seed", range(20))
def test_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    mults = [
        Fraction(int(rng.integers(1, 30)), int(rng.integers(1, 4)))
        for _ in range(n)
    ]
    if len(set(mults)) != len(mults):
        mults = list(dict.fromkeys(mults))
    assert validate_frequencies(mults).valid == exclusion_oracle(mults)


def test_permutation_invariance():
    rng = np.random.default_rng(7)
    base = [10, 30, 70, 9]
    expected = validate_frequencies(base).valid
    for _ in range(10):
        perm = list(rng.permutation(base))
        assert validate_frequencies(perm).valid == expected


def test_rejects_empty_and_nonpositive():
    with pytest.raises(ValueError):
        validate_frequencies([])
    with pytest.raises(ValueError):
        validate_frequencies([10, -3])


# ---------------------------------------------------------------------------
# common period


def lcm_pair_oracle(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(
        math.lcm(a.numerator, b.numerator), math.gcd(a.denominator, b.denominator)
    )


def test_period_examples():
    assert common_period([10, 70], 1.0) == pytest.approx(2 * math.pi / 10)
    assert common_period([10], 1.0) == pytest.approx(2 * math.pi / 10)
    assert common_period([10, 30, 70], 1.0) == pytest.approx(2 * math.pi / 10)


def test_period_scales_with_base_omega():
    assert common_period([10, 70], 2.0) == pytest.approx(math.pi / 10)


@pytest.mark.parametrize("seed", range(10))
def test_period_against_rational_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    mults = [
        Fraction(int(rng.integers(1, 12)), int(rng.integers(1, 6)))
        for _ in range(3)
    ]
    mults = list(dict.fromkeys(mults))
    acc = Fraction(1, 1) / mults[0]
    for m in mults[1:]:
        acc = lcm_pair_oracle(acc, 1 / m)
    assert common_period(mults, 1.0) == pytest.approx(2 * math.pi * float(acc))


def test_period_overflow_reports_pair():
    with pytest.raises(OverflowError, match="multiplier 1"):
        common_period([Fraction(1, 2**40), Fraction(1, 3**30)], 1.0)


def test_period_is_a_common_period_of_products():
    # every pairwise dither product must repeat after T as well
    spec = DitherSpec([0.1, 0.1, 0.1], (10, 30, 70), 1.0)
    T = spec.period
    ts = np.linspace(0.0, 1.0, 11)
    for t in ts:
        m0 = np.outer(eval_M(spec, t), eval_S(spec, t))
        m1 = np.outer(eval_M(spec, t + T), eval_S(spec, t + T))
        assert np.allclose(m0, m1, atol=1e-8)


# ---------------------------------------------------------------------------
# dither evaluation


def test_S_and_M_at_zero_and_period():
    spec = DitherSpec([0.1, 0.1], (10, 70), 1.0)
    assert np.allclose(eval_S(spec, 0.0), 0.0)
    assert np.allclose(eval_M(spec, 0.0), 0.0)
    assert np.allclose(eval_S(spec, spec.period), 0.0, atol=1e-9)


def test_S_example_values():
    spec = DitherSpec([0.1, 0.1], (10, 70), 1.0)
    s = eval_S(spec, math.pi / 20)
    assert s == pytest.approx([0.1, -0.1])


def test_M_example_value():
    spec = DitherSpec([0.1], (10,), 1.0)
    assert eval_M(spec, math.pi / 20) == pytest.approx([20.0])


def test_M_S_componentwise_identity():
    spec = DitherSpec([0.1, 0.25], (10, 70), 1.0)
    ts = np.linspace(0.0, spec.period, 57)
    S = eval_S(spec, ts)
    M = eval_M(spec, ts)
    assert np.allclose(M * spec.amplitudes**2 / 2.0, S, atol=1e-14)


def test_dither_derivatives_match_finite_differences():
    spec = DitherSpec([0.1, 0.2], (10, 70), 1.0)
    h = 1e-7
    for t in (0.13, 0.37, 0.55):
        fd_s = (eval_S(spec, t + h) - eval_S(spec, t - h)) / (2 * h)
        fd_m = (eval_M(spec, t + h) - eval_M(spec, t - h)) / (2 * h)
        assert np.allclose(eval_S_dot(spec, t), fd_s, atol=1e-5)
        assert np.allclose(eval_M_dot(spec, t), fd_m, atol=1e-3)


def test_zero_mean_by_quadrature():
    spec = DitherSpec([0.1, 0.1], (10, 70), 1.0)
    nodes = 20001
    ts = np.linspace(0.0, spec.period, nodes)
    h = spec.period / (nodes - 1)
    w = np.ones(nodes)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= h / 3.0
    S = eval_S(spec, ts)
    M = eval_M(spec, ts)
    assert np.all(np.abs(w @ S) / spec.period <= 1e-9)
    assert np.all(np.abs(w @ M) / spec.period <= 1e-9)


def test_spec_validation():
    with pytest.raises(ValueError):
        DitherSpec([0.1, 0.1], (10, 10), 1.0)
    with pytest.raises(ValueError):
        DitherSpec([0.1, -0.1], (10, 70), 1.0)
    with pytest.raises(ValueError):
        DitherSpec([0.1, 0.1], (10, 70), 0.0)
    with pytest.raises(ValueError):
        DitherSpec([0.1], (10, 70), 1.0)
