import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from delaymv.measure import EmpiricalMeasure, mean, second_moment, w2_1d


def test_mean_symmetric_pair():
    assert mean(EmpiricalMeasure([1.0, -1.0])) == pytest.approx(0.0)


def test_mean_single_atom():
    np.testing.assert_allclose(mean(EmpiricalMeasure([[2.0, -3.0]])), [2.0, -3.0])


def test_mean_hand_value():
    assert mean(EmpiricalMeasure([0.0, 1.0, 2.0, 3.0]))[0] == pytest.approx(1.5)


def test_second_moment_values():
    assert second_moment(EmpiricalMeasure([1.0, -1.0])) == pytest.approx(1.0)
    assert second_moment(EmpiricalMeasure([0.0, 0.0, 0.0])) == 0.0
    assert second_moment(EmpiricalMeasure([3.0, 4.0])) == pytest.approx(12.5)


def test_w2_identity_and_dirac():
    mu = EmpiricalMeasure([0.3, -1.2, 5.0])
    assert w2_1d(mu, mu) == 0.0
    assert w2_1d(EmpiricalMeasure([2.0]), EmpiricalMeasure([-3.0])) == pytest.approx(5.0)


def test_w2_sorted_beats_crossed_coupling():
    mu = EmpiricalMeasure([0.0, 2.0])
    nu = EmpiricalMeasure([1.0, 3.0])
    # brute force over both couplings of two atoms
    costs = []
    for perm in itertools.permutations(range(2)):
        costs.append(
            np.sqrt(np.mean([(mu.samples[i, 0] - nu.samples[perm[i], 0]) ** 2 for i in range(2)]))
        )
    assert w2_1d(mu, nu) == pytest.approx(min(costs))
    assert w2_1d(mu, nu) == pytest.approx(1.0)


def test_w2_rejects_unsupported_inputs():
    with pytest.raises(ValueError):
        w2_1d(EmpiricalMeasure([[1.0, 2.0]]), EmpiricalMeasure([[0.0, 0.0]]))
    with pytest.raises(ValueError):
        w2_1d(EmpiricalMeasure([1.0]), EmpiricalMeasure([1.0, 2.0]))


def test_second_moment_matches_w2_to_zero():
    rng = np.random.default_rng(0)
    for _ in range(20):
        samples = rng.normal(size=7)
        mu = EmpiricalMeasure(samples)
        zero = EmpiricalMeasure(np.zeros(7))
        assert second_moment(mu) == pytest.approx(w2_1d(mu, zero) ** 2)


# tiny magnitudes are snapped to zero so squared differences cannot underflow
finite_sample = st.lists(
    st.floats(-1e6, 1e6, allow_nan=False).map(lambda v: 0.0 if abs(v) < 1e-6 else v),
    min_size=4,
    max_size=4,
)


@given(finite_sample, finite_sample, finite_sample)
def test_w2_is_a_metric(a, b, c):
    mu, nu, rho = (EmpiricalMeasure(np.array(s)) for s in (a, b, c))
    dab = w2_1d(mu, nu)
    assert dab == pytest.approx(w2_1d(nu, mu))
    assert dab <= w2_1d(mu, rho) + w2_1d(rho, nu) + 1e-7
    if sorted(a) == sorted(b):
        assert dab == 0.0
    else:
        assert dab > 0.0


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    samples = rng.normal(size=(9, 2))
    mu = EmpiricalMeasure(samples)
    shuffled = EmpiricalMeasure(samples[rng.permutation(9)])
    np.testing.assert_allclose(mean(mu), mean(shuffled))
    assert second_moment(mu) == pytest.approx(second_moment(shuffled))
