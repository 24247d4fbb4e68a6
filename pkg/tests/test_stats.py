import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from nucleate.stats import ks_critical, ks_one_sample, ks_two_sample


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=200))
def test_one_sample_matches_scipy(xs):
    ours = ks_one_sample(xs, sps.norm.cdf)
    ref = sps.kstest(xs, "norm").statistic
    assert ours == pytest.approx(ref, abs=1e-12)


# scipy's asymptotic p-value divides by zero for tiny samples; only its statistic is used here
@pytest.mark.filterwarnings("ignore:divide by zero:RuntimeWarning")
@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=100), st.lists(st.floats(-5, 5), min_size=1, max_size=100))
def test_two_sample_matches_scipy(a, b):
    assert ks_two_sample(a, b) == pytest.approx(sps.ks_2samp(a, b, method="asymp").statistic, abs=1e-12)


def test_critical_values():
    # asymptotic 1% constant is about 1.6276
    assert ks_critical(0.01, 10_000) == pytest.approx(1.6276 / 100, rel=1e-3)
    assert ks_critical(0.01, 100, 100) == pytest.approx(1.6276 / np.sqrt(50), rel=1e-3)


def test_empty_samples_rejected():
    with pytest.raises(ValueError):
        ks_one_sample([], sps.norm.cdf)
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])
