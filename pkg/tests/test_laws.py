import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nucleate import series
from nucleate.laws import SplittingLaw


def _mass(law):
    # break at every table node so quad never straddles a kink
    pts = law.grid[1:-1] if law.grid else None
    return integrate.quad(lambda s: float(law.pdf(s)), 0, 1, epsabs=1e-10, limit=1000, points=pts)[0]


@pytest.mark.parametrize(
    "law",
    [SplittingLaw.uniform(), SplittingLaw.beta_law(2.5), SplittingLaw.beta_law(1.0), SplittingLaw.phi0()],
    ids=lambda l: l.kind + str(l.shape or ""),
)
def test_densities_are_normalized(law):
    assert _mass(law) == pytest.approx(1.0, abs=1e-8)


def test_tail_parameters():
    assert (SplittingLaw.uniform().beta, SplittingLaw.uniform().b, SplittingLaw.uniform().a) == (0.0, 1.0, 1.0)
    phi = SplittingLaw.phi0()
    assert phi.beta == 2.0 and phi.a == 0.0
    assert phi.b == pytest.approx(3 / series.MU)
    # phi0(s) / s^2 approaches b
    assert phi.pdf(1e-4) / 1e-8 == pytest.approx(phi.b, rel=1e-3)
    bl = SplittingLaw.beta_law(3.0)
    assert bl.beta == 2.0 and bl.b == pytest.approx(30.0)


def test_tabulated_law():
    g = np.linspace(0, 1, 201)
    law = SplittingLaw.from_table(g, 6 * g * (1 - g) * 3)
    assert _mass(law) == pytest.approx(1.0, abs=1e-4)
    assert law.beta == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="nope"),
        dict(kind="beta"),
        dict(kind="beta", shape=0.5),
        dict(kind="uniform", alpha=0.0),
        dict(kind="uniform", alpha=float("inf")),
        dict(kind="tabulated", grid=(0.0, 0.5, 1.0), values=(1.0, 2.0)),
        dict(kind="tabulated", grid=(0.0, 0.5, 0.9), values=(1.0, 1.0, 1.0)),
        dict(kind="tabulated", grid=(0.0, 0.5, 1.0), values=(1.0, -1.0, 1.0)),
        dict(kind="tabulated", grid=(0.0, 0.5, 1.0), values=(0.0, 0.0, 0.0)),
        dict(kind="tabulated", grid=(0.0, 0.5, 1.0), values=(0.0, 1.0, 2.0)),
    ],
)
def test_invalid_laws_rejected(kwargs):
    with pytest.raises(ValueError):
        SplittingLaw(**kwargs)


def test_pdf_zero_outside():
    law = SplittingLaw.beta_law(2.0)
    assert law.pdf(-0.1) == 0.0 and law.pdf(1.5) == 0.0
    assert np.isfinite(law.pdf(0.0))


@settings(max_examples=60, deadline=None)
@given(st.floats(1.0, 8.0), st.floats(0.0, 1.0))
def test_beta_density_symmetric(shape, x):
    law = SplittingLaw.beta_law(shape)
    assert law.pdf(x) == pytest.approx(law.pdf(1 - x), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("law", [SplittingLaw.uniform(), SplittingLaw.beta_law(2.0), SplittingLaw.phi0()],
                         ids=lambda l: l.kind)
def test_sampling_matches_cdf(law):
    from nucleate.stats import ks_critical, ks_one_sample

    x = law.sample(np.random.default_rng(3), 20_000)
    assert ks_one_sample(x, law.table.cdf) < ks_critical(0.001, x.size)
