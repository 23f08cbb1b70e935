import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import gaussian
from hardynls.errors import ConfigurationError, DomainError, ResolutionError, SingularModelError, UsageError
from hardynls.radial import (
    ModelParams,
    RadialField,
    apply_H,
    bottom_of_spectrum,
    gaussian_quadrature_error,
    hardy_constant,
    hardy_slack,
    inner,
    make_grid,
    mass,
    model_violations,
    observables,
    quadratic_form,
    scale_field,
    weinstein,
)

PI32 = math.pi**1.5


def oracle_radial(f, d=3):
    """sigma_{d-1} * int_0^inf f(r) r^(d-1) dr by adaptive quadrature."""
    sigma = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    val, _ = quad(lambda r: f(r) * r ** (d - 1), 0, np.inf, epsabs=0, epsrel=1e-13, limit=400)
    return sigma * val


# -- model parameters -------------------------------------------------------------


def test_lambda_and_rho_formulas():
    p = ModelParams(3, 3 / 16, 4 / 3)
    assert p.lambda_d == 0.25
    assert p.rho == pytest.approx(0.25, abs=1e-15)
    p4 = ModelParams(4, -1.0, 1.0)
    assert p4.rho == pytest.approx(1 - math.sqrt(2), abs=1e-15)
    assert hardy_constant(5) == 2.25


@pytest.mark.parametrize("c,sign", [(-0.5, -1), (0.1, 1), (0.2, 1)])
def test_rho_sign_follows_c(c, sign):
    p = ModelParams(3, c, 1.0)
    assert np.sign(p.rho) == sign
    if c > 0:
        assert p.rho < (p.d - 2) / 2


def test_c_at_hardy_constant_rejected_with_inequality():
    with pytest.raises(ConfigurationError) as exc:
        ModelParams(3, 0.25, 1.0)
    assert "c < lambda(3) = 0.25" in str(exc.value)


def test_alpha_above_energy_critical_rejected():
    assert any("4/(d-2)" in v for v in model_violations(3, 0.1, 4.5))


def test_c_zero_needs_reference_mode():
    with pytest.raises(ConfigurationError):
        ModelParams(3, 0.0, 1.0)
    assert ModelParams(3, 0.0, 1.0, reference=True).rho == 0.0


def test_all_violations_reported():
    assert len(model_violations(3, 1.0, -1.0)) == 2


# -- grids ------------------------------------------------------------------------


def test_uniform_grid_endpoint_and_size():
    g = make_grid(8192, 32.0, "uniform")
    assert g.N == 8192 and g.r[-1] == 32.0
    assert np.all(np.diff(g.r) > 0) and g.r[0] > 0


def test_tiny_grid_ball_volume():
    g = make_grid(16, 1.0, "uniform")
    vol = float(np.sum(g.weights(3)))
    assert vol == pytest.approx(4 * math.pi / 3, rel=1e-2)


def test_geometric_grid_gaussian_moment():
    g = make_grid(4096, 20.0, 1.002)
    assert gaussian_quadrature_error(g, 3) < 1e-8
    assert np.all(g.weights(3) > 0)


def test_geometric_grid_refines_origin():
    g = make_grid(1024, 20.0, 1.01)
    u = make_grid(1024, 20.0, "uniform")
    assert g.r[0] < 1e-3 * u.r[0]


@pytest.mark.parametrize("N,R", [(8, 1.0), (32, 0.0), (32, -1.0)])
def test_bad_grid_sizes(N, R):
    with pytest.raises(ConfigurationError):
        make_grid(N, R)


def test_bad_grading_ratio():
    with pytest.raises(ConfigurationError):
        make_grid(64, 1.0, 1.0)


# -- observables ------------------------------------------------------------------


def test_zero_field_observables():
    g = make_grid(64, 10.0)
    p = ModelParams(3, 0.1, 1.0)
    obs = observables(RadialField.zeros(g), p)
    assert all(v == 0 for v in obs.to_dict().values())


def test_gaussian_moments_classical():
    g = make_grid(4096, 20.0, 1.002)
    p = ModelParams(3, 0.0, 2.0, reference=True)
    obs = observables(gaussian(g), p)
    assert obs.mass == pytest.approx(PI32, rel=1e-8)
    assert obs.kinetic == pytest.approx(oracle_radial(lambda r: r * r * math.exp(-r * r)), rel=1e-5)
    assert obs.kinetic == pytest.approx(1.5 * PI32, rel=1e-5)
    assert obs.lp_alpha2 == pytest.approx((math.pi / 2) ** 1.5, rel=1e-6)


def test_gaussian_hardy_term_and_norm():
    g = make_grid(4096, 20.0, 1.002)
    p = ModelParams(3, 1 / 8, 2.0)
    obs = observables(gaussian(g), p)
    hardy_oracle = oracle_radial(lambda r: math.exp(-r * r) / (r * r))
    assert hardy_oracle == pytest.approx(2 * PI32, rel=1e-12)
    assert obs.hardy_term == pytest.approx(hardy_oracle, rel=1e-5)
    assert obs.hardy_norm_sq == obs.kinetic - p.c * obs.hardy_term


def test_energy_decomposition_is_exact():
    g = make_grid(1024, 20.0, 1.006)
    p = ModelParams(3, 0.15, 4 / 3)
    o = observables(gaussian(g, 1.3, 0.7), p)
    assert o.energy == 0.5 * o.kinetic - 0.5 * p.c * o.hardy_term - o.lp_alpha2 / (p.alpha + 2)
    assert o.hardy_norm_sq == o.kinetic - p.c * o.hardy_term


def test_grid_mismatch_is_usage_error():
    p = ModelParams(3, 0.1, 1.0)
    u = gaussian(make_grid(64, 10.0))
    v = gaussian(make_grid(128, 10.0))
    with pytest.raises(UsageError):
        inner(u, v, p)
    with pytest.raises(UsageError):
        u + v


def test_field_is_immutable_and_boundary_zero():
    g = make_grid(64, 5.0)
    u = RadialField(g, np.ones(64))
    assert u.values[-1] == 0
    with pytest.raises(AttributeError):
        u.values = None
    with pytest.raises(ValueError):
        u.values[0] = 2.0


def test_nonfinite_field_rejected():
    g = make_grid(32, 5.0)
    with pytest.raises(DomainError):
        RadialField(g, np.full(32, np.nan))


# -- Weinstein functional -----------------------------------------------------------


def test_weinstein_homogeneity():
    g = make_grid(1024, 20.0, 1.006)
    p = ModelParams(3, 0.1, 4 / 3)
    u = gaussian(g)
    j = weinstein(u, p)
    assert j > 0
    assert weinstein(3 * u, p) == pytest.approx(j, rel=1e-13)
    for k in (1e-3, 1.0, 1e3):
        assert abs(weinstein(k * u, p) - j) <= 1e-12 * j


def test_weinstein_gaussian_oracle():
    g = make_grid(4096, 20.0, 1.002)
    p = ModelParams(3, 0.0, 2.0, reference=True)
    M, K, L = PI32, 1.5 * PI32, (math.pi / 2) ** 1.5
    # ||u||_2^{(4-(d-2)a)/2} = M^{(4-(d-2)a)/4}, ||u||_c^{da/2} = K^{da/4}
    expected = L / (M ** ((4 - 2) / 4) * K ** (6 / 4))
    assert weinstein(gaussian(g), p) == pytest.approx(expected, rel=1e-5)


def test_weinstein_scale_invariance():
    g = make_grid(4096, 40.0, 1.003)
    p = ModelParams(3, -0.5, 1.0)
    u = gaussian(g, 2.0)
    j = weinstein(u, p)
    assert weinstein(scale_field(u, 1.7, p), p) == pytest.approx(j, rel=1e-5)


def test_weinstein_zero_field_domain_error():
    g = make_grid(64, 10.0)
    with pytest.raises(DomainError):
        weinstein(RadialField.zeros(g), ModelParams(3, 0.1, 1.0))


def test_weinstein_nonpositive_form_is_singular():
    from hardynls.radial.functionals import weinstein_from, ObservableSet

    obs = ObservableSet(1.0, 1.0, 10.0, -0.5, 1.0, 0.0)
    with pytest.raises(SingularModelError):
        weinstein_from(obs, ModelParams(3, 0.1, 1.0))


# -- the Hardy operator ----------------------------------------------------------------


def test_form_matches_kinetic_for_c_zero():
    g = make_grid(2048, 10.0)
    p = ModelParams(3, 0.0, 1.0, reference=True)
    r = np.asarray(g.r)
    bump = RadialField(g, np.where(r < 4, np.exp(-1 / np.maximum(16 - r**2, 1e-300)) * math.e ** (1 / 16), 0.0))
    obs = observables(bump, p)
    assert inner(bump, apply_H(bump, p), p).real == pytest.approx(obs.kinetic, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), c=st.floats(-2.0, 0.24))
def test_H_is_self_adjoint(seed, c):
    if c == 0:
        c = 0.01
    g = make_grid(256, 10.0, 1.02)
    p = ModelParams(3, c, 1.0)
    rng = np.random.default_rng(seed)
    u = RadialField(g, rng.normal(size=256) + 1j * rng.normal(size=256))
    v = RadialField(g, rng.normal(size=256) + 1j * rng.normal(size=256))
    a = inner(u, apply_H(v, p), p)
    b = np.conj(inner(v, apply_H(u, p), p))
    assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)
    assert inner(u, apply_H(v, p), p) == pytest.approx(quadratic_form(u, v, p), rel=1e-10)


def test_quadratic_form_equals_hardy_norm():
    g = make_grid(1024, 20.0, 1.006)
    p = ModelParams(3, 3 / 16, 4 / 3)
    u = gaussian(g)
    assert inner(u, apply_H(u, p), p).real == pytest.approx(observables(u, p).hardy_norm_sq, rel=1e-10)


def test_bottom_of_spectrum_nonnegative():
    g = make_grid(1024, 20.0, 1.006)
    assert bottom_of_spectrum(g, ModelParams(3, 3 / 16, 1.0)) >= 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), c=st.floats(0.01, 0.24))
def test_discrete_hardy_inequality(seed, c):
    g = make_grid(256, 10.0, 1.02)
    p = ModelParams(3, c, 1.0)
    tau = hardy_slack(g, p)
    rng = np.random.default_rng(seed)
    u = RadialField(g, rng.normal(size=256))
    o = observables(u, p)
    assert o.hardy_norm_sq >= (1 - c / p.lambda_d - tau) * o.kinetic - 1e-12 * o.kinetic
    assert o.hardy_term <= o.kinetic / p.lambda_d * (1 + 1e-12)


# -- scaling ---------------------------------------------------------------------------


def test_scale_identity():
    g = make_grid(256, 10.0)
    u = gaussian(g)
    assert scale_field(u, 1.0, ModelParams(3, 0.1, 1.0)) is u


def test_scale_preserves_mass():
    g = make_grid(4096, 40.0, 1.003)
    p = ModelParams(3, 0.1, 4 / 3)
    u = gaussian(g, 1.5)
    assert mass(scale_field(u, 2.0, p), p) == pytest.approx(mass(u, p), rel=1e-6)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_scaling_energy_law(lam):
    g = make_grid(4096, 40.0, 1.003)
    p = ModelParams(3, 0.1, 4 / 3)
    u = gaussian(g, 1.5)
    o = observables(u, p)
    predicted = lam**2 / 2 * o.hardy_norm_sq - lam ** (p.d * p.alpha / 2) / (p.alpha + 2) * o.lp_alpha2
    got = observables(scale_field(u, lam, p), p).energy
    assert got == pytest.approx(predicted, rel=1e-6)


@pytest.mark.parametrize("c", [0.1, -0.5])
def test_scaling_law_second_order_in_grid(c):
    # fields with the natural r^(-rho) behaviour at the origin have a smooth regular factor
    p = ModelParams(3, c, 4 / 3)
    errs = []
    for k, N in enumerate((512, 1024, 2048)):
        g = make_grid(N, 30.0, 1.02 ** (0.5**k))
        r = np.asarray(g.r)
        u = RadialField(g, r ** (-p.rho) * np.exp(-(r**2) / 4.5))
        o = observables(u, p)
        pred = 2 * o.hardy_norm_sq - 4 / (p.alpha + 2) * o.lp_alpha2
        got = observables(scale_field(u, 2.0, p, resolution_tol=1e-2), p).energy
        errs.append(abs(got - pred) / abs(pred))
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_scale_unresolvable_raises():
    g = make_grid(64, 10.0)
    p = ModelParams(3, 0.1, 1.0)
    with pytest.raises(ResolutionError):
        scale_field(gaussian(g), 50.0, p)
    with pytest.raises(DomainError):
        scale_field(gaussian(g), -1.0, p)
