import numpy as np
import pytest

from gradhyd.errors import ConfigError, ShapeMismatch
from gradhyd.models import (
    Hmodel,
    Hymod,
    LinearReservoir,
    check_dynamics_consistency,
    get_model,
    phi_shape,
    phi_smooth,
)
from gradhyd.models.hmodel import EXP_CAP
from gradhyd.numdiff import DiffConfig, richardson_derivative

MODELS = [Hymod(), Hmodel(), LinearReservoir()]


def random_input(model, rng):
    theta = model.space.from_unit(rng.uniform(0.02, 0.98, model.d))
    return theta, model.sample_state(theta, rng), rng.uniform(0, 30), rng.uniform(0, 6)


# -- hymod -------------------------------------------------------------------

def test_hymod_zero_state_structure():
    m = Hymod()
    th = m.space.midpoint()
    ev = m.dynamics(np.zeros(6), th, 0.0, 0.0)
    ks, kf = th[3], th[4]
    assert np.all(ev.f == 0.0)
    J = ev.jf_x
    expected = {(1, 1): -ks, (2, 2): -kf, (3, 2): kf, (3, 3): -kf, (4, 3): kf, (4, 4): -kf, (5, 1): ks, (5, 4): kf}
    for (i, j), v in expected.items():
        assert J[i, j] == pytest.approx(v, abs=0)
    assert np.all(J[:, 5] == 0.0)


def test_hymod_zero_state_consistency():
    m = Hymod()
    rep = check_dynamics_consistency(m, m.space.midpoint(), np.zeros(6), 0.0, 0.0)
    assert rep.max_err_x < 1e-8 and rep.max_err_theta < 1e-8


def test_hymod_interior_point():
    m = Hymod()
    th = m.space.midpoint()
    x = np.array([0.4 * th[0], 3.0, 2.0, 1.5, 1.0, 7.0])
    rep = check_dynamics_consistency(m, th, x, 10.0, 3.0)
    assert rep.max_err < 1e-6
    assert not rep.flagged


def test_hymod_parameter_jacobian_structure(rng):
    m = Hymod()
    for _ in range(20):
        th, x, p, ep = random_input(m, rng)
        J = m.dynamics(x, th, p, ep).jf_theta
        assert np.all(J[3, :4] == 0.0) and np.all(J[4, :4] == 0.0)


def test_hymod_b_derivative_zero_at_empty_store():
    m = Hymod()
    J = m.dynamics(np.zeros(6), m.space.midpoint(), 10.0, 0.0).jf_theta
    assert J[0, 1] == 0.0


def test_hymod_clamp_straddle_is_flagged():
    m = Hymod()
    th = m.space.midpoint()
    x = np.array([th[0], 5.0, 5.0, 5.0, 5.0, 0.0])
    rep = check_dynamics_consistency(m, th, x, 10.0, 3.0)
    assert ("x", 0, 0) in rep.flagged


# -- hmodel ------------------------------------------------------------------

def test_hmodel_fast_reservoir_example():
    m = Hmodel()
    th = m.space.midpoint()
    th[5] = 0.5  # r_f
    x = np.array([0.0, 0.0, 2.0, 0.0, 0.0])
    ev = m.dynamics(x, th, 0.0, 0.0)
    assert ev.f[2] == pytest.approx(-4.0, abs=1e-14)
    assert ev.f[4] == pytest.approx(4.0, abs=1e-14)
    assert ev.jf_theta[2, 5] == pytest.approx(8.0, abs=1e-12)


def test_hmodel_interior_point(rng):
    m = Hmodel()
    for _ in range(5):
        th, x, p, ep = random_input(m, rng)
        assert check_dynamics_consistency(m, th, x, p, ep).max_err < 1e-6


def test_hmodel_jacobian_zero_pattern(rng):
    """Structural zeros: nothing depends on s_q, s_f and s_s only drain themselves."""
    m = Hmodel()
    for _ in range(20):
        th, x, p, ep = random_input(m, rng)
        J = m.dynamics(x, th, p, ep).jf_x
        assert np.all(J[:, 4] == 0.0)
        assert np.all(J[0, 1:] == 0.0)
        assert np.all(J[1, 2:] == 0.0)
        assert J[2, 3] == 0.0 and J[3, 2] == 0.0


def test_phi_literal_examples():
    for y in (-10.0, 0.5, 3.0, 100.0):
        assert phi_smooth(0.0, y).value == pytest.approx(y, rel=1e-12)
    assert phi_smooth(1.0, 1.0).value == pytest.approx(1.0, abs=1e-15)


def closed_literal(x, y):
    return (1 - np.exp(-x * y)) / (1 - np.exp(-x))


def closed_shape(x, y):
    return (1 - np.exp(-x * y)) / (1 - np.exp(-y))


@pytest.mark.parametrize("phi,closed", [(phi_smooth, closed_literal), (phi_shape, closed_shape)])
def test_phi_partials_match_fd(phi, closed):
    cfg = DiffConfig()
    for x, y in [(0.5, 2.0), (0.3, -7.0), (0.9, 40.0), (0.05, 0.5)]:
        ev = phi(x, y)
        assert ev.value == pytest.approx(closed(x, y), rel=1e-13)
        dx = richardson_derivative(lambda t: closed(t, y), x, DiffConfig(base_step=1e-3)).value
        dy = richardson_derivative(lambda t: closed(x, t), y, cfg).value
        assert ev.d_dx == pytest.approx(dx, rel=1e-9, abs=1e-9)
        assert ev.d_dy == pytest.approx(dy, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("y", [-10.0, 0.5, 100.0])
def test_phi_literal_continuity_at_switch(y):
    lo = phi_smooth(1e-8 * (1 - 1e-9), y)
    hi = phi_smooth(1e-8 * (1 + 1e-9), y)
    assert abs(lo.value - hi.value) <= 1e-9
    assert abs(lo.d_dy - hi.d_dy) <= 1e-9


def test_phi_shape_continuity_at_series_switch():
    for x in (0.0, 0.3, 1.0):
        lo = phi_shape(x, 1e-4 * (1 - 1e-9))
        hi = phi_shape(x, 1e-4 * (1 + 1e-9))
        assert abs(lo.value - hi.value) <= 1e-12
        assert abs(lo.d_dx - hi.d_dx) <= 1e-10
        assert abs(lo.d_dy - hi.d_dy) <= 1e-10
    assert phi_shape(0.3, 0.0).value == pytest.approx(0.3, abs=1e-15)


def test_phi_shape_endpoints():
    for y in (-50.0, -10.0, 0.5, 10.0, 50.0):
        assert phi_shape(0.0, y).value == 0.0
        assert phi_shape(1.0, y).value == pytest.approx(1.0, abs=1e-14)


def test_phi_overflow_cap():
    # -x*y beyond the cap: value finite, the capped exponential contributes no derivative
    ev = phi_smooth(1.0, -400.0)
    assert np.isfinite(ev.value)
    assert ev.value == pytest.approx((1 - np.exp(EXP_CAP)) / (1 - np.exp(-1.0)), rel=1e-12)
    assert ev.d_dy == 0.0


def test_hmodel_literal_variant_runs():
    m = Hmodel(smoothing="literal")
    ev = m.dynamics(np.array([1.0, 100.0, 1.0, 1.0, 0.0]), m.space.midpoint(), 5.0, 2.0)
    assert np.all(np.isfinite(ev.f))
    with pytest.raises(ConfigError):
        Hmodel(smoothing="other")


# -- shared contract ---------------------------------------------------------

@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_conservation_identity(model, rng):
    for _ in range(1000):
        th, x, p, ep = random_input(model, rng)
        ev = model.dynamics(x, th, p, ep)
        assert abs(ev.f.sum() + ev.et_actual - model.external_input(p, ep)) <= 1e-12


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_discharge_reservoir_non_depleting(model, rng):
    for _ in range(300):
        th, x, p, ep = random_input(model, rng)
        assert model.dynamics(x, th, p, ep).f[-1] >= 0.0


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_consistency_random_interior(model, rng):
    worst = 0.0
    for _ in range(100):
        th, x, p, ep = random_input(model, rng)
        rep = check_dynamics_consistency(model, th, x, p, ep)
        assert not rep.flagged
        worst = max(worst, rep.max_err)
    assert worst < 1e-6


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_slightly_negative_states_tolerated(model):
    th = model.space.midpoint()
    ev = model.dynamics(np.full(model.m, -1e-6), th, 1.0, 1.0)
    assert np.all(np.isfinite(ev.f))


def test_dynamics_is_pure():
    m = Hymod()
    th = m.space.midpoint()
    x = np.array([100.0, 1, 1, 1, 1, 0])
    a = m.dynamics(x, th, 5.0, 2.0)
    b = m.dynamics(x, th, 5.0, 2.0)
    assert np.array_equal(a.f, b.f) and np.array_equal(a.jf_theta, b.jf_theta)
    assert np.array_equal(x, [100.0, 1, 1, 1, 1, 0])


def test_registry_and_shapes():
    assert get_model("hymod").m == 6 and get_model("hmodel").d == 7
    with pytest.raises(ConfigError):
        get_model("sacsma")
    with pytest.raises(ShapeMismatch):
        Hymod().dynamics(np.zeros(5), Hymod().space.midpoint(), 0, 0)
