import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradhyd.errors import OnBoundary, ShapeMismatch
from gradhyd.models import Hymod
from gradhyd.numdiff import fd_gradient
from gradhyd.timeseries import ParameterSpace
from gradhyd.transforms import from_unit_cube, rescale_jacobian, to_physical, to_unconstrained

SPACE = Hymod().space
ONE = ParameterSpace(("s",), [50.0], [1000.0])


def test_midpoint():
    pt = to_physical(np.zeros(1), ONE)
    assert pt.theta_bar[0] == 0.5 and pt.theta[0] == 525.0 and pt.chain[0] == 237.5


def test_saturation():
    pt = to_physical(np.array([40.0]), ONE)
    assert pt.theta_bar[0] < 1.0 and pt.theta[0] <= 1000.0 and pt.chain[0] > 0


def test_logit_values():
    assert to_unconstrained(SPACE.midpoint(), SPACE).vartheta == pytest.approx(np.zeros(5), abs=1e-15)
    pt = from_unit_cube(np.full(5, 0.75), SPACE)
    assert pt.vartheta == pytest.approx(np.full(5, np.log(3.0)), abs=1e-15)
    with pytest.raises(OnBoundary):
        to_unconstrained(SPACE.lower, SPACE)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(-30, 30)))
def test_roundtrip_within_conditioning(v):
    """Far out, theta carries fewer digits than vartheta: the loss of accuracy is
    bounded by rounding in theta amplified by d vartheta / d theta."""
    pt = to_physical(v, SPACE)
    back = to_unconstrained(pt.theta, SPACE).vartheta
    eps = np.finfo(float).eps
    bound = 4 * eps * (np.abs(pt.theta) + SPACE.width) / pt.chain + 1e-13
    assert np.all(np.abs(back - v) <= bound)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 5, elements=st.floats(-8, 8)))
def test_roundtrip(v):
    pt = to_physical(v, SPACE)
    back = to_unconstrained(pt.theta, SPACE)
    assert np.max(np.abs(back.vartheta - v)) <= 1e-12
    assert np.max(np.abs(back.theta_bar - pt.theta_bar)) <= 1e-12


def test_monotone():
    vs = np.linspace(-10, 10, 101)
    th = [to_physical(np.full(5, v), SPACE).theta for v in vs]
    assert np.all(np.diff(np.array(th), axis=0) > 0)


def test_chain_matches_fd(rng):
    for _ in range(50):
        v = rng.uniform(-6, 6, 5)
        pt = to_physical(v, SPACE)
        for j in range(5):
            fd = fd_gradient(lambda w: to_physical(w, SPACE).theta[j], v)[j]
            assert fd == pytest.approx(pt.chain[j], rel=1e-8)


def test_rescale():
    pt = to_physical(np.zeros(2), ParameterSpace(("a", "b"), [0, 0], [8.0, 12.0]))
    assert np.allclose(pt.chain, [2.0, 3.0])
    assert np.allclose(rescale_jacobian(np.eye(2), pt), np.diag([2.0, 3.0]))
    ones = to_physical(np.zeros(2), ParameterSpace(("a", "b"), [0, 0], [4.0, 4.0]))
    J = np.arange(6.0).reshape(3, 2)
    assert np.array_equal(rescale_jacobian(J, ones), J)
    with pytest.raises(ShapeMismatch):
        rescale_jacobian(np.ones((3, 3)), pt)
