import os
import subprocess
import sys

import numpy as np
import pytest

from linfest import kernels
from linfest.posterior import gauss_hermite_measure, mixture_posterior_arrays
from linfest.signal_model import PriorSpec

BACKENDS = [pytest.param(kernels.lp_minimize_python, id="numpy")]
if kernels.lp_minimize_compiled is not None:
    BACKENDS.append(pytest.param(kernels.lp_minimize_compiled, id="cython"))


def _measure(n=400, seed=1):
    prior = PriorSpec.mixture([0.2, 0.3, 0.5], [10.0, 1.0, 0.0])
    q = np.random.default_rng(seed).normal(0, 2, n)
    return gauss_hermite_measure(*mixture_posterior_arrays(prior, q, 0.05))


def _objective_deriv(pts, wts, t, p):
    d = t - pts
    return np.sum(wts * np.sign(d) * np.abs(d) ** (p - 1))


@pytest.mark.parametrize("fn", BACKENDS)
@pytest.mark.parametrize("p", [1.3, 2.0, 5.0, 10.0, 15.0, 7.5])
def test_minimizer_zeroes_the_derivative(fn, p):
    pts, wts = _measure()
    t, bad = fn(pts, wts, p, 1e-12)
    assert bad == -1
    for i in range(0, pts.shape[0], 37):
        span = pts[i].max() - pts[i].min()
        lo = _objective_deriv(pts[i], wts[i], t[i] - 1e-7 * span, p)
        hi = _objective_deriv(pts[i], wts[i], t[i] + 1e-7 * span, p)
        assert lo <= 0 <= hi


@pytest.mark.parametrize("fn", BACKENDS)
def test_p2_is_weighted_mean(fn):
    pts, wts = _measure()
    t, _ = fn(pts, wts, 2.0, 1e-12)
    mean = np.sum(pts * wts, axis=1) / wts.sum(axis=1)
    assert np.allclose(t, mean, atol=1e-10)


@pytest.mark.parametrize("fn", BACKENDS)
def test_degenerate_rows(fn):
    pts = np.array([[0.0, 0.0, 0.0], [2.0, 2.0, 2.0], [0.0, 1.0, 3.0]])
    wts = np.array([[0.2, 0.3, 0.5], [0.1, 0.1, 0.8], [1.0, 0.0, 0.0]])
    t, bad = fn(pts, wts, 4.0, 1e-12)
    assert bad == -1
    assert t.tolist() == [0.0, 2.0, 0.0]


@pytest.mark.parametrize("fn", BACKENDS)
def test_rejects_p_at_most_one(fn):
    with pytest.raises(ValueError):
        fn(np.zeros((1, 2)), np.ones((1, 2)), 1.0, 1e-12)


@pytest.mark.skipif(kernels.lp_minimize_compiled is None, reason="extension not built")
@pytest.mark.parametrize("p", [1.5, 4.0, 10.0, 15.0, 33.3])
def test_backends_agree(p):
    pts, wts = _measure(2000, seed=7)
    a, _ = kernels.lp_minimize_python(pts, wts, p, 1e-12)
    b, _ = kernels.lp_minimize_compiled(pts, wts, p, 1e-12)
    assert np.allclose(a, b, atol=1e-10, rtol=0)


def test_env_var_forces_fallback():
    env = dict(os.environ, LINFEST_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from linfest import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
