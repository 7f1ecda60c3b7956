"""Shared oracles for the test suite."""
import numpy as np

from pegformer.numkit import tensor as T

# criterion number -> (passed, detail); filled by test_acceptance.py, printed by conftest.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def central_jvp(f, x: np.ndarray, d: np.ndarray, h: float = 1e-4) -> float:
    """Directional derivative of scalar ``f`` at ``x`` along ``d``.

    Fourth-order central stencil: truncation error O(h^4) rather than O(h^2),
    so curved losses are still resolved to ~1e-8 relative at h = 1e-4.
    """
    fp1, fm1 = f(x + h * d), f(x - h * d)
    fp2, fm2 = f(x + 2 * h * d), f(x - 2 * h * d)
    return (8 * (fp1 - fm1) - (fp2 - fm2)) / (12 * h)


def rel_err(a: float, b: float, floor: float = 1e-8) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def model_grad_error(model, H, sigma2=0.1, pt=1.0, a=None, seed=0, h=1e-4) -> float:
    """Worst relative error between analytic and finite-difference JVPs, one
    random direction per parameter tensor."""
    rng = np.random.default_rng(seed)
    params = model.param_list()
    grads = T.grad(model.loss(H, sigma2, pt, a), params)
    worst = 0.0
    for p, g in zip(params, grads):
        d = rng.standard_normal(p.shape)
        base = p.data.copy()

        def f(x):
            p.data = x
            return float(model.loss(H, sigma2, pt, a).data)

        fd = central_jvp(f, base, d, h)
        p.data = base
        worst = max(worst, rel_err(float((g * d).sum()), fd))
    return worst


def op_grad_error(fn, inputs: list[np.ndarray], seed=0, h=1e-4) -> float:
    """Check every input of a Tensor-valued op via a random weighting of its output."""
    rng = np.random.default_rng(seed)
    ts = [T.Tensor(x, requires_grad=True) for x in inputs]
    out = fn(*ts)
    w = rng.standard_normal(out.shape)
    loss = T.tsum(out * w)
    grads = T.grad(loss, ts)
    worst = 0.0
    for i, (x, g) in enumerate(zip(inputs, grads)):
        d = rng.standard_normal(x.shape)

        def f(z):
            args = [T.Tensor(v) for v in inputs]
            args[i] = T.Tensor(z)
            return float((fn(*args).data * w).sum())

        worst = max(worst, rel_err(float((g * d).sum()), central_jvp(f, x, d, h)))
    return worst
