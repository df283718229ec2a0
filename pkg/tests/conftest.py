import numpy as np
import pytest

from commlab.autograd import Tensor, backward, default_dtype, kernels, ops

BACKENDS = ["python"]
try:
    kernels.use_backend("compiled")
    BACKENDS.append("compiled")
except ImportError:
    pass
kernels.use_backend(BACKENDS[-1])


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = kernels.BACKEND
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)


@pytest.fixture
def f64():
    with default_dtype(np.float64):
        yield


def numeric_grad(fn, arrays, i, eps=1e-6):
    """Central differences of scalar ``fn(*arrays)`` w.r.t. ``arrays[i]``."""
    base = [a.copy() for a in arrays]
    g = np.zeros_like(base[i])
    it = np.nditer(base[i], flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus = [a.copy() for a in base]
        minus = [a.copy() for a in base]
        plus[i][idx] += eps
        minus[i][idx] -= eps
        g[idx] = (fn(*plus) - fn(*minus)) / (2 * eps)
    return g


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8))


def op_grad_error(build, arrays, seed=0):
    """Relative error of autograd vs finite differences for ``sum(build(*tensors) * w)``.

    A fixed random projection ``w`` turns any output into a scalar so every
    output element contributes.
    """
    with default_dtype(np.float64):
        probe = build(*[Tensor(a) for a in arrays])
        w = np.random.default_rng(seed).normal(size=probe.shape)

        def scalar(*arrs):
            return float((build(*[Tensor(a) for a in arrs]).data * w).sum())

        ts = [Tensor(a.copy(), requires_grad=True) for a in arrays]
        out = build(*ts)
        backward(ops.sum(ops.mul(out, Tensor(w))))
        worst = 0.0
        for i, t in enumerate(ts):
            num = numeric_grad(scalar, arrays, i)
            worst = max(worst, rel_err(t.grad, num))
    return worst


def check_op_grad(build, arrays, tol=1e-4, seed=0):
    worst = op_grad_error(build, arrays, seed)
    assert worst < tol, f"relative error {worst:.2e}"
    return worst


# -- acceptance report ----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """``report(criterion, ok, detail)`` records one line for the summary."""
    def record(criterion: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[criterion] = (bool(ok), detail)
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
