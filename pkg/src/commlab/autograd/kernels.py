"""Select the compiled kernel module, falling back to numpy.

Set ``COMMLAB_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("COMMLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _pykernels

sigmoid = _impl.sigmoid
masked_softmax = _impl.masked_softmax
softmax_backward = _impl.softmax_backward
gru_forward = _impl.gru_forward
gru_backward = _impl.gru_backward


def use_backend(name: str) -> None:
    """Switch kernels at runtime (``"python"`` or ``"compiled"``); for benchmarks and tests."""
    global BACKEND, sigmoid, masked_softmax, softmax_backward, gru_forward, gru_backward
    if name == "python":
        mod = _pykernels
    elif name == "compiled":
        from . import _ckernels as mod  # raises ImportError if not built
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    sigmoid = mod.sigmoid
    masked_softmax = mod.masked_softmax
    softmax_backward = mod.softmax_backward
    gru_forward = mod.gru_forward
    gru_backward = mod.gru_backward
