"""Multi-agent reinforcement learning with targeted inter-agent communication."""

from .autograd.kernels import BACKEND as KERNEL_BACKEND
from .comm import CommConfig
from .config import RunConfig, TrainConfig
from .envs import make_env

__version__ = "0.1.0"

__all__ = ["CommConfig", "KERNEL_BACKEND", "RunConfig", "TrainConfig", "make_env", "__version__"]
