from .autodiff import (
    NonFiniteLossError,
    Tensor,
    backward,
    clip,
    concat,
    exp,
    log,
    matmul,
    minimum,
    no_grad,
    sigmoid,
    softplus,
    square,
    tanh,
    tmean,
    tsum,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .layers import STD_FLOOR, Dense, GaussianHead, GruCell, ParamStore, glorot_uniform
from .optim import Adam, clip_global_norm

__all__ = [
    "Adam",
    "CheckpointError",
    "Dense",
    "GaussianHead",
    "GruCell",
    "NonFiniteLossError",
    "ParamStore",
    "STD_FLOOR",
    "Tensor",
    "backward",
    "clip",
    "clip_global_norm",
    "concat",
    "exp",
    "glorot_uniform",
    "load_checkpoint",
    "log",
    "matmul",
    "minimum",
    "no_grad",
    "save_checkpoint",
    "sigmoid",
    "softplus",
    "square",
    "tanh",
    "tmean",
    "tsum",
]
