from . import layers, optim
from .checkpoint import CheckpointError, load_checkpoint, read_meta, save_checkpoint
from .layers import (
    BatchNormState,
    ConfigurationError,
    DimensionError,
    affine,
    batch_norm,
    dropout,
    gelu,
    group_norm,
    gru_cell,
    layer_norm,
    relu,
    sigmoid,
    softmax,
    swish,
    tanh,
)
from .optim import Adam, NanGradientError, Sgd, clip_global_norm
from .params import ParamStore, init_affine, init_gru, init_norm, soft_update, uniform_fan_in
from .tensor import (
    Tensor,
    as_tensor,
    concat,
    is_grad_enabled,
    matmul,
    no_grad,
    put_rows,
    reshape,
    stop_gradient,
    take_along_last,
    take_rows,
    transpose,
)
