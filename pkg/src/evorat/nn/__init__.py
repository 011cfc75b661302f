from .layers import GRU, Dense, MaxPoolTime, gru_forward, max_pool_time, sigmoid, softmax, softmax_cross_entropy
from .optim import Adam, AdamState, adam_step
from .params import ParamLayout, flatten_params, init_uniform_fan_in, unflatten_params

__all__ = [
    "GRU", "Dense", "MaxPoolTime", "gru_forward", "max_pool_time", "sigmoid", "softmax",
    "softmax_cross_entropy", "Adam", "AdamState", "adam_step", "ParamLayout",
    "flatten_params", "unflatten_params", "init_uniform_fan_in",
]
