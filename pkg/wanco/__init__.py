from .config import RunConfig, load_run_config, resolve, variant_configs
from .diffcore import ParamStore, backprop_loss, eval_with_input_grad, finite_diff_grad, value_and_grad
from .errors import ConfigError, ConvergenceError, DimensionError, EmptyBatchError, NonFiniteError, WancoError
from .export import read_params, write_params
from .netarch import ResNetConfig, ScalarMultiplierConfig, resnet_forward
from .optim import AdamState, LrSchedule
from .params import ChoiceCommaSeparated, ConfigSourceParamType, GridSizesParamType
from .problems import build_problem, get_preset
from .sampling import Box, Sampler, hammersley, mc_integral, sample_uniform
from .trainer import ConstraintChannel, RunHistory, TrainConfig, evaluate_field, relative_constraint_error, train

__all__ = [
    'AdamState',
    'Box',
    'ChoiceCommaSeparated',
    'ConfigError',
    'ConfigSourceParamType',
    'ConstraintChannel',
    'ConvergenceError',
    'DimensionError',
    'EmptyBatchError',
    'GridSizesParamType',
    'LrSchedule',
    'NonFiniteError',
    'ParamStore',
    'ResNetConfig',
    'RunConfig',
    'RunHistory',
    'Sampler',
    'ScalarMultiplierConfig',
    'TrainConfig',
    'WancoError',
    'backprop_loss',
    'build_problem',
    'eval_with_input_grad',
    'evaluate_field',
    'finite_diff_grad',
    'get_preset',
    'hammersley',
    'load_run_config',
    'mc_integral',
    'read_params',
    'relative_constraint_error',
    'resnet_forward',
    'resolve',
    'sample_uniform',
    'train',
    'value_and_grad',
    'variant_configs',
    'write_params',
]
