"""Run configuration files.

A run config is a YAML mapping with the top-level keys below. ``preset``
names an entry of :data:`wanco.problems.presets.PRESETS`; the explicit
sections are merged over it before anything is validated::

    preset: gl-desk
    train:
      channels:
        mass: {beta0: 1000.0, alpha: 1.0003}
    seed: 7
    output: runs/gl

Unknown keys anywhere are rejected with the dotted path of the key.
"""
import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .optim import LrSchedule
from .problems import build_problem
from .problems.presets import get_preset, merge
from .sampling import Sampler
from .trainer import ConstraintChannel, TrainConfig

log = logging.getLogger(__name__)

TOP_LEVEL = ("preset", "problem", "networks", "train", "sampler", "seed", "output", "compare")
TRAIN_KEYS = ("method", "n_iterations", "channels", "inner_steps", "lr_primal", "lr_adversary", "record_every")
SAMPLER_KEYS = ("kind", "n_interior", "n_per_face")
CHANNEL_KEYS = ("beta0", "alpha")
VARIANT_KEYS = ("name", "train", "networks", "sampler")


@dataclass
class RunConfig:
    """A validated run: problem binding, training schedule, sampler and output location."""

    problem: object
    train: TrainConfig
    sampler: Sampler
    seed: int
    output: str
    data: dict
    compare: list = field(default_factory=list)


def load_yaml(path):
    """Parse a YAML file into a mapping.

    Raises:
        ConfigError: If the file is unreadable, not YAML or not a mapping
    """
    path = Path(path)
    try:
        with path.open("r") as f:
            data = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping, got {type(data).__name__}")
    return data


def _mapping(value, key):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"expected a mapping, got {type(value).__name__}", key=key)
    return value


def _reject_unknown(section, allowed, prefix):
    unknown = set(section) - set(allowed)
    if unknown:
        name = sorted(str(k) for k in unknown)[0]
        raise ConfigError("unknown key", key=f"{prefix}.{name}" if prefix else name)


def _number(value, key, kind=float):
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", key=key)
    try:
        number = kind(float(value)) if kind is int else kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {value!r}", key=key) from None
    if kind is int and number != float(value):
        raise ConfigError(f"expected an integer, got {value!r}", key=key)
    return number


def _channels(data):
    out = {}
    for name, values in _mapping(data, "train.channels").items():
        values = _mapping(values, f"train.channels.{name}")
        _reject_unknown(values, CHANNEL_KEYS, f"train.channels.{name}")
        if "beta0" not in values:
            raise ConfigError("missing key", key=f"train.channels.{name}.beta0")
        beta0 = _number(values["beta0"], f"train.channels.{name}.beta0")
        alpha = _number(values.get("alpha", 1.0), f"train.channels.{name}.alpha")
        if beta0 < 0:
            raise ConfigError("must be >= 0", key=f"train.channels.{name}.beta0")
        if alpha < 1:
            raise ConfigError("must be >= 1", key=f"train.channels.{name}.alpha")
        out[name] = ConstraintChannel(beta0, alpha)
    return out


def _schedule(value, key):
    if isinstance(value, dict):
        return LrSchedule.from_dict(value)
    return LrSchedule(_number(value, key))


def build_train(data, seed):
    """TrainConfig from the ``train`` section."""
    data = _mapping(data, "train")
    _reject_unknown(data, TRAIN_KEYS, "train")
    if "n_iterations" not in data:
        raise ConfigError("missing key", key="train.n_iterations")
    inner = {
        net: _number(steps, f"train.inner_steps.{net}", int)
        for net, steps in _mapping(data.get("inner_steps"), "train.inner_steps").items()
    }
    return TrainConfig(
        n_iterations=_number(data["n_iterations"], "train.n_iterations", int),
        channels=_channels(data.get("channels")),
        method=str(data.get("method", "wanco")),
        inner_steps=inner,
        lr_primal=_schedule(data.get("lr_primal", 0.016), "train.lr_primal"),
        lr_adversary=_schedule(data.get("lr_adversary", 0.016), "train.lr_adversary"),
        record_every=_number(data.get("record_every", 50), "train.record_every", int),
        seed=seed,
    )


def build_sampler(data):
    """Sampler from the ``sampler`` section."""
    data = _mapping(data, "sampler")
    _reject_unknown(data, SAMPLER_KEYS, "sampler")
    return Sampler(
        kind=str(data.get("kind", "uniform")),
        n_interior=_number(data.get("n_interior", 4096), "sampler.n_interior", int),
        n_per_face=_number(data.get("n_per_face", 0), "sampler.n_per_face", int),
    )


def _compare_variants(data):
    data = _mapping(data, "compare")
    _reject_unknown(data, ("variants",), "compare")
    variants = data.get("variants", [])
    if not isinstance(variants, list):
        raise ConfigError("expected a list", key="compare.variants")
    names = set()
    for index, variant in enumerate(variants):
        variant = _mapping(variant, f"compare.variants.{index}")
        _reject_unknown(variant, VARIANT_KEYS, f"compare.variants.{index}")
        name = str(variant.get("name", index))
        if name in names:
            raise ConfigError(f"duplicate variant name {name!r}", key=f"compare.variants.{index}.name")
        names.add(name)
    return variants


def expand(data):
    """Merge ``data`` over its preset; returns the full config mapping."""
    data = _mapping(copy.deepcopy(data), None)
    _reject_unknown(data, TOP_LEVEL, "")
    preset = data.pop("preset", None)
    if preset is None:
        return data
    log.debug("expanding preset %s", preset)
    return merge(get_preset(str(preset)), data)


def resolve(data, seed_override=None, output=None):
    """Validate a config mapping and build the run objects.

    Args:
        data: Parsed config mapping (preset not yet expanded)
        seed_override: Replaces ``seed`` when not None
        output: Replaces ``output`` when not None

    Returns:
        RunConfig

    Raises:
        ConfigError: Naming the first offending key
    """
    full = expand(data)
    if seed_override is not None:
        full["seed"] = seed_override
    if output is not None:
        full["output"] = str(output)
    if "problem" not in full:
        raise ConfigError("missing key", key="problem")
    if "train" not in full:
        raise ConfigError("missing key", key="train")

    seed = _number(full.get("seed", 0), "seed", int)
    networks = _mapping(full.get("networks"), "networks")
    for name, values in networks.items():
        _mapping(values, f"networks.{name}")
    problem = build_problem(_mapping(full["problem"], "problem"), networks)
    return RunConfig(
        problem=problem,
        train=build_train(full["train"], seed),
        sampler=build_sampler(full.get("sampler")),
        seed=seed,
        output=str(full.get("output", "run")),
        data=full,
        compare=_compare_variants(full.get("compare")),
    )


def load_run_config(path, seed_override=None, output=None):
    """Read, expand and validate a run config file."""
    return resolve(load_yaml(path), seed_override=seed_override, output=output)


def variant_configs(run):
    """``(name, RunConfig)`` for every entry of the ``compare.variants`` list.

    Variants override ``train``, ``networks`` or ``sampler``; the problem is
    shared. Each variant writes into ``<output>/<name>``.
    """
    base = {k: v for k, v in run.data.items() if k != "compare"}
    out = []
    for index, variant in enumerate(run.compare):
        name = str(variant.get("name", index))
        overrides = {k: v for k, v in variant.items() if k != "name"}
        data = merge(base, overrides)
        data["output"] = str(Path(run.output) / name)
        out.append((name, resolve(data)))
    return out
