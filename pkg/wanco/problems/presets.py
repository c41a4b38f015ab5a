"""Named run configurations.

The full-scale entries carry the published hyperparameters; the ``-desk``
entries shrink iterations, batch sizes and widths so a run finishes on a
laptop CPU in minutes.
"""
import copy

from ..errors import ConfigError

ALPHA = 1.0003
LR = 0.016


def merge(base, override):
    """Recursive dict merge; values from ``override`` win, nested dicts are merged."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _gl(beta0):
    return {
        "problem": {"family": "gl", "eps": 0.05, "V": -0.5, "C0": 400.0},
        "networks": {"u": {"depth": 4, "width": 50, "activation": "tanh3"}, "lambda": {"width": 10}},
        "train": {
            "method": "wanco",
            "n_iterations": 5000,
            "channels": {"mass": {"beta0": beta0, "alpha": ALPHA}},
            "inner_steps": {"u": 2, "lambda": 2},
            "lr_primal": LR,
            "lr_adversary": LR,
            "record_every": 50,
        },
        "sampler": {"kind": "uniform", "n_interior": 40000},
    }


def _partition_periodic(d, n, width, n_interior):
    return {
        "problem": {"family": "partition", "eps": 0.04, "n": n, "d": d, "bc": "periodic", "C0": 2500.0},
        "networks": {"u": {"depth": 3, "width": width}, "lambda": {"width": 10}},
        "train": {
            "method": "wanco",
            "n_iterations": 5000,
            "channels": {"norm": {"beta0": 1e5, "alpha": ALPHA}},
            "inner_steps": {"u": 2, "lambda": 2},
            "lr_primal": LR,
            "lr_adversary": LR,
        },
        "sampler": {"kind": "hammersley", "n_interior": n_interior},
    }


def _fluid(bc_case, length, C_V, depth, width):
    return {
        "problem": {
            "family": "fluid", "eps": 0.01, "alpha0": 250000.0, "C_alpha": 100.0, "C_eps": 10.0,
            "C_V": C_V, "length": length, "bc_case": bc_case,
        },
        "networks": {
            "u": {"depth": depth, "width": width},
            "p": {"depth": depth, "width": width},
            "lambda1": {"width": 10},
            "lambda2": {"depth": 4, "width": 50},
        },
        "train": {
            "method": "wanco",
            "n_iterations": 5000,
            "channels": {
                "div": {"beta0": 100.0, "alpha": ALPHA},
                "volume": {"beta0": 100.0, "alpha": ALPHA},
                "boundary": {"beta0": 1000.0, "alpha": ALPHA},
            },
            "inner_steps": {"u": 3, "p": 1, "lambda1": 1, "lambda2": 1},
            "lr_primal": LR,
            "lr_adversary": LR,
        },
        "sampler": {"kind": "uniform", "n_interior": 40000, "n_per_face": 1000},
    }


def _obstacle(obstacle, g0, g1):
    return {
        "problem": {"family": "obstacle", "obstacle": obstacle, "g0": g0, "g1": g1, "C0": 100.0},
        "networks": {"u": {"depth": 6, "width": 80}, "lambda": {"depth": 6, "width": 80}},
        "train": {
            "method": "wanco",
            "n_iterations": 5000,
            "channels": {"obstacle": {"beta0": 1000.0, "alpha": ALPHA}},
            "inner_steps": {"u": 2, "lambda": 2},
            "lr_primal": LR,
            "lr_adversary": LR,
        },
        "sampler": {"kind": "uniform", "n_interior": 2000},
    }


def _desk(base, **sections):
    out = copy.deepcopy(base)
    for section, values in sections.items():
        out[section] = merge(out.get(section, {}), values)
    return out


PRESETS = {
    "gl": _gl(1000.0),
    "gl-beta1e5": _gl(1e5),
    "gl-beta1e4": _gl(1e4),
    "gl-beta1e3": _gl(1e3),
    "partition-dirichlet": {
        "problem": {"family": "partition", "eps": 0.05, "n": 2, "d": 2, "bc": "dirichlet", "C0": 100.0},
        "networks": {"u": {"depth": 8, "width": 120}, "lambda": {"width": 10}},
        "train": {
            "method": "wanco",
            "n_iterations": 20000,
            "channels": {"norm": {"beta0": 1e4, "alpha": ALPHA}},
            "inner_steps": {"u": 1, "lambda": 1},
            "lr_primal": LR,
            "lr_adversary": LR,
        },
        "sampler": {"kind": "uniform", "n_interior": 10000},
    },
    "partition-periodic-d2": _partition_periodic(2, 4, 50, 10000),
    "partition-periodic-d3": _partition_periodic(3, 4, 120, 40000),
    "partition-periodic-d4": _partition_periodic(4, 4, 200, 60000),
    "fluid-ex1": _fluid("example1", 1.0, 0.5, 4, 50),
    "fluid-ex2-l1.5": _fluid("example2", 1.5, 1.0 / 3.0, 6, 80),
    "fluid-ex2-l0.5": _fluid("example2", 0.5, 1.0 / 3.0, 6, 80),
    "obstacle-psi1": _obstacle("psi1", 0.0, 0.0),
    "obstacle-psi2": _obstacle("psi2", 0.0, 0.0),
    "obstacle-psi3": _obstacle("psi3", 5.0, 10.0),
}

PRESETS.update({
    "gl-desk": _desk(
        PRESETS["gl"],
        # a wider multiplier reaches the interface-balancing value within the shorter run
        networks={"u": {"depth": 3, "width": 24}, "lambda": {"width": 64}},
        train={"n_iterations": 2000},
        sampler={"n_interior": 4096},
    ),
    "partition-desk": _desk(
        PRESETS["partition-dirichlet"],
        networks={"u": {"depth": 4, "width": 48}},
        train={"n_iterations": 4000},
        sampler={"n_interior": 4096},
    ),
    "obstacle-desk": _desk(
        PRESETS["obstacle-psi1"],
        train={"n_iterations": 3000},
        sampler={"n_interior": 1024},
    ),
    "fluid-desk": _desk(
        PRESETS["fluid-ex1"],
        networks={"u": {"depth": 3, "width": 32}, "p": {"depth": 3, "width": 32}},
        train={"n_iterations": 2000},
        sampler={"n_interior": 4096, "n_per_face": 256},
    ),
})


def get_preset(name):
    """Deep copy of a preset configuration.

    Raises:
        ConfigError: If ``name`` is not a known preset
    """
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}, expected one of {sorted(PRESETS)}", key="preset") from None
