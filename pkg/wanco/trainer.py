"""Alternating adversarial augmented-Lagrangian training.

Every outer iteration draws a batch, takes the primal descent steps, then the
ascent steps of each multiplier network, and finally amplifies the penalty
weight of every constraint channel. The batch is reused for all inner steps
of the iteration.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diffcore import ParamStore, value_and_grad
from .errors import ConfigError, NonFiniteError
from .optim import AdamState, LrSchedule, adam_step, lr_at
from .problems.base import method_flags

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConstraintChannel:
    """Penalty weight ``beta0`` of one constraint and its amplifier ``alpha``."""

    beta0: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.beta0 < 0:
            raise ConfigError("beta0 must be >= 0", key="train.channels.beta0")
        if self.alpha < 1:
            raise ConfigError("alpha must be >= 1", key="train.channels.alpha")

    def beta_at(self, iteration, amplify=True):
        """Weight in force during ``iteration``: ``beta0 * alpha**iteration``."""
        if not amplify:
            return float(self.beta0)
        return float(self.beta0 * self.alpha**iteration)


@dataclass(frozen=True)
class TrainConfig:
    """Everything the outer loop needs besides the problem and the sampler.

    ``inner_steps`` maps network names to their steps per outer iteration;
    networks left out use the problem's defaults.
    """

    n_iterations: int
    channels: dict
    method: str = "wanco"
    inner_steps: dict = field(default_factory=dict)
    lr_primal: LrSchedule = field(default_factory=lambda: LrSchedule(0.016))
    lr_adversary: LrSchedule = field(default_factory=lambda: LrSchedule(0.016))
    record_every: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ConfigError("number of iterations must be >= 1", key="train.n_iterations")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1", key="train.record_every")
        for net, steps in self.inner_steps.items():
            if int(steps) < 1:
                raise ConfigError("inner steps must be >= 1", key=f"train.inner_steps.{net}")
        method_flags(self.method)

    def betas(self, iteration):
        amplify = method_flags(self.method).amplify
        return {name: channel.beta_at(iteration, amplify) for name, channel in self.channels.items()}


def relative_constraint_error(achieved, target):
    """``(target - achieved) / target``; a zero target falls back to ``|achieved|``.

    Example:
        >>> relative_constraint_error(-1.0, -0.5)
        -1.0
    """
    if target == 0:
        return abs(float(achieved))
    return (float(target) - float(achieved)) / float(target)


def constraint_errors(terms):
    """Error of every constraint in a loss breakdown, keyed as ``relerr.<name>`` or ``abserr.<name>``."""
    out = {}
    for key, achieved in terms.achieved.items():
        target = terms.targets[key]
        out[f"{'abserr' if target == 0 else 'relerr'}.{key}"] = relative_constraint_error(achieved, target)
    return out


@dataclass
class HistoryRecord:
    iteration: int
    objective: float
    residuals: dict
    errors: dict
    multipliers: dict
    betas: dict
    lrs: dict


@dataclass
class RunHistory:
    """Recorded snapshots of a run.

    Constraints whose target is zero are recorded with an absolute error;
    their error columns are prefixed ``abserr.`` instead of ``relerr.``.
    """

    records: list = field(default_factory=list)
    absolute: set = field(default_factory=set)

    def __len__(self):
        return len(self.records)

    def record(self, iteration, terms, betas, lrs):
        errors = {}
        for key, achieved in terms.achieved.items():
            target = terms.targets[key]
            if target == 0:
                self.absolute.add(key)
            errors[key] = relative_constraint_error(achieved, target)
        rec = HistoryRecord(
            iteration=iteration,
            objective=terms.objective,
            residuals=dict(terms.residuals),
            errors=errors,
            multipliers=dict(terms.multipliers),
            betas=dict(betas),
            lrs=dict(lrs),
        )
        self.records.append(rec)
        return rec

    def columns(self):
        if not self.records:
            return []
        first = self.records[0]
        cols = ["iteration", "objective"]
        cols += [f"residual.{k}" for k in first.residuals]
        cols += [f"{'abserr' if k in self.absolute else 'relerr'}.{k}" for k in first.errors]
        cols += [f"mult.{k}" for k in first.multipliers]
        cols += [f"beta.{k}" for k in first.betas]
        cols += [f"lr.{k}" for k in first.lrs]
        return cols

    def rows(self):
        for rec in self.records:
            yield [rec.iteration, rec.objective, *rec.residuals.values(), *rec.errors.values(),
                   *rec.multipliers.values(), *rec.betas.values(), *rec.lrs.values()]

    def column(self, name):
        """One column as a float array, e.g. ``history.column("mult.lambda")``."""
        index = self.columns().index(name)
        return np.array([row[index] for row in self.rows()], dtype=float)


@dataclass
class TrainResult:
    params: ParamStore
    history: RunHistory
    final: object
    betas: dict


def evaluate_loss(problem, store, batch, betas, method):
    """Loss breakdown without recording a tape."""
    views = store.views(store.leaves(trainable=()))
    return problem.loss(views, batch, betas, method)


def _inner_steps(problem, config):
    unknown = set(config.inner_steps) - set(problem.network_names)
    if unknown:
        raise ConfigError("unknown network", key=f"train.inner_steps.{sorted(unknown)[0]}")
    return {**problem.default_inner_steps, **{k: int(v) for k, v in config.inner_steps.items()}}


def _check_channels(problem, config):
    missing = set(problem.channels) - set(config.channels)
    if missing:
        raise ConfigError("missing penalty channel", key=f"train.channels.{sorted(missing)[0]}")
    unknown = set(config.channels) - set(problem.channels)
    if unknown:
        raise ConfigError("unknown penalty channel", key=f"train.channels.{sorted(unknown)[0]}")


def _format_record(rec):
    parts = [f"{rec.iteration:7d}", f"{rec.objective: .6e}"]
    parts += [f"{k}={v: .3e}" for k, v in rec.errors.items()]
    parts += [f"beta.{k}={v:.4g}" for k, v in rec.betas.items()]
    return "  ".join(parts)


def train(problem, config, sampler, params=None):
    """Run the adversarial training loop.

    Args:
        problem: A :class:`~wanco.problems.base.Problem` binding
        config: :class:`TrainConfig`
        sampler: :class:`~wanco.sampling.Sampler`
        params: Starting :class:`~wanco.diffcore.ParamStore`; initialised from ``config.seed`` when None

    Returns:
        TrainResult with the trained parameters, the history, the final loss breakdown and final betas

    Raises:
        NonFiniteError: On a non-finite loss term or gradient, with the iteration index
    """
    flags = method_flags(config.method)
    _check_channels(problem, config)
    inner = _inner_steps(problem, config)
    store = params.copy() if params is not None else ParamStore.from_networks(problem.networks, config.seed)
    primal = problem.primal
    adversaries = problem.multiplier_networks if flags.multiplier else ()
    states = {net: AdamState.zeros(store.network_values(net).size) for net in (primal, *adversaries)}
    history = RunHistory()
    n = config.n_iterations

    log.info(
        "%s: method=%s N=%d parameters=%d networks=%s",
        problem.family, config.method, n, store.values.size, ",".join(problem.network_names),
    )

    def update(net, batch, betas, lr, direction, iteration, record=None):
        def loss_fn(views):
            terms = problem.loss(views, batch, betas, config.method)
            terms.check_finite(iteration)
            return terms

        try:
            terms, acc = value_and_grad(loss_fn, store, trainable=(net,))
        except NonFiniteError as exc:
            if exc.iteration is not None:
                raise
            raise NonFiniteError("non-finite gradient", where=exc.where, iteration=iteration) from exc
        if record is not None:
            log.info("%s", _format_record(history.record(iteration, terms, betas, record)))
        span = store.network_slice(net)
        store.values[span] = adam_step(states[net], store.values[span], acc.network(store, net), lr, direction)

    for k in range(n):
        betas = config.betas(k)
        batch = problem.sample(sampler, config.seed, k)
        lrs = {"primal": lr_at(config.lr_primal, k, n), "adversary": lr_at(config.lr_adversary, k, n)}
        for step in range(inner[primal]):
            record = lrs if step == 0 and k % config.record_every == 0 else None
            update(primal, batch, betas, lrs["primal"], "descent", k, record)
        for net in adversaries:
            for _ in range(inner[net]):
                update(net, batch, betas, lrs["adversary"], "ascent", k)
        log.debug("iteration %d done, betas %s", k, betas)

    betas = config.betas(n)
    final = evaluate_loss(problem, store, problem.sample(sampler, config.seed, n), betas, config.method)
    final.check_finite(n)
    if n % config.record_every == 0:
        lrs = {"primal": lr_at(config.lr_primal, n, n), "adversary": lr_at(config.lr_adversary, n, n)}
        log.info("%s", _format_record(history.record(n, final, betas, lrs)))
    return TrainResult(store, history, final, betas)


def evaluate_field(fn, points, chunk=65536, threads=0):
    """Apply ``fn`` to ``points`` in chunks and stack the results in point order.

    ``threads`` > 0 evaluates chunks on that many worker threads; results are
    always merged by chunk index.
    """
    points = np.asarray(points, dtype=float)
    if chunk < 1:
        raise ValueError("chunk size must be >= 1")
    pieces = [points[i:i + chunk] for i in range(0, points.shape[0], chunk)]
    if threads and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fn, pieces))
    else:
        results = [fn(piece) for piece in pieces]
    if not results:
        return np.empty((0,))
    return np.concatenate(results, axis=0)

