"""Levenberg-Marquardt training with validation-based early stopping.

Each epoch linearizes the normalized-space residuals ``e = t - y`` around the
current weights and solves the damped normal equations
``(J^T J + mu I) delta = J^T e``. Because ``J`` is the Jacobian of the
residual (not of the output), the Gauss-Newton move is ``w - delta``.

A proposal is accepted only if it lowers training MSE; the damping ``mu``
then shrinks toward Gauss-Newton, otherwise it grows toward small gradient
steps and the epoch retries. Weights are snapshotted at every new validation
minimum and the snapshot, not the last iterate, is what ``train`` returns.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, NumericError
from .data import DEFAULT_FRACTIONS, Dataset, _check_fractions, split_dataset
from .network import (
    Network,
    NetworkTopology,
    fit_normalizer,
    forward_normalized,
    jacobian_normalized,
)

STOP_PATIENCE = "patience-exhausted"
STOP_MAX_EPOCHS = "max-epochs"
STOP_MU = "mu-overflow"
STOP_GOAL = "goal-reached"


@dataclass(frozen=True)
class TrainingConfig:
    hidden_units: int = 10
    split_fractions: tuple[float, float, float] = DEFAULT_FRACTIONS
    seed: int = 0
    max_epochs: int = 1000
    mu_initial: float = 1e-3
    mu_increase: float = 10.0
    mu_decrease: float = 0.1
    mu_max: float = 1e10
    patience: int = 6
    goal: float = 0.0
    log_resistivity: bool = True

    def __post_init__(self):
        try:
            _check_fractions(self.split_fractions)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        if not self.mu_initial > 0:
            raise ConfigurationError("mu_initial must be > 0")
        if not self.mu_increase > 1:
            raise ConfigurationError("mu_increase must be > 1")
        if not 0 < self.mu_decrease < 1:
            raise ConfigurationError("mu_decrease must lie in (0, 1)")
        if not self.mu_max > self.mu_initial:
            raise ConfigurationError("mu_max must exceed mu_initial")
        if self.patience < 1:
            raise ConfigurationError("patience must be >= 1")
        if self.max_epochs < 0:
            raise ConfigurationError("max_epochs must be >= 0")
        if self.hidden_units < 1:
            raise ConfigurationError("hidden_units must be >= 1")


@dataclass
class TrainReport:
    mse_train: list[float] = field(default_factory=list)
    mse_validation: list[float] = field(default_factory=list)
    mse_test: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_mse: float = float("inf")
    stop_reason: str = ""
    accepted_epochs: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "mse_train", "mse_val", "mse_test"])
        for i, row in enumerate(zip(self.mse_train, self.mse_validation, self.mse_test)):
            writer.writerow([i] + [repr(float(v)) for v in row])
        return buf.getvalue()


def lm_step(parameters, J, residuals, mu: float) -> np.ndarray:
    """Solve ``(J^T J + mu I) delta = J^T residuals`` for the damped update ``delta``."""
    J = np.asarray(J, dtype=float)
    r = np.asarray(residuals, dtype=float).reshape(-1)
    n_params = np.size(parameters)
    if J.ndim != 2 or J.shape != (r.size, n_params):
        raise ConfigurationError(
            f"J has shape {J.shape}; expected ({r.size}, {n_params})"
        )
    if not mu > 0:
        raise ConfigurationError(f"mu must be > 0, got {mu}")
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(r)) and np.isfinite(mu)):
        raise NumericError("non-finite Jacobian, residuals or damping")
    lhs = J.T @ J
    lhs[np.diag_indices_from(lhs)] += mu
    try:
        delta = np.linalg.solve(lhs, J.T @ r)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"damped normal equations are singular: {exc}") from exc
    if not np.all(np.isfinite(delta)):
        raise NumericError("LM update is not finite")
    return delta


def _mse(params, hidden_units, xn, tn) -> float:
    y, _ = forward_normalized(params, hidden_units, xn)
    return float(np.mean((tn - y) ** 2))


def train_on_split(
    config: TrainingConfig, train: Dataset, validation: Dataset, test: Dataset
) -> tuple[Network, TrainReport]:
    if len(train) == 0:
        raise ConfigurationError("training split is empty")
    if len(validation) == 0:
        raise ConfigurationError("validation split is empty; early stopping needs it")

    everything = Dataset.concat([train, validation, test])
    input_norm = fit_normalizer(
        everything.inputs, log_columns=[False, False, False, config.log_resistivity]
    )
    target_norm = fit_normalizer(everything.targets)
    h = config.hidden_units
    topology = NetworkTopology(hidden_units=h)

    def prep(ds):
        return input_norm.apply(ds.inputs), target_norm.apply(ds.targets)

    x_tr, t_tr = prep(train)
    x_va, t_va = prep(validation)
    x_te, t_te = prep(test)

    rng = np.random.default_rng([config.seed, 1])
    params = rng.uniform(-0.5, 0.5, size=topology.n_params)

    report = TrainReport()

    def record(p):
        report.mse_train.append(_mse(p, h, x_tr, t_tr))
        report.mse_validation.append(_mse(p, h, x_va, t_va))
        report.mse_test.append(_mse(p, h, x_te, t_te) if len(test) else float("nan"))

    record(params)
    best_params = params.copy()
    report.best_epoch, report.best_val_mse = 0, report.mse_validation[0]
    mu = config.mu_initial
    failures = 0
    stop = STOP_MAX_EPOCHS

    for epoch in range(1, config.max_epochs + 1):
        current = report.mse_train[-1]
        if current <= config.goal:
            stop = STOP_GOAL
            break
        y, _ = forward_normalized(params, h, x_tr)
        residuals = t_tr - y
        jac = jacobian_normalized(params, h, x_tr)
        accepted = False
        while mu <= config.mu_max:
            try:
                candidate = params - lm_step(params, jac, residuals, mu)
                cand_mse = _mse(candidate, h, x_tr, t_tr)
            except NumericError:
                cand_mse = np.inf
            if cand_mse < current:
                params = candidate
                mu *= config.mu_decrease
                accepted = True
                break
            mu *= config.mu_increase
        if not accepted:
            stop = STOP_MU
            break

        record(params)
        report.accepted_epochs += 1
        if report.mse_validation[-1] < report.best_val_mse:
            report.best_val_mse = report.mse_validation[-1]
            report.best_epoch = epoch
            best_params = params.copy()
            failures = 0
        else:
            failures += 1
            if failures >= config.patience:
                stop = STOP_PATIENCE
                break
    report.stop_reason = stop

    network = Network(
        topology=topology,
        params=best_params,
        input_norm=input_norm,
        target_norm=target_norm,
        seed=config.seed,
        meta={"best_epoch": report.best_epoch, "stop_reason": stop},
    )
    return network, report


def train(config: TrainingConfig, dataset: Dataset) -> tuple[Network, TrainReport]:
    """Split ``dataset`` by ``config.seed`` and fit a network to it."""
    train_set, val_set, test_set = split_dataset(dataset, config.split_fractions, config.seed)
    return train_on_split(config, train_set, val_set, test_set)
