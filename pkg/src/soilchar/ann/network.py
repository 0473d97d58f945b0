"""Single-hidden-layer regression network: tanh hidden units, linear output.

Parameters live in one flat vector so the Levenberg-Marquardt solver can
treat the network as a generic least-squares model. Layout, for H hidden
units and 4 inputs::

    [ W_hidden (H x 4, row-major) | b_hidden (H) | w_out (H) | b_out (1) ]

Inputs and target are mapped to [-1, 1] by per-feature min/max (resistivity
in log space by default) before they reach the weights; every error and MSE
the trainer reports is measured in that normalized target space.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .._io import atomic_write
from ..errors import DomainError, ValidationError

INPUT_FEATURES = ("moisture_pct", "ph", "temperature_c", "resistivity_kohm_m")
TARGET = "salinity_pct"


@dataclass(frozen=True)
class NetworkTopology:
    hidden_units: int = 10
    input_dim: int = 4
    output_dim: int = 1

    def __post_init__(self):
        if self.input_dim != 4 or self.output_dim != 1:
            raise ValidationError("topology is fixed at 4 inputs and 1 output")
        if self.hidden_units < 1:
            raise ValidationError(f"hidden_units must be >= 1, got {self.hidden_units}")

    @property
    def n_params(self) -> int:
        h = self.hidden_units
        return h * self.input_dim + h + h * self.output_dim + self.output_dim


@dataclass(frozen=True)
class Normalizer:
    """Per-column map from [lo, hi] onto [-1, 1]; constant columns go to 0.

    Columns flagged in ``log_columns`` are log-transformed first and ``lo``/``hi``
    are then bounds of the logged values. Resistivity spans three decades
    across moisture levels, and a plain affine map squeezes every level but
    the driest into a sliver next to -1.
    """

    lo: np.ndarray
    hi: np.ndarray
    log_columns: np.ndarray | None = None

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        flags = np.zeros(lo.shape, dtype=bool) if self.log_columns is None else self.log_columns
        object.__setattr__(self, "log_columns", np.asarray(flags, dtype=bool).reshape(lo.shape))

    def _forward_transform(self, x: np.ndarray) -> np.ndarray:
        if not self.log_columns.any():
            return x
        logged = self.log_columns & np.ones(x.shape, dtype=bool)
        if np.any(x[logged] <= 0):
            raise DomainError("log-scaled features must be > 0")
        return np.where(logged, np.log(np.where(logged, x, 1.0)), x)

    def apply(self, x) -> np.ndarray:
        x = self._forward_transform(np.asarray(x, dtype=float))
        span = self.hi - self.lo
        safe = np.where(span > 0, span, 1.0)
        z = 2.0 * (x - self.lo) / safe - 1.0
        return np.where(span > 0, z, 0.0)

    def unapply(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        x = (z + 1.0) * 0.5 * (self.hi - self.lo) + self.lo
        if not self.log_columns.any():
            return x
        logged = self.log_columns & np.ones(x.shape, dtype=bool)
        x[logged] = np.exp(x[logged])
        return x

    def to_dict(self) -> dict:
        return {
            "lo": self.lo.tolist(),
            "hi": self.hi.tolist(),
            "log_columns": self.log_columns.tolist(),
        }

    @classmethod
    def from_dict(cls, doc) -> "Normalizer":
        return cls(doc["lo"], doc["hi"], doc.get("log_columns"))


def fit_normalizer(samples, log_columns=None) -> Normalizer:
    """Column-wise min/max normalizer for a 2-D array (or a 1-D column)."""
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise ValidationError("cannot fit a normalizer to no samples")
    shape = data.shape[1:]
    flags = np.zeros(shape, dtype=bool) if log_columns is None else np.asarray(log_columns, dtype=bool)
    probe = Normalizer(np.zeros(shape), np.zeros(shape), flags)
    transformed = probe._forward_transform(data)
    return Normalizer(transformed.min(axis=0), transformed.max(axis=0), flags)


def unpack(params: np.ndarray, hidden_units: int):
    h = hidden_units
    w_hidden = params[: 4 * h].reshape(h, 4)
    b_hidden = params[4 * h : 5 * h]
    w_out = params[5 * h : 6 * h]
    b_out = params[6 * h]
    return w_hidden, b_hidden, w_out, b_out


def forward_normalized(params: np.ndarray, hidden_units: int, xn: np.ndarray):
    """Outputs and hidden activations for already-normalized inputs ``xn`` (n x 4)."""
    w_hidden, b_hidden, w_out, b_out = unpack(params, hidden_units)
    act = np.tanh(xn @ w_hidden.T + b_hidden)
    return act @ w_out + b_out, act


def jacobian_normalized(params: np.ndarray, hidden_units: int, xn: np.ndarray) -> np.ndarray:
    """d(target - output)/d(params), one row per sample."""
    _, _, w_out, _ = unpack(params, hidden_units)
    _, act = forward_normalized(params, hidden_units, xn)
    n, h = xn.shape[0], hidden_units
    delta = (1.0 - act * act) * w_out  # dy/d(hidden pre-activation), n x H
    jac = np.empty((n, 6 * h + 1))
    jac[:, : 4 * h] = (delta[:, :, None] * xn[:, None, :]).reshape(n, 4 * h)
    jac[:, 4 * h : 5 * h] = delta
    jac[:, 5 * h : 6 * h] = act
    jac[:, 6 * h] = 1.0
    return -jac


@dataclass
class Network:
    topology: NetworkTopology
    params: np.ndarray
    input_norm: Normalizer
    target_norm: Normalizer
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.params.shape != (self.topology.n_params,):
            raise ValidationError(
                f"expected {self.topology.n_params} parameters, got {self.params.shape}"
            )
        if not np.all(np.isfinite(self.params)):
            raise ValidationError("network parameters must be finite")

    @property
    def hidden_units(self) -> int:
        return self.topology.hidden_units

    def normalized_output(self, inputs) -> np.ndarray:
        xn = self.input_norm.apply(np.atleast_2d(np.asarray(inputs, dtype=float)))
        return forward_normalized(self.params, self.hidden_units, xn)[0]

    def predict(self, inputs) -> np.ndarray:
        """Salinity % for a batch of raw (moisture, pH, temperature, resistivity) rows."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        if inputs.shape[1] != 4:
            raise ValidationError(f"expected 4 input columns, got {inputs.shape[1]}")
        if not np.all(np.isfinite(inputs)):
            raise DomainError("network inputs must be finite")
        return self.target_norm.unapply(self.normalized_output(inputs))

    def to_dict(self) -> dict:
        return {
            "topology": {
                "input_dim": self.topology.input_dim,
                "hidden_units": self.topology.hidden_units,
                "output_dim": self.topology.output_dim,
            },
            "inputs": list(INPUT_FEATURES),
            "target": TARGET,
            "params": self.params.tolist(),
            "input_normalizer": self.input_norm.to_dict(),
            "target_normalizer": self.target_norm.to_dict(),
            "seed": self.seed,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        try:
            topo = doc["topology"]
            return cls(
                topology=NetworkTopology(
                    hidden_units=int(topo["hidden_units"]),
                    input_dim=int(topo.get("input_dim", 4)),
                    output_dim=int(topo.get("output_dim", 1)),
                ),
                params=np.asarray(doc["params"], dtype=float),
                input_norm=Normalizer.from_dict(doc["input_normalizer"]),
                target_norm=Normalizer.from_dict(doc["target_normalizer"]),
                seed=doc.get("seed"),
                meta=doc.get("meta", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed network document: {exc}") from exc

    def save(self, path) -> None:
        atomic_write(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Network":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: not a network document ({exc})") from exc
        return cls.from_dict(doc)


def forward(network: Network, x) -> float:
    """Salinity % predicted for one raw 4-vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ValidationError(f"expected a 4-vector, got shape {x.shape}")
    return float(network.predict(x[None, :])[0])


def jacobian(network: Network, inputs) -> np.ndarray:
    """Residual Jacobian (rows = samples, columns = 6H+1 parameters) for raw inputs."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[0] == 0:
        raise ValidationError("jacobian needs a non-empty batch")
    xn = network.input_norm.apply(inputs)
    return jacobian_normalized(network.params, network.hidden_units, xn)
