"""Prior weights h(t) multiplying the likelihood f(x - mu(t)) on the string.

Four families:

* :class:`Jeffreys`  -- speed ``|mu'(t)|`` (uniform in arc length);
* :class:`Linear`    -- ``|c1 mu1'(t) + c2 mu2'(t)|`` for a fixed vector c;
* :class:`Shift`     -- ``|mu1'(t) d2 - mu2'(t) d1|``, the velocity component
  orthogonal to a shift direction d, times ``|d|``;
* :class:`Condition` -- built from a condition function C(theta1, theta2),
  either ``|grad C| |mu'|`` (``mode="as_paper"``) or ``|mu'| / |grad C|``
  (``mode="coarea"``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ExpressionError, SingularConditionError
from .expr import Expression, as_expression
from .geometry import Curve

__all__ = ["PriorWeight", "Jeffreys", "Linear", "Shift", "Condition", "prior_from_config"]

CONDITION_VARS = ("theta1", "theta2")
SINGULAR_GRADIENT = 1e-300


def _vec2(v, name: str) -> tuple[float, float]:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (2,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be two finite numbers")
    return float(arr[0]), float(arr[1])


def _scalar_or_array(out):
    return float(out) if np.ndim(out) == 0 else out


class PriorWeight:
    """Base class; subclasses implement :meth:`_weight` on arrays."""

    def weight(self, curve: Curve, t):
        """h(t) for scalar or array ``t`` in the curve interval."""
        if not curve.interval.contains(t):
            raise ValueError(f"t outside the curve interval [{curve.interval.t_min}, {curve.interval.t_max}]")
        return _scalar_or_array(self._weight(curve, np.asarray(t, dtype=float)))

    def _weight(self, curve: Curve, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Jeffreys(PriorWeight):
    def _weight(self, curve, t):
        v = curve.velocities(t)
        return np.hypot(v[..., 0], v[..., 1])

    def to_config(self):
        return {"type": "jeffreys"}


@dataclass(frozen=True)
class Linear(PriorWeight):
    c: tuple = (1.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "c", _vec2(self.c, "c"))

    def _weight(self, curve, t):
        v = curve.velocities(t)
        c1, c2 = self.c
        return np.abs(v[..., 0] * c1 + v[..., 1] * c2)

    def to_config(self):
        return {"type": "linear", "c": list(self.c)}


@dataclass(frozen=True)
class Shift(PriorWeight):
    """Weight induced by conditioning along shifts theta = mu(t) + s*d."""

    d: tuple = (1.0, 0.0)

    def __post_init__(self):
        d = _vec2(self.d, "d")
        if d == (0.0, 0.0):
            raise ValueError("shift direction d must be non-zero")
        object.__setattr__(self, "d", d)

    def _weight(self, curve, t):
        v = curve.velocities(t)
        d1, d2 = self.d
        # same operation order as Linear(c=(d2, -d1)), so the two agree bitwise
        return np.abs(v[..., 0] * d2 + v[..., 1] * -d1)

    def as_linear(self) -> Linear:
        return Linear((self.d[1], -self.d[0]))

    def to_config(self):
        return {"type": "shift", "d": list(self.d)}


@dataclass(frozen=True)
class Condition(PriorWeight):
    C: Expression = None
    mode: str = "as_paper"

    def __post_init__(self):
        object.__setattr__(self, "C", as_expression(self.C, CONDITION_VARS))
        if self.mode not in ("as_paper", "coarea"):
            raise ValueError("mode must be 'as_paper' or 'coarea'")

    def gradient_norm(self, curve: Curve, t) -> np.ndarray:
        """|grad C| at mu(t)."""
        mu = curve.points(np.asarray(t, dtype=float))
        env = {"theta1": mu[..., 0], "theta2": mu[..., 1]}
        _, g1 = self.C.eval_dual(env, "theta1")
        _, g2 = self.C.eval_dual(env, "theta2")
        return np.hypot(g1, g2)

    def _weight(self, curve, t):
        v = curve.velocities(t)
        speed = np.hypot(v[..., 0], v[..., 1])
        grad = self.gradient_norm(curve, t)
        if self.mode == "as_paper":
            return grad * speed
        bad = np.atleast_1d(grad <= SINGULAR_GRADIENT)
        if bad.any():
            raise SingularConditionError(float(np.atleast_1d(t)[bad][0]))
        return speed / grad

    def to_config(self):
        return {"type": "condition", "C": self.C.source, "mode": self.mode}


def _config_vec2(obj: dict, key: str, path: str) -> tuple[float, float]:
    value = obj.get(key)
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
            or not all(math.isfinite(v) for v in value)):
        raise ConfigError(f"{path}.{key}", "expected 2 numbers")
    return float(value[0]), float(value[1])


def prior_from_config(obj, path: str = "prior") -> PriorWeight:
    """Build a prior from its JSON form, raising path-addressed :class:`ConfigError`."""
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    kind = obj.get("type")
    if kind == "jeffreys":
        return Jeffreys()
    if kind == "linear":
        c = _config_vec2(obj, "c", path)
        if c == (0.0, 0.0):
            raise ConfigError(f"{path}.c", "must be non-zero")
        return Linear(c)
    if kind == "shift":
        d = _config_vec2(obj, "d", path)
        if d == (0.0, 0.0):
            raise ConfigError(f"{path}.d", "must be non-zero")
        return Shift(d)
    if kind == "condition":
        source = obj.get("C")
        if not isinstance(source, str):
            raise ConfigError(f"{path}.C", "expected an expression string in theta1, theta2")
        mode = obj.get("mode", "as_paper")
        if mode not in ("as_paper", "coarea"):
            raise ConfigError(f"{path}.mode", "expected 'as_paper' or 'coarea'")
        try:
            return Condition(source, mode)
        except ExpressionError as exc:
            raise ConfigError(f"{path}.C", str(exc)) from None
    raise ConfigError(f"{path}.type", "expected one of jeffreys, linear, shift, condition")
