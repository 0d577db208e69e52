"""Coefficient schedules a_ij(t) and endogenous rules a_ij(t, x).

Every schedule exposes the same small surface:

* ``n`` and ``endogenous``
* ``evaluate(t, x=None, left=False)`` returning an ``(n, n)`` array
* ``breakpoints(horizon)``: instants in ``(0, horizon)`` where the
  coefficients may jump; integrators step exactly onto them
* ``to_config()``: the JSON-ready ``schedule`` block

Time-driven schedules also provide ``evaluate_many(ts, left=False)``.
Endogenous rules provide ``mode(x)`` (the discrete switching signature) and
``coefficients(x, mode)`` (coefficients with the signature held fixed), which
the integrator uses to freeze the rule over a step.

``left=True`` asks for the left limit at ``t``; it only differs from the
plain value at a breakpoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class ScheduleError(ValueError):
    """Invalid schedule definition or evaluation request."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def check_coefficients(a: np.ndarray, *, zero_diagonal: bool = True, what: str = "matrix") -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ScheduleError(f"{what}: expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ScheduleError(f"{what}: non-finite coefficient")
    if np.any(a < 0):
        i, j = np.argwhere(a < 0)[0]
        raise ScheduleError(f"{what}: negative coefficient a_{i + 1}{j + 1} = {a[i, j]}")
    if zero_diagonal and np.any(np.diag(a) != 0):
        raise ScheduleError(f"{what}: diagonal entries must be 0 in continuous time")


# ---------------------------------------------------------------------------
# piecewise constant


@dataclass(frozen=True, eq=False)
class PiecewiseConstant:
    """Constant matrix on each ``[breaks[k], breaks[k+1])``."""

    breaks: tuple[float, ...]
    matrices: tuple[np.ndarray, ...]
    zero_diagonal: bool = True

    endogenous = False

    def __post_init__(self):
        if len(self.matrices) == 0 or len(self.breaks) != len(self.matrices) + 1:
            raise ScheduleError("piecewise-constant: need k pieces and k+1 breaks")
        if self.breaks[0] != 0:
            raise ScheduleError("piecewise-constant: first interval must start at 0")
        if any(b <= a for a, b in zip(self.breaks, self.breaks[1:])):
            raise ScheduleError("piecewise-constant: intervals overlap or are empty")
        mats = tuple(_frozen(m) for m in self.matrices)
        for k, m in enumerate(mats):
            check_coefficients(m, zero_diagonal=self.zero_diagonal, what=f"piece {k}")
        if len({m.shape for m in mats}) != 1:
            raise ScheduleError("piecewise-constant: pieces have different sizes")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        object.__setattr__(self, "_stack", _frozen(np.stack(mats)))

    @classmethod
    def constant(cls, matrix, horizon: float, zero_diagonal: bool = True) -> "PiecewiseConstant":
        return cls((0.0, float(horizon)), (np.asarray(matrix, dtype=float),), zero_diagonal)

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def horizon(self) -> float:
        return self.breaks[-1]

    def _index(self, ts, left: bool) -> np.ndarray:
        inner = np.asarray(self.breaks[1:-1])
        side = "left" if left else "right"
        return np.searchsorted(inner, ts, side=side)

    def evaluate(self, t, x=None, left: bool = False) -> np.ndarray:
        return self.matrices[int(self._index(t, left))]

    def evaluate_many(self, ts, left: bool = False) -> np.ndarray:
        return self._stack[self._index(np.asarray(ts, dtype=float), left)]

    def breakpoints(self, horizon: float) -> tuple[float, ...]:
        return tuple(b for b in self.breaks[1:-1] if 0 < b < horizon)

    def to_config(self) -> dict:
        return {
            "kind": "piecewise-constant",
            "pieces": [
                {"start": a, "end": b, "matrix": m.tolist()}
                for a, b, m in zip(self.breaks, self.breaks[1:], self.matrices)
            ],
        }


# ---------------------------------------------------------------------------
# closed-form catalogue


def _example1(ts: np.ndarray, p: dict) -> np.ndarray:
    et = np.exp(ts)
    s, c = np.sin(ts), np.cos(ts)
    out = np.zeros(ts.shape + (3, 3))
    out[..., 0, 1] = 1.0 / (et * (3.0 - s) + 1.0)
    out[..., 2, 1] = 1.0 / (et * (3.0 + s) + 1.0)
    swing = (s + c) / (6.0 + 2.0 * np.exp(-ts))
    out[..., 1, 0] = 0.5 + swing
    out[..., 1, 2] = 0.5 - swing
    return out


def _constant(ts: np.ndarray, p: dict) -> np.ndarray:
    return np.broadcast_to(p["matrix"], ts.shape + p["matrix"].shape).copy()


def _capacitor(ts: np.ndarray, p: dict) -> np.ndarray:
    # a_ij = G_ji(t) / C_i with conductance G = 1/R symmetric
    cap, g = p["capacitance"], p["conductance"]
    mod = 1.0 + p["modulation"] * np.sin(p["omega"] * ts)
    return mod[..., None, None] * (g / cap[:, None])


def _decaying_tail(ts: np.ndarray, p: dict) -> np.ndarray:
    decay = np.exp(-p["rate"] * ts)
    return p["persistent"] + decay[..., None, None] * p["transient"]


def _matrix_param(p: dict, key: str) -> np.ndarray:
    if key not in p:
        raise ScheduleError(f"missing parameter {key!r}")
    m = _frozen(p[key])
    check_coefficients(m, what=key)
    return m


def _prep_example1(p: dict) -> dict:
    return {}


def _prep_constant(p: dict) -> dict:
    return {"matrix": _matrix_param(p, "matrix")}


def _prep_capacitor(p: dict) -> dict:
    cap = _frozen(p["capacitance"])
    if cap.ndim != 1 or np.any(cap <= 0):
        raise ScheduleError("capacitor-network: capacitances must be positive")
    g = _matrix_param(p, "conductance")
    if g.shape != (cap.size, cap.size):
        raise ScheduleError("capacitor-network: conductance shape does not match capacitances")
    if not np.array_equal(g, g.T):
        raise ScheduleError("capacitor-network: conductance must be symmetric (R_ij = R_ji)")
    mod = float(p.get("modulation", 0.0))
    if not 0 <= mod < 1:
        raise ScheduleError("capacitor-network: modulation must lie in [0, 1)")
    return {"capacitance": cap, "conductance": g, "modulation": mod,
            "omega": float(p.get("omega", 1.0))}


def _prep_decaying_tail(p: dict) -> dict:
    per = _matrix_param(p, "persistent")
    tr = _matrix_param(p, "transient")
    if per.shape != tr.shape:
        raise ScheduleError("decaying-tail: persistent and transient shapes differ")
    rate = float(p.get("rate", 1.0))
    if rate <= 0:
        raise ScheduleError("decaying-tail: rate must be positive")
    return {"persistent": per, "transient": tr, "rate": rate}


def t_quarter_matrices(m: int, n: int, inner: float, budget: float, rate: float = 1.0):
    """Persistent/transient parts of the two-group schedule.

    Agents ``0..m-1`` form V1 and the rest V2.  Inside each group every pair
    interacts at the constant rate ``inner``; every cross pair decays as
    ``c*exp(-rate*t)`` with ``c`` chosen so the total cross interaction
    ``sum_{i in V1, j in V2} int_0^inf (a_ij + a_ji) dt`` equals ``budget``.
    """
    if not 0 < m < n:
        raise ScheduleError("t-quarter: need 0 < m < n")
    if budget < 0 or inner < 0:
        raise ScheduleError("t-quarter: budget and inner rate must be nonnegative")
    group = np.arange(n) < m
    same = group[:, None] == group[None, :]
    per = np.where(same, inner, 0.0)
    np.fill_diagonal(per, 0.0)
    c = budget * rate / (2.0 * m * (n - m))
    tr = np.where(same, 0.0, c)
    return per, tr


def _prep_t_quarter(p: dict) -> dict:
    m, n = int(p["m"]), int(p["n"])
    rate = float(p.get("rate", 1.0))
    per, tr = t_quarter_matrices(m, n, float(p.get("inner", 1.0)), float(p["budget"]), rate)
    return {"persistent": _frozen(per), "transient": _frozen(tr), "rate": rate}


@dataclass(frozen=True)
class _Model:
    prep: Callable[[dict], dict]
    fn: Callable[[np.ndarray, dict], np.ndarray]
    size: Callable[[dict], int]


CLOSED_FORMS: dict[str, _Model] = {
    "example1": _Model(_prep_example1, _example1, lambda p: 3),
    "constant": _Model(_prep_constant, _constant, lambda p: p["matrix"].shape[0]),
    "capacitor-network": _Model(_prep_capacitor, _capacitor, lambda p: p["capacitance"].size),
    "decaying-tail": _Model(_prep_decaying_tail, _decaying_tail, lambda p: p["persistent"].shape[0]),
    "t-quarter": _Model(_prep_t_quarter, _decaying_tail, lambda p: p["persistent"].shape[0]),
}


@dataclass(frozen=True, eq=False)
class ClosedForm:
    """Time-varying coefficients from the fixed catalogue ``CLOSED_FORMS``."""

    model: str
    params: dict = field(default_factory=dict)

    endogenous = False

    def __post_init__(self):
        if self.model not in CLOSED_FORMS:
            raise ScheduleError(f"unknown closed-form model {self.model!r}")
        try:
            prepared = CLOSED_FORMS[self.model].prep(dict(self.params))
        except KeyError as exc:
            raise ScheduleError(f"{self.model}: missing parameter {exc.args[0]!r}") from None
        object.__setattr__(self, "_p", prepared)

    @property
    def n(self) -> int:
        return CLOSED_FORMS[self.model].size(self._p)

    def evaluate(self, t, x=None, left: bool = False) -> np.ndarray:
        return self.evaluate_many(np.asarray([t], dtype=float))[0]

    def evaluate_many(self, ts, left: bool = False) -> np.ndarray:
        return CLOSED_FORMS[self.model].fn(np.asarray(ts, dtype=float), self._p)

    def breakpoints(self, horizon: float) -> tuple[float, ...]:
        return ()

    def cross_tail_budget(self, group: np.ndarray, t0: float = 0.0) -> float:
        """``sum_{i in V1, j in V2} int_{t0}^inf (a_ij + a_ji)``; inf if not integrable."""
        if self.model not in ("decaying-tail", "t-quarter"):
            raise ScheduleError(f"{self.model}: tail budget only defined for decaying tails")
        g = np.asarray(group, dtype=bool)
        cross = g[:, None] != g[None, :]
        if np.any(self._p["persistent"][cross] > 0):
            return math.inf
        rate = self._p["rate"]
        return float(self._p["transient"][cross].sum() * math.exp(-rate * t0) / rate)

    def to_config(self) -> dict:
        return {"kind": "closed-form", "model": self.model, "params": _jsonable(self.params)}


# ---------------------------------------------------------------------------
# endogenous rules


def _bump(z: np.ndarray, p: dict) -> np.ndarray:
    # smooth inside the support; zero outside handled by the mode mask
    return 1.0 - (z / p["radius"]) ** 2


def _gaussian(z: np.ndarray, p: dict) -> np.ndarray:
    return np.exp(-0.5 * (z / p["sigma"]) ** 2)


KERNELS: dict[str, Callable[[np.ndarray, dict], np.ndarray]] = {
    "radially-decreasing-threshold": _bump,
    "gaussian-truncated": _gaussian,
}

RULES = ("bounded-confidence", "normalized-bounded-confidence", "kernel", "example2")


@dataclass(frozen=True, eq=False)
class Endogenous:
    """State-dependent coefficients ``a_ij(x)`` from the rule catalogue ``RULES``.

    ``mode(x)`` is a boolean array whose changes mark the switching surfaces:
    the interaction mask ``|x_i - x_j| < radius`` for the confidence and kernel
    rules, the strict ordering ``x_1 < x_2 < x_3 < x_4`` for ``example2``.
    """

    rule: str
    params: dict = field(default_factory=dict)
    size: int = 0

    endogenous = True

    def __post_init__(self):
        if self.rule not in RULES:
            raise ScheduleError(f"unknown endogenous rule {self.rule!r}")
        if self.size < 1:
            raise ScheduleError("endogenous: agent count must be >= 1")
        p = dict(self.params)
        if self.rule == "example2":
            if self.size != 4:
                raise ScheduleError("example2 is defined for n = 4")
        else:
            r = float(p.get("radius", 1.0))
            if r <= 0:
                raise ScheduleError("endogenous: radius must be positive")
            p["radius"] = r
        if self.rule == "kernel":
            kern = p.get("kernel", "radially-decreasing-threshold")
            if kern not in KERNELS:
                raise ScheduleError(f"unknown kernel {kern!r}")
            p["kernel"] = kern
            p["sigma"] = float(p.get("sigma", 0.5))
            if p["sigma"] <= 0:
                raise ScheduleError("kernel: sigma must be positive")
        object.__setattr__(self, "_p", p)

    @property
    def n(self) -> int:
        return self.size

    @property
    def radius(self) -> float:
        return self._p.get("radius", math.nan)

    def kernel_value(self, z) -> np.ndarray:
        """The even kernel f(z), including its zero region."""
        z = np.asarray(z, dtype=float)
        inside = np.abs(z) < self._p["radius"]
        return np.where(inside, KERNELS[self._p["kernel"]](z, self._p), 0.0)

    def mode(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.rule == "example2":
            return np.array([bool(np.all(np.diff(x) > 0))])
        return np.abs(x[:, None] - x[None, :]) < self._p["radius"]

    def coefficients(self, x, mode: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.size
        if self.rule == "example2":
            a = np.zeros((4, 4))
            if mode[0]:
                a[0, 2] = a[2, 0] = a[1, 3] = a[3, 1] = 1.0
            return a
        mask = mode & ~np.eye(n, dtype=bool)
        if self.rule == "bounded-confidence":
            return mask.astype(float)
        if self.rule == "normalized-bounded-confidence":
            # denominator counts every j with |x_i - x_j| < r, i itself included
            count = mode.sum(axis=1).astype(float)
            with np.errstate(divide="ignore", invalid="ignore"):
                a = np.where(mask, 1.0 / count[:, None], 0.0)
            return a
        z = x[:, None] - x[None, :]
        return np.where(mask, KERNELS[self._p["kernel"]](z, self._p), 0.0)

    def evaluate(self, t, x=None, left: bool = False) -> np.ndarray:
        if x is None:
            raise ScheduleError("endogenous schedule needs the state x")
        return self.coefficients(x, self.mode(x))

    def breakpoints(self, horizon: float) -> tuple[float, ...]:
        return ()

    def to_config(self) -> dict:
        return {"kind": "endogenous", "rule": self.rule, "params": _jsonable(self.params)}


# ---------------------------------------------------------------------------
# random Markov switching


def _draw(seed: int, k: int) -> float:
    # keyed by (seed, interval index): random access, independent of call order
    return float(np.random.default_rng([int(seed), int(k)]).random())


@dataclass(frozen=True, eq=False)
class RandomMarkov:
    """Coefficient matrix following a finite-state Markov chain.

    The chain holds each state for ``dwell`` time units; the transition out
    of interval ``k`` uses a uniform draw keyed by ``(seed, k)``.  The path is
    computed once up to ``horizon``.
    """

    states: tuple[np.ndarray, ...]
    transition: np.ndarray
    dwell: float
    seed: int
    horizon: float
    initial: int = 0
    zero_diagonal: bool = True

    endogenous = False

    def __post_init__(self):
        mats = tuple(_frozen(m) for m in self.states)
        if not mats:
            raise ScheduleError("random-markov: need at least one state")
        for k, m in enumerate(mats):
            check_coefficients(m, zero_diagonal=self.zero_diagonal, what=f"state {k}")
        if len({m.shape for m in mats}) != 1:
            raise ScheduleError("random-markov: states have different sizes")
        p = _frozen(self.transition)
        if p.shape != (len(mats), len(mats)) or np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0):
            raise ScheduleError("random-markov: transition must be a row-stochastic k x k matrix")
        if self.dwell <= 0 or self.horizon <= 0:
            raise ScheduleError("random-markov: dwell and horizon must be positive")
        if not 0 <= self.initial < len(mats):
            raise ScheduleError("random-markov: initial state out of range")
        count = int(math.ceil(self.horizon / self.dwell)) + 1
        cum = np.cumsum(p, axis=1)
        path = [int(self.initial)]
        for k in range(1, count):
            row = cum[path[-1]]
            path.append(min(int(np.searchsorted(row, _draw(self.seed, k), side="right")), len(mats) - 1))
        object.__setattr__(self, "states", mats)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "path", tuple(path))
        object.__setattr__(self, "_stack", _frozen(np.stack(mats)))
        object.__setattr__(self, "_path", np.array(path))

    @property
    def n(self) -> int:
        return self.states[0].shape[0]

    def _index(self, ts, left: bool) -> np.ndarray:
        q = np.asarray(ts, dtype=float) / self.dwell
        k = np.ceil(q) - 1 if left else np.floor(q)
        k = np.clip(k, 0, len(self.path) - 1).astype(int)
        return self._path[k]

    def evaluate(self, t, x=None, left: bool = False) -> np.ndarray:
        return self.states[int(self._index(t, left))]

    def evaluate_many(self, ts, left: bool = False) -> np.ndarray:
        return self._stack[self._index(ts, left)]

    def breakpoints(self, horizon: float) -> tuple[float, ...]:
        out = []
        for k in range(1, len(self.path)):
            t = k * self.dwell
            if t >= horizon:
                break
            if self.path[k] != self.path[k - 1]:
                out.append(t)
        return tuple(out)

    def to_config(self) -> dict:
        return {
            "kind": "random-markov",
            "states": [m.tolist() for m in self.states],
            "transition": self.transition.tolist(),
            "dwell": self.dwell,
            "initial": self.initial,
        }


Schedule = PiecewiseConstant | ClosedForm | Endogenous | RandomMarkov


def evaluate_schedule(schedule: Schedule, t: float, x=None, *, horizon: float | None = None,
                      left: bool = False) -> np.ndarray:
    """Coefficient matrix at time ``t`` (and state ``x`` for endogenous rules).

    Pure: identical arguments give bitwise-identical results.
    """
    if horizon is not None and not (0.0 <= t <= horizon):
        raise ScheduleError(f"t = {t} outside [0, {horizon}]")
    if x is not None:
        x = np.asarray(x, dtype=float)
        if x.shape != (schedule.n,):
            raise ScheduleError(f"state has {x.size} entries, schedule has n = {schedule.n}")
    a = schedule.evaluate(t, x, left=left)
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
