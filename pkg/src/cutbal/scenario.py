"""Scenario model, trajectories, and the JSON scenario format."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Annotated, Any, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .schedules import (
    ClosedForm,
    Endogenous,
    PiecewiseConstant,
    RandomMarkov,
    Schedule,
    ScheduleError,
)


class ScenarioError(ValueError):
    """Config text that violates the schema or a domain invariant."""


@dataclass(frozen=True)
class IntegratorSettings:
    method: str = "rk4"
    h: float = 1e-3
    tol: float = 1e-6
    event_refine: bool = True
    alpha: float | None = None  # discrete mode only; None infers it from the steps

    def __post_init__(self):
        if self.method not in ("rk4", "euler"):
            raise ScenarioError(f"unknown integrator method {self.method!r}")
        if not self.h > 0 or not self.tol > 0:
            raise ScenarioError("integrator h and tol must be positive")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise ScenarioError("alpha must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class Scenario:
    n: int
    schedule: Schedule
    x0: np.ndarray
    horizon: float
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    stride: int = 1
    seed: int = 0
    mode: str = "continuous"

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if self.n < 1:
            raise ScenarioError("n must be >= 1")
        if x0.shape != (self.n,):
            raise ScenarioError(f"x0 has {x0.size} entries, expected n = {self.n}")
        if not np.all(np.isfinite(x0)):
            raise ScenarioError("x0 entries must be finite")
        if self.schedule.n != self.n:
            raise ScenarioError(f"schedule is for n = {self.schedule.n}, scenario has n = {self.n}")
        if not self.horizon > 0:
            raise ScenarioError("horizon must be positive")
        if self.stride < 1:
            raise ScenarioError("sampling stride must be >= 1")
        if self.seed < 0:
            raise ScenarioError("seed must be an unsigned integer")
        if self.mode not in ("continuous", "discrete"):
            raise ScenarioError(f"unknown mode {self.mode!r}")
        if self.mode == "discrete" and self.schedule.endogenous:
            raise ScenarioError("discrete mode needs a time-driven schedule")
        if isinstance(self.schedule, PiecewiseConstant) and self.schedule.horizon != self.horizon:
            raise ScenarioError("piecewise-constant intervals must end exactly at the horizon")

    def with_(self, **changes) -> "Scenario":
        fields = {k: getattr(self, k) for k in
                  ("n", "schedule", "x0", "horizon", "integrator", "stride", "seed", "mode")}
        fields.update(changes)
        return Scenario(**fields)

    def to_config(self) -> dict:
        integ = {"method": self.integrator.method, "h": self.integrator.h, "tol": self.integrator.tol}
        if not self.integrator.event_refine:
            integ["event_refine"] = False
        if self.integrator.alpha is not None:
            integ["alpha"] = self.integrator.alpha
        return {
            "version": "1",
            "mode": self.mode,
            "n": self.n,
            "horizon": self.horizon,
            "x0": self.x0.tolist(),
            "schedule": self.schedule.to_config(),
            "integrator": integ,
            "sampling": {"stride": self.stride},
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        text = json.dumps(self.to_config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled states plus accumulated interaction integrals.

    ``integrals[k, i, j]`` is the integral of ``a_ij`` over ``[0, times[k]]``
    (cumulative activation counts in discrete time).  ``events`` lists the
    refined switching instants; both brackets of each event are samples.
    """

    times: np.ndarray
    states: np.ndarray
    integrals: np.ndarray | None = None
    events: tuple[float, ...] = ()
    discrete: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0 or t[0] != 0:
            raise ValueError("trajectory times must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        s = np.asarray(self.states)
        if s.shape[0] != t.size:
            raise ValueError("one state per sample time required")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


# ---------------------------------------------------------------------------
# config schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _Piece(_Strict):
    start: float
    end: float
    matrix: list[list[float]]


class _PiecewiseCfg(_Strict):
    kind: Literal["piecewise-constant"]
    pieces: list[_Piece] = Field(min_length=1)


class _Example1Params(_Strict):
    pass


class _ConstantParams(_Strict):
    matrix: list[list[float]]


class _CapacitorParams(_Strict):
    capacitance: list[float]
    conductance: list[list[float]]
    modulation: float = 0.0
    omega: float = 1.0


class _DecayingParams(_Strict):
    persistent: list[list[float]]
    transient: list[list[float]]
    rate: float = 1.0


class _TQuarterParams(_Strict):
    m: int
    n: int
    budget: float
    inner: float = 1.0
    rate: float = 1.0


_CLOSED_PARAMS = {
    "example1": _Example1Params,
    "constant": _ConstantParams,
    "capacitor-network": _CapacitorParams,
    "decaying-tail": _DecayingParams,
    "t-quarter": _TQuarterParams,
}


class _ClosedCfg(_Strict):
    kind: Literal["closed-form"]
    model: Literal["example1", "constant", "capacitor-network", "decaying-tail", "t-quarter"]
    params: dict[str, Any] = Field(default_factory=dict)


class _ConfidenceParams(_Strict):
    radius: float = 1.0


class _KernelParams(_Strict):
    kernel: Literal["radially-decreasing-threshold", "gaussian-truncated"] = "radially-decreasing-threshold"
    radius: float = 1.0
    sigma: float = 0.5


_RULE_PARAMS = {
    "bounded-confidence": _ConfidenceParams,
    "normalized-bounded-confidence": _ConfidenceParams,
    "kernel": _KernelParams,
    "example2": _Example1Params,
}


class _EndogenousCfg(_Strict):
    kind: Literal["endogenous"]
    rule: Literal["bounded-confidence", "normalized-bounded-confidence", "kernel", "example2"]
    params: dict[str, Any] = Field(default_factory=dict)


class _MarkovCfg(_Strict):
    kind: Literal["random-markov"]
    states: list[list[list[float]]] = Field(min_length=1)
    transition: list[list[float]]
    dwell: float
    initial: int = 0


_ScheduleCfg = Annotated[
    Union[_PiecewiseCfg, _ClosedCfg, _EndogenousCfg, _MarkovCfg], Field(discriminator="kind")
]


class _IntegratorCfg(_Strict):
    method: Literal["rk4", "euler"] = "rk4"
    h: float
    tol: float = 1e-6
    event_refine: bool = True
    alpha: float | None = None


class _SamplingCfg(_Strict):
    stride: int = 1


class _ScenarioCfg(_Strict):
    version: Literal["1"]
    mode: Literal["continuous", "discrete"] = "continuous"
    n: int
    horizon: float
    x0: list[float]
    schedule: _ScheduleCfg
    integrator: _IntegratorCfg
    sampling: _SamplingCfg = Field(default_factory=_SamplingCfg)
    seed: int = 0


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"])
        if e["type"] == "extra_forbidden":
            parts.append(f"unknown key {loc!r}")
        else:
            parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def _build_schedule(cfg, n: int, horizon: float, seed: int, mode: str) -> Schedule:
    zero_diag = mode == "continuous"
    if isinstance(cfg, _PiecewiseCfg):
        pieces = cfg.pieces
        for a, b in zip(pieces, pieces[1:]):
            if a.end != b.start:
                raise ScenarioError(f"bad interval partition: piece ending at {a.end} "
                                    f"followed by piece starting at {b.start}")
        if pieces[-1].end != horizon:
            raise ScenarioError("bad interval partition: last piece must end at the horizon")
        breaks = [p.start for p in pieces] + [pieces[-1].end]
        return PiecewiseConstant(tuple(breaks), tuple(np.array(p.matrix) for p in pieces), zero_diag)
    if isinstance(cfg, _ClosedCfg):
        params = _CLOSED_PARAMS[cfg.model].model_validate(cfg.params).model_dump(exclude_unset=True)
        return ClosedForm(cfg.model, params)
    if isinstance(cfg, _EndogenousCfg):
        params = _RULE_PARAMS[cfg.rule].model_validate(cfg.params).model_dump(exclude_unset=True)
        return Endogenous(cfg.rule, params, n)
    return RandomMarkov(tuple(np.array(s) for s in cfg.states), np.array(cfg.transition),
                        cfg.dwell, seed, horizon, cfg.initial, zero_diag)


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        cfg = _ScenarioCfg.model_validate(doc)
        integ = cfg.integrator
        schedule = _build_schedule(cfg.schedule, cfg.n, cfg.horizon, cfg.seed, cfg.mode)
        return Scenario(
            n=cfg.n,
            schedule=schedule,
            x0=np.array(cfg.x0),
            horizon=cfg.horizon,
            integrator=IntegratorSettings(integ.method, integ.h, integ.tol, integ.event_refine, integ.alpha),
            stride=cfg.sampling.stride,
            seed=cfg.seed,
            mode=cfg.mode,
        )
    except ValidationError as exc:
        raise ScenarioError(_describe(exc)) from None
    except ScheduleError as exc:
        raise ScenarioError(str(exc)) from None


def load_scenario(source: str) -> Scenario:
    """Parse and validate scenario config text (JSON)."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    return scenario_from_dict(doc)


def save_scenario(sc: Scenario) -> str:
    return json.dumps(sc.to_config(), indent=2, sort_keys=True) + "\n"
