"""Run analysis and output files (CSV, edge list, JSON report)."""
from __future__ import annotations

import io
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .balance import condition_profile
from .discrete import DiscreteRun, certificate_chain, dt_integrate
from .dynamics import integrate, oscillation_spread, range_excursion, residual_check
from .graph import (
    NotConvergedError,
    classify_unbounded_edges,
    compare_partitions,
    limit_partition,
    predict_clusters,
    trailing_spread,
    weakly_connected_components,
)
from .scenario import Scenario, Trajectory
from .sorting import (
    CutBalanceWarning,
    monotonicity_check,
    sampled_minimal_K,
    sorted_evolution_residual,
    weighted_sum_series,
)

K_CAP = 1e6          # sampled constants above this count as "no finite K"
MERGE_TOL = 1e-4


def _fmt(v: float) -> str:
    return "%.17g" % v


def trajectory_csv(tr: Trajectory) -> str:
    buf = io.StringIO()
    buf.write("t," + ",".join(f"x_{i + 1}" for i in range(tr.n)) + "\n")
    for t, x in zip(tr.times, tr.states):
        head = str(int(t)) if tr.discrete else _fmt(t)
        buf.write(head + "," + ",".join(_fmt(float(v)) for v in x) + "\n")
    return buf.getvalue()


def series_csv(times, series: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("t," + ",".join(f"S_{m + 1}" for m in range(series.shape[1])) + "\n")
    for t, row in zip(times, series):
        buf.write(_fmt(t) + "," + ",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return obj


def _blocks(p) -> list[list[int]]:
    return p.one_based()


def _pair(w):
    return None if w is None else [w[0] + 1, w[1] + 1]


class Analysis:
    """Everything ``run`` writes: trajectory, S_m series, graph and report."""

    def __init__(self, sc: Scenario, trajectory: Trajectory, report: dict, graph, series=None):
        self.scenario = sc
        self.trajectory = trajectory
        self.report = report
        self.graph = graph
        self.series = series

    @property
    def theory_violation(self) -> bool:
        return bool(self.report["verdicts"]["theory_violation"])

    def summary(self) -> str:
        return "\n".join(self.report["summary"]) + "\n"

    def write(self, out: Path) -> list[Path]:
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "trajectory.csv": trajectory_csv(self.trajectory),
            "report.json": json.dumps(self.report, indent=2, sort_keys=True) + "\n",
        }
        if self.graph is not None:
            files["graph.txt"] = self.graph.to_text()
        if self.series is not None:
            files["s_m.csv"] = series_csv(self.trajectory.times, self.series)
        paths = []
        for name, text in files.items():
            p = out / name
            p.write_text(text)
            paths.append(p)
        return paths


def analyze(sc: Scenario, K: float | None = None, tol: float | None = None) -> Analysis:
    """Integrate ``sc`` and run every check on the result."""
    tol = sc.integrator.tol if tol is None else tol
    if sc.mode == "discrete":
        return _analyze_discrete(sc, dt_integrate(sc), tol)
    return _analyze_continuous(sc, integrate(sc), K, tol)


def _analyze_continuous(sc: Scenario, tr: Trajectory, K: float | None, tol: float) -> Analysis:
    ks = sampled_minimal_K(tr, sc)
    k_max = float(ks.max())
    finite = math.isfinite(k_max) and k_max <= K_CAP
    a0 = sc.schedule.evaluate(0.0, sc.x0)
    prof = condition_profile(a0)
    cut = {
        "sampled_minimal_K": {"max": k_max, "min": float(ks.min()), "samples": len(ks)},
        "verdict": f"cut-balanced at samples with K = {k_max:.6g}" if finite
        else "no finite cut-balance K at samples",
        "profile_t0": {"symmetric": prof.symmetric, "type_symmetric_K": prof.type_symmetric_K,
                       "average_preserving": prof.average_preserving,
                       "preserving_weights": prof.preserving_weights, "weights_K": prof.weights_K},
    }
    spread = trailing_spread(tr)
    osc = oscillation_spread(tr)
    try:
        observed = limit_partition(tr, MERGE_TOL, tol)
        converged = True
    except NotConvergedError:
        observed, converged = None, False
    graph = classify_unbounded_edges(tr)
    predicted = predict_clusters(graph)
    comparison = compare_partitions(predicted, observed) if converged else None
    partitions = {
        "predicted": _blocks(predicted),
        "predicted_str": str(predicted),
        "predicted_flags": list(predicted.flags),
        "observed": _blocks(observed) if observed else None,
        "observed_str": str(observed) if observed else None,
        "comparison": comparison.verdict if comparison else "not applicable (not converged)",
        "witness": _pair(comparison.witness) if comparison else None,
    }
    series, mono = None, None
    k_used = K if K is not None else (max(1.0, k_max) if finite else None)
    if k_used is not None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", CutBalanceWarning)
            series = weighted_sum_series(tr, sc, k_used)
        m = monotonicity_check(series, 100 * tol, tr.times)
        mono = {"K": k_used, "slack": 100 * tol, "ok": m.ok, "worst_violation": m.worst_violation,
                "m": m.m, "time": m.time, "warnings": [str(w.message) for w in caught]}
    residuals = {"trapezoid": residual_check(tr, sc), "sorted": sorted_evolution_residual(tr, sc)}
    excursion = range_excursion(tr)
    violation = bool(
        finite and ((comparison is not None and comparison.verdict == "mismatch")
                    or (mono is not None and not mono["ok"] and not mono["warnings"]))
    )
    report = {
        "fingerprint": sc.fingerprint(),
        "mode": sc.mode,
        "n": sc.n,
        "horizon": sc.horizon,
        "samples": len(tr.times),
        "events": list(tr.events),
        "cut_balance": cut,
        "convergence": {"converged": converged, "limits": tr.final, "trailing_spread_max": float(spread.max()),
                        "oscillation_spread": osc, "range_excursion": excursion},
        "partitions": partitions,
        "monotonicity": mono if mono else "not applicable (no finite K)",
        "residuals": residuals,
        "heuristics": {"edge_classification": graph.rule, "merge_tol": MERGE_TOL,
                       "convergence_window": "last 10% of horizon, spread < 10 tol", "tol": tol,
                       "k_cap": K_CAP},
        "verdicts": {"theory_violation": violation},
    }
    report = _clean(report)
    report["summary"] = _summary_lines(report)
    return Analysis(sc, tr, report, graph, series)


def _analyze_discrete(sc: Scenario, run: DiscreteRun, tol: float) -> Analysis:
    tr = run.trajectory
    graph = run.graph
    spread = float(np.ptp(tr.states[-1]))
    try:
        observed = limit_partition(tr, MERGE_TOL, tol)
        converged = True
    except NotConvergedError:
        observed, converged = None, False
    certs = {}
    comparison = None
    predicted = None
    if graph is not None:
        predicted = predict_clusters(graph)
        for block in weakly_connected_components(graph).blocks:
            chain = certificate_chain(tr, block, run.alpha, run.isolation[block])
            certs["{" + ",".join(str(v + 1) for v in block) + "}"] = {
                "count": len(chain),
                "worst_factor": max((c.factor for c in chain), default=None),
                "bound": chain[0].bound if chain else 1 - float(run.alpha) ** (len(block) - 1),
            }
        if observed is not None:
            comparison = compare_partitions(predicted, observed)
    violation = bool((comparison is not None and comparison.verdict == "mismatch") or not run.monotone)
    report = {
        "fingerprint": sc.fingerprint(),
        "mode": sc.mode,
        "n": sc.n,
        "horizon": sc.horizon,
        "samples": len(tr.times),
        "cut_balance": {"verdict": f"all steps validated with alpha = {float(run.alpha):.6g}"},
        "convergence": {"converged": converged, "limits": tr.final, "final_spread": spread,
                        "range_excursion": range_excursion(tr)},
        "partitions": {
            "predicted": _blocks(predicted) if predicted else None,
            "predicted_str": str(predicted) if predicted else None,
            "observed": _blocks(observed) if observed else None,
            "observed_str": str(observed) if observed else None,
            "comparison": comparison.verdict if comparison else "not applicable",
            "witness": _pair(comparison.witness) if comparison else None,
        },
        "monotonicity": {"component_extremes_ok": run.monotone,
                         "worst_violation": run.monotonicity_violation},
        "contraction": certs,
        "heuristics": {"edge_classification": graph.rule if graph else None, "merge_tol": MERGE_TOL,
                       "tol": tol},
        "verdicts": {"theory_violation": violation},
    }
    report = _clean(report)
    report["summary"] = _summary_lines(report)
    return Analysis(sc, tr, report, graph)


def _summary_lines(r: dict) -> list[str]:
    conv = r["convergence"]
    lines = [
        f"scenario {r['fingerprint'][:12]}  mode={r['mode']}  n={r['n']}  horizon={r['horizon']}",
        f"cut balance: {r['cut_balance']['verdict']}",
        "converged: " + ("yes" if conv["converged"] else "no")
        + "  limits: " + ", ".join(f"{v:.6g}" for v in conv["limits"]),
    ]
    if "oscillation_spread" in conv:
        lines.append("oscillation spread (last 20%): " + ", ".join(f"{v:.4g}" for v in conv["oscillation_spread"]))
    p = r["partitions"]
    lines.append(f"partition: predicted {p['predicted_str']}  observed {p['observed_str']}  "
                 f"comparison {p['comparison']}")
    mono = r["monotonicity"]
    if isinstance(mono, dict) and "K" in mono:
        lines.append(f"S_m monotone at K = {mono['K']:.6g}: {mono['ok']} (worst drop {mono['worst_violation']:.3g})")
    elif isinstance(mono, dict):
        lines.append(f"component extremes monotone: {mono['component_extremes_ok']}")
    else:
        lines.append(f"S_m: {mono}")
    if "residuals" in r:
        res = r["residuals"]
        lines.append(f"residuals: trapezoid {res['trapezoid']:.3g}  sorted {res['sorted']:.3g}")
    lines.append("theory violation: " + ("yes" if r["verdicts"]["theory_violation"] else "no"))
    return lines
