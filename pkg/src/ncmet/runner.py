"""Run an experiment config across seeds and emit CSV/JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import Abelian, Factor, functional_calculus, hermitian_eig, l2_norm, trace
from .cone import dP, exp_point
from .config import ExperimentConfig
from .dynamics import CocycleSystem, initial_point
from .errors import ConfigurationError, NcmetError
from .met import (
    egorov_probe,
    estimate_met,
    invariance_check,
    oseledets_flag,
    raw_growth,
    smooth_growth,
)
from .oracles import qr_lyapunov_exponents, single_operator_log_limit

CSV_COLUMNS = ("seed", "n", "drift_n", "dP_rate_n", "l2_log_rate_n", "fk_gap_n", "raw_growth_n",
               "smooth_growth")
SERIES_COLUMNS = ("series", "seed", "x", "y")
THREADS_ENV = "NCMET_THREADS"


def fmt(v) -> str:
    """Shortest round-trip text for a float; ``nan``/``inf`` spelled out."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def jsonable(obj):
    """Plain JSON data with NaN and infinities mapped to ``null``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n"


def thread_count(requested: int) -> int:
    """``requested`` capped by the ``NCMET_THREADS`` environment variable."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return max(1, requested)
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return max(1, min(requested, cap))


# -- criteria ---------------------------------------------------------------

def _known_log_limit(sys: CocycleSystem):
    if sys.known_limit is None:
        return None
    return functional_calculus(sys.known_limit, np.log)


def _single_factor(sys: CocycleSystem, kind: str) -> Factor:
    blocks = sys.algebra.blocks
    if len(blocks) != 1 or not isinstance(blocks[0], Factor):
        raise ConfigurationError(f"criteria: {kind} needs an algebra with a single matrix block")
    return blocks[0]


def check_criteria(config: ExperimentConfig, sys: CocycleSystem) -> None:
    """Reject criteria that cannot be evaluated on this system."""
    for k, c in enumerate(config["criteria"]):
        kind = c["kind"]
        where = f"criteria[{k}]"
        if kind == "limit_operator_l2" and sys.known_limit is None:
            raise ConfigurationError(f"{where}: {kind} needs a cocycle with a closed-form limit")
        if kind == "drift" and "target" not in c and sys.known_limit is None:
            raise ConfigurationError(f"{where}: drift needs a target for this cocycle")
        if kind == "lyapunov_oracle":
            _single_factor(sys, kind)
            if "matrices" not in sys.metadata:
                raise ConfigurationError(f"{where}: lyapunov_oracle needs an iid_random generator")
        if kind == "single_operator":
            _single_factor(sys, kind)
            if sys.name != "constant":
                raise ConfigurationError(f"{where}: single_operator needs a constant generator")
        if kind == "determinant_gap" and abs(sys.algebra.trace_of_identity - 1.0) > 1e-12:
            raise ConfigurationError(f"{where}: determinant_gap needs a normalized trace")


def _threshold(config: ExperimentConfig, criterion: dict) -> float:
    if "threshold" in criterion:
        return float(criterion["threshold"])
    return float(config["thresholds"][0]) if config["thresholds"] else 0.0


def _criterion_value(config, sys, criterion, est, x, ctx) -> float:
    """The per-seed error of a criterion; it passes when ``<= tolerance``."""
    kind = criterion["kind"]
    if kind == "limit_operator_l2":
        return l2_norm(est.log_limit - _known_log_limit(sys))
    if kind == "drift":
        target = criterion.get("target")
        if target is None:
            target = 2.0 * l2_norm(_known_log_limit(sys))
        return abs(est.drift - float(target))
    if kind == "lyapunov_oracle":
        mats = []
        y = x
        for _ in range(est.horizon):
            mats.append(sys.generator(y).blocks[0])
            y = sys.base.step(y)
        oracle = qr_lyapunov_exponents(mats)
        eigs = np.sort(hermitian_eig(est.log_limit).values[0])
        return float(np.max(np.abs(eigs - oracle)))
    if kind == "single_operator":
        T = sys.generator(x)
        oracle = T.parent.element([single_operator_log_limit(T.blocks[0])])
        return dP(est.limit_operator, exp_point(oracle))
    if kind == "determinant_gap":
        n = criterion.get("horizon", est.horizons[0])
        row = est.diagnostics[est.horizons.index(n)]
        return abs(math.exp(row.log_fk) - math.exp(float(trace(est.log_limit).real)))
    if kind in ("invariance_measure", "invariance_subspace"):
        t = _threshold(config, criterion)
        key = ("invariance", t)
        if key not in ctx:
            ctx[key] = invariance_check(sys, x, est, ctx["est_fx"](), t)
        sub, meas = ctx[key]
        return meas if kind == "invariance_measure" else sub
    if kind == "smooth_growth":
        sg = ctx["smooth"]
        # distance outside the contract interval [rho, rho + eps]
        return max(sg.rho - sg.value, sg.value - sg.rho - config["growth"]["eps"], 0.0)
    raise ConfigurationError(f"criteria: unknown kind {kind!r}")


# -- per-seed work ----------------------------------------------------------

@dataclass
class SeedResult:
    seed: int
    rows: list = field(default_factory=list)  # CSV rows in column order
    series: list = field(default_factory=list)  # (series, x, y)
    summary: dict = field(default_factory=dict)
    criteria: dict = field(default_factory=dict)  # criterion name -> value
    error: str | None = None
    seconds: float = 0.0


def _atoms(mu) -> dict:
    return {"locations": [float(v) for v in mu.locations], "masses": [float(v) for v in mu.masses]}


def run_seed(config: ExperimentConfig, sys: CocycleSystem, seed: int) -> SeedResult:
    start = time.perf_counter()
    res = SeedResult(seed)
    try:
        _fill_seed(config, sys, seed, res)
    except (NcmetError, ArithmeticError, np.linalg.LinAlgError) as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        res.rows, res.series = [], []
        res.criteria = {c["name"]: math.nan for c in config["criteria"]}
    res.seconds = time.perf_counter() - start
    return res


def _fill_seed(config, sys, seed, res):
    hs = config.horizons
    x = initial_point(sys, seed)
    est = estimate_met(sys, x, hs, seed=seed)
    xi = config.growth_vector(sys)
    eps = config["growth"]["eps"]
    raw = dict(raw_growth(sys, x, xi, hs, est=est))
    smooth = smooth_growth(sys, x, xi, hs, eps, est=est)
    smooth_rows = {r[0]: r for r in smooth.rows}
    normalized = abs(sys.algebra.trace_of_identity - 1.0) <= 1e-12
    log_det_limit = float(trace(est.log_limit).real)
    for d in est.diagnostics:
        fk_gap = abs(math.exp(d.log_fk) - math.exp(log_det_limit)) if normalized else math.nan
        res.rows.append((seed, d.n, d.drift, d.dP_rate, d.l2_log_rate, fk_gap, raw[d.n],
                         smooth_rows[d.n][1]))
        res.series.extend([
            ("drift_n", d.n, d.drift), ("dP_rate_n", d.n, d.dP_rate), ("dP_root_n", d.n, d.dP_root),
            ("l2_log_rate_n", d.n, d.l2_log_rate), ("fk_gap_n", d.n, fk_gap),
            ("raw_growth_n", d.n, raw[d.n]), ("smooth_growth_n", d.n, smooth_rows[d.n][1]),
            ("cutoff_defect_n", d.n, smooth_rows[d.n][2]),
        ])
    flag = oseledets_flag(est, config["thresholds"])
    summary = {
        "seed": seed,
        "horizon": est.horizon,
        "drift": est.drift,
        "degenerate": est.degenerate,
        "log_limit_spectrum": np.sort(np.concatenate(hermitian_eig(est.log_limit).values)),
        "lyapunov_atoms": _atoms(est.lyapunov_distribution),
        "fk_determinant_limit": math.exp(log_det_limit) if normalized else None,
        "flag": {"thresholds": list(flag.thresholds), "dimensions": list(flag.dimensions),
                 "warnings": list(flag.warnings)},
        "dP_root": {str(d.n): d.dP_root for d in est.diagnostics},
        "growth": {"rho": smooth.rho, "smooth_growth": smooth.value,
                   "raw_growth_final": raw[hs[-1]]},
        "warnings": list(est.warnings),
    }
    if len(sys.algebra.blocks) == 1 and isinstance(sys.algebra.blocks[0], Abelian):
        probe = egorov_probe(sys, est, eps)
        summary["egorov"] = {"deficit": probe.deficit, "uniform_error": probe.uniform_error,
                             "kept": int(probe.selected.sum())}
    ctx = {"smooth": smooth}
    fx = sys.base.step(x)
    ctx["est_fx"] = lambda: estimate_met(sys, fx, hs, seed=seed)
    for c in config["criteria"]:
        res.criteria[c["name"]] = float(_criterion_value(config, sys, c, est, x, ctx))
    res.summary = summary


# -- the run ----------------------------------------------------------------

@dataclass
class Report:
    config: ExperimentConfig
    seeds: list  # SeedResult, in config seed order
    criteria: list  # verdict dicts, in config order
    timings: dict

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.criteria)

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in self.seeds:
            for row in s.rows:
                w.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def series_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for s in self.seeds:
            for name, xv, yv in s.series:
                w.writerow([name, s.seed, fmt(xv), fmt(yv)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "config": self.config.to_json(),
            "seeds": [dict(s.summary, seed=s.seed, error=s.error) for s in self.seeds],
            "criteria": self.criteria,
            "passed": self.passed,
        }

    def write(self, out_dir=None, plots: bool | None = None) -> dict:
        """Write the report files; return ``{kind: path}``."""
        out = Path(out_dir if out_dir is not None else self.config["output"]["dir"])
        out.mkdir(parents=True, exist_ok=True)
        prefix = self.config["output"]["prefix"]
        paths = {
            "diagnostics": out / f"{prefix}_diagnostics.csv",
            "series": out / f"{prefix}_series.csv",
            "summary": out / f"{prefix}_summary.json",
            "timings": out / f"{prefix}_timings.json",
        }
        paths["diagnostics"].write_text(self.diagnostics_csv())
        paths["series"].write_text(self.series_csv())
        paths["summary"].write_text(dumps(self.summary()))
        paths["timings"].write_text(dumps(self.timings))
        if plots if plots is not None else self.config["output"]["plots"]:
            from .plotting import render_report
            paths.update(render_report(self, out, prefix))
        return {k: str(v) for k, v in paths.items()}


def run(config: ExperimentConfig) -> Report:
    """Estimate every seed, evaluate the criteria, and collect a :class:`Report`.

    Seeds run on a thread pool; results are merged in config seed order so
    the output does not depend on the number of workers.
    """
    start = time.perf_counter()
    sys = config.build_system()
    check_criteria(config, sys)
    workers = thread_count(config["parallelism"])
    seeds = config.seeds
    if workers == 1:
        results = [run_seed(config, sys, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: run_seed(config, sys, s), seeds))
    verdicts = []
    for c in config["criteria"]:
        values = [r.criteria[c["name"]] for r in results]
        ok = [bool(v <= c["tolerance"]) for v in values]  # NaN fails
        finite = [v for v in values if math.isfinite(v)]
        verdicts.append({
            "name": c["name"], "kind": c["kind"], "tolerance": c["tolerance"],
            "worst": max(finite) if len(finite) == len(values) else math.nan,
            "per_seed": values, "passed": all(ok),
        })
    timings = {
        "threads": workers,
        "total_seconds": time.perf_counter() - start,
        "per_seed_seconds": {str(r.seed): r.seconds for r in results},
    }
    return Report(config, results, verdicts, timings)
