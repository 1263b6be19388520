"""Experiment orchestration: configuration, sweep runners, and report emission.

A single JSON document configures every experiment.  Runners enumerate their
work in configuration order and emit :class:`ResultRow` values in that same
order, so two runs with the same configuration produce byte-identical output
files.  A failing combination never aborts a sweep; it appears as a row with
quantity ``error``.  The only hard, theorem-derived assertions are the exact
lower-bound margin (whitney) and bracket consistency (johnen); violations are
reported through :attr:`RunResult.hard_failure` and become exit code 1.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .differences import (
    ModulusRequest,
    modulus,
    p_mean_modulus,
    total_modulus,
    total_p_mean_modulus,
    whitney_constant_sum,
)
from .functions import get_function
from .geometry import (
    GeometryError,
    Parallelepiped,
    QuadratureSpec,
    lp_norm,
    subsets,
)
from .polyapprox import (
    best_approx,
    derivative_inequality_ratios,
    taylor_poly,
    taylor_remainder_bound,
)
from .smoother import BracketViolation, KFuncConfig, k_functional_bracket
from .simplex import SimplexError

__all__ = [
    "ConfigError",
    "Resolutions",
    "ExperimentConfig",
    "ResultRow",
    "RunResult",
    "run_whitney",
    "run_johnen",
    "run_taylor",
    "run_lemma21",
    "run_modulus",
    "run_bestapprox",
    "run_kfunc",
    "emit",
    "csv_bytes",
    "json_bytes",
    "EXPERIMENTS",
]

MARGIN_TOL = 1e-6  # margin <= MARGIN_TOL * (1 + Omega) is the hard lower-bound check


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class Resolutions:
    """Discretization knobs; defaults match the module-level defaults."""

    h_grid: int = 33
    quad_nodes: int = 32
    sup_nodes: int = 65
    minimax_grid: int = 0  # 0 = automatic (max(4 r_i, 17) per axis)
    panel_nodes: int = 16
    mean_nodes: int = 16

    def quad_for(self, dim: int) -> QuadratureSpec:
        return QuadratureSpec.for_dim(dim, self.quad_nodes, self.sup_nodes)

    def fit_grid(self, r: tuple[int, ...]) -> tuple[int, ...] | None:
        if self.minimax_grid <= 0:
            return None
        return tuple(max(self.minimax_grid, 2 * ri) for ri in r)


@dataclass(frozen=True)
class ExperimentConfig:
    function_ids: tuple[str, ...]
    orders: tuple[tuple[int, ...], ...]
    p_values: tuple[float, ...]
    box: Parallelepiped
    shrink_levels: int = 0
    t_sweep: int = 12
    t: tuple[float, ...] | None = None
    resolutions: Resolutions = field(default_factory=Resolutions)
    output_path: str | None = None
    output_format: str = "csv"
    jobs: int = 1
    include_p_mean: bool = True
    subdivision: bool = True
    record_runtime: bool = False
    t_min_factor: float = 0.01

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            box_raw = raw["box"]
            box = Parallelepiped(box_raw["lower"], box_raw["upper"])
        except (KeyError, TypeError, GeometryError) as exc:
            raise ConfigError(f"invalid or missing box: {exc}") from exc
        try:
            box.require_positive_size()
        except GeometryError as exc:
            raise ConfigError(str(exc)) from exc
        dim = box.dim
        ids = tuple(raw.get("function_ids", ()))
        if not ids:
            raise ConfigError("function_ids must be a non-empty list")
        for fid in ids:
            try:
                f = get_function(fid)
            except KeyError as exc:
                raise ConfigError(str(exc)) from exc
            if f.dimension != dim:
                raise ConfigError(
                    f"{fid} has dimension {f.dimension}, box has dimension {dim}")
        dims = raw.get("dimensions")
        if dims is not None and list(dims) != [dim]:
            raise ConfigError(f"dimensions {dims} inconsistent with box dimension {dim}")
        orders = []
        for r in raw.get("orders", ()):
            r = tuple(int(v) for v in (r if isinstance(r, (list, tuple)) else [r]))
            if len(r) != dim or any(v < 1 for v in r):
                raise ConfigError(f"order {r} must have {dim} entries >= 1")
            orders.append(r)
        if not orders:
            raise ConfigError("orders must be a non-empty list")
        p_values = tuple(_parse_p(p) for p in raw.get("p_values", ()))
        if not p_values:
            raise ConfigError("p_values must be a non-empty list")
        res_raw = raw.get("resolutions", {})
        unknown = set(res_raw) - set(Resolutions.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown resolution keys: {sorted(unknown)}")
        resolutions = Resolutions(**{k: int(v) for k, v in res_raw.items()})
        out = raw.get("output", {})
        fmt = out.get("format", "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {fmt!r}")
        t = raw.get("t")
        if t is not None:
            t = tuple(float(v) for v in (t if isinstance(t, (list, tuple)) else [t]))
            if len(t) != dim or any(v <= 0 for v in t):
                raise ConfigError(f"t {t} must have {dim} positive entries")
        return cls(
            function_ids=ids,
            orders=tuple(orders),
            p_values=p_values,
            box=box,
            shrink_levels=int(raw.get("shrink_levels", 0)),
            t_sweep=int(raw.get("t_sweep", 12)),
            t=t,
            resolutions=resolutions,
            output_path=out.get("path"),
            output_format=fmt,
            jobs=int(raw.get("jobs", 1)),
            include_p_mean=bool(raw.get("include_p_mean", True)),
            subdivision=bool(raw.get("subdivision", True)),
            record_runtime=bool(raw.get("record_runtime", False)),
            t_min_factor=float(raw.get("t_min_factor", 0.01)),
        )

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def kfunc_config(self, dim: int) -> KFuncConfig:
        res = self.resolutions
        return KFuncConfig(
            quad=res.quad_for(dim),
            h_grid=res.h_grid,
            panel_nodes=res.panel_nodes,
        )


def _parse_p(p) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigError(f"p value {p!r} not understood (use numbers or 'inf')")
    p = float(p)
    if not (1.0 <= p <= math.inf):
        raise ConfigError(f"p must lie in [1, inf], got {p}")
    return p


# ---------------------------------------------------------------------------
# result rows and serialization
# ---------------------------------------------------------------------------

def _fmt_float(v: float) -> str:
    if v != v:
        return "nan"
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def _fmt_p(p: float) -> str:
    if p == math.inf:
        return "inf"
    if float(p).is_integer():
        return str(int(p))
    return repr(float(p))


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    function_id: str
    d: int
    r: tuple[int, ...]
    p: float
    box: Parallelepiped
    t: tuple[float, ...] | None
    quantity: str
    value: float
    runtime_ms: int = 0

    def fields(self) -> dict:
        return {
            "experiment": self.experiment,
            "function_id": self.function_id,
            "d": self.d,
            "r": "x".join(str(int(v)) for v in self.r),
            "p": _fmt_p(self.p),
            "box": "x".join(
                f"{_fmt_float(lo)}..{_fmt_float(hi)}"
                for lo, hi in zip(self.box.lower, self.box.upper)
            ),
            "t": "" if self.t is None else "x".join(_fmt_float(v) for v in self.t),
            "quantity": self.quantity,
            "value": None if self.value != self.value else float(self.value),
            "runtime_ms": int(self.runtime_ms),
        }


CSV_HEADER = "experiment,function_id,d,r,p,box,t,quantity,value,runtime_ms"


def csv_bytes(rows: list[ResultRow]) -> bytes:
    lines = [CSV_HEADER]
    for row in rows:
        f = row.fields()
        value = "nan" if f["value"] is None else _fmt_float(f["value"])
        lines.append(",".join([
            f["experiment"], f["function_id"], str(f["d"]), f["r"], f["p"],
            f["box"], f["t"], f["quantity"], value, str(f["runtime_ms"]),
        ]))
    return ("\n".join(lines) + "\n").encode()


def json_bytes(rows: list[ResultRow]) -> bytes:
    return (json.dumps([r.fields() for r in rows], indent=2) + "\n").encode()


def emit(rows: list[ResultRow], path: str, fmt: str = "csv") -> None:
    """Write rows to ``path`` as CSV or JSON (deterministic bytes)."""
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown output format {fmt!r}")
    payload = csv_bytes(rows) if fmt == "csv" else json_bytes(rows)
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise RuntimeError(f"cannot write output file {path}: {exc}") from exc


@dataclass
class RunResult:
    rows: list[ResultRow]
    hard_failure: bool = False


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def _shrunk_box(box: Parallelepiped, level: int) -> Parallelepiped:
    # shrink anchored at the lower corner, halving every axis per level
    size = box.size() / (2.0 ** level)
    return Parallelepiped(box.lower, np.asarray(box.lower) + size)


def _na_ratio(num: float, den: float, scale: float = 0.0) -> float:
    if den <= 1e-12 * (1.0 + scale):
        return math.nan
    return num / den


def _whitney_task(cfg: ExperimentConfig, fid: str, r: tuple[int, ...], p: float,
                  level: int) -> tuple[list[ResultRow], bool]:
    f = get_function(fid)
    res = cfg.resolutions
    box = _shrunk_box(cfg.box, level)
    quad = res.quad_for(f.dimension)
    delta = tuple(box.size())
    start = time.perf_counter()
    _, err = best_approx(f, r, p, box, grid=res.fit_grid(r), quad=quad)
    omega = total_modulus(f, r, delta, p, box, res.h_grid, quad)
    csum = whitney_constant_sum(r)
    margin = omega - csum * err
    rows = []

    def add(quantity, value):
        ms = int(1000 * (time.perf_counter() - start)) if cfg.record_runtime else 0
        rows.append(ResultRow("whitney", fid, f.dimension, r, p, box, delta,
                              quantity, value, ms))

    add("E_r", err)
    add("Omega", omega)
    if cfg.include_p_mean:
        w_total = total_p_mean_modulus(f, r, delta, p, box, quad,
                                       res.mean_nodes, res.h_grid)
        add("W", w_total)
        add("ratio_E_over_W", _na_ratio(err, w_total))
    add("margin", margin)
    add("ratio_E_over_Omega", _na_ratio(err, omega))
    hard = margin > MARGIN_TOL * (1.0 + omega)
    return rows, hard


def _johnen_task(cfg: ExperimentConfig, fid: str, r: tuple[int, ...], p: float,
                 step: int) -> tuple[list[ResultRow], bool]:
    f = get_function(fid)
    box = cfg.box
    kcfg = cfg.kfunc_config(f.dimension)
    size = box.size()
    tbar = np.asarray([size[i] / (4.0 * r[i] * r[i]) for i in range(len(r))])
    factors = np.logspace(math.log10(cfg.t_min_factor), 0.0, cfg.t_sweep)
    t = tuple(float(v) for v in factors[step] * tbar)
    start = time.perf_counter()
    rows: list[ResultRow] = []

    def add(quantity, value):
        ms = int(1000 * (time.perf_counter() - start)) if cfg.record_runtime else 0
        rows.append(ResultRow("johnen", fid, f.dimension, r, p, box, t,
                              quantity, value, ms))

    try:
        bracket = k_functional_bracket(f, r, t, p, box, kcfg)
    except BracketViolation:
        add("error", math.nan)
        return rows, True
    omega = bracket.details["omega_total"]
    add("K_lower", bracket.lower)
    add("K_upper", bracket.upper)
    add("Omega", omega)
    add("ratio_upper_over_Omega", _na_ratio(bracket.upper, omega))
    add("ratio_lower_check",
        _na_ratio(bracket.lower * whitney_constant_sum(r), omega))
    if "f_minus_g" in bracket.details:
        add("ratio_fg_over_Omega", _na_ratio(bracket.details["f_minus_g"], omega))
        terms = bracket.details["deriv_terms"]
        omega_terms = bracket.details["omega_terms"]
        ratios = [terms[key] / omega_terms[key] for key in terms
                  if omega_terms.get(key, 0.0) > 1e-12]
        add("ratio_gderiv_over_omega", max(ratios) if ratios else math.nan)
    if cfg.subdivision and "subdomain_uppers" in bracket.details:
        combined = float(sum(bracket.details["subdomain_uppers"].values()))
        add("ratio_subdivision", _na_ratio(bracket.upper, combined))
    return rows, False


def _taylor_task(cfg: ExperimentConfig, fid: str, r: tuple[int, ...], p: float,
                 level: int) -> tuple[list[ResultRow], bool]:
    f = get_function(fid)
    res = cfg.resolutions
    box = _shrunk_box(cfg.box, level)
    quad = res.quad_for(f.dimension)
    start = time.perf_counter()
    tp = taylor_poly(f, r, box.lower, box)
    err = lp_norm(lambda q: np.asarray(f(q)) - tp(q), box, p, quad)
    bound = taylor_remainder_bound(f, r, p, box, quad)
    rows = []

    def add(quantity, value):
        ms = int(1000 * (time.perf_counter() - start)) if cfg.record_runtime else 0
        rows.append(ResultRow("taylor", fid, f.dimension, r, p, box,
                              tuple(box.size()), quantity, value, ms))

    add("taylor_err", err)
    add("taylor_bound", bound)
    add("ratio", _na_ratio(err, bound))
    return rows, False


def _lemma21_task(cfg: ExperimentConfig, fid: str, r: tuple[int, ...], p: float,
                  step: int) -> tuple[list[ResultRow], bool]:
    f = get_function(fid)
    res = cfg.resolutions
    box = cfg.box
    quad = res.quad_for(1)
    t = float(box.size()[0]) / (2.0 ** step)
    start = time.perf_counter()
    rows = []
    for k in range(r[0]):
        ratio_lp, ratio_sup = derivative_inequality_ratios(
            f, r[0], k, t, p, box, quad)
        ms = int(1000 * (time.perf_counter() - start)) if cfg.record_runtime else 0
        rows.append(ResultRow("lemma21", fid, 1, r, p, box, (t,),
                              f"ratio_lemma21_Lp_k{k}", ratio_lp, ms))
        rows.append(ResultRow("lemma21", fid, 1, r, p, box, (t,),
                              f"ratio_lemma21_sup_k{k}", ratio_sup, ms))
    return rows, False


def _modulus_task(cfg: ExperimentConfig, fid: str, r: tuple[int, ...], p: float,
                  _step: int) -> tuple[list[ResultRow], bool]:
    f = get_function(fid)
    res = cfg.resolutions
    box = cfg.box
    quad = res.quad_for(f.dimension)
    t = cfg.t if cfg.t is not None else tuple(box.size())
    rows = []
    omega_total = 0.0
    w_total = 0.0
    for e in subsets(f.dimension):
        r_e = e.project(r)
        val = modulus(ModulusRequest(f, r, e, t, p, box, res.h_grid, quad))
        omega_total += val
        rows.append(ResultRow("modulus", fid, f.dimension, r_e.entries, p, box, t,
                              "omega", val))
        w_val = p_mean_modulus(f, r_e, t, p, box, quad, res.mean_nodes, res.h_grid)
        w_total += w_val
        rows.append(ResultRow("modulus", fid, f.dimension, r_e.entries, p, box, t,
                              "w", w_val))
    rows.append(ResultRow("modulus", fid, f.dimension, r, p, box, t, "Omega",
                          omega_total))
    rows.append(ResultRow("modulus", fid, f.dimension, r, p, box, t, "W", w_total))
    return rows, False


def _bestapprox_task(cfg: ExperimentConfig, fid: str, r: tuple[int, ...], p: float,
                     _step: int) -> tuple[list[ResultRow], bool]:
    f = get_function(fid)
    res = cfg.resolutions
    quad = res.quad_for(f.dimension)
    _, err = best_approx(f, r, p, cfg.box, grid=res.fit_grid(r), quad=quad)
    return [ResultRow("bestapprox", fid, f.dimension, r, p, cfg.box, None,
                      "E_r", err)], False


def _kfunc_task(cfg: ExperimentConfig, fid: str, r: tuple[int, ...], p: float,
                _step: int) -> tuple[list[ResultRow], bool]:
    f = get_function(fid)
    box = cfg.box
    size = box.size()
    t = cfg.t if cfg.t is not None else tuple(
        size[i] / (4.0 * r[i] * r[i]) for i in range(len(r)))
    kcfg = cfg.kfunc_config(f.dimension)
    rows = []
    try:
        bracket = k_functional_bracket(f, r, t, p, box, kcfg)
    except BracketViolation:
        rows.append(ResultRow("kfunc", fid, f.dimension, r, p, box, t,
                              "error", math.nan))
        return rows, True
    rows.append(ResultRow("kfunc", fid, f.dimension, r, p, box, t, "K_lower",
                          bracket.lower))
    rows.append(ResultRow("kfunc", fid, f.dimension, r, p, box, t, "K_upper",
                          bracket.upper))
    return rows, False


_TASK_FUNCS = {
    "whitney": _whitney_task,
    "johnen": _johnen_task,
    "taylor": _taylor_task,
    "lemma21": _lemma21_task,
    "modulus": _modulus_task,
    "bestapprox": _bestapprox_task,
    "kfunc": _kfunc_task,
}


def _run_task(task) -> tuple[list[ResultRow], bool]:
    experiment, cfg, fid, r, p, step = task
    try:
        return _TASK_FUNCS[experiment](cfg, fid, r, p, step)
    except (SimplexError, BracketViolation, ValueError, ArithmeticError) as exc:
        f = get_function(fid)
        row = ResultRow(experiment, fid, f.dimension, r, p, cfg.box, cfg.t,
                        "error", math.nan)
        return [row], isinstance(exc, BracketViolation)


def _enumerate_tasks(experiment: str, cfg: ExperimentConfig) -> list[tuple]:
    if experiment in ("whitney", "taylor"):
        steps = range(cfg.shrink_levels + 1)
    elif experiment == "johnen":
        steps = range(cfg.t_sweep)
    elif experiment == "lemma21":
        steps = range(7)
    else:
        steps = (0,)
    tasks = []
    for fid in cfg.function_ids:
        f = get_function(fid)
        if experiment in ("taylor", "lemma21") and not f.is_sobolev:
            continue  # these sweeps have a Sobolev precondition; filter by tag
        if experiment == "lemma21" and f.dimension != 1:
            continue
        for r in cfg.orders:
            for p in cfg.p_values:
                if experiment in ("whitney", "bestapprox") and p not in (1.0, 2.0, math.inf):
                    raise ConfigError(
                        f"{experiment} computes best approximation; p must be 1, 2, or inf")
                for step in steps:
                    tasks.append((experiment, cfg, fid, r, p, step))
    return tasks


def _execute(experiment: str, cfg: ExperimentConfig) -> RunResult:
    tasks = _enumerate_tasks(experiment, cfg)
    rows: list[ResultRow] = []
    hard = False
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            for task_rows, task_hard in pool.map(_run_task, tasks, chunksize=1):
                rows.extend(task_rows)
                hard = hard or task_hard
    else:
        for task in tasks:
            task_rows, task_hard = _run_task(task)
            rows.extend(task_rows)
            hard = hard or task_hard
    return RunResult(rows, hard)


def run_whitney(cfg: ExperimentConfig) -> RunResult:
    """Two-sided check of best approximation against the total moduli per shrink level."""
    return _execute("whitney", cfg)


def run_johnen(cfg: ExperimentConfig) -> RunResult:
    """K-functional bracket sweep against the total modulus over a log t-grid."""
    return _execute("johnen", cfg)


def run_taylor(cfg: ExperimentConfig) -> RunResult:
    """Taylor error against the constant-free remainder bound per shrink level."""
    return _execute("taylor", cfg)


def run_lemma21(cfg: ExperimentConfig) -> RunResult:
    """Univariate derivative-inequality ratios over a halving t-sweep."""
    return _execute("lemma21", cfg)


def run_modulus(cfg: ExperimentConfig) -> RunResult:
    """Single moduli evaluation (all subset terms plus totals) at one step bound."""
    return _execute("modulus", cfg)


def run_bestapprox(cfg: ExperimentConfig) -> RunResult:
    """Single best-approximation evaluation per (function, order, p)."""
    return _execute("bestapprox", cfg)


def run_kfunc(cfg: ExperimentConfig) -> RunResult:
    """Single K-functional bracket per (function, order, p)."""
    return _execute("kfunc", cfg)


EXPERIMENTS = {
    "whitney": run_whitney,
    "johnen": run_johnen,
    "taylor": run_taylor,
    "lemma21": run_lemma21,
    "modulus": run_modulus,
    "bestapprox": run_bestapprox,
    "kfunc": run_kfunc,
}
