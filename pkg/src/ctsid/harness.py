"""Monte Carlo experiments comparing the hold-based and exact-input estimators.

An :class:`ExperimentSpec` describes a grid of conditions (sample sizes times
sampling schemes) and how many noise realisations to draw for each.
:func:`run_experiment` generates one dataset per ``(condition, run)`` cell,
runs every requested estimator on that same dataset from a shared
state-variable-filter starting point, and reduces the estimates to means,
mean square errors and standard deviations.

Every cell draws its randomness from its own stream derived from
``(master_seed, condition, run)``, so results do not depend on the number of
worker processes.
"""

from __future__ import annotations

import csv
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CtsidError, SpecInvalid
from .estimator import EstimatorConfig, ModelOrder, initialize, pack, param_names, srivc, srivc_c
from .lti import TransferFunction
from .polynomial import Polynomial
from .signals import (
    IrregularUniform,
    Multisine,
    NoiseModel,
    Regular,
    generate_dataset,
    generate_grid,
    rng_stream,
    sample,
)

__all__ = [
    "ESTIMATORS",
    "Condition",
    "ExperimentSpec",
    "RunRecord",
    "SummaryRow",
    "MonteCarloSummary",
    "run_experiment",
    "reference_system",
    "reference_input",
    "preset_fig1_fig2",
    "preset_table1",
    "preset_fig3",
    "PRESETS",
    "export_summary",
    "read_summary",
    "export_runs",
    "export_plot_csv",
]

log = logging.getLogger(__name__)

ESTIMATORS = ("srivc", "srivc-c")


@dataclass(frozen=True)
class Condition:
    N: int
    grid: Regular | IrregularUniform

    @property
    def label(self) -> str:
        if isinstance(self.grid, Regular):
            return f"N={self.N};h={self.grid.h:g}"
        return f"N={self.N};h_lb={self.grid.h_lb:g};h_hb={self.grid.h_hb:g}"


@dataclass(frozen=True)
class ExperimentSpec:
    system: TransferFunction
    input: Multisine
    n_values: tuple[int, ...]
    grids: tuple[Regular | IrregularUniform, ...]
    noise_variance: float = 0.1
    runs: int = 300
    master_seed: int = 0
    estimators: tuple[str, ...] = ESTIMATORS
    config: EstimatorConfig = EstimatorConfig()
    order: ModelOrder | None = None
    name: str = "custom"

    @property
    def model_order(self) -> ModelOrder:
        if self.order is not None:
            return self.order
        return ModelOrder(self.system.den.degree, self.system.num.degree)

    @property
    def true_theta(self) -> np.ndarray:
        o = self.model_order
        return pack(self.system.den, self.system.num, o)

    @property
    def conditions(self) -> list[Condition]:
        return [Condition(int(N), g) for N in self.n_values for g in self.grids]

    def validate(self) -> None:
        if self.runs < 1:
            raise SpecInvalid("runs must be at least 1")
        if not self.n_values or not self.grids:
            raise SpecInvalid("need at least one sample size and one grid")
        if any(int(N) < 5 * self.model_order.n_params for N in self.n_values):
            raise SpecInvalid("sample sizes too small for the model order")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise SpecInvalid(f"unknown estimators {sorted(bad)}")
        if self.noise_variance < 0:
            raise SpecInvalid("noise variance must be non-negative")
        for g in self.grids:
            if isinstance(g, Regular):
                ok = g.h > 0
            elif isinstance(g, IrregularUniform):
                ok = 0 < g.h_lb <= g.h_hb
            else:
                ok = False
            if not ok:
                raise SpecInvalid(f"invalid grid {g!r}")


@dataclass(frozen=True)
class RunRecord:
    condition: int
    run: int
    estimator: str
    converged: bool
    iterations: int
    theta: np.ndarray | None
    error: str | None = None


@dataclass(frozen=True)
class SummaryRow:
    estimator: str
    condition: str
    param: str
    true_value: float
    mean: float
    mse: float
    std: float
    runs: int
    divergences: int


@dataclass
class MonteCarloSummary:
    rows: list[SummaryRow] = field(default_factory=list)
    records: list[RunRecord] = field(default_factory=list)

    def get(self, estimator: str, condition: str, param: str) -> SummaryRow:
        for r in self.rows:
            if (r.estimator, r.condition, r.param) == (estimator, condition, param):
                return r
        raise KeyError((estimator, condition, param))

    def table(self, stat: str = "mean") -> dict:
        """``{(estimator, condition): {param: stat}}``"""
        out: dict = {}
        for r in self.rows:
            out.setdefault((r.estimator, r.condition), {})[r.param] = getattr(r, stat)
        return out

    def non_converged(self, estimator: str) -> int:
        return sum(1 for r in self.records if r.estimator == estimator and r.theta is not None and not r.converged)


def reference_system() -> TransferFunction:
    return TransferFunction(Polynomial([1.25]), Polynomial([1.0, 0.7, 0.25]))


def reference_input() -> Multisine:
    return Multisine.from_sines([1.0, 1.0, 1.0], [0.714, 1.428, 2.142])


def log_spaced_sizes(lo: int, hi: int, count: int) -> tuple[int, ...]:
    vals = np.round(np.logspace(np.log10(lo), np.log10(hi), count)).astype(int)
    return tuple(int(v) for v in dict.fromkeys(vals.tolist()))


def preset_fig1_fig2(runs: int = 300, master_seed: int = 0) -> ExperimentSpec:
    return ExperimentSpec(
        reference_system(),
        reference_input(),
        log_spaced_sizes(100, 25500, 60),
        (Regular(0.3),),
        noise_variance=0.1,
        runs=runs,
        master_seed=master_seed,
        name="fig1",
    )


def preset_table1(runs: int = 300, master_seed: int = 0) -> ExperimentSpec:
    return ExperimentSpec(
        reference_system(),
        reference_input(),
        (2000,),
        (Regular(0.06), Regular(0.2), Regular(0.6)),
        noise_variance=0.1,
        runs=runs,
        master_seed=master_seed,
        name="table1",
    )


def preset_fig3(runs: int = 300, master_seed: int = 0) -> ExperimentSpec:
    return ExperimentSpec(
        reference_system(),
        reference_input(),
        (2000,),
        tuple(IrregularUniform(0.05, hb) for hb in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)),
        noise_variance=0.1,
        runs=runs,
        master_seed=master_seed,
        name="fig3",
    )


PRESETS = {
    "fig1": preset_fig1_fig2,
    "fig2": preset_fig1_fig2,
    "table1": preset_table1,
    "fig3": preset_fig3,
}


def _run_cell(spec: ExperimentSpec, cond_idx: int, run: int) -> list[RunRecord]:
    cond = spec.conditions[cond_idx]
    order = spec.model_order
    cfg = spec.config
    rng = rng_stream(spec.master_seed, cond_idx, run)
    grid = generate_grid(cond.grid, cond.N, rng=rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        u_ct, y = generate_dataset(spec.system, spec.input, grid, NoiseModel(spec.noise_variance), rng=rng)
    u = sample(u_ct, grid.times)
    out = []
    try:
        theta1 = initialize(u, y, order, cutoff=u_ct.max_frequency or None, cfg=cfg)
    except (CtsidError, np.linalg.LinAlgError) as exc:
        return [RunRecord(cond_idx, run, est, False, 0, None, f"init: {exc}") for est in spec.estimators]
    for est in spec.estimators:
        try:
            if est == "srivc":
                res = srivc(u, y, order, theta1, cfg)
            else:
                res = srivc_c(u_ct, y, order, theta1, cfg)
        except (CtsidError, np.linalg.LinAlgError) as exc:
            out.append(RunRecord(cond_idx, run, est, False, 0, None, str(exc)))
            continue
        out.append(RunRecord(cond_idx, run, est, res.converged, res.n_iterations, res.theta))
    return out


def _run_block(spec: ExperimentSpec, cells) -> list[RunRecord]:
    out = []
    for c, r in cells:
        out.extend(_run_cell(spec, c, r))
    return out


def run_experiment(spec: ExperimentSpec, jobs: int | None = None, progress=None) -> MonteCarloSummary:
    """Run every ``(condition, run)`` cell and aggregate per estimator, condition and parameter.

    Runs that hit the iteration cap are kept in the statistics; runs that
    raise are excluded and counted as divergences.
    """
    spec.validate()
    conds = spec.conditions
    cells = [(c, r) for c in range(len(conds)) for r in range(spec.runs)]
    jobs = (os.cpu_count() or 1) if jobs is None else max(1, int(jobs))
    records: list[RunRecord] = []
    if jobs == 1:
        for k, (c, r) in enumerate(cells):
            records.extend(_run_cell(spec, c, r))
            if progress is not None:
                progress(k + 1, len(cells))
    else:
        blocks = [cells[i::jobs * 4] for i in range(jobs * 4)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for recs in pool.map(_run_block, [spec] * len(blocks), blocks):
                records.extend(recs)
    est_rank = {e: i for i, e in enumerate(spec.estimators)}
    records.sort(key=lambda rec: (est_rank[rec.estimator], rec.condition, rec.run))
    return MonteCarloSummary(_aggregate(spec, records), records)


def _aggregate(spec: ExperimentSpec, records: list[RunRecord]) -> list[SummaryRow]:
    names = param_names(spec.model_order)
    truth = spec.true_theta
    conds = spec.conditions
    rows = []
    for est in spec.estimators:
        for c, cond in enumerate(conds):
            recs = [r for r in records if r.estimator == est and r.condition == c]
            good = [r.theta for r in recs if r.theta is not None]
            div = len(recs) - len(good)
            th = np.array(good).reshape(len(good), len(names))
            for k, name in enumerate(names):
                col = th[:, k]
                if col.size:
                    mean = float(np.sum(col) / col.size)
                    mse = float(np.sum((col - truth[k]) ** 2) / col.size)
                    std = float(np.std(col, ddof=1)) if col.size > 1 else 0.0
                else:
                    mean = mse = std = float("nan")
                rows.append(SummaryRow(est, cond.label, name, float(truth[k]), mean, mse, std, int(col.size), div))
    return rows


SUMMARY_HEADER = ["estimator", "condition", "param", "true_value", "mean", "mse", "std", "runs", "divergences"]


def export_summary(summary: MonteCarloSummary, path) -> None:
    """CSV summary, one row per (estimator, condition, parameter) in run order."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in summary.rows:
            w.writerow([
                r.estimator, r.condition, r.param,
                f"{r.true_value:.17g}", f"{r.mean:.17g}", f"{r.mse:.17g}", f"{r.std:.17g}",
                r.runs, r.divergences,
            ])


def read_summary(path) -> MonteCarloSummary:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SUMMARY_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        rows = [
            SummaryRow(
                d["estimator"], d["condition"], d["param"],
                float(d["true_value"]), float(d["mean"]), float(d["mse"]), float(d["std"]),
                int(d["runs"]), int(d["divergences"]),
            )
            for d in reader
        ]
    return MonteCarloSummary(rows)


def export_runs(summary: MonteCarloSummary, spec: ExperimentSpec, path) -> None:
    """Raw per-run estimates: ``condition,run,estimator,converged,iters,<params>``."""
    names = param_names(spec.model_order)
    conds = spec.conditions
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["condition", "run", "estimator", "converged", "iters", *names])
        for r in summary.records:
            th = r.theta if r.theta is not None else [float("nan")] * len(names)
            w.writerow([conds[r.condition].label, r.run, r.estimator, int(r.converged), r.iterations,
                        *(f"{v:.17g}" for v in th)])


def export_plot_csv(summary: MonteCarloSummary, spec: ExperimentSpec, path) -> None:
    """Long-format CSV keyed by the numeric condition axes (N, h or h bounds)."""
    by_label = {c.label: c for c in spec.conditions}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "N", "h", "h_lb", "h_hb", "param", "true_value", "mean", "mse", "std"])
        for r in summary.rows:
            c = by_label[r.condition]
            if isinstance(c.grid, Regular):
                h, lb, hb = c.grid.h, "", ""
            else:
                h, lb, hb = "", c.grid.h_lb, c.grid.h_hb
            w.writerow([r.estimator, c.N, h, lb, hb, r.param, f"{r.true_value:.17g}",
                        f"{r.mean:.17g}", f"{r.mse:.17g}", f"{r.std:.17g}"])


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    """Copy of ``spec`` with the non-``None`` keyword overrides applied."""
    return replace(spec, **{k: v for k, v in kw.items() if v is not None})
