"""End-to-end experiment orchestration: task -> prior/posterior learning ->
per-checkpoint risk estimation and bound evaluation -> report emission.

Every bound is evaluated with m equal to the held-out evaluation split size
(never the full source sample) and n equal to the unlabeled target sample
size. The input-space MMD does not depend on the hypothesis, so it is
computed once per (seed, alpha) and repeated across checkpoints.
"""

import csv
import io
import json
import os
import time
from dataclasses import dataclass, field

from .bounds import BOUND_NAMES, BoundInputs, ParamGrid, grid_search
from .divergences import MmdConfig, median_heuristic_bandwidths, mmd_estimate
from .nn import CheckpointSchedule, MlpArchitecture, TrainConfig
from .risks import RiskEstimates, estimate_risks, gibbs_risk, lambda_rho_oracle
from .seeding import derive_seed
from .stochastic import kl_isotropic, learn_prior_posterior, sample_posterior
from .tasks import TaskInstance, build_synthetic_task, load_task, spec_from_json

CSV_COLUMNS = [
    "seed",
    "alpha",
    "checkpoint_index",
    "seen_fraction",
    "bound_name",
    "bound_value",
    "param_json",
    "delta_effective",
    "gibbs_source_risk",
    "gibbs_weighted_risk",
    "disagreement_source",
    "disagreement_target",
    "joint_error_source",
    "kl",
    "mmd",
    "oracle_target_gibbs_risk",
    "oracle_used",
]


@dataclass
class ExperimentConfig:
    task: dict
    hidden: tuple = (16, 16)
    activation: str = "relu"
    alphas: tuple = (0.3,)
    sigma: float = 0.03
    delta: float = 0.05
    posterior_pairs: int = 5
    bounds: tuple = ("mcallester", "iw", "mmd")
    oracle_mode: bool = False
    grids: dict = field(default_factory=dict)
    mmd_bandwidths: tuple | None = None
    mmd_bandwidth_scales: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    mmd_shuffles: int = 10
    learning_rate: float = 3e-3
    momentum: float = 0.95
    batch_size: int = 128
    prior_epochs: int = 1
    posterior_epochs: int = 5
    seeds: tuple = (0, 1, 2, 3, 4)
    base_dir: str = "."

    def __post_init__(self):
        self.alphas = tuple(float(a) for a in (self.alphas if hasattr(self.alphas, "__iter__") else [self.alphas]))
        if any(not 0 <= a < 1 for a in self.alphas):
            raise ValueError("alpha values must lie in [0, 1)")
        self.bounds = tuple(self.bounds)
        unknown = set(self.bounds) - set(BOUND_NAMES)
        if unknown:
            raise ValueError(f"unknown bounds requested: {sorted(unknown)}")
        if "add" in self.bounds and not self.oracle_mode:
            raise ValueError("the add bound needs oracle_mode=true (it uses target labels)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.posterior_pairs < 1:
            raise ValueError("posterior_pairs must be >= 1")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ValueError("need at least one seed")
        self.grids = {
            name: (g if isinstance(g, ParamGrid) else ParamGrid(g))
            for name, g in self.grids.items()
        }

    @classmethod
    def from_json_dict(cls, doc: dict, base_dir: str = ".") -> "ExperimentConfig":
        arch = doc.get("arch", {})
        train = doc.get("train", {})
        mmd = doc.get("mmd", {})
        alphas = doc.get("alpha", 0.3)
        return cls(
            task=doc["task"],
            hidden=tuple(arch.get("hidden", (16, 16))),
            activation=arch.get("activation", "relu"),
            alphas=alphas if isinstance(alphas, list) else [alphas],
            sigma=doc.get("sigma", 0.03),
            delta=doc.get("delta", 0.05),
            posterior_pairs=doc.get("posterior_pairs", 5),
            bounds=tuple(doc.get("bounds", ("mcallester", "iw", "mmd"))),
            oracle_mode=doc.get("oracle_mode", False),
            grids=doc.get("grids", {}),
            mmd_bandwidths=tuple(mmd["bandwidths"]) if "bandwidths" in mmd else None,
            mmd_bandwidth_scales=tuple(mmd.get("bandwidth_scales", (0.25, 0.5, 1.0, 2.0, 4.0))),
            mmd_shuffles=mmd.get("shuffles", 10),
            learning_rate=train.get("learning_rate", 3e-3),
            momentum=train.get("momentum", 0.95),
            batch_size=train.get("batch_size", 128),
            prior_epochs=train.get("prior_epochs", 1),
            posterior_epochs=train.get("posterior_epochs", 5),
            seeds=tuple(doc.get("seeds", (0, 1, 2, 3, 4))),
            base_dir=base_dir,
        )

    def resolve_task(self) -> TaskInstance:
        kind = self.task.get("type")
        if kind == "synthetic":
            return build_synthetic_task(spec_from_json("synthetic", self.task["spec"]))
        if kind == "manifest":
            return load_task(os.path.join(self.base_dir, self.task["path"]))
        raise ValueError("task.type must be 'synthetic' or 'manifest'")


@dataclass
class ReportRow:
    seed: int
    alpha: float
    checkpoint_index: int
    seen_fraction: float
    bounds: dict  # name -> BoundResult
    estimates: RiskEstimates
    kl: float
    mmd: float
    oracle_target_gibbs_risk: float | None
    wall_time_s: float


@dataclass
class RunReport:
    rows: list


def run_experiment(cfg: ExperimentConfig, task: TaskInstance | None = None) -> RunReport:
    if task is None:
        task = cfg.resolve_task()
    if ("iw" in cfg.bounds or "mult" in cfg.bounds) and task.source.weights is None:
        raise ValueError("iw/mult bounds need a task with exact importance weights")
    arch = MlpArchitecture((task.source.dim, *cfg.hidden, 1), cfg.activation)
    rows = []
    for seed in cfg.seeds:
        for a_idx, alpha in enumerate(cfg.alphas):
            rows.extend(_run_one(cfg, task, arch, seed, a_idx, alpha))
    rows.sort(key=lambda r: (r.seed, r.alpha, r.checkpoint_index))
    return RunReport(rows=rows)


def _run_one(cfg: ExperimentConfig, task: TaskInstance, arch, seed: int, a_idx: int, alpha: float):
    cfg_prior = TrainConfig(
        learning_rate=cfg.learning_rate,
        momentum=cfg.momentum,
        batch_size=cfg.batch_size,
        epochs=cfg.prior_epochs,
        seed=derive_seed(seed, 1, a_idx),
    )
    cfg_post = TrainConfig(
        learning_rate=cfg.learning_rate,
        momentum=cfg.momentum,
        batch_size=cfg.batch_size,
        epochs=cfg.posterior_epochs,
        seed=derive_seed(seed, 2, a_idx),
    )
    pair = learn_prior_posterior(
        task.source, alpha, arch, cfg_prior, cfg_post, cfg.sigma,
        derive_seed(seed, 0, a_idx), CheckpointSchedule(),
    )
    eval_set = pair.eval_set
    target_x = task.target_x

    bandwidths = cfg.mmd_bandwidths or median_heuristic_bandwidths(
        eval_set.features, target_x.features, scales=cfg.mmd_bandwidth_scales
    )
    mmd_val = mmd_estimate(
        eval_set.features,
        target_x.features,
        MmdConfig(bandwidths, shuffles=cfg.mmd_shuffles, seed=derive_seed(seed, 3, a_idx)),
    )

    rows = []
    for ck_idx, (frac, posterior) in enumerate(pair.posterior_checkpoints):
        t0 = time.perf_counter()
        draws = sample_posterior(posterior, cfg.posterior_pairs, derive_seed(seed, 4, a_idx, ck_idx))
        est = estimate_risks(
            arch, draws, eval_set, target_x,
            target_oracle=task.target_labeled_oracle, oracle=cfg.oracle_mode,
        )
        kl = kl_isotropic(posterior, pair.prior)
        oracle_risk = None
        if task.target_labeled_oracle is not None:
            oracle_risk = gibbs_risk(arch, draws, task.target_labeled_oracle)[0]
        lam = None
        if cfg.oracle_mode:
            lam = lambda_rho_oracle(
                arch, draws, eval_set, task.target_labeled_oracle, oracle=True
            )
        inputs = BoundInputs(
            m_source=len(eval_set),
            n_target=len(target_x),
            kl=kl,
            delta=cfg.delta,
            estimates=est,
            beta_inf=task.beta_inf,
            mmd_value=mmd_val,
            kernel_bound=1.0,
            lambda_rho=lam,
            overlap=task.overlap,
        )
        results = {name: grid_search(name, inputs, cfg.grids.get(name)) for name in cfg.bounds}
        rows.append(
            ReportRow(
                seed=seed,
                alpha=alpha,
                checkpoint_index=ck_idx,
                seen_fraction=frac,
                bounds=results,
                estimates=est,
                kl=kl,
                mmd=mmd_val,
                oracle_target_gibbs_risk=oracle_risk,
                wall_time_s=time.perf_counter() - t0,
            )
        )
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_records(report: RunReport):
    for row in report.rows:
        est = row.estimates
        for name in sorted(row.bounds):
            res = row.bounds[name]
            yield [
                _fmt(row.seed),
                _fmt(row.alpha),
                _fmt(row.checkpoint_index),
                _fmt(row.seen_fraction),
                name,
                _fmt(res.value),
                json.dumps(res.params, sort_keys=True),
                _fmt(res.delta_effective),
                _fmt(est.gibbs_risk),
                _fmt(est.gibbs_weighted_risk),
                _fmt(est.disagreement_source),
                _fmt(est.disagreement_target),
                _fmt(est.joint_error_source),
                _fmt(row.kl),
                _fmt(row.mmd),
                _fmt(row.oracle_target_gibbs_risk),
                _fmt(res.oracle_used),
            ]


def _json_doc(report: RunReport) -> dict:
    rows = []
    for row in report.rows:
        est = row.estimates
        rows.append(
            {
                "seed": row.seed,
                "alpha": row.alpha,
                "checkpoint_index": row.checkpoint_index,
                "seen_fraction": row.seen_fraction,
                "kl": row.kl,
                "mmd": row.mmd,
                "oracle_target_gibbs_risk": row.oracle_target_gibbs_risk,
                "estimates": {
                    "gibbs_risk": est.gibbs_risk,
                    "gibbs_weighted_risk": est.gibbs_weighted_risk,
                    "disagreement_source": est.disagreement_source,
                    "disagreement_target": est.disagreement_target,
                    "joint_error_source": est.joint_error_source,
                    "joint_error_target": est.joint_error_target,
                    "mc_std": dict(sorted(est.mc_std.items())),
                },
                "bounds": [row.bounds[name].to_json_dict() for name in sorted(row.bounds)],
            }
        )
    return {"columns": CSV_COLUMNS, "rows": rows}


def emit(report: RunReport, format: str, path) -> None:
    """Write the report. Formats: csv (one line per bound per checkpoint,
    fixed column set) or json. Identical reports produce byte-identical
    files; wall times are deliberately not emitted."""
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for record in _csv_records(report):
            writer.writerow(record)
        data = buf.getvalue()
    elif format == "json":
        data = json.dumps(_json_doc(report), sort_keys=True, indent=1) + "\n"
    else:
        raise ValueError("format must be 'csv' or 'json'")
    with open(path, "w", newline="") as fh:
        fh.write(data)


def parse_report_csv(path) -> list:
    """Rows of an emitted CSV as dicts with numeric fields restored."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError("unexpected report columns")
        for rec in reader:
            out.append(
                {
                    **rec,
                    "seed": int(rec["seed"]),
                    "alpha": float(rec["alpha"]),
                    "checkpoint_index": int(rec["checkpoint_index"]),
                    "seen_fraction": float(rec["seen_fraction"]),
                    "bound_value": float(rec["bound_value"]),
                    "delta_effective": float(rec["delta_effective"]),
                    "kl": float(rec["kl"]),
                    "mmd": float(rec["mmd"]),
                    "oracle_target_gibbs_risk": (
                        float(rec["oracle_target_gibbs_risk"])
                        if rec["oracle_target_gibbs_risk"]
                        else None
                    ),
                    "oracle_used": rec["oracle_used"] == "true",
                }
            )
    return out


@dataclass
class SummaryRow:
    seed: int
    alpha: float
    bound: str
    min_value: float
    argmin_checkpoint: int
    oracle_risk_at_argmin: float | None
    best_oracle_risk: float | None


def report_summary(report: RunReport) -> list:
    """Per (seed, alpha, bound): the smallest bound over the training
    trajectory, where it occurred, the oracle target risk there, and the best
    oracle target risk any checkpoint achieved."""
    if not report.rows:
        raise ValueError("report is empty")
    groups: dict = {}
    for row in report.rows:
        groups.setdefault((row.seed, row.alpha), []).append(row)
    out = []
    for (seed, alpha), rows in sorted(groups.items()):
        oracle_risks = [r.oracle_target_gibbs_risk for r in rows]
        best_oracle = (
            min(v for v in oracle_risks if v is not None)
            if any(v is not None for v in oracle_risks)
            else None
        )
        for name in sorted(rows[0].bounds):
            best = min(rows, key=lambda r: r.bounds[name].value)
            out.append(
                SummaryRow(
                    seed=seed,
                    alpha=alpha,
                    bound=name,
                    min_value=best.bounds[name].value,
                    argmin_checkpoint=best.checkpoint_index,
                    oracle_risk_at_argmin=best.oracle_target_gibbs_risk,
                    best_oracle_risk=best_oracle,
                )
            )
    return out


def summary_from_csv_rows(records: list) -> list:
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec["seed"], rec["alpha"], rec["bound_name"]), []).append(rec)
    out = []
    for (seed, alpha, name), recs in sorted(groups.items()):
        best = min(recs, key=lambda r: r["bound_value"])
        oracle = [r["oracle_target_gibbs_risk"] for r in recs]
        out.append(
            SummaryRow(
                seed=seed,
                alpha=alpha,
                bound=name,
                min_value=best["bound_value"],
                argmin_checkpoint=best["checkpoint_index"],
                oracle_risk_at_argmin=best["oracle_target_gibbs_risk"],
                best_oracle_risk=(
                    min(v for v in oracle if v is not None)
                    if any(v is not None for v in oracle)
                    else None
                ),
            )
        )
    return out


def format_summary(rows: list) -> str:
    header = f"{'seed':>4} {'alpha':>6} {'bound':>10} {'min_bound':>12} {'at_ckpt':>8} {'oracle@min':>11} {'best_oracle':>12}"
    lines = [header]
    for r in rows:
        o1 = f"{r.oracle_risk_at_argmin:.4f}" if r.oracle_risk_at_argmin is not None else "-"
        o2 = f"{r.best_oracle_risk:.4f}" if r.best_oracle_risk is not None else "-"
        lines.append(
            f"{r.seed:>4} {r.alpha:>6.2f} {r.bound:>10} {r.min_value:>12.6f} "
            f"{r.argmin_checkpoint:>8} {o1:>11} {o2:>12}"
        )
    return "\n".join(lines)
