"""End-to-end runs: prepare -> index sweep -> k selection -> engines ->
consensus -> characterisation, writing CSV/JSON artifacts."""
from __future__ import annotations

import csv
import io
import json
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .consensus import UNASSIGNED, adjusted_rand_index, build_consensus
from .datamodel import (
    DataError,
    Dataset,
    ImputationPlan,
    filter_attributes,
    impute,
    load_dataset,
    missingness_profile,
    read_schema,
    subset_by_tnm,
)
from .engines import distance_matrix, prepare_matrix, run_engine
from .reporting import (
    attribute_deviation,
    single_attribute_predictor,
    survival_by_group,
    sweep_attributes,
    sweep_patients,
    truth_table,
)
from .selection import aggregate, rank_candidates
from .validity import FRIEDMAN, index_sweep, optimal_k

REPORT_SCHEMA = "cohortclust.run-report/1"


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        self.stage = stage
        super().__init__(f"[{stage}] {exc}")


def _stage(name: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (DataError, ConfigError):
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage tag
        raise StageError(name, exc) from exc


# -- serialisation helpers -----------------------------------------------------


def csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


class OutputDir:
    """Collects files in a scratch directory and moves them into place on commit.

    Nothing appears at ``path`` unless the run completes.
    """

    def __init__(self, path: str | Path, force: bool = False):
        self.path = Path(path)
        if not str(path):
            raise ConfigError("no output directory given")
        if self.path.exists() and not force:
            raise ConfigError(f"output directory {self.path} exists; pass --force to overwrite")
        self.force = force
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.path.name}.", dir=self.path.parent))

    def write(self, name: str, text: str):
        (self.tmp / name).write_text(text, encoding="utf-8")

    def commit(self):
        if self.path.exists():
            shutil.rmtree(self.path)
        self.tmp.rename(self.path)

    def abort(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        else:
            self.abort()
        return False


# -- loading -----------------------------------------------------------------


def load_from_config(cfg: RunConfig) -> Dataset:
    try:
        schema = read_schema(Path(cfg.schema).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read schema: {exc}") from None
    except DataError as exc:
        raise DataError(f"{cfg.schema}: {exc}") from None
    try:
        with open(cfg.input, newline="", encoding="utf-8") as fh:
            return load_dataset(fh, schema, delimiter=cfg.delimiter, missing_tokens=cfg.missing_tokens)
    except OSError as exc:
        raise DataError(f"cannot read input: {exc}") from None
    except DataError as exc:
        raise DataError(f"{cfg.input}: {exc}") from None


def load_truth(path: str) -> dict[str, int]:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise DataError(f"{path}: expected a 'patient_id,label' header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out[row[0].strip()] = int(row[1])
            except (IndexError, ValueError):
                raise DataError(f"{path}: line {lineno}: bad truth row {row!r}") from None
    return out


def truth_rows(ids, labels) -> list[list]:
    return [["patient_id", "label"], *[[p, int(v)] for p, v in zip(ids, labels)]]


def prepare_cohort(d: Dataset, cfg: RunConfig) -> Dataset:
    """TNM subset and attribute filtering (still unimputed)."""
    if cfg.tnm_stages:
        d = subset_by_tnm(d, cfg.tnm_stages, cfg.tnm_attribute)
        if d.n_patients == 0:
            raise DataError(f"no patient has a TNM stage in {list(cfg.tnm_stages)}")
    return filter_attributes(d, cfg.max_missing, cfg.corr_threshold, cfg.drop_list)


def _optional_column(d: Dataset, name: str):
    try:
        return d.column(name)
    except KeyError:
        return None


# -- pipeline ------------------------------------------------------------------


@dataclass
class PipelineResult:
    report: dict
    files: dict[str, str]


def run_pipeline(cfg: RunConfig, raw: Dataset | None = None) -> PipelineResult:
    cfg.validate(need_input=raw is None)
    if raw is None:
        raw = load_from_config(cfg)
    files: dict[str, str] = {}
    report: dict[str, Any] = {"schema": REPORT_SCHEMA, "version": __version__, "config": cfg.resolved()}

    profile = missingness_profile(raw)
    report["input"] = {"n_patients": raw.n_patients, "n_attributes": raw.n_attributes,
                       "missing_fraction": profile.overall_fraction}

    cohort = _stage("prepare", prepare_cohort, raw, cfg)
    cohort_profile = missingness_profile(cohort)
    plan = _stage("prepare", ImputationPlan.parse, cfg.imputation, cohort.specs)
    imputed = _stage("impute", impute, cohort, plan)
    x = _stage("prepare", prepare_matrix, imputed)
    report["cohort"] = {
        "n_patients": cohort.n_patients,
        "attributes": cohort.names,
        "matrix_columns": list(x.columns),
        "missing_fraction": cohort_profile.overall_fraction,
        "imputation": dict(plan.strategies),
        "warnings": list(x.warnings),
    }
    if cfg.k_max >= x.n:
        raise StageError("sweep", ValueError(f"k_max={cfg.k_max} needs more than {x.n} patients"))

    dmat = distance_matrix(x)
    table = _stage("sweep", index_sweep, x, cfg.sweep_range, seed=cfg.seed,
                   params=cfg.engine_params, dmat=dmat)
    per_index = {}
    for name, vals in table.scores.items():
        try:
            per_index[name] = optimal_k(table.ks, vals, table.rules[name], cfg.diff_mode)
        except ValueError:
            per_index[name] = None
    report["index_table"] = table.to_dict()
    report["optimal_k_per_index"] = per_index
    files["index_table.csv"] = csv_text(table.to_rows())

    agg_table = table.restrict(*cfg.agg_range)
    ranks = _stage("select", rank_candidates, agg_table, cfg.diff_mode)
    sel_all = _stage("select", aggregate, ranks, agg_table.ks)
    sel_nof = _stage("select", aggregate, ranks, agg_table.ks, (FRIEDMAN,))
    chosen = sel_all.chosen_k
    report["selection"] = {"with_friedman": sel_all.to_dict(), "without_friedman": sel_nof.to_dict(),
                           "ranks": {n: list(r) for n, r in ranks.items()}}
    report["chosen_k"] = chosen
    files["selection_with_friedman.csv"] = csv_text(sel_all.to_rows())
    files["selection_without_friedman.csv"] = csv_text(sel_nof.to_rows())

    partitions = {}
    for i, name in enumerate(cfg.engines):
        partitions[name] = _stage(f"engine:{name}", run_engine, name, x, chosen, [cfg.seed, 1000 + i],
                                  cfg.engine_params, dmat)
    cons = _stage("consensus", build_consensus, partitions, cfg.reference, cfg.threshold)
    ids = imputed.patient_ids
    report["engines"] = {n: {"objective": p.objective, "sizes": [int(s) for s in p.sizes()]}
                         for n, p in partitions.items()}
    report["consensus"] = {
        "reference": cons.reference,
        "threshold": cons.threshold,
        "unassigned_count": int(cons.unassigned.sum()),
        "unassigned_fraction": cons.unassigned_fraction,
        "pairwise_ari": {f"{a}~{b}": adjusted_rand_index(partitions[a], partitions[b])
                         for i, a in enumerate(cons.engines) for b in cons.engines[i + 1:]},
    }
    files["partitions.csv"] = csv_text(
        [["patient_id", *cons.engines]]
        + [[pid, *[int(cons.aligned[e].labels[i]) for e in cons.engines]] for i, pid in enumerate(ids)]
    )
    files["consensus.csv"] = csv_text(
        [["patient_id", "label", "agreement"]]
        + [[pid, int(cons.labels[i]), int(cons.agreement[i])] for i, pid in enumerate(ids)]
    )
    files["consensus.json"] = json_text(cons.to_dict(ids))
    if cfg.coassignment:
        files["coassignment.csv"] = csv_text(
            [["patient_id", *ids]] + [[pid, *[round(float(v), 6) for v in row]] for pid, row in zip(ids, cons.coassignment)]
        )

    if cfg.truth:
        truth = _stage("truth", load_truth, cfg.truth)
        missing = [p for p in ids if p not in truth]
        if missing:
            raise StageError("truth", ValueError(f"{len(missing)} patients lack a truth label, e.g. {missing[0]!r}"))
        t = np.array([truth[p] for p in ids])
        assigned = ~cons.unassigned
        report["truth"] = {
            "consensus_ari": adjusted_rand_index(cons.labels[assigned], t[assigned]) if assigned.any() else None,
            "engine_ari": {n: adjusted_rand_index(p, t) for n, p in partitions.items()},
        }

    # characterisation
    groups = cons.labels.copy()
    if cfg.include_unassigned:
        group_mask = np.ones(groups.size, dtype=bool)
    else:
        group_mask = groups != UNASSIGNED
    chars: dict[str, Any] = {"include_unassigned": cfg.include_unassigned}
    tnm = _optional_column(imputed, cfg.tnm_attribute)
    surv = _optional_column(imputed, cfg.survival_attribute)
    if tnm is not None and group_mask.any():
        tt = _stage("report", truth_table, groups[group_mask], tnm[group_mask])
        chars["truth_table"] = tt.to_dict()
        files["truth_table.csv"] = csv_text(tt.to_rows())
    if surv is not None and group_mask.any():
        ss = _stage("report", survival_by_group, [int(g) for g in groups[group_mask]], surv[group_mask])
        chars["survival_by_cluster"] = ss.to_dict()
        files["survival_by_cluster.csv"] = csv_text(ss.to_rows())
        if tnm is not None:
            known = ~np.isnan(tnm)
            st = _stage("report", survival_by_group, [int(v) for v in tnm[known]], surv[known])
            chars["survival_by_tnm"] = st.to_dict()
    if group_mask.any():
        dev = _stage("report", attribute_deviation, imputed, np.where(group_mask, groups, UNASSIGNED))
        chars["deviation"] = dev.to_dict()
        files["deviation.csv"] = csv_text(dev.to_rows())
    if tnm is not None and np.unique(tnm[~np.isnan(tnm)]).size == 2:
        preds = {}
        for j, s in enumerate(cohort.specs):
            if s.clusterable and s.kind != "categorical":
                col = np.where(cohort.missing[:, j], np.nan, cohort.values[:, j])
                preds[s.name] = single_attribute_predictor(col, tnm)
        chars["single_attribute_accuracy"] = preds
    report["characterisation"] = chars
    files["run_report.json"] = json_text(_clean(report))
    return PipelineResult(report, files)


def _clean(obj):
    """Make a report JSON-safe: numpy scalars to python, non-finite floats to markers."""
    from .validity import marker

    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return marker(float(obj))
    return obj


def run_sweep(cfg: RunConfig, mode: str, raw: Dataset | None = None):
    cfg.validate(need_input=raw is None)
    if mode not in ("patients", "attributes"):
        raise ConfigError(f"unknown sweep mode {mode!r}")
    if raw is None:
        raw = load_from_config(cfg)
    cohort = _stage("prepare", prepare_cohort, raw, cfg)
    if mode == "patients":
        return _stage("sweep", sweep_patients, cohort, cfg.sweep_step, cfg)
    return _stage("sweep", sweep_attributes, cohort, cfg)
