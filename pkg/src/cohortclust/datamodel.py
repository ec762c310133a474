"""Cohort tables: ingestion, missingness profiling, imputation and filtering.

A :class:`Dataset` is immutable. Missing cells are tracked by an explicit
boolean mask; the corresponding entries of ``values`` hold NaN so that any
arithmetic that ignores the mask fails loudly instead of silently.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

KINDS = ("binary", "continuous", "categorical")
ROLES = ("marker", "clinical", "outcome", "identifier")
STRATEGIES = ("mean", "median", "mode")
DEFAULT_MISSING_TOKENS = ("", "NA")


class DataError(ValueError):
    """Malformed input table or schema. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str
    role: str = "marker"

    def __post_init__(self):
        if not self.name:
            raise DataError("attribute name must be non-empty")
        if self.kind not in KINDS:
            raise DataError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise DataError(f"attribute {self.name!r}: unknown role {self.role!r}")

    @property
    def clusterable(self) -> bool:
        return self.role in ("marker", "clinical")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Patients x attributes with an explicit missing-value mask."""

    specs: tuple[AttributeSpec, ...]
    values: np.ndarray
    missing: np.ndarray
    patient_ids: tuple[str, ...]

    def __post_init__(self):
        specs = tuple(self.specs)
        values = np.array(self.values, dtype=np.float64)
        missing = np.array(self.missing, dtype=bool)
        ids = tuple(str(p) for p in self.patient_ids)
        if values.ndim != 2 or values.shape != missing.shape:
            raise DataError("values and missing mask must be matching 2-D arrays")
        if values.shape[1] != len(specs) or len(specs) < 1:
            raise DataError("need one spec per column and at least one attribute")
        if values.shape[0] != len(ids):
            raise DataError("need one patient id per row")
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise DataError("attribute names must be unique")
        if len(set(ids)) != len(ids):
            raise DataError("patient ids must be unique")
        values[missing] = np.nan
        if np.isnan(values[~missing]).any():
            raise DataError("NaN in a cell not flagged missing")
        for j, s in enumerate(specs):
            if s.kind == "binary":
                col = values[~missing[:, j], j]
                if not np.isin(col, (0.0, 1.0)).all():
                    raise DataError(f"binary attribute {s.name!r} has values outside {{0,1}}")
        values.flags.writeable = False
        missing.flags.writeable = False
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "patient_ids", ids)

    @property
    def n_patients(self) -> int:
        return self.values.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.values.shape[1]

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    def index(self, name: str) -> int:
        for j, s in enumerate(self.specs):
            if s.name == name:
                return j
        raise KeyError(name)

    def spec(self, name: str) -> AttributeSpec:
        return self.specs[self.index(name)]

    def column(self, name: str) -> np.ndarray:
        """Copy of a column; missing cells are NaN."""
        return self.values[:, self.index(name)].copy()

    def take_rows(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.specs,
            self.values[rows],
            self.missing[rows],
            tuple(self.patient_ids[i] for i in rows),
        )

    def take_columns(self, cols: Sequence[int]) -> "Dataset":
        cols = list(cols)
        return Dataset(
            tuple(self.specs[j] for j in cols),
            self.values[:, cols],
            self.missing[:, cols],
            self.patient_ids,
        )

    def equals(self, other: "Dataset") -> bool:
        return (
            self.specs == other.specs
            and self.patient_ids == other.patient_ids
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


# -- schema and table ingestion ------------------------------------------------


def read_schema(source: TextIO | str) -> list[AttributeSpec]:
    """Parse a schema sidecar: one ``name kind role`` line per attribute.

    Fields may be separated by commas or whitespace; ``#`` starts a comment.
    The role defaults to ``marker``.
    """
    text = source if isinstance(source, str) else source.read()
    specs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p for p in line.replace(",", " ").split() if p]
        if len(parts) not in (2, 3):
            raise DataError(f"expected 'name kind [role]', got {raw!r}", lineno)
        try:
            specs.append(AttributeSpec(*parts))
        except DataError as exc:
            raise DataError(str(exc), lineno) from None
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise DataError("duplicate attribute name in schema")
    if sum(s.role == "identifier" for s in specs) > 1:
        raise DataError("at most one identifier attribute is supported")
    return specs


def write_schema(specs: Iterable[AttributeSpec]) -> str:
    lines = ["# name kind role"]
    lines += [f"{s.name} {s.kind} {s.role}" for s in specs]
    return "\n".join(lines) + "\n"


def load_dataset(
    source: TextIO | str,
    schema: Sequence[AttributeSpec],
    delimiter: str = ",",
    missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS,
) -> Dataset:
    """Read a delimited table whose header matches ``schema`` exactly.

    The identifier-role column (if any) becomes ``patient_ids`` and is not
    stored as an attribute; without one, ids are 1-based row numbers.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    tokens = {t.strip() for t in missing_tokens}
    reader = csv.reader(source, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty input", 1) from None
    header = [h.strip() for h in header]
    expected = [s.name for s in schema]
    if header != expected:
        raise DataError(f"header {header} does not match schema {expected}", 1)

    id_col = next((j for j, s in enumerate(schema) if s.role == "identifier"), None)
    keep = [j for j in range(len(schema)) if j != id_col]
    specs = tuple(schema[j] for j in keep)
    if not specs:
        raise DataError("schema has no non-identifier attributes")

    rows, mask, ids, seen = [], [], [], {}
    for lineno, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(schema):
            raise DataError(f"expected {len(schema)} cells, found {len(raw)}", lineno)
        row, mrow = [], []
        for j in keep:
            cell = raw[j].strip()
            if cell in tokens:
                row.append(np.nan)
                mrow.append(True)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"non-numeric cell {cell!r} in column {schema[j].name!r}", lineno) from None
            if not np.isfinite(v):
                raise DataError(f"non-finite cell {cell!r} in column {schema[j].name!r}", lineno)
            if schema[j].kind == "binary" and v not in (0.0, 1.0):
                raise DataError(f"binary column {schema[j].name!r} has value {cell!r}", lineno)
            row.append(v)
            mrow.append(False)
        pid = raw[id_col].strip() if id_col is not None else str(len(rows) + 1)
        if pid in seen:
            raise DataError(f"duplicate patient id {pid!r} (first on line {seen[pid]})", lineno)
        seen[pid] = lineno
        ids.append(pid)
        rows.append(row)
        mask.append(mrow)

    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(specs))
    missing = np.array(mask, dtype=bool).reshape(len(rows), len(specs))
    return Dataset(specs, values, missing, tuple(ids))


def _fmt(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def dump_dataset(d: Dataset, delimiter: str = ",", missing_token: str = "", id_name: str | None = "patient_id") -> str:
    """Inverse of :func:`load_dataset`; emits the id column first when ``id_name`` is set."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    head = ([id_name] if id_name else []) + d.names
    w.writerow(head)
    for i in range(d.n_patients):
        cells = [missing_token if d.missing[i, j] else _fmt(d.values[i, j]) for j in range(d.n_attributes)]
        w.writerow(([d.patient_ids[i]] if id_name else []) + cells)
    return buf.getvalue()


# -- profiling ----------------------------------------------------------------


@dataclass(frozen=True)
class MissingnessReport:
    overall_fraction: float
    per_attribute: dict[str, float]
    per_patient: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "overall_fraction": self.overall_fraction,
            "per_attribute": dict(self.per_attribute),
            "per_patient": dict(self.per_patient),
        }


def missingness_profile(d: Dataset) -> MissingnessReport:
    m = d.missing
    cells = m.size
    overall = float(m.sum() / cells) if cells else 0.0
    per_attr = m.mean(axis=0) if d.n_patients else np.zeros(d.n_attributes)
    per_pat = m.mean(axis=1) if d.n_patients else np.zeros(0)
    return MissingnessReport(
        overall,
        {n: float(f) for n, f in zip(d.names, per_attr)},
        {p: float(f) for p, f in zip(d.patient_ids, per_pat)},
    )


# -- imputation ---------------------------------------------------------------


@dataclass(frozen=True)
class ImputationPlan:
    strategies: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name, s in self.strategies.items():
            if s not in STRATEGIES:
                raise DataError(f"unknown imputation strategy {s!r} for {name!r}")

    @classmethod
    def default(cls, specs: Iterable[AttributeSpec], continuous: str = "median") -> "ImputationPlan":
        """Mode for binary/categorical attributes, ``continuous`` otherwise.

        Outcome attributes are left out: missing outcomes are excluded from
        summaries rather than filled in.
        """
        return cls({s.name: ("mode" if s.kind != "continuous" else continuous) for s in specs if s.role != "outcome"})

    @classmethod
    def all_mode(cls, specs: Iterable[AttributeSpec]) -> "ImputationPlan":
        return cls({s.name: "mode" for s in specs if s.role != "outcome"})

    @classmethod
    def parse(cls, text: str, specs: Sequence[AttributeSpec]) -> "ImputationPlan":
        """``auto`` | ``mode`` | ``auto,name:strategy,...`` style overrides."""
        items = [t.strip() for t in text.split(",") if t.strip()]
        base = "auto"
        if items and ":" not in items[0]:
            base = items.pop(0)
        if base == "auto":
            plan = dict(cls.default(specs).strategies)
        elif base == "mode":
            plan = dict(cls.all_mode(specs).strategies)
        elif base in ("mean", "median"):
            plan = dict(cls.default(specs, continuous=base).strategies)
        else:
            raise DataError(f"unknown imputation base {base!r}")
        for item in items:
            name, _, strat = item.partition(":")
            plan[name.strip()] = strat.strip()
        return cls(plan)


def _mode(col: np.ndarray) -> float:
    vals, counts = np.unique(col, return_counts=True)
    return float(vals[np.argmax(counts)])  # unique() sorts, argmax takes the first: tie -> smaller


def impute(d: Dataset, plan: ImputationPlan) -> Dataset:
    """Fill missing cells of every attribute named in ``plan``.

    Attributes absent from the plan are returned untouched.
    """
    values = d.values.copy()
    missing = d.missing.copy()
    for name, strategy in plan.strategies.items():
        try:
            j = d.index(name)
        except KeyError:
            raise DataError(f"imputation plan names unknown attribute {name!r}") from None
        spec = d.specs[j]
        if spec.kind != "continuous" and strategy != "mode":
            raise DataError(f"{strategy} imputation is not allowed for {spec.kind} attribute {name!r}")
        m = missing[:, j]
        if not m.any():
            continue
        present = values[~m, j]
        if present.size == 0:
            raise DataError(f"attribute {name!r} is entirely missing")
        if strategy == "mean":
            fill = float(np.mean(present))
        elif strategy == "median":
            fill = float(np.median(present))
        else:
            fill = _mode(present)
        values[m, j] = fill
        missing[:, j] = False
    return Dataset(d.specs, values, missing, d.patient_ids)


# -- filtering ----------------------------------------------------------------


def pearson_joint(a: np.ndarray, ma: np.ndarray, b: np.ndarray, mb: np.ndarray) -> float | None:
    """Pearson r over rows where both are present; None if undefined."""
    both = ~ma & ~mb
    if both.sum() < 2:
        return None
    x, y = a[both], b[both]
    x = x - x.mean()
    y = y - y.mean()
    den = np.sqrt(np.dot(x, x) * np.dot(y, y))
    if den == 0:
        return None
    return float(np.dot(x, y) / den)


def filter_attributes(
    d: Dataset,
    max_missing: float = 1.0,
    corr_threshold: float = 1.0,
    drop_list: Iterable[str] = (),
) -> Dataset:
    """Drop listed, too-sparse and redundant attributes; order is preserved.

    Correlated pairs are visited in column order ``(i, j)``, ``i < j``;
    of a pair with ``|r| >= corr_threshold`` the member with more missing
    cells goes (the later column on a tie). Categorical attributes take no
    part in the correlation pass; outcome and identifier roles are never
    removed.
    """
    if not 0 < corr_threshold <= 1:
        raise DataError("corr_threshold must lie in (0, 1]")
    drop_list = list(drop_list)
    removed = set()
    for name in drop_list:
        try:
            j = d.index(name)
        except KeyError:
            raise DataError(f"drop_list names unknown attribute {name!r}") from None
        if not d.specs[j].clusterable:
            raise DataError(f"cannot drop {d.specs[j].role} attribute {name!r}")
        removed.add(j)

    frac = d.missing.mean(axis=0) if d.n_patients else np.zeros(d.n_attributes)
    for j, s in enumerate(d.specs):
        if s.clusterable and frac[j] > max_missing:
            removed.add(j)

    counts = d.missing.sum(axis=0)
    cand = [j for j, s in enumerate(d.specs) if s.clusterable and s.kind != "categorical" and j not in removed]
    for a_pos, i in enumerate(cand):
        if i in removed:
            continue
        for j in cand[a_pos + 1:]:
            if j in removed:
                continue
            r = pearson_joint(d.values[:, i], d.missing[:, i], d.values[:, j], d.missing[:, j])
            if r is None or abs(r) < corr_threshold - 1e-12:
                continue
            loser = i if counts[i] > counts[j] else j
            removed.add(loser)
            if loser == i:
                break
    keep = [j for j in range(d.n_attributes) if j not in removed]
    if not keep:
        raise DataError("filtering removed every attribute")
    return d.take_columns(keep)


def missing_counts(d: Dataset) -> np.ndarray:
    return d.missing.sum(axis=1)


def patient_drop_order(d: Dataset) -> np.ndarray:
    """Row indices from most to least expendable (most missing first; later rows first on ties)."""
    keep_order = np.argsort(missing_counts(d), kind="stable")
    return keep_order[::-1]


def drop_patients_by_missingness(d: Dataset, keep: int) -> Dataset:
    """Keep the ``keep`` least-missing patients in their original order."""
    if not 1 <= keep <= d.n_patients:
        raise DataError(f"keep must lie in [1, {d.n_patients}], got {keep}")
    order = np.argsort(missing_counts(d), kind="stable")[:keep]
    return d.take_rows(np.sort(order))


def subset_by_tnm(d: Dataset, stages: Iterable[int], tnm_attribute: str = "tnm") -> Dataset:
    try:
        col = d.column(tnm_attribute)
    except KeyError:
        raise DataError(f"dataset has no TNM attribute {tnm_attribute!r}") from None
    stages = [float(s) for s in stages]
    rows = np.flatnonzero(np.isin(col, stages))
    return d.take_rows(rows)
