"""Claims-style cohort data model: loading, splitting, standardization.

A cohort couples a dense baseline covariate matrix with any number of sparse
claims "dimensions" (inpatient diagnoses, outpatient procedures, ...). Each
dimension stores patient-by-code occurrence counts for a baseline period;
zero counts are implicit.
"""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse


class CohortLoadError(Exception):
    """Raised when a cohort file is malformed or referentially inconsistent."""


@dataclass
class ClaimsDimension:
    """One class of claims activity: a code vocabulary plus sparse counts.

    ``counts`` is an N x len(codes) CSR matrix of nonnegative integers; all
    stored entries are >= 1 (zeros are implicit in the sparsity pattern).
    """

    name: str
    codes: list[str]
    counts: sparse.csr_matrix

    def __post_init__(self):
        if len(set(self.codes)) != len(self.codes):
            raise ValueError(f"duplicate codes in dimension {self.name!r}")
        self.counts = sparse.csr_matrix(self.counts)
        self.counts.eliminate_zeros()
        if self.counts.nnz and self.counts.data.min() < 1:
            raise ValueError(f"dimension {self.name!r} has stored counts < 1")
        if self.counts.shape[1] != len(self.codes):
            raise ValueError(f"dimension {self.name!r}: counts/vocabulary size mismatch")

    @property
    def n_codes(self) -> int:
        return len(self.codes)


@dataclass
class CohortDataset:
    """Patients with a binary treatment label, outcome label, dense baseline
    covariates, and sparse claims code counts grouped by dimension."""

    patient_ids: list[str]
    treatment: np.ndarray
    outcome: np.ndarray
    baseline: np.ndarray
    baseline_columns: list[str]
    dimensions: list[ClaimsDimension] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.patient_ids)
        self.treatment = np.asarray(self.treatment, dtype=np.int8)
        self.outcome = np.asarray(self.outcome, dtype=np.int8)
        self.baseline = np.asarray(self.baseline, dtype=float)
        for name, vec in (("treatment", self.treatment), ("outcome", self.outcome)):
            if vec.shape != (n,):
                raise ValueError(f"{name} length {vec.shape} != number of patients {n}")
            if not np.isin(vec, (0, 1)).all():
                raise ValueError(f"{name} must contain only 0/1")
        if self.baseline.shape[0] != n:
            raise ValueError("baseline row count != number of patients")
        if self.baseline.shape[1] != len(self.baseline_columns):
            raise ValueError("baseline column count != number of column names")
        if not np.isfinite(self.baseline).all():
            raise ValueError("baseline contains missing or non-finite values")
        for dim in self.dimensions:
            if dim.counts.shape[0] != n:
                raise ValueError(f"dimension {dim.name!r} row count != number of patients")

    @property
    def n_patients(self) -> int:
        return len(self.patient_ids)


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic 80/20 train/test split with a nested 90/10 LGO split of
    the training rows (LGO validation is used for tuning and ensemble
    weights)."""

    seed: int
    train_idx: np.ndarray
    test_idx: np.ndarray
    lgo_train_idx: np.ndarray
    lgo_val_idx: np.ndarray


def make_split(n: int, seed: int, test_frac: float = 0.20, lgo_frac: float = 0.10) -> SplitPlan:
    """Seeded uniform shuffle then prefix slicing.

    |test| = round(test_frac * n) and |lgo_val| = round(lgo_frac * |train|)
    (Python banker's rounding). Identical (n, seed) always reproduce the same
    index sets.
    """
    if n < 10:
        raise ValueError(f"n={n} too small to split (need n >= 10)")
    if not (0.0 < test_frac < 1.0 and 0.0 < lgo_frac < 1.0):
        raise ValueError("split fractions must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = round(test_frac * n)
    test = perm[:n_test]
    train = perm[n_test:]
    n_val = round(lgo_frac * train.size)
    lgo_val = train[:n_val]
    lgo_train = train[n_val:]
    return SplitPlan(
        seed=seed,
        train_idx=np.sort(train),
        test_idx=np.sort(test),
        lgo_train_idx=np.sort(lgo_train),
        lgo_val_idx=np.sort(lgo_val),
    )


@dataclass
class StandardizationParams:
    """Per-column center/scale computed on a designated fitting subset.

    Population (divide-by-n) standard deviation; constant columns get scale 1
    so standardized values are exactly 0 rather than NaN.
    """

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        return (np.asarray(matrix, dtype=float) - self.mean) / self.scale


def fit_standardizer(matrix: np.ndarray, fit_rows: Sequence[int]) -> StandardizationParams:
    """Compute mean/scale from ``fit_rows`` only (training data, never test)."""
    fit_rows = np.asarray(fit_rows, dtype=int)
    if fit_rows.size == 0:
        raise ValueError("fit_rows is empty")
    sub = np.asarray(matrix, dtype=float)[fit_rows]
    mean = sub.mean(axis=0)
    scale = sub.std(axis=0)
    scale = np.where(scale > 0.0, scale, 1.0)
    return StandardizationParams(mean=mean, scale=scale)


# ---------------------------------------------------------------------------
# File I/O. Baseline: header CSV with patient_id, treatment, outcome, then
# numeric covariates. Claims: header CSV of triples patient_id, dimension:code,
# count. Both transparently gzipped when the path ends in .gz.
# ---------------------------------------------------------------------------

CLAIMS_HEADER = ["patient_id", "code", "count"]


def _open_text(path: str | Path, mode: str = "rt"):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode, encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def load_cohort(baseline_path: str | Path, claims_path: str | Path) -> CohortDataset:
    """Load a cohort from a baseline CSV and a claims-triple CSV.

    Claims dimensions are discovered from the ``dimension:code`` prefixes;
    dimension names and code vocabularies are sorted for determinism. Rows
    referencing unknown patients, non-positive counts, duplicated
    (patient, code) pairs, and malformed lines are all rejected with the
    offending line number.
    """
    patient_ids: list[str] = []
    treatment: list[int] = []
    outcome: list[int] = []
    baseline_rows: list[list[float]] = []

    with _open_text(baseline_path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CohortLoadError(f"{baseline_path}: empty baseline file") from None
        if header[:3] != ["patient_id", "treatment", "outcome"]:
            raise CohortLoadError(
                f"{baseline_path}: header must start with patient_id,treatment,outcome "
                f"(got {header[:3]})"
            )
        covariate_names = header[3:]
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CohortLoadError(
                    f"{baseline_path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            pid = row[0]
            if pid in seen:
                raise CohortLoadError(f"{baseline_path}:{lineno}: duplicate patient_id {pid!r}")
            seen.add(pid)
            try:
                t, y = int(row[1]), int(row[2])
                covs = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise CohortLoadError(f"{baseline_path}:{lineno}: {exc}") from None
            if t not in (0, 1) or y not in (0, 1):
                raise CohortLoadError(
                    f"{baseline_path}:{lineno}: treatment/outcome must be 0 or 1"
                )
            if not all(np.isfinite(covs)):
                raise CohortLoadError(f"{baseline_path}:{lineno}: missing or non-finite covariate")
            patient_ids.append(pid)
            treatment.append(t)
            outcome.append(y)
            baseline_rows.append(covs)

    if not patient_ids:
        raise CohortLoadError(f"{baseline_path}: no patient rows")
    row_of = {pid: i for i, pid in enumerate(patient_ids)}

    # triples grouped by dimension: (row, code) -> count
    by_dim: dict[str, dict[tuple[int, str], int]] = {}
    with _open_text(claims_path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            header = None  # empty claims file: cohort with zero dimensions
        if header is not None and header != CLAIMS_HEADER:
            raise CohortLoadError(
                f"{claims_path}: header must be {','.join(CLAIMS_HEADER)} (got {header})"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise CohortLoadError(f"{claims_path}:{lineno}: expected 3 fields, got {len(row)}")
            pid, tagged_code, count_str = row
            if pid not in row_of:
                raise CohortLoadError(
                    f"{claims_path}:{lineno}: unknown patient_id {pid!r} not in baseline file"
                )
            if ":" not in tagged_code:
                raise CohortLoadError(
                    f"{claims_path}:{lineno}: code {tagged_code!r} lacks a dimension: prefix"
                )
            dim_name, code = tagged_code.split(":", 1)
            try:
                count = int(count_str)
            except ValueError:
                raise CohortLoadError(f"{claims_path}:{lineno}: count {count_str!r} not an integer") from None
            if count <= 0:
                raise CohortLoadError(f"{claims_path}:{lineno}: count must be >= 1, got {count}")
            cell = (row_of[pid], code)
            dim = by_dim.setdefault(dim_name, {})
            if cell in dim:
                raise CohortLoadError(
                    f"{claims_path}:{lineno}: duplicate entry for patient {pid!r}, "
                    f"code {tagged_code!r}"
                )
            dim[cell] = count

    n = len(patient_ids)
    dimensions = []
    for dim_name in sorted(by_dim):
        cells = by_dim[dim_name]
        codes = sorted({code for (_, code) in cells})
        col_of = {c: j for j, c in enumerate(codes)}
        rows = np.fromiter((r for (r, _) in cells), dtype=int, count=len(cells))
        cols = np.fromiter((col_of[c] for (_, c) in cells), dtype=int, count=len(cells))
        data = np.fromiter(cells.values(), dtype=np.int64, count=len(cells))
        counts = sparse.csr_matrix((data, (rows, cols)), shape=(n, len(codes)))
        dimensions.append(ClaimsDimension(name=dim_name, codes=codes, counts=counts))

    return CohortDataset(
        patient_ids=patient_ids,
        treatment=np.array(treatment),
        outcome=np.array(outcome),
        baseline=np.array(baseline_rows, dtype=float).reshape(n, len(covariate_names)),
        baseline_columns=covariate_names,
        dimensions=dimensions,
    )


def iter_claims_triples(dataset: CohortDataset) -> Iterable[tuple[str, str, int]]:
    """Yield (patient_id, dimension:code, count) for every stored count,
    sorted by (patient row, dimension, code)."""
    per_patient: list[list[tuple[str, int]]] = [[] for _ in range(dataset.n_patients)]
    for dim in dataset.dimensions:
        coo = dim.counts.tocoo()
        for r, c, v in zip(coo.row, coo.col, coo.data):
            per_patient[r].append((f"{dim.name}:{dim.codes[c]}", int(v)))
    for i, entries in enumerate(per_patient):
        for tagged, v in sorted(entries):
            yield dataset.patient_ids[i], tagged, v


def write_cohort(dataset: CohortDataset, baseline_path: str | Path, claims_path: str | Path) -> None:
    """Write the module file formats back out (deterministic row order)."""
    with _open_text(baseline_path, "wt") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["patient_id", "treatment", "outcome"] + list(dataset.baseline_columns))
        for i, pid in enumerate(dataset.patient_ids):
            writer.writerow(
                [pid, int(dataset.treatment[i]), int(dataset.outcome[i])]
                + [repr(float(v)) for v in dataset.baseline[i]]
            )
    with _open_text(claims_path, "wt") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CLAIMS_HEADER)
        for pid, tagged, count in iter_claims_triples(dataset):
            writer.writerow([pid, tagged, count])
