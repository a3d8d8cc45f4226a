"""LIBSVM dataset ingestion and CSV trace emission."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, UsageError

TRACE_COLUMNS = (
    "iter", "props", "loss", "grad_norm", "radius_or_sigma", "rho", "success",
    "step_norm", "inner_iters", "lambda_hat", "wall_ms",
)

# Accepted raw label sets, each mapped (smaller -> 0, larger -> 1).
_LABEL_SETS = ({0.0, 1.0}, {-1.0, 1.0}, {1.0, 2.0})


@dataclass(frozen=True)
class Dataset:
    """Binary classification data: sparse rows (CSR, 0-based) and {0,1} labels."""

    X: sp.csr_matrix
    labels: np.ndarray

    def __post_init__(self):
        if self.X.shape[0] != self.labels.shape[0]:
            raise UsageError("number of rows and labels differ")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise UsageError("labels must be in {0, 1}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _mappable(present):
    return any(present <= allowed for allowed in _LABEL_SETS)


def _map_labels(raw, flip):
    present = set(raw.tolist())
    for allowed in _LABEL_SETS:
        if present <= allowed:
            lo, hi = sorted(allowed)
            mapped = (raw == hi).astype(np.float64)
            return 1.0 - mapped if flip else mapped
    raise ParseError(f"cannot map label set {sorted(present)} to {{0, 1}}")


def _lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            yield from fh
        return
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    yield from source


def parse_libsvm(source, n_features=None, scale_features=False, flip_labels=False) -> Dataset:
    """Parse LIBSVM text (``label idx:val ...`` with 1-based indices).

    Parameters
    ----------
    source : path, bytes, or iterable of lines (bytes or str)
    n_features : int, optional
        Explicit feature dimension; defaults to the largest index seen.
    scale_features : bool
        Divide each column by its maximum absolute value.
    flip_labels : bool
        Map the larger raw label to 0 instead of 1.

    Raises
    ------
    ParseError
        On malformed tokens, non-increasing or duplicate indices, indices
        beyond ``n_features``, or an unmappable label set.
    """
    labels, indptr, indices, values = [], [0], [], []
    present = set()
    max_index = 0
    for lineno, line in enumerate(_lines(source), start=1):
        if isinstance(line, (bytes, bytearray)):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"invalid UTF-8: {exc}", lineno) from None
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"malformed label {tokens[0]!r}", lineno) from None
        if label not in present:
            present.add(label)
            if not _mappable(present):
                raise ParseError(f"label {tokens[0]!r} makes the label set {sorted(present)} unmappable", lineno)
        labels.append(label)
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(f"malformed feature token {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"feature index {idx} is not 1-based positive", lineno)
            if idx == prev:
                raise ParseError(f"duplicate feature index {idx}", lineno)
            if idx < prev:
                raise ParseError(f"feature indices not increasing at {idx}", lineno)
            if not np.isfinite(val):
                raise ParseError(f"non-finite feature value {val_s!r}", lineno)
            if n_features is not None and idx > n_features:
                raise ParseError(f"feature index {idx} exceeds n_features={n_features}", lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(val)
        max_index = max(max_index, prev)
        indptr.append(len(indices))

    d = int(n_features) if n_features is not None else max_index
    y = _map_labels(np.asarray(labels, dtype=np.float64), flip_labels)
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(labels), d),
    )
    if scale_features:
        X = max_abs_scale(X)
    return Dataset(X, y)


def max_abs_scale(X: sp.csr_matrix) -> sp.csr_matrix:
    scale = np.asarray(abs(X).max(axis=0).todense()).ravel()
    scale[scale == 0] = 1.0
    return sp.csr_matrix(X @ sp.diags(1.0 / scale))


def format_libsvm(data: Dataset, raw_labels=(0, 1)) -> str:
    """Serialize a dataset back to LIBSVM text (1-based indices)."""
    out = []
    X = data.X.tocsr()
    for i in range(data.n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
        label = raw_labels[int(data.labels[i])]
        out.append(f"{label} {feats}".rstrip())
    return "\n".join(out) + "\n"


def make_synthetic_dataset(n: int, d: int, seed: int = 0, density: float = 1.0,
                           signal: float = 10.0) -> Dataset:
    """Random binary classification data resembling a small dense LIBSVM set.

    Features are uniform in [-1, 1] (optionally sparsified); labels are drawn
    from a logistic model around a random separating direction, so the
    squared-loss objective has a non-trivial optimum.  ``signal`` scales the
    separating direction: larger values give cleaner labels and a lower
    attainable loss.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    if density < 1.0:
        X[rng.random((n, d)) > density] = 0.0
    w_true = rng.normal(size=d) * signal / np.sqrt(d)
    p = 1.0 / (1.0 + np.exp(-(X @ w_true)))
    y = (rng.random(n) < p).astype(np.float64)
    return Dataset(sp.csr_matrix(X), y)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_trace_csv(trace, sink) -> None:
    """Write trace records as CSV (LF line endings, 17 significant digits).

    ``sink`` is a text file object or a path.
    """
    if not trace:
        raise UsageError("trace must be nonempty")
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", newline="") as fh:
            write_trace_csv(trace, fh)
        return
    sink.write(",".join(TRACE_COLUMNS) + "\n")
    for rec in trace:
        row = rec.as_row()
        sink.write(",".join(_fmt(row[c]) for c in TRACE_COLUMNS) + "\n")


def read_trace_csv(source) -> list[dict]:
    """Parse a trace CSV written by :func:`write_trace_csv` into dict rows."""
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            return read_trace_csv(fh)
    header = source.readline().rstrip("\n").split(",")
    rows = []
    for line in source:
        fields = line.rstrip("\n").split(",")
        row = {}
        for key, text in zip(header, fields):
            row[key] = int(text) if key in ("iter", "props", "success", "inner_iters") else float(text)
        rows.append(row)
    return rows
