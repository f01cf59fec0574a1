"""Dense linear-algebra and statistics kernel shared by all modules.

Matrices are plain 2-D float64 numpy arrays (row-major). Every public
operation validates that inputs are finite and returns finite outputs;
all accumulation happens in double precision.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateInputError, DimensionError, InsufficientSamplesError

__all__ = [
    "as_matrix",
    "as_vector",
    "pairwise_distance",
    "cosine_similarity",
    "centered_cross_covariance",
    "frobenius_norm",
    "l2_normalize_rows",
    "read_matrix_csv",
    "write_matrix_csv",
]

# Rows with norm at or below this threshold are left unscaled by
# l2_normalize_rows instead of being blown up.
_NORM_FLOOR = 1e-12


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce ``x`` to a finite 2-D float64 array or raise."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.size == 0:
        raise DimensionError(f"{name} must be non-empty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DegenerateInputError(f"{name} contains NaN or Inf entries")
    return m


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array or raise."""
    v = np.asarray(x, dtype=np.float64).ravel()
    if v.size == 0:
        raise DimensionError(f"{name} must be non-empty")
    if not np.all(np.isfinite(v)):
        raise DegenerateInputError(f"{name} contains NaN or Inf entries")
    return v


def pairwise_distance(x) -> np.ndarray:
    """All-pairs Euclidean distances between the rows of ``x``.

    Returns a symmetric n-by-n matrix with a zero diagonal. Distances are
    computed from the element-wise differences (not the Gram expansion),
    which keeps the triangle inequality intact to machine precision.
    """
    m = as_matrix(x, "points")
    d = cdist(m, m, metric="euclidean")
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def cosine_similarity(x) -> np.ndarray:
    """All-pairs cosine similarity between the rows of ``x``.

    Raises DegenerateInputError for zero-norm rows. The result is
    symmetric, has a unit diagonal, and is clipped to [-1, 1].
    """
    m = as_matrix(x, "points")
    norms = np.linalg.norm(m, axis=1)
    bad = np.nonzero(norms <= 0.0)[0]
    if bad.size:
        raise DegenerateInputError(f"zero-norm rows at indices {bad.tolist()}")
    unit = m / norms[:, None]
    s = unit @ unit.T
    s = 0.5 * (s + s.T)
    np.clip(s, -1.0, 1.0, out=s)
    np.fill_diagonal(s, 1.0)
    return s


def centered_cross_covariance(a, b) -> np.ndarray:
    """Empirical cross-covariance (1/(B-1)) * Ac.T @ Bc of column-centered inputs."""
    am = as_matrix(a, "a")
    bm = as_matrix(b, "b")
    if am.shape[0] != bm.shape[0]:
        raise DimensionError(
            f"row counts differ: {am.shape[0]} vs {bm.shape[0]}"
        )
    n = am.shape[0]
    if n < 2:
        raise InsufficientSamplesError("need at least 2 rows for covariance")
    ac = am - am.mean(axis=0, keepdims=True)
    bc = bm - bm.mean(axis=0, keepdims=True)
    return (ac.T @ bc) / (n - 1)


def frobenius_norm(m) -> float:
    """Square root of the sum of squared entries."""
    return float(np.linalg.norm(as_matrix(m, "matrix"), ord="fro"))


def l2_normalize_rows(x) -> np.ndarray:
    """Scale each row to unit Euclidean norm; rows with norm <= 1e-12 pass through."""
    m = as_matrix(x, "points")
    norms = np.linalg.norm(m, axis=1)
    scale = np.where(norms > _NORM_FLOOR, norms, 1.0)
    return m / scale[:, None]


def write_matrix_csv(path, m) -> None:
    """Write a matrix as CSV with a ``# rows=<n> cols=<d>`` header line."""
    arr = as_matrix(m, "matrix")
    rows, cols = arr.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# rows={rows} cols={cols}\n")
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix_csv`.

    Rejects ragged rows and header/shape mismatches.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise DimensionError(f"{path}: missing '# rows=... cols=...' header")
        try:
            fields = dict(
                part.split("=") for part in header.lstrip("#").split()
            )
            rows, cols = int(fields["rows"]), int(fields["cols"])
        except (ValueError, KeyError) as exc:
            raise DimensionError(f"{path}: malformed header {header!r}") from exc
        data = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            values = line.split(",")
            if len(values) != cols:
                raise DimensionError(
                    f"{path}:{lineno}: expected {cols} columns, got {len(values)}"
                )
            data.append([float(v) for v in values])
    if len(data) != rows:
        raise DimensionError(f"{path}: expected {rows} rows, got {len(data)}")
    return as_matrix(np.array(data, dtype=np.float64), "matrix")
