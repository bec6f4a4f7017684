"""Finite discrete measures, metrics on their supports, and Markov kernels.

All solvers in this package operate on measures of the form
``sum_i w_i * delta_{x_i}`` with finitely many atoms.  This module owns
the canonical representation (deduplicated atoms, validated weights),
the metric structure used by Lipschitz function classes, row-stochastic
kernels for pushforwards, and the JSON/CSV file formats used by the CLI.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputError

__all__ = [
    "DiscreteMeasure",
    "MetricSpec",
    "StochasticKernel",
    "joint_support",
    "pushforward",
    "load_measure",
    "save_measure",
    "load_kernel",
]

_DEDUP_TOL = 1e-12
_DROP_TOL = 1e-15


def _canon_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise InputError(f"points must be 1- or 2-dimensional, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InputError("points contain non-finite coordinates")
    return pts


def _dedupe(pts: np.ndarray, wts: np.ndarray):
    """Merge atoms whose coordinates agree within _DEDUP_TOL (first kept)."""
    n = pts.shape[0]
    keep: list[int] = []
    target = np.full(n, -1, dtype=int)
    for i in range(n):
        for j in keep:
            if np.max(np.abs(pts[i] - pts[j])) <= _DEDUP_TOL:
                target[i] = j
                break
        else:
            keep.append(i)
            target[i] = i
    if len(keep) == n:
        return pts, wts
    out_w = np.zeros(len(keep))
    index_of = {j: k for k, j in enumerate(keep)}
    for i in range(n):
        out_w[index_of[target[i]]] += wts[i]
    return pts[keep], out_w


@dataclass(frozen=True)
class DiscreteMeasure:
    """A nonnegative measure with finitely many atoms.

    The constructor canonicalizes its input: points within 1e-12 of each
    other are merged (weights added), weights below 1e-15 are dropped,
    and when ``is_probability`` is set the remainder is rescaled to total
    mass one.  Points are stored as an (n, d) float array.
    """

    points: np.ndarray
    weights: np.ndarray
    is_probability: bool = True

    def __post_init__(self):
        pts = _canon_points(self.points)
        wts = np.asarray(self.weights, dtype=float).reshape(-1)
        if wts.shape[0] != pts.shape[0]:
            raise InputError(
                f"{pts.shape[0]} points but {wts.shape[0]} weights"
            )
        if not np.all(np.isfinite(wts)):
            raise InputError("weights contain non-finite values")
        if np.any(wts < -_DROP_TOL):
            raise InputError("weights must be nonnegative")
        wts = np.clip(wts, 0.0, None)
        pts, wts = _dedupe(pts, wts)
        live = wts > _DROP_TOL
        pts, wts = pts[live], wts[live]
        if pts.shape[0] == 0:
            raise InputError("measure has no atoms with positive weight")
        if self.is_probability:
            total = wts.sum()
            wts = wts / total
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def mean(self, values: np.ndarray) -> float:
        """Integral of a function given by its values on the atoms."""
        v = np.asarray(values, dtype=float)
        if v.shape[0] != self.n:
            raise InputError(f"expected {self.n} values, got {v.shape[0]}")
        return float(self.weights @ v)

    def to_json_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "weights": self.weights.tolist(),
        }


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricSpec:
    """Ground metric for Lipschitz constraints.

    ``kind="euclidean"`` computes distances from coordinates on demand.
    ``kind="explicit"`` carries a full distance matrix over a reference
    point list; the matrix is validated as a metric (symmetry, zero
    diagonal, positivity off-diagonal, triangle inequality within 1e-12).
    """

    kind: str = "euclidean"
    matrix: Optional[np.ndarray] = None
    reference: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "explicit"):
            raise InputError(f"unknown metric kind {self.kind!r}")
        if self.kind == "explicit":
            if self.matrix is None or self.reference is None:
                raise InputError("explicit metric needs matrix and reference points")
            m = np.asarray(self.matrix, dtype=float)
            ref = _canon_points(self.reference)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InputError("metric matrix must be square")
            if m.shape[0] != ref.shape[0]:
                raise InputError("metric matrix size does not match reference points")
            if not np.all(np.isfinite(m)):
                raise InputError("metric matrix has non-finite entries")
            if np.any(np.abs(np.diag(m)) > 1e-14):
                raise InputError("metric matrix must have zero diagonal")
            if np.any(np.abs(m - m.T) > 1e-12):
                raise InputError("metric matrix must be symmetric")
            off = m + np.eye(m.shape[0])  # mask diagonal for positivity check
            if np.any(off <= 0):
                raise InputError("distinct points must have positive distance")
            # triangle inequality: d(i,k) <= d(i,j) + d(j,k) for all i,j,k
            for j in range(m.shape[0]):
                slack = m - (m[:, [j]] + m[[j], :])
                if np.any(slack > 1e-12):
                    raise InputError("metric matrix violates the triangle inequality")
            m.setflags(write=False)
            ref.setflags(write=False)
            object.__setattr__(self, "matrix", m)
            object.__setattr__(self, "reference", ref)

    def _lookup(self, pts: np.ndarray) -> np.ndarray:
        assert self.reference is not None
        idx = np.empty(pts.shape[0], dtype=int)
        for i, x in enumerate(pts):
            d = np.max(np.abs(self.reference - x), axis=1)
            j = int(np.argmin(d))
            if d[j] > 1e-9:
                raise InputError(
                    f"point {x.tolist()} is not in the explicit metric's reference set"
                )
            idx[i] = j
        return idx

    def cross(self, xs, ys) -> np.ndarray:
        """Distance matrix between two point lists, shape (len(xs), len(ys))."""
        xs = _canon_points(xs)
        ys = _canon_points(ys)
        if self.kind == "euclidean":
            diff = xs[:, None, :] - ys[None, :, :]
            return np.sqrt(np.sum(diff * diff, axis=-1))
        ix = self._lookup(xs)
        iy = self._lookup(ys)
        return self.matrix[np.ix_(ix, iy)]

    def pairwise(self, xs) -> np.ndarray:
        return self.cross(xs, xs)


# ---------------------------------------------------------------------------
# Kernels and pushforwards
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StochasticKernel:
    """Row-stochastic transition matrix onto an explicit target point list."""

    matrix: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        tgt = _canon_points(self.targets)
        if m.ndim != 2:
            raise InputError("kernel matrix must be 2-dimensional")
        if m.shape[1] != tgt.shape[0]:
            raise InputError(
                f"kernel has {m.shape[1]} columns but {tgt.shape[0]} target points"
            )
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise InputError("kernel entries must be finite and nonnegative")
        rs = m.sum(axis=1)
        if np.any(np.abs(rs - 1.0) > 1e-12):
            worst = float(np.max(np.abs(rs - 1.0)))
            raise InputError(f"kernel rows must sum to 1 (worst deviation {worst:.3g})")
        m.setflags(write=False)
        tgt.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "targets", tgt)

    @property
    def n_source(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_target(self) -> int:
        return self.matrix.shape[1]


def pushforward(mu: DiscreteMeasure, kernel: StochasticKernel) -> DiscreteMeasure:
    """Image measure of ``mu`` under the kernel (rows indexed by mu's atoms)."""
    if kernel.n_source != mu.n:
        raise InputError(
            f"kernel has {kernel.n_source} rows but the measure has {mu.n} atoms"
        )
    w = mu.weights @ kernel.matrix
    return DiscreteMeasure(kernel.targets, w, is_probability=mu.is_probability)


def joint_support(q_meas: DiscreteMeasure, p_meas: DiscreteMeasure):
    """Common atom list for a pair of measures, in lexicographic order.

    Returns ``(points, q, p)`` where ``points`` is the deduplicated union
    of the two supports sorted lexicographically by coordinates, and
    ``q``/``p`` are the weight vectors of the two measures on that list
    (zero where a measure puts no mass).  The fixed ordering makes every
    downstream solver deterministic in its inputs.
    """
    if q_meas.dim != p_meas.dim:
        raise InputError(
            f"dimension mismatch: {q_meas.dim} vs {p_meas.dim}"
        )
    pts = np.vstack([q_meas.points, p_meas.points])
    n_q = q_meas.n
    merged, _ = _dedupe(pts, np.zeros(pts.shape[0]))
    order = np.lexsort(merged.T[::-1])
    merged = merged[order]
    q = np.zeros(merged.shape[0])
    p = np.zeros(merged.shape[0])

    def _find(x):
        d = np.max(np.abs(merged - x), axis=1)
        j = int(np.argmin(d))
        assert d[j] <= _DEDUP_TOL
        return j

    for i in range(n_q):
        q[_find(q_meas.points[i])] += q_meas.weights[i]
    for i in range(p_meas.n):
        p[_find(p_meas.points[i])] += p_meas.weights[i]
    merged.setflags(write=False)
    return merged, q, p


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _measure_from_json_dict(obj) -> DiscreteMeasure:
    if not isinstance(obj, dict) or "points" not in obj or "weights" not in obj:
        raise InputError('measure JSON must have "points" and "weights" keys')
    try:
        return DiscreteMeasure(np.asarray(obj["points"], dtype=float),
                               np.asarray(obj["weights"], dtype=float))
    except (ValueError, TypeError) as e:
        raise InputError(f"malformed measure JSON: {e}") from None


def load_measure(path: str) -> DiscreteMeasure:
    """Read a measure from .json ({"points", "weights"}) or .csv (x1..xd,w)."""
    if path.endswith(".json"):
        try:
            with open(path) as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise InputError(f"cannot read measure from {path}: {e}") from None
        return _measure_from_json_dict(obj)
    if path.endswith(".csv"):
        try:
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
        except OSError as e:
            raise InputError(f"cannot read measure from {path}: {e}") from None
        if not rows:
            raise InputError(f"{path} is empty")
        header = [h.strip() for h in rows[0]]
        if header[-1] != "w" or not all(
            h == f"x{i + 1}" for i, h in enumerate(header[:-1])
        ):
            raise InputError(
                f"{path}: expected header x1,...,xd,w, got {','.join(header)}"
            )
        d = len(header) - 1
        pts, wts = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise InputError(f"{path}:{lineno}: expected {d + 1} fields")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric field") from None
            pts.append(vals[:-1])
            wts.append(vals[-1])
        return DiscreteMeasure(np.asarray(pts), np.asarray(wts))
    raise InputError(f"unsupported measure file extension: {path}")


def save_measure(mu: DiscreteMeasure, path: str) -> None:
    if path.endswith(".json"):
        with open(path, "w") as fh:
            json.dump(mu.to_json_dict(), fh, indent=2)
            fh.write("\n")
        return
    if path.endswith(".csv"):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(mu.dim)] + ["w"])
            for x, w in zip(mu.points, mu.weights):
                writer.writerow([repr(float(v)) for v in x] + [repr(float(w))])
        return
    raise InputError(f"unsupported measure file extension: {path}")


def load_kernel(path: str) -> StochasticKernel:
    """Read a kernel from JSON: {"matrix": [[...]], "targets": [[...]]}."""
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read kernel from {path}: {e}") from None
    if not isinstance(obj, dict) or "matrix" not in obj or "targets" not in obj:
        raise InputError('kernel JSON must have "matrix" and "targets" keys')
    try:
        return StochasticKernel(np.asarray(obj["matrix"], dtype=float),
                                np.asarray(obj["targets"], dtype=float))
    except (ValueError, TypeError) as e:
        raise InputError(f"malformed kernel JSON: {e}") from None
