"""The one-bit polyhedron ``{v : c_j . v >= b_j}`` as a dense row collection."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.io

from .models import flatten_row

__all__ = ["OneBitPolyhedron", "build", "residual", "membership", "scaled_condition_number", "ConditionNumber"]


@dataclass(frozen=True, eq=False)
class OneBitPolyhedron:
    """Rows ``c_j`` stacked in ``C`` (``N x D``) with right-hand sides ``b``.

    ``equality[j]`` marks rows that must hold with equality; one-bit builds
    only produce inequality rows.  ``unknown_shape`` remembers how the
    flattened unknown folds back into a vector or matrix.
    """

    C: np.ndarray
    b: np.ndarray
    equality: np.ndarray = None
    unknown_shape: tuple = None
    dropped_rows: int = 0
    row_sq_norms: np.ndarray = field(init=False, repr=False)
    frobenius_sq: float = field(init=False, repr=False)

    def __post_init__(self):
        C = np.ascontiguousarray(self.C, dtype=float)
        b = np.ascontiguousarray(self.b, dtype=float).ravel()
        if C.ndim != 2 or C.shape[0] != b.shape[0]:
            raise ValueError(f"C must be N x D with len(b) == N, got {C.shape} and {b.shape}")
        if C.shape[0] == 0:
            raise ValueError("polyhedron has no rows")
        eq = np.zeros(C.shape[0], dtype=bool) if self.equality is None else np.asarray(self.equality, dtype=bool)
        if eq.shape != b.shape:
            raise ValueError("equality mask must have one entry per row")
        shape = (C.shape[1],) if self.unknown_shape is None else tuple(int(s) for s in self.unknown_shape)
        if int(np.prod(shape)) != C.shape[1]:
            raise ValueError(f"unknown_shape {shape} does not match D={C.shape[1]}")
        norms = np.einsum("ij,ij->i", C, C)
        if np.any(norms == 0):
            raise ValueError("zero rows are not allowed; use build() to drop them")
        for arr in (C, b, eq, norms):
            arr.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "equality", eq)
        object.__setattr__(self, "unknown_shape", shape)
        object.__setattr__(self, "row_sq_norms", norms)
        object.__setattr__(self, "frobenius_sq", float(norms.sum()))

    @property
    def N(self):
        return self.C.shape[0]

    @property
    def D(self):
        return self.C.shape[1]

    def row(self, j):
        return self.C[j], float(self.b[j])

    def slack(self, v):
        """``b - C v`` for every row."""
        return self.b - self.C @ np.asarray(v, dtype=float).ravel()

    def violations(self, v):
        """Per-row violation: positive part for inequalities, magnitude for equalities."""
        s = self.slack(v)
        return np.where(self.equality, np.abs(s), np.maximum(s, 0.0))

    def max_violation(self, v):
        return float(self.violations(v).max())

    def scale(self):
        """``max |b_j| + 1``, the scale used for relative feasibility tolerances."""
        return float(np.abs(self.b).max()) + 1.0

    def export_mm(self, path, comment=""):
        """Write ``[C | b]`` as a dense Matrix Market array file."""
        scipy.io.mmwrite(path, np.column_stack([self.C, self.b]), comment=comment, precision=17)


def build(model, signdata):
    """Stack one inequality per ``(j, l)`` pair.

    Row order is sequence-major: row ``l * m + j`` comes from measurement
    ``j`` compared against threshold column ``l``.  Rows whose sensing
    functional is identically zero are dropped with a warning.
    """
    m, L = signdata.signs.shape
    if m != model.m:
        raise ValueError(f"sign data has {m} measurements per sequence, model has m={model.m}")
    G = np.asarray(model.sensing_rows(), dtype=float)
    signs = signdata.signs.T.astype(float)  # L x m
    C = (signs[:, :, None] * G[None, :, :]).reshape(L * m, G.shape[1])
    b = (signs * signdata.thresholds.T).ravel()
    keep = np.einsum("ij,ij->i", C, C) > 0
    dropped = int((~keep).sum())
    if dropped:
        warnings.warn(f"dropped {dropped} zero rows from the one-bit polyhedron", stacklevel=2)
        C, b = C[keep], b[keep]
    return OneBitPolyhedron(C, b, unknown_shape=model.unknown_shape, dropped_rows=dropped)


def build_by_rows(model, signdata):
    """Row-by-row construction through :func:`flatten_row`; slow, used as a cross-check."""
    m, L = signdata.signs.shape
    rows, rhs = [], []
    for l in range(L):
        for j in range(m):
            c, bj = flatten_row(model, j, int(signdata.signs[j, l]), signdata.thresholds[j, l])
            if np.any(c != 0):
                rows.append(c)
                rhs.append(bj)
    return OneBitPolyhedron(np.array(rows), np.array(rhs), unknown_shape=model.unknown_shape)


def residual(p, j, v):
    """``(b_j - c_j . v)^+`` for inequality rows, ``b_j - c_j . v`` for equality rows."""
    if not 0 <= j < p.N:
        raise IndexError(f"row {j} out of range for N={p.N}")
    r = p.b[j] - float(np.dot(p.C[j], np.asarray(v, dtype=float).ravel()))
    return r if p.equality[j] else max(r, 0.0)


def membership(p, v, tol=None):
    """Feasibility test.

    Parameters
    ----------
    tol : float, optional
        Allowed violation; defaults to ``1e-9 * p.scale()``.

    Returns
    -------
    (bool, float)
        Whether every row holds within ``tol``, and the worst violation.
    """
    if tol is None:
        tol = 1e-9 * p.scale()
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    worst = p.max_violation(v)
    return worst <= tol, worst


@dataclass(frozen=True)
class ConditionNumber:
    kappa: float
    q: float
    frobenius: float
    sigma_min: float


def scaled_condition_number(p):
    """``kappa = ||C||_F / sigma_min(C)`` and ``q = 1 / kappa**2``.

    Materialises the SVD of the full stack, O(N D^2); meant for diagnostics.
    A rank-deficient stack yields ``kappa = inf`` and ``q = 0``.
    """
    if p.N < p.D:
        raise ValueError(f"need N >= D for a scaled condition number, got N={p.N}, D={p.D}")
    sv = np.linalg.svd(p.C, compute_uv=False)
    fro = float(np.sqrt(p.frobenius_sq))
    smin = float(sv[-1])
    if smin <= sv[0] * max(p.N, p.D) * np.finfo(float).eps:
        return ConditionNumber(np.inf, 0.0, fro, smin)
    kappa = fro / smin
    return ConditionNumber(kappa, 1.0 / kappa**2, fro, smin)
