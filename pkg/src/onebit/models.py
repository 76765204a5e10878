"""Measurement models and their flattening into inequality rows.

Every model maps an unknown (vector or matrix) to a real measurement vector
``y`` of length ``m``.  Matrix unknowns are handled through their row-major
vectorisation ``v = X.ravel()``, so every measurement is a linear functional
``y_j = <g_j, v>`` and a one-bit observation of it becomes the half-space
``sign * <g_j, v> >= sign * threshold``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Direct",
    "Linear",
    "QuadraticLifted",
    "Trace",
    "Sparse",
    "LowRank",
    "Rank1Symmetric",
    "GroundTruth",
    "measure",
    "flatten_row",
    "project_structure",
    "extract_vector",
    "random_model",
    "random_truth",
    "model_to_dict",
    "model_from_dict",
    "DegenerateRecoveryError",
]

_SYM_TOL = 1e-10


class DegenerateRecoveryError(ValueError):
    """Raised when a lifted estimate has no positive leading eigenvalue."""


# -- models ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Direct:
    """Identity observation ``y = x``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"Direct needs a positive dimension, got {self.n!r}")

    @property
    def m(self):
        return int(self.n)

    @property
    def unknown_shape(self):
        return (int(self.n),)

    def sensing_rows(self):
        return np.eye(self.n)


@dataclass(frozen=True, eq=False)
class Linear:
    """``y = A x`` for an ``m x d`` matrix ``A``."""

    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.size == 0:
            raise ValueError(f"A must be a non-empty 2-D array, got shape {A.shape}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def unknown_shape(self):
        return (self.A.shape[1],)

    def sensing_rows(self):
        return self.A

    def well_posed(self):
        """Return True when ``A`` has full column rank, warn otherwise."""
        rank = np.linalg.matrix_rank(self.A)
        if rank < self.A.shape[1]:
            warnings.warn(
                f"A has rank {rank} < {self.A.shape[1]} columns; the polyhedron is unbounded "
                "along the null space unless a structure constraint is used",
                stacklevel=2,
            )
            return False
        return True


@dataclass(frozen=True, eq=False)
class QuadraticLifted:
    """``y_j = a_j^T X a_j`` on a symmetric ``n x n`` unknown ``X``.

    ``vectors`` holds the ``a_j`` as rows of an ``m x n`` array.
    """

    vectors: np.ndarray

    def __post_init__(self):
        a = np.array(self.vectors, dtype=float)
        if a.ndim != 2 or a.size == 0:
            raise ValueError(f"vectors must be a non-empty m x n array, got shape {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "vectors", a)

    @property
    def m(self):
        return self.vectors.shape[0]

    @property
    def unknown_shape(self):
        n = self.vectors.shape[1]
        return (n, n)

    def sensing_rows(self):
        a = self.vectors
        return (a[:, :, None] * a[:, None, :]).reshape(a.shape[0], -1)


@dataclass(frozen=True, eq=False)
class Trace:
    """``y_j = Tr(A_j^T X) / sqrt(m)`` for ``m`` sensing matrices of shape ``n1 x n2``."""

    matrices: np.ndarray

    def __post_init__(self):
        A = np.array(self.matrices, dtype=float)
        if A.ndim != 3 or A.size == 0:
            raise ValueError(f"matrices must be a non-empty m x n1 x n2 array, got shape {A.shape}")
        A.setflags(write=False)
        object.__setattr__(self, "matrices", A)

    @property
    def m(self):
        return self.matrices.shape[0]

    @property
    def unknown_shape(self):
        return self.matrices.shape[1:]

    def sensing_rows(self):
        return self.matrices.reshape(self.m, -1) / np.sqrt(self.m)


_MODELS = (Direct, Linear, QuadraticLifted, Trace)


def _check_model(model):
    if not isinstance(model, _MODELS):
        raise TypeError(f"unknown measurement model {type(model).__name__}")


# -- structures and ground truth ----------------------------------------------


@dataclass(frozen=True)
class Sparse:
    s: int


@dataclass(frozen=True)
class LowRank:
    r: int


@dataclass(frozen=True)
class Rank1Symmetric:
    pass


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """A true unknown together with the structure it is known to have."""

    value: np.ndarray
    structure: Sparse | LowRank | Rank1Symmetric | None = None

    def __post_init__(self):
        value = np.array(self.value, dtype=float)
        if value.ndim not in (1, 2):
            raise ValueError(f"ground truth must be a vector or matrix, got shape {value.shape}")
        object.__setattr__(self, "value", value)

    @property
    def is_matrix(self):
        return self.value.ndim == 2

    def flat(self):
        return self.value.ravel()

    def check(self, tol=1e-9):
        """Verify the declared structure, raising ValueError when it does not hold."""
        v = self.value
        st = self.structure
        if isinstance(st, Sparse):
            nnz = int(np.count_nonzero(v))
            if nnz != st.s:
                raise ValueError(f"declared Sparse({st.s}) but found {nnz} nonzeros")
        elif isinstance(st, LowRank):
            if v.ndim != 2:
                raise ValueError("LowRank structure needs a matrix")
            sv = np.linalg.svd(v, compute_uv=False)
            rank = int(np.sum(sv > tol * max(sv[0], 1.0)))
            if rank != st.r:
                raise ValueError(f"declared LowRank({st.r}) but numerical rank is {rank}")
        elif isinstance(st, Rank1Symmetric):
            if v.ndim != 2 or v.shape[0] != v.shape[1]:
                raise ValueError("Rank1Symmetric structure needs a square matrix")
            x = extract_vector(v)
            if np.linalg.norm(np.outer(x, x) - v) > tol * max(np.linalg.norm(v), 1.0):
                raise ValueError("declared Rank1Symmetric but X is not x x^T")
        return True


def _as_array(truth):
    return truth.value if isinstance(truth, GroundTruth) else np.asarray(truth, dtype=float)


# -- operations ---------------------------------------------------------------


def measure(model, truth):
    """Noise-free measurements of ``truth`` under ``model``.

    ``truth`` may be a :class:`GroundTruth` or a bare array.  Returns a new
    float vector of length ``model.m``.
    """
    _check_model(model)
    v = _as_array(truth)
    if v.shape != tuple(model.unknown_shape):
        raise ValueError(f"{type(model).__name__} expects unknown of shape {model.unknown_shape}, got {v.shape}")
    if isinstance(model, Direct):
        return v.astype(float, copy=True)
    if isinstance(model, Linear):
        return model.A @ v
    if isinstance(model, QuadraticLifted):
        if not np.allclose(v, v.T, rtol=0.0, atol=_SYM_TOL * max(1.0, np.abs(v).max())):
            raise ValueError("QuadraticLifted requires a symmetric X")
        a = model.vectors
        return np.einsum("ji,ik,jk->j", a, v, a)
    return np.tensordot(model.matrices, v, axes=([1, 2], [0, 1])) / np.sqrt(model.m)


def flatten_row(model, j, sign, threshold):
    """Half-space ``c . v >= b`` encoded by one sign measurement.

    Returns
    -------
    c : ndarray
        ``sign`` times the sensing functional of measurement ``j`` over the
        flattened unknown.
    b : float
        ``sign * threshold``.
    """
    _check_model(model)
    j = int(j)
    if not 0 <= j < model.m:
        raise IndexError(f"measurement index {j} out of range for m={model.m}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    if isinstance(model, Direct):
        g = np.zeros(model.n)
        g[j] = 1.0
    elif isinstance(model, Linear):
        g = model.A[j].copy()
    elif isinstance(model, QuadraticLifted):
        a = model.vectors[j]
        g = np.outer(a, a).ravel()
    else:
        g = model.matrices[j].ravel() / np.sqrt(model.m)
    return sign * g, sign * float(threshold)


def project_structure(shape, v, structure):
    """Project a flattened estimate onto a structure set.

    Sparse keeps the ``s`` largest magnitudes, LowRank truncates the SVD
    and Rank1Symmetric returns the nearest PSD rank-one matrix of the
    symmetric part.  ``None`` returns a copy.
    """
    shape = tuple(shape)
    v = np.asarray(v, dtype=float)
    if v.size != int(np.prod(shape)):
        raise ValueError(f"estimate of size {v.size} does not match shape {shape}")
    if structure is None:
        return v.copy()
    if isinstance(structure, Sparse):
        s = int(structure.s)
        if not 0 <= s <= v.size:
            raise ValueError(f"sparsity {s} exceeds dimension {v.size}")
        flat = v.ravel()
        out = np.zeros_like(flat)
        if s:
            # stable sort so equal magnitudes resolve to the lowest index
            keep = np.argsort(-np.abs(flat), kind="stable")[:s]
            out[keep] = flat[keep]
        return out.reshape(v.shape)
    if len(shape) != 2:
        raise ValueError(f"{type(structure).__name__} needs a matrix shape, got {shape}")
    X = v.reshape(shape)
    if isinstance(structure, LowRank):
        r = int(structure.r)
        if not 0 <= r <= min(shape):
            raise ValueError(f"rank {r} exceeds min dimension {min(shape)}")
        U, sv, Vt = np.linalg.svd(X, full_matrices=False)
        return ((U[:, :r] * sv[:r]) @ Vt[:r]).reshape(v.shape)
    if isinstance(structure, Rank1Symmetric):
        if shape[0] != shape[1]:
            raise ValueError(f"Rank1Symmetric needs a square shape, got {shape}")
        S = 0.5 * (X + X.T)
        w, U = np.linalg.eigh(S)
        lam = max(w[-1], 0.0)
        u = U[:, -1]
        return (lam * np.outer(u, u)).reshape(v.shape)
    raise TypeError(f"unknown structure {structure!r}")


def extract_vector(X_hat):
    """Leading-eigenpair factor ``sqrt(lambda_1) u_1`` of a symmetric matrix.

    The global sign is fixed so that the largest-magnitude entry is
    positive.

    Raises
    ------
    DegenerateRecoveryError
        If the leading eigenvalue is not positive.
    """
    X = np.asarray(X_hat, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    if not np.allclose(X, X.T, rtol=1e-8, atol=1e-10 * max(1.0, np.abs(X).max())):
        raise ValueError("expected a symmetric matrix")
    w, U = np.linalg.eigh(0.5 * (X + X.T))
    if w[-1] <= 0:
        raise DegenerateRecoveryError(f"leading eigenvalue {w[-1]:.3g} is not positive")
    x = np.sqrt(w[-1]) * U[:, -1]
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return x


# -- generators ---------------------------------------------------------------


def random_model(kind, rng, **dims):
    """Gaussian sensing model of the given kind.

    ``kind`` is one of ``direct`` (``n``), ``linear`` (``m``, ``d``),
    ``quadratic`` (``m``, ``n``) or ``trace`` (``m``, ``n1``, ``n2``).
    """
    if kind == "direct":
        return Direct(int(dims["n"]))
    if kind == "linear":
        return Linear(rng.standard_normal((int(dims["m"]), int(dims["d"]))))
    if kind == "quadratic":
        return QuadraticLifted(rng.standard_normal((int(dims["m"]), int(dims["n"]))))
    if kind == "trace":
        return Trace(rng.standard_normal((int(dims["m"]), int(dims["n1"]), int(dims["n2"]))))
    raise ValueError(f"unknown model kind {kind!r}")


def random_truth(shape, structure, rng, symmetric=False):
    """Gaussian ground truth of ``shape`` with the requested structure.

    Sparse supports are uniform at random, LowRank is a product of two
    Gaussian factors and Rank1Symmetric is ``x x^T`` for Gaussian ``x``.
    ``symmetric`` symmetrises an unstructured square matrix, as the lifted
    model requires.
    """
    shape = tuple(int(s) for s in shape)
    if structure is None:
        value = rng.standard_normal(shape)
        if symmetric:
            value = 0.5 * (value + value.T)
    elif isinstance(structure, Sparse):
        size = int(np.prod(shape))
        if not 0 <= structure.s <= size:
            raise ValueError(f"sparsity {structure.s} exceeds dimension {size}")
        flat = np.zeros(size)
        support = rng.choice(size, size=structure.s, replace=False)
        vals = rng.standard_normal(structure.s)
        # a zero draw would break the exact sparsity count
        vals[vals == 0.0] = 1.0
        flat[support] = vals
        value = flat.reshape(shape)
    elif isinstance(structure, LowRank):
        if len(shape) != 2 or structure.r > min(shape):
            raise ValueError(f"LowRank({structure.r}) needs a matrix shape with min dim >= r, got {shape}")
        value = rng.standard_normal((shape[0], structure.r)) @ rng.standard_normal((structure.r, shape[1]))
    elif isinstance(structure, Rank1Symmetric):
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"Rank1Symmetric needs a square shape, got {shape}")
        x = rng.standard_normal(shape[0])
        value = np.outer(x, x)
    else:
        raise TypeError(f"unknown structure {structure!r}")
    return GroundTruth(value, structure)


# -- JSON ---------------------------------------------------------------------


def model_to_dict(model):
    _check_model(model)
    if isinstance(model, Direct):
        return {"variant": "direct", "n": int(model.n)}
    if isinstance(model, Linear):
        return {"variant": "linear", "A": model.A.tolist()}
    if isinstance(model, QuadraticLifted):
        return {"variant": "quadratic", "vectors": model.vectors.tolist()}
    return {"variant": "trace", "matrices": model.matrices.tolist()}


def model_from_dict(d):
    variant = d.get("variant")
    if variant == "direct":
        return Direct(int(d["n"]))
    if variant == "linear":
        return Linear(np.asarray(d["A"], dtype=float))
    if variant == "quadratic":
        return QuadraticLifted(np.asarray(d["vectors"], dtype=float))
    if variant == "trace":
        return Trace(np.asarray(d["matrices"], dtype=float))
    raise ValueError(f"unknown model variant {variant!r}")


def structure_to_dict(structure):
    if structure is None:
        return {"kind": "none"}
    if isinstance(structure, Sparse):
        return {"kind": "sparse", "s": int(structure.s)}
    if isinstance(structure, LowRank):
        return {"kind": "lowrank", "r": int(structure.r)}
    if isinstance(structure, Rank1Symmetric):
        return {"kind": "rank1sym"}
    raise TypeError(f"unknown structure {structure!r}")


def structure_from_dict(d):
    if d is None:
        return None
    kind = d.get("kind", "none")
    if kind == "none":
        return None
    if kind == "sparse":
        return Sparse(int(d["s"]))
    if kind == "lowrank":
        return LowRank(int(d["r"]))
    if kind == "rank1sym":
        return Rank1Symmetric()
    raise ValueError(f"unknown structure kind {kind!r}")
