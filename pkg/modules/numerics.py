"""
Dense matrix kernels for symmetric and general real matrices.

Thin, validated wrappers over scipy.linalg (LAPACK) so every caller gets the
same finiteness checks, tolerance handling and deterministic results.
Also hosts the positive-definite search shared by the compatibility solver
and the fixed-set chart.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from config import (
    NULLSPACE_REL_TOL,
    PD_RATIO_TOL,
    PD_SEARCH_ITERATIONS,
    PD_RANDOM_RESTARTS,
    PD_ACCEPT_RATIO,
    CENTERING_MAX_ITER,
    CENTERING_TOL,
)
from modules.errors import NonFiniteError, NotPositiveDefiniteError

logger = logging.getLogger(__name__)

SPD_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "inv_sqrt": lambda w: 1.0 / np.sqrt(w),
    "inv": lambda w: 1.0 / w,
}


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


# ── Validation helpers ────────────────────────────────────────

def require_finite(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{what} has NaN or Inf entries")
    return a


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Exactly symmetric copy: (A + A^T) / 2 is bitwise symmetric."""
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


# ── Eigen-decomposition and spectral maps ─────────────────────

def sym_eig(a: np.ndarray) -> EigenDecomposition:
    """Symmetric eigen-decomposition, eigenvalues ascending."""
    a = symmetrize(require_finite(a))
    w, q = linalg.eigh(a)
    return EigenDecomposition(eigenvalues=w, eigenvectors=q)


def spd_map(p: np.ndarray, func: str) -> np.ndarray:
    """Apply a scalar function to a symmetric matrix through its spectrum.

    `func` is one of exp, log, sqrt, inv_sqrt, inv. All but exp require P
    positive definite with min eigenvalue > PD_RATIO_TOL * max eigenvalue.
    """
    if func not in SPD_FUNCTIONS:
        raise ValueError(f"Unknown spectral function '{func}'")
    eig = sym_eig(p)
    w = eig.eigenvalues
    if func != "exp":
        w_max = float(np.max(np.abs(w))) if w.size else 0.0
        if w.size and (w[0] <= 0.0 or w[0] <= PD_RATIO_TOL * w_max):
            raise NotPositiveDefiniteError(
                f"spd_map({func}) needs a positive-definite matrix; "
                f"eigenvalue range [{w[0]:.3e}, {w[-1]:.3e}]"
            )
    q = eig.eigenvectors
    return symmetrize((q * SPD_FUNCTIONS[func](w)) @ q.T)


def is_positive_definite(p: np.ndarray, ratio: float = 0.0) -> bool:
    w = linalg.eigvalsh(symmetrize(p))
    return bool(w.size == 0 or (w[0] > 0.0 and w[0] > ratio * w[-1]))


def normalize_det(p: np.ndarray) -> np.ndarray:
    """Scale a positive-definite matrix to determinant 1."""
    sign, logdet = np.linalg.slogdet(p)
    if sign <= 0:
        raise NotPositiveDefiniteError("cannot det-normalize: determinant is not positive")
    n = p.shape[0]
    return symmetrize(p * np.exp(-logdet / n))


def matrix_exp(x: np.ndarray) -> np.ndarray:
    """Matrix exponential (Pade scaling-and-squaring via scipy)."""
    return linalg.expm(require_finite(x))


# ── Subspaces ─────────────────────────────────────────────────

def nullspace(m: np.ndarray, rel_tol: float = NULLSPACE_REL_TOL) -> np.ndarray:
    """Orthonormal kernel basis of an m x k matrix, returned as k x dim columns.

    Singular values <= rel_tol * sigma_max count as zero.
    """
    m = require_finite(m)
    k = m.shape[1]
    if m.shape[0] == 0 or k == 0:
        return np.eye(k)
    _, s, vh = linalg.svd(m, full_matrices=True)
    sigma_max = s[0] if s.size else 0.0
    if sigma_max == 0.0:
        return np.eye(k)
    rank = int(np.sum(s > rel_tol * sigma_max))
    return vh[rank:].T.copy()


def sym_basis(n: int) -> np.ndarray:
    """Frobenius-orthonormal basis of sym(n): E_ii and (E_ij + E_ji)/sqrt(2)."""
    out = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / np.sqrt(2.0)
            out.append(e)
    return np.array(out).reshape(len(out), n, n)


def expand(basis: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients of targets in the span of basis matrices.

    basis: (m, n, n); targets: (t, n, n). Returns (coeffs (t, m),
    residual Frobenius norms (t,)). An empty basis explains nothing.
    """
    targets = np.asarray(targets, dtype=float)
    t = targets.shape[0]
    flat_targets = targets.reshape(t, -1)
    if basis.shape[0] == 0:
        return np.zeros((t, 0)), np.linalg.norm(flat_targets, axis=1)
    flat_basis = basis.reshape(basis.shape[0], -1)
    coeffs, *_ = linalg.lstsq(flat_basis.T, flat_targets.T)
    residual = flat_targets - (flat_basis.T @ coeffs).T
    return coeffs.T, np.linalg.norm(residual, axis=1)


def orthonormalize(
    vectors: list[np.ndarray],
    inner: Callable[[np.ndarray, np.ndarray], float],
    drop_tol: float,
    scales: Optional[Sequence[float]] = None,
) -> tuple[list[np.ndarray], np.ndarray, list[float]]:
    """Modified Gram-Schmidt under an arbitrary inner product.

    Returns (frame, coeffs, ratios): frame[r] = sum_i coeffs[r, i] vectors[i];
    ratios[i] is the residual norm of vector i relative to scales[i]. Vectors
    whose ratio is <= drop_tol are dropped.

    Without `scales` every residual is measured against the largest input
    norm. Callers whose inputs may all be round-off pass a reference scale
    that does not vanish with them.
    """
    count = len(vectors)
    if scales is None:
        norms = [np.sqrt(max(inner(v, v), 0.0)) for v in vectors]
        scales = [max(norms) if norms else 0.0] * count
    elif len(scales) != count:
        raise ValueError(f"{len(scales)} scales for {count} vectors")
    frame: list[np.ndarray] = []
    rows: list[np.ndarray] = []
    ratios: list[float] = []
    for i, v in enumerate(vectors):
        w = np.array(v, dtype=float)
        c = np.zeros(count)
        c[i] = 1.0
        for e, ce in zip(frame, rows):
            proj = inner(w, e)
            w = w - proj * e
            c = c - proj * ce
        r = np.sqrt(max(inner(w, w), 0.0))
        ratio = r / scales[i] if scales[i] > 0.0 else 0.0
        ratios.append(ratio)
        if ratio <= drop_tol:
            continue
        frame.append(w / r)
        rows.append(c / r)
    coeffs = np.array(rows) if rows else np.zeros((0, count))
    return frame, coeffs, ratios


# ── Positive-definite search in a subspace of sym(n) ──────────

def _combine(basis: np.ndarray, c: np.ndarray) -> np.ndarray:
    return symmetrize(np.tensordot(c, basis, axes=1))


def _min_eig_ascent(
    basis: np.ndarray, c0: np.ndarray, iterations: int, accept_ratio: float
) -> Optional[np.ndarray]:
    """Projected subgradient ascent of lambda_min(sum c_i K_i) on |c| = 1."""
    c = c0 / np.linalg.norm(c0)
    for it in range(1, iterations + 1):
        w, q = linalg.eigh(_combine(basis, c))
        if w[0] > 0.0 and w[0] > accept_ratio * w[-1]:
            logger.debug("PD element found after %d ascent steps", it - 1)
            return c
        v = q[:, 0]
        grad = np.einsum("i,kij,j->k", v, basis, v)
        c = c + grad / np.sqrt(it)
        size = np.linalg.norm(c)
        if size <= np.finfo(float).eps:
            logger.debug("Ascent step cancelled the start direction; restart abandoned")
            return None
        c = c / size
    w = linalg.eigvalsh(_combine(basis, c))
    if w[0] > 0.0 and w[0] > accept_ratio * w[-1]:
        return c
    return None


def center_in_cone(basis: np.ndarray, c0: np.ndarray) -> np.ndarray:
    """Maximize log det S(c) over the slice tr S(c) = n, starting at a PD point.

    Damped Newton on the equality-constrained problem; the maximizer is
    unique, so the result does not depend on the starting point. Returns the
    coefficient vector.
    """
    m = basis.shape[0]
    n = basis.shape[1]
    traces = np.einsum("kii->k", basis)
    c = c0 * (n / float(traces @ c0))
    if m == 1:
        return c

    def objective(coeffs):
        sign, logdet = np.linalg.slogdet(_combine(basis, coeffs))
        return logdet if sign > 0 else -np.inf

    value = objective(c)
    for it in range(CENTERING_MAX_ITER):
        s_inv = linalg.inv(_combine(basis, c))
        ws = np.einsum("ij,kjl->kil", s_inv, basis)       # S^-1 K_k
        grad = np.einsum("kii->k", ws)
        hess = -np.einsum("kij,lji->kl", ws, ws)
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = hess
        kkt[:m, m] = traces
        kkt[m, :m] = traces
        rhs = np.concatenate([-grad, [0.0]])
        step = linalg.lstsq(kkt, rhs)[0][:m]
        decrement = float(-step @ hess @ step)
        if decrement / 2.0 <= CENTERING_TOL:
            logger.debug("Centering converged in %d Newton steps", it)
            break
        t = 1.0
        slope = float(grad @ step)
        while t > 1e-12:
            trial = c + t * step
            trial_value = objective(trial)
            if trial_value >= value + 0.25 * t * slope - 1e-15:
                break
            t *= 0.5
        else:
            break
        c, value = trial, trial_value
    return c


def find_positive_definite(
    basis: np.ndarray,
    rng: np.random.Generator,
    iterations: int = PD_SEARCH_ITERATIONS,
    random_restarts: int = PD_RANDOM_RESTARTS,
    accept_ratio: float = PD_ACCEPT_RATIO,
) -> Optional[np.ndarray]:
    """Positive-definite element of span(basis), or None.

    basis: (m, n, n) symmetric, Frobenius-orthonormal. Runs the min-eigenvalue
    ascent from each +-K_i and then from seeded random directions, stops at
    the first acceptance and centers the result (trace n).
    """
    m = basis.shape[0]
    if m == 0:
        return None
    starts = []
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        starts.extend([e, -e])
    if m > 1:
        starts.extend(rng.standard_normal((random_restarts, m)))
    steps = 1 if m == 1 else iterations
    for k, start in enumerate(starts):
        c = _min_eig_ascent(basis, np.asarray(start, dtype=float), steps, accept_ratio)
        if c is not None:
            logger.debug("PD search accepted restart %d of %d", k + 1, len(starts))
            return _combine(basis, center_in_cone(basis, c))
    return None
