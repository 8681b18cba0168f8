"""
Matrix Lie algebras: brackets, structure constants, adjoint representation,
Killing form and Cartan's semisimplicity criterion.

The Killing form is computed from structure constants only, never from the
ambient trace form, so it is intrinsic to the algebra.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from config import (
    INDEPENDENCE_TOL,
    CLOSURE_TOL,
    JACOBI_TOL,
    KILLING_CLOSURE_TOL,
    SEMISIMPLE_REL_TOL,
    TRACE_TOL,
)
from modules.errors import (
    DegenerateBasisError,
    DimensionMismatchError,
    IndexOutOfRangeError,
    NotClosedError,
    ZeroAlgebraError,
)
from modules.numerics import expand, require_finite, symmetrize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LieAlgebraPresentation:
    """Ordered basis of d traceless n x n real matrices."""
    n: int
    basis: np.ndarray                 # (d, n, n)
    name: Optional[str] = None

    @classmethod
    def from_matrices(cls, matrices, name: Optional[str] = None) -> "LieAlgebraPresentation":
        mats = [require_finite(m, "basis element") for m in matrices]
        if not mats:
            raise ZeroAlgebraError("a presentation needs at least one basis element")
        n = mats[0].shape[0]
        for m in mats:
            if m.shape != (n, n):
                raise DimensionMismatchError(f"basis element of shape {m.shape}, expected {(n, n)}")
        return cls(n=n, basis=np.array(mats, dtype=float).reshape(len(mats), n, n), name=name)

    @property
    def d(self) -> int:
        return int(self.basis.shape[0])

    def conjugate(self, g0: np.ndarray) -> "LieAlgebraPresentation":
        g0_inv = linalg.inv(g0)
        return LieAlgebraPresentation(
            n=self.n,
            basis=np.einsum("ij,kjl,lm->kim", g0, self.basis, g0_inv),
            name=self.name,
        )


@dataclass(frozen=True)
class StructureConstants:
    """c[i, j, k] = c_ij^k with [X_i, X_j] = sum_k c_ij^k X_k."""
    tensor: np.ndarray
    closure_residual: float

    @property
    def d(self) -> int:
        return int(self.tensor.shape[0])

    def jacobi_residual(self) -> float:
        """Max Jacobi-identity violation, scaled by max(1, |c|^2)."""
        c = self.tensor
        if c.size == 0:
            return 0.0
        first = np.einsum("ijm,mkl->ijkl", c, c)
        total = (
            first
            + np.einsum("jkil->ijkl", first)
            + np.einsum("kijl->ijkl", first)
        )
        scale = max(1.0, float(np.sum(c * c)))
        return float(np.max(np.abs(total))) / scale


@dataclass(frozen=True)
class KillingMatrix:
    matrix: np.ndarray

    def invariance_residual(self, sc: StructureConstants) -> float:
        """max |B([X_i,X_j], X_k) + B(X_j, [X_i,X_k])| over basis triples."""
        b = self.matrix
        c = sc.tensor
        if c.size == 0:
            return 0.0
        left = np.einsum("ijm,mk->ijk", c, b)
        right = np.einsum("ikm,jm->ijk", c, b)
        return float(np.max(np.abs(left + right)))


@dataclass
class ValidationReport:
    """Presentation invariants: independence, closure, tracelessness."""
    independence: float
    closure_residual: float
    trace_max: float
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "independence": self.independence,
            "closure_residual": self.closure_residual,
            "trace_max": self.trace_max,
            "failures": list(self.failures),
        }


# ── Operations ────────────────────────────────────────────────

def bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Commutator [X, Y] = XY - YX."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionMismatchError(f"cannot bracket shapes {x.shape} and {y.shape}")
    return x @ y - y @ x


def _basis_gram_ratio(basis: np.ndarray) -> float:
    flat = basis.reshape(basis.shape[0], -1)
    w = linalg.eigvalsh(symmetrize(flat @ flat.T))
    if w[-1] <= 0.0:
        return 0.0
    return float(max(w[0], 0.0) / w[-1])


def _pair_brackets(basis: np.ndarray) -> tuple[list[tuple[int, int]], np.ndarray]:
    d = basis.shape[0]
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    if not pairs:
        return pairs, np.zeros((0,) + basis.shape[1:])
    brackets = np.array([bracket(basis[i], basis[j]) for i, j in pairs])
    return pairs, brackets


def _expand_brackets(basis: np.ndarray) -> tuple[np.ndarray, float]:
    d = basis.shape[0]
    tensor = np.zeros((d, d, d))
    pairs, brackets = _pair_brackets(basis)
    if not pairs:
        return tensor, 0.0
    coeffs, residuals = expand(basis, brackets)
    for (i, j), row in zip(pairs, coeffs):
        tensor[i, j] = row
        tensor[j, i] = -row
    return tensor, float(np.max(residuals))


def structure_constants(g: LieAlgebraPresentation) -> StructureConstants:
    """Least-squares structure constants and the closure residual."""
    if g.d == 0:
        raise ZeroAlgebraError("empty basis")
    ratio = _basis_gram_ratio(g.basis)
    if ratio <= INDEPENDENCE_TOL:
        raise DegenerateBasisError(
            f"basis Gram matrix is singular (min/max eigenvalue {ratio:.3e})"
        )
    tensor, residual = _expand_brackets(g.basis)
    logger.debug("Structure constants for %s: closure residual %.3e", g.name, residual)
    return StructureConstants(tensor=tensor, closure_residual=residual)


def adjoint_matrix(sc: StructureConstants, i: int) -> np.ndarray:
    """Matrix of ad X_i on coordinate vectors: column j holds [X_i, X_j]."""
    if not 0 <= i < sc.d:
        raise IndexOutOfRangeError(f"basis index {i} outside 0..{sc.d - 1}")
    return sc.tensor[i].T.copy()


def adjoint_matrices(sc: StructureConstants) -> np.ndarray:
    return np.transpose(sc.tensor, (0, 2, 1)).copy()


def killing_matrix(sc: StructureConstants) -> KillingMatrix:
    """B_ij = tr(ad X_i ad X_j)."""
    if sc.closure_residual > KILLING_CLOSURE_TOL:
        raise NotClosedError(
            f"closure residual {sc.closure_residual:.3e} exceeds {KILLING_CLOSURE_TOL:g}"
        )
    ad = adjoint_matrices(sc)
    b = np.einsum("iab,jba->ij", ad, ad)
    return KillingMatrix(matrix=symmetrize(b))


def is_semisimple(
    b: KillingMatrix, rel_tol: float = SEMISIMPLE_REL_TOL
) -> tuple[bool, float]:
    """Cartan's criterion. Returns (verdict, min|eig| / max|eig|)."""
    if b.matrix.shape[0] == 0:
        raise ZeroAlgebraError("Killing form of the zero algebra")
    w = np.abs(linalg.eigvalsh(b.matrix))
    top = float(np.max(w))
    if top == 0.0:
        return False, 0.0
    witness = float(np.min(w)) / top
    return witness > rel_tol, witness


def validate_presentation(g: LieAlgebraPresentation) -> ValidationReport:
    """Measure the presentation invariants; never raises."""
    if g.d == 0:
        return ValidationReport(0.0, 0.0, 0.0, ["empty basis"])
    independence = _basis_gram_ratio(g.basis)
    _, closure = _expand_brackets(g.basis)
    scale = np.maximum(1.0, np.linalg.norm(g.basis.reshape(g.d, -1), axis=1))
    traces = np.abs(np.einsum("kii->k", g.basis)) / scale
    trace_max = float(np.max(traces))

    failures = []
    if independence <= INDEPENDENCE_TOL:
        failures.append("independence")
    if closure > CLOSURE_TOL:
        failures.append("closure")
    if trace_max > TRACE_TOL:
        failures.append("tracelessness")
    report = ValidationReport(independence, closure, trace_max, failures)
    if failures:
        logger.info("Presentation %s fails: %s", g.name, ", ".join(failures))
    return report


def check_jacobi(sc: StructureConstants, tol: float = JACOBI_TOL) -> bool:
    return sc.jacobi_residual() <= tol
