"""
Cartan splits of matrix Lie algebras and the compatibility solver.

Given g = k + p inside sl(n), compatible_metric finds a positive-definite
inner product S whose Cartan involution X -> -S^-1 X^T S fixes k and
negates p. The real invariance conditions X^T S + S X = 0 (X in k) and
Y^T S - S Y = 0 (Y in p) are linear in S, so the solution set is the
kernel of one stacked operator on sym(n); a positive-definite element of
that kernel is the certificate.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from config import (
    CERT_EIG_RATIO_TOL,
    COMPAT_RESIDUAL_TOL,
    DEFAULT_SEED,
    KILLING_SIGN_REL_TOL,
    MEMBERSHIP_TOL,
    NULLSPACE_REL_TOL,
    SEMISIMPLE_REL_TOL,
    SINGULAR_DET_TOL,
    SLICE_SAMPLES,
    TRIPLE_SYSTEM_TOL,
)
from modules.errors import (
    DegenerateBasisError,
    EmptyKernelError,
    IncompatibleInputsError,
    IndexOutOfRangeError,
    NoPositiveDefiniteElementError,
    NotClosedError,
    NotPositiveDefiniteError,
    SingularMatrixError,
)
from modules.liealg import (
    LieAlgebraPresentation,
    bracket,
    is_semisimple,
    killing_matrix,
    structure_constants,
)
from modules.numerics import (
    expand,
    find_positive_definite,
    frobenius,
    is_positive_definite,
    matrix_exp,
    normalize_det,
    nullspace,
    require_finite,
    sym_basis,
    symmetrize,
)
from modules.spdspace import SpdPoint, act, orbit_report

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CartanSplit:
    """Presentation plus a partition of its basis indices into k and p."""
    g: LieAlgebraPresentation
    k_idx: tuple[int, ...]
    p_idx: tuple[int, ...]

    def __post_init__(self):
        k = tuple(int(i) for i in self.k_idx)
        p = tuple(int(i) for i in self.p_idx)
        object.__setattr__(self, "k_idx", k)
        object.__setattr__(self, "p_idx", p)
        d = self.g.d
        for i in k + p:
            if not 0 <= i < d:
                raise IndexOutOfRangeError(f"split index {i} outside 0..{d - 1}")
        if sorted(k + p) != list(range(d)):
            raise IndexOutOfRangeError("k and p indices must partition the basis")

    @property
    def n(self) -> int:
        return self.g.n

    @property
    def k_basis(self) -> np.ndarray:
        return self.g.basis[np.asarray(self.k_idx, dtype=int)].reshape(-1, self.n, self.n)

    @property
    def p_basis(self) -> np.ndarray:
        return self.g.basis[np.asarray(self.p_idx, dtype=int)].reshape(-1, self.n, self.n)


def _unit(basis: np.ndarray) -> np.ndarray:
    if basis.shape[0] == 0:
        return basis
    norms = np.linalg.norm(basis.reshape(basis.shape[0], -1), axis=1)
    return basis / norms[:, None, None]


# ── Split validation ──────────────────────────────────────────

@dataclass
class SplitReport:
    """Bracket relations and Killing signs of a split, each pass/fail."""
    kk_residual: float = 0.0
    kp_residual: float = 0.0
    pp_residual: float = 0.0
    killing_k_max: Optional[float] = None     # largest eigenvalue of B on k, relative
    killing_p_min: Optional[float] = None     # smallest eigenvalue of B on p, relative
    semisimple_witness: float = 0.0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def margins(self) -> dict[str, float]:
        """Per clause: value / threshold. A margin >= 1 means the clause fails."""
        tiny = 1e-300
        out = {
            "[k,k] in k": self.kk_residual / MEMBERSHIP_TOL,
            "[k,p] in p": self.kp_residual / MEMBERSHIP_TOL,
            "[p,p] in k": self.pp_residual / MEMBERSHIP_TOL,
            "semisimple": SEMISIMPLE_REL_TOL / max(self.semisimple_witness, tiny),
        }
        if self.killing_k_max is not None:
            out["Killing negative on k"] = KILLING_SIGN_REL_TOL / max(-self.killing_k_max, tiny)
        if self.killing_p_min is not None:
            out["Killing positive on p"] = KILLING_SIGN_REL_TOL / max(self.killing_p_min, tiny)
        return out

    def diagnosis(self) -> dict:
        margins = self.margins()
        worst = max(margins, key=margins.get)
        return {"closest_to_failing": worst, "margins": margins}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "kk_residual": self.kk_residual,
            "kp_residual": self.kp_residual,
            "pp_residual": self.pp_residual,
            "killing_k_max": self.killing_k_max,
            "killing_p_min": self.killing_p_min,
            "semisimple_witness": self.semisimple_witness,
            "failures": list(self.failures),
        }


def _membership_residual(left: np.ndarray, right: np.ndarray, target: np.ndarray) -> float:
    """Max residual of [a, b] (a in left, b in right) expanded in target."""
    if left.shape[0] == 0 or right.shape[0] == 0:
        return 0.0
    products = np.array([bracket(a, b) for a in left for b in right])
    _, residuals = expand(target, products)
    scale = np.maximum(1.0, np.linalg.norm(products.reshape(products.shape[0], -1), axis=1))
    return float(np.max(residuals / scale))


def validate_cartan_split(split: CartanSplit) -> SplitReport:
    """Measure every Cartan split clause; never raises."""
    k, p = split.k_basis, split.p_basis
    report = SplitReport(
        kk_residual=_membership_residual(k, k, k),
        kp_residual=_membership_residual(k, p, p),
        pp_residual=_membership_residual(p, p, k),
    )
    for name, value in (("[k,k] in k", report.kk_residual),
                        ("[k,p] in p", report.kp_residual),
                        ("[p,p] in k", report.pp_residual)):
        if value > MEMBERSHIP_TOL:
            report.failures.append(name)

    try:
        b = killing_matrix(structure_constants(split.g))
    except (DegenerateBasisError, NotClosedError) as e:
        report.failures.append(f"structure: {e}")
        return report

    semisimple, witness = is_semisimple(b)
    report.semisimple_witness = witness
    if not semisimple:
        report.failures.append("semisimple")

    scale = float(np.max(np.abs(linalg.eigvalsh(b.matrix)))) or 1.0
    if split.k_idx:
        block = b.matrix[np.ix_(split.k_idx, split.k_idx)]
        report.killing_k_max = float(linalg.eigvalsh(block)[-1]) / scale
        if report.killing_k_max >= -KILLING_SIGN_REL_TOL:
            report.failures.append("Killing negative on k")
    if split.p_idx:
        block = b.matrix[np.ix_(split.p_idx, split.p_idx)]
        report.killing_p_min = float(linalg.eigvalsh(block)[0]) / scale
        if report.killing_p_min <= KILLING_SIGN_REL_TOL:
            report.failures.append("Killing positive on p")

    if report.failures:
        logger.info("Cartan split of %s fails: %s", split.g.name, ", ".join(report.failures))
    return report


# ── Compatibility solver ──────────────────────────────────────

@dataclass(frozen=True, eq=False)
class CompatibilityCertificate:
    S: np.ndarray
    k_residual: float
    p_residual: float
    min_eig_S: float
    eig_ratio_S: float          # lambda_min / lambda_max
    kernel_dim: int
    base_point: SpdPoint

    @property
    def ok(self) -> bool:
        return (self.k_residual <= COMPAT_RESIDUAL_TOL
                and self.p_residual <= COMPAT_RESIDUAL_TOL
                and self.min_eig_S > 0.0
                and self.eig_ratio_S >= CERT_EIG_RATIO_TOL)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "S": self.S.ravel().tolist(),
            "k_residual": self.k_residual,
            "p_residual": self.p_residual,
            "min_eig_S": self.min_eig_S,
            "eig_ratio_S": self.eig_ratio_S,
            "kernel_dim": self.kernel_dim,
            "base_point": self.base_point.P.ravel().tolist(),
        }


def compatibility_residuals(split: CartanSplit, s: np.ndarray) -> tuple[float, float]:
    """(max ||X^T S + S X|| / ||S|| over k, max ||Y^T S - S Y|| / ||S|| over p)."""
    s_norm = frobenius(s)
    k_res = max((frobenius(x.T @ s + s @ x) for x in _unit(split.k_basis)), default=0.0)
    p_res = max((frobenius(y.T @ s - s @ y) for y in _unit(split.p_basis)), default=0.0)
    return k_res / s_norm, p_res / s_norm


def constraint_operator(split: CartanSplit) -> np.ndarray:
    """Stacked (d n^2) x (n(n+1)/2) matrix of S -> (X^T S + S X, Y^T S - S Y)."""
    e = sym_basis(split.n)
    blocks = []
    k = _unit(split.k_basis)
    if k.shape[0]:
        blocks.append(np.einsum("kji,ajl->akil", k, e) + np.einsum("aij,kjl->akil", e, k))
    p = _unit(split.p_basis)
    if p.shape[0]:
        blocks.append(np.einsum("kji,ajl->akil", p, e) - np.einsum("aij,kjl->akil", e, p))
    if not blocks:
        return np.zeros((0, e.shape[0]))
    columns = np.concatenate([b.reshape(e.shape[0], -1) for b in blocks], axis=1)
    return columns.T


def compatible_metric(
    split: CartanSplit,
    rel_tol: float = NULLSPACE_REL_TOL,
    rng: Optional[np.random.Generator] = None,
) -> CompatibilityCertificate:
    """Positive-definite S, det 1, whose Cartan involution contains the split."""
    if rng is None:
        rng = np.random.default_rng(DEFAULT_SEED)
    e = sym_basis(split.n)
    kernel = nullspace(constraint_operator(split), rel_tol)
    kernel_dim = int(kernel.shape[1])
    logger.debug("Compatibility kernel of %s: dimension %d", split.g.name, kernel_dim)
    if kernel_dim == 0:
        diagnosis = validate_cartan_split(split).diagnosis()
        raise EmptyKernelError(
            f"no symmetric S satisfies the compatibility constraints; "
            f"closest clause: {diagnosis['closest_to_failing']}",
            diagnosis,
        )
    kernel_basis = np.einsum("ak,aij->kij", kernel, e)
    s = find_positive_definite(kernel_basis, rng)
    if s is None:
        diagnosis = validate_cartan_split(split).diagnosis()
        raise NoPositiveDefiniteElementError(
            f"compatibility kernel of dimension {kernel_dim} has no positive-definite element; "
            f"closest clause: {diagnosis['closest_to_failing']}",
            diagnosis,
        )
    s = normalize_det(s)
    k_res, p_res = compatibility_residuals(split, s)
    eigs = linalg.eigvalsh(s)
    cert = CompatibilityCertificate(
        S=s,
        k_residual=k_res,
        p_residual=p_res,
        min_eig_S=float(eigs[0]),
        eig_ratio_S=float(eigs[0] / eigs[-1]),
        kernel_dim=kernel_dim,
        base_point=base_point(s),
    )
    logger.info("Compatible metric for %s: kernel_dim=%d, residuals k=%.2e p=%.2e",
                split.g.name, kernel_dim, k_res, p_res)
    return cert


def base_point(s: np.ndarray) -> SpdPoint:
    """P = S^-1, the point whose isotropy contains the compact part of the split."""
    s = symmetrize(require_finite(s, "inner product"))
    if not is_positive_definite(s):
        raise NotPositiveDefiniteError("inner product S is not positive definite")
    return SpdPoint.normalized(linalg.inv(s))


def isotropy_residual(split: CartanSplit, point: SpdPoint) -> float:
    """max ||X P + P X^T|| / ||P|| over the unit k-basis."""
    p = point.P
    return max((frobenius(x @ p + p @ x.T) for x in _unit(split.k_basis)), default=0.0) / frobenius(p)


def conjugate_presentation(g0: np.ndarray, split: CartanSplit) -> CartanSplit:
    """Basis X_i -> g0 X_i g0^-1 with g0 rescaled to |det| = 1."""
    g0 = require_finite(g0, "conjugating matrix")
    s = linalg.svdvals(g0)
    if s[-1] <= SINGULAR_DET_TOL * s[0]:
        raise SingularMatrixError(f"conjugating matrix is singular (condition {s[0] / max(s[-1], 1e-300):.3e})")
    det = float(np.linalg.det(g0))
    g0 = g0 / abs(det) ** (1.0 / g0.shape[0])
    return CartanSplit(split.g.conjugate(g0), split.k_idx, split.p_idx)


def random_conjugator(n: int, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """Seeded well-conditioned element of SL(n): expm of a random traceless matrix."""
    x = rng.standard_normal((n, n)) * spread / np.sqrt(n)
    x -= np.trace(x) / n * np.eye(n)
    return matrix_exp(x)


# ── Ambient Cartan decomposition ──────────────────────────────

def _standard_traceless_basis(n: int) -> np.ndarray:
    out = []
    for i in range(n):
        for j in range(n):
            if i != j:
                e = np.zeros((n, n))
                e[i, j] = 1.0
                out.append(e)
    for i in range(n - 1):
        e = np.zeros((n, n))
        e[i, i], e[i + 1, i + 1] = 1.0, -1.0
        out.append(e)
    return np.array(out).reshape(len(out), n, n)


def _span(mats: np.ndarray) -> np.ndarray:
    n = mats.shape[1]
    flat = mats.reshape(mats.shape[0], -1)
    cols = linalg.orth(flat.T)
    return cols.T.reshape(cols.shape[1], n, n)


@dataclass(frozen=True, eq=False)
class AmbientSplit:
    """sl(n) = A + S-part for the involution theta(X) = -S^-1 X^T S."""
    S: np.ndarray
    A_basis: np.ndarray
    S_basis: np.ndarray

    def involution(self, x: np.ndarray) -> np.ndarray:
        return -linalg.solve(self.S, x.T @ self.S)

    def residuals(self) -> dict[str, float]:
        std = _standard_traceless_basis(self.S.shape[0])
        theta = [self.involution(x) for x in std]
        squared = max(frobenius(self.involution(t) - x) / frobenius(x) for x, t in zip(std, theta))
        auto = 0.0
        for i, x in enumerate(std):
            for j in range(i + 1, len(std)):
                lhs = self.involution(bracket(x, std[j]))
                rhs = bracket(theta[i], theta[j])
                auto = max(auto, frobenius(lhs - rhs) / max(1.0, frobenius(lhs)))
        return {"involution_squared": squared, "automorphism": auto}

    def containment_residuals(self, split: CartanSplit) -> tuple[float, float]:
        """Relative residuals of k in A and p in the S-part."""
        k, p = _unit(split.k_basis), _unit(split.p_basis)
        k_res = float(np.max(expand(self.A_basis, k)[1])) if k.shape[0] else 0.0
        p_res = float(np.max(expand(self.S_basis, p)[1])) if p.shape[0] else 0.0
        return k_res, p_res


def ambient_split(s: np.ndarray) -> AmbientSplit:
    s = symmetrize(require_finite(s, "inner product"))
    if not is_positive_definite(s):
        raise NotPositiveDefiniteError("ambient split needs a positive-definite S")
    std = _standard_traceless_basis(s.shape[0])
    theta = np.array([-linalg.solve(s, x.T @ s) for x in std])
    amb = AmbientSplit(S=s, A_basis=_span(0.5 * (std + theta)), S_basis=_span(0.5 * (std - theta)))
    logger.debug("Ambient split: dim A=%d, dim S-part=%d", amb.A_basis.shape[0], amb.S_basis.shape[0])
    return amb


# ── Normal Lie triple system ──────────────────────────────────

@dataclass(frozen=True, eq=False)
class TripleSystemBasis:
    """n = {Y in S-part : Y trace-orthogonal to p, [Y, p] = 0}."""
    basis: np.ndarray
    orthogonality_residual: float
    commutation_residual: float
    triple_residual: float
    product_residual: float

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])

    @property
    def ok(self) -> bool:
        return max(self.triple_residual, self.product_residual) <= TRIPLE_SYSTEM_TOL

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "basis": [b.ravel().tolist() for b in self.basis],
            "orthogonality_residual": self.orthogonality_residual,
            "commutation_residual": self.commutation_residual,
            "triple_residual": self.triple_residual,
            "product_residual": self.product_residual,
        }


def triple_closure_residual(basis: np.ndarray) -> float:
    """Max residual of [[a,b],c] expanded in span(basis), unit basis elements."""
    basis = _unit(basis)
    m = basis.shape[0]
    if m == 0:
        return 0.0
    targets = np.array([
        bracket(bracket(basis[a], basis[b]), basis[c])
        for a in range(m) for b in range(a + 1, m) for c in range(m)
    ]).reshape(-1, basis.shape[1], basis.shape[2])
    if targets.shape[0] == 0:
        return 0.0
    return float(np.max(expand(basis, targets)[1]))


def normal_triple_system(split: CartanSplit, amb: AmbientSplit) -> TripleSystemBasis:
    k_res, p_res = compatibility_residuals(split, amb.S)
    if max(k_res, p_res) > COMPAT_RESIDUAL_TOL:
        raise IncompatibleInputsError(
            f"split is not compatible with S (residuals k={k_res:.3e}, p={p_res:.3e})"
        )
    n = split.n
    b = amb.S_basis
    p = _unit(split.p_basis)
    rows = []
    for y in p:
        comm = np.einsum("aij,jk->aik", b, y) - np.einsum("ij,ajk->aik", y, b)
        rows.append(comm.reshape(b.shape[0], -1).T)
        rows.append(np.einsum("aij,ji->a", b, y)[None, :])
    m = np.concatenate(rows, axis=0) if rows else np.zeros((0, b.shape[0]))
    coeffs = nullspace(m)
    basis = np.einsum("ak,aij->kij", coeffs, b).reshape(coeffs.shape[1], n, n)

    ortho = comm_res = 0.0
    for y in basis:
        for x in p:
            ortho = max(ortho, abs(float(np.sum(y * x.T))))
            comm_res = max(comm_res, frobenius(bracket(y, x)))
    product = np.concatenate([p, basis], axis=0)
    triple = TripleSystemBasis(
        basis=basis,
        orthogonality_residual=ortho,
        commutation_residual=comm_res,
        triple_residual=triple_closure_residual(basis),
        product_residual=triple_closure_residual(product),
    )
    logger.info("Normal triple system of %s: dimension %d", split.g.name, triple.dimension)
    return triple


def p_generates_k(split: CartanSplit) -> bool:
    """True when k = [p, p], i.e. g has no compact ideal."""
    k = split.k_basis
    if k.shape[0] == 0:
        return True
    p = split.p_basis
    if p.shape[0] < 2:
        return False
    brackets = np.array([bracket(p[i], p[j]) for i in range(len(p)) for j in range(i + 1, len(p))])
    _, residuals = expand(brackets, _unit(k))
    return bool(np.max(residuals) <= MEMBERSHIP_TOL)


@dataclass
class SliceSample:
    direction: int
    t: float
    mean_curvature_norm: float
    max_sff_norm: float

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "t": self.t,
            "mean_curvature_norm": self.mean_curvature_norm,
            "max_sff_norm": self.max_sff_norm,
        }


def totally_geodesic_slice(
    split: CartanSplit,
    point: SpdPoint,
    triple: TripleSystemBasis,
    samples: Sequence[float] = SLICE_SAMPLES,
) -> list[SliceSample]:
    """Orbit geometry at exp(tY).P for Y in n; empty unless k = [p, p]."""
    if triple.dimension == 0 or not p_generates_k(split):
        return []
    out = []
    for i, y in enumerate(triple.basis):
        for t in samples:
            report = orbit_report(split, act(matrix_exp(t * y), point))
            out.append(SliceSample(i, float(t), report.mean_curvature_norm, report.max_sff_norm))
    return out
