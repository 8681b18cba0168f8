"""
Minimal orbits by descent on the fixed set of the compact part.

The fixed set Sigma of K is linear in the SPD chart. On Sigma the induced
orbit metric is a constant multiple lambda of a reference one, so the orbit
volume is minimized by minimizing F(P) = log det G(P), G the Gram matrix of
the p Killing fields. Critical points of F on Sigma are minimal, hence
totally geodesic, orbits.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from config import (
    ARMIJO_INITIAL_STEP,
    ARMIJO_MAX_BACKTRACKS,
    ARMIJO_ROUNDOFF_SLACK,
    ARMIJO_SHRINK,
    ARMIJO_SUFFICIENT_DECREASE,
    DEFAULT_MAX_ITER,
    DEFAULT_SEED,
    DIVERGENCE_RADIUS,
    FIXED_SET_CONSTRAINT_TOL,
    MEAN_CURVATURE_TOL,
    MINIMAL_MEAN_CURVATURE_TOL,
    CROSS_PATH_COMPAT_TOL,
    TG_RESIDUAL_TOL,
    NULLSPACE_REL_TOL,
    RANDOM_START_SCALE,
)
from modules.cartan import CartanSplit, compatibility_residuals, validate_cartan_split
from modules.errors import ConstraintViolatedError, EmptyFixedSetError
from modules.numerics import (
    find_positive_definite,
    frobenius,
    normalize_det,
    nullspace,
    orthonormalize,
    sym_basis,
    symmetrize,
)
from modules.spdspace import (
    SpdPoint,
    TangentVector,
    distance,
    geodesic,
    mean_curvature_norm,
    orbit_report,
)

logger = logging.getLogger(__name__)


def _inner(p_inv: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return float(np.sum((p_inv @ u) * (p_inv @ v).T))


def _unit(basis: np.ndarray) -> np.ndarray:
    if basis.shape[0] == 0:
        return basis
    return basis / np.linalg.norm(basis.reshape(basis.shape[0], -1), axis=1)[:, None, None]


# ── Fixed set of the compact part ─────────────────────────────

@dataclass(frozen=True, eq=False)
class FixedSetChart:
    """Linear chart {sum a_i L_i} of Sigma with an interior det-1 point P0."""
    basis: np.ndarray            # (m, n, n), Frobenius-orthonormal
    P0: SpdPoint
    k_basis: np.ndarray          # unit k generators defining the constraints

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])

    def constraint_residual(self, point: SpdPoint) -> float:
        """max ||X P + P X^T|| / ||P|| over the unit k generators."""
        p = point.P
        worst = max((frobenius(x @ p + p @ x.T) for x in self.k_basis), default=0.0)
        return worst / frobenius(p)

    def project(self, p: np.ndarray) -> SpdPoint:
        """Orthogonal projection onto span(L) followed by det normalization."""
        coeffs = np.einsum("aij,ij->a", self.basis, p)
        return SpdPoint.normalized(np.tensordot(coeffs, self.basis, axes=1))

    def tangent_basis(self, point: SpdPoint) -> np.ndarray:
        """U_a = L_a - tr(P^-1 L_a)/n P: chart directions tangent to det 1."""
        n = point.n
        traces = np.einsum("ij,aji->a", point.inv, self.basis)
        return self.basis - (traces / n)[:, None, None] * point.P[None, :, :]


def fixed_set(
    split: CartanSplit,
    rng: Optional[np.random.Generator] = None,
    rel_tol: float = NULLSPACE_REL_TOL,
) -> FixedSetChart:
    if rng is None:
        rng = np.random.default_rng(DEFAULT_SEED)
    n = split.n
    e = sym_basis(n)
    k = _unit(split.k_basis)
    if k.shape[0]:
        ops = np.einsum("kij,ajl->akil", k, e) + np.einsum("aij,klj->akil", e, k)
        kernel = nullspace(ops.reshape(e.shape[0], -1).T, rel_tol)
    else:
        kernel = np.eye(e.shape[0])
    if kernel.shape[1] == 0:
        raise EmptyFixedSetError(
            "no symmetric matrix is fixed by the compact part", _compactness_diagnosis(split)
        )
    basis = np.einsum("ak,aij->kij", kernel, e)
    s = find_positive_definite(basis, rng)
    if s is None:
        raise EmptyFixedSetError(
            f"fixed-set chart of dimension {basis.shape[0]} contains no positive-definite point",
            _compactness_diagnosis(split),
        )
    chart = FixedSetChart(basis=basis, P0=SpdPoint.normalized(s), k_basis=k)
    logger.info("Fixed set of %s: dimension %d", split.g.name, chart.dimension)
    return chart


def _compactness_diagnosis(split: CartanSplit) -> dict:
    """Largest Killing eigenvalue on k; non-negative means k is not compact."""
    report = validate_cartan_split(split)
    return {"killing_k_max": report.killing_k_max, "compact": report.killing_k_max is None
            or report.killing_k_max < 0.0}


def random_fixed_point(
    chart: FixedSetChart, rng: np.random.Generator, scale: float = RANDOM_START_SCALE
) -> SpdPoint:
    """Seeded point of Sigma at geodesic distance `scale` from P0."""
    p0 = chart.P0
    tangents = chart.tangent_basis(p0)
    # residuals are measured against the chart directions before the det-1 projection
    scales = [np.sqrt(max(_inner(p0.inv, l, l), 0.0)) for l in chart.basis]
    frame, _, _ = orthonormalize(
        list(tangents), lambda a, b: _inner(p0.inv, a, b), 1e-10, scales=scales
    )
    if not frame:
        return p0
    c = rng.standard_normal(len(frame))
    c *= scale / np.linalg.norm(c)
    u = symmetrize(sum(ci * f for ci, f in zip(c, frame)))
    return chart.project(geodesic(p0, TangentVector(p0, u)).evaluate(1.0).P)


# ── Scale function ────────────────────────────────────────────

@dataclass
class LambdaProfile:
    point: SpdPoint
    gram: np.ndarray
    lam: float
    proportionality_residual: float

    def to_dict(self) -> dict:
        return {
            "point": self.point.P.ravel().tolist(),
            "gram": self.gram.ravel().tolist(),
            "lambda": self.lam,
            "proportionality_residual": self.proportionality_residual,
        }


class VolumeObjective:
    """F(P) = log det G(P) over a p-basis orthonormalized at the reference point."""

    def __init__(self, split: CartanSplit, reference: SpdPoint):
        self.reference = reference
        p_basis = split.p_basis
        self.basis = p_basis
        if p_basis.shape[0]:
            g_ref = self._gram(p_basis, reference)
            lower = linalg.cholesky(g_ref, lower=True)
            transform = linalg.solve_triangular(lower, np.eye(lower.shape[0]), lower=True)
            self.basis = np.einsum("ij,jab->iab", transform, p_basis)

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[0])

    @staticmethod
    def _fields(basis: np.ndarray, point: SpdPoint) -> np.ndarray:
        return basis @ point.P + point.P @ np.transpose(basis, (0, 2, 1))

    @classmethod
    def _gram(cls, basis: np.ndarray, point: SpdPoint) -> np.ndarray:
        m = point.inv @ cls._fields(basis, point)            # P^-1 W_i
        return symmetrize(np.einsum("iab,jba->ij", m, m))

    def gram(self, point: SpdPoint) -> np.ndarray:
        return self._gram(self.basis, point)

    def value(self, point: SpdPoint) -> float:
        if self.dimension == 0:
            return 0.0
        sign, logdet = np.linalg.slogdet(self.gram(point))
        return float(logdet) if sign > 0 else -np.inf

    def directional_derivative(self, point: SpdPoint, u: np.ndarray) -> float:
        """dF(P)[U] = tr(G^-1 dG[U]) from the analytic derivative of each entry."""
        if self.dimension == 0:
            return 0.0
        a = point.inv
        basis = self.basis
        w = self._fields(basis, point)
        dw = basis @ u + u @ np.transpose(basis, (0, 2, 1))
        aua = a @ u @ a
        m = a @ w                      # A W_i
        q = aua @ w                    # A U A W_i
        nd = a @ dw                    # A dW_i
        dg = (
            -np.einsum("iab,jba->ij", q, m)
            - np.einsum("iab,jba->ij", m, q)
            + np.einsum("iab,jba->ij", nd, m)
            + np.einsum("iab,jba->ij", m, nd)
        )
        g = self.gram(point)
        return float(np.trace(linalg.solve(g, dg, assume_a="pos")))

    def gradient(self, point: SpdPoint, chart: FixedSetChart) -> tuple[TangentVector, float]:
        """Riemannian gradient of F restricted to Sigma, and its norm."""
        tangents = chart.tangent_basis(point)
        if self.dimension == 0 or tangents.shape[0] == 0:
            return TangentVector(point, np.zeros((point.n, point.n))), 0.0
        p_inv = point.inv
        count = tangents.shape[0]
        metric = np.zeros((count, count))
        for i in range(count):
            for j in range(i, count):
                metric[i, j] = metric[j, i] = _inner(p_inv, tangents[i], tangents[j])
        d = np.array([self.directional_derivative(point, t) for t in tangents])
        coeffs = np.linalg.pinv(metric, rcond=1e-10, hermitian=True) @ d
        grad = symmetrize(np.tensordot(coeffs, tangents, axes=1))
        return TangentVector(point, grad), float(np.sqrt(max(coeffs @ d, 0.0)))


def _require_on_chart(chart: FixedSetChart, point: SpdPoint, what: str):
    residual = chart.constraint_residual(point)
    if residual > FIXED_SET_CONSTRAINT_TOL:
        raise ConstraintViolatedError(f"{what} is not fixed by the compact part (residual {residual:.3e})")


def lambda_value(
    split: CartanSplit, chart: FixedSetChart, point: SpdPoint, reference: SpdPoint
) -> LambdaProfile:
    """lambda = tr G(P) / tr G(P_ref) and the deviation of G(P) from lambda G(P_ref)."""
    _require_on_chart(chart, point, "point")
    _require_on_chart(chart, reference, "reference point")
    objective = VolumeObjective(split, reference)
    g = objective.gram(point)
    m = objective.dimension
    if m == 0:
        return LambdaProfile(point, g, 1.0, 0.0)
    lam = float(np.trace(g)) / m
    residual = frobenius(g - lam * np.eye(m)) / np.sqrt(m)
    return LambdaProfile(point, g, lam, residual)


def lambda_profile(
    split: CartanSplit, chart: FixedSetChart, points: Sequence[SpdPoint], reference: SpdPoint
) -> list[LambdaProfile]:
    return [lambda_value(split, chart, p, reference) for p in points]


# ── Descent ───────────────────────────────────────────────────

@dataclass(frozen=True)
class StepConfig:
    initial: float = ARMIJO_INITIAL_STEP
    shrink: float = ARMIJO_SHRINK
    sufficient_decrease: float = ARMIJO_SUFFICIENT_DECREASE
    max_backtracks: int = ARMIJO_MAX_BACKTRACKS
    roundoff_slack: float = ARMIJO_ROUNDOFF_SLACK


@dataclass
class DescentStep:
    iteration: int
    objective: float
    gradient_norm: float
    mean_curvature_norm: float
    distance_from_start: float
    point_norm: float
    step: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
            "mean_curvature_norm": self.mean_curvature_norm,
            "distance_from_start": self.distance_from_start,
            "point_norm": self.point_norm,
            "step": self.step,
        }


@dataclass
class MinimizationResult:
    point: SpdPoint
    iterations: int
    final_gradient_norm: float
    mean_curvature_norm: float
    converged: bool
    diverged: bool
    history: list[DescentStep] = field(default_factory=list)

    def to_dict(self, include_history: bool = True) -> dict:
        out = {
            "P_star": self.point.P.ravel().tolist(),
            "iterations": self.iterations,
            "final_gradient_norm": self.final_gradient_norm,
            "mean_curvature_norm": self.mean_curvature_norm,
            "converged": self.converged,
            "diverged": self.diverged,
        }
        if include_history or self.diverged:
            out["history"] = [s.to_dict() for s in self.history]
        return out


def minimize_volume(
    split: CartanSplit,
    chart: FixedSetChart,
    max_iter: int = DEFAULT_MAX_ITER,
    step_cfg: Optional[StepConfig] = None,
    start: Optional[SpdPoint] = None,
    radius: float = DIVERGENCE_RADIUS,
    tol: float = MEAN_CURVATURE_TOL,
) -> MinimizationResult:
    """Armijo descent of log det G along geodesics of Sigma."""
    cfg = step_cfg or StepConfig()
    objective = VolumeObjective(split, chart.P0)
    point = chart.project((start or chart.P0).P)
    value = objective.value(point)
    history: list[DescentStep] = []
    accepted = 0
    converged = diverged = False
    grad_norm = h_norm = 0.0

    for it in range(max_iter + 1):
        h_norm = mean_curvature_norm(split, point)
        grad, grad_norm = objective.gradient(point, chart)
        history.append(DescentStep(it, value, grad_norm, h_norm,
                                   distance(chart.P0, point), frobenius(point.P)))
        if h_norm <= tol:
            converged = True
            break
        if it == max_iter or grad_norm == 0.0:
            break
        eta = cfg.initial
        trial = None
        for _ in range(cfg.max_backtracks):
            candidate = chart.project(geodesic(point, grad * -eta).evaluate(1.0).P)
            candidate_value = objective.value(candidate)
            if candidate_value <= value - cfg.sufficient_decrease * eta * grad_norm ** 2 + cfg.roundoff_slack:
                trial = candidate
                break
            eta *= cfg.shrink
        if trial is None:
            logger.warning("Line search stalled at iteration %d (gradient norm %.3e)", it, grad_norm)
            break
        history[-1].step = eta
        point, value = trial, candidate_value
        accepted += 1
        logger.debug("descent %d: F=%.12g |grad|=%.3e |H|=%.3e eta=%g", it, value, grad_norm, h_norm, eta)
        if distance(chart.P0, point) > radius:
            diverged = True
            h_norm = mean_curvature_norm(split, point)
            grad_norm = objective.gradient(point, chart)[1]
            history.append(DescentStep(it + 1, value, grad_norm, h_norm,
                                       distance(chart.P0, point), frobenius(point.P)))
            logger.warning("Descent left the radius-%g ball around P0 after %d steps", radius, accepted)
            break

    return MinimizationResult(
        point=point,
        iterations=accepted,
        final_gradient_norm=grad_norm,
        mean_curvature_norm=h_norm,
        converged=converged,
        diverged=diverged,
        history=history,
    )


# ── Minimality certificate ────────────────────────────────────

@dataclass
class MinimalityCertificate:
    mean_curvature_norm: float
    k_residual: float
    p_residual: float
    tg_residual: float

    @property
    def compat_residual(self) -> float:
        return max(self.k_residual, self.p_residual)

    @property
    def passed(self) -> bool:
        return (self.mean_curvature_norm <= MINIMAL_MEAN_CURVATURE_TOL
                and self.tg_residual <= TG_RESIDUAL_TOL
                and self.compat_residual <= CROSS_PATH_COMPAT_TOL)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "mean_curvature_norm": self.mean_curvature_norm,
            "compat_residuals": {"k": self.k_residual, "p": self.p_residual},
            "tg_residual": self.tg_residual,
        }


def certify_minimal(split: CartanSplit, point: SpdPoint) -> MinimalityCertificate:
    """Mean curvature, compatibility of (P*)^-1 and max |II| at P*."""
    report = orbit_report(split, point)
    k_res, p_res = compatibility_residuals(split, normalize_det(point.inv))
    cert = MinimalityCertificate(
        mean_curvature_norm=report.mean_curvature_norm,
        k_residual=k_res,
        p_residual=p_res,
        tg_residual=report.max_sff_norm,
    )
    logger.info("Minimality certificate: |H|=%.3e, compat=%.3e, |II|=%.3e (%s)",
                cert.mean_curvature_norm, cert.compat_residual, cert.tg_residual,
                "pass" if cert.passed else "fail")
    return cert
