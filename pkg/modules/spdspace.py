"""
The symmetric space of determinant-1 positive-definite matrices,
SL(n)/SO(n), with the affine-invariant metric <U,V>_P = tr(P^-1 U P^-1 V).

Group action g.P = g P g^T, Killing fields X.P = XP + PX^T, geodesics,
curvature, and the extrinsic geometry of group orbits: second fundamental
form, mean curvature and the variational function f(t) along normal
geodesics.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from scipy import linalg

from config import (
    DEGENERATE_PLANE_TOL,
    FD_STEP,
    NORMALITY_TOL,
    ORBIT_DROP_TOL,
    ORBIT_RANK_GAP,
    SINGULAR_DET_TOL,
    TANGENT_TRACE_TOL,
)
from modules.errors import (
    BaseMismatchError,
    DegenerateOrbitError,
    DegeneratePlaneError,
    NotNormalError,
    NotPositiveDefiniteError,
    NotTracelessError,
    SingularMatrixError,
)
from modules.numerics import (
    frobenius,
    normalize_det,
    nullspace,
    orthonormalize,
    require_finite,
    spd_map,
    sym_basis,
    symmetrize,
)

if TYPE_CHECKING:
    from modules.cartan import CartanSplit

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpdPoint:
    """Positive-definite matrix; a point of SL(n)/SO(n) when det P = 1."""
    P: np.ndarray

    def __post_init__(self):
        p = symmetrize(require_finite(self.P, "SPD point"))
        w = linalg.eigvalsh(p)
        if w[0] <= 0.0:
            raise NotPositiveDefiniteError(f"min eigenvalue {w[0]:.3e} is not positive")
        object.__setattr__(self, "P", p)

    @classmethod
    def normalized(cls, matrix: np.ndarray) -> "SpdPoint":
        return cls(normalize_det(symmetrize(matrix)))

    @classmethod
    def identity(cls, n: int) -> "SpdPoint":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return int(self.P.shape[0])

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.P))

    @cached_property
    def inv(self) -> np.ndarray:
        return spd_map(self.P, "inv")

    @cached_property
    def sqrt(self) -> np.ndarray:
        return spd_map(self.P, "sqrt")

    @cached_property
    def inv_sqrt(self) -> np.ndarray:
        return spd_map(self.P, "inv_sqrt")

    def same_as(self, other: "SpdPoint") -> bool:
        if self is other:
            return True
        return self.P.shape == other.P.shape and np.allclose(
            self.P, other.P, rtol=0.0, atol=1e-12 * max(1.0, frobenius(self.P))
        )


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Symmetric matrix U tangent to the det-1 slice at base: tr(P^-1 U) = 0."""
    base: SpdPoint
    U: np.ndarray

    @classmethod
    def at(cls, base: SpdPoint, u: np.ndarray) -> "TangentVector":
        u = symmetrize(require_finite(u, "tangent vector"))
        pu = base.inv @ u
        if abs(np.trace(pu)) > TANGENT_TRACE_TOL * max(1.0, frobenius(pu)):
            raise NotTracelessError(f"tr(P^-1 U) = {np.trace(pu):.3e}, not tangent to det 1")
        return cls(base, u)

    def __add__(self, other: "TangentVector") -> "TangentVector":
        _check_base(self.base, other.base)
        return TangentVector(self.base, self.U + other.U)

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        _check_base(self.base, other.base)
        return TangentVector(self.base, self.U - other.U)

    def __mul__(self, scalar: float) -> "TangentVector":
        return TangentVector(self.base, float(scalar) * self.U)

    __rmul__ = __mul__

    def __neg__(self) -> "TangentVector":
        return TangentVector(self.base, -self.U)


@dataclass(frozen=True, eq=False)
class GeodesicSegment:
    """t -> P^1/2 exp(t W) P^1/2 with W = P^-1/2 V P^-1/2."""
    base: SpdPoint
    direction: TangentVector

    @cached_property
    def _spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        s_inv = self.base.inv_sqrt
        w = symmetrize(s_inv @ self.direction.U @ s_inv)
        w = w - np.trace(w) / self.base.n * np.eye(self.base.n)
        return linalg.eigh(w)

    def evaluate(self, t: float) -> SpdPoint:
        w, q = self._spectrum
        s = self.base.sqrt
        return SpdPoint(s @ ((q * np.exp(t * w)) @ q.T) @ s)

    def velocity(self, t: float) -> TangentVector:
        w, q = self._spectrum
        s = self.base.sqrt
        return TangentVector(self.evaluate(t), symmetrize(s @ ((q * (w * np.exp(t * w))) @ q.T) @ s))

    def speed(self) -> float:
        return norm(self.direction)


# ── Basic operations ──────────────────────────────────────────

def _check_base(a: SpdPoint, b: SpdPoint):
    if not a.same_as(b):
        raise BaseMismatchError("tangent vectors are based at different points")


def _inner(p_inv: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    return float(np.sum((p_inv @ u) * (p_inv @ v).T))


def _require_traceless(x: np.ndarray) -> np.ndarray:
    x = require_finite(x, "Killing generator")
    if abs(np.trace(x)) > TANGENT_TRACE_TOL * max(1.0, frobenius(x)):
        raise NotTracelessError(f"generator has trace {np.trace(x):.3e}")
    return x


def act(g: np.ndarray, point: SpdPoint) -> SpdPoint:
    """g.P = g P g^T with g rescaled to |det g| = 1."""
    g = _normalize_group_element(g)
    return SpdPoint(g @ point.P @ g.T)


def push_forward(g: np.ndarray, u: TangentVector) -> TangentVector:
    """Differential of the action: U -> g U g^T at g.P."""
    g = _normalize_group_element(g)
    return TangentVector(act(g, u.base), symmetrize(g @ u.U @ g.T))


def _normalize_group_element(g: np.ndarray) -> np.ndarray:
    g = require_finite(g, "group element")
    n = g.shape[0]
    det = float(np.linalg.det(g))
    if abs(det) <= SINGULAR_DET_TOL * max(1.0, frobenius(g)) ** n:
        raise SingularMatrixError(f"group element is singular (det {det:.3e})")
    return g / abs(det) ** (1.0 / n)


def killing_field(x: np.ndarray, point: SpdPoint) -> TangentVector:
    """Value X.P = XP + PX^T of the Killing field induced by X in sl(n)."""
    x = _require_traceless(x)
    return TangentVector(point, x @ point.P + point.P @ x.T)


def metric(point: SpdPoint, u: TangentVector, v: TangentVector) -> float:
    _check_base(point, u.base)
    _check_base(point, v.base)
    return _inner(point.inv, u.U, v.U)


def norm(u: TangentVector) -> float:
    return float(np.sqrt(max(_inner(u.base.inv, u.U, u.U), 0.0)))


def geodesic(point: SpdPoint, v: TangentVector) -> GeodesicSegment:
    _check_base(point, v.base)
    return GeodesicSegment(point, v)


def _relative_log(point: SpdPoint, other: SpdPoint) -> np.ndarray:
    s_inv = point.inv_sqrt
    return spd_map(s_inv @ other.P @ s_inv, "log")


def log_map(point: SpdPoint, other: SpdPoint) -> TangentVector:
    """Initial velocity of the geodesic from point reaching other at t = 1."""
    s = point.sqrt
    return TangentVector(point, symmetrize(s @ _relative_log(point, other) @ s))


def distance(point: SpdPoint, other: SpdPoint) -> float:
    return frobenius(_relative_log(point, other))


# ── Curvature ─────────────────────────────────────────────────

def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def curvature(u: TangentVector, v: TangentVector, w: TangentVector) -> TangentVector:
    """R(U,V)W, computed at the identity as -1/4 [[U,V],W] and transported."""
    point = u.base
    _check_base(point, v.base)
    _check_base(point, w.base)
    s_inv = point.inv_sqrt
    ut, vt, wt = (s_inv @ x.U @ s_inv for x in (u, v, w))
    r = -0.25 * _commutator(_commutator(ut, vt), wt)
    s = point.sqrt
    return TangentVector(point, symmetrize(s @ r @ s))


def sectional_curvature(u: TangentVector, v: TangentVector) -> float:
    p_inv = u.base.inv
    _check_base(u.base, v.base)
    uu = _inner(p_inv, u.U, u.U)
    vv = _inner(p_inv, v.U, v.U)
    uv = _inner(p_inv, u.U, v.U)
    area = uu * vv - uv * uv
    if area <= DEGENERATE_PLANE_TOL * max(uu * vv, 1e-300):
        raise DegeneratePlaneError("tangent vectors are linearly dependent")
    return _inner(p_inv, curvature(u, v, v).U, u.U) / area


def covariant_derivative_killing(x: np.ndarray, u: TangentVector) -> TangentVector:
    """Covariant derivative of the Killing field of X in direction U."""
    x = _require_traceless(x)
    p = u.base
    f = x @ p.P + p.P @ x.T
    correction = u.U @ p.inv @ f
    return TangentVector(p, symmetrize(x @ u.U + u.U @ x.T - 0.5 * (correction + correction.T)))


# ── Orbit geometry ────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class OrbitFrame:
    """Killing fields of a basis at P and an orthonormal frame of their span."""
    point: SpdPoint
    fields: np.ndarray          # (d, n, n)
    frame: np.ndarray           # (r, n, n), metric-orthonormal
    coeffs: np.ndarray          # (r, d): frame[k] = sum_i coeffs[k, i] fields[i]

    @property
    def dimension(self) -> int:
        return int(self.frame.shape[0])

    def tangent_part(self, u: np.ndarray) -> np.ndarray:
        if self.dimension == 0:
            return np.zeros_like(u)
        p_inv = self.point.inv
        weights = np.array([_inner(p_inv, u, e) for e in self.frame])
        return np.tensordot(weights, self.frame, axes=1)

    def normal_part(self, u: np.ndarray) -> np.ndarray:
        return u - self.tangent_part(u)

    def gram(self) -> np.ndarray:
        p_inv = self.point.inv
        d = self.fields.shape[0]
        g = np.zeros((d, d))
        for i in range(d):
            for j in range(i, d):
                g[i, j] = g[j, i] = _inner(p_inv, self.fields[i], self.fields[j])
        return g


def field_scales(basis: np.ndarray, point: SpdPoint) -> np.ndarray:
    """Upper bound 2 |X|_F sqrt(cond P) on the metric norm of each Killing field at P.

    Stays away from zero when a field vanishes, so round-off is never
    mistaken for an orbit direction.
    """
    w = linalg.eigvalsh(point.P)
    root_cond = np.sqrt(w[-1] / w[0])
    return np.array([2.0 * frobenius(x) * root_cond for x in basis])


def orbit_frame(basis: np.ndarray, point: SpdPoint, drop_tol: float = ORBIT_DROP_TOL) -> OrbitFrame:
    fields = np.array([x @ point.P + point.P @ x.T for x in basis]).reshape(basis.shape)
    p_inv = point.inv
    frame, coeffs, ratios = orthonormalize(
        list(fields), lambda a, b: _inner(p_inv, a, b), drop_tol,
        scales=field_scales(basis, point),
    )
    ambiguous = [r for r in ratios if drop_tol < r < ORBIT_RANK_GAP]
    if ambiguous:
        raise DegenerateOrbitError(
            f"orbit rank unresolved at P: Killing field residual {min(ambiguous):.3e} "
            f"between drop tolerance {drop_tol:g} and {ORBIT_RANK_GAP:g}"
        )
    frame_arr = np.array(frame).reshape(len(frame), point.n, point.n)
    return OrbitFrame(point, fields, frame_arr, coeffs)


def _second_fundamental_tensor(basis: np.ndarray, frame: OrbitFrame) -> np.ndarray:
    """II[i, j] = normal part of nabla_{X_i.P}(X_j.) for all basis pairs."""
    d = basis.shape[0]
    point = frame.point
    out = np.zeros((d, d, point.n, point.n))
    for i in range(d):
        u = TangentVector(point, frame.fields[i])
        for j in range(d):
            out[i, j] = frame.normal_part(covariant_derivative_killing(basis[j], u).U)
    return out


def _frame_second_fundamental(basis: np.ndarray, frame: OrbitFrame) -> np.ndarray:
    """II on the orthonormal frame: (r, r, n, n)."""
    tensor = _second_fundamental_tensor(basis, frame)
    c = frame.coeffs
    return np.einsum("ki,lj,ijab->klab", c, c, tensor)


def second_fundamental_form(
    split: "CartanSplit", point: SpdPoint, u: int, v: int
) -> TangentVector:
    """II(X_u.P, X_v.P): normal part of nabla_{X_u.P}(X_v.)."""
    basis = split.g.basis
    frame = orbit_frame(basis, point)
    du = TangentVector(point, frame.fields[u])
    return TangentVector(point, frame.normal_part(covariant_derivative_killing(basis[v], du).U))


def mean_curvature(split: "CartanSplit", point: SpdPoint) -> TangentVector:
    """Trace of II over an orthonormal frame of the orbit tangent space."""
    basis = split.g.basis
    frame = orbit_frame(basis, point)
    if frame.dimension == 0:
        return TangentVector(point, np.zeros((point.n, point.n)))
    sff = _frame_second_fundamental(basis, frame)
    return TangentVector(point, symmetrize(np.einsum("kkab->ab", sff)))


def mean_curvature_norm(split: "CartanSplit", point: SpdPoint) -> float:
    return norm(mean_curvature(split, point))


@dataclass
class OrbitReport:
    """Geometry of the orbit G.P at one point."""
    point: SpdPoint
    gram: np.ndarray
    orbit_dimension: int
    mean_curvature_norm: float
    sff_norms: list[float]
    lambda_value: Optional[float] = None

    @property
    def max_sff_norm(self) -> float:
        return max(self.sff_norms) if self.sff_norms else 0.0

    def to_dict(self) -> dict:
        out = {
            "point": self.point.P.ravel().tolist(),
            "gram": self.gram.ravel().tolist(),
            "orbit_dimension": self.orbit_dimension,
            "mean_curvature_norm": self.mean_curvature_norm,
            "max_sff_norm": self.max_sff_norm,
            "sff_norms": list(self.sff_norms),
        }
        if self.lambda_value is not None:
            out["lambda"] = self.lambda_value
        return out


def orbit_report(split: "CartanSplit", point: SpdPoint) -> OrbitReport:
    basis = split.g.basis
    frame = orbit_frame(basis, point)
    r = frame.dimension
    norms: list[float] = []
    h = np.zeros((point.n, point.n))
    if r:
        sff = _frame_second_fundamental(basis, frame)
        for k in range(r):
            for l in range(k, r):
                norms.append(float(np.sqrt(max(_inner(point.inv, sff[k, l], sff[k, l]), 0.0))))
        h = np.einsum("kkab->ab", sff)
    h_norm = float(np.sqrt(max(_inner(point.inv, h, h), 0.0)))
    return OrbitReport(point, frame.gram(), r, h_norm, norms)


def normal_frame(split: "CartanSplit", point: SpdPoint) -> list[TangentVector]:
    """Orthonormal basis of the normal space of the orbit at P.

    B_j = P^1/2 E_j P^1/2 over a Frobenius-orthonormal basis E_j of traceless
    sym(n) is metric-orthonormal at P. The normal space is the kernel of the
    orbit frame's coordinates in that basis.
    """
    n = point.n
    frame = orbit_frame(split.g.basis, point)
    traceless = [e - np.trace(e) / n * np.eye(n) for e in sym_basis(n)]
    identity_frame, _, _ = orthonormalize(traceless, lambda a, b: float(np.sum(a * b)), 1e-12)
    s = point.sqrt
    ambient = np.array([s @ e @ s for e in identity_frame])
    p_inv = point.inv
    coords = np.array([[_inner(p_inv, e, b) for b in ambient] for e in frame.frame])
    kernel = nullspace(coords.reshape(frame.dimension, ambient.shape[0]))
    normals = np.einsum("jq,jab->qab", kernel, ambient)
    return [TangentVector(point, symmetrize(v)) for v in normals]


def random_normal_geodesic(
    split: "CartanSplit", point: SpdPoint, rng: np.random.Generator
) -> Optional[GeodesicSegment]:
    """Unit-speed geodesic leaving P in a seeded random normal direction."""
    normals = normal_frame(split, point)
    if not normals:
        return None
    c = rng.standard_normal(len(normals))
    c = c / np.linalg.norm(c)
    u = sum(ci * v.U for ci, v in zip(c, normals))
    return geodesic(point, TangentVector(point, symmetrize(u)))


# ── Variational function along normal geodesics ───────────────

@dataclass
class VariationalSample:
    t: float
    f: float
    f_dot_fd: float
    curvature_term: float
    nabla_term: float
    normality_residual: float

    @property
    def identity_residual(self) -> float:
        predicted = self.curvature_term + self.nabla_term
        return abs(self.f_dot_fd - predicted) / (1.0 + abs(self.f_dot_fd))

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "f": self.f,
            "f_dot_fd": self.f_dot_fd,
            "curvature_term": self.curvature_term,
            "nabla_term": self.nabla_term,
            "identity_residual": self.identity_residual,
            "normality_residual": self.normality_residual,
        }


def normality_residual(basis: np.ndarray, point: SpdPoint, velocity: TangentVector) -> float:
    """max_i |<X_i.P, v>| / (|v| field_scale_i)."""
    p_inv = point.inv
    speed = norm(velocity)
    if basis.shape[0] == 0 or speed == 0.0:
        return 0.0
    scales = field_scales(basis, point)
    worst = 0.0
    for x, scale in zip(basis, scales):
        if scale == 0.0:
            continue
        field = x @ point.P + point.P @ x.T
        worst = max(worst, abs(_inner(p_inv, field, velocity.U)) / scale)
    return worst / speed


def _f_terms(x: np.ndarray, gamma: GeodesicSegment, t: float) -> tuple[float, TangentVector, TangentVector, TangentVector]:
    vel = gamma.velocity(t)
    point = vel.base
    field_value = killing_field(x, point)
    nabla = covariant_derivative_killing(x, vel)
    f = _inner(point.inv, nabla.U, field_value.U)
    return f, vel, field_value, nabla


def variational_f(
    split: "CartanSplit",
    x: np.ndarray,
    gamma: GeodesicSegment,
    t_samples: Sequence[float],
    h: float = FD_STEP,
    normality_tol: float = NORMALITY_TOL,
) -> list[VariationalSample]:
    """f(t) = <nabla_gamma'(X.), X.> = -<A_gamma'(X.), X.> with its derivative check."""
    basis = split.g.basis
    samples = []
    for t in t_samples:
        f, vel, field_value, nabla = _f_terms(x, gamma, t)
        point = vel.base
        residual = normality_residual(basis, point, vel)
        if residual > normality_tol:
            raise NotNormalError(
                f"geodesic velocity at t={t:g} has tangential component {residual:.3e}"
            )
        f_plus = _f_terms(x, gamma, t + h)[0]
        f_minus = _f_terms(x, gamma, t - h)[0]
        curv = curvature(vel, field_value, vel)
        samples.append(VariationalSample(
            t=float(t),
            f=f,
            f_dot_fd=(f_plus - f_minus) / (2.0 * h),
            curvature_term=_inner(point.inv, curv.U, field_value.U),
            nabla_term=_inner(point.inv, nabla.U, nabla.U),
            normality_residual=residual,
        ))
    logger.debug("variational_f: %d samples, max identity residual %.3e",
                 len(samples), max((s.identity_residual for s in samples), default=0.0))
    return samples
