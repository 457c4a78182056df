"""Lamperti transformations between self-similar and stationary fields.

All transforms act on sampled paths over explicit point sets: the point set in
one frame is the exact image of the point set in the other, and values are
rescaled pointwise.  Nothing is interpolated.

Three families are provided:

* classical, ``d = 1``:  ``Y(s) = e^{-Hs} X(e^s)``,  ``X(t) = t^H Y(ln t)``;
* multi-self-similar on the orthant, per component ``j``:
  ``Y_j(s) = exp(-sum_i s_i H_ij) X_j(e^s)``;
* polar, for planar Levy fBm:  ``Y(s) = e^{-H s1} X(e^{s1} cos s2, e^{s1} sin s2)``.

The multi-self-similar case is the instance of a general recipe: a diagonal
cocycle ``C``, the time change ``phi(s) = e^s`` and the group isomorphism
``F(h) = diag(e^h)``; :func:`check_prop6_conditions` verifies the two
compatibility identities that make the recipe work.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .fields import CovarianceKernel, _as_points, _check_hurst

__all__ = [
    "HurstMatrix",
    "DiagonalGroupElement",
    "CocycleSpec",
    "TimeChange",
    "PathOnGrid",
    "check_cocycle",
    "check_prop6_conditions",
    "Prop6Residuals",
    "lamperti_forward_mss",
    "lamperti_inverse_mss",
    "polar_forward_levy",
    "polar_inverse_levy",
    "lamperti_forward_1d",
    "lamperti_inverse_1d",
    "polar_coordinates",
    "check_wmss_shift_equation",
    "MssPushforwardKernel",
    "PolarPushforwardKernel",
    "PolarPullbackKernel",
]


class HurstMatrix(np.ndarray):
    """``m x d`` matrix of nonnegative exponents; row ``j`` scales component ``j``."""

    def __new__(cls, entries):
        H = np.atleast_2d(np.asarray(entries, dtype=float)).view(cls)
        if H.ndim != 2:
            raise ParameterError("Hurst matrix must be 2-D")
        if not np.all(np.isfinite(H)) or np.any(H < 0):
            raise ParameterError("Hurst matrix entries must be finite and >= 0")
        return H

    @property
    def m(self) -> int:
        return self.shape[0]

    @property
    def d(self) -> int:
        return self.shape[1]

    def trivial_components(self) -> np.ndarray:
        """Indices of all-zero rows: those components are constant in ``t``."""
        return np.flatnonzero(np.all(np.asarray(self) == 0, axis=1))


def _hurst(H) -> np.ndarray:
    return np.asarray(HurstMatrix(H))


@dataclass(frozen=True)
class DiagonalGroupElement:
    """``diag(a_1, ..., a_d)`` with ``a_i > 0``; composition is the coordinate product."""

    a: tuple

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if not np.all(a > 0):
            raise DomainError("diagonal group elements need positive entries")
        object.__setattr__(self, "a", tuple(float(v) for v in a))

    @classmethod
    def identity(cls, d: int) -> "DiagonalGroupElement":
        return cls((1.0,) * d)

    def __mul__(self, other: "DiagonalGroupElement") -> "DiagonalGroupElement":
        return DiagonalGroupElement(tuple(np.multiply(self.a, other.a)))

    def inverse(self) -> "DiagonalGroupElement":
        return DiagonalGroupElement(tuple(1.0 / np.asarray(self.a)))

    def act(self, t) -> np.ndarray:
        return np.asarray(t, dtype=float) * np.asarray(self.a)


@dataclass(frozen=True)
class CocycleSpec:
    """Diagonal cocycle ``C(diag(a)) = diag(prod_i a_i^{H_ij}, j = 1..m)``."""

    hurst: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hurst", _hurst(self.hurst))

    @property
    def m(self) -> int:
        return self.hurst.shape[0]

    @property
    def d(self) -> int:
        return self.hurst.shape[1]

    def factors(self, g) -> np.ndarray:
        """The diagonal of ``C(g)``, the products ``prod_i a_i^{H_ji}``."""
        a = np.asarray(g.a if isinstance(g, DiagonalGroupElement) else g, dtype=float)
        if not np.all(a > 0):
            raise DomainError("cocycle argument must be positive")
        return np.prod(a[None, :] ** self.hurst, axis=1)

    def __call__(self, g) -> np.ndarray:
        return np.diag(self.factors(g))


def check_cocycle(C: CocycleSpec, g1, g2) -> float:
    """Largest relative deviation of ``C(g1 g2)`` from ``C(g1) C(g2)``."""
    g1 = g1 if isinstance(g1, DiagonalGroupElement) else DiagonalGroupElement(g1)
    g2 = g2 if isinstance(g2, DiagonalGroupElement) else DiagonalGroupElement(g2)
    joint = C.factors(g1 * g2)
    split = C.factors(g1) * C.factors(g2)
    return float(np.max(np.abs(joint - split) / joint))


@dataclass(frozen=True)
class TimeChange:
    """Time change ``phi: S -> T`` with its inverse.

    ``exp-orthant``  ``phi(s) = (e^{s_1}, ..., e^{s_d})``, inverse ``ln``
    ``polar-plane``  ``phi(s) = (e^{s1} cos s2, e^{s1} sin s2)``, inverse ``(ln rho, theta)``
    """

    kind: str = "exp-orthant"

    def __post_init__(self):
        if self.kind not in ("exp-orthant", "polar-plane"):
            raise ParameterError(f"unknown time change {self.kind!r}")

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == "exp-orthant":
            return np.exp(s)
        r = np.exp(s[..., 0])
        return np.stack([r * np.cos(s[..., 1]), r * np.sin(s[..., 1])], axis=-1)

    def inverse(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "exp-orthant":
            if np.any(t <= 0):
                raise DomainError("exp-orthant inverse needs positive coordinates")
            return np.log(t)
        return polar_coordinates(t)

    def group_map(self, h) -> DiagonalGroupElement:
        """The isomorphism ``F``: shift ``h`` of ``S`` to ``diag(e^h)`` acting on ``T``."""
        if self.kind != "exp-orthant":
            raise ParameterError("no group isomorphism is available for the polar-plane time change")
        return DiagonalGroupElement(tuple(np.exp(np.atleast_1d(np.asarray(h, dtype=float)))))


@dataclass
class Prop6Residuals:
    cond2: float
    cond1: float


def check_prop6_conditions(C: CocycleSpec, timechange: TimeChange, h, s) -> Prop6Residuals:
    """Residuals of the two compatibility conditions for the shift ``h`` at ``s``.

    ``cond2``: ``F(h)(phi(s))`` against ``phi(s + h)`` (relative, max over coordinates).
    ``cond1``: ``f(s + h) C(F(h))`` against ``f(s)`` with ``f(s) = C(F(s))^{-1}``
    (relative, max over components).
    """
    if timechange.kind != "exp-orthant":
        raise ParameterError("conditions are only instantiated for the exp-orthant time change")
    h = np.atleast_1d(np.asarray(h, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    lhs = timechange.group_map(h).act(timechange(s))
    rhs = timechange(s + h)
    cond2 = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))

    def f(x):
        return 1.0 / C.factors(timechange.group_map(x))

    left = f(s + h) * C.factors(timechange.group_map(h))
    right = f(s)
    cond1 = float(np.max(np.abs(left - right) / np.abs(right)))
    return Prop6Residuals(cond2, cond1)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathOnGrid:
    """Field values on a point set in a given frame.

    ``values`` is ``(n_points, m)`` or ``(n_reps, n_points, m)``; ``frame`` is
    ``"T"`` (time domain) or ``"S"`` (stationary domain).
    """

    points: np.ndarray
    values: np.ndarray
    frame: str = "T"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frame not in ("T", "S"):
            raise ParameterError("frame must be 'T' or 'S'")
        P = np.asarray(self.points)
        if P.ndim == 1:
            P = P[:, None]
        V = np.asarray(self.values)
        if V.ndim == 1:
            V = V[:, None]
        if V.shape[-2] != P.shape[0]:
            raise ParameterError(f"values shape {V.shape} does not match {P.shape[0]} points")
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "values", V)

    @classmethod
    def from_sample(cls, sample, frame: str = "T") -> "PathOnGrid":
        return cls(sample.points, sample.values, frame, dict(sample.metadata))

    @property
    def m(self) -> int:
        return self.values.shape[-1]


def _scale(values, logscale):
    # logscale: (n_points, m); broadcast over leading replicate axes
    return values * np.exp(logscale).astype(values.dtype)


def lamperti_forward_mss(X: PathOnGrid, H) -> PathOnGrid:
    """``Y_j(s) = exp(-sum_i s_i H_ij) X_j(e^s)`` at ``s = ln t``."""
    H = _hurst(H)
    t = np.asarray(X.points)
    if t.shape[1] != H.shape[1]:
        raise ParameterError(f"points have d={t.shape[1]}, Hurst matrix has d={H.shape[1]}")
    if X.m != H.shape[0]:
        raise ParameterError(f"path has m={X.m} components, Hurst matrix has m={H.shape[0]}")
    if np.any(t <= 0):
        raise DomainError("multi-self-similar Lamperti transform needs points in the open orthant")
    s = np.log(t)
    return PathOnGrid(s, _scale(X.values, -(s.astype(X.values.dtype) @ H.T)), "S", dict(X.metadata))


def lamperti_inverse_mss(Y: PathOnGrid, H) -> PathOnGrid:
    """``X_j(t) = prod_i t_i^{H_ij} Y_j(ln t)``."""
    H = _hurst(H)
    s = np.asarray(Y.points)
    if s.shape[1] != H.shape[1] or Y.m != H.shape[0]:
        raise ParameterError("path and Hurst matrix shapes disagree")
    return PathOnGrid(np.exp(s), _scale(Y.values, s.astype(Y.values.dtype) @ H.T), "T",
                      dict(Y.metadata))


def lamperti_forward_1d(X: PathOnGrid, H: float) -> PathOnGrid:
    """Classical ``Y(s) = e^{-Hs} X(e^s)``; ``H = 0`` is a pure time change."""
    if X.points.shape[1] != 1:
        raise ParameterError("1-D transform needs scalar time points")
    return lamperti_forward_mss(X, np.full((X.m, 1), float(H)))


def lamperti_inverse_1d(Y: PathOnGrid, H: float) -> PathOnGrid:
    """Classical ``X(t) = t^H Y(ln t)``."""
    if Y.points.shape[1] != 1:
        raise ParameterError("1-D transform needs scalar points")
    return lamperti_inverse_mss(Y, np.full((Y.m, 1), float(H)))


def polar_coordinates(t) -> np.ndarray:
    """``(ln rho(t), theta(t))`` with the principal angle in ``(-pi, pi]``."""
    t = np.asarray(t, dtype=float)
    rho = np.hypot(t[..., 0], t[..., 1])
    if np.any(rho == 0):
        raise DomainError("polar coordinates are undefined at the origin")
    theta = np.arctan2(t[..., 1], t[..., 0])
    # arctan2 returns -pi for (-x, -0.0); fold onto the principal branch
    theta = np.where(theta == -np.pi, np.pi, theta)
    return np.stack([np.log(rho), theta], axis=-1)


def polar_forward_levy(X: PathOnGrid, H: float) -> PathOnGrid:
    """``Y(s) = e^{-H s1} X(e^{s1} cos s2, e^{s1} sin s2)`` at ``s = (ln rho, theta)``."""
    H = float(_check_hurst(H))
    if X.points.shape[1] != 2:
        raise ParameterError("polar transform needs planar points")
    s = polar_coordinates(X.points)
    return PathOnGrid(s, _scale(X.values, -H * s[:, :1].astype(X.values.dtype)), "S",
                      dict(X.metadata))


def polar_inverse_levy(Y: PathOnGrid, H: float) -> PathOnGrid:
    """``X(t) = rho(t)^H Y(ln rho(t), theta(t))`` on the image points ``phi(s)``."""
    H = float(_check_hurst(H))
    if Y.points.shape[1] != 2:
        raise ParameterError("polar transform needs planar points")
    s = np.asarray(Y.points, dtype=float)
    t = TimeChange("polar-plane")(s)
    return PathOnGrid(t, _scale(Y.values, H * s[:, :1].astype(Y.values.dtype)), "T",
                      dict(Y.metadata))


def check_wmss_shift_equation(H_row, D_j: float, pairs) -> float:
    """Max absolute residual of ``g(a*b) = g(a) + g(b) f(a)``.

    Here ``f(a) = prod a_i^{H_i}`` and ``g(a) = D_j (1 - f(a))``.
    """
    H = np.asarray(H_row, dtype=float)

    def f(a):
        return float(np.prod(np.asarray(a, dtype=float) ** H))

    def g(a):
        return D_j * (1.0 - f(a))

    worst = 0.0
    for a, b in pairs:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.any(a <= 0) or np.any(b <= 0):
            raise DomainError("shift equation is posed on positive vectors")
        worst = max(worst, abs(g(a * b) - (g(a) + g(b) * f(a))))
    return worst


# ---------------------------------------------------------------------------
# kernels transported through the transforms
# ---------------------------------------------------------------------------

class MssPushforwardKernel(CovarianceKernel):
    """Covariance of the stationary image of a scalar multi-self-similar kernel.

    ``K_Y(s, s') = exp(-h.s - h.s') K(e^s, e^{s'})``.
    """

    kind = "mss_pushforward"

    def __init__(self, base: CovarianceKernel, h):
        self.base = base
        self.h = _hurst(h)[0]
        self.d = self.h.size
        self.stationary = True

    def cross(self, P, Q):
        P = _as_points(P, self.d)
        Q = _as_points(Q, self.d)
        w = np.exp(-(P @ self.h))[:, None] * np.exp(-(Q @ self.h))[None, :]
        return w * self.base.cross(np.exp(P), np.exp(Q))

    def params(self):
        return {"base": self.base.describe(), "h": self.h.tolist()}


class PolarPushforwardKernel(CovarianceKernel):
    """``K_Y(s, s') = e^{-H(s1 + s1')} K(phi(s), phi(s'))`` for a planar kernel."""

    kind = "polar_pushforward"
    d = 2

    def __init__(self, base: CovarianceKernel, H: float):
        self.base = base
        self.H = float(_check_hurst(H))

    def cross(self, P, Q):
        P = _as_points(P, 2)
        Q = _as_points(Q, 2)
        phi = TimeChange("polar-plane")
        w = np.exp(-self.H * P[:, 0])[:, None] * np.exp(-self.H * Q[:, 0])[None, :]
        return w * self.base.cross(phi(P), phi(Q))

    def params(self):
        return {"base": self.base.describe(), "H": self.H}


class PolarPullbackKernel(CovarianceKernel):
    """``K_X(t, u) = rho(t)^H rho(u)^H K_Y((ln rho, theta)(t), (ln rho, theta)(u))``."""

    kind = "polar_pullback"
    d = 2

    def __init__(self, base: CovarianceKernel, H: float):
        self.base = base
        self.H = float(_check_hurst(H))

    def cross(self, P, Q):
        sp = polar_coordinates(_as_points(P, 2))
        sq = polar_coordinates(_as_points(Q, 2))
        w = np.exp(self.H * sp[:, 0])[:, None] * np.exp(self.H * sq[:, 0])[None, :]
        return w * self.base.cross(sp, sq)

    def params(self):
        return {"base": self.base.describe(), "H": self.H}
