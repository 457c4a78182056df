"""Multivariate regularly and slowly varying functions.

Two calculi live on the open orthant ``(0, inf)^d``:

* coordinate-wise: ``f(t) = prod t_i**H_i * L(t)`` with ``L`` slowly varying
  as ``min t_i -> inf``;
* radial: ``f(x) = ||x||**rho * L(x)`` with ``L(t x) / L(t e) -> lambda(x/||x||)``
  along rays, ``e = (d**-0.5, ..., d**-0.5)``.

Slowly varying parts are drawn from a closed family of tagged closed forms so
that every limit has an analytic value to test against.  Operator-valued
regular variation ``F(lam r) F(r)^-1 -> lam**D`` is covered by
:func:`matrix_power` and :func:`check_operator_regvar`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import exp1

from .errors import DomainError, NumericError, ParameterError

__all__ = [
    "SlowFn",
    "JakymivK",
    "SlowVaryingSpec",
    "CrvfSpec",
    "RrvfSpec",
    "OperatorRvfSpec",
    "eval_crvf",
    "check_multiplicativity",
    "MultiplicativityReport",
    "estimate_crv_exponents",
    "CrvExponentEstimate",
    "check_radial_variation",
    "RadialVariationReport",
    "build_jakymiv_svf",
    "matrix_power",
    "expm",
    "check_operator_regvar",
    "OperatorRegvarReport",
    "reference_direction",
]

_E = math.e


def reference_direction(d: int) -> np.ndarray:
    """The unit vector ``(d**-0.5, ..., d**-0.5)`` used as the radial reference."""
    return np.full(d, 1.0 / math.sqrt(d))


def _positive(t, name="t") -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not np.all(t > 0):
        raise DomainError(f"{name} must have strictly positive entries, got {t!r}")
    return t


# ---------------------------------------------------------------------------
# univariate slowly varying functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlowFn:
    """Tagged univariate slowly varying function on ``(0, inf)``.

    ``kind`` is one of

    ``"constant"``  ``value``
    ``"log"``       ``log(e + x) ** power``
    ``"loglog"``    ``log(e + log(e + x)) ** power``

    The shift by ``e`` keeps every member finite and positive on ``[0, inf)``,
    so the family composes freely in products and sums.
    """

    kind: str = "constant"
    power: float = 1.0
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "log", "loglog"):
            raise ParameterError(f"unknown slowly varying kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ParameterError("constant slowly varying function must be positive")

    @classmethod
    def constant(cls, value: float = 1.0) -> "SlowFn":
        return cls("constant", value=float(value))

    @classmethod
    def log(cls, power: float = 1.0) -> "SlowFn":
        return cls("log", power=float(power))

    @classmethod
    def loglog(cls, power: float = 1.0) -> "SlowFn":
        return cls("loglog", power=float(power))

    def log_value(self, x):
        """``ln l(x)``; ``x`` may be any non-negative array."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, math.log(self.value))
        if self.kind == "log":
            return self.power * np.log(np.log(_E + x))
        return self.power * np.log(np.log(_E + np.log(_E + x)))

    def __call__(self, x):
        return np.exp(self.log_value(x))

    def log_slope(self, x):
        """Analytic logarithmic derivative ``d ln l(x) / d ln x``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        inner = np.log(_E + x)
        if self.kind == "log":
            return self.power * x / ((_E + x) * inner)
        outer = _E + inner
        return self.power * (x / (_E + x)) / (outer * np.log(outer))

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant({self.value:g})"
        return f"{self.kind}^{self.power:g}"


@dataclass(frozen=True)
class JakymivK:
    """``K(x) = exp(eta(x) + int_a^{||x||} eps(u)/u du)``.

    With the tagged forms ``eta(x) = eta_limit + eta_amp * exp(-||x||)`` and
    ``eps(u) = eps_amp * exp(-u)`` the integral is
    ``eps_amp * (E1(a) - E1(||x||))`` with ``E1`` the exponential integral.
    """

    eta_limit: float = 0.0
    eta_amp: float = 0.0
    eps_amp: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ParameterError("lower limit a must be positive")

    def log_value_radius(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("Jakymiv K is defined for ||x|| > 0 only")
        out = self.eta_limit + self.eta_amp * np.exp(-r)
        if self.eps_amp != 0.0:
            out = out + self.eps_amp * (exp1(self.a) - exp1(r))
        return out

    def log_value(self, x):
        x = np.asarray(x, dtype=float)
        return self.log_value_radius(np.linalg.norm(x, axis=-1))

    def __call__(self, x):
        return np.exp(self.log_value(x))

    def limit(self) -> float:
        """``lim_{||x|| -> inf} K(x)``."""
        return math.exp(self.eta_limit + self.eps_amp * float(exp1(self.a)))


def build_jakymiv_svf(eta_limit: float = 0.0, eta_amp: float = 0.0,
                      eps_amp: float = 0.0, a: float = 1.0) -> JakymivK:
    """Build the slowly varying ``K`` of the Jakymiv representation.

    ``eta`` is tagged as ``eta_limit + eta_amp * exp(-r)`` (bounded, limit
    ``eta_limit``) and ``eps`` as ``eps_amp * exp(-u)`` (faster than any
    power), so the integral has a closed form for every ``r > 0``.
    """
    return JakymivK(float(eta_limit), float(eta_amp), float(eps_amp), float(a))


# ---------------------------------------------------------------------------
# multivariate slowly varying functions
# ---------------------------------------------------------------------------

_SVF_KINDS = ("constant", "product", "sum", "radial", "jakymiv", "compound")


@dataclass(frozen=True)
class SlowVaryingSpec:
    """A multivariate slowly varying function built from tagged pieces.

    kinds:

    ``constant``  ``L(x) = value``
    ``product``   ``prod_i l_i(x_i)``
    ``sum``       ``sum_i l_i(x_i)``
    ``radial``    ``l(||x||) * lambda(x/||x||)``, ``lambda`` normalized to 1 at ``e``
    ``jakymiv``   ``K(x)`` of :class:`JakymivK`
    ``compound``  product of the ``parts``
    """

    kind: str = "constant"
    factors: tuple = ()
    value: float = 1.0
    sphere: Callable | None = None
    jakymiv: JakymivK | None = None
    parts: tuple = ()

    def __post_init__(self):
        if self.kind not in _SVF_KINDS:
            raise ParameterError(f"unknown slowly varying spec kind {self.kind!r}")
        if self.kind in ("product", "sum") and not self.factors:
            raise ParameterError(f"{self.kind} kind needs at least one factor")
        if self.kind == "radial" and len(self.factors) != 1:
            raise ParameterError("radial kind takes exactly one univariate factor")
        if self.kind == "jakymiv" and self.jakymiv is None:
            raise ParameterError("jakymiv kind needs a JakymivK")

    @classmethod
    def constant(cls, value: float = 1.0) -> "SlowVaryingSpec":
        return cls("constant", value=float(value))

    @classmethod
    def product(cls, factors: Sequence[SlowFn]) -> "SlowVaryingSpec":
        return cls("product", factors=tuple(factors))

    @classmethod
    def sum(cls, factors: Sequence[SlowFn]) -> "SlowVaryingSpec":
        return cls("sum", factors=tuple(factors))

    @classmethod
    def radial(cls, factor: SlowFn, sphere: Callable | None = None) -> "SlowVaryingSpec":
        return cls("radial", factors=(factor,), sphere=sphere)

    @classmethod
    def from_jakymiv(cls, k: JakymivK) -> "SlowVaryingSpec":
        return cls("jakymiv", jakymiv=k)

    def __mul__(self, other: "SlowVaryingSpec") -> "SlowVaryingSpec":
        mine = self.parts if self.kind == "compound" else (self,)
        theirs = other.parts if other.kind == "compound" else (other,)
        return SlowVaryingSpec("compound", parts=mine + theirs)

    def _sphere_log(self, a):
        if self.sphere is None:
            return np.zeros(a.shape[:-1])
        e = reference_direction(a.shape[-1])
        vals = np.asarray(self.sphere(a), dtype=float)
        ref = float(self.sphere(e))
        if np.any(vals <= 0) or ref <= 0:
            raise NumericError("sphere function must be positive")
        return np.log(vals) - math.log(ref)

    def log_value(self, x):
        """``ln L(x)`` for ``x`` of shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k == "constant":
            return np.full(x.shape[:-1], math.log(self.value))
        if k in ("product", "sum"):
            d = x.shape[-1]
            if len(self.factors) != d:
                raise ParameterError(f"{k} kind has {len(self.factors)} factors, point has d={d}")
            logs = np.stack([fn.log_value(x[..., i]) for i, fn in enumerate(self.factors)], axis=-1)
            if k == "product":
                return logs.sum(axis=-1)
            return np.logaddexp.reduce(logs, axis=-1)
        if k == "radial":
            r = np.linalg.norm(x, axis=-1)
            if np.any(r <= 0):
                raise DomainError("radial slowly varying function needs x != 0")
            return self.factors[0].log_value(r) + self._sphere_log(x / r[..., None])
        if k == "jakymiv":
            return self.jakymiv.log_value(x)
        return sum(p.log_value(x) for p in self.parts)

    def __call__(self, x):
        return np.exp(self.log_value(x))

    def describe(self) -> str:
        k = self.kind
        if k == "constant":
            return f"constant({self.value:g})"
        if k in ("product", "sum", "radial"):
            return f"{k}[{', '.join(f.describe() for f in self.factors)}]"
        if k == "jakymiv":
            j = self.jakymiv
            return f"jakymiv(C={j.eta_limit:g}, c={j.eta_amp:g}, eps={j.eps_amp:g}, a={j.a:g})"
        return " * ".join(p.describe() for p in self.parts)


@dataclass(frozen=True)
class CrvfSpec:
    """Coordinate-wise regularly varying ``f(t) = prod t_i**H_i * L(t)``."""

    exponents: tuple
    slow_part: SlowVaryingSpec = field(default_factory=SlowVaryingSpec.constant)

    def __post_init__(self):
        h = np.asarray(self.exponents, dtype=float)
        if h.ndim != 1 or not np.all(np.isfinite(h)):
            raise ParameterError("exponents must be a finite vector")
        object.__setattr__(self, "exponents", tuple(float(v) for v in h))

    @property
    def d(self) -> int:
        return len(self.exponents)

    def log(self, t):
        """``ln f(t)``; safe far beyond the float range of ``f`` itself."""
        t = _positive(t)
        return np.log(t) @ np.asarray(self.exponents) + self.slow_part.log_value(t)

    def __call__(self, t):
        return eval_crvf(self, t)

    def __mul__(self, other: "CrvfSpec") -> "CrvfSpec":
        h = np.add(self.exponents, other.exponents)
        return CrvfSpec(tuple(h), self.slow_part * other.slow_part)


def eval_crvf(spec: CrvfSpec, t):
    """Evaluate ``prod t_i**H_i * L(t)``; raises :class:`DomainError` unless ``t > 0``."""
    t = _positive(t)
    if t.shape[-1] != spec.d:
        raise ParameterError(f"point has d={t.shape[-1]}, spec has d={spec.d}")
    out = np.prod(t ** np.asarray(spec.exponents), axis=-1) * spec.slow_part(t)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class RrvfSpec:
    """Radially regularly varying ``f(x) = ||x||**rho * L(x)``."""

    rho: float
    slow_part: SlowVaryingSpec = field(default_factory=SlowVaryingSpec.constant)

    def log(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        if np.any(r <= 0):
            raise DomainError("radial function needs x != 0")
        return self.rho * np.log(r) + self.slow_part.log_value(x)

    def __call__(self, x):
        out = np.exp(self.log(x))
        return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# checks and estimators
# ---------------------------------------------------------------------------

@dataclass
class MultiplicativityReport:
    max_residual: float
    passed: bool


def check_multiplicativity(limit_fn: Callable, pairs, tol: float = 1e-12) -> MultiplicativityReport:
    """Check ``l(a*b) = l(a) l(b)`` on the given pairs.

    The residual is ``max |l(a*b) - l(a) l(b)| / l(a*b)``.
    """
    worst = 0.0
    for a, b in pairs:
        a = _positive(a, "a")
        b = _positive(b, "b")
        lab = float(limit_fn(a * b))
        if not lab > 0:
            raise NumericError("limit function must be positive on tested points")
        res = abs(lab - float(limit_fn(a)) * float(limit_fn(b))) / lab
        worst = max(worst, res)
    return MultiplicativityReport(worst, worst <= tol)


@dataclass
class CrvExponentEstimate:
    H_hat: np.ndarray
    r_squared: np.ndarray
    tail_slopes: np.ndarray
    """Local slopes over the last three grid intervals, one row per axis."""

    @property
    def stabilized(self) -> np.ndarray:
        """Per-axis flag: local slopes move monotonically over the last three levels."""
        diffs = np.diff(self.tail_slopes, axis=1)
        return np.all(diffs >= 0, axis=1) | np.all(diffs <= 0, axis=1)


def _ls_slope(x, y):
    xm = x - x.mean()
    ym = y - y.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ ym) / sxx
    ss_tot = float(ym @ ym)
    resid = ym - slope * xm
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(resid @ resid) / ss_tot
    return slope, r2


def estimate_crv_exponents(f: Callable, grid_base: float = 2.0, levels: int = 16,
                           anchor=None, *, log_values: bool = False) -> CrvExponentEstimate:
    """Least-squares estimate of the coordinate exponents of a c.r.v.f.

    Along ray ``i`` the ``i``-th coordinate runs over ``anchor_i * base**k``,
    ``k = 0..levels``, while the others sit at ``anchor_j * base**levels``;
    ``H_hat_i`` is the slope of ``ln f`` against ``ln t_i``.

    A slowly varying factor biases the slope by roughly ``1/ln t`` (for a
    ``log`` factor), so the anchor must sit deep in the asymptotic range when
    percent-level accuracy is wanted.  With ``log_values=True`` the callable
    returns ``ln f`` directly, which avoids overflow at large anchors.
    """
    if grid_base <= 1:
        raise ParameterError("grid_base must exceed 1")
    if levels < 3:
        raise ParameterError("need at least 3 levels")
    anchor = _positive(anchor, "anchor")
    d = anchor.size
    k = np.arange(levels + 1)
    top = anchor * grid_base ** levels
    H = np.empty(d)
    r2 = np.empty(d)
    tails = np.empty((d, 3))
    for i in range(d):
        pts = np.tile(top, (levels + 1, 1))
        pts[:, i] = anchor[i] * grid_base ** k
        vals = np.array([float(f(p)) for p in pts])
        if log_values:
            y = vals
            if not np.all(np.isfinite(y)):
                raise NumericError("log f must be finite on the grid")
        else:
            if not np.all(vals > 0) or not np.all(np.isfinite(vals)):
                raise NumericError(f"f must be positive and finite on ray {i}")
            y = np.log(vals)
        x = np.log(pts[:, i])
        H[i], r2[i] = _ls_slope(x, y)
        tails[i] = np.diff(y[-4:]) / np.diff(x[-4:])
    return CrvExponentEstimate(H, r2, tails)


@dataclass
class RadialVariationReport:
    phi_hat: float
    rho_hat: float
    ratios: np.ndarray
    converged: bool


def check_radial_variation(f: Callable, x, t_grid, tol: float = 1e-2, *,
                           scales=(0.5, 1.0, 2.0, 4.0),
                           log_values: bool = False) -> RadialVariationReport:
    """Estimate ``phi(x) = lim f(t x) / f(t e)`` and its homogeneity index.

    ``phi_hat`` is the ratio at the largest ``t``; ``rho_hat`` is the slope of
    ``ln phi_hat(s x)`` in ``ln s`` over ``scales``.  ``converged`` reports
    whether the ratio moved by at most ``tol`` (relative) over the last grid
    step.
    """
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) <= 0:
        raise DomainError("x must be nonzero")
    e = reference_direction(x.size)
    t_grid = np.sort(np.asarray(t_grid, dtype=float))

    def logf(p):
        v = float(f(p))
        if log_values:
            if not math.isfinite(v):
                raise NumericError("log f must be finite")
            return v
        if not v > 0 or not math.isfinite(v):
            raise NumericError("f must be positive and finite on the rays")
        return math.log(v)

    log_ratios = np.array([logf(t * x) - logf(t * e) for t in t_grid])
    ratios = np.exp(log_ratios)
    top = t_grid[-1]
    s = np.asarray(scales, dtype=float)
    base = logf(top * e)
    ys = np.array([logf(top * si * x) - base for si in s])
    rho_hat, _ = _ls_slope(np.log(s), ys)
    converged = bool(len(ratios) < 2 or abs(ratios[-1] - ratios[-2]) <= tol * abs(ratios[-1]))
    return RadialVariationReport(float(ratios[-1]), rho_hat, ratios, converged)


# ---------------------------------------------------------------------------
# operator-valued regular variation
# ---------------------------------------------------------------------------

_TAIL_TOL = 1e-14


def expm(A) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a Taylor series.

    ``A`` is scaled by ``2**-s`` so that ``||A||_1 <= 1/2``; the series is
    truncated once the tail bound ``||B||**(k+1) / (k+1)! / (1 - ||B||/(k+2))``
    drops below 1e-14, then squared back ``s`` times.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError("expm needs a square matrix")
    if not np.all(np.isfinite(A)):
        raise NumericError("expm needs finite entries")
    n = A.shape[0]
    norm = float(np.abs(A).sum(axis=0).max()) if n else 0.0
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    B = A / 2.0 ** s
    bnorm = norm / 2.0 ** s
    result = np.eye(n)
    term = np.eye(n)
    k = 0
    while True:
        k += 1
        term = term @ B / k
        result = result + term
        # bound on sum_{j>k} ||B||^j / j!
        bound = bnorm ** (k + 1) / math.factorial(k + 1) / (1.0 - bnorm / (k + 2))
        if bound <= _TAIL_TOL or k >= 60:
            break
    for _ in range(s):
        result = result @ result
    return result


def matrix_power(D, r: float) -> np.ndarray:
    """``r**D = exp(ln(r) * D)`` for ``r > 0``.

    Diagonal ``D`` is handled by elementwise powers.
    """
    if not r > 0:
        raise DomainError("matrix_power needs r > 0")
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if np.count_nonzero(D - np.diag(np.diag(D))) == 0:
        return np.diag(float(r) ** np.diag(D))
    return expm(math.log(r) * D)


@dataclass(frozen=True)
class OperatorRvfSpec:
    """``F(r) = r**D @ diag(l_1(r), ..., l_d(r))``."""

    index_matrix: np.ndarray
    slow: tuple = ()

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.index_matrix, dtype=float))
        if D.shape[0] != D.shape[1]:
            raise ParameterError("index matrix must be square")
        object.__setattr__(self, "index_matrix", D)
        slow = tuple(self.slow) or tuple(SlowFn.constant() for _ in range(D.shape[0]))
        if len(slow) != D.shape[0]:
            raise ParameterError("need one slowly varying factor per dimension")
        object.__setattr__(self, "slow", slow)

    def __call__(self, r: float) -> np.ndarray:
        L = np.diag([float(fn(r)) for fn in self.slow])
        return matrix_power(self.index_matrix, r) @ L


@dataclass
class OperatorRegvarReport:
    deviation: float
    deviations: np.ndarray
    passed: bool


def check_operator_regvar(F, lam: float, r_grid, tol: float, index=None) -> OperatorRegvarReport:
    """Deviation ``||F(lam r) F(r)^-1 - lam**D||_2`` along ``r_grid``.

    ``F`` is an :class:`OperatorRvfSpec` (its index matrix is used unless
    ``index`` is given) or a callable ``r -> matrix`` together with ``index``.
    Pass ``index = 0`` to check operator slow variation.
    """
    if index is None:
        if not isinstance(F, OperatorRvfSpec):
            raise ParameterError("index matrix required for a plain callable")
        index = F.index_matrix
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    first = np.atleast_2d(np.asarray(F(r_grid[0]), dtype=float))
    D = np.asarray(index, dtype=float)
    if D.ndim == 0:
        D = D * np.eye(first.shape[0])
    target = matrix_power(D, lam)
    devs = []
    for r in r_grid:
        Fr = np.atleast_2d(np.asarray(F(r), dtype=float))
        try:
            ratio = np.linalg.solve(Fr.T, np.atleast_2d(np.asarray(F(lam * r), dtype=float)).T).T
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"F({r:g}) is singular") from exc
        devs.append(float(np.linalg.norm(ratio - target, 2)))
    devs = np.array(devs)
    return OperatorRegvarReport(float(devs[-1]), devs, bool(devs[-1] <= tol))
