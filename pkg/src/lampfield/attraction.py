"""Partial sums of stationary lattice fields and their normalizations.

Covers rectangular partial sums ``S_[n.t]``, the two-parameter scheme
``Z_{n,gamma}(t, s) = S_{n, n^gamma}(t, s)`` used to probe scaling transitions,
exact variances of box sums, fitted normalization exponents, the ratio
condition on ``(n, m)`` schedules, and operator time-scaled fields.

No centering is applied anywhere; callers subtract means beforehand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import GridRangeError, NumericError, ParameterError
from .fields import (REP_BLOCK, CovarianceKernel, FieldSample, LatticeSeparable,
                     WhiteNoise, sample_stationary_lattice)
from .lamperti import PathOnGrid
from .regvar import CrvfSpec, eval_crvf, matrix_power

__all__ = [
    "SumProcessConfig",
    "RatioWindow",
    "lattice_floor",
    "partial_sum_field",
    "simulate_partial_sums",
    "normalized_sum",
    "scale_transition_sum",
    "exact_sum_variance",
    "direct_sum_variance",
    "fit_normalization_exponent",
    "NormalizationFit",
    "scaling_transition_curve",
    "ScalingTransitionReport",
    "fit_breakpoint",
    "check_ratio_condition",
    "operator_scaled_sum",
]


def lattice_floor(x) -> np.ndarray:
    """``floor(x)`` that forgives binary rounding of products like ``0.29 * 100``.

    Values within 1e-9 (relative) of an integer are snapped to it first.
    """
    x = np.asarray(x, dtype=float)
    r = np.rint(x)
    snapped = np.where(np.abs(x - r) <= 1e-9 * np.maximum(1.0, np.abs(x)), r, x)
    return np.floor(snapped).astype(np.int64)


@dataclass(frozen=True)
class SumProcessConfig:
    """Lattice sizes, evaluation grid, optional scaling-transition exponent.

    ``normalization`` is either a :class:`~lampfield.regvar.CrvfSpec` evaluated
    at ``n`` or explicit positive values; ``None`` means raw sums.
    """

    n: tuple
    t_grid: tuple
    gamma: float | None = None
    normalization: object = None

    def __post_init__(self):
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if any(v < 1 for v in n):
            raise ParameterError("lattice sizes must be >= 1")
        t = np.atleast_2d(np.asarray(self.t_grid, dtype=float))
        if t.shape[1] != len(n):
            raise ParameterError("t_grid points must match the dimension of n")
        if np.any(t <= 0):
            raise ParameterError("t_grid points must have positive coordinates")
        if self.gamma is not None and not self.gamma > 0:
            raise ParameterError("gamma must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "t_grid", tuple(map(tuple, t)))

    def box_sizes(self) -> np.ndarray:
        return lattice_floor(np.asarray(self.n) * np.asarray(self.t_grid))

    def norm_values(self) -> np.ndarray:
        f = self.normalization
        if f is None:
            return np.ones(1)
        if isinstance(f, CrvfSpec):
            return np.atleast_1d(eval_crvf(f, np.asarray(self.n, dtype=float)))
        return np.atleast_1d(np.asarray(f, dtype=float))


@dataclass(frozen=True)
class RatioWindow:
    c: float
    C: float

    def __post_init__(self):
        if not (0 < self.c < self.C < math.inf):
            raise ParameterError("ratio window needs 0 < c < C < inf")


def _box_sizes(n, t_grid) -> np.ndarray:
    n = np.atleast_1d(np.asarray(n, dtype=float))
    t = np.atleast_2d(np.asarray(t_grid, dtype=float))
    if t.shape[1] != n.size:
        raise ParameterError("t points must match the dimension of n")
    return lattice_floor(n * t)


def _box_sums(lattice, boxes) -> np.ndarray:
    # lattice: (reps, N_1, ..., N_d, m); boxes: (n_t, d)
    reps = lattice.shape[0]
    out = np.zeros((reps, len(boxes), lattice.shape[-1]))
    shape = lattice.shape[1:-1]
    for j, box in enumerate(boxes):
        if np.any(box > np.asarray(shape)):
            raise GridRangeError(f"box {tuple(box)} exceeds the sampled lattice {shape}")
        if np.any(box <= 0):
            continue  # empty box: the sum is exactly zero
        sl = (slice(None),) + tuple(slice(0, int(k)) for k in box)
        out[:, j, :] = lattice[sl].sum(axis=tuple(range(1, len(shape) + 1)))
    return out


def _check_unit_lattice(xi: FieldSample):
    if xi.grid is None:
        raise ParameterError("partial sums need a sample on a lattice grid")
    for a in xi.grid.axes:
        if a[0] != 1.0 or (a.size > 1 and not np.all(np.diff(a) == 1.0)):
            raise ParameterError("partial sums need the lattice {1..N_1} x ... x {1..N_d}")


def partial_sum_field(xi: FieldSample, n, t_grid) -> np.ndarray:
    """``S_[n.t] = sum over the box 1..[n_i t_i]`` for every replicate and ``t``.

    Returns shape ``(n_reps, n_t, m)``.  Any empty side gives exactly 0.
    """
    _check_unit_lattice(xi)
    return _box_sums(xi.lattice_values(), _box_sizes(n, t_grid))


def simulate_partial_sums(kernel: CovarianceKernel, shape, n, t_grid, n_reps: int,
                          seed: int, *, chunk: int = 4 * REP_BLOCK) -> np.ndarray:
    """Partial sums of freshly sampled lattice fields, generated in chunks.

    Equivalent to ``partial_sum_field(sample_stationary_lattice(...), n, t_grid)``
    but never holds more than ``chunk`` lattice replicates in memory.
    """
    boxes = _box_sizes(n, t_grid)
    out = []
    for start in range(0, int(n_reps), chunk):
        count = min(chunk, int(n_reps) - start)
        xi = sample_stationary_lattice(kernel, shape, count, seed, rep_offset=start)
        out.append(_box_sums(xi.lattice_values(), boxes))
    return np.concatenate(out, axis=0)


def normalized_sum(sums, f_n) -> np.ndarray:
    """Divide partial sums componentwise by the normalization ``f_n > 0``."""
    f_n = np.asarray(f_n, dtype=float)
    if not np.all(f_n > 0):
        raise ParameterError("normalization must be positive")
    return np.asarray(sums, dtype=float) / f_n


def _gamma_side(n: int, gamma: float) -> int:
    return int(lattice_floor(float(n) ** float(gamma)))


def scale_transition_sum(xi: FieldSample, n: int, gamma: float, ts_grid) -> np.ndarray:
    """``Z_{n,gamma}(t, s) = S_{n, [n^gamma]}(t, s)`` on a planar lattice sample."""
    if not gamma > 0 or int(n) < 1:
        raise ParameterError("need n >= 1 and gamma > 0")
    if xi.d != 2:
        raise ParameterError("the scaling-transition scheme is planar (d = 2)")
    return partial_sum_field(xi, (int(n), _gamma_side(int(n), gamma)), ts_grid)


# ---------------------------------------------------------------------------
# exact variances
# ---------------------------------------------------------------------------

_EXACT_TERMS = 1 << 20
_SPLIT = 134217729.0  # 2**27 + 1


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _exact_products(w, a) -> list:
    """Arrays whose elementwise sum is exactly ``w * a`` (``w`` integer weights)."""
    w = np.asarray(w, dtype=np.int64)
    a = np.asarray(a, dtype=float)
    if np.any(np.abs(a) > 2.0 ** 990):
        raise NumericError("covariance values too large for exact summation")
    a_hi, a_lo = _split(a)
    w_hi = ((w >> 26) << 26).astype(float)
    w_lo = (w & ((1 << 26) - 1)).astype(float)
    return [w_hi * a_hi, w_hi * a_lo, w_lo * a_hi, w_lo * a_lo]


def _lag_function(r) -> Callable:
    if isinstance(r, CovarianceKernel):
        if not hasattr(r, "lag"):
            raise ParameterError(f"{r.kind} has no lattice lag function")
        return r.lag
    return r


def exact_sum_variance(r, n: int, m: int) -> float:
    """``Var(sum of the n x m box) = sum_{|k|<n, |l|<m} (n-|k|)(m-|l|) r(k, l)``.

    ``r`` is a stationary lattice kernel or a vectorized ``r(k, l)``.  Up to
    about a million lag terms the weighted sum is evaluated exactly (Dekker
    splitting of every product plus ``math.fsum``), so the result is the
    correctly rounded value.  Beyond that, white-noise and separable kernels
    use their closed forms and anything else is summed row by row in a fixed
    order.
    """
    n = int(n)
    m = int(m)
    if n < 1 or m < 1:
        raise ParameterError("box sides must be >= 1")
    if isinstance(r, WhiteNoise):
        return float(n * m)
    lag = _lag_function(r)
    terms = (2 * n - 1) * (2 * m - 1)
    if terms <= _EXACT_TERMS:
        k = np.arange(-(n - 1), n)
        l = np.arange(-(m - 1), m)
        K, L = np.meshgrid(k, l, indexing="ij")
        w = (n - np.abs(K)) * (m - np.abs(L))
        vals = np.asarray(lag(K, L), dtype=float)
        parts = _exact_products(w, vals)
        return math.fsum(np.concatenate([p.ravel() for p in parts]))
    if isinstance(r, LatticeSeparable):
        return r.r1.sum_variance(n) * r.r2.sum_variance(m)
    l = np.arange(-(m - 1), m)
    wl = (m - np.abs(l)).astype(float)
    rows = []
    for k in range(-(n - 1), n):
        row = np.asarray(lag(np.full_like(l, k), l), dtype=float)
        rows.append((n - abs(k)) * np.sum(row * wl))
    return math.fsum(rows)


def direct_sum_variance(r, n: int, m: int) -> float:
    """Brute-force ``sum_{i,i'=1..n} sum_{j,j'=1..m} r(i-i', j-j')`` (correctly rounded)."""
    lag = _lag_function(r)
    i = np.arange(1, int(n) + 1)
    j = np.arange(1, int(m) + 1)
    I, I2, J, J2 = np.meshgrid(i, i, j, j, indexing="ij")
    return math.fsum(np.asarray(lag(I - I2, J - J2), dtype=float).ravel())


@dataclass
class NormalizationFit:
    h_hat: float
    r_squared: float
    n_list: np.ndarray
    m_list: np.ndarray
    variances: np.ndarray


def fit_normalization_exponent(r, gamma: float, n_list: Sequence[int]) -> NormalizationFit:
    """Half the log-log slope of ``Var Z_{n,gamma}(1,1)`` against ``n``.

    The variance of each box ``n x [n^gamma]`` comes from
    :func:`exact_sum_variance`.
    """
    n_list = np.asarray(sorted(int(v) for v in n_list))
    if n_list.size < 4:
        raise ParameterError("need at least 4 levels of n")
    if not gamma > 0:
        raise ParameterError("gamma must be positive")
    m_list = np.array([_gamma_side(n, gamma) for n in n_list])
    if np.any(m_list < 1):
        raise ParameterError("n^gamma must be at least 1 on every level")
    var = np.array([exact_sum_variance(r, n, m) for n, m in zip(n_list, m_list)])
    if not np.all(var > 0):
        raise NumericError("box-sum variances must be positive")
    x = np.log(n_list)
    y = np.log(var)
    xm = x - x.mean()
    ym = y - y.mean()
    slope = float(xm @ ym) / float(xm @ xm)
    resid = ym - slope * xm
    ss_tot = float(ym @ ym)
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return NormalizationFit(0.5 * slope, r2, n_list, m_list, var)


@dataclass
class ScalingTransitionReport:
    gammas: np.ndarray
    h_hat: np.ndarray
    r_squared: np.ndarray
    breakpoint: dict


def fit_breakpoint(gammas, h) -> dict:
    """Fit ``h(gamma)`` by one line and by a continuous two-piece line.

    The hinge location is searched over midpoints of consecutive gammas.
    Returns the hinge, both slopes, both residual sums of squares and their
    ratio; a ratio near 0 means a clear kink, near 1 means none.
    """
    g = np.asarray(gammas, dtype=float)
    h = np.asarray(h, dtype=float)
    order = np.argsort(g)
    g, h = g[order], h[order]
    X1 = np.stack([np.ones_like(g), g], axis=1)
    c1, *_ = np.linalg.lstsq(X1, h, rcond=None)
    sse_line = float(np.sum((h - X1 @ c1) ** 2))
    best = {"gamma_break": None, "slope_left": float(c1[1]), "slope_right": float(c1[1]),
            "sse_line": sse_line, "sse_hinge": sse_line, "sse_ratio": 1.0}
    if g.size < 4:
        return best
    for gb in 0.5 * (g[1:-2] + g[2:-1]):
        X2 = np.column_stack([X1, np.maximum(0.0, g - gb)])
        c2, *_ = np.linalg.lstsq(X2, h, rcond=None)
        sse = float(np.sum((h - X2 @ c2) ** 2))
        if sse < best["sse_hinge"] or best["gamma_break"] is None:
            best.update(gamma_break=float(gb), slope_left=float(c2[1]),
                        slope_right=float(c2[1] + c2[2]), sse_hinge=sse)
    best["sse_ratio"] = best["sse_hinge"] / sse_line if sse_line > 0 else 0.0
    return best


def scaling_transition_curve(r, gammas: Sequence[float], n_list: Sequence[int]) -> ScalingTransitionReport:
    """Fitted ``h_hat(gamma)`` over a sweep, with a breakpoint diagnostic.

    No critical ``gamma`` is assumed; the hinge fit only reports where the
    curve bends, if anywhere.
    """
    fits = [fit_normalization_exponent(r, g, n_list) for g in gammas]
    h = np.array([f.h_hat for f in fits])
    r2 = np.array([f.r_squared for f in fits])
    return ScalingTransitionReport(np.asarray(gammas, dtype=float), h, r2, fit_breakpoint(gammas, h))


def check_ratio_condition(pairs, window: RatioWindow) -> bool:
    """``True`` iff ``c <= m/n <= C`` for every ``(n, m)`` pair."""
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("need at least one (n, m) pair")
    return all(window.c <= m / n <= window.C for n, m in pairs)


def operator_scaled_sum(Y: PathOnGrid, E, r: float, f_r, t_points) -> np.ndarray:
    """``f_r @ Y(r^E t)`` for each ``t``; the images must be sampled points of ``Y``.

    Returns shape ``(..., n_t, m)`` following the leading replicate axes of
    ``Y.values``.
    """
    E = np.atleast_2d(np.asarray(E, dtype=float))
    t = np.atleast_2d(np.asarray(t_points, dtype=float))
    images = t @ matrix_power(E, r).T
    P = np.asarray(Y.points, dtype=float)
    idx = np.empty(len(images), dtype=int)
    for a, x in enumerate(images):
        dist = np.max(np.abs(P - x), axis=1)
        j = int(np.argmin(dist))
        if dist[j] > 1e-9 * (1.0 + np.max(np.abs(x))):
            raise GridRangeError(f"image point {x} is not on the sampled grid")
        idx[a] = j
    f_r = np.atleast_2d(np.asarray(f_r, dtype=float))
    if f_r.shape == (1, 1):
        f_r = f_r[0, 0] * np.eye(Y.m)
    return np.asarray(Y.values)[..., idx, :] @ f_r.T
