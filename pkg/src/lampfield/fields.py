"""Covariance kernels, Gram matrices and seeded Gaussian field samplers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, NumericError, ParameterError

__all__ = [
    "CovarianceKernel",
    "LevyFBM",
    "FBMSheet",
    "PolarStationary",
    "WhiteNoise",
    "Tabulated",
    "Cov1D",
    "LatticeSeparable",
    "LatticeIsotropicLRD",
    "make_kernel",
    "covariance",
    "covariance_R",
    "gram_matrix",
    "cholesky_with_jitter",
    "LatticeGrid",
    "FieldSample",
    "sample_gaussian_field",
    "sample_stationary_lattice",
    "replicate_streams",
    "REP_BLOCK",
    "GENERATOR_TAG",
]

GENERATOR_TAG = "numpy.PCG64/SeedSequence(seed, spawn_key=(block,))"
# Replicates are drawn in fixed blocks, each from its own substream, so any
# replicate range regenerates identically however the work is chunked.
REP_BLOCK = 256


def _check_hurst(H, name="H"):
    H = np.asarray(H, dtype=float)
    if not np.all((H > 0) & (H <= 1)):
        raise ParameterError(f"{name} must lie in (0, 1], got {H.tolist()}")
    return H


def _as_points(P, d=None) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[None, :] if d is None or P.size == d else P[:, None]
    if d is not None and P.shape[-1] != d:
        raise ParameterError(f"points must have dimension {d}, got {P.shape[-1]}")
    return P


class CovarianceKernel:
    """Base class: a symmetric covariance ``K(t, u)`` of a scalar field.

    Subclasses implement :meth:`cross`, returning the matrix
    ``K(P[a], Q[b])`` for point arrays of shape ``(n, d)`` and ``(k, d)``.
    """

    kind = "abstract"
    m = 1
    stationary = False
    d: int | None = None

    def cross(self, P, Q) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, t, u) -> float:
        return float(self.cross(_as_points(t, self.d), _as_points(u, self.d))[0, 0])

    def params(self) -> dict:
        return {}

    def describe(self) -> str:
        inner = ",".join(f"{k}={_fmt_param(v)}" for k, v in self.params().items())
        return f"{self.kind}({inner})"

    def __repr__(self):
        return self.describe()


def _fmt_param(v):
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(_fmt_param(x) for x in np.ravel(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


class LevyFBM(CovarianceKernel):
    """Levy fractional Brownian field, ``0.5 (|t|^2H + |u|^2H - |t-u|^2H)``."""

    kind = "levy_fbm"

    def __init__(self, H: float, d: int = 2):
        self.H = float(_check_hurst(H))
        self.d = int(d)

    def cross(self, P, Q):
        P = _as_points(P, self.d)
        Q = _as_points(Q, self.d)
        h2 = 2.0 * self.H
        a = np.linalg.norm(P, axis=1)[:, None] ** h2
        b = np.linalg.norm(Q, axis=1)[None, :] ** h2
        c = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=-1) ** h2
        return 0.5 * (a + b - c)

    def params(self):
        return {"H": self.H, "d": self.d}


class FBMSheet(CovarianceKernel):
    """Fractional Brownian sheet: product over axes of 1-D fBm covariances."""

    kind = "fbm_sheet"

    def __init__(self, h: Sequence[float]):
        self.h = _check_hurst(np.atleast_1d(h), "h")
        self.d = self.h.size

    def cross(self, P, Q):
        P = _as_points(P, self.d)
        Q = _as_points(Q, self.d)
        out = np.ones((P.shape[0], Q.shape[0]))
        for i, hi in enumerate(self.h):
            p = np.abs(P[:, i])[:, None]
            q = np.abs(Q[:, i])[None, :]
            diff = np.abs(P[:, i][:, None] - Q[:, i][None, :])
            out = out * (0.5 * (p ** (2 * hi) + q ** (2 * hi) - diff ** (2 * hi)))
        return out

    def params(self):
        return {"h": self.h.tolist()}


def covariance_R(v, H: float):
    """Stationary covariance of the polar Lamperti image of Levy fBm.

    ``R(v) = 0.5 (e^{v1 H} + e^{-v1 H} - (e^{v1} + e^{-v1} - 2 cos v2)^H)``.
    Accepts ``v`` of shape ``(..., 2)``.
    """
    H = float(_check_hurst(H))
    v = np.asarray(v, dtype=float)
    v1 = v[..., 0]
    v2 = v[..., 1]
    # e^{v1} + e^{-v1} - 2cos(v2) rewritten without cancellation near v = 0
    base = 4.0 * (np.sinh(0.5 * v1) ** 2 + np.sin(0.5 * v2) ** 2)
    out = np.cosh(H * v1) - 0.5 * base ** H
    return float(out) if out.ndim == 0 else out


class PolarStationary(CovarianceKernel):
    """Stationary planar kernel ``K(s, s') = R(s' - s)``."""

    kind = "polar_stationary"
    stationary = True
    d = 2

    def __init__(self, H: float):
        self.H = float(_check_hurst(H))

    def cross(self, P, Q):
        P = _as_points(P, 2)
        Q = _as_points(Q, 2)
        return covariance_R(Q[None, :, :] - P[:, None, :], self.H)

    def params(self):
        return {"H": self.H}


class WhiteNoise(CovarianceKernel):
    """Unit-variance white noise: ``K(t, u) = 1`` iff ``t == u``."""

    kind = "white_noise"
    stationary = True

    def __init__(self, d: int = 2):
        self.d = int(d)

    def cross(self, P, Q):
        P = _as_points(P, self.d)
        Q = _as_points(Q, self.d)
        return np.all(P[:, None, :] == Q[None, :, :], axis=-1).astype(float)

    def lag(self, *lags):
        out = np.ones(np.broadcast(*lags).shape)
        for k in lags:
            out = out * (np.asarray(k) == 0)
        return out

    def params(self):
        return {"d": self.d}


class Tabulated(CovarianceKernel):
    """Covariance given as a matrix; points are integer indices into it."""

    kind = "tabulated"
    d = 1

    def __init__(self, matrix):
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        if M.shape[0] != M.shape[1] or not np.array_equal(M, M.T):
            raise ParameterError("tabulated covariance must be a symmetric square matrix")
        self.matrix = M

    def cross(self, P, Q):
        i = _integer_coords(_as_points(P, 1))[:, 0]
        j = _integer_coords(_as_points(Q, 1))[:, 0]
        n = self.matrix.shape[0]
        if i.min(initial=0) < 0 or j.min(initial=0) < 0 or max(i.max(initial=0), j.max(initial=0)) >= n:
            raise DomainError(f"tabulated kernel indices must lie in 0..{n - 1}")
        return self.matrix[np.ix_(i, j)]

    def params(self):
        return {"matrix": self.matrix.tolist()}


def _integer_coords(P) -> np.ndarray:
    R = np.rint(P)
    if not np.array_equal(R, P):
        raise DomainError("lattice kernels take integer coordinates")
    return R.astype(np.int64)


@dataclass(frozen=True)
class Cov1D:
    """Tagged stationary 1-D lattice covariance ``r(k)``.

    ``geometric``  ``rho**|k|``
    ``fgn``        fractional Gaussian noise, ``0.5(|k+1|^2H - 2|k|^2H + |k-1|^2H)``
    ``white``      ``1{k = 0}``
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind == "geometric" and not -1 < self.param < 1:
            raise ParameterError("geometric covariance needs |rho| < 1")
        if self.kind == "fgn":
            _check_hurst(self.param)
        if self.kind not in ("geometric", "fgn", "white"):
            raise ParameterError(f"unknown 1-D covariance {self.kind!r}")

    def __call__(self, k):
        k = np.abs(np.asarray(k, dtype=float))
        if self.kind == "geometric":
            return self.param ** k
        if self.kind == "white":
            return (k == 0).astype(float)
        h2 = 2.0 * self.param
        return 0.5 * ((k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2)

    def sum_variance(self, n: int) -> float:
        """``Var(sum_{i=1}^n xi_i) = sum_{|k|<n} (n - |k|) r(k)``."""
        n = int(n)
        if n <= 0:
            return 0.0
        if self.kind == "fgn":
            return float(n) ** (2.0 * self.param)
        if self.kind == "white":
            return float(n)
        k = np.arange(1, n)
        return float(n + 2.0 * np.sum((n - k) * self(k)))

    def describe(self) -> str:
        return f"{self.kind}:{self.param!r}" if self.kind != "white" else "white"

    @classmethod
    def parse(cls, text: str) -> "Cov1D":
        kind, _, val = text.partition(":")
        return cls(kind, float(val) if val else 0.0)


class _Lattice(CovarianceKernel):
    stationary = True
    d = 2

    def cross(self, P, Q):
        P = _integer_coords(_as_points(P, self.d))
        Q = _integer_coords(_as_points(Q, self.d))
        diff = P[:, None, :] - Q[None, :, :]
        return self.lag(*(diff[..., i] for i in range(self.d)))


class LatticeSeparable(_Lattice):
    """``r(k, l) = r1(k) r2(l)`` on the integer plane."""

    kind = "lattice_separable"

    def __init__(self, r1: Cov1D, r2: Cov1D):
        self.r1 = r1 if isinstance(r1, Cov1D) else Cov1D.parse(r1)
        self.r2 = r2 if isinstance(r2, Cov1D) else Cov1D.parse(r2)

    def lag(self, k, l):
        return self.r1(k) * self.r2(l)

    def params(self):
        return {"r1": self.r1.describe(), "r2": self.r2.describe()}


class LatticeIsotropicLRD(_Lattice):
    """Isotropic long-range dependent lattice model ``(1 + k^2 + l^2)^(-q/2)``."""

    kind = "lattice_isotropic_lrd"

    def __init__(self, q: float):
        q = float(q)
        if not 0 < q < 2:
            raise ParameterError("isotropic LRD exponent q must lie in (0, 2)")
        self.q = q

    def lag(self, k, l):
        k = np.asarray(k, dtype=float)
        l = np.asarray(l, dtype=float)
        return (1.0 + k * k + l * l) ** (-0.5 * self.q)

    def params(self):
        return {"q": self.q}


def make_kernel(kind: str, **params) -> CovarianceKernel:
    """Build a kernel from its ``kind`` name and parameters (CLI/CSV metadata)."""
    kind = kind.replace("-", "_")
    if kind == "levy_fbm":
        return LevyFBM(float(params["H"]), int(params.get("d", 2)))
    if kind == "fbm_sheet":
        return FBMSheet(params["h"])
    if kind == "polar_stationary":
        return PolarStationary(float(params["H"]))
    if kind == "white_noise":
        return WhiteNoise(int(params.get("d", 2)))
    if kind == "tabulated":
        return Tabulated(params["matrix"])
    if kind == "lattice_separable":
        return LatticeSeparable(params["r1"], params["r2"])
    if kind == "lattice_isotropic_lrd":
        return LatticeIsotropicLRD(float(params["q"]))
    raise ParameterError(f"unknown kernel kind {kind!r}")


def covariance(kernel: CovarianceKernel, t, u) -> float:
    """``K(t, u)`` for a single pair of points."""
    return kernel(t, u)


def gram_matrix(kernel: CovarianceKernel, points) -> np.ndarray:
    """Symmetric Gram matrix ``G[a, b] = K(p_a, p_b)``.

    The upper triangle is computed and mirrored, so ``G`` is exactly symmetric.
    """
    P = _as_points(points, kernel.d)
    G = kernel.cross(P, P)
    return np.triu(G) + np.triu(G, 1).T


def cholesky_with_jitter(G, *, base: float = 1e-10, factor: float = 100.0,
                         escalations: int = 3):
    """Lower Cholesky factor of ``G``, adding diagonal jitter on failure.

    The first retry adds ``base * trace/n``; each further retry multiplies the
    jitter by ``factor``, up to ``escalations`` retries.  Returns
    ``(L, jitter)``; raises :class:`NumericError` if all attempts fail.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    scale = float(np.trace(G)) / n
    if not scale > 0:
        scale = 1.0
    jitter = 0.0
    for attempt in range(escalations + 1):
        try:
            return np.linalg.cholesky(G + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter = base * scale * factor ** attempt
    raise NumericError(
        f"Gram matrix is not positive semidefinite after {escalations} jitter escalations "
        f"(last jitter {jitter / factor:.3g}); smallest eigenvalue "
        f"{np.linalg.eigvalsh(G)[0]:.3g}")


@dataclass(frozen=True)
class LatticeGrid:
    """Rectangular grid given by strictly increasing per-axis coordinates."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        for a in axes:
            if a.ndim != 1 or a.size == 0 or np.any(np.diff(a) <= 0):
                raise ParameterError("grid axes must be non-empty and strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def integer(cls, shape: Sequence[int]) -> "LatticeGrid":
        """The lattice ``{1..n_1} x ... x {1..n_d}``."""
        return cls(tuple(np.arange(1, int(n) + 1, dtype=float) for n in shape))

    @property
    def shape(self) -> tuple:
        return tuple(a.size for a in self.axes)

    @property
    def d(self) -> int:
        return len(self.axes)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.shape))

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FieldSample:
    """Monte Carlo replicates of a field on a finite point set.

    ``values`` has shape ``(n_reps, n_points, m)``.  ``grid`` is set when the
    points form a :class:`LatticeGrid` (points then follow C order of the grid).
    """

    points: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    grid: LatticeGrid | None = None

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        V = np.asarray(self.values)
        if V.ndim == 2:
            V = V[:, :, None]
        if V.ndim != 3 or V.shape[1] != P.shape[0]:
            raise ParameterError(f"values shape {V.shape} does not match {P.shape[0]} points")
        if V.shape[0] < 1:
            raise ParameterError("need at least one replicate")
        if not np.all(np.isfinite(V)):
            raise NumericError("field values must be finite")
        if self.grid is not None and self.grid.n_points != P.shape[0]:
            raise ParameterError("grid does not match the point count")
        object.__setattr__(self, "points", _freeze(P))
        object.__setattr__(self, "values", _freeze(V))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def n_reps(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    @property
    def m(self) -> int:
        return self.values.shape[2]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def lattice_values(self) -> np.ndarray:
        """Values reshaped to ``(n_reps, n_1, ..., n_d, m)``."""
        if self.grid is None:
            raise ParameterError("sample is not on a lattice grid")
        return self.values.reshape((self.n_reps,) + self.grid.shape + (self.m,))


def replicate_streams(seed: int, start: int, stop: int) -> Iterator[tuple]:
    """Yield ``(rng, skip, count)`` covering replicates ``start..stop-1``.

    Replicate ``r`` lives in block ``r // REP_BLOCK``; each block has its own
    substream.  ``skip`` replicates must be drawn and discarded from the block
    before ``count`` usable ones.
    """
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ParameterError("seed must be a 64-bit unsigned integer")
    r = start
    while r < stop:
        block = r // REP_BLOCK
        block_end = min((block + 1) * REP_BLOCK, stop)
        ss = np.random.SeedSequence(seed, spawn_key=(block,))
        yield np.random.Generator(np.random.PCG64(ss)), r - block * REP_BLOCK, block_end - r
        r = block_end


def _normals(seed, start, stop, width) -> np.ndarray:
    out = np.empty((stop - start, width))
    row = 0
    for rng, skip, count in replicate_streams(seed, start, stop):
        if skip:
            rng.standard_normal((skip, width))
        rng.standard_normal(out=out[row:row + count])
        row += count
    return out


def _base_metadata(kernel, seed, n_reps, method):
    return {
        "kernel": kernel.kind,
        "kernel_params": kernel.describe(),
        "seed": int(seed),
        "n_reps": int(n_reps),
        "generator": GENERATOR_TAG,
        "method": method,
    }


def sample_gaussian_field(kernel: CovarianceKernel, points, n_reps: int, seed: int,
                          *, rep_offset: int = 0) -> FieldSample:
    """Draw ``n_reps`` mean-zero Gaussian replicates with covariance ``kernel``.

    Points with exactly zero variance (e.g. the origin for Levy fBm) are set to
    0 and left out of the factorization.  ``rep_offset`` selects which
    replicates of the seeded stream are produced.
    """
    grid = points if isinstance(points, LatticeGrid) else None
    P = grid.points if grid is not None else _as_points(points, kernel.d)
    n_reps = int(n_reps)
    if n_reps < 1:
        raise ParameterError("n_reps must be at least 1")
    G = gram_matrix(kernel, P)
    live = np.flatnonzero(np.diag(G) != 0.0)
    L, jitter = cholesky_with_jitter(G[np.ix_(live, live)])
    Z = _normals(seed, rep_offset, rep_offset + n_reps, live.size)
    values = np.zeros((n_reps, P.shape[0], 1))
    values[:, live, 0] = Z @ L.T
    meta = _base_metadata(kernel, seed, n_reps, "cholesky")
    meta["jitter"] = jitter
    if rep_offset:
        meta["rep_offset"] = rep_offset
    return FieldSample(P, values, meta, grid)


def _embedding_eigenvalues(kernel, shape, pad):
    sizes = tuple(2 * n * pad for n in shape)
    lags = [np.minimum(np.arange(M), M - np.arange(M)) for M in sizes]
    mesh = np.meshgrid(*lags, indexing="ij")
    base = kernel.lag(*mesh)
    return np.fft.fftn(base).real, sizes


def sample_stationary_lattice(kernel: CovarianceKernel, grid, n_reps: int, seed: int,
                              *, rep_offset: int = 0, max_pad: int = 4) -> FieldSample:
    """Sample a stationary lattice field by circulant embedding.

    ``grid`` is a shape tuple (the lattice ``{1..n_i}``) or a
    :class:`LatticeGrid` with unit spacing.  The embedding is enlarged up to
    ``max_pad`` times; if it never becomes nonnegative definite the dense
    Cholesky sampler is used instead and ``metadata["method"]`` says so.
    """
    if not isinstance(grid, LatticeGrid):
        grid = LatticeGrid.integer(grid)
    for a in grid.axes:
        if a.size > 1 and not np.all(np.diff(a) == 1.0):
            raise ParameterError("stationary lattice sampler needs unit spacing")
    n_reps = int(n_reps)
    if n_reps < 1:
        raise ParameterError("n_reps must be at least 1")
    shape = grid.shape
    if isinstance(kernel, WhiteNoise):
        Z = _normals(seed, rep_offset, rep_offset + n_reps, grid.n_points)
        meta = _base_metadata(kernel, seed, n_reps, "iid")
        return FieldSample(grid.points, Z[:, :, None], meta, grid)
    if not hasattr(kernel, "lag"):
        raise ParameterError(f"{kernel.kind} is not a stationary lattice kernel")
    pad = 1
    while True:
        eig, sizes = _embedding_eigenvalues(kernel, shape, pad)
        if eig.min() >= -1e-10 * eig.max():
            break
        pad *= 2
        if pad > max_pad:
            out = sample_gaussian_field(kernel, grid, n_reps, seed, rep_offset=rep_offset)
            meta = dict(out.metadata, method="dense-fallback",
                        embedding_min_eig=float(eig.min()))
            return FieldSample(out.points, out.values, meta, grid)
    M = int(np.prod(sizes))
    amp = np.sqrt(np.clip(eig, 0.0, None) / M)
    # each complex draw yields two independent fields (real and imaginary parts);
    # one draw of 2*M normals per replicate pair keeps substreams aligned
    first = rep_offset - rep_offset % 2
    last = rep_offset + n_reps + (rep_offset + n_reps) % 2
    Z = _normals(seed, first // 2, last // 2, 2 * M)
    crop = (slice(None),) + tuple(slice(0, n) for n in shape)
    axes = tuple(range(1, len(sizes) + 1))
    pairs = []
    for j in range(0, Z.shape[0], 64):
        z = (Z[j:j + 64, :M] + 1j * Z[j:j + 64, M:]).reshape((-1,) + sizes)
        W = np.fft.fftn(amp * z, axes=axes)[crop].reshape(z.shape[0], -1)
        pairs.append(np.stack([W.real, W.imag], axis=1).reshape(-1, grid.n_points))
    reps = np.concatenate(pairs, axis=0)
    skip = rep_offset - first
    values = reps[skip:skip + n_reps]
    meta = _base_metadata(kernel, seed, n_reps, "circulant")
    meta["embedding_pad"] = pad
    if rep_offset:
        meta["rep_offset"] = rep_offset
    return FieldSample(grid.points, values[:, :, None], meta, grid)
