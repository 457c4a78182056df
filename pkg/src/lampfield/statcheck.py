"""Statistical verification: covariance comparisons, two-sample tests, and
self-similarity / stationarity checkers.

Gaussian models with closed-form kernels are compared at kernel level
(exact, relative tolerance 1e-12).  Sampled models fall back to covariance
z-scores (default 3 standard errors) or an energy-distance permutation test.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ParameterError
from .fields import CovarianceKernel, FieldSample, _as_points, gram_matrix
from .lamperti import CocycleSpec, DiagonalGroupElement

__all__ = [
    "TestReport",
    "CovarianceEstimate",
    "empirical_covariance",
    "compare_gaussian_fdd",
    "compare_covariances",
    "energy_statistic",
    "energy_distance_test",
    "check_self_similarity",
    "check_stationarity",
    "check_full",
    "FullnessReport",
    "ms_increment_surrogate",
    "reports_to_jsonl",
    "reports_to_csv",
]

KERNEL_TOL = 1e-12
FULL_RATIO = 1e-8


@dataclass(frozen=True)
class TestReport:
    """Outcome of one check.

    ``rule`` is ``"le"`` (pass iff statistic <= threshold) or ``"gt"``
    (pass iff statistic > threshold, used for p-values against alpha).
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    statistic: float
    threshold: float
    rule: str = "le"
    n_reps: int | None = None
    seed: int | None = None
    points: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rule not in ("le", "gt"):
            raise ParameterError(f"unknown rule {self.rule!r}")

    @property
    def passed(self) -> bool:
        if self.rule == "le":
            return bool(self.statistic <= self.threshold)
        return bool(self.statistic > self.threshold)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


_CSV_FIELDS = ["name", "statistic", "threshold", "rule", "pass", "n_reps", "seed", "points", "extra"]


def reports_to_jsonl(reports: Sequence[TestReport]) -> str:
    return "".join(r.to_json() + "\n" for r in reports)


def reports_to_csv(reports: Sequence[TestReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_FIELDS)
    for r in reports:
        d = r.as_dict()
        d["extra"] = json.dumps(d["extra"], sort_keys=True, default=_json_default)
        d["statistic"] = repr(float(d["statistic"]))
        d["threshold"] = repr(float(d["threshold"]))
        w.writerow(["" if d[k] is None else d[k] for k in _CSV_FIELDS])
    return buf.getvalue()


def _describe_points(P) -> str:
    P = np.asarray(P)
    return f"{P.shape[0]} points in R^{P.shape[1]}"


@dataclass
class CovarianceEstimate:
    cov: np.ndarray
    se: np.ndarray
    n_reps: int


def empirical_covariance(sample: FieldSample) -> CovarianceEstimate:
    """Raw second moments ``mean(X_i X_j)`` (models are mean-zero) and their SEs.

    Entries are indexed by ``point * m + component``.  The SE is the replicate
    standard deviation of the products over ``sqrt(n_reps)``.
    """
    n = sample.n_reps
    if n < 2:
        raise ParameterError("empirical covariance needs at least 2 replicates")
    X = sample.values.reshape(n, -1)
    cov = X.T @ X / n
    sq = (X * X).T @ (X * X) / n
    var = (sq - cov * cov) * (n / (n - 1))
    se = np.sqrt(np.clip(var, 0.0, None) / n)
    return CovarianceEstimate(0.5 * (cov + cov.T), 0.5 * (se + se.T), n)


def _zscores(diff, se) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.abs(diff) / se
    z[(se == 0) & (diff == 0)] = 0.0
    z[(se == 0) & (diff != 0)] = np.inf
    return z


def _fdd_report(name, z, k_sigma, n_reps, seed, points, extra) -> TestReport:
    iu = np.triu_indices(z.shape[0])
    zu = z[iu]
    n_entries = int(zu.size)
    extra = dict(extra,
                 n_entries=n_entries,
                 n_exceed=int(np.sum(zu > k_sigma)),
                 expected_false_alarms=float(n_entries * 2.0 * ndtr(-k_sigma)))
    return TestReport(name, float(np.max(zu)), float(k_sigma), "le", n_reps, seed, points, extra)


def compare_gaussian_fdd(sample: FieldSample, kernel: CovarianceKernel, k_sigma: float = 3.0) -> TestReport:
    """Compare a sample's covariance with a model kernel entry by entry.

    The statistic is the largest ``|empirical - K| / SE`` over the upper
    triangle; the check passes iff it is at most ``k_sigma``.  The report
    carries the number of entries and the expected count of false alarms.
    """
    if sample.m != kernel.m:
        raise ParameterError("sample and kernel have different dimensions m")
    est = empirical_covariance(sample)
    K = gram_matrix(kernel, sample.points)
    z = _zscores(est.cov - K, est.se)
    return _fdd_report("gaussian-fdd", z, k_sigma, sample.n_reps, sample.metadata.get("seed"),
                       _describe_points(sample.points), {"kernel": kernel.describe()})


def compare_covariances(a: FieldSample, b: FieldSample, k_sigma: float = 3.0) -> TestReport:
    """Two-sample version of :func:`compare_gaussian_fdd` (SEs add in quadrature)."""
    _check_same_shape(a, b)
    ea = empirical_covariance(a)
    eb = empirical_covariance(b)
    z = _zscores(ea.cov - eb.cov, np.hypot(ea.se, eb.se))
    return _fdd_report("covariance-two-sample", z, k_sigma, min(a.n_reps, b.n_reps),
                       a.metadata.get("seed"), _describe_points(a.points), {})


def _check_same_shape(a: FieldSample, b: FieldSample):
    if a.values.shape[1:] != b.values.shape[1:]:
        raise ParameterError("samples have different point sets or dimensions")


def _pairwise_distances(Z) -> np.ndarray:
    sq = np.sum(Z * Z, axis=1)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    D = np.sqrt(np.clip(D2, 0.0, None))
    np.fill_diagonal(D, 0.0)
    return D


def energy_statistic(x, y) -> float:
    """``2 E|X - Y| - E|X - X'| - E|Y - Y'|`` with V-statistic means."""
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    D = _pairwise_distances(np.concatenate([x, y]))
    z = np.zeros(len(D))
    z[:len(x)] = 1.0
    return float(_energy_from_labels(D, z[:, None], len(x), len(y))[0])


def _energy_from_labels(D, Zl, n, m) -> np.ndarray:
    # Zl: (N, k) indicator columns of the first sample
    total = D.sum()
    Dz = D @ Zl
    s_aa = np.einsum("ik,ik->k", Zl, Dz)
    s_ab = Zl.T @ D.sum(axis=1) - s_aa
    s_bb = total - 2.0 * s_ab - s_aa
    return 2.0 * s_ab / (n * m) - s_aa / n ** 2 - s_bb / m ** 2


def energy_distance_test(a: FieldSample, b: FieldSample, n_perm: int = 199, alpha: float = 0.01,
                         seed: int = 0) -> TestReport:
    """Permutation test of equal finite-dimensional laws via the energy distance.

    Each replicate is one observation (all points and components flattened).
    The p-value is ``(1 + #{perm stat >= observed}) / (n_perm + 1)``; the check
    passes iff ``p > alpha``.
    """
    _check_same_shape(a, b)
    if not np.allclose(a.points, b.points, rtol=0, atol=0):
        raise ParameterError("samples are on different point sets")
    if int(n_perm) < 99:
        raise ParameterError("n_perm must be at least 99")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    x = a.values.reshape(a.n_reps, -1)
    y = b.values.reshape(b.n_reps, -1)
    n, m = len(x), len(y)
    D = _pairwise_distances(np.concatenate([x, y]))
    z0 = np.zeros(n + m)
    z0[:n] = 1.0
    obs = float(_energy_from_labels(D, z0[:, None], n, m)[0])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    perms = np.stack([rng.permutation(z0) for _ in range(int(n_perm))], axis=1)
    stats = _energy_from_labels(D, perms, n, m)
    # a tiny slack keeps exact ties (e.g. identical samples) counted as ties
    slack = 1e-12 * max(1.0, abs(obs))
    p = (1 + int(np.sum(stats >= obs - slack))) / (int(n_perm) + 1)
    return TestReport("energy-distance", p, float(alpha), "gt", min(n, m), int(seed),
                      _describe_points(a.points), {"energy": obs, "n_perm": int(n_perm)})


# ---------------------------------------------------------------------------
# distributional checkers
# ---------------------------------------------------------------------------

def _factor_matrix(C, a: DiagonalGroupElement, m: int) -> np.ndarray:
    if isinstance(C, CocycleSpec):
        return C(a)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return C[0, 0] * np.eye(m) if C.shape == (1, 1) else C


def _kernel_relative(K1, K2) -> float:
    scale = max(np.max(np.abs(K1)), np.max(np.abs(K2)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(K1 - K2)) / scale)


def _sample_compare(sampler, P, Q, transform, n_reps, seed, method, k_sigma, alpha, n_perm, name):
    s1, s2 = np.random.SeedSequence(int(seed)).generate_state(2)
    x = sampler(P, n_reps, int(s1))
    y = sampler(Q, n_reps, int(s2))
    y = FieldSample(x.points, transform(np.asarray(y.values)), dict(y.metadata))
    if method == "energy":
        rep = energy_distance_test(x, y, n_perm=n_perm, alpha=alpha, seed=int(seed))
    else:
        rep = compare_covariances(x, y, k_sigma)
    return TestReport(name, rep.statistic, rep.threshold, rep.rule, n_reps, int(seed), rep.points,
                      dict(rep.extra, method=method))


def check_self_similarity(model, a, C, points, n_reps: int | None = None, seed: int | None = None,
                          *, method: str = "covariance", tol: float = KERNEL_TOL,
                          k_sigma: float = 3.0, alpha: float = 0.01, n_perm: int = 199) -> TestReport:
    """Compare the law of ``X(a.t)`` with that of ``C(a) X(t)`` on ``points``.

    ``model`` is a kernel (exact comparison at relative ``tol``) or a sampler
    ``sampler(points, n_reps, seed) -> FieldSample``.  ``C`` is a
    :class:`CocycleSpec`, a scalar factor, or an ``m x m`` matrix.
    """
    a = a if isinstance(a, DiagonalGroupElement) else DiagonalGroupElement(np.asarray(a, dtype=float))
    if isinstance(model, CovarianceKernel):
        P = _as_points(points, model.d)
        aP = a.act(P)
        F = _factor_matrix(C, a, model.m)
        if F.shape != (1, 1):
            raise ParameterError("kernel-level checks support scalar fields only")
        lhs = gram_matrix(model, aP)
        rhs = F[0, 0] ** 2 * gram_matrix(model, P)
        return TestReport("self-similar", _kernel_relative(lhs, rhs), tol, "le", None, None,
                          _describe_points(P), {"method": "kernel", "scale": list(np.asarray(a.a, dtype=float).tolist())})
    if n_reps is None or seed is None:
        raise ParameterError("sampling checks need n_reps and seed")
    P = np.asarray(points, dtype=float)

    def transform(values):
        return values @ _factor_matrix(C, a, values.shape[-1]).T

    # compare C(a) X(t) (built from a sample at t) with X(a t)
    rep = _sample_compare(sampler=model, P=a.act(P), Q=P, transform=transform, n_reps=n_reps,
                          seed=seed, method=method, k_sigma=k_sigma, alpha=alpha,
                          n_perm=n_perm, name="self-similar")
    return rep


def check_stationarity(model, h, points, n_reps: int | None = None, seed: int | None = None,
                       *, method: str = "covariance", tol: float = KERNEL_TOL,
                       k_sigma: float = 3.0, alpha: float = 0.01, n_perm: int = 199) -> TestReport:
    """Compare the law at ``points`` with the law at ``points + h``."""
    h = np.asarray(h, dtype=float)
    if isinstance(model, CovarianceKernel):
        P = _as_points(points, model.d)
        lhs = gram_matrix(model, P + h)
        rhs = gram_matrix(model, P)
        return TestReport("stationary", _kernel_relative(lhs, rhs), tol, "le", None, None,
                          _describe_points(P), {"method": "kernel", "shift": h.tolist()})
    if n_reps is None or seed is None:
        raise ParameterError("sampling checks need n_reps and seed")
    P = np.asarray(points, dtype=float)
    return _sample_compare(model, P + h, P, lambda v: v, n_reps, seed, method, k_sigma,
                           alpha, n_perm, "stationary")


@dataclass
class FullnessReport:
    min_eig: float
    max_eig: float
    full: bool


def check_full(x) -> FullnessReport:
    """Numerical surrogate for a proper (full) marginal law.

    ``x`` is a covariance matrix or a :class:`FieldSample` (its empirical
    covariance is used).  Full means smallest eigenvalue >= 1e-8 x largest.
    """
    M = empirical_covariance(x).cov if isinstance(x, FieldSample) else np.asarray(x, dtype=float)
    eig = np.linalg.eigvalsh(0.5 * (M + M.T))
    lo, hi = float(eig[0]), float(eig[-1])
    return FullnessReport(lo, hi, bool(hi > 0 and lo >= FULL_RATIO * hi))


def ms_increment_surrogate(kernel: CovarianceKernel, t, direction, eps: Sequence[float]) -> np.ndarray:
    """``E|X(t + eps e) - X(t)|^2`` from the kernel for each ``eps``.

    A finite-grid stand-in for stochastic continuity at ``t``: the values
    should shrink towards 0 as ``eps`` does.  It cannot prove continuity.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(direction, dtype=float)
    out = []
    for h in eps:
        s = t + float(h) * e
        out.append(kernel(s, s) - 2.0 * kernel(s, t) + kernel(t, t))
    return np.asarray(out)
