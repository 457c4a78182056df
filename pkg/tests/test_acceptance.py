"""Acceptance criteria 1-10, each run at its stated tolerance and time limit.

Every criterion prints one ``criterion N: PASS/FAIL`` line (collected into the
terminal summary) and then asserts both the tolerance and the runtime.
Seeds are fixed in advance and never tuned.
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from lampfield.attraction import (direct_sum_variance, exact_sum_variance, fit_normalization_exponent,
                                  normalized_sum, scaling_transition_curve, simulate_partial_sums)
from lampfield.fields import (Cov1D, FBMSheet, FieldSample, LatticeIsotropicLRD, LatticeSeparable, LevyFBM,
                              PolarStationary, WhiteNoise, covariance_R, sample_gaussian_field)
from lampfield.lamperti import (PathOnGrid, check_wmss_shift_equation, lamperti_forward_1d,
                                lamperti_forward_mss, lamperti_inverse_1d, lamperti_inverse_mss,
                                polar_coordinates, polar_forward_levy, polar_inverse_levy)
from lampfield.regvar import CrvfSpec, SlowFn, SlowVaryingSpec, build_jakymiv_svf, estimate_crv_exponents
from lampfield.statcheck import compare_gaussian_fdd, energy_distance_test


def record(number, title, ok, detail, elapsed, limit):
    within = elapsed < limit
    status = "PASS" if ok and within else "FAIL"
    line = f"criterion {number:2d}: {status}  {title}: {detail}; {elapsed:.2f}s (limit {limit:g}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert within, line


def timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


# 1 ---------------------------------------------------------------------------

def _polar_identity():
    rng = np.random.default_rng(101)
    n = 10000
    t = rng.normal(size=(n, 2)) * np.exp(rng.uniform(-3, 3, (n, 1)))
    u = rng.normal(size=(n, 2)) * np.exp(rng.uniform(-3, 3, (n, 1)))
    st, su = polar_coordinates(t), polar_coordinates(u)
    worst = 0.0
    for H in np.arange(1, 11) / 10:
        k = LevyFBM(H)
        lhs = np.concatenate([np.diag(k.cross(t[i:i + 100], u[i:i + 100])) for i in range(0, n, 100)])
        scale = np.exp(H * (st[:, 0] + su[:, 0]))
        rhs = scale * covariance_R(su - st, H)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    return worst


def test_criterion_01_polar_identity():
    worst, dt = timed(_polar_identity)
    record(1, "polar identity", worst <= 1e-12, f"max rel deviation {worst:.2e} (tol 1e-12)", dt, 1)


# 2 ---------------------------------------------------------------------------

def _roundtrips():
    rng = np.random.default_rng(102)
    worst = 0.0

    def dev(a, b):
        return float(np.max(np.abs(np.asarray(a, dtype=float) - b)) / max(1.0, np.max(np.abs(b))))

    for _ in range(1000):
        V = rng.normal(size=(2, 6, 1))
        # multi-self-similar, d and m random
        d = int(rng.integers(1, 4))
        H = rng.uniform(0, 1, (1, d))
        P = np.exp(rng.uniform(-3, 3, (6, d)))
        worst = max(worst, dev(lamperti_inverse_mss(lamperti_forward_mss(PathOnGrid(P, V), H), H).values, V))
        S = np.log(P)
        worst = max(worst, dev(lamperti_forward_mss(lamperti_inverse_mss(PathOnGrid(S, V, "S"), H), H).values, V))
        # polar
        h = float(rng.uniform(0.05, 1))
        Q = rng.normal(size=(6, 2)) * np.exp(rng.uniform(-3, 3, (6, 1)))
        worst = max(worst, dev(polar_inverse_levy(polar_forward_levy(PathOnGrid(Q, V), h), h).values, V))
        s = np.stack([rng.uniform(-3, 3, 6), rng.uniform(-np.pi, np.pi, 6)], 1)
        worst = max(worst, dev(polar_forward_levy(polar_inverse_levy(PathOnGrid(s, V, "S"), h), h).values, V))
        # classical 1-D
        t = np.exp(rng.uniform(-4, 4, (6, 1)))
        worst = max(worst, dev(lamperti_inverse_1d(lamperti_forward_1d(PathOnGrid(t, V), h), h).values, V))
        worst = max(worst, dev(lamperti_forward_1d(lamperti_inverse_1d(PathOnGrid(np.log(t), V, "S"), h), h).values, V))
    return worst


def test_criterion_02_roundtrips():
    worst, dt = timed(_roundtrips)
    record(2, "Lamperti roundtrips", worst <= 1e-12, f"max rel deviation {worst:.2e} over 1000 trials x 6", dt, 5)


# 3 ---------------------------------------------------------------------------

def _sheet_scaling():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 4))
        h = rng.uniform(0.05, 1, d)
        k = FBMSheet(h)
        a = np.exp(rng.uniform(-3, 3, d))
        t = rng.normal(size=(20, d)) * 3
        u = rng.normal(size=(20, d)) * 3
        F2 = np.prod(a ** h) ** 2
        lhs = np.diag(k.cross(t * a, u * a))
        rhs = F2 * np.diag(k.cross(t, u))
        # magnitude of the terms that enter each factor
        scale = F2 * np.prod(np.maximum(np.abs(t), np.abs(u)) ** (2 * h), axis=1)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    return worst


def test_criterion_03_sheet_scaling():
    worst, dt = timed(_sheet_scaling)
    record(3, "m.s.s. kernel scaling", worst <= 1e-12, f"max rel deviation {worst:.2e}", dt, 1)


# 4 ---------------------------------------------------------------------------

def _random_slow(rng):
    def factor():
        kind = rng.choice(["constant", "log", "loglog"])
        if kind == "constant":
            return SlowFn.constant(float(rng.uniform(0.2, 5)))
        return SlowFn(str(kind), power=float(rng.uniform(-2, 2)))

    pick = rng.integers(0, 4)
    if pick == 0:
        return SlowVaryingSpec.product([factor(), factor()])
    if pick == 1:
        return SlowVaryingSpec.sum([SlowFn.log(float(rng.uniform(0.5, 2))), factor()])
    if pick == 2:
        return SlowVaryingSpec.radial(factor())
    k = build_jakymiv_svf(eta_limit=float(rng.uniform(-1, 1)), eta_amp=float(rng.uniform(0, 1)),
                          eps_amp=float(rng.uniform(0, 1)), a=float(rng.uniform(0.5, 2)))
    return SlowVaryingSpec.from_jakymiv(k)


def _representation_recovery():
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(50):
        H = rng.uniform(0, 2, 2)
        spec = CrvfSpec(tuple(H), _random_slow(rng))
        est = estimate_crv_exponents(spec.log, 2.0, 16, (1e50, 1e50), log_values=True)
        worst = max(worst, float(np.max(np.abs(est.H_hat - H))))
    return worst


def test_criterion_04_representation_recovery():
    worst, dt = timed(_representation_recovery)
    record(4, "representation recovery", worst <= 0.02, f"max |H_hat - H| {worst:.4f} (tol 0.02)", dt, 5)


# 5 ---------------------------------------------------------------------------

def _shift_equation():
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(10000):
        d = int(rng.integers(1, 4))
        H = rng.uniform(0, 1, d)
        a, b = np.exp(rng.uniform(-2, 2, d)), np.exp(rng.uniform(-2, 2, d))
        worst = max(worst, check_wmss_shift_equation(H, float(rng.uniform(-3, 3)), [(a, b)]))
    return worst


def test_criterion_05_shift_equation():
    worst, dt = timed(_shift_equation)
    record(5, "shift-equation identity", worst <= 1e-12, f"max residual {worst:.2e}", dt, 1)


# 6 ---------------------------------------------------------------------------

S_POINTS = np.array([[-1.0, 0.0], [-0.5, 1.0], [0.0, 2.5], [0.3, -2.0], [0.8, -0.7], [1.2, 1.7]])


def _mc_polar():
    H = 0.5
    s = S_POINTS
    t = np.exp(s[:, :1]) * np.stack([np.cos(s[:, 1]), np.sin(s[:, 1])], 1)
    X = sample_gaussian_field(LevyFBM(H), t, 2000, 20260601)
    Y = polar_forward_levy(PathOnGrid.from_sample(X), H)
    sample = FieldSample(s, Y.values, {"seed": 20260601})
    return compare_gaussian_fdd(sample, PolarStationary(0.5)), compare_gaussian_fdd(sample, PolarStationary(0.7))


def test_criterion_06_monte_carlo_polar():
    (good, bad), dt = timed(_mc_polar)
    ok = good.passed and not bad.passed
    record(6, "Monte Carlo f.d.d. of transformed Levy fBm", ok,
           f"H=0.5 max z {good.statistic:.2f} (<=3), H=0.7 control max z {bad.statistic:.1f} (>3)", dt, 30)


# 7 ---------------------------------------------------------------------------

def _attraction():
    t = np.array([[0.5, 0.5], [1.0, 1.0], [1.0, 0.5]])
    S = simulate_partial_sums(WhiteNoise(2), (256, 256), (256, 256), t, 10000, 20260607)
    Z = normalized_sum(S, np.sqrt(256.0 * 256.0))
    return compare_gaussian_fdd(FieldSample(t, Z), FBMSheet([0.5, 0.5]))


def test_criterion_07_domain_of_attraction():
    rep, dt = timed(_attraction)
    record(7, "domain-of-attraction desk experiment", rep.passed,
           f"max z vs Brownian sheet {rep.statistic:.2f} (<=3), {rep.extra['n_exceed']} of 6 entries over", dt, 60)


# 8 ---------------------------------------------------------------------------

N_LIST = [16, 32, 64, 128, 256, 512]


def _scaling_transition():
    gammas = (0.5, 1.0, 2.0)
    white = [fit_normalization_exponent(WhiteNoise(2), g, N_LIST).h_hat for g in gammas]
    sep = [fit_normalization_exponent(LatticeSeparable(Cov1D("fgn", 0.8), Cov1D("fgn", 0.3)), g, N_LIST).h_hat
           for g in gammas]
    iso = scaling_transition_curve(LatticeIsotropicLRD(0.5), [0.25, 0.5, 0.75, 1.0, 1.5, 2.0], N_LIST)
    e_white = max(abs(h - (1 + g) / 2) for h, g in zip(white, gammas))
    e_sep = max(abs(h - (0.8 + 0.3 * g)) for h, g in zip(sep, gammas))
    return e_white, e_sep, iso


def test_criterion_08_scaling_transition():
    (e_white, e_sep, iso), dt = timed(_scaling_transition)
    bp = iso.breakpoint
    ok = e_white <= 0.02 and e_sep <= 0.05 and bp["gamma_break"] is not None
    record(8, "scaling-transition harness", ok,
           f"white err {e_white:.4f} (0.02), separable err {e_sep:.4f} (0.05), isotropic q=0.5 "
           f"breakpoint {bp['gamma_break']:.3f} sse ratio {bp['sse_ratio']:.3f}", dt, 60)


# 9 ---------------------------------------------------------------------------

def _oracle_agreement():
    rng = np.random.default_rng(109)
    kernels = [LatticeIsotropicLRD(q) for q in rng.uniform(0.05, 1.95, 4)]
    kernels += [LatticeSeparable(Cov1D("geometric", a), Cov1D("fgn", b))
                for a, b in zip(rng.uniform(-0.9, 0.9, 4), rng.uniform(0.05, 1, 4))]
    mismatches = sum(exact_sum_variance(K, n, m) != direct_sum_variance(K, n, m)
                     for K in kernels for n in range(1, 9) for m in range(1, 9))
    boxes = [(1, 1), (0.5, 0.25), (7 / 64, 50 / 64)]
    sides = [(64, 64), (32, 16), (7, 50)]
    worst_z = 0.0
    mc_kernels = [WhiteNoise(2), LatticeIsotropicLRD(1.0),
                  LatticeSeparable(Cov1D("geometric", 0.5), Cov1D("fgn", 0.7))]
    for j, K in enumerate(mc_kernels):
        S = simulate_partial_sums(K, (64, 64), (64, 64), boxes, 10000, 20260609 + j)[:, :, 0]
        sq = S ** 2
        var, se = sq.mean(0), sq.std(0, ddof=1) / np.sqrt(len(sq))
        exact = np.array([exact_sum_variance(K, n, m) for n, m in sides])
        worst_z = max(worst_z, float(np.max(np.abs(var - exact) / se)))
    return mismatches, len(kernels) * 64, worst_z


def test_criterion_09_oracle_agreement():
    (mismatches, total, worst_z), dt = timed(_oracle_agreement)
    record(9, "oracle agreement", mismatches == 0 and worst_z <= 3,
           f"{mismatches}/{total} exact-vs-direct mismatches, Monte Carlo max z {worst_z:.2f} (<=3)", dt, 30)


# 10 --------------------------------------------------------------------------

CIRCLE = 1.5 * np.array([[np.cos(a), np.sin(a)] for a in np.linspace(0, 2 * np.pi, 6, endpoint=False)])


def _calibration():
    entries = exceed = 0
    for seed in range(200):
        X = sample_gaussian_field(LevyFBM(0.5), CIRCLE, 2000, seed)
        rep = compare_gaussian_fdd(X, LevyFBM(0.5))
        entries += rep.extra["n_entries"]
        exceed += rep.extra["n_exceed"]
    fdd_rate = exceed / entries
    energy = {}
    for alpha, n_perm in ((0.01, 199), (0.05, 99)):
        rejections = 0
        for seed in range(200):
            a = sample_gaussian_field(LevyFBM(0.5), CIRCLE, 100, seed)
            b = sample_gaussian_field(LevyFBM(0.5), CIRCLE, 100, seed, rep_offset=256)
            rejections += not energy_distance_test(a, b, n_perm=n_perm, alpha=alpha, seed=seed).passed
        energy[alpha] = rejections / 200
    return fdd_rate, energy


def test_criterion_10_calibration():
    (fdd_rate, energy), dt = timed(_calibration)
    ok = 0.001 <= fdd_rate <= 0.01 and all(a / 2 <= r <= 2 * a for a, r in energy.items())
    detail = f"fdd per-entry rate {100 * fdd_rate:.2f}% in [0.1%, 1%]; " + ", ".join(
        f"energy alpha={a:g} rate {100 * r:.1f}% in [{50 * a:g}%, {200 * a:g}%]" for a, r in energy.items())
    record(10, "statcheck calibration", ok, detail, dt, 120)
