"""Normalization exponents of rectangular sums n x [n^gamma].

For white noise and a separable long-memory lattice the exponent is linear
in gamma.  For the isotropic model (1 + k^2 + l^2)^(-q/2) the curve bends;
the hinge fit reports where, without assuming any critical value.
"""
import numpy as np

from lampfield.attraction import scaling_transition_curve
from lampfield.fields import Cov1D, LatticeIsotropicLRD, LatticeSeparable, WhiteNoise

gammas = np.array([0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0])
n_list = [16, 32, 64, 128, 256, 512]
models = {
    "white noise": WhiteNoise(2),
    "separable fgn(0.8) x fgn(0.3)": LatticeSeparable(Cov1D("fgn", 0.8), Cov1D("fgn", 0.3)),
    "isotropic q=0.5": LatticeIsotropicLRD(0.5),
    "isotropic q=1.5": LatticeIsotropicLRD(1.5),
}

print("gamma " + " ".join(f"{g:6.2f}" for g in gammas))
for name, kernel in models.items():
    rep = scaling_transition_curve(kernel, gammas, n_list)
    bp = rep.breakpoint
    print(f"{name}")
    print("h_hat " + " ".join(f"{h:6.3f}" for h in rep.h_hat))
    print(f"      hinge at {bp['gamma_break']:.3f}, slopes {bp['slope_left']:.3f} / "
          f"{bp['slope_right']:.3f}, sse ratio {bp['sse_ratio']:.3f}")
