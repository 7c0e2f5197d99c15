#!/usr/bin/env python3
"""Reference trajectory of a closed, spatially uniform carbonating cell.

Regenerate with:

    python3 crates/core/tests/oracle/carbonation_0d.py > crates/core/tests/data/carbonation_0d_oracle.csv

With no flux the water content W = θ·S is constant, so the cell reduces to
two ODEs in the CO₂ concentration c and the Ca(OH)₂ concentration ch:

    d/dt[(θ(ch) − W)·c] = −W·K·c·ch
    d ch/dt             = −W·K·c·ch

with θ(ch) = θ₀ + (1 − ch/c⁰)(θ_c − θ₀). They are integrated with an
adaptive implicit Runge–Kutta method (Radau IIA, order 5) at tight
tolerances; the reaction is stiff, so an explicit method would crawl.
"""
import numpy as np
from scipy.integrate import solve_ivp

R, T = 8.314, 293.15
H, K_N, C_OH = 3.375e-4, 8.3, 43.2
P_ATM = 101325.0
THETA_0, THETA_C, C0 = 0.15, 0.11, 1.2e-4
S_INIT = 0.6
CO2_FRACTION = 0.2

K = H * R * T * K_N * C_OH
W = THETA_0 * S_INIT
C_INIT = CO2_FRACTION * P_ATM / (R * T)
DTHETA = (THETA_0 - THETA_C) / C0  # dθ/dch


def theta(ch):
    return THETA_0 + (1.0 - ch / C0) * (THETA_C - THETA_0)


def rhs(_t, y):
    c, ch = y
    rate = W * K * c * ch
    gas = theta(ch) - W
    # (θ − W)·dc/dt + c·θ'(ch)·dch/dt = −rate
    dch = -rate
    dc = (-rate - c * DTHETA * dch) / gas
    return [dc, dch]


def jac(_t, y):
    c, ch = y
    gas = theta(ch) - W
    f = (1.0 - c * DTHETA) / gas
    rate = W * K * c * ch
    drate = np.array([W * K * ch, W * K * c])
    dch = -drate
    # dc/dt = −rate·f, with f depending on c and (through θ) on ch
    df_dc = -DTHETA / gas
    df_dch = -(1.0 - c * DTHETA) * DTHETA / gas**2
    dc = -drate * f - rate * np.array([df_dc, df_dch])
    return np.array([dc, dch])


EARLY = [1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0]
DAYS = [86400.0 * d for d in range(1, 57)]
times = EARLY + DAYS

sol = solve_ivp(rhs, (0.0, times[-1]), [C_INIT, C0], method="Radau", jac=jac,
                t_eval=times, rtol=1e-13, atol=[1e-18, 1e-22], first_step=1e-8)
assert sol.success, sol.message

print("t,co2,caoh2,saturation")
for t, c, ch in zip(sol.t, sol.y[0], sol.y[1]):
    ch = max(ch, 0.0)
    print(f"{float(t)!r},{float(c)!r},{float(ch)!r},{float(W / theta(ch))!r}")
