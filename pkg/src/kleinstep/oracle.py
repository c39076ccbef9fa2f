"""Brute-force check of the closed-form amplitudes.

The first-order Dirac system

    d psi+/dx = (E - V(x) + m) psi-
    d psi-/dx = (m + V(x) - E) psi+

is integrated across a smoothed (Sauter) step or barrier, the asymptotic
solution is projected onto flat-region eigenmodes, and the smoothing width
``a`` is extrapolated to zero. Nothing here uses the closed forms from
:mod:`kleinstep.scatter`; the flat-region modes come from an eigen
decomposition of the coefficient matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import expit

from .core import BranchPoint, InputError, NumericError, PhysParams, SubThresholdEnergy


class StiffnessFailure(NumericError):
    pass


class ProjectionIllConditioned(NumericError):
    pass


class NoConvergence(NumericError):
    pass


@dataclass(frozen=True)
class SmoothProfile:
    """Sauter step V0 / (1 + exp(-x/a)), or a barrier of two opposed edges at 0 and L."""

    V0: float
    a: float
    shape: str = "step"
    L: Optional[float] = None

    def __post_init__(self):
        if not self.a > 0:
            raise InputError(f"smoothing width must be positive, got {self.a!r}")
        if self.shape not in ("step", "barrier"):
            raise InputError(f"unknown profile shape {self.shape!r}")
        if self.shape == "barrier" and not (self.L is not None and self.L > 0):
            raise InputError("barrier profile needs L > 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape == "step":
            return self.V0 * expit(x / self.a)
        return self.V0 * (expit(x / self.a) - expit((x - self.L) / self.a))

    @property
    def right_height(self) -> float:
        return self.V0 if self.shape == "step" else 0.0

    @property
    def extent(self) -> tuple[float, float]:
        """Where the profile varies; flats lie outside."""
        return (0.0, 0.0) if self.shape == "step" else (0.0, float(self.L))


@dataclass(frozen=True)
class OdeSolution:
    grid: np.ndarray
    values: np.ndarray  # shape (2, len(grid)), rows psi+ and psi-
    E: float
    m: float
    profile: SmoothProfile
    propagator: np.ndarray = field(repr=False)  # real 2x2, maps psi(x_right) -> psi(x_left)


@dataclass(frozen=True)
class OracleAmplitudes:
    R: complex
    T: complex
    T_flux: float
    defect: float


@dataclass(frozen=True)
class SharpLimit:
    R_extrapolated: complex
    convergence_order: float
    T_extrapolated: complex
    T_flux_extrapolated: float
    residual: float
    a_values: tuple
    R_samples: tuple


def _coeff(m: float, E: float, V: float) -> np.ndarray:
    return np.array([[0.0, E - V + m], [m + V - E, 0.0]])


def flat_modes(m: float, E: float, V: float):
    """Eigenmodes (forward, backward) of the constant-potential system.

    Returns pairs (rate, unit spinor with real non-negative upper component).
    Forward carries positive current when propagating, and decays to the
    right when evanescent.
    """
    lam, vec = np.linalg.eig(_coeff(m, E, V).astype(complex))
    modes = []
    for j in range(2):
        v = vec[:, j] / np.linalg.norm(vec[:, j])
        if abs(v[0]) > 1e-14:
            v = v * (abs(v[0]) / v[0])
        else:
            v = v * (abs(v[1]) / v[1])
        modes.append((complex(lam[j]), v))
    if abs(lam[0].real) > abs(lam[0].imag):
        modes.sort(key=lambda mv: mv[0].real)  # decaying first
    else:
        modes.sort(key=lambda mv: -_flux(mv[1]))
    return modes[0], modes[1]


def _flux(v) -> float:
    return 2.0 * float(np.imag(np.conj(v[0]) * v[1]))


def _check_thresholds(m: float, E: float, heights):
    eps = 1e-9 * max(m, 1.0)
    for V in heights:
        for b in (V - m, V + m):
            if abs(E - b) < eps:
                raise BranchPoint(E, b, "asymptotic channel")


def default_window(profile: SmoothProfile, m: float, E: float) -> tuple[float, float]:
    """Integration interval: flats reached and all channel scales resolved."""
    scales = []
    for V in (0.0, profile.right_height):
        q = math.sqrt(abs((E - V) ** 2 - m * m))
        if q > 0:
            scales.append(q)
    k_min = min(scales)
    lo, hi = profile.extent
    pad = max(40.0 * profile.a, 5.0 / k_min)
    return lo - pad, hi + pad


def integrate_dirac(
    profile: SmoothProfile,
    E: float,
    x_left: Optional[float] = None,
    x_right: Optional[float] = None,
    tol: float = 1e-10,
    *,
    m: float = 1.0,
    method: str = "RK45",
) -> OdeSolution:
    """Integrate from ``x_right`` back to ``x_left`` starting from the forward mode.

    The real 2x2 fundamental matrix is propagated (two independent initial
    conditions); the physical solution is that matrix applied to the
    outgoing (or decaying) right-asymptotic spinor.
    """
    if not tol > 0:
        raise InputError("tol must be positive")
    if E <= m:
        raise SubThresholdEnergy(f"E={E!r} <= m={m!r}: no incident channel on the left")
    _check_thresholds(m, E, {0.0, profile.right_height})
    wl, wr = default_window(profile, m, E)
    x_left = wl if x_left is None else x_left
    x_right = wr if x_right is None else x_right
    lo, hi = profile.extent
    if not (x_left < lo - 10 * profile.a and x_right > hi + 10 * profile.a):
        raise InputError("integration window does not reach the asymptotic flats")

    def rhs(x, y):
        V = profile.V0 * (expit(x / profile.a) if profile.shape == "step"
                          else expit(x / profile.a) - expit((x - profile.L) / profile.a))
        up = E - V + m
        dn = m + V - E
        return [up * y[2], up * y[3], dn * y[0], dn * y[1]]

    res = solve_ivp(rhs, (x_right, x_left), [1.0, 0.0, 0.0, 1.0], method=method,
                    rtol=tol, atol=tol * 1e-2)
    if res.status != 0:
        raise StiffnessFailure(f"integration failed at E={E!r}: {res.message}")
    fund = res.y.reshape(2, 2, -1)
    rate, spinor = flat_modes(m, E, profile.right_height)[0]
    psi_r = spinor * np.exp(rate * x_right)
    values = np.einsum("ijn,j->in", fund, psi_r)
    return OdeSolution(grid=res.t[::-1].copy(), values=values[:, ::-1].copy(), E=E, m=m,
                       profile=profile, propagator=fund[:, :, -1])


def extract_amplitudes(sol: OdeSolution, cond_max: float = 1e10) -> OracleAmplitudes:
    """Project the asymptotic solution onto incident/reflected and outgoing modes."""
    m, E = sol.m, sol.E
    if E <= m:
        raise SubThresholdEnergy("no incident channel")
    x_l, x_r = sol.grid[0], sol.grid[-1]
    (r_in, u_in), (r_ref, u_ref) = flat_modes(m, E, 0.0)
    if abs(r_in.real) > 1e-12 * abs(r_in):
        raise SubThresholdEnergy("left channel is not propagating")
    basis = np.column_stack([u_in * np.exp(r_in * x_l), u_ref * np.exp(r_ref * x_l)])
    cond = np.linalg.cond(basis)
    if not cond < cond_max:
        raise ProjectionIllConditioned(f"projection condition number {cond:.3g}")
    a_in, a_ref = np.linalg.solve(basis, sol.values[:, 0])
    rate_out, u_out = flat_modes(m, E, sol.profile.right_height)[0]
    psi_r = sol.values[:, -1]
    j_in = _flux(u_in) * abs(a_in) ** 2
    T_flux = _flux(psi_r) / j_in
    R = complex(a_ref / a_in)
    return OracleAmplitudes(R=R, T=complex(1.0 / a_in), T_flux=float(T_flux),
                            defect=float(abs(R) ** 2 + T_flux - 1.0))


def fit_power_limit(a: Sequence[float], y: Sequence[complex]):
    """Fit y(a) = y0 + c a^q; returns (y0, q, relative residual).

    q comes from the last three samples and (y0, c) from the last two, so the
    coarser samples only serve as a check of the model: the residual is the
    worst misfit over all samples relative to the largest correction y - y0.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=complex)
    a0, a1, a2 = a[-3:]
    d0, d1 = abs(y[-3] - y[-2]), abs(y[-2] - y[-1])
    if d1 == 0.0:
        return complex(y[-1]), math.inf, 0.0
    target = math.log(d0 / d1) if d0 > 0 else -math.inf

    def g(q):
        return math.log((a0**q - a1**q) / (a1**q - a2**q)) - target

    lo, hi = 1e-3, 12.0
    if not (g(lo) <= 0 <= g(hi)):
        raise NoConvergence(f"samples do not converge as a power of a (|dy|={d0:.3g}, {d1:.3g})")
    q = brentq(g, lo, hi, xtol=1e-12)
    c = (y[-2] - y[-1]) / (a1**q - a2**q)
    y0 = y[-1] - c * a2**q
    scale = float(np.max(np.abs(y - y0)))
    resid = float(np.max(np.abs(y0 + c * a**q - y))) / scale if scale > 0 else 0.0
    return complex(y0), float(q), resid


def sharp_limit(
    params: PhysParams,
    E: float,
    a_sequence: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
    *,
    L: Optional[float] = None,
    tol: float = 1e-10,
    fit_tol: float = 1.0,
) -> SharpLimit:
    """Run the oracle at each smoothing width and extrapolate to a -> 0.

    With ``L`` given, the profile is a smoothed square barrier of width L.
    """
    a_seq = [float(a) for a in a_sequence]
    if len(a_seq) < 3 or any(not (x > y > 0) for x, y in zip(a_seq, a_seq[1:])):
        raise InputError("a_sequence must hold >= 3 strictly decreasing positive widths")
    Rs, Ts, Tf = [], [], []
    for a in a_seq:
        prof = SmoothProfile(params.V, a, "barrier", L) if L is not None else SmoothProfile(params.V, a)
        amp = extract_amplitudes(integrate_dirac(prof, E, tol=tol, m=params.m))
        Rs.append(amp.R)
        Ts.append(amp.T)
        Tf.append(amp.T_flux)
    R0, q, resid = fit_power_limit(a_seq, Rs)
    if resid > fit_tol:
        raise NoConvergence(f"relative extrapolation residual {resid:.3g} exceeds {fit_tol:.3g}")
    T0 = _extrapolate_at(a_seq, Ts, q)
    Tf0 = _extrapolate_at(a_seq, Tf, q).real
    return SharpLimit(R_extrapolated=R0, convergence_order=q, T_extrapolated=T0,
                      T_flux_extrapolated=float(Tf0), residual=resid,
                      a_values=tuple(a_seq), R_samples=tuple(Rs))


def _extrapolate_at(a, y, q) -> complex:
    """Richardson step on the two finest samples at a known order q."""
    if math.isinf(q):
        return complex(y[-1])
    a1, a2 = a[-2], a[-1]
    c = (y[-2] - y[-1]) / (a1**q - a2**q)
    return complex(y[-1] - c * a2**q)
