"""Matched stationary solutions of the 1-D Dirac equation for a potential step.

Every solution is stored as a list of plane-wave (or exponential) terms on
each side of x = 0::

    psi(x) = sum_j amplitude_j * spinor_j * exp(rate_j * x)

so that field evaluation, current densities and wave-packet superpositions
share a single code path. Spinors are normalised to unit length, e.g. the
left-region basis is (1, +-i alpha) / sqrt(1 + alpha^2).
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import (
    EnergyZone,
    Evanescent,
    InputError,
    Kinematics,
    Oscillatory,
    PhysParams,
    PositiveOsc,
    Spinor2,
    SubThresholdEnergy,
    WrongZone,
    classify_zone,
    kinematics,
)


class NonpositiveWidth(InputError):
    pass


class Family(enum.Enum):
    TRADITIONAL = "Traditional"
    VIRTUAL = "Virtual"
    COMBINED = "Combined"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Mode:
    """One term amplitude * (upper, lower) * exp(rate * x)."""

    amplitude: complex
    upper: complex
    lower: complex
    rate: complex
    label: str

    def at(self, x) -> Spinor2:
        ph = self.amplitude * np.exp(self.rate * np.asarray(x))
        return Spinor2(self.upper * ph, self.lower * ph)


@dataclass(frozen=True)
class StepAmplitudes:
    """Klein-zone amplitudes: raw (A, B, C, D) and flux-weighted (R, T, R_virt, T_virt)."""

    A: complex
    B: complex
    C: complex
    D: complex
    R: complex
    T: complex
    R_virt: complex
    T_virt: complex


@dataclass(frozen=True)
class EvanescentAmplitudes:
    """Reflected amplitude A (|A| = 1) and amplitude F of the decaying mode."""

    A: complex
    F: complex

    @property
    def R(self) -> complex:
        return self.A

    @property
    def T(self) -> complex:
        return 0j


@dataclass(frozen=True)
class OverBarrierAmplitudes:
    A: complex
    B: complex
    R: complex
    T: complex


Amplitudes = Union[StepAmplitudes, EvanescentAmplitudes, OverBarrierAmplitudes]


@dataclass(frozen=True)
class ScatterSolution:
    params: PhysParams
    E: float
    zone: EnergyZone
    kin: Kinematics
    amps: Amplitudes
    which: Family
    left: tuple[Mode, ...]
    right: tuple[Mode, ...]
    weight: Optional[complex] = None

    def mode(self, label: str) -> Optional[Mode]:
        for m in self.left + self.right:
            if m.label == label:
                return m
        return None


# -- spinor bases -----------------------------------------------------------

def _left_modes(kin: Kinematics):
    n = math.sqrt(1 + kin.alpha**2)
    inc = (1 / n, 1j * kin.alpha / n, 1j * kin.k)
    ref = (1 / n, -1j * kin.alpha / n, -1j * kin.k)
    return inc, ref


def _klein_modes(osc: Oscillatory):
    n = math.sqrt(1 + osc.beta**2)
    # outgoing (rightward flux) negative-energy wave and the virtual incoming one
    out = (-1j * osc.beta / n, 1 / n, -1j * osc.p)
    vin = (1j * osc.beta / n, 1 / n, 1j * osc.p)
    return out, vin


def _mode(amp, basis, label) -> Mode:
    up, lo, rate = basis
    return Mode(complex(amp), complex(up), complex(lo), complex(rate), label)


def _require(kin: Kinematics, zone: EnergyZone):
    if kin.zone is not zone:
        raise WrongZone(f"E={kin.E!r} lies in the {kin.zone} zone, expected {zone}")


def step_amplitudes(params: PhysParams, E: float) -> StepAmplitudes:
    kin = kinematics(params, E)
    _require(kin, EnergyZone.KLEIN)
    return _step_amplitudes(kin)


def _step_amplitudes(kin: Kinematics) -> StepAmplitudes:
    a, b = kin.alpha, kin.right_mode.beta
    ab = a * b
    A = (ab - 1) / (ab + 1)
    C = (ab - 1) / (ab + 1)
    B = 2j * a / (ab + 1) * math.sqrt((1 + b * b) / (1 + a * a))
    D = 2j * b / (ab + 1) * math.sqrt((1 + a * a) / (1 + b * b))
    T = B * math.sqrt((b / a) * (1 + a * a) / (1 + b * b))
    T_virt = D * math.sqrt((a / b) * (1 + b * b) / (1 + a * a))
    return StepAmplitudes(A=complex(A), B=B, C=complex(C), D=D, R=complex(A), T=T, R_virt=complex(C), T_virt=T_virt)


def solve_traditional(params: PhysParams, E: float) -> ScatterSolution:
    """Unit incident electron from the left, reflected A, transmitted B (negative energy)."""
    kin = kinematics(params, E)
    _require(kin, EnergyZone.KLEIN)
    amps = _step_amplitudes(kin)
    inc, ref = _left_modes(kin)
    out, _ = _klein_modes(kin.right_mode)
    return ScatterSolution(
        params, E, kin.zone, kin, amps, Family.TRADITIONAL,
        left=(_mode(1, inc, "incident"), _mode(amps.A, ref, "reflected")),
        right=(_mode(amps.B, out, "transmitted"),),
    )


def solve_virtual(params: PhysParams, E: float) -> ScatterSolution:
    """Unit negative-energy wave incident from the right under the step."""
    kin = kinematics(params, E)
    _require(kin, EnergyZone.KLEIN)
    amps = _step_amplitudes(kin)
    _, ref = _left_modes(kin)
    out, vin = _klein_modes(kin.right_mode)
    return ScatterSolution(
        params, E, kin.zone, kin, amps, Family.VIRTUAL,
        left=(_mode(amps.D, ref, "virtual_transmitted"),),
        right=(_mode(1, vin, "virtual_incident"), _mode(amps.C, out, "virtual_reflected")),
    )


def flux_balanced_weight(kin: Kinematics) -> float:
    """Weight of the virtual beam that equalises its flux with the incident one.

    With this weight the combined solution carries zero current everywhere and
    the electron leaves to the left with unit-modulus amplitude A + w D.
    """
    a, b = kin.alpha, kin.right_mode.beta
    return math.sqrt((a / b) * (1 + b * b) / (1 + a * a))


def solve_combined(params: PhysParams, E: float, w: Optional[complex] = None) -> ScatterSolution:
    """Traditional solution plus ``w`` times the virtual one (default: zero net current)."""
    kin = kinematics(params, E)
    _require(kin, EnergyZone.KLEIN)
    amps = _step_amplitudes(kin)
    if w is None:
        w = flux_balanced_weight(kin)
    w = complex(w)
    inc, ref = _left_modes(kin)
    out, vin = _klein_modes(kin.right_mode)
    return ScatterSolution(
        params, E, kin.zone, kin, amps, Family.COMBINED,
        left=(_mode(1, inc, "incident"), _mode(amps.A + w * amps.D, ref, "reflected")),
        right=(_mode(w, vin, "virtual_incident"), _mode(amps.B + w * amps.C, out, "transmitted")),
        weight=w,
    )


def solve_evanescent(params: PhysParams, E: float) -> ScatterSolution:
    kin = kinematics(params, E)
    _require(kin, EnergyZone.EVANESCENT)
    ev: Evanescent = kin.right_mode
    a = kin.alpha
    g = ev.ratio(params, E)
    A = -(g + 1j * a) / (g - 1j * a)
    na, ng = math.sqrt(1 + a * a), math.sqrt(1 + g * g)
    F = ng * (1 + A) / na
    inc, ref = _left_modes(kin)
    return ScatterSolution(
        params, E, kin.zone, kin, EvanescentAmplitudes(A=A, F=F), Family.TRADITIONAL,
        left=(_mode(1, inc, "incident"), _mode(A, ref, "reflected")),
        right=(_mode(F, (1 / ng, -g / ng, -ev.kappa), "decaying"),),
    )


def solve_overbarrier(params: PhysParams, E: float) -> ScatterSolution:
    kin = kinematics(params, E)
    _require(kin, EnergyZone.OVER_BARRIER)
    po: PositiveOsc = kin.right_mode
    a, ap = kin.alpha, po.alpha_p
    A = (a - ap) / (a + ap)
    na, nap = math.sqrt(1 + a * a), math.sqrt(1 + ap * ap)
    B = 2 * a / (a + ap) * nap / na
    T = B * math.sqrt((ap / a) * (na * na) / (nap * nap))
    inc, ref = _left_modes(kin)
    return ScatterSolution(
        params, E, kin.zone, kin, OverBarrierAmplitudes(A=complex(A), B=complex(B), R=complex(A), T=complex(T)),
        Family.TRADITIONAL,
        left=(_mode(1, inc, "incident"), _mode(A, ref, "reflected")),
        right=(_mode(B, (1 / nap, 1j * ap / nap, 1j * po.kp), "transmitted"),),
    )


def solve(params: PhysParams, E: float, family: Family = Family.TRADITIONAL) -> ScatterSolution:
    """Zone-dispatching solver for electron incidence from the left.

    ``family`` only matters in the Klein zone; elsewhere there is a single
    physical solution.
    """
    zone = classify_zone(params, E)
    if zone is EnergyZone.SUB_THRESHOLD:
        raise SubThresholdEnergy(f"E={E!r} <= m={params.m!r}: no propagating incident wave")
    if zone is EnergyZone.EVANESCENT:
        return solve_evanescent(params, E)
    if zone is EnergyZone.OVER_BARRIER:
        return solve_overbarrier(params, E)
    if family is Family.VIRTUAL:
        return solve_virtual(params, E)
    if family is Family.COMBINED:
        return solve_combined(params, E)
    return solve_traditional(params, E)


def evaluate_field(sol: ScatterSolution, x) -> Spinor2:
    """Field of ``sol`` at ``x`` (scalar or array); left terms for x < 0."""
    x = np.asarray(x, dtype=float)
    up_l = sum(m.at(x).upper for m in sol.left)
    lo_l = sum(m.at(x).lower for m in sol.left)
    up_r = sum(m.at(x).upper for m in sol.right)
    lo_r = sum(m.at(x).lower for m in sol.right)
    left = x < 0
    up = np.where(left, up_l, up_r)
    lo = np.where(left, lo_l, lo_r)
    if up.ndim == 0:
        return Spinor2(complex(up), complex(lo))
    return Spinor2(up, lo)


def current_density(psi: Spinor2):
    """J = -i psi^dagger sigma_3 sigma_1 psi = 2 Im(conj(psi+) psi-)."""
    return 2.0 * np.imag(np.conj(psi.upper) * psi.lower)


def reflection_probability(sol: ScatterSolution) -> float:
    """Flux-weighted reflected fraction, |reflected amplitude|^2."""
    m = sol.mode("reflected")
    return abs(m.amplitude) ** 2 if m is not None else 0.0


def transmission_probability(sol: ScatterSolution) -> float:
    """Transmitted flux divided by incident flux."""
    inc = sol.mode("incident")
    if inc is None:
        return 0.0
    j_in = float(current_density(Spinor2(inc.upper, inc.lower)))
    out = sol.mode("transmitted")
    if out is None or sol.zone is EnergyZone.EVANESCENT:
        return 0.0
    return float(current_density(Spinor2(out.upper, out.lower))) * abs(out.amplitude) ** 2 / j_in


@dataclass(frozen=True)
class UnitarityReport:
    sum_traditional: float
    sum_virtual: float
    A_eq_C_gap: float


def unitarity_report(params: PhysParams, E: float) -> UnitarityReport:
    amps = step_amplitudes(params, E)
    return UnitarityReport(
        sum_traditional=abs(amps.R) ** 2 + abs(amps.T_virt) ** 2,
        sum_virtual=abs(amps.R_virt) ** 2 + abs(amps.T) ** 2,
        A_eq_C_gap=abs(amps.A - amps.C),
    )


# -- square barrier ------------------------------------------------------------

def region_basis(m: float, E: float, U: float) -> tuple[tuple[complex, complex, complex], ...]:
    """(forward, backward) unit spinors and rates in a flat region of potential U.

    Forward means rightward flux for propagating channels and the decaying
    solution for an evanescent channel.
    """
    eps = E - U
    if eps > m:
        kq = math.sqrt((eps - m) * (eps + m))
        al = math.sqrt((eps - m) / (eps + m))
        n = math.sqrt(1 + al * al)
        return (1 / n, 1j * al / n, 1j * kq), (1 / n, -1j * al / n, -1j * kq)
    if eps < -m:
        return _klein_modes(Oscillatory(p=math.sqrt((-eps - m) * (-eps + m)), beta=math.sqrt((-eps - m) / (-eps + m))))
    kap = math.sqrt((m - eps) * (m + eps))
    g = kap / (eps + m)
    n = math.sqrt(1 + g * g)
    return (1 / n, -g / n, -kap), (1 / n, g / n, kap)


def mode_matrix(basis, x: float) -> np.ndarray:
    """Columns are the basis spinors evaluated at ``x``."""
    cols = [np.array([up, lo]) * cmath.exp(rate * x) for up, lo, rate in basis]
    return np.column_stack(cols)


def interface_matrix(basis_left, basis_right, x0: float) -> np.ndarray:
    """Maps mode amplitudes left of ``x0`` to those right of it (field continuity)."""
    return np.linalg.solve(mode_matrix(basis_right, x0), mode_matrix(basis_left, x0))


@dataclass(frozen=True)
class BarrierResult:
    R: complex
    T: complex
    transfer: np.ndarray


def square_barrier(params: PhysParams, L: float, E: float) -> BarrierResult:
    """Barrier of height V on 0 < x < L, electron incident from the left."""
    if not (L > 0 and math.isfinite(L)):
        raise NonpositiveWidth(f"barrier width must be positive, got {L!r}")
    zone = classify_zone(params, E)
    if zone is EnergyZone.SUB_THRESHOLD:
        raise SubThresholdEnergy(f"E={E!r} <= m={params.m!r}")
    outer = region_basis(params.m, E, 0.0)
    inner = region_basis(params.m, E, params.V)
    M = interface_matrix(inner, outer, L) @ interface_matrix(outer, inner, 0.0)
    r = -M[1, 0] / M[1, 1]
    t = M[0, 0] + M[0, 1] * r
    return BarrierResult(R=complex(r), T=complex(t), transfer=M)
