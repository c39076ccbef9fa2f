"""Wave packets built from exact stationary scattering states.

A packet is a discretised energy integral

    psi(x, t) = sum_j q_j w_j exp(-i E_j t) psi_{E_j}(x) / sqrt(2 pi v_j)

with trapezoid weights q_j, spectral amplitudes w_j normalised so that
sum_j q_j |w_j|^2 = 1, and v_j = k_j / E_j the incident group velocity. The
1/sqrt(2 pi v) factor energy-normalises the scattering states, so the
spatial norm of the incident packet equals the spectral norm.

In the Klein zone the packet uses, by default, the combined solution
(traditional plus flux-balanced virtual incidence). Its right half-line is
then an image region: the field there is kept separately as ``virtual`` and
is not part of the physical electron density.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    BranchPoint,
    EnergyZone,
    InputError,
    NumericError,
    PhysParams,
    Spinor2,
    classify_zone,
    kinematics,
)
from .scatter import Family, ScatterSolution, current_density, solve, transmission_probability


class GridTooNarrow(NumericError):
    pass


class ZoneStraddle(UserWarning):
    """The Gaussian spectrum crossed a zone boundary and was truncated."""


@dataclass(frozen=True)
class SpectralGrid:
    params: PhysParams
    energies: np.ndarray
    weights: np.ndarray
    zones: tuple
    quad: np.ndarray
    x0: float = -40.0
    straddle: bool = False

    @property
    def norm(self) -> float:
        return float(np.sum(self.quad * np.abs(self.weights) ** 2))

    def zone_fractions(self) -> dict[str, float]:
        p = self.quad * np.abs(self.weights) ** 2
        out = {str(z): 0.0 for z in (EnergyZone.KLEIN, EnergyZone.EVANESCENT, EnergyZone.OVER_BARRIER)}
        for z, pj in zip(self.zones, p):
            out[str(z)] += float(pj)
        total = sum(out.values())
        return {k: v / total for k, v in out.items()}

    def velocities(self) -> np.ndarray:
        m = self.params.m
        return np.sqrt(self.energies**2 - m * m) / self.energies

    def __add__(self, other: "SpectralGrid") -> "SpectralGrid":
        _check_same_grid(self, other)
        return SpectralGrid(self.params, self.energies, self.weights + other.weights, self.zones,
                            self.quad, self.x0, self.straddle or other.straddle)

    def __mul__(self, c: complex) -> "SpectralGrid":
        return SpectralGrid(self.params, self.energies, c * self.weights, self.zones, self.quad,
                            self.x0, self.straddle)

    __rmul__ = __mul__


def _check_same_grid(a: SpectralGrid, b: SpectralGrid):
    if a.params != b.params or a.energies.shape != b.energies.shape or not np.array_equal(a.energies, b.energies):
        raise InputError("spectral grids differ")


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    q = np.zeros_like(x)
    dx = np.diff(x)
    q[:-1] += dx / 2
    q[1:] += dx / 2
    return q


def build_gaussian(
    params: PhysParams,
    E0: float,
    sigma_E: float,
    n_samples: int = 256,
    x0: float = -40.0,
) -> SpectralGrid:
    """Gaussian spectrum exp(-(E - E0)^2 / (4 sigma_E^2)) on E0 +- 4 sigma_E.

    The phase exp(-i k x0) places the incident lump at ``x0`` (< 0) at t = 0.
    Samples below threshold or on a zone boundary are dropped, with a
    ZoneStraddle warning when the spectrum crosses a boundary.
    """
    if n_samples < 16:
        raise InputError("n_samples must be >= 16")
    if not sigma_E > 0:
        raise InputError("sigma_E must be positive")
    if not x0 < 0:
        raise InputError("the packet must start left of the step (x0 < 0)")
    lo, hi = E0 - 4 * sigma_E, E0 + 4 * sigma_E
    E = np.linspace(lo, hi, n_samples)
    straddle = any(lo <= b <= hi for b in params.boundaries().values())
    keep, zones = [], []
    for j, Ej in enumerate(E):
        try:
            z = classify_zone(params, float(Ej))
        except BranchPoint:
            continue
        if z is EnergyZone.SUB_THRESHOLD:
            continue
        keep.append(j)
        zones.append(z)
    if len(keep) < 2:
        raise InputError(f"no usable energies in [{lo!r}, {hi!r}]")
    if straddle:
        warnings.warn(f"packet spectrum [{lo:.4g}, {hi:.4g}] crosses a zone boundary; truncated", ZoneStraddle,
                      stacklevel=2)
    E = E[keep]
    k = np.sqrt(E**2 - params.m**2)
    w = np.exp(-((E - E0) ** 2) / (4 * sigma_E**2)) * np.exp(-1j * k * x0)
    q = trapezoid_weights(E)
    w = w / math.sqrt(np.sum(q * np.abs(w) ** 2))
    return SpectralGrid(params, E, w, tuple(zones), q, float(x0), straddle)


@dataclass(frozen=True)
class PacketState:
    grid: SpectralGrid
    t: float
    x: np.ndarray
    incident: np.ndarray  # (2, N) incident part, zero for x >= 0
    reflected: np.ndarray  # (2, N) left-moving part, zero for x >= 0
    right: np.ndarray  # (2, N) physical field for x >= 0
    virtual: np.ndarray  # (2, N) image-region field for x >= 0
    transmitted: np.ndarray  # (2, N) propagating part of ``right``

    @property
    def psi(self) -> np.ndarray:
        return self.incident + self.reflected + self.right

    @property
    def full(self) -> np.ndarray:
        """Complete mathematical solution, image region included."""
        return self.psi + self.virtual

    @property
    def density(self) -> np.ndarray:
        return np.sum(np.abs(self.psi) ** 2, axis=0)

    def spinor(self) -> Spinor2:
        p = self.psi
        return Spinor2(p[0], p[1])

    def current(self) -> np.ndarray:
        return current_density(self.spinor())


def packet_solution(params: PhysParams, E: float, family: Family) -> ScatterSolution:
    if family is Family.VIRTUAL:
        raise InputError("packets are built from electron incidence; use TRADITIONAL or COMBINED")
    return solve(params, E, family)


def _integrate(x, f) -> float:
    return float(np.trapezoid(f, x)) if len(x) > 1 else 0.0


def evolve(
    packet: SpectralGrid,
    t: float,
    x_grid: Sequence[float],
    family: Family = Family.COMBINED,
    check_grid: bool = True,
) -> PacketState:
    """Superpose the stationary states at time ``t`` on ``x_grid``."""
    x = np.asarray(x_grid, dtype=float)
    left = x < 0
    E = packet.energies
    v = packet.velocities()
    c = packet.quad * packet.weights * np.exp(-1j * E * t) / np.sqrt(2 * np.pi * v)

    roles = {"incident": [], "reflected": [], "right": [], "virtual": [], "transmitted": []}
    expected = 0.0
    for j, Ej in enumerate(E):
        sol = packet_solution(packet.params, float(Ej), family)
        pj = packet.quad[j] * abs(packet.weights[j]) ** 2
        expected += pj
        image = sol.which is Family.COMBINED
        j_in = float(current_density(Spinor2(sol.left[0].upper, sol.left[0].lower)))
        for mode in sol.left:
            role = "incident" if mode.label == "incident" else "reflected"
            roles[role].append((j, mode))
        for mode in sol.right:
            if image:
                roles["virtual"].append((j, mode))
                if mode.label == "virtual_incident":
                    j_v = -float(current_density(Spinor2(mode.upper, mode.lower)))
                    expected += pj * abs(mode.amplitude) ** 2 * j_v / j_in
            else:
                roles["right"].append((j, mode))
                if mode.label == "transmitted":
                    roles["transmitted"].append((j, mode))

    fields = {}
    for role, items in roles.items():
        out = np.zeros((2, x.size), dtype=complex)
        if items:
            idx = np.array([j for j, _ in items])
            amp = c[idx] * np.array([m.amplitude for _, m in items])
            rate = np.array([m.rate for _, m in items])
            up = np.array([m.upper for _, m in items])
            lo = np.array([m.lower for _, m in items])
            mask = left if role in ("incident", "reflected") else ~left
            xs = x[mask]
            phase = np.exp(np.outer(xs, rate))
            out[0, mask] = phase @ (amp * up)
            out[1, mask] = phase @ (amp * lo)
        fields[role] = out

    state = PacketState(packet, float(t), x, fields["incident"], fields["reflected"], fields["right"],
                        fields["virtual"], fields["transmitted"])
    if check_grid:
        on_grid = _integrate(x, np.sum(np.abs(state.full) ** 2, axis=0))
        if on_grid < (1 - 1e-3) * expected:
            raise GridTooNarrow(f"only {on_grid:.6g} of norm {expected:.6g} lies on the x-grid at t={t!r}")
    return state


@dataclass(frozen=True)
class PacketDiagnostics:
    refl_norm: float
    pen_prob: float
    trans_norm: float
    left_norm: float
    right_norm: float
    total_norm: float


def reflection_and_penetration(state: PacketState) -> PacketDiagnostics:
    """Norm bookkeeping on the physical field.

    pen_prob is the probability that has left the half-line x < 0, i.e. the
    packet's spectral norm minus the norm found at x < 0. For purely physical
    fields it equals the norm at x >= 0; in the image construction it is the
    time-integrated current through the step.
    """
    x = state.x
    left = x < 0
    rho = state.density
    rho_ref = np.sum(np.abs(state.reflected) ** 2, axis=0)
    rho_tr = np.sum(np.abs(state.transmitted) ** 2, axis=0)
    left_norm = _integrate(x[left], rho[left])
    right_norm = _integrate(x[~left], rho[~left])
    return PacketDiagnostics(
        refl_norm=_integrate(x[left], rho_ref[left]),
        pen_prob=state.grid.norm - left_norm,
        trans_norm=_integrate(x[~left], rho_tr[~left]),
        left_norm=left_norm,
        right_norm=right_norm,
        total_norm=_integrate(x, rho),
    )


def group_velocity_range(packet: SpectralGrid) -> tuple[float, float, float]:
    """(min incident, max incident, max under-step) group speeds."""
    v = packet.velocities()
    v_right = [0.0]
    for Ej in packet.energies:
        kin = kinematics(packet.params, float(Ej))
        eps = abs(Ej - packet.params.V)
        if kin.zone is EnergyZone.OVER_BARRIER:
            v_right.append(kin.right_mode.kp / eps)
        elif kin.zone is EnergyZone.KLEIN:
            v_right.append(kin.right_mode.p / eps)
    return float(v.min()), float(v.max()), float(max(v_right))


def asymptotic_time(packet: SpectralGrid, safety: float = 3.0) -> float:
    """Stand-in for t -> infinity: ``safety`` times the slowest arrival time at the step."""
    v_min, _, _ = group_velocity_range(packet)
    return safety * abs(packet.x0) / v_min


def suggest_x_grid(packet: SpectralGrid, t_max: float, dx: float = 0.05) -> np.ndarray:
    """Uniform grid holding every piece of the packet for 0 <= t <= t_max."""
    v_min, v_max, v_under = group_velocity_range(packet)
    sigma = float(np.sqrt(np.sum(packet.quad * np.abs(packet.weights) ** 2 * (packet.energies - packet.energies.mean()) ** 2)))
    width = v_max / (2 * sigma)
    d = abs(packet.x0)
    spread = t_max * (v_max - v_min)
    pad = 10 * width + spread + 10.0
    x_lo = -(max(d, v_max * t_max - d) + pad)
    x_hi = max(v_under * max(t_max - d / v_max, 0.0), v_under * d / v_min) + pad
    n = int(math.ceil((x_hi - x_lo) / dx)) + 1
    return np.linspace(x_lo, x_hi, n)


def spectral_transmission(packet: SpectralGrid) -> float:
    """Spectral average of the flux transmission probability, sum q |w|^2 |T(E)|^2."""
    T2 = np.array([transmission_probability(solve(packet.params, float(E))) for E in packet.energies])
    return float(np.sum(packet.quad * np.abs(packet.weights) ** 2 * T2))
