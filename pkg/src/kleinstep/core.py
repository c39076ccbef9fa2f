"""Physical parameters, kinematics and energy-zone classification.

Natural units (hbar = c = 1) throughout. The step sits at x = 0 with V(x) = 0
on the left and V(x) = V on the right.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class KleinError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class InputError(KleinError, ValueError):
    """Rejected physical input (maps to CLI exit code 1)."""

    exit_code = 1


class NumericError(KleinError, ArithmeticError):
    """A numerical procedure failed (maps to CLI exit code 2)."""

    exit_code = 2


class InvalidParams(InputError):
    pass


class BranchPoint(InputError):
    """Energy sits on a threshold where the kinematics are non-analytic."""

    def __init__(self, E: float, boundary: float, name: str):
        self.E = E
        self.boundary = boundary
        self.name = name
        super().__init__(f"E={E!r} is within branch tolerance of the {name} threshold {boundary!r}")


class SubThresholdEnergy(InputError):
    pass


class WrongZone(InputError):
    pass


class EnergyZone(enum.Enum):
    SUB_THRESHOLD = "SubThreshold"
    KLEIN = "Klein"
    EVANESCENT = "Evanescent"
    OVER_BARRIER = "OverBarrier"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PhysParams:
    """Rest mass ``m`` and step height ``V``."""

    m: float = 1.0
    V: float = 4.0

    def __post_init__(self):
        for name in ("m", "V"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise InvalidParams(f"{name} must be a finite positive number, got {val!r}")

    @property
    def has_klein_zone(self) -> bool:
        return self.V > 2 * self.m

    @property
    def eps_branch(self) -> float:
        return 1e-9 * max(self.m, 1.0)

    def boundaries(self) -> dict[str, float]:
        return {"m": self.m, "V-m": self.V - self.m, "V+m": self.V + self.m}


@dataclass(frozen=True)
class Spinor2:
    """Two-component field value (psi_plus, psi_minus).

    Components may be numpy arrays when a field is evaluated on a grid.
    """

    upper: complex
    lower: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.upper, self.lower], dtype=complex)

    def __add__(self, other: "Spinor2") -> "Spinor2":
        return Spinor2(self.upper + other.upper, self.lower + other.lower)

    def __mul__(self, c) -> "Spinor2":
        return Spinor2(c * self.upper, c * self.lower)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Oscillatory:
    """Negative-energy propagating modes under the step (Klein zone)."""

    p: float
    beta: float


@dataclass(frozen=True)
class Evanescent:
    """Decaying mode under the step, |E - V| < m."""

    kappa: float

    def ratio(self, params: PhysParams, E: float) -> float:
        # lower/upper of the decaying spinor: -kappa/(E - V + m)
        return self.kappa / (E - params.V + params.m)


@dataclass(frozen=True)
class PositiveOsc:
    """Positive-energy propagating modes above the step."""

    kp: float
    alpha_p: float


RightMode = Union[Oscillatory, Evanescent, PositiveOsc]


@dataclass(frozen=True)
class Kinematics:
    E: float
    zone: EnergyZone
    k: float
    alpha: float
    right_mode: RightMode

    @property
    def velocity(self) -> float:
        """Group velocity k/E on the left, equal to the flux of a unit spinor."""
        return self.k / self.E


def classify_zone(params: PhysParams, E: float) -> EnergyZone:
    """Return the energy zone of ``E``; thresholds themselves raise BranchPoint."""
    if not math.isfinite(E):
        raise InputError(f"energy must be finite, got {E!r}")
    eps = params.eps_branch
    for name, b in params.boundaries().items():
        if abs(E - b) < eps:
            raise BranchPoint(E, b, name)
    m, V = params.m, params.V
    if E <= m:
        return EnergyZone.SUB_THRESHOLD
    if E > V + m:
        return EnergyZone.OVER_BARRIER
    if E > V - m:
        return EnergyZone.EVANESCENT
    return EnergyZone.KLEIN


def kinematics(params: PhysParams, E: float) -> Kinematics:
    zone = classify_zone(params, E)
    if zone is EnergyZone.SUB_THRESHOLD:
        raise SubThresholdEnergy(f"E={E!r} <= m={params.m!r}: no propagating incident wave")
    m, V = params.m, params.V
    k = math.sqrt((E - m) * (E + m))
    alpha = math.sqrt((E - m) / (E + m))
    if zone is EnergyZone.KLEIN:
        w = V - E
        right: RightMode = Oscillatory(p=math.sqrt((w - m) * (w + m)), beta=math.sqrt((w - m) / (w + m)))
    elif zone is EnergyZone.EVANESCENT:
        eps = E - V
        right = Evanescent(kappa=math.sqrt((m - eps) * (m + eps)))
    else:
        eps = E - V
        right = PositiveOsc(kp=math.sqrt((eps - m) * (eps + m)), alpha_p=math.sqrt((eps - m) / (eps + m)))
    return Kinematics(E=E, zone=zone, k=k, alpha=alpha, right_mode=right)


def zone_interval(params: PhysParams, zone: EnergyZone) -> tuple[float, float]:
    """Open energy interval covered by ``zone`` (may be empty: lo >= hi)."""
    m, V = params.m, params.V
    if zone is EnergyZone.KLEIN:
        return m, V - m
    if zone is EnergyZone.EVANESCENT:
        return max(m, V - m), V + m
    if zone is EnergyZone.OVER_BARRIER:
        return V + m, math.inf
    return -math.inf, m
