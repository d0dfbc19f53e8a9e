"""Pointwise closures: double-well potentials, mobilities, material blending,
and the planar algebra of the out-of-plane magnetic field B = (0, 0, b).

All functions are stateless and accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Integral over the real line of the squared derivative of the equilibrium
# interface profile tanh(s/sqrt(2)); equals the integral of sqrt(2 F) across
# the well for the quartic potential.  Verified against adaptive quadrature
# in the diagnostics tests.
EQUILIBRIUM_GRADIENT_ENERGY = 2.0 * math.sqrt(2.0) / 3.0

GINZBURG_LANDAU = "ginzburg-landau"
FLORY_HUGGINS = "flory-huggins"


@dataclass(frozen=True)
class PotentialKind:
    """Double-well bulk energy choice.

    variant "ginzburg-landau": F = (phi^2-1)^2 / 4, minima exactly at +-1.
    variant "flory-huggins": logarithmic entropy plus the quartic well with
    energy parameter theta > 2; defined only for |phi| < 1.
    """

    variant: str = GINZBURG_LANDAU
    theta: float = 4.0

    def __post_init__(self):
        if self.variant not in (GINZBURG_LANDAU, FLORY_HUGGINS):
            raise ValueError(f"unknown potential variant {self.variant!r}")
        if self.variant == FLORY_HUGGINS and not self.theta > 2.0:
            raise ValueError("flory-huggins requires theta > 2")


def _check_fh_domain(phi):
    if np.any(np.abs(phi) >= 1.0):
        raise ValueError("flory-huggins potential needs |phi| < 1")


def potential_F(kind: PotentialKind, phi):
    """Double-well energy density F(phi)."""
    phi = np.asarray(phi, dtype=float)
    if kind.variant == GINZBURG_LANDAU:
        out = 0.25 * (phi**2 - 1.0) ** 2
    else:
        _check_fh_domain(phi)
        out = (
            0.5 * (1.0 + phi) * np.log(0.5 * (1.0 + phi))
            + 0.5 * (1.0 - phi) * np.log(0.5 * (1.0 - phi))
            + 0.25 * kind.theta * (phi**2 - 1.0) ** 2
        )
    return out if out.ndim else float(out)


def potential_f(kind: PotentialKind, phi):
    """Derivative F'(phi)."""
    phi = np.asarray(phi, dtype=float)
    if kind.variant == GINZBURG_LANDAU:
        out = phi**3 - phi
    else:
        _check_fh_domain(phi)
        out = 0.5 * np.log((1.0 + phi) / (1.0 - phi)) + kind.theta * phi * (phi**2 - 1.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MobilityCase:
    """Phase-field mobility M(phi): selects the interface-motion regime.

    case "I":   M = m0           (constant; diffusion survives in the limit)
    case "II":  M = eps * m0     (vanishing; purely transported interface)
    case "III": M = m0 (1-phi^2)_+   (degenerate in the bulk)
    """

    case: str = "I"
    m0: float = 1.0

    def __post_init__(self):
        if self.case not in ("I", "II", "III"):
            raise ValueError(f"mobility case must be I, II or III, got {self.case!r}")
        if not self.m0 > 0.0:
            raise ValueError("m0 must be positive")


def mobility(case: MobilityCase, eps: float, phi):
    phi = np.asarray(phi, dtype=float)
    if case.case == "I":
        out = np.full_like(phi, case.m0)
    elif case.case == "II":
        out = np.full_like(phi, eps * case.m0)
    else:
        out = case.m0 * np.maximum(1.0 - phi**2, 0.0)
    return out if out.ndim else float(out)


def blend(p1: float, p2: float, phi):
    """Linear blend of per-phase properties with phi clamped to [-1, 1].

    Result stays inside [min(p1,p2), max(p1,p2)]; phase 1 is phi = -1.
    """
    if not (p1 > 0.0 and p2 > 0.0):
        raise ValueError("material properties must be positive")
    phi_c = np.clip(np.asarray(phi, dtype=float), -1.0, 1.0)
    out = 0.5 * p1 * (1.0 - phi_c) + 0.5 * p2 * (1.0 + phi_c)
    return out if out.ndim else float(out)


def cross_with_B(vx, vy, b: float):
    """Planar reduction of v x (0,0,b): returns (vy*b, -vx*b).

    (vx,vy) . cross_with_B(vx,vy,b) = 0, the cancellation behind the
    exchange identity (JxB, u) + (uxB, J) = 0.
    """
    return vy * b, -vx * b


@dataclass(frozen=True)
class PhysParams:
    """Physical parameters of a simulation.

    eps: interface width; gamma: surface-tension coefficient; s_stab:
    linear stabilization constant of the phase step; eta/sigma per phase;
    b: magnitude of the applied out-of-plane magnetic field.
    """

    eps: float
    gamma: float
    mobility: MobilityCase = field(default_factory=MobilityCase)
    s_stab: float = 2.0
    eta1: float = 1.0
    eta2: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    b: float = 1.0
    potential: PotentialKind = field(default_factory=PotentialKind)

    def __post_init__(self):
        for name in ("eps", "gamma", "eta1", "eta2", "sigma1", "sigma2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.s_stab < 0.0:
            raise ValueError("s_stab must be nonnegative")

    @property
    def sharp_surface_tension(self) -> float:
        """Surface tension of the zero-width limit: gamma times the profile
        gradient-energy constant."""
        return self.gamma * EQUILIBRIUM_GRADIENT_ENERGY

    def viscosity(self, phi):
        return blend(self.eta1, self.eta2, phi)

    def conductivity(self, phi):
        return blend(self.sigma1, self.sigma2, phi)
