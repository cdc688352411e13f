"""Material parameters from recovered reflection coefficients.

The dictionary is built from the metal-plate measurement, so each recovered
coefficient is already the amplitude of a reflection relative to the plate
(whose reflection coefficient is -1).  The front-face reflection coefficient
is therefore ``R = -a_front`` and ``sqrt(eps) = (1 - R) / (1 + R)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .dictionary import DelayGrid
from .solvers import SparseCoefficients

Method = Literal["FD", "DU", "L2NM"]

# atoms within this fraction of the recovered time span count as "early"
FRONT_CLUSTER_FRACTION = 0.25
# |1 + R| below this is treated as a perfect conductor
_SINGULAR_TOL = 1e-6


class MaterialError(ValueError):
    """Recovered coefficients cannot be turned into material parameters."""


class SingularReflectionError(MaterialError):
    """R = -1: the sample reflects like the metal reference plate."""


@dataclass(frozen=True)
class HarmonicityReport:
    score: float
    gap: float
    front_delay: float
    multiples: tuple[float, ...]
    harmonic: tuple[bool, ...]


@dataclass
class MaterialEstimate:
    epsilon_real: float
    tan_delta: float
    thickness: float | None
    reflection_coefficient: complex
    front_delay: float
    back_delay: float | None
    method: str
    residual_energy: float
    support_size: int
    harmonicity: float | None = None
    flags: list[str] = field(default_factory=list)


def _atoms(coeffs: SparseCoefficients, grid: DelayGrid) -> tuple[np.ndarray, np.ndarray]:
    support = coeffs.support
    return coeffs.values[support], grid.delays[support]


def front_atom(coeffs: SparseCoefficients, grid: DelayGrid) -> int:
    """Index (into ``grid``) of the atom taken as the front-face reflection.

    It is the largest coefficient among the atoms in the first quarter of the
    recovered time span, so a strong late echo cannot displace a weak front.
    """
    if coeffs.support.size == 0:
        raise MaterialError("no atoms were recovered")
    amps, delays = _atoms(coeffs, grid)
    span = delays.max() - delays.min()
    early = delays <= delays.min() + FRONT_CLUSTER_FRACTION * span
    candidates = np.flatnonzero(early)
    return int(coeffs.support[candidates[np.argmax(np.abs(amps[candidates]))]])


def reflection_from_coeffs(coeffs: SparseCoefficients, grid: DelayGrid) -> tuple[complex, float]:
    """Front-face reflection coefficient and its delay."""
    k = front_atom(coeffs, grid)
    return complex(-coeffs.values[k]), float(grid.delays[k])


def permittivity_from_reflection(R: complex) -> complex:
    """Complex relative permittivity ``((1 - R) / (1 + R))**2``."""
    R = complex(R)
    if abs(1 + R) < _SINGULAR_TOL:
        raise SingularReflectionError(
            "reflection coefficient is -1 (perfect conductor); permittivity undefined"
        )
    n = (1 - R) / (1 + R)
    if n.real < 0:
        n = -n
    return n * n


def loss_factor(epsilon: complex) -> tuple[float, float]:
    """``(eps', tan delta)`` with ``tan delta = |eps''| / eps'``."""
    epsilon = complex(epsilon)
    if epsilon.real <= 0:
        raise MaterialError(f"non-physical permittivity {epsilon}: real part <= 0")
    return epsilon.real, abs(epsilon.imag) / epsilon.real


def dominant_delays(coeffs: SparseCoefficients, grid: DelayGrid) -> tuple[float, float]:
    """Delays of the two largest-magnitude atoms, earliest first."""
    if coeffs.support.size < 2:
        raise MaterialError("thickness needs at least two recovered reflections")
    amps, delays = _atoms(coeffs, grid)
    top = np.argsort(-np.abs(amps), kind="stable")[:2]
    t1, t2 = sorted(delays[top])
    return float(t1), float(t2)


def thickness_from_delays(t1: float, t2: float, epsilon_real: float) -> float:
    if epsilon_real < 1:
        raise MaterialError(f"epsilon_real {epsilon_real} < 1 cannot be used for thickness")
    return float(SPEED_OF_LIGHT * (t2 - t1) / (2 * np.sqrt(epsilon_real)))


def thickness_estimate(coeffs: SparseCoefficients, grid: DelayGrid, epsilon_real: float) -> float:
    t1, t2 = dominant_delays(coeffs, grid)
    return thickness_from_delays(t1, t2, epsilon_real)


def harmonicity_check(
    coeffs: SparseCoefficients, grid: DelayGrid, tolerance: float
) -> HarmonicityReport:
    """Fraction of atoms after the front whose offset is a whole number of gaps.

    The gap is the delay between the two dominant atoms.  Atoms before the
    front atom never count as harmonic.
    """
    t1, t2 = dominant_delays(coeffs, grid)
    gap = t2 - t1
    _, delays = _atoms(coeffs, grid)
    others = np.sort(delays[delays != t1])
    if gap <= 0 or others.size == 0:
        return HarmonicityReport(0.0, gap, t1, (), ())
    ratio = (others - t1) / gap
    nearest = np.round(ratio)
    ok = (nearest >= 1) & (np.abs(others - t1 - nearest * gap) <= tolerance)
    return HarmonicityReport(
        float(ok.mean()), float(gap), t1, tuple(float(r) for r in ratio), tuple(bool(o) for o in ok)
    )


def estimate_material(
    coeffs: SparseCoefficients,
    grid: DelayGrid,
    method: str,
    harmonic_tolerance: float | None = None,
) -> MaterialEstimate:
    """Run the full inversion chain on one set of recovered coefficients.

    Raises :class:`SingularReflectionError` for a metal-like front face.
    Non-physical values (``eps' < 1``) are flagged, not clamped; the
    thickness is then left undefined.
    """
    R, t_front = reflection_from_coeffs(coeffs, grid)
    eps = permittivity_from_reflection(R)
    eps_real, tan_d = loss_factor(eps)
    flags = []
    if eps_real < 1:
        flags.append("epsilon_real_below_one")
    thickness = back = harmonic = None
    if coeffs.support.size >= 2:
        t1, t2 = dominant_delays(coeffs, grid)
        back = t2
        if eps_real >= 1:
            thickness = thickness_from_delays(t1, t2, eps_real)
        if harmonic_tolerance is not None:
            harmonic = harmonicity_check(coeffs, grid, harmonic_tolerance).score
    else:
        flags.append("single_reflection")
    return MaterialEstimate(
        epsilon_real=eps_real,
        tan_delta=tan_d,
        thickness=thickness,
        reflection_coefficient=R,
        front_delay=t_front,
        back_delay=back,
        method=method,
        residual_energy=coeffs.residual_energy,
        support_size=int(coeffs.support.size),
        harmonicity=harmonic,
        flags=flags,
    )
