"""Stepped-frequency measurement model of a dielectric slab and CIR computation.

A reflection profile is a list of ``(amplitude, delay)`` pairs.  The baseband
sample at step ``n`` of a sweep is

    y[n] = sum_k a_k * exp(-j 2 pi (f_if + n * delta_f) * tau_k) + z[n]

and the channel impulse response (CIR) is the inverse DFT of ``y``.  All delays
are kept in seconds, never in bins, so that they are independent of padding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

Window = Literal["none", "hann", "hamming"]
WINDOWS: tuple[str, ...] = ("none", "hann", "hamming")


def _frozen(a, dtype=complex) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FrequencySweep:
    """Uniform SFCW grid ``f0 + n * delta_f`` for ``n = 0 .. n_steps - 1``.

    ``f_if`` is the phase reference used by the baseband model; ingested VNA
    data carry ``f_if = 0``.
    """

    f0: float
    delta_f: float
    n_steps: int
    f_if: float = 0.0

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError(f"f0 must be positive, got {self.f0}")
        if not self.delta_f > 0:
            raise ValueError(f"delta_f must be positive, got {self.delta_f}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_band(cls, f_start: float, f_stop: float, n_steps: int, f_if: float = 0.0):
        """Sweep with ``n_steps`` points spanning ``[f_start, f_stop]`` inclusive."""
        if not f_stop > f_start:
            raise ValueError("f_stop must exceed f_start")
        return cls(f_start, (f_stop - f_start) / (n_steps - 1), n_steps, f_if)

    @property
    def frequencies(self) -> np.ndarray:
        return self.f0 + self.delta_f * np.arange(self.n_steps)

    @property
    def phase_frequencies(self) -> np.ndarray:
        """Frequencies entering the delay phase term, ``f_if + n * delta_f``."""
        return self.f_if + self.delta_f * np.arange(self.n_steps)

    @property
    def center_frequency(self) -> float:
        return self.f0 + 0.5 * (self.n_steps - 1) * self.delta_f

    @property
    def unambiguous_range(self) -> float:
        return 1.0 / self.delta_f

    def time_step(self, pad_factor: int = 1) -> float:
        return 1.0 / (pad_factor * self.n_steps * self.delta_f)

    def compatible_with(self, other: "FrequencySweep", rtol: float = 1e-9) -> bool:
        return (
            self.n_steps == other.n_steps
            and np.isclose(self.f0, other.f0, rtol=rtol, atol=0)
            and np.isclose(self.delta_f, other.delta_f, rtol=rtol, atol=0)
            and np.isclose(self.f_if, other.f_if, rtol=rtol, atol=rtol * self.f0)
        )


@dataclass(frozen=True)
class ReflectionProfile:
    amplitudes: np.ndarray
    delays: np.ndarray

    def __post_init__(self):
        a = _frozen(np.atleast_1d(self.amplitudes), complex)
        t = _frozen(np.atleast_1d(self.delays), float)
        if a.ndim != 1 or a.shape != t.shape:
            raise ValueError("amplitudes and delays must be 1-D and equally long")
        if a.size == 0:
            raise ValueError("a reflection profile needs at least one entry")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("delays must be finite and non-negative")
        if np.any(np.diff(t) <= 0):
            raise ValueError("delays must be strictly increasing")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "delays", t)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[complex, float]]) -> "ReflectionProfile":
        a, t = zip(*pairs)
        return cls(np.array(a), np.array(t))

    def __len__(self):
        return self.amplitudes.size

    def scaled(self, factor: complex) -> "ReflectionProfile":
        return ReflectionProfile(self.amplitudes * factor, self.delays)


@dataclass(frozen=True)
class BasebandSamples:
    values: np.ndarray
    sweep: FrequencySweep

    def __post_init__(self):
        v = _frozen(self.values, complex)
        if v.shape != (self.sweep.n_steps,):
            raise ValueError(
                f"expected {self.sweep.n_steps} samples, got shape {v.shape}"
            )
        object.__setattr__(self, "values", v)

    def __add__(self, other: "BasebandSamples") -> "BasebandSamples":
        if not self.sweep.compatible_with(other.sweep):
            raise ValueError("cannot add samples taken on different sweeps")
        return BasebandSamples(self.values + other.values, self.sweep)

    def scaled(self, factor: complex) -> "BasebandSamples":
        return BasebandSamples(self.values * factor, self.sweep)


@dataclass(frozen=True)
class ImpulseResponse:
    values: np.ndarray
    time_step: float
    t0: float = 0.0

    def __post_init__(self):
        v = _frozen(self.values, complex)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("an impulse response needs at least one bin")
        if not self.time_step > 0:
            raise ValueError("time_step must be positive")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.time_step * np.arange(self.values.size)

    @property
    def energy(self) -> float:
        return float(np.vdot(self.values, self.values).real)

    def scaled(self, factor: complex) -> "ImpulseResponse":
        return ImpulseResponse(self.values * factor, self.time_step, self.t0)


@dataclass(frozen=True)
class SlabSpec:
    """Single homogeneous slab at normal incidence.

    ``standoff`` is the extra one-way distance of the front face relative to
    the metal-plate reference position (zero when the plate sits exactly where
    the sample's front face is).
    """

    epsilon_real: float
    tan_delta: float
    thickness: float
    standoff: float = 0.0
    n_bounces: int = 5

    def __post_init__(self):
        if not self.epsilon_real > 1:
            raise ValueError("epsilon_real must exceed 1")
        if not 0 <= self.tan_delta < 1:
            raise ValueError("tan_delta must lie in [0, 1)")
        if not self.thickness > 0:
            raise ValueError("thickness must be positive")
        if self.standoff < 0:
            raise ValueError("standoff must be non-negative")
        if int(self.n_bounces) != self.n_bounces or self.n_bounces < 1:
            raise ValueError("n_bounces must be an integer >= 1")

    @property
    def epsilon(self) -> complex:
        return self.epsilon_real * (1 - 1j * self.tan_delta)

    @property
    def round_trip_delay(self) -> float:
        return 2 * self.thickness * np.sqrt(self.epsilon_real) / SPEED_OF_LIGHT


def fresnel_reflection(epsilon: complex) -> complex:
    """Normal-incidence reflection coefficient of an air/dielectric interface."""
    n = np.sqrt(complex(epsilon))
    return complex((1 - n) / (1 + n))


def simulate_baseband(
    sweep: FrequencySweep,
    profile: ReflectionProfile,
    noise_variance: float = 0.0,
    seed: int | None = 0,
) -> BasebandSamples:
    """Evaluate the sampled baseband signal for ``profile`` on ``sweep``.

    Noise is circularly-symmetric complex Gaussian with total variance
    ``noise_variance`` per sample (half in each quadrature).
    """
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    phase = np.exp(-2j * np.pi * np.outer(sweep.phase_frequencies, profile.delays))
    values = phase @ profile.amplitudes
    if noise_variance > 0:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(noise_variance / 2)
        values = values + scale * (
            rng.standard_normal(sweep.n_steps) + 1j * rng.standard_normal(sweep.n_steps)
        )
    return BasebandSamples(values, sweep)


def simulate_slab_profile(slab: SlabSpec, sweep: FrequencySweep) -> ReflectionProfile:
    """Front-face reflection followed by ``n_bounces`` internal echoes.

    Echo ``k`` has travelled ``k`` round trips inside the slab and reflected
    ``2k - 1`` times off the inner faces.  Amplitudes are frequency-flat; the
    loss attenuation is evaluated at the sweep's centre frequency.
    """
    eps = slab.epsilon
    n = np.sqrt(eps)
    gamma = (1 - n) / (1 + n)
    transmission = 1 - gamma**2  # product of the two interface transmissions
    alpha = 2 * np.pi * sweep.center_frequency * abs(n.imag) / SPEED_OF_LIGHT
    round_trip_loss = np.exp(-alpha * 2 * slab.thickness)

    t_front = 2 * slab.standoff / SPEED_OF_LIGHT
    k = np.arange(1, slab.n_bounces + 1)
    echoes = transmission * (-gamma) ** (2 * k - 1) * round_trip_loss**k
    amplitudes = np.concatenate([[gamma], echoes])
    delays = t_front + slab.round_trip_delay * np.arange(slab.n_bounces + 1)
    return ReflectionProfile(amplitudes, delays)


def window_taper(window: Window, n: int) -> np.ndarray:
    if window == "none":
        return np.ones(n)
    if window == "hann":
        return np.hanning(n)
    if window == "hamming":
        return np.hamming(n)
    raise ValueError(f"unknown window {window!r}; expected one of {WINDOWS}")


def window_energy_gain(window: Window, n: int) -> float:
    """Noise-energy gain of the amplitude-normalised taper, ``mean(w^2) / mean(w)^2``.

    For white input, ``compute_cir`` output energy is this factor times the
    untapered energy.  It is 1 for ``none``, about 1.5 for ``hann`` and 1.36
    for ``hamming``.
    """
    w = window_taper(window, n)
    return float(np.mean(w**2) / np.mean(w) ** 2)


def spectrum_to_cir(
    spectrum: np.ndarray, sweep: FrequencySweep, window: Window = "none", pad_factor: int = 4
) -> np.ndarray:
    """IDFT of a tapered, zero-padded spectrum; accepts ``(N,)`` or ``(N, K)`` input."""
    if int(pad_factor) != pad_factor or pad_factor < 1:
        raise ValueError(f"pad_factor must be an integer >= 1, got {pad_factor}")
    spectrum = np.asarray(spectrum, dtype=complex)
    n = sweep.n_steps
    if spectrum.shape[0] != n:
        raise ValueError("spectrum length does not match the sweep")
    w = window_taper(window, n)
    m = int(pad_factor) * n
    tapered = spectrum * (w if spectrum.ndim == 1 else w[:, None])
    # scaling keeps the peak of an on-grid reflection equal to its amplitude
    return np.fft.ifft(tapered, n=m, axis=0) * (m / w.sum())


def compute_cir(
    samples: BasebandSamples, window: Window = "none", pad_factor: int = 4
) -> ImpulseResponse:
    """Transform baseband samples to a CIR with ``pad_factor * N`` bins.

    Bin ``m`` sits at delay ``m / (pad_factor * N * delta_f)``.  A reflection
    exactly on a bin shows up with its complex amplitude (times the constant
    ``exp(-j 2 pi f_if tau)``) whatever the window.
    """
    values = spectrum_to_cir(samples.values, samples.sweep, window, pad_factor)
    return ImpulseResponse(values, samples.sweep.time_step(pad_factor), 0.0)


def truncate_cir(h: ImpulseResponse, l_keep: int) -> ImpulseResponse:
    if int(l_keep) != l_keep or not 1 <= l_keep <= len(h):
        raise ValueError(f"l_keep must lie in [1, {len(h)}], got {l_keep}")
    return ImpulseResponse(h.values[: int(l_keep)], h.time_step, h.t0)
