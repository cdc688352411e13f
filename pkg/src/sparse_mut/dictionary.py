"""Shift dictionaries built from a metal-plate reference spectrum.

Every atom is the CIR of the reference delayed by some ``tau``.  Delays are
applied as phase ramps on the stored reference spectrum, so sub-bin shifts are
exact and no interpolation kernel is involved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward_model import (
    FrequencySweep,
    ImpulseResponse,
    Window,
    spectrum_to_cir,
)


@dataclass(frozen=True)
class DelayGrid:
    """Delays (seconds) attached to dictionary columns.

    Grids built with :meth:`uniform` are strictly increasing with a constant
    step; grids refined by the dictionary update keep their nominal ``step``
    but may drift off uniformity.
    """

    delays: np.ndarray
    step: float

    def __post_init__(self):
        d = np.array(np.atleast_1d(self.delays), dtype=float)
        if d.ndim != 1 or d.size < 1 or not np.all(np.isfinite(d)):
            raise ValueError("a delay grid needs at least one finite delay")
        if not self.step > 0:
            raise ValueError("grid step must be positive")
        d.setflags(write=False)
        object.__setattr__(self, "delays", d)

    @classmethod
    def uniform(cls, start: float, step: float, count: int) -> "DelayGrid":
        if count < 1:
            raise ValueError("grid needs at least one point")
        if not step > 0:
            raise ValueError("grid step must be positive")
        return cls(start + step * np.arange(count), step)

    def __len__(self):
        return self.delays.size

    def with_delay(self, index: int, delay: float) -> "DelayGrid":
        d = self.delays.copy()
        d[index] = delay
        return DelayGrid(d, self.step)


@dataclass(frozen=True)
class ShiftDictionary:
    """``L x G`` matrix of shifted reference CIRs plus what is needed to make more.

    ``columns`` are not normalised: coefficients against this dictionary are
    amplitudes relative to the reference reflection.
    """

    columns: np.ndarray
    grid: DelayGrid
    reference_spectrum: np.ndarray
    sweep: FrequencySweep
    window: Window = "none"
    pad_factor: int = 4
    l_keep: int | None = None

    def __post_init__(self):
        cols = np.array(self.columns, dtype=complex)
        if cols.ndim != 2 or cols.shape[1] != len(self.grid):
            raise ValueError("column count must equal grid length")
        ref = np.array(self.reference_spectrum, dtype=complex)
        if ref.shape != (self.sweep.n_steps,):
            raise ValueError("reference spectrum length must match the sweep")
        cols.setflags(write=False)
        ref.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "reference_spectrum", ref)
        if self.l_keep is None:
            object.__setattr__(self, "l_keep", cols.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.columns.shape

    @property
    def time_step(self) -> float:
        return self.sweep.time_step(self.pad_factor)

    @property
    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.columns, axis=0)

    def synthesize(self, delays) -> np.ndarray:
        """Atoms for arbitrary ``delays`` using this dictionary's settings."""
        return _shift_columns(
            self.reference_spectrum,
            self.sweep,
            np.asarray(delays, dtype=float),
            self.window,
            self.pad_factor,
            self.l_keep,
        )

    def scaled(self, factor: complex) -> "ShiftDictionary":
        return ShiftDictionary(
            self.columns * factor,
            self.grid,
            self.reference_spectrum * factor,
            self.sweep,
            self.window,
            self.pad_factor,
            self.l_keep,
        )


def _check_delays(delays: np.ndarray, sweep: FrequencySweep) -> None:
    if np.any(delays < 0) or np.any(delays >= sweep.unambiguous_range):
        raise ValueError(
            f"shift delays must lie in [0, {sweep.unambiguous_range:.6g}) s"
        )


def _shift_columns(
    reference_spectrum: np.ndarray,
    sweep: FrequencySweep,
    delays: np.ndarray,
    window: Window,
    pad_factor: int,
    l_keep: int | None,
    chunk: int = 256,
) -> np.ndarray:
    _check_delays(delays, sweep)
    m = pad_factor * sweep.n_steps
    if l_keep is None:
        l_keep = m
    if not 1 <= l_keep <= m:
        raise ValueError(f"l_keep must lie in [1, {m}], got {l_keep}")
    fn = sweep.phase_frequencies
    out = np.empty((l_keep, delays.size), dtype=complex)
    # chunked so that the padded (M x chunk) transform stays small
    for start in range(0, delays.size, chunk):
        tau = delays[start : start + chunk]
        ramps = np.exp(-2j * np.pi * np.outer(fn, tau))
        spectra = reference_spectrum[:, None] * ramps
        out[:, start : start + tau.size] = spectrum_to_cir(
            spectra, sweep, window, pad_factor
        )[:l_keep]
    return out


def shift_reference(
    reference_spectrum,
    sweep: FrequencySweep,
    tau: float,
    window: Window = "none",
    pad_factor: int = 4,
    l_keep: int | None = None,
) -> ImpulseResponse:
    """CIR of the reference delayed by ``tau`` seconds (``0 <= tau < 1/delta_f``)."""
    ref = np.asarray(reference_spectrum, dtype=complex)
    col = _shift_columns(ref, sweep, np.array([float(tau)]), window, pad_factor, l_keep)
    return ImpulseResponse(col[:, 0], sweep.time_step(pad_factor), 0.0)


def default_grid(
    sweep: FrequencySweep, pad_factor: int, l_keep: int, start_bin: int = 0
) -> DelayGrid:
    """Grid with one point per CIR bin over the kept window.

    ``start_bin`` trims the tail of the grid: with the reference peak at bin
    ``p``, an atom shifted by more than ``(l_keep - p)`` bins would have its
    main lobe outside the kept window.
    """
    step = sweep.time_step(pad_factor)
    count = max(int(l_keep) - int(start_bin), 1)
    return DelayGrid.uniform(0.0, step, count)


def build_fixed_dictionary(
    reference_spectrum,
    sweep: FrequencySweep,
    grid: DelayGrid,
    window: Window = "none",
    pad_factor: int = 4,
    l_keep: int | None = None,
) -> ShiftDictionary:
    ref = np.asarray(reference_spectrum, dtype=complex)
    if ref.shape != (sweep.n_steps,):
        raise ValueError("reference spectrum length must match the sweep")
    cols = _shift_columns(ref, sweep, grid.delays, window, pad_factor, l_keep)
    return ShiftDictionary(cols, grid, ref, sweep, window, pad_factor, cols.shape[0])


def mini_grid(
    center: float, tau_w: float, tau_mg: float, upper: float | None = None
) -> DelayGrid:
    """Uniform grid of ``floor(tau_w / tau_mg) + 1`` points through ``center``.

    Points run from ``center - floor(n/2) * tau_mg`` to ``center + ceil(n/2) *
    tau_mg`` with ``n = floor(tau_w / tau_mg)``; points outside ``[0, upper)``
    are dropped.
    """
    if not tau_mg > 0 or not tau_w > 0:
        raise ValueError("tau_w and tau_mg must be positive")
    n = int(np.floor(tau_w / tau_mg + 1e-9))
    offsets = np.arange(-(n // 2), n - n // 2 + 1)
    delays = center + tau_mg * offsets
    keep = delays >= 0
    if upper is not None:
        keep &= delays < upper
    if not np.any(keep):
        raise ValueError("mini-grid lies entirely outside the unambiguous range")
    return DelayGrid(delays[keep], tau_mg)


def build_mini_dictionary(
    reference_spectrum,
    sweep: FrequencySweep,
    center: float,
    tau_w: float,
    tau_mg: float,
    window: Window = "none",
    pad_factor: int = 4,
    l_keep: int | None = None,
) -> ShiftDictionary:
    grid = mini_grid(center, tau_w, tau_mg, sweep.unambiguous_range)
    return build_fixed_dictionary(reference_spectrum, sweep, grid, window, pad_factor, l_keep)
