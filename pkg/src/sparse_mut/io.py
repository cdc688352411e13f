"""Reading and writing one-port sweeps (Touchstone v1 ``.s1p`` and CSV)."""
from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .forward_model import BasebandSamples, FrequencySweep

_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
_FORMATS = ("RI", "MA", "DB")
# largest deviation of a grid point from the fitted uniform grid, relative to the step
UNIFORM_RTOL = 1e-6


class IngestError(ValueError):
    """Input file is malformed or does not describe a usable sweep."""


def file_digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _parse_option_line(line: str, path) -> tuple[float, str]:
    tokens = line[1:].upper().split()
    unit, fmt, param = 1e9, "MA", "S"
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok in _UNITS:
            unit = _UNITS[tok]
        elif tok in _FORMATS:
            fmt = tok
        elif tok in ("S", "Y", "Z", "G", "H"):
            param = tok
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise IngestError(f"{path}: option line has 'R' without a reference impedance")
            try:
                float(tokens[i + 1])
            except ValueError:
                raise IngestError(f"{path}: bad reference impedance {tokens[i + 1]!r}") from None
            i += 1
        else:
            raise IngestError(f"{path}: unrecognised option {tok!r} in {line.strip()!r}")
        i += 1
    if param != "S":
        raise IngestError(f"{path}: only S-parameters are supported, got {param}")
    return unit, fmt


def _to_complex(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    return mag * np.exp(1j * np.deg2rad(b))


def _as_samples(freqs: np.ndarray, values: np.ndarray, path, resample: bool) -> BasebandSamples:
    """Validate a strictly increasing frequency grid and wrap it as samples."""
    if freqs.size < 2:
        raise IngestError(f"{path}: need at least two frequency points")
    steps = np.diff(freqs)
    if np.any(steps <= 0):
        raise IngestError(f"{path}: frequencies must be strictly increasing")
    n = freqs.size
    delta_f = (freqs[-1] - freqs[0]) / (n - 1)
    uniform = freqs[0] + delta_f * np.arange(n)
    deviation = np.max(np.abs(freqs - uniform)) / delta_f
    if deviation > UNIFORM_RTOL:
        if not resample:
            raise IngestError(
                f"{path}: frequency grid is not uniform (max deviation {deviation:.3g} steps); "
                "pass resample=True to interpolate onto a uniform grid"
            )
        values = np.interp(uniform, freqs, values.real) + 1j * np.interp(uniform, freqs, values.imag)
    if freqs[0] <= 0:
        raise IngestError(f"{path}: start frequency must be positive")
    return BasebandSamples(values, FrequencySweep(float(freqs[0]), float(delta_f), n, 0.0))


def ingest_touchstone(path, resample: bool = False) -> BasebandSamples:
    """Read a one-port Touchstone v1 file in RI, MA or DB format.

    Frequencies must be strictly increasing.  A grid whose points deviate from
    uniform spacing by more than ``UNIFORM_RTOL`` steps is rejected, or
    linearly interpolated onto a uniform grid when ``resample`` is set.
    """
    option = None
    numbers: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("!", 1)[0].strip()
            if not line:
                continue
            if line.startswith("#"):
                if option is None:
                    option = _parse_option_line(line, path)
                continue
            if line.startswith("["):
                raise IngestError(f"{path}: Touchstone v2 keywords are not supported")
            try:
                numbers.extend(float(tok) for tok in line.split())
            except ValueError:
                raise IngestError(f"{path}: non-numeric data line {line!r}") from None
    if option is None:
        raise IngestError(f"{path}: missing option line")
    unit, fmt = option
    if len(numbers) % 3:
        raise IngestError(f"{path}: data does not form (frequency, a, b) triples")
    data = np.array(numbers).reshape(-1, 3)
    freqs = data[:, 0] * unit
    return _as_samples(freqs, _to_complex(data[:, 1], data[:, 2], fmt), path, resample)


CSV_LAYOUTS = {
    "ri": ("freq_hz", "real", "imag"),
    "ma": ("freq_hz", "magnitude", "phase_deg"),
}


def ingest_csv(
    path, columns: tuple[str, str, str] | None = None, layout: str = "ri", resample: bool = False
) -> BasebandSamples:
    """Read a sweep from a CSV with a header row.

    ``layout`` is ``"ri"`` (frequency, real, imaginary) or ``"ma"``
    (frequency, linear magnitude, phase in degrees).  ``columns`` overrides
    the default header names for that layout.  Rows may come in any order.
    """
    if layout not in CSV_LAYOUTS:
        raise IngestError(f"unknown CSV layout {layout!r}; expected one of {sorted(CSV_LAYOUTS)}")
    names = tuple(columns) if columns is not None else CSV_LAYOUTS[layout]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in names if c not in header]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}; header is {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): v for k, v in row.items() if k is not None}
            try:
                rows.append([float(row[c]) for c in names])
            except (TypeError, ValueError):
                raise IngestError(f"{path}:{lineno}: non-numeric or empty cell") from None
    data = np.array(rows, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(data)):
        raise IngestError(f"{path}: NaN or infinite values")
    data = data[np.argsort(data[:, 0], kind="stable")]
    if np.any(np.diff(data[:, 0]) == 0):
        raise IngestError(f"{path}: duplicate frequencies")
    values = _to_complex(data[:, 1], data[:, 2], "RI" if layout == "ri" else "MA")
    return _as_samples(data[:, 0], values, path, resample)


def ingest(path, resample: bool = False) -> BasebandSamples:
    """Dispatch on the file extension (``.csv`` or Touchstone)."""
    if str(path).lower().endswith(".csv"):
        return ingest_csv(path, resample=resample)
    return ingest_touchstone(path, resample=resample)


def write_touchstone(path, samples: BasebandSamples, fmt: str = "RI", comment: str = "") -> None:
    """Write ``samples`` as a one-port Touchstone file with frequencies in Hz."""
    fmt = fmt.upper()
    if fmt not in _FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    v = samples.values
    if fmt == "RI":
        a, b = v.real, v.imag
    else:
        mag = np.abs(v)
        a = mag if fmt == "MA" else 20 * np.log10(mag)
        b = np.rad2deg(np.angle(v))
    lines = [f"! {line}" for line in comment.splitlines()]
    lines.append(f"# HZ S {fmt} R 50")
    for f, x, y in zip(samples.sweep.frequencies, a, b):
        lines.append(f"{f:.17g} {x:.17g} {y:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_csv(path, samples: BasebandSamples) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_LAYOUTS["ri"])
        for f, v in zip(samples.sweep.frequencies, samples.values):
            w.writerow([f"{f:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])
