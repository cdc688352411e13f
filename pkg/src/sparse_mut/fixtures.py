"""Bundled synthetic measurement pairs with a ground-truth sidecar.

The files under ``data/`` are produced by :func:`write_fixtures`; rerun it
(``python -m sparse_mut.fixtures DIR``) to regenerate them.
"""
from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path

from .io import write_touchstone
from .pipeline import SyntheticSetup, synthesize

TRUTH_FILE = "fixtures_truth.json"

FIXTURES = {
    "ongrid": SyntheticSetup(2.6, 0.005, 3.3e-3, n_steps=401, on_grid=True, seed=0),
    "offgrid": SyntheticSetup(2.8, 0.005, 15.76e-3, n_steps=401, snr_db=30.0, seed=7),
}


def data_dir() -> Path:
    return Path(str(resources.files("sparse_mut") / "data"))


def fixture_paths(name: str) -> tuple[Path, Path]:
    """``(mut, reference)`` Touchstone paths of a bundled fixture."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}")
    d = data_dir()
    return d / f"{name}_mut.s1p", d / f"{name}_ref.s1p"


def load_truth() -> dict:
    return json.loads((data_dir() / TRUTH_FILE).read_text(encoding="utf-8"))


def write_fixtures(directory, pad: int = 4) -> dict:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    truth = {}
    for name, setup in FIXTURES.items():
        mut, ref, slab, _, variance = synthesize(setup, pad)
        write_touchstone(out / f"{name}_mut.s1p", mut, "RI", f"synthetic slab fixture '{name}' (MUT)")
        write_touchstone(out / f"{name}_ref.s1p", ref, "RI", f"synthetic slab fixture '{name}' (metal plate)")
        truth[name] = {
            "epsilon_real": slab.epsilon_real,
            "tan_delta": slab.tan_delta,
            "thickness_m": slab.thickness,
            "standoff_m": slab.standoff,
            "n_bounces": slab.n_bounces,
            "band_hz": [setup.f_start, setup.f_stop],
            "n_steps": setup.n_steps,
            "noise_variance": variance,
            "seed": setup.seed,
            "on_grid_for_pad": pad if setup.on_grid else None,
            "window": "none",
        }
    (out / TRUTH_FILE).write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return truth


if __name__ == "__main__":
    write_fixtures(sys.argv[1] if len(sys.argv) > 1 else data_dir())
