"""End-to-end runs: measurement pair in, per-method material estimates out."""
from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .dictionary import DelayGrid, ShiftDictionary, build_fixed_dictionary, default_grid
from .forward_model import (
    SPEED_OF_LIGHT,
    BasebandSamples,
    FrequencySweep,
    ImpulseResponse,
    ReflectionProfile,
    SlabSpec,
    compute_cir,
    simulate_baseband,
    simulate_slab_profile,
    truncate_cir,
)
from .io import file_digest, ingest
from .material import SingularReflectionError, estimate_material
from .solvers import (
    DuResult,
    SolverConfig,
    solve_du,
    solve_fd,
    solve_l2,
    sweep_sparsity,
)

SCHEMA = "sparse-mut/1"
METHOD_NAMES = {"fd": "FD", "du": "DU", "l2": "L2NM"}
DEFAULT_S0_RANGE = tuple(range(2, 9))


@dataclass(frozen=True)
class PipelineConfig:
    """Everything that affects a run; echoed verbatim into the report.

    ``s0`` fixes the sparsity; when it is ``None`` every value in
    ``s0_range`` is tried and the lowest residual wins.  ``du_stop_scale``
    is the factor applied to the DU residual before comparing it with
    ``epsilon``; ``None`` means ``n_steps**2``.
    """

    methods: tuple[str, ...] = ("fd", "du", "l2")
    s0: int | None = None
    s0_range: tuple[int, ...] = DEFAULT_S0_RANGE
    epsilon: float = 1e-2
    max_iters: int = 10
    window: str = "none"
    pad: int = 4
    tau_mg_div: float = 50.0
    tau_w_policy: str = "full_grid_step"
    residual_mode: str = "leave_one_out"
    l_keep: int = 512
    du_stop_scale: float | None = None
    parallel: bool = False

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in METHOD_NAMES]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; expected a subset of {list(METHOD_NAMES)}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must not repeat")
        if self.s0 is not None and self.s0 < 1:
            raise ValueError("s0 must be >= 1")
        if not self.s0_range or min(self.s0_range) < 1:
            raise ValueError("s0_range must be a nonempty set of positive integers")
        if self.l_keep < 1:
            raise ValueError("l_keep must be >= 1")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "s0_range", tuple(int(s) for s in self.s0_range))

    @property
    def sparsity_levels(self) -> tuple[int, ...]:
        return (self.s0,) if self.s0 is not None else self.s0_range

    def solver_config(self, n_steps: int) -> SolverConfig:
        return SolverConfig(
            s0=self.sparsity_levels[0],
            epsilon=self.epsilon,
            max_iters=self.max_iters,
            tau_mg_div=self.tau_mg_div,
            tau_w_policy=self.tau_w_policy,
            residual_mode=self.residual_mode,
            stop_energy_scale=self.stop_scale(n_steps),
        )

    def stop_scale(self, n_steps: int) -> float:
        return float(n_steps) ** 2 if self.du_stop_scale is None else float(self.du_stop_scale)


@dataclass
class MethodResult:
    method: str
    estimate: dict[str, Any] | None = None
    error: str | None = None
    s0: int | None = None
    s0_residuals: dict[str, float] = field(default_factory=dict)
    s0_errors: dict[str, str] = field(default_factory=dict)
    residual_trace: list[float] = field(default_factory=list)
    iterations: int | None = None
    converged: bool | None = None
    atoms: list[dict[str, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.estimate is not None


@dataclass
class RunReport:
    config: dict[str, Any]
    inputs: dict[str, Any]
    methods: list[MethodResult]
    schema: str = SCHEMA
    version: str = __version__
    ground_truth: dict[str, Any] | None = None
    deltas: dict[str, dict[str, Any]] | None = None

    @property
    def succeeded(self) -> bool:
        return any(m.ok for m in self.methods)

    def method(self, name: str) -> MethodResult:
        name = METHOD_NAMES.get(name, name)
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": self.schema,
            "version": self.version,
            "config": self.config,
            "inputs": self.inputs,
            "methods": [asdict(m) for m in self.methods],
            "ground_truth": self.ground_truth,
            "deltas": self.deltas,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunReport":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            config=d["config"],
            inputs=d["inputs"],
            methods=[MethodResult(**m) for m in d["methods"]],
            schema=d["schema"],
            version=d["version"],
            ground_truth=d.get("ground_truth"),
            deltas=d.get("deltas"),
        )


@dataclass(frozen=True)
class Prepared:
    """Normalised CIRs and the fixed dictionary shared by all methods."""

    h: ImpulseResponse
    h_ref: ImpulseResponse
    dictionary: ShiftDictionary
    peak_bin: int
    scale: float


def _samples_digest(s: BasebandSamples) -> str:
    h = hashlib.sha256()
    h.update(np.asarray([s.sweep.f0, s.sweep.delta_f, s.sweep.n_steps, s.sweep.f_if]).tobytes())
    h.update(np.ascontiguousarray(s.values).tobytes())
    return "sha256:" + h.hexdigest()


def prepare(mut: BasebandSamples, ref: BasebandSamples, cfg: PipelineConfig) -> Prepared:
    """CIRs of both sweeps scaled so the reference peak is 1, plus ``D_f``.

    The grid starts at delay zero and stops ``peak_bin`` bins short of
    ``l_keep`` so that every atom keeps its main lobe inside the window.
    """
    if not mut.sweep.compatible_with(ref.sweep):
        raise ValueError("MUT and reference sweeps differ; they must share one frequency grid")
    sweep = ref.sweep
    m = cfg.pad * sweep.n_steps
    if cfg.l_keep > m:
        raise ValueError(f"l_keep {cfg.l_keep} exceeds the padded CIR length {m}")
    h_ref = truncate_cir(compute_cir(ref, cfg.window, cfg.pad), cfg.l_keep)
    h = truncate_cir(compute_cir(mut, cfg.window, cfg.pad), cfg.l_keep)
    peak_bin = int(np.argmax(np.abs(h_ref.values)))
    peak = abs(h_ref.values[peak_bin])
    if peak == 0:
        raise ValueError("reference measurement is identically zero")
    scale = 1.0 / peak
    grid = default_grid(sweep, cfg.pad, cfg.l_keep, start_bin=peak_bin)
    D = build_fixed_dictionary(ref.values, sweep, grid, cfg.window, cfg.pad, cfg.l_keep)
    return Prepared(h.scaled(scale), h_ref.scaled(scale), D.scaled(scale), peak_bin, scale)


def _atoms(values: np.ndarray, support: np.ndarray, grid: DelayGrid) -> list[dict[str, float]]:
    return [
        {"delay_s": float(grid.delays[k]), "re": float(values[k].real), "im": float(values[k].imag)}
        for k in support
    ]


def _estimate_dict(est) -> dict[str, Any]:
    R = est.reflection_coefficient
    return {
        "epsilon_real": est.epsilon_real,
        "tan_delta": est.tan_delta,
        "thickness_m": est.thickness,
        "reflection_coefficient": {"re": R.real, "im": R.imag},
        "front_delay_s": est.front_delay,
        "back_delay_s": est.back_delay,
        "residual_energy": est.residual_energy,
        "support_size": est.support_size,
        "harmonicity": est.harmonicity,
        "flags": list(est.flags),
    }


def run_method(method: str, prep: Prepared, cfg: PipelineConfig) -> MethodResult:
    """Run one method and invert its coefficients; failures become error records."""
    name = METHOD_NAMES[method]
    out = MethodResult(name)
    D, h = prep.dictionary, prep.h
    scfg = cfg.solver_config(D.sweep.n_steps)
    try:
        if method == "l2":
            coeffs = solve_l2(D, h, cfg.epsilon)
            grid = D.grid
        else:
            solver = solve_du if method == "du" else solve_fd
            sweep = sweep_sparsity(D, h, scfg, cfg.sparsity_levels, solver=solver)
            out.s0 = sweep.best_s0
            out.s0_residuals = {str(k): v for k, v in sweep.residuals.items()}
            out.s0_errors = {str(k): v for k, v in sweep.errors.items()}
            best = sweep.best
            if isinstance(best, DuResult):
                coeffs, grid = best.coefficients, best.grid
                out.residual_trace = list(best.residual_trace)
                out.iterations = best.iterations_run
                out.converged = best.converged
            else:
                coeffs, grid = best, D.grid
        out.atoms = _atoms(coeffs.values, coeffs.support, grid)
        est = estimate_material(coeffs, grid, name, harmonic_tolerance=D.grid.step)
        out.estimate = _estimate_dict(est)
    except SingularReflectionError as exc:
        out.error = f"metal-plate degenerate case: {exc}"
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def run_pipeline(
    mut: BasebandSamples, ref: BasebandSamples, cfg: PipelineConfig
) -> tuple[list[MethodResult], Prepared]:
    prep = prepare(mut, ref, cfg)
    if cfg.parallel and len(cfg.methods) > 1:
        with ThreadPoolExecutor(max_workers=len(cfg.methods)) as pool:
            results = list(pool.map(lambda m: run_method(m, prep, cfg), cfg.methods))
    else:
        results = [run_method(m, prep, cfg) for m in cfg.methods]
    return results, prep


def config_echo(cfg: PipelineConfig, sweep: FrequencySweep, prep: Prepared | None) -> dict[str, Any]:
    echo = asdict(cfg)
    echo["methods"] = list(cfg.methods)
    echo["s0_range"] = list(cfg.sparsity_levels)
    echo["du_stop_scale"] = cfg.stop_scale(sweep.n_steps)
    echo.pop("parallel")
    echo["sweep"] = {"f0_hz": sweep.f0, "delta_f_hz": sweep.delta_f, "n_steps": sweep.n_steps}
    if prep is not None:
        echo["grid"] = {
            "size": len(prep.dictionary.grid),
            "step_s": prep.dictionary.grid.step,
            "reference_peak_bin": prep.peak_bin,
            "tau_mg_s": prep.dictionary.grid.step / cfg.tau_mg_div,
        }
    return echo


def run_characterize(mut_path, ref_path, cfg: PipelineConfig, resample: bool = False):
    """Characterise a sample from a measured MUT sweep and a metal-plate sweep.

    Returns ``(report, prepared)``; the second item feeds trace dumps.
    """
    mut = ingest(mut_path, resample=resample)
    ref = ingest(ref_path, resample=resample)
    results, prep = run_pipeline(mut, ref, cfg)
    inputs = {
        "mut": {"path": str(mut_path), "digest": file_digest(mut_path)},
        "reference": {"path": str(ref_path), "digest": file_digest(ref_path)},
    }
    return RunReport(config_echo(cfg, ref.sweep, prep), inputs, results), prep


@dataclass(frozen=True)
class SyntheticSetup:
    """Synthetic slab measurement.

    ``noise_variance`` wins over ``snr_db`` when both are given; the SNR is
    ``mean |y_clean|^2 / sigma^2`` of the MUT samples.  Noise is added to the
    MUT sweep only.  With ``on_grid`` the standoff and thickness are nudged so
    that every echo lands exactly on a dictionary grid point.
    """

    epsilon_real: float
    tan_delta: float
    thickness: float
    standoff: float = 0.05
    n_bounces: int = 5
    f_start: float = 75e9
    f_stop: float = 110e9
    n_steps: int = 1001
    noise_variance: float | None = None
    snr_db: float | None = None
    on_grid: bool = False
    seed: int = 0

    def sweep(self) -> FrequencySweep:
        return FrequencySweep.from_band(self.f_start, self.f_stop, self.n_steps)

    def slab(self, pad: int) -> SlabSpec:
        slab = SlabSpec(self.epsilon_real, self.tan_delta, self.thickness, self.standoff, self.n_bounces)
        if not self.on_grid:
            return slab
        step = self.sweep().time_step(pad)
        front_bins = max(round(2 * self.standoff / SPEED_OF_LIGHT / step), 0)
        gap_bins = max(round(slab.round_trip_delay / step), 1)
        standoff = front_bins * step * SPEED_OF_LIGHT / 2
        thickness = gap_bins * step * SPEED_OF_LIGHT / (2 * np.sqrt(self.epsilon_real))
        return SlabSpec(self.epsilon_real, self.tan_delta, thickness, standoff, self.n_bounces)


def synthesize(setup: SyntheticSetup, pad: int = 4):
    """Noisy MUT samples, clean metal-plate samples and the slab actually used."""
    sweep = setup.sweep()
    slab = setup.slab(pad)
    profile = simulate_slab_profile(slab, sweep)
    clean = simulate_baseband(sweep, profile)
    variance = setup.noise_variance
    if variance is None:
        variance = 0.0 if setup.snr_db is None else float(
            np.mean(np.abs(clean.values) ** 2) / 10 ** (setup.snr_db / 10)
        )
    mut = simulate_baseband(sweep, profile, variance, setup.seed)
    plate = ReflectionProfile([-1.0], [2 * slab.standoff / SPEED_OF_LIGHT])
    ref = simulate_baseband(sweep, plate)
    return mut, ref, slab, profile, variance


def _deltas(results: list[MethodResult], slab: SlabSpec, n_reflections: int) -> dict[str, dict]:
    out = {}
    for r in results:
        if not r.ok:
            continue
        e = r.estimate
        d = e["thickness_m"]
        out[r.method] = {
            "epsilon_real_error": e["epsilon_real"] - slab.epsilon_real,
            "tan_delta_error": e["tan_delta"] - slab.tan_delta,
            "thickness_rel_error": None if d is None else (d - slab.thickness) / slab.thickness,
            "support_size": e["support_size"],
            "true_reflections": n_reflections,
        }
    return out


def run_synthetic(setup: SyntheticSetup, cfg: PipelineConfig) -> tuple[RunReport, Prepared]:
    """Full pipeline on generated data, with errors against the ground truth."""
    mut, ref, slab, profile, variance = synthesize(setup, cfg.pad)
    results, prep = run_pipeline(mut, ref, cfg)
    window_end = cfg.l_keep * mut.sweep.time_step(cfg.pad)
    n_visible = int(np.sum(profile.delays < window_end))
    truth = {
        "epsilon_real": slab.epsilon_real,
        "tan_delta": slab.tan_delta,
        "thickness_m": slab.thickness,
        "standoff_m": slab.standoff,
        "n_bounces": slab.n_bounces,
        "noise_variance": variance,
        "seed": setup.seed,
        "on_grid": setup.on_grid,
        "reflections": [
            {"delay_s": float(t), "re": float(a.real), "im": float(a.imag)}
            for a, t in zip(profile.amplitudes, profile.delays)
        ],
    }
    inputs = {"mut": {"digest": _samples_digest(mut)}, "reference": {"digest": _samples_digest(ref)}}
    report = RunReport(
        config_echo(cfg, mut.sweep, prep), inputs, results,
        ground_truth=truth, deltas=_deltas(results, slab, n_visible),
    )
    return report, prep
