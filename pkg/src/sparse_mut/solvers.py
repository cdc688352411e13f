"""Sparse recovery of reflection coefficients over a shift dictionary.

``solve_fd`` runs OMP on the fixed dictionary.  ``solve_du`` alternates OMP
with a local refinement of the delays of the selected atoms.  ``solve_l2``
is the dense minimum-norm baseline.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Literal

import numpy as np
from scipy.optimize import brentq

from .dictionary import DelayGrid, ShiftDictionary, mini_grid
from .forward_model import ImpulseResponse

log = logging.getLogger(__name__)

# squared relative residual below which OMP stops adding atoms
_RESIDUAL_FLOOR = 1e-24
_MAX_CONDITION = 1e12
# minimum-norm atoms below this fraction of the peak are not counted as reflections
L2_REPORT_THRESHOLD = 1e-3


class RankDeficientError(np.linalg.LinAlgError):
    """Selected atoms are numerically dependent."""


class InfeasibleError(ValueError):
    """The residual tolerance cannot be met by any coefficient vector."""


@dataclass(frozen=True)
class SparseCoefficients:
    values: np.ndarray
    support: np.ndarray
    residual_energy: float

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        s = np.array(np.sort(np.asarray(self.support, dtype=int)), dtype=int)
        v.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "residual_energy", float(self.residual_energy))

    @property
    def amplitudes(self) -> np.ndarray:
        return self.values[self.support]


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by the FD and DU solvers.

    ``tau_mg`` defaults to ``grid step / tau_mg_div``.  ``residual_mode``
    selects how Step 2 forms the residual tested against each mini-dictionary:
    ``"leave_one_out"`` restores the atom under test into the current residual
    of the other atoms, ``"progressive"`` starts every pass from ``h`` and
    subtracts atoms as they are processed.

    The update stops once ``stop_energy_scale * ||h - D a||^2 <= epsilon``.
    ``stop_energy_scale`` lets the stopping test run on a differently
    normalised CIR than the one being solved (see ``pipeline``).
    """

    s0: int = 4
    epsilon: float = 1e-2
    max_iters: int = 10
    tau_mg: float | None = None
    tau_mg_div: float = 50.0
    tau_w_policy: Literal["half_grid_step", "full_grid_step"] = "full_grid_step"
    atom_order: Literal["magnitude", "index"] = "magnitude"
    residual_mode: Literal["leave_one_out", "progressive"] = "leave_one_out"
    stop_energy_scale: float = 1.0

    def __post_init__(self):
        if self.s0 < 1:
            raise ValueError("s0 must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tau_mg is not None and not self.tau_mg > 0:
            raise ValueError("tau_mg must be positive")
        if self.tau_w_policy not in ("half_grid_step", "full_grid_step"):
            raise ValueError(f"unknown tau_w_policy {self.tau_w_policy!r}")
        if self.atom_order not in ("magnitude", "index"):
            raise ValueError(f"unknown atom_order {self.atom_order!r}")
        if self.residual_mode not in ("leave_one_out", "progressive"):
            raise ValueError(f"unknown residual_mode {self.residual_mode!r}")
        if not self.stop_energy_scale > 0:
            raise ValueError("stop_energy_scale must be positive")


@dataclass(frozen=True)
class DuResult:
    coefficients: SparseCoefficients
    dictionary: ShiftDictionary
    grid: DelayGrid
    iterations_run: int
    residual_trace: tuple[float, ...]
    converged: bool
    best_iteration: int


def _columns(D) -> np.ndarray:
    return D.columns if isinstance(D, ShiftDictionary) else np.asarray(D)


def _signal(h) -> np.ndarray:
    return h.values if isinstance(h, ImpulseResponse) else np.asarray(h, dtype=complex)


def _energy(x: np.ndarray) -> float:
    return float(np.vdot(x, x).real)


def _first_argmax(x: np.ndarray) -> int:
    # np.argmax already returns the first maximiser
    return int(np.argmax(x))


def omp(D, h, s0: int) -> SparseCoefficients:
    """Orthogonal matching pursuit with column-norm-normalised selection.

    Stops after ``s0`` atoms or once the residual energy falls to round-off.
    """
    A = _columns(D)
    y = _signal(h)
    n_rows, n_cols = A.shape
    if y.shape != (n_rows,):
        raise ValueError(f"signal length {y.shape} does not match dictionary rows {n_rows}")
    if not 1 <= s0 <= n_cols:
        raise ValueError(f"s0 must lie in [1, {n_cols}], got {s0}")

    norms = np.linalg.norm(A, axis=0)
    live = norms > 0
    safe_norms = np.where(live, norms, 1.0)
    h_energy = _energy(y)
    values = np.zeros(n_cols, dtype=complex)
    if h_energy == 0:
        return SparseCoefficients(values, np.array([], dtype=int), 0.0)

    support: list[int] = []
    residual = y.copy()
    coef = np.zeros(0, dtype=complex)
    for _ in range(s0):
        score = np.abs(A.conj().T @ residual) / safe_norms
        score[~live] = -1.0
        score[support] = -1.0
        k = _first_argmax(score)
        if score[k] <= 0:
            break
        support.append(k)
        sub = A[:, support]
        sv = np.linalg.svd(sub, compute_uv=False)
        if sv[-1] == 0 or sv[0] / sv[-1] > _MAX_CONDITION:
            raise RankDeficientError(
                f"selected atoms {support} are numerically dependent"
            )
        coef = np.linalg.lstsq(sub, y, rcond=None)[0]
        residual = y - sub @ coef
        if _energy(residual) <= _RESIDUAL_FLOOR * h_energy:
            break
    values[support] = coef
    return SparseCoefficients(values, np.array(support, dtype=int), _energy(residual))


def solve_fd(D_f: ShiftDictionary, h, cfg: SolverConfig) -> SparseCoefficients:
    """Fixed-dictionary method: OMP on the fixed shift dictionary."""
    return omp(D_f, h, cfg.s0)


def _search_width(grid: DelayGrid, policy: str) -> float:
    d = grid.delays
    step = d[1] - d[0] if d.size > 1 else grid.step
    return step / 2 if policy == "half_grid_step" else step


def solve_du(
    D_f: ShiftDictionary, h, cfg: SolverConfig, initial: ShiftDictionary | None = None
) -> DuResult:
    """Iterative dictionary update.

    Step 1 solves for the coefficients with OMP on the current dictionary.
    Step 2 visits each selected atom, searches a fine grid of delays around
    it, and swaps the atom for the mini-dictionary column with the highest
    normalised correlation with the residual, if that beats the current one.

    The returned iterate is the one with the lowest residual energy, and the
    fixed-dictionary solution is always a candidate, so the result never fits
    worse than ``solve_fd``.  ``initial`` (same shape as ``D_f``) seeds the
    update with an already refined dictionary.
    """
    y = _signal(h)
    start = D_f if initial is None else initial
    if start.shape != D_f.shape:
        raise ValueError("initial dictionary must have the shape of D_f")
    A = np.array(start.columns, dtype=complex)
    delays = np.array(start.grid.delays, dtype=float)
    tau_w = _search_width(D_f.grid, cfg.tau_w_policy)
    tau_mg = cfg.tau_mg if cfg.tau_mg is not None else D_f.grid.step / cfg.tau_mg_div
    upper = D_f.sweep.unambiguous_range

    trace: list[float] = []
    best = None
    if initial is not None:
        fd = omp(D_f.columns, y, cfg.s0)
        best = (fd, np.array(D_f.columns), np.array(D_f.grid.delays), 0)
    converged = False
    iterations = 0
    for it in range(cfg.max_iters):
        iterations = it + 1
        coeffs = omp(A, y, cfg.s0)
        er = coeffs.residual_energy
        trace.append(er)
        if best is None or er < best[0].residual_energy:
            best = (coeffs, A.copy(), delays.copy(), iterations)
        if er * cfg.stop_energy_scale <= cfg.epsilon:
            converged = True
            break
        if iterations == cfg.max_iters:
            break

        a = coeffs.values
        omega = coeffs.support
        if cfg.atom_order == "magnitude":
            # stable sort keeps the smaller index first on ties
            omega = omega[np.argsort(-np.abs(a[omega]), kind="stable")]
        if cfg.residual_mode == "progressive":
            r = y.copy()
        else:
            r = y - A[:, omega] @ a[omega]
        for j in omega:
            if cfg.residual_mode == "leave_one_out":
                r = r + A[:, j] * a[j]
            grid = mini_grid(delays[j], tau_w, tau_mg, upper)
            cand = D_f.synthesize(grid.delays)
            cand_norms = np.linalg.norm(cand, axis=0)
            corr = np.abs(cand.conj().T @ r) / np.where(cand_norms > 0, cand_norms, np.inf)
            best_i = _first_argmax(corr)
            current = abs(np.vdot(A[:, j], r)) / max(np.linalg.norm(A[:, j]), 1e-300)
            if current < corr[best_i]:
                A[:, j] = cand[:, best_i]
                delays[j] = grid.delays[best_i]
            r = r - A[:, j] * a[j]

    if not converged:
        log.info(
            "dictionary update stopped after %d iterations with residual %.3g > %.3g",
            iterations, trace[-1], cfg.epsilon,
        )
    coeffs, A_best, d_best, best_it = best
    grid = DelayGrid(d_best, D_f.grid.step)
    dictionary = replace(D_f, columns=A_best, grid=grid)
    return DuResult(coeffs, dictionary, grid, iterations, tuple(trace), converged, best_it)


def solve_l2(D_f, h, epsilon: float) -> SparseCoefficients:
    """Minimum-norm coefficients with residual energy at most ``epsilon``.

    Uses the Tikhonov path ``a(lam) = (D^H D + lam I)^-1 D^H h``: the residual
    grows and the norm shrinks with ``lam``, so the answer is the largest
    ``lam`` that still meets the tolerance.
    """
    A = _columns(D_f)
    y = _signal(h)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n_cols = A.shape[1]
    h_energy = _energy(y)
    if h_energy <= epsilon:
        return SparseCoefficients(np.zeros(n_cols, complex), np.array([], int), h_energy)

    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    b = U.conj().T @ y
    # energy outside the column space, computed directly to avoid cancellation
    outside = _energy(y - U @ b)
    rank_tol = s[0] * max(A.shape) * np.finfo(float).eps
    s = np.where(s > rank_tol, s, 0.0)
    pinv_residual = outside + float(np.sum(np.abs(b[s == 0]) ** 2))
    if pinv_residual > epsilon:
        raise InfeasibleError(
            f"least-squares residual {pinv_residual:.4g} exceeds tolerance {epsilon:.4g}"
        )

    def residual(log_lam: float) -> float:
        lam = np.exp(log_lam)
        return outside + float(np.sum(np.abs(lam / (s**2 + lam) * b) ** 2)) - epsilon

    lo, hi = np.log(s[0] ** 2) - 80, np.log(s[0] ** 2) + 40
    if residual(lo) > 0:
        lam = 0.0
    else:
        lam = np.exp(brentq(residual, lo, hi, xtol=1e-12, rtol=1e-12))
    with np.errstate(divide="ignore", invalid="ignore"):
        filt = np.where(s > 0, s / (s**2 + lam), 0.0)
    values = Vh.conj().T @ (filt * b)
    mags = np.abs(values)
    support = np.flatnonzero(mags >= L2_REPORT_THRESHOLD * mags.max()) if mags.max() > 0 else []
    return SparseCoefficients(values, support, _energy(y - A @ values))


@dataclass(frozen=True)
class SparsitySweep:
    best_s0: int
    residuals: dict[int, float]
    results: dict[int, object]
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def best(self):
        return self.results[self.best_s0]


def residual_of(result) -> float:
    if isinstance(result, DuResult):
        return result.coefficients.residual_energy
    return result.residual_energy


def sweep_sparsity(
    D: ShiftDictionary,
    h,
    cfg: SolverConfig,
    s0_range: Iterable[int] = range(2, 9),
    solver: Callable = solve_du,
    tie_rtol: float = 1e-9,
    warm_start: bool = True,
) -> SparsitySweep:
    """Run ``solver`` for each sparsity level and keep the lowest residual.

    Residuals within ``tie_rtol * ||h||^2`` of the minimum count as ties and
    the smallest such ``s0`` wins.  With ``warm_start`` the dictionary update
    at each level starts from the dictionary refined at the previous level.
    """
    s0_values = list(s0_range)
    if not s0_values:
        raise ValueError("s0_range is empty")
    y = _signal(h)
    residuals: dict[int, float] = {}
    results: dict[int, object] = {}
    errors: dict[int, str] = {}
    refined = None
    for s0 in s0_values:
        try:
            if solver is solve_du and warm_start:
                res = solve_du(D, y, replace(cfg, s0=s0), initial=refined)
                refined = res.dictionary
            else:
                res = solver(D, y, replace(cfg, s0=s0))
        except (np.linalg.LinAlgError, ValueError) as exc:
            errors[s0] = f"{type(exc).__name__}: {exc}"
            continue
        results[s0] = res
        residuals[s0] = residual_of(res)
    if not results:
        raise RuntimeError(f"every sparsity level failed: {errors}")
    floor = min(residuals.values()) + tie_rtol * _energy(y)
    best_s0 = min(s for s, r in residuals.items() if r <= floor)
    return SparsitySweep(best_s0, residuals, results, errors)
