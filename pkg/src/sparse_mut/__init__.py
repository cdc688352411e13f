"""Sparse recovery of slab reflections and free-space material characterisation."""
__version__ = "0.1.0"

from .dictionary import (  # noqa: E402
    DelayGrid,
    ShiftDictionary,
    build_fixed_dictionary,
    build_mini_dictionary,
    default_grid,
    shift_reference,
)
from .forward_model import (  # noqa: E402
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
from .material import (  # noqa: E402
    MaterialEstimate,
    estimate_material,
    harmonicity_check,
    loss_factor,
    permittivity_from_reflection,
    reflection_from_coeffs,
    thickness_estimate,
)
from .solvers import (  # noqa: E402
    DuResult,
    SolverConfig,
    SparseCoefficients,
    omp,
    solve_du,
    solve_fd,
    solve_l2,
    sweep_sparsity,
)
