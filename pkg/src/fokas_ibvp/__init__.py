"""Unified-transform solver and boundary null-control synthesis for the
advection-diffusion equation on a finite interval."""

from __future__ import annotations

from .contour import PROFILES, AccuracyProfile, Contour, get_profile, make_contour
from .control import (
    ControlProblem,
    ControlSolution,
    assemble_system,
    basis_response_A,
    norm_l2_space,
    norm_l2_time,
    reconstruct_control,
    rhs_B,
    select_delta,
    solve_exact,
    solve_regularized,
    synthesize,
    verify_control,
)
from .direct_solver import (
    BCKind,
    IbvpSpec,
    SolutionGrid,
    braester_profile,
    philip_conductivity,
    solve,
    solve_dd,
    solve_grid,
    solve_nn,
    solve_rd,
    solve_rr,
)
from .errors import (
    ComplexEta,
    CountMismatch,
    DegenerateDenominator,
    FokasError,
    InvalidSpec,
    NotConverged,
    PoleOnContour,
    SingularSystem,
    ZeroTimeUnbounded,
)
from .spectral import NEUMANN, ProblemParams, RootReport, find_roots, root_count, sigma_rho
from .transforms import (
    Constant,
    ConstantSignal,
    ExpSine,
    FullSine,
    HalfCosine,
    PiecewiseStep,
    SineSeries,
    Tabulated,
    Zero,
    constant_signal,
)

__version__ = "0.1.0"
