# Filament laboratory package
from .errors import (
    FilamentLabError, NumericalError, ResolutionError, TransformUndefinedError,
    UnsupportedOrderError, ValidationError,
)
from .grid import GridSpec, VecField, UnitVecField, derivative, l2_inner, sobolev_norm, unit_drift
from .jets import BoundaryJet, Jet
from .compat import (
    BlendedCorrection, CompatOrder, CompatReport, check_compat, correct_datum,
    enforce_compat, eval_P, eval_Q, orthogonality_defect,
)
from .datums import BUILTIN_DATA, make_datum
from .dynamics import (
    BlockTridiagonal, FilamentState, SolverConfig, epsilon_sweep, reconstruct_position,
    rhs_lie, rhs_regularized, simulate, step_midpoint_sphere, step_semi_implicit,
)
from .sweep_manager import SweepManager
from .diagnostics import (
    HasimotoProfile, InvariantSeries, boundary_identity_check, hasimoto, invariants,
    parity_identities,
)
from .storage import SnapshotStore
from .runner import FilamentLab, RunConfig, load_run_config

__all__ = [
    'FilamentLabError', 'NumericalError', 'ResolutionError', 'TransformUndefinedError',
    'UnsupportedOrderError', 'ValidationError',
    'GridSpec', 'VecField', 'UnitVecField', 'derivative', 'l2_inner', 'sobolev_norm', 'unit_drift',
    'BoundaryJet', 'Jet',
    'BlendedCorrection', 'CompatOrder', 'CompatReport', 'check_compat', 'correct_datum',
    'enforce_compat', 'eval_P', 'eval_Q', 'orthogonality_defect',
    'BUILTIN_DATA', 'make_datum',
    'BlockTridiagonal', 'FilamentState', 'SolverConfig', 'epsilon_sweep', 'reconstruct_position',
    'rhs_lie', 'rhs_regularized', 'simulate', 'step_midpoint_sphere', 'step_semi_implicit',
    'SweepManager',
    'HasimotoProfile', 'InvariantSeries', 'boundary_identity_check', 'hasimoto', 'invariants',
    'parity_identities',
    'SnapshotStore',
    'FilamentLab', 'RunConfig', 'load_run_config',
]
