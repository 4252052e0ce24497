"""Doubly-kicked quantum rotor toolkit.

Simulates the quantum rotor driven by two interleaved kick trains with
period ratio r, and analyzes the sub-Fourier resonance at r = 1:
dynamical localization and its destruction, residual quantum diffusion,
resonance lineshapes, and the Floquet-spectral level dynamics behind them.
"""

__version__ = "0.1.0"

from .model import (
    DEFAULT_KBAR,
    DriveSchedule,
    ObservableRecord,
    QuantumState,
    SystemParams,
    TruncationError,
    cesium_kbar,
    init_state,
    p0_population,
    p2_expectation,
)
from .propagator import (
    EvolutionResult,
    KickEvent,
    build_kick_timeline,
    evolve_quasiperiodic,
    free_apply,
    kick_apply,
    period_apply,
)
from .floquet import (
    AvoidedCrossing,
    FloquetSpectrum,
    GapStatistics,
    GapStatisticsError,
    LevelTrackSet,
    LocalizationEstimate,
    adiabatic_prediction,
    build_floquet_matrix,
    detect_avoided_crossings,
    refine_avoided_crossings,
    diagonalize,
    ensemble_localization_length,
    floquet_spectrum,
    gap_statistics,
    lambda_sweep,
    localization_length,
    p2_floquet_coherent,
    p2_floquet_incoherent,
    relative_slope_quantiles,
)
from .classical import (
    ClassicalEnsemble,
    DiffusionEstimate,
    classical_diffusion,
    classical_evolve,
    classical_step,
)
from .spectroscopy import (
    CuspReport,
    DiffusionReport,
    LineshapeFit,
    ResonanceScan,
    WidthError,
    WidthReport,
    cusp_test,
    diffusion_constant,
    fit_lineshape,
    lineshape_model_p0,
    lineshape_model_p2,
    measure_width,
    resonance_scan,
)
