"""Dimensionless model of the doubly-kicked quantum rotor.

The rotor lives on a ring, with angle theta and conjugate momentum p.
Working in units where time is measured in base periods, momentum is
quantized as p = kbar*(m + beta) on integer indices m, with beta the
conserved quasimomentum.  A state is a complex amplitude vector on the
truncated lattice m = -M..M.

One base period contains two cosine kicks of strength K; the second kick
sits at a phase offset inside the period.  A slight mismatch r between the
two kick-train periods makes that offset drift, which is what the rest of
the package probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SystemParams",
    "DriveSchedule",
    "QuantumState",
    "ObservableRecord",
    "TruncationError",
    "cesium_kbar",
    "DEFAULT_KBAR",
    "init_state",
    "p2_expectation",
    "p0_population",
    "momentum_indices",
]

# Cesium D2 transition and CODATA constants, used only to derive the
# default effective Planck constant for a 27.8 us kick period.
_HBAR = 1.054571817e-34        # J s
_CS_MASS = 132.905451961 * 1.66053906660e-27   # kg
_CS_D2_WAVELENGTH = 852.34727582e-9            # m
DEFAULT_PERIOD_S = 27.8e-6


def cesium_kbar(period_s: float = DEFAULT_PERIOD_S) -> float:
    """Effective Planck constant for a cesium atom kicked by an 852 nm
    standing wave with base period ``period_s``.

    With theta = 2 k_L x and momentum counted in 2*hbar*k_L units, the
    scaled commutator [theta, p] gives kbar = 8 * omega_recoil * T where
    omega_recoil = hbar k_L^2 / (2 m).
    """
    k_l = 2.0 * math.pi / _CS_D2_WAVELENGTH
    omega_recoil = _HBAR * k_l**2 / (2.0 * _CS_MASS)
    return 8.0 * omega_recoil * period_s


#: Default kbar ~ 2.8875, derived from the cesium recoil frequency.
DEFAULT_KBAR = cesium_kbar()

#: Edge-population bound above which momentum truncation is untrustworthy.
EDGE_POPULATION_LIMIT = 1e-8


class TruncationError(RuntimeError):
    """Raised when probability reaches the edge of the momentum lattice."""


@dataclass(frozen=True)
class SystemParams:
    """Physical and numerical parameters shared by every simulation.

    Attributes
    ----------
    K : float
        Dimensionless kick strength (K >= 0).
    kbar : float
        Effective Planck constant (> 0).
    beta : float
        Quasimomentum in [0, 1); p = kbar*(m + beta).
    M : int
        Momentum lattice half-width, indices m in [-M, M] (M >= 8).
    pulse_width : float
        Kick duration as a fraction of the base period; 0 means an ideal
        delta kick (0 <= pulse_width < 0.5).
    substeps : int
        Trotter slices per finite-width kick (>= 1, unused for delta kicks).
    """

    K: float = 10.0
    kbar: float = DEFAULT_KBAR
    beta: float = 0.0
    M: int = 256
    pulse_width: float = 0.0
    substeps: int = 8

    def __post_init__(self):
        if not self.K >= 0.0:
            raise ValueError(f"kick strength K must be >= 0, got {self.K}")
        if not self.kbar > 0.0:
            raise ValueError(f"kbar must be > 0, got {self.kbar}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"quasimomentum beta must be in [0, 1), got {self.beta}")
        if self.M < 8:
            raise ValueError(f"basis half-width M must be >= 8, got {self.M}")
        if not 0.0 <= self.pulse_width < 0.5:
            raise ValueError(
                f"pulse_width must be in [0, 0.5), got {self.pulse_width}"
            )
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")

    @property
    def size(self) -> int:
        """Lattice size 2M+1."""
        return 2 * self.M + 1


@dataclass(frozen=True)
class DriveSchedule:
    """Two-train kick schedule: ratio r, initial phase offset, length.

    The first train kicks at integer times n, the second at n*r + lambda0,
    both for n = 0..N-1 (times in base periods).
    """

    r: float = 1.0
    lambda0: float = 0.5
    N: int = 100

    def __post_init__(self):
        if not self.r > 0.0:
            raise ValueError(f"period ratio r must be > 0, got {self.r}")
        if not 0.0 <= self.lambda0 < 1.0:
            raise ValueError(f"lambda0 must be in [0, 1), got {self.lambda0}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")


@dataclass(frozen=True)
class QuantumState:
    """Normalized complex amplitudes on the momentum lattice m = -M..M."""

    amplitudes: np.ndarray
    beta: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        if amps.ndim != 1 or amps.size % 2 != 1:
            raise ValueError("amplitudes must be a 1-d vector of odd length")

    @property
    def M(self) -> int:
        return (self.amplitudes.size - 1) // 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def edge_population(self) -> float:
        a = self.amplitudes
        return float(abs(a[0]) ** 2 + abs(a[-1]) ** 2)

    def check_truncation(self, limit: float = EDGE_POPULATION_LIMIT) -> None:
        """Raise :class:`TruncationError` if the lattice edge is populated."""
        edge = self.edge_population()
        if edge >= limit:
            raise TruncationError(
                f"edge population {edge:.3e} >= {limit:.1e}; "
                f"increase M (currently {self.M})"
            )


@dataclass(frozen=True)
class ObservableRecord:
    """Observables after a given double-kick period.

    ``p2`` is <p^2> in kbar^2 units, i.e. <(m+beta)^2>; ``p0`` the
    population within the configured window around m = 0.
    """

    kick_index: int
    p2: float
    p0: float

    def __post_init__(self):
        if self.p2 < 0.0:
            raise ValueError("p2 must be >= 0")
        if not 0.0 <= self.p0 <= 1.0 + 1e-12:
            raise ValueError("p0 must lie in [0, 1]")


def momentum_indices(params: SystemParams) -> np.ndarray:
    """Integer momentum indices m = -M..M."""
    return np.arange(-params.M, params.M + 1)


def init_state(
    params: SystemParams, kind: str = "delta", width: float | None = None
) -> QuantumState:
    """Build an initial state localized around zero momentum.

    Parameters
    ----------
    kind : {"delta", "gaussian"}
        "delta" puts all amplitude on m = 0; "gaussian" gives
        |a(m)|^2 proportional to exp(-m^2 / (2 width^2)).
    width : float
        Gaussian width in lattice units; required (and > 0) for
        kind="gaussian".
    """
    m = momentum_indices(params)
    if kind == "delta":
        amps = np.zeros(params.size, dtype=complex)
        amps[params.M] = 1.0
    elif kind == "gaussian":
        if width is None or width <= 0.0:
            raise ValueError(f"gaussian init needs width > 0, got {width}")
        amps = np.exp(-(m.astype(float) ** 2) / (4.0 * width**2)).astype(complex)
        amps /= np.linalg.norm(amps)
    else:
        raise ValueError(f"unknown initial state kind {kind!r}")
    return QuantumState(amps, beta=params.beta)


def p2_expectation(state: QuantumState, params: SystemParams) -> float:
    """<p^2> of the dimensionless momentum p = kbar*(m + beta):
    kbar^2 * sum |a(m)|^2 (m + beta)^2.

    Divide by params.kbar**2 for the lattice-unit value <(m+beta)^2>
    (the form stored in ObservableRecord and used by the Floquet sums).
    """
    m = momentum_indices(params)
    w = np.abs(state.amplitudes) ** 2
    return float(params.kbar**2 * np.sum(w * (m + state.beta) ** 2))


def p0_population(state: QuantumState, window: int = 0) -> float:
    """Population in the zero-momentum class: sum of |a(m)|^2 over |m| <= window."""
    if window < 0:
        raise ValueError("window must be >= 0")
    M = state.M
    if window > M:
        raise ValueError(f"window {window} exceeds lattice half-width {M}")
    sl = state.amplitudes[M - window : M + window + 1]
    return float(np.sum(np.abs(sl) ** 2))
