"""Sine-space sampling, steering vectors, and received-signal pattern synthesis.

Directions are handled in (u, v) sine space, u = sin(phi) sin(theta) and
v = cos(theta). Snapshots (per-VRX complex received values) are plain complex
ndarrays indexed identically to ``VirtualArray.vrx_positions``.

Sign convention: steering vectors carry e^{+j 2 pi (y u + z v)} and beamforming
applies the conjugate, so magnitudes match the direct radiation sum. Any
globally consistent sign choice yields identical magnitude patterns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import VirtualArray

_UV_EPS = 1e-12


@dataclass(frozen=True)
class UVGrid:
    """Uniform sine-space sample lattice.

    ``u_samples`` has M * q_phi entries, ``v_samples`` N * q_theta, both
    covering [-1, 1). ``cut`` grids (single fixed v) relax the v formula so
    linear arrays can be scored on their broadside azimuth cut.
    """

    M: int
    N: int
    q_phi: int
    q_theta: int
    u_samples: np.ndarray
    v_samples: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.v_samples.size, self.u_samples.size)


def make_uv_grid(M: int, N: int, q_phi: int, q_theta: int) -> UVGrid:
    """Uniform (u, v) grid: u = 2m'/(M q_phi) - 1, v = 2n'/(N q_theta) - 1."""
    if min(M, N, q_phi, q_theta) < 1:
        raise ValueError("grid dimensions and oversampling factors must be >= 1")
    u = 2.0 * np.arange(M * q_phi) / (M * q_phi) - 1.0
    v = 2.0 * np.arange(N * q_theta) / (N * q_theta) - 1.0
    return UVGrid(M, N, q_phi, q_theta, u, v)


def make_uv_cut(M: int, q_phi: int, v: float = 0.0) -> UVGrid:
    """Single-row grid along u at fixed v, for azimuth cuts of linear arrays."""
    if M < 1 or q_phi < 1:
        raise ValueError("grid dimensions and oversampling factors must be >= 1")
    u = 2.0 * np.arange(M * q_phi) / (M * q_phi) - 1.0
    return UVGrid(M, 1, q_phi, 1, u, np.array([float(v)]))


def angles_to_uv(phi: float, theta: float) -> tuple[float, float]:
    """Convert (azimuth phi, polar theta) in degrees to sine-space (u, v)."""
    if not -90.0 <= phi <= 90.0:
        raise ValueError(f"phi must be in [-90, 90] degrees, got {phi}")
    if not 0.0 <= theta <= 180.0:
        raise ValueError(f"theta must be in [0, 180] degrees, got {theta}")
    phi_r = math.radians(phi)
    theta_r = math.radians(theta)
    return math.sin(phi_r) * math.sin(theta_r), math.cos(theta_r)


def uv_to_angles(u: float, v: float) -> Optional[tuple[float, float]]:
    """Convert (u, v) back to (phi, theta) degrees, or None outside the unit disk.

    Points with u^2 + v^2 > 1 do not correspond to real angles. At the poles
    (sin theta = 0) phi is taken as 0 by convention.
    """
    if u * u + v * v > 1.0 + _UV_EPS:
        return None
    theta_r = math.acos(max(-1.0, min(1.0, v)))
    s = math.sin(theta_r)
    if s < _UV_EPS:
        return 0.0, math.degrees(theta_r)
    phi_r = math.asin(max(-1.0, min(1.0, u / s)))
    return math.degrees(phi_r), math.degrees(theta_r)


@dataclass(frozen=True)
class Target:
    """Far-field point target: sine-space direction and complex skin return."""

    u: float
    v: float
    amplitude: complex = 1.0 + 0.0j

    def __post_init__(self):
        if self.u * self.u + self.v * self.v > 1.0 + _UV_EPS:
            raise ValueError(f"target ({self.u}, {self.v}) lies outside the real-angle disk")


@dataclass(frozen=True)
class CouplingMatrix:
    """User-supplied square mutual-coupling matrix applied to snapshots."""

    matrix: np.ndarray
    provenance: str = "user-supplied"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"coupling matrix must be square, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class Pattern:
    """Received-signal pattern over a UVGrid; values indexed [v, u]."""

    grid: UVGrid
    values: np.ndarray
    vrx: VirtualArray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"pattern shape {self.values.shape} does not match grid {self.grid.shape}")

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


def steering_vector(vrx: VirtualArray, u: float, v: float) -> np.ndarray:
    """Unit-magnitude phasors e^{j 2 pi (y u + z v)} over the VRX positions."""
    coords = vrx.positions_wavelengths()
    return np.exp(2j * np.pi * (coords[:, 0] * u + coords[:, 1] * v))


def synthesize_snapshot(vrx: VirtualArray, targets: Sequence[Target]) -> np.ndarray:
    """Received snapshot: amplitude-weighted sum of target steering vectors."""
    snapshot = np.zeros(vrx.unique_count, dtype=complex)
    for t in targets:
        snapshot += t.amplitude * steering_vector(vrx, t.u, t.v)
    return snapshot


def apply_coupling(snapshot: np.ndarray, coupling: CouplingMatrix) -> np.ndarray:
    """Apply a mutual-coupling matrix to a snapshot before beamforming."""
    snapshot = np.asarray(snapshot, dtype=complex)
    if coupling.matrix.shape[0] != snapshot.size:
        raise ValueError(
            f"coupling matrix size {coupling.matrix.shape[0]} does not match snapshot length {snapshot.size}"
        )
    return coupling.matrix @ snapshot


def beamform(vrx: VirtualArray, snapshot: np.ndarray, grid: UVGrid) -> Pattern:
    """Beamform a snapshot over a sine-space grid.

    Evaluates value(u, v) = sum_p snapshot[p] e^{-j 2 pi (y_p u + z_p v)} using
    the separable structure of grid-aligned VRX positions: per-element u and v
    phasor tables combine through one complex matrix product instead of a
    per-node double loop.
    """
    snapshot = np.asarray(snapshot, dtype=complex)
    if snapshot.size != vrx.unique_count:
        raise ValueError(
            f"snapshot length {snapshot.size} does not match VRX count {vrx.unique_count}"
        )
    coords = vrx.positions_wavelengths()
    u_phasors = np.exp(-2j * np.pi * np.outer(coords[:, 0], grid.u_samples))
    v_phasors = np.exp(-2j * np.pi * np.outer(coords[:, 1], grid.v_samples))
    values = (v_phasors * snapshot[:, None]).T @ u_phasors
    return Pattern(grid=grid, values=values, vrx=vrx)
