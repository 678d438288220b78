"""Shared builders and independent oracles for the test suite."""

import numpy as np
import pytest

from saf import ArrayLayout, ElementSize, GridSpec


def small_size(w: float = 0.4, h: float = 0.4) -> ElementSize:
    return ElementSize(w, h)


def linear_layout(rx_nodes, d_y=0.5, tx_nodes=(0,), M=None, element=0.4):
    """1-D layout on a single-row grid; default one TX at the origin."""
    nodes = list(tx_nodes) + list(rx_nodes)
    M = M if M is not None else max(nodes) + 1
    grid = GridSpec(d_y, 0.5, M, 1)
    return ArrayLayout(
        grid=grid,
        tx_positions=[(m, 0) for m in tx_nodes],
        rx_positions=[(m, 0) for m in rx_nodes],
        tx_size=small_size(element, element),
        rx_size=small_size(element, element),
    )


def ula_layout(n: int, d_y: float = 0.5, element: float = 0.4):
    """Fully populated n-element virtual ULA: one TX at the origin, n RX."""
    return linear_layout(range(n), d_y=d_y, element=element)


def direct_pattern(coords_wl, snapshot, u_samples, v_samples):
    """Brute-force double-loop pattern: per-node direct summation oracle."""
    coords_wl = np.asarray(coords_wl, dtype=float)
    snapshot = np.asarray(snapshot, dtype=complex)
    out = np.zeros((len(v_samples), len(u_samples)), dtype=complex)
    for iv, v in enumerate(v_samples):
        for iu, u in enumerate(u_samples):
            phase = -2j * np.pi * (coords_wl[:, 0] * u + coords_wl[:, 1] * v)
            out[iv, iu] = np.sum(snapshot * np.exp(phase))
    return out


def dirichlet_magnitude(n: int, d_lambda: float, u):
    """|sin(n pi d u) / sin(pi d u)| with the n-valued limit at the zeros."""
    u = np.asarray(u, dtype=float)
    num = np.sin(n * np.pi * d_lambda * u)
    den = np.sin(np.pi * d_lambda * u)
    out = np.full(u.shape, float(n))
    nz = np.abs(den) > 1e-12
    out[nz] = np.abs(num[nz] / den[nz])
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
