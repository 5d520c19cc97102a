"""Reference media used by the examples, tests and CLI demos.

All builders return a ``(weights, lattice)`` pair.  Patterned profiles are
band-limited: sharp two-phase structures are represented by Gaussian-mollified
indicator functions so that the stored Fourier support is finite while the
field stays pointwise positive definite (a raw truncation of a discontinuous
profile overshoots and can lose positivity).
"""

from __future__ import annotations

import numpy as np
from scipy.special import j1

from .lattice import Lattice, plane_wave_set
from .weights import MaterialWeights


def _auto_bounds(coeffs: dict, dimension: int, resolution: int = 64, margin: float = 0.02) -> tuple[float, float]:
    probe = MaterialWeights(coeffs, dimension, (1e-9, 1e9))
    vals = probe.sample_grid(resolution)
    eigs = np.linalg.eigvalsh((vals + np.conj(np.swapaxes(vals, -1, -2))) / 2)
    lo, hi = float(eigs.min()), float(eigs.max())
    if lo <= 0:
        raise ValueError(f"profile lost positivity (min eigenvalue {lo:.3g}); increase smoothing")
    return lo * (1 - margin), hi * (1 + margin)


def _block_diag6(eps: np.ndarray, mu: np.ndarray) -> np.ndarray:
    out = np.zeros((6, 6), dtype=complex)
    out[:3, :3] = eps
    out[3:, 3:] = mu
    return out


def vacuum(dimension: int = 3) -> tuple[MaterialWeights, Lattice]:
    lattice = {1: Lattice.linear, 2: Lattice.square, 3: Lattice.cubic}[dimension]()
    return MaterialWeights.homogeneous(1.0, 1.0, dimension=dimension, bounds=(0.999, 1.001)), lattice


def homogeneous(eps, mu=1.0, chi=None, dimension: int = 3) -> tuple[MaterialWeights, Lattice]:
    lattice = {1: Lattice.linear, 2: Lattice.square, 3: Lattice.cubic}[dimension]()
    return MaterialWeights.homogeneous(eps, mu, chi, dimension=dimension), lattice


def two_phase_1d(
    eps_lo: float = 1.0,
    eps_hi: float = 13.0,
    n_harmonics: int = 12,
    wall_width: float = 0.05,
) -> tuple[MaterialWeights, Lattice]:
    """Equal layers of eps_lo and eps_hi stacked along x, mu = 1.

    The square-wave profile is mollified with a Gaussian of width
    ``wall_width`` (in lattice units) and truncated at ``n_harmonics``.
    """
    lattice = Lattice.linear()
    mid = (eps_hi + eps_lo) / 2
    half = (eps_hi - eps_lo) / 2
    coeffs = {(0, 0, 0): _block_diag6(mid * np.eye(3), np.eye(3))}
    for n in range(1, n_harmonics + 1):
        if n % 2 == 0:
            continue
        s_hat = 2.0 / (1j * np.pi * n) * np.exp(-0.5 * (2 * np.pi * n * wall_width) ** 2)
        eps_n = half * s_hat * np.eye(3)
        coeffs[(n, 0, 0)] = _block_diag6(eps_n, np.zeros((3, 3)))
        coeffs[(-n, 0, 0)] = _block_diag6(np.conj(s_hat) * half * np.eye(3), np.zeros((3, 3)))
    return MaterialWeights(coeffs, 1, _auto_bounds(coeffs, 1)), lattice


def _disk_profile_coefficients(lattice: Lattice, radius: float, cutoff: float, smoothing: float) -> dict:
    """Fourier coefficients of a mollified disk indicator on a 2D lattice."""
    pws = plane_wave_set(lattice, cutoff)
    area = lattice.cell_volume
    fill = np.pi * radius**2 / area
    out = {}
    g_cart = pws.g_cartesian()
    for n, g in zip(pws.indices, g_cart):
        mag = float(np.linalg.norm(g))
        if mag == 0.0:
            out[n] = fill
        else:
            out[n] = (2 * np.pi * radius**2 / area) * (j1(mag * radius) / (mag * radius)) * np.exp(
                -0.5 * (smoothing * mag) ** 2
            )
    return out


def dielectric_rods_2d(
    eps_bg: float = 1.0,
    eps_rod: float = 9.0,
    radius: float = 0.35,
    cutoff_harmonics: float = 7.0,
    smoothing: float = 0.06,
    lattice: Lattice | None = None,
) -> tuple[MaterialWeights, Lattice]:
    """Mollified dielectric rods on a 2D lattice (square by default), mu = 1."""
    lattice = lattice or Lattice.square()
    cutoff = cutoff_harmonics * 2 * np.pi
    profile = _disk_profile_coefficients(lattice, radius, cutoff, smoothing)
    coeffs = {}
    for n, f in profile.items():
        eps_n = (eps_rod - eps_bg) * f * np.eye(3)
        if n == (0, 0, 0):
            eps_n = eps_n + eps_bg * np.eye(3)
            coeffs[n] = _block_diag6(eps_n, np.eye(3))
        else:
            coeffs[n] = _block_diag6(eps_n, np.zeros((3, 3)))
    return MaterialWeights(coeffs, 2, _auto_bounds(coeffs, 2)), lattice


def gyromagnetic_rods_2d(
    eps_rod: float = 15.0,
    eps_bg: float = 1.0,
    mu_perp: float = 14.0,
    mu_kappa: float = 12.4,
    radius: float = 0.11,
    cutoff_harmonics: float = 7.0,
    smoothing: float = 0.06,
    lattice: Lattice | None = None,
) -> tuple[MaterialWeights, Lattice]:
    """Gyromagnetic rods: in-plane mu block ((mu, i kappa), (-i kappa, mu)) inside
    the rods, breaking both time-reversal candidates (class A medium)."""
    if mu_perp - 1 <= 0 or mu_perp - mu_kappa <= 0:
        raise ValueError("need mu_perp > 1 and mu_perp > mu_kappa for positivity")
    lattice = lattice or Lattice.square()
    cutoff = cutoff_harmonics * 2 * np.pi
    profile = _disk_profile_coefficients(lattice, radius, cutoff, smoothing)
    mu_rod = np.array(
        [[mu_perp, 1j * mu_kappa, 0], [-1j * mu_kappa, mu_perp, 0], [0, 0, 1.0]], dtype=complex
    )
    d_eps = (eps_rod - eps_bg) * np.eye(3)
    d_mu = mu_rod - np.eye(3)
    coeffs = {}
    for n, f in profile.items():
        eps_n = d_eps * f
        mu_n = d_mu * f
        if n == (0, 0, 0):
            eps_n = eps_n + eps_bg * np.eye(3)
            mu_n = mu_n + np.eye(3)
        coeffs[n] = _block_diag6(eps_n, mu_n)
    return MaterialWeights(coeffs, 2, _auto_bounds(coeffs, 2)), lattice


def magneto_electric(chi_scale: float = 0.3, eps: float = 2.0, dimension: int = 2) -> tuple[MaterialWeights, Lattice]:
    """Homogeneous medium with a real coupling block (class AI, T1 only)."""
    return homogeneous(eps, eps, chi=chi_scale * np.eye(3), dimension=dimension)


def gyrotropic_homogeneous(kappa: float = 0.8, eps: float = 2.0, dimension: int = 2) -> tuple[MaterialWeights, Lattice]:
    """Homogeneous gyroelectric medium with imaginary off-diagonal permittivity."""
    eps_mat = np.array([[eps, 1j * kappa, 0], [-1j * kappa, eps, 0], [0, 0, eps]], dtype=complex)
    return homogeneous(eps_mat, 1.0, dimension=dimension)
