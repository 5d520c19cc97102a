import numpy as np
import pytest

import emtopo
from emtopo import media
from emtopo.lattice import Lattice
from emtopo.media import _auto_bounds, _block_diag6, _disk_profile_coefficients
from emtopo.weights import MaterialWeights

TWO_PI = 2 * np.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_real_weights(rng, dimension=2, strength=0.25):
    """Random medium with a pointwise-real weight field (coefficients complex
    symmetric, zero coefficient real); the strongest case where the pointwise
    conjugation symmetry and all real-field identities hold."""
    m = rng.standard_normal((6, 6))
    w0 = m @ m.T + 8 * np.eye(6)
    coeffs = {(0, 0, 0): w0.astype(complex)}
    gs = [(1, 0, 0)] + ([(0, 1, 0), (1, 1, 0)] if dimension >= 2 else [])
    for g in gs:
        s = rng.standard_normal((6, 6))
        a = rng.standard_normal((6, 6))
        c = strength * ((s + s.T) / 2 + 1j * (a + a.T) / 2)
        coeffs[g] = c
        coeffs[tuple(-x for x in g)] = c.conj().T
    probe = MaterialWeights(coeffs, dimension, (1e-6, 1e6))
    vals = np.linalg.eigvalsh(probe.sample_grid(16))
    return MaterialWeights(coeffs, dimension, (0.98 * vals.min(), 1.02 * vals.max()))


def random_complex_weights(rng, dimension=2, strength=0.2):
    """Random lossless medium with fully complex coefficients (generic case)."""
    m = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    w0 = m @ m.conj().T + 10 * np.eye(6)
    coeffs = {(0, 0, 0): w0}
    gs = [(1, 0, 0)] + ([(0, 1, 0), (1, 1, 0)] if dimension >= 2 else [])
    for g in gs:
        c = strength * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
        coeffs[g] = c
        coeffs[tuple(-x for x in g)] = c.conj().T
    probe = MaterialWeights(coeffs, dimension, (1e-6, 1e6))
    vals = np.linalg.eigvalsh(probe.sample_grid(16))
    assert vals.min() > 0
    return MaterialWeights(coeffs, dimension, (0.98 * vals.min(), 1.02 * vals.max()))


def gyro_chern_medium(kappa=1.8, radius=0.28, mu_perp=2.0, smoothing=0.08, harmonics=5.0):
    """Square lattice of rods patterned in eps_zz and mu_zz (both polarizations
    gap) with gyrotropy in the in-plane mu block (breaks time reversal in the
    TM sector).  kappa = 0 gives the real-weight reference crystal."""
    lat = Lattice.square()
    prof = _disk_profile_coefficients(lat, radius, harmonics * TWO_PI, smoothing)
    eps_rod = np.diag([1.0, 1.0, 15.0]).astype(complex)
    mu_rod = np.array(
        [[mu_perp, 1j * kappa, 0], [-1j * kappa, mu_perp, 0], [0, 0, 15.0]], dtype=complex
    )
    d_eps = eps_rod - np.eye(3)
    d_mu = mu_rod - np.eye(3)
    coeffs = {}
    for n, f in prof.items():
        e = d_eps * f
        m = d_mu * f
        if n == (0, 0, 0):
            e = e + np.eye(3)
            m = m + np.eye(3)
        coeffs[n] = _block_diag6(e, m)
    return MaterialWeights(coeffs, 2, _auto_bounds(coeffs, 2)), lat


def dual_real_rods(ez=15.0, radius=0.28, smoothing=0.08, harmonics=5.0, rod2=None):
    """Real-weight 2D two-phase crystal with eps and mu patterned identically
    (z components only).  The exact TM/TE duality pairs the bands, so the
    cluster of bands 3..6 sits between fat scalar gaps and stays isolated.
    ``rod2 = (x0, y0, r2)`` adds a displaced second rod, removing the mirror
    symmetries while keeping the weights real."""
    lat = Lattice.square()
    prof = dict(_disk_profile_coefficients(lat, radius, harmonics * TWO_PI, smoothing))
    if rod2 is not None:
        x0, y0, r2 = rod2
        extra = _disk_profile_coefficients(lat, r2, harmonics * TWO_PI, smoothing)
        for n, f in extra.items():
            phase = np.exp(-2j * np.pi * (n[0] * x0 + n[1] * y0))
            prof[n] = prof.get(n, 0.0) + f * phase
    d = np.diag([0.0, 0.0, ez - 1.0]).astype(complex)
    coeffs = {}
    for n, f in prof.items():
        blk = _block_diag6(d * f, d * f)
        if n == (0, 0, 0):
            blk = blk + np.eye(6)
        coeffs[n] = blk
    return MaterialWeights(coeffs, 2, _auto_bounds(coeffs, 2)), lat


@pytest.fixture(scope="session")
def two_phase():
    return media.two_phase_1d()


@pytest.fixture(scope="session")
def vacuum_3d():
    return media.vacuum(3)
