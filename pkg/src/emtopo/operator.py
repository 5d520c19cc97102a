"""Bloch fibers of the periodic Maxwell operator.

Each fiber is carried by the pair (rot, weight) of a real-symmetric curl
matrix and a Hermitian positive-definite convolution matrix on a truncated
plane-wave basis; the operator weight^{-1} rot is never formed explicitly.
Frequencies are in units with c = 1 and lattice constant 1, i.e. omega = |k|
in vacuum with |b_1| = 2 pi.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
import scipy.linalg

from .errors import (
    CutoffMismatch,
    DegenerateGap,
    DimensionMismatch,
    IndefiniteWeight,
    SolverFailure,
)
from .lattice import PlaneWaveSet
from .weights import MaterialWeights

#: Relative threshold separating the gradient kernel from genuine bands.
ZERO_TOL = 1e-8


def cross_matrix(v: np.ndarray) -> np.ndarray:
    """The 3x3 matrix K with K u = v x u."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


@dataclasses.dataclass(frozen=True)
class FiberOperator:
    """Truncated Bloch fiber at one quasimomentum.

    ``rot`` is block diagonal with blocks ((0, -K), (K, 0)) for K = (k+G)x,
    equivalently -sigma_2 (x) curl in the Fourier representation; ``weight`` is
    the block-Toeplitz matrix weight[(G, G')] = What(G - G').
    """

    k_reduced: np.ndarray
    pws: PlaneWaveSet
    rot: np.ndarray
    weight: np.ndarray

    @property
    def n_planewaves(self) -> int:
        return len(self.pws)

    @property
    def size(self) -> int:
        return 6 * len(self.pws)

    def k_cartesian(self) -> np.ndarray:
        return self.pws.lattice.k_cartesian(self.k_reduced)


def assemble_fiber(weights: MaterialWeights, pws: PlaneWaveSet, k_reduced) -> FiberOperator:
    """Build the fiber matrices (rot, weight) at reduced momentum ``k_reduced``.

    Warns with `CutoffMismatch` when the medium stores coefficients that no
    pair of plane waves can reach; those coefficients are silently truncated,
    which is the expected behaviour when the basis cutoff is small.
    """
    k_reduced = np.asarray(k_reduced, dtype=float)
    if k_reduced.shape != (3,):
        k = np.zeros(3)
        k[: k_reduced.shape[0]] = k_reduced
        k_reduced = k
    n = len(pws)
    kg = k_reduced @ pws.lattice.reciprocal + pws.g_cartesian()
    rot = np.zeros((6 * n, 6 * n))
    for i in range(n):
        K = cross_matrix(kg[i])
        rot[6 * i : 6 * i + 3, 6 * i + 3 : 6 * i + 6] = -K
        rot[6 * i + 3 : 6 * i + 6, 6 * i : 6 * i + 3] = K
    wmat = np.zeros((6 * n, 6 * n), dtype=complex)
    unreachable = []
    for d, mat in weights.coefficients.items():
        hit = False
        for i, g in enumerate(pws.indices):
            j = pws.index_of((g[0] - d[0], g[1] - d[1], g[2] - d[2]))
            if j is not None:
                wmat[6 * i : 6 * i + 6, 6 * j : 6 * j + 6] = mat
                hit = True
        if not hit:
            unreachable.append(d)
    if unreachable:
        warnings.warn(
            f"{len(unreachable)} weight coefficients lie outside the plane-wave "
            f"difference set and were truncated (e.g. {unreachable[0]})",
            CutoffMismatch,
            stacklevel=2,
        )
    rot.setflags(write=False)
    wmat.setflags(write=False)
    k_reduced = k_reduced.copy()
    k_reduced.setflags(write=False)
    return FiberOperator(k_reduced=k_reduced, pws=pws, rot=rot, weight=wmat)


def weighted_inner(phi: np.ndarray, psi: np.ndarray, weight: np.ndarray) -> complex:
    """The weighted scalar product <phi, psi>_W = phi^dagger W psi."""
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    if phi.shape != psi.shape or weight.shape != (phi.shape[0], phi.shape[0]):
        raise DimensionMismatch(
            f"incompatible shapes phi {phi.shape}, psi {psi.shape}, weight {weight.shape}"
        )
    return complex(phi.conj() @ (weight @ psi))


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude component is real positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    mags = np.abs(pivots)
    phases = np.divide(pivots, mags, out=np.ones_like(pivots), where=mags > 0)
    return vectors / phases


@dataclasses.dataclass(frozen=True)
class FiberSpectrum:
    """Solved fiber: all eigenvalues ascending with W-orthonormal eigenvectors.

    Band numbering is 1-based over positive frequencies.  At momenta where some
    k + G vanishes (the zone center and its translates) the two ground bands
    degenerate into the numerical kernel; they are reported as frequency 0 and
    carry no eigenvectors there.
    """

    fiber: FiberOperator
    omegas: np.ndarray
    vectors: np.ndarray
    kernel_dim: int
    zero_threshold: float

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.omegas > self.zero_threshold))

    @property
    def positive_omegas(self) -> np.ndarray:
        return self.omegas[self.omegas > self.zero_threshold]

    @property
    def negative_omegas(self) -> np.ndarray:
        return self.omegas[self.omegas < -self.zero_threshold]

    @property
    def ground_band_count(self) -> int:
        """Positive-side bands swallowed by the kernel (2 at the zone center, else 0)."""
        return max(0, (self.kernel_dim - 2 * self.fiber.n_planewaves)) // 2

    def band_frequencies(self, n_bands: int) -> np.ndarray:
        """First ``n_bands`` band frequencies, ground bands reported as 0."""
        ground = self.ground_band_count
        pos = self.positive_omegas
        if n_bands > ground + len(pos):
            raise ValueError(f"only {ground + len(pos)} bands available, {n_bands} requested")
        return np.concatenate([np.zeros(ground), pos[: n_bands - ground]])

    def band_vector(self, band: int) -> np.ndarray:
        """W-orthonormal eigenvector of 1-based positive band ``band``."""
        ground = self.ground_band_count
        if band <= ground:
            raise ValueError(f"band {band} is a ground band inside the kernel at this k")
        pos_idx = np.flatnonzero(self.omegas > self.zero_threshold)
        i = band - 1 - ground
        if i >= len(pos_idx):
            raise ValueError(f"band {band} exceeds the {ground + len(pos_idx)} computed bands")
        return self.vectors[:, pos_idx[i]]

    def kernel_vectors(self) -> np.ndarray:
        return self.vectors[:, np.abs(self.omegas) <= self.zero_threshold]


def eigensolve(fiber: FiberOperator, n_bands: int | None = None, zero_tol: float = ZERO_TOL) -> FiberSpectrum:
    """Solve the generalized Hermitian eigenproblem rot phi = omega weight phi.

    The pencil is reduced by a Cholesky factorization of the weight matrix and
    solved densely (LAPACK *hegvd via `scipy.linalg.eigh`); eigenvectors are
    returned W-orthonormal, with the deterministic phase convention that the
    largest-magnitude component of each vector is real positive.

    Parameters
    ----------
    fiber : FiberOperator
    n_bands : int, optional
        Number of positive-frequency bands the caller intends to use; raises
        if fewer are available.  The dense solve always computes the full
        spectrum.
    zero_tol : float
        Relative threshold (times max |omega|) identifying the gradient kernel.

    Raises
    ------
    IndefiniteWeight
        If the Cholesky factorization of the weight matrix fails.
    SolverFailure
        If the dense solver does not converge.
    """
    try:
        omegas, vectors = scipy.linalg.eigh(fiber.rot, fiber.weight)
    except np.linalg.LinAlgError as exc:
        msg = str(exc)
        if "positive definite" in msg or "Cholesky" in msg or "leading minor" in msg:
            raise IndefiniteWeight(f"weight matrix is not positive definite: {msg}") from exc
        raise SolverFailure(msg) from exc
    vectors = _fix_phases(vectors)
    scale = float(np.max(np.abs(omegas))) if omegas.size else 0.0
    threshold = zero_tol * scale
    kernel_dim = int(np.sum(np.abs(omegas) <= threshold))
    spectrum = FiberSpectrum(
        fiber=fiber,
        omegas=omegas,
        vectors=vectors,
        kernel_dim=kernel_dim,
        zero_threshold=threshold,
    )
    if n_bands is not None and n_bands > spectrum.ground_band_count + spectrum.n_positive:
        raise ValueError(
            f"{n_bands} bands requested but only "
            f"{spectrum.ground_band_count + spectrum.n_positive} computed"
        )
    return spectrum


def eigen_residual(spectrum: FiberSpectrum) -> float:
    """||rot Phi - weight Phi diag(omega)|| / ||rot|| for the full eigenbasis."""
    f = spectrum.fiber
    lhs = f.rot @ spectrum.vectors
    rhs = (f.weight @ spectrum.vectors) * spectrum.omegas[None, :]
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(f.rot), 1e-300))


# ---------------------------------------------------------------------------
# Helmholtz splitting
# ---------------------------------------------------------------------------


def gradient_basis(fiber: FiberOperator, tol: float = 1e-12) -> np.ndarray:
    """Columns spanning the longitudinal (gradient) subspace of the fiber.

    For each plane wave with k + G != 0 there are two modes, (k+G) in the
    electric and in the magnetic components; they span ker rot together with
    the full 6-dimensional block at any k + G = 0.
    """
    kg = fiber.k_reduced @ fiber.pws.lattice.reciprocal + fiber.pws.g_cartesian()
    cols = []
    n = len(fiber.pws)
    for i in range(n):
        norm = np.linalg.norm(kg[i])
        if norm <= tol:
            for c in range(6):
                e = np.zeros(6 * n)
                e[6 * i + c] = 1.0
                cols.append(e)
            continue
        v = kg[i] / norm
        e = np.zeros(6 * n)
        e[6 * i : 6 * i + 3] = v
        cols.append(e)
        h = np.zeros(6 * n)
        h[6 * i + 3 : 6 * i + 6] = v
        cols.append(h)
    return np.column_stack(cols)


def helmholtz_split(psi: np.ndarray, fiber: FiberOperator) -> tuple[np.ndarray, np.ndarray]:
    """W-orthogonal split of ``psi`` into (transversal, longitudinal) parts.

    The longitudinal part lies in the span of the gradient modes; the
    transversal remainder satisfies the divergence constraint
    (k+G) . (W psi_t)(G) = 0 for every plane wave, in both field components.
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (fiber.size,):
        raise DimensionMismatch(f"state has shape {psi.shape}, fiber size is {fiber.size}")
    L = gradient_basis(fiber)
    wl = fiber.weight @ L
    gram = L.conj().T @ wl
    rhs = wl.conj().T @ psi
    coeff = scipy.linalg.solve(gram, rhs, assume_a="pos")
    longitudinal = L @ coeff
    return psi - longitudinal, longitudinal


def longitudinal_fraction(psi: np.ndarray, fiber: FiberOperator) -> float:
    """W-norm fraction of ``psi`` living in the gradient subspace."""
    _, lon = helmholtz_split(psi, fiber)
    num = weighted_inner(lon, lon, fiber.weight).real
    den = weighted_inner(psi, psi, fiber.weight).real
    return float(np.sqrt(num / den)) if den > 0 else 0.0


# ---------------------------------------------------------------------------
# Frequency projectors
# ---------------------------------------------------------------------------


def frequency_projector(spectrum: FiberSpectrum, sign: int) -> np.ndarray:
    """Spectral projector Q_+ or Q_- with half weight on the kernel.

    Q_+- = 1_(0,inf)(+-M) + 1/2 1_{0}(M) as a matrix acting on fiber
    coefficient vectors; Q_+ + Q_- = id, and Q_+- is idempotent on the
    kernel-free subspace while acting as id/2 on the kernel.

    Raises
    ------
    DegenerateGap
        If some |omega| falls in (zero_tol, 10 zero_tol): kernel membership
        would be ambiguous.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    w = spectrum.omegas
    t = spectrum.zero_threshold
    suspicious = (np.abs(w) > t) & (np.abs(w) < 10 * t)
    if np.any(suspicious):
        raise DegenerateGap(
            f"{int(np.sum(suspicious))} eigenvalues lie between zero_tol and 10*zero_tol"
        )
    q = np.where(sign * w > t, 1.0, np.where(np.abs(w) <= t, 0.5, 0.0))
    V = spectrum.vectors
    return (V * q) @ V.conj().T @ spectrum.fiber.weight


def positive_frequency_projector(spectrum: FiberSpectrum) -> np.ndarray:
    """Q_+; see `frequency_projector`."""
    return frequency_projector(spectrum, +1)


# ---------------------------------------------------------------------------
# Generic Maxwell-type operator contract
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class MaxwellTypeContract:
    """Finite-dimensional descriptors (D, W_L, W_R) of a product-form operator."""

    d_op: np.ndarray
    w_left: np.ndarray
    w_right: np.ndarray


@dataclasses.dataclass(frozen=True)
class ContractReport:
    """Diagnostics for the Maxwell-type operator properties (a)-(c)."""

    herm_d: float
    herm_wl: float
    herm_wr: float
    min_singular_wl: float
    min_singular_wr: float
    commutator_norm: float
    lower_bound_c: float
    passed: bool

    def violations(self, tol: float = 1e-10) -> tuple[str, ...]:
        out = []
        if self.herm_d > tol:
            out.append(f"D not hermitian (residual {self.herm_d:.3e})")
        if self.herm_wl > tol:
            out.append(f"W_L not hermitian (residual {self.herm_wl:.3e})")
        if self.herm_wr > tol:
            out.append(f"W_R not hermitian (residual {self.herm_wr:.3e})")
        if self.min_singular_wl <= tol:
            out.append("W_L not invertible")
        if self.min_singular_wr <= tol:
            out.append("W_R not invertible")
        if self.commutator_norm > tol:
            out.append(f"[W_L, W_R] != 0 (norm {self.commutator_norm:.3e})")
        if self.lower_bound_c <= 0:
            out.append(f"W_R W_L^-1 not bounded away from 0 (c = {self.lower_bound_c:.3e})")
        return tuple(out)


def validate_contract(contract: MaxwellTypeContract, tol: float = 1e-10) -> ContractReport:
    """Report hermiticity residuals, the commutator norm and the largest c with
    W_R W_L^{-1} >= c id.  Diagnostic only; violations are reported, not raised."""
    d, wl, wr = contract.d_op, contract.w_left, contract.w_right
    herm = lambda m: float(np.linalg.norm(m - m.conj().T) / max(np.linalg.norm(m), 1e-300))
    sv_l = float(np.linalg.svd(wl, compute_uv=False)[-1])
    sv_r = float(np.linalg.svd(wr, compute_uv=False)[-1])
    comm = float(np.linalg.norm(wl @ wr - wr @ wl))
    prod = wr @ np.linalg.inv(wl)
    c = float(np.linalg.eigvalsh((prod + prod.conj().T) / 2)[0])
    report = ContractReport(
        herm_d=herm(d),
        herm_wl=herm(wl),
        herm_wr=herm(wr),
        min_singular_wl=sv_l,
        min_singular_wr=sv_r,
        commutator_norm=comm,
        lower_bound_c=c,
        passed=False,
    )
    object.__setattr__(report, "passed", not report.violations(tol))
    return report


def em_contract(fiber: FiberOperator) -> MaxwellTypeContract:
    """The canonical-form contract (W' = weight, all weights on the left) of a fiber."""
    return MaxwellTypeContract(
        d_op=fiber.rot.astype(complex),
        w_left=np.linalg.inv(fiber.weight),
        w_right=np.eye(fiber.size, dtype=complex),
    )


# ---------------------------------------------------------------------------
# Matrix export
# ---------------------------------------------------------------------------


def write_triplets(matrix: np.ndarray, path, threshold: float = 0.0, comment: str = "") -> None:
    """Dump a matrix as text triplets ``row col re im`` for cross-validation.

    Entries with |value| <= threshold are skipped; rows appear in row-major
    order so the output is deterministic.
    """
    mat = np.asarray(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(f"# shape {mat.shape[0]} {mat.shape[1]}\n")
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                v = complex(mat[i, j])
                if abs(v) > threshold:
                    fh.write(f"{i} {j} {v.real:.17g} {v.imag:.17g}\n")


def read_triplets(path) -> np.ndarray:
    """Read a matrix written by `write_triplets`."""
    shape = None
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# shape"):
                parts = line.split()
                shape = (int(parts[2]), int(parts[3]))
            elif not line.startswith("#") and line.strip():
                i, j, re, im = line.split()
                entries.append((int(i), int(j), float(re) + 1j * float(im)))
    if shape is None:
        raise ValueError(f"{path} has no shape header")
    out = np.zeros(shape, dtype=complex)
    for i, j, v in entries:
        out[i, j] = v
    return out
