"""W-weighted Berry curvature, Chern numbers, gap detection and
classification-consistency checks.

Curvature is computed with gauge-invariant link variables on a uniform BZ
grid: links are determinants of the W-weighted overlap matrices between the
selected bands at neighboring grid points, normalized to unit modulus, and the
plaquette curvature is the argument of the oriented product of four links.
Integer quantization of the total is then automatic; what the residual guards
is convergence of the pre-rounding value.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
from typing import Sequence

import numpy as np

from .errors import NotConverged, SingularLink
from .lattice import KGrid, PlaneWaveSet
from .operator import assemble_fiber, cross_matrix, eigensolve
from .weights import MaterialWeights, SymmetryReport, CAZClass

import scipy.linalg

#: Defaults validated by the grid-refinement acceptance tests.
LINK_TOL = 1e-6
CHERN_RESIDUAL_TOL = 0.05
GAP_TOL = 1e-6


# ---------------------------------------------------------------------------
# Batch spectra over a BZ grid
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class GridSpectra:
    """Band frequencies (and selected eigenvectors) over a BZ grid.

    ``omegas[m, b]`` is band b+1 at grid point m in the with-ground numbering
    (ground bands report 0 at the zone center); ``vectors[m, :, j]`` is the
    eigenvector of band ``store_bands[j]``.
    """

    grid: KGrid
    pws: PlaneWaveSet
    omegas: np.ndarray
    store_bands: tuple[int, ...]
    vectors: np.ndarray | None
    ground_counts: np.ndarray
    weight_matrix: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.omegas.shape[1]


def solve_grid(
    weights: MaterialWeights,
    pws: PlaneWaveSet,
    grid: KGrid,
    n_bands: int,
    store_bands: Sequence[int] = (),
    workers: int = 1,
) -> GridSpectra:
    """Solve every fiber of the grid; eigensolves are independent per k.

    Parameters
    ----------
    n_bands : int
        Number of band frequencies to retain.
    store_bands : sequence of int
        1-based band indices whose eigenvectors are kept (for curvature work).
        Requested bands must stay above the ground pair on the whole grid.
    workers : int
        Thread count for the per-k solves (LAPACK releases the GIL).
    """
    store = tuple(int(b) for b in store_bands)
    if any(b < 1 for b in store):
        raise ValueError("band indices are 1-based")
    points = grid.points_reduced()
    m_total = grid.size
    omegas = np.zeros((m_total, n_bands))
    ground_counts = np.zeros(m_total, dtype=int)
    vectors = np.zeros((m_total, 6 * len(pws), len(store)), dtype=complex) if store else None
    weight_matrix = None

    def solve_one(m: int):
        spectrum = eigensolve(assemble_fiber(weights, pws, points[m]))
        freqs = spectrum.band_frequencies(n_bands)
        vecs = None
        if store:
            if any(b <= spectrum.ground_band_count for b in store):
                raise ValueError(
                    f"stored band(s) {store} reach the ground pair at grid point {m}"
                )
            vecs = np.column_stack([spectrum.band_vector(b) for b in store])
        return m, freqs, spectrum.ground_band_count, vecs, spectrum.fiber.weight

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(solve_one, range(m_total)))
    else:
        results = [solve_one(m) for m in range(m_total)]
    for m, freqs, ground, vecs, wmat in results:
        omegas[m] = freqs
        ground_counts[m] = ground
        if vecs is not None:
            vectors[m] = vecs
        if weight_matrix is None:
            weight_matrix = wmat
    return GridSpectra(
        grid=grid,
        pws=pws,
        omegas=omegas,
        store_bands=store,
        vectors=vectors,
        ground_counts=ground_counts,
        weight_matrix=weight_matrix,
    )


# ---------------------------------------------------------------------------
# Gap detection and band selections
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class GlobalGap:
    below_band: int     # gap opens above this band
    size: float
    omega_bottom: float
    omega_top: float


@dataclasses.dataclass(frozen=True)
class GapReport:
    global_gaps: tuple[GlobalGap, ...]
    local_margins: np.ndarray  # (n_bands, 2): min distance to band below / above


def detect_gaps(omegas: np.ndarray, gap_tol: float = 0.0) -> GapReport:
    """Global gaps and per-band local isolation margins of a band grid.

    A global gap after band n requires min_k omega_{n+1} > max_k omega_n; the
    local margin is the minimum pointwise distance over the grid, which can be
    positive even when bands overlap globally (a "local spectral gap").
    """
    omegas = np.asarray(omegas, dtype=float)
    m, nb = omegas.shape
    gaps = []
    for n in range(nb - 1):
        bottom = float(omegas[:, n].max())
        top = float(omegas[:, n + 1].min())
        if top - bottom > gap_tol:
            gaps.append(GlobalGap(below_band=n + 1, size=top - bottom, omega_bottom=bottom, omega_top=top))
    margins = np.full((nb, 2), np.inf)
    margins[0, 0] = float(omegas[:, 0].min())  # band 1 sits above the omega = 0 kernel
    for n in range(1, nb):
        margins[n, 0] = float((omegas[:, n] - omegas[:, n - 1]).min())
        margins[n - 1, 1] = margins[n, 0]
    return GapReport(global_gaps=tuple(gaps), local_margins=margins)


@dataclasses.dataclass(frozen=True)
class BandSelection:
    """A contiguous, positive-frequency, kernel-excluded band window.

    Isolation means both margins exceed the gap tolerance; selections that
    would include the ground pair fail automatically because the margin below
    band 1 is the distance to the omega = 0 kernel.
    """

    first: int
    last: int
    margin_below: float
    margin_above: float

    @property
    def bands(self) -> tuple[int, ...]:
        return tuple(range(self.first, self.last + 1))

    @property
    def size(self) -> int:
        return self.last - self.first + 1


def select_bands(gs: GridSpectra, first: int, last: int, gap_tol: float = GAP_TOL) -> BandSelection:
    """Validate and build an isolated band selection from solved grid spectra.

    Raises
    ------
    ValueError
        If indices are out of range or either isolation margin is below
        ``gap_tol`` (including selections touching the ground bands).
    """
    if not (1 <= first <= last):
        raise ValueError(f"need 1 <= first <= last, got {first}..{last}")
    if last + 1 > gs.n_bands:
        raise ValueError(
            f"selection {first}..{last} needs band {last + 1} for the upper margin, "
            f"but only {gs.n_bands} bands were computed"
        )
    report = detect_gaps(gs.omegas)
    below = report.local_margins[first - 1, 0]
    above = report.local_margins[last - 1, 1]
    if below <= gap_tol or above <= gap_tol:
        raise ValueError(
            f"selection {first}..{last} is not isolated: margins "
            f"(below={below:.3e}, above={above:.3e}) vs gap_tol={gap_tol:.1e}"
        )
    return BandSelection(first=first, last=last, margin_below=float(below), margin_above=float(above))


# ---------------------------------------------------------------------------
# Berry curvature and Chern numbers (link variables)
# ---------------------------------------------------------------------------


def _shift_vectors(vecs: np.ndarray, pws: PlaneWaveSet, axis: int) -> np.ndarray:
    """Re-express states after a wrap k + b_axis -> k: c'(G) = c(G + e_axis)."""
    step = [0, 0, 0]
    step[axis] = 1
    table = pws.shift_index(step)
    blocks = vecs.reshape(len(pws), 6, -1)
    out = np.zeros_like(blocks)
    valid = table >= 0
    out[valid] = blocks[table[valid]]
    return out.reshape(vecs.shape)


def _selection_columns(gs: GridSpectra, selection: BandSelection) -> np.ndarray:
    missing = [b for b in selection.bands if b not in gs.store_bands]
    if missing:
        raise ValueError(f"grid spectra do not store eigenvectors for bands {missing}")
    cols = [gs.store_bands.index(b) for b in selection.bands]
    return gs.vectors[:, :, cols]


@dataclasses.dataclass(frozen=True)
class BerryCurvature:
    """Plaquette curvature field F over the BZ grid (radians per plaquette)."""

    selection: BandSelection
    grid_shape: tuple[int, int]
    axes: tuple[int, int]
    values: np.ndarray  # (N1, N2)

    @property
    def total_angle(self) -> float:
        return float(self.values.sum())


def berry_curvature(gs: GridSpectra, selection: BandSelection, link_tol: float = LINK_TOL) -> BerryCurvature:
    """Gauge-invariant plaquette curvature of an isolated composite selection.

    Links are det of the W-weighted overlaps S_mu(k)[m, n] =
    <phi_m(k), phi_n(k + delta_mu)>_W, normalized to unit modulus; the
    plaquette value Arg(U1 U2 U1^-1 U2^-1) is taken in (-pi, pi].

    Raises
    ------
    SingularLink
        If any |det S| < link_tol (grid too coarse or gap closing).
    """
    axes = gs.grid.periodic_axes()
    if len(axes) != 2:
        raise ValueError(f"curvature needs exactly two periodic grid axes, got {axes}")
    a1, a2 = axes
    n1, n2 = gs.grid.shape[a1], gs.grid.shape[a2]
    vecs = _selection_columns(gs, selection)
    w = gs.weight_matrix

    links = np.zeros((2, gs.grid.size), dtype=complex)
    for m in range(gs.grid.size):
        bra = vecs[m].conj().T @ w
        for li, axis in enumerate((a1, a2)):
            j, wrapped = gs.grid.neighbor(m, axis)
            ket = vecs[j]
            if wrapped:
                ket = _shift_vectors(ket, gs.pws, axis)
            det = np.linalg.det(bra @ ket)
            mag = abs(det)
            if mag < link_tol:
                raise SingularLink(
                    f"|det S| = {mag:.3e} < link_tol at grid point {gs.grid.multi_index(m)}, "
                    f"axis {axis}"
                )
            links[li, m] = det / mag

    def at(li: int, i1: int, i2: int) -> complex:
        idx = [0] * len(gs.grid.shape)
        idx[a1] = i1 % n1
        idx[a2] = i2 % n2
        return links[li, gs.grid.flat_index(idx)]

    values = np.zeros((n1, n2))
    for i1 in range(n1):
        for i2 in range(n2):
            prod = at(0, i1, i2) * at(1, i1 + 1, i2) * np.conj(at(0, i1, i2 + 1)) * np.conj(at(1, i1, i2))
            values[i1, i2] = np.angle(prod)
    return BerryCurvature(selection=selection, grid_shape=(n1, n2), axes=(a1, a2), values=values)


@dataclasses.dataclass(frozen=True)
class ChernResult:
    """First Chern number of a band selection with its integrality residual."""

    selection: BandSelection
    curvature: BerryCurvature
    total: float            # sum F / 2 pi, pre-rounding
    integer: int
    residual: float

    def summary(self) -> str:
        return (
            f"bands {self.selection.first}..{self.selection.last}: "
            f"C = {self.integer} (pre-rounding {self.total:+.6f}, residual {self.residual:.2e})"
        )


def chern_number(
    gs: GridSpectra,
    selection: BandSelection,
    link_tol: float = LINK_TOL,
    residual_tol: float = CHERN_RESIDUAL_TOL,
) -> ChernResult:
    """C = (1/2 pi) sum_plaquettes F, rounded with the residual reported.

    Raises
    ------
    NotConverged
        If |C - round(C)| >= ``residual_tol``; the partial result is attached
        to the exception.
    """
    curv = berry_curvature(gs, selection, link_tol)
    total = curv.total_angle / (2 * np.pi)
    integer = int(np.rint(total))
    residual = abs(total - integer)
    result = ChernResult(selection=selection, curvature=curv, total=total, integer=integer, residual=residual)
    if residual >= residual_tol:
        raise NotConverged(
            f"chern residual {residual:.3e} >= {residual_tol}: refine the grid or cutoff",
            result=result,
        )
    return result


# ---------------------------------------------------------------------------
# Consistency with the symmetry classification
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ConsistencyReport:
    consistent: bool
    contradictions: tuple[str, ...]
    checked: int


def classification_consistency(
    report: SymmetryReport,
    chern_results: Sequence[ChernResult],
    residual_tol: float = CHERN_RESIDUAL_TOL,
) -> ConsistencyReport:
    """Flag any stable nonzero Chern number in a class that forbids them.

    Media of class AI or 2xAI are topologically trivial in d <= 3, so a stable
    nonzero integer there indicates a bug or a symmetry-detection tolerance
    failure.  Class A permits trivial instances, so zeros are never flagged.
    """
    contradictions = []
    for res in chern_results:
        stable = res.residual < residual_tol
        if stable and res.integer != 0 and report.caz_class in (CAZClass.AI, CAZClass.TWO_TIMES_AI):
            contradictions.append(
                f"class {report.caz_class.value} medium yielded stable C = {res.integer} "
                f"on bands {res.selection.first}..{res.selection.last}"
            )
    return ConsistencyReport(
        consistent=not contradictions,
        contradictions=tuple(contradictions),
        checked=len(chern_results),
    )


# ---------------------------------------------------------------------------
# Ground-state dispersion asymptotics
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class DispersionRow:
    direction: tuple[float, float, float]
    band: int
    fitted_slope: float
    predicted_slope: float
    rel_deviation: float


@dataclasses.dataclass(frozen=True)
class DispersionReport:
    radius: float
    rows: tuple[DispersionRow, ...]

    @property
    def max_deviation(self) -> float:
        return max(r.rel_deviation for r in self.rows)


def homogeneous_slopes(w_avg: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """The two positive light-cone slopes of the homogeneous medium ``w_avg``."""
    K = cross_matrix(direction / np.linalg.norm(direction))
    rot6 = np.zeros((6, 6))
    rot6[:3, 3:] = -K
    rot6[3:, :3] = K
    eigs = scipy.linalg.eigh(rot6, (w_avg + w_avg.conj().T) / 2, eigvals_only=True)
    pos = np.sort(eigs[eigs > 1e-12])
    return pos[:2]


def ground_state_dispersion_check(
    weights: MaterialWeights,
    pws: PlaneWaveSet,
    radius: float,
    samples: int = 4,
    directions: np.ndarray | None = None,
) -> DispersionReport:
    """Fit omega_{1,2}(k) ~ c |k| for |k| <= radius and compare against the
    light cones of the homogeneous medium with cell-averaged weights.

    ``radius`` is a Cartesian length in reciprocal units (|b_1| = 2 pi for the
    unit cubic cell); the deviation is leading-order only and shrinks with the
    radius.
    """
    lattice = pws.lattice
    if directions is None:
        directions = lattice.reciprocal[: lattice.dimension]
    w_avg = weights.coefficient((0, 0, 0))
    b_inv = np.linalg.inv(lattice.reciprocal)
    rows = []
    for direction in np.atleast_2d(np.asarray(directions, dtype=float)):
        unit = direction / np.linalg.norm(direction)
        predicted = homogeneous_slopes(w_avg, unit)
        ts = np.arange(1, samples + 1) / samples
        mags = ts * radius
        freqs = np.zeros((samples, 2))
        for i, mag in enumerate(mags):
            k_red = (mag * unit) @ b_inv
            spectrum = eigensolve(assemble_fiber(weights, pws, k_red))
            freqs[i] = spectrum.band_frequencies(2)
        denom = float(mags @ mags)
        for b in range(2):
            fitted = float(freqs[:, b] @ mags) / denom
            rows.append(
                DispersionRow(
                    direction=tuple(float(x) for x in unit),
                    band=b + 1,
                    fitted_slope=fitted,
                    predicted_slope=float(predicted[b]),
                    rel_deviation=float(abs(fitted - predicted[b]) / predicted[b]),
                )
            )
    return DispersionReport(radius=float(radius), rows=tuple(rows))
