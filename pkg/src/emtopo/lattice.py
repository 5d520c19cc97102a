"""Bravais/reciprocal lattice geometry, plane-wave index sets, BZ paths and grids.

Conventions: lattice lengths are dimensionless with a = 1; reduced coordinates
(fractions of the reciprocal basis vectors) are the canonical representation of
Bloch momenta, Cartesian vectors are derived.  Lower-dimensional lattices are
embedded in R^3 with suppressed axes carried by unit vectors.
"""

from __future__ import annotations

import dataclasses
import itertools
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySet, SingularBasis

IntTriple = tuple[int, int, int]

#: High-symmetry points (reduced coordinates) for the bundled lattice presets.
NAMED_POINTS = {
    "linear": {"G": (0.0, 0.0, 0.0), "X": (0.5, 0.0, 0.0)},
    "square": {"G": (0.0, 0.0, 0.0), "X": (0.5, 0.0, 0.0), "M": (0.5, 0.5, 0.0)},
    "cubic": {
        "G": (0.0, 0.0, 0.0),
        "X": (0.5, 0.0, 0.0),
        "M": (0.5, 0.5, 0.0),
        "R": (0.5, 0.5, 0.5),
    },
    "hexagonal": {"G": (0.0, 0.0, 0.0), "M": (0.5, 0.0, 0.0), "K": (1 / 3, 1 / 3, 0.0)},
}
#: Accepted aliases for waypoint labels in configs.
_LABEL_ALIASES = {"GAMMA": "G", "Γ": "G"}


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclasses.dataclass(frozen=True)
class Lattice:
    """A Bravais lattice embedded in R^3.

    Parameters
    ----------
    basis : (3, 3) array
        Rows are the lattice vectors a_1..a_3.  For dimension d < 3 the last
        3 - d rows must be the corresponding Cartesian unit vectors.
    dimension : int
        Spatial dimension d in {1, 2, 3}.
    name : str, optional
        Preset name; enables named high-symmetry points.
    """

    basis: np.ndarray
    dimension: int
    name: str | None = None

    def __post_init__(self):
        basis = _as_readonly(self.basis)
        if basis.shape != (3, 3):
            raise ValueError(f"basis must be 3x3, got {basis.shape}")
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if abs(np.linalg.det(basis)) < 1e-14:
            raise SingularBasis("lattice basis vectors are linearly dependent")
        object.__setattr__(self, "basis", basis)

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence[float]], name: str | None = None) -> "Lattice":
        """Build a d-dimensional lattice from d vectors living in the first d axes."""
        vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
        d = len(vecs)
        if d not in (1, 2, 3):
            raise ValueError("need 1, 2 or 3 lattice vectors")
        full = np.eye(3)
        for i, v in enumerate(vecs):
            row = np.zeros(3)
            row[: v.shape[0]] = v
            if np.any(np.abs(row[d:]) > 0):
                raise ValueError("lattice vectors of a d-dim lattice must lie in the first d axes")
            full[i] = row
        return cls(basis=full, dimension=d, name=name)

    @classmethod
    def linear(cls, a: float = 1.0) -> "Lattice":
        return cls.from_vectors([[a]], name="linear")

    @classmethod
    def square(cls, a: float = 1.0) -> "Lattice":
        return cls.from_vectors([[a, 0.0], [0.0, a]], name="square")

    @classmethod
    def cubic(cls, a: float = 1.0) -> "Lattice":
        return cls.from_vectors([[a, 0, 0], [0, a, 0], [0, 0, a]], name="cubic")

    @classmethod
    def hexagonal(cls, a: float = 1.0) -> "Lattice":
        return cls.from_vectors([[a, 0.0], [a / 2, a * np.sqrt(3) / 2]], name="hexagonal")

    @property
    def reciprocal(self) -> np.ndarray:
        """Reciprocal basis, rows b_i with a_i . b_j = 2 pi delta_ij."""
        return reciprocal_basis(self)

    @property
    def cell_volume(self) -> float:
        """d-volume of the unit cell."""
        sub = self.basis[: self.dimension, : self.dimension]
        return float(abs(np.linalg.det(sub)))

    def named_points(self) -> dict[str, tuple[float, float, float]]:
        if self.name in NAMED_POINTS:
            return dict(NAMED_POINTS[self.name])
        return {"G": (0.0, 0.0, 0.0)}

    def k_cartesian(self, k_reduced: np.ndarray) -> np.ndarray:
        """Map reduced k (fractions of b_i) to Cartesian coordinates."""
        return np.asarray(k_reduced, dtype=float) @ self.reciprocal


def reciprocal_basis(lattice: Lattice) -> np.ndarray:
    """Rows b_i of the reciprocal basis, satisfying a_i . b_j = 2 pi delta_ij."""
    try:
        inv = np.linalg.inv(lattice.basis)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - caught in __post_init__
        raise SingularBasis(str(exc)) from exc
    out = 2.0 * np.pi * inv.T
    out.setflags(write=False)
    return out


@dataclasses.dataclass(frozen=True)
class PlaneWaveSet:
    """Truncated set of reciprocal-lattice vectors |G| <= cutoff.

    The index list is lexicographically ordered and closed under negation, so
    matrices built on it are reproducible bit-for-bit across runs.
    """

    lattice: Lattice
    cutoff: float
    indices: tuple[IntTriple, ...]

    def __post_init__(self):
        object.__setattr__(self, "_index_of", {n: i for i, n in enumerate(self.indices)})
        g_int = np.array(self.indices, dtype=int)
        g_int.setflags(write=False)
        object.__setattr__(self, "_g_int", g_int)

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def g_integer(self) -> np.ndarray:
        """(N, 3) integer coordinates of the plane waves."""
        return self._g_int

    def g_cartesian(self) -> np.ndarray:
        """(N, 3) Cartesian G vectors."""
        return self._g_int @ self.lattice.reciprocal

    def index_of(self, n: Iterable[int]) -> int | None:
        """Position of the integer triple ``n``, or None if outside the set."""
        return self._index_of.get(tuple(int(x) for x in n))

    @property
    def negation_index(self) -> np.ndarray:
        """Array ``j`` with ``indices[j[i]] == -indices[i]``."""
        return np.array([self._index_of[tuple(-np.array(n))] for n in self.indices])

    def shift_index(self, step: Iterable[int]) -> np.ndarray:
        """Map i -> index of indices[i] + step, or -1 where the shift leaves the set."""
        step = tuple(int(s) for s in step)
        out = np.full(len(self.indices), -1, dtype=int)
        for i, n in enumerate(self.indices):
            j = self._index_of.get((n[0] + step[0], n[1] + step[1], n[2] + step[2]))
            if j is not None:
                out[i] = j
        return out

    def contains_difference(self, d: IntTriple) -> bool:
        """True when d = n - m for some pair n, m in the set."""
        for n in self.indices:
            if (n[0] - d[0], n[1] - d[1], n[2] - d[2]) in self._index_of:
                return True
        return False


def plane_wave_set(lattice: Lattice, cutoff: float, require_nontrivial: bool = False) -> PlaneWaveSet:
    """Enumerate all integer tuples n with |sum_i n_i b_i| <= cutoff.

    Parameters
    ----------
    lattice : Lattice
    cutoff : float
        Maximum Cartesian |G|, in the same units as the reciprocal basis.
    require_nontrivial : bool
        Raise `EmptySet` if only G = 0 survives the cutoff.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    B = lattice.reciprocal
    d = lattice.dimension
    # |n_i| = |G . a_i| / 2pi <= cutoff * |a_i| / 2pi is a rigorous box bound
    bound = [int(np.floor(cutoff * np.linalg.norm(lattice.basis[i]) / (2 * np.pi) + 1e-12)) for i in range(3)]
    ranges = [range(-bound[i], bound[i] + 1) if i < d else (0,) for i in range(3)]
    cut2 = cutoff * cutoff * (1 + 1e-14)
    indices = []
    for n in itertools.product(*ranges):
        g = n @ B
        if g @ g <= cut2:
            indices.append(n)
    indices.sort()
    if require_nontrivial and len(indices) <= 1:
        raise EmptySet(f"cutoff {cutoff} admits only G = 0")
    return PlaneWaveSet(lattice=lattice, cutoff=float(cutoff), indices=tuple(indices))


@dataclasses.dataclass(frozen=True)
class KPath:
    """Piecewise-linear path through the BZ, waypoints inclusive, joins deduplicated."""

    lattice: Lattice
    points: np.ndarray          # (M, 3) reduced coordinates
    arclength: np.ndarray       # (M,) cumulative Cartesian length
    labels: tuple[tuple[int, str], ...]  # (index, label) pairs for the waypoints

    def __len__(self) -> int:
        return len(self.points)


def _resolve_waypoint(lattice: Lattice, wp) -> tuple[np.ndarray, str]:
    if isinstance(wp, str):
        label = _LABEL_ALIASES.get(wp.upper(), wp)
        table = lattice.named_points()
        if label not in table:
            raise KeyError(f"unknown waypoint {wp!r} for lattice preset {lattice.name!r}")
        return np.array(table[label], dtype=float), label
    arr = np.zeros(3)
    vals = np.asarray(wp, dtype=float)
    arr[: vals.shape[0]] = vals
    return arr, ""


def bz_path(lattice: Lattice, waypoints: Sequence, n_per_segment: int) -> KPath:
    """Sample an affine path through the given waypoints.

    Each segment carries ``n_per_segment`` samples including both endpoints;
    shared waypoints are emitted once.
    """
    if n_per_segment < 2:
        raise ValueError("n_per_segment must be at least 2")
    resolved = [_resolve_waypoint(lattice, wp) for wp in waypoints]
    if len(resolved) < 2:
        raise ValueError("need at least two waypoints")
    pts: list[np.ndarray] = []
    labels: list[tuple[int, str]] = []
    for s in range(len(resolved) - 1):
        start, lab = resolved[s]
        end, _ = resolved[s + 1]
        seg = np.linspace(0.0, 1.0, n_per_segment)[:, None] * (end - start)[None, :] + start[None, :]
        if s > 0:
            seg = seg[1:]
        if not pts:
            labels.append((0, lab))
        pts.extend(seg)
        labels.append((len(pts) - 1, resolved[s + 1][1]))
    points = np.array(pts)
    cart = points @ lattice.reciprocal
    steps = np.linalg.norm(np.diff(cart, axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(steps)])
    return KPath(lattice=lattice, points=points, arclength=arclength, labels=tuple(labels))


@dataclasses.dataclass(frozen=True)
class KGrid:
    """Uniform periodic grid over the BZ torus.

    Grid point m has reduced coordinates k_i = m_i / N_i + offset_i; axes with
    N_i = 1 are frozen at their offset (used for plane cuts of 3D zones).
    """

    lattice: Lattice
    shape: tuple[int, ...]
    offsets: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.shape) != self.lattice.dimension:
            raise ValueError("grid shape must have one entry per lattice dimension")
        if any(n < 1 for n in self.shape):
            raise ValueError("grid shape entries must be >= 1")
        if not self.offsets:
            object.__setattr__(self, "offsets", (0.0,) * len(self.shape))
        elif len(self.offsets) != len(self.shape):
            raise ValueError("offsets must match shape length")

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points_reduced(self) -> np.ndarray:
        """(size, 3) reduced coordinates in row-major (lexicographic) order."""
        axes = [np.arange(n) / n + off for n, off in zip(self.shape, self.offsets)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.zeros((self.size, 3))
        for i, m in enumerate(mesh):
            pts[:, i] = m.reshape(-1)
        return pts

    def flat_index(self, m: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(int(x) % n for x, n in zip(m, self.shape)), self.shape))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(x) for x in np.unravel_index(flat, self.shape))

    def neighbor(self, flat: int, axis: int) -> tuple[int, bool]:
        """Flat index of the +1 neighbor along ``axis`` and whether it wrapped."""
        m = list(self.multi_index(flat))
        m[axis] += 1
        wrapped = m[axis] >= self.shape[axis]
        if wrapped:
            m[axis] = 0
        return self.flat_index(m), wrapped

    def periodic_axes(self) -> tuple[int, ...]:
        """Axes with more than one sample (the ones that actually span the torus)."""
        return tuple(i for i, n in enumerate(self.shape) if n > 1)


def bz_grid(lattice: Lattice, *shape: int, offsets: Sequence[float] = ()) -> KGrid:
    """Uniform N_1 x ... x N_d grid over the BZ torus."""
    return KGrid(lattice=lattice, shape=tuple(int(n) for n in shape), offsets=tuple(offsets))


def reduce_k(k_reduced: np.ndarray) -> np.ndarray:
    """Wrap reduced coordinates into [0, 1) per axis."""
    return np.mod(np.asarray(k_reduced, dtype=float), 1.0)
