"""Periodic material-weight fields: representation, validation, decomposition,
symmetry detection and topological classification.

A medium is a 6x6 Hermitian positive-definite matrix field ``W(x)`` combining
permittivity, permeability and bianisotropy in the (E, H) block layout.  It is
stored purely in reciprocal space as a map G -> What(G); real-space values are
produced by explicit Fourier summation on demand.
"""

from __future__ import annotations

import dataclasses
import enum
import itertools
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .errors import AmbiguousClass, MalformedCoefficients, NonHermitianField
from .lattice import IntTriple, Lattice

#: Pauli matrices acting on the 2x2 (E, H) block structure.
PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
_SIGMA6 = tuple(np.kron(s, np.eye(3, dtype=complex)) for s in PAULI)

#: Default relative Frobenius tolerance for symmetry detection; symmetry is
#: exact in intended inputs, the tolerance only absorbs I/O rounding.
SYMMETRY_TOL = 1e-10

CoeffMap = Mapping[IntTriple, np.ndarray]


def _canon_key(key) -> IntTriple:
    t = tuple(int(x) for x in key)
    if len(t) != 3:
        raise MalformedCoefficients(f"coefficient index {key!r} is not an integer triple")
    return t  # type: ignore[return-value]


@dataclasses.dataclass(frozen=True)
class MaterialWeights:
    """Periodic 6x6 Hermitian weight field as reciprocal-lattice Fourier coefficients.

    Parameters
    ----------
    coefficients : mapping
        Integer triples (reciprocal basis coordinates) to 6x6 complex arrays.
    dimension : int
        Spatial dimension; coefficients must vanish along suppressed axes.
    bounds : (float, float)
        Claimed spectral bounds (c_lower, c_upper) of W(x), with c_lower > 0.
    """

    coefficients: CoeffMap
    dimension: int
    bounds: tuple[float, float]

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        lo, hi = self.bounds
        if not (0 < lo <= hi):
            raise ValueError(f"bounds must satisfy 0 < c_lower <= c_upper, got {self.bounds}")
        frozen: dict[IntTriple, np.ndarray] = {}
        for key, mat in self.coefficients.items():
            k = _canon_key(key)
            if any(k[i] != 0 for i in range(self.dimension, 3)):
                raise MalformedCoefficients(
                    f"coefficient {k} has support along a suppressed axis (dimension {self.dimension})"
                )
            arr = np.asarray(mat, dtype=complex)
            if arr.shape != (6, 6):
                raise MalformedCoefficients(f"coefficient {k} has shape {arr.shape}, expected (6, 6)")
            arr = arr.copy()
            arr.setflags(write=False)
            frozen[k] = arr
        object.__setattr__(self, "coefficients", MappingProxyType(frozen))

    # -- basic access -------------------------------------------------------

    def coefficient(self, g) -> np.ndarray:
        """What(G); zero matrix for indices outside the stored support."""
        return self.coefficients.get(_canon_key(g), np.zeros((6, 6), dtype=complex))

    def stored_indices(self) -> tuple[IntTriple, ...]:
        return tuple(sorted(self.coefficients))

    def max_support(self) -> int:
        """Largest |n_i| over the stored support."""
        if not self.coefficients:
            return 0
        return max(max(abs(x) for x in g) for g in self.coefficients)

    # -- field evaluation ---------------------------------------------------

    def evaluate(self, frac: np.ndarray) -> np.ndarray:
        """W at fractional cell coordinates ``frac`` (shape (..., 3) or (3,))."""
        frac = np.asarray(frac, dtype=float)
        out = np.zeros(frac.shape[:-1] + (6, 6), dtype=complex)
        for g, mat in self.coefficients.items():
            phase = np.exp(2j * np.pi * (frac @ np.asarray(g, dtype=float)))
            out += phase[..., None, None] * mat
        return out

    def sample_grid(self, resolution: int) -> np.ndarray:
        """W on a uniform fractional grid, shape (npts, 6, 6).

        The grid has ``resolution`` points per periodic axis (suppressed axes
        are sampled once).
        """
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        axes = [np.arange(resolution) / resolution if i < self.dimension else np.zeros(1) for i in range(3)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        return self.evaluate(mesh)

    # -- structural predicates ----------------------------------------------

    def hermiticity_residual(self) -> float:
        """max_G ||What(-G) - What(G)^dagger||_F / scale over the stored support."""
        worst = 0.0
        for g, mat in self.coefficients.items():
            mg = self.coefficient(tuple(-x for x in g))
            scale = max(np.linalg.norm(mat), np.linalg.norm(mg), 1e-300)
            worst = max(worst, float(np.linalg.norm(mg - mat.conj().T) / scale))
        return worst

    def is_real_field(self, tol: float = 1e-12) -> bool:
        """True when W(x) is real pointwise, i.e. conj(What(G)) = What(-G)."""
        for g, mat in self.coefficients.items():
            mg = self.coefficient(tuple(-x for x in g))
            scale = max(np.linalg.norm(mat), 1e-300)
            if np.linalg.norm(np.conj(mat) - mg) > tol * scale:
                return False
        return True

    # -- derived media -------------------------------------------------------

    def conjugate_medium(self) -> "MaterialWeights":
        """The time-reversed medium conj(W)(x), coefficients conj(What(-G))."""
        coeffs = {g: np.conj(self.coefficient(tuple(-x for x in g))) for g in self.coefficients}
        return MaterialWeights(coeffs, self.dimension, self.bounds)

    def translated(self, shift_frac) -> "MaterialWeights":
        """W(x + a) for a lattice translation by fractional coordinates ``shift_frac``."""
        shift = np.zeros(3)
        vals = np.asarray(shift_frac, dtype=float)
        shift[: vals.shape[0]] = vals
        coeffs = {
            g: mat * np.exp(2j * np.pi * float(np.dot(g, shift)))
            for g, mat in self.coefficients.items()
        }
        return MaterialWeights(coeffs, self.dimension, self.bounds)

    # -- constructors ---------------------------------------------------------

    @staticmethod
    def homogeneous(eps, mu, chi=None, dimension: int = 3, bounds: tuple[float, float] | None = None) -> "MaterialWeights":
        """Homogeneous medium from 3x3 blocks (scalars are promoted to scalar*id)."""
        eps = _as_block(eps)
        mu = _as_block(mu)
        chi = np.zeros((3, 3), dtype=complex) if chi is None else _as_block(chi)
        w0 = np.zeros((6, 6), dtype=complex)
        w0[:3, :3] = eps
        w0[3:, 3:] = mu
        w0[:3, 3:] = chi
        w0[3:, :3] = chi.conj().T
        if bounds is None:
            eigs = np.linalg.eigvalsh((w0 + w0.conj().T) / 2)
            if eigs[0] <= 0:
                raise ValueError("homogeneous weight block is not positive definite")
            bounds = (float(eigs[0]) * 0.999, float(eigs[-1]) * 1.001)
        return MaterialWeights({(0, 0, 0): w0}, dimension, bounds)


def _as_block(val) -> np.ndarray:
    arr = np.asarray(val, dtype=complex)
    if arr.ndim == 0:
        return arr * np.eye(3, dtype=complex)
    if arr.shape != (3, 3):
        raise ValueError(f"expected scalar or 3x3 block, got shape {arr.shape}")
    return arr.copy()


# ---------------------------------------------------------------------------
# Pauli-block decomposition
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class WeightBlocks:
    """The four Hermitian 3x3 component fields of W = sum_j sigma_j (x) w_j."""

    w0: dict[IntTriple, np.ndarray]
    w1: dict[IntTriple, np.ndarray]
    w2: dict[IntTriple, np.ndarray]
    w3: dict[IntTriple, np.ndarray]

    def component(self, j: int) -> dict[IntTriple, np.ndarray]:
        return (self.w0, self.w1, self.w2, self.w3)[j]


def decompose_weights(w: MaterialWeights, tol: float = SYMMETRY_TOL) -> WeightBlocks:
    """Split W into the four 3x3 component fields of the sigma_j (x) w_j form.

    Uses the block identities w0 = (eps + mu)/2, w3 = eps - w0,
    w1 = (chi + chi^dagger)/2 and w2 = i (chi - w1); every step is exact
    floating-point arithmetic for dyadic-rational inputs, so reassembly
    reproduces such coefficients bit for bit.

    Raises
    ------
    NonHermitianField
        If What(-G) != What(G)^dagger beyond ``tol``.
    """
    resid = w.hermiticity_residual()
    if resid > tol:
        raise NonHermitianField(f"hermiticity residual {resid:.3e} exceeds tolerance {tol:.1e}")
    parts: tuple[dict, dict, dict, dict] = ({}, {}, {}, {})
    for g, mat in w.coefficients.items():
        eps, chi, mu = mat[:3, :3], mat[:3, 3:], mat[3:, 3:]
        w0 = (eps + mu) / 2
        w3 = eps - w0
        w1 = (chi + mat[3:, :3]) / 2
        w2 = 1j * (chi - w1)
        parts[0][g], parts[1][g], parts[2][g], parts[3][g] = w0, w1, w2, w3
    return WeightBlocks(*parts)


def assemble_weights(blocks: WeightBlocks, dimension: int, bounds: tuple[float, float]) -> MaterialWeights:
    """Inverse of `decompose_weights`: W = sum_j sigma_j (x) w_j in Fourier space."""
    keys = set()
    for j in range(4):
        keys.update(blocks.component(j))
    coeffs = {}
    for g in keys:
        mat = np.zeros((6, 6), dtype=complex)
        w0 = blocks.w0.get(g, 0)
        w1 = blocks.w1.get(g, 0)
        w2 = blocks.w2.get(g, 0)
        w3 = blocks.w3.get(g, 0)
        mat[:3, :3] = w0 + w3
        mat[3:, 3:] = w0 - w3
        mat[:3, 3:] = w1 - 1j * np.asarray(w2, dtype=complex)
        mat[3:, :3] = w1 + 1j * np.asarray(w2, dtype=complex)
        coeffs[g] = mat
    return MaterialWeights(coeffs, dimension, bounds)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ValidationReport:
    """Outcome of sampling-grid validation of a weight field."""

    min_eigenvalue: float
    max_eigenvalue: float
    hermiticity_residual: float
    grid_resolution: int
    bounds: tuple[float, float]
    passed: bool
    failures: tuple[str, ...]


def validate_weights(w: MaterialWeights, grid_resolution: int, tol: float = 1e-9) -> ValidationReport:
    """Check 0 < c_lower <= W(x) <= c_upper on a uniform sampling grid.

    Failures are reported, not raised; only structurally malformed inputs
    raise (`MalformedCoefficients`, guarded by the constructor).
    """
    values = w.sample_grid(grid_resolution)
    herm = w.hermiticity_residual()
    pointwise_herm = float(np.max(np.abs(values - np.conj(np.swapaxes(values, -1, -2)))))
    sym = (values + np.conj(np.swapaxes(values, -1, -2))) / 2
    eigs = np.linalg.eigvalsh(sym)
    mn, mx = float(eigs.min()), float(eigs.max())
    lo, hi = w.bounds
    failures = []
    if herm > tol:
        failures.append(f"coefficient hermiticity residual {herm:.3e} > {tol:.1e}")
    if pointwise_herm > tol * max(mx, 1.0):
        failures.append(f"pointwise hermiticity residual {pointwise_herm:.3e}")
    if mn < lo - tol * max(abs(lo), 1.0):
        failures.append(f"min eigenvalue {mn:.6g} below declared c_lower {lo:.6g}")
    if mn <= 0:
        failures.append(f"weight field not positive: c_observed = {max(mn, 0.0):.6g}")
    if mx > hi + tol * max(abs(hi), 1.0):
        failures.append(f"max eigenvalue {mx:.6g} above declared c_upper {hi:.6g}")
    return ValidationReport(
        min_eigenvalue=mn,
        max_eigenvalue=mx,
        hermiticity_residual=max(herm, pointwise_herm),
        grid_resolution=grid_resolution,
        bounds=w.bounds,
        passed=not failures,
        failures=tuple(failures),
    )


# ---------------------------------------------------------------------------
# Material symmetries and classification
# ---------------------------------------------------------------------------


class MediaType(str, enum.Enum):
    DUAL_SYMMETRIC = "DualSymmetric"
    NON_GYROTROPIC = "NonGyrotropic"
    MAGNETO_ELECTRIC = "MagnetoElectric"
    GYROTROPIC = "Gyrotropic"


class CAZClass(str, enum.Enum):
    TWO_TIMES_AI = "2xAI"
    AI = "AI"
    A = "A"


#: Topological invariants available per spatial dimension for each class
#: (first Chern numbers only; d = 4 is out of scope).
_INVARIANTS = {
    CAZClass.A: {1: (), 2: ("first_chern",), 3: ("first_chern",) * 3},
    CAZClass.AI: {1: (), 2: (), 3: ()},
    CAZClass.TWO_TIMES_AI: {1: (), 2: (), 3: ()},
}

_CLASS_TABLE: dict[frozenset, tuple[MediaType, CAZClass]] = {
    frozenset({"T1", "T3", "U2"}): (MediaType.DUAL_SYMMETRIC, CAZClass.TWO_TIMES_AI),
    frozenset({"T3"}): (MediaType.NON_GYROTROPIC, CAZClass.AI),
    frozenset({"T1"}): (MediaType.MAGNETO_ELECTRIC, CAZClass.AI),
    frozenset(): (MediaType.GYROTROPIC, CAZClass.A),
}

ASSUMPTION_NOTE = (
    "classification assumes the positive-frequency operator has no additional "
    "unitary commuting symmetries; this hypothesis is not verified algorithmically"
)


@dataclasses.dataclass(frozen=True)
class SymmetryReport:
    """Surviving material symmetries and the resulting topological class."""

    surviving: frozenset[str]
    media_type: MediaType
    caz_class: CAZClass
    invariants_by_dim: Mapping[int, tuple[str, ...]]
    residuals: Mapping[str, float]
    assumption: str = ASSUMPTION_NOTE


def symmetry_residuals(w: MaterialWeights) -> dict[str, float]:
    """Relative Frobenius residuals of the three candidate material symmetries.

    T1 and T3 are the antiunitary conditions sigma_j conj(W(x)) sigma_j = W(x),
    realized on coefficients as sigma_j conj(What(-G)) sigma_j = What(G); U2 is
    the unitary condition sigma_2 What(G) sigma_2 = What(G).
    """
    res = {"T1": 0.0, "U2": 0.0, "T3": 0.0}
    s1, s2, s3 = _SIGMA6[1], _SIGMA6[2], _SIGMA6[3]
    for g, mat in w.coefficients.items():
        mg = w.coefficient(tuple(-x for x in g))
        scale = max(np.linalg.norm(mat), np.linalg.norm(mg), 1e-300)
        res["T1"] = max(res["T1"], float(np.linalg.norm(s1 @ np.conj(mg) @ s1 - mat) / scale))
        res["T3"] = max(res["T3"], float(np.linalg.norm(s3 @ np.conj(mg) @ s3 - mat) / scale))
        res["U2"] = max(res["U2"], float(np.linalg.norm(s2 @ mat @ s2 - mat) / scale))
    return res


def detect_symmetries(w: MaterialWeights, tol: float = SYMMETRY_TOL) -> frozenset[str]:
    """Subset of {T1, U2, T3} surviving in the medium, within ``tol``."""
    res = symmetry_residuals(w)
    return frozenset(name for name, r in res.items() if r <= tol)


def apply_symmetry(w: MaterialWeights, name: str) -> MaterialWeights:
    """Transform the medium by a candidate symmetry (used for consistency tests)."""
    j = {"T1": 1, "U2": 2, "T3": 3}[name]
    s = _SIGMA6[j]
    coeffs = {}
    for g in w.coefficients:
        if name == "U2":
            coeffs[g] = s @ w.coefficient(g) @ s
        else:
            coeffs[g] = s @ np.conj(w.coefficient(tuple(-x for x in g))) @ s
    return MaterialWeights(coeffs, w.dimension, w.bounds)


def classify(w: MaterialWeights, tol: float = SYMMETRY_TOL) -> SymmetryReport:
    """Assign the medium to one of the four material classes.

    Raises
    ------
    AmbiguousClass
        If the detected symmetry set is not one of {T1,T3,U2}, {T3}, {T1}, {}.
        The four-row classification table presumes exactly these patterns; the
        classifier reports ambiguity rather than guessing.
    """
    residuals = symmetry_residuals(w)
    surviving = frozenset(name for name, r in residuals.items() if r <= tol)
    key = frozenset(surviving)
    if key not in _CLASS_TABLE:
        raise AmbiguousClass(
            f"detected symmetry set {sorted(surviving)} matches no media row; "
            f"residuals: " + ", ".join(f"{k}={v:.3e}" for k, v in sorted(residuals.items()))
        )
    media, caz = _CLASS_TABLE[key]
    return SymmetryReport(
        surviving=surviving,
        media_type=media,
        caz_class=caz,
        invariants_by_dim=MappingProxyType(dict(_INVARIANTS[caz])),
        residuals=MappingProxyType(dict(residuals)),
    )


# ---------------------------------------------------------------------------
# Weight files (TOML)
# ---------------------------------------------------------------------------


def _format_float(x: float) -> str:
    return f"{x:.17g}"


def _matrix_rows(mat: np.ndarray) -> str:
    rows = []
    for r in range(6):
        rows.append("    [" + ", ".join(_format_float(float(v)) for v in mat[r]) + "],")
    return "\n".join(rows)


def save_weights(w: MaterialWeights, lattice: Lattice, path, coefficient_cutoff: float | None = None) -> None:
    """Write a weight field to a TOML document.

    Only lexicographically non-negative G are stored; readers reconstruct
    What(-G) = What(G)^dagger.
    """
    if coefficient_cutoff is None:
        gs = [np.asarray(g, dtype=float) @ lattice.reciprocal for g in w.coefficients] or [np.zeros(3)]
        coefficient_cutoff = float(max(np.linalg.norm(g) for g in gs))
    lines = ["# emtopo material weight field"]
    lines.append(f"dimension = {w.dimension}")
    lines.append(f"c_lower = {_format_float(w.bounds[0])}")
    lines.append(f"c_upper = {_format_float(w.bounds[1])}")
    lines.append(f"cutoff = {_format_float(coefficient_cutoff)}")
    lines.append("")
    lines.append("[lattice]")
    if lattice.name:
        lines.append(f'preset = "{lattice.name}"')
    basis = ", ".join(
        "[" + ", ".join(_format_float(v) for v in lattice.basis[i, : lattice.dimension]) + "]"
        for i in range(lattice.dimension)
    )
    lines.append(f"basis = [{basis}]")
    for g in sorted(w.coefficients):
        if g < tuple(-x for x in g):
            continue  # store the lexicographically non-negative representative
        mat = w.coefficient(g)
        lines.append("")
        lines.append("[[coefficient]]")
        lines.append(f"g = [{g[0]}, {g[1]}, {g[2]}]")
        lines.append("re = [")
        lines.append(_matrix_rows(mat.real))
        lines.append("]")
        lines.append("im = [")
        lines.append(_matrix_rows(mat.imag))
        lines.append("]")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_toml(path) -> dict:
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def lattice_from_config(table: Mapping, dimension: int | None = None) -> Lattice:
    """Build a lattice from a TOML table with either a preset name or a basis."""
    if "preset" in table and "basis" not in table:
        preset = str(table["preset"])
        factory = {
            "linear": Lattice.linear,
            "square": Lattice.square,
            "cubic": Lattice.cubic,
            "hexagonal": Lattice.hexagonal,
        }.get(preset)
        if factory is None:
            raise ValueError(f"unknown lattice preset {preset!r}")
        return factory(float(table.get("a", 1.0)))
    if "basis" not in table:
        raise ValueError("lattice table needs 'preset' or 'basis'")
    name = table.get("preset")
    lat = Lattice.from_vectors(table["basis"], name=name)
    if dimension is not None and lat.dimension != dimension:
        raise ValueError(f"lattice dimension {lat.dimension} != declared dimension {dimension}")
    return lat


def load_weights(path, hermiticity_tol: float = SYMMETRY_TOL) -> tuple[MaterialWeights, Lattice]:
    """Read a weight field and its lattice from a TOML document.

    Missing -G entries are reconstructed as What(G)^dagger; if both members of
    a pair are stored they must agree within ``hermiticity_tol``.
    """
    doc = _load_toml(path)
    try:
        dimension = int(doc["dimension"])
        lo = float(doc["c_lower"])
        hi = float(doc["c_upper"])
        lattice = lattice_from_config(doc["lattice"], dimension)
        entries = doc.get("coefficient", [])
    except KeyError as exc:
        raise MalformedCoefficients(f"weight file {path} is missing key {exc}") from exc
    cutoff = float(doc.get("cutoff", np.inf))
    coeffs: dict[IntTriple, np.ndarray] = {}
    for entry in entries:
        try:
            g = _canon_key(entry["g"])
            re = np.asarray(entry["re"], dtype=float)
            im = np.asarray(entry["im"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedCoefficients(f"broken coefficient entry in {path}: {exc}") from exc
        if re.shape != (6, 6) or im.shape != (6, 6):
            raise MalformedCoefficients(f"coefficient {g} in {path} is not a 6x6 re/im pair")
        if g in coeffs:
            raise MalformedCoefficients(f"coefficient {g} stored twice in {path}")
        coeffs[g] = re + 1j * im
    if np.isfinite(cutoff):
        for g in coeffs:
            if np.linalg.norm(np.asarray(g, dtype=float) @ lattice.reciprocal) > cutoff * (1 + 1e-12):
                raise MalformedCoefficients(f"coefficient {g} lies outside the declared cutoff {cutoff}")
    # reconstruct the hermitian partners
    for g in list(coeffs):
        neg = tuple(-x for x in g)
        if neg not in coeffs:
            coeffs[neg] = coeffs[g].conj().T
        else:
            scale = max(np.linalg.norm(coeffs[g]), 1e-300)
            if np.linalg.norm(coeffs[neg] - coeffs[g].conj().T) > hermiticity_tol * scale:
                raise NonHermitianField(
                    f"stored coefficients at {g} and {neg} are not hermitian partners"
                )
    return MaterialWeights(coeffs, dimension, (lo, hi)), lattice
