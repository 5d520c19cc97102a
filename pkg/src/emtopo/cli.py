"""Configuration-driven command line front end.

Subcommands: classify, bands, chern, evolve, check.  One structured TOML
config per job plus flag overrides; outputs are deterministic CSV/text files
(fixed ordering, 17 significant digits, no timestamps), so identical configs
reproduce byte-identical artifacts.

Exit codes: 0 success, 1 error (I/O, validation, solver), 2 analysable but
flagged (ambiguous class, unconverged Chern number, closed gap).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import evolution, operator, topology
from .errors import AmbiguousClass, EmtopoError, NotConverged
from .lattice import KGrid, bz_path, plane_wave_set
from .weights import classify, load_weights, validate_weights, SYMMETRY_TOL
from . import weights as weights_mod


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def write_csv(path: Path, comments: Sequence[str], header: Sequence[str], rows) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        cells = [cell if isinstance(cell, str) else _fmt(cell) for cell in row]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Job configuration
# ---------------------------------------------------------------------------


_TOL_DEFAULTS = {
    "symmetry": SYMMETRY_TOL,
    "zero": operator.ZERO_TOL,
    "gap": topology.GAP_TOL,
    "link": topology.LINK_TOL,
    "chern_residual": topology.CHERN_RESIDUAL_TOL,
    "quadrature": 1e-8,
}


@dataclasses.dataclass
class JobConfig:
    weights_file: Path
    cutoff: float
    n_bands: int
    out_dir: Path
    tolerances: dict
    path_waypoints: list
    path_samples: int
    grid_shape: tuple[int, ...]
    grid_offsets: tuple[float, ...]
    selection: tuple[int, int] | None
    evolution: dict
    validation_resolution: int
    plot_script: bool
    dump_fiber: bool
    workers: int


def _parse_bands_range(value) -> tuple[int, int]:
    if isinstance(value, str):
        lo, _, hi = value.partition("..")
        return int(lo), int(hi or lo)
    seq = list(value)
    return int(seq[0]), int(seq[-1])


def _parse_grid_spec(value: str) -> tuple[int, ...]:
    return tuple(int(p) for p in value.lower().split("x"))


def load_config(args: argparse.Namespace) -> JobConfig:
    doc = weights_mod._load_toml(args.config)
    base = Path(args.config).parent

    weights_file = doc.get("weights", {}).get("file")
    if weights_file is None:
        raise EmtopoError("config is missing [weights] file = ...")
    weights_file = (base / weights_file).resolve()
    if not weights_file.exists():
        raise EmtopoError(f"weights file {weights_file} does not exist")

    solver = doc.get("solver", {})
    cutoff = float(solver.get("cutoff", 4 * 2 * np.pi))
    n_bands = int(solver.get("n_bands", 6))

    tolerances = dict(_TOL_DEFAULTS)
    for key, val in doc.get("tolerances", {}).items():
        tolerances[str(key)] = float(val)

    path_tab = doc.get("path", {})
    grid_tab = doc.get("grid", {})
    sel_tab = doc.get("selection", {})
    out_tab = doc.get("output", {})
    evo = doc.get("evolution", {})

    cfg = JobConfig(
        weights_file=weights_file,
        cutoff=cutoff,
        n_bands=n_bands,
        out_dir=Path(out_tab.get("directory", "out")),
        tolerances=tolerances,
        path_waypoints=list(path_tab.get("waypoints", ["G", "X"])),
        path_samples=int(path_tab.get("samples_per_segment", 10)),
        grid_shape=tuple(int(n) for n in grid_tab.get("shape", (24, 24))),
        grid_offsets=tuple(float(o) for o in grid_tab.get("offsets", ())),
        selection=_parse_bands_range(sel_tab["bands"]) if "bands" in sel_tab else None,
        evolution=evo,
        validation_resolution=int(doc.get("validation", {}).get("grid_resolution", 32)),
        plot_script=bool(out_tab.get("plot_script", False)),
        dump_fiber=bool(out_tab.get("dump_fiber", False)),
        workers=int(solver.get("workers", 1)),
    )

    # flag overrides
    if args.cutoff is not None:
        cfg.cutoff = args.cutoff
    if args.grid is not None:
        cfg.grid_shape = _parse_grid_spec(args.grid)
    if args.bands is not None:
        cfg.selection = _parse_bands_range(args.bands)
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    for spec in args.tol or ():
        key, _, val = spec.partition("=")
        if not val:
            raise EmtopoError(f"--tol expects KEY=VAL, got {spec!r}")
        cfg.tolerances[key] = float(val)

    if cfg.cutoff <= 0:
        raise EmtopoError("cutoff must be positive")
    if any(t <= 0 for t in cfg.tolerances.values()):
        raise EmtopoError("tolerances must be positive")
    if cfg.selection is not None and cfg.selection[0] < 1:
        raise EmtopoError("band selection indices are 1-based and must be positive")
    return cfg


def _load_validated(cfg: JobConfig):
    weights, lattice = load_weights(cfg.weights_file, hermiticity_tol=cfg.tolerances["symmetry"])
    report = validate_weights(weights, cfg.validation_resolution)
    return weights, lattice, report


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_classify(cfg: JobConfig) -> int:
    weights, _, validation = _load_validated(cfg)
    if not validation.passed:
        for failure in validation.failures:
            print(f"validation: {failure}", file=sys.stderr)
        return 1
    try:
        report = classify(weights, tol=cfg.tolerances["symmetry"])
    except AmbiguousClass as exc:
        print(f"AmbiguousClass: {exc}")
        return 2
    print(f"{report.media_type.value} / {report.caz_class.value}")
    print(f"surviving symmetries: {', '.join(sorted(report.surviving)) or 'none'}")
    for d in (1, 2, 3):
        inv = report.invariants_by_dim[d]
        label = ", ".join(inv) if inv else "none (topologically trivial)"
        print(f"d = {d}: {label}")
    print(f"note: {report.assumption}")
    return 0


def cmd_bands(cfg: JobConfig) -> int:
    weights, lattice, validation = _load_validated(cfg)
    if not validation.passed:
        for failure in validation.failures:
            print(f"validation: {failure}", file=sys.stderr)
        return 1
    pws = plane_wave_set(lattice, cfg.cutoff)
    path = bz_path(lattice, cfg.path_waypoints, cfg.path_samples)
    rows = []
    for i, k in enumerate(path.points):
        spectrum = operator.eigensolve(
            operator.assemble_fiber(weights, pws, k), zero_tol=cfg.tolerances["zero"]
        )
        freqs = spectrum.band_frequencies(cfg.n_bands)
        rows.append((i, k[0], k[1], k[2], path.arclength[i], *freqs))
        if cfg.dump_fiber and i == 0:
            cfg.out_dir.mkdir(parents=True, exist_ok=True)
            operator.write_triplets(spectrum.fiber.rot, cfg.out_dir / "fiber_rot.txt", comment="rot(k)")
            operator.write_triplets(spectrum.fiber.weight, cfg.out_dir / "fiber_weight.txt", comment="weight")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    header = ["index", "k1", "k2", "k3", "arclength"] + [f"omega_{n}" for n in range(1, cfg.n_bands + 1)]
    labels = " ".join(f"{idx}:{lab}" for idx, lab in path.labels if lab)
    write_csv(
        cfg.out_dir / "bands.csv",
        [
            "band frequencies along a BZ path",
            "k in reduced reciprocal coordinates; omega in units c = 1, a = 1 "
            "(vacuum: omega = |k|, so omega/(2 pi) is the frequency in c/a)",
            f"waypoints: {labels}",
            f"cutoff = {_fmt(cfg.cutoff)}  plane_waves = {len(pws)}",
        ],
        header,
        rows,
    )
    if cfg.plot_script:
        _write_band_plot_script(cfg.out_dir)
    print(f"wrote {cfg.out_dir / 'bands.csv'} ({len(rows)} k-points, {cfg.n_bands} bands)")
    return 0


def _write_band_plot_script(out_dir: Path) -> None:
    script = """\
#!/usr/bin/env python3
\"\"\"Plot bands.csv produced by `emtopo bands` (run separately, needs matplotlib).\"\"\"
import csv
import matplotlib.pyplot as plt

xs, bands = [], []
with open("bands.csv") as fh:
    for row in csv.reader(line for line in fh if not line.startswith("#")):
        if row[0] == "index":
            n_bands = len(row) - 5
            continue
        xs.append(float(row[4]))
        bands.append([float(v) for v in row[5:]])
for b in range(n_bands):
    plt.plot(xs, [vals[b] for vals in bands], "k-", lw=1)
plt.xlabel("path arclength")
plt.ylabel("omega (c = 1, a = 1)")
plt.tight_layout()
plt.savefig("bands.png", dpi=200)
"""
    (out_dir / "plot_bands.py").write_text(script, encoding="utf-8")


def _chern_grids(cfg: JobConfig, lattice) -> list[tuple[str, KGrid]]:
    if lattice.dimension == 2:
        shape = cfg.grid_shape[:2]
        return [("k1-k2", KGrid(lattice, shape, cfg.grid_offsets or (0.0, 0.0)))]
    if lattice.dimension == 3:
        n1, n2 = cfg.grid_shape[0], cfg.grid_shape[1 % len(cfg.grid_shape)]
        offsets = cfg.grid_offsets or (0.0, 0.0, 0.0)
        grids = []
        for frozen in (2, 1, 0):
            axes = tuple(a for a in range(3) if a != frozen)
            shape = [1, 1, 1]
            shape[axes[0]] = n1
            shape[axes[1]] = n2
            grids.append((f"k{axes[0] + 1}-k{axes[1] + 1}", KGrid(lattice, tuple(shape), offsets)))
        return grids
    raise EmtopoError("Chern numbers need a 2- or 3-dimensional lattice")


def cmd_chern(cfg: JobConfig) -> int:
    weights, lattice, validation = _load_validated(cfg)
    if not validation.passed:
        for failure in validation.failures:
            print(f"validation: {failure}", file=sys.stderr)
        return 1
    if cfg.selection is None:
        raise EmtopoError("chern needs a band selection ([selection] bands or --bands a..b)")
    first, last = cfg.selection
    pws = plane_wave_set(lattice, cfg.cutoff)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    report_lines = [
        "# chern summary",
        f"# weights: {cfg.weights_file.name}",
        f"# cutoff = {_fmt(cfg.cutoff)}  plane_waves = {len(pws)}",
        f"# selection: bands {first}..{last}",
    ]
    exit_code = 0
    for label, grid in _chern_grids(cfg, lattice):
        gs = topology.solve_grid(
            weights, pws, grid, n_bands=last + 1,
            store_bands=range(first, last + 1), workers=cfg.workers,
        )
        try:
            selection = topology.select_bands(gs, first, last, gap_tol=cfg.tolerances["gap"])
        except ValueError as exc:
            print(f"{label}: gap closed - {exc}", file=sys.stderr)
            report_lines.append(f"{label}: gap closed ({exc})")
            exit_code = 2
            continue
        try:
            result = topology.chern_number(
                gs, selection,
                link_tol=cfg.tolerances["link"],
                residual_tol=cfg.tolerances["chern_residual"],
            )
        except NotConverged as exc:
            result = exc.result
            print(f"{label}: NOT CONVERGED {result.summary()}", file=sys.stderr)
            report_lines.append(f"{label}: NOT CONVERGED {result.summary()}")
            exit_code = 2
            _write_curvature(cfg, label, grid, result)
            continue
        line = f"{label}: grid {grid.shape} {result.summary()}"
        print(line)
        report_lines.append(line)
        _write_curvature(cfg, label, grid, result)
    (cfg.out_dir / "chern.txt").write_text("\n".join(report_lines) + "\n", encoding="utf-8")
    return exit_code


def _write_curvature(cfg: JobConfig, label: str, grid: KGrid, result) -> None:
    curv = result.curvature
    a1, a2 = curv.axes
    rows = []
    for i1 in range(curv.grid_shape[0]):
        for i2 in range(curv.grid_shape[1]):
            rows.append((i1 / curv.grid_shape[0], i2 / curv.grid_shape[1], curv.values[i1, i2]))
    name = f"curvature_{label.replace('-', '_')}.csv"
    write_csv(
        cfg.out_dir / name,
        [
            f"berry curvature per plaquette, plane {label}, grid {curv.grid_shape}",
            f"bands {result.selection.first}..{result.selection.last}; "
            f"C = {result.integer} (pre-rounding {_fmt(result.total)})",
        ],
        ["k1", "k2", "F"],
        rows,
    )


def cmd_evolve(cfg: JobConfig) -> int:
    weights, lattice, validation = _load_validated(cfg)
    if not validation.passed:
        for failure in validation.failures:
            print(f"validation: {failure}", file=sys.stderr)
        return 1
    evo = cfg.evolution
    pws = plane_wave_set(lattice, cfg.cutoff)
    k = evo.get("k", [0.0, 0.0, 0.0])
    fiber = operator.assemble_fiber(weights, pws, np.asarray(k, dtype=float))
    spectrum = operator.eigensolve(fiber, zero_tol=cfg.tolerances["zero"])

    coeffs = np.zeros(fiber.size, dtype=complex)
    for entry in evo.get("initial", [{"band": 1, "re": 1.0, "im": 0.0}]):
        band = int(entry["band"])
        amp = float(entry.get("re", 0.0)) + 1j * float(entry.get("im", 0.0))
        vec = spectrum.band_vector(band)
        coeffs += amp * (spectrum.vectors.conj().T @ (fiber.weight @ vec))
    state = evolution.FiberState(spectrum=spectrum, coefficients=coeffs, time=float(evo.get("t0", 0.0)))

    source = None
    src_tab = evo.get("source")
    if src_tab and src_tab.get("type", "none") != "none":
        if src_tab["type"] != "transverse_mode":
            raise EmtopoError(f"unknown source type {src_tab['type']!r}")
        vec = spectrum.band_vector(int(src_tab["band"]))
        amp = float(src_tab.get("re", 1.0)) + 1j * float(src_tab.get("im", 0.0))
        kg = fiber.k_reduced @ lattice.reciprocal + pws.g_cartesian()
        j_e = vec.reshape(len(pws), 6)[:, :3].copy()
        units = kg / np.maximum(np.linalg.norm(kg, axis=1)[:, None], 1e-300)
        j_e -= units * np.einsum("gi,gi->g", units, j_e)[:, None]  # divergence-free projection
        j_hat = np.zeros(fiber.size, dtype=complex)
        j_hat.reshape(len(pws), 6)[:, :3] = amp * j_e
        source = evolution.SourceTerm.constant(j_hat)

    t0 = float(evo.get("t0", 0.0))
    t1 = float(evo.get("t1", 10.0))
    steps = int(evo.get("steps", 50))
    report_bands = [int(b) for b in evo.get("bands", [])]
    times = np.linspace(t0, t1, steps + 1)
    rows = evolution.trajectory(
        state, times, source=source, report_bands=report_bands, order=int(evo.get("quad_order", 8))
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    header = ["t", "energy", "constraint_residual"] + [f"amp_band_{b}" for b in report_bands]
    write_csv(
        cfg.out_dir / "trajectory.csv",
        [
            "spectral time evolution (units a / c)",
            f"k = [{_fmt(k[0])}, {_fmt(k[1]) if len(k) > 1 else 0}, {_fmt(k[2]) if len(k) > 2 else 0}]",
            f"cutoff = {_fmt(cfg.cutoff)}  source = {'yes' if source else 'no'}",
        ],
        header,
        rows,
    )
    print(f"wrote {cfg.out_dir / 'trajectory.csv'} ({len(rows)} steps)")
    return 0


def cmd_check(cfg: JobConfig) -> int:
    weights, lattice, validation = _load_validated(cfg)
    rng = np.random.default_rng(20240801)
    checks: list[tuple[str, bool, str]] = []

    checks.append(
        (
            "weights_validation",
            validation.passed,
            f"eig range [{validation.min_eigenvalue:.6g}, {validation.max_eigenvalue:.6g}]"
            + ("" if validation.passed else "; " + "; ".join(validation.failures)),
        )
    )

    pws = plane_wave_set(lattice, cfg.cutoff)
    k_probe = np.array([0.31, 0.17, 0.07])[: lattice.dimension]
    fiber = operator.assemble_fiber(weights, pws, np.pad(k_probe, (0, 3 - len(k_probe))))
    spectrum = operator.eigensolve(fiber, zero_tol=cfg.tolerances["zero"])

    contract_report = operator.validate_contract(operator.em_contract(fiber))
    checks.append(
        (
            "maxwell_type_contract",
            contract_report.passed,
            f"commutator {contract_report.commutator_norm:.2e}, c = {contract_report.lower_bound_c:.6g}",
        )
    )

    resid = operator.eigen_residual(spectrum)
    checks.append(("eigen_residual", resid < 1e-9, f"residual {resid:.2e}"))

    herm_worst = 0.0
    winv_rot = None
    for _ in range(4):
        a = rng.standard_normal(fiber.size) + 1j * rng.standard_normal(fiber.size)
        b = rng.standard_normal(fiber.size) + 1j * rng.standard_normal(fiber.size)
        if winv_rot is None:
            winv_rot = np.linalg.solve(fiber.weight, fiber.rot.astype(complex))
        lhs = operator.weighted_inner(a, winv_rot @ b, fiber.weight)
        rhs = operator.weighted_inner(winv_rot @ a, b, fiber.weight)
        scale = max(abs(lhs), abs(rhs), 1e-300)
        herm_worst = max(herm_worst, abs(lhs - rhs) / scale)
    checks.append(("hermitian_in_weighted_product", herm_worst < 1e-10, f"residual {herm_worst:.2e}"))

    # particle-hole mirror: same medium for real fields, conjugate medium otherwise
    real_medium = weights.is_real_field()
    mirror_medium = weights if real_medium else weights.conjugate_medium()
    worst = 0.0
    for _ in range(3):
        k = rng.uniform(-0.45, 0.45, size=3)
        k[lattice.dimension:] = 0.0
        sp = operator.eigensolve(operator.assemble_fiber(weights, pws, k))
        sm = operator.eigensolve(operator.assemble_fiber(mirror_medium, pws, -k))
        scale = max(np.max(np.abs(sp.omegas)), 1e-300)
        worst = max(worst, float(np.max(np.abs(np.sort(sp.omegas) - np.sort(-sm.omegas)))) / scale)
    mirror_name = "spectral_mirror" if real_medium else "spectral_mirror_conjugate_medium"
    checks.append((mirror_name, worst < 1e-9, f"max deviation {worst:.2e}"))

    if real_medium:
        pair = evolution.FiberPair.build(weights, pws, np.array([0.23, 0.11, 0.05])[: 3])
        field = evolution.PairField.random_real(pair, rng)
        rt = evolution.real_roundtrip(field)
        checks.append(("real_roundtrip", rt.residual < 1e-10, f"residual {rt.residual:.2e}"))
        pl = evolution.phase_locking_check(field)
        checks.append(("phase_locking", pl.residual < 1e-10, f"residual {pl.residual:.2e}"))
    else:
        checks.append(("real_roundtrip", True, "skipped: complex weights have no pointwise conjugation symmetry"))

    state = evolution.FiberState.from_fourier(spectrum, rng.standard_normal(fiber.size) + 0j)
    drift = abs(evolution.evolve(state, 977.0).energy - state.energy) / max(state.energy, 1e-300)
    checks.append(("unitarity", drift < 1e-12, f"energy drift {drift:.2e} at t = 977"))

    radii = [0.08, 0.04][: 2]
    b1 = float(np.linalg.norm(lattice.reciprocal[0]))
    devs = [
        topology.ground_state_dispersion_check(weights, pws, radius=r * b1, samples=3).max_deviation
        for r in radii
    ]
    checks.append(
        (
            "ground_state_dispersion",
            devs[-1] <= devs[0] and devs[-1] < 0.2,
            f"deviation {devs[0]:.3e} -> {devs[-1]:.3e} over radii {radii}",
        )
    )

    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        print(f"{status}  {name:<{width}}  {detail}")
        failed += 0 if ok else 1
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emtopo",
        description="Bloch bands, symmetry classes, Chern numbers and spectral "
        "time evolution for periodic electromagnetic media.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("classify", "material symmetry detection and CAZ classification"),
        ("bands", "band structure along a BZ path (CSV)"),
        ("chern", "Berry curvature and Chern numbers on a BZ grid"),
        ("evolve", "spectral time evolution trajectory (CSV)"),
        ("check", "run the invariant suite and print a pass/fail table"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="job config (TOML)")
        p.add_argument("--cutoff", type=float, default=None, help="plane-wave cutoff |G| override")
        p.add_argument("--grid", default=None, help="BZ grid override, e.g. 24x24 or 12x12x12")
        p.add_argument("--bands", default=None, help="band selection override, e.g. 3..4")
        p.add_argument("--tol", action="append", default=None, metavar="KEY=VAL", help="tolerance override")
        p.add_argument("--out", default=None, help="output directory override")
    return parser


COMMANDS = {
    "classify": cmd_classify,
    "bands": cmd_bands,
    "chern": cmd_chern,
    "evolve": cmd_evolve,
    "check": cmd_check,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (EmtopoError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
