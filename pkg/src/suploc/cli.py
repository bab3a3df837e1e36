"""Command line front end: ``suploc <subcommand> [options]``.

Each run writes its artifacts plus ``manifest.json`` (the resolved config) to
the output directory, taken from ``--out``, else ``$SUPLOC_OUT``, else ``.``.
Failures are reported as JSON on stderr with a machine-readable code.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .approximation import PRESETS, CadlagDensity, MeshCapError, realize_and_compare
from .assembly import FillMode, assign_components, audit_path, build_path, layout_order, uniform_path
from .blocks import InfeasibleError, UniformCase, choose_period, feasibility, peel_blocks, recompose
from .density import (
    StepDensity,
    check_integral_inequality,
    check_universal_bound,
    check_window_monotonicity,
    validate_density,
)
from .io import (
    SCHEMA_VERSION,
    SchemaError,
    audit_to_json,
    collection_from_json,
    collection_to_json,
    density_from_json,
    density_to_json,
    dumps,
    f17,
    feasibility_to_json,
    law_csv,
    law_distance_json,
    law_to_json,
    path_from_json,
    path_to_json,
    report_to_json,
)
from .oracle import atom_identity_check, exact_law, grid_law, law_distance
from .rational import as_fraction, fmt
from .simulate import (
    MixingProcessSpec,
    atom_proxy,
    conditional_uniformity,
    ks_uniform,
    simulate_mixing_tau,
    uniformity_band,
)

SUBCOMMANDS = ("validate", "decompose", "build", "law", "approx", "mix", "verify")

EXAMPLES = {
    "e1": StepDensity.constant(1, Fraction(1, 2)),
    "e3": StepDensity.from_pieces(1, [(Fraction(1, 2), 1), (1, Fraction(1, 2))]),
}


class CliError(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    subcommand: str
    density: Optional[str] = None
    example: str = "e3"
    blocks: Optional[str] = None
    path: Optional[str] = None
    H: Optional[str] = None
    T: Optional[str] = None
    mode: str = FillMode.REPAIRED.value
    seed: int = 0
    grid: bool = False
    n_grid: int = 10_000
    n_shift: int = 100_000
    n_paths: int = 100_000
    n_bins: int = 50
    preset: str = "ramp"
    n_list: list[int] = field(default_factory=lambda: [2, 4, 8, 16])
    w: float = 1.0
    h: float = 0.01
    innovations: str = "normal"
    eps: float = 0.1
    workers: int = 1
    out: str = "."


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError("argument_error", f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise CliError("schema_violation", f"{path}: invalid JSON ({exc})") from None


def _density(cfg: RunConfig) -> StepDensity:
    if cfg.density:
        return density_from_json(_read_json(cfg.density))
    if cfg.example not in EXAMPLES:
        raise CliError("argument_error", f"unknown example {cfg.example!r}")
    return EXAMPLES[cfg.example]


def _collection(cfg: RunConfig):
    if cfg.blocks:
        return collection_from_json(_read_json(cfg.blocks))
    f = _density(cfg)
    H = as_fraction(cfg.H) if cfg.H else choose_period(f)
    return peel_blocks(f, H)


class Outputs:
    def __init__(self, cfg: RunConfig) -> None:
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.cfg = cfg

    def write(self, name: str, text: str) -> None:
        (self.dir / name).write_text(text)
        self.files.append(name)

    def manifest(self, status: int) -> None:
        doc = {
            "config": asdict(self.cfg),
            "files": self.files,
            "exit_status": status,
            "version": __version__,
            "created": datetime.now(timezone.utc).isoformat(),
        }
        (self.dir / "manifest.json").write_text(dumps(doc))


def cmd_validate(cfg: RunConfig, out: Outputs) -> int:
    rep = validate_density(_density(cfg))
    doc = report_to_json(rep)
    out.write("density_report.json", dumps(doc))
    print(dumps(doc), end="")
    return 0 if rep.admissible else 1


def cmd_decompose(cfg: RunConfig, out: Outputs) -> int:
    c = _collection(cfg)
    feas = feasibility(c)
    doc = {"collection": collection_to_json(c), "feasibility": feasibility_to_json(feas)}
    out.write("blocks.json", dumps(doc))
    print(dumps(doc), end="")
    return 0 if feas.ok else 1


def _build(cfg: RunConfig):
    c = _collection(cfg)
    comps = assign_components(c)
    layout = layout_order(comps, c.d)
    path = build_path(layout, c.d, c.T, c.H, cfg.mode)
    return c, layout, path


def cmd_build(cfg: RunConfig, out: Outputs) -> int:
    c, layout, path = _build(cfg)
    audit = audit_path(path, layout, c.d, cfg.mode)
    out.write("path.json", dumps(path_to_json(path)))
    doc = audit_to_json(audit)
    out.write("audit.json", dumps(doc))
    print(dumps(doc), end="")
    return 0 if audit.ok else 1


def cmd_law(cfg: RunConfig, out: Outputs) -> int:
    target = None
    coll = None
    if cfg.path:
        path = path_from_json(_read_json(cfg.path))
        if not cfg.T:
            raise CliError("argument_error", "--T is required with --path")
        T = as_fraction(cfg.T)
    else:
        f = _density(cfg) if not cfg.blocks else None
        if f is not None and validate_density(f).is_uniform:
            path, T = uniform_path(f.T), f.T
        else:
            coll, _, path = _build(cfg)
            T = coll.T
            f = f if f is not None else recompose(coll)
        target = f
    law = exact_law(path, T)
    doc = {"law": law_to_json(law)}
    status = 0
    if target is not None:
        doc["target"] = density_to_json(target)
        doc["interior_matches_target"] = law.interior == target.canonical()
        if coll is not None:
            doc["atom_identity"] = atom_identity_check(law, coll)
        status = 0 if doc["interior_matches_target"] else 1
    if cfg.grid:
        g = grid_law(path, T, cfg.n_grid, cfg.n_shift, n_bins=cfg.n_bins, workers=cfg.workers)
        doc["grid_law"] = law_to_json(g)
        doc["grid_distance"] = law_distance_json(law_distance(law, g))
    out.write("law.json", dumps(doc))
    out.write("law.csv", f"# schema_version {SCHEMA_VERSION}\n" + law_csv(law))
    print(dumps(doc), end="")
    return status


def cmd_approx(cfg: RunConfig, out: Outputs) -> int:
    if cfg.density:
        f = CadlagDensity.from_step(_density(cfg))
    else:
        if cfg.preset not in PRESETS:
            raise CliError("argument_error", f"unknown preset {cfg.preset!r}; choose from {sorted(PRESETS)}")
        f = PRESETS[cfg.preset]()
    try:
        rep = realize_and_compare(f, cfg.n_list, cfg.mode, workers=cfg.workers)
    except MeshCapError as exc:
        raise CliError("argument_error", f"mesh cap reached: {exc}") from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "H", "m", "d_n", "sup_dist", "L1_dist", "max_lefts_per_component", "max_rights_per_component", "status", "realized_equals_f_n", "d_in_interval"])
    ok = True
    for r in rep.rows:
        l1 = r.L1_dist
        w.writerow([
            r.n,
            fmt(r.H),
            "" if r.m is None else r.m,
            "" if r.d_n is None else fmt(r.d_n),
            "" if r.sup_dist is None else fmt(r.sup_dist),
            "" if l1 is None else (fmt(l1) if isinstance(l1, Fraction) else f17(l1)),
            r.max_lefts_per_component,
            r.max_rights_per_component,
            r.status,
            r.realized_equals_f_n,
            r.d_in_interval,
        ])
        if r.status != "inadmissible":
            ok &= bool(r.realized_equals_f_n)
    text = f"# schema_version {SCHEMA_VERSION}\n" + buf.getvalue()
    out.write("approx.csv", text)
    summary = {
        "density": rep.name,
        "d_interval": [fmt(rep.d_interval[0]), fmt(rep.d_interval[1])],
        "d_threshold": rep.d_threshold,
    }
    out.write("approx_summary.json", dumps(summary))
    print(text, end="")
    return 0 if ok else 1


def cmd_mix(cfg: RunConfig, out: Outputs) -> int:
    spec = MixingProcessSpec(cfg.w, cfg.h, cfg.innovations, cfg.seed)
    T = float(as_fraction(cfg.T)) if cfg.T else 200.0
    e = simulate_mixing_tau(spec, T, cfg.n_paths, n_bins=cfg.n_bins, workers=cfg.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["left", "right", "mass", "density"])
    for lo, hi, m, d in zip(e.edges[:-1], e.edges[1:], e.masses, e.density):
        w.writerow([f17(lo), f17(hi), f17(m), f17(d)])
    out.write("mix_bins.csv", f"# schema_version {SCHEMA_VERSION}\n" + buf.getvalue())
    cond = conditional_uniformity(e, 0.2 * T, 0.3 * T, 0.5 * T, 0.8 * T)
    summary = {
        "T": f17(T),
        "n_paths": cfg.n_paths,
        "ks_uniform": f17(ks_uniform(e)),
        "band_statistic": f17(uniformity_band(e, cfg.eps)),
        "eps": f17(cfg.eps),
        "conditional": {
            "estimate": None if cond.estimate is None else f17(cond.estimate),
            "ci": None if cond.estimate is None else [f17(cond.ci_low), f17(cond.ci_high)],
            "target": f17(cond.target),
            "covers_target": cond.covers_target,
        },
        "atom_proxy": f17(atom_proxy(e)),
        "generator": e.generator,
        "seed": cfg.seed,
    }
    out.write("mix_summary.json", dumps(summary))
    print(dumps(summary), end="")
    return 0


def _lemma_tuples(T: Fraction):
    for Delta in (T / 10, T / 5):
        for delta in (Fraction(0), Delta / 2, Delta):
            for eps in (Fraction(0), T / 20):
                yield Delta, delta, eps, eps


def cmd_verify(cfg: RunConfig, out: Outputs) -> int:
    f = _density(cfg)
    checks: dict[str, bool] = {}
    rep = validate_density(f)
    checks["admissible"] = rep.admissible
    if rep.is_uniform:
        law = exact_law(uniform_path(f.T), f.T)
        checks["law_matches_target"] = law.interior == f.canonical()
        checks["universal_bound"] = check_universal_bound(law.interior)
    elif rep.admissible:
        H = as_fraction(cfg.H) if cfg.H else choose_period(f)
        coll = peel_blocks(f, H)
        checks["round_trip"] = recompose(coll) == f.canonical()
        checks["feasible"] = feasibility(coll).ok
        comps = assign_components(coll)
        layout = layout_order(comps, coll.d)
        path = build_path(layout, coll.d, coll.T, coll.H, cfg.mode)
        checks["path_audit"] = audit_path(path, layout, coll.d, cfg.mode).ok
        law = exact_law(path, f.T)
        checks["law_matches_target"] = law.interior == f.canonical()
        checks["atom_identity"] = atom_identity_check(law, coll)
        checks["universal_bound"] = check_universal_bound(law.interior)
        mono = integ = True
        for Delta, delta, e1, e2 in _lemma_tuples(f.T):
            short = exact_law(path, f.T - Delta)
            mono &= check_window_monotonicity(law, short, f.T, Delta, delta)
            integ &= check_integral_inequality(law, short, f.T, Delta, delta, e1, e2)
        checks["window_monotonicity"] = mono
        checks["integral_inequality"] = integ
    doc = {"mode": cfg.mode, "checks": checks, "all_pass": all(checks.values())}
    if "law_matches_target" in checks and not checks["law_matches_target"]:
        doc["discrepancy"] = {
            "realized": law_to_json(law),
            "target": density_to_json(f),
            "note": "realized interior density differs from the target",
        }
    out.write("verify.json", dumps(doc))
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if doc["all_pass"] else 1


COMMANDS = {
    "validate": cmd_validate,
    "decompose": cmd_decompose,
    "build": cmd_build,
    "law": cmd_law,
    "approx": cmd_approx,
    "mix": cmd_mix,
    "verify": cmd_verify,
}


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="suploc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, density=True, mode=True):
        sp.add_argument("--out", default=os.environ.get("SUPLOC_OUT", "."), help="output directory (default: $SUPLOC_OUT or .)")
        if density:
            sp.add_argument("--density", help="density JSON file {T, pieces:[{until, value}]}")
            sp.add_argument("--example", default="e3", choices=sorted(EXAMPLES), help="built-in density used when --density is absent")
        if mode:
            sp.add_argument("--mode", default="repaired", choices=[m.value for m in FillMode], help="fill rule for one-sided components")

    sp = sub.add_parser("validate", help="check admissibility of a density")
    common(sp, mode=False)

    for name, text in (("decompose", "peel a density into blocks"), ("build", "build and audit the shift-process path")):
        sp = sub.add_parser(name, help=text)
        common(sp, mode=name == "build")
        sp.add_argument("--blocks", help="block collection JSON, bypassing peeling")
        sp.add_argument("--H", help="period factor (default: smallest valid)")

    sp = sub.add_parser("law", help="exact supremum-location law")
    common(sp)
    sp.add_argument("--blocks", help="block collection JSON")
    sp.add_argument("--path", help="path JSON for oracle-only runs")
    sp.add_argument("--H", help="period factor (default: smallest valid)")
    sp.add_argument("--T", help="window length (required with --path)")
    sp.add_argument("--grid", action="store_true", help="also run the brute-force grid oracle")
    sp.add_argument("--n-grid", dest="n_grid", type=int, default=10_000, help="mesh points per window")
    sp.add_argument("--n-shift", dest="n_shift", type=int, default=100_000, help="equispaced shifts")
    sp.add_argument("--bins", dest="n_bins", type=int, default=50, help="histogram bins for the grid oracle")
    sp.add_argument("--workers", type=int, default=1, help="threads for the grid oracle")

    sp = sub.add_parser("approx", help="quantise a density and measure convergence")
    common(sp)
    sp.add_argument("--preset", default="ramp", choices=sorted(PRESETS), help="preset density when --density is absent")
    sp.add_argument("--n", dest="n_list", type=_int_list, default=[2, 4, 8, 16], help="comma-separated n values")
    sp.add_argument("--workers", type=int, default=1, help="parallel processes over n")

    sp = sub.add_parser("mix", help="Monte Carlo for the moving-average process")
    common(sp, density=False, mode=False)
    sp.add_argument("--T", default="200", help="window length")
    sp.add_argument("--w", type=float, default=1.0, help="kernel width")
    sp.add_argument("--h", type=float, default=0.01, help="grid step")
    sp.add_argument("--paths", dest="n_paths", type=int, default=100_000, help="number of paths")
    sp.add_argument("--bins", dest="n_bins", type=int, default=50, help="histogram bins")
    sp.add_argument("--innovations", default="normal", choices=["normal", "uniform", "exponential", "rademacher"], help="innovation law")
    sp.add_argument("--seed", type=int, default=0, help="64-bit seed")
    sp.add_argument("--eps", type=float, default=0.1, help="band margin for the uniformity statistic")
    sp.add_argument("--workers", type=int, default=1, help="threads")

    sp = sub.add_parser("verify", help="run every invariant on a density")
    common(sp)
    sp.add_argument("--H", help="period factor (default: smallest valid)")
    return p


def run(cfg: RunConfig) -> int:
    if cfg.subcommand not in COMMANDS:
        raise CliError("argument_error", f"unknown subcommand {cfg.subcommand!r}")
    out = Outputs(cfg)
    status = COMMANDS[cfg.subcommand](cfg, out)
    out.manifest(status)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    known = set(RunConfig.__dataclass_fields__)
    cfg = RunConfig(**{k: v for k, v in vars(ns).items() if k in known})
    try:
        return run(cfg)
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except SchemaError as exc:
        code, msg = "schema_violation", str(exc)
    except (InfeasibleError, UniformCase) as exc:
        code, msg = "infeasible_collection", str(exc)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        code, msg = "argument_error", str(exc)
    print(json.dumps({"error": {"code": code, "message": msg}}), file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
