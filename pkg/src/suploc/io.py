"""JSON and CSV formats. Rationals are always written as ``"p/q"`` strings."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from typing import Any

from .assembly import PathAudit, PiecewiseLinearPath
from .blocks import BlockCollection, FeasibilityReport, classify
from .density import DensityReport, StepDensity
from .oracle import LawDistance, SupLocationLaw
from .rational import as_fraction, fmt

SCHEMA_VERSION = "1.0"


class SchemaError(ValueError):
    code = "schema_violation"


def _q(x: Any, what: str) -> Fraction:
    if not isinstance(x, (str, int)) or isinstance(x, bool):
        raise SchemaError(f"{what}: expected a rational string, got {x!r}")
    try:
        return as_fraction(x)
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(f"{what}: {exc}") from None


def _get(obj: dict, key: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing field {key!r}")
    return obj[key]


def jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return fmt(x)
    if isinstance(x, (frozenset, set)):
        return sorted((jsonable(v) for v in x), key=lambda s: Fraction(s) if isinstance(s, str) else s)
    if is_dataclass(x):
        return {k: jsonable(v) for k, v in asdict(x).items()}
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def dumps(obj: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **obj}, indent=2, sort_keys=True) + "\n"


def density_to_json(f: StepDensity) -> dict:
    return {"T": fmt(f.T), "pieces": [{"until": fmt(e), "value": fmt(v)} for e, v in f.to_pieces()]}


def density_from_json(obj: dict) -> StepDensity:
    T = _q(_get(obj, "T"), "T")
    pieces = _get(obj, "pieces")
    if not isinstance(pieces, list) or not pieces:
        raise SchemaError("pieces must be a nonempty list")
    pairs = [(_q(_get(p, "until"), "until"), _q(_get(p, "value"), "value")) for p in pieces]
    if pairs[-1][0] != T:
        raise SchemaError("pieces must end at T")
    try:
        return StepDensity.from_pieces(T, pairs)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def collection_to_json(c: BlockCollection) -> dict:
    return {
        "T": fmt(c.T),
        "H": fmt(c.H),
        "blocks": [{"kind": b.kind.value, "u": fmt(b.u), "v": fmt(b.v)} for b in c.blocks],
        "m": c.m,
        "d": fmt(c.d),
    }


def collection_from_json(obj: dict) -> BlockCollection:
    T = _q(_get(obj, "T"), "T")
    H = _q(_get(obj, "H"), "H")
    blocks = []
    for b in _get(obj, "blocks"):
        u, v = _q(_get(b, "u"), "u"), _q(_get(b, "v"), "v")
        blk = classify(u, v, T)
        if "kind" in b and b["kind"] != blk.kind.value:
            raise SchemaError(f"block ({b['u']}, {b['v']}) is a {blk.kind.value} block, not {b['kind']}")
        blocks.append(blk)
    return BlockCollection(T, H, tuple(blocks))


def path_to_json(p: PiecewiseLinearPath) -> dict:
    return {"period": fmt(p.period), "knots": [[fmt(a), fmt(v)] for a, v in p.knots], "mode": p.mode}


def path_from_json(obj: dict) -> PiecewiseLinearPath:
    P = _q(_get(obj, "period"), "period")
    knots = []
    for k in _get(obj, "knots"):
        if not isinstance(k, list) or len(k) != 2:
            raise SchemaError("knots must be [position, value] pairs")
        knots.append((_q(k[0], "position"), _q(k[1], "value")))
    try:
        return PiecewiseLinearPath(P, tuple(knots), obj.get("mode", "repaired"))
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def law_to_json(law: SupLocationLaw) -> dict:
    return {
        "T": fmt(law.T),
        "atom0": fmt(law.atom0),
        "atomT": fmt(law.atomT),
        "interior": density_to_json(law.interior)["pieces"],
        "provenance": law.provenance,
        "degenerate_ties": law.degenerate_ties,
    }


def law_from_json(obj: dict) -> SupLocationLaw:
    T = _q(_get(obj, "T"), "T")
    interior = density_from_json({"T": obj["T"], "pieces": _get(obj, "interior")})
    return SupLocationLaw(
        T,
        _q(_get(obj, "atom0"), "atom0"),
        _q(_get(obj, "atomT"), "atomT"),
        interior,
        obj.get("provenance", "envelope"),
    )


def report_to_json(r: DensityReport) -> dict:
    out = jsonable(r)
    out["admissible"] = r.admissible
    return out


def feasibility_to_json(r: FeasibilityReport) -> dict:
    out = jsonable(r)
    out["ok"] = r.ok
    return out


def audit_to_json(a: PathAudit) -> dict:
    out = jsonable(a)
    out["ok"] = a.ok
    return out


def law_distance_json(d: LawDistance) -> dict:
    return jsonable(d)


def law_csv(law: SupLocationLaw) -> str:
    """Piecewise density as plot-ready rows; atoms are the first two lines."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["start", "end", "density"])
    w.writerow(["0", "0", f"atom:{fmt(law.atom0)}"])
    w.writerow([fmt(law.T), fmt(law.T), f"atom:{fmt(law.atomT)}"])
    for s, e, v in law.interior.pieces():
        w.writerow([fmt(s), fmt(e), fmt(v)])
    return buf.getvalue()


def f17(x: float) -> str:
    return f"{x:.17g}"
