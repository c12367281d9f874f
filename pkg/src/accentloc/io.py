"""JSON file formats.

Densities: ``{"type": "delta" | "grid" | "gmm", ...}``; region
distributions ``{"type": "discrete", "entries": {...}, "outside_mass": p}``;
points ``{"type": "point", "x": .., "y": ..}``. Tessellations are a GeoJSON
subset: a FeatureCollection of Polygon features with a ``region_id``
property. Trials are JSON lines. Output is deterministic: keys sorted,
floats in shortest repr, infinities written as the string ``"inf"``.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .density import DeltaSet, DiscreteDistribution, GaussianMixture, Grid
from .errors import AccentLocError, GeometryError, SchemaError
from .metrics import Trial
from .origin import Episode, LocationHistory
from .sim import ParticipationSeries, Speaker
from .spatial import Location, Polygon, Tessellation, project_lonlat


# --------------------------------------------------------------------------
# plumbing


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj, indent: int | None = 2) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=indent, allow_nan=False, ensure_ascii=False)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec, indent=None) + "\n")


def loads(text: str, source: str = "<input>", first_line: int = 1):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line = exc.lineno + first_line - 1
        raise SchemaError(f"{source}: JSON parse error at line {line}, column {exc.colno}: {exc.msg}") from None


def read_json(path):
    return loads(Path(path).read_text(encoding="utf-8"), str(path))


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _num(v, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{what}: expected a number, got {v!r}")
    return float(v)


def _xy(v, what: str) -> tuple[float, float]:
    if isinstance(v, dict):
        return _num(v.get("x"), f"{what}.x"), _num(v.get("y"), f"{what}.y")
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise SchemaError(f"{what}: expected [x, y], got {v!r}")
    return _num(v[0], what), _num(v[1], what)


# --------------------------------------------------------------------------
# densities and trial members


def density_to_json(d) -> dict:
    if isinstance(d, DeltaSet):
        return {
            "type": "delta",
            "points": [{"x": p[0], "y": p[1], "weight": w} for p, w in zip(d.points.tolist(), d.weights.tolist())],
        }
    if isinstance(d, Grid):
        return {"type": "grid", "bbox": list(d.bbox), "nx": d.nx, "ny": d.ny, "values": d.values.tolist()}
    if isinstance(d, GaussianMixture):
        return {
            "type": "gmm",
            "components": [
                {"mean": m, "cov": c, "weight": w}
                for m, c, w in zip(d.means.tolist(), d.covs.tolist(), d.weights.tolist())
            ],
        }
    raise SchemaError(f"not a density: {type(d).__name__}")


def density_from_json(obj, where: str = "density"):
    if not isinstance(obj, dict) or "type" not in obj:
        raise SchemaError(f"{where}: expected an object with a 'type' field")
    kind = obj["type"]
    try:
        if kind == "delta":
            pts, wts = [], []
            for k, p in enumerate(obj["points"]):
                if isinstance(p, dict):
                    pts.append(_xy(p, f"{where}.points[{k}]"))
                    wts.append(_num(p.get("weight", 1.0), f"{where}.points[{k}].weight"))
                elif isinstance(p, (list, tuple)) and len(p) == 3:
                    pts.append(_xy(p[:2], f"{where}.points[{k}]"))
                    wts.append(_num(p[2], f"{where}.points[{k}]"))
                else:
                    raise SchemaError(f"{where}.points[{k}]: expected {{x, y, weight}} or [x, y, w]")
            return DeltaSet(np.array(pts, dtype=float).reshape(-1, 2), np.array(wts))
        if kind == "grid":
            nx, ny = int(obj["nx"]), int(obj["ny"])
            vals = np.asarray(obj["values"], dtype=float)
            if vals.size != nx * ny:
                raise SchemaError(f"{where}: {vals.size} values for a {nx}x{ny} grid")
            return Grid(tuple(obj["bbox"]), vals.reshape(ny, nx))
        if kind == "gmm":
            comps = obj["components"]
            return GaussianMixture(
                np.array([c["mean"] for c in comps], dtype=float).reshape(-1, 2),
                np.array([c["cov"] for c in comps], dtype=float),
                np.array([c["weight"] for c in comps], dtype=float),
            )
    except SchemaError as exc:
        if str(exc).startswith(where):
            raise
        raise SchemaError(f"{where}: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: malformed {kind} density ({type(exc).__name__}: {exc})") from None
    raise SchemaError(f"{where}: unknown density type {kind!r}")


def discrete_to_json(d: DiscreteDistribution) -> dict:
    return {"type": "discrete", "entries": dict(d.entries), "outside_mass": d.outside_mass}


def discrete_from_json(obj, where: str = "distribution") -> DiscreteDistribution:
    try:
        entries = obj["entries"]
        if not isinstance(entries, dict):
            raise SchemaError("'entries' must be an object")
        return DiscreteDistribution(
            {k: _num(v, f"entries[{k!r}]") for k, v in entries.items()},
            _num(obj.get("outside_mass", 0.0), "outside_mass"),
        )
    except SchemaError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"{where}: malformed discrete distribution ({exc})") from None


def member_to_json(m) -> dict:
    if isinstance(m, DiscreteDistribution):
        return discrete_to_json(m)
    if isinstance(m, Location):
        return {"type": "point", "x": m.x, "y": m.y}
    return density_to_json(m)


def member_from_json(obj, where: str):
    if isinstance(obj, (list, tuple)):
        return Location(*_xy(obj, where))
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    kind = obj.get("type")
    if kind == "discrete" or (kind is None and "entries" in obj):
        return discrete_from_json(obj, where)
    if kind == "point" or (kind is None and "x" in obj):
        return Location(*_xy(obj, where))
    return density_from_json(obj, where)


def trial_to_json(t: Trial) -> dict:
    return {"trial_id": t.trial_id, "reference": member_to_json(t.reference), "hypothesis": member_to_json(t.hypothesis)}


def trial_from_json(obj, where: str = "trial") -> Trial:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    for key in ("trial_id", "reference", "hypothesis"):
        if key not in obj:
            raise SchemaError(f"{where}: missing {key!r}")
    tid = str(obj["trial_id"])
    return Trial(
        tid,
        member_from_json(obj["reference"], f"{where} ({tid}).reference"),
        member_from_json(obj["hypothesis"], f"{where} ({tid}).hypothesis"),
    )


def read_trials(path) -> list[Trial]:
    trials = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            trials.append(trial_from_json(loads(line.rstrip("\r\n"), str(path), lineno), where))
    return trials


def read_density(path):
    return density_from_json(read_json(path), str(path))


def read_member(path):
    return member_from_json(read_json(path), str(path))


# --------------------------------------------------------------------------
# tessellations


def _crs_name(crs) -> str:
    if crs is None:
        return "planar-km"
    if isinstance(crs, dict):
        crs = crs.get("properties", {}).get("name")
    if crs not in ("planar-km", "wgs84"):
        raise SchemaError(f"unsupported crs {crs!r} (use 'planar-km' or 'wgs84')")
    return crs


def tessellation_from_geojson(obj, where: str = "tessellation", ref_lat: float | None = None) -> Tessellation:
    """Build a tessellation from a FeatureCollection of Polygon features.

    ``wgs84`` coordinates are projected about ``ref_lat``, else the file's
    ``reference_latitude`` key, else 52 degrees.
    """
    if not isinstance(obj, dict) or obj.get("type") != "FeatureCollection":
        raise SchemaError(f"{where}: expected a GeoJSON FeatureCollection")
    crs = _crs_name(obj.get("crs"))
    if ref_lat is None:
        ref_lat = float(obj.get("reference_latitude", 52.0))
    regions = []
    for k, feat in enumerate(obj.get("features", [])):
        rid = (feat.get("properties") or {}).get("region_id") if isinstance(feat, dict) else None
        label = f"{where}: feature {k}" + (f" (region_id {rid!r})" if rid is not None else "")
        if rid is None:
            raise SchemaError(f"{label}: missing properties.region_id")
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise SchemaError(f"{label}: geometry must be a Polygon, got {geom.get('type')!r}")
        try:
            rings = [np.asarray(r, dtype=float) for r in geom["coordinates"]]
            if not rings or any(r.ndim != 2 or r.shape[1] != 2 for r in rings):
                raise SchemaError("coordinates must be rings of [x, y] pairs")
            if crs == "wgs84":
                rings = [np.column_stack(project_lonlat(r[:, 0], r[:, 1], ref_lat)) for r in rings]
            regions.append((str(rid), Polygon(rings[0], tuple(rings[1:]))))
        except (AccentLocError, KeyError, TypeError, ValueError) as exc:
            raise GeometryError(f"{label}: {exc}") from None
    if not regions:
        raise SchemaError(f"{where}: no features")
    try:
        return Tessellation(tuple(regions))
    except GeometryError as exc:
        raise GeometryError(f"{where}: {exc}") from None


def tessellation_to_geojson(tess: Tessellation) -> dict:
    feats = []
    for rid, poly in tess.regions:
        rings = [poly.exterior, *poly.holes]
        coords = [np.vstack([r, r[:1]]).tolist() for r in rings]
        feats.append({"type": "Feature", "properties": {"region_id": rid}, "geometry": {"type": "Polygon", "coordinates": coords}})
    return {"type": "FeatureCollection", "crs": "planar-km", "features": feats}


def read_tessellation(path, ref_lat: float | None = None) -> Tessellation:
    return tessellation_from_geojson(read_json(path), str(path), ref_lat)


# --------------------------------------------------------------------------
# histories, speakers, series


def history_to_json(h: LocationHistory) -> list:
    return [{"start_age": e.start_age, "end_age": e.end_age, "place": density_to_json(e.place)} for e in h.episodes]


def history_from_json(obj, where: str = "history") -> LocationHistory:
    if not isinstance(obj, list):
        raise SchemaError(f"{where}: expected a list of episodes")
    eps = []
    for k, e in enumerate(obj):
        w = f"{where}[{k}]"
        if not isinstance(e, dict):
            raise SchemaError(f"{w}: expected an object")
        try:
            eps.append(Episode(_num(e["start_age"], w), _num(e["end_age"], w), density_from_json(e["place"], f"{w}.place")))
        except KeyError as exc:
            raise SchemaError(f"{w}: missing {exc}") from None
    try:
        return LocationHistory(tuple(eps))
    except SchemaError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def speaker_to_json(s: Speaker) -> dict:
    return {
        "speaker_id": s.speaker_id,
        "age": s.age,
        "history": history_to_json(s.history),
        "features": s.features.tolist(),
        "true_origin": density_to_json(s.true_origin),
    }


def series_from_json(obj, where: str = "series") -> ParticipationSeries:
    if isinstance(obj, dict):
        obj = obj.get("daily_counts")
    if not isinstance(obj, list):
        raise SchemaError(f"{where}: expected 'daily_counts' as a list")
    pairs = []
    for k, rec in enumerate(obj):
        if isinstance(rec, dict):
            pairs.append((_num(rec.get("day"), f"{where}[{k}].day"), _num(rec.get("count"), f"{where}[{k}].count")))
        elif isinstance(rec, (list, tuple)) and len(rec) == 2:
            pairs.append((_num(rec[0], f"{where}[{k}]"), _num(rec[1], f"{where}[{k}]")))
        else:
            raise SchemaError(f"{where}[{k}]: expected [day, count]")
    try:
        return ParticipationSeries.from_pairs(pairs)
    except SchemaError as exc:
        raise SchemaError(f"{where}: {exc}") from None


def series_to_json(s: ParticipationSeries) -> dict:
    return {"daily_counts": [[d, c] for d, c in zip(s.days.tolist(), s.counts.tolist())]}
