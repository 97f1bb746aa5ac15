# Path: core/experiments.py
"""
Runs the [[experiments]] manifests of a space definition and writes
<name>.json (always) and <name>.csv (tables) into the output directory.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from api.logger import get_run_logger
from core.analysis import block_growth_table, cesaro_profile, ell1_constant, quotient_experiment
from core.ground import FiniteVector
from core.jtree import jtree_norm, jtree_norm_squared, parse_tree
from core.norm_engine import norm
from core.rational import fmt, parse_rational
from core.space_file import ExperimentSpec, SpaceDefinition, parse_vector

logger = get_run_logger(__name__)

OUTPUT_DIR = os.getenv("TSIRELSON_OUTPUT_DIR", "artifacts")


def _run(defn: SpaceDefinition, spec: ExperimentSpec) -> Dict[str, Any]:
    cfg, space = defn.build()
    width = parse_rational(spec.width)
    if spec.kind == "quotient":
        report = quotient_experiment(cfg, space, spec.z, spec.j0, target_width=width)
        return {"report": report.to_dict()}
    family = spec.family()
    if spec.kind == "blocks":
        rows = block_growth_table(cfg, space, family, spec.p, target_width=width)
        return {"rows": [r.to_dict() for r in rows]}
    if spec.kind == "cesaro":
        counts = spec.counts or list(range(1, len(family) + 1))
        profile = cesaro_profile(cfg, space, family, counts, target_width=width)
        return {"rows": [{"n": n, **e.to_dict()} for n, e in zip(counts, profile)]}
    constant = ell1_constant(cfg, space, family, spec.grid, target_width=width)
    return {
        "ell1_constant": constant.to_dict(),
        "note": "minimum over tested coefficients; an upper bound on the spreading constant",
    }


def _csv_rows(kind: str, payload: Dict[str, Any]) -> Optional[List[Dict[str, Any]]]:
    if kind == "blocks":
        out = []
        for r in payload["rows"]:
            row = {"j": r["j"], "n": r["n"], "lo": r["norm"]["lo"], "hi": r["norm"]["hi"],
                   "reference": r["reference"], "witness_value": r["witness_value"]}
            for p, col in r["powers"].items():
                row[f"n^(1/{p}) lo"] = col["lo"]
                row[f"n^(1/{p}) hi"] = col["hi"]
            out.append(row)
        return out
    if kind == "cesaro":
        return [{"n": r["n"], "lo": r["lo"], "hi": r["hi"], "approx": r["approx"]} for r in payload["rows"]]
    return None


def run_experiment(defn: SpaceDefinition, name: str, output_dir: Union[str, Path, None] = None) -> Dict[str, Any]:
    """Run one named manifest; returns the JSON report that was written."""
    spec = defn.experiment(name)
    out_dir = Path(output_dir or OUTPUT_DIR)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"[EXPERIMENT] running {name!r} ({spec.kind})")
    payload = _run(defn, spec)
    report = {
        "experiment": name,
        "kind": spec.kind,
        "seed": spec.seed,
        "space_sha256": defn.digest(),
        "space": defn.model_dump(mode="json", exclude={"experiments"}),
        **payload,
    }
    json_path = out_dir / f"{name}.json"
    json_path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    files = [str(json_path)]
    rows = _csv_rows(spec.kind, payload)
    if rows:
        csv_path = out_dir / f"{name}.csv"
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        files.append(str(csv_path))
    logger.info(f"[EXPERIMENT] {name!r} wrote {', '.join(files)}")
    report["files"] = files
    return report


def run_all(defn: SpaceDefinition, output_dir: Union[str, Path, None] = None) -> List[Dict[str, Any]]:
    if not defn.experiments:
        logger.info("[EXPERIMENT] no experiments declared")
    return [run_experiment(defn, e.name, output_dir) for e in defn.experiments]


def norm_report(defn: SpaceDefinition, vector, width=None, mode: str = "truncated") -> Dict[str, Any]:
    """The JSON document of `cli.py norm` and POST /api/norm."""
    cfg, space = defn.build()
    x = vector if isinstance(vector, FiniteVector) else parse_vector(vector, "vector")
    result = norm(cfg, space, x, target_width=None if width is None else parse_rational(width), mode=mode)
    return {"space_sha256": defn.digest(), "vector": x.to_dict(), **result.to_dict()}


def jtree_report(tree) -> Dict[str, Any]:
    tv = tree if not isinstance(tree, (str, dict, list)) else parse_tree(tree)
    return {"nodes": len(tv), "squared": fmt(jtree_norm_squared(tv)), "norm": jtree_norm(tv).to_dict()}
