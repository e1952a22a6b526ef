"""JSON reports (schema "lipgeo-report/1") and CSV curves."""
import csv
import datetime as _dt
import json
from dataclasses import asdict, is_dataclass
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from .metric import UNREACHABLE

SCHEMA_VERSION = "lipgeo-report/1"
# excluded when comparing reports for determinism
VOLATILE_FIELDS = ("generated_at",)


@lru_cache(maxsize=None)
def load_schema(name="report"):
    text = resources.files("lipgeo").joinpath(f"schemas/{name}.schema.json").read_text()
    return json.loads(text)


def to_jsonable(obj):
    """Convert results to plain JSON types; +inf becomes "unreachable", NaN becomes null."""
    if obj is UNREACHABLE:
        return "unreachable"
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ma.MaskedArray):
        return [("unreachable" if m else to_jsonable(v)) for v, m in zip(obj.data.tolist(), np.ma.getmaskarray(obj))]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return None
        if np.isinf(x):
            return "unreachable" if x > 0 else "-inf"
        return x
    return obj


def validate_report(doc):
    jsonschema.validate(doc, load_schema("report"))
    return doc


def new_report(seed, inputs):
    return {
        "schema": SCHEMA_VERSION,
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "seed": int(seed),
        "inputs": to_jsonable(inputs),
        "tasks": [],
        "summary": {},
    }


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def comparable(doc):
    """Copy of a report without the volatile fields."""
    return {k: v for k, v in doc.items() if k not in VOLATILE_FIELDS}


def write_curve_csv(path, rows, header=("t", "ratio")):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def summary_text(doc):
    lines = [f"lipgeo report ({doc['schema']}), seed {doc['seed']}"]
    for task in doc["tasks"]:
        verdict = task.get("verdict")
        exp = task.get("expected")
        tail = f" verdict={verdict}" if verdict is not None else ""
        if exp is not None:
            tail += f" expected={exp}"
        if task["status"] == "error":
            tail += f" [{task['error']['type']}: {task['error']['message']}]"
        lines.append(f"  #{task['index']} {task['kind']:<19} {task['set']:<24} {task['status']:<8}{tail}")
    s = doc["summary"]
    lines.append(f"{s['ok']} ok, {s['mismatch']} mismatch, {s['error']} error; exit {s['exit_status']}")
    return "\n".join(lines) + "\n"
