"""Run configurations: parse, validate, execute tasks in order, write the report."""
import os
from dataclasses import dataclass, field

import jsonschema
import numpy as np
import yaml

from . import corpus as _corpus
from ._validation import check_t_grid
from .analysis import (
    check_isosceles,
    compare_center_links,
    detect_arc_divergence,
    estimate_llne,
    estimate_lne_constant,
    tangent_cone_at_infinity,
    verify_equivalence_triple,
    verify_link_equivalence,
)
from .embed import DELTA, distortion_bound, embedding_distortion, normal_embed
from .exceptions import ConfigError, DisconnectedLink, Inapplicable, LipgeoError, NotApplicable
from .expressions import compile_system
from .metric import PancakeDecomposition, build_graph, clamp_radius, mcshane_extend
from .radius import RadiusFunction
from .report import dumps, load_schema, new_report, summary_text, to_jsonable, validate_report, write_curve_csv
from .setdef import Region, SetSpec, sample_set
from .transforms import (
    SampledMap,
    conjugate_by_inversion,
    invert,
    radius_normalize,
    random_bilipschitz_map,
    stereographic_lift,
    stereographic_project,
)

VERDICT_TASKS = {"llne", "link-equivalence", "arc-divergence", "isosceles", "center-compare",
                 "equivalence-triple", "embed", "transform-check"}
DEFAULT_T_POINTS = 9


@dataclass
class SetEntry:
    name: str
    spec: SetSpec
    region: Region = None
    density: float = None
    corpus: object = None


@dataclass
class RunConfig:
    sets: dict
    tasks: list
    output_dir: str = "lipgeo-out"
    seed: int = 0
    slack: float = DELTA
    source: dict = field(default_factory=dict)


# --------------------------------------------------------------------------- parsing

def _line_of(root, path):
    """1-based source line of the YAML node at ``path`` (best effort)."""
    node = root
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = [v for k, v in node.value if k.value == str(key)]
            if not nxt:
                break
            node = nxt[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    return None if node is None else node.start_mark.line + 1


def _where(root, path):
    field_name = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path).lstrip(".") or "<root>"
    line = _line_of(root, path) if root is not None else None
    return f"line {line}, field {field_name}" if line else f"field {field_name}"


def _region_from(d, dim):
    if d is None:
        return None
    center = d.get("center", [0.0] * dim)
    return Region.annulus(float(d.get("r_inner", 0.0)), float(d["r_outer"]), center=center)


def _resolve_grid(value, fallback=None):
    if value is None:
        value = fallback
    if value is None:
        return None
    if isinstance(value, dict):
        return np.geomspace(float(value["start"]), float(value["stop"]), int(value.get("num", DEFAULT_T_POINTS)))
    if isinstance(value, (tuple, list)) and len(value) == 2 and not isinstance(value, list):
        return np.geomspace(float(value[0]), float(value[1]), DEFAULT_T_POINTS)
    return np.asarray(value, dtype=np.float64)


def load_config(source, base_dir=None):
    """Parse YAML text, a path, or a dict into a validated :class:`RunConfig`."""
    root = None
    if isinstance(source, dict):
        data = source
    else:
        text = source
        if "\n" not in str(source) and os.path.exists(str(source)):
            base_dir = base_dir or os.path.dirname(os.path.abspath(source))
            with open(source) as fh:
                text = fh.read()
        try:
            root = yaml.compose(text)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"line {mark.line + 1}" if mark else "unknown line"
            raise ConfigError(f"{where}: cannot parse configuration: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    try:
        jsonschema.validate(data, load_schema("config"))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{_where(root, list(exc.absolute_path))}: {exc.message}") from None
    base_dir = base_dir or os.getcwd()

    sets = {}
    for i, entry in enumerate(data["sets"]):
        try:
            if "corpus" in entry:
                ce = _corpus.get(entry["corpus"])
                name = entry.get("name", ce.name)
                region = _region_from(entry.get("region"), ce.spec.ambient_dim) or ce.region
                se = SetEntry(name, ce.spec, region, entry.get("density", ce.density), ce)
            else:
                d = dict(entry)
                if "file" in d:
                    with open(os.path.join(base_dir, d.pop("file"))) as fh:
                        d = {**yaml.safe_load(fh), **d}
                region = d.pop("region", None)
                density = d.pop("density", None)
                spec = SetSpec.from_dict(d)
                se = SetEntry(spec.name, spec, _region_from(region, spec.ambient_dim), density)
        except (LipgeoError, KeyError, ValueError, OSError) as exc:
            raise ConfigError(f"{_where(root, ['sets', i])}: {exc}") from None
        if se.name in sets:
            raise ConfigError(f"{_where(root, ['sets', i])}: duplicate set name {se.name!r}")
        sets[se.name] = se

    for i, task in enumerate(data["tasks"]):
        if task["set"] not in sets:
            raise ConfigError(f"{_where(root, ['tasks', i, 'set'])}: task references undeclared set {task['set']!r}")
        if "t_grid" in task:
            try:
                check_t_grid(_resolve_grid(task["t_grid"]))
            except ValueError as exc:
                raise ConfigError(f"{_where(root, ['tasks', i, 't_grid'])}: {exc}") from None
    return RunConfig(sets, list(data["tasks"]), data.get("output_dir", "lipgeo-out"), int(data.get("seed", 0)),
                     float(data.get("slack", DELTA)), data)


# --------------------------------------------------------------------------- task helpers

def _density(task, se, overrides):
    d = overrides.get("density") or task.get("density") or se.density
    if d is None:
        raise ConfigError(f"no density for set {se.name!r}")
    return float(d)


def _grid(task, se, overrides):
    g = _resolve_grid(overrides.get("t_grid"), task.get("t_grid"))
    if g is None and se.corpus is not None and se.corpus.t_grid is not None:
        g = np.geomspace(*se.corpus.t_grid, DEFAULT_T_POINTS)
    if g is None:
        raise ConfigError(f"task on {se.name!r} needs a t_grid")
    return check_t_grid(g)


def _region(task, se):
    r = _region_from(task.get("region"), se.spec.ambient_dim)
    r = r or se.region
    if r is None:
        raise ConfigError(f"set {se.name!r} has no sampling region")
    return r


def _h_max(task, se):
    if "h_max" in task:
        return float(task["h_max"])
    return _corpus.H_MAX.get(se.corpus.name) if se.corpus is not None else None


def _arc(exprs):
    system = compile_system(tuple(str(e) for e in exprs), ("t",))
    return lambda t: system.value(np.array([[float(t)]]))[0]


def _matches(expected, verdict, value):
    if expected is None:
        return True
    if isinstance(expected, dict):
        if value is None:
            return False
        lo, hi = expected.get("min", -np.inf), expected.get("max", np.inf)
        return lo <= value <= hi
    if isinstance(expected, bool):
        return expected == (verdict in ("pass", "holds", "consistent", "agree"))
    return str(expected) == str(verdict)


def _curve(ctx, index, label, rows, header=("t", "ratio")):
    name = f"task{index:02d}_{label}.csv"
    write_curve_csv(os.path.join(ctx["out"], name), rows, header)
    ctx["curves"].append(name)


# --------------------------------------------------------------------------- tasks
# each returns (verdict, value, result dict)

def _task_sample(task, se, ctx):
    cloud = sample_set(se.spec, _region(task, se), _density(task, se, ctx["overrides"]), seed=ctx["seed"])
    stem = f"task{ctx['index']:02d}_{se.name}"
    cloud.save(os.path.join(ctx["out"], stem + ".cloud"))
    cloud.to_csv(os.path.join(ctx["out"], stem + ".csv"))
    ctx["files"] += [stem + ".cloud", stem + ".csv"]
    return None, len(cloud), {"points": len(cloud), "max_residual": float(cloud.residual.max(initial=0.0)),
                              "density": cloud.density_target}


def _task_lne(task, se, ctx):
    cloud = sample_set(se.spec, _region(task, se), _density(task, se, ctx["overrides"]), seed=ctx["seed"])
    graph = build_graph(cloud)
    est = estimate_lne_constant(graph, on_disconnected="max")
    res = est.to_dict()
    if est.witness_pair is not None:
        ctx["witnesses"].append([cloud.points[i].tolist() for i in est.witness_pair])
    res["nodes"] = len(cloud)
    res["components"] = graph.n_components
    return None, est.constant, res


def _radius(task, se):
    p = task.get("center")
    return RadiusFunction.norm() if p is None else RadiusFunction.about(p)


def _task_llne(task, se, ctx):
    grid = _grid(task, se, ctx["overrides"])
    rep = estimate_llne(se.spec, grid, _radius(task, se), h_rel=task.get("h_rel", 0.02), h_max=_h_max(task, se),
                        seed=ctx["seed"], side=task.get("side", "infinity"))
    _curve(ctx, ctx["index"], "llne", rep.curve_rows())
    ctx["witnesses"].extend(rep.witnesses)
    return rep.verdict, rep.fitted_exponent, rep.to_dict()


def _task_link_equivalence(task, se, ctx):
    grid = _grid(task, se, ctx["overrides"])
    try:
        rep = verify_link_equivalence(se.spec, grid, _radius(task, se), h_rel=task.get("h_rel", 0.02),
                                      h_max=_h_max(task, se), seed=ctx["seed"])
    except DisconnectedLink as exc:
        return "disconnected-link", None, {"disconnected_at": exc.report.disconnected_at, "message": str(exc)}
    _curve(ctx, ctx["index"], "K", rep.report.curve_rows(), ("t", "K"))
    ctx["witnesses"].extend(rep.report.witnesses)
    return rep.verdict, max(rep.report.ratio_per_t), rep.to_dict()


def _task_arc_divergence(task, se, ctx):
    grid = _grid(task, se, ctx["overrides"])
    if "arcs" in task:
        arcs = tuple(_arc(a) for a in task["arcs"])
    elif se.corpus is not None and se.corpus.arcs is not None:
        arcs = se.corpus.arcs
    else:
        raise ConfigError(f"arc-divergence on {se.name!r} needs arcs")
    if len(arcs) != 2:
        raise ConfigError("arc-divergence needs exactly two arcs")
    rep = detect_arc_divergence(arcs, grid, spec=se.spec, radius_fn=_radius(task, se),
                                side=task.get("side", "infinity"), h_rel=task.get("h_rel", 0.02), seed=ctx["seed"])
    _curve(ctx, ctx["index"], "arc", rep.curve_rows())
    return rep.verdict, rep.fitted_exponent, rep.to_dict()


def _task_tangent_cone(task, se, ctx):
    region = _region(task, se)
    band = task.get("band", [region.r_inner or region.r_outer / 2, region.r_outer])
    cloud = sample_set(se.spec, region, _density(task, se, ctx["overrides"]), seed=ctx["seed"])
    tc = tangent_cone_at_infinity(cloud, band)
    return None, len(tc), tc.to_dict()


def _task_isosceles(task, se, ctx):
    grid = _grid(task, se, ctx["overrides"])
    arcs = task.get("arcs")
    if not arcs or len(arcs) != 3:
        raise ConfigError("isosceles needs three arcs")
    pts = [np.stack([_arc(a)(t) for t in grid]) for a in arcs]
    try:
        res = check_isosceles(*pts, t_grid=grid)
    except Inapplicable as exc:
        return "inapplicable", None, {"message": str(exc)}
    return ("holds" if res.holds else "fails"), res.ratio, res.to_dict()


def _task_center_compare(task, se, ctx):
    grid = _grid(task, se, ctx["overrides"])
    p = task.get("p")
    if p is None:
        raise ConfigError("center-compare needs a center p")
    cmp = compare_center_links(se.spec, p, grid, h_rel=task.get("h_rel", 0.02), h_max=_h_max(task, se),
                               seed=ctx["seed"])
    rows = [(t, a, b) for t, a, b in zip(cmp.at_origin.t_grid, cmp.at_origin.ratio_per_t, cmp.at_p.ratio_per_t)
            if len(cmp.at_origin.t_grid) == len(cmp.at_p.t_grid)]
    _curve(ctx, ctx["index"], "centers", rows, ("t", "ratio_origin", "ratio_p"))
    return ("consistent" if cmp.consistent else "inconsistent"), cmp.max_factor, cmp.to_dict()


def _task_triple(task, se, ctx):
    grid = _grid(task, se, ctx["overrides"])
    try:
        tr = verify_equivalence_triple(se.spec, grid, h_rel=task.get("h_rel", 0.02), h_max=_h_max(task, se),
                                       seed=ctx["seed"])
    except NotApplicable as exc:
        return "not-applicable", None, {"message": str(exc)}
    for label, rep in (("infinity", tr.at_infinity), ("inverted", tr.inverted_at_0), ("pole", tr.modified_at_pole)):
        _curve(ctx, ctx["index"], f"triple_{label}", rep.curve_rows())
    verdict = tr.at_infinity.verdict if tr.agree else "disagree"
    return verdict, tr.exponent_spread, tr.to_dict()


def _task_embed(task, se, ctx):
    cloud = sample_set(se.spec, _region(task, se), _density(task, se, ctx["overrides"]), seed=ctx["seed"])
    graph = build_graph(cloud)
    labels = task.get("labels", cloud.piece_label)
    dec = PancakeDecomposition.from_labels(graph, labels)
    trace = normal_embed(cloud, graph, dec, delta=ctx["slack"], strict=False)
    directory = os.path.join(ctx["out"], f"task{ctx['index']:02d}_embed")
    trace.save(directory)
    ctx["files"].append(os.path.relpath(os.path.join(directory, "manifest.json"), ctx["out"]))
    distortion = embedding_distortion(trace)
    bound = distortion_bound(trace.k, ctx["slack"])
    ok = trace.passed and distortion <= bound
    res = trace.manifest()
    res.update({"distortion": distortion, "distortion_bound": bound})
    return ("pass" if ok else "fail"), trace.final_lne.constant, res


def _task_transform_check(task, se, ctx):
    cloud = sample_set(se.spec, _region(task, se), _density(task, se, ctx["overrides"]), seed=ctx["seed"])
    X = cloud.points[np.linalg.norm(cloud.points, axis=1) > 0]
    rng = np.random.default_rng(ctx["seed"])
    if X.shape[0] > 600:
        X = X[np.sort(rng.choice(X.shape[0], 600, replace=False))]
    steps = []
    for name in task.get("pipeline", ["invert", "stereo", "stereo-inverse", "normalize", "conjugate"]):
        r = np.linalg.norm(X, axis=1)
        if name == "invert":
            err = float(np.max(np.linalg.norm(invert(invert(X)) - X, axis=1) / r))
            recip = float(np.max(np.abs(np.linalg.norm(invert(X), axis=1) * r - 1)))
            steps.append({"step": name, "involution_error": err, "reciprocity_error": recip,
                          "passed": err <= 1e-12 and recip <= 1e-12})
        elif name == "stereo":
            dev = float(np.max(np.abs(np.linalg.norm(stereographic_lift(X), axis=1) - 1)))
            steps.append({"step": name, "sphere_deviation": dev, "passed": dev <= 1e-12})
        elif name == "stereo-inverse":
            back = stereographic_project(stereographic_lift(X))
            # the lift loses relative accuracy like 1 + |x|^2 near the pole
            err = float(np.max(np.linalg.norm(back - X, axis=1) / (r * (1 + r * r))))
            steps.append({"step": name, "roundtrip_error": err, "passed": err <= 1e-12})
        elif name == "normalize":
            C = float(np.sqrt(X.shape[1]))
            phi = np.max(np.abs(X), axis=1)
            ext = mcshane_extend(X, phi, 1.0, X, check=True)
            psi = radius_normalize(X, clamp_radius(ext, r, C), C)
            lip, _ = SampledMap(X, psi).lipschitz_constant()
            steps.append({"step": name, "C": C, "lipschitz": lip, "bound": 3 * C, "passed": lip <= 3 * C})
        elif name == "conjugate":
            worst = []
            for m in range(int(task.get("maps", 5))):
                F = random_bilipschitz_map(X.shape[1], np.random.default_rng([ctx["seed"], m]))
                fm = SampledMap(X, F(X))
                C, _ = fm.bilipschitz_constant(fix_origin=True)
                fm.claimed_C = C
                conj = conjugate_by_inversion(fm)
                lip, _ = conj.lipschitz_constant()
                worst.append({"C": C, "lipschitz": lip, "bound": conj.claimed_C})
            steps.append({"step": name, "maps": worst, "passed": all(w["lipschitz"] <= w["bound"] for w in worst)})
    ok = all(s["passed"] for s in steps)
    return ("pass" if ok else "fail"), None, {"steps": steps, "points": int(X.shape[0])}


TASKS = {
    "sample": _task_sample,
    "lne": _task_lne,
    "llne": _task_llne,
    "link-equivalence": _task_link_equivalence,
    "arc-divergence": _task_arc_divergence,
    "tangent-cone": _task_tangent_cone,
    "isosceles": _task_isosceles,
    "center-compare": _task_center_compare,
    "equivalence-triple": _task_triple,
    "embed": _task_embed,
    "transform-check": _task_transform_check,
}


# --------------------------------------------------------------------------- run

def run(config, output_dir=None, overrides=None, fail_fast=False, log=None):
    """Execute every task in order. Returns (exit status, report dict)."""
    overrides = dict(overrides or {})
    if overrides.get("seed") is not None:
        config.seed = int(overrides["seed"])
    if overrides.get("slack") is not None:
        config.slack = float(overrides["slack"])
    out = output_dir or config.output_dir
    os.makedirs(out, exist_ok=True)
    inputs = {"config": config.source, "overrides": {k: v for k, v in overrides.items() if v is not None},
              "slack": config.slack}
    doc = new_report(config.seed, inputs)
    stop = False
    for i, task in enumerate(config.tasks):
        se = config.sets[task["set"]]
        entry = {"index": i, "kind": task["kind"], "set": task["set"]}
        if stop:
            entry["status"] = "skipped"
            doc["tasks"].append(entry)
            continue
        ctx = {"index": i, "seed": config.seed, "slack": config.slack, "out": out, "overrides": overrides,
               "curves": [], "files": [], "witnesses": []}
        expected = task.get("expect")
        try:
            verdict, value, result = TASKS[task["kind"]](task, se, ctx)
            entry["verdict"] = verdict
            entry["result"] = to_jsonable(result)
            if expected is not None:
                entry["expected"] = to_jsonable(expected)
            entry["status"] = "ok" if _matches(expected, verdict, value) else "mismatch"
        except (LipgeoError, ValueError, ArithmeticError) as exc:
            entry["status"] = "error"
            entry["error"] = {"type": type(exc).__name__, "message": str(exc)}
            stop = fail_fast
        entry["curves"] = ctx["curves"]
        entry["files"] = ctx["files"]
        if ctx["witnesses"]:
            entry["witnesses"] = to_jsonable(ctx["witnesses"])
        if log is not None:
            log(f"task {i} {task['kind']} on {task['set']}: {entry['status']}"
                + (f" ({entry.get('verdict')})" if entry.get("verdict") else ""))
        doc["tasks"].append(entry)
        if entry["status"] == "mismatch" and fail_fast:
            stop = True

    counts = {s: sum(1 for t in doc["tasks"] if t["status"] == s) for s in ("ok", "mismatch", "error", "skipped")}
    status = 1 if counts["error"] else (2 if counts["mismatch"] else 0)
    doc["summary"] = {"tasks": len(doc["tasks"]), **counts, "exit_status": status}
    validate_report(doc)
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(dumps(doc))
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write(summary_text(doc))
    return status, doc
