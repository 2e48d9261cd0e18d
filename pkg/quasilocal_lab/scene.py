"""Declarative scenes: one data set, named surfaces and regions, and a list of tasks.

A scene is a JSON file:

    {
      "name": "schwarzschild_r4",
      "data": {"catalog": "schwarzschild_slice", "params": {"m": 1.0}},
      "grid": [32, 64],
      "surfaces": [{"id": "S1", "kind": "sphere", "center": [0, 0, 0], "radius": 4.0}],
      "regions": [{"id": "R1", "kind": "shell", "r_inner": 3.0, "r_outer": 5.0}],
      "tasks": [{"kind": "masses", "surface": "S1", "options": {"functionals": ["BY", "KLY"]}}],
      "output": {"dir": "_results", "format": "csv"},
      "tolerances": {"embed_tol": 1e-7},
      "seed": 0
    }

`data` may instead name a sampled grid file ({"grid_file": "data.txt"}); sampled surfaces
use {"kind": "sampled", "path": "surface.txt"}. Relative paths resolve against the scene file.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from quasilocal_lab import constants
from quasilocal_lab.errors import HypothesisError, LabError, SceneError, SceneParseError
from quasilocal_lab.grid_io import export_embedding, load_bartnik_data, load_data_grid, load_surface_grid, save_bartnik_data
from quasilocal_lab.initial_data import (
    InitialDataSet,
    RegionSpec,
    adm_energy_momentum,
    build_catalog_data,
    constraint_fields,
    dec_check,
    decay_check,
)
from quasilocal_lab.mass_functionals import (
    GaugeStrategy,
    VectorFieldData,
    brown_york,
    kijowski_liu_yau,
    w_mass,
    wang_yau_energy,
    x_modified_energy,
)
from quasilocal_lab.quasispherical_flow import (
    export_trajectory_csv,
    extension_energy,
    q_derivative_check,
    seed_from_boundary,
    shi_tam_boundary_u,
    solve_rotsym_extension,
)
from quasilocal_lab.shields_fillins import (
    bartnik_data_from_surface,
    obstruction_report,
    shield_check,
    shield_geometry_from_data,
)
from quasilocal_lab.surface_geometry import (
    ExtrinsicData,
    SurfaceMesh,
    coordinate_sphere,
    extrinsic_data,
    null_expansions,
    sampled_surface,
)
from quasilocal_lab.types import RegionEntry, ReportMeta, SurfaceEntry, TaskEntry
from quasilocal_lab.utils.fs_utils import file_sha256, resolve_out_dir
from quasilocal_lab.weyl_embedding import EmbeddingOptions, EmbeddingResult, embed_convex, minkowski_defect, reference_mean_curvature

logger = logging.getLogger(__name__)

TOLERANCE_KEYS = ("embed_tol", "embed_max_iter", "gauge_tol", "eps_mots", "flow_deviation")
SURFACE_KINDS = ("sphere", "sampled")
MASS_FUNCTIONALS = ("BY", "KLY", "W", "WY", "X")
DEFAULT_FUNCTIONALS = ("BY", "KLY", "W")
DEFAULT_ADM_RADII = (20.0, 40.0, 80.0)
DEFAULT_FLOW_RANGE = 1000.0

# task kind -> (needs surface, needs region)
TASK_REFERENCES = {
    "constraints": (False, False),
    "masses": (True, False),
    "embed": (True, False),
    "flow": (True, False),
    "shield": (True, True),
    "fillin": (False, False),
    "adm": (False, False),
    "expansions": (True, False),
}


@dataclass
class Scene:
    name: str
    path: Path
    sha256: str
    data: Dict[str, object]
    grid: Tuple[int, int]
    surfaces: Dict[str, SurfaceEntry]
    regions: Dict[str, RegionEntry]
    tasks: List[TaskEntry]
    output: Dict[str, str] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def resolve(self, relative: str) -> Path:
        p = Path(relative)
        return p if p.is_absolute() else self.path.parent / p


# --- Parsing ---


def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise SceneError(f"{where}: missing required key '{key}'")
    return entry[key]


def _positive(value, where: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise SceneError(f"{where}: expected a number, got {value!r}")
    if not value > 0.0:
        raise SceneError(f"{where}: must be > 0, got {value}")
    return value


def _grid_pair(value, where: str) -> Tuple[int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SceneError(f"{where}: grid must be [n_theta, n_phi], got {value!r}")
    n_theta, n_phi = int(value[0]), int(value[1])
    if n_theta < 4 or n_phi < 8 or n_phi % 2:
        raise SceneError(f"{where}: grid needs n_theta >= 4 and even n_phi >= 8, got {value!r}")
    return n_theta, n_phi


def _check_data(data: dict, scene_dir: Path):
    if not isinstance(data, dict):
        raise SceneError("data: expected an object")
    if ("catalog" in data) == ("grid_file" in data):
        raise SceneError("data: give exactly one of 'catalog' or 'grid_file'")
    if "catalog" in data and data["catalog"] not in constants.CATALOG_NAMES:
        raise SceneError(f"data: unknown catalog '{data['catalog']}'. Available: {', '.join(constants.CATALOG_NAMES)}")
    if "grid_file" in data:
        _check_file(scene_dir, data["grid_file"], "data.grid_file")


def _check_file(scene_dir: Path, relative, where: str):
    p = Path(relative)
    p = p if p.is_absolute() else scene_dir / p
    if not p.exists():
        raise SceneError(f"{where}: file not found: {p}")


def _parse_surfaces(entries, scene_dir: Path) -> Dict[str, SurfaceEntry]:
    surfaces: Dict[str, SurfaceEntry] = {}
    for i, entry in enumerate(entries or []):
        where = f"surfaces[{i}]"
        sid = str(_require(entry, "id", where))
        if sid in surfaces:
            raise SceneError(f"{where}: duplicate surface id '{sid}'")
        kind = entry.get("kind", "sphere")
        if kind not in SURFACE_KINDS:
            raise SceneError(f"{where}: unknown surface kind '{kind}'")
        if kind == "sphere":
            _positive(_require(entry, "radius", where), f"{where}.radius")
        else:
            _check_file(scene_dir, _require(entry, "path", where), f"{where}.path")
        if "grid" in entry:
            _grid_pair(entry["grid"], f"{where}.grid")
        surfaces[sid] = SurfaceEntry(**{**entry, "kind": kind})
    return surfaces


def _parse_regions(entries) -> Dict[str, RegionEntry]:
    regions: Dict[str, RegionEntry] = {}
    for i, entry in enumerate(entries or []):
        where = f"regions[{i}]"
        rid = str(_require(entry, "id", where))
        if rid in regions:
            raise SceneError(f"{where}: duplicate region id '{rid}'")
        try:
            _region_spec(entry)
        except (TypeError, ValueError) as e:
            raise SceneError(f"{where}: {e}") from e
        regions[rid] = RegionEntry(**entry)
    return regions


def _parse_tasks(entries, surfaces, regions, scene_dir: Path) -> List[TaskEntry]:
    tasks: List[TaskEntry] = []
    for i, entry in enumerate(entries or []):
        where = f"tasks[{i}]"
        kind = _require(entry, "kind", where)
        if kind not in constants.TASK_KINDS:
            raise SceneError(f"{where}: unknown task kind '{kind}'. Available: {', '.join(constants.TASK_KINDS)}")
        options = entry.get("options", {}) or {}
        needs_surface, needs_region = TASK_REFERENCES[kind]
        if needs_surface and "surface" not in entry:
            raise SceneError(f"{where}: task '{kind}' needs a 'surface'")
        if needs_region and "region" not in entry:
            raise SceneError(f"{where}: task '{kind}' needs a 'region'")
        if kind == "constraints" and "region" not in entry and "surface" not in entry:
            raise SceneError(f"{where}: task 'constraints' needs a 'region' or a sphere 'surface'")
        if "surface" in entry and entry["surface"] not in surfaces:
            raise SceneError(f"{where}: undeclared surface '{entry['surface']}'")
        if "region" in entry and entry["region"] not in regions:
            raise SceneError(f"{where}: undeclared region '{entry['region']}'")
        if kind == "shield":
            annulus = _require(options, "annulus", f"{where}.options")
            if annulus not in regions:
                raise SceneError(f"{where}: undeclared region '{annulus}'")
            for key in ("sigma", "d", "l"):
                _require(options, key, f"{where}.options")
        if kind == "fillin":
            for key in ("h0", "C0"):
                _require(options, key, f"{where}.options")
            if "surface" not in entry and "bartnik_file" not in options:
                raise SceneError(f"{where}: task 'fillin' needs a 'surface' or options.bartnik_file")
            if "bartnik_file" in options:
                _check_file(scene_dir, options["bartnik_file"], f"{where}.options.bartnik_file")
        if kind == "masses":
            unknown = set(options.get("functionals", DEFAULT_FUNCTIONALS)) - set(MASS_FUNCTIONALS)
            if unknown:
                raise SceneError(f"{where}: unknown functionals {sorted(unknown)}")
        if kind == "adm" and len(options.get("radii", DEFAULT_ADM_RADII)) < 3:
            raise SceneError(f"{where}: ADM extrapolation needs at least 3 radii")
        tasks.append(TaskEntry(**{**entry, "options": options}))
    return tasks


def load_scene(path: Path) -> Scene:
    path = Path(path)
    if not path.exists():
        raise SceneError(f"scene file not found: {path}")
    text = path.read_text(encoding="utf8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneParseError(f"{path}: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(raw, dict):
        raise SceneParseError(f"{path}: top level must be an object", line=1, column=1)

    scene_dir = path.parent
    _check_data(_require(raw, "data", "scene"), scene_dir)
    tolerances = dict(raw.get("tolerances", {}) or {})
    unknown = set(tolerances) - set(TOLERANCE_KEYS)
    if unknown:
        raise SceneError(f"tolerances: unknown keys {sorted(unknown)}. Allowed: {', '.join(TOLERANCE_KEYS)}")
    output = dict(raw.get("output", {}) or {})
    if output.get("format", "csv") not in constants.REPORT_FORMATS:
        raise SceneError(f"output.format must be one of {constants.REPORT_FORMATS}, got '{output['format']}'")

    surfaces = _parse_surfaces(raw.get("surfaces"), scene_dir)
    regions = _parse_regions(raw.get("regions"))
    tasks = _parse_tasks(_require(raw, "tasks", "scene"), surfaces, regions, scene_dir)
    return Scene(
        name=str(raw.get("name", path.stem)),
        path=path,
        sha256=file_sha256(path),
        data=raw["data"],
        grid=_grid_pair(raw.get("grid", list(constants.DEFAULT_GRID)), "grid"),
        surfaces=surfaces,
        regions=regions,
        tasks=tasks,
        output=output,
        tolerances=tolerances,
        seed=int(raw.get("seed", 0)),
    )


def validate_scene(path: Path) -> Scene:
    """Schema check only: parse, resolve references and build the data set without running tasks."""
    scene = load_scene(path)
    load_data_set(scene)
    logger.info(f"{path}: {len(scene.surfaces)} surfaces, {len(scene.regions)} regions, {len(scene.tasks)} tasks")
    return scene


def load_data_set(scene: Scene) -> InitialDataSet:
    if "catalog" in scene.data:
        return build_catalog_data(scene.data["catalog"], scene.data.get("params"))
    return load_data_grid(scene.resolve(scene.data["grid_file"]))


def _region_spec(entry: dict) -> RegionSpec:
    kwargs = {k: v for k, v in entry.items() if k != "id"}
    for key in ("center", "lower", "upper", "grid"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return RegionSpec(**kwargs)


# --- Running ---


class TaskContext:
    """Shared state of one scene run; surfaces, extrinsic data and embeddings are built once."""

    def __init__(self, scene: Scene, ids: InitialDataSet, out_dir: Path, tolerances: Dict[str, float], seed: int):
        self.scene = scene
        self.ids = ids
        self.out_dir = out_dir
        self.tolerances = tolerances
        self.seed = seed
        self._meshes: Dict[str, SurfaceMesh] = {}
        self._ext: Dict[str, ExtrinsicData] = {}
        self._embeddings: Dict[Tuple[str, Tuple], EmbeddingResult] = {}

    def mesh(self, sid: str) -> SurfaceMesh:
        if sid not in self._meshes:
            entry = self.scene.surfaces[sid]
            if entry["kind"] == "sphere":
                grid = tuple(entry.get("grid", self.scene.grid))
                self._meshes[sid] = coordinate_sphere(
                    self.ids, entry.get("center", (0.0, 0.0, 0.0)), float(entry["radius"]), grid, label=sid
                )
            else:
                grid, points = load_surface_grid(self.scene.resolve(entry["path"]))
                self._meshes[sid] = sampled_surface(self.ids, grid, points, label=sid)
        return self._meshes[sid]

    def extrinsic(self, sid: str) -> ExtrinsicData:
        if sid not in self._ext:
            self._ext[sid] = extrinsic_data(self.mesh(sid))
        return self._ext[sid]

    def embedding_options(self, options: dict) -> EmbeddingOptions:
        return EmbeddingOptions(
            degree=options.get("degree"),
            tol=float(self.tolerances.get("embed_tol", constants.EMBED_TOL)),
            max_iter=int(self.tolerances.get("embed_max_iter", constants.EMBED_MAX_ITER)),
            seed=self.seed,
            jitter=float(options.get("jitter", 0.0)),
            homotopy_steps=int(options.get("homotopy_steps", 1)),
        )

    def embedding(self, sid: str, options: dict) -> EmbeddingResult:
        opts = self.embedding_options(options)
        key = (sid, (opts.degree, opts.tol, opts.max_iter, opts.jitter, opts.homotopy_steps))
        if key not in self._embeddings:
            ext = self.extrinsic(sid)
            self._embeddings[key] = embed_convex(ext.gamma, opts, ext.grid)
        return self._embeddings[key]

    def gauge_strategy(self) -> GaugeStrategy:
        return GaugeStrategy(tol=float(self.tolerances.get("gauge_tol", constants.GAUGE_TOL)))

    def artifact(self, task_index: int, kind: str, suffix: str) -> Path:
        return self.out_dir / f"task_{task_index:02d}_{kind}_{suffix}"


def vector_field_from_options(spec: Optional[dict]) -> VectorFieldData:
    if not spec:
        return VectorFieldData.zero()
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return VectorFieldData.zero()
    if kind == "position":
        return VectorFieldData.position(float(spec.get("scale", 1.0)), spec.get("center", (0.0, 0.0, 0.0)))
    if kind == "constant":
        return VectorFieldData.constant(_require(spec, "value", "X"))
    raise SceneError(f"unknown vector field kind '{kind}'")


def _tau_from_options(mesh: SurfaceMesh, options: dict) -> np.ndarray:
    """Height function tau = scale * <x - center, direction> on the surface nodes."""
    scale = float(options.get("tau_scale", 0.0))
    if scale == 0.0:
        return np.zeros(mesh.grid.shape)
    direction = np.asarray(options.get("tau_direction", (0.0, 0.0, 1.0)), dtype=float)
    return scale * np.einsum("...i,i->...", mesh.points - mesh.center, direction / np.linalg.norm(direction))


def _task_constraints(ctx: TaskContext, index: int, task: TaskEntry) -> List[dict]:
    if "region" in task:
        region = _region_spec(ctx.scene.regions[task["region"]])
    else:
        entry = ctx.scene.surfaces[task["surface"]]
        if entry["kind"] != "sphere":
            raise SceneError("constraints on a surface need a sphere surface")
        region = RegionSpec(kind="ball", center=tuple(entry.get("center", (0.0, 0.0, 0.0))), r_outer=float(entry["radius"]))
    cf = constraint_fields(ctx.ids, region)
    margin, violations = dec_check(cf)
    return [
        {
            "region": task.get("region", task.get("surface")),
            "n_points": int(cf.points.shape[0]),
            "max_abs_mu": float(np.max(np.abs(cf.mu))),
            "max_abs_J": float(np.max(cf.j_norm)),
            "min_dec_margin": margin,
            "dec_violations": len(violations),
            "max_abs_scalar_curvature": float(np.max(np.abs(cf.scalar_curvature))),
        }
    ]


def _export_profile(path: Path, mesh: SurfaceMesh, ext: ExtrinsicData, H0: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["theta", "H", "H0", "trk"])
        for j, theta in enumerate(mesh.grid.theta):
            writer.writerow([repr(float(theta)), repr(float(np.mean(ext.H[j]))), repr(float(np.mean(H0[j]))), repr(float(np.mean(ext.trk[j])))])
    return path


def _task_masses(ctx: TaskContext, index: int, task: TaskEntry) -> List[dict]:
    options = task.get("options", {})
    sid = task["surface"]
    mesh, ext = ctx.mesh(sid), ctx.extrinsic(sid)
    emb = ctx.embedding(sid, options)
    H0 = reference_mean_curvature(emb)
    rows = []
    for name in options.get("functionals", DEFAULT_FUNCTIONALS):
        if name == "BY":
            report = brown_york(H0, ext)
        elif name == "KLY":
            report = kijowski_liu_yau(H0, ext)
        elif name == "W":
            report = w_mass(H0, ext)
        elif name == "X":
            report = x_modified_energy(H0, ext, vector_field_from_options(options.get("X")))
        else:
            try:
                _, wy = wang_yau_energy(mesh, ext, _tau_from_options(mesh, options), ctx.gauge_strategy(), ctx.embedding_options(options))
            except HypothesisError as e:
                rows.append({"surface": sid, "functional": "WY", "raw": math.nan, "normalized": math.nan, "admissible": False, "notes": str(e)})
                continue
            rows.append({"surface": sid, **wy.to_record()})
            continue
        rows.append({"surface": sid, **report.to_record()})
    if options.get("profile", True):
        _export_profile(ctx.artifact(index, "masses", f"{sid}_profile.csv"), mesh, ext, H0)
    return rows


def _task_embed(ctx: TaskContext, index: int, task: TaskEntry) -> List[dict]:
    options = task.get("options", {})
    sid = task["surface"]
    emb = ctx.embedding(sid, options)
    record = {"surface": sid, **emb.to_record(), "minkowski_defect": minkowski_defect(emb, ctx.extrinsic(sid).gamma)}
    if options.get("export", False):
        record["export"] = export_embedding(ctx.artifact(index, "embed", f"{sid}.obj"), emb).name
    return [record]


def _task_flow(ctx: TaskContext, index: int, task: TaskEntry) -> List[dict]:
    options = task.get("options", {})
    sid = task["surface"]
    ext = ctx.extrinsic(sid)
    H0 = reference_mean_curvature(ctx.embedding(sid, options))
    ufield = shi_tam_boundary_u(H0, ext, vector_field_from_options(options.get("X")))
    r0, u0 = seed_from_boundary(ufield, float(ctx.tolerances.get("flow_deviation", constants.FLOW_DEVIATION_TOL)))
    traj = solve_rotsym_extension(
        r0, u0, float(options.get("range_factor", DEFAULT_FLOW_RANGE)) * r0, int(options.get("steps", constants.FLOW_STEPS))
    )
    q = traj.column("Q")
    path = export_trajectory_csv(ctx.artifact(index, "flow", f"{sid}_trajectory.csv"), traj)
    return [
        {
            "surface": sid,
            "r0": r0,
            "u0": u0,
            "u_relative_deviation": ufield.relative_deviation,
            "two_m": traj.mass_parameter,
            "Q_r0": traj.states[0].Q,
            "energy": extension_energy(traj),
            "q_derivative_defect": q_derivative_check(traj),
            "max_monotonicity_violation": float(max(np.max(np.diff(q)), 0.0)),
            "leaves": len(traj.states),
            "trajectory": path.name,
        }
    ]


def _task_shield(ctx: TaskContext, index: int, task: TaskEntry) -> List[dict]:
    options = task.get("options", {})
    sg = shield_geometry_from_data(
        ctx.ids,
        _region_spec(ctx.scene.regions[task["region"]]),
        _region_spec(ctx.scene.regions[options["annulus"]]),
        ctx.mesh(task["surface"]),
        sigma=float(options["sigma"]),
        d=float(options["d"]),
        l=float(options["l"]),
    )
    return [{"surface": task["surface"], "region": task["region"], **shield_check(sg).to_record()}]


def _task_fillin(ctx: TaskContext, index: int, task: TaskEntry) -> List[dict]:
    options = task.get("options", {})
    if "bartnik_file" in options:
        bd = load_bartnik_data(ctx.scene.resolve(options["bartnik_file"]))
        source = str(options["bartnik_file"])
    else:
        bd = bartnik_data_from_surface(ctx.extrinsic(task["surface"]))
        source = task["surface"]
        if options.get("export", False):
            save_bartnik_data(ctx.artifact(index, "fillin", f"{source}_bartnik.txt"), bd)
    report = obstruction_report(bd, h0=float(options["h0"]), C0=float(options["C0"]))
    return [{"source": source, **report.to_record()}]


def _task_adm(ctx: TaskContext, index: int, task: TaskEntry) -> List[dict]:
    options = task.get("options", {})
    radii = [float(r) for r in options.get("radii", DEFAULT_ADM_RADII)]
    result = adm_energy_momentum(ctx.ids, radii, tuple(options.get("grid", (24, 48))), options.get("center", (0.0, 0.0, 0.0)))
    record = result.to_record()
    if ctx.ids.decay_rate is not None:
        record["max_scaled_decay"] = max(decay_check(ctx.ids, radii).values())
    return [record]


def _task_expansions(ctx: TaskContext, index: int, task: TaskEntry) -> List[dict]:
    options = task.get("options", {})
    eps = options.get("eps_mots", ctx.tolerances.get("eps_mots"))
    data = null_expansions(ctx.extrinsic(task["surface"]), None if eps is None else float(eps))
    return [{"surface": task["surface"], **data.to_record()}]


TASK_RUNNERS: Dict[str, Callable[[TaskContext, int, TaskEntry], List[dict]]] = {
    "constraints": _task_constraints,
    "masses": _task_masses,
    "embed": _task_embed,
    "flow": _task_flow,
    "shield": _task_shield,
    "fillin": _task_fillin,
    "adm": _task_adm,
    "expansions": _task_expansions,
}


# --- Reports ---


def _json_value(value):
    """Builtin JSON value; non-finite floats become the strings 'inf', '-inf' and 'nan'."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return value


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def write_report(path: Path, meta: ReportMeta, rows: Sequence[dict], fmt: str) -> Path:
    """CSV: a '# generated_at' line, a '# key=value' meta line, then the table. JSON: meta then results."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = {"generated_at": meta["generated_at"], "meta": {k: v for k, v in meta.items() if k != "generated_at"}, "results": list(rows)}
        path.write_text(json.dumps(_json_value(payload), indent=2, allow_nan=False) + "\n", encoding="utf8")
        return path

    fieldnames: List[str] = []
    for row in rows:
        fieldnames.extend(k for k in row if k not in fieldnames)
    with path.open("w", newline="", encoding="utf8") as f:
        f.write(f"# generated_at={meta['generated_at']}\n")
        f.write("# " + " ".join(f"{k}={v}" for k, v in meta.items() if k != "generated_at") + "\n")
        writer = csv.DictWriter(f, fieldnames=fieldnames, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    return path


def run_scene(
    path: Path,
    out_dir: Optional[Path] = None,
    fmt: Optional[str] = None,
    tol: Optional[float] = None,
    seed: Optional[int] = None,
) -> int:
    """Run every task in declaration order; 0 iff no task raised."""
    scene = load_scene(path)
    fmt = fmt or scene.output.get("format", "csv")
    if fmt not in constants.REPORT_FORMATS:
        raise SceneError(f"unknown report format '{fmt}'")
    base = resolve_out_dir(out_dir if out_dir is not None else scene.output.get("dir"))
    target = base / scene.name
    tolerances = dict(scene.tolerances)
    if tol is not None:
        tolerances["embed_tol"] = tol
    seed = scene.seed if seed is None else seed
    ctx = TaskContext(scene, load_data_set(scene), target, tolerances, seed)
    logger.info(f"Running scene '{scene.name}' ({len(scene.tasks)} tasks) -> {target}")

    ok_cnt, fail_cnt = 0, 0
    pbar = tqdm(list(enumerate(scene.tasks)), desc=f"Scene {scene.name}")
    for index, task in pbar:
        kind = task["kind"]
        meta = ReportMeta(
            generated_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            scene=scene.name,
            scene_sha256=scene.sha256,
            artifact_version=constants.ARTIFACT_VERSION,
            task_index=index,
            task_kind=kind,
            seed=seed,
        )
        try:
            rows = TASK_RUNNERS[kind](ctx, index, task)
            report = write_report(target / f"task_{index:02d}_{kind}.{fmt}", meta, rows, fmt)
            logger.debug(f"task {index:02d} {kind} -> {report}")
            ok_cnt += 1
        except LabError as e:
            fail_cnt += 1
            tqdm.write(f"[task {index:02d} {kind}] FAIL: {e}")
        except Exception as e:
            fail_cnt += 1
            tqdm.write(f"[task {index:02d} {kind}] FAIL: {e}\n{traceback.format_exc()}")
        pbar.set_postfix(ok=ok_cnt, failed=fail_cnt)

    logger.info(f"Scene '{scene.name}' done. OK={ok_cnt}, FAIL={fail_cnt}, TOTAL={len(scene.tasks)}")
    return 0 if fail_cnt == 0 else 1


def _run_one_scene(args: dict) -> dict:
    """Child process entry. args is a dict (picklable)."""
    try:
        status = run_scene(Path(args["path"]), args.get("out_dir"), args.get("fmt"), args.get("tol"), args.get("seed"))
        return {"path": args["path"], "ok": status == 0, "msg": "done" if status == 0 else "task failures"}
    except LabError as e:
        return {"path": args["path"], "ok": False, "msg": str(e)}
    except Exception as e:
        return {"path": args["path"], "ok": False, "msg": f"{e}\n{traceback.format_exc()}"}


def run_scenes(
    paths: Sequence[Path],
    out_dir: Optional[Path] = None,
    fmt: Optional[str] = None,
    tol: Optional[float] = None,
    seed: Optional[int] = None,
    threads: int = 1,
) -> int:
    """Several scenes; with threads > 1 each scene runs in its own worker process."""
    jobs = [{"path": str(p), "out_dir": out_dir, "fmt": fmt, "tol": tol, "seed": seed} for p in paths]
    ok_cnt, fail_cnt = 0, 0

    def record(res: dict):
        nonlocal ok_cnt, fail_cnt
        if res["ok"]:
            ok_cnt += 1
        else:
            fail_cnt += 1
            tqdm.write(f"[scene] FAIL: {res['path']}\n{res['msg']}")

    if threads <= 1:
        for job in jobs:
            record(_run_one_scene(job))
    else:
        pbar = tqdm(total=len(jobs), desc="Scenes")
        with ProcessPoolExecutor(max_workers=threads) as ex:
            future_map = {ex.submit(_run_one_scene, job): job for job in jobs}
            for fut in as_completed(future_map):
                record(fut.result())
                pbar.update(1)
                pbar.set_postfix(ok=ok_cnt, failed=fail_cnt)
        pbar.close()
    logger.info(f"Scenes done. OK={ok_cnt}, FAIL={fail_cnt}, TOTAL={len(jobs)}")
    return 0 if fail_cnt == 0 else 1
