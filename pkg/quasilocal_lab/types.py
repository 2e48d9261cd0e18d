from typing import Dict, List, TypedDict


class SurfaceEntry(TypedDict, total=False):
    id: str
    kind: str
    center: List[float]
    radius: float
    path: str
    grid: List[int]


class RegionEntry(TypedDict, total=False):
    id: str
    kind: str
    center: List[float]
    r_inner: float
    r_outer: float
    lower: List[float]
    upper: List[float]
    n_radial: int
    n_box: int
    grid: List[int]


class TaskEntry(TypedDict, total=False):
    kind: str
    surface: str
    region: str
    options: Dict[str, object]


class ReportMeta(TypedDict):
    generated_at: str
    scene: str
    scene_sha256: str
    artifact_version: str
    task_index: int
    task_kind: str
    seed: int
