"""Synthetic scene simulator: box objects, depth/color rendering, noise.

Scenes contain yaw-oriented box objects with per-object albedo and a set
of pinhole cameras. Rendering casts one ray per pixel center and keeps
the nearest ray-triangle intersection; depth maps store camera-frame z
(0 marks no hit), color maps store Lambert-shaded albedo under a single
fixed directional light plus an ambient term. Everything is
deterministic: identical scene spec and seed give bit-identical frames.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .boxes import OrientedBox
from .camera import BEHIND_CAMERA_EPS, Intrinsics, Pose, look_at_pose, project_points
from .meshes import box_shell, triangle_normals

# Fixed directional light (unit vector pointing from the scene toward
# the light) and ambient floor used by the shader.
LIGHT_DIR = np.array([0.4, 0.25, 1.0]) / np.linalg.norm([0.4, 0.25, 1.0])
AMBIENT = 0.25

DEFAULT_INTRINSICS = Intrinsics(fx=120.0, fy=120.0, cx=79.5, cy=59.5, width=160, height=120)


@dataclass(frozen=True)
class SceneObject:
    """A box-shaped scene object with a flat albedo."""

    box: OrientedBox
    albedo: tuple[float, float, float] = (0.7, 0.7, 0.7)

    def mesh(self) -> np.ndarray:
        """(12, 3, 3) closed triangle shell of the box."""
        return box_shell(self.box)


@dataclass(frozen=True)
class SceneCamera:
    intrinsics: Intrinsics
    pose: Pose


@dataclass(frozen=True)
class SceneSpec:
    objects: tuple[SceneObject, ...]
    cameras: tuple[SceneCamera, ...]
    rng_seed: int = 0
    depth_noise_sigma: float = 0.0
    outlier_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ValueError(f"outlier rate must be in [0, 1], got {self.outlier_rate}")
        if self.depth_noise_sigma < 0.0:
            raise ValueError("noise sigma must be non-negative")
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "cameras", tuple(self.cameras))

    def num_categories(self) -> int:
        if not self.objects:
            return 0
        return max(o.box.category for o in self.objects) + 1


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned 2D box in pixel coordinates, bounds inclusive."""

    category: int
    u_min: float
    v_min: float
    u_max: float
    v_max: float

    @property
    def area(self) -> float:
        return max(0.0, self.u_max - self.u_min) * max(0.0, self.v_max - self.v_min)


@dataclass(frozen=True, eq=False)
class CameraFrame:
    """One rendered view: perturbed depth, shaded color, GT 2D boxes."""

    camera_index: int
    intrinsics: Intrinsics
    pose: Pose
    depth: np.ndarray
    color: np.ndarray
    boxes_2d: tuple[Box2D, ...]


def _scene_triangles(scene: SceneSpec):
    """Stack all object shells; returns (triangles, owning object index)."""
    tris = []
    owner = []
    for i, obj in enumerate(scene.objects):
        shell = obj.mesh()
        tris.append(shell)
        owner.extend([i] * len(shell))
    if not tris:
        return np.zeros((0, 3, 3)), np.zeros(0, dtype=np.int64)
    return np.concatenate(tris, axis=0), np.asarray(owner, dtype=np.int64)


def _cast_rays(scene: SceneSpec, intrinsics: Intrinsics, pose: Pose):
    """Nearest-hit depth and triangle index for every pixel center.

    Ray directions are built with camera-frame z-component 1, so the ray
    parameter of a hit equals its camera depth directly.
    """
    h, w = intrinsics.height, intrinsics.width
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dir_cam = np.stack(
        [
            (us - intrinsics.cx) / intrinsics.fx,
            (vs - intrinsics.cy) / intrinsics.fy,
            np.ones_like(us),
        ],
        axis=-1,
    ).reshape(-1, 3)
    dirs = dir_cam @ pose.rotation.T
    origin = pose.translation

    triangles, owner = _scene_triangles(scene)
    depth = np.full(h * w, np.inf)
    tri_index = np.full(h * w, -1, dtype=np.int64)
    for k in range(len(triangles)):
        a, b, c = triangles[k]
        e1, e2 = b - a, c - a
        # Moeller-Trumbore with a shared origin: tvec and qvec are
        # per-triangle constants, only pvec varies per ray
        tvec = origin - a
        qvec = np.cross(tvec, e1)
        pvec = np.cross(dirs, e2)
        det = pvec @ e1
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / det
            u = (pvec @ tvec) * inv
            v = (dirs @ qvec) * inv
            t = np.dot(e2, qvec) * inv
            eps = 1e-9
            hit = (
                (np.abs(det) > 1e-12)
                & (u >= -eps)
                & (v >= -eps)
                & (u + v <= 1.0 + eps)
                & (t > BEHIND_CAMERA_EPS)
                & (t < depth)
            )
        depth[hit] = t[hit]
        tri_index[hit] = k
    depth[tri_index < 0] = 0.0
    return depth.reshape(h, w), tri_index.reshape(h, w), triangles, owner


def _shade_triangles(scene: SceneSpec, triangles: np.ndarray, owner: np.ndarray) -> np.ndarray:
    """Flat Lambert shade per triangle, clipped to unit range."""
    normals = triangle_normals(triangles)
    lambert = np.maximum(0.0, normals @ LIGHT_DIR)
    intensity = AMBIENT + (1.0 - AMBIENT) * lambert
    albedo = np.array([scene.objects[i].albedo for i in owner])
    return np.clip(albedo * intensity[:, None], 0.0, 1.0)


def render_depth(scene: SceneSpec, camera_index: int) -> np.ndarray:
    """Noise-free (H, W) depth map for one camera; 0 where no surface."""
    cam = scene.cameras[camera_index]
    depth, _, _, _ = _cast_rays(scene, cam.intrinsics, cam.pose)
    return depth


def render_color(scene: SceneSpec, camera_index: int) -> np.ndarray:
    """(H, W, 3) shaded color image in [0, 1]; background is black."""
    cam = scene.cameras[camera_index]
    _, tri_index, triangles, owner = _cast_rays(scene, cam.intrinsics, cam.pose)
    shades = _shade_triangles(scene, triangles, owner)
    color = np.zeros((*tri_index.shape, 3))
    hit = tri_index >= 0
    color[hit] = shades[tri_index[hit]]
    return color


def perturb_depth(depth, sigma, outlier_rate, rng, depth_range) -> np.ndarray:
    """Add Gaussian noise and uniform outliers to the valid pixels.

    Valid (non-zero) depths get ``N(0, sigma^2)`` noise and are clipped
    into ``depth_range``; a fraction ``outlier_rate`` of them is instead
    replaced by a uniform draw from ``depth_range``. Invalid pixels stay
    0. The rng is consumed in a fixed order regardless of the mask, so
    equal seeds give equal results.
    """
    d = np.asarray(depth, dtype=np.float64)
    lo, hi = float(depth_range[0]), float(depth_range[1])
    if not hi > lo > 0:
        raise ValueError(f"bad depth range [{lo}, {hi}]")
    noise = rng.normal(0.0, sigma, size=d.shape) if sigma > 0 else np.zeros_like(d)
    outlier_mask = rng.random(d.shape) < outlier_rate
    uniform = rng.uniform(lo, hi, size=d.shape)
    valid = d > 0
    out = np.clip(d + noise, lo, hi)
    out = np.where(outlier_mask, uniform, out)
    out[~valid] = 0.0
    return out


def project_gt_boxes(scene: SceneSpec, camera_index: int, min_pixels: float = 16.0):
    """GT 2D boxes from projected mesh vertices, clipped to the image.

    An object contributes a box when at least one of its mesh vertices
    is in front of the camera and the clipped axis-aligned hull covers
    at least ``min_pixels`` of pixel area. Partially-behind objects use
    only their in-front vertices, which under-covers; acceptable for the
    orbit scenes this simulator targets.
    """
    cam = scene.cameras[camera_index]
    w, h = cam.intrinsics.width, cam.intrinsics.height
    boxes = []
    for obj in scene.objects:
        verts = obj.mesh().reshape(-1, 3)
        uv, _, in_front = project_points(verts, cam.intrinsics, cam.pose)
        if not in_front.any():
            continue
        uv = uv[in_front]
        u0 = max(0.0, float(uv[:, 0].min()))
        v0 = max(0.0, float(uv[:, 1].min()))
        u1 = min(float(w - 1), float(uv[:, 0].max()))
        v1 = min(float(h - 1), float(uv[:, 1].max()))
        if u1 <= u0 or v1 <= v0:
            continue
        box = Box2D(obj.box.category, u0, v0, u1, v1)
        if box.area < min_pixels:
            continue
        boxes.append(box)
    return boxes


def make_frame(scene: SceneSpec, camera_index: int, rng: np.random.Generator, depth_range) -> CameraFrame:
    """Render one camera and apply the scene's depth perturbation."""
    cam = scene.cameras[camera_index]
    depth, tri_index, triangles, owner = _cast_rays(scene, cam.intrinsics, cam.pose)
    shades = _shade_triangles(scene, triangles, owner)
    color = np.zeros((*tri_index.shape, 3))
    hit = tri_index >= 0
    color[hit] = shades[tri_index[hit]]
    depth = perturb_depth(depth, scene.depth_noise_sigma, scene.outlier_rate, rng, depth_range)
    return CameraFrame(
        camera_index=camera_index,
        intrinsics=cam.intrinsics,
        pose=cam.pose,
        depth=depth,
        color=color,
        boxes_2d=tuple(project_gt_boxes(scene, camera_index)),
    )


def _rotation_angle_deg(pose_a: Pose, pose_b: Pose) -> float:
    cos = (np.trace(pose_a.rotation.T @ pose_b.rotation) - 1.0) / 2.0
    return math.degrees(math.acos(float(np.clip(cos, -1.0, 1.0))))


def select_keyframes(
    poses,
    detections_per_frame,
    target_count: int,
    min_translation: float = 0.1,
    min_rotation_deg: float = 10.0,
) -> list[int]:
    """Greedy keyframe selection preferring detections and ego-motion.

    First pass keeps frames (in temporal order) that carry at least one
    detection and moved enough relative to the previously selected frame
    (translation OR rotation threshold). If that yields fewer than
    ``target_count``, the detection requirement is relaxed, then the
    motion requirement, each pass filling in temporal order. Returns
    sorted indices, at most ``target_count``.
    """
    n = len(poses)
    if len(detections_per_frame) != n:
        raise ValueError("detection counts must align with poses")
    if target_count < 1:
        raise ValueError("target_count must be positive")

    def moved(i, j) -> bool:
        dt = float(np.linalg.norm(poses[i].translation - poses[j].translation))
        return dt >= min_translation or _rotation_angle_deg(poses[i], poses[j]) >= min_rotation_deg

    selected: list[int] = []
    last = None
    for i in range(n):
        if len(selected) >= target_count:
            break
        if detections_per_frame[i] >= 1 and (last is None or moved(i, last)):
            selected.append(i)
            last = i

    if len(selected) < target_count:
        # relax the detection requirement, keep the motion requirement
        chosen = set(selected)
        for i in range(n):
            if len(chosen) >= target_count:
                break
            if i in chosen:
                continue
            prior = [j for j in sorted(chosen) if j < i]
            if not prior or moved(i, prior[-1]):
                chosen.add(i)
        selected = sorted(chosen)

    if len(selected) < target_count:
        chosen = set(selected)
        for i in range(n):
            if len(chosen) >= target_count:
                break
            chosen.add(i)
        selected = sorted(chosen)

    return sorted(selected[:target_count])


def orbit_trajectory(radius: float, height: float, steps: int, look_at) -> list[Pose]:
    """Poses evenly spaced on a circle of ``radius`` around ``look_at``.

    Cameras sit at absolute world height ``height`` and look at the
    target point. ``steps`` must be positive; ``radius`` nonzero so the
    viewing direction never degenerates.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    if radius <= 0:
        raise ValueError("radius must be positive")
    look = np.asarray(look_at, dtype=np.float64)
    poses = []
    for k in range(steps):
        angle = 2.0 * math.pi * k / steps
        eye = np.array(
            [look[0] + radius * math.cos(angle), look[1] + radius * math.sin(angle), height]
        )
        poses.append(look_at_pose(eye, look))
    return poses


# ---------------------------------------------------------------------------
# JSON scene files


def _intrinsics_to_dict(i: Intrinsics) -> dict:
    return {"fx": i.fx, "fy": i.fy, "cx": i.cx, "cy": i.cy, "width": i.width, "height": i.height}


def _intrinsics_from_dict(d: dict) -> Intrinsics:
    return Intrinsics(
        fx=float(d["fx"]),
        fy=float(d["fy"]),
        cx=float(d["cx"]),
        cy=float(d["cy"]),
        width=int(d["width"]),
        height=int(d["height"]),
    )


def scene_to_dict(scene: SceneSpec) -> dict:
    return {
        "objects": [
            {
                "center": list(o.box.center),
                "size": list(o.box.size),
                "yaw": o.box.yaw,
                "category": o.box.category,
                "albedo": list(o.albedo),
            }
            for o in scene.objects
        ],
        "cameras": [
            {
                **_intrinsics_to_dict(c.intrinsics),
                "rotation": [float(x) for x in c.pose.rotation.reshape(-1)],
                "translation": [float(x) for x in c.pose.translation],
            }
            for c in scene.cameras
        ],
        "rng_seed": scene.rng_seed,
        "depth_noise_sigma": scene.depth_noise_sigma,
        "outlier_rate": scene.outlier_rate,
    }


def scene_from_dict(data: dict) -> SceneSpec:
    """Build a scene from its JSON form.

    ``cameras`` is either an explicit list of camera dicts (intrinsics
    plus row-major rotation and translation) or an object
    ``{"trajectory": {"type": "orbit", ...}}``; generated cameras use the
    optional top-level ``intrinsics`` entry, defaulting to a 160x120
    f=120 pinhole.
    """
    objects = tuple(
        SceneObject(
            box=OrientedBox(
                center=tuple(o["center"]),
                size=tuple(o["size"]),
                yaw=float(o.get("yaw", 0.0)),
                category=int(o.get("category", 0)),
            ),
            albedo=tuple(o.get("albedo", (0.7, 0.7, 0.7))),
        )
        for o in data["objects"]
    )
    cam_spec = data["cameras"]
    if isinstance(cam_spec, dict):
        traj = cam_spec.get("trajectory")
        if traj is None or traj.get("type") != "orbit":
            raise ValueError("camera object form requires a trajectory of type 'orbit'")
        intr = (
            _intrinsics_from_dict(data["intrinsics"])
            if "intrinsics" in data
            else DEFAULT_INTRINSICS
        )
        poses = orbit_trajectory(
            radius=float(traj["radius"]),
            height=float(traj["height"]),
            steps=int(traj["steps"]),
            look_at=traj.get("look_at", (0.0, 0.0, 0.0)),
        )
        cameras = tuple(SceneCamera(intr, p) for p in poses)
    else:
        cameras = tuple(
            SceneCamera(
                _intrinsics_from_dict(c),
                Pose(np.array(c["rotation"], dtype=np.float64).reshape(3, 3), np.array(c["translation"])),
            )
            for c in cam_spec
        )
    return SceneSpec(
        objects=objects,
        cameras=cameras,
        rng_seed=int(data.get("rng_seed", 0)),
        depth_noise_sigma=float(data.get("depth_noise_sigma", 0.0)),
        outlier_rate=float(data.get("outlier_rate", 0.0)),
    )


def save_scene(scene: SceneSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=2, sort_keys=True)
        f.write("\n")


def load_scene(path) -> SceneSpec:
    with open(path) as f:
        return scene_from_dict(json.load(f))


def demo_scene(
    noise_sigma: float = 0.0,
    outlier_rate: float = 0.0,
    steps: int = 20,
    seed: int = 0,
) -> SceneSpec:
    """Three separated boxes observed from a 20-camera orbit.

    Categories 0..2 with distinct albedos; the default configuration is
    noise-free. Object separation (> 1 m) keeps point clusters disjoint.
    """
    objects = (
        SceneObject(
            OrientedBox(center=(-1.1, 0.0, 0.35), size=(0.6, 0.5, 0.7), yaw=0.0, category=0),
            albedo=(0.85, 0.25, 0.2),
        ),
        SceneObject(
            OrientedBox(center=(0.2, 0.95, 0.3), size=(0.8, 0.6, 0.6), yaw=0.0, category=1),
            albedo=(0.2, 0.75, 0.3),
        ),
        SceneObject(
            OrientedBox(center=(0.9, -0.7, 0.45), size=(0.5, 0.5, 0.9), yaw=0.0, category=2),
            albedo=(0.25, 0.35, 0.9),
        ),
    )
    poses = orbit_trajectory(radius=3.0, height=1.7, steps=steps, look_at=(0.0, 0.0, 0.35))
    cameras = tuple(SceneCamera(DEFAULT_INTRINSICS, p) for p in poses)
    return SceneSpec(
        objects=objects,
        cameras=cameras,
        rng_seed=seed,
        depth_noise_sigma=noise_sigma,
        outlier_rate=outlier_rate,
    )
