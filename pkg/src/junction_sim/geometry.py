"""Pinhole camera mathematics for the junction sensor network.

Conventions
-----------
World frame: right-handed, z up, meters, origin at the junction center,
x along the main road.

Camera pose: yaw is the azimuth of the optical axis (counter-clockwise
from +x, radians), pitch is positive when the camera tilts *down*, roll
rotates about the optical axis. Zero roll keeps the image upright.

Image frame: u right, v down, pixels, origin at the top-left corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateGeometryError, InvalidArgumentError

PARALLEL_SIN_EPS = 1e-6  # rays with |sin(angle)| below this are degenerate
COINCIDENT_EPS = 1e-9    # camera centers closer than this cannot triangulate


@dataclass(frozen=True, slots=True)
class CameraIntrinsics:
    """Pinhole intrinsics with square pixels (fx == fy unless stated)."""

    width_px: int
    height_px: int
    fx_px: float
    fy_px: float
    cx_px: float
    cy_px: float

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise InvalidArgumentError("image dimensions must be positive")
        if self.fx_px <= 0 or self.fy_px <= 0:
            raise InvalidArgumentError("focal lengths must be positive")
        if not (0 <= self.cx_px <= self.width_px and 0 <= self.cy_px <= self.height_px):
            raise InvalidArgumentError("principal point must lie inside image bounds")


@dataclass(frozen=True, slots=True)
class CameraPose:
    """World-frame pose of a pole-mounted camera."""

    position_m: tuple[float, float, float]
    yaw_rad: float
    pitch_rad: float
    roll_rad: float = 0.0


@dataclass(frozen=True, slots=True)
class CameraModel:
    """One sensor unit: identifier, intrinsics, pose, and usable range."""

    id: int
    intrinsics: CameraIntrinsics
    pose: CameraPose
    max_range_m: float

    def __post_init__(self):
        if self.max_range_m <= 0:
            raise InvalidArgumentError("max_range_m must be positive")


@dataclass(frozen=True)
class Ray:
    """Half-line from `origin_m` along unit `direction`."""

    origin_m: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin_m, dtype=float)
        direction = np.asarray(self.direction, dtype=float)
        norm = np.linalg.norm(direction)
        if norm < 1e-15:
            raise InvalidArgumentError("ray direction must be nonzero")
        object.__setattr__(self, "origin_m", origin)
        object.__setattr__(self, "direction", direction / norm)


def intrinsics_from_lens(h_fov_deg: float, width_px: int, height_px: int) -> CameraIntrinsics:
    """Derive intrinsics from a lens' horizontal aperture angle.

    fx = fy = (width/2) / tan(h_fov/2); principal point at the image center.
    """
    if not 0.0 < h_fov_deg < 180.0:
        raise InvalidArgumentError(f"horizontal FOV must be in (0, 180) deg, got {h_fov_deg}")
    f = (width_px / 2.0) / math.tan(math.radians(h_fov_deg) / 2.0)
    return CameraIntrinsics(
        width_px=width_px,
        height_px=height_px,
        fx_px=f,
        fy_px=f,
        cx_px=width_px / 2.0,
        cy_px=height_px / 2.0,
    )


@lru_cache(maxsize=1024)
def _rotation_world_from_camera(pose: CameraPose) -> np.ndarray:
    """Columns are the camera axes (right, down, forward) in world coords."""
    cy, sy = math.cos(pose.yaw_rad), math.sin(pose.yaw_rad)
    cp, sp = math.cos(pose.pitch_rad), math.sin(pose.pitch_rad)
    cr, sr = math.cos(pose.roll_rad), math.sin(pose.roll_rad)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    # positive pitch rotates the forward axis downward
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    body = rz @ ry @ rx  # columns: forward, left, up
    return np.column_stack((-body[:, 1], -body[:, 2], body[:, 0]))


def rotation_world_from_camera(cam: CameraModel) -> np.ndarray:
    return _rotation_world_from_camera(cam.pose)


def camera_forward(cam: CameraModel) -> np.ndarray:
    """Unit optical-axis direction in world coordinates."""
    return rotation_world_from_camera(cam)[:, 2].copy()


def project(cam: CameraModel, point_m) -> tuple[float, float] | None:
    """Project a world point to pixel coordinates.

    Returns None for points at or behind the camera plane (non-positive
    depth). Pixels may fall outside the image bounds; callers filter.
    """
    r = rotation_world_from_camera(cam)
    p_cam = r.T @ (np.asarray(point_m, dtype=float) - np.asarray(cam.pose.position_m))
    if p_cam[2] <= 0.0:
        return None
    intr = cam.intrinsics
    u = intr.cx_px + intr.fx_px * p_cam[0] / p_cam[2]
    v = intr.cy_px + intr.fy_px * p_cam[1] / p_cam[2]
    return float(u), float(v)


def backproject(cam: CameraModel, u: float, v: float) -> Ray:
    """Ray from the camera center through pixel (u, v)."""
    intr = cam.intrinsics
    d_cam = np.array([(u - intr.cx_px) / intr.fx_px, (v - intr.cy_px) / intr.fy_px, 1.0])
    d_world = rotation_world_from_camera(cam) @ d_cam
    return Ray(origin_m=np.asarray(cam.pose.position_m, dtype=float), direction=d_world)


def triangulate_midpoint(r1: Ray, r2: Ray) -> tuple[np.ndarray, float]:
    """Midpoint of the common perpendicular of two rays.

    Returns (point, gap) where gap is the length of the perpendicular
    segment (0 for intersecting rays).
    """
    d1, d2 = r1.direction, r2.direction
    n = np.cross(d1, d2)
    n_sq = float(n @ n)
    if math.sqrt(n_sq) <= PARALLEL_SIN_EPS:
        raise DegenerateGeometryError("rays are (near-)parallel; cannot triangulate")
    do = r2.origin_m - r1.origin_m
    t1 = float(np.linalg.det(np.column_stack((do, d2, n)))) / n_sq
    t2 = float(np.linalg.det(np.column_stack((do, d1, n)))) / n_sq
    p1 = r1.origin_m + t1 * d1
    p2 = r2.origin_m + t2 * d2
    return (p1 + p2) / 2.0, float(np.linalg.norm(p2 - p1))


def _projection_jacobian(cam: CameraModel, point: np.ndarray) -> np.ndarray | None:
    """d(pixel)/d(world point), 2x3, or None behind the camera."""
    r = rotation_world_from_camera(cam)
    p_cam = r.T @ (point - np.asarray(cam.pose.position_m))
    x, y, z = p_cam
    if z <= 0.0:
        return None
    intr = cam.intrinsics
    d_pix_d_cam = np.array([
        [intr.fx_px / z, 0.0, -intr.fx_px * x / z**2],
        [0.0, intr.fy_px / z, -intr.fy_px * y / z**2],
    ])
    return d_pix_d_cam @ r.T


def triangulate_multi(observations) -> tuple[np.ndarray, float]:
    """N-view triangulation: linear ray least-squares + one Gauss-Newton pass.

    `observations` is a sequence of (CameraModel, (u, v)) pairs. Returns
    (point, residual_px_rms) where the residual is the RMS reprojection
    error over all views.
    """
    if len(observations) < 2:
        raise InvalidArgumentError("need at least 2 observations to triangulate")

    origins = np.array([np.asarray(cam.pose.position_m, dtype=float) for cam, _ in observations])
    spread = np.max(np.linalg.norm(origins - origins[0], axis=1))
    if spread < COINCIDENT_EPS:
        raise DegenerateGeometryError("all cameras share one center; no baseline")

    rays = [backproject(cam, u, v) for cam, (u, v) in observations]
    a = np.zeros((3, 3))
    b = np.zeros(3)
    for ray in rays:
        m = np.eye(3) - np.outer(ray.direction, ray.direction)
        a += m
        b += m @ ray.origin_m
    if np.linalg.eigvalsh(a)[0] < 1e-9:
        raise DegenerateGeometryError("rays are (near-)parallel; rank-deficient system")
    point = np.linalg.solve(a, b)

    def residuals(p):
        res = np.empty(2 * len(observations))
        jac = np.empty((2 * len(observations), 3))
        for i, (cam, (u, v)) in enumerate(observations):
            pix = project(cam, p)
            j = _projection_jacobian(cam, p)
            if pix is None or j is None:
                return None, None
            res[2 * i : 2 * i + 2] = (pix[0] - u, pix[1] - v)
            jac[2 * i : 2 * i + 2] = j
        return res, jac

    res, jac = residuals(point)
    if res is not None:
        jtj = jac.T @ jac
        if np.linalg.cond(jtj) < 1e12:
            refined = point - np.linalg.solve(jtj, jac.T @ res)
            res2, _ = residuals(refined)
            if res2 is not None and res2 @ res2 <= res @ res:
                point, res = refined, res2
        rms = math.sqrt(float(res @ res) / len(observations))
    else:
        rms = float("nan")
    return point, rms


def stereo_axis_angle(a: CameraModel, b: CameraModel) -> float:
    """Angle in degrees between the optical axes projected to the ground plane."""
    angles = []
    for cam in (a, b):
        fwd = camera_forward(cam)
        horiz = math.hypot(fwd[0], fwd[1])
        if horiz < 1e-9:
            raise DegenerateGeometryError(
                f"camera {cam.id} optical axis is vertical; no horizontal direction"
            )
        angles.append(math.atan2(fwd[1], fwd[0]))
    diff = abs(angles[0] - angles[1]) % (2.0 * math.pi)
    if diff > math.pi:
        diff = 2.0 * math.pi - diff
    return math.degrees(diff)
