"""Independent stereo-matching oracles.

Epipolar distance is computed from the fundamental matrix assembled out
of hand-built rotation rows and calibration matrices — a different route
than the production code (which traces two points of the back-projected
ray). Assignment is exhaustive search over all injective pairings. Any
shared helper would defeat the comparison.
"""

import math
from itertools import permutations

import numpy as np


def _rotation_cam_from_world(cam):
    """Rows (right, down, forward) for a roll-free camera, pitch positive
    looking down."""
    yaw, pitch = cam.pose.yaw_rad, cam.pose.pitch_rad
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    forward = np.array([cp * cy, cp * sy, -sp])
    left = np.array([-sy, cy, 0.0])
    up = np.array([sp * cy, sp * sy, cp])
    return np.stack([-left, -up, forward])


def _calibration(cam):
    i = cam.intrinsics
    return np.array([[i.fx_px, 0.0, i.cx_px],
                     [0.0, i.fy_px, i.cy_px],
                     [0.0, 0.0, 1.0]])


def _skew(v):
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def oracle_fundamental(cam_a, cam_b):
    """Fundamental matrix with p_b^T F p_a = 0 for corresponding pixels."""
    r_a = _rotation_cam_from_world(cam_a)
    r_b = _rotation_cam_from_world(cam_b)
    c_a = np.asarray(cam_a.pose.position_m, dtype=float)
    c_b = np.asarray(cam_b.pose.position_m, dtype=float)
    r_rel = r_b @ r_a.T
    t_rel = r_b @ (c_a - c_b)
    essential = _skew(t_rel) @ r_rel
    return np.linalg.inv(_calibration(cam_b)).T @ essential @ np.linalg.inv(
        _calibration(cam_a))


def oracle_epipolar_distance(cam_a, cam_b, uv_a, uv_b):
    """Distance in image b from uv_b to the epipolar line of uv_a."""
    line = oracle_fundamental(cam_a, cam_b) @ np.array([uv_a[0], uv_a[1], 1.0])
    norm = math.hypot(line[0], line[1])
    if norm < 1e-12:
        return math.inf
    return abs(float(line @ np.array([uv_b[0], uv_b[1], 1.0]))) / norm


def oracle_assignment(a, b, dist, gate):
    """Exhaustive one-to-one assignment: maximize the number of gated
    same-class matches, then minimize the summed distance. Returns a
    frozenset of (index_a, index_b)."""
    n, m = len(a), len(b)
    best_key = (-1, 0.0)
    best = frozenset()

    def consider(pairing):
        nonlocal best_key, best
        pairs = [(i, j) for i, j in pairing
                 if a[i].kind == b[j].kind and dist(a[i], b[j]) <= gate]
        total = sum(dist(a[i], b[j]) for i, j in pairs)
        key = (len(pairs), -total)
        if key > best_key:
            best_key = key
            best = frozenset(pairs)

    if n <= m:
        for cols in permutations(range(m), n):
            consider(list(enumerate(cols)))
    else:
        for rows in permutations(range(n), m):
            consider([(i, j) for j, i in enumerate(rows)])
    return best
