"""Euler-angle <-> rotation-matrix conversion in BVH channel order.

Channels compose intrinsically in file order: for order "ZXY" with
angles (az, ax, ay), R = Ry(ay) @ Rx(ax) @ Rz(az). The forward map is
hand-rolled; the inverse goes through scipy's Rotation (extrinsic
lowercase sequences share the same composition), which zeroes the third
angle under gimbal lock.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import GeometryError

_VALID_ORDERS = {"XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX"}


def _axis_matrix(axis: str, rad: float) -> np.ndarray:
    c, s = np.cos(rad), np.sin(rad)
    if axis == "X":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "Y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    if axis == "Z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    raise ValueError(f"unknown axis {axis!r}")


def check_order(order: str) -> str:
    order = order.upper()
    if order not in _VALID_ORDERS:
        raise ValueError(f"rotation order must be a permutation of XYZ, got {order!r}")
    return order


def euler_to_rotmat(angles_deg, order: str) -> np.ndarray:
    """Rotation matrix from per-channel degrees, applied in file order."""
    order = check_order(order)
    rad = np.deg2rad(np.asarray(angles_deg, dtype=np.float64))
    r = np.eye(3)
    for axis, angle in zip(order, rad):
        r = _axis_matrix(axis, angle) @ r
    return r


def rotmat_to_euler(r: np.ndarray, order: str, tol: float = 1e-6) -> np.ndarray:
    """Channel-order degrees reproducing `r` (within `tol` in matrix space)."""
    order = check_order(order)
    r = np.asarray(r, dtype=np.float64)
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err > tol or np.linalg.det(r) <= 0:
        raise GeometryError(f"matrix is not a rotation (orthonormality error {err:.2e})")
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Gimbal lock")
        rad = Rotation.from_matrix(r).as_euler(order.lower())
    return np.rad2deg(rad)


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Project an arbitrary 3x3 block onto SO(3) via SVD."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] *= -1
        r = u @ vt
    return r
