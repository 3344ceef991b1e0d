"""3D head pose from the ten rigid landmarks.

Pin-hole projection of a rigid 3D template, a damped Gauss-Newton solver
for the rotation/translation that minimizes reprojection error, and the
five-way pose classifier over (rotation, scaled translation) features.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import mlkit

# landmark ids whose motion is dominated by rigid head movement;
# the last one (nose area) anchors the template origin
RIGID_IDS = (38, 39, 40, 41, 42, 43, 44, 46, 47, 67)
ORIGIN_ID = 67

MAX_ITERATIONS = 100
STEP_TOLERANCE = 1e-10


class PoseClass(str, Enum):
    AWAY = "C1"         # not looking at / not in front of the screen
    CORRECT = "C2"
    TOO_CLOSE = "C3"
    ASKEW_LEFT = "C4"
    ASKEW_RIGHT = "C5"


POSE_LABELS = [c.value for c in PoseClass]


class ProjectionError(ValueError):
    """A template point would project from behind the camera."""


class NoConvergenceError(RuntimeError):
    """Solver failed to reduce the reprojection error; carries the best iterate."""

    def __init__(self, message: str, best: "Pose"):
        super().__init__(message)
        self.best = best


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]))


@dataclass
class RigidTemplate:
    """Ten 3D points in model units, indexed by RIGID_IDS, origin at ORIGIN_ID."""

    ids: tuple
    points: np.ndarray  # (10, 3)

    def __post_init__(self):
        self.ids = tuple(int(i) for i in self.ids)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape != (len(self.ids), 3):
            raise ValueError("points must be one 3-vector per id")
        if ORIGIN_ID not in self.ids:
            raise ValueError(f"template must include landmark {ORIGIN_ID}")
        origin = self.points[self.ids.index(ORIGIN_ID)]
        if np.any(origin != 0.0):
            raise ValueError(f"landmark {ORIGIN_ID} must sit exactly at the origin")
        centered = self.points - self.points.mean(axis=0)
        sv = np.linalg.svd(centered, compute_uv=False)
        if sv[-1] < 1e-9 * sv[0]:
            raise ValueError("template points are coplanar (or worse)")

    @property
    def span(self) -> float:
        """Largest pairwise distance; the scale unit for pose features."""
        diffs = self.points[:, None, :] - self.points[None, :, :]
        return float(np.sqrt((diffs**2).sum(axis=2)).max())

    def to_json(self) -> str:
        rows = [
            {"id": i, "X": p[0], "Y": p[1], "Z": p[2]}
            for i, p in zip(self.ids, self.points.tolist())
        ]
        return json.dumps(rows, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RigidTemplate":
        rows = json.loads(text)
        ids = tuple(int(r["id"]) for r in rows)
        pts = np.array([[r["X"], r["Y"], r["Z"]] for r in rows], dtype=float)
        return cls(ids, pts)

    @classmethod
    def load(cls, path) -> "RigidTemplate":
        with open(path) as f:
            return cls.from_json(f.read())

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())
            f.write("\n")


@dataclass
class Pose:
    """Rigid pose relative to the camera: axis-angle rotation + translation."""

    rotation: np.ndarray  # (3,), axis-angle, norm <= pi
    translation: np.ndarray  # (3,), model units, z > 0
    reprojection_error: float = 0.0  # RMS pixels

    def __post_init__(self):
        self.rotation = wrap_axis_angle(np.asarray(self.rotation, dtype=float))
        self.translation = np.asarray(self.translation, dtype=float)
        if self.translation[2] <= 0:
            raise ValueError("translation z must be positive (face in front of camera)")
        if self.reprojection_error < 0:
            raise ValueError("reprojection error must be nonnegative")


# ---------------------------------------------------------------------------
# rotations


def rotation_matrix(rvec) -> np.ndarray:
    """Axis-angle to rotation matrix (Rodrigues)."""
    rvec = np.asarray(rvec, dtype=float)
    theta = float(np.linalg.norm(rvec))
    if theta < 1e-12:
        return np.eye(3)
    k = rvec / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(theta) * K + (1 - math.cos(theta)) * (K @ K)


def _rotation_matrices(rvecs: np.ndarray) -> np.ndarray:
    """Batched Rodrigues: (B, 3) axis-angle -> (B, 3, 3)."""
    rvecs = np.atleast_2d(rvecs)
    B = rvecs.shape[0]
    theta = np.sqrt((rvecs**2).sum(axis=1))
    safe = np.where(theta < 1e-12, 1.0, theta)
    k = rvecs / safe[:, None]
    K = np.zeros((B, 3, 3))
    K[:, 0, 1] = -k[:, 2]
    K[:, 0, 2] = k[:, 1]
    K[:, 1, 0] = k[:, 2]
    K[:, 1, 2] = -k[:, 0]
    K[:, 2, 0] = -k[:, 1]
    K[:, 2, 1] = k[:, 0]
    R = np.sin(theta)[:, None, None] * K + (1 - np.cos(theta))[:, None, None] * (K @ K)
    R[:, 0, 0] += 1.0
    R[:, 1, 1] += 1.0
    R[:, 2, 2] += 1.0
    R[theta < 1e-12] = np.eye(3)
    return R


def axis_angle_from_matrix(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to axis-angle with norm <= pi."""
    tr = float(np.trace(R))
    theta = math.acos(max(-1.0, min(1.0, (tr - 1.0) / 2.0)))
    if theta < 1e-12:
        return np.zeros(3)
    if math.pi - theta < 1e-6:
        # near-pi: axis from the symmetric part
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(A), 0.0))
        # fix signs using the largest component
        i = int(np.argmax(axis))
        if axis[i] > 0:
            axis[(i + 1) % 3] = math.copysign(axis[(i + 1) % 3], A[i, (i + 1) % 3])
            axis[(i + 2) % 3] = math.copysign(axis[(i + 2) % 3], A[i, (i + 2) % 3])
        axis /= np.linalg.norm(axis)
        return theta * axis
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return theta * v / (2.0 * math.sin(theta))


def wrap_axis_angle(rvec: np.ndarray) -> np.ndarray:
    """Reduce the angle into [0, pi], flipping the axis as needed."""
    theta = float(np.linalg.norm(rvec))
    if theta <= math.pi:
        return rvec
    wrapped = math.fmod(theta, 2 * math.pi)
    if wrapped > math.pi:
        wrapped -= 2 * math.pi
    return rvec * (wrapped / theta)


def euler_zyx(rvec) -> tuple[float, float, float]:
    """(yaw, pitch, roll) radians from R = Rz(roll)·Ry(yaw)·Rx(pitch).

    Camera axes: x right, y down, z into the scene; yaw is about y,
    pitch about x, roll about the optical axis. Report-friendly only —
    classifiers consume the axis-angle form directly.
    """
    R = rotation_matrix(rvec)
    yaw = -math.asin(max(-1.0, min(1.0, R[2, 0])))
    pitch = math.atan2(R[2, 1], R[2, 2])
    roll = math.atan2(R[1, 0], R[0, 0])
    return yaw, pitch, roll


def rvec_from_euler(yaw: float, pitch: float, roll: float) -> np.ndarray:
    Rz = rotation_matrix(np.array([0.0, 0.0, roll]))
    Ry = rotation_matrix(np.array([0.0, yaw, 0.0]))
    Rx = rotation_matrix(np.array([pitch, 0.0, 0.0]))
    return axis_angle_from_matrix(Rz @ Ry @ Rx)


# ---------------------------------------------------------------------------
# projection and the solver


def project(points3d, pose: Pose, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pin-hole forward map: rotate, translate, divide by depth, apply intrinsics."""
    pts = np.atleast_2d(np.asarray(points3d, dtype=float))
    cam = pts @ rotation_matrix(pose.rotation).T + pose.translation
    if np.any(cam[:, 2] <= 0):
        raise ProjectionError("point at nonpositive depth")
    u = intrinsics.fx * cam[:, 0] / cam[:, 2] + intrinsics.cx
    v = intrinsics.fy * cam[:, 1] / cam[:, 2] + intrinsics.cy
    return np.stack([u, v], axis=1)


def _project_batch(params: np.ndarray, pts: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """(B, 6) parameter rows -> (B, N, 2) projections; depth<=0 marked NaN."""
    R = _rotation_matrices(params[:, :3])
    cam = np.einsum("nj,bij->bni", pts, R) + params[:, None, 3:]
    z = cam[:, :, 2]
    bad = z <= 0
    z = np.where(bad, np.nan, z)
    u = K.fx * cam[:, :, 0] / z + K.cx
    v = K.fy * cam[:, :, 1] / z + K.cy
    return np.stack([u, v], axis=2)


def _residuals(params: np.ndarray, pts: np.ndarray, obs: np.ndarray, K) -> np.ndarray:
    proj = _project_batch(params[None, :], pts, K)[0]
    return (proj - obs).ravel()


def _cost(res: np.ndarray) -> float:
    if np.any(np.isnan(res)):
        return math.inf
    return float(res @ res)


def _grid_inits(pts: np.ndarray, obs: np.ndarray, K: CameraIntrinsics) -> list[np.ndarray]:
    """Coarse yaw/pitch grid candidates with centroid/scale translation estimates."""
    candidates = []
    spread2 = float(np.std(obs - [K.cx, K.cy]))
    u_mean = obs.mean(axis=0)
    for gy in (-math.pi / 4, 0.0, math.pi / 4):
        for gp in (-math.pi / 4, 0.0, math.pi / 4):
            rvec = rvec_from_euler(gy, gp, 0.0)
            rotated = pts @ rotation_matrix(rvec).T
            spread3 = float(np.std(rotated[:, :2]))
            tz = K.fx * spread3 / max(spread2, 1e-9)
            tz = max(tz, 1e-3)
            t = np.array(
                [
                    (u_mean[0] - K.cx) / K.fx * tz - rotated[:, 0].mean(),
                    (u_mean[1] - K.cy) / K.fy * tz - rotated[:, 1].mean(),
                    tz,
                ]
            )
            candidates.append(np.concatenate([rvec, t]))
    res0 = _project_batch(np.asarray(candidates), pts, K) - obs
    costs = np.nansum(res0**2, axis=(1, 2)) + np.isnan(res0).any(axis=(1, 2)) * 1e30
    order = np.argsort(costs)
    return [candidates[i] for i in order]


def _project_rt(R: np.ndarray, t: np.ndarray, pts: np.ndarray, K) -> tuple[np.ndarray, np.ndarray]:
    """Fast single-pose projection; returns (camera points, residual-ready uv)."""
    cam = pts @ R.T + t
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = K.fx * cam[:, 0] / z + K.cx
        v = K.fy * cam[:, 1] / z + K.cy
    uv = np.stack([u, v], axis=1)
    uv[z <= 0] = np.nan
    return cam, uv


def _gauss_newton(p0: np.ndarray, pts: np.ndarray, obs: np.ndarray, K) -> tuple[np.ndarray, float, bool]:
    """Levenberg-damped Gauss-Newton; returns (params, cost, converged).

    The rotation is stored as axis-angle but each step optimizes a local
    left-multiplied perturbation exp([dw]x)·R, whose Jacobian is exact and
    cheap: dP/dw = -[RX]x, dP/dt = I, chained through the pin-hole map.
    """
    R = rotation_matrix(p0[:3])
    t = p0[3:].copy()
    n = len(pts)
    cam, uv = _project_rt(R, t, pts, K)
    res = (uv - obs).ravel()
    cost = _cost(res)
    lam = 1e-3
    converged = False
    for _ in range(MAX_ITERATIONS):
        if cost == 0.0:
            converged = True
            break
        rot_pts = cam - t  # RX for every point
        rx, ry, rz = rot_pts[:, 0], rot_pts[:, 1], rot_pts[:, 2]
        inv_z = 1.0 / cam[:, 2]
        a = K.fx * inv_z  # du/dPx
        b = -K.fx * cam[:, 0] * inv_z**2  # du/dPz
        c = K.fy * inv_z  # dv/dPy
        d = -K.fy * cam[:, 1] * inv_z**2  # dv/dPz
        # chain d(u,v)/dP with dP/dw_k = e_k x RX and dP/dt = I, unrolled:
        # e0 x r = (0, -rz, ry), e1 x r = (rz, 0, -rx), e2 x r = (-ry, rx, 0)
        J = np.zeros((2 * n, 6))
        J[0::2, 0] = b * ry
        J[0::2, 1] = a * rz - b * rx
        J[0::2, 2] = -a * ry
        J[0::2, 3] = a
        J[0::2, 5] = b
        J[1::2, 0] = -c * rz + d * ry
        J[1::2, 1] = d * -rx
        J[1::2, 2] = c * rx
        J[1::2, 4] = c
        J[1::2, 5] = d
        g = J.T @ res
        if math.sqrt(g @ g) < 1e-9 * (1.0 + cost):
            converged = True  # stationary point within fp noise
            break
        A = J.T @ J
        diag = np.diag(np.diag(A)) + 1e-12 * np.eye(6)
        accepted = False
        step = None
        prev_cost = cost
        for _ in range(12):
            try:
                step = np.linalg.solve(A + lam * diag, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            R_new = rotation_matrix(step[:3]) @ R
            t_new = t + step[3:]
            cam_new, uv_new = _project_rt(R_new, t_new, pts, K)
            new_res = (uv_new - obs).ravel()
            new_cost = _cost(new_res)
            if new_cost < cost:
                R, t, cam = R_new, t_new, cam_new
                res, cost = new_res, new_cost
                lam = max(lam * 0.3, 1e-14)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # damping saturated: already at a (local) minimum
            converged = cost < math.inf
            break
        if np.linalg.norm(step) < STEP_TOLERANCE:
            converged = True
            break
        if prev_cost - cost <= 1e-12 * prev_cost:
            # improvement below fp noise: further iterations only thrash
            converged = True
            break
    return np.concatenate([axis_angle_from_matrix(R), t]), cost, converged


def solve_pnp(
    points2d,
    template: RigidTemplate,
    intrinsics: CameraIntrinsics,
    init: Pose | None = None,
) -> Pose:
    """Recover the pose whose projection of `template` best matches `points2d`.

    Warm-started from `init` when given (previous frame), otherwise from a
    coarse yaw/pitch grid with translation seeded from the point scale.
    Raises NoConvergenceError (carrying the best iterate) if no start reduces
    its initial reprojection error.
    """
    obs = np.asarray(points2d, dtype=float)
    if obs.shape != (len(template.ids), 2):
        raise ValueError(f"expected {len(template.ids)} image points")
    pts = template.points

    if init is not None:
        starts = [np.concatenate([init.rotation, init.translation])]
    else:
        starts = _grid_inits(pts, obs, intrinsics)[:3]

    best_p, best_cost = starts[0], math.inf
    any_improved = False
    for p0 in starts:
        c0 = _cost(_residuals(p0, pts, obs, intrinsics))
        p, cost, converged = _gauss_newton(p0, pts, obs, intrinsics)
        if cost < best_cost:
            best_p, best_cost = p, cost
        if cost < c0 or (converged and cost <= c0):
            any_improved = True
            if converged:
                break
    rms = math.sqrt(best_cost / len(pts)) if math.isfinite(best_cost) else math.inf
    if not any_improved or not math.isfinite(best_cost) or best_p[5] <= 0:
        fallback = best_p.copy()
        if fallback[5] <= 0:
            fallback[5] = 1e-3
        raise NoConvergenceError(
            f"reprojection error not reduced after {MAX_ITERATIONS} iterations",
            Pose(fallback[:3], fallback[3:], rms if math.isfinite(rms) else 0.0),
        )
    return Pose(best_p[:3], best_p[3:], rms)


# ---------------------------------------------------------------------------
# classification


def pose_features(pose: Pose, scale: float) -> np.ndarray:
    """6-vector (rotation, translation/scale); scale is the template span."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return np.concatenate([pose.rotation, pose.translation / scale])


def classify_pose(model: mlkit.MulticlassModel, features) -> PoseClass:
    """One-vs-rest argmax over the five classes (lost frames bypass this)."""
    if model is None:
        raise ValueError("pose classifier not trained")
    return PoseClass(mlkit.predict_class(model, features))
