"""Independent reference computations used to check the library.

Nothing here imports the code paths it checks beyond the public data types.
"""

import math

import numpy as np


def central_diff_jacobian(fn, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fn(x))
    J = np.zeros((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        J[:, j] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * step)
    return J


def rotate(v, yaw):
    R = np.array([[math.cos(yaw), -math.sin(yaw)], [math.sin(yaw), math.cos(yaw)]])
    return R @ np.asarray(v, dtype=float)


def monte_carlo_covariance(fn, mean, cov, n, seed=0):
    rng = np.random.default_rng(seed)
    samples = rng.multivariate_normal(mean, cov, size=n)
    out = np.array([fn(s) for s in samples])
    return np.cov(out, rowvar=False)


class LinearKF:
    """Textbook linear Kalman filter on ``[x, y, vx, vy, ax, ay]`` (constant acceleration)."""

    def __init__(self, x0, P0, q_diag):
        self.x = np.array(x0, dtype=float)
        self.P = np.array(P0, dtype=float)
        self.q = np.asarray(q_diag, dtype=float)

    @staticmethod
    def transition(dt):
        A = np.eye(6)
        A[0, 2] = A[1, 3] = dt
        A[0, 4] = A[1, 5] = 0.5 * dt * dt
        A[2, 4] = A[3, 5] = dt
        return A

    def predict(self, dt):
        if dt == 0:
            return
        A = self.transition(dt)
        self.x = A @ self.x
        self.P = A @ self.P @ A.T + np.diag(self.q) * dt
        self.P = 0.5 * (self.P + self.P.T)

    def update(self, C, z, R):
        S = C @ self.P @ C.T + R
        K = self.P @ C.T @ np.linalg.inv(S)
        self.x = self.x + K @ (z - C @ self.x)
        self.P = (np.eye(6) - K @ C) @ self.P
        self.P = 0.5 * (self.P + self.P.T)


def brute_force_ate(truth_rows, est_rows):
    """Mean distance with a plain nearest-stamp search; rows are ``(t, x, y)``."""
    total, n = 0.0, 0
    gaps = [est_rows[i + 1][0] - est_rows[i][0] for i in range(len(est_rows) - 1)]
    gaps.sort()
    if gaps:
        m = len(gaps)
        median = gaps[m // 2] if m % 2 else 0.5 * (gaps[m // 2 - 1] + gaps[m // 2])
        max_gap = 0.5 * median
    else:
        max_gap = 1e-6
    for te, xe, ye in est_rows:
        best = None
        for tt, xt, yt in truth_rows:
            d = abs(tt - te)
            if best is None or d < best[0]:
                best = (d, xt, yt)
        if best[0] <= max_gap:
            total += math.sqrt((best[1] - xe) ** 2 + (best[2] - ye) ** 2)
            n += 1
    return total / n, n


def raycast_voxels(x, y, yaw, segments, fov, rays, max_range, voxel):
    """Scalar ray caster: distinct voxel keys hit by one scan."""
    keys = set()
    for i in range(rays):
        if rays == 1:
            a = yaw
        else:
            a = yaw - fov / 2 + fov * i / (rays - 1)
        dx, dy = math.cos(a), math.sin(a)
        best = math.inf
        for x1, y1, x2, y2 in segments:
            ex, ey = x2 - x1, y2 - y1
            den = dx * (-ey) + dy * ex
            if den == 0:
                continue
            wx, wy = x1 - x, y1 - y
            t = (wx * (-ey) + wy * ex) / den
            u = (dx * wy - dy * wx) / den
            if t >= 0 and 0 <= u <= 1 and t <= max_range:
                best = min(best, t)
        if best < math.inf:
            px, py = x + best * dx, y + best * dy
            keys.add((math.floor(px / voxel), math.floor(py / voxel)))
    return keys
