"""Scalar level-set fields whose zero set is the material interface.

Convention: value < 0 on the enclosed side (Omega^-), value > 0 on the
side reaching the domain boundary (Omega^+).  Fields evaluate on
arrays of shape (..., 3) and broadcast.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class LevelSetField:
    """Level-set description of a closed interface.

    curvature_bound is the largest principal curvature magnitude over
    the zero set and reach the radius of a tubular neighborhood with
    unique closest-point projection; both are optional and feed only
    advisory resolution checks.
    """

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    curvature_bound: float | None = None
    reach: float | None = None
    name: str = "levelset"

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.asarray(self.value(pts), dtype=float)

    def grad(self, points, fd_step: float = 1e-6) -> np.ndarray:
        """Gradient; central differences with step fd_step when no
        analytic gradient was supplied (pass fd_step scaled by the mesh
        size)."""
        pts = np.asarray(points, dtype=float)
        if self.gradient is not None:
            g = np.asarray(self.gradient(pts), dtype=float)
            return np.broadcast_to(g, pts.shape).copy() if g.shape != pts.shape else g
        out = np.empty(pts.shape, dtype=float)
        for ax in range(3):
            dp = np.zeros(3)
            dp[ax] = fd_step
            out[..., ax] = (self(pts + dp) - self(pts - dp)) / (2.0 * fd_step)
        return out

    def unit_normal(self, points, fd_step: float = 1e-6) -> np.ndarray:
        g = self.grad(points, fd_step)
        nrm = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.any(nrm == 0.0):
            raise ValueError(f"vanishing gradient of '{self.name}' on the interface")
        return g / nrm


def plane_field(normal, offset: float) -> LevelSetField:
    """Plane interface n . x = offset with n normalized internally."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    off = float(offset)

    def value(p):
        return p @ n - off

    def gradient(p):
        return np.broadcast_to(n, p.shape)

    return LevelSetField(value, gradient, curvature_bound=0.0,
                         reach=np.inf, name="plane")


def sphere_field(center, radius: float) -> LevelSetField:
    """Sphere interface as the quadratic |x - c|^2 - r^2."""
    c = np.asarray(center, dtype=float)
    r = float(radius)

    def value(p):
        d = p - c
        return np.einsum("...i,...i->...", d, d) - r * r

    def gradient(p):
        return 2.0 * (p - c)

    return LevelSetField(value, gradient, curvature_bound=1.0 / r,
                         reach=r, name="sphere")


def orthocircle_field(width: float = 0.075) -> LevelSetField:
    """Three mutually orthogonal interlocked rings of tube width ~width.

    Zero set of  A*B*C - width^2*(1 + 3|x|^2)  with
    A = (x^2+y^2-1)^2 + z^2 and B, C its cyclic images.
    """
    w2 = float(width) ** 2

    def parts(p):
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        x2, y2, z2 = x * x, y * y, z * z
        A = (x2 + y2 - 1.0) ** 2 + z2
        B = (x2 + z2 - 1.0) ** 2 + y2
        C = (y2 + z2 - 1.0) ** 2 + x2
        return x, y, z, x2, y2, z2, A, B, C

    def value(p):
        x, y, z, x2, y2, z2, A, B, C = parts(p)
        return A * B * C - w2 * (1.0 + 3.0 * (x2 + y2 + z2))

    def gradient(p):
        x, y, z, x2, y2, z2, A, B, C = parts(p)
        qa, qb, qc = x2 + y2 - 1.0, x2 + z2 - 1.0, y2 + z2 - 1.0
        g = np.empty(p.shape, dtype=float)
        g[..., 0] = (4.0 * x * qa) * B * C + A * (4.0 * x * qb) * C + A * B * (2.0 * x) - w2 * 6.0 * x
        g[..., 1] = (4.0 * y * qa) * B * C + A * (2.0 * y) * C + A * B * (4.0 * y * qc) - w2 * 6.0 * y
        g[..., 2] = (2.0 * z) * B * C + A * (4.0 * z * qb) * C + A * B * (4.0 * z * qc) - w2 * 6.0 * z
        return g

    return LevelSetField(value, gradient, name="orthocircle")


def orthocircle_laplacian(points, width: float = 0.075) -> np.ndarray:
    """Laplacian of the orthocircle field (for manufactured right sides)."""
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    x2, y2, z2 = x * x, y * y, z * z
    qa, qb, qc = x2 + y2 - 1.0, x2 + z2 - 1.0, y2 + z2 - 1.0
    A = qa * qa + z2
    B = qb * qb + y2
    C = qc * qc + x2
    gA = np.stack([4.0 * x * qa, 4.0 * y * qa, 2.0 * z], axis=-1)
    gB = np.stack([4.0 * x * qb, 2.0 * y, 4.0 * z * qb], axis=-1)
    gC = np.stack([2.0 * x, 4.0 * y * qc, 4.0 * z * qc], axis=-1)
    lapA = 2.0 * (8.0 * x2 + 8.0 * y2 - 3.0)
    lapB = 2.0 * (8.0 * x2 + 8.0 * z2 - 3.0)
    lapC = 2.0 * (8.0 * y2 + 8.0 * z2 - 3.0)
    dot = lambda u, v: np.einsum("...i,...i->...", u, v)
    w2 = float(width) ** 2
    return (lapA * B * C + A * lapB * C + A * B * lapC
            + 2.0 * dot(gA, gB) * C + 2.0 * dot(gA, gC) * B + 2.0 * dot(gB, gC) * A
            - w2 * 18.0)
