"""Jitted damped-least-squares core shared by the IK solver and map builder.

The burst function iterates FK + DLS toward a target camera frame inside a
joint box until the pose tolerance is met or the iteration budget runs out.
It is pure numerics (no collision checks) so it compiles under numba; the
same body runs uncompiled if numba is unavailable.
"""

from __future__ import annotations

import numpy as np

NUM_JOINTS = 7


def _dls_burst_impl(axes, kmats, k2mats, tn_rot, tn_t, base_rot, base_t,
                    cam_rot, cam_t, lo, hi, q0, target_rot, target_p,
                    max_iters, pos_tol, rot_tol, damping, clamp_pos,
                    clamp_rot, use_rot):
    """Iterate DLS toward (target_rot, target_p); returns (q, converged, iters).

    Levenberg-style damping grows while the residual worsens and shrinks on
    progress. With use_rot=False the rotational error rows are zeroed
    (position-only feasibility probes).
    """
    n = NUM_JOINTS
    q = q0.copy()
    origins = np.empty((n, 3))
    axes_w = np.empty((n, 3))
    e = np.empty(6)
    jac = np.empty((6, n))
    mu = 1.0
    prev_err = 1e30
    iters = 0
    for it in range(max_iters):
        iters = it + 1
        # Forward kinematics: cumulative rotation R and position p.
        rot = base_rot.copy()
        p = base_t.copy()
        for i in range(n):
            for r in range(3):
                origins[i, r] = p[r]
                axes_w[i, r] = (rot[r, 0] * axes[i, 0] + rot[r, 1] * axes[i, 1]
                                + rot[r, 2] * axes[i, 2])
            s = np.sin(q[i])
            c = 1.0 - np.cos(q[i])
            joint_rot = s * kmats[i] + c * k2mats[i]
            for r in range(3):
                joint_rot[r, r] += 1.0
            rot = np.dot(rot, joint_rot)
            # Translation of to_next happens in the rotated joint frame,
            # before its rotation part is folded in.
            for r in range(3):
                p[r] += (rot[r, 0] * tn_t[i, 0] + rot[r, 1] * tn_t[i, 1]
                         + rot[r, 2] * tn_t[i, 2])
            rot = np.dot(rot, tn_rot[i])
        cam_p = np.empty(3)
        for r in range(3):
            cam_p[r] = p[r] + (rot[r, 0] * cam_t[0] + rot[r, 1] * cam_t[1]
                               + rot[r, 2] * cam_t[2])
        cam_r = np.dot(rot, cam_rot)

        # Pose error: position difference and rotation log of Rt @ Rc^T.
        for r in range(3):
            e[r] = target_p[r] - cam_p[r]
        if use_rot:
            m = np.dot(target_rot, cam_r.T)
            cos_a = (m[0, 0] + m[1, 1] + m[2, 2] - 1.0) / 2.0
            if cos_a > 1.0:
                cos_a = 1.0
            if cos_a < -1.0:
                cos_a = -1.0
            angle = np.arccos(cos_a)
            v0 = 0.5 * (m[2, 1] - m[1, 2])
            v1 = 0.5 * (m[0, 2] - m[2, 0])
            v2 = 0.5 * (m[1, 0] - m[0, 1])
            if angle < 1e-8:
                e[3] = v0
                e[4] = v1
                e[5] = v2
            elif angle > np.pi - 1e-6:
                b0 = (m[0, 0] + 1.0) / 2.0
                b1 = (m[1, 1] + 1.0) / 2.0
                b2 = (m[2, 2] + 1.0) / 2.0
                if b0 >= b1 and b0 >= b2:
                    d = np.sqrt(b0) if b0 > 1e-18 else 1e-9
                    a0, a1, a2 = b0 / d, (m[1, 0] + m[0, 1]) / (4.0 * d), (m[2, 0] + m[0, 2]) / (4.0 * d)
                elif b1 >= b2:
                    d = np.sqrt(b1) if b1 > 1e-18 else 1e-9
                    a0, a1, a2 = (m[0, 1] + m[1, 0]) / (4.0 * d), b1 / d, (m[2, 1] + m[1, 2]) / (4.0 * d)
                else:
                    d = np.sqrt(b2) if b2 > 1e-18 else 1e-9
                    a0, a1, a2 = (m[0, 2] + m[2, 0]) / (4.0 * d), (m[1, 2] + m[2, 1]) / (4.0 * d), b2 / d
                nrm = np.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
                if nrm < 1e-12:
                    nrm = 1.0
                a0, a1, a2 = a0 / nrm, a1 / nrm, a2 / nrm
                if a0 * v0 + a1 * v1 + a2 * v2 < 0.0:
                    a0, a1, a2 = -a0, -a1, -a2
                e[3] = angle * a0
                e[4] = angle * a1
                e[5] = angle * a2
            else:
                sc = angle / np.sin(angle)
                e[3] = sc * v0
                e[4] = sc * v1
                e[5] = sc * v2
        else:
            e[3] = 0.0
            e[4] = 0.0
            e[5] = 0.0

        pe = np.sqrt(e[0] ** 2 + e[1] ** 2 + e[2] ** 2)
        re = np.sqrt(e[3] ** 2 + e[4] ** 2 + e[5] ** 2)
        if pe <= pos_tol and (not use_rot or re <= rot_tol):
            return q, True, iters

        err = pe + re
        if err > prev_err + 1e-12:
            mu = min(mu * 3.0, 1e4)
        else:
            mu = max(mu * 0.7, 1e-3)
        prev_err = err

        if pe > clamp_pos:
            sc = clamp_pos / pe
            e[0] *= sc
            e[1] *= sc
            e[2] *= sc
        if re > clamp_rot:
            sc = clamp_rot / re
            e[3] *= sc
            e[4] *= sc
            e[5] *= sc

        for i in range(n):
            rx = cam_p[0] - origins[i, 0]
            ry = cam_p[1] - origins[i, 1]
            rz = cam_p[2] - origins[i, 2]
            jac[0, i] = axes_w[i, 1] * rz - axes_w[i, 2] * ry
            jac[1, i] = axes_w[i, 2] * rx - axes_w[i, 0] * rz
            jac[2, i] = axes_w[i, 0] * ry - axes_w[i, 1] * rx
            jac[3, i] = axes_w[i, 0]
            jac[4, i] = axes_w[i, 1]
            jac[5, i] = axes_w[i, 2]

        jjt = np.dot(jac, jac.T)
        lam = damping + mu * (e[0] ** 2 + e[1] ** 2 + e[2] ** 2
                              + e[3] ** 2 + e[4] ** 2 + e[5] ** 2)
        for r in range(6):
            jjt[r, r] += lam
        dq = np.dot(jac.T, np.linalg.solve(jjt, e))
        for i in range(n):
            v = q[i] + dq[i]
            if v < lo[i]:
                v = lo[i]
            if v > hi[i]:
                v = hi[i]
            q[i] = v
    return q, False, iters


try:
    from numba import njit

    dls_burst = njit(cache=True)(_dls_burst_impl)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard speed dependency
    dls_burst = _dls_burst_impl
    HAVE_NUMBA = False


def burst_args(chain):
    """The static chain arrays dls_burst needs, in positional order."""
    return (chain.axes, chain._k, chain._k2, chain._tn_rot, chain._tn_t,
            chain._base_rot, chain._base_t, chain._cam_rot, chain._cam_t)


def warmup(chain) -> None:
    """Trigger JIT compilation once (cached on disk afterwards)."""
    q = np.zeros(NUM_JOINTS)
    dls_burst(*burst_args(chain), chain.joint_limits[:, 0].copy(),
              chain.joint_limits[:, 1].copy(), q, np.eye(3), np.zeros(3),
              1, 1e-3, 1e-2, 1e-3, 0.2, 0.5, True)
