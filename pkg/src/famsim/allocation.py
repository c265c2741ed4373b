"""Rotor geometry, the generalized thrust/torque coupling matrix and the
box-constrained least-squares mapping from a wrench command to squared
rotor speeds.

Thrust of rotor i is k_f * w_i^2 along its (body-frame) direction e_i; the
reaction drag torque is spin_i * k_tau * w_i^2 along the same axis.  The
optimization variable throughout is the vector of SQUARED speeds, bounded
to [0, omega_max^2]; physical speeds are sqrt at the output boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rotations import skew


@dataclass(frozen=True)
class Rotor:
    """Thrust direction (unit, body frame), position [m] and spin sign."""
    direction: np.ndarray
    position: np.ndarray
    spin: int

    def __post_init__(self):
        d = np.asarray(self.direction, float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError(f"rotor direction must be a unit vector, got {d}")
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "position", np.asarray(self.position, float))
        if self.spin not in (-1, 1):
            raise ValueError(f"spin must be -1 or +1, got {self.spin}")


@dataclass(frozen=True)
class RotorConfig:
    rotors: tuple[Rotor, ...]
    k_f: float          # N / (rad/s)^2
    k_tau: float        # N m / (rad/s)^2
    omega_max: float    # rad/s

    def __post_init__(self):
        if len(self.rotors) == 0:
            raise ValueError("rotor list is empty")
        if not (self.k_f > 0.0 and self.k_tau > 0.0 and self.omega_max > 0.0):
            raise ValueError("k_f, k_tau and omega_max must be positive")

    @property
    def n(self) -> int:
        return len(self.rotors)

    @property
    def cap(self) -> float:
        """Upper bound on squared speed."""
        return self.omega_max ** 2


def ring_config(count: int, radius: float, tilt: float, k_f: float, k_tau: float,
                omega_max: float, azimuth0: float = 0.0) -> RotorConfig:
    """Symmetric ring of rotors, tilted tangentially with alternating lean
    and alternating spin.  tilt is the angle between each thrust axis and
    the platform z axis [rad]; azimuth0 rotates the whole ring about z
    (the lateral-force capability of the ring is anisotropic, so the ring
    orientation relative to the body axes is a real design choice)."""
    rotors = []
    for i in range(count):
        az = azimuth0 + 2.0 * math.pi * i / count
        radial = np.array([math.cos(az), math.sin(az), 0.0])
        tangent = np.array([-math.sin(az), math.cos(az), 0.0])
        lean = 1 if i % 2 == 0 else -1
        direction = math.cos(tilt) * np.array([0.0, 0.0, 1.0]) + lean * math.sin(tilt) * tangent
        # spin opposite to the lean: this pairing keeps the worst-case rotor
        # farther from the zero-thrust bound at large commanded tilts
        rotors.append(Rotor(direction=direction / np.linalg.norm(direction),
                            position=radius * radial,
                            spin=-lean))
    return RotorConfig(rotors=tuple(rotors), k_f=k_f, k_tau=k_tau, omega_max=omega_max)


def coupling_matrix(cfg: RotorConfig) -> np.ndarray:
    """6 x n map from squared rotor speeds to the body-frame wrench.

    Column i is [k_f e_i; (skew(k_f r_i) + spin_i k_tau I) e_i].
    """
    B = np.zeros((6, cfg.n))
    for i, r in enumerate(cfg.rotors):
        B[0:3, i] = cfg.k_f * r.direction
        B[3:6, i] = (skew(cfg.k_f * r.position) + r.spin * cfg.k_tau * np.eye(3)) @ r.direction
    return B


def actuation_rank(cfg: RotorConfig) -> tuple[int, float]:
    """Numerical rank and condition number of the coupling matrix."""
    s = np.linalg.svd(coupling_matrix(cfg), compute_uv=False)
    tol = 1e-9 * s[0]
    rank = int((s > tol).sum())
    cond = float(s[0] / s[-1]) if s[-1] > 0.0 else math.inf
    return rank, cond


def envelope(cfg: RotorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis attainable body-frame wrench bounds over the speed box."""
    B = coupling_matrix(cfg)
    lo = cfg.cap * np.minimum(B, 0.0).sum(axis=1)
    hi = cfg.cap * np.maximum(B, 0.0).sum(axis=1)
    return lo, hi


def bounded_lstsq(A: np.ndarray, b: np.ndarray, lower: np.ndarray,
                  upper: np.ndarray) -> np.ndarray:
    """min ||A x - b||_2 subject to lower <= x <= upper.

    Active-set sweep in the style of the bounded-variable least-squares
    algorithm: free one violated bound at a time (most negative KKT
    multiplier first), re-solve on the free set, and walk back to the box
    when the unconstrained step leaves it.  Deterministic; bounds are
    satisfied exactly on return.
    """
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    m, n = A.shape
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    x = lower.copy()
    free = np.zeros(n, dtype=bool)
    at_upper = np.zeros(n, dtype=bool)
    tol = 1e-11 * max(1.0, float(np.abs(A.T @ b).max()))

    for _ in range(8 * n * (n + 1)):
        g = A.T @ (b - A @ x)  # negative gradient
        score = np.where(free, -np.inf, np.where(at_upper, -g, g))
        j = int(np.argmax(score))
        if score[j] <= tol:
            break
        free[j] = True
        at_upper[j] = False
        for _ in range(2 * n + 2):
            idx = np.flatnonzero(free)
            rhs = b - A[:, ~free] @ x[~free]
            z, *_ = np.linalg.lstsq(A[:, idx], rhs, rcond=None)
            lo_i, hi_i = lower[idx], upper[idx]
            if ((z >= lo_i) & (z <= hi_i)).all():
                x[idx] = z
                break
            # longest feasible step toward z, then pin the blocking variable
            xf = x[idx]
            dz = z - xf
            alpha = 1.0
            blocker = -1
            block_hi = False
            for k, d in enumerate(dz):
                if d > 1e-300 and z[k] > hi_i[k]:
                    a = (hi_i[k] - xf[k]) / d
                    if a < alpha:
                        alpha, blocker, block_hi = a, k, True
                elif d < -1e-300 and z[k] < lo_i[k]:
                    a = (lo_i[k] - xf[k]) / d
                    if a < alpha:
                        alpha, blocker, block_hi = a, k, False
            xf = xf + alpha * dz
            if blocker < 0:
                x[idx] = np.clip(xf, lo_i, hi_i)
                break
            jb = idx[blocker]
            xf[blocker] = upper[jb] if block_hi else lower[jb]
            x[idx] = np.clip(xf, lo_i, hi_i)
            free[jb] = False
            at_upper[jb] = block_hi
            if not free.any():
                break
    return np.clip(x, lower, upper)


def allocate(u_wrench, R_A, cfg: RotorConfig,
             weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Squared rotor speeds realizing a world-frame wrench command.

    The command is mapped into the body frame, then solved as a bounded
    least-squares problem over [0, omega_max^2].  Returns (omega_sq,
    residual) where residual = achieved - commanded wrench in the world
    frame; an unreachable command shows up there, never as an exception.

    With `weights` (6 per-row factors) the trade-off among unmet wrench
    components is reweighted; the closed loop weights the torque rows
    heavily, because near the boundary of the attainable set an unmet
    torque destabilizes the attitude while an unmet force merely displaces.
    The returned residual is always the plain achieved-minus-commanded
    difference.
    """
    u_wrench = np.asarray(u_wrench, float)
    R_A = np.asarray(R_A, float)
    target = np.concatenate([R_A.T @ u_wrench[0:3], R_A.T @ u_wrench[3:6]])
    B = coupling_matrix(cfg)
    if weights is None:
        A, b = B, target
    else:
        w = np.asarray(weights, float).reshape(6, 1)
        A, b = w * B, w.ravel() * target
    omega_sq = bounded_lstsq(A, b, np.zeros(cfg.n), np.full(cfg.n, cfg.cap))
    achieved = B @ omega_sq
    residual = np.concatenate([R_A @ achieved[0:3], R_A @ achieved[3:6]]) - u_wrench
    return omega_sq, residual


def wrench_from_speeds(omega_sq, R_A, cfg: RotorConfig) -> np.ndarray:
    """Forward map: world-frame wrench produced by squared rotor speeds."""
    omega_sq = np.asarray(omega_sq, float)
    if (omega_sq < 0.0).any():
        raise ValueError("squared rotor speeds must be nonnegative")
    R_A = np.asarray(R_A, float)
    w = coupling_matrix(cfg) @ omega_sq
    return np.concatenate([R_A @ w[0:3], R_A @ w[3:6]])
