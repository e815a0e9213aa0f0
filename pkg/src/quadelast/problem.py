"""Material law and the trigonometric benchmark problem.

The compliance tensor is the isotropic plane-strain law

    A tau = (1/2mu) (tau - lambda/(2mu+2lambda) tr(tau) I)

on symmetric matrices, extended to skew-symmetric matrices as a positive
multiple of the identity (``skew_factor``, by default 1/2mu so the one
formula above covers all of M).  The benchmark displacement

    u1 = cos(pi x) sin(2 pi y),    u2 = sin(pi x) cos(pi y)

drives the convergence studies; stress, rotation, body force and boundary
data are derived from it analytically.  Note u does not vanish on the whole
boundary, so the boundary data g = u|_dOmega must be carried through the
weak form's consistent boundary term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "LameParams",
    "Compliance",
    "ManufacturedSolution",
    "compliance_apply",
    "compliance_matrix",
    "trig_solution",
]


@dataclass(frozen=True)
class LameParams:
    """Lame constants with the admissible range mu > 0, lambda >= 0."""

    mu: float
    lam: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.lam >= 0:
            raise ValueError("lambda must be nonnegative")

    @classmethod
    def from_young_poisson(cls, E: float, nu: float) -> "LameParams":
        """Standard isotropic conversion; nu must lie in [0, 1/2)."""
        if not 0 <= nu < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 1/2)")
        return cls(mu=E / (2.0 * (1.0 + nu)),
                   lam=E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))


@dataclass(frozen=True)
class Compliance:
    """Compliance operator on 2x2 matrices, SPD for mu > 0, lambda >= 0."""

    params: LameParams
    skew_factor: float | None = None  # default 1/(2 mu)

    def __post_init__(self):
        if self.skew_factor is None:
            object.__setattr__(self, "skew_factor",
                               1.0 / (2.0 * self.params.mu))
        if not self.skew_factor > 0:
            raise ValueError("skew_factor must be positive")


def compliance_apply(A: Compliance, tau: np.ndarray) -> np.ndarray:
    """Apply the compliance to matrices of shape (..., 2, 2)."""
    tau = np.asarray(tau, dtype=float)
    mu, lam = A.params.mu, A.params.lam
    sym = 0.5 * (tau + np.swapaxes(tau, -1, -2))
    skw = tau - sym
    tr = sym[..., 0, 0] + sym[..., 1, 1]
    out = (sym - (lam / (2.0 * mu + 2.0 * lam)) * tr[..., None, None] * np.eye(2))
    return out / (2.0 * mu) + A.skew_factor * skw


def compliance_matrix(A: Compliance) -> np.ndarray:
    """4x4 matrix of the compliance on vec(tau) = (t11, t12, t21, t22)."""
    out = np.empty((4, 4))
    basis = np.eye(4).reshape(4, 2, 2)
    for j in range(4):
        out[:, j] = compliance_apply(A, basis[j]).reshape(4)
    return out


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form solution fields of the elasticity system.

    ``grad_u[..., i, j]`` is du_i/dx_j; ``g`` is the Dirichlet displacement
    trace (here simply u restricted to the boundary).  All closures accept
    points of shape (..., 2).
    """

    params: LameParams
    u: Callable[[np.ndarray], np.ndarray]
    grad_u: Callable[[np.ndarray], np.ndarray]
    p: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "g", self.u)


def linear_solution(params: LameParams,
                    grad: np.ndarray | None = None) -> ManufacturedSolution:
    """Linear displacement with constant stress and zero body force.

    The patch-test problem: every field lies in the coarsest discrete
    spaces, so a working method reproduces the triple to solver accuracy
    on any admissible mesh.
    """
    U = np.array([[0.3, 0.1], [0.2, -0.4]]) if grad is None else np.asarray(grad)
    mu, lam = params.mu, params.lam
    eps = 0.5 * (U + U.T)
    sig = 2.0 * mu * eps + lam * np.trace(U) * np.eye(2)
    rot = 0.5 * (U[0, 1] - U[1, 0])

    def u(x):
        return np.asarray(x) @ U.T

    def grad_u(x):
        return np.broadcast_to(U, np.asarray(x).shape[:-1] + (2, 2))

    def p(x):
        return np.broadcast_to(rot, np.asarray(x).shape[:-1])

    def sigma(x):
        return np.broadcast_to(sig, np.asarray(x).shape[:-1] + (2, 2))

    def f(x):
        return np.zeros(np.asarray(x).shape[:-1] + (2,))

    return ManufacturedSolution(params=params, u=u, grad_u=grad_u, p=p,
                                sigma=sigma, f=f)


def trig_solution(params: LameParams) -> ManufacturedSolution:
    """The trigonometric benchmark solution for given Lame constants."""
    mu, lam = params.mu, params.lam
    pi = np.pi

    def u(x):
        x = np.asarray(x)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([np.cos(pi * x1) * np.sin(2 * pi * x2),
                         np.sin(pi * x1) * np.cos(pi * x2)], axis=-1)

    def grad_u(x):
        x = np.asarray(x)
        x1, x2 = x[..., 0], x[..., 1]
        d11 = -pi * np.sin(pi * x1) * np.sin(2 * pi * x2)
        d12 = 2 * pi * np.cos(pi * x1) * np.cos(2 * pi * x2)
        d21 = pi * np.cos(pi * x1) * np.cos(pi * x2)
        d22 = -pi * np.sin(pi * x1) * np.sin(pi * x2)
        return np.stack([np.stack([d11, d12], axis=-1),
                         np.stack([d21, d22], axis=-1)], axis=-2)

    def p(x):
        x = np.asarray(x)
        x1, x2 = x[..., 0], x[..., 1]
        return 0.5 * pi * np.cos(pi * x1) * (2 * np.cos(2 * pi * x2)
                                             - np.cos(pi * x2))

    def sigma(x):
        x = np.asarray(x)
        x1, x2 = x[..., 0], x[..., 1]
        s1, s2 = np.sin(2 * pi * x2), np.sin(pi * x2)
        s11 = -pi * np.sin(pi * x1) * ((2 * mu + lam) * s1 + lam * s2)
        s22 = -pi * np.sin(pi * x1) * (lam * s1 + (2 * mu + lam) * s2)
        s12 = mu * pi * np.cos(pi * x1) * (2 * np.cos(2 * pi * x2)
                                           + np.cos(pi * x2))
        return np.stack([np.stack([s11, s12], axis=-1),
                         np.stack([s12, s22], axis=-1)], axis=-2)

    def f(x):
        x = np.asarray(x)
        x1, x2 = x[..., 0], x[..., 1]
        f1 = -pi**2 * np.cos(pi * x1) * ((6 * mu + lam) * np.sin(2 * pi * x2)
                                         + (lam + mu) * np.sin(pi * x2))
        f2 = -pi**2 * np.sin(pi * x1) * ((2 * mu + 2 * lam) * np.cos(2 * pi * x2)
                                         + (3 * mu + lam) * np.cos(pi * x2))
        return np.stack([f1, f2], axis=-1)

    return ManufacturedSolution(params=params, u=u, grad_u=grad_u, p=p,
                                sigma=sigma, f=f)
