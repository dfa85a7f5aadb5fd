"""Experiment systems: damped Toda lattice, spinning rigid body, damped quasilinear wave.

All factories return immutable ``PHSystem`` instances whose callables accept a
state vector or a column batch of states.
"""
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from phsystem import PHSystem
from quadrature import gauss_legendre_unit
from utils import as_columns

Control = Callable[[Union[float, np.ndarray]], Union[float, np.ndarray]]


def sin2t(t):
    return np.sin(2.0 * np.asarray(t, dtype=float))


def one_minus_sin(t):
    return 1.0 - np.sin(np.asarray(t, dtype=float))


def zero_control(t):
    return np.zeros_like(np.asarray(t, dtype=float))


def _input_columns(direction: np.ndarray, value, v: np.ndarray) -> np.ndarray:
    """direction * value shaped like v (value scalar, or one entry per batch column)."""
    cols = np.multiply.outer(direction, np.asarray(value, dtype=float))
    if np.ndim(v) == 2 and cols.ndim == 1:
        cols = np.repeat(cols[:, None], np.shape(v)[1], axis=1)
    return cols


# ---------------------------------------------------------------------------
# Toda lattice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TodaParams:
    n: int = 5
    gamma: Union[float, Sequence[float]] = 0.1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Toda lattice needs N >= 1, got {self.n}")
        gamma = np.broadcast_to(np.asarray(self.gamma, dtype=float), (self.n,))
        if np.any(gamma < 0):
            raise ValueError("damping parameters must be non-negative")
        object.__setattr__(self, "gamma", tuple(float(g) for g in gamma))

    @property
    def dim(self) -> int:
        return 2 * self.n


def make_toda(params: TodaParams, u: Control = sin2t) -> PHSystem:
    """Toda chain with exponential springs, z = (q, p), damping on p, input on p_1.

    H(z) = sum p_k^2/2 + sum_{k<N} exp(q_k - q_{k+1}) + exp(q_N) - q_1 - N.
    """
    n = params.n
    gamma = np.array(params.gamma)
    e_input = np.zeros(2 * n)
    e_input[n] = 1.0

    def hamiltonian(z):
        z = np.asarray(z, dtype=float)
        q, p = z[:n], z[n:]
        return (0.5 * np.sum(p * p, axis=0)
                + np.sum(np.exp(q[:-1] - q[1:]), axis=0)
                + np.exp(q[-1]) - q[0] - n)

    def eta(z):
        z = np.asarray(z, dtype=float)
        q, p = z[:n], z[n:]
        springs = np.exp(q[:-1] - q[1:])
        grad_q = np.zeros_like(q)
        grad_q[:-1] += springs
        grad_q[1:] -= springs
        grad_q[-1] += np.exp(q[-1])
        grad_q[0] -= 1.0
        return np.concatenate([grad_q, p], axis=0)

    def j_apply(v):
        v = np.asarray(v, dtype=float)
        return np.concatenate([v[n:], -v[:n]], axis=0)

    def r_apply(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        out[n:] = gamma.reshape((n,) + (1,) * (v.ndim - 1)) * v[n:]
        return out

    def b_apply(t, v):
        return _input_columns(e_input, u(t), v)

    return PHSystem(name="toda", dim=2 * n, hamiltonian=hamiltonian, eta=eta,
                    j_apply=j_apply, r_apply=r_apply, b_apply=b_apply, params=params)


# ---------------------------------------------------------------------------
# Spinning rigid body
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RigidBodyParams:
    inertias: tuple = (1.0, 1.0, 1.0)
    axis: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        inertias = tuple(float(x) for x in self.inertias)
        axis = tuple(float(x) for x in self.axis)
        if len(inertias) != 3 or len(axis) != 3:
            raise ValueError("rigid body needs three inertias and a three-component torque axis")
        if min(inertias) <= 0:
            raise ValueError("principal moments of inertia must be positive")
        object.__setattr__(self, "inertias", inertias)
        object.__setattr__(self, "axis", axis)


def make_rigid_body(params: RigidBodyParams, u: Control = sin2t) -> PHSystem:
    """Angular momenta z with H = z^T Q z / 2, Q = diag(1/I_i), torque b u(t).

    J acts on v = eta(z) = Qz as J(v) = (Q^-1 v) x v.
    """
    inertia = np.array(params.inertias)
    axis = np.array(params.axis)

    def _shaped(vec, v):
        return vec.reshape((3,) + (1,) * (np.ndim(v) - 1))

    def hamiltonian(z):
        z = np.asarray(z, dtype=float)
        return 0.5 * np.sum(z * z / _shaped(inertia, z), axis=0)

    def eta(z):
        z = np.asarray(z, dtype=float)
        return z / _shaped(inertia, z)

    def j_apply(v):
        v = np.asarray(v, dtype=float)
        return np.cross(_shaped(inertia, v) * v, v, axis=0)

    def r_apply(v):
        return np.zeros_like(np.asarray(v, dtype=float))

    def b_apply(t, v):
        return _input_columns(axis, u(t), v)

    return PHSystem(name="rigid_body", dim=3, hamiltonian=hamiltonian, eta=eta,
                    j_apply=j_apply, r_apply=r_apply, b_apply=b_apply, params=params)


# ---------------------------------------------------------------------------
# Damped quasilinear wave, mixed P0/P1 semi-discretization on [0, ell]
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaveParams:
    n: int = 10
    ell: float = 10.0
    gamma: float = 0.1
    nu: float = 0.0
    rf_quad_nodes: int = 10

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one interior grid point, got N={self.n}")
        if not self.ell > 0:
            raise ValueError("domain length must be positive")
        if self.gamma < 0 or self.nu < 0:
            raise ValueError("friction and viscosity must be non-negative")
        if self.rf_quad_nodes < 1:
            raise ValueError("friction quadrature needs at least one node")

    @property
    def h(self) -> float:
        return self.ell / (self.n + 1)

    @property
    def dim(self) -> int:
        return 2 * self.n + 3


@dataclass(frozen=True, eq=False)
class WaveOperators:
    """Assembled matrices; rho lives on the N+1 cells, v on the N+2 nodes."""

    h: float
    D: np.ndarray            # (N+1, N+2) forward differences
    M: np.ndarray            # (N+2, N+2) unit-scaled P1 mass
    stiffness: np.ndarray    # (N+2, N+2) P1 stiffness, scaled by 1/h
    C: np.ndarray            # block diag(h Id, h M)
    B2: np.ndarray           # (N+2, 2) boundary input
    midpoints: np.ndarray
    nodes: np.ndarray
    quad_nodes: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)


def wave_operators(params: WaveParams) -> WaveOperators:
    n_cells, n_nodes = params.n + 1, params.n + 2
    h = params.h
    mass = np.zeros((n_nodes, n_nodes))
    stiffness = np.zeros((n_nodes, n_nodes))
    local_mass = np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])
    local_stiffness = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    for c in range(n_cells):
        mass[c:c + 2, c:c + 2] += local_mass
        stiffness[c:c + 2, c:c + 2] += local_stiffness

    D = np.zeros((n_cells, n_nodes))
    D[np.arange(n_cells), np.arange(n_cells)] = -1.0
    D[np.arange(n_cells), np.arange(1, n_nodes)] = 1.0

    C = np.zeros((n_cells + n_nodes, n_cells + n_nodes))
    C[:n_cells, :n_cells] = h * np.eye(n_cells)
    C[n_cells:, n_cells:] = h * mass

    B2 = np.zeros((n_nodes, 2))
    B2[0, 0] = 1.0
    B2[-1, 1] = -1.0

    rule = gauss_legendre_unit(params.rf_quad_nodes)
    return WaveOperators(
        h=h, D=D, M=mass, stiffness=stiffness, C=C, B2=B2,
        midpoints=(np.arange(n_cells) + 0.5) * h,
        nodes=np.arange(n_nodes) * h,
        quad_nodes=rule.nodes, quad_weights=rule.weights,
    )


def psi(v):
    """Friction weight (1 + v^2)/sqrt(1 + v^2), evaluated as sqrt(1 + v^2)."""
    return np.sqrt(1.0 + np.square(v))


def friction_action(ops: WaveOperators, v2) -> np.ndarray:
    """R_F(v2) v2 without forming R_F: the P1 load of psi(v_h) v_h cell by cell."""
    cols, single = as_columns(v2)
    xi, w = ops.quad_nodes, ops.quad_weights
    phi_left, phi_right = 1.0 - xi, xi
    vq = cols[:-1, None, :] * phi_left[None, :, None] + cols[1:, None, :] * phi_right[None, :, None]
    flux = psi(vq) * vq
    out = np.zeros_like(cols)
    out[:-1] += ops.h * np.einsum("q,cqn->cn", w * phi_left, flux)
    out[1:] += ops.h * np.einsum("q,cqn->cn", w * phi_right, flux)
    return out[:, 0] if single else out


def friction_matrix(ops: WaveOperators, v2: np.ndarray) -> np.ndarray:
    """Assembled P1 mass matrix weighted with psi(v_h) for one nodal vector v2."""
    v2 = np.asarray(v2, dtype=float)
    xi, w = ops.quad_nodes, ops.quad_weights
    shape = np.vstack([1.0 - xi, xi])
    mat = np.zeros((v2.size, v2.size))
    for c in range(v2.size - 1):
        weight = w * psi(v2[c] * (1.0 - xi) + v2[c + 1] * xi)
        mat[c:c + 2, c:c + 2] += ops.h * (shape * weight) @ shape.T
    return mat


def make_damped_wave(params: WaveParams, g0: Control = one_minus_sin, gl: Control = one_minus_sin) -> PHSystem:
    """C_h dw/dt = (J_h - R_h(w)) eta(w) + B_h (g0, gl), pressure p(rho) = rho + rho^3.

    H_h(w) = w^T C_h w / 2 + h |w_1^2|^2 / 4, eta(w) = (w_1 + w_1^3, w_2).
    """
    ops = wave_operators(params)
    n_cells = params.n + 1
    h = ops.h
    e_left = np.zeros(params.dim)
    e_left[n_cells] = 1.0
    e_right = np.zeros(params.dim)
    e_right[-1] = 1.0

    def hamiltonian(w):
        w = np.asarray(w, dtype=float)
        w1, w2 = w[:n_cells], w[n_cells:]
        return (0.5 * h * np.sum(w1 * w1, axis=0)
                + 0.5 * h * np.sum(w2 * (ops.M @ w2), axis=0)
                + 0.25 * h * np.sum(w1 ** 4, axis=0))

    def eta(w):
        w = np.asarray(w, dtype=float)
        w1 = w[:n_cells]
        return np.concatenate([w1 + w1 ** 3, w[n_cells:]], axis=0)

    def j_apply(v):
        v = np.asarray(v, dtype=float)
        v1, v2 = v[:n_cells], v[n_cells:]
        return np.concatenate([-ops.D @ v2, ops.D.T @ v1], axis=0)

    def r_apply(v):
        v = np.asarray(v, dtype=float)
        v2 = v[n_cells:]
        out = np.zeros_like(v)
        if params.gamma:
            out[n_cells:] += params.gamma * friction_action(ops, v2)
        if params.nu:
            out[n_cells:] += params.nu * (ops.stiffness @ v2)
        return out

    def b_apply(t, v):
        return _input_columns(e_left, g0(t), v) - _input_columns(e_right, gl(t), v)

    return PHSystem(name="wave", dim=params.dim, hamiltonian=hamiltonian, eta=eta,
                    j_apply=j_apply, r_apply=r_apply, b_apply=b_apply, mass=ops.C, params=params)


def wave_grid_state(params: WaveParams, rho_fn: Callable, v_fn: Callable) -> np.ndarray:
    """rho sampled at cell midpoints and v at grid points, stacked as (w_1, w_2)."""
    ops = wave_operators(params)
    return np.concatenate([np.asarray(rho_fn(ops.midpoints), dtype=float),
                           np.asarray(v_fn(ops.nodes), dtype=float)])


def wave_reference_initial_state(params: WaveParams) -> np.ndarray:
    """rho_0 = 1 + sin(pi x / ell)/2, v_0 = (4x/ell - 2)^3."""
    ell = params.ell
    return wave_grid_state(params,
                           lambda x: 1.0 + 0.5 * np.sin(np.pi * x / ell),
                           lambda x: (4.0 * x / ell - 2.0) ** 3)
