"""Gauss pseudospectral building blocks.

Legendre-Gauss nodes/weights, the affine time map, barycentric Lagrange
interpolation over the augmented basis {-1} U nodes, the differentiation
matrix used to collocate dynamics at the nodes, and the quadrature-based
terminal-state estimate.
"""

from dataclasses import dataclass, field

import numpy as np

from ._accel import maybe_njit

__all__ = [
    "CollocationGrid",
    "legendre_gauss",
    "time_map",
    "inverse_time_map",
    "differentiation_matrix",
    "terminal_state",
    "interpolate",
    "lagrange_coefficients",
    "quadrature",
    "solve_lti_collocation",
    "make_grid",
]


@maybe_njit
def _legendre_newton(order, tol, max_iter):
    """Roots of the Legendre polynomial P_order by vectorized Newton steps."""
    k = np.arange(order, dtype=np.float64)
    # Chebyshev-like initial guess, accurate to O(order^-2)
    x = np.cos(np.pi * (k + 0.75) / (order + 0.5))
    pp = np.ones_like(x)
    for _ in range(max_iter):
        p_prev = np.ones_like(x)
        p = x.copy()
        for n in range(2, order + 1):
            p_new = ((2 * n - 1) * x * p - (n - 1) * p_prev) / n
            p_prev = p
            p = p_new
        pp = order * (x * p - p_prev) / (x * x - 1.0)
        dx = p / pp
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            # one more recurrence pass so pp matches the converged x
            p_prev = np.ones_like(x)
            p = x.copy()
            for n in range(2, order + 1):
                p_new = ((2 * n - 1) * x * p - (n - 1) * p_prev) / n
                p_prev = p
                p = p_new
            pp = order * (x * p - p_prev) / (x * x - 1.0)
            break
    w = 2.0 / ((1.0 - x * x) * pp * pp)
    return x, w


def legendre_gauss(order: int):
    """Nodes and weights of the ``order``-point Legendre-Gauss rule on (-1, 1).

    Nodes are the roots of P_order, returned ascending; weights are
    2 / ((1 - tau^2) P'_order(tau)^2). Exact for polynomials up to degree
    2*order - 1.
    """
    if order < 1:
        raise ValueError(f"quadrature order must be >= 1, got {order}")
    if order == 1:
        return np.array([0.0]), np.array([2.0])
    nodes, weights = _legendre_newton(order, 1e-14, 100)
    idx = np.argsort(nodes)
    return np.ascontiguousarray(nodes[idx]), np.ascontiguousarray(weights[idx])


def time_map(tau, t_0: float, t_f: float):
    """Map tau in [-1, 1] to physical time t in [t_0, t_f]."""
    if t_f <= t_0:
        raise ValueError(f"need t_f > t_0, got [{t_0}, {t_f}]")
    return ((t_f - t_0) * np.asarray(tau) + (t_f + t_0)) / 2.0


def inverse_time_map(t, t_0: float, t_f: float):
    """Map physical time t in [t_0, t_f] to tau in [-1, 1]."""
    if t_f <= t_0:
        raise ValueError(f"need t_f > t_0, got [{t_0}, {t_f}]")
    return (2.0 * np.asarray(t) - (t_f + t_0)) / (t_f - t_0)


def _barycentric_weights(points: np.ndarray) -> np.ndarray:
    n = len(points)
    lam = np.ones(n)
    for i in range(n):
        diff = points[i] - np.delete(points, i)
        # accumulate in log space to survive large orders
        lam[i] = np.prod(np.sign(diff)) * np.exp(-np.sum(np.log(np.abs(diff))))
    return lam / np.max(np.abs(lam))


@dataclass(frozen=True)
class CollocationGrid:
    """Immutable Legendre-Gauss collocation grid on a horizon [t_0, t_f].

    ``basis`` is {-1} followed by the interior Gauss nodes; states are
    interpolated over the full basis, controls over the nodes only.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    t_0: float
    t_f: float
    basis: np.ndarray = field(repr=False)
    basis_bary: np.ndarray = field(repr=False)
    node_bary: np.ndarray = field(repr=False)
    diff_matrix: np.ndarray = field(repr=False)

    @property
    def node_times(self) -> np.ndarray:
        return time_map(self.nodes, self.t_0, self.t_f)

    @property
    def half_span(self) -> float:
        return (self.t_f - self.t_0) / 2.0


def make_grid(order: int, t_0: float = 0.0, t_f: float = 30.0) -> CollocationGrid:
    if order < 1:
        raise ValueError(f"collocation order must be >= 1, got {order}")
    nodes, weights = legendre_gauss(order)
    basis = np.concatenate(([-1.0], nodes))
    basis_bary = _barycentric_weights(basis)
    node_bary = _barycentric_weights(nodes)
    diff = _diff_matrix(basis, basis_bary, order)
    return CollocationGrid(
        order=order,
        nodes=nodes,
        weights=weights,
        t_0=float(t_0),
        t_f=float(t_f),
        basis=basis,
        basis_bary=basis_bary,
        node_bary=node_bary,
        diff_matrix=diff,
    )


def _diff_matrix(basis: np.ndarray, bary: np.ndarray, order: int) -> np.ndarray:
    """Rows: derivative of the basis interpolant at each interior node."""
    n_basis = order + 1
    d = np.zeros((order, n_basis))
    for row in range(order):
        k = row + 1  # basis index of this node
        for i in range(n_basis):
            if i != k:
                d[row, i] = (bary[i] / bary[k]) / (basis[k] - basis[i])
        d[row, k] = -np.sum(d[row, :])  # derivative of a constant is zero
    return d


def differentiation_matrix(grid: CollocationGrid) -> np.ndarray:
    """The K x (K+1) matrix D with D[k, i] = dL_i/dtau at node tau_k."""
    return grid.diff_matrix.copy()


def terminal_state(x_0, dynamics_at_nodes, grid: CollocationGrid):
    """Gauss-quadrature estimate of the state at t_f.

    ``dynamics_at_nodes`` holds f(X(tau_k), U(tau_k)) stacked along axis 0.
    """
    f = np.asarray(dynamics_at_nodes, dtype=float)
    x_0 = np.asarray(x_0, dtype=float)
    return x_0 + grid.half_span * np.tensordot(grid.weights, f, axes=(0, 0))


def _bary_eval(points, bary, values, tau):
    diff = tau - points
    exact = np.nonzero(np.abs(diff) < 1e-14)[0]
    if exact.size:
        return np.asarray(values)[exact[0]]
    w = bary / diff
    return np.tensordot(w, np.asarray(values), axes=(0, 0)) / np.sum(w)


def interpolate(grid: CollocationGrid, values, t, kind: str = "state"):
    """Barycentric Lagrange evaluation of node data at physical time(s) t.

    ``kind='state'`` expects values over the K+1 basis points, ``'control'``
    over the K interior nodes. t outside [t_0, t_f] is rejected.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < grid.t_0 - 1e-12) or np.any(t_arr > grid.t_f + 1e-12):
        raise ValueError(f"time {t} outside horizon [{grid.t_0}, {grid.t_f}]")
    if kind == "state":
        points, bary = grid.basis, grid.basis_bary
    elif kind == "control":
        points, bary = grid.nodes, grid.node_bary
    else:
        raise ValueError(f"unknown interpolation kind {kind!r}")
    taus = inverse_time_map(t_arr, grid.t_0, grid.t_f)
    out = np.array([_bary_eval(points, bary, values, tau) for tau in taus])
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return out[0]
    return out


def lagrange_coefficients(grid: CollocationGrid, tau: float, kind: str = "state") -> np.ndarray:
    """Row vector c with p(tau) = c . values for the chosen basis."""
    if kind == "state":
        points, bary = grid.basis, grid.basis_bary
    else:
        points, bary = grid.nodes, grid.node_bary
    diff = tau - points
    exact = np.nonzero(np.abs(diff) < 1e-14)[0]
    coeff = np.zeros(len(points))
    if exact.size:
        coeff[exact[0]] = 1.0
        return coeff
    w = bary / diff
    return w / np.sum(w)


def quadrature(grid: CollocationGrid, values_at_nodes) -> float:
    """Integral over [t_0, t_f] of the node samples by the Gauss rule."""
    return grid.half_span * float(np.dot(grid.weights, np.asarray(values_at_nodes)))


def solve_lti_collocation(a_matrix, x_0, grid: CollocationGrid, forcing=None):
    """Collocate x' = A x + g on the grid and solve for the node states.

    Returns (node_states, terminal) where node_states has shape (K, n) and
    terminal is the quadrature estimate of x(t_f). Used as the
    linear-systems workhorse for verification; the trajectory optimizer
    assembles the same structure inside its LP.
    """
    a_matrix = np.atleast_2d(np.asarray(a_matrix, dtype=float))
    n = a_matrix.shape[0]
    x_0 = np.asarray(x_0, dtype=float).reshape(n)
    g = np.zeros(n) if forcing is None else np.asarray(forcing, dtype=float).reshape(n)
    k_ord = grid.order
    hs = grid.half_span
    d = grid.diff_matrix  # K x (K+1)

    # unknowns: X at the K interior nodes, flattened node-major
    big_a = np.zeros((k_ord * n, k_ord * n))
    rhs = np.zeros(k_ord * n)
    for k in range(k_ord):
        for s in range(n):
            row = k * n + s
            rhs[row] = -d[k, 0] * x_0[s] + hs * g[s]
            for i in range(1, k_ord + 1):
                big_a[row, (i - 1) * n + s] += d[k, i]
            big_a[row, k * n:(k + 1) * n] -= hs * a_matrix[s, :]
    states = np.linalg.solve(big_a, rhs).reshape(k_ord, n)
    f_nodes = states @ a_matrix.T + g
    terminal = terminal_state(x_0, f_nodes, grid)
    return states, terminal
