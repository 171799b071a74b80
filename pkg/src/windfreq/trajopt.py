"""Frequency-nadir trajectory optimization.

The continuous problem (swing equation + governor dynamics + released-energy
state, zero initial conditions, energy-neutral terminal condition, nadir path
constraint, maximize the nadir) is linear end to end, so the Gauss
pseudospectral transcription is a plain LP. A forward-Euler transcription of
the same problem, condensed onto the frequency samples, serves as the
independent brute-force reference.
"""

from dataclasses import dataclass, field

import numpy as np

from . import collocation as coll
from .grid import (
    GovernorSpec,
    GridParameters,
    StateSpace,
    aggregate_governors,
    governor_dc_gain_total,
    scale_output,
    steady_state_deviation,
    tf_to_statespace,
)
from .lp import LpResult, solve_lp

__all__ = [
    "TrajOptProblem",
    "LinearProgram",
    "TrajectorySolution",
    "build_problem",
    "transcribe",
    "extract_solution",
    "solve_max_nadir",
    "euler_oracle",
    "min_integral_variant",
]

TRACE_DT = 0.01


@dataclass(frozen=True)
class TrajOptProblem:
    """State matrices for x = [df, x_g..., dE] with control u = dP_e."""

    a: np.ndarray
    b_ctrl: np.ndarray
    b_dist: np.ndarray
    p_d: float
    t_f: float
    grid_params: GridParameters
    k_g: float
    gov: StateSpace  # system-base aggregate governor, for trace reconstruction

    @property
    def n_states(self) -> int:
        return self.a.shape[0]

    @property
    def n_gov_states(self) -> int:
        return self.n_states - 2


def build_problem(
    grid_params: GridParameters,
    governors: list[GovernorSpec],
    p_d_pu: float,
    t_f: float = 30.0,
) -> TrajOptProblem:
    """Assemble the LTI dynamics of the decoupled frequency plant.

    The frequency row carries the aggregate governor feedthrough and output
    coupling; the released-energy row integrates the control.
    """
    if p_d_pu < 0:
        raise ValueError(f"disturbance must be nonnegative, got {p_d_pu}")
    if t_f <= 0:
        raise ValueError(f"horizon must be positive, got {t_f}")
    realizations = [
        scale_output(tf_to_statespace(g), g.rated_mva / grid_params.s_base_mva)
        for g in governors
    ]
    gov = aggregate_governors(realizations)
    m = gov.order
    n = m + 2
    two_h = 2.0 * grid_params.inertia_s
    a = np.zeros((n, n))
    a[0, 0] = (gov.d[0, 0] - grid_params.damping) / two_h
    if m:
        a[0, 1:m + 1] = gov.c[0, :] / two_h
        a[1:m + 1, 0] = gov.b[:, 0]
        a[1:m + 1, 1:m + 1] = gov.a
    b_ctrl = np.zeros(n)
    b_ctrl[0] = 1.0 / two_h
    b_ctrl[-1] = 1.0
    b_dist = np.zeros(n)
    b_dist[0] = -1.0 / two_h
    return TrajOptProblem(
        a=a,
        b_ctrl=b_ctrl,
        b_dist=b_dist,
        p_d=float(p_d_pu),
        t_f=float(t_f),
        grid_params=grid_params,
        k_g=governor_dc_gain_total(governors, grid_params.s_base_mva),
        gov=gov,
    )


@dataclass
class LinearProgram:
    """Transcribed LP: decision vector [states at basis points; controls; nadir]."""

    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    maximize: bool
    idx_nadir: int
    n_states: int
    order: int
    path_taus: np.ndarray
    meta: dict = field(default_factory=dict)


def _path_taus(grid: coll.CollocationGrid) -> np.ndarray:
    """Constraint locations: nodes, every inter-point midpoint, and tau = +1.

    Constraining only the nodes leaves the interpolating polynomial free to
    dive between the last node and the horizon end, which lets the optimizer
    bank unbounded credit on the unobserved terminal frequency. Midpoints and
    the endpoint close that hole.
    """
    pts = np.concatenate([grid.basis, [1.0]])
    mids = 0.5 * (pts[:-1] + pts[1:])
    return np.concatenate([grid.nodes, mids, [1.0]])


def transcribe(problem: TrajOptProblem, grid: coll.CollocationGrid) -> LinearProgram:
    """Collocate the dynamics and discretize the nadir path constraint.

    Equalities: zero initial state, the K collocation rows per state, and the
    quadrature-based terminal released-energy condition. Inequalities: the
    nadir variable lower-bounds the frequency polynomial at nodes, gap
    midpoints and the horizon end. Objective: maximize the nadir.
    """
    n = problem.n_states
    k_ord = grid.order
    hs = grid.half_span
    d_mat = grid.diff_matrix
    n_x = n * (k_ord + 1)
    n_vars = n_x + k_ord + 1
    idx_nadir = n_x + k_ord

    def xcol(i, s):
        return i * n + s

    rows_eq = n + n * k_ord + 1
    a_eq = np.zeros((rows_eq, n_vars))
    b_eq = np.zeros(rows_eq)
    r = 0
    for s in range(n):  # initial state is the pre-event equilibrium
        a_eq[r, xcol(0, s)] = 1.0
        r += 1
    for k in range(1, k_ord + 1):
        for s in range(n):
            for i in range(k_ord + 1):
                a_eq[r, xcol(i, s)] += d_mat[k - 1, i]
            a_eq[r, xcol(k, 0):xcol(k, n)] -= hs * problem.a[s, :]
            a_eq[r, n_x + (k - 1)] -= hs * problem.b_ctrl[s]
            b_eq[r] = hs * problem.b_dist[s] * problem.p_d
            r += 1
    # terminal released energy via the quadrature estimate of x(t_f)
    s_e = n - 1
    a_eq[r, xcol(0, s_e)] = 1.0
    for k in range(1, k_ord + 1):
        a_eq[r, xcol(k, 0):xcol(k, n)] += hs * grid.weights[k - 1] * problem.a[s_e, :]
        a_eq[r, n_x + (k - 1)] += hs * grid.weights[k - 1] * problem.b_ctrl[s_e]
    b_eq[r] = -problem.t_f * problem.b_dist[s_e] * problem.p_d
    r += 1

    taus = _path_taus(grid)
    a_ub = np.zeros((taus.size, n_vars))
    b_ub = np.zeros(taus.size)
    for j, tau in enumerate(taus):
        coeff = coll.lagrange_coefficients(grid, tau, "state")
        a_ub[j, idx_nadir] = 1.0
        for i in range(k_ord + 1):
            a_ub[j, xcol(i, 0)] -= coeff[i]

    c = np.zeros(n_vars)
    c[idx_nadir] = 1.0
    meta = {
        "n_vars": n_vars,
        "n_eq_initial": n,
        "n_eq_collocation": n * k_ord,
        "n_eq_terminal": 1,
        "n_path_node": k_ord,
        "n_path_aux": taus.size - k_ord,
        "n_ineq": taus.size,
    }
    return LinearProgram(
        c=c,
        a_eq=a_eq,
        b_eq=b_eq,
        a_ub=a_ub,
        b_ub=b_ub,
        maximize=True,
        idx_nadir=idx_nadir,
        n_states=n,
        order=k_ord,
        path_taus=taus,
        meta=meta,
    )


@dataclass
class TrajectorySolution:
    """Optimal traces on a uniform grid plus node-level certificates."""

    t: np.ndarray
    df_pu: np.ndarray
    dpe_pu: np.ndarray
    denergy_pu_s: np.ndarray
    dpm_pu: np.ndarray
    nadir_pu: float
    nadir_hz: float
    alpha: float
    ss_deviation_pu: float
    terminal_df_pu: float
    terminal_denergy: float
    s_quad: float
    em_quad: float
    eq25_residual: float
    ringing_rel: float
    p_d_pu: float
    t_f: float
    f_base_hz: float
    method: str
    zero_disturbance: bool = False
    diagnostics: dict = field(default_factory=dict)
    _grid: coll.CollocationGrid | None = field(default=None, repr=False)
    _states_nodes: np.ndarray | None = field(default=None, repr=False)
    _u_nodes: np.ndarray | None = field(default=None, repr=False)
    _gov: StateSpace | None = field(default=None, repr=False)

    def df_at(self, t):
        if self._grid is not None:
            return coll.interpolate(self._grid, self._states_nodes[:, 0], t, "state")
        return np.interp(t, self.t, self.df_pu)

    def dpe_at(self, t):
        if self._grid is not None:
            return coll.interpolate(self._grid, self._u_nodes, t, "control")
        return np.interp(t, self.t, self.dpe_pu)

    def dpm_at(self, t):
        if self._grid is not None:
            xg = coll.interpolate(self._grid, self._states_nodes[:, 1:-1], t, "state")
            df = self.df_at(t)
            return xg @ self._gov.c[0, :] + self._gov.d[0, 0] * df
        return np.interp(t, self.t, self.dpm_pu)

    def denergy_at(self, t):
        if self._grid is not None:
            return coll.interpolate(self._grid, self._states_nodes[:, -1], t, "state")
        return np.interp(t, self.t, self.denergy_pu_s)

    def metrics_dict(self) -> dict:
        return {
            "nadir_pu": self.nadir_pu,
            "nadir_hz": self.nadir_hz,
            "alpha": self.alpha,
            "steady_state_pu": self.ss_deviation_pu,
            "terminal_df_pu": self.terminal_df_pu,
            "terminal_denergy_pu_s": self.terminal_denergy,
            "frequency_integral_pu_s": self.s_quad,
            "governor_energy_pu_s": self.em_quad,
            "energy_identity_residual": self.eq25_residual,
            "ringing_rel": self.ringing_rel,
            "p_d_pu": self.p_d_pu,
            "horizon_s": self.t_f,
            "method": self.method,
            "zero_disturbance": self.zero_disturbance,
            "diagnostics": self.diagnostics,
        }


def extract_solution(
    lp_result: LpResult,
    lp: LinearProgram,
    problem: TrajOptProblem,
    grid: coll.CollocationGrid,
    trace_dt: float = TRACE_DT,
    method: str = "collocation",
) -> TrajectorySolution:
    """Interpolate the LP solution to a uniform grid and compute certificates."""
    n = problem.n_states
    k_ord = grid.order
    x = lp_result.x
    states = x[: n * (k_ord + 1)].reshape(k_ord + 1, n)
    u_nodes = x[n * (k_ord + 1): n * (k_ord + 1) + k_ord]
    nadir = float(x[lp.idx_nadir])

    f_nodes = states[1:] @ problem.a.T + np.outer(u_nodes, problem.b_ctrl) \
        + problem.b_dist * problem.p_d
    terminal = coll.terminal_state(states[0], f_nodes, grid)

    t = np.arange(0.0, problem.t_f + trace_dt / 2, trace_dt)
    df = coll.interpolate(grid, states[:, 0], t, "state")
    de = coll.interpolate(grid, states[:, -1], t, "state")
    dpe = coll.interpolate(grid, u_nodes, t, "control")
    gov = problem.gov
    if gov.order:
        xg = coll.interpolate(grid, states[:, 1:-1], t, "state")
        dpm = xg @ gov.c[0, :] + gov.d[0, 0] * df
    else:
        dpm = gov.d[0, 0] * df

    gp = problem.grid_params
    zero_dist = problem.p_d == 0.0
    ss_dev = steady_state_deviation(problem.p_d, gp, problem.k_g) if not zero_dist else 0.0
    alpha = 1.0 if zero_dist else nadir / ss_dev

    df_nodes = states[1:, 0]
    dpm_nodes = (states[1:, 1:-1] @ gov.c[0, :] if gov.order else 0.0) + gov.d[0, 0] * df_nodes
    s_quad = coll.quadrature(grid, df_nodes)
    em_quad = coll.quadrature(grid, dpm_nodes)
    eq25 = (
        2.0 * gp.inertia_s * terminal[0]
        + gp.damping * s_quad
        - (em_quad - problem.p_d * problem.t_f)
    )
    ringing = 0.0
    if not zero_dist and nadir != 0.0:
        ringing = max(0.0, (nadir - float(df.min())) / abs(nadir))

    return TrajectorySolution(
        t=t,
        df_pu=df,
        dpe_pu=dpe,
        denergy_pu_s=de,
        dpm_pu=dpm,
        nadir_pu=nadir,
        nadir_hz=nadir * gp.f_base_hz,
        alpha=alpha,
        ss_deviation_pu=ss_dev,
        terminal_df_pu=float(terminal[0]),
        terminal_denergy=float(terminal[-1]),
        s_quad=s_quad,
        em_quad=em_quad,
        eq25_residual=float(eq25),
        ringing_rel=ringing,
        p_d_pu=problem.p_d,
        t_f=problem.t_f,
        f_base_hz=gp.f_base_hz,
        method=method,
        zero_disturbance=zero_dist,
        diagnostics=dict(lp_result.diagnostics),
        _grid=grid,
        _states_nodes=states,
        _u_nodes=u_nodes,
        _gov=gov,
    )


def _zero_solution(problem, grid, lp, method="collocation", trace_dt=TRACE_DT):
    """The trivial optimum for a zero disturbance (solution scales with P_d)."""
    res = LpResult(x=np.zeros(lp.c.size), objective=0.0, iterations=0,
                   diagnostics={"trivial_zero_disturbance": True})
    return extract_solution(res, lp, problem, grid, trace_dt=trace_dt, method=method)


def solve_max_nadir(
    problem: TrajOptProblem, grid: coll.CollocationGrid, trace_dt: float = TRACE_DT
) -> TrajectorySolution:
    """Transcribe, solve and extract the nadir-maximal trajectory."""
    lp = transcribe(problem, grid)
    if problem.p_d == 0.0:
        # all-zero data makes every LP vertex degenerate; the optimum is known
        sol = _zero_solution(problem, grid, lp, trace_dt=trace_dt)
    else:
        res = solve_lp(
            lp.c, lp.a_eq, lp.b_eq, lp.a_ub, lp.b_ub, maximize=lp.maximize
        )
        sol = extract_solution(res, lp, problem, grid, trace_dt=trace_dt)
    sol.diagnostics["lp_meta"] = lp.meta
    return sol


def min_integral_variant(
    problem: TrajOptProblem,
    grid: coll.CollocationGrid,
    nadir_floor: float | None = None,
    trace_dt: float = TRACE_DT,
) -> TrajectorySolution:
    """Minimize the magnitude of the frequency integral over the same set.

    The nadir-maximization and integral-minimization objectives pick the same
    trajectory only on the energy-optimal family, so the check anchors the
    path constraint at a fixed nadir floor (by default the max-nadir LP's own
    optimum, solved internally) instead of carrying a free nadir variable.
    """
    if nadir_floor is None:
        nadir_floor = solve_max_nadir(problem, grid).nadir_pu
    lp = transcribe(problem, grid)
    if problem.p_d == 0.0:
        return _zero_solution(problem, grid, lp, method="min_integral", trace_dt=trace_dt)
    floor = nadir_floor * (1.0 + 1e-9)  # hair of slack keeps the anchored LP feasible
    n_vars = lp.c.size
    keep = np.arange(n_vars - 1)  # drop the nadir variable
    a_eq = lp.a_eq[:, keep]
    # the path rows already read  -df(tau) <= ...; anchor them at the floor
    a_ub = lp.a_ub[:, keep]
    b_ub = np.full(a_ub.shape[0], -floor)

    n = problem.n_states
    c = np.zeros(n_vars - 1)
    for k in range(1, grid.order + 1):
        c[k * n] = grid.half_span * grid.weights[k - 1]  # quadrature of df
    res = solve_lp(c, a_eq, lp.b_eq, a_ub, b_ub, maximize=True)

    # re-embed so the extraction helper sees the familiar layout
    full = LpResult(
        x=np.concatenate([res.x, [0.0]]),
        objective=res.objective,
        iterations=res.iterations,
        diagnostics=res.diagnostics,
    )
    sol = extract_solution(full, lp, problem, grid, trace_dt=trace_dt, method="min_integral")
    path_vals = [float(sol.df_at(coll.time_map(tau, 0.0, problem.t_f))) for tau in lp.path_taus]
    sol.nadir_pu = float(min(path_vals))
    sol.nadir_hz = sol.nadir_pu * problem.grid_params.f_base_hz
    sol.alpha = 1.0 if sol.zero_disturbance else sol.nadir_pu / sol.ss_deviation_pu
    sol.diagnostics["nadir_floor"] = nadir_floor
    return sol


def euler_oracle(problem: TrajOptProblem, n_steps: int = 3000) -> TrajectorySolution:
    """Forward-Euler transcription of the same program, condensed and solved.

    States are eliminated exactly: with the frequency samples as decision
    variables, governor states and controls follow from the Euler recursions,
    and the terminal released-energy condition becomes a single equality. The
    path constraint keeps every sample above the nadir variable. Solved by the
    same simplex core; completely independent of the collocation machinery.
    """
    if n_steps < 1000:
        raise ValueError(f"the Euler reference needs >= 1000 steps, got {n_steps}")
    gov = problem.gov
    gp = problem.grid_params
    h = problem.t_f / n_steps
    m = gov.order
    a_g = gov.a
    b_g = gov.b[:, 0] if m else np.zeros(0)
    c_g = gov.c[0, :] if m else np.zeros(0)
    d_g = float(gov.d[0, 0])
    two_h = 2.0 * gp.inertia_s
    damping = gp.damping

    # w . phi = r  <=>  dE(t_f) = 0 after eliminating states
    w = np.zeros(n_steps)
    if m:
        trans = np.eye(m) + h * a_g
        gv = np.zeros(m)
        cgb = np.zeros(n_steps + 1)  # cgb[j] = C_g G_j B_g, j = 1 .. n-2
        for j in range(n_steps - 2, 0, -1):
            if j == n_steps - 2:
                gv = b_g.copy()
            else:
                gv = b_g + trans @ gv
            cgb[j] = c_g @ gv
    else:
        cgb = np.zeros(n_steps + 1)
    for j in range(1, n_steps):
        w[j - 1] = h * (damping - d_g) - h * h * cgb[j]
    w[n_steps - 1] = two_h
    rhs = -problem.t_f * problem.p_d

    nv = n_steps + 1  # [slack above nadir per sample, nadir]
    c = np.zeros(nv)
    c[-1] = 1.0
    a_eq = np.zeros((1, nv))
    a_eq[0, :n_steps] = w
    a_eq[0, -1] = w.sum()
    nonneg = np.ones(nv, dtype=bool)
    nonneg[-1] = False
    res = solve_lp(c, a_eq, np.array([rhs]), maximize=True, nonneg=nonneg)
    nadir = float(res.x[-1])
    phi = res.x[:n_steps] + nadir  # frequency samples at steps 1..N

    # reconstruct controls and governor response with the forward recursion
    df = np.concatenate([[0.0], phi])
    xg = np.zeros((n_steps + 1, m))
    for i in range(n_steps):
        if m:
            xg[i + 1] = xg[i] + h * (a_g @ xg[i] + b_g * df[i])
    dpm = (xg @ c_g if m else np.zeros(n_steps + 1)) + d_g * df
    u = np.empty(n_steps)
    for i in range(n_steps):
        gov_coupling = (c_g @ xg[i]) if m else 0.0
        u[i] = (
            two_h * (df[i + 1] - df[i]) / h
            - (d_g - damping) * df[i]
            - gov_coupling
            + problem.p_d
        )
    de = np.concatenate([[0.0], h * np.cumsum(u)])
    t = np.arange(n_steps + 1) * h
    dpe = np.concatenate([u, [u[-1]]])

    zero_dist = problem.p_d == 0.0
    ss_dev = steady_state_deviation(problem.p_d, gp, problem.k_g) if not zero_dist else 0.0
    alpha = 1.0 if zero_dist else nadir / ss_dev
    s_rect = float(h * np.sum(df[:-1]))
    em_rect = float(h * np.sum(dpm[:-1]))
    eq25 = two_h * df[-1] + damping * s_rect - (em_rect - problem.p_d * problem.t_f)
    return TrajectorySolution(
        t=t,
        df_pu=df,
        dpe_pu=dpe,
        denergy_pu_s=de,
        dpm_pu=dpm,
        nadir_pu=nadir,
        nadir_hz=nadir * gp.f_base_hz,
        alpha=alpha,
        ss_deviation_pu=ss_dev,
        terminal_df_pu=float(df[-1]),
        terminal_denergy=float(de[-1]),
        s_quad=s_rect,
        em_quad=em_rect,
        eq25_residual=float(eq25),
        ringing_rel=0.0,
        p_d_pu=problem.p_d,
        t_f=problem.t_f,
        f_base_hz=gp.f_base_hz,
        method=f"euler_{n_steps}",
        zero_disturbance=zero_dist,
        diagnostics=dict(res.diagnostics),
    )
