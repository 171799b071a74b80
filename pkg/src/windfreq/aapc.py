"""Feedback-form optimal supplementary power control and its companions.

The synthesized controller mirrors the aggregate governor with negated output
and adds a proportional gain chosen so the closed frequency loop collapses to
a first-order response whose settling level equals the trajectory-optimal
nadir. The fleet share of each turbine comes from its capability indices; the
exit strategy blends the turbine back to its tracking curve without a power
step. A constant-coefficient proportional-derivative controller is included
as the classic virtual-inertia baseline.
"""

import math
from dataclasses import dataclass

import numpy as np

from .grid import GovernorSpec, GridParameters, StateSpace, aggregate_governors, \
    governor_dc_gain_total, scale_output, tf_to_statespace

__all__ = [
    "AapcController",
    "AapcRuntime",
    "ExitState",
    "BaselineVic",
    "VicRuntime",
    "synthesize",
    "controller_step",
    "allocate",
    "check_exit",
    "exit_gamma",
    "exit_power",
    "classic_vic_step",
]


@dataclass(frozen=True)
class AapcController:
    """Synthesized aggregate controller: mirror governor plus frequency gain."""

    mirror: StateSpace      # -G_g(s) on the system base
    gain_kw: float          # proportional term, pu power per pu frequency
    alpha: float            # nadir-to-steady-state ratio used in the synthesis
    k_g: float
    damping: float
    inertia_s: float

    @property
    def response_rate(self) -> float:
        """Decay rate of the target first-order frequency response, 1/s."""
        return (self.damping + self.k_g) / (2.0 * self.alpha * self.inertia_s)

    def nadir_for(self, p_d_pu: float) -> float:
        """Settling level of the target response for a given deficit, pu."""
        return -self.alpha * p_d_pu / (self.damping + self.k_g)

    def target_response(self, t, p_d_pu: float):
        """The exponential-decay frequency trajectory the synthesis embeds."""
        t = np.asarray(t, dtype=float)
        return self.nadir_for(p_d_pu) * (1.0 - np.exp(-self.response_rate * t))


def synthesize(
    grid_params: GridParameters,
    governors: list[GovernorSpec],
    alpha: float,
) -> AapcController:
    """Build the aggregate feedback controller -G_g(s) + K_w.

    K_w = D - (D + K_g)/alpha; with the governor mirror cancelling the
    physical governors, the closed loop becomes first order with settling
    level alpha times the natural steady-state deviation.
    """
    if alpha < 1.0:
        raise ValueError(
            f"alpha must be >= 1 (nadir at or below the settling level), got {alpha}"
        )
    k_g = governor_dc_gain_total(governors, grid_params.s_base_mva)
    if grid_params.damping + k_g <= 0:
        raise ValueError("damping + governor gain must be positive for synthesis")
    realizations = [
        scale_output(tf_to_statespace(g), g.rated_mva / grid_params.s_base_mva)
        for g in governors
    ]
    gov = aggregate_governors(realizations)
    mirror = scale_output(gov, -1.0)
    gain_kw = grid_params.damping - (grid_params.damping + k_g) / alpha
    return AapcController(
        mirror=mirror,
        gain_kw=gain_kw,
        alpha=alpha,
        k_g=k_g,
        damping=grid_params.damping,
        inertia_s=grid_params.inertia_s,
    )


class AapcRuntime:
    """Mutable per-turbine instance of the controller (one simulation worker).

    Holds this turbine's copy of the mirror state, driven by the local
    frequency; the command is the allocated share of the aggregate output.
    """

    def __init__(self, controller: AapcController, share: float = 1.0):
        self.controller = controller
        self.share = float(share)
        self.x = np.zeros(controller.mirror.order)
        self.last_mirror_pu = 0.0
        self.last_gain_pu = 0.0

    def output(self, df_local: float) -> float:
        """Aggregate-side command (before the allocation share), pu."""
        m = self.controller.mirror
        mirror_out = float(m.c[0, :] @ self.x + m.d[0, 0] * df_local) if m.order else float(m.d[0, 0] * df_local)
        self.last_mirror_pu = mirror_out
        self.last_gain_pu = self.controller.gain_kw * df_local
        return mirror_out + self.last_gain_pu

    def step(self, df_local: float, dt: float) -> float:
        """Advance the mirror state one RK4 step (input held) and command."""
        m = self.controller.mirror
        if m.order:
            a, b = m.a, m.b[:, 0]
            x = self.x
            k1 = a @ x + b * df_local
            k2 = a @ (x + 0.5 * dt * k1) + b * df_local
            k3 = a @ (x + 0.5 * dt * k2) + b * df_local
            k4 = a @ (x + dt * k3) + b * df_local
            self.x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return self.share * self.output(df_local)


def controller_step(runtime: AapcRuntime, df_local: float, dt: float) -> float:
    """One control step: returns the allocated power command deviation, pu."""
    return runtime.step(df_local, dt)


def allocate(capabilities) -> np.ndarray:
    """Fleet shares from (releasable energy, increasable power) pairs.

    Each share is the smaller of the turbine's energy fraction and power
    fraction, renormalized to sum to one exactly.
    """
    caps = np.asarray(list(capabilities), dtype=float)
    if caps.ndim != 2 or caps.shape[1] != 2 or caps.shape[0] < 1:
        raise ValueError("capabilities must be a nonempty list of (energy, power) pairs")
    if np.any(caps < 0):
        raise ValueError("capability entries must be nonnegative")
    totals = caps.sum(axis=0)
    if np.any(totals <= 0):
        raise ValueError(f"each capability column needs a positive total, got {totals}")
    raw = np.minimum(caps[:, 0] / totals[0], caps[:, 1] / totals[1])
    if raw.sum() <= 0:
        raise ValueError("all turbines have zero capability in one direction")
    shares = raw / raw.sum()
    shares[-1] = 1.0 - shares[:-1].sum()  # exact unit sum despite rounding
    return shares


@dataclass(frozen=True)
class ExitState:
    """Record of a triggered exit: cause, time, and the blend coefficient."""

    kind: str       # "power_cross" | "horizon" | "speed_floor"
    t_e: float
    gamma: float


def check_exit(
    p_command_mw: float,
    p_mppt_mw: float,
    omega_rad_s: float,
    floor_rad_s: float,
    t: float,
    t_f: float,
    armed: bool,
) -> str | None:
    """First matching exit cause, if any.

    The power-cross trigger only fires once armed (the command has previously
    risen above the tracking curve), since the pre-event operating point sits
    exactly on it.
    """
    if omega_rad_s <= floor_rad_s:
        return "speed_floor"
    if t >= t_f:
        return "horizon"
    if armed and p_command_mw <= p_mppt_mw:
        return "power_cross"
    return None


def exit_gamma(p_e_at_te: float, p_t_at_te: float, p_mppt_at_te: float) -> float:
    """Blend coefficient preserving power continuity at the switch instant."""
    denom = p_mppt_at_te - p_t_at_te
    if abs(denom) < 1e-9:
        return 1.0
    return float(np.clip((p_e_at_te - p_t_at_te) / denom, 0.0, 1.0))


def exit_power(gamma: float, p_t_mw: float, p_mppt_mw: float) -> float:
    """Post-exit output law, evaluated on the live operating point."""
    return (1.0 - gamma) * p_t_mw + gamma * p_mppt_mw


@dataclass(frozen=True)
class BaselineVic:
    """Constant-coefficient proportional-derivative inertial response.

    Gains act on the locally measured deviation in Hz: k_f in MW per Hz and
    k_in in MW per Hz/s, per aggregated turbine.
    """

    k_f: float = 20.0
    k_in: float = 10.0
    filter_s: float = 0.1   # first-order lag making the derivative realizable

    def __post_init__(self):
        if self.k_f < 0 or self.k_in < 0 or self.filter_s <= 0:
            raise ValueError("VIC gains must be nonnegative with a positive filter time")


class VicRuntime:
    """Mutable per-turbine VIC instance with a filtered differentiator."""

    def __init__(self, vic: BaselineVic, share: float = 1.0):
        self.vic = vic
        self.share = float(share)
        self.z = 0.0  # low-pass state tracking the frequency

    def step(self, df_local_hz: float, dt: float) -> float:
        """Supplementary power command in MW for this step's frequency input."""
        decay = math.exp(-dt / self.vic.filter_s)
        self.z = df_local_hz + (self.z - df_local_hz) * decay
        deriv = (df_local_hz - self.z) / self.vic.filter_s
        return self.share * (-self.vic.k_f * df_local_hz - self.vic.k_in * deriv)


def classic_vic_step(runtime: VicRuntime, df_local_hz: float, dt: float) -> float:
    """One VIC step: -k_f df - k_in d(df)/dt with the filtered derivative."""
    return runtime.step(df_local_hz, dt)
