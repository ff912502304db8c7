"""Departure-time user-equilibrium solvers.

A user equilibrium is pinned down by two conditions: every commuter of a
class bears the same total trip cost over that class's active interval, and
each class's arrival flow integrates to its population.  For a single class
this reduces to a scalar root-find on the equilibrium cost; with two classes
sharing the road the gasoline vehicles occupy the window flanks and the
electric vehicles the high-delay center, and the pair of class costs is
solved as a two-dimensional root problem with the segment boundaries
determined by delay continuity.

Conservation integrals run in the cost-residual variable: along the early
flank the schedule penalty falls linearly at rate beta, so arrival time and
residual cost are affine in each other and the two window flanks collapse
into a single integral `(1/beta + 1/gamma) * int_0^r q(x) dx`, where
``q(x)`` is the arrival flow at congestion-cost residual ``x``.  A cubic
stretch of the integration variable removes the `x**(1/nu)` edge singularity
so the trapezoid refinement converges at second order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SolverError
from .model import (
    EnergyModel,
    Scenario,
    VehicleClass,
    congestion_cost,
    delay_from_flow,
    flow_from_delay,
    invert_congestion_cost,
    schedule_delay,
)
from .numerics import expand_bracket, solve_bracketed, trapezoid_refine

DEFAULT_DT = 1.0 / 60.0


@dataclass(frozen=True)
class ClassSegment:
    """One class's contiguous occupancy interval and its constant trip cost."""

    vehicle_class: VehicleClass
    t_lo: float
    t_hi: float
    equilibrium_cost: float


@dataclass(frozen=True)
class TimeProfile:
    """Solution curves sampled on a uniform arrival-time grid.

    ``active`` holds -1 outside the rush window and the VehicleClass index
    (0 = GV, 1 = EV) of the class arriving at that instant inside it.  Cost
    columns are the components borne by the active class; they are zero at
    inactive points.
    """

    times: np.ndarray
    dt: float
    window: tuple[float, float]
    delay: np.ndarray
    flow_total: np.ndarray
    flow_gv: np.ndarray
    flow_ev: np.ndarray
    cost_travel_time: np.ndarray
    cost_energy: np.ndarray
    cost_schedule: np.ndarray
    toll: np.ndarray
    cost_total: np.ndarray
    active: np.ndarray

    def class_flow(self, cls: VehicleClass) -> np.ndarray:
        return self.flow_gv if cls is VehicleClass.GV else self.flow_ev

    def active_mask(self, cls: VehicleClass) -> np.ndarray:
        return self.active == _class_index(cls)


@dataclass(frozen=True)
class EquilibriumSolution:
    """A solved departure pattern: window, segments, costs, counts, curves."""

    scenario: Scenario
    window: tuple[float, float]
    segments: tuple[ClassSegment, ...]
    class_costs: dict[VehicleClass, float]
    class_counts: dict[VehicleClass, float]
    profile: TimeProfile

    @property
    def is_empty(self) -> bool:
        return not self.segments

    @property
    def duration(self) -> float:
        return self.window[1] - self.window[0]

    @property
    def max_delay(self) -> float:
        return float(np.max(self.profile.delay)) if self.profile.delay.size else 0.0


def _class_index(cls: VehicleClass) -> int:
    return 0 if cls is VehicleClass.GV else 1


def _window_grid(t_star: float, window: tuple[float, float], dt: float) -> np.ndarray:
    """Uniform grid with ``t_star`` on it, spanning the window plus 2*dt."""
    t0, t1 = window
    k_lo = int(math.ceil((t_star - t0) / dt - 1e-12)) + 2
    k_hi = int(math.ceil((t1 - t_star) / dt - 1e-12)) + 2
    return t_star + dt * np.arange(-k_lo, k_hi + 1, dtype=float)


def residual_flow(
    scenario: Scenario, invert: Callable[[np.ndarray], np.ndarray]
) -> Callable[[np.ndarray], np.ndarray]:
    """Arrival flow as a function of the congestion-cost residual."""

    def q(r: np.ndarray) -> np.ndarray:
        return flow_from_delay(invert(r), scenario)

    return q


def window_mass(
    scenario: Scenario,
    invert: Callable[[np.ndarray], np.ndarray],
    r_hi: float,
    quad_rtol: float,
) -> float:
    """Commuters absorbed while the cost residual climbs from 0 to ``r_hi``.

    Equals `(1/beta + 1/gamma) * int_0^{r_hi} q(r) dr`; the substitution
    r = r_hi * u**3 regularizes the r**(1/nu) behavior of ``q`` at r = 0.
    """
    if r_hi <= 0.0:
        return 0.0
    q = residual_flow(scenario, invert)

    def integrand(u: np.ndarray) -> np.ndarray:
        return q(r_hi * u**3) * 3.0 * r_hi * u * u

    integral = trapezoid_refine(integrand, 0.0, 1.0, rtol=quad_rtol)
    return (1.0 / scenario.beta + 1.0 / scenario.gamma) * integral


def _empty_solution(scenario: Scenario, dt: float) -> EquilibriumSolution:
    t_star = scenario.t_star
    solution = EquilibriumSolution(
        scenario=scenario,
        window=(t_star, t_star),
        segments=(),
        class_costs={},
        class_counts={},
        profile=_zero_profile(t_star, dt),
    )
    return solution


def _zero_profile(t_star: float, dt: float) -> TimeProfile:
    times = t_star + dt * np.arange(-2, 3, dtype=float)
    zeros = np.zeros_like(times)
    return TimeProfile(
        times=times,
        dt=dt,
        window=(t_star, t_star),
        delay=zeros.copy(),
        flow_total=zeros.copy(),
        flow_gv=zeros.copy(),
        flow_ev=zeros.copy(),
        cost_travel_time=zeros.copy(),
        cost_energy=zeros.copy(),
        cost_schedule=zeros.copy(),
        toll=zeros.copy(),
        cost_total=zeros.copy(),
        active=np.full(times.shape, -1, dtype=np.int8),
    )


def solve_single_class(
    scenario: Scenario,
    model: EnergyModel,
    dt: float = DEFAULT_DT,
    quad_rtol: float = 1e-8,
    root_rtol: float = 1e-10,
) -> EquilibriumSolution:
    """Equilibrium when the whole fleet is one vehicle class.

    The window edges carry zero delay, so the first and last commuters pay
    schedule penalty only and the window is [t* - C/beta, t* + C/gamma].
    Inside it the delay profile follows the isocost curve
    ``T(t) = Phi^{-1}(C - schedule_delay(t))`` and the equilibrium cost C is
    the root of the monotone conservation map C -> absorbed commuters.
    """
    if scenario.n_total == 0.0:
        return _empty_solution(scenario, dt)

    def invert(r: np.ndarray) -> np.ndarray:
        return invert_congestion_cost(model, scenario, r)

    def conservation(c: float) -> float:
        return window_mass(scenario, invert, c, quad_rtol) - scenario.n_total

    # Seed the bracket from the cost of packing everyone into one hour.
    seed = float(
        congestion_cost(model, scenario, delay_from_flow(scenario.n_total, scenario))
    )
    lo, hi = expand_bracket(conservation, max(seed, 1e-9))
    cost = solve_bracketed(conservation, lo, hi, rtol=root_rtol)
    count = window_mass(scenario, invert, cost, quad_rtol)

    t0 = scenario.t_star - cost / scenario.beta
    t1 = scenario.t_star + cost / scenario.gamma
    segments = (ClassSegment(model.vehicle_class, t0, t1, cost),)
    profile = _sample(scenario, (t0, t1), segments, dt)
    return EquilibriumSolution(
        scenario=scenario,
        window=(t0, t1),
        segments=segments,
        class_costs={model.vehicle_class: cost},
        class_counts={model.vehicle_class: count},
        profile=profile,
    )


def _mixed_state(
    scenario: Scenario,
    cost_gv: float,
    cost_ev: float,
    quad_rtol: float,
) -> tuple[float, float, float] | None:
    """Masses and boundary schedule level for a candidate cost pair.

    Returns ``(mass_gv, mass_ev, s_star)`` where ``s_star`` is the schedule
    penalty at which the two isocost delay curves intersect (the same level
    on both flanks), or None when the pair admits no GV-EV-GV topology.
    """
    if not 0.0 < cost_ev < cost_gv:
        return None
    gv, ev = scenario.gv_energy, scenario.ev_energy
    peak_gv = float(invert_congestion_cost(gv, scenario, cost_gv))
    peak_ev = float(invert_congestion_cost(ev, scenario, cost_ev))
    if peak_ev <= peak_gv:
        return None  # EV curve must sit above the GV curve at the center

    def curve_gap(s: float) -> float:
        return float(
            invert_congestion_cost(gv, scenario, cost_gv - s)
            - invert_congestion_cost(ev, scenario, cost_ev - s)
        )

    s_star = solve_bracketed(curve_gap, 0.0, cost_ev, rtol=1e-13)

    def invert_gv(r: np.ndarray) -> np.ndarray:
        return invert_congestion_cost(gv, scenario, r)

    def invert_ev(r: np.ndarray) -> np.ndarray:
        return invert_congestion_cost(ev, scenario, r)

    mass_gv = window_mass(scenario, invert_gv, cost_gv - s_star, quad_rtol)
    mass_ev = window_mass(scenario, invert_ev, cost_ev, quad_rtol) - window_mass(
        scenario, invert_ev, cost_ev - s_star, quad_rtol
    )
    return mass_gv, mass_ev, s_star


def solve_mixed(
    scenario: Scenario,
    dt: float = DEFAULT_DT,
    quad_rtol: float = 1e-8,
    root_rtol: float = 1e-10,
    mixed_rtol: float = 1e-8,
) -> EquilibriumSolution:
    """Two-class equilibrium at the scenario's EV market penetration.

    Degenerates to :func:`solve_single_class` at mpr 0 or 1.  Otherwise the
    unknown pair (C_GV, C_EV) is driven to per-class conservation by a damped
    Newton iteration with finite-difference Jacobian; each residual
    evaluation nests a bracketed solve for the boundary schedule level at
    which the class delay curves join continuously.  A nested
    bisection-based search backs the Newton iteration up if it stalls, and
    the returned segmentation is validated against profitable deviations.
    """
    if scenario.n_total == 0.0:
        return _empty_solution(scenario, dt)
    if scenario.mpr == 0.0:
        return solve_single_class(scenario, scenario.gv_energy, dt, quad_rtol, root_rtol)
    if scenario.mpr == 1.0:
        return solve_single_class(scenario, scenario.ev_energy, dt, quad_rtol, root_rtol)

    pop_gv = scenario.population(VehicleClass.GV)
    pop_ev = scenario.population(VehicleClass.EV)
    inner_rtol = quad_rtol * 1e-2  # keep quadrature noise below the 2-D residual target
    tol = mixed_rtol * scenario.n_total

    gv_single = solve_single_class(scenario, scenario.gv_energy, dt, quad_rtol, root_rtol)
    ev_single = solve_single_class(scenario, scenario.ev_energy, dt, quad_rtol, root_rtol)
    cg_s = gv_single.class_costs[VehicleClass.GV]
    ce_s = ev_single.class_costs[VehicleClass.EV]

    def ce_floor_of(cg: float) -> float:
        # EV cost of a vanishing center bite: EV congestion cost at the GV peak delay
        return float(
            congestion_cost(
                scenario.ev_energy,
                scenario,
                invert_congestion_cost(scenario.gv_energy, scenario, cg),
            )
        )

    def residuals(x: tuple[float, float]):
        state = _mixed_state(scenario, x[0], x[1], inner_rtol)
        if state is None:
            return None
        mass_gv, mass_ev, s_star = state
        return np.array([mass_gv - pop_gv, mass_ev - pop_ev]), s_star

    mpr = scenario.mpr
    x = (
        (1.0 - mpr) * cg_s + mpr * ce_s,
        (1.0 - mpr) * ce_floor_of(cg_s) + mpr * ce_s,
    )
    # Nudge the seed strictly inside the admissible wedge.
    floor = ce_floor_of(x[0])
    x = (x[0], min(max(x[1], floor * (1.0 + 1e-9)), x[0] * (1.0 - 1e-12)))

    solved = _mixed_newton(residuals, x, tol)
    if solved is None:
        solved = _mixed_nested(scenario, residuals, cg_s, ce_floor_of, pop_ev, tol)
    if solved is None:
        state = residuals(x)
        raise SolverError(
            "mixed equilibrium did not converge",
            diagnostics={
                "mpr": mpr,
                "seed_costs": x,
                "seed_residuals": None if state is None else state[0].tolist(),
            },
        )
    (cost_gv, cost_ev), s_star = solved

    t0 = scenario.t_star - cost_gv / scenario.beta
    t1 = scenario.t_star + cost_gv / scenario.gamma
    a = scenario.t_star - s_star / scenario.beta
    b = scenario.t_star + s_star / scenario.gamma
    segments = (
        ClassSegment(VehicleClass.GV, t0, a, cost_gv),
        ClassSegment(VehicleClass.EV, a, b, cost_ev),
        ClassSegment(VehicleClass.GV, b, t1, cost_gv),
    )
    _validate_no_deviation(scenario, segments, cost_gv, cost_ev)

    state = _mixed_state(scenario, cost_gv, cost_ev, inner_rtol)
    assert state is not None
    mass_gv, mass_ev, _ = state
    profile = _sample(scenario, (t0, t1), segments, dt)
    return EquilibriumSolution(
        scenario=scenario,
        window=(t0, t1),
        segments=segments,
        class_costs={VehicleClass.GV: cost_gv, VehicleClass.EV: cost_ev},
        class_counts={VehicleClass.GV: mass_gv, VehicleClass.EV: mass_ev},
        profile=profile,
    )


def _mixed_newton(residuals, x0, tol, max_iter: int = 60):
    """Damped Newton on the class-cost pair; None on failure."""
    x = np.array(x0, dtype=float)
    state = residuals((x[0], x[1]))
    if state is None:
        return None
    res, s_star = state
    for _ in range(max_iter):
        norm = float(np.max(np.abs(res)))
        if norm <= tol:
            return (float(x[0]), float(x[1])), s_star
        jac = np.empty((2, 2))
        ok = True
        for j in range(2):
            step = max(1e-7 * abs(x[j]), 1e-10)
            probe = x.copy()
            probe[j] += step
            probed = residuals((probe[0], probe[1]))
            if probed is None:
                probe[j] -= 2.0 * step
                probed = residuals((probe[0], probe[1]))
                step = -step
            if probed is None:
                ok = False
                break
            jac[:, j] = (probed[0] - res) / step
        if not ok:
            return None
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        if det == 0.0 or not math.isfinite(det):
            return None
        delta = -np.linalg.solve(jac, res)
        lam = 1.0
        accepted = False
        for _ in range(30):
            trial = x + lam * delta
            probed = residuals((trial[0], trial[1]))
            if probed is not None and float(np.max(np.abs(probed[0]))) < norm:
                x, (res, s_star) = trial, probed
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return None
    return None


def _mixed_nested(scenario, residuals, cg_hi_seed, ce_floor_of, pop_ev, tol):
    """Bisection fallback: outer search on C_GV, inner conservation on C_EV."""

    def inner_cost_ev(cg: float) -> float | None:
        lo = ce_floor_of(cg) * (1.0 + 1e-12)
        hi = cg * (1.0 - 1e-14)
        if lo >= hi:
            return None

        def ev_gap(ce: float) -> float:
            state = residuals((cg, ce))
            return -pop_ev if state is None else float(state[0][1])

        if ev_gap(hi) < 0.0:
            return None  # even a full-window EV bite is too small: cg too low
        return solve_bracketed(ev_gap, lo, hi, rtol=1e-13)

    def outer_gap(cg: float) -> float:
        ce = inner_cost_ev(cg)
        if ce is None:
            return -scenario.n_total
        state = residuals((cg, ce))
        if state is None:
            return -scenario.n_total
        return float(state[0][0])

    hi = cg_hi_seed
    for _ in range(50):
        if outer_gap(hi) >= 0.0:
            break
        hi *= 1.1
    else:
        return None
    lo = hi
    for _ in range(120):
        lo *= 0.85
        if outer_gap(lo) < 0.0:
            break
    else:
        return None
    cost_gv = solve_bracketed(outer_gap, lo, hi, rtol=1e-13)
    cost_ev = inner_cost_ev(cost_gv)
    if cost_ev is None:
        return None
    state = residuals((cost_gv, cost_ev))
    if state is None or float(np.max(np.abs(state[0]))) > tol:
        return None
    return (cost_gv, cost_ev), state[1]


def _validate_no_deviation(
    scenario: Scenario,
    segments: tuple[ClassSegment, ...],
    cost_gv: float,
    cost_ev: float,
    n_check: int = 257,
) -> None:
    """Assert neither class can undercut its cost inside the other's segments.

    The GV-EV-GV topology is an assumption of the construction; this check
    turns it into a verified property and fails loudly if violated.
    """
    gv, ev = scenario.gv_energy, scenario.ev_energy
    slack_gv = 1e-9 * cost_gv
    slack_ev = 1e-9 * cost_ev
    for seg in segments:
        ts = np.linspace(seg.t_lo, seg.t_hi, n_check)
        sd = schedule_delay(ts, scenario)
        own = scenario.energy_model(seg.vehicle_class)
        residual = np.maximum(seg.equilibrium_cost - sd, 0.0)
        delay = invert_congestion_cost(own, scenario, residual)
        if seg.vehicle_class is VehicleClass.EV:
            tempted = congestion_cost(gv, scenario, delay) + sd
            if np.any(tempted < cost_gv - slack_gv):
                raise SolverError(
                    "mixed topology invalid: a GV commuter could profit inside "
                    "the EV segment",
                    diagnostics={"min_cost": float(np.min(tempted)), "cost_gv": cost_gv},
                )
        else:
            tempted = congestion_cost(ev, scenario, delay) + sd
            if np.any(tempted < cost_ev - slack_ev):
                raise SolverError(
                    "mixed topology invalid: an EV commuter could profit inside "
                    "a GV segment",
                    diagnostics={"min_cost": float(np.min(tempted)), "cost_ev": cost_ev},
                )


def _sample(
    scenario: Scenario,
    window: tuple[float, float],
    segments: tuple[ClassSegment, ...],
    dt: float,
    toll_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> TimeProfile:
    """Evaluate the solution curves on a uniform grid spanning the window.

    The grid is anchored so the preferred arrival time (where delay and flow
    peak) is a grid point; it starts at least two steps before the window and
    ends at least two steps after it, and delay and flows are identically
    zero outside the window.  ``toll_fn(times, delay)`` optionally fills the
    toll column (used by the system-optimum sampler).
    """
    t0, t1 = window
    times = _window_grid(scenario.t_star, window, dt)

    delay = np.zeros_like(times)
    flow_gv = np.zeros_like(times)
    flow_ev = np.zeros_like(times)
    cost_tt = np.zeros_like(times)
    cost_en = np.zeros_like(times)
    cost_sd = np.zeros_like(times)
    active = np.full(times.shape, -1, dtype=np.int8)

    tiny = 1e-12 * max(1.0, abs(t1))
    claimed = np.zeros(times.shape, dtype=bool)
    for seg in segments:
        mask = (times >= seg.t_lo - tiny) & (times <= seg.t_hi + tiny) & ~claimed
        if not np.any(mask):
            continue
        claimed |= mask
        model = scenario.energy_model(seg.vehicle_class)
        sd = schedule_delay(times[mask], scenario)
        residual = np.maximum(seg.equilibrium_cost - sd, 0.0)
        seg_delay = invert_congestion_cost(model, scenario, residual)
        seg_flow = flow_from_delay(seg_delay, scenario)
        delay[mask] = seg_delay
        if seg.vehicle_class is VehicleClass.GV:
            flow_gv[mask] = seg_flow
        else:
            flow_ev[mask] = seg_flow
        cost_tt[mask] = scenario.alpha * seg_delay
        cost_en[mask] = model.c1 * seg_delay + model.c2 * seg_delay**2
        cost_sd[mask] = sd
        active[mask] = _class_index(seg.vehicle_class)

    toll = np.zeros_like(times)
    if toll_fn is not None:
        toll = np.where(claimed, toll_fn(times, delay), 0.0)
    total = cost_tt + cost_en + cost_sd + toll
    return TimeProfile(
        times=times,
        dt=dt,
        window=window,
        delay=delay,
        flow_total=flow_gv + flow_ev,
        flow_gv=flow_gv,
        flow_ev=flow_ev,
        cost_travel_time=cost_tt,
        cost_energy=cost_en,
        cost_schedule=cost_sd,
        toll=toll,
        cost_total=total,
        active=active,
    )


def sample_profiles(solution: EquilibriumSolution, dt: float) -> TimeProfile:
    """Resample a solved pattern onto a uniform grid with spacing ``dt`` hours."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if solution.is_empty:
        return _zero_profile(solution.scenario.t_star, dt)
    return _sample(solution.scenario, solution.window, solution.segments, dt)


def solution_delay(solution: EquilibriumSolution, times: np.ndarray) -> np.ndarray:
    """Exact equilibrium delay at arbitrary arrival times (0 outside the window)."""
    times = np.asarray(times, dtype=float)
    delay = np.zeros_like(times)
    scenario = solution.scenario
    for seg in solution.segments:
        mask = (times >= seg.t_lo) & (times <= seg.t_hi)
        if not np.any(mask):
            continue
        model = scenario.energy_model(seg.vehicle_class)
        residual = np.maximum(seg.equilibrium_cost - schedule_delay(times[mask], scenario), 0.0)
        delay[mask] = invert_congestion_cost(model, scenario, residual)
    return delay
