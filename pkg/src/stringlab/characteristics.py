"""Exact global integration of the augmented string system by characteristics.

The augmented system

    dt tau  + v ds tau  =  tau ds v,      dt v    + v ds v    =  tau ds tau,
    dt eta  + v ds eta  = -tau ds zeta,   dt zeta + v ds zeta = -tau ds eta,

diagonalizes along the families ds/dt = v + eps*tau, eps in {+1, -1}: the
quantities (v - eps*tau) and (eta + eps*zeta) ride each family unchanged.

Straightening map.  xi(t, .) with dy xi = tau(t, xi(t, y)), dt xi =
v(t, xi(t, y)) and xi(0, 0) = 0 solves the unit-speed wave equation
dtt xi = dyy xi, so d'Alembert's formula determines it globally from the
initial data:

    xi(t, y) = [xi0(y + t) + xi0(y - t)]/2 + [Phi(y + t) - Phi(y - t)]/2,
    Phi(y)   = integral_0^y v(0, xi0(sigma)) dsigma,
    (dt xi +- dy xi)(t, y) = (v +- tau)(0, xi0(y +- t)).

State recovery at s = xi(t, y) pairs each invariant with its feeding foot:

    (v + tau)(t, s) = (v + tau)(0, xi0(y + t)),   eta - zeta likewise,
    (v - tau)(t, s) = (v - tau)(0, xi0(y - t)),   eta + zeta likewise.

Inside the window delta <= tau +- (v - alpha) <= 1/delta the slope dy xi
stays in [delta, 1/delta] for all time, xi(t, .) is bi-Lipschitz, and the
formulas define a global solution for every measurable initial state.
Evolution is evaluation: there is no time stepping, and discretization
error lives only in the initial-curve tables and field interpolation.

Smooth profiles are integrated by fixed-step RK4 in y (several substeps
per grid cell) and stored as monotone cubic Hermite tables; piecewise
constant (rough) profiles integrate exactly to piecewise-linear tables and
use cell lookups for the transported packets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import DomainError, StateU
from .profiles import CellField, Profile, centered_slopes, cubic_interp, cumulative_integral
from .waves import StringGraph


class InadmissibleDataError(ValueError):
    """Initial data admits no global bi-Lipschitz straightening."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


@dataclass
class AdmissibilityWindow:
    alpha: float
    delta: float
    sup_v_minus_tau: float
    inf_v_plus_tau: float


def admissibility(profile: Profile, delta_cap: float = 1.0 - 1e-12) -> AdmissibilityWindow:
    """Best centering alpha and largest window half-width delta for the data.

    Global solvability requires v - tau < v' + tau' between any two samples;
    the optimal alpha is the midpoint of [sup(v - tau), inf(v + tau)] and the
    returned delta also respects the upper bound tau +- (v - alpha) <= 1/delta.
    Raises InadmissibleDataError carrying the violating sample pair.
    """
    if np.any(profile.tau <= 0.0):
        i = int(np.argmin(profile.tau))
        raise InadmissibleDataError(
            f"tau must be positive; tau = {profile.tau[i]:.6g} at s = {profile.s_samples[i]:.6g}",
            pair=(i, i),
        )
    wm = profile.v - profile.tau
    wp = profile.v + profile.tau
    i = int(np.argmax(wm))
    j = int(np.argmin(wp))
    s = profile.s_samples
    if wm[i] >= wp[j]:
        raise InadmissibleDataError(
            "no admissible window: "
            f"(v - tau)(s = {s[i]:.6g}) = {wm[i]:.6g} >= (v + tau)(s = {s[j]:.6g}) = {wp[j]:.6g}",
            pair=(i, j),
        )
    alpha = 0.5 * (wm[i] + wp[j])
    delta_low = 0.5 * (wp[j] - wm[i])
    hi = max(np.max(wp) - alpha, alpha - np.min(wm))
    delta = min(delta_low, 1.0 / hi, delta_cap)
    return AdmissibilityWindow(alpha, delta, float(wm[i]), float(wp[j]))


class _ScalarPair:
    """Pure-python cubic Hermite lookup of (tau, v), for the tight RK4 loop."""

    __slots__ = ("x0", "inv_dx", "n", "periodic", "ft", "mt", "fv", "mv")

    def __init__(self, x0, dx, tau, v, boundary):
        self.x0 = x0
        self.inv_dx = 1.0 / dx
        self.n = len(tau)
        self.periodic = boundary == "periodic"
        self.ft = tau.tolist()
        self.mt = (centered_slopes(tau, dx, boundary) * dx).tolist()
        self.fv = v.tolist()
        self.mv = (centered_slopes(v, dx, boundary) * dx).tolist()

    def __call__(self, x):
        u = (x - self.x0) * self.inv_dx
        n = self.n
        if self.periodic:
            u = u % n
            i = int(u)
            if i >= n:
                i = n - 1
            ip = i + 1 if i + 1 < n else 0
        else:
            if u <= 0.0:
                return self.ft[0], self.fv[0]
            if u >= n - 1:
                return self.ft[n - 1], self.fv[n - 1]
            i = int(u)
            if i > n - 2:
                i = n - 2
            ip = i + 1
        t = u - i
        s = 1.0 - t
        h00 = (1.0 + 2.0 * t) * s * s
        h10 = t * s * s
        h01 = t * t * (3.0 - 2.0 * t)
        h11 = t * t * (t - 1.0)
        ft, fv = self.ft, self.fv
        mt, mv = self.mt, self.mv
        return (
            h00 * ft[i] + h10 * mt[i] + h01 * ft[ip] + h11 * mt[ip],
            h00 * fv[i] + h10 * mv[i] + h01 * fv[ip] + h11 * mv[ip],
        )


def _hermite_table_eval(y0, h, nodes, slopes, q, deriv=False):
    """Vectorized cubic Hermite on the uniform table (clamped indices)."""
    m = len(nodes)
    u = np.clip((np.asarray(q, dtype=float) - y0) / h, 0.0, m - 1.0)
    i = np.minimum(u.astype(int), m - 2)
    t = u - i
    f0, f1 = nodes[i], nodes[i + 1]
    m0, m1 = slopes[i] * h, slopes[i + 1] * h
    if deriv:
        d00 = 6.0 * t * (t - 1.0)
        d10 = (1.0 - t) * (1.0 - 3.0 * t)
        d01 = -d00
        d11 = t * (3.0 * t - 2.0)
        return (d00 * f0 + d10 * m0 + d01 * f1 + d11 * m1) / h
    h00 = (1.0 + 2.0 * t) * (1.0 - t) ** 2
    h10 = t * (1.0 - t) ** 2
    h01 = t**2 * (3.0 - 2.0 * t)
    h11 = t**2 * (t - 1.0)
    return h00 * f0 + h10 * m0 + h01 * f1 + h11 * m1


@dataclass
class CharacteristicFlow:
    """Immutable evaluation machinery for one set of initial data.

    All methods are pure and safe for concurrent callers; building is
    single-threaded.  `alpha`/`delta` record the admissible window actually
    used; slopes of the initial curve are certified inside
    [delta - tol, 1/delta + tol] at build time.
    """

    profile: Profile
    alpha: float
    delta: float
    mode: str  # "smooth" or "pc"
    # smooth tables (uniform in y)
    y_first: float = 0.0
    h: float = 0.0
    xi_nodes: np.ndarray | None = None
    xi_slopes: np.ndarray | None = None
    phi_nodes: np.ndarray | None = None
    phi_slopes: np.ndarray | None = None
    # pc tables
    y_edges: np.ndarray | None = None
    s_edges: np.ndarray | None = None
    cell_tau: np.ndarray | None = None
    cell_v: np.ndarray | None = None
    pc_phi_edges: np.ndarray | None = None
    # periodic extension data
    y_period: float | None = None
    s_period: float | None = None
    phi_period: float | None = None
    # packet samples (n, 2 + 2d): [v+tau, v-tau, eta-zeta, eta+zeta]
    pk_values: np.ndarray | None = None
    pk_slopes: np.ndarray | None = None

    # -- initial curve -----------------------------------------------------

    def _smooth_reduce(self, y):
        y = np.asarray(y, dtype=float)
        if self.y_period is None:
            return y, np.zeros_like(y)
        wind = np.floor((y - self.y_first) / self.y_period)
        return y - wind * self.y_period, wind

    def xi0(self, y):
        """Initial curve xi(0, y), defined for every real y."""
        if self.mode == "pc":
            return self._pc_xi0(y)
        yr, wind = self._smooth_reduce(y)
        val = _hermite_table_eval(self.y_first, self.h, self.xi_nodes, self.xi_slopes, yr)
        if self.y_period is not None:
            val = val + wind * self.s_period
        else:
            lo = self.y_first
            hi = self.y_first + (len(self.xi_nodes) - 1) * self.h
            below = yr < lo
            above = yr > hi
            val = np.where(below, self.xi_nodes[0] + self.xi_slopes[0] * (yr - lo), val)
            val = np.where(above, self.xi_nodes[-1] + self.xi_slopes[-1] * (yr - hi), val)
        return val

    def phi0(self, y):
        """Antiderivative of v(0, xi0(.)), normalized to vanish at y = 0."""
        if self.mode == "pc":
            return self._pc_phi0(y)
        yr, wind = self._smooth_reduce(y)
        val = _hermite_table_eval(self.y_first, self.h, self.phi_nodes, self.phi_slopes, yr)
        if self.y_period is not None:
            val = val + wind * self.phi_period
        else:
            lo = self.y_first
            hi = self.y_first + (len(self.phi_nodes) - 1) * self.h
            below = yr < lo
            above = yr > hi
            val = np.where(below, self.phi_nodes[0] + self.phi_slopes[0] * (yr - lo), val)
            val = np.where(above, self.phi_nodes[-1] + self.phi_slopes[-1] * (yr - hi), val)
        return val

    def _pc_cell(self, y):
        y = np.asarray(y, dtype=float)
        if self.y_period is not None:
            wind = np.floor((y - self.y_edges[0]) / self.y_period)
            yr = y - wind * self.y_period
        else:
            wind = np.zeros_like(y)
            yr = y
        k = np.searchsorted(self.y_edges, yr, side="right") - 1
        k = np.clip(k, 0, len(self.y_edges) - 2)
        return yr, wind, k

    def _pc_xi0(self, y):
        yr, wind, k = self._pc_cell(y)
        val = self.s_edges[k] + (yr - self.y_edges[k]) * self.cell_tau[k]
        if self.y_period is not None:
            return val + wind * self.s_period
        lo, hi = self.y_edges[0], self.y_edges[-1]
        val = np.where(yr < lo, self.s_edges[0] + self.cell_tau[0] * (yr - lo), val)
        val = np.where(yr > hi, self.s_edges[-1] + self.cell_tau[-1] * (yr - hi), val)
        return val

    def _pc_phi0(self, y):
        yr, wind, k = self._pc_cell(y)
        phi_edges = self.pc_phi_edges
        val = phi_edges[k] + (yr - self.y_edges[k]) * self.cell_v[k]
        if self.y_period is not None:
            return val + wind * self.phi_period
        lo, hi = self.y_edges[0], self.y_edges[-1]
        val = np.where(yr < lo, phi_edges[0] + self.cell_v[0] * (yr - lo), val)
        val = np.where(yr > hi, phi_edges[-1] + self.cell_v[-1] * (yr - hi), val)
        return val

    def xi0_inverse(self, s):
        """Monotone inversion of the initial curve."""
        if self.mode == "pc":
            s = np.asarray(s, dtype=float)
            if self.s_period is not None:
                wind = np.floor((s - self.s_edges[0]) / self.s_period)
                sr = s - wind * self.s_period
            else:
                wind = np.zeros_like(s)
                sr = s
            k = np.clip(np.searchsorted(self.s_edges, sr, side="right") - 1, 0, len(self.s_edges) - 2)
            val = self.y_edges[k] + (sr - self.s_edges[k]) / self.cell_tau[k]
            if self.s_period is not None:
                return val + wind * self.y_period
            lo, hi = self.s_edges[0], self.s_edges[-1]
            val = np.where(sr < lo, self.y_edges[0] + (sr - lo) / self.cell_tau[0], val)
            val = np.where(sr > hi, self.y_edges[-1] + (sr - hi) / self.cell_tau[-1], val)
            return val
        s = np.asarray(s, dtype=float)
        if self.s_period is not None:
            base = self.xi_nodes[0]
            wind = np.floor((s - base) / self.s_period)
            sr = s - wind * self.s_period
        else:
            wind = np.zeros_like(s)
            sr = s
        j = np.clip(np.searchsorted(self.xi_nodes, sr, side="right") - 1, 0, len(self.xi_nodes) - 2)
        lo = self.y_first + j * self.h
        hi = lo + self.h
        for _ in range(48):
            mid = 0.5 * (lo + hi)
            too_low = _hermite_table_eval(self.y_first, self.h, self.xi_nodes, self.xi_slopes, mid) < sr
            lo = np.where(too_low, mid, lo)
            hi = np.where(too_low, hi, mid)
        y = 0.5 * (lo + hi)
        if self.s_period is None:
            below = sr < self.xi_nodes[0]
            above = sr > self.xi_nodes[-1]
            y_lo = self.y_first
            y_hi = self.y_first + (len(self.xi_nodes) - 1) * self.h
            y = np.where(below, y_lo + (sr - self.xi_nodes[0]) / self.xi_slopes[0], y)
            y = np.where(above, y_hi + (sr - self.xi_nodes[-1]) / self.xi_slopes[-1], y)
            return y
        return y + wind * self.y_period

    # -- transported packets ----------------------------------------------

    def invariants_at(self, y):
        """(v+tau, v-tau, eta-zeta, eta+zeta) of the initial data at xi0(y)."""
        d = self.profile.d
        if self.mode == "pc":
            _, _, k = self._pc_cell(y)
            p = self.pk_values[k]
        else:
            s = self.xi0(y)
            p = cubic_interp(self.profile.s0, self.profile.ds, self.pk_values, s,
                             self.profile.boundary, slopes=self.pk_slopes)
        return p[..., 0], p[..., 1], p[..., 2:2 + d], p[..., 2 + d:]


def _packet_samples(profile: Profile):
    ap = profile.v + profile.tau
    am = profile.v - profile.tau
    cp = profile.eta - profile.zeta
    cm = profile.eta + profile.zeta
    return np.concatenate([ap[:, None], am[:, None], cp, cm], axis=1)


def build_flow(profile: Profile, alpha: float | None = None, delta: float | None = None,
               substeps: int = 6, slope_tol: float = 1e-9) -> CharacteristicFlow:
    """Construct the straightening map for admissible initial data.

    Smooth profiles: fixed-step RK4 on d(xi)/dy = tau(0, xi) (at least
    `substeps` steps per grid cell), with the running integral of
    v(0, xi0(.)) carried in the same sweep; both stored as cubic Hermite
    tables whose node slopes are the exact ODE right-hand sides.  Rough
    profiles integrate exactly: xi0 is piecewise linear cell by cell.
    Raises InadmissibleDataError through `admissibility`; a slope escaping
    [delta - tol, 1/delta + tol] raises DomainError (unreachable for data
    that passed admissibility).
    """
    if alpha is None or delta is None:
        win = admissibility(profile)
        alpha, delta = win.alpha, win.delta
    pk = _packet_samples(profile)

    if profile.rough:
        flow = _build_flow_pc(profile, alpha, delta, pk)
    else:
        flow = _build_flow_smooth(profile, alpha, delta, pk, substeps)

    slopes = flow.xi_slopes if flow.mode == "smooth" else flow.cell_tau
    if np.min(slopes) < delta - slope_tol or np.max(slopes) > 1.0 / delta + slope_tol:
        raise DomainError("initial-curve slope escaped [delta, 1/delta]")
    return flow


def _build_flow_pc(profile, alpha, delta, pk) -> CharacteristicFlow:
    n, ds = profile.n, profile.ds
    s_edges = profile.s0 + ds * np.arange(n + 1)
    tau_c = profile.tau.copy()
    v_c = profile.v.copy()
    dy = ds / tau_c
    raw = np.concatenate([[0.0], np.cumsum(dy)])
    raw_phi = np.concatenate([[0.0], np.cumsum(v_c * dy)])
    if not s_edges[0] <= 0.0 <= s_edges[-1]:
        raise DomainError("the grid window must contain s = 0 (normalization xi(0,0) = 0)")
    j0 = min(int((0.0 - profile.s0) / ds), n - 1)
    y_edges = raw - (raw[j0] + (0.0 - s_edges[j0]) / tau_c[j0])
    phi_edges = raw_phi - (raw_phi[j0] + (0.0 - s_edges[j0]) / tau_c[j0] * v_c[j0])
    periodic = profile.boundary == "periodic"
    return CharacteristicFlow(
        profile, alpha, delta, "pc",
        y_edges=y_edges, s_edges=s_edges, cell_tau=tau_c, cell_v=v_c,
        pc_phi_edges=phi_edges,
        y_period=float(raw[-1]) if periodic else None,
        s_period=n * ds if periodic else None,
        phi_period=float(raw_phi[-1]) if periodic else None,
        pk_values=pk,
    )


def _build_flow_smooth(profile, alpha, delta, pk, substeps) -> CharacteristicFlow:
    n, ds = profile.n, profile.ds
    rhs = _ScalarPair(profile.s0, ds, profile.tau, profile.v, profile.boundary)
    tau_max = float(np.max(profile.tau))
    tau_min = float(np.min(profile.tau))
    h = ds / (substeps * tau_max)
    periodic = profile.boundary == "periodic"

    def sweep(h_step, s_target, cap):
        """RK4 march of (xi, phi) from (0, 0); returns node and slope lists."""
        xi, phi = 0.0, 0.0
        xs, ps, ts, vs = [0.0], [0.0], [], []
        extra = 0
        for _ in range(cap):
            t1, v1 = rhs(xi)
            ts.append(t1)
            vs.append(v1)
            x2 = xi + 0.5 * h_step * t1
            t2, v2 = rhs(x2)
            x3 = xi + 0.5 * h_step * t2
            t3, v3 = rhs(x3)
            x4 = xi + h_step * t3
            t4, v4 = rhs(x4)
            xi = xi + h_step / 6.0 * (t1 + 2.0 * t2 + 2.0 * t3 + t4)
            phi = phi + h_step / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
            xs.append(xi)
            ps.append(phi)
            if (h_step > 0 and xi >= s_target) or (h_step < 0 and xi <= s_target):
                extra += 1
                if extra >= 3:
                    break
        else:
            raise DomainError("initial-curve integration failed to reach its target")
        t1, v1 = rhs(xi)
        ts.append(t1)
        vs.append(v1)
        return xs, ps, ts, vs

    if periodic:
        period = n * ds
        if not profile.s0 <= 0.0 <= profile.s0 + period:
            raise DomainError("the grid window must contain s = 0 (normalization xi(0,0) = 0)")
        cap = int(period / (tau_min * h)) + 8
        xs, ps, ts, vs = sweep(h, period, cap)
        flow = CharacteristicFlow(
            profile, alpha, delta, "smooth",
            y_first=0.0, h=h,
            xi_nodes=np.array(xs), xi_slopes=np.array(ts),
            phi_nodes=np.array(ps), phi_slopes=np.array(vs),
            s_period=period, pk_values=pk,
            pk_slopes=centered_slopes(pk, ds, profile.boundary),
        )
        # y-period: the root of xi0(y) = period in the freshly built table
        y_p = _table_root(flow, period)
        flow.y_period = float(y_p)
        flow.phi_period = float(_hermite_table_eval(0.0, h, flow.phi_nodes, flow.phi_slopes, y_p))
        return flow

    s_lo = profile.s0
    s_hi = profile.s0 + (n - 1) * ds
    if not s_lo <= 0.0 <= s_hi:
        raise DomainError("the grid window must contain s = 0 (normalization xi(0,0) = 0)")
    cap = int((s_hi - s_lo) / (tau_min * h)) + 8
    xs_f, ps_f, ts_f, vs_f = sweep(h, s_hi, cap)
    xs_b, ps_b, ts_b, vs_b = sweep(-h, s_lo, cap)
    m_b = len(xs_b)
    xi_nodes = np.array(xs_b[::-1] + xs_f[1:])
    phi_nodes = np.array(ps_b[::-1] + ps_f[1:])
    xi_slopes = np.array(ts_b[::-1] + ts_f[1:])
    phi_slopes = np.array(vs_b[::-1] + vs_f[1:])
    return CharacteristicFlow(
        profile, alpha, delta, "smooth",
        y_first=-(m_b - 1) * h, h=h,
        xi_nodes=xi_nodes, xi_slopes=xi_slopes,
        phi_nodes=phi_nodes, phi_slopes=phi_slopes,
        pk_values=pk, pk_slopes=centered_slopes(pk, ds, profile.boundary),
    )


def _table_root(flow: CharacteristicFlow, s_value: float) -> float:
    """y with xi0(y) = s_value, from the raw smooth table (no reduction)."""
    nodes, slopes, h = flow.xi_nodes, flow.xi_slopes, flow.h
    j = int(np.clip(np.searchsorted(nodes, s_value) - 1, 0, len(nodes) - 2))
    lo, hi = flow.y_first + j * h, flow.y_first + (j + 1) * h
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _hermite_table_eval(flow.y_first, h, nodes, slopes, mid) < s_value:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def xi_evaluate(flow: CharacteristicFlow, t, y):
    """(xi, dt xi, dy xi) at (t, y) from the d'Alembert formulas."""
    y = np.asarray(y, dtype=float)
    yp = y + t
    ym = y - t
    xi = 0.5 * (flow.xi0(yp) + flow.xi0(ym)) + 0.5 * (flow.phi0(yp) - flow.phi0(ym))
    ap_p, am_p, _, _ = flow.invariants_at(yp)
    ap_m, am_m, _, _ = flow.invariants_at(ym)
    dxi_dt = 0.5 * (ap_p + am_m)
    dxi_dy = 0.5 * (ap_p - am_m)
    return xi, dxi_dt, dxi_dy


def _xi_only(flow, t, y):
    yp = y + t
    ym = y - t
    return 0.5 * (flow.xi0(yp) + flow.xi0(ym)) + 0.5 * (flow.phi0(yp) - flow.phi0(ym))


def xi_time_inverse(flow: CharacteristicFlow, t, s, y_tol: float = 1e-12):
    """y with xi(t, y) = s, by bracketed bisection plus one Newton step.

    The Lipschitz bounds delta <= dy xi <= 1/delta give an exact starting
    bracket, so bisection cannot fail; the final Newton polish uses the
    transported slope.
    """
    s = np.asarray(s, dtype=float)
    c = float(_xi_only(flow, t, np.zeros(1))[0])
    e = s - c
    margin = 1e-9 * (1.0 + np.abs(e))
    lo = np.where(e >= 0.0, e * flow.delta - margin, e / flow.delta - margin)
    hi = np.where(e >= 0.0, e / flow.delta + margin, e * flow.delta + margin)
    span = float(np.max(hi - lo)) if hi.size else 0.0
    iters = max(8, int(math.ceil(math.log2(max(span, 1e-300) / y_tol))) + 2) if span > y_tol else 8
    for _ in range(min(iters, 80)):
        mid = 0.5 * (lo + hi)
        too_low = _xi_only(flow, t, mid) < s
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
    y = 0.5 * (lo + hi)
    if flow.mode == "smooth":
        xi, _, dxi_dy = xi_evaluate(flow, t, y)
        y = y - (xi - s) / dxi_dy
    if y.size:
        resid = float(np.max(np.abs(_xi_only(flow, t, y) - s)))
        scale = 1.0 + float(np.max(np.abs(s)))
        if resid > 1e-8 * scale:
            # unreachable for a bi-Lipschitz curve; indicates a broken bracket
            raise RuntimeError(f"internal error: inversion residual {resid:.3e}")
    return y


def evolve_states(flow: CharacteristicFlow, t, s_points) -> StateU:
    """Exact solution state at time t and positions s_points."""
    y = xi_time_inverse(flow, t, s_points)
    ap, _, cp, _ = flow.invariants_at(y + t)
    _, am, _, cm = flow.invariants_at(y - t)
    tau = 0.5 * (ap - am)
    v = 0.5 * (ap + am)
    eta = 0.5 * (cp + cm)
    zeta = 0.5 * (cm - cp)
    return StateU(tau, v, eta, zeta)


def solve_augmented(source: Profile | CharacteristicFlow, t: float,
                    s_out: np.ndarray | None = None) -> Profile:
    """Evaluate the global solution at time t on a uniform output grid.

    `source` is either an initial profile (the flow is built on the fly) or a
    prebuilt CharacteristicFlow.  The output profile keeps the input grid,
    boundary mode and sampling semantics unless `s_out` overrides positions.
    """
    flow = source if isinstance(source, CharacteristicFlow) else build_flow(source)
    prof = flow.profile
    if s_out is None:
        s_pts = prof.s_samples
        s0, ds = prof.s0, prof.ds
    else:
        s_pts = np.asarray(s_out, dtype=float)
        ds = float(s_pts[1] - s_pts[0]) if len(s_pts) > 1 else prof.ds
        s0 = float(s_pts[0]) - (0.5 * ds if prof.rough else 0.0)
    U = evolve_states(flow, t, s_pts)
    return Profile(s0, ds, U.tau, U.v, U.eta, U.zeta, prof.boundary, prof.rough)


def tau_slope_consistency(flow: CharacteristicFlow, t, s_points) -> float:
    """Cross-check of the transported tau against the slope of xi(t, .).

    Returns max |(s_{i+1}-s_i)/(y_{i+1}-y_i) - tau_mid|, a second-order
    consistency measure between the integrated curve and the packet route.
    """
    s = np.asarray(s_points, dtype=float)
    y = xi_time_inverse(flow, t, s)
    U = evolve_states(flow, t, s)
    slope = np.diff(s) / np.diff(y)
    tau_mid = 0.5 * (U.tau[1:] + U.tau[:-1])
    return float(np.max(np.abs(slope - tau_mid)))


def evolve_cells(flow: CharacteristicFlow, t: float) -> CellField:
    """Exact piecewise-constant solution of rough data at time t.

    The state at (t, xi(t, y)) is constant between consecutive points of
    {b - t} union {b + t}, b running over the initial cell edges; mapping
    those y-breakpoints through xi(t, .) gives the exact evolved cells.
    """
    if flow.mode != "pc":
        raise DomainError("evolve_cells requires a rough (piecewise-constant) flow")
    b = flow.y_edges
    if flow.y_period is not None:
        yp = flow.y_period
        y0 = b[0]
        pts = np.concatenate([np.mod(b[:-1] - t - y0, yp), np.mod(b[:-1] + t - y0, yp)]) + y0
        pts = np.unique(pts)
        breaks_y = np.concatenate([pts, [pts[0] + yp]])
    else:
        pts = np.unique(np.concatenate([b - t, b + t]))
        breaks_y = pts
    mid = 0.5 * (breaks_y[:-1] + breaks_y[1:])
    ap, _, cp, _ = flow.invariants_at(mid + t)
    _, am, _, cm = flow.invariants_at(mid - t)
    states = StateU(0.5 * (ap - am), 0.5 * (ap + am), 0.5 * (cp + cm), 0.5 * (cm - cp))
    s_breaks = _xi_only(flow, t, breaks_y)
    return CellField(s_breaks, states, y_breaks=breaks_y)


def reconstruct_string(flow: CharacteristicFlow, times, s_points,
                       sub_dt: float = 5e-3) -> list[StringGraph]:
    """Recover the string graph X from an augmented solution.

    ds X = eta/tau and dt X = -zeta - v eta/tau; X(0, .) comes from a
    fourth-order cumulative s-integration normalized by X(0, 0) = 0, the
    anchor line X(t, 0) from composite-Simpson time integration (continuous
    evaluation makes the substep free), and each requested time slice is
    anchored there.  Requires tau >= delta/2 everywhere (degenerate states
    rejected) and a uniform s grid containing 0.
    """
    s_pts = np.asarray(s_points, dtype=float)
    ds = float(s_pts[1] - s_pts[0])
    if not s_pts[0] <= 0.0 <= s_pts[-1]:
        raise ValueError("s_points must contain 0 for the X(0,0) = 0 normalization")
    if float(np.min(flow.profile.tau)) < 0.5 * flow.delta:
        raise DomainError("degenerate state: tau below delta/2")

    def slice_fields(t):
        U = evolve_states(flow, t, s_pts)
        if np.any(U.tau < 0.5 * flow.delta):
            raise DomainError("degenerate state: tau below delta/2")
        dxds = U.eta / U.tau[:, None]
        dxdt = -U.zeta - U.v[:, None] * dxds
        return U, dxds, dxdt

    def anchored_x(t, x_at_zero):
        U, dxds, dxdt = slice_fields(t)
        prim = cumulative_integral(dxds, ds, "constant")
        at0 = cubic_interp(s_pts[0], ds, prim, np.zeros(1), "constant")[0]
        return StringGraph(t, float(s_pts[0]), ds, prim - at0 + x_at_zero, dxds, dxdt,
                           flow.profile.boundary)

    times = list(times)
    order = sorted(range(len(times)), key=lambda k: times[k])
    graphs: list[StringGraph | None] = [None] * len(times)

    def dxdt_at_zero(t):
        U = evolve_states(flow, t, np.zeros(1))
        return -U.zeta[0] - U.v[0] * U.eta[0] / U.tau[0]

    def line_integral(t_a, t_b, x_a):
        if t_b == t_a:
            return x_a
        steps = max(2, 2 * int(math.ceil(abs(t_b - t_a) / (2.0 * sub_dt))))
        tt = np.linspace(t_a, t_b, steps + 1)
        vals = np.stack([dxdt_at_zero(tk) for tk in tt])
        w = np.ones(steps + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return x_a + (t_b - t_a) / steps / 3.0 * np.tensordot(w, vals, axes=(0, 0))

    d = flow.profile.d
    # march outward from t = 0 through the sorted times, both directions
    pos = [times[k] for k in order if times[k] >= 0.0]
    neg = [times[k] for k in order if times[k] < 0.0][::-1]
    anchor = {0.0: np.zeros(d)}
    t_prev, x_prev = 0.0, np.zeros(d)
    for t in pos:
        x_prev = line_integral(t_prev, t, x_prev)
        anchor[t] = x_prev
        t_prev = t
    t_prev, x_prev = 0.0, np.zeros(d)
    for t in neg:
        x_prev = line_integral(t_prev, t, x_prev)
        anchor[t] = x_prev
        t_prev = t
    for k in order:
        graphs[k] = anchored_x(times[k], anchor[times[k]])
    return graphs


def residual_string(graphs: list[StringGraph], dt: float) -> np.ndarray:
    """Centered discrete residual of the graph-area system.

    dt(B dt X - C ds X) - ds(C dt X + D ds X) on the interior time levels of
    a uniformly spaced stack; s-derivatives wrap for periodic graphs and the
    two edge samples are dropped otherwise.
    """
    if len(graphs) < 3:
        raise ValueError("need at least three time levels")
    ds = graphs[0].ds
    periodic = graphs[0].boundary == "periodic"
    P, Q = [], []
    for g in graphs:
        _, B, C, D = g.area_coefficients()
        P.append(B[:, None] * g.dXdt - C[:, None] * g.dXds)
        Q.append(C[:, None] * g.dXdt + D[:, None] * g.dXds)
    out = []
    for k in range(1, len(graphs) - 1):
        dP = (P[k + 1] - P[k - 1]) / (2.0 * dt)
        if periodic:
            dQ = (np.roll(Q[k], -1, axis=0) - np.roll(Q[k], 1, axis=0)) / (2.0 * ds)
            out.append(dP - dQ)
        else:
            dQ = (Q[k][2:] - Q[k][:-2]) / (2.0 * ds)
            out.append(dP[1:-1] - dQ)
    return np.stack(out)


def residual_augmented(profiles: list[Profile], dt: float) -> dict:
    """Centered discrete residuals of the four augmented equations.

    Input: time-ordered profiles on one grid, uniformly spaced by dt.
    Returns per-equation residual stacks over the interior time levels plus
    their max magnitudes.
    """
    if len(profiles) < 3:
        raise ValueError("need at least three time levels")
    ds = profiles[0].ds
    periodic = profiles[0].boundary == "periodic"

    def ds_of(f):
        if periodic:
            return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * ds)
        pad = np.empty_like(f)
        pad[1:-1] = (f[2:] - f[:-2]) / (2.0 * ds)
        pad[0] = pad[1]
        pad[-1] = pad[-2]
        return pad

    res = {"tau": [], "v": [], "eta": [], "zeta": []}
    for k in range(1, len(profiles) - 1):
        pm, p0, pp = profiles[k - 1], profiles[k], profiles[k + 1]
        dt_tau = (pp.tau - pm.tau) / (2.0 * dt)
        dt_v = (pp.v - pm.v) / (2.0 * dt)
        dt_eta = (pp.eta - pm.eta) / (2.0 * dt)
        dt_zeta = (pp.zeta - pm.zeta) / (2.0 * dt)
        s_tau, s_v = ds_of(p0.tau), ds_of(p0.v)
        s_eta, s_zeta = ds_of(p0.eta), ds_of(p0.zeta)
        v0, tau0 = p0.v, p0.tau
        r_tau = dt_tau + v0 * s_tau - tau0 * s_v
        r_v = dt_v + v0 * s_v - tau0 * s_tau
        r_eta = dt_eta + v0[:, None] * s_eta + tau0[:, None] * s_zeta
        r_zeta = dt_zeta + v0[:, None] * s_zeta + tau0[:, None] * s_eta
        if not periodic:
            r_tau, r_v = r_tau[1:-1], r_v[1:-1]
            r_eta, r_zeta = r_eta[1:-1], r_zeta[1:-1]
        res["tau"].append(r_tau)
        res["v"].append(r_v)
        res["eta"].append(r_eta)
        res["zeta"].append(r_zeta)
    out = {k: np.stack(vs) for k, vs in res.items()}
    out["max_abs"] = max(float(np.max(np.abs(a))) for a in out.values())
    return out


def galilean_on_solution(flow: CharacteristicFlow, u: float, times, s_grid) -> list[Profile]:
    """Boosted solution slices: U~(t, s) = U(t, s - u t) + (0, u, 0, 0).

    The boosted initial data are recertified by `admissibility` (failure
    raises); evaluation uses the original flow at the shifted positions, so
    no resampling error enters.
    """
    prof = flow.profile
    shifted = Profile(prof.s0, prof.ds, prof.tau, prof.v + u, prof.eta, prof.zeta,
                      prof.boundary, prof.rough)
    admissibility(shifted)
    s_pts = np.asarray(s_grid, dtype=float)
    ds = float(s_pts[1] - s_pts[0]) if len(s_pts) > 1 else prof.ds
    out = []
    for t in times:
        U = evolve_states(flow, t, s_pts - u * t)
        out.append(Profile(float(s_pts[0]), ds, U.tau, U.v + u, U.eta, U.zeta,
                           prof.boundary, prof.rough))
    return out


def xi_wave_residual(flow: CharacteristicFlow, t_pts, y_pts, dy_fd: float,
                     dt_fd: float | None = None) -> float:
    """Max discrete wave-equation residual of xi on a (t, y) lattice.

    Centered second differences with distinct steps in t and y (equal steps
    would telescope exactly through the d'Alembert form and measure nothing);
    the residual decays at second order for smooth data.
    """
    if dt_fd is None:
        dt_fd = 0.5 * dy_fd
    worst = 0.0
    y = np.asarray(y_pts, dtype=float)
    for t in t_pts:
        dtt = (_xi_only(flow, t + dt_fd, y) - 2.0 * _xi_only(flow, t, y)
               + _xi_only(flow, t - dt_fd, y)) / dt_fd**2
        dyy = (_xi_only(flow, t, y + dy_fd) - 2.0 * _xi_only(flow, t, y)
               + _xi_only(flow, t, y - dy_fd)) / dy_fd**2
        worst = max(worst, float(np.max(np.abs(dtt - dyy))))
    return worst
