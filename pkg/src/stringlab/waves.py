"""Linear wave strings: the speed-kappa family solved by d'Alembert.

For 0 < kappa < 1 the wave equation  dtt X = kappa^2 dss X  propagates the
branch quantities (dt X +- kappa ds X) rigidly:

    (dt X +- kappa ds X)(t, s) = (dt X +- kappa ds X)(0, s +- kappa t),

so the constraints |dt X +- kappa ds X|^2 = 1 - kappa^2 (relativistic) and
<= 1 - kappa^2 (subrelativistic) are preserved for all time.  Solutions of
the wave equation with relativistic initial data are exact string graphs.

The module also provides the oscillatory family X^(m): unit-speed initial
profiles whose transverse ripples have amplitude ~ 1/m, so they converge
uniformly (at rate 1/m) to a smooth limit that is subrelativistic but not
relativistic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DomainError, SuperluminalError
from .profiles import Profile, cubic_interp, linear_interp

_TAIL_TOL = 1e-12


@dataclass
class StringGraph:
    """Sampled string graph X(t, .) with its derivative fields."""

    t: float
    s0: float
    ds: float
    X: np.ndarray      # (n, d)
    dXds: np.ndarray   # (n, d)
    dXdt: np.ndarray   # (n, d)
    boundary: str = "periodic"

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def s_samples(self) -> np.ndarray:
        return self.s0 + self.ds * np.arange(self.n)

    def area_coefficients(self):
        """Pointwise (A, B, C, D) of the graph-area variational system.

        A = sqrt((1+|ds X|^2)(1-|dt X|^2) + (dt X . ds X)^2), B = (1+|ds X|^2)/A,
        C = (dt X . ds X)/A, D = (1-|dt X|^2)/A.  Raises SuperluminalError when
        A^2 <= 0.
        """
        y2 = np.sum(self.dXds**2, axis=-1)
        w2 = np.sum(self.dXdt**2, axis=-1)
        yw = np.sum(self.dXds * self.dXdt, axis=-1)
        a2 = (1.0 + y2) * (1.0 - w2) + yw**2
        if np.any(a2 <= 0.0):
            raise SuperluminalError("superluminal graph: A^2 <= 0")
        A = np.sqrt(a2)
        return A, (1.0 + y2) / A, yw / A, (1.0 - w2) / A


@dataclass
class WaveInitialData:
    """Initial position/velocity profiles for the speed-kappa wave equation.

    x0, v0, dx0 are samples on the uniform grid; the optional callables give
    exact evaluation (and exact ds x0) where analytic formulas exist, which
    keeps constraint checks free of differencing error.
    """

    kappa: float
    s0: float
    ds: float
    x0: np.ndarray
    v0: np.ndarray
    dx0: np.ndarray
    boundary: str = "periodic"
    x0_fn: object = None
    v0_fn: object = None
    dx0_fn: object = None

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    @property
    def d(self) -> int:
        return self.x0.shape[1]

    @property
    def s_samples(self) -> np.ndarray:
        return self.s0 + self.ds * np.arange(self.n)


def wave_initial_from_functions(kappa, x0_fn, v0_fn, dx0_fn, s0=-2.0 * np.pi,
                                n=4096, period=4.0 * np.pi, boundary="periodic"):
    """Sample analytic initial data; the callables must return (..., d) arrays."""
    ds = period / n
    s = s0 + ds * np.arange(n)
    return WaveInitialData(kappa, s0, ds, x0_fn(s), v0_fn(s), dx0_fn(s),
                           boundary, x0_fn, v0_fn, dx0_fn)


def _check_tails(init: WaveInitialData, q: np.ndarray) -> None:
    lo, hi = init.s0, init.s0 + (init.n - 1) * init.ds
    if np.all((q >= lo) & (q <= hi)):
        return
    edge = max(
        np.max(np.abs(init.dx0[0])), np.max(np.abs(init.dx0[-1])),
        np.max(np.abs(init.v0[0])), np.max(np.abs(init.v0[-1])),
    )
    if edge > _TAIL_TOL:
        raise DomainError(
            "evaluation outside the data support needs constant tails "
            f"(edge derivative magnitude {edge:.3e})"
        )


def _v0_antiderivative_nodes(init: WaveInitialData) -> np.ndarray:
    # trapezoid antiderivative of the sampled v0, exact for its linear interpolant
    inc = 0.5 * init.ds * (init.v0[1:] + init.v0[:-1])
    out = np.zeros_like(init.v0)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def _eval_v0_antiderivative(init: WaveInitialData, nodes: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Antiderivative of the piecewise-linear v0 at arbitrary points.

    Within a cell the integral of the linear interpolant is quadratic in the
    local coordinate, so partial end cells are handled exactly.
    """
    n, ds = init.n, init.ds
    q = np.asarray(q, dtype=float)
    if init.boundary == "periodic":
        period = n * ds
        # total over one period: closing cell connects sample n-1 back to 0
        total = nodes[-1] + 0.5 * ds * (init.v0[-1] + init.v0[0])
        u = (q - init.s0) / ds
        wind = np.floor(u / n)
        u = u - wind * n
        i = np.minimum(u.astype(int), n - 1)
        t = u - i
        vi = init.v0[i]
        vip = init.v0[np.mod(i + 1, n)]
        tt = t[..., None]
        local = nodes[i] + ds * (vi * tt + 0.5 * (vip - vi) * tt**2)
        return local + wind[..., None] * total
    u = np.clip((q - init.s0) / ds, 0.0, n - 1.0)
    i = np.minimum(u.astype(int), n - 2)
    t = u - i
    tt = t[..., None]
    local = nodes[i] + ds * (init.v0[i] * tt + 0.5 * (init.v0[i + 1] - init.v0[i]) * tt**2)
    # flat tails: v0 constant beyond the ends
    below = q < init.s0
    above = q > init.s0 + (n - 1) * ds
    if np.any(below):
        local[below] = nodes[0] + (q[below, None] - init.s0) * init.v0[0]
    if np.any(above):
        hi = init.s0 + (n - 1) * ds
        local[above] = nodes[-1] + (q[above, None] - hi) * init.v0[-1]
    return local


def _eval_x0(init: WaveInitialData, q):
    if init.x0_fn is not None:
        return init.x0_fn(q)
    return cubic_interp(init.s0, init.ds, init.x0, q, init.boundary)


def _eval_dx0(init: WaveInitialData, q):
    if init.dx0_fn is not None:
        return init.dx0_fn(q)
    return cubic_interp(init.s0, init.ds, init.dx0, q, init.boundary)


def _eval_v0(init: WaveInitialData, q):
    if init.v0_fn is not None:
        return init.v0_fn(q)
    return linear_interp(init.s0, init.ds, init.v0, q, init.boundary)


def dalembert_wave_solve(init: WaveInitialData, t: float, s_out: np.ndarray | None = None) -> StringGraph:
    """Exact evaluation of the speed-kappa wave solution at time t.

    X(t, s) = [X0(s + kt) + X0(s - kt)]/2 + (1/2k) * integral of V0 over
    [s - kt, s + kt]; derivative fields follow by differentiating the same
    formula, so the returned graph is consistent to interpolation accuracy
    (exact when the initial data carry analytic callables).
    """
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    k = init.kappa
    if s_out is None:
        s_out = init.s_samples
        s0_out, ds_out = init.s0, init.ds
    else:
        s_out = np.asarray(s_out, dtype=float)
        s0_out, ds_out = float(s_out[0]), float(s_out[1] - s_out[0]) if len(s_out) > 1 else init.ds
    qp = s_out + k * t
    qm = s_out - k * t
    if init.boundary == "constant":
        _check_tails(init, np.concatenate([qp, qm]))
    x0p, x0m = _eval_x0(init, qp), _eval_x0(init, qm)
    dp, dm = _eval_dx0(init, qp), _eval_dx0(init, qm)
    vp, vm = _eval_v0(init, qp), _eval_v0(init, qm)
    X = 0.5 * (x0p + x0m)
    dXds = 0.5 * (dp + dm)
    dXdt = 0.5 * k * (dp - dm) + 0.5 * (vp + vm)
    if np.any(init.v0):
        nodes = _v0_antiderivative_nodes(init)
        Qp = _eval_v0_antiderivative(init, nodes, qp)
        Qm = _eval_v0_antiderivative(init, nodes, qm)
        X = X + (Qp - Qm) / (2.0 * k)
        dXds = dXds + (vp - vm) / (2.0 * k)
    return StringGraph(t, s0_out, ds_out, X, dXds, dXdt, init.boundary)


def branch_residuals(init: WaveInitialData):
    """|v0 +- kappa dx0|^2 - (1 - kappa^2) for both sign branches."""
    target = 1.0 - init.kappa**2
    out = []
    for eps in (1, -1):
        g = init.v0 + eps * init.kappa * init.dx0
        out.append(np.sum(g**2, axis=-1) - target)
    return out


def check_relativistic_init(init: WaveInitialData, tol: float = 1e-10) -> bool:
    """True when both branch constraints hold as equalities at every sample."""
    return all(np.max(np.abs(r)) <= tol for r in branch_residuals(init))


def check_subrelativistic_init(init: WaveInitialData, tol: float = 1e-10) -> bool:
    """True when both branch constraints hold as inequalities at every sample."""
    return all(np.max(r) <= tol for r in branch_residuals(init))


def oscillatory_family_init(mode: int, s0: float = -2.0 * np.pi, n: int = 4096,
                            period: float = 4.0 * np.pi) -> WaveInitialData:
    """Relativistic wave data with transverse ripples of amplitude ~ 1/mode.

    kappa = 2^{-1/2}; ds X(0, s) = (-sin s, cos s cos(m s), -cos s sin(m s))
    is a unit vector, dt X(0, .) = 0, so the branch constraints hold exactly.
    Derivative samples come from the analytic formula, not differencing.
    Requires mode >= 2 (the profile has 1/(mode - 1) amplitudes).
    """
    m = int(mode)
    if m != mode or m < 2:
        raise ValueError("mode must be an integer >= 2")

    def x0_fn(s):
        s = np.asarray(s, dtype=float)
        c1 = np.cos(s) - 1.0
        c2 = np.sin((m + 1) * s) / (2.0 * (m + 1)) + np.sin((m - 1) * s) / (2.0 * (m - 1))
        c3 = (np.cos((m + 1) * s) - 1.0) / (2.0 * (m + 1)) + (np.cos((m - 1) * s) - 1.0) / (2.0 * (m - 1))
        return np.stack([c1, c2, c3], axis=-1)

    def dx0_fn(s):
        s = np.asarray(s, dtype=float)
        return np.stack([-np.sin(s), np.cos(s) * np.cos(m * s), -np.cos(s) * np.sin(m * s)], axis=-1)

    def v0_fn(s):
        s = np.asarray(s, dtype=float)
        return np.zeros(s.shape + (3,))

    ds = period / n
    s = s0 + ds * np.arange(n)
    return WaveInitialData(2.0 ** -0.5, s0, ds, x0_fn(s), v0_fn(s), dx0_fn(s),
                           "periodic", x0_fn, v0_fn, dx0_fn)


def oscillatory_limit_init(s0: float = -2.0 * np.pi, n: int = 4096,
                           period: float = 4.0 * np.pi) -> WaveInitialData:
    """Uniform limit of the oscillatory family: X0 = (cos s - 1, 0, 0), V0 = 0.

    Subrelativistic but not relativistic: |kappa ds X|^2 = sin^2(s)/2 < 1/2
    away from the turning points.
    """

    def x0_fn(s):
        s = np.asarray(s, dtype=float)
        z = np.zeros_like(s)
        return np.stack([np.cos(s) - 1.0, z, z], axis=-1)

    def dx0_fn(s):
        s = np.asarray(s, dtype=float)
        z = np.zeros_like(s)
        return np.stack([-np.sin(s), z, z], axis=-1)

    def v0_fn(s):
        s = np.asarray(s, dtype=float)
        return np.zeros(s.shape + (3,))

    ds = period / n
    s = s0 + ds * np.arange(n)
    return WaveInitialData(2.0 ** -0.5, s0, ds, x0_fn(s), v0_fn(s), dx0_fn(s),
                           "periodic", x0_fn, v0_fn, dx0_fn)


def oscillatory_limit_solution(t, s) -> np.ndarray:
    """Closed form of the limit string: (cos s cos(t/sqrt(2)) - 1, 0, 0)."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    c = np.cos(s) * np.cos(2.0 ** -0.5 * t) - 1.0
    z = np.zeros_like(c)
    return np.stack([c, z, z], axis=-1)


def wave_to_augmented(init: WaveInitialData) -> Profile:
    """Embed wave data as an augmented-state profile with tau = kappa, v = 0.

    eta = kappa ds X, zeta = -dt X; relativistic wave data land exactly on the
    constraint manifold, subrelativistic data in its convex hull.
    """
    n, k = init.n, init.kappa
    tau = np.full(n, k)
    v = np.zeros(n)
    return Profile(init.s0, init.ds, tau, v, k * init.dx0, -init.v0, init.boundary)
