"""Sampled one-dimensional state fields and their snapshot format.

A Profile stores the augmented state (tau, v, eta, zeta) on a uniform
s-grid with one of two boundary modes:

    periodic : values repeat with period n*ds,
    constant : values extend flat beyond both ends.

Two sampling semantics coexist.  Smooth profiles place samples at the grid
nodes s0 + i*ds and are interpolated with a centered-slope cubic Hermite
(C^1, locally third order).  Rough profiles are piecewise constant on the
cells [s0 + i*ds, s0 + (i+1)*ds): lookups return the cell value, which is
the faithful reading for merely measurable data.

Snapshots are one CSV per time slice (columns s, tau, v, eta_1..d,
zeta_1..d, floats with 17 significant digits, LF endings) plus a JSON
sidecar holding the window constants, grid, boundary mode and tolerances.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .geometry import StateHQYZ, StateU, from_rescaled, to_rescaled

BOUNDARY_MODES = ("periodic", "constant")


def _wrap(idx, n, boundary):
    if boundary == "periodic":
        return np.mod(idx, n)
    return np.clip(idx, 0, n - 1)


def centered_slopes(values: np.ndarray, ds: float, boundary: str) -> np.ndarray:
    """Second-order slope estimates (f[i+1] - f[i-1]) / (2 ds) along axis 0."""
    n = values.shape[0]
    up = _wrap(np.arange(n) + 1, n, boundary)
    dn = _wrap(np.arange(n) - 1, n, boundary)
    m = (values[up] - values[dn]) / (2.0 * ds)
    if boundary == "constant":
        # one-sided second-order at the ends
        if n >= 3:
            m[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * ds)
            m[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * ds)
        elif n == 2:
            m[0] = m[-1] = (values[1] - values[0]) / ds
    return m


def cubic_interp(x0: float, dx: float, values: np.ndarray, q, boundary: str = "periodic",
                 slopes: np.ndarray | None = None):
    """Cubic Hermite interpolation of uniform samples at query points q.

    Slopes default to centered differences, giving a C^1 interpolant with
    O(dx^3) error; pass exact slopes for Hermite data.  `values` may have
    trailing axes; the query may be any shape.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if slopes is None:
        slopes = centered_slopes(values, dx, boundary)
    q = np.asarray(q, dtype=float)
    u = (q - x0) / dx
    if boundary == "periodic":
        u = np.mod(u, n)
        i = np.minimum(u.astype(int), n - 1)
        ip = np.mod(i + 1, n)
    else:
        u = np.clip(u, 0.0, n - 1.0)
        i = np.minimum(u.astype(int), n - 2) if n >= 2 else np.zeros_like(u, dtype=int)
        ip = i + 1
    t = u - i
    extra = values.ndim - 1
    tt = t.reshape(t.shape + (1,) * extra)
    f0, f1 = values[i], values[ip]
    m0, m1 = slopes[i] * dx, slopes[ip] * dx
    h00 = (1.0 + 2.0 * tt) * (1.0 - tt) ** 2
    h10 = tt * (1.0 - tt) ** 2
    h01 = tt**2 * (3.0 - 2.0 * tt)
    h11 = tt**2 * (tt - 1.0)
    return h00 * f0 + h10 * m0 + h01 * f1 + h11 * m1


def linear_interp(x0: float, dx: float, values: np.ndarray, q, boundary: str = "periodic"):
    """Piecewise-linear interpolation of uniform samples (O(dx^2))."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    q = np.asarray(q, dtype=float)
    u = (q - x0) / dx
    if boundary == "periodic":
        u = np.mod(u, n)
        i = np.minimum(u.astype(int), n - 1)
        ip = np.mod(i + 1, n)
    else:
        u = np.clip(u, 0.0, n - 1.0)
        i = np.minimum(u.astype(int), n - 2) if n >= 2 else np.zeros_like(u, dtype=int)
        ip = i + 1
    t = u - i
    tt = t.reshape(t.shape + (1,) * (values.ndim - 1))
    return (1.0 - tt) * values[i] + tt * values[ip]


def cell_lookup(x0: float, dx: float, values: np.ndarray, q, boundary: str = "periodic"):
    """Piecewise-constant lookup: value of the cell [x0 + i dx, x0 + (i+1) dx)."""
    values = np.asarray(values)
    n = values.shape[0]
    q = np.asarray(q, dtype=float)
    i = np.floor((q - x0) / dx).astype(int)
    return values[_wrap(i, n, boundary)]


def cumulative_integral(f: np.ndarray, dx: float, boundary: str = "constant") -> np.ndarray:
    """Antiderivative samples of f on its own grid, zero at the first node.

    Composite trapezoid with the Euler-Maclaurin endpoint correction
    -dx^2/12 (f'_j - f'_0), i.e. fourth-order cumulative accuracy for smooth
    integrands; slopes come from centered differences.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    out = np.zeros_like(f)
    if n < 2:
        return out
    np.cumsum(0.5 * dx * (f[1:] + f[:-1]), axis=0, out=out[1:])
    m = centered_slopes(f, dx, boundary)
    return out - dx**2 / 12.0 * (m - m[0])


@dataclass
class CellField:
    """Piecewise-constant states between arbitrary ascending breakpoints.

    The exact representation of an evolved rough profile: `states` holds one
    state per cell [breaks[k], breaks[k+1]).  `y_breaks`, when present, are
    the straightened-coordinate preimages of the breakpoints.
    """

    breaks: np.ndarray
    states: StateU
    y_breaks: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.breaks) - 1

    def widths(self) -> np.ndarray:
        return np.diff(self.breaks)


@dataclass
class Profile:
    """Uniformly sampled augmented state over one spatial window."""

    s0: float
    ds: float
    tau: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    boundary: str = "periodic"
    rough: bool = False

    def __post_init__(self):
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError(f"boundary must be one of {BOUNDARY_MODES}")
        if self.ds <= 0.0:
            raise ValueError("ds must be positive")
        self.tau = np.asarray(self.tau, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=float)
        if self.eta.ndim == 1:
            self.eta = self.eta[:, None]
        if self.zeta.ndim == 1:
            self.zeta = self.zeta[:, None]

    @property
    def n(self) -> int:
        return self.tau.shape[0]

    @property
    def d(self) -> int:
        return self.eta.shape[1]

    @property
    def period(self) -> float:
        return self.n * self.ds

    @property
    def s_samples(self) -> np.ndarray:
        """Node positions for smooth profiles, cell centers for rough ones."""
        off = 0.5 * self.ds if self.rough else 0.0
        return self.s0 + off + self.ds * np.arange(self.n)

    def state(self) -> StateU:
        return StateU(self.tau, self.v, self.eta, self.zeta)

    def packed(self) -> np.ndarray:
        """All components side by side, shape (n, 2 + 2d)."""
        return np.concatenate(
            [self.tau[:, None], self.v[:, None], self.eta, self.zeta], axis=1
        )

    def fields_at(self, s) -> StateU:
        """State interpolated (smooth) or looked up (rough) at positions s."""
        if self.rough:
            p = cell_lookup(self.s0, self.ds, self.packed(), s, self.boundary)
        else:
            p = cubic_interp(self.s0, self.ds, self.packed(), s, self.boundary)
        d = self.d
        return StateU(p[..., 0], p[..., 1], p[..., 2:2 + d], p[..., 2 + d:])

    def to_hqyz(self) -> StateHQYZ:
        return from_rescaled(self.state())

    @classmethod
    def from_hqyz(cls, s0, ds, u: StateHQYZ, boundary="periodic", rough=False) -> "Profile":
        U = to_rescaled(u)
        return cls(s0, ds, U.tau, U.v, U.eta, U.zeta, boundary, rough)

    @classmethod
    def from_state(cls, s0, ds, U: StateU, boundary="periodic", rough=False) -> "Profile":
        return cls(s0, ds, U.tau, U.v, U.eta, U.zeta, boundary, rough)


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(csv_path: str, profile: Profile, meta: dict | None = None) -> None:
    """One CSV time slice plus a JSON sidecar ('<csv_path>.meta.json')."""
    d = profile.d
    header = ["s", "tau", "v"]
    header += [f"eta_{k + 1}" for k in range(d)]
    header += [f"zeta_{k + 1}" for k in range(d)]
    s = profile.s_samples
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(profile.n):
            row = [s[i], profile.tau[i], profile.v[i]]
            row += list(profile.eta[i]) + list(profile.zeta[i])
            fh.write(",".join(fmt17(x) for x in row) + "\n")
    sidecar = {
        "grid": {"s0": profile.s0, "ds": profile.ds, "n": profile.n, "d": d},
        "boundary": profile.boundary,
        "rough": profile.rough,
    }
    if meta:
        sidecar.update(meta)
    with open(csv_path + ".meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_snapshot(csv_path: str) -> tuple[Profile, dict]:
    """Inverse of write_snapshot; lossless up to the 17-digit float format."""
    with open(csv_path + ".meta.json") as fh:
        meta = json.load(fh)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    d = meta["grid"]["d"]
    tau = data[:, 1]
    v = data[:, 2]
    eta = data[:, 3:3 + d]
    zeta = data[:, 3 + d:3 + 2 * d]
    prof = Profile(meta["grid"]["s0"], meta["grid"]["ds"], tau, v, eta, zeta,
                   meta["boundary"], meta["rough"])
    return prof, meta
