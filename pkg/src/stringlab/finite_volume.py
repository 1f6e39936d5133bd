"""First-order finite-volume oracle for the conservative (Y, Z) system.

    dt Y + ds((Z + qY)/h) = 0,    dt Z + ds((Y + qZ)/h) = 0,

with q = Y.Z and h = sqrt(1 + Y^2 + Z^2 + q^2) always derived from (Y, Z),
never evolved, so the companion conservation laws

    dt h + ds q = 0,    dt q + ds((q^2 - 1)/h) = 0,

remain genuine checks.  The scheme is local Lax-Friedrichs (Rusanov) with
interface speed bound |v| + tau = (|q| + 1)/h, first order and robust; this
module exists to cross-validate the exact characteristic solver, not to
compete with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import StateHQYZ, hamiltonian, to_rescaled
from .profiles import Profile


class CFLError(ValueError):
    """Requested step exceeds the stable CFL bound."""


@dataclass
class ConservativeState:
    """Cell-centered (Y, Z) values on a uniform periodic or padded grid."""

    s0: float
    ds: float
    Y: np.ndarray  # (n, d)
    Z: np.ndarray  # (n, d)
    boundary: str = "periodic"

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    def derived(self):
        """(h, q) recomputed from the evolved fields."""
        return hamiltonian(self.Y, self.Z)


def flux(Y, Z):
    """All four fluxes: fY = (Z + qY)/h, fZ = (Y + qZ)/h, fh = q, fq = (q^2-1)/h."""
    h, q = hamiltonian(Y, Z)
    hh = h[..., None]
    qq = q[..., None]
    fY = (Z + qq * Y) / hh
    fZ = (Y + qq * Z) / hh
    return fY, fZ, q, (q**2 - 1.0) / h


def max_signal_speed(Y, Z) -> float:
    """Sharp bound max |v| + tau = (|q| + 1)/h on the characteristic speeds."""
    h, q = hamiltonian(Y, Z)
    return float(np.max((np.abs(q) + 1.0) / h))


def _padded(state: ConservativeState):
    if state.boundary == "periodic":
        Y = np.concatenate([state.Y[-1:], state.Y, state.Y[:1]])
        Z = np.concatenate([state.Z[-1:], state.Z, state.Z[:1]])
    else:
        Y = np.concatenate([state.Y[:1], state.Y, state.Y[-1:]])
        Z = np.concatenate([state.Z[:1], state.Z, state.Z[-1:]])
    return Y, Z


def lax_friedrichs_step(state: ConservativeState, dt: float, cfl_max: float = 0.9) -> ConservativeState:
    """One conservative Rusanov update; raises CFLError above cfl_max."""
    speed = max_signal_speed(state.Y, state.Z)
    if dt * speed > cfl_max * state.ds:
        raise CFLError(f"dt = {dt:.3e} exceeds CFL {cfl_max} * ds / speed = "
                       f"{cfl_max * state.ds / speed:.3e}")
    Y, Z = _padded(state)
    fY, fZ, q, _ = flux(Y, Z)
    h = np.sqrt(1.0 + np.sum(Y**2, -1) + np.sum(Z**2, -1) + q**2)
    a_cell = (np.abs(q) + 1.0) / h
    a_iface = np.maximum(a_cell[:-1], a_cell[1:])[:, None]
    FY = 0.5 * (fY[:-1] + fY[1:]) - 0.5 * a_iface * (Y[1:] - Y[:-1])
    FZ = 0.5 * (fZ[:-1] + fZ[1:]) - 0.5 * a_iface * (Z[1:] - Z[:-1])
    lam = dt / state.ds
    return ConservativeState(
        state.s0, state.ds,
        state.Y - lam * (FY[1:] - FY[:-1]),
        state.Z - lam * (FZ[1:] - FZ[:-1]),
        state.boundary,
    )


def advance(state: ConservativeState, t_final: float, cfl: float = 0.9) -> tuple[ConservativeState, int]:
    """March to t_final with dt = cfl * ds / speed, re-bounded every step."""
    t, steps = 0.0, 0
    while t < t_final - 1e-14:
        dt = min(cfl * state.ds / max_signal_speed(state.Y, state.Z), t_final - t)
        state = lax_friedrichs_step(state, dt, cfl_max=cfl + 1e-12)
        t += dt
        steps += 1
    return state, steps


def conservation_totals(state: ConservativeState) -> dict:
    """Cell totals (times ds) of Y, Z and of the derived h and q.

    Periodic boundaries only: the evolved totals are conserved to rounding,
    the derived totals drift at the scheme's truncation order.
    """
    if state.boundary != "periodic":
        raise ValueError("conservation totals are defined for periodic boundaries")
    h, q = state.derived()
    return {
        "Y": state.ds * np.sum(state.Y, axis=0),
        "Z": state.ds * np.sum(state.Z, axis=0),
        "h": float(state.ds * np.sum(h)),
        "q": float(state.ds * np.sum(q)),
    }


def from_profile(profile: Profile) -> ConservativeState:
    """Cell data from an augmented-state profile through the perspective map."""
    u = profile.to_hqyz()
    return ConservativeState(profile.s0, profile.ds, u.Y.copy(), u.Z.copy(), profile.boundary)


def to_profile(state: ConservativeState, rough: bool = False) -> Profile:
    h, q = state.derived()
    U = to_rescaled(StateHQYZ(h, q, state.Y, state.Z))
    return Profile(state.s0, state.ds, U.tau, U.v, U.eta, U.zeta, state.boundary, rough)
