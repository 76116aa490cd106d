"""Viscous shallow-water dynamics on the periodic torus.

The unknowns are the layer depth h0 > 0 and the mean horizontal velocity
u0. The momentum equation is advanced in velocity form (divided through by
h0), with height-weighted viscous stresses and a linear bottom friction
gamma_bar * u0 / Re. All quadratic terms are evaluated on a padded grid and
the tendencies are truncated to the 2/3 wavenumber band, so the retained
modes follow the exact Galerkin dynamics of the band.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid, HField, div, grad, nonlinear

__all__ = [
    "Params",
    "SWState",
    "SWTrajectory",
    "DegenerateStateError",
    "BlowupError",
    "initial_wave",
    "sym_grad",
    "sw_rhs",
    "stable_dt",
    "sw_step",
    "sw_solve",
    "sw_energy",
]

# Explicit-step safety factors and the depth floor that aborts a run well
# before the equations degenerate.
C_ADV = 0.5
C_VISC = 0.2
VACUUM_FLOOR = 0.1


class DegenerateStateError(ValueError):
    """The layer depth reached the vacuum guard."""


class BlowupError(RuntimeError):
    """Non-finite values appeared during time stepping."""


@dataclass(frozen=True)
class Params:
    """Dimensionless constants of the thin-layer scaling.

    eps is the layer aspect ratio. The unscaled Froude number and friction
    coefficient recover as F0^2 = eps * F**2 and gamma = eps * gamma_bar.
    """

    F: float
    Re: float
    gamma_bar: float
    eps: float

    def __post_init__(self):
        for name in ("F", "Re", "gamma_bar", "eps"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.F <= 0.0 or self.Re <= 0.0:
            raise ValueError("F and Re must be positive")
        if self.gamma_bar < 0.0:
            raise ValueError(f"gamma_bar must be nonnegative, got {self.gamma_bar}")
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")


class SWState:
    """Layer depth and mean horizontal velocity at one instant."""

    __slots__ = ("t", "h0", "u0", "mass")

    def __init__(self, t: float, h0: HField, u0: HField):
        if h0.is_vector:
            raise ValueError("h0 must be a scalar field")
        if not u0.is_vector or u0.ncomp != h0.grid.n:
            raise ValueError("u0 must have one component per horizontal axis")
        if u0.grid != h0.grid:
            raise ValueError("h0 and u0 must share a grid")
        hmin = float(h0.values.min())
        if hmin <= 0.0:
            raise DegenerateStateError(f"min h0 = {hmin:.3g} is not positive")
        self.t = float(t)
        self.h0 = h0
        self.u0 = u0
        self.mass = h0.integral()

    @property
    def grid(self) -> Grid:
        return self.h0.grid

    def max_speed(self) -> float:
        """Largest pointwise Euclidean velocity magnitude."""
        return float(np.sqrt((self.u0.values**2).sum(axis=0)).max())


def initial_wave(
    grid: Grid,
    amplitude: float = 0.05,
    wavenumber: int = 1,
    velocity_amplitude: float = 0.0,
) -> SWState:
    """Single-mode initial data h0 = 1 + a cos(k x1), u0 = b sin(k x1) e1."""
    kap = 2.0 * np.pi * wavenumber / grid.L
    x1 = grid.coords()[0]
    h0 = HField(grid, 1.0 + amplitude * np.cos(kap * x1) + np.zeros(grid.shape))
    comps = [HField(grid, velocity_amplitude * np.sin(kap * x1) + np.zeros(grid.shape))]
    zero = HField(grid, np.zeros(grid.shape))
    comps += [zero] * (grid.n - 1)
    return SWState(0.0, h0, HField.stack(comps))


def sym_grad(u: HField) -> list[list[HField]]:
    """Symmetric velocity gradient D(u) = grad u + (grad u)^T, no 1/2."""
    n = u.grid.n
    du = [[u.component(i).dx(a) for a in range(n)] for i in range(n)]
    return [[du[i][a] + du[a][i] for a in range(n)] for i in range(n)]


def sw_rhs(s: SWState, p: Params) -> tuple[HField, HField]:
    """Tendencies (dth0, dtu0) of the depth/velocity system.

    dth0 = -div(h0 u0)
    dtu0 = -(u0 . grad) u0 - grad(h0^2 / 2F^2) / h0
           + (div(h0 D(u0)) + 2 grad(h0 div u0) - gamma_bar u0) / (Re h0)

    Divisions by h0 happen pointwise on the padded grid; both tendencies are
    projected onto the 2/3 band (the band edge is where the weighted viscous
    operator, effective viscosity about 4 max(h0) / Re, would outrun the
    advertised step bound).
    """
    h0, u0 = s.h0, s.u0
    g = s.grid
    n = g.n
    if h0.values.min() <= 0.0:
        raise DegenerateStateError("depth must stay positive")

    dth0 = -div(h0 * u0)

    du = [[u0.component(i).dx(a) for a in range(n)] for i in range(n)]
    adv = []
    for i in range(n):
        acc = u0.component(0) * du[i][0]
        for a in range(1, n):
            acc = acc + u0.component(a) * du[i][a]
        adv.append(acc)
    adv = HField.stack(adv)

    gradp = grad(h0 * h0) * (0.5 / p.F**2)
    pres = nonlinear(g, lambda gp, h: gp / h, gradp, h0)

    D = sym_grad(u0)
    hdiv = h0 * div(u0)
    visc = []
    for i in range(n):
        acc = (h0 * D[i][0]).dx(0)
        for a in range(1, n):
            acc = acc + (h0 * D[i][a]).dx(a)
        visc.append(acc + 2.0 * hdiv.dx(i))
    visc = HField.stack(visc) - p.gamma_bar * u0
    visc = nonlinear(g, lambda v, h: v / h, visc, h0) * (1.0 / p.Re)

    dtu0 = -adv - pres + visc
    return dth0.mask_two_thirds(), dtu0.mask_two_thirds()


def stable_dt(s: SWState, p: Params) -> float:
    """Explicit step bound min(C_ADV dx / max|u0|, C_VISC Re dx^2)."""
    dx = s.grid.dx
    bound = C_VISC * p.Re * dx * dx
    umax = s.max_speed()
    if umax > 0.0:
        bound = min(bound, C_ADV * dx / umax)
    return bound


def _advanced(s: SWState, w: float, kh: HField, ku: HField) -> SWState:
    return SWState(s.t + w, s.h0 + w * kh, s.u0 + w * ku)


def sw_step(s: SWState, p: Params, dt: float) -> SWState:
    """One explicit RK4 step of length dt.

    dt must respect the stable_dt bound. The new state is checked for
    finiteness and against the vacuum floor.
    """
    dt = float(dt)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    bound = stable_dt(s, p)
    if dt > bound * (1.0 + 1e-9):
        raise ValueError(f"dt = {dt:.4g} exceeds the stability bound {bound:.4g}")

    k1h, k1u = sw_rhs(s, p)
    k2h, k2u = sw_rhs(_advanced(s, 0.5 * dt, k1h, k1u), p)
    k3h, k3u = sw_rhs(_advanced(s, 0.5 * dt, k2h, k2u), p)
    k4h, k4u = sw_rhs(_advanced(s, dt, k3h, k3u), p)
    c = dt / 6.0
    h_new = s.h0 + c * (k1h + 2.0 * (k2h + k3h) + k4h)
    u_new = s.u0 + c * (k1u + 2.0 * (k2u + k3u) + k4u)

    t_new = s.t + dt
    if not (np.isfinite(h_new.values).all() and np.isfinite(u_new.values).all()):
        raise BlowupError(
            f"non-finite fields at t = {t_new:.6g} "
            f"(max|u| before the step was {s.max_speed():.3g})"
        )
    hmin = float(h_new.values.min())
    if hmin <= VACUUM_FLOOR:
        raise DegenerateStateError(
            f"min h0 = {hmin:.3g} at t = {t_new:.6g} breached the vacuum floor"
        )
    return SWState(t_new, h_new, u_new)


class SWTrajectory:
    """Uniformly spaced states with their stored tendencies.

    Keeping (dth0, dtu0) alongside each state makes the trajectory a cubic
    Hermite interpolant in time, fourth order between knots, which is what
    downstream consumers sample.
    """

    def __init__(self, states, tendencies, dt: float, scheme: str = "rk4"):
        states = list(states)
        tendencies = list(tendencies)
        if len(states) < 2:
            raise ValueError("a trajectory needs at least two states")
        if len(tendencies) != len(states):
            raise ValueError("one stored tendency per state")
        ts = np.array([s.t for s in states])
        if not np.all(np.diff(ts) > 0.0):
            raise ValueError("times must be strictly increasing")
        if np.abs(np.diff(ts) - dt).max() > 1e-9 * max(1.0, abs(dt)):
            raise ValueError("states must be uniformly spaced by dt")
        self.states = states
        self.tendencies = tendencies
        self.dt = float(dt)
        self.scheme = scheme

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> SWState:
        return self.states[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def interpolate(self, t: float) -> SWState:
        """State at an arbitrary time t by cubic Hermite interpolation."""
        t0 = self.states[0].t
        t1 = self.states[-1].t
        if not t0 - 1e-12 <= t <= t1 + 1e-12:
            raise ValueError(f"t = {t} outside [{t0}, {t1}]")
        i = min(int((t - t0) / self.dt), len(self.states) - 2)
        th = (t - self.states[i].t) / self.dt
        w00 = (1.0 + 2.0 * th) * (1.0 - th) ** 2
        w10 = th * (1.0 - th) ** 2
        w01 = th * th * (3.0 - 2.0 * th)
        w11 = th * th * (th - 1.0)
        sa, sb = self.states[i], self.states[i + 1]
        (fa_h, fa_u), (fb_h, fb_u) = self.tendencies[i], self.tendencies[i + 1]
        g = sa.grid
        h = HField(
            g,
            w00 * sa.h0.values
            + w01 * sb.h0.values
            + self.dt * (w10 * fa_h.values + w11 * fb_h.values),
        )
        u = HField(
            g,
            w00 * sa.u0.values
            + w01 * sb.u0.values
            + self.dt * (w10 * fa_u.values + w11 * fb_u.values),
        )
        return SWState(t, h, u)

    def diagnostics(self, p: Params) -> list[dict]:
        """Per-state rows (t, mass, energy, min_h, max_u)."""
        rows = []
        for s in self.states:
            rows.append(
                {
                    "t": s.t,
                    "mass": s.mass,
                    "energy": sw_energy(s, p),
                    "min_h": float(s.h0.values.min()),
                    "max_u": s.max_speed(),
                }
            )
        return rows


def sw_solve(init: SWState, p: Params, T: float, dt: float) -> SWTrajectory:
    """Advance init over [t0, t0 + T] in steps of dt.

    T must be an integer multiple of dt so the trajectory stays uniform.
    Vacuum and blowup errors propagate with the failing time attached.
    """
    if not (T > 0.0 and dt > 0.0):
        raise ValueError("T and dt must be positive")
    nsteps = int(round(T / dt))
    if nsteps < 1 or abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T = {T} is not an integer multiple of dt = {dt}")
    states = [init]
    tendencies = [sw_rhs(init, p)]
    s = init
    for _ in range(nsteps):
        s = sw_step(s, p, dt)
        states.append(s)
        tendencies.append(sw_rhs(s, p))
    return SWTrajectory(states, tendencies, dt)


def sw_energy(s: SWState, p: Params) -> float:
    """Total energy E = int h0 |u0|^2 / 2 + h0^2 / (2 F^2).

    Quadratic and cubic integrands are assembled with padded products, so
    the mode-zero coefficient, hence the integral, is exact.
    """
    e = 0.5 * (s.h0 * s.h0).integral() / p.F**2
    for ui in s.u0.components():
        e += 0.5 * (s.h0 * (ui * ui)).integral()
    return float(e)
