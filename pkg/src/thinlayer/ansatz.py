"""Second-order approximate solution built from a shallow-water state.

The approximation is polynomial in the vertical coordinate z with
horizontal-field coefficients:

    u_H = u0 + u1 z + u2 z^2/2,   u_V = w1 z + w2 z^2/2 + w3 z^3/6,
    p   = eps h0 - z - (2 eps F^2 / Re)(1 + eps^2 gamma_bar) div u0.

ZPoly carries that structure: z is an independent coordinate, so horizontal
derivatives act on coefficients and vertical derivatives shift them. The
incompressibility of the triple (u0, u1, u2) against (w1, w2, w3) is an
algebraic identity of the construction, not an approximation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chebyshev as cheb
from .grids import Grid, HField, div, grad, nonlinear, to_fine, from_fine
from .shallow_water import DegenerateStateError, Params, SWState, sw_rhs, sym_grad
from .thinfields import ThinField

__all__ = ["ZPoly", "AnsatzFields", "AnsatzRate", "build_ansatz", "ansatz_rate", "eval_ansatz"]


class ZPoly:
    """Polynomial in z with scalar horizontal fields as coefficients.

    value(x, z) = sum_k coeffs[k](x) * z**k. Products dealias coefficient
    pairs; at_height performs the whole Horner evaluation in one padded
    pass so truncation is committed only once.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, coeffs):
        coeffs = list(coeffs)
        if not coeffs:
            raise ValueError("a ZPoly needs at least one coefficient")
        grid = coeffs[0].grid
        for c in coeffs:
            if c.grid != grid:
                raise ValueError("coefficients must share a grid")
            if c.is_vector:
                raise ValueError("coefficients must be scalar fields")
        self.grid = grid
        self.coeffs = coeffs

    @classmethod
    def const(cls, field: HField) -> "ZPoly":
        return cls([field])

    @classmethod
    def zero(cls, grid: Grid) -> "ZPoly":
        return cls([HField(grid, np.zeros(grid.shape))])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def _zero_field(self) -> HField:
        return HField(self.grid, np.zeros(self.grid.shape))

    def __add__(self, other: "ZPoly") -> "ZPoly":
        m = max(len(self.coeffs), len(other.coeffs))
        out = []
        for k in range(m):
            a = self.coeffs[k] if k < len(self.coeffs) else self._zero_field()
            b = other.coeffs[k] if k < len(other.coeffs) else self._zero_field()
            out.append(a + b)
        return ZPoly(out)

    def __sub__(self, other: "ZPoly") -> "ZPoly":
        return self + (-other)

    def __neg__(self) -> "ZPoly":
        return ZPoly([-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, ZPoly):
            out = [self._zero_field() for _ in range(len(self.coeffs) + len(other.coeffs) - 1)]
            for i, a in enumerate(self.coeffs):
                for j, b in enumerate(other.coeffs):
                    out[i + j] = out[i + j] + a * b
            return ZPoly(out)
        if isinstance(other, HField):
            return ZPoly([other * c for c in self.coeffs])
        return ZPoly([c * float(other) for c in self.coeffs])

    __rmul__ = __mul__

    def dz(self) -> "ZPoly":
        if len(self.coeffs) == 1:
            return ZPoly.zero(self.grid)
        return ZPoly([(k + 1.0) * c for k, c in enumerate(self.coeffs[1:])])

    def dx(self, axis: int, order: int = 1) -> "ZPoly":
        return ZPoly([c.dx(axis, order) for c in self.coeffs])

    def bottom(self) -> HField:
        return self.coeffs[0]

    def at_z(self, z: float) -> HField:
        """Evaluation at a constant height (a plain linear combination)."""
        acc = self.coeffs[-1].values
        for c in reversed(self.coeffs[:-1]):
            acc = acc * z + c.values
        return HField(self.grid, acc + np.zeros(self.grid.shape))

    def at_height(self, eta: HField) -> HField:
        """Evaluation at a variable height eta(x), one padded Horner pass."""
        fine = [to_fine(c) for c in self.coeffs]
        e = to_fine(eta)
        acc = fine[-1]
        for c in reversed(fine[:-1]):
            acc = acc * e + c
        return from_fine(self.grid, acc)

    def to_thinfield(self, eps: float, nz: int, h0: HField | None = None) -> ThinField:
        """Nodal samples on the ThinField collocation grid z = zeta*eps*h0."""
        shape = self.grid.shape
        hv = np.ones(shape) if h0 is None else h0.values
        zeta = cheb.gl_nodes(nz).reshape((nz,) + (1,) * self.grid.n)
        z = zeta * (eps * hv)
        acc = np.zeros((nz,) + shape) + self.coeffs[-1].values
        for c in reversed(self.coeffs[:-1]):
            acc = acc * z + c.values
        return ThinField(self.grid, eps, nz, acc, h0)


@dataclass(frozen=True)
class AnsatzFields:
    """Coefficient fields of the approximate solution at one instant.

    p_nonhydro is the z-independent non-hydrostatic pressure part; the full
    pressure is eps*h0 + p_nonhydro - z.
    """

    base: SWState
    params: Params
    u0: HField
    u1: HField
    u2: HField
    w1: HField
    w2: HField
    w3: HField
    p_nonhydro: HField

    @property
    def eps(self) -> float:
        return self.params.eps

    @property
    def grid(self) -> Grid:
        return self.u0.grid

    def horizontal_polys(self) -> list[ZPoly]:
        """One ZPoly per horizontal velocity component."""
        return [
            ZPoly([self.u0.component(i), self.u1.component(i), 0.5 * self.u2.component(i)])
            for i in range(self.grid.n)
        ]

    def vertical_poly(self) -> ZPoly:
        zero = HField(self.grid, np.zeros(self.grid.shape))
        return ZPoly([zero, self.w1, 0.5 * self.w2, self.w3 * (1.0 / 6.0)])

    def pressure_poly(self) -> ZPoly:
        hydro = self.eps * self.base.h0 + self.p_nonhydro
        return ZPoly([hydro, HField.constant(self.grid, -1.0)])


@dataclass(frozen=True)
class AnsatzRate:
    """Time derivative of every AnsatzFields coefficient (same names)."""

    base: SWState
    params: Params
    h0: HField
    u0: HField
    u1: HField
    u2: HField
    w1: HField
    w2: HField
    w3: HField
    p_nonhydro: HField


def _stress_vec(u: HField, gh: HField) -> HField:
    """(D(u) + 2 div u Id) applied to the vector gh."""
    n = u.grid.n
    D = sym_grad(u)
    divu = div(u)
    rows = []
    for i in range(n):
        acc = D[i][0] * gh.component(0)
        for a in range(1, n):
            acc = acc + D[i][a] * gh.component(a)
        rows.append(acc + 2.0 * (divu * gh.component(i)))
    return HField.stack(rows)


def _pressure_factor(p: Params) -> float:
    return -2.0 * p.eps * p.F**2 / p.Re * (1.0 + p.eps**2 * p.gamma_bar)


def build_ansatz(s: SWState, p: Params, order: int = 2) -> AnsatzFields:
    """Coefficients of the approximation seeded by (h0, u0).

    Only the displayed second order is implemented; the argument exists so
    higher-order constructions can slot in without an interface change.
    """
    if order != 2:
        raise NotImplementedError("only the second-order construction is implemented")
    h0, u0 = s.h0, s.u0
    if h0.values.min() <= 0.0:
        raise DegenerateStateError("depth must stay positive")
    g = s.grid

    u1 = (p.eps * p.gamma_bar) * u0
    w1 = -div(u0)
    w2 = -div(u1)
    A = _stress_vec(u0, grad(h0)) - p.gamma_bar * u0
    u2 = -grad(w1) + nonlinear(g, lambda a, h: a / h, A, h0)
    w3 = -div(u2)
    p_nh = _pressure_factor(p) * div(u0)
    return AnsatzFields(s, p, u0, u1, u2, w1, w2, w3, p_nh)


def ansatz_rate(s: SWState, p: Params) -> AnsatzRate:
    """Chain rule through the shallow-water tendencies.

    Every coefficient is an explicit function of (h0, u0), so its time
    derivative follows by substituting sw_rhs into the product/quotient
    rule of its defining formula.
    """
    h0, u0 = s.h0, s.u0
    g = s.grid
    dth0, dtu0 = sw_rhs(s, p)

    du1 = (p.eps * p.gamma_bar) * dtu0
    dw1 = -div(dtu0)
    dw2 = -div(du1)

    A = _stress_vec(u0, grad(h0)) - p.gamma_bar * u0
    dA = _stress_vec(dtu0, grad(h0)) + _stress_vec(u0, grad(dth0)) - p.gamma_bar * dtu0
    quot = nonlinear(g, lambda a, da, h, dh: da / h - a * dh / (h * h), A, dA, h0, dth0)
    du2 = -grad(dw1) + quot
    dw3 = -div(du2)
    dp_nh = _pressure_factor(p) * div(dtu0)
    return AnsatzRate(s, p, dth0, dtu0, du1, du2, dw1, dw2, dw3, dp_nh)


def eval_ansatz(a: AnsatzFields, x_index, z: float):
    """Point values (uH, uV, pressure) at grid node x_index and height z.

    z may exceed the local column by one percent so surface evaluations
    survive roundoff in eps*h0.
    """
    idx = (x_index,) if np.isscalar(x_index) else tuple(x_index)
    if len(idx) != a.grid.n:
        raise ValueError(f"x_index must have {a.grid.n} entries")
    h_here = float(a.base.h0.values[idx])
    z = float(z)
    if z < 0.0 or z > 1.01 * a.eps * h_here:
        raise ValueError(f"z = {z} outside [0, 1.01*eps*h0] = [0, {1.01 * a.eps * h_here}]")

    vec = (slice(None),) + idx
    u0v, u1v, u2v = a.u0.values[vec], a.u1.values[vec], a.u2.values[vec]
    uH = u0v + z * (u1v + z * (0.5 * u2v))
    w1v, w2v, w3v = a.w1.values[idx], a.w2.values[idx], a.w3.values[idx]
    uV = z * (w1v + z * (0.5 * w2v + z * (w3v / 6.0)))
    pres = a.eps * h_here + float(a.p_nonhydro.values[idx]) - z
    return uH, float(uV), float(pres)
