"""Periodic Fourier grids and horizontal fields.

A Grid is the uniform tensor grid on the torus [0, L)^n, n in {1, 2}, with N
points per direction. HField wraps real nodal samples of a scalar or vector
field together with a cached spectrum; all derivatives are spectral and all
products of fields are dealiased by zero-padding (factor 2, which makes the
product of two band-limited fields the exact projection onto the retained
modes).

Conventions: spectra use the numpy fftn layout; the Nyquist slot of odd-order
derivatives is zeroed (the trigonometric interpolant of real data has a
cosine Nyquist mode whose derivative vanishes at the nodes).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid", "HField", "deriv", "grad", "div", "nonlinear", "dealiased_product"]

TWO_PI = 2.0 * np.pi

MAX_DERIV_ORDER = 4


def _is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [0, L)^n."""

    n: int
    N: int
    L: float = TWO_PI

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"horizontal dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or not _is_power_of_two(self.N):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not (self.L > 0.0) or not np.isfinite(self.L):
            raise ValueError(f"period must be positive and finite, got {self.L}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def volume(self) -> float:
        return self.L**self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        """1d node coordinates x_j = j L / N (same along every axis)."""
        return np.arange(self.N) * self.dx

    def coords(self) -> list[np.ndarray]:
        """Node coordinate arrays broadcastable to ``shape``, one per axis."""
        out = []
        for a in range(self.n):
            sh = [1] * self.n
            sh[a] = self.N
            out.append(self.nodes.reshape(sh))
        return out

    @cached_property
    def axis_wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers along one axis, fftn layout."""
        return TWO_PI * np.fft.fftfreq(self.N, d=self.dx)

    def kgrids(self) -> list[np.ndarray]:
        """Wavenumber arrays broadcastable to ``shape``, one per axis."""
        out = []
        for a in range(self.n):
            sh = [1] * self.n
            sh[a] = self.N
            out.append(self.axis_wavenumbers.reshape(sh))
        return out

    @cached_property
    def dealias_keep(self) -> np.ndarray:
        """Boolean mask of the 2/3-rule band: |m_a| <= floor(N/3) per axis."""
        cut = self.N // 3
        m = np.fft.fftfreq(self.N, d=1.0 / self.N)  # integer mode numbers
        keep1 = np.abs(m) <= cut
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.n):
            sh = [1] * self.n
            sh[a] = self.N
            mask &= keep1.reshape(sh)
        return mask


class HField:
    """Real field sampled on a Grid; scalar or component-stacked vector.

    values has shape grid.shape for a scalar, (m,) + grid.shape for an
    m-vector. Instances are treated as immutable; arithmetic returns new
    fields. ``f * g`` between fields is the dealiased product.
    """

    __slots__ = ("grid", "values", "_spec")

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape[-grid.n :] != grid.shape or values.ndim > grid.n + 1:
            raise ValueError(
                f"values shape {values.shape} incompatible with grid shape {grid.shape}"
            )
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_spec", None)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("HField is immutable")

    # -- structure ---------------------------------------------------------

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == self.grid.n + 1

    @property
    def ncomp(self) -> int:
        return self.values.shape[0] if self.is_vector else 1

    def component(self, i: int) -> "HField":
        if not self.is_vector:
            raise IndexError("scalar field has no components")
        return HField(self.grid, self.values[i])

    def components(self) -> list["HField"]:
        return [self.component(i) for i in range(self.ncomp)] if self.is_vector else [self]

    @staticmethod
    def stack(comps: list["HField"]) -> "HField":
        grid = comps[0].grid
        return HField(grid, np.stack([c.values for c in comps]))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "HField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "HField":
        return cls(grid, fn(*grid.coords()) + np.zeros(grid.shape))

    # -- spectrum ----------------------------------------------------------

    @property
    def spec(self) -> np.ndarray:
        """Cached fftn over the spatial axes (numpy scaling)."""
        if self._spec is None:
            axes = tuple(range(-self.grid.n, 0))
            object.__setattr__(self, "_spec", np.fft.fftn(self.values, axes=axes))
        return self._spec

    @classmethod
    def from_spec(cls, grid: Grid, spec: np.ndarray) -> "HField":
        axes = tuple(range(-grid.n, 0))
        return cls(grid, np.fft.ifftn(spec, axes=axes).real)

    def reality_defect(self) -> float:
        """Sup of the imaginary part of the inverse transform (should be ~0)."""
        axes = tuple(range(-self.grid.n, 0))
        return float(np.abs(np.fft.ifftn(self.spec, axes=axes).imag).max())

    def mask_two_thirds(self) -> "HField":
        """Project onto the 2/3-rule band."""
        return HField.from_spec(self.grid, self.spec * self.grid.dealias_keep)

    # -- calculus ----------------------------------------------------------

    def deriv(self, orders) -> "HField":
        return deriv(self, orders)

    def dx(self, axis: int, order: int = 1) -> "HField":
        o = [0] * self.grid.n
        o[axis] = order
        return deriv(self, tuple(o))

    def integral(self):
        """Integral over the torus (trapezoid, exact for trig polynomials)."""
        axes = tuple(range(-self.grid.n, 0))
        s = self.values.sum(axis=axes) * self.grid.dx**self.grid.n
        return float(s) if not self.is_vector else s

    def eval_at(self, points: np.ndarray) -> np.ndarray:
        """Trigonometric evaluation at arbitrary points, shape (npts, n).

        Returns (npts,) for scalars, (ncomp, npts) for vectors. Periodic in
        every coordinate, so points need not be wrapped into [0, L).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.grid.n:
            raise ValueError(f"points must have shape (npts, {self.grid.n})")
        c = self.spec / self.grid.N**self.grid.n
        kappa = self.grid.axis_wavenumbers
        # phase matrices per axis: (npts, N)
        phases = [np.exp(1j * np.outer(points[:, a], kappa)) for a in range(self.grid.n)]
        if self.grid.n == 1:
            out = np.tensordot(c, phases[0], axes=([-1], [1]))  # (..., npts)
        else:
            tmp = np.tensordot(c, phases[1], axes=([-1], [1]))  # (..., N0, npts)
            out = np.einsum("...kp,pk->...p", tmp, phases[0])
        return out.real

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, HField):
            return HField(self.grid, self.values + other.values)
        return HField(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, HField):
            return HField(self.grid, self.values - other.values)
        return HField(self.grid, self.values - other)

    def __rsub__(self, other):
        return HField(self.grid, other - self.values)

    def __mul__(self, other):
        if isinstance(other, HField):
            return dealiased_product(self, other)
        return HField(self.grid, self.values * other)

    def __rmul__(self, other):
        if isinstance(other, HField):
            return dealiased_product(other, self)
        return HField(self.grid, self.values * other)

    def __truediv__(self, other):
        if isinstance(other, HField):
            return nonlinear(self.grid, lambda a, b: a / b, self, other)
        return HField(self.grid, self.values / other)

    def __neg__(self):
        return HField(self.grid, -self.values)


def deriv(f: HField, orders) -> HField:
    """Spectral partial derivative d^orders f, orders a tuple per axis.

    Total order is capped at 4 (higher orders amplify roundoff past the
    tolerances the rest of the suite is built on). Odd orders zero the
    Nyquist slot. NaN input is rejected.
    """
    if isinstance(orders, int):
        orders = (orders,)
    orders = tuple(int(o) for o in orders)
    if len(orders) != f.grid.n:
        raise ValueError(f"need {f.grid.n} orders, got {orders}")
    if any(o < 0 for o in orders):
        raise ValueError(f"derivative orders must be nonnegative, got {orders}")
    if sum(orders) > MAX_DERIV_ORDER:
        raise ValueError(f"total derivative order {sum(orders)} exceeds {MAX_DERIV_ORDER}")
    if np.isnan(f.values).any():
        raise ValueError("NaN in field values")
    if sum(orders) == 0:
        return f
    spec = f.spec.copy()
    N = f.grid.N
    kappa = f.grid.axis_wavenumbers
    for a, o in enumerate(orders):
        if o == 0:
            continue
        mult = (1j * kappa) ** o
        if o % 2 == 1:
            mult[N // 2] = 0.0
        sh = [1] * f.grid.n
        sh[a] = N
        spec = spec * mult.reshape(sh)
    return HField.from_spec(f.grid, spec)


def grad(f: HField) -> HField:
    """Gradient of a scalar field as a vector field."""
    return HField.stack([f.dx(a) for a in range(f.grid.n)])


def div(v: HField) -> HField:
    """Divergence of a vector field."""
    if not v.is_vector or v.ncomp != v.grid.n:
        raise ValueError("div needs an n-component vector field")
    out = v.component(0).dx(0)
    for a in range(1, v.grid.n):
        out = out + v.component(a).dx(a)
    return out


# -- dealiasing by zero padding ---------------------------------------------


def _pad_axis(spec: np.ndarray, axis: int, N: int, M: int) -> np.ndarray:
    """Zero-pad one fft axis from N to M modes, splitting the Nyquist slot."""
    shape = list(spec.shape)
    shape[axis] = M
    out = np.zeros(shape, dtype=complex)
    half = N // 2
    src = [slice(None)] * spec.ndim
    dst = [slice(None)] * spec.ndim
    # modes 0 .. half-1
    src[axis] = slice(0, half)
    dst[axis] = slice(0, half)
    out[tuple(dst)] = spec[tuple(src)]
    # modes -(half-1) .. -1
    src[axis] = slice(N - half + 1, N)
    dst[axis] = slice(M - half + 1, M)
    out[tuple(dst)] = spec[tuple(src)]
    # Nyquist: split symmetrically to keep the spectrum Hermitian
    src[axis] = half
    ny = spec[tuple(src)]
    dst[axis] = half
    out[tuple(dst)] = 0.5 * ny
    dst[axis] = M - half
    out[tuple(dst)] = 0.5 * ny
    return out


def _truncate_axis(spec: np.ndarray, axis: int, M: int, N: int) -> np.ndarray:
    """Adjoint of _pad_axis: keep the low band, folding +-N/2 into Nyquist."""
    shape = list(spec.shape)
    shape[axis] = N
    out = np.zeros(shape, dtype=complex)
    half = N // 2
    src = [slice(None)] * spec.ndim
    dst = [slice(None)] * spec.ndim
    src[axis] = slice(0, half)
    dst[axis] = slice(0, half)
    out[tuple(dst)] = spec[tuple(src)]
    src[axis] = slice(M - half + 1, M)
    dst[axis] = slice(N - half + 1, N)
    out[tuple(dst)] = spec[tuple(src)]
    lo = [slice(None)] * spec.ndim
    hi = [slice(None)] * spec.ndim
    lo[axis] = half
    hi[axis] = M - half
    dst[axis] = half
    out[tuple(dst)] = spec[tuple(lo)] + spec[tuple(hi)]
    return out


def to_fine(f: HField, factor: int = 2) -> np.ndarray:
    """Nodal values of f interpolated onto the factor-refined grid."""
    g = f.grid
    M = factor * g.N
    spec = f.spec
    for a in range(-g.n, 0):
        spec = _pad_axis(spec, a, g.N, M)
    axes = tuple(range(-g.n, 0))
    return np.fft.ifftn(spec, axes=axes).real * factor**g.n


def from_fine(grid: Grid, fine_values: np.ndarray, factor: int = 2) -> HField:
    """Project fine-grid nodal values back onto grid (exact L2 projection)."""
    M = factor * grid.N
    axes = tuple(range(-grid.n, 0))
    spec = np.fft.fftn(fine_values, axes=axes)
    for a in range(-grid.n, 0):
        spec = _truncate_axis(spec, a, M, grid.N)
    return HField.from_spec(grid, spec / factor**grid.n)


def nonlinear(grid: Grid, fn, *fields) -> HField:
    """Pointwise nonlinearity evaluated on the padded grid, then projected.

    fields may be HField or plain scalars; fn receives fine-grid arrays.
    This is the one place rational nonlinearities (divisions by h0) happen.
    """
    fine = [to_fine(f) if isinstance(f, HField) else f for f in fields]
    return from_fine(grid, fn(*fine))


def dealiased_product(f: HField, g: HField) -> HField:
    return nonlinear(f.grid, lambda a, b: a * b, f, g)
