"""Thin-domain Korn constant via a 6-dimensional generalized eigenproblem.

Per horizontal Fourier mode k = |k|(c, s), the optimal constant in the
deformation inequality solves det(q2 - X q1) = 0 where q1, q2 are Gram
matrices of two quadratic forms over a 6-dimensional space of profiles on
(0, M), M = eps|k|. The spectrum factors as {1 x4, 2, Lambda(M, sigma)} and
the Korn constant is the infimum of Lambda over M and direction sigma.

Numerical shape of the problem: the raw basis degenerates at both ends of
the M range (z ~ sinh z ~ cosh z - 1 for small M, sinh ~ cosh ~ e^M/2 for
large M), so the Gram assembly works on quadrature design matrices B_i with
q_i = B_i^T B_i, equilibrates their columns, orthonormalizes through a QR of
B_1, and reads the pencil eigenvalues off the singular values of B_2 R^{-1}.
This never forms the near-singular q1 explicitly for the solve and keeps
roughly twice the digits of a Cholesky-of-q1 approach. For M > 2 the
assembly additionally evaluates a span-preserving exponential recombination
of the basis whose members stay O(1) apart; the pencil spectrum is invariant
under any such change of basis.

The module also hosts the quadratic-form probe of the inequality itself on
random divergence-free strip fields (stream-function and potential-flow
samples), reported per epsilon for uniformity evidence. Here the deformation
tensor is the symmetrized half-gradient, matching the inequality's Fourier
expansion rather than the unhalved convention of the evolution equations.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chebyshev import clenshaw_curtis_weights, gl_nodes
from .grids import Grid
from .probes import ProbeReport

__all__ = [
    "KornPencil",
    "KornSweep",
    "QuadratureError",
    "ConditioningError",
    "korn_basis_eval",
    "korn_gram",
    "korn_pencil",
    "korn_spectrum",
    "korn_sweep",
    "korn_probe",
    "sigma_circle",
    "SIGMA_LINE",
    "default_m_grid",
]

CLUSTER_TOL = 1e-6
CLUSTER_TOL_SMALL_M = 1e-4  # below M = 0.1 conditioning costs two digits
RANK_TOL = 1e-10

SIGMA_LINE = ((1.0, 0.0), (-1.0, 0.0))


class QuadratureError(RuntimeError):
    """Node-doubling disagreement above tolerance."""


class ConditioningError(RuntimeError):
    """The conditioned pencil is still numerically degenerate."""


def sigma_circle(count: int) -> tuple:
    """count directions evenly spaced on the unit circle."""
    if count < 1:
        raise ValueError("need at least one direction")
    th = 2.0 * np.pi * np.arange(count) / count
    return tuple((float(np.cos(a)), float(np.sin(a))) for a in th)


def default_m_grid(m_count: int = 48, m_min: float = 1e-2, m_max: float = 50.0):
    return np.geomspace(m_min, m_max, m_count)


def _check_sigma(sigma) -> tuple[float, float]:
    c, s = float(sigma[0]), float(sigma[1])
    if abs(c * c + s * s - 1.0) > 1e-12:
        raise ValueError(f"sigma must lie on the unit circle, got ({c}, {s})")
    return c, s


# -- basis ---------------------------------------------------------------------------

# Profile space: (-c, s) (a1 z + b1 sinh z + c1 (cosh z - 1))
#              + ( s, c) (a2 sinh z + b2 z sinh z + c2 z cosh z),
# coefficients ordered (a1, b1, c1, a2, b2, c2). Every member vanishes at 0.


def _scalar_basis(z: np.ndarray, recombined: bool):
    """Values/derivatives of the two scalar families, shape (3, nz) each.

    recombined swaps in {z, e^z-1-z, e^-z-1+z} and {sinh z, z e^z, z e^-z},
    which span the same spaces but stay numerically independent at large M.
    """
    sh, ch = np.sinh(z), np.cosh(z)
    if not recombined:
        fa = np.stack([z, sh, ch - 1.0])
        da = np.stack([np.ones_like(z), ch, sh])
        dda = np.stack([np.zeros_like(z), sh, ch])
        fb = np.stack([sh, z * sh, z * ch])
        db = np.stack([ch, sh + z * ch, ch + z * sh])
        ddb = np.stack([sh, 2.0 * ch + z * sh, 2.0 * sh + z * ch])
    else:
        ep, em = np.exp(z), np.exp(-z)
        fa = np.stack([z, ep - 1.0 - z, em - 1.0 + z])
        da = np.stack([np.ones_like(z), ep - 1.0, 1.0 - em])
        dda = np.stack([np.zeros_like(z), ep, em])
        fb = np.stack([sh, z * ep, z * em])
        db = np.stack([ch, ep * (1.0 + z), em * (1.0 - z)])
        ddb = np.stack([sh, ep * (2.0 + z), em * (z - 2.0)])
    return (fa, da, dda), (fb, db, ddb)


def _vector_basis(sigma, z: np.ndarray, recombined: bool):
    """U, U', U'' for the 6 members, each shaped (6, 2, nz)."""
    c, s = sigma
    (fa, da, dda), (fb, db, ddb) = _scalar_basis(z, recombined)
    ea = np.array([-c, s])
    eb = np.array([s, c])
    nz = z.shape[-1]
    out = []
    for scal_a, scal_b in ((fa, fb), (da, db), (dda, ddb)):
        U = np.empty((6, 2, nz))
        U[:3] = ea[None, :, None] * scal_a[:, None, :]
        U[3:] = eb[None, :, None] * scal_b[:, None, :]
        out.append(U)
    return out


def korn_basis_eval(M: float, sigma, coeffs, z):
    """(U, U', U'') at z for one combination of the literal basis.

    z may be scalar or array within [0, M]; coefficients are ordered
    (a1, b1, c1, a2, b2, c2).
    """
    if not M > 0.0:
        raise ValueError(f"M must be positive, got {M}")
    c, s = _check_sigma(sigma)
    a = np.asarray(coeffs, dtype=float)
    if a.shape != (6,) or not np.isfinite(a).all():
        raise ValueError("coeffs must be 6 finite reals")
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    if zz.min() < 0.0 or zz.max() > M * (1.0 + 1e-12):
        raise ValueError(f"z must lie in [0, {M}]")
    U, dU, ddU = _vector_basis((c, s), zz, recombined=False)
    vals = tuple(np.tensordot(a, arr, axes=(0, 0)) for arr in (U, dU, ddU))
    if np.isscalar(z) or np.asarray(z).ndim == 0:
        return tuple(v[:, 0] for v in vals)
    return vals


# -- gram assembly --------------------------------------------------------------------


def _design_matrices(M: float, sigma, nq: int, recombined: bool):
    """Quadrature design matrices (B1, B2) with q_i = B_i^T B_i.

    Rows are sqrt(weight) times the linear functionals whose squares sum to
    the two quadratic forms.
    """
    c, s = sigma
    x, w = np.polynomial.legendre.leggauss(nq)
    z = 0.5 * M * (x + 1.0)
    w = 0.5 * M * w
    rw = np.sqrt(w)

    U, dU, ddU = _vector_basis((c, s), z, recombined)
    u1, u2 = U[:, 0, :], U[:, 1, :]  # (6, nq)
    d1, d2 = dU[:, 0, :], dU[:, 1, :]
    dd1, dd2 = ddU[:, 0, :], ddU[:, 1, :]
    phi = c * u1 + s * u2

    rt2 = math.sqrt(2.0)
    rows1 = [d1, d2, c * d1 + s * d2, dd1, dd2, phi]
    rows2 = [
        rt2 * c * d1,
        rt2 * s * d2,
        rt2 * (c * d1 + s * d2),
        s * d1 + c * d2,
        dd1 + c * phi,
        dd2 + s * phi,
    ]
    b1 = np.concatenate([(rw * r).T for r in rows1])  # (6 nq, 6)
    b2 = np.concatenate([(rw * r).T for r in rows2])
    return b1, b2


def _boundary_forms(M: float, sigma, recombined: bool):
    """The two linear forms whose product is the boundary form q2 - q1."""
    c, s = sigma
    zM = np.array([M])
    U, dU, _ = _vector_basis(sigma, zM, recombined)
    v1 = c * U[:, 0, 0] + s * U[:, 1, 0]
    v2 = c * dU[:, 0, 0] + s * dU[:, 1, 0]
    return v1, v2


def korn_gram(M: float, sigma, quad_nodes: int = 96):
    """Gram matrices (q1, q2) of the two forms on the 6-member basis.

    Assembled at quad_nodes and 2*quad_nodes Gauss-Legendre nodes; the two
    resolutions must agree to 1e-10 relative or a QuadratureError is raised.
    Uses the recombined exponential basis beyond M = 2 (same spans).
    """
    if not (np.isfinite(M) and M > 0.0):
        raise ValueError(f"M must be positive, got {M}")
    sigma = _check_sigma(sigma)
    if quad_nodes < 64:
        raise ValueError("need at least 64 quadrature nodes")
    recombined = M > 2.0
    b1, b2 = _design_matrices(M, sigma, 2 * quad_nodes, recombined)
    q1, q2 = b1.T @ b1, b2.T @ b2
    c1, c2 = (b.T @ b for b in _design_matrices(M, sigma, quad_nodes, recombined))
    scale = max(np.abs(q1).max(), np.abs(q2).max())
    drift = max(np.abs(q1 - c1).max(), np.abs(q2 - c2).max())
    if drift > 1e-10 * scale:
        raise QuadratureError(
            f"node doubling moved the Gram matrices by {drift / scale:.2e} "
            f"relative at M = {M:.4g} ({quad_nodes} nodes)"
        )
    asym = max(np.abs(q1 - q1.T).max(), np.abs(q2 - q2.T).max())
    if asym > 1e-12 * scale:
        raise AssertionError("Gram assembly produced an asymmetric matrix")
    q1 = 0.5 * (q1 + q1.T)
    q2 = 0.5 * (q2 + q2.T)
    return q1, q2


# -- the pencil -----------------------------------------------------------------------


def _pencil_eigs(b1: np.ndarray, b2: np.ndarray, M, sigma) -> np.ndarray:
    """Eigenvalues of the (q2, q1) pencil from the design matrices."""
    col = np.linalg.norm(b1, axis=0)
    if not np.isfinite(col).all() or col.min() <= 0.0:
        raise ConditioningError(f"degenerate basis column at M = {M}, sigma = {sigma}")
    b1s = b1 / col
    b2s = b2 / col
    r = np.linalg.qr(b1s, mode="r")
    d = np.abs(np.diag(r))
    if d.min() <= 1e-13 * d.max():
        raise ConditioningError(
            f"q1 is numerically singular after conditioning at "
            f"M = {M}, sigma = {sigma}"
        )
    sv = np.linalg.svd(b2s @ np.linalg.inv(r), compute_uv=False)
    return np.sort(sv * sv)


@dataclass(frozen=True)
class KornPencil:
    """One (M, sigma) cell: Gram matrices, design matrices, spectrum."""

    M: float
    sigma: tuple
    q1: np.ndarray
    q2: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    spectrum: np.ndarray
    Lambda: float

    def __post_init__(self):
        for q in (self.q1, self.q2):
            if q.shape != (6, 6) or np.abs(q - q.T).max() > 0.0:
                raise ValueError("Gram matrices must be symmetric 6x6")
        if self.spectrum.shape != (6,) or np.any(np.diff(self.spectrum) < 0.0):
            raise ValueError("spectrum must be 6 ascending eigenvalues")
        if not np.isclose(self.Lambda, self.spectrum[0], rtol=0.0, atol=0.0):
            raise ValueError("Lambda must be the smallest eigenvalue")
        # the difference of the forms is a boundary term: a product of two
        # linear forms, hence rank <= 2
        diff = self.q2 - self.q1
        sv = np.linalg.svd(diff, compute_uv=False)
        if sv[2] > RANK_TOL * max(sv[0], 1e-300):
            raise ValueError("q2 - q1 is not numerically rank 2")


def korn_pencil(M: float, sigma, quad_nodes: int = 96) -> KornPencil:
    """Assemble and solve one (M, sigma) cell."""
    if not (np.isfinite(M) and M > 0.0):
        raise ValueError(f"M must be positive, got {M}")
    sigma = _check_sigma(sigma)
    if quad_nodes < 64:
        raise ValueError("need at least 64 quadrature nodes")
    recombined = M > 2.0
    q1, q2 = korn_gram(M, sigma, quad_nodes)
    b1, b2 = _design_matrices(M, sigma, 2 * quad_nodes, recombined)
    spectrum = _pencil_eigs(b1, b2, M, sigma)
    return KornPencil(
        M=float(M),
        sigma=sigma,
        q1=q1,
        q2=q2,
        b1=b1,
        b2=b2,
        spectrum=spectrum,
        Lambda=float(spectrum[0]),
    )


def _cluster(values: np.ndarray, tol: float) -> list[tuple[float, int]]:
    """Group ascending values whose relative gaps stay below tol."""
    out = []
    start = 0
    vals = np.asarray(values, dtype=float)
    for i in range(1, vals.size + 1):
        if i == vals.size or abs(vals[i] - vals[i - 1]) > tol * max(
            abs(vals[i]), abs(vals[i - 1]), 1e-300
        ):
            grp = vals[start:i]
            out.append((float(grp.mean()), int(grp.size)))
            start = i
    return out


def korn_spectrum(p: KornPencil, cluster_tol: float | None = None):
    """(eigenvalues ascending, clusters) with relative multiplicity grouping."""
    tol = cluster_tol
    if tol is None:
        tol = CLUSTER_TOL if p.M >= 0.1 else CLUSTER_TOL_SMALL_M
    return p.spectrum, _cluster(p.spectrum, tol)


# -- sweep ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KornSweep:
    """Lambda table over (M, sigma) with the empirical infimum."""

    rows: list
    inf_lambda: float
    argmin: dict
    max_jump: float
    failures: int

    def summary(self) -> dict:
        return {
            "inf_lambda": self.inf_lambda,
            "argmin": self.argmin,
            "max_jump": self.max_jump,
            "cells": len(self.rows),
            "failures": self.failures,
        }


def _sweep_cell(M: float, sigma, quad_nodes: int) -> dict:
    row = {"M": float(M), "c": sigma[0], "s": sigma[1], "cond_flag": ""}
    try:
        p = korn_pencil(M, sigma, quad_nodes)
        row["lam"] = p.Lambda
        for j in range(6):
            row[f"eig{j + 1}"] = float(p.spectrum[j])
    except (ConditioningError, QuadratureError) as exc:
        row["lam"] = None
        for j in range(6):
            row[f"eig{j + 1}"] = None
        row["cond_flag"] = f"{type(exc).__name__}: {exc}"
    return row


def korn_sweep(M_grid=None, sigma_grid=None, quad_nodes: int = 96, workers=None):
    """Lambda over the (M, sigma) grid; conditioning failures are recorded
    per cell rather than raised."""
    M_grid = default_m_grid() if M_grid is None else np.asarray(M_grid, dtype=float)
    if M_grid.ndim != 1 or M_grid.size < 2 or np.any(np.diff(M_grid) <= 0.0):
        raise ValueError("M_grid must be ascending with at least 2 points")
    if M_grid[0] <= 0.0:
        raise ValueError("M_grid must be positive")
    sigma_grid = sigma_circle(8) if sigma_grid is None else tuple(
        _check_sigma(s) for s in sigma_grid
    )

    cells = [(M, sig) for sig in sigma_grid for M in M_grid]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda c: _sweep_cell(c[0], c[1], quad_nodes), cells))
    else:
        rows = [_sweep_cell(M, sig, quad_nodes) for M, sig in cells]

    good = [r for r in rows if r["lam"] is not None]
    if not good:
        raise ConditioningError("every sweep cell failed")
    best = min(good, key=lambda r: r["lam"])
    max_jump = 0.0
    nm = M_grid.size
    for j in range(len(sigma_grid)):
        lam = [rows[j * nm + i]["lam"] for i in range(nm)]
        for a, b in zip(lam, lam[1:]):
            if a is not None and b is not None:
                max_jump = max(max_jump, abs(b - a))
    return KornSweep(
        rows=rows,
        inf_lambda=float(best["lam"]),
        argmin={"M": best["M"], "c": best["c"], "s": best["s"]},
        max_jump=float(max_jump),
        failures=len(rows) - len(good),
    )


# -- inequality probe ------------------------------------------------------------------


def _strip_quadrature(nx: int, nz: int, eps: float):
    g = Grid(1, nx)
    x = g.nodes
    zeta = gl_nodes(nz)
    wz = clenshaw_curtis_weights(nz) * eps
    wx = g.dx  # uniform trapezoid == exact for band-limited fields
    return x, zeta, wx, wz


def _korn_ratio(parts: dict, eps: float, gamma_bar: float, wx: float, wz) -> float:
    """(2 ||D(u)||^2 + eps gamma |u_H(0)|^2) / ||u||_H1^2 on the strip.

    parts carries nodal arrays (nz, nx): uh, uv, dux_h, duz_h, dux_v, duz_v.
    D is the symmetrized half-gradient.
    """

    def integral(f2):
        return wx * float((wz[:, None] * f2).sum())

    l2 = integral(parts["uh"] ** 2 + parts["uv"] ** 2)
    grad2 = integral(
        parts["dux_h"] ** 2
        + parts["duz_h"] ** 2
        + parts["dux_v"] ** 2
        + parts["duz_v"] ** 2
    )
    h1 = l2 + grad2
    if h1 < 1e-12:
        return float("nan")  # degenerate sample, skipped by the caller
    two_d2 = integral(
        2.0 * parts["dux_h"] ** 2
        + 2.0 * parts["duz_v"] ** 2
        + (parts["duz_h"] + parts["dux_v"]) ** 2
    )
    trace = wx * float((parts["uh"][0] ** 2).sum())
    return (two_d2 + eps * gamma_bar * trace) / h1


def _stream_sample(rng, x, zeta, eps, kmax=4, mdeg=3):
    """Divergence-free field from a random stream function.

    psi = sum_k trig(kx) P_k(zeta) with P_k(0) = 0, so u = (psi_z, -psi_x)
    satisfies u_V = 0 at the bottom identically.
    """
    nz, nx = zeta.size, x.size
    parts = {key: np.zeros((nz, nx)) for key in
             ("uh", "uv", "dux_h", "duz_h", "dux_v", "duz_v")}
    zc = zeta[:, None]
    for k in range(1, kmax + 1):
        a, b = rng.standard_normal(2) / k**2
        t = a * np.cos(k * x) + b * np.sin(k * x)
        dt = -a * k * np.sin(k * x) + b * k * np.cos(k * x)
        ddt = -(k * k) * t
        coef = rng.standard_normal(mdeg)
        P = sum(coef[m - 1] * zc**m for m in range(1, mdeg + 1))
        dP = sum(m * coef[m - 1] * zc ** (m - 1) for m in range(1, mdeg + 1)) / eps
        ddP = sum(
            m * (m - 1) * coef[m - 1] * zc ** (m - 2) for m in range(2, mdeg + 1)
        ) / eps**2
        parts["uh"] += t * dP
        parts["uv"] -= dt * P
        parts["dux_h"] += dt * dP
        parts["duz_h"] += t * ddP
        parts["dux_v"] -= ddt * P
        parts["duz_v"] -= dt * dP
    return parts


def _potential_sample(k, x, zeta, eps):
    """u = grad psi with psi = cosh(k z) cos(k x): divergence free, flat at
    the bottom; the family behind the pencil's eigenvalue 2."""
    z = eps * zeta[:, None]
    ch, sh = np.cosh(k * z), np.sinh(k * z)
    cx, sx = np.cos(k * x), np.sin(k * x)
    return {
        "uh": -k * sx * ch,
        "uv": k * cx * sh,
        "dux_h": -k * k * cx * ch,
        "duz_h": -k * k * sx * sh,
        "dux_v": -k * k * sx * sh,
        "duz_v": k * k * cx * ch,
    }


def _translation_sample(x, zeta):
    nz, nx = zeta.size, x.size
    parts = {key: np.zeros((nz, nx)) for key in
             ("uh", "uv", "dux_h", "duz_h", "dux_v", "duz_v")}
    parts["uh"] += 1.0
    return parts


def korn_probe(
    eps_list,
    gamma_bar: float,
    samples: int = 64,
    seed: int = 0,
    nx: int = 32,
    nz: int = 24,
) -> ProbeReport:
    """Probe the deformation inequality on random admissible strip fields.

    Every epsilon sees the same sample construction (per-sample counter
    streams, so results do not depend on evaluation order), plus the rigid
    translation (ratio exactly gamma_bar) and potential-flow extremals.
    """
    eps_list = [float(e) for e in np.atleast_1d(eps_list)]
    if samples < 50:
        raise ValueError("need at least 50 samples per epsilon")
    rows = []
    for eps in eps_list:
        if not 0.0 < eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {eps}")
        x, zeta, wx, wz = _strip_quadrature(nx, nz, eps)
        ratios = []
        for i in range(samples):
            rng = np.random.Generator(np.random.Philox([seed, i]))
            r = _korn_ratio(_stream_sample(rng, x, zeta, eps), eps, gamma_bar, wx, wz)
            if np.isfinite(r):
                ratios.append(r)
        ratios.append(
            _korn_ratio(_translation_sample(x, zeta), eps, gamma_bar, wx, wz)
        )
        for k in (1, 2):
            ratios.append(
                _korn_ratio(_potential_sample(k, x, zeta, eps), eps, gamma_bar, wx, wz)
            )
        rows.append(
            {
                "eps": eps,
                "n_samples": len(ratios),
                "max_ratio": float(max(ratios)),
                "min_ratio": float(min(ratios)),
            }
        )
    mins = [r["min_ratio"] for r in rows]
    spread = max(mins) / min(mins) if min(mins) > 0.0 else float("inf")
    verdict = "bounded" if min(mins) > 0.0 and spread < 3.0 else "unbounded trend"
    return ProbeReport(tag="korn", eps_list=eps_list, rows=rows, verdict=verdict)
