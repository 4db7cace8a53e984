"""Generating-pair calculus on a radial mesh of the unit disk.

Conventions
-----------
The complex derivative operators carry no 1/2 factor:

    dz = d/dx - i d/dy,     dzbar = d/dx + i d/dy.

All identities in this module (characteristic coefficients, successor
condition, Vekua residual) are stated and tested under this convention.
One consequence worth knowing: the antiderivative identity for the pair
integral returns twice the classical right-hand side, i.e. for a function
W = phi*F + psi*G admitting a pair derivative,

    fg_integral(fg_derivative(W)) == 2 * (W - phi(z0) F - psi(z0) G),

because both the derivative and the line-integral recombination each pick up
the factor the classical half-convention splits between them. The formal
power recursion uses only the integral and is unaffected.

Only generating pairs of the form (p, i/p) with p > 0 are supported; this is
the class the impedance-equation reduction produces, and it keeps the pair
condition Im(conj(F) G) = 1 exact.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .conductivity import AnalyticSeparable, ConductivityField, PiecewiseSeparable
from .errors import NumericalError, ValidationError

log = logging.getLogger(__name__)

RIM_TOL = 1e-12


# --------------------------------------------------------------------------
# mesh
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialMesh:
    """Center plus rays-by-steps sampling of the unit disk.

    Nodes are z[r, s] = z0 + t[s] * span[r], where span[r] points from the
    center to the rim along ray r, so every ray starts at z0 (s = 0) and ends
    on the unit circle (s = S). The parameter grid t is shared by all rays,
    which lets the cumulative quadrature weights be computed once.
    """

    theta: np.ndarray            # (P,) ray angles, sorted, in [0, 2pi)
    t: np.ndarray                # (S+1,) path parameters, 0 = t0 < ... < tS = 1
    z0: complex
    nodes: np.ndarray            # (P, S+1) complex
    span: np.ndarray             # (P,) complex, nodes[:, -1] - z0
    boundary_weights: np.ndarray  # (P,) closed-curve trapezoid arc weights
    cubic_idx: np.ndarray        # (S, 4) stencil node indices per interval
    cubic_w: np.ndarray          # (S, 4) cubic quadrature weights per interval

    @property
    def ray_count(self):
        return len(self.theta)

    @property
    def step_count(self):
        return len(self.t) - 1

    def xy(self):
        return self.nodes.real, self.nodes.imag


def _cumulative_cubic_weights(t: np.ndarray):
    """Per-interval weights integrating the local cubic through 4 nodes.

    For interval [t_j, t_j+1] the stencil is nodes (j-1 .. j+2), clamped at
    the ends, and the weights are the integrals of the Lagrange basis. Exact
    for cubics, O(h^4) globally, and valid on non-uniform grids.
    """
    S = len(t) - 1
    if S < 3:
        raise ValidationError(f"need at least 3 radial steps, got {S}")
    idx = np.empty((S, 4), dtype=np.intp)
    base = np.clip(np.arange(S) - 1, 0, S - 3)
    idx[:] = base[:, None] + np.arange(4)[None, :]
    tau = t[idx]                                     # (S, 4)
    a, b = t[:-1], t[1:]
    mid = 0.5 * (a + b)
    scale = tau[:, -1] - tau[:, 0]
    x = (tau - mid[:, None]) / scale[:, None]        # conditioning shift/scale
    V = x[:, None, :] ** np.arange(4)[None, :, None]  # (S, 4, 4), V[j,m,k] = x_k^m
    xa = (a - mid) / scale
    xb = (b - mid) / scale
    m = np.arange(1, 5)[None, :]
    mom = (xb[:, None] ** m - xa[:, None] ** m) / m * scale[:, None]
    w = np.linalg.solve(V, mom[:, :, None])[:, :, 0]
    return idx, w


def radial_mesh(P: int, S: int, z0: complex = 0j, rim_grading: float = 1.0,
                corner_angles: Sequence[float] = ()) -> RadialMesh:
    """Build the radial integration mesh.

    Parameters
    ----------
    P, S:
        Ray count and radial step count.
    z0:
        Expansion center, strictly inside the disk (default 0).
    rim_grading:
        1.0 keeps the radial parameters uniform; g > 1 clusters them toward
        the rim via t = 1 - (1 - u)^g, for conductivities varying sharply
        near the boundary.
    corner_angles:
        Boundary angles that must coincide with some ray (one nearest ray is
        snapped to each); used to force rays across polygon corners.
    """
    if P < 3 or S < 3:
        raise ValidationError(f"mesh needs P >= 3 rays and S >= 3 steps, got P={P}, S={S}")
    z0 = complex(z0)
    if abs(z0) >= 1.0 - 1e-9:
        raise ValidationError(f"center z0={z0} must lie strictly inside the unit disk")

    theta = 2.0 * math.pi * np.arange(P) / P
    for ang in corner_angles:
        ang = float(ang) % (2.0 * math.pi)
        k = int(np.argmin(np.minimum(np.abs(theta - ang), 2 * math.pi - np.abs(theta - ang))))
        theta[k] = ang
    theta = np.unique(theta)
    if len(theta) != P:
        raise ValidationError("corner snapping collapsed two rays; increase P or adjust angles")

    u = np.linspace(0.0, 1.0, S + 1)
    g = float(rim_grading)
    if g <= 0:
        raise ValidationError(f"rim_grading must be positive, got {rim_grading!r}")
    t = u if g == 1.0 else 1.0 - (1.0 - u) ** g
    t[0], t[-1] = 0.0, 1.0

    # distance from z0 to the unit circle along each ray direction
    e = np.exp(1j * theta)
    d = z0.real * np.cos(theta) + z0.imag * np.sin(theta)
    R = -d + np.sqrt(d * d + 1.0 - abs(z0) ** 2)
    span = R * e
    nodes = z0 + t[None, :] * span[:, None]

    rim_err = np.max(np.abs(np.abs(nodes[:, -1]) - 1.0))
    if rim_err > RIM_TOL:
        raise NumericalError(f"rim nodes off the unit circle by {rim_err:.2e}")

    gaps = np.diff(np.concatenate([theta, [theta[0] + 2 * math.pi]]))
    bw = 0.5 * (gaps + np.roll(gaps, 1))
    idx, w = _cumulative_cubic_weights(t)
    return RadialMesh(theta=theta, t=t, z0=z0, nodes=nodes, span=span,
                      boundary_weights=bw, cubic_idx=idx, cubic_w=w)


def cumulative_path_integral(f: np.ndarray, mesh: RadialMesh, rule: str = "cubic") -> np.ndarray:
    """Cumulative integral of f dz from the center along every ray.

    ``f`` has shape (P, S+1); the result matches it, with zeros at s = 0.
    ``rule`` is "cubic" (default, 4-point local cubic) or "trapezoid".
    """
    f = np.asarray(f)
    if rule == "trapezoid":
        inc = 0.5 * (f[..., 1:] + f[..., :-1]) * np.diff(mesh.t)
    elif rule == "cubic":
        inc = np.einsum("jk,...jk->...j", mesh.cubic_w, f[..., mesh.cubic_idx])
    else:
        raise ValidationError(f"unknown quadrature rule {rule!r}")
    out = np.zeros(np.broadcast_shapes(f.shape, mesh.nodes.shape), dtype=complex)
    np.cumsum(inc, axis=-1, out=out[..., 1:])
    return out * mesh.span[:, None]


# --------------------------------------------------------------------------
# generating pairs
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratingPair:
    """Sampled (F, G) values on the mesh; optionally backed by a callable p(x, y).

    The pair condition Im(conj(F) G) > 0 is checked at construction.
    """

    F: np.ndarray
    G: np.ndarray
    p_fn: Callable | None = None

    def __post_init__(self):
        F, G = np.asarray(self.F), np.asarray(self.G)
        if not (np.all(np.isfinite(F.view(float))) and np.all(np.isfinite(G.view(float)))):
            raise ValidationError("generating pair contains non-finite values")
        im = np.imag(np.conj(F) * G)
        if np.any(im <= 0):
            raise ValidationError(f"pair condition Im(conj(F) G) > 0 violated (min {im.min():.3e})")

    def adjoint_values(self):
        return -1j * self.F, -1j * self.G


def pair_from_p(p: np.ndarray, p_fn: Callable | None = None) -> GeneratingPair:
    """Pair (p, i/p) from a positive field p sampled on the mesh."""
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise ValidationError("p must be positive and finite at every node")
    return GeneratingPair(F=p.astype(complex), G=1j / p, p_fn=p_fn)


def adjoint(pair: GeneratingPair) -> GeneratingPair:
    """Adjoint pair (F*, G*) = (-iF, -iG)."""
    Fs, Gs = pair.adjoint_values()
    return GeneratingPair(F=Fs, G=Gs, p_fn=None)


@dataclass(frozen=True)
class CharacteristicCoefficients:
    A: np.ndarray
    B: np.ndarray
    a: np.ndarray
    b: np.ndarray


def _fd_xy(fn: Callable, x: np.ndarray, y: np.ndarray, h: float):
    """d/dx and d/dy of fn by centered differences on a local Cartesian stencil.

    Arms are shortened to the largest step that stays in the closed disk
    (one-sided when a side collapses entirely). In the tangential direction
    at the rim both straight arms leave the disk, so there the difference is
    taken along the circle instead (rotated stencil) and projected onto the
    requested direction.
    """
    r2 = x * x + y * y
    r = np.sqrt(r2)
    collapse = 0.05 * h
    out = []
    for dx, dy in ((1.0, 0.0), (0.0, 1.0)):
        b = x * dx + y * dy  # signed component of the position along the step direction
        # largest alpha with |q + alpha*d| <= 1 (and the mirrored arm)
        disc = np.maximum(b * b + 1.0 + RIM_TOL - r2, 0.0)
        ap = np.clip(-b + np.sqrt(disc), 0.0, h)
        am = np.clip(b + np.sqrt(disc), 0.0, h)
        ap = np.where(ap < collapse, 0.0, ap)
        am = np.where(am < collapse, 0.0, am)
        both = (ap == 0.0) & (am == 0.0)
        fp = fn(x + dx * ap, y + dy * ap)
        fm = fn(x - dx * am, y - dy * am)
        arms = ap + am
        safe = np.where(arms > 0.0, arms, 1.0)
        d = (fp - fm) / safe
        if np.any(both):
            # tangential at the rim: difference along the circle, projected
            # onto the step direction (the radial component is negligible
            # exactly where both arms collapse)
            xb, yb, rb = x[both], y[both], r[both]
            c, s = math.cos(h), math.sin(h)
            ft = fn(xb * c - yb * s, xb * s + yb * c)
            fb = fn(xb * c + yb * s, -xb * s + yb * c)
            tang = (-yb * dx + xb * dy) / rb
            d[both] = tang * (ft - fb) / (2.0 * h * rb)
        out.append(d)
    return out


def characteristic_coefficients(pair: GeneratingPair, mesh: RadialMesh,
                                h: float = 1e-4) -> CharacteristicCoefficients:
    """The four coefficient fields A, B, a, b of a generating pair.

    Derivatives of F and G are taken by centered finite differences with
    spacing ``h`` (one-sided at the rim); requires the pair to be backed by a
    callable p, i.e. to be of the (p, i/p) form.
    """
    if pair.p_fn is None:
        raise ValidationError("characteristic coefficients need a callable-backed pair (p, i/p)")
    x, y = mesh.xy()

    def F_fn(a_, b_):
        return np.asarray(pair.p_fn(a_, b_), dtype=complex)

    def G_fn(a_, b_):
        return 1j / np.asarray(pair.p_fn(a_, b_), dtype=complex)

    Fx, Fy = _fd_xy(F_fn, x, y, h)
    Gx, Gy = _fd_xy(G_fn, x, y, h)
    dzF, dzbF = Fx - 1j * Fy, Fx + 1j * Fy
    dzG, dzbG = Gx - 1j * Gy, Gx + 1j * Gy

    F, G = pair.F, pair.G
    den = F * np.conj(G) - G * np.conj(F)   # = -2i for (p, i/p) pairs
    if np.any(np.abs(den) < 1e-14):
        raise NumericalError("degenerate pair denominator F conj(G) - G conj(F)")
    A = (np.conj(F) * dzG - np.conj(G) * dzF) / den
    a = -(np.conj(F) * dzbG - np.conj(G) * dzbF) / den
    B = (F * dzG - G * dzF) / den
    b = -(G * dzbF - F * dzbG) / den
    return CharacteristicCoefficients(A=A, B=B, a=a, b=b)


# --------------------------------------------------------------------------
# pair integral and mesh derivatives
# --------------------------------------------------------------------------

def fg_integral(W: np.ndarray, pair: GeneratingPair, mesh: RadialMesh,
                rule: str = "cubic") -> np.ndarray:
    """(F, G)-integral of W from the center along every ray.

    Returns F(z) Re(int G* W dz) + G(z) Re(int F* W dz) cumulatively at every
    node; the value at s = 0 is 0. With the pair (1, i) this reduces to the
    ordinary complex contour integral.
    """
    Fs, Gs = pair.adjoint_values()
    I_G = cumulative_path_integral(Gs * W, mesh, rule=rule)
    I_F = cumulative_path_integral(Fs * W, mesh, rule=rule)
    return pair.F * I_G.real + pair.G * I_F.real


def mesh_gradient(W: np.ndarray, mesh: RadialMesh):
    """d/dx and d/dy of a mesh field by curvilinear central differences.

    Parameter derivatives along t (radial) and theta (angular, periodic) are
    inverted through the numerically evaluated mesh Jacobian. The center
    column (s = 0) is singular and returned as NaN; the rim column uses
    one-sided differences in t.
    """
    W = np.asarray(W)

    def d_dt(f):
        out = np.empty(f.shape, dtype=f.dtype)
        t = mesh.t
        hp = (t[2:] - t[1:-1])[None, :]
        hm = (t[1:-1] - t[:-2])[None, :]
        out[:, 1:-1] = (hm ** 2 * f[:, 2:] - hp ** 2 * f[:, :-2]
                        + (hp ** 2 - hm ** 2) * f[:, 1:-1]) / (hp * hm * (hp + hm))
        out[:, 0] = (f[:, 1] - f[:, 0]) / (t[1] - t[0])
        h1, h2 = t[-1] - t[-2], t[-1] - t[-3]
        # second-order one-sided at the rim
        out[:, -1] = (f[:, -1] * (h1 + h2) / (h1 * h2)
                      - f[:, -2] * h2 / (h1 * (h2 - h1))
                      + f[:, -3] * h1 / (h2 * (h2 - h1)))
        return out

    def d_dtheta(f):
        th = mesh.theta
        fp = np.roll(f, -1, axis=0)
        fm = np.roll(f, 1, axis=0)
        hp = (np.roll(th, -1) - th) % (2 * math.pi)
        hp[hp == 0] = 2 * math.pi
        hm = (th - np.roll(th, 1)) % (2 * math.pi)
        hm[hm == 0] = 2 * math.pi
        hp, hm = hp[:, None], hm[:, None]
        return (hm ** 2 * fp - hp ** 2 * fm + (hp ** 2 - hm ** 2) * f) / (hp * hm * (hp + hm))

    xt, yt = d_dt(mesh.nodes.real), d_dt(mesh.nodes.imag)
    xq, yq = d_dtheta(mesh.nodes.real), d_dtheta(mesh.nodes.imag)
    Wt, Wq = d_dt(W), d_dtheta(W)
    det = xt * yq - xq * yt
    with np.errstate(divide="ignore", invalid="ignore"):
        Wx = (Wt * yq - Wq * yt) / det
        Wy = (Wq * xt - Wt * xq) / det
    Wx[:, 0] = np.nan
    Wy[:, 0] = np.nan
    return Wx, Wy


def dz_field(W: np.ndarray, mesh: RadialMesh) -> np.ndarray:
    Wx, Wy = mesh_gradient(W, mesh)
    return Wx - 1j * Wy


def dzbar_field(W: np.ndarray, mesh: RadialMesh) -> np.ndarray:
    Wx, Wy = mesh_gradient(W, mesh)
    return Wx + 1j * Wy


def fg_derivative(W: np.ndarray, pair: GeneratingPair, mesh: RadialMesh,
                  h: float = 1e-4) -> np.ndarray:
    """(F, G)-derivative dz(W) - A W - B conj(W) of a mesh field.

    dz(W) is taken by the mesh central differences (NaN at the center column);
    A and B come from ``characteristic_coefficients`` with spacing ``h``.
    """
    coeffs = characteristic_coefficients(pair, mesh, h=h)
    return dz_field(W, mesh) - coeffs.A * W - coeffs.B * np.conj(W)


def vekua_residual(W: np.ndarray, p: np.ndarray, mesh: RadialMesh) -> np.ndarray:
    """|dzbar(W) - (dzbar(p)/p) conj(W)| per node (NaN at the center column)."""
    p = np.asarray(p, dtype=float)
    b = dzbar_field(p.astype(complex), mesh) / p
    return np.abs(dzbar_field(np.asarray(W, dtype=complex), mesh) - b * np.conj(W))


# --------------------------------------------------------------------------
# generating sequences
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratingSequence:
    """Periodic chain of generating pairs; pair_for(m) = pairs[m % period]."""

    period: int
    pairs: tuple

    def pair_for(self, m: int) -> GeneratingPair:
        return self.pairs[m % self.period]


def build_sequence(field: ConductivityField, mesh: RadialMesh) -> GeneratingSequence:
    """Generating sequence of the impedance-to-Vekua reduction for a conductivity field.

    Separable fields (analytic or slab-wise) give the period-2 sequence

        even m: (p2/p1, i p1/p2),   odd m: (p1 p2, i/(p1 p2)),

    with p1 = sqrt(sigma1), p2 = sqrt(sigma2) (per slab where applicable).
    When the two pairs coincide (sigma1 constant) the period degenerates
    to 1. Limit-case and scene fields give the period-1 sequence with
    p = sqrt(sigma) at every node.
    """
    x, y = mesh.xy()
    if isinstance(field, (AnalyticSeparable, PiecewiseSeparable)):
        s1, s2 = field.separable_parts(x, y)
        p1, p2 = np.sqrt(s1), np.sqrt(s2)

        def p_even(a, b):
            u1, u2 = field.separable_parts(np.asarray(a, float), np.asarray(b, float))
            return np.sqrt(u2 / u1)

        def p_odd(a, b):
            u1, u2 = field.separable_parts(np.asarray(a, float), np.asarray(b, float))
            return np.sqrt(u1 * u2)

        even = pair_from_p(p2 / p1, p_fn=p_even)
        odd = pair_from_p(p1 * p2, p_fn=p_odd)
        if np.array_equal(even.F, odd.F):
            return GeneratingSequence(period=1, pairs=(even,))
        return GeneratingSequence(period=2, pairs=(even, odd))

    p = np.sqrt(field.evaluate(x, y))

    def p_fn(a, b):
        return np.sqrt(field.evaluate(a, b))

    return GeneratingSequence(period=1, pairs=(pair_from_p(p, p_fn=p_fn),))


def successor_residual(seq: GeneratingSequence, mesh: RadialMesh, h: float = 1e-4):
    """max|B_(m+1) + b_m| over nodes, for each m in one period (Cartesian stencil).

    For separable conductivities the finite-difference truncation cancels
    exactly between the two pairs (the separable factors drop out of the
    shared difference quotients), so the residual sits at the rounding floor.
    For a period-1 sequence built from an x-dependent conductivity the
    residual instead measures |2 dx(p)/p|, the gap of the limit-case
    construction, and is not expected to be small.
    """
    out = []
    for m in range(seq.period):
        b_m = characteristic_coefficients(seq.pair_for(m), mesh, h=h).b
        B_next = characteristic_coefficients(seq.pair_for(m + 1), mesh, h=h).B
        out.append(float(np.max(np.abs(B_next + b_m))))
    return out


def successor_residual_mesh(seq: GeneratingSequence, mesh: RadialMesh):
    """Successor residual with derivatives taken on the mesh itself.

    The polar stencils mix x and y, so no structural cancellation occurs and
    the residual reflects genuine discretization error: it shrinks at second
    order as the mesh is refined. Interior nodes only (the center column is
    singular and the rim column one-sided).
    """
    def coeff_Bb(pair):
        F, G = pair.F, pair.G
        den = F * np.conj(G) - G * np.conj(F)
        B = (F * dz_field(G, mesh) - G * dz_field(F, mesh)) / den
        b = -(G * dzbar_field(F, mesh) - F * dzbar_field(G, mesh)) / den
        return B, b

    out = []
    for m in range(seq.period):
        _, b_m = coeff_Bb(seq.pair_for(m))
        B_next, _ = coeff_Bb(seq.pair_for(m + 1))
        res = np.abs(B_next + b_m)[:, 1:-1]
        out.append(float(np.nanmax(res)))
    return out
