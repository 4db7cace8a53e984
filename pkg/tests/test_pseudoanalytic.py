import math

import numpy as np
import pytest
from scipy.integrate import quad

from fpeit.conductivity import constant_field, radial_rings_field, sample_piecewise
from fpeit.errors import NumericalError, ValidationError
from fpeit.pseudoanalytic import (
    GeneratingPair,
    adjoint,
    build_sequence,
    characteristic_coefficients,
    cumulative_path_integral,
    dz_field,
    fg_derivative,
    fg_integral,
    pair_from_p,
    radial_mesh,
    successor_residual,
    successor_residual_mesh,
    vekua_residual,
)
from fpeit.verification import lorentzian_case, sinusoidal_case


def unit_pair(mesh):
    ones = np.ones(mesh.nodes.shape)
    return pair_from_p(ones, p_fn=lambda x, y: np.ones_like(np.asarray(x, float)))


# --- mesh ---------------------------------------------------------------------

def test_mesh_geometry():
    mesh = radial_mesh(12, 50)
    assert mesh.nodes.shape == (12, 51)
    np.testing.assert_allclose(mesh.nodes[:, 0], 0.0, atol=1e-15)
    np.testing.assert_allclose(np.abs(mesh.nodes[:, -1]), 1.0, atol=1e-12)
    assert np.all(np.diff(mesh.t) > 0)
    assert math.isclose(mesh.boundary_weights.sum(), 2 * math.pi, rel_tol=1e-12)


def test_mesh_offcenter():
    mesh = radial_mesh(16, 60, z0=0.3 + 0.2j)
    np.testing.assert_allclose(mesh.nodes[:, 0], 0.3 + 0.2j, atol=1e-15)
    np.testing.assert_allclose(np.abs(mesh.nodes[:, -1]), 1.0, atol=1e-12)
    with pytest.raises(ValidationError):
        radial_mesh(16, 60, z0=1.0 + 0j)


def test_mesh_corner_snapping():
    angles = (math.pi / 4, 3 * math.pi / 4, 5 * math.pi / 4)
    mesh = radial_mesh(61, 50, corner_angles=angles)
    for a in angles:
        assert np.min(np.abs(mesh.theta - a)) < 1e-14
    assert len(mesh.theta) == 61
    assert math.isclose(mesh.boundary_weights.sum(), 2 * math.pi, rel_tol=1e-12)


def test_mesh_rim_grading():
    mesh = radial_mesh(8, 50, rim_grading=2.0)
    gaps = np.diff(mesh.t)
    assert gaps[-1] < gaps[0]  # clustered toward the rim
    assert mesh.t[0] == 0.0 and mesh.t[-1] == 1.0


# --- pairs ---------------------------------------------------------------------

def test_pair_from_p_examples():
    mesh = radial_mesh(8, 50)
    pair = unit_pair(mesh)
    assert pair.F[0, 0] == 1.0 and pair.G[0, 0] == 1j
    p2 = pair_from_p(np.full(mesh.nodes.shape, 2.0))
    assert p2.G[0, 0] == pytest.approx(0.5j)
    np.testing.assert_allclose(np.imag(np.conj(p2.F) * p2.G), 1.0, atol=1e-15)
    # p = sqrt(sigma2/sigma1) for the sinusoidal conductivity at the origin
    case = sinusoidal_case(math.pi)
    s1, s2 = case.field.separable_parts(np.array([0.0]), np.array([0.0]))
    assert math.sqrt(s2[0] / s1[0]) == pytest.approx(0.816496580927726, abs=1e-12)


def test_pair_validation():
    mesh = radial_mesh(8, 50)
    with pytest.raises(ValidationError):
        pair_from_p(np.zeros(mesh.nodes.shape))
    with pytest.raises(ValidationError):
        pair_from_p(np.full(mesh.nodes.shape, np.nan))
    with pytest.raises(ValidationError):
        GeneratingPair(F=np.ones((2, 2), complex), G=np.ones((2, 2), complex))


def test_adjoint():
    mesh = radial_mesh(8, 50)
    pair = unit_pair(mesh)
    adj = adjoint(pair)
    assert adj.F[0, 0] == pytest.approx(-1j)
    assert adj.G[0, 0] == pytest.approx(1.0)
    p = pair_from_p(np.full(mesh.nodes.shape, 1.7))
    padj = adjoint(p)
    np.testing.assert_allclose(np.imag(np.conj(padj.F) * padj.G), 1.0, atol=1e-15)
    twice = adjoint(padj)
    np.testing.assert_allclose(twice.F, -p.F)
    np.testing.assert_allclose(twice.G, -p.G)


# --- characteristic coefficients ------------------------------------------------

def test_coefficients_unit_pair_vanish():
    mesh = radial_mesh(12, 60)
    cc = characteristic_coefficients(unit_pair(mesh), mesh)
    for arr in (cc.A, cc.B, cc.a, cc.b):
        assert np.abs(arr).max() == 0.0


def test_coefficients_exponential():
    # p = e^x: B = dz(p)/p = 1, b = dzbar(p)/p = 1, A = a = 0
    mesh = radial_mesh(12, 60)
    pair = pair_from_p(np.exp(mesh.nodes.real),
                       p_fn=lambda x, y: np.exp(np.asarray(x, float)))
    cc = characteristic_coefficients(pair, mesh, h=1e-4)
    interior = np.s_[:, 1:-1]
    assert np.abs(cc.B[interior] - 1.0).max() < 1e-7
    assert np.abs(cc.b[interior] - 1.0).max() < 1e-7
    assert np.abs(cc.A[interior]).max() < 1e-7
    # rim rows fall back to one-sided/tangential stencils: first-order there
    assert np.abs(cc.B - 1.0).max() < 2e-4


def test_coefficients_match_direct_formula():
    # cross-check the general formula against B = dz(p)/p, b = dzbar(p)/p
    # computed by an independent centered difference on the same p
    h = 1e-4
    mesh = radial_mesh(10, 40)

    def p_fn(x, y):
        return np.exp(0.3 * np.asarray(x) + 0.2 * np.asarray(y) ** 2)

    pair = pair_from_p(p_fn(*mesh.xy()), p_fn=p_fn)
    cc = characteristic_coefficients(pair, mesh, h=h)
    x, y = mesh.xy()
    interior = np.hypot(x, y) < 1 - 2 * h
    px = (p_fn(x + h, y) - p_fn(x - h, y)) / (2 * h)
    py = (p_fn(x, y + h) - p_fn(x, y - h)) / (2 * h)
    p = p_fn(x, y)
    B_direct = (px - 1j * py) / p
    b_direct = (px + 1j * py) / p
    scale = np.abs(B_direct[interior]).max()
    assert np.abs((cc.B - B_direct)[interior]).max() <= 10 * h ** 2 * scale + 1e-12
    assert np.abs((cc.b - b_direct)[interior]).max() <= 10 * h ** 2 * scale + 1e-12
    assert np.abs(cc.A[interior]).max() <= 1e-7
    assert np.abs(cc.a[interior]).max() <= 1e-7


def test_coefficients_require_backing_callable():
    mesh = radial_mesh(8, 50)
    pair = pair_from_p(np.ones(mesh.nodes.shape))  # no p_fn
    with pytest.raises(ValidationError):
        characteristic_coefficients(pair, mesh)


# --- pair integral ---------------------------------------------------------------

def test_fg_integral_unit_pair_basics():
    mesh = radial_mesh(16, 200)
    pair = unit_pair(mesh)
    z = mesh.nodes
    out = fg_integral(np.ones_like(z), pair, mesh)
    np.testing.assert_allclose(out, z, atol=1e-14)  # int 1 dz = z
    out = fg_integral(z, pair, mesh)
    np.testing.assert_allclose(out, z ** 2 / 2, atol=1e-13)
    assert np.abs(out[:, 0]).max() == 0.0  # value at the center is 0


def test_fg_integral_degenerate_collapse_bitwise():
    # with (1, i) and the trapezoid rule the integral must equal the plain
    # complex trapezoid contour integral
    mesh = radial_mesh(10, 80)
    pair = unit_pair(mesh)
    rng = np.random.default_rng(0)
    W = rng.normal(size=mesh.nodes.shape) + 1j * rng.normal(size=mesh.nodes.shape)
    got = fg_integral(W, pair, mesh, rule="trapezoid")
    dz = np.diff(mesh.nodes, axis=1)
    oracle = np.concatenate(
        [np.zeros((10, 1), complex),
         np.cumsum(0.5 * (W[:, 1:] + W[:, :-1]) * dz, axis=1)], axis=1)
    assert np.abs(got - oracle).max() <= 1e-14


def test_fg_integral_against_quadrature_oracle():
    # independent high-precision oracle on a nontrivial pair, single ray
    mesh = radial_mesh(6, 400)

    def p_fn(x, y):
        return np.exp(0.4 * np.asarray(x) - 0.3 * np.asarray(y))

    pair = pair_from_p(p_fn(*mesh.xy()), p_fn=p_fn)

    def V(z):
        return z ** 2 + 0.3 * np.conj(z) + 0.1j

    r = 2  # an arbitrary ray
    e = mesh.span[r]

    def integrand(kind, part):
        def f(t):
            z = t * e
            p = p_fn(z.real, z.imag)
            Fs, Gs = -1j * p, 1.0 / p  # adjoint values for (p, i/p)
            g = (Gs if kind == "G" else Fs) * V(z) * e
            return g.real if part == "re" else g.imag
        return f

    IG = quad(integrand("G", "re"), 0, 1, epsabs=1e-13)[0]
    IF = quad(integrand("F", "re"), 0, 1, epsabs=1e-13)[0]
    zb = mesh.nodes[r, -1]
    pb = p_fn(zb.real, zb.imag)
    expected = pb * IG + (1j / pb) * IF

    got = fg_integral(V(mesh.nodes), pair, mesh, rule="cubic")[r, -1]
    assert abs(got - expected) < 1e-9


def test_cumulative_rules_reject_unknown():
    mesh = radial_mesh(6, 50)
    with pytest.raises(ValidationError):
        cumulative_path_integral(np.ones(mesh.nodes.shape, complex), mesh, rule="simpson")


# --- derivative, Vekua residual ---------------------------------------------------

def test_fg_derivative_annihilates_pair():
    case = sinusoidal_case(math.pi)
    residuals = []
    for P, S in ((48, 100), (96, 200)):
        mesh = radial_mesh(P, S)
        seq = build_sequence(case.field, mesh)
        pair = seq.pair_for(0)
        interior = np.s_[:, 1:-1]
        dF = fg_derivative(pair.F, pair, mesh)
        dG = fg_derivative(pair.G, pair, mesh)
        scale = np.abs(dz_field(pair.F, mesh)[interior]).max() + 1.0
        residuals.append(max(np.nanmax(np.abs(dF[interior])),
                             np.nanmax(np.abs(dG[interior]))) / scale)
    assert residuals[1] < 2e-2  # truncation-level zero
    assert residuals[1] < residuals[0] / 1.5  # and refining


def test_fg_derivative_unit_pair_z_squared():
    # factorless convention: dz(z^2) = 2 * (2z); tolerance at the angular
    # truncation scale (dtheta^2/6) |d^3/dtheta^3 z^2| ~ 1.6e-3 at P=128
    mesh = radial_mesh(128, 200)
    pair = unit_pair(mesh)
    z = mesh.nodes
    got = fg_derivative(z ** 2, pair, mesh)
    interior = np.s_[:, 1:-1]
    np.testing.assert_allclose(got[interior], 2 * (2 * z)[interior], atol=5e-3)
    # and it matches an independent mesh-free central difference
    h = 1e-5
    oracle = ((z + h) ** 2 - (z - h) ** 2) / (2 * h) - 1j * ((z + 1j * h) ** 2 - (z - 1j * h) ** 2) / (2 * h)
    np.testing.assert_allclose(got[interior], oracle[interior], atol=5e-3)


def test_vekua_residual_examples():
    mesh = radial_mesh(32, 100)
    z = mesh.nodes
    p = np.ones(z.shape)
    interior = np.s_[:, 1:-1]
    res = vekua_residual(np.conj(z), p, mesh)
    np.testing.assert_allclose(res[interior], 2.0, atol=1e-9)  # dzbar(zbar) = 2
    res = vekua_residual(z, p, mesh)
    assert np.nanmax(res[interior]) < 1e-9
    # W = p is always an exact solution of its own Vekua equation
    case = lorentzian_case(0.5)
    x, y = mesh.xy()
    pfield = np.sqrt(case.sigma(x, y))
    res = vekua_residual(pfield.astype(complex), pfield, mesh)
    assert np.nanmax(res[interior]) < 1e-12


# --- sequences ---------------------------------------------------------------------

def test_sequence_constant_degenerates_to_period_one():
    mesh = radial_mesh(8, 50)
    seq = build_sequence(constant_field(1.0), mesh)
    assert seq.period == 1
    assert seq.pair_for(0).F[0, 0] == 1.0
    assert seq.pair_for(5).G[0, 0] == 1j


def test_sequence_sinusoidal_period_two():
    mesh = radial_mesh(12, 60)
    case = sinusoidal_case(math.pi)
    seq = build_sequence(case.field, mesh)
    assert seq.period == 2
    x, y = mesh.xy()
    s1, s2 = case.field.separable_parts(x, y)
    np.testing.assert_allclose(seq.pair_for(0).F, np.sqrt(s2 / s1), rtol=1e-14)
    np.testing.assert_allclose(seq.pair_for(1).F, np.sqrt(s1 * s2), rtol=1e-14)
    np.testing.assert_allclose(seq.pair_for(2).F, seq.pair_for(0).F)  # periodicity
    for m in range(2):
        pair = seq.pair_for(m)
        assert np.imag(np.conj(pair.F) * pair.G).min() > 0


def test_sequence_rings_period_one():
    mesh = radial_mesh(12, 61)
    seq = build_sequence(radial_rings_field(), mesh)
    assert seq.period == 1
    x, y = mesh.xy()
    np.testing.assert_allclose(seq.pair_for(0).F.real,
                               np.sqrt(radial_rings_field().evaluate(x, y)), rtol=1e-14)


def test_sequence_piecewise_separable():
    sigma = lambda x, y: 1.0 / ((np.asarray(x) ** 2 + 0.1) * (np.asarray(y) ** 2 + 0.1))
    field = sample_piecewise(sigma, M=8, q=12)
    mesh = radial_mesh(12, 60)
    seq = build_sequence(field, mesh)
    assert seq.period == 2


def test_successor_condition_cartesian_floor():
    # separable pairs: the truncation cancels exactly, the residual is rounding
    mesh = radial_mesh(16, 80)
    seq = build_sequence(sinusoidal_case(math.pi).field, mesh)
    res = successor_residual(seq, mesh, h=1e-4)
    assert max(res) < 1e-9


def test_successor_condition_mesh_refinement():
    case = sinusoidal_case(math.pi)
    coarse = radial_mesh(48, 100)
    fine = radial_mesh(96, 200)
    r_coarse = successor_residual_mesh(build_sequence(case.field, coarse), coarse)
    r_fine = successor_residual_mesh(build_sequence(case.field, fine), fine)
    assert max(r_fine) < max(r_coarse) / 1.5


# --- antiderivative round trip ----------------------------------------------------

def test_round_trip_identity_and_order():
    # For the (1, i) pair and analytic polynomial W, the factorless pair
    # derivative is 2 W'(z) and the pair integral of it returns
    # 2 (W(z) - W(0)); the endpoint error converges at order ~2 in S with the
    # trapezoid rule.
    rng = np.random.default_rng(7)
    orders = []
    for trial in range(10):
        coef = rng.normal(size=5) + 1j * rng.normal(size=5)

        def W(z):
            return sum(c * z ** k for k, c in enumerate(coef))

        def Wp(z):
            return sum(k * c * z ** (k - 1) for k, c in enumerate(coef) if k >= 1)

        errs = []
        Ss = (50, 100, 200)
        for S in Ss:
            mesh = radial_mesh(4, S)
            pair = unit_pair(mesh)
            z = mesh.nodes
            rt = fg_integral(2 * Wp(z), pair, mesh, rule="trapezoid")
            expected = 2 * (W(z) - W(0))
            errs.append(np.abs((rt - expected)[:, -1]).max())
        slope = np.polyfit(np.log(Ss), np.log(errs), 1)[0]
        orders.append(-slope)
    assert all(1.7 <= o <= 2.4 for o in orders)


def test_round_trip_uses_consistent_factor():
    # the mesh-FD pair derivative agrees with the exact factorless derivative
    mesh = radial_mesh(256, 200)
    pair = unit_pair(mesh)
    z = mesh.nodes
    W = z ** 3 - 0.5 * z
    dW = fg_derivative(W, pair, mesh)
    exact = 2 * (3 * z ** 2 - 0.5)
    interior = np.s_[:, 1:-1]
    np.testing.assert_allclose(dW[interior], exact[interior], atol=5e-3)


def test_chain_overflow_reports_location():
    # For pairs of the (p, i/p) form the chain products top out at p^2, so a
    # conductivity that passes validation cannot overflow; drive the guard
    # with a raw pair whose p^2 exceeds the float range.
    from fpeit.formal_powers import formal_power_fields
    from fpeit.pseudoanalytic import GeneratingSequence
    mesh = radial_mesh(6, 60)
    x, _ = mesh.xy()
    pair = pair_from_p(np.exp(355.0 * x))
    seq = GeneratingSequence(period=1, pairs=(pair,))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(NumericalError, match="degree"):
            formal_power_fields(seq, mesh, 5, 1.0)
