import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardycorner.eigen import lowest_eigenvalues
from hardycorner.evolve import (CrankNicolson, beta_coefficient, bound_ratio, decay_fit, evolve, ground_mode,
                                initial_vector, make_initial, profile_error, spectral_expand, step,
                                t_profile_error, u_norm, u_norm_reverted)
from hardycorner.hardy import random_profile
from hardycorner.model import CornerParams, SeparatedFunction, alpha_l2_norm_sq, alpha_radial
from hardycorner.radial import RadialGrid, assemble

GRID = RadialGrid.default(n=5000)


@lru_cache(maxsize=None)
def op_for(p):
    return assemble(p, GRID)


@lru_cache(maxsize=None)
def trace_for(p, kind):
    op = op_for(p)
    return evolve(op, make_initial(kind, op), s_end=6.0)


P = CornerParams(3, 1, 1.0)


def test_step_on_ground_vector():
    op = op_for(P)
    mu, e0 = ground_mode(op)
    ds = 1e-3
    out = step(e0, op, ds)
    g = (1 - ds * mu / 2) / (1 + ds * mu / 2)
    assert op.norm(out) / op.norm(e0) == pytest.approx(g, abs=1e-8)
    assert np.all(step(np.zeros(op.size), op, ds) == 0)


def test_step_rejects_bad_input():
    op = op_for(P)
    with pytest.raises(ValueError):
        step(np.ones(op.size), op, 0.0)
    with pytest.raises(ValueError):
        step(np.ones(3), op, 1e-3)


def test_richardson_third_order_local_error():
    # smooth in the operator sense: a few low modes, so ds * mu stays small
    op = op_for(P)
    v = lowest_eigenvalues(op, 4).eigenvectors @ np.array([1.0, 0.5, -0.3, 0.2])
    diffs = []
    for ds in (4e-3, 2e-3):
        one = CrankNicolson(op, ds).advance(v, 1)
        two = CrankNicolson(op, ds / 2).advance(v, 2)
        diffs.append(op.norm(one - two))
    assert diffs[0] / diffs[1] == pytest.approx(8.0, rel=0.1)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31), ds=st.floats(1e-4, 0.1))
def test_energy_identity(seed, ds):
    op = op_for(P)
    v = np.random.default_rng(seed).normal(size=op.size) * np.exp(-op.nodes / 4)
    vp = step(v, op, ds)
    s = vp + v
    lhs = vp @ vp - v @ v
    rhs = -ds * (s @ op.matvec(s)) / 2
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12 * (v @ v))


def test_spectral_expand_basics():
    op = op_for(P)
    spec = lowest_eigenvalues(op, 4)
    e = spec.eigenvectors / math.sqrt(op.angular * op.h)
    beta = spectral_expand(e[:, 0], spec, op)
    np.testing.assert_allclose(beta, [1, 0, 0, 0], atol=1e-8)
    v0 = make_initial("generic", op)
    b = spectral_expand(v0, spec, op)
    partial = np.cumsum(b ** 2)
    assert np.all(partial <= op.norm(v0) ** 2 * (1 + 1e-12))
    assert np.all(np.diff(op.norm(v0) ** 2 - partial) <= 0)
    assert abs(spectral_expand(make_initial("orthogonal", op), spec, op)[0]) < 1e-8
    with pytest.raises(ValueError):
        spectral_expand(v0[:-1], spec, op)
    with pytest.raises(ValueError):
        spectral_expand(make_initial("generic", op_for(CornerParams(3, 0, 0.0))), spec, assemble(P, RadialGrid.default(n=4000)))


def test_trace_contracts_and_bound():
    for kind in ("generic", "eigen", "orthogonal"):
        tr = trace_for(P, kind)
        assert np.all(np.diff(tr.s_values) > 0)
        assert np.all(np.diff(tr.l2_norms) <= 1e-15 * tr.l2_norms[0])
        rep = decay_fit(tr, P)
        assert rep.bound_holds
        assert np.all(rep.weighted_ratios <= 1 + 1e-8)


def test_decay_generic_eigen_orthogonal():
    rep = decay_fit(trace_for(P, "generic"), P)
    assert rep.rel_err < 0.02
    rep = decay_fit(trace_for(P, "eigen"), P)
    assert rep.rel_err < 1e-6
    np.testing.assert_allclose(bound_ratio(trace_for(P, "eigen"), P), 1.0, atol=1e-6)
    rep = decay_fit(trace_for(P, "orthogonal"), P)
    assert rep.fitted_exponent <= -(3 + P.m) / 2 * (1 - 0.02)


def test_decay_fit_rejects_short_trace():
    op = op_for(P)
    tr = evolve(op, make_initial("generic", op), s_end=2.0)
    with pytest.raises(ValueError, match="ill-conditioned"):
        decay_fit(tr, P)


def test_sst_bookkeeping():
    tr = trace_for(P, "generic")
    for s, y, un in zip(tr.s_values[::10], tr.v_snapshots[::10], tr.u_norms[::10]):
        assert u_norm_reverted(tr.op, y, s) == pytest.approx(un, rel=1e-8)


def test_profile_series_single_mode_is_zero():
    op = op_for(P)
    mu, e0 = ground_mode(op)
    tr = evolve(op, 2.5 * e0, s_end=4.0)
    series = profile_error(tr, P, 2.5, e0, mu)
    assert np.max(series) < 1e-8 * 2.5


def test_profile_series_two_mode_rate():
    op = op_for(P)
    spec = lowest_eigenvalues(op, 2)
    e = spec.eigenvectors / math.sqrt(op.angular * op.h)
    tr = evolve(op, 1.0 * e[:, 0] + 0.3 * e[:, 1], s_end=5.0)
    series = profile_error(tr, P, 1.0, e[:, 0], spec.eigenvalues[0])
    i1, i5 = np.searchsorted(tr.s_values, [1.0, 5.0])
    rate = -math.log(series[i5] / series[i1]) / (tr.s_values[i5] - tr.s_values[i1])
    assert rate == pytest.approx(spec.eigenvalues[1] - P.mu0, rel=1e-3)
    assert series[0] == pytest.approx(0.3, rel=1e-8)


def test_profile_series_without_ground_mode():
    tr = trace_for(P, "orthogonal")
    mu, e0 = ground_mode(tr.op)
    series = profile_error(tr, P, 0.0, e0, mu)
    np.testing.assert_allclose(series, np.exp(P.mu0 * tr.s_values) * tr.l2_norms, rtol=1e-12)
    assert series[-1] < series[10]


def test_beta_examples(rng):
    p = CornerParams(4, 2, 3.0)
    r = np.linspace(1e-4, 40, 400001)
    eig = SeparatedFunction(r, np.exp(-r * r / 8) * alpha_radial(p, r), p)
    assert beta_coefficient(p, eig) == pytest.approx(math.sqrt(alpha_l2_norm_sq(p)), rel=1e-8)
    # a sign change placed so the K-pairing with alpha vanishes
    w = alpha_radial(p, r) ** 2 * r ** (p.dim - 1)
    cum = np.cumsum(w)
    r_star = r[np.searchsorted(cum, cum[-1] / 2)]
    odd = SeparatedFunction(r, np.exp(-r * r / 8) * alpha_radial(p, r) * np.sign(r_star - r), p)
    assert abs(beta_coefficient(p, odd)) < 1e-3 * beta_coefficient(p, eig)


@pytest.mark.parametrize("p", [CornerParams.critical(3, 1), CornerParams(4, 2, 3.0)])
def test_beta_quadrature_vs_spectral(p, rng):
    op = assemble(p, RadialGrid.default())
    _, e0 = ground_mode(op)
    for _ in range(3):
        u = random_profile(rng, p, r_lo=0.05, r_hi=6.0)
        v0 = initial_vector(op, lambda r: np.interp(r, u.r, u.phi, left=0.0, right=0.0))
        b0 = op.inner(v0, e0)
        assert beta_coefficient(p, u) == pytest.approx(b0, rel=1e-5)


def test_initial_data_outside_weighted_space_rejected():
    op = op_for(P)
    with pytest.raises(ValueError, match="L\\^2\\(K\\)"):
        initial_vector(op, lambda r: np.exp(-r * r / 16))
    with pytest.raises(ValueError):
        make_initial("random", op)
    with pytest.raises(ValueError):
        make_initial("spiky", op)


def test_evolve_validates_spacing():
    op = op_for(P)
    v0 = make_initial("generic", op)
    with pytest.raises(ValueError):
        evolve(op, v0, s_end=1.0, ds=0.03, every=0.1)
    with pytest.raises(ValueError):
        evolve(op, v0, s_end=1.05, ds=1e-3, every=0.1)


def test_u_norm_matches_closed_form_for_eigen_data():
    op = assemble(P, RadialGrid.default())
    v0 = make_initial("eigen", op)
    # ||e^{-|x|^2/8} alpha||^2 = corner * Int e^{-r^2/2} r^{2m+1} dr = corner * 2^m Gamma(m+1)
    from hardycorner.model import corner_factor
    exact = math.sqrt(corner_factor(P) * 2 ** P.m * math.gamma(P.m + 1))
    assert u_norm(op, v0) == pytest.approx(exact, rel=1e-7)


def test_t_profile_error_decreases():
    p = CornerParams(3, 0, 0.0)
    op = op_for(p)
    tr = evolve(op, make_initial("generic", op), s_end=8.0)
    rep = decay_fit(tr, p)
    vals = [t_profile_error(tr, p, rep.beta, s) for s in (6.0, 7.0, 8.0)]
    assert vals[0] > vals[1] > vals[2]
