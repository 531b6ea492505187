import numpy as np
import pytest

from mjls_randobs import (
    GainSchedule,
    MjlsModel,
    SdpSolution,
    SdpStatus,
    SingularG,
    assemble,
    build_custom,
    build_extended_chain,
    certify_mss,
    extract_gains,
    solve_feasibility,
    synthesize,
)
from mjls_randobs import synth
from mjls_randobs.lmi import LmiVariableLayout
from mjls_randobs.synth import closed_loop_per_state, lmi_state_set, observed_start, second_moment_matrix

from conftest import example_obs, random_instance


def scalar(a, b=0.0):
    m = MjlsModel.build([[[a]]], [[[b]]], [[1.0]])
    return m, build_extended_chain(m, build_custom([[1.0]], {1}, 1))


def solution_for(layout, G, F):
    R = np.broadcast_to(np.eye(layout.n), (layout.S, layout.n, layout.n))
    return SdpSolution(layout.pack(R, G, F), 1.0, SdpStatus.FEASIBLE)


def test_extract_zero_f_gives_zero_gains():
    lay = LmiVariableLayout(n=2, m=1, S=4, N=2, T=2)
    G = np.broadcast_to(np.eye(2) * 3, (2, 2, 2, 2))
    K = extract_gains(solution_for(lay, G, np.zeros((2, 2, 1, 2))), lay)
    assert np.array_equal(K.K, np.zeros((2, 2, 1, 2)))


def test_extract_scalar():
    lay = LmiVariableLayout(n=1, m=1, S=1, N=1, T=1)
    K = extract_gains(solution_for(lay, np.full((1, 1, 1, 1), 2.0), np.ones((1, 1, 1, 1))), lay)
    assert K.K[0, 0, 0, 0] == 0.5


def test_extract_matrix_solves_k_g_equals_f():
    lay = LmiVariableLayout(n=2, m=1, S=1, N=1, T=1)
    rng = np.random.default_rng(0)
    G = rng.normal(size=(1, 1, 2, 2)) + 3 * np.eye(2)
    F = rng.normal(size=(1, 1, 1, 2))
    K = extract_gains(solution_for(lay, G, F), lay)
    np.testing.assert_allclose(K.K[0, 0] @ G[0, 0], F[0, 0], atol=1e-14)


def test_extract_singular_g():
    lay = LmiVariableLayout(n=2, m=1, S=1, N=1, T=1)
    with pytest.raises(SingularG):
        extract_gains(solution_for(lay, np.zeros((1, 1, 2, 2)), np.ones((1, 1, 1, 2))), lay)


@pytest.mark.parametrize("a", [0.5, 0.99, 1.0, 1.01, 2.0, -0.7])
def test_scalar_certificate(a):
    m, ch = scalar(a)
    cert = certify_mss(m, ch, GainSchedule.zeros(1, 1, 1, 1))
    assert cert.spectral_radius == pytest.approx(a * a, rel=1e-12)
    assert cert.stable == (abs(a) < 1)
    assert cert.operator_dim == 1


def test_zero_closed_loop_has_zero_radius():
    m = MjlsModel.build([np.zeros((2, 2))] * 2, [np.zeros((2, 1))] * 2, [[0.5, 0.5], [0.3, 0.7]])
    ch = build_extended_chain(m, build_custom([[0, 1], [1, 0]], {1}, 2))
    assert certify_mss(m, ch, GainSchedule.zeros(2, 2, 1, 2)).spectral_radius == 0.0


def test_radius_matches_second_moment_growth_rate(model, chain):
    """Oracle: geometric growth of the iterated second moments from a positive start."""
    K = GainSchedule.build(np.random.default_rng(3).normal(0, 0.2, (3, 4, 1, 2)))
    gamma = closed_loop_per_state(model, chain, K)
    X = np.broadcast_to(np.eye(2), (chain.size, 2, 2)).copy()
    w = chain.pbar.entries
    norms = []
    for _ in range(400):
        X = np.einsum("cb,cij->bij", w, gamma @ X @ gamma.transpose(0, 2, 1))
        s = np.trace(X, axis1=1, axis2=2).sum()
        norms.append(s)
        X /= s
    # the clock makes the dominant spectrum periodic, so average over a multiple of the period
    rate = np.exp(np.mean(np.log(norms[-40:])))
    assert certify_mss(model, chain, K).spectral_radius == pytest.approx(rate, rel=1e-6)


def test_dense_and_iterative_paths_agree(model, chain, monkeypatch):
    K = GainSchedule.build(np.random.default_rng(8).normal(0, 0.3, (3, 4, 1, 2)))
    dense = certify_mss(model, chain, K).spectral_radius
    monkeypatch.setattr(synth, "DENSE_LIMIT", 0)
    assert certify_mss(model, chain, K).spectral_radius == pytest.approx(dense, rel=1e-8)


def test_operator_matrix_matches_definition(model, chain):
    K = GainSchedule.build(np.random.default_rng(1).normal(size=(3, 4, 1, 2)))
    gamma = closed_loop_per_state(model, chain, K)
    L = second_moment_matrix(chain, gamma)
    X = np.random.default_rng(2).normal(size=(chain.size, 2, 2))
    direct = np.zeros_like(X)
    for c2 in range(chain.size):
        for c in np.flatnonzero(chain.pbar.entries[c2]):
            direct[c] += chain.pbar.entries[c2, c] * gamma[c2] @ X[c2] @ gamma[c2].T
    np.testing.assert_allclose(L @ X.ravel(), direct.ravel(), atol=1e-12)


def test_open_loop_radius_independent_of_observation_when_unactuated():
    A = [[[0.6, 0.3], [0.0, 0.5]], [[0.9, 0.0], [0.4, -0.2]]]
    m = MjlsModel.build(A, [np.zeros((2, 1))] * 2, [[0.7, 0.3], [0.5, 0.5]])
    rhos = []
    for Q, lam, T in [([[1.0]], {1}, 1), ([[0, 1], [1, 0]], {1}, 3), ([[0.5, 0.5], [0.2, 0.8]], {2}, 2)]:
        ch = build_extended_chain(m, build_custom(Q, lam, T))
        K = GainSchedule.build(np.random.default_rng(T).normal(size=(2, T, 1, 2)))
        rhos.append(certify_mss(m, ch, K).spectral_radius)
    assert max(rhos) - min(rhos) < 1e-10


def test_example_pipeline(model, chain, example_synthesis):
    res = example_synthesis
    assert res.solution.feasible
    assert res.gains.K.shape == (3, 4, 1, 2)
    assert res.certificate.stable and res.certificate.spectral_radius < 1
    assert res.certificate.operator_dim == 720
    assert [a["states"] for a in res.attempts] == ["all", "admissible", "observed-start"]
    # re-certifying on the reduced state set gives the same radius: states outside it are transient
    keep = sorted(i - 1 for i in lmi_state_set(chain, example_obs(), "observed-start"))
    sub = certify_mss(model, chain, res.gains, keep)
    assert sub.spectral_radius == pytest.approx(res.certificate.spectral_radius, rel=1e-9)


@pytest.mark.parametrize("seed", range(12))
def test_lmi_solution_certifies(seed):
    m, o = random_instance(np.random.default_rng(500 + seed))
    ch = build_extended_chain(m, o)
    for which in ("all", "observed-start"):
        states = lmi_state_set(ch, o, which)
        prob = assemble(m, ch, states)
        sol = solve_feasibility(prob)
        if sol.feasible:
            K = extract_gains(sol, prob.layout)
            sub = None if states is None else sorted(i - 1 for i in states)
            assert certify_mss(m, ch, K, sub).stable


def test_synthesize_reports_failure_for_unstabilizable():
    m = MjlsModel.build([[[2.0]]], [[[0.0]]], [[1.0]])
    res = synthesize(m, build_custom([[1.0]], {1}, 1))
    assert res.gains is None and not res.solution.feasible


def test_observed_start_restriction():
    o = build_custom([[0, 1, 0], [0, 0, 1], [1, 0, 0]], {1, 3})
    assert observed_start(o).initial_states == {1, 3}
