import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zeitnot.bivariant import (
    AS_PRINTED,
    PUBLISHED_TABLE1,
    ROW_NORMALIZED,
    TABLE1_BETAS,
    BiModelParams,
    bi_asymptotic_parts,
    bi_asymptotic_residual,
    bi_chain,
    bi_finite_equation_brackets,
    bi_finite_equation_residual,
    bi_optimal_threshold,
    bi_price_sequence,
    bi_printed_inequalities,
    bi_solve_asymptotic,
    bi_stop_distribution,
    bi_threshold_scan,
    bi_transition_exact,
    table1,
    table1_csv,
    table1_json,
)
from zeitnot.errors import DomainError, NotStochasticError, ParameterError
from zeitnot.stopping_core import TransitionMatrix

# smallest root of the limit equation per beta; frozen after a brentq cross-check
FROZEN_ROOTS = {0.5: 0.0984941223554, 1.0: 0.158198153177, 1.5: 0.187979921855}

cutoffs = st.integers(2, 60).flatmap(lambda N: st.tuples(st.integers(2, N), st.just(N)))


def limit_by_hand(z, beta):
    lz = np.log(z)
    return beta * (
        4 * z * lz + 2 * z**2 * lz**2 + 2 * z**2 * lz + z**3 * lz**2 + 2 * z**3 * lz + 5 * z - z**3 - z**4
    ) + (2 * z + 2 * z**2 * lz + 2 * z**2 * (1 - z) ** 2 + 2 * z**3 * lz**2 + 3 * z**3 * lz + 10 * z**3 - z**4 + z**5)


# --- chain -------------------------------------------------------------------------------------


def test_transition_values():
    assert bi_transition_exact(1, 2) == Fraction(3, 4)
    assert bi_transition_exact(2, 3) == Fraction(10, 27)
    assert bi_transition_exact(1, 3) == Fraction(11, 36)
    assert bi_transition_exact(3, 2) == 0


def test_row_one_overflows_at_three():
    chain, diag = bi_chain(3, AS_PRINTED)
    assert diag.clamped_states == (1,)
    assert diag.excess[1] == Fraction(2, 36)
    assert bi_transition_exact(1, 2) + bi_transition_exact(1, 3) == Fraction(38, 36)
    assert chain.probs[1, 0] == 0.0
    assert diag.row_sums[1] == pytest.approx(38 / 36, abs=1e-15)
    assert not chain.stochastic


def test_printed_chain_is_rejected_by_the_solver_type():
    chain, _ = bi_chain(3, AS_PRINTED)
    with pytest.raises(NotStochasticError):
        TransitionMatrix(chain.probs)


@pytest.mark.parametrize("N", [2, 3, 7, 50, 200])
def test_normalized_rows_sum_to_one(N):
    chain, diag = bi_chain(N, ROW_NORMALIZED)
    np.testing.assert_allclose(diag.row_sums, 1.0, atol=1e-12)
    assert chain.stochastic and diag.max_excess < 1e-12


def test_diagnostics_are_deterministic():
    a = bi_chain(12, AS_PRINTED)[1].to_dict()
    b = bi_chain(12, AS_PRINTED)[1].to_dict()
    assert a == b
    json.dumps(a)


def test_chain_argument_checks():
    with pytest.raises(ParameterError):
        bi_chain(1)
    with pytest.raises(ParameterError):
        bi_chain(5, "wobbly")


# --- stop-time law ----------------------------------------------------------------------------------


def test_closed_form_first_weight():
    d = bi_stop_distribution(2, 6, AS_PRINTED)
    assert d.closed_form[2] == pytest.approx(0.75)


@pytest.mark.parametrize("mode", [AS_PRINTED, ROW_NORMALIZED])
@pytest.mark.parametrize("N", [3, 6, 11])
def test_last_slot_cutoff_is_one_step_mass(mode, N):
    chain, _ = bi_chain(N, mode)
    d = bi_stop_distribution(N, N, mode)
    p = chain.probs
    m = np.zeros(N + 1)
    m[1] = 1.0
    for j in range(2, N):
        m[j] = sum(m[i] * p[i, j] for i in range(1, j))
    assert d.weights[N] == pytest.approx(sum(m[i] * p[i, N] for i in range(1, N)), abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(cutoffs)
def test_normalized_stop_law_is_a_sub_probability(lN):
    l, N = lN
    d = bi_stop_distribution(l, N, ROW_NORMALIZED)
    assert np.all(d.weights >= 0)
    assert d.total + d.deficit == pytest.approx(1.0, abs=1e-12)
    assert d.absorbed == pytest.approx(d.deficit, abs=1e-10)
    assert -1e-12 <= d.deficit <= 1


def test_closed_form_gaps_are_reported():
    gaps = [bi_stop_distribution(l, N).closed_form_gap for N in range(4, 13) for l in range(2, min(N, 6) + 1)]
    assert all(g is not None and np.isfinite(g) for g in gaps)
    assert max(gaps) > 1e-3


# --- price and cutoff -----------------------------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(cutoffs, st.floats(0.05, 0.95), st.floats(0.01, 2.0), st.sampled_from([AS_PRINTED, ROW_NORMALIZED]))
def test_price_before_cutoff(lN, alpha, c, mode):
    l, N = lN
    v = bi_price_sequence(BiModelParams(N, alpha, c, mode), l)
    assert v.sequence[0] == pytest.approx(c * (4 / N - 1 / N**2), abs=1e-14)
    n = np.arange(1, l)
    want = c * (4 * n / N - n**2 / N**2) - alpha * (N - 1) ** 2 * (n - 1) * n / (2 * N**4)
    np.testing.assert_allclose(v.values[1:l], want, atol=1e-13)


def test_beta_is_derived():
    p = BiModelParams(10, 0.4, 0.1)
    assert p.beta == pytest.approx(1.0)
    assert p.in_regime
    assert not BiModelParams(10, 0.4, 0.04).in_regime


@pytest.mark.xfail(strict=True, reason="prices turn negative near the end of the portfolio at "
                   "c_alpha = alpha/8 for every N tested, in both chain modes")
@pytest.mark.parametrize("mode", [AS_PRINTED, ROW_NORMALIZED])
def test_prices_positive_in_regime(mode):
    for N in range(10, 101, 10):
        p = BiModelParams(N, 0.5, 0.5 / 8, mode)
        for l in range(2, N + 1):
            assert np.all(bi_price_sequence(p, l).sequence > 0)


def test_degenerate_two_items():
    for mode in (AS_PRINTED, ROW_NORMALIZED):
        rep = bi_optimal_threshold(BiModelParams(2, 0.5, 0.125, mode))
        assert rep.l_star == 2


@pytest.mark.parametrize("mode", [AS_PRINTED, ROW_NORMALIZED])
def test_small_portfolio_cutoff_per_mode(mode):
    rep = bi_optimal_threshold(BiModelParams(6, 0.5, 0.125, mode))
    assert rep.mode == mode and rep.model == "bi"
    assert rep.continue_before > rep.stop_before and rep.continue_at <= rep.stop_at


def test_cutoff_grows_with_beta():
    N, alpha = 60, 0.5
    found = []
    for beta in np.arange(0.5, 3.01, 0.25):
        s = bi_threshold_scan(BiModelParams(N, alpha, beta * alpha / 4))
        found.append(s.l_star if s.l_star is not None else s.flip)
    assert found == sorted(found)


def test_printed_and_chain_prefactors_differ():
    p = BiModelParams(20, 0.5, 0.125)
    pr = bi_printed_inequalities(p, 5, "printed")
    ch = bi_printed_inequalities(p, 5, "chain")
    assert pr["before_rhs"] == ch["before_rhs"]
    assert pr["before_lhs"] != pytest.approx(ch["before_lhs"], rel=1e-3)
    with pytest.raises(ParameterError):
        bi_printed_inequalities(p, 5, "other")


# --- collapsed finite equation -----------------------------------------------------------------------


def test_finite_equation_at_last_slot_by_hand():
    N, alpha, c = 6, 0.5, 0.125
    got = bi_finite_equation_residual(N, BiModelParams(N, alpha, c))
    assert got == pytest.approx(-3 * c + alpha * (N - 1) ** 3 / (2 * N**3), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(cutoffs, st.floats(0.05, 0.9), st.floats(0.05, 2.0), st.floats(0.1, 1.0))
def test_finite_equation_is_homogeneous(lN, alpha, c, lam):
    l, N = lN
    base = bi_finite_equation_residual(l, BiModelParams(N, alpha, c))
    scaled = bi_finite_equation_residual(l, BiModelParams(N, alpha * lam, c * lam))
    assert scaled == pytest.approx(lam * base, rel=1e-10, abs=1e-14)


def test_finite_equation_bracket_sits_next_to_scan():
    for N in (10, 50, 100):
        p = BiModelParams(N, 0.5, 0.125)
        s = bi_threshold_scan(p)
        br = bi_finite_equation_brackets(p)
        assert br, "equation should change sign somewhere"
        ref = s.l_star if s.l_star is not None else s.flip
        assert min(abs(b[1] - ref) for b in br) <= 1


# --- limit equation -----------------------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-4, 1 - 1e-4), st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_residual_is_affine_in_beta(z, b1, b2, b3):
    r = [bi_asymptotic_residual(z, b) for b in (b1, b2, b3)]
    A, B = bi_asymptotic_parts(z)
    for b, v in zip((b1, b2, b3), r):
        assert v == pytest.approx(b * A + B, abs=1e-13)
    assert bi_asymptotic_residual(z, b1) == pytest.approx(limit_by_hand(z, b1), abs=1e-13)


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5])
def test_value_near_one(beta):
    assert bi_asymptotic_residual(1 - 1e-12, beta) == pytest.approx(3 * beta + 12, abs=1e-9)


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5])
def test_leading_behaviour_near_zero(beta):
    z = 1e-6
    lead = z * (4 * beta * np.log(z) + 5 * beta + 2)
    assert bi_asymptotic_residual(z, beta) < 0
    assert bi_asymptotic_residual(z, beta) == pytest.approx(lead, rel=1e-4)


def test_residual_domain():
    with pytest.raises(DomainError):
        bi_asymptotic_residual(1.0, 1.0)


@pytest.mark.parametrize("beta", list(FROZEN_ROOTS))
def test_roots_against_brentq(beta):
    from scipy.optimize import brentq

    sol = bi_solve_asymptotic(beta)
    assert sol.count == 1 and abs(sol.residuals[0]) < 1e-12
    ref = brentq(lambda z: limit_by_hand(z, beta), 0.01, 0.5, xtol=1e-15)
    assert sol.roots[0] == pytest.approx(ref, abs=1e-12)
    assert sol.roots[0] == pytest.approx(FROZEN_ROOTS[beta], abs=1e-11)


def test_sign_change_for_every_beta_in_range():
    for beta in np.arange(0.5, 1.5001, 0.05):
        assert bi_solve_asymptotic(float(beta)).count >= 1


# --- table ----------------------------------------------------------------------------------------------


def test_table_default_rows():
    rows = table1()
    assert [r.beta for r in rows] == list(TABLE1_BETAS)
    assert [r.z_paper for r in rows] == [0.155, 0.171, 0.186, 0.199, 0.210, 0.220, 0.228, 0.236, 0.243, 0.249, 0.254]
    z = [r.z_computed for r in rows]
    assert all(b - a > 1e-9 for a, b in zip(z, z[1:]))
    for r in rows:
        assert r.deviation == pytest.approx(r.z_computed - r.z_paper)


def test_table_single_custom_row():
    rows = table1([2.0])
    assert len(rows) == 1 and rows[0].z_paper is None and rows[0].deviation is None


def test_table_serialisation():
    rows = table1()
    lines = table1_csv(rows).strip().splitlines()
    assert lines[0] == "beta,z_paper,z_computed,deviation"
    assert len(lines) == 12
    data = json.loads(table1_json(rows))
    assert set(data[0]) >= {"beta", "z_paper", "z_computed", "deviation"}
    assert set(PUBLISHED_TABLE1) == set(TABLE1_BETAS)
