import json
import math

import numpy as np
import pytest

from cvcoherent import gaussian as g
from cvcoherent.conat import ConatChannelSpec
from cvcoherent.protocols import (
    ProtocolOutcome,
    ResourceSpec,
    alternate_coherent_teleport,
    bk_average_fidelity,
    channel_from_epsilon,
    coherent_superdense,
    coherent_teleport,
    compose_superdense_via_teleport,
    compose_teleport_via_superdense,
    default_input,
    default_inputs,
    iterate_composition,
    standard_bk_teleport,
)

from .tables import FIVE_MODE, FOUR_MODE, SIX_MODE, THREE_MODE, row_deviations

GRID = [0, 0.5, 1, 2]
E2 = math.exp(-2)


def mq(rc):
    return ConatChannelSpec("MQ", rc)


def pq(rc):
    return ConatChannelSpec("PQ", rc)


def fig1(r=1.0, rc=1.0, inp=None):
    return coherent_teleport(inp or default_input(), ResourceSpec(r), mq(rc), pq(rc))


def fig2(rc1=1.0, rc2=1.0, inp=None):
    return alternate_coherent_teleport(inp or default_input(), pq(rc1), mq(rc2))


def comp2(e1, e2, e3, inputs=None):
    return compose_superdense_via_teleport(
        inputs or default_inputs(),
        ResourceSpec.from_epsilon(e1),
        channel_from_epsilon("PQ", e2),
        channel_from_epsilon("MQ", e3),
    )


# --- observable tables -------------------------------------------------------


@pytest.mark.parametrize("r,rc", [(1, 1), (0.3, 2), (0, 0)])
def test_five_mode_table(r, rc):
    assert max(row_deviations(fig1(r, rc).circuit, FIVE_MODE).values()) <= 1e-12


def test_three_mode_table():
    assert max(row_deviations(fig2(0.4, 1.1).circuit, THREE_MODE).values()) <= 1e-12


def test_four_mode_table():
    out = coherent_superdense(default_inputs(), ResourceSpec(0.7))
    assert max(row_deviations(out.circuit, FOUR_MODE).values()) <= 1e-12


def test_six_mode_table():
    assert max(row_deviations(comp2(0.1, 0.2, 0.3).circuit, SIX_MODE).values()) <= 1e-12


def test_table_detects_wrong_wiring():
    # swapping Bob's controls must break the five-mode table
    circ = fig1().circuit
    bad = circ.gate(g.controlled_x_inv(), [3, 4]).gate(g.controlled_x(), [2, 4])
    assert max(row_deviations(bad, FIVE_MODE).values()) > 0.5


# --- coherent teleportation ----------------------------------------------------


def test_fig1_reference_value():
    out = fig1()
    expected = 2 / (2 + E2 + E2 / 2)
    assert out.fidelity == pytest.approx(expected, abs=1e-12)
    assert out.fidelity == pytest.approx(out.noise_ledger["fidelity_bound"], abs=1e-12)
    assert out.mode("teleported") == 4


@pytest.mark.parametrize("r", GRID)
@pytest.mark.parametrize("rc", GRID)
def test_fig1_bound_tight(r, rc):
    out = fig1(r, rc)
    e1, e = math.exp(-2 * r), math.exp(-2 * rc) / 2
    assert out.fidelity == pytest.approx(2 / math.sqrt((2 + e1 + e) * (2 + e1 + e)), abs=1e-9)


def test_fig1_asymmetric_channels():
    out = coherent_teleport(default_input(), ResourceSpec(0.6), mq(0.2), pq(1.4))
    e1, e2, e3 = math.exp(-1.2), math.exp(-0.4) / 2, math.exp(-2.8) / 2
    assert out.fidelity == pytest.approx(2 / math.sqrt((2 + e1 + e2) * (2 + e1 + e3)), abs=1e-12)
    # x error carries the PQ noise, p error the MQ noise
    assert out.noise_ledger["var_x_error"] == pytest.approx(e1 + e3, abs=1e-12)
    assert out.noise_ledger["var_p_error"] == pytest.approx(e1 + e2, abs=1e-12)


def test_fig1_ideal_limit():
    out = fig1(20, 20)
    assert out.fidelity == pytest.approx(1, abs=1e-9)
    tel = g.select_modes(out.final_state, [4])
    np.testing.assert_allclose(tel.mean, [3, -2], atol=1e-9)
    np.testing.assert_allclose(tel.cov, 0.5 * np.eye(2), atol=1e-9)


def test_fig1_classical_boundary():
    out = coherent_teleport(
        default_input(), ResourceSpec(0), ConatChannelSpec.from_epsilon("MQ", 1), ConatChannelSpec.from_epsilon("PQ", 1)
    )
    assert out.fidelity == pytest.approx(0.5, abs=1e-12)


def test_fig1_correlations():
    e1, e = E2, E2 / 2
    out = fig1()
    rep13 = out.correlation_reports[0]
    rep24 = out.correlation_reports[1]
    assert rep13.epsilon <= e1 + 2 * e + 1e-12
    assert rep24.epsilon <= e1 + e + 1e-12
    assert rep13.entangled and rep24.entangled


@pytest.mark.parametrize("factory", ["fig1", "fig2", "comp1"])
def test_teleported_mean_preserved(factory):
    inp = g.new_coherent(-4.5, 7.25)
    for r in GRID + [20]:
        if factory == "fig1":
            out = fig1(r, r, inp)
        elif factory == "fig2":
            out = fig2(r, r, inp)
        else:
            out = compose_teleport_via_superdense(inp, ResourceSpec(r), ResourceSpec(r))
        k = out.mode("teleported")
        np.testing.assert_allclose(out.final_state.mean[2 * k : 2 * k + 2], [-4.5, 7.25], atol=1e-12)


def test_fidelity_monotone_in_each_epsilon():
    base = dict(r=0.8, rm=0.8, rp=0.8)
    f0 = coherent_teleport(default_input(), ResourceSpec(base["r"]), mq(base["rm"]), pq(base["rp"])).fidelity
    for key in base:
        worse = dict(base)
        worse[key] = 0.3
        f = coherent_teleport(default_input(), ResourceSpec(worse["r"]), mq(worse["rm"]), pq(worse["rp"])).fidelity
        assert f < f0


def test_fig1_input_validation():
    with pytest.raises(ValueError):
        coherent_teleport(default_inputs(), ResourceSpec(1), mq(1), pq(1))
    with pytest.raises(ValueError):
        coherent_teleport(default_input(), ResourceSpec(1), pq(1), pq(1))


def test_fig1_non_coherent_input():
    sq = g.new_squeezed(0.5, "x", "in")
    out = coherent_teleport(sq, ResourceSpec(1), mq(1), pq(1))
    # error-operator variances do not depend on the input state
    assert out.fidelity == pytest.approx(fig1().fidelity, abs=1e-12)


# --- alternate teleportation ---------------------------------------------------


@pytest.mark.parametrize("rc", GRID)
def test_fig2_measured_fidelity(rc):
    out = fig2(rc, rc)
    e = math.exp(-2 * rc) / 2
    # canonical channels give independent x and p errors of size eps each
    assert out.fidelity == pytest.approx(2 / (2 + e), abs=1e-12)
    assert out.fidelity >= out.noise_ledger["fidelity_bound"] - 1e-12


def test_fig2_ideal_limit_and_correlation():
    assert fig2(20, 20).fidelity == pytest.approx(1, abs=1e-12)
    out = fig2(1, 1)
    rep = out.correlation_reports[0]
    assert rep.epsilon <= E2 + 1e-12
    assert rep.orientation == "momentum-correlated"


# --- superdense --------------------------------------------------------------


@pytest.mark.parametrize("r", [0.25, 1, 2])
def test_superdense_reports(r):
    out = coherent_superdense(default_inputs(), ResourceSpec(r))
    for rep in out.conat_reports:
        assert rep.conforming
        assert rep.achieved_epsilon == pytest.approx(math.exp(-2 * r), abs=1e-12)
    assert [rep.kind for rep in out.conat_reports] == ["MQ", "PQ"]


def test_superdense_boundaries():
    out = coherent_superdense(default_inputs(), ResourceSpec(0))
    for rep in out.conat_reports:
        assert rep.achieved_epsilon == pytest.approx(1.0, abs=1e-12)
        assert not rep.conforming
    out = coherent_superdense(default_inputs(), ResourceSpec(20))
    assert max(rep.achieved_epsilon for rep in out.conat_reports) < 1e-15
    with pytest.raises(ValueError):
        coherent_superdense(default_input(), ResourceSpec(1))


# --- compositions ------------------------------------------------------------


def test_composition1_values():
    out = compose_teleport_via_superdense(default_input(), ResourceSpec(1), ResourceSpec(1))
    assert out.fidelity == pytest.approx(2 / (2 + 2 * E2), abs=1e-12)
    assert out.fidelity == pytest.approx(0.8808, abs=1e-4)
    r13, r24 = out.correlation_reports
    assert r13.orientation == "momentum-correlated" and r13.epsilon == pytest.approx(2 * E2, abs=1e-12)
    assert r24.orientation == "position-correlated" and r24.epsilon == pytest.approx(2 * E2, abs=1e-12)


def test_composition1_limits():
    out = compose_teleport_via_superdense(default_input(), ResourceSpec(0), ResourceSpec(0))
    assert out.fidelity == pytest.approx(0.5, abs=1e-12)
    out = compose_teleport_via_superdense(default_input(), ResourceSpec(0.7), ResourceSpec(20))
    assert out.fidelity == pytest.approx(2 / (2 + math.exp(-1.4)), abs=1e-12)


def test_composition2_derived_epsilons():
    # hand evaluation of the six-mode table with canonical channels:
    # PQ (2,6): x6 - x2 = (x_A - x_B) + x_dX  -> e1 + e2
    # MQ (1,4): p4 - p1 = (p_A + p_B) + p_dP  -> e1 + e3; x1 - x_A1 + x4 = x_dX -> e2
    for e1, e2, e3 in [(0.1, 0.1, 0.1), (0.5, 0.4, 0.2), (0.05, 0.3, 0.01)]:
        out = comp2(e1, e2, e3)
        mq_rep, pq_rep = out.conat_reports
        assert mq_rep.achieved_epsilon == pytest.approx(max(e1 + e3, e2), abs=1e-12)
        assert pq_rep.achieved_epsilon == pytest.approx(e1 + e2, abs=1e-12)
        assert mq_rep.copies_exactly and pq_rep.copies_exactly
        assert out.correlation_reports[0].epsilon <= e2 + e3 + 1e-12


def test_composition2_pq_conformance_flip():
    assert comp2(0.5, 0.4, 0.2).conat_reports[1].conforming
    assert not comp2(0.6, 0.4, 0.2).conat_reports[1].conforming


def test_composition2_ideal():
    out = comp2(0, 0, 0)
    assert all(rep.achieved_epsilon < 1e-15 for rep in out.conat_reports)


# --- measurement baseline ------------------------------------------------------


def test_bk_single_run_deterministic():
    a = standard_bk_teleport(default_input(), ResourceSpec(1), seed=7)
    b = standard_bk_teleport(default_input(), ResourceSpec(1), seed=7)
    assert a.fidelity == b.fidelity
    assert a.measurements == b.measurements
    assert a.final_state.n_modes == 1


def test_bk_conditional_covariance():
    # Var(x_B | x_A1 - x_A) = c - s^2 / (c + 1/2) = 1/2 with c^2 - s^2 = 1/4: each run leaves
    # Bob with a coherent state whose mean scatters around the input by e^{-2r} per quadrature
    out = standard_bk_teleport(default_input(), ResourceSpec(1.2), seed=3)
    np.testing.assert_allclose(out.final_state.cov, 0.5 * np.eye(2), atol=1e-12)
    assert out.final_state.is_pure()


@pytest.mark.parametrize("r", [0, 0.5, 1, 2])
def test_bk_average_matches_closed_form(r):
    mean, se = bk_average_fidelity(default_input(), ResourceSpec(r), 100_000, seed=1)
    assert abs(mean - 2 / (2 + 2 * math.exp(-2 * r))) < 5 * se


def test_bk_sequential_runs_agree_with_vectorized():
    rng = np.random.default_rng(99)
    fids = [standard_bk_teleport(default_input(), ResourceSpec(0.5), rng).fidelity for _ in range(3000)]
    se = np.std(fids, ddof=1) / np.sqrt(len(fids))
    assert abs(np.mean(fids) - 2 / (2 + 2 * math.exp(-1))) < 5 * se


def test_bk_ideal_limit():
    mean, _ = bk_average_fidelity(default_input(), ResourceSpec(20), 1000, seed=0)
    assert mean == pytest.approx(1, abs=1e-9)


# --- outcome record ----------------------------------------------------------


def test_outcome_json_roundtrip():
    d = fig1().to_dict()
    text = json.dumps(d)
    assert json.loads(text)["role_map"]["teleported"] == 4


def test_outcome_invariants():
    st = g.new_vacuum(2)
    with pytest.raises(ValueError):
        ProtocolOutcome("x", st, {"mode1": 0}, {})
    with pytest.raises(ValueError):
        ProtocolOutcome("x", st, {"mode1": 0, "mode2": 1}, {"eps1": -0.1})


def test_resource_spec():
    assert ResourceSpec(1).implied_epsilon == pytest.approx(E2)
    assert ResourceSpec.from_epsilon(0.3).implied_epsilon == pytest.approx(0.3, rel=1e-12)
    assert ResourceSpec.from_epsilon(0).r == 20
    with pytest.raises(ValueError):
        ResourceSpec(-1)


# --- degradation -------------------------------------------------------------


def recursion_oracle(e1, e2, e3, depth):
    """Per-level (e1, e2, e3) from hand-derived generated epsilons of one composition step."""
    out = []
    for _ in range(depth):
        out.append((e1, e2, e3))
        e1, e2, e3 = max(e2, e3), e1 + e2, max(e1 + e3, e2)
    return out


@pytest.mark.parametrize("start", [(0.1, 0.1, 0.1), (0.15, 0.15, 0.15), (0.02, 0.2, 0.05)])
def test_iterate_matches_oracle(start):
    trace = iterate_composition(start, 8)
    oracle = recursion_oracle(*start, 8)
    for rec, (e1, e2, e3) in zip(trace.records, oracle):
        assert (rec.eps1, rec.eps2, rec.eps3) == pytest.approx((e1, e2, e3), abs=1e-12)
        assert rec.sum_mq == pytest.approx(e1 + e2 + e3, abs=1e-12)
    depth = next((k for k, (a, b, c) in enumerate(oracle) if not (a + b + c < 1 and a + b < 1)), len(oracle))
    assert trace.max_depth == depth


def test_iterate_zero_epsilon():
    trace = iterate_composition((0, 0, 0), 6)
    assert trace.max_depth == 6
    assert all(r.sum_mq < 1e-15 for r in trace.records)


def test_iterate_initially_violating():
    assert iterate_composition((0.5, 0.3, 0.3), 3).max_depth == 0


def test_iterate_measured_fields():
    rec = iterate_composition((0.1, 0.1, 0.1), 1).records[0]
    assert rec.measured_fidelity == pytest.approx(rec.fidelity_bound, abs=1e-12)
    assert rec.measured_pq == pytest.approx(0.2, abs=1e-12)
    with pytest.raises(ValueError):
        iterate_composition((0.1, 0.1, 0.1), 0)
