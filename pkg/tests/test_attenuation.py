import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import Oracle
from proxybias.attenuation import (
    ChainDirection,
    Generator,
    HuntConfig,
    ObservedData,
    chain_direction,
    diagnose_assumptions,
    hunt_counterexamples,
    testable_implications as implications_of,
    verdict_from_report,
    verify_att_attenuation,
    verify_theorem1,
)
from proxybias.estimands import DomainError, Scale, compute_estimands
from proxybias.families import KernelMode, random_assumption_satisfying_spec
from proxybias.io import load_spec
from proxybias.model import Direction, ModelSpec
from strategies import specs

SLACK = 1e-12
MARGIN_TOL = 1e-12
DATA = Path(__file__).parent / "data"

EX1 = [[0.4, 0.3, 0.30], [0.5, 0.5, 0.25], [0.1, 0.2, 0.45]]


def satisfying():
    return load_spec(DATA / "satisfying.json")


def s4_violation():
    return load_spec(DATA / "s4_violation.json")


def oriented_spec(seed, k_u, k_c, e_sign, y_sign, dep_sign):
    """Assumption-satisfying model with the requested monotone directions.

    Reversing U levels flips e and m together; reversing C levels flips the
    dependence sign; reversing e or m alone flips only that direction.
    """
    spec = random_assumption_satisfying_spec(k_u, k_c, seed, KernelMode.EXP_FAMILY)
    e = spec.propensity if e_sign > 0 else spec.propensity[::-1]
    m1 = spec.m1 if y_sign > 0 else spec.m1[::-1]
    m0 = spec.m0 if y_sign > 0 else spec.m0[::-1]
    kern = spec.c_given_u if dep_sign > 0 else spec.c_given_u[::-1, :]
    return spec.replace(propensity=e, m1=m1, m0=m0, c_given_u=kern)


class TestVerifyAttenuation:
    def test_satisfying_fixture_chain_holds(self):
        v = verify_theorem1(satisfying())
        assert v.chain_direction is ChainDirection.AS_STATED
        assert v.chain_holds and v.sandwich_holds
        assert all(v.lemma4_holds.values()) and all(v.lemma5_holds.values())

    def test_chain_against_oracle(self):
        spec = satisfying()
        orc = Oracle.from_spec(spec)
        assert orc.mu_unadj(1) >= orc.mu_adj(1) >= orc.mu_true(1)
        assert orc.mu_unadj(0) <= orc.mu_adj(0) <= orc.mu_true(0)

    def test_s4_discrete_is_inapplicable_and_fails(self):
        v = verify_theorem1(s4_violation())
        assert v.chain_direction is ChainDirection.INAPPLICABLE
        assert not v.chain_holds
        assert not v.sandwich_holds
        assert v.effects.effect_adj > max(v.effects.effect_unadj, v.effects.effect_true)

    def test_identity_kernel(self):
        spec = load_spec(DATA / "identity.json")
        v = verify_theorem1(spec)
        assert v.sandwich_holds and v.chain_holds
        assert v.effects.effect_adj == pytest.approx(v.effects.effect_true, abs=MARGIN_TOL)
        assert v.margins["adj_vs_true_arm1"] == pytest.approx(0.0, abs=MARGIN_TOL)
        assert v.margins["adj_vs_true_arm0"] == pytest.approx(0.0, abs=MARGIN_TOL)

    def test_opposite_directions_flip(self):
        spec = oriented_spec(3, 3, 4, e_sign=-1, y_sign=1, dep_sign=1)
        v = verify_theorem1(spec)
        assert v.chain_direction is ChainDirection.FLIPPED
        assert v.chain_holds

    def test_both_decreasing_as_stated(self):
        spec = oriented_spec(5, 4, 3, e_sign=-1, y_sign=-1, dep_sign=1)
        assert chain_direction(spec) is ChainDirection.AS_STATED
        assert verify_theorem1(spec).chain_holds

    def test_constant_arm_with_nonmonotone_arm_is_inapplicable(self):
        spec = satisfying().replace(m1=[1.0, 1.0, 1.0], m0=[0.0, 1.0, 0.5])
        assert verify_theorem1(spec).chain_direction is ChainDirection.INAPPLICABLE

    def test_nonmonotone_propensity_inapplicable(self):
        spec = satisfying().replace(propensity=[0.2, 0.8, 0.3])
        assert verify_theorem1(spec).chain_direction is ChainDirection.INAPPLICABLE

    def test_domain_error(self):
        spec = satisfying().replace(m1=[1.0, 2.0, 3.0])
        with pytest.raises(DomainError):
            verify_theorem1(spec, Scale.ODDS_RATIO)

    def test_other_scales(self):
        for scale in (Scale.RATIO, Scale.ODDS_RATIO):
            v = verify_theorem1(satisfying(), scale)
            assert v.chain_holds and v.sandwich_holds

    def test_margins_recomputed_from_report(self):
        spec = satisfying()
        v = verify_theorem1(spec)
        r = compute_estimands(spec)
        assert v.margins["unadj_vs_adj_arm1"] == pytest.approx(r.mu_unadj[1] - r.mu_adj[1], abs=MARGIN_TOL)
        assert v.margins["adj_vs_true_arm1"] == pytest.approx(r.mu_adj[1] - r.mu_true[1], abs=MARGIN_TOL)
        assert v.margins["unadj_vs_adj_arm0"] == pytest.approx(r.mu_adj[0] - r.mu_unadj[0], abs=MARGIN_TOL)
        assert v.margins["adj_vs_true_arm0"] == pytest.approx(r.mu_true[0] - r.mu_adj[0], abs=MARGIN_TOL)

    def test_verdict_serializes(self):
        d = json.loads(json.dumps(verify_theorem1(satisfying()).to_dict()))
        assert d["chain_direction"] == "as_stated"
        assert d["lemma4_holds"] == {"1": True, "0": True}


class TestAtt:
    def test_satisfying(self):
        v = verify_att_attenuation(satisfying())
        assert v.target == "att"
        assert v.chain_holds and v.sandwich_holds

    def test_constant_propensity(self):
        v = verify_att_attenuation(satisfying().replace(propensity=[0.4] * 3))
        assert v.chain_holds
        assert v.margins["adj_vs_true_arm0"] == pytest.approx(0.0, abs=MARGIN_TOL)
        assert v.margins["unadj_vs_adj_arm0"] == pytest.approx(0.0, abs=MARGIN_TOL)

    def test_identity_kernel(self):
        v = verify_att_attenuation(load_spec(DATA / "identity.json"))
        assert v.margins["adj_vs_true_arm0"] == pytest.approx(0.0, abs=MARGIN_TOL)
        assert v.margins["unadj_vs_adj_arm0"] > 0
        assert v.chain_holds

    def test_against_oracle(self):
        spec = satisfying()
        _, y0_unadj, y0_adj, y0_true = Oracle.from_spec(spec).att_terms()
        assert y0_unadj <= y0_adj <= y0_true


class TestImplications:
    def test_satisfying_spec(self):
        rep = implications_of(satisfying())
        assert rep.propensity_monotone.allows(1)
        assert all(c.allows(1) for c in rep.outcome_monotone.values())
        assert rep.ordering_mu1 and rep.ordering_mu0 and rep.consistent

    def test_nonmonotone_observed_propensity(self):
        obs = ObservedData([0.5, 0.3, 0.6], [0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.3, 0.3, 0.4])
        rep = implications_of(obs)
        assert rep.propensity_monotone.direction is Direction.NON_MONOTONE
        assert not rep.consistent

    def test_constant_observables(self):
        obs = ObservedData([0.4] * 3, [1.0] * 3, [2.0] * 3, [0.2, 0.3, 0.5])
        rep = implications_of(obs)
        assert rep.propensity_monotone.direction is Direction.CONSTANT
        assert rep.ordering_mu1 and rep.ordering_mu0 and rep.consistent

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            ObservedData([0.4, 0.5], [1.0] * 3, [2.0] * 3, [0.2, 0.3, 0.5])

    def test_f_c_must_be_pmf(self):
        with pytest.raises(ValueError):
            ObservedData([0.4] * 3, [1.0] * 3, [2.0] * 3, [0.2, 0.3, 0.6])

    def test_observed_means_match_estimands(self):
        spec = satisfying()
        unadj, adj = ObservedData.from_spec(spec).means()
        rep = compute_estimands(spec)
        assert unadj == pytest.approx(rep.mu_unadj, abs=1e-12)
        assert adj == pytest.approx(rep.mu_adj, abs=1e-12)

    def test_flipped_convention_consistent(self):
        spec = oriented_spec(11, 3, 3, e_sign=-1, y_sign=1, dep_sign=1)
        rep = implications_of(spec)
        assert rep.consistent
        assert rep.convention == {"propensity": -1, "outcome": 1}
        # opposite directions reverse both positive-convention orderings
        assert not rep.ordering_mu1 and not rep.ordering_mu0


class TestDiagnosis:
    def test_s4_outcome_directions(self):
        assert "2(i)" in diagnose_assumptions(s4_violation())

    def test_nonmonotone_propensity(self):
        spec = satisfying().replace(propensity=[0.2, 0.8, 0.3])
        assert diagnose_assumptions(spec) == ["2(ii)"]

    def test_reverse_prd_failure(self):
        spec = ModelSpec([0.2, 0.5, 0.3], EX1, [0.2, 0.5, 0.8], [1, 2, 3], [0, 1, 2], 0.01)
        assert "4(i)" in diagnose_assumptions(spec)

    def test_satisfying_clean(self):
        assert diagnose_assumptions(satisfying()) == []


class TestHunt:
    def test_constrained_search_empty(self):
        assert hunt_counterexamples(HuntConfig(generator="exp-family"), 300, 0) == []

    def test_single_trial_constrained(self):
        assert hunt_counterexamples(HuntConfig(generator="rejection-mlr"), 1, 5) == []

    def test_unconstrained_finds_diagnosed_hits(self):
        hits = hunt_counterexamples(HuntConfig(), 400, 1)
        assert hits
        assert all(h.failed_assumptions for h in hits)

    def test_hits_reverify_from_serialization(self):
        for hit in hunt_counterexamples(HuntConfig(), 200, 2):
            payload = json.loads(json.dumps(hit.to_dict()))
            spec = ModelSpec.from_dict(payload["spec"])
            assert not verify_theorem1(spec).sandwich_holds
            assert payload["failed_assumptions"] == list(hit.failed_assumptions)

    def test_deterministic_and_order_free(self):
        cfg = HuntConfig()
        a = hunt_counterexamples(cfg, 150, 9)
        b = hunt_counterexamples(cfg, 150, 9, workers=2)
        assert [h.to_dict() for h in a] == [h.to_dict() for h in b]

    def test_prefix_stable(self):
        # trial i depends only on (seed, i)
        cfg = HuntConfig()
        short = hunt_counterexamples(cfg, 100, 4)
        long = hunt_counterexamples(cfg, 200, 4)
        assert [h.trial for h in long if h.trial < 100] == [h.trial for h in short]

    def test_findings_directory(self, tmp_path):
        hits = hunt_counterexamples(HuntConfig(), 100, 3, findings_dir=tmp_path)
        files = sorted(tmp_path.glob("*.json"))
        assert len(files) == len(hits)
        for f in files:
            assert not verify_theorem1(load_spec(f)).sandwich_holds

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            hunt_counterexamples(HuntConfig(), 0, 0)

    def test_generator_names(self):
        assert HuntConfig(generator="unconstrained").generator is Generator.UNCONSTRAINED
        with pytest.raises(ValueError):
            HuntConfig(k_min=1)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(specs())
    def test_chain_implies_sandwich(self, spec):
        v = verify_theorem1(spec)
        assert not v.chain_holds or v.sandwich_holds

    @settings(max_examples=200, deadline=None)
    @given(specs())
    def test_margins_match_report(self, spec):
        v = verify_theorem1(spec)
        r = compute_estimands(spec)
        again = verdict_from_report(r, v.chain_direction)
        for k, m in v.margins.items():
            assert m == pytest.approx(again.margins[k], abs=MARGIN_TOL)
        eff = v.effects
        lo, hi = sorted((eff.effect_unadj, eff.effect_true))
        assert v.margins["sandwich"] == pytest.approx(
            min(eff.effect_adj - lo, hi - eff.effect_adj), abs=MARGIN_TOL
        )

    @settings(max_examples=200, deadline=None)
    @given(specs(), st.floats(0.1, 10.0), st.floats(-5.0, 5.0))
    def test_affine_invariance(self, spec, alpha, beta):
        v = verify_theorem1(spec)
        w = verify_theorem1(spec.replace(m1=alpha * spec.m1 + beta, m0=alpha * spec.m0 + beta))
        assert w.chain_direction is v.chain_direction
        for k, m in v.margins.items():
            scaled = alpha * m
            assert w.margins[k] == pytest.approx(scaled, abs=1e-9)
            if abs(scaled) > 1e-9:
                assert (w.margins[k] >= -SLACK) == (m >= -SLACK)
        if abs(v.margins["sandwich"]) > 1e-9:
            assert w.sandwich_holds == v.sandwich_holds

    @settings(max_examples=200, deadline=None)
    @given(specs())
    def test_label_swap(self, spec):
        v = verify_theorem1(spec)
        swapped = spec.replace(propensity=1 - spec.propensity, m1=spec.m0, m0=spec.m1)
        w = verify_theorem1(swapped)
        assert w.effects.effect_unadj == pytest.approx(-v.effects.effect_unadj, abs=1e-12)
        assert w.effects.effect_adj == pytest.approx(-v.effects.effect_adj, abs=1e-12)
        assert w.effects.effect_true == pytest.approx(-v.effects.effect_true, abs=1e-12)
        if abs(v.margins["sandwich"]) > 1e-9:
            assert w.sandwich_holds == v.sandwich_holds

    @settings(max_examples=300, deadline=None)
    @given(
        st.integers(0, 2**32 - 1),
        st.integers(2, 5),
        st.integers(2, 5),
        st.sampled_from([1, -1]),
        st.sampled_from([1, -1]),
        st.sampled_from([1, -1]),
    )
    def test_any_coherent_sign_combination(self, seed, k_u, k_c, e_sign, y_sign, dep_sign):
        spec = oriented_spec(seed, k_u, k_c, e_sign, y_sign, dep_sign)
        assert diagnose_assumptions(spec) == []
        v = verify_theorem1(spec)
        assert v.chain_direction is not ChainDirection.INAPPLICABLE
        assert v.chain_holds and v.sandwich_holds
        assert verify_att_attenuation(spec).chain_holds
        assert implications_of(spec).consistent

    @settings(max_examples=200, deadline=None)
    @given(specs())
    def test_certified_specs_never_break(self, spec):
        if not diagnose_assumptions(spec):
            assert verify_theorem1(spec).chain_holds
            assert verify_att_attenuation(spec).chain_holds
