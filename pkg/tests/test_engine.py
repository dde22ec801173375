"""Flow engine: right-hand sides, substeps, schedules, and full evolution."""

import numpy as np
import pytest

from itflow.config import ExperimentSpec
from itflow.engine import (
    AdiabaticState,
    FlowEngine,
    GeneratorVariant,
    WidthSchedule,
    evolve,
    evolve_iter,
    gauge_term,
    rhs_naive,
    rhs_per_term,
    rk2_substep,
    sweep_step,
)
from itflow.errors import IntegrationDivergedError, ResourceLimitError
from itflow.models import (
    LocalTerm,
    ModelSpec,
    build_initial_adiabatic,
    build_xxz,
    initial_state,
    total_operator,
)
from itflow.pauli import (
    PauliString,
    PauliSum,
    hermiticity_residual,
    modified_anticommutator,
    norm_inf,
    sum_combine,
)

from oracles import dense_of_sum, heun_dense, ite_state_dense, pauli_coefficients


def spec_for(**overrides):
    base = {
        "model.L": 4,
        "generator.variant": "per_term",
        "integrator.epsilon": 0.05,
        "integrator.tau_max": 0.5,
        "sampling.stride": 1,
    }
    base.update(overrides)
    return ExperimentSpec.from_mapping(base)


class TestVariantAndSchedule:
    def test_variant_validation(self):
        with pytest.raises(ValueError):
            GeneratorVariant("bogus")
        with pytest.raises(ValueError):
            GeneratorVariant("naive", u1=1.0)
        v = GeneratorVariant("gauged", u1=2.0, u2=0.5)
        assert (v.u1, v.u2) == (2.0, 0.5)

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            WidthSchedule(((0.5, 3),))  # must start at 0
        with pytest.raises(ValueError):
            WidthSchedule(((0.0, 4),))  # even width
        with pytest.raises(ValueError):
            WidthSchedule(((0.0, 5), (1.0, 3)))  # shrinking
        with pytest.raises(ValueError):
            WidthSchedule(((0.0, None), (1.0, 3)))  # bounded after unbounded
        sched = WidthSchedule(((0.0, 3), (0.9, 5), (1.4, 7)))
        assert sched.active_width(0.0) == 3
        assert sched.active_width(0.9) == 5
        assert sched.active_width(1.39) == 5
        assert sched.active_width(5.0) == 7


class TestRhsNaive:
    def test_zero_fixed_point(self):
        h = total_operator(build_xxz(ModelSpec(2, 2.0)))
        assert len(rhs_naive(PauliSum.zero(2), h)) == 0

    def test_commuting_algebra(self):
        # (I - Z) Z + Z (I - Z) = 2Z - 2I
        ht = PauliSum.from_label_terms({"I": 1.0, "Z": -1.0})
        h = PauliSum.from_label_terms({"Z": 1.0})
        out = rhs_naive(ht, h)
        assert out.coefficient(PauliString.from_label("Z")) == pytest.approx(2.0)
        assert out.coefficient(PauliString.from_label("I")) == pytest.approx(-2.0)
        assert len(out) == 2

    def test_l2_matches_dense_projection(self):
        ht = total_operator(build_initial_adiabatic(2))
        h = total_operator(build_xxz(ModelSpec(2, 2.0)))
        out = rhs_naive(ht, h)
        dref = dense_of_sum(ht) @ dense_of_sum(h) + dense_of_sum(h) @ dense_of_sum(ht)
        ref_coeffs = pauli_coefficients(dref, 2)
        for label, c in ref_coeffs.items():
            assert out.coefficient(PauliString.from_label(label)) == pytest.approx(c, abs=1e-13)
        assert len(out) == len(ref_coeffs)


class TestRhsPerTerm:
    def test_first_site_against_dense_oracle(self):
        model = build_xxz(ModelSpec(2, 2.0))
        init = build_initial_adiabatic(2)
        out = rhs_per_term(init[0], model, None)
        expected = {"IX": 0.25, "XX": 0.25, "YY": 0.25, "ZZ": 0.5}
        for lab, c in expected.items():
            assert out.coefficient(PauliString.from_label(lab)) == pytest.approx(c)
        dref = dense_of_sum(init[0].op) @ dense_of_sum(model[0].op)
        dref = dref + dense_of_sum(model[0].op) @ dense_of_sum(init[0].op)
        assert np.max(np.abs(dense_of_sum(out) - dref)) < 1e-13

    def test_disjoint_block_vanishes(self):
        model = build_xxz(ModelSpec(6, 2.0))
        init = build_initial_adiabatic(6)
        # width 1: no bond fits in any single-site block
        for t in init:
            assert len(rhs_per_term(t, model, 1)) == 0

    def test_overlap_retention_keeps_more(self):
        model = build_xxz(ModelSpec(4, 2.0))
        term = build_initial_adiabatic(4)[1]
        by_containment = rhs_per_term(term, model, 3, retention="containment")
        by_overlap = rhs_per_term(term, model, 3, retention="overlap")
        # block around site 1 with w=3 is [0,2]: bonds (0,1),(1,2) contained,
        # bond (2,3) only overlaps
        assert len(by_overlap) >= len(by_containment)


class TestGaugeTerm:
    def test_zero_coefficients(self):
        op = PauliSum.from_label_terms({"X": 0.5, "I": 0.5})
        assert len(gauge_term(op, 0.0, 0.0)) == 0

    def test_projector_algebra(self):
        # P^2 = P so f(P) = (u1 - u2) P
        p = PauliSum.from_label_terms({"X": 0.5, "I": 0.5})
        out = gauge_term(p, 2.0, 0.5)
        expect = p.scaled(1.5)
        diff = sum_combine(out, 1.0, expect, -1.0, tol=0.0)
        assert norm_inf(diff) < 1e-14

    def test_z_squared_is_identity(self):
        z = PauliSum.from_label_terms({"Z": 1.0})
        out = gauge_term(z, 2.0, 0.5)
        assert out.coefficient(PauliString.from_label("Z")) == pytest.approx(2.0)
        assert out.coefficient(PauliString.from_label("I")) == pytest.approx(-0.5)


class TestRk2Substep:
    def test_zero_rhs(self):
        y = PauliSum.from_label_terms({"XZ": 1.25})
        out = rk2_substep(y, lambda u: PauliSum.zero(2), 0.1)
        assert out == y

    def test_linear_ode_exponential(self):
        # F(y) = c*y reproduces exp(c*eps) through second order
        c = -1.7
        y = PauliSum.from_label_terms({"XI": 1.0, "ZZ": 0.5})
        for eps in (0.1, 0.05):
            out = rk2_substep(y, lambda u: u.scaled(c), eps)
            exact = np.exp(c * eps)
            got = out.coefficient(PauliString.from_label("XI"))
            assert abs(got - exact) < abs(c * eps) ** 3

    def test_single_step_vs_fine_reference(self):
        # one Heun step of the whole-operator generator vs a dense
        # fine-step reference of the same ODE
        h = total_operator(build_xxz(ModelSpec(2, 2.0)))
        y0 = total_operator(build_initial_adiabatic(2))
        hd = dense_of_sum(h)
        out = rk2_substep(y0, lambda u: rhs_naive(u, h), 0.05)
        ref = heun_dense(dense_of_sum(y0), lambda m: m @ hd + hd @ m, 1e-4, 500)
        ref_coeffs = pauli_coefficients(ref, 2)
        worst = 0.0
        for label, c in ref_coeffs.items():
            got = out.coefficient(PauliString.from_label(label))
            worst = max(worst, abs(got - c))
        assert worst < 1e-4

    def test_validates_step(self):
        y = PauliSum.from_label_terms({"X": 1.0})
        with pytest.raises(ValueError):
            rk2_substep(y, lambda u: u, 0.0)


class TestSweepStep:
    def test_w1_freezes_everything_but_tau(self):
        spec = spec_for(**{"truncation.schedule": [[0.0, 1]]})
        snaps = evolve(spec)
        assert snaps[-1][0] == pytest.approx(0.5)
        assert snaps[0][1].total() == snaps[-1][1].total()

    def test_naive_split_step_vs_fine_reference(self):
        model = build_xxz(ModelSpec(2, 2.0))
        init = build_initial_adiabatic(2)
        state = AdiabaticState(
            tau=0.0,
            terms=init,
            variant=GeneratorVariant("naive"),
            active_width=None,
            merged=False,
            max_support_width=1,
        )
        out = sweep_step(state, model, 0.05)
        assert out.tau == pytest.approx(0.05)
        hd = dense_of_sum(total_operator(model))
        ref = heun_dense(
            dense_of_sum(total_operator(init)), lambda m: m @ hd + hd @ m, 1e-4, 500
        )
        ref_coeffs = pauli_coefficients(ref, 2)
        total = out.total()
        worst = max(
            abs(total.coefficient(PauliString.from_label(lab)) - c)
            for lab, c in ref_coeffs.items()
        )
        assert worst < 1e-4

    def test_kernel_path_matches_paulisum_path(self):
        # six full steps through the jit kernels vs the same splitting
        # composed from the public PauliSum operations
        model = build_xxz(ModelSpec(3, 2.0))
        init = build_initial_adiabatic(3)
        eps = 0.05
        eng = FlowEngine(3, model, init, GeneratorVariant("per_term"), merge_coupled=False)
        api = [t.op for t in init]
        for _ in range(6):
            eng.step(eps)
            for alpha in model:
                for b in range(len(api)):
                    api[b] = rk2_substep(
                        api[b], lambda u: modified_anticommutator(u, alpha.op), eps
                    )
        for b, t in enumerate(eng.local_terms()):
            diff = sum_combine(t.op, 1.0, api[b], -1.0, tol=0.0)
            assert norm_inf(diff) < 1e-12


class TestEvolve:
    def test_snapshot_grid_and_stride(self):
        spec = spec_for(**{"integrator.tau_max": 0.5, "sampling.stride": 3})
        snaps = evolve(spec)
        taus = [t for t, _ in snaps]
        assert taus[0] == 0.0
        assert taus[-1] == pytest.approx(0.5)  # final step always sampled
        assert taus[1] == pytest.approx(0.15)

    def test_hermiticity_of_snapshots(self):
        spec = spec_for(**{"integrator.tau_max": 0.4})
        for _, state in evolve(spec):
            assert hermiticity_residual(state.total()) < 1e-10

    def test_symmetry_conservation(self):
        from itflow.diagnostics import symmetry_residual

        spec = spec_for(**{"integrator.tau_max": 0.4})
        for _, state in evolve(spec):
            assert symmetry_residual(state.total()) < 1e-10

    def test_rk2_convergence_ratio_monolithic(self):
        # Heun on the un-split whole-operator ODE is second order: the
        # solution difference between eps and eps/2 shrinks ~4x per halving
        h = total_operator(build_xxz(ModelSpec(4, 2.0)))
        y0 = total_operator(build_initial_adiabatic(4))
        finals = {}
        for eps in (0.1, 0.05, 0.025):
            y = y0
            for _ in range(int(round(0.5 / eps))):
                y = rk2_substep(y, lambda u: rhs_naive(u, h), eps)
            finals[eps] = y
        d1 = norm_inf(sum_combine(finals[0.1], 1.0, finals[0.05], -1.0, tol=0.0))
        d2 = norm_inf(sum_combine(finals[0.05], 1.0, finals[0.025], -1.0, tol=0.0))
        assert 2.5 <= d1 / d2 <= 6.0

    def test_split_sweep_convergence_is_first_order(self):
        # the sequential bond splitting contributes an O(eps) global error,
        # so halving eps roughly halves the solution difference
        finals = {}
        for eps in (0.1, 0.05, 0.025):
            spec = spec_for(
                **{
                    "generator.variant": "naive",
                    "integrator.epsilon": eps,
                    "integrator.tau_max": 0.5,
                    "sampling.stride": 1000,
                }
            )
            finals[eps] = evolve(spec)[-1][1].total()
        d1 = norm_inf(sum_combine(finals[0.1], 1.0, finals[0.05], -1.0, tol=0.0))
        d2 = norm_inf(sum_combine(finals[0.05], 1.0, finals[0.025], -1.0, tol=0.0))
        assert 1.6 <= d1 / d2 <= 6.0

    def test_width_schedule_transitions(self):
        spec = spec_for(
            **{
                "model.L": 6,
                "integrator.tau_max": 1.0,
                "truncation.schedule": [[0.0, 3], [0.4, 5]],
                "sampling.stride": 1,
            }
        )
        widths = {}
        for tau, state in evolve(spec):
            widths[round(tau, 3)] = (state.active_width, state.max_support_width)
        assert widths[0.35][0] == 3
        assert widths[0.45][0] == 5
        for tau, (w, max_w) in widths.items():
            assert max_w <= w, f"support {max_w} exceeds width {w} at tau={tau}"
        # growth actually uses the enlarged window
        assert max(mw for _, (w, mw) in widths.items() if w == 5) == 5

    def test_merged_equals_per_term_after_coupling(self):
        base = {
            "integrator.tau_max": 1.0,
            "sampling.stride": 100,
        }
        on = evolve(spec_for(**base, **{"engine.merge_coupled": True}))[-1][1]
        off = evolve(spec_for(**base, **{"engine.merge_coupled": False}))[-1][1]
        assert on.merged and not off.merged
        diff = sum_combine(on.total(), 1.0, off.total(), -1.0, tol=0.0)
        assert norm_inf(diff) < 1e-9 * norm_inf(on.total())

    def test_determinism_bitwise(self):
        spec = spec_for(**{"integrator.tau_max": 0.6})
        a = evolve(spec)[-1][1].total()
        b = evolve(spec)[-1][1].total()
        assert np.array_equal(a.keys, b.keys)
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_term_cap_resource_error(self):
        spec = spec_for(**{"limits.term_cap": 5, "integrator.tau_max": 0.3})
        with pytest.raises(ResourceLimitError):
            evolve(spec)

    def test_engine_register_cap(self):
        with pytest.raises(ResourceLimitError):
            FlowEngine(
                14,
                build_xxz(ModelSpec(14, 2.0)),
                build_initial_adiabatic(14),
                GeneratorVariant("per_term"),
            )

    def test_overflow_raises_diverged(self):
        spec = spec_for(
            **{
                "model.L": 2,
                "generator.variant": "naive",
                "integrator.epsilon": 0.5,
                "integrator.tau_max": 2000.0,
                "sampling.stride": 100000,
            }
        )
        with pytest.raises(IntegrationDivergedError):
            evolve(spec)

    def test_annihilation_condition_tracks_ite_state(self):
        # without truncation each evolved term keeps annihilating the exact
        # imaginary-time state up to integrator error
        spec = spec_for(**{"integrator.epsilon": 0.025, "integrator.tau_max": 0.25, "sampling.stride": 10})
        model_sum = total_operator(build_xxz(ModelSpec(4, 2.0)))
        hd = dense_of_sum(model_sum)
        psi = ite_state_dense(hd, initial_state(4), 0.25)
        _, state = evolve(spec)[-1]
        worst = max(
            np.linalg.norm(dense_of_sum(t.op) @ psi) for t in state.terms
        )
        assert worst < 5e-3


class TestGaugedVariant:
    def test_gauged_runs_and_stays_hermitian(self):
        spec = spec_for(
            **{
                "generator.variant": "gauged",
                "generator.u1": 2.0,
                "generator.u2": 0.5,
                "truncation.schedule": [[0.0, 3]],
                "integrator.tau_max": 0.5,
            }
        )
        snaps = evolve(spec)
        for _, state in snaps:
            assert hermiticity_residual(state.total()) == 0.0
            assert state.max_support_width <= 3

    def test_gauge_substep_matches_paulisum_heun(self):
        # one gauged step (no bond coupling: w=1 freezes the bond sweep)
        # equals a pure-gauge Heun update of each term
        spec = spec_for(
            **{
                "generator.variant": "gauged",
                "generator.u1": 2.0,
                "generator.u2": 0.5,
                "truncation.schedule": [[0.0, 1]],
                "integrator.tau_max": 0.05,
            }
        )
        snaps = evolve(spec)
        init = build_initial_adiabatic(4)
        expected = [
            rk2_substep(t.op, lambda u: gauge_term(u, 2.0, 0.5), 0.05) for t in init
        ]
        final_terms = snaps[-1][1].terms
        for got, want in zip(final_terms, expected):
            diff = sum_combine(got.op, 1.0, want, -1.0, tol=0.0)
            assert norm_inf(diff) < 1e-12
