"""Fast invariant battery behind the `verify` CLI verb (registers of L <= 6).

Each check prints one PASS/FAIL line; the battery is a smoke-level subset of
the full pytest suite, runnable in seconds from an installed package.
"""

from __future__ import annotations

import numpy as np

from . import dense, engine, models
from .config import ExperimentSpec
from .pauli import (
    PauliString,
    PauliSum,
    anticommutator,
    commutator,
    hermiticity_residual,
    modified_anticommutator,
    mul_strings,
    sum_multiply,
)
from .runner import records_to_csv, run

_P = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]]),
}


def _kron(label: str) -> np.ndarray:
    m = np.ones((1, 1))
    for q in reversed(range(len(label))):
        m = np.kron(m, _P[label[q]])
    return m


def _dense_sum(s: PauliSum) -> np.ndarray:
    dim = 1 << s.n_qubits
    m = np.zeros((dim, dim), dtype=complex)
    for string, c in s.terms():
        m += c * _kron(string.label())
    return m


def _rand_sum(rng, n, n_terms) -> PauliSum:
    labels = ["".join(rng.choice(list("IXYZ"), n)) for _ in range(n_terms)]
    return PauliSum.from_label_terms(
        {l: complex(rng.normal(), 0.0) for l in labels}
    )


def _checks():
    rng = np.random.default_rng(42)

    def string_products():
        for _ in range(100):
            la = "".join(rng.choice(list("IXYZ"), 4))
            lb = "".join(rng.choice(list("IXYZ"), 4))
            ph = mul_strings(PauliString.from_label(la), PauliString.from_label(lb))
            lhs = _kron(la) @ _kron(lb)
            rhs = ph.phase * _kron(ph.string.label())
            if np.max(np.abs(lhs - rhs)) > 1e-12:
                return False, f"{la}*{lb}"
        return True, "100 random 4-qubit pairs"

    def sum_algebra():
        worst = 0.0
        for _ in range(40):
            a = _rand_sum(rng, 3, 5)
            b = _rand_sum(rng, 3, 5)
            for op, ref in (
                (sum_multiply(a, b), _dense_sum(a) @ _dense_sum(b)),
                (commutator(a, b), _dense_sum(a) @ _dense_sum(b) - _dense_sum(b) @ _dense_sum(a)),
                (anticommutator(a, b), _dense_sum(a) @ _dense_sum(b) + _dense_sum(b) @ _dense_sum(a)),
            ):
                worst = max(worst, float(np.max(np.abs(_dense_sum(op) - ref))))
        return worst < 1e-12, f"max dense deviation {worst:.2e}"

    def hermitian_anticommutator():
        worst = 0.0
        for _ in range(40):
            a = _rand_sum(rng, 3, 5)
            b = _rand_sum(rng, 3, 5)
            worst = max(worst, hermiticity_residual(anticommutator(a, b)))
            worst = max(worst, hermiticity_residual(modified_anticommutator(a, b)))
        return worst < 1e-12, f"max residual {worst:.2e}"

    def model_basics():
        terms = models.build_xxz(models.ModelSpec(2, 2.0))
        ev = np.linalg.eigvalsh(_dense_sum(terms[0].op))
        if np.max(np.abs(ev - np.array([-1.0, 0.0, 0.5, 0.5]))) > 1e-12:
            return False, f"XXZ bond spectrum {ev}"
        h0 = models.total_operator(models.build_initial_adiabatic(6))
        psi = models.initial_state(6)
        resid = float(np.linalg.norm(_dense_sum(h0) @ psi))
        return resid < 1e-13, f"annihilation residual {resid:.2e}"

    def step_convergence():
        # un-split Heun on the whole-operator ODE: second order, ratio ~4
        from .models import ModelSpec, build_initial_adiabatic, build_xxz, total_operator
        from .pauli import norm_inf, sum_combine

        h = total_operator(build_xxz(ModelSpec(4, 2.0)))
        y0 = total_operator(build_initial_adiabatic(4))
        finals = {}
        for eps in (0.1, 0.05, 0.025):
            y = y0
            for _ in range(int(round(0.5 / eps))):
                y = engine.rk2_substep(y, lambda u: engine.rhs_naive(u, h), eps)
            finals[eps] = y
        d1 = norm_inf(sum_combine(finals[0.1], 1.0, finals[0.05], -1.0, 0.0))
        d2 = norm_inf(sum_combine(finals[0.05], 1.0, finals[0.025], -1.0, 0.0))
        ratio = d1 / d2
        return 2.5 <= ratio <= 6.0, f"halving ratio {ratio:.2f}"

    def symmetry_and_locality():
        spec = ExperimentSpec.from_mapping({
            "model.L": 6, "generator.variant": "per_term",
            "integrator.epsilon": 0.05, "integrator.tau_max": 0.5,
            "truncation.schedule": [[0.0, 3]], "sampling.stride": 2,
            "output.dir": "unused",
        })
        from .diagnostics import symmetry_residual

        worst_sym = 0.0
        worst_w = 0
        for _, state in engine.evolve_iter(spec):
            worst_sym = max(worst_sym, symmetry_residual(state.total()))
            worst_w = max(worst_w, state.max_support_width)
        ok = worst_sym < 1e-10 and worst_w <= 3
        return ok, f"symmetry {worst_sym:.1e}, max width {worst_w}"

    def determinism():
        import tempfile

        base = {
            "model.L": 4, "generator.variant": "per_term",
            "integrator.epsilon": 0.1, "integrator.tau_max": 1.0,
            "sampling.stride": 2,
        }
        outputs = []
        for tag in ("a", "b"):
            with tempfile.TemporaryDirectory() as td:
                spec = ExperimentSpec.from_mapping({**base, "output.dir": td})
                recs, _ = run(spec)
                outputs.append(records_to_csv(recs))
        return outputs[0] == outputs[1], "two runs byte-identical"

    return [
        ("string products vs dense", string_products),
        ("sum algebra vs dense", sum_algebra),
        ("anticommutator hermiticity", hermitian_anticommutator),
        ("model construction", model_basics),
        ("step-size convergence O(eps^2)", step_convergence),
        ("symmetry + strict locality", symmetry_and_locality),
        ("run determinism", determinism),
    ]


def run_quick_suite(printer=print) -> bool:
    all_ok = True
    for name, fn in _checks():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        printer(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return all_ok
