import io
import json

import numpy as np
import pytest

from gfopt.objectives import catalog
from gfopt.verify import (
    ConditionReport,
    check_descent_lemma,
    check_gradient_equivalence,
    check_schedule_condition,
    descent_gap,
    drift_bound,
    laplace_family,
    probe_epi_convergence,
    run_suite,
    write_reports,
)


class TestDescent:
    def test_exact_quadratic(self):
        rep = check_descent_lemma(catalog("quadratic", 2), 0.5, trials=1000, exact=True)
        assert rep.samples_checked == 1000 and rep.violations == 0 and rep.passed
        assert rep.max_slack < 0

    def test_degenerate_pair(self):
        lhs, rhs, _ = descent_gap(catalog("quadratic"), [1.2], [1.2], 0.5)
        assert lhs == rhs

    def test_degenerate_pair_particles(self):
        from gfopt.qmc import generate

        lhs, rhs, _ = descent_gap(catalog("step"), [0.3], [0.3], 0.5, uniforms=generate("sobol", 1024, 1))
        assert lhs == rhs

    @pytest.mark.parametrize("name", ["step", "staircase"])
    def test_particle_estimates(self, name):
        rep = check_descent_lemma(catalog(name, 1), 0.5, trials=30, seed=1, particles=2**12)
        assert rep.violations <= 1

    def test_violations_are_detected(self, monkeypatch):
        import gfopt.verify as v

        # a fake "h" with curvature 2/gamma breaks the inequality
        monkeypatch.setattr(v, "closed_form_h_quadratic",
                            lambda t, g, lam=1.0: (float(np.dot(t, t)) / g, 2 * np.asarray(t) / g))
        rep = check_descent_lemma(catalog("quadratic", 1), 0.5, trials=50, exact=True)
        assert rep.violations == 50 and not rep.passed and rep.max_slack > 0

    def test_no_closed_form(self):
        with pytest.raises(ValueError):
            check_descent_lemma(catalog("step"), 0.5, trials=1, exact=True)


class TestGradient:
    def test_quadratic_grid(self):
        rep = check_gradient_equivalence(catalog("quadratic"), [-2.0, 0.0, 2.0], 0.5)
        assert rep.passed and rep.max_slack < 0

    def test_constant_absolute_branch(self):
        rep = check_gradient_equivalence(catalog("constant", 1, value=3.0), [-1.0, 1.0], 1.0)
        assert rep.passed
        for p in rep.details["points"]:
            assert abs(p["particle"][0]) < 1e-2 and abs(p["finite_difference"][0]) < 1e-2

    def test_step(self):
        rep = check_gradient_equivalence(catalog("step"), [0.5], 0.1)
        assert rep.passed

    def test_step_against_exact_gradient(self):
        from scipy.special import ndtr
        from scipy.stats import norm

        g, c = 0.1, 1 - np.exp(-1.0)
        z = 0.5 / np.sqrt(g)
        ref = c * norm.pdf(z) / np.sqrt(g) / (1 - c * ndtr(z))
        rep = check_gradient_equivalence(catalog("step"), [0.5], 0.1)
        assert rep.details["points"][0]["particle"][0] == pytest.approx(ref, rel=5e-2)

    def test_multidimensional_grid(self):
        rep = check_gradient_equivalence(catalog("shifted_quadratic", 2), [[0.0, 0.0], [2.0, -1.0]], 0.5)
        assert rep.samples_checked == 4 and rep.passed


class TestSchedule:
    def test_first_delta(self):
        # gamma_1 = 1, gamma_2 = 2**-0.4, direct evaluation of the drift bound
        g2 = 2**-0.4
        expected = ((1 / g2) ** 0.5 - 1) * 2 + (1 - g2) + 1
        assert expected == pytest.approx(1.539538, abs=1e-6)
        assert drift_bound(0.4, 1, 1) == pytest.approx(expected, rel=1e-14)

    def test_matches_naive_formula_at_small_n(self):
        n = np.arange(1, 200, dtype=float)
        g, g1 = n**-0.4, (n + 1) ** -0.4
        naive = ((g / g1) ** 5 - 1) * (g + 1) + (g - g1) + g * g
        np.testing.assert_allclose(drift_bound(0.4, 10, n), naive, rtol=1e-9)

    @pytest.mark.parametrize("d", [1, 10])
    def test_pass(self, d):
        rep = check_schedule_condition(0.4, d)
        assert rep.passed, rep.details
        assert rep.details["ratio_now"] < 1e-2 and rep.details["ratio_next"] < 1e-2

    def test_slow_decay_fails(self):
        # gamma_n^2 dominates for small beta: ratios stay large at n_max = 1e3
        rep = check_schedule_condition(0.05, 1, n_max=1000)
        assert not rep.passed

    def test_bad_beta(self):
        with pytest.raises(ValueError):
            check_schedule_condition(1.0, 1)


class TestEpi:
    def test_neg(self):
        rep = probe_epi_convergence("epi_neg")
        assert rep.passed
        at0 = [p for p in rep.details["points"] if p["theta"] == 0.0][0]
        assert at0["limit"] == pytest.approx(-1.0)

    def test_pos_limit_zero_at_origin(self):
        rep = probe_epi_convergence("epi_pos", [0.0])
        assert rep.passed
        assert rep.details["points"][0]["limit"] == pytest.approx(0.0, abs=1e-3)

    def test_pos_needs_off_origin_sequence(self):
        rep = probe_epi_convergence("epi_pos", [0.0], exponents=(), limit=lambda t: 0.0)
        assert not rep.passed

    def test_alt_flagged(self):
        rep = probe_epi_convergence("epi_alt")
        assert not rep.passed

    def test_laplace_quadratic(self):
        obj = catalog("quadratic")
        rep = probe_epi_convergence(laplace_family(obj), limit=lambda t: obj(t), tol=5e-2)
        assert rep.passed

    def test_callable_family(self):
        rep = probe_epi_convergence(lambda n, t: np.sin(t) + 1.0 / n, [0.0, 1.0], limit=np.sin, tol=5e-2)
        assert rep.passed


class TestReports:
    def test_serialisation(self):
        rep = check_schedule_condition(0.4, 1, n_max=1000)
        buf = io.StringIO()
        write_reports([rep], buf)
        lines = buf.getvalue().splitlines()
        assert json.loads(lines[0])["schema"] == "gfopt.report"
        rec = json.loads(lines[1])
        assert rec["name"] == rep.name and rec["pass"] == rep.passed
        assert str(rep).startswith("PASS" if rep.passed else "FAIL")

    def test_pass_iff_no_violations(self):
        assert ConditionReport("x", 1, 0, -1.0).passed
        assert not ConditionReport("x", 1, 1, 1.0).passed

    def test_suites_deterministic(self):
        a = [r.to_dict() for r, _ in run_suite("descent", seed=7, trials=10, particles=1024)]
        b = [r.to_dict() for r, _ in run_suite("descent", seed=7, trials=10, particles=1024)]
        assert json.dumps(a, default=str) == json.dumps(b, default=str)

    def test_unknown_suite(self):
        with pytest.raises(ValueError):
            run_suite("nope")
