import numpy as np
import pytest

from nlalloc.costs import LocalCost, QuadraticCost, make_agc_costs, make_f2_cost, penalize
from nlalloc.errors import ParameterError, PreconditionError, UnboundedGradientError
from nlalloc.oracle import invert_gradient, optimal_value_trace, solve_kkt
from nlalloc.problem import AllocationProblem

from helpers import quad_problem


class _Coupled(LocalCost):
    dim = 2
    separable = False

    def static(self, x):
        return float(x[0] ** 2 + x[1] ** 2 + x[0] * x[1])

    def grad(self, x):
        return np.array([2 * x[0] + x[1], 2 * x[1] + x[0]])


class _Flat(LocalCost):
    # gradient saturates, so large targets are unreachable
    dim = 1
    separable = True

    def static(self, x):
        return float(np.log(np.cosh(x[0])))

    def grad(self, x):
        return np.tanh(np.asarray(x, dtype=float))


def analytic_quadratic(gamma, a, b):
    # grad = 2 gamma x = phi a  =>  x = phi a / (2 gamma)
    gamma, a = np.asarray(gamma, float), np.asarray(a, float)
    phi = b / np.sum(a * a / (2 * gamma))
    return phi * a / (2 * gamma), phi


class TestInvertGradient:
    def test_quadratic(self):
        assert invert_gradient(QuadraticCost(1.0), 0, 6.0) == pytest.approx(3.0, abs=1e-12)
        assert invert_gradient(QuadraticCost(2.0, 1.0), 0, 1.0) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_lse_self_consistent(self, seed):
        cost = make_f2_cost(1, seed=seed)[0]
        rng = np.random.default_rng(seed)
        for p in range(4):
            target = rng.uniform(-20, 20)
            x = invert_gradient(cost, p, target)
            xv = np.zeros(4)
            xv[p] = x
            assert abs(cost.grad(xv)[p] - target) <= 1e-10

    def test_penalized_far_target(self):
        cost = penalize(make_agc_costs(1, seed=2)[0], -50.0, 150.0)
        x = invert_gradient(cost, 0, 60.0)
        assert abs(cost.grad([x])[0] - 60.0) <= 1e-10 * 61

    def test_unbounded(self):
        with pytest.raises(UnboundedGradientError):
            invert_gradient(_Flat(), 0, 2.0)

    def test_non_separable(self):
        with pytest.raises(PreconditionError):
            invert_gradient(_Coupled(), 0, 1.0)

    def test_bad_coordinate(self):
        with pytest.raises(ParameterError):
            invert_gradient(QuadraticCost(1.0), 1, 1.0)


class TestSolveKkt:
    def test_two_agents(self):
        sol = solve_kkt(quad_problem([1, 1], [1, 1], [4]))
        np.testing.assert_allclose(sol.X_star, [[2.0, 2.0]], atol=1e-10)
        assert sol.phi_star[0] == pytest.approx(4.0, abs=1e-10)

    def test_three_agents(self):
        sol = solve_kkt(quad_problem([1, 2, 4], [1, 1, 1], [7]))
        np.testing.assert_allclose(sol.X_star, [[4.0, 2.0, 1.0]], atol=1e-10)
        assert sol.phi_star[0] == pytest.approx(8.0, abs=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_random_quadratic_analytic(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 30))
        gamma = rng.uniform(0.05, 5, n)
        a = rng.uniform(0.1, 2, n) * rng.choice([-1, 1], n)
        b = rng.uniform(-100, 100)
        sol = solve_kkt(quad_problem(gamma, a, [b]))
        x, phi = analytic_quadratic(gamma, a, b)
        np.testing.assert_allclose(sol.X_star[0], x, rtol=0, atol=1e-8 * (1 + np.abs(x).max()))
        assert sol.phi_star[0] == pytest.approx(phi, abs=1e-8 * (1 + abs(phi)))

    @pytest.mark.parametrize("seed", range(5))
    def test_f2_invariants(self, seed):
        n = 30
        costs = make_f2_cost(n, seed=seed)
        a = np.random.default_rng(seed + 100).uniform(0.1, 1, n)
        prob = AllocationProblem(tuple(costs), a, np.full(4, 10.0))
        sol = solve_kkt(prob, tol=1e-10)
        assert sol.is_valid(prob, 1e-10)
        scaled = prob.scaled_gradients(sol.X_star)
        assert np.max(np.ptp(scaled, axis=1)) <= 1e-10 * 10

    def test_bracket_independence(self):
        prob = AllocationProblem(tuple(make_f2_cost(10, seed=3)), np.linspace(0.2, 1, 10), np.full(4, -3.0))
        s1 = solve_kkt(prob, phi_bracket=(-1, 1))
        s2 = solve_kkt(prob, phi_bracket=(5, 6))
        s3 = solve_kkt(prob, phi_bracket=(-300, -299))
        assert np.max(np.abs(s1.X_star - s2.X_star)) <= 10 * 1e-10
        assert np.max(np.abs(s1.X_star - s3.X_star)) <= 10 * 1e-10

    def test_optimality_against_feasible_perturbations(self):
        n = 12
        a = np.random.default_rng(1).uniform(0.1, 1, n)
        prob = AllocationProblem(tuple(make_f2_cost(n, seed=1)), a, np.full(4, 10.0))
        sol = solve_kkt(prob)
        rng = np.random.default_rng(2)
        for _ in range(100):
            D = rng.normal(scale=rng.uniform(1e-3, 1), size=(4, n))
            D -= np.outer(D @ a / (a @ a), a)
            assert prob.static_total(sol.X_star + D) > sol.f_star

    def test_penalized_agc(self):
        costs = [penalize(c, -50.0, 150.0, 10.0, 20.0) for c in make_agc_costs(10, seed=3)]
        prob = AllocationProblem(tuple(costs), np.ones(10), [800.0])
        sol = solve_kkt(prob)
        assert sol.is_valid(prob, 1e-10)
        assert abs(sol.X_star.sum() - 800) <= 1e-9
        # penalty gap: no further than 1/eps outside the box
        assert sol.X_star.min() >= -50 - 0.1 and sol.X_star.max() <= 150 + 0.1

    def test_rejects_bad_tol(self):
        with pytest.raises(ParameterError):
            solve_kkt(quad_problem([1, 1], [1, 1], [1]), tol=0.0)

    def test_rejects_coupled(self):
        prob = AllocationProblem((_Coupled(), _Coupled()), [1.0, 1.0], [1.0, 1.0])
        with pytest.raises(PreconditionError):
            solve_kkt(prob)

    def test_csv(self, tmp_path):
        sol = solve_kkt(quad_problem([1, 2, 4], [1, 1, 1], [7]))
        path = tmp_path / "o.csv"
        sol.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "agent,coordinate,x_star"
        assert len(lines) == 1 + 3 + 1
        assert lines[-1].startswith("phi_star,0,")
        assert float(lines[1].split(",")[2]) == pytest.approx(4.0)


class TestValueTrace:
    def test_constant_without_time_part(self):
        prob = quad_problem([1, 2], [1, 1], [3])
        sol = solve_kkt(prob)
        tr = optimal_value_trace(prob, sol, [0.0, 1.0, 7.5])
        assert np.all(tr == sol.f_star)

    def test_sinusoid(self):
        from nlalloc.costs import LogSumExpQuadCost

        c = LogSumExpQuadCost(1.0, 0.0, 0.0, 0.0, 0.7, 1.3, 0.0)
        prob = AllocationProblem((c, LogSumExpQuadCost(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)), [1, 1], [2.0])
        sol = solve_kkt(prob)
        times = np.linspace(0, 5, 11)
        tr = optimal_value_trace(prob, sol, times)
        np.testing.assert_allclose(tr, sol.f_star + 0.7 * np.sin(1.3 * times), rtol=1e-14)

    def test_below_feasible_points(self):
        n = 6
        a = np.linspace(0.3, 1, n)
        prob = AllocationProblem(tuple(make_f2_cost(n, seed=8)), a, np.full(4, 10.0))
        sol = solve_kkt(prob)
        f0 = optimal_value_trace(prob, sol, [0.0])[0]
        rng = np.random.default_rng(0)
        for _ in range(20):
            X = rng.normal(size=(4, n))
            X -= np.outer((X @ a - prob.b) / (a @ a), a)
            assert f0 <= prob.total(X, 0.0)
