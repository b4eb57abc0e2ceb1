"""
Unit tests for capacity solvers, Sinkhorn and the diameter probe.

Core claims:
    - log f_p and its gradient are stable and match finite differences
    - gradients stay in conv(support); log f_p is midpoint convex
    - capacity_gd reaches 1 on balanced supports, 1/2 on the diameter array,
      and flags capacity zero on a single weight
    - ball minima are monotone in R and follow the directional profile
    - Sinkhorn fixes tristochastic arrays and stalls above the min-norm distance
    - rounding and padding bounds hold against solver values
    - probe tables are nonincreasing and export as R,achieved,gap
"""

from fractions import Fraction

import numpy as np
import pytest
from pytest import approx

from weight_core import SparseArray, omega_full, weights_of_indices
from constructions import frak_W, gamma_3, kravtsov_lambda, DiameterInstance, diameter_eta, pad_diameter_array
from geometry import min_norm_point
from capacity import (
    GeometricProgram, eval_log_f, grad_log_f, capacity_gd, capacity_ball,
    directional_profile, profile_slope, scaling_certificate, sinkhorn_array,
    rounding_capacity_bound, rounding_ball_bound, padded_capacity, padding_eps, padded_point, eval_f,
    diameter_probe, default_radii, probe_to_frame, export_probe_csv, project_ball,
)


# -- Helpers -----------------------------------------------------------------

def _random_program(seed, n=3, d=2, size=5):
    rng = np.random.default_rng(seed)
    ws = omega_full(n, d)
    picks = sorted(rng.choice(len(ws), size=size, replace=False))
    indices = [ws.index_tuples[i] for i in picks]
    arr = SparseArray(n, d, {idx: float(v) for idx, v in zip(indices, rng.uniform(0.1, 1.0, size=size))})
    return GeometricProgram.from_array(arr)


def _uniform_epsilons(n=3):
    return GeometricProgram(omega_full(n, 1), np.full(n, 1.0 / n))


@pytest.fixture(scope="module")
def diameter_program():
    return GeometricProgram.from_array(DiameterInstance(2).p)


# == Evaluation =============================================================

class TestEvaluation:
    def test_origin(self):
        prog = _random_program(0)
        assert eval_log_f(prog, np.zeros(prog.dim)) == approx(np.log(prog.coefficients.sum()))
        expected = (prog.coefficients / prog.coefficients.sum()) @ prog.W
        assert grad_log_f(prog, np.zeros(prog.dim)) == approx(expected)

    def test_diameter_unit_sum(self, diameter_program):
        assert eval_log_f(diameter_program, np.zeros(diameter_program.dim)) == approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_finite_differences(self, seed):
        prog = _random_program(seed)
        x = np.random.default_rng(100 + seed).normal(size=prog.dim)
        h = 1e-5
        fd = np.array([(eval_log_f(prog, x + h * e) - eval_log_f(prog, x - h * e)) / (2 * h)
                       for e in np.eye(prog.dim)])
        assert np.max(np.abs(fd - grad_log_f(prog, x))) <= 1e-7

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_in_hull(self, seed):
        prog = _random_program(seed)
        x = np.random.default_rng(seed).normal(scale=3.0, size=prog.dim)
        g = grad_log_f(prog, x)
        shifted = prog.W - g
        assert min_norm_point(shifted, tol=1e-14)["distance"] <= 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_midpoint_convexity(self, seed):
        prog = _random_program(seed)
        rng = np.random.default_rng(200 + seed)
        x, y = rng.normal(size=prog.dim), rng.normal(size=prog.dim)
        mid = eval_log_f(prog, (x + y) / 2)
        assert mid <= (eval_log_f(prog, x) + eval_log_f(prog, y)) / 2 + 1e-12

    def test_large_arguments_stay_finite(self, diameter_program):
        x = np.full(diameter_program.dim, 1e4)
        assert np.isfinite(eval_log_f(diameter_program, x))

    def test_non_finite_point(self):
        with pytest.raises(ValueError):
            eval_log_f(_uniform_epsilons(), [np.inf, 0.0, 0.0])

    def test_bad_coefficients(self):
        with pytest.raises(ValueError):
            GeometricProgram(omega_full(2, 1), [1.0, 0.0])

    def test_project_ball(self):
        assert project_ball(np.array([3.0, 4.0]), 1.0) == approx([0.6, 0.8])


# == Capacity ===============================================================

class TestCapacity:
    def test_balanced_support(self):
        result = capacity_gd(_uniform_epsilons())
        assert result["value"] == approx(1.0, abs=1e-12)
        assert result["argmin"] == approx(np.zeros(3), abs=1e-9)

    def test_diameter_half(self, diameter_program):
        result = capacity_gd(diameter_program)
        assert 0.5 - 1e-9 <= result["value"] <= 0.5 + 1e-6

    def test_single_weight_capacity_zero(self):
        ws = weights_of_indices([(1, 2)], 2, 2)
        result = capacity_gd(GeometricProgram(ws, [1.0]))
        assert result["capacity_zero"]
        assert not result["converged"]

    def test_tol_positive(self):
        with pytest.raises(ValueError):
            capacity_gd(_uniform_epsilons(), tol=0)

    def test_ball_zero_radius(self, diameter_program):
        assert capacity_ball(diameter_program, 0)["value"] == approx(1.0)

    def test_ball_negative_radius(self, diameter_program):
        with pytest.raises(ValueError):
            capacity_ball(diameter_program, -1)

    def test_ball_monotone(self):
        prog = _random_program(3)
        values = [capacity_ball(prog, R)["value"] for R in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert all(a >= b * (1 - 1e-8) for a, b in zip(values, values[1:]))

    def test_diameter_ball_far_and_near(self, diameter_program):
        eps = 1e-4
        eta = diameter_eta(2)
        R = 2 / eta * np.log(1 / eps)
        radii = list(np.arange(0.0, R, 0.25 / eta)) + [R]
        far = diameter_probe(diameter_program, eps, radii=radii, capa=0.5)["achieved"][-1]
        near = capacity_ball(diameter_program, 1.0)["value"]
        assert far <= 0.5 + eps
        assert near >= 0.5 + 10 * eps


class TestProfile:
    def test_t0(self, diameter_program):
        inst = DiameterInstance(2)
        assert directional_profile(diameter_program, inst.direction(), [0.0])[0] == approx(1.0)

    def test_closed_form(self, diameter_program):
        inst = DiameterInstance(2)
        eta = diameter_eta(2)
        ts = np.linspace(0, 10 / eta, 11)
        values = directional_profile(diameter_program, inst.direction(), ts)
        assert values == approx([0.5 + 0.5 * np.exp(-eta * t) for t in ts], rel=1e-9)

    @pytest.mark.parametrize("l", [2, 3])
    def test_slope(self, l):
        inst = DiameterInstance(l)
        prog = GeometricProgram.from_array(inst.p)
        eta = diameter_eta(l)
        ts = np.linspace(0, 10 / eta, 11)
        slope = profile_slope(ts, directional_profile(prog, inst.direction(), ts), 0.5)
        assert slope == approx(-eta, rel=0.01)

    def test_zero_direction(self, diameter_program):
        with pytest.raises(ValueError):
            directional_profile(diameter_program, np.zeros(diameter_program.dim), [1.0])


class TestCertificate:
    def test_kravtsov_support_certified(self):
        prog = GeometricProgram.from_array(kravtsov_lambda(4))
        assert scaling_certificate(prog, 0.05)["status"] == "certified-positive"

    def test_gamma33_inconclusive(self):
        arr = SparseArray(3, 3, {idx: Fraction(1, 6) for idx in frak_W(3)})
        assert scaling_certificate(GeometricProgram.from_array(arr), 0.1)["status"] == "inconclusive"

    def test_zero_bound(self):
        assert scaling_certificate(_uniform_epsilons(), 0)["status"] == "inconclusive"


# == Sinkhorn ===============================================================

class TestSinkhorn:
    def test_tristochastic_fixed_point(self):
        result = sinkhorn_array(kravtsov_lambda(4))
        assert result["residuals"][0] == approx(0.0, abs=1e-15)
        assert result["sweeps"] == 0

    def test_uniform_full_array(self):
        result = sinkhorn_array(np.ones((3, 3, 3)))
        assert result["residuals"][0] == approx(0.0, abs=1e-15)
        assert result["converged"]

    def test_unbalanced_converges(self):
        dense = np.random.default_rng(1).uniform(0.5, 2.0, size=(3, 3, 3))
        result = sinkhorn_array(dense, tol=1e-10, max_sweeps=500)
        assert result["converged"]
        assert result["residuals"][-1] <= 1e-10

    def test_gamma33_plateau(self):
        arr = SparseArray(3, 3, {idx: 1.0 for idx in frak_W(3)})
        floor = min_norm_point(gamma_3(3).to_matrix(), tol=1e-12)["distance"]
        result = sinkhorn_array(arr, tol=1e-12, max_sweeps=200)
        assert not result["converged"]
        assert min(result["residuals"]) >= floor - 1e-6

    def test_zero_array(self):
        with pytest.raises(ValueError):
            sinkhorn_array(np.zeros((2, 2)))


# == Rounding and padding ===================================================

class TestBounds:
    def test_rounding_identity(self, diameter_program):
        result = rounding_capacity_bound(diameter_program, diameter_program, capa_p=0.5)
        assert result["bound"] == approx(np.log(0.5))

    @pytest.mark.parametrize("seed", range(4))
    def test_rounding_capacity_holds(self, seed):
        rng = np.random.default_rng(seed)
        ws = omega_full(3, 2)
        p = 0.1 + 0.9 * rng.uniform(size=len(ws))
        q = p + rng.uniform(-1e-8, 1e-8, size=len(ws))
        p_prog, q_prog = GeometricProgram(ws, p), GeometricProgram(ws, q)
        capa_p = capacity_gd(p_prog)["value"]
        capa_q = capacity_gd(q_prog)["value"]
        bound = rounding_capacity_bound(p_prog, q_prog, capa_p=capa_p)["bound"]
        assert np.log(capa_q) >= bound - 1e-10
        assert bound == approx(np.log(capa_p), abs=1e-7)

    def test_support_mismatch(self):
        p = GeometricProgram(omega_full(2, 1), [0.5, 0.5])
        q = GeometricProgram(weights_of_indices([(1,)], 2, 1), [1.0])
        with pytest.raises(ValueError):
            rounding_capacity_bound(p, q, capa_p=1.0)

    def test_ball_bound_identity(self, diameter_program):
        result = rounding_ball_bound(diameter_program, diameter_program, 1e-3, 0.6, 0.5, 0.5)
        assert result["bound"] == approx(1.001 * 0.5)
        assert result["direct_bound"] == approx(0.6)
        assert result["hypothesis_holds"]

    def test_ball_bound_perturbed(self):
        ws = omega_full(2, 1)
        p_prog = GeometricProgram(ws, [0.5, 0.55])
        q_prog = GeometricProgram(ws, [0.55, 0.5])
        result = rounding_ball_bound(p_prog, q_prog, 0.1, 1.2, 1.0, 1.0)
        assert result["M"] == approx(2.0)
        assert result["sup_diff"] == approx(0.05)
        assert result["l1_diff"] == approx(0.1)
        assert result["bound"] == approx((1.1 * 0.9 - 0.2) * 1.0)
        assert result["bound"] == approx(0.79)
        assert result["direct_bound"] == approx(0.9 * 1.2)
        assert result["hypothesis_holds"]

    @pytest.mark.parametrize("seed", range(3))
    def test_ball_bound_below_solver(self, seed):
        rng = np.random.default_rng(seed)
        ws = omega_full(3, 2)
        p = 0.1 + 0.9 * rng.uniform(size=len(ws))
        q = p + rng.uniform(-1e-3, 1e-3, size=len(ws))
        p_prog, q_prog = GeometricProgram(ws, p), GeometricProgram(ws, q)
        capa_p, capa_q = capacity_gd(p_prog)["value"], capacity_gd(q_prog)["value"]
        ball_p = capacity_ball(p_prog, 0.0)["value"]
        ball_q = capacity_ball(q_prog, 0.0)["value"]
        eps = ball_p / capa_p - 1.0
        result = rounding_ball_bound(p_prog, q_prog, eps, ball_p, capa_p, capa_q)
        assert ball_q >= result["bound"]
        assert result["bound"] < (1 + eps) * capa_q

    def test_padded_capacity(self):
        assert padded_capacity(0.5, 3, 3) == approx(0.5)
        assert padded_capacity(0.5, 3, 6) == approx(0.5 ** 0.5)

    def test_padding_eps_identity(self):
        assert padding_eps(0.5, 1e-3, 4, 4) == approx(1e-3)

    def test_padded_point_matches_power(self):
        inst = DiameterInstance(2)
        t, d, n = inst.p.n, inst.p.d, inst.p.n + 3
        prog_p = GeometricProgram.from_array(inst.p)
        prog_q = GeometricProgram.from_array(pad_diameter_array(inst.p, n))
        y = np.random.default_rng(3).normal(size=prog_p.dim)
        f_p = eval_f(prog_p, y)
        x = padded_point(y, f_p, t, n, d)
        assert len(x) == prog_q.dim
        assert eval_f(prog_q, x) == approx(f_p ** (t / n), rel=1e-12)

    def test_padded_point_same_size(self):
        y = np.arange(6.0)
        assert padded_point(y, 2.0, 3, 3, 2) == approx(y)


# == Probe ==================================================================

class TestProbe:
    def test_trivial_barycenter(self):
        result = diameter_probe(_uniform_epsilons(), 1e-6, radii=[0.0, 1.0], capa=1.0)
        assert result["R_needed"] == 0.0

    @pytest.mark.parametrize("seeded", [False, True])
    def test_nonincreasing(self, diameter_program, seeded):
        eta = diameter_eta(2)
        radii = np.arange(0, 20 / eta, 1 / eta)
        direction = DiameterInstance(2).direction() if seeded else None
        result = diameter_probe(diameter_program, 1e-6, radii=radii, capa=0.5, direction=direction,
                                stop_when_reached=False)
        achieved = result["achieved"]
        assert all(a >= b for a, b in zip(achieved, achieved[1:]))

    def test_seeded_below_kernel_ray(self, diameter_program):
        eta = diameter_eta(2)
        radii = np.arange(0, 20 / eta, 1 / eta)
        result = diameter_probe(diameter_program, 1e-6, radii=radii, capa=0.5,
                                direction=DiameterInstance(2).direction(), stop_when_reached=False)
        for R, value in zip(result["radii"], result["achieved"]):
            assert value <= 0.5 + 0.5 * np.exp(-eta * R) + 1e-12

    def test_zero_direction(self, diameter_program):
        with pytest.raises(ValueError):
            diameter_probe(diameter_program, 1e-6, radii=[0.0, 1.0], direction=np.zeros(diameter_program.dim))

    def test_ball_stops_at_target(self, diameter_program):
        # f = 1 at the origin, so the target is met before any step.
        result = capacity_ball(diameter_program, 5.0, target=1.0 + 1e-9)
        assert result["converged"]
        assert result["iterations"] == 0

    def test_eps_positive(self, diameter_program):
        with pytest.raises(ValueError):
            diameter_probe(diameter_program, 0.0)

    def test_default_radii(self):
        radii = default_radii(4.0, 2.0)
        assert radii == approx([0.0, 2.0, 4.0])

    def test_csv_header(self, tmp_path):
        result = diameter_probe(_uniform_epsilons(), 1e-6, radii=[0.0, 1.0], capa=1.0)
        path = tmp_path / "probe.csv"
        export_probe_csv(result, str(path))
        assert path.read_text().splitlines()[0] == "R,achieved,gap"
        assert list(probe_to_frame(result).columns) == ["R", "achieved", "gap"]

    @pytest.mark.slow
    def test_probe_ratio(self):
        needed = []
        for l in (2, 3):
            prog = GeometricProgram.from_array(DiameterInstance(l).p)
            eta = diameter_eta(l)
            needed.append(diameter_probe(prog, 1e-6, radii=np.arange(0, 40 / eta, 0.25 / eta), capa=0.5)["R_needed"])
        assert 1.4 <= needed[1] / needed[0] <= 2.6

    @pytest.mark.slow
    def test_ratio_deep_levels(self):
        needed = {}
        for l in (3, 4, 5):
            inst = DiameterInstance(l)
            eta = diameter_eta(l)
            result = diameter_probe(GeometricProgram.from_array(inst.p), 1e-6,
                                    radii=np.arange(0, 40 / eta, 0.25 / eta), capa=0.5,
                                    direction=inst.direction())
            assert result["R_needed"] is not None, l
            needed[l] = result["R_needed"]
        assert 1.4 <= needed[4] / needed[3] <= 2.6
        assert 1.4 <= needed[5] / needed[4] <= 2.6
