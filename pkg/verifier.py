import json
import time
from fractions import Fraction
from itertools import product
from math import comb, sqrt

import numpy as np
import pandas as pd

from config import (
    DEFAULT_SEED, MIN_NORM_TOL, CAPACITY_TOL, PROBE_EPS,
    FREE_MOMENT_SAMPLES, FREE_DIAMETER_SAMPLES, FREE_DIAMETER_RADIUS,
    RESULTS_FILE, CSV_SIGNIFICANT_DIGITS, VERBOSE,
)
from weight_core import (
    omega_full, weights_of_indices, is_free_indices, is_free_weights, marginals,
)
from constructions import (
    qubit_matrix, qubit_indices, gamma_qubit, qubit_witness, kravtsov_lambda, kravtsov_witness,
    frak_W, gamma_3, sigma_table, stacked_indices, gamma_stacked, stacked_witness, gamma_4,
    pad_weightset, omega_poly, embed_tensor_weights, poly_contains, QuiverInstance,
    arrow_support_weights, DiameterInstance, diameter_eta, pad_diameter_array, rounded_tensor,
)
from geometry import (
    min_norm_point, separation_certificate, in_affine_hull_zero, in_convex_hull_zero,
    dist_to_affine_hull, margin_bruteforce, smallest_nonzero_singular_value,
)
from capacity import (
    GeometricProgram, eval_log_f, grad_log_f, capacity_gd, capacity_ball, directional_profile,
    profile_slope, rounding_capacity_bound, rounding_ball_bound, padded_capacity, padded_point,
    diameter_probe, eval_f,
)
from tensor_ops import (
    ComplexTensor, TorusElement, moment_map_G, moment_map_T, check_free_moment_equality,
    gap_witness_minimize, tensor_to_array, nc_capacity_eval, free_diameter_sample_check,
    check_quiver_moment_equality, quiver_gap_witness,
)


class SkipCheck(Exception):
    """Raised by a check when its parameters are outside the supported range."""


# Check id -> (method name, default parameter grid). Report order follows this table.
CATALOG = {
    "margin-a": ("_check_margin_a", {"d": list(range(3, 21))}),
    "margin-b": ("_check_margin_b", {"n": list(range(3, 15))}),
    "margin-c": ("_check_margin_c", {"n": [3, 4, 5], "r": [2, 3]}),
    "kravtsov": ("_check_kravtsov", {"n": list(range(3, 21))}),
    "stacked-aff": ("_check_stacked_aff", {"n": [3, 4, 5], "r": [2, 3, 4]}),
    "qubit-free": ("_check_qubit_free", {"r": list(range(1, 11))}),
    "wn-free": ("_check_wn_free", {"n": list(range(3, 15))}),
    "quiver": ("_check_quiver", {"n": [2, 3, 4, 5], "d": list(range(2, 9))}),
    "gamma4": ("_check_gamma4", {"n": list(range(3, 11))}),
    "poly": ("_check_poly", {"m": [3, 4, 5], "d": [3]}),
    "diameter-q": ("_check_diameter_q", {"l": [2, 3, 4, 5]}),
    "diameter-kernel": ("_check_diameter_kernel", {"l": [2, 3, 4, 5]}),
    "diameter-sv": ("_check_diameter_sv", {"l": [2, 3, 4, 5]}),
    "diameter-probe": ("_check_diameter_probe", {"l": [2, 3, 4]}),
    "pad": ("_check_pad", {"l": [2, 3], "extra": [1, 4]}),
    "rounding": ("_check_rounding", {"instance": list(range(20))}),
    "free-moment": ("_check_free_moment", {"instance": ["W4", "qubit5", "stacked3_2", "diameter2",
                                                        "dense", "nonfree"]}),
    "gap-witness": ("_check_gap_witness", {"instance": ["gamma2_3", "gamma3_3", "gamma4_3", "gamma3_9"]}),
    "free-diameter": ("_check_free_diameter", {"l": [2], "R": [FREE_DIAMETER_RADIUS]}),
    "oracles": ("_check_oracles", {"oracle": ["margin-omega22", "grad-fd", "nc-torus"]}),
}

GAP_WITNESS_INSTANCES = {
    "gamma2_3": (lambda: qubit_indices(3), 2, 3, 1e-6),
    "gamma3_3": (lambda: frak_W(3), 3, 3, 1e-4),
    "gamma4_3": (lambda: frak_W(4), 4, 3, 1e-4),
    "gamma3_9": (lambda: stacked_indices(3, 2), 3, 9, 1e-4),
}


def _rel_close(a, b, rtol):
    return abs(a - b) <= rtol * max(1.0, abs(b))


def to_jsonable(obj):
    """json.dump default: rationals as "p/q" strings, numpy values as Python values."""
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return str(obj)


class TheoremVerifier:
    """
    Runs the registered catalog of constructive checks and collects reports.

    Each report is a dict with check, params, status (pass / fail / skipped),
    measured, bound, runtime, counterexample and reason.

    Args:
        seed: Base seed for every randomized check
        tol: Floating tolerance for the min-norm oracle
        verbose: Print one line per report while running
    """

    def __init__(self, seed=DEFAULT_SEED, tol=MIN_NORM_TOL, verbose=VERBOSE):
        self.seed = seed
        self.tol = tol
        self.verbose = verbose
        self.reports = []
        self._probe_cache = {}

    # ------------------------------------------------------------------
    # Running
    # ------------------------------------------------------------------

    @staticmethod
    def catalog():
        return list(CATALOG)

    def run(self, check_id, params=None):
        """
        Run one check over its parameter grid.

        Args:
            check_id: Catalog id
            params: Optional dict overriding grid entries (lists of values)

        Returns:
            List of reports, one per parameter combination
        """
        if check_id not in CATALOG:
            raise KeyError(f"Unknown check '{check_id}'. Catalog: {', '.join(CATALOG)}")

        method_name, grid = CATALOG[check_id]
        grid = dict(grid)
        for key, values in (params or {}).items():
            if key not in grid:
                raise KeyError(f"Check '{check_id}' has no parameter '{key}' (expected {', '.join(grid)})")
            grid[key] = list(values) if isinstance(values, (list, tuple, range)) else [values]

        method = getattr(self, method_name)
        reports = []
        keys = list(grid)
        for combo in product(*(grid[k] for k in keys)):
            case = dict(zip(keys, combo))
            reports.append(self._run_case(check_id, method, case))
        self.reports.extend(reports)
        return reports

    def run_all(self, check_ids=None, params=None):
        """Run several checks (default: the whole catalog) in catalog order."""
        ids = self.catalog() if check_ids is None else [c for c in CATALOG if c in set(check_ids)]
        reports = []
        for check_id in ids:
            reports.extend(self.run(check_id, (params or {}).get(check_id)))
        return reports

    def _run_case(self, check_id, method, case):
        start = time.perf_counter()
        report = {
            "check": check_id,
            "params": case,
            "status": "fail",
            "measured": {},
            "bound": None,
            "runtime": 0.0,
            "counterexample": None,
            "reason": None,
        }
        try:
            passed, measured, bound = method(**case)
            report["measured"] = measured
            report["bound"] = bound
            report["status"] = "pass" if passed else "fail"
            if not passed:
                report["counterexample"] = {"params": case, "measured": measured}
        except SkipCheck as e:
            report["status"] = "skipped"
            report["reason"] = str(e)
        except Exception as e:
            report["counterexample"] = {"params": case, "error": f"{type(e).__name__}: {e}"}
            report["reason"] = str(e)
        report["runtime"] = time.perf_counter() - start

        if self.verbose:
            mark = {"pass": "✅", "fail": "❌", "skipped": "ℹ️ "}[report["status"]]
            print(f"{mark} {check_id} {case} ({report['runtime']:.2f}s)")
        return report

    # ------------------------------------------------------------------
    # Margin witnesses
    # ------------------------------------------------------------------

    def _margin_case(self, ws, bound, witness=None):
        rows = ws.rational_rows()
        aff = in_affine_hull_zero(rows)
        mn = min_norm_point(ws.to_matrix(), tol=self.tol)
        cert = separation_certificate(rows, mn["point"])
        measured = {
            "size": len(ws),
            "affine_member": aff["member"],
            "distance": mn["distance"],
            "certified_lower": cert["distance_lower_bound"],
            "converged": mn["converged"],
        }
        passed = not aff["member"] and cert["valid"] and mn["distance"] <= bound * (1 + 1e-9)
        if witness is not None:
            measured["witness_norm"] = sqrt(float(witness["norm_sq"]))
            passed = passed and measured["witness_norm"] <= bound * (1 + 1e-9)
        return passed, measured, bound

    def _check_margin_a(self, d):
        if d < 3:
            raise SkipCheck(f"Gamma_2,d needs d >= 3, got {d}")
        witness = qubit_witness(d)
        return self._margin_case(witness["weights"], witness["bound"], witness)

    def _check_margin_b(self, n):
        if n < 3:
            raise SkipCheck(f"Gamma_n,3 needs n >= 3, got {n}")
        witness = kravtsov_witness(n)
        return self._margin_case(witness["weights"], witness["bound"], witness)

    def _check_margin_c(self, n, r):
        if n < 3 or r < 2:
            raise SkipCheck(f"Gamma_n,6r-3 needs n >= 3 and r >= 2, got n={n}, r={r}")
        witness = stacked_witness(n, r)
        return self._margin_case(witness["weights"], witness["bound"], witness)

    def _check_gamma4(self, n):
        if n < 3:
            raise SkipCheck(f"Gamma_n,4 needs n >= 3, got {n}")
        ws = gamma_4(n)
        passed, measured, bound = self._margin_case(ws, 2.0 ** (-n + 1))
        measured["free"] = is_free_indices(ws.index_tuples)[0]
        return passed and measured["free"], measured, bound

    # ------------------------------------------------------------------
    # Exact constructions
    # ------------------------------------------------------------------

    def _check_kravtsov(self, n):
        if n < 3:
            raise SkipCheck(f"kravtsov_lambda needs n >= 3, got {n}")
        lam = kravtsov_lambda(n)
        sums = marginals(lam)
        bad = [(k + 1, i + 1, s) for k, axis in enumerate(sums) for i, s in enumerate(axis) if s != 1]
        expected_support = set(frak_W(n)) | {(1, 1, 1)}
        measured = {
            "slice_equations": 3 * n,
            "violations": bad,
            "total": lam.total(),
            "lambda_111": lam.entries[(1, 1, 1)],
            "support_ok": set(lam.support()) == expected_support,
        }
        passed = (not bad and lam.total() == n and measured["support_ok"]
                  and lam.entries[(1, 1, 1)] == Fraction(1, 2 ** (n - 1)))
        return passed, measured, n

    def _check_stacked_aff(self, n, r):
        if n < 3 or r < 2:
            raise SkipCheck(f"sigma table needs n >= 3 and r >= 2, got n={n}, r={r}")
        table = sigma_table(n, r)
        ws = gamma_stacked(n, r)
        aff = in_affine_hull_zero(ws.rational_rows())
        expected = 3 * (r * n - 1) - 2 * (r - 1)
        measured = {
            "injective": table.is_injective(),
            "value_counts_ok": table.value_counts_ok(),
            "size": len(ws),
            "free": is_free_indices(ws.index_tuples)[0],
            "affine_member": aff["member"],
        }
        passed = (measured["injective"] and measured["value_counts_ok"] and len(ws) == expected
                  and measured["free"] and not aff["member"])
        return passed, measured, expected

    def _check_qubit_free(self, r):
        if r < 1:
            raise SkipCheck(f"qubit_matrix needs r >= 1, got {r}")
        A = qubit_matrix(r)
        rows = [tuple(int(a) for a in row) for row in A]
        # A_2's rows differ in one slot; row freeness starts at r = 2.
        measured = {
            "rows_free": is_free_indices(rows)[0] if r >= 2 else None,
            "entries_ok": bool(np.isin(A, [1, 2]).all()),
            "stable": True,
            "odd_free": is_free_indices(gamma_qubit(2 * r + 1).index_tuples)[0],
        }
        if r >= 2:
            measured["stable"] = bool(np.array_equal(A[:2 * r - 2, :2 * r - 2], qubit_matrix(r - 1)))
        passed = all(v for v in measured.values() if v is not None)
        return passed, measured, None

    def _check_wn_free(self, n):
        if n < 3:
            raise SkipCheck(f"frak_W needs n >= 3, got {n}")
        padded = pad_weightset(gamma_3(n), 2)
        quiver_base = QuiverInstance(n, 2).gamma
        measured = {
            "W_free": is_free_indices(frak_W(n))[0],
            "gamma4_free": is_free_indices(gamma_4(n).index_tuples)[0],
            "padded_free": is_free_indices(padded.index_tuples)[0],
            "quiver_base_free": is_free_weights(quiver_base),
        }

        # Index freeness and weight freeness agree on random small index sets.
        rng = np.random.default_rng(self.seed + n)
        cube = list(product(range(1, 4), repeat=3))
        disagreements = 0
        for _ in range(10):
            picks = rng.choice(len(cube), size=5, replace=False)
            indices = [cube[i] for i in picks]
            ws = weights_of_indices(indices, 3, 3, verbose=False)
            if is_free_indices(indices)[0] != is_free_weights(ws):
                disagreements += 1
        measured["predicate_disagreements"] = disagreements

        passed = (measured["W_free"] and measured["gamma4_free"] and measured["padded_free"]
                  and not measured["quiver_base_free"] and disagreements == 0)
        return passed, measured, None

    def _check_quiver(self, n, d):
        if n < 2 or d < 2:
            raise SkipCheck(f"quiver needs n >= 2 and d >= 2, got n={n}, d={d}")
        inst = QuiverInstance(n, d)
        conv = in_convex_hull_zero(inst.gamma.rational_rows())
        bound_sq = Fraction(1, (n - 1) ** (2 * (d - 1)))
        arrow_weights = set(arrow_support_weights(n, d, inst.arrows))
        moment_ok, worst = check_quiver_moment_equality(inst.arrows, n, d, samples=10, seed=self.seed)
        measured = {
            "size": len(inst.gamma),
            "lambda": inst.lam,
            "convex_member": conv["member"],
            "reproduces_x": inst.reproduces_x(),
            "x_norm": sqrt(float(inst.x_norm_sq())),
            "arrow_weights_match": arrow_weights == set(inst.gamma.elements),
            "moment_off_diagonal": worst,
        }
        passed = (not conv["member"] and measured["reproduces_x"] and inst.x_norm_sq() < bound_sq
                  and measured["arrow_weights_match"] and moment_ok
                  and inst.lam == 1 / sum(Fraction(n - 1) ** i for i in range(1, d)))
        if d <= 3:
            gap = quiver_gap_witness(inst)
            measured["gap_witness"] = gap["value"]
            passed = passed and gap["value"] <= inst.bound * (1 + 1e-6)
        return passed, measured, inst.bound

    def _check_poly(self, m, d):
        if d != 3 or m < 3:
            raise SkipCheck(f"witness embedding is built from Gamma_m,3 (d = 3, m >= 3), got m={m}, d={d}")
        n = d * m
        poly = omega_poly(n, d)
        embedded = embed_tensor_weights(gamma_3(m))
        mn = min_norm_point(embedded.to_matrix(), tol=self.tol)
        bound = 2.0 ** (-m + 1)
        measured = {
            "size": len(poly),
            "expected_size": comb(n + d - 1, d),
            "zero_sum": all(sum(w.scaled) == 0 for w in poly),
            "contains_witness": poly_contains(poly, embedded),
            "witness_free": is_free_weights(embedded),
            "distance": mn["distance"],
        }
        passed = (measured["size"] == measured["expected_size"] and measured["zero_sum"]
                  and measured["contains_witness"] and measured["witness_free"]
                  and 0 < mn["distance"] <= bound * (1 + 1e-9))
        return passed, measured, bound

    # ------------------------------------------------------------------
    # Diameter instance
    # ------------------------------------------------------------------

    def _diameter(self, l):
        if l < 2:
            raise SkipCheck(f"diameter instance needs l >= 2, got {l}")
        return DiameterInstance(l)

    def _check_diameter_q(self, l):
        inst = self._diameter(l)
        sums = inst.column_sums()
        target = Fraction(1, inst.n)
        row_weights = weights_of_indices(inst.rows, inst.n, 3, verbose=False)
        conv = in_convex_hull_zero(row_weights.rational_rows())
        measured = {
            "vertices": len(inst.vertices),
            "edges": len(inst.edges),
            "column_sum_violations": sum(1 for s in sums if s != target),
            "q_total": sum(inst.q),
            "p_total": inst.p.total(),
            "rows_contain_zero": conv["member"],
        }
        passed = (measured["vertices"] == 3 * (l + 1) and measured["edges"] == 3 * l + 2
                  and measured["column_sum_violations"] == 0 and measured["q_total"] == 1
                  and measured["p_total"] == 1 and conv["member"])
        return passed, measured, target

    def _check_diameter_kernel(self, l):
        inst = self._diameter(l)
        residual = inst.kernel_residual()
        eta = dist_to_affine_hull(inst.omega_prime_vector(), inst.row_vectors())["distance"]
        measured = {
            "nonzero_residuals": sum(1 for x in residual if x != 0),
            "eta_lstsq": eta,
            "eta_closed_form": diameter_eta(l),
        }
        passed = measured["nonzero_residuals"] == 0 and eta > 0 and abs(eta - diameter_eta(l)) <= 1e-9
        return passed, measured, None

    def _check_diameter_sv(self, l):
        inst = self._diameter(l)
        sv = smallest_nonzero_singular_value(inst.M)
        bound = 0.1 / inst.n
        measured = {"sigma_min": sv["sigma_min"], "zero_count": sv["zero_count"]}
        return sv["zero_count"] == 3 and sv["sigma_min"] >= bound, measured, bound

    def _probe(self, l):
        """
        Probe of the diameter array at PROBE_EPS, cached per level.

        The grid spacing is 1/(4 eta) out to 40/eta, so every level gets the
        same relative resolution. The capacity is exactly 1/2, and the kernel
        direction seeds every radius.
        """
        if l not in self._probe_cache:
            inst = self._diameter(l)
            prog = GeometricProgram.from_array(inst.p)
            eta = diameter_eta(l)
            radii = np.arange(0.0, 40.0 / eta, 0.25 / eta)
            self._probe_cache[l] = diameter_probe(prog, PROBE_EPS, radii=radii, capa=0.5,
                                                   direction=inst.direction())
        return self._probe_cache[l]

    def _check_diameter_probe(self, l):
        inst = self._diameter(l)
        prog = GeometricProgram.from_array(inst.p)
        rows = inst.row_vectors()
        eta = dist_to_affine_hull(inst.omega_prime_vector(), rows)["distance"]
        nxt = self._diameter(l + 1)
        eta_next = dist_to_affine_hull(nxt.omega_prime_vector(), nxt.row_vectors())["distance"]

        ts = np.linspace(0.0, 10.0 / eta, 11)
        slope = profile_slope(ts, directional_profile(prog, inst.direction(), ts), 0.5)

        gd = capacity_gd(prog, tol=CAPACITY_TOL)
        here, there = self._probe(l), self._probe(l + 1)
        r_ratio = None
        if here["R_needed"] and there["R_needed"] is not None:
            r_ratio = there["R_needed"] / here["R_needed"]

        measured = {
            "eta": eta,
            "eta_ratio": eta / eta_next,
            "profile_slope": slope,
            "capacity_value": gd["value"],
            "R_needed": here["R_needed"],
            "R_needed_next": there["R_needed"],
            "R_ratio": r_ratio,
        }
        passed = (1.7 <= measured["eta_ratio"] <= 2.3
                  and abs(slope + eta) <= 0.01 * eta
                  and 0.5 - 1e-9 <= gd["value"] <= 0.5 + 1e-6
                  and r_ratio is not None and 1.4 <= r_ratio <= 2.6)
        return passed, measured, 0.5

    # ------------------------------------------------------------------
    # Capacity bounds
    # ------------------------------------------------------------------

    def _check_pad(self, l, extra, samples=40):
        if l < 2 or extra < 1:
            raise SkipCheck(f"padding needs l >= 2 and extra >= 1, got l={l}, extra={extra}")

        inst = self._diameter(l)
        p = inst.p
        t, d = p.n, p.d
        n = t + extra
        q = pad_diameter_array(p, n)
        prog_p, prog_q = GeometricProgram.from_array(p), GeometricProgram.from_array(q)
        eta = diameter_eta(l)
        u = inst.direction()
        target = padded_capacity(0.5, t, n)

        # Kernel ray of p lifted to q: f_q = (1/2 + e^{-eta s}/2)^{t/n} along it.
        errors = []
        for s in np.linspace(0.0, 40.0 / eta, samples):
            f_p = eval_f(prog_p, -s * u)
            x = padded_point(-s * u, f_p, t, n, d)
            errors.append(abs(eval_f(prog_q, x) - (0.5 + 0.5 * np.exp(-eta * s)) ** (t / n)))
        far = -(40.0 / eta) * u
        far_q = eval_f(prog_q, padded_point(far, eval_f(prog_p, far), t, n, d))
        gd = capacity_gd(prog_q)

        measured = {
            "t": t,
            "n": n,
            "q_total": q.total(),
            "padded_capacity": target,
            "profile_error": max(errors),
            "far_value": far_q,
            "capa_q_gd": gd["value"],
        }
        passed = (q.total() == 1 and max(errors) <= 1e-12
                  and far_q <= target + 1e-12
                  and target - 1e-9 <= gd["value"] <= target * (1 + 1e-4))
        return passed, measured, target

    def _check_rounding(self, instance, delta=1e-6):
        rng = np.random.default_rng(self.seed + 1000 + instance)
        ws = omega_full(3, 2)
        p = 0.05 + 0.55 * rng.dirichlet(np.ones(len(ws)))
        q = p + delta * rng.uniform(-1.0, 1.0, len(ws))
        prog_p = GeometricProgram(ws, p, label=f"rounding_p{instance}")
        prog_q = GeometricProgram(ws, q, label=f"rounding_q{instance}")

        gd_p = capacity_gd(prog_p, tol=1e-12)
        capa_p, capa_q = gd_p["value"], capacity_gd(prog_q, tol=1e-12)["value"]
        cap_bound = rounding_capacity_bound(prog_p, prog_q, capa_p)

        R = 0.5 * float(np.linalg.norm(gd_p["argmin"]))
        ball_p = capacity_ball(prog_p, R)["value"]
        ball_q = capacity_ball(prog_q, R)["value"]
        eps = max(ball_p / capa_p - 1.0, 0.0)
        ball_bound = rounding_ball_bound(prog_p, prog_q, eps, ball_p, capa_p, capa_q)

        measured = {
            "sup_diff": cap_bound["sup_diff"],
            "log_capa_q": float(np.log(capa_q)),
            "log_capa_bound": cap_bound["bound"],
            "radius": R,
            "ball_q": ball_q,
            "ball_bound": ball_bound["bound"],
            "direct_bound": ball_bound["direct_bound"],
        }
        passed = (measured["log_capa_q"] >= cap_bound["bound"] - 1e-12
                  and ball_q >= ball_bound["bound"] - 1e-12
                  and ball_q >= ball_bound["direct_bound"] - 1e-12)
        return passed, measured, cap_bound["bound"]

    # ------------------------------------------------------------------
    # Tensor layer
    # ------------------------------------------------------------------

    def _free_moment_tensor(self, instance, rng):
        if instance == "W4":
            return ComplexTensor.random(frak_W(4), 4, 3, rng, label="W4")
        if instance == "qubit5":
            return ComplexTensor.random(qubit_indices(5), 2, 5, rng, label="qubit5")
        if instance == "stacked3_2":
            return ComplexTensor.random(stacked_indices(3, 2), 3, 9, rng, label="stacked3_2")
        if instance == "diameter2":
            return rounded_tensor(DiameterInstance(2).p)["tensor"]
        if instance == "nonfree":
            return ComplexTensor(3, 3, {(1, 1, 1): 1.0, (1, 1, 2): 1.0}, label="nonfree")
        raise SkipCheck(f"Unknown free-moment instance '{instance}'")

    def _check_free_moment(self, instance):
        rng = np.random.default_rng(self.seed)
        if instance == "dense":
            worst_gap, worst_diag = -np.inf, 0.0
            for _ in range(FREE_MOMENT_SAMPLES):
                v = ComplexTensor.from_dense(rng.normal(size=(3, 3, 3)) + 1j * rng.normal(size=(3, 3, 3)))
                mu_g = moment_map_G(v)
                mu_t = moment_map_T(v)
                worst_gap = max(worst_gap, float(np.linalg.norm(mu_t)) - mu_g.frobenius_norm)
                worst_diag = max(worst_diag, float(np.max(np.abs(mu_g.diagonal() - mu_t))))
            measured = {"max_norm_excess": worst_gap, "max_diagonal_mismatch": worst_diag}
            return worst_gap <= 1e-12 and worst_diag <= 1e-12, measured, 1e-12

        v = self._free_moment_tensor(instance, rng)
        ok, worst = check_free_moment_equality(v, samples=FREE_MOMENT_SAMPLES, tol=1e-12, seed=self.seed)
        measured = {"free_support": is_free_indices(v.support())[0], "max_off_diagonal": worst}
        if instance == "nonfree":
            # Control: a support with a one-slot pair must show off-diagonal mass.
            return not ok and not measured["free_support"], measured, 1e-12
        return ok and measured["free_support"], measured, 1e-12

    def _check_gap_witness(self, instance):
        if instance not in GAP_WITNESS_INSTANCES:
            raise SkipCheck(f"Unknown gap-witness instance '{instance}'")
        make, n, d, agree_tol = GAP_WITNESS_INSTANCES[instance]
        v = ComplexTensor(n, d, {idx: 1.0 for idx in make()}, label=instance)
        gap = gap_witness_minimize(v)
        distance = min_norm_point(v.weight_set().to_matrix(), tol=self.tol)["distance"]
        measured = {"gap_witness": gap["value"], "min_norm_distance": distance,
                    "iterations": gap["iterations"], "converged": gap["converged"]}
        passed = distance - 1e-9 <= gap["value"] <= distance + agree_tol
        return passed, measured, agree_tol

    def _check_free_diameter(self, l, R):
        if l < 2 or R < 0:
            raise SkipCheck(f"free-diameter needs l >= 2 and R >= 0, got l={l}, R={R}")
        v = rounded_tensor(DiameterInstance(l).p)["tensor"]
        if not is_free_indices(v.support())[0]:
            raise SkipCheck("rounded diameter tensor support is not free")
        result = free_diameter_sample_check(v, R, samples=FREE_DIAMETER_SAMPLES, tol=1e-9, seed=self.seed)
        measured = {k: result[k] for k in ("torus_optimum", "min_sampled", "violations")}
        return result["ok"], measured, result["torus_optimum"]

    # ------------------------------------------------------------------
    # Oracle cross-checks
    # ------------------------------------------------------------------

    def _check_oracles(self, oracle):
        rng = np.random.default_rng(self.seed + 2000)

        if oracle == "margin-omega22":
            margin = margin_bruteforce(omega_full(2, 2))["margin"]
            expected = 1 / sqrt(2)
            return abs(margin - expected) <= 1e-10, {"margin": margin}, expected

        if oracle == "grad-fd":
            cube = list(product(range(1, 4), repeat=3))
            worst, h = 0.0, 1e-5
            for _ in range(50):
                picks = rng.choice(len(cube), size=6, replace=False)
                ws = weights_of_indices([cube[i] for i in picks], 3, 3, verbose=False)
                prog = GeometricProgram(ws, rng.uniform(0.1, 1.0, len(ws)))
                x = rng.normal(size=prog.dim)
                grad = grad_log_f(prog, x)
                fd = np.array([(eval_log_f(prog, x + h * e) - eval_log_f(prog, x - h * e)) / (2 * h)
                               for e in np.eye(prog.dim)])
                worst = max(worst, float(np.max(np.abs(grad - fd))))
            return worst <= 1e-7, {"max_abs_error": worst}, 1e-7

        if oracle == "nc-torus":
            worst = 0.0
            for _ in range(20):
                v = ComplexTensor.random(frak_W(4), 4, 3, rng)
                t = TorusElement.random(4, 3, rng)
                direct = nc_capacity_eval(v, t)
                prog = GeometricProgram.from_array(tensor_to_array(v))
                via_f = float(np.exp(eval_log_f(prog, 2.0 * t.flat())))
                worst = max(worst, abs(direct - via_f) / abs(via_f))
            return worst <= 1e-10, {"max_rel_error": worst}, 1e-10

        raise SkipCheck(f"Unknown oracle '{oracle}'")

    # ------------------------------------------------------------------
    # Reporting
    # ------------------------------------------------------------------

    def summarize(self, reports=None):
        reports = self.reports if reports is None else reports
        counts = {"pass": 0, "fail": 0, "skipped": 0}
        for r in reports:
            counts[r["status"]] += 1
        counts["total"] = len(reports)
        counts["runtime"] = sum(r["runtime"] for r in reports)
        return counts

    def all_passed(self, reports=None):
        reports = self.reports if reports is None else reports
        return all(r["status"] != "fail" for r in reports)

    def print_results(self, reports=None):
        """Print a formatted verification summary."""
        reports = self.reports if reports is None else reports
        print(f"\n{'='*70}")
        print(f"🔬 VERIFICATION RESULTS (seed {self.seed})")
        print(f"{'='*70}")

        if not reports:
            print("❌ No checks were run")
            return

        for r in reports:
            mark = {"pass": "✅", "fail": "❌", "skipped": "ℹ️ "}[r["status"]]
            params = ", ".join(f"{k}={v}" for k, v in r["params"].items())
            line = f"{mark} {r['check']:<16} {params:<24} {r['runtime']:7.2f}s"
            if r["status"] == "skipped":
                line += f"  ({r['reason']})"
            elif r["status"] == "fail" and r["reason"]:
                line += f"  error: {r['reason']}"
            print(line)

        counts = self.summarize(reports)
        print(f"\n📊 Summary:")
        print(f"   Passed: {counts['pass']}")
        print(f"   Failed: {counts['fail']}")
        print(f"   Skipped: {counts['skipped']}")
        print(f"   Runtime: {counts['runtime']:.2f}s")
        print(f"{'='*70}\n")

    def export_results(self, filename=RESULTS_FILE, fmt="json", reports=None):
        """Export reports as JSON (rationals as "p/q") or CSV (one row per check and parameter set)."""
        reports = self.reports if reports is None else reports
        if fmt == "json":
            output = {
                "config": {"seed": self.seed, "tol": self.tol},
                "summary": self.summarize(reports),
                "reports": reports,
            }
            with open(filename, "w") as f:
                json.dump(output, f, indent=2, default=to_jsonable)
        elif fmt == "csv":
            reports_to_frame(reports).to_csv(filename, index=False,
                                             float_format=f"%.{CSV_SIGNIFICANT_DIGITS}g")
        else:
            raise ValueError(f"Unknown export format '{fmt}' (expected json or csv)")

        print(f"✅ Results exported to {filename}")
        return filename


def reports_to_frame(reports):
    """One row per report; params and measured values kept as JSON text."""
    return pd.DataFrame([{
        "check": r["check"],
        "params": json.dumps(r["params"], default=to_jsonable),
        "status": r["status"],
        "bound": float(r["bound"]) if isinstance(r["bound"], (int, float, Fraction)) else None,
        "runtime": r["runtime"],
        "measured": json.dumps(r["measured"], default=to_jsonable),
        "reason": r["reason"],
    } for r in reports], columns=["check", "params", "status", "bound", "runtime", "measured", "reason"])


# Example usage
if __name__ == "__main__":
    verifier = TheoremVerifier(seed=DEFAULT_SEED)
    verifier.run("kravtsov", {"n": [3, 4, 5]})
    verifier.run("margin-b", {"n": [3, 4]})
    verifier.print_results()
