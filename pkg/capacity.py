import numpy as np
import pandas as pd
from scipy.special import logsumexp, softmax
from config import (
    CAPACITY_TOL, CAPACITY_MAX_ITER, CAPACITY_FLOOR, ARMIJO_FACTOR, ARMIJO_C,
    MIN_STEP, MAX_STEP, STALL_WINDOW, STALL_RTOL, STALL_GAP_RTOL, BALL_TOL, BALL_MAX_ITER,
    SINKHORN_TOL, SINKHORN_MAX_SWEEPS, PROBE_R_MAX, PROBE_R_STEP,
    CSV_SIGNIFICANT_DIGITS, VERBOSE, PRINT_EVERY,
)
from weight_core import SparseArray, marginals


class GeometricProgram:
    """
    f_p(x) = sum_w p_w exp(w . x) over a weight set.

    Args:
        support: WeightSet of the exponents
        coefficients: Positive reals aligned with support
    """

    def __init__(self, support, coefficients, label=""):
        coefficients = np.asarray(coefficients, dtype=float)
        if len(support) == 0:
            raise ValueError("GeometricProgram needs a nonempty support")
        if len(coefficients) != len(support):
            raise ValueError(f"{len(coefficients)} coefficients for a support of size {len(support)}")
        if np.any(coefficients <= 0) or not np.all(np.isfinite(coefficients)):
            raise ValueError("GeometricProgram coefficients must be positive and finite")

        self.support = support
        self.coefficients = coefficients
        self.label = label or support.label
        self.W = support.to_matrix()
        self.log_coefficients = np.log(coefficients)

    @classmethod
    def from_array(cls, arr):
        """Program of a nonnegative array: one term per support index, weights in epsilon coordinates."""
        if len(arr) == 0:
            raise ValueError("Cannot build a program from the zero array")
        return cls(arr.weight_set(), arr.coefficients(), label=arr.label)

    @property
    def dim(self):
        return self.W.shape[1]

    def coefficient_map(self):
        return dict(zip(self.support.elements, self.coefficients))

    def __repr__(self):
        return f"GeometricProgram(label='{self.label}', terms={len(self.support)}, dim={self.dim})"


def eval_log_f(prog, x):
    """log f_p(x) with a max-shifted log-sum-exp."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("eval_log_f needs a finite point")
    return float(logsumexp(prog.log_coefficients + prog.W @ x))


def grad_log_f(prog, x):
    """Softmax-weighted average of the support weights; lies in conv(support)."""
    x = np.asarray(x, dtype=float)
    return softmax(prog.log_coefficients + prog.W @ x) @ prog.W


def eval_f(prog, x):
    return float(np.exp(eval_log_f(prog, x)))


def _value_and_grad(prog, x):
    z = prog.log_coefficients + prog.W @ x
    val = logsumexp(z)
    return float(val), np.exp(z - val) @ prog.W


def project_ball(x, radius):
    norm = np.linalg.norm(x)
    if radius is None or norm <= radius:
        return x
    if radius == 0:
        return np.zeros_like(x)
    return x * (radius / norm)


# ============================================================================
# SPECTRAL PROJECTED GRADIENT
# ============================================================================

def _stalled(history, gaps, val):
    if gaps is not None:
        before = gaps[-STALL_WINDOW - 1]
        return before - gaps[-1] <= STALL_GAP_RTOL * before
    return abs(history[-STALL_WINDOW - 1] - val) <= STALL_RTOL * max(1.0, abs(val))


def _descend(prog, x0, radius, tol, max_iter, floor=None, target=None, verbose=False):
    """
    Projected gradient on log f_p with Barzilai-Borwein steps and Armijo backtracking.

    radius=None means unconstrained. Stops on stationarity, stall over
    STALL_WINDOW iterations, a value below `floor`, or the iteration cap.
    With a known infimum `target`, stall is read off the gap f - target
    (relative drop below STALL_GAP_RTOL per window), and a gap at or below
    zero counts as converged.
    """
    x = project_ball(np.zeros(prog.dim) if x0 is None else np.asarray(x0, dtype=float).copy(), radius)
    val, g = _value_and_grad(prog, x)
    step = 1.0
    history = [val]
    gaps = [np.exp(val) - target] if target is not None else None
    status = "max_iter"
    log_floor = np.log(floor) if floor else None

    if verbose:
        print(f"{'It.':>7s}|{'log f':>14s}|{'stationarity':>14s}")
        print("-" * 38)

    iterations = 0
    while iterations < max_iter:
        stationarity = np.linalg.norm(x - project_ball(x - g, radius)) if radius is not None else np.linalg.norm(g)
        if stationarity <= tol:
            status = "converged"
            break
        if log_floor is not None and val < log_floor:
            status = "capacity_zero"
            break
        if gaps is not None and gaps[-1] <= 0:
            status = "converged"
            break

        t = step
        while True:
            x_new = project_ball(x - t * g, radius)
            val_new, g_new = _value_and_grad(prog, x_new)
            if val_new <= val + ARMIJO_C * min(g @ (x_new - x), 0.0):
                break
            t *= ARMIJO_FACTOR
            if t < MIN_STEP:
                x_new, val_new, g_new = x, val, g
                break

        s, y = x_new - x, g_new - g
        sy = s @ y
        step = float(np.clip((s @ s) / sy, MIN_STEP, MAX_STEP)) if sy > 0 else min(2 * t, MAX_STEP)
        x, val, g = x_new, val_new, g_new
        history.append(val)
        iterations += 1
        if gaps is not None:
            gaps.append(np.exp(val) - target)

        if verbose and iterations % PRINT_EVERY == 0:
            print(f"{iterations:7d}|{val:14.6e}|{stationarity:14.6e}")

        if t < MIN_STEP or (len(history) > STALL_WINDOW and _stalled(history, gaps, val)):
            status = "stalled"
            break

    return {"x": x, "log_value": val, "grad": g, "iterations": iterations, "status": status}


def capacity_gd(prog, tol=CAPACITY_TOL, max_iter=CAPACITY_MAX_ITER, x0=None, verbose=VERBOSE):
    """
    Approximate capa(p) = inf f_p by descent on log f_p.

    Args:
        prog: GeometricProgram
        tol: Gradient-norm target for ||grad log f_p||
        max_iter: Iteration cap
        x0: Optional warm start

    Returns:
        Dictionary with value, argmin, grad_norm (at argmin), iterations,
        converged and a capacity_zero flag when the value falls below CAPACITY_FLOOR
    """
    if tol <= 0:
        raise ValueError(f"capacity_gd needs tol > 0, got {tol}")

    run = _descend(prog, x0, None, tol, max_iter, floor=CAPACITY_FLOOR, verbose=verbose)
    grad_norm = float(np.linalg.norm(run["grad"]))
    return {
        "value": float(np.exp(run["log_value"])),
        "log_value": run["log_value"],
        "argmin": run["x"],
        "grad_norm": grad_norm,
        "iterations": run["iterations"],
        "converged": run["status"] == "converged",
        "capacity_zero": run["status"] == "capacity_zero",
        "status": run["status"],
    }


def capacity_ball(prog, R, tol=BALL_TOL, max_iter=BALL_MAX_ITER, x0=None, target=None, verbose=False):
    """
    Minimum of f_p over the Euclidean ball of radius R (radial projection).

    target is the known capacity, if any; it switches stall detection to the gap f - target.
    """
    if R < 0:
        raise ValueError(f"capacity_ball needs R >= 0, got {R}")
    if R == 0:
        return {"value": eval_f(prog, np.zeros(prog.dim)), "argmin": np.zeros(prog.dim),
                "iterations": 0, "converged": True, "radius": 0.0}

    run = _descend(prog, x0, R, tol, max_iter, target=target, verbose=verbose)
    return {
        "value": float(np.exp(run["log_value"])),
        "argmin": run["x"],
        "iterations": run["iterations"],
        "converged": run["status"] in ("converged", "stalled"),
        "radius": float(R),
    }


def directional_profile(prog, v, ts):
    """f_p(-t v / ||v||) for every t in ts."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("directional_profile needs a nonzero direction")
    u = v / norm
    return [eval_f(prog, -t * u) for t in ts]


def profile_slope(ts, values, offset):
    """Least-squares slope of log(values - offset) against t."""
    ts = np.asarray(ts, dtype=float)
    logs = np.log(np.asarray(values, dtype=float) - offset)
    slope, _ = np.polyfit(ts, logs, 1)
    return float(slope)


def scaling_certificate(prog, bound, tol=CAPACITY_TOL, max_iter=CAPACITY_MAX_ITER):
    """
    Certify capa(p) > 0 by finding x with ||grad log f_p(x)|| <= bound.

    A bound no larger than the margin of the support makes this a proof;
    bound <= 0 is always inconclusive.
    """
    if bound <= 0:
        return {"status": "inconclusive", "witness": None, "grad_norm": None, "bound": bound}

    result = capacity_gd(prog, tol=max(bound, tol), max_iter=max_iter)
    certified = result["grad_norm"] <= bound
    return {
        "status": "certified-positive" if certified else "inconclusive",
        "witness": result["argmin"],
        "grad_norm": result["grad_norm"],
        "bound": bound,
        "value": result["value"],
    }


# ============================================================================
# SINKHORN FOR d-ARRAYS
# ============================================================================

def marginal_residual(dense):
    """n * max over axes and slices of |slice sum - 1/n|; dense must have unit total."""
    n, d = dense.shape[0], dense.ndim
    worst = 0.0
    for k in range(d):
        axes = tuple(a for a in range(d) if a != k)
        worst = max(worst, float(np.max(np.abs(dense.sum(axis=axes) - 1.0 / n))))
    return n * worst


def sinkhorn_array(a, tol=SINKHORN_TOL, max_sweeps=SINKHORN_MAX_SWEEPS, verbose=VERBOSE):
    """
    Alternating marginal normalization of a nonnegative d-array.

    Each sweep rescales the slices of axis 1, 2, ..., d in turn to sum 1/n.

    Returns:
        Dictionary with the scaled SparseArray, the residual trace (sweep 0 is
        the input), sweeps run and a converged flag
    """
    dense = a.to_dense() if isinstance(a, SparseArray) else np.asarray(a, dtype=float)
    total = dense.sum()
    if total <= 0:
        raise ValueError("sinkhorn_array needs a nonzero array")
    dense = dense / total
    n, d = dense.shape[0], dense.ndim

    residuals = [marginal_residual(dense)]
    sweep = 0
    while residuals[-1] > tol and sweep < max_sweeps:
        sweep += 1
        for k in range(d):
            axes = tuple(ax for ax in range(d) if ax != k)
            sums = dense.sum(axis=axes)
            factors = np.divide(1.0 / n, sums, out=np.ones_like(sums), where=sums > 0)
            shape = [1] * d
            shape[k] = n
            dense = dense * factors.reshape(shape)
        residuals.append(marginal_residual(dense))
        if verbose and sweep % 20 == 0:
            print(f"{sweep:5d}|{residuals[-1]:8e}|")

    return {
        "array": SparseArray.from_dense(dense, label=getattr(a, "label", "")),
        "residuals": residuals,
        "sweeps": sweep,
        "converged": residuals[-1] <= tol,
    }


def is_tristochastic(arr):
    """Every axis slice of an exact array sums to 1."""
    return all(all(s == 1 for s in axis) for axis in marginals(arr))


# ============================================================================
# ROUNDING AND PADDING BOUNDS
# ============================================================================

def _aligned(p_prog, q_prog):
    q_map = q_prog.coefficient_map()
    if set(q_map) != set(p_prog.support.elements):
        raise ValueError("Programs have different supports")
    q = np.array([q_map[w] for w in p_prog.support.elements])
    return p_prog.coefficients, q


def rounding_capacity_bound(p_prog, q_prog, capa_p=None):
    """
    log capa q >= log capa p - M_0 ||p - q||_inf with M_0 = max 1/q.

    Args:
        p_prog, q_prog: Programs on the same support
        capa_p: Reference capacity of p (solved when omitted)
    """
    p, q = _aligned(p_prog, q_prog)
    if capa_p is None:
        capa_p = capacity_gd(p_prog)["value"]
    M0 = float(np.max(1.0 / q))
    sup_diff = float(np.max(np.abs(p - q)))
    log_capa_p = float(np.log(capa_p))
    return {"bound": log_capa_p - M0 * sup_diff, "log_capa_p": log_capa_p, "M0": M0, "sup_diff": sup_diff}


def rounding_ball_bound(p_prog, q_prog, eps, ball_value_p, capa_p, capa_q):
    """
    Lower bound for inf over a ball of f_q from the same ball for f_p.

    With M = max over the support of 1/q_w and 1/p_w, and the ball value of
    f_p at least (1 + eps) capa p:
        inf_ball f_q >= ((1 + eps)(1 - M ||p-q||_inf) - M ||p-q||_1) capa q

    direct_bound is the pointwise transfer (1 - M ||p-q||_inf) * ball value of f_p.
    """
    p, q = _aligned(p_prog, q_prog)
    diff = np.abs(p - q)
    sup_diff, l1_diff = float(np.max(diff)), float(np.sum(diff))
    M = float(max(np.max(1.0 / q), np.max(1.0 / p)))
    return {
        "bound": ((1 + eps) * (1 - M * sup_diff) - M * l1_diff) * capa_q,
        "direct_bound": (1 - M * sup_diff) * ball_value_p,
        "hypothesis_holds": ball_value_p >= (1 + eps) * capa_p,
        "sup_diff": sup_diff,
        "l1_diff": l1_diff,
        "M": M,
    }


def padded_capacity(capa_p, t, n):
    """Capacity of pad_diameter_array(p, n) when p lives on [t]^d."""
    return capa_p ** (t / n)


def padded_point(y, f_p, t, n, d):
    """
    Lift a point y of f_p (p on [t]^d) to pad_diameter_array(p, n).

    Each block gets y centred plus a shared shift on [t] and the opposite mass
    on the tail, tuned so that f_q at the lifted point equals f_p(y)^{t/n}.

    Args:
        y: Point in R^{d t} (epsilon coordinates of p)
        f_p: f_p(y)
        t: Size of p
        n: Padded size

    Returns:
        Point in R^{d n}
    """
    y = np.asarray(y, dtype=float).reshape(d, t)
    if n == t:
        return y.reshape(-1).copy()
    shift = -(n - t) / n * np.log(f_p) / d
    tail = -t * shift / (n - t)
    head = y - y.mean(axis=1, keepdims=True) + shift
    return np.hstack([head, np.full((d, n - t), tail)]).reshape(-1)


def padding_eps(capa_p, eps, t, n):
    """Accuracy on the padded array matching accuracy eps on the original."""
    return (1 - capa_p) * eps / (1 - capa_p ** (t / n))


# ============================================================================
# DIAMETER PROBE
# ============================================================================

def default_radii(r_max=PROBE_R_MAX, step=PROBE_R_STEP):
    return list(np.arange(0.0, r_max + step / 2, step))


def diameter_probe(prog, eps, radii=None, capa=None, direction=None, stop_when_reached=True, verbose=False):
    """
    Tabulate min_{||x|| <= R} f_p along a radius grid.

    Each radius warm-starts from the previous argmin, which stays feasible,
    so achieved values are nonincreasing. With a direction v, the point
    -R v / ||v|| is a second start and the lower of the two is used.

    Args:
        prog: GeometricProgram
        eps: Target accuracy above capacity
        radii: Increasing radius grid (default 0..PROBE_R_MAX)
        capa: Reference capacity (solved with capacity_gd when omitted)
        direction: Optional descent direction, as in directional_profile
        stop_when_reached: End the sweep at the first radius meeting the target

    Returns:
        Dictionary with radii, achieved, eps, capacity and R_needed (None when not reached)
    """
    if eps <= 0:
        raise ValueError(f"diameter_probe needs eps > 0, got {eps}")
    radii = default_radii() if radii is None else sorted(float(r) for r in radii)
    if capa is None:
        capa = capacity_gd(prog)["value"]

    u = None
    if direction is not None:
        u = np.asarray(direction, dtype=float)
        if np.linalg.norm(u) == 0:
            raise ValueError("diameter_probe needs a nonzero direction")
        u = u / np.linalg.norm(u)

    achieved, visited = [], []
    x = np.zeros(prog.dim)
    R_needed = None
    for R in radii:
        if u is not None and eval_log_f(prog, -R * u) < eval_log_f(prog, x):
            x = -R * u
        result = capacity_ball(prog, R, x0=x, target=capa)
        value = result["value"]
        x = result["argmin"]
        achieved.append(value)
        visited.append(R)
        if verbose:
            print(f"   R={R:8.3f}  achieved={value:.12f}  gap={value - capa:.3e}")
        if R_needed is None and value <= capa + eps:
            R_needed = R
            if stop_when_reached:
                break

    return {"radii": visited, "achieved": achieved, "eps": eps, "capacity": capa, "R_needed": R_needed}


def probe_to_frame(result):
    return pd.DataFrame({
        "R": result["radii"],
        "achieved": result["achieved"],
        "gap": [a - result["capacity"] for a in result["achieved"]],
    })


def export_probe_csv(result, filename):
    """Write a probe result as CSV with header R,achieved,gap."""
    frame = probe_to_frame(result)
    frame.to_csv(filename, index=False, float_format=f"%.{CSV_SIGNIFICANT_DIGITS}g")
    print(f"✅ Probe exported to {filename}")
    return filename
