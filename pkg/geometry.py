from fractions import Fraction
from math import gcd, sqrt
import numpy as np
from scipy.linalg import eigh, lstsq
from config import MIN_NORM_TOL, MIN_NORM_MAX_ITER, MARGIN_SUBSET_CAP, ZERO_SINGULAR_TOL

ANTI_CYCLE_TOL = 1e-12


def _as_points(points):
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.size == 0 or P.shape[0] == 0:
        raise ValueError("Need at least one point")
    if not np.all(np.isfinite(P)):
        raise ValueError("Points must be finite")
    return P


def _affine_minimizer(C):
    """Coefficients alpha (sum 1) of the min-norm point of aff(rows of C)."""
    k = C.shape[0]
    system = np.zeros((k + 1, k + 1))
    system[0, 1:] = 1.0
    system[1:, 0] = 1.0
    system[1:, 1:] = C @ C.T
    rhs = np.zeros(k + 1)
    rhs[0] = 1.0
    sol, _, _, _ = lstsq(system, rhs)
    return sol[1:]


def _away_step_frank_wolfe(P, lam, max_iter, tol):
    """Fallback for degenerate corrals: away-step Frank-Wolfe on ||P^T lam||^2 over the simplex."""
    x = lam @ P
    for _ in range(max_iter):
        scores = P @ x
        s = int(np.argmin(scores))
        gap_fw = x @ x - scores[s]
        if gap_fw <= tol:
            break
        active = np.where(lam > 0)[0]
        v = active[int(np.argmax(scores[active]))]
        gap_away = scores[v] - x @ x

        if gap_fw >= gap_away:
            direction = P[s] - x
            max_step = 1.0
        else:
            direction = x - P[v]
            max_step = lam[v] / (1.0 - lam[v]) if lam[v] < 1 else np.inf

        dd = direction @ direction
        if dd == 0:
            break
        step = min(max(-(x @ direction) / dd, 0.0), max_step)
        if gap_fw >= gap_away:
            lam = (1 - step) * lam
            lam[s] += step
        else:
            lam = (1 + step) * lam
            lam[v] -= step
        lam[lam < 0] = 0.0
        lam /= lam.sum()
        x = lam @ P
    return lam


def min_norm_point(points, tol=MIN_NORM_TOL, max_iter=MIN_NORM_MAX_ITER):
    """
    Wolfe's algorithm for the point of conv(points) nearest to the origin.

    Args:
        points: k x D array (one point per row)
        tol: Optimality tolerance on ||x||^2 - min_i x_i . x, relative to max ||x_i||^2
        max_iter: Cap on major plus minor cycles

    Returns:
        Dictionary with point, distance, coefficients (convex weights over the
        input rows), certificate and a converged flag
    """
    P = _as_points(points)
    k = P.shape[0]
    scale = max(1.0, float(np.max(np.sum(P * P, axis=1))))

    start = int(np.argmin(np.sum(P * P, axis=1)))
    S = [start]
    lam = np.array([1.0])
    x = P[start].copy()
    converged = False
    degenerate = False
    iterations = 0

    while iterations < max_iter:
        iterations += 1
        if x @ x <= tol * scale:
            converged = True
            break
        scores = P @ x
        j = int(np.argmin(scores))
        if x @ x - scores[j] <= tol * scale:
            converged = True
            break
        if j in S:
            degenerate = True
            break
        S.append(j)
        lam = np.append(lam, 0.0)

        while iterations < max_iter:
            C = P[S]
            alpha = _affine_minimizer(C)
            if np.all(alpha > ANTI_CYCLE_TOL):
                lam = alpha
                x = lam @ C
                break
            iterations += 1
            mask = (alpha <= ANTI_CYCLE_TOL) & (lam - alpha > 0)
            theta = float(np.min(lam[mask] / (lam[mask] - alpha[mask]))) if np.any(mask) else 1.0
            lam = theta * alpha + (1 - theta) * lam
            keep = lam > ANTI_CYCLE_TOL
            if np.all(keep):
                keep[int(np.argmin(lam))] = False
            S = [s for s, kp in zip(S, keep) if kp]
            lam = lam[keep]
            lam /= lam.sum()
            x = lam @ P[S]

    coefficients = np.zeros(k)
    coefficients[S] = lam
    if degenerate:
        coefficients = _away_step_frank_wolfe(P, coefficients, max_iter, tol * scale)
        x = coefficients @ P
        scores = P @ x
        converged = x @ x - float(np.min(scores)) <= tol * scale or x @ x <= tol * scale

    distance = float(np.linalg.norm(x))
    if distance <= sqrt(tol * scale):
        certificate = {"type": "zero-in-hull"}
    else:
        h = x / distance
        certificate = {"type": "separating", "h": h, "margin": float(np.min(P @ h))}

    return {
        "point": x,
        "distance": distance,
        "coefficients": coefficients,
        "certificate": certificate,
        "converged": converged,
        "iterations": iterations,
    }


def separation_certificate(rational_points, point):
    """
    Exact check of the functional h = point (rationalized) against every input.

    Returns:
        Dictionary with h (Fractions), the exact minimum h . x_i and, when it is
        positive, a float lower bound for dist(0, conv) = min_i h . x_i / ||h||
    """
    h = [Fraction(float(c)) for c in point]
    values = [sum((hc * Fraction(xc) for hc, xc in zip(h, row)), Fraction(0)) for row in rational_points]
    margin = min(values)
    hh = sum(c * c for c in h)
    valid = margin > 0 and hh > 0
    return {
        "h": h,
        "min_value": margin,
        "valid": valid,
        "distance_lower_bound": float(margin) / sqrt(float(hh)) if valid else 0.0,
    }


# ============================================================================
# EXACT AFFINE MEMBERSHIP
# ============================================================================

def _integer_rows(rational_points):
    """Scale every row by the lcm of all denominators, giving integers."""
    rows = [[Fraction(c) for c in row] for row in rational_points]
    denom = 1
    for row in rows:
        for c in row:
            denom = denom * c.denominator // gcd(denom, c.denominator)
    return [[int(c * denom) for c in row] for row in rows], denom


def _bareiss_solve(A, b):
    """
    Solve A x = b over the rationals with fraction-free elimination.

    Args:
        A: m x k integer matrix (list of rows)
        b: length-m integer vector

    Returns:
        One solution as Fractions (free variables 0) or None when inconsistent
    """
    m, k = len(A), len(A[0]) if A else 0
    M = [list(A[i]) + [b[i]] for i in range(m)]
    prev = 1
    r = 0
    pivots = []
    for c in range(k):
        piv = next((i for i in range(r, m) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        for i in range(r + 1, m):
            for j in range(c + 1, k + 1):
                M[i][j] = (M[r][c] * M[i][j] - M[i][c] * M[r][j]) // prev
            M[i][c] = 0
        prev = M[r][c]
        pivots.append(c)
        r += 1
        if r == m:
            break

    if any(M[i][k] != 0 for i in range(r, m)):
        return None

    x = [Fraction(0)] * k
    for row in range(len(pivots) - 1, -1, -1):
        c = pivots[row]
        acc = Fraction(M[row][k])
        for j in range(c + 1, k):
            if M[row][j]:
                acc -= M[row][j] * x[j]
        x[c] = acc / M[row][c]
    return x


def in_affine_hull_zero(rational_points):
    """
    Exact decision of 0 in aff(points): solve sum lam_i x_i = 0, sum lam_i = 1.

    Returns:
        Dictionary with member and, when member, affine coefficients summing to 1
    """
    X, _ = _integer_rows(rational_points)
    k, D = len(X), len(X[0])
    A = [[X[i][r] for i in range(k)] for r in range(D)] + [[1] * k]
    b = [0] * D + [1]
    lam = _bareiss_solve(A, b)
    return {"member": lam is not None, "coefficients": lam}


# ============================================================================
# EXACT CONVEX MEMBERSHIP (PHASE-1 SIMPLEX, BLAND'S RULE)
# ============================================================================

def in_convex_hull_zero(rational_points):
    """
    Exact LP feasibility of sum lam_i x_i = 0, sum lam_i = 1, lam >= 0.

    Phase-1 simplex in Fractions with artificial variables and Bland's rule.
    When infeasible, h = -y[:D] from the phase-1 duals satisfies h . x_i >= w* > 0.

    Returns:
        Dictionary with member, coefficients (when member), separator h and
        margin w* (when not member)
    """
    X = [[Fraction(c) for c in row] for row in rational_points]
    k, D = len(X), len(X[0])
    m = D + 1
    width = k + m

    # rows: [A | I | b]
    tableau = []
    for r in range(m):
        coeffs = [X[i][r] for i in range(k)] if r < D else [Fraction(1)] * k
        unit = [Fraction(1) if j == r else Fraction(0) for j in range(m)]
        rhs = Fraction(0) if r < D else Fraction(1)
        tableau.append(coeffs + unit + [rhs])
    basis = [k + r for r in range(m)]

    costs = [Fraction(0)] * k + [Fraction(1)] * m
    reduced = list(costs) + [Fraction(0)]
    for r in range(m):
        for j in range(width + 1):
            reduced[j] -= tableau[r][j]

    while True:
        entering = next((j for j in range(width) if reduced[j] < 0), None)
        if entering is None:
            break
        leaving, best = None, None
        for r in range(m):
            a = tableau[r][entering]
            if a > 0:
                ratio = tableau[r][width] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leaving]):
                    leaving, best = r, ratio
        if leaving is None:
            break

        pivot = tableau[leaving][entering]
        tableau[leaving] = [v / pivot for v in tableau[leaving]]
        for r in range(m):
            if r != leaving and tableau[r][entering] != 0:
                factor = tableau[r][entering]
                tableau[r] = [v - factor * w for v, w in zip(tableau[r], tableau[leaving])]
        factor = reduced[entering]
        reduced = [v - factor * w for v, w in zip(reduced, tableau[leaving])]
        basis[leaving] = entering

    infeasibility = -reduced[width]
    if infeasibility > 0:
        y = [1 - reduced[k + r] for r in range(m)]
        h = [-c for c in y[:D]]
        return {"member": False, "coefficients": None, "separator": h, "margin": infeasibility}

    lam = [Fraction(0)] * k
    for r, var in enumerate(basis):
        if var < k:
            lam[var] = tableau[r][width]
    return {"member": True, "coefficients": lam, "separator": None, "margin": Fraction(0)}


# ============================================================================
# DISTANCES AND MARGINS
# ============================================================================

def dist_to_affine_hull(target, points):
    """
    Least-squares distance from target to aff(points).

    Rank-deficient spans are handled by the lstsq minimum-norm solution.

    Returns:
        Dictionary with distance and foot point
    """
    P = _as_points(points)
    target = np.asarray(target, dtype=float)
    base = P[0]
    directions = (P[1:] - base).T
    if directions.shape[1] == 0:
        foot = base.copy()
    else:
        coeffs, _, _, _ = lstsq(directions, target - base)
        foot = base + directions @ coeffs
    return {"distance": float(np.linalg.norm(target - foot)), "foot": foot}


def affine_hull_distance_facet(ws, target):
    """dist_to_affine_hull for a WeightSet and a WeightVector or array target."""
    vec = target.to_array() if hasattr(target, "to_array") else np.asarray(target, dtype=float)
    return dist_to_affine_hull(vec, ws.to_matrix())


def margin_bruteforce(ws, cap=MARGIN_SUBSET_CAP):
    """
    Minimum positive dist(0, conv(S)) over every nonempty subset S of ws.

    Subsets are visited by increasing bitmask; the first minimizer wins ties.
    Membership is decided exactly, distances by min_norm_point.
    """
    k = len(ws)
    if k > cap:
        raise ValueError(f"margin_bruteforce enumerates 2^{k} subsets, cap is {cap} elements")

    rows = ws.rational_rows()
    floats = ws.to_matrix()
    best, best_mask = None, None
    for mask in range(1, 2 ** k):
        members = [i for i in range(k) if mask >> i & 1]
        if in_convex_hull_zero([rows[i] for i in members])["member"]:
            continue
        dist = min_norm_point(floats[members])["distance"]
        if best is None or dist < best:
            best, best_mask = dist, mask

    subset = [i for i in range(k) if best_mask is not None and best_mask >> i & 1]
    return {"margin": best, "mask": best_mask, "subset": subset, "subsets_checked": 2 ** k - 1}


def smallest_nonzero_singular_value(M, zero_tol=ZERO_SINGULAR_TOL):
    """
    Smallest nonzero singular value of M from the eigenvalues of M^T M.

    Gram eigenvalues below zero_tol times the largest one count as zero.

    Returns:
        Dictionary with sigma_min, zero_count and all singular values (ascending)
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("Matrix entries must be finite")
    eig = eigh(M.T @ M, eigvals_only=True)
    threshold = zero_tol * max(1.0, float(np.max(eig)))
    zero = eig <= threshold
    singular = np.sqrt(np.clip(eig, 0.0, None))
    nonzero = singular[~zero]
    return {
        "sigma_min": float(np.min(nonzero)) if nonzero.size else 0.0,
        "zero_count": int(np.sum(zero)),
        "singular_values": singular,
    }
