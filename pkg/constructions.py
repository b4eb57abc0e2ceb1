from fractions import Fraction
from itertools import combinations_with_replacement
from math import isqrt
import numpy as np
from config import ROUNDING_BITS
from weight_core import (
    WeightVector, WeightSet, SparseArray, combination, epsilon,
    weights_of_indices, _epsilon_scaled,
)
from tensor_ops import ComplexTensor


def _pow2(k):
    """Exact 2^k for any integer k."""
    return Fraction(2) ** k


# ============================================================================
# QUBIT MATRICES (n = 2)
# ============================================================================

A2 = np.array([[1, 1], [2, 1]], dtype=int)
B1 = np.array([[1, 1], [2, 2]], dtype=int)
B2 = np.array([[1, 2], [2, 2]], dtype=int)
B3 = np.array([[2, 1], [1, 1]], dtype=int)


def qubit_matrix(r):
    """
    Build A_{2r} recursively from A_2 and the blocks B_1, B_2, B_3.

    A_{2k+2} = [[A_{2k}, B_1 stacked k times], [B_2 repeated k times, B_3]]

    Args:
        r: Number of 2x2 block rows (r >= 1)

    Returns:
        2r x 2r integer matrix with entries in {1, 2}
    """
    if r < 1:
        raise ValueError(f"qubit_matrix needs r >= 1, got {r}")

    A = A2.copy()
    for k in range(1, r):
        right = np.vstack([B1] * k)
        bottom = np.hstack([B2] * k + [B3])
        A = np.vstack([np.hstack([A, right]), bottom])
    return A


def chi(i):
    """1 for odd i, 2 for even i."""
    return 1 if i % 2 == 1 else 2


def qubit_indices(d):
    """Index tuples of Gamma_{2,d}: rows of A_{2r}, with chi(i) appended when d is odd."""
    if d < 2:
        raise ValueError(f"qubit construction needs d >= 2, got {d}")
    r = d // 2
    A = qubit_matrix(r)
    rows = [tuple(int(a) for a in row) for row in A]
    if d % 2 == 1:
        rows = [row + (chi(i),) for i, row in enumerate(rows, start=1)]
    return rows


def gamma_qubit(d):
    """Gamma_{2,d} for d >= 3."""
    if d < 3:
        raise ValueError(f"gamma_qubit needs d >= 3, got {d}")
    return weights_of_indices(qubit_indices(d), 2, d, label=f"Gamma_2,{d}")


def qubit_witness(d):
    """
    Convex combination of Gamma_{2,d} landing on 2^{-r+1}(0, ..., 0, eps_1[, 0]).

    Rows 2l-1 and 2l get 2^{-l-1} for l < r, the last pair gets 2^{-r}.

    Returns:
        Dictionary with exact coefficients, the combined point and its squared norm
    """
    ws = gamma_qubit(d)
    r = d // 2
    coeffs = []
    for l in range(1, r + 1):
        c = _pow2(-l - 1) if l < r else _pow2(-r)
        coeffs.extend([c, c])
    point = combination(ws, coeffs)
    return {
        "weights": ws,
        "coefficients": coeffs,
        "point": point,
        "norm_sq": sum(c * c for c in point),
        "bound": 2.0 ** (-d / 2 + 1),
    }


# ============================================================================
# KRAVTSOV ARRAY AND GAMMA_{n,3}
# ============================================================================

def kravtsov_lambda(n):
    """
    The Kravtsov tristochastic vertex with an exponentially small entry.

    Support is frak_W(n) plus (1,1,1); every axis slice sums to 1 and the
    total mass is n.

    Args:
        n: Side length (n >= 3)

    Returns:
        SparseArray over [n]^3 with exact Fraction entries
    """
    if n < 3:
        raise ValueError(f"kravtsov_lambda needs n >= 3, got {n}")

    entries = {(1, 1, 1): _pow2(-n + 1)}
    for s in range(2, n + 1):
        entries[(s, 1, s)] = _pow2(-n + s - 1)
        entries[(s, s, 1)] = _pow2(-n + s - 1)
    for s in range(1, n):
        entries[(s, s + 1, s + 1)] = 1 - _pow2(-n + s)
    return SparseArray(n, 3, entries, label=f"kravtsov_{n}")


def frak_W(n):
    """Index set of (s,1,s), (s,s,1), (s-1,s,s) for s = 2..n, in that order."""
    if n < 3:
        raise ValueError(f"frak_W needs n >= 3, got {n}")
    tuples = []
    for s in range(2, n + 1):
        tuples.extend([(s, 1, s), (s, s, 1), (s - 1, s, s)])
    return tuples


def gamma_3(n):
    return weights_of_indices(frak_W(n), n, 3, label=f"Gamma_{n},3")


def kravtsov_witness(n):
    """
    Kravtsov weights restricted to Gamma_{n,3}, normalized to a convex combination.

    The full lambda combination is 0, so dropping (1,1,1) leaves
    -(lambda_111 / c)(eps_1, eps_1, eps_1) with c = n - lambda_111.
    """
    lam = kravtsov_lambda(n)
    ws = gamma_3(n)
    c = n - lam.entries[(1, 1, 1)]
    coeffs = [lam.entries[idx] / c for idx in ws.index_tuples]
    point = combination(ws, coeffs)
    return {
        "weights": ws,
        "coefficients": coeffs,
        "point": point,
        "norm_sq": sum(x * x for x in point),
        "bound": 2.0 ** (-n + 1),
    }


# ============================================================================
# STACKED SIGMA CONSTRUCTION
# ============================================================================

def mod_adjusted(x, n):
    """x mod n with representatives in [1, n]."""
    return (x - 1) % n + 1


class SigmaTable:
    """
    sigma: [rn] -> [n]^{2r-1} built from shifted block maps.

    sigma_i(j) = ceil((j + i - 1) / r) mod' n for i = 1..r and
    sigma_{r+i} = sigma_1 o (r-i+1  r+1) for i = 1..r.
    """

    def __init__(self, n, r):
        if n < 3 or r < 2:
            raise ValueError(f"sigma_table needs n >= 3 and r >= 2, got n={n}, r={r}")
        self.n = n
        self.r = r
        self.size = r * n

        components = []
        for i in range(1, r + 1):
            components.append([mod_adjusted(-(-(j + i - 1) // r), n) for j in range(1, self.size + 1)])
        first = components[0]
        for i in range(1, r + 1):
            a, b = r - i + 1, r + 1
            swapped = []
            for j in range(1, self.size + 1):
                jj = b if j == a else a if j == b else j
                swapped.append(first[jj - 1])
            components.append(swapped)
        self.components = components

    def component(self, k, j):
        """sigma_k(j), both 1-based."""
        return self.components[k - 1][j - 1]

    def __call__(self, j):
        return tuple(self.components[k][j - 1] for k in range(2 * self.r - 1))

    def is_injective(self):
        images = [self(j) for j in range(1, self.size + 1)]
        return len(set(images)) == len(images)

    def value_counts_ok(self):
        """Every component attains each value of [n] exactly r times."""
        for comp in self.components[:2 * self.r - 1]:
            counts = [0] * self.n
            for v in comp:
                counts[v - 1] += 1
            if any(c != self.r for c in counts):
                return False
        return True


def sigma_table(n, r):
    return SigmaTable(n, r)


def frak_J(r):
    """(s,1,s) and (s,s,1) for 2 <= s <= r."""
    return {t for s in range(2, r + 1) for t in ((s, 1, s), (s, s, 1))}


def stacked_indices(n, r):
    sigma = sigma_table(n, r)
    removed = frak_J(r)
    return [sigma(i) + sigma(j) + sigma(k) for (i, j, k) in frak_W(r * n) if (i, j, k) not in removed]


def gamma_stacked(n, r):
    """Gamma_{n,6r-3} with 3(rn-1) - 2(r-1) elements."""
    return weights_of_indices(stacked_indices(n, r), n, 6 * r - 3, label=f"Gamma_{n},{6 * r - 3}")


def stacked_witness(n, r):
    """Kravtsov lambda of side rn restricted to frak_W(rn) minus frak_J(r), normalized."""
    lam = kravtsov_lambda(r * n)
    removed = frak_J(r)
    kept = [t for t in frak_W(r * n) if t not in removed]
    raw = [lam.entries[t] for t in kept]
    c = sum(raw)
    coeffs = [x / c for x in raw]
    ws = gamma_stacked(n, r)
    point = combination(ws, coeffs)
    return {
        "weights": ws,
        "coefficients": coeffs,
        "point": point,
        "norm_sq": sum(x * x for x in point),
        "bound": (6 ** 0.5 / ((n - 1) * r ** 0.5)) * 2.0 ** (-r * (n - 1) + 1),
    }


# ============================================================================
# GAMMA_{n,4} AND PADDING
# ============================================================================

def gamma_4(n):
    """(eps_i, eps_j, eps_k, eps_i) for (i,j,k) in frak_W(n)."""
    indices = [(i, j, k, i) for (i, j, k) in frak_W(n)]
    return weights_of_indices(indices, n, 4, label=f"Gamma_{n},4")


def pad_indices(indices, r, n):
    """Index-level product with Delta_r: (x, i, ..., i) for every i in [n]."""
    return [tuple(idx) + (i,) * r for idx in indices for i in range(1, n + 1)]


def pad_weightset(ws, r):
    """
    Product of ws with Delta_r = {(eps_i, ..., eps_i)}.

    Args:
        ws: Nonempty WeightSet of dims (n, d)
        r: Number of appended blocks (r >= 1)

    Returns:
        WeightSet of dims (n, d + r) with |ws| * n elements
    """
    if len(ws) == 0:
        raise ValueError("pad_weightset needs a nonempty weight set")
    if r < 1:
        raise ValueError(f"pad_weightset needs r >= 1, got {r}")

    n = ws.n
    elements, indices = [], []
    for pos, w in enumerate(ws):
        for i in range(1, n + 1):
            elements.append(WeightVector(n, ws.d + r, list(w.scaled) + _epsilon_scaled(n, (i,) * r)))
            if ws.index_tuples is not None:
                indices.append(ws.index_tuples[pos] + (i,) * r)
    return WeightSet(n, ws.d + r, elements, label=f"{ws.label}xDelta_{r}",
                     index_tuples=indices if ws.index_tuples is not None else None)


# ============================================================================
# POLYNOMIAL SCALING
# ============================================================================

def omega_poly(n, d):
    """
    Weights -alpha + (d/n) 1_n of degree-d forms in n variables, |alpha| = d.

    Ordered by combinations_with_replacement, so alpha = (d, 0, ..., 0) comes first.
    """
    if d < 1 or n % d != 0:
        raise ValueError(f"omega_poly needs d | n, got n={n}, d={d}")

    elements = []
    for combo in combinations_with_replacement(range(n), d):
        alpha = [0] * n
        for i in combo:
            alpha[i] += 1
        elements.append(WeightVector(n, 1, [-n * a + d for a in alpha]))
    return WeightSet(n, 1, elements, label=f"Omega'_{n},{d}")


def embed_tensor_weights(ws):
    """Reshape -ws from (R^m)^d into R^{dm}; an isometry onto a subset of omega_poly(dm, d)."""
    n = ws.n * ws.d
    elements = [WeightVector(n, 1, [-ws.d * s for s in w.scaled]) for w in ws]
    return WeightSet(n, 1, elements, label=f"-{ws.label}->R^{n}")


def poly_contains(poly, ws):
    return ws.issubset(poly)


# ============================================================================
# QUIVER CONSTRUCTION
# ============================================================================

def _quiver_level_weight(n, d, block, i, sign_first):
    """sign_first * eps_i at `block`, -sign_first * eps_n at block + 1, zero elsewhere."""
    scaled = [0] * (n * d)
    first = epsilon(n, i).scaled
    last = epsilon(n, n).scaled
    for a in range(n):
        scaled[(block - 1) * n + a] = sign_first * first[a]
        scaled[block * n + a] = -sign_first * last[a]
    return WeightVector(n, d, scaled)


def quiver_weights(n, d):
    """
    Gamma_d with exact convex coefficients reproducing x_d.

    Gamma_2 = {(eps_i, -eps_j)}; Gamma_d prepends ((-1)^d eps_i, (-1)^{d-1} eps_n, 0, ...)
    for i in [n-1] to {0} x Gamma_{d-1}.

    Returns:
        (elements, coefficients, lambda_d)
    """
    if n < 2 or d < 2:
        raise ValueError(f"quiver needs n >= 2 and d >= 2, got n={n}, d={d}")

    elements = []
    for i in range(1, n):
        for j in range(1, n + 1):
            elements.append(list(epsilon(n, i).scaled) + [-s for s in epsilon(n, j).scaled])
    coeffs = [Fraction(1, (n - 1) * n)] * len(elements)
    lam = Fraction(1, n - 1)

    for level in range(3, d + 1):
        lam_next = 1 / sum(Fraction(n - 1) ** i for i in range(1, level))
        mu = (n - 1) * lam_next / lam
        sign = 1 if level % 2 == 0 else -1
        pad = [0] * (n * (level - 2))
        new = [list(_quiver_level_weight(n, 2, 1, i, sign).scaled) + pad for i in range(1, n)]
        elements = new + [[0] * n + e for e in elements]
        coeffs = [lam_next] * (n - 1) + [mu * c for c in coeffs]
        lam = lam_next

    return [WeightVector(n, d, e) for e in elements], coeffs, lam


def quiver_arrows(n, d):
    """
    Arrows of the alternating quiver on vertices 1..d with their matrix assignment.

    Between l and l+1 the head is l when d - l + 1 is even. The last arrow
    class (d-1, d) carries M P^{k-1}, k = 1..n; the others carry E_{i,n} when
    the head is l and E_{n,i} otherwise, for i in [n-1] plus one repeat of i = 1.

    Returns:
        List of dicts with tail, head (1-based vertices) and a complex n x n matrix
    """
    M = np.zeros((n, n), dtype=complex)
    for a in range(n - 1):
        M[a, a] = 1.0
    P = np.zeros((n, n), dtype=complex)
    for a in range(n - 1):
        P[a, a + 1] = 1.0
    P[n - 1, 0] = 1.0

    arrows = []
    for l in range(1, d):
        head, tail = (l, l + 1) if (d - l + 1) % 2 == 0 else (l + 1, l)
        if l == d - 1:
            power = np.eye(n, dtype=complex)
            for _ in range(n):
                arrows.append({"tail": tail, "head": head, "matrix": M @ power})
                power = power @ P
            continue
        for i in list(range(1, n)) + [1]:
            E = np.zeros((n, n), dtype=complex)
            if head == l:
                E[i - 1, n - 1] = 1.0
            else:
                E[n - 1, i - 1] = 1.0
            arrows.append({"tail": tail, "head": head, "matrix": E})
    return arrows


def arrow_support_weights(n, d, arrows):
    """Weights +eps_a at the head block and -eps_b at the tail block for each nonzero (a, b)."""
    weights = []
    for arrow in arrows:
        rows, cols = np.nonzero(np.abs(arrow["matrix"]) > 0)
        for a, b in zip(rows, cols):
            scaled = [0] * (n * d)
            for pos, s in enumerate(epsilon(n, int(a) + 1).scaled):
                scaled[(arrow["head"] - 1) * n + pos] += s
            for pos, s in enumerate(epsilon(n, int(b) + 1).scaled):
                scaled[(arrow["tail"] - 1) * n + pos] -= s
            weights.append(WeightVector(n, d, scaled))
    return weights


class QuiverInstance:
    """
    Weight set Gamma_d of the alternating quiver with dimension vector (n, ..., n).

    Args:
        n: Dimension at every vertex (n >= 2)
        d: Number of vertices (d >= 2)
    """

    def __init__(self, n, d):
        elements, coeffs, lam = quiver_weights(n, d)
        self.n = n
        self.d = d
        self.gamma = WeightSet(n, d, elements, label=f"quiver_Gamma_{d}(n={n})")
        self.coefficients = coeffs
        self.lam = lam
        sign = 1 if (d - 1) % 2 == 0 else -1
        self.x = tuple(sign * lam * c for c in epsilon(n, n).coords) + (Fraction(0),) * (n * (d - 1))
        self.arrows = quiver_arrows(n, d)
        self.bound = float(Fraction(1, (n - 1) ** (d - 1)))

    def witness_point(self):
        return combination(self.gamma, self.coefficients)

    def reproduces_x(self):
        return self.witness_point() == self.x

    def x_norm_sq(self):
        return sum(c * c for c in self.x)

    def __repr__(self):
        return f"QuiverInstance(n={self.n}, d={self.d}, |Gamma|={len(self.gamma)}, lambda={self.lam})"


def quiver_instance(n, d):
    return QuiverInstance(n, d)


def quiver_witness(n, d):
    """Inductive convex combination of Gamma_d, in the same shape as the other witnesses."""
    inst = QuiverInstance(n, d)
    point = inst.witness_point()
    return {
        "weights": inst.gamma,
        "coefficients": inst.coefficients,
        "point": point,
        "norm_sq": sum(x * x for x in point),
        "bound": inst.bound,
    }


# ============================================================================
# DIAMETER INSTANCE
# ============================================================================

class DiameterInstance:
    """
    Directed tree D_l, its edge matrix M, the stochastic weights q, the kernel
    vector f and the array p with capacity 1/2.

    Vertices are named "r", "u1".."ul", "v1".."vl", "w1".."wl", "wb{l-1}", "wb{l}"
    and numbered 1..n in that order (n = 3(l+1)). Each edge s -> t gives the
    three index tuples (t,s,s), (s,t,s), (s,s,t).
    """

    def __init__(self, l):
        if l < 2:
            raise ValueError(f"diameter_instance needs l >= 2, got {l}")
        self.l = l
        self.vertices = (["r"] + [f"u{j}" for j in range(1, l + 1)] + [f"v{j}" for j in range(1, l + 1)]
                         + [f"w{j}" for j in range(1, l + 1)] + [f"wb{l - 1}", f"wb{l}"])
        self.n = len(self.vertices)
        self.index = {name: pos for pos, name in enumerate(self.vertices, start=1)}
        self.level = {"r": 0}
        for name in self.vertices[1:]:
            self.level[name] = int(name.lstrip("uvwb"))

        self.edges, edge_q = self._build_edges()
        self.rows, self.q = [], []
        for (s, t), val in zip(self.edges, edge_q):
            si, ti = self.index[s], self.index[t]
            self.rows.extend([(ti, si, si), (si, ti, si), (si, si, ti)])
            self.q.extend([val] * 3)

        self.M = np.zeros((len(self.rows), 3 * self.n), dtype=int)
        for row, idx in enumerate(self.rows):
            for k, i in enumerate(idx):
                self.M[row, k * self.n + i - 1] = 1

        self.kernel_f = [Fraction(-2) ** (-self.level[v]) for v in self.vertices] * 3
        self.omega_prime = (self.index[f"u{l}"], self.index[f"v{l}"], self.index[f"w{l}"])

        entries = {idx: val / 2 for idx, val in zip(self.rows, self.q)}
        entries[self.omega_prime] = Fraction(1, 2)
        self.p = SparseArray(self.n, 3, entries, label=f"diameter_l{l}")

    def _build_edges(self):
        l, n = self.l, self.n
        unit = Fraction(1, 6 * n)
        edges, q = [], []

        def name(v):
            return "r" if v.endswith("0") and v[:-1] in ("u", "v", "w") else v

        for chain in ("u", "v"):
            for j in range(1, l + 1):
                edges.append((f"{chain}{j}", name(f"{chain}{j - 1}")))
                q.append(unit * (2 + Fraction(-2) ** (-(l - j))))
        for j in range(1, l + 1):
            edges.append((f"w{j}", name(f"w{j - 1}")))
            if j <= l - 2:
                q.append(unit * (2 + Fraction(-2) ** (-(l - j - 1))))
            elif j == l - 1:
                q.append(unit * Fraction(3, 2))
            else:
                q.append(unit * 3)
        edges.append((f"wb{l - 1}", name(f"w{l - 2}")))
        q.append(unit * Fraction(3, 2))
        edges.append((f"wb{l}", f"wb{l - 1}"))
        q.append(unit * 3)
        return edges, q

    def column_sums(self):
        """q-weighted column sums of M; each equals 1/n."""
        sums = [Fraction(0)] * (3 * self.n)
        for idx, val in zip(self.rows, self.q):
            for k, i in enumerate(idx):
                sums[k * self.n + i - 1] += val
        return sums

    def kernel_residual(self):
        """M f, exactly."""
        return [sum((self.kernel_f[k * self.n + i - 1] for k, i in enumerate(idx)), Fraction(0))
                for idx in self.rows]

    def omega_prime_vector(self):
        vec = [0] * (3 * self.n)
        for k, i in enumerate(self.omega_prime):
            vec[k * self.n + i - 1] = 1
        return np.array(vec, dtype=float)

    def row_vectors(self):
        return self.M.astype(float)

    def direction(self):
        """Unit kernel direction v with f_p(-t v) = 1/2 + (1/2) e^{-eta t}."""
        f = np.array([float(x) for x in self.kernel_f])
        sign = 1.0 if self.l % 2 == 0 else -1.0
        return sign * f / np.linalg.norm(f)

    def eta_sq(self):
        return diameter_eta_sq(self.l)

    def __repr__(self):
        return f"DiameterInstance(l={self.l}, n={self.n}, edges={len(self.edges)}, rows={len(self.rows)})"


def diameter_instance(l):
    return DiameterInstance(l)


def diameter_eta_sq(l):
    """(f . omega')^2 / ||f||^2 as an exact Fraction."""
    inst_levels = [0] + list(range(1, l + 1)) * 3 + [l - 1, l]
    f_sq = 3 * sum(Fraction(1, 4 ** j) for j in inst_levels)
    return 9 * Fraction(1, 4 ** l) / f_sq


def diameter_eta(l):
    return float(diameter_eta_sq(l)) ** 0.5


def pad_diameter_array(p, n):
    """
    Embed p over [t]^d into [n]^d: (t/n) p plus 1/n on the diagonal tail i > t.
    """
    t = p.n
    if t > n:
        raise ValueError(f"pad_diameter_array needs t <= n, got t={t}, n={n}")
    if t == n:
        return SparseArray(n, p.d, dict(p.entries), label=p.label)

    scale = Fraction(t, n) if p.is_exact() else t / n
    tail = Fraction(1, n) if p.is_exact() else 1.0 / n
    entries = {idx: scale * val for idx, val in p.items()}
    for i in range(t + 1, n + 1):
        entries[(i,) * p.d] = tail
    return SparseArray(n, p.d, entries, label=f"{p.label}_pad{n}")


def lift_array_order(p, d):
    """q(i, j, k, l, ..., l) = p_ijk / n for every l in [n]: the 3-array lifted to order d."""
    if d < p.d:
        raise ValueError(f"Cannot lift an order-{p.d} array to order {d}")
    if d == p.d:
        return p
    n = p.n
    scale = Fraction(1, n) if p.is_exact() else 1.0 / n
    entries = {}
    for idx, val in p.items():
        for l in range(1, n + 1):
            entries[idx + (l,) * (d - p.d)] = val * scale
    return SparseArray(n, d, entries, label=f"{p.label}_d{d}")


# ============================================================================
# ROUNDING
# ============================================================================

def rounded_tensor(p, bits=ROUNDING_BITS):
    """
    Dyadic tensor v with supp(v) = supp(p) and p - delta < |v|^2 <= p.

    v = floor-sqrt(p 4^B) / 2^B, computed with integer square roots.

    Args:
        p: SparseArray with positive entries
        bits: Bit budget B

    Returns:
        Dictionary with the ComplexTensor, exact entries and the L1 / max errors
    """
    scale = 4 ** bits
    entries, exact = {}, {}
    l1_error, max_error = Fraction(0), Fraction(0)

    for idx, val in p.items():
        val = Fraction(val)
        k = isqrt(val.numerator * scale // val.denominator)
        if k == 0:
            raise ValueError(f"Bit budget {bits} too small: entry {idx} = {float(val):.3e} rounds to 0")
        v = Fraction(k, 2 ** bits)
        exact[idx] = v
        entries[idx] = complex(float(v), 0.0)
        err = val - v * v
        l1_error += err
        max_error = max(max_error, err)

    tensor = ComplexTensor(p.n, p.d, entries, label=f"{p.label}_rounded{bits}")
    return {
        "tensor": tensor,
        "exact_entries": exact,
        "l1_error": l1_error,
        "max_error": max_error,
        "bits": bits,
    }
