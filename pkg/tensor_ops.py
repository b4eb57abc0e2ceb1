import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize
from scipy.special import logsumexp
from config import (
    DET_TOL, HERMITIAN_TOL, GAP_WITNESS_TOL, GAP_WITNESS_MAX_ITER,
    FREE_MOMENT_SAMPLES, FREE_DIAMETER_SAMPLES, DEFAULT_SEED,
)
from weight_core import SparseArray, validate_index, weights_of_indices, is_free_indices
from capacity import GeometricProgram, capacity_ball


class ComplexTensor:
    """
    Sparse element of (C^n)^{tensor d}: index tuple -> complex value.

    Args:
        n: Local dimension
        d: Number of tensor factors
        entries: Mapping from 1-based index tuples to complex values (zeros dropped)
    """

    def __init__(self, n, d, entries, label=""):
        self.n = n
        self.d = d
        self.label = label
        self.entries = {}
        for idx, val in dict(entries).items():
            val = complex(val)
            if val == 0:
                continue
            self.entries[validate_index(idx, n, d)] = val
        self.norm_sq = float(sum(abs(v) ** 2 for v in self.entries.values()))

    def __len__(self):
        return len(self.entries)

    def support(self):
        return list(self.entries.keys())

    def items(self):
        return self.entries.items()

    def values(self):
        return np.array(list(self.entries.values()), dtype=complex)

    def weight_set(self):
        return weights_of_indices(self.support(), self.n, self.d, label=self.label, verbose=False)

    def to_dense(self):
        dense = np.zeros((self.n,) * self.d, dtype=complex)
        for idx, val in self.entries.items():
            dense[tuple(i - 1 for i in idx)] = val
        return dense

    @classmethod
    def from_dense(cls, dense, label=""):
        dense = np.asarray(dense, dtype=complex)
        entries = {tuple(int(i) + 1 for i in pos): dense[pos] for pos in zip(*np.nonzero(dense))}
        return cls(dense.shape[0], dense.ndim, entries, label=label)

    @classmethod
    def random(cls, indices, n, d, rng, label="random"):
        """Standard complex Gaussian entries on the given support."""
        entries = {tuple(idx): complex(rng.normal(), rng.normal()) for idx in indices}
        return cls(n, d, entries, label=label)

    def __repr__(self):
        return f"ComplexTensor(label='{self.label}', n={self.n}, d={self.d}, nnz={len(self)})"


class TorusElement:
    """
    Element of ST(n)^d in log coordinates: diag(exp(x_k)) with each x_k summing to 0.

    Args:
        log_coords: d x n real array; each row is projected onto zero sum
    """

    def __init__(self, log_coords):
        x = np.atleast_2d(np.asarray(log_coords, dtype=float))
        self.log_coords = x - x.mean(axis=1, keepdims=True)
        self.d, self.n = self.log_coords.shape

    @classmethod
    def from_diagonals(cls, diagonals):
        diagonals = np.asarray(diagonals, dtype=float)
        if np.any(diagonals <= 0):
            raise ValueError("Torus diagonals must be positive")
        return cls(np.log(diagonals))

    @classmethod
    def identity(cls, n, d):
        return cls(np.zeros((d, n)))

    @classmethod
    def random(cls, n, d, rng, scale=1.0):
        return cls(scale * rng.normal(size=(d, n)))

    @property
    def diagonals(self):
        return np.exp(self.log_coords)

    def flat(self):
        return self.log_coords.reshape(-1)

    def matrices(self):
        return [np.diag(row).astype(complex) for row in self.diagonals]


class GroupElement:
    """
    Tuple of d complex n x n matrices with determinant 1.

    Raises ValueError when some |det - 1| exceeds DET_TOL.
    """

    def __init__(self, matrices):
        self.matrices = [np.asarray(g, dtype=complex) for g in matrices]
        for k, g in enumerate(self.matrices):
            if abs(np.linalg.det(g) - 1) > DET_TOL:
                raise ValueError(f"Factor {k + 1} has determinant {np.linalg.det(g):.6g}, expected 1")
        self.d = len(self.matrices)
        self.n = self.matrices[0].shape[0]

    @classmethod
    def identity(cls, n, d):
        return cls([np.eye(n, dtype=complex) for _ in range(d)])

    @classmethod
    def from_hermitian(cls, hermitians):
        """exp(H_k) for traceless Hermitian H_k."""
        return cls([expm(h) for h in hermitians])

    @classmethod
    def random_unitary(cls, n, d, rng):
        mats = []
        for _ in range(d):
            z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            q, r = np.linalg.qr(z)
            q = q @ np.diag(np.diag(r) / np.abs(np.diag(r)))
            mats.append(q / np.linalg.det(q) ** (1.0 / n))
        return cls(mats)


# ============================================================================
# GROUP ACTION
# ============================================================================

def _check_dims(v, n, d):
    if (v.n, v.d) != (n, d):
        raise ValueError(f"Dimension mismatch: tensor ({v.n},{v.d}) vs group element ({n},{d})")


def apply_torus(t, v):
    """(t . v)_w = exp(sum_k x_k[i_k]) v_w; the support is unchanged."""
    _check_dims(v, t.n, t.d)
    x = t.log_coords
    entries = {}
    for idx, val in v.items():
        entries[idx] = val * np.exp(sum(x[k, i - 1] for k, i in enumerate(idx)))
    return ComplexTensor(v.n, v.d, entries, label=v.label)


def _mode_products(dense, matrices):
    for k, g in enumerate(matrices):
        dense = np.moveaxis(np.tensordot(g, dense, axes=([1], [k])), 0, k)
    return dense


def apply_group(g, v):
    """(g_1 tensor ... tensor g_d) v via mode-wise products."""
    _check_dims(v, g.n, g.d)
    return ComplexTensor.from_dense(_mode_products(v.to_dense(), g.matrices), label=v.label)


# ============================================================================
# MARGINALS AND MOMENT MAPS
# ============================================================================

def quantum_marginals(v):
    """
    rho_k = M_k M_k^dagger for the mode-k flattening of v / ||v||.

    Computed on the support: entries sharing every index except slot k
    contribute to rho_k[i_k, j_k].
    """
    if v.norm_sq == 0:
        raise ValueError("quantum_marginals needs a nonzero tensor")

    rhos = []
    for k in range(v.d):
        rho = np.zeros((v.n, v.n), dtype=complex)
        groups = {}
        for idx, val in v.items():
            groups.setdefault(idx[:k] + idx[k + 1:], []).append((idx[k] - 1, val))
        for members in groups.values():
            for a, va in members:
                for b, vb in members:
                    rho[a, b] += va * np.conj(vb)
        rhos.append(rho / v.norm_sq)
    return rhos


class MomentMapValue:
    """Traceless Hermitian components rho_k - I/n and their joint Frobenius norm."""

    def __init__(self, components):
        self.components = components
        self.frobenius_norm = float(np.sqrt(sum(np.linalg.norm(c, "fro") ** 2 for c in components)))

    def diagonal(self):
        return np.concatenate([np.real(np.diag(c)) for c in self.components])

    def max_off_diagonal(self):
        return max(float(np.max(np.abs(c - np.diag(np.diag(c))))) for c in self.components)

    def is_valid(self, tol=HERMITIAN_TOL):
        for c in self.components:
            if np.max(np.abs(c - c.conj().T)) > tol or abs(np.trace(c)) > tol:
                return False
        return True


def moment_map_G(v):
    n = v.n
    return MomentMapValue([rho - np.eye(n) / n for rho in quantum_marginals(v)])


def moment_map_T(v):
    """|v_w|^2-weighted average of the support weights (flat vector of length n*d)."""
    if v.norm_sq == 0:
        raise ValueError("moment_map_T needs a nonzero tensor")
    W = v.weight_set().to_matrix()
    probs = np.abs(v.values()) ** 2 / v.norm_sq
    return probs @ W


def check_free_moment_equality(v, samples=FREE_MOMENT_SAMPLES, tol=1e-12, seed=DEFAULT_SEED, scale=1.0):
    """
    Marginals of random torus scalings t . v are diagonal up to tol.

    Returns:
        (ok, max_off_diagonal) over all samples
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        t = TorusElement.random(v.n, v.d, rng, scale=scale)
        worst = max(worst, moment_map_G(apply_torus(t, v)).max_off_diagonal())
    return worst <= tol, worst


# ============================================================================
# TORUS GAP WITNESS
# ============================================================================

def _torus_moment(W, log_weights, x):
    """||mu||^2 and its gradient for mu(x) = sum_w pi_w w, pi proportional to exp(log_weights + 2 W x)."""
    z = log_weights + 2.0 * (W @ x)
    pi = np.exp(z - logsumexp(z))
    mu = pi @ W
    proj = W @ mu
    grad = 4.0 * (pi * proj) @ W - 4.0 * mu * (mu @ mu)
    return float(mu @ mu), grad, mu


def torus_moment_norm_sq(v, x):
    """
    ||mu_T(t . v)||^2 and its gradient in flat log coordinates x (length n*d).
    """
    W = v.weight_set().to_matrix()
    log_weights = np.log(np.abs(v.values()) ** 2)
    value, grad, _ = _torus_moment(W, log_weights, np.asarray(x, dtype=float).reshape(-1))
    return value, grad


def _minimize_torus(W, log_weights, tol, max_iter):
    def fun(x):
        value, grad, _ = _torus_moment(W, log_weights, x)
        return value, grad

    x0 = np.zeros(W.shape[1])
    res = minimize(fun, x0, jac=True, method="BFGS", options={"gtol": tol, "maxiter": max_iter})
    value, _, mu = _torus_moment(W, log_weights, res.x)
    return {
        "value": float(np.sqrt(value)),
        "log_coords": res.x,
        "moment": mu,
        "iterations": int(res.nit),
        "converged": bool(res.success) or value <= tol,
    }


def gap_witness_minimize(v, tol=GAP_WITNESS_TOL, max_iter=GAP_WITNESS_MAX_ITER):
    """
    Minimize ||mu_T(t . v)|| over the torus for a tensor with free support.

    For free supports mu_G(t . v) = mu_T(t . v), so the value approaches
    dist(0, conv(supp weights)) from above.

    Returns:
        Dictionary with value, minimizing log coordinates, the final moment
        point, iterations and a converged flag
    """
    free, pair = is_free_indices(v.support())
    if not free:
        raise ValueError(f"gap_witness_minimize needs a free support; {pair[0]} and {pair[1]} differ in one slot")
    W = v.weight_set().to_matrix()
    log_weights = np.log(np.abs(v.values()) ** 2)
    return _minimize_torus(W, log_weights, tol, max_iter)


def tensor_to_array(v):
    """p_w = |v_w|^2."""
    return SparseArray(v.n, v.d, {idx: abs(val) ** 2 for idx, val in v.items()}, label=v.label)


def nc_capacity_eval(v, g):
    """
    ||g . v||^2 for a GroupElement or TorusElement, or <v, (X_1 tensor ... tensor X_d) v>
    for a tuple of positive-definite matrices X_k.
    """
    if isinstance(g, TorusElement):
        _check_dims(v, g.n, g.d)
        x = g.log_coords
        return float(sum(abs(val) ** 2 * np.exp(2.0 * sum(x[k, i - 1] for k, i in enumerate(idx)))
                         for idx, val in v.items()))
    if isinstance(g, GroupElement):
        return apply_group(g, v).norm_sq

    matrices = [np.asarray(m, dtype=complex) for m in g]
    _check_dims(v, matrices[0].shape[0], len(matrices))
    dense = v.to_dense()
    return float(np.real(np.vdot(dense, _mode_products(dense, matrices))))


def random_traceless_hermitian(n, d, radius, rng):
    """d traceless Hermitian blocks with joint Frobenius norm uniform in (0, radius]."""
    blocks = []
    for _ in range(d):
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        h = (z + z.conj().T) / 2
        blocks.append(h - np.trace(h) / n * np.eye(n))
    norm = np.sqrt(sum(np.linalg.norm(h, "fro") ** 2 for h in blocks))
    target = radius * (1.0 - rng.uniform())
    return [h * (target / norm) for h in blocks]


def free_diameter_sample_check(v, R, samples=FREE_DIAMETER_SAMPLES, tol=1e-9, seed=DEFAULT_SEED, ball=None):
    """
    Random points exp(H) of the radius-R ball never beat the torus-ball optimum.

    <v, exp(H) v> with H = diag(y) equals f_p(y) for p = |v|^2, so the torus
    optimum is capacity_ball on tensor_to_array(v) at radius R.

    Returns:
        Dictionary with ok, the torus optimum, the smallest sampled value and the violation count
    """
    if R <= 0:
        return {"ok": True, "torus_optimum": v.norm_sq, "min_sampled": v.norm_sq, "violations": 0}

    if ball is None:
        ball = capacity_ball(GeometricProgram.from_array(tensor_to_array(v)), R)["value"]
    rng = np.random.default_rng(seed)
    min_sampled = np.inf
    violations = 0
    for _ in range(samples):
        H = random_traceless_hermitian(v.n, v.d, R, rng)
        value = nc_capacity_eval(v, [expm(h) for h in H])
        min_sampled = min(min_sampled, value)
        if value < ball - tol:
            violations += 1
    return {"ok": violations == 0, "torus_optimum": ball, "min_sampled": float(min_sampled), "violations": violations}


# ============================================================================
# QUIVER REPRESENTATIONS
# ============================================================================

def quiver_tuple(instance):
    """Copy of the instance's arrow list: dicts with tail, head and matrix."""
    return [{"tail": a["tail"], "head": a["head"], "matrix": a["matrix"].copy()} for a in instance.arrows]


def apply_torus_quiver(arrows, t):
    """A -> diag(exp(x_head)) A diag(exp(-x_tail)) on every arrow."""
    x = t.log_coords
    scaled = []
    for a in arrows:
        left = np.exp(x[a["head"] - 1])[:, None]
        right = np.exp(-x[a["tail"] - 1])[None, :]
        scaled.append({"tail": a["tail"], "head": a["head"], "matrix": left * a["matrix"] * right})
    return scaled


def quiver_moment_map(arrows, n, d):
    """
    Per vertex: traceless part of (sum over heads of A A^dagger - sum over tails of A^dagger A) / sum ||A||^2.
    """
    total = sum(np.linalg.norm(a["matrix"], "fro") ** 2 for a in arrows)
    if total == 0:
        raise ValueError("quiver_moment_map needs a nonzero representation")
    blocks = [np.zeros((n, n), dtype=complex) for _ in range(d)]
    for a in arrows:
        A = a["matrix"]
        blocks[a["head"] - 1] += A @ A.conj().T
        blocks[a["tail"] - 1] -= A.conj().T @ A
    components = []
    for b in blocks:
        b = b / total
        components.append(b - np.trace(b) / n * np.eye(n))
    return MomentMapValue(components)


def check_quiver_moment_equality(arrows, n, d, samples=FREE_MOMENT_SAMPLES, tol=1e-12, seed=DEFAULT_SEED):
    """Quiver moment maps of random torus scalings have diagonal blocks up to tol."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        t = TorusElement.random(n, d, rng)
        worst = max(worst, quiver_moment_map(apply_torus_quiver(arrows, t), n, d).max_off_diagonal())
    return worst <= tol, worst


def quiver_gap_witness(instance, tol=GAP_WITNESS_TOL, max_iter=GAP_WITNESS_MAX_ITER):
    """Torus minimization of the quiver moment map norm for the instance's matrix assignment."""
    n, d = instance.n, instance.d
    weights = {}
    for a in instance.arrows:
        rows, cols = np.nonzero(np.abs(a["matrix"]) > 0)
        for r, c in zip(rows, cols):
            w = np.zeros(n * d)
            w[(a["head"] - 1) * n:a["head"] * n] -= 1.0 / n
            w[(a["head"] - 1) * n + r] += 1.0
            w[(a["tail"] - 1) * n:a["tail"] * n] += 1.0 / n
            w[(a["tail"] - 1) * n + c] -= 1.0
            key = tuple(np.round(w * n).astype(int))
            weights[key] = weights.get(key, 0.0) + abs(a["matrix"][r, c]) ** 2
    W = np.array([np.array(k, dtype=float) / n for k in weights])
    log_weights = np.log(np.array(list(weights.values())))
    return _minimize_torus(W, log_weights, tol, max_iter)


# ============================================================================
# JSON CODECS
# ============================================================================

def tensor_to_dict(v):
    return {
        "n": v.n,
        "d": v.d,
        "label": v.label,
        "index_base": 1,
        "entries": [{"idx": list(idx), "re": val.real, "im": val.imag} for idx, val in v.items()],
    }


def tensor_from_dict(data):
    entries = {tuple(e["idx"]): complex(e["re"], e.get("im", 0.0)) for e in data["entries"]}
    return ComplexTensor(int(data["n"]), int(data["d"]), entries, label=data.get("label", ""))
