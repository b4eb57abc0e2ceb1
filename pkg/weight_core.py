from fractions import Fraction
from itertools import product
import numpy as np
from config import MAX_OMEGA_SIZE


def validate_index(idx, n, d):
    """Raise ValueError unless idx is a 1-based index tuple of length d over [n]."""
    if len(idx) != d:
        raise ValueError(f"Index tuple {tuple(idx)} has length {len(idx)}, expected d={d}")
    for i in idx:
        if not 1 <= int(i) <= n:
            raise ValueError(f"Index {i} in {tuple(idx)} out of range [1, {n}]")
    return tuple(int(i) for i in idx)


class WeightVector:
    """
    Point of (1_n^perp)^d, stored exactly as integers scaled by n.

    Every weight used here (epsilon tuples, roots, quiver and polynomial
    weights) has denominator dividing n, so coords = scaled / n.
    """

    __slots__ = ("n", "d", "scaled")

    def __init__(self, n, d, scaled):
        scaled = tuple(int(c) for c in scaled)
        if len(scaled) != n * d:
            raise ValueError(f"Expected {n * d} coordinates, got {len(scaled)}")
        for k in range(d):
            if sum(scaled[k * n:(k + 1) * n]) != 0:
                raise ValueError(f"Block {k + 1} does not sum to zero")
        self.n = n
        self.d = d
        self.scaled = scaled

    @classmethod
    def from_rationals(cls, n, d, coords):
        scaled = []
        for c in coords:
            c = Fraction(c) * n
            if c.denominator != 1:
                raise ValueError(f"Coordinate {c / n} does not have denominator dividing n={n}")
            scaled.append(c.numerator)
        return cls(n, d, scaled)

    @property
    def coords(self):
        return tuple(Fraction(c, self.n) for c in self.scaled)

    def block(self, k):
        """Block k (1-based) as Fractions."""
        return self.coords[(k - 1) * self.n:k * self.n]

    def to_array(self):
        return np.array(self.scaled, dtype=float) / self.n

    def norm_sq(self):
        return Fraction(sum(c * c for c in self.scaled), self.n * self.n)

    def _check(self, other):
        if (self.n, self.d) != (other.n, other.d):
            raise ValueError(f"Dimension mismatch: ({self.n},{self.d}) vs ({other.n},{other.d})")

    def __add__(self, other):
        self._check(other)
        return WeightVector(self.n, self.d, [a + b for a, b in zip(self.scaled, other.scaled)])

    def __sub__(self, other):
        self._check(other)
        return WeightVector(self.n, self.d, [a - b for a, b in zip(self.scaled, other.scaled)])

    def __neg__(self):
        return WeightVector(self.n, self.d, [-a for a in self.scaled])

    def __eq__(self, other):
        return isinstance(other, WeightVector) and (self.n, self.d, self.scaled) == (other.n, other.d, other.scaled)

    def __hash__(self):
        return hash((self.n, self.d, self.scaled))

    def __repr__(self):
        return f"WeightVector(n={self.n}, d={self.d}, coords=({', '.join(str(c) for c in self.coords)}))"


class WeightSet:
    """
    Ordered, duplicate-free set of weights sharing (n, d).

    index_tuples is kept when the set was built from index tuples, so the
    tensor layer and freeness checks can recover supports.
    """

    def __init__(self, n, d, elements, label="", index_tuples=None, verbose=True):
        self.n = n
        self.d = d
        self.label = label
        self.elements = []
        self.index_tuples = [] if index_tuples is not None else None
        seen = set()
        duplicates = []

        for pos, w in enumerate(elements):
            if (w.n, w.d) != (n, d):
                raise ValueError(f"Weight {w} does not match dims (n={n}, d={d})")
            if w in seen:
                duplicates.append(index_tuples[pos] if index_tuples is not None else pos)
                continue
            seen.add(w)
            self.elements.append(w)
            if index_tuples is not None:
                self.index_tuples.append(tuple(index_tuples[pos]))

        self.duplicates = duplicates
        if duplicates and verbose:
            print(f"⚠️  {len(duplicates)} duplicate weight(s) removed from '{label}': {duplicates[:5]}")

    @property
    def dims(self):
        return (self.n, self.d)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def __contains__(self, w):
        return w in set(self.elements)

    def to_matrix(self):
        """Float matrix with one weight per row."""
        if not self.elements:
            return np.zeros((0, self.n * self.d))
        return np.array([w.scaled for w in self.elements], dtype=float) / self.n

    def scaled_matrix(self):
        """Exact integer matrix (rows = n * weights)."""
        return [list(w.scaled) for w in self.elements]

    def rational_rows(self):
        return [list(w.coords) for w in self.elements]

    def negated(self, label=None):
        return WeightSet(self.n, self.d, [-w for w in self.elements],
                         label=label or f"-{self.label}", index_tuples=self.index_tuples)

    def issubset(self, other):
        other_set = set(other.elements)
        return all(w in other_set for w in self.elements)

    def __repr__(self):
        return f"WeightSet(label='{self.label}', n={self.n}, d={self.d}, size={len(self)})"


class SparseArray:
    """
    Nonnegative d-dimensional array over [n]^d stored as index tuple -> value.

    Values may be Fractions (exact constructions) or floats; zero entries
    are dropped.
    """

    def __init__(self, n, d, entries, label=""):
        self.n = n
        self.d = d
        self.label = label
        self.entries = {}
        for idx, val in dict(entries).items():
            idx = validate_index(idx, n, d)
            if val < 0:
                raise ValueError(f"Negative entry {val} at {idx}")
            if val == 0:
                continue
            self.entries[idx] = val

    def __len__(self):
        return len(self.entries)

    def support(self):
        return list(self.entries.keys())

    def items(self):
        return self.entries.items()

    def total(self):
        return sum(self.entries.values(), Fraction(0) if self.is_exact() else 0.0)

    def is_exact(self):
        return all(isinstance(v, (int, Fraction)) for v in self.entries.values())

    def normalized(self):
        s = self.total()
        if s == 0:
            raise ValueError("Cannot normalize the zero array")
        return SparseArray(self.n, self.d, {k: v / s for k, v in self.entries.items()}, label=self.label)

    def scaled(self, factor):
        return SparseArray(self.n, self.d, {k: v * factor for k, v in self.entries.items()}, label=self.label)

    def weight_set(self):
        return weights_of_indices(self.support(), self.n, self.d, label=self.label)

    def coefficients(self):
        """Float values aligned with support()."""
        return np.array([float(v) for v in self.entries.values()], dtype=float)

    def to_dense(self):
        dense = np.zeros((self.n,) * self.d)
        for idx, val in self.entries.items():
            dense[tuple(i - 1 for i in idx)] = float(val)
        return dense

    @classmethod
    def from_dense(cls, dense, label="", zero_tol=0.0):
        dense = np.asarray(dense)
        n, d = dense.shape[0], dense.ndim
        entries = {}
        for pos in zip(*np.nonzero(np.abs(dense) > zero_tol)):
            entries[tuple(int(i) + 1 for i in pos)] = float(dense[pos])
        return cls(n, d, entries, label=label)

    def __repr__(self):
        return f"SparseArray(label='{self.label}', n={self.n}, d={self.d}, nnz={len(self)})"


# ============================================================================
# OPERATIONS
# ============================================================================

def epsilon(n, i):
    """
    epsilon_i = e_i - (1/n) 1_n as a d=1 weight.

    Args:
        n: Local dimension
        i: 1-based index

    Returns:
        WeightVector with entry (n-1)/n at i and -1/n elsewhere
    """
    if not 1 <= i <= n:
        raise ValueError(f"Index {i} out of range [1, {n}]")
    return WeightVector(n, 1, [n - 1 if k == i else -1 for k in range(1, n + 1)])


def _epsilon_scaled(n, idx):
    scaled = []
    for i in idx:
        scaled.extend(n - 1 if k == i else -1 for k in range(1, n + 1))
    return scaled


def weight_of_index(idx, n):
    """(epsilon_{i_1}, ..., epsilon_{i_d}) for one index tuple."""
    idx = validate_index(idx, n, len(idx))
    return WeightVector(n, len(idx), _epsilon_scaled(n, idx))


def omega_full(n, d, cap=None):
    """
    All n^d weights of d-dimensional array scaling, in lexicographic index order.
    """
    cap = MAX_OMEGA_SIZE if cap is None else cap
    if n ** d > cap:
        raise ValueError(f"omega_full(n={n}, d={d}) has {n ** d} elements, cap is {cap}")
    indices = list(product(range(1, n + 1), repeat=d))
    return weights_of_indices(indices, n, d, label=f"Omega_{n},{d}")


def weights_of_indices(indices, n, d=None, label="", verbose=True):
    """
    Map index tuples to their epsilon weights, preserving order.

    Duplicate tuples are dropped and reported by WeightSet.
    """
    indices = [tuple(idx) for idx in indices]
    if d is None:
        if not indices:
            raise ValueError("Cannot infer d from an empty index list")
        d = len(indices[0])
    indices = [validate_index(idx, n, d) for idx in indices]
    elements = [WeightVector(n, d, _epsilon_scaled(n, idx)) for idx in indices]
    return WeightSet(n, d, elements, label=label, index_tuples=indices, verbose=verbose)


def is_free_indices(indices):
    """
    Check that every two distinct tuples differ in at least two positions.

    Returns:
        (True, None) or (False, (first, second)) for the first violating pair
    """
    tuples = []
    seen = set()
    for idx in indices:
        idx = tuple(idx)
        if idx not in seen:
            seen.add(idx)
            tuples.append(idx)

    # Bucket by each "all but one slot" projection: a pair differing in exactly
    # one slot shares one of these keys.
    for drop in range(len(tuples[0]) if tuples else 0):
        buckets = {}
        for idx in tuples:
            key = idx[:drop] + idx[drop + 1:]
            if key in buckets:
                return False, (buckets[key], idx)
            buckets[key] = idx
    return True, None


def root_set(n, d):
    """
    Roots of SL(n)^d: (0, ..., e_i - e_j, ..., 0) for i != j, one block nonzero.

    Returns:
        WeightSet with d*n*(n-1) elements (integer coordinates)
    """
    roots = []
    for k in range(d):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                scaled = [0] * (n * d)
                scaled[k * n + i] = n
                scaled[k * n + j] = -n
                roots.append(WeightVector(n, d, scaled))
    return WeightSet(n, d, roots, label=f"roots_{n},{d}")


def is_free_weights(ws, roots=None):
    """
    True iff no two distinct weights of ws differ by a root (exact).
    """
    if roots is None:
        roots = root_set(ws.n, ws.d)
    if roots.dims != ws.dims:
        raise ValueError(f"Root set dims {roots.dims} do not match weight set dims {ws.dims}")
    root_keys = {r.scaled for r in roots}
    rows = [np.array(w.scaled, dtype=object) for w in ws]
    for a in range(len(rows)):
        for b in range(a + 1, len(rows)):
            if tuple(rows[a] - rows[b]) in root_keys:
                return False
    return True


def affine_uniqueness_rank(n):
    """Rank of {epsilon_2, ..., epsilon_n}; n-1 means sum (1/n) epsilon_i = 0 is the unique affine relation."""
    if n < 2:
        return 0
    rows = np.array([epsilon(n, i).scaled for i in range(2, n + 1)], dtype=float)
    return int(np.linalg.matrix_rank(rows))


# ============================================================================
# JSON CODECS
# ============================================================================

def _rational_str(x):
    return str(Fraction(x))


def weightset_to_dict(ws):
    return {
        "n": ws.n,
        "d": ws.d,
        "label": ws.label,
        "index_base": 1,
        "elements": [[_rational_str(c) for c in w.coords] for w in ws],
    }


def weightset_from_dict(data):
    n, d = int(data["n"]), int(data["d"])
    elements = [WeightVector.from_rationals(n, d, [Fraction(c) for c in row]) for row in data["elements"]]
    return WeightSet(n, d, elements, label=data.get("label", ""))


def array_to_dict(arr):
    entries = []
    for idx, val in arr.items():
        entries.append({
            "idx": list(idx),
            "val": _rational_str(val) if isinstance(val, (int, Fraction)) else float(val),
        })
    return {"n": arr.n, "d": arr.d, "label": arr.label, "index_base": 1, "entries": entries}


def array_from_dict(data):
    entries = {}
    for item in data["entries"]:
        val = item["val"]
        entries[tuple(item["idx"])] = Fraction(val) if isinstance(val, str) else float(val)
    return SparseArray(int(data["n"]), int(data["d"]), entries, label=data.get("label", ""))


def combination(ws, coeffs):
    """Exact sum of coeffs[i] * ws[i] as a tuple of Fractions."""
    if len(coeffs) != len(ws):
        raise ValueError(f"{len(coeffs)} coefficients for {len(ws)} weights")
    total = [Fraction(0)] * (ws.n * ws.d)
    for c, w in zip(coeffs, ws):
        c = Fraction(c)
        if c == 0:
            continue
        for pos, s in enumerate(w.scaled):
            if s:
                total[pos] += c * s
    return tuple(t / ws.n for t in total)


def marginals(arr):
    """
    Slice sums of a SparseArray along every axis.

    Returns:
        List of d lists; entry [k][i-1] is the sum of the slice with index i on axis k+1
    """
    zero = Fraction(0) if arr.is_exact() else 0.0
    sums = [[zero] * arr.n for _ in range(arr.d)]
    for idx, val in arr.items():
        for k, i in enumerate(idx):
            sums[k][i - 1] += val
    return sums
