"""Isotropy of maps F: (Z/a)^n -> G for an alternating form C.

F is isotropic for C when some C-symmetric M (M - M^T = C) has F M = 0.
Three routes decide it:

* the pairwise criterion on the rows of F (``check_condition3``): for rows
  f_i, f_j of F with i < j, f_i C f_j^T = 0 mod d_i;
* the same criterion after a change of basis of the source making F the
  coordinate projection (``check_condition2_smith``), which also yields an
  explicit witness (``build_witness``);
* exhaustive search over C-symmetric matrices (``exhaustive_witness_search``,
  ``brute_force_witness``), used as the oracle on small cases.

Row and slot indices in reports are 1-based on the padded chain of n slots
d_1 | ... | d_n, where the leading slots are 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, gcd

import numpy as np
from sympy import factorint, isprime

from .errors import BoundExceededError, DimensionError, NoWitnessError, NotPrimeError
from .groups import FiniteAbelianGroup, order
from .linalg import ExactMatrix, cokernel, is_alternating
from .rng import SeedSpec, words_mod
from .stats import MomentEstimate

EXACT_MAP_BOUND = 1 << 24
SUBSET_BOUND = 1 << 20
WITNESS_SEARCH_MAX_N = 4
WITNESS_SEARCH_MAX_A = 4
BRUTE_FORCE_BOUND = 1 << 20
_CHUNK = 1 << 16
_CHANNEL_MAPS = 7


@dataclass(frozen=True)
class GroupMap:
    """A homomorphism (Z/a)^n -> G; row i of ``matrix`` holds coordinate i mod d_i.

    Only the nontrivial invariant factors of G get a row.
    """

    target: FiniteAbelianGroup
    matrix: tuple
    modulus: int
    n: int

    def __post_init__(self):
        G, a = self.target, self.modulus
        if not G.is_finite:
            raise ValueError("target group must be finite")
        if a < 1 or a % G.exponent:
            raise ValueError(f"exponent of {G.pretty()} must divide the modulus {a}")
        rows = tuple(tuple(int(x) % d for x in row) for row, d in zip(self.matrix, G.divisors))
        if len(self.matrix) != len(G.divisors) or any(len(r) != self.n for r in self.matrix):
            raise DimensionError(f"map needs {len(G.divisors)} rows of length {self.n}")
        if len(G.divisors) > self.n:
            raise DimensionError(f"{G.pretty()} needs more than {self.n} generators")
        object.__setattr__(self, "matrix", rows)

    @classmethod
    def from_rows(cls, target: FiniteAbelianGroup, rows, modulus: int) -> GroupMap:
        rows = [list(r) for r in rows]
        n = len(rows[0]) if rows else 0
        return cls(target, tuple(map(tuple, rows)), modulus, n)

    @classmethod
    def from_columns(cls, target: FiniteAbelianGroup, columns, modulus: int) -> GroupMap:
        """Map sending basis vector e_l to the element ``columns[l]`` of the target."""
        r = len(target.divisors)
        rows = tuple(tuple(col[i] for col in columns) for i in range(r))
        return cls(target, rows, modulus, len(columns))

    @classmethod
    def projection(cls, target: FiniteAbelianGroup, n: int, modulus: int) -> GroupMap:
        """Coordinate projection onto the last slots of the padded chain."""
        r = len(target.divisors)
        rows = tuple(tuple(int(j == n - r + i) for j in range(n)) for i in range(r))
        return cls(target, rows, modulus, n)

    @property
    def divisors(self) -> tuple[int, ...]:
        return self.target.divisors

    def padded_divisors(self) -> tuple[int, ...]:
        return self.target.padded(self.n)

    def padded_rows(self) -> list[list[int]]:
        r = len(self.divisors)
        return [[0] * self.n for _ in range(self.n - r)] + [list(row) for row in self.matrix]

    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=np.int64).reshape(len(self.divisors), self.n)

    def image_index(self, columns=None) -> int:
        """[G : image of the span of the given basis vectors] (all of them by default)."""
        if not self.divisors:
            return 1
        cols = range(self.n) if columns is None else list(columns)
        rel = [[row[c] for c in cols] + [d if i == j else 0 for j in range(len(self.divisors))]
               for i, (row, d) in enumerate(zip(self.matrix, self.divisors))]
        return order(cokernel(ExactMatrix(rel)))

    def is_surjective(self) -> bool:
        return self.image_index() == 1

    def apply(self, M: ExactMatrix) -> list[list[int]]:
        """F M with row i reduced mod d_i."""
        if M.rows != self.n:
            raise DimensionError("matrix does not match the source rank")
        return [
            [sum(f * M[k, l] for k, f in enumerate(row)) % d for l in range(M.cols)]
            for row, d in zip(self.matrix, self.divisors)
        ]

    def kills(self, M: ExactMatrix) -> bool:
        return all(x == 0 for row in self.apply(M) for x in row)

    def to_json(self) -> dict:
        return {"group": str(self.target), "modulus": self.modulus, "rows": [list(r) for r in self.matrix]}


@dataclass(frozen=True)
class IsotropyReport:
    """Outcome of ``isotropy_report``.

    ``isotropic`` follows the row criterion; for surjective maps this is
    isotropy itself and a verified witness is attached.  Non-surjective maps
    are judged by the criterion alone and carry no witness.
    """

    isotropic: bool
    failing_triple: tuple[int, int, int] | None = None
    witness: ExactMatrix | None = None
    surjective: bool = True

    def to_json(self) -> dict:
        return {
            "isotropic": self.isotropic,
            "surjective": self.surjective,
            "failing_triple": list(self.failing_triple) if self.failing_triple else None,
            "witness": self.witness.to_json() if self.witness is not None else None,
        }


def _check_inputs(F: GroupMap, C: ExactMatrix):
    if C.shape != (F.n, F.n):
        raise DimensionError(f"form is {C.shape}, map has source rank {F.n}")
    if C.modulus != F.modulus:
        raise DimensionError(f"form modulus {C.modulus} differs from map modulus {F.modulus}")
    if not is_alternating(C):
        raise ValueError("form must be alternating")


def _pairing(u, C: ExactMatrix, v) -> int:
    return sum(x * C[i, j] * y for i, x in enumerate(u) if x for j, y in enumerate(v) if y)


def condition3_failure(F: GroupMap, C: ExactMatrix) -> tuple[int, int, int] | None:
    """First (k, i, j) with d_k > 1, k <= i < j and f_i C f_j^T != 0 mod d_k, else None."""
    _check_inputs(F, C)
    pad = F.n - len(F.divisors)
    rows = F.matrix
    r = len(rows)
    vals = {(i, j): _pairing(rows[i], C, rows[j]) for i in range(r) for j in range(i + 1, r)}
    for k in range(r):
        dk = F.divisors[k]
        for i in range(k, r):
            for j in range(i + 1, r):
                if vals[i, j] % dk:
                    return (k + 1 + pad, i + 1 + pad, j + 1 + pad)
    return None


def check_condition3(F: GroupMap, C: ExactMatrix) -> bool:
    return condition3_failure(F, C) is None


def _unit_lift(t: int, d: int, a: int) -> int:
    """A unit u mod a with u = t mod d, for t a unit mod d and d | a."""
    for s in range(a):
        u = (t + d * s) % a
        if gcd(u, a) == 1:
            return u
    raise ArithmeticError("no unit lift")  # unreachable for d | a


def smith_coordinates(F: GroupMap) -> tuple[list[list[int]], list[list[int]]]:
    """Invertible P over Z/a with (F P)_{ij} = delta_ij mod d_i on the padded chain, and P^-1.

    Column operations only, processing slots from the largest divisor down;
    pivots are the smallest nonzero entry, ties to the lowest index.
    """
    n, a = F.n, F.modulus
    d = F.padded_divisors()
    A = F.padded_rows()
    P = [[int(i == j) for j in range(n)] for i in range(n)]
    Q = [[int(i == j) for j in range(n)] for i in range(n)]  # P^-1

    def add_col(dst, src, q):
        # column dst += q * column src; inverse adds -q * row dst to row src
        for row in A:
            row[dst] += q * row[src]
        for row in P:
            row[dst] = (row[dst] + q * row[src]) % a
        Q[src] = [(x - q * y) % a for x, y in zip(Q[src], Q[dst])]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in P:
            row[i], row[j] = row[j], row[i]
        Q[i], Q[j] = Q[j], Q[i]

    def scale_col(c, u):
        uinv = pow(u, -1, a) if a > 1 else 0
        for row in A:
            row[c] *= u
        for row in P:
            row[c] = (row[c] * u) % a
        Q[c] = [(x * uinv) % a for x in Q[c]]

    for i in range(n - 1, -1, -1):
        di = d[i]
        if di == 1:
            continue
        row = A[i]
        for c in range(n):
            row[c] %= di
        # Euclid on the entries of row i in columns 0..i
        while True:
            nz = [c for c in range(i + 1) if row[c]]
            if not nz:
                raise ValueError("map is not surjective")
            piv = min(nz, key=lambda c: (row[c], c))
            if len(nz) == 1:
                break
            for c in nz:
                if c != piv:
                    add_col(c, piv, -(row[c] // row[piv]))
        if gcd(row[piv], di) != 1:
            raise ValueError("map is not surjective")
        if piv != i:
            swap_cols(piv, i)
        if row[i] % di != 1:
            scale_col(i, _unit_lift(pow(row[i], -1, di), di, a))
            row[i] %= di
        for c in range(i + 1, n):
            if row[c] % di:
                add_col(c, i, -row[c])
                row[c] %= di
        for c in range(n):
            row[c] %= di
    return P, Q


def smith_form_of(F: GroupMap, C: ExactMatrix) -> tuple[ExactMatrix, ExactMatrix, ExactMatrix]:
    """(P, P^-1, C') with C' = P^-1 C P^-T, the form in Smith coordinates of F."""
    _check_inputs(F, C)
    a = F.modulus
    P, Q = smith_coordinates(F)
    Pm, Qm = ExactMatrix(P, a), ExactMatrix(Q, a)
    return Pm, Qm, Qm @ C @ Qm.T


def check_condition2_smith(F: GroupMap, C: ExactMatrix) -> bool:
    _check_inputs(F, C)
    if not F.is_surjective():
        raise ValueError("Smith-coordinate check needs a surjective map")
    d = F.padded_divisors()
    _, _, Cp = smith_form_of(F, C)
    n = F.n
    return all(Cp[i, j] % min(d[i], d[j]) == 0 for i in range(n) for j in range(i + 1, n))


def build_witness(F: GroupMap, C: ExactMatrix) -> ExactMatrix:
    """A C-symmetric M with F M = 0, from the strict upper part of the form in Smith coordinates."""
    _check_inputs(F, C)
    if not F.is_surjective():
        raise NoWitnessError("witness construction needs a surjective map")
    if not check_condition3(F, C):
        raise NoWitnessError("map is not isotropic for the form")
    a, n = F.modulus, F.n
    P, _, Cp = smith_form_of(F, C)
    upper = ExactMatrix([[Cp[i, j] if j > i else 0 for j in range(n)] for i in range(n)], a)
    M = P @ upper @ P.T
    if M - M.T != C or not F.kills(M):
        raise NoWitnessError("witness verification failed")
    return M


def isotropy_report(F: GroupMap, C: ExactMatrix) -> IsotropyReport:
    failing = condition3_failure(F, C)
    surjective = F.is_surjective()
    if failing is not None:
        return IsotropyReport(False, failing, None, surjective)
    witness = build_witness(F, C) if surjective else None
    return IsotropyReport(True, None, witness, surjective)


# exhaustive oracles


def _check_search_size(F: GroupMap):
    if F.n > WITNESS_SEARCH_MAX_N or F.modulus > WITNESS_SEARCH_MAX_A:
        raise BoundExceededError(
            f"witness search is capped at n <= {WITNESS_SEARCH_MAX_N}, a <= {WITNESS_SEARCH_MAX_A}"
        )


@lru_cache(maxsize=64)
def _coset_tables(divisors: tuple, n: int):
    """Digits of every element of G^n (column-major: column l, then row i) and radix weights."""
    mods = np.array([d for _ in range(n) for d in divisors], dtype=np.int64)
    weights = np.ones(len(mods), dtype=np.int64)
    for t in range(len(mods) - 2, -1, -1):
        weights[t] = weights[t + 1] * mods[t + 1]
    size = int(np.prod(mods)) if len(mods) else 1
    idx = np.arange(size, dtype=np.int64)
    digits = (idx[:, None] // weights[None, :]) % mods[None, :] if len(mods) else np.zeros((1, 0), np.int64)
    return mods, weights, digits


def _encode(vec: np.ndarray, mods, weights) -> int:
    return int(((vec % mods) * weights).sum())


def _translation(g: np.ndarray, mods, weights, digits) -> np.ndarray:
    """Index of x + g for every encoded x, updating one digit at a time."""
    perm = np.arange(len(digits), dtype=np.int64)
    for t in np.flatnonzero(g):
        step = int(g[t])
        perm += np.where(digits[:, t] + step >= mods[t], step - mods[t], step) * weights[t]
    return perm


def exhaustive_witness_search(F: GroupMap, C: ExactMatrix) -> bool:
    """Whether some C-symmetric M has F M = 0, by closing the subgroup {F S : S symmetric} in G^n.

    With M0 the strict lower part of C, every C-symmetric M is M0 + S with S
    symmetric, so a witness exists iff -F M0 lies in that subgroup.
    """
    _check_inputs(F, C)
    _check_search_size(F)
    n = F.n
    Fa = F.array()
    mods, weights, digits = _coset_tables(F.divisors, n)

    def flat(cols: np.ndarray) -> np.ndarray:
        # cols has shape (r, n): column l is an element of G
        return cols.T.reshape(-1)

    gens = []
    for i in range(n):
        for j in range(i, n):
            img = np.zeros_like(Fa)
            img[:, j] += Fa[:, i]
            if i != j:
                img[:, i] += Fa[:, j]
            gens.append(flat(img))
    M0 = np.tril(np.array(C.entries, dtype=np.int64), -1)
    target = _encode(flat(-(Fa @ M0)), mods, weights)

    mask = np.zeros(len(digits), dtype=bool)
    mask[0] = True
    for g in gens:
        if not (g % mods).any():
            continue
        perm = _translation(g % mods, mods, weights, digits)
        while True:
            grown = mask.copy()
            grown[perm[mask]] = True
            if grown.sum() == mask.sum():
                break
            mask = grown
        if mask[target]:
            return True
    return bool(mask[target])


def brute_force_witness(F: GroupMap, C: ExactMatrix, bound: int = BRUTE_FORCE_BOUND) -> ExactMatrix | None:
    """First C-symmetric M (in lexicographic order of its upper entries) with F M = 0."""
    _check_inputs(F, C)
    n, a = F.n, F.modulus
    slots = [(i, j) for i in range(n) for j in range(i, n)]
    total = a ** len(slots)
    if total > bound:
        raise BoundExceededError(f"{total} candidate matrices exceed the bound {bound}")
    Fa = F.array()
    d = np.array(F.divisors, dtype=np.int64)[None, :, None]
    Cn = np.array(C.entries, dtype=np.int64)
    low = np.tril(np.ones((n, n), dtype=bool), -1)
    ii = np.array([s[0] for s in slots], dtype=np.intp)
    jj = np.array([s[1] for s in slots], dtype=np.intp)
    it = itertools.product(range(a), repeat=len(slots))
    while True:
        block = np.array(list(itertools.islice(it, _CHUNK)), dtype=np.int64)
        if block.size == 0:
            return None
        M = np.zeros((len(block), n, n), dtype=np.int64)
        M[:, ii, jj] = block
        M[:, jj, ii] = block
        M[:, low] += Cn[low]
        M %= a
        ok = ~((np.einsum("rk,bkl->brl", Fa, M) % d).any(axis=(1, 2)))
        if ok.any():
            return ExactMatrix(M[int(np.argmax(ok))], a)


# probabilities over uniform maps


def _condition3_batch(Fs: np.ndarray, C: np.ndarray, divisors) -> np.ndarray:
    """Row criterion for a batch of maps Fs of shape (batch, r, n)."""
    r = len(divisors)
    ok = np.ones(Fs.shape[0], dtype=bool)
    if r < 2:
        return ok
    Q = np.einsum("bik,kl,bjl->bij", Fs, C, Fs, optimize=True)
    for i in range(r):
        for j in range(i + 1, r):
            ok &= Q[:, i, j] % divisors[i] == 0
    return ok


def maps_from_indices(idx: np.ndarray, G: FiniteAbelianGroup, n: int) -> np.ndarray:
    """Maps number idx in base |G|: digit l picks the image of e_l in the order of G.elements()."""
    elems = np.array(list(G.elements()), dtype=np.int64).reshape(order(G), len(G.divisors))
    size = order(G)
    out = np.empty((len(idx), len(G.divisors), n), dtype=np.int64)
    rest = idx.copy()
    for l in range(n):
        out[:, :, l] = elems[rest % size]
        rest //= size
    return out


def _check_form(C: ExactMatrix, G: FiniteAbelianGroup, a: int):
    if C.modulus != a:
        raise DimensionError(f"form modulus {C.modulus} differs from {a}")
    if not is_alternating(C):
        raise ValueError("form must be alternating")
    if not G.is_finite or a % G.exponent:
        raise ValueError(f"exponent of {G.pretty()} must divide {a}")
    if len(G.divisors) > C.rows:
        raise DimensionError(f"{G.pretty()} needs more than {C.rows} generators")


def isotropy_probability_exact(C: ExactMatrix, G: FiniteAbelianGroup, a: int, bound: int = EXACT_MAP_BOUND) -> Fraction:
    """Fraction of all |G|^n maps (Z/a)^n -> G meeting the row criterion."""
    _check_form(C, G, a)
    n = C.rows
    total = order(G) ** n
    if total > bound:
        raise BoundExceededError(f"{total} maps exceed the enumeration bound {bound}")
    Cn = np.array(C.entries, dtype=np.int64)
    hits = 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        hits += int(_condition3_batch(maps_from_indices(idx, G, n), Cn, G.divisors).sum())
    return Fraction(hits, total)


def random_maps(G: FiniteAbelianGroup, n: int, seed: SeedSpec, count: int) -> np.ndarray:
    """Uniform maps (Z/a)^n -> G for streams seed.stream_index + t, shape (count, r, n)."""
    r = len(G.divisors)
    if r == 0:
        return np.zeros((count, 0, n), dtype=np.int64)
    words = seed.stream_bits(count, r, n, _CHANNEL_MAPS)
    out = np.empty((count, r, n), dtype=np.int64)
    for i, d in enumerate(G.divisors):
        out[:, i, :] = words_mod(words[:, i, :], d)
    return out


def isotropy_probability_mc(
    C: ExactMatrix, G: FiniteAbelianGroup, a: int, trials: int, seed: SeedSpec, chunk: int = 1 << 16
) -> MomentEstimate:
    if trials < 1:
        raise ValueError("trials must be positive")
    _check_form(C, G, a)
    n = C.rows
    Cn = np.array(C.entries, dtype=np.int64)
    hits = 0
    for start in range(0, trials, chunk):
        count = min(chunk, trials - start)
        Fs = random_maps(G, n, seed.child(seed.stream_index + start), count)
        hits += int(_condition3_batch(Fs, Cn, G.divisors).sum())
    p = hits / trials
    stderr = (p * (1 - p) / (trials - 1)) ** 0.5 if trials > 1 else 0.0
    return MomentEstimate(p, stderr, trials, seed, G, extra={"hits": hits})


def closed_form_rank2(p: int, c: int) -> Fraction:
    """Isotropy probability of a uniform map onto (Z/p)^2 for a form of rank c mod p."""
    return Fraction(1, p) + Fraction(1, p**c) * (1 - Fraction(1, p))


# finite-field view


def _row_space_mod_p(rows, p: int) -> list[list[int]]:
    A = [[x % p for x in r] for r in rows]
    basis = []
    cols = len(A[0]) if A else 0
    for c in range(cols):
        piv = next((r for r in A if r[c]), None)
        if piv is None:
            continue
        inv = pow(piv[c], -1, p)
        piv = [(x * inv) % p for x in piv]
        A = [[(x - r[c] * y) % p for x, y in zip(r, piv)] for r in A if r is not piv]
        A = [r for r in A if any(r)]
        basis.append(piv)
    return basis


def finite_field_isotropy(C: ExactMatrix, F: GroupMap, p: int | None = None) -> bool:
    """Whether the image of the reduced dual map is an isotropic subspace for the reduced form.

    Requires a target of the form (Z/a)^r and C divisible by a/p; the reduced
    form is C/(a/p) mod p.
    """
    _check_inputs(F, C)
    a = F.modulus
    if p is None:
        primes = list(factorint(a))
        if len(primes) != 1 or a != primes[0]:
            raise ValueError("give p explicitly unless the modulus is prime")
        p = primes[0]
    if not isprime(p) or a % p:
        raise NotPrimeError(f"{p} is not a prime dividing {a}")
    if any(d != a for d in F.divisors):
        raise ValueError("target must be a free module (Z/a)^r")
    b = a // p
    if any(x % b for row in C.entries for x in row):
        raise ValueError(f"form must be divisible by {b}")
    Cbar = ExactMatrix([[x // b for x in row] for row in C.entries], p)
    V = _row_space_mod_p(F.matrix, p)
    return all(_pairing(u, Cbar, v) % p == 0 for u, v in itertools.combinations(V, 2))


# codes and depth


def _subsets(n: int, max_size: int):
    total = sum(comb(n, s) for s in range(max_size + 1))
    if total > SUBSET_BOUND:
        raise BoundExceededError(f"{total} deletion sets exceed the bound {SUBSET_BOUND}")
    for s in range(max_size + 1):
        yield from itertools.combinations(range(n), s)


def code_distance_check(F: GroupMap, w: int) -> bool:
    """Whether F stays surjective after deleting any fewer than w coordinates."""
    if w < 1:
        raise ValueError("w must be positive")
    for sigma in _subsets(F.n, min(w - 1, F.n)):
        keep = [c for c in range(F.n) if c not in sigma]
        if F.image_index(keep) != 1:
            return False
    return True


def _length(D: int) -> int:
    return sum(factorint(D).values())


def w_depth(F: GroupMap, w: int) -> int:
    """Largest index D = [G : F(span of kept coordinates)] reachable by deleting fewer than l(D) w coordinates."""
    if w < 1:
        raise ValueError("w must be positive")
    if not F.divisors:
        return 1
    max_len = _length(order(F.target))
    best = 1
    for sigma in _subsets(F.n, min(max_len * w - 1, F.n)):
        keep = [c for c in range(F.n) if c not in sigma]
        D = F.image_index(keep)
        if D > best and len(sigma) < _length(D) * w:
            best = D
    return best


def random_alternating(n: int, a: int, seed: SeedSpec) -> ExactMatrix:
    """Uniform alternating n x n matrix over Z/a."""
    words = seed.bits(n, n, 11)
    U = np.triu(words_mod(words, a), 1)
    return ExactMatrix(U - U.T, a)


def random_surjection(G: FiniteAbelianGroup, n: int, a: int, seed: SeedSpec, tries: int = 1000) -> GroupMap:
    """Uniform surjection (by rejection) onto G."""
    for t in range(tries):
        Fs = random_maps(G, n, seed.child(seed.stream_index * tries + t), 1)[0]
        F = GroupMap(G, tuple(map(tuple, Fs.tolist())), a, n)
        if F.is_surjective():
            return F
    raise ValueError(f"no surjection onto {G.pretty()} found in {tries} tries")


__all__ = [
    "GroupMap",
    "IsotropyReport",
    "brute_force_witness",
    "build_witness",
    "check_condition2_smith",
    "check_condition3",
    "closed_form_rank2",
    "code_distance_check",
    "condition3_failure",
    "exhaustive_witness_search",
    "finite_field_isotropy",
    "isotropy_probability_exact",
    "isotropy_probability_mc",
    "isotropy_report",
    "maps_from_indices",
    "random_alternating",
    "random_maps",
    "random_surjection",
    "smith_coordinates",
    "smith_form_of",
    "w_depth",
]
