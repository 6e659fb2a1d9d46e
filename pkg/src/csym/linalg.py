"""Dense exact matrices over Z and Z/aZ.

Entries are Python integers, so nothing ever wraps.  The Smith normal form
works over Z; modular cokernels are computed by lifting to Z and adjoining
the relations a*e_i.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np
from sympy import isprime

from .errors import DimensionError, NotPrimeError
from .groups import FiniteAbelianGroup

# above this modulus the numpy path could overflow int64 products
_NUMPY_MODULUS_LIMIT = 1 << 30
_NUMPY_MIN_SIZE = 10


class ExactMatrix:
    """Immutable rows x cols matrix; modulus 0 means entries in Z."""

    __slots__ = ("rows", "cols", "modulus", "entries")

    def __init__(self, entries, modulus: int = 0):
        if isinstance(entries, np.ndarray):
            entries = entries.tolist()
        rows = tuple(tuple(int(x) for x in row) for row in entries)
        if not rows or not rows[0]:
            raise DimensionError("matrix dimensions must be positive")
        if any(len(r) != len(rows[0]) for r in rows):
            raise DimensionError("ragged rows")
        if modulus < 0:
            raise ValueError("modulus must be nonnegative")
        if modulus:
            rows = tuple(tuple(x % modulus for x in r) for r in rows)
        object.__setattr__(self, "entries", rows)
        object.__setattr__(self, "rows", len(rows))
        object.__setattr__(self, "cols", len(rows[0]))
        object.__setattr__(self, "modulus", int(modulus))

    def __setattr__(self, name, value):
        raise AttributeError("ExactMatrix is immutable")

    @classmethod
    def zeros(cls, rows: int, cols: int | None = None, modulus: int = 0) -> ExactMatrix:
        return cls([[0] * (rows if cols is None else cols) for _ in range(rows)], modulus)

    @classmethod
    def identity(cls, n: int, modulus: int = 0) -> ExactMatrix:
        return cls([[int(i == j) for j in range(n)] for i in range(n)], modulus)

    @classmethod
    def diagonal(cls, values, modulus: int = 0) -> ExactMatrix:
        n = len(values)
        return cls([[values[i] if i == j else 0 for j in range(n)] for i in range(n)], modulus)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return self.modulus == other.modulus and self.entries == other.entries

    def __hash__(self):
        return hash((self.modulus, self.entries))

    def __repr__(self):
        return f"ExactMatrix({[list(r) for r in self.entries]}, modulus={self.modulus})"

    def tolist(self) -> list[list[int]]:
        return [list(r) for r in self.entries]

    def array(self) -> np.ndarray:
        """Entries as an int64 array (object dtype if they do not fit)."""
        big = max(abs(x) for r in self.entries for x in r)
        return np.array(self.entries, dtype=np.int64 if big < (1 << 62) else object)

    def lift(self) -> ExactMatrix:
        return ExactMatrix(self.entries, 0)

    def reduce(self, a: int) -> ExactMatrix:
        return ExactMatrix(self.entries, a)

    def transpose(self) -> ExactMatrix:
        return ExactMatrix(list(zip(*self.entries)), self.modulus)

    T = property(transpose)

    def _check_same(self, other: ExactMatrix):
        if self.modulus != other.modulus:
            raise DimensionError(f"modulus mismatch: {self.modulus} vs {other.modulus}")

    def __add__(self, other: ExactMatrix) -> ExactMatrix:
        self._check_same(other)
        if self.shape != other.shape:
            raise DimensionError("shape mismatch")
        return ExactMatrix(
            [[x + y for x, y in zip(r, s)] for r, s in zip(self.entries, other.entries)], self.modulus
        )

    def __neg__(self) -> ExactMatrix:
        return ExactMatrix([[-x for x in r] for r in self.entries], self.modulus)

    def __sub__(self, other: ExactMatrix) -> ExactMatrix:
        return self + (-other)

    def __matmul__(self, other: ExactMatrix) -> ExactMatrix:
        self._check_same(other)
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        cols = list(zip(*other.entries))
        return ExactMatrix(
            [[sum(x * y for x, y in zip(r, c)) for c in cols] for r in self.entries], self.modulus
        )

    def scale(self, c: int) -> ExactMatrix:
        return ExactMatrix([[c * x for x in r] for r in self.entries], self.modulus)

    def is_zero(self) -> bool:
        return not any(x for r in self.entries for x in r)

    def to_json(self) -> dict:
        return {"modulus": self.modulus, "rows": self.tolist()}

    @classmethod
    def from_json(cls, data) -> ExactMatrix:
        if isinstance(data, str):
            data = json.loads(data)
        return cls(data["rows"], int(data.get("modulus", 0)))

    @classmethod
    def load(cls, path) -> ExactMatrix:
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)


@dataclass(frozen=True)
class SmithDecomposition:
    D: ExactMatrix
    rank: int
    U: ExactMatrix | None = None
    V: ExactMatrix | None = None

    @property
    def invariant_factors(self) -> list[int]:
        return [self.D[i, i] for i in range(min(self.D.shape))]


def _identity_rows(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def smith_normal_form(M: ExactMatrix, with_transforms: bool = False) -> SmithDecomposition:
    """Smith normal form over Z with U @ M @ V == D.

    Pivots on the nonzero entry of least absolute value, clears its row and
    column, and repairs divisibility failures by adding the offending row
    into the pivot row.
    """
    if M.modulus != 0:
        raise ValueError("smith_normal_form works over Z; lift the matrix first")
    A = M.tolist()
    m, n = M.shape
    U = _identity_rows(m) if with_transforms else None
    V = _identity_rows(n) if with_transforms else None

    def swap_rows(i, j):
        if i != j:
            A[i], A[j] = A[j], A[i]
            if U is not None:
                U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        if i != j:
            for row in A:
                row[i], row[j] = row[j], row[i]
            if V is not None:
                for row in V:
                    row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):
        # row_dst -= q * row_src
        A[dst] = [x - q * y for x, y in zip(A[dst], A[src])]
        if U is not None:
            U[dst] = [x - q * y for x, y in zip(U[dst], U[src])]

    def add_col(dst, src, q):
        for row in A:
            row[dst] -= q * row[src]
        if V is not None:
            for row in V:
                row[dst] -= q * row[src]

    def min_entry(t):
        best = None
        for i in range(t, m):
            for j in range(t, n):
                x = A[i][j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
        return best

    rank = 0
    for t in range(min(m, n)):
        best = min_entry(t)
        if best is None:
            break
        _, i, j = best
        swap_rows(t, i)
        swap_cols(t, j)
        while True:
            p = A[t][t]
            for i in range(t + 1, m):
                if A[i][t]:
                    add_row(i, t, A[i][t] // p)
            for j in range(t + 1, n):
                if A[t][j]:
                    add_col(j, t, A[t][j] // p)
            leftovers = [(abs(A[i][t]), i, t) for i in range(t + 1, m) if A[i][t]]
            leftovers += [(abs(A[t][j]), t, j) for j in range(t + 1, n) if A[t][j]]
            if leftovers:
                _, i, j = min(leftovers)
                swap_rows(t, i)
                swap_cols(t, j)
                continue
            bad = next(
                (i for i in range(t + 1, m) for j in range(t + 1, n) if A[i][j] % p),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, -1)
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            if U is not None:
                U[t] = [-x for x in U[t]]
        rank += 1

    return SmithDecomposition(
        D=ExactMatrix(A),
        rank=rank,
        U=ExactMatrix(U) if U is not None else None,
        V=ExactMatrix(V) if V is not None else None,
    )


def cokernel(M: ExactMatrix) -> FiniteAbelianGroup:
    """Z^rows / M(Z^cols) for an integer matrix."""
    if M.modulus != 0:
        raise ValueError("use cokernel_mod for matrices over Z/aZ")
    snf = smith_normal_form(M)
    factors = [d for d in snf.invariant_factors[: snf.rank] if d > 1]
    return FiniteAbelianGroup(tuple(factors), M.rows - snf.rank)


def _center(x: int, a: int) -> int:
    x %= a
    return x - a if 2 * x > a else x


def _lattice_orders_py(A: list[list[int]], a: int) -> list[int]:
    """Cyclic orders of Z^m / (colspan(A) + aZ^m), entries kept reduced mod a.

    The block a*I of the augmented system never has to be stored: every row
    operation maps aZ^m to itself, so it only licenses reducing entries mod a.
    """
    m = len(A)
    k = len(A[0]) if m else 0
    A = [[_center(x, a) for x in row] for row in A]
    orders = []
    t = 0
    while t < min(m, k):
        best = None
        for i in range(t, m):
            for j in range(t, k):
                x = A[i][j]
                if x and (best is None or abs(x) < best[0]):
                    best = (abs(x), i, j)
        if best is None:
            break
        _, i, j = best
        while True:
            A[t], A[i] = A[i], A[t]
            for row in A:
                row[t], row[j] = row[j], row[t]
            p = A[t][t]
            for r in range(t + 1, m):
                if A[r][t]:
                    q = (2 * A[r][t] + p) // (2 * p)
                    A[r] = [_center(x - q * y, a) for x, y in zip(A[r], A[t])]
            prow = A[t]
            for c in range(t + 1, k):
                if prow[c]:
                    q = (2 * prow[c] + p) // (2 * p)
                    for row in A:
                        row[c] = _center(row[c] - q * row[t], a)
            left = [(abs(A[r][t]), r, t) for r in range(t + 1, m) if A[r][t]]
            left += [(abs(A[t][c]), t, c) for c in range(t + 1, k) if A[t][c]]
            if not left:
                break
            _, i, j = min(left)
        orders.append(gcd(p, a))
        t += 1
    orders += [a] * (m - t)
    return orders


def _lattice_orders_np(W: np.ndarray, a: int) -> list[int]:
    half = a // 2
    W = (W.astype(np.int64) + half) % a - half
    m, k = W.shape
    orders = []
    t = 0
    while t < min(m, k):
        sub = np.abs(W[t:, t:])
        sub[sub == 0] = a + 1
        flat = int(np.argmin(sub))
        if sub.flat[flat] == a + 1:
            break
        i, j = divmod(flat, k - t)
        i += t
        j += t
        while True:
            W[[t, i]] = W[[i, t]]
            W[:, [t, j]] = W[:, [j, t]]
            p = int(W[t, t])
            col = W[t + 1 :, t]
            if col.any():
                q = np.floor_divide(2 * col + p, 2 * p)
                W[t + 1 :] -= np.outer(q, W[t])
                W[t + 1 :] = (W[t + 1 :] + half) % a - half
            row = W[t, t + 1 :]
            if row.any():
                q = np.floor_divide(2 * row + p, 2 * p)
                W[:, t + 1 :] -= np.outer(W[:, t], q)
                W[:, t + 1 :] = (W[:, t + 1 :] + half) % a - half
            col = np.abs(W[t + 1 :, t])
            row = np.abs(W[t, t + 1 :])
            if not col.any() and not row.any():
                break
            col[col == 0] = a + 1
            row[row == 0] = a + 1
            ci, rj = int(np.argmin(col)), int(np.argmin(row))
            if col[ci] <= row[rj]:
                i, j = t + 1 + ci, t
            else:
                i, j = t, t + 1 + rj
        orders.append(gcd(p, a))
        t += 1
    orders += [a] * (m - t)
    return orders


def _lattice_orders_batch(W: np.ndarray, a: int) -> np.ndarray:
    """``_lattice_orders_np`` run on a stack of matrices at once; returns (batch, rows) orders.

    After step t the pivot row and column are clear, so only the trailing
    block is carried forward.
    """
    half = a // 2
    dtype = np.int32 if a < 1 << 15 else np.int64
    S = ((W.astype(np.int64) + half) % a - half).astype(dtype)
    B, m, k = S.shape
    big = a + 1
    orders = np.full((B, m), a, dtype=np.int64)
    alive = np.arange(B)
    for t in range(min(m, k)):
        # S holds the trailing blocks of the matrices listed in `alive`
        mm, kk = S.shape[1], S.shape[2]
        mag = np.abs(S).reshape(len(alive), -1)
        mag[mag == 0] = big
        flat = np.argmin(mag, axis=1)
        keep = mag[np.arange(len(alive)), flat] != big
        S, alive, flat = S[keep], alive[keep], flat[keep]
        if not alive.size:
            break
        i, j = flat // kk, flat % kk
        pending = np.arange(alive.size)
        while pending.size:
            sub = S[pending]
            idx = np.arange(pending.size)
            rows0 = sub[idx, 0].copy()
            sub[idx, 0] = sub[idx, i]
            sub[idx, i] = rows0
            cols0 = sub[idx, :, 0].copy()
            sub[idx, :, 0] = sub[idx, :, j]
            sub[idx, :, j] = cols0
            p = sub[:, 0, 0][:, None]
            q = np.floor_divide(2 * sub[:, 1:, 0] + p, 2 * p)
            sub[:, 1:] -= q[:, :, None] * sub[:, 0, None, :]
            q = np.floor_divide(2 * sub[:, 0, 1:] + p, 2 * p)
            sub[:, :, 1:] -= sub[:, :, 0, None] * q[:, None, :]
            sub += half
            sub %= a
            sub -= half
            S[pending] = sub
            col = np.abs(sub[:, 1:, 0])
            row = np.abs(sub[:, 0, 1:])
            col[col == 0] = big
            row[row == 0] = big
            if mm > 1:
                ci = np.argmin(col, axis=1)
                cv = col[idx, ci]
            else:
                ci = np.zeros(pending.size, dtype=np.int64)
                cv = np.full(pending.size, big)
            if kk > 1:
                rj = np.argmin(row, axis=1)
                rv = row[idx, rj]
            else:
                rj = np.zeros(pending.size, dtype=np.int64)
                rv = np.full(pending.size, big)
            done = (cv == big) & (rv == big)
            orders[alive[pending[done]], t] = np.gcd(p[done, 0].astype(np.int64), a)
            use_col = cv <= rv
            i = np.where(use_col, 1 + ci, 0)[~done]
            j = np.where(use_col, 0, 1 + rj)[~done]
            pending = pending[~done]
        S = S[:, 1:, 1:]
    return orders


@lru_cache(maxsize=4096)
def _group_from_orders(orders: tuple) -> FiniteAbelianGroup:
    return FiniteAbelianGroup.from_orders(*orders)


def cokernel_mod_batch(Ws: np.ndarray, a: int) -> list[FiniteAbelianGroup]:
    """Cokernels over Z/aZ of a stack of matrices (batch, rows, cols)."""
    Ws = np.asarray(Ws)
    if a < 1:
        raise ValueError("modulus must be positive")
    if a == 1:
        return [FiniteAbelianGroup()] * len(Ws)
    if a >= _NUMPY_MODULUS_LIMIT:
        return [cokernel_mod_array(W, a) for W in Ws]
    out = []
    for row in _lattice_orders_batch(Ws, a):
        nontrivial = row[row > 1]
        nontrivial.sort()
        out.append(_group_from_orders(tuple(int(x) for x in nontrivial)))
    return out


def cokernel_mod(M: ExactMatrix, modulus: int | None = None) -> FiniteAbelianGroup:
    """(Z/aZ)^rows / M((Z/aZ)^cols).

    Equivalent to the Z-cokernel of the lift of M stacked with a*I.
    """
    a = M.modulus if modulus is None else modulus
    if a < 1:
        raise ValueError("cokernel_mod needs a modulus a >= 1")
    if a == 1:
        return FiniteAbelianGroup()
    if a < _NUMPY_MODULUS_LIMIT and max(M.shape) >= _NUMPY_MIN_SIZE:
        orders = _lattice_orders_np(np.array(M.entries, dtype=np.int64), a)
    else:
        orders = _lattice_orders_py(M.tolist(), a)
    return FiniteAbelianGroup.from_orders(*orders)


def cokernel_mod_array(W: np.ndarray, a: int) -> FiniteAbelianGroup:
    """cokernel_mod for a raw integer array, skipping ExactMatrix construction."""
    if a == 1:
        return FiniteAbelianGroup()
    if a < _NUMPY_MODULUS_LIMIT and max(W.shape) >= _NUMPY_MIN_SIZE:
        orders = _lattice_orders_np(W, a)
    else:
        orders = _lattice_orders_py(np.asarray(W).tolist(), a)
    return FiniteAbelianGroup.from_orders(*orders)


def augmented_system(M: ExactMatrix) -> ExactMatrix:
    """The integer matrix [lift(M) | a*I] whose Z-cokernel is the cokernel of M over Z/aZ."""
    a = M.modulus
    aug = [list(r) + [a if i == j else 0 for j in range(M.rows)] for i, r in enumerate(M.entries)]
    return ExactMatrix(aug)


def rank_mod_p(M: ExactMatrix, p: int) -> int:
    if not isprime(p):
        raise NotPrimeError(f"{p} is not prime")
    A = [[x % p for x in r] for r in M.entries]
    m, n = M.shape
    rank = 0
    for c in range(n):
        piv = next((r for r in range(rank, m) if A[r][c]), None)
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        inv = pow(A[rank][c], -1, p)
        A[rank] = [(x * inv) % p for x in A[rank]]
        for r in range(m):
            if r != rank and A[r][c]:
                f = A[r][c]
                A[r] = [(x - f * y) % p for x, y in zip(A[r], A[rank])]
        rank += 1
        if rank == m:
            break
    return rank


def rank_mod_p_batch(A: np.ndarray, p: int) -> np.ndarray:
    """Rank over F_p of each matrix in a stack (batch, rows, cols)."""
    A = A.copy() % p
    batch, r, cols = A.shape
    rank = np.zeros(batch, dtype=np.int64)
    rows = np.arange(batch)
    inv = np.array([0] + [pow(x, -1, p) for x in range(1, p)], dtype=np.int64)
    for c in range(cols):
        # pivot: first row >= rank with a nonzero in column c
        mask = (np.arange(r)[None, :] >= rank[:, None]) & (A[:, :, c] != 0)
        has = mask.any(axis=1)
        piv = np.argmax(mask, axis=1)
        idx = rows[has]
        if idx.size == 0:
            continue
        pr, tr = piv[has], rank[has]
        prow = A[idx, pr].copy()
        A[idx, pr] = A[idx, tr]
        prow = (prow * inv[prow[:, c]][:, None]) % p
        A[idx, tr] = prow
        factors = A[idx, :, c].copy()
        factors[np.arange(idx.size), tr] = 0
        A[idx] = (A[idx] - factors[:, :, None] * prow[:, None, :]) % p
        rank[has] += 1
    return rank


def min_generators_cokernel(M: ExactMatrix) -> int:
    if not M.is_square:
        raise DimensionError("square matrix required")
    G = cokernel_mod(M) if M.modulus else cokernel(M)
    return G.rank


def is_alternating(C: ExactMatrix) -> bool:
    if not C.is_square:
        return False
    a = C.modulus

    def zero(x):
        return x % a == 0 if a else x == 0

    n = C.rows
    return all(zero(C[i, i]) for i in range(n)) and all(
        zero(C[i, j] + C[j, i]) for i in range(n) for j in range(i + 1, n)
    )


def content(C: ExactMatrix) -> int:
    """gcd of the entries, taken together with the modulus."""
    h = C.modulus
    for r in C.entries:
        for x in r:
            h = gcd(h, x)
    return h
