"""Finitely generated abelian groups in invariant-factor form.

A group is stored as a divisibility chain ``d_1 | d_2 | ... | d_r`` (every
``d_i >= 2``) together with a free rank, so that

    G = Z^f x Z/d_1 x ... x Z/d_r.

Two groups are isomorphic exactly when their stored forms are equal.

>>> G = FiniteAbelianGroup.from_orders(4, 6)
>>> G
FiniteAbelianGroup(divisors=(2, 12), free_rank=0)
>>> count_hom(FiniteAbelianGroup.parse("4"), FiniteAbelianGroup.parse("6"))
2
>>> count_sur(G, FiniteAbelianGroup.parse("2"))
3
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import gcd, prod

from sympy import factorint, isprime

from .errors import BoundExceededError, InfiniteGroupError, NotPrimeError

SUBGROUP_ORDER_BOUND = 10**4


@dataclass(frozen=True)
class FiniteAbelianGroup:
    divisors: tuple[int, ...] = ()
    free_rank: int = 0

    def __post_init__(self):
        divisors = tuple(int(d) for d in self.divisors)
        object.__setattr__(self, "divisors", divisors)
        if self.free_rank < 0:
            raise ValueError("free rank must be nonnegative")
        for d in divisors:
            if d < 2:
                raise ValueError(f"invariant factors must be >= 2, got {d}")
        for d, e in zip(divisors, divisors[1:]):
            if e % d:
                raise ValueError(f"divisibility chain broken: {d} does not divide {e}")

    @classmethod
    def from_orders(cls, *orders: int, free_rank: int = 0) -> FiniteAbelianGroup:
        """Canonical form of Z/n_1 x ... x Z/n_k; an order of 0 means a copy of Z."""
        free = free_rank
        by_prime: dict[int, list[int]] = {}
        for n in orders:
            n = abs(int(n))
            if n == 0:
                free += 1
                continue
            for p, e in factorint(n).items():
                by_prime.setdefault(p, []).append(p**e)
        length = max((len(v) for v in by_prime.values()), default=0)
        chain = [1] * length
        for powers in by_prime.values():
            powers.sort()
            # largest prime powers go to the last invariant factors
            for i, q in enumerate(reversed(powers)):
                chain[length - 1 - i] *= q
        return cls(tuple(chain), free)

    @classmethod
    def trivial(cls) -> FiniteAbelianGroup:
        return cls()

    @classmethod
    def parse(cls, text: str) -> FiniteAbelianGroup:
        """Parse the literal syntax ``"2,4"`` or ``"2,4;free=1"``; ``"1"`` is trivial."""
        text = text.strip()
        free = 0
        if ";" in text:
            text, rest = text.split(";", 1)
            key, _, value = rest.partition("=")
            if key.strip() != "free":
                raise ValueError(f"unknown group literal option {key!r}")
            free = int(value)
        orders = [int(tok) for tok in text.split(",") if tok.strip()]
        if any(n < 1 for n in orders):
            raise ValueError("group literal entries must be positive")
        return cls.from_orders(*orders, free_rank=free)

    def __str__(self):
        body = ",".join(map(str, self.divisors)) or "1"
        if self.free_rank:
            return f"{body};free={self.free_rank}"
        return body

    def pretty(self) -> str:
        parts = ["Z"] * self.free_rank + [f"Z/{d}" for d in self.divisors]
        return " x ".join(parts) if parts else "trivial"

    @property
    def is_finite(self) -> bool:
        return self.free_rank == 0

    @property
    def rank(self) -> int:
        """Minimal number of generators."""
        return len(self.divisors) + self.free_rank

    @property
    def exponent(self) -> int:
        if not self.is_finite:
            return 0
        return self.divisors[-1] if self.divisors else 1

    @property
    def torsion(self) -> FiniteAbelianGroup:
        return FiniteAbelianGroup(self.divisors)

    def primes(self) -> list[int]:
        return sorted(factorint(self.exponent)) if self.divisors else []

    def elements(self):
        _require_finite(self)
        return itertools.product(*(range(d) for d in self.divisors))

    def padded(self, n: int) -> tuple[int, ...]:
        """Divisor slots d_1 | ... | d_n with leading ones."""
        if len(self.divisors) > n:
            raise ValueError(f"{self} needs {len(self.divisors)} slots, only {n} available")
        return (1,) * (n - len(self.divisors)) + self.divisors


def _require_finite(G: FiniteAbelianGroup):
    if not G.is_finite:
        raise InfiniteGroupError(f"{G.pretty()} is infinite")


def _require_prime(p: int):
    if not isprime(p):
        raise NotPrimeError(f"{p} is not prime")


def order(G: FiniteAbelianGroup) -> int:
    _require_finite(G)
    return prod(G.divisors)


def exterior_square_order(G: FiniteAbelianGroup) -> int:
    _require_finite(G)
    r = len(G.divisors)
    return prod(d ** (r - i) for i, d in enumerate(G.divisors, start=1))


def torsion_of_order_dividing(G: FiniteAbelianGroup, h: int) -> FiniteAbelianGroup:
    """The subgroup G[h] of elements killed by h (free part contributes nothing)."""
    if h < 1:
        raise ValueError("h must be positive")
    return FiniteAbelianGroup.from_orders(*(gcd(d, h) for d in G.divisors))


def sylow(G: FiniteAbelianGroup, p: int) -> FiniteAbelianGroup:
    _require_finite(G)
    _require_prime(p)
    parts = []
    for d in G.divisors:
        q = 1
        while d % (q * p) == 0:
            q *= p
        parts.append(q)
    return FiniteAbelianGroup.from_orders(*parts)


def tensor_mod(G: FiniteAbelianGroup, a: int) -> FiniteAbelianGroup:
    """G tensor Z/aZ."""
    if a < 1:
        raise ValueError("a must be positive")
    return FiniteAbelianGroup.from_orders(*(gcd(d, a) for d in G.divisors), *([a] * G.free_rank))


def count_hom(G: FiniteAbelianGroup, H: FiniteAbelianGroup) -> int:
    _require_finite(H)
    size = order(H)
    return size**G.free_rank * prod(gcd(d, e) for d in G.divisors for e in H.divisors)


@dataclass(frozen=True)
class Subgroup:
    elements: frozenset
    group: FiniteAbelianGroup

    def __len__(self):
        return len(self.elements)


def _add(x, y, mods):
    return tuple((a + b) % m for a, b, m in zip(x, y, mods))


def _closure(S: frozenset, g: tuple, mods) -> frozenset:
    """The subgroup generated by S and g, as the union of cosets S + t*g."""
    out = set(S)
    step = g
    while step not in S:
        out.update(_add(s, step, mods) for s in S)
        step = _add(step, g, mods)
    return frozenset(out)


def _scale(m: int, x: tuple, mods) -> tuple:
    return tuple((m * xi) % d for xi, d in zip(x, mods))


def isomorphism_type(elements, mods) -> FiniteAbelianGroup:
    """Isomorphism type of a finite subgroup of Z/m_1 x ... x Z/m_k given by its elements.

    Uses |S[p^j]| = p^(sum_i min(lambda_i, j)) for each prime p dividing |S|.
    """
    elements = list(elements)
    size = len(elements)
    zero = tuple(0 for _ in mods)
    orders = []
    for p, e in factorint(size).items():
        counts = [1]
        j = 0
        while counts[-1] < p**e:
            j += 1
            q = p**j
            counts.append(sum(1 for x in elements if _scale(q, x, mods) == zero))
        conj = []
        for j in range(1, len(counts)):
            ratio = counts[j] // counts[j - 1]
            conj.append(_ilog(ratio, p))
        # conj[j-1] = number of cyclic factors of order >= p^j
        for j in range(len(conj)):
            nxt = conj[j + 1] if j + 1 < len(conj) else 0
            orders += [p ** (j + 1)] * (conj[j] - nxt)
    return FiniteAbelianGroup.from_orders(*orders)


def _ilog(n: int, p: int) -> int:
    k = 0
    while n > 1:
        n //= p
        k += 1
    return k


def enumerate_subgroups(H: FiniteAbelianGroup, bound: int = SUBGROUP_ORDER_BOUND) -> list[Subgroup]:
    """Every subgroup of H exactly once, smallest first."""
    return list(_subgroups(H, bound))


@lru_cache(maxsize=256)
def _subgroups(H: FiniteAbelianGroup, bound: int) -> tuple[Subgroup, ...]:
    _require_finite(H)
    if order(H) > bound:
        raise BoundExceededError(f"|H| = {order(H)} exceeds subgroup enumeration bound {bound}")
    mods = H.divisors
    elements = list(H.elements())
    trivial = frozenset([tuple(0 for _ in mods)])
    seen = {trivial}
    queue = [trivial]
    # Every subgroup is reached by a chain of prime-index steps, so only
    # elements of prime order modulo S are adjoined.  g and g + s give the
    # same extension, and at prime index every element of T - S generates T.
    while queue:
        S = queue.pop()
        done = set(S)
        for g in elements:
            if g in done:
                continue
            done.update(_add(g, s, mods) for s in S)
            k, step = 1, g
            while step not in S:
                step = _add(step, g, mods)
                k += 1
            if not isprime(k):
                continue
            T = _closure(S, g, mods)
            done |= T
            if T not in seen:
                seen.add(T)
                queue.append(T)
    out = [Subgroup(S, isomorphism_type(S, mods)) for S in seen]
    out.sort(key=lambda s: (len(s.elements), sorted(s.elements)))
    return tuple(out)


def subgroup_type_counts(H: FiniteAbelianGroup, bound: int = SUBGROUP_ORDER_BOUND) -> Counter:
    return Counter(s.group for s in _subgroups(H, bound))


@lru_cache(maxsize=4096)
def count_sur(G: FiniteAbelianGroup, H: FiniteAbelianGroup, bound: int = SUBGROUP_ORDER_BOUND) -> int:
    """Number of surjections G -> H, by recursion over the subgroup lattice of H.

    #Sur(G, H) = #Hom(G, H) - sum over proper subgroups K < H of #Sur(G, K).
    """
    _require_finite(H)
    total = count_hom(G, H)
    for K, mult in subgroup_type_counts(H, bound).items():
        if K == H:
            continue
        total -= mult * count_sur(G, K, bound)
    return total


def _partition_aut(p: int, exps: list[int]) -> int:
    e = sorted(exps)
    r = len(e)
    d = [max(l for l in range(1, r + 1) if e[l - 1] == e[k]) for k in range(r)]
    c = [min(l for l in range(1, r + 1) if e[l - 1] == e[k]) for k in range(r)]
    out = 1
    for k in range(r):
        out *= p ** d[k] - p**k
    for j in range(r):
        out *= p ** (e[j] * (r - d[j]))
    for i in range(r):
        out *= p ** ((e[i] - 1) * (r - c[i] + 1))
    return out


def prime_partitions(G: FiniteAbelianGroup) -> dict[int, list[int]]:
    """Exponent partition of each Sylow subgroup, e.g. Z/2 x Z/12 -> {2: [1, 2], 3: [1]}."""
    _require_finite(G)
    out: dict[int, list[int]] = {}
    for d in G.divisors:
        for p, e in factorint(d).items():
            out.setdefault(p, []).append(e)
    return out


def aut_order(G: FiniteAbelianGroup) -> int:
    """|Aut(G)|, multiplied over Sylow parts using the p-group formula."""
    _require_finite(G)
    return prod(_partition_aut(p, exps) for p, exps in prime_partitions(G).items())
