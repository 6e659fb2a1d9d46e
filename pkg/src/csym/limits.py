"""Cohen-Lenstra and sandpile limit laws, evaluated exactly up to a tail bound."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd, prod

import numpy as np
from sympy import isprime
from sympy.utilities.iterables import partitions as _sympy_partitions

from .errors import BoundExceededError, NotPrimeError
from .groups import (
    FiniteAbelianGroup,
    aut_order,
    exterior_square_order,
    order,
    prime_partitions,
    tensor_mod,
    torsion_of_order_dividing,
)
from .linalg import rank_mod_p_batch

PAIRING_ORDER_BOUND = 64
DEFAULT_TRUNCATION = 1e-12


@dataclass(frozen=True)
class LimitValue:
    """A probability together with a rigorous bound on its truncation error."""

    value: float
    tail_bound: float

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class LimitDistribution:
    kind: str  # "cohen_lenstra" or "sandpile"
    p: int
    u: int = 0
    truncation: float = DEFAULT_TRUNCATION

    def __post_init__(self):
        if self.kind not in ("cohen_lenstra", "sandpile"):
            raise ValueError(f"unknown limit distribution {self.kind!r}")
        if not isprime(self.p):
            raise NotPrimeError(f"{self.p} is not prime")
        if self.u < 0:
            raise ValueError("u must be nonnegative")

    @classmethod
    def cohen_lenstra(cls, p: int, u: int = 0) -> LimitDistribution:
        return cls("cohen_lenstra", p, u)

    @classmethod
    def sandpile(cls, p: int) -> LimitDistribution:
        return cls("sandpile", p)

    def probability(self, G: FiniteAbelianGroup) -> LimitValue:
        if self.kind == "cohen_lenstra":
            return cl_probability(G, self.p, self.u, self.truncation)
        return sandpile_probability(G, self.p, self.truncation)

    def label(self) -> str:
        if self.kind == "cohen_lenstra":
            return f"cohen_lenstra(p={self.p}, u={self.u})"
        return f"sandpile(p={self.p})"


def tail_product(p: int, shift: int, step: int = 1, truncation: float = DEFAULT_TRUNCATION) -> LimitValue:
    """prod_{k>=1} (1 - p^-(step*k + shift)), truncated once a factor is within `truncation` of 1.

    With x_k = p^-(step*k + shift) <= 1/2, the dropped factors satisfy
    |log prod (1 - x_k)| <= 2 sum x_k, which is bounded by a geometric series.
    """
    value = Fraction(1)
    k = 1
    while True:
        x = Fraction(1, p ** (step * k + shift))
        if x < truncation:
            break
        value *= 1 - x
        k += 1
    # remaining sum_{j>=k} x_j <= x_k / (1 - p^-step)
    x_k = 1.0 / p ** (step * k + shift)
    rest = 2 * x_k / (1 - p**-step)
    return LimitValue(float(value), float(value) * rest)


def _require_p_group(G: FiniteAbelianGroup, p: int):
    if not isprime(p):
        raise NotPrimeError(f"{p} is not prime")
    if not G.is_finite or any(q != p for q in prime_partitions(G)):
        raise ValueError(f"{G.pretty()} is not a finite abelian {p}-group")


def cl_probability(G: FiniteAbelianGroup, p: int, u: int = 0, truncation: float = DEFAULT_TRUNCATION) -> LimitValue:
    """P[Gamma_CL^(p,u) = G] = prod_{k>=1} (1 - p^-(k+u)) / (|G|^u |Aut G|)."""
    _require_p_group(G, p)
    tail = tail_product(p, u, truncation=truncation)
    w = 1 / (order(G) ** u * aut_order(G))
    return LimitValue(tail.value * w, tail.tail_bound * w)


def _pairing_socle_matrix(B: np.ndarray, divisors, p: int) -> np.ndarray:
    """Matrix over F_p of the induced map G[p] -> Hom(G, Q/Z)[p] for a batch of Gram matrices.

    B[..., i, j] holds phi(g_i, g_j) * gcd(d_i, d_j) in Z/gcd(d_i, d_j).
    The element (d_i/p) g_i maps to the character with value
    (d_i/p) B_ij / gcd(d_i, d_j) on g_j; its coordinate in the p-torsion of
    the dual, scaled by p, is d_i B_ij / gcd(d_i, d_j) mod p.
    """
    d = np.array(divisors, dtype=np.int64)
    g = np.gcd.outer(d, d)
    scale = d[:, None] // g
    return (B * scale) % p


def count_perfect_symmetric_pairings(G: FiniteAbelianGroup, bound: int = PAIRING_ORDER_BOUND) -> int:
    """Brute-force count of perfect symmetric bilinear pairings G x G -> Q/Z.

    Enumerates every symmetric Gram matrix B_ij in Z/gcd(d_i, d_j) and counts
    those whose adjoint map G -> Hom(G, Q/Z) is injective, which for a
    p-group means injective on the p-torsion.
    """
    if order(G) > bound:
        raise BoundExceededError(f"|G| = {order(G)} exceeds pairing enumeration bound {bound}")
    return _count_pairings(G)


@lru_cache(maxsize=None)
def _count_pairings(G: FiniteAbelianGroup) -> int:
    primes = list(prime_partitions(G))
    if not primes:
        return 1
    if len(primes) > 1:
        # the pairing splits over Sylow subgroups
        from .groups import sylow

        return prod(_count_pairings(sylow(G, q)) for q in primes)
    p = primes[0]
    d = G.divisors
    r = len(d)
    slots = [(i, j) for i in range(r) for j in range(i, r)]
    sizes = [gcd(d[i], d[j]) for i, j in slots]
    total = 0
    chunk = 1 << 15
    it = itertools.product(*(range(s) for s in sizes))
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        B = np.zeros((len(block), r, r), dtype=np.int64)
        for col, (i, j) in enumerate(slots):
            B[:, i, j] = block[:, col]
            B[:, j, i] = block[:, col]
        N = _pairing_socle_matrix(B, d, p)
        total += int((rank_mod_p_batch(N, p) == r).sum())
    return total


def sandpile_probability(G: FiniteAbelianGroup, p: int, truncation: float = DEFAULT_TRUNCATION) -> LimitValue:
    """#{perfect symmetric pairings} / (|G| |Aut G|) * prod_{k>=1} (1 - p^(1-2k))."""
    _require_p_group(G, p)
    tail = tail_product(p, -1, step=2, truncation=truncation)
    w = count_perfect_symmetric_pairings(G) / (order(G) * aut_order(G))
    return LimitValue(tail.value * w, tail.tail_bound * w)


def cl_moment(G: FiniteAbelianGroup, u: int = 0) -> Fraction:
    return Fraction(1, order(G) ** u)


def sandpile_moment(G: FiniteAbelianGroup) -> int:
    return exterior_square_order(G)


def h_moment(G: FiniteAbelianGroup, h: int) -> int:
    return exterior_square_order(torsion_of_order_dividing(G, h))


def isotropy_fraction_limit(G: FiniteAbelianGroup, h: int) -> Fraction:
    return Fraction(h_moment(G, h), exterior_square_order(G))


def p_groups(p: int, max_exponent: int):
    """Abelian p-groups of order <= p^max_exponent, by order then partition (lexicographic)."""
    for e in range(max_exponent + 1):
        parts = []
        for part in _sympy_partitions(e):
            parts.append(sorted((k for k, mult in part.items() for _ in range(mult)), reverse=True))
        for lam in sorted(parts):
            yield FiniteAbelianGroup.from_orders(*(p**x for x in lam))


@lru_cache(maxsize=None)
def partial_mass(dist: LimitDistribution, max_exponent: int) -> float:
    return sum(dist.probability(G).value for G in p_groups(dist.p, max_exponent))


def reduced_class_probability(
    dist: LimitDistribution, H: FiniteAbelianGroup, a: int, max_exponent: int = 6
) -> LimitValue:
    """P[Gamma tensor Z/aZ = H] for a power a of dist.p.

    When every invariant factor of H is below a, Gamma must equal H and the
    value is exact.  Otherwise the groups reducing to H are summed over
    |Gamma| <= p^max_exponent and the unenumerated mass is added to the tail.
    """
    _require_p_group(H, dist.p)
    if not H.divisors or H.exponent < a:
        return dist.probability(H)
    value = err = 0.0
    for G in p_groups(dist.p, max_exponent):
        if tensor_mod(G, a) == H:
            pr = dist.probability(G)
            value += pr.value
            err += pr.tail_bound
    missing = max(0.0, 1.0 - partial_mass(dist, max_exponent))
    return LimitValue(value, err + missing)
