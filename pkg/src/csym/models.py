"""Random matrix ensembles: i.i.d., symmetric, C-symmetric and their perturbations.

Every model is a frozen description.  Sampling goes through two steps: raw
entry draws are generated per *channel* (``"x"`` for the free entries on and
above the diagonal, ``"y"`` for auxiliary perturbation draws), then
:func:`assemble` turns a batch of draws into matrices.  The exact oracles in
:mod:`csym.harness` enumerate every possible draw and feed it through the same
:func:`assemble`, so the enumerated support is the sampled one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np
from sympy import primerange, primefactors

from .errors import ModelError
from .linalg import ExactMatrix, is_alternating
from .rng import SeedSpec, words_mod, words_to_unit

RANDOMIZED = "randomized"

KINDS = (
    "iid",
    "symmetric",
    "c_symmetric",
    "symmetric_mod_h",
    "corner_perturbed",
    "alternating_uniform",
    "random_corner",
)

_CHANNEL_IDS = {"x": 0, "y": 1}


@dataclass(frozen=True)
class EntryDistribution:
    """Finite-support distribution of a single matrix entry.

    kinds: ``uniform_mod`` (params ``(a,)``), ``two_point`` (``(v0, v1, prob1)``)
    and ``uniform_range`` (``(lo, hi)``, inclusive).
    """

    kind: str
    params: tuple

    @classmethod
    def uniform_mod(cls, a: int) -> EntryDistribution:
        if a < 1:
            raise ModelError("uniform_mod needs a >= 1")
        return cls("uniform_mod", (int(a),))

    @classmethod
    def two_point(cls, v0: int, v1: int, prob1) -> EntryDistribution:
        prob1 = Fraction(prob1)
        if not 0 <= prob1 <= 1:
            raise ModelError("prob1 must lie in [0, 1]")
        return cls("two_point", (int(v0), int(v1), prob1))

    @classmethod
    def uniform_range(cls, lo: int = 0, hi: int = 1) -> EntryDistribution:
        if hi < lo:
            raise ModelError("uniform_range needs lo <= hi")
        return cls("uniform_range", (int(lo), int(hi)))

    @classmethod
    def parse(cls, text: str, modulus: int = 0) -> EntryDistribution:
        """``uniform`` | ``uniform_mod:A`` | ``two_point:V0,V1,P`` | ``uniform_range:LO,HI``."""
        name, _, rest = text.strip().partition(":")
        args = [s.strip() for s in rest.split(",") if s.strip()]
        if name == "uniform":
            if not modulus:
                return cls.uniform_range(0, 1)
            return cls.uniform_mod(modulus)
        if name == "uniform_mod":
            return cls.uniform_mod(int(args[0]))
        if name == "two_point":
            return cls.two_point(int(args[0]), int(args[1]), Fraction(args[2]))
        if name == "uniform_range":
            return cls.uniform_range(int(args[0]), int(args[1]))
        raise ModelError(f"unknown distribution {text!r}")

    def __str__(self):
        if self.kind == "two_point":
            v0, v1, p = self.params
            return f"two_point:{v0},{v1},{p}"
        return f"{self.kind}:" + ",".join(map(str, self.params))

    def support(self) -> dict[int, Fraction]:
        if self.kind == "uniform_mod":
            (a,) = self.params
            return {v: Fraction(1, a) for v in range(a)}
        if self.kind == "uniform_range":
            lo, hi = self.params
            return {v: Fraction(1, hi - lo + 1) for v in range(lo, hi + 1)}
        v0, v1, p = self.params
        out: dict[int, Fraction] = {}
        for v, q in ((v0, 1 - p), (v1, p)):
            if q:
                out[v] = out.get(v, Fraction(0)) + q
        return out

    def draw(self, words: np.ndarray) -> np.ndarray:
        """Map uint64 words to entry values (int64), elementwise."""
        if self.kind == "uniform_mod":
            return words_mod(words, self.params[0])
        if self.kind == "uniform_range":
            lo, hi = self.params
            return words_mod(words, hi - lo + 1) + lo
        v0, v1, p = self.params
        return np.where(words_to_unit(words) < float(p), v1, v0).astype(np.int64)

    def values(self) -> list[int]:
        """Support points, in enumeration order, for uniform distributions."""
        sup = self.support()
        if len(set(sup.values())) != 1:
            raise ModelError(f"{self} is not uniform on its support")
        return sorted(sup)


def check_balanced(dist: EntryDistribution, modulus: int = 0) -> Fraction | None:
    """Largest eps with P[N = r mod p] <= 1 - eps for every relevant prime p and class r.

    Relevant primes are those dividing the modulus, or all primes when the
    modulus is 0 (entries in Z).  Returns None when no eps > 0 works.
    """
    sup = dist.support()
    if modulus == 1:
        return Fraction(1)
    if modulus:
        primes = primefactors(modulus)
    else:
        spread = max(sup) - min(sup)
        primes = list(primerange(2, spread + 1))
    worst = Fraction(0)
    for p in primes:
        mass: dict[int, Fraction] = {}
        for v, q in sup.items():
            mass[v % p] = mass.get(v % p, Fraction(0)) + q
        worst = max(worst, max(mass.values()))
    if not modulus:
        # primes beyond the spread separate every support point
        worst = max(worst, max(sup.values()))
    eps = 1 - worst
    return eps if eps > 0 else None


def standard_alternating(n: int, rank: int, modulus: int = 0, scale: int = 1) -> ExactMatrix:
    """Alternating matrix with ``rank // 2`` hyperbolic blocks [[0, s], [-s, 0]] on the diagonal."""
    if rank % 2 or rank > n:
        raise ModelError("alternating rank must be even and at most n")
    rows = [[0] * n for _ in range(n)]
    for b in range(rank // 2):
        rows[2 * b][2 * b + 1] = scale
        rows[2 * b + 1][2 * b] = -scale
    return ExactMatrix(rows, modulus)


def corner_form(n: int, positions, units, modulus: int = 0) -> ExactMatrix:
    rows = [[0] * n for _ in range(n)]
    for (i, j), u in zip(positions, units):
        rows[i][j] += u
        rows[j][i] -= u
    return ExactMatrix(rows, modulus)


@dataclass(frozen=True)
class MatrixModel:
    """Declarative description of one random square (or n x m) matrix ensemble.

    Construct through the classmethods; invalid models raise ModelError here,
    never at sampling time.  Positions are 0-indexed.
    """

    kind: str
    n: int
    modulus: int = 0
    dist: EntryDistribution = field(default_factory=EntryDistribution.uniform_range)
    m: int | None = None
    C: ExactMatrix | None = None
    h: int | None = None
    dist2: EntryDistribution | None = None
    positions: tuple = ()
    units: tuple = ()
    k: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        if self.n < 1:
            raise ModelError("n must be positive")
        if self.modulus < 0:
            raise ModelError("modulus must be nonnegative")
        for d in (self.dist, self.dist2):
            if d is not None and check_balanced(d, self.modulus) is None:
                raise ModelError(f"entry distribution {d} is not eps-balanced over modulus {self.modulus}")
        getattr(self, f"_validate_{self.kind}", lambda: None)()

    def _validate_iid(self):
        if self.m is not None and self.m < 1:
            raise ModelError("m must be positive")

    def _validate_c_symmetric(self):
        C = self.C
        if C is None or C.shape != (self.n, self.n):
            raise ModelError("c_symmetric needs an n x n form C")
        if C.modulus != self.modulus:
            raise ModelError(f"C has modulus {C.modulus}, model has {self.modulus}")
        if not is_alternating(C):
            raise ModelError("C must be alternating")

    def _validate_symmetric_mod_h(self):
        if self.h is None or self.h < 1:
            raise ModelError("symmetric_mod_h needs h >= 1")
        if self.modulus and self.modulus % self.h:
            raise ModelError("h must divide the modulus")

    def _validate_corner_perturbed(self):
        if len(self.positions) != len(self.units):
            raise ModelError("one unit per position")
        used = [i for pos in self.positions for i in pos]
        if any(i == j for i, j in self.positions):
            raise ModelError("corner positions must be off the diagonal")
        if len(set(used)) != len(used) or any(not 0 <= i < self.n for i in used):
            raise ModelError("corner positions must use distinct rows and columns")
        for u in self.units:
            ok = gcd(u, self.modulus) == 1 if self.modulus else abs(u) == 1
            if not ok:
                raise ModelError(f"{u} is not a unit mod {self.modulus}")

    def _validate_alternating_uniform(self):
        if not self.modulus:
            raise ModelError("alternating_uniform needs a finite ring")

    def _validate_random_corner(self):
        if not self.modulus:
            raise ModelError("random_corner needs a finite ring")
        if self.k is None or not 0 <= self.k <= self.n:
            raise ModelError("random_corner needs 0 <= k <= n")

    @classmethod
    def iid(cls, n: int, modulus: int = 0, dist=None, m: int | None = None) -> MatrixModel:
        return cls("iid", n, modulus, dist or _default_dist(modulus), m=m)

    @classmethod
    def symmetric(cls, n: int, modulus: int = 0, dist=None) -> MatrixModel:
        return cls("symmetric", n, modulus, dist or _default_dist(modulus))

    @classmethod
    def c_symmetric(cls, C: ExactMatrix, dist=None) -> MatrixModel:
        return cls("c_symmetric", C.rows, C.modulus, dist or _default_dist(C.modulus), C=C)

    @classmethod
    def symmetric_mod_h(cls, n: int, h: int, modulus: int = 0, dist=None, dist2=None) -> MatrixModel:
        dist = dist or _default_dist(modulus)
        return cls("symmetric_mod_h", n, modulus, dist, h=h, dist2=dist2 or dist)

    @classmethod
    def corner_perturbed(cls, n: int, positions, units=None, modulus: int = 0, dist=None) -> MatrixModel:
        positions = tuple((int(i), int(j)) for i, j in positions)
        units = tuple(units) if units is not None else (1,) * len(positions)
        return cls("corner_perturbed", n, modulus, dist or _default_dist(modulus), positions=positions, units=units)

    @classmethod
    def alternating_uniform(cls, n: int, modulus: int) -> MatrixModel:
        return cls("alternating_uniform", n, modulus, EntryDistribution.uniform_mod(modulus))

    @classmethod
    def random_corner(cls, n: int, k: int, modulus: int, dist=None) -> MatrixModel:
        """Uniform symmetric matrix plus a uniform strictly-upper k x k corner."""
        return cls("random_corner", n, modulus, dist or _default_dist(modulus), k=k)

    @property
    def cols(self) -> int:
        return self.m if self.kind == "iid" and self.m is not None else self.n

    def describe(self) -> dict:
        out = {"model": self.kind, "n": self.n, "modulus": self.modulus, "dist": str(self.dist)}
        if self.m is not None:
            out["m"] = self.m
        if self.h is not None:
            out["h"] = self.h
        if self.positions:
            out["positions"] = [list(p) for p in self.positions]
            out["units"] = list(self.units)
        if self.k is not None:
            out["k"] = self.k
        if self.C is not None:
            # alternating, so the strict upper triangle determines C
            rows = self.C.entries
            out["C_upper"] = [[i, j, rows[i][j]] for i in range(self.n) for j in range(i + 1, self.n) if rows[i][j]]
        return out

    def channels(self) -> dict[str, list[tuple[int, int]]]:
        """Matrix positions that receive one raw draw each, per channel."""
        n = self.n
        upper = [(i, j) for i in range(n) for j in range(i, n)]
        strict = [(i, j) for i in range(n) for j in range(i + 1, n)]
        if self.kind == "iid":
            return {"x": [(i, j) for i in range(n) for j in range(self.cols)]}
        if self.kind in ("symmetric", "c_symmetric", "corner_perturbed"):
            return {"x": upper}
        if self.kind == "symmetric_mod_h":
            return {"x": upper, "y": strict}
        if self.kind == "alternating_uniform":
            return {"y": strict}
        return {"x": upper, "y": [(i, j) for i, j in strict if j < self.k]}

    def channel_dists(self) -> dict[str, EntryDistribution]:
        uniform = EntryDistribution.uniform_mod(self.modulus) if self.modulus else None
        y = {
            "symmetric_mod_h": self.dist2,
            "alternating_uniform": uniform,
            "random_corner": uniform,
        }.get(self.kind)
        return {"x": self.dist, "y": y}


def _default_dist(modulus: int) -> EntryDistribution:
    return EntryDistribution.uniform_mod(modulus) if modulus else EntryDistribution.uniform_range(0, 1)


def assemble(model: MatrixModel, draws: dict[str, np.ndarray]) -> np.ndarray:
    """Build a batch of matrices from raw draws.

    ``draws[ch]`` has shape (batch, len(model.channels()[ch])).  Returns an
    int64 array of shape (batch, n, cols), reduced mod the modulus if any.
    """
    n, cols = model.n, model.cols
    chans = model.channels()
    batch = next(iter(draws.values())).shape[0]
    X = np.zeros((batch, n, cols), dtype=np.int64)
    kind = model.kind
    if "x" in chans:
        ii, jj = (np.array(v, dtype=np.intp) for v in zip(*chans["x"]))
        X[:, ii, jj] = draws["x"]
        if kind != "iid":
            X[:, jj, ii] = draws["x"]
    if kind == "c_symmetric":
        # below-diagonal entries forced by x_ji = x_ij - c_ij
        C = np.array(model.C.entries, dtype=np.int64)
        low = np.tril(np.ones((n, n), dtype=bool), -1)
        X[:, low] += C[low]
    elif kind == "symmetric_mod_h":
        ii, jj = (np.array(v, dtype=np.intp) for v in zip(*chans["y"])) if chans["y"] else ([], [])
        X[:, ii, jj] += model.h * draws["y"]
    elif kind == "corner_perturbed":
        for (i, j), u in zip(model.positions, model.units):
            X[:, i, j] += u
    elif kind in ("alternating_uniform", "random_corner") and chans["y"]:
        ii, jj = (np.array(v, dtype=np.intp) for v in zip(*chans["y"]))
        X[:, ii, jj] += draws["y"]
        if kind == "alternating_uniform":
            X[:, jj, ii] -= draws["y"]
    if model.modulus:
        X %= model.modulus
    return X


def draw_batch(model: MatrixModel, seed: SeedSpec, count: int) -> np.ndarray:
    """Matrices for streams seed.stream_index, ..., seed.stream_index + count - 1."""
    chans = model.channels()
    dists = model.channel_dists()
    draws = {}
    for ch, positions in chans.items():
        if not positions:
            draws[ch] = np.zeros((count, 0), dtype=np.int64)
            continue
        ii, jj = (np.array(v, dtype=np.intp) for v in zip(*positions))
        words = seed.stream_bits(count, model.n, model.cols, _CHANNEL_IDS[ch])
        draws[ch] = dists[ch].draw(words[:, ii, jj]).astype(np.int64)
    if not draws:
        return np.zeros((count, model.n, model.cols), dtype=np.int64)
    return assemble(model, draws)


def sample(model: MatrixModel, seed: SeedSpec) -> ExactMatrix:
    return ExactMatrix(draw_batch(model, seed, 1)[0], model.modulus)


def derive_form(model: MatrixModel):
    """The fixed alternating C with X - X^T = C for every sample, or RANDOMIZED."""
    n, a = model.n, model.modulus
    if model.kind == "symmetric":
        return ExactMatrix.zeros(n, modulus=a)
    if model.kind == "c_symmetric":
        return model.C
    if model.kind == "corner_perturbed":
        return corner_form(n, model.positions, model.units, a)
    if model.kind in ("symmetric_mod_h", "random_corner"):
        return RANDOMIZED
    raise ModelError(f"{model.kind} samples are not C-symmetric for any C")
