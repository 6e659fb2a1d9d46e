"""Experiment driver: empirical moments, cokernel distributions and exact small-case oracles."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, prod

import numpy as np
from sympy import factorint, isprime

from .errors import BoundExceededError, ModelError
from .groups import FiniteAbelianGroup, count_sur, exterior_square_order, order, tensor_mod
from .isotropy import closed_form_rank2, isotropy_probability_exact, isotropy_probability_mc, maps_from_indices
from .limits import LimitDistribution, reduced_class_probability
from .linalg import ExactMatrix, cokernel, cokernel_mod_batch, is_alternating, min_generators_cokernel, rank_mod_p_batch
from .models import MatrixModel, assemble, draw_batch, standard_alternating
from .rng import SeedSpec, words_mod
from .stats import SIGMAS, MomentEstimate, binomial_stderr

SUPPORT_BOUND = 1 << 24
BATCH = 1000


def sample_cokernels(model: MatrixModel, trials: int, seed: SeedSpec, batch: int = BATCH) -> list[FiniteAbelianGroup]:
    """Cokernel of each sampled matrix; trial t uses stream seed.stream_index + t."""
    if trials < 1:
        raise ValueError("trials must be positive")
    out: list[FiniteAbelianGroup] = []
    for start in range(0, trials, batch):
        count = min(batch, trials - start)
        X = draw_batch(model, seed.child(seed.stream_index + start), count)
        if model.modulus:
            out += cokernel_mod_batch(X, model.modulus)
        else:
            out += [cokernel(ExactMatrix(W)) for W in X]
    return out


def moments_from_cokernels(cokernels, G: FiniteAbelianGroup, seed: SeedSpec, model=None) -> MomentEstimate:
    counts = Counter(cokernels)
    sur = {H: count_sur(H, G) for H in counts}
    values = np.repeat([float(sur[H]) for H in counts], list(counts.values()))
    return MomentEstimate.from_samples(values, seed, target_group=G, model=model)


def empirical_moment(model: MatrixModel, G: FiniteAbelianGroup, trials: int, seed: SeedSpec) -> MomentEstimate:
    return moments_from_cokernels(sample_cokernels(model, trials, seed), G, seed, model)


def empirical_moments(model: MatrixModel, groups, trials: int, seed: SeedSpec) -> dict:
    """Several moments from one shared set of samples."""
    cokernels = sample_cokernels(model, trials, seed)
    return {G: moments_from_cokernels(cokernels, G, seed, model) for G in groups}


# exact moment-sum oracle


def _support_matrices(model: MatrixModel, bound: int = SUPPORT_BOUND) -> np.ndarray:
    """Every matrix the model can produce, each with equal probability."""
    chans = model.channels()
    dists = model.channel_dists()
    axes = []
    for ch, positions in chans.items():
        values = dists[ch].values()
        axes.append((ch, len(positions), values))
    total = prod(len(v) ** k for _, k, v in axes)
    if total > bound:
        raise BoundExceededError(f"support has {total} matrices, bound is {bound}")
    grids = []
    for _, k, values in axes:
        grids += [values] * k
    combos = np.array(list(itertools.product(*grids)), dtype=np.int64).reshape(total, -1)
    draws, col = {}, 0
    for ch, k, _ in axes:
        draws[ch] = combos[:, col : col + k]
        col += k
    if not draws:
        return np.zeros((1, model.n, model.cols), dtype=np.int64)
    return assemble(model, draws)


def _surjections(G: FiniteAbelianGroup, n: int) -> np.ndarray:
    size = order(G) ** n
    maps = maps_from_indices(np.arange(size, dtype=np.int64), G, n)
    keep = []
    for F in maps:
        rel = np.concatenate([F, np.diag(G.divisors).astype(np.int64)], axis=1) if len(G.divisors) else None
        keep.append(rel is None or order(cokernel(ExactMatrix(rel))) == 1)
    return maps[np.array(keep, dtype=bool)]


def moment_sum_oracle(model: MatrixModel, G: FiniteAbelianGroup, bound: int = SUPPORT_BOUND) -> tuple[Fraction, Fraction]:
    """(E[#Sur(coker X, G)], sum over surjections F of P[F X = 0]), both exact.

    Needs a model over Z/aZ whose entry distributions are uniform on their support.
    """
    a = model.modulus
    if not a:
        raise ModelError("the moment-sum oracle needs a model over Z/aZ")
    if a % G.exponent:
        raise ValueError(f"exponent of {G.pretty()} must divide {a}")
    X = _support_matrices(model, bound)
    total = len(X)
    types = Counter(cokernel_mod_batch(X, a))
    lhs = Fraction(sum(c * count_sur(H, G) for H, c in types.items()), total)
    # F X = 0 iff every row f_i X vanishes mod d_i; cache that test per distinct row
    wide = X.transpose(1, 0, 2).reshape(model.n, -1)
    kills: dict[tuple, np.ndarray] = {}

    def row_kills(f, d):
        key = (d, tuple(int(x) for x in f))
        if key not in kills:
            kills[key] = ~((f @ wide) % d).reshape(total, -1).any(axis=1)
        return kills[key]

    hits = 0
    for F in _surjections(G, model.n):
        ok = np.ones(total, dtype=bool)
        for f, d in zip(F, G.divisors):
            ok &= row_kills(f, d)
        hits += int(ok.sum())
    rhs = Fraction(hits, total)
    return lhs, rhs


# distributions


@dataclass
class DistributionRow:
    label: str
    group: FiniteAbelianGroup
    count: int
    freq: Fraction
    ref_prob: float | None
    ref_tail: float | None = None

    @property
    def abs_diff(self) -> float | None:
        return None if self.ref_prob is None else abs(float(self.freq) - self.ref_prob)


@dataclass
class DistributionTable:
    rows: list[DistributionRow]
    total_trials: int
    modulus: int
    reference: LimitDistribution | None = None
    seed: SeedSpec | None = None
    extra: dict = field(default_factory=dict)

    def frequency_sum(self) -> Fraction:
        return sum((r.freq for r in self.rows), Fraction(0))

    def total_variation(self) -> float | None:
        """Half the L1 distance, counting reference mass on unseen classes as fully missed."""
        if self.reference is None:
            return None
        seen = sum(r.abs_diff for r in self.rows)
        seen_ref = sum(r.ref_prob for r in self.rows)
        return 0.5 * (seen + max(0.0, 1.0 - seen_ref))

    def row(self, G: FiniteAbelianGroup) -> DistributionRow | None:
        return next((r for r in self.rows if r.group == G), None)

    def to_json(self) -> dict:
        return {
            "modulus": self.modulus,
            "trials": self.total_trials,
            "reference": self.reference.label() if self.reference else None,
            "total_variation": self.total_variation(),
            "rows": [
                {"label": r.label, "count": r.count, "freq": float(r.freq), "ref_prob": r.ref_prob,
                 "abs_diff": r.abs_diff}
                for r in self.rows
            ],
        }


def _is_prime_power_of(a: int, p: int) -> bool:
    f = factorint(a)
    return list(f) == [p]


def empirical_distribution(
    model: MatrixModel, a: int, trials: int, seed: SeedSpec, reference: LimitDistribution | None = None,
    max_exponent: int = 6,
) -> DistributionTable:
    """Histogram of coker(X) tensor Z/aZ, most frequent class first."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if reference is not None and not _is_prime_power_of(a, reference.p):
        raise ValueError(f"reference classes need a power of {reference.p} as modulus, got {a}")
    counts = Counter(tensor_mod(H, a) for H in sample_cokernels(model, trials, seed))
    rows = []
    for H, c in sorted(counts.items(), key=lambda kv: (-kv[1], order(kv[0]), kv[0].divisors)):
        ref = tail = None
        if reference is not None:
            lv = reduced_class_probability(reference, H, a, max_exponent)
            ref, tail = lv.value, lv.tail_bound
        rows.append(DistributionRow(H.pretty(), H, c, Fraction(c, trials), ref, tail))
    return DistributionTable(rows, trials, a, reference, seed)


def compare_classes(table: DistributionTable, groups, sigmas: float = SIGMAS) -> list[dict]:
    """Binomial-stderr comparison of chosen classes against their reference probabilities."""
    if table.reference is None:
        raise ValueError("table has no reference distribution")
    out = []
    for G in groups:
        r = table.row(G)
        count = r.count if r else 0
        lv = reduced_class_probability(table.reference, G, table.modulus)
        freq = count / table.total_trials
        se = binomial_stderr(lv.value, table.total_trials)
        out.append({
            "group": G.pretty(), "count": count, "freq": freq, "ref_prob": lv.value, "stderr": se,
            "passed": abs(freq - lv.value) <= sigmas * se + lv.tail_bound,
        })
    return out


# alternating-form and generation bounds


@dataclass
class BoundReport:
    estimate: float
    stderr: float
    target: float
    bound: float
    passed: bool
    mode: str
    trials: int
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate, "stderr": self.stderr, "target": self.target, "bound": self.bound,
            "passed": self.passed, "mode": self.mode, "trials": self.trials, **self.details,
        }


def _form_hits(Ms: np.ndarray, C: np.ndarray, S: np.ndarray, a: int) -> np.ndarray:
    prod_ = np.einsum("bki,kl,blj->bij", Ms, C, Ms, optimize=True) % a
    return ~((prod_ - S[None]) % a).any(axis=(1, 2))


def verify_alternating_form_bound(
    a: int, n: int, m: int, C: ExactMatrix, S: ExactMatrix, mode: str = "exact",
    trials: int = 10**5, seed: SeedSpec | None = None, bound: int = SUPPORT_BOUND,
) -> BoundReport:
    """P[M^T C M = S] for uniform n x m M over Z/aZ against |R|^-binom(m,2), tolerance 2^(m+g+1-n)."""
    if not (is_alternating(C) and is_alternating(S)):
        raise ValueError("C and S must be alternating")
    if C.shape != (n, n) or S.shape != (m, m) or C.modulus != a or S.modulus != a:
        raise ValueError("shape or modulus mismatch")
    if mode == "exact" and not isprime(a):
        raise ValueError("exact mode needs a prime modulus")
    g = min_generators_cokernel(C)
    target = float(Fraction(1, a ** comb(m, 2)))
    tol = 2.0 ** (m + g + 1 - n)
    Cn = np.array(C.entries, dtype=np.int64)
    Sn = np.array(S.entries, dtype=np.int64)
    if mode == "exact":
        total = a ** (n * m)
        if total > bound:
            raise BoundExceededError(f"{total} matrices exceed the bound {bound}")
        hits = 0
        chunk = 1 << 16
        weights = a ** np.arange(n * m, dtype=np.int64)
        for start in range(0, total, chunk):
            idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
            Ms = ((idx[:, None] // weights[None, :]) % a).reshape(-1, n, m)
            hits += int(_form_hits(Ms, Cn, Sn, a).sum())
        est = Fraction(hits, total)
        return BoundReport(float(est), 0.0, target, tol, abs(float(est) - target) <= tol, mode, total,
                           {"g": g, "exact": str(est)})
    if mode != "mc":
        raise ValueError("mode must be 'exact' or 'mc'")
    seed = seed or SeedSpec(0)
    hits = 0
    chunk = 1 << 14
    for start in range(0, trials, chunk):
        count = min(chunk, trials - start)
        words = seed.child(seed.stream_index + start).stream_bits(count, n, m, 3)
        hits += int(_form_hits(words_mod(words, a), Cn, Sn, a).sum())
    est = hits / trials
    se = binomial_stderr(est, trials)
    return BoundReport(est, se, target, tol, abs(est - target) <= tol + SIGMAS * se, mode, trials, {"g": g})


def _spans(vectors: np.ndarray, a: int) -> np.ndarray:
    """Whether the columns of each (ell x k) matrix generate (Z/a)^ell, i.e. full rank mod every p | a."""
    ell = vectors.shape[1]
    ok = np.ones(vectors.shape[0], dtype=bool)
    for p in factorint(a):
        ok &= rank_mod_p_batch(vectors, p) == ell
    return ok


def verify_generation_bound(a: int, ell: int, k: int, trials: int = 10**4, seed: SeedSpec | None = None) -> BoundReport:
    """Failure rate of k uniform vectors to generate (Z/a)^ell against 2^(ell-k)."""
    if k < 1 or ell < 1:
        raise ValueError("k and ell must be positive")
    seed = seed or SeedSpec(0)
    words = seed.stream_bits(trials, ell, k, 5)
    fails = int((~_spans(words_mod(words, a), a)).sum())
    rate = fails / trials
    se = binomial_stderr(rate, trials)
    bound = 2.0 ** (ell - k)
    return BoundReport(rate, se, bound, bound, rate <= bound + SIGMAS * se, "mc", trials)


# directional scenarios


@dataclass
class Scenario:
    name: str
    estimate: MomentEstimate
    lower: float | None
    upper: float | None
    predicted: float | None
    passed: bool

    def to_json(self) -> dict:
        return {"name": self.name, **self.estimate.to_json(), "lower": self.lower, "upper": self.upper,
                "predicted": self.predicted, "passed": self.passed}


def _separated(est: MomentEstimate, lower: float | None, upper: float | None, sigmas: float) -> bool:
    ok = True
    if lower is not None:
        ok &= est.mean - sigmas * est.stderr > lower
    if upper is not None:
        ok &= est.mean + sigmas * est.stderr < upper
    return bool(ok)


def directional_checks(n: int = 40, trials: int = 2 * 10**4, seed: SeedSpec | None = None,
                       sigmas: float = SIGMAS, h2_trials: int = 0) -> list[Scenario]:
    """Moments that must stay strictly away from the symmetric and Cohen-Lenstra values.

    * fixed rank-2 form over Z/2, G = (Z/2)^2: strictly between 1 and 2;
    * zero form over Z/2 (symmetric matrices), G = (Z/2)^2: strictly above |wedge^2 G[1]| = 1;
    * full-rank form over Z/2, G = (Z/2)^2: within the margin of 1;
    * only when h2_trials > 0: form 2 C0 with C0 of rank 2 over Z/4, G = (Z/4)^2,
      strictly above |wedge^2 G[2]| = 2.  This moment is heavy-tailed (sd near 55 at
      n = 40), so separation needs several times 10^5 trials.
    """
    seed = seed or SeedSpec(20240607)
    out = []
    G2, G4 = FiniteAbelianGroup.parse("2,2"), FiniteAbelianGroup.parse("4,4")

    def run(name, model, G, lower, upper, predicted, stream, count=trials):
        est = empirical_moment(model, G, count, seed.child(stream))
        passed = _separated(est, lower, upper, sigmas)
        if lower is None and upper is None:
            passed = est.within(predicted, sigmas)
        out.append(Scenario(name, est, lower, upper, predicted, passed))

    C = standard_alternating(n, 2, 2)
    pred = exterior_square_order(G2) * float(closed_form_rank2(2, 2))
    run("rank-2 form, (Z/2)^2", MatrixModel.c_symmetric(C), G2, 1.0, 2.0, pred, 1)
    run("zero form, (Z/2)^2", MatrixModel.symmetric(n, 2), G2, 1.0, None, 2.0, 2)
    C = standard_alternating(n, n - n % 2, 2)
    run("full-rank form, (Z/2)^2", MatrixModel.c_symmetric(C), G2, None, None, 1.0, 4)
    if h2_trials > 0:
        C = standard_alternating(n, 2, 4, scale=2)
        pred = exterior_square_order(G4) * float(closed_form_rank2(2, 2))
        run("2 x rank-2 form, (Z/4)^2", MatrixModel.c_symmetric(C), G4, 2.0, None, pred, 3, h2_trials)
    return out


def isotropy_gap_trend(ns=(4, 8), mc_n: int = 16, trials: int = 4 * 10**6, seed: SeedSpec | None = None):
    """|P - 1/2| for uniform maps onto (Z/2)^2 and a full-rank form, exact for small n and sampled at mc_n."""
    G = FiniteAbelianGroup.parse("2,2")
    rows = []
    for n in ns:
        C = standard_alternating(n, n - n % 2, 2)
        P = isotropy_probability_exact(C, G, 2)
        rows.append({"n": n, "estimate": float(P), "gap": abs(float(P) - 0.5), "stderr": 0.0, "exact": str(P)})
    C = standard_alternating(mc_n, mc_n - mc_n % 2, 2)
    est = isotropy_probability_mc(C, G, 2, trials, seed or SeedSpec(16))
    rows.append({"n": mc_n, "estimate": est.mean, "gap": abs(est.mean - 0.5), "stderr": est.stderr})
    return rows


__all__ = [
    "BoundReport",
    "DistributionRow",
    "DistributionTable",
    "MomentEstimate",
    "Scenario",
    "compare_classes",
    "directional_checks",
    "empirical_distribution",
    "empirical_moment",
    "empirical_moments",
    "isotropy_gap_trend",
    "moment_sum_oracle",
    "sample_cokernels",
    "verify_alternating_form_bound",
    "verify_generation_bound",
]
