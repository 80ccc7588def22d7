"""Coordinate-subset decompositions and posterior sampling over them.

A decomposition is a set of (possibly overlapping) coordinate subsets whose
latent factor functions sum to the objective.  Structure is scored by the GP
evidence of the induced additive kernel under shared hyperparameters (total
signal variance split equally among factors, one lengthscale per dimension),
so that evidence comparisons are about structure, not hyperparameter fit.

The Metropolis-Hastings sampler proposes uniformly among four move families:
(a) move a dimension from one subset to another, (b) split a subset, (c)
merge two subsets when the union fits the size bound, (d) add or remove a
single membership subject to coverage.  Proposals that would orphan a
dimension, create a duplicate subset, or exceed max_factor_size are simply
absent from the move list; the acceptance ratio carries the Hastings
correction for the asymmetric move counts.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolationError
from .gp import ObservationSet, log_marginal_likelihood
from .kernels import AdditiveKernel, FactorKernel


def _canonical(subsets) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted(tuple(sorted(int(j) for j in s)) for s in subsets))


@dataclass(frozen=True)
class Decomposition:
    """d input dimensions covered by distinct subsets of bounded size."""

    d: int
    subsets: tuple[tuple[int, ...], ...]
    max_factor_size: int

    def __post_init__(self):
        subsets = _canonical(self.subsets)
        object.__setattr__(self, "subsets", subsets)
        if self.d < 1:
            raise ContractViolationError("d must be >= 1")
        if self.max_factor_size < 1:
            raise ContractViolationError("max_factor_size must be >= 1")
        if len(subsets) == 0:
            raise ContractViolationError("decomposition needs >= 1 subset")
        covered = set()
        for s in subsets:
            if len(set(s)) != len(s):
                raise ContractViolationError(f"subset {s} repeats a dimension")
            if not 1 <= len(s) <= self.max_factor_size:
                raise ContractViolationError(
                    f"subset {s} violates size bounds [1, {self.max_factor_size}]"
                )
            if s[0] < 0 or s[-1] >= self.d:
                raise ContractViolationError(f"subset {s} out of range [0, {self.d})")
            covered.update(s)
        if len(set(subsets)) != len(subsets):
            raise ContractViolationError("subsets must be pairwise distinct")
        if covered != set(range(self.d)):
            raise ContractViolationError(
                f"dimensions {sorted(set(range(self.d)) - covered)} are uncovered"
            )

    @property
    def num_factors(self) -> int:
        return len(self.subsets)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "max_factor_size": self.max_factor_size,
            "subsets": [list(s) for s in self.subsets],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Decomposition":
        try:
            return cls(
                d=int(doc["d"]),
                subsets=tuple(tuple(s) for s in doc["subsets"]),
                max_factor_size=int(doc["max_factor_size"]),
            )
        except KeyError as exc:
            raise ConfigurationError(f"decomposition document misses key {exc}")


def singleton_decomposition(d: int) -> Decomposition:
    return Decomposition(d=d, subsets=tuple((i,) for i in range(d)), max_factor_size=1)


def full_decomposition(d: int) -> Decomposition:
    return Decomposition(d=d, subsets=(tuple(range(d)),), max_factor_size=d)


def random_covering_decomposition(
    d: int, max_factor_size: int, rng: np.random.Generator, num_extra_overlaps: int = 0
) -> Decomposition:
    """Shuffled partition into chunks of max_factor_size, plus optional
    random extra subsets that create overlaps."""
    if max_factor_size < 1:
        raise ContractViolationError("max_factor_size must be >= 1")
    perm = [int(i) for i in rng.permutation(d)]
    subsets = [
        tuple(sorted(perm[i : i + max_factor_size]))
        for i in range(0, d, max_factor_size)
    ]
    have = set(subsets)
    size = min(max_factor_size, d)
    added = 0
    attempts = 0
    while added < num_extra_overlaps and attempts < 100 * (num_extra_overlaps + 1):
        attempts += 1
        cand = tuple(sorted(int(i) for i in rng.choice(d, size=size, replace=False)))
        if cand not in have:
            subsets.append(cand)
            have.add(cand)
            added += 1
    return Decomposition(d=d, subsets=tuple(subsets), max_factor_size=max_factor_size)


@dataclass(frozen=True)
class SharedHypers:
    """Hyperparameters shared across candidate structures.

    total_signal_variance is split equally among a kernel's factors;
    lengthscales is either a scalar applied to every dimension or one value
    per dimension.
    """

    total_signal_variance: float
    lengthscales: float | tuple[float, ...] = 0.2

    def lengthscale_for(self, dim: int) -> float:
        if isinstance(self.lengthscales, (int, float)):
            return float(self.lengthscales)
        return float(self.lengthscales[dim])


def induced_kernel(dec: Decomposition, hypers: SharedHypers) -> AdditiveKernel:
    per_factor = hypers.total_signal_variance / dec.num_factors
    return AdditiveKernel(
        factors=tuple(
            FactorKernel(
                subset=s,
                signal_variance=per_factor,
                lengthscales=tuple(hypers.lengthscale_for(j) for j in s),
            )
            for s in dec.subsets
        )
    )


def log_evidence(
    dec: Decomposition, obs: ObservationSet, hypers: SharedHypers
) -> float:
    """GP log marginal likelihood of the induced additive kernel."""
    return log_marginal_likelihood(induced_kernel(dec, hypers), obs)


def default_hypers(obs: ObservationSet) -> SharedHypers:
    """Data-derived shared hyperparameters for structure search."""
    var = float(np.var(obs.y)) if len(obs) > 1 else 1.0
    spans = obs.X.max(axis=0) - obs.X.min(axis=0) if len(obs) > 1 else None
    if spans is None:
        ls: float | tuple = 0.2
    else:
        ls = tuple(0.2 * s if s > 0 else 0.2 for s in spans)
    return SharedHypers(total_signal_variance=max(var, 1e-6), lengthscales=ls)


State = tuple  # canonical tuple of sorted subset tuples


def enumerate_moves(state: State, d: int, max_size: int) -> list[State]:
    """All single-step successors (with multiplicity) of a canonical state."""
    subs = list(state)
    existing = set(subs)
    counts = Counter()
    for s in subs:
        counts.update(s)
    moves: list[State] = []

    def replaced(idx, *new):
        out = [s for q, s in enumerate(subs) if q != idx]
        out.extend(n for n in new if n)
        return _canonical(out)

    def valid(parts) -> bool:
        seen = set()
        for p in parts:
            if p in seen:
                return False
            seen.add(p)
        return True

    # (a) move one dimension from subset src to subset dst
    for si, src in enumerate(subs):
        if len(src) < 2:
            continue
        for j in src:
            for di, dst in enumerate(subs):
                if di == si or j in dst or len(dst) + 1 > max_size:
                    continue
                new_src = tuple(v for v in src if v != j)
                new_dst = tuple(sorted(dst + (j,)))
                others = existing - {src, dst}
                if new_src in others or new_dst in others or new_src == new_dst:
                    continue
                out = [s for q, s in enumerate(subs) if q not in (si, di)]
                out.extend([new_src, new_dst])
                moves.append(_canonical(out))
    # (b) split a subset into two nonempty parts
    for si, src in enumerate(subs):
        k = len(src)
        if k < 2:
            continue
        for mask in range(1, 2 ** (k - 1)):
            a = tuple(src[q] for q in range(k) if mask >> q & 1)
            b = tuple(src[q] for q in range(k) if not mask >> q & 1)
            others = existing - {src}
            if a in others or b in others:
                continue
            moves.append(replaced(si, a, b))
    # (c) merge two subsets when the union fits
    for si in range(len(subs)):
        for di in range(si + 1, len(subs)):
            merged = tuple(sorted(set(subs[si]) | set(subs[di])))
            if len(merged) > max_size:
                continue
            others = existing - {subs[si], subs[di]}
            if merged in others:
                continue
            out = [s for q, s in enumerate(subs) if q not in (si, di)]
            out.append(merged)
            moves.append(_canonical(out))
    # (d) add or remove one membership, keeping coverage
    for si, src in enumerate(subs):
        if len(src) + 1 <= max_size:
            for j in range(d):
                if j in src:
                    continue
                grown = tuple(sorted(src + (j,)))
                if grown in existing - {src}:
                    continue
                moves.append(replaced(si, grown))
        if len(src) >= 2:
            for j in src:
                if counts[j] < 2:
                    continue  # removal would orphan j
                shrunk = tuple(v for v in src if v != j)
                if shrunk in existing - {src}:
                    continue
                moves.append(replaced(si, shrunk))
    # (e) re-pair two subsets: any other two-subset cover of their union.
    # This jumps directly between pairings that single moves can only reach
    # through deep evidence valleys, and it is closed under reversal since
    # the union is preserved.
    for si in range(len(subs)):
        for di in range(si + 1, len(subs)):
            pool = tuple(sorted(set(subs[si]) | set(subs[di])))
            p = len(pool)
            others = existing - {subs[si], subs[di]}
            seen_pairs = set()
            for amask in range(1, 2**p - 1 + 1):
                a = tuple(pool[q] for q in range(p) if amask >> q & 1)
                if not a or len(a) > max_size:
                    continue
                rest = [pool[q] for q in range(p) if not amask >> q & 1]
                for bmask in range(2**p):
                    b = tuple(pool[q] for q in range(p) if bmask >> q & 1)
                    if not b or len(b) > max_size or b == a:
                        continue
                    if set(a) | set(b) != set(pool):
                        continue
                    pair = (a, b) if a <= b else (b, a)
                    if pair in seen_pairs or pair == (subs[si], subs[di]):
                        continue
                    seen_pairs.add(pair)
                    if pair[0] in others or pair[1] in others:
                        continue
                    out = [s for q, s in enumerate(subs) if q not in (si, di)]
                    out.extend(pair)
                    moves.append(_canonical(out))
    # (f) spawn a strict sub-subset as a new factor (reverse of a merge
    # whose union coincides with one operand)
    for src in subs:
        k = len(src)
        if k < 2:
            continue
        for mask in range(1, 2**k - 1):
            t = tuple(src[q] for q in range(k) if mask >> q & 1)
            if t in existing:
                continue
            moves.append(_canonical(subs + [t]))
    return moves


@dataclass(frozen=True)
class PriorConfig:
    """Uniform prior over valid decompositions, optionally penalizing bloat
    by exp(-size_penalty * sum of subset sizes)."""

    max_factor_size: int
    size_penalty: float = 0.0

    def log_prior(self, state: State) -> float:
        return -self.size_penalty * float(sum(len(s) for s in state))


@dataclass(frozen=True)
class McmcConfig:
    chain_length: int
    burn_in: int = 0
    thinning: int = 1
    num_samples: int = 1
    initial: Decomposition | None = None

    def __post_init__(self):
        if self.chain_length < 0 or self.burn_in < 0:
            raise ConfigurationError("chain_length and burn_in must be >= 0")
        if self.thinning < 1 or self.num_samples < 1:
            raise ConfigurationError("thinning and num_samples must be >= 1")
        if self.chain_length > 0:
            need = self.burn_in + (self.num_samples - 1) * self.thinning
            if need > self.chain_length:
                raise ConfigurationError(
                    f"chain_length {self.chain_length} too short for burn_in "
                    f"{self.burn_in} + {self.num_samples} samples at thinning "
                    f"{self.thinning}"
                )


@dataclass(frozen=True)
class DecompositionEnsemble:
    samples: tuple[Decomposition, ...]

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ContractViolationError("ensemble needs >= 1 sample")

    @property
    def k(self) -> int:
        return len(self.samples)


def sample_posterior(
    obs: ObservationSet,
    prior_config: PriorConfig,
    mcmc_config: McmcConfig,
    rng,
    hypers: SharedHypers | None = None,
) -> DecompositionEnsemble:
    """Metropolis-Hastings over decompositions; deterministic given the rng.

    rng may be an integer seed or a numpy Generator.  chain_length 0 returns
    num_samples copies of the initial state.
    """
    if len(obs) == 0:
        raise ContractViolationError("posterior sampling needs observations")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if hypers is None:
        hypers = default_hypers(obs)
    d = obs.X.shape[1]
    max_size = prior_config.max_factor_size
    init = mcmc_config.initial or singleton_decomposition(d)
    if init.d != d:
        raise ContractViolationError("initial decomposition dimension mismatch")
    state = _canonical(init.subsets)

    cache: dict[State, tuple[float, list, Counter]] = {}

    def lookup(s: State):
        hit = cache.get(s)
        if hit is None:
            dec = Decomposition(d=d, subsets=s, max_factor_size=max_size)
            lp = log_evidence(dec, obs, hypers) + prior_config.log_prior(s)
            moves = enumerate_moves(s, d, max_size)
            hit = (lp, moves, Counter(moves))
            cache[s] = hit
        return hit

    def make_dec(s: State) -> Decomposition:
        return Decomposition(d=d, subsets=s, max_factor_size=max_size)

    if mcmc_config.chain_length == 0:
        return DecompositionEnsemble(
            samples=tuple(make_dec(state) for _ in range(mcmc_config.num_samples))
        )

    chain = [state]
    for _ in range(mcmc_config.chain_length):
        logp, moves, move_counts = lookup(state)
        if moves:
            proposal = moves[int(rng.integers(len(moves)))]
            logp2, back_moves, back_counts = lookup(proposal)
            q_fwd = move_counts[proposal] / len(moves)
            q_bwd = (back_counts[state] / len(back_moves)) if back_moves else 0.0
            if q_bwd > 0.0:
                log_alpha = (logp2 - logp) + math.log(q_bwd) - math.log(q_fwd)
                if math.log(rng.uniform()) < log_alpha:
                    state = proposal
        chain.append(state)

    picks = [
        chain[mcmc_config.burn_in + i * mcmc_config.thinning]
        for i in range(mcmc_config.num_samples)
    ]
    return DecompositionEnsemble(samples=tuple(make_dec(s) for s in picks))


def merge_for_acquisition(
    ens: DecompositionEnsemble,
) -> tuple[tuple[tuple[int, ...], ...], tuple[float, ...]]:
    """Union of the sampled subsets with weight = occurrence count / k.

    The weighted acquisition over the union equals the ensemble average of
    the per-sample acquisitions exactly, because a subset's phi table is the
    same function in every sample (factors share one posterior).
    """
    counts = Counter()
    for dec in ens.samples:
        counts.update(dec.subsets)
    union = tuple(sorted(counts))
    weights = tuple(counts[s] / ens.k for s in union)
    return union, weights
