"""Allele-count Markov chains: Wright-Fisher and general exchangeable-
genealogy reproduction with mutation.

State is the count vector X of the first K-1 types in a population of fixed
size N (the last count is implicit).  One generation is reproduction followed
by independent per-child mutation:

* Wright-Fisher: X' is multinomial with success probabilities
  q_j(X) = sum_k p_kj X_k / N;
* general: an exchangeable offspring vector V is drawn, assigned to a
  uniformly permuted parent labeling, and every child mutates independently
  given its parent's type.

Chains are simulated in replicate blocks (vectorized across independent
chains) so near-stationary sampling stays cheap even for slowly mixing
models.  The module also checks the one-step conditional moment formulas
that the approximation bounds are built on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .mutation import MutationMatrix, transition_probs
from .offspring import (
    KIND_MORAN,
    KIND_WRIGHT_FISHER,
    OffspringModel,
    sample_offspring,
)
from .simplex import RngStream, SimplexPoint, as_generator

BURN_IN_CAP = 10**7


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class ChainState:
    """Counts of the first K-1 types; the last type holds the remainder."""

    counts: tuple
    N: int

    def __init__(self, counts: Sequence[int], N: int):
        counts = tuple(int(c) for c in counts)
        if any(c < 0 for c in counts):
            raise ChainError(f"negative count in {counts}")
        if sum(counts) > N:
            raise ChainError(f"counts {counts} exceed population size {N}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "N", int(N))

    @property
    def K(self) -> int:
        return len(self.counts) + 1

    @property
    def full(self) -> tuple:
        return self.counts + (self.N - sum(self.counts),)

    def w(self) -> tuple:
        """Frequencies as exact rationals."""
        return tuple(Fraction(c, self.N) for c in self.counts)

    def point(self) -> SimplexPoint:
        return SimplexPoint([c / self.N for c in self.counts])


@dataclass(frozen=True)
class ChainModel:
    """A reproduction kernel plus mutation; offspring=None means
    Wright-Fisher."""

    N: int
    mutation: MutationMatrix
    offspring: OffspringModel | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ChainError("N must be >= 1")
        if self.offspring is not None and self.offspring.N != self.N:
            raise ChainError(
                f"offspring law is for N={self.offspring.N}, chain has N={self.N}"
            )

    @property
    def K(self) -> int:
        return self.mutation.K

    @property
    def kind(self) -> str:
        return KIND_WRIGHT_FISHER if self.offspring is None else self.offspring.kind


# ---------------------------------------------------------------------------
# batched stepping kernels; counts arrays are (R, K-1) int64


def _batch_multinomial(g, n, Q):
    """Multinomial draws row by row through conditional binomials.

    n: (R,) trial counts; Q: (R, K) success probabilities."""
    R, K = Q.shape
    out = np.zeros((R, K), dtype=np.int64)
    remaining = np.asarray(n, dtype=np.int64).copy()
    rest = np.ones(R)
    for j in range(K - 1):
        pj = np.divide(Q[:, j], rest, out=np.zeros(R), where=rest > 1e-300)
        c = g.binomial(remaining, np.clip(pj, 0.0, 1.0))
        out[:, j] = c
        remaining -= c
        rest = rest - Q[:, j]
    out[:, K - 1] = remaining
    return out


def _batch_step_wf(g, counts, P, N):
    full = np.column_stack([counts, N - counts.sum(axis=1)])
    q = full @ P / N
    return _batch_multinomial(g, np.full(len(counts), N), q)[:, :-1]


def _categorical(g, probs):
    """One draw per row of probs (R, K)."""
    u = g.random(len(probs))
    cum = np.cumsum(probs, axis=1)
    return (u[:, None] >= cum[:, :-1]).sum(axis=1)


def _batch_step_moran(g, counts, P, N):
    # parent multiplicities reduce to counts + reproducer - dier; every one
    # of the N children still mutates, so finish with per-type multinomials
    R, Km1 = counts.shape
    K = Km1 + 1
    full = np.column_stack([counts, N - counts.sum(axis=1)])
    rep = _categorical(g, full / N)
    minus = full.copy()
    minus[np.arange(R), rep] -= 1  # dier drawn among the N-1 others
    die = _categorical(g, minus / (N - 1))
    n = full.copy()
    n[np.arange(R), rep] += 1
    n[np.arange(R), die] -= 1
    child = np.zeros((R, K), dtype=np.int64)
    for r in range(K):
        child += _batch_multinomial(g, n[:, r], np.broadcast_to(P[r], (R, K)))
    return child[:, :-1]


def _batch_step_cannings(g, counts, model, P, N):
    R, Km1 = counts.shape
    K = Km1 + 1
    V = sample_offspring(model, g, size=R)
    # uniform slot assignment: shuffle each row of V, then slice by counts
    order = np.argsort(g.random((R, N)), axis=1)
    Vs = np.take_along_axis(V, order, axis=1)
    csum = np.cumsum(Vs, axis=1)
    full = np.column_stack([counts, N - counts.sum(axis=1)])
    edges = np.cumsum(full, axis=1)
    child = np.zeros((R, K), dtype=np.int64)
    prev = np.zeros(R, dtype=np.int64)
    for r in range(K):
        e = edges[:, r]
        cur = np.where(
            e > 0,
            np.take_along_axis(csum, np.maximum(e - 1, 0)[:, None], axis=1)[:, 0],
            0,
        )
        n_r = cur - prev
        prev = cur
        child += _batch_multinomial(g, n_r, np.broadcast_to(P[r], (R, K)))
    return child[:, :-1]


def _batch_step(g, counts, model: ChainModel, P):
    if model.offspring is None:
        return _batch_step_wf(g, counts, P, model.N)
    if model.offspring.kind == KIND_MORAN:
        return _batch_step_moran(g, counts, P, model.N)
    return _batch_step_cannings(g, counts, model.offspring, P, model.N)


def step_wright_fisher(x: ChainState, p: MutationMatrix, rng) -> ChainState:
    """One Wright-Fisher generation: X' ~ MN(N; q(X)), first K-1 coords."""
    if p.K != x.K:
        raise ChainError("dimension mismatch")
    g = as_generator(rng)
    counts = np.array([x.counts], dtype=np.int64)
    return ChainState(_batch_step_wf(g, counts, p.array(), x.N)[0], x.N)


def step_cannings(
    x: ChainState, m: OffspringModel, p: MutationMatrix, rng
) -> ChainState:
    """One general generation: offspring vector, permuted parent slots,
    per-child mutation."""
    if p.K != x.K:
        raise ChainError("dimension mismatch")
    if m.N != x.N:
        raise ChainError(f"offspring law N={m.N} != state N={x.N}")
    g = as_generator(rng)
    counts = np.array([x.counts], dtype=np.int64)
    model = ChainModel(x.N, p, m)
    return ChainState(_batch_step(g, counts, model, p.array())[0], x.N)


# ---------------------------------------------------------------------------
# stationary sampling


def check_irreducible(p: MutationMatrix):
    """Conservative static test: the off-diagonal positivity graph must be
    strongly connected, else some type dies out or is never replenished."""
    K = p.K
    adj = np.array(
        [[int(float(p.p[i][j]) > 0 and i != j) for j in range(K)] for i in range(K)]
    )
    reach = np.eye(K, dtype=np.int64) + adj
    for _ in range(K):
        reach = np.minimum(reach + reach @ reach, 1)
    if not reach.all():
        bad = int(np.argwhere(~reach)[0][1])
        raise ChainError(
            f"mutation matrix leaves type {bad + 1} unreachable; chain is reducible"
        )


def default_burn_in(model: ChainModel) -> int:
    """20 N max(1, 1/(N p_min)) generations, capped; p_min is the smallest
    positive off-diagonal mutation probability."""
    off = [
        float(v)
        for i, row in enumerate(model.mutation.p)
        for j, v in enumerate(row)
        if i != j and float(v) > 0
    ]
    pmin = min(off)
    return int(min(20 * model.N * max(1.0, 1.0 / (model.N * pmin)), BURN_IN_CAP))


def _initial_counts(N, K):
    base, rem = divmod(N, K)
    full = [base + (1 if i < rem else 0) for i in range(K)]
    return full[: K - 1]


@dataclass(frozen=True)
class StationaryRun:
    """Near-stationary frequency samples with their provenance.

    samples rows are W = X/N (first K-1 coordinates).  drift_z is the
    between-halves drift of first and second moments in crude combined
    stderr units; large values flag under-burning."""

    samples: np.ndarray
    burn_in: int
    thin: int
    seed: str
    meta: dict = field(default_factory=dict)
    drift_z: tuple = (float("nan"), float("nan"))

    @property
    def n(self) -> int:
        return len(self.samples)

    def point(self, i: int) -> SimplexPoint:
        return SimplexPoint(self.samples[i])

    def save(self, path):
        path = str(path)
        K1 = self.samples.shape[1]
        header = ",".join(f"w{j + 1}" for j in range(K1))
        np.savetxt(path, self.samples, delimiter=",", header=header, comments="", fmt="%.17g")
        with open(path + ".meta", "w", encoding="utf-8") as fh:
            for k in ("burn_in", "thin", "seed"):
                fh.write(f"{k} = {getattr(self, k)}\n")
            for k, v in sorted(self.meta.items()):
                fh.write(f"{k} = {v}\n")

    @classmethod
    def load(cls, path):
        path = str(path)
        samples = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = {}
        with open(path + ".meta", "r", encoding="utf-8") as fh:
            for line in fh:
                if "=" in line:
                    k, v = line.split("=", 1)
                    meta[k.strip()] = v.strip()
        return cls(
            samples=samples,
            burn_in=int(meta.pop("burn_in", 0)),
            thin=int(meta.pop("thin", 1)),
            seed=meta.pop("seed", ""),
            meta=meta,
        )


def _seed_descriptor(rng) -> str:
    if isinstance(rng, RngStream):
        path = ".".join(str(v) for v in rng.path)
        return f"{rng.seed}/{path}" if path else str(rng.seed)
    return type(rng).__name__


def run_to_stationarity(
    model: ChainModel,
    n_samples: int,
    rng,
    burn_in: int | None = None,
    thin: int | None = None,
    replicates: int = 512,
) -> StationaryRun:
    """Burn in, then record every thin-th generation as W = X/N.

    The quota is spread over `replicates` independent chains stepped in one
    vectorized block, so wall time scales with burn_in + thin * n/replicates
    generations rather than with the total sample count.
    """
    check_irreducible(model.mutation)
    if n_samples < 1:
        raise ChainError("need at least one sample")
    if burn_in is None:
        burn_in = default_burn_in(model)
    if thin is None:
        thin = model.N
    if thin < 1 or burn_in < 0:
        raise ChainError("burn_in must be >= 0 and thin >= 1")
    g = as_generator(rng)
    N, K = model.N, model.K
    R = max(1, min(int(replicates), n_samples))
    P = model.mutation.array()
    counts = np.tile(_initial_counts(N, K), (R, 1)).astype(np.int64)
    for _ in range(burn_in):
        counts = _batch_step(g, counts, model, P)
    rounds = -(-n_samples // R)
    rows = []
    for _ in range(rounds):
        for _ in range(thin):
            counts = _batch_step(g, counts, model, P)
        rows.append(counts / N)
    samples = np.concatenate(rows, axis=0)[:n_samples]
    half = n_samples // 2
    drift = (float("nan"), float("nan"))
    if half >= 2:
        a, b = samples[:half], samples[half:]
        zs = []
        for mom in (1, 2):
            da, db = a**mom, b**mom
            se = np.sqrt(da.var(axis=0) / len(da) + db.var(axis=0) / len(db))
            z = np.abs(da.mean(axis=0) - db.mean(axis=0)) / np.where(se > 0, se, 1)
            zs.append(float(z.max()))
        drift = tuple(zs)
    return StationaryRun(
        samples=samples,
        burn_in=burn_in,
        thin=thin,
        seed=_seed_descriptor(rng),
        meta={
            "N": N,
            "K": K,
            "kind": model.kind,
            "n_samples": n_samples,
            "replicates": R,
        },
        drift_z=drift,
    )


# ---------------------------------------------------------------------------
# conditional-moment verification (Wright-Fisher one-step formulas)


@dataclass(frozen=True)
class CondMomentCheck:
    """One state's comparison of the closed second-moment forms against
    exact multinomial moments and against simulation."""

    state: ChainState
    closed_same: tuple  # E[(W'_j - W_j)^2 | W], j = 1..K-1
    closed_cross: tuple  # E[(W'_i - W_i)(W'_j - W_j) | W], i < j
    exact_residual: float
    mc_z: float


def _closed_second_moments(p: MutationMatrix, x: ChainState):
    """Same and cross closed forms through (q, sigma_j, T_j)."""
    N, K = x.N, x.K
    t = transition_probs(p, x.counts, N)
    w = x.w()
    sig = [
        p.p[K - 1][j] + sum(p.p[j][k] for k in range(K) if k != j)
        for j in range(K - 1)
    ]
    dev = [t.inflow[j] - sig[j] * w[j] for j in range(K - 1)]
    same = tuple(
        t.q[j] * (1 - t.q[j]) / Fraction(N) + dev[j] ** 2 for j in range(K - 1)
    )
    cross = tuple(
        -t.q[i] * t.q[j] / Fraction(N) + dev[i] * dev[j]
        for i in range(K - 1)
        for j in range(i + 1, K - 1)
    )
    return t, dev, same, cross


def verify_conditional_moments_wf(
    p: MutationMatrix,
    N: int,
    states: Sequence[ChainState],
    rng,
    mc_steps: int = 20_000,
) -> list:
    """Check the one-step second-moment formulas at each supplied state.

    Closed forms are compared (i) against exact multinomial factorial
    moments of X' given X, reported as a max absolute residual, and (ii)
    against a Monte-Carlo average over steps, reported as a max z-score.
    """
    g = as_generator(rng)
    out = []
    for x in states:
        if x.K != p.K or x.N != N:
            raise ChainError("state inconsistent with matrix or N")
        t, dev, same, cross = _closed_second_moments(p, x)
        w = x.w()
        K = x.K
        res = 0.0
        # exact: E (X'_j)_2 = N(N-1) q_j^2, E X'_i X'_j = N(N-1) q_i q_j
        for j in range(K - 1):
            ex2 = (Fraction(N * (N - 1)) * t.q[j] ** 2 + Fraction(N) * t.q[j]) / N**2
            exact = ex2 - 2 * w[j] * t.q[j] + w[j] ** 2
            res = max(res, abs(float(exact - same[j])))
        idx = 0
        for i in range(K - 1):
            for j in range(i + 1, K - 1):
                exij = Fraction(N * (N - 1)) * t.q[i] * t.q[j] / N**2
                exact = exij - w[i] * t.q[j] - w[j] * t.q[i] + w[i] * w[j]
                res = max(res, abs(float(exact - cross[idx])))
                idx += 1
        # MC: average the same products over simulated steps
        counts = np.tile(x.counts, (mc_steps, 1)).astype(np.int64)
        nxt = _batch_step_wf(g, counts, p.array(), N)
        d = nxt / N - np.array([float(v) for v in w])
        zmax = 0.0
        for j in range(K - 1):
            vals = d[:, j] ** 2
            se = vals.std(ddof=1) / np.sqrt(mc_steps)
            zmax = max(zmax, abs(vals.mean() - float(same[j])) / max(se, 1e-300))
        idx = 0
        for i in range(K - 1):
            for j in range(i + 1, K - 1):
                vals = d[:, i] * d[:, j]
                se = vals.std(ddof=1) / np.sqrt(mc_steps)
                zmax = max(zmax, abs(vals.mean() - float(cross[idx])) / max(se, 1e-300))
                idx += 1
        out.append(
            CondMomentCheck(
                state=x,
                closed_same=tuple(float(v) for v in same),
                closed_cross=tuple(float(v) for v in cross),
                exact_residual=res,
                mc_z=zmax,
            )
        )
    return out
