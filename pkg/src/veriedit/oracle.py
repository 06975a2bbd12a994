"""Exact verification of the sampler on fully enumerable toy spaces.

For a small vocabulary and length cap, every claim state and every possible
proposal can be enumerated, which turns the sampler into an explicit Markov
matrix: T[x][y] is the total probability of proposing and accepting a move
from x to y, with all rejected mass folded into the self-loop. Against that
matrix three things are checked exactly:

* stationarity: the Boltzmann distribution of the energy is a fixed point
  of T (max-norm residual of pi @ T - pi);
* detailed balance: pi(x) T[x][y] == pi(y) T[y][x] for every pair;
* ergodicity: the support graph of T is strongly connected and every state
  keeps a positive self-loop.

Mutation runs rebuild the matrix with one bookkeeping factor deliberately
corrupted (reverse probability, insertion mixture weight, or stale position
distribution) and must push the stationarity residual above the detection
threshold - proving the checks can actually catch those bugs.

A long simulated chain on the same space gives an end-to-end check that the
sampling code realizes the enumerated kernel (total-variation distance of
the visit histogram to the exact stationary distribution).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyWeights
from .engine import EnergyCache, SamplerConfig, chain_rng, step
from .proposal import NGramProposer, ProposalKernel, Proposer
from .scorers import LexicalVerifier, NGramMLM, OcclusionSaliency, ScorerSuite
from .state import (
    EditState,
    EvidenceSet,
    TokenSeq,
    apply_edit,
    build_evidence,
    make_state,
    segment,
)

MUTATIONS = ("corrupt-reverse", "drop-alpha", "stale-p1")

STATIONARITY_TOL = 1e-6
SYMMETRIC_TOL = 1e-9
BALANCE_TOL = 1e-9
MUTATION_MIN_RESIDUAL = 1e-3
EMPIRICAL_TV_TOL = 0.05
EMPIRICAL_STEPS = 100_000


class SpaceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class ToyStateSpace:
    """Fully enumerable claim universe: all sequences over a tiny vocabulary."""

    name: str
    vocab: tuple[str, ...]
    max_len: int
    gazetteer: tuple[TokenSeq, ...]
    passages: tuple[TokenSeq, ...]
    original: TokenSeq

    def evidence(self) -> EvidenceSet:
        return build_evidence(self.passages, self.original, extra_entities=self.gazetteer)

    @property
    def states(self) -> tuple[TokenSeq, ...]:
        out: list[TokenSeq] = []
        for length in range(1, self.max_len + 1):
            out.extend(itertools.product(self.vocab, repeat=length))
        return tuple(out)


@dataclass
class ExactKernel:
    space: ToyStateSpace
    states: tuple[TokenSeq, ...]
    matrix: np.ndarray
    energies: np.ndarray
    index: dict[TokenSeq, int] = field(repr=False, default_factory=dict)


def _pi(energies: np.ndarray) -> np.ndarray:
    w = np.exp(-(energies - energies.min()))
    return w / w.sum()


def build_exact_kernel(
    space: ToyStateSpace,
    scorers: ScorerSuite,
    proposer: Proposer,
    config: SamplerConfig,
    mutation: str | None = None,
    max_entries: int = 10_000_000,
) -> ExactKernel:
    """Enumerate every (position, action, content) triple from every state.

    The sampling probability of each path is taken from the untouched
    kernel; the acceptance ratio uses the (possibly mutated) bookkeeping,
    mirroring a bug that corrupts probabilities without changing what is
    sampled. Rows sum to 1 by construction.
    """
    evidence = space.evidence()
    states = space.states
    index = {s: i for i, s in enumerate(states)}

    clean = ProposalKernel(
        proposer=proposer, saliency=scorers.saliency, alpha=config.alpha, max_tokens=space.max_len
    )
    scored = ProposalKernel(
        proposer=proposer,
        saliency=scorers.saliency,
        alpha=config.alpha,
        max_tokens=space.max_len,
        mutation=mutation,
    )
    energy = EnergyCache(scorers, config.weights)

    edit_states: list[EditState] = []
    for tokens in states:
        st = EditState(
            tokens=tokens,
            segmentation=segment(tokens, evidence.sorted_gazetteer),
            original=space.original,
            evidence=evidence,
        )
        edit_states.append(st)
    energies = np.array([energy(st).total for st in edit_states])

    branching = len(states) * (
        (space.max_len + 1) * (len(space.vocab) + len(space.gazetteer) + 1) * 3
    )
    if branching > max_entries:
        raise SpaceTooLargeError(f"{branching} enumerated entries exceed bound {max_entries}")

    n = len(states)
    T = np.zeros((n, n))
    for i, st in enumerate(edit_states):
        paths = clean.enumerate_actions(st)
        mass = 0.0
        for action, g in paths:
            mass += g
            new_st = apply_edit(st, action)
            if len(new_st.tokens) > space.max_len:
                T[i, i] += g
                continue
            reverse = scored.derive_reverse(st, action, new_st)
            if reverse is None:
                T[i, i] += g
                continue
            fwd, rev = scored.logprob_pair(st, action, new_st, reverse)
            if not (math.isfinite(fwd) and math.isfinite(rev)):
                T[i, i] += g
                continue
            j = index[new_st.tokens]
            delta = (energies[i] - energies[j]) + (rev - fwd)
            a = min(1.0, math.exp(min(max(delta, -700.0), 700.0)))
            T[i, j] += g * a
            T[i, i] += g * (1.0 - a)
        T[i, i] += 1.0 - mass  # moves rejected before content sampling
    return ExactKernel(space=space, states=states, matrix=T, energies=energies, index=index)


def stationarity_residual(T: np.ndarray, energies: np.ndarray) -> float:
    pi = _pi(energies)
    return float(np.abs(pi @ T - pi).max())


def detailed_balance_violation(T: np.ndarray, energies: np.ndarray) -> float:
    pi = _pi(energies)
    flows = pi[:, None] * T
    return float(np.abs(flows - flows.T).max())


def is_strongly_connected(T: np.ndarray) -> bool:
    adj = T > 0.0
    n = adj.shape[0]

    def reach(start: int, graph: np.ndarray) -> np.ndarray:
        seen = np.zeros(n, dtype=bool)
        stack = [start]
        seen[start] = True
        while stack:
            v = stack.pop()
            for w in np.nonzero(graph[v])[0]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        return seen

    return bool(reach(0, adj).all() and reach(0, adj.T).all())


def has_positive_self_loops(T: np.ndarray) -> bool:
    return bool((np.diag(T) > 0.0).all())


def empirical_distribution_check(
    space: ToyStateSpace,
    scorers: ScorerSuite,
    proposer: Proposer,
    config: SamplerConfig,
    n_steps: int,
    seed: int = 0,
) -> float:
    """Total-variation distance between a long chain's visit histogram
    (first 10% discarded) and the exact stationary distribution.

    Intended for n_steps >= 10^4; smaller runs are allowed for trend
    studies but carry large sampling noise.
    """
    evidence = space.evidence()
    states = space.states
    index = {s: i for i, s in enumerate(states)}
    kernel = ProposalKernel(
        proposer=proposer, saliency=scorers.saliency, alpha=config.alpha, max_tokens=space.max_len
    )
    energy = EnergyCache(scorers, config.weights)
    rng = chain_rng(seed)
    state = make_state(space.original, evidence)
    e_cur = energy(state)

    burn = n_steps // 10
    counts = np.zeros(len(states))
    for it in range(n_steps):
        state, e_cur, _ = step(state, e_cur, kernel, energy, rng, iteration=it)
        if it >= burn:
            counts[index[state.tokens]] += 1.0
    counts /= counts.sum()

    energies = np.array(
        [
            energy(
                EditState(
                    tokens=s,
                    segmentation=segment(s, evidence.sorted_gazetteer),
                    original=space.original,
                    evidence=evidence,
                )
            ).total
            for s in states
        ]
    )
    return float(0.5 * np.abs(counts - _pi(energies)).sum())


# -- built-in spaces ----------------------------------------------------------


def _suite_for(space: ToyStateSpace, order: int = 2, k: float = 0.5) -> tuple[ScorerSuite, Proposer]:
    extra = tuple(space.vocab)
    fluency = NGramMLM(corpus=space.passages, order=order, k=k, extra_vocab=extra)
    verifier = LexicalVerifier()
    suite = ScorerSuite(fluency=fluency, verifier=verifier, saliency=OcclusionSaliency(verifier))
    proposer = NGramProposer(corpus=space.passages, order=order, k=k, extra_vocab=extra)
    return suite, proposer


def space_single_state() -> ToyStateSpace:
    return ToyStateSpace(
        name="single-state",
        vocab=("x",),
        max_len=1,
        gazetteer=(),
        passages=(("x",),),
        original=("x",),
    )


def space_symmetric() -> ToyStateSpace:
    """Fixed-length token-only space: replacement is the only live action and
    the proposal is uniform, so g is symmetric and balance is immediate."""
    return ToyStateSpace(
        name="symmetric",
        vocab=("x", "y", "z"),
        max_len=1,
        gazetteer=(),
        passages=(("y",),),
        original=("x",),
    )


def space_full() -> ToyStateSpace:
    """All actions live: token and entity moves, inserts, deletes, caps.

    Kept deliberately dense (14 states) so per-transition flows are large
    and single-factor corruptions push the stationarity residual well above
    the detection threshold.
    """
    return ToyStateSpace(
        name="full",
        vocab=("x", "y"),
        max_len=3,
        gazetteer=(("x", "y"),),
        passages=(("y",),),
        original=("x", "y", "x"),
    )


def builtin_setup(name: str) -> tuple[ToyStateSpace, ScorerSuite, Proposer, SamplerConfig]:
    spaces = {
        "single-state": space_single_state,
        "symmetric": space_symmetric,
        "full": space_full,
    }
    if name not in spaces:
        raise KeyError(f"unknown toy space {name!r}; choose from {sorted(spaces)}")
    space = spaces[name]()
    suite, proposer = _suite_for(space)
    config = SamplerConfig(iterations=1, seed=0, weights=EnergyWeights())
    return space, suite, proposer, config


# -- selfcheck ----------------------------------------------------------------


@dataclass(frozen=True)
class CheckItem:
    name: str
    value: float
    bound: float
    ok: bool
    comparison: str = "<="


@dataclass(frozen=True)
class SelfcheckReport:
    items: tuple[CheckItem, ...]
    elapsed_s: float

    @property
    def ok(self) -> bool:
        return all(item.ok for item in self.items)

    def lines(self) -> list[str]:
        out = []
        for item in self.items:
            status = "PASS" if item.ok else "FAIL"
            out.append(
                f"[{status}] {item.name}: {item.value:.3e} (want {item.comparison} {item.bound:.0e})"
            )
        out.append(f"selfcheck wall time: {self.elapsed_s:.1f}s")
        return out


def run_selfcheck(
    mutation: str | None = None,
    empirical_steps: int = EMPIRICAL_STEPS,
    spaces: tuple[str, ...] = ("single-state", "symmetric", "full"),
) -> SelfcheckReport:
    """Full certification pass over the built-in toy spaces.

    With ``mutation`` set, only the mutated full-space kernel is built and
    the report *expects detection* (residual above threshold); this is the
    hook the mutation tests and the CLI use.
    """
    t0 = time.perf_counter()
    items: list[CheckItem] = []

    if mutation is not None:
        space, suite, proposer, config = builtin_setup("full")
        kern = build_exact_kernel(space, suite, proposer, config, mutation=mutation)
        residual = stationarity_residual(kern.matrix, kern.energies)
        items.append(
            CheckItem(
                name=f"mutation {mutation} detected (full)",
                value=residual,
                bound=MUTATION_MIN_RESIDUAL,
                ok=residual > MUTATION_MIN_RESIDUAL,
                comparison=">",
            )
        )
        return SelfcheckReport(items=tuple(items), elapsed_s=time.perf_counter() - t0)

    if "symmetric" in spaces:
        space, suite, proposer, config = builtin_setup("symmetric")
        kern = build_exact_kernel(space, suite, proposer, config)
        rows = float(np.abs(kern.matrix.sum(axis=1) - 1.0).max())
        items.append(CheckItem("row stochasticity (symmetric)", rows, 1e-9, rows <= 1e-9))
        res = stationarity_residual(kern.matrix, kern.energies)
        items.append(CheckItem("stationarity residual (symmetric)", res, SYMMETRIC_TOL, res <= SYMMETRIC_TOL))

    if "full" in spaces:
        space, suite, proposer, config = builtin_setup("full")
        kern = build_exact_kernel(space, suite, proposer, config)
        rows = float(np.abs(kern.matrix.sum(axis=1) - 1.0).max())
        items.append(CheckItem("row stochasticity (full)", rows, 1e-9, rows <= 1e-9))
        res = stationarity_residual(kern.matrix, kern.energies)
        items.append(CheckItem("stationarity residual (full)", res, STATIONARITY_TOL, res <= STATIONARITY_TOL))
        bal = detailed_balance_violation(kern.matrix, kern.energies)
        items.append(CheckItem("detailed balance violation (full)", bal, BALANCE_TOL, bal <= BALANCE_TOL))
        items.append(
            CheckItem(
                "irreducibility (full)",
                1.0 if is_strongly_connected(kern.matrix) else 0.0,
                1.0,
                is_strongly_connected(kern.matrix),
                comparison=">=",
            )
        )
        items.append(
            CheckItem(
                "aperiodicity (full)",
                1.0 if has_positive_self_loops(kern.matrix) else 0.0,
                1.0,
                has_positive_self_loops(kern.matrix),
                comparison=">=",
            )
        )
        for mut in MUTATIONS:
            mkern = build_exact_kernel(space, suite, proposer, config, mutation=mut)
            mres = stationarity_residual(mkern.matrix, mkern.energies)
            items.append(
                CheckItem(
                    f"mutation {mut} detected (full)",
                    mres,
                    MUTATION_MIN_RESIDUAL,
                    mres > MUTATION_MIN_RESIDUAL,
                    comparison=">",
                )
            )
        tv = empirical_distribution_check(space, suite, proposer, config, empirical_steps)
        items.append(
            CheckItem(
                f"empirical TV after {empirical_steps} steps (full)",
                tv,
                EMPIRICAL_TV_TOL,
                tv <= EMPIRICAL_TV_TOL,
            )
        )

    if "single-state" in spaces:
        space, suite, proposer, config = builtin_setup("single-state")
        tv = empirical_distribution_check(space, suite, proposer, config, 10_000)
        items.append(CheckItem("empirical TV (single-state)", tv, 0.0, tv == 0.0))

    return SelfcheckReport(items=tuple(items), elapsed_s=time.perf_counter() - t0)
