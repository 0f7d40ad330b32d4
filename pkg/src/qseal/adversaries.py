"""Cheating strategies and Monte Carlo attack statistics.

Adversaries here are limited to projective measurements diagonal in the
computational basis of the registers they attack (plus the payload parity
projector). General POVMs and unitaries are not modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import gf2_code as gf2
from . import qbc_session as qs
from . import quantum_core as qc
from . import seal_bit as sb
from . import seal_string as ss
from .errors import ArityExceeded
from .stats import run_trials, wilson_ci

LIMITATION = "adversary class: computational-basis subset projectors only; general POVMs not modelled"


@dataclass(frozen=True)
class TrialOutcome:
    escaped: bool
    hit: bool
    info_bits: float = 0.0
    aborted: bool = False
    failed: tuple[str, ...] = ()


@dataclass(frozen=True)
class AttackReport:
    strategy: str
    trials: int
    aborted: int
    escape_rate: float
    target_success_rate: float
    info_proxy: float
    ci95: dict
    params: dict = field(default_factory=dict)
    note: str = LIMITATION

    @classmethod
    def from_outcomes(cls, strategy: str, outcomes: Sequence[TrialOutcome], params: dict | None = None) -> "AttackReport":
        live = [o for o in outcomes if not o.aborted]
        t = len(live)
        esc = sum(o.escaped for o in live)
        hit = sum(o.hit for o in live)
        return cls(
            strategy=strategy,
            trials=t,
            aborted=len(outcomes) - t,
            escape_rate=esc / t if t else 0.0,
            target_success_rate=hit / t if t else 0.0,
            info_proxy=float(np.mean([o.info_bits for o in live])) if t else 0.0,
            ci95={"escape": wilson_ci(esc, t), "target_success": wilson_ci(hit, t)},
            params=dict(params or {}),
        )


# ----------------------------------------------------------------------------
# parties


class FlipCommitter(qs.Committer):
    """Commits honestly, then unveils the other bit with the same evidence."""

    def unveil_basic(self, ctx):
        return 1 - self.b, self.i0

    def unveil_advanced(self, ctx):
        return 1 - self.b, self.indices


class DeferredChoiceCommitter(qs.Committer):
    """Measures nothing at commit time; the unveiled bit is whatever a late decode dictates."""

    def commit_basic(self, ctx, b):
        self.a = int(ctx.rng.integers(0, 2))
        return self.a, []

    def unveil_basic(self, ctx):
        (i0,), (x,), _ = self._pick_and_decode(ctx, 1)
        self.b_unveiled = self.a ^ x
        return self.b_unveiled, i0


class RandomIndexCommitter(qs.Committer):
    """Announces a random mask and a random n-set it never measured."""

    def __init__(self, target_b: int):
        self.target_b = target_b

    def commit_advanced(self, ctx, b):
        r = self.choose_r(ctx)
        c_prime = tuple(int(v) for v in ctx.rng.integers(0, 2, size=ctx.params.n))
        return r, c_prime, []

    def unveil_advanced(self, ctx):
        pick = ctx.rng.choice(len(ctx.remaining), ctx.params.n, replace=False)
        return self.target_b, sorted(ctx.remaining[int(j)] for j in pick)


def accepted_strings(G: gf2.GeneratorMatrix, c_prime, r, target_b: int) -> list[gf2.Bits]:
    """Register values x that would unveil ``target_b``: ``c' + x`` in C with ``(c' + x) . r == target_b``."""
    return sorted(gf2.xor(c, c_prime) for c in gf2.codewords(G) if gf2.dot_parity(c, r) == target_b)


def plan_subsets(
    remaining: Sequence[int], n: int, t_max: int, rng: np.random.Generator, cap: int = qc.DEFAULT_ARITY_CAP
) -> list[tuple[int, ...]]:
    """Attack order for the collective search.

    Untouched registers are used first. Once fewer than ``n`` remain, new
    subsets may overlap earlier ones as long as the merged joint state stays
    within ``cap`` qubits. No subset is tried twice.
    """
    untouched = [remaining[int(j)] for j in rng.permutation(len(remaining))]
    groups: list[set[int]] = []
    plan: list[tuple[int, ...]] = []
    while len(plan) < t_max:
        if len(untouched) >= n:
            subset = tuple(sorted(untouched[:n]))
            untouched = untouched[n:]
        else:
            subset = None
            for _ in range(64):
                cand = tuple(sorted(remaining[int(j)] for j in rng.choice(len(remaining), n, replace=False)))
                merged = set(cand).union(*[g for g in groups if g & set(cand)])
                if cand not in plan and len(merged) <= cap:
                    subset = cand
                    break
            if subset is None:
                break
        touching = [g for g in groups if g & set(subset)]
        groups = [g for g in groups if not g & set(subset)] + [set(subset).union(*touching)]
        plan.append(subset)
    return plan


@dataclass(frozen=True)
class CollectiveFixture:
    """Pinned classical choices for one collective-search session."""

    bits: tuple[int, ...]
    thetas: tuple[float, ...]
    sample: tuple[int, ...]
    r: gf2.Bits
    c_prime: gf2.Bits
    subsets: tuple[tuple[int, ...], ...]
    target_b: int


class FixedOwner(qs.Owner):
    def __init__(self, bits, thetas):
        self.bits, self.thetas = bits, thetas

    def seal(self, ctx):
        return qs.make_bank(self.bits, ctx.params, ctx.rng, thetas=self.thetas)


class CollectiveSearchCommitter(qs.Committer):
    """Commits to nothing, then hunts for a register set whose sealed values unveil the target.

    Each attempt merges an n-subset into one joint state and applies the
    projector onto the accepted value strings. A failed attempt leaves that
    (now entangled) state behind; those registers are still returned.
    """

    def __init__(self, target_b: int, t_max: int = 8, fixture: CollectiveFixture | None = None):
        self.target_b = target_b
        self.t_max = t_max
        self.fixture = fixture
        self.attempts = 0
        self.found = False
        self.info_bits = 0.0

    def spot_sample(self, ctx):
        return self.fixture.sample if self.fixture else super().spot_sample(ctx)

    def commit_advanced(self, ctx, b):
        if not isinstance(ctx.bank, qs.QubitBank):
            raise TypeError("collective search needs single-qubit registers")
        if self.fixture:
            self.r, self.c_prime = self.fixture.r, self.fixture.c_prime
        else:
            self.r = self.choose_r(ctx)
            self.c_prime = tuple(int(v) for v in ctx.rng.integers(0, 2, size=ctx.params.n))
        return self.r, self.c_prime, []

    def unveil_advanced(self, ctx):
        params = ctx.params
        n = params.n
        accepted = accepted_strings(params.G, self.c_prime, self.r, self.target_b)
        regs = ctx.bank.regs
        if n > regs.cap:
            raise ArityExceeded(f"n={n} exceeds the joint-state cap {regs.cap}")
        plan = list(self.fixture.subsets) if self.fixture else plan_subsets(ctx.remaining, n, self.t_max, ctx.rng, regs.cap)
        hit_bits = math.log2((1 << n) / len(accepted))
        miss_bits = math.log2((1 << n) / ((1 << n) - len(accepted))) if len(accepted) < 1 << n else 0.0
        chosen = plan[-1]
        bits = []
        for subset in plan:
            self.attempts += 1
            if regs.project_subset(subset, accepted, ctx.rng):
                self.found = True
                bits.append(hit_bits)
                chosen = subset
                break
            bits.append(miss_bits)
        self.info_bits = float(np.mean(bits)) if bits else 0.0
        return self.target_b, list(chosen)


class TranscriptGuessingOwner(qs.Owner):
    """Guesses the committed bit from commit-phase messages only."""

    def observe_commit(self, ctx):
        tr = ctx.transcript
        if tr.protocol == "basic":
            self.guess = int(tr.find("(3)", "a"))
        else:
            self.guess = gf2.dot_parity(tr.find("(vi)", "c_prime"), tr.find("(iv)", "r"))


class RecordGuessingOwner(qs.Owner):
    """Basic protocol: also uses the sealed values, guessing the majority value among candidate registers."""

    def observe_commit(self, ctx):
        a = int(ctx.transcript.find("(3)", "a"))
        cand = [ctx.bank.bits[i] for i in ctx.remaining if i not in set(ctx.discarded)]
        majority = int(2 * sum(cand) > len(cand))
        self.guess = a ^ majority


# ----------------------------------------------------------------------------
# trial runners


def _outcome(verdict: qs.Verdict, hit: bool, info: float = 0.0) -> TrialOutcome:
    return TrialOutcome(
        escaped=verdict.accepted,
        hit=verdict.accepted and hit,
        info_bits=info,
        aborted=verdict.aborted,
        failed=tuple(c.value for c in verdict.failed_checks),
    )


def honest_session(protocol: str, b: int, params: qs.ProtocolParams, rng) -> TrialOutcome:
    run = qs.run_basic if protocol == "basic" else qs.run_advanced
    _, v = run(b, qs.Committer(), qs.Owner(), params, rng)
    return _outcome(v, v.unveiled_bit == b)


def flip_unveil(protocol: str, b: int, params: qs.ProtocolParams, rng) -> TrialOutcome:
    run = qs.run_basic if protocol == "basic" else qs.run_advanced
    _, v = run(b, FlipCommitter(), qs.Owner(), params, rng)
    return _outcome(v, v.unveiled_bit == 1 - b)


def deferred_choice_basic(target_b: int, params: qs.ProtocolParams, rng) -> TrialOutcome:
    committer = DeferredChoiceCommitter()
    _, v = qs.run_basic(target_b, committer, qs.Owner(), params, rng)
    return _outcome(v, getattr(committer, "b_unveiled", None) == target_b, 1.0)


def random_index_advanced(target_b: int, params: qs.ProtocolParams, rng) -> TrialOutcome:
    _, v = qs.run_advanced(target_b, RandomIndexCommitter(target_b), qs.Owner(), params, rng)
    return _outcome(v, True)


def collective_search_advanced(
    target_b: int, params: qs.ProtocolParams, t_max: int = 8, rng=None, fixture: CollectiveFixture | None = None
) -> TrialOutcome:
    if params.n > qc.DEFAULT_ARITY_CAP:
        raise ArityExceeded(f"n={params.n} exceeds the joint-state cap {qc.DEFAULT_ARITY_CAP}")
    committer = CollectiveSearchCommitter(target_b, t_max, fixture)
    owner = FixedOwner(fixture.bits, fixture.thetas) if fixture else qs.Owner()
    _, v = qs.run_advanced(target_b, committer, owner, params, rng)
    return _outcome(v, True, committer.info_bits)


def concealing_trial(protocol: str, b: int, params: qs.ProtocolParams, rng, owner_cls=TranscriptGuessingOwner) -> TrialOutcome:
    """``hit`` is whether the owner's commit-phase guess equals ``b``."""
    owner = owner_cls()
    run = qs.run_basic if protocol == "basic" else qs.run_advanced
    _, v = run(b, qs.Committer(), owner, params, rng)
    return TrialOutcome(escaped=v.accepted, hit=owner.guess == b, aborted=v.aborted)


def measure_all_reader(params: ss.SealParams, rng, thetas=None, rule: sb.MappingRule | None = None) -> TrialOutcome:
    """Read every qubit in Z, then let the owner check. ``hit`` is full recovery of the string."""
    if rule is None:
        bits = rng.integers(0, 2, size=params.N)
        regs, record = ss.seal(bits.tolist(), params, rng, thetas=thetas)
    else:
        regs, record, _ = sb.seal_bit(int(rng.integers(0, 2)), rule, params, rng, thetas=thetas)
    seen = ss.read(regs, rng)
    report = ss.check(regs, record, rng)
    return TrialOutcome(escaped=report.unread, hit=seen == record.bits, info_bits=float(params.N))


def subset_parity_reader(rule: sb.ParityOfPositions, params: ss.SealParams, rng, thetas=None) -> TrialOutcome:
    """Learn a parity-sealed bit with one two-outcome parity projector on the payload."""
    if len(rule.positions) > qc.DEFAULT_ARITY_CAP:
        raise ArityExceeded(f"payload of {len(rule.positions)} qubits exceeds the joint-state cap")
    b = int(rng.integers(0, 2))
    regs, record, layout = sb.seal_bit(b, rule, params, rng, thetas=thetas)
    k = len(rule.positions)
    even = [x for x in range(1 << k) if bin(x).count("1") % 2 == 0]
    learned = 0 if regs.project_subset(list(rule.positions), even, rng) else 1
    report = ss.check(regs, record, rng)
    return TrialOutcome(escaped=report.unread, hit=learned == b, info_bits=1.0)


# ----------------------------------------------------------------------------
# closed forms


def measure_all_escape(thetas: Sequence[float]) -> float:
    """``prod(cos^4 + sin^4)``: pass probability after reading every qubit in Z."""
    return float(np.prod([math.cos(t) ** 4 + math.sin(t) ** 4 for t in thetas]))


def measure_all_escape_mean(params: ss.SealParams) -> float:
    """``measure_all_escape`` averaged over uniformly drawn angles."""
    u = params.wobble
    mean_sin2_2t = 0.5 - math.sin(4 * u) / (8 * u)
    return (1.0 - 0.5 * mean_sin2_2t) ** params.N


def escape_bound_mean(params: ss.SealParams) -> float:
    """``E[prod cos^2 theta_i]``, the escape bound at K = N averaged over angles."""
    u = params.wobble
    return (0.5 + math.sin(2 * u) / (4 * u)) ** params.N


def parity_reader_escape(record: ss.OwnerRecord, positions: Sequence[int]) -> float:
    """``p_even^2 + p_odd^2`` for the payload parity projector on a fresh seal."""
    prod = 1.0
    for i in positions:
        q = record.target(i)
        prod *= q.amp0**2 - q.amp1**2
    p_even = 0.5 * (1 + prod)
    return p_even**2 + (1 - p_even) ** 2


# ----------------------------------------------------------------------------
# batch runs


STRATEGIES = ("honest", "flip", "deferred-choice", "random-index", "collective-search",
              "measure-all", "subset-parity", "guess")


def run_attack(
    fn: Callable, trials: int, seed: int, strategy: str, cell: Sequence[int] = (0,), params: dict | None = None,
    workers: int = 1,
) -> AttackReport:
    outcomes = run_trials(fn, trials, seed, cell=cell, workers=workers)
    return AttackReport.from_outcomes(strategy, outcomes, params)
