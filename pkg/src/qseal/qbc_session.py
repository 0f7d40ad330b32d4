"""Seal-based bit commitment: the basic and the codeword-masked protocol.

The owner seals ``s`` random bits into registers and hands them to the
committer. The committer spot-checks ``m`` of them, decodes the register(s)
her commitment is bound to, and later returns every register she claims not
to have touched. The owner accepts if the classical arithmetic works out and
every returned register still projects onto its sealed state.

Parties are pluggable :class:`Committer` / :class:`Owner` objects; the
honest behaviour lives in these base classes and cheating strategies in
:mod:`qseal.adversaries` override single hooks.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import gf2_code as gf2
from . import seal_bit as sb
from . import seal_string as ss
from .errors import MalformedHeader, ProtocolViolation
from .registers import PublicRegisters

log = logging.getLogger(__name__)

COMMIT, UNVEIL = "Commit", "Unveil"
COMMITTER, OWNER = "Committer", "Owner"

_ROMAN = ["i", "ii", "iii", "iv", "v", "vi", "vii", "viii"]


class Check(str, Enum):
    RANDOMNESS = "RandomnessCheck"
    MISMATCH = "MismatchCheck"
    CODEWORD = "CodewordCheck"
    PARITY = "ParityCheck"
    UNREAD = "UnreadCheck"
    CONSISTENCY = "ConsistencyCheck"


SPOT_CHECKS = (Check.RANDOMNESS, Check.MISMATCH)


@dataclass(frozen=True)
class SpotThresholds:
    z: float = 4.0
    slack: float = 1.0
    min_sample: int = 16


@dataclass(frozen=True)
class ProtocolParams:
    """Security parameters shared by both parties.

    In ``"qubit"`` register mode every register is one wobbled qubit and the
    ``s`` registers together form a single sealed string, so ``seal.N == s``.
    In ``"bit-seal"`` mode every register is a full bit seal of ``seal.N``
    qubits carrying ``rule``.
    """

    s: int
    m: int
    seal: ss.SealParams
    n: int | None = None
    G: gf2.GeneratorMatrix | None = None
    thresholds: SpotThresholds = SpotThresholds()
    n_ratio: float = 4.0
    register_mode: str = "qubit"
    rule: sb.MappingRule | None = None
    no_clue_rate: float = 0.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.m < self.s:
            out.append(f"need 0 < m < s, got m={self.m}, s={self.s}")
        if self.m < self.thresholds.min_sample:
            out.append(f"m={self.m} is below the spot-check minimum sample {self.thresholds.min_sample}")
        if self.n is not None:
            if self.n < 1 or self.n > (self.s - self.m) / self.n_ratio:
                out.append(f"n={self.n} must satisfy 1 <= n <= (s-m)/{self.n_ratio:g}")
            if self.G is None or self.G.n != self.n:
                out.append(f"generator matrix block length must equal n={self.n}")
        if self.register_mode == "qubit":
            if self.seal.N != self.s:
                out.append(f"qubit registers form one sealed string: seal.N={self.seal.N} must equal s={self.s}")
        elif self.register_mode == "bit-seal":
            if self.rule is None:
                out.append("bit-seal registers need a mapping rule")
            elif any(p < sb.HEADER_WIDTH or p >= self.seal.N for p in sb.payload_positions(self.rule)):
                out.append(f"rule positions do not fit a {self.seal.N}-qubit seal")
        else:
            out.append(f"unknown register mode {self.register_mode!r}")
        if not 0 <= self.no_clue_rate < 1:
            out.append("no_clue_rate must lie in [0, 1)")
        return out

    @classmethod
    def standard(
        cls, s: int = 64, m: int = 16, n: int | None = 8, Theta: float = math.pi / 8, alpha: float = 0.25,
        G: gf2.GeneratorMatrix | None = None, **kw,
    ) -> "ProtocolParams":
        if n is not None and G is None:
            G = gf2.default_code(n)
        return cls(s=s, m=m, n=n, G=G, seal=ss.SealParams(Theta, alpha, s), **kw)

    @property
    def epsilon(self) -> float:
        """Per-register decoding error allowance used by the spot check."""
        if self.register_mode == "qubit":
            return ss.max_error_rate(self.seal)
        width = sb.HEADER_WIDTH + len(sb.payload_positions(self.rule))
        return min(1.0, width * ss.max_error_rate(self.seal))

    def snapshot(self) -> dict:
        d = {"s": self.s, "m": self.m, "n": self.n, **self.seal.to_dict(), "mode": self.register_mode}
        if self.G is not None:
            d["k"] = self.G.k
            d["G"] = self.G.to_text().split()
        return d


# ----------------------------------------------------------------------------
# transcript


@dataclass(frozen=True)
class Message:
    phase: str
    step: str
    ordinal: int
    seq: int
    sender: str
    payload: dict

    def to_record(self) -> dict:
        body = json.dumps(self.payload, sort_keys=True, separators=(",", ":")).encode()
        return {"phase": self.phase, "step": self.step, "sender": self.sender, "payload": body.hex()}


class SessionTranscript:
    def __init__(self, protocol: str):
        if protocol not in ("basic", "advanced"):
            raise ValueError(f"unknown protocol {protocol!r}")
        self.protocol = protocol
        self.messages: list[Message] = []

    def label(self, ordinal: int) -> str:
        return f"({ordinal})" if self.protocol == "basic" else f"({_ROMAN[ordinal - 1]})"

    def add(self, phase: str, ordinal: int, sender: str, payload: dict) -> Message:
        seq = 0
        if self.messages:
            last = self.messages[-1]
            if ordinal < last.ordinal:
                raise ProtocolViolation(
                    f"step {self.label(ordinal)} after {last.step}", transcript=self
                )
            if phase == COMMIT and last.phase == UNVEIL:
                raise ProtocolViolation("commit message after the unveil phase began", transcript=self)
            seq = last.seq + 1 if ordinal == last.ordinal else 0
        msg = Message(phase, self.label(ordinal), ordinal, seq, sender, payload)
        self.messages.append(msg)
        return msg

    def find(self, step: str, key: str):
        for msg in self.messages:
            if msg.step == step and key in msg.payload:
                return msg.payload[key]
        raise KeyError(f"no {key!r} in step {step}")

    def commit_messages(self) -> list[Message]:
        return [m for m in self.messages if m.phase == COMMIT]

    def dumps(self) -> str:
        return "".join(json.dumps(m.to_record(), sort_keys=True) + "\n" for m in self.messages)

    @classmethod
    def loads(cls, protocol: str, text: str) -> "SessionTranscript":
        tr = cls(protocol)
        for line in text.splitlines():
            rec = json.loads(line)
            step = rec["step"].strip("()")
            ordinal = int(step) if protocol == "basic" else _ROMAN.index(step) + 1
            tr.add(rec["phase"], ordinal, rec["sender"], json.loads(bytes.fromhex(rec["payload"])))
        return tr


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    failed_checks: tuple[Check, ...]
    unveiled_bit: int | None = None

    def __post_init__(self):
        if self.accepted != (not self.failed_checks):
            raise ValueError("accepted must hold exactly when no check failed")

    @classmethod
    def of(cls, failed: Sequence[Check], bit: int | None) -> "Verdict":
        failed = tuple(failed)
        return cls(not failed, failed, bit if not failed else None)

    @property
    def aborted(self) -> bool:
        """The session stopped at the committer's spot check."""
        return any(c in SPOT_CHECKS for c in self.failed_checks)

    def to_payload(self) -> dict:
        return {
            "accepted": self.accepted,
            "failed": [c.value for c in self.failed_checks],
            "bit": self.unveiled_bit,
        }


# ----------------------------------------------------------------------------
# registers held by the committer


class QubitBank:
    """``s`` single-qubit registers sealed as one string."""

    def __init__(self, bits, params: ProtocolParams, rng: np.random.Generator, thetas=None):
        self.regs, self.record = ss.seal(bits, params.seal, rng, thetas=thetas)
        self.bits = self.record.bits

    def decode(self, i: int, rng: np.random.Generator) -> int:
        return self.regs.measure_z(i, rng)

    def check(self, i: int, rng: np.random.Generator) -> bool:
        return self.regs.project(i, self.record.target(i), rng)


class BitSealBank:
    """``s`` registers, each a full bit seal of ``seal.N`` qubits."""

    def __init__(self, bits, params: ProtocolParams, rng: np.random.Generator):
        self.bits = tuple(int(b) for b in bits)
        self.seals: list[tuple[PublicRegisters, ss.OwnerRecord, sb.BitSealLayout]] = [
            sb.seal_bit(b, params.rule, params.seal, rng, no_clue_rate=params.no_clue_rate) for b in self.bits
        ]

    def decode(self, i: int, rng: np.random.Generator) -> int | None:
        try:
            return sb.read_bit(self.seals[i][0], rng)
        except MalformedHeader:
            return None

    def check(self, i: int, rng: np.random.Generator) -> bool:
        regs, record, _ = self.seals[i]
        return ss.check(regs, record, rng).unread


def make_bank(bits, params: ProtocolParams, rng: np.random.Generator, thetas=None):
    if params.register_mode == "qubit":
        return QubitBank(bits, params, rng, thetas)
    return BitSealBank(bits, params, rng)


@dataclass
class SessionContext:
    params: ProtocolParams
    rng: np.random.Generator
    transcript: SessionTranscript
    bank: QubitBank | BitSealBank | None = None
    sample: tuple[int, ...] = ()
    remaining: tuple[int, ...] = ()
    discarded: tuple[int, ...] = ()


# ----------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class SpotResult:
    passed: bool
    failures: tuple[Check, ...]
    ones: int
    mismatches: int
    m: int


def spot_check(pairs: Sequence[tuple[int | None, int]], eps: float, thresholds: SpotThresholds = SpotThresholds()) -> SpotResult:
    """Randomness and mismatch test on ``(decoded, claimed)`` pairs.

    Randomness: ``|ones/m - 1/2| <= z sqrt(1/(4m))`` over the claimed bits.
    Mismatch: at most ``m eps + z sqrt(m eps (1-eps)) + slack`` disagreements;
    registers that decoded to nothing are left out of the mismatch count.
    """
    m = len(pairs)
    if m < thresholds.min_sample:
        raise ValueError(f"spot check needs at least {thresholds.min_sample} samples, got {m}")
    z = thresholds.z
    ones = sum(c for _, c in pairs)
    failures = []
    if abs(ones / m - 0.5) > z * math.sqrt(1 / (4 * m)):
        failures.append(Check.RANDOMNESS)
    decoded = [(d, c) for d, c in pairs if d is not None]
    md = len(decoded)
    mismatches = sum(d != c for d, c in decoded)
    if mismatches > md * eps + z * math.sqrt(md * eps * (1 - eps)) + thresholds.slack:
        failures.append(Check.MISMATCH)
    return SpotResult(not failures, tuple(failures), ones, mismatches, m)


def _check_returned(bank, returned: Sequence[int], rng) -> bool:
    # every register is projected, even after a failure
    results = [bank.check(i, rng) for i in returned]
    return all(results)


def verify_unveil_basic(
    a: int, b: int, i0: int, bank, returned: Sequence[int], allowed: Sequence[int], rng: np.random.Generator
) -> Verdict:
    failed = []
    if i0 not in allowed or b not in (0, 1) or a != bank.bits[i0] ^ b:
        failed.append(Check.CONSISTENCY)
    if not _check_returned(bank, returned, rng):
        failed.append(Check.UNREAD)
    return Verdict.of(failed, b)


def verify_unveil_advanced(
    c_prime, r, b: int, indices: Sequence[int], bank, returned: Sequence[int],
    G: gf2.GeneratorMatrix, allowed: Sequence[int], rng: np.random.Generator,
) -> Verdict:
    failed = []
    indices = list(indices)
    structural = (
        len(indices) == G.n
        and all(i < j for i, j in zip(indices, indices[1:]))
        and set(indices) <= set(allowed)
        and any(r)
        and b in (0, 1)
    )
    if not structural:
        failed.append(Check.CONSISTENCY)
        failed.extend([Check.CODEWORD, Check.PARITY])
    else:
        c = gf2.xor(c_prime, [bank.bits[i] for i in indices])
        if not gf2.is_codeword(c, G):
            failed.append(Check.CODEWORD)
        if gf2.dot_parity(c, r) != b:
            failed.append(Check.PARITY)
    if not _check_returned(bank, returned, rng):
        failed.append(Check.UNREAD)
    return Verdict.of(failed, b)


# ----------------------------------------------------------------------------
# honest parties


class Owner:
    """Honest owner: seals uniformly random bits."""

    guess: int | None = None

    def seal(self, ctx: SessionContext):
        bits = ctx.rng.integers(0, 2, size=ctx.params.s)
        return make_bank(bits, ctx.params, ctx.rng)

    def observe_commit(self, ctx: SessionContext) -> None:
        pass


class Committer:
    """Honest committer."""

    def spot_sample(self, ctx: SessionContext) -> tuple[int, ...]:
        return tuple(sorted(int(i) for i in ctx.rng.choice(ctx.params.s, ctx.params.m, replace=False)))

    def _pick_and_decode(self, ctx: SessionContext, count: int) -> tuple[list[int], list[int], list[int]]:
        """Decode ``count`` random remaining registers, replacing any that decode to nothing."""
        pool = list(ctx.remaining)
        order = [pool[int(j)] for j in ctx.rng.permutation(len(pool))]
        chosen, values, discarded = [], [], []
        for i in order:
            if len(chosen) == count:
                break
            v = ctx.bank.decode(i, ctx.rng)
            if v is None:
                discarded.append(i)
                continue
            chosen.append(i)
            values.append(v)
        if len(chosen) < count:
            raise ProtocolViolation("ran out of decodable registers", transcript=ctx.transcript)
        pairs = sorted(zip(chosen, values))
        return [i for i, _ in pairs], [v for _, v in pairs], sorted(discarded)

    # basic protocol
    def commit_basic(self, ctx: SessionContext, b: int) -> tuple[int, list[int]]:
        (i0,), (x,), discarded = self._pick_and_decode(ctx, 1)
        self.b, self.i0 = b, i0
        return x ^ b, discarded

    def unveil_basic(self, ctx: SessionContext) -> tuple[int, int]:
        return self.b, self.i0

    # advanced protocol
    def choose_r(self, ctx: SessionContext) -> gf2.Bits:
        G = ctx.params.G
        tries = 0
        while True:
            tries += 1
            r = tuple(int(v) for v in ctx.rng.integers(0, 2, size=G.n))
            if any(r) and gf2.separating(G, r):
                break
        if tries > 1:
            log.debug("resampled r %d times to get a separating mask", tries - 1)
        self.r_resamples = tries - 1
        return r

    def commit_advanced(self, ctx: SessionContext, b: int) -> tuple[gf2.Bits, gf2.Bits, list[int]]:
        indices, x, discarded = self._pick_and_decode(ctx, ctx.params.n)
        r = self.choose_r(ctx)
        c = gf2.choose_codeword(ctx.params.G, r, b, ctx.rng)
        self.b, self.indices = b, indices
        return r, gf2.xor(c.bits, x), discarded

    def unveil_advanced(self, ctx: SessionContext) -> tuple[int, list[int]]:
        return self.b, self.indices


# ----------------------------------------------------------------------------
# sessions


def _setup(protocol: str, committer: Committer, owner: Owner, params: ProtocolParams, rng) -> tuple[SessionContext, Verdict | None]:
    ctx = SessionContext(params, rng, SessionTranscript(protocol))
    tr = ctx.transcript
    seal_step = 1 if protocol == "basic" else 2
    if protocol == "advanced":
        tr.add(COMMIT, 1, COMMITTER, {"s": params.s, "m": params.m, "n": params.n, "G": params.G.to_text().split()})
    ctx.bank = owner.seal(ctx)
    tr.add(COMMIT, seal_step, OWNER, {"registers": params.s})
    spot_step = 2
    ctx.sample = tuple(committer.spot_sample(ctx))
    tr.add(COMMIT, spot_step, COMMITTER, {"sample": list(ctx.sample)})
    decoded = [ctx.bank.decode(i, rng) for i in ctx.sample]
    claimed = [int(ctx.bank.bits[i]) for i in ctx.sample]
    tr.add(COMMIT, spot_step, OWNER, {"revealed": gf2.bits_str(claimed)})
    res = spot_check(list(zip(decoded, claimed)), params.epsilon, params.thresholds)
    tr.add(COMMIT, spot_step, COMMITTER, {"spot_check": "pass" if res.passed else "fail",
                                          "mismatches": res.mismatches})
    sample = set(ctx.sample)
    ctx.remaining = tuple(i for i in range(params.s) if i not in sample)
    return ctx, None if res.passed else Verdict.of(res.failures, None)


def run_basic(
    b: int, committer: Committer | None = None, owner: Owner | None = None,
    params: ProtocolParams | None = None, rng: np.random.Generator | None = None,
) -> tuple[SessionTranscript, Verdict]:
    committer = committer or Committer()
    owner = owner or Owner()
    params = params or ProtocolParams.standard(n=None)
    ctx, abort = _setup("basic", committer, owner, params, rng)
    tr = ctx.transcript
    if abort:
        return tr, abort
    a, discarded = committer.commit_basic(ctx, b)
    ctx.discarded = tuple(discarded)
    tr.add(COMMIT, 3, COMMITTER, {"a": int(a), "discarded": list(ctx.discarded)})
    owner.observe_commit(ctx)
    b_u, i0 = committer.unveil_basic(ctx)
    allowed = [i for i in ctx.remaining if i not in set(ctx.discarded)]
    returned = [i for i in allowed if i != i0]
    tr.add(UNVEIL, 4, COMMITTER, {"b": int(b_u), "i0": int(i0), "returned": returned})
    verdict = verify_unveil_basic(int(a), int(b_u), int(i0), ctx.bank, returned, allowed, ctx.rng)
    tr.add(UNVEIL, 5, OWNER, verdict.to_payload())
    return tr, verdict


def run_advanced(
    b: int, committer: Committer | None = None, owner: Owner | None = None,
    params: ProtocolParams | None = None, rng: np.random.Generator | None = None,
) -> tuple[SessionTranscript, Verdict]:
    committer = committer or Committer()
    owner = owner or Owner()
    params = params or ProtocolParams.standard()
    if params.n is None:
        raise ValueError("the advanced protocol needs n and G")
    ctx, abort = _setup("advanced", committer, owner, params, rng)
    tr = ctx.transcript
    if abort:
        return tr, abort
    r, c_prime, discarded = committer.commit_advanced(ctx, b)
    ctx.discarded = tuple(discarded)
    tr.add(COMMIT, 3, COMMITTER, {"discarded": list(ctx.discarded)})
    tr.add(COMMIT, 4, COMMITTER, {"r": gf2.bits_str(r)})
    tr.add(COMMIT, 6, COMMITTER, {"c_prime": gf2.bits_str(c_prime)})
    owner.observe_commit(ctx)
    b_u, indices = committer.unveil_advanced(ctx)
    indices = [int(i) for i in indices]
    allowed = [i for i in ctx.remaining if i not in set(ctx.discarded)]
    announced = set(indices)
    returned = [i for i in allowed if i not in announced]
    tr.add(UNVEIL, 7, COMMITTER, {"b": int(b_u), "indices": indices, "returned": returned})
    verdict = verify_unveil_advanced(c_prime, r, int(b_u), indices, ctx.bank, returned, params.G, allowed, ctx.rng)
    tr.add(UNVEIL, 8, OWNER, verdict.to_payload())
    return tr, verdict


# ----------------------------------------------------------------------------
# analytic references


def honest_acceptance_basic(params: ProtocolParams) -> float:
    """Acceptance probability of an honest session that passed the spot check.

    The owner compares against the bit he sealed, so an honest decoding error
    on the committed register is enough to fail the consistency check.
    """
    return 1.0 - ss.mean_error_rate(params.seal)


def _error_pattern_weight(params: ProtocolParams, want_parity: int) -> float:
    """Average over honest masks r of P(e in C and e.r == want_parity)."""
    G, n = params.G, params.n
    q = ss.mean_error_rate(params.seal)
    masks = [r for r in _all_bits(n) if any(r) and gf2.separating(G, r)]
    total = 0.0
    for e in gf2.codewords(G):
        w = sum(e)
        pe = q**w * (1 - q) ** (n - w)
        frac = sum(gf2.dot_parity(e, r) == want_parity for r in masks) / len(masks)
        total += pe * frac
    return total


def honest_acceptance_advanced(params: ProtocolParams) -> float:
    """Honest acceptance given a passed spot check: the decoding error pattern e must satisfy e in C, e.r = 0."""
    return _error_pattern_weight(params, 0)


def flipped_acceptance_basic(params: ProtocolParams) -> float:
    return ss.mean_error_rate(params.seal)


def flipped_acceptance_advanced(params: ProtocolParams) -> float:
    return _error_pattern_weight(params, 1)


def _all_bits(n: int):
    for v in range(1 << n):
        yield tuple((v >> (n - 1 - j)) & 1 for j in range(n))
