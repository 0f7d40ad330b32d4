"""Quantum string seal: wobbled-qubit sealing, honest reading, owner's check.

Each bit ``b_i`` of an ``N``-bit string is stored as
``cos(theta_i)|b_i> + sin(theta_i)|1-b_i>`` with a secret angle drawn
uniformly from ``[-Theta/N**alpha, +Theta/N**alpha]``. Anyone can read the
string by measuring in the computational basis; only the owner, who kept the
angles, can test whether that happened.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import quantum_core as qc
from .registers import PublicRegisters

THETA_MAX = math.pi / 8

UNREAD = "Unread"
READ_DETECTED = "ReadDetected"


@dataclass(frozen=True)
class SealParams:
    Theta: float
    alpha: float
    N: int
    theta_max: float = THETA_MAX

    def __post_init__(self):
        errors = self.violations()
        if errors:
            raise ValueError("; ".join(errors))

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.Theta <= self.theta_max:
            out.append(f"Theta={self.Theta!r} must satisfy 0 < Theta <= {self.theta_max!r}")
        if not 0 < self.alpha < 0.5:
            out.append(f"alpha={self.alpha!r} must satisfy 0 < alpha < 1/2")
        if int(self.N) != self.N or self.N < 1:
            out.append(f"N={self.N!r} must be a positive integer")
        return out

    @property
    def wobble(self) -> float:
        """Largest allowed ``|theta_i|``."""
        return self.Theta / self.N**self.alpha

    def with_N(self, N: int) -> "SealParams":
        return SealParams(self.Theta, self.alpha, N, self.theta_max)

    def to_dict(self) -> dict:
        return {"Theta": self.Theta, "alpha": self.alpha, "N": self.N}


def _bits(bits) -> tuple[int, ...]:
    if isinstance(bits, str):
        return tuple(int(c) for c in bits)
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValueError(f"not a bitstring: {bits!r}")
    return out


@dataclass(frozen=True)
class OwnerRecord:
    """The sealer's secret: bits, wobble angles and (for rotated seals) frame angles."""

    bits: tuple[int, ...]
    thetas: tuple[float, ...]
    params: SealParams
    frames: tuple[float, ...] = field(default=())

    def __post_init__(self):
        n = self.params.N
        if not self.frames:
            object.__setattr__(self, "frames", (0.0,) * n)
        if not (len(self.bits) == len(self.thetas) == len(self.frames) == n):
            raise ValueError("bits, thetas and frames must all have length N")
        bound = self.params.wobble * (1 + 1e-12)
        if any(abs(t) > bound for t in self.thetas):
            raise ValueError(f"a theta exceeds the wobble bound {self.params.wobble!r}")

    def target(self, i: int) -> qc.PureQubit:
        q = qc.make_sealed_qubit(self.bits[i], self.thetas[i])
        return qc.rotate(q, self.frames[i]) if self.frames[i] else q

    def to_dict(self) -> dict:
        return {
            "bits": "".join(map(str, self.bits)),
            "thetas": list(self.thetas),
            "frames": list(self.frames),
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OwnerRecord":
        p = d["params"]
        return cls(
            _bits(d["bits"]),
            tuple(float(t) for t in d["thetas"]),
            SealParams(float(p["Theta"]), float(p["alpha"]), int(p["N"])),
            tuple(float(f) for f in d.get("frames", ())),
        )


@dataclass(frozen=True)
class CheckReport:
    verdict: str
    failed_indices: frozenset[int]

    @property
    def unread(self) -> bool:
        return self.verdict == UNREAD


def draw_thetas(params: SealParams, rng: np.random.Generator, size: int | None = None) -> tuple[float, ...]:
    u = params.wobble
    return tuple(float(t) for t in rng.uniform(-u, u, size=params.N if size is None else size))


def seal(
    bits,
    params: SealParams,
    rng: np.random.Generator,
    thetas: Sequence[float] | None = None,
    frames: Sequence[float] | None = None,
) -> tuple[PublicRegisters, OwnerRecord]:
    """Seal ``bits``; ``thetas`` pins the secret angles instead of drawing them."""
    bits = _bits(bits)
    if len(bits) != params.N:
        raise ValueError(f"got {len(bits)} bits for a seal of length N={params.N}")
    if thetas is None:
        thetas = draw_thetas(params, rng)
    record = OwnerRecord(bits, tuple(float(t) for t in thetas), params, tuple(frames or ()))
    regs = PublicRegisters(record.target(i) for i in range(params.N))
    return regs, record


def read(regs: PublicRegisters, rng: np.random.Generator) -> tuple[int, ...]:
    """Honest reading; raises RegisterEntangled if an adversary left a joint state behind."""
    for i in regs.ids:
        regs.qubit(i)
    return tuple(regs.measure_z(i, rng) for i in regs.ids)


def check(regs: PublicRegisters, record: OwnerRecord, rng: np.random.Generator) -> CheckReport:
    if len(regs) != record.params.N:
        raise ValueError(f"record covers {record.params.N} registers, got {len(regs)}")
    failed = frozenset(i for i in regs.ids if not regs.project(i, record.target(i), rng))
    return CheckReport(READ_DETECTED if failed else UNREAD, failed)


def max_error_rate(params: SealParams) -> float:
    """Worst-case per-bit reading error ``sin^2(Theta / N**alpha)``."""
    return math.sin(params.wobble) ** 2


def mean_error_rate(params: SealParams) -> float:
    """Per-bit reading error averaged over uniformly drawn angles."""
    u = params.wobble
    if u < 1e-4:
        # the closed form cancels badly here; E[sin^2] = u^2/3 - u^4/15 + ...
        return u * u / 3 - u**4 / 15
    return 0.5 - math.sin(2 * u) / (4 * u)


def escape_bound(thetas: Sequence[float], K: float) -> float:
    """Upper bound on passing the check after extracting ``K`` bits: ``2**-K * prod(2 cos^2 theta_i)``."""
    if not 0 <= K <= len(thetas):
        raise ValueError(f"K={K!r} must lie in [0, {len(thetas)}]")
    if any(math.cos(t) == 0.0 for t in thetas):
        return 0.0
    log2p = -K + sum(1.0 + 2.0 * math.log2(abs(math.cos(t))) for t in thetas)
    return 1.0 if log2p >= 0 else 2.0**log2p
