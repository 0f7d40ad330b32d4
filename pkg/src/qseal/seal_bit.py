"""Sealing one bit inside a string with a machine-readable mapping rule.

String layout: ``header (32 bits) | body``. The header names the rule; the
rule designates payload positions in the body whose measured values decide
the bit. Every other body position is a dummy.

Header bit layout (MSB first, positions are absolute string indices)::

    bits  0-3   tag      0001 parity, 0010 rotated pair, 0011 no clue
    parity:     4-15 first position, 16-27 last position (inclusive), 28-31 zero
    rotated:    4-15 first position, 16-27 second position, 28-31 angle in degrees
    no clue:    4-31 zero

Tag 0000 and any non-zero reserved field are malformed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import quantum_core as qc
from . import seal_string as ss
from .errors import CapacityExceeded, MalformedHeader
from .registers import PublicRegisters

HEADER_WIDTH = 32
_POS_BITS = 12
_ANGLE_BITS = 4
_TAG_PARITY, _TAG_ROTATED, _TAG_NOCLUE = 1, 2, 3
DEGREE = math.pi / 180


@dataclass(frozen=True)
class ParityOfPositions:
    """Sealed bit is the parity of a contiguous run of positions."""

    positions: tuple[int, ...]

    def __post_init__(self):
        pos = tuple(sorted(int(p) for p in self.positions))
        if not pos:
            raise ValueError("parity rule needs at least one position")
        if pos != tuple(range(pos[0], pos[-1] + 1)):
            raise ValueError(f"parity positions must be contiguous, got {pos}")
        if pos[-1] >= 1 << _POS_BITS or pos[0] < 0:
            raise ValueError(f"positions must fit in {_POS_BITS} bits")
        object.__setattr__(self, "positions", pos)


@dataclass(frozen=True)
class RotatedPairParity:
    """Two qubits read in a rotated basis; the sealed bit is the parity of the basis indices."""

    positions: tuple[int, int]
    angle: float

    def __post_init__(self):
        pos = tuple(int(p) for p in self.positions)
        if len(pos) != 2 or pos[0] == pos[1]:
            raise ValueError(f"rotated rule needs two distinct positions, got {pos}")
        if min(pos) < 0 or max(pos) >= 1 << _POS_BITS:
            raise ValueError(f"positions must fit in {_POS_BITS} bits")
        units = round(self.angle / DEGREE)
        if abs(units * DEGREE - self.angle) > 1e-9 or not 0 <= units < 1 << _ANGLE_BITS:
            raise ValueError(f"angle must be a whole number of degrees in [0, 15], got {self.angle!r}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "angle", units * DEGREE)

    @property
    def degrees(self) -> int:
        return round(self.angle / DEGREE)


@dataclass(frozen=True)
class NoClue:
    """A rule that carries no information; honest readers report the bit as indeterminate."""


MappingRule = Union[ParityOfPositions, RotatedPairParity, NoClue]


def _field(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - j)) & 1 for j in range(width)]


def _value(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | b
    return v


def encode_rule(rule: MappingRule) -> tuple[int, ...]:
    if isinstance(rule, ParityOfPositions):
        body = _field(rule.positions[0], _POS_BITS) + _field(rule.positions[-1], _POS_BITS) + [0] * _ANGLE_BITS
        tag = _TAG_PARITY
    elif isinstance(rule, RotatedPairParity):
        p, q = rule.positions
        body = _field(p, _POS_BITS) + _field(q, _POS_BITS) + _field(rule.degrees, _ANGLE_BITS)
        tag = _TAG_ROTATED
    elif isinstance(rule, NoClue):
        body = [0] * (HEADER_WIDTH - 4)
        tag = _TAG_NOCLUE
    else:
        raise TypeError(f"unknown rule {rule!r}")
    return tuple(_field(tag, 4) + body)


def decode_rule(bits) -> MappingRule:
    bits = tuple(int(b) for b in bits)
    if len(bits) != HEADER_WIDTH or any(b not in (0, 1) for b in bits):
        raise MalformedHeader(f"header must be {HEADER_WIDTH} bits, got {len(bits)}")
    tag = _value(bits[:4])
    a = _value(bits[4:16])
    b = _value(bits[16:28])
    tail = _value(bits[28:])
    try:
        if tag == _TAG_PARITY and tail == 0 and a <= b:
            return ParityOfPositions(tuple(range(a, b + 1)))
        if tag == _TAG_ROTATED and a != b:
            return RotatedPairParity((a, b), tail * DEGREE)
        if tag == _TAG_NOCLUE and a == b == tail == 0:
            return NoClue()
    except ValueError as exc:
        raise MalformedHeader(str(exc)) from exc
    raise MalformedHeader(f"invalid header {''.join(map(str, bits))}")


@dataclass(frozen=True)
class BitSealLayout:
    rule: MappingRule
    header_bits: tuple[int, ...]
    payload_positions: tuple[int, ...]
    payload_bits: tuple[int, ...]
    dummy_positions: tuple[int, ...]
    N: int

    def to_dict(self) -> dict:
        return {
            "header": "".join(map(str, self.header_bits)),
            "payload_positions": list(self.payload_positions),
            "payload": "".join(map(str, self.payload_bits)),
            "N": self.N,
        }


def rule_value(rule: MappingRule, payload_bits) -> int | None:
    """The bit a rule assigns to payload values (basis indices for the rotated rule)."""
    if isinstance(rule, NoClue):
        return None
    return sum(payload_bits) & 1


def payload_positions(rule: MappingRule) -> tuple[int, ...]:
    return () if isinstance(rule, NoClue) else tuple(rule.positions)


def seal_bit(
    b: int,
    rule: MappingRule,
    params: ss.SealParams,
    rng: np.random.Generator,
    no_clue_rate: float = 0.0,
    thetas=None,
) -> tuple[PublicRegisters, ss.OwnerRecord, BitSealLayout]:
    """Seal bit ``b`` as a ``params.N``-qubit string carrying ``rule``.

    With probability ``no_clue_rate`` the rule is replaced by :class:`NoClue`
    and the bit is not recoverable by an honest reader.
    """
    if b not in (0, 1):
        raise ValueError(f"b must be 0 or 1, got {b!r}")
    N = params.N
    if no_clue_rate and rng.random() < no_clue_rate:
        rule = NoClue()
    positions = payload_positions(rule)
    if N < HEADER_WIDTH or any(p < HEADER_WIDTH or p >= N for p in positions):
        raise CapacityExceeded(
            f"N={N} cannot hold a {HEADER_WIDTH}-bit header and payload positions {positions}"
        )
    header = encode_rule(rule)
    bits = np.concatenate([header, rng.integers(0, 2, size=N - HEADER_WIDTH)]).astype(int)
    payload = bits[list(positions)] if positions else np.zeros(0, dtype=int)
    if positions and int(payload.sum()) & 1 != b:
        payload[-1] ^= 1
        bits[positions[-1]] = payload[-1]
    frames = [0.0] * N
    if isinstance(rule, RotatedPairParity):
        for p in positions:
            frames[p] = rule.angle
    regs, record = ss.seal(bits.tolist(), params, rng, thetas=thetas, frames=frames)
    pos_set = set(positions)
    layout = BitSealLayout(
        rule=rule,
        header_bits=header,
        payload_positions=positions,
        payload_bits=tuple(int(x) for x in payload),
        dummy_positions=tuple(i for i in range(HEADER_WIDTH, N) if i not in pos_set),
        N=N,
    )
    return regs, record, layout


def read_bit(regs: PublicRegisters, rng: np.random.Generator) -> int | None:
    """Honest decode: read the header, then apply the measurement its rule prescribes.

    Returns ``None`` for a no-clue rule.
    """
    if len(regs) < HEADER_WIDTH:
        raise MalformedHeader(f"string of {len(regs)} qubits is shorter than the header")
    header = [regs.measure_z(i, rng) for i in range(HEADER_WIDTH)]
    rule = decode_rule(header)
    positions = payload_positions(rule)
    if any(p < HEADER_WIDTH or p >= len(regs) for p in positions):
        raise MalformedHeader(f"rule positions {positions} fall outside the body")
    if isinstance(rule, NoClue):
        return None
    if isinstance(rule, RotatedPairParity):
        basis = qc.Basis2(rule.angle)
        values = [regs.measure_basis2(p, basis, rng) for p in positions]
    else:
        values = [regs.measure_z(p, rng) for p in positions]
    return rule_value(rule, values)


def recovery_error_bound(layout: BitSealLayout, params: ss.SealParams) -> float:
    """Union bound on honest decoding error: every header and payload qubit may flip with prob <= eps."""
    return min(1.0, (HEADER_WIDTH + len(layout.payload_positions)) * ss.max_error_rate(params))
