"""Exact real-amplitude state vectors for single qubits and small registers.

All states in the seal and commitment protocols are real, so amplitudes are
plain floats. Joint registers index amplitudes by bitstring with the first
qubit as the most significant bit.

Stochastic operations take a ``numpy.random.Generator`` and return new state
objects; nothing is mutated in place. The ``*_branches`` variants return every
outcome with its exact probability instead of sampling one, which is what the
exact oracles enumerate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ArityExceeded, EmptySubsetWithUnitDemand, NotNormalized, NotProductState

TOL = 1e-9
DEFAULT_ARITY_CAP = 16
# probabilities this close to 0 or 1 are snapped so deterministic branches stay deterministic
_SNAP = 1e-12


def _snap(p: float) -> float:
    if p > 1.0 - _SNAP:
        return 1.0
    if p < _SNAP:
        return 0.0
    return p


@dataclass(frozen=True, slots=True)
class PureQubit:
    amp0: float
    amp1: float

    def __post_init__(self):
        norm = self.amp0 * self.amp0 + self.amp1 * self.amp1
        if not math.isfinite(norm) or abs(norm - 1.0) > TOL:
            raise NotNormalized(f"|amp0|^2 + |amp1|^2 = {norm!r}, expected 1")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1])

    def overlap(self, other: "PureQubit") -> float:
        return self.amp0 * other.amp0 + self.amp1 * other.amp1

    def prob(self, bit: int) -> float:
        a = self.amp1 if bit else self.amp0
        return a * a

    def isclose(self, other: "PureQubit", tol: float = TOL, up_to_sign: bool = True) -> bool:
        same = abs(self.amp0 - other.amp0) <= tol and abs(self.amp1 - other.amp1) <= tol
        if same or not up_to_sign:
            return same
        return abs(self.amp0 + other.amp0) <= tol and abs(self.amp1 + other.amp1) <= tol


ZERO = PureQubit(1.0, 0.0)
ONE = PureQubit(0.0, 1.0)


def basis_state(bit: int) -> PureQubit:
    return ONE if bit else ZERO


def _normalized(a0: float, a1: float) -> PureQubit:
    n = math.hypot(a0, a1)
    return PureQubit(a0 / n, a1 / n)


def make_sealed_qubit(bit: int, theta: float) -> PureQubit:
    """``cos(theta)|bit> + sin(theta)|1-bit>``."""
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta!r}")
    c, s = math.cos(theta), math.sin(theta)
    return PureQubit(s, c) if bit else PureQubit(c, s)


def rotate(state: PureQubit, phi: float) -> PureQubit:
    """Apply the real rotation taking |0> to cos(phi)|0> + sin(phi)|1>."""
    c, s = math.cos(phi), math.sin(phi)
    return PureQubit(c * state.amp0 - s * state.amp1, s * state.amp0 + c * state.amp1)


@dataclass(frozen=True, slots=True)
class Basis2:
    """Orthonormal pair {cos a|0> + sin a|1>, -sin a|0> + cos a|1>}."""

    angle: float

    @property
    def vectors(self) -> tuple[PureQubit, PureQubit]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return PureQubit(c, s), PureQubit(-s, c)


def _draw(rng: np.random.Generator, p: float) -> bool:
    # random() is in [0, 1): p == 1 always fires, p == 0 never does
    return rng.random() < p


def measure_z(state: PureQubit, rng: np.random.Generator) -> tuple[int, PureQubit]:
    p0 = _snap(state.amp0 * state.amp0)
    if _draw(rng, p0):
        return 0, ZERO
    return 1, ONE


def project_branches(state: PureQubit, target: PureQubit) -> list[tuple[float, bool, PureQubit]]:
    """Both outcomes of the two-outcome measurement {|t><t|, 1 - |t><t|}."""
    ov = state.overlap(target)
    p = _snap(ov * ov)
    out = []
    if p > 0.0:
        out.append((p, True, target))
    if p < 1.0:
        a0 = state.amp0 - ov * target.amp0
        a1 = state.amp1 - ov * target.amp1
        out.append((1.0 - p, False, _normalized(a0, a1)))
    return out


def project(state: PureQubit, target: PureQubit, rng: np.random.Generator) -> tuple[bool, PureQubit]:
    """Try to project ``state`` onto ``target``.

    On failure the post-state is the normalized component of ``state``
    orthogonal to ``target``.
    """
    if state == target:
        return True, target
    branches = project_branches(state, target)
    if len(branches) == 1:
        return branches[0][1], branches[0][2]
    p, _, post = branches[0]
    if _draw(rng, p):
        return True, post
    return False, branches[1][2]


def measure_basis2(state: PureQubit, basis: Basis2, rng: np.random.Generator) -> tuple[int, PureQubit]:
    v0, v1 = basis.vectors
    ov = state.overlap(v0)
    if _draw(rng, _snap(ov * ov)):
        return 0, v0
    return 1, v1


# ----------------------------------------------------------------------------
# joint registers


@dataclass(frozen=True, eq=False)
class JointState:
    arity: int
    amps: np.ndarray
    cap: int = DEFAULT_ARITY_CAP

    def __post_init__(self):
        if self.arity > self.cap:
            raise ArityExceeded(f"arity {self.arity} exceeds cap {self.cap}")
        amps = np.asarray(self.amps, dtype=float)
        if amps.shape != (1 << self.arity,):
            raise ValueError(f"expected {1 << self.arity} amplitudes, got shape {amps.shape}")
        norm = float(amps @ amps)
        if abs(norm - 1.0) > TOL:
            raise NotNormalized(f"sum of squared amplitudes = {norm!r}, expected 1")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    def probabilities(self) -> np.ndarray:
        return self.amps * self.amps

    def _with(self, amps: np.ndarray) -> "JointState":
        return JointState(self.arity, amps / np.sqrt(amps @ amps), self.cap)


def tensor(qubits: Sequence[PureQubit], cap: int = DEFAULT_ARITY_CAP) -> JointState:
    if len(qubits) > cap:
        raise ArityExceeded(f"{len(qubits)} qubits exceed arity cap {cap}")
    amps = np.ones(1)
    for q in qubits:
        amps = np.multiply.outer(amps, q.vector).ravel()
    return JointState(len(qubits), amps, cap)


def kron_joint(a: JointState, b: JointState) -> JointState:
    """Joint state of ``a`` followed by ``b`` (b's qubits become the low bits)."""
    cap = max(a.cap, b.cap)
    if a.arity + b.arity > cap:
        raise ArityExceeded(f"arity {a.arity + b.arity} exceeds cap {cap}")
    return JointState(a.arity + b.arity, np.multiply.outer(a.amps, b.amps).ravel(), cap)


def bits_to_index(bits: Sequence[int] | str | int) -> int:
    if isinstance(bits, (int, np.integer)):
        return int(bits)
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index: int, width: int) -> tuple[int, ...]:
    return tuple((index >> (width - 1 - j)) & 1 for j in range(width))


def sub_indices(arity: int, qubits: Sequence[int]) -> np.ndarray:
    """For every full basis index, the index of its restriction to ``qubits``."""
    return _sub_indices(arity, tuple(int(q) for q in qubits))


@lru_cache(maxsize=4096)
def _sub_indices(arity: int, qubits: tuple[int, ...]) -> np.ndarray:
    full = np.arange(1 << arity)
    sub = np.zeros_like(full)
    for q in qubits:
        sub = (sub << 1) | ((full >> (arity - 1 - q)) & 1)
    sub.flags.writeable = False
    return sub


def subset_mask(arity: int, accepted: Iterable, qubits: Sequence[int] | None = None) -> np.ndarray:
    qubits = range(arity) if qubits is None else qubits
    k = len(qubits)
    table = np.zeros(1 << k, dtype=bool)
    for x in accepted:
        i = bits_to_index(x)
        if not 0 <= i < (1 << k):
            raise ValueError(f"bitstring {x!r} outside {{0,1}}^{k}")
        table[i] = True
    return table[sub_indices(arity, qubits)]


def subset_probability(state: JointState, accepted: Iterable, qubits: Sequence[int] | None = None) -> float:
    mask = subset_mask(state.arity, accepted, qubits)
    return float(state.probabilities()[mask].sum())


def joint_project_branches(
    state: JointState, accepted: Iterable, qubits: Sequence[int] | None = None
) -> list[tuple[float, bool, JointState]]:
    mask = subset_mask(state.arity, accepted, qubits)
    p = _snap(float(state.probabilities()[mask].sum()))
    out = []
    if p > 0.0:
        out.append((p, True, state._with(np.where(mask, state.amps, 0.0))))
    if p < 1.0:
        out.append((1.0 - p, False, state._with(np.where(mask, 0.0, state.amps))))
    return out


def joint_project_subset(
    state: JointState, accepted: Iterable, rng: np.random.Generator, qubits: Sequence[int] | None = None
) -> tuple[bool, JointState]:
    """Two-outcome measurement {P, 1-P}, P = sum of |x><x| over ``accepted``.

    ``qubits`` restricts the projector to those positions of ``state`` (in the
    given order); bitstrings in ``accepted`` are read over that restriction.
    An empty ``accepted`` set never succeeds and leaves ``state`` unchanged.
    """
    accepted = list(accepted)
    if not accepted:
        warnings.warn("empty accepted set: projector is zero", EmptySubsetWithUnitDemand, stacklevel=2)
        return False, state
    branches = joint_project_branches(state, accepted, qubits)
    if len(branches) == 1:
        return branches[0][1], branches[0][2]
    if _draw(rng, branches[0][0]):
        return True, branches[0][2]
    return False, branches[1][2]


def _reshape_at(amps: np.ndarray, arity: int, pos: int) -> np.ndarray:
    # axis 1 is the qubit at ``pos``
    return amps.reshape(1 << pos, 2, 1 << (arity - pos - 1))


def project_qubit_branches(
    state: JointState, pos: int, target: PureQubit
) -> list[tuple[float, bool, JointState]]:
    """Outcomes of projecting qubit ``pos`` of a joint state onto ``target``."""
    t = target.vector
    cube = _reshape_at(state.amps, state.arity, pos)
    along = np.einsum("ajb,j->ab", cube, t)
    hit = np.einsum("ab,j->ajb", along, t)
    p = _snap(float(np.sum(hit * hit)))
    out = []
    if p > 0.0:
        out.append((p, True, state._with(hit.reshape(-1))))
    if p < 1.0:
        out.append((1.0 - p, False, state._with((cube - hit).reshape(-1))))
    return out


def project_qubit(
    state: JointState, pos: int, target: PureQubit, rng: np.random.Generator
) -> tuple[bool, JointState]:
    branches = project_qubit_branches(state, pos, target)
    if len(branches) == 1:
        return branches[0][1], branches[0][2]
    if _draw(rng, branches[0][0]):
        return True, branches[0][2]
    return False, branches[1][2]


def measure_qubit_z(state: JointState, pos: int, rng: np.random.Generator) -> tuple[int, JointState]:
    cube = _reshape_at(state.amps, state.arity, pos)
    p0 = _snap(float(np.sum(cube[:, 0, :] ** 2)))
    outcome = 0 if _draw(rng, p0) else 1
    post = cube.copy()
    post[:, 1 - outcome, :] = 0.0
    return outcome, state._with(post.reshape(-1))


def _factor_first(amps: np.ndarray, tol: float) -> tuple[PureQubit, np.ndarray]:
    """Split off the leading qubit of a product vector, or raise NotProductState."""
    m = amps.reshape(2, -1)
    r0, r1 = m[0], m[1]
    # rank one iff every 2x2 minor vanishes
    if np.max(np.abs(np.outer(r0, r1) - np.outer(r1, r0)), initial=0.0) > tol:
        raise NotProductState("state is entangled across the leading qubit")
    n0, n1 = float(np.linalg.norm(r0)), float(np.linalg.norm(r1))
    sign = -1.0 if float(r0 @ r1) < 0 else 1.0
    q = _normalized(n0, sign * n1)
    return q, q.amp0 * r0 + q.amp1 * r1


def split_to_qubits(state: JointState, tol: float = TOL) -> list[PureQubit]:
    """Factor a product state into single qubits (global sign is pushed to the last factor)."""
    amps = np.asarray(state.amps)
    out = []
    for _ in range(state.arity - 1):
        q, amps = _factor_first(amps, tol)
        out.append(q)
    if state.arity:
        out.append(_normalized(float(amps[0]), float(amps[1])))
    return out


def is_product(state: JointState, tol: float = TOL) -> bool:
    try:
        split_to_qubits(state, tol)
    except NotProductState:
        return False
    return True
