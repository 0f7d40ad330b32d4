"""Publicly accessible qubit registers with joint-state bookkeeping.

Honest parties only ever touch registers one qubit at a time. An adversary
may merge several registers into a :class:`JointState`; from then on those
indices share one state object until a projection factors a qubit back out.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import quantum_core as qc
from .errors import ArityExceeded, RegisterEntangled
from .quantum_core import JointState, PureQubit


class _Group:
    __slots__ = ("state", "members")

    def __init__(self, state: JointState, members: list[int]):
        self.state = state
        self.members = members


class PublicRegisters:
    """Mutable container of immutable qubit states, indexed ``0 .. N-1``."""

    def __init__(self, qubits: Iterable[PureQubit], cap: int = qc.DEFAULT_ARITY_CAP):
        self._slots: list[PureQubit | _Group] = list(qubits)
        self.cap = cap

    def __len__(self) -> int:
        return len(self._slots)

    @property
    def ids(self) -> range:
        return range(len(self._slots))

    def copy(self) -> "PublicRegisters":
        new = PublicRegisters([], self.cap)
        groups: dict[int, _Group] = {}
        for slot in self._slots:
            if isinstance(slot, _Group):
                if id(slot) not in groups:
                    groups[id(slot)] = _Group(slot.state, list(slot.members))
                slot = groups[id(slot)]
            new._slots.append(slot)
        return new

    def is_joint(self, i: int) -> bool:
        return isinstance(self._slots[i], _Group)

    def qubit(self, i: int) -> PureQubit:
        slot = self._slots[i]
        if isinstance(slot, _Group):
            raise RegisterEntangled(f"register {i} is held in a joint state of {len(slot.members)} qubits")
        return slot

    def group(self, i: int) -> tuple[JointState, tuple[int, ...]]:
        slot = self._slots[i]
        if isinstance(slot, _Group):
            return slot.state, tuple(slot.members)
        return qc.tensor([slot], self.cap), (i,)

    def joint_groups(self) -> list[tuple[int, ...]]:
        seen, out = set(), []
        for slot in self._slots:
            if isinstance(slot, _Group) and id(slot) not in seen:
                seen.add(id(slot))
                out.append(tuple(slot.members))
        return out

    # -- single-register operations -------------------------------------

    def measure_z(self, i: int, rng: np.random.Generator) -> int:
        slot = self._slots[i]
        if not isinstance(slot, _Group):
            bit, post = qc.measure_z(slot, rng)
            self._slots[i] = post
            return bit
        pos = slot.members.index(i)
        bit, state = qc.measure_qubit_z(slot.state, pos, rng)
        self._install(slot, state)
        self._release(slot, i, qc.basis_state(bit))
        return bit

    def measure_basis2(self, i: int, basis: qc.Basis2, rng: np.random.Generator) -> int:
        k, post = qc.measure_basis2(self.qubit(i), basis, rng)
        self._slots[i] = post
        return k

    def project(self, i: int, target: PureQubit, rng: np.random.Generator) -> bool:
        slot = self._slots[i]
        if not isinstance(slot, _Group):
            ok, post = qc.project(slot, target, rng)
            self._slots[i] = post
            return ok
        ok, state = qc.project_qubit(slot.state, slot.members.index(i), target, rng)
        self._install(slot, state)
        if ok:
            self._release(slot, i, target)
        return ok

    def project_branches(self, i: int, target: PureQubit) -> list[tuple[float, bool, "PublicRegisters"]]:
        slot = self._slots[i]
        out = []
        if not isinstance(slot, _Group):
            for p, ok, post in qc.project_branches(slot, target):
                regs = self.copy()
                regs._slots[i] = post
                out.append((p, ok, regs))
            return out
        for p, ok, state in qc.project_qubit_branches(slot.state, slot.members.index(i), target):
            regs = self.copy()
            g = regs._slots[i]
            regs._install(g, state)
            if ok:
                regs._release(g, i, target)
            out.append((p, ok, regs))
        return out

    # -- collective operations ------------------------------------------

    def join(self, indices: Sequence[int]) -> _Group:
        """Merge the states holding ``indices`` (and anything already entangled with them)."""
        parts: list[PureQubit | _Group] = []
        seen = set()
        for i in indices:
            slot = self._slots[i]
            key = id(slot) if isinstance(slot, _Group) else ("q", i)
            if key not in seen:
                seen.add(key)
                parts.append(slot if isinstance(slot, _Group) else i)
        members: list[int] = []
        for part in parts:
            members.extend(part.members if isinstance(part, _Group) else [part])
        if len(members) > self.cap:
            raise ArityExceeded(f"joining {len(members)} registers exceeds cap {self.cap}")
        if len(parts) == 1 and isinstance(parts[0], _Group):
            return parts[0]
        state = None
        for part in parts:
            piece = part.state if isinstance(part, _Group) else qc.tensor([self._slots[part]], self.cap)
            state = piece if state is None else qc.kron_joint(state, piece)
        group = _Group(JointState(state.arity, state.amps, self.cap), members)
        for i in members:
            self._slots[i] = group
        return group

    def project_subset(self, indices: Sequence[int], accepted: Iterable, rng: np.random.Generator) -> bool:
        """Collective projector onto ``accepted`` bitstrings of ``indices`` (in the given order)."""
        group = self.join(indices)
        positions = [group.members.index(i) for i in indices]
        ok, state = qc.joint_project_subset(group.state, accepted, rng, positions)
        self._install(group, state)
        return ok

    def project_subset_branches(
        self, indices: Sequence[int], accepted: Iterable
    ) -> list[tuple[float, bool, "PublicRegisters"]]:
        base = self.copy()
        group = base.join(indices)
        positions = [group.members.index(i) for i in indices]
        out = []
        for p, ok, state in qc.joint_project_branches(group.state, accepted, positions):
            regs = base.copy()
            g = regs._slots[indices[0]]
            regs._install(g, state)
            out.append((p, ok, regs))
        return out

    # -- internals -------------------------------------------------------

    def _install(self, group: _Group, state: JointState) -> None:
        group.state = state

    def _release(self, group: _Group, i: int, qubit: PureQubit) -> None:
        """Factor qubit ``i`` out of ``group``; its state is known to be exactly ``qubit``."""
        pos = group.members.index(i)
        st = group.state
        cube = st.amps.reshape(1 << pos, 2, 1 << (st.arity - pos - 1))
        rest = np.einsum("ajb,j->ab", cube, qubit.vector).reshape(-1)
        group.members.pop(pos)
        self._slots[i] = qubit
        if len(group.members) == 1:
            norm = float(np.hypot(rest[0], rest[1]))
            self._slots[group.members[0]] = qc.PureQubit(float(rest[0]) / norm, float(rest[1]) / norm)
            group.members.clear()
            return
        group.state = JointState(st.arity - 1, rest / np.sqrt(rest @ rest), st.cap)
