"""Exact small-instance probabilities by enumerating measurement branches.

These never sample. They walk every outcome of every measurement a strategy
makes, multiply the branch probabilities and add up the branches that end in
an accepted verdict. Each enumeration is refused up front if it would visit
more than ``BRANCH_BUDGET`` branches.

Session-level results are conditional on the spot check passing, matching
the Monte Carlo rates, which leave aborted sessions out. The spot check
touches only sampled registers, so it is independent of everything after
it; ``*_joint`` keys give the unconditional product.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from . import gf2_code as gf2
from . import qbc_session as qs
from . import quantum_core as qc
from .adversaries import CollectiveFixture, accepted_strings
from .errors import BranchBudgetExceeded
from .registers import PublicRegisters

BRANCH_BUDGET = 1 << 24


def _budget(count: int) -> None:
    if count > BRANCH_BUDGET:
        raise BranchBudgetExceeded(f"{count} branches exceed the budget of {BRANCH_BUDGET}")


def _sealed(bit: int, theta: float) -> qc.PureQubit:
    return qc.make_sealed_qubit(bit, theta)


def measure_all(thetas: Sequence[float], bits: Sequence[int] | None = None) -> dict:
    """Read all N qubits in Z, then check. Enumerates the 2**N reading outcomes."""
    N = len(thetas)
    _budget(1 << N)
    bits = list(bits) if bits is not None else [0] * N
    states = [_sealed(b, t) for b, t in zip(bits, thetas)]
    escape = 0.0
    for outcome in itertools.product((0, 1), repeat=N):
        p_read = 1.0
        p_pass = 1.0
        for q, o in zip(states, outcome):
            p_read *= q.prob(o)
            # collapsed to |o>; projection onto the sealed state succeeds with |<q|o>|^2
            p_pass *= q.prob(o)
        escape += p_read * p_pass
    return {"escape": escape}


def deferred_choice(thetas: Sequence[float], target_b: int = 0) -> dict:
    """Deferred-choice cheat, i0 uniform over registers with the given angles.

    Sums over the announced ``a``, the sealed ``x`` and the late decoding
    outcome, all uniform or Born-weighted. Spot-check aborts are excluded.
    """
    _budget(8 * len(thetas))
    escape = success = unveil_target = 0.0
    w = 1.0 / len(thetas)
    for theta in thetas:
        for a, x in itertools.product((0, 1), repeat=2):
            q = _sealed(x, theta)
            for dec in (0, 1):
                p = w * 0.25 * q.prob(dec)
                b = a ^ dec
                ok = a == x ^ b
                escape += p * ok
                success += p * (ok and b == target_b)
                unveil_target += p * (b == target_b)
    return {"escape": escape, "target_success": success, "target_unveiled": unveil_target}


def _spot_pass_dp(bits, thetas, sample, params: qs.ProtocolParams) -> float:
    """Spot-check pass probability; the mismatch count is Poisson-binomial."""
    claimed = [bits[i] for i in sample]
    m = len(sample)
    th = params.thresholds
    if abs(sum(claimed) / m - 0.5) > th.z * math.sqrt(1 / (4 * m)):
        return 0.0
    eps = params.epsilon
    limit = m * eps + th.z * math.sqrt(m * eps * (1 - eps)) + th.slack
    dist = np.zeros(m + 1)
    dist[0] = 1.0
    for i in sample:
        p = math.sin(thetas[i]) ** 2
        dist[1:] = dist[1:] * (1 - p) + dist[:-1] * p
        dist[0] *= 1 - p
    return float(sum(dist[k] for k in range(m + 1) if k <= limit))


def honest_advanced(params: qs.ProtocolParams, bits, thetas, sample, indices, r, c, b: int) -> dict:
    """Honest session with pinned classical choices; enumerates the 2**n decoding outcomes."""
    n = params.n
    _budget(1 << n)
    p_spot = _spot_pass_dp(bits, thetas, sample, params)
    x_true = [bits[i] for i in indices]
    accept = 0.0
    for dec in itertools.product((0, 1), repeat=n):
        p = 1.0
        for i, d in zip(indices, dec):
            p *= _sealed(bits[i], thetas[i]).prob(d)
        c_prime = gf2.xor(c, dec)
        c_owner = gf2.xor(c_prime, x_true)
        ok = gf2.is_codeword(c_owner, params.G) and gf2.dot_parity(c_owner, r) == b
        accept += p * ok
    return {"accept": accept, "spot_pass": p_spot, "accept_joint": p_spot * accept}


def _announce_valid(fx: CollectiveFixture, subset, G) -> bool:
    c = gf2.xor(fx.c_prime, [fx.bits[i] for i in subset])
    return gf2.is_codeword(c, G) and gf2.dot_parity(c, fx.r) == fx.target_b


def collective_search(params: qs.ProtocolParams, fx: CollectiveFixture) -> dict:
    """Collective search by branch enumeration over the register bookkeeping.

    Mirrors the session step by step: each attempt forks on the projector
    outcome, and on the path that stops the owner's checks of every returned
    register are followed along their passing branch.
    """
    G = params.G
    accepted = accepted_strings(G, fx.c_prime, fx.r, fx.target_b)
    sample = set(fx.sample)
    remaining = [i for i in range(params.s) if i not in sample]
    _budget(2 * len(fx.subsets) * (len(remaining) + 1))
    regs0 = PublicRegisters(_sealed(b, t) for b, t in zip(fx.bits, fx.thetas))
    targets = [_sealed(b, t) for b, t in zip(fx.bits, fx.thetas)]
    visited = 0

    def verify(regs: PublicRegisters, subset) -> float:
        nonlocal visited
        if not _announce_valid(fx, subset, G):
            return 0.0
        prob = 1.0
        announced = set(subset)
        for i in remaining:
            if i in announced:
                continue
            branches = regs.project_branches(i, targets[i])
            visited += len(branches)
            passing = [(p, r) for p, ok, r in branches if ok]
            if not passing:
                return 0.0
            p, regs = passing[0]
            prob *= p
        return prob

    def attempt(regs: PublicRegisters, j: int) -> float:
        nonlocal visited
        subset = fx.subsets[j]
        total = 0.0
        branches = regs.project_subset_branches(subset, accepted)
        visited += len(branches)
        for p, ok, post in branches:
            if ok:
                total += p * verify(post, subset)
            elif j + 1 < len(fx.subsets):
                total += p * attempt(post, j + 1)
            else:
                total += p * verify(post, subset)
        return total

    p_spot = _spot_pass_dp(fx.bits, fx.thetas, fx.sample, params)
    escape = attempt(regs0, 0) if fx.subsets else 0.0
    return {"escape": escape, "spot_pass": p_spot, "escape_joint": p_spot * escape, "branches": visited}


def collective_search_closed_form(params: qs.ProtocolParams, fx: CollectiveFixture) -> dict:
    """Same quantity from one state vector over all touched registers.

    All attempt projectors are diagonal, so the unnormalized vector for
    "attempts 1..j-1 failed, attempt j succeeded" is the sealed product state
    masked by ``A_j & ~A_1 & ... & ~A_{j-1}``. The owner's checks are commuting
    rank-one projectors on the returned touched registers; the squared norm
    after applying them is that branch's contribution. Untouched returned
    registers pass with probability one.
    """
    G = params.G
    accepted = {qc.bits_to_index(x) for x in accepted_strings(G, fx.c_prime, fx.r, fx.target_b)}
    touched = sorted(set().union(*map(set, fx.subsets)))
    T = len(touched)
    _budget(1 << T)
    where = {i: p for p, i in enumerate(touched)}
    psi = np.ones(1)
    for i in touched:
        psi = np.kron(psi, _sealed(fx.bits[i], fx.thetas[i]).vector)
    full = np.arange(1 << T)

    def mask_for(subset):
        sub = np.zeros_like(full)
        for i in subset:
            sub = (sub << 1) | ((full >> (T - 1 - where[i])) & 1)
        return np.isin(sub, list(accepted))

    def checked_norm2(vec, subset):
        if not _announce_valid(fx, subset, G):
            return 0.0
        t = vec.reshape((2,) * T) if T else vec
        announced = set(subset)
        for i in touched:
            if i in announced:
                continue
            ax = where[i]
            tgt = _sealed(fx.bits[i], fx.thetas[i]).vector
            along = np.tensordot(t, tgt, axes=([ax], [0]))
            t = np.moveaxis(np.multiply.outer(along, tgt), -1, ax)
        return float(np.sum(t * t))

    none_yet = np.ones(1 << T, dtype=bool)
    escape = 0.0
    for subset in fx.subsets:
        hit = mask_for(subset)
        escape += checked_norm2(np.where(hit & none_yet, psi, 0.0), subset)
        none_yet &= ~hit
    if fx.subsets:
        escape += checked_norm2(np.where(none_yet, psi, 0.0), fx.subsets[-1])

    # spot check by brute force over mismatch patterns
    m = len(fx.sample)
    _budget(1 << m)
    p_spot = 0.0
    claimed = [fx.bits[i] for i in fx.sample]
    for flips in itertools.product((0, 1), repeat=m):
        p = 1.0
        for i, f in zip(fx.sample, flips):
            s2 = math.sin(fx.thetas[i]) ** 2
            p *= s2 if f else 1 - s2
        pairs = [(c ^ f, c) for c, f in zip(claimed, flips)]
        if qs.spot_check(pairs, params.epsilon, params.thresholds).passed:
            p_spot += p
    return {"escape": escape, "spot_pass": p_spot, "escape_joint": p_spot * escape}


def exact_oracle(strategy: str, params, **fixture) -> dict:
    """Dispatch to the enumerator for ``strategy``."""
    if strategy == "measure-all":
        return measure_all(**fixture)
    if strategy == "deferred-choice":
        return deferred_choice(**fixture)
    if strategy == "honest-advanced":
        return honest_advanced(params, **fixture)
    if strategy == "collective-search":
        return collective_search(params, fixture["fixture"])
    raise ValueError(f"no exact oracle for {strategy!r}")
