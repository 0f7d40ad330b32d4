import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

from qseal import quantum_core as qc
from qseal import seal_string as ss
from qseal.rng import stream
from qseal.stats import within_sigma


def mean_sin2(u):
    # independent oracle: numerical average of sin^2 over [-u, u]
    val, _ = integrate.quad(lambda t: math.sin(t) ** 2, -u, u, epsabs=1e-15, epsrel=1e-13)
    return val / (2 * u)


def test_params_collect_every_violation():
    with pytest.raises(ValueError) as exc:
        ss.SealParams(Theta=2.0, alpha=0.7, N=0)
    msg = str(exc.value)
    assert "Theta" in msg and "alpha" in msg and "N=" in msg


def test_zero_wobble_limit(rng):
    p = ss.SealParams(1e-12, 0.25, 1)
    regs, record = ss.seal([1], p, rng)
    assert regs.qubit(0).isclose(qc.ONE, tol=1e-11)
    assert ss.read(regs, rng) == (1,)


def test_seal_record_and_bounds(rng):
    p = ss.SealParams(math.pi / 8, 0.25, 4)
    regs, record = ss.seal("1010", p, rng)
    assert record.bits == (1, 0, 1, 0)
    assert all(abs(t) <= math.pi / 8 / 4**0.25 for t in record.thetas)


def test_theta_distribution_is_uniform():
    p = ss.SealParams(math.pi / 8, 0.25, 16)
    gen = stream(2, 0)
    thetas = np.array(ss.draw_thetas(p, gen, size=100_000))
    u = p.wobble
    res = stats.kstest(thetas, stats.uniform(loc=-u, scale=2 * u).cdf)
    # sqrt(n) * D follows the Kolmogorov distribution under the null
    limit = stats.kstwobign.mean() + 3 * stats.kstwobign.std()
    assert math.sqrt(len(thetas)) * res.statistic < limit


def test_record_rejects_oversized_theta():
    p = ss.SealParams(0.1, 0.25, 1)
    with pytest.raises(ValueError):
        ss.OwnerRecord((0,), (0.2,), p)


def test_record_round_trip(rng):
    p = ss.SealParams(0.3, 0.25, 5)
    _, record = ss.seal([1, 0, 0, 1, 1], p, rng)
    assert ss.OwnerRecord.from_dict(record.to_dict()) == record


def test_check_after_seal_is_unread(rng):
    p = ss.SealParams(math.pi / 8, 0.25, 32)
    regs, record = ss.seal(rng.integers(0, 2, 32).tolist(), p, rng)
    assert ss.check(regs, record, rng).unread
    assert ss.check(regs, record, rng).unread


def test_read_twice_is_stable(rng):
    p = ss.SealParams(math.pi / 8, 0.25, 32)
    regs, _ = ss.seal(rng.integers(0, 2, 32).tolist(), p, rng)
    assert ss.read(regs, rng) == ss.read(regs, rng)


def test_max_error_rate_values():
    assert ss.max_error_rate(ss.SealParams(0.3, 0.25, 1)) == pytest.approx(math.sin(0.3) ** 2)
    want = mpmath.sin(mpmath.pi / 8 / mpmath.mpf(64) ** mpmath.mpf("0.25")) ** 2
    assert ss.max_error_rate(ss.SealParams(math.pi / 8, 0.25, 64)) == pytest.approx(float(want), rel=1e-12)
    assert float(want) == pytest.approx(0.019153, abs=1e-6)
    eps = [ss.max_error_rate(ss.SealParams(math.pi / 8, 0.25, N)) for N in (1, 2, 4, 64, 1024)]
    assert all(a > b for a, b in zip(eps, eps[1:]))


@pytest.mark.parametrize("N", [1, 16, 64, 256, 10**9, 10**20])
def test_mean_error_rate_matches_quadrature(N):
    p = ss.SealParams(math.pi / 8, 0.25, N)
    assert ss.mean_error_rate(p) == pytest.approx(mean_sin2(p.wobble), rel=1e-9)


def test_read_error_rate_statistics():
    p = ss.SealParams(math.pi / 8, 0.25, 64)
    gen = stream(3, 0)
    errors = bits = 0
    for _ in range(300):
        truth = gen.integers(0, 2, p.N).tolist()
        regs, _ = ss.seal(truth, p, gen)
        errors += sum(a != b for a, b in zip(ss.read(regs, gen), truth))
        bits += p.N
    rate = errors / bits
    assert rate <= ss.max_error_rate(p)
    assert within_sigma(rate, ss.mean_error_rate(p), bits)


def test_read_then_check_per_qubit_pass_rate():
    theta = 0.35
    p = ss.SealParams(0.35, 0.25, 1)
    gen = stream(4, 0)
    T = 20000
    passed = 0
    for _ in range(T):
        regs, record = ss.seal([0], p, gen, thetas=[theta])
        ss.read(regs, gen)
        passed += ss.check(regs, record, gen).unread
    oracle = math.cos(theta) ** 2 * math.cos(theta) ** 2 + math.sin(theta) ** 2 * math.sin(theta) ** 2
    assert within_sigma(passed / T, oracle, T)


def test_escape_bound_values():
    assert ss.escape_bound([0.0] * 5, 5) == 1.0
    assert ss.escape_bound([math.pi / 4] * 6, 6) == pytest.approx(2.0**-6)
    assert ss.escape_bound([0.2, 0.1], 0) == 1.0
    thetas = [0.1, -0.2, 0.05]
    assert ss.escape_bound(thetas, 3) == pytest.approx(np.prod(np.cos(thetas) ** 2))
    with pytest.raises(ValueError):
        ss.escape_bound(thetas, 4)


def test_escape_bound_dominates_measure_all_closed_form():
    gen = stream(5, 0)
    for _ in range(200):
        thetas = gen.uniform(-0.4, 0.4, size=int(gen.integers(1, 40)))
        closed = np.prod(np.cos(thetas) ** 4 + np.sin(thetas) ** 4)
        assert closed <= ss.escape_bound(thetas, len(thetas)) + 1e-15
