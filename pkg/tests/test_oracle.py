import itertools

import pytest

from qseal import adversaries as adv
from qseal import gf2_code as gf2
from qseal import oracle
from qseal import qbc_session as qs
from qseal import seal_string as ss
from qseal.errors import BranchBudgetExceeded
from qseal.rng import stream
from qseal.stats import within_sigma

SMALL_SPOT = qs.SpotThresholds(min_sample=4)


def small_params(n: int, s: int = 12, m: int = 4, G=None) -> qs.ProtocolParams:
    # n = 3 at s = 12 only fits with the subset ratio relaxed to 2
    return qs.ProtocolParams.standard(s=s, m=m, n=n, G=G, thresholds=SMALL_SPOT, n_ratio=2.0)


def fixture(params, seed, t_max=4, target_b=1):
    gen = stream(seed, 0)
    s, m, n = params.s, params.m, params.n
    bits = (0, 1, 0, 1) + tuple(int(x) for x in gen.integers(0, 2, s - 4))
    thetas = ss.draw_thetas(params.seal, gen)
    masks = [r for r in itertools.product((0, 1), repeat=n) if any(r) and gf2.separating(params.G, r)]
    r = masks[int(gen.integers(len(masks)))]
    c_prime = tuple(int(x) for x in gen.integers(0, 2, n))
    subsets = tuple(adv.plan_subsets(list(range(m, s)), n, t_max, gen))
    return adv.CollectiveFixture(bits, thetas, tuple(range(m)), r, c_prime, subsets, target_b)


def test_honest_advanced_exact_is_one_with_crisp_seals():
    params = qs.ProtocolParams.standard()
    n = params.n
    r = (1, 1, 0, 0, 0, 0, 0, 0)
    c = gf2.choose_codeword(params.G, r, 1, stream(1, 0)).bits
    bits = [j % 2 for j in range(params.s)]
    got = oracle.exact_oracle(
        "honest-advanced", params, bits=bits, thetas=[0.0] * params.s, sample=list(range(16)),
        indices=list(range(16, 16 + n)), r=r, c=c, b=1,
    )
    assert got["accept"] == 1.0 and got["spot_pass"] == 1.0


def test_deferred_choice_target_unveiled_is_half():
    got = oracle.exact_oracle("deferred-choice", None, thetas=[0.1, -0.2, 0.05], target_b=0)
    assert got["target_unveiled"] == pytest.approx(0.5, abs=1e-15)


def test_measure_all_budget():
    with pytest.raises(BranchBudgetExceeded):
        oracle.measure_all([0.1] * 25)


def test_unknown_strategy():
    with pytest.raises(ValueError):
        oracle.exact_oracle("nope", None)


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("n", [1, 2, 3])
def test_collective_routes_agree(n, seed):
    params = small_params(n)
    fx = fixture(params, 100 * n + seed, t_max=1 + seed % 6)
    a = oracle.exact_oracle("collective-search", params, fixture=fx)
    b = oracle.collective_search_closed_form(params, fx)
    assert a["escape"] == pytest.approx(b["escape"], abs=1e-6)
    assert a["spot_pass"] == pytest.approx(b["spot_pass"], abs=1e-12)


def test_collective_routes_agree_on_small_code():
    G = gf2.GeneratorMatrix.from_text(["101", "011"])
    params = small_params(3, G=G)
    for seed in range(10):
        fx = fixture(params, 7000 + seed, t_max=6, target_b=seed % 2)
        a = oracle.collective_search(params, fx)["escape"]
        b = oracle.collective_search_closed_form(params, fx)["escape"]
        assert a == pytest.approx(b, abs=1e-6)


def test_single_attempt_escape_is_announcement_validity():
    # one attempt: the same subset is announced on both projector outcomes and
    # every other returned register is untouched, so escape is 0 or 1 exactly
    params = small_params(2)
    seen = set()
    for seed in range(20):
        fx = fixture(params, 300 + seed, t_max=1)
        want = float(oracle._announce_valid(fx, fx.subsets[0], params.G))
        seen.add(want)
        assert oracle.collective_search(params, fx)["escape"] == pytest.approx(want, abs=1e-12)
        assert oracle.collective_search_closed_form(params, fx)["escape"] == pytest.approx(want, abs=1e-12)
    assert seen == {0.0, 1.0}


@pytest.mark.slow
def test_collective_monte_carlo_within_three_sigma():
    params = small_params(2)
    for seed in (3, 8):
        fx = fixture(params, seed, t_max=4)
        exact = oracle.collective_search(params, fx)["escape"]
        T = 20_000
        outs = [adv.collective_search_advanced(fx.target_b, params, 4, stream(seed, 1, j), fx) for j in range(T)]
        rep = adv.AttackReport.from_outcomes("collective-search", outs)
        assert within_sigma(rep.escape_rate, exact, rep.trials)
