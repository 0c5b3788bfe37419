import math
from itertools import combinations

import numpy as np
import pytest

from bnqubo._core import BACKENDS, get_backend
from bnqubo.anneal import (
    Gauge,
    SampleSet,
    Schedule,
    apply_gauge,
    auto_schedule,
    campaign_gauges,
    default_schedules,
    run_campaign,
    sa_reads,
    schedule_seed,
    solve_exhaustive,
    solve_sa,
    ungauge,
)
from bnqubo.qubo import Qubo, VarRegistry, assemble
from bnqubo.oracle import exact_learn
from tests.test_qubo import random_table


def bare_qubo(n, linear=None, quadratic=None, offset=0.0):
    """QUBO over ``n`` variables with a registry sized to match."""
    reg = VarRegistry.create(["a", "b"], 1)
    while reg.size < n:
        reg, _ = reg.with_ancilla(0, reg.size)
    return Qubo(reg, dict(linear or {}), dict(quadratic or {}), offset)


def random_qubo(seed, n=12):
    gen = np.random.default_rng(seed)
    lin = {v: float(gen.normal()) for v in range(n)}
    quad = {(u, v): float(gen.normal()) for u, v in combinations(range(n), 2) if gen.random() < 0.3}
    return bare_qubo(n, lin, quad, float(gen.normal()))


def brute_energies(q):
    n = q.size
    X = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.uint8)
    return np.array([q.energy(x) for x in X])


# -------------------------------------------------------------- schedules


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(0, 0.1, 1.0)
    with pytest.raises(ValueError):
        Schedule(10, 1.0, 0.5)
    s = Schedule(5, 0.1, 10.0)
    assert np.allclose(s.betas(), [0.1, 10 ** -0.5, 1.0, 10 ** 0.5, 10.0])
    assert Schedule(1, 0.1, 2.0).betas().tolist() == [2.0]


def test_auto_schedule_single_coefficient():
    s = auto_schedule(bare_qubo(6, {0: 1.0}), 100)
    assert s.beta_hot == pytest.approx(math.log(2))
    assert s.beta_cold == pytest.approx(math.log(100))


def test_auto_schedule_scale_covariance():
    q = random_qubo(1)
    q10 = bare_qubo(q.size, {k: 10 * v for k, v in q.linear.items()}, {k: 10 * v for k, v in q.quadratic.items()})
    a, b = auto_schedule(q), auto_schedule(q10)
    assert b.beta_hot == pytest.approx(a.beta_hot / 10)
    assert b.beta_cold == pytest.approx(a.beta_cold / 10)


def test_auto_schedule_on_assembled_qubo():
    s = auto_schedule(assemble(random_table(0, 8, 3, rows=300), 3))
    assert 0 < s.beta_hot < s.beta_cold < math.inf


def test_auto_schedule_empty():
    with pytest.raises(ValueError, match="nothing to optimize"):
        auto_schedule(bare_qubo(6))


def test_default_schedules_are_log_spaced():
    scheds = default_schedules(random_qubo(2), 5, 10, 1000)
    assert [s.sweeps for s in scheds] == [10, 32, 100, 316, 1000]


# ------------------------------------------------------------ exhaustive


def test_exhaustive_single_variable():
    ss = solve_exhaustive(bare_qubo(6, {0: 1.0}), 1)
    assert ss.samples[0].tolist() == [0] * 6


def test_exhaustive_pair():
    ss = solve_exhaustive(bare_qubo(6, {}, {(0, 1): -1.0}), 1)
    assert ss.samples[0][:2].tolist() == [1, 1] and ss.energies[0] == -1.0


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_exhaustive_spectrum_matches_brute_force(backend):
    q = random_qubo(3, 10)
    spectrum = np.sort(get_backend(backend).exhaustive_energies(*q.csr, q.offset))
    assert np.allclose(spectrum, np.sort(brute_energies(q)), atol=1e-9)


def test_exhaustive_on_bn_qubo_matches_oracle():
    table = random_table(4, 3, 2)
    ss = solve_exhaustive(assemble(table, 2), 1)
    assert ss.energies[0] == pytest.approx(exact_learn(table, 2)[1], abs=1e-9)


def test_exhaustive_limit():
    with pytest.raises(ValueError):
        solve_exhaustive(bare_qubo(27, {0: 1.0}))


# -------------------------------------------------------------------- SA


def test_sa_single_linear_term():
    q = bare_qubo(6, {2: 1.0})
    ss = solve_sa(q, Schedule(20, 0.1, 5.0), 100, seed=1)
    assert ss.num_reads == 100
    assert all(x[2] == 0 for x, *_ in ss.records())


def test_sa_separable_problem():
    gen = np.random.default_rng(5)
    lin = {v: float(gen.choice([-1, 1]) * gen.uniform(0.5, 2)) for v in range(10)}
    q = bare_qubo(10, lin)
    ss = solve_sa(q, auto_schedule(q, 200), 50, seed=2)
    assert len(ss) == 1
    assert ss.energies[0] == pytest.approx(sum(min(0.0, c) for c in lin.values()))


def test_sa_reaches_ground_state_on_small_bn():
    table = random_table(6, 4, 2)
    q = assemble(table, 2)
    _, opt = exact_learn(table, 2)
    ss = solve_sa(q, auto_schedule(q, 1000), 300, seed=3)
    assert ss.energies[0] == pytest.approx(opt, abs=1e-6)


def test_sampleset_energies_are_recomputed():
    q = random_qubo(7)
    ss = solve_sa(q, auto_schedule(q, 50), 40, seed=4)
    for x, e, *_ in ss.records():
        assert abs(e - q.energy(x)) < 1e-9
    assert list(ss.energies) == sorted(ss.energies)


def test_sampleset_merge_counts():
    q = random_qubo(8)
    a = solve_sa(q, auto_schedule(q, 20), 30, seed=5)
    b = solve_sa(q, auto_schedule(q, 20), 30, seed=6)
    assert SampleSet.merge(q, [a, b]).num_reads == 60


def test_sa_is_seeded_and_thread_independent():
    q = assemble(random_table(9, 5, 2), 2)
    sched = auto_schedule(q, 100)
    a = sa_reads(q, sched, 16, seed=11)
    b = sa_reads(q, sched, 16, seed=11, threads=4)
    c = sa_reads(q, sched, 16, seed=12)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_read_offset_slices_the_stream():
    q = random_qubo(10)
    sched = auto_schedule(q, 30)
    full = sa_reads(q, sched, 10, seed=3)
    tail = sa_reads(q, sched, 4, seed=3, read_offset=6)
    assert np.array_equal(full[6:], tail)


@pytest.mark.skipif("compiled" not in BACKENDS, reason="needs the compiled kernels")
def test_backends_agree_bit_for_bit():
    q = assemble(random_table(11, 5, 3), 3)
    sched = auto_schedule(q, 60)
    a = sa_reads(q, sched, 8, seed=21, backend="compiled")
    b = sa_reads(q, sched, 8, seed=21, backend="python")
    assert np.array_equal(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("fortran")


# ----------------------------------------------------------------- gauges


def test_identity_gauge_is_noop():
    q = random_qubo(12)
    g = apply_gauge(q, Gauge.identity(q.size))
    assert g.linear == q.linear and g.quadratic == q.quadratic and g.offset == q.offset


def test_all_flip_gauge_is_an_involution():
    q = random_qubo(13)
    flip = Gauge(-np.ones(q.size, dtype=np.int8))
    back = apply_gauge(apply_gauge(q, flip), flip)
    for v in range(q.size):
        assert back.linear.get(v, 0.0) == pytest.approx(q.linear.get(v, 0.0), abs=1e-12)
    for k, c in q.quadratic.items():
        assert back.quadratic[k] == pytest.approx(c, abs=1e-12)
    assert back.offset == pytest.approx(q.offset, abs=1e-12)


def test_gauge_preserves_spectrum():
    q = random_qubo(14)
    base = np.sort(brute_energies(q))
    gen = np.random.default_rng(0)
    for _ in range(5):
        gauged = apply_gauge(q, Gauge.random(q.size, gen))
        assert np.allclose(np.sort(brute_energies(gauged)), base, atol=1e-9)


def test_ungauge_maps_energies():
    q = random_qubo(15)
    g = Gauge.random(q.size, np.random.default_rng(1))
    gq = apply_gauge(q, g)
    X = sa_reads(gq, auto_schedule(gq, 30), 10, seed=7)
    for x in X:
        assert abs(gq.energy(x) - q.energy(ungauge(x, g))) < 1e-9


def test_gauge_length_checked():
    q = random_qubo(16)
    with pytest.raises(ValueError):
        apply_gauge(q, Gauge.identity(q.size + 1))


# --------------------------------------------------------------- campaigns


def test_campaign_one_schedule_one_gauge_equals_solve_sa():
    q = assemble(random_table(17, 4, 2), 2)
    sched = auto_schedule(q, 80)
    camp = run_campaign(q, [sched], 20, 1, seed=5)[0]
    direct = solve_sa(q, sched, 20, schedule_seed(5, 0))
    assert np.array_equal(camp.samples, direct.samples)
    assert np.array_equal(camp.occurrences, direct.occurrences)


def test_campaign_is_reproducible():
    q = assemble(random_table(18, 4, 2), 2)
    scheds = default_schedules(q, 2, 20, 40)
    a = run_campaign(q, scheds, 12, 3, seed=9)
    b = run_campaign(q, scheds, 12, 3, seed=9)
    for x, y in zip(a, b):
        assert np.array_equal(x.samples, y.samples) and np.array_equal(x.tags, y.tags)
    assert sorted(set(a[0].tags.tolist())) == [0, 1, 2]
    assert all(s.num_reads == 12 for s in a)


def test_campaign_gauges():
    gs = campaign_gauges(10, 3, seed=1, schedule_id=0)
    assert gs[0].is_identity() and not gs[1].is_identity()
    assert not np.array_equal(gs[1].flips, campaign_gauges(10, 3, seed=1, schedule_id=1)[1].flips)


def test_campaign_preconditions():
    q = random_qubo(19)
    with pytest.raises(ValueError):
        run_campaign(q, [], 10, 1, seed=0)
    with pytest.raises(ValueError):
        run_campaign(q, [auto_schedule(q)], 2, 3, seed=0)
