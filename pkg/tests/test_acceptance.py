"""Acceptance criteria.  Each test is one criterion; the terminal summary
prints a PASS/FAIL line per criterion with the measured numbers."""

import statistics
import time

import numpy as np
import pytest

from conftest import brute_force_ising, random_symmetric
from cybercim import (
    AlternatingConfig,
    ClosedLoopConfig,
    OpenLoopConfig,
    ProblemInstance,
    PumpScheduleClosed,
    PumpScheduleOpen,
    Recording,
    SorConfig,
    ThresholdSchedule,
    TilingConfig,
    ber,
    estimate_cycles_overlapped,
    estimate_cycles_sequential,
    gauge_transform,
    gen_cdma,
    gen_cs_random,
    lasso_init,
    pack,
    pump_closed,
    pump_open,
    rmse,
    run_alternating,
    run_closed_loop,
    run_jacobi_sor,
    run_open_loop,
    threshold,
)

HW = TilingConfig(1, 64, 32)
SB = TilingConfig(8, 32, 32)
# cycles per step reported for the FPGA build
MEASURED = {
    ("cim", 1024): 1030, ("cim", 2048): 3075, ("cim", 4096): 10245,
    ("sor", 1024): 580, ("sor", 2048): 2180, ("sor", 4096): 8453,
}


@pytest.mark.criterion("Cycle model exactness")
def test_cycle_model_exactness(acceptance):
    seq = [estimate_cycles_sequential(n, HW, 32) for n in (1024, 2048, 4096)]
    sor = [estimate_cycles_sequential(n, HW, 4) for n in (1024, 2048, 4096)]
    sb = [estimate_cycles_overlapped(n, SB) for n in (2048, 4096)]
    acceptance["detail"] = f"open/closed loop {seq}, sor {sor}, sb {sb}"
    assert seq == [1024, 3072, 10240]
    assert sor == [576, 2176, 8448]
    assert sb == [576, 2176]


@pytest.mark.criterion("Measured-vs-estimate gap")
def test_measured_vs_estimate_gap(acceptance):
    gaps = {}
    for (kind, n), measured in MEASURED.items():
        est = estimate_cycles_sequential(n, HW, 32 if kind == "cim" else 4)
        gaps[(kind, n)] = measured - est
    acceptance["detail"] = "overhead " + ", ".join(f"{k[0]}@{k[1]}:+{v}" for k, v in gaps.items())
    assert all(0 <= g <= 10 for g in gaps.values())


@pytest.mark.criterion("Determinism across runs and worker counts")
def test_determinism(acceptance):
    inst = gen_cdma(256, 0.6, 0.05, 11).problem
    rec = Recording(256, 1)
    for runner, cfg in ((run_open_loop, OpenLoopConfig(seed=3)), (run_closed_loop, ClosedLoopConfig(seed=3))):
        ref = runner(inst, cfg, record=rec, workers=1)
        for workers in (1, 2, 8):
            other = runner(inst, cfg, record=rec, workers=workers)
            assert np.array_equal(other.trajectory["c"].view(np.uint32), ref.trajectory["c"].view(np.uint32))
            assert np.array_equal(other.trajectory["s"].view(np.uint32), ref.trajectory["s"].view(np.uint32))
            assert other.trace.energies == ref.trace.energies
    acceptance["detail"] = "open and closed loop, n=256, workers 1/2/8 bit-identical"


@pytest.mark.criterion("Gauge equivariance")
def test_gauge_equivariance(acceptance):
    n = 64
    r = np.random.default_rng(64)
    inst = ProblemInstance(pack(random_symmetric(n, 64) / np.sqrt(n)), r.normal(size=n) * 0.1)
    s = r.choice([-1, 1], size=n)
    cfg = OpenLoopConfig(gs2=0.0, chi="identity", n_step=100)
    a = run_open_loop(inst, cfg, record=Recording(n))
    b = run_open_loop(gauge_transform(inst, s), cfg, record=Recording(n))
    expected = a.trajectory["c"] * s.astype(np.float32)
    assert a.trajectory["c"].dtype == np.float32
    assert np.array_equal(b.trajectory["c"], expected)
    acceptance["detail"] = "100 steps, FP32, bitwise"


@pytest.mark.criterion("SOR oracle equivalence")
def test_sor_oracle_equivalence(acceptance):
    worst, t0 = 0.0, time.perf_counter()
    for seed in range(20):
        cs = gen_cs_random(64, 0.8, 0.2, 0.0, seed)
        q = (cs.truth_x != 0).astype(np.int8)
        res = run_jacobi_sor(cs.problem, q, SorConfig(dt=0.3, n_step=1001))
        J = cs.problem.coupling.unpack().astype(np.float64)
        on = np.flatnonzero(q)
        direct = np.zeros(64)
        direct[on] = np.linalg.solve(-J[np.ix_(on, on)], cs.problem.zeeman.astype(np.float64)[on])
        worst = max(worst, float(np.abs(res.signal - direct).max()))
    elapsed = time.perf_counter() - t0
    acceptance["detail"] = f"worst inf-norm {worst:.2e}, 20 instances in {elapsed:.2f} s"
    assert worst < 1e-4


@pytest.mark.criterion("Brute-force ground-state check")
def test_brute_force_ground_state(acceptance):
    hits, below = 0, 0
    for seed in range(20):
        c = gen_cdma(12, 1.25, 0.0, seed)
        e0, _ = brute_force_ising(c.problem.coupling.unpack(), c.problem.zeeman)
        res = run_closed_loop(c.problem, ClosedLoopConfig(seed=seed), energy_every=0)
        hits += abs(res.energy - e0) < 1e-6
        below += res.energy < e0 - 1e-6
    acceptance["detail"] = f"{hits}/20 seeds at the exhaustive minimum, {below} below"
    assert below == 0
    assert hits / 20 >= 0.7


@pytest.mark.criterion("Closed- vs open-loop ordering")
def test_closed_vs_open_ordering(acceptance):
    open_ber, closed_ber = [], []
    for seed in range(20):
        c = gen_cdma(256, 0.6, 0.05, seed)
        open_ber.append(ber(run_open_loop(c.problem, OpenLoopConfig(seed=seed), energy_every=0).spins, c.truth))
        closed_ber.append(ber(run_closed_loop(c.problem, ClosedLoopConfig(seed=seed), energy_every=0).spins, c.truth))
    mo, mc = statistics.median(open_ber), statistics.median(closed_ber)
    acceptance["detail"] = f"median BER closed {mc:.4f} vs open {mo:.4f}"
    assert mc <= mo


@pytest.mark.criterion("L0RBCS recovery")
def test_l0rbcs_recovery(acceptance):
    final, base = [], []
    for seed in range(8):
        cs = gen_cs_random(256, 0.8, 0.1, 0.05, seed)
        r0 = lasso_init(cs.observation, cs.observed, 0.05, 500)
        cfg = AlternatingConfig(
            inner=OpenLoopConfig(dt=0.1, p_max=1.5, chi="absolute", k_gain=0.25, n_step=51, seed=seed),
            sor=SorConfig(dt=0.3, n_step=1001),
            threshold=ThresholdSchedule(0.8, 0.18, 51),
            r_init=r0,
        )
        res = run_alternating(cs.problem, cfg, truth=cs.truth_x)
        final.append(rmse(res.signal, cs.truth_x))
        base.append(rmse(r0, cs.truth_x))
    mf, mb = statistics.median(final), statistics.median(base)
    acceptance["detail"] = f"median RMSE {mf:.4f} vs LASSO {mb:.4f}"
    assert mf < 0.1
    assert mf < mb


@pytest.mark.criterion("eta/lambda bridge")
def test_eta_lambda_bridge(acceptance):
    cs = gen_cs_random(32, 0.8, 0.2, 0.05, 1)
    sched = ThresholdSchedule(0.8, 0.18, 7)
    checked = 0
    for inner in (OpenLoopConfig(n_step=20), ClosedLoopConfig(n_step=50)):
        res = run_alternating(cs.problem, AlternatingConfig(inner=inner, sor=SorConfig(n_step=50), threshold=sched))
        for e in res.outer:
            assert e["eta"] ** 2 == 2 * e["lam"]
            checked += 1
    acceptance["detail"] = f"{checked} outer iterations, exact"


@pytest.mark.criterion("Schedule endpoints")
def test_schedule_endpoints(acceptance):
    op = PumpScheduleOpen(p_max=2.0, n_step=101, dt=0.1)
    p_end = pump_open(101 * 0.1, op)
    p_mid = pump_closed(4.0, PumpScheduleClosed(1.0, 0.6))
    h1 = threshold(1, ThresholdSchedule(0.8, 0.18, 51))
    acceptance["detail"] = f"pump_open(N dt)={p_end}, pump_closed(4)={p_mid}, threshold(1)={h1}"
    assert np.float32(p_end) == np.float32(2.0)
    assert np.float32(p_mid) == np.float32(1.0)
    assert np.float32(h1) == np.float32(0.18)
