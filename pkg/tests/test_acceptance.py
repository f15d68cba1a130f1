"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Criteria 1-5 and 7 finish in seconds to a couple of minutes. Criterion 6
(shared with 8) runs fifteen desk-scale GA runs - three targets, five seeds -
and dominates the suite's runtime. Set FLF_ACCEPT_FULL=1 to also run the
full-scale initial-distribution check (hours).

Run with -s to stream the per-criterion lines.
"""

import os
import time

import numpy as np
import pytest

from flowlenia import complexity as cx
from flowlenia import evolution as ev
from flowlenia import sim
from tests.test_sim import advect_oracle, conv_direct, flow_oracle, random_rule, single_ring_spec


def check(num, name, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num} ({name}): {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def sample_rules(seed, count, channels=3):
    space = ev.SearchSpace.default()
    rng = np.random.default_rng(seed)
    wiring = ev.sample_wiring(rng, 12, channels)
    return [ev.decode_genome(ev.sample_genome(space, rng), wiring) for _ in range(count)]


# ------------------------------------------------------------------ criterion 1


def test_c1_mass_conservation():
    t0 = time.time()
    worst_step = 0.0
    worst_total = 0.0
    for i, rule in enumerate(sample_rules(seed=1001, count=20)):
        state = sim.init_state(i, 128, 128, 3, 64)
        m0 = sim.total_mass(state)
        comp = sim.CompiledRule(rule, (128, 128))
        a = np.ascontiguousarray(np.moveaxis(state, 2, 0))
        prev = m0
        for _ in range(1000):
            a = sim._step_chw(a, comp)
            m = float(a.sum())
            worst_step = max(worst_step, abs(m - prev) / m0)
            prev = m
        worst_total = max(worst_total, abs(prev - m0) / m0)
    ok = worst_step <= 1e-6 and worst_total <= 1e-5
    check(
        1,
        "mass conservation",
        ok,
        f"20 genomes, 128x128, 1000 steps: per-step drift {worst_step:.2e} (<=1e-6), "
        f"end-to-end {worst_total:.2e} (<=1e-5), {time.time() - t0:.0f}s",
    )


# ------------------------------------------------------------------ criterion 2


def test_c2_oracle_equivalence():
    rng = np.random.default_rng(1002)

    conv_worst = 0.0
    for _ in range(10):
        n = int(rng.integers(16, 33))
        field = rng.random((n, n))
        spec = single_ring_spec(
            r=rng.uniform(0.4, 1.0), a=rng.uniform(0, 1), w=rng.uniform(0.05, 0.5)
        )
        kf = sim.build_kernel(rng.uniform(2, 6), spec, (n, n))
        conv_worst = max(
            conv_worst, float(np.abs(sim.convolve(field, kf) - conv_direct(field, kf.values)).max())
        )

    flow_worst = 0.0
    for _ in range(5):
        rule = random_rule(rng, n_kernels=2, R=3.0)
        u = rng.random((8, 8, 3)) * 2 - 1
        state = rng.random((8, 8, 3)) * 3
        d = sim.flow_field(u, state, rule)
        flow_worst = max(flow_worst, float(np.abs(d - flow_oracle(u, state, rule)).max()))

    adv_worst = 0.0
    for _ in range(5):
        state = rng.random((8, 8, 3))
        disp = rng.uniform(-1, 1, (8, 8, 3, 2))
        out = sim.advect(state, disp, ell=0.5)
        adv_worst = max(adv_worst, float(np.abs(out - advect_oracle(state, disp, 0.5)).max()))

    ok = conv_worst <= 1e-6 and flow_worst <= 1e-6 and adv_worst <= 1e-9
    check(
        2,
        "oracle equivalence",
        ok,
        f"convolution {conv_worst:.2e} (<=1e-6), flow {flow_worst:.2e} (<=1e-6), "
        f"advection {adv_worst:.2e} (<=1e-9)",
    )


# ------------------------------------------------------------------ criterion 3


def test_c3_metric_sanity():
    rng = np.random.default_rng(1003)
    constant = cx.compression_complexity(np.full((256, 256, 3), 128, dtype=np.uint8))
    noise_img = rng.integers(0, 256, (256, 256, 3), dtype=np.uint8)
    noise = cx.compression_complexity(noise_img)
    pyramid = [cx.compression_complexity(cx.downsample(noise_img, s)) for s in range(3)]

    yy, xx = np.mgrid[0:256, 0:256]
    d = np.sqrt((yy - 128.0) ** 2 + (xx - 128.0) ** 2)
    rings = np.repeat(
        np.floor(127.5 + 127.5 * np.sin(2 * np.pi * d / 24.0) + 0.5).astype(np.uint8)[:, :, None],
        3,
        axis=2,
    )
    ring_cart = cx.compression_complexity(rings)
    ring_polar = cx.compression_complexity(cx.polar_resample(rings, (128.0, 128.0)))

    ok = (
        constant < 0.02
        and noise >= 0.9
        and pyramid[0] > pyramid[1] > pyramid[2]
        and ring_polar < ring_cart
    )
    check(
        3,
        "metric sanity",
        ok,
        f"constant {constant:.4f} (<0.02), noise {noise:.3f} (>=0.9), "
        f"noise pyramid {pyramid[0]:.3f}>{pyramid[1]:.3f}>{pyramid[2]:.3f}, "
        f"rings cartesian {ring_cart:.3f} -> polar {ring_polar:.3f}",
    )


# ------------------------------------------------------------------ criterion 4


def test_c4_fitness_unit_suite():
    exact_zero = cx.fitness([0.37, 0.37, 0.37], 0.37) == 0.0
    example = abs(cx.fitness([0.2, 0.4], 0.3) - 0.1) < 1e-12
    single = cx.fitness([0.55], 0.4) == pytest.approx(abs(0.55 - 0.4))

    rng = np.random.default_rng(1004)
    lipschitz = True
    for _ in range(1000):
        profile = rng.uniform(0, 1.2, int(rng.integers(1, 9)))
        t1, t2 = rng.uniform(0, 1, 2)
        if abs(cx.fitness(profile, t1) - cx.fitness(profile, t2)) > abs(t1 - t2) + 1e-12:
            lipschitz = False
            break

    ok = exact_zero and example and single and lipschitz
    check(
        4,
        "fitness unit suite",
        ok,
        f"zero-on-target {exact_zero}, example-0.1 {example}, S=0 reduction {single}, "
        f"1-Lipschitz over 1000 random profiles {lipschitz}",
    )


# ------------------------------------------------------------------ criterion 5


def test_c5_initial_distribution_smoke():
    t0 = time.time()
    cfg = ev.EvolutionConfig(
        T=0.4, S=4, rollout_steps=500, world=ev.WorldParams(128, 128, 3, 64), seed=1005
    )
    space = ev.SearchSpace.default()
    rng = np.random.default_rng(cfg.seed)
    wiring = ev.sample_wiring(rng, 12, 3)
    c0s = []
    for slot in range(50):
        genes = ev.sample_genome(space, rng)
        _, profile = ev.evaluate(genes, cfg, wiring, 0, slot)
        c0s.append(profile[0])
    median = float(np.median(c0s))
    elapsed = time.time() - t0
    ok = 0.2 <= median <= 0.6 and elapsed < 600
    check(
        5,
        "initial distribution (smoke)",
        ok,
        f"50 random genomes, 128x128, 500 steps: median C(x,0) {median:.3f} in [0.2, 0.6], "
        f"{elapsed:.0f}s (<600s)",
    )


@pytest.mark.skipif(
    not os.environ.get("FLF_ACCEPT_FULL"),
    reason="full-scale variant takes hours; set FLF_ACCEPT_FULL=1",
)
def test_c5_initial_distribution_full_scale():
    cfg = ev.EvolutionConfig(
        T=0.4, S=4, rollout_steps=2000, world=ev.WorldParams(256, 256, 3, 64), seed=1005
    )
    space = ev.SearchSpace.default()
    rng = np.random.default_rng(cfg.seed)
    wiring = ev.sample_wiring(rng, 12, 3)
    c0s = []
    for slot in range(50):
        genes = ev.sample_genome(space, rng)
        _, profile = ev.evaluate(genes, cfg, wiring, 0, slot)
        c0s.append(profile[0])
    median = float(np.median(c0s))
    ok = 0.30 <= median <= 0.50
    check(
        5,
        "initial distribution (full scale)",
        ok,
        f"50 random genomes, 256x256, 2000 steps: median C(x,0) {median:.3f} in [0.30, 0.50]",
    )


# ------------------------------------------------------ criteria 6 and 8 (shared runs)


TARGETS = (0.0, 1.0, 0.4)
SEEDS = (1, 2, 3, 4, 5)


@pytest.fixture(scope="module")
def directional_runs():
    runs = {}
    for T in TARGETS:
        for seed in SEEDS:
            t0 = time.time()
            cfg = ev.EvolutionConfig(
                T=T,
                S=4,
                population_size=16,
                generations=20,
                rollout_steps=500,
                world=ev.WorldParams(128, 128, 3, 64),
                seed=seed,
            )
            res = ev.evolve(cfg)
            runs[(T, seed)] = res
            init = float(np.mean(res.c0_initial))
            final = float(np.mean(res.c0_final))
            print(
                f"\n  [run] T={T} seed={seed}: mean c0 {init:.3f} -> {final:.3f} "
                f"({time.time() - t0:.0f}s)",
                flush=True,
            )
    return runs


def test_c6_directional_evolution(directional_runs):
    outcomes = {}
    for T in TARGETS:
        hits = 0
        details = []
        for seed in SEEDS:
            res = directional_runs[(T, seed)]
            init = np.array(res.c0_initial)
            final = np.array(res.c0_final)
            if T == 0.0:
                hit = final.mean() < init.mean()
                details.append(f"s{seed}:{init.mean():.3f}->{final.mean():.3f}")
            elif T == 1.0:
                hit = final.mean() > init.mean()
                details.append(f"s{seed}:{init.mean():.3f}->{final.mean():.3f}")
            else:
                hit = np.abs(final - 0.4).mean() < np.abs(init - 0.4).mean()
                details.append(
                    f"s{seed}:|d|{np.abs(init - 0.4).mean():.3f}->{np.abs(final - 0.4).mean():.3f}"
                )
            hits += int(hit)
        outcomes[T] = (hits, details)
    ok = all(hits >= 4 for hits, _ in outcomes.values())
    detail = "; ".join(
        f"T={T}: {hits}/5 ({', '.join(d)})" for T, (hits, d) in outcomes.items()
    )
    check(6, "directional evolution", ok, detail)


def test_c8_elitist_best_never_worsens(directional_runs):
    worst = 0.0
    ok = True
    for (T, seed), res in directional_runs.items():
        best = [s.best_fit for s in res.history]
        for b1, b2 in zip(best, best[1:]):
            worst = max(worst, b2 - b1)
            if b2 > b1:
                ok = False
    check(
        8,
        "elitist best-so-far non-increasing",
        ok,
        f"15 runs x 21 generations, max increase {worst:.2e}",
    )


# ------------------------------------------------------------------ criterion 7


def test_c7_determinism_and_operator_statistics(tmp_path):
    cfg = ev.EvolutionConfig(
        T=0.4,
        S=2,
        population_size=6,
        generations=3,
        rollout_steps=20,
        world=ev.WorldParams(32, 32, 3, 16),
        bounds={"R": (2.0, 6.0)},
        seed=77,
    )
    paths = []
    for name in ("a", "b"):
        res = ev.evolve(cfg)
        path = tmp_path / f"stats_{name}.csv"
        ev.write_stats_csv(path, res.history)
        paths.append(path)
    identical = paths[0].read_bytes() == paths[1].read_bytes()

    space = ev.SearchSpace.default()
    rng = np.random.default_rng(1007)
    a = np.zeros(157)
    b = np.ones(157)
    from_a = 0
    trials = 10_000
    for _ in range(trials):
        from_a += int((1.0 - ev.uniform_crossover(a, b, 0.5, rng)).sum())
    freq = from_a / (trials * 157)

    g = ev.sample_genome(space, np.random.default_rng(1008))
    rng = np.random.default_rng(1009)
    changed = sum(int((ev.point_mutate(g, 0.05, space, rng) != g).sum()) for _ in range(trials))
    mean_mutations = changed / trials

    ok = identical and abs(freq - 0.5) <= 0.02 and abs(mean_mutations - 7.85) <= 0.3
    check(
        7,
        "determinism and operator statistics",
        ok,
        f"stats.csv byte-identical {identical}, crossover source freq {freq:.4f} (0.5 +- 0.02), "
        f"mutations/genome {mean_mutations:.3f} (7.85 +- 0.3) over 10^4 trials",
    )
