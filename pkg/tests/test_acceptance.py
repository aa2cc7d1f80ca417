"""Acceptance suite: one test per criterion, each printing a pass/fail line."""

import itertools
import time

import numpy as np
import pytest

from gridmix import (
    AnnealConfig,
    BinaryMask,
    DirichletSpec,
    Grid,
    KernelSpec,
    LevelMask,
    MarginalObjective,
    MixtureModelSpec,
    PermutationSet,
    PRConfig,
    acceptance_prob,
    anneal,
    default_gaussian_grid,
    default_poisson_grid,
    density_curve,
    exact_marginal,
    exhaustive_binary_argmax,
    galaxy_velocities,
    kn_diagnostic,
    log_marginal_averaged,
    penalty,
    polya_one_step,
    propose_binary,
    pr_update,
    pr_weights,
    run_experiment,
    run_fit,
    sequential_imputation_marginal,
    simulate,
)
from gridmix.harness import ExperimentSpec

from conftest import record_criterion

POIS = KernelSpec.poisson()
GLOC1 = KernelSpec.gaussian_location(1.0)
GLS = KernelSpec.gaussian_location_scale()

GALAXY_GRID = Grid(axis1=tuple(np.linspace(5.0, 40.0, 71)))
GALAXY_SCALE_GRID = Grid(
    axis1=tuple(np.linspace(5.0, 40.0, 71)),
    axis2=tuple(np.linspace(0.5, 1.5, 11)),
)
WEIRD_MIXTURE = MixtureModelSpec(
    GLS, ((-0.3, 0.05), (0.0, 10.0), (0.3, 0.05)), (0.25, 0.5, 0.25)
)

# Desk-scale study settings (iteration counts, permutations, temperature
# scale, gain exponent, and the penalty for the location-scale study are not
# pinned by the replication targets; these values are recorded with the
# results).
POISSON_STUDY = dict(iterations=5000, temp_a=10.0, rho=15 / 101)
GAUSSIAN_STUDY = dict(iterations=10000, temp_a=5.0, rho=0.2)
GAUSSIAN_STUDY_GAMMA = 0.8
STUDY_PERMS = 100


def _seed_pair(seed):
    ss = np.random.SeedSequence(seed)
    a, b = (int(s) for s in ss.generate_state(2))
    return a, b


def test_criterion_1_polya_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    gamma = 0.67
    w1 = 2.0 ** (-gamma)
    alpha0 = 1.0 / w1 - 1.0
    worst = 0.0
    for case in range(100):
        k = int(rng.integers(2, 5))
        f0 = rng.dirichlet(np.ones(k))
        kind = case % 3
        if kind == 0:
            spec, support, y = POIS, list(np.sort(rng.uniform(0.2, 15, k))), int(rng.integers(0, 20))
        elif kind == 1:
            spec, support, y = GLOC1, list(np.sort(rng.normal(0, 4, k))), float(rng.normal(0, 4))
        else:
            spec = GLS
            support = [(float(m), float(v)) for m, v in zip(rng.normal(0, 2, k), rng.uniform(0.1, 4, k))]
            y = float(rng.normal(0, 2))
        dspec = DirichletSpec(alpha0=alpha0, f0=tuple(f0))
        blended = polya_one_step(support, y, dspec, spec)
        recursive, _ = pr_update(f0, support, y, w1, spec)
        worst = max(worst, float(np.max(np.abs(blended - recursive))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    record_criterion(
        "C1 one-step posterior identity", ok, f"max gap {worst:.2e}, {elapsed:.2f}s"
    )
    assert worst <= 1e-12
    assert elapsed < 1.0


def test_criterion_2_oracle_agreement():
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    failures = []
    for case in range(20):
        k = int(rng.integers(2, 4))
        n = int(rng.integers(2, 9))
        support = list(np.sort(rng.uniform(0.5, 15.0, size=k)))
        f0 = rng.dirichlet(np.ones(k))
        dspec = DirichletSpec(alpha0=float(rng.uniform(0.3, 3.0)), f0=tuple(f0))
        data = rng.integers(0, 18, size=n)
        exact = exact_marginal(support, data, dspec, POIS)
        est, se = sequential_imputation_marginal(support, data, dspec, POIS, 10_000, seed=case)
        if abs(est - exact) > 3 * se:
            failures.append((case, est, exact, se))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 30.0
    record_criterion(
        "C2 sequential imputation vs exact", ok, f"{20 - len(failures)}/20 within 3 SE, {elapsed:.1f}s"
    )
    assert not failures, failures
    assert elapsed < 30.0


def test_criterion_3_exhaustive_argmax_recovery():
    start = time.perf_counter()
    grid = Grid(axis1=(1.0, 2.0, 3.0, 4.0, 5.0))
    model = MixtureModelSpec(POIS, (2.0,), (1.0,))
    data = simulate(model, 200, seed=301)
    pr_cfg = PRConfig(n_permutations=10, permutation_seed=302)
    perms = PermutationSet.generate(200, 10, seed=302)
    objective = MarginalObjective(POIS, grid, data, perms, pr_cfg, rho=0.2)
    oracle_mask, oracle_val = exhaustive_binary_argmax(objective.value, grid.size)
    hits = 0
    for run in range(100):
        cfg = AnnealConfig(iterations=300, rho=0.2, chain_seed=run)
        res = anneal(
            objective.value,
            BinaryMask.full(grid.size),
            cfg,
            lambda m, rng: propose_binary(m, 1, 1.0, rng),
        )
        hits += res.best_mask == oracle_mask
    elapsed = time.perf_counter() - start
    ok = hits >= 95 and elapsed < 120.0
    record_criterion(
        "C3 exhaustive argmax recovery",
        ok,
        f"{hits}/100 runs found the optimum (value {oracle_val:.3f}), {elapsed:.0f}s",
    )
    assert hits >= 95
    assert elapsed < 120.0


def test_criterion_4_galaxy_location_mixture():
    data = galaxy_velocities()
    sizes = []
    slowest = 0.0
    for seed in range(10):
        perm_seed, chain_seed = _seed_pair(seed)
        res = run_fit(
            data,
            GALAXY_GRID,
            GLOC1,
            PRConfig(n_permutations=100, permutation_seed=perm_seed),
            AnnealConfig(iterations=5000, temp_a=1.0, flip_k=1, prop_r=1.0, chain_seed=chain_seed),
        )
        sizes.append(res.size)
        slowest = max(slowest, res.seconds)
    in_range = sum(s in (5, 6, 7) for s in sizes)
    modal = max(set(sizes), key=sizes.count)
    ok = in_range >= 8 and modal == 6 and slowest <= 35.0
    record_criterion(
        "C4 galaxy location mixture",
        ok,
        f"sizes {sizes}, modal {modal}, max {slowest:.1f}s/fit",
    )
    assert in_range >= 8
    assert modal == 6
    assert slowest <= 35.0


def test_criterion_5_galaxy_location_scale_mixture():
    data = galaxy_velocities()
    sizes = []
    first_fit = None
    for seed in range(10):
        perm_seed, chain_seed = _seed_pair(100 + seed)
        res = run_fit(
            data,
            GALAXY_SCALE_GRID,
            GLS,
            PRConfig(n_permutations=100, permutation_seed=perm_seed),
            AnnealConfig(iterations=5000, temp_a=1.0, prop_r=1.0, chain_seed=chain_seed),
        )
        sizes.append(res.size)
        if first_fit is None:
            first_fit = res
    in_range = sum(s in (4, 5, 6) for s in sizes)
    modal = max(set(sizes), key=sizes.count)

    ys, dens = density_curve(GLS, first_fit.best_support, first_fit.best_weights, data)
    peak = ys[int(np.argmax(dens))]
    at = lambda v: float(dens[int(np.argmin(np.abs(ys - v)))])
    shape_ok = 19.0 <= peak <= 25.0 and at(10.0) > at(15.0) and at(33.0) > at(28.0)

    ok = in_range >= 8 and modal == 5 and shape_ok
    record_criterion(
        "C5 galaxy location-scale mixture",
        ok,
        f"sizes {sizes}, modal {modal}, density peak at {peak:.1f}",
    )
    assert in_range >= 8
    assert modal == 5
    assert shape_ok


@pytest.mark.slow
def test_criterion_6_poisson_complexity_study():
    start = time.perf_counter()
    grid = default_poisson_grid()
    settings = [
        ("model1", (1.0, 9.0), (0.5, 0.5), 100, 101, 0.90),
        ("model2", (1.0, 9.0), (0.8, 0.2), 500, 102, 0.90),
        ("model3", (1.0, 10.0), (0.95, 0.05), 500, 103, 0.80),
    ]
    details = []
    ok = True
    for name, params, weights, n, seed, floor in settings:
        exp = ExperimentSpec(
            model=MixtureModelSpec(POIS, params, weights),
            n=n,
            replications=50,
            grid=grid,
            pr=PRConfig(n_permutations=STUDY_PERMS),
            anneal=AnnealConfig(**POISSON_STUDY),
            master_seed=seed,
        )
        table = run_experiment(exp)
        p2 = table.proportion_at(2)
        details.append(f"{name} P(2)={p2:.3f} (floor {floor})")
        ok = ok and p2 >= floor and table.failures == 0
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 1800.0
    record_criterion(
        "C6 Poisson complexity replication", ok, "; ".join(details) + f"; {elapsed:.0f}s"
    )
    assert ok, details


@pytest.mark.slow
def test_criterion_7_gaussian_complexity_study():
    start = time.perf_counter()
    grid = default_gaussian_grid()
    results = {}
    for n, seed in ((250, 201), (50, 202)):
        exp = ExperimentSpec(
            model=WEIRD_MIXTURE,
            n=n,
            replications=30,
            grid=grid,
            pr=PRConfig(n_permutations=STUDY_PERMS, gamma=GAUSSIAN_STUDY_GAMMA),
            anneal=AnnealConfig(**GAUSSIAN_STUDY),
            master_seed=seed,
        )
        results[n] = run_experiment(exp)
    t250, t50 = results[250], results[50]
    modal = t250.modal_size()
    p3 = t250.proportion_at(3)
    p234 = sum(t50.proportion_at(k) for k in (2, 3, 4))
    elapsed = time.perf_counter() - start
    ok = modal in (2, 3, 4) and p3 >= 0.25 and p234 >= 0.80
    record_criterion(
        "C7 Gaussian complexity replication",
        ok,
        f"n=250 modal {modal}, P(3)={p3:.3f}; n=50 P(2-4)={p234:.3f}; {elapsed:.0f}s",
    )
    assert modal in (2, 3, 4)
    assert p3 >= 0.25
    assert p234 >= 0.80


class TestCriterion8Properties:
    def test_weight_normalization(self):
        rng = np.random.default_rng(801)
        support = [0.5, 2.0, 8.0, 15.0]
        f = np.full(4, 0.25)
        gains = pr_weights(10_000, gamma=0.67)
        ok = True
        for i in range(10_000):
            f, _ = pr_update(f, support, int(rng.integers(0, 30)), gains[i], POIS)
            ok = ok and np.all(f > 0) and abs(f.sum() - 1.0) <= 1e-10
        record_criterion("C8a weight normalization over 10^4 updates", ok)
        assert ok

    def test_permutation_order_invariance(self):
        rng = np.random.default_rng(802)
        data = rng.integers(0, 15, size=14).astype(float)
        cfg = PRConfig(n_permutations=8)
        perms = PermutationSet.generate(14, 8, seed=3)
        base = log_marginal_averaged([1.0, 7.0], data, perms, cfg, POIS)
        ok = all(
            log_marginal_averaged(
                [1.0, 7.0], data, PermutationSet(perms.orders[list(order)]), cfg, POIS
            )
            == base
            for order in ([7, 6, 5, 4, 3, 2, 1, 0], [3, 1, 4, 0, 7, 5, 2, 6])
        )
        record_criterion("C8b permutation order invariance (exact)", ok)
        assert ok

    def test_admissible_mask_counts(self):
        ok = True
        for s1, s2 in ((2, 2), (3, 3), (4, 2), (4, 3)):
            seen = {
                tuple(LevelMask(np.array(lv, dtype=np.int64), s2).active().tolist())
                for lv in itertools.product(range(s2 + 1), repeat=s1)
            }
            ok = ok and len(seen) == (s2 + 1) ** s1
        record_criterion("C8c level-mask state count", ok)
        assert ok

    def test_half_rho_argmax_equality(self):
        model = MixtureModelSpec(POIS, (2.0, 9.0), (0.5, 0.5))
        data = simulate(model, 60, seed=805)
        grid = Grid(axis1=tuple(np.linspace(1.0, 12.0, 8)))
        perms = PermutationSet.generate(60, 5, seed=1)
        cfg = PRConfig(n_permutations=5)
        plain = MarginalObjective(POIS, grid, data, perms, cfg)
        pen = MarginalObjective(POIS, grid, data, perms, cfg, rho=0.5)
        m1, _ = exhaustive_binary_argmax(plain.value, grid.size)
        m2, _ = exhaustive_binary_argmax(pen.value, grid.size)
        rng = np.random.default_rng(806)
        table = {}
        for code in range(1, 2**12):
            bits = np.array([(code >> s) & 1 for s in range(12)], dtype=np.uint8)
            table[BinaryMask(bits).key()] = float(rng.normal() * 4)
        t1, _ = exhaustive_binary_argmax(lambda m: table[m.key()], 12)
        t2, _ = exhaustive_binary_argmax(lambda m: table[m.key()] + penalty(m, 12, 0.5), 12)
        ok = m1 == m2 and t1 == t2
        record_criterion("C8d penalty at rho=1/2 preserves argmax", ok)
        assert ok

    def test_uphill_always_accepted(self):
        rng = np.random.default_rng(807)
        ok = all(
            acceptance_prob(max(a, b), min(a, b), tau) == 1.0
            for a, b, tau in zip(
                rng.normal(0, 50, 500), rng.normal(0, 50, 500), rng.uniform(1e-3, 10, 500)
            )
        )
        record_criterion("C8e uphill moves always accepted", ok)
        assert ok

    def test_bit_exact_reproducibility(self):
        model = MixtureModelSpec(POIS, (2.0,), (1.0,))
        data = simulate(model, 80, seed=808)
        grid = Grid(axis1=(1.0, 2.0, 3.0, 4.0, 5.0))
        fits = [
            run_fit(
                data,
                grid,
                POIS,
                PRConfig(n_permutations=6, permutation_seed=3),
                AnnealConfig(iterations=120, rho=0.2, chain_seed=9),
            )
            for _ in range(2)
        ]
        fit_ok = (
            fits[0].best_mask == fits[1].best_mask
            and fits[0].best_objective == fits[1].best_objective
            and fits[0].trace == fits[1].trace
            and np.array_equal(fits[0].best_weights, fits[1].best_weights)
        )
        exp = ExperimentSpec(
            model=model,
            n=50,
            replications=3,
            grid=grid,
            pr=PRConfig(n_permutations=5),
            anneal=AnnealConfig(iterations=60, rho=0.25),
            master_seed=810,
        )
        tables = [run_experiment(exp) for _ in range(2)]
        table_ok = tables[0].counts == tables[1].counts and tables[0].failures == tables[1].failures
        ok = fit_ok and table_ok
        record_criterion("C8f bit-exact replay of fits and tables", ok)
        assert ok


def test_criterion_9_kl_diagnostic():
    model = MixtureModelSpec(POIS, (1.0, 9.0), (0.5, 0.5))
    data = simulate(model, 5000, seed=901)
    cfg = PRConfig(n_permutations=10)
    perms = PermutationSet.generate(5000, 10, seed=902)
    val = kn_diagnostic([1.0, 9.0], data, perms, cfg, POIS, model.density)
    ok = abs(val) < 0.05
    record_criterion("C9 KL diagnostic at correctly specified support", ok, f"K_n = {val:+.4f}")
    assert abs(val) < 0.05
