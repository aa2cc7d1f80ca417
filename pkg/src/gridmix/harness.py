"""Data simulation, file I/O, and replication experiments around the fitting pipeline."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .kernels import (
    GAUSS_LOC,
    GAUSS_LOCSCALE,
    POISSON,
    Grid,
    KernelSpec,
    mixture_log_density,
    validate_observations,
    _params_array,
)
from .recursion import PRConfig, PermutationSet
from .search import (
    AnnealConfig,
    BinaryMask,
    FitResult,
    LevelMask,
    MarginalObjective,
    anneal,
    propose_binary,
    propose_locscale,
)

__all__ = [
    "MixtureModelSpec",
    "ExperimentSpec",
    "ComplexityTable",
    "simulate",
    "load_observations",
    "galaxy_velocities",
    "run_fit",
    "run_experiment",
    "density_curve",
    "write_density_csv",
    "default_poisson_grid",
    "default_gaussian_grid",
]

DENSITY_POINTS = 512


def default_poisson_grid() -> Grid:
    """101 equispaced candidate rates on [0, 20]."""
    return Grid.equispaced(0.0, 20.0, 101)


def default_gaussian_grid() -> Grid:
    """40 locations on [-2, 2] crossed with 25 scales on [0.1, 4.0]."""
    return Grid(
        axis1=tuple(np.linspace(-2.0, 2.0, 40)),
        axis2=tuple(np.linspace(0.1, 4.0, 25)),
    )


@dataclass(frozen=True)
class MixtureModelSpec:
    """A fully specified finite mixture used to generate data.

    ``params`` are component parameters in kernel convention, so
    location-scale components are ``(mean, variance)`` pairs.
    """

    spec: KernelSpec
    params: tuple
    weights: tuple[float, ...]

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if len(weights) == 0 or len(weights) != len(self.params):
            raise ValueError("params and weights must be nonempty and of equal length")
        if any(w <= 0 for w in weights):
            raise ValueError("component weights must be strictly positive")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("component weights must sum to 1")
        params = _params_array(self.spec, np.asarray(self.params, dtype=float))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "params", tuple(map(tuple, params)) if params.ndim == 2 else tuple(params))

    @classmethod
    def from_config(cls, config: dict) -> "MixtureModelSpec":
        spec = _kernel_from_config(config)
        comps = config.get("components")
        if not comps:
            raise ValueError("model config needs a nonempty 'components' list")
        params = [c["value"] for c in comps]
        weights = [c["weight"] for c in comps]
        return cls(spec, tuple(tuple(p) if isinstance(p, (list, tuple)) else float(p) for p in params), tuple(weights))

    def density(self, y):
        """Mixture density at ``y`` (scalar or vector)."""
        arr = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.exp(mixture_log_density(self.spec, self.params, self.weights, arr))
        return out if np.ndim(y) else float(out[0])


def simulate(model: MixtureModelSpec, n: int, seed: int, return_components: bool = False):
    """Draw ``n`` observations: pick a component by weight, then sample its kernel."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    k = len(model.weights)
    comp = rng.choice(k, size=n, p=np.asarray(model.weights))
    params = np.asarray(model.params, dtype=float)
    if model.spec.family == POISSON:
        obs = rng.poisson(params[comp]).astype(float)
    elif model.spec.family == GAUSS_LOC:
        obs = rng.normal(params[comp], model.spec.sigma)
    else:
        obs = rng.normal(params[comp, 0], np.sqrt(params[comp, 1]))
    if return_components:
        return obs, comp
    return obs


def load_observations(path) -> np.ndarray:
    """Read one numeric value per line (single-column CSV, optional header)."""
    text = Path(path).read_text()
    values = []
    header_allowed = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f for f in line.split(",") if f.strip()]
        if len(fields) != 1:
            raise ValueError(f"line {lineno}: expected a single column, got {raw!r}")
        try:
            values.append(float(fields[0]))
        except ValueError:
            if header_allowed:
                header_allowed = False
                continue
            raise ValueError(f"line {lineno}: could not parse {raw!r}") from None
        header_allowed = False
    if not values:
        raise ValueError(f"no observations found in {path}")
    return np.asarray(values, dtype=float)


def galaxy_velocities() -> np.ndarray:
    """The bundled 82 galaxy velocities, in thousands of km/s."""
    with resources.as_file(resources.files("gridmix").joinpath("data/galaxy.txt")) as p:
        return load_observations(p)


def _initial_mask(grid: Grid, cfg: AnnealConfig):
    if grid.dims == 1:
        return BinaryMask.full(grid.size)
    s1, s2 = grid.shape
    level = cfg.init_level if cfg.init_level is not None else math.ceil(s2 / 2)
    if level > s2:
        raise ValueError(f"init_level {level} exceeds the {s2} available scales")
    return LevelMask.constant(s1, s2, level)


def run_fit(
    data,
    grid: Grid,
    spec: KernelSpec,
    pr_cfg: PRConfig | None = None,
    anneal_cfg: AnnealConfig | None = None,
    *,
    density_path=None,
    trace_path=None,
) -> FitResult:
    """Search the grid for the best support of ``data`` and return the fit.

    Builds the fixed permutation set, dispatches the in/out or level
    search by grid dimension, and optionally writes the fitted density
    curve and the per-iteration trace as CSV files.
    """
    pr_cfg = pr_cfg or PRConfig()
    anneal_cfg = anneal_cfg or AnnealConfig()
    data = validate_observations(spec, data)
    if data.size == 0:
        raise ValueError("run_fit needs at least one observation")
    grid.validate_for(spec)
    if grid.dims == 1 and anneal_cfg.flip_k > grid.size:
        raise ValueError(f"flip_k {anneal_cfg.flip_k} exceeds grid size {grid.size}")
    perms = PermutationSet.generate(data.size, pr_cfg.n_permutations, pr_cfg.permutation_seed)
    objective = MarginalObjective(spec, grid, data, perms, pr_cfg, rho=anneal_cfg.rho)
    if grid.dims == 1:
        def proposal(mask, rng):
            return propose_binary(mask, anneal_cfg.flip_k, anneal_cfg.prop_r, rng)
    else:
        def proposal(mask, rng):
            return propose_locscale(mask, anneal_cfg.prop_r, rng)
    result = anneal(
        objective.value,
        _initial_mask(grid, anneal_cfg),
        anneal_cfg,
        proposal,
        weights_fn=objective.weights,
        support_fn=objective.support_points,
        std_fn=objective.permutation_std,
        trace_path=trace_path,
    )
    if density_path is not None:
        write_density_csv(density_path, spec, result.best_support, result.best_weights, data)
    return result


def density_curve(spec: KernelSpec, support, weights, data, n_points: int = DENSITY_POINTS):
    """Fitted mixture density on an evaluation grid spanning the data.

    Gaussian kernels get ``n_points`` equispaced points over the data
    range widened by three times the largest component scale; the Poisson
    kernel gets the integers over the comparable range.
    """
    data = np.asarray(data, dtype=float)
    if spec.family == POISSON:
        rates = np.asarray([sp.value for sp in support], dtype=float)
        hi = math.ceil(max(data.max(), rates.max()) + 3.0 * math.sqrt(max(rates.max(), 1.0)))
        ys = np.arange(0, hi + 1, dtype=float)
    else:
        if spec.family == GAUSS_LOC:
            max_scale = spec.sigma
        else:
            max_scale = math.sqrt(max(sp.value[1] for sp in support))
        lo = data.min() - 3.0 * max_scale
        hi = data.max() + 3.0 * max_scale
        ys = np.linspace(lo, hi, n_points)
    dens = np.exp(mixture_log_density(spec, support, weights, ys))
    return ys, dens


def write_density_csv(path, spec: KernelSpec, support, weights, data) -> None:
    ys, dens = density_curve(spec, support, weights, data)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["y", "density"])
        for y, d in zip(ys, dens):
            writer.writerow([repr(float(y)), repr(float(d))])


@dataclass(frozen=True)
class ExperimentSpec:
    """A replicated simulation study: simulate, fit, and tally the support sizes."""

    model: MixtureModelSpec
    n: int
    replications: int
    grid: Grid
    pr: PRConfig = field(default_factory=PRConfig)
    anneal: AnnealConfig = field(default_factory=AnnealConfig)
    master_seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    @classmethod
    def from_config(cls, config: dict) -> "ExperimentSpec":
        model = MixtureModelSpec.from_config(config["model"])
        grid = _grid_from_config(config.get("grid"), model.spec)
        pr_cfg = _pr_from_config(config.get("recursion", {}))
        anneal_cfg = _anneal_from_config(config.get("anneal", {}), model.spec, grid)
        return cls(
            model=model,
            n=int(config["n"]),
            replications=int(config["replications"]),
            grid=grid,
            pr=pr_cfg,
            anneal=anneal_cfg,
            master_seed=int(config.get("seed", 0)),
        )

    @classmethod
    def from_yaml(cls, path) -> "ExperimentSpec":
        with open(path) as handle:
            config = yaml.safe_load(handle)
        if not isinstance(config, dict):
            raise ValueError(f"experiment spec {path} must be a mapping")
        return cls.from_config(config)


def replication_seeds(master_seed: int, replication: int) -> tuple[int, int, int]:
    """Stable (data, permutation, chain) seeds; adding replications never shifts earlier ones."""
    state = np.random.SeedSequence(master_seed, spawn_key=(replication,)).generate_state(3)
    return int(state[0]), int(state[1]), int(state[2])


@dataclass
class ComplexityTable:
    """Tally of estimated support sizes across replications.

    Failed replications are counted and carry their messages; proportions
    are over the successful replications only.
    """

    counts: dict[int, int]
    replications: int
    failures: int = 0
    failure_messages: list[str] = field(default_factory=list)

    @property
    def successes(self) -> int:
        return self.replications - self.failures

    def proportions(self) -> dict[int, float]:
        total = sum(self.counts.values())
        return {size: c / total for size, c in sorted(self.counts.items())}

    def proportion_at(self, size: int) -> float:
        return self.proportions().get(size, 0.0)

    def modal_size(self) -> int:
        return max(sorted(self.counts), key=lambda s: self.counts[s])

    def rows(self) -> list[tuple[int, float, int]]:
        props = self.proportions()
        return [(size, props[size], self.counts[size]) for size in sorted(self.counts)]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["size", "proportion", "count"])
            for size, prop, count in self.rows():
                writer.writerow([size, repr(prop), count])

    def __str__(self) -> str:
        lines = ["size  proportion  count"]
        for size, prop, count in self.rows():
            lines.append(f"{size:>4}  {prop:>10.4f}  {count:>5}")
        lines.append(f"replications: {self.replications}  failures: {self.failures}")
        return "\n".join(lines)


def run_experiment(exp: ExperimentSpec, *, on_replication=None) -> ComplexityTable:
    """Run every replication of ``exp`` and tally the estimated support sizes.

    Per-replication failures are recorded with their messages and excluded
    from the proportions; the table is reproducible bit-for-bit from the
    spec (master seed included).
    """
    counts: dict[int, int] = {}
    failures = 0
    messages: list[str] = []
    for r in range(exp.replications):
        data_seed, perm_seed, chain_seed = replication_seeds(exp.master_seed, r)
        pr_cfg = replace(exp.pr, permutation_seed=perm_seed)
        anneal_cfg = replace(exp.anneal, chain_seed=chain_seed)
        try:
            data = simulate(exp.model, exp.n, data_seed)
            result = run_fit(data, exp.grid, exp.model.spec, pr_cfg, anneal_cfg)
            counts[result.size] = counts.get(result.size, 0) + 1
        except Exception as exc:
            failures += 1
            messages.append(f"replication {r}: {exc}")
            result = None
        if on_replication is not None:
            on_replication(r, result)
    return ComplexityTable(
        counts=counts,
        replications=exp.replications,
        failures=failures,
        failure_messages=messages,
    )


def _kernel_from_config(config: dict) -> KernelSpec:
    family = config.get("kernel")
    if family == POISSON:
        return KernelSpec.poisson()
    if family == GAUSS_LOC:
        if "sigma" not in config:
            raise ValueError("gauss-loc model config needs 'sigma'")
        return KernelSpec.gaussian_location(float(config["sigma"]))
    if family == GAUSS_LOCSCALE:
        return KernelSpec.gaussian_location_scale()
    raise ValueError(f"unknown kernel {family!r}; expected {POISSON}, {GAUSS_LOC} or {GAUSS_LOCSCALE}")


def _grid_from_config(grid_config, spec: KernelSpec) -> Grid:
    if grid_config is None:
        return default_gaussian_grid() if spec.is_two_dimensional else default_poisson_grid()
    if "axis1" in grid_config:
        return Grid.from_axis_specs(grid_config["axis1"], grid_config.get("axis2"))
    return Grid.from_axis_specs(grid_config)


def _pr_from_config(config: dict) -> PRConfig:
    kwargs = {}
    if "gamma" in config:
        kwargs["gamma"] = float(config["gamma"])
    if "permutations" in config:
        kwargs["n_permutations"] = int(config["permutations"])
    return PRConfig(**kwargs)


def _anneal_from_config(config: dict, spec: KernelSpec, grid: Grid) -> AnnealConfig:
    kwargs = {}
    for key, attr, cast in [
        ("iterations", "iterations", int),
        ("temp_a", "temp_a", float),
        ("flip_k", "flip_k", int),
        ("prop_r", "prop_r", float),
        ("init_level", "init_level", int),
    ]:
        if key in config and config[key] is not None:
            kwargs[attr] = cast(config[key])
    if "rho" in config:
        kwargs["rho"] = None if config["rho"] is None else float(config["rho"])
    elif spec.family == POISSON:
        kwargs["rho"] = 15.0 / grid.size
    return AnnealConfig(**kwargs)
