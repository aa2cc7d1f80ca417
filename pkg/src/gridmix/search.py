"""Subset encodings and the simulated-annealing search over candidate supports.

One-axis grids use in/out bit vectors; location-scale lattices use level
vectors where entry ``s`` holds the 1-based scale index paired with
location ``s`` (0 = location excluded), so a support never carries two
scales at the same location.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .kernels import Grid, KernelSpec, SupportPoint, log_kernel_matrix, validate_observations
from .recursion import PRConfig, PermutationSet, _marginals_from_logk

__all__ = [
    "BinaryMask",
    "LevelMask",
    "SupportMask",
    "AnnealConfig",
    "FitResult",
    "MarginalObjective",
    "penalty",
    "temperature",
    "acceptance_prob",
    "binary_selection_weights",
    "locscale_selection_weights",
    "propose_binary",
    "propose_locscale",
    "anneal",
    "exhaustive_binary_argmax",
]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """In/out indicator over a one-axis grid: bit ``s`` = 1 iff point ``s`` is in the support."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).copy()
        if bits.ndim != 1 or bits.size == 0:
            raise ValueError("bits must be a nonempty 1-d vector")
        if np.any(bits > 1):
            raise ValueError("bits must be 0/1 valued")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def full(cls, n_points: int) -> "BinaryMask":
        return cls(np.ones(n_points, dtype=np.uint8))

    @classmethod
    def from_indices(cls, indices, n_points: int) -> "BinaryMask":
        bits = np.zeros(n_points, dtype=np.uint8)
        bits[np.asarray(list(indices), dtype=int)] = 1
        return cls(bits)

    @property
    def n_slots(self) -> int:
        return self.bits.size

    @property
    def size(self) -> int:
        return int(self.bits.sum())

    def active(self) -> np.ndarray:
        """Flat grid indices of the encoded support."""
        return np.flatnonzero(self.bits)

    def key(self) -> bytes:
        return self.bits.tobytes()

    def __eq__(self, other):
        return isinstance(other, BinaryMask) and self.key() == other.key()

    def __hash__(self):
        return hash((BinaryMask, self.key()))


@dataclass(frozen=True, eq=False)
class LevelMask:
    """Scale-level indicator over a location-scale lattice.

    Entry ``s`` is 0 when location ``s`` is excluded, otherwise the 1-based
    index into the scale axis; at most one scale per location by
    construction.  Flat lattice indices follow the grid convention
    ``location_index * n_scales + (level - 1)``.
    """

    levels: np.ndarray = field(repr=False)
    n_scales: int = 0

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.int64).copy()
        if levels.ndim != 1 or levels.size == 0:
            raise ValueError("levels must be a nonempty 1-d vector")
        if self.n_scales < 1:
            raise ValueError("n_scales must be >= 1")
        if np.any(levels < 0) or np.any(levels > self.n_scales):
            raise ValueError(f"levels must lie in 0..{self.n_scales}")
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def constant(cls, n_locations: int, n_scales: int, level: int) -> "LevelMask":
        return cls(np.full(n_locations, level, dtype=np.int64), n_scales)

    @property
    def n_slots(self) -> int:
        return self.levels.size

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.levels))

    def active(self) -> np.ndarray:
        locs = np.flatnonzero(self.levels)
        return locs * self.n_scales + (self.levels[locs] - 1)

    def key(self) -> bytes:
        return self.levels.tobytes()

    def __eq__(self, other):
        return (
            isinstance(other, LevelMask)
            and self.n_scales == other.n_scales
            and self.key() == other.key()
        )

    def __hash__(self):
        return hash((LevelMask, self.n_scales, self.key()))


SupportMask = Union[BinaryMask, LevelMask]


@dataclass(frozen=True)
class AnnealConfig:
    """Annealing loop settings.

    ``rho`` switches on the size penalty: the log prior adds
    ``|U| log(rho) + (slots - |U|) log(1 - rho)`` to the objective.
    ``init_level`` picks the starting scale level for location-scale
    searches (default: middle of the scale axis).
    """

    iterations: int = 5000
    temp_a: float = 1.0
    flip_k: int = 1
    prop_r: float = 1.0
    rho: float | None = None
    chain_seed: int = 0
    init_level: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.temp_a > 0:
            raise ValueError("temp_a must be > 0")
        if self.flip_k < 1:
            raise ValueError("flip_k must be >= 1")
        if not self.prop_r >= 1:
            raise ValueError("prop_r must be >= 1")
        if self.rho is not None and not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.init_level is not None and self.init_level < 1:
            raise ValueError("init_level must be >= 1")


def penalty(mask, n_slots: int, rho: float) -> float:
    """Log prior of a support under independent inclusion probability ``rho``.

    A Binomial(``n_slots``, ``rho``) prior on the size combined with a
    uniform prior on supports of that size reduces to independent
    Bernoulli inclusion, hence ``|U| log(rho) + (n_slots - |U|) log(1-rho)``.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    size = mask.size if hasattr(mask, "size") else int(mask)
    if not 0 <= size <= n_slots:
        raise ValueError(f"support size {size} outside 0..{n_slots}")
    return size * math.log(rho) + (n_slots - size) * math.log1p(-rho)


def temperature(t: int, a: float) -> float:
    """Annealing temperature ``a / log(1 + t)`` for iteration ``t >= 1``."""
    if t < 1:
        raise ValueError("temperature is defined for iterations t >= 1")
    if not a > 0:
        raise ValueError("temperature scale a must be > 0")
    return a / math.log1p(t)


def acceptance_prob(obj_new: float, obj_cur: float, tau: float) -> float:
    """Probability of moving to a proposal: 1 for uphill, exp(delta/tau) for downhill."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if obj_new == float("-inf"):
        return 0.0
    delta = obj_new - obj_cur
    if delta >= 0:
        return 1.0
    return math.exp(delta / tau)


def binary_selection_weights(mask: BinaryMask, r: float) -> np.ndarray:
    """Unnormalized flip-selection weights: active bits get a 1 + (S/|U|)^r bonus."""
    size = mask.size
    if size == 0:
        raise ValueError("selection weights need a nonempty current support")
    return 1.0 + (mask.n_slots / size) ** r * mask.bits.astype(float)


def propose_binary(mask: BinaryMask, k: int, r: float, rng: np.random.Generator) -> BinaryMask:
    """Flip ``k`` distinct positions, drawn without replacement by the selection weights."""
    if not 1 <= k <= mask.n_slots:
        raise ValueError(f"flip count k must lie in 1..{mask.n_slots}")
    w = binary_selection_weights(mask, r)
    positions = rng.choice(mask.n_slots, size=k, replace=False, p=w / w.sum())
    bits = mask.bits.copy()
    bits[positions] ^= 1
    return BinaryMask(bits)


def locscale_selection_weights(mask: LevelMask, r: float) -> np.ndarray:
    """Unnormalized location-selection weights: occupied slots get a (1-beta)^-r bonus."""
    beta = 1.0 - mask.size / mask.n_slots
    if mask.size == 0:
        raise ValueError("selection weights need a nonempty current support")
    return 1.0 + (1.0 - beta) ** (-r) * (mask.levels > 0).astype(float)


def propose_locscale(mask: LevelMask, r: float, rng: np.random.Generator) -> LevelMask:
    """Change the scale level at one location.

    An empty slot opens at a uniformly drawn level.  An occupied slot
    closes with probability ``beta`` (the current fraction of empty
    slots, floored at ``1/S1`` and capped at ``1 - 1/S1`` so removals and
    retentions both stay reachable), otherwise it steps to an adjacent
    level, reflecting off the ends of the scale axis.
    """
    s1, s2 = mask.n_slots, mask.n_scales
    beta = 1.0 - mask.size / s1
    w = locscale_selection_weights(mask, r)
    s = int(rng.choice(s1, p=w / w.sum()))
    h = int(mask.levels[s])
    if h == 0:
        new = int(rng.integers(1, s2 + 1))
    else:
        beta_eff = min(max(beta, 1.0 / s1), 1.0 - 1.0 / s1)
        if rng.random() < beta_eff:
            new = 0
        elif s2 == 1:
            new = 1
        elif h == 1:
            new = 2
        elif h == s2:
            new = s2 - 1
        else:
            new = h - 1 if rng.integers(0, 2) == 0 else h + 1
    levels = mask.levels.copy()
    levels[s] = new
    return LevelMask(levels, s2)


@dataclass
class FitResult:
    """Outcome of an annealing run: the best visited support and its context."""

    best_mask: SupportMask
    best_objective: float
    trace: list[tuple[int, float, int, bool]]
    seconds: float
    best_support: list[SupportPoint] | None = None
    best_weights: np.ndarray | None = None
    objective_std_permutations: float | None = None

    @property
    def size(self) -> int:
        return self.best_mask.size


class MarginalObjective:
    """Penalized permutation-averaged log marginal likelihood as a function of the mask.

    Builds the full grid log-density matrix once; each evaluation slices
    the active columns and runs the batched recursion.  Values are cached
    by mask, which is safe because the permutation set is fixed for the
    lifetime of the objective.
    """

    def __init__(
        self,
        spec: KernelSpec,
        grid: Grid,
        data,
        perms: PermutationSet,
        pr_cfg: PRConfig | None = None,
        rho: float | None = None,
    ):
        self.spec = spec
        self.grid = grid
        self.pr_cfg = pr_cfg or PRConfig()
        self.rho = rho
        if rho is not None and not 0.0 < rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        self.data = validate_observations(spec, data)
        if self.data.size == 0:
            raise ValueError("objective needs at least one observation")
        if perms.n != self.data.size:
            raise ValueError(f"permutation set is over {perms.n} items but data has {self.data.size}")
        self.perms = perms
        self._logk = log_kernel_matrix(spec, grid.kernel_params(spec), self.data)
        if self.pr_cfg.f0 is not None and len(self.pr_cfg.f0) != grid.size:
            raise ValueError("explicit f0 for a grid objective must cover every grid point")
        self._cache: dict[bytes, float] = {}
        self.n_evaluations = 0

    def _f0(self, active: np.ndarray) -> np.ndarray:
        if self.pr_cfg.f0 is None:
            return np.full(active.size, 1.0 / active.size)
        f0 = np.asarray(self.pr_cfg.f0, dtype=float)[active]
        return f0 / f0.sum()

    def _totals(self, mask: SupportMask):
        active = mask.active()
        logk = np.ascontiguousarray(self._logk[:, active])
        return _marginals_from_logk(logk, self.perms.orders, self.pr_cfg.gamma, self._f0(active))

    def averaged_log_marginal(self, mask: SupportMask) -> float:
        """Unpenalized averaged log marginal; -inf for the empty support."""
        if mask.size == 0:
            return float("-inf")
        key = mask.key()
        cached = self._cache.get(key)
        if cached is None:
            totals, _ = self._totals(mask)
            self.n_evaluations += 1
            cached = float(np.sort(totals).mean())
            self._cache[key] = cached
        return cached

    def value(self, mask: SupportMask) -> float:
        """The search objective: averaged log marginal plus size penalty when ``rho`` is set."""
        base = self.averaged_log_marginal(mask)
        if self.rho is None or base == float("-inf"):
            return base
        return base + penalty(mask, mask.n_slots, self.rho)

    def weights(self, mask: SupportMask) -> np.ndarray:
        """Final mixing weights on the mask's support, averaged across permutations."""
        if mask.size == 0:
            raise ValueError("no weights for an empty support")
        _, final = self._totals(mask)
        w = final.mean(axis=0)
        return w / w.sum()

    def permutation_std(self, mask: SupportMask) -> float:
        """Across-permutation standard deviation of the order-specific log marginals."""
        if mask.size == 0:
            return float("nan")
        totals, _ = self._totals(mask)
        return float(np.std(totals))

    def support_points(self, mask: SupportMask) -> list[SupportPoint]:
        return self.grid.support_points(mask.active())


def anneal(
    objective: Callable[[SupportMask], float],
    initial: SupportMask,
    cfg: AnnealConfig,
    proposal: Callable[[SupportMask, np.random.Generator], SupportMask],
    *,
    weights_fn: Callable[[SupportMask], np.ndarray] | None = None,
    support_fn: Callable[[SupportMask], list[SupportPoint]] | None = None,
    std_fn: Callable[[SupportMask], float] | None = None,
    trace_path=None,
) -> FitResult:
    """Maximize ``objective`` over masks by simulated annealing.

    Runs ``cfg.iterations`` steps from ``initial``, accepting uphill moves
    always and downhill moves with probability ``exp(delta / tau_t)`` at
    temperature ``tau_t = temp_a / log(1 + t)``.  Empty proposals score
    ``-inf`` and are therefore never accepted.  Returns the best visited
    state (earliest wins ties); fully deterministic given ``chain_seed``.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.chain_seed))
    cache: dict[bytes, float] = {}

    def evaluate(mask: SupportMask, t: int) -> float:
        if mask.size == 0:
            return float("-inf")
        key = mask.key()
        val = cache.get(key)
        if val is None:
            try:
                val = float(objective(mask))
            except Exception as exc:
                raise RuntimeError(f"objective evaluation failed at iteration {t}") from exc
            cache[key] = val
        return val

    start = time.perf_counter()
    current = initial
    cur_obj = evaluate(initial, 0)
    if cur_obj == float("-inf"):
        raise ValueError("initial mask must have a finite objective")
    best, best_obj = current, cur_obj
    trace: list[tuple[int, float, int, bool]] = [(0, cur_obj, current.size, True)]

    writer = None
    handle = None
    try:
        if trace_path is not None:
            handle = open(trace_path, "w", newline="")
            writer = csv.writer(handle)
            writer.writerow(["iteration", "objective", "support_size", "accepted"])
            writer.writerow([0, repr(cur_obj), current.size, 1])
        for t in range(1, cfg.iterations + 1):
            candidate = proposal(current, rng)
            new_obj = evaluate(candidate, t)
            alpha = acceptance_prob(new_obj, cur_obj, temperature(t, cfg.temp_a))
            accepted = bool(rng.random() < alpha)
            if accepted:
                current, cur_obj = candidate, new_obj
                if cur_obj > best_obj:
                    best, best_obj = current, cur_obj
            trace.append((t, cur_obj, current.size, accepted))
            if writer is not None:
                writer.writerow([t, repr(cur_obj), current.size, int(accepted)])
    finally:
        if handle is not None:
            handle.close()

    seconds = time.perf_counter() - start
    return FitResult(
        best_mask=best,
        best_objective=best_obj,
        trace=trace,
        seconds=seconds,
        best_support=support_fn(best) if support_fn is not None else None,
        best_weights=weights_fn(best) if weights_fn is not None else None,
        objective_std_permutations=std_fn(best) if std_fn is not None else None,
    )


def exhaustive_binary_argmax(objective: Callable[[BinaryMask], float], n_points: int):
    """Evaluate every nonempty subset of a small grid; returns (best_mask, best_value).

    Intended as a ground-truth check for the annealing search; guarded to
    grids of at most 20 points.
    """
    if n_points > 20:
        raise ValueError("exhaustive search is limited to grids of at most 20 points")
    best_mask = None
    best_val = float("-inf")
    for code in range(1, 2**n_points):
        bits = np.array([(code >> s) & 1 for s in range(n_points)], dtype=np.uint8)
        mask = BinaryMask(bits)
        val = float(objective(mask))
        if val > best_val:
            best_mask, best_val = mask, val
    return best_mask, best_val
