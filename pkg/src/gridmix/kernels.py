"""Mixture component kernels and the candidate-support grids they live on.

Three kernel families are supported: Poisson counts indexed by a rate,
Gaussian locations with a common fixed scale, and Gaussian location-scale
pairs.  Location-scale components are parameterized by (mean, variance);
two-axis grids store standard deviations on the scale axis and the
conversion to variances happens when grid points are resolved to component
parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import gammaln, xlogy

__all__ = [
    "POISSON",
    "GAUSS_LOC",
    "GAUSS_LOCSCALE",
    "KernelSpec",
    "Grid",
    "SupportPoint",
    "kernel_density",
    "log_kernel_density",
    "log_kernel_matrix",
    "mixture_density",
    "mixture_log_density",
    "validate_observations",
]

POISSON = "poisson"
GAUSS_LOC = "gauss-loc"
GAUSS_LOCSCALE = "gauss-locscale"

_FAMILIES = (POISSON, GAUSS_LOC, GAUSS_LOCSCALE)
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelSpec:
    """A mixture component family.

    Parameters
    ----------
    family : str
        One of ``"poisson"``, ``"gauss-loc"``, ``"gauss-locscale"``.
    sigma : float, optional
        Common fixed scale (standard deviation), required for and only
        meaningful with ``"gauss-loc"``.
    """

    family: str
    sigma: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {_FAMILIES}")
        if self.family == GAUSS_LOC:
            if self.sigma is None or not (self.sigma > 0):
                raise ValueError("gauss-loc requires a strictly positive fixed scale sigma")
        elif self.sigma is not None:
            raise ValueError(f"sigma is only meaningful for {GAUSS_LOC!r}")

    @classmethod
    def poisson(cls) -> "KernelSpec":
        return cls(POISSON)

    @classmethod
    def gaussian_location(cls, sigma: float) -> "KernelSpec":
        return cls(GAUSS_LOC, sigma=float(sigma))

    @classmethod
    def gaussian_location_scale(cls) -> "KernelSpec":
        return cls(GAUSS_LOCSCALE)

    @property
    def is_two_dimensional(self) -> bool:
        return self.family == GAUSS_LOCSCALE


@dataclass(frozen=True)
class SupportPoint:
    """One candidate component: a grid index with its resolved parameter.

    ``coords`` are lattice coordinates in grid units (a location or rate,
    or a ``(location, scale)`` pair with the scale a standard deviation).
    ``value`` is the component parameter in kernel convention, which for
    location-scale kernels means ``(mean, variance)``; for the other
    families it equals ``coords``.
    """

    index: int
    coords: float | tuple[float, float]
    value: float | tuple[float, float]


def _as_axis(values, name: str) -> tuple[float, ...]:
    axis = tuple(float(v) for v in np.asarray(values, dtype=float).ravel())
    if len(axis) == 0:
        raise ValueError(f"{name} must be nonempty")
    if any(not math.isfinite(v) for v in axis):
        raise ValueError(f"{name} values must be finite")
    if any(b <= a for a, b in zip(axis, axis[1:])):
        raise ValueError(f"{name} values must be strictly increasing")
    return axis


@dataclass(frozen=True)
class Grid:
    """A finite lattice of candidate support points.

    One axis gives a plain location/rate grid; adding a second axis of
    strictly positive scales (standard deviations) gives the
    location-scale lattice with flat index ``i1 * len(axis2) + i2``.
    """

    axis1: tuple[float, ...]
    axis2: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "axis1", _as_axis(self.axis1, "axis1"))
        if self.axis2 is not None:
            axis2 = _as_axis(self.axis2, "axis2")
            if axis2[0] <= 0:
                raise ValueError("axis2 (scales) must be strictly positive")
            object.__setattr__(self, "axis2", axis2)

    @classmethod
    def equispaced(cls, lo: float, hi: float, count: int) -> "Grid":
        return cls(axis1=tuple(np.linspace(lo, hi, count)))

    @classmethod
    def from_axis_specs(cls, spec1, spec2=None) -> "Grid":
        """Build from axis descriptors: explicit value lists or (lo, hi, count) mappings."""
        return cls(axis1=_axis_from_spec(spec1), axis2=None if spec2 is None else _axis_from_spec(spec2))

    @property
    def dims(self) -> int:
        return 1 if self.axis2 is None else 2

    @property
    def shape(self) -> tuple[int, ...]:
        if self.axis2 is None:
            return (len(self.axis1),)
        return (len(self.axis1), len(self.axis2))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coords(self, index: int):
        """Lattice coordinates of the flat ``index``."""
        if not 0 <= index < self.size:
            raise IndexError(f"grid index {index} out of range [0, {self.size})")
        if self.axis2 is None:
            return self.axis1[index]
        s2 = len(self.axis2)
        return (self.axis1[index // s2], self.axis2[index % s2])

    def support_point(self, index: int) -> SupportPoint:
        coords = self.coords(index)
        if self.axis2 is None:
            return SupportPoint(index=int(index), coords=coords, value=coords)
        mu, sd = coords
        return SupportPoint(index=int(index), coords=coords, value=(mu, sd * sd))

    def support_points(self, indices) -> list[SupportPoint]:
        return [self.support_point(int(i)) for i in indices]

    @cached_property
    def _index_by_coords(self) -> dict:
        return {self.coords(i): i for i in range(self.size)}

    def index_of(self, coords) -> int:
        """Inverse of :meth:`coords`; exact on values the grid itself produced."""
        key = tuple(coords) if isinstance(coords, (tuple, list, np.ndarray)) else float(coords)
        try:
            return self._index_by_coords[key]
        except KeyError:
            raise KeyError(f"{coords!r} is not a lattice point of this grid") from None

    def validate_for(self, spec: KernelSpec) -> None:
        if spec.is_two_dimensional != (self.dims == 2):
            raise ValueError(
                f"kernel family {spec.family!r} needs a {'two' if spec.is_two_dimensional else 'one'}-axis grid, "
                f"got {self.dims} axis(es)"
            )
        if spec.family == POISSON and self.axis1[0] < 0:
            raise ValueError("Poisson rate grid values must be nonnegative")

    def kernel_params(self, spec: KernelSpec) -> np.ndarray:
        """Component parameters for every grid point, in kernel convention.

        Returns shape ``(S,)`` for one-axis grids and ``(S, 2)`` with a
        variance second column for location-scale grids.
        """
        self.validate_for(spec)
        a1 = np.asarray(self.axis1, dtype=float)
        if self.axis2 is None:
            return a1
        a2 = np.asarray(self.axis2, dtype=float)
        mu = np.repeat(a1, len(a2))
        var = np.tile(a2 * a2, len(a1))
        return np.column_stack([mu, var])


def _axis_from_spec(axis_spec):
    if isinstance(axis_spec, dict):
        missing = {"lo", "hi", "count"} - set(axis_spec)
        if missing:
            raise ValueError(f"equispaced axis spec needs lo/hi/count, missing {sorted(missing)}")
        return tuple(np.linspace(float(axis_spec["lo"]), float(axis_spec["hi"]), int(axis_spec["count"])))
    return tuple(float(v) for v in axis_spec)


def validate_observations(spec: KernelSpec, data) -> np.ndarray:
    """Check observations against the kernel domain and return them as a float vector."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"observations must be a 1-d vector, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("observations must be finite")
    if spec.family == POISSON and arr.size:
        if np.any(arr < 0) or np.any(arr != np.floor(arr)):
            raise ValueError("Poisson kernel requires nonnegative integer observations")
    return arr


def _params_array(spec: KernelSpec, params) -> np.ndarray:
    arr = np.asarray(params, dtype=float)
    if spec.is_two_dimensional:
        arr = arr.reshape(-1, 2)
        if np.any(arr[:, 1] <= 0):
            raise ValueError("location-scale components need strictly positive variances")
    else:
        arr = arr.reshape(-1)
        if spec.family == POISSON and np.any(arr < 0):
            raise ValueError("Poisson rates must be nonnegative")
    return arr


def log_kernel_matrix(spec: KernelSpec, params, data) -> np.ndarray:
    """Log component densities for every (observation, component) pair.

    Parameters
    ----------
    spec : KernelSpec
    params : array_like
        Component parameters in kernel convention, shape ``(S,)`` or ``(S, 2)``.
    data : array_like
        Observation vector, shape ``(n,)``.

    Returns
    -------
    ndarray of shape ``(n, S)``; entries may be ``-inf`` where a component
    assigns zero mass.
    """
    y = validate_observations(spec, data)
    p = _params_array(spec, params)
    if spec.family == POISSON:
        with np.errstate(divide="ignore"):
            out = xlogy(y[:, None], p[None, :]) - p[None, :] - gammaln(y + 1.0)[:, None]
        return out
    if spec.family == GAUSS_LOC:
        z = (y[:, None] - p[None, :]) / spec.sigma
        return -0.5 * z * z - math.log(spec.sigma) - 0.5 * _LOG_2PI
    mu, var = p[:, 0], p[:, 1]
    d = y[:, None] - mu[None, :]
    return -0.5 * d * d / var[None, :] - 0.5 * (np.log(var)[None, :] + _LOG_2PI)


def log_kernel_density(spec: KernelSpec, y, u) -> float:
    """Log density of one observation under one component parameter ``u``."""
    return float(log_kernel_matrix(spec, np.asarray([u] if not spec.is_two_dimensional else [tuple(u)], dtype=float), [y])[0, 0])


def kernel_density(spec: KernelSpec, y, u) -> float:
    """Density ``p(y | u)`` of one observation under one component."""
    return math.exp(log_kernel_density(spec, y, u))


def _support_params(spec: KernelSpec, support: Sequence) -> np.ndarray:
    vals = [sp.value if isinstance(sp, SupportPoint) else sp for sp in support]
    return _params_array(spec, np.asarray(vals, dtype=float))


def mixture_log_density(spec: KernelSpec, support: Sequence, weights, data) -> np.ndarray:
    """Log of the finite mixture density at each observation.

    ``support`` may hold :class:`SupportPoint` objects or raw component
    parameters.  An empty support yields ``-inf`` everywhere (density zero).
    """
    y = validate_observations(spec, data)
    if len(support) == 0:
        return np.full(y.shape, -np.inf)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(support),):
        raise ValueError(f"weights shape {w.shape} does not match support of size {len(support)}")
    if np.any(w < 0):
        raise ValueError("mixing weights must be nonnegative")
    logk = log_kernel_matrix(spec, _support_params(spec, support), y)
    with np.errstate(divide="ignore"):
        terms = logk + np.log(w)[None, :]
    shift = np.max(terms, axis=1)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    return shift + np.log(np.sum(np.exp(terms - shift[:, None]), axis=1))


def mixture_density(spec: KernelSpec, support: Sequence, weights, y) -> float:
    """Finite mixture density: the weight-averaged component density at ``y``.

    Defined as 0 for an empty support so callers can treat the empty model
    as having log likelihood ``-inf``.
    """
    if len(support) == 0:
        return 0.0
    return float(np.exp(mixture_log_density(spec, support, weights, [y])[0]))
