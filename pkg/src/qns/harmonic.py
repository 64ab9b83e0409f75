"""Dyadic frequency decomposition, smoothness norms, inequality battery.

Blocks are Fourier multipliers by smooth radial ring functions built from
the standard C-infinity transition ``exp(-1/s)`` glue: the base profile
equals 1 on the unit ball and vanishes outside radius 2, rings telescope
exactly, and every grid frequency is covered by at most two rings.  On top
of the blocks sit Besov/Sobolev norms and a battery of numerical checks
for the function-space inequalities the solver relies on: constant-free
claims are hard pass/fail, constant-bearing ones are ratio reports only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .qspace import (
    FrequencyGrid,
    QElement,
    ThetaMatrix,
    coeff_lp_norm,
    fourier_multiplier,
    opnorm_estimate,
    partial_derivative,
    schatten_norm,
    twisted_convolution,
)
from .flow import VelocityField, heat, leray_project

__all__ = [
    "DyadicPartition",
    "partition_for",
    "lp_block",
    "BesovSpec",
    "besov_norm",
    "sobolev_norm",
    "CheckRecord",
    "BatteryReport",
    "inequality_battery",
]


def smooth_step(u):
    """C-infinity monotone step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        g0 = np.where(u > 0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        g1 = np.where(1 - u > 0, np.exp(-1.0 / np.maximum(1 - u, 1e-300)), 0.0)
    return g0 / (g0 + g1)


def bump_profile(r):
    """Radial base bump: 1 on [0, 1], 0 on [2, inf), smooth in between."""
    r = np.asarray(r, dtype=float)
    return smooth_step(2.0 - r)


class DyadicPartition:
    """Tabulated ring multipliers phi_j(xi) = phi(2^-j xi) - phi(2^{1-j} xi)
    for the index range [j_min, j_max] covering the grid's nonzero
    frequencies; the rings sum to exactly 1 there (telescoping)."""

    def __init__(self, grid: FrequencyGrid):
        self.grid = grid
        radii = np.sqrt(grid.xi_abs2())
        self._radii = radii
        r_min = grid.spacing                      # nearest nonzero node
        r_max = float(np.max(radii))
        self.j_min = int(math.floor(math.log2(r_min)))
        self.j_max = int(math.ceil(math.log2(r_max)))
        self._rings = {}
        for j in range(self.j_min, self.j_max + 1):
            self._rings[j] = bump_profile(radii / 2.0 ** j) - bump_profile(radii / 2.0 ** (j - 1))

    def covers(self, j: int) -> bool:
        return self.j_min <= j <= self.j_max

    def indices(self):
        return range(self.j_min, self.j_max + 1)

    def ring(self, j: int) -> np.ndarray:
        if not self.covers(j):
            raise ValueError(f"block index {j} outside covered range "
                             f"[{self.j_min}, {self.j_max}]")
        return self._rings[j]

    def low_pass(self) -> np.ndarray:
        """Inhomogeneous first block: 1 minus all rings with j >= 1."""
        out = np.ones(self.grid.shape)
        for j in self.indices():
            if j >= 1:
                out -= self._rings[j]
        return out

    def partition_defect(self) -> float:
        """Max deviation of the ring sum from 1 over nonzero grid nodes."""
        total = np.zeros(self.grid.shape)
        for j in self.indices():
            total += self._rings[j]
        total[self.grid.center()] = 1.0
        return float(np.max(np.abs(total - 1.0)))

    def overlap_interval(self):
        """Range of sqrt(sum_j phi_j(xi)^2) over nonzero nodes.

        Because at most two rings overlap anywhere, this lies inside
        [sqrt(1/2), 1]; it is the exact equivalence interval between the
        (0, 2, 2) block norm and the plain L2 norm on this grid.
        """
        sq = np.zeros(self.grid.shape)
        for j in self.indices():
            sq += self._rings[j] ** 2
        sq[self.grid.center()] = np.nan
        vals = np.sqrt(sq[np.isfinite(sq)])
        return float(np.min(vals)), float(np.max(vals))


_partition_cache: dict = {}


def partition_for(grid: FrequencyGrid) -> DyadicPartition:
    key = (grid.d, grid.K, grid.L)
    part = _partition_cache.get(key)
    if part is None:
        part = _partition_cache[key] = DyadicPartition(grid)
    return part


def lp_block(x: QElement, j: int, homogeneous: bool = True) -> QElement:
    """Littlewood-Paley block: multiplier by the j-th ring.

    With ``homogeneous=False``, j = 0 is the modified low-pass block
    (1 minus all rings j >= 1) and j >= 1 are the ordinary rings.
    """
    part = partition_for(x.grid)
    if homogeneous:
        return fourier_multiplier(x, part.ring(j))
    if j < 0:
        raise ValueError(f"inhomogeneous block index must be >= 0, got {j}")
    if j == 0:
        return fourier_multiplier(x, part.low_pass())
    return fourier_multiplier(x, part.ring(j))


def _validate_p(p):
    if p == 2:
        return
    if isinstance(p, (int, np.integer)) and p >= 2 and p % 2 == 0:
        return
    raise ValueError(f"norm index p={p} not supported (need 2 or an even integer)")


@dataclass(frozen=True)
class BesovSpec:
    """Smoothness alpha, integrability p (2 or even), summation q, flavor."""
    alpha: float
    p: int = 2
    q: float = 2
    homogeneous: bool = True

    def __post_init__(self):
        _validate_p(self.p)
        if not (self.q >= 1):
            raise ValueError(f"need q >= 1, got {self.q}")


def besov_norm(x: QElement, spec: BesovSpec) -> float:
    """(sum_j 2^{j alpha q} ||block_j x||_p^q)^{1/q}; sup over j for q = inf."""
    part = partition_for(x.grid)
    if spec.homogeneous:
        js = list(part.indices())
    else:
        js = [0] + [j for j in part.indices() if j >= 1]
    terms = []
    for j in js:
        blk = lp_block(x, j, homogeneous=spec.homogeneous)
        nrm = schatten_norm(blk, spec.p)
        if nrm > 0.0:
            terms.append(2.0 ** (j * spec.alpha) * nrm)
    if not terms:
        return 0.0
    if math.isinf(spec.q):
        return max(terms)
    return float(np.sum(np.asarray(terms) ** spec.q) ** (1.0 / spec.q))


def sobolev_norm(x: QElement, s: float, p=2, homogeneous: bool = True) -> float:
    """Riesz (|xi|^s) or Bessel ((1+|xi|^2)^{s/2}) potential norm."""
    _validate_p(p)
    grid = x.grid
    if homogeneous:
        abs2 = grid.xi_abs2().copy()
        center = grid.center()
        if s < 0 and x.coeffs[center] != 0:
            raise ValueError("singular multiplier |xi|^s, s < 0, needs a zero "
                             "coefficient at xi = 0")
        abs2[center] = 1.0  # placeholder; the center weight is forced below
        mult = abs2 ** (s / 2.0)
        mult[center] = 1.0 if s == 0 else 0.0
    else:
        mult = (1.0 + grid.xi_abs2()) ** (s / 2.0)
    return schatten_norm(fourier_multiplier(x, mult), p)


# --- inequality battery ------------------------------------------------------

@dataclass
class CheckRecord:
    name: str
    trials: int
    passes: int
    worst_ratio: float
    notes: str
    hard: bool

    def as_dict(self):
        return {"name": self.name, "trials": self.trials, "passes": self.passes,
                "worst_ratio": self.worst_ratio, "notes": self.notes}


class BatteryReport:
    """Per-check records, sorted by name; JSON round-trippable."""

    def __init__(self, records: Iterable[CheckRecord]):
        self.records = sorted(records, key=lambda r: r.name)

    def __getitem__(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def hard_failures(self):
        return [r for r in self.records if r.hard and r.passes < r.trials]

    def all_hard_passed(self) -> bool:
        return not self.hard_failures()

    def to_json(self) -> str:
        return json.dumps([r.as_dict() for r in self.records], indent=2)

    def format_table(self) -> str:
        width = max(len(r.name) for r in self.records)
        lines = [f"{'check':<{width}}  passes  worst_ratio  notes"]
        for r in self.records:
            lines.append(f"{r.name:<{width}}  {r.passes:>3}/{r.trials:<3}"
                         f"  {r.worst_ratio:11.6f}  {r.notes}")
        return "\n".join(lines)


def _random_band_element(grid, theta, rng, band, self_adjoint=False):
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    sl = tuple(slice(grid.K - band, grid.K + band + 1) for _ in range(grid.d))
    shape = (2 * band + 1,) * grid.d
    coeffs[sl] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    x = QElement(grid, theta, coeffs)
    if self_adjoint:
        from .qspace import adjoint
        x = 0.5 * (x + adjoint(x))
    return x


def inequality_battery(seed: int, trials: int, K: int = 12, L: float = 2 * np.pi,
                       theta12: float = 0.8) -> BatteryReport:
    """Run the named inequality checks on seeded random band-limited inputs.

    Hard (constant-free, every trial must pass): hausdorff_young,
    heat_contraction, block_decay, leray_contraction.  Report-only
    (constant-bearing, worst ratio recorded): bernstein,
    gagliardo_nirenberg, besov_embedding_*, product_estimate.
    """
    if trials < 1:
        raise ValueError(f"need trials >= 1, got {trials}")
    grid = FrequencyGrid(2, K, L)
    theta = ThetaMatrix.planar(theta12)
    part = partition_for(grid)
    rng = np.random.default_rng(seed)
    tol = 1.0 + 1e-12
    records = []

    def run(name, n, fn, hard, notes=""):
        passes = 0
        worst = 0.0
        for _ in range(n):
            ok, ratio = fn()
            passes += bool(ok)
            worst = max(worst, ratio)
        records.append(CheckRecord(name, n, passes, worst, notes, hard))

    # hard: ||x||_4 <= ||f||_{4/3} with constant exactly 1
    def hausdorff_young():
        x = _random_band_element(grid, theta, rng, grid.K)
        ratio = schatten_norm(x, 4) / coeff_lp_norm(x, 4.0 / 3.0)
        return ratio <= tol, ratio

    # hard: heat is a contraction on p in {2, 4}
    def heat_contraction():
        x = _random_band_element(grid, theta, rng, grid.K)
        t = float(rng.uniform(0.01, 1.0))
        y = heat(t, x)
        worst = max(schatten_norm(y, p) / schatten_norm(x, p) for p in (2, 4))
        return worst <= tol, worst

    # hard: the ring bound exp(-t 4^{j-1}) per block, exact since
    # |xi| >= 2^{j-1} on the ring's support
    def block_decay():
        x = _random_band_element(grid, theta, rng, grid.K)
        t = float(rng.uniform(0.0, 1.0))
        y = heat(t, x)
        worst = 0.0
        for j in part.indices():
            base = schatten_norm(lp_block(x, j), 2)
            if base == 0.0:
                continue
            bound = math.exp(-t * 4.0 ** (j - 1)) * base
            worst = max(worst, schatten_norm(lp_block(y, j), 2) / bound)
        return worst <= tol, worst

    # hard: the divergence-free projector is an L2 contraction
    def leray_contraction():
        u = VelocityField(tuple(_random_band_element(grid, theta, rng, grid.K)
                                for _ in range(2)))
        ratio = leray_project(u).l2_norm() / u.l2_norm()
        return ratio <= tol, ratio

    # report-only: ||x||_4 <= C r^{d(1/2-1/4)} ||x||_2 on support radius r
    def bernstein():
        band = int(rng.integers(2, grid.K + 1))
        x = _random_band_element(grid, theta, rng, band)
        r = band * grid.spacing * math.sqrt(2.0)
        ratio = schatten_norm(x, 4) / (r ** 0.5 * schatten_norm(x, 2))
        return True, ratio

    # report-only: ||x||_4 <= C ||x||_2^{1/2} ||grad x||_2^{1/2} (d = 2)
    def gagliardo_nirenberg():
        x = _random_band_element(grid, theta, rng, grid.K)
        grad2 = math.sqrt(sum(schatten_norm(partial_derivative(x, j), 2) ** 2
                              for j in range(2)))
        ratio = schatten_norm(x, 4) / math.sqrt(schatten_norm(x, 2) * grad2)
        return True, ratio

    # report-only embeddings between block norms (constants unspecified):
    # same differential dimension alpha - d/p
    def besov_embedding_ii():
        x = _random_band_element(grid, theta, rng, grid.K)
        num = besov_norm(x, BesovSpec(0.0, 4, 2))
        den = besov_norm(x, BesovSpec(0.5, 2, 2))
        return True, num / den

    # block norm controls the plain norm one rung down
    def besov_embedding_iii():
        x = _random_band_element(grid, theta, rng, grid.K)
        return True, schatten_norm(x, 4) / besov_norm(x, BesovSpec(0.5, 2, 4))

    # L_d sits inside the (0, d, d) block scale (d = 2)
    def besov_embedding_iv():
        x = _random_band_element(grid, theta, rng, grid.K)
        return True, besov_norm(x, BesovSpec(0.0, 2, 2)) / schatten_norm(x, 2)

    # report-only: ||x y||_{B^1_{2,2}} against the mixed uniform/Besov bound
    def product_estimate():
        x = _random_band_element(grid, theta, rng, grid.K // 2)
        y = _random_band_element(grid, theta, rng, grid.K // 2)
        spec = BesovSpec(1.0, 2, 2, homogeneous=False)
        num = besov_norm(twisted_convolution(x, y), spec)
        den = (besov_norm(x, spec) * opnorm_estimate(y, iters=12)
               + opnorm_estimate(x, iters=12) * besov_norm(y, spec))
        return True, num / den

    light = max(1, min(trials, 20))
    run("hausdorff_young", trials, hausdorff_young, hard=True, notes="hard")
    run("heat_contraction", trials, heat_contraction, hard=True, notes="hard; p in {2,4}")
    run("block_decay", trials, block_decay, hard=True, notes="hard; exact ring bound")
    run("leray_contraction", trials, leray_contraction, hard=True, notes="hard")
    run("bernstein", trials, bernstein, hard=False, notes="report-only; p=2 -> q=4")
    run("gagliardo_nirenberg", trials, gagliardo_nirenberg, hard=False, notes="report-only")
    run("besov_embedding_ii", light, besov_embedding_ii, hard=False, notes="report-only")
    run("besov_embedding_iii", light, besov_embedding_iii, hard=False, notes="report-only")
    run("besov_embedding_iv", light, besov_embedding_iv, hard=False, notes="report-only")
    run("product_estimate", max(1, min(trials, 8)), product_estimate, hard=False,
        notes="report-only; uniform norms via power iteration")
    return BatteryReport(records)
