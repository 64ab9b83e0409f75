"""Heat semigroup, Duhamel integrals, Leray projection, decay profiling.

The heat semigroup acts diagonally on coefficient arrays (multiplier
``exp(-t |xi|^2)``), so everything here is cheap elementwise work; the
only nontrivial pieces are the divergence-free projector and the
trapezoidal mild-form integral used by the Picard iteration.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .qspace import (
    QElement,
    fourier_multiplier,
    partial_derivative,
    schatten_norm,
    adjoint,
    adjoint_defect,
    _require_compat,
)

__all__ = [
    "VelocityField",
    "heat",
    "leray_project",
    "duhamel",
    "heat_decay_profile",
    "ProfileTable",
]


class VelocityField:
    """A d-tuple of coefficient arrays sharing one grid and one deformation."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[QElement]):
        components = tuple(components)
        if not components:
            raise ValueError("velocity field needs at least one component")
        first = components[0]
        for c in components[1:]:
            _require_compat(first, c)
        if len(components) != first.grid.d:
            raise ValueError(
                f"expected {first.grid.d} components for a d={first.grid.d} grid, "
                f"got {len(components)}")
        object.__setattr__(self, "components", components)

    def __setattr__(self, name, value):
        raise AttributeError("VelocityField is immutable")

    @classmethod
    def zeros(cls, grid, theta) -> "VelocityField":
        return cls(tuple(QElement.zeros(grid, theta) for _ in range(grid.d)))

    @property
    def grid(self):
        return self.components[0].grid

    @property
    def theta(self):
        return self.components[0].theta

    @property
    def d(self) -> int:
        return self.grid.d

    def __getitem__(self, k: int) -> QElement:
        return self.components[k]

    def __iter__(self):
        return iter(self.components)

    def map(self, fn: Callable[[QElement], QElement]) -> "VelocityField":
        return VelocityField(tuple(fn(c) for c in self.components))

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(tuple(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, scalar) -> "VelocityField":
        return VelocityField(tuple(c * scalar for c in self.components))

    __rmul__ = __mul__

    def divergence(self) -> QElement:
        out = partial_derivative(self.components[0], 0)
        for j in range(1, self.d):
            out = out + partial_derivative(self.components[j], j)
        return out

    def divergence_defect(self) -> float:
        """Max |div| coefficient relative to the field's own magnitude."""
        scale = max(np.max(np.abs(c.coeffs)) for c in self.components)
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.divergence().coeffs))) / scale

    def l2_norm(self) -> float:
        return math.sqrt(sum(schatten_norm(c, 2) ** 2 for c in self.components))

    def schatten_p_norm(self, p) -> float:
        """l_p combination of the components' Schatten-p norms."""
        if p == 2:
            return self.l2_norm()
        return sum(schatten_norm(c, p) ** p for c in self.components) ** (1.0 / p)

    def h1dot_norm(self) -> float:
        total = 0.0
        for c in self.components:
            for j in range(self.d):
                total += schatten_norm(partial_derivative(c, j), 2) ** 2
        return math.sqrt(total)

    def adjoint_defect(self) -> float:
        return max(adjoint_defect(c) for c in self.components)

    def symmetrized(self) -> "VelocityField":
        return self.map(lambda c: 0.5 * (c + adjoint(c)))

    def is_self_adjoint(self, tol: float = 1e-11) -> bool:
        return self.adjoint_defect() <= tol


def heat(t: float, x: QElement) -> QElement:
    """Apply the heat semigroup at time t (multiplier exp(-t |xi|^2))."""
    if t < 0:
        raise ValueError(f"heat requires t >= 0, got {t}")
    if t == 0:
        return x
    return fourier_multiplier(x, np.exp(-t * x.grid.xi_abs2()))


def heat_field(t: float, u: VelocityField) -> VelocityField:
    return u.map(lambda c: heat(t, c))


def leray_project(u: VelocityField) -> VelocityField:
    """Project onto divergence-free fields: multiplier matrix
    delta_jk - xi_j xi_k / |xi|^2, with the zero mode passed through
    (the constant mode is already divergence-free and any other choice
    would break idempotency)."""
    grid = u.grid
    xi = grid.xi_mesh()
    abs2 = grid.xi_abs2().copy()
    abs2[grid.center()] = 1.0  # zero mode: correction term is zeroed below
    dot = np.zeros(grid.shape, dtype=np.complex128)
    for j in range(u.d):
        dot += xi[j] * u.components[j].coeffs
    dot /= abs2
    dot[grid.center()] = 0.0
    return VelocityField(tuple(
        u.components[k]._with(u.components[k].coeffs - xi[k] * dot)
        for k in range(u.d)))


def _as_uniform_samples(samples, t: float):
    """Accept either a plain sequence of elements (assumed uniform on [0, t])
    or (time, element) pairs, validated to cover [0, t] uniformly."""
    samples = list(samples)
    if not samples:
        raise ValueError("duhamel needs at least one sample")
    if isinstance(samples[0], tuple):
        stamps = np.array([s[0] for s in samples], dtype=float)
        elems = [s[1] for s in samples]
        if abs(stamps[0]) > 1e-12 or stamps[-1] < t - 1e-12:
            raise ValueError(f"sample grid [{stamps[0]}, {stamps[-1]}] does not cover [0, {t}]")
        if len(stamps) > 1:
            ds = np.diff(stamps)
            if np.max(np.abs(ds - ds[0])) > 1e-9 * max(abs(t), 1.0):
                raise ValueError("sample grid is not uniform")
        # drop samples beyond t (they are allowed but unused)
        keep = int(np.searchsorted(stamps, t + 1e-12))
        elems = elems[:keep]
        return elems
    return samples


def duhamel(samples, t: float) -> QElement:
    """Trapezoidal quadrature of integral_0^t heat(t - s) f(s) ds.

    ``samples`` holds f on a uniform time grid covering [0, t]; each
    quadrature term is a heat multiplication, so the error is O(ds^2)
    for integrands smooth in time.
    """
    if t < 0:
        raise ValueError("duhamel requires t >= 0")
    elems = _as_uniform_samples(samples, t)
    first = elems[0]
    if t == 0 or len(elems) == 1:
        return QElement.zeros(first.grid, first.theta)
    for e in elems[1:]:
        _require_compat(first, e)
    n = len(elems)
    ds = t / (n - 1)
    abs2 = first.grid.xi_abs2()
    acc = np.zeros(first.grid.shape, dtype=np.complex128)
    for i, e in enumerate(elems):
        weight = ds * (0.5 if i in (0, n - 1) else 1.0)
        acc += weight * np.exp(-(t - i * ds) * abs2) * e.coeffs
    return first._with(acc)


def duhamel_field(samples: Sequence[VelocityField], t: float) -> VelocityField:
    d = samples[0].d
    return VelocityField(tuple(
        duhamel([u.components[k] for u in samples], t) for k in range(d)))


class ProfileTable:
    """Decay-profile samples plus least-squares slopes per (k, r, p) triple.

    CSV layout: header ``t,norm,k,r,p``, one data row per sample, then one
    footer row per triple: ``slope,<fit>,<k>,<r>,<p>,<window lo>,<window hi>``.
    """

    def __init__(self, entries, slopes, window):
        self.entries = list(entries)       # (k, r, p, t, value)
        self.slopes = dict(slopes)         # (k, r, p) -> fitted slope
        self.window = tuple(window)

    def slope(self, k: int, r, p) -> float:
        return self.slopes[(k, r, p)]

    def values(self, k: int, r, p):
        return [(t, v) for (kk, rr, pp, t, v) in self.entries if (kk, rr, pp) == (k, r, p)]

    def to_csv(self) -> str:
        lines = ["t,norm,k,r,p"]
        for k, r, p, t, v in self.entries:
            lines.append(f"{t:.17e},{v:.17e},{k},{r},{p}")
        for (k, r, p), s in sorted(self.slopes.items()):
            lines.append(f"slope,{s:.17e},{k},{r},{p},{self.window[0]:.17e},{self.window[1]:.17e}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def _grad_p_norm(x: QElement, p) -> float:
    vals = [schatten_norm(partial_derivative(x, j), p) for j in range(x.grid.d)]
    if p == 2:
        return math.sqrt(sum(v * v for v in vals))
    return sum(v ** p for v in vals) ** (1.0 / p)


def heat_decay_profile(x: QElement, pairs: Iterable, times: Sequence[float],
                       window=None) -> ProfileTable:
    """Profile the smoothing ratio ||grad^k heat(t) x||_p / ||heat(t) x||_r.

    Dividing by the running r-norm cancels the datum's own heat profile, so
    the log-log slope of the ratio exposes the smoothing exponent
    -k/2 - (d/2)(1/r - 1/p) regardless of the particular initial shape.
    Triples may be given as (r, p) (meaning k = 0) or (k, r, p), with r <= p.
    """
    triples = []
    for pair in pairs:
        pair = tuple(pair)
        if len(pair) == 2:
            pair = (0,) + pair
        k, r, p = pair
        if k not in (0, 1):
            raise ValueError(f"derivative order {k} not supported (use 0 or 1)")
        if r > p:
            raise ValueError(f"need r <= p, got (r, p) = ({r}, {p})")
        triples.append((k, r, p))
    times = sorted(float(t) for t in times)
    if not times or times[0] <= 0:
        raise ValueError("times must be positive")
    if window is None:
        window = (times[0], times[-1])

    entries = []
    series = {tr: [] for tr in triples}
    for t in times:
        y = heat(t, x)
        denom_cache = {}
        for (k, r, p) in triples:
            if r not in denom_cache:
                denom_cache[r] = schatten_norm(y, r)
            num = schatten_norm(y, p) if k == 0 else _grad_p_norm(y, p)
            val = num / denom_cache[r]
            entries.append((k, r, p, t, val))
            series[(k, r, p)].append((t, val))

    slopes = {}
    for tr, pts in series.items():
        sel = [(t, v) for t, v in pts if window[0] - 1e-12 <= t <= window[1] + 1e-12]
        if len(sel) < 2:
            raise ValueError("fit window selects fewer than two samples")
        lt = np.log([t for t, _ in sel])
        lv = np.log([v for _, v in sel])
        slopes[tr] = float(np.polyfit(lt, lv, 1)[0])
    return ProfileTable(entries, slopes, window)
