"""Symbol-level star product and deformation-strength convergence studies.

The star product of two symbols is computed by lifting both into the
deformed algebra, multiplying there, and reading the result back.  It is
calibrated so that the zero-deformation case is the pointwise product (the
lift of a pointwise product carries (2 pi)^d relative to the product of the
lifts, the same calibration the quadratic solver term uses).  The sweep
driver reruns one solver configuration across a decreasing list of
deformation strengths and tabulates strong L2 symbol distances against the
zero-deformation run of the same code path, so there is no separate
"classical solver" to diverge from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .qspace import SymbolField, ThetaMatrix, from_symbol, to_symbol, twisted_convolution
from .flow import VelocityField, leray_project
from .ns import SolverConfig, solve

__all__ = [
    "ConvergenceTable",
    "SweepRow",
    "moyal_product",
    "symmetric_moyal_product",
    "theta_sweep",
]


def _coerce_theta(theta, d: int) -> ThetaMatrix:
    if isinstance(theta, ThetaMatrix):
        if theta.d != d:
            raise ValueError(f"theta is {theta.d}x{theta.d}, expected {d}x{d}")
        return theta
    s = float(theta)
    if s == 0.0:
        return ThetaMatrix.zero(d)
    if d != 2:
        raise ValueError("scalar theta shorthand is for d=2 only")
    return ThetaMatrix.planar(s)


def moyal_product(phi: SymbolField, psi: SymbolField, theta) -> SymbolField:
    """Star product of two symbols via the deformed algebra.

    At theta = 0 this is the pointwise product up to round-off for
    band-limited inputs; the general case deforms it by the oscillatory
    twist, with the Poisson bracket as the first-order correction.
    """
    if phi.grid != psi.grid:
        raise ValueError("symbol grids differ")
    g = phi.grid
    th = _coerce_theta(theta, g.d)
    prod = twisted_convolution(from_symbol(phi, th), from_symbol(psi, th))
    return to_symbol((2.0 * np.pi) ** (-g.d) * prod)


def symmetric_moyal_product(phi: SymbolField, psi: SymbolField, theta) -> SymbolField:
    """Symmetrized star product; real for real inputs, and one order closer
    to the pointwise product (the antisymmetric first-order term cancels)."""
    return 0.5 * (moyal_product(phi, psi, theta) + moyal_product(psi, phi, theta))


# --- sweep over deformation strengths ---------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    theta_norm: float
    e_theta: float                   # sup_t L2 symbol distance to the reference run
    empirical_order: float           # slope to the next (weaker) row; nan when undefined
    run_status: str


_SWEEP_HEADER = "theta_norm,e_theta,empirical_order,run_status"


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple

    def __post_init__(self):
        norms = [r.theta_norm for r in self.rows]
        if any(b >= a for a, b in zip(norms, norms[1:])):
            raise ValueError("rows must be strictly decreasing in theta norm")

    def theta_norms(self):
        return [r.theta_norm for r in self.rows]

    def errors(self):
        return [r.e_theta for r in self.rows]

    def orders(self):
        return [r.empirical_order for r in self.rows]

    def statuses(self):
        return [r.run_status for r in self.rows]

    def errors_strictly_decreasing(self) -> bool:
        e = self.errors()
        return all(b < a for a, b in zip(e, e[1:]))

    def to_csv(self) -> str:
        lines = [_SWEEP_HEADER]
        for r in self.rows:
            lines.append(f"{r.theta_norm:.17e},{r.e_theta:.17e},"
                         f"{r.empirical_order:.17e},{r.run_status}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def _field_distance(a, b) -> float:
    return math.sqrt(sum((ak - bk).l2_norm() ** 2 for ak, bk in zip(a, b)))


def theta_sweep(base_config: SolverConfig, theta_list: Sequence,
                phi0: Optional[Sequence[SymbolField]] = None) -> ConvergenceTable:
    """Rerun one configuration across decreasing deformation strengths.

    Every member run lifts the same classical symbol datum with its own
    theta, integrates with the shared grid/dt/T, and is compared snapshot by
    snapshot (mapped back to symbols) against the zero-deformation run of
    this very code path.  Abnormal member statuses land in their row rather
    than raising.  base_config.theta is ignored.
    """
    if not theta_list:
        raise ValueError("theta_list must be nonempty")
    d = base_config.d
    grid = base_config.grid()
    thetas = [_coerce_theta(t, d) for t in theta_list]
    norms = [float(np.abs(t.as_array()).max()) for t in thetas]
    if any(b >= a for a, b in zip(norms, norms[1:])):
        raise ValueError("theta_list must be strictly decreasing in norm")

    if phi0 is None:
        datum = leray_project(base_config.initial.build(grid, ThetaMatrix.zero(d)))
        phi0 = tuple(to_symbol(c) for c in datum)
    else:
        phi0 = tuple(phi0)
        if len(phi0) != d:
            raise ValueError(f"phi0 needs {d} components, got {len(phi0)}")
        if any(p.grid != grid for p in phi0):
            raise ValueError("phi0 components live on a different grid")

    def member(theta: ThetaMatrix):
        cfg = replace(base_config, theta=theta)
        u0 = VelocityField(tuple(from_symbol(p, theta) for p in phi0))
        traj = solve(cfg, u0)
        return traj.status, [tuple(to_symbol(c) for c in f) for f in traj.fields]

    ref_status, ref_syms = member(ThetaMatrix.zero(d))
    measured = []
    for th, nm in zip(thetas, norms):
        if nm == 0.0:
            measured.append((ref_status, 0.0))
            continue
        status, syms = member(th)
        e = max((_field_distance(a, b) for a, b in zip(syms, ref_syms)), default=0.0)
        measured.append((status, e))

    rows = []
    for i, ((status, e), nm) in enumerate(zip(measured, norms)):
        order = float("nan")
        if i + 1 < len(measured):
            status2, e2 = measured[i + 1]
            nm2 = norms[i + 1]
            if (status == status2 == "completed" and e > 0.0 and e2 > 0.0
                    and nm2 > 0.0):
                order = math.log(e / e2) / math.log(nm / nm2)
        rows.append(SweepRow(nm, e, order, status))
    return ConvergenceTable(tuple(rows))
