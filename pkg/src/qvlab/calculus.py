"""Partition sums: covariation approximants, jump sums, the included-cell
(z.c.q.v.) statistic and left-point Ito sums.

Scalar statistics run through the compensated kernels (ascending cell order,
Kahan accumulation) so results are deterministic and stable up to 2^14+
cells.  The ladder sweep over a whole t-grid uses a cumulative formulation:
the covariation up to an arbitrary t splits exactly into full cells plus one
boundary cell under the stopped-value semantics.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .partitions import ExclusionSet, Partition, RefinementLadder, inclusion_mask
from .paths import SamplePath


def _check_pair(x: SamplePath, y: SamplePath) -> None:
    if x.horizon != y.horizon:
        raise ValueError("paths must share the horizon")


def _stopped_values(path: SamplePath, cuts: np.ndarray, t: float) -> np.ndarray:
    stopped = np.minimum(np.minimum(cuts, t), path.horizon)
    return np.ascontiguousarray(path.eval_many(stopped))


def _require_cover(partition: Partition, t: float) -> None:
    if partition.cut_times[-1] < t:
        raise ValueError("partition does not cover the evaluation time")


def qv_partition(x: SamplePath, y: SamplePath, partition: Partition, t: float) -> float:
    """Covariation along the partition with stopped increments.

    Sum over cells of (X_{tau_k ^ t} - X_{tau_{k-1} ^ t}) (Y_... ); cells at
    or beyond t contribute exactly zero.
    """
    _check_pair(x, y)
    _require_cover(partition, t)
    xv = _stopped_values(x, partition.cut_times, t)
    yv = _stopped_values(y, partition.cut_times, t)
    return float(_kernels.qv_sum(xv, yv))


def jump_sum(x: SamplePath, y: SamplePath, t: float, threshold: float) -> float:
    """Sum of dX_s dY_s over recorded jump times s <= t of either path."""
    _check_pair(x, y)
    times = np.union1d(x.jump_times(threshold), y.jump_times(threshold))
    times = times[times <= t]
    if times.size == 0:
        return 0.0
    dx = x.eval_many(times) - x.eval_left_many(times)
    dy = y.eval_many(times) - y.eval_left_many(times)
    return kahan_sum(dx * dy)


def kahan_sum(terms: np.ndarray) -> float:
    """Compensated sum in array order (same loop as the kernels)."""
    s = 0.0
    c = 0.0
    for term in terms.tolist():
        t1 = term - c
        t2 = s + t1
        c = (t2 - s) - t1
        s = t2
    return s


def zcqv_statistic(x: SamplePath, partition: Partition, exclusions: ExclusionSet, t: float) -> float:
    """Included-cell sum of squared increments: the zero-continuous-QV
    diagnostic.  Vanishes across a refining ladder iff the path has no
    continuous quadratic variation once S absorbs its jumps."""
    _require_cover(partition, t)
    mask = inclusion_mask(partition, exclusions, t)
    cuts = np.minimum(partition.cut_times, x.horizon)
    xv = np.ascontiguousarray(x.eval_many(cuts))
    return float(_kernels.masked_qv_sum(xv, xv, _as_mask(mask)))


def cross_statistic(x: SamplePath, y: SamplePath, partition: Partition, exclusions: ExclusionSet, t: float) -> float:
    """Included-cell sum of |dX dY| (covariation-existence diagnostic)."""
    _check_pair(x, y)
    _require_cover(partition, t)
    mask = inclusion_mask(partition, exclusions, t)
    cuts = np.minimum(partition.cut_times, x.horizon)
    xv = np.ascontiguousarray(x.eval_many(cuts))
    yv = np.ascontiguousarray(y.eval_many(cuts))
    return float(_kernels.masked_abs_sum(xv, yv, _as_mask(mask)))


def _as_mask(mask: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(mask.astype(np.uint8))


def ito_integral(integrand: np.ndarray, y: SamplePath, partition: Partition, t: float) -> float:
    """Left-point (Ito) Riemann sum: sum_k eta_{k-1} (Y_{tau_k ^ t} - Y_{tau_{k-1} ^ t}).

    `integrand` supplies eta at every left cut time (length = number of cells).
    """
    return float(ito_cumulative(integrand, y, partition, t)[-1])


def ito_cumulative(integrand: np.ndarray, y: SamplePath, partition: Partition, t: float) -> np.ndarray:
    _require_cover(partition, t)
    eta = np.ascontiguousarray(np.asarray(integrand, dtype=np.float64))
    if eta.size != partition.n_cells:
        raise ValueError("integrand must supply one value per partition cell")
    yv = _stopped_values(y, partition.cut_times, t)
    out = np.empty(yv.size)
    _kernels.ito_cumsum(eta, yv, out)
    return out


# ---------------------------------------------------------------------------
# ladder sweep and report


@dataclass(frozen=True)
class CovariationReport:
    """Per-level, per-t statistics for one (X, Y) pair.

    full = included + excluded by construction; continuous_part = full - jumps.
    """

    levels: tuple
    meshes: tuple
    t_grid: np.ndarray
    full: np.ndarray
    jumps: np.ndarray
    continuous_part: np.ndarray
    zcqv: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "mesh", "t", "full_sum", "jump_sum", "continuous_part", "zcqv_stat"])
        for i, lev in enumerate(self.levels):
            for j, t in enumerate(self.t_grid):
                w.writerow(
                    [
                        lev,
                        repr(float(self.meshes[i])),
                        repr(float(t)),
                        repr(float(self.full[i, j])),
                        repr(float(self.jumps[i, j])),
                        repr(float(self.continuous_part[i, j])),
                        repr(float(self.zcqv[i, j])),
                    ]
                )
        return buf.getvalue()


def _sweep_stopped(x: SamplePath, y: SamplePath, partition: Partition, t_grid: np.ndarray):
    """Stopped covariation at every t in one pass.

    With tau_j <= t < tau_{j+1}, the stopped sum equals the cumulative sum
    through cell j plus the boundary term (X_t - X_{tau_j})(Y_t - Y_{tau_j}).
    """
    cuts = np.minimum(partition.cut_times, x.horizon)
    xv = x.eval_many(cuts)
    yv = y.eval_many(cuts)
    cum = np.concatenate([[0.0], np.cumsum(np.diff(xv) * np.diff(yv))])
    j = np.searchsorted(partition.cut_times, t_grid, side="right") - 1
    j = np.clip(j, 0, partition.n_cells)
    xt = x.eval_many(t_grid)
    yt = y.eval_many(t_grid)
    boundary = np.where(j < partition.n_cells, (xt - xv[j]) * (yt - yv[j]), 0.0)
    return cum[j] + boundary


def _sweep_included(x, y, partition: Partition, exclusions: ExclusionSet, t_grid: np.ndarray):
    """Included-cell sums at every t: only cells with tau_k < t count, so the
    cell ending exactly at t and any partial boundary cell are dropped."""
    cuts = np.minimum(partition.cut_times, x.horizon)
    xv = x.eval_many(cuts)
    yv = y.eval_many(cuts)
    dxdy = np.diff(xv) * np.diff(yv)
    mask = inclusion_mask(partition, exclusions, np.inf)
    cum = np.concatenate([[0.0], np.cumsum(np.where(mask, dxdy, 0.0))])
    m = np.searchsorted(partition.cut_times[1:], t_grid, side="left")
    return cum[m]


def covariation_ladder(
    x: SamplePath,
    y: SamplePath,
    ladder: RefinementLadder,
    exclusions: ExclusionSet,
    t_grid: np.ndarray,
    threshold: float = np.inf,
    levels: tuple | None = None,
) -> CovariationReport:
    _check_pair(x, y)
    t_grid = np.asarray(t_grid, dtype=float)
    n_l, n_t = len(ladder), t_grid.size
    full = np.empty((n_l, n_t))
    zc = np.empty((n_l, n_t))
    jumps = np.empty((n_l, n_t))
    jump_row = np.asarray([jump_sum(x, y, t, threshold) for t in t_grid])
    for i, part in enumerate(ladder):
        full[i] = _sweep_stopped(x, y, part, t_grid)
        zc[i] = _sweep_included(x, y, part, exclusions, t_grid)
        jumps[i] = jump_row
    cont = full - jumps
    return CovariationReport(
        levels=tuple(levels) if levels is not None else tuple(range(n_l)),
        meshes=tuple(ladder.meshes),
        t_grid=t_grid,
        full=full,
        jumps=jumps,
        continuous_part=cont,
        zcqv=zc,
    )


def ucp_exceedance(reports: list, eps: float) -> list:
    """Fraction of paths with sup_t |full_level - full_finest| > eps, per level."""
    n_l = reports[0].full.shape[0]
    out = []
    for i in range(n_l):
        count = 0
        for rep in reports:
            if np.max(np.abs(rep.full[i] - rep.full[-1])) > eps:
                count += 1
        out.append(count / len(reports))
    return out
