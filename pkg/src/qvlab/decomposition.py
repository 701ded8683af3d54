"""Ito-sum decomposition of f(t, X_t) and the zero-continuous-QV verdict.

decompose() realizes f(t, X_t) = sum_k D_x f(tau_{k-1}, X-state) dX + V on a
partition; verify_zcqv() measures the included-cell squared-increment
statistic of V across a refinement ladder and turns the decay into a
pass/fail verdict.  The named suites orchestrate both per path over an
ensemble, with a deterministic worker pool.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import calculus
from ._parallel import map_chunked
from .errors import ConfigurationError
from .functions import PathFunction, dx_limsup, make_function
from .generators import GeneratorSpec, make_path
from .partitions import ExclusionSet, Partition, RefinementLadder
from .paths import SamplePath


@dataclass(frozen=True)
class DecompositionResult:
    f_path: SamplePath
    integral_path: SamplePath
    v_path: SamplePath
    exclusion_times: np.ndarray
    assumptions: str
    kink_qv_mass: float

    def reconstruction_error(self) -> float:
        resid = self.f_path.values - (self.integral_path.values + self.v_path.values)
        return float(np.max(np.abs(resid)))


def _integrand_states(f: PathFunction, x: SamplePath, cuts: np.ndarray) -> np.ndarray:
    """State fed to D_x f at each left cut time: the pre-jump value.

    At generator-marked jump times the left limit is used; elsewhere the
    cadlag value itself, since between marks the underlying dynamics are
    continuous and the grid's piecewise-constant 'left limit' would lag the
    true state by one cell.
    """
    left_cuts = cuts[:-1]
    vals = x.eval_many(left_cuts)
    marked = x.times[x.jump_marks]
    if marked.size:
        is_marked = np.isin(left_cuts, marked)
        if np.any(is_marked):
            vals = vals.copy()
            vals[is_marked] = x.eval_left_many(left_cuts[is_marked])
    return vals


def decompose(f: PathFunction, x: SamplePath, partition: Partition) -> DecompositionResult:
    """Split f(t, X_t) into the left-point Ito sum against X plus V."""
    if partition.cut_times[-1] < x.horizon:
        raise ValueError("partition must cover the path horizon")
    cuts = np.minimum(partition.cut_times, x.horizon)
    cuts = cuts[np.concatenate([[True], np.diff(cuts) > 0])]

    states = _integrand_states(f, x, cuts)
    if f.dx_exact is not None:
        eta = np.asarray(f.dx_exact(cuts[:-1], states), dtype=float)
    else:
        eta = np.asarray(
            [dx_limsup(f, float(tk), float(sk)).value for tk, sk in zip(cuts[:-1], states)]
        )
    xv = x.eval_many(cuts)
    integral = calculus.ito_cumulative(eta, x, Partition(cut_times=cuts), x.horizon)
    fv = np.asarray(f(cuts, xv), dtype=float)
    v = fv - integral

    dxsq = np.diff(xv) ** 2
    if f.nondiff_indicator is not None:
        on_kink = np.asarray(f.nondiff_indicator(cuts[1:], xv[1:]), dtype=bool)
        kink_mass = float(np.sum(dxsq[on_kink]))
    else:
        kink_mass = float("nan")

    s_times = x.jump_times(np.inf)
    if f.time_jumps:
        s_times = np.union1d(s_times, [tj for tj, _ in f.time_jumps])
    marks = np.isin(cuts, s_times)

    if f.time_independent and f.lipschitz_bound is not None:
        assumptions = "certified: locally Lipschitz, time independent"
    elif f.has_one_sided_derivatives() and f.dt_measure is not None:
        assumptions = "certified: one-sided derivatives with x-integrable time variation"
    else:
        assumptions = "assumed: differentiability conditions not certified by metadata"

    mk = lambda vals: SamplePath(times=cuts, values=vals, jump_marks=marks)
    return DecompositionResult(
        f_path=mk(fv),
        integral_path=mk(integral),
        v_path=mk(v),
        exclusion_times=s_times,
        assumptions=assumptions,
        kink_qv_mass=kink_mass,
    )


# ---------------------------------------------------------------------------
# z.c.q.v. verdict


@dataclass(frozen=True)
class ZcqvVerdict:
    levels: tuple
    meshes: tuple
    median_stat: tuple
    p90_stat: tuple
    slope: float | None
    pass_fraction: float
    passed: bool | None
    status: str

    def to_dict(self) -> dict:
        return {
            "levels": [
                {"level": lv, "mesh": m, "median_stat": md, "p90_stat": p9}
                for lv, m, md, p9 in zip(self.levels, self.meshes, self.median_stat, self.p90_stat)
            ],
            "slope": self.slope,
            "pass_fraction": self.pass_fraction,
            "pass": self.passed,
            "status": self.status,
        }


def summarize_zcqv(stats: np.ndarray, levels, meshes, pass_fraction: float) -> ZcqvVerdict:
    """stats: (n_paths, n_levels) statistic values.

    Pass when the finest-level median is at most pass_fraction times the
    coarsest-level median; the comparison is non-strict so grid-exact zero
    statistics (pure-jump processes with their jumps excluded) pass.  The
    decay slope of log median vs log mesh is fitted when all medians are
    positive.
    """
    stats = np.asarray(stats, dtype=float)
    if stats.ndim != 2:
        raise ValueError("expected (n_paths, n_levels) statistics")
    med = np.median(stats, axis=0)
    p90 = np.percentile(stats, 90, axis=0)
    n_levels = stats.shape[1]
    if n_levels < 3:
        passed, status = None, "inconclusive: fewer than 3 levels"
    else:
        passed = bool(med[-1] <= pass_fraction * med[0])
        status = "ok"
    slope = None
    if n_levels >= 2 and np.all(med > 0):
        coef = np.polyfit(np.log(np.asarray(meshes, dtype=float)), np.log(med), 1)
        slope = float(coef[0])
    return ZcqvVerdict(
        levels=tuple(levels),
        meshes=tuple(float(m) for m in meshes),
        median_stat=tuple(float(v) for v in med),
        p90_stat=tuple(float(v) for v in p90),
        slope=slope,
        pass_fraction=pass_fraction,
        passed=passed,
        status=status,
    )


def verify_zcqv(
    v_paths,
    ladder: RefinementLadder,
    exclusions,
    t: float,
    pass_fraction: float = 0.1,
    levels=None,
) -> ZcqvVerdict:
    """Per-level included-cell statistic of V across the ensemble.

    v_paths: one SamplePath or a sequence; exclusions: one ExclusionSet,
    a sequence aligned with v_paths, or None for the empty set.
    """
    if isinstance(v_paths, SamplePath):
        v_paths = [v_paths]
    n = len(v_paths)
    if exclusions is None:
        exclusions = [ExclusionSet.empty()] * n
    elif isinstance(exclusions, ExclusionSet):
        exclusions = [exclusions] * n
    stats = np.empty((n, len(ladder)))
    for i, (vp, s) in enumerate(zip(v_paths, exclusions)):
        for j, part in enumerate(ladder):
            stats[i, j] = calculus.zcqv_statistic(vp, part, s, t)
    if levels is None:
        levels = tuple(range(len(ladder)))
    return summarize_zcqv(stats, levels, ladder.meshes, pass_fraction)


# ---------------------------------------------------------------------------
# named experiment suites


@dataclass(frozen=True)
class SuiteConfig:
    generator: GeneratorSpec
    function: str = "abs"
    l_min: int = 6
    l_max: int = 12
    n_paths: int = 200
    pass_fraction: float = 0.1
    jump_threshold: float = float("inf")
    workers: int = 1


@dataclass(frozen=True)
class SuiteResult:
    name: str
    verdict: ZcqvVerdict
    expected_pass: bool
    details: dict

    @property
    def ok(self) -> bool:
        return self.verdict.passed == self.expected_pass

    def to_dict(self) -> dict:
        out = {
            "experiment": self.name,
            "expected_pass": self.expected_pass,
            "ok": self.ok,
            "verdict": self.verdict.to_dict(),
        }
        out.update(self.details)
        return out


def _suite_levels(cfg: SuiteConfig):
    return tuple(range(cfg.l_min, cfg.l_max + 1))


def _decomposition_stats(lo, hi, genspec: GeneratorSpec, fexpr: str, cfg: SuiteConfig, extra_s_times):
    """Per-path task: generate, decompose on the path grid, statistic per level."""
    f = make_function(fexpr)
    out = []
    for i in range(lo, hi):
        path = make_path(genspec, i)
        ladder = RefinementLadder.dyadic(path.horizon, cfg.l_min, cfg.l_max, grid_times=path.times)
        full_part = Partition(cut_times=path.times)
        result = decompose(f, path, full_part)
        s = ExclusionSet(times=np.concatenate([result.exclusion_times, extra_s_times]))
        row = [calculus.zcqv_statistic(result.v_path, part, s, path.horizon) for part in ladder]
        out.append((tuple(row), result.kink_qv_mass, result.v_path.values[-1]))
    return out


def _raw_zcqv_stats(lo, hi, genspec: GeneratorSpec, cfg: SuiteConfig):
    """Negative control task: the statistic on X itself, S = its jumps."""
    out = []
    for i in range(lo, hi):
        path = make_path(genspec, i)
        ladder = RefinementLadder.dyadic(path.horizon, cfg.l_min, cfg.l_max, grid_times=path.times)
        s = ExclusionSet.from_jumps(path, threshold=cfg.jump_threshold)
        out.append(tuple(calculus.zcqv_statistic(path, part, s, path.horizon) for part in ladder))
    return out


def _cross_stats(lo, hi, zspec: GeneratorSpec, yspec: GeneratorSpec, cfg: SuiteConfig):
    """Included-cell |dZ dY| per level, S = Z's jumps; plus the S-empty column."""
    out = []
    for i in range(lo, hi):
        z = make_path(zspec, i)
        y = make_path(yspec, i)
        ladder = RefinementLadder.dyadic(z.horizon, cfg.l_min, cfg.l_max, grid_times=z.times)
        s = ExclusionSet.from_jumps(z, y, threshold=cfg.jump_threshold)
        with_s = tuple(calculus.cross_statistic(z, y, part, s, z.horizon) for part in ladder)
        no_s = tuple(
            calculus.cross_statistic(z, y, part, ExclusionSet.empty(), z.horizon) for part in ladder
        )
        out.append((with_s, no_s))
    return out


def _sum_zcqv_stats(lo, hi, spec1: GeneratorSpec, spec2: GeneratorSpec, cfg: SuiteConfig):
    """Statistic for Z1 + Z2 with S = the union of both jump sets."""
    out = []
    for i in range(lo, hi):
        z1 = make_path(spec1, i)
        z2 = make_path(spec2, i)
        v = SamplePath(
            times=z1.times,
            values=z1.values + z2.values,
            jump_marks=z1.jump_marks | z2.jump_marks,
        )
        ladder = RefinementLadder.dyadic(v.horizon, cfg.l_min, cfg.l_max, grid_times=v.times)
        s = ExclusionSet.from_jumps(z1, z2, threshold=cfg.jump_threshold)
        out.append(tuple(calculus.zcqv_statistic(v, part, s, v.horizon) for part in ladder))
    return out


def _brownian_spec(cfg: SuiteConfig) -> GeneratorSpec:
    return replace(cfg.generator, kind="brownian")


def _jump_diffusion_spec(cfg: SuiteConfig) -> GeneratorSpec:
    spec = cfg.generator
    rate = spec.jump_rate if spec.jump_rate > 0 else 3.0
    return replace(spec, kind="jump_diffusion", jump_rate=rate)


def _compound_poisson_spec(cfg: SuiteConfig, seed_offset: int = 0) -> GeneratorSpec:
    spec = cfg.generator
    rate = spec.jump_rate if spec.jump_rate > 0 else 3.0
    return replace(spec, kind="compound_poisson", jump_rate=rate, seed=spec.seed + seed_offset)


def run_suite(name: str, cfg: SuiteConfig) -> SuiteResult:
    levels = _suite_levels(cfg)

    if name in ("tanaka", "moving_kink", "moving_kink_jump"):
        if name == "tanaka":
            genspec, fexpr, extra = _brownian_spec(cfg), cfg.function or "abs", np.empty(0)
        else:
            fexpr = "moving_kink(k_jump=0.5)"
            extra = np.asarray([0.5])
            genspec = _brownian_spec(cfg) if name == "moving_kink" else _jump_diffusion_spec(cfg)
        rows = map_chunked(
            _decomposition_stats, cfg.n_paths, cfg.workers, args=(genspec, fexpr, cfg, extra)
        )
        stats = np.asarray([r[0] for r in rows])
        verdict = summarize_zcqv(stats, levels, _meshes(genspec, levels), cfg.pass_fraction)
        kink = [r[1] for r in rows]
        details = {
            "generator": genspec.kind,
            "function": fexpr,
            "median_kink_qv_mass": float(np.median(kink)),
            "mean_final_v": float(np.mean([r[2] for r in rows])),
        }
        return SuiteResult(name=name, verdict=verdict, expected_pass=True, details=details)

    if name == "negative_control":
        genspec = _brownian_spec(cfg)
        stats = np.asarray(map_chunked(_raw_zcqv_stats, cfg.n_paths, cfg.workers, args=(genspec, cfg)))
        verdict = summarize_zcqv(stats, levels, _meshes(genspec, levels), cfg.pass_fraction)
        details = {"generator": genspec.kind, "function": None, "note": "asserts the failure"}
        return SuiteResult(name=name, verdict=verdict, expected_pass=False, details=details)

    if name == "cross_variation":
        zspec = _compound_poisson_spec(cfg)
        yspec = replace(_brownian_spec(cfg), seed=cfg.generator.seed + 104729)
        rows = map_chunked(_cross_stats, cfg.n_paths, cfg.workers, args=(zspec, yspec, cfg))
        with_s = np.asarray([r[0] for r in rows])
        no_s = np.asarray([r[1] for r in rows])
        verdict = summarize_zcqv(with_s, levels, _meshes(zspec, levels), cfg.pass_fraction)
        details = {
            "generator": "compound_poisson x brownian",
            "function": None,
            "exploratory_no_exclusion_median": [float(v) for v in np.median(no_s, axis=0)],
        }
        return SuiteResult(name=name, verdict=verdict, expected_pass=True, details=details)

    if name == "zcqv_sum":
        spec1 = _compound_poisson_spec(cfg)
        spec2 = _compound_poisson_spec(cfg, seed_offset=7919)
        stats = np.asarray(
            map_chunked(_sum_zcqv_stats, cfg.n_paths, cfg.workers, args=(spec1, spec2, cfg))
        )
        verdict = summarize_zcqv(stats, levels, _meshes(spec1, levels), cfg.pass_fraction)
        details = {"generator": "compound_poisson + compound_poisson", "function": None}
        return SuiteResult(name=name, verdict=verdict, expected_pass=True, details=details)

    raise ConfigurationError(f"unknown suite {name!r}")


def _meshes(genspec: GeneratorSpec, levels) -> tuple:
    return tuple(genspec.horizon * 2.0 ** -float(lv) for lv in levels)


SUITES = ("tanaka", "moving_kink", "moving_kink_jump", "cross_variation", "zcqv_sum", "negative_control")
