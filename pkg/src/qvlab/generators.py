"""Reproducible path generators.

Each path is a pure function of (spec, path index): the per-path RNG is a
Philox counter-based stream keyed by (seed, index), so ensembles are
identical regardless of worker count or generation order, and any single
path can be replayed in isolation.

Coefficient callbacks (sigma, b, sigma_of_x) are selected by name from a
small registry so that specs stay picklable and expressible in config files;
plain Python callables are also accepted for library use.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigurationError, GenerationError
from .paths import PathEnsemble, SamplePath

KINDS = ("brownian", "euler_sde", "compound_poisson", "jump_diffusion", "lamperti_dirichlet")

_MASK64 = (1 << 64) - 1


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based per-path stream: key = (seed, path index)."""
    key = ((seed & _MASK64) << 64) | (index & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# coefficient registry

_EXPR_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z_0-9]*)\s*(?:\((.*)\))?\s*$")


def parse_expression(expr: str):
    """Parse 'name(a=1, b=2)' or 'name(1, 2)' into (name, args, kwargs)."""
    m = _EXPR_RE.match(expr)
    if not m:
        raise ConfigurationError(f"cannot parse expression {expr!r}")
    name, body = m.group(1), m.group(2)
    args, kwargs = [], {}
    if body and body.strip():
        for part in body.split(","):
            part = part.strip()
            if "=" in part:
                k, v = part.split("=", 1)
                kwargs[k.strip()] = _parse_value(v.strip())
            else:
                args.append(_parse_value(part))
    return name, args, kwargs


def _parse_value(s: str):
    try:
        return float(s)
    except ValueError:
        return s.strip("'\"")


def _coef_const(c=1.0):
    c = float(c)
    return lambda t, x: c + 0.0 * np.asarray(x)


def _coef_linear(a=0.0, b=1.0):
    a, b = float(a), float(b)
    return lambda t, x: a + b * np.asarray(x)


def _coef_step(lo=1.0, hi=2.0, at=0.0):
    # lo for x <= at, hi for x > at
    lo, hi, at = float(lo), float(hi), float(at)
    return lambda t, x: np.where(np.asarray(x) > at, hi, lo)


def _coef_abs_shift(c=0.5, floor=0.5):
    # floor + |x - c|: positive, merely Lipschitz
    c, floor = float(c), float(floor)
    return lambda t, x: floor + np.abs(np.asarray(x) - c)


_COEFFICIENTS: dict[str, Callable] = {
    "const": _coef_const,
    "linear": _coef_linear,
    "step": _coef_step,
    "abs_shift": _coef_abs_shift,
}


def make_coefficient(spec) -> Callable:
    """Resolve a coefficient: callable passthrough or registry expression."""
    if callable(spec):
        return spec
    name, args, kwargs = parse_expression(spec)
    if name not in _COEFFICIENTS:
        raise ConfigurationError(f"unknown coefficient {name!r}")
    return _COEFFICIENTS[name](*args, **kwargs)


# ---------------------------------------------------------------------------
# jump size laws


@dataclass(frozen=True)
class JumpLaw:
    name: str
    params: tuple

    def sample(self, rng: np.random.Generator) -> float:
        if self.name == "normal":
            mu, sd = self.params
            return mu + sd * rng.standard_normal()
        if self.name == "uniform":
            a, b = self.params
            return a + (b - a) * rng.random()
        if self.name == "const":
            return self.params[0]
        raise ConfigurationError(f"unknown jump law {self.name!r}")

    @property
    def mean(self) -> float:
        if self.name == "normal":
            return self.params[0]
        if self.name == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        if self.name == "const":
            return self.params[0]
        raise ConfigurationError(f"unknown jump law {self.name!r}")


def make_jump_law(spec) -> JumpLaw:
    if isinstance(spec, JumpLaw):
        return spec
    name, args, kwargs = parse_expression(spec)
    defaults = {"normal": (0.0, 1.0), "uniform": (-1.0, 1.0), "const": (1.0,)}
    if name not in defaults:
        raise ConfigurationError(f"unknown jump law {name!r}")
    vals = list(defaults[name])
    for i, a in enumerate(args):
        vals[i] = float(a)
    return JumpLaw(name=name, params=tuple(float(v) for v in vals))


# ---------------------------------------------------------------------------
# generator spec


@dataclass(frozen=True)
class GeneratorSpec:
    """Everything needed to reproduce an ensemble, including the seed."""

    kind: str = "brownian"
    n_steps: int = 4096
    horizon: float = 1.0
    x0: float = 0.0
    sigma: object = "const(1.0)"
    b: object = "const(0.0)"
    jump_rate: float = 0.0
    jump_law: object = "normal(0.0, 1.0)"
    alpha: float = 1.0
    sigma_of_x: object = "const(1.0)"
    x_grid_points: int = 10001
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown generator kind {self.kind!r}")
        if self.n_steps < 1:
            raise ConfigurationError("n_steps must be >= 1")
        if not (self.horizon > 0):
            raise ConfigurationError("horizon must be positive")
        if self.jump_rate < 0:
            raise ConfigurationError("jump_rate must be nonnegative")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigurationError("alpha must lie in (0, 1]")
        if self.kind in ("compound_poisson", "jump_diffusion"):
            if self.kind == "compound_poisson" and self.jump_rate <= 0:
                raise ConfigurationError("compound_poisson requires jump_rate > 0")
            dt = self.horizon / self.n_steps
            if self.jump_rate * dt > 0.5:
                raise ConfigurationError(
                    f"expected jumps per grid cell = {self.jump_rate * dt:.3g} > 0.5; "
                    "use a finer grid (larger n_steps) for this jump rate"
                )

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def mean_drift_variation(self, t: float):
        """E int_0^t |dA| for the model's martingale + drift split, or None.

        brownian: A = 0.  compound_poisson: A is the compensator rate*E[J]*s.
        euler/jump_diffusion: only available for constant b.
        """
        if self.kind == "brownian":
            return 0.0
        if self.kind == "compound_poisson":
            return abs(make_jump_law(self.jump_law).mean) * self.jump_rate * t
        if self.kind in ("euler_sde", "jump_diffusion"):
            b_const = _constant_value(self.b)
            if b_const is None:
                return None
            total = abs(b_const) * t
            if self.kind == "jump_diffusion":
                total += abs(make_jump_law(self.jump_law).mean) * self.jump_rate * t
            return total
        return None

    def qv_rate(self):
        """sigma(t,x)^2 callback for model [X]^c cell increments, or None."""
        if self.kind == "brownian":
            return lambda t, x: 1.0 + 0.0 * np.asarray(x)
        if self.kind in ("euler_sde", "jump_diffusion"):
            sig = make_coefficient(self.sigma)
            return lambda t, x: np.asarray(sig(t, x)) ** 2
        if self.kind == "compound_poisson":
            return lambda t, x: 0.0 * np.asarray(x)
        return None


def _constant_value(coef_spec):
    if callable(coef_spec):
        return None
    name, args, kwargs = parse_expression(coef_spec)
    if name != "const":
        return None
    if args:
        return float(args[0])
    return float(kwargs.get("c", 1.0))


# ---------------------------------------------------------------------------
# per-path construction


def _brownian_path(spec: GeneratorSpec, rng) -> SamplePath:
    dt = spec.dt
    dw = rng.standard_normal(spec.n_steps) * math.sqrt(dt)
    values = np.empty(spec.n_steps + 1)
    values[0] = spec.x0
    values[1:] = spec.x0 + np.cumsum(dw)
    marks = np.zeros(spec.n_steps + 1, dtype=bool)
    return SamplePath(times=spec.grid(), values=values, jump_marks=marks)


def _euler_path(spec: GeneratorSpec, rng) -> SamplePath:
    dt = spec.dt
    sqdt = math.sqrt(dt)
    sigma = make_coefficient(spec.sigma)
    b = make_coefficient(spec.b)
    z = rng.standard_normal(spec.n_steps)
    times = spec.grid()
    values = np.empty(spec.n_steps + 1)
    x = spec.x0
    values[0] = x
    for i in range(spec.n_steps):
        t = times[i]
        s = float(sigma(t, x))
        drift = float(b(t, x))
        if not (math.isfinite(s) and math.isfinite(drift)):
            raise GenerationError(f"non-finite coefficient at (t={t!r}, x={x!r})")
        x = x + drift * dt + s * sqdt * z[i]
        values[i + 1] = x
    marks = np.zeros(spec.n_steps + 1, dtype=bool)
    return SamplePath(times=times, values=values, jump_marks=marks)


def _draw_jump_cells(spec: GeneratorSpec, rng) -> tuple:
    """Poisson event times snapped to grid cells, one jump per cell.

    A jump in (times[c-1], times[c]] is realized at grid index c; collisions
    are resampled so the exact bookkeeping of one jump per cell holds.
    """
    n = spec.n_steps
    dt = spec.dt
    count = int(rng.poisson(spec.jump_rate * spec.horizon))
    cells: list[int] = []
    occupied = set()
    for _ in range(count):
        for _attempt in range(1000):
            u = rng.random() * spec.horizon
            c = min(max(int(math.ceil(u / dt)), 1), n)
            if c not in occupied:
                occupied.add(c)
                cells.append(c)
                break
        else:
            raise GenerationError("could not place jump without cell collision")
    cells.sort()
    law = make_jump_law(spec.jump_law)
    sizes = [law.sample(rng) for _ in cells]
    return cells, sizes


def _compound_poisson_path(spec: GeneratorSpec, rng) -> SamplePath:
    n = spec.n_steps
    cells, sizes = _draw_jump_cells(spec, rng)
    jump_at = np.zeros(n + 1)
    marks = np.zeros(n + 1, dtype=bool)
    for c, j in zip(cells, sizes):
        jump_at[c] = j
        marks[c] = True
    values = spec.x0 + np.cumsum(jump_at)
    values[0] = spec.x0
    return SamplePath(times=spec.grid(), values=values, jump_marks=marks)


def _jump_diffusion_path(spec: GeneratorSpec, rng) -> SamplePath:
    # draw order is fixed: diffusion normals, then the Poisson stream
    dt = spec.dt
    sqdt = math.sqrt(dt)
    sigma = make_coefficient(spec.sigma)
    b = make_coefficient(spec.b)
    z = rng.standard_normal(spec.n_steps)
    cells, sizes = _draw_jump_cells(spec, rng)
    jump_at = np.zeros(spec.n_steps + 1)
    marks = np.zeros(spec.n_steps + 1, dtype=bool)
    for c, j in zip(cells, sizes):
        jump_at[c] = j
        marks[c] = True
    times = spec.grid()
    values = np.empty(spec.n_steps + 1)
    x = spec.x0
    values[0] = x
    for i in range(spec.n_steps):
        t = times[i]
        s = float(sigma(t, x))
        drift = float(b(t, x))
        if not (math.isfinite(s) and math.isfinite(drift)):
            raise GenerationError(f"non-finite coefficient at (t={t!r}, x={x!r})")
        x = x + drift * dt + s * sqdt * z[i] + jump_at[i + 1]
        values[i + 1] = x
    return SamplePath(times=times, values=values, jump_marks=marks)


# ---------------------------------------------------------------------------
# Lamperti-type transform generator


@dataclass(frozen=True)
class MonotoneTransform:
    """Tabulated strictly increasing map with interpolated inverse."""

    x_tab: np.ndarray
    h_tab: np.ndarray

    def forward(self, x):
        return np.interp(x, self.x_tab, self.h_tab)

    def inverse(self, y):
        return np.interp(y, self.h_tab, self.x_tab)


def build_transform(spec: GeneratorSpec) -> MonotoneTransform:
    """Tabulate h(x) = int_0^x sigma(y)^(-2 alpha) dy by midpoint quadrature.

    The x-range is grown until h covers +- 8 sqrt(horizon) around h(x0), so
    Brownian Y-values stay inside the inverse's tabulated range.  Midpoint
    cells never evaluate sigma at declared discontinuity points on the grid
    edges, which keeps merely-measurable sigma usable.
    """
    sig = make_coefficient(spec.sigma_of_x)
    power = -2.0 * spec.alpha
    span = 8.0 * math.sqrt(spec.horizon)
    radius = max(1.0, span)
    for _ in range(40):
        x_tab = np.linspace(spec.x0 - radius, spec.x0 + radius, spec.x_grid_points)
        mid = 0.5 * (x_tab[:-1] + x_tab[1:])
        dens = np.asarray(sig(0.0, mid), dtype=float) ** power
        if not np.all(np.isfinite(dens)) or np.any(dens <= 0):
            raise GenerationError("sigma_of_x^(-2 alpha) must be positive and finite")
        steps = dens * np.diff(x_tab)
        h_tab = np.concatenate([[0.0], np.cumsum(steps)])
        if not np.all(np.diff(h_tab) > 0):
            raise GenerationError("h tabulation is not strictly increasing")
        # normalize to the canonical h(x) = int_0^x (when 0 is in range)
        h_tab = h_tab - float(np.interp(0.0, x_tab, h_tab))
        h0 = float(np.interp(spec.x0, x_tab, h_tab))
        if h_tab[-1] - h0 >= span and h0 - h_tab[0] >= span:
            return MonotoneTransform(x_tab=x_tab, h_tab=h_tab)
        radius *= 2.0
    raise GenerationError(
        "could not size the h tabulation range (h may be bounded: sigma^(-2 alpha) "
        "has integrable tails on the simulated range)"
    )


@dataclass(frozen=True)
class LampertiResult:
    x: PathEnsemble
    y: PathEnsemble
    transform: MonotoneTransform


def _lamperti_path(spec: GeneratorSpec, rng, transform: MonotoneTransform) -> tuple:
    y0 = float(transform.forward(spec.x0))
    yspec = replace(spec, kind="brownian", x0=y0)
    ypath = _brownian_path(yspec, rng)
    xvals = transform.inverse(ypath.values)
    xpath = SamplePath(times=ypath.times, values=xvals, jump_marks=np.zeros_like(ypath.jump_marks))
    return xpath, ypath


def gen_lamperti_dirichlet(spec: GeneratorSpec, n_paths: int) -> LampertiResult:
    """Simulate Y as Brownian motion and return both Y and X = h^{-1}(Y)."""
    spec.validate()
    transform = build_transform(spec)
    xs, ys, seeds = [], [], []
    for i in range(n_paths):
        xp, yp = _lamperti_path(spec, path_rng(spec.seed, i), transform)
        xs.append(xp)
        ys.append(yp)
        seeds.append((spec.seed, i))
    meta = {"kind": spec.kind, "seed": spec.seed}
    return LampertiResult(
        x=PathEnsemble(paths=tuple(xs), seeds=tuple(seeds), meta=meta),
        y=PathEnsemble(paths=tuple(ys), seeds=tuple(seeds), meta=meta),
        transform=transform,
    )


# ---------------------------------------------------------------------------
# public entry points

_BUILDERS = {
    "brownian": _brownian_path,
    "euler_sde": _euler_path,
    "compound_poisson": _compound_poisson_path,
    "jump_diffusion": _jump_diffusion_path,
}


def make_path(spec: GeneratorSpec, index: int) -> SamplePath:
    """Build path `index` of the ensemble; replay-exact for a given spec."""
    spec.validate()
    rng = path_rng(spec.seed, index)
    if spec.kind == "lamperti_dirichlet":
        transform = build_transform(spec)
        xp, _ = _lamperti_path(spec, rng, transform)
        return xp
    return _BUILDERS[spec.kind](spec, rng)


def generate(spec: GeneratorSpec, n_paths: int) -> PathEnsemble:
    """Generate an ensemble; pure function of (spec, n_paths)."""
    spec.validate()
    if n_paths < 1:
        raise ConfigurationError("n_paths must be >= 1")
    if spec.kind == "lamperti_dirichlet":
        return gen_lamperti_dirichlet(spec, n_paths).x
    paths = tuple(make_path(spec, i) for i in range(n_paths))
    seeds = tuple((spec.seed, i) for i in range(n_paths))
    return PathEnsemble(paths=paths, seeds=seeds, meta={"kind": spec.kind, "seed": spec.seed})
