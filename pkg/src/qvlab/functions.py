"""Functions f(t, x): locally Lipschitz in x, cadlag in t.

Class membership is declared, not inferred: builtins carry their one-sided
x-derivatives, the time-increment measure d_t f (signed value and total
variation over an interval, per x) and their nondifferentiability set as
analytic metadata.  The derivative convention is the limsup of difference
quotients, which equals max(left, right) wherever one-sided derivatives
exist and the true derivative wherever f is differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, UnsupportedFunctionError
from .generators import parse_expression

DIFFERENTIABLE = "differentiable"
NOT_DIFFERENTIABLE = "not_differentiable"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class PathFunction:
    """f(t, x) with optional analytic metadata.

    evaluate broadcasts over numpy arrays in x (and t).  dx_exact, when
    present, is the total limsup-convention derivative.  dt_measure(x, t0, t1)
    returns (signed, total variation) of d_t f over (t0, t1] at fixed x.
    nondiff_indicator(t, x) -> bool marks the complement of the
    differentiability set; None means unknown.
    """

    name: str
    evaluate: Callable
    dx_exact: Callable | None = None
    dx_left: Callable | None = None
    dx_right: Callable | None = None
    lipschitz_bound: Callable | None = None
    time_jumps: tuple = ()
    dt_measure: Callable | None = None
    nondiff_indicator: Callable | None = None
    time_independent: bool = True
    x_atoms: tuple = ()
    expression: str = ""

    def __call__(self, t, x):
        return self.evaluate(t, x)

    def nondiff_state(self, t, x) -> str:
        if self.nondiff_indicator is None:
            return UNKNOWN
        return NOT_DIFFERENTIABLE if bool(self.nondiff_indicator(t, x)) else DIFFERENTIABLE

    def has_one_sided_derivatives(self) -> bool:
        return self.dx_left is not None and self.dx_right is not None

    def derivative(self, t, x):
        """Limsup-convention D_x f, preferring closed-form metadata."""
        if self.dx_exact is not None:
            return self.dx_exact(t, x)
        return dx_limsup(self, t, x).value


def nabla_a(f: PathFunction, a: float, t, x):
    """Finite difference (f(t, x+a) - f(t, x)) / a."""
    if a == 0:
        raise ValueError("a must be nonzero")
    return (f(t, np.asarray(x) + a) - f(t, x)) / a


def nabla_hat(f: PathFunction, a: float, t, x):
    """Difference of right and left finite differences at width a > 0.

    Tends to D_x^+ f - D_x^- f as a decreases; identically zero for
    differentiable f in the limit.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    return nabla_a(f, a, t, x) - nabla_a(f, -a, t, x)


DEFAULT_LADDER = tuple(2.0 ** -j for j in range(4, 21))


@dataclass(frozen=True)
class LimsupDerivative:
    value: float
    rungs: tuple
    trace: tuple


def dx_limsup(f: PathFunction, t, x, rungs=DEFAULT_LADDER) -> LimsupDerivative:
    """Ladder estimate of the limsup derivative.

    Each rung records max over both difference-quotient signs at |a| = rung;
    the reported value comes from the finest rung.  For f with one-sided
    derivatives this converges to max(D_x^- f, D_x^+ f).
    """
    if not rungs:
        raise ValueError("empty rung ladder")
    trace = []
    for a in rungs:
        plus = float(nabla_a(f, a, t, x))
        minus = float(nabla_a(f, -a, t, x))
        trace.append(max(plus, minus))
    return LimsupDerivative(value=trace[-1], rungs=tuple(rungs), trace=tuple(trace))


def time_variation(f: PathFunction, x, T: float) -> float:
    """Total variation of t -> f(t, x) over (0, T]."""
    if f.dt_measure is None:
        raise UnsupportedFunctionError(f"{f.name}: no d_t measure metadata")
    signed, tv = f.dt_measure(x, 0.0, T)
    return tv


# ---------------------------------------------------------------------------
# builtins


def _no_time_measure(x, t0, t1):
    z = 0.0 * np.asarray(x, dtype=float)
    return z, z


def _sign_limsup(u):
    # limsup derivative of |.| : +1 at the kink
    return np.where(np.asarray(u) >= 0.0, 1.0, -1.0)


def _make_abs() -> PathFunction:
    return PathFunction(
        name="abs",
        evaluate=lambda t, x: np.abs(np.asarray(x, dtype=float)),
        dx_exact=lambda t, x: _sign_limsup(x),
        dx_left=lambda t, x: np.where(np.asarray(x) <= 0.0, -1.0, 1.0),
        dx_right=lambda t, x: np.where(np.asarray(x) >= 0.0, 1.0, -1.0),
        lipschitz_bound=lambda box: 1.0,
        dt_measure=_no_time_measure,
        nondiff_indicator=lambda t, x: np.asarray(x) == 0.0,
    )


def _make_relu(k=0.0) -> PathFunction:
    k = float(k)
    return PathFunction(
        name="relu",
        evaluate=lambda t, x: np.maximum(np.asarray(x, dtype=float) - k, 0.0),
        dx_exact=lambda t, x: np.where(np.asarray(x) >= k, 1.0, 0.0),
        dx_left=lambda t, x: np.where(np.asarray(x) <= k, 0.0, 1.0),
        dx_right=lambda t, x: np.where(np.asarray(x) >= k, 1.0, 0.0),
        lipschitz_bound=lambda box: 1.0,
        dt_measure=_no_time_measure,
        nondiff_indicator=lambda t, x: np.asarray(x) == k,
    )


def _make_square() -> PathFunction:
    return PathFunction(
        name="square",
        evaluate=lambda t, x: np.asarray(x, dtype=float) ** 2,
        dx_exact=lambda t, x: 2.0 * np.asarray(x, dtype=float),
        dx_left=lambda t, x: 2.0 * np.asarray(x, dtype=float),
        dx_right=lambda t, x: 2.0 * np.asarray(x, dtype=float),
        lipschitz_bound=lambda box: 2.0 * max(abs(box[2]), abs(box[3])),
        dt_measure=_no_time_measure,
        nondiff_indicator=lambda t, x: np.zeros_like(np.asarray(x), dtype=bool),
    )


def _make_piecewise_linear(k0=-0.5, c0=1.0, k1=0.5, c1=-0.5, slope=0.25) -> PathFunction:
    """slope*x + c0|x-k0| + c1|x-k1|: finitely many kinks."""
    k0, c0, k1, c1, slope = map(float, (k0, c0, k1, c1, slope))
    kinks = tuple(k for k, c in ((k0, c0), (k1, c1)) if c != 0.0)

    def ev(t, x):
        x = np.asarray(x, dtype=float)
        return slope * x + c0 * np.abs(x - k0) + c1 * np.abs(x - k1)

    def dleft(t, x):
        x = np.asarray(x)
        return slope + c0 * np.where(x <= k0, -1.0, 1.0) + c1 * np.where(x <= k1, -1.0, 1.0)

    def dright(t, x):
        x = np.asarray(x)
        return slope + c0 * np.where(x >= k0, 1.0, -1.0) + c1 * np.where(x >= k1, 1.0, -1.0)

    return PathFunction(
        name="piecewise_linear",
        evaluate=ev,
        dx_exact=lambda t, x: np.maximum(dleft(t, x), dright(t, x)),
        dx_left=dleft,
        dx_right=dright,
        lipschitz_bound=lambda box: abs(slope) + abs(c0) + abs(c1),
        dt_measure=_no_time_measure,
        nondiff_indicator=lambda t, x: np.isin(np.asarray(x), kinks),
    )


def _make_moving_kink(k_jump=0.5, k_size=1.0) -> PathFunction:
    """|x - k(t)| with k piecewise constant, jumping at t = k_jump."""
    k_jump, k_size = float(k_jump), float(k_size)

    def level(t):
        return np.where(np.asarray(t) >= k_jump, k_size, 0.0)

    def ev(t, x):
        return np.abs(np.asarray(x, dtype=float) - level(t))

    def profile(x):
        x = np.asarray(x, dtype=float)
        return np.abs(x - k_size) - np.abs(x)

    def dt_measure(x, t0, t1):
        hit = 1.0 if (t0 < k_jump <= t1) else 0.0
        signed = hit * profile(x)
        return signed, np.abs(signed)

    return PathFunction(
        name="moving_kink",
        evaluate=ev,
        dx_exact=lambda t, x: _sign_limsup(np.asarray(x) - level(t)),
        dx_left=lambda t, x: np.where(np.asarray(x) <= level(t), -1.0, 1.0),
        dx_right=lambda t, x: np.where(np.asarray(x) >= level(t), 1.0, -1.0),
        lipschitz_bound=lambda box: 1.0,
        time_jumps=((k_jump, profile),),
        dt_measure=dt_measure,
        nondiff_indicator=lambda t, x: np.asarray(x) == level(t),
        time_independent=False,
    )


def _bump_profile(c, w):
    c, w = float(c), float(w)

    def phi(x):
        u = (np.asarray(x, dtype=float) - c) / w
        out = np.zeros_like(u, dtype=float)
        m = np.abs(u) < 1.0
        out[m] = np.exp(-1.0 / (1.0 - u[m] ** 2))
        return out

    def dphi(x):
        u = (np.asarray(x, dtype=float) - c) / w
        out = np.zeros_like(u, dtype=float)
        m = np.abs(u) < 1.0
        um = u[m]
        out[m] = np.exp(-1.0 / (1.0 - um**2)) * (-2.0 * um / (1.0 - um**2) ** 2) / w
        return out

    # max |phi'| for the unit bump is ~0.79843/w (attained near |u| = 0.76)
    return phi, dphi, 0.8 / w


def _make_bump(c=0.0, w=1.0) -> PathFunction:
    phi, dphi, lip = _bump_profile(c, w)
    return PathFunction(
        name="bump",
        evaluate=lambda t, x: phi(x),
        dx_exact=lambda t, x: dphi(x),
        dx_left=lambda t, x: dphi(x),
        dx_right=lambda t, x: dphi(x),
        lipschitz_bound=lambda box: lip,
        dt_measure=_no_time_measure,
        nondiff_indicator=lambda t, x: np.zeros_like(np.asarray(x), dtype=bool),
    )


def _make_scaled_step(t1=0.5, phi="bump", c=0.0, w=1.0) -> PathFunction:
    """phi(x) * 1{t >= t1}: a single time discontinuity."""
    t1 = float(t1)
    if phi == "bump":
        prof, dprof, lip = _bump_profile(c, w)
        nondiff = lambda t, x: np.zeros_like(np.asarray(x), dtype=bool)
        dl = lambda t, x: np.where(np.asarray(t) >= t1, 1.0, 0.0) * dprof(x)
        dr = dl
        dexact = dl
    elif phi == "abs":
        prof = lambda x: np.abs(np.asarray(x, dtype=float))
        lip = 1.0
        on = lambda t: np.where(np.asarray(t) >= t1, 1.0, 0.0)
        dl = lambda t, x: on(t) * np.where(np.asarray(x) <= 0.0, -1.0, 1.0)
        dr = lambda t, x: on(t) * np.where(np.asarray(x) >= 0.0, 1.0, -1.0)
        dexact = lambda t, x: on(t) * _sign_limsup(x)
        nondiff = lambda t, x: (np.asarray(t) >= t1) & (np.asarray(x) == 0.0)
    else:
        raise ConfigurationError(f"scaled_step: unknown profile {phi!r}")

    def ev(t, x):
        return np.where(np.asarray(t) >= t1, 1.0, 0.0) * prof(x)

    def dt_measure(x, t0, tend):
        hit = 1.0 if (t0 < t1 <= tend) else 0.0
        signed = hit * prof(x)
        return signed, np.abs(signed)

    return PathFunction(
        name="scaled_step",
        evaluate=ev,
        dx_exact=dexact,
        dx_left=dl,
        dx_right=dr,
        lipschitz_bound=lambda box: lip,
        time_jumps=((t1, prof),),
        dt_measure=dt_measure,
        nondiff_indicator=nondiff,
        time_independent=False,
    )


def _make_ramp_bump(c=0.0, w=1.0, rate=1.0) -> PathFunction:
    """(rate * t) * bump(x): absolutely continuous time variation."""
    phi, dphi, lip = _bump_profile(c, w)
    rate = float(rate)

    def dt_measure(x, t0, t1):
        span = max(t1 - t0, 0.0)
        signed = rate * span * phi(x)
        return signed, np.abs(signed)

    return PathFunction(
        name="ramp_bump",
        evaluate=lambda t, x: rate * np.asarray(t, dtype=float) * phi(x),
        dx_exact=lambda t, x: rate * np.asarray(t, dtype=float) * dphi(x),
        dx_left=lambda t, x: rate * np.asarray(t, dtype=float) * dphi(x),
        dx_right=lambda t, x: rate * np.asarray(t, dtype=float) * dphi(x),
        lipschitz_bound=lambda box: abs(rate) * max(abs(box[0]), abs(box[1])) * lip,
        dt_measure=dt_measure,
        nondiff_indicator=lambda t, x: np.zeros_like(np.asarray(x), dtype=bool),
        time_independent=False,
    )


def _make_identity() -> PathFunction:
    return PathFunction(
        name="identity",
        evaluate=lambda t, x: np.asarray(x, dtype=float) + 0.0,
        dx_exact=lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
        dx_left=lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
        dx_right=lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
        lipschitz_bound=lambda box: 1.0,
        dt_measure=_no_time_measure,
        nondiff_indicator=lambda t, x: np.zeros_like(np.asarray(x), dtype=bool),
    )


_REGISTRY: dict[str, Callable] = {
    "abs": _make_abs,
    "relu": _make_relu,
    "square": _make_square,
    "identity": _make_identity,
    "piecewise_linear": _make_piecewise_linear,
    "moving_kink": _make_moving_kink,
    "scaled_step": _make_scaled_step,
    "bump": _make_bump,
    "ramp_bump": _make_ramp_bump,
}


def builtin_library() -> dict:
    """Name -> factory registry of the builtin function corpus."""
    return dict(_REGISTRY)


def make_function(expr: str) -> PathFunction:
    """Instantiate from an expression like 'moving_kink(k_jump=0.5)'."""
    name, args, kwargs = parse_expression(expr)
    if name not in _REGISTRY:
        raise ConfigurationError(f"unknown function {name!r}")
    f = _REGISTRY[name](*args, **kwargs)
    object.__setattr__(f, "expression", expr)
    return f
