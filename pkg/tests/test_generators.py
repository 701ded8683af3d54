import numpy as np
import pytest
from scipy import stats

from qvlab.errors import ConfigurationError, GenerationError
from qvlab.generators import (
    GeneratorSpec,
    build_transform,
    gen_lamperti_dirichlet,
    generate,
    make_coefficient,
    make_jump_law,
    make_path,
    parse_expression,
)


def test_parse_expression():
    assert parse_expression("const(1.0)") == ("const", [1.0], {})
    assert parse_expression("step(1, 2, 0)") == ("step", [1.0, 2.0, 0.0], {})
    name, args, kwargs = parse_expression("moving_kink(k_jump=0.5)")
    assert name == "moving_kink" and kwargs == {"k_jump": 0.5}
    with pytest.raises(ConfigurationError):
        parse_expression("not valid (")


def test_coefficient_registry():
    step = make_coefficient("step(1, 2, 0)")
    assert step(0.0, -1.0) == 1.0 and step(0.0, 0.0) == 1.0 and step(0.0, 0.5) == 2.0
    lin = make_coefficient("linear(1.0, 2.0)")
    assert lin(0.0, 3.0) == 7.0
    with pytest.raises(ConfigurationError):
        make_coefficient("nope(1)")


def test_brownian_initial_condition_and_determinism():
    spec = GeneratorSpec(kind="brownian", n_steps=16, x0=2.5, seed=42)
    a = generate(spec, 3)
    b = generate(spec, 3)
    for p, q in zip(a, b):
        assert p.values[0] == 2.5
        assert np.array_equal(p.values, q.values)  # bit-identical replay
        assert not p.jump_marks.any()


def test_path_replay_matches_ensemble():
    spec = GeneratorSpec(kind="brownian", n_steps=64, seed=9)
    ens = generate(spec, 5)
    assert np.array_equal(make_path(spec, 3).values, ens[3].values)


def test_brownian_increment_law():
    # law of X_1 - x0 at one step: mean within 4 standard errors, variance 10%
    spec = GeneratorSpec(kind="brownian", n_steps=1, horizon=1.0, x0=1.0, seed=5)
    ens = generate(spec, 10**4)
    term = np.asarray([p.values[-1] - 1.0 for p in ens])
    assert abs(term.mean()) <= 4.0 / np.sqrt(10**4)
    assert abs(term.var() - 1.0) <= 0.1


def test_brownian_kurtosis_sanity():
    spec = GeneratorSpec(kind="brownian", n_steps=4096, seed=11)
    ens = generate(spec, 25)
    incs = np.concatenate([np.diff(p.values) for p in ens]) / np.sqrt(1.0 / 4096)
    kurt = stats.kurtosis(incs, fisher=False)
    assert abs(kurt - 3.0) <= 0.2


def test_compound_poisson_requires_positive_rate():
    with pytest.raises(ConfigurationError):
        GeneratorSpec(kind="compound_poisson", jump_rate=0.0).validate()


def test_compound_poisson_grid_too_coarse():
    with pytest.raises(ConfigurationError, match="finer grid"):
        GeneratorSpec(kind="compound_poisson", n_steps=4, jump_rate=3.0).validate()


def test_compound_poisson_single_event_shape():
    spec = GeneratorSpec(kind="compound_poisson", n_steps=256, jump_rate=0.5, seed=1,
                         jump_law="const(2.0)")
    for i in range(20):
        p = make_path(spec, i)
        jumps = p.times[p.jump_marks]
        if jumps.size == 1:
            t1 = jumps[0]
            expect = np.where(p.times >= t1, 2.0, 0.0)
            assert np.array_equal(p.values, expect)
            break
    else:
        pytest.fail("no single-jump path found")


def test_compound_poisson_mean_count():
    spec = GeneratorSpec(kind="compound_poisson", n_steps=64, jump_rate=3.0, seed=21)
    counts = [int(make_path(spec, i).jump_marks.sum()) for i in range(10**4)]
    assert abs(np.mean(counts) - 3.0) <= 4.0 * np.sqrt(3.0 / 10**4)


def test_compound_poisson_piecewise_constant_and_marked():
    spec = GeneratorSpec(kind="compound_poisson", n_steps=512, jump_rate=4.0, seed=3)
    p = make_path(spec, 0)
    dx = np.diff(p.values)
    moved = np.flatnonzero(dx != 0.0) + 1
    assert np.all(p.jump_marks[moved])  # every move is a marked jump


def test_euler_degenerate():
    spec = GeneratorSpec(kind="euler_sde", n_steps=32, x0=1.5, sigma="const(0.0)", b="const(0.0)", seed=0)
    p = make_path(spec, 0)
    assert np.all(p.values == 1.5)


def test_euler_pure_drift_exact():
    spec = GeneratorSpec(kind="euler_sde", n_steps=64, x0=2.0, sigma="const(0.0)", b="const(1.0)", seed=0)
    p = make_path(spec, 0)
    assert p.values[-1] == pytest.approx(3.0, abs=1e-12)


def test_euler_unit_sigma_same_seed_is_bitexact():
    pe = make_path(GeneratorSpec(kind="euler_sde", n_steps=256, sigma="const(1.0)", seed=100), 0)
    pb = make_path(GeneratorSpec(kind="brownian", n_steps=256, seed=100), 0)
    assert np.array_equal(pe.values, pb.values)


def test_euler_unit_sigma_matches_brownian_law():
    n = 1000
    e1 = generate(GeneratorSpec(kind="euler_sde", n_steps=1024, sigma="const(1.0)", seed=101), n)
    e2 = generate(GeneratorSpec(kind="brownian", n_steps=1024, seed=201), n)
    a = np.asarray([p.values[-1] for p in e1])
    b = np.asarray([p.values[-1] for p in e2])
    # two-sample KS at 1e3 paths: threshold ~1.63*sqrt(2/n) at 1% level
    d = stats.ks_2samp(a, b).statistic
    assert d <= 1.63 * np.sqrt(2.0 / n)


def test_euler_nonfinite_coefficient_names_point():
    bad = lambda t, x: np.inf
    spec = GeneratorSpec(kind="euler_sde", n_steps=4, sigma=bad, seed=0)
    with pytest.raises(GenerationError, match="t="):
        make_path(spec, 0)


def test_jump_diffusion_marks_and_validate():
    spec = GeneratorSpec(kind="jump_diffusion", n_steps=1024, jump_rate=3.0, seed=17)
    p = make_path(spec, 0)
    assert p.jump_marks.sum() >= 0
    assert np.all(np.isfinite(p.values))


def test_lamperti_identity_transform():
    spec = GeneratorSpec(kind="lamperti_dirichlet", n_steps=128, sigma_of_x="const(1.0)",
                         alpha=1.0, seed=4)
    res = gen_lamperti_dirichlet(spec, 2)
    for xp, yp in zip(res.x, res.y):
        assert np.allclose(xp.values, yp.values, atol=1e-9)


def test_lamperti_linear_transform():
    # sigma = c constant: h(x) = c^(-2 alpha) x, so X = c^(2 alpha) Y
    c, alpha = 2.0, 0.5
    spec = GeneratorSpec(kind="lamperti_dirichlet", n_steps=128, sigma_of_x=f"const({c})",
                         alpha=alpha, seed=8)
    res = gen_lamperti_dirichlet(spec, 2)
    scale = c ** (2 * alpha)
    for xp, yp in zip(res.x, res.y):
        assert np.allclose(xp.values, scale * yp.values, atol=1e-7)


def test_lamperti_roundtrip_with_step_sigma():
    # sigma(x) = 1 + 1{x>0}, alpha = 1/2: h piecewise linear with a kink at 0
    spec = GeneratorSpec(kind="lamperti_dirichlet", n_steps=64, sigma_of_x="step(1, 2, 0)",
                         alpha=0.5, seed=15)
    tr = build_transform(spec)
    xs = np.linspace(-3.0, 3.0, 301)
    back = tr.inverse(tr.forward(xs))
    res = float(np.max(np.abs(back - xs)))
    grid_step = float(np.diff(tr.x_tab).max())
    assert res <= 2.0 * grid_step  # quadrature-resolution round trip
    assert np.all(np.diff(tr.h_tab) > 0)


def test_lamperti_inverse_monotone():
    spec = GeneratorSpec(kind="lamperti_dirichlet", n_steps=64, sigma_of_x="abs_shift(0.5, 0.5)",
                         alpha=0.5, seed=2)
    tr = build_transform(spec)
    ys = np.linspace(tr.h_tab[0], tr.h_tab[-1], 500)
    assert np.all(np.diff(tr.inverse(ys)) >= 0)


def test_lamperti_bounded_h_raises():
    # sigma growing linearly with alpha = 1 gives integrable sigma^-2 tails:
    # h is bounded and can never cover the Brownian range
    spec = GeneratorSpec(kind="lamperti_dirichlet", n_steps=64, sigma_of_x="abs_shift(0.5, 0.5)",
                         alpha=1.0, seed=2)
    with pytest.raises(GenerationError, match="bounded"):
        build_transform(spec)


def test_jump_law_means():
    assert make_jump_law("normal(1.5, 2.0)").mean == 1.5
    assert make_jump_law("uniform(-1, 3)").mean == 1.0
    assert make_jump_law("const(4)").mean == 4.0


def test_mean_drift_variation():
    assert GeneratorSpec(kind="brownian").mean_drift_variation(1.0) == 0.0
    cp = GeneratorSpec(kind="compound_poisson", jump_rate=3.0, jump_law="normal(0.0, 1.0)", n_steps=4096)
    assert cp.mean_drift_variation(1.0) == 0.0
    cp2 = GeneratorSpec(kind="compound_poisson", jump_rate=2.0, jump_law="const(1.5)", n_steps=4096)
    assert cp2.mean_drift_variation(2.0) == pytest.approx(6.0)
    drift = GeneratorSpec(kind="euler_sde", b="const(-2.0)")
    assert drift.mean_drift_variation(1.0) == pytest.approx(2.0)
    assert GeneratorSpec(kind="euler_sde", b="linear(0,1)").mean_drift_variation(1.0) is None


def test_invalid_specs_rejected():
    with pytest.raises(ConfigurationError):
        GeneratorSpec(kind="wat").validate()
    with pytest.raises(ConfigurationError):
        GeneratorSpec(n_steps=0).validate()
    with pytest.raises(ConfigurationError):
        GeneratorSpec(horizon=-1.0).validate()
    with pytest.raises(ConfigurationError):
        GeneratorSpec(alpha=1.5).validate()
