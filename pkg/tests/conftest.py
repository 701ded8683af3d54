import numpy as np
import pytest

from qvlab.generators import GeneratorSpec, generate


@pytest.fixture(scope="session")
def brownian_200_l12():
    """200 Brownian paths on the level-12 grid (shared across modules)."""
    return generate(GeneratorSpec(kind="brownian", n_steps=4096, seed=12345), 200)


@pytest.fixture(scope="session")
def cp_ensemble():
    spec = GeneratorSpec(kind="compound_poisson", n_steps=4096, jump_rate=3.0, seed=777)
    return generate(spec, 64)


def toy_path(times, values, marks=None):
    from qvlab.paths import SamplePath

    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if marks is None:
        marks = np.zeros(times.size, dtype=bool)
    return SamplePath(times=times, values=values, jump_marks=np.asarray(marks, dtype=bool))
