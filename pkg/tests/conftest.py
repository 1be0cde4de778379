"""Shared lattices, envelopes, and chains used across the test modules."""

import numpy as np
import pytest

from hjreg.grid import GridSpec, make_field
from hjreg.hamiltonians import CoercivityEnvelope
from hjreg.oscillation import build_constant_chain


@pytest.fixture(scope="session")
def box2():
    """Standard 2-D working lattice: [-2, 2] x box(1.25), 20 cells, dt 0.025."""
    return GridSpec(
        dimension=2,
        half_width=1.25,
        cells_per_axis=20,
        t_start=-2.0,
        t_end=2.0,
        dt=0.025,
    )


@pytest.fixture(scope="session")
def env_unit():
    return CoercivityEnvelope(lam=1.0, p=1.5)


@pytest.fixture(scope="session")
def env_double():
    return CoercivityEnvelope(lam=2.0, p=1.5)


@pytest.fixture(scope="session")
def chain_unit():
    return build_constant_chain(2, 1.5, 1.0, 1.0)


@pytest.fixture(scope="session")
def chain_double():
    return build_constant_chain(2, 1.5, 2.0, 1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def const_field(spec, value):
    return make_field(spec, lambda t, x: float(value))


def coordinate_field(spec, axis=0):
    return make_field(spec, lambda t, x: x[..., axis])


def time_field(spec):
    return make_field(spec, lambda t, x: t)


def noise_field(spec, rng, scale=1.0):
    values = scale * rng.standard_normal((spec.n_slices, *spec.spatial_shape))
    from hjreg.grid import field_from_values

    return field_from_values(spec, values)
