import math

import numpy as np
import pytest

from firefront.metric import FireMetric
from firefront.terrain import GaussianBump, GaussianSumTerrain, PlaneTerrain

BIG = (-50.0, 50.0, -50.0, 50.0)


def make_metric(terrain, a, h, h_prime=None, epsilon=0.0, wind_angle=0.0,
                wind_frame="surface", time_scale=1.0):
    return FireMetric.build(terrain, a, h, h_prime=h_prime, epsilon=epsilon,
                            wind_angle=wind_angle, wind_frame=wind_frame,
                            time_scale=time_scale)


@pytest.fixture(scope="session")
def flat_terrain():
    return PlaneTerrain(0.0, 0.0, domain=BIG)


@pytest.fixture(scope="session")
def slope_terrain():
    # inclination pi/3 along +x
    return PlaneTerrain(math.sqrt(3.0), 0.0, domain=BIG)


@pytest.fixture(scope="session")
def hill_terrain():
    # z = 3 exp(-(x^2+y^2)/2)
    return GaussianSumTerrain((GaussianBump(3.0, (0.0, 0.0), 1.0),),
                              domain=(-16.0, 16.0, -16.0, 16.0))


@pytest.fixture(scope="session")
def isotropic_metric(flat_terrain):
    # flat, a=2, h=h'=1: circular speed 3
    return make_metric(flat_terrain, 2.0, 1.0)


@pytest.fixture(scope="session")
def slope_metric(slope_terrain):
    # the constant-slope configuration: a=2, h=h'=1, no wind
    return make_metric(slope_terrain, 2.0, 1.0)


@pytest.fixture(scope="session")
def wind_metric(flat_terrain):
    # flat, a=3, h=h'=1, eps=0.8, wind along +x
    return make_metric(flat_terrain, 3.0, 1.0, epsilon=0.8, wind_angle=0.0)


@pytest.fixture(scope="session")
def hill_metric(hill_terrain):
    return make_metric(hill_terrain, 1.0, 1.0)


@pytest.fixture(scope="session")
def hill_wind_metric(hill_terrain):
    # the asymmetric-crossover configuration
    return make_metric(hill_terrain, 1.0, 1.0, epsilon=0.4, wind_angle=0.0)


def rng(seed=0):
    return np.random.default_rng(seed)
