import math

import numpy as np
import pytest

from graphks import (
    DiscreteLaplacian,
    Edge,
    Mesh,
    MetricGraph,
    build_plan,
    interval_graph,
    star_graph,
)


@pytest.fixture(scope="session")
def interval():
    return interval_graph(1.0)


@pytest.fixture(scope="session")
def star3():
    return star_graph(3, 1.0)


@pytest.fixture(scope="session")
def lollipop():
    """Cycle with a pendant edge: one vertex of degree 3, a genuine loop."""
    return MetricGraph(
        ("a", "b", "c", "d"),
        (
            Edge("c0", "a", "b", 1.0),
            Edge("c1", "b", "c", 1.0),
            Edge("c2", "c", "a", 1.0),
            Edge("p", "a", "d", 0.7),
        ),
    )


@pytest.fixture(scope="session")
def interval_mesh(interval):
    return Mesh(interval, 40)


@pytest.fixture(scope="session")
def star3_mesh(star3):
    return Mesh(star3, 40)


@pytest.fixture(scope="session")
def interval_plan(interval):
    return build_plan(interval, T=0.5)


@pytest.fixture(scope="session")
def star3_plan(star3):
    return build_plan(star3, T=0.5)


@pytest.fixture(scope="session")
def interval_laplacian(interval_mesh):
    return DiscreteLaplacian(interval_mesh)


def images_kernel(t: float, x: float, y: float, L: float, n_images: int = 60) -> float:
    """Neumann heat kernel on [0, L] by the method of images."""
    acc = 0.0
    for n in range(-n_images, n_images + 1):
        for s in (x - y, x + y):
            z = s - 2.0 * n * L
            acc += math.exp(-z * z / (4.0 * t))
    return acc / math.sqrt(4.0 * math.pi * t)


def cos_mode(mesh, k: int, L: float = 1.0):
    """Samples of cos(k pi x / L) on a single-edge mesh."""
    from graphks import GridFunction

    return GridFunction(mesh, [np.cos(k * math.pi * mesh.x[0] / L)])
