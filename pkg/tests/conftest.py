from __future__ import annotations

import numpy as np
import pytest

from rdl.model_spaces import Euclidean, HalfPlane, Hyperbolic


@pytest.fixture(scope="session")
def h2():
    return Hyperbolic(2, 1.0)


@pytest.fixture(scope="session")
def h3():
    return Hyperbolic(3, 1.0)


@pytest.fixture(scope="session")
def halfplane():
    return HalfPlane()


@pytest.fixture(scope="session")
def e1():
    return Euclidean(1)


def hyperboloid_distance(k: float, a: np.ndarray, b: np.ndarray) -> float:
    """Independent distance oracle: embed normal coordinates into the
    hyperboloid model of curvature -k^2 and use the Minkowski product."""
    def embed(v):
        r = np.linalg.norm(v)
        u = v / r if r > 0 else np.zeros_like(v)
        return np.concatenate([[np.cosh(k * r)], np.sinh(k * r) * u])

    X, Y = embed(np.asarray(a, float)), embed(np.asarray(b, float))
    minkowski = X[0] * Y[0] - X[1:] @ Y[1:]
    return float(np.arccosh(max(minkowski, 1.0)) / k)
