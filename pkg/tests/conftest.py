"""Shared generators for well-posed random GP instances."""

import math

import numpy as np
import pytest


def spaced_points(rng, m, p, min_dist):
    """m points in a box with a minimum pairwise separation.

    Rejection sampling with an adaptively growing box; keeps kernel matrices
    comfortably conditioned at the base jitter.
    """
    L = max(4.0, 1.6 * min_dist * m ** (1.0 / p))
    pts = []
    tries = 0
    while len(pts) < m:
        c = rng.uniform(0.0, L, size=p)
        if all(np.linalg.norm(c - q) >= min_dist for q in pts):
            pts.append(c)
        tries += 1
        if tries > 200 * m:
            L *= 1.3
            tries = 0
    return np.array(pts)


def make_instance(rng, m=None, p=None):
    """A well-conditioned random regression instance (X, z, theta)."""
    m = int(rng.integers(8, 40)) if m is None else m
    p = int(rng.integers(1, 5)) if p is None else p
    theta = rng.uniform(0.5, 4.0, size=p)
    X = spaced_points(rng, m, p, 1.2 * math.sqrt(theta.max()))
    z = np.sin(X.sum(axis=1)) + 0.25 * rng.standard_normal(m)
    return X, z, theta


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
