import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of scalar f at 1-D point x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        g.flat[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def central_diff_vec(f, x, h=1e-6):
    """Central finite-difference Jacobian of vector-valued f at 1-D point x."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += h
        xm.flat[i] -= h
        cols.append((np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def rel_err(a, b, floor=1e-12):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), floor)
    return np.abs(a - b).max(initial=0.0) / scale


def random_unit_quaternion(rng):
    from ppmap.geometry import UnitQuaternion

    return UnitQuaternion.from_array(rng.normal(size=4))


def random_sim3(rng, scale_range=(0.5, 2.0), t_scale=3.0):
    from ppmap.geometry import Sim3Transform

    return Sim3Transform(
        float(rng.uniform(*scale_range)),
        random_unit_quaternion(rng),
        rng.normal(scale=t_scale, size=3),
    )
