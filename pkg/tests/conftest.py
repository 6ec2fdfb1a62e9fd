import numpy as np
import pytest

from mirrormfld.geometry import BoxLogBarrierMap, SimplexEntropyMap


@pytest.fixture
def simplex3():
    return SimplexEntropyMap(ambient_dim=3)


@pytest.fixture
def unit_box():
    return BoxLogBarrierMap(bounds=((0.0, 1.0),))


@pytest.fixture
def box2():
    return BoxLogBarrierMap(bounds=((-1.0, 2.0), (0.0, 1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def interior_simplex_points(rng, n, least=0.0):
    """Random interior points of the 2-simplex in reduced coordinates."""
    pts = rng.dirichlet((1.0, 1.0, 1.0), size=n)
    if least:
        pts = pts[pts.min(axis=1) >= least]
        while pts.shape[0] < n:
            extra = rng.dirichlet((1.0, 1.0, 1.0), size=n)
            pts = np.vstack([pts, extra[extra.min(axis=1) >= least]])
        pts = pts[:n]
    return pts[:, :2]


def interior_box_points(rng, box, n, least=0.0):
    lo = box.lower + least * (box.upper - box.lower)
    hi = box.upper - least * (box.upper - box.lower)
    return lo + rng.random((n, box.intrinsic_dim)) * (hi - lo)
