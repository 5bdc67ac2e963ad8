import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from radarbev.geometry import GridSpec
from radarbev.ingest import RadarPoint, SweepBundle

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def point(x, y, vxc=0.0, vyc=0.0, offset=0, **kw):
    fields = dict(z=0.0, vx=vxc, vy=vyc, rcs=0.0, timestamp=0)
    fields.update(kw)
    return RadarPoint(x, y, fields["z"], fields["vx"], fields["vy"], vxc, vyc, fields["rcs"],
                      fields["timestamp"], offset)


def bundle_of(xy, **kw):
    return SweepBundle(tuple(point(float(x), float(y), **kw) for x, y in xy))


@pytest.fixture
def grid():
    return GridSpec()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
