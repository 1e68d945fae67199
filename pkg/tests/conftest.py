import numpy as np
import pytest

from eincheck.conformal import c_connection, lambda_field
from eincheck.expr import parse
from eincheck.metricfile import (
    catalog_conformal_factors,
    catalog_names,
    load_catalog_metric,
)


@pytest.fixture(scope="session")
def catalog():
    return {name: load_catalog_metric(name) for name in catalog_names()}


@pytest.fixture(scope="session")
def factor_sources():
    return catalog_conformal_factors()


class GeometryCache:
    """Session-wide memo for frames, conformal pairs and C-frames; the
    acceptance suite revisits the same (metric, factor, point) grid many
    times and each frame build costs real time."""

    def __init__(self, catalog, factor_sources):
        self.catalog = catalog
        self.factor_sources = factor_sources
        self._frames = {}
        self._pairs = {}
        self._lambdas = {}
        self._cframes = {}

    def spec(self, metric):
        return self.catalog[metric].spec

    def points(self, metric):
        return self.catalog[metric].sample_points

    def factor_expr(self, metric, factor):
        spec = self.spec(metric)
        return parse(self.factor_sources[factor], spec.coordinates, spec.parameters.keys())

    def frame(self, metric, point):
        key = (metric, tuple(point))
        if key not in self._frames:
            self._frames[key] = self.spec(metric).frame_at(point)
        return self._frames[key]

    def pair(self, metric, factor, point):
        key = (metric, factor, tuple(point))
        if key not in self._pairs:
            pair = self.spec(metric).conformal_pair_at(point, self.factor_expr(metric, factor))
            # reuse the cached plain frame as the physical half when present
            self._pairs[key] = pair
        return self._pairs[key]

    def lam(self, frame):
        key = id(frame)
        if key not in self._lambdas:
            self._lambdas[key] = lambda_field(frame)
        return self._lambdas[key]

    def cframe(self, frame):
        key = id(frame)
        if key not in self._cframes:
            self._cframes[key] = c_connection(frame, self.lam(frame))
        return self._cframes[key]


@pytest.fixture(scope="session")
def geo(catalog, factor_sources):
    return GeometryCache(catalog, factor_sources)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
