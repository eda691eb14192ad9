"""Shared fixtures: seeded generators, random bounded streams, hand-built records."""

import numpy as np
import pytest

from models.forecast import QuantileLevels, StepRecord
from core.losses import aggregated_quantile_loss, gradient_at_forecast

STREAM_COUNT = 20
STREAM_HORIZON = 10_000
STREAM_ETA = 0.2


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def _bounded_stream(seed: int, horizon: int):
    """Ordered base forecasts near zero and outcomes shifted well above them"""
    gen = np.random.default_rng(seed)
    levels = QuantileLevels((0.1, 0.5, 0.9)) if seed % 2 == 0 else QuantileLevels((0.05, 0.25, 0.5, 0.75, 0.95))
    base = np.sort(gen.uniform(-0.5, 0.5, size=(horizon, levels.size)), axis=1)
    center = gen.uniform(2.0, 4.0)
    if seed % 4 < 2:
        y = center + gen.uniform(-1.0, 1.0, size=horizon)
    else:
        regime = (np.arange(horizon) // 1000) % 2
        y = center + 1.5 * regime + np.clip(gen.normal(0.0, 0.5, size=horizon), -1.0, 1.0)
    residual_bound = float(np.max(np.abs(y[:, None] - base)))
    return levels, base, y, residual_bound


@pytest.fixture(scope="session")
def bounded_streams():
    return [_bounded_stream(seed, STREAM_HORIZON) for seed in range(STREAM_COUNT)]


@pytest.fixture
def make_records():
    """Build step records directly from revealed forecasts and outcomes"""

    def _make(levels: QuantileLevels, forecasts, ys, base=None):
        forecasts = np.atleast_2d(np.asarray(forecasts, dtype=float))
        base = np.zeros_like(forecasts) if base is None else np.atleast_2d(np.asarray(base, dtype=float))
        records = []
        for t, (q, y, b) in enumerate(zip(forecasts, ys, base), start=1):
            records.append(StepRecord(
                t=t,
                base=b,
                y=float(y),
                q=q,
                raw=q,
                played=q - b,
                hidden=q - b,
                coverage=(y <= q).astype(np.int8),
                gradient=gradient_at_forecast(levels, q, y),
                loss=aggregated_quantile_loss(levels, q, y),
                eta=1.0,
            ))
        return records

    return _make
