import datetime as dt

import numpy as np
import pytest

from epifuse.timeseries import SignalPanel, aggregate


def make_panel(values, start=dt.date(2020, 1, 1), regions=None):
    """Build a SignalPanel from {signal: (n_regions, n_days) array-like}."""
    arrays = {k: np.atleast_2d(np.asarray(v, dtype=float)) for k, v in values.items()}
    n_regions, n_days = next(iter(arrays.values())).shape
    if regions is None:
        regions = tuple(f"r{i}" for i in range(n_regions))
    calendar = tuple(start + dt.timedelta(days=d) for d in range(n_days))
    return SignalPanel(regions=tuple(regions), calendar=calendar, values=arrays)


@pytest.fixture
def growth_panel():
    """Four regions with noisy geometric growth plus exogenous signals.

    The noise matters: noiseless exponentials make the lag columns exactly
    collinear and the solver pathologically slow at tiny penalties.
    """
    days = 28
    t = np.arange(days)
    rng = np.random.default_rng(11)
    confirmed = np.stack(
        [(10 + 3 * r) * 1.12**t * (1 + rng.normal(0, 0.08, days)) for r in range(4)]
    ).clip(0).round()
    panel = make_panel(
        {
            "confirmed": confirmed,
            "suspected": (confirmed * 1.4).round(),
            "deaths": np.maximum(confirmed * 0.02, 0).round(),
            "cumulative": np.cumsum(confirmed, axis=1),
            "search_volume:fever": confirmed * 1e-5 + rng.uniform(0, 1e-6, confirmed.shape),
            "media_count": (confirmed * 0.05).round() + 1,
            "mechanistic_forecast": confirmed * (1 + rng.normal(0, 0.03, confirmed.shape)),
        }
    )
    return aggregate(panel)
