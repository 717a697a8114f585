"""Bundled synthetic benchmark dataset.

Thirty-two regions in four latent groups, forty days of daily counts. The
generating process plants exactly the structure the pipeline claims to
exploit:

* lag structure — each group follows a smooth epidemic pulse with its own
  timing, modulated by a slow regional random walk, so tomorrow is highly
  predictable from recent bins (and poorly predicted by raw persistence
  while the curve is rising or falling);
* exogenous signals — search fractions and media counts are noisy reads of
  the latent intensity a few days *ahead* of the case counts;
* mechanistic signal — the mechanistic stream is the true expected incidence
  with ~8% multiplicative error, indexed by the date it forecasts.

Everything is deterministic given the seed. ``write_benchmark_dataset``
emits the four ingest CSVs; ``python -m epifuse.synthetic OUTDIR`` does the
same from the command line.
"""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path

import numpy as np

N_REGIONS = 32
N_DAYS = 40
START_DATE = dt.date(2020, 1, 13)
DEFAULT_SEED = 20200113
SEARCH_TERMS = ("fever", "cough", "symptoms")

_GROUPS = 4
_PEAKS = (18.0, 24.0, 30.0, 36.0)
_WIDTHS = (7.0, 8.0, 9.0, 10.0)
_AMPLITUDES = (420.0, 560.0, 360.0, 480.0)

_SEARCH_LEAD = 3
_MEDIA_LEAD = 2
_DEATH_LAG = 4
_MECH_ERROR_SD = 0.08
_MECH_EXTRA_DAYS = 2  # forecast stream extends one bin past the case frontier


def _latent_intensity(rng: np.random.Generator, horizon: int):
    """Per-region expected daily incidence over ``horizon`` days."""
    groups = np.repeat(np.arange(_GROUPS), N_REGIONS // _GROUPS)
    rng.shuffle(groups)
    scales = rng.uniform(0.6, 1.8, size=N_REGIONS)
    days = np.arange(horizon)

    lam = np.zeros((N_REGIONS, horizon))
    for r in range(N_REGIONS):
        g = groups[r]
        pulse = _AMPLITUDES[g] * np.exp(-((days - _PEAKS[g]) ** 2) / (2 * _WIDTHS[g] ** 2))
        log_mod = np.zeros(horizon)
        innov = rng.normal(0.0, 0.05, size=horizon)
        for d in range(1, horizon):
            log_mod[d] = 0.9 * log_mod[d - 1] + innov[d]
        lam[r] = scales[r] * pulse * np.exp(log_mod) + 4.0
    return lam, groups


def generate(seed: int = DEFAULT_SEED):
    """Return all signal arrays keyed by name, each (region, day)."""
    rng = np.random.default_rng(seed)
    horizon = N_DAYS + max(_SEARCH_LEAD, _MEDIA_LEAD) + _MECH_EXTRA_DAYS
    lam, groups = _latent_intensity(rng, horizon)

    confirmed = rng.poisson(lam[:, :N_DAYS]).astype(float)
    suspected = rng.poisson(1.5 * lam[:, :N_DAYS]).astype(float)
    cumulative = np.cumsum(confirmed, axis=1)

    deaths = np.zeros((N_REGIONS, N_DAYS))
    for d in range(N_DAYS):
        src = lam[:, max(d - _DEATH_LAG, 0)]
        deaths[:, d] = rng.poisson(0.03 * src)

    # exogenous signals read the latent intensity ahead of time
    search = {}
    for k, term in enumerate(SEARCH_TERMS):
        gain = 2e-5 * (1.0 + 0.5 * k)
        lead = lam[:, _SEARCH_LEAD : _SEARCH_LEAD + N_DAYS]
        noise = rng.normal(0.0, 3e-4, size=(N_REGIONS, N_DAYS))
        search[term] = np.clip(gain * lead + noise, 0.0, 1.0)

    media_lead = lam[:, _MEDIA_LEAD : _MEDIA_LEAD + N_DAYS]
    media = rng.poisson(0.08 * media_lead + 1.0).astype(float)

    mech_days = N_DAYS + _MECH_EXTRA_DAYS
    mech_noise = rng.normal(0.0, _MECH_ERROR_SD, size=(N_REGIONS, mech_days))
    mechanistic = lam[:, :mech_days] * np.exp(mech_noise)

    return {
        "groups": groups,
        "confirmed": confirmed,
        "suspected": suspected,
        "deaths": deaths,
        "cumulative": cumulative,
        "search": search,
        "media": media,
        "mechanistic": mechanistic,
    }


def region_name(r: int) -> str:
    return f"region_{r + 1:02d}"


def _dates(n: int) -> list[dt.date]:
    return [START_DATE + dt.timedelta(days=d) for d in range(n)]


def write_benchmark_dataset(out_dir: str | Path, seed: int = DEFAULT_SEED) -> dict[str, Path]:
    """Write cases/search/media/mechanistic CSVs; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = generate(seed)
    days = _dates(N_DAYS)
    mech_days = _dates(N_DAYS + _MECH_EXTRA_DAYS)

    paths = {
        "cases": out_dir / "cases.csv",
        "search": out_dir / "search.csv",
        "media": out_dir / "media.csv",
        "mechanistic": out_dir / "mechanistic.csv",
    }

    with paths["cases"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "region", "confirmed", "suspected", "deaths", "cumulative"])
        for d, date in enumerate(days):
            for r in range(N_REGIONS):
                w.writerow(
                    [
                        date.isoformat(),
                        region_name(r),
                        int(data["confirmed"][r, d]),
                        int(data["suspected"][r, d]),
                        int(data["deaths"][r, d]),
                        int(data["cumulative"][r, d]),
                    ]
                )

    with paths["search"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "region", "term", "fraction"])
        for d, date in enumerate(days):
            for r in range(N_REGIONS):
                for term in SEARCH_TERMS:
                    w.writerow(
                        [
                            date.isoformat(),
                            region_name(r),
                            term,
                            f"{data['search'][term][r, d]:.8f}",
                        ]
                    )

    with paths["media"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "region", "article_count"])
        for d, date in enumerate(days):
            for r in range(N_REGIONS):
                w.writerow([date.isoformat(), region_name(r), int(data["media"][r, d])])

    with paths["mechanistic"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "region", "forecast_new_cases"])
        for d, date in enumerate(mech_days):
            for r in range(N_REGIONS):
                w.writerow(
                    [
                        date.isoformat(),
                        region_name(r),
                        f"{data['mechanistic'][r, d]:.6f}",
                    ]
                )
    return paths


def benchmark_config(data_dir: str | Path, out_dir: str | Path, seed: int = DEFAULT_SEED) -> dict:
    """RunConfig document for the bundled end-to-end benchmark."""
    data_dir = Path(data_dir)
    return {
        "seed": seed,
        "inputs": {
            "cases": str(data_dir / "cases.csv"),
            "search": str(data_dir / "search.csv"),
            "media": str(data_dir / "media.csv"),
            "mechanistic": str(data_dir / "mechanistic.csv"),
        },
        "backtest": {"start": "2020-02-03", "end": "2020-02-19"},
        "lasso": {"cv_folds": 5, "n_lambda": 30},
        "output": {"dir": str(out_dir)},
    }


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="write the bundled synthetic benchmark CSVs")
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = parser.parse_args(argv)
    paths = write_benchmark_dataset(args.out_dir, seed=args.seed)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
