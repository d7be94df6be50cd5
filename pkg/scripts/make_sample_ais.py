"""Regenerate the bundled synthetic AIS extract (src/seabed_outliers/data/sample_ais.csv).

Vessels cross an east-west segment north of Norfolk, VA; crossing points
follow the same lane structure as the synthetic scenarios.  A few vessels
stay outside the corridor and a few rows are deliberately malformed.
"""
import csv
import math
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

LAT0, LON_A = 36.95, -76.10
LENGTH_KM = 13.0
R = 6371.0088
LON_B = LON_A + math.degrees(LENGTH_KM / (R * math.cos(math.radians(LAT0))))
LANES = ((10.0, 0.6, 0.55), (12.4, 0.4, 0.35), (4.2, 0.5, 0.10))


def km_to_lon(x):
    return LON_A + math.degrees(x / (R * math.cos(math.radians(LAT0))))


def km_to_lat(y):
    return LAT0 + math.degrees(y / R)


def main(path):
    rng = np.random.default_rng(20210401)
    start = datetime(2021, 4, 1)
    weights = np.array([w for _, _, w in LANES])
    rows = []
    for v in range(60):
        mmsi = str(366000000 + v)
        lane = rng.choice(len(LANES), p=weights / weights.sum())
        centre, width, _ = LANES[lane]
        x = float(np.clip(rng.normal(centre, width), 0.05, LENGTH_KM - 0.05))
        t0 = start + timedelta(minutes=float(rng.uniform(0, 24 * 60 - 40)))
        offset = 0.0 if v % 15 else 5.0  # every 15th vessel never enters the corridor
        heading = 1 if rng.random() < 0.5 else -1
        for k in range(-2, 3):
            y = heading * 0.8 * k + offset
            ts = t0 + timedelta(minutes=10 * (k + 2))
            rows.append([mmsi, ts.isoformat(), f"{km_to_lat(y):.6f}",
                         f"{km_to_lon(x + 0.02 * k):.6f}", "Cargo"])
    rows.sort(key=lambda r: (r[1], r[0]))
    rows.insert(7, ["366999998", "2021-04-01T03:00:00", "not-a-number", "-76.0", "Tug"])
    rows.insert(19, ["366999999", "2021-04-01Tbroken", "36.95", "-76.0", "Tug"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["MMSI", "BaseDateTime", "LAT", "LON", "VesselType"])
        w.writerows(rows)
    print(f"wrote {len(rows)} rows; segment B = ({LAT0}, {LON_B:.6f})")


if __name__ == "__main__":
    main(Path(__file__).resolve().parents[1] / "src/seabed_outliers/data/sample_ais.csv")
