"""AIS position reports reduced to arrivals along a monitored line segment.

An *arrival* is the first in-window fix of each vessel (MMSI) lying within
the corridor around the segment; its coordinate is the arclength of the
foot point measured from ``endpoint_a``.  The foot point is computed in a
local equirectangular projection, which is accurate to metres over a
13 km segment.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from typing import NamedTuple

import numpy as np

from .arrivals import ArrivalSet
from .errors import DataFormatError, InvalidArgumentError

EARTH_RADIUS_KM = 6371.0088
REQUIRED_COLUMNS = ("MMSI", "BaseDateTime", "LAT", "LON")


@dataclass(frozen=True)
class AISRecord:
    mmsi: str
    timestamp: datetime
    lat: float
    lon: float


class ParsedRecords(NamedTuple):
    records: list
    skipped: int


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def parse_records(source) -> ParsedRecords:
    """Read AIS rows from a text stream; malformed rows are skipped and counted."""
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        return ParsedRecords([], 0)
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise DataFormatError(f"AIS input lacks required columns: {', '.join(missing)}")
    records, skipped = [], 0
    for row in reader:
        try:
            mmsi = row["MMSI"].strip()
            lat = float(row["LAT"])
            lon = float(row["LON"])
            ts = parse_timestamp(row["BaseDateTime"])
            if not mmsi or not (-90 <= lat <= 90 and -180 <= lon <= 180):
                raise ValueError("bad coordinate")
        except (ValueError, TypeError, AttributeError):
            skipped += 1
            continue
        records.append(AISRecord(mmsi, ts, lat, lon))
    return ParsedRecords(records, skipped)


def haversine_km(a, b) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (a[0], a[1], b[0], b[1]))
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


@dataclass(frozen=True)
class LineSegmentSpec:
    endpoint_a: tuple
    endpoint_b: tuple
    corridor_halfwidth_km: float

    def __post_init__(self):
        object.__setattr__(self, "endpoint_a", tuple(map(float, self.endpoint_a)))
        object.__setattr__(self, "endpoint_b", tuple(map(float, self.endpoint_b)))
        if self.endpoint_a == self.endpoint_b:
            raise InvalidArgumentError("segment endpoints must differ")
        if not self.corridor_halfwidth_km > 0:
            raise InvalidArgumentError("corridor half-width must be positive")

    @property
    def length_km(self) -> float:
        return haversine_km(self.endpoint_a, self.endpoint_b)

    def _local_xy(self, lat, lon):
        lat0 = math.radians(0.5 * (self.endpoint_a[0] + self.endpoint_b[0]))
        x = EARTH_RADIUS_KM * np.radians(np.asarray(lon) - self.endpoint_a[1]) * math.cos(lat0)
        y = EARTH_RADIUS_KM * np.radians(np.asarray(lat) - self.endpoint_a[0])
        return x, y

    def project(self, lat, lon):
        """Arclength coordinate (km from endpoint_a) and distance to the segment."""
        px, py = self._local_xy(lat, lon)
        bx, by = self._local_xy(self.endpoint_b[0], self.endpoint_b[1])
        t = np.clip((px * bx + py * by) / (bx * bx + by * by), 0.0, 1.0)
        dist = np.hypot(px - t * bx, py - t * by)
        return t * self.length_km, dist


@dataclass(frozen=True)
class Projection:
    arrivals: ArrivalSet
    mmsi: list
    timestamps: list
    duration_hours: float


def project_to_segment(records, spec: LineSegmentSpec, window) -> Projection:
    t_start, t_end = window
    if not t_end > t_start:
        raise InvalidArgumentError("time window must have positive length")
    ordered = sorted(
        (r for r in records if t_start <= r.timestamp < t_end),
        key=lambda r: r.timestamp,
    )
    seen = set()
    pos, mmsi, stamps = [], [], []
    for r in ordered:
        if r.mmsi in seen:
            continue
        s, dist = spec.project(r.lat, r.lon)
        if dist <= spec.corridor_halfwidth_km:
            seen.add(r.mmsi)
            pos.append(float(s))
            mmsi.append(r.mmsi)
            stamps.append(r.timestamp)
    duration = (t_end - t_start).total_seconds() / 3600.0
    length = spec.length_km
    arrivals = ArrivalSet(length, np.clip(np.array(pos, dtype=float), 0.0, length))
    return Projection(arrivals, mmsi, stamps, duration)


def write_projection_csv(path, proj: Projection) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position_km", "mmsi", "timestamp"])
        for p, m, t in zip(proj.arrivals.positions, proj.mmsi, proj.timestamps):
            w.writerow([repr(float(p)), m, t.isoformat()])
