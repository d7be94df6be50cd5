"""Event locations along the segment, with optional labels."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DataFormatError, InvalidArgumentError, OutOfDomainError

NORMAL = "normal"
OUTLIER = "outlier"


@dataclass(frozen=True)
class ArrivalSet:
    """Arrival positions in km on ``[0, length_km]``.

    ``is_outlier`` holds ground-truth labels (True for a commission outlier)
    and ``classified`` the output of the classifier; either may be None.
    """

    length_km: float
    positions: np.ndarray
    is_outlier: Optional[np.ndarray] = None
    classified: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1)
        if np.any(~np.isfinite(pos)) or np.any(pos < 0) or np.any(pos > self.length_km):
            bad = pos[~((pos >= 0) & (pos <= self.length_km))][0]
            raise OutOfDomainError(f"arrival at {bad!r} km is outside [0, {self.length_km}]")
        object.__setattr__(self, "positions", pos)
        for name in ("is_outlier", "classified"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=bool).reshape(-1)
            if v.shape != pos.shape:
                raise InvalidArgumentError(f"{name} has {v.size} entries for {pos.size} arrivals")
            object.__setattr__(self, name, v)

    def __len__(self):
        return self.positions.size

    @classmethod
    def empty(cls, length_km: float, labeled: bool = True) -> "ArrivalSet":
        return cls(length_km, np.empty(0), np.empty(0, bool) if labeled else None)

    def with_classification(self, classified) -> "ArrivalSet":
        return replace(self, classified=np.asarray(classified, dtype=bool))

    @property
    def n_outliers(self) -> int:
        if self.is_outlier is None:
            raise InvalidArgumentError("arrival set carries no ground-truth labels")
        return int(self.is_outlier.sum())

    def subset(self, mask) -> "ArrivalSet":
        mask = np.asarray(mask, dtype=bool)
        return ArrivalSet(
            self.length_km,
            self.positions[mask],
            None if self.is_outlier is None else self.is_outlier[mask],
            None if self.classified is None else self.classified[mask],
        )

    def marked(self) -> "ArrivalSet":
        """Arrivals the classifier flagged as potential outliers."""
        if self.classified is None:
            raise InvalidArgumentError("arrival set has not been classified")
        return self.subset(self.classified)

    def true_outliers(self) -> "ArrivalSet":
        if self.is_outlier is None:
            raise InvalidArgumentError("arrival set carries no ground-truth labels")
        return self.subset(self.is_outlier)


def labels_of(arrivals: ArrivalSet) -> list[str]:
    if arrivals.is_outlier is None:
        return [""] * len(arrivals)
    return [OUTLIER if o else NORMAL for o in arrivals.is_outlier]


def write_arrivals_csv(path, arrivals: ArrivalSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position_km", "label"])
        for p, lab in zip(arrivals.positions, labels_of(arrivals)):
            w.writerow([repr(float(p)), lab])


def read_arrivals_csv(path, length_km: float) -> ArrivalSet:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "position_km" not in reader.fieldnames:
            raise DataFormatError(f"{path}: missing position_km column")
        pos, labels = [], []
        for row in reader:
            pos.append(float(row["position_km"]))
            labels.append(row.get("label", "") or "")
    if any(lab not in (NORMAL, OUTLIER) for lab in labels):
        if any(labels):
            raise DataFormatError(f"{path}: labels must be '{NORMAL}' or '{OUTLIER}'")
        return ArrivalSet(length_km, np.array(pos))
    return ArrivalSet(length_km, np.array(pos), np.array([lab == OUTLIER for lab in labels]))
