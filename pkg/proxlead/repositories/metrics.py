import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from proxlead.core.constants import AGGREGATE_SUFFIXES, METRICS_FIELDS
from proxlead.core.logger import LogCategory, get_logger
from proxlead.repositories.base import BaseRepository
from proxlead.schemas.metrics import MetricsRow, format_cell

logger = get_logger(__name__, LogCategory.STORAGE)

AGGREGATED_FIELDS = METRICS_FIELDS[1:]


def aggregate_header() -> list[str]:
    return ["k"] + [f"{name}_{suffix}" for name in AGGREGATED_FIELDS for suffix in AGGREGATE_SUFFIXES]


def aggregate(replicas: Sequence[Sequence[MetricsRow]]) -> list[list[float | int]]:
    """Mean and standard error across replicas, row by row.

    Rows are matched by position; every replica must have recorded the same
    iterations. The standard error of a single replica is 0.
    """
    if not replicas:
        return []
    ks = [row.k for row in replicas[0]]
    for rows in replicas[1:]:
        if [row.k for row in rows] != ks:
            raise ValueError("Replicas recorded different iterations; cannot aggregate")

    count = len(replicas)
    table: list[list[float | int]] = []
    for position, k in enumerate(ks):
        out: list[float | int] = [k]
        for name in AGGREGATED_FIELDS:
            values = np.array([float(getattr(rows[position], name)) for rows in replicas])
            stderr = float(values.std(ddof=1) / np.sqrt(count)) if count > 1 else 0.0
            out.extend([float(values.mean()), stderr])
        table.append(out)
    return table


class MetricsRepository(BaseRepository):
    """CSV files of metrics rows; the header names exactly the row fields."""

    suffix = ".csv"

    def write_rows(self, key: str, rows: Iterable[MetricsRow]) -> Path:
        return self.write_table(key, list(METRICS_FIELDS), (row.as_record() for row in rows))

    def write_aggregate(self, key: str, replicas: Sequence[Sequence[MetricsRow]]) -> Path:
        return self.write_table(key, aggregate_header(), aggregate(replicas))

    def write_table(
        self, key: str, header: Sequence[str], rows: Iterable[Sequence[object]]
    ) -> Path:
        self.ensure_root()
        path = self.path_for(key)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(value) for value in row])
        logger.debug("Wrote table", operation="write_table", path=str(path))
        return path

    def read_rows(self, key: str) -> list[MetricsRow]:
        with self.path_for(key).open(newline="") as fh:
            return [MetricsRow.model_validate(record) for record in csv.DictReader(fh)]

    def read_table(self, key: str) -> tuple[list[str], list[list[str]]]:
        with self.path_for(key).open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, [])
            return header, [row for row in reader]
