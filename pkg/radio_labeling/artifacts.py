"""Experiment artifacts on disk.

Every writer is deterministic: JSON with sorted keys, CSV with a fixed
column order, no timestamps. Identical scenarios give identical files.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Sequence

from .graph_core import format_node_values

logger = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "scenario",
    "algorithm",
    "nodes",
    "status",
    "rounds",
    "active_rounds",
    "processed_rounds",
    "transmissions",
    "deliveries",
    "collisions",
    "harmful_collisions",
    "max_message_bytes",
    "max_label_bits",
    "solved",
    "completion_round",
)


class ArtifactStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, filename: str) -> Path:
        return self.root / filename

    def store_labels(self, labels: Sequence[str], filename: str = "labels.txt") -> Path:
        """One ``node label`` line per node."""
        target = self.path(filename)
        target.write_text(format_node_values(labels))
        return target

    def store_json(self, data: Mapping[str, Any], filename: str) -> Path:
        target = self.path(filename)
        target.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        logger.debug("Wrote %s", target)
        return target

    def store_metrics(
        self, rows: Iterable[Mapping[str, Any]], filename: str = "metrics.csv"
    ) -> Path:
        target = self.path(filename)
        with target.open("w", newline="") as handle:
            writer = csv.DictWriter(
                handle, fieldnames=METRIC_COLUMNS, extrasaction="ignore"
            )
            writer.writeheader()
            for row in rows:
                writer.writerow(dict(row))
        return target

    def load_json(self, filename: str) -> Dict[str, Any]:
        return json.loads(self.path(filename).read_text())
