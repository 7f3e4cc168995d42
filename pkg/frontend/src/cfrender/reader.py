"""CSV readers for the two documented schemas.

The renderer owns its own parser on purpose: the boundary to the
producer is the file format, nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GREENS_COLUMNS = ("omega0", "eta", "level", "i", "j",
                  "g_re", "g_im", "oracle_re", "oracle_im", "abs_err")
SHOTS_COLUMNS = ("shots", "repeat", "level", "max_err")


class SchemaError(ValueError):
    """Input file does not match a documented CSV schema."""


class SelectionError(ValueError):
    """No rows survive the requested pair/level selection."""


@dataclass
class Table:
    metadata: dict[str, str]
    columns: dict[str, np.ndarray]
    kind: str                     # "greens" | "shots"

    def __len__(self) -> int:
        first = next(iter(self.columns.values()))
        return first.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise SchemaError(f"column {name!r} missing from input")
        return self.columns[name]


def read_table(path: str) -> Table:
    metadata: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    metadata[key] = value
                continue
            if header is None:
                header = line.split(",")
                continue
            rows.append([float(x) for x in line.split(",")])
    if header is None:
        raise SchemaError(f"{path} has no CSV header line")
    if tuple(header) == GREENS_COLUMNS:
        kind = "greens"
    elif tuple(header) == SHOTS_COLUMNS:
        kind = "shots"
    else:
        expected = set(GREENS_COLUMNS) | set(SHOTS_COLUMNS)
        unknown = [c for c in header if c not in expected]
        missing = [c for c in GREENS_COLUMNS if c not in header]
        name = (unknown or missing or ["?"])[0]
        raise SchemaError(f"unrecognized CSV header (column {name!r})")
    data = (np.asarray(rows, dtype=float) if rows
            else np.zeros((0, len(header))))
    columns = {name: data[:, k] for k, name in enumerate(header)}
    return Table(metadata=metadata, columns=columns, kind=kind)
