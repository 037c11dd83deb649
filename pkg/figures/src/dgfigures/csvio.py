"""Reader for the dgflow CSV format.

Files carry `# key = value` metadata lines, then a header row, then data
rows.  Columns are kept as strings; numeric views are produced on demand
so non-numeric columns (kind, status, flags) stay usable.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class SchemaError(Exception):
    """The CSV is missing, empty, or does not match the expected schema."""


@dataclass
class Table:
    path: Path
    meta: dict[str, str]
    header: list[str]
    cells: dict[str, list[str]] = field(repr=False)

    @property
    def n_rows(self) -> int:
        return len(self.cells[self.header[0]]) if self.header else 0

    def require(self, names) -> None:
        missing = [n for n in names if n not in self.header]
        if missing:
            raise SchemaError(f"{self.path}: missing columns "
                              + ", ".join(missing))

    def floats(self, name: str) -> np.ndarray:
        if name not in self.header:
            raise SchemaError(f"{self.path}: missing columns {name}")
        try:
            return np.array([float(v) for v in self.cells[name]])
        except ValueError as err:
            raise SchemaError(f"{self.path}: column {name} is not numeric "
                              f"({err})") from None

    def strings(self, name: str) -> list[str]:
        if name not in self.header:
            raise SchemaError(f"{self.path}: missing columns {name}")
        return self.cells[name]

    def meta_float(self, key: str, default: float | None = None) -> float:
        if key not in self.meta:
            if default is None:
                raise SchemaError(f"{self.path}: missing metadata key {key}")
            return default
        return float(self.meta[key])


def read_table(path) -> Table:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise SchemaError(f"{path}: {err.strerror or err}") from None

    meta: dict[str, str] = {}
    header: list[str] = []
    rows: list[list[str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        parts = [p.strip() for p in line.split(",")]
        if not header:
            header = parts
            continue
        if len(parts) != len(header):
            raise SchemaError(f"{path}: line {lineno} has {len(parts)} "
                              f"fields, header has {len(header)}")
        rows.append(parts)

    if not header:
        raise SchemaError(f"{path}: no header row")
    if not rows:
        raise SchemaError(f"{path}: no data rows")

    cells = {name: [r[i] for r in rows] for i, name in enumerate(header)}
    return Table(path=path, meta=meta, header=header, cells=cells)
