"""CSV and manifest output with byte-stable formatting."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path


def format_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    try:
        import numpy as np

        if isinstance(v, np.integer):
            return str(int(v))
        if isinstance(v, np.bool_):
            return "1" if v else "0"
    except ImportError:  # pragma: no cover
        pass
    if isinstance(v, float) or hasattr(v, "__float__"):
        x = float(v)
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    return str(v)


def write_csv(path, header, rows) -> Path:
    """Comma-separated, ``.`` decimal, 17 significant digits, ``\\n`` line ends."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        rows = list(r)
    if not rows:
        return [], []
    return rows[0], rows[1:]


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if hasattr(v, "tolist"):
        return v.tolist()
    if hasattr(v, "__float__"):
        return float(v)
    return str(v)


def module_versions() -> dict:
    import numba
    import numpy
    import scipy

    from . import __version__

    return {
        "nucleate": __version__,
        "numba": numba.__version__,
        "numpy": numpy.__version__,
        "python": platform.python_version(),
        "scipy": scipy.__version__,
    }


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: int | None
    versions: dict = field(default_factory=module_versions)
    duration_s: float = 0.0
    outputs: dict = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter, repr=False)

    def add_output(self, path) -> None:
        path = Path(path)
        self.outputs[path.name] = sha256_file(path)

    def write(self, directory) -> Path:
        self.duration_s = time.perf_counter() - self.started
        data = asdict(self)
        data.pop("started")
        return write_json(Path(directory) / "manifest.json", data)
