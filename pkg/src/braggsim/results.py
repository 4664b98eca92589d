"""Result tables and run manifests.

Tables are plain tab-delimited text with a '#'-prefixed provenance
header declaring a unit for every column; numbers render with repr-level
precision so reading a table back reproduces the values exactly.
Manifests are JSON; a hash over the reproducible subset (config, seed,
backend, scheme, tolerances, code version) is embedded in every table so
data files reference exactly one manifest.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


@dataclass
class ResultTable:
    """Rectangular numeric table with per-column units."""

    columns: list          # [(name, unit), ...]
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has "
                             f"{len(self.columns)} columns")
        self.rows.append(tuple(values))

    def write(self, path, provenance=None):
        lines = []
        for k, v in (provenance or {}).items():
            lines.append(f"# {k} = {v}")
        for i, (name, unit) in enumerate(self.columns):
            lines.append(f"# column {i} {name} [{unit}]")
        lines.append("\t".join(name for name, _ in self.columns))
        for row in self.rows:
            lines.append("\t".join(_fmt(v) for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path):
        columns, rows, header_done = [], [], False
        provenance = {}
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    body = line[1:].strip()
                    if body.startswith("column "):
                        _, _, name, unit = body.split(None, 3)
                        columns.append((name, unit.strip("[]")))
                    elif " = " in body:
                        k, v = body.split(" = ", 1)
                        provenance[k] = v
                    continue
                if not header_done:
                    header_done = True  # column-name line
                    continue
                if line:
                    rows.append(tuple(float(v) for v in line.split("\t")))
        t = cls(columns=columns, rows=rows)
        t.provenance = provenance
        return t


def manifest_hash(payload):
    """Hash of the reproducible identity of a run (no timing fields)."""
    s = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(s.encode()).hexdigest()[:16]


@dataclass
class RunManifest:
    """Provenance record written next to every result file."""

    command: str
    config_echo: dict
    backend: str
    scheme: str
    tolerances: dict
    seed: int
    code_version: str
    jobs: int = 1
    wall_time_s: float = 0.0
    timestamp: str = ""
    failures: list = field(default_factory=list)
    spot_check: dict = field(default_factory=dict)

    @property
    def hash(self):
        # identity of the computation: excludes timing and the [output]
        # plumbing so the same physics run hashes alike anywhere
        config = {k: v for k, v in self.config_echo.items() if k != "output"}
        return manifest_hash({"command": self.command, "config": config,
                              "backend": self.backend, "scheme": self.scheme,
                              "tolerances": self.tolerances, "seed": self.seed,
                              "code_version": self.code_version})

    def write(self, path):
        payload = {"manifest_hash": self.hash, "command": self.command,
                   "backend": self.backend, "scheme": self.scheme,
                   "tolerances": self.tolerances, "seed": self.seed,
                   "code_version": self.code_version, "jobs": self.jobs,
                   "wall_time_s": self.wall_time_s,
                   "timestamp": self.timestamp or time.strftime("%Y-%m-%dT%H:%M:%S"),
                   "failures": self.failures, "spot_check": self.spot_check,
                   "config": self.config_echo}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")

    def provenance(self, **extra):
        """Header block for result tables tied to this manifest."""
        out = {"manifest_hash": self.hash, "command": self.command,
               "backend": self.backend, "scheme": self.scheme,
               "seed": self.seed, "code_version": self.code_version}
        out.update(extra)
        return out


def output_dir(config_dir, override=None):
    root = os.environ.get("BRAGGSIM_OUTPUT_ROOT", "")
    d = override or config_dir
    path = os.path.join(root, d) if root else d
    os.makedirs(path, exist_ok=True)
    return path
