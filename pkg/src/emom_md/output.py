"""CSV and manifest emission.

Floats are written with 17 significant digits so parsing an emitted file
reproduces the in-memory values exactly.  CSV bodies are deterministic for
identical inputs; volatile metadata (timestamps, wall-clock) lives only in
the manifest.
"""
from __future__ import annotations

import json
import platform
import subprocess
import sys
import time
from pathlib import Path


def format_float(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            cell if isinstance(cell, str) else format_float(cell)
            for cell in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Read back a CSV written by :func:`write_csv`; numeric cells become
    floats, everything else stays a string."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row = []
        for cell in line.split(","):
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return header, rows


def _git_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"],
                             capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).parent)
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def environment_info() -> dict:
    import numpy
    import scipy
    return {
        "python": sys.version.split()[0],
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor() or "unknown",
        "git_revision": _git_revision(),
    }


def write_manifest(outdir, command: str, config_path, config: dict,
                   outputs, wall_clock_s: float, flags: dict,
                   notes: dict | None = None) -> Path:
    """Run metadata next to the data files.  Absolute times on this hardware
    are not the contract -- slopes and invariants are -- so the environment
    note exists to qualify the timings."""
    payload = {
        "command": command,
        "config_path": str(config_path),
        "config": config,
        "outputs": sorted(str(o) for o in outputs),
        "wall_clock_s": wall_clock_s,
        "flags": flags,
        "environment": environment_info(),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if notes:
        payload["notes"] = notes
    path = Path(outdir) / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
