#!/usr/bin/env python

"""Atomic result files and run manifests."""

from __future__ import annotations

import json
import logging
import os
import platform
import sys
from collections.abc import Callable
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import pandas as pd

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_MANIFEST_PACKAGES = [
    "permuton-lab",
    "numpy",
    "scipy",
    "pandas",
    "pot",
    "networkx",
    "sortedcontainers",
    "sympy",
]

###############################################################################


def atomic_write(path: str | Path, write: Callable[[Path], None]) -> Path:
    """
    Write through a temporary sibling file, then rename it over `path`.

    `write` receives the temporary path. Readers never see a partial file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        write(tmp)
        with open(tmp, "rb+") as handle:
            os.fsync(handle.fileno())
        os.replace(tmp, path)
    except OSError:
        tmp.unlink(missing_ok=True)
        raise

    log.info(f"Wrote {path}")
    return path


def write_csv(df: pd.DataFrame, path: str | Path) -> Path:
    return atomic_write(
        path,
        lambda tmp: df.to_csv(
            tmp,
            index=False,
            float_format="%.17g",
            lineterminator="\n",
            encoding="utf-8",
        ),
    )


def write_json(payload: dict, path: str | Path) -> Path:
    def dump(tmp: Path) -> None:
        with open(tmp, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True, default=str)
            handle.write("\n")

    return atomic_write(path, dump)


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in _MANIFEST_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "uninstalled"
    return versions


def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".manifest.json")


def write_manifest(
    out: str | Path,
    command: list[str],
    flags: dict,
    seed: int,
    wall_time: float,
) -> Path:
    """Write the run manifest next to the data file `out`."""
    return write_json(
        {
            "command": command,
            "flags": flags,
            "seed": seed,
            "versions": package_versions(),
            "wall_time_seconds": wall_time,
            "argv": sys.argv,
        },
        manifest_path(out),
    )
