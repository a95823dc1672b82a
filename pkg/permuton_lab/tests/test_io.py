#!/usr/bin/env python

import json
from pathlib import Path

import pandas as pd
import pytest

from permuton_lab.io import (
    atomic_write,
    manifest_path,
    package_versions,
    write_csv,
    write_manifest,
)

###############################################################################


def test_atomic_write_cleans_up(tmp_path: Path) -> None:
    # Get data
    target = tmp_path / "data.csv"
    target.write_text("old\n")

    def broken(tmp: Path) -> None:
        tmp.write_text("partial")
        raise OSError("disk full")

    # Run tests
    with pytest.raises(OSError):
        atomic_write(target, broken)
    assert target.read_text() == "old\n"
    assert not (tmp_path / "data.csv.tmp").exists()


def test_write_csv_precision(tmp_path: Path) -> None:
    # Get data
    df = pd.DataFrame({"value": [1 / 3, 2 / 7]})
    path = write_csv(df, tmp_path / "values.csv")

    # Run tests
    assert pd.read_csv(path)["value"].tolist() == [1 / 3, 2 / 7]
    assert b"\r\n" not in path.read_bytes()


def test_manifest(tmp_path: Path) -> None:
    # Get data
    out = tmp_path / "table.csv"
    write_manifest(out, ["diag", "psi"], {"p": 0.5}, seed=37, wall_time=1.5)
    manifest = json.loads(manifest_path(out).read_text())

    # Run tests
    assert manifest_path(out).name == "table.manifest.json"
    assert manifest["seed"] == 37
    assert manifest["flags"] == {"p": 0.5}
    assert set(package_versions()) >= {"python", "numpy", "scipy", "pandas"}
