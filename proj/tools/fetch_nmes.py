#!/usr/bin/env python3
"""Fetch the NMES 1987-88 subsample (R package AER, data set NMES1988) and
write it as a CSV with the column names used by the regression examples.

The data are taken from the `rdatasets` wheel, which bundles the AER data
sets as compressed pandas pickles. Requires pip and pandas.

The raw-to-analysis column mapping lives in data/nmes_columns.json.

Usage: fetch_nmes.py [OUTPUT_DIR]   (default: $UNB_NMES_DIR or ./nmes-data)
"""

import hashlib
import io
import json
import lzma
import os
import pathlib
import pickle
import subprocess
import sys
import tempfile
import zipfile

MEMBER = "rdatasets/_data/AER/NMES1988.pkl.compress"
MAPPING = pathlib.Path(__file__).resolve().parent.parent / "data" / "nmes_columns.json"


def load_frame():
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "rdatasets"],
            check=True,
        )
        wheels = list(pathlib.Path(tmp).glob("rdatasets-*.whl"))
        if not wheels:
            raise SystemExit("rdatasets wheel not found after pip download")
        with zipfile.ZipFile(wheels[0]) as zf:
            raw = zf.read(MEMBER)
    return pickle.load(io.BytesIO(lzma.decompress(raw)))


def convert(df, mapping):
    import pandas as pd

    out = {}
    for name, rule in mapping["columns"].items():
        col = df[rule["from"]]
        out[name] = (col == rule["equals"]).astype(int) if "equals" in rule else col
    return pd.DataFrame(out)


def main():
    target = pathlib.Path(
        sys.argv[1] if len(sys.argv) > 1 else os.environ.get("UNB_NMES_DIR", "nmes-data")
    )
    target.mkdir(parents=True, exist_ok=True)
    mapping = json.loads(MAPPING.read_text())
    frame = convert(load_frame(), mapping)
    if len(frame) != mapping["rows"]:
        raise SystemExit(f"unexpected row count {len(frame)} (expected {mapping['rows']})")
    path = target / "nmes.csv"
    frame.to_csv(path, index=False)
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    print(f"wrote {path} ({len(frame)} rows)")
    print(f"sha256 {digest}")


if __name__ == "__main__":
    main()
