#!/usr/bin/env python3
"""Write diabetes.csv, phoneme.csv and german.csv from the keel-ds wheel.

The wheel ships KEEL copies of the UCI Pima Indians Diabetes, Phoneme and
Statlog German Credit tables as headerless .dat files with the class in the
last column. Each output CSV gets a header x1..xD,class.

    python3 tools/fetch_keel_datasets.py [--out data] [--wheel path.whl]
"""

import argparse
import csv
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

PACKAGE = "keel-ds==0.2.5"
TABLES = {"diabetes": "pima", "phoneme": "phoneme", "german": "german"}


def download_wheel(dest):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:", "-d", str(dest), PACKAGE],
        check=True,
    )
    wheels = sorted(pathlib.Path(dest).glob("keel_ds-*.whl"))
    if not wheels:
        sys.exit("pip did not produce a keel_ds wheel")
    return wheels[0]


def convert(raw_text):
    rows = [[cell.strip() for cell in row] for row in csv.reader(io.StringIO(raw_text)) if row]
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged rows")
    header = [f"x{i + 1}" for i in range(width - 1)] + ["class"]
    return header, rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data", help="output directory (default: data)")
    ap.add_argument("--wheel", help="use an already downloaded keel_ds wheel")
    args = ap.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheel = pathlib.Path(args.wheel) if args.wheel else download_wheel(tmp)
        with zipfile.ZipFile(wheel) as z:
            for name, source in TABLES.items():
                text = z.read(f"keel_ds/data/balanced/raw/{source}.dat").decode("utf-8")
                header, rows = convert(text)
                with open(out / f"{name}.csv", "w", newline="") as f:
                    w = csv.writer(f, lineterminator="\n")
                    w.writerow(header)
                    w.writerows(rows)
                print(f"{out / (name + '.csv')}: {len(rows)} rows, {len(header) - 1} features")


if __name__ == "__main__":
    main()
