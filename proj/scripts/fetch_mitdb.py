#!/usr/bin/env python3
"""Fetch MIT-BIH record 100 into tests/data/mitdb/ for the acceptance suite.

Downloads 100.hea and 100.dat verbatim from PhysioNet and converts the beat
annotations (100.atr) to the CSV layout the tests read (fs=360 header, one
strictly increasing sample index per line). Decoding the .atr file needs the
`wfdb` package: pip install wfdb
"""

import sys
import urllib.request
from pathlib import Path

BASE = "https://physionet.org/files/mitdb/1.0.0/"

# WFDB beat annotation mnemonics; everything else (rhythm changes, artifact
# flags, comments) is not a beat and must not enter the benchmark.
BEAT_CODES = set("NLRBAaJSVrFejnE/fQ")


def main() -> int:
    out_dir = Path(__file__).resolve().parent.parent / "tests" / "data" / "mitdb"
    out_dir.mkdir(parents=True, exist_ok=True)

    for name in ("100.hea", "100.dat"):
        dest = out_dir / name
        if dest.exists():
            print(f"already present: {dest}")
            continue
        print(f"downloading {BASE}{name}")
        urllib.request.urlretrieve(BASE + name, dest)

    ann_csv = out_dir / "100.ann.csv"
    if ann_csv.exists():
        print(f"already present: {ann_csv}")
        return 0

    try:
        import wfdb
    except ImportError:
        print(
            "error: the wfdb package is needed to decode 100.atr;\n"
            "       pip install wfdb   and re-run this script",
            file=sys.stderr,
        )
        return 1

    print("downloading and decoding annotations (100.atr)")
    ann = wfdb.rdann("100", "atr", pn_dir="mitdb")
    beats = [int(s) for s, sym in zip(ann.sample, ann.symbol) if sym in BEAT_CODES]
    beats.sort()
    with open(ann_csv, "w") as f:
        f.write("fs=360\n")
        for s in beats:
            f.write(f"{s}\n")
    print(f"wrote {ann_csv} ({len(beats)} beats)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
