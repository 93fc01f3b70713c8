"""
Batch segmentation and evaluation from the command line
=======================================================

Generate a few synthetic micrographs, run ``asocem segment`` over the
directory and score the masks with ``asocem eval``. The same calls work as
shell commands once the package is installed.
"""

import json
import tempfile
from pathlib import Path

from asocem.cli import main

work = Path(tempfile.mkdtemp())
(work / "mics").mkdir()
(work / "truth").mkdir()

for seed in range(3):
    spec = {
        "height": 800, "width": 800, "seed": seed,
        "geometry": {"type": "disks", "disks": [{"center": [0.3, 0.3], "radius": 0.15},
                                                {"center": [0.7, 0.65], "radius": 0.12}]},
        "region0": {"mean": 0.0, "sd": 2.0},
        "region1": {"mean": 0.0, "sd": 1.0},
    }
    (work / f"spec{seed}.json").write_text(json.dumps(spec))
    main(["synth", "--spec", str(work / f"spec{seed}.json"),
          "--out-mrc", str(work / "mics" / f"mic{seed}.mrc"),
          "--out-gt", str(work / "truth" / f"mic{seed}_mask.png")])

# flags override anything in an optional --config JSON file
main(["segment", "--input", str(work / "mics"), "--output", str(work / "masks"),
      "--particle-size", "40"])
print(json.loads((work / "masks" / "mic0_mask.json").read_text())["status"])

# predictions and truth are paired by filename stem
main(["eval", "--pred", str(work / "masks"), "--gt", str(work / "truth"), "--report", str(work / "report.csv")])
print((work / "report.csv").read_text())
