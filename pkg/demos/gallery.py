"""Build and verify the unit-circle and Newton scenarios, writing images.

    python3 demos/gallery.py [OUTDIR]

Each run leaves regions, map, chart, basin/count images and the report in
OUTDIR/<name>/.
"""
import sys
import time
from pathlib import Path

from basin_forge.pipeline import RunConfig, run_pipeline

RUNS = {
    "unit_circle": RunConfig(scenario="unit_circle", eps=0.25, resolution=512),
    "newton3": RunConfig(scenario="newton", d=3, eps=0.35, resolution=512),
    "half_planes": RunConfig(scenario="half_planes", eps=0.3, resolution=512),
}


def main(out):
    for name, cfg in RUNS.items():
        t0 = time.perf_counter()
        res = run_pipeline(cfg, Path(out) / name)
        v = res.report.values
        dists = " ".join(f"{k[10:]}={v[k]:.3f}" for k in v if k.startswith("hausdorff_"))
        print(f"{name:12s} pass={res.passed} n={res.map.n} poles={res.map.rational.size} {dists}  ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
