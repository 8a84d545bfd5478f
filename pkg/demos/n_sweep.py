"""Does composing more P_lam steps than the minimum sharpen the boundary?

    python3 demos/n_sweep.py

Runs the Newton scenario with n forced to the minimum and above it and
prints the four Hausdorff distances for each n.
"""
from basin_forge.pipeline import RunConfig, run_pipeline


def show(res):
    v = res.report.values
    dists = "  ".join(f"{k[10:]}={v[k]:.4f}" for k in v if k.startswith("hausdorff_"))
    print(f"n={res.map.n:3d}  {dists}  nonconverged={v['nonconverged_fraction']:.4f}")


cfg = dict(scenario="newton", d=3, eps=0.35, resolution=512)
first = run_pipeline(RunConfig(**cfg))
show(first)
for extra in (5, 15):
    show(run_pipeline(RunConfig(**cfg, min_n=first.map.n + extra)))
