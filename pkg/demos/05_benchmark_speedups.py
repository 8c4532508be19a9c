"""Timing comparison: where the inverse-depth formulations save work.

Two phases matter per frame: building the per-frame integral channels
(9 vs 4 for implicit fits, 8 vs 3 for explicit) and the per-window fit
(the explicit inverse-depth fit reuses one cached factorization per window).
Absolute numbers are machine-specific; the ratios are the story.
"""

from rangefit import BenchConfig, run_bench

config = BenchConfig(
    width=640, height=480, tile=50,
    plane_counts=(0, 1, 50, 200),
    repetitions=5, warmup=2, seed=0,
)
report = run_bench(config)

print(report.summary())
print()
predicted = {"implicit": 20 / 44, "explicit": 15 / 39}
for kind in ("implicit", "explicit"):
    build = report.build_ratio(kind)
    fit = report.per_fit_ratio(kind)
    print(f"{kind:>9}: per-frame build ratio {build:.2f} (op-count model predicts "
          f"{predicted[kind]:.2f}), per-fit ratio {fit:.2f}")

with open("demo_bench.csv", "w") as fh:
    fh.write(report.to_csv())
print("\nwrote demo_bench.csv (method,backend,phase,plane_count,rep,seconds)")
