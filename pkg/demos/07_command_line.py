"""
The command-line interface, driven from Python.

``conegam fit`` writes summary.json and fitted.csv; ``conegam grid`` exports
a fitted two-predictor surface.  The same calls work from a shell, e.g.::

    conegam fit --data d.csv --model "y ~ s.incr(x) + factor(g)" --out fit1
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from conegam.cli import main

rng = np.random.default_rng(7)
n = 200
x, x1, x2 = rng.uniform(size=(3, n))
g = rng.choice(["a", "b", "c"], n)
y = np.sqrt(x) + (g == "b") * 0.5 + rng.normal(scale=0.2, size=n)
y2 = x1 + x2 + rng.normal(scale=0.2, size=n)

work = Path(tempfile.mkdtemp())
data = work / "d.csv"
rows = ["y,y2,x,x1,x2,g"] + [f"{a:.6f},{b:.6f},{c:.6f},{d:.6f},{e:.6f},{f}"
                              for a, b, c, d, e, f in zip(y, y2, x, x1, x2, g)]
data.write_text("\n".join(rows) + "\n")

code = main(["fit", "--data", str(data), "--model", "y ~ s.incr(x) + factor(g)",
             "--nsim", "50", "--seed", "1", "--out", str(work / "fit1")])
summary = json.loads((work / "fit1" / "summary.json").read_text())
print("exit status", code, " edf", round(summary["edf"], 3), " CIC", round(summary["cic"]["value"], 4))
for row in summary["coefficients"]["rows"]:
    print(f"  {row['term']:<12} {row['estimate']:8.4f}  p = {row['p_value']:.3g}")

main(["fit", "--data", str(data), "--model", "y2 ~ ii(x1, x2, numknots = c(5, 5))",
      "--out", str(work / "fit2")])
main(["grid", "--fit", str(work / "fit2"), "--x1", "x1", "--x2", "x2", "--resolution", "3"])
print((work / "fit2" / "grid.csv").read_text())

# bad input gives exit status 2
print("unknown symbol ->", main(["fit", "--data", str(data), "--model", "y ~ s.wiggly(x)",
                                 "--out", str(work / "bad")]))
