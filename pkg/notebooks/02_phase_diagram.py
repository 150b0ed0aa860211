"""Walkthrough: the four fates of a single ReLU unit on a class-1 point.

Each start (y0, z0) is classified analytically and then checked against a
direct integration of the gated dynamics. The script draws a coarse ASCII map.
"""
from collections import Counter

from neurodyn import phase

NORM = 0.7
rows = phase.scan_grid(NORM, grid=21, extent=2.0)

symbol = {"solves": "+", "dies": ".", "converges_to_zero": "o", "frozen": "|"}
by_z = {}
for r in rows:
    by_z.setdefault(r.z0, []).append(r)

print("z0 down, y0 across; + grows confident, . dead, o decays to zero, | frozen")
for z0 in sorted(by_z, reverse=True):
    line = "".join(symbol.get(r.region.kind.value, "?") if r.agree else "!" for r in by_z[z0])
    print(f"{z0:+5.1f} {line}")

print("\nregion counts:", dict(Counter(r.region.kind.value for r in rows)))
print("disagreements:", sum(not r.agree for r in rows))
