"""Writes product_w_heavy.json: K(i,j) = m_i m_j, a = 1, w = m, v = w/2."""
import json
import pathlib

M = 32
n = 2 * M
masses = [float(k) for k in range(1, n + 1)]
doc = {
    "model": {
        "kernel": {"type": "table", "table": [[mi * mj for mj in masses] for mi in masses]},
        "num_classes": M,
        "mass_unit": 1.0,
        "dim": 1,
        "diffusivity": [1.0] * n,
        "weights": masses,
        "v_weights": [m / 2 for m in masses],
    },
    "grid": {"dim": 1, "cells_per_axis": 8, "length": 1.0},
    "init": {"kind": "monodisperse", "parameters": {"class": 1, "density": 1.0}},
    "time": {"dt": 0.0008, "t_end": 0.8, "integrator": "strang", "cadence": 10},
    "outputs": {"dir": "out/product_w_heavy", "snapshots": False},
}
out = pathlib.Path(__file__).with_name("product_w_heavy.json")
out.write_text(json.dumps(doc, indent=1) + "\n")
