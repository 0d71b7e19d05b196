//! Standalone plotting scripts written next to the data they read.

pub const TRANSMISSION_PLOT: &str = r#"#!/usr/bin/env python3
# Heatmap of transmission.csv (columns b_dc_T, f_hz, transmission).
import sys
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "transmission.csv"
data = np.loadtxt(path, delimiter=",", skiprows=1)
b = np.unique(data[:, 0])
f = np.unique(data[:, 1])
t = data[:, 2].reshape(len(b), len(f)).T

fig, ax = plt.subplots(figsize=(6, 4.5))
mesh = ax.pcolormesh(b * 1e3, f * 1e-9, t, shading="auto", cmap="inferno")
fig.colorbar(mesh, ax=ax, label="T")
f_cpw = f[len(f) // 2]
ax.axhline(f_cpw * 1e-9, color="yellow", ls="--", lw=1)
col = t.argmin(axis=0)
ax.set_xlabel("B_DC (mT)")
ax.set_ylabel("f (GHz)")
fig.tight_layout()
out = path.rsplit(".", 1)[0] + ".png"
fig.savefig(out, dpi=150)
print(out)
"#;
