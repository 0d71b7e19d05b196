//! OVF 2.0 text snapshots of the magnetization.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::micromag::grid::MagGrid;
use crate::micromag::state::Magnetization;
use crate::scalar::Real;

/// Write `mag` as a single-segment OVF 2.0 text file. Vectors are unit
/// directions; Ms is recorded in a `Desc` line.
pub fn write_ovf<T: Real, W: Write>(mut w: W, grid: &MagGrid<T>, mag: &Magnetization<T>, title: &str) -> Result<()> {
    let [ox, oy, oz] = grid.origin.map(|v| v.f64());
    let (dx, dy, dz) = (grid.dx.f64(), grid.dy.f64(), grid.dz.f64());
    writeln!(w, "# OOMMF OVF 2.0")?;
    writeln!(w, "# Segment count: 1")?;
    writeln!(w, "# Begin: Segment")?;
    writeln!(w, "# Begin: Header")?;
    writeln!(w, "# Title: {title}")?;
    writeln!(w, "# Desc: Ms = {:e} A/m", mag.ms.f64())?;
    writeln!(w, "# meshtype: rectangular")?;
    writeln!(w, "# meshunit: m")?;
    writeln!(w, "# xmin: {ox:e}")?;
    writeln!(w, "# ymin: {oy:e}")?;
    writeln!(w, "# zmin: {oz:e}")?;
    writeln!(w, "# xmax: {:e}", ox + dx * grid.nx as f64)?;
    writeln!(w, "# ymax: {:e}", oy + dy * grid.ny as f64)?;
    writeln!(w, "# zmax: {:e}", oz + dz * grid.nz as f64)?;
    writeln!(w, "# valuedim: 3")?;
    writeln!(w, "# valuelabels: m_x m_y m_z")?;
    writeln!(w, "# valueunits: 1 1 1")?;
    writeln!(w, "# xbase: {:e}", ox + 0.5 * dx)?;
    writeln!(w, "# ybase: {:e}", oy + 0.5 * dy)?;
    writeln!(w, "# zbase: {:e}", oz + 0.5 * dz)?;
    writeln!(w, "# xnodes: {}", grid.nx)?;
    writeln!(w, "# ynodes: {}", grid.ny)?;
    writeln!(w, "# znodes: {}", grid.nz)?;
    writeln!(w, "# xstepsize: {dx:e}")?;
    writeln!(w, "# ystepsize: {dy:e}")?;
    writeln!(w, "# zstepsize: {dz:e}")?;
    writeln!(w, "# End: Header")?;
    writeln!(w, "# Begin: Data Text")?;
    for (m, &inside) in mag.m.iter().zip(&grid.mask) {
        if inside {
            writeln!(w, "{:e} {:e} {:e}", m[0].f64(), m[1].f64(), m[2].f64())?;
        } else {
            writeln!(w, "0 0 0")?;
        }
    }
    writeln!(w, "# End: Data Text")?;
    writeln!(w, "# End: Segment")?;
    Ok(())
}

/// Contents of an OVF file: grid geometry, mask (non-zero cells) and data.
#[derive(Debug, Clone, PartialEq)]
pub struct OvfData {
    pub grid: MagGrid<f64>,
    pub mag: Magnetization<f64>,
}

/// Read a text OVF 2.0 file written by [`write_ovf`] or another tool.
/// Cells holding a zero vector are treated as outside the mask.
pub fn read_ovf<R: BufRead>(r: R) -> Result<OvfData> {
    let mut nodes = [0usize; 3];
    let mut step = [0.0f64; 3];
    let mut min = [0.0f64; 3];
    let mut ms = 1.0;
    let mut in_data = false;
    let mut values = Vec::new();
    let bad = |msg: &str| Error::Ovf(msg.to_string());
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let h = h.trim();
            let lower = h.to_ascii_lowercase();
            if lower.starts_with("begin: data") {
                if !lower.contains("text") {
                    return Err(bad("only text data blocks are supported"));
                }
                in_data = true;
                continue;
            }
            if lower.starts_with("end: data") {
                in_data = false;
                continue;
            }
            let Some((key, val)) = h.split_once(':') else {
                continue;
            };
            let key = key.trim().to_ascii_lowercase();
            let val = val.trim();
            let num = || val.parse::<f64>().map_err(|_| bad(&format!("bad value for {key}")));
            match key.as_str() {
                "xnodes" | "ynodes" | "znodes" => {
                    let n = val.parse().map_err(|_| bad("bad node count"))?;
                    nodes[usize::from(key.as_bytes()[0] - b'x')] = n;
                }
                "xstepsize" | "ystepsize" | "zstepsize" => step[usize::from(key.as_bytes()[0] - b'x')] = num()?,
                "xmin" | "ymin" | "zmin" => min[usize::from(key.as_bytes()[0] - b'x')] = num()?,
                "valuedim" if val != "3" => return Err(bad("valuedim must be 3")),
                "desc" => {
                    if let Some(rest) = val.strip_prefix("Ms =") {
                        let v = rest.split_whitespace().next().unwrap_or("");
                        ms = v.parse().map_err(|_| bad("bad Ms"))?;
                    }
                }
                _ => {}
            }
            continue;
        }
        if in_data {
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            let mut v = [0.0; 3];
            for c in &mut v {
                *c = it.next().ok_or_else(|| bad("short data line"))?.map_err(|_| bad("bad number"))?;
            }
            values.push(v);
        }
    }
    if nodes.contains(&0) || step.iter().any(|&s| s <= 0.0) {
        return Err(bad("missing mesh header"));
    }
    let mut grid = MagGrid::cuboid(nodes[0], nodes[1], nodes[2], step);
    if values.len() != grid.len() {
        return Err(bad(&format!("expected {} vectors, found {}", grid.len(), values.len())));
    }
    grid.origin = min;
    grid.mask = values.iter().map(|v| v.iter().any(|&c| c != 0.0)).collect();
    Ok(OvfData {
        grid,
        mag: Magnetization { m: values, ms },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{DiscGeometry, MaterialParams};

    #[test]
    fn roundtrip_preserves_state() {
        let geom = DiscGeometry::new(40e-9, 6e-9).unwrap();
        let grid = MagGrid::disc(&geom, 16, 16, 2, &MaterialParams::cofe()).unwrap();
        let mag = Magnetization::vortex(&grid, 1.9e6, -1, 1, 12e-9, [5e-9, 0.0]);
        let mut buf = Vec::new();
        write_ovf(&mut buf, &grid, &mag, "m").unwrap();
        let back = read_ovf(buf.as_slice()).unwrap();
        assert_eq!(back.grid.mask, grid.mask);
        assert_eq!(back.mag.ms, 1.9e6);
        for (a, b) in back.mag.m.iter().zip(&mag.m) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-15);
            }
        }
        assert!((back.grid.dx - grid.dx).abs() < 1e-24);
        assert!((back.grid.origin[2] - grid.origin[2]).abs() < 1e-24);
    }

    #[test]
    fn rejects_truncated_data() {
        let text = "# xnodes: 2\n# ynodes: 1\n# znodes: 1\n# xstepsize: 1e-9\n# ystepsize: 1e-9\n# zstepsize: 1e-9\n# Begin: Data Text\n1 0 0\n# End: Data Text\n";
        assert!(matches!(read_ovf(text.as_bytes()), Err(Error::Ovf(_))));
    }
}
