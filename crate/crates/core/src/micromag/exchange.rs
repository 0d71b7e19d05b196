use rayon::prelude::*;

use crate::micromag::grid::MagGrid;
use crate::physics::PhysicalConstants;
use crate::scalar::{Real, Vec3};

/// Six-neighbour exchange field H = (2A / (μ0 Ms)) ∇²m in A/m, with free
/// boundaries at the mask edge: missing neighbours do not contribute.
/// The result is written into `out` (zero outside the mask).
pub fn exchange_field<T: Real>(m: &[Vec3<T>], grid: &MagGrid<T>, aex: T, ms: T, out: &mut [Vec3<T>]) {
    let mu0 = PhysicalConstants::<T>::si().mu0;
    let pre = T::lit(2.0) * aex / (mu0 * ms);
    let w = [pre / (grid.dx * grid.dx), pre / (grid.dy * grid.dy), pre / (grid.dz * grid.dz)];
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let mask = &grid.mask;
    out.par_iter_mut().enumerate().for_each(|(i, h)| {
        *h = [T::zero(); 3];
        if !mask[i] {
            return;
        }
        let x = i % nx;
        let y = (i / nx) % ny;
        let z = i / (nx * ny);
        let mi = m[i];
        let mut add = |j: usize, wk: T| {
            if mask[j] {
                let mj = m[j];
                for k in 0..3 {
                    h[k] += wk * (mj[k] - mi[k]);
                }
            }
        };
        if x > 0 {
            add(i - 1, w[0]);
        }
        if x + 1 < nx {
            add(i + 1, w[0]);
        }
        if y > 0 {
            add(i - nx, w[1]);
        }
        if y + 1 < ny {
            add(i + nx, w[1]);
        }
        if z > 0 {
            add(i - nx * ny, w[2]);
        }
        if z + 1 < nz {
            add(i + nx * ny, w[2]);
        }
    });
}
