use crate::error::{Error, Result};
use crate::physics::{DiscGeometry, MaterialParams};
use crate::scalar::Real;

/// Finite-difference box around a disc; cell (x, y, z) has linear index
/// `(z * ny + y) * nx + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagGrid<T> {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: T,
    pub dy: T,
    pub dz: T,
    /// Inside-disc flag per cell.
    pub mask: Vec<bool>,
    /// Lower corner of the box relative to the disc centre, m.
    pub origin: [T; 3],
}

/// Cell counts used for the three reference discs (r, t in nm).
const REFERENCE_GRIDS: [(f64, f64, [usize; 3]); 3] = [
    (100.0, 15.0, [64, 64, 8]),
    (200.0, 30.0, [128, 128, 16]),
    (400.0, 60.0, [256, 256, 32]),
];

const TARGET_CELL_XY_M: f64 = 3.125e-9;
const TARGET_CELL_Z_M: f64 = 1.875e-9;

fn nearest_pow2(x: f64) -> usize {
    if x <= 1.0 {
        return 1;
    }
    1usize << (x.log2().round() as u32)
}

/// Default cell counts: the reference partition for the tabulated discs,
/// otherwise the nearest power-of-two partition of the 2r × 2r × t box.
pub fn default_counts<T: Real>(geom: &DiscGeometry<T>) -> [usize; 3] {
    let r_nm = geom.r.f64() * 1e9;
    let t_nm = geom.t.f64() * 1e9;
    for (r, t, n) in REFERENCE_GRIDS {
        if (r - r_nm).abs() < 1e-6 && (t - t_nm).abs() < 1e-6 {
            return n;
        }
    }
    let nxy = nearest_pow2(2.0 * geom.r.f64() / TARGET_CELL_XY_M);
    let nz = nearest_pow2(geom.t.f64() / TARGET_CELL_Z_M);
    [nxy, nxy, nz]
}

/// Disc grid with the default partition.
pub fn build_disc_grid<T: Real>(geom: &DiscGeometry<T>, material: &MaterialParams<T>) -> Result<MagGrid<T>> {
    let [nx, ny, nz] = default_counts(geom);
    MagGrid::disc(geom, nx, ny, nz, material)
}

impl<T: Real> MagGrid<T> {
    /// Disc of the given geometry on an explicit `nx × ny × nz` partition of
    /// its bounding box.
    pub fn disc(geom: &DiscGeometry<T>, nx: usize, ny: usize, nz: usize, material: &MaterialParams<T>) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::param("grid", "cell counts must be positive"));
        }
        let two = T::lit(2.0);
        let dx = two * geom.r / T::lit(nx as f64);
        let dy = two * geom.r / T::lit(ny as f64);
        let dz = geom.t / T::lit(nz as f64);
        let lex = material.exchange_length();
        let cell = dx.max(dy).max(dz);
        if !(cell < two * lex) {
            return Err(Error::CellTooCoarse {
                cell_m: cell.f64(),
                lex_m: lex.f64(),
            });
        }
        let origin = [-geom.r, -geom.r, -geom.t / two];
        let mut grid = Self {
            nx,
            ny,
            nz,
            dx,
            dy,
            dz,
            mask: vec![false; nx * ny * nz],
            origin,
        };
        let r2 = geom.r * geom.r;
        for i in 0..grid.len() {
            let c = grid.cell_center(i);
            grid.mask[i] = c[0] * c[0] + c[1] * c[1] <= r2;
        }
        Ok(grid)
    }

    /// Full rectangular box (every cell magnetic), without the exchange
    /// length check. Used for test geometries such as cubes and films.
    pub fn cuboid(nx: usize, ny: usize, nz: usize, cell: [T; 3]) -> Self {
        let two = T::lit(2.0);
        let origin = [
            -cell[0] * T::lit(nx as f64) / two,
            -cell[1] * T::lit(ny as f64) / two,
            -cell[2] * T::lit(nz as f64) / two,
        ];
        Self {
            nx,
            ny,
            nz,
            dx: cell[0],
            dy: cell[1],
            dz: cell[2],
            mask: vec![true; nx * ny * nz],
            origin,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let x = i % self.nx;
        let y = (i / self.nx) % self.ny;
        let z = i / (self.nx * self.ny);
        (x, y, z)
    }

    /// Cell centre relative to the disc centre, m.
    pub fn cell_center(&self, i: usize) -> [T; 3] {
        let (x, y, z) = self.coords(i);
        let half = T::lit(0.5);
        [
            self.origin[0] + (T::lit(x as f64) + half) * self.dx,
            self.origin[1] + (T::lit(y as f64) + half) * self.dy,
            self.origin[2] + (T::lit(z as f64) + half) * self.dz,
        ]
    }

    pub fn cell_volume(&self) -> T {
        self.dx * self.dy * self.dz
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn cell_size(&self) -> [T; 3] {
        [self.dx, self.dy, self.dz]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_partitions() {
        let cofe = MaterialParams::<f64>::cofe();
        let g = build_disc_grid(&DiscGeometry::new(100e-9, 15e-9).unwrap(), &cofe).unwrap();
        assert_eq!((g.nx, g.ny, g.nz), (64, 64, 8));
        assert!((g.dx - 3.125e-9).abs() < 1e-15);
        assert!((g.dz - 1.875e-9).abs() < 1e-15);
        let g = build_disc_grid(&DiscGeometry::new(200e-9, 30e-9).unwrap(), &cofe).unwrap();
        assert_eq!((g.nx, g.ny, g.nz), (128, 128, 16));
    }

    #[test]
    fn mask_area_ratio() {
        let cofe = MaterialParams::<f64>::cofe();
        let geom = DiscGeometry::new(200e-9, 30e-9).unwrap();
        let g = MagGrid::disc(&geom, 128, 128, 1, &cofe);
        // dz = 30 nm is too coarse for CoFe
        assert!(matches!(g, Err(Error::CellTooCoarse { .. })));
        let g = MagGrid::disc(&geom, 128, 128, 16, &cofe).unwrap();
        let ratio = g.active_count() as f64 / g.len() as f64;
        assert!((ratio / (std::f64::consts::PI / 4.0) - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn other_radii_use_power_of_two() {
        let cofe = MaterialParams::<f64>::cofe();
        let g = build_disc_grid(&DiscGeometry::new(150e-9, 20e-9).unwrap(), &cofe).unwrap();
        assert!(g.nx.is_power_of_two() && g.nz.is_power_of_two());
        assert_eq!(g.nx, 128);
    }
}
