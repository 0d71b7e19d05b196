use crate::error::{Error, Result};
use crate::micromag::grid::MagGrid;
use crate::scalar::{normalize, Real, Vec3};

/// Unit magnetization direction per cell (zero outside the disc mask).
#[derive(Debug, Clone, PartialEq)]
pub struct Magnetization<T> {
    pub m: Vec<Vec3<T>>,
    /// Saturation magnetization, A/m.
    pub ms: T,
}

/// Vortex circulation and polarity plus the core position in the disc plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexState<T> {
    /// +1 for a core along +z.
    pub polarity: i8,
    /// +1 for clockwise in-plane curling seen from +z.
    pub circulation: i8,
    /// Core position relative to the disc axis, m.
    pub core_position: [T; 2],
}

impl<T: Real> Magnetization<T> {
    pub fn uniform(grid: &MagGrid<T>, ms: T, dir: Vec3<T>) -> Self {
        let d = normalize(dir);
        let m = grid.mask.iter().map(|&inside| if inside { d } else { [T::zero(); 3] }).collect();
        Self { m, ms }
    }

    /// Analytic vortex: tangential in-plane curling with a Gaussian
    /// out-of-plane core of radius `core_radius` centred at `center`.
    pub fn vortex(grid: &MagGrid<T>, ms: T, circulation: i8, polarity: i8, core_radius: T, center: [T; 2]) -> Self {
        let c = T::lit(f64::from(circulation.signum()));
        let p = T::lit(f64::from(polarity.signum()));
        let mut m = vec![[T::zero(); 3]; grid.len()];
        for (i, mi) in m.iter_mut().enumerate() {
            if !grid.mask[i] {
                continue;
            }
            let pos = grid.cell_center(i);
            let x = pos[0] - center[0];
            let y = pos[1] - center[1];
            let rho = (x * x + y * y).sqrt();
            let mz = p * (-(rho * rho) / (core_radius * core_radius)).exp();
            let inplane = (T::one() - mz * mz).max(T::zero()).sqrt();
            let (sx, sy) = if rho > T::zero() {
                (x / rho, y / rho)
            } else {
                (T::zero(), T::zero())
            };
            // clockwise seen from +z is the tangent (sin φ, -cos φ)
            *mi = normalize([c * sy * inplane, -c * sx * inplane, mz]);
        }
        Self { m, ms }
    }

    /// Mean of m over masked cells.
    pub fn mean(&self, grid: &MagGrid<T>) -> Vec3<T> {
        let mut acc = [T::zero(); 3];
        let mut n = 0usize;
        for (mi, &inside) in self.m.iter().zip(&grid.mask) {
            if inside {
                for k in 0..3 {
                    acc[k] += mi[k];
                }
                n += 1;
            }
        }
        let n = T::lit(n.max(1) as f64);
        [acc[0] / n, acc[1] / n, acc[2] / n]
    }

    /// Spatially averaged magnetization ⟨M⟩ = Ms ⟨m⟩, A/m.
    pub fn average_magnetization(&self, grid: &MagGrid<T>) -> Vec3<T> {
        let m = self.mean(grid);
        [m[0] * self.ms, m[1] * self.ms, m[2] * self.ms]
    }

    /// Largest deviation of |m| from 1 over masked cells.
    pub fn max_norm_error(&self, grid: &MagGrid<T>) -> T {
        self.m
            .iter()
            .zip(&grid.mask)
            .filter(|(_, &inside)| inside)
            .map(|(mi, _)| (crate::scalar::norm(*mi) - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Real>(&self) -> Magnetization<U> {
        Magnetization {
            m: self
                .m
                .iter()
                .map(|v| [U::lit(v[0].f64()), U::lit(v[1].f64()), U::lit(v[2].f64())])
                .collect(),
            ms: U::lit(self.ms.f64()),
        }
    }
}

/// Polarity, circulation and core position of a single-vortex state.
///
/// The polarity is the sign of m_z at the strongest out-of-plane cell of the
/// mid-plane layer. The circulation is the sign of the discrete circulation
/// integral of the in-plane magnetization along the disc rim (clockwise
/// positive). The core position is the m_z²-weighted centroid of the
/// mid-plane cells whose |m_z| exceeds half the peak value.
pub fn vortex_diagnostics<T: Real>(mag: &Magnetization<T>, grid: &MagGrid<T>) -> Result<VortexState<T>> {
    let z = grid.nz / 2;
    let layer = (0..grid.ny).flat_map(|y| (0..grid.nx).map(move |x| (x, y)));
    let mut best = T::zero();
    let mut best_mz = T::zero();
    for (x, y) in layer.clone() {
        let i = grid.index(x, y, z);
        if grid.mask[i] && mag.m[i][2].abs() > best {
            best = mag.m[i][2].abs();
            best_mz = mag.m[i][2];
        }
    }
    if best < T::lit(0.5) {
        return Err(Error::NotAVortex(format!("largest mid-plane |m_z| is {:.3}", best.f64())));
    }
    let polarity: i8 = if best_mz > T::zero() { 1 } else { -1 };
    let p = T::lit(f64::from(polarity));

    let half = best * T::lit(0.5);
    let (mut wsum, mut cx, mut cy) = (T::zero(), T::zero(), T::zero());
    let mut circ = T::zero();
    let mut rim_cells = 0usize;
    for (x, y) in layer {
        let i = grid.index(x, y, z);
        if !grid.mask[i] {
            continue;
        }
        let c = grid.cell_center(i);
        let mz = mag.m[i][2];
        if mz * p > half {
            let w = mz * mz;
            wsum += w;
            cx += w * c[0];
            cy += w * c[1];
        }
        let on_rim = x == 0
            || y == 0
            || x + 1 == grid.nx
            || y + 1 == grid.ny
            || !grid.mask[grid.index(x - 1, y, z)]
            || !grid.mask[grid.index(x + 1, y, z)]
            || !grid.mask[grid.index(x, y - 1, z)]
            || !grid.mask[grid.index(x, y + 1, z)];
        if on_rim {
            let rho = (c[0] * c[0] + c[1] * c[1]).sqrt();
            if rho > T::zero() {
                // (r̂ × m)_z > 0 for counter-clockwise curling
                circ += (c[0] * mag.m[i][1] - c[1] * mag.m[i][0]) / rho;
                rim_cells += 1;
            }
        }
    }
    if rim_cells == 0 || circ == T::zero() {
        return Err(Error::NotAVortex("no net in-plane circulation along the rim".into()));
    }
    let circulation: i8 = if circ < T::zero() { 1 } else { -1 };
    Ok(VortexState {
        polarity,
        circulation,
        core_position: [cx / wsum, cy / wsum],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{DiscGeometry, MaterialParams};

    fn grid() -> MagGrid<f64> {
        let cofe = MaterialParams::cofe();
        MagGrid::disc(&DiscGeometry::new(100e-9, 15e-9).unwrap(), 32, 32, 3, &cofe).unwrap()
    }

    #[test]
    fn ansatz_diagnostics() {
        let g = grid();
        for (c, p) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let m = Magnetization::vortex(&g, 1.9e6, c, p, 8e-9, [0.0, 0.0]);
            let s = vortex_diagnostics(&m, &g).unwrap();
            assert_eq!((s.circulation, s.polarity), (c, p));
            assert!(s.core_position[0].abs() < 1e-12 && s.core_position[1].abs() < 1e-12);
            assert!(m.max_norm_error(&g) < 1e-12);
        }
    }

    #[test]
    fn displaced_core_is_located() {
        let g = grid();
        let m = Magnetization::vortex(&g, 1.9e6, 1, 1, 8e-9, [20e-9, -10e-9]);
        let s = vortex_diagnostics(&m, &g).unwrap();
        assert!((s.core_position[0] - 20e-9).abs() < 3e-9);
        assert!((s.core_position[1] + 10e-9).abs() < 3e-9);
    }

    #[test]
    fn uniform_is_not_a_vortex() {
        let g = grid();
        let m = Magnetization::uniform(&g, 1.9e6, [1.0, 0.0, 0.0]);
        assert!(matches!(vortex_diagnostics(&m, &g), Err(Error::NotAVortex(_))));
    }

    #[test]
    fn average_excludes_outside_cells() {
        let g = grid();
        let m = Magnetization::uniform(&g, 2.0, [0.0, 0.0, 1.0]);
        assert_eq!(m.average_magnetization(&g), [0.0, 0.0, 2.0]);
        let v = Magnetization::vortex(&g, 1.9e6, 1, 1, 8e-9, [0.0, 0.0]);
        let avg = v.average_magnetization(&g);
        assert!(avg[0].abs() < 1e-6 * 1.9e6 && avg[1].abs() < 1e-6 * 1.9e6);
        assert!(avg[2] > 0.0);
    }
}
