//! Supercurrent distribution across a thin superconducting strip and the
//! field it produces in the disc plane.

use std::io::Write;

use crate::error::{Error, Result};
use crate::micromag::MagGrid;
use crate::physics::{DiscGeometry, PhysicalConstants, ResonatorSpec};
use crate::scalar::{Real, Vec3};

/// Discretization of the strip cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StripModel {
    /// Cells across the width.
    pub cells: usize,
    /// Current layers stacked through the film thickness.
    pub layers: usize,
}

impl Default for StripModel {
    fn default() -> Self {
        Self { cells: 400, layers: 8 }
    }
}

/// Sheet current j(x) across the strip, piecewise constant on cells.
/// The current flows along -z so that the field above the strip points
/// along +x.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetCurrentDistribution<T> {
    /// Cell centres, m.
    pub x_samples: Vec<T>,
    /// Cell edges (len = cells + 1), m.
    pub edges: Vec<T>,
    /// Cell-averaged sheet current density, A/m.
    pub j: Vec<T>,
    pub total_current: T,
    pub w: T,
    pub film_thickness: T,
    pub pearl_length: T,
    /// Set when the strip is narrower than two Pearl lengths and the
    /// current is spread uniformly.
    pub uniform_fallback: bool,
}

impl<T: Real> SheetCurrentDistribution<T> {
    /// ∫ j dx.
    pub fn integral(&self) -> T {
        self.j
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&j, e)| j * (e[1] - e[0]))
            .fold(T::zero(), |a, b| a + b)
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.j.iter_mut().for_each(|j| *j *= factor);
        out.total_current *= factor;
        out
    }
}

/// Thin-strip distribution j ∝ 1/sqrt(1-(2x/w)²), held at its value a
/// Pearl length from each edge, normalized to `current`.
pub fn strip_current_distribution<T: Real>(spec: &ResonatorSpec<T>, current: T, model: StripModel) -> Result<SheetCurrentDistribution<T>> {
    if !(current >= T::zero()) {
        return Err(Error::param("current", "must be non-negative"));
    }
    if model.cells < 2 || model.layers < 1 {
        return Err(Error::param("strip model", "need at least two cells and one layer"));
    }
    let w = spec.w;
    let half = w / T::lit(2.0);
    let lambda = spec.pearl_length();
    let n = model.cells;
    let edges: Vec<T> = (0..=n).map(|k| -half + w * T::lit(k as f64 / n as f64)).collect();
    let x_samples = edges.windows(2).map(|e| (e[0] + e[1]) / T::lit(2.0)).collect();
    let uniform = lambda >= half;
    let j = if uniform {
        vec![current / w; n]
    } else {
        // primitive of the capped profile, in units where j(0) = 1
        let xc = half - lambda;
        let cap = T::one() / (T::one() - (xc / half).powi(2)).sqrt();
        let prim = |x: T| -> T {
            let s = x.signum();
            let a = x.abs();
            let v = if a <= xc {
                half * (a / half).asin()
            } else {
                half * (xc / half).asin() + cap * (a - xc)
            };
            s * v
        };
        let total = prim(half) - prim(-half);
        let scale = current / total;
        edges
            .windows(2)
            .map(|e| (prim(e[1]) - prim(e[0])) / (e[1] - e[0]) * scale)
            .collect()
    };
    Ok(SheetCurrentDistribution {
        x_samples,
        edges,
        j,
        total_current: current,
        w,
        film_thickness: spec.film_thickness,
        pearl_length: lambda,
        uniform_fallback: uniform,
    })
}

/// Field of a uniform current ribbon x' ∈ [x1, x2] at height y' carrying
/// sheet current `k` along -z, evaluated at (x, y).
fn ribbon<T: Real>(k: T, x1: T, x2: T, yp: T, x: T, y: T) -> [T; 2] {
    let dy = y - yp;
    let (u1, u2) = (x - x1, x - x2);
    let bx = if dy == T::zero() {
        T::zero()
    } else {
        (u1 / dy).atan() - (u2 / dy).atan()
    };
    let by = -T::lit(0.5) * ((u1 * u1 + dy * dy) / (u2 * u2 + dy * dy)).ln();
    [k * bx, k * by]
}

fn inside_strip<T: Real>(dist: &SheetCurrentDistribution<T>, x: T, y: T) -> bool {
    x.abs() <= dist.w / T::lit(2.0) && y <= T::zero() && y >= -dist.film_thickness
}

/// Field of the strip at a point in the z = 0 plane, T. Returns `None`
/// inside the conductor.
pub fn field_at<T: Real>(dist: &SheetCurrentDistribution<T>, layers: usize, x: T, y: T) -> Option<Vec3<T>> {
    if inside_strip(dist, x, y) {
        return None;
    }
    let mu0 = PhysicalConstants::<T>::si().mu0;
    let nl = layers.max(1);
    let share = T::one() / T::lit(nl as f64);
    let mut b = [T::zero(); 2];
    for l in 0..nl {
        let yp = -dist.film_thickness * T::lit((l as f64 + 0.5) / nl as f64);
        for (k, e) in dist.j.iter().zip(dist.edges.windows(2)) {
            let r = ribbon(*k * share, e[0], e[1], yp, x, y);
            b[0] += r[0];
            b[1] += r[1];
        }
    }
    let pre = mu0 / T::TAU();
    Some([pre * b[0], pre * b[1], T::zero()])
}

/// Rectangle of evaluation points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<T> {
    pub x: (T, T),
    pub y: (T, T),
    pub nx: usize,
    pub ny: usize,
}

/// Field samples on a rectangular (x, y) lattice at z = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap<T> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    /// Row-major over (y, x); NaN where the point lies in the conductor.
    pub b: Vec<Vec3<T>>,
    pub valid: Vec<bool>,
    pub source_current: T,
}

impl<T: Real> FieldMap<T> {
    pub fn at(&self, ix: usize, iy: usize) -> Option<Vec3<T>> {
        let k = iy * self.xs.len() + ix;
        self.valid[k].then_some(self.b[k])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x_m,y_m,bx_T,by_T")?;
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                let k = iy * self.xs.len() + ix;
                if self.valid[k] {
                    writeln!(w, "{:e},{:e},{:e},{:e}", x.f64(), y.f64(), self.b[k][0].f64(), self.b[k][1].f64())?;
                } else {
                    writeln!(w, "{:e},{:e},nan,nan", x.f64(), y.f64())?;
                }
            }
        }
        Ok(())
    }
}

fn lattice<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![(lo + hi) / T::lit(2.0)];
    }
    (0..n).map(|k| lo + (hi - lo) * T::lit(k as f64 / (n - 1) as f64)).collect()
}

pub fn field_map<T: Real>(dist: &SheetCurrentDistribution<T>, region: &Region<T>, layers: usize) -> Result<FieldMap<T>> {
    if region.nx == 0 || region.ny == 0 {
        return Err(Error::param("region", "needs at least one point per axis"));
    }
    let xs = lattice(region.x.0, region.x.1, region.nx);
    let ys = lattice(region.y.0, region.y.1, region.ny);
    let nan = T::nan();
    let mut b = Vec::with_capacity(xs.len() * ys.len());
    let mut valid = Vec::with_capacity(b.capacity());
    for &y in &ys {
        for &x in &xs {
            match field_at(dist, layers, x, y) {
                Some(v) => {
                    b.push(v);
                    valid.push(true);
                }
                None => {
                    b.push([nan; 3]);
                    valid.push(false);
                }
            }
        }
    }
    Ok(FieldMap {
        xs,
        ys,
        b,
        valid,
        source_current: dist.total_current,
    })
}

/// Zero-point rms field at the disc centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterField<T> {
    /// b at r_c, T.
    pub b: Vec3<T>,
    /// i_rms used as the source, A.
    pub current: T,
}

impl<T: Real> CenterField<T> {
    pub fn bx(&self) -> T {
        self.b[0]
    }
}

/// b at r_c = (0, standoff + r, 0) for the zero-point current of `spec`.
pub fn field_at_disc_center<T: Real>(spec: &ResonatorSpec<T>, geom: &DiscGeometry<T>, model: StripModel) -> Result<CenterField<T>> {
    let i = spec.i_rms();
    let dist = strip_current_distribution(spec, i, model)?;
    let c = geom.center;
    let b = field_at(&dist, model.layers, c[0], c[1]).ok_or_else(|| Error::Domain("disc centre lies inside the conductor".into()))?;
    let tol = T::lit(0.05) * b[0].abs();
    if b[1].abs() > tol || b[2].abs() > tol {
        return Err(Error::Domain("field at the disc centre is not along x".into()));
    }
    Ok(CenterField { b, current: i })
}

/// Zero-point field at every micromagnetic cell centre of a disc standing
/// on the strip (disc plane = CPW cross-section), plus b_x at the centre.
/// Cells outside the mask get zero.
pub fn disc_field_profile<T: Real>(
    spec: &ResonatorSpec<T>,
    geom: &DiscGeometry<T>,
    grid: &MagGrid<T>,
    model: StripModel,
) -> Result<(Vec<Vec3<T>>, T)> {
    let centre = field_at_disc_center(spec, geom, model)?;
    let dist = strip_current_distribution(spec, centre.current, model)?;
    let c = geom.center;
    let mut out = vec![[T::zero(); 3]; grid.len()];
    for (i, b) in out.iter_mut().enumerate() {
        if !grid.mask[i] {
            continue;
        }
        let p = grid.cell_center(i);
        *b = field_at(&dist, model.layers, c[0] + p[0], c[1] + p[1]).ok_or_else(|| Error::Domain("disc overlaps the conductor".into()))?;
    }
    Ok((out, centre.bx()))
}

/// u_w(r) = b_x(r_c)·2π/(μ0 i) for a disc of radius r at the default standoff.
pub fn uw<T: Real>(spec: &ResonatorSpec<T>, r: T, model: StripModel) -> Result<T> {
    let geom = DiscGeometry::with_standoff(r, r / T::lit(2.0), T::lit(DiscGeometry::<T>::DEFAULT_STANDOFF_M))?;
    uw_at(spec, &geom, model)
}

fn uw_at<T: Real>(spec: &ResonatorSpec<T>, geom: &DiscGeometry<T>, model: StripModel) -> Result<T> {
    let c = field_at_disc_center(spec, geom, model)?;
    let mu0 = PhysicalConstants::<T>::si().mu0;
    Ok(c.bx() * T::TAU() / (mu0 * c.current))
}

/// u_w(r) ≈ a1/r + a2/r^α.
#[derive(Debug, Clone, PartialEq)]
pub struct UwFit<T> {
    pub a1: T,
    pub a2: T,
    pub alpha: T,
    pub w: T,
    pub fit_range: (T, T),
    /// (r, u_w, relative residual) for every fitted radius.
    pub table: Vec<(T, T, T)>,
}

impl<T: Real> UwFit<T> {
    pub fn eval(&self, r: T) -> T {
        self.a1 / r + self.a2 / r.powf(self.alpha)
    }

    pub fn max_residual(&self) -> T {
        self.table.iter().map(|t| t.2.abs()).fold(T::zero(), T::max)
    }

    pub fn write_summary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "w_m = {:e}", self.w.f64())?;
        writeln!(w, "a1 = {:e}", self.a1.f64())?;
        writeln!(w, "a2 = {:e}", self.a2.f64())?;
        writeln!(w, "alpha = {:.6}", self.alpha.f64())?;
        writeln!(w, "fit_range_m = [{:e}, {:e}]", self.fit_range.0.f64(), self.fit_range.1.f64())?;
        writeln!(w, "max_rel_residual = {:.3e}", self.max_residual().f64())?;
        Ok(())
    }
}

/// Weighted linear least squares for (a1, a2) at fixed α, minimizing the
/// relative residual. Returns (a1, a2, sum of squared relative residuals).
fn solve_amplitudes(r: &[f64], u: &[f64], alpha: f64) -> (f64, f64, f64) {
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ri, &ui) in r.iter().zip(u) {
        let p = 1.0 / (ri * ui);
        let q = 1.0 / (ri.powf(alpha) * ui);
        s11 += p * p;
        s12 += p * q;
        s22 += q * q;
        t1 += p;
        t2 += q;
    }
    let det = s11 * s22 - s12 * s12;
    let a1 = (t1 * s22 - t2 * s12) / det;
    let a2 = (s11 * t2 - s12 * t1) / det;
    let sse = r
        .iter()
        .zip(u)
        .map(|(&ri, &ui)| ((a1 / ri + a2 / ri.powf(alpha)) / ui - 1.0).powi(2))
        .sum();
    (a1, a2, sse)
}

/// Maximum pointwise relative residual accepted by [`fit_uw`].
pub const UW_MAX_RESIDUAL: f64 = 0.05;

/// Fit u_w(r) = a1/r + a2/r^α over the given radii (m), 0 < α < 1.
pub fn fit_uw<T: Real>(spec: &ResonatorSpec<T>, radii: &[T], model: StripModel) -> Result<UwFit<T>> {
    if radii.len() < 6 {
        return Err(Error::param("radii", "need at least six radii"));
    }
    let lo = radii.iter().copied().fold(T::infinity(), T::min);
    let hi = radii.iter().copied().fold(T::zero(), T::max);
    if !(lo > T::zero()) || hi < lo * T::lit(4.0) {
        return Err(Error::param("radii", "must be positive and span at least a factor of 4"));
    }
    let r: Vec<f64> = radii.iter().map(|v| v.f64()).collect();
    let u: Vec<f64> = radii
        .iter()
        .map(|&ri| uw(spec, ri, model).map(|v| v.f64()))
        .collect::<Result<_>>()?;
    // the SSE in α is smooth and unimodal in practice; scan then refine
    let cost = |a: f64| solve_amplitudes(&r, &u, a).2;
    let grid = 200;
    let best = (1..grid)
        .map(|k| k as f64 / grid as f64)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .expect("non-empty scan");
    let (mut a, mut b) = ((best - 1.0 / grid as f64).max(1e-9), (best + 1.0 / grid as f64).min(1.0 - 1e-9));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let alpha = 0.5 * (a + b);
    let (a1, a2, _) = solve_amplitudes(&r, &u, alpha);
    let table: Vec<(T, T, T)> = r
        .iter()
        .zip(&u)
        .map(|(&ri, &ui)| {
            let fit = a1 / ri + a2 / ri.powf(alpha);
            (T::lit(ri), T::lit(ui), T::lit(fit / ui - 1.0))
        })
        .collect();
    let fit = UwFit {
        a1: T::lit(a1),
        a2: T::lit(a2),
        alpha: T::lit(alpha),
        w: spec.w,
        fit_range: (lo, hi),
        table,
    };
    if fit.max_residual().f64() > UW_MAX_RESIDUAL {
        let rows: Vec<String> = fit
            .table
            .iter()
            .map(|(r, u, e)| format!("r={:.3e} u={:.4e} rel={:+.3e}", r.f64(), u.f64(), e.f64()))
            .collect();
        return Err(Error::FitFailed(format!("u_w fit residual above 5%: {}", rows.join("; "))));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(w: f64) -> ResonatorSpec<f64> {
        ResonatorSpec::new(1e9, 50.0, 1e5, w).unwrap()
    }

    #[test]
    fn distribution_is_normalized_symmetric_and_edge_peaked() {
        for w in [0.3e-6, 1e-6, 7e-6] {
            let d = strip_current_distribution(&spec(w), 11e-9, StripModel::default()).unwrap();
            assert!((d.integral() / 11e-9 - 1.0).abs() < 1e-6);
            let n = d.j.len();
            for k in 0..n / 2 {
                assert!((d.j[k] - d.j[n - 1 - k]).abs() <= 1e-12 * d.j[k]);
            }
            assert!(d.j[0] > d.j[n / 2]);
        }
    }

    #[test]
    fn narrow_strip_falls_back_to_uniform() {
        let d = strip_current_distribution(&spec(100e-9), 1e-9, StripModel::default()).unwrap();
        assert!(d.uniform_fallback);
        assert!(d.j.iter().all(|&j| (j - 1e-9 / 100e-9).abs() < 1e-18));
    }

    #[test]
    fn far_field_is_a_line_current() {
        let w = 1e-6;
        let d = strip_current_distribution(&spec(w), 1e-3, StripModel::default()).unwrap();
        let y = 20.0 * w;
        let b = field_at(&d, 8, 0.0, y).unwrap();
        let mu0 = PhysicalConstants::<f64>::si().mu0;
        let wire = mu0 * 1e-3 / (std::f64::consts::TAU * (y + 75e-9));
        assert!((b[0] / wire - 1.0).abs() < 0.01);
    }

    #[test]
    fn ribbon_matches_filament_sum() {
        let (k, x1, x2, yp, x, y) = (2.0, -0.3, 0.5, -0.1, 0.2, 0.7);
        let n = 20000;
        let mut acc = [0.0, 0.0];
        for i in 0..n {
            let xp = x1 + (x2 - x1) * (i as f64 + 0.5) / n as f64;
            let (dx, dy) = (x - xp, y - yp);
            let r2 = dx * dx + dy * dy;
            let di = k * (x2 - x1) / n as f64;
            acc[0] += di * dy / r2;
            acc[1] -= di * dx / r2;
        }
        let r = ribbon(k, x1, x2, yp, x, y);
        assert!((r[0] - acc[0]).abs() < 1e-7 && (r[1] - acc[1]).abs() < 1e-7);
    }

    #[test]
    fn map_symmetry_and_conductor_mask() {
        let d = strip_current_distribution(&spec(1e-6), 11e-9, StripModel::default()).unwrap();
        let region = Region {
            x: (-1e-6, 1e-6),
            y: (-0.2e-6, 0.5e-6),
            nx: 20,
            ny: 15,
        };
        let m = field_map(&d, &region, 8).unwrap();
        for iy in 0..m.ys.len() {
            for ix in 0..m.xs.len() {
                let mirror = m.xs.len() - 1 - ix;
                match (m.at(ix, iy), m.at(mirror, iy)) {
                    (Some(a), Some(b)) => {
                        let s = a[0].abs().max(a[1].abs());
                        assert!((a[0] - b[0]).abs() <= 1e-9 * s);
                        assert!((a[1] + b[1]).abs() <= 1e-9 * s);
                        assert_eq!(a[2], 0.0);
                    }
                    (None, None) => {}
                    _ => panic!("asymmetric mask"),
                }
            }
        }
        assert!(m.valid.iter().any(|v| !v));
    }

    #[test]
    fn centre_field_is_linear_and_decreasing() {
        let s = spec(1e-6);
        let mut prev = f64::INFINITY;
        for r in [50e-9, 100e-9, 200e-9, 400e-9] {
            let g = DiscGeometry::new(r, r / 4.0).unwrap();
            let b = field_at_disc_center(&s, &g, StripModel::default()).unwrap().bx();
            assert!(b < prev);
            prev = b;
        }
        let d = strip_current_distribution(&s, 11e-9, StripModel::default()).unwrap();
        let one = field_at(&d, 8, 0.0, 410e-9).unwrap()[0];
        let two = field_at(&d.scaled(2.0), 8, 0.0, 410e-9).unwrap()[0];
        assert!((two - 2.0 * one).abs() <= 1e-15 * one.abs());
    }
}
