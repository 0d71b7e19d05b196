//! Magnetostatic (demagnetizing) field via the cell-averaged Newell tensor
//! and a zero-padded FFT convolution.

use std::sync::Arc;

use num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::micromag::grid::MagGrid;
use crate::scalar::{Real, Vec3};

/// Independent components of the symmetric demag tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DemagTensor {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl DemagTensor {
    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }

    /// H = -N M for a single source cell.
    pub fn field(&self, m: [f64; 3]) -> [f64; 3] {
        [
            -(self.xx * m[0] + self.xy * m[1] + self.xz * m[2]),
            -(self.xy * m[0] + self.yy * m[1] + self.yz * m[2]),
            -(self.xz * m[0] + self.yz * m[1] + self.zz * m[2]),
        ]
    }
}

fn newell_f(x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut f = (2.0 * x2 - y2 - z2) * r / 6.0;
    if x2 + z2 > 0.0 && y > 0.0 {
        f += 0.5 * y * (z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    }
    if x2 + y2 > 0.0 && z > 0.0 {
        f += 0.5 * z * (y2 - x2) * (z / (x2 + y2).sqrt()).asinh();
    }
    if x > 0.0 && y > 0.0 && z > 0.0 {
        f -= x * y * z * (y * z / (x * r)).atan();
    }
    f
}

fn newell_g(x: f64, y: f64, z: f64) -> f64 {
    let sign = x.signum() * y.signum();
    let (x, y, z) = (x.abs(), y.abs(), z.abs());
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let r = (x2 + y2 + z2).sqrt();
    let mut g = -x * y * r / 3.0;
    if z > 0.0 {
        g += x * y * z * (z / (x2 + y2).sqrt()).asinh();
        g -= z * z2 / 6.0 * (x * y / (z * r)).atan();
        g -= 0.5 * z * y2 * (x * z / (y * r)).atan();
        g -= 0.5 * z * x2 * (y * z / (x * r)).atan();
    }
    g += y / 6.0 * (3.0 * z2 - y2) * (x / (y2 + z2).sqrt()).asinh();
    g += x / 6.0 * (3.0 * z2 - x2) * (y / (x2 + z2).sqrt()).asinh();
    sign * g
}

/// Second difference of `func` over the 27-point stencil, weights
/// (-1, 2, -1) per axis.
fn stencil(func: impl Fn(f64, f64, f64) -> f64, p: [f64; 3], d: [f64; 3]) -> f64 {
    const W: [f64; 3] = [-1.0, 2.0, -1.0];
    let mut acc = 0.0;
    for (a, wa) in W.iter().enumerate() {
        let x = p[0] + (a as f64 - 1.0) * d[0];
        for (b, wb) in W.iter().enumerate() {
            let y = p[1] + (b as f64 - 1.0) * d[1];
            for (c, wc) in W.iter().enumerate() {
                let z = p[2] + (c as f64 - 1.0) * d[2];
                acc += wa * wb * wc * func(x, y, z);
            }
        }
    }
    acc
}

/// Beyond this many cell diagonals the Newell differences lose precision
/// to cancellation and the point-dipole limit is used instead.
const FAR_FIELD_CELLS: f64 = 80.0;

/// Cell-averaged demag tensor between two cells of size `d` whose centres
/// are separated by `r` (target minus source).
pub fn newell_tensor(r: [f64; 3], d: [f64; 3]) -> DemagTensor {
    let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let dmax = d[0].max(d[1]).max(d[2]);
    let vol = d[0] * d[1] * d[2];
    if dist > FAR_FIELD_CELLS * dmax {
        let r5 = dist.powi(5);
        let r2 = dist * dist;
        let c = -vol / (4.0 * std::f64::consts::PI * r5);
        return DemagTensor {
            xx: c * (3.0 * r[0] * r[0] - r2),
            yy: c * (3.0 * r[1] * r[1] - r2),
            zz: c * (3.0 * r[2] * r[2] - r2),
            xy: c * 3.0 * r[0] * r[1],
            xz: c * 3.0 * r[0] * r[2],
            yz: c * 3.0 * r[1] * r[2],
        };
    }
    let pre = 1.0 / (4.0 * std::f64::consts::PI * vol);
    let [x, y, z] = r;
    let [dx, dy, dz] = d;
    DemagTensor {
        xx: pre * stencil(newell_f, [x, y, z], [dx, dy, dz]),
        yy: pre * stencil(newell_f, [y, x, z], [dy, dx, dz]),
        zz: pre * stencil(newell_f, [z, y, x], [dz, dy, dx]),
        xy: pre * stencil(newell_g, [x, y, z], [dx, dy, dz]),
        xz: pre * stencil(newell_g, [x, z, y], [dx, dz, dy]),
        yz: pre * stencil(newell_g, [y, z, x], [dy, dz, dx]),
    }
}

/// Columns gathered per batch of strided transforms.
const BLOCK: usize = 32;

#[inline]
fn padded(n: usize) -> usize {
    if n == 1 {
        1
    } else {
        2 * n
    }
}

/// A batch of length-`len` transforms over `cols` interleaved columns:
/// element `r` of column `c` sits at `base + r * stride + c`. Only the
/// first `rows_in` rows are read (the rest are taken as zero) and only the
/// first `rows_out` rows are written back.
struct Strided {
    base: usize,
    stride: usize,
    cols: usize,
    len: usize,
    rows_in: usize,
    rows_out: usize,
}

fn strided_fft<T: Real>(fft: &dyn Fft<T>, data: &mut [Complex<T>], s: Strided, lines: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
    let zero = Complex::new(T::zero(), T::zero());
    for c0 in (0..s.cols).step_by(BLOCK) {
        let nb = BLOCK.min(s.cols - c0);
        let buf = &mut lines[..nb * s.len];
        for r in 0..s.rows_in {
            let src = &data[s.base + r * s.stride + c0..][..nb];
            for (b, v) in src.iter().enumerate() {
                buf[b * s.len + r] = *v;
            }
        }
        for r in s.rows_in..s.len {
            for b in 0..nb {
                buf[b * s.len + r] = zero;
            }
        }
        fft.process_with_scratch(buf, scratch);
        for r in 0..s.rows_out {
            let dst = &mut data[s.base + r * s.stride + c0..][..nb];
            for (b, v) in dst.iter_mut().enumerate() {
                *v = buf[b * s.len + r];
            }
        }
    }
}

/// Precomputed kernel spectrum and FFT plans for one grid.
pub struct DemagConvolution<T: Real> {
    n: [usize; 3],
    p: [usize; 3],
    /// Number of non-redundant x frequencies, px/2 + 1.
    kx: usize,
    /// Kernel spectra xx, yy, zz, xy, xz, yz. The tensor parities make
    /// every spectrum real.
    kernel: [Vec<T>; 6],
    r2c: Arc<dyn RealToComplex<T>>,
    c2r: Arc<dyn ComplexToReal<T>>,
    fft_y: Arc<dyn Fft<T>>,
    ifft_y: Arc<dyn Fft<T>>,
    fft_z: Arc<dyn Fft<T>>,
    ifft_z: Arc<dyn Fft<T>>,
    spec: [Vec<Complex<T>>; 3],
    row: Vec<T>,
    row_spec: Vec<Complex<T>>,
    lines: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
    comp: Vec<T>,
    masked: Vec<bool>,
}

impl<T: Real> std::fmt::Debug for DemagConvolution<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DemagConvolution")
            .field("n", &self.n)
            .field("padded", &self.p)
            .finish()
    }
}

impl<T: Real> DemagConvolution<T> {
    pub fn new(grid: &MagGrid<T>) -> Self {
        let n = [grid.nx, grid.ny, grid.nz];
        let p = [padded(n[0]), padded(n[1]), padded(n[2])];
        let kx = p[0] / 2 + 1;
        let mut rp = RealFftPlanner::<T>::new();
        let r2c = rp.plan_fft_forward(p[0]);
        let c2r = rp.plan_fft_inverse(p[0]);
        let mut cp = FftPlanner::<T>::new();
        let fft_y = cp.plan_fft_forward(p[1]);
        let ifft_y = cp.plan_fft_inverse(p[1]);
        let fft_z = cp.plan_fft_forward(p[2]);
        let ifft_z = cp.plan_fft_inverse(p[2]);
        let scratch_len = [
            r2c.get_scratch_len(),
            c2r.get_scratch_len(),
            fft_y.get_inplace_scratch_len(),
            ifft_y.get_inplace_scratch_len(),
            fft_z.get_inplace_scratch_len(),
            ifft_z.get_inplace_scratch_len(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        let spec_len = kx * p[1] * p[2];
        let zero = Complex::new(T::zero(), T::zero());
        let mut conv = Self {
            n,
            p,
            kx,
            kernel: std::array::from_fn(|_| Vec::new()),
            r2c,
            c2r,
            fft_y,
            ifft_y,
            fft_z,
            ifft_z,
            spec: std::array::from_fn(|_| vec![zero; spec_len]),
            row: vec![T::zero(); p[0]],
            row_spec: vec![zero; kx],
            lines: vec![zero; BLOCK * p[1].max(p[2])],
            scratch: vec![zero; scratch_len],
            comp: vec![T::zero(); n[0] * n[1] * n[2]],
            masked: grid.mask.clone(),
        };
        conv.build_kernel(grid);
        conv
    }

    fn build_kernel(&mut self, grid: &MagGrid<T>) {
        let [nx, ny, nz] = self.n;
        let [px, py, pz] = self.p;
        let d = [grid.dx.f64(), grid.dy.f64(), grid.dz.f64()];
        // Real-space kernel on the padded, wrapped lattice.
        let mut real: [Vec<T>; 6] = std::array::from_fn(|_| vec![T::zero(); px * py * pz]);
        let wrap = |i: isize, pn: usize| -> usize {
            if i >= 0 {
                i as usize
            } else {
                (pn as isize + i) as usize
            }
        };
        for z in 0..nz as isize {
            for y in 0..ny as isize {
                for x in 0..nx as isize {
                    let t = newell_tensor([x as f64 * d[0], y as f64 * d[1], z as f64 * d[2]], d);
                    // parity: diagonal even; xy odd in x,y; xz odd in x,z; yz odd in y,z
                    for sz in [1isize, -1] {
                        if z == 0 && sz < 0 {
                            continue;
                        }
                        for sy in [1isize, -1] {
                            if y == 0 && sy < 0 {
                                continue;
                            }
                            for sx in [1isize, -1] {
                                if x == 0 && sx < 0 {
                                    continue;
                                }
                                let idx = (wrap(sz * z, pz) * py + wrap(sy * y, py)) * px + wrap(sx * x, px);
                                let (fx, fy, fz) = (sx as f64, sy as f64, sz as f64);
                                real[0][idx] = T::lit(t.xx);
                                real[1][idx] = T::lit(t.yy);
                                real[2][idx] = T::lit(t.zz);
                                real[3][idx] = T::lit(t.xy * fx * fy);
                                real[4][idx] = T::lit(t.xz * fx * fz);
                                real[5][idx] = T::lit(t.yz * fy * fz);
                            }
                        }
                    }
                }
            }
        }
        let spec_len = self.kx * py * pz;
        let zero = Complex::new(T::zero(), T::zero());
        for (c, r) in real.iter().enumerate() {
            let mut out = vec![zero; spec_len];
            self.forward(r, [px, py, pz], &mut out);
            // even-even-even and odd-odd-even arrays transform to real
            // spectra (the odd pairs contribute (-i)² = -1)
            self.kernel[c] = out.iter().map(|v| v.re).collect();
        }
    }

    /// 3-D real-to-complex transform of a real array with extents `ext`
    /// (x fastest); entries beyond `ext` in the padded box are zero.
    fn forward(&mut self, input: &[T], ext: [usize; 3], out: &mut [Complex<T>]) {
        let [_, py, pz] = self.p;
        let kx = self.kx;
        let plane = py * kx;
        for z in 0..ext[2] {
            for y in 0..ext[1] {
                let src = &input[(z * ext[1] + y) * ext[0]..][..ext[0]];
                self.row[..ext[0]].copy_from_slice(src);
                self.row[ext[0]..].iter_mut().for_each(|v| *v = T::zero());
                self.r2c
                    .process_with_scratch(&mut self.row, &mut self.row_spec, &mut self.scratch)
                    .expect("r2c length");
                out[(z * py + y) * kx..][..kx].copy_from_slice(&self.row_spec);
            }
        }
        if py > 1 {
            for z in 0..ext[2] {
                let s = Strided {
                    base: z * plane,
                    stride: kx,
                    cols: kx,
                    len: py,
                    rows_in: ext[1],
                    rows_out: py,
                };
                strided_fft(&*self.fft_y, out, s, &mut self.lines, &mut self.scratch);
            }
        }
        if pz > 1 {
            let s = Strided {
                base: 0,
                stride: plane,
                cols: plane,
                len: pz,
                rows_in: ext[2],
                rows_out: pz,
            };
            strided_fft(&*self.fft_z, out, s, &mut self.lines, &mut self.scratch);
        }
    }

    /// Inverse of [`Self::forward`] for component `c`, keeping only the
    /// physical region and writing it into column `c` of `out`.
    fn inverse(&mut self, c: usize, out: &mut [Vec3<T>]) {
        let [nx, ny, nz] = self.n;
        let [px, py, pz] = self.p;
        let kx = self.kx;
        let plane = py * kx;
        let spec = &mut self.spec[c];
        if pz > 1 {
            let s = Strided {
                base: 0,
                stride: plane,
                cols: plane,
                len: pz,
                rows_in: pz,
                rows_out: nz,
            };
            strided_fft(&*self.ifft_z, spec, s, &mut self.lines, &mut self.scratch);
        }
        if py > 1 {
            for z in 0..nz {
                let s = Strided {
                    base: z * plane,
                    stride: kx,
                    cols: kx,
                    len: py,
                    rows_in: py,
                    rows_out: ny,
                };
                strided_fft(&*self.ifft_y, spec, s, &mut self.lines, &mut self.scratch);
            }
        }
        let norm = T::one() / T::lit((px * py * pz) as f64);
        for z in 0..nz {
            for y in 0..ny {
                self.row_spec.copy_from_slice(&spec[(z * py + y) * kx..][..kx]);
                // the DC and Nyquist bins of a real signal are real
                self.row_spec[0].im = T::zero();
                if px % 2 == 0 {
                    self.row_spec[kx - 1].im = T::zero();
                }
                self.c2r
                    .process_with_scratch(&mut self.row_spec, &mut self.row, &mut self.scratch)
                    .expect("c2r length");
                let base = (z * ny + y) * nx;
                for x in 0..nx {
                    out[base + x][c] = self.row[x] * norm;
                }
            }
        }
    }

    /// Demag field H = -N ⊛ (Ms m) in A/m, written into `out`. Cells
    /// outside the mask receive zero.
    pub fn field(&mut self, m: &[Vec3<T>], ms: T, out: &mut [Vec3<T>]) {
        let mut comp = std::mem::take(&mut self.comp);
        for c in 0..3 {
            for (v, mi) in comp.iter_mut().zip(m) {
                *v = mi[c] * ms;
            }
            let mut spec = std::mem::take(&mut self.spec[c]);
            self.forward(&comp, self.n, &mut spec);
            self.spec[c] = spec;
        }
        self.comp = comp;
        let [kxx, kyy, kzz, kxy, kxz, kyz] = &self.kernel;
        let [sx, sy, sz] = &mut self.spec;
        for i in 0..sx.len() {
            let (mx, my, mz) = (sx[i], sy[i], sz[i]);
            sx[i] = -(mx * kxx[i] + my * kxy[i] + mz * kxz[i]);
            sy[i] = -(mx * kxy[i] + my * kyy[i] + mz * kyz[i]);
            sz[i] = -(mx * kxz[i] + my * kyz[i] + mz * kzz[i]);
        }
        for c in 0..3 {
            self.inverse(c, out);
        }
        for (h, &inside) in out.iter_mut().zip(&self.masked) {
            if !inside {
                *h = [T::zero(); 3];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_tensor_of_cube_is_isotropic() {
        let t = newell_tensor([0.0; 3], [1.0, 1.0, 1.0]);
        assert!((t.xx - 1.0 / 3.0).abs() < 1e-12, "{t:?}");
        assert!((t.yy - 1.0 / 3.0).abs() < 1e-12);
        assert!((t.zz - 1.0 / 3.0).abs() < 1e-12);
        assert!(t.xy.abs() < 1e-14 && t.xz.abs() < 1e-14 && t.yz.abs() < 1e-14);
    }

    #[test]
    fn self_tensor_trace_is_one() {
        for d in [[3.125, 3.125, 1.875], [1.0, 2.0, 5.0], [6.25, 6.25, 5.0]] {
            let t = newell_tensor([0.0; 3], d);
            assert!((t.trace() - 1.0).abs() < 1e-8, "{d:?}: {}", t.trace());
        }
    }

    #[test]
    fn reciprocity_and_far_field() {
        let d = [3.125, 3.125, 1.875];
        for r in [[3.125, 0.0, 0.0], [6.25, -3.125, 1.875], [12.5, 9.375, -5.625]] {
            let a = newell_tensor(r, d);
            let b = newell_tensor([-r[0], -r[1], -r[2]], d);
            let scale = a.xx.abs().max(a.yy.abs()).max(a.zz.abs());
            for (u, v) in [(a.xx, b.xx), (a.xy, b.xy), (a.xz, b.xz), (a.yz, b.yz), (a.zz, b.zz)] {
                assert!((u - v).abs() <= 1e-10 * scale, "{u} {v}");
            }
            // off-diagonal tensor is traceless outside the source cell
            assert!(a.trace().abs() < 1e-8 * a.xx.abs().max(a.zz.abs()));
        }
        // Newell agrees with the dipole limit well inside the switch radius.
        let r = [60.0, 35.0, 20.0];
        let near = newell_tensor(r, [1.0, 1.0, 1.0]);
        let dist2: f64 = r.iter().map(|v| v * v).sum();
        let c = -1.0 / (4.0 * std::f64::consts::PI * dist2.powf(2.5));
        let dip_xy = c * 3.0 * r[0] * r[1];
        assert!((near.xy / dip_xy - 1.0).abs() < 1e-3, "{} vs {}", near.xy, dip_xy);
    }

    fn brute_force(grid: &MagGrid<f64>, m: &[Vec3<f64>], ms: f64) -> Vec<Vec3<f64>> {
        let d = grid.cell_size();
        (0..grid.len())
            .map(|i| {
                if !grid.mask[i] {
                    return [0.0; 3];
                }
                let (xi, yi, zi) = grid.coords(i);
                let mut h = [0.0; 3];
                for (j, mj) in m.iter().enumerate() {
                    let (xj, yj, zj) = grid.coords(j);
                    let r = [
                        (xi as f64 - xj as f64) * d[0],
                        (yi as f64 - yj as f64) * d[1],
                        (zi as f64 - zj as f64) * d[2],
                    ];
                    let f = newell_tensor(r, d).field([mj[0] * ms, mj[1] * ms, mj[2] * ms]);
                    for c in 0..3 {
                        h[c] += f[c];
                    }
                }
                h
            })
            .collect()
    }

    #[test]
    fn fft_matches_direct_sum() {
        let mut grid = MagGrid::cuboid(5, 4, 3, [2.0e-9, 3.0e-9, 1.5e-9]);
        grid.mask[7] = false;
        let m: Vec<Vec3<f64>> = (0..grid.len())
            .map(|i| {
                if !grid.mask[i] {
                    return [0.0; 3];
                }
                let a = i as f64 * 0.7;
                crate::scalar::normalize([a.cos(), a.sin(), (1.3 * a).cos()])
            })
            .collect();
        let mut conv = DemagConvolution::new(&grid);
        let mut h = vec![[0.0; 3]; grid.len()];
        conv.field(&m, 1.0e6, &mut h);
        let want = brute_force(&grid, &m, 1.0e6);
        for (a, b) in h.iter().zip(&want) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1e-10 * 1.0e6, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn single_layer_and_line_grids() {
        for (nx, ny, nz) in [(6, 5, 1), (1, 1, 7), (4, 1, 1)] {
            let grid = MagGrid::cuboid(nx, ny, nz, [1.0e-9, 2.0e-9, 1.0e-9]);
            let m = vec![crate::scalar::normalize([0.3, -0.5, 0.8]); grid.len()];
            let mut conv = DemagConvolution::new(&grid);
            let mut h = vec![[0.0; 3]; grid.len()];
            conv.field(&m, 1.0, &mut h);
            let want = brute_force(&grid, &m, 1.0);
            for (a, b) in h.iter().zip(&want) {
                for c in 0..3 {
                    assert!((a[c] - b[c]).abs() < 1e-12, "{nx}x{ny}x{nz}: {a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn uniform_cube_has_one_third_demag() {
        let grid = MagGrid::cuboid(9, 9, 9, [1.0e-9; 3]);
        let m = vec![[0.0, 0.0, 1.0]; grid.len()];
        let mut conv = DemagConvolution::new(&grid);
        let mut h = vec![[0.0; 3]; grid.len()];
        conv.field(&m, 1.0, &mut h);
        let mean = h.iter().map(|v| v[2]).sum::<f64>() / grid.len() as f64;
        assert!((mean + 1.0 / 3.0).abs() < 1e-10, "{mean}");
    }

    #[test]
    fn thin_film_demag_approaches_one() {
        let grid = MagGrid::cuboid(64, 64, 1, [5.0e-9, 5.0e-9, 1.0e-9]);
        let m = vec![[0.0, 0.0, 1.0]; grid.len()];
        let mut conv = DemagConvolution::new(&grid);
        let mut h = vec![[0.0; 3]; grid.len()];
        conv.field(&m, 1.0, &mut h);
        let centre: f64 = h[grid.index(32, 32, 0)][2];
        assert!((centre + 1.0).abs() < 0.01, "{centre}");
    }
}
