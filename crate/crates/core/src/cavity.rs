//! Two-mode model of a resonator photon coupled to the vortex gyration:
//! eigenfrequencies, Rabi oscillations and input-output transmission.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// All rates are ordinary frequencies (Hz); `g_hz` is g/2π.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeSystem<T> {
    pub f_cpw: T,
    pub f_g: T,
    pub g_hz: T,
    pub delta_f_g: T,
    pub kappa: T,
}

impl<T: Real> TwoModeSystem<T> {
    pub fn new(f_cpw: T, f_g: T, g_hz: T, delta_f_g: T, kappa: T) -> Result<Self> {
        let s = Self {
            f_cpw,
            f_g,
            g_hz,
            delta_f_g,
            kappa,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f_cpw", self.f_cpw),
            ("f_g", self.f_g),
            ("kappa", self.kappa),
            ("delta_f_g", self.delta_f_g),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.g_hz >= T::zero()) || !self.g_hz.is_finite() {
            return Err(Error::param("g_hz", "must be non-negative"));
        }
        Ok(())
    }

    /// f_G − f_cpw.
    pub fn detuning(&self) -> T {
        self.f_g - self.f_cpw
    }

    pub fn with_f_g(&self, f_g: T) -> Self {
        Self { f_g, ..*self }
    }

    pub fn with_g(&self, g_hz: T) -> Self {
        Self { g_hz, ..*self }
    }

    /// 4g / |Δf_G − κ| > 1: the transmission resolves two peaks.
    pub fn resolves_doublet(&self) -> bool {
        T::lit(4.0) * self.g_hz > (self.delta_f_g - self.kappa).abs()
    }
}

/// Single-excitation eigenfrequencies (f+, f−) without counter-rotating terms.
pub fn rwa_eigenfrequencies<T: Real>(sys: &TwoModeSystem<T>) -> (T, T) {
    let half = T::lit(0.5);
    let mean = half * (sys.f_cpw + sys.f_g);
    let d = sys.detuning();
    let root = (d * d / T::lit(4.0) + sys.g_hz * sys.g_hz).sqrt();
    (mean + root, mean - root)
}

/// Eigenvalues of H/h = f_cpw a†a + f_G b†b + g (a + a†)(b + b†) on n, m ≤ n_max,
/// measured from the ground state and sorted ascending. Dense, f64.
pub fn truncated_spectrum(f_cpw: f64, f_g: f64, g_hz: f64, n_max: usize) -> Vec<f64> {
    let d = n_max + 1;
    let idx = |n: usize, m: usize| n * d + m;
    // work in units of f_cpw so the eigensolver sees O(1) entries
    let (fa, fb, g) = (1.0, f_g / f_cpw, g_hz / f_cpw);
    let mut h = DMatrix::<f64>::zeros(d * d, d * d);
    for n in 0..d {
        for m in 0..d {
            let i = idx(n, m);
            h[(i, i)] = fa * n as f64 + fb * m as f64;
            // (a + a†)(b + b†) couples (n, m) to (n ± 1, m ± 1)
            for (dn, dm) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                let (n2, m2) = (n as i64 + dn, m as i64 + dm);
                if n2 < 0 || m2 < 0 || n2 >= d as i64 || m2 >= d as i64 {
                    continue;
                }
                let an = (n.max(n2 as usize) as f64).sqrt();
                let am = (m.max(m2 as usize) as f64).sqrt();
                h[(i, idx(n2 as usize, m2 as usize))] = g * an * am;
            }
        }
    }
    let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    let e0 = e[0];
    e.iter().map(|v| (v - e0) * f_cpw).collect()
}

/// Lowest excitation doublet (f+, f−) of the full Hamiltonian including
/// counter-rotating terms, with a cutoff-convergence check against n_max + 2.
pub fn full_hamiltonian_spectrum<T: Real>(sys: &TwoModeSystem<T>, n_max: usize) -> Result<(T, T)> {
    if n_max < 4 {
        return Err(Error::param("n_max", "must be at least 4"));
    }
    let (fc, fg, g) = (sys.f_cpw.f64(), sys.f_g.f64(), sys.g_hz.f64());
    let a = truncated_spectrum(fc, fg, g, n_max);
    let b = truncated_spectrum(fc, fg, g, n_max + 2);
    let shift = ((a[1] - b[1]).abs().max((a[2] - b[2]).abs())) / b[1];
    if shift > 1e-3 {
        return Err(Error::CutoffTooSmall { n_max, shift });
    }
    Ok((T::lit(a[2]), T::lit(a[1])))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Photon,
    Vortex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiTrace<T> {
    pub times: Vec<T>,
    pub photon: Vec<T>,
    pub vortex: Vec<T>,
}

impl<T: Real> RabiTrace<T> {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time_s,photon,vortex")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{:e},{:e},{:e}",
                self.times[k].f64(),
                self.photon[k].f64(),
                self.vortex[k].f64()
            )?;
        }
        Ok(())
    }
}

/// Populations in the single-excitation subspace over `samples` equally
/// spaced times in [0, duration]. With `damped`, the amplitudes decay at
/// πκ and πΔf_G.
pub fn rabi_dynamics<T: Real>(sys: &TwoModeSystem<T>, initial: Initial, duration: T, samples: usize, damped: bool) -> Result<RabiTrace<T>> {
    if !(duration > T::zero()) || samples < 2 {
        return Err(Error::param("duration", "need a positive duration and at least two samples"));
    }
    let c = |re: f64, im: f64| Complex::new(re, im);
    let (k, d) = if damped {
        (sys.kappa.f64(), sys.delta_f_g.f64())
    } else {
        (0.0, 0.0)
    };
    // H in Hz: [[f_cpw − iκ/2, g], [g, f_G − iΔf/2]]
    let h11 = c(sys.f_cpw.f64(), -0.5 * k);
    let h22 = c(sys.f_g.f64(), -0.5 * d);
    let g = c(sys.g_hz.f64(), 0.0);
    let mean = 0.5 * (h11 + h22);
    let a = 0.5 * (h11 - h22);
    let omega = (a * a + g * g).sqrt();
    let psi0 = match initial {
        Initial::Photon => [c(1.0, 0.0), c(0.0, 0.0)],
        Initial::Vortex => [c(0.0, 0.0), c(1.0, 0.0)],
    };
    let mut out = RabiTrace {
        times: Vec::with_capacity(samples),
        photon: Vec::with_capacity(samples),
        vortex: Vec::with_capacity(samples),
    };
    let dur = duration.f64();
    for s in 0..samples {
        let t = dur * s as f64 / (samples - 1) as f64;
        let th = std::f64::consts::TAU * t;
        // exp(−iθ(mean + N)) with N² = Ω²
        let x = omega * th;
        let sinc = if x.norm() < 1e-8 { c(th, 0.0) } else { x.sin() / omega };
        let cos = x.cos();
        let ph = (-c(0.0, 1.0) * mean * th).exp();
        let i = c(0.0, 1.0);
        let u11 = ph * (cos - i * sinc * a);
        let u22 = ph * (cos + i * sinc * a);
        let u12 = ph * (-i * sinc * g);
        let p = u11 * psi0[0] + u12 * psi0[1];
        let v = u12 * psi0[0] + u22 * psi0[1];
        out.times.push(T::lit(t));
        out.photon.push(T::lit(p.norm_sqr()));
        out.vortex.push(T::lit(v.norm_sqr()));
    }
    Ok(out)
}

/// How the printed (1/2π)g² factor in the self-energy is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingUnits {
    /// Self-energy uses g_hz²; peaks sit at f_cpw ± g_hz.
    #[default]
    Hz,
    /// Self-energy uses (2π g_hz)²/2π; peaks sit at f_cpw ± sqrt(2π)·g_hz.
    PrintedAngular,
}

/// T(f) = |(κ/2) / ((f − f_cpw) + R + iΓ)|.
pub fn transmission_with<T: Real>(f: T, sys: &TwoModeSystem<T>, units: CouplingUnits) -> T {
    let g2 = match units {
        CouplingUnits::Hz => sys.g_hz * sys.g_hz,
        CouplingUnits::PrintedAngular => T::TAU() * sys.g_hz * sys.g_hz,
    };
    let half = T::lit(0.5);
    let x = sys.f_g - f;
    let den = x * x + sys.delta_f_g * sys.delta_f_g / T::lit(4.0);
    let r = g2 * x / den;
    let gamma = half * sys.kappa + g2 * half * sys.delta_f_g / den;
    let re = f - sys.f_cpw + r;
    half * sys.kappa / (re * re + gamma * gamma).sqrt()
}

pub fn transmission<T: Real>(f: T, sys: &TwoModeSystem<T>) -> T {
    transmission_with(f, sys, CouplingUnits::Hz)
}

/// Local maxima of a sampled curve, refined by a parabola through the three
/// samples around each maximum. Returns (position, value).
pub fn local_maxima<T: Real>(xs: &[T], ys: &[T]) -> Vec<(T, T)> {
    let mut out = Vec::new();
    for k in 1..ys.len().saturating_sub(1) {
        if ys[k] > ys[k - 1] && ys[k] >= ys[k + 1] {
            let (y0, y1, y2) = (ys[k - 1], ys[k], ys[k + 1]);
            let den = y0 - T::lit(2.0) * y1 + y2;
            let s = if den < T::zero() {
                T::lit(0.5) * (y0 - y2) / den
            } else {
                T::zero()
            };
            let step = xs[k + 1] - xs[k];
            out.push((xs[k] + s * step, y1));
        }
    }
    out
}

/// Full width at half maximum of T² around the sample nearest `x0`,
/// linearly interpolated. None if either half-maximum crossing is missing.
pub fn power_fwhm<T: Real>(xs: &[T], ts: &[T], x0: T) -> Option<T> {
    let p: Vec<T> = ts.iter().map(|&t| t * t).collect();
    let k = (0..xs.len()).min_by(|&a, &b| (xs[a] - x0).abs().partial_cmp(&(xs[b] - x0).abs()).unwrap())?;
    let half = p[k] * T::lit(0.5);
    let cross = |i: usize, j: usize| xs[i] + (half - p[i]) / (p[j] - p[i]) * (xs[j] - xs[i]);
    let mut l = k;
    while l > 0 && p[l - 1] > half {
        l -= 1;
    }
    let mut r = k;
    while r + 1 < p.len() && p[r + 1] > half {
        r += 1;
    }
    if l == 0 || r + 1 == p.len() {
        return None;
    }
    Some(cross(r, r + 1) - cross(l - 1, l))
}

/// f_G(B) = intercept + slope·B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgLine<T> {
    pub slope: T,
    pub intercept: T,
}

impl<T: Real> FgLine<T> {
    pub fn at(&self, b: T) -> T {
        self.intercept + self.slope * b
    }

    /// Field at which f_G reaches `f`.
    pub fn field_for(&self, f: T) -> T {
        (f - self.intercept) / self.slope
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionMap<T> {
    pub f_axis: Vec<T>,
    pub b_axis: Vec<T>,
    /// values[ib][jf]
    pub values: Vec<Vec<T>>,
    pub fg_of_b: FgLine<T>,
}

impl<T: Real> TransmissionMap<T> {
    pub fn column(&self, ib: usize) -> &[T] {
        &self.values[ib]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "b_dc_T,f_hz,transmission")?;
        for (ib, col) in self.values.iter().enumerate() {
            for (jf, v) in col.iter().enumerate() {
                writeln!(out, "{:e},{:e},{:e}", self.b_axis[ib].f64(), self.f_axis[jf].f64(), v.f64())?;
            }
        }
        Ok(())
    }
}

/// Transmission over (B_dc, f) with the vortex frequency following `fg_of_b`.
pub fn transmission_map<T: Real>(
    sys: &TwoModeSystem<T>,
    b_axis: &[T],
    f_axis: &[T],
    fg_of_b: FgLine<T>,
    units: CouplingUnits,
) -> Result<TransmissionMap<T>> {
    sys.validate()?;
    if !(fg_of_b.slope != T::zero()) || !fg_of_b.slope.is_finite() {
        return Err(Error::param("fg_slope", "must be finite and non-zero"));
    }
    let values = b_axis
        .par_iter()
        .map(|&b| {
            let s = sys.with_f_g(fg_of_b.at(b));
            f_axis.iter().map(|&f| transmission_with(f, &s, units)).collect()
        })
        .collect();
    Ok(TransmissionMap {
        f_axis: f_axis.to_vec(),
        b_axis: b_axis.to_vec(),
        values,
        fg_of_b,
    })
}

/// `n` points evenly spaced over [lo, hi].
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * T::lit(k as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(g: f64, df: f64, kappa: f64) -> TwoModeSystem<f64> {
        TwoModeSystem::new(1.093e9, 1.093e9, g, df, kappa).unwrap()
    }

    #[test]
    fn rwa_limits() {
        let s = TwoModeSystem::new(1e9, 1.2e9, 0.0, 1e6, 1e5).unwrap();
        assert_eq!(rwa_eigenfrequencies(&s), (1.2e9, 1e9));
        let (p, m) = rwa_eigenfrequencies(&sys(1e6, 1e6, 1e5));
        assert!(((p - m) - 2e6).abs() < 1e-6);
        // dispersive shifts ±g²/δ
        let g: f64 = 1e6;
        let d: f64 = 100.0 * g;
        let s = TwoModeSystem::new(1e9, 1e9 + d, g, 1e6, 1e5).unwrap();
        let (p, m) = rwa_eigenfrequencies(&s);
        assert!(((p - s.f_g) / (g * g / d) - 1.0).abs() < 0.01);
        assert!(((s.f_cpw - m) / (g * g / d) - 1.0).abs() < 0.01);
    }

    #[test]
    fn uncoupled_ladder() {
        let e = truncated_spectrum(1.0e9, 1.3e9, 0.0, 4);
        let mut want: Vec<f64> = (0..5)
            .flat_map(|n| (0..5).map(move |m| 1.0e9 * n as f64 + 1.3e9 * m as f64))
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip(&want) {
            assert!((a - b).abs() < 1e-3, "{a} {b}");
        }
    }

    #[test]
    fn full_doublet_close_to_rwa() {
        let s = TwoModeSystem::new(1e9, 1e9, 1e6, 1e6, 1e5).unwrap();
        let (fp, fm): (f64, f64) = full_hamiltonian_spectrum(&s, 6).unwrap();
        let (rp, rm) = rwa_eigenfrequencies(&s);
        assert!(((fp - rp) / rp).abs() < 1e-5);
        assert!(((fm - rm) / rm).abs() < 1e-5);
    }

    #[test]
    fn cutoff_error_for_strong_coupling() {
        // ultrastrong coupling needs many photons in the dressed vacuum
        let s = TwoModeSystem::new(1e9, 1e9, 4.5e8, 1e6, 1e5).unwrap();
        assert!(matches!(full_hamiltonian_spectrum(&s, 4), Err(Error::CutoffTooSmall { .. })));
        assert!(full_hamiltonian_spectrum(&s, 3).is_err());
    }

    #[test]
    fn rabi_resonant_transfer() {
        let s = sys(1e6, 1e6, 1e5);
        let tr = rabi_dynamics(&s, Initial::Photon, 500e-9, 3, false).unwrap();
        assert!((tr.photon[0] - 1.0).abs() < 1e-12);
        assert!(tr.photon[1] < 1e-10 && (tr.vortex[1] - 1.0).abs() < 1e-10);
        assert!((tr.photon[2] - 1.0).abs() < 1e-10);
        let tr = rabi_dynamics(&s, Initial::Vortex, 1e-6, 101, false).unwrap();
        for k in 0..tr.times.len() {
            assert!((tr.photon[k] + tr.vortex[k] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rabi_detuned_amplitude() {
        let g: f64 = 1e6;
        let d = 20e6;
        let s = TwoModeSystem::new(1e9, 1e9 + d, g, 1e6, 1e5).unwrap();
        let tr = rabi_dynamics(&s, Initial::Photon, 200e-9, 20_001, false).unwrap();
        let max = tr.vortex.iter().cloned().fold(0.0, f64::max);
        let want = g * g / (g * g + d * d / 4.0);
        assert!((max / want - 1.0).abs() < 1e-3, "{max} {want}");
    }

    #[test]
    fn rabi_damping_decays() {
        let s = sys(1e6, 2e6, 2e6);
        let tr = rabi_dynamics(&s, Initial::Photon, 1e-6, 5, true).unwrap();
        let total: Vec<f64> = (0..5).map(|k| tr.photon[k] + tr.vortex[k]).collect();
        assert!(total.windows(2).all(|w| w[1] < w[0]));
        // equal decay rates: total = exp(−2πκt)
        let want = (-std::f64::consts::TAU * 2e6 * 1e-6f64).exp();
        assert!((total[4] / want - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bare_cavity_lorentzian() {
        let s = sys(0.0, 3e6, 0.2e6);
        for df in [-1e6f64, -1e5, 0.0, 3e4, 2e6] {
            let f = s.f_cpw + df;
            let bare = 0.5 * s.kappa / (df * df + 0.25 * s.kappa * s.kappa).sqrt();
            assert!((transmission(f, &s) - bare).abs() < 1e-12);
        }
        assert!((transmission(s.f_cpw, &s) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn doublet_at_plus_minus_g() {
        let s = sys(2e6, 3e6, 0.2e6);
        let f = linspace(s.f_cpw - 6e6, s.f_cpw + 6e6, 4001);
        let t: Vec<f64> = f.iter().map(|&x| transmission(x, &s)).collect();
        let pk = local_maxima(&f, &t);
        assert_eq!(pk.len(), 2);
        let split = pk[1].0 - pk[0].0;
        assert!((split / (2.0 * s.g_hz) - 1.0).abs() < 0.05, "{split}");
        let s2 = TwoModeSystem { ..s };
        let t2: Vec<f64> = f
            .iter()
            .map(|&x| transmission_with(x, &s2, CouplingUnits::PrintedAngular))
            .collect();
        let pk2 = local_maxima(&f, &t2);
        let split2 = pk2[1].0 - pk2[0].0;
        assert!((split2 / (2.0 * s.g_hz * std::f64::consts::TAU.sqrt()) - 1.0).abs() < 0.05);
    }

    #[test]
    fn weak_regime_single_peak() {
        let s = sys(0.2e6, 3e6, 0.1e6);
        assert!(!s.resolves_doublet());
        let f = linspace(s.f_cpw - 4e6, s.f_cpw + 4e6, 4001);
        let t: Vec<f64> = f.iter().map(|&x| transmission(x, &s)).collect();
        let pk = local_maxima(&f, &t);
        assert_eq!(pk.len(), 1);
        assert!((pk[0].0 - s.f_cpw).abs() < 2e3);
    }

    #[test]
    fn map_mirror_symmetry() {
        let s = sys(1e6, 2e6, 0.5e6);
        let line = FgLine {
            slope: 1e8,
            intercept: s.f_cpw,
        };
        let b = linspace(-0.1, 0.1, 21);
        let f = linspace(s.f_cpw - 1e7, s.f_cpw + 1e7, 201);
        let m = transmission_map(&s, &b, &f, line, CouplingUnits::Hz).unwrap();
        for ib in 0..21 {
            for jf in 0..201 {
                let a = m.values[ib][jf];
                let b = m.values[20 - ib][200 - jf];
                assert!((a - b).abs() < 1e-9, "{ib} {jf}");
                assert!((0.0..=1.0 + 1e-6).contains(&a));
            }
        }
    }
}
