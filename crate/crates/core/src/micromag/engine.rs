//! Effective field assembly and fixed-step RK4 integration of the
//! Landau-Lifshitz-Gilbert equation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::micromag::demag::DemagConvolution;
use crate::micromag::exchange::exchange_field;
use crate::micromag::grid::MagGrid;
use crate::micromag::state::Magnetization;
use crate::physics::{MaterialParams, PhysicalConstants};
use crate::scalar::{cross, dot, normalize, Real, Vec3};

/// Which energy terms enter the effective field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldTerms {
    pub exchange: bool,
    pub demag: bool,
}

impl Default for FieldTerms {
    fn default() -> Self {
        Self {
            exchange: true,
            demag: true,
        }
    }
}

/// Time dependence of an applied excitation field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform<T> {
    /// sinc(2π f_cutoff (t - delay))
    Sinc { f_cutoff: T, delay: T },
    /// cos(2π f t)
    Cosine { f: T },
    /// Constant unit factor.
    Constant,
}

impl<T: Real> Waveform<T> {
    pub fn at(&self, t: T) -> T {
        match *self {
            Waveform::Sinc { f_cutoff, delay } => {
                let x = T::TAU() * f_cutoff * (t - delay);
                if x.abs() < T::lit(1e-8) {
                    T::one()
                } else {
                    x.sin() / x
                }
            }
            Waveform::Cosine { f } => (T::TAU() * f * t).cos(),
            Waveform::Constant => T::one(),
        }
    }
}

/// Space-time separable excitation b(x, y, t) = profile(x, y) · w(t), in T.
#[derive(Debug, Clone, PartialEq)]
pub struct Excitation<T> {
    /// Per-cell field amplitude, T.
    pub profile: Vec<Vec3<T>>,
    pub waveform: Waveform<T>,
}

impl<T: Real> Excitation<T> {
    pub fn uniform(grid: &MagGrid<T>, amplitude: Vec3<T>, waveform: Waveform<T>) -> Self {
        Self {
            profile: vec![amplitude; grid.len()],
            waveform,
        }
    }

    pub fn peak(&self) -> T {
        self.profile.iter().map(|b| crate::scalar::norm(*b)).fold(T::zero(), T::max)
    }
}

/// Effective-field contributions, A/m per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveField<T> {
    pub exchange: Vec<Vec3<T>>,
    pub demag: Vec<Vec3<T>>,
    pub zeeman: Vec<Vec3<T>>,
}

impl<T: Real> EffectiveField<T> {
    pub fn total(&self) -> Vec<Vec3<T>> {
        (0..self.exchange.len())
            .map(|i| {
                let (a, b, c) = (self.exchange[i], self.demag[i], self.zeeman[i]);
                [a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]]
            })
            .collect()
    }
}

/// Energy decomposition, J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy<T> {
    pub exchange: T,
    pub demag: T,
    pub zeeman: T,
}

impl<T: Real> Energy<T> {
    pub fn total(&self) -> T {
        self.exchange + self.demag + self.zeeman
    }
}

/// Micromagnetic solver state for one disc.
#[derive(Debug)]
pub struct Engine<T: Real> {
    grid: MagGrid<T>,
    material: MaterialParams<T>,
    consts: PhysicalConstants<T>,
    terms: FieldTerms,
    demag: Option<DemagConvolution<T>>,
    /// Uniform static applied field, T.
    b_applied: Vec3<T>,
    excitation: Option<Excitation<T>>,
    alpha: T,
    dt: T,
    time: T,
    steps: u64,
    m: Vec<Vec3<T>>,
    h: Vec<Vec3<T>>,
    h_tmp: Vec<Vec3<T>>,
    k: [Vec<Vec3<T>>; 4],
    m_stage: Vec<Vec3<T>>,
}

/// Default time step for the reference cell size.
pub const DEFAULT_DT_S: f64 = 0.25e-12;

impl<T: Real> Engine<T> {
    pub fn new(grid: MagGrid<T>, material: MaterialParams<T>, initial: &Magnetization<T>) -> Result<Self> {
        Self::with_terms(grid, material, initial, FieldTerms::default())
    }

    pub fn with_terms(grid: MagGrid<T>, material: MaterialParams<T>, initial: &Magnetization<T>, terms: FieldTerms) -> Result<Self> {
        if initial.m.len() != grid.len() {
            return Err(Error::param("initial", "magnetization does not match the grid"));
        }
        let n = grid.len();
        let demag = terms.demag.then(|| DemagConvolution::new(&grid));
        let zero = vec![[T::zero(); 3]; n];
        let mut m = initial.m.clone();
        for (mi, &inside) in m.iter_mut().zip(&grid.mask) {
            *mi = if inside { normalize(*mi) } else { [T::zero(); 3] };
        }
        let alpha = material.alpha;
        let mut engine = Self {
            grid,
            material,
            consts: PhysicalConstants::si(),
            terms,
            demag,
            b_applied: [T::zero(); 3],
            excitation: None,
            alpha,
            dt: T::lit(DEFAULT_DT_S),
            time: T::zero(),
            steps: 0,
            m,
            h: zero.clone(),
            h_tmp: zero.clone(),
            k: std::array::from_fn(|_| zero.clone()),
            m_stage: zero,
        };
        engine.set_dt(engine.dt).or_else(|_| {
            let bound = engine.stability_bound();
            engine.set_dt(bound * T::lit(0.9))
        })?;
        Ok(engine)
    }

    pub fn grid(&self) -> &MagGrid<T> {
        &self.grid
    }

    pub fn material(&self) -> &MaterialParams<T> {
        &self.material
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: T) {
        self.alpha = alpha;
    }

    pub fn reset_clock(&mut self) {
        self.time = T::zero();
        self.steps = 0;
    }

    pub fn b_applied(&self) -> Vec3<T> {
        self.b_applied
    }

    pub fn set_b_applied(&mut self, b: Vec3<T>) -> Result<()> {
        self.b_applied = b;
        self.check_dt(self.dt)
    }

    pub fn set_excitation(&mut self, excitation: Option<Excitation<T>>) -> Result<()> {
        if let Some(e) = &excitation {
            if e.profile.len() != self.grid.len() {
                return Err(Error::param("excitation", "profile does not match the grid"));
            }
        }
        self.excitation = excitation;
        self.check_dt(self.dt)
    }

    /// Largest RK4-stable step for the stiffest precession frequency the
    /// exchange, demag and applied fields can produce.
    pub fn stability_bound(&self) -> T {
        let mu0 = self.consts.mu0;
        let ms = self.material.ms;
        let four = T::lit(4.0);
        let mut b_max = T::zero();
        if self.terms.exchange {
            let lex2 = T::lit(2.0) * self.material.aex / (mu0 * ms * ms);
            let g = &self.grid;
            let lap = |n: usize, d: T| if n > 1 { four / (d * d) } else { T::zero() };
            b_max += mu0 * ms * lex2 * (lap(g.nx, g.dx) + lap(g.ny, g.dy) + lap(g.nz, g.dz));
        }
        if self.terms.demag {
            b_max += mu0 * ms;
        }
        b_max += crate::scalar::norm(self.b_applied);
        if let Some(e) = &self.excitation {
            b_max += e.peak();
        }
        // |R(iz)| <= 1 for the RK4 stability polynomial up to z = 2√2
        let z_max = T::lit(2.0 * std::f64::consts::SQRT_2);
        z_max / (self.consts.gamma() * b_max.max(T::lit(1e-30)))
    }

    fn check_dt(&self, dt: T) -> Result<()> {
        let bound = self.stability_bound();
        if !(dt > T::zero()) || dt > bound {
            return Err(Error::TimeStepTooLarge {
                dt_s: dt.f64(),
                bound_s: bound.f64(),
            });
        }
        Ok(())
    }

    pub fn set_dt(&mut self, dt: T) -> Result<()> {
        self.check_dt(dt)?;
        self.dt = dt;
        Ok(())
    }

    pub fn magnetization(&self) -> Magnetization<T> {
        Magnetization {
            m: self.m.clone(),
            ms: self.material.ms,
        }
    }

    pub fn m(&self) -> &[Vec3<T>] {
        &self.m
    }

    pub fn set_magnetization(&mut self, mag: &Magnetization<T>) -> Result<()> {
        if mag.m.len() != self.grid.len() {
            return Err(Error::param("magnetization", "does not match the grid"));
        }
        for ((dst, src), &inside) in self.m.iter_mut().zip(&mag.m).zip(&self.grid.mask) {
            *dst = if inside { normalize(*src) } else { [T::zero(); 3] };
        }
        Ok(())
    }

    /// ⟨M⟩ over masked cells, A/m.
    pub fn average_magnetization(&self) -> Vec3<T> {
        let mut acc = [T::zero(); 3];
        let mut n = 0usize;
        for (mi, &inside) in self.m.iter().zip(&self.grid.mask) {
            if inside {
                for k in 0..3 {
                    acc[k] += mi[k];
                }
                n += 1;
            }
        }
        let s = self.material.ms / T::lit(n.max(1) as f64);
        [acc[0] * s, acc[1] * s, acc[2] * s]
    }

    /// Uniform Zeeman field in A/m at time `t` for cell `i`.
    #[inline]
    fn zeeman_at(&self, i: usize, wt: T) -> Vec3<T> {
        let inv_mu0 = T::one() / self.consts.mu0;
        let mut b = self.b_applied;
        if let Some(e) = &self.excitation {
            let p = e.profile[i];
            for k in 0..3 {
                b[k] += p[k] * wt;
            }
        }
        [b[0] * inv_mu0, b[1] * inv_mu0, b[2] * inv_mu0]
    }

    /// Separate field terms for the current state at the current time.
    pub fn effective_field(&mut self) -> EffectiveField<T> {
        let n = self.grid.len();
        let mut exchange = vec![[T::zero(); 3]; n];
        let mut demag = vec![[T::zero(); 3]; n];
        if self.terms.exchange {
            exchange_field(&self.m, &self.grid, self.material.aex, self.material.ms, &mut exchange);
        }
        if let Some(d) = self.demag.as_mut() {
            d.field(&self.m, self.material.ms, &mut demag);
        }
        let wt = self.excitation.as_ref().map_or(T::zero(), |e| e.waveform.at(self.time));
        let zeeman = (0..n)
            .map(|i| if self.grid.mask[i] { self.zeeman_at(i, wt) } else { [T::zero(); 3] })
            .collect();
        EffectiveField { exchange, demag, zeeman }
    }

    /// Total effective field of `m` at time `t` into `self.h`.
    fn total_field(&mut self, which: Stage, t: T) {
        let m = match which {
            Stage::Current => &self.m,
            Stage::Trial => &self.m_stage,
        };
        let h = &mut self.h;
        if self.terms.exchange {
            exchange_field(m, &self.grid, self.material.aex, self.material.ms, h);
        } else {
            h.iter_mut().for_each(|v| *v = [T::zero(); 3]);
        }
        if let Some(d) = self.demag.as_mut() {
            d.field(m, self.material.ms, &mut self.h_tmp);
            for (a, b) in h.iter_mut().zip(&self.h_tmp) {
                for k in 0..3 {
                    a[k] += b[k];
                }
            }
        }
        let wt = self.excitation.as_ref().map_or(T::zero(), |e| e.waveform.at(t));
        let inv_mu0 = T::one() / self.consts.mu0;
        let b0 = self.b_applied;
        let mask = &self.grid.mask;
        let profile = self.excitation.as_ref().map(|e| &e.profile);
        h.par_iter_mut().enumerate().for_each(|(i, hi)| {
            if !mask[i] {
                *hi = [T::zero(); 3];
                return;
            }
            let mut b = b0;
            if let Some(p) = profile {
                for k in 0..3 {
                    b[k] += p[i][k] * wt;
                }
            }
            for k in 0..3 {
                hi[k] += b[k] * inv_mu0;
            }
        });
    }

    /// dm/dt for the state selected by `which` and the field in `self.h`.
    fn rhs(&mut self, which: Stage, slot: usize) {
        let m = match which {
            Stage::Current => &self.m,
            Stage::Trial => &self.m_stage,
        };
        let gamma = self.consts.gamma();
        let mu0 = self.consts.mu0;
        let alpha = self.alpha;
        let pre = -gamma / (T::one() + alpha * alpha);
        let h = &self.h;
        self.k[slot].par_iter_mut().enumerate().for_each(|(i, k)| {
            let mi = m[i];
            let b = [h[i][0] * mu0, h[i][1] * mu0, h[i][2] * mu0];
            let mxb = cross(mi, b);
            let mxmxb = cross(mi, mxb);
            for c in 0..3 {
                k[c] = pre * (mxb[c] + alpha * mxmxb[c]);
            }
        });
    }

    fn trial(&mut self, slot: usize, scale: T) {
        let m = &self.m;
        let k = &self.k[slot];
        self.m_stage.par_iter_mut().enumerate().for_each(|(i, s)| {
            for c in 0..3 {
                s[c] = m[i][c] + scale * k[i][c];
            }
        });
    }

    /// Max |m × H| / Ms over masked cells for the field in `self.h`.
    fn max_torque_of_current(&self) -> T {
        let ms = self.material.ms;
        self.m
            .iter()
            .zip(&self.h)
            .map(|(m, h)| crate::scalar::norm(cross(*m, *h)) / ms)
            .fold(T::zero(), T::max)
    }

    /// Max |m × H_eff| / Ms of the current state.
    pub fn max_torque(&mut self) -> T {
        self.total_field(Stage::Current, self.time);
        self.max_torque_of_current()
    }

    /// One RK4 step followed by renormalization. Returns the maximum
    /// dimensionless torque |m × H| / Ms at the start of the step.
    pub fn step(&mut self) -> Result<T> {
        let dt = self.dt;
        let half = T::lit(0.5);
        let t0 = self.time;
        self.total_field(Stage::Current, t0);
        let torque = self.max_torque_of_current();
        self.rhs(Stage::Current, 0);
        self.trial(0, dt * half);
        self.total_field(Stage::Trial, t0 + dt * half);
        self.rhs(Stage::Trial, 1);
        self.trial(1, dt * half);
        self.total_field(Stage::Trial, t0 + dt * half);
        self.rhs(Stage::Trial, 2);
        self.trial(2, dt);
        self.total_field(Stage::Trial, t0 + dt);
        self.rhs(Stage::Trial, 3);
        let sixth = dt / T::lit(6.0);
        let two = T::lit(2.0);
        let [k1, k2, k3, k4] = &self.k;
        let mask = &self.grid.mask;
        self.m.par_iter_mut().enumerate().for_each(|(i, m)| {
            if !mask[i] {
                return;
            }
            let mut next = [T::zero(); 3];
            for c in 0..3 {
                next[c] = m[c] + sixth * (k1[i][c] + two * k2[i][c] + two * k3[i][c] + k4[i][c]);
            }
            *m = normalize(next);
        });
        self.steps += 1;
        self.time = t0 + dt;
        if !torque.is_finite() || !self.m.iter().all(|v| v[0].is_finite() && v[1].is_finite() && v[2].is_finite()) {
            return Err(Error::NonFinite { step: self.steps });
        }
        Ok(torque)
    }

    pub fn run_steps(&mut self, n: u64) -> Result<()> {
        for _ in 0..n {
            self.step()?;
        }
        Ok(())
    }

    /// Energy of the current state at the current time, J.
    pub fn energy(&mut self) -> Energy<T> {
        let f = self.effective_field();
        let mu0ms_v = self.consts.mu0 * self.material.ms * self.grid.cell_volume();
        let half = T::lit(0.5);
        let (mut ex, mut de, mut ze) = (T::zero(), T::zero(), T::zero());
        for i in 0..self.grid.len() {
            if !self.grid.mask[i] {
                continue;
            }
            let m = self.m[i];
            ex += dot(m, f.exchange[i]);
            de += dot(m, f.demag[i]);
            ze += dot(m, f.zeeman[i]);
        }
        Energy {
            exchange: -half * mu0ms_v * ex,
            demag: -half * mu0ms_v * de,
            zeeman: -mu0ms_v * ze,
        }
    }
}

#[derive(Clone, Copy)]
enum Stage {
    Current,
    Trial,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::micromag::grid::MagGrid;
    use crate::physics::DiscGeometry;

    fn cofe() -> MaterialParams<f64> {
        MaterialParams::cofe()
    }

    fn small_disc() -> (MagGrid<f64>, Magnetization<f64>) {
        let geom = DiscGeometry::new(100e-9, 15e-9).unwrap();
        let grid = MagGrid::disc(&geom, 32, 32, 3, &cofe()).unwrap();
        let m = Magnetization::vortex(&grid, 1.9e6, 1, 1, 10e-9, [0.0, 0.0]);
        (grid, m)
    }

    #[test]
    fn larmor_precession_frequency() {
        let grid = MagGrid::cuboid(1, 1, 1, [2e-9; 3]);
        let m0 = Magnetization::uniform(&grid, 1.9e6, [1.0, 0.0, 1.0]);
        let terms = FieldTerms {
            exchange: false,
            demag: false,
        };
        let mut e = Engine::with_terms(grid, cofe(), &m0, terms).unwrap();
        e.set_alpha(0.0);
        e.set_b_applied([0.0, 0.0, 0.1]).unwrap();
        e.set_dt(1e-13).unwrap();
        let mut phase = Vec::new();
        let mut last = 0.0f64;
        let mut unwrap = 0.0;
        for _ in 0..4000 {
            e.step().unwrap();
            let m = e.m()[0];
            let p = m[1].atan2(m[0]);
            if p - last > std::f64::consts::PI {
                unwrap -= std::f64::consts::TAU;
            } else if last - p > std::f64::consts::PI {
                unwrap += std::f64::consts::TAU;
            }
            last = p;
            phase.push((e.time(), p + unwrap));
        }
        let (t0, p0) = phase[0];
        let (t1, p1) = *phase.last().unwrap();
        // dm/dt = -γ m × B turns m counterclockwise about +z
        let f = (p1 - p0) / (t1 - t0) / std::f64::consts::TAU;
        assert!((f / 2.8e9 - 1.0).abs() < 1e-6, "{f}");
    }

    fn exchange_energy_oracle(grid: &MagGrid<f64>, m: &[Vec3<f64>], aex: f64) -> f64 {
        let v = grid.cell_volume();
        let mut e = 0.0;
        for i in 0..grid.len() {
            if !grid.mask[i] {
                continue;
            }
            let (x, y, z) = grid.coords(i);
            for (dxyz, d) in [((1, 0, 0), grid.dx), ((0, 1, 0), grid.dy), ((0, 0, 1), grid.dz)] {
                let (xn, yn, zn) = (x + dxyz.0, y + dxyz.1, z + dxyz.2);
                if xn >= grid.nx || yn >= grid.ny || zn >= grid.nz {
                    continue;
                }
                let j = grid.index(xn, yn, zn);
                if !grid.mask[j] {
                    continue;
                }
                let diff: f64 = (0..3).map(|k| (m[i][k] - m[j][k]).powi(2)).sum();
                e += aex * v * diff / (d * d);
            }
        }
        e
    }

    #[test]
    fn exchange_field_is_energy_gradient() {
        let (grid, mag) = small_disc();
        let aex = 2.6e-11;
        let ms = 1.9e6;
        let mut h = vec![[0.0; 3]; grid.len()];
        exchange_field(&mag.m, &grid, aex, ms, &mut h);
        let mu0 = PhysicalConstants::<f64>::si().mu0;
        let v = grid.cell_volume();
        let i = grid.index(20, 14, 1);
        assert!(grid.mask[i]);
        for k in 0..3 {
            let eps = 1e-6;
            let mut mp = mag.m.clone();
            mp[i][k] += eps;
            let mut mm = mag.m.clone();
            mm[i][k] -= eps;
            let de = (exchange_energy_oracle(&grid, &mp, aex) - exchange_energy_oracle(&grid, &mm, aex)) / (2.0 * eps);
            let want = -de / (mu0 * ms * v);
            let scale = h[i].iter().map(|x: &f64| x.abs()).fold(0.0, f64::max);
            assert!((h[i][k] - want).abs() < 1e-6 * scale, "{k}: {} vs {want}", h[i][k]);
        }
    }

    #[test]
    fn damping_lowers_energy_monotonically() {
        let (grid, mag) = small_disc();
        let mut e = Engine::new(grid, cofe(), &mag).unwrap();
        e.set_alpha(0.3);
        e.set_dt(0.5e-12).unwrap();
        let mut prev = e.energy().total();
        for _ in 0..40 {
            e.run_steps(5).unwrap();
            let now = e.energy().total();
            assert!(now <= prev + 1e-12 * prev.abs(), "{now} > {prev}");
            prev = now;
        }
    }

    #[test]
    fn undamped_energy_is_conserved() {
        let (grid, mag) = small_disc();
        let mut e = Engine::new(grid, cofe(), &mag).unwrap();
        e.set_alpha(0.0);
        e.set_dt(0.1e-12).unwrap();
        let e0 = e.energy().total();
        e.run_steps(10_000).unwrap();
        let e1 = e.energy().total();
        assert!(((e1 - e0) / e0).abs() < 1e-6, "{e0} -> {e1}");
        assert!(e.magnetization().max_norm_error(e.grid()) < 1e-12);
    }

    #[test]
    fn runs_are_bit_identical() {
        let run = || {
            let (grid, mag) = small_disc();
            let mut e = Engine::new(grid, cofe(), &mag).unwrap();
            e.set_b_applied([1e-3, 0.0, 0.0]).unwrap();
            e.run_steps(50).unwrap();
            e.magnetization().m
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn oversized_step_is_rejected() {
        let (grid, mag) = small_disc();
        let mut e = Engine::new(grid, cofe(), &mag).unwrap();
        let bound = e.stability_bound();
        assert!(matches!(e.set_dt(bound * 1.5), Err(Error::TimeStepTooLarge { .. })));
        assert!(e.set_dt(bound * 0.9).is_ok());
    }

    #[test]
    fn sinc_waveform_peaks_at_delay() {
        let w: Waveform<f64> = Waveform::Sinc {
            f_cutoff: 50e9,
            delay: 1e-9,
        };
        assert_eq!(w.at(1e-9), 1.0);
        assert!(w.at(1e-9 + 1.0 / 100e9).abs() < 1e-9_f64);
    }
}
