//! Excitation protocols for the micromagnetic engine and extraction of the
//! gyrotropic mode: broadband spectra, Lorentzian linewidth fits, field
//! sweeps and resonant susceptibility.

use std::io::Write;

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, Matrix, Vector3, U1, U3};
use nalgebra::{DVector, Dyn};
use realfft::RealFftPlanner;

use crate::error::{Error, Result};
use crate::micromag::{relax_vortex, Engine, Excitation, MagGrid, Magnetization, RelaxOptions, Waveform};
use crate::physics::MaterialParams;
use crate::scalar::{Real, Vec3};

/// Delay of the sinc pulse centre, in units of 1/f_cutoff.
pub const SINC_DELAY_CYCLES: f64 = 20.0;

/// Peak |ΔM_x|/Ms above which a response is no longer treated as linear.
pub const LINEAR_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcitationKind<T> {
    /// b(t) = sinc(2π f_cutoff (t - delay)).
    SincBroadband { f_cutoff: T, delay: T },
    /// b(t) = cos(2π f_drive t).
    SinusoidResonant { f_drive: T },
}

/// Drive protocol: a per-cell field profile in T times a waveform, sampled
/// every `sample_dt` for `duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSpec<T> {
    pub kind: ExcitationKind<T>,
    pub profile: Vec<Vec3<T>>,
    pub duration: T,
    pub sample_dt: T,
}

impl<T: Real> ExcitationSpec<T> {
    /// Uniform in-plane sinc pulse along x with amplitude `amplitude` (T).
    pub fn sinc_uniform(grid: &MagGrid<T>, amplitude: T, f_cutoff: T, duration: T, sample_dt: T) -> Result<Self> {
        let spec = Self {
            kind: ExcitationKind::SincBroadband {
                f_cutoff,
                delay: T::lit(SINC_DELAY_CYCLES) / f_cutoff,
            },
            profile: vec![[amplitude, T::zero(), T::zero()]; grid.len()],
            duration,
            sample_dt,
        };
        spec.validate(grid.len())?;
        Ok(spec)
    }

    /// Sinusoidal drive with an arbitrary field profile.
    pub fn sinusoid(profile: Vec<Vec3<T>>, f_drive: T, duration: T, sample_dt: T) -> Result<Self> {
        let n = profile.len();
        let spec = Self {
            kind: ExcitationKind::SinusoidResonant { f_drive },
            profile,
            duration,
            sample_dt,
        };
        spec.validate(n)?;
        Ok(spec)
    }

    pub fn validate(&self, cells: usize) -> Result<()> {
        if self.profile.len() != cells {
            return Err(Error::param("profile", "length does not match the grid"));
        }
        if !(self.sample_dt > T::zero()) || !(self.duration > self.sample_dt) {
            return Err(Error::param("sample_dt", "need 0 < sample_dt < duration"));
        }
        let f_max = match self.kind {
            ExcitationKind::SincBroadband { f_cutoff, .. } => f_cutoff,
            ExcitationKind::SinusoidResonant { f_drive } => f_drive,
        };
        if !(f_max > T::zero()) {
            return Err(Error::param("frequency", "must be positive"));
        }
        if self.sample_dt >= T::one() / (T::lit(2.0) * f_max) {
            return Err(Error::param("sample_dt", "violates the Nyquist limit of the drive"));
        }
        let ratio = (self.duration / self.sample_dt).f64();
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(Error::param("duration", "must be an integer number of samples"));
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration / self.sample_dt).f64().round() as usize
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for b in &mut out.profile {
            for c in b.iter_mut() {
                *c *= factor;
            }
        }
        out
    }

    fn waveform(&self) -> Waveform<T> {
        match self.kind {
            ExcitationKind::SincBroadband { f_cutoff, delay } => Waveform::Sinc { f_cutoff, delay },
            ExcitationKind::SinusoidResonant { f_drive } => Waveform::Cosine { f: f_drive },
        }
    }
}

/// Uniformly sampled ⟨M_x⟩(t).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub times: Vec<T>,
    /// Spatially averaged M_x, A/m.
    pub mx: Vec<T>,
}

impl<T: Real> TimeSeries<T> {
    pub fn len(&self) -> usize {
        self.mx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mx.is_empty()
    }

    pub fn sample_dt(&self) -> T {
        if self.times.len() < 2 {
            T::zero()
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn duration(&self) -> T {
        self.sample_dt() * T::lit(self.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_s,Mx_A_per_m")?;
        for (t, m) in self.times.iter().zip(&self.mx) {
            writeln!(w, "{:e},{:e}", t.f64(), m.f64())?;
        }
        Ok(())
    }
}

/// Run the engine under `exc` from its current state, sampling ⟨M_x⟩.
/// The engine's step is shortened if needed so that it divides the sample
/// interval; the excitation is removed afterwards.
pub fn record_series<T: Real>(engine: &mut Engine<T>, exc: &ExcitationSpec<T>) -> Result<TimeSeries<T>> {
    exc.validate(engine.grid().len())?;
    let n = exc.samples();
    let dt0 = engine.dt();
    let per = (exc.sample_dt / dt0).f64().ceil().max(1.0);
    engine.set_excitation(Some(Excitation {
        profile: exc.profile.clone(),
        waveform: exc.waveform(),
    }))?;
    let out = (|| {
        engine.set_dt(exc.sample_dt / T::lit(per))?;
        engine.reset_clock();
        let mut times = Vec::with_capacity(n);
        let mut mx = Vec::with_capacity(n);
        for k in 0..n {
            if k > 0 {
                engine.run_steps(per as u64)?;
            }
            times.push(exc.sample_dt * T::lit(k as f64));
            mx.push(engine.average_magnetization()[0]);
        }
        Ok(TimeSeries { times, mx })
    })();
    engine.set_excitation(None)?;
    engine.set_dt(dt0)?;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralWindow {
    #[default]
    Rectangular,
    Hann,
}

impl SpectralWindow {
    fn weight(self, k: usize, n: usize) -> f64 {
        match self {
            SpectralWindow::Rectangular => 1.0,
            SpectralWindow::Hann => {
                let x = std::f64::consts::PI * k as f64 / n as f64;
                2.0 * x.sin().powi(2)
            }
        }
    }
}

/// One-sided FFT magnitude of ΔM_x(t) = ⟨M_x⟩(t) - ⟨M_x⟩(0).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub freqs: Vec<T>,
    /// |FFT(ΔM_x)|, A/m · samples.
    pub magnitude: Vec<T>,
    /// Trace length the spectrum was computed from, s.
    pub duration: T,
}

impl<T: Real> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Frequency resolution 1/duration, Hz.
    pub fn resolution(&self) -> T {
        T::one() / self.duration
    }

    /// |FFT|² per bin.
    pub fn power(&self) -> Vec<T> {
        self.magnitude.iter().map(|&a| a * a).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq_Hz,power")?;
        for (f, p) in self.freqs.iter().zip(self.power()) {
            writeln!(w, "{:e},{:e}", f.f64(), p.f64())?;
        }
        Ok(())
    }
}

fn deviation<T: Real>(series: &TimeSeries<T>, window: SpectralWindow, len: usize) -> Vec<f64> {
    let m0 = series.mx.first().map_or(0.0, |v| v.f64());
    let n = series.len();
    let mut buf = vec![0.0; len];
    for (k, v) in series.mx.iter().enumerate() {
        buf[k] = (v.f64() - m0) * window.weight(k, n);
    }
    buf
}

fn fft_magnitude(mut buf: Vec<f64>) -> Vec<f64> {
    let n = buf.len();
    let mut planner = RealFftPlanner::<f64>::new();
    let r2c = planner.plan_fft_forward(n);
    let mut out = r2c.make_output_vec();
    r2c.process(&mut buf, &mut out).expect("fft length");
    out.iter().map(|c| c.norm()).collect()
}

/// Spectrum of a recorded series: N/2 bins from DC upward.
pub fn spectrum_of<T: Real>(series: &TimeSeries<T>, window: SpectralWindow) -> Result<Spectrum<T>> {
    let n = series.len();
    if n < 4 {
        return Err(Error::param("series", "need at least four samples"));
    }
    if series.mx.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    let mag = fft_magnitude(deviation(series, window, n));
    let duration = series.duration();
    let df = T::one() / duration;
    Ok(Spectrum {
        freqs: (0..n / 2).map(|k| df * T::lit(k as f64)).collect(),
        magnitude: mag[..n / 2].iter().map(|&v| T::lit(v)).collect(),
        duration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BroadbandOptions {
    pub window: SpectralWindow,
    /// Repeat the run at twice the amplitude and compare spectra.
    pub linearity_check: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadbandRun<T> {
    pub series: TimeSeries<T>,
    pub spectrum: Spectrum<T>,
    /// max |ΔM_x| / Ms over the trace.
    pub peak_deviation: T,
    /// Set when the response left the linear regime.
    pub nonlinear: bool,
}

/// Drive the (relaxed) engine state with a broadband excitation and return
/// the ⟨M_x⟩ spectrum. The engine is restored to its starting state.
pub fn broadband_spectrum<T: Real>(engine: &mut Engine<T>, exc: &ExcitationSpec<T>, opts: BroadbandOptions) -> Result<BroadbandRun<T>> {
    let start = engine.magnetization();
    let ms = engine.material().ms;
    let run = |engine: &mut Engine<T>, exc: &ExcitationSpec<T>| {
        let r = record_series(engine, exc);
        engine.set_magnetization(&start)?;
        engine.reset_clock();
        r
    };
    let series = run(engine, exc)?;
    let spectrum = spectrum_of(&series, opts.window)?;
    let m0 = series.mx[0];
    let peak_deviation = series.mx.iter().map(|&v| (v - m0).abs()).fold(T::zero(), T::max) / ms;
    let mut nonlinear = peak_deviation.f64() > LINEAR_LIMIT;
    if opts.linearity_check {
        let doubled = spectrum_of(&run(engine, &exc.scaled(T::lit(2.0)))?, opts.window)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in spectrum.magnitude.iter().zip(&doubled.magnitude) {
            num += (b.f64() - 2.0 * a.f64()).powi(2);
            den += (2.0 * a.f64()).powi(2);
        }
        if den > 0.0 && (num / den).sqrt() > LINEAR_LIMIT {
            nonlinear = true;
        }
    }
    Ok(BroadbandRun {
        series,
        spectrum,
        peak_deviation,
        nonlinear,
    })
}

/// Index of the lowest-frequency spectral peak at or above `f_min` whose
/// height is at least `rel_height` of the largest bin in that range.
pub fn lowest_peak<T: Real>(spec: &Spectrum<T>, f_min: T, rel_height: f64) -> Option<usize> {
    let start = spec.freqs.iter().position(|&f| f >= f_min)?.max(1);
    let a: Vec<f64> = spec.magnitude.iter().map(|v| v.f64()).collect();
    let top = a[start..].iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return None;
    }
    (start..a.len()).find(|&k| {
        let left = a[k - 1];
        let right = a.get(k + 1).copied().unwrap_or(0.0);
        a[k] >= rel_height * top && a[k] >= left && a[k] > right
    })
}

/// Peak frequency and its honest uncertainty (never below 1/duration).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate<T> {
    pub f: T,
    pub uncertainty: T,
}

/// Frequency of the lowest spectral peak of a series, refined on an
/// 8×-zero-padded FFT with parabolic interpolation of the maximum.
pub fn peak_frequency<T: Real>(series: &TimeSeries<T>, window: SpectralWindow, f_min: T) -> Result<FrequencyEstimate<T>> {
    let spec = spectrum_of(series, window)?;
    let floor = f_min.max(T::lit(2.0) * spec.resolution());
    let k = lowest_peak(&spec, floor, 0.2).ok_or_else(|| Error::NoPeak("no spectral peak above the floor".into()))?;
    let n = series.len();
    let padded = (8 * n).next_power_of_two();
    let mag = fft_magnitude(deviation(series, window, padded));
    let dt = series.sample_dt().f64();
    let df = 1.0 / (padded as f64 * dt);
    let f_coarse = spec.freqs[k].f64();
    let span = 1.5 * spec.resolution().f64();
    let lo = (((f_coarse - span) / df).floor().max(1.0)) as usize;
    let hi = (((f_coarse + span) / df).ceil() as usize).min(mag.len() - 2);
    let j = (lo..=hi).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap_or(lo);
    let (y0, y1, y2) = (mag[j - 1], mag[j], mag[j + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom.abs() > 0.0 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Ok(FrequencyEstimate {
        f: T::lit((j as f64 + shift) * df),
        uncertainty: spec.resolution(),
    })
}

/// L(f) = (A/π)·(Δf/2)/((f−f_G)² + (Δf/2)²).
pub fn lorentzian(f: f64, amplitude: f64, f_g: f64, delta_f: f64) -> f64 {
    let h = 0.5 * delta_f;
    amplitude / std::f64::consts::PI * h / ((f - f_g).powi(2) + h * h)
}

/// Extracted gyrotropic-mode parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroModeReport<T> {
    pub f_g: T,
    /// Full width at half maximum, Hz.
    pub delta_f_g: T,
    /// Resonant susceptibility, (A/m)/T, when measured.
    pub chi_x: Option<T>,
    pub fit_amplitude: T,
    /// RMS residual relative to the RMS of the fitted data.
    pub fit_residual: T,
}

impl<T: Real> GyroModeReport<T> {
    /// Damping implied by Δf_G = 2 α_v f_G.
    pub fn alpha_v(&self) -> T {
        self.delta_f_g / (T::lit(2.0) * self.f_g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzFitOptions {
    /// Minimum number of bins above half maximum.
    pub min_bins: usize,
    pub max_residual: f64,
}

impl Default for LorentzFitOptions {
    fn default() -> Self {
        Self {
            min_bins: 8,
            max_residual: 0.2,
        }
    }
}

struct LorentzProblem {
    f: Vec<f64>,
    y: Vec<f64>,
    /// Parameters scaled to O(1): amplitude / a0, (f_g - f0) / w0, Δf / w0.
    p: Vector3<f64>,
    a0: f64,
    f0: f64,
    w0: f64,
}

impl LorentzProblem {
    fn physical(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        (p[0] * self.a0, self.f0 + p[1] * self.w0, p[2] * self.w0)
    }
}

impl LeastSquaresProblem<f64, Dyn, U3> for LorentzProblem {
    type ResidualStorage = Owned<f64, Dyn, U1>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3, U1>;

    fn set_params(&mut self, p: &Vector3<f64>) {
        self.p = *p;
    }

    fn params(&self) -> Vector3<f64> {
        self.p
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let (a, fg, df) = self.physical(&self.p);
        let scale = 1.0 / self.y.iter().cloned().fold(0.0, f64::max);
        Some(DVector::from_iterator(
            self.f.len(),
            self.f.iter().zip(&self.y).map(|(&f, &y)| (lorentzian(f, a, fg, df) - y) * scale),
        ))
    }

    fn jacobian(&self) -> Option<Matrix<f64, Dyn, U3, Self::JacobianStorage>> {
        let (a, fg, df) = self.physical(&self.p);
        let scale = 1.0 / self.y.iter().cloned().fold(0.0, f64::max);
        let h = 0.5 * df;
        let pi = std::f64::consts::PI;
        let mut j = Matrix::<f64, Dyn, U3, Self::JacobianStorage>::zeros(self.f.len());
        for (row, &f) in self.f.iter().enumerate() {
            let u = f - fg;
            let d = u * u + h * h;
            let dl_da = h / (pi * d);
            let dl_dfg = a / pi * h * 2.0 * u / (d * d);
            let dl_dh = a / pi * (d - 2.0 * h * h) / (d * d);
            j[(row, 0)] = dl_da * self.a0 * scale;
            j[(row, 1)] = dl_dfg * self.w0 * scale;
            j[(row, 2)] = dl_dh * 0.5 * self.w0 * scale;
        }
        Some(j)
    }
}

/// Fit the Lorentzian line shape to the power spectrum inside `window` (Hz).
pub fn lorentzian_fit<T: Real>(spec: &Spectrum<T>, window: (T, T), opts: LorentzFitOptions) -> Result<GyroModeReport<T>> {
    let (lo, hi) = (window.0.f64(), window.1.f64());
    let idx: Vec<usize> = (0..spec.len())
        .filter(|&k| {
            let f = spec.freqs[k].f64();
            f >= lo && f <= hi
        })
        .collect();
    if idx.len() < 3 {
        return Err(Error::InsufficientResolution(format!(
            "only {} bins in the fit window; extend the trace",
            idx.len()
        )));
    }
    let f: Vec<f64> = idx.iter().map(|&k| spec.freqs[k].f64()).collect();
    let y: Vec<f64> = idx.iter().map(|&k| spec.magnitude[k].f64().powi(2)).collect();
    let (ipk, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    if !(ymax > 0.0) {
        return Err(Error::NoPeak("spectrum is zero in the window".into()));
    }
    let half = 0.5 * ymax;
    let left = (0..ipk).rev().find(|&k| y[k] < half);
    let right = (ipk + 1..y.len()).find(|&k| y[k] < half);
    let (Some(l), Some(r)) = (left, right) else {
        return Err(Error::NoPeak("window does not contain an isolated peak".into()));
    };
    let above = r - l - 1;
    if above < opts.min_bins {
        return Err(Error::InsufficientResolution(format!(
            "peak spans {above} bins above half maximum, need {}; use a longer trace",
            opts.min_bins
        )));
    }
    let bin = spec.resolution().f64();
    let w0 = (above as f64 * bin).max(bin);
    let f0 = f[ipk];
    let a0 = ymax * std::f64::consts::PI * 0.5 * w0;
    let problem = LorentzProblem {
        f,
        y,
        p: Vector3::new(1.0, 0.0, 1.0),
        a0,
        f0,
        w0,
    };
    let (problem, report) = LevenbergMarquardt::new().minimize(problem);
    if !report.termination.was_successful() {
        return Err(Error::FitFailed(format!("{:?}", report.termination)));
    }
    let (a, fg, df) = problem.physical(&problem.p);
    let df = df.abs();
    if !(a > 0.0) || !(fg > lo && fg < hi) || !df.is_finite() {
        return Err(Error::FitFailed("fit left the window".into()));
    }
    let scale = 1.0 / ymax;
    let rms_y = (problem.y.iter().map(|v| (v * scale).powi(2)).sum::<f64>() / problem.y.len() as f64).sqrt();
    let res = problem.residuals().expect("residuals");
    let residual = (res.norm_squared() / problem.y.len() as f64).sqrt() / rms_y;
    if residual > opts.max_residual {
        return Err(Error::FitFailed(format!("relative residual {residual:.3} above threshold")));
    }
    let duration = spec.duration.f64();
    if duration < 4.0 / df {
        return Err(Error::InsufficientResolution(format!(
            "trace of {duration:.3e} s is shorter than 4/Δf = {:.3e} s",
            4.0 / df
        )));
    }
    Ok(GyroModeReport {
        f_g: T::lit(fg),
        delta_f_g: T::lit(df),
        chi_x: None,
        fit_amplitude: T::lit(a),
        fit_residual: T::lit(residual),
    })
}

/// Broadband drive used for frequency-only runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SincDrive<T> {
    /// Peak field, T.
    pub amplitude: T,
    pub f_cutoff: T,
    pub duration: T,
    pub sample_dt: T,
}

impl<T: Real> Default for SincDrive<T> {
    fn default() -> Self {
        Self {
            amplitude: T::lit(10e-3),
            f_cutoff: T::lit(50e9),
            duration: T::lit(200e-9),
            sample_dt: T::lit(5e-12),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions<T> {
    pub drive: SincDrive<T>,
    pub relax: RelaxOptions<T>,
    pub circulation: i8,
    /// Core radius of the seed ansatz, m.
    pub seed_core_radius: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSweep<T> {
    /// (B_dc in T, f_G in Hz).
    pub points: Vec<(T, T)>,
    /// df_G/dB_dc, Hz/T.
    pub slope: T,
    pub slope_stderr: T,
    pub intercept: T,
    /// max |f_G - fit| / f_G.
    pub max_rel_residual: T,
}

/// Ordinary least-squares line through (x, y): (slope, intercept, slope standard error).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if x.len() > 2 && sxx > 0.0 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, stderr)
}

/// Gyrotropic frequency versus out-of-plane field for one polarity. Each
/// field point is relaxed from the previous one and must keep the seeded
/// circulation and polarity.
pub fn field_sweep_fg<T: Real>(
    grid: &MagGrid<T>,
    material: &MaterialParams<T>,
    b_dc: &[T],
    polarity: i8,
    opts: &SweepOptions<T>,
) -> Result<FieldSweep<T>> {
    if b_dc.len() < 2 {
        return Err(Error::param("b_dc", "need at least two field values"));
    }
    let seed = Magnetization::vortex(grid, material.ms, opts.circulation, polarity, opts.seed_core_radius, [T::zero(); 2]);
    let mut engine = Engine::new(grid.clone(), material.clone(), &seed)?;
    let drive = opts.drive;
    let exc = ExcitationSpec::sinc_uniform(grid, drive.amplitude, drive.f_cutoff, drive.duration, drive.sample_dt)?;
    let mut points = Vec::with_capacity(b_dc.len());
    for &b in b_dc {
        engine.set_b_applied([T::zero(), T::zero(), b])?;
        relax_vortex(&mut engine, &opts.relax, opts.circulation, polarity).map_err(|e| match e {
            Error::VortexLost { reason, .. } => Error::VortexLost { b_dc_t: b.f64(), reason },
            other => other,
        })?;
        let run = broadband_spectrum(&mut engine, &exc, BroadbandOptions::default())?;
        let est = peak_frequency(&run.series, SpectralWindow::Rectangular, T::zero())?;
        points.push((b, est.f));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.f64()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.f64()).collect();
    let (slope, intercept, stderr) = linear_fit(&x, &y);
    let max_rel = x
        .iter()
        .zip(&y)
        .map(|(a, b)| ((b - intercept - slope * a) / b).abs())
        .fold(0.0, f64::max);
    Ok(FieldSweep {
        points,
        slope: T::lit(slope),
        slope_stderr: T::lit(stderr),
        intercept: T::lit(intercept),
        max_rel_residual: T::lit(max_rel),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilityOptions<T> {
    /// Give up after this much simulated time, s.
    pub max_duration: T,
    /// Allowed relative change of the envelope between windows.
    pub tolerance: T,
    pub window_periods: usize,
    pub samples_per_period: usize,
}

impl<T: Real> Default for SusceptibilityOptions<T> {
    fn default() -> Self {
        Self {
            max_duration: T::lit(5e-6),
            tolerance: T::lit(0.01),
            window_periods: 10,
            samples_per_period: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilityReport<T> {
    /// ΔM_x / b_x(r_c), (A/m)/T.
    pub chi_x: T,
    /// Steady-state amplitude of ⟨M_x⟩, A/m.
    pub delta_mx: T,
    /// Drive amplitude used as the reference field, T.
    pub b_center: T,
    /// Simulated drive time until steady state, s.
    pub duration: T,
}

/// Drive the engine with `profile(x, y)·cos(2π f_drive t)` until the
/// oscillation envelope of ⟨M_x⟩ settles, then divide the steady amplitude
/// by the x field at the disc centre. The engine state is restored.
pub fn resonant_susceptibility<T: Real>(
    engine: &mut Engine<T>,
    profile: &[Vec3<T>],
    b_center_x: T,
    f_drive: T,
    opts: &SusceptibilityOptions<T>,
) -> Result<SusceptibilityReport<T>> {
    if profile.len() != engine.grid().len() {
        return Err(Error::param("profile", "length does not match the grid"));
    }
    if !(b_center_x.abs() > T::zero()) || !(f_drive > T::zero()) {
        return Err(Error::param("drive", "centre field and frequency must be non-zero"));
    }
    let start = engine.magnetization();
    let dt0 = engine.dt();
    let period = T::one() / f_drive;
    let sample_dt = period / T::lit(opts.samples_per_period as f64);
    let per = (sample_dt / dt0).f64().ceil().max(1.0) as u64;
    engine.set_excitation(Some(Excitation {
        profile: profile.to_vec(),
        waveform: Waveform::Cosine { f: f_drive },
    }))?;
    let window_samples = opts.samples_per_period * opts.window_periods.max(1);
    let window_time = sample_dt * T::lit(window_samples as f64);
    let out = (|| {
        engine.set_dt(sample_dt / T::lit(per as f64))?;
        engine.reset_clock();
        let mut prev: Option<f64> = None;
        let mut settled = 0;
        let mut elapsed = T::zero();
        let mut last_change = f64::INFINITY;
        while elapsed < opts.max_duration {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for _ in 0..window_samples {
                engine.run_steps(per)?;
                let m = engine.average_magnetization()[0].f64();
                lo = lo.min(m);
                hi = hi.max(m);
            }
            elapsed += window_time;
            let amp = 0.5 * (hi - lo);
            if let Some(p) = prev {
                last_change = ((amp - p) / amp).abs();
                settled = if last_change < opts.tolerance.f64() { settled + 1 } else { 0 };
                if settled >= 2 {
                    return Ok(SusceptibilityReport {
                        chi_x: T::lit(amp) / b_center_x.abs(),
                        delta_mx: T::lit(amp),
                        b_center: b_center_x.abs(),
                        duration: elapsed,
                    });
                }
            }
            prev = Some(amp);
        }
        Err(Error::NoSteadyState {
            duration_s: elapsed.f64(),
            change: last_change,
        })
    })();
    engine.set_excitation(None)?;
    engine.set_dt(dt0)?;
    engine.set_magnetization(&start)?;
    engine.reset_clock();
    out
}
