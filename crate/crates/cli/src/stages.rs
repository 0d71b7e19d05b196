//! Pipeline stages. Each stage writes into its own directory and passes
//! scalar results downstream through `result.toml`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use vortex_cavity::cavity::{linspace, local_maxima, transmission_map, FgLine, TwoModeSystem};
use vortex_cavity::coupling::{
    chi_analytic, coupling_exact, default_core_radius, linewidth_analytic, material_comparison, strong_coupling_map, CouplingInputs,
    CouplingSetup, DiscMode, XI_DISC,
};
use vortex_cavity::cpw::{disc_field_profile, field_at_disc_center, field_map, fit_uw, strip_current_distribution, Region};
use vortex_cavity::micromag::{read_ovf, relax_vortex, write_ovf, Magnetization, RelaxOptions};
use vortex_cavity::physics::{DiscGeometry, MaterialParams, PhysicalConstants, Preset};
use vortex_cavity::spectroscopy::{
    broadband_spectrum, field_sweep_fg, lorentzian_fit, peak_frequency, resonant_susceptibility, BroadbandOptions, ExcitationSpec,
    LorentzFitOptions, SincDrive, SpectralWindow, SusceptibilityOptions, SweepOptions, LINEAR_LIMIT,
};
use vortex_cavity::{Engine, Error};

use crate::config::{DiscSelection, ExperimentConfig};
use crate::manifest::{Results, Runner, StageOutput};
use crate::plot::TRANSMISSION_PLOT;
use crate::CliError;

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub quick: bool,
}

impl Ctx {
    fn sections(&self, names: &[&str]) -> String {
        let v = toml::Value::try_from(&self.cfg).expect("config is serializable");
        let t = v.as_table().expect("config is a table");
        let mut out = format!("quick = {}\n", self.quick);
        for n in names {
            if let Some(s) = t.get(*n) {
                out.push_str(&format!("[{n}]\n{s}\n"));
            }
        }
        out
    }

    fn relax_options(&self) -> RelaxOptions<f64> {
        let n = &self.cfg.numerics;
        RelaxOptions {
            alpha: n.relax_alpha,
            torque_tol: n.relax_torque_tol,
            max_steps: n.relax_max_steps,
            check_every: 20,
        }
    }

    fn duration(&self) -> f64 {
        if self.quick {
            self.cfg.numerics.quick_duration_s
        } else {
            self.cfg.numerics.spectrum_duration_s
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn upstream(r: &Runner, names: &[&str]) -> Vec<String> {
    names.iter().map(|n| r.digest_of(n).unwrap_or_default()).collect()
}

pub fn relax(r: &mut Runner, ctx: &Ctx) -> Result<bool, CliError> {
    let inputs = [ctx.sections(&["material", "disc", "numerics"])];
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    r.stage("relax", &refs, |dir| {
        let cfg = &ctx.cfg;
        let grid = cfg.grid()?;
        let mat = cfg.material()?;
        let (c, p) = (cfg.disc.circulation, cfg.disc.polarity);
        let seed = Magnetization::vortex(&grid, mat.ms, c, p, default_core_radius(&mat, cfg.disc.thickness_m), [0.0; 2]);
        let mut e = Engine::new(grid.clone(), mat, &seed)?;
        e.set_dt(cfg.numerics.dt_s)?;
        let rep = relax_vortex(&mut e, &ctx.relax_options(), c, p)?;
        let v = rep.vortex.expect("relax_vortex checks the core");
        write_ovf(create(dir, "relaxed.ovf")?, &grid, &e.magnetization(), "relaxed vortex state")?;
        let mut s = create(dir, "relax.txt")?;
        writeln!(s, "cells = {} x {} x {}", grid.nx, grid.ny, grid.nz)?;
        writeln!(s, "steps = {}", rep.steps)?;
        writeln!(s, "max_torque = {:e}", rep.torque)?;
        writeln!(s, "circulation = {:+}", v.circulation)?;
        writeln!(s, "polarity = {:+}", v.polarity)?;
        writeln!(s, "core_position_m = ({:e}, {:e})", v.core_position[0], v.core_position[1])?;
        let mut res = Results::new();
        res.insert("steps".into(), rep.steps as f64);
        res.insert("torque".into(), rep.torque);
        res.insert("circulation".into(), v.circulation as f64);
        res.insert("polarity".into(), v.polarity as f64);
        Ok(StageOutput {
            results: res,
            warnings: Vec::new(),
        })
    })
}

fn load_relaxed(r: &Runner, cfg: &ExperimentConfig) -> Result<Engine, CliError> {
    let file = File::open(r.stage_dir("relax").join("relaxed.ovf"))?;
    let data = read_ovf(BufReader::new(file))?;
    let grid = cfg.grid()?;
    if data.mag.m.len() != grid.len() {
        return Err(CliError::Core(Error::Ovf("snapshot does not match the configured grid".into())));
    }
    let mut e = Engine::new(grid, cfg.material()?, &data.mag)?;
    e.set_dt(cfg.numerics.dt_s)?;
    Ok(e)
}

pub fn spectrum(r: &mut Runner, ctx: &Ctx) -> Result<bool, CliError> {
    let mut inputs = vec![ctx.sections(&["material", "disc", "numerics"])];
    inputs.extend(upstream(r, &["relax"]));
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let engine = if r.results("relax").is_some() {
        Some(load_relaxed(r, &ctx.cfg))
    } else {
        None
    };
    r.stage("spectrum", &refs, |dir| {
        let mut e = engine.ok_or_else(|| CliError::Config("spectrum needs a completed relax stage".into()))??;
        let n = &ctx.cfg.numerics;
        let exc = ExcitationSpec::sinc_uniform(e.grid(), n.sinc_amplitude_T, n.sinc_cutoff_Hz, ctx.duration(), n.sample_dt_s)?;
        let run = broadband_spectrum(&mut e, &exc, BroadbandOptions::default())?;
        run.series.write_csv(create(dir, "series.csv")?)?;
        run.spectrum.write_csv(create(dir, "spectrum.csv")?)?;
        let est = peak_frequency(&run.series, SpectralWindow::Rectangular, 0.0)?;
        let mut warnings = Vec::new();
        if run.peak_deviation > LINEAR_LIMIT {
            warnings.push(format!("nonlinear response: peak |dMx|/Ms = {:.3}", run.peak_deviation));
        }
        let mut res = Results::new();
        res.insert("f_g_Hz".into(), est.f);
        res.insert("f_g_uncertainty_Hz".into(), est.uncertainty);
        let mut s = create(dir, "gyro.txt")?;
        writeln!(s, "f_G_Hz = {:e}", est.f)?;
        writeln!(s, "f_G_uncertainty_Hz = {:e}", est.uncertainty)?;
        match lorentzian_fit(&run.spectrum, (0.5 * est.f, 1.5 * est.f), LorentzFitOptions::default()) {
            Ok(fit) => {
                writeln!(s, "delta_f_G_Hz = {:e}", fit.delta_f_g)?;
                writeln!(s, "alpha_v = {:e}", fit.alpha_v())?;
                writeln!(s, "fit_residual = {:e}", fit.fit_residual)?;
                res.insert("delta_f_g_Hz".into(), fit.delta_f_g);
            }
            Err(e) => {
                writeln!(s, "delta_f_G_Hz = refused ({e})")?;
                warnings.push(format!("linewidth not measured: {e}"));
            }
        }
        Ok(StageOutput { results: res, warnings })
    })
}

pub fn sweep(r: &mut Runner, ctx: &Ctx) -> Result<bool, CliError> {
    let inputs = [ctx.sections(&["material", "disc", "numerics", "sweep"])];
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    r.stage("sweep-field", &refs, |dir| {
        let cfg = &ctx.cfg;
        let grid = cfg.grid()?;
        let mat = cfg.material()?;
        let n = &cfg.numerics;
        let b = linspace(cfg.sweep.b_min_T, cfg.sweep.b_max_T, cfg.sweep.points);
        let opts = SweepOptions {
            drive: SincDrive {
                amplitude: n.sinc_amplitude_T,
                f_cutoff: n.sinc_cutoff_Hz,
                duration: ctx.duration(),
                sample_dt: n.sample_dt_s,
            },
            relax: ctx.relax_options(),
            circulation: cfg.disc.circulation,
            seed_core_radius: default_core_radius(&mat, cfg.disc.thickness_m),
        };
        let mut csv = create(dir, "sweep.csv")?;
        writeln!(csv, "b_dc_T,f_g_Hz,polarity")?;
        let mut res = Results::new();
        let mut warnings = Vec::new();
        for p in [1i8, -1] {
            let sw = field_sweep_fg(&grid, &mat, &b, p, &opts)?;
            for (bb, f) in &sw.points {
                writeln!(csv, "{bb:e},{f:e},{p}")?;
            }
            let tag = if p > 0 { "p_plus" } else { "p_minus" };
            res.insert(format!("slope_{tag}_Hz_per_T"), sw.slope);
            res.insert(format!("intercept_{tag}_Hz"), sw.intercept);
            res.insert(format!("max_rel_residual_{tag}"), sw.max_rel_residual);
            if sw.max_rel_residual > 0.02 {
                warnings.push(format!("P = {p}: linear fit residual {:.3}", sw.max_rel_residual));
            }
        }
        Ok(StageOutput { results: res, warnings })
    })
}

pub fn rmsfield(r: &mut Runner, ctx: &Ctx) -> Result<bool, CliError> {
    let inputs = [ctx.sections(&["disc", "resonator"])];
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    r.stage("rmsfield", &refs, |dir| {
        let cfg = &ctx.cfg;
        let spec = cfg.resonator()?;
        let geom = cfg.geometry()?;
        let model = cfg.strip();
        let centre = field_at_disc_center(&spec, &geom, model)?;
        let dist = strip_current_distribution(&spec, centre.current, model)?;
        let half = 0.5 * spec.w + 2.0 * geom.r;
        let region = Region {
            x: (-half, half),
            y: (5e-9, geom.standoff + 2.0 * geom.r + 100e-9),
            nx: 81,
            ny: 81,
        };
        field_map(&dist, &region, model.layers)?.write_csv(create(dir, "field_map.csv")?)?;
        let mu0 = PhysicalConstants::<f64>::si().mu0;
        let uw = centre.bx() * std::f64::consts::TAU / (mu0 * centre.current);
        let mut s = create(dir, "center.txt")?;
        writeln!(s, "i_rms_A = {:e}", centre.current)?;
        writeln!(s, "b_center_T = ({:e}, {:e}, {:e})", centre.b[0], centre.b[1], centre.b[2])?;
        writeln!(s, "u_w_per_m = {uw:e}")?;
        let mut warnings = Vec::new();
        let radii = vortex_cavity::coupling::uw_fit_radii(geom.r);
        match fit_uw(&spec, &radii, model) {
            Ok(fit) => fit.write_summary(create(dir, "uw_fit.txt")?)?,
            Err(e) => warnings.push(format!("u_w fit: {e}")),
        }
        let mut res = Results::new();
        res.insert("i_rms_A".into(), centre.current);
        res.insert("b_center_x_T".into(), centre.bx());
        res.insert("uw_per_m".into(), uw);
        Ok(StageOutput { results: res, warnings })
    })
}

/// Gyrotropic mode of the configured disc, preferring measured values.
fn resolve_mode(r: &Runner, cfg: &ExperimentConfig, warnings: &mut Vec<String>) -> Result<DiscMode<f64>, CliError> {
    let (mut mode, src) = cfg.analytic_mode()?;
    let spec = r.results("spectrum");
    match spec.as_ref().and_then(|s| s.get("f_g_Hz")) {
        Some(&f) => mode.f_g = f,
        None => warnings.push(format!("f_G from {src}")),
    }
    match spec.as_ref().and_then(|s| s.get("delta_f_g_Hz")) {
        Some(&df) => mode.delta_f_g = df,
        None if spec.is_some() && cfg.disc.delta_f_g_Hz.is_none() => {
            let mat = cfg.material()?;
            let rv = default_core_radius(&mat, mode.t);
            mode.delta_f_g = linewidth_analytic(&mat, mode.r, rv, mode.f_g)?;
            warnings.push("delta_f_G from the analytic linewidth".into());
        }
        None => warnings.push(format!("delta_f_G from {src}")),
    }
    if let Some(&chi) = r.results("susceptibility").as_ref().and_then(|s| s.get("chi_x")) {
        mode.chi_x = Some(chi);
    }
    Ok(mode)
}

pub fn susceptibility(r: &mut Runner, ctx: &Ctx) -> Result<bool, CliError> {
    let mut inputs = vec![ctx.sections(&["material", "disc", "resonator", "numerics"])];
    inputs.extend(upstream(r, &["relax", "spectrum"]));
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let mut warnings = Vec::new();
    let mode = resolve_mode(r, &ctx.cfg, &mut warnings);
    let engine = if ctx.quick || r.results("relax").is_none() {
        None
    } else {
        Some(load_relaxed(r, &ctx.cfg))
    };
    r.stage("susceptibility", &refs, |dir| {
        let cfg = &ctx.cfg;
        let mode = mode?;
        let mat = cfg.material()?;
        let mut res = Results::new();
        let mut s = create(dir, "susceptibility.txt")?;
        match engine {
            Some(e) => {
                let mut e = e?;
                let spec = cfg.resonator()?;
                let geom = cfg.geometry()?;
                let (profile, bx) = disc_field_profile(&spec, &geom, e.grid(), cfg.strip())?;
                let k = cfg.numerics.drive_amplitude_T / bx;
                let profile: Vec<_> = profile.iter().map(|b| [b[0] * k, b[1] * k, b[2] * k]).collect();
                let opts = SusceptibilityOptions {
                    max_duration: cfg.numerics.susceptibility_max_s,
                    ..Default::default()
                };
                let rep = resonant_susceptibility(&mut e, &profile, cfg.numerics.drive_amplitude_T, mode.f_g, &opts)?;
                writeln!(s, "chi_x = {:e}", rep.chi_x)?;
                writeln!(s, "delta_Mx_A_per_m = {:e}", rep.delta_mx)?;
                writeln!(s, "drive_s = {:e}", rep.duration)?;
                res.insert("chi_x".into(), rep.chi_x);
                res.insert("measured".into(), 1.0);
            }
            None => {
                let chi = chi_analytic(mat.ms, XI_DISC, mode.delta_f_g);
                writeln!(s, "chi_x = {chi:e} (analytic)")?;
                warnings.push("chi_x from the analytic rigid-vortex form".into());
                res.insert("chi_x".into(), chi);
                res.insert("measured".into(), 0.0);
            }
        }
        Ok(StageOutput { results: res, warnings })
    })
}

fn coupling_setup(cfg: &ExperimentConfig) -> Result<CouplingSetup<f64>, CliError> {
    let spec = cfg.resonator()?;
    Ok(CouplingSetup {
        f_cpw: spec.f_cpw,
        z0: spec.z0,
        kappa: spec.kappa,
        xi: XI_DISC,
        volume: cfg.volume()?,
        strip: cfg.strip(),
    })
}

/// Exact coupling of the configured disc on the configured constriction.
fn disc_coupling(cfg: &ExperimentConfig, mode: &DiscMode<f64>) -> Result<vortex_cavity::coupling::CouplingReport<f64>, CliError> {
    let spec = cfg.resonator()?;
    let geom = cfg.geometry()?;
    let mat = cfg.material()?;
    let b = field_at_disc_center(&spec, &geom, cfg.strip())?.bx();
    let inp = CouplingInputs {
        b_rms_x: b,
        volume: cfg.volume()?.volume(geom.r, geom.t),
        chi_x: mode.chi_x.unwrap_or_else(|| chi_analytic(mat.ms, XI_DISC, mode.delta_f_g)),
        delta_f_g: mode.delta_f_g,
        f_g: mode.f_g,
    };
    Ok(coupling_exact(&inp)?)
}

pub fn couple(r: &mut Runner, ctx: &Ctx) -> Result<bool, CliError> {
    let mut inputs = vec![ctx.sections(&["material", "disc", "resonator", "couple"])];
    inputs.extend(upstream(r, &["spectrum", "susceptibility"]));
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let mut warnings = Vec::new();
    let mode = resolve_mode(r, &ctx.cfg, &mut warnings);
    r.stage("couple", &refs, |dir| {
        let cfg = &ctx.cfg;
        let mode = mode?;
        let mat = cfg.material()?;
        let setup = coupling_setup(cfg)?;
        let discs = match cfg.discs()? {
            DiscSelection::Reference => DiscMode::reference(),
            DiscSelection::Config => vec![mode],
        };
        let map = strong_coupling_map(&discs, &cfg.couple.widths_m, &mat, &setup)?;
        map.write_csv(create(dir, "coupling_map.csv")?)?;
        let rep = disc_coupling(cfg, &mode)?;
        let mut s = create(dir, "couple.txt")?;
        writeln!(s, "r_m = {:e}", mode.r)?;
        writeln!(s, "t_m = {:e}", mode.t)?;
        writeln!(s, "w_m = {:e}", cfg.resonator.width_m)?;
        writeln!(s, "f_G_Hz = {:e}", mode.f_g)?;
        writeln!(s, "delta_f_G_Hz = {:e}", mode.delta_f_g)?;
        writeln!(s, "g_Hz = {:e}", rep.g_hz)?;
        writeln!(s, "strong_ratio = {:.4}", rep.strong_ratio)?;
        writeln!(s, "regime = {}", rep.regime.name())?;
        let mut res = Results::new();
        res.insert("g_Hz".into(), rep.g_hz);
        res.insert("strong_ratio".into(), rep.strong_ratio);
        res.insert("f_g_Hz".into(), mode.f_g);
        res.insert("delta_f_g_Hz".into(), mode.delta_f_g);
        Ok(StageOutput { results: res, warnings })
    })
}

pub fn transmit(r: &mut Runner, ctx: &Ctx) -> Result<bool, CliError> {
    let mut inputs = vec![ctx.sections(&["material", "disc", "resonator", "couple", "transmit"])];
    inputs.extend(upstream(r, &["spectrum", "susceptibility", "sweep-field"]));
    let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
    let mut warnings = Vec::new();
    let mode = resolve_mode(r, &ctx.cfg, &mut warnings);
    let sweep = r.results("sweep-field");
    r.stage("transmit", &refs, |dir| {
        let cfg = &ctx.cfg;
        let mode = mode?;
        let mat = cfg.material()?;
        let spec = cfg.resonator()?;
        let g = match cfg.transmit.g_Hz {
            Some(g) => g,
            None => disc_coupling(cfg, &mode)?.g_hz,
        };
        let tag = if cfg.disc.polarity > 0 { "p_plus" } else { "p_minus" };
        let slope = match (
            cfg.transmit.fg_slope_Hz_per_T,
            sweep.as_ref().and_then(|s| s.get(&format!("slope_{tag}_Hz_per_T"))),
        ) {
            (Some(s), _) => s,
            (None, Some(&s)) => s,
            (None, None) => {
                warnings.push("f_G(B) slope from the thin-disc estimate P·f_G/(mu0 Ms)".into());
                cfg.disc.polarity as f64 * mode.f_g / (PhysicalConstants::<f64>::si().mu0 * mat.ms)
            }
        };
        let sys = TwoModeSystem::new(spec.f_cpw, mode.f_g, g, mode.delta_f_g, spec.kappa)?;
        let line = FgLine {
            slope,
            intercept: mode.f_g,
        };
        let b0 = line.field_for(spec.f_cpw);
        let t = &cfg.transmit;
        let b_axis = linspace(b0 - 0.5 * t.b_span_T, b0 + 0.5 * t.b_span_T, t.b_points);
        let f_axis = linspace(spec.f_cpw - 0.5 * t.f_span_Hz, spec.f_cpw + 0.5 * t.f_span_Hz, t.f_points);
        let map = transmission_map(&sys, &b_axis, &f_axis, line, cfg.coupling_units()?)?;
        map.write_csv(create(dir, "transmission.csv")?)?;
        std::fs::write(dir.join("plot_transmission.py"), TRANSMISSION_PLOT)?;
        let resonant = sys.with_f_g(spec.f_cpw);
        let fine = linspace(spec.f_cpw - 0.5 * t.f_span_Hz, spec.f_cpw + 0.5 * t.f_span_Hz, 20 * t.f_points);
        let tv: Vec<f64> = fine
            .iter()
            .map(|&f| vortex_cavity::cavity::transmission_with(f, &resonant, cfg.coupling_units().unwrap()))
            .collect();
        let peaks = local_maxima(&fine, &tv);
        let mut s = create(dir, "transmit.txt")?;
        writeln!(s, "g_Hz = {g:e}")?;
        writeln!(s, "kappa_Hz = {:e}", spec.kappa)?;
        writeln!(s, "fg_slope_Hz_per_T = {slope:e}")?;
        writeln!(s, "b_resonance_T = {b0:e}")?;
        writeln!(s, "peaks_at_resonance = {}", peaks.len())?;
        for (f, v) in &peaks {
            writeln!(s, "peak_Hz = {f:e} T = {v:.4}")?;
        }
        let mut res = Results::new();
        res.insert("g_Hz".into(), g);
        res.insert("b_resonance_T".into(), b0);
        res.insert("peaks_at_resonance".into(), peaks.len() as f64);
        Ok(StageOutput { results: res, warnings })
    })
}

/// Strong-coupling ratio per material for the r = 400 nm, t = 60 nm disc on
/// a 500 nm constriction, anchored to the CoFe reference mode.
pub fn materials(cfg: &ExperimentConfig, out: &Path) -> Result<String, CliError> {
    let presets: Vec<Preset> = cfg.couple.materials.iter().filter_map(|m| Preset::from_name(m)).collect();
    let (r400, t400, f400, _) = vortex_cavity::coupling::REFERENCE_DISCS[2];
    let geom = DiscGeometry::new(r400, t400)?;
    let setup = coupling_setup(cfg)?;
    let table = material_comparison(&presets, &MaterialParams::cofe(), f400, &geom, 500e-9, &setup)?;
    let mut buf = Vec::new();
    writeln!(
        buf,
        "{:<8} {:>12} {:>12} {:>10} {:>10}",
        "preset", "mu0Ms_T", "Aex_J_per_m", "alpha", "l_ex_m"
    )?;
    let mu0 = PhysicalConstants::<f64>::si().mu0;
    for p in Preset::ALL {
        let m = MaterialParams::<f64>::preset(p);
        writeln!(
            buf,
            "{:<8} {:>12.4} {:>12.3e} {:>10.2e} {:>10.3e}",
            m.name,
            mu0 * m.ms,
            m.aex,
            m.alpha,
            m.exchange_length()
        )?;
    }
    writeln!(buf)?;
    table.write_text(&mut buf)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("materials.txt"), &buf)?;
    Ok(String::from_utf8(buf).expect("ascii table"))
}
