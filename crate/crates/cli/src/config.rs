//! Experiment configuration: sectioned key/value TOML with SI units in the
//! key names. Unknown keys are rejected.
#![allow(non_snake_case)]

use std::path::Path;

use serde::{Deserialize, Serialize};
use vortex_cavity::coupling::{DiscMode, VolumeConvention, REFERENCE_DISCS};
use vortex_cavity::cpw::StripModel;
use vortex_cavity::micromag::{build_disc_grid, MagGrid};
use vortex_cavity::physics::{frequency_from_thickness, DiscGeometry, MaterialParams, Preset, ResonatorSpec};
use vortex_cavity::{Disc, Error, Material, Resonator};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub material: MaterialSection,
    pub disc: DiscSection,
    pub resonator: ResonatorSection,
    pub numerics: NumericsSection,
    pub sweep: SweepSection,
    pub couple: CoupleSection,
    pub transmit: TransmitSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    pub preset: String,
    pub ms_A_per_m: Option<f64>,
    pub aex_J_per_m: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscSection {
    pub radius_m: f64,
    pub thickness_m: f64,
    pub standoff_m: f64,
    pub circulation: i8,
    pub polarity: i8,
    /// Explicit partition; the default partition is used when absent.
    pub cells_x: Option<usize>,
    pub cells_y: Option<usize>,
    pub cells_z: Option<usize>,
    /// Known gyrotropic mode; measured or estimated when absent.
    pub f_g_Hz: Option<f64>,
    pub delta_f_g_Hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonatorSection {
    pub f_cpw_Hz: f64,
    pub z0_ohm: f64,
    pub quality_factor: f64,
    pub width_m: f64,
    pub film_thickness_m: f64,
    pub london_depth_m: f64,
    pub strip_cells: usize,
    pub strip_layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSection {
    pub dt_s: f64,
    pub relax_alpha: f64,
    pub relax_torque_tol: f64,
    pub relax_max_steps: u64,
    pub sinc_amplitude_T: f64,
    pub sinc_cutoff_Hz: f64,
    pub sample_dt_s: f64,
    pub spectrum_duration_s: f64,
    /// Trace length used with --quick.
    pub quick_duration_s: f64,
    pub drive_amplitude_T: f64,
    pub susceptibility_max_s: f64,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub b_min_T: f64,
    pub b_max_T: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupleSection {
    pub widths_m: Vec<f64>,
    /// "reference" for the three tabulated CoFe discs, "config" for [disc].
    pub discs: String,
    /// "doubled" (2πr²t) or "geometric" (πr²t).
    pub volume: String,
    pub materials: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmitSection {
    pub f_span_Hz: f64,
    pub f_points: usize,
    pub b_span_T: f64,
    pub b_points: usize,
    pub fg_slope_Hz_per_T: Option<f64>,
    pub g_Hz: Option<f64>,
    /// "hz" or "printed-angular".
    pub coupling_units: String,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            preset: "CoFe".into(),
            ms_A_per_m: None,
            aex_J_per_m: None,
            alpha: None,
        }
    }
}

impl Default for DiscSection {
    fn default() -> Self {
        Self {
            radius_m: 200e-9,
            thickness_m: 30e-9,
            standoff_m: 10e-9,
            circulation: 1,
            polarity: 1,
            cells_x: None,
            cells_y: None,
            cells_z: None,
            f_g_Hz: None,
            delta_f_g_Hz: None,
        }
    }
}

impl Default for ResonatorSection {
    fn default() -> Self {
        Self {
            f_cpw_Hz: 1e9,
            z0_ohm: 50.0,
            quality_factor: 1e4,
            width_m: 500e-9,
            film_thickness_m: 150e-9,
            london_depth_m: 90e-9,
            strip_cells: 400,
            strip_layers: 8,
        }
    }
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            dt_s: 0.25e-12,
            relax_alpha: 0.5,
            relax_torque_tol: 1e-4,
            relax_max_steps: 400_000,
            sinc_amplitude_T: 10e-3,
            sinc_cutoff_Hz: 50e9,
            sample_dt_s: 5e-12,
            spectrum_duration_s: 3e-6,
            quick_duration_s: 200e-9,
            drive_amplitude_T: 0.1e-3,
            susceptibility_max_s: 5e-6,
            n_max: 6,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            b_min_T: -50e-3,
            b_max_T: 50e-3,
            points: 5,
        }
    }
}

impl Default for CoupleSection {
    fn default() -> Self {
        Self {
            widths_m: vec![0.1e-6, 0.2e-6, 0.5e-6, 1e-6, 2e-6, 5e-6],
            discs: "reference".into(),
            volume: "doubled".into(),
            materials: ["CoFe", "Fe", "Py", "NiMnSb", "YIG"].iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl Default for TransmitSection {
    fn default() -> Self {
        Self {
            f_span_Hz: 20e6,
            f_points: 401,
            b_span_T: 20e-3,
            b_points: 81,
            fg_slope_Hz_per_T: None,
            g_Hz: None,
            coupling_units: "hz".into(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses `section.key=value`; the value is read as a TOML value and falls
/// back to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("override `{spec}` is not key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| invalid(format!("override key `{path}` must be section.key")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let sec = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| invalid(format!("`{section}` is not a section")))?;
    sec.insert(key.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Checks every section by building the core types it describes.
    pub fn validate(&self) -> Result<(), CliError> {
        self.material()?;
        self.geometry()?;
        self.resonator()?;
        self.grid()?;
        if ![-1, 1].contains(&self.disc.circulation) || ![-1, 1].contains(&self.disc.polarity) {
            return Err(invalid("disc.circulation and disc.polarity must be +1 or -1"));
        }
        let n = &self.numerics;
        for (k, v) in [
            ("numerics.dt_s", n.dt_s),
            ("numerics.relax_alpha", n.relax_alpha),
            ("numerics.relax_torque_tol", n.relax_torque_tol),
            ("numerics.sinc_amplitude_T", n.sinc_amplitude_T),
            ("numerics.sinc_cutoff_Hz", n.sinc_cutoff_Hz),
            ("numerics.sample_dt_s", n.sample_dt_s),
            ("numerics.spectrum_duration_s", n.spectrum_duration_s),
            ("numerics.quick_duration_s", n.quick_duration_s),
            ("numerics.drive_amplitude_T", n.drive_amplitude_T),
            ("numerics.susceptibility_max_s", n.susceptibility_max_s),
            ("transmit.f_span_Hz", self.transmit.f_span_Hz),
            ("transmit.b_span_T", self.transmit.b_span_T),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{k} must be positive")));
            }
        }
        if n.n_max < 4 {
            return Err(invalid("numerics.n_max must be at least 4"));
        }
        if self.sweep.points < 2 || !(self.sweep.b_max_T > self.sweep.b_min_T) {
            return Err(invalid("sweep needs at least two points and b_max_T > b_min_T"));
        }
        if self.couple.widths_m.is_empty() || self.couple.widths_m.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("couple.widths_m must be a non-empty list of positive widths"));
        }
        self.volume()?;
        self.discs()?;
        for m in &self.couple.materials {
            Preset::from_name(m).ok_or_else(|| invalid(format!("unknown material `{m}`")))?;
        }
        if self.transmit.f_points < 3 || self.transmit.b_points < 1 {
            return Err(invalid("transmit needs f_points >= 3 and b_points >= 1"));
        }
        self.coupling_units()?;
        if let Some(g) = self.transmit.g_Hz {
            if !(g >= 0.0) {
                return Err(invalid("transmit.g_Hz must be non-negative"));
            }
        }
        if let Some(s) = self.transmit.fg_slope_Hz_per_T {
            if s == 0.0 || !s.is_finite() {
                return Err(invalid("transmit.fg_slope_Hz_per_T must be non-zero"));
            }
        }
        Ok(())
    }

    pub fn material(&self) -> Result<Material, CliError> {
        let p = Preset::from_name(&self.material.preset)
            .ok_or_else(|| invalid(format!("unknown material preset `{}`", self.material.preset)))?;
        let base = MaterialParams::<f64>::preset(p);
        let m = MaterialParams::new(
            base.name.clone(),
            self.material.ms_A_per_m.unwrap_or(base.ms),
            self.material.aex_J_per_m.unwrap_or(base.aex),
            self.material.alpha.unwrap_or(base.alpha),
        )?;
        Ok(m)
    }

    pub fn geometry(&self) -> Result<Disc, CliError> {
        Ok(DiscGeometry::with_standoff(
            self.disc.radius_m,
            self.disc.thickness_m,
            self.disc.standoff_m,
        )?)
    }

    pub fn resonator_with_width(&self, w: f64) -> Result<Resonator, CliError> {
        let r = &self.resonator;
        if !(r.quality_factor > 0.0) {
            return Err(invalid("resonator.quality_factor must be positive"));
        }
        Ok(ResonatorSpec::with_film(
            r.f_cpw_Hz,
            r.z0_ohm,
            r.f_cpw_Hz / r.quality_factor,
            w,
            r.film_thickness_m,
            r.london_depth_m,
        )?)
    }

    pub fn resonator(&self) -> Result<Resonator, CliError> {
        self.resonator_with_width(self.resonator.width_m)
    }

    pub fn strip(&self) -> StripModel {
        StripModel {
            cells: self.resonator.strip_cells,
            layers: self.resonator.strip_layers,
        }
    }

    pub fn grid(&self) -> Result<MagGrid<f64>, CliError> {
        let geom = self.geometry()?;
        let mat = self.material()?;
        let d = &self.disc;
        let g = match (d.cells_x, d.cells_y, d.cells_z) {
            (None, None, None) => build_disc_grid(&geom, &mat)?,
            (Some(x), Some(y), Some(z)) => MagGrid::disc(&geom, x, y, z, &mat)?,
            _ => return Err(invalid("set all of disc.cells_x, cells_y, cells_z or none")),
        };
        Ok(g)
    }

    pub fn volume(&self) -> Result<VolumeConvention, CliError> {
        match self.couple.volume.as_str() {
            "doubled" => Ok(VolumeConvention::Doubled),
            "geometric" => Ok(VolumeConvention::Geometric),
            v => Err(invalid(format!("couple.volume `{v}` is not doubled|geometric"))),
        }
    }

    pub fn coupling_units(&self) -> Result<vortex_cavity::cavity::CouplingUnits, CliError> {
        use vortex_cavity::cavity::CouplingUnits;
        match self.transmit.coupling_units.as_str() {
            "hz" => Ok(CouplingUnits::Hz),
            "printed-angular" => Ok(CouplingUnits::PrintedAngular),
            v => Err(invalid(format!("transmit.coupling_units `{v}` is not hz|printed-angular"))),
        }
    }

    /// Disc list for coupling maps.
    pub fn discs(&self) -> Result<DiscSelection, CliError> {
        match self.couple.discs.as_str() {
            "reference" => Ok(DiscSelection::Reference),
            "config" => Ok(DiscSelection::Config),
            v => Err(invalid(format!("couple.discs `{v}` is not reference|config"))),
        }
    }

    /// Tabulated mode of the configured disc, if it is one of the reference discs.
    pub fn reference_mode(&self) -> Option<(f64, f64)> {
        REFERENCE_DISCS
            .iter()
            .find(|(r, t, _, _)| (r - self.disc.radius_m).abs() < 1e-12 && (t - self.disc.thickness_m).abs() < 1e-12)
            .map(|&(_, _, f, df)| (f, df))
    }

    /// Gyrotropic mode of [disc] without running the micromagnetic solver:
    /// explicit values, then the reference table, then the thin-disc
    /// estimate. The string describes the source.
    pub fn analytic_mode(&self) -> Result<(DiscMode<f64>, &'static str), CliError> {
        let d = &self.disc;
        let mat = self.material()?;
        let (f, df, src) = match (d.f_g_Hz, d.delta_f_g_Hz, self.reference_mode()) {
            (Some(f), Some(df), _) => (f, df, "config"),
            (None, None, Some((f, df))) => (f, df, "reference table"),
            (f, df, _) => {
                let f = match f {
                    Some(f) => f,
                    None => frequency_from_thickness(d.radius_m, d.thickness_m, mat.ms)?,
                };
                let df = match df {
                    Some(df) => df,
                    None => {
                        let rv = vortex_cavity::coupling::default_core_radius(&mat, d.thickness_m);
                        vortex_cavity::coupling::linewidth_analytic(&mat, d.radius_m, rv, f)?
                    }
                };
                (f, df, "analytic estimate")
            }
        };
        Ok((
            DiscMode {
                r: d.radius_m,
                t: d.thickness_m,
                f_g: f,
                delta_f_g: df,
                chi_x: None,
            },
            src,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscSelection {
    Reference,
    Config,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = ExperimentConfig::parse("", &[]).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn overrides_apply_with_types() {
        let cfg = ExperimentConfig::parse(
            "[disc]\nradius_m = 1e-7\nthickness_m = 1.5e-8\n",
            &[
                "material.preset=Py".into(),
                "disc.cells_x=32".into(),
                "disc.cells_y=32".into(),
                "disc.cells_z=4".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.material.preset, "Py");
        assert_eq!(cfg.disc.cells_x, Some(32));
        assert_eq!(cfg.disc.radius_m, 1e-7);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(
            ExperimentConfig::parse("[disc]\nradius = 1e-7\n", &[]),
            Err(CliError::Config(_))
        ));
        assert!(matches!(ExperimentConfig::parse("[dsic]\n", &[]), Err(CliError::Config(_))));
        let e = ExperimentConfig::parse("[disc]\nradius_m = 1e-7\nthickness_m = 2e-7\n", &[]).unwrap_err();
        assert!(e.is_validation());
        assert!(ExperimentConfig::parse("", &["couple.volume=cubic".into()]).is_err());
        assert!(ExperimentConfig::parse("", &["noequals".into()]).is_err());
    }

    #[test]
    fn analytic_mode_sources() {
        let cfg = ExperimentConfig::parse("", &[]).unwrap();
        let (m, src) = cfg.analytic_mode().unwrap();
        assert_eq!(src, "reference table");
        assert_eq!(m.f_g, 1.255e9);
        let cfg = ExperimentConfig::parse("", &["disc.radius_m=3e-7".into(), "disc.thickness_m=4e-8".into()]).unwrap();
        assert_eq!(cfg.analytic_mode().unwrap().1, "analytic estimate");
    }
}
