//! Photon/gyration coupling strength, the strong-coupling figure of merit
//! and material comparisons.

use std::io::Write;

use crate::cpw::{field_at_disc_center, fit_uw, StripModel, UwFit};
use crate::error::{Error, Result};
use crate::physics::{DiscGeometry, MaterialParams, PhysicalConstants, Preset, ResonatorSpec};
use crate::scalar::Real;

/// Geometric factor of the disc susceptibility.
pub const XI_DISC: f64 = 2.0 / 3.0;

/// Gyrotropic frequency and linewidth of the reference CoFe discs
/// (r, t, f_G, Δf_G), SI units.
pub const REFERENCE_DISCS: [(f64, f64, f64, f64); 3] = [
    (100e-9, 15e-9, 1.402e9, 3.5e6),
    (200e-9, 30e-9, 1.255e9, 3.3e6),
    (400e-9, 60e-9, 1.093e9, 3.0e6),
];

/// How the mode volume is derived from the disc dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolumeConvention {
    /// V = 2π r² t.
    #[default]
    Doubled,
    /// V = π r² t.
    Geometric,
}

impl VolumeConvention {
    pub fn volume<T: Real>(self, r: T, t: T) -> T {
        let v = T::PI() * r * r * t;
        match self {
            VolumeConvention::Doubled => T::lit(2.0) * v,
            VolumeConvention::Geometric => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingInputs<T> {
    /// b_x at the disc centre, T.
    pub b_rms_x: T,
    /// Mode volume, m³.
    pub volume: T,
    /// (A/m)/T
    pub chi_x: T,
    /// Hz
    pub delta_f_g: T,
    /// Hz
    pub f_g: T,
}

impl<T: Real> CouplingInputs<T> {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b_rms_x", self.b_rms_x),
            ("volume", self.volume),
            ("chi_x", self.chi_x),
            ("delta_f_g", self.delta_f_g),
            ("f_g", self.f_g),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Strong,
    Weak,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Strong => "strong",
            Regime::Weak => "weak",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingReport<T> {
    /// rad/s
    pub g_angular: T,
    /// Hz
    pub g_hz: T,
    /// 4 g_hz / Δf_G
    pub strong_ratio: T,
    pub regime: Regime,
    /// Set when u_w was evaluated outside its fitted radius range.
    pub extrapolated: bool,
}

impl<T: Real> CouplingReport<T> {
    fn new(g_angular: T, delta_f_g: T) -> Self {
        let g_hz = g_angular / T::TAU();
        let strong_ratio = T::lit(4.0) * g_hz / delta_f_g;
        Self {
            g_angular,
            g_hz,
            strong_ratio,
            regime: classify(strong_ratio),
            extrapolated: false,
        }
    }
}

pub fn classify<T: Real>(strong_ratio: T) -> Regime {
    if strong_ratio > T::one() {
        Regime::Strong
    } else {
        Regime::Weak
    }
}

/// g = (b/2)·sqrt(V χ_x (2π Δf_G) / ħ), an angular rate.
pub fn coupling_exact<T: Real>(inp: &CouplingInputs<T>) -> Result<CouplingReport<T>> {
    inp.validate()?;
    let hbar = PhysicalConstants::<T>::si().hbar;
    let g = inp.b_rms_x / T::lit(2.0) * (inp.volume * inp.chi_x * T::TAU() * inp.delta_f_g / hbar).sqrt();
    Ok(CouplingReport::new(g, inp.delta_f_g))
}

/// Relative mismatch between ħ g and V b ΔM_x with ΔM_x = 4 g_hz b / Δf_G.
/// The two agree only when ħ·2πΔf_G = 4 V b², so this is a diagnostic and
/// not an identity of [`coupling_exact`].
pub fn dipole_energy_mismatch<T: Real>(inp: &CouplingInputs<T>, report: &CouplingReport<T>) -> T {
    let hbar = PhysicalConstants::<T>::si().hbar;
    let delta_m = T::lit(4.0) * report.g_hz / inp.delta_f_g * inp.b_rms_x;
    let lhs = hbar * report.g_angular;
    let rhs = inp.volume * inp.b_rms_x * delta_m;
    (lhs - rhs).abs() / lhs
}

/// χ_x = (γ/2π) Ms ξ² / Δf_G.
pub fn chi_analytic<T: Real>(ms: T, xi: T, delta_f_g: T) -> T {
    PhysicalConstants::<T>::si().gamma_over_2pi * ms * xi * xi / delta_f_g
}

/// Closed-form coupling g = (ξ/4)·sqrt(π μ0 ω_G³ / Z0)·r^{3/2}·u_w, ω_G = 2π f_G,
/// for a given u_w value (1/m).
pub fn coupling_approx<T: Real>(xi: T, f_g: T, z0: T, r: T, uw: T, delta_f_g: T) -> Result<CouplingReport<T>> {
    for (name, v) in [("xi", xi), ("f_g", f_g), ("z0", z0), ("r", r), ("uw", uw), ("delta_f_g", delta_f_g)] {
        if !(v > T::zero()) {
            return Err(Error::param(name, "must be positive"));
        }
    }
    let mu0 = PhysicalConstants::<T>::si().mu0;
    let w = T::TAU() * f_g;
    let g = xi / T::lit(4.0) * (T::PI() * mu0 * w * w * w / z0).sqrt() * r * r.sqrt() * uw;
    Ok(CouplingReport::new(g, delta_f_g))
}

/// [`coupling_approx`] with u_w taken from a fit; flags extrapolation.
pub fn coupling_approx_fit<T: Real>(xi: T, f_g: T, z0: T, r: T, fit: &UwFit<T>, delta_f_g: T) -> Result<CouplingReport<T>> {
    let mut rep = coupling_approx(xi, f_g, z0, r, fit.eval(r), delta_f_g)?;
    rep.extrapolated = r < fit.fit_range.0 || r > fit.fit_range.1;
    Ok(rep)
}

/// Characteristic vortex radius (l_ex² t)^{1/3}.
pub fn default_core_radius<T: Real>(material: &MaterialParams<T>, t: T) -> T {
    let lex = material.exchange_length();
    (lex * lex * t).cbrt()
}

/// φ = 1 + ½ ln(r / r_v).
pub fn geometric_factor<T: Real>(r: T, r_v: T) -> Result<T> {
    if !(r_v > T::zero()) || !(r > r_v) {
        return Err(Error::Domain(format!("need r > r_v > 0, got r = {r}, r_v = {r_v}")));
    }
    Ok(T::one() + T::lit(0.5) * (r / r_v).ln())
}

/// Δf_G = 2 α φ f_G.
pub fn linewidth_analytic<T: Real>(material: &MaterialParams<T>, r: T, r_v: T, f_g: T) -> Result<T> {
    let phi = geometric_factor(r, r_v)?;
    Ok(T::lit(2.0) * material.alpha * phi * f_g)
}

/// One disc of a coupling map: dimensions plus its gyrotropic mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscMode<T> {
    pub r: T,
    pub t: T,
    pub f_g: T,
    pub delta_f_g: T,
    /// Measured susceptibility; the analytic form is used when absent.
    pub chi_x: Option<T>,
}

impl<T: Real> DiscMode<T> {
    pub fn reference() -> Vec<Self> {
        REFERENCE_DISCS
            .iter()
            .map(|&(r, t, f, df)| Self {
                r: T::lit(r),
                t: T::lit(t),
                f_g: T::lit(f),
                delta_f_g: T::lit(df),
                chi_x: None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapEntry<T> {
    pub r: T,
    pub t: T,
    pub w: T,
    pub b_rms_x: T,
    pub delta_f_g: T,
    pub report: CouplingReport<T>,
}

/// strong_ratio for every (disc, w), rows in disc order, columns in w order.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap<T> {
    pub widths: Vec<T>,
    pub rows: Vec<Vec<MapEntry<T>>>,
}

impl<T: Real> CouplingMap<T> {
    pub fn ratios(&self, disc: usize) -> Vec<T> {
        self.rows[disc].iter().map(|e| e.report.strong_ratio).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r_m,t_m,w_m,b_rms_x_T,g_hz,delta_f_hz,strong_ratio,regime")?;
        for row in &self.rows {
            for e in row {
                writeln!(
                    out,
                    "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                    e.r.f64(),
                    e.t.f64(),
                    e.w.f64(),
                    e.b_rms_x.f64(),
                    e.report.g_hz.f64(),
                    e.delta_f_g.f64(),
                    e.report.strong_ratio.f64(),
                    e.report.regime.name()
                )?;
            }
        }
        Ok(())
    }
}

/// Shared settings for coupling evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSetup<T> {
    pub f_cpw: T,
    pub z0: T,
    pub kappa: T,
    pub xi: T,
    pub volume: VolumeConvention,
    pub strip: StripModel,
}

impl<T: Real> Default for CouplingSetup<T> {
    fn default() -> Self {
        Self {
            f_cpw: T::lit(1e9),
            z0: T::lit(50.0),
            kappa: T::lit(0.1e6),
            xi: T::lit(XI_DISC),
            volume: VolumeConvention::Doubled,
            strip: StripModel::default(),
        }
    }
}

/// Exact coupling for every disc on every constriction width.
pub fn strong_coupling_map<T: Real>(
    discs: &[DiscMode<T>],
    widths: &[T],
    material: &MaterialParams<T>,
    setup: &CouplingSetup<T>,
) -> Result<CouplingMap<T>> {
    let mut rows = Vec::with_capacity(discs.len());
    for d in discs {
        let geom = DiscGeometry::new(d.r, d.t)?;
        let chi = d.chi_x.unwrap_or_else(|| chi_analytic(material.ms, setup.xi, d.delta_f_g));
        let mut row = Vec::with_capacity(widths.len());
        for &w in widths {
            let spec = ResonatorSpec::new(setup.f_cpw, setup.z0, setup.kappa, w)?;
            let b = field_at_disc_center(&spec, &geom, setup.strip)?.bx();
            let inp = CouplingInputs {
                b_rms_x: b,
                volume: setup.volume.volume(d.r, d.t),
                chi_x: chi,
                delta_f_g: d.delta_f_g,
                f_g: d.f_g,
            };
            row.push(MapEntry {
                r: d.r,
                t: d.t,
                w,
                b_rms_x: b,
                delta_f_g: d.delta_f_g,
                report: coupling_exact(&inp)?,
            });
        }
        rows.push(row);
    }
    Ok(CouplingMap {
        widths: widths.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialRow<T> {
    pub name: String,
    pub ms: T,
    pub alpha: T,
    pub f_g: T,
    pub phi: T,
    pub delta_f_g: T,
    pub g_hz: T,
    pub strong_ratio: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable<T> {
    pub r: T,
    pub t: T,
    pub w: T,
    pub uw: T,
    pub rows: Vec<MaterialRow<T>>,
}

impl<T: Real> MaterialTable<T> {
    pub fn ratio(&self, name: &str) -> Option<T> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.strong_ratio)
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# r = {:e} m, t = {:e} m, w = {:e} m, u_w = {:e} 1/m",
            self.r.f64(),
            self.t.f64(),
            self.w.f64(),
            self.uw.f64()
        )?;
        writeln!(
            out,
            "{:<8} {:>12} {:>10} {:>12} {:>7} {:>12} {:>12} {:>8}",
            "material", "mu0Ms_T", "alpha", "f_G_Hz", "phi", "delta_f_Hz", "g_Hz", "ratio"
        )?;
        let mu0 = PhysicalConstants::<T>::si().mu0;
        for r in &self.rows {
            writeln!(
                out,
                "{:<8} {:>12.4} {:>10.2e} {:>12.4e} {:>7.3} {:>12.4e} {:>12.4e} {:>8.3}",
                r.name,
                (mu0 * r.ms).f64(),
                r.alpha.f64(),
                r.f_g.f64(),
                r.phi.f64(),
                r.delta_f_g.f64(),
                r.g_hz.f64(),
                r.strong_ratio.f64()
            )?;
        }
        Ok(())
    }
}

/// Radii used for the u_w fit around a reference disc radius.
pub fn uw_fit_radii<T: Real>(r: T) -> Vec<T> {
    [0.4, 0.55, 0.7, 0.85, 1.0, 1.2, 1.4, 1.6].iter().map(|&k| r * T::lit(k)).collect()
}

/// Strong-coupling ratio per material for one disc and constriction, using
/// the closed-form coupling and the analytic linewidth. The gyrotropic
/// frequency of each material scales with Ms from `f_g_ref`, the value for
/// `reference` on the same disc.
pub fn material_comparison<T: Real>(
    presets: &[Preset],
    reference: &MaterialParams<T>,
    f_g_ref: T,
    geom: &DiscGeometry<T>,
    w: T,
    setup: &CouplingSetup<T>,
) -> Result<MaterialTable<T>> {
    let spec = ResonatorSpec::new(setup.f_cpw, setup.z0, setup.kappa, w)?;
    let fit = fit_uw(&spec, &uw_fit_radii(geom.r), setup.strip)?;
    let uw = fit.eval(geom.r);
    let mut rows = Vec::with_capacity(presets.len());
    for &p in presets {
        let m = MaterialParams::<T>::preset(p);
        let f_g = f_g_ref * m.ms / reference.ms;
        let r_v = default_core_radius(&m, geom.t);
        let phi = geometric_factor(geom.r, r_v)?;
        let df = linewidth_analytic(&m, geom.r, r_v, f_g)?;
        let rep = coupling_approx_fit(setup.xi, f_g, setup.z0, geom.r, &fit, df)?;
        rows.push(MaterialRow {
            name: m.name.clone(),
            ms: m.ms,
            alpha: m.alpha,
            f_g,
            phi,
            delta_f_g: df,
            g_hz: rep.g_hz,
            strong_ratio: rep.strong_ratio,
        });
    }
    Ok(MaterialTable {
        r: geom.r,
        t: geom.t,
        w,
        uw,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> CouplingInputs<f64> {
        CouplingInputs {
            b_rms_x: 3e-9,
            volume: 2.0 * std::f64::consts::PI * 400e-9f64.powi(2) * 60e-9,
            chi_x: chi_analytic(1.9e6, XI_DISC, 3.0e6),
            delta_f_g: 3.0e6,
            f_g: 1.093e9,
        }
    }

    #[test]
    fn exact_scaling() {
        let base = coupling_exact(&inputs()).unwrap();
        let mut i = inputs();
        i.b_rms_x *= 2.0;
        assert!((coupling_exact(&i).unwrap().g_hz / base.g_hz - 2.0).abs() < 1e-12);
        let mut i = inputs();
        i.volume *= 4.0;
        assert!((coupling_exact(&i).unwrap().g_hz / base.g_hz - 2.0).abs() < 1e-12);
        assert!((base.g_angular / base.g_hz - std::f64::consts::TAU).abs() < 1e-12);
        assert_eq!(base.regime, classify(base.strong_ratio));
    }

    #[test]
    fn exact_formula_inverts_to_susceptibility() {
        // (2 g / b)² ħ / (V 2πΔf) recovers χ
        let i = inputs();
        let g = coupling_exact(&i).unwrap().g_angular;
        let hbar = PhysicalConstants::<f64>::si().hbar;
        let chi = (2.0 * g / i.b_rms_x).powi(2) * hbar / (i.volume * std::f64::consts::TAU * i.delta_f_g);
        assert!((chi / i.chi_x - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dipole_mismatch_vanishes_on_its_manifold() {
        let mut i = inputs();
        let hbar = PhysicalConstants::<f64>::si().hbar;
        i.delta_f_g = 4.0 * i.volume * i.b_rms_x.powi(2) / (hbar * std::f64::consts::TAU);
        let rep = coupling_exact(&i).unwrap();
        assert!(dipole_energy_mismatch(&i, &rep) < 1e-10);
        let rep = coupling_exact(&inputs()).unwrap();
        assert!(dipole_energy_mismatch(&inputs(), &rep) > 1e-3);
    }

    #[test]
    fn approx_algebra() {
        let r = 300e-9;
        let a = coupling_approx(XI_DISC, 1e9, 50.0, r, 1.0 / r, 3e6).unwrap();
        let b = coupling_approx(XI_DISC, 1e9, 50.0, 4.0 * r, 1.0 / (4.0 * r), 3e6).unwrap();
        assert!((b.g_hz / a.g_hz - 2.0).abs() < 1e-12);
        let c = coupling_approx(XI_DISC, 4e9, 50.0, r, 1.0 / r, 3e6).unwrap();
        assert!((c.g_hz / a.g_hz - 8.0).abs() < 1e-12);
        let mu0 = PhysicalConstants::<f64>::si().mu0;
        let closed = XI_DISC / 4.0 * (std::f64::consts::PI * mu0 * (std::f64::consts::TAU * 1e9f64).powi(3) / 50.0).sqrt() * r.sqrt();
        assert!((a.g_angular / closed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regime_is_scale_invariant() {
        for (g, df) in [(1e6, 3e6), (1e6, 5e6), (2e6, 7.9e6)] {
            let a = CouplingReport::new(g, df);
            let b = CouplingReport::new(g * 17.0, df * 17.0);
            assert_eq!(a.regime, b.regime);
        }
    }

    #[test]
    fn linewidth_identities() {
        let m = MaterialParams::<f64>::cofe();
        let rv = 10e-9;
        let r = rv * std::f64::consts::E.powi(2);
        assert!((geometric_factor(r, rv).unwrap() - 2.0).abs() < 1e-14);
        let a = linewidth_analytic(&m, 200e-9, rv, 1.255e9).unwrap();
        let mut m2 = m.clone();
        m2.alpha *= 2.0;
        let b = linewidth_analytic(&m2, 200e-9, rv, 1.255e9).unwrap();
        assert!((b / a - 2.0).abs() < 1e-14);
        assert!(linewidth_analytic(&m, 5e-9, rv, 1e9).is_err());
    }

    #[test]
    fn reference_discs_have_phi_between_two_and_three() {
        let m = MaterialParams::<f64>::cofe();
        for (r, t, f, df) in REFERENCE_DISCS {
            let rv = default_core_radius(&m, t);
            let phi = geometric_factor(r, rv).unwrap();
            assert!(phi > 2.0 && phi < 3.0, "{r}: {phi}");
            let lw = linewidth_analytic(&m, r, rv, f).unwrap();
            assert!(lw / df > 0.5 && lw / df < 2.0);
        }
    }
}
