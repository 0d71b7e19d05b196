//! Physical constants, material/geometry/resonator parameters and the
//! lumped-circuit relations of a half-wavelength CPW resonator.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    /// Reduced Planck constant, J·s.
    pub hbar: T,
    /// Vacuum permeability, T·m/A.
    pub mu0: T,
    /// Electron gyromagnetic ratio over 2π, Hz/T.
    pub gamma_over_2pi: T,
}

impl<T: Real> PhysicalConstants<T> {
    pub fn si() -> Self {
        Self {
            hbar: T::lit(1.054_571_817e-34),
            mu0: T::lit(4.0e-7 * std::f64::consts::PI),
            gamma_over_2pi: T::lit(28.0e9),
        }
    }

    /// Gyromagnetic ratio in rad/(s·T).
    pub fn gamma(&self) -> T {
        T::TAU() * self.gamma_over_2pi
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::si()
    }
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

/// Saturation magnetization, exchange stiffness and Gilbert damping of a
/// ferromagnet.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams<T> {
    pub name: String,
    /// A/m
    pub ms: T,
    /// J/m
    pub aex: T,
    pub alpha: T,
}

impl<T: Real> MaterialParams<T> {
    pub fn new(name: impl Into<String>, ms: T, aex: T, alpha: T) -> Result<Self> {
        positive("ms", ms)?;
        positive("aex", aex)?;
        positive("alpha", alpha)?;
        if alpha >= T::one() {
            return Err(Error::param("alpha", format!("must be below 1, got {alpha}")));
        }
        Ok(Self {
            name: name.into(),
            ms,
            aex,
            alpha,
        })
    }

    /// Exchange length sqrt(2 A / (μ0 Ms²)).
    pub fn exchange_length(&self) -> T {
        let mu0 = PhysicalConstants::<T>::si().mu0;
        (T::lit(2.0) * self.aex / (mu0 * self.ms * self.ms)).sqrt()
    }

    /// Co25Fe75, the default material.
    pub fn cofe() -> Self {
        Self::preset(Preset::CoFe)
    }

    pub fn preset(p: Preset) -> Self {
        let (ms, aex, alpha) = p.values();
        Self {
            name: p.name().to_string(),
            ms: T::lit(ms),
            aex: T::lit(aex),
            alpha: T::lit(alpha),
        }
    }
}

/// Built-in material presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    CoFe,
    Fe,
    Py,
    Yig,
    NiMnSb,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::CoFe, Preset::Fe, Preset::Py, Preset::Yig, Preset::NiMnSb];

    pub fn name(self) -> &'static str {
        match self {
            Preset::CoFe => "CoFe",
            Preset::Fe => "Fe",
            Preset::Py => "Py",
            Preset::Yig => "YIG",
            Preset::NiMnSb => "NiMnSb",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s))
    }

    /// (Ms [A/m], Aex [J/m], alpha).
    fn values(self) -> (f64, f64, f64) {
        let mu0 = 4.0e-7 * std::f64::consts::PI;
        match self {
            Preset::CoFe => (1.9e6, 2.6e-11, 5e-4),
            // Exchange stiffnesses below are room-temperature literature
            // values; only Ms and alpha matter for the coupling estimates.
            Preset::Fe => (2.2 / mu0, 2.1e-11, 2e-3),
            Preset::Py => (1.0 / mu0, 1.3e-11, 8e-3),
            Preset::Yig => (0.18 / mu0, 3.7e-12, 5e-5),
            Preset::NiMnSb => (0.85 / mu0, 1.0e-11, 1e-3),
        }
    }
}

/// Nanodisc dimensions and its placement above the CPW conductor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscGeometry<T> {
    /// Radius, m.
    pub r: T,
    /// Thickness, m.
    pub t: T,
    /// Gap between the disc's lower rim and the conductor top surface, m.
    pub standoff: T,
    /// Disc centre r_c in the CPW frame (x across the strip, y up), m.
    pub center: [T; 3],
}

impl<T: Real> DiscGeometry<T> {
    pub const DEFAULT_STANDOFF_M: f64 = 10e-9;

    pub fn new(r: T, t: T) -> Result<Self> {
        Self::with_standoff(r, t, T::lit(Self::DEFAULT_STANDOFF_M))
    }

    pub fn with_standoff(r: T, t: T, standoff: T) -> Result<Self> {
        positive("r", r)?;
        positive("t", t)?;
        if standoff < T::zero() || !standoff.is_finite() {
            return Err(Error::param("standoff", "must be non-negative"));
        }
        if t / r >= T::one() {
            return Err(Error::param("t", format!("aspect ratio t/r = {} must be below 1", t / r)));
        }
        Ok(Self {
            r,
            t,
            standoff,
            center: [T::zero(), standoff + r, T::zero()],
        })
    }

    /// Geometric volume π r² t.
    pub fn geometric_volume(&self) -> T {
        T::PI() * self.r * self.r * self.t
    }
}

/// CPW resonator and constriction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorSpec<T> {
    /// Hz
    pub f_cpw: T,
    /// Ω
    pub z0: T,
    /// Cavity leakage (full linewidth), Hz.
    pub kappa: T,
    /// Central conductor / constriction width, m.
    pub w: T,
    /// m
    pub film_thickness: T,
    /// London penetration depth, m.
    pub lambda_l: T,
}

impl<T: Real> ResonatorSpec<T> {
    pub const DEFAULT_FILM_THICKNESS_M: f64 = 150e-9;
    pub const DEFAULT_LAMBDA_L_M: f64 = 90e-9;

    /// Nb film with the default thickness and penetration depth.
    pub fn new(f_cpw: T, z0: T, kappa: T, w: T) -> Result<Self> {
        Self::with_film(
            f_cpw,
            z0,
            kappa,
            w,
            T::lit(Self::DEFAULT_FILM_THICKNESS_M),
            T::lit(Self::DEFAULT_LAMBDA_L_M),
        )
    }

    pub fn with_film(f_cpw: T, z0: T, kappa: T, w: T, film_thickness: T, lambda_l: T) -> Result<Self> {
        positive("f_cpw", f_cpw)?;
        positive("z0", z0)?;
        positive("kappa", kappa)?;
        positive("w", w)?;
        positive("film_thickness", film_thickness)?;
        positive("lambda_l", lambda_l)?;
        Ok(Self {
            f_cpw,
            z0,
            kappa,
            w,
            film_thickness,
            lambda_l,
        })
    }

    /// κ = f_cpw / Q.
    pub fn from_quality_factor(f_cpw: T, z0: T, q: T, w: T) -> Result<Self> {
        positive("quality_factor", q)?;
        Self::new(f_cpw, z0, f_cpw / q, w)
    }

    /// Pearl length λ_L² / d.
    pub fn pearl_length(&self) -> T {
        self.lambda_l * self.lambda_l / self.film_thickness
    }

    pub fn i_rms(&self) -> T {
        i_rms(self.f_cpw, self.z0).expect("validated at construction")
    }
}

/// Zero-point rms current 2π f sqrt(ħπ / (2 Z0)) of a half-wave resonator.
pub fn i_rms<T: Real>(f_cpw: T, z0: T) -> Result<T> {
    if !(f_cpw >= T::zero()) || !f_cpw.is_finite() {
        return Err(Error::Domain(format!("f_cpw must be >= 0, got {f_cpw}")));
    }
    if !(z0 > T::zero()) {
        return Err(Error::Domain(format!("Z0 must be > 0, got {z0}")));
    }
    let hbar = PhysicalConstants::<T>::si().hbar;
    Ok(T::TAU() * f_cpw * (hbar * T::PI() / (T::lit(2.0) * z0)).sqrt())
}

/// Resonator inductance L = Z0 / (π² f).
pub fn resonator_inductance<T: Real>(f_cpw: T, z0: T) -> Result<T> {
    if !(f_cpw > T::zero()) {
        return Err(Error::Domain(format!("f_cpw must be > 0, got {f_cpw}")));
    }
    if !(z0 > T::zero()) {
        return Err(Error::Domain(format!("Z0 must be > 0, got {z0}")));
    }
    Ok(z0 / (T::PI() * T::PI() * f_cpw))
}

/// Small-aspect-ratio thickness estimate for a target gyrotropic frequency:
/// t = (9/10) r (2π f_G) / ((γ/2π) μ0 Ms).
pub fn thickness_from_frequency<T: Real>(r: T, f_g: T, ms: T) -> Result<T> {
    positive("r", r)?;
    positive("f_g", f_g)?;
    positive("ms", ms)?;
    let c = PhysicalConstants::<T>::si();
    Ok(T::lit(0.9) * r * T::TAU() * f_g / (c.gamma_over_2pi * c.mu0 * ms))
}

/// Inverse of [`thickness_from_frequency`].
pub fn frequency_from_thickness<T: Real>(r: T, t: T, ms: T) -> Result<T> {
    positive("r", r)?;
    positive("t", t)?;
    positive("ms", ms)?;
    let c = PhysicalConstants::<T>::si();
    Ok(T::lit(10.0 / 9.0) * t * c.gamma_over_2pi * c.mu0 * ms / (T::TAU() * r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn irms_at_one_ghz() {
        let i = i_rms(1e9, 50.0).unwrap();
        assert_relative_eq!(i, 11.437e-9, max_relative = 1e-3);
        assert_eq!(i_rms(0.0, 50.0).unwrap(), 0.0);
        assert_relative_eq!(i_rms(2e9, 50.0).unwrap(), 2.0 * i, max_relative = 1e-15);
    }

    #[test]
    fn irms_rejects_bad_impedance() {
        assert!(i_rms(1e9, 0.0).is_err());
        assert!(i_rms(1e9, -5.0).is_err());
    }

    #[test]
    fn inductance_and_energy_identity() {
        let l = resonator_inductance(1e9, 50.0).unwrap();
        // direct evaluation of Z0/(π² f)
        assert_relative_eq!(l, 5.0660592e-9, max_relative = 1e-6);
        assert_relative_eq!(resonator_inductance(2e9, 50.0).unwrap(), l / 2.0, max_relative = 1e-15);
        assert!(resonator_inductance(0.0, 50.0).is_err());
        let hbar = PhysicalConstants::<f64>::si().hbar;
        for &f in &[1e8, 1e9, 7.3e9] {
            for &z in &[10.0, 50.0, 120.0] {
                let i = i_rms(f, z).unwrap();
                let l = resonator_inductance(f, z).unwrap();
                assert_relative_eq!(l * i * i / 2.0, hbar * std::f64::consts::PI * f, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn thickness_frequency_roundtrip() {
        let ms = 1.9e6;
        let f = frequency_from_thickness(200e-9, 30e-9, ms).unwrap();
        assert!(f > 0.5 * 1.255e9 && f < 1.5 * 1.255e9, "f = {f}");
        let t = thickness_from_frequency(200e-9, f, ms).unwrap();
        assert_relative_eq!(t, 30e-9, max_relative = 1e-14);
        let t2 = thickness_from_frequency(400e-9, f, ms).unwrap();
        assert_relative_eq!(t2, 2.0 * t, max_relative = 1e-14);
    }

    #[test]
    fn parameter_validation() {
        assert!(MaterialParams::new("x", 0.0, 1e-11, 0.01).is_err());
        assert!(MaterialParams::new("x", 1e6, 1e-11, 1.5).is_err());
        assert!(DiscGeometry::new(100e-9, 150e-9).is_err());
        assert!(DiscGeometry::new(-1.0, 1e-9).is_err());
        assert!(ResonatorSpec::new(1e9, 50.0, 0.0, 1e-6).is_err());
        let g = DiscGeometry::new(400e-9, 60e-9).unwrap();
        assert_relative_eq!(g.center[1], 410e-9, max_relative = 1e-12);
    }

    #[test]
    fn cofe_exchange_length() {
        let m = MaterialParams::<f64>::cofe();
        let lex = m.exchange_length();
        assert!(lex > 3.3e-9 && lex < 3.5e-9, "lex = {lex}");
    }
}
