use crate::error::{Error, Result};
use crate::micromag::engine::Engine;
use crate::micromag::state::{vortex_diagnostics, VortexState};
use crate::scalar::Real;

/// Controls for damped relaxation toward a torque-free state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions<T> {
    /// Damping used while relaxing; restored afterwards.
    pub alpha: T,
    /// Stop when max |m × H| / Ms falls below this.
    pub torque_tol: T,
    pub max_steps: u64,
    /// Torque is sampled every this many steps.
    pub check_every: u64,
}

impl<T: Real> Default for RelaxOptions<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.5),
            torque_tol: T::lit(1e-5),
            max_steps: 400_000,
            check_every: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxReport<T> {
    pub steps: u64,
    pub torque: T,
    pub vortex: Option<VortexState<T>>,
}

/// Run high-damping dynamics until the torque criterion is met.
pub fn relax<T: Real>(engine: &mut Engine<T>, opts: &RelaxOptions<T>) -> Result<RelaxReport<T>> {
    if !(opts.alpha > T::zero()) || !(opts.torque_tol > T::zero()) {
        return Err(Error::param("relax", "alpha and torque_tol must be positive"));
    }
    let saved_alpha = engine.alpha();
    engine.set_alpha(opts.alpha);
    let out = descend(engine, opts);
    engine.set_alpha(saved_alpha);
    let (steps, torque) = out?;
    let vortex = vortex_diagnostics(&engine.magnetization(), engine.grid()).ok();
    Ok(RelaxReport { steps, torque, vortex })
}

fn descend<T: Real>(engine: &mut Engine<T>, opts: &RelaxOptions<T>) -> Result<(u64, T)> {
    let every = opts.check_every.max(1);
    let mut steps = 0;
    let mut torque = engine.max_torque();
    while torque >= opts.torque_tol {
        if steps >= opts.max_steps {
            return Err(Error::NotConverged {
                steps,
                torque: torque.f64(),
            });
        }
        for _ in 0..every {
            engine.step()?;
        }
        steps += every;
        torque = engine.max_torque();
        if !torque.is_finite() {
            return Err(Error::NonFinite { step: steps });
        }
    }
    Ok((steps, torque))
}

/// Relax and require the requested circulation and polarity to survive.
pub fn relax_vortex<T: Real>(engine: &mut Engine<T>, opts: &RelaxOptions<T>, circulation: i8, polarity: i8) -> Result<RelaxReport<T>> {
    let b = engine.b_applied();
    let report = relax(engine, opts)?;
    match report.vortex {
        Some(v) if v.circulation == circulation && v.polarity == polarity => Ok(report),
        Some(_) => Err(Error::VortexLost {
            b_dc_t: b[2].f64(),
            reason: "circulation or polarity changed".into(),
        }),
        None => Err(Error::VortexLost {
            b_dc_t: b[2].f64(),
            reason: "no vortex core found".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::micromag::grid::MagGrid;
    use crate::micromag::state::Magnetization;
    use crate::physics::{DiscGeometry, MaterialParams};

    fn relaxed(polarity: i8) -> (Engine<f64>, RelaxReport<f64>) {
        let geom = DiscGeometry::new(50e-9, 10e-9).unwrap();
        let mat = MaterialParams::cofe();
        let grid = MagGrid::disc(&geom, 32, 32, 2, &mat).unwrap();
        let m = Magnetization::vortex(&grid, mat.ms, 1, polarity, 8e-9, [0.0, 0.0]);
        let mut e = Engine::new(grid, mat, &m).unwrap();
        e.set_dt(0.5e-12).unwrap();
        let opts = RelaxOptions {
            torque_tol: 1e-4,
            ..Default::default()
        };
        let rep = relax_vortex(&mut e, &opts, 1, polarity).unwrap();
        (e, rep)
    }

    #[test]
    fn relaxation_keeps_handedness_and_restores_damping() {
        let (e, rep) = relaxed(1);
        assert!(rep.torque < 1e-4);
        assert_eq!(e.alpha(), e.material().alpha);
        let v = rep.vortex.unwrap();
        assert!(v.core_position[0].abs() < 1e-9 && v.core_position[1].abs() < 1e-9);
    }

    #[test]
    fn opposite_polarity_is_a_mirror_image() {
        let (mut up, _) = relaxed(1);
        let (mut down, _) = relaxed(-1);
        let (a, b) = (up.magnetization(), down.magnetization());
        // reflection through the mid-plane: (mx, my, mz)(z) -> (mx, my, -mz)(-z)
        let g = up.grid().clone();
        for i in 0..g.len() {
            let (x, y, z) = g.coords(i);
            let (p, q) = (a.m[i], b.m[g.index(x, y, g.nz - 1 - z)]);
            assert!(
                (p[0] - q[0]).abs() < 1e-3 && (p[1] - q[1]).abs() < 1e-3 && (p[2] + q[2]).abs() < 1e-3,
                "{i}: {p:?} {q:?}"
            );
        }
        let (eu, ed) = (up.energy().total(), down.energy().total());
        assert!(((eu - ed) / eu).abs() < 1e-5, "{eu} {ed}");
    }

    #[test]
    fn rejects_bad_options() {
        let (mut e, _) = relaxed(1);
        let opts = RelaxOptions {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(relax(&mut e, &opts).is_err());
    }
}
