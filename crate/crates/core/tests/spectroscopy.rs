use vortex_cavity::cpw::{disc_field_profile, StripModel};
use vortex_cavity::micromag::{relax_vortex, Engine, MagGrid, Magnetization, RelaxOptions};
use vortex_cavity::physics::{DiscGeometry, MaterialParams, ResonatorSpec};
use vortex_cavity::spectroscopy::{
    broadband_spectrum, peak_frequency, BroadbandOptions, ExcitationSpec, FrequencyEstimate, SpectralWindow,
};

const TRACE_S: f64 = 3e-9;

fn relaxed_small_disc() -> (Engine<f64>, MagGrid<f64>, DiscGeometry<f64>) {
    let mat = MaterialParams::cofe();
    let geom = DiscGeometry::new(50e-9, 10e-9).unwrap();
    let grid = MagGrid::disc(&geom, 32, 32, 2, &mat).unwrap();
    let seed = Magnetization::vortex(&grid, mat.ms, 1, 1, 8e-9, [0.0; 2]);
    let mut e = Engine::new(grid.clone(), mat, &seed).unwrap();
    e.set_dt(0.5e-12).unwrap();
    let opts = RelaxOptions {
        torque_tol: 1e-4,
        ..Default::default()
    };
    relax_vortex(&mut e, &opts, 1, 1).unwrap();
    (e, grid, geom)
}

fn gyro(e: &mut Engine<f64>, exc: &ExcitationSpec<f64>) -> (FrequencyEstimate<f64>, f64) {
    let run = broadband_spectrum(e, exc, BroadbandOptions::default()).unwrap();
    let est = peak_frequency(&run.series, SpectralWindow::Rectangular, 0.0).unwrap();
    (est, run.peak_deviation)
}

#[test]
fn small_disc_response_is_linear_and_profile_independent() {
    let (mut e, grid, geom) = relaxed_small_disc();
    let weak = ExcitationSpec::sinc_uniform(&grid, 0.5e-3, 50e9, TRACE_S, 5e-12).unwrap();
    let strong = weak.scaled(4.0);
    let (fw, dw) = gyro(&mut e, &weak);
    let (fs, ds) = gyro(&mut e, &strong);
    assert!(((fs.f - fw.f) / fw.f).abs() < 1e-3, "{} vs {}", fw.f, fs.f);
    assert!((ds / dw - 4.0).abs() < 0.2, "deviation ratio {}", ds / dw);
    assert!(fw.uncertainty >= 1.0 / TRACE_S);

    // same pulse shape, strip profile normalised to the same centre field
    let spec = ResonatorSpec::new(1e9, 50.0, 1e5, 500e-9).unwrap();
    let (profile, bx) = disc_field_profile(&spec, &geom, &grid, StripModel::default()).unwrap();
    let mut cpw = weak.clone();
    cpw.profile = profile.iter().map(|b| b.map(|v| v * 2e-3 / bx)).collect();
    let (fc, _) = gyro(&mut e, &cpw);
    assert!((fc.f - fs.f).abs() <= fs.uncertainty.max(fc.uncertainty), "{} vs {}", fc.f, fs.f);
}
