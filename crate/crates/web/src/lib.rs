//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function in [`demo`], so
//! the numbers the page shows are the ones the native tests check.

use wasm_bindgen::prelude::*;

pub mod demo {
    use shapr::dataset::{location_holdout_split, Task};
    use shapr::eval::{run_experiment, ModelKind, ModelParams};
    use shapr::simulator::{generate_dataset, simulate_sweep, synth_iq_frame, Occupancy, Scenario, Scene};
    use shapr::spectrum::band_average_power;
    use shapr::{rng, Result};

    pub fn scene(scenario: &str, seed: u64) -> Result<Scene> {
        scenario.parse::<Scenario>()?.scene(seed)
    }

    /// Band centers of the default plan in MHz.
    pub fn band_centers_mhz() -> Vec<f64> {
        let plan = shapr::spectrum::BandPlan::default();
        (0..plan.band_count()).map(|i| plan.center(i) as f64 / 1e6).collect()
    }

    /// One sweep per sensor, sensor-major. `subject` < 0 leaves the room
    /// empty; otherwise that subject stands at the scene anchor.
    pub fn sweep(scenario: &str, seed: u64, subject: i32, noisy: bool) -> Result<Vec<f64>> {
        let scene = scene(scenario, seed)?;
        let profile;
        let occupancy = if subject < 0 {
            Occupancy::Empty
        } else {
            profile = scene.subject(subject as usize)?;
            Occupancy::Static {
                profile: &profile,
                position: scene.anchor,
            }
        };
        let mut r = rng::stream(seed, 0xD0);
        let noise: Option<&mut dyn rand::RngCore> = if noisy { Some(&mut r) } else { None };
        simulate_sweep(&scene, &occupancy, noise)
    }

    /// A synthesized frame followed by its measured power:
    /// `(bytes, power_db)`.
    pub fn frame(target_db: f64, n_bytes: usize, seed: u64) -> Result<(Vec<u8>, f64)> {
        let f = synth_iq_frame(target_db, n_bytes, seed)?;
        let p = band_average_power(&f)?;
        Ok((f.bytes().to_vec(), p))
    }

    /// Classroom localization with a 3-location holdout. Returns
    /// `[width, height, mean_error, tx, ty, px, py, ...]`.
    pub fn localize(seed: u64, per_location: usize) -> Result<Vec<f64>> {
        let scene = Scenario::Classroom.scene(seed)?;
        let d = generate_dataset(&scene, Task::CoordLocalization, 20, per_location, seed)?;
        let split = location_holdout_split(&d, 3, seed)?;
        let report = run_experiment(&d, &split, ModelKind::Gpr, &ModelParams::default(), seed)?;
        let mut out = vec![scene.width_m, scene.height_m, report.mean_error_m().unwrap_or(f64::NAN)];
        for row in &report.rows {
            for cell in [&row.truth, &row.predicted] {
                let (x, y) = cell.split_once(';').unwrap_or(("nan", "nan"));
                out.push(x.parse().unwrap_or(f64::NAN));
                out.push(y.parse().unwrap_or(f64::NAN));
            }
        }
        Ok(out)
    }
}

fn js_err(e: shapr::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = bandCentersMhz)]
pub fn band_centers_mhz() -> Vec<f64> {
    demo::band_centers_mhz()
}

#[wasm_bindgen(js_name = sensorCount)]
pub fn sensor_count(scenario: &str) -> Result<usize, JsError> {
    demo::scene(scenario, 0).map(|s| s.sensors.len()).map_err(js_err)
}

#[wasm_bindgen(js_name = simulatedSweep)]
pub fn simulated_sweep(scenario: &str, seed: u64, subject: i32, noisy: bool) -> Result<Vec<f64>, JsError> {
    demo::sweep(scenario, seed, subject, noisy).map_err(js_err)
}

#[wasm_bindgen(js_name = synthFrame)]
pub fn synth_frame(target_db: f64, n_bytes: usize, seed: u64) -> Result<Vec<u8>, JsError> {
    demo::frame(target_db, n_bytes, seed).map(|(b, _)| b).map_err(js_err)
}

#[wasm_bindgen(js_name = framePower)]
pub fn frame_power(bytes: &[u8]) -> Result<f64, JsError> {
    let f =
        shapr::spectrum::IqFrame::new(0, 0, shapr::spectrum::DEFAULT_SAMPLE_RATE_HZ, bytes.to_vec()).map_err(js_err)?;
    shapr::spectrum::band_average_power(&f).map_err(js_err)
}

#[wasm_bindgen(js_name = gprLocalize)]
pub fn gpr_localize(seed: u64, per_location: usize) -> Result<Vec<f64>, JsError> {
    demo::localize(seed, per_location).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::demo;

    #[test]
    fn sweep_has_one_curve_per_sensor() {
        let s = demo::sweep("living-room", 42, -1, false).unwrap();
        assert_eq!(s.len(), 5 * demo::band_centers_mhz().len());
        assert!(demo::sweep("nowhere", 42, -1, false).is_err());
    }

    #[test]
    fn subject_lowers_power_somewhere() {
        let empty = demo::sweep("living-room", 42, -1, false).unwrap();
        let occupied = demo::sweep("living-room", 42, 0, false).unwrap();
        assert!(occupied.iter().zip(&empty).all(|(o, e)| o <= &(e + 1e-12)));
        assert!(occupied.iter().zip(&empty).any(|(o, e)| o < &(e - 0.1)));
    }

    #[test]
    fn frame_power_tracks_target() {
        let (bytes, p) = demo::frame(-20.0, 4800, 1).unwrap();
        assert_eq!(bytes.len(), 4800);
        assert!((p + 20.0).abs() < 0.15);
    }

    #[test]
    fn localization_returns_pairs() {
        let out = demo::localize(42, 4).unwrap();
        assert_eq!((out[0], out[1]), (10.0, 8.0));
        assert_eq!((out.len() - 3) % 4, 0);
        assert_eq!((out.len() - 3) / 4, 3 * 4);
        assert!(out[2].is_finite());
    }
}
