//! Deterministic RF scene simulator.
//!
//! A rectangular room holds ambient transmitters with smooth baseline
//! spectra and a set of receiving sensors. Each transmitter→sensor path
//! follows a log-distance model and is attenuated by any body standing near
//! the line of sight. A sweep is sequential in time, so a moving subject is
//! evaluated at a different position for every band.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::{quantize_power, Dataset, LabeledSample, Task};
use crate::error::{Error, Result};
use crate::io;
use crate::rng;
use crate::spectrum::{band_average_power, BandPlan, IqFrame, DEFAULT_SAMPLE_RATE_HZ};

/// Path-loss exponent.
pub const PATH_LOSS_EXPONENT: f64 = 2.0;
/// Distances are clamped to this before taking the log.
pub const NEAR_FIELD_CLAMP_M: f64 = 0.1;
/// Grid pitch of the classroom localization layout.
pub const DEFAULT_GRID_SPACING_M: f64 = 1.8;
/// Range of synthesized frame powers, in dB.
pub const SYNTH_MIN_DB: f64 = -40.0;
pub const SYNTH_MAX_DB: f64 = 0.0;
/// Minimum per-band gap between two subjects' noise-free signatures.
pub const MIN_SUBJECT_SEPARATION_DB: f64 = 0.5;

const BASELINE_STREAM: u64 = 0x4241_5345;
const SUBJECT_STREAM: u64 = 0x5355_424a;
const ACTIVITY_STREAM: u64 = 0x4143_5449;
const SAMPLE_STREAM: u64 = 0x5341_4d50;
const FRAME_STREAM: u64 = 0x4652_414d;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// Log-distance path gain in dB relative to 1 m.
pub fn path_gain_db(d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Config(format!("distance must be positive, got {d}")));
    }
    Ok(-10.0 * PATH_LOSS_EXPONENT * d.max(NEAR_FIELD_CLAMP_M).log10())
}

/// Distance from `p` to the segment `a`–`b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Fraction of a path's power that survives a body of radius `radius`
/// absorbing `absorption` of whatever passes through its center.
pub fn shadowing_factor(body: Point, radius: f64, absorption: f64, tx: Point, rx: Point) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("body radius must be positive, got {radius}")));
    }
    if !(0.0..=1.0).contains(&absorption) {
        return Err(Error::Config(format!("absorption {absorption} outside [0, 1]")));
    }
    let p = segment_distance(body, tx, rx) / radius;
    Ok(1.0 - absorption * (-p * p).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitterSpec {
    pub position: Point,
    /// Emission level per band center, dB at 1 m.
    pub baseline_spectrum_db: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    pub sensor_id: u32,
    pub position: Point,
}

/// Parametric absorption curve `base + amplitude * sin(2π * cycles * t + phase)`
/// over normalized band position `t` in [0, 1], clamped to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSpec {
    pub subject_id: String,
    pub body_radius_m: f64,
    pub base: f64,
    pub amplitude: f64,
    pub cycles: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub body_radius_m: f64,
    /// Attenuation fraction per band center.
    pub absorption: Vec<f64>,
}

impl SubjectProfile {
    pub fn from_spec(spec: &SubjectSpec, bands: usize) -> Result<Self> {
        if !(spec.body_radius_m > 0.0) {
            return Err(Error::Config(format!(
                "subject {} needs a positive body radius",
                spec.subject_id
            )));
        }
        let absorption = (0..bands)
            .map(|b| {
                let t = band_fraction(b, bands);
                (spec.base + spec.amplitude * (TAU * spec.cycles * t + spec.phase).sin()).clamp(0.0, 1.0)
            })
            .collect();
        Ok(Self {
            subject_id: spec.subject_id.clone(),
            body_radius_m: spec.body_radius_m,
            absorption,
        })
    }
}

fn band_fraction(band: usize, bands: usize) -> f64 {
    if bands > 1 {
        band as f64 / (bands - 1) as f64
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Point,
    /// Multiplier on body radius (crouching < 1 < arms spread).
    pub posture: f64,
}

/// Movement over one sweep. Waypoints are spread evenly over the band
/// indices and linearly interpolated, so band index acts as time.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityScript {
    pub activity_id: String,
    pub waypoints: Vec<Waypoint>,
}

impl ActivityScript {
    pub fn state_at(&self, band: usize, bands: usize) -> Waypoint {
        let w = &self.waypoints;
        if w.len() == 1 {
            return w[0];
        }
        let s = band_fraction(band, bands) * (w.len() - 1) as f64;
        let i = (s.floor() as usize).min(w.len() - 2);
        let t = s - i as f64;
        Waypoint {
            position: w[i].position.lerp(w[i + 1].position, t),
            posture: w[i].posture + (w[i + 1].posture - w[i].posture) * t,
        }
    }
}

/// Body currently in the room, as seen by one band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectState {
    pub position: Point,
    pub radius: f64,
    pub absorption: f64,
}

/// Everything needed to build a [`Scene`]; transmitter spectra and subject
/// curves are derived from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub width_m: f64,
    pub height_m: f64,
    pub sensors: Vec<SensorSpec>,
    pub transmitters: Vec<Point>,
    pub subjects: Vec<SubjectSpec>,
    pub activities: Vec<ActivityScript>,
    pub noise_sigma_db: f64,
    /// Mean body radius for generated subjects.
    pub body_radius_m: f64,
    pub grid_spacing_m: f64,
    /// Where subjects stand for authentication. Defaults to the room center.
    pub anchor: Option<Point>,
    /// Std-dev of the per-sample offset applied to the subject's position.
    pub position_jitter_m: f64,
    /// Half-width of the square around the anchor where built-in activities
    /// take place.
    pub activity_zone_m: f64,
    /// Mean transmitter emission level, dB at 1 m.
    pub emission_db: f64,
}

/// Built-in room setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Laboratory,
    LivingRoom,
    Classroom,
    Vehicle,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Laboratory,
        Scenario::LivingRoom,
        Scenario::Classroom,
        Scenario::Vehicle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Laboratory => "laboratory",
            Scenario::LivingRoom => "living-room",
            Scenario::Classroom => "classroom",
            Scenario::Vehicle => "vehicle",
        }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Authentication => Scenario::LivingRoom,
            Task::GridLocalization => Scenario::Vehicle,
            Task::CoordLocalization => Scenario::Classroom,
            Task::Activity => Scenario::Laboratory,
        }
    }

    pub fn layout(self) -> SceneLayout {
        let p = Point::new;
        let sensors = |pts: [(f64, f64); 5]| -> Vec<SensorSpec> {
            pts.iter()
                .enumerate()
                .map(|(i, &(x, y))| SensorSpec {
                    sensor_id: i as u32,
                    position: p(x, y),
                })
                .collect()
        };
        // ambient emitters grouped like an entertainment center
        let cluster = |x: f64, y: f64| vec![p(x + 0.1, y - 0.2), p(x + 0.1, y + 0.2), p(x + 0.3, y), p(x, y)];
        match self {
            Scenario::LivingRoom => SceneLayout {
                width_m: 6.0,
                height_m: 5.0,
                sensors: sensors([(5.6, 1.0), (5.7, 1.75), (5.7, 2.5), (5.7, 3.25), (5.6, 4.0)]),
                transmitters: cluster(0.2, 2.5),
                subjects: Vec::new(),
                activities: Vec::new(),
                noise_sigma_db: 1.0,
                body_radius_m: 0.8,
                grid_spacing_m: 1.2,
                anchor: Some(p(2.5, 2.5)),
                position_jitter_m: 0.03,
                activity_zone_m: 1.0,
                emission_db: -14.0,
            },
            Scenario::Laboratory => SceneLayout {
                width_m: 7.0,
                height_m: 5.0,
                sensors: sensors([(6.6, 0.5), (6.7, 1.5), (6.7, 2.5), (6.7, 3.5), (6.6, 4.5)]),
                transmitters: cluster(0.2, 2.5),
                subjects: Vec::new(),
                activities: Vec::new(),
                noise_sigma_db: 1.0,
                body_radius_m: 0.6,
                grid_spacing_m: 1.2,
                anchor: Some(p(3.0, 2.5)),
                position_jitter_m: 0.05,
                activity_zone_m: 1.0,
                emission_db: -14.0,
            },
            Scenario::Classroom => {
                let mut transmitters = Vec::with_capacity(16);
                for k in 0..4 {
                    let x = 1.25 + 2.5 * k as f64;
                    transmitters.extend([p(x, 0.1), p(x, 7.9)]);
                }
                for k in 0..4 {
                    let y = 1.0 + 2.0 * k as f64;
                    transmitters.extend([p(0.1, y), p(9.9, y)]);
                }
                SceneLayout {
                    width_m: 10.0,
                    height_m: 8.0,
                    sensors: sensors([(2.3, 2.2), (7.7, 2.2), (7.7, 5.8), (2.3, 5.8), (5.0, 4.0)]),
                    transmitters,
                    subjects: Vec::new(),
                    activities: Vec::new(),
                    noise_sigma_db: 1.0,
                    body_radius_m: 3.0,
                    grid_spacing_m: DEFAULT_GRID_SPACING_M,
                    anchor: None,
                    position_jitter_m: 0.05,
                    activity_zone_m: 1.5,
                    emission_db: -10.0,
                }
            }
            Scenario::Vehicle => SceneLayout {
                width_m: 2.0,
                height_m: 3.6,
                sensors: sensors([(0.1, 0.9), (1.9, 0.9), (1.9, 2.7), (0.1, 2.7), (1.0, 3.5)]),
                // center console and dashboard
                transmitters: vec![p(1.0, 1.8), p(1.0, 0.05)],
                subjects: Vec::new(),
                activities: Vec::new(),
                noise_sigma_db: 1.0,
                body_radius_m: 0.35,
                grid_spacing_m: 0.9,
                anchor: None,
                position_jitter_m: 0.03,
                activity_zone_m: 0.5,
                emission_db: -22.0,
            },
        }
    }

    pub fn scene(self, seed: u64) -> Result<Scene> {
        Scene::build(self.layout(), BandPlan::default(), seed)
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown scenario {s:?} (expected laboratory|living-room|classroom|vehicle)"
            ))
        })
    }
}

/// A simulated room ready to produce sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub width_m: f64,
    pub height_m: f64,
    pub plan: BandPlan,
    pub transmitters: Vec<TransmitterSpec>,
    pub sensors: Vec<SensorSpec>,
    pub subjects: Vec<SubjectSpec>,
    pub activities: Vec<ActivityScript>,
    pub noise_sigma_db: f64,
    pub body_radius_m: f64,
    pub grid_spacing_m: f64,
    pub anchor: Point,
    pub position_jitter_m: f64,
    pub activity_zone_m: f64,
    pub seed: u64,
}

/// Smooth random curve: a level plus three low-frequency sinusoids.
fn smooth_curve(rng: &mut impl Rng, bands: usize, level: f64, swing: f64) -> Vec<f64> {
    let comps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.3..1.0) * swing,
                rng.random_range(0.5..4.0),
                rng.random_range(0.0..TAU),
            )
        })
        .collect();
    (0..bands)
        .map(|b| {
            let t = band_fraction(b, bands);
            level + comps.iter().map(|(a, f, ph)| a * (TAU * f * t + ph).sin()).sum::<f64>() / 3.0
        })
        .collect()
}

/// Canonical activity names, in class order.
pub const ACTIVITY_NAMES: [&str; 8] = [
    "smartphone",
    "sitting",
    "watching_tv",
    "walking",
    "standing",
    "exercise",
    "board_writing",
    "falling",
];

impl Scene {
    pub fn build(layout: SceneLayout, plan: BandPlan, seed: u64) -> Result<Self> {
        let inside = |p: Point| p.x >= 0.0 && p.x <= layout.width_m && p.y >= 0.0 && p.y <= layout.height_m;
        if !(layout.width_m > 0.0 && layout.height_m > 0.0) {
            return Err(Error::Config("room dimensions must be positive".into()));
        }
        if layout.transmitters.is_empty() || layout.sensors.is_empty() {
            return Err(Error::Config(
                "scene needs at least one transmitter and one sensor".into(),
            ));
        }
        if !(layout.noise_sigma_db >= 0.0) || !(layout.position_jitter_m >= 0.0) || !(layout.activity_zone_m >= 0.0) {
            return Err(Error::Config(
                "noise, jitter and activity zone must be non-negative".into(),
            ));
        }
        if !(layout.body_radius_m > 0.0) || !(layout.grid_spacing_m > 0.0) {
            return Err(Error::Config("body radius and grid spacing must be positive".into()));
        }
        if let Some(p) = layout.transmitters.iter().find(|p| !inside(**p)) {
            return Err(Error::Config(format!(
                "transmitter at ({}, {}) is outside the room",
                p.x, p.y
            )));
        }
        let mut ids = BTreeSet::new();
        for s in &layout.sensors {
            if !inside(s.position) {
                return Err(Error::Config(format!("sensor {} is outside the room", s.sensor_id)));
            }
            if !ids.insert(s.sensor_id) {
                return Err(Error::Config(format!("duplicate sensor id {}", s.sensor_id)));
            }
        }
        for a in &layout.activities {
            if a.waypoints.is_empty() {
                return Err(Error::Config(format!("activity {} has no waypoints", a.activity_id)));
            }
            if let Some(w) = a.waypoints.iter().find(|w| !inside(w.position) || !(w.posture > 0.0)) {
                return Err(Error::Config(format!(
                    "activity {} waypoint ({}, {}) posture {} is invalid",
                    a.activity_id, w.position.x, w.position.y, w.posture
                )));
            }
        }
        let anchor = layout
            .anchor
            .unwrap_or(Point::new(layout.width_m / 2.0, layout.height_m / 2.0));
        if !inside(anchor) {
            return Err(Error::Config("anchor is outside the room".into()));
        }
        let bands = plan.band_count();
        let transmitters = layout
            .transmitters
            .iter()
            .enumerate()
            .map(|(i, &position)| {
                let mut r = rng::substream(seed, BASELINE_STREAM, i as u64);
                let level = layout.emission_db + r.random_range(-3.0..3.0);
                TransmitterSpec {
                    position,
                    baseline_spectrum_db: smooth_curve(&mut r, bands, level, 4.0),
                }
            })
            .collect();
        let mut sensors = layout.sensors.clone();
        sensors.sort_by_key(|s| s.sensor_id);
        for s in &layout.subjects {
            SubjectProfile::from_spec(s, bands)?;
        }
        Ok(Scene {
            width_m: layout.width_m,
            height_m: layout.height_m,
            plan,
            transmitters,
            sensors,
            subjects: layout.subjects,
            activities: layout.activities,
            noise_sigma_db: layout.noise_sigma_db,
            body_radius_m: layout.body_radius_m,
            grid_spacing_m: layout.grid_spacing_m,
            anchor,
            position_jitter_m: layout.position_jitter_m,
            activity_zone_m: layout.activity_zone_m,
            seed,
        })
    }

    pub fn sensor_ids(&self) -> Vec<u32> {
        self.sensors.iter().map(|s| s.sensor_id).collect()
    }

    pub fn bands(&self) -> usize {
        self.plan.band_count()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.width_m && p.y >= 0.0 && p.y <= self.height_m
    }

    fn clamp_inside(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width_m), p.y.clamp(0.0, self.height_m))
    }

    /// Subject `index`: taken from the layout if listed, otherwise generated
    /// from the scene seed.
    pub fn subject(&self, index: usize) -> Result<SubjectProfile> {
        let spec = match self.subjects.get(index) {
            Some(s) => s.clone(),
            None => {
                let mut r = rng::substream(self.seed, SUBJECT_STREAM, index as u64);
                // golden-ratio spacing keeps mean absorption apart for any count
                let spread = (0.5 + index as f64 * 0.618_033_988_749_895).fract();
                let base = 0.2 + 0.55 * spread + r.random_range(-0.03..0.03);
                SubjectSpec {
                    subject_id: format!("subject_{index}"),
                    body_radius_m: self.body_radius_m * r.random_range(0.85..1.15),
                    base,
                    amplitude: r.random_range(0.08f64..0.2).min(0.92 - base).min(base - 0.05),
                    cycles: r.random_range(0.5..3.0),
                    phase: r.random_range(0.0..TAU),
                }
            }
        };
        SubjectProfile::from_spec(&spec, self.bands())
    }

    /// Activity `index`: taken from the layout if listed, otherwise one of
    /// the built-in scripts placed in the room from the scene seed.
    pub fn activity(&self, index: usize) -> ActivityScript {
        if let Some(a) = self.activities.get(index) {
            return a.clone();
        }
        let mut r = rng::substream(self.seed, ACTIVITY_STREAM, index as u64);
        let (a, z) = (self.anchor, self.activity_zone_m);
        // golden-ratio placement along y keeps activities on distinct paths
        let u: f64 = r.random_range(0.0..1.0);
        let v = (0.5 + index as f64 * 0.618_033_988_749_895 + r.random_range(-0.03..0.03)).fract();
        let base = self.clamp_inside(Point::new(a.x + (2.0 * u - 1.0) * z, a.y + (2.0 * v - 1.0) * z));
        let other = self.clamp_inside(Point::new(2.0 * a.x - base.x, 2.0 * a.y - base.y));
        let wp = |position: Point, posture: f64| Waypoint { position, posture };
        let name = ACTIVITY_NAMES
            .get(index)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("activity_{index}"));
        let waypoints = match index % ACTIVITY_NAMES.len() {
            // smartphone: seated, small hand motion
            0 => vec![wp(base, 0.8), wp(base, 0.9), wp(base, 0.8)],
            1 => vec![wp(base, 0.6)],
            2 => vec![wp(base, 0.65), wp(base, 0.7)],
            3 => vec![wp(base, 1.0), wp(other, 1.0), wp(base, 1.0)],
            4 => vec![wp(base, 1.0)],
            5 => (0..9).map(|k| wp(base, if k % 2 == 0 { 0.7 } else { 1.3 })).collect(),
            // board_writing: slow pass across the zone
            6 => vec![
                wp(self.clamp_inside(Point::new(base.x, a.y - z)), 1.1),
                wp(self.clamp_inside(Point::new(base.x, a.y + z)), 1.1),
            ],
            _ => vec![wp(base, 1.0), wp(base, 1.0), wp(base, 0.35), wp(base, 0.35)],
        };
        ActivityScript {
            activity_id: name,
            waypoints,
        }
    }

    /// Grid positions for `count` locations, centered in the room.
    pub fn grid_positions(&self, count: usize) -> Result<Vec<Point>> {
        if count == 0 {
            return Err(Error::Config("grid needs at least one location".into()));
        }
        let cols = (count as f64).sqrt().ceil() as usize;
        let rows = count.div_ceil(cols);
        let span_x = (cols - 1) as f64 * self.grid_spacing_m;
        let span_y = (rows - 1) as f64 * self.grid_spacing_m;
        if span_x >= self.width_m || span_y >= self.height_m {
            return Err(Error::Config(format!(
                "{cols}x{rows} grid at {} m spacing does not fit in a {} x {} m room",
                self.grid_spacing_m, self.width_m, self.height_m
            )));
        }
        let x0 = (self.width_m - span_x) / 2.0;
        let y0 = (self.height_m - span_y) / 2.0;
        // micrometre rounding keeps labels like 3.2 instead of 3.2000000000000002
        let um = |v: f64| (v * 1e6).round() / 1e6;
        Ok((0..count)
            .map(|i| {
                Point::new(
                    um(x0 + (i % cols) as f64 * self.grid_spacing_m),
                    um(y0 + (i / cols) as f64 * self.grid_spacing_m),
                )
            })
            .collect())
    }
}

/// Noise-free received power per sensor (ascending id) at one band.
pub fn expected_band_power(scene: &Scene, band_index: usize, subject: Option<&SubjectState>) -> Result<Vec<f64>> {
    if band_index >= scene.bands() {
        return Err(Error::Config(format!(
            "band index {band_index} outside plan of {} bands",
            scene.bands()
        )));
    }
    scene
        .sensors
        .iter()
        .map(|sensor| {
            let mut linear = 0.0;
            for tx in &scene.transmitters {
                let gain = path_gain_db(tx.position.distance(sensor.position).max(f64::MIN_POSITIVE))?;
                let mut p = 10f64.powf((tx.baseline_spectrum_db[band_index] + gain) / 10.0);
                if let Some(s) = subject {
                    p *= shadowing_factor(s.position, s.radius, s.absorption, tx.position, sensor.position)?;
                }
                linear += p;
            }
            Ok(10.0 * linear.log10())
        })
        .collect()
}

/// [`expected_band_power`] plus Gaussian noise in the dB domain.
pub fn simulate_band_power<R: Rng + ?Sized>(
    scene: &Scene,
    band_index: usize,
    subject: Option<&SubjectState>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut powers = expected_band_power(scene, band_index, subject)?;
    if scene.noise_sigma_db > 0.0 {
        let noise = Normal::new(0.0, scene.noise_sigma_db).expect("sigma checked at build");
        for p in &mut powers {
            *p += noise.sample(rng);
        }
    }
    Ok(powers)
}

/// What occupies the room during one sweep.
#[derive(Debug, Clone)]
pub enum Occupancy<'a> {
    Empty,
    Static {
        profile: &'a SubjectProfile,
        position: Point,
    },
    Scripted {
        profile: &'a SubjectProfile,
        script: &'a ActivityScript,
        offset: (f64, f64),
    },
}

impl Occupancy<'_> {
    fn state(&self, scene: &Scene, band: usize) -> Option<SubjectState> {
        match self {
            Occupancy::Empty => None,
            Occupancy::Static { profile, position } => Some(SubjectState {
                position: *position,
                radius: profile.body_radius_m,
                absorption: profile.absorption[band],
            }),
            Occupancy::Scripted {
                profile,
                script,
                offset,
            } => {
                let w = script.state_at(band, scene.bands());
                let pos = scene.clamp_inside(Point::new(w.position.x + offset.0, w.position.y + offset.1));
                Some(SubjectState {
                    position: pos,
                    radius: profile.body_radius_m * w.posture,
                    absorption: profile.absorption[band],
                })
            }
        }
    }
}

/// One full sweep, returned sensor-major (all bands of the lowest sensor id
/// first). With `rng` = `None` the sweep is noise-free.
pub fn simulate_sweep(
    scene: &Scene,
    occupancy: &Occupancy<'_>,
    mut rng: Option<&mut dyn rand::RngCore>,
) -> Result<Vec<f64>> {
    let bands = scene.bands();
    let sensors = scene.sensors.len();
    let mut out = vec![0.0; bands * sensors];
    for band in 0..bands {
        let state = occupancy.state(scene, band);
        let powers = match rng.as_deref_mut() {
            Some(r) => simulate_band_power(scene, band, state.as_ref(), r)?,
            None => expected_band_power(scene, band, state.as_ref())?,
        };
        for (s, p) in powers.into_iter().enumerate() {
            out[s * bands + band] = p;
        }
    }
    Ok(out)
}

/// Synthesizes an 8-bit I/Q capture whose average power is `target_db`.
///
/// Draws complex Gaussian samples with per-component variance
/// `10^(target/10) / 2`, then refines the scale a few times so the power of
/// the quantized bytes lands on the target despite rounding.
pub fn synth_iq_frame(target_db: f64, n_bytes: usize, seed: u64) -> Result<IqFrame> {
    if !(SYNTH_MIN_DB..=SYNTH_MAX_DB).contains(&target_db) {
        return Err(Error::Config(format!(
            "target power {target_db} dB outside [{SYNTH_MIN_DB}, {SYNTH_MAX_DB}] dB"
        )));
    }
    if n_bytes < 512 || !n_bytes.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "frame size {n_bytes} must be even and at least 512"
        )));
    }
    let mut r = rng::stream(seed, FRAME_STREAM);
    let z: Vec<f64> = (0..n_bytes).map(|_| StandardNormal.sample(&mut r)).collect();
    let target = 10f64.powf(target_db / 10.0);
    let quantize = |scale: f64| -> Vec<u8> {
        z.iter()
            .map(|v| ((v * scale + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8)
            .collect()
    };
    let power_of = |bytes: &[u8]| -> f64 {
        let s: f64 = bytes
            .iter()
            .map(|&b| {
                let v = f64::from(b) / 127.5 - 1.0;
                v * v
            })
            .sum();
        s / (bytes.len() as f64 / 2.0)
    };
    let mut scale = (target / 2.0).sqrt();
    let mut best = quantize(scale);
    let mut best_err = (10.0 * (power_of(&best) / target).log10()).abs();
    for _ in 0..12 {
        if best_err < 0.005 {
            break;
        }
        let p = power_of(&quantize(scale));
        scale *= (target / p).sqrt();
        let bytes = quantize(scale);
        let err = (10.0 * (power_of(&bytes) / target).log10()).abs();
        if err < best_err {
            best = bytes;
            best_err = err;
        }
    }
    IqFrame::new(0, 0, DEFAULT_SAMPLE_RATE_HZ, best)
}

/// Frames for one sensor's sweep, one per band center.
pub fn synth_sweep_frames(
    sensor_id: u32,
    plan: &BandPlan,
    powers_db: &[f64],
    n_bytes: usize,
    seed: u64,
) -> Result<Vec<IqFrame>> {
    if powers_db.len() != plan.band_count() {
        return Err(Error::Dimension {
            expected: plan.band_count(),
            actual: powers_db.len(),
        });
    }
    powers_db
        .iter()
        .enumerate()
        .map(|(b, &p)| {
            let mut f = synth_iq_frame(p, n_bytes, rng::mix64(seed ^ (u64::from(sensor_id) << 32 | b as u64)))?;
            f.sensor_id = sensor_id;
            f.center_freq_hz = plan.center(b);
            Ok(f)
        })
        .collect()
}

/// Checks that every pair of subjects differs by more than
/// [`MIN_SUBJECT_SEPARATION_DB`] in at least one noise-free feature.
pub fn check_subject_separation(scene: &Scene, profiles: &[SubjectProfile]) -> Result<()> {
    let signatures = profiles
        .iter()
        .map(|p| {
            simulate_sweep(
                scene,
                &Occupancy::Static {
                    profile: p,
                    position: scene.anchor,
                },
                None,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    for i in 0..profiles.len() {
        for j in i + 1..profiles.len() {
            let gap = signatures[i]
                .iter()
                .zip(&signatures[j])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap <= MIN_SUBJECT_SEPARATION_DB {
                return Err(Error::Config(format!(
                    "subjects {} and {} differ by at most {gap:.3} dB; scene cannot tell them apart",
                    profiles[i].subject_id, profiles[j].subject_id
                )));
            }
        }
    }
    Ok(())
}

/// Generates `categories * samples_per_category` labeled samples.
///
/// Each sample draws from its own random stream keyed by `(seed, index)`.
pub fn generate_dataset(
    scene: &Scene,
    task: Task,
    categories: usize,
    samples_per_category: usize,
    seed: u64,
) -> Result<Dataset> {
    if categories == 0 || samples_per_category == 0 {
        return Err(Error::Config(
            "category and per-category counts must be positive".into(),
        ));
    }
    let positions = match task {
        Task::GridLocalization | Task::CoordLocalization => scene.grid_positions(categories)?,
        _ => Vec::new(),
    };
    let subjects: Vec<SubjectProfile> = match task {
        Task::Authentication => (0..categories).map(|i| scene.subject(i)).collect::<Result<_>>()?,
        _ => vec![scene.subject(0)?],
    };
    if task == Task::Authentication {
        check_subject_separation(scene, &subjects)?;
    }
    let scripts: Vec<ActivityScript> = match task {
        Task::Activity => (0..categories).map(|i| scene.activity(i)).collect(),
        _ => Vec::new(),
    };
    let mut seen = BTreeSet::new();
    if let Some(s) = scripts.iter().find(|s| !seen.insert(s.activity_id.clone())) {
        return Err(Error::Config(format!("duplicate activity id {}", s.activity_id)));
    }

    let jitter = Normal::new(0.0, scene.position_jitter_m).expect("jitter checked at build");
    let make_sample = |index: usize| -> Result<LabeledSample> {
        let category = index / samples_per_category;
        let mut r = rng::substream(seed, SAMPLE_STREAM, index as u64);
        let offset = (jitter.sample(&mut r), jitter.sample(&mut r));
        let jittered = |p: Point| scene.clamp_inside(Point::new(p.x + offset.0, p.y + offset.1));
        let (label, coords, occupancy) = match task {
            Task::Authentication => (
                subjects[category].subject_id.clone(),
                None,
                Occupancy::Static {
                    profile: &subjects[category],
                    position: jittered(scene.anchor),
                },
            ),
            Task::GridLocalization | Task::CoordLocalization => {
                let p = positions[category];
                let (label, coords) = if task == Task::GridLocalization {
                    (format!("pos_{category}"), None)
                } else {
                    (format!("loc_{category}"), Some((p.x, p.y)))
                };
                (
                    label,
                    coords,
                    Occupancy::Static {
                        profile: &subjects[0],
                        position: jittered(p),
                    },
                )
            }
            Task::Activity => (
                scripts[category].activity_id.clone(),
                None,
                Occupancy::Scripted {
                    profile: &subjects[0],
                    script: &scripts[category],
                    offset,
                },
            ),
        };
        let features = simulate_sweep(scene, &occupancy, Some(&mut r))?
            .into_iter()
            .map(quantize_power)
            .collect();
        Ok(LabeledSample {
            sample_id: format!("{}_{index:05}", task.as_str().replace('-', "")),
            label,
            coords,
            features,
        })
    };
    let total = categories * samples_per_category;
    #[cfg(feature = "parallel")]
    let samples: Vec<LabeledSample> = {
        use rayon::prelude::*;
        (0..total).into_par_iter().map(make_sample).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let samples: Vec<LabeledSample> = (0..total).map(make_sample).collect::<Result<_>>()?;
    Dataset::new(task, scene.sensor_ids(), scene.bands(), samples)
}

/// Power of each frame after synthesis, for consistency checks.
pub fn recovered_powers(frames: &[IqFrame]) -> Result<Vec<f64>> {
    frames.iter().map(band_average_power).collect()
}

/// Parses the sectioned `key = value` scene file.
///
/// ```text
/// [room]
/// width = 6.0
/// height = 5.0
/// grid_spacing = 1.8
/// body_radius = 0.35
/// jitter = 0.03
/// activity_zone = 1.0
/// emission = -14
/// anchor = 3.0, 2.5
/// [sensors]
/// 0 = 3.0, 3.8
/// [transmitters]
/// tv = 0.3, 0.4
/// [subjects]
/// alice = radius, base, amplitude, cycles, phase
/// [activities]
/// walking = x, y, posture; x, y, posture
/// [noise]
/// sigma_db = 1.0
/// [seed]
/// value = 42
/// ```
pub fn parse_scene_config(text: &str) -> Result<(SceneLayout, Option<u64>)> {
    const CTX: &str = "scene config";
    let mut layout = SceneLayout {
        width_m: 0.0,
        height_m: 0.0,
        sensors: Vec::new(),
        transmitters: Vec::new(),
        subjects: Vec::new(),
        activities: Vec::new(),
        noise_sigma_db: 0.0,
        body_radius_m: 0.35,
        grid_spacing_m: DEFAULT_GRID_SPACING_M,
        anchor: None,
        position_jitter_m: 0.0,
        activity_zone_m: 1.0,
        emission_db: -14.0,
    };
    let mut seed = None;
    let mut section = String::new();
    let nums = |v: &str, n: usize, line: usize| -> Result<Vec<f64>> {
        let parts: Vec<f64> = v
            .split(',')
            .map(|t| io::parse_f64(t, CTX, line))
            .collect::<Result<_>>()?;
        if parts.len() != n {
            return Err(Error::parse(CTX, line, format!("expected {n} comma-separated numbers")));
        }
        Ok(parts)
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            if ![
                "room",
                "sensors",
                "transmitters",
                "subjects",
                "activities",
                "noise",
                "seed",
            ]
            .contains(&section.as_str())
            {
                return Err(Error::parse(CTX, line, format!("unknown section [{section}]")));
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::parse(CTX, line, "expected key = value"))?;
        match (section.as_str(), key) {
            ("room", "width") => layout.width_m = nums(value, 1, line)?[0],
            ("room", "height") => layout.height_m = nums(value, 1, line)?[0],
            ("room", "grid_spacing") => layout.grid_spacing_m = nums(value, 1, line)?[0],
            ("room", "body_radius") => layout.body_radius_m = nums(value, 1, line)?[0],
            ("room", "jitter") => layout.position_jitter_m = nums(value, 1, line)?[0],
            ("room", "activity_zone") => layout.activity_zone_m = nums(value, 1, line)?[0],
            ("room", "emission") => layout.emission_db = nums(value, 1, line)?[0],
            ("room", "anchor") => {
                let v = nums(value, 2, line)?;
                layout.anchor = Some(Point::new(v[0], v[1]));
            }
            ("sensors", id) => {
                let sensor_id = id
                    .parse::<u32>()
                    .map_err(|_| Error::parse(CTX, line, format!("sensor key {id:?} must be an integer id")))?;
                let v = nums(value, 2, line)?;
                layout.sensors.push(SensorSpec {
                    sensor_id,
                    position: Point::new(v[0], v[1]),
                });
            }
            ("transmitters", _) => {
                let v = nums(value, 2, line)?;
                layout.transmitters.push(Point::new(v[0], v[1]));
            }
            ("subjects", id) => {
                let v = nums(value, 5, line)?;
                layout.subjects.push(SubjectSpec {
                    subject_id: id.to_string(),
                    body_radius_m: v[0],
                    base: v[1],
                    amplitude: v[2],
                    cycles: v[3],
                    phase: v[4],
                });
            }
            ("activities", id) => {
                let waypoints = value
                    .split(';')
                    .map(|w| {
                        let v = nums(w, 3, line)?;
                        Ok(Waypoint {
                            position: Point::new(v[0], v[1]),
                            posture: v[2],
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                layout.activities.push(ActivityScript {
                    activity_id: id.to_string(),
                    waypoints,
                });
            }
            ("noise", "sigma_db") => layout.noise_sigma_db = nums(value, 1, line)?[0],
            ("seed", "value") => {
                seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| Error::parse(CTX, line, "seed must be an unsigned integer"))?,
                )
            }
            (sec, k) => return Err(Error::parse(CTX, line, format!("unknown key {k:?} in section [{sec}]"))),
        }
    }
    Ok((layout, seed))
}

/// Writes a layout back out in the config format.
pub fn scene_config_text(layout: &SceneLayout, seed: u64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[room]");
    let _ = writeln!(out, "width = {}", layout.width_m);
    let _ = writeln!(out, "height = {}", layout.height_m);
    let _ = writeln!(out, "grid_spacing = {}", layout.grid_spacing_m);
    let _ = writeln!(out, "body_radius = {}", layout.body_radius_m);
    let _ = writeln!(out, "jitter = {}", layout.position_jitter_m);
    let _ = writeln!(out, "activity_zone = {}", layout.activity_zone_m);
    let _ = writeln!(out, "emission = {}", layout.emission_db);
    if let Some(a) = layout.anchor {
        let _ = writeln!(out, "anchor = {}, {}", a.x, a.y);
    }
    let _ = writeln!(out, "\n[sensors]");
    for s in &layout.sensors {
        let _ = writeln!(out, "{} = {}, {}", s.sensor_id, s.position.x, s.position.y);
    }
    let _ = writeln!(out, "\n[transmitters]");
    for (i, t) in layout.transmitters.iter().enumerate() {
        let _ = writeln!(out, "tx{i} = {}, {}", t.x, t.y);
    }
    if !layout.subjects.is_empty() {
        let _ = writeln!(out, "\n[subjects]");
        for s in &layout.subjects {
            let _ = writeln!(
                out,
                "{} = {}, {}, {}, {}, {}",
                s.subject_id, s.body_radius_m, s.base, s.amplitude, s.cycles, s.phase
            );
        }
    }
    if !layout.activities.is_empty() {
        let _ = writeln!(out, "\n[activities]");
        for a in &layout.activities {
            let pts: Vec<String> = a
                .waypoints
                .iter()
                .map(|w| format!("{}, {}, {}", w.position.x, w.position.y, w.posture))
                .collect();
            let _ = writeln!(out, "{} = {}", a.activity_id, pts.join("; "));
        }
    }
    let _ = writeln!(out, "\n[noise]\nsigma_db = {}", layout.noise_sigma_db);
    let _ = writeln!(out, "\n[seed]\nvalue = {seed}");
    out
}

pub fn load_scene(path: impl AsRef<Path>, plan: BandPlan, default_seed: u64) -> Result<Scene> {
    let path = path.as_ref();
    let text = io::read_to_string(path)?;
    let (layout, seed) = parse_scene_config(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            context: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })?;
    Scene::build(layout, plan, seed.unwrap_or(default_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_tx_scene(noise: f64) -> Scene {
        let layout = SceneLayout {
            width_m: 10.0,
            height_m: 10.0,
            sensors: vec![SensorSpec {
                sensor_id: 0,
                position: Point::new(8.0, 5.0),
            }],
            transmitters: vec![Point::new(2.0, 5.0)],
            subjects: Vec::new(),
            activities: Vec::new(),
            noise_sigma_db: noise,
            body_radius_m: 0.3,
            grid_spacing_m: 1.8,
            anchor: None,
            position_jitter_m: 0.0,
            activity_zone_m: 1.0,
            emission_db: -10.0,
        };
        Scene::build(layout, BandPlan::default(), 3).unwrap()
    }

    #[test]
    fn path_gain_cases() {
        assert_eq!(path_gain_db(1.0).unwrap(), 0.0);
        assert!((path_gain_db(10.0).unwrap() + 20.0).abs() < 1e-12);
        assert_eq!(path_gain_db(0.05).unwrap(), path_gain_db(0.1).unwrap());
        assert!(path_gain_db(0.0).is_err());
        assert!(path_gain_db(-1.0).is_err());
    }

    #[test]
    fn shadowing_cases() {
        let (tx, rx) = (Point::new(0.0, 0.0), Point::new(4.0, 0.0));
        let on = shadowing_factor(Point::new(2.0, 0.0), 0.3, 0.5, tx, rx).unwrap();
        assert!((on - 0.5).abs() < 1e-15);
        let far = shadowing_factor(Point::new(2.0, 50.0), 0.3, 0.9, tx, rx).unwrap();
        assert!((far - 1.0).abs() < 1e-12);
        assert_eq!(shadowing_factor(Point::new(2.0, 0.0), 0.3, 0.0, tx, rx).unwrap(), 1.0);
        // beyond the endpoint the distance is to the endpoint, not the line
        let past = shadowing_factor(Point::new(7.0, 0.0), 1.0, 1.0, tx, rx).unwrap();
        assert!((past - (1.0 - (-9.0f64).exp())).abs() < 1e-15);
        assert!(shadowing_factor(Point::new(0.0, 0.0), 0.0, 0.5, tx, rx).is_err());
        assert!(shadowing_factor(Point::new(0.0, 0.0), 1.0, 1.5, tx, rx).is_err());
    }

    #[test]
    fn unoccupied_single_transmitter_is_closed_form() {
        let scene = single_tx_scene(0.0);
        let p = expected_band_power(&scene, 17, None).unwrap();
        let expected = scene.transmitters[0].baseline_spectrum_db[17] + path_gain_db(6.0).unwrap();
        assert!((p[0] - expected).abs() < 1e-12);
        let mut r = rng::stream(1, 1);
        assert_eq!(simulate_band_power(&scene, 17, None, &mut r).unwrap(), p);
    }

    #[test]
    fn transparent_subject_changes_nothing() {
        let scene = single_tx_scene(0.0);
        let s = SubjectState {
            position: Point::new(5.0, 5.0),
            radius: 0.4,
            absorption: 0.0,
        };
        assert_eq!(
            expected_band_power(&scene, 3, Some(&s)).unwrap(),
            expected_band_power(&scene, 3, None).unwrap()
        );
    }

    #[test]
    fn colocated_transmitters_add_three_db() {
        let one = single_tx_scene(0.0);
        let mut two = one.clone();
        two.transmitters.push(two.transmitters[0].clone());
        let d = expected_band_power(&two, 50, None).unwrap()[0] - expected_band_power(&one, 50, None).unwrap()[0];
        assert!((d - 10.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn band_index_out_of_plan_is_rejected() {
        assert!(expected_band_power(&single_tx_scene(0.0), 101, None).is_err());
    }

    #[test]
    fn synth_frame_hits_target() {
        let f = synth_iq_frame(-20.0, 4800, 1).unwrap();
        assert_eq!(f.bytes().len(), 4800);
        let p = band_average_power(&f).unwrap();
        assert!((p + 20.0).abs() < 0.15, "{p}");
        for t in [-40.0, -33.3, -10.0, -1.0, 0.0] {
            let p = band_average_power(&synth_iq_frame(t, 4800, 9).unwrap()).unwrap();
            assert!((p - t).abs() < 0.15, "target {t} got {p}");
        }
    }

    #[test]
    fn synth_frame_range_and_determinism() {
        assert!(synth_iq_frame(3.0103, 4800, 1).is_err());
        assert!(synth_iq_frame(-41.0, 4800, 1).is_err());
        assert!(synth_iq_frame(-20.0, 510, 1).is_err());
        assert!(synth_iq_frame(-20.0, 513, 1).is_err());
        assert_eq!(
            synth_iq_frame(-12.0, 4800, 5).unwrap(),
            synth_iq_frame(-12.0, 4800, 5).unwrap()
        );
        assert_ne!(
            synth_iq_frame(-12.0, 4800, 5).unwrap(),
            synth_iq_frame(-12.0, 4800, 6).unwrap()
        );
    }

    #[test]
    fn activity_script_interpolates_over_bands() {
        let s = ActivityScript {
            activity_id: "walk".into(),
            waypoints: vec![
                Waypoint {
                    position: Point::new(0.0, 0.0),
                    posture: 1.0,
                },
                Waypoint {
                    position: Point::new(2.0, 4.0),
                    posture: 0.5,
                },
            ],
        };
        assert_eq!(s.state_at(0, 101).position, Point::new(0.0, 0.0));
        assert_eq!(s.state_at(100, 101).position, Point::new(2.0, 4.0));
        let mid = s.state_at(50, 101);
        assert!((mid.position.x - 1.0).abs() < 1e-12 && (mid.posture - 0.75).abs() < 1e-12);
    }

    #[test]
    fn dataset_counts_for_each_task() {
        let auth = generate_dataset(&Scenario::LivingRoom.scene(42).unwrap(), Task::Authentication, 7, 20, 1).unwrap();
        assert_eq!(auth.len(), 140);
        assert_eq!(auth.classes().len(), 7);
        assert_eq!(auth.feature_len(), 505);

        let coord = generate_dataset(
            &Scenario::Classroom.scene(42).unwrap(),
            Task::CoordLocalization,
            20,
            2,
            1,
        )
        .unwrap();
        assert_eq!(coord.len(), 40);
        let locs = crate::dataset::locations(&coord).unwrap();
        assert_eq!(locs.len(), 20);
        // neighbouring grid points sit 1.8 m apart
        let min_gap = locs
            .iter()
            .enumerate()
            .flat_map(|(i, a)| locs[i + 1..].iter().map(move |b| (a.0 - b.0).hypot(a.1 - b.1)))
            .fold(f64::INFINITY, f64::min);
        assert!((min_gap - 1.8).abs() < 1e-9);

        let act = generate_dataset(&Scenario::Laboratory.scene(42).unwrap(), Task::Activity, 8, 3, 1).unwrap();
        assert_eq!(act.len(), 24);
        assert_eq!(act.classes().len(), 8);
    }

    #[test]
    fn grid_that_does_not_fit_is_rejected() {
        let scene = Scenario::Vehicle.scene(1).unwrap();
        assert!(generate_dataset(&scene, Task::GridLocalization, 20, 1, 1).is_err());
    }

    #[test]
    fn indistinguishable_subjects_are_rejected() {
        let mut layout = Scenario::LivingRoom.layout();
        let spec = SubjectSpec {
            subject_id: "a".into(),
            body_radius_m: 0.3,
            base: 0.5,
            amplitude: 0.1,
            cycles: 1.0,
            phase: 0.0,
        };
        layout.subjects = vec![
            spec.clone(),
            SubjectSpec {
                subject_id: "b".into(),
                ..spec
            },
        ];
        let scene = Scene::build(layout, BandPlan::default(), 1).unwrap();
        let err = generate_dataset(&scene, Task::Authentication, 2, 2, 1).unwrap_err();
        assert!(err.to_string().contains("cannot tell"));
    }

    #[test]
    fn generation_is_deterministic() {
        let scene = Scenario::Vehicle.scene(7).unwrap();
        let a = generate_dataset(&scene, Task::GridLocalization, 4, 3, 11).unwrap();
        let b = generate_dataset(&scene, Task::GridLocalization, 4, 3, 11).unwrap();
        assert_eq!(crate::dataset::dataset_to_csv(&a), crate::dataset::dataset_to_csv(&b));
        let c = generate_dataset(&scene, Task::GridLocalization, 4, 3, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scene_rejects_bad_layouts() {
        let mut l = Scenario::LivingRoom.layout();
        l.sensors[0].position = Point::new(-1.0, 0.0);
        assert!(Scene::build(l, BandPlan::default(), 1).is_err());
        let mut l = Scenario::LivingRoom.layout();
        l.transmitters.clear();
        assert!(Scene::build(l, BandPlan::default(), 1).is_err());
        let mut l = Scenario::LivingRoom.layout();
        l.noise_sigma_db = -1.0;
        assert!(Scene::build(l, BandPlan::default(), 1).is_err());
        let mut l = Scenario::LivingRoom.layout();
        l.sensors[1].sensor_id = 0;
        assert!(Scene::build(l, BandPlan::default(), 1).is_err());
    }

    #[test]
    fn scene_config_round_trip() {
        let mut layout = Scenario::Laboratory.layout();
        layout.subjects.push(SubjectSpec {
            subject_id: "alice".into(),
            body_radius_m: 0.3,
            base: 0.5,
            amplitude: 0.2,
            cycles: 1.5,
            phase: 0.25,
        });
        layout.activities.push(ActivityScript {
            activity_id: "pace".into(),
            waypoints: vec![
                Waypoint {
                    position: Point::new(1.0, 1.0),
                    posture: 1.0,
                },
                Waypoint {
                    position: Point::new(2.0, 1.5),
                    posture: 0.9,
                },
            ],
        });
        layout.anchor = Some(Point::new(2.0, 2.0));
        let text = scene_config_text(&layout, 99);
        let (back, seed) = parse_scene_config(&text).unwrap();
        assert_eq!(seed, Some(99));
        assert_eq!(back, layout);
    }

    #[test]
    fn scene_config_errors_name_the_line() {
        let err = parse_scene_config("[room]\nwidth = 5\nheight = x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(matches!(
            parse_scene_config("[bogus]\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_scene_config("[room]\ncolor = 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn subject_never_raises_power(
            bx in 0.0f64..10.0, by in 0.0f64..10.0,
            radius in 0.05f64..1.5, a in 0.0f64..1.0, band in 0usize..101)
        {
            let scene = Scenario::Classroom.scene(5).unwrap();
            let s = SubjectState { position: Point::new(bx, by.min(8.0)), radius, absorption: a };
            let occupied = expected_band_power(&scene, band, Some(&s)).unwrap();
            let empty = expected_band_power(&scene, band, None).unwrap();
            for (o, e) in occupied.iter().zip(&empty) {
                prop_assert!(o <= e);
            }
        }

        #[test]
        fn shadowing_stays_in_unit_interval(
            bx in -5.0f64..5.0, by in -5.0f64..5.0, r in 0.01f64..3.0, a in 0.0f64..=1.0,
            tx in (-5.0f64..5.0, -5.0f64..5.0), rx in (-5.0f64..5.0, -5.0f64..5.0))
        {
            let f = shadowing_factor(Point::new(bx, by), r, a,
                Point::new(tx.0, tx.1), Point::new(rx.0, rx.1)).unwrap();
            prop_assert!(f >= 1.0 - a - 1e-15 && f <= 1.0);
        }
    }
}
