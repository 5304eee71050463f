//! Band power estimation and feature assembly.
//!
//! A sensor retunes across a [`BandPlan`] and captures one [`IqFrame`] per
//! band center. Each frame collapses to a single average power in dB; the
//! per-sensor powers form a [`SpectrumSweep`], and sweeps from all sensors
//! concatenate (sensor-major) into a [`FeatureVector`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

/// Default sweep start, 300 MHz.
pub const DEFAULT_START_HZ: u64 = 300_000_000;
/// Default sweep stop, 420 MHz (inclusive).
pub const DEFAULT_STOP_HZ: u64 = 420_000_000;
/// Default retune step, 1.2 MHz.
pub const DEFAULT_STEP_HZ: u64 = 1_200_000;
/// RTL-SDR sample rate used for captures.
pub const DEFAULT_SAMPLE_RATE_HZ: u64 = 2_400_000;
/// Bytes per capture (2400 complex samples).
pub const DEFAULT_FRAME_BYTES: usize = 4800;

const IQ_MAGIC: &[u8; 4] = b"SHIQ";
const IQ_HEADER_LEN: usize = 4 + 4 + 8 + 8 + 4;
const MIN_LINEAR_POWER: f64 = 1e-30;

/// One raw capture: unsigned 8-bit samples interleaved I,Q,I,Q,...
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IqFrame {
    pub sensor_id: u32,
    pub center_freq_hz: u64,
    pub sample_rate_hz: u64,
    bytes: Vec<u8>,
}

impl IqFrame {
    pub fn new(sensor_id: u32, center_freq_hz: u64, sample_rate_hz: u64, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < 2 || !bytes.len().is_multiple_of(2) {
            return Err(Error::Frame(format!(
                "byte count must be even and at least 2, got {}",
                bytes.len()
            )));
        }
        Ok(Self {
            sensor_id,
            center_freq_hz,
            sample_rate_hz,
            bytes,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Number of complex samples (N/2).
    pub fn complex_len(&self) -> usize {
        self.bytes.len() / 2
    }
}

/// Average power of one capture in dB relative to full scale.
///
/// Every byte is mapped to `b/127.5 - 1`, squared, summed over all N
/// components, and divided by the N/2 complex samples.
pub fn band_average_power(frame: &IqFrame) -> Result<f64> {
    let sum: f64 = frame
        .bytes
        .iter()
        .map(|&b| {
            let v = f64::from(b) / 127.5 - 1.0;
            v * v
        })
        .sum();
    let linear = sum / (frame.bytes.len() as f64 / 2.0);
    if linear < MIN_LINEAR_POWER {
        return Err(Error::ZeroPower);
    }
    Ok(10.0 * linear.log10())
}

/// Sweep definition with band centers inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BandPlan {
    start_hz: u64,
    stop_hz: u64,
    step_hz: u64,
}

impl Default for BandPlan {
    fn default() -> Self {
        Self {
            start_hz: DEFAULT_START_HZ,
            stop_hz: DEFAULT_STOP_HZ,
            step_hz: DEFAULT_STEP_HZ,
        }
    }
}

impl BandPlan {
    pub fn new(start_hz: u64, stop_hz: u64, step_hz: u64) -> Result<Self> {
        if stop_hz <= start_hz {
            return Err(Error::Config(format!(
                "band stop {stop_hz} Hz must exceed start {start_hz} Hz"
            )));
        }
        if step_hz == 0 {
            return Err(Error::Config("band step must be positive".into()));
        }
        if !(stop_hz - start_hz).is_multiple_of(step_hz) {
            return Err(Error::Config(format!(
                "band span {} Hz is not a multiple of step {step_hz} Hz",
                stop_hz - start_hz
            )));
        }
        Ok(Self {
            start_hz,
            stop_hz,
            step_hz,
        })
    }

    pub fn start_hz(&self) -> u64 {
        self.start_hz
    }

    pub fn stop_hz(&self) -> u64 {
        self.stop_hz
    }

    pub fn step_hz(&self) -> u64 {
        self.step_hz
    }

    pub fn band_count(&self) -> usize {
        ((self.stop_hz - self.start_hz) / self.step_hz) as usize + 1
    }

    pub fn center(&self, index: usize) -> u64 {
        self.start_hz + index as u64 * self.step_hz
    }

    /// Index of `freq_hz` if it is one of the plan's centers.
    pub fn index_of(&self, freq_hz: u64) -> Option<usize> {
        if freq_hz < self.start_hz || freq_hz > self.stop_hz {
            return None;
        }
        let off = freq_hz - self.start_hz;
        off.is_multiple_of(self.step_hz).then(|| (off / self.step_hz) as usize)
    }
}

/// Band centers start, start+step, ..., stop.
pub fn band_centers(plan: &BandPlan) -> Result<Vec<u64>> {
    // Re-validate: a plan may have been built by struct update in a test.
    let plan = BandPlan::new(plan.start_hz, plan.stop_hz, plan.step_hz)?;
    Ok((0..plan.band_count()).map(|i| plan.center(i)).collect())
}

/// Per-band powers from one sensor, ascending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSweep {
    pub sensor_id: u32,
    pub band_plan: BandPlan,
    powers_db: Vec<f64>,
}

impl SpectrumSweep {
    pub fn new(sensor_id: u32, band_plan: BandPlan, powers_db: Vec<f64>) -> Result<Self> {
        if powers_db.len() != band_plan.band_count() {
            return Err(Error::Dimension {
                expected: band_plan.band_count(),
                actual: powers_db.len(),
            });
        }
        if let Some(i) = powers_db.iter().position(|p| !p.is_finite()) {
            return Err(Error::Ingest(format!("non-finite power at {} Hz", band_plan.center(i))));
        }
        Ok(Self {
            sensor_id,
            band_plan,
            powers_db,
        })
    }

    pub fn powers_db(&self) -> &[f64] {
        &self.powers_db
    }
}

/// Builds a sweep from exactly one frame per band center.
pub fn assemble_sweep(frames: &[IqFrame], plan: &BandPlan) -> Result<SpectrumSweep> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Ingest("no frames supplied".into()))?;
    let sensor_id = first.sensor_id;
    let mut slots: Vec<Option<&IqFrame>> = vec![None; plan.band_count()];
    for frame in frames {
        if frame.sensor_id != sensor_id {
            return Err(Error::Ingest(format!(
                "frame at {} Hz belongs to sensor {}, expected sensor {sensor_id}",
                frame.center_freq_hz, frame.sensor_id
            )));
        }
        let idx = plan.index_of(frame.center_freq_hz).ok_or_else(|| {
            Error::Ingest(format!(
                "frame center {} Hz is not a band center of the plan",
                frame.center_freq_hz
            ))
        })?;
        if slots[idx].replace(frame).is_some() {
            return Err(Error::Ingest(format!(
                "duplicate frame for band center {} Hz",
                frame.center_freq_hz
            )));
        }
    }
    let mut powers = Vec::with_capacity(slots.len());
    for (i, slot) in slots.iter().enumerate() {
        let frame =
            slot.ok_or_else(|| Error::Ingest(format!("missing frame for band center {} Hz", plan.center(i))))?;
        powers.push(band_average_power(frame)?);
    }
    SpectrumSweep::new(sensor_id, *plan, powers)
}

/// Multi-sensor feature vector, sensor-major then ascending frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    sensor_ids: Vec<u32>,
    bands_per_sensor: usize,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, sensor_ids: Vec<u32>, bands_per_sensor: usize) -> Result<Self> {
        let expected = sensor_ids.len() * bands_per_sensor;
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: values.len(),
            });
        }
        if sensor_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sensor ids must be strictly ascending".into()));
        }
        Ok(Self {
            values,
            sensor_ids,
            bands_per_sensor,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sensor_ids(&self) -> &[u32] {
        &self.sensor_ids
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_ids.len()
    }

    pub fn bands_per_sensor(&self) -> usize {
        self.bands_per_sensor
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps only the first `m` sensors (by ascending id).
    pub fn sensor_prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.sensor_count() {
            return Err(Error::Config(format!(
                "sensor prefix {m} outside 1..={}",
                self.sensor_count()
            )));
        }
        Self::new(
            self.values[..m * self.bands_per_sensor].to_vec(),
            self.sensor_ids[..m].to_vec(),
            self.bands_per_sensor,
        )
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Concatenates sweeps in ascending sensor order.
pub fn stack_features(sweeps: &[SpectrumSweep]) -> Result<FeatureVector> {
    let first = sweeps
        .first()
        .ok_or_else(|| Error::Ingest("no sweeps supplied".into()))?;
    let mut ordered: Vec<&SpectrumSweep> = sweeps.iter().collect();
    ordered.sort_by_key(|s| s.sensor_id);
    for pair in ordered.windows(2) {
        if pair[0].sensor_id == pair[1].sensor_id {
            return Err(Error::Ingest(format!(
                "duplicate sweep for sensor {}",
                pair[0].sensor_id
            )));
        }
    }
    if let Some(s) = sweeps.iter().find(|s| s.band_plan != first.band_plan) {
        return Err(Error::Ingest(format!(
            "sensor {} uses a different band plan than sensor {}",
            s.sensor_id, first.sensor_id
        )));
    }
    let values = ordered.iter().flat_map(|s| s.powers_db.iter().copied()).collect();
    let ids = ordered.iter().map(|s| s.sensor_id).collect();
    FeatureVector::new(values, ids, first.band_plan.band_count())
}

/// Per-feature z-score statistics fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Standard deviations below this are replaced by 1.
pub const STD_FLOOR: f64 = 1e-12;

impl Normalizer {
    pub fn fit<R: AsRef<[f64]>>(train: &[R]) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::Config(format!(
                "normalizer needs at least 2 training vectors, got {}",
                train.len()
            )));
        }
        let d = train[0].as_ref().len();
        let n = train.len() as f64;
        let mut mean = vec![0.0; d];
        for row in train {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    actual: row.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in train {
            for ((s, v), m) in var.iter_mut().zip(row.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < STD_FLOOR {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// Rebuilds a normalizer from stored statistics.
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::Dimension {
                expected: mean.len(),
                actual: std.len(),
            });
        }
        if std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("normalizer stddev entries must be positive".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check(values.len())?;
        Ok(values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn invert(&self, normalized: &[f64]) -> Result<Vec<f64>> {
        self.check(normalized.len())?;
        Ok(normalized
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| m + s * z)
            .collect())
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                actual: len,
            });
        }
        Ok(())
    }
}

pub fn fit_normalizer(train: &[FeatureVector]) -> Result<Normalizer> {
    Normalizer::fit(train)
}

pub fn apply_normalizer(norm: &Normalizer, fv: &FeatureVector) -> Result<FeatureVector> {
    FeatureVector::new(norm.apply(fv.values())?, fv.sensor_ids.clone(), fv.bands_per_sensor)
}

/// Serializes frames as consecutive `SHIQ` records.
pub fn encode_iq(frames: &[IqFrame]) -> Vec<u8> {
    let total: usize = frames.iter().map(|f| IQ_HEADER_LEN + f.bytes.len()).sum();
    let mut out = Vec::with_capacity(total);
    for f in frames {
        out.extend_from_slice(IQ_MAGIC);
        out.extend_from_slice(&f.sensor_id.to_le_bytes());
        out.extend_from_slice(&f.center_freq_hz.to_le_bytes());
        out.extend_from_slice(&f.sample_rate_hz.to_le_bytes());
        out.extend_from_slice(&(f.bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&f.bytes);
    }
    out
}

/// Parses one or more consecutive `SHIQ` records.
pub fn decode_iq(data: &[u8]) -> Result<Vec<IqFrame>> {
    let mut frames = Vec::new();
    let mut pos = 0;
    while pos < data.len() {
        let header = data
            .get(pos..pos + IQ_HEADER_LEN)
            .ok_or_else(|| Error::Frame(format!("truncated header at byte offset {pos}")))?;
        if &header[..4] != IQ_MAGIC {
            return Err(Error::Frame(format!("bad magic at byte offset {pos}")));
        }
        let sensor_id = u32::from_le_bytes(header[4..8].try_into().unwrap());
        let center = u64::from_le_bytes(header[8..16].try_into().unwrap());
        let rate = u64::from_le_bytes(header[16..24].try_into().unwrap());
        let count = u32::from_le_bytes(header[24..28].try_into().unwrap()) as usize;
        pos += IQ_HEADER_LEN;
        let body = data.get(pos..pos + count).ok_or_else(|| {
            Error::Frame(format!(
                "record at {center} Hz declares {count} bytes but only {} remain",
                data.len() - pos
            ))
        })?;
        frames.push(IqFrame::new(sensor_id, center, rate, body.to_vec())?);
        pos += count;
    }
    Ok(frames)
}

pub fn read_iq_file(path: impl AsRef<Path>) -> Result<Vec<IqFrame>> {
    let path = path.as_ref();
    let data = io::read_bytes(path)?;
    decode_iq(&data).map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))
}

pub fn write_iq_file(path: impl AsRef<Path>, frames: &[IqFrame]) -> Result<()> {
    io::write_atomic(path.as_ref(), &encode_iq(frames))
}

const SWEEP_HEADER: &str = "sensor_id,freq_hz,power_db";

/// Sweep CSV: `sensor_id,freq_hz,power_db`, ascending frequency per sensor.
pub fn sweeps_to_csv(sweeps: &[SpectrumSweep]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for s in sweeps {
        for (i, p) in s.powers_db.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", s.sensor_id, s.band_plan.center(i), p);
        }
    }
    out
}

pub fn sweeps_from_csv(text: &str) -> Result<Vec<SpectrumSweep>> {
    const CTX: &str = "sweep csv";
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SWEEP_HEADER => {}
        _ => return Err(Error::parse(CTX, 1, format!("expected header `{SWEEP_HEADER}`"))),
    }
    let mut per_sensor: BTreeMap<u32, Vec<(u64, f64)>> = BTreeMap::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                CTX,
                lineno,
                format!("expected 3 columns, got {}", cols.len()),
            ));
        }
        let sensor = cols[0]
            .trim()
            .parse::<u32>()
            .map_err(|_| Error::parse(CTX, lineno, "bad sensor_id"))?;
        let freq = cols[1]
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::parse(CTX, lineno, "bad freq_hz"))?;
        let power = io::parse_f64(cols[2], CTX, lineno)?;
        let rows = per_sensor.entry(sensor).or_default();
        if rows.last().is_some_and(|&(f, _)| f >= freq) {
            return Err(Error::parse(CTX, lineno, "frequencies must ascend within a sensor"));
        }
        rows.push((freq, power));
    }
    let mut sweeps = Vec::with_capacity(per_sensor.len());
    for (sensor, rows) in per_sensor {
        let plan = if rows.len() < 2 {
            return Err(Error::Ingest(format!("sensor {sensor} has fewer than 2 bands")));
        } else {
            let step = rows[1].0 - rows[0].0;
            BandPlan::new(rows[0].0, rows[rows.len() - 1].0, step)?
        };
        if let Some(i) = (0..rows.len()).find(|&i| rows[i].0 != plan.center(i)) {
            return Err(Error::Ingest(format!(
                "sensor {sensor}: irregular band spacing at {} Hz",
                rows[i].0
            )));
        }
        sweeps.push(SpectrumSweep::new(
            sensor,
            plan,
            rows.into_iter().map(|r| r.1).collect(),
        )?);
    }
    Ok(sweeps)
}
