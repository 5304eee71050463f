//! Labeled samples, the dataset CSV format, and train/test splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::io;
use crate::rng;
use crate::spectrum::FeatureVector;

/// Sensing task a dataset was collected for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Authentication,
    GridLocalization,
    CoordLocalization,
    Activity,
}

impl Task {
    pub const ALL: [Task; 4] = [
        Task::Authentication,
        Task::GridLocalization,
        Task::CoordLocalization,
        Task::Activity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Authentication => "auth",
            Task::GridLocalization => "grid-loc",
            Task::CoordLocalization => "coord-loc",
            Task::Activity => "activity",
        }
    }

    /// True when samples carry (x, y) targets rather than a category.
    pub fn is_regression(self) -> bool {
        self == Task::CoordLocalization
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown task {s:?} (expected auth|grid-loc|coord-loc|activity)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub sample_id: String,
    /// Subject, grid cell, or activity name. May be empty for coordinate tasks.
    pub label: String,
    pub coords: Option<(f64, f64)>,
    pub features: Vec<f64>,
}

impl LabeledSample {
    /// Key used to group samples into classes for stratification.
    pub fn class_key(&self) -> String {
        match (&self.label, self.coords) {
            (l, _) if !l.is_empty() => l.clone(),
            (_, Some((x, y))) => format!("{x}:{y}"),
            _ => String::new(),
        }
    }
}

/// Samples sharing one task and feature layout. Feature values are stored
/// at the 9 significant digits the CSV format keeps.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    task: Task,
    sensor_ids: Vec<u32>,
    bands_per_sensor: usize,
    samples: Vec<LabeledSample>,
}

fn check_token(kind: &str, s: &str) -> Result<()> {
    if s.contains([',', '\n', '\r']) || s.chars().any(char::is_whitespace) {
        return Err(Error::Config(format!(
            "{kind} {s:?} must not contain commas or whitespace"
        )));
    }
    Ok(())
}

impl Dataset {
    pub fn new(task: Task, sensor_ids: Vec<u32>, bands_per_sensor: usize, samples: Vec<LabeledSample>) -> Result<Self> {
        if sensor_ids.is_empty() || bands_per_sensor == 0 {
            return Err(Error::Config("dataset needs at least one sensor and one band".into()));
        }
        if sensor_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sensor ids must be strictly ascending".into()));
        }
        let mut d = Self {
            task,
            sensor_ids,
            bands_per_sensor,
            samples: Vec::with_capacity(samples.len()),
        };
        let mut seen = HashSet::new();
        for mut s in samples {
            s.features.iter_mut().for_each(|v| *v = quantize_power(*v));
            if !seen.insert(s.sample_id.clone()) {
                return Err(Error::Config(format!("duplicate sample id {:?}", s.sample_id)));
            }
            d.check_sample(&s)?;
            d.samples.push(s);
        }
        Ok(d)
    }

    fn check_sample(&self, s: &LabeledSample) -> Result<()> {
        if s.sample_id.is_empty() {
            return Err(Error::Config("empty sample id".into()));
        }
        check_token("sample id", &s.sample_id)?;
        check_token("label", &s.label)?;
        if s.features.len() != self.feature_len() {
            return Err(Error::Dimension {
                expected: self.feature_len(),
                actual: s.features.len(),
            });
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("sample {} has non-finite features", s.sample_id)));
        }
        if self.task.is_regression() {
            match s.coords {
                Some((x, y)) if x.is_finite() && y.is_finite() => {}
                _ => {
                    return Err(Error::Config(format!(
                        "sample {} of a coordinate task needs finite x,y",
                        s.sample_id
                    )))
                }
            }
        } else if s.label.is_empty() {
            return Err(Error::Config(format!("sample {} has an empty label", s.sample_id)));
        }
        Ok(())
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn sensor_ids(&self) -> &[u32] {
        &self.sensor_ids
    }

    pub fn bands_per_sensor(&self) -> usize {
        self.bands_per_sensor
    }

    pub fn feature_len(&self) -> usize {
        self.sensor_ids.len() * self.bands_per_sensor
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<&LabeledSample> {
        self.samples.iter().find(|s| s.sample_id == sample_id)
    }

    pub fn feature_vector(&self, index: usize) -> Result<FeatureVector> {
        FeatureVector::new(
            self.samples[index].features.clone(),
            self.sensor_ids.clone(),
            self.bands_per_sensor,
        )
    }

    /// Distinct class labels in sorted order.
    pub fn classes(&self) -> Vec<String> {
        let mut c: Vec<String> = self.samples.iter().map(LabeledSample::class_key).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Copy restricted to the first `m` sensors.
    pub fn sensor_prefix(&self, m: usize) -> Result<Dataset> {
        if m == 0 || m > self.sensor_ids.len() {
            return Err(Error::Config(format!(
                "sensor count {m} outside 1..={}",
                self.sensor_ids.len()
            )));
        }
        let keep = m * self.bands_per_sensor;
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledSample {
                features: s.features[..keep].to_vec(),
                ..s.clone()
            })
            .collect();
        Dataset::new(self.task, self.sensor_ids[..m].to_vec(), self.bands_per_sensor, samples)
    }

    /// Looks up samples by id, in the order given.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&LabeledSample>> {
        let index: BTreeMap<&str, &LabeledSample> = self.samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Split(format!("sample id {id:?} not in dataset")))
            })
            .collect()
    }
}

/// Rounds to 9 significant digits, the precision the CSV format stores.
pub fn quantize_power(v: f64) -> f64 {
    format!("{v:.8e}").parse().expect("formatted float parses")
}

const FIXED_COLUMNS: [&str; 5] = ["sample_id", "task", "label", "x", "y"];

pub fn dataset_to_csv(d: &Dataset) -> String {
    let mut out = String::with_capacity(d.len() * d.feature_len() * 12);
    out.push_str(&FIXED_COLUMNS.join(","));
    for sensor in &d.sensor_ids {
        for band in 0..d.bands_per_sensor {
            let _ = write!(out, ",f_{sensor}_{band}");
        }
    }
    out.push('\n');
    for s in &d.samples {
        let _ = write!(out, "{},{},{},", s.sample_id, d.task, s.label);
        if let Some((x, y)) = s.coords {
            let _ = write!(out, "{x},{y}");
        } else {
            out.push(',');
        }
        for v in &s.features {
            let _ = write!(out, ",{}", quantize_power(*v));
        }
        out.push('\n');
    }
    out
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    const CTX: &str = "dataset csv";
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, h)| h)
        .ok_or_else(|| Error::parse(CTX, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() <= FIXED_COLUMNS.len() || cols[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(Error::parse(
            CTX,
            1,
            "header must start with sample_id,task,label,x,y followed by feature columns",
        ));
    }
    let mut layout: Vec<(u32, usize)> = Vec::new();
    for col in &cols[FIXED_COLUMNS.len()..] {
        let parsed = col
            .strip_prefix("f_")
            .and_then(|rest| rest.split_once('_'))
            .and_then(|(s, b)| Some((s.parse::<u32>().ok()?, b.parse::<usize>().ok()?)));
        let (sensor, band) = parsed.ok_or_else(|| Error::parse(CTX, 1, format!("bad feature column {col:?}")))?;
        layout.push((sensor, band));
    }
    let mut sensor_ids: Vec<u32> = Vec::new();
    for &(s, _) in &layout {
        if sensor_ids.last() != Some(&s) {
            sensor_ids.push(s);
        }
    }
    if sensor_ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::parse(
            CTX,
            1,
            "feature columns must be sensor-major with ascending sensor ids",
        ));
    }
    let bands = layout.len() / sensor_ids.len();
    let expected: Vec<(u32, usize)> = sensor_ids
        .iter()
        .flat_map(|&s| (0..bands).map(move |b| (s, b)))
        .collect();
    if layout != expected {
        return Err(Error::parse(
            CTX,
            1,
            "feature columns must cover bands 0..B for every sensor, in order",
        ));
    }

    let mut task: Option<Task> = None;
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::parse(
                CTX,
                lineno,
                format!("ragged row: expected {} columns, got {}", cols.len(), fields.len()),
            ));
        }
        let row_task: Task = fields[1]
            .parse()
            .map_err(|e: Error| Error::parse(CTX, lineno, e.to_string()))?;
        match task {
            None => task = Some(row_task),
            Some(t) if t != row_task => {
                return Err(Error::parse(CTX, lineno, format!("task {row_task} differs from {t}")))
            }
            _ => {}
        }
        let coords = match (fields[3].trim(), fields[4].trim()) {
            ("", "") => None,
            (x, y) => Some((io::parse_f64(x, CTX, lineno)?, io::parse_f64(y, CTX, lineno)?)),
        };
        let features = fields[FIXED_COLUMNS.len()..]
            .iter()
            .map(|t| io::parse_f64(t, CTX, lineno))
            .collect::<Result<Vec<f64>>>()?;
        if !seen.insert(fields[0].to_string()) {
            return Err(Error::parse(
                CTX,
                lineno,
                format!("duplicate sample id {:?}", fields[0]),
            ));
        }
        let sample = LabeledSample {
            sample_id: fields[0].to_string(),
            label: fields[2].to_string(),
            coords,
            features,
        };
        samples.push((lineno, sample));
    }
    let task = task.ok_or_else(|| Error::parse(CTX, 2, "no samples"))?;
    let mut d = Dataset::new(task, sensor_ids, bands, Vec::new())?;
    for (lineno, s) in samples {
        d.check_sample(&s)
            .map_err(|e| Error::parse(CTX, lineno, e.to_string()))?;
        d.samples.push(s);
    }
    Ok(d)
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    io::write_atomic(path.as_ref(), dataset_to_csv(d).as_bytes())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    dataset_from_csv(&io::read_to_string(path)?).map_err(|e| e.in_file(path))
}

/// Train/test partition by sample id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    /// Checks disjointness, coverage of `d`, and that both sides are non-empty.
    pub fn validate(&self, d: &Dataset) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::Split("train and test sets must both be non-empty".into()));
        }
        let train: HashSet<&str> = self.train.iter().map(String::as_str).collect();
        let test: HashSet<&str> = self.test.iter().map(String::as_str).collect();
        if train.len() != self.train.len() || test.len() != self.test.len() {
            return Err(Error::Split("manifest lists an id twice".into()));
        }
        if let Some(id) = train.intersection(&test).next() {
            return Err(Error::Split(format!("sample {id:?} is in both train and test")));
        }
        if train.len() + test.len() != d.len() {
            return Err(Error::Split(format!(
                "manifest covers {} ids but dataset has {}",
                train.len() + test.len(),
                d.len()
            )));
        }
        if let Some(s) = d
            .samples()
            .iter()
            .find(|s| !train.contains(s.sample_id.as_str()) && !test.contains(s.sample_id.as_str()))
        {
            return Err(Error::Split(format!("sample {:?} missing from manifest", s.sample_id)));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for id in &self.train {
            let _ = writeln!(out, "train {id}");
        }
        for id in &self.test {
            let _ = writeln!(out, "test {id}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut m = SplitManifest {
            train: Vec::new(),
            test: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match line.split_once(' ') {
                Some(("train", id)) if !id.is_empty() => m.train.push(id.to_string()),
                Some(("test", id)) if !id.is_empty() => m.test.push(id.to_string()),
                _ => {
                    return Err(Error::parse(
                        "split manifest",
                        i + 1,
                        "expected `train <id>` or `test <id>`",
                    ))
                }
            }
        }
        Ok(m)
    }
}

pub fn save_split(m: &SplitManifest, path: impl AsRef<Path>) -> Result<()> {
    io::write_atomic(path.as_ref(), m.to_text().as_bytes())
}

pub fn load_split(path: impl AsRef<Path>) -> Result<SplitManifest> {
    let path = path.as_ref();
    SplitManifest::from_text(&io::read_to_string(path)?).map_err(|e| e.in_file(path))
}

const STRATIFIED_STREAM: u64 = 0x5354_5241;
const HOLDOUT_STREAM: u64 = 0x484f_4c44;

/// Per-class shuffled split; each class keeps `floor(n * fraction)` training
/// samples, clamped so both sides get at least one.
pub fn stratified_split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitManifest> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in d.samples().iter().enumerate() {
        classes.entry(s.class_key()).or_default().push(i);
    }
    let mut in_train = vec![false; d.len()];
    for (class_idx, (label, mut members)) in classes.into_iter().enumerate() {
        let n = members.len();
        if n < 2 {
            return Err(Error::Split(format!(
                "class {label:?} has {n} sample(s); need at least 2"
            )));
        }
        // tiny epsilon so 20 * 0.7 lands on 14 rather than 13.999...
        let k = ((n as f64 * train_fraction + 1e-9).floor() as usize).clamp(1, n - 1);
        let mut rng = rng::substream(seed, STRATIFIED_STREAM, class_idx as u64);
        members.shuffle(&mut rng);
        for &i in &members[..k] {
            in_train[i] = true;
        }
    }
    let m = partition(d, &in_train);
    m.validate(d)?;
    Ok(m)
}

fn partition(d: &Dataset, in_train: &[bool]) -> SplitManifest {
    let (train, test): (Vec<_>, Vec<_>) = d.samples().iter().zip(in_train).partition(|(_, &t)| t);
    SplitManifest {
        train: train.into_iter().map(|(s, _)| s.sample_id.clone()).collect(),
        test: test.into_iter().map(|(s, _)| s.sample_id.clone()).collect(),
    }
}

/// Distinct (x, y) locations in sorted order.
pub fn locations(d: &Dataset) -> Result<Vec<(f64, f64)>> {
    let mut locs = Vec::new();
    for s in d.samples() {
        let c = s
            .coords
            .ok_or_else(|| Error::Split(format!("sample {:?} has no coordinates", s.sample_id)))?;
        locs.push(c);
    }
    locs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    locs.dedup_by(|a, b| a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits());
    Ok(locs)
}

/// Holds out every sample at `holdout_locations` randomly chosen locations.
pub fn location_holdout_split(d: &Dataset, holdout_locations: usize, seed: u64) -> Result<SplitManifest> {
    let locs = locations(d)?;
    if holdout_locations == 0 {
        return Err(Error::Split("holdout of 0 locations leaves the test set empty".into()));
    }
    if holdout_locations >= locs.len() {
        return Err(Error::Split(format!(
            "cannot hold out {holdout_locations} of {} locations",
            locs.len()
        )));
    }
    let mut rng = rng::stream(seed, HOLDOUT_STREAM);
    let held: HashSet<(u64, u64)> = rand::seq::index::sample(&mut rng, locs.len(), holdout_locations)
        .into_iter()
        .map(|i| (locs[i].0.to_bits(), locs[i].1.to_bits()))
        .collect();
    let in_train: Vec<bool> = d
        .samples()
        .iter()
        .map(|s| {
            let (x, y) = s.coords.expect("checked by locations()");
            !held.contains(&(x.to_bits(), y.to_bits()))
        })
        .collect();
    let m = partition(d, &in_train);
    m.validate(d)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn category_dataset(classes: usize, per: usize) -> Dataset {
        let samples = (0..classes * per)
            .map(|i| LabeledSample {
                sample_id: format!("s{i:04}"),
                label: format!("subject_{}", i / per),
                coords: None,
                features: vec![i as f64 * 0.5 - 3.0, -(i as f64) / 7.0],
            })
            .collect();
        Dataset::new(Task::Authentication, vec![0, 1], 1, samples).unwrap()
    }

    fn coord_dataset(locs: usize, per: usize) -> Dataset {
        let samples = (0..locs * per)
            .map(|i| {
                let l = i / per;
                LabeledSample {
                    sample_id: format!("c{i}"),
                    label: format!("loc_{l}"),
                    coords: Some(((l % 5) as f64 * 1.8, (l / 5) as f64 * 1.8)),
                    features: vec![l as f64, i as f64],
                }
            })
            .collect();
        Dataset::new(Task::CoordLocalization, vec![3], 2, samples).unwrap()
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.as_str().parse::<Task>().unwrap(), t);
        }
        assert!("vehicle".parse::<Task>().is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        for d in [category_dataset(3, 4), coord_dataset(4, 3)] {
            let text = dataset_to_csv(&d);
            assert_eq!(dataset_from_csv(&text).unwrap(), d);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let text = dataset_to_csv(&category_dataset(7, 20));
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "sample_id,task,label,x,y,f_0_0,f_1_0");
        assert_eq!(lines.count(), 140);
        assert!(text.contains("\ns0001,auth,subject_0,,,"));
    }

    #[test]
    fn header_missing_feature_column_fails_on_line_1() {
        let text = dataset_to_csv(&category_dataset(2, 2));
        let broken = text.replacen(",f_1_0", ",f_1_1", 1);
        match dataset_from_csv(&broken) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        let reordered = text.replacen("f_0_0,f_1_0", "f_1_0,f_0_0", 1);
        assert!(matches!(
            dataset_from_csv(&reordered),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn ragged_and_non_numeric_rows_report_line() {
        let text = dataset_to_csv(&category_dataset(2, 2));
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[2].push_str(",1.0");
        match dataset_from_csv(&lines.join("\n")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("ragged"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = text.replacen("s0003,auth,subject_1,,,", "s0003,auth,subject_1,,,abc", 1);
        assert!(matches!(dataset_from_csv(&text), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn labels_with_commas_are_rejected() {
        let s = LabeledSample {
            sample_id: "a".into(),
            label: "x,y".into(),
            coords: None,
            features: vec![0.0],
        };
        assert!(Dataset::new(Task::Activity, vec![0], 1, vec![s]).is_err());
    }

    #[test]
    fn stratified_70_30_on_7x20() {
        let d = category_dataset(7, 20);
        let m = stratified_split(&d, 0.7, 1).unwrap();
        assert_eq!((m.train.len(), m.test.len()), (98, 42));
        for c in 0..7 {
            let label = format!("subject_{c}");
            let n = m.train.iter().filter(|id| d.get(id).unwrap().label == label).count();
            assert_eq!(n, 14);
        }
    }

    #[test]
    fn stratified_minimum_one_each_side() {
        let d = category_dataset(3, 2);
        let m = stratified_split(&d, 0.5, 9).unwrap();
        assert_eq!((m.train.len(), m.test.len()), (3, 3));
        let m = stratified_split(&d, 0.01, 9).unwrap();
        assert_eq!((m.train.len(), m.test.len()), (3, 3));
    }

    #[test]
    fn stratified_is_deterministic_and_seed_sensitive() {
        let d = category_dataset(4, 10);
        assert_eq!(
            stratified_split(&d, 0.7, 5).unwrap(),
            stratified_split(&d, 0.7, 5).unwrap()
        );
        assert_ne!(
            stratified_split(&d, 0.7, 5).unwrap(),
            stratified_split(&d, 0.7, 6).unwrap()
        );
    }

    #[test]
    fn stratified_rejects_tiny_classes_and_bad_fractions() {
        let d = category_dataset(2, 1);
        assert!(stratified_split(&d, 0.7, 1).is_err());
        let d = category_dataset(2, 5);
        assert!(stratified_split(&d, 1.0, 1).is_err());
        assert!(stratified_split(&d, 0.0, 1).is_err());
    }

    #[test]
    fn holdout_3_of_20_locations() {
        let d = coord_dataset(20, 4);
        let m = location_holdout_split(&d, 3, 11).unwrap();
        let coords = |ids: &[String]| -> HashSet<(u64, u64)> {
            ids.iter()
                .map(|id| {
                    let (x, y) = d.get(id).unwrap().coords.unwrap();
                    (x.to_bits(), y.to_bits())
                })
                .collect()
        };
        let (tr, te) = (coords(&m.train), coords(&m.test));
        assert_eq!(tr.len(), 17);
        assert_eq!(te.len(), 3);
        assert!(tr.is_disjoint(&te));
        assert_eq!(m.test.len(), 12);
    }

    #[test]
    fn holdout_rejects_zero_and_too_many() {
        let d = coord_dataset(4, 2);
        assert!(location_holdout_split(&d, 0, 1).is_err());
        assert!(location_holdout_split(&d, 4, 1).is_err());
        assert!(location_holdout_split(&category_dataset(2, 2), 1, 1).is_err());
    }

    #[test]
    fn manifest_text_round_trip_and_validation() {
        let d = category_dataset(2, 3);
        let m = stratified_split(&d, 0.5, 2).unwrap();
        let back = SplitManifest::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        let mut bad = m.clone();
        bad.test.push(bad.train[0].clone());
        assert!(bad.validate(&d).is_err());
        let mut bad = m.clone();
        bad.test.pop();
        assert!(bad.validate(&d).is_err());
        assert!(SplitManifest::from_text("validate x\n").is_err());
    }

    #[test]
    fn sensor_prefix_slices_sensor_major() {
        let d = category_dataset(2, 2);
        let p = d.sensor_prefix(1).unwrap();
        assert_eq!(p.sensor_ids(), &[0]);
        assert_eq!(p.samples()[1].features, vec![d.samples()[1].features[0]]);
        assert!(d.sensor_prefix(3).is_err());
    }

    proptest! {
        #[test]
        fn stratified_split_covers_and_balances(
            sizes in proptest::collection::vec(2usize..15, 1..6),
            frac in 0.05f64..0.95,
            seed in any::<u64>())
        {
            let mut samples = Vec::new();
            for (c, &n) in sizes.iter().enumerate() {
                for j in 0..n {
                    samples.push(LabeledSample {
                        sample_id: format!("{c}_{j}"),
                        label: format!("c{c}"),
                        coords: None,
                        features: vec![j as f64],
                    });
                }
            }
            let d = Dataset::new(Task::Activity, vec![0], 1, samples).unwrap();
            let m = stratified_split(&d, frac, seed).unwrap();
            m.validate(&d).unwrap();
            for (c, &n) in sizes.iter().enumerate() {
                let k = m.train.iter().filter(|id| id.starts_with(&format!("{c}_"))).count();
                prop_assert!(k >= 1 && k < n);
                prop_assert!((k as f64 - n as f64 * frac).abs() <= 1.0 + 1e-9);
            }
        }

        #[test]
        fn quantized_values_survive_csv(v in -200.0f64..50.0) {
            let q = quantize_power(v);
            prop_assert_eq!(quantize_power(q), q);
            prop_assert_eq!(format!("{q}").parse::<f64>().unwrap(), q);
            prop_assert!((q - v).abs() <= v.abs() * 1e-8);
        }
    }
}
