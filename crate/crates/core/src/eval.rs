//! Metrics and the experiment harness.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::classifiers::{Classifier, DecisionTree, ForestParams, KnnModel, RandomForest, TreeParams, DEFAULT_K};
use crate::dataset::{Dataset, LabeledSample, SplitManifest, Task};
use crate::error::{Error, Result};
use crate::gpr::{localization_error, Coord, GprLocalizer, MleConfig};
use crate::io;

/// Counts of (true, predicted) label pairs over the sorted union of labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Row = true label, column = predicted label.
    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("true\\pred,{}\n", self.labels.join(","));
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{l},{}", cells.join(","));
        }
        out
    }
}

pub fn confusion_matrix(y_true: &[String], y_pred: &[String]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::Empty("label lists"));
    }
    let mut labels: Vec<String> = y_true.iter().chain(y_pred).cloned().collect();
    labels.sort();
    labels.dedup();
    let pos = |l: &String| labels.binary_search(l).expect("label in union");
    let mut counts = vec![vec![0; labels.len()]; labels.len()];
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[pos(t)][pos(p)] += 1;
    }
    Ok(ConfusionMatrix { labels, counts })
}

pub fn accuracy(cm: &ConfusionMatrix) -> f64 {
    cm.trace() as f64 / cm.total() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Knn,
    Dt,
    Rfr,
    Gpr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Knn, ModelKind::Dt, ModelKind::Rfr, ModelKind::Gpr];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Dt => "dt",
            ModelKind::Rfr => "rfr",
            ModelKind::Gpr => "gpr",
        }
    }

    /// GPR handles coordinate targets only; the classifiers handle the rest.
    pub fn check_task(self, task: Task) -> Result<()> {
        if (self == ModelKind::Gpr) != task.is_regression() {
            return Err(Error::TaskMismatch(format!(
                "model {} cannot be used for task {task}; coord-loc needs gpr, other tasks need knn|dt|rfr",
                self.as_str()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?} (expected knn|dt|rfr|gpr)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub k: usize,
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub mle: MleConfig,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            mle: MleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Label(String),
    Coord(Coord),
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Label(l) => f.write_str(l),
            Prediction::Coord((x, y)) => write!(f, "{x};{y}"),
        }
    }
}

/// Any fitted model, dispatched on the magic line of its file.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Knn(KnnModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Gpr(GprLocalizer),
}

fn rows<'a>(samples: &[&'a LabeledSample]) -> Vec<&'a [f64]> {
    samples.iter().map(|s| s.features.as_slice()).collect()
}

impl TrainedModel {
    pub fn train(
        dataset: &Dataset,
        train_ids: &[String],
        kind: ModelKind,
        params: &ModelParams,
        seed: u64,
    ) -> Result<Self> {
        kind.check_task(dataset.task())?;
        let samples = dataset.select(train_ids)?;
        if samples.is_empty() {
            return Err(Error::Empty("training split"));
        }
        let x = rows(&samples);
        let labels: Vec<String> = samples.iter().map(|s| s.label.clone()).collect();
        Ok(match kind {
            ModelKind::Knn => TrainedModel::Knn(KnnModel::fit(&x, &labels, params.k, true)?),
            ModelKind::Dt => TrainedModel::Tree(DecisionTree::fit(&x, &labels, params.tree, seed)?),
            ModelKind::Rfr => TrainedModel::Forest(RandomForest::fit(&x, &labels, params.forest, seed)?),
            ModelKind::Gpr => {
                let coords = samples
                    .iter()
                    .map(|s| {
                        s.coords
                            .ok_or_else(|| Error::Model(format!("sample {} has no coordinates", s.sample_id)))
                    })
                    .collect::<Result<Vec<_>>>()?;
                TrainedModel::Gpr(GprLocalizer::train(&x, &coords, &params.mle)?)
            }
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::Tree(_) => ModelKind::Dt,
            TrainedModel::Forest(_) => ModelKind::Rfr,
            TrainedModel::Gpr(_) => ModelKind::Gpr,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        Ok(match self {
            TrainedModel::Knn(m) => Prediction::Label(m.predict(features)?),
            TrainedModel::Tree(m) => Prediction::Label(m.predict(features)?),
            TrainedModel::Forest(m) => Prediction::Label(m.predict(features)?),
            TrainedModel::Gpr(m) => Prediction::Coord(m.predict(features)?),
        })
    }

    pub fn to_text(&self) -> String {
        match self {
            TrainedModel::Knn(m) => m.to_text(),
            TrainedModel::Tree(m) => m.to_text(),
            TrainedModel::Forest(m) => m.to_text(),
            TrainedModel::Gpr(m) => m.to_text(),
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let magic = text.lines().next().unwrap_or("").trim();
        match magic {
            "SHAPR1 knn" => KnnModel::from_text(text).map(TrainedModel::Knn),
            "SHAPR1 tree" => DecisionTree::from_text(text).map(TrainedModel::Tree),
            "SHAPR1 forest" => RandomForest::from_text(text).map(TrainedModel::Forest),
            "SHAPR1 gpr" => GprLocalizer::from_text(text).map(TrainedModel::Gpr),
            _ => Err(Error::parse(
                "model file",
                1,
                "expected magic `SHAPR1 knn|tree|forest|gpr`",
            )),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = io::read_to_string(path)?;
        Self::from_text(&text).map_err(|e| e.in_file(path))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub sample_id: String,
    pub truth: String,
    pub predicted: String,
    pub error_m: Option<f64>,
}

/// Outcome of scoring a model on a set of test samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub task: Task,
    pub model: ModelKind,
    pub train_samples: usize,
    pub rows: Vec<ReportRow>,
    /// Set for classification tasks.
    pub confusion: Option<ConfusionMatrix>,
}

impl Report {
    pub fn accuracy(&self) -> Option<f64> {
        self.confusion.as_ref().map(accuracy)
    }

    fn errors(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.error_m).collect()
    }

    pub fn mean_error_m(&self) -> Option<f64> {
        let e = self.errors();
        (!e.is_empty()).then(|| e.iter().sum::<f64>() / e.len() as f64)
    }

    pub fn rmse_m(&self) -> Option<f64> {
        let e = self.errors();
        (!e.is_empty()).then(|| (e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let _ = writeln!(out, "task,{}", self.task);
        let _ = writeln!(out, "model,{}", self.model);
        let _ = writeln!(out, "train_samples,{}", self.train_samples);
        let _ = writeln!(out, "test_samples,{}", self.rows.len());
        if let Some(a) = self.accuracy() {
            let _ = writeln!(out, "accuracy,{a}");
        }
        if let (Some(mean), Some(rmse)) = (self.mean_error_m(), self.rmse_m()) {
            let max = self.errors().into_iter().fold(0.0, f64::max);
            let _ = writeln!(out, "mean_error_m,{mean}");
            let _ = writeln!(out, "rmse_m,{rmse}");
            let _ = writeln!(out, "max_error_m,{max}");
        }
        let regression = self.task.is_regression();
        out.push_str(if regression {
            "sample_id,true,pred,err_m\n"
        } else {
            "sample_id,true,pred\n"
        });
        for r in &self.rows {
            let _ = write!(out, "{},{},{}", r.sample_id, r.truth, r.predicted);
            if let Some(e) = r.error_m {
                let _ = write!(out, ",{e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Scores `model` on the samples listed in `test_ids`.
pub fn evaluate(model: &TrainedModel, dataset: &Dataset, test_ids: &[String], train_samples: usize) -> Result<Report> {
    model.kind().check_task(dataset.task())?;
    let samples = dataset.select(test_ids)?;
    if samples.is_empty() {
        return Err(Error::Empty("test split"));
    }
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let row = match (model.predict(&s.features)?, s.coords) {
            (Prediction::Coord(p), Some(actual)) => ReportRow {
                sample_id: s.sample_id.clone(),
                truth: Prediction::Coord(actual).to_string(),
                predicted: Prediction::Coord(p).to_string(),
                error_m: Some(localization_error(p, actual)),
            },
            (Prediction::Coord(_), None) => {
                return Err(Error::Model(format!("sample {} has no coordinates", s.sample_id)));
            }
            (Prediction::Label(p), _) => ReportRow {
                sample_id: s.sample_id.clone(),
                truth: s.label.clone(),
                predicted: p,
                error_m: None,
            },
        };
        rows.push(row);
    }
    let confusion = if dataset.task().is_regression() {
        None
    } else {
        let t: Vec<String> = rows.iter().map(|r| r.truth.clone()).collect();
        let p: Vec<String> = rows.iter().map(|r| r.predicted.clone()).collect();
        Some(confusion_matrix(&t, &p)?)
    };
    Ok(Report {
        task: dataset.task(),
        model: model.kind(),
        train_samples,
        rows,
        confusion,
    })
}

/// Trains on the split's train ids and scores on its test ids.
pub fn run_experiment(
    dataset: &Dataset,
    split: &SplitManifest,
    kind: ModelKind,
    params: &ModelParams,
    seed: u64,
) -> Result<Report> {
    kind.check_task(dataset.task())?;
    split.validate(dataset)?;
    let model = TrainedModel::train(dataset, &split.train, kind, params, seed)?;
    evaluate(&model, dataset, &split.test, split.train.len())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationPoint {
    pub sensors: usize,
    pub seed: u64,
    pub accuracy: f64,
}

/// Accuracy per sensor-prefix size, one point per (size, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub points: Vec<AblationPoint>,
}

impl AblationResult {
    /// Distinct sensor counts, ascending.
    pub fn sensor_counts(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.points.iter().map(|p| p.sensors).collect();
        c.dedup();
        c
    }

    pub fn seeds(&self, sensors: usize) -> Vec<u64> {
        self.points
            .iter()
            .filter(|p| p.sensors == sensors)
            .map(|p| p.seed)
            .collect()
    }

    /// Accuracy averaged over seeds.
    pub fn mean_accuracy(&self, sensors: usize) -> Option<f64> {
        let acc: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.sensors == sensors)
            .map(|p| p.accuracy)
            .collect();
        (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sensors,accuracy,seed\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.sensors, p.accuracy, p.seed);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Re-runs the experiment with features restricted to the first `m`
/// sensors (by id) for every `m` in `sensor_counts` and every seed.
pub fn receiver_ablation(
    dataset: &Dataset,
    split: &SplitManifest,
    kind: ModelKind,
    params: &ModelParams,
    sensor_counts: &[usize],
    seeds: &[u64],
) -> Result<AblationResult> {
    if dataset.task().is_regression() {
        return Err(Error::TaskMismatch(
            "receiver ablation reports accuracy and needs a classification task".into(),
        ));
    }
    if sensor_counts.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("ablation sensor counts or seeds"));
    }
    if sensor_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sensor counts must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(sensor_counts.len() * seeds.len());
    for &m in sensor_counts {
        let sub = dataset.sensor_prefix(m)?;
        for &seed in seeds {
            let r = run_experiment(&sub, split, kind, params, seed)?;
            points.push(AblationPoint {
                sensors: m,
                seed,
                accuracy: r.accuracy().expect("classification report"),
            });
        }
    }
    Ok(AblationResult { points })
}
