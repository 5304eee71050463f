use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use shapr::dataset::{
    load_dataset, load_split, location_holdout_split, save_dataset, save_split, stratified_split, Dataset,
    LabeledSample, Task,
};
use shapr::eval::{evaluate, receiver_ablation, ModelKind, ModelParams, TrainedModel};
use shapr::simulator::{generate_dataset, load_scene, synth_sweep_frames, Scenario, Scene};
use shapr::spectrum::{assemble_sweep, read_iq_file, stack_features, write_iq_file, BandPlan, IqFrame};
use shapr::{rng, write_atomic};

use crate::{
    AblateArgs, BandArgs, Command, EvalArgs, FeaturizeArgs, ModelArgs, PredictArgs, SimulateArgs, SplitArgs, TrainArgs,
};

type CmdResult = Result<(), Box<dyn StdError>>;

const LABELS_FILE: &str = "labels.csv";
const LABELS_HEADER: &str = "sample_id,label,x,y";

pub(crate) fn run(command: Command) -> CmdResult {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Featurize(a) => featurize(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
    }
}

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(format!("{}: no such file", path.display()).into())
    }
}

fn require_out_dir(path: &Path) -> CmdResult {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => return Ok(()),
    };
    if parent.is_dir() {
        Ok(())
    } else {
        Err(format!(
            "{}: output directory {} does not exist",
            path.display(),
            parent.display()
        )
        .into())
    }
}

impl BandArgs {
    fn plan(self) -> Result<BandPlan, Box<dyn StdError>> {
        Ok(BandPlan::new(self.band_start, self.band_stop, self.band_step)?)
    }
}

impl ModelArgs {
    fn params(self) -> ModelParams {
        let mut p = ModelParams {
            k: self.k,
            ..ModelParams::default()
        };
        p.tree.max_depth = self.max_depth;
        p.tree.max_features = self.max_features;
        p.forest.trees = self.trees;
        p.forest.max_depth = self.max_depth;
        p.forest.max_features = self.max_features;
        p
    }
}

fn default_categories(task: Task) -> usize {
    match task {
        Task::Authentication => 7,
        Task::GridLocalization => 4,
        Task::CoordLocalization => 20,
        Task::Activity => 8,
    }
}

fn simulate(a: SimulateArgs) -> CmdResult {
    if let Some(p) = &a.scene {
        require_file(p)?;
    }
    require_out_dir(&a.out)?;
    let plan = a.bands.plan()?;
    let mut scene = match &a.scene {
        Some(path) => load_scene(path, plan, a.seed)?,
        None => {
            let layout = a.scenario.unwrap_or(Scenario::for_task(a.task)).layout();
            Scene::build(layout, plan, a.seed)?
        }
    };
    if let Some(n) = a.noise_db {
        if !(n >= 0.0) {
            return Err(format!("--noise-db must be non-negative, got {n}").into());
        }
        scene.noise_sigma_db = n;
    }
    let categories = a.categories.unwrap_or(default_categories(a.task));
    let dataset = generate_dataset(&scene, a.task, categories, a.per_category, a.seed)?;
    if let Some(dir) = &a.emit_iq {
        emit_iq(dir, &dataset, &plan, a.frame_bytes, a.seed)?;
    }
    save_dataset(&dataset, &a.out)?;
    Ok(())
}

fn emit_iq(dir: &Path, d: &Dataset, plan: &BandPlan, frame_bytes: usize, seed: u64) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let bands = d.bands_per_sensor();
    let mut labels = format!("{LABELS_HEADER}\n");
    for (i, s) in d.samples().iter().enumerate() {
        let mut frames = Vec::with_capacity(s.features.len());
        for (j, &sensor) in d.sensor_ids().iter().enumerate() {
            let powers = &s.features[j * bands..(j + 1) * bands];
            let frame_seed = rng::mix64(seed ^ rng::mix64(i as u64 + 1));
            frames.extend(synth_sweep_frames(sensor, plan, powers, frame_bytes, frame_seed)?);
        }
        write_iq_file(dir.join(format!("{}.shiq", s.sample_id)), &frames)?;
        let (x, y) = s
            .coords
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .unwrap_or_default();
        let _ = writeln!(labels, "{},{},{x},{y}", s.sample_id, s.label);
    }
    write_atomic(&dir.join(LABELS_FILE), labels.as_bytes())?;
    Ok(())
}

fn parse_coord(path: &Path, line: usize, field: &str) -> Result<Option<f64>, Box<dyn StdError>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| format!("{}: line {line}: bad coordinate {field:?}", path.display()).into())
}

fn featurize(a: FeaturizeArgs) -> CmdResult {
    let labels_path = a.input.join(LABELS_FILE);
    require_file(&labels_path)?;
    require_out_dir(&a.out)?;
    let plan = a.bands.plan()?;
    let text = fs::read_to_string(&labels_path).map_err(|e| format!("{}: {e}", labels_path.display()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == LABELS_HEADER => {}
        _ => return Err(format!("{}: line 1: expected header {LABELS_HEADER:?}", labels_path.display()).into()),
    }
    let mut sensor_ids: Option<Vec<u32>> = None;
    let mut samples = Vec::new();
    for (n, line) in lines {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 4 {
            return Err(format!("{}: line {line_no}: expected 4 fields", labels_path.display()).into());
        }
        let coords = match (
            parse_coord(&labels_path, line_no, fields[2])?,
            parse_coord(&labels_path, line_no, fields[3])?,
        ) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => return Err(format!("{}: line {line_no}: x and y must both be set", labels_path.display()).into()),
        };
        let iq_path = a.input.join(format!("{}.shiq", fields[0]));
        require_file(&iq_path)?;
        let mut by_sensor: BTreeMap<u32, Vec<IqFrame>> = BTreeMap::new();
        for f in read_iq_file(&iq_path)? {
            by_sensor.entry(f.sensor_id).or_default().push(f);
        }
        let ids: Vec<u32> = by_sensor.keys().copied().collect();
        match &sensor_ids {
            None => sensor_ids = Some(ids),
            Some(expected) if *expected != ids => {
                return Err(format!("{}: sensors {ids:?} differ from {expected:?}", iq_path.display()).into());
            }
            Some(_) => {}
        }
        let sweeps = by_sensor
            .values()
            .map(|frames| assemble_sweep(frames, &plan))
            .collect::<shapr::Result<Vec<_>>>()
            .map_err(|e| format!("{}: {e}", iq_path.display()))?;
        samples.push(LabeledSample {
            sample_id: fields[0].to_string(),
            label: fields[1].to_string(),
            coords,
            features: stack_features(&sweeps)?.into_values(),
        });
    }
    let sensor_ids = sensor_ids.ok_or_else(|| format!("{}: no samples listed", labels_path.display()))?;
    let dataset = Dataset::new(a.task, sensor_ids, plan.band_count(), samples)?;
    save_dataset(&dataset, &a.out)?;
    Ok(())
}

fn split(a: SplitArgs) -> CmdResult {
    require_file(&a.data)?;
    require_out_dir(&a.out)?;
    let d = load_dataset(&a.data)?;
    let manifest = match a.holdout_locations {
        Some(n) => location_holdout_split(&d, n, a.seed)?,
        None => stratified_split(&d, a.train_fraction, a.seed)?,
    };
    save_split(&manifest, &a.out)?;
    Ok(())
}

fn train(a: TrainArgs) -> CmdResult {
    require_file(&a.data)?;
    require_file(&a.split)?;
    require_out_dir(&a.out)?;
    let d = load_dataset(&a.data)?;
    a.model.check_task(d.task())?;
    let s = load_split(&a.split)?;
    s.validate(&d).map_err(|e| format!("{}: {e}", a.split.display()))?;
    let model = TrainedModel::train(&d, &s.train, a.model, &a.params.params(), a.seed)?;
    model.save(&a.out)?;
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    require_file(&a.model)?;
    require_file(&a.data)?;
    if let Some(p) = &a.split {
        require_file(p)?;
    }
    require_out_dir(&a.out)?;
    let model = TrainedModel::load(&a.model)?;
    let d = load_dataset(&a.data)?;
    model.kind().check_task(d.task())?;
    let ids: Vec<String> = match &a.split {
        Some(p) => {
            let s = load_split(p)?;
            s.validate(&d).map_err(|e| format!("{}: {e}", p.display()))?;
            s.test
        }
        None => d.samples().iter().map(|s| s.sample_id.clone()).collect(),
    };
    let mut out = String::from("sample_id,pred\n");
    for s in d.select(&ids)? {
        let _ = writeln!(out, "{},{}", s.sample_id, model.predict(&s.features)?);
    }
    write_atomic(&a.out, out.as_bytes())?;
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    for p in [&a.model, &a.data, &a.split] {
        require_file(p)?;
    }
    require_out_dir(&a.out)?;
    if let Some(p) = &a.confusion {
        require_out_dir(p)?;
    }
    let model = TrainedModel::load(&a.model)?;
    let d = load_dataset(&a.data)?;
    let s = load_split(&a.split)?;
    s.validate(&d).map_err(|e| format!("{}: {e}", a.split.display()))?;
    let report = evaluate(&model, &d, &s.test, s.train.len())?;
    if let Some(p) = &a.confusion {
        let cm = report
            .confusion
            .as_ref()
            .ok_or("--confusion needs a classification task")?;
        write_atomic(p, cm.to_csv().as_bytes())?;
    }
    report.save(&a.out)?;
    Ok(())
}

fn ablate(a: AblateArgs) -> CmdResult {
    require_file(&a.data)?;
    require_file(&a.split)?;
    require_out_dir(&a.out)?;
    if a.model == ModelKind::Gpr {
        return Err("ablation reports accuracy; use knn, dt or rfr".into());
    }
    let d = load_dataset(&a.data)?;
    let s = load_split(&a.split)?;
    s.validate(&d).map_err(|e| format!("{}: {e}", a.split.display()))?;
    let sensors = if a.sensors.is_empty() {
        (1..=d.sensor_ids().len()).collect()
    } else {
        a.sensors
    };
    let result = receiver_ablation(&d, &s, a.model, &a.params.params(), &sensors, &a.seeds)?;
    result.save(&a.out)?;
    Ok(())
}
