//! Exact Gaussian process regression with a squared-exponential kernel.
//!
//! Used for coordinate-level localization: inputs are (normalized) stacked
//! spectra, outputs are (x, y) positions. Both output columns share one
//! kernel and one factorization. Hyperparameters come from maximizing the
//! log marginal likelihood, with the signal variance profiled out in closed
//! form and the length scale found by a log-grid search plus local
//! bisection.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::io;
use crate::spectrum::Normalizer;

/// Default diagonal stabilizer, relative to σ².
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-6;
/// Largest relative jitter tried before giving up.
pub const MAX_RELATIVE_JITTER: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GprHyperparams {
    /// Signal standard deviation σ.
    pub sigma: f64,
    pub length_scale: f64,
    /// Absolute value added to the Gram diagonal.
    pub jitter: f64,
}

impl GprHyperparams {
    pub fn new(sigma: f64, length_scale: f64, jitter: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::Config(format!(
                "sigma ({sigma}) and length scale ({length_scale}) must be positive and finite"
            )));
        }
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::Config(format!(
                "jitter {jitter} must be finite and non-negative"
            )));
        }
        Ok(Self {
            sigma,
            length_scale,
            jitter,
        })
    }
}

/// How the prior mean of the targets is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanPolicy {
    /// Zero prior mean; targets are used as-is.
    Zero,
    /// Subtract the per-output training mean, add it back at prediction.
    TrainingMean,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// σ²·exp(−‖a − b‖² / 2l²)
pub fn kernel(a: &[f64], b: &[f64], hp: &GprHyperparams) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(se(sq_dist(a, b), hp.sigma * hp.sigma, hp.length_scale))
}

#[inline]
fn se(d2: f64, sigma2: f64, l: f64) -> f64 {
    sigma2 * (-d2 / (2.0 * l * l)).exp()
}

fn check_rows<R: AsRef<[f64]>>(x: &[R]) -> Result<usize> {
    let d = x.first().ok_or(Error::Empty("training inputs"))?.as_ref().len();
    for row in x {
        let row = row.as_ref();
        if row.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("training inputs contain non-finite values".into()));
        }
    }
    Ok(d)
}

fn sq_dist_matrix<R: AsRef<[f64]>>(x: &[R]) -> DMatrix<f64> {
    let n = x.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = sq_dist(x[i].as_ref(), x[j].as_ref());
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Kernel matrix over the training inputs (no jitter). Symmetric by
/// construction: each off-diagonal entry is computed once and mirrored.
pub fn gram_matrix<R: AsRef<[f64]>>(x: &[R], hp: &GprHyperparams) -> Result<DMatrix<f64>> {
    check_rows(x)?;
    let s2 = hp.sigma * hp.sigma;
    let k = sq_dist_matrix(x).map(|d2| se(d2, s2, hp.length_scale));
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("gram matrix has non-finite entries".into()));
    }
    Ok(k)
}

fn add_jitter(mut k: DMatrix<f64>, jitter: f64) -> DMatrix<f64> {
    for i in 0..k.nrows() {
        k[(i, i)] += jitter;
    }
    k
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Log marginal likelihood of `y` (n × m, already centered as desired),
/// summed over the m output columns.
pub fn log_marginal_likelihood<R: AsRef<[f64]>>(x: &[R], y: &DMatrix<f64>, hp: &GprHyperparams) -> Result<f64> {
    if y.nrows() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.nrows(),
        });
    }
    let k = add_jitter(gram_matrix(x, hp)?, hp.jitter);
    let chol = Cholesky::new(k).ok_or(Error::NotPositiveDefinite)?;
    Ok(lml_from_factor(&chol, y))
}

fn lml_from_factor(chol: &Cholesky<f64, Dyn>, y: &DMatrix<f64>) -> f64 {
    let n = y.nrows() as f64;
    let m = y.ncols() as f64;
    let alpha = chol.solve(y);
    let quad: f64 = y.iter().zip(alpha.iter()).map(|(a, b)| a * b).sum();
    -0.5 * quad - m * 0.5 * log_det(chol) - m * 0.5 * n * (2.0 * PI).ln()
}

/// Settings for [`fit_mle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    /// Log-spaced length-scale candidates across the search range.
    pub grid_points: usize,
    /// Search range as multiples of the median pairwise input distance.
    pub min_factor: f64,
    pub max_factor: f64,
    pub refine_rounds: usize,
    pub relative_jitter: f64,
    pub mean: MeanPolicy,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            grid_points: 41,
            min_factor: 1e-2,
            max_factor: 1e2,
            refine_rounds: 3,
            relative_jitter: DEFAULT_RELATIVE_JITTER,
            mean: MeanPolicy::TrainingMean,
        }
    }
}

/// One evaluated length scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleCandidate {
    pub hp: GprHyperparams,
    pub lml: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub hp: GprHyperparams,
    pub lml: f64,
    /// Every candidate that factored, in evaluation order.
    pub candidates: Vec<MleCandidate>,
}

/// Per-output means, or zeros under [`MeanPolicy::Zero`].
pub fn target_means(y: &DMatrix<f64>, mean: MeanPolicy) -> Vec<f64> {
    match mean {
        MeanPolicy::Zero => vec![0.0; y.ncols()],
        MeanPolicy::TrainingMean => y.column_iter().map(|c| c.mean()).collect(),
    }
}

fn center(y: &DMatrix<f64>, means: &[f64]) -> DMatrix<f64> {
    let mut yc = y.clone();
    for (mut col, m) in yc.column_iter_mut().zip(means) {
        col.add_scalar_mut(-m);
    }
    yc
}

fn median_pairwise_distance(d2: &DMatrix<f64>) -> f64 {
    let n = d2.nrows();
    let mut dists: Vec<f64> = (0..n)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| d2[(i, j)].sqrt())
        .collect();
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let med = if dists.len().is_multiple_of(2) {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Profiled evaluation at one length scale: σ² in closed form, jitter
/// escalated ×10 from `relative_jitter` until the factorization succeeds.
fn profile_at(d2: &DMatrix<f64>, yc: &DMatrix<f64>, l: f64, relative_jitter: f64) -> Option<MleCandidate> {
    let n = yc.nrows() as f64;
    let m = yc.ncols() as f64;
    let unit = d2.map(|v| se(v, 1.0, l));
    let mut rel = relative_jitter;
    loop {
        if let Some(chol) = Cholesky::new(add_jitter(unit.clone(), rel)) {
            let alpha = chol.solve(yc);
            let quad: f64 = yc.iter().zip(alpha.iter()).map(|(a, b)| a * b).sum();
            let sigma2 = quad / (n * m);
            if !(sigma2 > 0.0 && sigma2.is_finite()) {
                return None;
            }
            // K = σ²(R + rel·I): quadratic term collapses to n·m
            let lml = -0.5 * n * m - m * 0.5 * (n * sigma2.ln() + log_det(&chol)) - m * 0.5 * n * (2.0 * PI).ln();
            return Some(MleCandidate {
                hp: GprHyperparams {
                    sigma: sigma2.sqrt(),
                    length_scale: l,
                    jitter: rel * sigma2,
                },
                lml,
            });
        }
        rel *= 10.0;
        if rel > MAX_RELATIVE_JITTER * (1.0 + 1e-9) {
            return None;
        }
    }
}

/// Maximum-likelihood hyperparameters for inputs `x` and targets `y`
/// (n × m). Targets are centered per `config.mean` before fitting.
pub fn fit_mle<R: AsRef<[f64]>>(x: &[R], y: &DMatrix<f64>, config: &MleConfig) -> Result<MleFit> {
    check_rows(x)?;
    if x.len() < 2 {
        return Err(Error::Config("MLE fit needs at least 2 training points".into()));
    }
    if y.nrows() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.nrows(),
        });
    }
    if config.grid_points < 2 || !(config.min_factor > 0.0 && config.max_factor > config.min_factor) {
        return Err(Error::Config("MLE grid needs ≥ 2 points over a positive range".into()));
    }
    let yc = center(y, &target_means(y, config.mean));
    let d2 = sq_dist_matrix(x);
    let scale = median_pairwise_distance(&d2);
    let (lo, hi) = ((config.min_factor * scale).ln(), (config.max_factor * scale).ln());
    let mut grid: Vec<(f64, Option<MleCandidate>)> = (0..config.grid_points)
        .map(|i| {
            let ll = lo + (hi - lo) * i as f64 / (config.grid_points - 1) as f64;
            (ll, profile_at(&d2, &yc, ll.exp(), config.relative_jitter))
        })
        .collect();
    let mut candidates: Vec<MleCandidate> = grid.iter().filter_map(|(_, c)| *c).collect();
    if candidates.is_empty() {
        return Err(Error::NotPositiveDefinite);
    }

    // Bisection refinement in log-l around the incumbent.
    let score = |c: &Option<MleCandidate>| c.map_or(f64::NEG_INFINITY, |c| c.lml);
    for _ in 0..config.refine_rounds {
        let best = (0..grid.len())
            .max_by(|&a, &b| score(&grid[a].1).total_cmp(&score(&grid[b].1)).then(b.cmp(&a)))
            .expect("non-empty grid");
        let mut inserted = Vec::new();
        if best > 0 {
            let ll = 0.5 * (grid[best - 1].0 + grid[best].0);
            inserted.push((best, ll));
        }
        if best + 1 < grid.len() {
            let ll = 0.5 * (grid[best].0 + grid[best + 1].0);
            inserted.push((best + 1, ll));
        }
        for (pos, ll) in inserted.into_iter().rev() {
            let c = profile_at(&d2, &yc, ll.exp(), config.relative_jitter);
            candidates.extend(c);
            grid.insert(pos, (ll, c));
        }
    }
    let best = candidates
        .iter()
        .copied()
        .reduce(|a, b| if b.lml > a.lml { b } else { a })
        .expect("non-empty candidates");
    Ok(MleFit {
        hp: best.hp,
        lml: best.lml,
        candidates,
    })
}

/// Fitted regressor: training inputs plus `(K + jitter·I)⁻¹ (Y − mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GprModel {
    x: Vec<Vec<f64>>,
    target_means: Vec<f64>,
    hp: GprHyperparams,
    mean: MeanPolicy,
    lower: DMatrix<f64>,
    alpha: DMatrix<f64>,
}

impl GprModel {
    /// Factors the Gram matrix. If it is not positive definite at
    /// `hp.jitter`, the jitter is escalated through 1e-6·σ² … 1e-2·σ².
    pub fn fit<R: AsRef<[f64]>>(x: &[R], y: &DMatrix<f64>, hp: GprHyperparams, mean: MeanPolicy) -> Result<Self> {
        check_rows(x)?;
        if y.nrows() != x.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                actual: y.nrows(),
            });
        }
        let means = target_means(y, mean);
        let yc = center(y, &means);
        let k = gram_matrix(x, &hp)?;
        let (chol, jitter) = factor_escalating(&k, hp)?;
        let alpha = chol.solve(&yc);
        Ok(Self {
            x: x.iter().map(|r| r.as_ref().to_vec()).collect(),
            target_means: means,
            hp: GprHyperparams { jitter, ..hp },
            mean,
            lower: chol.unpack(),
            alpha,
        })
    }

    pub fn hyperparams(&self) -> &GprHyperparams {
        &self.hp
    }

    pub fn target_means(&self) -> &[f64] {
        &self.target_means
    }

    pub fn mean_policy(&self) -> MeanPolicy {
        self.mean
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    /// Lower-triangular factor of K + jitter·I.
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn training_inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn input_dim(&self) -> usize {
        self.x[0].len()
    }

    /// Query-to-training kernel row.
    pub fn cross_kernel(&self, query: &[f64]) -> Result<DVector<f64>> {
        if query.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: query.len(),
            });
        }
        let s2 = self.hp.sigma * self.hp.sigma;
        Ok(DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| se(sq_dist(query, xi), s2, self.hp.length_scale)),
        ))
    }

    /// Posterior mean K_* · alpha + target mean, one value per output.
    pub fn predict_mean(&self, query: &[f64]) -> Result<Vec<f64>> {
        let ks = self.cross_kernel(query)?;
        Ok(self
            .alpha
            .column_iter()
            .zip(&self.target_means)
            .map(|(a, m)| ks.dot(&a) + m)
            .collect())
    }
}

fn factor_escalating(k: &DMatrix<f64>, hp: GprHyperparams) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let s2 = hp.sigma * hp.sigma;
    let mut jitter = hp.jitter;
    loop {
        if let Some(c) = Cholesky::new(add_jitter(k.clone(), jitter)) {
            return Ok((c, jitter));
        }
        jitter = if jitter < DEFAULT_RELATIVE_JITTER * s2 {
            DEFAULT_RELATIVE_JITTER * s2
        } else {
            jitter * 10.0
        };
        if jitter > MAX_RELATIVE_JITTER * s2 * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite);
        }
    }
}

pub fn predict_mean(model: &GprModel, query: &[f64]) -> Result<Vec<f64>> {
    model.predict_mean(query)
}

pub type Coord = (f64, f64);

/// Euclidean distance between a predicted and an actual position.
pub fn localization_error(predicted: Coord, actual: Coord) -> f64 {
    (predicted.0 - actual.0).hypot(predicted.1 - actual.1)
}

/// Mean of per-point localization errors over (predicted, actual) pairs.
pub fn mean_error(pairs: &[(Coord, Coord)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("localization pairs"));
    }
    Ok(pairs.iter().map(|&(p, a)| localization_error(p, a)).sum::<f64>() / pairs.len() as f64)
}

/// Spectrum-to-coordinate localizer: z-score normalization followed by a
/// GP fitted by maximum likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct GprLocalizer {
    pub normalizer: Option<Normalizer>,
    pub model: GprModel,
}

impl GprLocalizer {
    pub fn train<R: AsRef<[f64]>>(features: &[R], coords: &[Coord], config: &MleConfig) -> Result<Self> {
        if features.len() != coords.len() {
            return Err(Error::Dimension {
                expected: features.len(),
                actual: coords.len(),
            });
        }
        let normalizer = Normalizer::fit(features)?;
        let x: Vec<Vec<f64>> = features
            .iter()
            .map(|f| normalizer.apply(f.as_ref()))
            .collect::<Result<_>>()?;
        let y = coords_matrix(coords);
        let fit = fit_mle(&x, &y, config)?;
        let model = GprModel::fit(&x, &y, fit.hp, config.mean)?;
        Ok(Self {
            normalizer: Some(normalizer),
            model,
        })
    }

    pub fn predict(&self, features: &[f64]) -> Result<Coord> {
        let q = match &self.normalizer {
            Some(n) => n.apply(features)?,
            None => features.to_vec(),
        };
        let p = self.model.predict_mean(&q)?;
        match p.as_slice() {
            [x, y] => Ok((*x, *y)),
            _ => Err(Error::Model(format!("expected 2 outputs, model has {}", p.len()))),
        }
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut out = String::from("SHAPR1 gpr\n");
        let _ = writeln!(
            out,
            "mean {}",
            match m.mean {
                MeanPolicy::Zero => "zero",
                MeanPolicy::TrainingMean => "training",
            }
        );
        let _ = writeln!(
            out,
            "hyperparams {} {} {}",
            io::fmt17(m.hp.sigma),
            io::fmt17(m.hp.length_scale),
            io::fmt17(m.hp.jitter)
        );
        let _ = writeln!(out, "target_means {}", join17(&m.target_means));
        match &self.normalizer {
            Some(n) => {
                let _ = writeln!(out, "normalizer {}", n.dim());
                let _ = writeln!(out, "{}", join17(n.mean()));
                let _ = writeln!(out, "{}", join17(n.std()));
            }
            None => out.push_str("normalizer none\n"),
        }
        let _ = writeln!(out, "x {} {}", m.x.len(), m.input_dim());
        for row in &m.x {
            let _ = writeln!(out, "{}", join17(row));
        }
        let _ = writeln!(out, "alpha {} {}", m.alpha.nrows(), m.alpha.ncols());
        for r in 0..m.alpha.nrows() {
            let row: Vec<f64> = m.alpha.row(r).iter().copied().collect();
            let _ = writeln!(out, "{}", join17(&row));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const CTX: &str = "gpr model";
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(CTX, 0, format!("unexpected end of file, expected {what}")))
        };
        let (ln, magic) = next("magic")?;
        if magic.trim() != "SHAPR1 gpr" {
            return Err(Error::parse(CTX, ln, "missing `SHAPR1 gpr` magic"));
        }
        let (ln, l) = next("mean")?;
        let mean = match l.trim() {
            "mean zero" => MeanPolicy::Zero,
            "mean training" => MeanPolicy::TrainingMean,
            _ => return Err(Error::parse(CTX, ln, "expected `mean zero|training`")),
        };
        let (ln, l) = next("hyperparams")?;
        let hp = keyed_floats(l, "hyperparams", 3, ln)?;
        let hp = GprHyperparams::new(hp[0], hp[1], hp[2]).map_err(|e| Error::parse(CTX, ln, e.to_string()))?;
        let (ln, l) = next("target_means")?;
        let target_means = keyed_floats(l, "target_means", usize::MAX, ln)?;
        let (ln, l) = next("normalizer")?;
        let normalizer = match l.trim() {
            "normalizer none" => None,
            other => {
                let d = other
                    .strip_prefix("normalizer ")
                    .map(|v| io::parse_usize(v, CTX, ln))
                    .ok_or_else(|| Error::parse(CTX, ln, "expected `normalizer <d>`"))??;
                let (ln, l) = next("normalizer mean")?;
                let mean = floats(l, d, ln)?;
                let (ln, l) = next("normalizer std")?;
                let std = floats(l, d, ln)?;
                Some(Normalizer::from_parts(mean, std).map_err(|e| Error::parse(CTX, ln, e.to_string()))?)
            }
        };
        let (ln, l) = next("x")?;
        let (n, d) = dims(l, "x", ln)?;
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, l) = next("x row")?;
            x.push(floats(l, d, ln)?);
        }
        let (ln, l) = next("alpha")?;
        let (an, am) = dims(l, "alpha", ln)?;
        if an != n || am != target_means.len() || n == 0 {
            return Err(Error::parse(CTX, ln, "alpha shape does not match x and target means"));
        }
        let mut alpha = DMatrix::zeros(an, am);
        for r in 0..an {
            let (ln, l) = next("alpha row")?;
            for (c, v) in floats(l, am, ln)?.into_iter().enumerate() {
                alpha[(r, c)] = v;
            }
        }
        let k = gram_matrix(&x, &hp)?;
        let chol = Cholesky::new(add_jitter(k, hp.jitter)).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            normalizer,
            model: GprModel {
                x,
                target_means,
                hp,
                mean,
                lower: chol.unpack(),
                alpha,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }
}

/// Stacks coordinate pairs into an n × 2 target matrix.
pub fn coords_matrix(coords: &[Coord]) -> DMatrix<f64> {
    DMatrix::from_fn(coords.len(), 2, |r, c| if c == 0 { coords[r].0 } else { coords[r].1 })
}

fn join17(v: &[f64]) -> String {
    v.iter().map(|x| io::fmt17(*x)).collect::<Vec<_>>().join(" ")
}

fn floats(line: &str, expected: usize, ln: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = line
        .split_whitespace()
        .map(|t| io::parse_f64(t, "gpr model", ln))
        .collect::<Result<_>>()?;
    if expected != usize::MAX && v.len() != expected {
        return Err(Error::parse(
            "gpr model",
            ln,
            format!("expected {expected} values, got {}", v.len()),
        ));
    }
    Ok(v)
}

fn keyed_floats(line: &str, key: &str, expected: usize, ln: usize) -> Result<Vec<f64>> {
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| Error::parse("gpr model", ln, format!("expected `{key} ...`")))?;
    floats(rest, expected, ln)
}

fn dims(line: &str, key: &str, ln: usize) -> Result<(usize, usize)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        [k, a, b] if *k == key => Ok((
            io::parse_usize(a, "gpr model", ln)?,
            io::parse_usize(b, "gpr model", ln)?,
        )),
        _ => Err(Error::parse("gpr model", ln, format!("expected `{key} <rows> <cols>`"))),
    }
}
