//! Evaluation harness: per-dialogue belief simulation, history features,
//! ridge regression onto the final fact bank, leave-one-group-out
//! cross-validation and coefficient sweeps.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{self, BeliefVector, FrictionConfig, Vec5};
use crate::dialogue::{self, Transcript, Utterance, UtteranceKind, GROUND_TRUTH};
use crate::dsl::{self, Block, BLOCK_COUNT};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("singular system: ridge penalty is 0 and the design is rank-deficient")]
    SingularSystem,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("focus `{0}` is not a participant")]
    UnknownFocus(String),
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("duplicate group id `{0}`")]
    DuplicateGroup(String),
}

/// Default coefficient grid, log-spaced over `[0.01, 100]`.
pub const DEFAULT_GRID: [f64; 10] = [0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub friction: FrictionConfig,
    /// History window: number of trailing belief states used as features.
    pub k: usize,
    pub ridge_lambda: f64,
    pub n_runs: usize,
    pub seed: u64,
    pub init_low: f64,
    pub init_high: f64,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    pub k_values: Vec<usize>,
    /// Fit an unpenalized intercept (ablation only; off by default).
    pub fit_intercept: bool,
    pub ground_truth: Vec5,
    /// Worker threads for runs and grid cells; 0 uses the global pool.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            friction: FrictionConfig::new(5.0, 2.0).expect("valid"),
            k: 1,
            ridge_lambda: 1.0,
            n_runs: 100,
            seed: 0,
            init_low: 0.0,
            init_high: 10.0,
            alpha_grid: DEFAULT_GRID.to_vec(),
            beta_grid: DEFAULT_GRID.to_vec(),
            k_values: vec![1, 2, 3, 4],
            fit_intercept: false,
            ground_truth: GROUND_TRUTH,
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.k == 0 || self.k_values.contains(&0) {
            return bad("history window k must be at least 1".into());
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return bad(format!(
                "ridge penalty must be >= 0, got {}",
                self.ridge_lambda
            ));
        }
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        if self.init_low > self.init_high || self.init_low.is_nan() || self.init_high.is_nan() {
            return bad("init_low must not exceed init_high".into());
        }
        FrictionConfig::new(self.friction.alpha, self.friction.beta)
            .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    fn with_cell(&self, alpha: f64, beta: f64, k: usize) -> Result<ExperimentConfig, EvalError> {
        let friction = FrictionConfig {
            alpha,
            beta,
            ..self.friction
        };
        let cfg = ExperimentConfig {
            friction,
            k,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Red is known to weigh 10 g; the other blocks start uniform in
/// `[low, high)`.
pub fn init_belief_with(rng: &mut impl Rng, low: f64, high: f64) -> BeliefVector {
    let mut v: Vec5 = std::array::from_fn(|_| {
        if low < high {
            rng.gen_range(low..high)
        } else {
            low
        }
    });
    v[Block::Red.index()] = 10.0;
    BeliefVector::new(v)
}

pub fn init_belief(seed: u64) -> BeliefVector {
    init_belief_with(&mut ChaCha8Rng::seed_from_u64(seed), 0.0, 10.0)
}

/// Belief snapshots of the focus participant: the initial state, then one
/// per processed utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefTrajectory {
    pub focus: String,
    pub states: Vec<BeliefVector>,
}

impl BeliefTrajectory {
    pub fn last(&self) -> &BeliefVector {
        self.states
            .last()
            .expect("trajectory starts with the initial state")
    }
}

/// The focus's own positive `block = grams` statements and acceptances are
/// assigned directly; anything an interlocutor says is encoded and applied
/// through the friction update. Returns `None` when the utterance carries
/// nothing for the focus (its own denials or non-specific claims).
pub fn apply_utterance<R: Rng + ?Sized>(
    belief: &BeliefVector,
    utt: &Utterance,
    focus: &str,
    cfg: &FrictionConfig,
    rng: &mut R,
) -> Result<Option<BeliefVector>, Error> {
    let set = utt.effective_atoms()?;
    if utt.speaker == focus {
        if utt.kind == UtteranceKind::Deny {
            return Ok(None);
        }
        let specific: Vec<(Block, f64)> = set
            .atoms()
            .iter()
            .filter_map(|a| a.specific_weight())
            .collect();
        if specific.is_empty() {
            return Ok(None);
        }
        let mut out = *belief;
        for (block, grams) in specific {
            out = belief::direct_assign(&out, block, grams)?;
        }
        return Ok(Some(out));
    }
    let vector = dsl::encode(&set, &mut dsl::EncodingContext::with_belief(rng, belief))?;
    Ok(Some(belief::def_update(belief, &vector, cfg)))
}

pub fn run_dialogue_from<R: Rng + ?Sized>(
    t: &Transcript,
    focus: &str,
    initial: BeliefVector,
    cfg: &FrictionConfig,
    rng: &mut R,
) -> Result<BeliefTrajectory, Error> {
    if !t.participants.iter().any(|p| p == focus) {
        return Err(EvalError::UnknownFocus(focus.to_string()).into());
    }
    let mut states = vec![initial];
    let mut current = initial;
    for utt in &t.utterances {
        if let Some(next) = apply_utterance(&current, utt, focus, cfg, rng)? {
            current = next;
            states.push(current);
        }
    }
    Ok(BeliefTrajectory {
        focus: focus.to_string(),
        states,
    })
}

/// Simulates the focus's belief over a dialogue, drawing the initial state
/// and any bound jitter from `rng`.
pub fn run_dialogue<R: Rng + ?Sized>(
    t: &Transcript,
    focus: &str,
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<BeliefTrajectory, Error> {
    let mut init_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let initial = init_belief_with(&mut init_rng, cfg.init_low, cfg.init_high);
    run_dialogue_from(t, focus, initial, &cfg.friction, rng)
}

/// The last `k` states concatenated oldest first; short trajectories are
/// left-padded with their earliest state.
pub fn extract_features(traj: &BeliefTrajectory, k: usize) -> Vec<f64> {
    let n = traj.states.len();
    let mut out = Vec::with_capacity(k * BLOCK_COUNT);
    for slot in 0..k {
        // Index of the state in this slot once padded to length k.
        let idx = (n + slot).saturating_sub(k);
        out.extend_from_slice(traj.states[idx].components());
    }
    out
}

fn check_shapes(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<(), EvalError> {
    if x.nrows() != y.nrows() {
        return Err(EvalError::Shape(format!(
            "{} feature rows vs {} target rows",
            x.nrows(),
            y.nrows()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(EvalError::InvalidConfig(format!("ridge penalty {lambda}")));
    }
    Ok(())
}

/// Solves `(A + lambda I) Z = B` for symmetric positive semidefinite `A`.
fn solve_regularized(
    mut a: DMatrix<f64>,
    b: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>, EvalError> {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)] += lambda;
    }
    if lambda > 0.0 {
        if let Some(z) = a.clone().lu().solve(b) {
            return Ok(z);
        }
    }
    let svd = a.svd(true, true);
    let tol = f64::EPSILON * n as f64 * svd.singular_values.max();
    if svd.rank(tol) < n {
        return Err(EvalError::SingularSystem);
    }
    svd.solve(b, tol).map_err(|_| EvalError::SingularSystem)
}

/// `W = (XᵀX + λI)⁻¹ XᵀY`.
pub fn ridge_fit_primal(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>, EvalError> {
    check_shapes(x, y, lambda)?;
    let xt = x.transpose();
    solve_regularized(&xt * x, &(&xt * y), lambda)
}

/// `W = Xᵀ (XXᵀ + λI)⁻¹ Y`.
pub fn ridge_fit_dual(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>, EvalError> {
    check_shapes(x, y, lambda)?;
    let gram = x * x.transpose();
    Ok(x.transpose() * solve_regularized(gram, y, lambda)?)
}

/// Ridge regression without intercept, through whichever closed form
/// inverts the smaller matrix.
pub fn ridge_fit(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>, EvalError> {
    if x.ncols() > x.nrows() {
        ridge_fit_dual(x, y, lambda)
    } else {
        ridge_fit_primal(x, y, lambda)
    }
}

/// Root of the mean squared component difference, in grams.
pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "rmse needs equal lengths");
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    (sse / pred.len() as f64).sqrt()
}

/// Mean and standard error of the mean (sample standard deviation / √n).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub group: String,
    pub rmse_mean: f64,
    pub rmse_stderr: f64,
    /// Held-out RMSE of each run, in run order.
    pub runs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub n_runs: usize,
    pub ground_truth: Vec5,
    /// Sorted by group id.
    pub groups: Vec<GroupScore>,
    /// Mean over groups per run, summarized over runs.
    pub overall_mean: f64,
    pub overall_stderr: f64,
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// RNG for one (run, group) pair: independent of corpus order.
pub fn run_rng(base_seed: u64, run: usize, group_id: &str) -> ChaCha8Rng {
    let seed = base_seed.wrapping_add(run as u64);
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(group_id).rotate_left(17))
}

fn pool(jobs: usize) -> Option<rayon::ThreadPool> {
    (jobs > 0).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool")
    })
}

fn install<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match pool(jobs) {
        Some(p) => p.install(f),
        None => f(),
    }
}

struct Group<'a> {
    transcript: &'a Transcript,
    focus: String,
}

fn prepare(transcripts: &[Transcript]) -> Result<Vec<Group<'_>>, Error> {
    if transcripts.len() < 2 {
        return Err(EvalError::TooFewGroups(transcripts.len()).into());
    }
    let mut groups: Vec<Group<'_>> = transcripts
        .iter()
        .map(|t| {
            Ok(Group {
                transcript: t,
                focus: dialogue::select_focus(t)?,
            })
        })
        .collect::<Result<_, Error>>()?;
    groups.sort_by(|a, b| a.transcript.group_id.cmp(&b.transcript.group_id));
    for pair in groups.windows(2) {
        if pair[0].transcript.group_id == pair[1].transcript.group_id {
            return Err(EvalError::DuplicateGroup(pair[0].transcript.group_id.clone()).into());
        }
    }
    Ok(groups)
}

/// Held-out RMSE per group (sorted by id) for one run.
fn run_once(groups: &[Group<'_>], cfg: &ExperimentConfig, run: usize) -> Result<Vec<f64>, Error> {
    let features: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let mut rng = run_rng(cfg.seed, run, &g.transcript.group_id);
            let traj = run_dialogue(g.transcript, &g.focus, cfg, &mut rng)?;
            Ok(extract_features(&traj, cfg.k))
        })
        .collect::<Result<_, Error>>()?;
    let d = cfg.k * BLOCK_COUNT;
    (0..groups.len())
        .map(|held| {
            let train: Vec<&Vec<f64>> = features
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held)
                .map(|(_, f)| f)
                .collect();
            let n = train.len();
            let mut x = DMatrix::from_fn(n, d, |r, c| train[r][c]);
            let mut y = DMatrix::from_fn(n, BLOCK_COUNT, |_, c| cfg.ground_truth[c]);
            let mut test = DMatrix::from_row_slice(1, d, &features[held]);
            let (x_mean, y_mean) = if cfg.fit_intercept {
                let xm = x.row_mean();
                let ym = y.row_mean();
                for mut row in x.row_iter_mut() {
                    row -= &xm;
                }
                for mut row in y.row_iter_mut() {
                    row -= &ym;
                }
                test -= &xm;
                (Some(xm), Some(ym))
            } else {
                (None, None)
            };
            let w = ridge_fit(&x, &y, cfg.ridge_lambda)?;
            let mut pred = test * w;
            if let (Some(_), Some(ym)) = (x_mean, y_mean) {
                pred += ym;
            }
            Ok(rmse(pred.as_slice(), &cfg.ground_truth))
        })
        .collect()
}

/// Leave-one-group-out cross-validation repeated over `n_runs` seeds
/// (`seed + run`). Folds are identified by group id, so the corpus order
/// does not matter.
pub fn logo_cv(transcripts: &[Transcript], cfg: &ExperimentConfig) -> Result<EvalReport, Error> {
    cfg.validate()?;
    let groups = prepare(transcripts)?;
    let per_run: Vec<Vec<f64>> = install(cfg.jobs, || {
        (0..cfg.n_runs)
            .into_par_iter()
            .map(|run| run_once(&groups, cfg, run))
            .collect::<Result<Vec<_>, Error>>()
    })?;
    Ok(summarize(&groups, cfg, &per_run))
}

fn summarize(groups: &[Group<'_>], cfg: &ExperimentConfig, per_run: &[Vec<f64>]) -> EvalReport {
    let scores = groups
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let runs: Vec<f64> = per_run.iter().map(|r| r[gi]).collect();
            let (rmse_mean, rmse_stderr) = mean_stderr(&runs);
            GroupScore {
                group: g.transcript.group_id.clone(),
                rmse_mean,
                rmse_stderr,
                runs,
            }
        })
        .collect();
    let overall: Vec<f64> = per_run
        .iter()
        .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        .collect();
    let (overall_mean, overall_stderr) = mean_stderr(&overall);
    EvalReport {
        alpha: cfg.friction.alpha,
        beta: cfg.friction.beta,
        k: cfg.k,
        n_runs: cfg.n_runs,
        ground_truth: cfg.ground_truth,
        groups: scores,
        overall_mean,
        overall_stderr,
    }
}

/// One report per history window in `cfg.k_values`, laid out like a
/// group × k table.
pub fn evaluate_windows(
    transcripts: &[Transcript],
    cfg: &ExperimentConfig,
) -> Result<Vec<EvalReport>, Error> {
    cfg.k_values
        .iter()
        .map(|&k| {
            logo_cv(
                transcripts,
                &cfg.with_cell(cfg.friction.alpha, cfg.friction.beta, k)?,
            )
        })
        .collect()
}

/// `logo_cv` for every `(alpha, beta, k)` cell, in grid order.
pub fn sweep(transcripts: &[Transcript], cfg: &ExperimentConfig) -> Result<Vec<EvalReport>, Error> {
    if cfg.alpha_grid.is_empty() || cfg.beta_grid.is_empty() || cfg.k_values.is_empty() {
        return Err(EvalError::InvalidConfig("sweep grids must be nonempty".into()).into());
    }
    let mut cells = Vec::new();
    for &alpha in &cfg.alpha_grid {
        for &beta in &cfg.beta_grid {
            for &k in &cfg.k_values {
                cells.push(cfg.with_cell(alpha, beta, k)?);
            }
        }
    }
    let groups = prepare(transcripts)?;
    install(cfg.jobs, || {
        cells
            .par_iter()
            .map(|cell| {
                let per_run = (0..cell.n_runs)
                    .map(|run| run_once(&groups, cell, run))
                    .collect::<Result<Vec<_>, Error>>()?;
                Ok(summarize(&groups, cell, &per_run))
            })
            .collect()
    })
}

fn fmt(v: f64, precision: usize) -> String {
    format!("{v:.precision$}")
}

/// `group,k,rmse_mean,rmse_stderr`, one row per group and window.
pub fn write_report_csv<W: Write>(
    reports: &[EvalReport],
    precision: usize,
    out: W,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "k", "rmse_mean", "rmse_stderr"])?;
    for r in reports {
        for g in &r.groups {
            w.write_record([
                g.group.clone(),
                r.k.to_string(),
                fmt(g.rmse_mean, precision),
                fmt(g.rmse_stderr, precision),
            ])?;
        }
    }
    w.flush().map_err(Error::from)
}

/// `alpha,beta,k,group,rmse_mean,rmse_stderr`. Each cell gets an `all`
/// row averaging over groups; `per_group` adds a row per group.
pub fn write_sweep_csv<W: Write>(
    reports: &[EvalReport],
    per_group: bool,
    precision: usize,
    out: W,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "beta", "k", "group", "rmse_mean", "rmse_stderr"])?;
    for r in reports {
        let cell = [r.alpha.to_string(), r.beta.to_string(), r.k.to_string()];
        let mut row = |group: &str, mean: f64, se: f64| {
            let mut rec = cell.to_vec();
            rec.extend([group.to_string(), fmt(mean, precision), fmt(se, precision)]);
            w.write_record(&rec)
        };
        row("all", r.overall_mean, r.overall_stderr)?;
        if per_group {
            for g in &r.groups {
                row(&g.group, g.rmse_mean, g.rmse_stderr)?;
            }
        }
    }
    w.flush().map_err(Error::from)
}

/// For each named group, whether its best short-history RMSE (k = 1 or 2)
/// beats k = 4. `None` if any needed cell is missing.
pub fn short_history_wins(reports: &[EvalReport], groups: &[&str]) -> Option<Vec<(String, bool)>> {
    let score = |k: usize, group: &str| {
        reports
            .iter()
            .find(|r| r.k == k)?
            .groups
            .iter()
            .find(|g| g.group == group)
            .map(|g| g.rmse_mean)
    };
    groups
        .iter()
        .map(|g| {
            let short = score(1, g)?.min(score(2, g)?);
            Some((g.to_string(), short < score(4, g)?))
        })
        .collect()
}
