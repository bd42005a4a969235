//! Friction equilibrium: repeatedly measure friction between every
//! participant and proposition, refine the worst proposition and pull all
//! beliefs toward it by gradient descent until net friction drops below a
//! threshold.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{self, AlignmentWeights, BeliefVector, Vec5};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("malformed discourse state: {0}")]
    InvalidState(String),
    #[error("invalid equilibrium config: {0}")]
    InvalidConfig(String),
    #[error("proposition index {0} is not in the high-friction set")]
    UnknownIndex(usize),
    #[error("gradient undefined for a zero vector")]
    ZeroVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscourseState {
    pub propositions: Vec<Vec5>,
    pub beliefs: Vec<BeliefVector>,
    pub evidence: Vec<Vec5>,
    #[serde(default)]
    pub iteration: usize,
}

impl DiscourseState {
    /// A state with zero evidence for every proposition.
    pub fn new(propositions: Vec<Vec5>, beliefs: Vec<BeliefVector>) -> DiscourseState {
        let evidence = vec![[0.0; 5]; propositions.len()];
        DiscourseState {
            propositions,
            beliefs,
            evidence,
            iteration: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EquilibriumError> {
        let bad = |m: &str| Err(EquilibriumError::InvalidState(m.into()));
        if self.propositions.is_empty() {
            return bad("no propositions");
        }
        if self.beliefs.is_empty() {
            return bad("no participants");
        }
        if self.evidence.len() != self.propositions.len() {
            return bad("evidence and propositions differ in length");
        }
        let finite = |v: &Vec5| v.iter().all(|x| x.is_finite());
        if !self.propositions.iter().chain(&self.evidence).all(finite)
            || !self.beliefs.iter().all(|b| b.is_finite())
        {
            return bad("non-finite component");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineStrategy {
    EvidenceInjection,
    PropositionSoftening,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquilibriumConfig {
    pub threshold: f64,
    /// Overrides `threshold` for the stopping check only.
    pub equilibrium_threshold: Option<f64>,
    pub max_iters: usize,
    pub eta: f64,
    pub strategy: RefineStrategy,
    /// Evidence injected per refinement, as a multiple of the proposition.
    pub delta: f64,
    /// Share of the proposition moved onto the mean belief direction.
    pub sigma: f64,
    pub weights: AlignmentWeights,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig {
            threshold: 0.3,
            equilibrium_threshold: None,
            max_iters: 50,
            eta: 1.0,
            strategy: RefineStrategy::EvidenceInjection,
            delta: 0.5,
            sigma: 0.5,
            weights: AlignmentWeights::default(),
        }
    }
}

impl EquilibriumConfig {
    pub fn validate(&self) -> Result<(), EquilibriumError> {
        let bad = |m: String| Err(EquilibriumError::InvalidConfig(m));
        let in_range = |t: f64| t > 0.0 && t < 2.0;
        if !in_range(self.threshold) {
            return bad(format!(
                "threshold must lie in (0, 2), got {}",
                self.threshold
            ));
        }
        if let Some(t) = self.equilibrium_threshold {
            if !in_range(t) {
                return bad(format!("equilibrium threshold must lie in (0, 2), got {t}"));
            }
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be >= 0, got {}", self.delta));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return bad(format!("sigma must lie in [0, 1], got {}", self.sigma));
        }
        Ok(())
    }

    fn stop_threshold(&self) -> f64 {
        self.equilibrium_threshold.unwrap_or(self.threshold)
    }
}

/// `values[i][a]` is the friction of participant `a` with proposition `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionMatrix {
    pub values: Vec<Vec<f64>>,
}

impl FrictionMatrix {
    pub fn get(&self, prop: usize, agent: usize) -> f64 {
        self.values[prop][agent]
    }

    pub fn n_props(&self) -> usize {
        self.values.len()
    }

    /// Mean friction of one proposition over participants.
    pub fn row_mean(&self, prop: usize) -> f64 {
        let row = &self.values[prop];
        row.iter().sum::<f64>() / row.len() as f64
    }
}

pub fn measure_friction(s: &DiscourseState, w: AlignmentWeights) -> FrictionMatrix {
    let values = s
        .propositions
        .iter()
        .zip(&s.evidence)
        .map(|(phi, e)| {
            s.beliefs
                .iter()
                .map(|b| belief::friction(b.components(), phi, e, w))
                .collect()
        })
        .collect();
    FrictionMatrix { values }
}

/// Propositions with friction above `t` for at least one participant.
pub fn high_friction(f: &FrictionMatrix, t: f64) -> Vec<usize> {
    (0..f.n_props())
        .filter(|&i| f.values[i].iter().any(|&x| x > t))
        .collect()
}

/// Orders `high` by descending mean friction, ties by ascending index.
pub fn rank(f: &FrictionMatrix, high: &[usize]) -> Result<Vec<usize>, EquilibriumError> {
    if let Some(&bad) = high.iter().find(|&&i| i >= f.n_props()) {
        return Err(EquilibriumError::UnknownIndex(bad));
    }
    let mut out = high.to_vec();
    out.sort_by(|&a, &b| f.row_mean(b).total_cmp(&f.row_mean(a)).then(a.cmp(&b)));
    Ok(out)
}

pub fn refine(
    s: &DiscourseState,
    j: usize,
    high: &[usize],
    cfg: &EquilibriumConfig,
) -> Result<DiscourseState, EquilibriumError> {
    if !high.contains(&j) || j >= s.propositions.len() {
        return Err(EquilibriumError::UnknownIndex(j));
    }
    let mut out = s.clone();
    match cfg.strategy {
        RefineStrategy::EvidenceInjection => {
            out.evidence[j] = belief::add_scaled(&s.evidence[j], cfg.delta, &s.propositions[j]);
        }
        RefineStrategy::PropositionSoftening => {
            let m = s.beliefs.len() as f64;
            let mean: Vec5 = std::array::from_fn(|c| {
                s.beliefs.iter().map(|b| b.components()[c]).sum::<f64>() / m
            });
            let mean_norm = belief::norm(&mean);
            let phi = s.propositions[j];
            if mean_norm > 0.0 && cfg.sigma > 0.0 {
                let target: Vec5 =
                    std::array::from_fn(|c| mean[c] * belief::norm(&phi) / mean_norm);
                out.propositions[j] =
                    std::array::from_fn(|c| (1.0 - cfg.sigma) * phi[c] + cfg.sigma * target[c]);
            }
        }
    }
    Ok(out)
}

/// Gradient of `1 - cos(b, u)` with respect to `b`.
pub fn friction_gradient(b: &Vec5, u: &Vec5) -> Result<Vec5, EquilibriumError> {
    let nb = belief::norm(b);
    let nu = belief::norm(u);
    if nb == 0.0 || nu == 0.0 {
        return Err(EquilibriumError::ZeroVector);
    }
    let bu = belief::dot(b, u);
    Ok(std::array::from_fn(|i| {
        -(u[i] / (nb * nu) - bu * b[i] / (nb.powi(3) * nu))
    }))
}

pub fn gradient_step(
    b: &BeliefVector,
    target: &Vec5,
    eta: f64,
) -> Result<BeliefVector, EquilibriumError> {
    let g = friction_gradient(b.components(), target)?;
    Ok(BeliefVector::new(belief::add_scaled(
        b.components(),
        -eta,
        &g,
    )))
}

pub fn net_friction(f: &FrictionMatrix) -> f64 {
    let cells: usize = f.values.iter().map(Vec::len).sum();
    let total: f64 = f.values.iter().flatten().sum();
    total / cells as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Equilibrium,
    NoEquilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Net friction measured at the start of the iteration.
    pub net_friction: f64,
    pub refined_index: Option<usize>,
    /// Mean friction of the refined proposition after refinement, before
    /// and after the belief step.
    pub refined_before: Option<f64>,
    pub refined_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub state: DiscourseState,
    pub trace: Vec<TraceEntry>,
    pub outcome: Outcome,
    pub final_net_friction: f64,
}

fn target(s: &DiscourseState, j: usize, w: AlignmentWeights) -> Vec5 {
    w.combine(&s.propositions[j], &s.evidence[j])
}

pub fn solve(s: &DiscourseState, cfg: &EquilibriumConfig) -> Result<Solution, Error> {
    s.validate()?;
    cfg.validate()?;
    let stop = cfg.stop_threshold();
    let mut state = s.clone();
    let mut trace = Vec::new();
    for _ in 0..cfg.max_iters {
        let f = measure_friction(&state, cfg.weights);
        let net = net_friction(&f);
        let mut entry = TraceEntry {
            iteration: state.iteration,
            net_friction: net,
            refined_index: None,
            refined_before: None,
            refined_after: None,
        };
        if net <= stop {
            trace.push(entry);
            return Ok(Solution {
                state,
                trace,
                outcome: Outcome::Equilibrium,
                final_net_friction: net,
            });
        }
        let mut high = high_friction(&f, cfg.threshold);
        if high.is_empty() {
            // Only reachable with a separate, lower stopping threshold.
            high = (0..f.n_props()).collect();
        }
        let j = rank(&f, &high)?[0];
        let refined = refine(&state, j, &high, cfg)?;
        let u = target(&refined, j, cfg.weights);
        let beliefs = refined
            .beliefs
            .iter()
            .map(|b| gradient_step(b, &u, cfg.eta))
            .collect::<Result<Vec<_>, _>>()?;
        let before = measure_friction(&refined, cfg.weights).row_mean(j);
        state = DiscourseState {
            beliefs,
            iteration: refined.iteration + 1,
            ..refined
        };
        entry.refined_index = Some(j);
        entry.refined_before = Some(before);
        entry.refined_after = Some(measure_friction(&state, cfg.weights).row_mean(j));
        trace.push(entry);
    }
    let final_net = net_friction(&measure_friction(&state, cfg.weights));
    let outcome = if final_net <= stop {
        Outcome::Equilibrium
    } else {
        Outcome::NoEquilibrium
    };
    Ok(Solution {
        state,
        trace,
        outcome,
        final_net_friction: final_net,
    })
}

/// Scenario file: a discourse state plus solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub propositions: Vec<Vec5>,
    pub beliefs: Vec<BeliefVector>,
    #[serde(default)]
    pub evidence: Option<Vec<Vec5>>,
    #[serde(default)]
    pub config: EquilibriumConfig,
}

impl Scenario {
    pub fn state(&self) -> DiscourseState {
        DiscourseState {
            propositions: self.propositions.clone(),
            beliefs: self.beliefs.clone(),
            evidence: self
                .evidence
                .clone()
                .unwrap_or_else(|| vec![[0.0; 5]; self.propositions.len()]),
            iteration: 0,
        }
    }

    /// Random scenario: propositions with components in `[0.5, 1.5)`,
    /// beliefs in `[-1, 1)`, no evidence.
    pub fn seeded(seed: u64, agents: usize, props: usize, cfg: EquilibriumConfig) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let propositions = (0..props)
            .map(|_| std::array::from_fn(|_| rng.gen_range(0.5..1.5)))
            .collect();
        let beliefs = (0..agents)
            .map(|_| BeliefVector::new(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))))
            .collect();
        Scenario {
            propositions,
            beliefs,
            evidence: None,
            config: cfg,
        }
    }
}

/// `iteration,net_friction,refined_index`; the index is empty when the
/// iteration stopped at equilibrium.
pub fn write_trace_csv<W: Write>(
    trace: &[TraceEntry],
    precision: usize,
    out: W,
) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "net_friction", "refined_index"])?;
    for e in trace {
        w.write_record([
            e.iteration.to_string(),
            format!("{:.precision$}", e.net_friction),
            e.refined_index.map(|j| j.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(Error::from)
}
