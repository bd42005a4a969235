//! Question, evidence and fact banks.
//!
//! A proposition enters the question bank when posed, moves to the evidence
//! bank once its support is sufficient and its friction low, and becomes a
//! fact once friction is near zero. Facts must stay mutually consistent.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{self, AlignmentWeights, BeliefVector, FrictionConfig, Vec5};
use crate::dialogue::Transcript;
use crate::dsl::{self, Operand, Proposition, Relation, BLOCK_COUNT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BankError {
    #[error("`{0}` is already tracked")]
    AlreadyTracked(Proposition),
    #[error("`{0}` is not tracked")]
    UnknownProposition(Proposition),
    #[error("`{0}` is not in the evidence bank")]
    NotInEvidenceBank(Proposition),
    #[error("`{prop}` contradicts accepted fact `{fact}`")]
    InconsistentFact {
        prop: Proposition,
        fact: Proposition,
    },
    #[error("support weight must be nonnegative and finite, got {0}")]
    InvalidWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bank {
    Q,
    E,
    F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub source: usize,
    pub evidence: Vec5,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub prop: Proposition,
    pub support: Vec<Support>,
    pub accumulated_strength: f64,
    /// Friction score seen at the most recent transition attempt.
    pub last_friction: Option<f64>,
}

impl EvidenceRecord {
    fn new(prop: Proposition) -> EvidenceRecord {
        EvidenceRecord {
            prop,
            support: Vec::new(),
            accumulated_strength: 0.0,
            last_friction: None,
        }
    }

    /// Sum of the supporting evidence vectors.
    pub fn evidence_vector(&self) -> Vec5 {
        self.support.iter().fold([0.0; BLOCK_COUNT], |acc, s| {
            belief::add_scaled(&acc, s.weight, &s.evidence)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub evidence_min: f64,
    pub friction_low: f64,
    pub friction_zero: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            evidence_min: 1.0,
            friction_low: 0.3,
            friction_zero: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommonGround {
    bank: BTreeMap<Proposition, Bank>,
    records: BTreeMap<Proposition, EvidenceRecord>,
    pub thresholds: Thresholds,
}

impl CommonGround {
    pub fn new(thresholds: Thresholds) -> CommonGround {
        CommonGround {
            thresholds,
            ..CommonGround::default()
        }
    }

    pub fn bank_of(&self, prop: &Proposition) -> Option<Bank> {
        self.bank.get(prop).copied()
    }

    fn members(&self, which: Bank) -> impl Iterator<Item = &Proposition> {
        self.bank
            .iter()
            .filter(move |(_, b)| **b == which)
            .map(|(p, _)| p)
    }

    pub fn qbank(&self) -> BTreeSet<Proposition> {
        self.members(Bank::Q).copied().collect()
    }

    pub fn ebank(&self) -> Vec<&EvidenceRecord> {
        self.members(Bank::E).map(|p| &self.records[p]).collect()
    }

    pub fn fbank(&self) -> BTreeSet<Proposition> {
        self.members(Bank::F).copied().collect()
    }

    pub fn record(&self, prop: &Proposition) -> Option<&EvidenceRecord> {
        self.records.get(prop)
    }

    pub fn pose(&self, prop: Proposition) -> Result<CommonGround, BankError> {
        if self.bank.contains_key(&prop) {
            return Err(BankError::AlreadyTracked(prop));
        }
        let mut next = self.clone();
        next.bank.insert(prop, Bank::Q);
        next.records.insert(prop, EvidenceRecord::new(prop));
        Ok(next)
    }

    /// Records support and promotes Q→E when strength reaches
    /// `evidence_min` and friction is at most `friction_low`.
    pub fn add_evidence(
        &self,
        prop: Proposition,
        support: Support,
        friction_score: f64,
    ) -> Result<CommonGround, BankError> {
        if !(support.weight.is_finite() && support.weight >= 0.0) {
            return Err(BankError::InvalidWeight(support.weight));
        }
        let bank = match self.bank.get(&prop) {
            Some(b @ (Bank::Q | Bank::E)) => *b,
            _ => return Err(BankError::UnknownProposition(prop)),
        };
        let mut next = self.clone();
        let record = next
            .records
            .get_mut(&prop)
            .expect("tracked propositions have records");
        record.accumulated_strength += support.weight;
        record.support.push(support);
        record.last_friction = Some(friction_score);
        if bank == Bank::Q
            && record.accumulated_strength >= self.thresholds.evidence_min
            && friction_score <= self.thresholds.friction_low
        {
            next.bank.insert(prop, Bank::E);
        }
        Ok(next)
    }

    /// Promotes E→F when friction is at most `friction_zero`.
    pub fn promote_to_fact(
        &self,
        prop: Proposition,
        friction_score: f64,
    ) -> Result<CommonGround, BankError> {
        if self.bank.get(&prop) != Some(&Bank::E) {
            return Err(BankError::NotInEvidenceBank(prop));
        }
        let mut next = self.clone();
        if let Some(r) = next.records.get_mut(&prop) {
            r.last_friction = Some(friction_score);
        }
        if friction_score > self.thresholds.friction_zero {
            return Ok(next);
        }
        if let Some(fact) = self.members(Bank::F).find(|f| !consistent(&[**f, prop])) {
            return Err(BankError::InconsistentFact { prop, fact: *fact });
        }
        if !consistent(
            &self
                .members(Bank::F)
                .copied()
                .chain([prop])
                .collect::<Vec<_>>(),
        ) {
            let fact = *self
                .members(Bank::F)
                .next()
                .expect("nonempty when inconsistent");
            return Err(BankError::InconsistentFact { prop, fact });
        }
        next.bank.insert(prop, Bank::F);
        Ok(next)
    }

    /// Accepted weight per block, 0 where nothing is accepted.
    pub fn fbank_vector(&self) -> Vec5 {
        let mut out = [0.0; BLOCK_COUNT];
        for p in self.members(Bank::F) {
            if let Some((block, grams)) = p.specific_weight() {
                out[block.index()] = grams;
            }
        }
        out
    }

    pub fn snapshot(&self) -> BankSnapshot {
        BankSnapshot {
            qbank: self.members(Bank::Q).map(|p| p.to_string()).collect(),
            ebank: self.members(Bank::E).map(|p| p.to_string()).collect(),
            fbank: self.members(Bank::F).map(|p| p.to_string()).collect(),
            thresholds: self.thresholds,
            ledger: self.records.values().cloned().collect(),
        }
    }

    /// Fixed-width table of every tracked proposition.
    pub fn table(&self, precision: usize) -> String {
        let mut out = format!(
            "{:<20} {:<5} {:>9} {:>9}\n",
            "proposition", "bank", "strength", "friction"
        );
        for (prop, bank) in &self.bank {
            let r = &self.records[prop];
            let bank = match bank {
                Bank::Q => "Q",
                Bank::E => "E",
                Bank::F => "F",
            };
            let friction = r
                .last_friction
                .map_or_else(|| "-".to_string(), |f| format!("{f:.precision$}"));
            out.push_str(&format!(
                "{:<20} {:<5} {:>9.precision$} {:>9}\n",
                prop.to_string(),
                bank,
                r.accumulated_strength,
                friction
            ));
        }
        out
    }
}

/// JSON form of the banks: three proposition lists plus the evidence ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSnapshot {
    pub qbank: Vec<String>,
    pub ebank: Vec<String>,
    pub fbank: Vec<String>,
    pub thresholds: Thresholds,
    pub ledger: Vec<EvidenceRecord>,
}

/// Per-block feasible set: an optional exact value, excluded values, and
/// open/closed bounds.
#[derive(Default, Clone)]
struct Domain {
    exact: Option<f64>,
    excluded: Vec<f64>,
    lower: Option<(f64, bool)>,
    upper: Option<(f64, bool)>,
}

impl Domain {
    fn admits(&self, v: f64) -> bool {
        !self.excluded.contains(&v)
            && self
                .lower
                .is_none_or(|(l, strict)| if strict { v > l } else { v >= l })
            && self
                .upper
                .is_none_or(|(u, strict)| if strict { v < u } else { v <= u })
    }

    fn consistent(&self) -> bool {
        if let Some(v) = self.exact {
            return self.admits(v);
        }
        match (self.lower, self.upper) {
            (Some((l, ls)), Some((u, us))) => l < u || (l == u && !ls && !us && self.admits(l)),
            _ => true,
        }
    }
}

/// Consistency of a conjunction of atoms. Weight atoms are checked exactly
/// per block; block-to-block atoms once both sides are pinned to a value.
pub fn consistent(props: &[Proposition]) -> bool {
    let mut domains: [Domain; BLOCK_COUNT] = Default::default();
    for p in props {
        let Operand::Weight(g) = p.object else {
            continue;
        };
        let v = g.get();
        let d = &mut domains[p.subject.index()];
        match p.relation {
            Relation::Eq => {
                if d.exact.is_some_and(|e| e != v) {
                    return false;
                }
                d.exact = Some(v);
            }
            Relation::Neq => d.excluded.push(v),
            Relation::Lt | Relation::Le => {
                let strict = p.relation == Relation::Lt;
                if d.upper
                    .is_none_or(|(u, s)| v < u || (v == u && strict && !s))
                {
                    d.upper = Some((v, strict));
                }
            }
            Relation::Gt | Relation::Ge => {
                let strict = p.relation == Relation::Gt;
                if d.lower
                    .is_none_or(|(l, s)| v > l || (v == l && strict && !s))
                {
                    d.lower = Some((v, strict));
                }
            }
        }
    }
    if !domains.iter().all(Domain::consistent) {
        return false;
    }
    let pinned: [Option<f64>; BLOCK_COUNT] = std::array::from_fn(|i| domains[i].exact);
    props
        .iter()
        .filter(|p| matches!(p.object, Operand::Block(_)))
        .all(|p| p.eval(&pinned).unwrap_or(true))
}

/// Settings for following a dialogue through the banks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingConfig {
    pub friction: FrictionConfig,
    pub weights: AlignmentWeights,
    pub thresholds: Thresholds,
    pub support_weight: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            friction: FrictionConfig::new(1.0, 1.0).expect("valid"),
            weights: AlignmentWeights::default(),
            thresholds: Thresholds::default(),
            support_weight: 1.0,
        }
    }
}

/// Follows a transcript from `focus`'s point of view: each atom is posed on
/// first mention, every mention adds support, and friction is measured as
/// `1 - cos(belief, prop + accumulated evidence)` against the focus belief
/// at that point. Contradictions with accepted facts leave the proposition
/// in the evidence bank.
pub fn track(
    transcript: &Transcript,
    focus: &str,
    initial: BeliefVector,
    cfg: &TrackingConfig,
    rng: &mut impl rand::Rng,
) -> Result<(CommonGround, BeliefVector), crate::Error> {
    let mut cg = CommonGround::new(cfg.thresholds);
    let mut belief = initial;
    for (idx, utt) in transcript.utterances.iter().enumerate() {
        let set = utt.effective_atoms()?;
        for atom in set.atoms() {
            let single = dsl::AssertionSet::new(vec![*atom]).expect("one atom");
            let vector = dsl::encode(
                &single,
                &mut dsl::EncodingContext::with_belief(rng, &belief),
            )?;
            if cg.bank_of(atom).is_none() {
                cg = cg.pose(*atom)?;
            }
            if cg.bank_of(atom) == Some(Bank::F) {
                continue;
            }
            let prior = cg
                .record(atom)
                .map(|r| r.evidence_vector())
                .unwrap_or([0.0; BLOCK_COUNT]);
            let evidence = belief::add_scaled(&prior, cfg.support_weight, &vector);
            let f = belief::friction(belief.components(), &vector, &evidence, cfg.weights);
            let support = Support {
                source: idx,
                evidence: vector,
                weight: cfg.support_weight,
            };
            cg = cg.add_evidence(*atom, support, f)?;
            if cg.bank_of(atom) == Some(Bank::E) {
                match cg.promote_to_fact(*atom, f) {
                    Ok(next) => cg = next,
                    Err(BankError::InconsistentFact { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        if let Some(next) = crate::eval::apply_utterance(&belief, utt, focus, &cfg.friction, rng)? {
            belief = next;
        }
    }
    Ok((cg, belief))
}
