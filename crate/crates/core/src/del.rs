//! Finite possible-worlds oracle over block-weight assignments.
//!
//! A [`Universe`] enumerates every assignment of candidate weights to a set
//! of blocks. A [`WorldsModel`] is a multi-pointed Kripke structure over
//! (copies of) those assignments, and [`product_update`] applies an
//! [`EventModel`] to it. Agent beliefs are read off the worlds accessible
//! from the designated worlds; initially every world is designated, so for
//! public events this is the global reading.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{self, Block, ParseError, Proposition, BLOCK_COUNT};

pub type AgentId = String;

/// Default candidate weights per block, in grams.
pub const DEFAULT_CANDIDATES: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DelError {
    #[error("no designated world survives the update")]
    EmptyProduct,
    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),
    #[error("belief set is empty")]
    EmptyBeliefSet,
    #[error("belief sets belong to different agents (`{0}` vs `{1}`)")]
    AgentMismatch(AgentId, AgentId),
    #[error("formula mentions `{0}`, which is not part of the universe")]
    BlockOutsideUniverse(Block),
    #[error("invalid universe: {0}")]
    InvalidUniverse(String),
    #[error("invalid event model: {0}")]
    InvalidEventModel(String),
    #[error("set sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

/// A conjunction of (possibly negated) atoms. The empty conjunction is `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Formula {
    atoms: Vec<Proposition>,
}

impl Formula {
    pub fn top() -> Formula {
        Formula::default()
    }

    pub fn atom(p: Proposition) -> Formula {
        Formula { atoms: vec![p] }
    }

    pub fn all(atoms: Vec<Proposition>) -> Formula {
        Formula { atoms }
    }

    pub fn atoms(&self) -> &[Proposition] {
        &self.atoms
    }

    pub fn and(mut self, other: &Formula) -> Formula {
        self.atoms.extend_from_slice(&other.atoms);
        self
    }

    fn blocks(&self) -> impl Iterator<Item = Block> + '_ {
        self.atoms.iter().flat_map(|a| {
            let obj = match a.object {
                dsl::Operand::Block(b) => Some(b),
                dsl::Operand::Weight(_) => None,
            };
            std::iter::once(a.subject).chain(obj)
        })
    }

    pub fn holds(&self, world: &World) -> bool {
        self.atoms
            .iter()
            .all(|a| a.eval(&world.weights).unwrap_or(false))
    }
}

impl From<dsl::AssertionSet> for Formula {
    fn from(set: dsl::AssertionSet) -> Self {
        Formula {
            atoms: set.atoms().to_vec(),
        }
    }
}

impl FromStr for Formula {
    type Err = ParseError;

    /// Same grammar as assertions, without the one-atom-per-block rule;
    /// `true` denotes the empty conjunction.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("true") {
            return Ok(Formula::top());
        }
        let atoms = dsl::parse_atoms(s)?.into_iter().map(|(a, _)| a).collect();
        Ok(Formula { atoms })
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            atom.fmt(f)?;
        }
        Ok(())
    }
}

impl Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A weight assignment; blocks outside the universe have no value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct World {
    pub weights: [Option<f64>; BLOCK_COUNT],
}

/// Every assignment of `candidates` to `blocks`, first block most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    blocks: Vec<Block>,
    candidates: Vec<f64>,
    worlds: Vec<World>,
}

impl Universe {
    pub fn new(blocks: Vec<Block>, candidates: Vec<f64>) -> Result<Universe, DelError> {
        if blocks.is_empty() || candidates.is_empty() {
            return Err(DelError::InvalidUniverse(
                "need at least one block and one candidate weight".into(),
            ));
        }
        let mut seen = [false; BLOCK_COUNT];
        for b in &blocks {
            if std::mem::replace(&mut seen[b.index()], true) {
                return Err(DelError::InvalidUniverse(format!("block `{b}` repeated")));
            }
        }
        if candidates.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(DelError::InvalidUniverse(
                "candidate weights must be positive".into(),
            ));
        }
        let size = candidates
            .len()
            .checked_pow(blocks.len() as u32)
            .filter(|n| *n <= 1 << 20)
            .ok_or_else(|| DelError::InvalidUniverse("too many worlds".into()))?;
        let worlds = (0..size)
            .map(|mut code| {
                let mut weights = [None; BLOCK_COUNT];
                for b in blocks.iter().rev() {
                    weights[b.index()] = Some(candidates[code % candidates.len()]);
                    code /= candidates.len();
                }
                World { weights }
            })
            .collect();
        Ok(Universe {
            blocks,
            candidates,
            worlds,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn worlds(&self) -> &[World] {
        &self.worlds
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    pub fn check(&self, phi: &Formula) -> Result<(), DelError> {
        match phi.blocks().find(|b| !self.blocks.contains(b)) {
            Some(b) => Err(DelError::BlockOutsideUniverse(b)),
            None => Ok(()),
        }
    }

    /// The worlds satisfying `phi`.
    pub fn extension(&self, phi: &Formula) -> Result<FixedBitSet, DelError> {
        self.check(phi)?;
        let mut set = FixedBitSet::with_capacity(self.len());
        for (i, w) in self.worlds.iter().enumerate() {
            set.set(i, phi.holds(w));
        }
        Ok(set)
    }

    pub fn all(&self) -> FixedBitSet {
        let mut set = FixedBitSet::with_capacity(self.len());
        set.insert_range(..);
        set
    }
}

impl Default for Universe {
    fn default() -> Self {
        Universe::new(Block::ALL.to_vec(), DEFAULT_CANDIDATES.to_vec()).expect("valid default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub pre: Formula,
}

/// Events with preconditions, per-agent accessibility, and the designated
/// (actually occurring) events. Agents absent from `access` use
/// `default_access`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventModel {
    pub events: Vec<Event>,
    #[serde(default)]
    pub access: BTreeMap<AgentId, Vec<(usize, usize)>>,
    pub default_access: Vec<(usize, usize)>,
    pub designated: Vec<usize>,
}

impl EventModel {
    /// A single event with precondition `phi` that every agent observes.
    pub fn public_announcement(phi: Formula) -> EventModel {
        EventModel {
            events: vec![Event {
                name: "announce".into(),
                pre: phi,
            }],
            access: BTreeMap::new(),
            default_access: vec![(0, 0)],
            designated: vec![0],
        }
    }

    /// `agent` learns `phi`; everyone else considers that nothing happened.
    pub fn private_announcement(agent: &str, phi: Formula) -> EventModel {
        EventModel {
            events: vec![
                Event {
                    name: "learn".into(),
                    pre: phi,
                },
                Event {
                    name: "skip".into(),
                    pre: Formula::top(),
                },
            ],
            access: BTreeMap::from([(agent.to_string(), vec![(0, 0), (1, 1)])]),
            default_access: vec![(0, 1), (1, 1)],
            designated: vec![0],
        }
    }

    fn validate(&self) -> Result<(), DelError> {
        let n = self.events.len();
        if n == 0 {
            return Err(DelError::InvalidEventModel("no events".into()));
        }
        let in_range = |pairs: &[(usize, usize)]| pairs.iter().all(|&(a, b)| a < n && b < n);
        if !in_range(&self.default_access) || !self.access.values().all(|p| in_range(p)) {
            return Err(DelError::InvalidEventModel(
                "access pair refers to a missing event".into(),
            ));
        }
        if self.designated.is_empty() || self.designated.iter().any(|&e| e >= n) {
            return Err(DelError::InvalidEventModel(
                "designated events must be nonempty and in range".into(),
            ));
        }
        Ok(())
    }

    fn successors(&self, agent: &str) -> Vec<Vec<usize>> {
        let pairs = self.access.get(agent).unwrap_or(&self.default_access);
        let mut succ = vec![Vec::new(); self.events.len()];
        for &(a, b) in pairs {
            succ[a].push(b);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        succ
    }
}

/// Evidence channels: acting, saying and seeing are believing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceKind {
    /// Private to the actor: others see the act, not its content.
    Do,
    /// Public: everyone hears the utterance.
    Say,
    See(Visibility),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Private,
}

/// The event model after which `agent` believes `phi`.
pub fn evidence_event(kind: EvidenceKind, agent: &str, phi: Formula) -> EventModel {
    match kind {
        EvidenceKind::Say | EvidenceKind::See(Visibility::Public) => {
            EventModel::public_announcement(phi)
        }
        EvidenceKind::Do | EvidenceKind::See(Visibility::Private) => {
            EventModel::private_announcement(agent, phi)
        }
    }
}

/// Serializable description from which a model is rebuilt by replaying
/// its history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub blocks: Vec<Block>,
    pub candidates: Vec<f64>,
    pub agents: Vec<AgentId>,
    #[serde(default)]
    pub history: Vec<EventModel>,
}

#[derive(Debug, Clone)]
pub struct WorldsModel {
    universe: Arc<Universe>,
    agents: Vec<AgentId>,
    /// Universe index of each model world.
    base: Vec<usize>,
    /// Per agent, the successor set of each world.
    access: BTreeMap<AgentId, Vec<FixedBitSet>>,
    designated: FixedBitSet,
    history: Vec<EventModel>,
}

impl WorldsModel {
    /// Every agent considers every world possible; all worlds designated.
    pub fn ignorant(universe: Arc<Universe>, agents: &[&str]) -> WorldsModel {
        let n = universe.len();
        let mut full = FixedBitSet::with_capacity(n);
        full.insert_range(..);
        let access = agents
            .iter()
            .map(|a| (a.to_string(), vec![full.clone(); n]))
            .collect();
        WorldsModel {
            universe,
            agents: agents.iter().map(|a| a.to_string()).collect(),
            base: (0..n).collect(),
            access,
            designated: full,
            history: Vec::new(),
        }
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<WorldsModel, DelError> {
        let universe = Arc::new(Universe::new(spec.blocks.clone(), spec.candidates.clone())?);
        let agents: Vec<&str> = spec.agents.iter().map(String::as_str).collect();
        spec.history
            .iter()
            .try_fold(WorldsModel::ignorant(universe, &agents), |m, e| {
                product_update(&m, e)
            })
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            blocks: self.universe.blocks.clone(),
            candidates: self.universe.candidates.clone(),
            agents: self.agents.clone(),
            history: self.history.clone(),
        }
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn world(&self, i: usize) -> &World {
        &self.universe.worlds[self.base[i]]
    }

    pub fn base_index(&self, i: usize) -> usize {
        self.base[i]
    }

    pub fn designated(&self) -> &FixedBitSet {
        &self.designated
    }

    pub fn successors(&self, agent: &str, world: usize) -> Result<&FixedBitSet, DelError> {
        Ok(&self.relation(agent)?[world])
    }

    fn relation(&self, agent: &str) -> Result<&[FixedBitSet], DelError> {
        self.access
            .get(agent)
            .map(Vec::as_slice)
            .ok_or_else(|| DelError::UnknownAgent(agent.to_string()))
    }

    fn extension(&self, phi: &Formula) -> Result<FixedBitSet, DelError> {
        self.universe.check(phi)?;
        let mut set = FixedBitSet::with_capacity(self.len());
        for i in 0..self.len() {
            set.set(i, phi.holds(self.world(i)));
        }
        Ok(set)
    }

    /// Model worlds `agent` considers possible from any designated world.
    fn doxastic_worlds(&self, agent: &str) -> Result<FixedBitSet, DelError> {
        let rel = self.relation(agent)?;
        let mut reach = FixedBitSet::with_capacity(self.len());
        for d in self.designated.ones() {
            reach.union_with(&rel[d]);
        }
        Ok(reach)
    }

    /// `phi` holds in every world accessible to `agent` from every
    /// designated world.
    pub fn believes(&self, agent: &str, phi: &Formula) -> Result<bool, DelError> {
        let reach = self.doxastic_worlds(agent)?;
        Ok(reach.is_subset(&self.extension(phi)?))
    }

    /// Pointed variant: evaluated from a single world.
    pub fn believes_at(&self, agent: &str, world: usize, phi: &Formula) -> Result<bool, DelError> {
        let rel = self.relation(agent)?;
        Ok(rel[world].is_subset(&self.extension(phi)?))
    }

    /// The agent's belief state as a set of universe worlds.
    pub fn belief_set(&self, agent: &str) -> Result<BeliefSet, DelError> {
        let reach = self.doxastic_worlds(agent)?;
        let mut worlds = FixedBitSet::with_capacity(self.universe.len());
        for i in reach.ones() {
            worlds.insert(self.base[i]);
        }
        Ok(BeliefSet {
            agent: agent.to_string(),
            worlds,
        })
    }
}

/// `M ⊗ E`: pairs `(w, e)` with `w ⊨ pre(e)`; `(w,e) R_a (w',e')` iff
/// `w R_a w'` and `e R_a e'`; valuation from `w`.
pub fn product_update(m: &WorldsModel, e: &EventModel) -> Result<WorldsModel, DelError> {
    e.validate()?;
    for ev in &e.events {
        m.universe.check(&ev.pre)?;
    }
    let n = m.len();
    // index[event][world] = position in the product, if the pair survives.
    let mut index = vec![vec![None; n]; e.events.len()];
    let mut base = Vec::new();
    let mut origin = Vec::new();
    for (ei, (ev, slot)) in e.events.iter().zip(index.iter_mut()).enumerate() {
        for (w, pos) in slot.iter_mut().enumerate() {
            if ev.pre.holds(m.world(w)) {
                *pos = Some(base.len());
                base.push(m.base[w]);
                origin.push((w, ei));
            }
        }
    }

    let size = base.len();
    let mut designated = FixedBitSet::with_capacity(size);
    for (i, &(w, ei)) in origin.iter().enumerate() {
        if m.designated.contains(w) && e.designated.contains(&ei) {
            designated.insert(i);
        }
    }
    if designated.is_clear() {
        return Err(DelError::EmptyProduct);
    }

    let mut access = BTreeMap::new();
    for agent in &m.agents {
        let rel = m.relation(agent)?;
        let event_succ = e.successors(agent);
        // Rows depend only on the old row and the event; models tend to
        // share rows heavily, so build each distinct one once.
        let mut cache: HashMap<(&FixedBitSet, usize), FixedBitSet> = HashMap::new();
        let rows = origin
            .iter()
            .map(|&(w, ei)| {
                cache
                    .entry((&rel[w], ei))
                    .or_insert_with(|| {
                        let mut row = FixedBitSet::with_capacity(size);
                        for &ej in &event_succ[ei] {
                            let slot = &index[ej];
                            for w2 in rel[w].ones() {
                                if let Some(j) = slot[w2] {
                                    row.insert(j);
                                }
                            }
                        }
                        row
                    })
                    .clone()
            })
            .collect();
        access.insert(agent.clone(), rows);
    }

    let mut history = m.history.clone();
    history.push(e.clone());
    Ok(WorldsModel {
        universe: Arc::clone(&m.universe),
        agents: m.agents.clone(),
        base,
        access,
        designated,
        history,
    })
}

/// An agent's set of viable worlds, as universe indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefSet {
    pub agent: AgentId,
    pub worlds: FixedBitSet,
}

impl BeliefSet {
    pub fn new(agent: &str, worlds: FixedBitSet) -> BeliefSet {
        BeliefSet {
            agent: agent.to_string(),
            worlds,
        }
    }
}

/// `|{w ∈ B : w ⊨ φ} ∩ E| / |B|`.
pub fn set_alignment(
    universe: &Universe,
    belief: &BeliefSet,
    phi: &Formula,
    evidence: &FixedBitSet,
) -> Result<f64, DelError> {
    let total = belief.worlds.count_ones(..);
    if total == 0 {
        return Err(DelError::EmptyBeliefSet);
    }
    if belief.worlds.len() != universe.len() {
        return Err(DelError::SizeMismatch(belief.worlds.len(), universe.len()));
    }
    if evidence.len() != universe.len() {
        return Err(DelError::SizeMismatch(evidence.len(), universe.len()));
    }
    let mut hits = universe.extension(phi)?;
    hits.intersect_with(&belief.worlds);
    hits.intersect_with(evidence);
    Ok(hits.count_ones(..) as f64 / total as f64)
}

/// Friction in world semantics: `1 - set_alignment`, in `[0, 1]`.
pub fn set_friction(
    universe: &Universe,
    belief: &BeliefSet,
    phi: &Formula,
    evidence: &FixedBitSet,
) -> Result<f64, DelError> {
    set_alignment(universe, belief, phi, evidence).map(|a| 1.0 - a)
}

/// A revision is frictive when it re-admits worlds the old state excluded,
/// so it cannot be reached by filtering alone.
pub fn is_frictive_revision(old: &BeliefSet, new: &BeliefSet) -> Result<bool, DelError> {
    if old.agent != new.agent {
        return Err(DelError::AgentMismatch(
            old.agent.clone(),
            new.agent.clone(),
        ));
    }
    if old.worlds.len() != new.worlds.len() {
        return Err(DelError::SizeMismatch(old.worlds.len(), new.worlds.len()));
    }
    Ok(!new.worlds.is_subset(&old.worlds))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(text: &str) -> Formula {
        text.parse().unwrap()
    }

    fn small() -> Arc<Universe> {
        Arc::new(Universe::new(vec![Block::Red, Block::Blue], vec![10.0, 20.0]).unwrap())
    }

    fn set_of(n: usize, members: &[usize]) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(n);
        for &m in members {
            s.insert(m);
        }
        s
    }

    #[test]
    fn universe_enumeration() {
        let u = small();
        assert_eq!(u.len(), 4);
        assert_eq!(u.worlds()[1].weights[..2], [Some(10.0), Some(20.0)]);
        assert_eq!(u.worlds()[1].weights[2], None);
        assert_eq!(Universe::default().len(), 3125);
        assert!(Universe::new(vec![Block::Red, Block::Red], vec![10.0]).is_err());
    }

    #[test]
    fn tautology_announcement_is_identity() {
        let m = WorldsModel::ignorant(small(), &["a", "b"]);
        let out = product_update(&m, &EventModel::public_announcement(Formula::top())).unwrap();
        assert_eq!(out.len(), m.len());
        for agent in ["a", "b"] {
            for w in 0..m.len() {
                assert_eq!(
                    out.successors(agent, w).unwrap(),
                    m.successors(agent, w).unwrap()
                );
                assert_eq!(out.world(w), m.world(w));
            }
        }
        assert_eq!(out.designated(), m.designated());
    }

    #[test]
    fn public_announcement_filters() {
        let m = WorldsModel::ignorant(small(), &["a", "b"]);
        assert!(!m.believes("a", &phi("blue=10")).unwrap());
        let out = product_update(&m, &EventModel::public_announcement(phi("red=10"))).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.believes("a", &phi("red=10")).unwrap());
        assert!(out.believes("b", &phi("red=10")).unwrap());
        assert!(out.believes("a", &Formula::top()).unwrap());
        assert!(!out.believes("a", &phi("blue=10")).unwrap());
    }

    #[test]
    fn unsatisfiable_announcement_is_empty_product() {
        let m = WorldsModel::ignorant(Arc::new(Universe::default()), &["a"]);
        let err = product_update(&m, &EventModel::public_announcement(phi("red=60"))).unwrap_err();
        assert_eq!(err, DelError::EmptyProduct);
    }

    #[test]
    fn errors() {
        let m = WorldsModel::ignorant(small(), &["a"]);
        assert_eq!(
            m.believes("z", &Formula::top()).unwrap_err(),
            DelError::UnknownAgent("z".into())
        );
        assert_eq!(
            m.believes("a", &phi("green=10")).unwrap_err(),
            DelError::BlockOutsideUniverse(Block::Green)
        );
    }

    #[test]
    fn set_alignment_examples() {
        let u = small();
        let all = u.all();
        let red10 = BeliefSet::new("a", u.extension(&phi("red=10")).unwrap());
        assert_eq!(
            set_alignment(&u, &red10, &phi("blue=10"), &all).unwrap(),
            0.5
        );
        assert_eq!(
            set_alignment(&u, &red10, &phi("red<20"), &all).unwrap(),
            1.0
        );
        assert_eq!(
            set_alignment(&u, &red10, &phi("red=20"), &all).unwrap(),
            0.0
        );
        assert_eq!(set_friction(&u, &red10, &phi("red=20"), &all).unwrap(), 1.0);
        let empty = BeliefSet::new("a", FixedBitSet::with_capacity(4));
        assert_eq!(
            set_alignment(&u, &empty, &Formula::top(), &all).unwrap_err(),
            DelError::EmptyBeliefSet
        );
        // Evidence restricts the overlap.
        let ev = set_of(4, &[0]);
        assert_eq!(
            set_alignment(&u, &red10, &Formula::top(), &ev).unwrap(),
            0.5
        );
    }

    #[test]
    fn frictive_revision_examples() {
        let old = BeliefSet::new("a", set_of(3, &[0, 1]));
        assert!(!is_frictive_revision(&old, &old).unwrap());
        assert!(!is_frictive_revision(&old, &BeliefSet::new("a", set_of(3, &[0]))).unwrap());
        assert!(is_frictive_revision(&old, &BeliefSet::new("a", set_of(3, &[0, 2]))).unwrap());
        assert!(matches!(
            is_frictive_revision(&old, &BeliefSet::new("b", set_of(3, &[0]))),
            Err(DelError::AgentMismatch(..))
        ));
    }

    #[test]
    fn public_announcement_is_never_frictive() {
        let m = WorldsModel::ignorant(small(), &["a"]);
        let before = m.belief_set("a").unwrap();
        let out = product_update(&m, &EventModel::public_announcement(phi("blue!=20"))).unwrap();
        let after = out.belief_set("a").unwrap();
        assert!(after.worlds.is_subset(&before.worlds));
        assert!(!is_frictive_revision(&before, &after).unwrap());
    }

    #[test]
    fn evidence_events() {
        let m = WorldsModel::ignorant(small(), &["a", "b"]);
        let p = phi("red=10");
        for kind in [
            EvidenceKind::Do,
            EvidenceKind::Say,
            EvidenceKind::See(Visibility::Public),
            EvidenceKind::See(Visibility::Private),
        ] {
            let out = product_update(&m, &evidence_event(kind, "a", p.clone())).unwrap();
            assert!(out.believes("a", &p).unwrap(), "{kind:?}");
        }
        let private = product_update(
            &m,
            &evidence_event(EvidenceKind::See(Visibility::Private), "a", p.clone()),
        )
        .unwrap();
        assert!(!private.believes("b", &p).unwrap());
        assert_eq!(
            private.belief_set("b").unwrap().worlds,
            m.belief_set("b").unwrap().worlds
        );
        let public =
            product_update(&m, &evidence_event(EvidenceKind::Say, "a", p.clone())).unwrap();
        assert!(public.believes("b", &p).unwrap());
    }

    #[test]
    fn spec_round_trip_replays_history() {
        let m = WorldsModel::ignorant(small(), &["a", "b"]);
        let m = product_update(&m, &evidence_event(EvidenceKind::Do, "a", phi("red=10"))).unwrap();
        let m = product_update(&m, &EventModel::public_announcement(phi("blue > red"))).unwrap();
        let json = serde_json::to_string(&m.spec()).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        let rebuilt = WorldsModel::from_spec(&back).unwrap();
        assert_eq!(rebuilt.len(), m.len());
        for agent in ["a", "b"] {
            assert_eq!(
                rebuilt.belief_set(agent).unwrap(),
                m.belief_set(agent).unwrap()
            );
        }
    }

    #[test]
    fn formula_parsing() {
        assert_eq!(phi("true"), Formula::top());
        assert_eq!(phi("red=10 & red!=20").atoms().len(), 2);
        assert_eq!(phi("red=10 & red!=20").to_string(), "red = 10 & red != 20");
        assert_eq!(Formula::top().to_string(), "true");
    }
}
