//! Annotated dialogue transcripts: loading, focus selection and a seeded
//! generator of Weights-Task-style dialogues.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::belief::Vec5;
use crate::dsl::{self, AssertionSet, Block, ParseError, Proposition, BLOCK_COUNT};

/// Final weights of the Weights Task blocks, in grams.
pub const GROUND_TRUTH: Vec5 = [10.0, 10.0, 20.0, 30.0, 50.0];

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at `{pointer}`: {message}")]
    SchemaViolation { pointer: String, message: String },
    #[error("utterance {utterance}, assertion {assertion}: {source}")]
    Parse {
        utterance: usize,
        assertion: usize,
        #[source]
        source: ParseError,
    },
    #[error("transcript has no utterances")]
    EmptyTranscript,
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> DialogueError {
    DialogueError::SchemaViolation {
        pointer: pointer.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtteranceKind {
    Assert,
    Accept,
    Deny,
}

impl UtteranceKind {
    fn from_tag(tag: &str) -> Option<UtteranceKind> {
        match tag {
            "assert" => Some(UtteranceKind::Assert),
            "accept" => Some(UtteranceKind::Accept),
            "deny" => Some(UtteranceKind::Deny),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: String,
    pub kind: UtteranceKind,
    pub assertions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Position in the dialogue; implied by order in the file.
    #[serde(skip)]
    pub index: usize,
}

impl Utterance {
    /// All assertion strings parsed into one conjunction.
    pub fn parsed(&self) -> Result<AssertionSet, DialogueError> {
        let mut atoms: Vec<Proposition> = Vec::new();
        for (ai, text) in self.assertions.iter().enumerate() {
            let set = dsl::parse(text).map_err(|source| DialogueError::Parse {
                utterance: self.index,
                assertion: ai,
                source,
            })?;
            for atom in set.atoms() {
                if atoms.iter().any(|a| a.subject == atom.subject) {
                    return Err(DialogueError::Parse {
                        utterance: self.index,
                        assertion: ai,
                        source: ParseError {
                            kind: dsl::ParseErrorKind::DuplicateBlock(atom.subject),
                            span: 0..text.len(),
                        },
                    });
                }
                atoms.push(*atom);
            }
        }
        Ok(AssertionSet::new(atoms).expect("duplicates rejected above"))
    }

    /// The content the utterance commits to: denials contribute the
    /// negation of each atom.
    pub fn effective_atoms(&self) -> Result<AssertionSet, DialogueError> {
        let set = self.parsed()?;
        Ok(match self.kind {
            UtteranceKind::Deny => set.negated(),
            _ => set,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub group_id: String,
    pub participants: Vec<String>,
    pub utterances: Vec<Utterance>,
}

impl Transcript {
    /// Validates a JSON document against the transcript schema.
    pub fn from_json(text: &str) -> Result<Transcript, DialogueError> {
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Transcript, DialogueError> {
        let obj = value
            .as_object()
            .ok_or_else(|| violation("", "expected an object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "group_id" | "participants" | "utterances") {
                return Err(violation(format!("/{key}"), "unexpected field"));
            }
        }
        let group_id = obj
            .get("group_id")
            .and_then(Value::as_str)
            .ok_or_else(|| violation("/group_id", "expected a string"))?
            .to_string();
        let participants: Vec<String> = obj
            .get("participants")
            .and_then(Value::as_array)
            .ok_or_else(|| violation("/participants", "expected an array"))?
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| violation(format!("/participants/{i}"), "expected a string"))
            })
            .collect::<Result<_, _>>()?;
        if participants.len() < 2 {
            return Err(violation("/participants", "need at least two participants"));
        }
        let distinct: BTreeSet<&String> = participants.iter().collect();
        if distinct.len() != participants.len() {
            return Err(violation("/participants", "participant ids must be unique"));
        }
        let raw = obj
            .get("utterances")
            .and_then(Value::as_array)
            .ok_or_else(|| violation("/utterances", "expected an array"))?;
        let mut utterances = Vec::with_capacity(raw.len());
        for (i, u) in raw.iter().enumerate() {
            let at = |field: &str| format!("/utterances/{i}{field}");
            let uo = u
                .as_object()
                .ok_or_else(|| violation(at(""), "expected an object"))?;
            for key in uo.keys() {
                if !matches!(key.as_str(), "speaker" | "kind" | "assertions" | "text") {
                    return Err(violation(at(&format!("/{key}")), "unexpected field"));
                }
            }
            let speaker = uo
                .get("speaker")
                .and_then(Value::as_str)
                .ok_or_else(|| violation(at("/speaker"), "expected a string"))?;
            if !participants.iter().any(|p| p == speaker) {
                return Err(violation(
                    at("/speaker"),
                    format!("`{speaker}` is not a participant"),
                ));
            }
            let kind = uo
                .get("kind")
                .and_then(Value::as_str)
                .and_then(UtteranceKind::from_tag)
                .ok_or_else(|| {
                    violation(at("/kind"), "expected \"assert\", \"accept\" or \"deny\"")
                })?;
            let assertions: Vec<String> = uo
                .get("assertions")
                .and_then(Value::as_array)
                .ok_or_else(|| violation(at("/assertions"), "expected an array"))?
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    a.as_str().map(str::to_string).ok_or_else(|| {
                        violation(at(&format!("/assertions/{j}")), "expected a string")
                    })
                })
                .collect::<Result<_, _>>()?;
            let text = match uo.get("text") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) => Some(s.clone()),
                Some(_) => return Err(violation(at("/text"), "expected a string")),
            };
            let utt = Utterance {
                speaker: speaker.to_string(),
                kind,
                assertions,
                text,
                index: i,
            };
            let set = utt.parsed()?;
            if kind == UtteranceKind::Accept {
                if let Some(j) = set
                    .atoms()
                    .iter()
                    .position(|a| a.specific_weight().is_none())
                {
                    return Err(violation(
                        at("/assertions"),
                        format!("accept must reference `block = grams` atoms only (atom {j})"),
                    ));
                }
            }
            utterances.push(utt);
        }
        Ok(Transcript {
            group_id,
            participants,
            utterances,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcripts serialize")
    }

    pub fn utterance_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts: BTreeMap<&str, usize> =
            self.participants.iter().map(|p| (p.as_str(), 0)).collect();
        for u in &self.utterances {
            *counts.entry(u.speaker.as_str()).or_default() += 1;
        }
        counts
    }
}

pub fn load(path: &Path) -> Result<Transcript, DialogueError> {
    let text = fs::read_to_string(path).map_err(|source| DialogueError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Transcript::from_json(&text)
}

pub fn save(transcript: &Transcript, path: &Path) -> Result<(), DialogueError> {
    let io = |source| DialogueError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(transcript.to_json().as_bytes())
        .map_err(io)?;
    file.write_all(b"\n").map_err(io)
}

/// Loads every `*.json` transcript in a directory (or a single file),
/// ordered by file name.
pub fn load_corpus(path: &Path) -> Result<Vec<Transcript>, DialogueError> {
    if path.is_file() {
        return Ok(vec![load(path)?]);
    }
    let io = |source| DialogueError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files.iter().map(|f| load(f)).collect()
}

/// The participant with the fewest utterances; ties go to the
/// lexicographically smallest id.
pub fn select_focus(t: &Transcript) -> Result<String, DialogueError> {
    if t.utterances.is_empty() {
        return Err(DialogueError::EmptyTranscript);
    }
    let counts = t.utterance_counts();
    let (id, _) = counts
        .iter()
        .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .expect("at least two participants");
    Ok(id.to_string())
}

/// Whether an utterance's committed content is false under `truth`.
pub fn contradicts(utt: &Utterance, truth: &Vec5) -> Result<bool, DialogueError> {
    let weights = truth.map(Some);
    let set = utt.effective_atoms()?;
    Ok(set.atoms().iter().any(|a| a.eval(&weights) == Some(false)))
}

/// Writes one row per utterance with its encoding (zero jitter seed per
/// row index) for inspection.
pub fn write_encodings_csv<W: Write>(
    t: &Transcript,
    seed: u64,
    out: W,
) -> Result<(), crate::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index",
        "speaker",
        "kind",
        "assertions",
        "red",
        "blue",
        "green",
        "purple",
        "yellow",
    ])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference = crate::belief::BeliefVector::new(GROUND_TRUTH);
    for u in &t.utterances {
        let set = u.effective_atoms()?;
        let v = dsl::encode(
            &set,
            &mut dsl::EncodingContext::with_belief(&mut rng, &reference),
        )?;
        let kind = match u.kind {
            UtteranceKind::Assert => "assert",
            UtteranceKind::Accept => "accept",
            UtteranceKind::Deny => "deny",
        };
        let mut row = vec![
            u.index.to_string(),
            u.speaker.clone(),
            kind.to_string(),
            u.assertions.join(" & "),
        ];
        row.extend(v.iter().map(|c| format!("{c:.3}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(crate::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub group_id: String,
    pub n_utterances: usize,
    /// Fraction of assertions that contradict the ground truth.
    pub frictive_rate: f64,
    pub ground_truth: Vec5,
    pub participants: usize,
    /// Fraction of turns taken by the focus participant.
    pub focus_share: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            group_id: "synthetic".into(),
            n_utterances: 60,
            frictive_rate: 0.3,
            ground_truth: GROUND_TRUTH,
            participants: 3,
            focus_share: 0.1,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), DialogueError> {
        let bad = |m: &str| Err(DialogueError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.frictive_rate) {
            return bad("frictive_rate must lie in [0, 1]");
        }
        if !(0.0..0.5).contains(&self.focus_share) {
            return bad("focus_share must lie in [0, 0.5)");
        }
        if self.participants < 2 {
            return bad("need at least two participants");
        }
        if self.n_utterances == 0 {
            return bad("n_utterances must be positive");
        }
        if self
            .ground_truth
            .iter()
            .any(|g| !(g.is_finite() && *g > 0.0))
        {
            return bad("ground truth weights must be positive");
        }
        Ok(())
    }
}

fn atom_text(block: Block, op: &str, w: f64) -> String {
    format!("{block}{op}{w}")
}

/// Builds one seeded synthetic dialogue.
///
/// The red weight is known from the start; the remaining blocks are worked
/// out in order, each over an equal share of the turns. Interlocutors
/// assert atoms about the block under discussion (occasionally restating an
/// earlier one) and accept atoms others asserted; a `frictive_rate` share
/// of their assertions contradict the ground truth by negation, a wrong
/// weight or a wrong bound. Every non-focus participant accepts every
/// ground-truth atom by the end. The focus participant (the last id) takes
/// a `focus_share` of turns and only offers true comparisons between
/// blocks, never committing to a weight, so its belief is shaped by what it
/// hears.
pub fn generate(cfg: &GeneratorConfig) -> Result<Transcript, DialogueError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ids: Vec<String> = (1..=cfg.participants).map(|i| format!("P{i}")).collect();
    let focus = ids.len() - 1;
    let others: Vec<usize> = (0..focus).collect();
    let truth = cfg.ground_truth;
    let order = [Block::Blue, Block::Green, Block::Purple, Block::Yellow];
    let n = cfg.n_utterances;

    // Focus turns: evenly spread with jitter, strictly fewer than any
    // other participant can get.
    let max_focus = (n.saturating_sub(1)) / ids.len();
    let focus_turns = ((n as f64 * cfg.focus_share).round() as usize).min(max_focus);
    let mut focus_slots = BTreeSet::new();
    for j in 0..focus_turns {
        let lo = j * n / focus_turns.max(1);
        let hi = ((j + 1) * n / focus_turns.max(1)).max(lo + 1);
        focus_slots.insert(rng.gen_range(lo..hi));
    }

    // Ground-truth atoms per block, and who asserted them.
    let truth_atom = |b: Block| atom_text(b, "=", truth[b.index()]);
    let mut asserted_by: BTreeMap<Block, BTreeSet<usize>> = BTreeMap::new();
    asserted_by.insert(Block::Red, BTreeSet::new());
    let mut accepted: Vec<BTreeSet<Block>> = vec![BTreeSet::new(); ids.len()];
    let mut utterances: Vec<Utterance> = Vec::with_capacity(n);
    let mut turn_counts = vec![0usize; ids.len()];

    // Turns still needed for non-focus participants to accept every atom:
    // one per missing accept, plus assertions for atoms that lack a second
    // asserter.
    let owed = |accepted: &[BTreeSet<Block>], asserted_by: &BTreeMap<Block, BTreeSet<usize>>| {
        Block::ALL
            .iter()
            .map(|b| {
                let missing = others.iter().filter(|&&p| !accepted[p].contains(b)).count();
                let asserters = asserted_by.get(b).map_or(0, BTreeSet::len);
                if missing == 0 {
                    0
                } else {
                    missing + 2usize.saturating_sub(asserters)
                }
            })
            .sum::<usize>()
    };

    let push = |utterances: &mut Vec<Utterance>, speaker: usize, kind, assertions: Vec<String>| {
        let index = utterances.len();
        utterances.push(Utterance {
            speaker: ids[speaker].clone(),
            kind,
            assertions,
            text: None,
            index,
        });
    };

    for i in 0..n {
        let remaining = n - i;
        let phase = (i * order.len() / n).min(order.len() - 1);
        let current = order[phase];
        let discussed: Vec<Block> = std::iter::once(Block::Red)
            .chain(order[..=phase].iter().copied())
            .collect();

        // Closing round: once the remaining turns are needed for owed
        // accepts, every turn settles one of them.
        let closing = remaining <= owed(&accepted, &asserted_by);
        if closing {
            // Pick a non-focus participant owing an accept; if nobody else
            // has asserted the atom yet, someone else asserts it first.
            let acc = &accepted;
            let mut candidates: Vec<(usize, Block)> = others
                .iter()
                .flat_map(|&p| {
                    Block::ALL
                        .iter()
                        .filter(move |b| !acc[p].contains(b))
                        .map(move |b| (p, *b))
                })
                .collect();
            candidates.sort();
            if let Some(&(p, b)) = candidates.first() {
                let by_other = asserted_by
                    .get(&b)
                    .is_some_and(|s| s.iter().any(|&q| q != p));
                if by_other {
                    push(
                        &mut utterances,
                        p,
                        UtteranceKind::Accept,
                        vec![truth_atom(b)],
                    );
                    accepted[p].insert(b);
                    turn_counts[p] += 1;
                } else {
                    let q = others.iter().copied().find(|&q| q != p).unwrap_or(p);
                    push(
                        &mut utterances,
                        q,
                        UtteranceKind::Assert,
                        vec![truth_atom(b)],
                    );
                    asserted_by.entry(b).or_default().insert(q);
                    turn_counts[q] += 1;
                }
                continue;
            }
        }

        if focus_slots.contains(&i) {
            let text = comparison_atom(&mut rng, &discussed, &truth);
            push(&mut utterances, focus, UtteranceKind::Assert, vec![text]);
            turn_counts[focus] += 1;
            continue;
        }

        // Interlocutor turn.
        let speaker = *others.choose(&mut rng).expect("at least one interlocutor");
        let acceptable: Vec<Block> = asserted_by
            .iter()
            .filter(|(b, by)| by.iter().any(|&q| q != speaker) && !accepted[speaker].contains(b))
            .map(|(b, _)| *b)
            .collect();
        if !acceptable.is_empty() && rng.gen_bool(0.25) {
            let b = *acceptable.choose(&mut rng).expect("nonempty");
            push(
                &mut utterances,
                speaker,
                UtteranceKind::Accept,
                vec![truth_atom(b)],
            );
            accepted[speaker].insert(b);
            turn_counts[speaker] += 1;
            continue;
        }

        let block = if rng.gen_bool(0.25) {
            *discussed.choose(&mut rng).expect("nonempty")
        } else {
            current
        };
        let gt = truth[block.index()];
        if rng.gen_bool(cfg.frictive_rate) {
            let (kind, text) = frictive_atom(&mut rng, block, gt);
            push(&mut utterances, speaker, kind, vec![text]);
        } else {
            let mut atoms = vec![truth_atom(block)];
            if rng.gen_bool(0.2) {
                let extra = *discussed.choose(&mut rng).expect("nonempty");
                if extra != block {
                    atoms.push(truth_atom(extra));
                }
            }
            for text in &atoms {
                let b = dsl::parse(text).expect("generated atoms parse").atoms()[0].subject;
                asserted_by.entry(b).or_default().insert(speaker);
            }
            push(&mut utterances, speaker, UtteranceKind::Assert, atoms);
        }
        turn_counts[speaker] += 1;
    }

    Ok(Transcript {
        group_id: cfg.group_id.clone(),
        participants: ids,
        utterances,
    })
}

/// `groups` dialogues named `group1`, `group2`, ..., the g-th generated
/// with seed `base.seed + g`.
pub fn generate_corpus(
    base: &GeneratorConfig,
    groups: usize,
) -> Result<Vec<Transcript>, DialogueError> {
    (0..groups)
        .map(|g| {
            generate(&GeneratorConfig {
                seed: base.seed.wrapping_add(g as u64),
                group_id: format!("group{}", g + 1),
                ..base.clone()
            })
        })
        .collect()
}

/// A true comparison between two discussed blocks, e.g. `green>blue`.
fn comparison_atom(rng: &mut impl Rng, discussed: &[Block], truth: &Vec5) -> String {
    let a = *discussed.choose(rng).expect("nonempty");
    let rest: Vec<Block> = discussed.iter().copied().filter(|&b| b != a).collect();
    let b = *rest.choose(rng).expect("red plus the current block");
    let op = match truth[a.index()].total_cmp(&truth[b.index()]) {
        std::cmp::Ordering::Less => "<",
        std::cmp::Ordering::Equal => "=",
        std::cmp::Ordering::Greater => ">",
    };
    format!("{a}{op}{b}")
}

/// A contradicting utterance about `block`, whose true weight is `gt`.
fn frictive_atom(rng: &mut impl Rng, block: Block, gt: f64) -> (UtteranceKind, String) {
    let wrong = {
        let candidates: Vec<f64> = [gt - 10.0, gt + 10.0, gt + 20.0]
            .into_iter()
            .filter(|w| *w > 0.0)
            .collect();
        *candidates.choose(rng).expect("gt + 10 is always positive")
    };
    match rng.gen_range(0..4) {
        0 => (UtteranceKind::Assert, atom_text(block, "!=", gt)),
        1 => (UtteranceKind::Deny, atom_text(block, "=", gt)),
        2 => (UtteranceKind::Assert, atom_text(block, "=", wrong)),
        _ => {
            if wrong < gt {
                (UtteranceKind::Assert, atom_text(block, "<", gt))
            } else {
                (UtteranceKind::Assert, atom_text(block, ">", gt))
            }
        }
    }
}

/// Ground truth as a list of `block = grams` atoms.
pub fn truth_atoms(truth: &Vec5) -> Vec<Proposition> {
    (0..BLOCK_COUNT)
        .map(|i| Proposition::eq_weight(Block::ALL[i], truth[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"group_id": "g1", "participants": ["P1", "P2"],
        "utterances": [{"speaker": "P1", "kind": "assert", "assertions": ["red=10"]}]}"#;

    #[test]
    fn loads_minimal_transcript() {
        let t = Transcript::from_json(MINIMAL).unwrap();
        assert_eq!(t.group_id, "g1");
        assert_eq!(t.utterances[0].kind, UtteranceKind::Assert);
        assert_eq!(t.utterances[0].text, None);
    }

    #[test]
    fn schema_violations_carry_pointers() {
        let bad = MINIMAL.replace(r#""speaker": "P1""#, r#""speaker": "P9""#);
        match Transcript::from_json(&bad).unwrap_err() {
            DialogueError::SchemaViolation { pointer, .. } => {
                assert_eq!(pointer, "/utterances/0/speaker")
            }
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace(r#""kind": "assert""#, r#""kind": "shout""#);
        assert!(matches!(
            Transcript::from_json(&bad).unwrap_err(),
            DialogueError::SchemaViolation { pointer, .. } if pointer == "/utterances/0/kind"
        ));
        let bad = MINIMAL.replace(r#"["P1", "P2"]"#, r#"["P1"]"#);
        assert!(matches!(
            Transcript::from_json(&bad).unwrap_err(),
            DialogueError::SchemaViolation { pointer, .. } if pointer == "/participants"
        ));
        let bad = MINIMAL.replace(
            r#""kind": "assert", "assertions": ["red=10"]"#,
            r#""kind": "accept", "assertions": ["red!=10"]"#,
        );
        assert!(matches!(
            Transcript::from_json(&bad).unwrap_err(),
            DialogueError::SchemaViolation { .. }
        ));
    }

    #[test]
    fn assertion_errors_name_the_utterance() {
        let bad = MINIMAL.replace("red=10", "red=ten");
        match Transcript::from_json(&bad).unwrap_err() {
            DialogueError::Parse {
                utterance, source, ..
            } => {
                assert_eq!(utterance, 0);
                assert_eq!(source.kind, dsl::ParseErrorKind::UnknownBlock("ten".into()));
            }
            e => panic!("{e}"),
        }
    }

    fn with_counts(counts: &[(&str, usize)]) -> Transcript {
        let mut utterances = Vec::new();
        for (who, n) in counts {
            for _ in 0..*n {
                utterances.push(Utterance {
                    speaker: who.to_string(),
                    kind: UtteranceKind::Assert,
                    assertions: vec!["red=10".into()],
                    text: None,
                    index: utterances.len(),
                });
            }
        }
        Transcript {
            group_id: "g".into(),
            participants: counts.iter().map(|(w, _)| w.to_string()).collect(),
            utterances,
        }
    }

    #[test]
    fn focus_is_least_talkative() {
        assert_eq!(
            select_focus(&with_counts(&[("P1", 5), ("P2", 3), ("P3", 4)])).unwrap(),
            "P2"
        );
        assert_eq!(
            select_focus(&with_counts(&[("P2", 3), ("P1", 3)])).unwrap(),
            "P1"
        );
        assert!(matches!(
            select_focus(&with_counts(&[("P1", 0), ("P2", 0)])),
            Err(DialogueError::EmptyTranscript)
        ));
    }

    #[test]
    fn frictionless_generation_is_truthful() {
        let cfg = GeneratorConfig {
            frictive_rate: 0.0,
            ..GeneratorConfig::default()
        };
        let t = generate(&cfg).unwrap();
        assert_eq!(t.utterances.len(), cfg.n_utterances);
        for u in &t.utterances {
            assert!(!contradicts(u, &GROUND_TRUTH).unwrap(), "{u:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig {
            seed: 9,
            ..GeneratorConfig::default()
        };
        assert_eq!(
            generate(&cfg).unwrap().to_json(),
            generate(&cfg).unwrap().to_json()
        );
        let other = GeneratorConfig { seed: 10, ..cfg };
        assert_ne!(
            generate(&other).unwrap().to_json(),
            generate(&GeneratorConfig {
                seed: 9,
                ..other.clone()
            })
            .unwrap()
            .to_json()
        );
    }

    #[test]
    fn frictive_share_matches_rate() {
        let cfg = GeneratorConfig {
            seed: 42,
            n_utterances: 100,
            frictive_rate: 0.3,
            ..GeneratorConfig::default()
        };
        let t = generate(&cfg).unwrap();
        let assertions: Vec<_> = t
            .utterances
            .iter()
            .filter(|u| u.kind != UtteranceKind::Accept && u.speaker != "P3")
            .collect();
        let frictive = assertions
            .iter()
            .filter(|u| contradicts(u, &GROUND_TRUTH).unwrap())
            .count();
        // Binomial(n, 0.3) with n assertions: allow three standard deviations.
        let n = assertions.len() as f64;
        let sd = (n * 0.3 * 0.7).sqrt();
        assert!(
            (frictive as f64 - 0.3 * n).abs() <= 3.0 * sd,
            "{frictive} of {n}"
        );
    }

    #[test]
    fn generated_structure() {
        for seed in 0..20 {
            let cfg = GeneratorConfig {
                seed,
                ..GeneratorConfig::default()
            };
            let t = generate(&cfg).unwrap();
            // Round trip through the validating loader.
            let back = Transcript::from_json(&t.to_json()).unwrap();
            assert_eq!(back, t);
            // Focus designate speaks least.
            assert_eq!(select_focus(&t).unwrap(), "P3");
            let counts = t.utterance_counts();
            assert!(counts["P3"] < counts["P1"].min(counts["P2"]));
            // Accepts follow another participant's assertion.
            for (i, u) in t.utterances.iter().enumerate() {
                if u.kind != UtteranceKind::Accept {
                    continue;
                }
                let atom = &u.assertions[0];
                assert!(
                    t.utterances[..i]
                        .iter()
                        .any(|p| p.kind == UtteranceKind::Assert
                            && p.speaker != u.speaker
                            && p.assertions.contains(atom)),
                    "seed {seed}: accept {i} of {atom} has no prior assertion"
                );
            }
            // Every interlocutor accepts every ground-truth atom.
            for p in ["P1", "P2"] {
                for atom in truth_atoms(&GROUND_TRUTH) {
                    let text = atom.to_string().replace(' ', "");
                    assert!(
                        t.utterances.iter().any(|u| u.speaker == p
                            && u.kind == UtteranceKind::Accept
                            && u.assertions.contains(&text)),
                        "seed {seed}: {p} never accepts {text}"
                    );
                }
            }
        }
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.json");
        let t = generate(&GeneratorConfig::default()).unwrap();
        save(&t, &path).unwrap();
        assert_eq!(load(&path).unwrap(), t);
        assert_eq!(load_corpus(dir.path()).unwrap(), vec![t]);
    }
}
