//! Finite Markov chain data model: states, sparse transition rows, validation,
//! successor sampling, and JSON file I/O.
//!
//! A chain is a fixed set of states `0..n` with one outgoing probability row
//! per state, a designated start state, and a designated target state. Rows
//! store only positive entries; a missing entry means probability zero. Every
//! other module in this crate consumes chains through this type.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for the row-normalization check.
///
/// Generators emit exact dyadic or rational probabilities; 1e-9 absorbs
/// accumulation error without hiding modeling bugs.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Dense state index in `[0, n)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for StateId {
    fn from(index: usize) -> Self {
        StateId(index)
    }
}

/// Nonnegative extended real: a finite value or the explicit `Infinity`
/// sentinel. Infinite hitting times are never encoded as large finite
/// numbers.
#[derive(Clone, Copy, Debug)]
pub enum ExtReal {
    Finite(f64),
    Infinity,
}

impl ExtReal {
    /// Wraps a nonnegative finite value.
    ///
    /// Panics on NaN, negative, or infinite input; use [`ExtReal::Infinity`]
    /// for the infinite case.
    pub fn finite(value: f64) -> Self {
        assert!(
            value.is_finite() && value >= 0.0,
            "ExtReal::finite requires a nonnegative finite value, got {value}"
        );
        ExtReal::Finite(value)
    }

    /// Maps `f64::INFINITY` to the sentinel and finite values through.
    pub fn from_f64(value: f64) -> Self {
        if value.is_infinite() && value > 0.0 {
            ExtReal::Infinity
        } else {
            ExtReal::finite(value)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// The value as an IEEE float (`f64::INFINITY` for the sentinel).
    pub fn as_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::Infinity => f64::INFINITY,
        }
    }
}

impl PartialEq for ExtReal {
    fn eq(&self, other: &Self) -> bool {
        self.as_f64() == other.as_f64()
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Finite payloads are never NaN by construction.
        self.as_f64().partial_cmp(&other.as_f64()).expect("ExtReal is never NaN")
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinity => write!(f, "inf"),
        }
    }
}

/// A single invariant violation found by [`MarkovChain::validate`].
///
/// Violations are data, not failures: an invalid chain can be constructed and
/// inspected, but the semantic operations require a chain that validates
/// cleanly.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Outgoing probabilities of `state` sum to `sum`, not 1 within tolerance.
    RowSum { state: usize, sum: f64 },
    /// `state` lists `successor` more than once.
    DuplicateSuccessor { state: usize, successor: usize },
    /// A stored probability is zero, negative, or not finite.
    BadProbability { state: usize, successor: usize, prob: f64 },
    /// A stored probability exceeds 1.
    ProbabilityAboveOne { state: usize, successor: usize, prob: f64 },
    /// An edge points outside `[0, n)`.
    SuccessorOutOfRange { state: usize, successor: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, sum } => {
                write!(f, "state {state}: outgoing probabilities sum to {sum}, expected 1")
            }
            Violation::DuplicateSuccessor { state, successor } => {
                write!(f, "state {state}: duplicate successor {successor}")
            }
            Violation::BadProbability { state, successor, prob } => {
                write!(f, "state {state} -> {successor}: probability {prob} is not in (0, 1]")
            }
            Violation::ProbabilityAboveOne { state, successor, prob } => {
                write!(f, "state {state} -> {successor}: probability {prob} exceeds 1")
            }
            Violation::SuccessorOutOfRange { state, successor } => {
                write!(f, "state {state}: successor {successor} out of range")
            }
        }
    }
}

/// Construction and I/O errors for [`MarkovChain`].
#[derive(Debug, Error)]
pub enum ChainError {
    #[error("chain must have at least one state")]
    EmptyChain,
    #[error("{kind} index {index} out of range for {n} states")]
    IndexOutOfRange { kind: &'static str, index: usize, n: usize },
    #[error("chain fails validation: {summary}")]
    Invalid { violations: Vec<Violation>, summary: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

fn invalid(violations: Vec<Violation>) -> ChainError {
    let shown: Vec<String> = violations.iter().take(3).map(|v| v.to_string()).collect();
    let mut summary = shown.join("; ");
    if violations.len() > 3 {
        summary.push_str(&format!("; ... ({} total)", violations.len()));
    }
    ChainError::Invalid { violations, summary }
}

/// On-disk shape of a chain file: a JSON object with the edge list flattened
/// to `[from, to, prob]` triples.
#[derive(Serialize, Deserialize)]
struct ChainFile {
    n: usize,
    start: usize,
    target: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// A finite Markov chain with designated start and target states.
///
/// Immutable after construction and safely shareable across parallel workers;
/// random sources are owned by callers and no operation mutates the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovChain {
    rows: Vec<Vec<(StateId, f64)>>,
    start: StateId,
    target: StateId,
}

impl MarkovChain {
    /// Builds a chain from an edge list.
    ///
    /// Only structural problems (zero states, out-of-range `from`/`start`/
    /// `target`) are rejected here; numeric invariants are reported by
    /// [`validate`](Self::validate) so that malformed chains can be built and
    /// inspected in tests. Rows are kept sorted by successor index.
    pub fn from_edges(
        n: usize,
        start: usize,
        target: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, ChainError> {
        if n == 0 {
            return Err(ChainError::EmptyChain);
        }
        if start >= n {
            return Err(ChainError::IndexOutOfRange { kind: "start", index: start, n });
        }
        if target >= n {
            return Err(ChainError::IndexOutOfRange { kind: "target", index: target, n });
        }
        let mut rows: Vec<Vec<(StateId, f64)>> = vec![Vec::new(); n];
        for (from, to, prob) in edges {
            if from >= n {
                return Err(ChainError::IndexOutOfRange { kind: "edge source", index: from, n });
            }
            rows[from].push((StateId(to), prob));
        }
        for row in &mut rows {
            row.sort_by_key(|&(StateId(to), _)| to);
        }
        Ok(MarkovChain { rows, start: StateId(start), target: StateId(target) })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn target(&self) -> StateId {
        self.target
    }

    /// Number of stored (positive-probability) edges.
    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Outgoing row of `x`, sorted by successor index.
    pub fn successors(&self, x: StateId) -> &[(StateId, f64)] {
        &self.rows[x.0]
    }

    /// Checks every invariant and returns all violations found (empty when
    /// the chain is valid).
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.n();
        let mut violations = Vec::new();
        for (state, row) in self.rows.iter().enumerate() {
            let mut sum = 0.0;
            for &(StateId(to), prob) in row {
                if to >= n {
                    violations.push(Violation::SuccessorOutOfRange { state, successor: to });
                }
                if !(prob > 0.0) || !prob.is_finite() {
                    violations.push(Violation::BadProbability { state, successor: to, prob });
                } else if prob > 1.0 {
                    violations.push(Violation::ProbabilityAboveOne { state, successor: to, prob });
                }
                sum += prob;
            }
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    violations.push(Violation::DuplicateSuccessor {
                        state,
                        successor: pair[0].0 .0,
                    });
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSum { state, sum });
            }
        }
        violations
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Draws a successor of `x` according to its transition row.
    ///
    /// Deterministic given the rng state. Requires a valid chain.
    pub fn sample_successor(&self, x: StateId, rng: &mut impl Rng) -> StateId {
        let row = &self.rows[x.0];
        debug_assert!(!row.is_empty(), "state {x} has no outgoing edges");
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(to, prob) in row {
            acc += prob;
            if u < acc {
                return to;
            }
        }
        // Rounding can leave acc a hair below 1; the tail belongs to the
        // last entry.
        row.last().expect("nonempty row").0
    }

    /// Total transition mass from `x` into the states marked in `mask`.
    pub fn transition_mass(&self, x: StateId, mask: &[bool]) -> f64 {
        self.rows[x.0]
            .iter()
            .filter(|&&(StateId(to), _)| mask[to])
            .map(|&(_, prob)| prob)
            .sum()
    }

    /// Serializes to the JSON chain format, edges sorted by `(from, to)`.
    ///
    /// Probabilities are printed with enough digits for an exact 64-bit
    /// round trip.
    pub fn to_json(&self) -> String {
        let file = ChainFile {
            n: self.n(),
            start: self.start.0,
            target: self.target.0,
            edges: self.edge_list(),
        };
        serde_json::to_string_pretty(&file).expect("chain serialization cannot fail")
    }

    /// Parses a chain from JSON and validates it.
    pub fn from_json(text: &str) -> Result<Self, ChainError> {
        let file: ChainFile = serde_json::from_str(text)?;
        let chain = Self::from_edges(file.n, file.start, file.target, file.edges)?;
        let violations = chain.validate();
        if violations.is_empty() {
            Ok(chain)
        } else {
            Err(invalid(violations))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ChainError> {
        let mut writer = BufWriter::new(fs::File::create(path)?);
        writer.write_all(self.to_json().as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChainError> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    fn edge_list(&self) -> Vec<(usize, usize, f64)> {
        let mut edges = Vec::with_capacity(self.edge_count());
        for (from, row) in self.rows.iter().enumerate() {
            for &(StateId(to), prob) in row {
                edges.push((from, to, prob));
            }
        }
        edges
    }
}

/// Breadth-first hop distances from `from` over the stored edges with
/// direction ignored. Unreachable states get `usize::MAX`.
///
/// Useful as an independent route for checking hitting-time values on
/// tree-shaped chains, where the optimal value is proportional to the tree
/// distance.
pub fn undirected_distances(chain: &MarkovChain, from: StateId) -> Vec<usize> {
    let n = chain.n();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in 0..n {
        for &(StateId(y), _) in chain.successors(StateId(x)) {
            if x != y {
                adjacency[x].push(y);
                adjacency[y].push(x);
            }
        }
    }
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[from.0] = 0;
    queue.push_back(from.0);
    while let Some(x) = queue.pop_front() {
        for &y in &adjacency[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_loop() -> MarkovChain {
        MarkovChain::from_edges(1, 0, 0, [(0, 0, 1.0)]).unwrap()
    }

    #[test]
    fn minimal_legal_chain_validates() {
        assert!(single_loop().validate().is_empty());
    }

    #[test]
    fn row_sum_violation_names_state() {
        let chain =
            MarkovChain::from_edges(2, 0, 1, [(0, 1, 0.9), (1, 1, 1.0)]).unwrap();
        let violations = chain.validate();
        assert_eq!(violations.len(), 1);
        assert!(matches!(violations[0], Violation::RowSum { state: 0, .. }));
    }

    #[test]
    fn duplicate_and_nonpositive_probabilities_flagged() {
        let chain = MarkovChain::from_edges(
            2,
            0,
            1,
            [(0, 1, 0.5), (0, 1, 0.5), (1, 1, 1.5), (1, 0, -0.5)],
        )
        .unwrap();
        let violations = chain.validate();
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateSuccessor { state: 0, successor: 1 })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::ProbabilityAboveOne { state: 1, .. })));
        assert!(violations
            .iter()
            .any(|v| matches!(v, Violation::BadProbability { state: 1, successor: 0, .. })));
    }

    #[test]
    fn structural_errors_rejected_at_construction() {
        assert!(matches!(
            MarkovChain::from_edges(0, 0, 0, []),
            Err(ChainError::EmptyChain)
        ));
        assert!(matches!(
            MarkovChain::from_edges(2, 0, 5, [(0, 1, 1.0)]),
            Err(ChainError::IndexOutOfRange { kind: "target", .. })
        ));
        assert!(matches!(
            MarkovChain::from_edges(2, 3, 1, [(0, 1, 1.0)]),
            Err(ChainError::IndexOutOfRange { kind: "start", .. })
        ));
    }

    #[test]
    fn deterministic_row_always_returns_its_successor() {
        let chain =
            MarkovChain::from_edges(2, 0, 1, [(0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(chain.sample_successor(StateId(0), &mut rng), StateId(1));
        }
    }

    #[test]
    fn transition_mass_of_full_and_empty_sets() {
        let chain = MarkovChain::from_edges(
            3,
            0,
            2,
            [(0, 1, 0.25), (0, 2, 0.75), (1, 2, 1.0), (2, 2, 1.0)],
        )
        .unwrap();
        let all = vec![true; 3];
        let none = vec![false; 3];
        assert!((chain.transition_mass(StateId(0), &all) - 1.0).abs() <= ROW_SUM_TOLERANCE);
        assert_eq!(chain.transition_mass(StateId(0), &none), 0.0);
        let only_last = vec![false, false, true];
        assert_eq!(chain.transition_mass(StateId(0), &only_last), 0.75);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let chain = MarkovChain::from_edges(
            3,
            0,
            2,
            [(0, 1, 0.1), (0, 2, 0.9), (1, 2, 1.0), (2, 2, 1.0)],
        )
        .unwrap();
        let restored = MarkovChain::from_json(&chain.to_json()).unwrap();
        assert_eq!(chain, restored);
    }

    #[test]
    fn load_rejects_bad_row_sum_and_bad_target() {
        let bad_sum = r#"{"n":2,"start":0,"target":1,"edges":[[0,1,1.5],[1,1,1.0]]}"#;
        match MarkovChain::from_json(bad_sum) {
            Err(ChainError::Invalid { summary, .. }) => assert!(summary.contains("state 0")),
            other => panic!("expected validation failure, got {other:?}"),
        }
        let bad_target = r#"{"n":2,"start":0,"target":7,"edges":[[0,1,1.0],[1,1,1.0]]}"#;
        assert!(matches!(
            MarkovChain::from_json(bad_target),
            Err(ChainError::IndexOutOfRange { kind: "target", .. })
        ));
        let not_json = "{ nope";
        assert!(matches!(MarkovChain::from_json(not_json), Err(ChainError::Parse(_))));
    }

    #[test]
    fn ext_real_ordering_and_display() {
        let two = ExtReal::finite(2.0);
        let three = ExtReal::finite(3.0);
        assert!(two < three);
        assert!(three < ExtReal::Infinity);
        assert!(!(ExtReal::Infinity < ExtReal::Infinity));
        assert_eq!(ExtReal::Infinity.to_string(), "inf");
        assert_eq!(two.to_string(), "2");
        assert_eq!(ExtReal::from_f64(f64::INFINITY), ExtReal::Infinity);
    }

    #[test]
    #[should_panic]
    fn ext_real_rejects_negative() {
        let _ = ExtReal::finite(-1.0);
    }
}
