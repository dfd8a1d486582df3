//! Chain induced by the Game of 24.
//!
//! A position is the multiset of values still available; a move picks two of
//! them and combines them with one of `+ - * /`, putting the result back.
//! Subtraction and division count both operand orders, addition and
//! multiplication one, and division by zero is excluded. All arithmetic is
//! exact rational arithmetic.
//!
//! Transitions are uniform over the distinct applicable moves of a position
//! (moves that lead to the same successor pool their probability mass).
//! Positions are canonicalized by their remaining multiset, which keeps the
//! chain small; an optional history mode keeps the applied operations in the
//! state identity for demonstration output. Either way every position whose
//! remaining multiset is exactly `{24}` is merged into one absorbing target,
//! and dead ends (a single non-24 value left) get a self-loop.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num::{BigInt, BigRational, Zero};

use crate::chain::MarkovChain;

use super::GenError;

type Value = BigRational;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
struct Move {
    lhs: Value,
    op: char,
    rhs: Value,
    result: Value,
}

impl Move {
    fn describe(&self) -> String {
        format!("{} {} {} = {}", self.lhs, self.op, self.rhs, self.result)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
struct Position {
    /// Sorted remaining values.
    remaining: Vec<Value>,
    /// Applied moves, oldest first; empty in canonical mode.
    history: Vec<Move>,
}

impl Position {
    fn label(&self) -> String {
        let left = self
            .remaining
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        if self.history.is_empty() {
            left
        } else {
            let ops = self
                .history
                .iter()
                .map(Move::describe)
                .collect::<Vec<_>>()
                .join(", ");
            format!("{ops} (left: {left})")
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Game24Options {
    /// Keep the operation history in the state identity instead of merging
    /// positions with equal remaining multisets.
    pub track_history: bool,
}

/// A generated Game-of-24 chain plus a human-readable label per state.
#[derive(Clone, Debug)]
pub struct Game24Chain {
    pub chain: MarkovChain,
    pub labels: Vec<String>,
}

fn int(v: i64) -> Value {
    BigRational::from_integer(BigInt::from(v))
}

/// Distinct applicable moves of a position: one per distinct
/// (ordered value pair, operator) application.
fn moves(remaining: &[Value]) -> Vec<Move> {
    let mut pairs: Vec<(Value, Value)> = Vec::new();
    for i in 0..remaining.len() {
        for j in i + 1..remaining.len() {
            let (u, v) = if remaining[i] <= remaining[j] {
                (remaining[i].clone(), remaining[j].clone())
            } else {
                (remaining[j].clone(), remaining[i].clone())
            };
            if !pairs.contains(&(u.clone(), v.clone())) {
                pairs.push((u, v));
            }
        }
    }

    let mut out = Vec::new();
    for (u, v) in pairs {
        let mut push = |lhs: &Value, op: char, rhs: &Value, result: Value| {
            out.push(Move { lhs: lhs.clone(), op, rhs: rhs.clone(), result });
        };
        push(&u, '+', &v, &u + &v);
        push(&u, '*', &v, &u * &v);
        push(&u, '-', &v, &u - &v);
        if u != v {
            push(&v, '-', &u, &v - &u);
        }
        if !v.is_zero() {
            push(&u, '/', &v, &u / &v);
        }
        if u != v && !u.is_zero() {
            push(&v, '/', &u, &v / &u);
        }
    }
    out
}

fn apply(position: &Position, mv: &Move, track_history: bool) -> Position {
    let mut remaining = position.remaining.clone();
    let i = remaining.iter().position(|x| *x == mv.lhs).expect("operand present");
    remaining.remove(i);
    let j = remaining.iter().position(|x| *x == mv.rhs).expect("operand present");
    remaining.remove(j);
    remaining.push(mv.result.clone());
    remaining.sort();
    let history = if track_history {
        let mut h = position.history.clone();
        h.push(mv.clone());
        h
    } else {
        Vec::new()
    };
    Position { remaining, history }
}

/// Builds the chain reachable from the given starting numbers (one to four
/// of them; fewer than four models an already-reduced position).
pub fn gen_game24(nums: &[i64], options: Game24Options) -> Result<Game24Chain, GenError> {
    if nums.is_empty() || nums.len() > 4 {
        return Err(super::param_err("expected between 1 and 4 starting numbers"));
    }

    let goal = vec![int(24)];
    let mut start_remaining: Vec<Value> = nums.iter().map(|&v| int(v)).collect();
    start_remaining.sort();
    let start = Position { remaining: start_remaining, history: Vec::new() };

    let mut ids: HashMap<Position, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut queue: VecDeque<Position> = VecDeque::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut target_id: Option<usize> = None;

    let intern = |position: Position,
                      ids: &mut HashMap<Position, usize>,
                      labels: &mut Vec<String>,
                      queue: &mut VecDeque<Position>,
                      target_id: &mut Option<usize>|
     -> usize {
        // Winning positions collapse into a single absorbing target no
        // matter how they were reached.
        let position = if position.remaining == goal {
            Position { remaining: goal.clone(), history: Vec::new() }
        } else {
            position
        };
        if let Some(&id) = ids.get(&position) {
            return id;
        }
        let id = labels.len();
        labels.push(position.label());
        if position.remaining == goal {
            *target_id = Some(id);
        }
        ids.insert(position.clone(), id);
        queue.push_back(position);
        id
    };

    let start_id = intern(start, &mut ids, &mut labels, &mut queue, &mut target_id);
    debug_assert_eq!(start_id, 0);

    while let Some(position) = queue.pop_front() {
        let from = ids[&position];
        let position_moves =
            if position.remaining.len() >= 2 { moves(&position.remaining) } else { Vec::new() };
        if position_moves.is_empty() {
            // Terminal: either the target or a dead end; absorb in place.
            edges.push((from, from, 1.0));
            continue;
        }
        let total = position_moves.len() as f64;
        let mut mass: BTreeMap<Position, u32> = BTreeMap::new();
        for mv in &position_moves {
            *mass.entry(apply(&position, mv, options.track_history)).or_insert(0) += 1;
        }
        for (successor, count) in mass {
            let to = intern(successor, &mut ids, &mut labels, &mut queue, &mut target_id);
            edges.push((from, to, count as f64 / total));
        }
    }

    let n = labels.len();
    let target = match target_id {
        Some(id) => id,
        None => {
            // Unsolvable inputs never materialize the winning position;
            // append it so the chain still has a (vacuous) target.
            labels.push("24".to_string());
            edges.push((n, n, 1.0));
            n
        }
    };
    let chain = MarkovChain::from_edges(labels.len(), 0, target, edges)?;
    debug_assert!(chain.is_valid());
    Ok(Game24Chain { chain, labels })
}
