//! Table edit distance.
//!
//! Tables are treated as partial maps from `(row, col)` to text. A cell edit
//! adds a value at a vacant coordinate, removes a value, moves a value to a
//! vacant coordinate, or transforms a value in place. Every edit costs 1.
//! Rows without cells are invisible at this level, so `[]` and `[[]]` are at
//! distance 0 even though they are different tables.
//!
//! * [`ted_greedy`] builds one feasible edit path by matching equal values
//!   and charges one unit per edit.
//! * [`ted_batch`] charges the same path by groups: edits of the same kind
//!   (and, for moves, the same displacement) that sit on a horizontal or
//!   vertical run of adjacent cells cost 1 per run. The cost is the smallest
//!   number of runs covering the edits.
//! * [`ted_exact`] is the true minimum, found by breadth-first enumeration.
//!   It is exponential and only meant for tables of a handful of cells.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::table::Table;

pub type Coord = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CellEdit {
    Add { at: Coord, value: String },
    Remove { at: Coord },
    Move { from: Coord, to: Coord },
    Transform { at: Coord, new_value: String },
}

impl CellEdit {
    pub fn cost(&self) -> u32 {
        1
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EditPath {
    pub edits: Vec<CellEdit>,
}

impl EditPath {
    pub fn total_cost(&self) -> u32 {
        self.edits.iter().map(CellEdit::cost).sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TedError {
    #[error("{cells} cells exceed the exhaustive-search budget of {budget}")]
    BudgetExceeded { cells: usize, budget: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EditError {
    #[error("edit {index}: coordinate {at:?} is vacant")]
    Vacant { index: usize, at: Coord },
    #[error("edit {index}: coordinate {at:?} is occupied")]
    Occupied { index: usize, at: Coord },
}

/// A table as a coordinate map. Unlike [`Table`] it can hold holes, which
/// intermediate states of an edit path may need.
pub type CellMap = BTreeMap<Coord, String>;

pub fn cell_map(t: &Table) -> CellMap {
    t.cells().map(|(r, c, v)| ((r, c), v.to_string())).collect()
}

/// Applies `path` to `t1` edit by edit, checking each edit's precondition.
pub fn apply_edits(t1: &Table, path: &EditPath) -> Result<CellMap, EditError> {
    let mut map = cell_map(t1);
    for (index, edit) in path.edits.iter().enumerate() {
        match edit {
            CellEdit::Add { at, value } => {
                if map.contains_key(at) {
                    return Err(EditError::Occupied { index, at: *at });
                }
                map.insert(*at, value.clone());
            }
            CellEdit::Remove { at } => {
                map.remove(at).ok_or(EditError::Vacant { index, at: *at })?;
            }
            CellEdit::Move { from, to } => {
                if map.contains_key(to) {
                    return Err(EditError::Occupied { index, at: *to });
                }
                let v = map
                    .remove(from)
                    .ok_or(EditError::Vacant { index, at: *from })?;
                map.insert(*to, v);
            }
            CellEdit::Transform { at, new_value } => {
                let slot = map
                    .get_mut(at)
                    .ok_or(EditError::Vacant { index, at: *at })?;
                *slot = new_value.clone();
            }
        }
    }
    Ok(map)
}

/// Row distance first, then column distance.
fn distance(a: Coord, b: Coord) -> (usize, usize) {
    (a.0.abs_diff(b.0), a.1.abs_diff(b.1))
}

/// Greedy feasible edit path from `t1` to `t2`.
///
/// Target cells are matched to equal source values: in-place matches first,
/// then, in row-major target order, the nearest unused source (row distance,
/// then column distance, then smaller source coordinate). Unmatched target
/// cells become transforms when the source cell at the same coordinate is
/// unused, otherwise adds; unused source cells are removed. The path is
/// ordered removes, moves, transforms, adds; moves that form a cycle are
/// charged as in-place transforms instead.
pub fn greedy_edit_path(t1: &Table, t2: &Table) -> EditPath {
    let mut used: HashSet<Coord> = HashSet::new();
    let mut matched_target: HashMap<Coord, Coord> = HashMap::new();

    for (r, c, v) in t2.cells() {
        if t1.get(r, c) == Some(v) {
            used.insert((r, c));
            matched_target.insert((r, c), (r, c));
        }
    }

    let mut by_value: HashMap<&str, Vec<Coord>> = HashMap::new();
    for (r, c, v) in t1.cells() {
        if !used.contains(&(r, c)) {
            by_value.entry(v).or_default().push((r, c));
        }
    }

    let mut moves: Vec<(Coord, Coord)> = Vec::new();
    for (r, c, v) in t2.cells() {
        if matched_target.contains_key(&(r, c)) {
            continue;
        }
        let Some(candidates) = by_value.get_mut(v) else {
            continue;
        };
        // candidates are in row-major order, so the first minimum wins ties
        let best = candidates
            .iter()
            .enumerate()
            .min_by_key(|(_, &src)| distance(src, (r, c)))
            .map(|(i, _)| i);
        if let Some(i) = best {
            let src = candidates.remove(i);
            used.insert(src);
            matched_target.insert((r, c), src);
            moves.push((src, (r, c)));
        }
    }

    let mut transforms = Vec::new();
    let mut adds = Vec::new();
    for (r, c, v) in t2.cells() {
        if matched_target.contains_key(&(r, c)) {
            continue;
        }
        if t1.get(r, c).is_some() && !used.contains(&(r, c)) {
            used.insert((r, c));
            transforms.push(CellEdit::Transform {
                at: (r, c),
                new_value: v.to_string(),
            });
        } else {
            adds.push(CellEdit::Add {
                at: (r, c),
                value: v.to_string(),
            });
        }
    }

    let removes: Vec<CellEdit> = t1
        .cells()
        .filter(|(r, c, _)| !used.contains(&(*r, *c)))
        .map(|(r, c, _)| CellEdit::Remove { at: (r, c) })
        .collect();

    // Order moves so each destination is vacant when its move runs.
    let mut occupied: HashSet<Coord> = t1.cells().map(|(r, c, _)| (r, c)).collect();
    for e in &removes {
        if let CellEdit::Remove { at } = e {
            occupied.remove(at);
        }
    }
    let mut ordered_moves = Vec::with_capacity(moves.len());
    let mut pending = moves;
    loop {
        let before = pending.len();
        let mut still = Vec::new();
        for (from, to) in pending {
            if occupied.contains(&to) {
                still.push((from, to));
            } else {
                occupied.remove(&from);
                occupied.insert(to);
                ordered_moves.push(CellEdit::Move { from, to });
            }
        }
        pending = still;
        if pending.is_empty() || pending.len() == before {
            break;
        }
    }
    // Whatever is left forms cycles; every destination there holds a value
    // that itself still has to leave, so overwrite in place instead.
    let mut cycle_transforms: Vec<CellEdit> = pending
        .into_iter()
        .map(|(_, to)| CellEdit::Transform {
            at: to,
            new_value: t2.get(to.0, to.1).expect("target coordinate").to_string(),
        })
        .collect();
    cycle_transforms.sort_by_key(|e| match e {
        CellEdit::Transform { at, .. } => *at,
        _ => unreachable!(),
    });

    let mut edits = removes;
    edits.extend(ordered_moves);
    edits.extend(cycle_transforms);
    edits.extend(transforms);
    edits.extend(adds);
    EditPath { edits }
}

/// Greedy table edit distance: the cost of [`greedy_edit_path`].
pub fn ted_greedy(t1: &Table, t2: &Table) -> u32 {
    greedy_edit_path(t1, t2).total_cost()
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum BatchKind {
    Add,
    Remove,
    Transform,
    Move(isize, isize),
}

fn batch_key(edit: &CellEdit) -> (BatchKind, Coord) {
    match edit {
        CellEdit::Add { at, .. } => (BatchKind::Add, *at),
        CellEdit::Remove { at } => (BatchKind::Remove, *at),
        CellEdit::Transform { at, .. } => (BatchKind::Transform, *at),
        CellEdit::Move { from, to } => (
            BatchKind::Move(
                to.0 as isize - from.0 as isize,
                to.1 as isize - from.1 as isize,
            ),
            *from,
        ),
    }
}

/// Smallest number of horizontal or vertical runs of adjacent cells that
/// cover `cells`.
///
/// Each cell lies on exactly one maximal horizontal run and one maximal
/// vertical run, so this is a minimum vertex cover of the bipartite graph
/// (horizontal runs, vertical runs, one edge per cell), i.e. a maximum
/// matching.
pub fn min_run_cover(cells: &[Coord]) -> u32 {
    if cells.is_empty() {
        return 0;
    }
    let set: HashSet<Coord> = cells.iter().copied().collect();
    let mut sorted: Vec<Coord> = set.iter().copied().collect();

    sorted.sort_unstable();
    let mut h_run: HashMap<Coord, usize> = HashMap::new();
    let mut h_count = 0;
    for &(r, c) in &sorted {
        let id = match c.checked_sub(1).and_then(|pc| h_run.get(&(r, pc))) {
            Some(&id) => id,
            None => {
                h_count += 1;
                h_count - 1
            }
        };
        h_run.insert((r, c), id);
    }

    sorted.sort_unstable_by_key(|&(r, c)| (c, r));
    let mut v_run: HashMap<Coord, usize> = HashMap::new();
    let mut v_count = 0;
    for &(r, c) in &sorted {
        let id = match r.checked_sub(1).and_then(|pr| v_run.get(&(pr, c))) {
            Some(&id) => id,
            None => {
                v_count += 1;
                v_count - 1
            }
        };
        v_run.insert((r, c), id);
    }

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); h_count];
    for cell in &sorted {
        adj[h_run[cell]].push(v_run[cell]);
    }

    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }

    let mut owner: Vec<Option<usize>> = vec![None; v_count];
    let mut matching = 0;
    for u in 0..h_count {
        let mut seen = vec![false; v_count];
        if augment(u, &adj, &mut seen, &mut owner) {
            matching += 1;
        }
    }
    matching
}

/// Batched table edit distance over the greedy edit path.
pub fn ted_batch(t1: &Table, t2: &Table) -> u32 {
    let path = greedy_edit_path(t1, t2);
    let mut groups: BTreeMap<BatchKind, Vec<Coord>> = BTreeMap::new();
    for edit in &path.edits {
        let (kind, at) = batch_key(edit);
        groups.entry(kind).or_default().push(at);
    }
    groups.values().map(|cells| min_run_cover(cells)).sum()
}

/// Exact table edit distance by breadth-first enumeration of edit sequences.
///
/// Coordinates are limited to those of either table plus one scratch cell,
/// and written values to those of `t2`; other choices can never shorten a
/// path. Fails when the two tables together hold more than `cell_budget`
/// cells.
pub fn ted_exact(t1: &Table, t2: &Table, cell_budget: usize) -> Result<u32, TedError> {
    let cells = t1.cell_count() + t2.cell_count();
    if cells > cell_budget {
        return Err(TedError::BudgetExceeded {
            cells,
            budget: cell_budget,
        });
    }

    let mut coords: Vec<Coord> = t1
        .cells()
        .chain(t2.cells())
        .map(|(r, c, _)| (r, c))
        .collect();
    coords.sort_unstable();
    coords.dedup();
    let scratch_row = t1.row_count().max(t2.row_count());
    coords.push((scratch_row, 0));

    let mut values: Vec<&str> = t1.cells().chain(t2.cells()).map(|(_, _, v)| v).collect();
    values.sort_unstable();
    values.dedup();
    let value_id = |v: &str| values.binary_search(&v).expect("interned") as u8 + 1;
    let target_values: Vec<u8> = {
        let mut ids: Vec<u8> = t2.cells().map(|(_, _, v)| value_id(v)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };

    let encode = |t: &Table| -> Vec<u8> {
        coords
            .iter()
            .map(|&(r, c)| t.get(r, c).map_or(0, value_id))
            .collect()
    };
    let start = encode(t1);
    let goal = encode(t2);
    let in_target: Vec<bool> = coords
        .iter()
        .map(|&(r, c)| t2.get(r, c).is_some())
        .collect();

    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    seen.insert(start.clone());
    let mut frontier = VecDeque::from([(start, 0u32)]);
    while let Some((state, depth)) = frontier.pop_front() {
        if state == goal {
            return Ok(depth);
        }
        let mut push = |next: Vec<u8>| {
            if seen.insert(next.clone()) {
                frontier.push_back((next, depth + 1));
            }
        };
        for i in 0..state.len() {
            if state[i] == 0 {
                if in_target[i] {
                    for &v in &target_values {
                        let mut next = state.clone();
                        next[i] = v;
                        push(next);
                    }
                }
                continue;
            }
            let mut removed = state.clone();
            removed[i] = 0;
            push(removed);
            for &v in &target_values {
                if v != state[i] {
                    let mut next = state.clone();
                    next[i] = v;
                    push(next);
                }
            }
            for j in 0..state.len() {
                if state[j] == 0 {
                    let mut next = state.clone();
                    next[j] = state[i];
                    next[i] = 0;
                    push(next);
                }
            }
        }
    }
    unreachable!("removing everything and adding the target is always possible")
}
