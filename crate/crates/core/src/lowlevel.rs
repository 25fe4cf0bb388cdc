//! Space-time single-agent search over `(cell, t)` states.
//!
//! One engine serves all low-level needs: focal search with bound `ε`
//! ordered by accumulated CAT conflicts, which is A* with CAT tie-breaking
//! when `ε = 1`. The search state can be kept and resumed later with a
//! smaller bound; already generated nodes keep the conflict counts they were
//! given when generated.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use rustc_hash::{FxHashMap, FxHashSet};
use thiserror::Error;

use crate::bound::Bound;
use crate::cat::ConflictAvoidanceTable;
use crate::conflicts::{Constraint, Location, Path};
use crate::deadline::Deadline;
use crate::gridmap::{Cell, GridMap};
use crate::instance::{Instance, UNREACHABLE};

const DEADLINE_CHECK_INTERVAL: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LowLevelError {
    #[error("no constraint-satisfying path within the time horizon")]
    Infeasible,
    #[error("deadline reached during low-level search")]
    Timeout,
}

/// Vertex and edge prohibitions for one agent, keyed by cell index.
#[derive(Debug, Clone, Default)]
pub struct ConstraintTable {
    vertex: FxHashSet<(u32, u32)>,
    edge: FxHashSet<(u32, u32, u32)>,
    latest: u32,
    goal_latest: Option<u32>,
}

impl ConstraintTable {
    pub fn new<'a>(
        map: &GridMap,
        agent: usize,
        goal: Cell,
        constraints: impl IntoIterator<Item = &'a Constraint>,
    ) -> Self {
        let mut table = ConstraintTable::default();
        for c in constraints.into_iter().filter(|c| c.agent == agent) {
            table.latest = table.latest.max(c.time);
            match c.location {
                Location::Vertex(v) => {
                    if !map.contains(v) {
                        continue;
                    }
                    table.vertex.insert((map.index(v) as u32, c.time));
                    if v == goal {
                        table.goal_latest = table.goal_latest.max(Some(c.time));
                    }
                }
                Location::Edge(u, w) => {
                    if map.contains(u) && map.contains(w) {
                        table
                            .edge
                            .insert((map.index(u) as u32, map.index(w) as u32, c.time));
                    }
                }
            }
        }
        table
    }

    /// Latest timestep of any constraint, 0 if none.
    pub fn latest_time(&self) -> u32 {
        self.latest
    }

    /// Latest vertex constraint on the goal cell.
    pub fn latest_goal_time(&self) -> Option<u32> {
        self.goal_latest
    }

    #[inline]
    fn allows(&self, from: u32, to: u32, t: u32) -> bool {
        !self.vertex.contains(&(to, t)) && (from == to || !self.edge.contains(&(from, to, t)))
    }

    #[inline]
    fn is_final(&self, t: u32) -> bool {
        self.goal_latest.is_none_or(|g| t > g)
    }
}

#[derive(Debug, Clone)]
struct Node {
    cell: u32,
    t: u32,
    f: u32,
    conflicts: u32,
    parent: u32,
    tie: u64,
    open: bool,
}

const NO_PARENT: u32 = u32::MAX;

// The last component packs the squared straight-line distance to the goal
// above the generation order.
type OpenKey = (u32, u32, Reverse<u32>, u64);
type FocalKey = (u32, u32, Reverse<u32>, u64);

/// A path together with the smallest `f` in OPEN when it was returned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Found {
    pub path: Path,
    pub f_min: u32,
}

/// Resumable focal search for one agent under a fixed constraint set.
///
/// OPEN is ordered by `(f, conflicts, larger g, tie)` and FOCAL, the OPEN
/// nodes with `f ≤ ⌊ε·f_min⌋`, by `(conflicts, f, larger g, tie)`, where
/// `tie` prefers cells closer to the goal in straight-line distance and then
/// earlier generation. A returned goal node stays in OPEN, so resuming with
/// a bound it still meets returns it again.
#[derive(Debug, Clone)]
pub struct LowLevelState {
    agent: usize,
    goal: u32,
    goal_cell: Cell,
    constraints: ConstraintTable,
    horizon: u32,
    eps: Bound,
    f_min: u32,
    threshold: u32,
    nodes: Vec<Node>,
    index: FxHashMap<(u32, u32), u32>,
    open: BTreeSet<OpenKey>,
    focal: BTreeSet<FocalKey>,
    expansions: u64,
}

impl LowLevelState {
    pub fn new<'a>(
        instance: &Instance,
        agent: usize,
        constraints: impl IntoIterator<Item = &'a Constraint>,
        eps: Bound,
    ) -> Self {
        let map = instance.map();
        let a = instance.agents()[agent];
        let constraints = ConstraintTable::new(map, agent, a.goal, constraints);
        let horizon = (map.passable_count() as u32)
            .saturating_add(constraints.latest_time())
            .saturating_add(1);
        let start = map.index(a.start) as u32;
        let h0 = instance.shortest_path_length(agent);
        let mut state = LowLevelState {
            agent,
            goal: map.index(a.goal) as u32,
            goal_cell: a.goal,
            constraints,
            horizon,
            eps,
            f_min: h0,
            threshold: clamp(eps.threshold(h0 as u64)),
            nodes: Vec::new(),
            index: FxHashMap::default(),
            open: BTreeSet::new(),
            focal: BTreeSet::new(),
            expansions: 0,
        };
        if state.constraints.allows(start, start, 0) {
            state.push(a.start, start, 0, h0, 0, NO_PARENT);
        }
        state
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn epsilon(&self) -> Bound {
        self.eps
    }

    /// Smallest `f` in OPEN as of the last return.
    pub fn f_min(&self) -> u32 {
        self.f_min
    }

    /// Nodes expanded over the lifetime of this state.
    pub fn expansions(&self) -> u64 {
        self.expansions
    }

    pub fn generated(&self) -> usize {
        self.nodes.len()
    }

    pub fn constraints(&self) -> &ConstraintTable {
        &self.constraints
    }

    /// Runs (or continues) the search under the current bound.
    pub fn search(
        &mut self,
        instance: &Instance,
        cat: &ConflictAvoidanceTable,
        deadline: &Deadline,
    ) -> Result<Found, LowLevelError> {
        let map = instance.map();
        let h = instance.heuristic(self.agent);
        let mut succ = [0u32; 5];
        loop {
            let Some(&(f_min, ..)) = self.open.first() else {
                return Err(LowLevelError::Infeasible);
            };
            if f_min > self.f_min {
                self.raise_f_min(f_min);
            }
            let &(conflicts, f, Reverse(t), tie) =
                self.focal.first().expect("FOCAL holds the f_min node");
            let id = tie as u32;
            let cell = self.nodes[id as usize].cell;
            if cell == self.goal && self.constraints.is_final(t) {
                return Ok(Found {
                    path: self.path_to(map, id),
                    f_min: self.f_min,
                });
            }
            if self.expansions.is_multiple_of(DEADLINE_CHECK_INTERVAL) && deadline.expired() {
                return Err(LowLevelError::Timeout);
            }
            self.open.remove(&(f, conflicts, Reverse(t), tie));
            self.focal.pop_first();
            self.nodes[id as usize].open = false;
            self.expansions += 1;

            let mut n = 0;
            map.for_each_neighbor(cell as usize, |c| {
                succ[n] = c as u32;
                n += 1;
            });
            succ[n] = cell;
            n += 1;
            let t1 = t + 1;
            if t1 > self.horizon {
                continue;
            }
            let from = map.cell(cell as usize);
            for &next in &succ[..n] {
                if !self.constraints.allows(cell, next, t1) {
                    continue;
                }
                let hn = h.at_index(next as usize);
                if hn == UNREACHABLE {
                    continue;
                }
                let f1 = t1 + hn;
                let c1 = conflicts + cat.conflicts_of_move(from, map.cell(next as usize), t1);
                match self.index.get(&(next, t1)) {
                    Some(&j) => {
                        let old = &self.nodes[j as usize];
                        if old.open && c1 < old.conflicts {
                            let tj = old.tie;
                            self.open.remove(&(old.f, old.conflicts, Reverse(t1), tj));
                            self.focal.remove(&(old.conflicts, old.f, Reverse(t1), tj));
                            let node = &mut self.nodes[j as usize];
                            node.conflicts = c1;
                            node.parent = id;
                            self.open.insert((f1, c1, Reverse(t1), tj));
                            if f1 <= self.threshold {
                                self.focal.insert((c1, f1, Reverse(t1), tj));
                            }
                        }
                    }
                    None => self.push(map.cell(next as usize), next, t1, f1, c1, id),
                }
            }
        }
    }

    /// Rebuilds FOCAL for `eps_new` and continues the search. Conflict counts
    /// of nodes already generated are kept as they are.
    pub fn resume(
        &mut self,
        eps_new: Bound,
        instance: &Instance,
        cat: &ConflictAvoidanceTable,
        deadline: &Deadline,
    ) -> Result<Found, LowLevelError> {
        self.eps = eps_new;
        if let Some(&(f, ..)) = self.open.first() {
            self.f_min = self.f_min.max(f);
        }
        self.threshold = clamp(eps_new.threshold(self.f_min as u64));
        let threshold = self.threshold;
        self.focal = self
            .open
            .iter()
            .take_while(|k| k.0 <= threshold)
            .map(|&(f, c, g, id)| (c, f, g, id))
            .collect();
        self.search(instance, cat, deadline)
    }

    fn push(&mut self, at: Cell, cell: u32, t: u32, f: u32, conflicts: u32, parent: u32) {
        let id = self.nodes.len() as u32;
        let dx = u64::from(at.x.abs_diff(self.goal_cell.x));
        let dy = u64::from(at.y.abs_diff(self.goal_cell.y));
        let tie = (dx * dx + dy * dy) << 32 | u64::from(id);
        self.nodes.push(Node {
            cell,
            t,
            f,
            conflicts,
            parent,
            tie,
            open: true,
        });
        self.index.insert((cell, t), id);
        self.open.insert((f, conflicts, Reverse(t), tie));
        if f <= self.threshold {
            self.focal.insert((conflicts, f, Reverse(t), tie));
        }
    }

    fn raise_f_min(&mut self, f_min: u32) {
        let old = self.threshold;
        self.f_min = f_min;
        self.threshold = clamp(self.eps.threshold(f_min as u64));
        if self.threshold > old {
            let lo = (old + 1, 0, Reverse(u32::MAX), 0);
            let hi = (self.threshold, u32::MAX, Reverse(0), u64::MAX);
            for &(f, c, g, id) in self.open.range(lo..=hi) {
                self.focal.insert((c, f, g, id));
            }
        }
    }

    fn path_to(&self, map: &GridMap, mut id: u32) -> Path {
        let mut cells = Vec::with_capacity(self.nodes[id as usize].t as usize + 1);
        while id != NO_PARENT {
            let n = &self.nodes[id as usize];
            cells.push(map.cell(n.cell as usize));
            id = n.parent;
        }
        cells.reverse();
        Path::new(self.agent, cells)
    }
}

fn clamp(v: u64) -> u32 {
    v.min(u32::MAX as u64) as u32
}

/// Optimal constrained path, ties among equal `f` broken towards fewer CAT
/// conflicts.
pub fn astar_cat(
    instance: &Instance,
    agent: usize,
    constraints: &[Constraint],
    cat: &ConflictAvoidanceTable,
    deadline: &Deadline,
) -> Result<Found, LowLevelError> {
    LowLevelState::new(instance, agent, constraints, Bound::ONE).search(instance, cat, deadline)
}

/// Bounded-suboptimal focal search; the state is returned for resumption.
pub fn focal_search(
    instance: &Instance,
    agent: usize,
    constraints: &[Constraint],
    cat: &ConflictAvoidanceTable,
    eps_low: Bound,
    deadline: &Deadline,
) -> (Result<Found, LowLevelError>, LowLevelState) {
    let mut state = LowLevelState::new(instance, agent, constraints, eps_low);
    let res = state.search(instance, cat, deadline);
    (res, state)
}

/// Resumes a previous focal search with a tighter bound.
pub fn resume_focal(
    state: &mut LowLevelState,
    eps_new: Bound,
    instance: &Instance,
    cat: &ConflictAvoidanceTable,
    deadline: &Deadline,
) -> Result<Found, LowLevelError> {
    state.resume(eps_new, instance, cat, deadline)
}
