//! Timed paths, solutions, constraints, and vertex/edge conflict detection.
//!
//! Agents that have finished stay on their goal forever, so a path of cost
//! `c` occupies its goal at every `t ≥ c` and can still be collided with.

use std::borrow::Borrow;
use std::fmt;

use crate::gridmap::Cell;

/// Timed move sequence of one agent: `vertices[t]` is its cell at step `t`.
///
/// Trailing repeats of the goal are trimmed, so `cost()` is the step of the
/// final arrival.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    agent: usize,
    vertices: Vec<Cell>,
}

impl Path {
    pub fn new(agent: usize, mut vertices: Vec<Cell>) -> Self {
        assert!(!vertices.is_empty(), "a path has at least its start cell");
        while vertices.len() > 1 && vertices[vertices.len() - 2] == vertices[vertices.len() - 1] {
            vertices.pop();
        }
        Path { agent, vertices }
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn cost(&self) -> u32 {
        (self.vertices.len() - 1) as u32
    }

    pub fn vertices(&self) -> &[Cell] {
        &self.vertices
    }

    pub fn start(&self) -> Cell {
        self.vertices[0]
    }

    pub fn goal(&self) -> Cell {
        *self.vertices.last().unwrap()
    }

    /// Position at step `t`, parked on the goal after arrival.
    #[inline]
    pub fn at(&self, t: u32) -> Cell {
        self.vertices[(t as usize).min(self.vertices.len() - 1)]
    }

    /// The cells at steps `0..=horizon`, padding with goal waits.
    pub fn padded(&self, horizon: u32) -> Vec<Cell> {
        (0..=horizon.max(self.cost())).map(|t| self.at(t)).collect()
    }
}

/// One path per agent with its sum-of-costs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    paths: Vec<Path>,
    soc: u64,
}

impl Solution {
    pub fn new(paths: Vec<Path>) -> Self {
        let soc = paths.iter().map(|p| p.cost() as u64).sum();
        Solution { paths, soc }
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn soc(&self) -> u64 {
        self.soc
    }

    pub fn first_conflict(&self) -> Option<Conflict> {
        find_first_conflict(&self.paths)
    }

    pub fn count_conflicts(&self) -> u64 {
        count_conflicts(&self.paths)
    }

    pub fn into_paths(self) -> Vec<Path> {
        self.paths
    }
}

/// Where a conflict or constraint applies. An edge is directed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Vertex(Cell),
    Edge(Cell, Cell),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Vertex(c) => write!(f, "{c}"),
            Location::Edge(u, w) => write!(f, "{u}->{w}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConflictKind {
    Vertex,
    Edge,
}

/// A collision between two agents. For edge conflicts the location is the
/// traversal made by `agents.0`; `agents.1` traverses it in reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Conflict {
    pub agents: (usize, usize),
    pub location: Location,
    pub time: u32,
}

impl Conflict {
    pub fn kind(&self) -> ConflictKind {
        match self.location {
            Location::Vertex(_) => ConflictKind::Vertex,
            Location::Edge(..) => ConflictKind::Edge,
        }
    }

    /// Deterministic selection order: time, vertex before edge, agent pair,
    /// then cell.
    fn order_key(&self) -> (u32, ConflictKind, (usize, usize), Cell) {
        let cell = match self.location {
            Location::Vertex(c) | Location::Edge(c, _) => c,
        };
        (self.time, self.kind(), self.agents, cell)
    }
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} conflict between agents {} and {} at {} t={}",
            self.kind(),
            self.agents.0,
            self.agents.1,
            self.location,
            self.time
        )
    }
}

/// Forbids `agent` from occupying a vertex at `time`, or from traversing a
/// directed edge so that it arrives at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub agent: usize,
    pub location: Location,
    pub time: u32,
}

impl Constraint {
    pub fn vertex(agent: usize, cell: Cell, time: u32) -> Self {
        Constraint {
            agent,
            location: Location::Vertex(cell),
            time,
        }
    }

    pub fn edge(agent: usize, from: Cell, to: Cell, time: u32) -> Self {
        Constraint {
            agent,
            location: Location::Edge(from, to),
            time,
        }
    }

    /// Whether `path` respects this constraint; paths of other agents always do.
    pub fn is_satisfied_by(&self, path: &Path) -> bool {
        if path.agent() != self.agent {
            return true;
        }
        match self.location {
            Location::Vertex(c) => path.at(self.time) != c,
            Location::Edge(u, w) => {
                self.time == 0 || !(path.at(self.time - 1) == u && path.at(self.time) == w)
            }
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(agent {}, {}, t={})", self.agent, self.location, self.time)
    }
}

fn horizon<P: Borrow<Path>>(paths: &[P]) -> u32 {
    paths.iter().map(|p| p.borrow().cost()).max().unwrap_or(0)
}

/// Calls `f` for every collision event up to the horizon, in time order.
/// Within one step vertex events precede edge events.
fn scan<P: Borrow<Path>>(paths: &[P], mut f: impl FnMut(Conflict) -> bool) {
    let mut occupancy: Vec<(Cell, usize)> = Vec::with_capacity(paths.len());
    let mut moves: Vec<(Cell, Cell, usize)> = Vec::with_capacity(paths.len());
    for t in 0..=horizon(paths) {
        occupancy.clear();
        occupancy.extend(paths.iter().enumerate().map(|(i, p)| (p.borrow().at(t), i)));
        occupancy.sort_unstable();
        for run in occupancy.chunk_by(|a, b| a.0 == b.0) {
            for (k, &(cell, i)) in run.iter().enumerate() {
                for &(_, j) in &run[k + 1..] {
                    let c = Conflict {
                        agents: (i, j),
                        location: Location::Vertex(cell),
                        time: t,
                    };
                    if !f(c) {
                        return;
                    }
                }
            }
        }
        if t == 0 {
            continue;
        }
        moves.clear();
        moves.extend(paths.iter().enumerate().filter_map(|(i, p)| {
            let p = p.borrow();
            let (u, w) = (p.at(t - 1), p.at(t));
            (u != w).then_some((u, w, i))
        }));
        moves.sort_unstable();
        for &(u, w, i) in &moves {
            let start = moves.partition_point(|m| (m.0, m.1) < (w, u));
            for &(_, _, j) in moves[start..].iter().take_while(|m| (m.0, m.1) == (w, u)) {
                if i < j {
                    let c = Conflict {
                        agents: (i, j),
                        location: Location::Edge(u, w),
                        time: t,
                    };
                    if !f(c) {
                        return;
                    }
                }
            }
        }
    }
}

/// The earliest conflict under the deterministic selection order, if any.
pub fn find_first_conflict<P: Borrow<Path>>(paths: &[P]) -> Option<Conflict> {
    let mut best: Option<Conflict> = None;
    let mut best_time = None;
    scan(paths, |c| {
        if best_time.is_some_and(|t| c.time > t) {
            return false;
        }
        best_time = Some(c.time);
        if best.is_none_or(|b| c.order_key() < b.order_key()) {
            best = Some(c);
        }
        true
    });
    best
}

/// Number of distinct collision events (pair, kind, location, time).
pub fn count_conflicts<P: Borrow<Path>>(paths: &[P]) -> u64 {
    let mut n = 0;
    scan(paths, |_| {
        n += 1;
        true
    });
    n
}

/// Whether exactly this conflict is present in the given paths.
pub fn conflict_occurs<P: Borrow<Path>>(paths: &[P], conflict: &Conflict) -> bool {
    let (i, j) = conflict.agents;
    let (Some(pi), Some(pj)) = (paths.get(i), paths.get(j)) else {
        return false;
    };
    let (pi, pj, t) = (pi.borrow(), pj.borrow(), conflict.time);
    match conflict.location {
        Location::Vertex(c) => pi.at(t) == c && pj.at(t) == c,
        Location::Edge(u, w) => {
            t > 0 && pi.at(t - 1) == u && pi.at(t) == w && pj.at(t - 1) == w && pj.at(t) == u
        }
    }
}

/// The two constraints that resolve `c`, one per involved agent.
pub fn split_constraints(c: &Conflict) -> (Constraint, Constraint) {
    let (i, j) = c.agents;
    match c.location {
        Location::Vertex(v) => (
            Constraint::vertex(i, v, c.time),
            Constraint::vertex(j, v, c.time),
        ),
        Location::Edge(u, w) => (
            Constraint::edge(i, u, w, c.time),
            Constraint::edge(j, w, u, c.time),
        ),
    }
}
