//! Conflict-avoidance table: how many other agents use each vertex and edge
//! at each step, consulted by the low level to break ties.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::conflicts::Path;
use crate::gridmap::Cell;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatError {
    #[error("path of agent {0} is not in the conflict-avoidance table")]
    NotPresent(usize),
}

/// Counts of vertex and edge occupancy by the paths added so far.
///
/// A path occupies its goal at every step after arrival; that is recorded
/// once per path rather than per step, so lookups at any time are exact.
#[derive(Debug, Clone, Default)]
pub struct ConflictAvoidanceTable {
    visits: FxHashMap<Cell, BTreeMap<u32, u32>>,
    edge: FxHashMap<(Cell, Cell, u32), u32>,
    parked: FxHashMap<Cell, BTreeMap<u32, u32>>,
    present: FxHashMap<usize, u32>,
}

impl ConflictAvoidanceTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Table holding every path except the one of `skip`.
    pub fn from_paths<'a>(paths: impl IntoIterator<Item = &'a Path>, skip: Option<usize>) -> Self {
        let mut cat = Self::new();
        for p in paths {
            if Some(p.agent()) != skip {
                cat.add_path(p);
            }
        }
        cat
    }

    pub fn is_empty(&self) -> bool {
        self.present.is_empty()
    }

    pub fn add_path(&mut self, path: &Path) {
        let v = path.vertices();
        let last = v.len() - 1;
        for (t, &c) in v[..last].iter().enumerate() {
            *self.visits.entry(c).or_default().entry(t as u32).or_default() += 1;
        }
        for t in 1..v.len() {
            if v[t - 1] != v[t] {
                *self.edge.entry((v[t - 1], v[t], t as u32)).or_default() += 1;
            }
        }
        *self
            .parked
            .entry(v[last])
            .or_default()
            .entry(last as u32)
            .or_default() += 1;
        *self.present.entry(path.agent()).or_default() += 1;
    }

    pub fn remove_path(&mut self, path: &Path) -> Result<(), CatError> {
        match self.present.get_mut(&path.agent()) {
            Some(n) if *n > 1 => *n -= 1,
            Some(_) => {
                self.present.remove(&path.agent());
            }
            None => return Err(CatError::NotPresent(path.agent())),
        }
        let v = path.vertices();
        let last = v.len() - 1;
        for (t, &c) in v[..last].iter().enumerate() {
            dec_timed(&mut self.visits, c, t as u32);
        }
        for t in 1..v.len() {
            if v[t - 1] != v[t] {
                let k = (v[t - 1], v[t], t as u32);
                if let Some(n) = self.edge.get_mut(&k) {
                    *n -= 1;
                    if *n == 0 {
                        self.edge.remove(&k);
                    }
                }
            }
        }
        dec_timed(&mut self.parked, v[last], last as u32);
        Ok(())
    }

    /// Number of recorded paths at `cell` at step `t`.
    pub fn vertex_count(&self, cell: Cell, t: u32) -> u32 {
        let moving = self
            .visits
            .get(&cell)
            .and_then(|m| m.get(&t))
            .copied()
            .unwrap_or(0);
        let parked = self
            .parked
            .get(&cell)
            .map_or(0, |m| m.range(..=t).map(|(_, n)| n).sum());
        moving + parked
    }

    /// Number of recorded paths traversing `from → to` arriving at `t`.
    pub fn edge_count(&self, from: Cell, to: Cell, t: u32) -> u32 {
        self.edge.get(&(from, to, t)).copied().unwrap_or(0)
    }

    /// Conflicts incurred by moving (or waiting) `from → to` arriving at `t`.
    pub fn conflicts_of_move(&self, from: Cell, to: Cell, t: u32) -> u32 {
        let swap = if from != to {
            self.edge_count(to, from, t)
        } else {
            0
        };
        self.vertex_count(to, t) + swap
    }

    /// Conflicts incurred by staying on `goal` forever from step `t` on,
    /// counting each other path at most once.
    pub fn conflicts_after_arrival(&self, goal: Cell, t: u32) -> u32 {
        let later_visits: u32 = self
            .visits
            .get(&goal)
            .map_or(0, |m| m.range(t + 1..).map(|(_, n)| n).sum());
        let later_parks: u32 = self
            .parked
            .get(&goal)
            .map_or(0, |m| m.range(t + 1..).map(|(_, n)| n).sum());
        later_visits + later_parks
    }
}

fn dec_timed(m: &mut FxHashMap<Cell, BTreeMap<u32, u32>>, cell: Cell, t: u32) {
    if let Some(times) = m.get_mut(&cell) {
        if let Some(n) = times.get_mut(&t) {
            *n -= 1;
            if *n == 0 {
                times.remove(&t);
            }
        }
        if times.is_empty() {
            m.remove(&cell);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(agent: usize, cells: &[(u32, u32)]) -> Path {
        Path::new(agent, cells.iter().map(|&(x, y)| Cell::new(x, y)).collect())
    }

    #[test]
    fn counts_vertices_edges_and_parking() {
        let mut cat = ConflictAvoidanceTable::new();
        let p = path(3, &[(0, 0), (1, 0), (2, 0)]);
        cat.add_path(&p);
        assert_eq!(cat.vertex_count(Cell::new(1, 0), 1), 1);
        assert_eq!(cat.vertex_count(Cell::new(1, 0), 2), 0);
        assert_eq!(cat.vertex_count(Cell::new(2, 0), 1), 0);
        assert_eq!(cat.vertex_count(Cell::new(2, 0), 2), 1);
        assert_eq!(cat.vertex_count(Cell::new(2, 0), 500), 1);
        assert_eq!(cat.edge_count(Cell::new(0, 0), Cell::new(1, 0), 1), 1);
        // Swapping against the recorded move.
        assert_eq!(cat.conflicts_of_move(Cell::new(1, 0), Cell::new(0, 0), 1), 1);
        assert_eq!(cat.conflicts_of_move(Cell::new(2, 0), Cell::new(1, 0), 1), 1);
        assert_eq!(cat.conflicts_of_move(Cell::new(1, 1), Cell::new(1, 0), 1), 1);
        assert_eq!(cat.conflicts_of_move(Cell::new(1, 1), Cell::new(1, 0), 2), 0);
    }

    #[test]
    fn remove_restores_empty_table() {
        let mut cat = ConflictAvoidanceTable::new();
        let p = path(0, &[(0, 0), (1, 0), (1, 1)]);
        let q = path(1, &[(1, 1), (1, 0)]);
        cat.add_path(&p);
        cat.add_path(&q);
        assert_eq!(cat.vertex_count(Cell::new(1, 0), 1), 2);
        cat.remove_path(&p).unwrap();
        assert_eq!(cat.vertex_count(Cell::new(1, 0), 1), 1);
        cat.remove_path(&q).unwrap();
        assert!(cat.is_empty());
        assert!(cat.visits.is_empty() && cat.edge.is_empty() && cat.parked.is_empty());
        assert_eq!(cat.remove_path(&q), Err(CatError::NotPresent(1)));
    }

    #[test]
    fn later_visits_of_goal() {
        let cat = ConflictAvoidanceTable::from_paths(
            [
                &path(0, &[(0, 0), (1, 0), (2, 0), (2, 1)]),
                &path(1, &[(3, 0), (2, 0)]),
                &path(2, &[(0, 1), (0, 2)]),
            ],
            Some(2),
        );
        assert_eq!(cat.conflicts_after_arrival(Cell::new(2, 0), 0), 2);
        assert_eq!(cat.conflicts_after_arrival(Cell::new(2, 0), 1), 1);
        assert_eq!(cat.conflicts_after_arrival(Cell::new(2, 0), 2), 0);
        assert_eq!(cat.conflicts_after_arrival(Cell::new(0, 2), 0), 0);
    }
}
