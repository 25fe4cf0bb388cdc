//! MAPF instances and the per-agent distance heuristics.

use std::collections::VecDeque;

use thiserror::Error;

use crate::gridmap::{Cell, GridError, GridMap, Scenario};

/// Distance value for cells that cannot reach the goal.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("instance needs at least one agent")]
    NoAgents,
    #[error("scenario exhausted: requested {requested} agents, scenario has {available}")]
    ScenarioExhausted { requested: usize, available: usize },
    #[error("agent {agent}: {which} {cell} is not a passable cell")]
    NotPassable {
        agent: usize,
        which: &'static str,
        cell: Cell,
    },
    #[error("agents {first} and {second} share the {which} {cell}")]
    Duplicate {
        first: usize,
        second: usize,
        which: &'static str,
        cell: Cell,
    },
    #[error("agent {agent}: goal {goal} is unreachable from start {start}")]
    Unreachable { agent: usize, start: Cell, goal: Cell },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Exact move-count distances from every cell to one goal, by backward BFS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    goal: Cell,
    width: u32,
    dist: Vec<u32>,
}

impl DistanceField {
    pub fn compute(map: &GridMap, goal: Cell) -> Result<Self, GridError> {
        if !map.contains(goal) {
            return Err(GridError::OutOfBounds(goal));
        }
        if !map.is_passable(goal) {
            return Err(GridError::Blocked(goal));
        }
        let mut dist = vec![UNREACHABLE; map.num_cells()];
        let mut queue = VecDeque::new();
        let g = map.index(goal);
        dist[g] = 0;
        queue.push_back(g);
        while let Some(i) = queue.pop_front() {
            let d = dist[i] + 1;
            map.for_each_neighbor(i, |n| {
                if dist[n] == UNREACHABLE {
                    dist[n] = d;
                    queue.push_back(n);
                }
            });
        }
        Ok(DistanceField {
            goal,
            width: map.width(),
            dist,
        })
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    /// Distance from `c`, or `None` when unreachable or out of range.
    pub fn get(&self, c: Cell) -> Option<u32> {
        if c.x >= self.width {
            return None;
        }
        self.dist
            .get((c.y * self.width + c.x) as usize)
            .copied()
            .filter(|d| *d != UNREACHABLE)
    }

    #[inline]
    pub(crate) fn at_index(&self, index: usize) -> u32 {
        self.dist[index]
    }
}

/// Convenience wrapper matching the free-function form.
pub fn compute_distance_field(map: &GridMap, goal: Cell) -> Result<DistanceField, GridError> {
    DistanceField::compute(map, goal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agent {
    pub start: Cell,
    pub goal: Cell,
}

/// A map plus an ordered list of agents, with one distance field per agent.
#[derive(Debug, Clone)]
pub struct Instance {
    map: GridMap,
    agents: Vec<Agent>,
    heuristics: Vec<DistanceField>,
}

impl Instance {
    pub fn new(map: GridMap, agents: Vec<Agent>) -> Result<Self, InstanceError> {
        if agents.is_empty() {
            return Err(InstanceError::NoAgents);
        }
        for (i, a) in agents.iter().enumerate() {
            for (which, cell) in [("start", a.start), ("goal", a.goal)] {
                if !map.is_passable(cell) {
                    return Err(InstanceError::NotPassable {
                        agent: i,
                        which,
                        cell,
                    });
                }
            }
            for (j, b) in agents[..i].iter().enumerate() {
                if a.start == b.start {
                    return Err(InstanceError::Duplicate {
                        first: j,
                        second: i,
                        which: "start",
                        cell: a.start,
                    });
                }
                if a.goal == b.goal {
                    return Err(InstanceError::Duplicate {
                        first: j,
                        second: i,
                        which: "goal",
                        cell: a.goal,
                    });
                }
            }
        }
        let heuristics = agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let field = DistanceField::compute(&map, a.goal)?;
                if field.get(a.start).is_none() {
                    return Err(InstanceError::Unreachable {
                        agent: i,
                        start: a.start,
                        goal: a.goal,
                    });
                }
                Ok(field)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Instance {
            map,
            agents,
            heuristics,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn heuristic(&self, agent: usize) -> &DistanceField {
        &self.heuristics[agent]
    }

    /// Cost of the agent's unconstrained shortest path.
    pub fn shortest_path_length(&self, agent: usize) -> u32 {
        self.heuristics[agent]
            .get(self.agents[agent].start)
            .expect("reachability checked at construction")
    }
}

/// The first `k` scenario entries as an instance.
pub fn build_instance(map: GridMap, scen: &Scenario, k: usize) -> Result<Instance, InstanceError> {
    if k == 0 {
        return Err(InstanceError::NoAgents);
    }
    if k > scen.len() {
        return Err(InstanceError::ScenarioExhausted {
            requested: k,
            available: scen.len(),
        });
    }
    let agents = scen.entries[..k]
        .iter()
        .map(|e| Agent {
            start: e.start,
            goal: e.goal,
        })
        .collect();
    Instance::new(map, agents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::ScenarioEntry;
    use proptest::prelude::*;

    fn entry(sx: u32, sy: u32, gx: u32, gy: u32) -> ScenarioEntry {
        ScenarioEntry {
            bucket: 0,
            map_name: "t.map".into(),
            map_width: 5,
            map_height: 5,
            start: Cell::new(sx, sy),
            goal: Cell::new(gx, gy),
            optimal_length: 0.0,
        }
    }

    #[test]
    fn distances_on_open_grid() {
        let map = GridMap::open(3, 3);
        let d = compute_distance_field(&map, Cell::new(1, 1)).unwrap();
        assert_eq!(d.get(Cell::new(0, 0)), Some(2));
        assert_eq!(d.get(Cell::new(1, 0)), Some(1));
        assert_eq!(d.get(Cell::new(1, 1)), Some(0));
    }

    #[test]
    fn wall_makes_cells_unreachable() {
        let map = GridMap::from_rows(&["..@..", "..@..", "..@.."]).unwrap();
        let d = compute_distance_field(&map, Cell::new(0, 0)).unwrap();
        assert_eq!(d.get(Cell::new(4, 2)), None);
        assert_eq!(d.get(Cell::new(1, 2)), Some(3));
        assert_eq!(
            compute_distance_field(&map, Cell::new(2, 0)),
            Err(GridError::Blocked(Cell::new(2, 0)))
        );
    }

    #[test]
    fn first_k_entries_in_order() {
        let scen = Scenario {
            entries: (0..25).map(|i| entry(i % 5, i / 5, 4 - i % 5, 4 - i / 5)).collect(),
        };
        // Entries 0..3 have distinct starts and goals.
        let inst = build_instance(GridMap::open(5, 5), &scen, 3).unwrap();
        assert_eq!(inst.num_agents(), 3);
        for (i, a) in inst.agents().iter().enumerate() {
            assert_eq!(a.start, scen.entries[i].start);
            assert_eq!(a.goal, scen.entries[i].goal);
        }
        assert_eq!(
            build_instance(GridMap::open(5, 5), &scen, 26).unwrap_err(),
            InstanceError::ScenarioExhausted {
                requested: 26,
                available: 25
            }
        );
    }

    #[test]
    fn single_agent_heuristic_is_path_length() {
        let map = GridMap::from_rows(&["....", ".@@.", "...."]).unwrap();
        let scen = Scenario {
            entries: vec![entry(0, 1, 3, 1)],
        };
        let inst = build_instance(map, &scen, 1).unwrap();
        assert_eq!(inst.shortest_path_length(0), 5);
    }

    #[test]
    fn walled_goal_is_rejected() {
        let map = GridMap::from_rows(&["..@.", "..@.", "..@."]).unwrap();
        let scen = Scenario {
            entries: vec![entry(0, 0, 1, 1), entry(0, 2, 3, 0)],
        };
        assert!(matches!(
            build_instance(map, &scen, 2),
            Err(InstanceError::Unreachable { agent: 1, .. })
        ));
    }

    #[test]
    fn duplicate_goals_are_rejected() {
        let scen = Scenario {
            entries: vec![entry(0, 0, 2, 2), entry(1, 0, 2, 2)],
        };
        assert!(matches!(
            build_instance(GridMap::open(3, 3), &scen, 2),
            Err(InstanceError::Duplicate { which: "goal", .. })
        ));
    }

    proptest! {
        #[test]
        fn manhattan_on_open_maps(w in 1u32..10, h in 1u32..10, gx in 0u32..10, gy in 0u32..10) {
            let map = GridMap::open(w, h);
            let goal = Cell::new(gx % w, gy % h);
            let d = DistanceField::compute(&map, goal).unwrap();
            for c in map.passable_cells() {
                prop_assert_eq!(d.get(c), Some(c.x.abs_diff(goal.x) + c.y.abs_diff(goal.y)));
            }
        }

        #[test]
        fn distances_are_consistent(seed in proptest::collection::vec(proptest::bool::weighted(0.3), 64)) {
            let mut map = GridMap::open(8, 8);
            for (i, b) in seed.iter().enumerate() {
                map.set_blocked(map.cell(i), *b);
            }
            map.set_blocked(Cell::new(0, 0), false);
            let d = DistanceField::compute(&map, Cell::new(0, 0)).unwrap();
            for c in map.passable_cells() {
                let dc = d.get(c);
                let mut has_pred = dc == Some(0);
                for n in map.neighbors(c).unwrap() {
                    let dn = d.get(n);
                    prop_assert_eq!(dc.is_some(), dn.is_some());
                    if let (Some(a), Some(b)) = (dc, dn) {
                        prop_assert!(a.abs_diff(b) <= 1);
                        has_pred |= b + 1 == a;
                    }
                }
                prop_assert!(dc.is_none() || has_pred);
            }
        }
    }
}
