//! Independent solution checking and an exhaustive joint-space optimum.
//!
//! Nothing here reuses the solver's conflict scanner, CAT or search code, so
//! agreement between the two is meaningful.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::conflicts::{Constraint, Location, Solution};
use crate::gridmap::{Cell, GridMap};
use crate::instance::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    VertexConflict,
    EdgeConflict,
    IllegalMove,
    ConstraintViolation,
    CostMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::VertexConflict => "vertex-conflict",
            ViolationKind::EdgeConflict => "edge-conflict",
            ViolationKind::IllegalMove => "illegal-move",
            ViolationKind::ConstraintViolation => "constraint-violation",
            ViolationKind::CostMismatch => "cost-mismatch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    pub recomputed_soc: u64,
}

impl ValidationReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Checks a solution against its instance and, optionally, a constraint set.
pub fn validate_solution(
    instance: &Instance,
    solution: &Solution,
    constraints: Option<&[Constraint]>,
) -> ValidationReport {
    let plans: Vec<Vec<Cell>> = solution.paths().iter().map(|p| p.vertices().to_vec()).collect();
    validate_plans(instance, &plans, Some(solution.soc()), constraints)
}

/// Checks raw per-agent cell sequences (`plans[i][t]` is agent `i` at step
/// `t`); a claimed sum-of-costs, when given, is compared to the recomputed one.
pub fn validate_plans(
    instance: &Instance,
    plans: &[Vec<Cell>],
    claimed_soc: Option<u64>,
    constraints: Option<&[Constraint]>,
) -> ValidationReport {
    let map = instance.map();
    let agents = instance.agents();
    let mut violations = Vec::new();
    let mut push = |kind, detail: String| violations.push(Violation { kind, detail });

    if plans.len() != agents.len() {
        push(
            ViolationKind::IllegalMove,
            format!("{} plans for {} agents", plans.len(), agents.len()),
        );
    }
    let n = plans.len().min(agents.len());
    let at = |i: usize, t: usize| -> Cell {
        let p = &plans[i];
        p[t.min(p.len() - 1)]
    };
    let mut soc = 0u64;
    let mut horizon = 0usize;
    for i in 0..n {
        let p = &plans[i];
        if p.is_empty() {
            push(ViolationKind::IllegalMove, format!("agent {i}: empty plan"));
            continue;
        }
        horizon = horizon.max(p.len() - 1);
        if p[0] != agents[i].start {
            push(
                ViolationKind::IllegalMove,
                format!("agent {i}: starts at {} instead of {}", p[0], agents[i].start),
            );
        }
        if p[p.len() - 1] != agents[i].goal {
            push(
                ViolationKind::IllegalMove,
                format!("agent {i}: ends at {} instead of {}", p[p.len() - 1], agents[i].goal),
            );
        }
        for (t, &c) in p.iter().enumerate() {
            if !map.is_passable(c) {
                push(
                    ViolationKind::IllegalMove,
                    format!("agent {i}: {c} at t={t} is not passable"),
                );
            }
        }
        for t in 1..p.len() {
            let (u, w) = (p[t - 1], p[t]);
            if u.x.abs_diff(w.x) + u.y.abs_diff(w.y) > 1 {
                push(
                    ViolationKind::IllegalMove,
                    format!("agent {i}: jump {u} -> {w} at t={t}"),
                );
            }
        }
        let goal = p[p.len() - 1];
        let cost = p.iter().rposition(|&c| c != goal).map_or(0, |k| k + 1);
        soc += cost as u64;
    }
    if plans[..n].iter().all(|p| !p.is_empty()) {
        for i in 0..n {
            for j in i + 1..n {
                for t in 0..=horizon {
                    if at(i, t) == at(j, t) {
                        push(
                            ViolationKind::VertexConflict,
                            format!("agents {i} and {j} at {} t={t}", at(i, t)),
                        );
                    }
                    if t > 0
                        && at(i, t) != at(i, t - 1)
                        && at(i, t - 1) == at(j, t)
                        && at(i, t) == at(j, t - 1)
                    {
                        push(
                            ViolationKind::EdgeConflict,
                            format!(
                                "agents {i} and {j} swap {} <-> {} at t={t}",
                                at(i, t - 1),
                                at(i, t)
                            ),
                        );
                    }
                }
            }
        }
        for c in constraints.unwrap_or(&[]) {
            if c.agent >= n {
                continue;
            }
            let t = c.time as usize;
            let broken = match c.location {
                Location::Vertex(v) => at(c.agent, t) == v,
                Location::Edge(u, w) => t > 0 && at(c.agent, t - 1) == u && at(c.agent, t) == w,
            };
            if broken {
                push(ViolationKind::ConstraintViolation, format!("{c} is violated"));
            }
        }
    }
    if let Some(claimed) = claimed_soc {
        if claimed != soc {
            push(
                ViolationKind::CostMismatch,
                format!("claimed sum-of-costs {claimed}, recomputed {soc}"),
            );
        }
    }
    ValidationReport {
        valid: violations.is_empty(),
        violations,
        recomputed_soc: soc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no solution with sum-of-costs at most {0}")]
    CapExceeded(u64),
}

/// The default search cap: sum of distances plus two map perimeters' worth of
/// slack per agent.
pub fn default_cost_cap(instance: &Instance) -> u64 {
    let map = instance.map();
    let k = instance.num_agents() as u64;
    let sum: u64 = (0..instance.num_agents())
        .map(|a| instance.shortest_path_length(a) as u64)
        .sum();
    sum + 2 * k * (map.width() + map.height()) as u64
}

fn bfs(map: &GridMap, goal: Cell) -> Vec<u32> {
    let mut dist = vec![u32::MAX; map.num_cells()];
    let mut q = VecDeque::from([goal]);
    dist[map.index(goal)] = 0;
    while let Some(c) = q.pop_front() {
        let d = dist[map.index(c)];
        for n in map.neighbors(c).unwrap_or_default() {
            if dist[map.index(n)] == u32::MAX {
                dist[map.index(n)] = d + 1;
                q.push_back(n);
            }
        }
    }
    dist
}

/// Exact minimum sum-of-costs by A* over the joint configuration space, one
/// agent move at a time.
///
/// Waiting on the goal is free at first but remembered per agent; the debt is
/// charged if the agent later leaves, so a path's cost is its final arrival
/// time. Intended for a handful of agents on small maps.
pub fn brute_force_optimal(instance: &Instance, cost_cap: u64) -> Result<u64, OracleError> {
    let map = instance.map();
    let agents = instance.agents();
    let k = agents.len();
    let dist: Vec<Vec<u32>> = agents.iter().map(|a| bfs(map, a.goal)).collect();
    let goal: Vec<u32> = agents.iter().map(|a| map.index(a.goal) as u32).collect();
    let moves: Vec<Vec<u32>> = (0..map.num_cells())
        .map(|i| {
            let c = map.cell(i);
            let mut v: Vec<u32> = map
                .neighbors(c)
                .unwrap_or_default()
                .into_iter()
                .map(|n| map.index(n) as u32)
                .collect();
            v.push(i as u32);
            v
        })
        .collect();

    // Layout: [pos; k] [next; k] [pending; k] [idx].
    let h = |s: &[u32]| -> u64 {
        let idx = s[3 * k] as usize;
        (0..k)
            .map(|a| {
                let c = if a < idx { s[k + a] } else { s[a] };
                dist[a][c as usize] as u64
            })
            .sum()
    };
    let mut start = vec![0u32; 3 * k + 1];
    for (a, ag) in agents.iter().enumerate() {
        start[a] = map.index(ag.start) as u32;
    }
    let mut best: FxHashMap<Vec<u32>, u64> = FxHashMap::default();
    let mut heap = BinaryHeap::new();
    let h0 = h(&start);
    if h0 > cost_cap {
        return Err(OracleError::CapExceeded(cost_cap));
    }
    best.insert(start.clone(), 0);
    heap.push(Reverse((h0, 0u64, start)));
    while let Some(Reverse((_, g, s))) = heap.pop() {
        if best.get(&s).is_some_and(|&b| b < g) {
            continue;
        }
        let idx = s[3 * k] as usize;
        if idx == 0 && (0..k).all(|a| s[a] == goal[a]) {
            return Ok(g);
        }
        let from = s[idx];
        for &to in &moves[from as usize] {
            let clash = (0..idx).any(|j| {
                s[k + j] == to || (to != from && s[j] == to && s[k + j] == from)
            });
            if clash {
                continue;
            }
            let mut n = s.clone();
            let pending = s[2 * k + idx];
            let step = if to == from && to == goal[idx] {
                n[2 * k + idx] = pending + 1;
                0
            } else {
                n[2 * k + idx] = 0;
                1 + pending as u64
            };
            n[k + idx] = to;
            if idx + 1 == k {
                for a in 0..k {
                    n[a] = n[k + a];
                    n[k + a] = 0;
                }
                n[3 * k] = 0;
            } else {
                n[3 * k] = idx as u32 + 1;
            }
            let g2 = g + step;
            let f2 = g2 + h(&n);
            if f2 > cost_cap || best.get(&n).is_some_and(|&b| b <= g2) {
                continue;
            }
            best.insert(n.clone(), g2);
            heap.push(Reverse((f2, g2, n)));
        }
    }
    Err(OracleError::CapExceeded(cost_cap))
}
