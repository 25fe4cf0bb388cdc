//! Constraint-tree search: CBS, BCBS(ε_H, ε_L) and ECBS(ε).
//!
//! A single engine covers the three modes. OPEN is indexed both by node cost
//! and by node lower bound; FOCAL holds the OPEN nodes whose cost is within
//! `⌊ε_H·LB⌋` and is ordered by `(conflicts, cost, id)`. CBS is BCBS(1, 1).

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::bound::Bound;
use crate::cat::ConflictAvoidanceTable;
use crate::conflicts::{
    conflict_occurs, count_conflicts, find_first_conflict, split_constraints, Conflict, Constraint,
    Path, Solution,
};
use crate::deadline::Deadline;
use crate::instance::Instance;
use crate::lowlevel::{LowLevelError, LowLevelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cbs,
    Bcbs { eps_high: Bound, eps_low: Bound },
    Ecbs { eps: Bound },
}

impl Mode {
    pub fn eps_high(&self) -> Bound {
        match *self {
            Mode::Cbs => Bound::ONE,
            Mode::Bcbs { eps_high, .. } => eps_high,
            Mode::Ecbs { eps } => eps,
        }
    }

    pub fn eps_low(&self) -> Bound {
        match *self {
            Mode::Cbs => Bound::ONE,
            Mode::Bcbs { eps_low, .. } => eps_low,
            Mode::Ecbs { eps } => eps,
        }
    }

    /// Same mode family with the high-level (and for ECBS the single) bound
    /// replaced.
    pub fn with_bound(&self, eps: Bound) -> Mode {
        match *self {
            Mode::Cbs => Mode::Bcbs {
                eps_high: eps,
                eps_low: Bound::ONE,
            },
            Mode::Bcbs { eps_low, .. } => Mode::Bcbs {
                eps_high: eps,
                eps_low,
            },
            Mode::Ecbs { .. } => Mode::Ecbs { eps },
        }
    }

    fn orders_by_lb(&self) -> bool {
        matches!(self, Mode::Ecbs { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    Timeout,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    /// Global lower bound when the search returned.
    pub lb: u64,
    pub hl_expanded: u64,
    pub ll_expanded: u64,
    pub ct_nodes: usize,
    pub elapsed: Duration,
}

impl SolveResult {
    pub fn cost(&self) -> Option<u64> {
        self.solution.as_ref().map(Solution::soc)
    }
}

#[derive(Debug, Clone)]
pub struct CtNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// The constraint added at this node; the full set is the chain to the root.
    pub constraint: Option<Constraint>,
    pub split_conflict: Option<Conflict>,
    pub paths: Vec<Arc<Path>>,
    /// Per-agent lower bounds; `lb` is their sum.
    pub agent_lb: Vec<u32>,
    pub cost: u64,
    pub lb: u64,
    pub num_conflicts: u64,
    pub expanded: bool,
    pub alive: bool,
    /// Saved searches of the agents planned at this node (retaining trees only).
    low_level: Vec<(usize, LowLevelState)>,
}

impl CtNode {
    pub fn solution(&self) -> Solution {
        Solution::new(self.paths.iter().map(|p| (**p).clone()).collect())
    }

    /// Agents whose search state is stored at this node.
    pub fn planned_agents(&self) -> impl Iterator<Item = usize> + '_ {
        self.low_level.iter().map(|(a, _)| *a)
    }
}

/// Result of one call to [`ConstraintTree::search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOutcome {
    /// A conflict-free node was selected; `lb` is the global lower bound at
    /// selection time.
    Solved { node: usize, lb: u64 },
    Exhausted,
    Timeout,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RepairStats {
    pub visited: usize,
    pub replanned: usize,
    pub pruned: usize,
    pub cut: usize,
}

#[derive(Debug, Clone)]
pub struct ConstraintTree {
    mode: Mode,
    retain: bool,
    nodes: Vec<CtNode>,
    root: Option<usize>,
    by_cost: BTreeSet<(u64, u64, usize)>,
    by_lb: BTreeSet<(u64, u64, usize)>,
    focal: BTreeSet<(u64, u64, usize)>,
    threshold: u64,
    lb_floor: u64,
    hl_expanded: u64,
    ll_expanded: u64,
}

impl ConstraintTree {
    /// An empty tree. With `retain`, low-level search states are kept on
    /// every node so the tree can later be repaired under a tighter bound.
    pub fn new(mode: Mode, retain: bool) -> Self {
        ConstraintTree {
            mode,
            retain,
            nodes: Vec::new(),
            root: None,
            by_cost: BTreeSet::new(),
            by_lb: BTreeSet::new(),
            focal: BTreeSet::new(),
            threshold: 0,
            lb_floor: 0,
            hl_expanded: 0,
            ll_expanded: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    pub fn node(&self, id: usize) -> &CtNode {
        &self.nodes[id]
    }

    /// Number of nodes ever created, including removed ones.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn alive_nodes(&self) -> impl Iterator<Item = &CtNode> {
        self.nodes.iter().filter(|n| n.alive)
    }

    pub fn open_len(&self) -> usize {
        self.by_cost.len()
    }

    pub fn hl_expanded(&self) -> u64 {
        self.hl_expanded
    }

    pub fn ll_expanded(&self) -> u64 {
        self.ll_expanded
    }

    /// All constraints in force at `id`.
    pub fn constraints_of(&self, id: usize) -> Vec<Constraint> {
        let mut out = Vec::new();
        let mut cur = Some(id);
        while let Some(i) = cur {
            out.extend(self.nodes[i].constraint);
            cur = self.nodes[i].parent;
        }
        out.reverse();
        out
    }

    /// Lower bounds below which the global LB is never reported.
    pub fn set_lb_floor(&mut self, floor: u64) {
        self.lb_floor = self.lb_floor.max(floor);
    }

    /// Current global lower bound: the smallest OPEN key (lower bound in ECBS
    /// mode, cost otherwise), clamped from below by the floor. `None` when
    /// OPEN is empty.
    pub fn lower_bound(&self) -> Option<u64> {
        let open_min = if self.mode.orders_by_lb() {
            self.by_lb.first().map(|k| k.0)
        } else {
            self.by_cost.first().map(|k| k.0)
        };
        open_min.map(|m| m.max(self.lb_floor))
    }

    /// Replaces the bound and rebuilds FOCAL from OPEN.
    pub fn set_bound(&mut self, eps: Bound) {
        self.mode = self.mode.with_bound(eps);
        self.rebuild_focal();
    }

    /// Runs the search until a conflict-free node is selected. The first call
    /// plans the root; later calls continue from the current OPEN.
    pub fn search(&mut self, instance: &Instance, deadline: &Deadline) -> SearchOutcome {
        if self.root.is_none() {
            match self.plan_root(instance, deadline) {
                Ok(true) => {}
                Ok(false) => return SearchOutcome::Exhausted,
                Err(()) => return SearchOutcome::Timeout,
            }
        }
        loop {
            if deadline.expired() {
                return SearchOutcome::Timeout;
            }
            self.refresh_threshold();
            let Some(lb) = self.lower_bound() else {
                return SearchOutcome::Exhausted;
            };
            let &(_, _, id) = self.focal.first().expect("FOCAL holds the cheapest OPEN node");
            self.remove_open(id);
            if self.nodes[id].num_conflicts == 0 {
                return SearchOutcome::Solved { node: id, lb };
            }
            if self.expand(instance, id, deadline).is_err() {
                self.insert_open(id);
                return SearchOutcome::Timeout;
            }
        }
    }

    fn plan_root(&mut self, instance: &Instance, deadline: &Deadline) -> Result<bool, ()> {
        let k = instance.num_agents();
        // Root paths are planned independently of each other.
        let cat = ConflictAvoidanceTable::new();
        let mut paths = Vec::with_capacity(k);
        let mut agent_lb = Vec::with_capacity(k);
        let mut low_level = Vec::new();
        for a in 0..k {
            let mut state = LowLevelState::new(instance, a, &[], self.mode.eps_low());
            let res = state.search(instance, &cat, deadline);
            self.ll_expanded += state.expansions();
            match res {
                Ok(found) => {
                    paths.push(Arc::new(found.path));
                    agent_lb.push(found.f_min);
                }
                Err(LowLevelError::Timeout) => return Err(()),
                Err(LowLevelError::Infeasible) => return Ok(false),
            }
            if self.retain {
                low_level.push((a, state));
            }
        }
        let id = self.push_node(None, None, None, paths, agent_lb, low_level);
        self.root = Some(id);
        self.insert_open(id);
        Ok(true)
    }

    fn expand(&mut self, instance: &Instance, id: usize, deadline: &Deadline) -> Result<(), ()> {
        let conflict =
            find_first_conflict(&self.nodes[id].paths).expect("expanded node has a conflict");
        let (c1, c2) = split_constraints(&conflict);
        let mut children = Vec::with_capacity(2);
        for c in [c1, c2] {
            let a = c.agent;
            let node = &self.nodes[id];
            let mut constraints = self.constraints_of(id);
            constraints.push(c);
            let cat = ConflictAvoidanceTable::from_paths(node.paths.iter().map(|p| &**p), Some(a));
            let mut state = LowLevelState::new(instance, a, &constraints, self.mode.eps_low());
            let res = state.search(instance, &cat, deadline);
            self.ll_expanded += state.expansions();
            match res {
                Ok(found) => {
                    let node = &self.nodes[id];
                    let mut paths = node.paths.clone();
                    let mut agent_lb = node.agent_lb.clone();
                    paths[a] = Arc::new(found.path);
                    agent_lb[a] = agent_lb[a].max(found.f_min);
                    let low_level = if self.retain {
                        vec![(a, state)]
                    } else {
                        Vec::new()
                    };
                    children.push((c, paths, agent_lb, low_level));
                }
                Err(LowLevelError::Infeasible) => {}
                Err(LowLevelError::Timeout) => return Err(()),
            }
        }
        self.hl_expanded += 1;
        self.nodes[id].expanded = true;
        for (c, paths, agent_lb, low_level) in children {
            let child = self.push_node(Some(id), Some(c), Some(conflict), paths, agent_lb, low_level);
            self.nodes[id].children.push(child);
            self.insert_open(child);
        }
        Ok(())
    }

    fn push_node(
        &mut self,
        parent: Option<usize>,
        constraint: Option<Constraint>,
        split_conflict: Option<Conflict>,
        paths: Vec<Arc<Path>>,
        agent_lb: Vec<u32>,
        low_level: Vec<(usize, LowLevelState)>,
    ) -> usize {
        let id = self.nodes.len();
        let mut node = CtNode {
            id,
            parent,
            children: Vec::new(),
            constraint,
            split_conflict,
            paths,
            agent_lb,
            cost: 0,
            lb: 0,
            num_conflicts: 0,
            expanded: false,
            alive: true,
            low_level,
        };
        summarize(&mut node);
        self.nodes.push(node);
        id
    }

    fn insert_open(&mut self, id: usize) {
        let n = &self.nodes[id];
        self.by_cost.insert((n.cost, n.num_conflicts, id));
        self.by_lb.insert((n.lb, n.cost, id));
        if n.cost <= self.threshold {
            self.focal.insert((n.num_conflicts, n.cost, id));
        }
    }

    fn remove_open(&mut self, id: usize) {
        let n = &self.nodes[id];
        self.by_cost.remove(&(n.cost, n.num_conflicts, id));
        self.by_lb.remove(&(n.lb, n.cost, id));
        self.focal.remove(&(n.num_conflicts, n.cost, id));
    }

    fn target_threshold(&self) -> u64 {
        self.lower_bound()
            .map_or(0, |lb| self.mode.eps_high().threshold(lb))
    }

    fn refresh_threshold(&mut self) {
        let new = self.target_threshold();
        let old = self.threshold;
        if new > old {
            for &(cost, conflicts, id) in self.by_cost.range((old + 1, 0, 0)..=(new, u64::MAX, usize::MAX)) {
                self.focal.insert((conflicts, cost, id));
            }
        } else if new < old {
            for &(cost, conflicts, id) in self.by_cost.range((new + 1, 0, 0)..=(old, u64::MAX, usize::MAX)) {
                self.focal.remove(&(conflicts, cost, id));
            }
        }
        self.threshold = new;
    }

    fn rebuild_focal(&mut self) {
        self.threshold = self.target_threshold();
        let t = self.threshold;
        self.focal = self
            .by_cost
            .range(..=(t, u64::MAX, usize::MAX))
            .map(|&(cost, conflicts, id)| (conflicts, cost, id))
            .collect();
    }

    /// Top-down repair of a retained ECBS tree for a tighter bound.
    ///
    /// Nodes are visited breadth-first from the root. Each node first takes
    /// the repaired paths of its parent, then every agent planned at the node
    /// whose path cost exceeds `⌊eps·lb_a⌋` is resumed against the node's
    /// other paths. A node whose resumed search is infeasible is removed with
    /// its subtree. With `cic`, children whose splitting conflict no longer
    /// occurs in the repaired parent are removed and the parent becomes
    /// unexpanded again. OPEN is rebuilt from all surviving unexpanded nodes.
    pub fn repair(
        &mut self,
        instance: &Instance,
        eps: Bound,
        cic: bool,
        deadline: &Deadline,
    ) -> Result<RepairStats, LowLevelError> {
        assert!(self.retain, "repair needs a tree with saved low-level states");
        self.mode = self.mode.with_bound(eps);
        let mut stats = RepairStats::default();
        let mut queue: VecDeque<usize> = self.root.into_iter().collect();
        while let Some(id) = queue.pop_front() {
            if !self.nodes[id].alive {
                continue;
            }
            stats.visited += 1;
            if let Some(p) = self.nodes[id].parent {
                let (paths, lbs) = (self.nodes[p].paths.clone(), self.nodes[p].agent_lb.clone());
                let planned: Vec<usize> = self.nodes[id].planned_agents().collect();
                let node = &mut self.nodes[id];
                for a in 0..paths.len() {
                    if planned.contains(&a) {
                        node.agent_lb[a] = node.agent_lb[a].max(lbs[a]);
                    } else {
                        node.paths[a] = paths[a].clone();
                        node.agent_lb[a] = lbs[a];
                    }
                }
            }
            let mut infeasible = false;
            for slot in 0..self.nodes[id].low_level.len() {
                let node = &self.nodes[id];
                let a = node.low_level[slot].0;
                if eps.admits(node.paths[a].cost() as u64, node.agent_lb[a] as u64) {
                    continue;
                }
                let cat = ConflictAvoidanceTable::from_paths(node.paths.iter().map(|p| &**p), Some(a));
                let node = &mut self.nodes[id];
                let state = &mut node.low_level[slot].1;
                let before = state.expansions();
                let res = state.resume(eps, instance, &cat, deadline);
                self.ll_expanded += state.expansions() - before;
                match res {
                    Ok(found) => {
                        node.agent_lb[a] = node.agent_lb[a].max(found.f_min);
                        node.paths[a] = Arc::new(found.path);
                        stats.replanned += 1;
                    }
                    Err(LowLevelError::Infeasible) => {
                        infeasible = true;
                        break;
                    }
                    Err(e @ LowLevelError::Timeout) => {
                        self.rebuild_open();
                        return Err(e);
                    }
                }
            }
            if infeasible {
                stats.pruned += self.remove_subtree(id);
                continue;
            }
            summarize(&mut self.nodes[id]);
            let children: Vec<usize> = self.nodes[id]
                .children
                .iter()
                .copied()
                .filter(|&c| self.nodes[c].alive)
                .collect();
            if cic && !children.is_empty() {
                let split = self.nodes[children[0]].split_conflict.expect("child has a split");
                if !conflict_occurs(&self.nodes[id].paths, &split) {
                    for c in children {
                        stats.cut += self.remove_subtree(c);
                    }
                    self.nodes[id].children.clear();
                    self.nodes[id].expanded = false;
                    continue;
                }
            }
            queue.extend(children);
        }
        self.rebuild_open();
        Ok(stats)
    }

    fn remove_subtree(&mut self, id: usize) -> usize {
        let mut removed = 0;
        let mut stack = vec![id];
        while let Some(i) = stack.pop() {
            if self.nodes[i].alive {
                removed += 1;
            }
            let n = &mut self.nodes[i];
            n.alive = false;
            n.low_level.clear();
            stack.extend(n.children.iter().copied());
        }
        removed
    }

    fn rebuild_open(&mut self) {
        self.by_cost.clear();
        self.by_lb.clear();
        self.focal.clear();
        self.threshold = 0;
        let open: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| n.alive && !n.expanded)
            .map(|n| n.id)
            .collect();
        for id in open {
            self.insert_open(id);
        }
        self.rebuild_focal();
    }

    /// Runs a fresh search and packages the outcome.
    pub fn solve(&mut self, instance: &Instance, deadline: &Deadline) -> SolveResult {
        let started = Instant::now();
        let outcome = self.search(instance, deadline);
        let (status, solution, lb) = match outcome {
            SearchOutcome::Solved { node, lb } => {
                (SolveStatus::Solved, Some(self.nodes[node].solution()), lb)
            }
            SearchOutcome::Exhausted => (SolveStatus::Infeasible, None, self.lb_floor),
            SearchOutcome::Timeout => (
                SolveStatus::Timeout,
                None,
                self.lower_bound().unwrap_or(self.lb_floor),
            ),
        };
        SolveResult {
            status,
            solution,
            lb,
            hl_expanded: self.hl_expanded,
            ll_expanded: self.ll_expanded,
            ct_nodes: self.nodes.len(),
            elapsed: started.elapsed(),
        }
    }
}

fn summarize(node: &mut CtNode) {
    node.cost = node.paths.iter().map(|p| p.cost() as u64).sum();
    node.lb = node.agent_lb.iter().map(|&l| l as u64).sum();
    node.num_conflicts = count_conflicts(&node.paths);
}

pub fn cbs_solve(instance: &Instance, deadline: &Deadline) -> SolveResult {
    ConstraintTree::new(Mode::Cbs, false).solve(instance, deadline)
}

pub fn bcbs_solve(
    instance: &Instance,
    eps_high: Bound,
    eps_low: Bound,
    deadline: &Deadline,
    retain: bool,
) -> (SolveResult, Option<ConstraintTree>) {
    let mut tree = ConstraintTree::new(Mode::Bcbs { eps_high, eps_low }, retain);
    let res = tree.solve(instance, deadline);
    (res, retain.then_some(tree))
}

pub fn ecbs_solve(
    instance: &Instance,
    eps: Bound,
    deadline: &Deadline,
    retain: bool,
) -> (SolveResult, Option<ConstraintTree>) {
    let mut tree = ConstraintTree::new(Mode::Ecbs { eps }, retain);
    let res = tree.solve(instance, deadline);
    (res, retain.then_some(tree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{Cell, GridMap};
    use crate::instance::Agent;

    fn inst(rows: &[&str], agents: &[((u32, u32), (u32, u32))]) -> Instance {
        let map = GridMap::from_rows(rows).unwrap();
        let agents = agents
            .iter()
            .map(|&((sx, sy), (gx, gy))| Agent {
                start: Cell::new(sx, sy),
                goal: Cell::new(gx, gy),
            })
            .collect();
        Instance::new(map, agents).unwrap()
    }

    #[test]
    fn single_agent_one_node() {
        let i = inst(&["....", ".@@.", "...."], &[((0, 1), (3, 1))]);
        let r = cbs_solve(&i, &Deadline::never());
        assert_eq!(r.status, SolveStatus::Solved);
        assert_eq!(r.cost(), Some(5));
        assert_eq!(r.ct_nodes, 1);
        assert_eq!(r.lb, 5);
    }

    #[test]
    fn disjoint_corridors_one_node() {
        let i = inst(&["....", "@@@@", "...."], &[((0, 0), (3, 0)), ((3, 2), (0, 2))]);
        let r = cbs_solve(&i, &Deadline::never());
        assert_eq!(r.cost(), Some(6));
        assert_eq!(r.ct_nodes, 1);
    }

    #[test]
    fn crossing_agents_need_a_split() {
        let i = inst(&["...", "...", "..."], &[((0, 1), (2, 1)), ((1, 0), (1, 2))]);
        let r = cbs_solve(&i, &Deadline::never());
        assert_eq!(r.status, SolveStatus::Solved);
        // Both straight paths cross the centre at t=1; one agent must detour or wait.
        assert_eq!(r.cost(), Some(5));
        assert!(r.ct_nodes >= 3);
        assert_eq!(r.solution.unwrap().count_conflicts(), 0);
    }

    #[test]
    fn children_constrain_each_agent_once() {
        let i = inst(&["...", "...", "..."], &[((0, 1), (2, 1)), ((1, 0), (1, 2))]);
        let mut tree = ConstraintTree::new(Mode::Cbs, false);
        tree.search(&i, &Deadline::never());
        let root = tree.node(tree.root().unwrap());
        let conflict = root.solution().first_conflict().unwrap();
        let kids: Vec<&CtNode> = root.children.iter().map(|&c| tree.node(c)).collect();
        assert_eq!(kids.len(), 2);
        for (k, agent) in kids.iter().zip([conflict.agents.0, conflict.agents.1]) {
            assert_eq!(k.split_conflict, Some(conflict));
            assert_eq!(tree.constraints_of(k.id).len(), 1);
            assert_eq!(k.constraint.unwrap().agent, agent);
            for c in tree.constraints_of(k.id) {
                assert!(c.is_satisfied_by(&k.paths[c.agent]));
            }
        }
    }

    #[test]
    fn identity_bounds_match_cbs() {
        let i = inst(
            &["....", "....", "....", "...."],
            &[((0, 0), (3, 3)), ((3, 0), (0, 3)), ((0, 3), (3, 0))],
        );
        let opt = cbs_solve(&i, &Deadline::never()).cost();
        let (b, _) = bcbs_solve(&i, Bound::ONE, Bound::ONE, &Deadline::never(), false);
        let (e, _) = ecbs_solve(&i, Bound::ONE, &Deadline::never(), false);
        assert_eq!(b.cost(), opt);
        assert_eq!(e.cost(), opt);
    }

    #[test]
    fn expired_deadline_reports_timeout() {
        let i = inst(&["...", "...", "..."], &[((0, 1), (2, 1)), ((1, 0), (1, 2))]);
        let r = cbs_solve(&i, &Deadline::at(Instant::now()));
        assert_eq!(r.status, SolveStatus::Timeout);
        assert!(r.solution.is_none());
    }

    #[test]
    fn bounds_on_selection() {
        let i = inst(
            &[".....", ".@.@.", ".....", ".@.@.", "....."],
            &[((0, 0), (4, 4)), ((4, 0), (0, 4)), ((2, 0), (2, 4)), ((0, 2), (4, 2))],
        );
        let opt = cbs_solve(&i, &Deadline::never()).cost().unwrap();
        for eps in [Bound::new(11, 10).unwrap(), Bound::new(3, 2).unwrap(), Bound::integer(2).unwrap()] {
            let (e, _) = ecbs_solve(&i, eps, &Deadline::never(), false);
            let cost = e.cost().unwrap();
            assert!(e.lb <= opt && opt <= cost && eps.admits(cost, e.lb));
            let (b, _) = bcbs_solve(&i, eps, Bound::ONE, &Deadline::never(), false);
            let cost = b.cost().unwrap();
            assert!(b.lb <= opt && opt <= cost && eps.admits(cost, b.lb));
        }
    }
}
