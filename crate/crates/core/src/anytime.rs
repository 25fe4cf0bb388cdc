//! Anytime drivers: a decreasing sequence of bounds, each iteration solved by
//! BCBS(ε, 1) or ECBS(ε), either from scratch or by continuing the previous
//! constraint tree.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use thiserror::Error;

use crate::bound::{proven_ratio, Bound};
use crate::conflicts::Solution;
use crate::deadline::Deadline;
use crate::highlevel::{ConstraintTree, Mode, SearchOutcome};
use crate::instance::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Anytime BCBS: BCBS(ε, 1) per iteration.
    Abcbs,
    /// Anytime ECBS: ECBS(ε) per iteration.
    Aecbs,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Abcbs => "abcbs",
            Algorithm::Aecbs => "aecbs",
        })
    }
}

/// When to throw the constraint tree away between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RestartPolicy {
    /// `res=1`: every iteration starts from scratch.
    Every,
    /// `res=2`: odd iterations start from scratch, even ones continue.
    Alternate,
    /// `res=never`: the first tree is kept for the whole run.
    Never,
}

impl RestartPolicy {
    /// Whether 1-based iteration `i` continues the previous tree.
    pub fn reuses(&self, iteration: u32) -> bool {
        match self {
            RestartPolicy::Every => false,
            RestartPolicy::Alternate => iteration.is_multiple_of(2),
            RestartPolicy::Never => iteration > 1,
        }
    }
}

impl fmt::Display for RestartPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RestartPolicy::Every => "1",
            RestartPolicy::Alternate => "2",
            RestartPolicy::Never => "never",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown restart policy {0:?} (expected 1, 2 or never)")]
    RestartPolicy(String),
    #[error("restarting Anytime ECBS on every iteration requires cic=true")]
    NaiveWithoutCic,
}

impl FromStr for RestartPolicy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1" => Ok(RestartPolicy::Every),
            "2" => Ok(RestartPolicy::Alternate),
            "never" => Ok(RestartPolicy::Never),
            other => Err(ConfigError::RestartPolicy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnytimeConfig {
    pub algorithm: Algorithm,
    pub eps0: Bound,
    pub res: RestartPolicy,
    /// Cut irrelevant constraints during tree repair (Anytime ECBS only).
    pub cic: bool,
    pub budget: Duration,
}

impl AnytimeConfig {
    /// Defaults: `ε₀ = 10`, 90 s, CIC on; ABCBS never restarts, AECBS
    /// restarts every iteration.
    pub fn new(algorithm: Algorithm) -> Self {
        AnytimeConfig {
            algorithm,
            eps0: Bound::integer(10).unwrap(),
            res: match algorithm {
                Algorithm::Abcbs => RestartPolicy::Never,
                Algorithm::Aecbs => RestartPolicy::Every,
            },
            cic: true,
            budget: Duration::from_secs(90),
        }
    }

    pub fn with_eps0(mut self, eps0: Bound) -> Self {
        self.eps0 = eps0;
        self
    }

    pub fn with_res(mut self, res: RestartPolicy) -> Self {
        self.res = res;
        self
    }

    pub fn with_cic(mut self, cic: bool) -> Self {
        self.cic = cic;
        self
    }

    pub fn with_budget(mut self, budget: Duration) -> Self {
        self.budget = budget;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.algorithm == Algorithm::Aecbs && self.res == RestartPolicy::Every && !self.cic {
            return Err(ConfigError::NaiveWithoutCic);
        }
        Ok(())
    }

    /// Compact parameter string, e.g. `eps0=10;res=never;cic=true`.
    pub fn params(&self) -> String {
        match self.algorithm {
            Algorithm::Abcbs => format!("eps0={};res={}", self.eps0, self.res),
            Algorithm::Aecbs => format!("eps0={};res={};cic={}", self.eps0, self.res, self.cic),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NextEpsilon {
    Bound(Bound),
    ProvenOptimal,
}

/// The next bound, chosen so that a solution of cost `cost` no longer meets
/// it: `max(1, (cost - 1) / lb)`. Because costs are integers, exactly the
/// strictly cheaper solutions satisfy `cost' ≤ ε'·lb`.
///
/// Panics if `cost < lb`, which would mean an unsound lower bound upstream.
pub fn next_epsilon(cost: u64, lb: u64) -> NextEpsilon {
    assert!(cost >= lb, "lower bound {lb} exceeds solution cost {cost}");
    if cost <= lb {
        return NextEpsilon::ProvenOptimal;
    }
    NextEpsilon::Bound(Bound::new(cost - 1, lb).unwrap_or(Bound::ONE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FinalStatus {
    OptimalProven,
    BudgetExhausted,
    NoSolution,
}

impl fmt::Display for FinalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FinalStatus::OptimalProven => "optimal-proven",
            FinalStatus::BudgetExhausted => "budget-exhausted",
            FinalStatus::NoSolution => "no-solution",
        })
    }
}

/// One improvement of the proven bound `cost / lb`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncumbentEvent {
    pub iteration: u32,
    pub elapsed: Duration,
    /// The bound the iteration searched under.
    pub epsilon: Bound,
    pub cost: u64,
    pub lb: u64,
    pub hl_expansions: u64,
    pub ll_expansions: u64,
}

impl IncumbentEvent {
    /// Proven suboptimality of the incumbent at this moment.
    pub fn bound(&self) -> Ratio<u64> {
        proven_ratio(self.cost, self.lb)
    }

    pub fn bound_f64(&self) -> f64 {
        let r = self.bound();
        *r.numer() as f64 / *r.denom() as f64
    }
}

#[derive(Debug, Clone)]
pub struct IncumbentLog {
    pub events: Vec<IncumbentEvent>,
    pub final_status: FinalStatus,
    pub best: Option<Solution>,
    pub iterations: u32,
    pub elapsed: Duration,
}

/// Receives incumbents in order, then exactly one terminal notification.
pub trait EventSink {
    fn on_incumbent(&mut self, event: &IncumbentEvent, solution: &Solution);

    fn on_finish(&mut self, _status: FinalStatus) {}
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl EventSink for NullSink {
    fn on_incumbent(&mut self, _: &IncumbentEvent, _: &Solution) {}
}

/// Keeps every event together with its solution.
#[derive(Debug, Default, Clone)]
pub struct CollectSink {
    pub events: Vec<(IncumbentEvent, Solution)>,
    pub finished: Option<FinalStatus>,
}

impl EventSink for CollectSink {
    fn on_incumbent(&mut self, event: &IncumbentEvent, solution: &Solution) {
        self.events.push((event.clone(), solution.clone()));
    }

    fn on_finish(&mut self, status: FinalStatus) {
        self.finished = Some(status);
    }
}

pub fn anytime_bcbs(instance: &Instance, cfg: &AnytimeConfig, sink: &mut dyn EventSink) -> IncumbentLog {
    assert_eq!(cfg.algorithm, Algorithm::Abcbs);
    run_anytime(instance, cfg, &Deadline::after(cfg.budget), sink)
}

pub fn anytime_ecbs(instance: &Instance, cfg: &AnytimeConfig, sink: &mut dyn EventSink) -> IncumbentLog {
    assert_eq!(cfg.algorithm, Algorithm::Aecbs);
    run_anytime(instance, cfg, &Deadline::after(cfg.budget), sink)
}

/// The anytime loop under an explicit deadline (which may carry a stop flag),
/// for either algorithm.
pub fn run_anytime(
    instance: &Instance,
    cfg: &AnytimeConfig,
    deadline: &Deadline,
    sink: &mut dyn EventSink,
) -> IncumbentLog {
    let started = Instant::now();
    let mut eps = cfg.eps0;
    let mut lb_global = 0u64;
    let mut incumbent: Option<Solution> = None;
    let mut last_bound: Option<Ratio<u64>> = None;
    let mut events = Vec::new();
    let mut tree: Option<ConstraintTree> = None;
    let (mut hl_base, mut ll_base) = (0u64, 0u64);
    let mut iteration = 0u32;

    let status = loop {
        iteration += 1;
        let reuse = cfg.res.reuses(iteration) && tree.is_some();
        if reuse {
            let t = tree.as_mut().unwrap();
            match cfg.algorithm {
                Algorithm::Abcbs => t.set_bound(eps),
                Algorithm::Aecbs => {
                    if t.repair(instance, eps, cfg.cic, deadline).is_err() {
                        break FinalStatus::BudgetExhausted;
                    }
                }
            }
        } else {
            if let Some(old) = tree.take() {
                hl_base += old.hl_expanded();
                ll_base += old.ll_expanded();
            }
            let (mode, retain) = match cfg.algorithm {
                Algorithm::Abcbs => (
                    Mode::Bcbs {
                        eps_high: eps,
                        eps_low: Bound::ONE,
                    },
                    false,
                ),
                Algorithm::Aecbs => (Mode::Ecbs { eps }, cfg.res.reuses(iteration + 1)),
            };
            tree = Some(ConstraintTree::new(mode, retain));
        }
        let t = tree.as_mut().unwrap();
        t.set_lb_floor(lb_global);
        let outcome = t.search(instance, deadline);
        let (hl, ll) = (hl_base + t.hl_expanded(), ll_base + t.ll_expanded());
        let (cost, lb_run) = match outcome {
            SearchOutcome::Solved { node, lb } => {
                let n = t.node(node);
                if incumbent.as_ref().is_none_or(|s| n.cost < s.soc()) {
                    incumbent = Some(n.solution());
                }
                (incumbent.as_ref().unwrap().soc(), lb)
            }
            SearchOutcome::Exhausted => match &incumbent {
                // Every remaining branch has been closed: the incumbent is optimal.
                Some(s) => (s.soc(), s.soc()),
                None => break FinalStatus::NoSolution,
            },
            SearchOutcome::Timeout => {
                break if incumbent.is_some() {
                    FinalStatus::BudgetExhausted
                } else {
                    FinalStatus::NoSolution
                };
            }
        };
        lb_global = lb_global.max(lb_run.min(cost));
        let bound = proven_ratio(cost, lb_global);
        if last_bound.is_none_or(|b| bound < b) {
            last_bound = Some(bound);
            let ev = IncumbentEvent {
                iteration,
                elapsed: started.elapsed(),
                epsilon: eps,
                cost,
                lb: lb_global,
                hl_expansions: hl,
                ll_expansions: ll,
            };
            sink.on_incumbent(&ev, incumbent.as_ref().unwrap());
            events.push(ev);
        }
        match next_epsilon(cost, lb_global) {
            NextEpsilon::ProvenOptimal => break FinalStatus::OptimalProven,
            NextEpsilon::Bound(b) => eps = b,
        }
    };
    sink.on_finish(status);
    IncumbentLog {
        events,
        final_status: status,
        best: incumbent,
        iterations: iteration,
        elapsed: started.elapsed(),
    }
}
