use std::time::Duration;

use anyhow::{anyhow, Result};
use mapf_core::anytime::{run_anytime, EventSink, IncumbentEvent};
use mapf_core::highlevel::{bcbs_solve, cbs_solve, ecbs_solve, SolveResult, SolveStatus};
use mapf_core::report::{EventRecord, RunMeta, RunRecord, RunStatus};
use mapf_core::validate::validate_solution;
use mapf_core::{Bound, Deadline, Instance, Solution};

use crate::args::Solver;

pub struct RunOutput {
    pub record: RunRecord,
    pub best: Option<Solution>,
}

/// Called with each incumbent after it passed validation.
pub type OnEvent<'a> = &'a mut dyn FnMut(&EventRecord, &Solution) -> Result<()>;

struct CheckedSink<'a, 'b> {
    instance: &'a Instance,
    on_event: OnEvent<'b>,
    events: Vec<EventRecord>,
    error: Option<anyhow::Error>,
}

impl CheckedSink<'_, '_> {
    fn accept(&mut self, ev: &IncumbentEvent, solution: &Solution) {
        if self.error.is_some() {
            return;
        }
        let report = validate_solution(self.instance, solution, None);
        if !report.valid {
            let list: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            self.error = Some(anyhow!(
                "solver produced an invalid incumbent (iteration {}): {}",
                ev.iteration,
                list.join("; ")
            ));
            return;
        }
        let rec = EventRecord::from(ev);
        if let Err(e) = (self.on_event)(&rec, solution) {
            self.error = Some(e);
            return;
        }
        self.events.push(rec);
    }
}

impl EventSink for CheckedSink<'_, '_> {
    fn on_incumbent(&mut self, event: &IncumbentEvent, solution: &Solution) {
        self.accept(event, solution);
    }
}

/// Runs `solver` on `instance` within `budget`; the clock starts here.
pub fn run_instance(
    instance: &Instance,
    solver: &Solver,
    budget: Duration,
    meta: RunMeta,
    on_event: OnEvent<'_>,
) -> Result<RunOutput> {
    let deadline = Deadline::after(budget);
    let mut sink = CheckedSink {
        instance,
        on_event,
        events: Vec::new(),
        error: None,
    };
    let (status, best, wall) = match solver {
        Solver::Anytime(cfg) => {
            let log = run_anytime(instance, cfg, &deadline, &mut sink);
            let mut status = RunStatus::from(log.final_status);
            if status == RunStatus::NoSolution && deadline.expired() {
                status = RunStatus::Timeout;
            }
            (status, log.best, log.elapsed)
        }
        Solver::Cbs => one_shot(cbs_solve(instance, &deadline), Bound::ONE, &mut sink),
        Solver::Bcbs { eps_high, eps_low } => {
            let (res, _) = bcbs_solve(instance, *eps_high, *eps_low, &deadline, false);
            one_shot(res, *eps_high, &mut sink)
        }
        Solver::Ecbs { eps } => {
            let (res, _) = ecbs_solve(instance, *eps, &deadline, false);
            one_shot(res, *eps, &mut sink)
        }
    };
    if let Some(e) = sink.error {
        return Err(e);
    }
    Ok(RunOutput {
        record: RunRecord {
            meta,
            events: sink.events,
            final_status: status,
            wall_ms: wall.as_secs_f64() * 1000.0,
        },
        best,
    })
}

fn one_shot(res: SolveResult, eps: Bound, sink: &mut CheckedSink<'_, '_>) -> (RunStatus, Option<Solution>, Duration) {
    let status = match res.status {
        SolveStatus::Solved => RunStatus::Solved,
        SolveStatus::Timeout => RunStatus::Timeout,
        SolveStatus::Infeasible => RunStatus::NoSolution,
    };
    if let Some(sol) = &res.solution {
        let ev = IncumbentEvent {
            iteration: 1,
            elapsed: res.elapsed,
            epsilon: eps,
            cost: sol.soc(),
            lb: res.lb,
            hl_expansions: res.hl_expanded,
            ll_expansions: res.ll_expanded,
        };
        sink.accept(&ev, sol);
    }
    (status, res.solution, res.elapsed)
}

/// Process exit code for a finished run.
pub fn exit_code(status: RunStatus) -> u8 {
    match status {
        RunStatus::OptimalProven | RunStatus::BudgetExhausted | RunStatus::Solved | RunStatus::Skipped => 0,
        RunStatus::Timeout => crate::EXIT_TIMEOUT,
        RunStatus::NoSolution => crate::EXIT_NO_SOLUTION,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(RunStatus::OptimalProven), 0);
        assert_eq!(exit_code(RunStatus::BudgetExhausted), 0);
        assert_eq!(exit_code(RunStatus::Solved), 0);
        assert_eq!(exit_code(RunStatus::Timeout), 2);
        assert_eq!(exit_code(RunStatus::NoSolution), 3);
    }
}
