use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mapf_core::anytime::{Algorithm, AnytimeConfig, RestartPolicy};
use mapf_core::Bound;

#[derive(Debug, Parser)]
#[command(name = "mapf", version, about = "Multi-agent pathfinding with CBS, bounded-suboptimal and anytime variants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance: the first K agents of a scenario file.
    Solve(SolveArgs),
    /// Sweep scenarios and agent counts, writing an event log and curves.
    Bench(BenchArgs),
    /// Replay a stored solution against its instance.
    Validate(ValidateArgs),
    /// Aggregate an event log into CSV and SVG curves.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Cbs,
    Bcbs,
    Ecbs,
    Abcbs,
    Aecbs,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Cbs => "cbs",
            Algo::Bcbs => "bcbs",
            Algo::Ecbs => "ecbs",
            Algo::Abcbs => "abcbs",
            Algo::Aecbs => "aecbs",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Initial bound of the anytime algorithms.
    #[arg(long, value_parser = parse_bound)]
    pub eps0: Option<Bound>,
    /// Bound for ecbs.
    #[arg(long, value_parser = parse_bound)]
    pub eps: Option<Bound>,
    /// High-level bound for bcbs.
    #[arg(long, value_parser = parse_bound)]
    pub eps_high: Option<Bound>,
    /// Low-level bound for bcbs (default 1).
    #[arg(long, value_parser = parse_bound)]
    pub eps_low: Option<Bound>,
    /// Restart policy of the anytime algorithms: 1, 2 or never.
    #[arg(long, value_parser = parse_res)]
    pub res: Option<RestartPolicy>,
    /// Cut irrelevant constraints when repairing the tree (aecbs only).
    #[arg(long, action = clap::ArgAction::Set)]
    pub cic: Option<bool>,
    /// Seconds per run.
    #[arg(long, default_value_t = 90.0)]
    pub time_limit: f64,
}

fn parse_bound(s: &str) -> Result<Bound, String> {
    s.parse::<Bound>().map_err(|e| e.to_string())
}

fn parse_res(s: &str) -> Result<RestartPolicy, String> {
    s.parse::<RestartPolicy>().map_err(|e| e.to_string())
}

/// A fully checked solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum Solver {
    Cbs,
    Bcbs { eps_high: Bound, eps_low: Bound },
    Ecbs { eps: Bound },
    Anytime(AnytimeConfig),
}

impl Solver {
    pub fn algo_name(&self) -> String {
        match self {
            Solver::Cbs => "cbs".into(),
            Solver::Bcbs { .. } => "bcbs".into(),
            Solver::Ecbs { .. } => "ecbs".into(),
            Solver::Anytime(cfg) => cfg.algorithm.to_string(),
        }
    }

    pub fn params(&self) -> String {
        match self {
            Solver::Cbs => String::new(),
            Solver::Bcbs { eps_high, eps_low } => format!("eps_high={eps_high};eps_low={eps_low}"),
            Solver::Ecbs { eps } => format!("eps={eps}"),
            Solver::Anytime(cfg) => cfg.params(),
        }
    }
}

impl SolverArgs {
    pub fn budget(&self) -> Result<Duration, String> {
        Duration::try_from_secs_f64(self.time_limit)
            .ok()
            .filter(|d| !d.is_zero())
            .ok_or_else(|| format!("--time-limit must be a positive number of seconds, got {}", self.time_limit))
    }

    /// Checks that every flag given applies to the chosen algorithm.
    pub fn solver(&self) -> Result<Solver, String> {
        let algo = self.algo;
        let anytime = matches!(algo, Algo::Abcbs | Algo::Aecbs);
        let reject = |flag: &str, given: bool, allowed: bool| {
            if given && !allowed {
                Err(format!("--{flag} cannot be used with --algo {}", algo.name()))
            } else {
                Ok(())
            }
        };
        reject("eps0", self.eps0.is_some(), anytime)?;
        reject("res", self.res.is_some(), anytime)?;
        reject("cic", self.cic.is_some(), algo == Algo::Aecbs)?;
        reject("eps", self.eps.is_some(), algo == Algo::Ecbs)?;
        reject("eps-high", self.eps_high.is_some(), algo == Algo::Bcbs)?;
        reject("eps-low", self.eps_low.is_some(), algo == Algo::Bcbs)?;
        let budget = self.budget()?;
        Ok(match algo {
            Algo::Cbs => Solver::Cbs,
            Algo::Bcbs => Solver::Bcbs {
                eps_high: self.eps_high.ok_or("--algo bcbs requires --eps-high")?,
                eps_low: self.eps_low.unwrap_or(Bound::ONE),
            },
            Algo::Ecbs => Solver::Ecbs {
                eps: self.eps.ok_or("--algo ecbs requires --eps")?,
            },
            Algo::Abcbs | Algo::Aecbs => {
                let alg = if algo == Algo::Abcbs {
                    Algorithm::Abcbs
                } else {
                    Algorithm::Aecbs
                };
                let mut cfg = AnytimeConfig::new(alg).with_budget(budget);
                if let Some(e) = self.eps0 {
                    cfg = cfg.with_eps0(e);
                }
                if let Some(r) = self.res {
                    cfg = cfg.with_res(r);
                }
                if let Some(c) = self.cic {
                    cfg = cfg.with_cic(c);
                }
                cfg.validate().map_err(|e| e.to_string())?;
                Solver::Anytime(cfg)
            }
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub scen: PathBuf,
    /// Number of agents, taken from the start of the scenario.
    #[arg(long, short = 'k')]
    pub agents: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Event log (JSON lines) to write.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Where to store the best solution found.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub map: PathBuf,
    /// Directory holding the scenario files; only files whose name starts
    /// with the map's name are used.
    #[arg(long, env = "MAPF_BENCH_DIR")]
    pub scen_dir: PathBuf,
    #[arg(long)]
    pub agents_min: usize,
    #[arg(long)]
    pub agents_max: usize,
    #[arg(long, default_value_t = 10)]
    pub agents_step: usize,
    /// 1-based inclusive range of scenario files, e.g. `1-25` or `3`.
    #[arg(long, value_parser = parse_range)]
    pub scenarios: Option<(usize, usize)>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory for `events.jsonl` and `curves.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write `curves.svg`.
    #[arg(long)]
    pub svg: bool,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("expected a range like 1-25, got {s:?}");
    let (a, b) = match s.split_once('-') {
        Some((a, b)) => (a, b),
        None => (s, s),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a, b))
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub scen: PathBuf,
    /// Solution file; its number of agent lines selects the agent count.
    #[arg(long)]
    pub solution: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Upper end of the sampling grid, in seconds.
    #[arg(long, default_value_t = 90.0)]
    pub time_limit: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(extra: &[&str]) -> Result<Solver, String> {
        let mut argv = vec!["mapf", "solve", "--map", "m", "--scen", "s", "-k", "2"];
        argv.extend_from_slice(extra);
        let cli = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
        let Command::Solve(a) = cli.command else { unreachable!() };
        a.solver.solver()
    }

    #[test]
    fn anytime_defaults() {
        let Solver::Anytime(cfg) = solver(&["--algo", "aecbs"]).unwrap() else { panic!() };
        assert_eq!(cfg.params(), "eps0=10;res=1;cic=true");
        assert_eq!(cfg.budget, Duration::from_secs(90));
        let Solver::Anytime(cfg) = solver(&["--algo", "abcbs", "--eps0", "2"]).unwrap() else { panic!() };
        assert_eq!(cfg.params(), "eps0=2;res=never");
    }

    #[test]
    fn incompatible_flags() {
        assert!(solver(&["--algo", "cbs", "--cic", "true"]).is_err());
        assert!(solver(&["--algo", "abcbs", "--cic", "false"]).is_err());
        assert!(solver(&["--algo", "ecbs", "--eps-high", "2", "--eps", "2"]).is_err());
        assert!(solver(&["--algo", "bcbs"]).is_err());
        assert!(solver(&["--algo", "aecbs", "--res", "1", "--cic", "false"]).is_err());
        assert!(solver(&["--algo", "aecbs", "--res", "sometimes"]).is_err());
        assert!(solver(&["--algo", "cbs", "--time-limit", "0"]).is_err());
        assert_eq!(
            solver(&["--algo", "bcbs", "--eps-high", "3/2"]).unwrap(),
            Solver::Bcbs {
                eps_high: Bound::new(3, 2).unwrap(),
                eps_low: Bound::ONE
            }
        );
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1-25"), Ok((1, 25)));
        assert_eq!(parse_range("7"), Ok((7, 7)));
        assert!(parse_range("0-3").is_err());
        assert!(parse_range("5-2").is_err());
    }
}
