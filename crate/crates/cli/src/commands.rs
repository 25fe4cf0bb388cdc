use std::cmp::Ordering;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::mpsc;
use std::thread;

use anyhow::{Context, Result};
use mapf_core::report::{
    aggregate_curves, default_sample_times, read_events_from_path, render_svg, write_curves_csv, EventLogWriter,
    EventRecord, RunMeta, RunRecord, RunStatus,
};
use mapf_core::validate::validate_plans;
use mapf_core::{build_instance, GridMap, Scenario, Solution};

use crate::args::{BenchArgs, PlotArgs, SolveArgs, Solver, ValidateArgs};
use crate::run::{exit_code, run_instance};
use crate::solution_file::{format_solution, parse_solution};
use crate::{Failure, EXIT_INVALID};

fn data(e: anyhow::Error) -> Failure {
    Failure::Data(e)
}

fn load_map(path: &Path) -> Result<GridMap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading map {}", path.display()))?;
    GridMap::parse(&text).with_context(|| format!("parsing map {}", path.display()))
}

fn load_scen(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    Scenario::parse(&text).with_context(|| format!("parsing scenario {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Trailing number of a file stem, as in `empty-8-8-even-7`; 0 if none.
fn scen_number(path: &Path) -> usize {
    let s = stem(path);
    let digits: String = s.chars().rev().take_while(char::is_ascii_digit).collect();
    digits.chars().rev().collect::<String>().parse().unwrap_or(0)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn meta_for(map: &Path, scen: &Path, scen_index: usize, k: usize, solver: &Solver) -> RunMeta {
    let algo = solver.algo_name();
    let params = solver.params();
    RunMeta {
        run_id: format!("{}/{}/k{k}/{algo}/{params}", stem(map), stem(scen)),
        map: stem(map),
        scen: scen_index,
        agents: k,
        algo,
        params,
    }
}

fn print_event(rec: &EventRecord) {
    println!(
        "incumbent iteration={} t_ms={:.3} cost={} lb={} bound={:.6}",
        rec.iteration, rec.t_ms, rec.cost, rec.lb, rec.epsilon_bound
    );
}

pub fn solve(args: SolveArgs) -> Result<u8, Failure> {
    let solver = args.solver.solver().map_err(Failure::Usage)?;
    let budget = args.solver.budget().map_err(Failure::Usage)?;
    let map = load_map(&args.map).map_err(data)?;
    let scen = load_scen(&args.scen).map_err(data)?;
    let instance = build_instance(map, &scen, args.agents)
        .with_context(|| format!("building instance from {}", args.scen.display()))
        .map_err(data)?;
    let meta = meta_for(&args.map, &args.scen, scen_number(&args.scen), args.agents, &solver);

    let mut log = match &args.log {
        Some(p) => Some((EventLogWriter::new(create(p).map_err(Failure::Internal)?), p.clone())),
        None => None,
    };
    let mut on_event = |rec: &EventRecord, _: &Solution| -> Result<()> {
        print_event(rec);
        if let Some((w, path)) = log.as_mut() {
            w.event(&meta, rec)
                .and_then(|_| w.flush())
                .with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    };
    let out = run_instance(&instance, &solver, budget, meta.clone(), &mut on_event).map_err(Failure::Internal)?;
    let rec = &out.record;
    if let Some((mut w, path)) = log {
        w.terminal(&rec.meta, rec.final_status, rec.wall_ms)
            .and_then(|_| w.flush())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Internal)?;
    }
    if let (Some(path), Some(best)) = (&args.solution, &out.best) {
        let mut w = create(path).map_err(Failure::Internal)?;
        w.write_all(format_solution(best).as_bytes())
            .and_then(|_| w.flush())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Internal)?;
    }
    println!("status: {}", rec.final_status);
    if let Some(last) = rec.events.last() {
        println!("cost: {}", last.cost);
        println!("lb: {}", last.lb);
        println!("bound: {:.6}", last.epsilon_bound);
    }
    println!("wall_ms: {:.3}", rec.wall_ms);
    Ok(exit_code(rec.final_status))
}

/// Orders names so that embedded numbers compare by value: `x-2` < `x-10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let na = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let nb = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (da, db) = (trim_zeros(&a[..na]), trim_zeros(&b[..nb]));
                let ord = da.len().cmp(&db.len()).then_with(|| da.cmp(db)).then(na.cmp(&nb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[na..];
                b = &b[nb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let n = d.iter().take_while(|&&c| c == b'0').count();
    &d[n.min(d.len().saturating_sub(1))..]
}

fn scenario_files(dir: &Path, map_stem: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading scenario directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "scen") && stem(p).starts_with(map_stem))
        .collect();
    files.sort_by(|a, b| natural_cmp(&stem(a), &stem(b)));
    Ok(files)
}

struct Job {
    scen_path: PathBuf,
    scen_index: usize,
    scen: Option<Scenario>,
    k: usize,
}

pub fn bench(args: BenchArgs) -> Result<u8, Failure> {
    let solver = args.solver.solver().map_err(Failure::Usage)?;
    let budget = args.solver.budget().map_err(Failure::Usage)?;
    if args.agents_step == 0 || args.agents_min == 0 || args.agents_max < args.agents_min {
        return Err(Failure::Usage(
            "agent range needs 1 <= --agents-min <= --agents-max and --agents-step >= 1".into(),
        ));
    }
    if args.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let map = load_map(&args.map).map_err(data)?;
    let map_stem = stem(&args.map);
    let mut files = scenario_files(&args.scen_dir, &map_stem).map_err(data)?;
    if files.is_empty() {
        return Err(data(anyhow::anyhow!(
            "no .scen files for map {map_stem} in {}",
            args.scen_dir.display()
        )));
    }
    let numbered: Vec<(usize, PathBuf)> = files.drain(..).enumerate().map(|(i, p)| (i + 1, p)).collect();
    let selected: Vec<(usize, PathBuf)> = match args.scenarios {
        Some((lo, hi)) => numbered.into_iter().filter(|(i, _)| (lo..=hi).contains(i)).collect(),
        None => numbered,
    };

    let ks: Vec<usize> = (args.agents_min..=args.agents_max).step_by(args.agents_step).collect();
    let mut jobs = Vec::new();
    for (idx, path) in &selected {
        let scen = match load_scen(path) {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("warning: {e:#}; its runs are skipped");
                None
            }
        };
        for &k in &ks {
            jobs.push(Job {
                scen_path: path.clone(),
                scen_index: *idx,
                scen: scen.clone(),
                k,
            });
        }
    }

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .map_err(Failure::Internal)?;
    let log_path = args.out_dir.join("events.jsonl");
    let mut log = EventLogWriter::new(create(&log_path).map_err(Failure::Internal)?);

    let run_job = |job: &Job| -> Result<RunRecord> {
        let meta = meta_for(&args.map, &job.scen_path, job.scen_index, job.k, &solver);
        let Some(scen) = &job.scen else {
            return Ok(RunRecord::skipped(meta));
        };
        let instance = match build_instance(map.clone(), scen, job.k) {
            Ok(i) => i,
            Err(e) => {
                eprintln!("skipping {}: {e}", meta.run_id);
                return Ok(RunRecord::skipped(meta));
            }
        };
        Ok(run_instance(&instance, &solver, budget, meta, &mut |_, _| Ok(()))?.record)
    };

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<RunRecord>)>();
    let mut records: Vec<Option<RunRecord>> = vec![None; jobs.len()];
    let outcome: Result<(), Failure> = thread::scope(|scope| {
        for _ in 0..args.jobs.min(jobs.len().max(1)) {
            let tx = tx.clone();
            let (jobs, next, run_job) = (&jobs, &next, &run_job);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                if tx.send((i, run_job(&jobs[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Records are written in sweep order regardless of completion order.
        let mut written = 0;
        for (i, res) in rx {
            let rec = res.map_err(Failure::Internal)?;
            println!(
                "{} {} {}",
                rec.meta.run_id,
                rec.final_status,
                rec.events.last().map_or("-".to_string(), |e| e.cost.to_string())
            );
            records[i] = Some(rec);
            while let Some(Some(rec)) = records.get(written) {
                log.record(rec)
                    .and_then(|_| log.flush())
                    .with_context(|| format!("writing {}", log_path.display()))
                    .map_err(Failure::Internal)?;
                written += 1;
            }
        }
        Ok(())
    });
    outcome?;

    let records: Vec<RunRecord> = records.into_iter().flatten().collect();
    let samples = default_sample_times(budget.as_secs_f64() * 1000.0);
    let curves = aggregate_curves(&records, &samples).map_err(|e| Failure::Internal(e.into()))?;
    let csv_path = args.out_dir.join("curves.csv");
    write_csv(&csv_path, &curves)?;
    if args.svg {
        write_svg(&args.out_dir.join("curves.svg"), &curves)?;
    }
    let count = |s: RunStatus| records.iter().filter(|r| r.final_status == s).count();
    println!(
        "runs: {} solved: {} timeout: {} no-solution: {} skipped: {}",
        records.len(),
        records.iter().filter(|r| !r.events.is_empty()).count(),
        count(RunStatus::Timeout),
        count(RunStatus::NoSolution),
        count(RunStatus::Skipped)
    );
    for c in curves.iter().filter(|c| c.is_empty()) {
        println!("empty curve: {} k={} {}", c.key.map, c.key.agents, c.label());
    }
    Ok(0)
}

fn write_csv(path: &Path, curves: &[mapf_core::report::Curve]) -> Result<(), Failure> {
    let w = create(path).map_err(Failure::Internal)?;
    write_curves_csv(w, curves)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Internal)
}

fn write_svg(path: &Path, curves: &[mapf_core::report::Curve]) -> Result<(), Failure> {
    let svg = render_svg(curves, "time since first solution, ms", "proven bound");
    let mut w = create(path).map_err(Failure::Internal)?;
    w.write_all(svg.as_bytes())
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Internal)
}

pub fn validate(args: ValidateArgs) -> Result<u8, Failure> {
    let map = load_map(&args.map).map_err(data)?;
    let scen = load_scen(&args.scen).map_err(data)?;
    let text = fs::read_to_string(&args.solution)
        .with_context(|| format!("reading solution {}", args.solution.display()))
        .map_err(data)?;
    let plans = parse_solution(&text)
        .with_context(|| format!("parsing {}", args.solution.display()))
        .map_err(data)?;
    let instance = build_instance(map, &scen, plans.len())
        .with_context(|| format!("building instance from {}", args.scen.display()))
        .map_err(data)?;
    let report = validate_plans(&instance, &plans, None, None);
    println!("{}", if report.valid { "valid" } else { "invalid" });
    for v in &report.violations {
        println!("{v}");
    }
    println!("soc: {}", report.recomputed_soc);
    Ok(if report.valid { 0 } else { EXIT_INVALID })
}

pub fn plot(args: PlotArgs) -> Result<u8, Failure> {
    if !(args.time_limit.is_finite() && args.time_limit > 0.0) {
        return Err(Failure::Usage("--time-limit must be positive".into()));
    }
    let records = read_events_from_path(&args.log)
        .with_context(|| format!("reading {}", args.log.display()))
        .map_err(data)?;
    let samples = default_sample_times(args.time_limit * 1000.0);
    let curves = aggregate_curves(&records, &samples).map_err(|e| Failure::Internal(e.into()))?;
    write_csv(&args.csv, &curves)?;
    if let Some(p) = &args.svg {
        write_svg(p, &curves)?;
    }
    if curves.is_empty() {
        println!("empty log: no curves");
    }
    for c in &curves {
        println!(
            "curve: {} k={} {} scenarios={}/{}{}",
            c.key.map,
            c.key.agents,
            c.label(),
            c.n_scenarios,
            c.n_runs,
            if c.is_empty() { " (empty)" } else { "" }
        );
    }
    Ok(0)
}
