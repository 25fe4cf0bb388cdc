//! Run logs, aggregation into ε-over-relative-time curves, CSV and SVG output.
//!
//! The log is line-delimited JSON. Every incumbent is one `event` line and
//! each run ends with one `terminal` line.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anytime::{FinalStatus, IncumbentEvent, IncumbentLog};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: run {run_id} was already terminated")]
    AfterTerminal { line: usize, run_id: String },
    #[error("run {0} has no terminal record")]
    Unterminated(String),
    #[error("sample times must be nondecreasing")]
    UnsortedSamples,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ReportError {
    fn io(path: &FsPath, source: io::Error) -> Self {
        ReportError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// How a run ended. The first three come from anytime runs; `Solved` and
/// `Timeout` from one-shot solvers; `Skipped` marks runs never started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    OptimalProven,
    BudgetExhausted,
    NoSolution,
    Solved,
    Timeout,
    Skipped,
}

impl From<FinalStatus> for RunStatus {
    fn from(s: FinalStatus) -> Self {
        match s {
            FinalStatus::OptimalProven => RunStatus::OptimalProven,
            FinalStatus::BudgetExhausted => RunStatus::BudgetExhausted,
            FinalStatus::NoSolution => RunStatus::NoSolution,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::OptimalProven => "optimal-proven",
            RunStatus::BudgetExhausted => "budget-exhausted",
            RunStatus::NoSolution => "no-solution",
            RunStatus::Solved => "solved",
            RunStatus::Timeout => "timeout",
            RunStatus::Skipped => "skipped",
        })
    }
}

/// Identifies one run within a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub map: String,
    pub scen: usize,
    pub agents: usize,
    pub algo: String,
    pub params: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub iteration: u32,
    /// Milliseconds since solver start.
    pub t_ms: f64,
    pub epsilon_bound: f64,
    pub cost: u64,
    pub lb: u64,
    pub hl_expansions: u64,
    pub ll_expansions: u64,
}

impl From<&IncumbentEvent> for EventRecord {
    fn from(ev: &IncumbentEvent) -> Self {
        EventRecord {
            iteration: ev.iteration,
            t_ms: ev.elapsed.as_secs_f64() * 1000.0,
            epsilon_bound: ev.bound_f64(),
            cost: ev.cost,
            lb: ev.lb,
            hl_expansions: ev.hl_expansions,
            ll_expansions: ev.ll_expansions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub events: Vec<EventRecord>,
    pub final_status: RunStatus,
    pub wall_ms: f64,
}

impl RunRecord {
    pub fn from_log(meta: RunMeta, log: &IncumbentLog) -> Self {
        RunRecord {
            meta,
            events: log.events.iter().map(EventRecord::from).collect(),
            final_status: log.final_status.into(),
            wall_ms: log.elapsed.as_secs_f64() * 1000.0,
        }
    }

    pub fn skipped(meta: RunMeta) -> Self {
        RunRecord {
            meta,
            events: Vec::new(),
            final_status: RunStatus::Skipped,
            wall_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EventLine {
    run_id: String,
    map: String,
    scen: usize,
    agents: usize,
    algo: String,
    params: String,
    iteration: u32,
    t_ms: f64,
    epsilon_bound: f64,
    cost: u64,
    lb: u64,
    hl_expansions: u64,
    ll_expansions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TerminalLine {
    run_id: String,
    map: String,
    scen: usize,
    agents: usize,
    algo: String,
    params: String,
    final_status: RunStatus,
    wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum LogLine {
    Event(EventLine),
    Terminal(TerminalLine),
}

impl LogLine {
    fn meta(&self) -> RunMeta {
        let (run_id, map, scen, agents, algo, params) = match self {
            LogLine::Event(e) => (&e.run_id, &e.map, e.scen, e.agents, &e.algo, &e.params),
            LogLine::Terminal(e) => (&e.run_id, &e.map, e.scen, e.agents, &e.algo, &e.params),
        };
        RunMeta {
            run_id: run_id.clone(),
            map: map.clone(),
            scen,
            agents,
            algo: algo.clone(),
            params: params.clone(),
        }
    }
}

/// Streams log lines to `W`, one JSON object per line.
pub struct EventLogWriter<W: Write> {
    out: W,
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(out: W) -> Self {
        EventLogWriter { out }
    }

    pub fn event(&mut self, meta: &RunMeta, ev: &EventRecord) -> io::Result<()> {
        self.line(&LogLine::Event(EventLine {
            run_id: meta.run_id.clone(),
            map: meta.map.clone(),
            scen: meta.scen,
            agents: meta.agents,
            algo: meta.algo.clone(),
            params: meta.params.clone(),
            iteration: ev.iteration,
            t_ms: ev.t_ms,
            epsilon_bound: ev.epsilon_bound,
            cost: ev.cost,
            lb: ev.lb,
            hl_expansions: ev.hl_expansions,
            ll_expansions: ev.ll_expansions,
        }))
    }

    pub fn terminal(&mut self, meta: &RunMeta, status: RunStatus, wall_ms: f64) -> io::Result<()> {
        self.line(&LogLine::Terminal(TerminalLine {
            run_id: meta.run_id.clone(),
            map: meta.map.clone(),
            scen: meta.scen,
            agents: meta.agents,
            algo: meta.algo.clone(),
            params: meta.params.clone(),
            final_status: status,
            wall_ms,
        }))
    }

    pub fn record(&mut self, rec: &RunRecord) -> io::Result<()> {
        for ev in &rec.events {
            self.event(&rec.meta, ev)?;
        }
        self.terminal(&rec.meta, rec.final_status, rec.wall_ms)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn line(&mut self, line: &LogLine) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, line)?;
        self.out.write_all(b"\n")
    }
}

pub fn write_events<W: Write>(out: W, records: &[RunRecord]) -> io::Result<()> {
    let mut w = EventLogWriter::new(out);
    for r in records {
        w.record(r)?;
    }
    w.flush()
}

pub fn write_events_to_path(path: &FsPath, records: &[RunRecord]) -> Result<(), ReportError> {
    let file = File::create(path).map_err(|e| ReportError::io(path, e))?;
    write_events(BufWriter::new(file), records).map_err(|e| ReportError::io(path, e))
}

/// Parses a log back into records, in order of each run's first line.
/// Blank lines are ignored.
pub fn read_events<R: BufRead>(input: R) -> Result<Vec<RunRecord>, ReportError> {
    let mut records: Vec<RunRecord> = Vec::new();
    let mut open: BTreeMap<String, usize> = BTreeMap::new();
    let mut closed: BTreeMap<String, ()> = BTreeMap::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| ReportError::Parse {
            line: line_no,
            source: serde_json::Error::io(e),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&text).map_err(|e| ReportError::Parse {
            line: line_no,
            source: e,
        })?;
        let meta = parsed.meta();
        if closed.contains_key(&meta.run_id) {
            return Err(ReportError::AfterTerminal {
                line: line_no,
                run_id: meta.run_id,
            });
        }
        let idx = *open.entry(meta.run_id.clone()).or_insert_with(|| {
            records.push(RunRecord {
                meta: meta.clone(),
                events: Vec::new(),
                final_status: RunStatus::NoSolution,
                wall_ms: 0.0,
            });
            records.len() - 1
        });
        match parsed {
            LogLine::Event(e) => records[idx].events.push(EventRecord {
                iteration: e.iteration,
                t_ms: e.t_ms,
                epsilon_bound: e.epsilon_bound,
                cost: e.cost,
                lb: e.lb,
                hl_expansions: e.hl_expansions,
                ll_expansions: e.ll_expansions,
            }),
            LogLine::Terminal(t) => {
                records[idx].final_status = t.final_status;
                records[idx].wall_ms = t.wall_ms;
                open.remove(&t.run_id);
                closed.insert(t.run_id, ());
            }
        }
    }
    if let Some(run_id) = open.into_keys().next() {
        return Err(ReportError::Unterminated(run_id));
    }
    Ok(records)
}

pub fn read_events_from_path(path: &FsPath) -> Result<Vec<RunRecord>, ReportError> {
    let file = File::open(path).map_err(|e| ReportError::io(path, e))?;
    read_events(io::BufReader::new(file))
}

/// Runs sharing a curve: same map, agent count and algorithm configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CurveKey {
    pub map: String,
    pub agents: usize,
    pub algo: String,
    pub params: String,
}

impl CurveKey {
    fn of(meta: &RunMeta) -> Self {
        CurveKey {
            map: meta.map.clone(),
            agents: meta.agents,
            algo: meta.algo.clone(),
            params: meta.params.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Milliseconds since the scenario's first solution.
    pub t_rel_ms: f64,
    pub mean_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub key: CurveKey,
    pub points: Vec<CurvePoint>,
    /// Scenarios with at least one solution.
    pub n_scenarios: usize,
    /// All runs in the group, qualifying or not.
    pub n_runs: usize,
}

impl Curve {
    /// No run in the group found a solution.
    pub fn is_empty(&self) -> bool {
        self.n_scenarios == 0
    }

    pub fn label(&self) -> String {
        if self.key.params.is_empty() {
            self.key.algo.clone()
        } else {
            format!("{} {}", self.key.algo, self.key.params)
        }
    }
}

/// Mean best-so-far bound at each sample time, with each scenario's clock
/// starting at its first solution. Runs without a solution only count
/// towards `n_runs`. Curves come out sorted by key.
pub fn aggregate_curves(records: &[RunRecord], sample_times: &[f64]) -> Result<Vec<Curve>, ReportError> {
    if sample_times.windows(2).any(|w| w[0] > w[1]) {
        return Err(ReportError::UnsortedSamples);
    }
    let mut groups: BTreeMap<CurveKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(CurveKey::of(&r.meta)).or_default().push(r);
    }
    let mut curves = Vec::with_capacity(groups.len());
    for (key, runs) in groups {
        let qualifying: Vec<&RunRecord> = runs.iter().copied().filter(|r| !r.events.is_empty()).collect();
        let mut points = Vec::new();
        if !qualifying.is_empty() {
            let mut values = Vec::with_capacity(qualifying.len());
            for &s in sample_times {
                values.clear();
                values.extend(qualifying.iter().map(|r| best_bound_at(r, s)));
                // Sorting makes the floating-point sum independent of record order.
                values.sort_by(f64::total_cmp);
                let sum: f64 = values.iter().sum();
                points.push(CurvePoint {
                    t_rel_ms: s,
                    mean_bound: sum / values.len() as f64,
                });
            }
        }
        curves.push(Curve {
            key,
            points,
            n_scenarios: qualifying.len(),
            n_runs: runs.len(),
        });
    }
    Ok(curves)
}

fn best_bound_at(r: &RunRecord, t_rel: f64) -> f64 {
    let t0 = r.events[0].t_ms;
    r.events
        .iter()
        .take_while(|e| e.t_ms - t0 <= t_rel)
        .map(|e| e.epsilon_bound)
        .fold(r.events[0].epsilon_bound, f64::min)
}

/// 100 log-spaced points from 1 ms up to the budget.
pub fn default_sample_times(budget_ms: f64) -> Vec<f64> {
    log_spaced(1.0, budget_ms.max(1.0), 100)
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    map: &'a str,
    agents: usize,
    algo: &'a str,
    params: &'a str,
    t_rel_ms: Option<f64>,
    mean_bound: Option<f64>,
    n_scenarios: usize,
}

/// One row per curve point. An empty curve gets a single row with blank
/// time and bound and `n_scenarios` 0.
pub fn write_curves_csv<W: Write>(out: W, curves: &[Curve]) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["map", "agents", "algo", "params", "t_rel_ms", "mean_bound", "n_scenarios"])?;
    for c in curves {
        let row = |t, b| CsvRow {
            map: &c.key.map,
            agents: c.key.agents,
            algo: &c.key.algo,
            params: &c.key.params,
            t_rel_ms: t,
            mean_bound: b,
            n_scenarios: c.n_scenarios,
        };
        if c.points.is_empty() {
            w.serialize(row(None, None))?;
        }
        for p in &c.points {
            w.serialize(row(Some(p.t_rel_ms), Some(p.mean_bound)))?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Standalone SVG with one step polyline per non-empty curve and a legend.
pub fn render_svg(curves: &[Curve], x_label: &str, y_label: &str) -> String {
    let drawn: Vec<&Curve> = curves.iter().filter(|c| !c.points.is_empty()).collect();
    let x_max = drawn
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.t_rel_ms))
        .fold(0.0, f64::max)
        .max(1.0);
    let y_max = drawn
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.mean_bound))
        .fold(1.0, f64::max);
    let y_min = drawn
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.mean_bound))
        .fold(y_max, f64::min)
        .min(1.0);
    let y_span = if y_max > y_min { y_max - y_min } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + t / x_max * plot_w;
    let sy = |v: f64| TOP + (y_max - v) / y_span * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (LEFT, TOP + plot_h, LEFT + plot_w, TOP);
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = x_max * i as f64 / 4.0;
        let v = y_min + y_span * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            sx(t),
            y0 + 15.0,
            fmt_tick(t)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            sy(v) + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (i, c) in drawn.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        let mut prev: Option<f64> = None;
        for p in &c.points {
            if let Some(v) = prev {
                if v != p.mean_bound {
                    let _ = write!(pts, "{:.2},{:.2} ", sx(p.t_rel_ms), sy(v));
                }
            }
            let _ = write!(pts, "{:.2},{:.2} ", sx(p.t_rel_ms), sy(p.mean_bound));
            prev = Some(p.mean_bound);
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.trim_end()
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            lx + 25.0,
            ly + 4.0,
            escape(&c.label())
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(ch),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(run: &str, scen: usize) -> RunMeta {
        RunMeta {
            run_id: run.into(),
            map: "empty-8-8".into(),
            scen,
            agents: 4,
            algo: "abcbs".into(),
            params: "eps0=10;res=never;cic=true".into(),
        }
    }

    fn ev(iteration: u32, t_ms: f64, bound: f64) -> EventRecord {
        EventRecord {
            iteration,
            t_ms,
            epsilon_bound: bound,
            cost: 10,
            lb: 9,
            hl_expansions: 3,
            ll_expansions: 40,
        }
    }

    fn run(id: &str, scen: usize, events: Vec<EventRecord>) -> RunRecord {
        let status = if events.is_empty() {
            RunStatus::NoSolution
        } else {
            RunStatus::OptimalProven
        };
        RunRecord {
            meta: meta(id, scen),
            events,
            final_status: status,
            wall_ms: 12.5,
        }
    }

    fn to_text(records: &[RunRecord]) -> String {
        let mut buf = Vec::new();
        write_events(&mut buf, records).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn two_incumbents_make_three_lines() {
        let text = to_text(&[run("r1", 0, vec![ev(1, 3.0, 1.5), ev(2, 9.0, 1.0)])]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with(r#"{"type":"event","run_id":"r1","map":"empty-8-8","scen":0,"agents":4,"algo":"abcbs""#));
        assert!(lines[0].contains(r#""iteration":1,"t_ms":3.0,"epsilon_bound":1.5,"cost":10,"lb":9,"hl_expansions":3,"ll_expansions":40}"#));
        assert!(lines[2].starts_with(r#"{"type":"terminal","run_id":"r1""#));
        assert!(lines[2].ends_with(r#""final_status":"optimal-proven","wall_ms":12.5}"#));
    }

    #[test]
    fn no_solution_is_terminal_only() {
        let text = to_text(&[run("r1", 0, vec![])]);
        assert_eq!(text.lines().count(), 1);
        assert!(text.contains(r#""final_status":"no-solution""#));
    }

    #[test]
    fn round_trip_interleaved_log() {
        let records = vec![
            run("a", 0, vec![ev(1, 0.25, 10.0 / 7.0), ev(3, 1e-3, 1.0)]),
            run("b", 1, vec![]),
            RunRecord::skipped(meta("c", 2)),
        ];
        let back = read_events(to_text(&records).as_bytes()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn read_rejects_broken_logs() {
        let text = to_text(&[run("a", 0, vec![ev(1, 1.0, 2.0)])]);
        let first = text.lines().next().unwrap();
        assert!(matches!(
            read_events(first.as_bytes()),
            Err(ReportError::Unterminated(id)) if id == "a"
        ));
        let doubled = format!("{text}{first}\n");
        assert!(matches!(
            read_events(doubled.as_bytes()),
            Err(ReportError::AfterTerminal { line: 3, .. })
        ));
        assert!(matches!(
            read_events("{\"type\":\"event\"}\n".as_bytes()),
            Err(ReportError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn single_scenario_steps_at_event_times() {
        let r = run("a", 0, vec![ev(1, 500.0, 10.0), ev(2, 1500.0, 2.0), ev(3, 5500.0, 1.1)]);
        let samples = [0.0, 999.0, 1000.0, 4999.0, 5000.0, 9000.0];
        let curves = aggregate_curves(&[r], &samples).unwrap();
        assert_eq!(curves.len(), 1);
        let v: Vec<f64> = curves[0].points.iter().map(|p| p.mean_bound).collect();
        assert_eq!(v, vec![10.0, 10.0, 2.0, 2.0, 1.1, 1.1]);
    }

    #[test]
    fn mean_over_qualifying_scenarios() {
        let records = [
            run("a", 0, vec![ev(1, 70.0, 10.0)]),
            run("b", 1, vec![ev(1, 4.0, 2.0)]),
            run("c", 2, vec![]),
        ];
        let curves = aggregate_curves(&records, &[0.0, 10.0, 1e6]).unwrap();
        assert_eq!(curves[0].n_scenarios, 2);
        assert_eq!(curves[0].n_runs, 3);
        assert!(curves[0].points.iter().all(|p| p.mean_bound == 6.0));
    }

    #[test]
    fn empty_group_is_flagged() {
        let curves = aggregate_curves(&[run("a", 0, vec![])], &[1.0]).unwrap();
        assert!(curves[0].is_empty() && curves[0].points.is_empty());
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &curves).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "map,agents,algo,params,t_rel_ms,mean_bound,n_scenarios\n\
             empty-8-8,4,abcbs,eps0=10;res=never;cic=true,,,0\n"
        );
    }

    #[test]
    fn csv_header_without_curves() {
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[]).unwrap();
        assert_eq!(buf, b"map,agents,algo,params,t_rel_ms,mean_bound,n_scenarios\n");
    }

    #[test]
    fn unsorted_samples_rejected() {
        assert!(matches!(
            aggregate_curves(&[], &[2.0, 1.0]),
            Err(ReportError::UnsortedSamples)
        ));
    }

    #[test]
    fn default_samples_are_log_spaced() {
        let s = default_sample_times(90_000.0);
        assert_eq!(s.len(), 100);
        assert!((s[0] - 1.0).abs() < 1e-12);
        assert_eq!(s[99], 90_000.0);
        let r = s[1] / s[0];
        assert!(s.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-9));
    }

    fn curve(algo: &str, values: &[(f64, f64)]) -> Curve {
        Curve {
            key: CurveKey {
                map: "m".into(),
                agents: 2,
                algo: algo.into(),
                params: String::new(),
            },
            points: values
                .iter()
                .map(|&(t, b)| CurvePoint {
                    t_rel_ms: t,
                    mean_bound: b,
                })
                .collect(),
            n_scenarios: 1,
            n_runs: 1,
        }
    }

    #[test]
    fn constant_curve_is_horizontal() {
        let svg = render_svg(&[curve("aecbs", &[(0.0, 3.0), (50.0, 3.0), (100.0, 3.0)])], "t", "eps");
        assert_eq!(svg.matches("<polyline").count(), 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn two_curves_two_legend_entries() {
        let cs = [
            curve("abcbs", &[(0.0, 3.0), (10.0, 2.0)]),
            curve("aecbs", &[(0.0, 2.0), (10.0, 1.0)]),
        ];
        let svg = render_svg(&cs, "relative time, ms", "bound <eps>");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<line ").count(), 2);
        assert!(svg.contains("bound &lt;eps&gt;"));
        assert_eq!(svg, render_svg(&cs, "relative time, ms", "bound <eps>"));
    }

    fn arb_run(i: usize) -> impl Strategy<Value = RunRecord> {
        (
            0usize..3,
            prop::collection::vec((0.0f64..1000.0, 1.0f64..10.0), 0..5),
        )
            .prop_map(move |(group, raw)| {
                let mut t = 0.0;
                let mut b = 12.0;
                let events = raw
                    .into_iter()
                    .enumerate()
                    .map(|(k, (dt, db))| {
                        t += dt;
                        b = (b - db).max(1.0);
                        ev(k as u32 + 1, t, b)
                    })
                    .collect();
                let mut r = run(&format!("r{i}"), i, events);
                r.meta.agents = 2 + group;
                r
            })
    }

    fn arb_runs() -> impl Strategy<Value = Vec<RunRecord>> {
        (1usize..8).prop_flat_map(|n| (0..n).map(arb_run).collect::<Vec<_>>())
    }

    proptest! {
        #[test]
        fn aggregation_is_permutation_invariant(
            runs in arb_runs(),
            seed in any::<u64>(),
        ) {
            let samples = log_spaced(1.0, 5000.0, 30);
            let a = aggregate_curves(&runs, &samples).unwrap();
            let mut shuffled = runs.clone();
            let n = shuffled.len();
            let mut x = seed;
            for i in (1..n).rev() {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (x >> 33) as usize % (i + 1));
            }
            let b = aggregate_curves(&shuffled, &samples).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn curves_never_increase(runs in arb_runs()) {
            let samples = log_spaced(1.0, 5000.0, 30);
            for c in aggregate_curves(&runs, &samples).unwrap() {
                prop_assert!(c.points.windows(2).all(|w| w[1].mean_bound <= w[0].mean_bound));
                prop_assert!(c.points.iter().all(|p| p.t_rel_ms >= 0.0));
            }
        }
    }
}
