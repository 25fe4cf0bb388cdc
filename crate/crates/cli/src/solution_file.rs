//! Plain-text solution files: one line per agent,
//! `agent <i>: (x,y)@0 (x,y)@1 ...`.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use mapf_core::{Cell, Solution};

pub fn format_solution(solution: &Solution) -> String {
    let mut out = String::new();
    for (i, p) in solution.paths().iter().enumerate() {
        let _ = write!(out, "agent {i}:");
        for (t, c) in p.vertices().iter().enumerate() {
            let _ = write!(out, " ({},{})@{t}", c.x, c.y);
        }
        out.push('\n');
    }
    out
}

/// Per-agent cell sequences, indexed by agent. Agents must appear as
/// `0, 1, 2, ...` and times must count up from 0.
pub fn parse_solution(text: &str) -> Result<Vec<Vec<Cell>>> {
    let mut plans = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let plan = parse_line(line, plans.len()).with_context(|| format!("solution line {line_no}"))?;
        plans.push(plan);
    }
    Ok(plans)
}

fn parse_line(line: &str, expected_agent: usize) -> Result<Vec<Cell>> {
    let (head, body) = line.split_once(':').ok_or_else(|| anyhow!("missing ':'"))?;
    let agent: usize = head
        .trim()
        .strip_prefix("agent")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| anyhow!("expected `agent <i>`, found {:?}", head.trim()))?;
    if agent != expected_agent {
        bail!("expected agent {expected_agent}, found agent {agent}");
    }
    let mut cells = Vec::new();
    for (t, tok) in body.split_whitespace().enumerate() {
        let (pos, time) = tok
            .split_once('@')
            .ok_or_else(|| anyhow!("expected `(x,y)@t`, found {tok:?}"))?;
        let time: usize = time.parse().map_err(|_| anyhow!("invalid time in {tok:?}"))?;
        if time != t {
            bail!("expected time {t}, found {time}");
        }
        let (x, y) = pos
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .and_then(|s| s.split_once(','))
            .ok_or_else(|| anyhow!("expected `(x,y)`, found {pos:?}"))?;
        let x = x.trim().parse().map_err(|_| anyhow!("invalid x in {tok:?}"))?;
        let y = y.trim().parse().map_err(|_| anyhow!("invalid y in {tok:?}"))?;
        cells.push(Cell::new(x, y));
    }
    if cells.is_empty() {
        bail!("agent {agent} has an empty plan");
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mapf_core::Path;

    #[test]
    fn round_trip() {
        let sol = Solution::new(vec![
            Path::new(0, vec![Cell::new(0, 0), Cell::new(1, 0)]),
            Path::new(1, vec![Cell::new(2, 3)]),
        ]);
        let text = format_solution(&sol);
        assert_eq!(text, "agent 0: (0,0)@0 (1,0)@1\nagent 1: (2,3)@0\n");
        assert_eq!(
            parse_solution(&text).unwrap(),
            vec![vec![Cell::new(0, 0), Cell::new(1, 0)], vec![Cell::new(2, 3)]]
        );
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in [
            "agent 1: (0,0)@0",
            "agent 0 (0,0)@0",
            "agent 0: (0,0)@1",
            "agent 0: (0,0)",
            "agent 0: (0;0)@0",
            "agent 0:",
            "robot 0: (0,0)@0",
        ] {
            assert!(parse_solution(bad).is_err(), "{bad}");
        }
    }
}
