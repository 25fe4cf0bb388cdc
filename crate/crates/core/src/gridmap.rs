//! Four-connected grid worlds and the MovingAI `.map` / `.scen` text formats.
//!
//! A [`GridMap`] is a row-major passability bitmap. Vertices of the MAPF graph
//! are the passable cells; edges join passable cells that share a side. The
//! neighbour order (up, down, left, right) is fixed so that every search built
//! on top of it is deterministic.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A grid coordinate: `x` is the column, `y` the row, both 0-based.
///
/// Cells order row-major (by `y`, then `x`), which matches their index order
/// within any map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Cell { x, y }
    }

    /// True when `other` shares a side with `self`.
    pub fn is_adjacent(self, other: Cell) -> bool {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) == 1
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Misuse of a [`GridMap`] query.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("cell {0} is outside the map")]
    OutOfBounds(Cell),
    #[error("cell {0} is blocked")]
    Blocked(Cell),
}

/// Failure to read a `.map` file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapParseError {
    #[error("line {line}: expected `{expected}` header, found {found:?}")]
    Header {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: invalid {field} {value:?}")]
    Dimension {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("missing `{0}` header")]
    MissingHeader(&'static str),
    #[error("line {line}: expected {expected} cells in row, found {found}")]
    RowLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("expected {expected} map rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("line {line}, column {column}: unknown terrain character '{ch}'")]
    UnknownTerrain { line: usize, column: usize, ch: char },
    #[error("map has no passable cells")]
    NoPassableCells,
}

/// Failure to read a `.scen` file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioParseError {
    #[error("missing `version` line")]
    MissingVersion,
    #[error("row {row}: expected 9 fields, found {found}")]
    FieldCount { row: usize, found: usize },
    #[error("row {row}: invalid {field} {value:?}")]
    Number {
        row: usize,
        field: &'static str,
        value: String,
    },
}

/// Rectangular four-connected grid with passable and blocked cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
}

fn terrain(ch: char) -> Option<bool> {
    match ch {
        '.' | 'G' | 'S' => Some(false),
        '@' | 'O' | 'T' | 'W' => Some(true),
        _ => None,
    }
}

impl GridMap {
    /// Build a map from body rows only (no header). Row `i` is `y = i`.
    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self, MapParseError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().chars().count());
        Self::parse_body(rows.iter().map(|r| r.as_ref()).enumerate(), width, height, 1)
    }

    /// An obstacle-free `width × height` map.
    pub fn open(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "map dimensions must be positive");
        GridMap {
            width,
            height,
            blocked: vec![false; (width * height) as usize],
        }
    }

    /// Parse the content of a MovingAI `.map` file.
    pub fn parse(text: &str) -> Result<Self, MapParseError> {
        let mut lines = text.lines().enumerate();
        let mut width = None;
        let mut height = None;
        let mut seen_type = false;
        loop {
            let Some((idx, raw)) = lines.next() else {
                return Err(if !seen_type {
                    MapParseError::MissingHeader("type")
                } else if height.is_none() {
                    MapParseError::MissingHeader("height")
                } else if width.is_none() {
                    MapParseError::MissingHeader("width")
                } else {
                    MapParseError::MissingHeader("map")
                });
            };
            let line = raw.trim();
            let mut words = line.split_whitespace();
            match words.next() {
                Some("type") if !seen_type => seen_type = true,
                Some(key @ ("height" | "width")) if seen_type => {
                    let value = words.next().unwrap_or_default();
                    let n = value
                        .parse::<u32>()
                        .ok()
                        .filter(|n| *n > 0 && words.next().is_none())
                        .ok_or_else(|| MapParseError::Dimension {
                            line: idx + 1,
                            field: if key == "height" { "height" } else { "width" },
                            value: line.to_string(),
                        })?;
                    if key == "height" {
                        height = Some(n);
                    } else {
                        width = Some(n);
                    }
                }
                Some("map") if seen_type && width.is_some() && height.is_some() => break,
                _ => {
                    let expected = if !seen_type {
                        "type"
                    } else if height.is_none() {
                        "height"
                    } else if width.is_none() {
                        "width"
                    } else {
                        "map"
                    };
                    return Err(MapParseError::Header {
                        line: idx + 1,
                        expected,
                        found: raw.to_string(),
                    });
                }
            }
        }
        let (width, height) = (width.unwrap() as usize, height.unwrap() as usize);
        let body: Vec<(usize, &str)> = lines.collect();
        let rows = body.len() - body.iter().rev().take_while(|(_, l)| l.trim().is_empty()).count();
        if rows != height {
            return Err(MapParseError::RowCount {
                expected: height,
                found: rows,
            });
        }
        let first_line = body.first().map_or(0, |(i, _)| *i);
        Self::parse_body(
            body[..rows].iter().map(|(i, l)| (*i - first_line, *l)),
            width,
            height,
            first_line + 1,
        )
    }

    fn parse_body<'a>(
        rows: impl Iterator<Item = (usize, &'a str)>,
        width: usize,
        height: usize,
        line_offset: usize,
    ) -> Result<Self, MapParseError> {
        let mut blocked = Vec::with_capacity(width * height);
        let mut count = 0;
        for (i, row) in rows {
            let line = i + line_offset;
            let row = row.trim_end_matches('\r');
            let before = blocked.len();
            for (col, ch) in row.chars().enumerate() {
                let b = terrain(ch).ok_or(MapParseError::UnknownTerrain {
                    line,
                    column: col + 1,
                    ch,
                })?;
                blocked.push(b);
            }
            let found = blocked.len() - before;
            if found != width {
                return Err(MapParseError::RowLength {
                    line,
                    expected: width,
                    found,
                });
            }
            count += 1;
        }
        if count != height || width == 0 {
            return Err(MapParseError::RowCount {
                expected: height,
                found: count,
            });
        }
        if blocked.iter().all(|b| *b) {
            return Err(MapParseError::NoPassableCells);
        }
        Ok(GridMap {
            width: width as u32,
            height: height as u32,
            blocked,
        })
    }

    /// Serialize back to the MovingAI format with `.` for passable and `@`
    /// for blocked cells.
    pub fn to_map_string(&self) -> String {
        let mut out = format!(
            "type octile\nheight {}\nwidth {}\nmap\n",
            self.height, self.width
        );
        for row in self.blocked.chunks(self.width as usize) {
            out.extend(row.iter().map(|b| if *b { '@' } else { '.' }));
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.blocked.len()
    }

    pub fn passable_count(&self) -> usize {
        self.blocked.iter().filter(|b| !**b).count()
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// False for blocked and out-of-bounds cells.
    pub fn is_passable(&self, c: Cell) -> bool {
        self.contains(c) && !self.blocked[self.index(c)]
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        let i = self.index(c);
        self.blocked[i] = blocked;
    }

    /// Row-major index of an in-bounds cell.
    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.contains(c));
        (c.y * self.width + c.x) as usize
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        let i = index as u32;
        Cell::new(i % self.width, i / self.width)
    }

    /// Passable cells in index order.
    pub fn passable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.blocked.len())
            .filter(|i| !self.blocked[*i])
            .map(|i| self.cell(i))
    }

    /// Passable four-neighbours of `c` in the order up, down, left, right.
    pub fn neighbors(&self, c: Cell) -> Result<Vec<Cell>, GridError> {
        if !self.contains(c) {
            return Err(GridError::OutOfBounds(c));
        }
        if self.blocked[self.index(c)] {
            return Err(GridError::Blocked(c));
        }
        let mut out = Vec::with_capacity(4);
        self.for_each_neighbor(self.index(c), |n| out.push(self.cell(n)));
        Ok(out)
    }

    /// Index-level neighbour enumeration in the same fixed order.
    #[inline]
    pub(crate) fn for_each_neighbor(&self, index: usize, mut f: impl FnMut(usize)) {
        let w = self.width as usize;
        let x = index % w;
        if index >= w && !self.blocked[index - w] {
            f(index - w);
        }
        if index + w < self.blocked.len() && !self.blocked[index + w] {
            f(index + w);
        }
        if x > 0 && !self.blocked[index - 1] {
            f(index - 1);
        }
        if x + 1 < w && !self.blocked[index + 1] {
            f(index + 1);
        }
    }
}

/// One start/goal task of a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEntry {
    pub bucket: u32,
    pub map_name: String,
    pub map_width: u32,
    pub map_height: u32,
    pub start: Cell,
    pub goal: Cell,
    pub optimal_length: f64,
}

/// Ordered list of tasks from a MovingAI `.scen` file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub entries: Vec<ScenarioEntry>,
}

impl Scenario {
    /// Parse the content of a MovingAI `.scen` file. Fields may be separated by
    /// tabs or spaces; map names never contain whitespace in the benchmark.
    pub fn parse(text: &str) -> Result<Self, ScenarioParseError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.split_whitespace().next() == Some("version") => {}
            _ => return Err(ScenarioParseError::MissingVersion),
        }
        let mut entries = Vec::new();
        for (idx, line) in lines {
            let row = idx + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 9 {
                return Err(ScenarioParseError::FieldCount {
                    row,
                    found: fields.len(),
                });
            }
            let int = |i: usize, field: &'static str| {
                fields[i]
                    .parse::<u32>()
                    .map_err(|_| ScenarioParseError::Number {
                        row,
                        field,
                        value: fields[i].to_string(),
                    })
            };
            let optimal_length = fields[8]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| ScenarioParseError::Number {
                    row,
                    field: "optimal length",
                    value: fields[8].to_string(),
                })?;
            entries.push(ScenarioEntry {
                bucket: int(0, "bucket")?,
                map_name: fields[1].to_string(),
                map_width: int(2, "width")?,
                map_height: int(3, "height")?,
                start: Cell::new(int(4, "start x")?, int(5, "start y")?),
                goal: Cell::new(int(6, "goal x")?, int(7, "goal y")?),
                optimal_length,
            });
        }
        Ok(Scenario { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(w: usize, h: usize) -> String {
        format!("type octile\nheight {h}\nwidth {w}\nmap\n")
    }

    #[test]
    fn parses_blocked_cell() {
        let map = GridMap::parse(&(header(2, 2) + ".@\n..\n")).unwrap();
        assert_eq!(map.width(), 2);
        assert_eq!(map.height(), 2);
        let blocked: Vec<Cell> = (0..4)
            .map(|i| map.cell(i))
            .filter(|c| !map.is_passable(*c))
            .collect();
        assert_eq!(blocked, vec![Cell::new(1, 0)]);
    }

    #[test]
    fn open_map_has_no_blocked_cells() {
        let map = GridMap::parse(&(header(3, 3) + "...\n...\n...\n")).unwrap();
        assert_eq!(map.passable_count(), 9);
        assert_eq!(map, GridMap::open(3, 3));
    }

    #[test]
    fn terrain_aliases() {
        let map = GridMap::parse(&(header(7, 1) + ".GSOTW@\n")).unwrap();
        let passable: Vec<bool> = (0..7).map(|x| map.is_passable(Cell::new(x, 0))).collect();
        assert_eq!(passable, [true, true, true, false, false, false, false]);
    }

    #[test]
    fn rejects_unknown_terrain() {
        let err = GridMap::parse(&(header(3, 1) + "..X\n")).unwrap_err();
        assert_eq!(
            err,
            MapParseError::UnknownTerrain {
                line: 5,
                column: 3,
                ch: 'X'
            }
        );
        assert!(err.to_string().contains("unknown terrain character 'X'"));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(
            GridMap::parse(&(header(3, 2) + "...\n..\n")),
            Err(MapParseError::RowLength { line: 6, expected: 3, found: 2 })
        ));
        assert!(matches!(
            GridMap::parse(&(header(3, 2) + "...\n")),
            Err(MapParseError::RowCount { expected: 2, found: 1 })
        ));
        assert!(matches!(
            GridMap::parse(&(header(1, 3) + ".\n.\n.\n.\n")),
            Err(MapParseError::RowCount { expected: 3, found: 4 })
        ));
        assert!(matches!(
            GridMap::parse("type octile\nheight x\nwidth 2\nmap\n"),
            Err(MapParseError::Dimension { line: 2, .. })
        ));
        assert!(matches!(
            GridMap::parse("height 2\nwidth 2\nmap\n..\n..\n"),
            Err(MapParseError::Header { line: 1, expected: "type", .. })
        ));
        assert_eq!(
            GridMap::parse("type octile\nheight 1\n"),
            Err(MapParseError::MissingHeader("width"))
        );
        assert_eq!(
            GridMap::parse(&(header(2, 1) + "@@\n")),
            Err(MapParseError::NoPassableCells)
        );
    }

    #[test]
    fn accepts_crlf() {
        let text = "type octile\r\nheight 2\r\nwidth 2\r\nmap\r\n.@\r\n..\r\n";
        let map = GridMap::parse(text).unwrap();
        assert!(!map.is_passable(Cell::new(1, 0)));
        assert_eq!(map.passable_count(), 3);
    }

    #[test]
    fn neighbor_order() {
        let map = GridMap::open(3, 3);
        assert_eq!(
            map.neighbors(Cell::new(1, 1)).unwrap(),
            vec![Cell::new(1, 0), Cell::new(1, 2), Cell::new(0, 1), Cell::new(2, 1)]
        );
        assert_eq!(
            map.neighbors(Cell::new(0, 0)).unwrap(),
            vec![Cell::new(0, 1), Cell::new(1, 0)]
        );
        let mut walled = map.clone();
        walled.set_blocked(Cell::new(1, 0), true);
        assert_eq!(walled.neighbors(Cell::new(0, 0)).unwrap(), vec![Cell::new(0, 1)]);
        assert_eq!(
            walled.neighbors(Cell::new(1, 0)),
            Err(GridError::Blocked(Cell::new(1, 0)))
        );
        assert_eq!(
            walled.neighbors(Cell::new(3, 0)),
            Err(GridError::OutOfBounds(Cell::new(3, 0)))
        );
    }

    #[test]
    fn scenario_row() {
        let scen = Scenario::parse("version 1\n0 m.map 8 8 1 2 5 2 4\n").unwrap();
        assert_eq!(scen.len(), 1);
        let e = &scen.entries[0];
        assert_eq!(e.start, Cell::new(1, 2));
        assert_eq!(e.goal, Cell::new(5, 2));
        assert_eq!(e.optimal_length, 4.0);
        assert_eq!(e.map_name, "m.map");
    }

    #[test]
    fn scenario_tabs_and_fractional_length() {
        let scen =
            Scenario::parse("version 1\r\n3\tden520d.map\t256\t257\t10\t20\t30\t40\t35.89949494\r\n")
                .unwrap();
        assert_eq!(scen.entries[0].map_height, 257);
        assert!((scen.entries[0].optimal_length - 35.89949494).abs() < 1e-12);
    }

    #[test]
    fn scenario_errors() {
        assert!(Scenario::parse("version 1\n").unwrap().is_empty());
        let err = Scenario::parse("version 1\n0 m.map 8 8 1 2 5 2\n").unwrap_err();
        assert_eq!(err, ScenarioParseError::FieldCount { row: 2, found: 8 });
        assert!(err.to_string().contains("expected 9 fields"));
        assert_eq!(
            Scenario::parse("0 m.map 8 8 1 2 5 2 4\n"),
            Err(ScenarioParseError::MissingVersion)
        );
        assert!(matches!(
            Scenario::parse("version 1\n0 m.map 8 8 a 2 5 2 4\n"),
            Err(ScenarioParseError::Number { row: 2, field: "start x", .. })
        ));
    }

    fn arb_map() -> impl Strategy<Value = GridMap> {
        (1u32..12, 1u32..12)
            .prop_flat_map(|(w, h)| {
                proptest::collection::vec(proptest::bool::weighted(0.3), (w * h) as usize)
                    .prop_map(move |mut blocked| {
                        blocked[0] = false;
                        GridMap {
                            width: w,
                            height: h,
                            blocked,
                        }
                    })
            })
    }

    proptest! {
        #[test]
        fn reserialization_round_trips(map in arb_map()) {
            let text = map.to_map_string();
            prop_assert_eq!(GridMap::parse(&text).unwrap(), map);
        }

        #[test]
        fn adjacency_is_symmetric(map in arb_map()) {
            for c in map.passable_cells() {
                for n in map.neighbors(c).unwrap() {
                    prop_assert!(n != c);
                    prop_assert!(c.is_adjacent(n));
                    prop_assert!(map.neighbors(n).unwrap().contains(&c));
                }
            }
        }
    }
}
