//! Time-ordered collision record, the single input to every cluster
//! statistic, and its JSON-lines serialization.
//!
//! One JSON object per line:
//!
//! ```text
//! {"t":0.25,"type":"pair","i":3,"j":17,"omega":[0.6,-0.8]}
//! {"t":0.31,"type":"wall","i":5,"axis":0,"side":"high"}
//! ```
//!
//! Labels are 1-based. `omega` is omitted when the engine did not track
//! velocities.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Particle label, `1..=N`.
pub type Label = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub t: f64,
    pub i: Label,
    pub j: Label,
    /// Unit vector from `i` to `j` at contact; trailing components are zero
    /// in two dimensions.
    pub omega: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallEvent {
    pub t: f64,
    pub i: Label,
    pub axis: u8,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionLog {
    n: usize,
    dim: usize,
    pairs: Vec<PairEvent>,
    walls: Vec<WallEvent>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RecordKind {
    Pair,
    Wall,
}

#[derive(Serialize, Deserialize)]
struct Record {
    t: f64,
    #[serde(rename = "type")]
    kind: RecordKind,
    i: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    j: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    side: Option<Side>,
}

impl CollisionLog {
    pub fn new(n: usize, dim: usize) -> Self {
        Self { n, dim, pairs: Vec::new(), walls: Vec::new() }
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[PairEvent] {
        &self.pairs
    }

    pub fn walls(&self) -> &[WallEvent] {
        &self.walls
    }

    fn check_label(&self, label: Label) -> Result<()> {
        if label == 0 || label as usize > self.n {
            return Err(Error::LabelOutOfRange { label, n: self.n });
        }
        Ok(())
    }

    /// Appends a pair event; events must arrive in non-decreasing time.
    pub fn push_pair(&mut self, event: PairEvent) -> Result<()> {
        self.check_label(event.i)?;
        self.check_label(event.j)?;
        if event.i == event.j {
            return Err(Error::InvalidArgument(format!("self-collision of particle {}", event.i)));
        }
        if let Some(last) = self.pairs.last() {
            if event.t < last.t {
                return Err(Error::InvalidArgument(format!("pair event at {} after {}", event.t, last.t)));
            }
        }
        self.pairs.push(event);
        Ok(())
    }

    pub fn push_wall(&mut self, event: WallEvent) -> Result<()> {
        self.check_label(event.i)?;
        if let Some(last) = self.walls.last() {
            if event.t < last.t {
                return Err(Error::InvalidArgument(format!("wall event at {} after {}", event.t, last.t)));
            }
        }
        self.walls.push(event);
        Ok(())
    }

    /// Convenience constructor from `(t, i, j)` triples.
    pub fn from_pairs(n: usize, events: impl IntoIterator<Item = (f64, Label, Label)>) -> Result<Self> {
        let mut log = Self::new(n, 3);
        for (t, i, j) in events {
            log.push_pair(PairEvent { t, i, j, omega: None })?;
        }
        Ok(log)
    }

    /// Number of pair events with time in `[a, b]`.
    pub fn pairs_in(&self, a: f64, b: f64) -> usize {
        let lo = self.pairs.partition_point(|e| e.t < a);
        let hi = self.pairs.partition_point(|e| e.t <= b);
        hi.saturating_sub(lo)
    }

    /// Pair events with `t <= until`.
    pub fn pairs_until(&self, until: f64) -> &[PairEvent] {
        &self.pairs[..self.pairs.partition_point(|e| e.t <= until)]
    }

    pub fn write_jsonl<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = BufWriter::new(out);
        let (mut p, mut w) = (0, 0);
        while p < self.pairs.len() || w < self.walls.len() {
            let take_pair = match (self.pairs.get(p), self.walls.get(w)) {
                (Some(a), Some(b)) => a.t <= b.t,
                (Some(_), None) => true,
                _ => false,
            };
            let record = if take_pair {
                let e = &self.pairs[p];
                p += 1;
                Record {
                    t: e.t,
                    kind: RecordKind::Pair,
                    i: e.i,
                    j: Some(e.j),
                    omega: e.omega.map(|o| o[..self.dim].to_vec()),
                    axis: None,
                    side: None,
                }
            } else {
                let e = &self.walls[w];
                w += 1;
                Record { t: e.t, kind: RecordKind::Wall, i: e.i, j: None, omega: None, axis: Some(e.axis), side: Some(e.side) }
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn read_jsonl<R: std::io::Read>(input: R, n: usize, dim: usize) -> Result<Self> {
        let mut log = Self::new(n, dim);
        for (lineno, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record =
                serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            match rec.kind {
                RecordKind::Pair => {
                    let j = rec.j.ok_or_else(|| Error::Format(format!("line {}: pair without j", lineno + 1)))?;
                    let omega = match rec.omega {
                        None => None,
                        Some(v) if v.len() == dim => {
                            let mut o = [0.0; 3];
                            o[..dim].copy_from_slice(&v);
                            Some(o)
                        }
                        Some(v) => {
                            return Err(Error::Format(format!("line {}: omega of length {}", lineno + 1, v.len())))
                        }
                    };
                    log.push_pair(PairEvent { t: rec.t, i: rec.i, j, omega })?;
                }
                RecordKind::Wall => log.push_wall(WallEvent {
                    t: rec.t,
                    i: rec.i,
                    axis: rec.axis.unwrap_or(0),
                    side: rec.side.unwrap_or(Side::Low),
                })?,
            }
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(file).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, n: usize, dim: usize) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(file, n, dim)
    }
}
