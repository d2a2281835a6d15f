//! Line-delimited JSON trial traces.
//!
//! A trace file holds one JSON object per line, each tagged by `"type"`:
//!
//! - `header`: written first. It carries `version`, the robot config and its hash, the tracking
//!   bound and tube hashes, the trial and planner options, the generated world, the start pose and the goal.
//! - `step`: one per fine integration step. It records `step`, `t`, the high-fidelity `state`,
//!   the executing parameter `k`, the `mode`, and obstacle reference positions `obstacles`.
//! - `iteration`: one per planning iteration (see [`IterationRecord`]).
//! - `result`: written last, holding the [`TrialResult`].

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RobotConfig;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec2};
use crate::models::{HighFidelityState, TrajParam};
use crate::planner::{IterationRecord, Mode, PlannerOptions};
use crate::sim::{TrialConfig, TrialResult};
use crate::world::World;

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u32,
    pub robot: RobotConfig,
    pub config_hash: String,
    pub g_hash: String,
    pub frs_hash: String,
    pub trial: TrialConfig,
    pub planner: PlannerOptions,
    pub world: World,
    pub start: Pose,
    pub goal: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub t: f64,
    pub state: HighFidelityState,
    pub k: TrajParam,
    pub mode: Mode,
    pub obstacles: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(Box<TraceHeader>),
    Step(StepRecord),
    Iteration(IterationRecord),
    Result(TrialResult),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialTrace {
    pub records: Vec<TraceRecord>,
}

impl TrialTrace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn header(&self) -> Option<&TraceHeader> {
        match self.records.first() {
            Some(TraceRecord::Header(h)) => Some(h),
            _ => None,
        }
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn iterations(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Iteration(s) => Some(s),
            _ => None,
        })
    }

    pub fn result(&self) -> Option<&TrialResult> {
        match self.records.last() {
            Some(TraceRecord::Result(r)) => Some(r),
            _ => None,
        }
    }

    pub fn write_jsonl<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            if let TraceRecord::Header(h) = &rec {
                if h.version != TRACE_VERSION {
                    return Err(Error::Trace(format!("unsupported trace version {} (expected {TRACE_VERSION})", h.version)));
                }
            }
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_jsonl(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
