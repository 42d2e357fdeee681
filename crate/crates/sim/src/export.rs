//! Flat trajectory tables for plotting: one row per (frame, source).

use std::io::Write;

use macromicro_core::{snake_fk, Pose, SnakeConfig};
use serde::{Deserialize, Serialize};

use crate::trace::Trace;
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Raw stylus pose in its own base frame.
    Stylus,
    /// Scaled, frame-mapped stylus pose the arm was asked to reach.
    MacroExpected,
    /// Tool flange.
    MacroEe,
    /// Scaled stylus pose for the snake, flange frame.
    MicroExpected,
    /// Snake tip, flange frame.
    MicroEe,
    /// Snake tip, arm base frame.
    Tip,
}

/// CSV columns `t,source,x,y,z,qw,qx,qy,qz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    pub source: Source,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
}

impl Row {
    fn new(t: f64, source: Source, pose: &Pose) -> Self {
        let [qw, qx, qy, qz] = pose.quaternion_wxyz();
        let p = pose.translation;
        Self {
            t,
            source,
            x: p.x,
            y: p.y,
            z: p.z,
            qw,
            qx,
            qy,
            qz,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::from_wxyz([self.qw, self.qx, self.qy, self.qz], [self.x, self.y, self.z])
    }
}

/// JSON form of a row, as consumed by the cockpit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsonRow {
    pub t: f64,
    pub source: Source,
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
}

impl From<Row> for JsonRow {
    fn from(r: Row) -> Self {
        Self {
            t: r.t,
            source: r.source,
            position: [r.x, r.y, r.z],
            orientation: [r.qw, r.qx, r.qy, r.qz],
        }
    }
}

/// Expected rows only appear while the module is engaged.
pub fn rows(trace: &Trace) -> Result<Vec<Row>, SimError> {
    let cfg = &trace.header.config;
    let mut out = Vec::with_capacity(trace.frames.len() * 4);
    for f in &trace.frames {
        let t = f.t;
        out.push(Row::new(t, Source::Stylus, &f.stylus.pose));
        if let Some(target) = &f.macro_target {
            out.push(Row::new(t, Source::MacroExpected, target));
        }
        out.push(Row::new(t, Source::MacroEe, &f.flange_pose));
        if let Some(target) = &f.micro_target {
            out.push(Row::new(t, Source::MicroExpected, target));
        }
        let micro = cfg
            .flange_offset
            .compose(&snake_fk(&cfg.snake, &SnakeConfig { theta: f.snake_config })?);
        out.push(Row::new(t, Source::MicroEe, &micro));
        out.push(Row::new(t, Source::Tip, &f.tip_pose));
    }
    Ok(out)
}

pub fn write_csv(rows: &[Row], out: impl Write) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e.into()))
}

pub fn read_csv(input: impl std::io::Read) -> Result<Vec<Row>, SimError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(csv_err)
}

pub fn write_json(rows: &[Row], out: impl Write) -> Result<(), SimError> {
    let json: Vec<JsonRow> = rows.iter().copied().map(JsonRow::from).collect();
    serde_json::to_writer(out, &json).map_err(|e| SimError::Report(e.to_string()))
}

fn csv_err(e: csv::Error) -> SimError {
    SimError::Report(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_roundtrip() {
        let rows = vec![
            Row::new(0.0, Source::Stylus, &Pose::from_translation(1.0, 2.0, 3.0)),
            Row::new(0.01, Source::MacroEe, &Pose::rot_z(0.5)),
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,source,x,y,z,qw,qx,qy,qz\n0.0,stylus,1.0,2.0,3.0,1.0,0.0,0.0,0.0\n"), "{text}");
        assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn json_row_schema() {
        let row = Row::new(0.5, Source::MicroExpected, &Pose::identity());
        let v = serde_json::to_value(JsonRow::from(row)).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"t": 0.5, "source": "micro_expected", "position": [0.0, 0.0, 0.0], "orientation": [1.0, 0.0, 0.0, 0.0]})
        );
    }
}
