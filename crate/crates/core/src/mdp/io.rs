//! Policy/value table export and import as CSV (x1, x2, phase, action,
//! value), for comparison runs across solver configurations.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::env::{LightPhase, SingleState};

use super::{MdpError, PolicyTable, TruncatedSpace, ValueTable};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    x1: u64,
    x2: u64,
    phase: u8,
    action: u8,
    value: f64,
}

pub fn write_tables(
    space: &TruncatedSpace,
    policy: &PolicyTable,
    values: &ValueTable,
    writer: impl Write,
) -> Result<(), MdpError> {
    let mut w = csv::Writer::from_writer(writer);
    for (idx, s) in space.states().enumerate() {
        w.serialize(Row {
            x1: s.x1,
            x2: s.x2,
            phase: s.phase.value(),
            action: policy.actions[idx],
            value: values.values[idx],
        })
        .map_err(|e| MdpError::InvalidParameter(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads tables written by [`write_tables`]; the truncation bound is
/// inferred from the largest queue coordinate.
pub fn read_tables(reader: impl Read) -> Result<(TruncatedSpace, PolicyTable, ValueTable), MdpError> {
    let mut rows: Vec<Row> = Vec::new();
    let mut r = csv::Reader::from_reader(reader);
    for rec in r.deserialize() {
        rows.push(rec.map_err(|e| MdpError::InvalidParameter(format!("csv: {e}")))?);
    }
    if rows.is_empty() {
        return Err(MdpError::InvalidParameter("empty table csv".into()));
    }
    let x_max = rows.iter().map(|r| r.x1.max(r.x2)).max().unwrap();
    let space = TruncatedSpace::new(x_max);
    if rows.len() != space.len() {
        return Err(MdpError::InvalidParameter(format!(
            "table has {} rows, expected {} for x_max {}",
            rows.len(),
            space.len(),
            x_max
        )));
    }
    let mut actions = vec![0u8; space.len()];
    let mut values = vec![f64::NAN; space.len()];
    for row in rows {
        if row.action > 1 {
            return Err(MdpError::InvalidParameter(format!(
                "action {} out of range",
                row.action
            )));
        }
        let phase = LightPhase::new(row.phase)
            .map_err(|e| MdpError::InvalidParameter(e.to_string()))?;
        let idx = space.index(&SingleState::new(row.x1, row.x2, phase));
        actions[idx] = row.action;
        values[idx] = row.value;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(MdpError::InvalidParameter(
            "table does not cover the full state space".into(),
        ));
    }
    Ok((space, PolicyTable { actions }, ValueTable { values }))
}
