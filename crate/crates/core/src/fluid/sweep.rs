//! Sweep export: closed forms vs simulated averages per parameter point.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    greenwave_averages, greenwave_schedule, optimality_gap, simulate_fluid, FluidError,
    FluidParams,
};

/// One row of a greenwave sweep: parameters, closed forms, simulated
/// values, and their discrepancies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda0: f64,
    pub lambda1: f64,
    pub nodes: usize,
    pub yellow: f64,
    pub orange: f64,
    pub delta: f64,
    pub green: f64,
    pub red: f64,
    pub cycle: f64,
    pub phi1_closed: f64,
    pub psi_closed: f64,
    pub phi1_sim: f64,
    pub psi_sim_max_err: f64,
    pub downstream_max: f64,
    pub phi1_gap: f64,
    pub psi_gap: f64,
}

/// Evaluates one uniform parameter point at one delta: closed forms plus a
/// simulation over `cycles` control cycles.
pub fn sweep_point(params: &FluidParams, delta: f64, cycles: f64) -> Result<SweepRow, FluidError> {
    if !params.is_uniform() {
        return Err(FluidError::InvalidParameter(
            "sweep expects uniform cross rates".into(),
        ));
    }
    let schedule = greenwave_schedule(params, delta)?;
    let closed = greenwave_averages(params, delta)?;
    let gaps = optimality_gap(params, delta)?;
    let traj = simulate_fluid(params, &schedule, cycles * schedule.cycle(0))?;
    let psi_sim_max_err = traj
        .cross_avg
        .iter()
        .zip(&closed.psi)
        .map(|(s, c)| (s - c).abs())
        .fold(0.0, f64::max);
    let downstream_max = (1..params.nodes())
        .map(|n| traj.avenue_max_after(n, schedule.cycle(0)))
        .fold(0.0, f64::max);
    Ok(SweepRow {
        lambda0: params.lambda0,
        lambda1: params.lambda[0],
        nodes: params.nodes(),
        yellow: params.yellow,
        orange: params.orange,
        delta,
        green: closed.green,
        red: closed.red,
        cycle: closed.cycle,
        phi1_closed: closed.phi1,
        psi_closed: closed.psi[0],
        phi1_sim: traj.avenue_avg[0],
        psi_sim_max_err,
        downstream_max,
        phi1_gap: gaps.phi1,
        psi_gap: gaps.psi[0],
    })
}

pub fn write_sweep_csv(rows: &[SweepRow], writer: impl Write) -> Result<(), FluidError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)
            .map_err(|e| FluidError::InvalidParameter(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_point_agrees_with_itself() {
        let params = FluidParams::uniform(0.25, 0.25, 3, 1.0, 1.0).unwrap();
        let row = sweep_point(&params, 0.1, 80.0).unwrap();
        assert!((row.phi1_sim - row.phi1_closed).abs() < 1e-8);
        assert!(row.psi_sim_max_err < 1e-8);
        assert!(row.downstream_max < 1e-12);

        let mut buf = Vec::new();
        write_sweep_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda0,"));
        assert_eq!(text.lines().count(), 2);
    }
}
