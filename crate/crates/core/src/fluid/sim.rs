//! Exact event-driven integration of the piecewise-linear fluid dynamics.
//!
//! Between events every queue is linear, so the simulator advances from one
//! event to the next (segment boundaries and queue-empty times), recomputing
//! flow rates in upstream-to-downstream order at each event. Long-run
//! averages are taken over an integer number of cycles after discarding the
//! transient, which makes the 1e-8-level comparisons against the closed
//! forms meaningful.

use super::{FluidError, FluidParams, FluidPhase, Schedule};

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub horizon: f64,
    /// A queue exceeding this at successive cycle boundaries while growing
    /// monotonically marks the schedule unstable.
    pub instability_bound: f64,
}

impl SimOptions {
    pub fn with_horizon(horizon: f64) -> Self {
        SimOptions {
            horizon,
            instability_bound: 1e4,
        }
    }
}

/// Piecewise-linear queue trajectories as breakpoint polylines, plus
/// long-run averages over the post-transient window.
#[derive(Debug, Clone)]
pub struct FluidTrajectory {
    /// Avenue queue breakpoints `(t, value)` per node.
    pub avenue: Vec<Vec<(f64, f64)>>,
    /// Cross queue breakpoints per node.
    pub cross: Vec<Vec<(f64, f64)>>,
    pub avenue_avg: Vec<f64>,
    pub cross_avg: Vec<f64>,
    /// Averaging window (start, end); whole cycles only.
    pub window: (f64, f64),
}

impl FluidTrajectory {
    pub fn avenue_at(&self, node: usize, t: f64) -> f64 {
        polyline_value(&self.avenue[node], t)
    }

    pub fn cross_at(&self, node: usize, t: f64) -> f64 {
        polyline_value(&self.cross[node], t)
    }

    /// Largest avenue queue value at node `node` from `t0` onward.
    pub fn avenue_max_after(&self, node: usize, t0: f64) -> f64 {
        polyline_max_after(&self.avenue[node], t0)
    }
}

/// Per-node segment clock; boundary times come from closed-form cycle
/// arithmetic so they do not drift over long horizons.
struct SegmentClock {
    offset: f64,
    cycle: f64,
    prefix: [f64; 4],
    cyc: i64,
    slot: u8,
}

impl SegmentClock {
    fn new(schedule: &Schedule, node: usize, t: f64) -> Self {
        let cycle = schedule.cycle(node);
        let prefix = schedule.prefix(node);
        let offset = schedule.offset[node];
        let cyc = ((t - offset) / cycle).floor() as i64;
        let tau = t - offset - cyc as f64 * cycle;
        let slot = prefix.iter().position(|&b| tau < b).unwrap_or(3) as u8;
        SegmentClock {
            offset,
            cycle,
            prefix,
            cyc,
            slot,
        }
    }

    fn phase(&self) -> FluidPhase {
        FluidPhase::from_slot(self.slot)
    }

    fn segment_end(&self) -> f64 {
        self.offset + self.cyc as f64 * self.cycle + self.prefix[self.slot as usize]
    }

    fn advance_past(&mut self, t: f64) {
        while self.segment_end() <= t {
            if self.slot == 3 {
                self.slot = 0;
                self.cyc += 1;
            } else {
                self.slot += 1;
            }
        }
    }
}

const SNAP: f64 = 1e-12;

/// Runs the fluid network from empty queues over `[0, horizon]`.
pub fn simulate_fluid(
    params: &FluidParams,
    schedule: &Schedule,
    horizon: f64,
) -> Result<FluidTrajectory, FluidError> {
    simulate_fluid_opts(params, schedule, SimOptions::with_horizon(horizon))
}

pub fn simulate_fluid_opts(
    params: &FluidParams,
    schedule: &Schedule,
    opts: SimOptions,
) -> Result<FluidTrajectory, FluidError> {
    let n = params.nodes();
    if schedule.nodes() != n {
        return Err(FluidError::InvalidParameter(format!(
            "params cover {n} nodes, schedule {}",
            schedule.nodes()
        )));
    }
    if params.yellow != schedule.yellow || params.orange != schedule.orange {
        return Err(FluidError::InvalidParameter(
            "schedule yellow/orange differ from params".into(),
        ));
    }
    let cycle = schedule.cycle(0);
    for i in 1..n {
        if (schedule.cycle(i) - cycle).abs() > 1e-9 * cycle {
            return Err(FluidError::InvalidParameter(
                "long-run averaging requires a common cycle length at all nodes".into(),
            ));
        }
    }
    let horizon = opts.horizon;
    if !(horizon > 10.0 * cycle) {
        return Err(FluidError::InvalidParameter(format!(
            "horizon {horizon} too short; need well over one cycle ({cycle})"
        )));
    }

    let mut clocks: Vec<SegmentClock> = (0..n).map(|i| SegmentClock::new(schedule, i, 0.0)).collect();
    let mut phi = vec![0.0f64; n];
    let mut psi = vec![0.0f64; n];
    let mut avenue: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 0.0)]; n];
    let mut cross: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 0.0)]; n];

    let mut t = 0.0f64;
    while t < horizon {
        // flow rates, upstream to downstream
        let mut phi_slope = vec![0.0f64; n];
        let mut psi_slope = vec![0.0f64; n];
        let mut inflow = params.lambda0;
        for i in 0..n {
            let phase = clocks[i].phase();
            let outflow = if phase == FluidPhase::Green {
                if phi[i] > 0.0 {
                    1.0
                } else {
                    inflow
                }
            } else {
                0.0
            };
            phi_slope[i] = inflow - outflow;
            inflow = outflow;

            psi_slope[i] = if phase == FluidPhase::Red {
                if psi[i] > 0.0 {
                    params.lambda[i] - 1.0
                } else {
                    0.0
                }
            } else {
                params.lambda[i]
            };
        }

        // next event: horizon, any segment boundary, any queue hitting zero
        let mut next_t = horizon;
        for clock in &clocks {
            next_t = next_t.min(clock.segment_end());
        }
        for i in 0..n {
            if phi_slope[i] < 0.0 && phi[i] > 0.0 {
                next_t = next_t.min(t + phi[i] / -phi_slope[i]);
            }
            if psi_slope[i] < 0.0 && psi[i] > 0.0 {
                next_t = next_t.min(t + psi[i] / -psi_slope[i]);
            }
        }
        debug_assert!(next_t > t, "event time must advance");
        let dt = next_t - t;
        for i in 0..n {
            phi[i] = (phi[i] + phi_slope[i] * dt).max(0.0);
            psi[i] = (psi[i] + psi_slope[i] * dt).max(0.0);
            if phi[i] < SNAP {
                phi[i] = 0.0;
            }
            if psi[i] < SNAP {
                psi[i] = 0.0;
            }
            avenue[i].push((next_t, phi[i]));
            cross[i].push((next_t, psi[i]));
        }
        t = next_t;
        for clock in &mut clocks {
            clock.advance_past(t);
        }
    }

    detect_divergence(&avenue, &cross, cycle, horizon, opts.instability_bound)?;

    // average over whole cycles after the transient
    let skip = (horizon / 10.0).max(2.0 * cycle);
    let start = (skip / cycle).ceil() * cycle;
    let end = (horizon / cycle).floor() * cycle;
    if end < start + cycle {
        return Err(FluidError::InvalidParameter(format!(
            "horizon {horizon} leaves no whole cycle after the transient"
        )));
    }
    let span = end - start;
    let avenue_avg = avenue
        .iter()
        .map(|pts| polyline_integral(pts, start, end) / span)
        .collect();
    let cross_avg = cross
        .iter()
        .map(|pts| polyline_integral(pts, start, end) / span)
        .collect();

    Ok(FluidTrajectory {
        avenue,
        cross,
        avenue_avg,
        cross_avg,
        window: (start, end),
    })
}

/// Flags queues that keep growing cycle over cycle past the bound.
fn detect_divergence(
    avenue: &[Vec<(f64, f64)>],
    cross: &[Vec<(f64, f64)>],
    cycle: f64,
    horizon: f64,
    bound: f64,
) -> Result<(), FluidError> {
    let cycles = (horizon / cycle).floor() as usize;
    if cycles < 8 {
        return Ok(());
    }
    for (label, lines) in [("avenue", avenue), ("cross", cross)] {
        for (node, pts) in lines.iter().enumerate() {
            let samples: Vec<f64> = (cycles - 7..=cycles)
                .map(|k| polyline_value(pts, k as f64 * cycle))
                .collect();
            let growing = samples.windows(2).all(|w| w[1] > w[0]);
            if growing && samples.last().copied().unwrap_or(0.0) > bound {
                return Err(FluidError::UnstableSchedule(format!(
                    "{label} queue at node {node} grows past {bound} at cycle boundaries"
                )));
            }
        }
    }
    Ok(())
}

fn polyline_value(pts: &[(f64, f64)], t: f64) -> f64 {
    match pts.binary_search_by(|probe| probe.0.partial_cmp(&t).unwrap()) {
        Ok(i) => pts[i].1,
        Err(0) => pts[0].1,
        Err(i) if i == pts.len() => pts[pts.len() - 1].1,
        Err(i) => {
            let (t0, v0) = pts[i - 1];
            let (t1, v1) = pts[i];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }
}

fn polyline_max_after(pts: &[(f64, f64)], t0: f64) -> f64 {
    let mut max = polyline_value(pts, t0);
    for &(t, v) in pts {
        if t >= t0 {
            max = max.max(v);
        }
    }
    max
}

/// Exact integral of a piecewise-linear polyline over `[a, b]`.
fn polyline_integral(pts: &[(f64, f64)], a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (t0, v0) = w[0];
        let (t1, v1) = w[1];
        let lo = t0.max(a);
        let hi = t1.min(b);
        if hi <= lo {
            continue;
        }
        let slope = (v1 - v0) / (t1 - t0);
        let vlo = v0 + slope * (lo - t0);
        let vhi = v0 + slope * (hi - t0);
        total += 0.5 * (vlo + vhi) * (hi - lo);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{
        check_stability, greenwave_averages, greenwave_schedule, prop1_lower_bounds,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn zero_arrivals_stay_empty() {
        let params = FluidParams::uniform(0.0, 0.0, 3, 1.0, 1.0).unwrap();
        let schedule = Schedule::uniform(2.0, 2.0, vec![0.0; 3], 1.0, 1.0).unwrap();
        let traj = simulate_fluid(&params, &schedule, 300.0).unwrap();
        for n in 0..3 {
            assert_eq!(traj.avenue_avg[n], 0.0);
            assert_eq!(traj.cross_avg[n], 0.0);
            assert_eq!(traj.avenue_max_after(n, 0.0), 0.0);
        }
    }

    #[test]
    fn greenwave_oracle_identity_at_the_worked_point() {
        let params = FluidParams::uniform(0.25, 0.25, 4, 1.0, 1.0).unwrap();
        let schedule = greenwave_schedule(&params, 0.0).unwrap();
        let traj = simulate_fluid(&params, &schedule, 400.0).unwrap();
        let closed = greenwave_averages(&params, 0.0).unwrap();
        assert!((closed.phi1 - 0.375).abs() < 1e-15);
        assert!(
            (traj.avenue_avg[0] - closed.phi1).abs() < 1e-9,
            "phi1 simulated {} vs closed {}",
            traj.avenue_avg[0],
            closed.phi1
        );
        for n in 0..4 {
            assert!(
                (traj.cross_avg[n] - closed.psi[n]).abs() < 1e-9,
                "psi[{n}] simulated {} vs closed {}",
                traj.cross_avg[n],
                closed.psi[n]
            );
        }
        // downstream avenue queues identically zero
        for n in 1..4 {
            assert_eq!(traj.avenue_max_after(n, schedule.cycle(0)), 0.0);
            assert_eq!(traj.avenue_avg[n], 0.0);
        }
    }

    #[test]
    fn one_node_triangle_matches_prop1_exactly() {
        // For any stable constant-cycle schedule the per-cycle pattern is a
        // triangle whose average equals the Proposition bound.
        let params = FluidParams::uniform(0.3, 0.2, 1, 0.8, 1.2).unwrap();
        let schedule = Schedule::uniform(3.0, 2.0, vec![1.7], 0.8, 1.2).unwrap();
        assert!(check_stability(&params, &schedule).unwrap().all_stable());
        let traj = simulate_fluid(&params, &schedule, 500.0).unwrap();
        let bounds = prop1_lower_bounds(&params, &schedule).unwrap();
        assert!((traj.avenue_avg[0] - bounds.phi1).abs() < 1e-10);
        assert!((traj.cross_avg[0] - bounds.psi[0]).abs() < 1e-10);
    }

    #[test]
    fn offsets_do_not_change_marginal_averages() {
        let params = FluidParams::uniform(0.3, 0.25, 3, 1.0, 1.0).unwrap();
        let base = Schedule::uniform(4.0, 3.0, vec![0.0; 3], 1.0, 1.0).unwrap();
        let shifted = Schedule::uniform(4.0, 3.0, vec![0.0, 2.5, 7.0], 1.0, 1.0).unwrap();
        let a = simulate_fluid(&params, &base, 600.0).unwrap();
        let b = simulate_fluid(&params, &shifted, 600.0).unwrap();
        assert!((a.avenue_avg[0] - b.avenue_avg[0]).abs() < 1e-9);
        for n in 0..3 {
            assert!((a.cross_avg[n] - b.cross_avg[n]).abs() < 1e-9);
        }
    }

    #[test]
    fn random_stable_schedules_respect_the_bounds() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for trial in 0..20 {
            let l0: f64 = rng.gen_range(0.05..0.45);
            let l1: f64 = rng.gen_range(0.05..(0.95 - l0).min(0.45));
            let n = rng.gen_range(1..=3);
            let params = FluidParams::uniform(l0, l1, n, 1.0, 1.0).unwrap();
            // draw a stable common cycle: margins over the minimal ratios
            let slack = 1.0 - l0 - l1;
            let u = (2.0 / slack) * rng.gen_range(1.05..3.0);
            let g_lo = l0 * u;
            let g_hi = u - 2.0 - l1 * u;
            if g_hi <= g_lo {
                continue;
            }
            let g = rng.gen_range(g_lo..g_hi);
            let r = u - 2.0 - g;
            let offsets = (0..n).map(|_| rng.gen_range(0.0..u * 0.999)).collect();
            let schedule = Schedule::uniform(g, r, offsets, 1.0, 1.0).unwrap();
            assert!(check_stability(&params, &schedule).unwrap().all_stable());

            let traj = simulate_fluid(&params, &schedule, 80.0 * u).unwrap();
            let bounds = prop1_lower_bounds(&params, &schedule).unwrap();
            assert!(
                traj.avenue_avg[0] >= bounds.phi1 - 1e-9,
                "trial {trial}: phi1 {} below bound {}",
                traj.avenue_avg[0],
                bounds.phi1
            );
            assert!(traj.avenue_avg[0] >= bounds.phi1_free - 1e-9);
            for i in 0..n {
                assert!(traj.cross_avg[i] >= bounds.psi[i] - 1e-9);
                assert!(traj.cross_avg[i] >= bounds.psi_free[i] - 1e-9);
            }
        }
    }

    #[test]
    fn desynchronized_node_pays_the_w_squared_penalty() {
        let params = FluidParams::uniform(0.3, 0.25, 3, 1.0, 1.0).unwrap();
        let base = greenwave_schedule(&params, 0.3).unwrap();
        let u = base.cycle(0);
        let w = 0.8;
        let mut offsets = vec![0.0; 3];
        offsets[2] = w;
        let schedule =
            Schedule::uniform(base.green[0], base.red[0], offsets, 1.0, 1.0).unwrap();
        let traj = simulate_fluid(&params, &schedule, 120.0 * u).unwrap();
        let penalty = params.lambda0 * w * w / (2.0 * (1.0 - params.lambda0) * u);
        assert!(
            traj.avenue_avg[2] >= penalty - 1e-9,
            "node 3 average {} below desync penalty {penalty}",
            traj.avenue_avg[2]
        );
        // and the synchronized variant keeps node 3 empty
        let synced = simulate_fluid(&params, &base, 120.0 * u).unwrap();
        assert_eq!(synced.avenue_avg[2], 0.0);
    }

    #[test]
    fn unstable_schedule_is_reported() {
        let params = FluidParams::uniform(0.5, 0.25, 1, 1.0, 1.0).unwrap();
        // green share far below lambda0
        let schedule = Schedule::uniform(1.0, 3.0, vec![0.0], 1.0, 1.0).unwrap();
        let err = simulate_fluid_opts(
            &params,
            &schedule,
            SimOptions {
                horizon: 3000.0,
                instability_bound: 50.0,
            },
        );
        assert!(matches!(err, Err(FluidError::UnstableSchedule(_))));
    }
}
