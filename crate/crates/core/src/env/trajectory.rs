//! Trajectory recording and CSV export/import.
//!
//! One CSV row per (time slot, intersection): `t, intersection, x1..x4,
//! phase, action, reward`. States are logged for t = 0..=T; the action bit
//! and the (network-wide) reward sit on the row of the slot they were taken
//! in, so the final state row leaves both empty.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{EnvError, GridState, SingleState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub queues: Vec<[u64; 4]>,
    pub phases: Vec<u8>,
}

impl Snapshot {
    pub fn from_single(state: &SingleState) -> Self {
        Snapshot {
            queues: vec![[state.x1, state.x2, 0, 0]],
            phases: vec![state.phase.value()],
        }
    }

    pub fn from_grid(state: &GridState) -> Self {
        Snapshot {
            queues: state.queues.clone(),
            phases: state.phases.iter().map(|p| p.value()).collect(),
        }
    }

    pub fn intersections(&self) -> usize {
        self.queues.len()
    }

    /// Congestion cost: sum of squared queue lengths over all flows.
    pub fn cost(&self) -> f64 {
        let mut total: u128 = 0;
        for cell in &self.queues {
            for &q in cell {
                total += q as u128 * q as u128;
            }
        }
        total as f64
    }

    pub fn total_queued(&self) -> u64 {
        self.queues.iter().flatten().sum()
    }
}

/// A rollout: states at t = 0..=T plus the action and reward of each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    states: Vec<Snapshot>,
    actions: Vec<Vec<u8>>,
    rewards: Vec<f64>,
}

impl Trajectory {
    pub fn new(initial: Snapshot) -> Self {
        Trajectory {
            states: vec![initial],
            actions: Vec::new(),
            rewards: Vec::new(),
        }
    }

    pub fn push(&mut self, action: Vec<u8>, reward: f64, next: Snapshot) {
        debug_assert_eq!(next.intersections(), self.intersections());
        debug_assert_eq!(action.len(), self.intersections());
        self.actions.push(action);
        self.rewards.push(reward);
        self.states.push(next);
    }

    /// Number of steps T (states run 0..=T).
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn intersections(&self) -> usize {
        self.states[0].intersections()
    }

    pub fn states(&self) -> &[Snapshot] {
        &self.states
    }

    pub fn actions(&self) -> &[Vec<u8>] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Congestion cost `|X(t)|^2` per time slot.
    pub fn costs(&self) -> Vec<f64> {
        self.states.iter().map(Snapshot::cost).collect()
    }

    /// Phase of intersection `n` at time `t`.
    pub fn phase(&self, t: usize, n: usize) -> u8 {
        self.states[t].phases[n]
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), EnvError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "intersection", "x1", "x2", "x3", "x4", "phase", "action", "reward"])
            .map_err(csv_err)?;
        for (t, snap) in self.states.iter().enumerate() {
            for n in 0..snap.intersections() {
                let q = snap.queues[n];
                let action = self.actions.get(t).map(|a| a[n].to_string()).unwrap_or_default();
                let reward = self
                    .rewards
                    .get(t)
                    .map(|r| format!("{r:?}"))
                    .unwrap_or_default();
                w.write_record([
                    t.to_string(),
                    n.to_string(),
                    q[0].to_string(),
                    q[1].to_string(),
                    q[2].to_string(),
                    q[3].to_string(),
                    snap.phases[n].to_string(),
                    action,
                    reward,
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(reader: impl Read) -> Result<Trajectory, EnvError> {
        #[derive(Deserialize, Serialize)]
        struct Row {
            t: usize,
            intersection: usize,
            x1: u64,
            x2: u64,
            x3: u64,
            x4: u64,
            phase: u8,
            action: Option<u8>,
            reward: Option<f64>,
        }

        let mut rows: Vec<Row> = Vec::new();
        let mut r = csv::Reader::from_reader(reader);
        for rec in r.deserialize() {
            rows.push(rec.map_err(csv_err)?);
        }
        if rows.is_empty() {
            return Err(EnvError::InvalidParameter("empty trajectory csv".into()));
        }
        let n = rows.iter().map(|r| r.intersection).max().unwrap() + 1;
        let t_max = rows.iter().map(|r| r.t).max().unwrap();
        if rows.len() != n * (t_max + 1) {
            return Err(EnvError::InvalidParameter(format!(
                "trajectory csv has {} rows, expected {} ({} intersections x {} slots)",
                rows.len(),
                n * (t_max + 1),
                n,
                t_max + 1
            )));
        }

        let mut states = vec![
            Snapshot {
                queues: vec![[0; 4]; n],
                phases: vec![0; n],
            };
            t_max + 1
        ];
        let mut actions = vec![vec![0u8; n]; t_max];
        let mut rewards = vec![f64::NAN; t_max];
        for row in rows {
            let snap = &mut states[row.t];
            snap.queues[row.intersection] = [row.x1, row.x2, row.x3, row.x4];
            snap.phases[row.intersection] = row.phase;
            if row.t < t_max {
                match row.action {
                    Some(a) => actions[row.t][row.intersection] = a,
                    None => {
                        return Err(EnvError::InvalidParameter(format!(
                            "missing action at t={} intersection={}",
                            row.t, row.intersection
                        )))
                    }
                }
                if let Some(rw) = row.reward {
                    rewards[row.t] = rw;
                }
            }
        }
        if rewards.iter().any(|r| r.is_nan()) {
            return Err(EnvError::InvalidParameter("missing reward column".into()));
        }
        Ok(Trajectory {
            states,
            actions,
            rewards,
        })
    }
}

fn csv_err(e: csv::Error) -> EnvError {
    EnvError::InvalidParameter(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{
        step_grid, Action, ArrivalMode, GridState, GridTopology, PassingRates,
    };

    #[test]
    fn csv_round_trip() {
        let topo = GridTopology::new(1, 2).unwrap();
        let mut state = GridState::empty(topo);
        state.queues[0] = [2, 1, 0, 0];
        let mut traj = Trajectory::new(Snapshot::from_grid(&state));
        for step in 0..5 {
            let bits = vec![u8::from(step % 2 == 0), 0];
            let action = Action::new(bits.clone()).unwrap();
            let res = step_grid(
                &state,
                &action,
                &[[0; 4]; 2],
                PassingRates::MODEL,
                ArrivalMode::BoundaryChained,
            )
            .unwrap();
            traj.push(bits, res.reward, Snapshot::from_grid(&res.next));
            state = res.next;
        }

        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let parsed = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(parsed, traj);
    }

    #[test]
    fn single_state_snapshot_cost_matches() {
        let s = SingleState::new(3, 4, crate::env::LightPhase::GREEN);
        assert_eq!(Snapshot::from_single(&s).cost(), 25.0);
    }
}
