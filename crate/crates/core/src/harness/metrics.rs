//! Trajectory metrics: discounted congestion cost, phase synchrony, and the
//! greenwave detector.

use serde::{Deserialize, Serialize};

use crate::env::Trajectory;

/// Discounted congestion cost `-(1/T) sum_{t=0}^{T} gamma^t |X(t)|^2` over
/// the first `t_end + 1` state slots.
pub fn discounted_cost(costs: &[f64], gamma: f64, t_end: usize) -> f64 {
    assert!(
        costs.len() > t_end,
        "trajectory has {} cost slots, horizon needs {}",
        costs.len(),
        t_end + 1
    );
    assert!(t_end >= 1, "horizon must be >= 1");
    let mut factor = 1.0;
    let mut total = 0.0;
    for &c in &costs[..=t_end] {
        total += factor * c;
        factor *= gamma;
    }
    -total / t_end as f64
}

pub fn discounted_cost_of(traj: &Trajectory, gamma: f64, t_end: usize) -> f64 {
    discounted_cost(&traj.costs(), gamma, t_end)
}

/// Fraction of unordered intersection pairs sharing a phase at slot `t`.
fn pair_synchrony(phases: &[u8]) -> f64 {
    let n = phases.len();
    debug_assert!(n >= 2);
    let mut equal = 0usize;
    let mut total = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            total += 1;
            equal += usize::from(phases[i] == phases[j]);
        }
    }
    equal as f64 / total as f64
}

/// Time-averaged pair synchrony over the whole trajectory.
pub fn synchrony_index(traj: &Trajectory) -> f64 {
    assert!(traj.intersections() >= 2, "synchrony needs >= 2 intersections");
    let states = traj.states();
    let total: f64 = states.iter().map(|s| pair_synchrony(&s.phases)).sum();
    total / states.len() as f64
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GreenwaveReport {
    pub flag: bool,
    pub threshold: f64,
    pub window: usize,
    /// Start slot of the window with the highest synchrony.
    pub best_window_start: usize,
    pub best_window_synchrony: f64,
    /// Green-onset lag per adjacent avenue pair (positive: downstream
    /// switches later, a travelling wave; 0: simultaneous).
    pub onset_lags: Vec<i64>,
}

/// Sliding-window greenwave detection: the flag raises when some window of
/// the trajectory keeps pairwise phase synchrony at or above the threshold.
/// Lags maximize the cross-correlation of adjacent green indicators within
/// `max_lag` (ties resolve toward the smallest magnitude, simultaneous
/// first).
pub fn detect_greenwave(
    traj: &Trajectory,
    cross_streets: usize,
    window: usize,
    threshold: f64,
    max_lag: usize,
) -> GreenwaveReport {
    let n = traj.intersections();
    assert!(n >= 2, "greenwave detection needs >= 2 intersections");
    assert!(cross_streets >= 1 && n % cross_streets == 0, "grid shape");
    let states = traj.states();
    let slots = states.len();
    assert!(slots >= window && window >= 1, "trajectory shorter than window");

    let per_slot: Vec<f64> = states.iter().map(|s| pair_synchrony(&s.phases)).collect();
    let mut best_start = 0usize;
    let mut best: f64 = -1.0;
    let mut sum: f64 = per_slot[..window].iter().sum();
    if sum / window as f64 > best {
        best = sum / window as f64;
    }
    for start in 1..=slots - window {
        sum += per_slot[start + window - 1] - per_slot[start - 1];
        let avg = sum / window as f64;
        if avg > best {
            best = avg;
            best_start = start;
        }
    }

    // green-indicator sequences per intersection
    let green: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            states
                .iter()
                .map(|s| f64::from(s.phases[i] == 0))
                .collect()
        })
        .collect();
    let mut onset_lags = Vec::new();
    for row_start in (0..n).step_by(cross_streets) {
        for i in row_start..row_start + cross_streets - 1 {
            onset_lags.push(best_lag(&green[i], &green[i + 1], max_lag));
        }
    }

    GreenwaveReport {
        flag: best >= threshold,
        threshold,
        window,
        best_window_start: best_start,
        best_window_synchrony: best,
        onset_lags,
    }
}

/// Lag of `b` relative to `a` maximizing their correlation. Every lag is
/// scored over the same fixed time window so exact periodic ties stay
/// exact, and ties resolve toward the smallest magnitude (non-negative
/// first).
fn best_lag(a: &[f64], b: &[f64], max_lag: usize) -> i64 {
    let len = a.len() as i64;
    let max_lag = (max_lag as i64).min((len - 1) / 3);
    let (lo, hi) = (max_lag, len - max_lag);
    let mut best_lag = 0i64;
    let mut best_score = f64::NEG_INFINITY;
    let mut lags: Vec<i64> = (-max_lag..=max_lag).collect();
    lags.sort_by_key(|&l| (l.abs(), l < 0));
    for lag in lags {
        let mut score = 0.0;
        for t in lo..hi {
            score += a[t as usize] * b[(t + lag) as usize];
        }
        if score > best_score {
            best_score = score;
            best_lag = lag;
        }
    }
    best_lag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Snapshot;

    fn phases_trajectory(phase_rows: &[Vec<u8>]) -> Trajectory {
        let n = phase_rows[0].len();
        let snap = |phases: &Vec<u8>| Snapshot {
            queues: vec![[0; 4]; n],
            phases: phases.clone(),
        };
        let mut traj = Trajectory::new(snap(&phase_rows[0]));
        for row in &phase_rows[1..] {
            traj.push(vec![0; n], 0.0, snap(row));
        }
        traj
    }

    #[test]
    fn discounted_cost_edge_cases() {
        // all-zero trajectory
        assert_eq!(discounted_cost(&[0.0; 11], 0.99, 10), 0.0);
        // gamma = 1, constant c: -c (T+1) / T
        let costs = vec![3.0; 6];
        assert!((discounted_cost(&costs, 1.0, 5) - (-3.0 * 6.0 / 5.0)).abs() < 1e-15);
        // hand case: gamma = 0.5, costs 4, 4, T = 1
        assert_eq!(discounted_cost(&[4.0, 4.0], 0.5, 1), -6.0);
    }

    #[test]
    fn synchrony_extremes() {
        let all_equal = phases_trajectory(&[vec![0, 0, 0], vec![2, 2, 2], vec![1, 1, 1]]);
        assert_eq!(synchrony_index(&all_equal), 1.0);
        let never_equal = phases_trajectory(&[vec![0, 1], vec![2, 3], vec![1, 0]]);
        assert_eq!(synchrony_index(&never_equal), 0.0);
    }

    #[test]
    fn random_phases_sit_near_one_quarter() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        let rows: Vec<Vec<u8>> = (0..4000)
            .map(|_| (0..6).map(|_| rng.gen_range(0..4)).collect())
            .collect();
        let traj = phases_trajectory(&rows);
        let s = synchrony_index(&traj);
        assert!((s - 0.25).abs() < 0.02, "synchrony {s}");
    }

    #[test]
    fn synchronized_trajectory_raises_the_flag_with_zero_lags() {
        let pattern = [0u8, 0, 1, 2, 2, 3];
        let rows: Vec<Vec<u8>> = (0..120)
            .map(|t| vec![pattern[t % pattern.len()]; 4])
            .collect();
        let traj = phases_trajectory(&rows);
        let report = detect_greenwave(&traj, 4, 50, 0.9, 5);
        assert!(report.flag);
        assert_eq!(report.best_window_synchrony, 1.0);
        assert_eq!(report.onset_lags, vec![0, 0, 0]);
    }

    #[test]
    fn staggered_cycle_reports_unit_lags() {
        // node n runs the same cycle delayed by n slots
        let pattern = [0u8, 0, 0, 1, 2, 2, 3];
        let p = pattern.len();
        let rows: Vec<Vec<u8>> = (0..140)
            .map(|t| (0..4).map(|n| pattern[(t + p - n % p) % p]).collect())
            .collect();
        let traj = phases_trajectory(&rows);
        let report = detect_greenwave(&traj, 4, 40, 0.9, 3);
        assert_eq!(report.onset_lags, vec![1, 1, 1]);
        // staggered phases are mostly unequal
        assert!(!report.flag);
    }

    #[test]
    fn random_trajectories_do_not_raise_the_flag() {
        use rand::{Rng, SeedableRng};
        for seed in 0..100 {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let rows: Vec<Vec<u8>> = (0..151)
                .map(|_| (0..3).map(|_| rng.gen_range(0..4)).collect())
                .collect();
            let traj = phases_trajectory(&rows);
            let report = detect_greenwave(&traj, 3, 50, 0.9, 5);
            assert!(!report.flag, "seed {seed} raised the flag");
        }
    }
}
