//! Policy structure analysis: threshold curves, agreement metrics, and
//! visitation weights.

use rand_chacha::ChaCha12Rng;

use crate::env::{ArrivalKind, ArrivalMode, ArrivalModel, SingleEnv, SingleState};

use super::{PolicyTable, TransitionModel, TruncatedSpace};

/// Per-x1 switching threshold of a policy at a fixed phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdCurve {
    pub phase: u8,
    /// `thresholds[x1]` = smallest x2 with action = switch, `None` if the
    /// policy never switches along that column.
    pub thresholds: Vec<Option<u64>>,
    /// Whether the switch region is upward-closed in x2 for every x1.
    pub upward_closed: bool,
}

/// Scans the policy at the given phase: for each x1, the smallest x2 whose
/// action is switch, plus whether the region above each threshold switches
/// uniformly (the thresholding structure of the optimal policy).
pub fn extract_threshold_curve(
    space: &TruncatedSpace,
    policy: &PolicyTable,
    phase: u8,
) -> ThresholdCurve {
    let w = space.x_max() + 1;
    let mut thresholds = Vec::with_capacity(w as usize);
    let mut upward_closed = true;
    for x1 in 0..w {
        let mut tau = None;
        for x2 in 0..w {
            let idx = space.index(&SingleState::new(
                x1,
                x2,
                crate::env::LightPhase::new(phase).expect("phase in range"),
            ));
            let switches = policy.actions[idx] == 1;
            match tau {
                None if switches => tau = Some(x2),
                Some(_) if !switches => upward_closed = false,
                _ => {}
            }
        }
        thresholds.push(tau);
    }
    ThresholdCurve {
        phase,
        thresholds,
        upward_closed,
    }
}

/// Weighted fraction of states on which two policies pick the same action.
/// Weights need not be normalized; zero-weight states are ignored.
pub fn policy_agreement(a: &PolicyTable, b: &PolicyTable, weights: &[f64]) -> f64 {
    assert_eq!(a.actions.len(), b.actions.len(), "policies over same space");
    assert_eq!(a.actions.len(), weights.len(), "weights over same space");
    let mut total = 0.0;
    let mut agree = 0.0;
    for ((&x, &y), &w) in a.actions.iter().zip(&b.actions).zip(weights) {
        total += w;
        if x == y {
            agree += w;
        }
    }
    if total == 0.0 {
        1.0
    } else {
        agree / total
    }
}

/// Exact stationary visitation of the chain induced by a policy, by power
/// iteration from the empty state.
pub fn stationary_distribution(
    model: &TransitionModel,
    policy: &PolicyTable,
    tol: f64,
    max_iters: usize,
) -> Vec<f64> {
    let n = model.len();
    let start = model
        .space()
        .index(&SingleState::new(0, 0, crate::env::LightPhase::GREEN));
    let mut dist = vec![0.0; n];
    dist[start] = 1.0;
    for _ in 0..max_iters {
        let mut next = vec![0.0; n];
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &(j, p) in model.successors(s, policy.actions[s]) {
                next[j as usize] += mass * p;
            }
        }
        let delta: f64 = dist
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .sum();
        dist = next;
        if delta < tol {
            break;
        }
    }
    dist
}

/// Monte-Carlo visitation frequencies of a policy run in the environment,
/// counted on the truncated space (states outside the box clamp onto it).
pub fn simulated_visitation(
    model: &TransitionModel,
    policy: &PolicyTable,
    steps: usize,
    rng: ChaCha12Rng,
) -> Vec<f64> {
    let space = model.space();
    let (p1, p2) = model.arrival_probs();
    let arrivals = ArrivalModel {
        kind: ArrivalKind::Bernoulli {
            avenue: p1,
            cross: p2,
        },
        mode: ArrivalMode::PerIntersectionExternal,
    };
    let mut env = SingleEnv::new(arrivals, model.rates(), rng);
    let mut counts = vec![0u64; space.len()];
    for _ in 0..steps {
        let s = env.state();
        let clamped = SingleState::new(
            s.x1.min(space.x_max()),
            s.x2.min(space.x_max()),
            s.phase,
        );
        let idx = space.index(&clamped);
        counts[idx] += 1;
        env.step(policy.actions[idx]);
    }
    counts.iter().map(|&c| c as f64 / steps as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{LightPhase, PassingRates};
    use crate::mdp::{build_transitions, policy_iteration, SolveOptions};

    fn space() -> TruncatedSpace {
        TruncatedSpace::new(8)
    }

    fn constant_policy(space: &TruncatedSpace, bit: u8) -> PolicyTable {
        PolicyTable {
            actions: vec![bit; space.len()],
        }
    }

    #[test]
    fn always_continue_has_no_thresholds() {
        let sp = space();
        let curve = extract_threshold_curve(&sp, &constant_policy(&sp, 0), 0);
        assert!(curve.thresholds.iter().all(Option::is_none));
        assert!(curve.upward_closed);
    }

    #[test]
    fn constructed_difference_policy_yields_shifted_thresholds() {
        let sp = space();
        let mut actions = vec![0u8; sp.len()];
        for s in sp.states() {
            if s.phase == LightPhase::GREEN && s.x2 >= s.x1 + 3 {
                actions[sp.index(&s)] = 1;
            }
        }
        let curve = extract_threshold_curve(&sp, &PolicyTable { actions }, 0);
        assert!(curve.upward_closed);
        for (x1, tau) in curve.thresholds.iter().enumerate() {
            let expect = x1 as u64 + 3;
            if expect <= sp.x_max() {
                assert_eq!(*tau, Some(expect));
            } else {
                assert_eq!(*tau, None);
            }
        }
    }

    #[test]
    fn non_monotone_region_is_flagged() {
        let sp = space();
        let mut actions = vec![0u8; sp.len()];
        let a = sp.index(&SingleState::new(2, 3, LightPhase::GREEN));
        actions[a] = 1; // switch at x2 = 3 but not above
        let curve = extract_threshold_curve(&sp, &PolicyTable { actions }, 0);
        assert!(!curve.upward_closed);
    }

    #[test]
    fn agreement_extremes() {
        let sp = space();
        let zeros = constant_policy(&sp, 0);
        let ones = constant_policy(&sp, 1);
        let uniform = vec![1.0; sp.len()];
        assert_eq!(policy_agreement(&zeros, &zeros, &uniform), 1.0);
        assert_eq!(policy_agreement(&zeros, &ones, &uniform), 0.0);
        assert_eq!(policy_agreement(&ones, &ones, &uniform), 1.0);
    }

    #[test]
    fn stationary_distribution_sums_to_one_and_matches_simulation() {
        let model = build_transitions(space(), 0.25, 0.25, PassingRates::MODEL).unwrap();
        let solved = policy_iteration(&model, 0.95, SolveOptions::default()).unwrap();
        let exact = stationary_distribution(&model, &solved.policy, 1e-12, 20_000);
        let total: f64 = exact.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);

        use rand::SeedableRng;
        let sim = simulated_visitation(
            &model,
            &solved.policy,
            200_000,
            ChaCha12Rng::seed_from_u64(5),
        );
        // compare on the heavy states only; Monte Carlo noise elsewhere
        for (i, (&e, &s)) in exact.iter().zip(&sim).enumerate() {
            if e > 0.01 {
                assert!(
                    (e - s).abs() < 0.01,
                    "state {i}: exact {e:.4} vs simulated {s:.4}"
                );
            }
        }
    }
}
