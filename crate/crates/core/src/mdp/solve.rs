//! Policy iteration and value iteration on the truncated kernel.
//!
//! Stage rewards are the congestion cost of the current state, so state
//! values satisfy `V(s) = r(s) + gamma * max_a sum_s' p(s,s';a) V(s')`.
//! The environment hands out rewards on the post-step state instead; both
//! formulations rank actions identically, and [`SolveResult::env_q`]
//! exposes the post-step-aligned action values for comparisons against
//! learned Q functions.

use super::{MdpError, PolicyTable, TransitionModel, ValueTable};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Residual target for iterative policy evaluation.
    pub eval_tol: f64,
    pub max_eval_sweeps: usize,
    pub max_policy_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eval_tol: 1e-10,
            max_eval_sweeps: 1_000_000,
            max_policy_iterations: 1_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub policy: PolicyTable,
    pub values: ValueTable,
    pub gamma: f64,
    pub sweeps: usize,
}

fn expected_value(model: &TransitionModel, values: &[f64], state: usize, action: u8) -> f64 {
    model
        .successors(state, action)
        .iter()
        .map(|&(next, p)| p * values[next as usize])
        .sum()
}

/// `Q(s, a) = r(s) + gamma * E[V(s')]` for both actions.
pub fn action_values(model: &TransitionModel, values: &[f64], gamma: f64, state: usize) -> [f64; 2] {
    let r = model.reward(state);
    [
        r + gamma * expected_value(model, values, state, 0),
        r + gamma * expected_value(model, values, state, 1),
    ]
}

/// Greedy policy with ties broken toward action 0 (continue).
pub fn greedy_policy(model: &TransitionModel, values: &ValueTable, gamma: f64) -> PolicyTable {
    let actions = (0..model.len())
        .map(|s| {
            let [q0, q1] = action_values(model, &values.values, gamma, s);
            u8::from(q1 > q0)
        })
        .collect();
    PolicyTable { actions }
}

/// Sup-norm Bellman optimality residual of a value table.
pub fn bellman_residual(model: &TransitionModel, values: &ValueTable, gamma: f64) -> f64 {
    (0..model.len())
        .map(|s| {
            let [q0, q1] = action_values(model, &values.values, gamma, s);
            (values.values[s] - q0.max(q1)).abs()
        })
        .fold(0.0, f64::max)
}

fn check_gamma(gamma: f64) -> Result<(), MdpError> {
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(MdpError::InvalidParameter(format!(
            "discount factor {gamma} outside (0, 1)"
        )));
    }
    Ok(())
}

/// Iterative (Gauss-Seidel) policy evaluation to the requested residual.
fn evaluate_policy(
    model: &TransitionModel,
    policy: &PolicyTable,
    gamma: f64,
    values: &mut Vec<f64>,
    opts: &SolveOptions,
) -> Result<usize, MdpError> {
    for sweep in 0..opts.max_eval_sweeps {
        let mut residual: f64 = 0.0;
        for s in 0..model.len() {
            let updated =
                model.reward(s) + gamma * expected_value(model, values, s, policy.actions[s]);
            residual = residual.max((updated - values[s]).abs());
            values[s] = updated;
        }
        if residual < opts.eval_tol {
            return Ok(sweep + 1);
        }
    }
    Err(MdpError::NonConvergence(format!(
        "policy evaluation still above {} after {} sweeps; check gamma or truncation",
        opts.eval_tol, opts.max_eval_sweeps
    )))
}

/// Howard policy iteration: evaluate, improve greedily, repeat until the
/// policy is stable under one-step lookahead.
pub fn policy_iteration(
    model: &TransitionModel,
    gamma: f64,
    opts: SolveOptions,
) -> Result<SolveResult, MdpError> {
    check_gamma(gamma)?;
    let mut policy = PolicyTable {
        actions: vec![0; model.len()],
    };
    let mut values = vec![0.0; model.len()];
    let mut total_sweeps = 0;
    for _ in 0..opts.max_policy_iterations {
        total_sweeps += evaluate_policy(model, &policy, gamma, &mut values, &opts)?;
        let improved = greedy_policy(
            model,
            &ValueTable {
                values: values.clone(),
            },
            gamma,
        );
        if improved == policy {
            return Ok(SolveResult {
                policy,
                values: ValueTable { values },
                gamma,
                sweeps: total_sweeps,
            });
        }
        policy = improved;
    }
    Err(MdpError::NonConvergence(format!(
        "policy not stable after {} improvement rounds",
        opts.max_policy_iterations
    )))
}

/// Jacobi value iteration to a sup-norm residual below `tol`.
pub fn value_iteration(
    model: &TransitionModel,
    gamma: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<SolveResult, MdpError> {
    check_gamma(gamma)?;
    if !(tol > 0.0) {
        return Err(MdpError::InvalidParameter("tolerance must be > 0".into()));
    }
    let mut values = vec![0.0; model.len()];
    for sweep in 0..max_sweeps {
        let mut next = vec![0.0; model.len()];
        let mut residual: f64 = 0.0;
        for s in 0..model.len() {
            let [q0, q1] = action_values(model, &values, gamma, s);
            next[s] = q0.max(q1);
            residual = residual.max((next[s] - values[s]).abs());
        }
        values = next;
        if residual < tol {
            let table = ValueTable { values };
            let policy = greedy_policy(model, &table, gamma);
            return Ok(SolveResult {
                policy,
                values: table,
                gamma,
                sweeps: sweep + 1,
            });
        }
    }
    Err(MdpError::NonConvergence(format!(
        "value iteration residual above {tol} after {max_sweeps} sweeps"
    )))
}

impl SolveResult {
    /// Action gap `|Q(s,0) - Q(s,1)|`.
    pub fn action_gap(&self, model: &TransitionModel, state: usize) -> f64 {
        let [q0, q1] = action_values(model, &self.values.values, self.gamma, state);
        (q0 - q1).abs()
    }

    /// State value in the environment's reward convention (reward on the
    /// post-step state): `V_env(s) = (V(s) + Z(s)) / gamma`.
    pub fn env_value(&self, model: &TransitionModel, state: usize) -> f64 {
        (self.values.values[state] - model.reward(state)) / self.gamma
    }

    /// Action value in the environment's reward convention:
    /// `Q_env(s,a) = E[-Z(s') + gamma * V_env(s')]`.
    pub fn env_q(&self, model: &TransitionModel, state: usize, action: u8) -> f64 {
        model
            .successors(state, action)
            .iter()
            .map(|&(next, p)| {
                let n = next as usize;
                p * (model.reward(n) + self.gamma * self.env_value(model, n))
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{LightPhase, PassingRates, SingleState};
    use crate::mdp::{build_transitions, TruncatedSpace};

    fn model(x_max: u64, p: f64) -> TransitionModel {
        build_transitions(TruncatedSpace::new(x_max), p, p, PassingRates::MODEL).unwrap()
    }

    #[test]
    fn zero_arrivals_empty_state_has_zero_value() {
        let m = model(8, 0.0);
        let result = policy_iteration(&m, 0.95, SolveOptions::default()).unwrap();
        for phase in LightPhase::all() {
            let idx = m.space().index(&SingleState::new(0, 0, phase));
            assert!(result.values.values[idx].abs() < 1e-9);
        }
        // queues drain, so every value is finite and non-positive
        assert!(result.values.values.iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn policy_and_value_iteration_agree() {
        let m = model(10, 0.25);
        let gamma = 0.95;
        let pi = policy_iteration(&m, gamma, SolveOptions::default()).unwrap();
        let vi = value_iteration(&m, gamma, 1e-12, 100_000).unwrap();
        let sup = pi
            .values
            .values
            .iter()
            .zip(&vi.values.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        // evaluation residual 1e-10 bounds the value error by ~1/(1-gamma)
        assert!(sup < 1e-8, "value tables differ by {sup}");
        for s in 0..m.len() {
            if pi.action_gap(&m, s) > 1e-9 {
                assert_eq!(pi.policy.actions[s], vi.policy.actions[s], "state {s}");
            }
        }
        assert!(bellman_residual(&m, &pi.values, gamma) < 1e-8);
        assert!(bellman_residual(&m, &vi.values, gamma) < 1e-8);
    }

    #[test]
    fn symmetric_arrivals_give_a_symmetric_value_table() {
        let m = model(8, 0.3);
        let gamma = 0.95;
        let result = policy_iteration(&m, gamma, SolveOptions::default()).unwrap();
        let space = m.space();
        for s in space.states() {
            let mirrored = SingleState::new(
                s.x2,
                s.x1,
                LightPhase::new((s.phase.value() + 2) % 4).unwrap(),
            );
            let a = result.values.values[space.index(&s)];
            let b = result.values.values[space.index(&mirrored)];
            assert!(
                (a - b).abs() < 1e-8,
                "asymmetry at {s:?}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn value_iteration_respects_the_contraction_bound() {
        let m = model(8, 0.25);
        let gamma: f64 = 0.9;
        let tol = 1e-8;
        // first Jacobi sweep from zero has residual max |r(s)|
        let r0: f64 = (0..m.len())
            .map(|s| m.reward(s).abs())
            .fold(0.0, f64::max);
        let bound = ((r0 / tol).ln() / (1.0 / gamma).ln()).ceil() as usize + 2;
        let result = value_iteration(&m, gamma, tol, 100_000).unwrap();
        assert!(
            result.sweeps <= bound,
            "took {} sweeps, contraction bound {}",
            result.sweeps,
            bound
        );
    }

    #[test]
    fn nonconvergence_is_reported() {
        let m = model(4, 0.25);
        let err = value_iteration(&m, 0.99, 1e-12, 3);
        assert!(matches!(err, Err(MdpError::NonConvergence(_))));
        let err = policy_iteration(
            &m,
            0.99,
            SolveOptions {
                max_eval_sweeps: 2,
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(MdpError::NonConvergence(_))));
    }

    #[test]
    fn env_q_is_consistent_with_env_value() {
        let m = model(6, 0.25);
        let gamma = 0.95;
        let result = policy_iteration(&m, gamma, SolveOptions::default()).unwrap();
        // V_env(s) = max_a Q_env(s, a), and the argmax matches the policy
        for s in 0..m.len() {
            let q0 = result.env_q(&m, s, 0);
            let q1 = result.env_q(&m, s, 1);
            let v = result.env_value(&m, s);
            assert!((v - q0.max(q1)).abs() < 1e-8, "state {s}");
            if (q0 - q1).abs() > 1e-9 {
                assert_eq!(result.policy.actions[s], u8::from(q1 > q0));
            }
        }
    }
}
