// scratch calibration runs; not part of the deliverable surface
use std::time::Instant;

use greenwave_core::agents::{train_dqn, DqnConfig};
use greenwave_core::env::{ArrivalKind, ArrivalMode, ArrivalModel, PassingRates, SingleEnv};
use greenwave_core::harness::rng::{stream, STREAM_AGENT_INIT, STREAM_ENV, STREAM_EXPLORE};
use greenwave_core::mdp::{
    build_transitions, policy_agreement, policy_iteration, stationary_distribution, SolveOptions,
    TruncatedSpace,
};

fn main() {
    let t0 = Instant::now();
    let space = TruncatedSpace::new(30);
    let model = build_transitions(space, 0.25, 0.25, PassingRates::MODEL).unwrap();
    let solved = policy_iteration(&model, 0.99, SolveOptions::default()).unwrap();
    println!(
        "solve: {:.2?}, sweeps {}, switch fraction {:.3}",
        t0.elapsed(),
        solved.sweeps,
        solved.policy.actions.iter().map(|&a| a as usize).sum::<usize>() as f64
            / space.len() as f64
    );
    let t1 = Instant::now();
    let weights = stationary_distribution(&model, &solved.policy, 1e-12, 50_000);
    println!("stationary: {:.2?}", t1.elapsed());

    let arrivals = ArrivalModel {
        kind: ArrivalKind::Bernoulli {
            avenue: 0.25,
            cross: 0.25,
        },
        mode: ArrivalMode::PerIntersectionExternal,
    };
    let variants: Vec<(&str, DqnConfig)> = vec![
        (
            "C w128 60k lr decay",
            DqnConfig {
                hidden: vec![128, 128],
                steps: 60_000,
                eps_decay_steps: 20_000,
                lr: 1e-3,
                lr_end: 1e-5,
                queue_scale: 5.0,
                warmup: 1_000,
                ..DqnConfig::default()
            },
        ),
        (
            "D w64 60k lr decay",
            DqnConfig {
                hidden: vec![64, 64],
                steps: 60_000,
                eps_decay_steps: 20_000,
                lr: 1e-3,
                lr_end: 1e-5,
                queue_scale: 5.0,
                warmup: 1_000,
                ..DqnConfig::default()
            },
        ),
    ];
    for (name, cfg) in &variants {
        println!("== variant {name}");
    for seed in [101u64, 102, 103] {
        let t2 = Instant::now();
        let cfg = cfg.clone();
        let mut env = SingleEnv::new(arrivals, PassingRates::MODEL, stream(seed, STREAM_ENV));
        let mut init = stream(seed, STREAM_AGENT_INIT);
        let mut explore = stream(seed, STREAM_EXPLORE);
        let (agent, logs) = train_dqn(&mut env, cfg, &mut init, &mut explore);
        let table = agent.greedy_policy_table(&space);
        let agreement = policy_agreement(&solved.policy, &table, &weights);
        println!(
            "seed {seed}: train {:.2?}, agreement {agreement:.4}, last mean_queue {:.2}",
            t2.elapsed(),
            logs.last().unwrap().mean_queue
        );

        // disagreement mass binned by optimal action gap
        let mut rows: Vec<(usize, f64, f64)> = (0..space.len())
            .filter(|&s| table.actions[s] != solved.policy.actions[s] && weights[s] > 0.0)
            .map(|s| (s, weights[s], solved.action_gap(&model, s)))
            .collect();
        rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let bins = [1e-3, 1e-2, 1e-1, 1.0, 10.0, f64::INFINITY];
        let mut lo = 0.0;
        for &hi in &bins {
            let mass: f64 = rows
                .iter()
                .filter(|(_, _, g)| *g > lo && *g <= hi)
                .map(|(_, w, _)| w)
                .sum();
            println!("  gap ({lo:9.0e}, {hi:9.0e}]: disagreement mass {mass:.4}");
            lo = hi;
        }
        for (s, w, g) in rows.iter().take(8) {
            let st = space.state(*s);
            println!(
                "  top miss: ({}, {}, {}) w={w:.4} gap={g:.3e} opt={} dqn={}",
                st.x1,
                st.x2,
                st.phase.value(),
                solved.policy.actions[*s],
                table.actions[*s]
            );
        }
    }
    }
}
