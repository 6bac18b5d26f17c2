// scratch calibration for the grid agent; not part of the deliverable
use std::time::Instant;

use greenwave_core::agents::{train_ddpg, DdpgConfig};
use greenwave_core::baselines::{FixedCycleSpec, GridFixedCyclePolicy, GridPolicy};
use greenwave_core::env::{
    ArrivalKind, ArrivalMode, ArrivalModel, GridEnv, GridTopology, PassingRates, Snapshot,
    Trajectory,
};
use greenwave_core::harness::rng::{eval_stream, stream, STREAM_AGENT_INIT, STREAM_ENV, STREAM_EXPLORE};
use greenwave_core::harness::{detect_greenwave, synchrony_index};

fn arrivals() -> ArrivalModel {
    ArrivalModel {
        kind: ArrivalKind::Bernoulli {
            avenue: 0.5,
            cross: 0.25,
        },
        mode: ArrivalMode::BoundaryChained,
    }
}

fn eval_policy(mut act: impl FnMut(&greenwave_core::env::GridState) -> greenwave_core::env::Action, seed: u64, episodes: usize) -> (f64, Trajectory) {
    let topo = GridTopology::new(1, 3).unwrap();
    let mut queue_sum = 0.0;
    let mut last = None;
    for e in 0..episodes {
        let mut env = GridEnv::new(topo, arrivals(), PassingRates::MODEL, eval_stream(seed, e));
        let mut traj = Trajectory::new(Snapshot::from_grid(env.state()));
        for _ in 0..150 {
            queue_sum += env.state().total_queued() as f64;
            let action = act(env.state());
            let r = env.step(&action).unwrap();
            traj.push(action.bits().to_vec(), r.reward, Snapshot::from_grid(&r.next));
        }
        queue_sum += env.state().total_queued() as f64;
        last = Some(traj);
    }
    (queue_sum / (episodes * 151) as f64, last.unwrap())
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(45_000);
    let hidden: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(64);
    let tau: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.005);
    let rs: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let episodes = 10;

    // unstable baseline at these loads
    let (fc_queue, _) = {
        let mut p = GridFixedCyclePolicy::synchronized(FixedCycleSpec::default(), 3);
        eval_policy(move |s| p.act(s), 900, episodes)
    };
    println!("fixed-cycle avg queue {fc_queue:.3}");

    for seed in [201u64, 202, 203] {
        let t0 = Instant::now();
        let topo = GridTopology::new(1, 3).unwrap();
        let mut env = GridEnv::new(topo, arrivals(), PassingRates::MODEL, stream(seed, STREAM_ENV));
        let cfg = DdpgConfig {
            hidden_actor: vec![hidden, hidden],
            hidden_critic: vec![hidden, hidden],
            steps,
            tau,
            reward_scale: rs,
            warmup: 1_000,
            episode_len: 150,
            ..DdpgConfig::default()
        };
        let mut init = stream(seed, STREAM_AGENT_INIT);
        let mut explore = stream(seed, STREAM_EXPLORE);
        let (agent, logs) = train_ddpg(&mut env, cfg, &mut init, &mut explore);
        let train_time = t0.elapsed();

        let (queue, traj) = {
            let a = &agent;
            eval_policy(move |s| a.select(&a.encode(s), None).1, 900, episodes)
        };
        let sync = synchrony_index(&traj);
        let gw = detect_greenwave(&traj, 3, 50, 0.8, 10);
        println!(
            "seed {seed}: train {train_time:.0?}, eval queue {queue:.3} (fc {fc_queue:.3}), sync {sync:.3}, best window {:.3}, flag {}, lags {:?}, last train queue {:.2}",
            gw.best_window_synchrony,
            gw.flag,
            gw.onset_lags,
            logs.last().unwrap().mean_queue,
        );
    }
}
