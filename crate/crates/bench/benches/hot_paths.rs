//! Criterion benchmarks for the hot paths: environment stepping, solver
//! sweeps, network passes, and the fluid simulator.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use greenwave_core::env::{
    Action, ArrivalKind, ArrivalMode, ArrivalModel, GridEnv, GridTopology, PassingRates, SingleEnv,
};
use greenwave_core::fluid::{greenwave_schedule, simulate_fluid, FluidParams};
use greenwave_core::mdp::{build_transitions, value_iteration, TruncatedSpace};
use greenwave_core::nn::{Activation, LayerSpec, Mat, Mlp};

fn bernoulli(avenue: f64, cross: f64, mode: ArrivalMode) -> ArrivalModel {
    ArrivalModel {
        kind: ArrivalKind::Bernoulli { avenue, cross },
        mode,
    }
}

fn env_steps(c: &mut Criterion) {
    c.bench_function("single_env_step", |b| {
        let mut env = SingleEnv::new(
            bernoulli(0.25, 0.25, ArrivalMode::PerIntersectionExternal),
            PassingRates::MODEL,
            ChaCha12Rng::seed_from_u64(1),
        );
        let mut t = 0u8;
        b.iter(|| {
            t = (t + 1) % 5;
            env.step(u8::from(t == 0))
        });
    });

    c.bench_function("grid_env_step_5x10", |b| {
        let topo = GridTopology::new(5, 10).unwrap();
        let mut env = GridEnv::new(
            topo,
            bernoulli(0.5, 0.25, ArrivalMode::BoundaryChained),
            PassingRates::MODEL,
            ChaCha12Rng::seed_from_u64(2),
        );
        let action = Action::uniform(0, topo.intersections());
        b.iter(|| env.step(&action).unwrap());
    });
}

fn solver_sweeps(c: &mut Criterion) {
    let model =
        build_transitions(TruncatedSpace::new(20), 0.25, 0.25, PassingRates::MODEL).unwrap();
    c.bench_function("value_iteration_x20", |b| {
        b.iter(|| value_iteration(&model, 0.95, 1e-6, 10_000).unwrap());
    });
}

fn network_passes(c: &mut Criterion) {
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let net = Mlp::new_seeded(
        &[
            LayerSpec::new(15, 128, Activation::Tanh),
            LayerSpec::new(128, 128, Activation::Tanh),
            LayerSpec::new(128, 3, Activation::SteepenedSigmoid(10.0)),
        ],
        &mut rng,
    )
    .unwrap();
    let x = Mat::from_fn(64, 15, |i, j| ((i * 7 + j) % 13) as f64 * 0.07);
    c.bench_function("mlp_forward_batch64", |b| {
        b.iter(|| net.forward(&x).unwrap());
    });
    c.bench_function("mlp_forward_backward_batch64", |b| {
        let upstream = Mat::from_fn(64, 3, |_, _| 1.0 / 64.0);
        b.iter(|| {
            let cache = net.forward_cached(&x).unwrap();
            net.backward(&cache, &upstream).unwrap()
        });
    });
}

fn fluid_sim(c: &mut Criterion) {
    let params = FluidParams::uniform(0.3, 0.25, 5, 1.0, 1.0).unwrap();
    let schedule = greenwave_schedule(&params, 0.1).unwrap();
    let horizon = 100.0 * schedule.cycle(0);
    c.bench_function("fluid_simulate_100_cycles", |b| {
        b.iter(|| simulate_fluid(&params, &schedule, horizon).unwrap());
    });
}

criterion_group!(benches, env_steps, solver_sweeps, network_passes, fluid_sim);
criterion_main!(benches);
