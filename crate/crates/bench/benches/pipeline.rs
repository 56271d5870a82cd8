use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use plantbridge::deploy::VelocityEstimator;
use plantbridge::ppo::{ppo_update, sample_action, Adam, Trajectory};
use plantbridge::{load_plant, make_env, EnvConfig, Observation, PolicyParams, PpoHyper, TwinPlant};
use plantbridge_refplant::isolated_copy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn env_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("env_step");

    let copy = isolated_copy().unwrap();
    let mut ffi = make_env(EnvConfig::default(), load_plant(copy.lib(), "aero").unwrap()).unwrap();
    ffi.reset(Some(0)).unwrap();
    group.bench_function("ffi", |b| {
        b.iter(|| {
            let r = ffi.step(black_box(1.5)).unwrap();
            if r.truncated {
                ffi.reset(None).unwrap();
            }
            r.reward
        })
    });

    let mut twin = make_env(EnvConfig::default(), TwinPlant::default()).unwrap();
    twin.reset(Some(0)).unwrap();
    group.bench_function("twin", |b| {
        b.iter(|| {
            let r = twin.step(black_box(1.5)).unwrap();
            if r.truncated {
                twin.reset(None).unwrap();
            }
            r.reward
        })
    });
    group.finish();
}

fn policy(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = PolicyParams::init(&mut rng);
    let obs = Observation { delta: 0.1, omega: -0.2 };
    c.bench_function("policy/forward", |b| b.iter(|| params.action_mean(black_box(&obs))));
    c.bench_function("policy/sample", |b| b.iter(|| sample_action(&params, black_box(&obs), (-24.0, 24.0), &mut rng)));
}

fn rollout(hyper: &PpoHyper, params: &PolicyParams) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut env = make_env(EnvConfig::default(), TwinPlant::default()).unwrap();
    let (mut obs, _) = env.reset(Some(1)).unwrap();
    let mut traj = Trajectory::with_capacity(hyper.rollout_horizon);
    for _ in 0..hyper.rollout_horizon {
        let s = sample_action(params, &obs, (-24.0, 24.0), &mut rng);
        let r = env.step(s.clipped).unwrap();
        traj.push(obs, s.raw, s.log_prob, r.reward, params.value(&obs));
        obs = if r.truncated {
            *traj.boundaries.last_mut().unwrap() = Some(params.value(&r.observation));
            env.reset(None).unwrap().0
        } else {
            r.observation
        };
    }
    traj.bootstrap_value = params.value(&obs);
    traj
}

fn update(c: &mut Criterion) {
    let hyper = PpoHyper::default();
    let params = PolicyParams::init(&mut ChaCha8Rng::seed_from_u64(0));
    let traj = rollout(&hyper, &params);
    let mut group = c.benchmark_group("ppo");
    group.sample_size(10);
    group.bench_function("update_2048x10_epochs", |b| {
        b.iter_batched(
            || (params.clone(), Adam::new(params.num_params(), hyper.learning_rate), ChaCha8Rng::seed_from_u64(2)),
            |(mut p, mut adam, mut rng)| ppo_update(&mut p, &mut adam, &traj, &hyper, &mut rng).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn estimator(c: &mut Criterion) {
    let mut est = VelocityEstimator::new(1.0, 0.1);
    let mut t = 0.0f64;
    c.bench_function("deploy/velocity_estimate", |b| {
        b.iter(|| {
            t += 0.1;
            est.update(black_box(t.sin()), 0.1)
        })
    });
}

criterion_group!(benches, env_step, policy, update, estimator);
criterion_main!(benches);
