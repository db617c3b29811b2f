use criterion::{criterion_group, criterion_main, Criterion};
use sat_bench::ring_map;
use sat_core::belief::{OccupancyBelief, SharedOccupancyBelief};
use sat_core::config::ScenarioConfig;
use sat_core::entities::{AgentState, SensorModel};
use sat_core::harness::run_episode_quiet;
use sat_core::planning::{gen_search_candidates, j_explore, GainScratch};
use sat_core::prediction::{lstm_forward, PredictorWeights, Point};
use sat_core::world::{plan_path, Pose};
use std::hint::black_box;

fn bench_plan_path(c: &mut Criterion) {
    let map = ring_map();
    let (a, b) = (Pose::new(1.5, 1.5), Pose::new(25.5, 25.5));
    c.bench_function("plan_path ring 50x50", |bn| bn.iter(|| plan_path(&map, black_box(&a), black_box(&b)).unwrap()));
}

fn bench_j_explore(c: &mut Criterion) {
    let map = ring_map();
    let belief = SharedOccupancyBelief::from_single(&OccupancyBelief::new(0, &map, 0.0));
    let sensor = SensorModel::new(6.0, 0.1, 0.0, 0.7, 1.3).unwrap();
    let agent = AgentState::new(0, Pose::new(1.5, 1.5), 0.4, sensor);
    let tau = gen_search_candidates(&agent, &[Pose::new(45.5, 45.5)], &map, 1.0, 0.0).remove(0);
    let mut scratch = GainScratch::default();
    c.bench_function("j_explore long path", |bn| bn.iter(|| j_explore(&belief, black_box(&tau), &sensor, &map, &mut scratch)));
}

fn bench_lstm(c: &mut Criterion) {
    let w = PredictorWeights::default_trained();
    let input: Vec<Point> = (0..10).map(|k| [k as f64 * 0.04, (k as f64 * 0.2).sin() * 0.1]).collect();
    c.bench_function("lstm_forward", |bn| bn.iter(|| lstm_forward(&w, black_box(&input)).unwrap()));
}

fn bench_episode(c: &mut Criterion) {
    let cfg = ScenarioConfig { seed: 1, ..ScenarioConfig::default() };
    let mut g = c.benchmark_group("episode");
    g.sample_size(10);
    g.bench_function("hybrid open 4x5", |bn| bn.iter(|| run_episode_quiet(black_box(&cfg)).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_plan_path, bench_j_explore, bench_lstm, bench_episode);
criterion_main!(benches);
