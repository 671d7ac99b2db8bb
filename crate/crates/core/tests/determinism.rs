use ksi_core::diagnostics::mmd2;
use ksi_core::io::{encode_csv, encode_table};
use ksi_core::presets::{gauss2d_target, quadratic_features};
use ksi_core::rng::{self, Domain};
use ksi_core::{fit_table, generate, DataPairs, Diffusion, GenConfig, Schedule, ScheduleId, TableDrift};

fn pipeline(seed: u64, diffusion: Diffusion) -> (Vec<u8>, Vec<u8>) {
    let g = gauss2d_target();
    let s = Schedule::Trigonometric;
    let f = quadratic_features(2);
    let data = g.sample(1500, &mut rng::stream(seed, Domain::Target, 0));
    let pairs = DataPairs::with_generated_noise(data, seed).unwrap();
    let (table, _) = fit_table(&f, &pairs, &s, 40, 1e-8).unwrap();
    let drift = TableDrift::new(&table, &f).unwrap();
    let cfg = GenConfig {
        steps: 40,
        num_samples: 300,
        seed,
        schedule: ScheduleId::Trigonometric,
        diffusion,
    };
    let out = generate(&drift, &s, &cfg).unwrap();
    (encode_table(&table).unwrap(), encode_csv(&out.states, None))
}

#[test]
fn same_seed_same_bytes() {
    for mode in [Diffusion::Optimal, Diffusion::Zero, Diffusion::Constant(0.5)] {
        assert_eq!(pipeline(3, mode), pipeline(3, mode));
    }
}

#[test]
fn different_seed_different_bytes() {
    let (ta, sa) = pipeline(3, Diffusion::Optimal);
    let (tb, sb) = pipeline(4, Diffusion::Optimal);
    assert_ne!(ta, tb);
    assert_ne!(sa, sb);
}

#[test]
fn thread_count_does_not_change_results() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| pipeline(5, Diffusion::Optimal));
    let b = four.install(|| pipeline(5, Diffusion::Optimal));
    assert_eq!(a, b);
    let g = gauss2d_target();
    let x = g.sample(400, &mut rng::stream(5, Domain::Evaluation, 0));
    let y = g.sample(300, &mut rng::stream(6, Domain::Evaluation, 0));
    let ea = one.install(|| mmd2(x.view(), y.view(), None).unwrap());
    let eb = four.install(|| mmd2(x.view(), y.view(), None).unwrap());
    assert_eq!(ea.estimate.to_bits(), eb.estimate.to_bits());
    assert_eq!(ea.std_error.to_bits(), eb.std_error.to_bits());
}
