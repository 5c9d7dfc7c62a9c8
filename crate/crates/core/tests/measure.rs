use proptest::prelude::*;
use radial_nls::functionals::DissipationSpec;
use radial_nls::measure::{
    run_indexed, stationary_average, EnsembleAccumulator, Functional, Histogram, HistogramRange, Observation,
    RunningStat, StationaryConfig,
};
use radial_nls::sde::{NoiseSpec, SdeConfig};

fn accumulator() -> EnsembleAccumulator {
    let range = HistogramRange { lo: 0.0, hi: 1.0, bins: 16 };
    EnsembleAccumulator::new(
        vec![Functional::Mass, Functional::MassRate],
        &range,
        &range,
        vec![0.1, 0.5],
        false,
    )
    .unwrap()
}

fn obs(m: f64, rate: f64) -> Observation {
    Observation {
        mass: m,
        energy: 2.0 * m,
        mass_rate: rate,
        values: vec![m, rate],
    }
}

proptest! {
    #[test]
    fn running_stat_merge_matches_sequential(
        xs in prop::collection::vec(-1e3f64..1e3, 1..200),
        split in 0usize..200,
    ) {
        let split = split.min(xs.len());
        let mut all = RunningStat::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (RunningStat::default(), RunningStat::default());
        xs[..split].iter().for_each(|&x| a.push(x));
        xs[split..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        prop_assert_eq!(a.count(), all.count());
        prop_assert!((a.mean() - all.mean()).abs() <= 1e-12 * (1.0 + all.mean().abs()));
        prop_assert!((a.variance() - all.variance()).abs() <= 1e-9 * (1.0 + all.variance()));
    }

    #[test]
    fn accumulator_merge_matches_sequential(
        data in prop::collection::vec((0.0f64..1.2, 0.0f64..5.0), 1..100),
        split in 0usize..100,
    ) {
        let split = split.min(data.len());
        let mut all = accumulator();
        data.iter().for_each(|&(m, r)| all.push(&obs(m, r)));
        let (mut a, mut b) = (accumulator(), accumulator());
        data[..split].iter().for_each(|&(m, r)| a.push(&obs(m, r)));
        data[split..].iter().for_each(|&(m, r)| b.push(&obs(m, r)));
        a.merge(&b).unwrap();
        prop_assert_eq!(a.count(), all.count());
        prop_assert_eq!(&a.mass_histogram, &all.mass_histogram);
        let (x, y) = (a.stat(Functional::MassRate).unwrap(), all.stat(Functional::MassRate).unwrap());
        prop_assert!((x.mean() - y.mean()).abs() <= 1e-12 * (1.0 + y.mean().abs()));
    }

    #[test]
    fn histogram_masses_sum_to_one(xs in prop::collection::vec(-0.5f64..1.5, 1..300)) {
        let mut h = Histogram::uniform(0.0, 1.0, 10).unwrap();
        xs.iter().for_each(|&x| h.push(x));
        prop_assert_eq!(h.total(), xs.len() as u64);
        prop_assert!((h.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(h.l1_distance(&h).unwrap(), 0.0);
    }
}

#[test]
fn run_indexed_keeps_index_order() {
    for workers in [1, 2, 4] {
        let out = run_indexed(workers, 50, |i| i * i).unwrap();
        assert_eq!(out, (0..50).map(|i| i * i).collect::<Vec<_>>());
    }
}

#[test]
fn stationary_statistics_do_not_depend_on_worker_count() {
    let dim = 4;
    let sde = SdeConfig::new(0.2, 1e-2, 0.0, 3, DissipationSpec::subcritical(3.0, 1.2), NoiseSpec::power_law(dim, 1.0, 2.0).unwrap());
    let mut cfg = StationaryConfig::new(sde, 5.0, 6);
    cfg.sample_every = 5;
    let one = stationary_average(&cfg).unwrap();
    cfg.workers = 3;
    let three = stationary_average(&cfg).unwrap();
    assert_eq!(one.mass_rate, three.mass_rate);
    assert_eq!(one.accumulator, three.accumulator);
    assert_eq!(one.final_states, three.final_states);
}
