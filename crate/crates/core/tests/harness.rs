use partition_oracle::generators::{audit_outerplanar, generate, generate_with_log, Generator, GraphSpec};
use partition_oracle::harness::{calibrate, run_experiment, run_experiment_on, Calibration, CalibrationLattice, ExperimentSpec};
use partition_oracle::Params;
use proptest::prelude::*;

fn small_lattice() -> CalibrationLattice {
    CalibrationLattice {
        phi: vec![0.6, 0.45, 0.3, 0.2],
        sample_budget: vec![8, 2],
        rho: vec![0.02, 0.01],
        ell: vec![20],
        delta: vec![0.05, 0.2],
        seeds: 9,
        seed_key: "cal".into(),
    }
}

#[test]
fn calibrated_cycle_reproduces_on_rerun() {
    let spec = GraphSpec::new(Generator::Cycle, 256, 1);
    let g = generate(&spec).unwrap();
    let c = calibrate(&g, 0.2, &CalibrationLattice::default()).unwrap();
    let Calibration::Found { params, median, .. } = c else {
        panic!("no lattice point reached 0.2: {c:?}");
    };
    assert!(median <= 0.2);
    let rerun = run_experiment(&ExperimentSpec {
        seed_key: "fresh".into(),
        ..ExperimentSpec::new(spec, params.clone(), 50)
    })
    .unwrap();
    assert!(rerun.summary.cut_fraction.unwrap().median <= 0.2);
    assert!(rerun.summary.max_component as f64 <= params.max_component());
}

#[test]
fn tighter_targets_never_loosen_phi() {
    let g = generate(&GraphSpec::new(Generator::Cycle, 128, 5)).unwrap();
    let lattice = small_lattice();
    let mut last_phi = f64::INFINITY;
    let mut last_point = 0;
    for target in [0.5, 0.3, 0.25, 0.2, 0.17, 0.15] {
        match calibrate(&g, target, &lattice).unwrap() {
            Calibration::Found { params, point, .. } => {
                assert!(params.phi <= last_phi, "target {target} returned phi {}", params.phi);
                assert!(point >= last_point);
                last_phi = params.phi;
                last_point = point;
            }
            Calibration::Failed { points_tried, .. } => {
                assert_eq!(points_tried, lattice.points(&Params::practical(2)).len());
                last_phi = f64::NEG_INFINITY;
            }
        }
    }
}

#[test]
fn impossible_target_yields_failure_report() {
    let g = generate(&GraphSpec::new(Generator::Grid, 64, 1)).unwrap();
    let lattice = CalibrationLattice {
        phi: vec![0.3],
        sample_budget: vec![4],
        rho: vec![0.05],
        ell: vec![10],
        delta: vec![0.1],
        seeds: 5,
        seed_key: "x".into(),
    };
    let c = calibrate(&g, 0.001, &lattice).unwrap();
    let Calibration::Failed { points_tried, best, .. } = c else {
        panic!("expected failure, got {c:?}");
    };
    assert_eq!(points_tried, 1);
    assert_eq!(best.unwrap().index, 0);
}

#[test]
fn experiment_json_is_byte_identical_across_runs() {
    let mut spec = ExperimentSpec::new(GraphSpec::new(Generator::RandomOuterplanar, 200, 9), Params::practical(4), 8);
    spec.local_checks = 5;
    let a = run_experiment(&spec).unwrap().to_json_lines().unwrap();
    let b = run_experiment(&spec).unwrap().to_json_lines().unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 9);
}

#[test]
fn all_singletons_closed_form() {
    for gen in Generator::ALL {
        let spec = GraphSpec::new(gen, 49, 2);
        let g = generate(&spec).unwrap();
        let mut p = Params::practical(g.d() as u64);
        p.delta = 0.0;
        p.hbar = 2;
        let r = run_experiment_on(&g, &ExperimentSpec::new(spec, p, 3)).unwrap();
        let expect = g.edge_count() as f64 / (g.d() * g.n()) as f64;
        assert!(r.runs.iter().all(|x| x.cut_fraction == expect));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generators_respect_degree_and_planarity(gen_i in 0usize..5, n in 1usize..300, seed in any::<u64>()) {
        let gen = Generator::ALL[gen_i];
        let n = if gen == Generator::Grid { let s = (n as f64).sqrt() as usize; (s * s).max(1) } else { n };
        let (g, log) = generate_with_log(&GraphSpec::new(gen, n, seed)).unwrap();
        prop_assert_eq!(g.n(), n);
        for &v in g.labels() {
            prop_assert!(g.degree(v).unwrap() <= g.d());
        }
        if n >= 3 {
            prop_assert!(g.edge_count() <= 3 * n - 6);
        }
        if gen == Generator::RandomOuterplanar {
            audit_outerplanar(&g, &log).unwrap();
        }
        prop_assert!(g.induces_connected(g.labels()));
    }

    #[test]
    fn cut_fraction_in_unit_interval(gen_i in 0usize..5, seed in any::<u64>()) {
        let gen = Generator::ALL[gen_i];
        let spec = GraphSpec::new(gen, 64, seed);
        let g = generate(&spec).unwrap();
        let r = run_experiment_on(&g, &ExperimentSpec::new(spec, Params::practical(g.d() as u64), 2)).unwrap();
        for run in &r.runs {
            prop_assert!((0.0..=1.0).contains(&run.cut_fraction));
        }
    }
}
