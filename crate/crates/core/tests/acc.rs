use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skipctl::acc::*;
use skipctl::rmpc::Controller;
use skipctl::runtime::{saving_percent, AlwaysActuate};
use skipctl::skip_drl::{new_network, DqnConfig};
use skipctl::system::PerturbationSource;

fn walk(i: usize, seed: u64, steps: usize) -> Vec<f64> {
    let mut src = AccScenario::numbered(i).unwrap().source(seed);
    (0..steps).map(|_| src.next_speed()).collect()
}

#[test]
fn system_matrices_and_boxes() {
    let (sys, cfg) = build_acc_system().unwrap();
    // s(t+1) = s − δ(v − v_f),  v(t+1) = v + δ(u − k v).
    assert_eq!(sys.a.as_slice(), &[1.0, 0.0, -DELTA, 1.0 - DRAG * DELTA]);
    assert_eq!(sys.a[(0, 1)], -0.1);
    assert_eq!(sys.a[(1, 1)], 0.98);
    assert_eq!(sys.b.as_slice(), &[0.0, 0.1]);
    assert_eq!(sys.x_set.bounding_box().unwrap(), (vec![120.0, 25.0], vec![180.0, 55.0]));
    assert_eq!(sys.u_set.bounding_box().unwrap(), (vec![-40.0], vec![40.0]));
    let (wl, wh) = sys.w_set.bounding_box().unwrap();
    assert!((wl[0] - 3.0).abs() < 1e-12 && (wh[0] - 5.0).abs() < 1e-12);
    assert_eq!((wl[1], wh[1]), (0.0, 0.0));
    assert_eq!(sys.u_skip, DVector::zeros(1));
    assert_eq!(cfg.horizon, 10);
    assert_eq!(cfg.x_ref.as_slice(), &[150.0, 40.0]);
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let (sys, _) = build_acc_system().unwrap();
    let x = x_ref();
    let next = sys.step(&x, &DVector::from_vec(vec![8.0]), &DVector::from_vec(vec![DELTA * 40.0, 0.0])).unwrap();
    assert!((next - x).amax() < 1e-12);
}

#[test]
fn sinusoid_examples() {
    assert_eq!(sinusoid_speed(40.0, 9.0, 0), 40.0);
    assert!((sinusoid_speed(40.0, 9.0, 10) - 49.0).abs() < 1e-12);
    let quiet = AccScenario { name: "quiet".into(), pattern: Pattern::Sinusoid { v_e: 40.0, a_f: 9.0, noise: 0.0 }, v_range: V_F_RANGE };
    let mut src = quiet.source(0);
    let v: Vec<f64> = (0..=10).map(|_| src.next_speed()).collect();
    assert_eq!(v[0], 40.0);
    assert!((v[10] - 49.0).abs() < 1e-12);
    let mut head = AccScenario::headline().source(5);
    for t in 0..200 {
        let v = head.next_speed();
        assert!((v - sinusoid_speed(40.0, 9.0, t)).abs() <= 1.0 + 1e-12);
    }
}

#[test]
fn pure_random_covers_its_range() {
    let mut src = AccScenario::numbered(6).unwrap().source(99);
    let v: Vec<f64> = (0..10_000).map(|_| src.next_speed()).collect();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(lo >= 30.0 && hi <= 50.0);
    assert!(lo < 30.5 && hi > 49.5);
}

#[test]
fn random_walks_respect_range_and_acceleration() {
    for i in 1..=5 {
        let sc = AccScenario::numbered(i).unwrap();
        for seed in 0..20 {
            let v = walk(i, seed, 300);
            assert!(v.iter().all(|s| (sc.v_range.0..=sc.v_range.1).contains(s)));
            assert!(v.windows(2).all(|p| (p[1] - p[0]).abs() <= 20.0 * DELTA + 1e-12));
        }
    }
}

#[test]
fn scenario_table() {
    let ranges = [(30.0, 50.0), (32.5, 47.5), (35.0, 45.0), (38.0, 42.0), (39.0, 41.0)];
    for (i, r) in ranges.iter().enumerate() {
        let sc = AccScenario::numbered(i + 1).unwrap();
        assert_eq!(sc.v_range, *r);
        assert_eq!(sc.pattern, Pattern::RandomWalk { accel: (-20.0, 20.0) });
    }
    assert_eq!(AccScenario::numbered(7).unwrap().pattern, AccScenario::numbered(1).unwrap().pattern);
    assert_eq!(AccScenario::numbered(8).unwrap().pattern, Pattern::Sinusoid { v_e: 40.0, a_f: 5.0, noise: 5.0 });
    assert_eq!(AccScenario::numbered(10).unwrap().pattern, AccScenario::headline().pattern);
    assert!(AccScenario::numbered(11).is_err());
    let all = AccScenario::all();
    assert_eq!(all.len(), 11);
    assert_eq!("Ex.3".parse::<AccScenario>().unwrap(), AccScenario::numbered(3).unwrap());
    assert_eq!("HEADLINE".parse::<AccScenario>().unwrap().name, "headline");
    assert!("ex".parse::<AccScenario>().is_err());
}

#[test]
fn forecast_matches_what_follows() {
    let mut src = AccScenario::numbered(2).unwrap().source(7);
    src.next_perturbation();
    let f = src.forecast(6).unwrap();
    let actual: Vec<_> = (0..6).map(|_| src.next_perturbation()).collect();
    assert_eq!(f, actual);
}

#[test]
fn episode_seeds_are_distinct() {
    let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| episode_seed(7, i)).collect();
    assert_eq!(seeds.len(), 10_000);
    assert_ne!(episode_seed(1, 0), episode_seed(2, 0));
}

#[test]
fn paired_self_comparison_saves_nothing() {
    let setup = ScenarioSetup::new(AccScenario::headline(), &default_rmpc_params()).unwrap();
    for i in 0..5 {
        let seed = episode_seed(11, i);
        let a = setup.episode(&mut AlwaysActuate, seed, 100).unwrap();
        let b = setup.episode(&mut AlwaysActuate, seed, 100).unwrap();
        assert_eq!(saving_percent(a.energy, b.energy), 0.0);
        assert_eq!(a.safety_violations, 0);
    }
}

#[test]
fn experiment_rows_do_not_depend_on_job_count() {
    let setup = ScenarioSetup::new(AccScenario::numbered(4).unwrap(), &default_rmpc_params()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = new_network(&setup.sys, &setup.bundle.x_i, 1, &DqnConfig::default().hidden, &mut rng).unwrap();
    let one = run_experiment(&setup, Some((&net, 1)), 9, 40, 5, 1).unwrap();
    let three = run_experiment(&setup, Some((&net, 1)), 9, 40, 5, 3).unwrap();
    assert_eq!(one, three);
    assert_eq!(one.iter().map(|r| r.episode).collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
    for r in &one {
        assert_eq!(r.rmpc.safety_violations + r.bang_bang.safety_violations, 0);
        assert_eq!(r.drl.as_ref().unwrap().safety_violations, 0);
    }
}

#[test]
fn initial_states_lie_in_x_prime() {
    let setup = ScenarioSetup::new(AccScenario::numbered(5).unwrap(), &default_rmpc_params()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..50 {
        let x0 = initial_state(&setup.bundle, rng.random()).unwrap();
        assert!(setup.bundle.x_prime.contains(x0.as_slice()));
        assert!(setup.rmpc.control(&x0).is_ok());
    }
}

#[test]
fn histogram_counts() {
    let h = histogram(&[-5.0, 0.0, 0.5, 1.0, 9.99, 12.0], 0.0, 10.0, 10);
    assert_eq!(h.iter().sum::<usize>(), 6);
    assert_eq!(h[0], 3);
    assert_eq!(h[1], 1);
    assert_eq!(h[9], 2);
}
