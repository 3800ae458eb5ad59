mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use skipctl::lp;
use skipctl::rmpc::{Controller, LinearFeedback, Rmpc, RmpcConfig, RmpcParams};
use skipctl::safesets::*;
use skipctl::system::LtiSystem;
use skipctl::{Error, Polytope};

fn acc_config(sys: &LtiSystem) -> RmpcConfig {
    RmpcConfig::build(sys, &RmpcParams { horizon: 10, p_weight: 1.0, q_weight: 1.0, x_ref: acc_ref() }).unwrap()
}

fn zero_gain(n: usize) -> LinearFeedback {
    LinearFeedback::new(DMatrix::zeros(1, n), DVector::zeros(n), DVector::zeros(1)).unwrap()
}

/// Does some `u ∈ U` put `A x + B u` inside `y`? Decided by a one-variable-block LP.
fn has_input_into(sys: &LtiSystem, y: &Polytope, x: &DVector<f64>) -> bool {
    let m = sys.m();
    let ax = &sys.a * x;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (h, b) in y.rows() {
        let h = DVector::from_vec(h);
        rows.extend((sys.b.transpose() * &h).iter().copied());
        rhs.push(b - h.dot(&ax));
    }
    for (g, b) in sys.u_set.rows() {
        rows.extend(g);
        rhs.push(b);
    }
    lp::solve(&vec![0.0; m], &rows, &rhs).point.is_some()
}

#[test]
fn scalar_series_matches_geometric_sum() {
    let sys = scalar_system(0.5, 1.0, (-10.0, 10.0), (-1.0, 1.0), (-1.0, 1.0));
    let s = rakovic_sum(&sys, &zero_gain(1), 1.0, 2).unwrap();
    let (lo, hi) = bounds_1d(&s);
    assert!((lo + 1.75).abs() < 1e-9 && (hi - 1.75).abs() < 1e-9, "got [{lo}, {hi}]");
}

#[test]
fn truncated_scalar_series_fails_verification() {
    let sys = scalar_system(0.5, 1.0, (-10.0, 10.0), (-1.0, 1.0), (-1.0, 1.0));
    let res = robust_invariant_linear(&sys, &zero_gain(1), 1.0, Some(2));
    assert!(matches!(res, Err(Error::VerificationFailed { .. })), "{res:?}");
}

#[test]
fn scaled_scalar_series_passes_verification() {
    let sys = scalar_system(0.5, 1.0, (-10.0, 10.0), (-1.0, 1.0), (-1.0, 1.0));
    let s = robust_invariant_linear(&sys, &zero_gain(1), 8.0 / 7.0, Some(2)).unwrap();
    let (lo, hi) = bounds_1d(&s);
    for v in [lo, hi] {
        for w in [-1.0, 1.0] {
            assert!(s.contains(&[0.5 * v + w]));
        }
    }
}

#[test]
fn series_rejects_unstable_loop_and_small_alpha() {
    let sys = scalar_system(1.5, 1.0, (-10.0, 10.0), (-1.0, 1.0), (-1.0, 1.0));
    assert!(matches!(
        robust_invariant_linear(&sys, &zero_gain(1), 1.0, Some(3)),
        Err(Error::UnstableClosedLoop { .. })
    ));
    let sys = scalar_system(0.5, 1.0, (-10.0, 10.0), (-1.0, 1.0), (-1.0, 1.0));
    assert!(robust_invariant_linear(&sys, &zero_gain(1), 0.5, Some(3)).is_err());
}

#[test]
fn no_perturbation_gives_the_origin() {
    let sys = scalar_system(0.5, 1.0, (-10.0, 10.0), (-1.0, 1.0), (0.0, 0.0));
    let s = robust_invariant_linear(&sys, &zero_gain(1), 1.0, Some(4)).unwrap();
    assert_eq!(bounds_1d(&s), (0.0, 0.0));
}

#[test]
fn acc_linear_invariant_set_passes_vertex_oracle() {
    let sys = acc_system();
    let fb = acc_config(&sys).local_controller();
    let n = default_terms(&sys, &fb).unwrap();
    assert!(n <= MAX_TERMS);
    let s = robust_invariant_linear(&sys, &fb, 1.0, None).unwrap();
    let verts = polygon_vertices(&s);
    assert!(verts.len() >= 3);
    for v in &verts {
        let x = DVector::from_column_slice(v);
        let u = fb.eval(&x);
        for w in acc_w_vertices() {
            let next = sys.step_unchecked(&x, &u, &w);
            // The truncated series is invariant up to the verifier's relative tolerance.
            let gap = distance_out(&s, next.as_slice());
            assert!(gap <= 1e-6 * (1.0 + next.amax()), "{v:?} + {:?} -> {:?}: {gap}", w.as_slice(), next.as_slice());
        }
    }
}

#[test]
fn acc_linear_bundle_is_nested() {
    let sys = acc_system();
    let fb = acc_config(&sys).local_controller();
    let b = SafeSetBundle::linear_feedback(&sys, &fb, 1.0, None).unwrap();
    assert!(b.x_prime.is_subset(&b.x_i).unwrap());
    assert!(b.x_i.is_subset(&b.x).unwrap());
    assert_eq!(b.method, SafeSetMethod::LinearFeedback);
}

#[test]
fn pre_of_full_space_is_full_space() {
    let sys = scalar_system(2.0, 1.0, (-1.0, 1.0), (-1.0, 1.0), (0.0, 0.0));
    let p = pre_with_input(&Polytope::full(1), &sys).unwrap();
    assert!(p.contains(&[1e6]) && p.contains(&[-1e6]));
}

#[test]
fn scalar_pre_widens_by_input_range() {
    let sys = scalar_system(1.0, 1.0, (-10.0, 10.0), (-1.0, 1.0), (0.0, 0.0));
    let p = pre_with_input(&interval(-1.0, 1.0), &sys).unwrap();
    let (lo, hi) = bounds_1d(&p);
    assert!((lo + 2.0).abs() < 1e-9 && (hi - 2.0).abs() < 1e-9, "got [{lo}, {hi}]");
}

#[test]
fn acc_pre_matches_input_scan() {
    let sys = acc_system();
    let y = acc_config(&sys).terminal;
    let p = pre_with_input(&y, &sys).unwrap();
    let mut checked = 0;
    for i in 0..=60 {
        for j in 0..=30 {
            let x = [120.0 + i as f64, 25.0 + j as f64];
            if distance_out(&p, &x).abs() < 1e-6 {
                continue;
            }
            let xv = DVector::from_column_slice(&x);
            assert_eq!(p.contains(&x), has_input_into(&sys, &y, &xv), "x = {x:?}");
            checked += 1;
        }
    }
    assert!(checked > 1500);
}

#[test]
fn zero_horizon_feasible_set_is_terminal_inside_constraints() {
    let sys = scalar_system(1.0, 1.0, (-3.0, 3.0), (-1.0, 1.0), (0.0, 0.0));
    let cfg = RmpcConfig {
        horizon: 0,
        p_weight: 1.0,
        q_weight: 1.0,
        x_ref: DVector::zeros(1),
        tightened: vec![interval(-3.0, 3.0)],
        terminal: interval(-5.0, 2.0),
        k_local: DMatrix::zeros(1, 1),
        w_nominal: DVector::zeros(1),
        x_eq: DVector::zeros(1),
        u_eq: DVector::zeros(1),
    };
    let c = rmpc_feasible_set(&sys, &cfg).unwrap();
    assert!(c.set_eq(&interval(-3.0, 2.0)).unwrap());
}

#[test]
fn unconstrained_input_keeps_feasible_set_equal_to_constraints() {
    let x = Polytope::from_box(&[-1.0, -2.0], &[1.0, 2.0]).unwrap();
    let sys = LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
        DMatrix::identity(2, 2),
        x.clone(),
        Polytope::full(2),
        Polytope::point(&[0.0, 0.0]),
        DVector::zeros(2),
    )
    .unwrap();
    let cfg = RmpcConfig {
        horizon: 3,
        p_weight: 1.0,
        q_weight: 1.0,
        x_ref: DVector::zeros(2),
        tightened: vec![x.clone(); 4],
        terminal: x.clone(),
        k_local: DMatrix::zeros(2, 2),
        w_nominal: DVector::zeros(2),
        x_eq: DVector::zeros(2),
        u_eq: DVector::zeros(2),
    };
    assert!(rmpc_feasible_set(&sys, &cfg).unwrap().set_eq(&x).unwrap());
}

#[test]
fn acc_feasible_set_matches_lp_feasibility() {
    let sys = acc_system();
    let cfg = acc_config(&sys);
    let x_f = rmpc_feasible_set(&sys, &cfg).unwrap();
    let ctrl = Rmpc::new(cfg, &sys).unwrap();
    let inside = sample_in(&x_f, &[120.0, 25.0], &[180.0, 55.0], 500, 11);
    assert_eq!(inside.len(), 500);
    for x in &inside {
        assert!(ctrl.solve(&DVector::from_column_slice(x)).is_ok(), "infeasible inside at {x:?}");
    }
    let outside = sample_between(&sys.x_set, &x_f, 1e-4, 500, 12);
    assert_eq!(outside.len(), 500);
    for x in &outside {
        assert!(ctrl.solve(&DVector::from_column_slice(x)).is_err(), "feasible outside at {x:?}");
    }
}

#[test]
fn undisturbed_identity_backward_set_is_the_target() {
    let y = Polytope::from_box(&[-1.0, 0.0], &[2.0, 3.0]).unwrap();
    let sys = LtiSystem::new(
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        y.clone(),
        interval(-1.0, 1.0),
        Polytope::point(&[0.0, 0.0]),
        DVector::zeros(1),
    )
    .unwrap();
    assert!(backward_reachable_skip(&y, &sys).unwrap().set_eq(&y).unwrap());
    assert!(strengthened_safe_set(&y, &sys).unwrap().set_eq(&y).unwrap());
}

#[test]
fn scalar_backward_set_scales_eroded_target() {
    let sys = scalar_system(0.5, 1.0, (-10.0, 10.0), (-1.0, 1.0), (-0.1, 0.1));
    let b = backward_reachable_skip(&interval(-1.0, 1.0), &sys).unwrap();
    let (lo, hi) = bounds_1d(&b);
    assert!((lo + 1.8).abs() < 1e-9 && (hi - 1.8).abs() < 1e-9, "got [{lo}, {hi}]");
    // Backward set contains the target, so the intersection is the target.
    let xp = strengthened_safe_set(&interval(-1.0, 1.0), &sys).unwrap();
    assert!(xp.set_eq(&interval(-1.0, 1.0)).unwrap());
}

#[test]
fn acc_backward_set_passes_vertex_oracle() {
    let sys = acc_system();
    let y = SafeSetBundle::rmpc_feasible(&sys, &acc_config(&sys)).unwrap().x_i;
    let b = backward_reachable_skip(&y, &sys).unwrap();
    let zero = DVector::zeros(1);
    let inside = sample_in(&b, &[100.0, 10.0], &[200.0, 70.0], 1000, 21);
    assert_eq!(inside.len(), 1000);
    for x in &inside {
        let xv = DVector::from_column_slice(x);
        for w in acc_w_vertices() {
            let next = sys.step_unchecked(&xv, &zero, &w);
            assert!(y.contains_tol(next.as_slice(), 1e-9), "{x:?} + {w}");
        }
    }
    let outside = sample_between(&Polytope::from_box(&[100.0, 10.0], &[200.0, 70.0]).unwrap(), &b, 1e-4, 500, 22);
    assert_eq!(outside.len(), 500);
    for x in &outside {
        let xv = DVector::from_column_slice(x);
        let some_violates =
            acc_w_vertices().iter().any(|w| !y.contains(sys.step_unchecked(&xv, &zero, w).as_slice()));
        assert!(some_violates, "{x:?} outside B(X_I, 0) yet every vertex lands in X_I");
    }
}

#[test]
fn acc_bundle_is_nested_and_skips_safely() {
    let sys = acc_system();
    let b = SafeSetBundle::rmpc_feasible(&sys, &acc_config(&sys)).unwrap();
    assert!(b.x_prime.is_subset(&b.x_i).unwrap());
    assert!(b.x_i.is_subset(&b.x).unwrap());
    let zero = DVector::zeros(1);
    let pts = sample_in(&b.x_prime, &[120.0, 25.0], &[180.0, 55.0], 1000, 31);
    assert_eq!(pts.len(), 1000);
    for x in &pts {
        let xv = DVector::from_column_slice(x);
        for w in acc_w_vertices() {
            let next = sys.step(&xv, &zero, &w).unwrap();
            assert!(b.x_i.contains(next.as_slice()), "skip from {x:?} with {w} leaves X_I");
        }
    }
}

#[test]
fn acc_invariant_set_is_invariant_under_rmpc() {
    let sys = acc_system();
    let cfg = acc_config(&sys);
    let b = SafeSetBundle::rmpc_feasible(&sys, &cfg).unwrap();
    let ctrl = Rmpc::new(cfg, &sys).unwrap();
    let pts = sample_in(&b.x_i, &[120.0, 25.0], &[180.0, 55.0], 1000, 41);
    assert_eq!(pts.len(), 1000);
    for x in &pts {
        let xv = DVector::from_column_slice(x);
        let u = ctrl.control(&xv).unwrap_or_else(|e| panic!("{x:?}: {e}"));
        for w in acc_w_vertices() {
            let next = sys.step(&xv, &u, &w).unwrap();
            assert!(b.x_i.contains_tol(next.as_slice(), 1e-6), "{x:?} with {w} -> {next}");
        }
    }
}

#[test]
fn bundle_round_trips_through_text() {
    let sys = acc_system();
    let b = SafeSetBundle::rmpc_feasible(&sys, &acc_config(&sys)).unwrap();
    let text = b.to_text();
    let back = SafeSetBundle::from_text(&text, &sys).unwrap();
    assert_eq!(back.method, b.method);
    assert_eq!(back.params, b.params);
    assert_eq!(back.x_i, b.x_i);
    assert_eq!(back.x_prime, b.x_prime);
    assert_eq!(back.to_text(), text);
}

#[test]
fn bundle_for_other_system_is_refused() {
    let sys = acc_system();
    let b = SafeSetBundle::rmpc_feasible(&sys, &acc_config(&sys)).unwrap();
    let mut other = sys.clone();
    other.a[(0, 1)] = -0.11;
    assert!(matches!(SafeSetBundle::from_text(&b.to_text(), &other), Err(Error::ProvenanceMismatch { .. })));
    assert!(matches!(b.check_provenance(&other), Err(Error::ProvenanceMismatch { .. })));
    assert!(b.check_provenance(&sys).is_ok());
}

#[test]
fn corrupted_bundle_is_refused() {
    let sys = acc_system();
    let text = SafeSetBundle::rmpc_feasible(&sys, &acc_config(&sys)).unwrap().to_text();
    let pos = text.find("X_I\n").unwrap() + 10;
    let mut bytes = text.into_bytes();
    bytes[pos] = if bytes[pos] == b'1' { b'2' } else { b'1' };
    let corrupted = String::from_utf8(bytes).unwrap();
    assert!(SafeSetBundle::from_text(&corrupted, &sys).is_err());
    assert!(SafeSetBundle::from_text("", &sys).is_err());
}

#[test]
fn method_tags_parse_and_print() {
    for m in [SafeSetMethod::LinearFeedback, SafeSetMethod::RmpcFeasible] {
        assert_eq!(m.to_string().parse::<SafeSetMethod>().unwrap(), m);
    }
    assert!("maximal".parse::<SafeSetMethod>().is_err());
}
