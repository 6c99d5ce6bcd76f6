use chialvo::map::presets::network_family;
use chialvo::map::{step3, State};
use chialvo::network::*;
use chialvo::par::Exec;
use proptest::prelude::*;

fn ring(sigma: f64, mu: f64) -> NetworkParams {
    NetworkParams::new(network_family(3.5), 100, 10, sigma, mu)
}

fn field_of(xs: Vec<Vec<f64>>) -> SpatiotemporalField {
    let n = xs[0].len();
    let last = xs.last().unwrap().iter().map(|&x| State::new(x, 0.0, 0.0)).collect();
    SpatiotemporalField { n, steps: (0..xs.len()).collect(), x: xs.concat(), final_states: last, seed: 0, stride: 1, diverged_at: None }
}

#[test]
fn validation() {
    assert!(NetworkParams::new(network_family(3.5), 2, 1, 0.0, 0.0).validate().is_err());
    assert!(NetworkParams::new(network_family(3.5), 21, 10, 0.0, 0.0).validate().is_ok());
    assert!(NetworkParams::new(network_family(3.5), 20, 10, 0.0, 0.0).validate().is_err());
    assert!(NetworkParams::new(network_family(3.5), 10, 0, 0.0, 0.0).validate().is_err());
    let mut np = NetworkParams::new(network_family(3.5), 21, 10, 0.0, 0.0);
    np.hub_in_ring = false;
    assert!(np.validate().is_err());
}

#[test]
fn decoupled_nodes_follow_the_single_map() {
    let np = ring(0.0, 0.0);
    let s = random_states(100, 4);
    let next = network_step(&np, &s);
    for (a, b) in s.iter().zip(&next) {
        assert_eq!(step3(&np.map, *a), *b);
    }
}

#[test]
fn small_network_matches_a_direct_sum() {
    let (sigma, mu) = (0.3, 0.07);
    for hub_in_ring in [true, false] {
        let mut np = NetworkParams::new(network_family(3.5), 5, 1, sigma, mu);
        np.hub_in_ring = hub_in_ring;
        let s = random_states(5, 11);
        let next = network_step(&np, &s);
        let x: Vec<f64> = s.iter().map(|q| q.x).collect();
        let local = |m: usize| step3(&np.map, s[m]).x;
        let hub = local(0) + mu * ((x[1] - x[0]) + (x[2] - x[0]) + (x[3] - x[0]) + (x[4] - x[0]));
        assert!((next[0].x - hub).abs() < 1e-14);
        let ring: Vec<usize> = if hub_in_ring { vec![0, 1, 2, 3, 4] } else { vec![1, 2, 3, 4] };
        for (pos, &m) in ring.iter().enumerate().filter(|(_, &m)| m > 0) {
            let left = ring[(pos + ring.len() - 1) % ring.len()];
            let right = ring[(pos + 1) % ring.len()];
            let want = local(m) + mu * (x[0] - x[m]) + sigma / 2.0 * ((x[left] - x[m]) + (x[right] - x[m]));
            assert!((next[m].x - want).abs() < 1e-14, "node {m}");
            assert_eq!((next[m].y, next[m].phi), (step3(&np.map, s[m]).y, step3(&np.map, s[m]).phi));
        }
    }
}

#[test]
fn equal_states_have_zero_coupling() {
    let np = ring(0.7, -0.3);
    let s = vec![State::new(0.4, 0.2, 0.01); 100];
    let next = network_step(&np, &s);
    assert!(next.iter().all(|q| *q == step3(&np.map, s[0])));
}

#[test]
fn runs_are_reproducible() {
    let np = ring(0.001, 0.0);
    let a = simulate_network(&np, 9, 500, 20, 3).unwrap();
    let b = simulate_network(&np, 9, 500, 20, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.n_records(), a.x.len(), a.stride, a.seed), (20, 2000, 3, 9));
    assert_eq!(a.steps[1] - a.steps[0], 3);
    assert_ne!(a, simulate_network(&np, 10, 500, 20, 3).unwrap());
    let init = random_states(100, 9);
    assert!(init.iter().all(|s| (0.0..=1.0).contains(&s.x) && (0.0..=1.0).contains(&s.y) && s.phi.abs() <= 0.1));
}

#[test]
fn diagnostics_of_identical_nodes() {
    let f = field_of(vec![vec![0.3; 50]; 4]);
    assert_eq!(sync_error(&f), 0.0);
    let d = coherence_profile_and_classify(&f, &Thresholds::default()).unwrap();
    assert_eq!(d.state_class, StateClass::Sync);
    assert!(d.coherence_profile.iter().all(|&v| v == 0.0));
    assert_eq!(d.cluster_count, 1);
    assert!(d.recurrence.iter().all(|&b| b));
}

#[test]
fn two_tight_groups_form_two_blocks() {
    let xs: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 0.1 + 1e-4 * i as f64 } else { 0.9 }).collect();
    assert_eq!(cluster_count(&xs, 0.01), 2);
    let c = clusters(&xs, 0.01);
    let mut order: Vec<usize> = c.concat();
    assert_eq!(order.len(), 40);
    let r = recurrence_matrix(&xs, 0.01);
    order.sort_by_key(|&i| (xs[i] > 0.5, i));
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            assert_eq!(r[i * 40 + j], (a < 20) == (b < 20));
        }
    }
    let d = coherence_profile_and_classify(&field_of(vec![xs.clone(); 3]), &Thresholds::default()).unwrap();
    assert_eq!(d.state_class, StateClass::Clustered);
}

#[test]
fn half_coherent_half_scattered_is_a_chimera() {
    let xs: Vec<f64> = (0..60).map(|i| if i < 30 { 0.5 } else { ((i * 37) % 11) as f64 / 11.0 }).collect();
    let d = coherence_profile_and_classify(&field_of(vec![xs; 3]), &Thresholds::default()).unwrap();
    assert_eq!(d.state_class, StateClass::Chimera);
}

#[test]
fn stored_threshold_is_reproducible() {
    let seeds: Vec<u64> = (0..10).collect();
    let t = calibrate_sync_threshold(&ring(0.005, 0.0), &seeds, DEFAULT_TRANSIENT, DEFAULT_RECORDS, Exec::Parallel).unwrap();
    assert!((t - Thresholds::default().sync).abs() < 5e-4, "{t}");
}

#[test]
fn strong_ring_synchronizes_and_weak_ring_does_not() {
    let th = Thresholds::default();
    let seeds = [0, 1, 2];
    let strong = classify_seeds(&ring(0.005, 0.0), &seeds, DEFAULT_TRANSIENT, DEFAULT_RECORDS, &th, Exec::Parallel).unwrap();
    assert!(strong.iter().all(|d| d.state_class == StateClass::Sync));
    let weak = classify_seeds(&ring(0.0001, 0.0), &seeds, DEFAULT_TRANSIENT, DEFAULT_RECORDS, &th, Exec::Parallel).unwrap();
    assert!(weak.iter().all(|d| d.state_class != StateClass::Sync && d.sync_error > th.sync));
}

#[test]
fn xk_scan_shape_and_single_cluster_region() {
    let np = NetworkParams::new(network_family(0.0), 100, 10, 0.0, 0.005);
    let rows = xk_scan(&np, (-2.9, -1.4), 6, 1, 5000, Exec::Parallel).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().map(|r| r.x_end.len()).sum::<usize>(), 600);
    assert_eq!((rows[0].k, rows[5].k), (-2.9, -1.4));
    for r in &rows {
        assert!(!r.diverged);
        assert_eq!(cluster_count(&r.x_end, 0.01), 1, "k = {}", r.k);
    }
    assert!(xk_scan(&np, (-2.0, -1.0), 1, 1, 10, Exec::Sequential).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn synchronized_manifold_is_invariant(sigma in -0.01..0.01f64, mu in -0.01..0.01f64, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let np = ring(sigma, mu);
        let mut s = vec![State::new(x, y, 0.02); 100];
        let mut next = s.clone();
        for _ in 0..10_000 {
            network_step_into(&np, &s, &mut next);
            std::mem::swap(&mut s, &mut next);
            if !s[0].is_finite() {
                break;
            }
        }
        prop_assume!(s[0].is_finite());
        prop_assert!(s.iter().all(|q| (q.x - s[0].x).abs() < 1e-12));
    }

    #[test]
    fn recurrence_is_symmetric_and_clusters_partition(xs in proptest::collection::vec(-1.0..1.0f64, 3..60), eps in 0.001..0.2f64) {
        let n = xs.len();
        let r = recurrence_matrix(&xs, eps);
        for i in 0..n {
            prop_assert!(r[i * n + i]);
            for j in 0..n {
                prop_assert_eq!(r[i * n + j], r[j * n + i]);
            }
        }
        let c = clusters(&xs, eps);
        prop_assert_eq!(c.iter().map(|v| v.len()).sum::<usize>(), n);
        prop_assert!((1..=n).contains(&c.len()));
    }

    #[test]
    fn distinct_values_at_tiny_eps_are_singletons(xs in proptest::collection::btree_set(-1000i32..1000, 3..40)) {
        let xs: Vec<f64> = xs.into_iter().map(|v| v as f64 * 1e-3).collect();
        prop_assert_eq!(cluster_count(&xs, 1e-9), xs.len());
    }
}
