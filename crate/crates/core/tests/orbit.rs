mod common;

use chialvo::fixed_points::{classify, find_fixed_points, SearchOptions, Stability};
use chialvo::map::presets::{finger_family, invariant_curve_family};
use chialvo::map::{step3, State};
use chialvo::orbit::*;
use chialvo::Error;
use common::*;
use proptest::prelude::*;

const IC: State = State { x: 0.1, y: 0.1, phi: 0.0 };

fn quick() -> OrbitOptions {
    OrbitOptions { lyapunov_iters: 20_000, ..OrbitOptions::default() }
}

fn period_at(k: f64) -> Option<usize> {
    let t = iterate(&finger_family(k), IC, 10_000, 1000);
    detect_period(&t, 1e-6, 64).unwrap()
}

fn stable_point() -> State {
    let p = census(7.6);
    let set = find_fixed_points(&p, &SearchOptions::default()).unwrap();
    set.roots.iter().find(|r| classify(&p, r).classification == Stability::Stable).unwrap().state()
}

#[test]
fn stable_fixed_point_stays_put() {
    let s = stable_point();
    let t = iterate(&census(7.6), s, 500, 200);
    assert!(!t.diverged);
    assert!(t.states.iter().all(|q| q.dist_inf(&s) < 1e-6));
}

#[test]
fn overflow_on_first_step() {
    let t = iterate(&census(7.6), State::new(1e200, 1e200, 0.0), 0, 10);
    assert!(t.diverged);
    assert_eq!(t.divergence_step, Some(1));
    assert!(matches!(detect_period(&t, 1e-6, 4), Err(Error::Diverged { .. })));
}

#[test]
fn recorded_states_before_divergence_are_finite() {
    let t = iterate_with_threshold(&finger_family(-0.3), IC, 0, 5000, 2.0);
    let step = t.divergence_step.unwrap();
    assert!(t.diverged && step > 1);
    assert_eq!(t.states.len(), step - 1);
    assert!(t.states.iter().all(|s| s.is_finite() && s.x.abs() <= 2.0));
}

#[test]
fn below_the_invariant_circle_the_tail_is_a_point() {
    let t = iterate(&invariant_curve_family(0.838), IC, 20_000, 300);
    assert_eq!(detect_period(&t, 1e-6, 64).unwrap(), Some(1));
}

#[test]
fn periodic_windows_of_the_finger_family() {
    assert_eq!(period_at(-1.6), Some(6));
    assert_eq!(period_at(-4.1), Some(10));
    assert_eq!(period_at(-1.7), Some(12));
}

#[test]
fn near_k_minus_0_9_the_window_has_doubled() {
    assert_eq!(period_at(-0.895), Some(14));
    assert_eq!(period_at(-0.9), Some(28));
}

#[test]
fn short_tail_is_rejected() {
    let t = iterate(&census(7.6), stable_point(), 0, 10);
    assert_eq!(detect_period(&t, 1e-6, 64), Err(Error::TailTooShort { len: 10, needed: 192 }));
}

#[test]
fn fingerprint_kinds() {
    let r = fingerprint(&finger_family(-4.1), IC, &quick()).unwrap();
    assert_eq!((r.kind, r.period, r.points.len()), (AttractorKind::Periodic, 10, 10));
    let r = fingerprint(&finger_family(-0.3), IC, &quick()).unwrap();
    assert_eq!(r.kind, AttractorKind::Chaotic);
    assert!(r.max_lyapunov.unwrap() > 0.0);
    assert!(r.bounding_box.is_some());
    let r = fingerprint(&census(7.6), stable_point(), &quick()).unwrap();
    assert_eq!((r.kind, r.period), (AttractorKind::FixedPoint, 1));
}

#[test]
fn periodic_points_start_at_the_lexicographic_minimum() {
    let r = fingerprint(&finger_family(-1.6), IC, &quick()).unwrap();
    assert!(r.points.iter().all(|q| r.points[0].lex_cmp(q) != std::cmp::Ordering::Greater));
    let p = finger_family(-1.6);
    for w in r.points.windows(2) {
        assert!(step3(&p, w[0]).dist_inf(&w[1]) < 1e-5);
    }
}

#[test]
fn catalog_matching() {
    let opts = quick();
    let six = fingerprint(&finger_family(-1.6), IC, &opts).unwrap();
    let ten = fingerprint(&finger_family(-4.1), IC, &opts).unwrap();
    let chaos = fingerprint(&finger_family(-0.3), IC, &opts).unwrap();
    let catalog = vec![ten.clone(), six.clone(), chaos.clone()];
    assert_eq!(match_attractor(&six, &catalog, 1e-4), Some(1));
    assert_eq!(match_attractor(&chaos, &catalog, 1e-4), Some(2));

    let mut nudged = six.clone();
    nudged.points.rotate_left(2);
    for q in &mut nudged.points {
        q.x += 1e-9;
        q.phi -= 1e-9;
    }
    assert_eq!(match_attractor(&nudged, &catalog, 1e-4), Some(1));
    assert_eq!(match_attractor(&ten, &[six], 1e-4), None);
    assert_eq!(match_attractor(&AttractorRecord::diverged(), &catalog, 1e-4), None);
}

#[test]
fn budgeted_fingerprint_agrees() {
    let opts = quick();
    for k in [-1.6, -4.1] {
        let a = fingerprint(&finger_family(k), IC, &opts).unwrap();
        let b = fingerprint_budget(&finger_family(k), IC, &opts, 50_000, 500).unwrap();
        assert_eq!(match_attractor(&b, &[a], 1e-4), Some(0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn returned_period_is_minimal(k in -4.5..-0.5f64) {
        let t = iterate(&finger_family(k), IC, 5000, 400);
        prop_assume!(!t.diverged);
        if let Some(p) = detect_period(&t, 1e-6, 64).unwrap() {
            for d in (1..p).filter(|d| p % d == 0) {
                let closes = t.states.windows(d + 1).all(|w| w[0].dist_inf(&w[d]) < 1e-6);
                prop_assert!(!closes);
            }
        }
    }

    #[test]
    fn reseeding_from_a_periodic_point_is_idempotent(k in -4.5..-0.5f64, pick in 0usize..64) {
        let opts = OrbitOptions { n_transient: 5000, n_keep: 400, lyapunov_iters: 1000, ..OrbitOptions::default() };
        let r = fingerprint(&finger_family(k), IC, &opts).unwrap();
        prop_assume!(r.is_periodic());
        let again = fingerprint(&finger_family(k), r.points[pick % r.period], &opts).unwrap();
        prop_assert_eq!(again.period, r.period);
        prop_assert_eq!(match_attractor(&again, &[r], 1e-5), Some(0));
    }

    #[test]
    fn raising_the_threshold_never_adds_divergence(x in -5.0..5.0f64, y in -10.0..25.0f64, lo in 1.0..1e3f64, factor in 1.0..1e3f64) {
        let p = finger_family(-1.6);
        let ic = State::new(x, y, 0.0);
        let low = iterate_with_threshold(&p, ic, 200, 50, lo);
        let high = iterate_with_threshold(&p, ic, 200, 50, lo * factor);
        prop_assert!(!high.diverged || low.diverged);
    }
}
