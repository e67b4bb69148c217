use proptest::prelude::*;

use reflected_ldp::skorokhod::{reflect_incrementally, two_sided_skorokhod_map, SampledPath};

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

proptest! {
    #[test]
    fn incremental_equals_direct(
        x0 in 0.0..=2.0f64,
        incs in prop::collection::vec(-2.0..2.0f64, 1..60),
        b in 0.5..2.0f64,
    ) {
        let x0 = x0.min(b);
        let incs: Vec<f64> = incs.iter().map(|d| d.clamp(-b, b)).collect();
        let path = SampledPath::from_increments(x0, &incs);
        let a = reflect_incrementally(&path, b).unwrap();
        let d = two_sided_skorokhod_map(&path, b).unwrap();
        prop_assert!(close(&a.v, &d.v));
        prop_assert!(close(&a.l0, &d.l0));
        prop_assert!(close(&a.lb, &d.lb));
    }

    #[test]
    fn reflection_invariants(
        incs in prop::collection::vec(-1.0..1.0f64, 1..80),
    ) {
        let path = SampledPath::from_increments(0.5, &incs);
        let r = reflect_incrementally(&path, 1.0).unwrap();
        for t in 1..r.v.len() {
            prop_assert!((0.0..=1.0).contains(&r.v[t]));
            prop_assert!(r.l0[t] >= r.l0[t - 1] && r.lb[t] >= r.lb[t - 1]);
            if r.l0[t] > r.l0[t - 1] {
                prop_assert_eq!(r.v[t], 0.0);
            }
            if r.lb[t] > r.lb[t - 1] {
                prop_assert_eq!(r.v[t], 1.0);
            }
            let free = path.values[t] + r.l0[t] - r.lb[t];
            prop_assert!((free - r.v[t]).abs() < 1e-12);
        }
    }
}

#[test]
fn rejects_start_outside_interval() {
    let path = SampledPath::from_increments(1.5, &[0.1]);
    assert!(reflect_incrementally(&path, 1.0).is_err());
    assert!(two_sided_skorokhod_map(&path, 1.0).is_err());
}
