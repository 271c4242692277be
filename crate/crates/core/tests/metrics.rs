mod common;

use common::*;
use idv_plda::metrics::{det_points_from_scores, eer_from_scores, min_dcf_from_scores, DcfParams};
use idv_plda::Error;
use proptest::prelude::*;

/// Scores on a coarse grid so ties between and within classes are common.
fn trials() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..7, 1usize..7).prop_flat_map(|(nt, nn)| {
        let s = (-8i32..8).prop_map(|v| v as f64 * 0.25);
        (prop::collection::vec(s.clone(), nt), prop::collection::vec(s, nn))
    })
}

fn params() -> impl Strategy<Value = DcfParams> {
    (0.5f64..20.0, 0.5f64..5.0, 0.005f64..0.5).prop_map(|(c_miss, c_fa, p_target)| DcfParams { c_miss, c_fa, p_target })
}

#[test]
fn hand_case_eer() {
    assert_eq!(eer_from_scores(&[2.0, 3.0], &[1.0, 2.5]).unwrap(), 0.25);
}

#[test]
fn separable_and_reversed_extremes() {
    assert_eq!(eer_from_scores(&[5.0, 6.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(eer_from_scores(&[1.0, 2.0], &[5.0, 6.0]).unwrap(), 0.5);
    let p = DcfParams::default();
    assert_eq!(min_dcf_from_scores(&[5.0, 6.0], &[1.0, 2.0], &p).unwrap().value, 0.0);
}

#[test]
fn min_dcf_never_exceeds_trivial_systems() {
    let p = DcfParams::default();
    let d = min_dcf_from_scores(&[1.0, 2.0], &[5.0, 6.0], &p).unwrap();
    assert!((d.normalized - 1.0).abs() < 1e-12);
}

#[test]
fn one_class_is_an_error() {
    assert!(matches!(eer_from_scores(&[1.0], &[]), Err(Error::OneClass)));
    assert!(matches!(eer_from_scores(&[], &[1.0]), Err(Error::OneClass)));
}

#[test]
fn non_finite_scores_are_rejected() {
    assert!(eer_from_scores(&[f64::NAN], &[1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn eer_matches_exhaustive_oracle((tar, non) in trials()) {
        let got = eer_from_scores(&tar, &non).unwrap();
        let want = brute_eer(&tar, &non);
        prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
    }

    #[test]
    fn min_dcf_matches_exhaustive_oracle((tar, non) in trials(), p in params()) {
        let got = min_dcf_from_scores(&tar, &non, &p).unwrap();
        let want = brute_min_dcf(&tar, &non, &p);
        prop_assert!((got.value - want).abs() <= 1e-12, "{} vs {}", got.value, want);
        prop_assert!(got.normalized <= 1.0 + 1e-12);
    }

    #[test]
    fn metrics_are_bounded((tar, non) in trials()) {
        let e = eer_from_scores(&tar, &non).unwrap();
        prop_assert!((0.0..=0.5).contains(&e));
        let d = min_dcf_from_scores(&tar, &non, &DcfParams::default()).unwrap();
        prop_assert!(d.value >= 0.0 && d.normalized <= 1.0 + 1e-12);
    }

    #[test]
    fn increasing_maps_preserve_metrics((tar, non) in trials()) {
        let p = DcfParams::default();
        let e = eer_from_scores(&tar, &non).unwrap();
        let d = min_dcf_from_scores(&tar, &non, &p).unwrap().value;
        for f in [|s: f64| 2.0 * s + 3.0, |s: f64| (s / 3.0).tanh()] {
            let t2: Vec<f64> = tar.iter().map(|&s| f(s)).collect();
            let n2: Vec<f64> = non.iter().map(|&s| f(s)).collect();
            prop_assert!((eer_from_scores(&t2, &n2).unwrap() - e).abs() <= 1e-12);
            prop_assert!((min_dcf_from_scores(&t2, &n2, &p).unwrap().value - d).abs() <= 1e-12);
        }
    }

    #[test]
    fn det_staircase_is_monotone_and_complete((tar, non) in trials()) {
        let pts = det_points_from_scores(&tar, &non).unwrap();
        prop_assert_eq!((pts[0].p_fa, pts[0].p_miss), (1.0, 0.0));
        let last = pts.last().unwrap();
        prop_assert_eq!((last.p_fa, last.p_miss), (0.0, 1.0));
        for w in pts.windows(2) {
            prop_assert!(w[0].threshold < w[1].threshold);
            prop_assert!(w[0].p_fa >= w[1].p_fa && w[0].p_miss <= w[1].p_miss);
        }
        let mut distinct: Vec<f64> = tar.iter().chain(&non).copied().collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assert_eq!(pts.len(), distinct.len() + 1);
    }

    #[test]
    fn swapping_classes_complements_the_staircase((tar, non) in trials()) {
        // negating scores and swapping roles mirrors every operating point
        let neg = |v: &[f64]| v.iter().map(|s| -s).collect::<Vec<_>>();
        let a = eer_from_scores(&tar, &non).unwrap();
        let c = eer_from_scores(&neg(&non), &neg(&tar)).unwrap();
        prop_assert!((a - c).abs() <= 1e-12, "{} vs {}", a, c);
    }
}
