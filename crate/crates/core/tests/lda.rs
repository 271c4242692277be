mod common;

use common::*;
use idv_plda::lda::{apply_lda, scatter_matrices, train_lda};
use idv_plda::linalg::{Mat, Vector};
use idv_plda::{Dataset, Domain, IVector, LdaTransform};
use proptest::prelude::*;

/// Between and within scatter with explicit loops over speakers.
fn loop_scatters(ds: &Dataset) -> (Mat, Mat) {
    let all = vectors(ds);
    let global = plain_mean(&all);
    let d = ds.dim();
    let mut s_b = Mat::zeros(d, d);
    let mut s_w = Mat::zeros(d, d);
    for (_, group) in ds.speakers() {
        let members: Vec<Vector> = group.iter().map(|&i| ds.items()[i].values.clone()).collect();
        let m = plain_mean(&members);
        s_b += loop_scatter(&[m.clone()], &global) * members.len() as f64;
        s_w += loop_scatter(&members, &m) * members.len() as f64;
    }
    (s_b, s_w)
}

#[test]
fn scatters_match_loop_oracle() {
    let ds = labeled(&mut rng(21), 5, 4, 3, 2.0);
    let (s_b, s_w) = scatter_matrices(&ds).unwrap();
    let (want_b, want_w) = loop_scatters(&ds);
    assert!(rel_err(&s_b, &want_b) < 1e-12);
    assert!(rel_err(&s_w, &want_w) < 1e-12);
}

#[test]
fn single_session_speakers_have_zero_within_scatter() {
    let ds = labeled(&mut rng(22), 4, 6, 1, 1.0);
    let (_, s_w) = scatter_matrices(&ds).unwrap();
    assert_eq!(max_abs(&s_w), 0.0);
}

fn item(spk: usize, r: usize, x: f64, y: f64) -> IVector {
    IVector::new(
        format!("s{spk}-{r}"),
        Some(format!("s{spk}")),
        Domain::OutDomain,
        1.0,
        Vector::from_vec(vec![x, y]),
    )
}

#[test]
fn two_dimensional_case_picks_the_separating_axis() {
    // classes differ along x; within-class spread is larger along y
    let mut items = Vec::new();
    let mut r = rng(23);
    for spk in 0..2 {
        let cx = if spk == 0 { -3.0 } else { 3.0 };
        for k in 0..50 {
            items.push(item(spk, k, cx + 0.3 * normal(&mut r), 2.0 * normal(&mut r)));
        }
    }
    let ds = Dataset::new(2, items).unwrap();
    let (s_b, s_w) = scatter_matrices(&ds).unwrap();
    // analytic direction for two classes: S_w⁻¹ (m₁ − m₀)
    let group_mean = |g: &[usize]| plain_mean(&g.iter().map(|&i| ds.items()[i].values.clone()).collect::<Vec<_>>());
    let groups: Vec<&[usize]> = ds.speakers().map(|(_, g)| g).collect();
    let dm = group_mean(groups[1]) - group_mean(groups[0]);
    let want = s_w.clone().try_inverse().unwrap() * dm;
    let t = train_lda(&ds, 1, 0.0).unwrap();
    let got = t.a_matrix.column(0).into_owned();
    let cos = got.dot(&want) / (got.norm() * want.norm());
    assert!(cos.abs() >= 1.0 - 1e-8, "cos {cos}");
    assert!(s_b[(0, 0)] > 0.0);
}

#[test]
fn output_dim_is_clamped_to_speaker_rank() {
    let ds = labeled(&mut rng(24), 6, 3, 4, 2.0);
    let t = train_lda(&ds, 5, 1e-6).unwrap();
    assert_eq!(t.output_dim(), 2);
    assert!(train_lda(&ds, 7, 1e-6).is_err());
}

#[test]
fn unlabelled_data_rejected() {
    let ds = labeled(&mut rng(25), 3, 3, 2, 1.0).unlabeled();
    assert!(train_lda(&ds, 1, 1e-6).is_err());
}

#[test]
fn projection_is_a_dot_product() {
    let ds = labeled(&mut rng(26), 6, 8, 4, 2.0);
    let t = train_lda(&ds, 3, 1e-6).unwrap();
    let out = apply_lda(&t, &ds).unwrap();
    for (a, b) in ds.items().iter().zip(out.items()) {
        for c in 0..3 {
            let dot: f64 = (0..6).map(|i| t.a_matrix[(i, c)] * a.values[i]).sum();
            assert!((dot - b.values[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn blob_round_trip_is_exact() {
    let ds = labeled(&mut rng(27), 5, 6, 3, 2.0);
    let t = train_lda(&ds, 3, 1e-6).unwrap();
    assert_eq!(LdaTransform::from_bytes(&t.to_bytes()).unwrap(), t);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigenpairs_solve_generalized_problem(seed in any::<u64>(), dim in 2usize..8, speakers in 3usize..10) {
        let ds = labeled(&mut rng(seed), dim, speakers, 5, 2.0);
        let k = dim.min(speakers - 1);
        let t = train_lda(&ds, k, 0.0).unwrap();
        for c in 0..k {
            let v = t.a_matrix.column(c).into_owned();
            let lam = t.eigenvalues[c];
            let res = &t.s_b * &v - &t.s_w * &v * lam;
            let scale = (&t.s_b * &v).norm().max((&t.s_w * &v).norm() * lam.abs());
            prop_assert!(res.norm() <= 1e-6 * scale.max(1e-300));
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        for w in t.eigenvalues.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn eigenvalues_are_scale_invariant(seed in any::<u64>(), c in 0.1f64..10.0) {
        let ds = labeled(&mut rng(seed), 4, 6, 4, 2.0);
        let scaled = ds.map_values(4, |it| &it.values * c).unwrap();
        let a = train_lda(&ds, 3, 0.0).unwrap();
        let b = train_lda(&scaled, 3, 0.0).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
        }
        for col in 0..3 {
            let cos = a.a_matrix.column(col).dot(&b.a_matrix.column(col));
            prop_assert!(cos.abs() > 1.0 - 1e-8);
        }
    }
}
