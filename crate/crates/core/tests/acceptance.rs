//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::collections::HashMap;
use std::time::{Duration, Instant};

use common::*;
use idv_plda::gplda::{score_trial, train_gplda};
use idv_plda::harness::{run_experiment, Backend, ExperimentConfig, ExperimentKind, ExperimentReport, SeedData};
use idv_plda::idv::{estimate_modified_idv, estimate_original_idv};
use idv_plda::lda::train_lda;
use idv_plda::linalg::{symmetrize, Mat, Vector};
use idv_plda::metrics::{eer, eer_from_scores, min_dcf, min_dcf_from_scores, DcfParams};
use idv_plda::scorenorm::snorm_from_cohort_scores;
use idv_plda::{
    Dataset, Domain, IVector, IdvTransform, LdaTransform, PldaModel, ScoreEntry, ScoreKind, ScoreSet, Trial,
    TrialLabel,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let total = r.random_range(2..=12);
        let nt = r.random_range(1..total);
        // half of the sets use a coarse grid so that ties occur
        let draw = |r: &mut rand_chacha::ChaCha8Rng| {
            if i % 2 == 0 {
                r.random_range(-4i32..4) as f64 * 0.5
            } else {
                normal(r)
            }
        };
        let tar: Vec<f64> = (0..nt).map(|_| draw(&mut r) + 0.5).collect();
        let non: Vec<f64> = (nt..total).map(|_| draw(&mut r)).collect();
        let p = DcfParams {
            c_miss: r.random_range(0.5..20.0),
            c_fa: r.random_range(0.5..5.0),
            p_target: r.random_range(0.01..0.5),
        };
        let e = (eer_from_scores(&tar, &non).unwrap() - brute_eer(&tar, &non)).abs();
        let d = (min_dcf_from_scores(&tar, &non, &p).unwrap().value - brute_min_dcf(&tar, &non, &p)).abs();
        worst = worst.max(e).max(d);
    }
    let took = start.elapsed();
    check(
        worst <= 1e-12 && took < Duration::from_secs(5),
        format!("max deviation {worst:.1e}, {took:.2?}"),
    )
}

fn random_model(r: &mut rand_chacha::ChaCha8Rng, k: usize, q: usize) -> PldaModel {
    let u1 = normal_mat(r, k, q) * 0.8;
    let prec = symmetrize(&spd(r, k).try_inverse().unwrap());
    PldaModel::new(normal_vec(r, k), u1, prec).unwrap()
}

fn plda_oracle() -> Outcome {
    let mut r = rng(102);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = r.random_range(1..=4);
        let q = r.random_range(1..=2usize.min(k));
        let m = random_model(&mut r, k, q);
        for _ in 0..10 {
            let a = normal_vec(&mut r, k) * 1.5;
            let b = normal_vec(&mut r, k) * 1.5;
            let got = score_trial(&m, &a, &b).unwrap();
            let want = joint_gaussian_llr(m.mean(), m.sigma_between(), m.sigma_total(), &a, &b);
            worst = worst.max((got - want).abs());
        }
    }
    check(worst <= 1e-8, format!("max |llr - oracle| {worst:.1e} over 1000 pairs"))
}

fn em_monotonicity() -> Outcome {
    let mut r = rng(103);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..50 {
        let k = r.random_range(2..=6);
        let speakers = r.random_range(6..=20);
        let sessions = r.random_range(2..=5);
        let ds = labeled(&mut r, k, speakers, sessions, 1.5);
        let q = 1 + i % k;
        let trace = train_gplda(&ds, q, 20, i as u64).unwrap().log_likelihood;
        for w in trace.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    check(worst <= 1e-8, format!("largest single-step decrease {worst:.1e}"))
}

fn idv_whitening() -> Outcome {
    let mut r = rng(104);
    let mut worst_white = 0.0f64;
    for _ in 0..50 {
        let d = r.random_range(2..=10);
        let out = unlabeled(&mut r, d, 5 * d + 20, Domain::OutDomain, 1.0, 1.0);
        let inn = unlabeled(&mut r, d, 4 * d + 20, Domain::InDomain, -0.5, 0.7);
        for t in [
            estimate_original_idv(&out, &inn, 0.0).unwrap(),
            estimate_modified_idv(&out, &inn, 0.0).unwrap(),
        ] {
            if t.ridge != 0.0 {
                return Err(format!("ridge {} added to a well-conditioned scatter", t.ridge));
            }
            let w = t.decorrelator.transpose() * &t.s_idv * &t.decorrelator;
            worst_white = worst_white.max((w - Mat::identity(d, d)).norm());
        }
    }
    let out = unlabeled(&mut r, 6, 40, Domain::OutDomain, 1.5, 1.0);
    let inn = unlabeled(&mut r, 6, 30, Domain::InDomain, -0.5, 0.8);
    let (vo, vi) = (vectors(&out), vectors(&inn));
    let want = loop_scatter(&vo, &plain_mean(&vi)) + loop_scatter(&vi, &plain_mean(&vo));
    let got = estimate_modified_idv(&out, &inn, 0.0).unwrap().s_idv;
    let oracle = rel_err(&got, &want);
    check(
        worst_white <= 1e-8 && oracle <= 1e-12,
        format!("whitening error {worst_white:.1e}, estimator vs oracle {oracle:.1e}"),
    )
}

fn lda_residual() -> Outcome {
    let mut r = rng(105);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = r.random_range(2..=10);
        let speakers = r.random_range(3..=15);
        let sessions = r.random_range(2..=6);
        let ds = labeled(&mut r, d, speakers, sessions, 2.0);
        let k = d.min(speakers - 1);
        let t = train_lda(&ds, k, 0.0).unwrap();
        for c in 0..k {
            let v = t.a_matrix.column(c).into_owned();
            let sb = &t.s_b * &v;
            let sw = &t.s_w * &v * t.eigenvalues[c];
            worst = worst.max((&sb - &sw).norm() / sb.norm().max(sw.norm()).max(1e-300));
        }
    }
    // two classes separated along x, wide spread along y
    let mut items = Vec::new();
    for (spk, cx) in [(0, -3.0), (1, 3.0)] {
        for k in 0..50 {
            let v = Vector::from_vec(vec![cx + 0.3 * normal(&mut r), 2.0 * normal(&mut r)]);
            items.push(IVector::new(format!("s{spk}-{k}"), Some(format!("s{spk}")), Domain::OutDomain, 1.0, v));
        }
    }
    let ds = Dataset::new(2, items).unwrap();
    let t = train_lda(&ds, 1, 0.0).unwrap();
    let groups: Vec<Vec<Vector>> = ds
        .speakers()
        .map(|(_, g)| g.iter().map(|&i| ds.items()[i].values.clone()).collect())
        .collect();
    let want = t.s_w.clone().try_inverse().unwrap() * (plain_mean(&groups[1]) - plain_mean(&groups[0]));
    let got = t.a_matrix.column(0).into_owned();
    let cos = (got.dot(&want) / (got.norm() * want.norm())).abs();
    check(
        worst <= 1e-6 && cos >= 1.0 - 1e-8,
        format!("max relative residual {worst:.1e}, 2-D |cos| = 1 - {:.1e}", 1.0 - cos),
    )
}

fn trend_a(r: &ExperimentReport, took: Duration) -> Outcome {
    let durations = r.durations();
    let gains: Vec<f64> = durations
        .iter()
        .map(|d| r.eer_gain_pct(d, "in-domain", "no-snorm").unwrap())
        .collect();
    let mut inversions = 0;
    let mut inversion_ok = true;
    for w in gains.windows(2) {
        if w[1] > w[0] {
            inversions += 1;
            inversion_ok &= w[1] - w[0] <= 1.0;
        }
    }
    let shown: Vec<String> = durations.iter().zip(&gains).map(|(d, g)| format!("{d} {g:.1}%")).collect();
    check(
        gains[0] > 0.0 && inversions <= 1 && inversion_ok && *gains.last().unwrap() <= 5.0 && took < Duration::from_secs(600),
        format!("in-domain gain {}; {took:.1?}", shown.join(", ")),
    )
}

fn trend_b(r: &ExperimentReport) -> Outcome {
    let e = |s: &str| r.mean("full", s, "no-snorm").unwrap().eer;
    let (out, idv, m) = (e("out-domain"), e("idv"), e("modified-idv"));
    let g1 = 100.0 * (out - idv) / out;
    let g2 = 100.0 * (idv - m) / idv;
    check(
        g1 >= 2.0 && g2 >= 2.0,
        format!(
            "EER out-domain {:.2}%, idv {:.2}% ({g1:.1}%), modified-idv {:.2}% ({g2:.1}%)",
            100.0 * out,
            100.0 * idv,
            100.0 * m
        ),
    )
}

fn snorm_invariance() -> Outcome {
    let mut r = rng(108);
    let p = DcfParams::default();
    let mut worst = 0.0f64;
    let mut same_metrics = true;
    for _ in 0..50 {
        let n = 6;
        let mut entries = Vec::new();
        for e in 0..n {
            for t in 0..n {
                let label = if e == t { TrialLabel::Target } else { TrialLabel::Nontarget };
                let raw = normal(&mut r) + if e == t { 2.0 } else { 0.0 };
                entries.push(ScoreEntry {
                    trial: Trial::new(format!("e{e}"), format!("t{t}"), label),
                    raw_llr: raw,
                    normalized_llr: None,
                });
            }
        }
        let scores = ScoreSet::new(entries).unwrap();
        let mut table = |prefix: &str| -> HashMap<String, Vec<f64>> {
            (0..n)
                .map(|i| (format!("{prefix}{i}"), (0..30).map(|_| normal(&mut r) + 0.2 * i as f64).collect()))
                .collect()
        };
        let (te, tt) = (table("e"), table("t"));
        let a = r.random_range(0.01..50.0);
        let b = r.random_range(-100.0..100.0);
        let f = |x: f64| a * x + b;
        let map = |t: &HashMap<String, Vec<f64>>| -> HashMap<String, Vec<f64>> {
            t.iter().map(|(k, v)| (k.clone(), v.iter().map(|&x| f(x)).collect())).collect()
        };
        let mapped = ScoreSet::new(
            scores.entries.iter().map(|e| ScoreEntry { raw_llr: f(e.raw_llr), ..e.clone() }).collect(),
        )
        .unwrap();
        let base = snorm_from_cohort_scores(&scores, &te, &tt).unwrap();
        let moved = snorm_from_cohort_scores(&mapped, &map(&te), &map(&tt)).unwrap();
        for (x, y) in base.entries.iter().zip(&moved.entries) {
            let (x, y) = (x.normalized_llr.unwrap(), y.normalized_llr.unwrap());
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
        let k = ScoreKind::Normalized;
        same_metrics &= eer(&base, k).unwrap() == eer(&moved, k).unwrap()
            && min_dcf(&base, &p, k).unwrap().value == min_dcf(&moved, &p, k).unwrap().value;
    }
    check(
        worst <= 1e-10 && same_metrics,
        format!("max normalized deviation {worst:.1e}, metrics identical: {same_metrics}"),
    )
}

fn determinism(first: &[ExperimentReport], cfg: &ExperimentConfig) -> Outcome {
    for a in first {
        let b = run_experiment(a.kind, cfg).map_err(|e| e.to_string())?;
        if a.metrics_csv() != b.metrics_csv() || a.plot_csv() != b.plot_csv() || a.reference_csv() != b.reference_csv() {
            return Err(format!("{} differs between runs", a.kind.name()));
        }
    }
    let data = SeedData::generate(cfg, 1).map_err(|e| e.to_string())?;
    let in_dom = data.in_dev.unlabeled();
    let b = Backend::train(&data.out_dev, Some(&in_dom), cfg.pipeline.idv, &cfg.pipeline, &cfg.plda, 9)
        .map_err(|e| e.to_string())?;
    let idv = b.idv.as_ref().unwrap();
    let exact = IdvTransform::from_bytes(&idv.to_bytes()).unwrap() == *idv
        && LdaTransform::from_bytes(&b.lda.to_bytes()).unwrap() == b.lda
        && PldaModel::from_bytes(&b.plda.to_bytes()).unwrap() == b.plda
        && idv_plda::dataset::decode_ivectors(&idv_plda::dataset::encode_ivectors(&data.out_dev)).unwrap() == data.out_dev;
    check(exact, format!("{} experiments rerun identically; blobs round-trip: {exact}", first.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        let (tag, msg) = match o {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {n} {name}: {tag} ({msg})");
    };
    report(1, "metric oracle", metric_oracle());
    report(2, "PLDA scoring oracle", plda_oracle());
    report(3, "EM monotonicity", em_monotonicity());
    report(4, "IDV whitening", idv_whitening());
    report(5, "LDA residual", lda_residual());

    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let in_vs_out = run_experiment(ExperimentKind::InVsOutDomain, &cfg).expect("in-vs-out experiment");
    let took = start.elapsed();
    let idv = run_experiment(ExperimentKind::IdvComparison, &cfg).expect("IDV experiment");
    report(6, "trend A", trend_a(&in_vs_out, took));
    report(7, "trend B", trend_b(&idv));
    report(8, "S-norm invariance", snorm_invariance());
    let matched = run_experiment(ExperimentKind::MatchedLengthSnorm, &cfg).expect("matched experiment");
    report(9, "determinism and round-trip", determinism(&[in_vs_out, idv, matched], &cfg));

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
