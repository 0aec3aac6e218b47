use std::path::Path;

use prompt_core::model::{
    binomial_logit_model, BinomialLogitModel, Design, Model, SharedParam, TaskParam,
};
use prompt_core::rng::seeded_rng;
use prompt_core::synthetic::imprecise_estimate_observation;
use prompt_harness::config::ProxyMode;
use prompt_harness::error::HarnessError;
use prompt_harness::smoking::{
    fixed_effect_intercepts, ingest_smoking_csv, leave_one_study_out, load_smoking,
    run_smoking_comparison, rweighted_predictive, studies, SmokingRecord,
};

const SAMPLES: usize = 3000;

#[test]
fn bundled_table_matches_published_shape() {
    let records = load_smoking(None).unwrap();
    assert_eq!(records.len(), 50);
    assert_eq!(studies(&records).len(), 24);
    assert_eq!(
        records[0],
        SmokingRecord {
            study_id: "01".into(),
            treatment: 0,
            events: 9,
            total: 140
        }
    );
    assert!(records.iter().all(|r| r.events <= r.total));
    let partitions = leave_one_study_out(&records);
    assert_eq!(partitions.len(), 24);
    assert!(partitions
        .iter()
        .all(|(_, train, held)| train.len() + held.len() == 50 && !held.is_empty()));
}

#[test]
fn ingestion_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let empty = write("empty.csv", "");
    assert!(matches!(
        ingest_smoking_csv(&empty),
        Err(HarnessError::EmptyInput(_))
    ));
    let missing = write("missing.csv", "study,treatment,total\n01,A,140\n");
    match ingest_smoking_csv(&missing) {
        Err(HarnessError::MissingColumn { column, .. }) => assert_eq!(column, "events"),
        other => panic!("{other:?}"),
    }
    let bad = write(
        "bad.csv",
        "study,treatment,events,total\n01,A,9,140\n01,B,200,140\n",
    );
    match ingest_smoking_csv(&bad) {
        Err(HarnessError::Malformed { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(ingest_smoking_csv(Path::new("/nonexistent/smoking.csv")).is_err());
}

/// Studies drawn from the binomial-logit model. Study `k` gets intercept
/// `−2 + 0.15·k` and the treatments listed for it, 300 patients per arm.
fn synthetic_records(seed: u64, arms: &[&[usize]]) -> Vec<SmokingRecord> {
    let model = binomial_logit_model();
    let theta = SharedParam::new(vec![0.0, 0.6, 0.9, 1.2]).unwrap();
    let mut rng = seeded_rng(seed);
    let mut out = Vec::new();
    for (k, treatments) in arms.iter().enumerate() {
        let intercept = TaskParam::scalar(-2.0 + 0.15 * k as f64);
        for &t in *treatments {
            let design = Design::with_trials(BinomialLogitModel::indicator(t), 300);
            let y = model
                .simulate(&design, &theta, &intercept, &mut rng)
                .unwrap();
            out.push(SmokingRecord {
                study_id: format!("s{k}"),
                treatment: t,
                events: y.outcome.as_count().unwrap(),
                total: 300,
            });
        }
    }
    out
}

#[test]
fn two_study_predictives_are_finite_and_reproducible() {
    let records = synthetic_records(1, &[&[0, 1, 2, 3], &[0, 1, 2, 3]]);
    let a = run_smoking_comparison(&records, &[ProxyMode::Weak], SAMPLES, 10).unwrap();
    assert_eq!(
        a,
        run_smoking_comparison(&records, &[ProxyMode::Weak], SAMPLES, 10).unwrap()
    );
    assert_eq!(a.len(), 2);
    for r in &a {
        assert!(
            r.log_pred_rweighted.is_finite() && r.log_pred_classic.is_finite(),
            "{r:?}"
        );
        assert!(r.se_rweighted.is_finite() && r.se_classic.is_finite());
    }
    // Same data and proxy, fresh chains: only Monte Carlo error differs.
    let intercepts = fixed_effect_intercepts(&records, SAMPLES, 3).unwrap();
    for (study, train, held) in leave_one_study_out(&records) {
        let psi_star = intercepts.iter().find(|(id, _)| *id == study).unwrap().1;
        let proxy = imprecise_estimate_observation(psi_star + 0.5, 3.0);
        let x = rweighted_predictive(&train, &held, &proxy, SAMPLES, 100).unwrap();
        let y = rweighted_predictive(&train, &held, &proxy, SAMPLES, 200).unwrap();
        let se = (x.se.powi(2) + y.se.powi(2)).sqrt();
        let diff = (x.log_pred - y.log_pred).abs();
        assert!(diff < 3.0 * se, "study {study}: |{diff}| vs 3·{se}");
    }
}

#[test]
fn strong_proxy_helps_the_classic_learner() {
    let arms: Vec<&[usize]> = vec![
        &[0, 1],
        &[0, 2],
        &[1, 3],
        &[0, 3],
        &[2, 3],
        &[0, 1, 2],
        &[1, 2],
        &[0, 2, 3],
    ];
    let records = synthetic_records(2, &arms);
    let modes = [ProxyMode::Weak, ProxyMode::Strong];
    let results = run_smoking_comparison(&records, &modes, SAMPLES, 20).unwrap();
    let total = |m: ProxyMode| -> f64 {
        results
            .iter()
            .filter(|r| r.proxy_mode == m)
            .map(|r| r.log_pred_classic)
            .sum()
    };
    let (weak, strong) = (total(ProxyMode::Weak), total(ProxyMode::Strong));
    assert!(strong > weak, "strong {strong} vs weak {weak}");
}
