mod common;

use fairchannel::cells::{discretize, select_features};
use fairchannel::context::{empirical_context, ChannelSource, ContextOptions, GroupSource};
use fairchannel::dataset::load_csv;
use fairchannel::report::{run_audit, score_records, AuditOptions};
use fairchannel::schema::DatasetSchema;
use fairchannel::Error;
use fairchannel_core::correction::{correction_function, fl_from_membership_model, log_likelihood_ratio_fl};
use fairchannel_core::kde::Bandwidth;
use fairchannel_core::LambdaWeights;

fn synthetic() -> fairchannel::dataset::GroupedDataset {
    let schema = DatasetSchema::load(&common::compas_schema()).unwrap();
    load_csv(&common::fixture("compas_synthetic.csv"), &schema).unwrap()
}

#[test]
fn ingestion_accounts_for_every_row() {
    let ds = synthetic();
    let s = &ds.stats;
    assert_eq!(s.rows_read, 200);
    assert_eq!(
        s.filtered + s.excluded_group + s.dropped_missing + s.records,
        s.rows_read
    );
    assert!(s.filtered >= 8);
    assert_eq!(s.group_counts[0] + s.group_counts[1], s.records);
}

#[test]
fn saturated_membership_model_recovers_empirical_log_ratio() {
    let ds = synthetic();
    // one-hot bins of a single feature make the membership model saturated
    let features = select_features(&ds, Some("Age")).unwrap();
    let cells = discretize(&ds, &features);
    let opts = ContextOptions {
        channel: ChannelSource::Empirical,
        groups: GroupSource::Model,
        ..ContextOptions::default()
    };
    let modelled = empirical_context(&ds, &cells, &opts).unwrap();
    let empirical = empirical_context(
        &ds,
        &cells,
        &ContextOptions {
            channel: ChannelSource::Empirical,
            ..ContextOptions::default()
        },
    )
    .unwrap();
    for (a, b) in modelled.ctx.p0().masses().iter().zip(empirical.ctx.p0().masses()) {
        assert!((a - b).abs() <= 1e-9);
    }
    let posterior = modelled.membership_posterior.as_ref().unwrap();
    let from_model = fl_from_membership_model(posterior, &empirical.ctx).unwrap();
    let direct = log_likelihood_ratio_fl(&empirical.ctx).unwrap();
    for (a, b) in from_model.f_l.values().iter().zip(direct.values()) {
        assert!((a - b).abs() <= 1e-6, "{a} {b}");
    }
}

#[test]
fn record_scores_follow_their_cells() {
    let ds = synthetic();
    let cells = discretize(&ds, &select_features(&ds, None).unwrap());
    let opts = AuditOptions {
        lam: LambdaWeights::new(0.0, 1.0, 0.0, 1.0).unwrap(),
        context: ContextOptions {
            groups: GroupSource::Model,
            ..ContextOptions::default()
        },
        bandwidth: Bandwidth::Silverman,
    };
    let out = run_audit(&ds, &cells, &opts).unwrap();
    let result = out.correction.as_ref().unwrap();
    let scores = score_records(&cells, result).unwrap();
    for (r, &c) in cells.record_cell.iter().enumerate() {
        assert_eq!(scores[r], result.f_star.value(c));
    }
    // f* is centered with unit norm under p0
    let p0 = out.fitted.ctx.p0().masses();
    let f = result.f_star.values();
    let mean: f64 = p0.iter().zip(f).map(|(p, v)| p * v).sum();
    let second: f64 = p0.iter().zip(f).map(|(p, v)| p * v * v).sum();
    assert!(mean.abs() < 1e-9 && (second - 1.0).abs() < 1e-9);

    let mut broken = cells.clone();
    broken.record_cell[0] = cells.cells.len();
    assert!(matches!(
        score_records(&broken, result),
        Err(Error::UnknownCell { record: 0 })
    ));
}

#[test]
fn unsmoothed_empirical_groups_report_violations() {
    let ds = synthetic();
    let cells = discretize(&ds, &select_features(&ds, None).unwrap());
    let mut opts = AuditOptions {
        lam: LambdaWeights::new(0.0, 1.0, 0.0, 1.0).unwrap(),
        context: ContextOptions::default(),
        bandwidth: Bandwidth::Silverman,
    };
    match run_audit(&ds, &cells, &opts) {
        Err(Error::ContinuityViolations { cells: bad }) => assert!(!bad.is_empty()),
        other => panic!("{other:?}"),
    }
    // the output-only objective does not need p0 << p1
    opts.lam = LambdaWeights::new(0.0, 0.0, 0.0, 1.0).unwrap();
    let out = run_audit(&ds, &cells, &opts).unwrap();
    assert!(out.report.delta_opt < 0.0);
    opts.context.smoothing = Some(1e-9);
    opts.lam = LambdaWeights::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let out = run_audit(&ds, &cells, &opts).unwrap();
    assert!(out.correction.unwrap().f_star.values().iter().all(|v| v.is_finite()));
}

#[test]
fn closed_form_matches_core_on_audit_context() {
    let ds = synthetic();
    let cells = discretize(&ds, &select_features(&ds, Some("Age,PriorCounts")).unwrap());
    let lam = LambdaWeights::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let opts = AuditOptions {
        lam,
        context: ContextOptions::default(),
        bandwidth: Bandwidth::Fixed(0.25),
    };
    let out = run_audit(&ds, &cells, &opts).unwrap();
    let direct = correction_function(&lam, &out.fitted.ctx).unwrap();
    assert_eq!(out.report.delta_opt, direct.delta_opt);
    for (row, v) in out.report.cells.iter().zip(direct.f_star.values()) {
        assert_eq!(row.f_star, Some(*v));
    }
    for set in &out.report.densities {
        for s in &set.strata {
            assert!(s.bandwidth.is_none() || s.bandwidth == Some(0.25));
        }
    }
}
