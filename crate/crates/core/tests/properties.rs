mod common;

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use cohort_pulse::calendar::{iso_week_fold, PeriodCalendar, PeriodLabel, WeekIndex};
use cohort_pulse::ingest::{
    parse_records, weekly_data_share, write_record_slice, CsvSchema, Measure, MeasureRecord, MeasureSeries,
};
use cohort_pulse::lmm::{encode_design, fit_at_ratio, fit_reml, DesignMatrix, Observation, Reference, RemlProblem};
use cohort_pulse::preprocess::{
    denormalize, detrend, fit_baseline, fit_sinusoid, normalize, AmplitudeBounds, BaselineOptions,
};

use common::*;

/// Random-intercept data with a 3-level factor and one covariate.
fn lmm_instance(seed: u64, k: usize, n: usize) -> (DMatrix<f64>, Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let rows = k * n;
    let x = DMatrix::from_fn(rows, 4, |_, j| match j {
        0 => 1.0,
        3 => z.sample(&mut rng),
        _ => 0.0,
    });
    let mut x = x;
    let mut y = Vec::with_capacity(rows);
    let mut groups = Vec::with_capacity(rows);
    for g in 0..k {
        let u = z.sample(&mut rng) * 0.8;
        for i in 0..n {
            let r = g * n + i;
            let level = if r < 3 { r } else { rng.random_range(0..3usize) };
            if level > 0 {
                x[(r, level)] = 1.0;
            }
            y.push(2.0 + 0.5 * level as f64 - 0.3 * x[(r, 3)] + u + z.sample(&mut rng));
            groups.push(g);
        }
    }
    (x, y, groups)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn reml_shift_invariance(seed in 0u64..10_000, k in 3usize..12, n in 4usize..15, c in -50.0f64..50.0) {
        let (x, y, groups) = lmm_instance(seed, k, n);
        let a = fit_reml(&design(y.clone(), &x, groups.clone(), true)).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let b = fit_reml(&design(shifted, &x, groups, true)).unwrap();
        prop_assert!(close(b.beta[0], a.beta[0] + c, 1e-6));
        for j in 1..4 {
            prop_assert!((b.beta[j] - a.beta[j]).abs() <= 1e-9);
        }
        prop_assert!(close(b.sigma2_eps, a.sigma2_eps, 1e-6));
        prop_assert!((b.sigma2_gamma - a.sigma2_gamma).abs() <= 1e-6 * a.sigma2_eps);
    }

    #[test]
    fn reml_scale_invariance(seed in 0u64..10_000, k in 3usize..12, n in 4usize..15, s in 0.01f64..100.0) {
        let (x, y, groups) = lmm_instance(seed, k, n);
        let a = fit_reml(&design(y.clone(), &x, groups.clone(), true)).unwrap();
        let scaled: Vec<f64> = y.iter().map(|v| v * s).collect();
        let b = fit_reml(&design(scaled, &x, groups, true)).unwrap();
        for j in 0..4 {
            prop_assert!((b.beta[j] - s * a.beta[j]).abs() <= 1e-6 * s * a.beta[j].abs().max(1.0));
            prop_assert!((b.se[j] - s * a.se[j]).abs() <= 1e-6 * s * a.se[j]);
        }
        prop_assert!(close(b.sigma2_eps, s * s * a.sigma2_eps, 1e-6));
        prop_assert!((b.variance_ratio - a.variance_ratio).abs() <= 1e-6 * a.variance_ratio.max(1e-3));
        prop_assert!((b.r2_marginal - a.r2_marginal).abs() <= 1e-6);
        for (pa, pb) in a.p_values.iter().zip(&b.p_values) {
            prop_assert!((pa.unwrap() - pb.unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn reml_optimum_beats_the_log_grid(seed in 0u64..10_000, k in 3usize..10, n in 3usize..10) {
        let (x, y, groups) = lmm_instance(seed, k, n);
        let d = design(y, &x, groups, true);
        let f = fit_reml(&d).unwrap();
        let problem = RemlProblem::new(&d);
        let best = problem.reml_loglik(f.variance_ratio);
        for i in 0..1000 {
            let theta = 10f64.powf(-8.0 + 12.0 * i as f64 / 999.0);
            prop_assert!(best >= problem.reml_loglik(theta) - 1e-9 * best.abs().max(1.0));
        }
    }

    #[test]
    fn zero_ratio_is_ols(seed in 0u64..10_000, k in 1usize..10, n in 5usize..20) {
        let (x, y, groups) = lmm_instance(seed, k, n);
        let f = fit_at_ratio(&design(y.clone(), &x, groups, true), 0.0).unwrap();
        let b = ols(&x, &DVector::from_vec(y));
        for j in 0..4 {
            prop_assert!(close(f.beta[j], b[j], 1e-9));
        }
        prop_assert_eq!(f.sigma2_gamma, 0.0);
    }

    #[test]
    fn gls_oracle_at_the_optimum(seed in 0u64..10_000, k in 2usize..8, n in 3usize..10) {
        let (x, y, groups) = lmm_instance(seed, k, n);
        let f = fit_reml(&design(y.clone(), &x, groups.clone(), true)).unwrap();
        let b = dense_gls(&x, &DVector::from_vec(y), &groups, f.variance_ratio);
        for j in 0..4 {
            prop_assert!(close(f.beta[j], b[j], 1e-9));
        }
    }

    #[test]
    fn r2_ordering_and_bounds(seed in 0u64..10_000, k in 2usize..15, n in 3usize..20) {
        let (x, y, groups) = lmm_instance(seed, k, n);
        let f = fit_reml(&design(y, &x, groups, true)).unwrap();
        prop_assert!(f.r2_marginal <= f.r2_conditional);
        prop_assert!((0.0..=1.0).contains(&f.r2_marginal));
        prop_assert!((0.0..=1.0).contains(&f.r2_conditional));
        prop_assert!(f.sigma2_gamma >= 0.0 && f.sigma2_eps > 0.0);
    }

    #[test]
    fn indicator_coding_one_hot(levels in prop::collection::vec(0usize..9, 4..60)) {
        let obs: Vec<Observation<PeriodLabel>> = levels
            .iter()
            .enumerate()
            .map(|(i, &l)| Observation::new(format!("p{}", i % 3), i as f64, PeriodLabel::ALL[l]))
            .collect();
        prop_assume!(levels.iter().any(|&l| l != levels[0]));
        let d: DesignMatrix = encode_design(&obs, &Reference::NoIntercept, Some(&PeriodLabel::ALL)).unwrap();
        for i in 0..d.n_obs() {
            let row: Vec<(usize, f64)> = d.row(i).collect();
            prop_assert_eq!(row.len(), 1);
            prop_assert_eq!(row[0].1, 1.0);
            prop_assert_eq!(&d.columns()[row[0].0], &obs[i].level.to_string());
        }
        let present: std::collections::BTreeSet<usize> = levels.iter().copied().collect();
        prop_assert_eq!(d.n_cols() + d.dropped_levels().len(), 9);
        prop_assert_eq!(d.n_cols(), present.len());
    }

    #[test]
    fn normalize_is_monotone_and_invertible(seed in 0u64..10_000, n in 100usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rand_distr::SkewNormal::new(60.0, 5.0, 2.0).unwrap();
        let t0 = Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap();
        let pts: Vec<_> = (0..n).map(|i| (t0 + Duration::hours(i as i64), d.sample(&mut rng))).collect();
        let s = MeasureSeries::new("P", Measure::SleepHr, pts).unwrap();
        let b = fit_baseline(&s, &BaselineOptions::default()).unwrap();
        let z = normalize(&s, &b).unwrap();
        let raw: Vec<f64> = s.values().collect();
        let norm: Vec<f64> = z.values().collect();
        for i in 0..n {
            for j in 0..n {
                if raw[i] < raw[j] {
                    prop_assert!(norm[i] < norm[j]);
                }
            }
        }
        prop_assert!(normalize(&z, &b).is_err());
        let back = denormalize(&z, &b).unwrap();
        for (a, b) in back.values().zip(s.values()) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs());
        }
    }

    #[test]
    fn baseline_improves_on_the_moment_start(seed in 0u64..10_000, alpha in -4.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rand_distr::SkewNormal::new(55.0, 6.0, alpha).unwrap();
        let t0 = Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap();
        let pts: Vec<_> = (0..300).map(|i| (t0 + Duration::hours(i), d.sample(&mut rng))).collect();
        let s = MeasureSeries::new("P", Measure::SleepHr, pts).unwrap();
        let b = fit_baseline(&s, &BaselineOptions::default()).unwrap();
        prop_assert!(b.log_likelihood >= b.initial_log_likelihood - 1e-9);
        prop_assert!(b.omega > 0.0 && b.mad >= 0.0 && b.mode.is_finite());
        let dist = b.distribution();
        let eps = 1e-3 * b.omega;
        prop_assert!(dist.pdf(b.mode) >= dist.pdf(b.mode - eps) && dist.pdf(b.mode) >= dist.pdf(b.mode + eps));
    }

    #[test]
    fn series_accounting(rows in prop::collection::vec((0usize..3, 0i64..5000, any::<bool>(), any::<bool>()), 1..120)) {
        let t0 = Utc.with_ymd_and_hms(2022, 6, 1, 0, 0, 0).unwrap();
        let mut text = String::from(cohort_pulse::ingest::CSV_HEADER);
        text.push('\n');
        for &(p, mins, session, bad) in &rows {
            let value = if bad { "NaN".to_string() } else { "62.5".to_string() };
            let ts = cohort_pulse::ingest::format_timestamp(t0 + Duration::minutes(mins));
            text.push_str(&format!("P{p},{ts},waking_hr,{value},{session}\n"));
        }
        let parsed = parse_records(text.as_bytes(), CsvSchema::MeasureRecordsV1).unwrap();
        prop_assert_eq!(parsed.accepted() + parsed.rejections.len(), rows.len());
        let rs = &parsed.records;
        let mut total = 0;
        for pid in rs.participants() {
            let all = cohort_pulse::ingest::series_for(rs, &pid, Measure::WakingHr, true).map_or(0, |s| s.len());
            let kept = cohort_pulse::ingest::series_for(rs, &pid, Measure::WakingHr, false).map_or(0, |s| s.len());
            let sessions = rs.records().iter().filter(|r| r.participant_id == pid && r.session_flag).count();
            prop_assert_eq!(kept + sessions, all);
            total += all;
        }
        prop_assert_eq!(total + parsed.rejections.len(), rows.len());
    }

    #[test]
    fn fold_advances_by_one_week(days in -40_000i64..60_000) {
        let d = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + Duration::days(days);
        let (a, b) = (iso_week_fold(d).get(), iso_week_fold(d + Duration::days(7)).get());
        prop_assert!(b == a + 1 || b == 1 || (a == 52 && b == 52));
    }

    #[test]
    fn detrend_keeps_timestamps_and_mean(seed in 0u64..10_000, amp in 0.0f64..4.0, phase in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let t0 = Utc.with_ymd_and_hms(2021, 8, 1, 18, 0, 0).unwrap();
        let w = 2.0 * std::f64::consts::PI / (365.0 * 86_400.0);
        let pts: Vec<_> = (0..400)
            .map(|i| {
                let t = t0 + Duration::days(i);
                let v = 55.0 + amp * (w * (i as f64) * 86_400.0 + phase).sin() + noise.sample(&mut rng);
                (t, v)
            })
            .collect();
        let s = MeasureSeries::new("P", Measure::SleepHr, pts).unwrap();
        let f = fit_sinusoid(&s, AmplitudeBounds::for_measure(Measure::SleepHr)).unwrap();
        let d = detrend(&s, &f).unwrap();
        prop_assert_eq!(d.len(), s.len());
        for (a, b) in d.points().iter().zip(s.points()) {
            prop_assert_eq!(a.0, b.0);
        }
        let mean = |x: &MeasureSeries| x.values().sum::<f64>() / x.len() as f64;
        prop_assert!((mean(&d) - mean(&s)).abs() <= f.amplitude + 1e-12);
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec((0usize..5, 0i64..100_000_000, 0usize..7, 0.0f64..1.0, any::<bool>()), 1..60)) {
        let t0 = Utc.with_ymd_and_hms(2021, 7, 30, 0, 0, 0).unwrap();
        let mut records: Vec<MeasureRecord> = rows
            .iter()
            .map(|&(p, secs, m, u, session_flag)| {
                let measure = Measure::ALL[m];
                let value = match measure {
                    Measure::SleepHr | Measure::WakingHr => 30.0 + 150.0 * u,
                    Measure::SleepHrv => 1.0 + 400.0 * u,
                    Measure::DeepSleepPct | Measure::LightSleepPct => 100.0 * u,
                    _ => 40_000.0 * u,
                };
                MeasureRecord {
                    participant_id: format!("P{p:02}").into(),
                    timestamp: t0 + Duration::seconds(secs),
                    measure,
                    value,
                    session_flag,
                }
            })
            .collect();
        records.sort_by(|a, b| (&a.participant_id, a.measure, a.timestamp).cmp(&(&b.participant_id, b.measure, b.timestamp)));
        records.dedup_by(|a, b| a.participant_id == b.participant_id && a.measure == b.measure && a.timestamp == b.timestamp);
        let mut buf = Vec::new();
        write_record_slice(&records, &mut buf).unwrap();
        let parsed = parse_records(&buf[..], CsvSchema::MeasureRecordsV1).unwrap();
        prop_assert!(parsed.rejections.is_empty());
        let mut got = parsed.records.records().to_vec();
        got.sort_by(|a, b| (&a.participant_id, a.measure, a.timestamp).cmp(&(&b.participant_id, b.measure, b.timestamp)));
        prop_assert_eq!(got, records);
    }

    #[test]
    fn weekly_shares_sum_to_one(rows in prop::collection::vec((0usize..6, 0i64..40_000), 1..200)) {
        let t0 = Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap();
        let records: Vec<MeasureRecord> = rows
            .iter()
            .map(|&(p, mins)| MeasureRecord {
                participant_id: format!("P{p}").into(),
                timestamp: t0 + Duration::minutes(mins * 7),
                measure: Measure::WakingHr,
                value: 70.0,
                session_flag: false,
            })
            .collect();
        let (rs, _) = cohort_pulse::ingest::RecordSet::from_records(records);
        let shares = weekly_data_share(&rs);
        let mut total = 0;
        for s in shares.values() {
            let sum: f64 = s.shares.values().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(s.max_share <= 1.0 && s.max_share > 0.0);
            total += s.total;
        }
        prop_assert_eq!(total, rs.len());
    }

    #[test]
    fn fold_is_constant_within_an_iso_week(days in -40_000i64..60_000) {
        let d = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + Duration::days(days);
        let monday = d - Duration::days(d.weekday().num_days_from_monday() as i64);
        let w = iso_week_fold(monday);
        for k in 0..7 {
            prop_assert_eq!(iso_week_fold(monday + Duration::days(k)), w);
        }
        let oracle = iso_week(d.year() as i64, d.month(), d.day()).min(52) as u8;
        prop_assert_eq!(iso_week_fold(d), WeekIndex::new(oracle).unwrap());
    }

    #[test]
    fn assigned_label_covers_the_date(days in 0i64..1500) {
        let cal = PeriodCalendar::academic_default();
        let d = NaiveDate::from_ymd_opt(2020, 12, 1).unwrap() + Duration::days(days);
        let label = cal.assign_period(d);
        let covering: Vec<PeriodLabel> = cal.entries().iter().filter(|e| e.contains(d)).map(|e| e.label).collect();
        if covering.is_empty() {
            prop_assert_eq!(label, PeriodLabel::Semester);
        } else {
            prop_assert!(covering.contains(&label));
            let rank = |l: PeriodLabel| PeriodLabel::DEFAULT_PRECEDENCE.iter().position(|&x| x == l).unwrap();
            prop_assert!(covering.iter().all(|&l| rank(label) <= rank(l)));
        }
    }
}
