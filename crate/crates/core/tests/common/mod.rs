//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use cohort_pulse::lmm::DesignMatrix;

/// ANOVA estimators for a balanced one-way random-effects layout:
/// returns (σ²_γ, σ²_ε, grand mean).
pub fn anova_one_way(groups: &[Vec<f64>]) -> (f64, f64, f64) {
    let k = groups.len() as f64;
    let n = groups[0].len() as f64;
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / k;
    let ssb: f64 = means.iter().map(|m| n * (m - grand).powi(2)).sum();
    let ssw: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let msb = ssb / (k - 1.0);
    let msw = ssw / (k * (n - 1.0));
    ((msb - msw) / n, msw, grand)
}

/// GLS estimate with `V = I + θ·ZZᵀ`, built densely.
pub fn dense_gls(x: &DMatrix<f64>, y: &DVector<f64>, groups: &[usize], theta: f64) -> DVector<f64> {
    let n = y.len();
    let v = DMatrix::from_fn(n, n, |i, j| {
        let same = if groups[i] == groups[j] { theta } else { 0.0 };
        same + if i == j { 1.0 } else { 0.0 }
    });
    let chol = v.cholesky().expect("V is SPD");
    let vinv_x = chol.solve(x);
    let vinv_y = chol.solve(y);
    let a = x.transpose() * vinv_x;
    let b = x.transpose() * vinv_y;
    a.lu().solve(&b).expect("full rank")
}

/// Ordinary least squares through an SVD solve.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone().svd(true, true).solve(y, 1e-14).expect("svd solve")
}

pub fn design(y: Vec<f64>, x: &DMatrix<f64>, groups: Vec<usize>, intercept: bool) -> DesignMatrix {
    let n_groups = groups.iter().max().map_or(0, |g| g + 1);
    let names: Vec<Arc<str>> = (0..n_groups).map(|g| Arc::from(format!("g{g:03}"))).collect();
    let cols: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    DesignMatrix::from_dense(y, x, groups, names, cols, intercept).expect("valid design")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// ISO-8601 week numbering from first principles (no date library).

fn is_leap(y: i64) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

/// Days since 1970-01-01 for a proleptic Gregorian date.
pub fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m as i64 + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// 1 = Monday … 7 = Sunday.
pub fn iso_weekday(y: i64, m: u32, d: u32) -> i64 {
    // 1970-01-01 was a Thursday
    (days_from_civil(y, m, d) + 3).rem_euclid(7) + 1
}

fn weeks_in_year(y: i64) -> i64 {
    let jan1 = iso_weekday(y, 1, 1);
    if jan1 == 4 || (is_leap(y) && jan1 == 3) {
        53
    } else {
        52
    }
}

pub fn iso_week(y: i64, m: u32, d: u32) -> i64 {
    let ordinal = days_from_civil(y, m, d) - days_from_civil(y, 1, 1) + 1;
    let w = (ordinal - iso_weekday(y, m, d) + 10) / 7;
    if w < 1 {
        weeks_in_year(y - 1)
    } else if w > weeks_in_year(y) {
        1
    } else {
        w
    }
}

/// The period table as published, one `(label, start, end)` per interval,
/// dates as `(y, m, d)`.
pub const PUBLISHED_PERIODS: &[(&str, (i64, u32, u32), (i64, u32, u32))] = &[
    ("spring_exam", (2021, 1, 21), (2021, 2, 3)),
    ("spring_exam", (2022, 1, 20), (2022, 2, 2)),
    ("spring_exam", (2023, 1, 23), (2023, 2, 3)),
    ("spring_break", (2021, 2, 4), (2021, 4, 7)),
    ("spring_break", (2022, 2, 3), (2022, 4, 7)),
    ("spring_break", (2023, 2, 4), (2023, 4, 7)),
    ("golden_week", (2021, 4, 29), (2021, 5, 5)),
    ("golden_week", (2022, 4, 29), (2022, 5, 5)),
    ("golden_week", (2023, 4, 29), (2023, 5, 5)),
    ("summer_exam", (2021, 7, 23), (2021, 8, 4)),
    ("summer_exam", (2022, 7, 22), (2022, 8, 4)),
    ("summer_exam", (2023, 7, 24), (2023, 8, 4)),
    ("summer_break", (2021, 8, 5), (2021, 9, 23)),
    ("summer_break", (2022, 8, 5), (2022, 9, 23)),
    ("summer_break", (2023, 8, 5), (2023, 9, 23)),
    ("new_year", (2021, 12, 15), (2022, 1, 7)),
    ("new_year", (2022, 12, 15), (2023, 1, 7)),
];

/// Expected label for a day number: pre-exams are the 14 days before each
/// exam start; exams > pre-exams > new year > golden week > breaks.
pub fn expected_period(day: i64) -> &'static str {
    let civil = |t: (i64, u32, u32)| days_from_civil(t.0, t.1, t.2);
    let mut intervals: Vec<(&str, i64, i64)> = PUBLISHED_PERIODS
        .iter()
        .map(|&(l, s, e)| (l, civil(s), civil(e)))
        .collect();
    for &(l, s, _) in PUBLISHED_PERIODS {
        let pre = match l {
            "spring_exam" => "spring_pre_exam",
            "summer_exam" => "summer_pre_exam",
            _ => continue,
        };
        intervals.push((pre, civil(s) - 14, civil(s) - 1));
    }
    let hits = |label: &str| intervals.iter().any(|&(l, s, e)| l == label && s <= day && day <= e);
    for label in [
        "spring_exam",
        "summer_exam",
        "spring_pre_exam",
        "summer_pre_exam",
        "new_year",
        "golden_week",
        "spring_break",
        "summer_break",
    ] {
        if hits(label) {
            return label;
        }
    }
    "semester"
}
