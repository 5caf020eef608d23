use std::fmt::Write;

use chrono::{Datelike, Duration};

use crate::calendar::{iso_week_fold, PeriodCalendar, PeriodKind, WeekIndex};
use crate::lmm::{CalweekResult, MarkerTier};

/// Inputs of one calendar-week panel.
#[derive(Debug, Clone, PartialEq)]
pub struct WeekPlot {
    pub title: String,
    pub y_label: String,
    /// (week, coefficient, marker tier)
    pub points: Vec<(WeekIndex, f64, MarkerTier)>,
    /// Reference intercept printed in the info box.
    pub intercept: f64,
    pub r2_marginal: f64,
    pub r2_conditional: f64,
}

impl WeekPlot {
    pub fn from_result(title: &str, normalized: bool, r: &CalweekResult) -> Self {
        Self {
            title: title.to_string(),
            y_label: if normalized {
                "coefficient (MAD units)"
            } else {
                "coefficient (native units)"
            }
            .to_string(),
            points: r.present().map(|w| (w.week, w.estimate, w.tier)).collect(),
            intercept: r.semester_median,
            r2_marginal: r.fit.r2_marginal,
            r2_conditional: r.fit.r2_conditional,
        }
    }
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 870.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 360.0;
const SLOTS: f64 = 52.0 * 7.0;

fn kind_style(k: PeriodKind) -> Option<(&'static str, &'static str, u8)> {
    // (fill, legend label, priority when years disagree)
    match k {
        PeriodKind::Exam => Some(("#e06666", "exam", 5)),
        PeriodKind::PreExam => Some(("#f4b6c8", "pre-exam", 4)),
        PeriodKind::GoldenWeek => Some(("#f1c232", "golden week", 3)),
        PeriodKind::NewYear => Some(("#9fc5e8", "new year", 2)),
        PeriodKind::Break => Some(("#93c47d", "break", 1)),
        PeriodKind::Semester => None,
    }
}

fn slot_x(slot: f64) -> f64 {
    LEFT + slot / SLOTS * (RIGHT - LEFT)
}

fn week_x(week: f64) -> f64 {
    slot_x((week - 0.5) * 7.0)
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    f * mag
}

/// Calendar-week coefficient plot. Output depends only on the inputs.
pub fn emit_week_plot(plot: &WeekPlot, cal: &PeriodCalendar) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" font-size="14" text-anchor="middle">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        plot.title
    );

    // period bands on a week × weekday grid
    let mut slots: Vec<Option<PeriodKind>> = vec![None; 52 * 7];
    for e in cal.entries() {
        let mut d = e.start;
        while d <= e.end {
            let kind = cal.assign_period(d).kind();
            if let Some((_, _, prio)) = kind_style(kind) {
                let i = (iso_week_fold(d).get() as usize - 1) * 7 + d.weekday().num_days_from_monday() as usize;
                let cur = slots[i].and_then(kind_style).map_or(0, |x| x.2);
                if prio > cur {
                    slots[i] = Some(kind);
                }
            }
            d += Duration::days(1);
        }
    }
    let mut i = 0;
    while i < slots.len() {
        let Some(kind) = slots[i] else {
            i += 1;
            continue;
        };
        let mut j = i;
        while j < slots.len() && slots[j] == Some(kind) {
            j += 1;
        }
        let (fill, _, _) = kind_style(kind).expect("banded kinds have a style");
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="0.35"/>"#,
            slot_x(i as f64),
            slot_x(j as f64) - slot_x(i as f64),
            BOTTOM - TOP
        );
        i = j;
    }

    for a in cal.annotations() {
        let slot = (iso_week_fold(*a).get() as f64 - 1.0) * 7.0 + a.weekday().num_days_from_monday() as f64 + 0.5;
        let x = slot_x(slot);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{BOTTOM:.2}" stroke="#444444" stroke-width="1" stroke-dasharray="2,3"/>"##
        );
    }

    // y scale
    let (mut lo, mut hi) = plot
        .points
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if hi - lo < 1e-9 {
        lo -= 1.0;
        hi += 1.0;
    }
    let step = nice_step(hi - lo);
    lo = (lo / step).floor() * step;
    hi = (hi / step).ceil() * step;
    let y = |v: f64| BOTTOM - (v - lo) / (hi - lo) * (BOTTOM - TOP);

    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        RIGHT - LEFT,
        BOTTOM - TOP
    );
    let n_ticks = ((hi - lo) / step).round() as i64;
    for k in 0..=n_ticks {
        let v = lo + k as f64 * step;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{yy:.2}" x2="{LEFT:.2}" y2="{yy:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            y(v) + 4.0,
            fmt_tick(v, step),
            yy = y(v)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{LEFT:.2}" y1="{z:.2}" x2="{RIGHT:.2}" y2="{z:.2}" stroke="#888888" stroke-dasharray="4,3"/>"##,
        z = y(0.0)
    );
    for w in [1u8, 5, 10, 15, 20, 25, 30, 35, 40, 45, 52] {
        let x = week_x(w as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{BOTTOM:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{w}</text>"#,
            BOTTOM + 4.0,
            BOTTOM + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">calendar week</text>"#,
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 32.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{c:.2}" text-anchor="middle" transform="rotate(-90 18 {c:.2})">{}</text>"#,
        plot.y_label,
        c = (TOP + BOTTOM) / 2.0
    );

    // connecting line, broken at missing weeks
    let mut pts = plot.points.clone();
    pts.sort_by_key(|p| p.0);
    let mut run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, s: &mut String| {
        if run.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1"/>"#,
                run.join(" ")
            );
        }
        run.clear();
    };
    let mut prev: Option<u8> = None;
    for &(w, v, _) in &pts {
        if prev.is_some_and(|p| p + 1 != w.get()) {
            flush(&mut run, &mut s);
        }
        run.push(format!("{:.2},{:.2}", week_x(w.get() as f64), y(v)));
        prev = Some(w.get());
    }
    flush(&mut run, &mut s);

    for &(w, v, tier) in &pts {
        let (cx, cy) = (week_x(w.get() as f64), y(v));
        let _ = match tier {
            MarkerTier::Square => writeln!(
                s,
                r#"<rect class="marker-square" data-week="{}" x="{:.2}" y="{:.2}" width="8" height="8" fill="black"/>"#,
                w.get(),
                cx - 4.0,
                cy - 4.0
            ),
            MarkerTier::Circle => writeln!(
                s,
                r#"<circle class="marker-circle" data-week="{}" cx="{cx:.2}" cy="{cy:.2}" r="4" fill="black"/>"#,
                w.get()
            ),
            MarkerTier::Plain => writeln!(
                s,
                r#"<circle class="marker-dot" data-week="{}" cx="{cx:.2}" cy="{cy:.2}" r="1.8" fill="black"/>"#,
                w.get()
            ),
        };
    }

    let (bx, by) = (RIGHT - 250.0, TOP + 8.0);
    let _ = writeln!(
        s,
        r##"<rect x="{bx:.2}" y="{by:.2}" width="242" height="48" fill="#eeeeee" stroke="#999999"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">intercept (semester median): {:.3}</text>"#,
        bx + 8.0,
        by + 18.0,
        plot.intercept
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">R² marginal {:.3}, conditional {:.3}</text>"#,
        bx + 8.0,
        by + 36.0,
        plot.r2_marginal,
        plot.r2_conditional
    );

    let mut lx = LEFT;
    let ly = HEIGHT - 30.0;
    for kind in [
        PeriodKind::PreExam,
        PeriodKind::Exam,
        PeriodKind::Break,
        PeriodKind::GoldenWeek,
        PeriodKind::NewYear,
    ] {
        let (fill, label, _) = kind_style(kind).expect("styled kind");
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.2}" y="{:.2}" width="12" height="12" fill="{fill}" fill-opacity="0.6"/><text x="{:.2}" y="{ly:.2}">{label}</text>"#,
            ly - 10.0,
            lx + 16.0
        );
        lx += 100.0;
    }
    let _ = writeln!(
        s,
        r#"<text x="{lx:.2}" y="{ly:.2}">square p&lt;0.05, circle p&lt;0.1</text>"#
    );
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    };
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plot(points: Vec<(u8, f64, MarkerTier)>) -> WeekPlot {
        WeekPlot {
            title: "t".into(),
            y_label: "y".into(),
            points: points
                .into_iter()
                .map(|(w, v, t)| (WeekIndex::new(w).unwrap(), v, t))
                .collect(),
            intercept: 0.1,
            r2_marginal: 0.01,
            r2_conditional: 0.3,
        }
    }

    #[test]
    fn no_markers_without_significance() {
        let svg = emit_week_plot(
            &plot((1..=52).map(|w| (w, (w as f64).sin(), MarkerTier::Plain)).collect()),
            &PeriodCalendar::academic_default(),
        );
        assert!(!svg.contains("marker-square"));
        assert!(!svg.contains("marker-circle"));
        assert_eq!(svg.matches("marker-dot").count(), 52);
    }

    #[test]
    fn square_at_week_30() {
        let svg = emit_week_plot(
            &plot(vec![(29, 0.0, MarkerTier::Plain), (30, 0.5, MarkerTier::Square)]),
            &PeriodCalendar::academic_default(),
        );
        let x = week_x(30.0) - 4.0;
        assert!(svg.contains(&format!(r#"data-week="30" x="{x:.2}""#)));
    }

    #[test]
    fn bands_use_period_colors() {
        let svg = emit_week_plot(
            &plot(vec![(1, 0.0, MarkerTier::Plain)]),
            &PeriodCalendar::academic_default(),
        );
        for color in ["#e06666", "#f4b6c8", "#93c47d", "#f1c232"] {
            assert!(
                svg.contains(&format!(r#"fill="{color}" fill-opacity="0.35""#)),
                "{color}"
            );
        }
    }

    #[test]
    fn deterministic() {
        let p = plot(vec![(3, -0.2, MarkerTier::Circle), (4, 0.3, MarkerTier::Square)]);
        let cal = PeriodCalendar::academic_default();
        assert_eq!(emit_week_plot(&p, &cal), emit_week_plot(&p, &cal));
    }
}
