//! Text and figure writers. CSV is the canonical output; SVG is for quick looks.
//!
//! Numbers are rounded to 12 significant digits and then printed in shortest
//! round-trip form, so identical inputs always produce identical bytes.

use std::fmt::Write as _;

use crate::analysis::AnalysisReport;
use crate::engine::FiringLog;
use crate::error::{Error, Result};
use crate::montecarlo::SweepRow;
use crate::phase_model::PhaseMap;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to `digits` significant digits, printed without trailing noise.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x);
    format!("{rounded}")
}

fn num(x: f64) -> String {
    fmt_sig(x, SIGNIFICANT_DIGITS)
}

pub const FIRING_LOG_HEADER: &str = "time,oscillator,index";

pub fn firing_log_csv(log: &FiringLog) -> String {
    let mut s = String::with_capacity(24 * (log.len() + 1));
    s.push_str(FIRING_LOG_HEADER);
    s.push('\n');
    for r in log.records() {
        let _ = writeln!(s, "{},{},{}", num(r.time), r.oscillator, r.index);
    }
    s
}

pub fn report_json(report: &AnalysisReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Internal(format!("report serialization: {e}")))
}

pub const SWEEP_HEADER: &str = "tau,eps,N,samples,sync,undecided,p_hat,ci_low,ci_high,region";

/// Failed cells keep their row with empty estimate columns.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let region = r.region.map_or("", |g| g.label());
        match &r.cell {
            Ok(c) => {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{}",
                    num(r.tau),
                    num(r.eps),
                    r.n,
                    c.samples,
                    c.sync_count,
                    c.undecided_count,
                    num(c.p_hat),
                    num(c.ci_low),
                    num(c.ci_high),
                    region
                );
            }
            Err(_) => {
                let _ = writeln!(s, "{},{},{},,,,,,,{}", num(r.tau), num(r.eps), r.n, region);
            }
        }
    }
    s
}

const MARGIN: f64 = 50.0;

fn svg_open(s: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

/// Raster plot: one row per oscillator, one tick per firing.
pub fn raster_svg(log: &FiringLog) -> String {
    let n = log.n().max(1);
    let t_end = log.last_time().unwrap_or(1.0).max(1e-9);
    let (pw, row) = (720.0, 24.0);
    let ph = row * n as f64;
    let (w, h) = (pw + 2.0 * MARGIN, ph + 2.0 * MARGIN);
    let x = |t: f64| MARGIN + pw * t / t_end;
    let mut s = String::new();
    svg_open(&mut s, w, h);
    for i in 0..n {
        let y = MARGIN + row * (i as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN - 8.0,
            y + 4.0,
            i + 1
        );
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
            MARGIN + pw
        );
    }
    for r in log.records() {
        let y = MARGIN + row * r.oscillator as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0:.3}" y1="{1:.2}" x2="{0:.3}" y2="{2:.2}" stroke="black" stroke-width="1.5"/>"#,
            x(r.time),
            y + 4.0,
            y + row - 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (0 to {})</text>"#,
        MARGIN + pw / 2.0,
        h - 15.0,
        num(t_end)
    );
    s.push_str("</svg>\n");
    s
}

fn spacing(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
        .min(0.1)
}

/// Heatmap over the unit square: black where `p_hat > 0`, with the dashed
/// region boundary `ε = 1 − f(τ)` overlaid.
pub fn heatmap_svg(rows: &[SweepRow], map: &PhaseMap) -> String {
    let side = 480.0;
    let (w, h) = (side + 2.0 * MARGIN, side + 2.0 * MARGIN);
    let x = |t: f64| MARGIN + side * t;
    let y = |e: f64| MARGIN + side * (1.0 - e);
    let dx = spacing(&mut rows.iter().map(|r| r.tau).collect());
    let dy = spacing(&mut rows.iter().map(|r| r.eps).collect());
    let mut s = String::new();
    svg_open(&mut s, w, h);
    for r in rows {
        let fill = match &r.cell {
            Ok(c) if c.p_hat > 0.0 => "black",
            Ok(_) => "white",
            Err(_) => "#f4a",
        };
        let _ = writeln!(
            s,
            r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}" stroke="#bbb" stroke-width="0.5"/>"##,
            x(r.tau - dx / 2.0),
            y(r.eps + dy / 2.0),
            side * dx,
            side * dy
        );
    }
    let mut path = String::new();
    for k in 0..=200 {
        let t = k as f64 / 200.0;
        let e = 1.0 - map.f_raw(t);
        let _ = write!(path, "{}{:.3},{:.3} ", if k == 0 { "M" } else { "L" }, x(t), y(e));
    }
    let _ = writeln!(
        s,
        r##"<path d="{}" fill="none" stroke="#c00" stroke-width="2" stroke-dasharray="6,4"/>"##,
        path.trim_end()
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v}</text>"#,
            x(v),
            MARGIN + side + 16.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v}</text>"#,
            MARGIN - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">tau</text>"#,
        MARGIN + side / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">eps</text>"#,
        MARGIN + side / 2.0,
        MARGIN + side / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::FiringRecord;
    use crate::montecarlo::EstimateCell;
    use crate::phase_model::RegionClass;

    #[test]
    fn sig_digits() {
        assert_eq!(fmt_sig(2.093_900_000_000_01, 12), "2.0939");
        assert_eq!(fmt_sig(0.1 + 0.2, 12), "0.3");
        assert_eq!(fmt_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(fmt_sig(0.0, 12), "0");
        assert_eq!(fmt_sig(12345.678, 3), "12300");
    }

    #[test]
    fn log_csv() {
        let log = FiringLog::from_records(
            2,
            vec![
                FiringRecord { time: 0.5, oscillator: 1, index: 1 },
                FiringRecord { time: 0.7, oscillator: 0, index: 1 },
            ],
        )
        .unwrap();
        assert_eq!(firing_log_csv(&log), "time,oscillator,index\n0.5,1,1\n0.7,0,1\n");
        let svg = raster_svg(&log);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn sweep_rows() {
        let cell = EstimateCell::from_outcomes(0.5, 0.5, 3, &[crate::montecarlo::SampleOutcome::Synced]);
        let rows = vec![
            SweepRow { tau: 0.5, eps: 0.5, n: 3, region: Some(RegionClass::A2Interior), cell: Ok(cell) },
            SweepRow { tau: 0.2, eps: 0.1, n: 3, region: Some(RegionClass::A1), cell: Err("x".into()) },
        ];
        let csv = sweep_csv(&rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert!(lines[1].starts_with("0.5,0.5,3,1,1,0,1,"));
        assert!(lines[1].ends_with(",A2"));
        assert_eq!(lines[2], "0.2,0.1,3,,,,,,,A1");
        let svg = heatmap_svg(&rows, &PhaseMap::lif(1.05).unwrap());
        assert!(svg.contains("fill=\"black\"") && svg.contains("stroke-dasharray"));
    }
}
