//! `dcosim analyze`: fold result CSVs into per-receiver curve files and
//! report where each receiver crosses a target BER (log-linear
//! interpolation in (gamma_e, log10 ber)), plus the pairwise dB gaps.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use crate::config::config_error;
use crate::simulate::CSV_HEADER;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Result CSVs produced by `dcosim simulate`.
    #[arg(long = "csv", required = true)]
    pub csv: Vec<PathBuf>,
    /// Write one `<receiver>.dat` curve file per receiver here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Report each receiver's crossing of this BER and the pairwise gaps.
    #[arg(long)]
    pub target_ber: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CurvePoint {
    gamma_e_db: f64,
    ber: f64,
    ci_low: f64,
    ci_high: f64,
    frames: u64,
}

pub fn run(args: AnalyzeArgs) -> anyhow::Result<()> {
    let mut rows: Vec<(String, CurvePoint)> = Vec::new();
    for path in &args.csv {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        parse_csv(&text, &mut rows)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    }
    let curves = fold_curves(rows);
    if curves.is_empty() {
        return Err(config_error("no data rows in the given CSVs"));
    }

    print!("{}", summary_table(&curves));
    if let Some(target) = args.target_ber {
        if !(target.is_finite() && target > 0.0) {
            return Err(config_error("target-ber must be positive"));
        }
        print!("{}", gap_report(&curves, target));
    }

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        for (name, points) in &curves {
            let mut text = String::from("# gamma_e_db ber ci_low ci_high frames\n");
            for p in points {
                writeln!(text, "{} {} {} {} {}", p.gamma_e_db, p.ber, p.ci_low, p.ci_high, p.frames)
                    .unwrap();
            }
            let path = dir.join(format!("{name}.dat"));
            std::fs::write(&path, text)?;
            eprintln!("wrote {path}", path = path.display());
        }
    }
    Ok(())
}

/// Parse rows, tolerating repeated header lines (concatenated files).
fn parse_csv(text: &str, rows: &mut Vec<(String, CurvePoint)>) -> Result<(), String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == CSV_HEADER => {}
        Some((_, first)) => return Err(format!("unexpected header {first:?}")),
        None => return Err("empty file".into()),
    }
    for (i, line) in lines {
        if line.is_empty() || line == CSV_HEADER {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != CSV_HEADER.split(',').count() {
            return Err(format!("line {}: expected {} fields", i + 1, CSV_HEADER.split(',').count()));
        }
        let num = |j: usize| -> Result<f64, String> {
            f[j].parse().map_err(|_| format!("line {}: bad number {:?}", i + 1, f[j]))
        };
        rows.push((
            f[1].to_string(),
            CurvePoint {
                gamma_e_db: num(0)?,
                ber: num(2)?,
                ci_low: num(5)?,
                ci_high: num(6)?,
                frames: f[4]
                    .parse()
                    .map_err(|_| format!("line {}: bad frame count {:?}", i + 1, f[4]))?,
            },
        ));
    }
    Ok(())
}

/// Group rows by receiver, sort by Eb/N0, and collapse duplicate sweep
/// points keeping the run with the most frames (ties: the latest row).
fn fold_curves(rows: Vec<(String, CurvePoint)>) -> BTreeMap<String, Vec<CurvePoint>> {
    let mut curves: BTreeMap<String, Vec<(usize, CurvePoint)>> = BTreeMap::new();
    for (idx, (name, p)) in rows.into_iter().enumerate() {
        curves.entry(name).or_default().push((idx, p));
    }
    curves
        .into_iter()
        .map(|(name, mut pts)| {
            pts.sort_by(|(ia, a), (ib, b)| {
                a.gamma_e_db
                    .total_cmp(&b.gamma_e_db)
                    .then(a.frames.cmp(&b.frames))
                    .then(ia.cmp(ib))
            });
            let mut folded: Vec<CurvePoint> = Vec::new();
            for (_, p) in pts {
                match folded.last_mut() {
                    Some(last) if last.gamma_e_db == p.gamma_e_db => *last = p,
                    _ => folded.push(p),
                }
            }
            (name, folded)
        })
        .collect()
}

fn summary_table(curves: &BTreeMap<String, Vec<CurvePoint>>) -> String {
    let mut out = String::from("receiver    points  gamma_e_db        min_ber\n");
    for (name, points) in curves {
        let lo = points.first().unwrap().gamma_e_db;
        let hi = points.last().unwrap().gamma_e_db;
        let min_ber = points.iter().map(|p| p.ber).fold(f64::INFINITY, f64::min);
        writeln!(
            out,
            "{name:<10}  {:>6}  {:<16}  {min_ber:.4e}",
            points.len(),
            format!("{lo} .. {hi}")
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Crossing {
    /// Interpolated Eb/N0 where the curve reaches the target.
    At(f64),
    /// Already below the target at the first sweep point.
    BeforeFirst(f64),
    /// Bracketed by a zero-error point; only an upper bound is known.
    Bounded(f64),
    /// The curve never gets down to the target.
    NotReached(f64),
}

fn crossing(points: &[CurvePoint], target: f64) -> Crossing {
    if let Some(first) = points.first() {
        if first.ber > 0.0 && first.ber < target {
            return Crossing::BeforeFirst(first.gamma_e_db);
        }
    }
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.ber < target || a.ber <= 0.0 {
            continue;
        }
        if b.ber > 0.0 && b.ber <= target {
            let (la, lb, lt) = (a.ber.log10(), b.ber.log10(), target.log10());
            let frac = if (la - lb).abs() < 1e-12 { 0.0 } else { (la - lt) / (la - lb) };
            return Crossing::At(a.gamma_e_db + frac * (b.gamma_e_db - a.gamma_e_db));
        }
        if b.ber == 0.0 {
            return Crossing::Bounded(b.gamma_e_db);
        }
    }
    let min_ber = points.iter().map(|p| p.ber).filter(|b| *b > 0.0).fold(f64::INFINITY, f64::min);
    Crossing::NotReached(min_ber)
}

fn gap_report(curves: &BTreeMap<String, Vec<CurvePoint>>, target: f64) -> String {
    let mut out = format!("\ncrossings at ber {target:e}\n");
    let crossings: Vec<(&str, Crossing)> =
        curves.iter().map(|(n, pts)| (n.as_str(), crossing(pts, target))).collect();
    for (name, c) in &crossings {
        match c {
            Crossing::At(g) => writeln!(out, "  {name:<10} {g:.3} dB").unwrap(),
            Crossing::BeforeFirst(g) => {
                writeln!(out, "  {name:<10} below target already at {g} dB").unwrap()
            }
            Crossing::Bounded(g) => {
                writeln!(out, "  {name:<10} <= {g} dB (next point measured zero errors)").unwrap()
            }
            Crossing::NotReached(min) => {
                writeln!(out, "  {name:<10} not reached (min ber {min:.3e})").unwrap()
            }
        }
    }
    if crossings.len() < 2 {
        return out;
    }
    out.push_str("gaps\n");
    for i in 0..crossings.len() {
        for j in i + 1..crossings.len() {
            if let (Crossing::At(a), Crossing::At(b)) = (crossings[i].1, crossings[j].1) {
                writeln!(out, "  {} - {} = {:.3} dB", crossings[i].0, crossings[j].0, a - b)
                    .unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(gamma: f64, ber: f64) -> CurvePoint {
        CurvePoint { gamma_e_db: gamma, ber, ci_low: ber * 0.9, ci_high: ber * 1.1, frames: 100 }
    }

    #[test]
    fn synthetic_half_db_offset_reports_half_db_gap() {
        // Identical log-linear ramps shifted by exactly 0.5 dB.
        let mut curves = BTreeMap::new();
        let base: Vec<CurvePoint> =
            (0..5).map(|i| pt(10.0 + i as f64, 10f64.powi(-1 - i))).collect();
        let shifted: Vec<CurvePoint> =
            base.iter().map(|p| CurvePoint { gamma_e_db: p.gamma_e_db + 0.5, ..*p }).collect();
        curves.insert("a".to_string(), shifted);
        curves.insert("b".to_string(), base);
        let report = gap_report(&curves, 3e-3);
        let line = report.lines().find(|l| l.contains("a - b")).unwrap();
        let gap: f64 = line.split('=').nth(1).unwrap().trim().trim_end_matches(" dB").parse().unwrap();
        assert!((gap - 0.5).abs() < 0.01, "{report}");
    }

    #[test]
    fn single_curve_has_no_gap_section() {
        let mut curves = BTreeMap::new();
        curves.insert("map".to_string(), vec![pt(10.0, 1e-2), pt(11.0, 1e-4)]);
        let report = gap_report(&curves, 1e-3);
        assert!(!report.contains("gaps"), "{report}");
        assert!(report.contains("10.5"), "{report}");
    }

    #[test]
    fn target_below_all_points_is_not_reached() {
        let points = vec![pt(10.0, 1e-2), pt(11.0, 1e-3)];
        assert_eq!(crossing(&points, 1e-5), Crossing::NotReached(1e-3));
    }

    #[test]
    fn zero_error_points_give_bounds_not_crossings() {
        let points = vec![pt(10.0, 1e-2), pt(11.0, 0.0)];
        assert_eq!(crossing(&points, 1e-3), Crossing::Bounded(11.0));
    }

    #[test]
    fn duplicate_sweep_points_keep_the_biggest_run() {
        let rows = vec![
            ("map".to_string(), CurvePoint { frames: 100, ..pt(10.0, 1e-2) }),
            ("map".to_string(), CurvePoint { frames: 2000, ..pt(10.0, 2e-2) }),
            ("map".to_string(), CurvePoint { frames: 500, ..pt(10.0, 3e-2) }),
        ];
        let curves = fold_curves(rows);
        let folded = &curves["map"];
        assert_eq!(folded.len(), 1);
        assert_eq!(folded[0].frames, 2000);
        assert_eq!(folded[0].ber, 2e-2);
    }

    #[test]
    fn parser_accepts_own_output_and_rejects_noise() {
        let text = format!("{CSV_HEADER}\n5.2,map,0.0037,0.15,400,0.0034,0.0039,12.5,7\n");
        let mut rows = Vec::new();
        parse_csv(&text, &mut rows).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].0, "map");
        assert_eq!(rows[0].1.frames, 400);

        assert!(parse_csv("ber,seed\n", &mut rows).is_err());
        let bad = format!("{CSV_HEADER}\n5.2,map,x,0.15,400,0.0034,0.0039,12.5,7\n");
        assert!(parse_csv(&bad, &mut rows).is_err());
    }
}
