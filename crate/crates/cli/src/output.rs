//! Result files: per-trajectory CSV, JSON summary and an SVG line chart.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use qtraj::ensemble::{EnsembleOutput, EnsembleStats};
use qtraj::stepper::TrajectoryRecord;
use serde_json::{json, Value};

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let file = tmp.persist(path).map_err(|e| e.error)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        file.set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    drop(file);
    Ok(())
}

/// Shortest decimal that reads back to the same `f64` (exponent form for
/// very small or large magnitudes).
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn csv_header(names: &[String]) -> String {
    let mut h = String::from("traj,step,t,outcome,innovation,innovation2");
    for n in names {
        h.push(',');
        h.push_str(n);
    }
    h.push_str(",loglik\n");
    h
}

/// One row per trajectory and recorded step, followed by master-equation rows
/// (`traj = -1`) when a reference was computed.
pub fn render_csv(out: &EnsembleOutput) -> String {
    let stats = &out.stats;
    let pair = stats.mean_innovation2.is_some();
    let mut s = csv_header(&stats.names);
    for (i, rec) in out.records.iter().enumerate() {
        for r in 0..rec.steps.len() {
            let _ = write!(s, "{i},{},{}", rec.steps[r], num(rec.times[r]));
            match rec.outcomes[r] {
                Some(j) => {
                    let _ = write!(s, ",{}", out.outcome_labels[j]);
                }
                None => s.push(','),
            }
            match rec.innovations[r] {
                Some(v) if pair => {
                    let _ = write!(s, ",{},{}", num(v[0]), num(v[1]));
                }
                Some(v) => {
                    let _ = write!(s, ",{},", num(v[0]));
                }
                None => s.push_str(",,"),
            }
            for series in &rec.observables {
                let _ = write!(s, ",{}", num(series[r]));
            }
            let _ = writeln!(s, ",{}", num(rec.log_likelihoods[r]));
        }
    }
    if let Some(reference) = &stats.me_reference {
        for r in 0..stats.steps.len() {
            let _ = write!(s, "-1,{},{},,,", stats.steps[r], num(stats.times[r]));
            for series in reference {
                let _ = write!(s, ",{}", num(series[r]));
            }
            s.push_str(",\n");
        }
    }
    s
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn series(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| finite_or_null(x)).collect())
}

/// Everything except the per-trajectory rows. Run metadata, including the
/// wall-clock fields, lives under `metadata`.
pub fn render_json(stats: &EnsembleStats, outcome_labels: &[String], metadata: Value, warnings: &[String]) -> Value {
    let mut obs = serde_json::Map::new();
    for (k, name) in stats.names.iter().enumerate() {
        let mut entry = serde_json::Map::new();
        entry.insert("mean".into(), series(&stats.mean[k]));
        entry.insert("stderr".into(), series(&stats.stderr[k]));
        if let Some(r) = &stats.me_reference {
            entry.insert("me_reference".into(), series(&r[k]));
        }
        obs.insert(name.clone(), Value::Object(entry));
    }
    json!({
        "metadata": metadata,
        "n_traj": stats.n_traj,
        "outcome_labels": outcome_labels,
        "steps": stats.steps,
        "times": series(&stats.times),
        "observables": obs,
        "mean_innovation": series(&stats.mean_innovation),
        "mean_innovation2": stats.mean_innovation2.as_deref().map(series),
        "max_me_deviation": stats.max_me_deviation.map(finite_or_null),
        "warnings": warnings,
    })
}

const PANEL_W: f64 = 720.0;
const PANEL_H: f64 = 180.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 28.0;
const GAP: f64 = 36.0;
const PALETTE: [&str; 6] = ["#c0392b", "#2c7fb8", "#e67e22", "#8e44ad", "#d35400", "#34495e"];

fn polyline(xs: &[f64], ys: &[f64], map: impl Fn(f64, f64) -> (f64, f64)) -> String {
    let mut pts = String::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if !y.is_finite() {
            continue;
        }
        let (px, py) = map(x, y);
        if !pts.is_empty() {
            pts.push(' ');
        }
        let _ = write!(pts, "{px:.2},{py:.2}");
    }
    pts
}

/// Trajectories drawn behind the ensemble mean.
const MAX_TRACES: usize = 64;

/// One panel per observable: faint single trajectories, the first one
/// highlighted with its detector clicks as dashed verticals, the ensemble
/// mean, and the master-equation reference dashed on top when present.
pub fn render_svg(stats: &EnsembleStats, records: &[TrajectoryRecord], dt: f64, title: &str) -> String {
    let n = stats.names.len().max(1);
    let width = MARGIN_L + PANEL_W + MARGIN_R;
    let height = MARGIN_T + n as f64 * (PANEL_H + GAP);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN_L}" y="16" font-size="13">{}</text>"#, escape(title));
    let t0 = stats.times.first().copied().unwrap_or(0.0);
    let t1 = stats.times.last().copied().unwrap_or(1.0).max(t0 + f64::EPSILON);
    for (k, name) in stats.names.iter().enumerate() {
        let top = MARGIN_T + k as f64 * (PANEL_H + GAP);
        let reference = stats.me_reference.as_ref().map(|r| &r[k]);
        let traces = &records[..records.len().min(MAX_TRACES)];
        let all = stats.mean[k]
            .iter()
            .chain(reference.into_iter().flatten())
            .chain(traces.iter().flat_map(|r| r.observables[k].iter()))
            .filter(|y| y.is_finite());
        let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        if !lo.is_finite() {
            (lo, hi) = (-1.0, 1.0);
        }
        let pad = ((hi - lo) * 0.05).max(1e-9);
        let (lo, hi) = (lo - pad, hi + pad);
        let map = |x: f64, y: f64| {
            (MARGIN_L + (x - t0) / (t1 - t0) * PANEL_W, top + (hi - y) / (hi - lo) * PANEL_H)
        };
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_L}" y="{top:.2}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(s, r#"<text x="4" y="{:.2}">{:.3}</text>"#, top + 10.0, hi);
        let _ = writeln!(s, r#"<text x="4" y="{:.2}">{:.3}</text>"#, top + PANEL_H, lo);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, MARGIN_L + 6.0, top + 14.0, escape(name));
        for rec in traces.iter().skip(1) {
            let _ = writeln!(
                s,
                r##"<polyline fill="none" stroke="#bbb" stroke-opacity="0.5" stroke-width="0.6" points="{}"/>"##,
                polyline(&rec.times, &rec.observables[k], map)
            );
        }
        if let Some(first) = traces.first() {
            for &step in &first.clicks {
                let x = map(step as f64 * dt, lo).0;
                let _ = writeln!(
                    s,
                    r##"<line x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{:.2}" stroke="#27ae60" stroke-width="0.8" stroke-dasharray="3,3"/>"##,
                    top + PANEL_H
                );
            }
            let _ = writeln!(
                s,
                r##"<polyline fill="none" stroke="#27ae60" stroke-width="1" points="{}"/>"##,
                polyline(&first.times, &first.observables[k], map)
            );
        }
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            polyline(&stats.times, &stats.mean[k], map)
        );
        if let Some(r) = reference {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="black" stroke-width="1.2" stroke-dasharray="5,3" points="{}"/>"#,
                polyline(&stats.times, r, map)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN_L}" y="{:.2}">t = {} .. {}</text>"#,
            top + PANEL_H + 14.0,
            num(t0),
            num(t1)
        );
    }
    let legend_y = height - 8.0;
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{legend_y:.2}">grey: trajectories, green: trajectory 0, solid: mean of {} trajectories{}</text>"#,
        MARGIN_L + PANEL_W - 480.0,
        stats.n_traj,
        if stats.me_reference.is_some() { "; dashed: master equation" } else { "" }
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
