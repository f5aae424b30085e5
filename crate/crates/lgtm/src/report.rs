//! Report emitters: sweep reports as JSON or CSV, light-accuracy reports as
//! JSON or a plain-text comparison table.

use std::fmt::Write as _;
use std::path::Path;

use lgtm_core::eval::LightAccuracyReport;
use lgtm_core::sensitivity::SweepReport;

use crate::formats::write_bytes;
use crate::Result;

pub fn sweep_json(report: &SweepReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn sweep_csv(report: &SweepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seed",
        "channel",
        "alpha",
        "mean_luminance",
        "centroid_x",
        "centroid_y",
        "mean_chroma_shift",
    ])?;
    for e in &report.entries {
        w.write_record([
            e.seed.to_string(),
            e.channel.number().to_string(),
            e.alpha.to_string(),
            e.mean_luminance.to_string(),
            e.luminance_centroid.0.to_string(),
            e.luminance_centroid.1.to_string(),
            e.mean_chroma_shift.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

pub fn accuracy_json(report: &LightAccuracyReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |a| format!("{:.1}%", 100.0 * a))
}

/// Table with the usual quality columns alongside Left/Right light accuracy.
/// Quality metrics need external networks and are printed as `-`.
pub fn accuracy_table(rows: &[(&str, &LightAccuracyReport)]) -> String {
    let header = ["Method", "FID ↓", "NIMA ↑", "CLIP-I ↑", "CLIP-T ↑", "Left ↑", "Right ↑"];
    let body: Vec<[String; 7]> = rows
        .iter()
        .map(|(label, r)| {
            [
                (*label).to_owned(),
                "-".into(),
                "-".into(),
                "-".into(),
                "-".into(),
                percent(r.accuracy_left),
                percent(r.accuracy_right),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..7)
        .map(|i| {
            body.iter()
                .map(|r| r[i].chars().count())
                .chain([header[i].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}", line(&header.map(String::from)));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for r in &body {
        let _ = writeln!(out, "{}", line(r));
    }
    for (label, r) in rows {
        let _ = writeln!(
            out,
            "{label}: {} images, excluded {} without object, {} undetermined, {} detector failures",
            r.per_image.len(),
            r.excluded_no_object,
            r.excluded_undetermined,
            r.detector_failures
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}
