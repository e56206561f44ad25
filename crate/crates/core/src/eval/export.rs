use std::io::Write;

use serde_json::{json, Map, Value};

use super::{Aggregate, EvalReport, RocCurve};
use crate::fmt_f64;

const UNDEFINED: &str = "undefined";

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), fmt_f64)
}

fn value(v: Option<f64>) -> Value {
    match v {
        Some(x) if x.is_finite() => json!(x),
        Some(x) => json!(fmt_f64(x)),
        None => json!(UNDEFINED),
    }
}

/// Table of per-class and aggregate rows. Regression columns are filled on
/// the micro row only; undefined rates are written as `undefined`.
pub fn write_report_csv<W: Write>(report: &EvalReport, mut out: W) -> std::io::Result<W> {
    writeln!(out, "metric,observations,threshold,auc,false_alarm_rate,precision,precision_ppv,mse,rmse,r")?;
    for c in &report.classes {
        writeln!(
            out,
            "class_{},{},{},{},{},{},{},,,",
            c.class,
            c.observations,
            cell(c.eer.map(|e| e.threshold)),
            cell(c.auc),
            cell(c.fpr),
            cell(c.precision),
            cell(c.precision_ppv)
        )?;
    }
    let total: usize = report.classes.iter().map(|c| c.observations).sum();
    let reg = report.regression.map_or_else(
        || ",,".to_string(),
        |m| format!("{},{},{}", fmt_f64(m.mse), fmt_f64(m.rmse), cell(m.r)),
    );
    let row = |name: &str, a: &Aggregate, tail: &str| {
        format!(
            "{name},{total},,{},{},{},{},{tail}",
            cell(a.auc),
            cell(a.fpr),
            cell(a.precision),
            cell(a.precision_ppv)
        )
    };
    writeln!(out, "{}", row("micro", &report.micro, &reg))?;
    writeln!(out, "{}", row("macro", &report.macro_avg, ",,"))?;
    writeln!(out, "{}", row("weighted_macro", &report.weighted_macro, ",,"))?;
    Ok(out)
}

fn aggregate_json(a: &Aggregate) -> Value {
    json!({
        "auc": value(a.auc),
        "false_alarm_rate": value(a.fpr),
        "precision": value(a.precision),
        "precision_ppv": value(a.precision_ppv),
    })
}

/// Key/value rendering of the whole report.
pub fn write_report_json<W: Write>(report: &EvalReport, mut out: W) -> std::io::Result<W> {
    let mut classes = Map::new();
    for c in &report.classes {
        let mut entry = json!({
            "observations": c.observations,
            "auc": value(c.auc),
            "false_alarm_rate": value(c.fpr),
            "precision": value(c.precision),
            "precision_ppv": value(c.precision_ppv),
            "eer_threshold": value(c.eer.map(|e| e.threshold)),
            "eer_tpr": value(c.eer.map(|e| e.tpr)),
            "eer_fpr": value(c.eer.map(|e| e.fpr)),
        });
        if let Some(cm) = c.confusion {
            entry["confusion"] = json!({ "tp": cm.tp, "fp": cm.fp, "fn": cm.fn_, "tn": cm.tn });
        }
        classes.insert(format!("class_{}", c.class), entry);
    }
    let regression = report.regression.map_or(Value::Null, |m| {
        json!({ "mse": value(Some(m.mse)), "rmse": value(Some(m.rmse)), "r": value(m.r), "r_clamped": m.r_clamped })
    });
    let doc = json!({
        "classes": Value::Object(classes),
        "micro": aggregate_json(&report.micro),
        "macro": aggregate_json(&report.macro_avg),
        "weighted_macro": aggregate_json(&report.weighted_macro),
        "regression": regression,
        "warnings": report.warnings,
    });
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(out)
}

pub fn write_roc_csv<W: Write>(curve: &RocCurve, mut out: W) -> std::io::Result<W> {
    writeln!(out, "fpr,tpr,threshold")?;
    for p in &curve.points {
        writeln!(out, "{},{},{}", fmt_f64(p.fpr), fmt_f64(p.tpr), fmt_f64(p.threshold))?;
    }
    Ok(out)
}

/// Static plot with one polyline per curve and the chance diagonal.
pub fn write_roc_svg<W: Write>(curves: &[(String, &RocCurve)], mut out: W) -> std::io::Result<W> {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 40.0;
    const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];
    let full = SIZE + 2.0 * PAD;
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#)?;
    writeln!(out, r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#)?;
    writeln!(
        out,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{PAD}" stroke="gray" stroke-dasharray="4 4"/>"#,
        PAD + SIZE,
        PAD + SIZE
    )?;
    for (k, (name, curve)) in curves.iter().enumerate() {
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", PAD + p.fpr * SIZE, PAD + (1.0 - p.tpr) * SIZE))
            .collect();
        let color = COLORS[k % COLORS.len()];
        writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "))?;
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{name}</text>"#,
            PAD + SIZE - 120.0,
            PAD + SIZE - 10.0 - 16.0 * k as f64
        )?;
    }
    writeln!(out, r#"<text x="{}" y="{}" font-size="12">false positive rate</text>"#, PAD + SIZE / 2.0 - 50.0, full - 10.0)?;
    writeln!(
        out,
        r#"<text x="12" y="{}" font-size="12" transform="rotate(-90 12 {})">true positive rate</text>"#,
        PAD + SIZE / 2.0 + 50.0,
        PAD + SIZE / 2.0 + 50.0
    )?;
    writeln!(out, "</svg>")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CrashRisk;
    use crate::eval::{one_vs_rest_report, regression_metrics};

    #[test]
    fn csv_rows_and_undefined_markers() {
        let truth = vec![CrashRisk::None, CrashRisk::High, CrashRisk::None, CrashRisk::High];
        let scores = vec![[0.9, 0.1, 0.0], [0.0, 0.3, 0.7], [0.6, 0.4, 0.0], [0.1, 0.2, 0.8]];
        let mut report = one_vs_rest_report(&scores, &truth).unwrap();
        report.regression = Some(regression_metrics(&[0.0, 1.0, 0.0, 1.0], &[0.0, 1.0, 0.0, 1.0]).unwrap());
        let text = String::from_utf8(write_report_csv(&report, Vec::new()).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[2].starts_with("class_0.5,0,undefined,undefined"));
        assert!(lines[4].starts_with("micro,4,,") && lines[4].ends_with(",0,0,1"));
        let json = String::from_utf8(write_report_json(&report, Vec::new()).unwrap()).unwrap();
        let parsed: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["classes"]["class_0.5"]["auc"], json!("undefined"));
        assert_eq!(parsed["micro"]["auc"], json!(1.0));
    }

    #[test]
    fn roc_csv_and_svg() {
        let curve = crate::eval::roc_curve(&[0.2, 0.8], &[false, true]).unwrap();
        let text = String::from_utf8(write_roc_csv(&curve, Vec::new()).unwrap()).unwrap();
        assert_eq!(text, "fpr,tpr,threshold\n0,0,inf\n0,1,0.8\n1,1,0.2\n");
        let svg = String::from_utf8(write_roc_svg(&[("cnn".into(), &curve)], Vec::new()).unwrap()).unwrap();
        assert!(svg.contains("<polyline") && svg.trim_end().ends_with("</svg>"));
    }
}
