//! Report rendering: a JSON document and plain-text detection, recall and
//! false-discovery tables.

use std::fmt::Write;

use cpn_core::eval::EvalReport;
use serde::Serialize;

use crate::io::to_json;

#[derive(Serialize)]
struct ReportDoc<'a> {
    ap: Option<f64>,
    ap50: Option<f64>,
    ap75: Option<f64>,
    ap_small: Option<f64>,
    ap_medium: Option<f64>,
    ap_large: Option<f64>,
    ar_100: Option<f64>,
    ar_1000: Option<f64>,
    #[serde(rename = "ar_1+")]
    ar_1: Option<f64>,
    #[serde(rename = "ar_2+")]
    ar_2: Option<f64>,
    #[serde(rename = "ar_3+")]
    ar_3: Option<f64>,
    #[serde(rename = "ar_4+")]
    ar_4: Option<f64>,
    #[serde(rename = "ar_5:1")]
    ar_5: Option<f64>,
    #[serde(rename = "ar_6:1")]
    ar_6: Option<f64>,
    #[serde(rename = "ar_7:1")]
    ar_7: Option<f64>,
    #[serde(rename = "ar_8:1")]
    ar_8: Option<f64>,
    af: Option<f64>,
    af5: Option<f64>,
    af25: Option<f64>,
    af50: Option<f64>,
    af_small: Option<f64>,
    af_medium: Option<f64>,
    af_large: Option<f64>,
    ap_tilde: &'a [Option<f64>],
    undefined: &'a [&'static str],
}

/// JSON form of a report. Undefined values are `null`.
pub fn report_json(r: &EvalReport) -> String {
    let [ar_1, ar_2, ar_3, ar_4] = r.ar_area;
    let [ar_5, ar_6, ar_7, ar_8] = r.ar_aspect;
    to_json(&ReportDoc {
        ap: r.ap,
        ap50: r.ap50,
        ap75: r.ap75,
        ap_small: r.ap_small,
        ap_medium: r.ap_medium,
        ap_large: r.ap_large,
        ar_100: r.ar_100,
        ar_1000: r.ar_1000,
        ar_1,
        ar_2,
        ar_3,
        ar_4,
        ar_5,
        ar_6,
        ar_7,
        ar_8,
        af: r.af,
        af5: r.af5,
        af25: r.af25,
        af50: r.af50,
        af_small: r.af_small,
        af_medium: r.af_medium,
        af_large: r.af_large,
        ap_tilde: &r.ap_tilde,
        undefined: &r.undefined,
    })
}

fn table(out: &mut String, title: &str, cols: &[(&str, Option<f64>)]) {
    let _ = writeln!(out, "{title}");
    let mut head = String::new();
    let mut row = String::new();
    for (name, v) in cols {
        let cell = v.map_or_else(|| "--".to_string(), |v| format!("{:.1}", v * 100.0));
        let width = name.len().max(cell.len()).max(5);
        let _ = write!(head, " {name:>width$}");
        let _ = write!(row, " {cell:>width$}");
    }
    let _ = writeln!(out, "{head}\n{row}\n");
}

/// Text tables, values in percent, `--` where undefined.
pub fn report_text(r: &EvalReport) -> String {
    let mut out = String::new();
    table(
        &mut out,
        "Detection",
        &[
            ("AP", r.ap),
            ("AP50", r.ap50),
            ("AP75", r.ap75),
            ("AP_S", r.ap_small),
            ("AP_M", r.ap_medium),
            ("AP_L", r.ap_large),
        ],
    );
    let [a1, a2, a3, a4] = r.ar_area;
    let [r5, r6, r7, r8] = r.ar_aspect;
    table(
        &mut out,
        "Recall, class-agnostic, 1000 proposals",
        &[
            ("AR", r.ar_1000),
            ("AR_1+", a1),
            ("AR_2+", a2),
            ("AR_3+", a3),
            ("AR_4+", a4),
            ("AR_5:1", r5),
            ("AR_6:1", r6),
            ("AR_7:1", r7),
            ("AR_8:1", r8),
        ],
    );
    table(&mut out, "Recall, 100 proposals", &[("AR", r.ar_100)]);
    table(
        &mut out,
        "False discovery",
        &[
            ("AF", r.af),
            ("AF_5", r.af5),
            ("AF_25", r.af25),
            ("AF_50", r.af50),
            ("AF_S", r.af_small),
            ("AF_M", r.af_medium),
            ("AF_L", r.af_large),
        ],
    );
    if !r.undefined.is_empty() {
        let _ = writeln!(out, "undefined: {}", r.undefined.join(", "));
    }
    out
}
