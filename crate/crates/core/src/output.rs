//! CSV, SVG and manifest writers for channel dumps and sweep results.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::ratesplit::Scheme;
use crate::scenario::{SkippedPoint, SweepParameter, SweepResult};

pub const SWEEP_HEADER: &str =
    "param,scheme,groups,mean_user_rate_bps,std,ci95_lo,ci95_hi,sum_rate_bps,trials,failures";
pub const TRIALS_HEADER: &str = "param,scheme,groups,trial,seed,mean_user_rate_bps,sum_rate_bps";

/// Nine significant digits in scientific notation.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.8e}")
}

fn fmt_param(parameter: SweepParameter, v: f64) -> String {
    match parameter {
        SweepParameter::Users => format!("{}", v as u64),
        SweepParameter::BeamWaistM => fmt_sci(v),
    }
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub scheme: Scheme,
    pub mean_user_rate_bps: f64,
    pub std: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub sum_rate_bps: f64,
    pub trials: usize,
    pub failures: usize,
}

fn scheme_fields(s: Scheme) -> (String, String) {
    match s {
        Scheme::Rs => ("rs".into(), String::new()),
        Scheme::Hrs { groups } => ("hrs".into(), groups.to_string()),
    }
}

pub fn sweep_rows(result: &SweepResult) -> Vec<SweepRow> {
    result
        .points
        .iter()
        .map(|p| SweepRow {
            param: p.param,
            scheme: p.summary.scheme,
            mean_user_rate_bps: p.summary.user_rate.mean,
            std: p.summary.user_rate.std,
            ci95_lo: p.summary.user_rate.ci95_lo,
            ci95_hi: p.summary.user_rate.ci95_hi,
            sum_rate_bps: p.summary.sum_rate.mean,
            trials: p.summary.trials,
            failures: p.summary.failures.len(),
        })
        .collect()
}

fn csv_string(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory cannot fail");
    for r in rows {
        w.write_record(&r).expect("writing to memory cannot fail");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory cannot fail")).expect("fields are UTF-8")
}

fn header(text: &str) -> Vec<String> {
    text.split(',').map(str::to_string).collect()
}

pub fn format_sweep_rows(parameter: SweepParameter, rows: &[SweepRow]) -> String {
    csv_string(
        &header(SWEEP_HEADER),
        rows.iter().map(|r| {
            let (scheme, groups) = scheme_fields(r.scheme);
            vec![
                fmt_param(parameter, r.param),
                scheme,
                groups,
                fmt_sci(r.mean_user_rate_bps),
                fmt_sci(r.std),
                fmt_sci(r.ci95_lo),
                fmt_sci(r.ci95_hi),
                fmt_sci(r.sum_rate_bps),
                r.trials.to_string(),
                r.failures.to_string(),
            ]
        }),
    )
}

pub fn sweep_csv(result: &SweepResult) -> String {
    format_sweep_rows(result.parameter, &sweep_rows(result))
}

#[derive(Deserialize)]
struct RawSweepRow {
    param: f64,
    scheme: String,
    groups: Option<usize>,
    mean_user_rate_bps: f64,
    std: f64,
    ci95_lo: f64,
    ci95_hi: f64,
    sum_rate_bps: f64,
    trials: usize,
    failures: usize,
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| Error::Config(e.to_string()))?;
    if found.iter().collect::<Vec<_>>().join(",") != SWEEP_HEADER {
        return Err(Error::Config("sweep CSV header mismatch".into()));
    }
    reader
        .deserialize::<RawSweepRow>()
        .map(|row| {
            let r = row.map_err(|e| Error::Config(e.to_string()))?;
            let scheme = match (r.scheme.as_str(), r.groups) {
                ("rs", None) => Scheme::Rs,
                ("hrs", Some(groups)) => Scheme::Hrs { groups },
                (s, g) => return Err(Error::Config(format!("unknown scheme {s:?} with groups {g:?}"))),
            };
            Ok(SweepRow {
                param: r.param,
                scheme,
                mean_user_rate_bps: r.mean_user_rate_bps,
                std: r.std,
                ci95_lo: r.ci95_lo,
                ci95_hi: r.ci95_hi,
                sum_rate_bps: r.sum_rate_bps,
                trials: r.trials,
                failures: r.failures,
            })
        })
        .collect()
}

/// Per-trial values of every point; header only unless trials were kept.
pub fn trials_csv(result: &SweepResult) -> String {
    csv_string(
        &header(TRIALS_HEADER),
        result.points.iter().flat_map(|p| {
            let (scheme, groups) = scheme_fields(p.summary.scheme);
            p.summary.values.iter().flatten().map(move |v| {
                vec![
                    fmt_param(result.parameter, p.param),
                    scheme.clone(),
                    groups.clone(),
                    v.trial.to_string(),
                    v.seed.to_string(),
                    fmt_sci(v.mean_user_rate_bps),
                    fmt_sci(v.sum_rate_bps),
                ]
            })
        }),
    )
}

/// `user,branch,n0..n{N-1}`; the branch field is empty for unserved users.
pub fn channel_csv(channel: &ChannelMatrix) -> String {
    let mut head = vec!["user".to_string(), "branch".to_string()];
    head.extend((0..channel.elements()).map(|n| format!("n{n}")));
    csv_string(
        &head,
        (0..channel.users()).map(|k| {
            let mut row = vec![
                k.to_string(),
                channel.selected_branch[k].map(|b| b.to_string()).unwrap_or_default(),
            ];
            row.extend(channel.h.row(k).iter().map(|v| fmt_sci(*v)));
            row
        }),
    )
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Mean user rate against the swept parameter, one polyline per scheme.
pub fn sweep_svg(result: &SweepResult) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (90.0, 170.0, 30.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let xs: Vec<f64> = result.points.iter().map(|p| p.param).collect();
    let ys: Vec<f64> = result.points.iter().map(|p| p.summary.user_rate.mean).collect();
    let (xmin, xmax) = bounds(&xs);
    let (_, ymax) = bounds(&ys);
    let ymin = 0.0;
    let ymax = if ymax > 0.0 { ymax * 1.05 } else { 1.0 };
    let sx = |x: f64| left + if xmax > xmin { (x - xmin) / (xmax - xmin) * pw } else { pw / 2.0 };
    let sy = |y: f64| top + ph - (y - ymin) / (ymax - ymin) * ph;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>
<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .expect("writing to a String cannot fail");

    for i in 0..=4 {
        let fx = xmin + (xmax - xmin) * i as f64 / 4.0;
        let fy = ymin + (ymax - ymin) * i as f64 / 4.0;
        let (px, py) = (sx(fx), sy(fy));
        writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{b:.2}" x2="{px:.2}" y2="{b2:.2}" stroke="black"/>
<text x="{px:.2}" y="{t:.2}" text-anchor="middle">{}</text>
<line x1="{l2:.2}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/>
<text x="{lt:.2}" y="{py2:.2}" text-anchor="end">{}</text>"#,
            short(fx),
            short(fy),
            b = top + ph,
            b2 = top + ph + 5.0,
            t = top + ph + 20.0,
            l2 = left - 5.0,
            lt = left - 8.0,
            py2 = py + 4.0,
        )
        .expect("writing to a String cannot fail");
    }
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>
<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">mean_user_rate_bps</text>"#,
        left + pw / 2.0,
        h - 15.0,
        xml_escape(result.parameter.label()),
        top + ph / 2.0,
        top + ph / 2.0,
    )
    .expect("writing to a String cannot fail");

    let mut schemes: Vec<Scheme> = Vec::new();
    for p in &result.points {
        if !schemes.contains(&p.summary.scheme) {
            schemes.push(p.summary.scheme);
        }
    }
    for (i, scheme) in schemes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = result
            .series(*scheme)
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.param), sy(p.summary.user_rate.mean)))
            .collect();
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .expect("writing to a String cannot fail");
        for pt in &pts {
            let (x, y) = pt.split_once(',').expect("formatted as x,y");
            writeln!(svg, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#).expect("writing to a String cannot fail");
        }
        let ly = top + 20.0 + 20.0 * i as f64;
        let lx = left + pw + 15.0;
        writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.2}" y2="{ly}" stroke="{color}" stroke-width="2"/>
<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 25.0,
            lx + 32.0,
            ly + 4.0,
            xml_escape(&scheme.to_string())
        )
        .expect("writing to a String cannot fail");
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

fn short(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub master_seed: u64,
    pub timestamp_unix_s: u64,
    pub outputs: Vec<PathBuf>,
    pub skipped: Vec<SkippedPoint>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest fields serialize")
    }
}
