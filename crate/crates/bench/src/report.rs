//! Per-run rows, per-strategy aggregates, and the CSV schema.
//!
//! CSV columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `entry` | file name within the corpus directory |
//! | `category` | label from `categories.csv`, else `uncategorized` |
//! | `strategy` | `prompt`, `canny`, `canny-color` or `salient` |
//! | `width`, `height` | pixel dimensions (0 if unreadable) |
//! | `original_bytes` | on-disk size of the served file |
//! | `bundle_bytes` | packed bundle size; empty on error |
//! | `savings` | `1 - bundle_bytes / original_bytes`; empty on error |
//! | `canny_bytes` | CANNY payload length; empty when absent |
//! | `ssim_preview` | SSIM of original vs preview reconstruction |
//! | `embed_sim_preview` | embedding cosine of original vs preview |
//! | `below_break_even` | `true` when savings ≤ 0 |
//! | `error` | empty on success |

use std::io::{Read, Write};

use plc_core::encoder::Strategy;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::CorpusEntry;
use crate::BenchError;

pub const CSV_COLUMNS: [&str; 13] = [
    "entry",
    "category",
    "strategy",
    "width",
    "height",
    "original_bytes",
    "bundle_bytes",
    "savings",
    "canny_bytes",
    "ssim_preview",
    "embed_sim_preview",
    "below_break_even",
    "error",
];

fn ser_strategy<S: Serializer>(s: &Strategy, ser: S) -> Result<S::Ok, S::Error> {
    ser.serialize_str(s.as_str())
}

fn de_strategy<'de, D: Deserializer<'de>>(de: D) -> Result<Strategy, D::Error> {
    let s = String::deserialize(de)?;
    s.parse().map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub entry: String,
    pub category: String,
    #[serde(serialize_with = "ser_strategy", deserialize_with = "de_strategy")]
    pub strategy: Strategy,
    pub width: u32,
    pub height: u32,
    pub original_bytes: u64,
    pub bundle_bytes: Option<u64>,
    pub savings: Option<f64>,
    pub canny_bytes: Option<u64>,
    pub ssim_preview: Option<f64>,
    pub embed_sim_preview: Option<f64>,
    pub below_break_even: bool,
    pub error: String,
}

impl RunRow {
    pub fn failed(entry: &CorpusEntry, strategy: Strategy, error: &str) -> Self {
        Self {
            entry: entry.id.clone(),
            category: entry.category.clone(),
            strategy,
            width: entry.width,
            height: entry.height,
            original_bytes: entry.original_bytes,
            bundle_bytes: None,
            savings: None,
            canny_bytes: None,
            ssim_preview: None,
            embed_sim_preview: None,
            below_break_even: false,
            error: error.to_owned(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_empty()
    }

    /// Raw packed edge-map bits over compressed CANNY payload bits.
    pub fn canny_compression_factor(&self) -> Option<f64> {
        let bytes = self.canny_bytes?;
        Some((self.width as f64 * self.height as f64) / (bytes as f64 * 8.0))
    }
}

pub fn write_csv<W: Write>(rows: &[RunRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRow>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(BenchError::Schema(format!("unexpected header {headers:?}")));
    }
    Ok(r.deserialize().collect::<Result<Vec<RunRow>, _>>()?)
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    #[serde(serialize_with = "ser_strategy")]
    pub strategy: Strategy,
    pub rows: usize,
    pub errors: usize,
    pub median_savings: Option<f64>,
    pub min_savings: Option<f64>,
    pub max_savings: Option<f64>,
    pub median_bundle_bytes: Option<f64>,
    pub median_ssim: Option<f64>,
    pub median_embed_sim: Option<f64>,
}

fn column(rows: &[&RunRow], f: impl Fn(&RunRow) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter_map(|r| f(r)).collect()
}

/// One aggregate per strategy, in the given order, over successful rows.
pub fn aggregate(rows: &[RunRow], strategies: &[Strategy]) -> Vec<Aggregate> {
    strategies
        .iter()
        .map(|&s| {
            let all: Vec<&RunRow> = rows.iter().filter(|r| r.strategy == s).collect();
            let ok: Vec<&RunRow> = all.iter().copied().filter(|r| r.is_ok()).collect();
            let savings = column(&ok, |r| r.savings);
            Aggregate {
                strategy: s,
                rows: all.len(),
                errors: all.len() - ok.len(),
                median_savings: lower_median(&savings),
                min_savings: savings.iter().copied().min_by(f64::total_cmp),
                max_savings: savings.iter().copied().max_by(f64::total_cmp),
                median_bundle_bytes: lower_median(&column(&ok, |r| r.bundle_bytes.map(|b| b as f64))),
                median_ssim: lower_median(&column(&ok, |r| r.ssim_preview)),
                median_embed_sim: lower_median(&column(&ok, |r| r.embed_sim_preview)),
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

/// Fixed-width text table, one line per strategy after the header.
pub fn format_aggregates(aggs: &[Aggregate]) -> String {
    let mut out = format!(
        "{:<12} {:>5} {:>6} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8}\n",
        "strategy", "rows", "errors", "med_sav", "min_sav", "max_sav", "med_bytes", "med_ssim", "med_emb"
    );
    for a in aggs {
        out.push_str(&format!(
            "{:<12} {:>5} {:>6} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8}\n",
            a.strategy.as_str(),
            a.rows,
            a.errors,
            fmt_opt(a.median_savings, 4),
            fmt_opt(a.min_savings, 4),
            fmt_opt(a.max_savings, 4),
            fmt_opt(a.median_bundle_bytes, 0),
            fmt_opt(a.median_ssim, 3),
            fmt_opt(a.median_embed_sim, 3),
        ));
    }
    out
}
