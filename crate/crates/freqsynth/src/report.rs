//! Metric reports as flat `key = value` files and CSV rows.
//!
//! Floats are written in shortest round-trip form (`inf` for an infinite
//! PSNR), so reading a report back reproduces it exactly.

use std::fs;
use std::path::Path;

use freqsynth_core::evaluation::MetricsReport;

use crate::error::{Error, Result};

const METRIC_KEYS: [&str; 9] = [
    "mae",
    "psnr",
    "ssim",
    "mae_high",
    "mae_low",
    "dice_air",
    "dice_soft_tissue",
    "dice_bone",
    "clamp_count",
];

const PROVENANCE_PREFIX: &str = "provenance.";

fn metric_values(r: &MetricsReport) -> [String; 9] {
    [
        r.mae.to_string(),
        r.psnr.to_string(),
        r.ssim.to_string(),
        r.mae_high.to_string(),
        r.mae_low.to_string(),
        r.dice[0].to_string(),
        r.dice[1].to_string(),
        r.dice[2].to_string(),
        r.clamp_count.to_string(),
    ]
}

pub fn format_report(r: &MetricsReport) -> String {
    let mut s = String::new();
    for (k, v) in METRIC_KEYS.iter().zip(metric_values(r)) {
        s.push_str(&format!("{k} = {v}\n"));
    }
    for (k, v) in &r.provenance {
        s.push_str(&format!("{PROVENANCE_PREFIX}{k} = {v}\n"));
    }
    s
}

pub fn parse_report(text: &str, path: &Path) -> Result<MetricsReport> {
    let mut values: [Option<&str>; 9] = [None; 9];
    let mut provenance = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| Error::parse(path, i + 1, format!("expected `key = value`, got {line:?}")))?;
        if let Some(pk) = k.strip_prefix(PROVENANCE_PREFIX) {
            provenance.push((pk.to_owned(), v.to_owned()));
            continue;
        }
        let slot = METRIC_KEYS
            .iter()
            .position(|m| *m == k)
            .ok_or_else(|| Error::parse(path, i + 1, format!("unknown key {k:?}")))?;
        if values[slot].replace(v).is_some() {
            return Err(Error::parse(path, i + 1, format!("duplicate key {k:?}")));
        }
    }
    let mut nums = [0f64; 8];
    for (i, n) in nums.iter_mut().enumerate() {
        let v = values[i].ok_or_else(|| Error::parse(path, 0, format!("missing key {:?}", METRIC_KEYS[i])))?;
        *n = v
            .parse()
            .map_err(|_| Error::parse(path, 0, format!("bad number {v:?} for {}", METRIC_KEYS[i])))?;
    }
    let cc = values[8].ok_or_else(|| Error::parse(path, 0, "missing key \"clamp_count\""))?;
    Ok(MetricsReport {
        mae: nums[0],
        psnr: nums[1],
        ssim: nums[2],
        mae_high: nums[3],
        mae_low: nums[4],
        dice: [nums[5], nums[6], nums[7]],
        clamp_count: cc
            .parse()
            .map_err(|_| Error::parse(path, 0, format!("bad clamp_count {cc:?}")))?,
        provenance,
    })
}

pub fn write_report(r: &MetricsReport, path: &Path) -> Result<()> {
    fs::write(path, format_report(r)).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text, path)
}

/// CSV header for [`csv_row`]: a free-form label followed by the metrics.
pub fn csv_header() -> String {
    format!("label,{}", METRIC_KEYS.join(","))
}

/// One CSV line (no trailing newline). Commas in `label` are replaced.
pub fn csv_row(label: &str, r: &MetricsReport) -> String {
    format!("{},{}", label.replace(',', ";"), metric_values(r).join(","))
}
