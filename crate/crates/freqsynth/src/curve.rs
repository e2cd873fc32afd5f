//! Loss curves as CSV.

use std::fs;
use std::path::Path;

use freqsynth_core::training::EpochRecord;

use crate::error::{Error, Result};

pub const HEADER: &str = "epoch,loss_total,loss_high,loss_overall,loss_adv";

pub fn format_curve(curve: &[EpochRecord]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in curve {
        s.push_str(&format_row(r));
    }
    s
}

pub fn format_row(r: &EpochRecord) -> String {
    format!(
        "{},{},{},{},{}\n",
        r.epoch, r.loss_total, r.loss_high, r.loss_overall, r.loss_adv
    )
}

pub fn parse_curve(text: &str, path: &Path) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header {HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::parse(path, i + 1, format!("malformed row {line:?}"));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(EpochRecord {
            epoch: f[0].parse().map_err(|_| bad())?,
            loss_total: num(f[1])?,
            loss_high: num(f[2])?,
            loss_overall: num(f[3])?,
            loss_adv: num(f[4])?,
        });
    }
    Ok(out)
}

pub fn write_curve(curve: &[EpochRecord], path: &Path) -> Result<()> {
    fs::write(path, format_curve(curve)).map_err(|e| Error::io(path, e))
}

pub fn read_curve(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curve(&text, path)
}
