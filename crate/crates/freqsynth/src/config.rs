//! `key = value` training configuration files.

use std::fs;
use std::path::Path;

use freqsynth_core::network::BaseKind;
use freqsynth_core::training::TrainConfig;

use crate::error::{Error, Result};

/// Every accepted key, in the order [`format_config`] writes them.
pub const KEYS: [&str; 13] = [
    "epochs",
    "lr",
    "beta1",
    "beta2",
    "crop",
    "rotation_deg",
    "sigma",
    "seed",
    "adversarial",
    "adv_weight",
    "base_kind",
    "channels",
    "refine_k",
];

fn parse_crop(v: &str) -> Option<[usize; 3]> {
    let parts: Vec<usize> = v.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    match parts[..] {
        [n] => Some([n; 3]),
        [d, h, w] => Some([d, h, w]),
        _ => None,
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Applies one `key = value` setting to `cfg`.
pub fn apply_setting(cfg: &mut TrainConfig, key: &str, value: &str) -> std::result::Result<(), String> {
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
        v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
    }
    match key {
        "epochs" => cfg.epochs = num(key, value)?,
        "lr" => cfg.lr = num(key, value)?,
        "beta1" => cfg.beta1 = num(key, value)?,
        "beta2" => cfg.beta2 = num(key, value)?,
        "crop" => cfg.crop = parse_crop(value).ok_or_else(|| format!("invalid crop {value:?}"))?,
        "rotation_deg" => cfg.rotation_deg = num(key, value)?,
        "sigma" => cfg.sigma = num(key, value)?,
        "seed" => cfg.seed = num(key, value)?,
        "adversarial" => {
            cfg.adversarial = parse_bool(value).ok_or_else(|| format!("invalid boolean {value:?}"))?
        }
        "adv_weight" => cfg.adv_weight = num(key, value)?,
        "base_kind" => cfg.base_kind = BaseKind::parse(value).map_err(|e| e.to_string())?,
        "channels" => cfg.channels = num(key, value)?,
        "refine_k" => cfg.refine_k = num(key, value)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Parses configuration text over the defaults. Unknown or repeated keys
/// are errors; the result is validated.
pub fn parse_config(text: &str, path: &Path) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let mut seen = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if seen.contains(&key) {
            return Err(Error::parse(path, i + 1, format!("duplicate key {key:?}")));
        }
        apply_setting(&mut cfg, key, value).map_err(|m| Error::parse(path, i + 1, m))?;
        seen.push(key);
    }
    cfg.validate().map_err(|e| Error::from(e).context(path.display().to_string()))?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

/// Writes every key; parsing the result gives back the same settings.
pub fn format_config(cfg: &TrainConfig) -> String {
    let [d, h, w] = cfg.crop;
    let values = [
        cfg.epochs.to_string(),
        cfg.lr.to_string(),
        cfg.beta1.to_string(),
        cfg.beta2.to_string(),
        format!("{d},{h},{w}"),
        cfg.rotation_deg.to_string(),
        cfg.sigma.to_string(),
        cfg.seed.to_string(),
        cfg.adversarial.to_string(),
        cfg.adv_weight.to_string(),
        cfg.base_kind.name().to_string(),
        cfg.channels.to_string(),
        cfg.refine_k.to_string(),
    ];
    KEYS.iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}
