//! Closed-form weight counts of large-receptive-field arrangements.

use crate::error::{arg_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arrangement {
    /// `L` stacked dense `k^3` convolutions.
    Stack3d,
    /// Same count as [`Arrangement::Stack3d`], used with larger `k`.
    LargeKernel,
    /// One symmetric module of nine 1D convolutions.
    Factorized1d,
}

impl Arrangement {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "stack3d" | "stack" | "stacking" => Ok(Self::Stack3d),
            "large_kernel" | "large" | "largekernel" => Ok(Self::LargeKernel),
            "factorized_1d" | "factorized" | "factorized1d" => Ok(Self::Factorized1d),
            _ => Err(arg_err!(
                "unknown arrangement {s:?} (expected stack3d, large-kernel or factorized)"
            )),
        }
    }
}

/// Bias-free weight count: `L C^2 k^3` for dense stacks, `9 C^2 k` for the
/// factorized module (`layers` is ignored there).
pub fn param_count(arrangement: Arrangement, layers: u64, channels: u64, k: u64) -> Result<u64> {
    if layers == 0 || channels == 0 || k == 0 {
        return Err(arg_err!("layers, channels and k must be positive"));
    }
    if k % 2 == 0 {
        return Err(arg_err!("kernel size {k} must be odd"));
    }
    let c2 = channels * channels;
    Ok(match arrangement {
        Arrangement::Stack3d | Arrangement::LargeKernel => layers * c2 * k * k * k,
        Arrangement::Factorized1d => 9 * c2 * k,
    })
}

/// Kernel elements per input/output channel pair: `(9k, k^3)`.
pub fn kernel_elements_per_pair(k: u64) -> (u64, u64) {
    (9 * k, k * k * k)
}
