//! Direct, loop-based reference implementations.

#![allow(dead_code)]

/// Zero-padded cross-correlation with an odd `[Cout, Cin, kd, kh, kw]` kernel.
pub fn conv3d(
    input: &[f64],
    [cin, d, h, w]: [usize; 4],
    kernel: &[f64],
    [cout, kd, kh, kw]: [usize; 4],
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let (rd, rh, rw) = ((kd / 2) as isize, (kh / 2) as isize, (kw / 2) as isize);
    let mut out = vec![0.0; cout * d * h * w];
    for o in 0..cout {
        for z in 0..d as isize {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut acc = bias.map_or(0.0, |b| b[o]);
                    for i in 0..cin {
                        for dz in -rd..=rd {
                            for dy in -rh..=rh {
                                for dx in -rw..=rw {
                                    let (zz, yy, xx) = (z + dz, y + dy, x + dx);
                                    if zz < 0 || yy < 0 || xx < 0 || zz >= d as isize || yy >= h as isize || xx >= w as isize {
                                        continue;
                                    }
                                    let iv = input[((i * d + zz as usize) * h + yy as usize) * w + xx as usize];
                                    let kv = kernel[(((o * cin + i) * kd + (dz + rd) as usize) * kh + (dy + rh) as usize) * kw
                                        + (dx + rw) as usize];
                                    acc += iv * kv;
                                }
                            }
                        }
                    }
                    out[((o * d + z as usize) * h + y as usize) * w + x as usize] = acc;
                }
            }
        }
    }
    out
}

/// Normalized Gaussian taps of radius `r`.
pub fn gaussian_taps(sigma: f64, r: usize) -> Vec<f64> {
    let raw: Vec<f64> = (-(r as isize)..=r as isize)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Dense 3D blur with the outer-product kernel and edge replication.
pub fn blur_replicate(v: &[f64], [d, h, w]: [usize; 3], taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut out = vec![0.0; v.len()];
    for z in 0..d as isize {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for dz in -r..=r {
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let wgt = taps[(dz + r) as usize] * taps[(dy + r) as usize] * taps[(dx + r) as usize];
                            acc += wgt * v[(clamp(z + dz, d) * h + clamp(y + dy, h)) * w + clamp(x + dx, w)];
                        }
                    }
                }
                out[(z as usize * h + y as usize) * w + x as usize] = acc;
            }
        }
    }
    out
}

pub fn mae(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] as f64 - b[i] as f64).abs();
    }
    s / a.len() as f64
}

pub fn psnr(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let e = a[i] as f64 - b[i] as f64;
        s += e * e;
    }
    let mse = s / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// Mean SSIM with an explicit 11^3 Gaussian window (sigma 1.5) cut at the
/// volume boundary and renormalized per voxel.
pub fn ssim(a: &[f32], b: &[f32], [d, h, w]: [usize; 3]) -> f64 {
    let r = 5isize;
    let g = |i: isize| (-((i * i) as f64) / (2.0 * 1.5 * 1.5)).exp();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    for z in 0..d as isize {
        for y in 0..h as isize {
            for x in 0..w as isize {
                let (mut sw, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for dz in -r..=r {
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let (zz, yy, xx) = (z + dz, y + dy, x + dx);
                            if zz < 0 || yy < 0 || xx < 0 || zz >= d as isize || yy >= h as isize || xx >= w as isize {
                                continue;
                            }
                            let wt = g(dz) * g(dy) * g(dx);
                            let i = (zz as usize * h + yy as usize) * w + xx as usize;
                            let (p, q) = (a[i] as f64, b[i] as f64);
                            sw += wt;
                            sa += wt * p;
                            sb += wt * q;
                            saa += wt * p * p;
                            sbb += wt * q * q;
                            sab += wt * p * q;
                        }
                    }
                }
                let (ma, mb) = (sa / sw, sb / sw);
                let va = saa / sw - ma * ma;
                let vb = sbb / sw - mb * mb;
                let cov = sab / sw - ma * mb;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
    }
    total / (d * h * w) as f64
}
