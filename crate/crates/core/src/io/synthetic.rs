//! Synthetic image pairs with known deformations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::image::ImageVolume;

pub const MIN_SYNTHETIC_EXTENT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticCase {
    TranslateBlob,
    RotateBlob,
    TwoBlobs,
    CheckerDetail,
}

impl SyntheticCase {
    pub const ALL: [SyntheticCase; 4] = [
        Self::TranslateBlob,
        Self::RotateBlob,
        Self::TwoBlobs,
        Self::CheckerDetail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TranslateBlob => "translate-blob",
            Self::RotateBlob => "rotate-blob",
            Self::TwoBlobs => "two-blobs",
            Self::CheckerDetail => "checker-detail",
        }
    }
}

impl FromStr for SyntheticCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown synthetic case '{s}'")))
    }
}

impl fmt::Display for SyntheticCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    /// Integer voxel shift (translate-blob, two-blobs, checker-detail).
    /// Defaults to `n_x / 16` along x.
    pub shift: Option<Vec<i64>>,
    /// Rotation angle in radians (rotate-blob); defaults to `pi / 12`.
    pub angle: Option<f64>,
    /// Blob radius in voxels; defaults to a fifth of the smallest extent.
    pub radius: Option<f64>,
    /// Amplitude of uniform intensity noise added to both images.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GroundTruth {
    /// `x -> x + shift` on the ball `|x - center| < radius`.
    Translation {
        shift: Vec<i64>,
        center: Vec<f64>,
        radius: f64,
    },
    /// Rotation by `angle` about `center` (about the z axis in 3D).
    Rotation { center: Vec<f64>, angle: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub input: ImageVolume,
    pub target: ImageVolume,
    pub ground_truth: Option<GroundTruth>,
}

/// `(1 - r^2)^2` for `r < 1`.
fn bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        let s = 1.0 - r2;
        s * s
    } else {
        0.0
    }
}

fn ball(x: &[f64], c: &[f64], radius: f64) -> f64 {
    let r2 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (radius * radius);
    bump(r2)
}

/// Samples `f` at voxel centres; `f` receives the integer index.
fn sample(dims: &[usize], f: impl Fn(&[i64]) -> f64) -> Result<ImageVolume> {
    let n: usize = dims.iter().product();
    let mut data = Vec::with_capacity(n);
    let mut idx = vec![0i64; dims.len()];
    for mut k in 0..n {
        for (a, &m) in dims.iter().enumerate() {
            idx[a] = (k % m) as i64;
            k /= m;
        }
        data.push(f(&idx));
    }
    ImageVolume::new(dims.to_vec(), data)
}

fn centre(idx: &[i64]) -> Vec<f64> {
    idx.iter().map(|&i| i as f64 + 0.5).collect()
}

fn shifted(idx: &[i64], s: &[i64]) -> Vec<i64> {
    idx.iter().zip(s).map(|(a, b)| a - b).collect()
}

pub fn make_synthetic(
    case: SyntheticCase,
    dims: &[usize],
    params: &SyntheticParams,
    seed: u64,
) -> Result<SyntheticPair> {
    if dims.len() != 2 && dims.len() != 3 {
        return Err(Error::invalid(format!(
            "synthetic images must be 2D or 3D, got {} axes",
            dims.len()
        )));
    }
    if dims.iter().any(|&n| n < MIN_SYNTHETIC_EXTENT) {
        return Err(Error::invalid(format!(
            "synthetic images need at least {MIN_SYNTHETIC_EXTENT} voxels per axis, got {dims:?}"
        )));
    }
    if !(params.noise >= 0.0) {
        return Err(Error::invalid("noise amplitude must be non-negative"));
    }
    let d = dims.len();
    let nmin = *dims.iter().min().expect("non-empty") as f64;
    let radius = params.radius.unwrap_or(nmin / 5.0);
    if !(radius > 0.0) {
        return Err(Error::invalid("blob radius must be positive"));
    }
    let shift = match &params.shift {
        Some(s) if s.len() == d => s.clone(),
        Some(s) => {
            return Err(Error::invalid(format!(
                "shift has {} entries for a {d}D image",
                s.len()
            )))
        }
        None => {
            let mut s = vec![0i64; d];
            s[0] = ((dims[0] as f64) / 16.0).round() as i64;
            s
        }
    };
    let mid: Vec<f64> = dims.iter().map(|&n| n as f64 / 2.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (input, target, truth) = match case {
        SyntheticCase::TranslateBlob => {
            let c: Vec<f64> = mid
                .iter()
                .zip(&shift)
                .map(|(m, &s)| m - s as f64 / 2.0)
                .collect();
            let f = |idx: &[i64]| ball(&centre(idx), &c, radius);
            let input = sample(dims, f)?;
            let target = sample(dims, |idx| f(&shifted(idx, &shift)))?;
            let truth = GroundTruth::Translation {
                shift: shift.clone(),
                center: c.clone(),
                radius,
            };
            (input, target, Some(truth))
        }
        SyntheticCase::RotateBlob => {
            let angle = params.angle.unwrap_or(PI / 12.0);
            let f = |x: &[f64]| {
                let mut r2 =
                    ((x[0] - mid[0]) / radius).powi(2) + ((x[1] - mid[1]) / (0.5 * radius)).powi(2);
                if d == 3 {
                    r2 += ((x[2] - mid[2]) / (0.5 * radius)).powi(2);
                }
                bump(r2)
            };
            let (s, c) = angle.sin_cos();
            let input = sample(dims, |idx| f(&centre(idx)))?;
            let target = sample(dims, |idx| {
                let x = centre(idx);
                let (dx, dy) = (x[0] - mid[0], x[1] - mid[1]);
                let mut y = x.clone();
                y[0] = mid[0] + c * dx + s * dy;
                y[1] = mid[1] - s * dx + c * dy;
                f(&y)
            })?;
            let truth = GroundTruth::Rotation {
                center: mid.clone(),
                angle,
            };
            (input, target, Some(truth))
        }
        SyntheticCase::TwoBlobs => {
            let r = radius / 1.5;
            let mut centres = Vec::new();
            for frac in [1.0 / 3.0, 2.0 / 3.0] {
                let c: Vec<f64> = dims
                    .iter()
                    .map(|&n| n as f64 * frac + rng.gen_range(-1.0..1.0))
                    .collect();
                centres.push(c);
            }
            let mut second = vec![0i64; d];
            second[1] = -shift[0];
            let f0 = |idx: &[i64]| ball(&centre(idx), &centres[0], r);
            let f1 = |idx: &[i64]| 0.6 * ball(&centre(idx), &centres[1], r);
            let input = sample(dims, |idx| f0(idx) + f1(idx))?;
            let target = sample(dims, |idx| {
                f0(&shifted(idx, &shift)) + f1(&shifted(idx, &second))
            })?;
            (input, target, None)
        }
        SyntheticCase::CheckerDetail => {
            let big = radius * 1.5;
            let period = 4i64;
            let lambda = nmin / 4.0;
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let c: Vec<f64> = mid
                .iter()
                .zip(&shift)
                .map(|(m, &s)| m - s as f64 / 2.0)
                .collect();
            let f = |x: &[f64]| {
                let parity: i64 = x
                    .iter()
                    .map(|&t| (t.floor() as i64).div_euclid(period / 2))
                    .sum();
                let checker = if parity.rem_euclid(2) == 0 { 1.0 } else { 0.6 };
                ball(x, &c, big) * checker
            };
            let input = sample(dims, |idx| f(&centre(idx)))?;
            let target = sample(dims, |idx| {
                let x = centre(idx);
                let w = ball(&x, &mid, big);
                let mut y: Vec<f64> = x.iter().zip(&shift).map(|(a, &s)| a - s as f64).collect();
                y[0] -= w * (2.0 * PI * x[1] / lambda + phase).sin();
                y[1] -= w * (2.0 * PI * x[0] / lambda + phase).cos();
                f(&y)
            })?;
            (input, target, None)
        }
    };
    let (mut input, mut target) = (input, target);
    if params.noise > 0.0 {
        for img in [&mut input, &mut target] {
            for v in img.data_mut() {
                *v += rng.gen_range(-params.noise..=params.noise);
            }
        }
    }
    Ok(SyntheticPair {
        input,
        target,
        ground_truth: truth,
    })
}
