//! Synthetic targets, datasets and random teacher nets.
//!
//! Targets cover the three function classes used in the experiments:
//! smooth products of sines, additive models `h(Σ f_k(x_k))`, and sums of
//! a few bumps placed in cells of an `N^d` partition. Noise is bounded and
//! centred: uniform on `[−level, level]` with `level ≤ 1`.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::uniform_points;
use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::net::{AffineMap, ReluNet};

/// Shareable scalar function on the cube.
pub type Target = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetKind {
    /// `Π_k sin(π x_k) · ((1 + x_1)/2)^r`; the envelope caps the smoothness
    /// at order `r` on the face `x_1 = −1`.
    Smooth { r: f64 },
    /// `sin(π x)` on one axis, replicated as a product in higher dimension.
    Sine,
    /// `(1/d) Σ_k |x_k|^r`, a member of the Lipschitz class of order `r`.
    Holder { r: f64 },
    /// `tanh(Σ_k sin(π x_k) / √d)`.
    Additive,
    /// `u` smooth bumps in random cells of the `n^d` partition.
    Sparse { n: usize, u: usize, seed: u64 },
}

impl std::str::FromStr for TargetKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = |default: f64| -> Result<f64> {
            if arg.is_empty() {
                Ok(default)
            } else {
                arg.parse()
                    .map_err(|_| invalid(format!("bad target parameter {arg:?}")))
            }
        };
        match name {
            "smooth" => Ok(Self::Smooth { r: num(2.0)? }),
            "sine" | "sin" => Ok(Self::Sine),
            "holder" | "lipschitz" => Ok(Self::Holder { r: num(1.5)? }),
            "additive" => Ok(Self::Additive),
            "sparse" => Ok(Self::Sparse {
                n: 4,
                u: num(3.0)? as usize,
                seed: 7,
            }),
            other => Err(invalid(format!(
                "unknown target {other:?}; expected smooth[:r], sine, holder[:r], additive or sparse[:u]"
            ))),
        }
    }
}

/// Evaluable form of `kind` on `[−1,1]^d`.
pub fn target(kind: &TargetKind, d: usize) -> Result<Target> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    use std::f64::consts::PI;
    Ok(match *kind {
        TargetKind::Smooth { r } => {
            if !(r > 0.0) {
                return Err(invalid(format!("smoothness must be positive, got {r}")));
            }
            Arc::new(move |x: &[f64]| {
                let prod: f64 = x.iter().map(|v| (PI * v).sin()).product();
                prod * ((1.0 + x[0]) / 2.0).powf(r)
            })
        }
        TargetKind::Sine => Arc::new(|x: &[f64]| x.iter().map(|v| (PI * v).sin()).product()),
        TargetKind::Holder { r } => {
            if !(r > 0.0) {
                return Err(invalid(format!("order must be positive, got {r}")));
            }
            let inv = 1.0 / d as f64;
            Arc::new(move |x: &[f64]| inv * x.iter().map(|v| v.abs().powf(r)).sum::<f64>())
        }
        TargetKind::Additive => {
            let scale = 1.0 / (d as f64).sqrt();
            Arc::new(move |x: &[f64]| {
                (scale * x.iter().map(|v| (PI * v).sin()).sum::<f64>()).tanh()
            })
        }
        TargetKind::Sparse { n, u, seed } => {
            let cells = n.checked_pow(d as u32).filter(|&c| c >= u && n >= 1);
            let cells =
                cells.ok_or_else(|| invalid(format!("cannot place {u} bumps in {n}^{d} cells")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let chosen = sample(&mut rng, cells, u).into_vec();
            let h = 2.0 / n as f64;
            let centers: Vec<(Vec<f64>, f64)> = chosen
                .into_iter()
                .map(|mut c| {
                    let center = (0..d)
                        .map(|_| {
                            let k = c % n;
                            c /= n;
                            -1.0 + (k as f64 + 0.5) * h
                        })
                        .collect();
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    (center, sign)
                })
                .collect();
            Arc::new(move |x: &[f64]| {
                centers
                    .iter()
                    .map(|(c, s)| {
                        let r2: f64 = x
                            .iter()
                            .zip(c)
                            .map(|(a, b)| ((a - b) / (0.5 * h)).powi(2))
                            .sum();
                        if r2 < 1.0 {
                            s * (1.0 - r2).powi(2)
                        } else {
                            0.0
                        }
                    })
                    .sum()
            })
        }
    })
}

/// `m` uniform points labelled by `f` plus uniform noise on `[−noise, noise]`.
pub fn sample_dataset(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    d: usize,
    m: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(invalid(format!(
            "noise level must lie in [0, 1], got {noise}"
        )));
    }
    let points = uniform_points(d, m, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x006e_6f69_7365);
    let labels = points
        .iter()
        .map(|x| {
            let eps = if noise > 0.0 {
                rng.gen_range(-noise..=noise)
            } else {
                0.0
            };
            f(x) + eps
        })
        .collect();
    Dataset::new(points, labels)
}

/// Fully connected net with hidden widths `widths`, weights uniform on
/// `±√(1/fan_in)`, biases uniform on `±0.1` and readout scaled by
/// `1/√width` so outputs stay of order one.
pub fn random_teacher(d: usize, widths: &[usize], seed: u64) -> Result<ReluNet> {
    if widths.is_empty() || widths.contains(&0) {
        return Err(invalid(
            "teacher needs at least one hidden layer of positive width",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(widths.len());
    let mut fan_in = d;
    for &w in widths {
        let bound = (1.0 / fan_in as f64).sqrt();
        let weights: Vec<f64> = (0..w * fan_in)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        let bias = (0..w).map(|_| rng.gen_range(-0.1..=0.1)).collect();
        layers.push(AffineMap::from_dense(w, fan_in, &weights, bias)?);
        fan_in = w;
    }
    let scale = 1.0 / (fan_in as f64).sqrt();
    let readout = (0..fan_in)
        .map(|_| scale * rng.gen_range(-1.0..=1.0))
        .collect();
    ReluNet::new(d, layers, readout)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_are_bounded() {
        for kind in [
            TargetKind::Smooth { r: 1.5 },
            TargetKind::Sine,
            TargetKind::Holder { r: 0.5 },
            TargetKind::Additive,
            TargetKind::Sparse {
                n: 3,
                u: 2,
                seed: 1,
            },
        ] {
            let f = target(&kind, 2).unwrap();
            for x in uniform_points(2, 2000, 5) {
                let v = f(&x);
                assert!(v.is_finite() && v.abs() <= 1.0 + 1e-12, "{kind:?} gave {v}");
            }
        }
    }

    #[test]
    fn target_parsing() {
        assert_eq!(
            "smooth:3".parse::<TargetKind>().unwrap(),
            TargetKind::Smooth { r: 3.0 }
        );
        assert_eq!("sine".parse::<TargetKind>().unwrap(), TargetKind::Sine);
        assert!("nope".parse::<TargetKind>().is_err());
        assert!(target(
            &TargetKind::Sparse {
                n: 2,
                u: 5,
                seed: 0
            },
            2
        )
        .is_err());
    }

    #[test]
    fn datasets_and_teachers_are_seeded() {
        let f = target(&TargetKind::Additive, 3).unwrap();
        let a = sample_dataset(&*f, 3, 40, 0.1, 4).unwrap();
        let b = sample_dataset(&*f, 3, 40, 0.1, 4).unwrap();
        assert_eq!(a, b);
        let t1 = random_teacher(3, &[8, 8], 2).unwrap();
        assert_eq!(t1, random_teacher(3, &[8, 8], 2).unwrap());
        assert_eq!(t1.depth(), 2);
        assert!(random_teacher(3, &[], 2).is_err());
    }
}
