//! Norm estimation on `[−1,1]^d` and log-log rate fits.
//!
//! Monte-Carlo samples come from ChaCha8 streams keyed by `(seed, block)`,
//! so a block's points do not depend on how blocks are scheduled. Block
//! sums are combined in block order, which keeps estimates bit-identical
//! across thread counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Scalar function on the cube.
pub type Func<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Largest tensor grid [`sup_norm_grid`] will visit.
pub const GRID_CAP: usize = 10_000_000;

pub const DEFAULT_MC_SAMPLES: usize = 100_000;

const BLOCK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    Grid,
    MonteCarlo,
}

/// Which norm to estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Norm {
    Lp(f64),
    Sup,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    /// `None` stands for the sup norm.
    pub p: Option<f64>,
    pub method: NormMethod,
    pub samples: usize,
    /// Delta-method standard error; zero for grid estimates.
    pub stderr: f64,
    pub seed: u64,
}

/// Default grid resolution (cells per axis) for sup estimates.
pub fn default_resolution(d: usize) -> usize {
    match d {
        1 => 1024,
        2 => 256,
        3 => 64,
        4 => 24,
        _ => 10,
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// `n` uniform points of `[−1,1]^d`, reproducible from `seed`.
pub fn uniform_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut block = 0;
    while out.len() < n {
        let mut rng = block_rng(seed, block);
        let take = BLOCK.min(n - out.len());
        for _ in 0..take {
            out.push((0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect());
        }
        block += 1;
    }
    out
}

/// Sums `|f|^p · w` and its square over one block of samples.
fn mc_block(
    f: Func,
    density: Option<Func>,
    d: usize,
    p: f64,
    seed: u64,
    block: usize,
    count: usize,
) -> Result<(f64, f64)> {
    let mut rng = block_rng(seed, block);
    let mut x = vec![0.0; d];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..count {
        for v in x.iter_mut() {
            *v = rng.gen_range(-1.0..=1.0);
        }
        let fx = f(&x);
        let w = density.map_or(1.0, |rho| rho(&x));
        if !fx.is_finite() || !w.is_finite() {
            return Err(invalid(format!("non-finite sample {fx} at {x:?}")));
        }
        let t = fx.abs().powf(p) * w;
        s1 += t;
        s2 += t * t;
    }
    Ok((s1, s2))
}

fn mc_norm(
    f: Func,
    density: Option<Func>,
    d: usize,
    p: f64,
    n: usize,
    seed: u64,
) -> Result<NormEstimate> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be a finite value ≥ 1, got {p}")));
    }
    if n < 1000 {
        return Err(invalid(format!(
            "Monte-Carlo needs at least 1000 samples, got {n}"
        )));
    }
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let blocks = n.div_ceil(BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| mc_block(f, density, d, p, seed, b, BLOCK.min(n - b * BLOCK)))
        .collect::<Result<_>>()?;
    let (s1, s2) = sums
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let nf = n as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    let vol = 2f64.powi(d as i32);
    let value = (vol * mean).powf(1.0 / p);
    // d/dM (V·M)^{1/p} = V^{1/p} M^{1/p − 1} / p
    let stderr = if mean > 0.0 {
        vol.powf(1.0 / p) * mean.powf(1.0 / p - 1.0) / p * (var / nf).sqrt()
    } else {
        0.0
    };
    Ok(NormEstimate {
        value,
        p: Some(p),
        method: NormMethod::MonteCarlo,
        samples: n,
        stderr,
        seed,
    })
}

/// `‖f‖_{L^p([−1,1]^d)}` by Monte-Carlo with uniform samples.
pub fn lp_norm_mc(f: Func, d: usize, p: f64, n_samples: usize, seed: u64) -> Result<NormEstimate> {
    mc_norm(f, None, d, p, n_samples, seed)
}

/// `(∫ |f|^p ρ dx)^{1/p}` for a density `ρ` on the cube, sampled uniformly
/// and reweighted.
pub fn lp_norm_mc_weighted(
    f: Func,
    density: Func,
    d: usize,
    p: f64,
    n_samples: usize,
    seed: u64,
) -> Result<NormEstimate> {
    mc_norm(f, Some(density), d, p, n_samples, seed)
}

/// Number of points of a tensor grid with `resolution` cells per axis.
pub fn grid_size(d: usize, resolution: usize) -> Option<usize> {
    (resolution + 1).checked_pow(d as u32)
}

/// Point `index` of the tensor grid on `[lo, hi]^d` with `resolution` cells
/// per axis. Axis 0 varies fastest.
pub fn grid_point(index: usize, d: usize, resolution: usize, lo: f64, hi: f64, out: &mut [f64]) {
    let mut rem = index;
    let step = (hi - lo) / resolution as f64;
    for v in out.iter_mut().take(d) {
        let k = rem % (resolution + 1);
        rem /= resolution + 1;
        *v = if k == resolution {
            hi
        } else {
            lo + k as f64 * step
        };
    }
}

/// All points of the tensor grid on `[lo, hi]^d`.
pub fn tensor_grid(d: usize, resolution: usize, lo: f64, hi: f64) -> Result<Vec<Vec<f64>>> {
    let n = checked_grid(d, resolution)?;
    let mut x = vec![0.0; d];
    Ok((0..n)
        .map(|i| {
            grid_point(i, d, resolution, lo, hi, &mut x);
            x.clone()
        })
        .collect())
}

fn checked_grid(d: usize, resolution: usize) -> Result<usize> {
    if d == 0 || resolution == 0 {
        return Err(invalid("grid needs d ≥ 1 and resolution ≥ 1"));
    }
    match grid_size(d, resolution) {
        Some(n) if n <= GRID_CAP => Ok(n),
        _ => Err(Error::Resource(format!(
            "grid of ({resolution}+1)^{d} points exceeds the cap of {GRID_CAP}; use Monte-Carlo refinement"
        ))),
    }
}

/// `max |f|` over the tensor grid on `[lo, hi]^d`, corners included.
pub fn sup_norm_grid_on(
    f: Func,
    d: usize,
    resolution: usize,
    lo: f64,
    hi: f64,
) -> Result<NormEstimate> {
    let n = checked_grid(d, resolution)?;
    let value = (0..n)
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |x, i| {
                grid_point(i, d, resolution, lo, hi, x);
                let v = f(x);
                if v.is_finite() {
                    Ok(v.abs())
                } else {
                    Err(invalid(format!("non-finite value {v} at {x:?}")))
                }
            },
        )
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    Ok(NormEstimate {
        value,
        p: None,
        method: NormMethod::Grid,
        samples: n,
        stderr: 0.0,
        seed: 0,
    })
}

/// `max |f|` over the tensor grid on `[−1,1]^d`. `resolution` counts cells
/// per axis, so doubling it refines the previous grid.
pub fn sup_norm_grid(f: Func, d: usize, resolution: usize) -> Result<NormEstimate> {
    sup_norm_grid_on(f, d, resolution, -1.0, 1.0)
}

/// Sup estimate that refines a grid optimum with `extra` random samples.
pub fn sup_norm_refined(
    f: Func,
    d: usize,
    resolution: usize,
    extra: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let grid = sup_norm_grid(f, d, resolution)?;
    let pts = uniform_points(d, extra, seed);
    let mc = pts.par_iter().map(|x| f(x).abs()).reduce(|| 0.0, f64::max);
    if !mc.is_finite() {
        return Err(invalid("non-finite value during sup refinement"));
    }
    Ok(NormEstimate {
        value: grid.value.max(mc),
        samples: grid.samples + extra,
        seed,
        ..grid
    })
}

/// Norm of `f − g`; `budget` is the sample count (Monte-Carlo) or the
/// resolution (grid).
pub fn distance(
    f: Func,
    g: Func,
    d: usize,
    norm: Norm,
    budget: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let diff = |x: &[f64]| f(x) - g(x);
    match norm {
        Norm::Lp(p) => lp_norm_mc(&diff, d, p, budget, seed),
        Norm::Sup => sup_norm_grid(&diff, d, budget),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ln ys` against `ln xs`.
pub fn slope_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(invalid(
            "slope_fit needs two equal-length lists of at least 3 values",
        ));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid("slope_fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Ordinary least squares `y ≈ slope · x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx <= 1e-300 * n {
        return Err(invalid("slope_fit: abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// How often `m` uniform points of `[−1,1]^d` have `q_Λ < m^{−κ/d}`.
#[derive(Clone, Debug, Serialize)]
pub struct SeparationRate {
    pub dim: usize,
    pub points: usize,
    pub kappa: f64,
    pub threshold: f64,
    pub seeds: usize,
    pub violations: usize,
    pub rate: f64,
}

/// Counts separation-radius violations over seeds `0..seeds`.
pub fn separation_violation_rate(
    d: usize,
    m: usize,
    kappa: f64,
    seeds: usize,
) -> Result<SeparationRate> {
    if d == 0 || m < 2 || seeds == 0 {
        return Err(invalid(
            "separation study needs d ≥ 1, m ≥ 2 and at least one seed",
        ));
    }
    if !(kappa > 0.0) {
        return Err(invalid("kappa must be positive"));
    }
    let threshold = (m as f64).powf(-kappa / d as f64);
    let hits: Vec<bool> = (0..seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let pts = uniform_points(d, m, seed);
            crate::dataset::separation_radius(&pts).map_or(true, |q| q < threshold)
        })
        .collect();
    let violations = hits.iter().filter(|&&h| h).count();
    Ok(SeparationRate {
        dim: d,
        points: m,
        kappa,
        threshold,
        seeds,
        violations,
        rate: violations as f64 / seeds as f64,
    })
}
