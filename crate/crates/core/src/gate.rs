//! Product gates: ReLU nets approximating `u₁u₂⋯u_ℓ` on `[−1,1]^ℓ` that
//! return exactly 0 whenever some `u_j = 0`.
//!
//! Squaring uses sawtooth refinement: with `g₀(t) = t` and the hat
//! `g(t) = 2σ(t) − 4σ(t−½) + 2σ(t−1)`, `f_m(t) = t − Σ_{s≤m} g∘…∘g(t)/4^s`
//! is the piecewise-linear interpolant of `t²` at the dyadic points of
//! level `m`, so `0 ≤ f_m(t) − t² ≤ 2^{−2m−2}` on `[0,1]`.
//!
//! Pairs use polarization `uv = (|u+v|/2)² − (|u−v|/2)²`. When `u = 0` or
//! `v = 0` both branches receive bitwise-identical arguments through
//! identical sub-networks, so the output is exactly 0. Longer products
//! chain pairs right to left, clamping intermediates to `[−1,1]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::net::{AffineMap, ReluNet, StackedNet};
use crate::primitives::identity_net;

/// Slack applied to the per-stage share of the error budget.
pub const STAGE_SLACK: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateFlavor {
    /// Identity-padded to depth `2ℓL̃ + 8ℓ`.
    FixedDepth,
    /// Unpadded; depth grows like `ℓ log(1/ν)`.
    LogDepth,
}

impl std::str::FromStr for GateFlavor {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-depth" | "a" | "A" => Ok(Self::FixedDepth),
            "log-depth" | "fully-connected" | "b" | "B" => Ok(Self::LogDepth),
            other => Err(invalid(format!("unknown gate flavor {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub ell: usize,
    pub nu: f64,
    pub theta: f64,
    pub tilde_l: usize,
    pub flavor: GateFlavor,
}

impl GateSpec {
    pub fn new(
        ell: usize,
        nu: f64,
        theta: f64,
        tilde_l: usize,
        flavor: GateFlavor,
    ) -> Result<Self> {
        let spec = Self {
            ell,
            nu,
            theta,
            tilde_l,
            flavor,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn log_depth(ell: usize, nu: f64) -> Result<Self> {
        Self::new(ell, nu, 1.0, 1, GateFlavor::LogDepth)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell < 2 {
            return Err(invalid(format!(
                "a product gate needs ℓ ≥ 2 factors, got {}",
                self.ell
            )));
        }
        self.validate_params()
    }

    fn validate_params(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(invalid(format!("ν must lie in (0, 1), got {}", self.nu)));
        }
        if self.flavor == GateFlavor::FixedDepth {
            if !(self.theta > 0.0 && self.theta <= 1.0) {
                return Err(invalid(format!("θ must lie in (0, 1], got {}", self.theta)));
            }
            if (self.tilde_l as f64) <= 1.0 / (2.0 * self.theta) {
                return Err(invalid(format!(
                    "L̃ = {} must exceed 1/(2θ) = {}",
                    self.tilde_l,
                    1.0 / (2.0 * self.theta)
                )));
            }
        }
        Ok(())
    }

    /// Depth bound `2ℓL̃ + 8ℓ` used by the fixed-depth flavor.
    pub fn depth_bound(&self) -> usize {
        2 * self.ell * self.tilde_l + 8 * self.ell
    }

    /// Error budget of each pair in the chain.
    pub fn per_stage_nu(&self) -> f64 {
        if self.ell <= 2 {
            self.nu
        } else {
            self.nu / (STAGE_SLACK * (self.ell - 1) as f64)
        }
    }
}

/// Smallest `m ≥ 1` with `2 · 2^{−2m−2} ≤ budget`.
pub fn stage_count(budget: f64) -> usize {
    let mut m = 1;
    while 2.0 * 0.25f64.powi(m as i32 + 1) > budget {
        m += 1;
    }
    m
}

/// Sawtooth squaring block on one input: `m` layers of four units
/// `σ(g), σ(g−½), σ(g−1), σ(f)`, readout `f_m`.
fn square_block(stages: usize) -> Result<StackedNet> {
    let mut layers = Vec::with_capacity(stages);
    let unit_rows = |g: Vec<(usize, f64)>, f: Vec<(usize, f64)>| {
        (vec![g.clone(), g.clone(), g, f], vec![0.0, -0.5, -1.0, 0.0])
    };
    let (rows, bias) = unit_rows(vec![(0, 1.0)], vec![(0, 1.0)]);
    layers.push(AffineMap::from_rows(1, rows, bias)?);
    // g_s and f_s in terms of the units of stage s
    let g_of = |_s: usize| vec![(0, 2.0), (1, -4.0), (2, 2.0)];
    let f_of = |s: usize| {
        let c = 0.25f64.powi(s as i32);
        vec![(0, -2.0 * c), (1, 4.0 * c), (2, -2.0 * c), (3, 1.0)]
    };
    for s in 1..stages {
        let (rows, bias) = unit_rows(g_of(s), f_of(s));
        layers.push(AffineMap::from_rows(4, rows, bias)?);
    }
    StackedNet::new(1, layers, vec![f_of(stages)])
}

/// Approximates `t²` on `[0,1]` with `stages` layers; error at most
/// `2^{−2·stages−2}`, exact at 0 and 1.
pub fn square_net(stages: usize) -> Result<ReluNet> {
    if stages == 0 {
        return Err(invalid("square_net needs at least one stage"));
    }
    square_block(stages)?.into_scalar()
}

fn stacked(net: ReluNet) -> StackedNet {
    StackedNet::from(net)
}

/// Lift, absolute values, two squaring branches, difference. Depth `m + 3`.
fn pair_block(stages: usize) -> Result<StackedNet> {
    let lift = AffineMap::from_rows(
        2,
        vec![
            vec![(0, 1.0)],
            vec![(0, -1.0)],
            vec![(1, 1.0)],
            vec![(1, -1.0)],
        ],
        vec![0.0; 4],
    )?;
    let abs = AffineMap::from_rows(
        4,
        vec![
            vec![(0, 1.0), (1, -1.0), (2, 1.0), (3, -1.0)],
            vec![(0, -1.0), (1, 1.0), (2, -1.0), (3, 1.0)],
            vec![(0, 1.0), (1, -1.0), (2, -1.0), (3, 1.0)],
            vec![(0, -1.0), (1, 1.0), (2, 1.0), (3, -1.0)],
        ],
        vec![0.0; 4],
    )?;
    let halves = StackedNet::new(
        2,
        vec![lift, abs],
        vec![vec![(0, 0.5), (1, 0.5)], vec![(2, 0.5), (3, 0.5)]],
    )?;
    let sq = square_block(stages)?;
    let branches = StackedNet::side_by_side(&[sq.clone(), sq])?;
    let diff = StackedNet::new(
        2,
        vec![AffineMap::from_rows(
            2,
            vec![vec![(0, 1.0)], vec![(1, 1.0)]],
            vec![0.0; 2],
        )?],
        vec![vec![(0, 1.0), (1, -1.0)]],
    )?;
    halves.then(&branches)?.then(&diff)
}

/// `t ↦ min(max(t, −1), 1) = σ(t+1) − σ(t−1) − 1`.
fn clamp_block() -> Result<StackedNet> {
    let layer = AffineMap::from_rows(
        1,
        vec![vec![(0, 1.0)], vec![(0, 1.0)], vec![]],
        vec![1.0, -1.0, 1.0],
    )?;
    StackedNet::new(1, vec![layer], vec![vec![(0, 1.0), (1, -1.0), (2, -1.0)]])
}

fn identity_channels(count: usize, depth: usize) -> Result<Vec<StackedNet>> {
    let id = stacked(identity_net(depth)?);
    Ok(vec![id; count])
}

/// Unpadded chain for `ell ≥ 2` factors.
fn chain(ell: usize, stages: usize) -> Result<StackedNet> {
    let pair = pair_block(stages)?;
    let clamped = pair.then(&clamp_block()?)?;
    let mut net: Option<StackedNet> = None;
    // the current vector is [u_1 .. u_k, P]
    for k in (1..ell).rev() {
        let step = if k == 1 {
            pair.clone()
        } else {
            let mut parts = identity_channels(k - 1, clamped.depth())?;
            parts.push(clamped.clone());
            StackedNet::side_by_side(&parts)?
        };
        net = Some(match net {
            None => step,
            Some(prev) => prev.then(&step)?,
        });
    }
    Ok(net.expect("ell >= 2"))
}

/// Gate as a stacked net. `ell == 1` yields an identity of the flavor's
/// depth so that one-factor products fit the same wiring.
pub(crate) fn gate_stacked(spec: &GateSpec) -> Result<StackedNet> {
    spec.validate_params()?;
    if spec.ell == 0 {
        return Err(invalid("a product needs at least one factor"));
    }
    let natural = if spec.ell == 1 {
        stacked(identity_net(1)?)
    } else {
        chain(spec.ell, stage_count(spec.per_stage_nu()))?
    };
    match spec.flavor {
        GateFlavor::LogDepth => Ok(natural),
        GateFlavor::FixedDepth => {
            let bound = spec.depth_bound();
            if natural.depth() > bound {
                return Err(invalid(format!(
                    "gate for ν = {} needs depth {} > 2ℓL̃+8ℓ = {bound}; increase L̃",
                    spec.nu,
                    natural.depth()
                )));
            }
            natural.pad_depth(bound)
        }
    }
}

/// Two-factor gate on `[−1,1]²` with uniform error at most `nu`, unpadded.
pub fn pair_gate(nu: f64) -> Result<ReluNet> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(invalid(format!("ν must lie in (0, 1), got {nu}")));
    }
    pair_block(stage_count(nu))?.into_scalar()
}

pub fn multi_gate(spec: &GateSpec) -> Result<ReluNet> {
    spec.validate()?;
    gate_stacked(spec)?.into_scalar()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateBudget {
    pub depth: usize,
    pub params: usize,
    pub per_stage_nu: f64,
    pub stages: usize,
}

/// Realized size of the gate `multi_gate(spec)` emits.
pub fn gate_budget(spec: &GateSpec) -> Result<GateBudget> {
    let net = multi_gate(spec)?;
    Ok(GateBudget {
        depth: net.depth(),
        params: net.param_count(),
        per_stage_nu: spec.per_stage_nu(),
        stages: stage_count(spec.per_stage_nu()),
    })
}

/// Measured behaviour of one gate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateCheck {
    pub ell: usize,
    pub nu: f64,
    pub sup_error: f64,
    pub grid_points: usize,
    pub random_points: usize,
    /// Inputs with one forced-zero factor whose output was not exactly 0.
    pub zero_violations: usize,
    pub zero_inputs: usize,
    pub depth: usize,
    pub depth_bound: Option<usize>,
    pub params: usize,
}

impl GateCheck {
    pub fn passed(&self) -> bool {
        self.sup_error <= self.nu
            && self.zero_violations == 0
            && self.depth_bound.is_none_or(|b| self.depth <= b)
    }
}

/// Grid resolution per axis keeping a gate check near `target` points.
fn check_resolution(ell: usize, target: usize) -> usize {
    let mut res = 1usize;
    while (res + 2).pow(ell as u32) <= target {
        res += 1;
    }
    res
}

/// Sup error of `multi_gate(spec)` against the exact product over a grid of
/// about `grid_points` points plus `random_points` uniform samples, and exact
/// zero preservation on `zero_inputs` inputs with one factor set to 0.
pub fn verify_gate(
    spec: &GateSpec,
    grid_points: usize,
    random_points: usize,
    zero_inputs: usize,
    seed: u64,
) -> Result<GateCheck> {
    use rand::{Rng, SeedableRng};

    let net = multi_gate(spec)?;
    let ell = spec.ell;
    let err = |x: &[f64]| net.eval(x) - x.iter().product::<f64>();
    let res = check_resolution(ell, grid_points);
    let grid = crate::analysis::sup_norm_grid(&err, ell, res)?;
    let pts = crate::analysis::uniform_points(ell, random_points, seed);
    let rand_sup = pts.iter().map(|x| err(x).abs()).fold(0.0f64, f64::max);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x7a65_726f);
    let mut zero_violations = 0;
    for _ in 0..zero_inputs {
        let mut x: Vec<f64> = (0..ell).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        x[rng.gen_range(0..ell)] = 0.0;
        if net.eval(&x) != 0.0 {
            zero_violations += 1;
        }
    }
    Ok(GateCheck {
        ell,
        nu: spec.nu,
        sup_error: grid.value.max(rand_sup),
        grid_points: grid.samples,
        random_points,
        zero_violations,
        zero_inputs,
        depth: net.depth(),
        depth_bound: (spec.flavor == GateFlavor::FixedDepth).then(|| spec.depth_bound()),
        params: net.param_count(),
    })
}
