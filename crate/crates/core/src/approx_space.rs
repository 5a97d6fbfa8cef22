//! The linear space spanned by gated tensor hats, and fits within it.
//!
//! Element `(𝐣, α)` of the basis is the gate `×̃_{d+s}` applied to
//! `ψ_{1,𝐣}, …, ψ_{d,𝐣}`, `α_k` copies of each coordinate `x^{(k)}` and
//! `s − |α|` constant ones. The hats live on `z = (x + 1)/2 ∈ [0,1]^d`:
//! `ψ_{k,𝐣}(x) = ψ(3N(z_k − j_k/N))`, so the nodes `j/N` cover the whole
//! cube.
//!
//! A hat that is exactly zero forces its element to be exactly zero (the
//! gate preserves zeros bit for bit), which makes design matrices sparse
//! without approximating anything.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{grid_size, linear_fit, slope_fit, tensor_grid, SlopeFit, GRID_CAP};
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::gate::{gate_stacked, GateFlavor, GateSpec};
use crate::net::{sum_nets, ReluNet, StackedNet};
use crate::primitives::{constant_net, coordinate_net, psi_affine_net};
use crate::synth::Target;

pub const DEFAULT_BASIS_CAP: usize = 20_000;

/// Diagonal regularization of the coefficient block in constrained solves.
pub const KKT_REGULARIZATION: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BasisSpec {
    /// Partition count per axis.
    pub n: usize,
    /// Monomial degree cap.
    pub s: usize,
    pub theta: f64,
    pub nu: f64,
    /// Gate depth parameter; must exceed `1/(2θ)`.
    pub tilde_l: usize,
    /// Largest basis allowed.
    pub cap: usize,
}

impl BasisSpec {
    /// Picks the smallest admissible `L̃`, i.e. `⌊1/(2θ)⌋ + 1`.
    pub fn new(n: usize, s: usize, theta: f64, nu: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(invalid(format!("θ must lie in (0, 1], got {theta}")));
        }
        let tilde_l = (1.0 / (2.0 * theta)).floor() as usize + 1;
        let spec = Self {
            n,
            s,
            theta,
            nu,
            tilde_l,
            cap: DEFAULT_BASIS_CAP,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Parameters used for smoothness `r` in dimension `d`: `ν = N^{−(r+d)}`,
    /// `θ = d/(r+d)`, `L̃ = 2 + ⌈2r/d⌉`.
    pub fn for_rate(n: usize, s: usize, r: f64, d: usize) -> Result<Self> {
        let df = d as f64;
        let mut spec = Self::new(n, s, df / (r + df), (n as f64).powf(-(r + df)).min(0.5))?;
        spec.tilde_l = spec.tilde_l.max(2 + (2.0 * r / df).ceil() as usize);
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("partition count N must be at least 1"));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(invalid(format!("ν must lie in (0, 1), got {}", self.nu)));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(invalid(format!("θ must lie in (0, 1], got {}", self.theta)));
        }
        if (self.tilde_l as f64) <= 1.0 / (2.0 * self.theta) {
            return Err(invalid(format!("L̃ = {} must exceed 1/(2θ)", self.tilde_l)));
        }
        Ok(())
    }

    /// `(N+1)^d · C(s+d, d)`, or `None` on overflow.
    pub fn basis_size(&self, d: usize) -> Option<usize> {
        (self.n + 1)
            .checked_pow(d as u32)?
            .checked_mul(binomial(self.s + d, d)?)
    }

    /// `1 + 2(d+s)(L̃+4)`.
    pub fn element_depth(&self, d: usize) -> usize {
        1 + 2 * (d + self.s) * (self.tilde_l + 4)
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All `α ∈ ℕ^d` with `|α| ≤ s`, by total degree then lexicographically.
fn multi_indices(d: usize, s: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for a in (0..=left).rev() {
            cur.push(a);
            rec(d, left - a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=s {
        rec(d, deg, &mut Vec::new(), &mut out);
    }
    out
}

#[derive(Clone, Debug)]
pub struct BasisElement {
    pub grid_index: Vec<usize>,
    pub alpha: Vec<usize>,
    pub net: ReluNet,
}

#[derive(Clone, Debug)]
pub struct ApproxBasis {
    spec: BasisSpec,
    dim: usize,
    n_alpha: usize,
    elements: Vec<BasisElement>,
    /// `psi[k][j]` is the one-layer net of `ψ_{k,j}`.
    psi: Vec<Vec<ReluNet>>,
}

fn psi_channel(axis: usize, j: usize, n: usize, d: usize) -> Result<ReluNet> {
    let scale = 1.5 * n as f64;
    psi_affine_net(axis, scale, scale - 3.0 * j as f64, d)
}

pub fn build_basis(spec: &BasisSpec, d: usize) -> Result<ApproxBasis> {
    spec.validate()?;
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let size = spec.basis_size(d).unwrap_or(usize::MAX);
    if size > spec.cap {
        return Err(Error::Resource(format!(
            "basis of {size} elements exceeds the cap of {}; lower N or s",
            spec.cap
        )));
    }
    let ell = d + spec.s;
    let gate = gate_stacked(&GateSpec {
        ell,
        nu: spec.nu,
        theta: spec.theta,
        tilde_l: spec.tilde_l,
        flavor: GateFlavor::FixedDepth,
    })?;
    let psi: Vec<Vec<ReluNet>> = (0..d)
        .map(|k| (0..=spec.n).map(|j| psi_channel(k, j, spec.n, d)).collect())
        .collect::<Result<_>>()?;
    let coords: Vec<StackedNet> = (0..d)
        .map(|k| coordinate_net(k, d).map(StackedNet::from))
        .collect::<Result<_>>()?;
    let one = StackedNet::from(constant_net(1.0, d)?);
    let alphas = multi_indices(d, spec.s);
    let n_grid = (spec.n + 1).pow(d as u32);
    let elements = (0..n_grid * alphas.len())
        .into_par_iter()
        .map(|idx| {
            let (g, a) = (idx / alphas.len(), idx % alphas.len());
            let grid_index = unflatten(g, d, spec.n + 1);
            let alpha = &alphas[a];
            let mut channels: Vec<StackedNet> = (0..d)
                .map(|k| StackedNet::from(psi[k][grid_index[k]].clone()))
                .collect();
            for (k, &ak) in alpha.iter().enumerate() {
                channels.extend(std::iter::repeat_n(coords[k].clone(), ak));
            }
            let used: usize = alpha.iter().sum();
            channels.extend(std::iter::repeat_n(one.clone(), spec.s - used));
            let net = StackedNet::stack(&channels)?.then(&gate)?.into_scalar()?;
            Ok(BasisElement {
                grid_index,
                alpha: alpha.clone(),
                net,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ApproxBasis {
        spec: *spec,
        dim: d,
        n_alpha: alphas.len(),
        elements,
        psi,
    })
}

fn unflatten(mut idx: usize, d: usize, base: usize) -> Vec<usize> {
    (0..d)
        .map(|_| {
            let v = idx % base;
            idx /= base;
            v
        })
        .collect()
}

impl ApproxBasis {
    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    /// Total free parameters over all elements.
    pub fn param_count(&self) -> usize {
        self.elements.iter().map(|e| e.net.param_count()).sum()
    }

    /// Nonzero element values at `x` as `(element index, value)`.
    pub fn eval_sparse(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let d = self.dim;
        let base = self.spec.n + 1;
        // grid indices whose hat is nonzero, per axis
        let support: Vec<Vec<usize>> = (0..d)
            .map(|k| {
                (0..base)
                    .filter(|&j| self.psi[k][j].eval(x) != 0.0)
                    .collect()
            })
            .collect();
        if support.iter().any(Vec::is_empty) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut pick = vec![0usize; d];
        loop {
            let mut g = 0;
            for k in (0..d).rev() {
                g = g * base + support[k][pick[k]];
            }
            for a in 0..self.n_alpha {
                let idx = g * self.n_alpha + a;
                let v = self.elements[idx].net.eval(x);
                if v != 0.0 {
                    out.push((idx, v));
                }
            }
            let mut k = 0;
            loop {
                if k == d {
                    out.sort_unstable_by_key(|e| e.0);
                    return out;
                }
                pick[k] += 1;
                if pick[k] < support[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
        }
    }

    /// `Σ_k coeffs[k] · element_k(x)`.
    pub fn eval_combination(&self, coeffs: &[f64], x: &[f64]) -> f64 {
        self.eval_sparse(x)
            .iter()
            .map(|&(k, v)| coeffs[k] * v)
            .sum()
    }

    /// Dense design matrix of the elements at `points`.
    pub fn design(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        let rows: Vec<Vec<(usize, f64)>> = points.par_iter().map(|x| self.eval_sparse(x)).collect();
        let mut a = DMatrix::zeros(points.len(), self.len());
        for (i, row) in rows.iter().enumerate() {
            for &(k, v) in row {
                a[(i, k)] = v;
            }
        }
        a
    }

    /// The single net `Σ_k coeffs[k] · element_k`.
    pub fn combine(&self, coeffs: &[f64]) -> Result<ReluNet> {
        if coeffs.len() != self.len() {
            return Err(invalid(format!(
                "{} coefficients for {} basis elements",
                coeffs.len(),
                self.len()
            )));
        }
        let nets: Vec<ReluNet> = self.elements.iter().map(|e| e.net.clone()).collect();
        sum_nets(&nets, coeffs)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FitReport {
    pub sup_error: f64,
    /// `L²([−1,1]^d)` error estimated on the held-out grid.
    pub l2_error: f64,
    /// Root-mean-square error on the fit grid.
    pub grid_rmse: f64,
    pub constrained: bool,
    /// Largest `|Σ c_k element_k(x_i) − y_i|` over the data (constrained fits).
    pub max_residual: f64,
    /// Set when the normal equations were singular and a minimum-norm
    /// pseudo-solution was used.
    pub pseudo_inverse: bool,
}

#[derive(Clone, Debug)]
pub struct FittedModel {
    pub basis: Arc<ApproxBasis>,
    pub coefficients: Vec<f64>,
    combined: Option<ReluNet>,
    pub fit_report: FitReport,
}

impl FittedModel {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.basis.eval_combination(&self.coefficients, x)
    }

    /// The fitted function as one net, built on first use.
    pub fn combined(&mut self) -> Result<&ReluNet> {
        if self.combined.is_none() {
            self.combined = Some(self.basis.combine(&self.coefficients)?);
        }
        Ok(self.combined.as_ref().unwrap())
    }
}

/// Held-out grid: `2·resolution` points per axis at the centres of the
/// cells of the doubled grid, so no point coincides with a fit node.
pub fn held_out_grid(d: usize, resolution: usize) -> Result<Vec<Vec<f64>>> {
    let per_axis = 2 * resolution;
    let total = per_axis
        .checked_pow(d as u32)
        .filter(|&n| n <= GRID_CAP)
        .ok_or_else(|| {
            Error::Resource(format!(
                "held-out grid of {per_axis}^{d} points exceeds the cap"
            ))
        })?;
    let h = 2.0 / per_axis as f64;
    Ok((0..total)
        .map(|i| {
            unflatten(i, d, per_axis)
                .into_iter()
                .map(|k| -1.0 + (k as f64 + 0.5) * h)
                .collect()
        })
        .collect())
}

fn fit_grid(d: usize, resolution: usize) -> Result<Vec<Vec<f64>>> {
    if grid_size(d, resolution).is_none_or(|n| n > GRID_CAP) {
        return Err(Error::Resource(format!(
            "fit grid ({resolution}+1)^{d} exceeds the cap"
        )));
    }
    tensor_grid(d, resolution, -1.0, 1.0)
}

fn sample_target(target: &Target, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let ys: Vec<f64> = points.par_iter().map(|x| target(x)).collect();
    if let Some(i) = ys.iter().position(|y| !y.is_finite()) {
        return Err(invalid(format!("target is not finite at {:?}", points[i])));
    }
    Ok(ys)
}

fn evaluate_errors(
    basis: &ApproxBasis,
    coeffs: &[f64],
    target: Option<&Target>,
    resolution: usize,
) -> Result<(f64, f64)> {
    let Some(target) = target else {
        return Ok((f64::NAN, f64::NAN));
    };
    let pts = held_out_grid(basis.dim(), resolution)?;
    let errs: Vec<f64> = pts
        .par_iter()
        .map(|x| (basis.eval_combination(coeffs, x) - target(x)).abs())
        .collect();
    let sup = errs.iter().fold(0.0f64, |m, &e| m.max(e));
    let ms = errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64;
    Ok((sup, (2f64.powi(basis.dim() as i32) * ms).sqrt()))
}

fn rmse(a: &DMatrix<f64>, c: &DVector<f64>, y: &DVector<f64>) -> f64 {
    ((a * c - y).norm_squared() / y.len() as f64).sqrt()
}

/// Least-squares solve of `G c = b` with a pseudo-inverse fallback.
fn solve_normal(g: DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    if let Some(ch) = g.clone().cholesky() {
        let c = ch.solve(b);
        if c.iter().all(|v| v.is_finite()) {
            return (c, false);
        }
    }
    let svd = g.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12;
    (svd.solve(b, tol).expect("SVD with both factors"), true)
}

/// Minimizes the mean squared error to `target` over the tensor grid with
/// `grid_resolution` cells per axis.
pub fn fit_least_squares(
    basis: &Arc<ApproxBasis>,
    target: &Target,
    grid_resolution: usize,
) -> Result<FittedModel> {
    let pts = fit_grid(basis.dim(), grid_resolution)?;
    let y = DVector::from_vec(sample_target(target, &pts)?);
    let a = basis.design(&pts);
    let at = a.transpose();
    let (c, pseudo_inverse) = solve_normal(&at * &a, &(&at * &y));
    let coefficients: Vec<f64> = c.iter().copied().collect();
    let (sup_error, l2_error) =
        evaluate_errors(basis, &coefficients, Some(target), grid_resolution)?;
    Ok(FittedModel {
        basis: Arc::clone(basis),
        fit_report: FitReport {
            sup_error,
            l2_error,
            grid_rmse: rmse(&a, &c, &y),
            constrained: false,
            max_residual: 0.0,
            pseudo_inverse,
        },
        coefficients,
        combined: None,
    })
}

/// Least squares subject to `Σ c_k element_k(x_i) = y_i` for every data
/// point. Without a target the coefficient norm is minimized instead.
pub fn fit_interpolating(
    basis: &Arc<ApproxBasis>,
    ds: &Dataset,
    target: Option<&Target>,
    grid_resolution: usize,
) -> Result<FittedModel> {
    if ds.dim() != basis.dim() {
        return Err(invalid(format!(
            "data has dimension {}, basis {}",
            ds.dim(),
            basis.dim()
        )));
    }
    let k = basis.len();
    let m = ds.len();
    if k < m {
        return Err(Error::Infeasible(format!(
            "basis has {k} elements but {m} constraints; increase N"
        )));
    }
    let c_mat = basis.design(ds.points());
    let rank = c_mat
        .clone()
        .svd(false, false)
        .rank(1e-10 * c_mat.norm().max(1.0));
    if rank < m {
        return Err(Error::Infeasible(format!(
            "interpolation constraints have rank {rank} < {m}; increase N so that n ≥ C·q^(−d)"
        )));
    }
    let (g, b, fit) = match target {
        Some(t) => {
            let pts = fit_grid(basis.dim(), grid_resolution)?;
            let y = DVector::from_vec(sample_target(t, &pts)?);
            let a = basis.design(&pts);
            let at = a.transpose();
            let g = &at * &a;
            let b = &at * &y;
            (g, b, Some((a, y)))
        }
        None => (DMatrix::identity(k, k), DVector::zeros(k), None),
    };
    let mut kkt = DMatrix::zeros(k + m, k + m);
    kkt.view_mut((0, 0), (k, k)).copy_from(&g);
    for i in 0..k {
        kkt[(i, i)] += KKT_REGULARIZATION;
    }
    kkt.view_mut((k, 0), (m, k)).copy_from(&c_mat);
    kkt.view_mut((0, k), (k, m)).copy_from(&c_mat.transpose());
    let mut rhs = DVector::zeros(k + m);
    rhs.rows_mut(0, k).copy_from(&b);
    rhs.rows_mut(k, m)
        .copy_from(&DVector::from_column_slice(ds.labels()));
    let lu = kkt.clone().lu();
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Infeasible("constrained system is singular; increase N".into()))?;
    // one step of iterative refinement
    let r = &rhs - &kkt * &sol;
    if let Some(dx) = lu.solve(&r) {
        sol += dx;
    }
    let c = sol.rows(0, k).into_owned();
    let labels = DVector::from_column_slice(ds.labels());
    let max_residual = (&c_mat * &c - labels).amax();
    let coefficients: Vec<f64> = c.iter().copied().collect();
    let (sup_error, l2_error) = evaluate_errors(basis, &coefficients, target, grid_resolution)?;
    let grid_rmse = fit.as_ref().map_or(f64::NAN, |(a, y)| rmse(a, &c, y));
    Ok(FittedModel {
        basis: Arc::clone(basis),
        coefficients,
        combined: None,
        fit_report: FitReport {
            sup_error,
            l2_error,
            grid_rmse,
            constrained: true,
            max_residual,
            pseudo_inverse: false,
        },
    })
}

/// `g_w(x) = Σ_j sign_j · (1 − ‖x − x_j‖₂ / q_Λ)₊`.
pub fn witness_function(ds: &Dataset, signs: &[f64]) -> Result<Target> {
    if signs.len() != ds.len() {
        return Err(invalid(format!(
            "{} signs for {} points",
            signs.len(),
            ds.len()
        )));
    }
    if signs.iter().any(|s| s.abs() != 1.0) {
        return Err(invalid("signs must be ±1"));
    }
    let q = ds.separation_radius()?;
    let points = ds.points().to_vec();
    let signs = signs.to_vec();
    Ok(Arc::new(move |x: &[f64]| {
        points
            .iter()
            .zip(&signs)
            .map(|(c, s)| {
                let r = x
                    .iter()
                    .zip(c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                s * (1.0 - r / q).max(0.0)
            })
            .sum()
    }))
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub basis_size: usize,
    pub params: usize,
    pub sup_err_unconstrained: f64,
    pub sup_err_constrained: f64,
    pub l2_err: f64,
    /// Log-log slope of the unconstrained sup errors up to this row.
    pub slope_so_far: Option<f64>,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub r: f64,
    pub d: usize,
    pub s: usize,
    pub rows: Vec<RateRow>,
    pub unconstrained: SlopeFit,
    pub constrained: SlopeFit,
}

impl RateReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "N,basis_size,params,sup_err_unconstrained,sup_err_constrained,l2_err,slope_so_far\n",
        );
        for r in &self.rows {
            let slope = r.slope_so_far.map_or(String::new(), |s| format!("{s:.6}"));
            out.push_str(&format!(
                "{},{},{},{:.6e},{:.6e},{:.6e},{slope}\n",
                r.n,
                r.basis_size,
                r.params,
                r.sup_err_unconstrained,
                r.sup_err_constrained,
                r.l2_err
            ));
        }
        out.push_str(&format!(
            "# slope unconstrained {:.6} (r2 {:.4}), constrained {:.6} (r2 {:.4})\n",
            self.unconstrained.slope,
            self.unconstrained.r_squared,
            self.constrained.slope,
            self.constrained.r_squared
        ));
        out
    }
}

/// Fit grid resolution used per `N`: four cells per hat spacing.
pub fn rate_resolution(n: usize, d: usize) -> usize {
    let mut res = 4 * n;
    while grid_size(d, 2 * res).is_none_or(|c| c > 200_000) && res > n {
        res -= 1;
    }
    res
}

/// Fits `target` at each `N` without and with interpolation of `ds`.
pub fn rate_experiment(
    target: &Target,
    r: f64,
    d: usize,
    n_list: &[usize],
    s: usize,
    ds: &Dataset,
) -> Result<RateReport> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("N list must be increasing with at least 3 entries"));
    }
    let mut rows: Vec<RateRow> = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let spec = BasisSpec::for_rate(n, s, r, d)?;
        let basis = Arc::new(build_basis(&spec, d)?);
        let res = rate_resolution(n, d);
        let free = fit_least_squares(&basis, target, res)?;
        let tied = fit_interpolating(&basis, ds, Some(target), res)?;
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).chain([n as f64]).collect();
        let ys: Vec<f64> = rows
            .iter()
            .map(|r| r.sup_err_unconstrained)
            .chain([free.fit_report.sup_error])
            .collect();
        rows.push(RateRow {
            n,
            basis_size: basis.len(),
            params: basis.param_count(),
            sup_err_unconstrained: free.fit_report.sup_error,
            sup_err_constrained: tied.fit_report.sup_error,
            l2_err: free.fit_report.l2_error,
            slope_so_far: if xs.len() >= 2 {
                log_slope(&xs, &ys)
            } else {
                None
            },
            max_residual: tied.fit_report.max_residual,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let free: Vec<f64> = rows
        .iter()
        .map(|r| r.sup_err_unconstrained.max(1e-300))
        .collect();
    let tied: Vec<f64> = rows
        .iter()
        .map(|r| r.sup_err_constrained.max(1e-300))
        .collect();
    Ok(RateReport {
        r,
        d,
        s,
        unconstrained: slope_fit(&ns, &free)?,
        constrained: slope_fit(&ns, &tied)?,
        rows,
    })
}

fn log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if ys.iter().any(|&y| y <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).ok().map(|f| f.slope)
}

/// `m` uniform points whose pairwise ℓ∞ distances are at least `gap`,
/// labelled by `target`. Rejection sampling; fails after many misses.
pub fn separated_samples(
    target: &Target,
    d: usize,
    m: usize,
    gap: f64,
    seed: u64,
) -> Result<Dataset> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut misses = 0usize;
    while pts.len() < m {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if pts
            .iter()
            .all(|p| p.iter().zip(&x).any(|(a, b)| (a - b).abs() >= gap))
        {
            pts.push(x);
        } else {
            misses += 1;
            if misses > 100_000 {
                return Err(invalid(format!(
                    "could not place {m} points with gap {gap} in dimension {d}"
                )));
            }
        }
    }
    let labels = sample_target(target, &pts)?;
    Dataset::new(pts, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 0), vec![vec![0, 0, 0]]);
        let spec = BasisSpec::new(2, 1, 1.0, 1e-3).unwrap();
        assert_eq!(spec.basis_size(1), Some(6));
        assert_eq!(spec.basis_size(2), Some(27));
        assert_eq!(binomial(5, 2), Some(10));
    }

    #[test]
    fn small_basis_matches_psi() {
        let spec = BasisSpec::new(1, 0, 1.0, 1e-3).unwrap();
        let basis = build_basis(&spec, 1).unwrap();
        assert_eq!(basis.len(), 2);
        let psi = |t: f64| {
            (t + 2.0).max(0.0) - (t + 1.0).max(0.0) - (t - 1.0).max(0.0) + (t - 2.0).max(0.0)
        };
        for e in basis.elements() {
            assert_eq!(e.net.depth(), spec.element_depth(1));
            let j = e.grid_index[0] as f64;
            for i in 0..=40 {
                let x = -1.0 + i as f64 / 20.0;
                let z = (x + 1.0) / 2.0;
                assert!((e.net.eval(&[x]) - psi(3.0 * (z - j))).abs() <= spec.nu);
            }
        }
    }

    #[test]
    fn sparse_eval_matches_elements() {
        let spec = BasisSpec::new(3, 1, 1.0, 1e-3).unwrap();
        let basis = build_basis(&spec, 2).unwrap();
        assert_eq!(basis.len(), 16 * 3);
        for x in crate::analysis::uniform_points(2, 50, 1) {
            let sparse = basis.eval_sparse(&x);
            for (k, e) in basis.elements().iter().enumerate() {
                let v = e.net.eval(&x);
                let s = sparse.iter().find(|p| p.0 == k).map_or(0.0, |p| p.1);
                assert_eq!(v, s);
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        let mut spec = BasisSpec::new(50, 0, 1.0, 1e-2).unwrap();
        spec.cap = 100;
        assert!(matches!(build_basis(&spec, 2), Err(Error::Resource(_))));
    }

    #[test]
    fn constant_and_linear_targets() {
        let spec = BasisSpec::new(4, 1, 1.0, 1e-4).unwrap();
        let basis = Arc::new(build_basis(&spec, 1).unwrap());
        let one: Target = Arc::new(|_| 1.0);
        let fit = fit_least_squares(&basis, &one, 32).unwrap();
        assert!(fit.fit_report.sup_error <= spec.nu * 3.0);
        let lin: Target = Arc::new(|x| x[0]);
        let fit = fit_least_squares(&basis, &lin, 32).unwrap();
        assert!(fit.fit_report.sup_error <= 2.0 * spec.nu + 1e-6);
    }

    #[test]
    fn interpolating_fit_hits_data() {
        let spec = BasisSpec::new(8, 0, 1.0, 1e-4).unwrap();
        let basis = Arc::new(build_basis(&spec, 1).unwrap());
        let ds = Dataset::new(
            vec![vec![-0.7], vec![0.1], vec![0.55]],
            vec![1.0, -2.0, 0.5],
        )
        .unwrap();
        let fit = fit_interpolating(&basis, &ds, None, 32).unwrap();
        assert!(fit.fit_report.max_residual <= 1e-8);
        for (x, y) in ds.points().iter().zip(ds.labels()) {
            assert!((fit.eval(x) - y).abs() <= 1e-8);
        }
        // more constraints than elements
        let tiny = Arc::new(build_basis(&BasisSpec::new(1, 0, 1.0, 1e-2).unwrap(), 1).unwrap());
        assert!(matches!(
            fit_interpolating(&tiny, &ds, None, 8),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn witness_properties() {
        let ds = Dataset::new(
            vec![vec![-0.5, 0.0], vec![0.5, 0.2], vec![0.0, 0.9]],
            vec![0.0; 3],
        )
        .unwrap();
        let g = witness_function(&ds, &[1.0, -1.0, 1.0]).unwrap();
        assert_eq!(g(&[-0.5, 0.0]), 1.0);
        assert_eq!(g(&[0.5, 0.2]), -1.0);
        assert!(witness_function(&ds, &[1.0, 0.5, 1.0]).is_err());
        assert!(witness_function(&ds, &[1.0]).is_err());
    }
}
