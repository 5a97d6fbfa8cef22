//! Exact interpolants built from a teacher net.
//!
//! The student is
//!
//! ```text
//! f(x) = Σ_i y_i N_τ(x − x_i) + C* · ×̃₂(g(x)/C*, 1 − Σ_i N_τ(x − x_i))
//! ```
//!
//! with `N_τ = N_{−τ,τ,τ/2}`. For `τ < 2q_Λ/(3√d)` the bumps have disjoint
//! supports, so at a data point the second gate input is 0 and the gate
//! returns exactly 0. Far from the data every bump vanishes and the gate
//! approximates `g/C*` to within `ν`.
//!
//! The bump field and the teacher are stacked on a shared input and padded
//! to depth `max(L, 2)`. The gate is padded to `4L̃ + 16` and the label sum
//! rides alongside it through an identity chain of the same depth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{lp_norm_mc, sup_norm_grid, uniform_points, NormEstimate};
use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::gate::{gate_stacked, GateFlavor, GateSpec};
use crate::net::{AffineMap, ReluNet, StackedNet};
use crate::primitives::{bump_layers, identity_net, BumpSpec};

/// Multiplier applied to the upper bound on `τ`.
pub const TAU_SAFETY: f64 = 0.9;

/// Inflation applied to the estimated teacher sup.
pub const C_STAR_INFLATION: f64 = 1.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeepenFlavor {
    /// Gate padded to its fixed depth; student depth is `4L̃+16+max(L,2)`.
    FixedDepth,
    /// Unpadded log-depth gate.
    FullyConnected,
}

impl std::str::FromStr for DeepenFlavor {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-depth" => Ok(Self::FixedDepth),
            "fully-connected" | "fc" => Ok(Self::FullyConnected),
            other => Err(invalid(format!(
                "unknown flavor {other:?}; expected fixed-depth or fully-connected"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepenPlan {
    pub tau: f64,
    pub nu: f64,
    pub theta: f64,
    pub tilde_l: usize,
    pub epsilon: f64,
    pub p: f64,
    pub c_star: f64,
    pub flavor: DeepenFlavor,
    /// Separation radius of the dataset the plan was made for.
    pub q: f64,
}

impl DeepenPlan {
    /// `2q_Λ/(3√d)`, the bound that keeps bump supports disjoint.
    pub fn separation_bound(q: f64, d: usize) -> f64 {
        2.0 * q / (3.0 * (d as f64).sqrt())
    }

    /// `m^{−1/d} ε^{p/d}`, the bound that keeps the bumps' total volume small.
    pub fn volume_bound(m: usize, d: usize, epsilon: f64, p: f64) -> f64 {
        (m as f64).powf(-1.0 / d as f64) * epsilon.powf(p / d as f64)
    }

    /// `C′ = 2^{d/p} + 2C*·3^{d/p}`; the student stays within `C′ε` of the
    /// teacher in `L^p`.
    pub fn closeness_constant(&self, d: usize) -> f64 {
        let e = d as f64 / self.p;
        2f64.powf(e) + 2.0 * self.c_star * 3f64.powf(e)
    }

    /// Depth of a fixed-depth student for a teacher of depth `l`.
    pub fn fixed_depth(&self, l: usize) -> usize {
        4 * self.tilde_l + 16 + l.max(2)
    }

    fn gate_spec(&self) -> Result<GateSpec> {
        let flavor = match self.flavor {
            DeepenFlavor::FixedDepth => GateFlavor::FixedDepth,
            DeepenFlavor::FullyConnected => GateFlavor::LogDepth,
        };
        GateSpec::new(2, self.nu, self.theta, self.tilde_l, flavor)
    }
}

/// `max |teacher|` over a grid of at most `min(64^d, 10⁶)` points, refined by
/// `refine` uniform samples.
pub fn estimate_sup(teacher: &ReluNet, refine: usize, seed: u64) -> Result<f64> {
    let d = teacher.input_dim();
    let mut res = 63usize;
    while (res + 1)
        .checked_pow(d as u32)
        .is_none_or(|n| n > 1_000_000)
        && res > 1
    {
        res -= 1;
    }
    let f = |x: &[f64]| teacher.eval(x);
    let grid = sup_norm_grid(&f, d, res)?.value;
    let mc = uniform_points(d, refine, seed)
        .par_iter()
        .map(|x| teacher.eval(x).abs())
        .reduce(|| 0.0, f64::max);
    let sup = grid.max(mc);
    if !sup.is_finite() {
        return Err(invalid("teacher sup estimate is not finite"));
    }
    Ok(sup)
}

pub fn make_plan(
    ds: &Dataset,
    teacher: &ReluNet,
    epsilon: f64,
    p: f64,
    theta: f64,
    tilde_l: usize,
    flavor: DeepenFlavor,
) -> Result<DeepenPlan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("ε must lie in (0, 1), got {epsilon}")));
    }
    if !(p >= 2.0 && p.is_finite()) {
        return Err(invalid(format!("p must be a finite value ≥ 2, got {p}")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(invalid(format!("θ must lie in (0, 1], got {theta}")));
    }
    if (tilde_l as f64) <= 1.0 / (2.0 * theta) {
        return Err(invalid(format!(
            "L̃ = {tilde_l} must exceed 1/(2θ) = {}",
            1.0 / (2.0 * theta)
        )));
    }
    if teacher.input_dim() != ds.dim() {
        return Err(invalid(format!(
            "teacher takes {} inputs, data has dimension {}",
            teacher.input_dim(),
            ds.dim()
        )));
    }
    let d = ds.dim();
    let q = ds.separation_radius()?;
    let tau = TAU_SAFETY
        * DeepenPlan::separation_bound(q, d).min(DeepenPlan::volume_bound(ds.len(), d, epsilon, p));
    let sup = estimate_sup(teacher, 10_000, 0)?;
    let plan = DeepenPlan {
        tau,
        nu: epsilon,
        theta,
        tilde_l,
        epsilon,
        p,
        c_star: (C_STAR_INFLATION * sup).max(1.0),
        flavor,
        q,
    };
    plan.gate_spec()?;
    Ok(plan)
}

/// Depth-2 stacked net with outputs `[Σ_i y_i N_τ(x − x_i), 1 − Σ_i N_τ(x − x_i)]`.
///
/// A constant unit (bias 1) supplies the 1; it is the last unit of each
/// layer so that at a data point the second output is `1 − N_i` with every
/// other bump contributing an exact zero.
pub fn bump_field(ds: &Dataset, tau: f64) -> Result<StackedNet> {
    let d = ds.dim();
    let spec = BumpSpec::new(-tau, tau, tau / 2.0, d)?;
    let (l1, l2) = bump_layers(&spec, ds.points())?;
    let m = ds.len();
    let w1 = l1.rows();
    let mut rows1 = l1.row_lists();
    let mut bias1 = l1.bias().to_vec();
    rows1.push(vec![]);
    bias1.push(1.0);
    let mut rows2 = l2.row_lists();
    let mut bias2 = l2.bias().to_vec();
    rows2.push(vec![(w1, 1.0)]);
    bias2.push(0.0);
    let layer1 = AffineMap::from_rows(d, rows1, bias1)?;
    let layer2 = AffineMap::from_rows(w1 + 1, rows2, bias2)?;
    let labels: Vec<(usize, f64)> = ds.labels().iter().copied().enumerate().collect();
    let mut rest: Vec<(usize, f64)> = (0..m).map(|i| (i, -1.0)).collect();
    rest.push((m, 1.0));
    StackedNet::new(d, vec![layer1, layer2], vec![labels, rest])
}

fn check_tau(ds: &Dataset, plan: &DeepenPlan) -> Result<()> {
    let d = ds.dim();
    let q = ds.separation_radius()?;
    let sep = DeepenPlan::separation_bound(q, d);
    if !(plan.tau > 0.0 && plan.tau < sep) {
        return Err(invalid(format!(
            "τ = {} violates τ < 2q/(3√d) = {sep}",
            plan.tau
        )));
    }
    let vol = DeepenPlan::volume_bound(ds.len(), d, plan.epsilon, plan.p);
    if plan.tau > vol {
        return Err(invalid(format!(
            "τ = {} violates τ ≤ m^(−1/d)·ε^(p/d) = {vol}",
            plan.tau
        )));
    }
    Ok(())
}

/// Builds the student net for `teacher` and `ds`.
pub fn deepen(teacher: &ReluNet, ds: &Dataset, plan: &DeepenPlan) -> Result<ReluNet> {
    if teacher.input_dim() != ds.dim() {
        return Err(invalid(format!(
            "teacher takes {} inputs, data has dimension {}",
            teacher.input_dim(),
            ds.dim()
        )));
    }
    if plan.nu != plan.epsilon {
        return Err(invalid("plan must use ν = ε"));
    }
    if !(plan.c_star >= 1.0 && plan.c_star.is_finite()) {
        return Err(invalid(format!(
            "C* must be finite and at least 1, got {}",
            plan.c_star
        )));
    }
    check_tau(ds, plan)?;
    let front_depth = teacher.depth().max(2);
    let field = bump_field(ds, plan.tau)?.pad_depth(front_depth)?;
    let g = StackedNet::from(teacher.clone()).pad_depth(front_depth)?;
    // channels [Σ y N, 1 − Σ N, g]
    let front = StackedNet::stack(&[field, g])?;
    let inv = 1.0 / plan.c_star;
    let front = front.map_outputs(&[
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.0, inv],
        vec![0.0, 1.0, 0.0],
    ])?;
    let gate = gate_stacked(&plan.gate_spec()?)?;
    let carry = StackedNet::from(identity_net(gate.depth())?);
    let back = StackedNet::side_by_side(&[carry, gate])?.map_outputs(&[vec![1.0, plan.c_star]])?;
    front.then(&back)?.into_scalar()
}

/// Fully connected variant: same formula with the log-depth gate.
pub fn deepen_fc(teacher: &ReluNet, ds: &Dataset, epsilon: f64, p: f64) -> Result<ReluNet> {
    let plan = make_plan(
        ds,
        teacher,
        epsilon,
        p,
        1.0,
        1,
        DeepenFlavor::FullyConnected,
    )?;
    deepen(teacher, ds, &plan)
}

/// `Σ_i y_i N_{−τ,τ,τ/2}(x − x_i)`: interpolates the data yet is tiny in
/// every `L^p` norm. All-zero labels give the zero net.
pub fn bad_interpolant(ds: &Dataset, tau: f64) -> Result<ReluNet> {
    let d = ds.dim();
    let q = ds.separation_radius()?;
    let sep = DeepenPlan::separation_bound(q, d);
    if !(tau > 0.0 && tau < sep) {
        return Err(invalid(format!("τ = {tau} violates τ < 2q/(3√d) = {sep}")));
    }
    if ds.labels().iter().all(|&y| y == 0.0) {
        return ReluNet::zero(d, 2);
    }
    let spec = BumpSpec::new(-tau, tau, tau / 2.0, d)?;
    let (l1, l2) = bump_layers(&spec, ds.points())?;
    ReluNet::new(d, vec![l1, l2], ds.labels().to_vec())
}

/// `(3τ/2)^{d/p} · Σ|y_i|`, the proof's `L^p` bound for the bad interpolant.
pub fn bad_interpolant_bound(ds: &Dataset, tau: f64, p: f64) -> f64 {
    let d = ds.dim() as f64;
    (1.5 * tau).powf(d / p) * ds.labels().iter().map(|y| y.abs()).sum::<f64>()
}

/// Numerical checks run on every emitted student.
#[derive(Clone, Debug, Serialize)]
pub struct StudentCheck {
    pub max_residual: f64,
    /// `max_j |Σ_i N_τ(x_j − x_i) − 1|`.
    pub locality_deviation: f64,
    pub distance: NormEstimate,
    /// `C′ε`.
    pub distance_bound: f64,
    pub depth: usize,
    /// Required depth for the fixed-depth flavor.
    pub expected_depth: Option<usize>,
    pub params: usize,
    /// `max |student − teacher|` over sampled points farther than `3τ/2`
    /// (ℓ∞) from every data point.
    pub off_support_error: f64,
    /// `C* · ν`, the gate error at the teacher's scale.
    pub off_support_bound: f64,
    pub off_support_samples: usize,
}

impl StudentCheck {
    pub fn interpolates(&self) -> bool {
        self.max_residual <= 1e-8
    }

    pub fn close(&self) -> bool {
        self.distance.value <= self.distance_bound + 3.0 * self.distance.stderr
    }

    pub fn depth_ok(&self) -> bool {
        self.expected_depth.is_none_or(|e| e == self.depth)
    }

    pub fn off_support_ok(&self) -> bool {
        self.off_support_error <= self.off_support_bound
    }

    pub fn passed(&self) -> bool {
        self.interpolates()
            && self.locality_deviation <= 1e-12
            && self.close()
            && self.depth_ok()
            && self.off_support_ok()
    }

    /// Name of the first failing invariant.
    pub fn failure(&self) -> Option<&'static str> {
        if !self.interpolates() {
            Some("interpolation")
        } else if self.locality_deviation > 1e-12 {
            Some("locality")
        } else if !self.close() {
            Some("closeness")
        } else if !self.depth_ok() {
            Some("depth identity")
        } else if !self.off_support_ok() {
            Some("off-support equality")
        } else {
            None
        }
    }
}

pub fn check_student(
    student: &ReluNet,
    teacher: &ReluNet,
    ds: &Dataset,
    plan: &DeepenPlan,
    samples: usize,
    seed: u64,
) -> Result<StudentCheck> {
    let d = ds.dim();
    let max_residual = ds
        .points()
        .par_iter()
        .zip(ds.labels())
        .map(|(x, y)| (student.eval(x) - y).abs())
        .reduce(|| 0.0, f64::max);
    let field = bump_field(ds, plan.tau)?;
    let locality_deviation = ds
        .points()
        .par_iter()
        .map(|x| field.eval(x)[1].abs())
        .reduce(|| 0.0, f64::max);
    let diff = |x: &[f64]| student.eval(x) - teacher.eval(x);
    let distance = lp_norm_mc(&diff, d, plan.p, samples, seed)?;
    let reach = 1.5 * plan.tau;
    let far: Vec<Vec<f64>> = uniform_points(d, 10_000, seed.wrapping_add(1))
        .into_iter()
        .filter(|x| {
            ds.points()
                .iter()
                .all(|c| x.iter().zip(c).any(|(a, b)| (a - b).abs() > reach))
        })
        .collect();
    let off_support_error = far
        .par_iter()
        .map(|x| diff(x).abs())
        .reduce(|| 0.0, f64::max);
    Ok(StudentCheck {
        max_residual,
        locality_deviation,
        distance,
        distance_bound: plan.closeness_constant(d) * plan.epsilon,
        depth: student.depth(),
        expected_depth: (plan.flavor == DeepenFlavor::FixedDepth)
            .then(|| plan.fixed_depth(teacher.depth())),
        params: student.param_count(),
        off_support_error,
        off_support_bound: plan.c_star * plan.nu,
        off_support_samples: far.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::random_teacher;

    fn line_data() -> Dataset {
        Dataset::new(vec![vec![-0.5], vec![0.0], vec![0.5]], vec![0.3, -1.2, 2.0]).unwrap()
    }

    #[test]
    fn plan_arithmetic() {
        let ds = line_data();
        let teacher = random_teacher(1, &[4], 1).unwrap();
        let plan = make_plan(&ds, &teacher, 0.1, 2.0, 1.0, 1, DeepenFlavor::FixedDepth).unwrap();
        assert!((plan.q - 0.25).abs() < 1e-15);
        let b1: f64 = 2.0 * 0.25 / 3.0;
        let b2 = (1.0 / 3.0f64) * 0.01;
        assert!((plan.tau - 0.9 * b1.min(b2)).abs() < 1e-15);
        assert_eq!(plan.nu, 0.1);
        assert!(plan.c_star >= 1.0);
        assert!(make_plan(&ds, &teacher, 0.0, 2.0, 1.0, 1, DeepenFlavor::FixedDepth).is_err());
        assert!(make_plan(&ds, &teacher, 0.1, 1.5, 1.0, 1, DeepenFlavor::FixedDepth).is_err());
        assert!(make_plan(&ds, &teacher, 0.1, 2.0, 0.25, 2, DeepenFlavor::FixedDepth).is_err());
    }

    #[test]
    fn student_interpolates_with_exact_depth() {
        let ds = line_data();
        for l in [1, 2, 3] {
            let teacher = random_teacher(1, &vec![5; l], 3).unwrap();
            let plan =
                make_plan(&ds, &teacher, 0.1, 2.0, 1.0, 2, DeepenFlavor::FixedDepth).unwrap();
            let student = deepen(&teacher, &ds, &plan).unwrap();
            assert_eq!(student.depth(), 4 * 2 + 16 + l.max(2));
            for (x, y) in ds.points().iter().zip(ds.labels()) {
                assert!((student.eval(x) - y).abs() <= 1e-8);
            }
            let far = [0.9];
            assert!((student.eval(&far) - teacher.eval(&far)).abs() <= plan.c_star * plan.nu);
        }
    }

    #[test]
    fn rejects_oversized_tau() {
        let ds = line_data();
        let teacher = random_teacher(1, &[4], 1).unwrap();
        let mut plan =
            make_plan(&ds, &teacher, 0.1, 2.0, 1.0, 1, DeepenFlavor::FixedDepth).unwrap();
        plan.tau = 0.2;
        assert!(deepen(&teacher, &ds, &plan).is_err());
        assert!(bad_interpolant(&ds, 0.2).is_err());
    }

    #[test]
    fn zero_teacher_zero_labels_give_zero() {
        let ds = Dataset::new(vec![vec![-0.5, 0.1], vec![0.4, 0.4]], vec![0.0, 0.0]).unwrap();
        let teacher = ReluNet::zero(2, 1).unwrap();
        let plan = make_plan(&ds, &teacher, 0.1, 2.0, 1.0, 1, DeepenFlavor::FixedDepth).unwrap();
        let student = deepen(&teacher, &ds, &plan).unwrap();
        for x in crate::analysis::tensor_grid(2, 9, -1.0, 1.0).unwrap() {
            assert_eq!(student.eval(&x), 0.0);
        }
    }

    #[test]
    fn bad_interpolant_values() {
        let ds = line_data();
        let net = bad_interpolant(&ds, 0.01).unwrap();
        assert_eq!(net.depth(), 2);
        for (x, y) in ds.points().iter().zip(ds.labels()) {
            assert!((net.eval(x) - y).abs() < 1e-12);
        }
        assert_eq!(net.eval(&[0.25]), 0.0);
        let zero = bad_interpolant(&ds.with_labels(vec![0.0; 3]).unwrap(), 0.01).unwrap();
        assert_eq!(
            zero.param_count(),
            ReluNet::zero(1, 2).unwrap().param_count()
        );
    }
}
