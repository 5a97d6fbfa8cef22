//! Elementary ReLU gadgets: trapezoids, localized bumps, the hat `ψ` and
//! identity chains.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::net::{AffineMap, ReluNet};

/// Trapezoid / bump parameters: plateau `[a, b]`, ramp width `tau`, input
/// dimension `dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub dim: usize,
}

impl BumpSpec {
    pub fn new(a: f64, b: f64, tau: f64, dim: usize) -> Result<Self> {
        let spec = Self { a, b, tau, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) || self.a >= self.b {
            return Err(invalid(format!(
                "need a < b, got a={} b={}",
                self.a, self.b
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(invalid(format!(
                "ramp width must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if self.dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(())
    }
}

/// The four first-layer units of `T_{τ,a,b}(x_axis − center)` and the
/// coefficients that combine them.
pub(crate) fn trapezoid_units(
    axis: usize,
    center: f64,
    spec: &BumpSpec,
) -> ([(Vec<(usize, f64)>, f64); 4], [f64; 4]) {
    let (a, b, tau) = (spec.a, spec.b, spec.tau);
    let units = [
        (vec![(axis, 1.0)], tau - a - center),
        (vec![(axis, 1.0)], -a - center),
        (vec![(axis, 1.0)], -b - center),
        (vec![(axis, 1.0)], -b - tau - center),
    ];
    let inv = 1.0 / tau;
    (units, [inv, -inv, -inv, inv])
}

/// `T_{τ,a,b}(t) = (1/τ)[σ(t−a+τ) − σ(t−a) − σ(t−b) + σ(t−b−τ)]`: one hidden
/// layer of four units.
pub fn trapezoid_net(spec: &BumpSpec) -> Result<ReluNet> {
    spec.validate()?;
    if spec.dim != 1 {
        return Err(invalid(
            "trapezoid_net is one-dimensional; use bump_net for dim > 1",
        ));
    }
    let (units, coeffs) = trapezoid_units(0, 0.0, spec);
    let (rows, bias): (Vec<_>, Vec<_>) = units.into_iter().unzip();
    let layer = AffineMap::from_rows(1, rows, bias)?;
    ReluNet::new(1, vec![layer], coeffs.to_vec())
}

/// Layer pair computing `σ(Σ_j T(x_j − c_j) − (d − 1))` for every center.
pub(crate) fn bump_layers(spec: &BumpSpec, centers: &[Vec<f64>]) -> Result<(AffineMap, AffineMap)> {
    let d = spec.dim;
    let mut rows1 = Vec::with_capacity(4 * d * centers.len());
    let mut bias1 = Vec::with_capacity(4 * d * centers.len());
    let mut rows2 = Vec::with_capacity(centers.len());
    for center in centers {
        if center.len() != d {
            return Err(invalid(format!(
                "bump center has length {}, expected {d}",
                center.len()
            )));
        }
        let mut row2 = Vec::with_capacity(4 * d);
        for (axis, &c) in center.iter().enumerate() {
            let (units, coeffs) = trapezoid_units(axis, c, spec);
            for ((row, b), w) in units.into_iter().zip(coeffs) {
                row2.push((rows1.len(), w));
                rows1.push(row);
                bias1.push(b);
            }
        }
        rows2.push(row2);
    }
    let width1 = rows1.len();
    let l1 = AffineMap::from_rows(d, rows1, bias1)?;
    let l2 = AffineMap::from_rows(width1, rows2, vec![-(d as f64 - 1.0); centers.len()])?;
    Ok((l1, l2))
}

/// Localized bump `N_{a,b,τ}(x) = σ(Σ_j T_{τ,a,b}(x_j) − (d−1))`.
///
/// Hidden layer 1 holds the `4d` trapezoid units, hidden layer 2 the single
/// output unit. The value is 1 on `[a,b]^d`, 0 outside `[a−τ,b+τ]^d` and in
/// `[0,1]` everywhere.
pub fn bump_net(spec: &BumpSpec) -> Result<ReluNet> {
    bump_net_at(spec, &vec![0.0; spec.dim])
}

/// `x ↦ N_{a,b,τ}(x − center)`.
pub fn bump_net_at(spec: &BumpSpec, center: &[f64]) -> Result<ReluNet> {
    spec.validate()?;
    let (l1, l2) = bump_layers(spec, &[center.to_vec()])?;
    ReluNet::new(spec.dim, vec![l1, l2], vec![1.0])
}

/// `ψ(t) = σ(t+2) − σ(t+1) − σ(t−1) + σ(t−2)`.
pub fn psi_net() -> ReluNet {
    psi_affine_net(0, 1.0, 0.0, 1).expect("ψ layout is valid")
}

/// `x ↦ ψ(scale · x_axis + shift)` on `dim` inputs.
pub(crate) fn psi_affine_net(axis: usize, scale: f64, shift: f64, dim: usize) -> Result<ReluNet> {
    if axis >= dim {
        return Err(invalid(format!(
            "axis {axis} out of range for dimension {dim}"
        )));
    }
    let rows = vec![vec![(axis, scale)]; 4];
    let bias = vec![shift + 2.0, shift + 1.0, shift - 1.0, shift - 2.0];
    let layer = AffineMap::from_rows(dim, rows, bias)?;
    ReluNet::new(dim, vec![layer], vec![1.0, -1.0, -1.0, 1.0])
}

/// `x ↦ ψ(3N(x_axis − j/N))` on `dim` inputs. `axis` is zero-based.
pub fn psi_kj_net(axis: usize, j: usize, n: usize, dim: usize) -> Result<ReluNet> {
    if n == 0 {
        return Err(invalid("partition count N must be at least 1"));
    }
    if j > n {
        return Err(invalid(format!("grid index {j} exceeds N = {n}")));
    }
    let scale = 3.0 * n as f64;
    psi_affine_net(axis, scale, -3.0 * j as f64, dim)
}

/// Scalar identity `t ↦ σ(t) − σ(−t)` repeated over `depth` layers of two
/// units. Parameter count is `6 · depth`.
pub fn identity_net(depth: usize) -> Result<ReluNet> {
    if depth == 0 {
        return Err(invalid("identity depth must be at least 1"));
    }
    let mut layers = vec![AffineMap::from_dense(2, 1, &[1.0, -1.0], vec![0.0; 2])?];
    for _ in 1..depth {
        layers.push(AffineMap::from_dense(
            2,
            2,
            &[1.0, -1.0, -1.0, 1.0],
            vec![0.0; 2],
        )?);
    }
    ReluNet::new(1, layers, vec![1.0, -1.0])
}

/// Identity on coordinate `axis` of a `dim`-input vector, one layer.
pub(crate) fn coordinate_net(axis: usize, dim: usize) -> Result<ReluNet> {
    let layer = AffineMap::from_rows(
        dim,
        vec![vec![(axis, 1.0)], vec![(axis, -1.0)]],
        vec![0.0; 2],
    )?;
    ReluNet::new(dim, vec![layer], vec![1.0, -1.0])
}

/// The constant 1 as a one-layer net: a single unit with bias 1.
pub(crate) fn constant_net(value: f64, dim: usize) -> Result<ReluNet> {
    let layer = AffineMap::from_rows(dim, vec![vec![]], vec![1.0])?;
    ReluNet::new(dim, vec![layer], vec![value])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap_oracle(t: f64, a: f64, b: f64, tau: f64) -> f64 {
        if t <= a - tau || t >= b + tau {
            0.0
        } else if t < a {
            (t - a + tau) / tau
        } else if t <= b {
            1.0
        } else {
            (b + tau - t) / tau
        }
    }

    #[test]
    fn trapezoid_values() {
        let net = trapezoid_net(&BumpSpec::new(0.0, 1.0, 0.5, 1).unwrap()).unwrap();
        assert_eq!(net.depth(), 1);
        assert_eq!(net.layers()[0].rows(), 4);
        assert_eq!(net.eval(&[0.5]), 1.0);
        assert_eq!(net.eval(&[-0.5]), 0.0);
        assert!((net.eval(&[-0.25]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs() {
        assert!(BumpSpec::new(1.0, 1.0, 0.5, 1).is_err());
        assert!(BumpSpec::new(0.0, 1.0, 0.0, 1).is_err());
        assert!(BumpSpec::new(0.0, 1.0, 1.5, 1).is_err());
        let spec = BumpSpec {
            a: 2.0,
            b: 1.0,
            tau: 0.5,
            dim: 1,
        };
        assert!(trapezoid_net(&spec).is_err());
        assert!(bump_net(&spec).is_err());
    }

    #[test]
    fn bump_values() {
        let spec = BumpSpec::new(-0.2, 0.2, 0.1, 2).unwrap();
        let net = bump_net(&spec).unwrap();
        assert_eq!(net.depth(), 2);
        assert!((net.eval(&[0.0, 0.0]) - 1.0).abs() <= 1e-12);
        assert_eq!(net.eval(&[0.5, 0.0]), 0.0);
        let v = net.eval(&[0.25, 0.0]);
        let oracle =
            (trap_oracle(0.25, -0.2, 0.2, 0.1) + trap_oracle(0.0, -0.2, 0.2, 0.1) - 1.0).max(0.0);
        assert!(v > 0.0 && v < 1.0);
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn bump_param_count_matches_hand_count() {
        // layer 1: 4d weights + 4d biases; layer 2: 4d weights + 1 bias; readout 1
        for d in 1..5 {
            let net = bump_net(&BumpSpec::new(-0.2, 0.2, 0.1, d).unwrap()).unwrap();
            assert_eq!(net.param_count(), 12 * d + 2);
        }
    }

    #[test]
    fn psi_values() {
        let psi = psi_net();
        assert_eq!(psi.eval(&[0.0]), 1.0);
        assert_eq!(psi.eval(&[3.0]), 0.0);
        assert_eq!(psi.eval(&[1.5]), 0.5);
        assert_eq!(psi.eval(&[-1.5]), 0.5);
    }

    #[test]
    fn psi_kj_errors_and_values() {
        assert!(psi_kj_net(2, 0, 4, 2).is_err());
        assert!(psi_kj_net(0, 5, 4, 2).is_err());
        assert!(psi_kj_net(0, 0, 0, 2).is_err());
        let net = psi_kj_net(1, 2, 4, 2).unwrap();
        assert_eq!(net.eval(&[0.9, 0.5]), 1.0);
        assert_eq!(net.eval(&[0.9, 0.0]), 0.0);
    }

    #[test]
    fn identity_chain() {
        assert!(identity_net(0).is_err());
        assert_eq!(identity_net(1).unwrap().eval(&[-3.0]), -3.0);
        let deep = identity_net(17).unwrap();
        assert!((deep.eval(&[0.123]) - 0.123).abs() < 1e-12);
        for k in 1..10 {
            assert_eq!(identity_net(k).unwrap().param_count(), 6 * k);
        }
    }
}
