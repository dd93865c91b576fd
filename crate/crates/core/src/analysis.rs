//! Kelvin transform utilities and the half-strip monotonicity scan.

use crate::error::{Error, Result};
use crate::mesh::MeshedDomain;
use crate::spectral::EigenBasis;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Parameters of the fractional Kelvin transform
/// `K_s(u)(x) = |x - x₀|^{2s-N} u(x₀ + (x - x₀)/|x - x₀|²)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KelvinParams {
    pub dimension: usize,
    pub s: f64,
    /// Inversion center on the degenerate boundary.
    pub center: Vec<f64>,
}

impl KelvinParams {
    pub fn validate(&self) -> Result<()> {
        if self.center.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: self.center.len(),
            });
        }
        // The decay exponent N - 2s must be positive.
        if self.dimension as f64 <= 2.0 * self.s {
            return Err(Error::invalid_param(
                "dimension",
                format!("need N > 2s, got N = {} and s = {}", self.dimension, self.s),
            ));
        }
        Ok(())
    }
}

/// A function known at scattered sample points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledFunction {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// Pointwise Kelvin transform of sampled data: each sample point `x` maps to
/// `x₀ + (x-x₀)/|x-x₀|²` carrying the value `|x-x₀|^{2s-N} u(x)`. Applying
/// the transform twice returns the original samples (involution).
pub fn kelvin_transform(u: &SampledFunction, params: &KelvinParams) -> Result<SampledFunction> {
    params.validate()?;
    if u.points.len() != u.values.len() {
        return Err(Error::DimensionMismatch {
            expected: u.points.len(),
            got: u.values.len(),
        });
    }
    let n = params.dimension;
    let mut points = Vec::with_capacity(u.points.len());
    let mut values = Vec::with_capacity(u.points.len());
    for (x, &v) in u.points.iter().zip(u.values.iter()) {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let d: Vec<f64> = x.iter().zip(params.center.iter()).map(|(a, c)| a - c).collect();
        let r2: f64 = d.iter().map(|t| t * t).sum();
        if r2 <= 0.0 {
            return Err(Error::invalid_param(
                "points",
                "sample at the inversion center",
            ));
        }
        let mapped: Vec<f64> = d
            .iter()
            .zip(params.center.iter())
            .map(|(t, c)| c + t / r2)
            .collect();
        // v(y) = |y - x₀|^{2s-N} u(x) with |y - x₀| = 1/|x - x₀|.
        let factor = r2.sqrt().powf(n as f64 - 2.0 * params.s);
        points.push(mapped);
        values.push(factor * v);
    }
    Ok(SampledFunction { points, values })
}

/// Outcome of the directional monotonicity scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Smallest forward difference over the scanned region.
    pub min_forward_difference: f64,
    /// Location (x, y) of the minimum.
    pub min_location: [f64; 2],
    pub scanned_columns: usize,
    pub scanned_rows: usize,
    pub pass: bool,
    pub tolerance: f64,
}

/// Scans forward differences in the x₁ direction of a grid function on a
/// half-strip surrogate: a rectangle with Dirichlet on the bottom for
/// `x ≤ tau`, Neumann on the bottom beyond, and Dirichlet truncation sides.
/// The scan covers `buffer·h ≤ x₁ ≤ tau` away from the truncation walls
/// (monotonicity toward the Neumann region is only meaningful up to the
/// interface; beyond the right truncation wall forces the profile back down).
pub fn monotonicity_check(
    mesh: &MeshedDomain,
    basis: &EigenBasis,
    u: &DVector<f64>,
    tau: f64,
    buffer_cells: usize,
    tolerance: f64,
) -> Result<MonotonicityReport> {
    if mesh.spec.dim() != 2 {
        return Err(Error::InvalidDomain(
            "monotonicity scan needs a rectangle".into(),
        ));
    }
    if u.len() != basis.ndofs() {
        return Err(Error::DimensionMismatch {
            expected: basis.ndofs(),
            got: u.len(),
        });
    }
    let (nx, ny) = (mesh.spec.n[0], mesh.spec.n[1]);
    let h = mesh.spec.spacing();
    let value_at = |i: usize, j: usize| -> f64 {
        match basis.node_to_dof[mesh.node_index_2d(i, j)] {
            Some(d) => u[d],
            None => 0.0,
        }
    };
    let mut min_diff = f64::INFINITY;
    let mut min_loc = [f64::NAN, f64::NAN];
    let mut cols = 0;
    let mut rows = 0;
    let b = buffer_cells;
    for j in 1..ny.saturating_sub(b) {
        let mut any = false;
        for i in b..nx - 1 {
            let x = i as f64 * h[0];
            let x_next = (i + 1) as f64 * h[0];
            if x_next > tau {
                break;
            }
            let d = value_at(i + 1, j) - value_at(i, j);
            if d < min_diff {
                min_diff = d;
                min_loc = [x, j as f64 * h[1]];
            }
            any = true;
            cols += 1;
        }
        if any {
            rows += 1;
        }
    }
    if rows == 0 {
        return Err(Error::invalid_param(
            "tau",
            "scan region is empty; tau below the buffer",
        ));
    }
    Ok(MonotonicityReport {
        min_forward_difference: min_diff,
        min_location: min_loc,
        scanned_columns: cols,
        scanned_rows: rows,
        pass: min_diff >= -tolerance,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_half_strip_partition, build_mesh, DomainSpec};
    use crate::spectral::{assemble, eigendecompose};
    use crate::util::SplitMix64;

    fn ring_samples(rng: &mut SplitMix64, count: usize) -> Vec<Vec<f64>> {
        // |x| in [0.5, 2], avoiding the center at the origin.
        (0..count)
            .map(|_| {
                let r = rng.uniform(0.5, 2.0);
                let t = rng.uniform(0.0, std::f64::consts::TAU);
                vec![r * t.cos(), r * t.sin()]
            })
            .collect()
    }

    #[test]
    fn kelvin_involution() {
        let params = KelvinParams {
            dimension: 2,
            s: 0.75,
            center: vec![0.0, 0.0],
        };
        let mut rng = SplitMix64::new(5);
        let points = ring_samples(&mut rng, 200);
        let values: Vec<f64> = points.iter().map(|p| (p[0] + 2.0 * p[1]).sin()).collect();
        let f = SampledFunction {
            points: points.clone(),
            values: values.clone(),
        };
        let twice = kelvin_transform(&kelvin_transform(&f, &params).unwrap(), &params).unwrap();
        for k in 0..points.len() {
            for d in 0..2 {
                assert!((twice.points[k][d] - points[k][d]).abs() <= 1e-10);
            }
            assert!((twice.values[k] - values[k]).abs() <= 1e-10 * values[k].abs().max(1.0));
        }
    }

    #[test]
    fn kelvin_of_constant() {
        let params = KelvinParams {
            dimension: 2,
            s: 0.75,
            center: vec![0.0, 0.0],
        };
        let mut rng = SplitMix64::new(6);
        let points = ring_samples(&mut rng, 50);
        let f = SampledFunction {
            values: vec![1.0; points.len()],
            points,
        };
        let g = kelvin_transform(&f, &params).unwrap();
        // v(y) = |y|^{2s-N} at the mapped points y = x/|x|².
        for (y, &v) in g.points.iter().zip(g.values.iter()) {
            let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
            let expect = r.powf(2.0 * 0.75 - 2.0);
            assert!((v - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn kelvin_linear_in_u() {
        let params = KelvinParams {
            dimension: 2,
            s: 0.75,
            center: vec![0.0, 0.0],
        };
        let mut rng = SplitMix64::new(7);
        let points = ring_samples(&mut rng, 60);
        let v1: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let v2: Vec<f64> = points.iter().map(|p| p[1] * p[1]).collect();
        let both: Vec<f64> = v1.iter().zip(v2.iter()).map(|(a, b)| 2.0 * a + b).collect();
        let t1 = kelvin_transform(&SampledFunction { points: points.clone(), values: v1 }, &params).unwrap();
        let t2 = kelvin_transform(&SampledFunction { points: points.clone(), values: v2 }, &params).unwrap();
        let tb = kelvin_transform(&SampledFunction { points, values: both }, &params).unwrap();
        for k in 0..tb.values.len() {
            let lin = 2.0 * t1.values[k] + t2.values[k];
            assert!((tb.values[k] - lin).abs() <= 1e-12 * lin.abs().max(1.0));
        }
    }

    /// Bounded u: the decay `|x|^{N-2s} v(x) -> u(0)` along rays.
    #[test]
    fn kelvin_decay_along_rays() {
        let params = KelvinParams {
            dimension: 2,
            s: 0.75,
            center: vec![0.0, 0.0],
        };
        // Smooth bounded u with u(0) = 3.
        let u_fn = |x: &[f64]| 3.0 * (-(x[0] * x[0] + x[1] * x[1])).exp();
        // Sample u near 0 at points 1/R along a ray; the transform sends them
        // to radius R.
        let dir = [0.6, 0.8];
        let radii = [10.0, 100.0, 1000.0];
        let points: Vec<Vec<f64>> = radii
            .iter()
            .map(|&r| vec![dir[0] / r, dir[1] / r])
            .collect();
        let values: Vec<f64> = points.iter().map(|p| u_fn(p)).collect();
        let g = kelvin_transform(&SampledFunction { points, values }, &params).unwrap();
        let mut errs: Vec<f64> = Vec::new();
        for (y, &v) in g.points.iter().zip(g.values.iter()) {
            let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
            errs.push((r.powf(2.0 - 2.0 * 0.75) * v - 3.0).abs());
        }
        // Errors shrink as the ray goes out.
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        assert!(errs[2] < 1e-5);
    }

    #[test]
    fn center_sample_rejected() {
        let params = KelvinParams {
            dimension: 2,
            s: 0.75,
            center: vec![0.0, 0.0],
        };
        let f = SampledFunction {
            points: vec![vec![0.0, 0.0]],
            values: vec![1.0],
        };
        assert!(kelvin_transform(&f, &params).is_err());
    }

    #[test]
    fn dimension_hypothesis_enforced() {
        // N = 1 violates N > 2s for s > 1/2.
        let params = KelvinParams {
            dimension: 1,
            s: 0.75,
            center: vec![0.0],
        };
        assert!(params.validate().is_err());
    }

    #[test]
    fn monotonicity_scan_controls() {
        let mesh = build_mesh(&DomainSpec::rectangle(4.0, 1.0, 33, 9)).unwrap();
        let part = build_half_strip_partition(&mesh, 2.0).unwrap();
        let lap = assemble(&mesh, &part).unwrap();
        let basis = eigendecompose(&lap).unwrap();
        // Constant on the dofs: trivially nondecreasing... except across the
        // Dirichlet boundary; use the x-coordinate instead, which increases.
        let xs = DVector::from_fn(basis.ndofs(), |d, _| {
            mesh.coords[basis.dof_to_node[d]][0]
        });
        let rep = monotonicity_check(&mesh, &basis, &xs, 2.0, 3, 1e-8).unwrap();
        assert!(rep.pass, "x-coordinate scan failed: {rep:?}");
        // Negative control: u = -x₁ fails.
        let neg = -&xs;
        let rep = monotonicity_check(&mesh, &basis, &neg, 2.0, 3, 1e-8).unwrap();
        assert!(!rep.pass);
    }
}
