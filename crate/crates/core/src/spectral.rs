//! Mixed-boundary Laplacian assembly, dense eigendecomposition, and the
//! spectral fractional operator built from it.
//!
//! The discrete Laplacian is assembled in stiffness/mass form: a symmetric
//! stiffness matrix `A` over the degrees of freedom (all nodes except
//! Dirichlet boundary nodes) and a diagonal mass vector `m` of cell measures.
//! Dirichlet rows are eliminated; Neumann nodes get half-cell masses, which
//! reproduces the second-order ghost-point reflection in the operator
//! `L = M⁻¹A`. Everything fractional happens in the eigenbasis of the
//! generalized problem `A φ = λ M φ`: `(-Δ)^s u = Σ λ_j^s ⟨u, φ_j⟩ φ_j`.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryPartition, DomainKind, MeshedDomain};
use nalgebra::{DMatrix, DVector};
use std::cell::OnceCell;
use std::sync::Arc;

/// Discrete mixed Dirichlet-Neumann Laplacian in stiffness/mass form.
#[derive(Debug, Clone)]
pub struct MixedLaplacian {
    /// Symmetric stiffness matrix over dofs.
    pub stiffness: DMatrix<f64>,
    /// Diagonal mass (cell measure per dof).
    pub mass: DVector<f64>,
    /// dof index -> mesh node id.
    pub dof_to_node: Vec<usize>,
    /// mesh node id -> dof index (None on Dirichlet nodes).
    pub node_to_dof: Vec<Option<usize>>,
    pub dim: usize,
    /// Dirichlet measure of the partition this was assembled with.
    pub alpha: f64,
}

impl MixedLaplacian {
    pub fn ndofs(&self) -> usize {
        self.dof_to_node.len()
    }

    /// Action of `L = M⁻¹ A` on a dof vector.
    pub fn apply(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.stiffness * u;
        for i in 0..out.len() {
            out[i] /= self.mass[i];
        }
        out
    }
}

/// Second-order finite-difference assembly (3-point stencil in 1D, 5-point
/// in 2D). Requires a nonempty Dirichlet set so the operator is positive
/// definite.
pub fn assemble(mesh: &MeshedDomain, partition: &BoundaryPartition) -> Result<MixedLaplacian> {
    if partition.dirichlet_nodes.is_empty() {
        return Err(Error::InvalidPartition(
            "empty Dirichlet set: the mixed Laplacian needs |Σ_D| > 0".into(),
        ));
    }
    let nnodes = mesh.node_count();
    let mut node_to_dof = vec![None; nnodes];
    let mut dof_to_node = Vec::new();
    for node in 0..nnodes {
        if !partition.is_dirichlet(node) {
            node_to_dof[node] = Some(dof_to_node.len());
            dof_to_node.push(node);
        }
    }
    let ndof = dof_to_node.len();
    if ndof == 0 {
        return Err(Error::InvalidPartition("no degrees of freedom".into()));
    }
    let h = mesh.spec.spacing();
    let mut a = DMatrix::<f64>::zeros(ndof, ndof);
    let mut m = DVector::<f64>::zeros(ndof);

    // Half-cell measure at axis endpoints, full cell inside.
    let axis_weight = |idx: usize, n: usize, h: f64| -> f64 {
        if idx == 0 || idx == n - 1 {
            h / 2.0
        } else {
            h
        }
    };

    let mut add_edge = |na: usize, nb: usize, coeff: f64| {
        match (node_to_dof[na], node_to_dof[nb]) {
            (Some(i), Some(j)) => {
                a[(i, i)] += coeff;
                a[(j, j)] += coeff;
                a[(i, j)] -= coeff;
                a[(j, i)] -= coeff;
            }
            (Some(i), None) => a[(i, i)] += coeff,
            (None, Some(j)) => a[(j, j)] += coeff,
            (None, None) => {}
        }
    };

    match mesh.spec.kind {
        DomainKind::Interval => {
            let n = mesh.spec.n[0];
            let hx = h[0];
            for i in 0..n - 1 {
                add_edge(i, i + 1, 1.0 / hx);
            }
            for (dof, &node) in dof_to_node.iter().enumerate() {
                m[dof] = axis_weight(node, n, hx);
            }
        }
        DomainKind::Rectangle => {
            let (nx, ny) = (mesh.spec.n[0], mesh.spec.n[1]);
            let (hx, hy) = (h[0], h[1]);
            for j in 0..ny {
                let wy = axis_weight(j, ny, hy);
                for i in 0..nx - 1 {
                    add_edge(mesh.node_index_2d(i, j), mesh.node_index_2d(i + 1, j), wy / hx);
                }
            }
            for i in 0..nx {
                let wx = axis_weight(i, nx, hx);
                for j in 0..ny - 1 {
                    add_edge(mesh.node_index_2d(i, j), mesh.node_index_2d(i, j + 1), wx / hy);
                }
            }
            for (dof, &node) in dof_to_node.iter().enumerate() {
                let i = node % nx;
                let j = node / nx;
                m[dof] = axis_weight(i, nx, hx) * axis_weight(j, ny, hy);
            }
        }
    }

    Ok(MixedLaplacian {
        stiffness: a,
        mass: m,
        dof_to_node,
        node_to_dof,
        dim: mesh.spec.dim(),
        alpha: partition.dirichlet_measure,
    })
}

/// Full ascending eigendecomposition of the mixed Laplacian, mass-orthonormal.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    /// Ascending eigenvalues, all positive.
    pub lambdas: DVector<f64>,
    /// Eigenvectors as columns, `⟨φ_i, φ_j⟩_mass = δ_ij`.
    pub phis: DMatrix<f64>,
    pub mass: DVector<f64>,
    pub dof_to_node: Vec<usize>,
    pub node_to_dof: Vec<Option<usize>>,
    pub dim: usize,
    pub alpha: f64,
}

impl EigenBasis {
    pub fn count(&self) -> usize {
        self.lambdas.len()
    }

    pub fn ndofs(&self) -> usize {
        self.dof_to_node.len()
    }

    /// Mass-weighted inner product, the discrete `L²(Ω)` pairing.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        u.iter()
            .zip(v.iter())
            .zip(self.mass.iter())
            .map(|((&a, &b), &w)| a * b * w)
            .sum()
    }

    pub fn l2_norm(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Discrete integral of a grid function.
    pub fn integral(&self, u: &DVector<f64>) -> f64 {
        u.iter().zip(self.mass.iter()).map(|(&a, &w)| a * w).sum()
    }

    /// Spectral coefficients `a_j = ⟨u, φ_j⟩_mass`.
    pub fn coefficients(&self, u: &DVector<f64>) -> DVector<f64> {
        let mu = DVector::from_fn(u.len(), |i, _| u[i] * self.mass[i]);
        self.phis.transpose() * mu
    }

    /// Synthesis `u = Σ a_j φ_j`.
    pub fn from_coefficients(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.phis * a
    }

    /// First eigenfunction (positive, `L²`-normalized).
    pub fn phi1(&self) -> DVector<f64> {
        self.phis.column(0).into_owned()
    }
}

/// Dense eigendecomposition through the symmetrized matrix
/// `B = M^{-1/2} A M^{-1/2}`; eigenvectors are scaled back so they are
/// orthonormal in the mass inner product.
pub fn eigendecompose(lap: &MixedLaplacian) -> Result<EigenBasis> {
    let n = lap.ndofs();
    let inv_sqrt_m: Vec<f64> = lap.mass.iter().map(|&w| 1.0 / w.sqrt()).collect();
    let mut b = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = lap.stiffness[(i, j)] * inv_sqrt_m[i] * inv_sqrt_m[j];
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let eig = b
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenFailure("symmetric QL iteration did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let mut lambdas = DVector::<f64>::zeros(n);
    let mut phis = DMatrix::<f64>::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        lambdas[k] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        // Deterministic sign: the largest-magnitude entry is positive.
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            phis[(i, k)] = sign * col[i] * inv_sqrt_m[i];
        }
    }

    if lambdas[0] <= 0.0 {
        return Err(Error::EigenFailure(format!(
            "first eigenvalue {} is not positive although |Σ_D| > 0",
            lambdas[0]
        )));
    }

    let basis = EigenBasis {
        lambdas,
        phis,
        mass: lap.mass.clone(),
        dof_to_node: lap.dof_to_node.clone(),
        node_to_dof: lap.node_to_dof.clone(),
        dim: lap.dim,
        alpha: lap.alpha,
    };

    // Decomposition contract: residual and orthonormality.
    for j in 0..n {
        let phi = basis.phis.column(j).into_owned();
        let mut res = &lap.stiffness * &phi;
        for i in 0..n {
            res[i] -= basis.lambdas[j] * lap.mass[i] * phi[i];
        }
        let rnorm = res.norm();
        if rnorm > 1e-9 * basis.lambdas[j].max(1e-300) * phi.norm().max(1.0) {
            return Err(Error::EigenFailure(format!(
                "eigenpair {j} residual {rnorm:.3e} exceeds 1e-9 * lambda"
            )));
        }
    }
    let defect = orthonormality_defect(&basis);
    if defect > 1e-10 {
        return Err(Error::EigenFailure(format!(
            "orthonormality defect {defect:.3e} exceeds 1e-10"
        )));
    }
    Ok(basis)
}

/// `max |⟨φ_i, φ_j⟩_mass - δ_ij|` over all pairs.
pub fn orthonormality_defect(basis: &EigenBasis) -> f64 {
    let n = basis.count();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let pi = basis.phis.column(i).into_owned();
        for j in i..n {
            let pj = basis.phis.column(j).into_owned();
            let g = basis.inner(&pi, &pj);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// Spectral fractional Laplacian `(-Δ)^s` realized on an eigenbasis.
pub struct FractionalOperator {
    pub basis: Arc<EigenBasis>,
    pub s: f64,
    sym_matrix: OnceCell<DMatrix<f64>>,
}

impl std::fmt::Debug for FractionalOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FractionalOperator")
            .field("s", &self.s)
            .field("ndofs", &self.basis.ndofs())
            .finish()
    }
}

impl FractionalOperator {
    /// Standard construction, `s ∈ (1/2, 1)`.
    pub fn new(basis: Arc<EigenBasis>, s: f64) -> Result<Self> {
        if !(s > 0.5 && s < 1.0) {
            return Err(Error::invalid_param(
                "s",
                format!("fractional order must lie in (1/2, 1), got {s}"),
            ));
        }
        Ok(Self::with_relaxed_order(basis, s).unwrap())
    }

    /// Diagnostic construction allowing any `s ∈ (0, 1]` (used by the s=1
    /// reduction and semigroup identities; carries no continuum meaning
    /// outside (1/2, 1)).
    pub fn with_relaxed_order(basis: Arc<EigenBasis>, s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::invalid_param(
                "s",
                format!("fractional order must lie in (0, 1], got {s}"),
            ));
        }
        Ok(FractionalOperator {
            basis,
            s,
            sym_matrix: OnceCell::new(),
        })
    }

    pub fn ndofs(&self) -> usize {
        self.basis.ndofs()
    }

    /// `(-Δ)^s u = Σ λ_j^s ⟨u, φ_j⟩ φ_j`.
    pub fn apply(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.scaled_synthesis(u, self.s)
    }

    /// `((-Δ)^s)⁻¹ u`, the exact diagonal inversion in the eigenbasis.
    pub fn apply_inverse(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.scaled_synthesis(u, -self.s)
    }

    fn scaled_synthesis(&self, u: &DVector<f64>, power: f64) -> Result<DVector<f64>> {
        if u.len() != self.ndofs() {
            return Err(Error::DimensionMismatch {
                expected: self.ndofs(),
                got: u.len(),
            });
        }
        let mut a = self.basis.coefficients(u);
        for j in 0..a.len() {
            a[j] *= self.basis.lambdas[j].powf(power);
        }
        Ok(self.basis.from_coefficients(&a))
    }

    /// `‖u‖_{H^s}² = Σ a_j² λ_j^s`, the square of `‖(-Δ)^{s/2} u‖_{L²}`.
    pub fn hs_norm_sq(&self, u: &DVector<f64>) -> Result<f64> {
        if u.len() != self.ndofs() {
            return Err(Error::DimensionMismatch {
                expected: self.ndofs(),
                got: u.len(),
            });
        }
        let a = self.basis.coefficients(u);
        Ok(a
            .iter()
            .zip(self.basis.lambdas.iter())
            .map(|(&c, &l)| c * c * l.powf(self.s))
            .sum())
    }

    pub fn hs_norm(&self, u: &DVector<f64>) -> Result<f64> {
        Ok(self.hs_norm_sq(u)?.sqrt())
    }

    /// `λ₁^s`, the first eigenvalue of the fractional operator.
    pub fn first_eigenvalue_s(&self) -> f64 {
        self.basis.lambdas[0].powf(self.s)
    }

    /// Dense symmetric representation `B^s = Ψ diag(λ^s) Ψᵀ` with
    /// `Ψ = M^{1/2} Φ`. Shared by Newton solvers and linearized eigenvalue
    /// queries; built once per operator.
    pub fn sym_matrix(&self) -> &DMatrix<f64> {
        self.sym_matrix.get_or_init(|| {
            let n = self.ndofs();
            let mut scaled = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                let f = self.basis.lambdas[j].powf(self.s / 2.0);
                for i in 0..n {
                    scaled[(i, j)] = self.basis.mass[i].sqrt() * self.basis.phis[(i, j)] * f;
                }
            }
            &scaled * scaled.transpose()
        })
    }

    /// Smallest eigenvalue (and eigenfunction) of the linearized pencil
    /// `(-Δ)^s - diag(a)` in the mass inner product.
    pub fn linearized_first_eigenvalue(&self, a: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let n = self.ndofs();
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.len(),
            });
        }
        let mut hm = self.sym_matrix().clone();
        for i in 0..n {
            hm[(i, i)] -= a[i];
        }
        let eig = hm
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or_else(|| Error::EigenFailure("linearized eigensolve did not converge".into()))?;
        let mut kmin = 0;
        for k in 1..n {
            if eig.eigenvalues[k] < eig.eigenvalues[kmin] {
                kmin = k;
            }
        }
        let nu1 = eig.eigenvalues[kmin];
        let mut v = eig.eigenvectors.column(kmin).into_owned();
        for i in 0..n {
            v[i] /= self.basis.mass[i].sqrt();
        }
        // Sign: make the mass-weighted mean nonnegative.
        if self.basis.integral(&v) < 0.0 {
            v = -v;
        }
        let norm = self.basis.l2_norm(&v);
        Ok((nu1, v / norm))
    }
}

/// Result of a Rayleigh-quotient minimization `min ‖u‖²_E / ‖u‖²_{L^p}`.
#[derive(Debug, Clone)]
pub struct QuotientResult {
    pub value: f64,
    pub minimizer: DVector<f64>,
    pub iterations: usize,
    /// Quotient value per iteration.
    pub trace: Vec<f64>,
}

/// Minimizes `(Σ c_j a_j²) / ‖u‖_{L^p}²` over the discrete space, where the
/// energy is diagonal in the eigenbasis with positive weights `c_j`. Inverse
/// iteration: solve the diagonal energy against the `L^p` subgradient and
/// renormalize; the quotient is monotonically nonincreasing along iterates.
pub fn minimize_diagonal_quotient(
    basis: &EigenBasis,
    mode_weights: &DVector<f64>,
    p: f64,
    tol: f64,
    max_iters: usize,
) -> Result<QuotientResult> {
    if p < 1.0 {
        return Err(Error::invalid_param("p", "exponent must be >= 1"));
    }
    let lp_norm = |u: &DVector<f64>| -> f64 {
        basis
            .mass
            .iter()
            .zip(u.iter())
            .map(|(&w, &x)| w * x.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    };
    let energy = |u: &DVector<f64>| -> f64 {
        let a = basis.coefficients(u);
        a.iter()
            .zip(mode_weights.iter())
            .map(|(&c, &w)| c * c * w)
            .sum()
    };
    let mut u = basis.phi1();
    let nu = lp_norm(&u);
    u /= nu;
    let mut value = energy(&u);
    let mut trace = vec![value];
    for iter in 0..max_iters {
        // L^p subgradient at u, then invert the diagonal energy.
        let grad = DVector::from_fn(u.len(), |i, _| {
            let x: f64 = u[i];
            x.signum() * x.abs().powf(p - 1.0)
        });
        let mut a = basis.coefficients(&grad);
        for j in 0..a.len() {
            a[j] /= mode_weights[j];
        }
        let mut next = basis.from_coefficients(&a);
        let nn = lp_norm(&next);
        if !(nn > 0.0) || !nn.is_finite() {
            return Err(Error::MinimizerFailure(format!(
                "degenerate iterate at step {iter}, trace {trace:?}"
            )));
        }
        next /= nn;
        let next_value = energy(&next);
        trace.push(next_value);
        let rel = (value - next_value).abs() / value.abs().max(1e-300);
        u = next;
        value = next_value;
        if rel <= tol {
            return Ok(QuotientResult {
                value,
                minimizer: u,
                iterations: iter + 1,
                trace,
            });
        }
    }
    Err(Error::MinimizerFailure(format!(
        "no convergence after {max_iters} iterations, last values {:?}",
        &trace[trace.len().saturating_sub(5)..]
    )))
}

impl FractionalOperator {
    /// Best constant of `‖u‖²_{H^s} ≥ S ‖u‖²_{L^p}` on the discrete space.
    /// For `p = 2` this is `λ₁^s` exactly. The 2D critical exponent
    /// `2N/(N-2s)` caps `p`; in 1D (where `N < 2s`) any `p ≥ 1` is accepted.
    pub fn sobolev_quotient(&self, p: f64) -> Result<QuotientResult> {
        if self.basis.dim == 2 {
            let crit = 4.0 / (2.0 - 2.0 * self.s);
            if p > crit + 1e-12 {
                return Err(Error::invalid_param(
                    "p",
                    format!("exponent {p} exceeds the critical 2N/(N-2s) = {crit}"),
                ));
            }
        }
        let weights = DVector::from_fn(self.basis.count(), |j, _| {
            self.basis.lambdas[j].powf(self.s)
        });
        minimize_diagonal_quotient(&self.basis, &weights, p, 1e-12, 500)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, build_partition, DomainSpec, PartitionRule};
    use crate::util::SplitMix64;

    fn interval_basis(n: usize, alpha: f64) -> EigenBasis {
        let mesh = build_mesh(&DomainSpec::interval(1.0, n)).unwrap();
        let part = build_partition(&mesh, alpha, PartitionRule::GrowFromLeft).unwrap();
        let lap = assemble(&mesh, &part).unwrap();
        eigendecompose(&lap).unwrap()
    }

    #[test]
    fn full_dirichlet_spectrum_matches_sturm_liouville() {
        // Closed form of the discrete interior-node Laplacian:
        // λ_j = (4/h²) sin²(jπh/2) -> (jπ)² as h -> 0.
        let n = 101;
        let h = 1.0 / (n - 1) as f64;
        let basis = interval_basis(n, 2.0);
        for j in 1..=3 {
            let exact = (4.0 / (h * h)) * ((j as f64) * std::f64::consts::PI * h / 2.0).sin().powi(2);
            let got = basis.lambdas[j - 1];
            assert!(
                (got - exact).abs() <= 1e-9 * exact,
                "mode {j}: {got} vs discrete closed form {exact}"
            );
        }
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((basis.lambdas[0] - pi2).abs() <= 10.0 * h * h);
    }

    #[test]
    fn mixed_spectrum_matches_closed_form() {
        // Dirichlet at 0, Neumann at 1: discrete eigenvalues are exactly
        // (4/h²) sin²((j-1/2)πh/2) with eigenvectors sin((j-1/2)πx).
        let n = 101;
        let h = 1.0 / (n - 1) as f64;
        let basis = interval_basis(n, 1.0);
        for j in 1..=4 {
            let k = (j as f64 - 0.5) * std::f64::consts::PI;
            let exact = (4.0 / (h * h)) * (k * h / 2.0).sin().powi(2);
            let got = basis.lambdas[j - 1];
            assert!(
                (got - exact).abs() <= 1e-9 * exact,
                "mode {j}: {got} vs {exact}"
            );
        }
        // Continuum limit (π/2)² within 1e-3 relative at this resolution.
        let cont = (std::f64::consts::PI / 2.0).powi(2);
        assert!((basis.lambdas[0] - cont).abs() <= 1e-3 * cont);
    }

    /// Brute-force oracle: eigenvalues of the non-symmetrized `M⁻¹A` computed
    /// by the general (unsymmetric) eigensolver must agree with the
    /// mass-symmetrized route.
    #[test]
    fn mixed_spectrum_cross_checked_against_dense_unsymmetric_solve() {
        let mesh = build_mesh(&DomainSpec::interval(1.0, 21)).unwrap();
        let part = build_partition(&mesh, 1.0, PartitionRule::GrowFromLeft).unwrap();
        let lap = assemble(&mesh, &part).unwrap();
        let basis = eigendecompose(&lap).unwrap();
        let n = lap.ndofs();
        let mut l = lap.stiffness.clone();
        for i in 0..n {
            for j in 0..n {
                l[(i, j)] /= lap.mass[i];
            }
        }
        let mut ev: Vec<f64> = l.complex_eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for j in 0..n {
            assert!(
                (ev[j] - basis.lambdas[j]).abs() <= 1e-8 * basis.lambdas[j].max(1.0),
                "mode {j}: {} vs {}",
                ev[j],
                basis.lambdas[j]
            );
        }
    }

    #[test]
    fn unit_square_interior_stencil_and_eigenvalue() {
        // Full Dirichlet on the unit square with a 2x2 interior grid: the
        // matrix is the standard 4-point-diagonal stencil and the hand
        // eigendecomposition gives λ₁ = 2/h² (eigenvector (1,1,1,1)).
        let mesh = build_mesh(&DomainSpec::rectangle(1.0, 1.0, 4, 4)).unwrap();
        let part = build_partition(&mesh, 4.0, PartitionRule::GrowFromCorner).unwrap();
        let lap = assemble(&mesh, &part).unwrap();
        assert_eq!(lap.ndofs(), 4);
        let h = 1.0 / 3.0;
        for i in 0..4 {
            assert!((lap.stiffness[(i, i)] / lap.mass[i] - 4.0 / (h * h)).abs() < 1e-12);
        }
        let basis = eigendecompose(&lap).unwrap();
        assert!((basis.lambdas[0] - 2.0 / (h * h)).abs() < 1e-10);
        assert!((basis.lambdas[3] - 6.0 / (h * h)).abs() < 1e-10);
    }

    #[test]
    fn corner_mixed_square_hand_eigenvalue() {
        // Unit square, Dirichlet on the bottom row and left column, Neumann
        // elsewhere, one cell of dofs per axis (n = 3). The problem separates
        // into two 1D mixed problems with eigenvalues (2 ± √2)/h², so
        // λ₁ = (2 - √2)·2/h² by hand eigendecomposition of the 4x4 matrix.
        let mesh = build_mesh(&DomainSpec::rectangle(1.0, 1.0, 3, 3)).unwrap();
        let nx = 3;
        let mut dirichlet: Vec<usize> = Vec::new();
        for i in 0..nx {
            dirichlet.push(i); // bottom row
        }
        for j in 1..3 {
            dirichlet.push(j * nx); // left column
        }
        dirichlet.sort_unstable();
        let neumann: Vec<usize> = mesh
            .boundary_order
            .iter()
            .cloned()
            .filter(|n| dirichlet.binary_search(n).is_err())
            .collect();
        let mut neumann = neumann;
        neumann.sort_unstable();
        let part = crate::mesh::BoundaryPartition {
            alpha: 2.0,
            dirichlet_nodes: dirichlet,
            neumann_nodes: neumann,
            layout: "hand-built".into(),
            dirichlet_measure: 2.0,
            snapped: false,
        };
        let lap = assemble(&mesh, &part).unwrap();
        assert_eq!(lap.ndofs(), 4);
        let basis = eigendecompose(&lap).unwrap();
        let h = 0.5;
        let expect = (2.0 - 2.0_f64.sqrt()) * 2.0 / (h * h);
        assert!(
            (basis.lambdas[0] - expect).abs() < 1e-10,
            "{} vs {}",
            basis.lambdas[0],
            expect
        );
    }

    #[test]
    fn diagonal_matrix_eigendecomposition() {
        let lap = MixedLaplacian {
            stiffness: DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0])),
            mass: DVector::from_vec(vec![1.0, 1.0, 1.0]),
            dof_to_node: vec![0, 1, 2],
            node_to_dof: vec![Some(0), Some(1), Some(2)],
            dim: 1,
            alpha: 1.0,
        };
        let basis = eigendecompose(&lap).unwrap();
        assert_eq!(basis.lambdas.as_slice(), &[1.0, 2.0, 3.0]);
        for j in 0..3 {
            let col = basis.phis.column(j);
            let nonzero: Vec<usize> = (0..3).filter(|&i| col[i].abs() > 1e-12).collect();
            assert_eq!(nonzero.len(), 1);
        }
    }

    #[test]
    fn orthonormality_within_contract() {
        let basis = interval_basis(41, 1.0);
        assert!(orthonormality_defect(&basis) <= 1e-10);
    }

    #[test]
    fn empty_dirichlet_rejected() {
        let mesh = build_mesh(&DomainSpec::interval(1.0, 5)).unwrap();
        let mut part = build_partition(&mesh, 1.0, PartitionRule::GrowFromLeft).unwrap();
        part.neumann_nodes = [part.dirichlet_nodes.clone(), part.neumann_nodes.clone()].concat();
        part.neumann_nodes.sort_unstable();
        part.dirichlet_nodes.clear();
        assert!(assemble(&mesh, &part).is_err());
    }

    #[test]
    fn apply_eigenfunction_scaling() {
        let basis = Arc::new(interval_basis(41, 1.0));
        let fop = FractionalOperator::new(basis.clone(), 0.75).unwrap();
        let phi1 = basis.phi1();
        let out = fop.apply(&phi1).unwrap();
        let expect = basis.lambdas[0].powf(0.75);
        for i in 0..phi1.len() {
            assert!((out[i] - expect * phi1[i]).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn apply_s1_matches_matrix_action() {
        let mesh = build_mesh(&DomainSpec::interval(1.0, 41)).unwrap();
        let part = build_partition(&mesh, 1.0, PartitionRule::GrowFromLeft).unwrap();
        let lap = assemble(&mesh, &part).unwrap();
        let basis = Arc::new(eigendecompose(&lap).unwrap());
        let fop = FractionalOperator::with_relaxed_order(basis.clone(), 1.0).unwrap();
        let mut rng = SplitMix64::new(3);
        let u = rng.vector(lap.ndofs(), -1.0, 1.0);
        let spectral = fop.apply(&u).unwrap();
        let direct = lap.apply(&u);
        let scale = direct.norm();
        assert!((&spectral - &direct).norm() <= 1e-10 * scale);
    }

    #[test]
    fn apply_linearity_on_modes() {
        let basis = Arc::new(interval_basis(41, 1.0));
        let fop = FractionalOperator::new(basis.clone(), 0.8).unwrap();
        let u = basis.phis.column(0).into_owned() + 2.0 * basis.phis.column(2).into_owned();
        let out = fop.apply(&u).unwrap();
        let expect = basis.lambdas[0].powf(0.8) * basis.phis.column(0).into_owned()
            + 2.0 * basis.lambdas[2].powf(0.8) * basis.phis.column(2).into_owned();
        assert!((&out - &expect).norm() <= 1e-11 * expect.norm());
    }

    #[test]
    fn hs_norm_identities() {
        let basis = Arc::new(interval_basis(41, 1.0));
        let fop = FractionalOperator::new(basis.clone(), 0.75).unwrap();
        let phi1 = basis.phi1();
        let n1 = fop.hs_norm(&phi1).unwrap();
        assert!((n1 - basis.lambdas[0].powf(0.75).sqrt()).abs() <= 1e-12 * n1);
        let zero = DVector::zeros(basis.ndofs());
        assert_eq!(fop.hs_norm(&zero).unwrap(), 0.0);
        // Half-power identity against apply.
        let mut rng = SplitMix64::new(11);
        let u = rng.vector(basis.ndofs(), -1.0, 1.0);
        let lhs = fop.hs_norm_sq(&u).unwrap();
        let rhs = basis.inner(&fop.apply(&u).unwrap(), &u);
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs());
    }

    #[test]
    fn semigroup_composition() {
        let basis = Arc::new(interval_basis(31, 1.0));
        let f3 = FractionalOperator::with_relaxed_order(basis.clone(), 0.3).unwrap();
        let f4 = FractionalOperator::with_relaxed_order(basis.clone(), 0.4).unwrap();
        let f7 = FractionalOperator::with_relaxed_order(basis.clone(), 0.7).unwrap();
        let mut rng = SplitMix64::new(5);
        let u = rng.vector(basis.ndofs(), -1.0, 1.0);
        let comp = f4.apply(&f3.apply(&u).unwrap()).unwrap();
        let direct = f7.apply(&u).unwrap();
        assert!((&comp - &direct).norm() <= 1e-10 * direct.norm());
    }

    #[test]
    fn first_eigenvalue_s_closed_form() {
        let basis = Arc::new(interval_basis(101, 1.0));
        let fop = FractionalOperator::new(basis, 0.75).unwrap();
        let cont = (std::f64::consts::PI / 2.0).powi(2).powf(0.75);
        let got = fop.first_eigenvalue_s();
        assert!((got - cont).abs() <= 1e-3 * cont, "{got} vs {cont}");
        assert!((got - 1.9687).abs() < 2e-3);
    }

    #[test]
    fn s_range_enforced() {
        let basis = Arc::new(interval_basis(11, 1.0));
        assert!(FractionalOperator::new(basis.clone(), 0.5).is_err());
        assert!(FractionalOperator::new(basis.clone(), 1.0).is_err());
        assert!(FractionalOperator::with_relaxed_order(basis.clone(), 1.0).is_ok());
        assert!(FractionalOperator::with_relaxed_order(basis, 1.1).is_err());
    }

    #[test]
    fn self_adjoint_and_poincare() {
        let basis = Arc::new(interval_basis(41, 1.0));
        let fop = FractionalOperator::new(basis.clone(), 0.6).unwrap();
        let mut rng = SplitMix64::new(17);
        for _ in 0..5 {
            let u = rng.vector(basis.ndofs(), -1.0, 1.0);
            let v = rng.vector(basis.ndofs(), -1.0, 1.0);
            let lhs = basis.inner(&fop.apply(&u).unwrap(), &v);
            let rhs = basis.inner(&u, &fop.apply(&v).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
            let quad = basis.inner(&fop.apply(&u).unwrap(), &u);
            let l2 = basis.inner(&u, &u);
            assert!(quad >= fop.first_eigenvalue_s() * l2 - 1e-10 * quad.abs());
        }
    }

    #[test]
    fn linearized_eigenvalue_shift() {
        let basis = Arc::new(interval_basis(31, 1.0));
        let fop = FractionalOperator::new(basis.clone(), 0.75).unwrap();
        let zero = DVector::zeros(basis.ndofs());
        let (nu, _) = fop.linearized_first_eigenvalue(&zero).unwrap();
        assert!((nu - fop.first_eigenvalue_s()).abs() <= 1e-10 * nu);
        let shift = DVector::from_element(basis.ndofs(), fop.first_eigenvalue_s());
        let (nu0, _) = fop.linearized_first_eigenvalue(&shift).unwrap();
        assert!(nu0.abs() <= 1e-10 * fop.first_eigenvalue_s());
    }

    #[test]
    fn sobolev_quotient_p2_is_lambda1s() {
        let basis = Arc::new(interval_basis(31, 1.0));
        let fop = FractionalOperator::new(basis.clone(), 0.75).unwrap();
        let res = fop.sobolev_quotient(2.0).unwrap();
        let expect = fop.first_eigenvalue_s();
        assert!((res.value - expect).abs() <= 1e-10 * expect);
    }

    #[test]
    fn sobolev_quotient_scale_invariant() {
        let basis = Arc::new(interval_basis(31, 1.0));
        let fop = FractionalOperator::new(basis.clone(), 0.75).unwrap();
        let res = fop.sobolev_quotient(4.0).unwrap();
        // Rescaling the minimizer leaves the quotient unchanged.
        let u = &res.minimizer * 3.7;
        let num = fop.hs_norm_sq(&u).unwrap();
        let den: f64 = basis
            .mass
            .iter()
            .zip(u.iter())
            .map(|(&w, &x)| w * x.abs().powf(4.0))
            .sum::<f64>()
            .powf(0.5);
        let q = num / den;
        assert!((q - res.value).abs() <= 1e-9 * res.value);
    }

    #[test]
    fn critical_exponent_capped_in_2d() {
        let mesh = build_mesh(&DomainSpec::rectangle(1.0, 1.0, 7, 7)).unwrap();
        let part = build_partition(&mesh, 2.0, PartitionRule::GrowFromCorner).unwrap();
        let lap = assemble(&mesh, &part).unwrap();
        let basis = Arc::new(eigendecompose(&lap).unwrap());
        let fop = FractionalOperator::new(basis, 0.75).unwrap();
        // 2N/(N-2s) = 8 at s = 0.75.
        assert!(fop.sobolev_quotient(8.0).is_ok());
        assert!(fop.sobolev_quotient(9.0).is_err());
    }
}
