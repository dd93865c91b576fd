//! Branch continuation in λ, extremal-parameter bracketing, the q = 1
//! bifurcation diagram, and sweeps over nested boundary-partition families.
//!
//! "No solution" at a probe λ is certified only by the conjunction of
//! supersolution infeasibility (the scalar inequality on `M ≥ λM^q‖g‖^q +
//! M^r‖g‖^r` has no root) and divergence of Newton continuation from the
//! last solvable point; either a converged monotone iteration under a
//! feasible supersolution or a converged positive Newton solve certifies
//! existence. The extremal parameter is reported as a bracket with both
//! certificates, never as a point value.

use crate::error::{Error, Result};
use crate::mesh::{build_mesh, build_partition, MeshedDomain, PartitionFamily};
use crate::solve::{
    build_supersolution, monotone_iteration, mountain_pass_solve, newton_solve,
    one_mode_amplitude, residual, solve_sublinear, solve_torsion, MonotoneOpts,
    MountainPassOpts, NewtonOpts, ProblemParams, SolutionKind, SolutionRecord, Supersolution,
};
use crate::spectral::{assemble, eigendecompose, FractionalOperator};
use crate::util::le_pointwise;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Minimal,
    MountainPass,
    BifurcationQ1,
}

/// One branch point: the solution record plus the first eigenvalue of the
/// linearization `(-Δ)^s − a_λ` at it.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub lambda: f64,
    pub record: SolutionRecord,
    pub nu1: f64,
}

/// Ordered family of solutions along a λ-grid.
#[derive(Debug, Clone)]
pub struct Branch {
    pub kind: BranchKind,
    pub template: ProblemParams,
    pub points: Vec<BranchPoint>,
    /// First grid λ where the supersolution construction failed (branch cut
    /// short; feeds the Λ bracketing).
    pub truncated_at: Option<f64>,
}

impl Branch {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    pub fn max_sup_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.record.sup_norm)
            .fold(0.0, f64::max)
    }
}

/// Linearization potential `a_λ = λq u^{q-1} + r u^{r-1}` of a solution.
pub fn linearization_potential(params: &ProblemParams, u: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(u.len(), |i, _| params.f_prime(u[i]))
}

/// Shared per-(basis, s, q) machinery for minimal solves: the torsion
/// function and the unit sublinear solution.
pub struct MinimalSolver {
    pub fop: Arc<FractionalOperator>,
    pub template: ProblemParams,
    pub torsion: SolutionRecord,
    sublinear_unit: Option<SolutionRecord>,
}

impl MinimalSolver {
    pub fn new(fop: Arc<FractionalOperator>, template: &ProblemParams) -> Result<Self> {
        template.validate(fop.basis.dim)?;
        let torsion = solve_torsion(&fop)?;
        let sublinear_unit = if template.q < 1.0 {
            Some(solve_sublinear(&fop, 1.0, template.q)?.0)
        } else {
            None
        };
        Ok(MinimalSolver {
            fop,
            template: *template,
            torsion,
            sublinear_unit,
        })
    }

    /// The canonical subsolution `v_λ = λ^{1/(1-q)} v_1` (q < 1 only).
    pub fn subsolution(&self, lambda: f64) -> Result<DVector<f64>> {
        let v1 = self.sublinear_unit.as_ref().ok_or_else(|| {
            Error::invalid_param("q", "the sublinear subsolution needs q < 1")
        })?;
        Ok(&v1.u * lambda.powf(1.0 / (1.0 - self.template.q)))
    }

    /// Scalar feasibility bound λ₀: the supremum of λ for which the
    /// supersolution inequality admits a root. Existence is guaranteed below
    /// it; the extremal parameter lies at or above it.
    pub fn feasibility_bound(&self) -> f64 {
        let g_sup = self.torsion.sup_norm;
        let feasible = |lambda: f64| -> bool {
            build_supersolution(&self.template.with_lambda(lambda), &self.torsion).is_ok()
        };
        let mut lo = 1e-12 / g_sup;
        if !feasible(lo) {
            return 0.0;
        }
        let mut hi = 1.0 / g_sup;
        let mut guard = 0;
        while feasible(hi) && guard < 200 {
            lo = hi;
            hi *= 2.0;
            guard += 1;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Minimal solution at λ by monotone iteration under the rebuilt
    /// supersolution, seeded from `sub_seed` (a previous minimal solution)
    /// or from the canonical sublinear subsolution.
    pub fn solve(
        &self,
        lambda: f64,
        sub_seed: Option<&DVector<f64>>,
    ) -> Result<(SolutionRecord, Supersolution)> {
        let params = self.template.with_lambda(lambda);
        let superr = build_supersolution(&params, &self.torsion)?;
        let sub = match sub_seed {
            Some(u) => u.clone(),
            None => self.subsolution(lambda)?,
        };
        let (record, _trace) = monotone_iteration(
            &self.fop,
            &params,
            &sub,
            &superr.h,
            &MonotoneOpts::default(),
        )?;
        Ok((record, superr))
    }
}

/// Minimal branch over an ascending λ-grid: each point is the monotone limit
/// seeded from the previous minimal solution (a subsolution at larger λ)
/// under the rebuilt supersolution. Pointwise monotonicity in λ is asserted.
pub fn continue_minimal_branch(
    fop: &Arc<FractionalOperator>,
    template: &ProblemParams,
    lambda_grid: &[f64],
) -> Result<Branch> {
    if lambda_grid.is_empty() {
        return Err(Error::invalid_param("lambda_grid", "must be nonempty"));
    }
    if !lambda_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::invalid_param(
            "lambda_grid",
            "must be strictly increasing",
        ));
    }
    if lambda_grid[0] <= 0.0 {
        return Err(Error::invalid_param("lambda_grid", "must be positive"));
    }
    let solver = MinimalSolver::new(fop.clone(), template)?;
    let mut points: Vec<BranchPoint> = Vec::new();
    let mut truncated_at = None;
    for &lambda in lambda_grid {
        let seed = points.last().map(|p| &p.record.u);
        match solver.solve(lambda, seed) {
            Ok((record, _)) => {
                if let Some(prev) = points.last() {
                    let slack = 1e-8 * record.sup_norm.max(1.0);
                    if !le_pointwise(&prev.record.u, &record.u, slack) {
                        return Err(Error::OrderingViolation {
                            step: points.len(),
                            detail: format!(
                                "minimal branch not monotone between λ = {} and {}",
                                prev.lambda, lambda
                            ),
                        });
                    }
                }
                let params = template.with_lambda(lambda);
                let a = linearization_potential(&params, &record.u);
                let (nu1, _) = fop.linearized_first_eigenvalue(&a)?;
                points.push(BranchPoint {
                    lambda,
                    record,
                    nu1,
                });
            }
            Err(Error::NoSupersolution { lambda }) => {
                truncated_at = Some(lambda);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Branch {
        kind: BranchKind::Minimal,
        template: *template,
        points,
        truncated_at,
    })
}

/// Natural Newton continuation in λ with adaptive stepping; walks from a
/// known solution toward `target` and returns the solution there. Divergence
/// (step collapse) is the Newton half of the nonexistence certificate.
pub fn newton_continue(
    fop: &FractionalOperator,
    template: &ProblemParams,
    from_lambda: f64,
    from_u: &DVector<f64>,
    target: f64,
    min_step: f64,
) -> Result<SolutionRecord> {
    let opts = NewtonOpts {
        enforce_positivity: true,
        tol: 1e-10,
        max_iters: 40,
    };
    newton_continue_with(fop, template, from_lambda, from_u, target, min_step, &opts, |_, _| true)
}

#[allow(clippy::too_many_arguments)]
fn newton_continue_with(
    fop: &FractionalOperator,
    template: &ProblemParams,
    from_lambda: f64,
    from_u: &DVector<f64>,
    target: f64,
    min_step: f64,
    opts: &NewtonOpts,
    accept: impl Fn(&ProblemParams, &SolutionRecord) -> bool,
) -> Result<SolutionRecord> {
    let mut cur_lambda = from_lambda;
    let mut u = from_u.clone();
    let mut step = target - cur_lambda;
    let mut guard = 0;
    while cur_lambda != target {
        guard += 1;
        if guard > 500 {
            return Err(Error::NewtonFailure(
                "continuation exceeded the step budget".into(),
            ));
        }
        let trial = if step.abs() >= (target - cur_lambda).abs() {
            target
        } else {
            cur_lambda + step
        };
        let params = template.with_lambda(trial);
        let outcome = newton_solve(fop, &params, &u, opts);
        match outcome {
            Ok((rec, _)) if accept(&params, &rec) => {
                cur_lambda = trial;
                u = rec.u;
                step *= 1.7;
            }
            _ => {
                step *= 0.5;
                if step.abs() < min_step {
                    return Err(Error::NewtonFailure(format!(
                        "continuation stalled at λ = {cur_lambda} heading to {target}"
                    )));
                }
            }
        }
    }
    SolutionRecord::new(fop, template.with_lambda(target), u, SolutionKind::Other)
}

/// Genuineness test for q = 1 Newton results: a positive solution must
/// satisfy the φ₁-test identity `λ + ⟨u^r, φ₁⟩/⟨u, φ₁⟩ = λ₁^s`, which
/// separates true branch points from pseudo-roots that drift toward the
/// trivial solution (those have a nearly vanishing ratio term instead).
pub fn genuine_q1_solution(
    fop: &FractionalOperator,
    params: &ProblemParams,
    rec: &SolutionRecord,
) -> bool {
    if rec.sup_norm <= 1e-12 || rec.u.iter().any(|&x| x <= 0.0) {
        return false;
    }
    let basis = &fop.basis;
    let phi1 = basis.phi1();
    let ur = DVector::from_fn(rec.u.len(), |i, _| rec.u[i].abs().powf(params.r));
    let denom = basis.inner(&rec.u, &phi1);
    if denom <= 0.0 {
        return false;
    }
    let rho = basis.inner(&ur, &phi1) / denom;
    let l1s = fop.first_eigenvalue_s();
    let gap = (l1s - params.lambda).abs();
    (params.lambda + rho - l1s).abs() <= 0.3 * gap
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    MonotoneSuccess,
    NewtonSuccess,
    CertifiedFailure {
        supersolution_infeasible: bool,
        newton_diverged: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Probe {
    pub lambda: f64,
    pub outcome: ProbeOutcome,
}

/// Bracket for `Λ = sup{λ : (P_λ) has a solution}`.
#[derive(Debug, Clone)]
pub struct LambdaStarEstimate {
    /// Largest λ with a certified solution.
    pub lower: f64,
    /// Smallest λ with a certified failure.
    pub upper: f64,
    /// True when the requested resolution was reached within budget.
    pub resolved: bool,
    pub probes: Vec<Probe>,
    /// The solution at `lower`.
    pub lower_solution: Option<SolutionRecord>,
}

impl LambdaStarEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Smallest positive sup-norm counted as a nontrivial solution (the q = 1
/// Newton probe can legitimately converge to the zero solution).
const TRIVIAL_SUP: f64 = 1e-9;

/// Bisection estimate of Λ. A probe succeeds if monotone iteration converges
/// under a feasible supersolution or Newton continuation from the last
/// solvable λ converges to a positive nontrivial solution; it is a certified
/// failure if the supersolution is infeasible and Newton diverges (or
/// collapses to zero).
pub fn estimate_lambda_star(
    fop: &Arc<FractionalOperator>,
    template: &ProblemParams,
    resolution: f64,
) -> Result<LambdaStarEstimate> {
    if !(resolution > 0.0) {
        return Err(Error::invalid_param("resolution", "must be positive"));
    }
    template.validate(fop.basis.dim)?;
    if template.q < 1.0 {
        estimate_lambda_star_sublinear(fop, template, resolution)
    } else {
        estimate_lambda_star_q1(fop, template, resolution)
    }
}

fn estimate_lambda_star_sublinear(
    fop: &Arc<FractionalOperator>,
    template: &ProblemParams,
    resolution: f64,
) -> Result<LambdaStarEstimate> {
    let solver = MinimalSolver::new(fop.clone(), template)?;
    let lambda0 = solver.feasibility_bound();
    if lambda0 <= 0.0 {
        return Err(Error::NewtonFailure(
            "scalar feasibility bound degenerate; no starting bracket".into(),
        ));
    }
    let mut probes = Vec::new();
    let min_step = (resolution / 8.0).max(1e-14 * lambda0);

    // Certified lower end just below the scalar bound.
    let mut lower = 0.995 * lambda0;
    let (rec, _) = solver.solve(lower, None)?;
    probes.push(Probe {
        lambda: lower,
        outcome: ProbeOutcome::MonotoneSuccess,
    });
    let mut best = rec;

    // Try a probe λ given the current best solution; updates certificates.
    let try_probe = |lambda: f64,
                         best: &mut SolutionRecord,
                         probes: &mut Vec<Probe>|
     -> Result<bool> {
        let params = template.with_lambda(lambda);
        let feasible = build_supersolution(&params, &solver.torsion).is_ok();
        if feasible {
            // Previous minimal solutions are subsolutions at larger λ and
            // stay below the rebuilt supersolution.
            match solver.solve(lambda, Some(&best.u)) {
                Ok((rec, _)) => {
                    *best = rec;
                    probes.push(Probe {
                        lambda,
                        outcome: ProbeOutcome::MonotoneSuccess,
                    });
                    return Ok(true);
                }
                Err(Error::NoSupersolution { .. }) | Err(Error::OrderingViolation { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        match newton_continue(fop, template, best.params.lambda, &best.u, lambda, min_step) {
            Ok(rec) if rec.sup_norm > TRIVIAL_SUP * (1.0 + best.sup_norm) => {
                *best = rec;
                probes.push(Probe {
                    lambda,
                    outcome: ProbeOutcome::NewtonSuccess,
                });
                Ok(true)
            }
            _ => {
                probes.push(Probe {
                    lambda,
                    outcome: ProbeOutcome::CertifiedFailure {
                        supersolution_infeasible: !feasible,
                        newton_diverged: true,
                    },
                });
                Ok(false)
            }
        }
    };

    // Walk upward geometrically until the first certified failure.
    let mut upper = None;
    let mut lambda = lambda0 * 1.05;
    for _ in 0..80 {
        if try_probe(lambda, &mut best, &mut probes)? {
            lower = lambda;
            lambda *= 1.25;
        } else {
            upper = Some(lambda);
            break;
        }
    }
    let mut upper = upper.ok_or_else(|| {
        Error::NewtonFailure("no certified failure found above the feasibility bound".into())
    })?;

    let mut resolved = false;
    for _ in 0..300 {
        if upper - lower <= resolution {
            resolved = true;
            break;
        }
        let mid = 0.5 * (lower + upper);
        if try_probe(mid, &mut best, &mut probes)? {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    Ok(LambdaStarEstimate {
        lower,
        upper,
        resolved,
        probes,
        lower_solution: Some(best),
    })
}

fn estimate_lambda_star_q1(
    fop: &Arc<FractionalOperator>,
    template: &ProblemParams,
    resolution: f64,
) -> Result<LambdaStarEstimate> {
    let torsion = solve_torsion(fop)?;
    let l1s = fop.first_eigenvalue_s();
    let min_step = (resolution / 8.0).max(1e-14 * l1s);
    let mut probes = Vec::new();
    // Tight residuals keep the φ₁-identity check meaningful at the tiny
    // amplitudes near the threshold.
    let opts = NewtonOpts {
        enforce_positivity: true,
        tol: 1e-12,
        max_iters: 60,
    };

    let newton_probe = |lambda: f64, seed: Option<&SolutionRecord>| -> Option<SolutionRecord> {
        let params = template.with_lambda(lambda);
        if let Some(rec) = seed {
            if let Ok(r) = newton_continue_with(
                fop,
                template,
                rec.params.lambda,
                &rec.u,
                lambda,
                min_step,
                &opts,
                |p, r| genuine_q1_solution(fop, p, r),
            ) {
                if genuine_q1_solution(fop, &params, &r) {
                    return Some(r);
                }
            }
        }
        if let Some(c) = one_mode_amplitude(fop, &params) {
            let seed_vec = fop.basis.phi1() * c;
            if let Ok((rec, _)) = newton_solve(fop, &params, &seed_vec, &opts) {
                if genuine_q1_solution(fop, &params, &rec) {
                    return Some(rec);
                }
            }
        }
        None
    };

    let mut lower = 0.5 * l1s;
    let mut best = newton_probe(lower, None).ok_or_else(|| {
        Error::NewtonFailure("q=1 probe failed at λ = λ₁^s/2, no starting bracket".into())
    })?;
    probes.push(Probe {
        lambda: lower,
        outcome: ProbeOutcome::NewtonSuccess,
    });

    let try_probe = |lambda: f64,
                     best: &mut SolutionRecord,
                     probes: &mut Vec<Probe>|
     -> bool {
        let params = template.with_lambda(lambda);
        let feasible = build_supersolution(&params, &torsion).is_ok();
        if let Some(rec) = newton_probe(lambda, Some(best)) {
            *best = rec;
            probes.push(Probe {
                lambda,
                outcome: ProbeOutcome::NewtonSuccess,
            });
            true
        } else {
            probes.push(Probe {
                lambda,
                outcome: ProbeOutcome::CertifiedFailure {
                    supersolution_infeasible: !feasible,
                    newton_diverged: true,
                },
            });
            false
        }
    };

    let mut upper = None;
    let mut lambda = 0.8 * l1s;
    for _ in 0..100 {
        if try_probe(lambda, &mut best, &mut probes) {
            lower = lambda;
            lambda = l1s + 1.2 * (lambda - l1s).abs().min(0.25 * l1s);
            if lambda <= lower {
                lambda = lower * 1.05;
            }
        } else {
            upper = Some(lambda);
            break;
        }
    }
    let mut upper = upper.ok_or_else(|| {
        Error::NewtonFailure("no certified q=1 failure found above λ₁^s".into())
    })?;

    let mut resolved = false;
    for _ in 0..300 {
        if upper - lower <= resolution {
            resolved = true;
            break;
        }
        let mid = 0.5 * (lower + upper);
        if try_probe(mid, &mut best, &mut probes) {
            lower = mid;
        } else {
            upper = mid;
        }
    }
    Ok(LambdaStarEstimate {
        lower,
        upper,
        resolved,
        probes,
        lower_solution: Some(best),
    })
}

/// q = 1 bifurcation branch: natural continuation from a one-mode seed near
/// `λ₁^s` down the given strictly decreasing λ-grid toward the λ = 0 axis.
pub fn bifurcation_branch_q1(
    fop: &Arc<FractionalOperator>,
    template: &ProblemParams,
    lambda_grid: &[f64],
) -> Result<Branch> {
    if template.q != 1.0 {
        return Err(Error::invalid_param("q", "bifurcation branch needs q = 1"));
    }
    template.validate(fop.basis.dim)?;
    if lambda_grid.len() < 2 || !lambda_grid.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::invalid_param(
            "lambda_grid",
            "must be strictly decreasing with at least two points",
        ));
    }
    let l1s = fop.first_eigenvalue_s();
    if lambda_grid[0] >= l1s || *lambda_grid.last().unwrap() <= 0.0 {
        return Err(Error::invalid_param(
            "lambda_grid",
            format!("must lie inside (0, λ₁^s = {l1s})"),
        ));
    }
    let mut points: Vec<BranchPoint> = Vec::new();
    let first = lambda_grid[0];
    let params0 = template.with_lambda(first);
    let opts = NewtonOpts {
        enforce_positivity: true,
        tol: 1e-12,
        max_iters: 60,
    };
    let c = one_mode_amplitude(fop, &params0).ok_or_else(|| {
        Error::NewtonFailure("one-mode seed amplitude not found near the threshold".into())
    })?;
    let seed = fop.basis.phi1() * c;
    let (rec0, _) = newton_solve(fop, &params0, &seed, &opts)?;
    if !genuine_q1_solution(fop, &params0, &rec0) {
        return Err(Error::NewtonFailure(
            "seed point collapsed onto the trivial solution".into(),
        ));
    }
    let min_step = 1e-6 * l1s;
    push_branch_point(fop, template, rec0, first, &mut points)?;
    for &lambda in &lambda_grid[1..] {
        let prev = points.last().unwrap();
        let walked = newton_continue_with(
            fop,
            template,
            prev.lambda,
            &prev.record.u,
            lambda,
            min_step,
            &opts,
            |p, r| genuine_q1_solution(fop, p, r),
        );
        let rec = match walked {
            Ok(rec) => rec,
            Err(_) => {
                // Retry from a one-mode seed before declaring a fold.
                let params = template.with_lambda(lambda);
                let c = one_mode_amplitude(fop, &params);
                let direct = c.and_then(|c| {
                    newton_solve(fop, &params, &(fop.basis.phi1() * c), &opts).ok()
                });
                match direct {
                    Some((rec, _)) if genuine_q1_solution(fop, &params, &rec) => rec,
                    _ => {
                        return Err(Error::NewtonFailure(format!(
                            "fold suspected near λ = {}: continuation stalled",
                            prev.lambda
                        )))
                    }
                }
            }
        };
        push_branch_point(fop, template, rec, lambda, &mut points)?;
    }
    Ok(Branch {
        kind: BranchKind::BifurcationQ1,
        template: *template,
        points,
        truncated_at: None,
    })
}

fn push_branch_point(
    fop: &Arc<FractionalOperator>,
    template: &ProblemParams,
    record: SolutionRecord,
    lambda: f64,
    points: &mut Vec<BranchPoint>,
) -> Result<()> {
    let params = template.with_lambda(lambda);
    let a = linearization_potential(&params, &record.u);
    let (nu1, _) = fop.linearized_first_eigenvalue(&a)?;
    points.push(BranchPoint {
        lambda,
        record,
        nu1,
    });
    Ok(())
}

/// λ-choice protocol for α-sweeps: `λ(α) = fraction · Λ_lower(α) · (α/|∂Ω|)^pow`.
/// The α-dependent damping keeps the minimal solutions shrinking as the
/// Dirichlet region (and with it Λ and λ₁) degenerates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepProtocol {
    pub lambda_fraction: f64,
    pub alpha_power: f64,
    /// Λ-bracket resolution relative to the scalar feasibility bound.
    pub lambda_star_rel_resolution: f64,
    /// L^p exponent for the Sobolev-quotient column; in 2D the critical
    /// exponent is used when this is None.
    pub quotient_exponent: Option<f64>,
}

impl Default for SweepProtocol {
    fn default() -> Self {
        SweepProtocol {
            lambda_fraction: 0.5,
            alpha_power: 1.0,
            lambda_star_rel_resolution: 0.05,
            quotient_exponent: None,
        }
    }
}

/// Per-α sweep results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub lambda1s: f64,
    pub sobolev_constant: f64,
    pub lambda_star_lower: f64,
    pub lambda_star_upper: f64,
    pub lambda_used: f64,
    pub minimal_sup: f64,
    pub minimal_hs: f64,
    pub minimal_energy: f64,
    pub mountain_pass_sup: f64,
    pub mountain_pass_hs: f64,
    pub mountain_pass_energy: f64,
    pub nu1: f64,
    pub error: Option<String>,
}

/// Monotone-trend summary across ascending α (each flag states that the
/// quantity decreases when α decreases).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepTrends {
    pub lambda1s_strictly_decreasing: bool,
    pub sobolev_nonincreasing: bool,
    pub lambda_star_decreasing: bool,
    pub minimal_sup_decreasing: bool,
    pub minimal_hs_decreasing: bool,
    pub mountain_pass_hs_decreasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub trends: SweepTrends,
    pub template: ProblemParams,
    pub protocol: SweepProtocol,
}

/// Runs the moving-boundary sweep over a nested family. Rows are ordered by
/// ascending α; individual failures are recorded in the row and the sweep
/// continues. Per-α work is independent and runs on the rayon pool.
pub fn alpha_sweep(
    family: &PartitionFamily,
    template: &ProblemParams,
    protocol: &SweepProtocol,
) -> Result<SweepReport> {
    let mesh = build_mesh(&family.domain)?;
    let boundary = mesh.boundary_measure();
    let rows: Vec<SweepRow> = family
        .alphas
        .par_iter()
        .map(|&alpha| {
            sweep_one_alpha(&mesh, alpha, family, template, protocol, boundary)
                .unwrap_or_else(|e| SweepRow {
                    alpha,
                    lambda1s: f64::NAN,
                    sobolev_constant: f64::NAN,
                    lambda_star_lower: f64::NAN,
                    lambda_star_upper: f64::NAN,
                    lambda_used: f64::NAN,
                    minimal_sup: f64::NAN,
                    minimal_hs: f64::NAN,
                    minimal_energy: f64::NAN,
                    mountain_pass_sup: f64::NAN,
                    mountain_pass_hs: f64::NAN,
                    mountain_pass_energy: f64::NAN,
                    nu1: f64::NAN,
                    error: Some(e.to_string()),
                })
        })
        .collect();

    let ok = |f: fn(&SweepRow) -> f64| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.error.is_none())
            .map(f)
            .collect()
    };
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
    let nondecreasing = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1] + 1e-12);
    let trends = SweepTrends {
        lambda1s_strictly_decreasing: increasing(&ok(|r| r.lambda1s)),
        sobolev_nonincreasing: nondecreasing(&ok(|r| r.sobolev_constant)),
        lambda_star_decreasing: increasing(&ok(|r| r.lambda_star_lower))
            && increasing(&ok(|r| r.lambda_star_upper)),
        minimal_sup_decreasing: increasing(&ok(|r| r.minimal_sup)),
        minimal_hs_decreasing: increasing(&ok(|r| r.minimal_hs)),
        mountain_pass_hs_decreasing: increasing(&ok(|r| r.mountain_pass_hs)),
    };
    Ok(SweepReport {
        rows,
        trends,
        template: *template,
        protocol: protocol.clone(),
    })
}

fn sweep_one_alpha(
    mesh: &MeshedDomain,
    alpha: f64,
    family: &PartitionFamily,
    template: &ProblemParams,
    protocol: &SweepProtocol,
    boundary: f64,
) -> Result<SweepRow> {
    let partition = build_partition(mesh, alpha, family.rule)?;
    let lap = assemble(mesh, &partition)?;
    let basis = Arc::new(eigendecompose(&lap)?);
    let fop = Arc::new(FractionalOperator::new(basis.clone(), template.s)?);
    let lambda1s = fop.first_eigenvalue_s();
    let p = protocol.quotient_exponent.unwrap_or(match basis.dim {
        2 => 4.0 / (2.0 - 2.0 * template.s),
        _ => 4.0,
    });
    let sobolev = fop.sobolev_quotient(p)?.value;

    let solver = MinimalSolver::new(fop.clone(), template)?;
    let lambda0 = solver.feasibility_bound();
    let resolution = protocol.lambda_star_rel_resolution * lambda0;
    let bracket = estimate_lambda_star(&fop, template, resolution)?;

    let lambda_used = protocol.lambda_fraction
        * bracket.lower
        * (alpha / boundary).powf(protocol.alpha_power);
    let (minimal, _) = solver.solve(lambda_used, None)?;
    let params = template.with_lambda(lambda_used);
    let a = linearization_potential(&params, &minimal.u);
    let (nu1, _) = fop.linearized_first_eigenvalue(&a)?;
    let (mp, _) = mountain_pass_solve(&fop, &params, &minimal.u, &MountainPassOpts::default())?;

    Ok(SweepRow {
        alpha,
        lambda1s,
        sobolev_constant: sobolev,
        lambda_star_lower: bracket.lower,
        lambda_star_upper: bracket.upper,
        lambda_used,
        minimal_sup: minimal.sup_norm,
        minimal_hs: minimal.hs_norm,
        minimal_energy: minimal.energy,
        mountain_pass_sup: mp.sup_norm,
        mountain_pass_hs: mp.hs_norm,
        mountain_pass_energy: mp.energy,
        nu1,
        error: None,
    })
}

/// Evenly spaced grid on [lo, hi] inclusive.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && hi > lo);
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Geometrically spaced grid on [lo, hi] inclusive.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && hi > lo && lo > 0.0);
    (0..count)
        .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

/// Convenience: verify that a solution's weak form holds against φ₁, i.e.
/// `⟨λu^q + u^r, φ₁⟩ = λ₁^s ⟨u, φ₁⟩` within the residual tolerance.
pub fn eigenfunction_identity_defect(
    fop: &FractionalOperator,
    params: &ProblemParams,
    u: &DVector<f64>,
) -> Result<f64> {
    let phi1 = fop.basis.phi1();
    let f_vals = DVector::from_fn(u.len(), |i, _| params.f(u[i]));
    let lhs = fop.basis.inner(&f_vals, &phi1);
    let rhs = fop.first_eigenvalue_s() * fop.basis.inner(u, &phi1);
    let res = residual(fop, params, u)?;
    let scale = lhs.abs().max(rhs.abs()).max(res.norm).max(1e-300);
    Ok((lhs - rhs).abs() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{DomainSpec, PartitionRule};
    use crate::util::sup_diff;

    fn fop_1d(n: usize, s: f64) -> Arc<FractionalOperator> {
        let mesh = build_mesh(&DomainSpec::interval(1.0, n)).unwrap();
        let part = build_partition(&mesh, 1.0, PartitionRule::GrowFromLeft).unwrap();
        let lap = assemble(&mesh, &part).unwrap();
        let basis = Arc::new(eigendecompose(&lap).unwrap());
        Arc::new(FractionalOperator::new(basis, s).unwrap())
    }

    fn desk_template() -> ProblemParams {
        ProblemParams {
            lambda: 0.0,
            q: 0.5,
            r: 2.0,
            s: 0.75,
        }
    }

    #[test]
    fn minimal_branch_monotone_and_negative_energy() {
        let fop = fop_1d(41, 0.75);
        let template = desk_template();
        let solver = MinimalSolver::new(fop.clone(), &template).unwrap();
        let lambda0 = solver.feasibility_bound();
        let grid = linear_grid(0.05 * lambda0, 0.9 * lambda0, 6);
        let branch = continue_minimal_branch(&fop, &template, &grid).unwrap();
        assert_eq!(branch.points.len(), 6);
        assert!(branch.truncated_at.is_none());
        for pair in branch.points.windows(2) {
            assert!(le_pointwise(
                &pair[0].record.u,
                &pair[1].record.u,
                1e-8 * pair[1].record.sup_norm.max(1.0)
            ));
        }
        for p in &branch.points {
            assert!(p.record.energy < 0.0, "I_λ = {} at λ = {}", p.record.energy, p.lambda);
            assert!(p.nu1 >= -1e-6, "ν₁ = {} at λ = {}", p.nu1, p.lambda);
        }
    }

    #[test]
    fn minimal_branch_two_point_ordering() {
        let fop = fop_1d(41, 0.75);
        let template = desk_template();
        let solver = MinimalSolver::new(fop.clone(), &template).unwrap();
        let lambda0 = solver.feasibility_bound();
        let (u1, _) = solver.solve(0.3 * lambda0, None).unwrap();
        let (u2, _) = solver.solve(0.6 * lambda0, None).unwrap();
        assert!(le_pointwise(&u1.u, &u2.u, 1e-8 * u2.sup_norm));
    }

    #[test]
    fn minimal_branch_sup_vanishes_with_lambda() {
        let fop = fop_1d(41, 0.75);
        let template = desk_template();
        let solver = MinimalSolver::new(fop.clone(), &template).unwrap();
        let lambda0 = solver.feasibility_bound();
        let grid = geometric_grid(1e-4 * lambda0, 0.5 * lambda0, 5);
        let branch = continue_minimal_branch(&fop, &template, &grid).unwrap();
        // ‖u_λ‖∞ ≤ M(λ)‖g‖∞ -> 0 along the λ -> 0 tail.
        let torsion = solve_torsion(&fop).unwrap();
        for p in &branch.points {
            let superr =
                build_supersolution(&template.with_lambda(p.lambda), &torsion).unwrap();
            assert!(p.record.sup_norm <= superr.m * torsion.sup_norm * (1.0 + 1e-9));
        }
        assert!(branch.points[0].record.sup_norm < 1e-3);
    }

    #[test]
    fn branch_truncates_on_infeasible_supersolution() {
        let fop = fop_1d(31, 0.75);
        let template = desk_template();
        let solver = MinimalSolver::new(fop.clone(), &template).unwrap();
        let lambda0 = solver.feasibility_bound();
        let grid = vec![0.5 * lambda0, 0.9 * lambda0, 1.5 * lambda0, 2.0 * lambda0];
        let branch = continue_minimal_branch(&fop, &template, &grid).unwrap();
        assert_eq!(branch.points.len(), 2);
        assert_eq!(branch.truncated_at, Some(1.5 * lambda0));
    }

    #[test]
    fn lambda_star_bracket_sublinear() {
        let fop = fop_1d(41, 0.75);
        let template = desk_template();
        let solver = MinimalSolver::new(fop.clone(), &template).unwrap();
        let lambda0 = solver.feasibility_bound();
        let est = estimate_lambda_star(&fop, &template, 0.02 * lambda0).unwrap();
        assert!(est.resolved);
        assert!(est.lower >= lambda0 * 0.99, "Λ lower {} < λ₀ {}", est.lower, lambda0);
        assert!(est.upper > est.lower);
        assert!(est.width() <= 0.02 * lambda0 * (1.0 + 1e-12));
        // The failure certificate must carry both halves.
        let fail = est
            .probes
            .iter()
            .find(|p| matches!(p.outcome, ProbeOutcome::CertifiedFailure { .. }))
            .expect("no failure probe");
        match fail.outcome {
            ProbeOutcome::CertifiedFailure {
                supersolution_infeasible,
                newton_diverged,
            } => {
                assert!(supersolution_infeasible && newton_diverged);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn lambda_star_q1_brackets_first_eigenvalue() {
        let fop = fop_1d(41, 0.75);
        let template = ProblemParams {
            lambda: 0.0,
            q: 1.0,
            r: 1.5,
            s: 0.75,
        };
        let l1s = fop.first_eigenvalue_s();
        let est = estimate_lambda_star(&fop, &template, 1e-3 * l1s).unwrap();
        assert!(est.resolved);
        assert!(
            est.lower < l1s && l1s < est.upper,
            "bracket [{}, {}] misses λ₁^s = {l1s}",
            est.lower,
            est.upper
        );
        assert!(est.width() <= 1e-3 * l1s * (1.0 + 1e-12));
    }

    #[test]
    fn bifurcation_branch_reaches_axis() {
        let fop = fop_1d(41, 0.75);
        let template = ProblemParams {
            lambda: 0.0,
            q: 1.0,
            r: 1.5,
            s: 0.75,
        };
        let l1s = fop.first_eigenvalue_s();
        let grid: Vec<f64> = geometric_grid(1e-3 * l1s, l1s - 1e-3, 12)
            .into_iter()
            .rev()
            .collect();
        let branch = bifurcation_branch_q1(&fop, &template, &grid).unwrap();
        assert_eq!(branch.points.len(), 12);
        // Amplitude vanishes toward the threshold.
        assert!(branch.points[0].record.sup_norm < 1e-3);
        // And the branch reaches λ = 1e-3·λ₁^s with a live solution.
        let last = branch.points.last().unwrap();
        assert!(last.lambda <= 1.01e-3 * l1s);
        assert!(last.record.sup_norm > 0.1);
        // One-mode amplitude prediction within 10% near the threshold.
        let p0 = &branch.points[0];
        let c = one_mode_amplitude(&fop, &template.with_lambda(p0.lambda)).unwrap();
        let a1 = fop.basis.coefficients(&p0.record.u)[0];
        assert!((a1 - c).abs() <= 0.1 * c, "a1 = {a1}, c = {c}");
    }

    #[test]
    fn eigenfunction_identity_on_solutions() {
        let fop = fop_1d(41, 0.75);
        let template = desk_template();
        let solver = MinimalSolver::new(fop.clone(), &template).unwrap();
        let lambda0 = solver.feasibility_bound();
        let (rec, _) = solver.solve(0.5 * lambda0, None).unwrap();
        let defect =
            eigenfunction_identity_defect(&fop, &template.with_lambda(0.5 * lambda0), &rec.u)
                .unwrap();
        assert!(defect <= 1e-8, "identity defect {defect:.3e}");
    }

    #[test]
    fn sweep_trends_on_interval_family() {
        // 1D family: α ∈ {1, 2} (Dirichlet at one end, then both).
        let domain = DomainSpec::interval(1.0, 41);
        let family =
            PartitionFamily::new(domain, vec![1.0, 2.0], PartitionRule::GrowFromLeft).unwrap();
        let template = desk_template();
        let report = alpha_sweep(&family, &template, &SweepProtocol::default()).unwrap();
        assert_eq!(report.rows.len(), 2);
        for row in &report.rows {
            assert!(row.error.is_none(), "row failed: {:?}", row.error);
        }
        assert!(report.trends.lambda1s_strictly_decreasing);
        assert!(report.trends.lambda_star_decreasing);
        assert!(report.trends.minimal_sup_decreasing);
        assert!(report.trends.mountain_pass_hs_decreasing);
    }

    #[test]
    fn grids_are_well_formed() {
        let g = linear_grid(1.0, 2.0, 5);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1.0).abs() < 1e-15 && (g[4] - 2.0).abs() < 1e-15);
        let g = geometric_grid(0.1, 10.0, 5);
        assert!((g[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn newton_continue_walks_and_fails_honestly() {
        let fop = fop_1d(31, 0.75);
        let template = desk_template();
        let solver = MinimalSolver::new(fop.clone(), &template).unwrap();
        let lambda0 = solver.feasibility_bound();
        let (rec, _) = solver.solve(0.5 * lambda0, None).unwrap();
        // Walking within the solvable range succeeds.
        let at = newton_continue(&fop, &template, 0.5 * lambda0, &rec.u, 0.8 * lambda0, 1e-8)
            .unwrap();
        let (direct, _) = solver.solve(0.8 * lambda0, None).unwrap();
        assert!(sup_diff(&at.u, &direct.u) <= 1e-6 * direct.sup_norm);
        // Walking far above the extremal parameter fails.
        assert!(newton_continue(
            &fop,
            &template,
            0.5 * lambda0,
            &rec.u,
            20.0 * lambda0,
            1e-4 * lambda0
        )
        .is_err());
    }
}
