//! Nonlinear solvers for `(-Δ)^s u = λ u^q + u^r` and its auxiliary problems.
//!
//! All inversions of the fractional operator are exact diagonal solves in the
//! eigenbasis. The solver stack: the torsion function `(-Δ)^s g = 1` and the
//! pure sublinear problem provide sub/supersolutions, monotone iteration
//! produces minimal solutions, damped Newton refines, and a path-deformation
//! descent with Newton polishing finds the mountain-pass second solution.
//! Nonlinearities are evaluated sign-extended, `f_λ(t) = λ|t|^{q-1}t + |t|^{r-1}t`,
//! while solvers keep their iterates positive.

use crate::error::{Error, Result};
use crate::spectral::FractionalOperator;
use crate::util::{le_pointwise, sup_diff, sup_norm};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Cap below which `|u|^{q-1}` in Jacobians is frozen.
const JACOBIAN_FLOOR: f64 = 1e-12;

/// Problem parameters for `(P_λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub lambda: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl ProblemParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid_param("lambda", "must be nonnegative"));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::invalid_param("q", "must lie in (0, 1]"));
        }
        if !(self.r > 1.0) {
            return Err(Error::invalid_param("r", "must exceed 1"));
        }
        if !(self.s > 0.5 && self.s < 1.0) {
            return Err(Error::invalid_param("s", "must lie in (1/2, 1)"));
        }
        if dim == 2 {
            let crit = (2.0 + 2.0 * self.s) / (2.0 - 2.0 * self.s);
            if self.r >= crit {
                return Err(Error::invalid_param(
                    "r",
                    format!("must stay below (N+2s)/(N-2s) = {crit} in 2D"),
                ));
            }
        }
        Ok(())
    }

    /// Sign-extended right-hand side `f_λ(t) = λ|t|^{q-1}t + |t|^{r-1}t`.
    pub fn f(&self, t: f64) -> f64 {
        let a = t.abs();
        if a == 0.0 {
            return 0.0;
        }
        self.lambda * a.powf(self.q - 1.0) * t + a.powf(self.r - 1.0) * t
    }

    /// Derivative `f_λ'(t) = λq|t|^{q-1} + r|t|^{r-1}`, with the `q`-part
    /// frozen below `1e-12` to dodge the singularity at zero.
    pub fn f_prime(&self, t: f64) -> f64 {
        let a = t.abs().max(JACOBIAN_FLOOR);
        self.lambda * self.q * a.powf(self.q - 1.0) + self.r * t.abs().powf(self.r - 1.0)
    }

    /// Primitive `F_λ(t) = λ|t|^{q+1}/(q+1) + |t|^{r+1}/(r+1)`.
    pub fn f_primitive(&self, t: f64) -> f64 {
        let a = t.abs();
        self.lambda * a.powf(self.q + 1.0) / (self.q + 1.0) + a.powf(self.r + 1.0) / (self.r + 1.0)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ProblemParams { lambda, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Minimal,
    MountainPass,
    Other,
}

/// A computed solution with its diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub u: DVector<f64>,
    pub params: ProblemParams,
    pub alpha: f64,
    pub residual_norm: f64,
    pub energy: f64,
    pub sup_norm: f64,
    pub hs_norm: f64,
    pub kind: SolutionKind,
}

impl SolutionRecord {
    pub fn new(
        fop: &FractionalOperator,
        params: ProblemParams,
        u: DVector<f64>,
        kind: SolutionKind,
    ) -> Result<Self> {
        let res = residual(fop, &params, &u)?;
        let energy = energy(fop, &params, &u)?;
        let hs = fop.hs_norm(&u)?;
        Ok(SolutionRecord {
            sup_norm: sup_norm(&u),
            residual_norm: res.norm,
            energy,
            hs_norm: hs,
            u,
            params,
            alpha: fop.basis.alpha,
            kind,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

/// Per-iteration numbers of an iterative solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationTrace {
    pub sup_norms: Vec<f64>,
    pub residuals: Vec<f64>,
    pub energies: Vec<f64>,
    pub termination: Termination,
    pub iterations: usize,
}

/// Energy functional `I_λ(u) = ½‖u‖²_{H^s} − λ/(q+1)∫|u|^{q+1} − 1/(r+1)∫|u|^{r+1}`.
pub fn energy(fop: &FractionalOperator, params: &ProblemParams, u: &DVector<f64>) -> Result<f64> {
    let quad = 0.5 * fop.hs_norm_sq(u)?;
    let nonlinear: f64 = u
        .iter()
        .zip(fop.basis.mass.iter())
        .map(|(&x, &w)| w * params.f_primitive(x))
        .sum();
    Ok(quad - nonlinear)
}

/// Residual vector and diagnostics.
#[derive(Debug, Clone)]
pub struct ResidualInfo {
    /// `(-Δ)^s u - f_λ(u)` on the dofs.
    pub vector: DVector<f64>,
    /// Mass-weighted L² norm.
    pub norm: f64,
    /// Number of negative entries of `u` (sign-extended evaluation was used).
    pub negative_entries: usize,
}

pub fn residual(
    fop: &FractionalOperator,
    params: &ProblemParams,
    u: &DVector<f64>,
) -> Result<ResidualInfo> {
    let mut vector = fop.apply(u)?;
    let mut negative = 0;
    for i in 0..u.len() {
        if u[i] < 0.0 {
            negative += 1;
        }
        vector[i] -= params.f(u[i]);
    }
    let norm = fop.basis.l2_norm(&vector);
    Ok(ResidualInfo {
        vector,
        norm,
        negative_entries: negative,
    })
}

/// Solves the torsion problem `(-Δ)^s g = 1`, `B(g) = 0`. The record's
/// residual field is the torsion residual `‖(-Δ)^s g − 1‖`.
pub fn solve_torsion(fop: &FractionalOperator) -> Result<SolutionRecord> {
    let ones = DVector::from_element(fop.ndofs(), 1.0);
    let g = fop.apply_inverse(&ones)?;
    if g.iter().any(|&x| x <= 0.0) {
        return Err(Error::LinearSolveFailure(
            "torsion function is not positive on the dofs".into(),
        ));
    }
    let params = ProblemParams {
        lambda: 0.0,
        q: 1.0,
        r: 2.0,
        s: fop.s,
    };
    let mut rec = SolutionRecord::new(fop, params, g, SolutionKind::Other)?;
    let mut tres = fop.apply(&rec.u)?;
    for i in 0..tres.len() {
        tres[i] -= 1.0;
    }
    rec.residual_norm = fop.basis.l2_norm(&tres);
    Ok(rec)
}

/// Solves the pure sublinear problem `(-Δ)^s v = λ v^q` (0 < q < 1) by
/// monotone fixed-point iteration from a small multiple of `φ₁`, then Newton
/// polishing. The positive solution is unique and scales as
/// `v_λ = λ^{1/(1-q)} v_1`.
pub fn solve_sublinear(
    fop: &FractionalOperator,
    lambda: f64,
    q: f64,
) -> Result<(SolutionRecord, IterationTrace)> {
    solve_sublinear_from(fop, lambda, q, &(fop.basis.phi1() * 1e-3))
}

/// Sublinear solve from a caller-supplied positive start (uniqueness probe).
pub fn solve_sublinear_from(
    fop: &FractionalOperator,
    lambda: f64,
    q: f64,
    start: &DVector<f64>,
) -> Result<(SolutionRecord, IterationTrace)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid_param("q", "sublinear solve needs 0 < q < 1"));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid_param("lambda", "must be positive"));
    }
    let max_iters = 500;
    let tol = 1e-13;
    let mut v = start.clone();
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::invalid_param("start", "must be positive"));
    }
    let mut sup_norms = Vec::new();
    let mut converged = false;
    let mut iters = max_iters;
    let mut last_increment = f64::NAN;
    for it in 0..max_iters {
        let rhs = DVector::from_fn(v.len(), |i, _| lambda * v[i].abs().powf(q));
        let next = fop.apply_inverse(&rhs)?;
        let delta = sup_diff(&next, &v);
        sup_norms.push(sup_norm(&next));
        let scale = sup_norm(&next).max(1e-300);
        v = next;
        last_increment = delta;
        if delta <= tol * scale {
            converged = true;
            iters = it + 1;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iters: max_iters,
            last_increment,
        });
    }
    // Newton polish on F(v) = (-Δ)^s v − λ v^q.
    let polish = newton_core(
        fop,
        &v,
        |x| lambda * x.abs().powf(q - 1.0) * x,
        |x| lambda * q * x.abs().max(JACOBIAN_FLOOR).powf(q - 1.0),
        &NewtonOpts {
            enforce_positivity: true,
            tol: 1e-12,
            max_iters: 30,
        },
    )?;
    let v = polish.u;
    let params = ProblemParams {
        lambda,
        q,
        r: 2.0,
        s: fop.s,
    };
    let mut rec = SolutionRecord::new(fop, params, v, SolutionKind::Other)?;
    let mut res = fop.apply(&rec.u)?;
    for i in 0..res.len() {
        res[i] -= lambda * rec.u[i].abs().powf(q);
    }
    rec.residual_norm = fop.basis.l2_norm(&res);
    let trace = IterationTrace {
        residuals: vec![rec.residual_norm],
        energies: Vec::new(),
        sup_norms,
        termination: Termination::Converged,
        iterations: iters,
    };
    Ok((rec, trace))
}

/// A supersolution `h = M·g` built on the torsion function.
#[derive(Debug, Clone)]
pub struct Supersolution {
    pub h: DVector<f64>,
    pub m: f64,
    pub g_sup: f64,
}

/// Scalar feasibility margin `ψ(M) = M − λ M^q G^q − M^r G^r`, `G = ‖g‖_∞`;
/// `h = Mg` is a supersolution iff `ψ(M) ≥ 0`.
pub fn scalar_margin(m: f64, lambda: f64, q: f64, r: f64, g_sup: f64) -> f64 {
    m - lambda * m.powf(q) * g_sup.powf(q) - m.powf(r) * g_sup.powf(r)
}

/// Maximizer of `ψ` over M > 0.
fn scalar_margin_peak(lambda: f64, q: f64, r: f64, g_sup: f64) -> f64 {
    let dpsi = |m: f64| -> f64 {
        1.0 - lambda * q * g_sup.powf(q) * m.powf(q - 1.0) - r * g_sup.powf(r) * m.powf(r - 1.0)
    };
    // ψ' < 0 for large M; find the region where it is positive (if any).
    let mut hi = 1.0 / g_sup;
    let mut guard = 0;
    while dpsi(hi) > 0.0 && guard < 200 {
        hi *= 2.0;
        guard += 1;
    }
    let mut probe = hi;
    let mut lo = 0.0;
    for _ in 0..300 {
        probe /= 2.0;
        if dpsi(probe) > 0.0 {
            lo = probe;
            break;
        }
    }
    if lo == 0.0 {
        // ψ' never positive: ψ stays below 0; return a token point.
        return hi * 1e-12;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dpsi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Builds the supersolution `h = M(λ)·g`. For q < 1, `M(λ)` is the smallest
/// feasible root of the scalar inequality, found by bisection; for q = 1 the
/// feasible set is an interval down to 0 and the maximizer of ψ is used.
/// Infeasibility is an explicit error and feeds the Λ estimator.
pub fn build_supersolution(
    params: &ProblemParams,
    torsion: &SolutionRecord,
) -> Result<Supersolution> {
    let g_sup = torsion.sup_norm;
    let (lambda, q, r) = (params.lambda, params.q, params.r);
    let peak = scalar_margin_peak(lambda, q, r, g_sup);
    if !(scalar_margin(peak, lambda, q, r, g_sup) >= 0.0) {
        return Err(Error::NoSupersolution { lambda });
    }
    let m = if q >= 1.0 {
        peak
    } else {
        // Smallest root: ψ < 0 near 0⁺ (the λM^q term dominates), ψ(peak) ≥ 0.
        let mut lo = peak;
        let mut found = false;
        for _ in 0..600 {
            lo /= 2.0;
            if scalar_margin(lo, lambda, q, r, g_sup) < 0.0 {
                found = true;
                break;
            }
        }
        if !found {
            lo
        } else {
            let mut hi = peak;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if scalar_margin(mid, lambda, q, r, g_sup) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    Ok(Supersolution {
        h: &torsion.u * m,
        m,
        g_sup,
    })
}

#[derive(Debug, Clone)]
pub struct MonotoneOpts {
    pub increment_tol: f64,
    pub max_iters: usize,
    /// Newton-polish the limit down to this residual (skipped when None).
    pub polish_tol: Option<f64>,
    pub kind: SolutionKind,
}

impl Default for MonotoneOpts {
    fn default() -> Self {
        MonotoneOpts {
            increment_tol: 1e-10,
            max_iters: 20_000,
            polish_tol: Some(1e-10),
            kind: SolutionKind::Minimal,
        }
    }
}

/// Monotone sub/supersolution iteration `u_{n+1} = ((-Δ)^s)⁻¹ f_λ(u_n)` from
/// `u_0 = sub`. Iterates are checked to be pointwise nondecreasing and below
/// the supersolution at every step; a violation is a hard error since it
/// means the input pair was not an ordered sub/supersolution pair.
pub fn monotone_iteration(
    fop: &FractionalOperator,
    params: &ProblemParams,
    sub: &DVector<f64>,
    superr: &DVector<f64>,
    opts: &MonotoneOpts,
) -> Result<(SolutionRecord, IterationTrace)> {
    params.validate(fop.basis.dim)?;
    let scale = sup_norm(superr).max(1e-300);
    if !le_pointwise(sub, superr, 1e-12 * scale) {
        return Err(Error::OrderingViolation {
            step: 0,
            detail: "subsolution is not below the supersolution".into(),
        });
    }
    // Residual signs certify the sub/supersolution property.
    let sign_slack = 1e-8 * (1.0 + fop.first_eigenvalue_s() * scale);
    let res_sub = residual(fop, params, sub)?;
    if res_sub.vector.iter().any(|&x| x > sign_slack) {
        return Err(Error::OrderingViolation {
            step: 0,
            detail: format!(
                "subsolution residual has positive entries up to {:.3e}",
                res_sub.vector.iter().cloned().fold(f64::MIN, f64::max)
            ),
        });
    }
    let res_super = residual(fop, params, superr)?;
    if res_super.vector.iter().any(|&x| x < -sign_slack) {
        return Err(Error::OrderingViolation {
            step: 0,
            detail: format!(
                "supersolution residual has negative entries down to {:.3e}",
                res_super.vector.iter().cloned().fold(f64::MAX, f64::min)
            ),
        });
    }

    let mut u = sub.clone();
    let mut sup_norms = Vec::new();
    let mut residuals = Vec::new();
    let mut energies = Vec::new();
    let mut converged = false;
    let mut iterations = opts.max_iters;
    let mut last_increment = f64::NAN;
    for it in 0..opts.max_iters {
        let rhs = DVector::from_fn(u.len(), |i, _| params.f(u[i]));
        let next = fop.apply_inverse(&rhs)?;
        // Slack matches the residual tolerance of polished subsolutions.
        if !le_pointwise(&u, &next, 1e-9 * scale) {
            return Err(Error::OrderingViolation {
                step: it + 1,
                detail: "iterate decreased pointwise".into(),
            });
        }
        if !le_pointwise(&next, superr, 1e-9 * scale) {
            return Err(Error::OrderingViolation {
                step: it + 1,
                detail: "iterate escaped above the supersolution".into(),
            });
        }
        let delta = sup_diff(&next, &u);
        u = next;
        sup_norms.push(sup_norm(&u));
        last_increment = delta;
        if it % 25 == 0 || delta <= opts.increment_tol {
            let res = residual(fop, params, &u)?;
            residuals.push(res.norm);
            energies.push(energy(fop, params, &u)?);
        }
        if delta <= opts.increment_tol {
            converged = true;
            iterations = it + 1;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iters: opts.max_iters,
            last_increment,
        });
    }
    if let Some(ptol) = opts.polish_tol {
        let polished = newton_solve(
            fop,
            params,
            &u,
            &NewtonOpts {
                enforce_positivity: true,
                tol: ptol,
                max_iters: 30,
            },
        )?;
        u = polished.0.u;
    }
    let record = SolutionRecord::new(fop, *params, u, opts.kind)?;
    let trace = IterationTrace {
        sup_norms,
        residuals,
        energies,
        termination: Termination::Converged,
        iterations,
    };
    Ok((record, trace))
}

#[derive(Debug, Clone)]
pub struct NewtonOpts {
    pub enforce_positivity: bool,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonOpts {
    fn default() -> Self {
        NewtonOpts {
            enforce_positivity: true,
            tol: 1e-10,
            max_iters: 50,
        }
    }
}

struct NewtonOutcome {
    u: DVector<f64>,
    iterations: usize,
    #[allow(dead_code)]
    residual_norm: f64,
}

/// Damped Newton on `F(u) = (-Δ)^s u − f(u)` with the symmetric Jacobian
/// `B^s − diag(f'(u))` assembled in mass-scaled coordinates.
fn newton_core(
    fop: &FractionalOperator,
    u_init: &DVector<f64>,
    f: impl Fn(f64) -> f64,
    f_prime: impl Fn(f64) -> f64,
    opts: &NewtonOpts,
) -> Result<NewtonOutcome> {
    let n = fop.ndofs();
    if u_init.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u_init.len(),
        });
    }
    let sqrt_m: Vec<f64> = fop.basis.mass.iter().map(|&w| w.sqrt()).collect();
    let mut u = u_init.clone();
    let res = |u: &DVector<f64>| -> Result<(DVector<f64>, f64)> {
        let mut v = fop.apply(u)?;
        for i in 0..n {
            v[i] -= f(u[i]);
        }
        let norm = fop.basis.l2_norm(&v);
        Ok((v, norm))
    };
    let (mut fv, mut fnorm) = res(&u)?;
    let scale_tol = |u: &DVector<f64>| opts.tol * (1.0 + sup_norm(u));
    for it in 0..=opts.max_iters {
        if fnorm <= scale_tol(&u) {
            return Ok(NewtonOutcome {
                u,
                iterations: it,
                residual_norm: fnorm,
            });
        }
        if it == opts.max_iters {
            break;
        }
        let mut jac = fop.sym_matrix().clone();
        for i in 0..n {
            jac[(i, i)] -= f_prime(u[i]);
        }
        // w-space residual: M^{1/2} F(u).
        let rhs = DVector::from_fn(n, |i, _| -fv[i] * sqrt_m[i]);
        let lu = jac.lu();
        let dw = lu.solve(&rhs).ok_or_else(|| {
            Error::NewtonFailure("singular Jacobian (near-fold conditions)".into())
        })?;
        let delta = DVector::from_fn(n, |i, _| dw[i] / sqrt_m[i]);
        if !delta.iter().all(|x| x.is_finite()) {
            return Err(Error::NewtonFailure("non-finite Newton step".into()));
        }
        let mut t = 1.0;
        let mut accepted = false;
        let mut positivity_blocked = false;
        for _ in 0..45 {
            let trial = &u + &delta * t;
            if opts.enforce_positivity && trial.iter().any(|&x| x <= 0.0) {
                positivity_blocked = true;
                t *= 0.5;
                continue;
            }
            positivity_blocked = false;
            let (tv, tn) = res(&trial)?;
            if tn <= (1.0 - 0.25 * t) * fnorm || tn <= scale_tol(&trial) {
                u = trial;
                fv = tv;
                fnorm = tn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if positivity_blocked {
                return Err(Error::NewtonFailure(
                    "positivity lost: damping could not keep the iterate positive".into(),
                ));
            }
            return Err(Error::NewtonFailure(format!(
                "no residual decrease (residual {fnorm:.3e}, damping reached {t:.1e})"
            )));
        }
    }
    Err(Error::NewtonFailure(format!(
        "no convergence in {} iterations, residual {fnorm:.3e}",
        opts.max_iters
    )))
}

/// Newton refinement of solutions to `(P_λ)`.
pub fn newton_solve(
    fop: &FractionalOperator,
    params: &ProblemParams,
    u_init: &DVector<f64>,
    opts: &NewtonOpts,
) -> Result<(SolutionRecord, usize)> {
    if opts.enforce_positivity && u_init.iter().any(|&x| x <= 0.0) {
        return Err(Error::invalid_param(
            "u_init",
            "must be positive on the dofs",
        ));
    }
    let out = newton_core(fop, u_init, |t| params.f(t), |t| params.f_prime(t), opts)?;
    let record = SolutionRecord::new(fop, *params, out.u, SolutionKind::Other)?;
    Ok((record, out.iterations))
}

#[derive(Debug, Clone)]
pub struct MountainPassOpts {
    pub path_points: usize,
    pub max_iters: usize,
    /// Descent stops when the mass-L² gradient norm falls below this times
    /// the problem scale; Newton takes over from there.
    pub grad_tol: f64,
    /// Minimum sup-norm separation from the given minimal solution.
    pub separation_tol: f64,
    pub newton_tol: f64,
}

impl Default for MountainPassOpts {
    fn default() -> Self {
        MountainPassOpts {
            path_points: 24,
            max_iters: 8_000,
            grad_tol: 1e-4,
            separation_tol: 1e-3,
            newton_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MountainPassInfo {
    pub descent_iterations: usize,
    pub high_point_scale: f64,
    pub pass_level: f64,
    pub separation: f64,
    pub newton_iterations: usize,
}

/// Finds a second solution above the minimal one: deform a discrete path from
/// `u_min` to a high point `u_min + t·φ₁` with energy below `I_λ(u_min)` by
/// descending the path maximum transversally, then Newton-polish the
/// near-critical point. Failure distinguishes "no separated second solution"
/// (collapse onto the minimal or zero solution) from numerical breakdown.
pub fn mountain_pass_solve(
    fop: &FractionalOperator,
    params: &ProblemParams,
    u_min: &DVector<f64>,
    opts: &MountainPassOpts,
) -> Result<(SolutionRecord, MountainPassInfo)> {
    params.validate(fop.basis.dim)?;
    let basis = fop.basis.clone();
    let i_min = energy(fop, params, u_min)?;
    let phi1 = basis.phi1();

    // High endpoint: march t outward until the energy drops below I(u_min).
    let margin = 1e-2 * (1.0 + i_min.abs());
    let mut t = 0.5 * (1.0 + sup_norm(u_min));
    let mut high = None;
    for _ in 0..90 {
        let e = u_min + &phi1 * t;
        if energy(fop, params, &e)? < i_min - margin {
            high = Some(e);
            break;
        }
        t *= 1.6;
    }
    let high = high.ok_or_else(|| {
        Error::MountainPassFailure("could not find a below-minimum high point t·φ₁".into())
    })?;

    let p = opts.path_points.max(5);
    let mut path: Vec<DVector<f64>> = (0..=p)
        .map(|k| {
            let tau = k as f64 / p as f64;
            u_min * (1.0 - tau) + &high * tau
        })
        .collect();
    let mut levels: Vec<f64> = Vec::with_capacity(p + 1);
    for u in &path {
        levels.push(energy(fop, params, u)?);
    }

    let grad_scale = 1.0 + fop.first_eigenvalue_s() * sup_norm(&high);
    let gtol = opts.grad_tol * grad_scale;
    let mut eta = 0.1;
    let mut descent_iters = 0;
    let mut pass_level = f64::NAN;
    for it in 0..opts.max_iters {
        descent_iters = it + 1;
        let mut imax = 1;
        for k in 1..p {
            if levels[k] > levels[imax] {
                imax = k;
            }
        }
        pass_level = levels[imax];
        let res = residual(fop, params, &path[imax])?;
        if res.norm <= gtol {
            break;
        }
        // Project out the path tangent so the deformation lowers the maximum
        // instead of sliding along the path.
        let mut dir = -res.vector.clone();
        let tangent = &path[imax + 1] - &path[imax - 1];
        let tnorm2 = basis.inner(&tangent, &tangent);
        if tnorm2 > 0.0 {
            let coef = basis.inner(&dir, &tangent) / tnorm2;
            dir -= &tangent * coef;
        }
        let mut dnorm2 = basis.inner(&dir, &dir);
        if dnorm2 <= 1e-24 * grad_scale * grad_scale {
            dir = -res.vector.clone();
            dnorm2 = basis.inner(&dir, &dir);
        }
        let mut step = eta;
        let mut moved = false;
        for _ in 0..40 {
            let trial = &path[imax] + &dir * step;
            let lvl = energy(fop, params, &trial)?;
            if lvl < levels[imax] - 1e-4 * step * dnorm2 {
                path[imax] = trial;
                levels[imax] = lvl;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break; // stagnated: hand the current maximum to Newton
        }
        eta = (step * 2.0).min(1.0);
        if it % 20 == 19 {
            redistribute_path(basis.as_ref(), &mut path);
            for (k, lvl) in levels.iter_mut().enumerate() {
                *lvl = energy(fop, params, &path[k])?;
            }
        }
    }

    let mut imax = 1;
    for k in 1..p {
        if levels[k] > levels[imax] {
            imax = k;
        }
    }
    let polish = newton_core(
        fop,
        &path[imax],
        |x| params.f(x),
        |x| params.f_prime(x),
        &NewtonOpts {
            enforce_positivity: false,
            tol: opts.newton_tol,
            max_iters: 100,
        },
    )
    .map_err(|e| Error::MountainPassFailure(format!("numerical failure in polishing: {e}")))?;

    let u_mp = polish.u;
    let separation = sup_diff(&u_mp, u_min);
    if separation <= opts.separation_tol {
        return Err(Error::MountainPassFailure(format!(
            "no separated second solution found: polished point is {separation:.3e} from the minimal solution"
        )));
    }
    if sup_norm(&u_mp) <= opts.separation_tol {
        return Err(Error::MountainPassFailure(
            "no separated second solution found: polished point is the zero solution".into(),
        ));
    }
    if u_mp.iter().any(|&x| x <= 0.0) {
        return Err(Error::MountainPassFailure(
            "polished point is not positive on the dofs".into(),
        ));
    }
    let i_mp = energy(fop, params, &u_mp)?;
    if i_mp <= i_min {
        return Err(Error::MountainPassFailure(format!(
            "polished point has energy {i_mp:.6e} not above the minimal level {i_min:.6e}"
        )));
    }
    let record = SolutionRecord::new(fop, *params, u_mp, SolutionKind::MountainPass)?;
    let info = MountainPassInfo {
        descent_iterations: descent_iters,
        high_point_scale: t,
        pass_level,
        separation,
        newton_iterations: polish.iterations,
    };
    Ok((record, info))
}

/// Resamples the path at equally spaced mass-L² arclength parameters.
fn redistribute_path(basis: &crate::spectral::EigenBasis, path: &mut [DVector<f64>]) {
    let p = path.len() - 1;
    let mut cum = vec![0.0];
    for k in 0..p {
        let seg = &path[k + 1] - &path[k];
        cum.push(cum[k] + basis.inner(&seg, &seg).sqrt());
    }
    let total = cum[p];
    if total <= 0.0 {
        return;
    }
    let old: Vec<DVector<f64>> = path.to_vec();
    for k in 1..p {
        let target = total * k as f64 / p as f64;
        let mut seg = 0;
        while seg + 1 < p && cum[seg + 1] < target {
            seg += 1;
        }
        let span = (cum[seg + 1] - cum[seg]).max(1e-300);
        let tau = (target - cum[seg]) / span;
        path[k] = &old[seg] * (1.0 - tau) + &old[seg + 1] * tau;
    }
}

/// Ordering check backing the comparison lemma: for a nonlinearity with
/// `f(t)/t` decreasing, a positive subsolution stays below a positive
/// supersolution. Returns `u1 ≤ u2 + 1e-10` pointwise; ratio monotonicity and
/// residual signs are validated as debug assertions.
pub fn comparison_check(
    fop: &FractionalOperator,
    f: impl Fn(f64) -> f64,
    u1: &DVector<f64>,
    u2: &DVector<f64>,
) -> bool {
    debug_assert!(ratio_decreasing(&f, u1, u2), "f(t)/t is not decreasing");
    debug_assert!(
        {
            let r1 = generic_residual(fop, &f, u1);
            r1.iter().all(|&x| x <= 1e-6 * (1.0 + sup_norm(u1)))
        },
        "u1 is not a subsolution"
    );
    debug_assert!(
        {
            let r2 = generic_residual(fop, &f, u2);
            r2.iter().all(|&x| x >= -1e-6 * (1.0 + sup_norm(u2)))
        },
        "u2 is not a supersolution"
    );
    le_pointwise(u1, u2, 1e-10)
}

fn generic_residual(
    fop: &FractionalOperator,
    f: &impl Fn(f64) -> f64,
    u: &DVector<f64>,
) -> DVector<f64> {
    let mut v = fop.apply(u).expect("dimension mismatch");
    for i in 0..u.len() {
        v[i] -= f(u[i]);
    }
    v
}

fn ratio_decreasing(f: &impl Fn(f64) -> f64, u1: &DVector<f64>, u2: &DVector<f64>) -> bool {
    let hi = sup_norm(u1).max(sup_norm(u2)).max(1e-6);
    let lo = hi * 1e-6;
    let count = 64;
    let mut prev = f64::INFINITY;
    for k in 0..count {
        let t = lo * (hi / lo).powf(k as f64 / (count - 1) as f64);
        let ratio = f(t) / t;
        if ratio > prev + 1e-12 * prev.abs() {
            return false;
        }
        prev = ratio;
    }
    true
}

/// One-mode Galerkin amplitude: the scalar `c > 0` with
/// `λ₁^s c = λ c^q ∫φ₁^{q+1} + c^r ∫φ₁^{r+1}`, used to seed and cross-check
/// solutions near the q = 1 bifurcation threshold.
pub fn one_mode_amplitude(fop: &FractionalOperator, params: &ProblemParams) -> Option<f64> {
    let basis = &fop.basis;
    let phi1 = basis.phi1();
    let moment = |p: f64| -> f64 {
        phi1.iter()
            .zip(basis.mass.iter())
            .map(|(&x, &w)| w * x.abs().powf(p))
            .sum()
    };
    let bq = moment(params.q + 1.0);
    let br = moment(params.r + 1.0);
    let l1s = fop.first_eigenvalue_s();
    let g =
        |c: f64| -> f64 { params.lambda * c.powf(params.q) * bq + c.powf(params.r) * br - l1s * c };
    let mut lo = 1e-14;
    let mut hi = 1.0;
    let mut guard = 0;
    while g(hi) < 0.0 && guard < 100 {
        hi *= 2.0;
        guard += 1;
    }
    if g(hi) < 0.0 || g(lo) > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
