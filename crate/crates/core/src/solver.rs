//! Damped Newton minimization of the dual function
//! Sigma(lambda) = ln Z(lambda) + <lambda, mu> over lambda in R^K.
//!
//! The basis functions y^alpha_i are nearly collinear for slowly decreasing
//! exponent sequences, so the Hessian is severely ill-conditioned and a cold
//! Newton iteration either stalls or wanders into regions where the
//! quadrature loses accuracy. The minimization therefore follows a ridge
//! continuation: minimize Sigma + (ridge/2)|lambda|^2 by damped Newton,
//! shrink the ridge geometrically, and keep going while the moment residual
//! still improves. Cholesky failures escalate a diagonal jitter; steps are
//! globalized by backtracking line search. Convergence is declared on the
//! max relative moment mismatch, and the iterate with the best residual is
//! the one returned.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::problem::{ConfigError, MaxEntDensity, MomentProblem, QuadratureSpec, ValidationReport};
use crate::quadrature::{ExpFamily, QuadError};

/// Inner Newton iterations per ridge rung.
const INNER_STEPS: u32 = 12;
/// Line search floor; a step this small means the rung is exhausted.
const MIN_STEP: f64 = 1e-18;
/// Inner stationarity threshold on the ridge gradient norm.
const INNER_GRAD_TOL: f64 = 1e-13;

/// Solver configuration. Defaults are tuned for fractional moment problems
/// with up to ~8 slowly decreasing exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on max_i |E[y^alpha_i] - mu_i| / mu_i.
    pub residual_tol: f64,
    /// Total accepted Newton steps across all ridge rungs.
    pub max_iterations: u32,
    /// Base diagonal jitter, escalated as jitter_base * 2^k * trace/K on
    /// Cholesky failure.
    pub jitter_base: f64,
    /// Backtracking shrink factor, in (0,1).
    pub ls_shrink: f64,
    /// Armijo sufficient-decrease constant, in (0,1/2).
    pub ls_sufficient_decrease: f64,
    /// Divergence guard: exceeding this multiplier norm without a certified
    /// residual is reported as infeasible.
    pub lambda_cap: f64,
    /// Dual values below this floor indicate the entropy diverging to
    /// -infinity, the signature of a moment vector at or outside the
    /// boundary of the moment set.
    pub entropy_floor: f64,
    /// First ridge weight of the continuation.
    pub ridge_init: f64,
    /// Geometric ridge shrink per rung, in (0,1).
    pub ridge_shrink: f64,
    /// Ridge floor; the ladder stops here.
    pub ridge_min: f64,
    /// Keep relaxing the ridge after certification while each rung improves
    /// the residual by at least this factor.
    pub chase_improvement: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            max_iterations: 200,
            jitter_base: 1e-12,
            ls_shrink: 0.5,
            ls_sufficient_decrease: 1e-4,
            lambda_cap: 1e7,
            entropy_floor: -5.5,
            ridge_init: 1e-4,
            ridge_shrink: 0.1,
            ridge_min: 1e-18,
            chase_improvement: 1.25,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("residual_tol", self.residual_tol),
            ("jitter_base", self.jitter_base),
            ("lambda_cap", self.lambda_cap),
            ("ridge_init", self.ridge_init),
            ("ridge_min", self.ridge_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError(name));
            }
        }
        if self.max_iterations == 0 {
            return Err(ConfigError("max_iterations"));
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return Err(ConfigError("ls_shrink"));
        }
        if !(self.ls_sufficient_decrease > 0.0 && self.ls_sufficient_decrease < 0.5) {
            return Err(ConfigError("ls_sufficient_decrease"));
        }
        if !(self.ridge_shrink > 0.0 && self.ridge_shrink < 1.0) {
            return Err(ConfigError("ridge_shrink"));
        }
        if !(self.chase_improvement > 1.0) {
            return Err(ConfigError("chase_improvement"));
        }
        if !self.entropy_floor.is_finite() {
            return Err(ConfigError("entropy_floor"));
        }
        Ok(())
    }
}

/// One accepted step of the minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: u32,
    /// Dual value ln Z + <lambda, mu>.
    pub sigma: f64,
    /// Objective in force: sigma plus the ridge term. Nonincreasing across
    /// accepted steps by construction.
    pub objective: f64,
    /// Euclidean norm of the dual gradient mu - E[y^alpha].
    pub grad_norm: f64,
    /// Accepted line search step.
    pub step: f64,
    /// Jitter added beyond the ridge to make the Cholesky succeed.
    pub jitter: f64,
    /// Ridge weight in force.
    pub ridge: f64,
    /// Max relative moment mismatch after the step.
    pub residual: f64,
}

/// Per-iteration records of a solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

/// Why a moment vector was declared infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// The dual value crossed the entropy floor while decreasing, the
    /// certificate that the target entropy diverges to -infinity.
    EntropyDiverging,
    /// Multipliers ran past the cap without the residual certifying.
    MultiplierCap,
}

/// Solver failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("problem fails validation: {0}")]
    InvalidProblem(ValidationReport),
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("moment vector outside or on the boundary of the moment set ({reason:?}); sigma = {sigma}, |lambda|_inf = {lambda_norm}, residual = {residual}")]
    Infeasible {
        reason: InfeasibleReason,
        sigma: f64,
        lambda_norm: f64,
        residual: f64,
        iterations: u32,
    },
    #[error("no convergence within {iterations} iterations; best residual {residual}")]
    MaxIterations { residual: f64, iterations: u32 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// The dual function Sigma(lambda, mu) = ln Z(lambda) + <lambda, mu>.
pub fn dual_value(
    lambdas: &[f64],
    problem: &MomentProblem,
    spec: &QuadratureSpec,
) -> Result<f64, SolveError> {
    assert_eq!(lambdas.len(), problem.len(), "dimension mismatch");
    let family = ExpFamily::new(problem.alphas());
    let log_z = family.log_partition(lambdas, spec)?;
    Ok(log_z + math::dot(lambdas, problem.mus()))
}

struct Iterate {
    lambdas: Vec<f64>,
    log_z: f64,
    moments: Vec<f64>,
    residual: f64,
    sigma: f64,
}

fn residual_of(moments: &[f64], mus: &[f64]) -> f64 {
    moments
        .iter()
        .zip(mus)
        .fold(0.0, |m, (&e, &mu)| m.max(math::abs(e - mu) / mu))
}

/// Minimizes the dual and returns the maxent density with the solve trace.
///
/// The returned density satisfies
/// max_i |E[y^alpha_i] - mu_i| / mu_i <= residual_tol, its entropy field is
/// ln Z(lambda*) + <lambda*, mu>, and the gradient of Sigma at the returned
/// point is mu - E[y^alpha] with norm consistent with the residual.
pub fn solve(
    problem: &MomentProblem,
    cfg: &SolverConfig,
    spec: &QuadratureSpec,
) -> Result<(MaxEntDensity, SolveTrace), SolveError> {
    cfg.validate()?;
    spec.validate()?;
    let report = problem.validate();
    if !report.is_valid() {
        return Err(SolveError::InvalidProblem(report));
    }

    let mus = problem.mus();
    let k = problem.len();
    let family = ExpFamily::new(problem.alphas());
    let mut trace = SolveTrace::default();

    let eval_at = |lambdas: &[f64]| -> Result<Iterate, QuadError> {
        let eval = family.partition(lambdas, spec)?;
        let residual = residual_of(&eval.moments, mus);
        let sigma = eval.log_z + math::dot(lambdas, mus);
        Ok(Iterate {
            lambdas: lambdas.to_vec(),
            log_z: eval.log_z,
            moments: eval.moments,
            residual,
            sigma,
        })
    };

    let mut current = eval_at(&vec![0.0; k])?;
    let mut best: Option<Iterate> = None;
    if current.residual <= cfg.residual_tol {
        best = Some(Iterate {
            lambdas: current.lambdas.clone(),
            moments: current.moments.clone(),
            ..current
        });
    }

    let mut ridge = cfg.ridge_init;
    let mut iterations: u32 = 0;
    let mut out_of_budget = false;

    'ladder: loop {
        let rung_start_residual = current.residual;
        'inner: for _ in 0..INNER_STEPS {
            if iterations >= cfg.max_iterations {
                out_of_budget = true;
                break 'ladder;
            }
            // gradient of the ridge objective: (mu - E) + ridge * lambda
            let mut grad: Vec<f64> = mus
                .iter()
                .zip(&current.moments)
                .zip(&current.lambdas)
                .map(|((&mu, &e), &l)| (mu - e) + ridge * l)
                .collect();
            if math::norm2(&grad) <= INNER_GRAD_TOL {
                break 'inner;
            }
            let (_, hess) = match family.moments_and_hessian(&current.lambdas, spec) {
                Ok(v) => v,
                Err(e) => {
                    if best.is_some() {
                        break 'ladder;
                    }
                    return Err(e.into());
                }
            };
            for g in grad.iter_mut() {
                *g = -*g;
            }
            let mut jitter = 0.0;
            let mut direction = None;
            for escalation in 0..60 {
                let shift = ridge + jitter;
                match hess.cholesky_solve(shift, &grad) {
                    Ok(d) => {
                        direction = Some(d);
                        break;
                    }
                    Err(_) => {
                        let scale = hess.trace().max(f64::MIN_POSITIVE) / k as f64;
                        jitter = cfg.jitter_base * libm::exp2(escalation as f64) * scale;
                    }
                }
            }
            let Some(direction) = direction else {
                break 'inner;
            };
            // <grad of objective, d>; grad currently holds its negative
            let slope: f64 = -math::dot(&grad, &direction);
            let objective = current.sigma + 0.5 * ridge * math::dot(&current.lambdas, &current.lambdas);

            let mut step = 1.0;
            let mut accepted: Option<Iterate> = None;
            while step > MIN_STEP {
                let trial: Vec<f64> = current
                    .lambdas
                    .iter()
                    .zip(&direction)
                    .map(|(&l, &d)| l + step * d)
                    .collect();
                match eval_at(&trial) {
                    Ok(it) => {
                        let trial_obj = it.sigma + 0.5 * ridge * math::dot(&it.lambdas, &it.lambdas);
                        if trial_obj <= objective + cfg.ls_sufficient_decrease * step * slope {
                            accepted = Some(it);
                            break;
                        }
                    }
                    Err(_) => {
                        // exponent overflow or lost accuracy at the trial
                        // point: treat as a rejected step
                    }
                }
                step *= cfg.ls_shrink;
            }
            let Some(next) = accepted else {
                break 'inner;
            };
            iterations += 1;
            let grad_norm = {
                let g: Vec<f64> = mus
                    .iter()
                    .zip(&next.moments)
                    .map(|(&mu, &e)| mu - e)
                    .collect();
                math::norm2(&g)
            };
            trace.records.push(TraceRecord {
                iteration: iterations,
                sigma: next.sigma,
                objective: next.sigma + 0.5 * ridge * math::dot(&next.lambdas, &next.lambdas),
                grad_norm,
                step,
                jitter,
                ridge,
                residual: next.residual,
            });
            current = next;
            if best
                .as_ref()
                .map(|b| current.residual < b.residual)
                .unwrap_or(true)
            {
                best = Some(Iterate {
                    lambdas: current.lambdas.clone(),
                    moments: current.moments.clone(),
                    ..current
                });
            }
            if current.sigma < cfg.entropy_floor {
                return Err(SolveError::Infeasible {
                    reason: InfeasibleReason::EntropyDiverging,
                    sigma: current.sigma,
                    lambda_norm: math::norm_inf(&current.lambdas),
                    residual: current.residual,
                    iterations,
                });
            }
            if math::norm_inf(&current.lambdas) > cfg.lambda_cap
                && current.residual > cfg.residual_tol
            {
                return Err(SolveError::Infeasible {
                    reason: InfeasibleReason::MultiplierCap,
                    sigma: current.sigma,
                    lambda_norm: math::norm_inf(&current.lambdas),
                    residual: current.residual,
                    iterations,
                });
            }
        }

        let certified = best
            .as_ref()
            .map(|b| b.residual <= cfg.residual_tol)
            .unwrap_or(false);
        if certified {
            // chase the residual floor while rungs keep paying off
            let improvement = rung_start_residual / current.residual.max(f64::MIN_POSITIVE);
            if improvement < cfg.chase_improvement {
                break 'ladder;
            }
        }
        if ridge <= cfg.ridge_min {
            break 'ladder;
        }
        ridge = (ridge * cfg.ridge_shrink).max(cfg.ridge_min);
    }

    match best {
        Some(b) if b.residual <= cfg.residual_tol => {
            let entropy = b.log_z + math::dot(&b.lambdas, mus);
            let density = MaxEntDensity::from_parts(
                problem.alphas().to_vec(),
                b.lambdas,
                b.log_z,
                entropy,
                b.residual,
                iterations,
            );
            Ok((density, trace))
        }
        _ => {
            let residual = best.map(|b| b.residual).unwrap_or(current.residual);
            let _ = out_of_budget;
            Err(SolveError::MaxIterations {
                residual,
                iterations,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn harmonic(k: usize) -> Vec<f64> {
        (1..=k).map(|n| 1.0 / n as f64).collect()
    }

    #[test]
    fn uniform_moments_solve_to_zero_multipliers() {
        let alphas = harmonic(8);
        let mus: Vec<f64> = alphas.iter().map(|a| 1.0 / (1.0 + a)).collect();
        let p = MomentProblem::new(alphas, mus).unwrap();
        let (d, trace) = solve(&p, &SolverConfig::default(), &spec()).unwrap();
        assert!(math::norm_inf(d.lambdas()) <= 1e-6);
        assert!(d.entropy().abs() <= 1e-8);
        assert_eq!(d.iterations(), 0);
        assert!(trace.records.is_empty());
    }

    #[test]
    fn single_exponent_inverts_forward_map() {
        // mu = (1 - 2e^{-1})/(1 - e^{-1}) is the moment at lambda = 1
        let mu = (1.0 - 2.0 * math::exp(-1.0)) / (1.0 - math::exp(-1.0));
        let p = MomentProblem::new(vec![1.0], vec![mu]).unwrap();
        let (d, _) = solve(&p, &SolverConfig::default(), &spec()).unwrap();
        assert!(
            (d.lambdas()[0] - 1.0).abs() < 1e-4,
            "lambda = {}",
            d.lambdas()[0]
        );
        let expected_log_z = math::ln(1.0 - math::exp(-1.0));
        assert!((d.log_z() - expected_log_z).abs() < 1e-6);
    }

    #[test]
    fn near_boundary_moment_is_infeasible() {
        let p = MomentProblem::new(vec![1.0], vec![0.999]).unwrap();
        let err = solve(&p, &SolverConfig::default(), &spec()).unwrap_err();
        match err {
            SolveError::Infeasible { sigma, .. } => {
                assert!(sigma < -5.0, "sigma = {sigma}");
            }
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn dual_value_examples() {
        let p = MomentProblem::new(vec![1.0], vec![0.5]).unwrap();
        assert!(dual_value(&[0.0], &p, &spec()).unwrap().abs() < 1e-11);
        let v = dual_value(&[1.0], &p, &spec()).unwrap();
        let expected = math::ln(1.0 - math::exp(-1.0)) + 0.5;
        assert!((v - expected).abs() < 1e-11);
    }

    #[test]
    fn invalid_problem_is_rejected() {
        let p = MomentProblem::new(vec![1.0, 0.5], vec![2.0 / 3.0, 0.5]).unwrap();
        assert!(matches!(
            solve(&p, &SolverConfig::default(), &spec()),
            Err(SolveError::InvalidProblem(_))
        ));
    }

    #[test]
    fn trace_objective_is_nonincreasing() {
        // Gamma(2,1) moments, K=4: mu = (1+alpha)^{-2}
        let alphas = harmonic(4);
        let mus: Vec<f64> = alphas.iter().map(|a| 1.0 / ((1.0 + a) * (1.0 + a))).collect();
        let p = MomentProblem::new(alphas, mus).unwrap();
        let (d, trace) = solve(&p, &SolverConfig::default(), &spec()).unwrap();
        assert!(d.residual() <= 1e-8);
        assert!(!trace.records.is_empty());
        for w in trace.records.windows(2) {
            if w[0].ridge == w[1].ridge {
                assert!(
                    w[1].objective <= w[0].objective + 1e-12,
                    "objective rose within a rung: {} -> {}",
                    w[0].objective,
                    w[1].objective
                );
            }
        }
        // sigma at the end equals the stored entropy
        let last = trace.records.last().unwrap();
        assert!((last.sigma - d.entropy()).abs() < 1e-9);
    }

    #[test]
    fn gamma_k4_matches_reference_multipliers() {
        // Reference from an independent high-accuracy run of the same
        // minimization (SciPy quadrature + Newton), residual < 1e-11.
        let alphas = harmonic(4);
        let mus: Vec<f64> = alphas.iter().map(|a| 1.0 / ((1.0 + a) * (1.0 + a))).collect();
        let p = MomentProblem::new(alphas, mus).unwrap();
        let (d, _) = solve(&p, &SolverConfig::default(), &spec()).unwrap();
        let reference = [13.858, -64.091, 116.580, -63.514];
        for (l, r) in d.lambdas().iter().zip(&reference) {
            assert!((l - r).abs() < 0.05, "{l} vs {r}");
        }
        assert!((d.entropy() - (-0.4189763314)).abs() < 1e-7);
    }

    #[test]
    fn solved_moments_reproduce_input() {
        let alphas = harmonic(4);
        let mus: Vec<f64> = alphas.iter().map(|a| 1.0 / ((1.0 + a) * (1.0 + a))).collect();
        let p = MomentProblem::new(alphas.clone(), mus.clone()).unwrap();
        let (d, _) = solve(&p, &SolverConfig::default(), &spec()).unwrap();
        // fresh, tighter quadrature
        let tight = spec().scaled(0.1);
        let eval = crate::quadrature::partition_function(d.lambdas(), &alphas, &tight).unwrap();
        for (e, m) in eval.moments.iter().zip(&mus) {
            assert!((e - m).abs() / m <= 1e-8, "moment mismatch {e} vs {m}");
        }
    }

    #[test]
    fn dual_gradient_matches_finite_differences() {
        let alphas = harmonic(3);
        let mus: Vec<f64> = alphas.iter().map(|a| 1.0 / ((1.0 + a) * (1.0 + a))).collect();
        let p = MomentProblem::new(alphas.clone(), mus).unwrap();
        let tight = QuadratureSpec {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            ..spec()
        };
        let lambdas = [0.4, -0.8, 1.3];
        let eval = crate::quadrature::partition_function(&lambdas, &alphas, &tight).unwrap();
        let step = 1e-5;
        for j in 0..3 {
            let mut lp = lambdas;
            lp[j] += step;
            let mut lm = lambdas;
            lm[j] -= step;
            let fd = (dual_value(&lp, &p, &tight).unwrap() - dual_value(&lm, &p, &tight).unwrap())
                / (2.0 * step);
            let analytic = p.mus()[j] - eval.moments[j];
            assert!(
                (fd - analytic).abs() < 1e-5 * analytic.abs().max(1.0),
                "grad[{j}]: fd {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn minimum_is_locally_minimal() {
        // Sigma at lambda* is below Sigma at 100 nearby points
        let alphas = harmonic(2);
        let mus: Vec<f64> = alphas.iter().map(|a| 1.0 / ((1.0 + a) * (1.0 + a))).collect();
        let p = MomentProblem::new(alphas, mus).unwrap();
        let (d, _) = solve(&p, &SolverConfig::default(), &spec()).unwrap();
        let s_star = dual_value(d.lambdas(), &p, &spec()).unwrap();
        // deterministic direction sweep of norm 1e-2
        for i in 0..100 {
            let angle = core::f64::consts::PI * (i as f64) / 50.0;
            let delta = [1e-2 * libm::cos(angle), 1e-2 * libm::sin(angle)];
            let lam = [d.lambdas()[0] + delta[0], d.lambdas()[1] + delta[1]];
            let s = dual_value(&lam, &p, &spec()).unwrap();
            assert!(s >= s_star - 1e-12, "direction {i}: {s} < {s_star}");
        }
    }
}
