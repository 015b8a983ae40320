//! Shared, validated data model: truncated fractional moment problems on
//! [0,1], solved maximum-entropy densities, and quadrature configuration.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;

/// Relative distance below which two exponents count as duplicates. The
/// Hessian of the dual is exactly singular for repeated exponents, so these
/// are rejected at construction.
pub const ALPHA_DUPLICATE_REL_TOL: f64 = 1e-12;

/// Slack applied to the log-convexity chord test, relative to the magnitude
/// of the values involved.
const LOG_CONVEXITY_SLACK: f64 = 1e-12;

/// A truncated fractional moment problem: find a density f on [0,1] with
/// E[Y^alpha_i] = mu_i for i = 1..K.
///
/// Exponents are stored strictly decreasing; construction sorts pairs and
/// rejects duplicate exponents. Value-domain invariants (positivity, moment
/// ranges, monotonicity, log-convexity) are checked by [`MomentProblem::validate`],
/// which reports rather than fails.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentProblem {
    alphas: Vec<f64>,
    mus: Vec<f64>,
    label: Option<String>,
}

impl MomentProblem {
    /// Builds a problem from exponent/moment pairs, sorting by decreasing
    /// exponent. Fails on structural defects only; see [`MomentProblem::validate`]
    /// for the value-domain invariants.
    pub fn new(alphas: Vec<f64>, mus: Vec<f64>) -> Result<Self, ProblemError> {
        if alphas.is_empty() {
            return Err(ProblemError::Empty);
        }
        if alphas.len() != mus.len() {
            return Err(ProblemError::LengthMismatch {
                alphas: alphas.len(),
                mus: mus.len(),
            });
        }
        for (i, &a) in alphas.iter().enumerate() {
            if !a.is_finite() {
                return Err(ProblemError::NonFinite {
                    what: "alpha",
                    index: i,
                });
            }
        }
        for (i, &m) in mus.iter().enumerate() {
            if !m.is_finite() {
                return Err(ProblemError::NonFinite { what: "mu", index: i });
            }
        }
        let mut pairs: Vec<(f64, f64)> = alphas.into_iter().zip(mus).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        for w in pairs.windows(2) {
            let (hi, lo) = (w[0].0, w[1].0);
            let scale = math::abs(hi).max(math::abs(lo)).max(f64::MIN_POSITIVE);
            if math::abs(hi - lo) <= ALPHA_DUPLICATE_REL_TOL * scale {
                return Err(ProblemError::DuplicateAlpha { alpha: hi });
            }
        }
        let (alphas, mus) = pairs.into_iter().unzip();
        Ok(Self {
            alphas,
            mus,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// The nested sub-problem keeping the first `k` exponent/moment pairs.
    pub fn prefix(&self, k: usize) -> Result<Self, ProblemError> {
        if k == 0 || k > self.len() {
            return Err(ProblemError::BadPrefix {
                k,
                len: self.len(),
            });
        }
        Ok(Self {
            alphas: self.alphas[..k].to_vec(),
            mus: self.mus[..k].to_vec(),
            label: self.label.clone(),
        })
    }

    /// Checks every invariant and reports all violations found. Never fails.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (i, &a) in self.alphas.iter().enumerate() {
            if !(a > 0.0) {
                violations.push(Violation::NonPositiveAlpha { index: i, alpha: a });
            }
        }
        for w in 0..self.alphas.len().saturating_sub(1) {
            if !(self.alphas[w] > self.alphas[w + 1]) {
                violations.push(Violation::AlphaOrder { index: w });
            }
        }
        for (i, &m) in self.mus.iter().enumerate() {
            if !(m > 0.0 && m < 1.0) {
                violations.push(Violation::MomentOutOfRange { index: i, mu: m });
            }
        }
        // y^alpha is decreasing in alpha on (0,1): larger exponent, smaller moment.
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.alphas[i] > self.alphas[j] && !(self.mus[i] < self.mus[j]) {
                    violations.push(Violation::MomentOrder { hi: i, lo: j });
                }
            }
        }
        // Hoelder: ln mu is convex in alpha across consecutive triples.
        for i in 0..self.len().saturating_sub(2) {
            let (a0, a1, a2) = (self.alphas[i], self.alphas[i + 1], self.alphas[i + 2]);
            let ok_domain = self.mus[i..i + 3].iter().all(|&m| m > 0.0 && m < 1.0)
                && a0 > a1
                && a1 > a2
                && a2 > 0.0;
            if !ok_domain {
                continue; // already reported above
            }
            let (l0, l1, l2) = (
                math::ln(self.mus[i]),
                math::ln(self.mus[i + 1]),
                math::ln(self.mus[i + 2]),
            );
            // chord through (a0, l0) and (a2, l2) evaluated at a1
            let t = (a1 - a2) / (a0 - a2);
            let chord = t * l0 + (1.0 - t) * l2;
            let scale = math::abs(l0).max(math::abs(l1)).max(math::abs(l2)).max(1.0);
            if l1 > chord + LOG_CONVEXITY_SLACK * scale {
                violations.push(Violation::LogConvexity {
                    indices: (i, i + 1, i + 2),
                });
            }
        }
        ValidationReport { violations }
    }
}

/// Checks every [`MomentProblem`] invariant; empty report iff all hold.
pub fn validate_problem(p: &MomentProblem) -> ValidationReport {
    p.validate()
}

/// Outcome of validation: the list of violated invariants, possibly empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }
}

impl core::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "all invariants hold");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A violated invariant, naming the offending indices.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("alpha[{index}] = {alpha} is not positive")]
    NonPositiveAlpha { index: usize, alpha: f64 },
    #[error("alphas not strictly decreasing at position {index}")]
    AlphaOrder { index: usize },
    #[error("mu[{index}] = {mu} outside (0,1)")]
    MomentOutOfRange { index: usize, mu: f64 },
    #[error("monotonicity violated at ({hi},{lo}): larger exponent must give smaller moment")]
    MomentOrder { hi: usize, lo: usize },
    #[error("log-convexity violated on triple {indices:?}")]
    LogConvexity { indices: (usize, usize, usize) },
}

/// Structural errors raised when assembling a [`MomentProblem`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("moment problem needs at least one exponent")]
    Empty,
    #[error("{alphas} exponents but {mus} moments")]
    LengthMismatch { alphas: usize, mus: usize },
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("duplicate exponent near {alpha} (singular Hessian)")]
    DuplicateAlpha { alpha: f64 },
    #[error("prefix length {k} invalid for problem of size {len}")]
    BadPrefix { k: usize, len: usize },
    #[error("generated problem fails validation: {0}")]
    Invalid(ValidationReport),
}

/// Tolerances and panel strategy for all integrals on (0,1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Geometric ratio used when refining panels toward y = 0.
    pub endpoint_refinement: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            max_panels: 4096,
            endpoint_refinement: 0.25,
        }
    }
}

impl QuadratureSpec {
    /// Same tolerances scaled by `factor` (< 1 tightens).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(ConfigError("abs_tol"));
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(ConfigError("rel_tol"));
        }
        if self.max_panels < 1 {
            return Err(ConfigError("max_panels"));
        }
        if !(self.endpoint_refinement > 0.0 && self.endpoint_refinement < 1.0) {
            return Err(ConfigError("endpoint_refinement"));
        }
        Ok(())
    }
}

/// A configuration field left its valid range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("configuration field {0} out of range")]
pub struct ConfigError(pub &'static str);

/// A solved maximum-entropy density e^{-<lambda, y^alpha>} / Z on (0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntDensity {
    alphas: Vec<f64>,
    lambdas: Vec<f64>,
    log_z: f64,
    entropy: f64,
    residual: f64,
    iterations: u32,
}

impl MaxEntDensity {
    pub(crate) fn from_parts(
        alphas: Vec<f64>,
        lambdas: Vec<f64>,
        log_z: f64,
        entropy: f64,
        residual: f64,
        iterations: u32,
    ) -> Self {
        debug_assert_eq!(alphas.len(), lambdas.len());
        Self {
            alphas,
            lambdas,
            log_z,
            entropy,
            residual,
            iterations,
        }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// The multipliers lambda*.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// ln Z(lambda*).
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Entropy in nats, from the duality identity ln Z + <lambda, mu>.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    /// Max relative moment mismatch at convergence.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Accepted Newton steps used by the solver.
    pub fn iterations(&self) -> u32 {
        self.iterations
    }
}
