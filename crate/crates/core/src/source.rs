//! Produces moment problems: from analytic laws via their Laplace
//! transforms, or from empirical samples. Owns the change of variables
//! between the half-line variable s and the unit-interval variable
//! y = e^{-s} on the input side.

use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::problem::{MomentProblem, ProblemError, QuadratureSpec};
use crate::quadrature::{integrate, Integrand, QuadError};

const SQRT_2PI: f64 = 2.506628274631000502415765284811;

/// Minimum sample count accepted by [`empirical_problem`].
pub const MIN_SAMPLES: usize = 100;

/// A nonnegative source law, given through its density on [0, infinity).
#[derive(Debug, Clone, PartialEq)]
pub enum SourceLaw {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    LogNormal { mu_log: f64, sigma_log: f64 },
    /// Weighted components; weights must be nonnegative and sum to one.
    Mixture(Vec<(f64, SourceLaw)>),
}

impl SourceLaw {
    pub fn validate(&self) -> Result<(), SourceError> {
        match self {
            SourceLaw::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(SourceError::InvalidParameter {
                        what: "exponential rate",
                        value: *rate,
                    });
                }
            }
            SourceLaw::Gamma { shape, rate } => {
                if !(shape.is_finite() && *shape > 0.0) {
                    return Err(SourceError::InvalidParameter {
                        what: "gamma shape",
                        value: *shape,
                    });
                }
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(SourceError::InvalidParameter {
                        what: "gamma rate",
                        value: *rate,
                    });
                }
            }
            SourceLaw::LogNormal { mu_log, sigma_log } => {
                if !mu_log.is_finite() {
                    return Err(SourceError::InvalidParameter {
                        what: "lognormal mu",
                        value: *mu_log,
                    });
                }
                if !(sigma_log.is_finite() && *sigma_log > 0.0) {
                    return Err(SourceError::InvalidParameter {
                        what: "lognormal sigma",
                        value: *sigma_log,
                    });
                }
            }
            SourceLaw::Mixture(parts) => {
                if parts.is_empty() {
                    return Err(SourceError::EmptyMixture);
                }
                let mut total = 0.0;
                for (w, law) in parts {
                    if !(w.is_finite() && *w >= 0.0) {
                        return Err(SourceError::InvalidParameter {
                            what: "mixture weight",
                            value: *w,
                        });
                    }
                    total += w;
                    law.validate()?;
                }
                if math::abs(total - 1.0) > 1e-12 {
                    return Err(SourceError::WeightSum { total });
                }
            }
        }
        Ok(())
    }

    /// The density f_S(s) on [0, infinity).
    pub fn density_s(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match self {
            SourceLaw::Exponential { rate } => rate * math::exp(-rate * s),
            SourceLaw::Gamma { shape, rate } => {
                if s == 0.0 {
                    // finite only for shape >= 1
                    return if *shape > 1.0 {
                        0.0
                    } else if *shape == 1.0 {
                        *rate
                    } else {
                        f64::INFINITY
                    };
                }
                math::exp(
                    shape * math::ln(*rate) + (shape - 1.0) * math::ln(s) - rate * s
                        - math::ln_gamma(*shape),
                )
            }
            SourceLaw::LogNormal { mu_log, sigma_log } => {
                if s == 0.0 {
                    return 0.0;
                }
                let z = (math::ln(s) - mu_log) / sigma_log;
                math::exp(-0.5 * z * z) / (s * sigma_log * SQRT_2PI)
            }
            SourceLaw::Mixture(parts) => parts.iter().map(|(w, l)| w * l.density_s(s)).sum(),
        }
    }

    /// The image density f_Y(y) = f_S(-ln y) / y of Y = e^{-S} on (0,1].
    pub fn density_y(&self, y: f64) -> f64 {
        if !(y > 0.0 && y <= 1.0) {
            return 0.0;
        }
        self.density_s(-math::ln(y)) / y
    }

    /// E[e^{-alpha S}], the Laplace transform at a positive real point;
    /// equal to the fractional moment E[Y^alpha].
    ///
    /// Closed forms for Exponential and Gamma; LogNormal integrates
    /// f_S(-ln(u)/alpha)/alpha over (0,1], the e^{-s} substitution applied
    /// to the scaled variable alpha*s so the integrand stays bounded.
    pub fn laplace_at(&self, alpha: f64, spec: &QuadratureSpec) -> Result<f64, SourceError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(SourceError::InvalidParameter {
                what: "transform point alpha",
                value: alpha,
            });
        }
        match self {
            SourceLaw::Exponential { rate } => Ok(rate / (rate + alpha)),
            SourceLaw::Gamma { shape, rate } => {
                Ok(math::exp(*shape * math::ln(rate / (rate + alpha))))
            }
            SourceLaw::LogNormal { .. } => {
                let est = integrate(
                    &Integrand::endpoint_singular(|u: f64| {
                        self.density_s(-math::ln(u) / alpha) / alpha
                    }),
                    spec,
                )?;
                Ok(est.value)
            }
            SourceLaw::Mixture(parts) => {
                let mut acc = 0.0;
                for (w, law) in parts {
                    acc += w * law.laplace_at(alpha, spec)?;
                }
                Ok(acc)
            }
        }
    }
}

/// How the exponent sequence alpha_1 > alpha_2 > ... is generated.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSchemeKind {
    /// alpha_n = 1/n.
    Harmonic,
    /// alpha_n = c/n.
    Scaled(f64),
    /// A fixed strictly decreasing list of positive exponents.
    Explicit(Vec<f64>),
}

/// An exponent scheme together with the number of terms to take. Harmonic
/// and Scaled extend to sequences with alpha_n -> 0 and divergent sum, the
/// determinacy conditions for the moment problem on [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaScheme {
    kind: AlphaSchemeKind,
    count: usize,
}

impl AlphaScheme {
    pub fn new(kind: AlphaSchemeKind, count: usize) -> Result<Self, SourceError> {
        if count == 0 {
            return Err(SourceError::EmptyScheme);
        }
        match &kind {
            AlphaSchemeKind::Harmonic => {}
            AlphaSchemeKind::Scaled(c) => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(SourceError::InvalidParameter {
                        what: "scheme scale",
                        value: *c,
                    });
                }
            }
            AlphaSchemeKind::Explicit(list) => {
                if list.len() < count {
                    return Err(SourceError::SchemeTooShort {
                        have: list.len(),
                        need: count,
                    });
                }
                for &a in list {
                    if !(a.is_finite() && a > 0.0) {
                        return Err(SourceError::InvalidParameter {
                            what: "explicit exponent",
                            value: a,
                        });
                    }
                }
                for w in list.windows(2) {
                    if !(w[0] > w[1]) {
                        return Err(SourceError::SchemeNotDecreasing);
                    }
                }
            }
        }
        Ok(Self { kind, count })
    }

    pub fn harmonic(count: usize) -> Result<Self, SourceError> {
        Self::new(AlphaSchemeKind::Harmonic, count)
    }

    pub fn scaled(c: f64, count: usize) -> Result<Self, SourceError> {
        Self::new(AlphaSchemeKind::Scaled(c), count)
    }

    pub fn explicit(list: Vec<f64>) -> Result<Self, SourceError> {
        let count = list.len();
        Self::new(AlphaSchemeKind::Explicit(list), count)
    }

    pub fn kind(&self) -> &AlphaSchemeKind {
        &self.kind
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The first `self.count()` exponents.
    pub fn alphas(&self) -> Vec<f64> {
        self.alphas_prefix(self.count)
    }

    /// The first `k <= count` exponents; prefixes are nested by construction.
    pub fn alphas_prefix(&self, k: usize) -> Vec<f64> {
        debug_assert!(k >= 1 && k <= self.count);
        match &self.kind {
            AlphaSchemeKind::Harmonic => (1..=k).map(|n| 1.0 / n as f64).collect(),
            AlphaSchemeKind::Scaled(c) => (1..=k).map(|n| c / n as f64).collect(),
            AlphaSchemeKind::Explicit(list) => list[..k].to_vec(),
        }
    }
}

/// Builds the moment problem of a law under the given scheme:
/// mu_i = E[Y^alpha_i] = E[e^{-alpha_i S}]. The output passes validation.
pub fn make_problem(
    law: &SourceLaw,
    scheme: &AlphaScheme,
    spec: &QuadratureSpec,
) -> Result<MomentProblem, SourceError> {
    law.validate()?;
    let alphas = scheme.alphas();
    let mut mus = Vec::with_capacity(alphas.len());
    for &a in &alphas {
        mus.push(law.laplace_at(a, spec)?);
    }
    let problem = MomentProblem::new(alphas, mus)?;
    let report = problem.validate();
    if !report.is_valid() {
        return Err(SourceError::Problem(ProblemError::Invalid(report)));
    }
    Ok(problem)
}

/// Plug-in fractional moments of a sample: mu_i = (1/N) sum_j e^{-alpha_i s_j},
/// accumulated with compensated summation. The output passes validation;
/// degenerate samples (all zero) are rejected there.
pub fn empirical_problem(
    samples: &[f64],
    scheme: &AlphaScheme,
) -> Result<MomentProblem, SourceError> {
    if samples.len() < MIN_SAMPLES {
        return Err(SourceError::TooFewSamples {
            have: samples.len(),
            need: MIN_SAMPLES,
        });
    }
    for (i, &s) in samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(SourceError::NonFiniteSample { index: i, value: s });
        }
        if s < 0.0 {
            return Err(SourceError::NegativeSample { index: i, value: s });
        }
    }
    let alphas = scheme.alphas();
    // one pass over the samples, Neumaier-compensated per exponent
    let mut sums = alloc::vec![0.0f64; alphas.len()];
    let mut comps = alloc::vec![0.0f64; alphas.len()];
    for &s in samples {
        for (i, &a) in alphas.iter().enumerate() {
            let term = math::exp(-a * s);
            let t = sums[i] + term;
            comps[i] += if math::abs(sums[i]) >= math::abs(term) {
                (sums[i] - t) + term
            } else {
                (term - t) + sums[i]
            };
            sums[i] = t;
        }
    }
    let n = samples.len() as f64;
    let mus: Vec<f64> = sums
        .iter()
        .zip(&comps)
        .map(|(s, c)| (s + c) / n)
        .collect();
    let problem = MomentProblem::new(alphas, mus)?;
    let report = problem.validate();
    if !report.is_valid() {
        return Err(SourceError::Problem(ProblemError::Invalid(report)));
    }
    Ok(problem)
}

/// Failures while producing a moment problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("invalid {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
    #[error("mixture has no components")]
    EmptyMixture,
    #[error("mixture weights sum to {total}, expected 1")]
    WeightSum { total: f64 },
    #[error("scheme requests zero exponents")]
    EmptyScheme,
    #[error("explicit scheme has {have} exponents, {need} requested")]
    SchemeTooShort { have: usize, need: usize },
    #[error("explicit exponents must be strictly decreasing")]
    SchemeNotDecreasing,
    #[error("need at least {need} samples, got {have}")]
    TooFewSamples { have: usize, need: usize },
    #[error("negative sample at index {index}: {value}")]
    NegativeSample { index: usize, value: f64 },
    #[error("non-finite sample at index {index}: {value}")]
    NonFiniteSample { index: usize, value: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}
