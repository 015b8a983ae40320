//! Adaptive Gauss-Kronrod quadrature on (0,1] and the exponential-family
//! integrals built on it: partition function, moment expectations, and the
//! Hessian of ln Z.
//!
//! Panels adjacent to y = 0 are split geometrically (ratio
//! [`QuadratureSpec::endpoint_refinement`]) instead of bisected, because the
//! integrands carry fractional powers and -ln y factors whose derivatives
//! blow up there. No node ever touches y = 0.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::SymMatrix;
use crate::math;
use crate::problem::QuadratureSpec;

/// Panels are never split below this edge length.
pub const MIN_PANEL_EDGE: f64 = 1e-15;

// 7-point Gauss / 15-point Kronrod pair on [-1, 1]. Positive abscissae only;
// the rule is symmetric. Kronrod nodes at even indices are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// An evaluatable real function on (0,1], flagged when it may have an
/// integrable singularity at y = 0 (logarithmic or y^(a-1)-type).
pub struct Integrand<F> {
    f: F,
    endpoint_singular: bool,
}

impl<F: Fn(f64) -> f64> Integrand<F> {
    /// An integrand smooth up to the left endpoint.
    pub fn smooth(f: F) -> Self {
        Self {
            f,
            endpoint_singular: false,
        }
    }

    /// An integrand with a possible integrable singularity at y = 0.
    pub fn endpoint_singular(f: F) -> Self {
        Self {
            f,
            endpoint_singular: true,
        }
    }

    pub fn is_endpoint_singular(&self) -> bool {
        self.endpoint_singular
    }
}

/// Integral value with the error estimate actually achieved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEstimate {
    pub value: f64,
    pub err_estimate: f64,
}

/// Failures while evaluating an integral.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("panel budget exhausted: value {value} with error estimate {err_estimate}")]
    NoConvergence { value: f64, err_estimate: f64 },
    #[error("integrand returned a non-finite value at y = {y}")]
    NonFinite { y: f64 },
    #[error("exponent range exceeded even after factoring out the maximum")]
    Overflow,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel, QuadError> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let (fl, fr) = if i == 7 {
            let v = f(mid);
            if !v.is_finite() {
                return Err(QuadError::NonFinite { y: mid });
            }
            (v, 0.0)
        } else {
            let yl = mid - half * x;
            let yr = mid + half * x;
            let vl = f(yl);
            if !vl.is_finite() {
                return Err(QuadError::NonFinite { y: yl });
            }
            let vr = f(yr);
            if !vr.is_finite() {
                return Err(QuadError::NonFinite { y: yr });
            }
            (vl, vr)
        };
        let fsum = fl + fr;
        kronrod += wk * fsum;
        // Gauss nodes sit at odd Kronrod indices; the center (i = 7) is one
        // of them, entering once since fr = 0 there.
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    let value = half * kronrod;
    let error = math::abs(half * (kronrod - gauss));
    Ok(Panel {
        a,
        b,
        value,
        error,
    })
}

/// Integrates over (0,1] to the spec tolerance, refining worst panels first.
pub fn integrate<F: Fn(f64) -> f64>(
    integrand: &Integrand<F>,
    spec: &QuadratureSpec,
) -> Result<IntegralEstimate, QuadError> {
    adaptive(&integrand.f, &[], integrand.endpoint_singular, spec)
}

/// As [`integrate`], seeding panel edges at the given interior breakpoints
/// (used for kinked integrands such as |f - g|).
pub(crate) fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    endpoint_singular: bool,
    spec: &QuadratureSpec,
) -> Result<IntegralEstimate, QuadError> {
    adaptive(f, breaks, endpoint_singular, spec)
}

fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    endpoint_singular: bool,
    spec: &QuadratureSpec,
) -> Result<IntegralEstimate, QuadError> {
    let ratio = spec.endpoint_refinement;
    let mut edges: Vec<f64> = vec![0.0, 1.0];
    if endpoint_singular {
        // geometric ladder toward 0: 1, r, r^2, ... down to the edge floor
        let mut e = ratio;
        while e > MIN_PANEL_EDGE {
            edges.push(e);
            e *= ratio;
        }
    }
    edges.extend(breaks.iter().copied().filter(|&x| x > 0.0 && x < 1.0));
    edges.sort_by(f64::total_cmp);
    edges.dedup();

    let mut panels: Vec<Panel> = Vec::with_capacity(spec.max_panels.min(4096));
    for w in edges.windows(2) {
        panels.push(gk15(f, w[0], w[1])?);
    }

    // error mass on panels at the minimum edge, no longer refinable
    let mut frozen_err = 0.0;
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let live_err: f64 = panels.iter().map(|p| p.error).sum();
        let err = live_err + frozen_err;
        let tol = spec.abs_tol.max(spec.rel_tol * math::abs(total));
        if err <= tol {
            break;
        }
        if live_err == 0.0 || panels.len() >= spec.max_panels {
            return Err(QuadError::NoConvergence {
                value: sum_ordered(&mut panels),
                err_estimate: err,
            });
        }
        // worst panel first; ties resolved by left edge for determinism
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| p.error.total_cmp(&q.error).then(q.a.total_cmp(&p.a)))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let Panel { a, b, .. } = panels[worst];
        if b - a <= MIN_PANEL_EDGE {
            frozen_err += panels[worst].error;
            panels[worst].error = 0.0;
            continue;
        }
        let split = if a == 0.0 && endpoint_singular {
            (b * ratio).max(MIN_PANEL_EDGE)
        } else {
            0.5 * (a + b)
        };
        let left = gk15(f, a, split)?;
        let right = gk15(f, split, b)?;
        panels[worst] = left;
        panels.push(right);
    }

    let err = panels.iter().map(|p| p.error).sum::<f64>() + frozen_err;
    Ok(IntegralEstimate {
        value: sum_ordered(&mut panels),
        err_estimate: err,
    })
}

/// Sums panel contributions in left-edge order so the result does not depend
/// on refinement history.
fn sum_ordered(panels: &mut [Panel]) -> f64 {
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    panels.iter().map(|p| p.value).sum()
}

/// ln Z and the moment vector of the exponential family density
/// e^{-<lambda, y^alpha>} / Z(lambda).
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEval {
    pub log_z: f64,
    /// E_lambda[y^alpha_i], componentwise in (0,1).
    pub moments: Vec<f64>,
}

/// Shared machinery for one exponent vector: the exponent scan grid used to
/// factor out the integrand maximum is precomputed once.
pub(crate) struct ExpFamily {
    alphas: Vec<f64>,
    /// (y, y^alpha_1, ..., y^alpha_K) rows of the scan grid.
    scan: Vec<Vec<f64>>,
}

impl ExpFamily {
    pub fn new(alphas: &[f64]) -> Self {
        let mut ys: Vec<f64> = Vec::with_capacity(840);
        ys.push(0.0);
        ys.push(1.0);
        for j in 1..=512 {
            ys.push(j as f64 / 512.0);
        }
        let mut e = 0.5;
        for _ in 0..50 {
            ys.push(e);
            e *= 0.5;
        }
        for j in 1..=255 {
            ys.push(1.0 - j as f64 / 4096.0);
        }
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let scan = ys
            .iter()
            .map(|&y| {
                let mut row = Vec::with_capacity(alphas.len());
                for &a in alphas {
                    row.push(math::powf(y, a));
                }
                row
            })
            .collect();
        Self {
            alphas: alphas.to_vec(),
            scan,
        }
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    #[inline]
    fn phi(&self, y: f64, lambdas: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&l, &a) in lambdas.iter().zip(&self.alphas) {
            acc += l * math::powf(y, a);
        }
        acc
    }

    /// Minimum of <lambda, y^alpha> over the scan grid; exponents are
    /// shifted by this before exponentiating so e^{-(phi - m)} <= ~1.
    fn exponent_shift(&self, lambdas: &[f64]) -> Result<f64, QuadError> {
        let mut m = f64::INFINITY;
        for row in &self.scan {
            let v = math::dot(lambdas, row);
            if !v.is_finite() {
                return Err(QuadError::Overflow);
            }
            m = m.min(v);
        }
        if !m.is_finite() || math::abs(m) > 1e306 {
            return Err(QuadError::Overflow);
        }
        Ok(m)
    }

    /// ln of the unnormalized mass e^{-m} * integral of e^{-(phi - m)}.
    pub fn log_partition(
        &self,
        lambdas: &[f64],
        spec: &QuadratureSpec,
    ) -> Result<f64, QuadError> {
        let m = self.exponent_shift(lambdas)?;
        let d = integrate_with_breaks(
            &|y: f64| math::exp(-(self.phi(y, lambdas) - m)),
            &[],
            true,
            spec,
        )?;
        if !(d.value > 0.0) || !d.value.is_finite() {
            return Err(QuadError::NonFinite { y: f64::NAN });
        }
        Ok(math::ln(d.value) - m)
    }

    pub fn partition(
        &self,
        lambdas: &[f64],
        spec: &QuadratureSpec,
    ) -> Result<PartitionEval, QuadError> {
        let (eval, _) = self.partition_with_mass(lambdas, spec)?;
        Ok(eval)
    }

    fn partition_with_mass(
        &self,
        lambdas: &[f64],
        spec: &QuadratureSpec,
    ) -> Result<(PartitionEval, (f64, f64)), QuadError> {
        debug_assert_eq!(lambdas.len(), self.dim());
        let m = self.exponent_shift(lambdas)?;
        let weight = |y: f64| math::exp(-(self.phi(y, lambdas) - m));
        let d = integrate_with_breaks(&|y: f64| weight(y), &[], true, spec)?;
        if !(d.value > 0.0) || !d.value.is_finite() {
            return Err(QuadError::NonFinite { y: f64::NAN });
        }
        let mut moments = Vec::with_capacity(self.dim());
        for &a in &self.alphas {
            let n = integrate_with_breaks(
                &|y: f64| math::powf(y, a) * weight(y),
                &[],
                true,
                spec,
            )?;
            moments.push(n.value / d.value);
        }
        Ok((
            PartitionEval {
                log_z: math::ln(d.value) - m,
                moments,
            },
            (m, d.value),
        ))
    }

    /// Moments plus the covariance matrix H_ij = E[y^(a_i+a_j)] - E_i E_j,
    /// sharing the weight normalization.
    pub fn moments_and_hessian(
        &self,
        lambdas: &[f64],
        spec: &QuadratureSpec,
    ) -> Result<(PartitionEval, SymMatrix), QuadError> {
        let (eval, (m, dvalue)) = self.partition_with_mass(lambdas, spec)?;
        let weight = |y: f64| math::exp(-(self.phi(y, lambdas) - m));
        let k = self.dim();
        let mut h = SymMatrix::zeros(k);
        for i in 0..k {
            for j in i..k {
                let a = self.alphas[i] + self.alphas[j];
                let n = integrate_with_breaks(
                    &|y: f64| math::powf(y, a) * weight(y),
                    &[],
                    true,
                    spec,
                )?;
                let cross = n.value / dvalue;
                h.set_sym(i, j, cross - eval.moments[i] * eval.moments[j]);
            }
        }
        Ok((eval, h))
    }
}

/// ln Z(lambda) and the moment vector E_lambda[y^alpha], computed with the
/// integrand maximum factored out so large multipliers cannot overflow.
pub fn partition_function(
    lambdas: &[f64],
    alphas: &[f64],
    spec: &QuadratureSpec,
) -> Result<PartitionEval, QuadError> {
    assert_eq!(
        lambdas.len(),
        alphas.len(),
        "lambdas and alphas must have equal length"
    );
    ExpFamily::new(alphas).partition(lambdas, spec)
}

/// Hessian of ln Z: the covariance matrix of (y^alpha_1, ..., y^alpha_K)
/// under the exponential family density. Symmetric positive semidefinite.
pub fn hessian(
    lambdas: &[f64],
    alphas: &[f64],
    spec: &QuadratureSpec,
) -> Result<SymMatrix, QuadError> {
    assert_eq!(
        lambdas.len(),
        alphas.len(),
        "lambdas and alphas must have equal length"
    );
    let (_, h) = ExpFamily::new(alphas).moments_and_hessian(lambdas, spec)?;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn integrates_constant() {
        let est = integrate(&Integrand::smooth(|_| 1.0), &spec()).unwrap();
        assert!((est.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn integrates_log_singularity() {
        // int_0^1 -ln y dy = 1
        let est = integrate(&Integrand::endpoint_singular(|y: f64| -math::ln(y)), &spec()).unwrap();
        assert!((est.value - 1.0).abs() < 1e-11, "got {}", est.value);
    }

    #[test]
    fn integrates_fractional_power() {
        // int_0^1 sqrt(y) dy = 2/3
        let est = integrate(&Integrand::smooth(|y: f64| math::sqrt(y)), &spec()).unwrap();
        assert!((est.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn integrates_inverse_power_singularity() {
        // int_0^1 y^(-1/2) dy = 2; the mass below the panel floor is
        // ~6e-8, so ask for tolerance above that
        let est = integrate(
            &Integrand::endpoint_singular(|y: f64| math::powf(y, -0.5)),
            &QuadratureSpec {
                abs_tol: 1e-7,
                rel_tol: 1e-7,
                ..spec()
            },
        )
        .unwrap();
        assert!((est.value - 2.0).abs() < 1e-6, "got {}", est.value);
    }

    #[test]
    fn steep_inverse_power_exhausts_resolution() {
        // y^(-7/8) has ~1e-2 of its mass below the minimum panel edge;
        // the error estimate must expose that instead of converging
        let err = integrate(
            &Integrand::endpoint_singular(|y: f64| math::powf(y, -0.875)),
            &spec(),
        )
        .unwrap_err();
        match err {
            QuadError::NoConvergence { value, err_estimate } => {
                assert!(value > 7.0 && value < 8.5);
                assert!(err_estimate > 1e-4);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn divergent_integrand_reports_no_convergence() {
        let err = integrate(&Integrand::endpoint_singular(|y: f64| 1.0 / y), &spec()).unwrap_err();
        assert!(matches!(err, QuadError::NoConvergence { .. }));
    }

    #[test]
    fn non_finite_integrand_reports_position() {
        let err = integrate(
            &Integrand::smooth(|y: f64| if y > 0.5 { f64::NAN } else { 1.0 }),
            &spec(),
        )
        .unwrap_err();
        assert!(matches!(err, QuadError::NonFinite { .. }));
    }

    #[test]
    fn partition_at_zero_is_uniform() {
        let alphas = [1.0, 0.5, 0.25];
        let eval = partition_function(&[0.0, 0.0, 0.0], &alphas, &spec()).unwrap();
        assert!(eval.log_z.abs() < 1e-11);
        for (&m, &a) in eval.moments.iter().zip(&alphas) {
            assert!((m - 1.0 / (1.0 + a)).abs() < 1e-11);
        }
    }

    #[test]
    fn partition_closed_form_single_exponent() {
        // lambda = 1, alpha = 1: Z = 1 - e^{-1}
        let eval = partition_function(&[1.0], &[1.0], &spec()).unwrap();
        let expected_log_z = math::ln(1.0 - math::exp(-1.0));
        assert!((eval.log_z - expected_log_z).abs() < 1e-11);
        // E[y] = (1 - 2 e^{-1}) / (1 - e^{-1})
        let expected_m = (1.0 - 2.0 * math::exp(-1.0)) / (1.0 - math::exp(-1.0));
        assert!((eval.moments[0] - expected_m).abs() < 1e-11);
    }

    #[test]
    fn partition_handles_large_negative_multipliers() {
        // mass concentrates at y = 1; factoring the max keeps this finite
        let eval = partition_function(&[-1000.0], &[1.0], &spec()).unwrap();
        assert!(eval.log_z.is_finite());
        assert!(eval.moments[0] > 0.998 && eval.moments[0] < 1.0);
    }

    #[test]
    fn hessian_uniform_variances() {
        let h = hessian(&[0.0], &[1.0], &spec()).unwrap();
        assert!((h.get(0, 0) - 1.0 / 12.0).abs() < 1e-11);
        let h = hessian(&[0.0, 0.0], &[1.0, 0.5], &spec()).unwrap();
        // cov(y, sqrt(y)) under uniform = 2/5 - 1/2 * 2/3 = 1/15
        assert!((h.get(0, 1) - 1.0 / 15.0).abs() < 1e-11);
        assert_eq!(h.get(0, 1), h.get(1, 0));
    }

    #[test]
    fn hessian_matches_moment_jacobian() {
        // central differences of the moment vector, step 1e-5
        let alphas = [1.0, 0.5, 1.0 / 3.0];
        let lambdas = [0.7, -0.3, 0.2];
        let tight = QuadratureSpec {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            ..spec()
        };
        let h = hessian(&lambdas, &alphas, &tight).unwrap();
        let step = 1e-5;
        for j in 0..3 {
            let mut lp = lambdas;
            lp[j] += step;
            let mut lm = lambdas;
            lm[j] -= step;
            let mp = partition_function(&lp, &alphas, &tight).unwrap().moments;
            let mm = partition_function(&lm, &alphas, &tight).unwrap().moments;
            for i in 0..3 {
                // dE_i/dlambda_j = -H_ij
                let fd = (mp[i] - mm[i]) / (2.0 * step);
                assert!(
                    (h.get(i, j) + fd).abs() < 1e-5 * h.get(i, j).abs().max(1e-3),
                    "H[{i}{j}] = {} vs fd {}",
                    h.get(i, j),
                    -fd
                );
            }
        }
    }

    #[test]
    fn moments_decrease_with_exponent() {
        let alphas = [2.0, 1.0, 0.5, 0.125];
        for lams in [[0.0; 4], [1.5, -0.5, 0.3, 0.2], [-2.0, 1.0, -0.5, 3.0]] {
            let eval = partition_function(&lams, &alphas, &spec()).unwrap();
            for w in eval.moments.windows(2) {
                assert!(w[0] < w[1]);
            }
            for &m in &eval.moments {
                assert!(m > 0.0 && m < 1.0);
            }
        }
    }

    #[test]
    fn hessian_passes_jittered_cholesky() {
        let alphas: Vec<f64> = (1..=6).map(|i| 1.0 / i as f64).collect();
        let lambdas = vec![0.5, -1.0, 2.0, -0.5, 0.3, 0.1];
        let h = hessian(&lambdas, &alphas, &spec()).unwrap();
        let jitter = 1e-10 * h.trace();
        let rhs = vec![1.0; 6];
        assert!(h.cholesky_solve(jitter, &rhs).is_ok());
    }
}
