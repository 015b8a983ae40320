//! Evaluates solved densities in y-space and s-space, computes the
//! entropy / Kullback / L1 functionals, and runs the nested-K
//! superresolution sweep.

use alloc::vec::Vec;

use thiserror::Error;

use crate::math;
use crate::problem::{MaxEntDensity, MomentProblem, ProblemError, QuadratureSpec};
use crate::quadrature::{integrate_with_breaks, partition_function, QuadError};
use crate::solver::{solve, SolveError, SolverConfig};
use crate::source::{make_problem, AlphaScheme, SourceError, SourceLaw};

/// Tables must integrate to one within this tolerance over their space.
pub const TABLE_NORMALIZATION_TOL: f64 = 1e-6;

/// Default truncation point for s-space integrals and tables.
pub const DEFAULT_S_MAX: f64 = 50.0;

/// A density on (0,1] that the functionals below can integrate.
///
/// `eval_y` is only called at interior quadrature nodes, never at 0.
pub trait Density {
    fn eval_y(&self, y: f64) -> f64;

    /// ln of the density; overridden where a stable closed form exists.
    fn log_eval_y(&self, y: f64) -> f64 {
        math::ln(self.eval_y(y))
    }

    /// Whether integrands built on this density should be treated as
    /// endpoint-singular at y = 0.
    fn endpoint_singular(&self) -> bool {
        true
    }
}

impl<F: Fn(f64) -> f64> Density for F {
    fn eval_y(&self, y: f64) -> f64 {
        self(y)
    }
}

impl Density for MaxEntDensity {
    fn eval_y(&self, y: f64) -> f64 {
        math::exp(self.log_eval_y(y))
    }

    fn log_eval_y(&self, y: f64) -> f64 {
        let mut phi = 0.0;
        for (&l, &a) in self.lambdas().iter().zip(self.alphas()) {
            phi += l * math::powf(y, a);
        }
        -phi - self.log_z()
    }
}

impl Density for SourceLaw {
    fn eval_y(&self, y: f64) -> f64 {
        self.density_y(y)
    }
}

impl MaxEntDensity {
    /// Normalizes e^{-<lambda, y^alpha>} by quadrature and packages it as a
    /// solved density; the entropy field is ln Z + <lambda, E[y^alpha]>.
    pub fn from_multipliers(
        alphas: Vec<f64>,
        lambdas: Vec<f64>,
        spec: &QuadratureSpec,
    ) -> Result<Self, DiagnosticsError> {
        if alphas.len() != lambdas.len() || alphas.is_empty() {
            return Err(DiagnosticsError::DimensionMismatch {
                alphas: alphas.len(),
                lambdas: lambdas.len(),
            });
        }
        let eval = partition_function(&lambdas, &alphas, spec)?;
        let entropy = eval.log_z + math::dot(&lambdas, &eval.moments);
        Ok(Self::from_parts(alphas, lambdas, eval.log_z, entropy, 0.0, 0))
    }

    /// Pointwise density in y-space, from the stored multipliers and ln Z.
    pub fn density_y(&self, y: f64) -> Result<f64, DiagnosticsError> {
        if !(y > 0.0 && y <= 1.0) {
            return Err(DiagnosticsError::DomainY(y));
        }
        Ok(self.eval_y(y))
    }

    /// Pointwise density of S = -ln Y: f_S(s) = e^{-s} f_Y(e^{-s}).
    pub fn density_s(&self, s: f64) -> Result<f64, DiagnosticsError> {
        if !(s >= 0.0) {
            return Err(DiagnosticsError::DomainS(s));
        }
        let y = math::exp(-s);
        Ok(y * self.eval_y(y))
    }

    /// Samples the density on a uniform y-grid (i/n for i = 1..n), after
    /// verifying normalization by quadrature.
    pub fn table_y(&self, n: usize, spec: &QuadratureSpec) -> Result<DensityTable, DiagnosticsError> {
        if n < 2 {
            return Err(DiagnosticsError::GridTooSmall(n));
        }
        let mass = integrate_with_breaks(&|y: f64| self.eval_y(y), &[], true, spec)?;
        if math::abs(mass.value - 1.0) > TABLE_NORMALIZATION_TOL {
            return Err(DiagnosticsError::NotNormalized(mass.value));
        }
        let mut grid = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for i in 1..=n {
            let y = i as f64 / n as f64;
            grid.push(y);
            values.push(self.eval_y(y));
        }
        DensityTable::new(Space::Y, grid, values, None)
    }

    /// Samples f_S on a uniform s-grid over [0, s_max], reporting the mass
    /// beyond the truncation point.
    pub fn table_s(
        &self,
        n: usize,
        s_max: f64,
        spec: &QuadratureSpec,
    ) -> Result<DensityTable, DiagnosticsError> {
        if n < 2 {
            return Err(DiagnosticsError::GridTooSmall(n));
        }
        if !(s_max > 0.0) || !s_max.is_finite() {
            return Err(DiagnosticsError::DomainS(s_max));
        }
        // mass on [0, s_max] equals the y-mass on [e^{-s_max}, 1]
        let y_cut = math::exp(-s_max);
        let mass = integrate_with_breaks(
            &|y: f64| if y >= y_cut { self.eval_y(y) } else { 0.0 },
            &[],
            true,
            spec,
        )?;
        let tail = y_cut * self.eval_y(y_cut);
        if math::abs(mass.value + tail - 1.0) > TABLE_NORMALIZATION_TOL {
            return Err(DiagnosticsError::NotNormalized(mass.value + tail));
        }
        let mut grid = Vec::with_capacity(n + 1);
        let mut values = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let s = s_max * j as f64 / n as f64;
            grid.push(s);
            values.push(y_cut.max(math::exp(-s)) * self.eval_y(math::exp(-s)));
        }
        // grid point 0 maps to y = 1 exactly
        values[0] = self.eval_y(1.0);
        DensityTable::new(Space::S, grid, values, Some(tail))
    }
}

/// Which variable a table is sampled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// The unit interval (0,1].
    Y,
    /// The nonnegative half-line, truncated for tables.
    S,
}

/// Sampled density values for export.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    space: Space,
    grid: Vec<f64>,
    values: Vec<f64>,
    /// For s-space tables: estimated mass beyond the truncation point.
    tail_mass: Option<f64>,
}

impl DensityTable {
    pub fn new(
        space: Space,
        grid: Vec<f64>,
        values: Vec<f64>,
        tail_mass: Option<f64>,
    ) -> Result<Self, DiagnosticsError> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(DiagnosticsError::BadTable);
        }
        for w in grid.windows(2) {
            if !(w[0] < w[1]) {
                return Err(DiagnosticsError::BadTable);
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DiagnosticsError::BadTable);
        }
        Ok(Self {
            space,
            grid,
            values,
            tail_mass,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_mass(&self) -> Option<f64> {
        self.tail_mass
    }

    /// Linear interpolation on the grid, with constant extension outside.
    pub fn interpolate(&self, x: f64) -> f64 {
        let grid = &self.grid;
        if x <= grid[0] {
            return self.values[0];
        }
        if x >= grid[grid.len() - 1] {
            return self.values[grid.len() - 1];
        }
        let mut hi = grid.partition_point(|&g| g < x);
        if hi == 0 {
            hi = 1;
        }
        let lo = hi - 1;
        let t = (x - grid[lo]) / (grid[hi] - grid[lo]);
        self.values[lo] + t * (self.values[hi] - self.values[lo])
    }

    /// A view usable with the density functionals; y-space tables only.
    pub fn as_y_density(&self) -> Result<TableDensity<'_>, DiagnosticsError> {
        if self.space != Space::Y {
            return Err(DiagnosticsError::WrongSpace);
        }
        Ok(TableDensity { table: self })
    }
}

/// Interpolating view of a y-space [`DensityTable`].
pub struct TableDensity<'a> {
    table: &'a DensityTable,
}

impl Density for TableDensity<'_> {
    fn eval_y(&self, y: f64) -> f64 {
        self.table.interpolate(y)
    }

    fn endpoint_singular(&self) -> bool {
        false
    }
}

/// Shannon entropy -int f ln f in nats, with 0 ln 0 = 0.
pub fn entropy<D: Density + ?Sized>(
    f: &D,
    spec: &QuadratureSpec,
) -> Result<f64, DiagnosticsError> {
    let est = integrate_with_breaks(
        &|y: f64| {
            let v = f.eval_y(y);
            if v > 0.0 {
                -v * f.log_eval_y(y)
            } else {
                0.0
            }
        },
        &[],
        f.endpoint_singular(),
        spec,
    )?;
    Ok(est.value)
}

/// Kullback divergence K(f,g) = int f ln(f/g). Nonnegative; +infinity when
/// g vanishes where f has mass (support mismatch).
pub fn kullback<F: Density + ?Sized, G: Density + ?Sized>(
    f: &F,
    g: &G,
    spec: &QuadratureSpec,
) -> Result<f64, DiagnosticsError> {
    let mismatch = |y: f64| g.eval_y(y) <= 0.0 && f.eval_y(y) > 1e-300;
    for i in 1..=1024 {
        let y = i as f64 / 1024.0;
        if mismatch(y) {
            return Ok(f64::INFINITY);
        }
    }
    let singular = f.endpoint_singular() || g.endpoint_singular();
    let result = integrate_with_breaks(
        &|y: f64| {
            let fv = f.eval_y(y);
            if fv > 0.0 {
                fv * (f.log_eval_y(y) - g.log_eval_y(y))
            } else {
                0.0
            }
        },
        &[],
        singular,
        spec,
    );
    match result {
        Ok(est) => Ok(est.value),
        Err(QuadError::NonFinite { y }) if y.is_finite() && mismatch(y) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

/// L1 distance int |f - g| dy, with panels split at detected sign changes
/// of f - g.
pub fn l1_distance<F: Density + ?Sized, G: Density + ?Sized>(
    f: &F,
    g: &G,
    spec: &QuadratureSpec,
) -> Result<f64, DiagnosticsError> {
    let diff = |y: f64| f.eval_y(y) - g.eval_y(y);
    let breaks = sign_changes(&diff);
    let singular = f.endpoint_singular() || g.endpoint_singular();
    let est = integrate_with_breaks(&|y: f64| math::abs(diff(y)), &breaks, singular, spec)?;
    Ok(est.value)
}

/// Locates roots of h on (0,1] by scanning a mixed log/linear grid and
/// bisecting each sign-change bracket.
fn sign_changes<H: Fn(f64) -> f64>(h: &H) -> Vec<f64> {
    let mut grid: Vec<f64> = Vec::with_capacity(1664);
    let mut y = 1e-15;
    while y < 1e-2 {
        grid.push(y);
        y *= 1.2589254117941673; // 10^(1/10)
    }
    for i in 1..=1536 {
        grid.push(0.01 + 0.99 * i as f64 / 1536.0);
    }
    let mut roots = Vec::new();
    let mut prev = (grid[0], h(grid[0]));
    for &y in &grid[1..] {
        let v = h(y);
        if prev.1 != 0.0 && v != 0.0 && (prev.1 < 0.0) != (v < 0.0) {
            let (mut a, mut b) = (prev.0, y);
            let mut fa = prev.1;
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                let fm = h(mid);
                if fm == 0.0 {
                    a = mid;
                    break;
                }
                if (fa < 0.0) != (fm < 0.0) {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = (y, v);
    }
    roots
}

/// Input to the superresolution sweep: a law (truth known, so distances to
/// it can be reported) or a bare moment problem.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepInput {
    Law(SourceLaw),
    Problem(MomentProblem),
}

/// Per-K outcome of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub entropy: Option<f64>,
    /// S(f_K_prev) - S(f_K) for this row and the previous successful,
    /// consecutive row.
    pub gap_from_prev: Option<f64>,
    /// sqrt(2 * gap): the L1 bound implied by the divergence inequality.
    pub l1_bound: Option<f64>,
    /// Quadrature L1 distance between this solution and the previous one.
    pub l1_direct: Option<f64>,
    /// L1 distance to the known source density, when the input is a law.
    pub l1_to_truth: Option<f64>,
    pub solution: Option<MaxEntDensity>,
    pub error: Option<SolveError>,
}

/// Entropies, gaps, and L1 diagnostics across nested moment subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn rows(&self) -> &[SweepRow] {
        &self.rows
    }

    pub fn k_values(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.k).collect()
    }

    /// Count of K values that solved.
    pub fn solved(&self) -> usize {
        self.rows.iter().filter(|r| r.solution.is_some()).count()
    }
}

/// Sweep failures (per-K solver errors are recorded in rows instead).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("k values must be nonempty, positive, and strictly increasing")]
    BadKValues,
    #[error("k = {k} exceeds the scheme count {count}")]
    KExceedsScheme { k: usize, count: usize },
    #[error("k = {k} exceeds the problem size {len}")]
    KExceedsProblem { k: usize, len: usize },
    #[error("scheme prefixes are not nested")]
    NonNested,
    #[error("problem exponents do not match the scheme")]
    SchemeMismatch,
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Solves each truncated problem K in `k_values` and fills a [`SweepReport`]
/// with entropies, entropy gaps, L1 bounds, and direct L1 distances; when
/// the input is a law, distances to the true density are included.
///
/// The scheme must generate nested prefixes (each K-exponent set a prefix of
/// the next) so that consecutive solutions share their first K moments —
/// the entropy gaps are meaningless otherwise. Per-K solver failures are
/// recorded in their row and do not abort the sweep.
pub fn sweep(
    input: &SweepInput,
    scheme: &AlphaScheme,
    k_values: &[usize],
    cfg: &SolverConfig,
    spec: &QuadratureSpec,
) -> Result<SweepReport, SweepError> {
    if k_values.is_empty() || k_values[0] == 0 {
        return Err(SweepError::BadKValues);
    }
    if k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SweepError::BadKValues);
    }
    let max_k = *k_values.last().expect("nonempty");
    if max_k > scheme.count() {
        return Err(SweepError::KExceedsScheme {
            k: max_k,
            count: scheme.count(),
        });
    }
    // nestedness: every prefix must agree with the full sequence
    let full_alphas = scheme.alphas_prefix(max_k);
    for &k in k_values {
        if scheme.alphas_prefix(k) != full_alphas[..k] {
            return Err(SweepError::NonNested);
        }
    }

    let full_problem = match input {
        SweepInput::Law(law) => {
            let truncated = AlphaScheme::new(scheme.kind().clone(), max_k)?;
            make_problem(law, &truncated, spec)?
        }
        SweepInput::Problem(p) => {
            if max_k > p.len() {
                return Err(SweepError::KExceedsProblem {
                    k: max_k,
                    len: p.len(),
                });
            }
            for (a, b) in p.alphas()[..max_k].iter().zip(&full_alphas) {
                let scale = math::abs(*a).max(math::abs(*b)).max(f64::MIN_POSITIVE);
                if math::abs(a - b) > 1e-12 * scale {
                    return Err(SweepError::SchemeMismatch);
                }
            }
            p.prefix(max_k)?
        }
    };

    let truth = match input {
        SweepInput::Law(law) => Some(law.clone()),
        SweepInput::Problem(_) => None,
    };

    let mut rows: Vec<SweepRow> = Vec::with_capacity(k_values.len());
    let mut prev: Option<(usize, MaxEntDensity)> = None;
    for &k in k_values {
        let sub = full_problem.prefix(k)?;
        let mut row = SweepRow {
            k,
            entropy: None,
            gap_from_prev: None,
            l1_bound: None,
            l1_direct: None,
            l1_to_truth: None,
            solution: None,
            error: None,
        };
        match solve(&sub, cfg, spec) {
            Ok((density, _trace)) => {
                row.entropy = Some(density.entropy());
                if let Some((_, prev_density)) = &prev {
                    let gap = prev_density.entropy() - density.entropy();
                    row.gap_from_prev = Some(gap);
                    row.l1_bound = Some(math::sqrt(2.0 * gap.max(0.0)));
                    row.l1_direct = l1_distance(&density, prev_density, spec).ok();
                }
                if let Some(law) = &truth {
                    row.l1_to_truth = l1_distance(&density, law, spec).ok();
                }
                prev = Some((k, density.clone()));
                row.solution = Some(density);
            }
            Err(e) => {
                row.error = Some(e);
                prev = None;
            }
        }
        rows.push(row);
    }
    Ok(SweepReport { rows })
}

/// Failures of density evaluation and the diagnostic functionals.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("y = {0} outside (0,1]")]
    DomainY(f64),
    #[error("s = {0} outside [0,inf)")]
    DomainS(f64),
    #[error("{alphas} exponents but {lambdas} multipliers")]
    DimensionMismatch { alphas: usize, lambdas: usize },
    #[error("density integrates to {0}, expected 1")]
    NotNormalized(f64),
    #[error("table grid needs at least two points, got {0}")]
    GridTooSmall(usize),
    #[error("grid not strictly increasing or values invalid")]
    BadTable,
    #[error("operation requires a unit-interval (y-space) table")]
    WrongSpace,
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::MomentProblem;
    use crate::solver::SolverConfig;
    use alloc::vec;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn uniform_density() -> MaxEntDensity {
        MaxEntDensity::from_multipliers(vec![1.0], vec![0.0], &spec()).unwrap()
    }

    #[test]
    fn uniform_density_evaluates_to_one() {
        let d = uniform_density();
        assert!((d.density_y(0.5).unwrap() - 1.0).abs() < 1e-11);
        assert!(d.density_y(0.0).is_err());
        assert!(d.density_y(1.5).is_err());
    }

    #[test]
    fn density_value_closed_form() {
        // lambda = 1, alpha = 1 at y = 1: e^{-1} / (1 - e^{-1})
        let d = MaxEntDensity::from_multipliers(vec![1.0], vec![1.0], &spec()).unwrap();
        let expected = math::exp(-1.0) / (1.0 - math::exp(-1.0));
        assert!((d.density_y(1.0).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn density_s_change_of_variables() {
        let d = uniform_density();
        // uniform f_Y maps to the unit exponential
        for s in [0.0, 0.3, 2.0, 10.0] {
            assert!((d.density_s(s).unwrap() - math::exp(-s)).abs() < 1e-10);
        }
        assert!(d.density_s(-0.1).is_err());
        // s = 0 agrees with density_y at 1
        let d2 = MaxEntDensity::from_multipliers(vec![1.0], vec![0.7], &spec()).unwrap();
        assert_eq!(d2.density_s(0.0).unwrap(), d2.density_y(1.0).unwrap());
    }

    #[test]
    fn entropy_of_uniform_is_zero() {
        let d = uniform_density();
        assert!(entropy(&d, &spec()).unwrap().abs() < 1e-10);
    }

    #[test]
    fn entropy_of_gamma_image() {
        // f_Y = -ln y has entropy -(1 - euler_gamma); oracle via u = -ln y:
        // int_0^inf u ln u e^{-u} du = 1 - euler_gamma
        let s = entropy(&|y: f64| -math::ln(y), &spec()).unwrap();
        let expected = -(1.0 - 0.5772156649015329);
        assert!((s - expected).abs() < 1e-9, "{s} vs {expected}");
    }

    #[test]
    fn entropy_identity_for_solved_density() {
        let alphas = vec![1.0, 0.5];
        let mus: Vec<f64> = alphas.iter().map(|a| 1.0 / ((1.0 + a) * (1.0 + a))).collect();
        let p = MomentProblem::new(alphas, mus).unwrap();
        let (d, _) = solve(&p, &SolverConfig::default(), &spec()).unwrap();
        let direct = entropy(&d, &spec()).unwrap();
        assert!(
            (direct - d.entropy()).abs() < 1e-8,
            "direct {direct} vs stored {}",
            d.entropy()
        );
    }

    #[test]
    fn kullback_identity_and_positivity() {
        let d = MaxEntDensity::from_multipliers(vec![1.0, 0.5], vec![0.8, -0.3], &spec()).unwrap();
        assert!(kullback(&d, &d, &spec()).unwrap().abs() < 1e-10);
        let u = uniform_density();
        let kl = kullback(&d, &u, &spec()).unwrap();
        assert!(kl > 0.0);
    }

    #[test]
    fn kullback_support_mismatch_is_infinite() {
        let f = |_: f64| 1.0;
        let g = |y: f64| if y < 0.5 { 2.0 } else { 0.0 };
        assert_eq!(kullback(&f, &g, &spec()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn pinsker_bound_on_simple_pair() {
        let f = |_: f64| 1.0;
        let g = |y: f64| 2.0 * y;
        let kl = kullback(&f, &g, &spec()).unwrap();
        let l1 = l1_distance(&f, &g, &spec()).unwrap();
        assert!(kl >= 0.5 * l1 * l1 - 1e-9);
    }

    #[test]
    fn l1_distance_examples() {
        let f = |_: f64| 1.0;
        assert!(l1_distance(&f, &f, &spec()).unwrap() < 1e-12);
        // int |1 - 2y| dy = 1/2, kink at y = 1/2
        let g = |y: f64| 2.0 * y;
        let d = l1_distance(&f, &g, &spec()).unwrap();
        assert!((d - 0.5).abs() < 1e-10, "{d}");
        // uniform vs -ln y: 2/e by splitting at y = e^{-1}
        let h = |y: f64| -math::ln(y);
        let d = l1_distance(&f, &h, &spec()).unwrap();
        let expected = 2.0 * math::exp(-1.0);
        assert!((d - expected).abs() < 1e-9, "{d} vs {expected}");
    }

    #[test]
    fn tables_are_normalized_and_interpolate() {
        let d = MaxEntDensity::from_multipliers(vec![1.0], vec![1.0], &spec()).unwrap();
        let ty = d.table_y(64, &spec()).unwrap();
        assert_eq!(ty.grid().len(), 64);
        assert_eq!(*ty.grid().last().unwrap(), 1.0);
        let mid = d.density_y(0.5).unwrap();
        assert!((ty.interpolate(0.5) - mid).abs() < 1e-12);

        let ts = d.table_s(128, DEFAULT_S_MAX, &spec()).unwrap();
        assert_eq!(ts.space(), Space::S);
        let tail = ts.tail_mass().unwrap();
        assert!(tail > 0.0 && tail < 1e-20);
        assert!(ts.as_y_density().is_err());
    }

    #[test]
    fn table_entropy_matches_density_entropy() {
        let d = MaxEntDensity::from_multipliers(vec![1.0], vec![0.5], &spec()).unwrap();
        let t = d.table_y(4096, &spec()).unwrap();
        let view = t.as_y_density().unwrap();
        let s_table = entropy(&view, &spec()).unwrap();
        let s_exact = entropy(&d, &spec()).unwrap();
        // interpolation error dominates
        assert!((s_table - s_exact).abs() < 1e-5);
    }

    #[test]
    fn round_trip_s_to_y() {
        let d = MaxEntDensity::from_multipliers(vec![1.0, 0.5], vec![0.4, 0.2], &spec()).unwrap();
        for j in 0..50 {
            let s = 0.1 + j as f64 * 0.5;
            let y = math::exp(-s);
            let back = d.density_s(s).unwrap() / y;
            assert!((back - d.density_y(y).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_exponential_is_flat_at_zero_entropy() {
        let report = sweep(
            &SweepInput::Law(SourceLaw::Exponential { rate: 1.0 }),
            &AlphaScheme::harmonic(4).unwrap(),
            &[2, 4],
            &SolverConfig::default(),
            &spec(),
        )
        .unwrap();
        assert_eq!(report.solved(), 2);
        for row in report.rows() {
            assert!(row.entropy.unwrap().abs() < 1e-8);
            assert!(row.l1_to_truth.unwrap() < 1e-6);
        }
        let gap = report.rows()[1].gap_from_prev.unwrap();
        assert!(gap.abs() < 1e-8);
    }

    #[test]
    fn sweep_gamma_entropies_decrease() {
        let report = sweep(
            &SweepInput::Law(SourceLaw::Gamma {
                shape: 2.0,
                rate: 1.0,
            }),
            &AlphaScheme::harmonic(4).unwrap(),
            &[2, 3, 4],
            &SolverConfig::default(),
            &spec(),
        )
        .unwrap();
        let entropies: Vec<f64> = report.rows().iter().map(|r| r.entropy.unwrap()).collect();
        for w in entropies.windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "entropy rose: {w:?}");
        }
        // all above the true entropy
        for &s in &entropies {
            assert!(s >= -(1.0 - 0.5772156649015329) - 1e-7);
        }
        for row in &report.rows()[1..] {
            let direct = row.l1_direct.unwrap();
            let bound = row.l1_bound.unwrap();
            assert!(direct <= bound + 1e-6, "L1 {direct} above bound {bound}");
        }
        // kullback(f_M, f_K) equals the entropy gap, consecutive pairs
        let rows = report.rows();
        for i in 1..rows.len() {
            let f_m = rows[i].solution.as_ref().unwrap();
            let f_k = rows[i - 1].solution.as_ref().unwrap();
            let kl = kullback(f_m, f_k, &spec()).unwrap();
            let gap = rows[i].gap_from_prev.unwrap();
            assert!((kl - gap).abs() < 1e-7, "kl {kl} vs gap {gap}");
        }
        // truth distances shrink along the sweep
        let l1s: Vec<f64> = rows.iter().map(|r| r.l1_to_truth.unwrap()).collect();
        for w in l1s.windows(2) {
            assert!(w[1] <= w[0] + 2e-3, "L1 to truth rose: {w:?}");
        }
    }

    #[test]
    fn sweep_records_per_k_failures() {
        // second entry infeasible: mu extremely close to the boundary
        let p = MomentProblem::new(vec![1.0, 0.5], vec![0.998, 0.999]).unwrap();
        assert!(p.validate().is_valid());
        let scheme = AlphaScheme::explicit(vec![1.0, 0.5]).unwrap();
        let report = sweep(
            &SweepInput::Problem(p),
            &scheme,
            &[1, 2],
            &SolverConfig::default(),
            &spec(),
        )
        .unwrap();
        assert!(report.rows()[0].error.is_some() || report.rows()[1].error.is_some());
    }

    #[test]
    fn sweep_validates_inputs() {
        let scheme = AlphaScheme::harmonic(4).unwrap();
        let law = SweepInput::Law(SourceLaw::Exponential { rate: 1.0 });
        let cfg = SolverConfig::default();
        assert!(matches!(
            sweep(&law, &scheme, &[], &cfg, &spec()),
            Err(SweepError::BadKValues)
        ));
        assert!(matches!(
            sweep(&law, &scheme, &[2, 2], &cfg, &spec()),
            Err(SweepError::BadKValues)
        ));
        assert!(matches!(
            sweep(&law, &scheme, &[2, 8], &cfg, &spec()),
            Err(SweepError::KExceedsScheme { .. })
        ));
        let p = MomentProblem::new(vec![2.0, 1.5], vec![0.3, 0.4]).unwrap();
        assert!(matches!(
            sweep(&SweepInput::Problem(p), &scheme, &[1, 2], &cfg, &spec()),
            Err(SweepError::SchemeMismatch)
        ));
    }
}
