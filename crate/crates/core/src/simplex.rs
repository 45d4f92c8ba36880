//! Integration over the unit simplex `S_K = { w >= 0, sum w = 1 }`.
//!
//! Two numerical schemes are provided: a Gauss-Legendre rule mapped onto the
//! segment `S_2`, and a fixed-seed Monte Carlo point set for any dimension.
//! Both are exposed through [`PointSet`], a weighted set of simplex points
//! that stays fixed once built so that repeated averages over it are
//! mutually consistent. [`exact_moment`] gives the exact mixed moments of the
//! uniform law used to check both schemes.

use num_bigint::BigInt;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Rational;

/// Absolute tolerance on `sum w = 1` for floating-point simplex points.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Largest supported Gauss-Legendre rule.
pub const MAX_QUADRATURE_NODES: usize = 64;

/// A long-only allocation: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("simplex point needs at least one weight"));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::invalid(format!(
                "simplex weight {i} is {w}, expected a finite nonnegative number"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(format!(
                "simplex weights sum to {sum}, expected 1"
            )));
        }
        Ok(SimplexPoint(weights))
    }

    /// The barycenter `(1/K, ..., 1/K)`.
    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0, "simplex dimension must be positive");
        SimplexPoint(vec![1.0 / dim as f64; dim])
    }

    /// The corner putting all weight on asset `index`.
    pub fn vertex(dim: usize, index: usize) -> Self {
        assert!(index < dim, "vertex index out of range");
        let mut w = vec![0.0; dim];
        w[index] = 1.0;
        SimplexPoint(w)
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        SimplexPoint(weights)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Portfolio growth factor `<w, f>` for one row of price relatives.
    pub fn dot(&self, relatives: &[f64]) -> f64 {
        dot(&self.0, relatives)
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    GaussLegendre,
    MonteCarlo,
}

/// Describes how averages over the simplex are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub scheme: Scheme,
    /// Quadrature nodes, used by [`Scheme::GaussLegendre`].
    pub nodes: usize,
    /// Monte Carlo draws, used by [`Scheme::MonteCarlo`].
    pub samples: usize,
    pub seed: u64,
}

impl Default for SamplerSpec {
    fn default() -> Self {
        SamplerSpec {
            scheme: Scheme::MonteCarlo,
            nodes: 16,
            samples: 10_000,
            seed: 0,
        }
    }
}

impl SamplerSpec {
    pub fn gauss_legendre(nodes: usize) -> Self {
        SamplerSpec {
            scheme: Scheme::GaussLegendre,
            nodes,
            ..Default::default()
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        SamplerSpec {
            scheme: Scheme::MonteCarlo,
            samples,
            seed,
            ..Default::default()
        }
    }

    /// Same parameters, with the scheme picked from the dimension:
    /// quadrature for exactly two assets, Monte Carlo otherwise.
    pub fn for_dimension(self, dim: usize) -> Self {
        let scheme = if dim == 2 {
            Scheme::GaussLegendre
        } else {
            Scheme::MonteCarlo
        };
        SamplerSpec { scheme, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SamplerSpec { seed, ..self }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::invalid("simplex dimension must be at least 1"));
        }
        match self.scheme {
            Scheme::GaussLegendre => {
                if dim != 2 {
                    return Err(Error::invalid(format!(
                        "Gauss-Legendre quadrature needs dimension 2, got {dim}"
                    )));
                }
                if self.nodes == 0 || self.nodes > MAX_QUADRATURE_NODES {
                    return Err(Error::invalid(format!(
                        "quadrature nodes must be in 1..={MAX_QUADRATURE_NODES}, got {}",
                        self.nodes
                    )));
                }
            }
            Scheme::MonteCarlo => {
                if self.samples == 0 {
                    return Err(Error::invalid("Monte Carlo needs at least one sample"));
                }
            }
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over `[0, 1]` with the mapping `x = (1 + xi) / 2`.
    pub fn integrate_unit<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&xi, &q)| 0.5 * q * f(0.5 * (1.0 + xi)))
            .sum()
    }
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Builds the `nodes`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Roots of `P_n` are found by Newton's method from Tricomi-style initial
/// guesses; only the positive half is solved and then mirrored, so the rule
/// is exactly symmetric.
pub fn gauss_legendre_rule(nodes: usize) -> Result<QuadratureRule> {
    if nodes == 0 || nodes > MAX_QUADRATURE_NODES {
        return Err(Error::invalid(format!(
            "quadrature nodes must be in 1..={MAX_QUADRATURE_NODES}, got {nodes}"
        )));
    }
    if nodes == 1 {
        return Ok(QuadratureRule {
            points: vec![0.0],
            weights: vec![2.0],
        });
    }
    let n = nodes;
    let half = n / 2;
    let mut pos = Vec::with_capacity(half);
    for i in 0..half {
        // i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        pos.push((x, w));
    }
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &(x, w) in &pos {
        points.push(-x);
        weights.push(w);
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_with_derivative(n, 0.0);
        points.push(0.0);
        weights.push(2.0 / (dp * dp));
    }
    for &(x, w) in pos.iter().rev() {
        points.push(x);
        weights.push(w);
    }
    Ok(QuadratureRule { points, weights })
}

/// Draws `count` points uniformly from `S_dim` into a flat row-major buffer.
///
/// Each point is `X / sum(X)` with `X_i = -ln(U_i)`, `U_i` uniform on `(0, 1]`.
fn sample_flat(dim: usize, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dim * count);
    let mut row = vec![0.0; dim];
    for _ in 0..count {
        loop {
            let mut sum = 0.0;
            for x in row.iter_mut() {
                let u: f64 = 1.0 - rng.random::<f64>();
                *x = -u.ln();
                sum += *x;
            }
            if sum > 0.0 {
                out.extend(row.iter().map(|x| x / sum));
                break;
            }
        }
    }
    out
}

/// Draws `count` independent uniform points of `S_dim`, deterministically in `seed`.
pub fn sample_uniform(dim: usize, count: usize, seed: u64) -> Result<Vec<SimplexPoint>> {
    if dim < 2 {
        return Err(Error::invalid(format!(
            "sampling needs dimension >= 2, got {dim}"
        )));
    }
    if count == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    Ok(sample_flat(dim, count, seed)
        .chunks_exact(dim)
        .map(|w| SimplexPoint::from_raw(w.to_vec()))
        .collect())
}

/// A fixed, weighted set of simplex points standing in for the uniform law.
///
/// The averaging weights (`masses`) sum to one: `q_j / 2` for quadrature,
/// `1 / M` for Monte Carlo.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    scheme: Scheme,
    points: Vec<f64>,
    masses: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, spec: &SamplerSpec) -> Result<Self> {
        spec.validate(dim)?;
        match spec.scheme {
            Scheme::GaussLegendre => {
                let rule = gauss_legendre_rule(spec.nodes)?;
                let mut points = Vec::with_capacity(2 * rule.len());
                for &xi in &rule.points {
                    let x = 0.5 * (1.0 + xi);
                    points.push(x);
                    points.push(1.0 - x);
                }
                let masses = rule.weights.iter().map(|q| 0.5 * q).collect();
                Ok(PointSet {
                    dim,
                    scheme: Scheme::GaussLegendre,
                    points,
                    masses,
                })
            }
            Scheme::MonteCarlo => {
                let points = if dim == 1 {
                    vec![1.0; spec.samples]
                } else {
                    sample_flat(dim, spec.samples, spec.seed)
                };
                let m = spec.samples;
                Ok(PointSet {
                    dim,
                    scheme: Scheme::MonteCarlo,
                    points,
                    masses: vec![1.0 / m as f64; m],
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Weighted average of `integrand` over the point set, summed sequentially
    /// in point order.
    pub fn average<F>(&self, integrand: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut acc: Vec<f64> = Vec::new();
        for (w, &m) in self.points().zip(&self.masses) {
            let v = integrand(w);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            assert_eq!(v.len(), acc.len(), "integrand length changed between points");
            for (a, x) in acc.iter_mut().zip(v) {
                *a += m * x;
            }
        }
        acc
    }
}

/// Estimates `E_{w ~ U(S_dim)}[integrand(w)]` componentwise.
pub fn average_over_simplex<F>(dim: usize, integrand: F, spec: &SamplerSpec) -> Result<Vec<f64>>
where
    F: Fn(&SimplexPoint) -> Vec<f64>,
{
    let set = PointSet::new(dim, spec)?;
    Ok(set.average(|w| integrand(&SimplexPoint::from_raw(w.to_vec()))))
}

fn factorial(n: u64) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Exact mixed moment `E[prod w_i^{a_i}]` of the uniform law on `S_K`,
/// `K = exponents.len()`:
///
/// `(K-1)! * prod(a_i!) / (K - 1 + sum a_i)!`
pub fn exact_moment(exponents: &[u32]) -> Rational {
    assert!(!exponents.is_empty(), "moment needs at least one coordinate");
    let k = exponents.len() as u64;
    let total: u64 = exponents.iter().map(|&a| a as u64).sum();
    let num = exponents
        .iter()
        .fold(factorial(k - 1), |acc, &a| acc * factorial(a as u64));
    Rational::new(num, factorial(k - 1 + total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.25, 0.75]).is_ok());
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
        assert_eq!(SimplexPoint::vertex(3, 1).weights(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn sample_rejects_bad_arguments() {
        assert!(matches!(
            sample_uniform(1, 10, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            sample_uniform(3, 0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn single_sample_is_on_simplex() {
        let pts = sample_uniform(3, 1, 7).unwrap();
        assert_eq!(pts.len(), 1);
        let w = pts[0].weights();
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_uniform(4, 100, 11).unwrap();
        let b = sample_uniform(4, 100, 11).unwrap();
        let c = sample_uniform(4, 100, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn coordinate_means_and_cross_moment() {
        let m = 100_000;
        let pts = sample_uniform(3, m, 42).unwrap();
        // Var[w_i] = E[w_i^2] - 1/9 = 1/6 - 1/9 = 1/18
        let sigma = (1.0f64 / 18.0).sqrt();
        for i in 0..3 {
            let mean = pts.iter().map(|p| p.weights()[i]).sum::<f64>() / m as f64;
            assert!((mean - 1.0 / 3.0).abs() <= 3.0 * sigma / (m as f64).sqrt());
        }
        let prods: Vec<f64> = pts.iter().map(|p| p.weights()[0] * p.weights()[1]).collect();
        let mean = prods.iter().sum::<f64>() / m as f64;
        let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        assert!((mean - 1.0 / 12.0).abs() <= 3.0 * (var / m as f64).sqrt());
    }

    #[test]
    fn small_rules() {
        let one = gauss_legendre_rule(1).unwrap();
        assert_eq!(one.points, vec![0.0]);
        assert_eq!(one.weights, vec![2.0]);

        let two = gauss_legendre_rule(2).unwrap();
        let s = 1.0 / 3.0f64.sqrt();
        assert!((two.points[0] + s).abs() < 1e-15);
        assert!((two.points[1] - s).abs() < 1e-15);
        assert!((two.weights[0] - 1.0).abs() < 1e-15);
        assert!((two.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rule_bounds() {
        assert!(gauss_legendre_rule(0).is_err());
        assert!(gauss_legendre_rule(65).is_err());
        assert!(gauss_legendre_rule(64).is_ok());
    }

    #[test]
    fn sixteen_nodes_integrate_x30() {
        let rule = gauss_legendre_rule(16).unwrap();
        let v = rule.integrate_unit(|x| x.powi(30));
        assert!((v - 1.0 / 31.0).abs() < 1e-12);
    }

    #[test]
    fn rules_are_symmetric_with_positive_weights() {
        for n in 1..=MAX_QUADRATURE_NODES {
            let rule = gauss_legendre_rule(n).unwrap();
            assert_eq!(rule.len(), n);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-12, "n={n}");
            for i in 0..n {
                assert_eq!(rule.points[i], -rule.points[n - 1 - i]);
                assert_eq!(rule.weights[i], rule.weights[n - 1 - i]);
            }
            assert!(rule.points.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn spec_validation() {
        assert!(SamplerSpec::gauss_legendre(16).validate(3).is_err());
        assert!(SamplerSpec::gauss_legendre(16).validate(2).is_ok());
        assert!(SamplerSpec::gauss_legendre(0).validate(2).is_err());
        assert!(SamplerSpec::monte_carlo(0, 1).validate(3).is_err());
        let auto = SamplerSpec::default().for_dimension(2);
        assert_eq!(auto.scheme, Scheme::GaussLegendre);
        assert_eq!(auto.for_dimension(5).scheme, Scheme::MonteCarlo);
    }

    #[test]
    fn quadrature_average_of_constants_and_products() {
        let spec = SamplerSpec::gauss_legendre(16);
        let one = average_over_simplex(2, |_| vec![1.0], &spec).unwrap();
        assert!((one[0] - 1.0).abs() <= 1e-15);
        let prod = average_over_simplex(2, |w| vec![w.weights()[0] * w.weights()[1]], &spec).unwrap();
        assert!((prod[0] - 1.0 / 6.0).abs() <= 1e-14);
        assert!(average_over_simplex(3, |_| vec![1.0], &spec).is_err());
    }

    #[test]
    fn monte_carlo_triple_product() {
        let spec = SamplerSpec::monte_carlo(1_000_000, 5);
        let set = PointSet::new(3, &spec).unwrap();
        let est = set.average(|w| {
            let p = w[0] * w[1] * w[2];
            vec![p, p * p]
        });
        let m = set.len() as f64;
        let se = ((est[1] - est[0] * est[0]) * m / (m - 1.0) / m).sqrt();
        assert!((est[0] - 1.0 / 60.0).abs() <= 3.0 * se);
    }

    #[test]
    fn point_set_masses_sum_to_one() {
        let q = PointSet::new(2, &SamplerSpec::gauss_legendre(16)).unwrap();
        assert!((q.masses().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let mc = PointSet::new(4, &SamplerSpec::monte_carlo(1000, 3)).unwrap();
        assert_eq!(mc.len(), 1000);
        assert!((mc.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for w in mc.points() {
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE);
        }
    }

    #[test]
    fn moment_table_on_s3() {
        assert_eq!(exact_moment(&[1, 1, 0]), r(1, 12));
        assert_eq!(exact_moment(&[2, 0, 0]), r(1, 6));
        assert_eq!(exact_moment(&[1, 1, 1]), r(1, 60));
        assert_eq!(exact_moment(&[3, 0, 0]), r(1, 10));
        assert_eq!(exact_moment(&[2, 1, 0]), r(1, 30));
        assert_eq!(exact_moment(&[0, 0, 0]), r(1, 1));
        // S_2: E[x(1-x)] = 1/6
        assert_eq!(exact_moment(&[1, 1]), r(1, 6));
        assert_eq!(exact_moment(&[1, 0]).to_f64().unwrap(), 0.5);
    }
}
