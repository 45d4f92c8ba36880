//! Wealth dynamics of constant rebalanced portfolios and of Cover's
//! universal portfolio.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::Market;
use crate::simplex::{dot, PointSet, SamplerSpec, Scheme, SimplexPoint};

/// Portfolio value at times `0..=T`, starting from one unit of wealth.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WealthPath(Vec<f64>);

impl WealthPath {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        match values.first() {
            Some(&1.0) => {}
            _ => return Err(Error::invalid("a wealth path starts at exactly 1")),
        }
        if let Some((t, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::invalid(format!(
                "wealth {v} at time {t} is not positive"
            )));
        }
        Ok(WealthPath(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn final_value(&self) -> f64 {
        *self.0.last().expect("wealth path is never empty")
    }

    /// Per-period growth factors `v_t / v_{t-1}`, `t = 1..=T`.
    pub fn relatives(&self) -> Vec<f64> {
        self.0.windows(2).map(|p| p[1] / p[0]).collect()
    }

    pub fn steps(&self) -> usize {
        self.0.len() - 1
    }
}

/// Allocation `u_t` held over the transition `t -> t+1`, `t = 0..T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AllocationPath(Vec<SimplexPoint>);

impl AllocationPath {
    pub fn as_slice(&self) -> &[SimplexPoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for AllocationPath {
    type Output = SimplexPoint;

    fn index(&self, t: usize) -> &SimplexPoint {
        &self.0[t]
    }
}

fn check_dim(market: &Market, w: &SimplexPoint) -> Result<()> {
    if w.dim() != market.assets() {
        return Err(Error::DimensionMismatch {
            expected: market.assets(),
            actual: w.dim(),
        });
    }
    Ok(())
}

/// Value of the portfolio rebalanced to `w` every period:
/// `V(w)_t = prod_{s <= t} <w, f_s>`.
pub fn crp_value(market: &Market, w: &SimplexPoint) -> Result<WealthPath> {
    check_dim(market, w)?;
    let mut values = Vec::with_capacity(market.steps() + 1);
    let mut v = 1.0;
    values.push(v);
    for row in market.rows() {
        v *= w.dot(row);
        values.push(v);
    }
    Ok(WealthPath(values))
}

fn crp_log_wealth(market: &Market, w: &[f64]) -> f64 {
    market.rows().map(|row| dot(w, row).ln()).sum()
}

/// Buy `1/K` of each asset at time 0 and hold.
pub fn split_and_forget(market: &Market) -> WealthPath {
    let k = market.assets();
    let mut holdings = vec![1.0 / k as f64; k];
    let mut values = Vec::with_capacity(market.steps() + 1);
    values.push(1.0);
    for row in market.rows() {
        for (h, f) in holdings.iter_mut().zip(row) {
            *h *= f;
        }
        values.push(holdings.iter().sum());
    }
    WealthPath(values)
}

/// Output of the universal portfolio engine.
#[derive(Debug, Clone, Serialize)]
pub struct UniversalPortfolio {
    pub wealth: WealthPath,
    pub allocations: AllocationPath,
    /// Sample standard error of the final value; zero for quadrature.
    pub std_error: f64,
    pub scheme: Scheme,
    pub points: usize,
}

/// Points per work item. Fixed so the reduction order does not depend on
/// the thread count.
const CHUNK: usize = 256;

/// Per-chunk partial sums, each at time `t` expressed in units of
/// `exp(log_scale[t])`.
struct ChunkTrace {
    log_scale: Vec<f64>,
    mass: Vec<f64>,
    /// Row-major `(T+1) x K`.
    weighted: Vec<f64>,
    final_sq: f64,
    total_mass: f64,
}

fn trace_chunk(market: &Market, set: &PointSet, start: usize, end: usize) -> ChunkTrace {
    let k = market.assets();
    let steps = market.steps();
    let masses = &set.masses()[start..end];
    let mut v = vec![1.0; end - start];
    let mut scale = 0.0;
    let mut log_scale = Vec::with_capacity(steps + 1);
    let mut mass = Vec::with_capacity(steps + 1);
    let mut weighted = vec![0.0; (steps + 1) * k];

    let record = |t: usize, v: &[f64], weighted: &mut [f64]| -> f64 {
        let acc = &mut weighted[t * k..(t + 1) * k];
        let mut total = 0.0;
        for (j, (&vj, &m)) in v.iter().zip(masses).enumerate() {
            let mv = m * vj;
            total += mv;
            for (a, &w) in acc.iter_mut().zip(set.point(start + j)) {
                *a += mv * w;
            }
        }
        total
    };

    log_scale.push(scale);
    mass.push(record(0, &v, &mut weighted));
    for (t, row) in market.rows().enumerate() {
        let mut peak = 0.0f64;
        for (j, vj) in v.iter_mut().enumerate() {
            *vj *= dot(set.point(start + j), row);
            peak = peak.max(*vj);
        }
        if !(1e-150..=1e150).contains(&peak) {
            for vj in v.iter_mut() {
                *vj /= peak;
            }
            scale += peak.ln();
        }
        log_scale.push(scale);
        mass.push(record(t + 1, &v, &mut weighted));
    }
    let final_sq = v.iter().zip(masses).map(|(x, m)| m * x * x).sum();
    ChunkTrace {
        log_scale,
        mass,
        weighted,
        final_sq,
        total_mass: masses.iter().sum(),
    }
}

/// Runs the universal portfolio over a fixed point set.
///
/// With `E` the mass-weighted average over `set`:
/// `values[t] = E[V(w)_t]` and `u_t = E[w V(w)_t] / E[V(w)_t]`.
/// Because the same points are used at every step,
/// `values[t+1] = values[t] * <u_t, f_{t+1}>` holds up to rounding.
///
/// Chunks of points are traced in parallel and reduced sequentially in
/// chunk order, so the result is bit-identical for any thread count.
pub fn universal_portfolio_on(market: &Market, set: &PointSet) -> Result<UniversalPortfolio> {
    let k = market.assets();
    if set.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: set.dim(),
        });
    }
    let steps = market.steps();
    let n = set.len();
    let chunks: Vec<ChunkTrace> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| trace_chunk(market, set, c * CHUNK, ((c + 1) * CHUNK).min(n)))
        .collect();

    let total_mass: f64 = chunks.iter().map(|c| c.total_mass).sum();
    let mut values = Vec::with_capacity(steps + 1);
    let mut allocations = Vec::with_capacity(steps);
    let mut last_rel = (0.0, 0.0, 0.0);
    for t in 0..=steps {
        let top = chunks
            .iter()
            .map(|c| c.log_scale[t])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut tot = 0.0;
        let mut wsum = vec![0.0; k];
        let mut sq = 0.0;
        for c in &chunks {
            let f = (c.log_scale[t] - top).exp();
            tot += f * c.mass[t];
            for (a, &x) in wsum.iter_mut().zip(&c.weighted[t * k..(t + 1) * k]) {
                *a += f * x;
            }
            if t == steps {
                sq += f * f * c.final_sq;
            }
        }
        values.push(if t == 0 {
            1.0
        } else {
            top.exp() * (tot / total_mass)
        });
        if t < steps {
            allocations.push(SimplexPoint::from_raw(
                wsum.into_iter().map(|x| x / tot).collect(),
            ));
        } else {
            last_rel = (top, tot / total_mass, sq / total_mass);
        }
    }

    let std_error = match set.scheme() {
        Scheme::GaussLegendre => 0.0,
        Scheme::MonteCarlo if n > 1 => {
            let (top, mean, second) = last_rel;
            let var = ((second - mean * mean) * n as f64 / (n as f64 - 1.0)).max(0.0);
            top.exp() * (var / n as f64).sqrt()
        }
        Scheme::MonteCarlo => 0.0,
    };

    Ok(UniversalPortfolio {
        wealth: WealthPath::new(values)?,
        allocations: AllocationPath(allocations),
        std_error,
        scheme: set.scheme(),
        points: n,
    })
}

/// Cover's universal portfolio with averages taken over the point set
/// described by `spec`.
pub fn universal_portfolio(market: &Market, spec: &SamplerSpec) -> Result<UniversalPortfolio> {
    let set = PointSet::new(market.assets(), spec)?;
    universal_portfolio_on(market, &set)
}

/// Number of points in the initial scan of the two-asset search.
const SCAN_POINTS: usize = 1024;

fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Calls `visit` with every weight vector whose entries are multiples of
/// `1/resolution`.
fn for_each_grid_point<F: FnMut(&[f64])>(dim: usize, resolution: usize, mut visit: F) {
    let mut counts = vec![0usize; dim];
    let mut w = vec![0.0; dim];
    fn rec<F: FnMut(&[f64])>(
        i: usize,
        left: usize,
        res: usize,
        counts: &mut [usize],
        w: &mut [f64],
        visit: &mut F,
    ) {
        let dim = counts.len();
        if i == dim - 1 {
            counts[i] = left;
            for (wj, &c) in w.iter_mut().zip(counts.iter()) {
                *wj = c as f64 / res as f64;
            }
            visit(w);
            return;
        }
        for c in (0..=left).rev() {
            counts[i] = c;
            rec(i + 1, left - c, res, counts, w, visit);
        }
    }
    rec(0, resolution, resolution, &mut counts, &mut w, &mut visit);
}

/// The constant rebalanced portfolio with the largest final wealth, found
/// with hindsight.
///
/// Two assets: a 1024-point scan of `[0, 1]` refined by golden-section search
/// on the (concave) log-wealth; `resolution` is unused. Three or more
/// assets: exhaustive search over the grid of step `1/resolution`.
pub fn best_crp_hindsight(market: &Market, resolution: usize) -> Result<(SimplexPoint, WealthPath)> {
    let k = market.assets();
    let best = match k {
        1 => SimplexPoint::uniform(1),
        2 => {
            let objective = |x: f64| crp_log_wealth(market, &[x, 1.0 - x]);
            let grid: Vec<f64> = (0..SCAN_POINTS)
                .map(|i| i as f64 / (SCAN_POINTS - 1) as f64)
                .collect();
            let (best_i, best_val) = grid
                .iter()
                .map(|&x| objective(x))
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
                    if v > acc.1 {
                        (i, v)
                    } else {
                        acc
                    }
                });
            let lo = grid[best_i.saturating_sub(1)];
            let hi = grid[(best_i + 1).min(SCAN_POINTS - 1)];
            let refined = golden_section_max(objective, lo, hi, 1e-10);
            let x = if objective(refined) > best_val {
                refined
            } else {
                grid[best_i]
            };
            SimplexPoint::from_raw(vec![x, 1.0 - x])
        }
        _ => {
            if resolution == 0 {
                return Err(Error::invalid("grid resolution must be positive"));
            }
            let mut best_w = Vec::new();
            let mut best_val = f64::NEG_INFINITY;
            for_each_grid_point(k, resolution, |w| {
                let v = crp_log_wealth(market, w);
                if v > best_val {
                    best_val = v;
                    best_w = w.to_vec();
                }
            });
            SimplexPoint::from_raw(best_w)
        }
    };
    let path = crp_value(market, &best)?;
    Ok((best, path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::toy_market;

    fn table1() -> Market {
        Market::unlabeled(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn wealth_path_validation() {
        assert!(WealthPath::new(vec![1.0, 2.0]).is_ok());
        assert!(WealthPath::new(vec![0.5, 2.0]).is_err());
        assert!(WealthPath::new(vec![1.0, -2.0]).is_err());
        assert!(WealthPath::new(vec![]).is_err());
        assert_eq!(WealthPath::new(vec![1.0, 2.0, 1.0]).unwrap().relatives(), vec![2.0, 0.5]);
    }

    #[test]
    fn crp_on_toy_market() {
        let m = toy_market(2).unwrap();
        let p = crp_value(&m, &SimplexPoint::vertex(2, 0)).unwrap();
        assert_eq!(p.values(), &[1.0, 1.0, 1.0]);
        let p = crp_value(&m, &SimplexPoint::uniform(2)).unwrap();
        assert_eq!(p.values(), &[1.0, 1.5, 1.125]);
        assert!(crp_value(&m, &SimplexPoint::uniform(3)).is_err());
    }

    #[test]
    fn crp_at_corner_is_the_asset() {
        let m = toy_market(7).unwrap();
        for k in 0..2 {
            let p = crp_value(&m, &SimplexPoint::vertex(2, k)).unwrap();
            assert_eq!(p.values(), m.cumulative_wealth(k).as_slice());
        }
    }

    #[test]
    fn split_and_forget_examples() {
        let m = toy_market(2).unwrap();
        assert_eq!(split_and_forget(&m).values(), &[1.0, 1.5, 1.0]);
        let single = Market::unlabeled(vec![vec![1.1], vec![0.9]]).unwrap();
        assert_eq!(split_and_forget(&single).values(), single.cumulative_wealth(0).as_slice());
        let flat = Market::unlabeled(vec![vec![1.0; 3]; 4]).unwrap();
        assert!(split_and_forget(&flat).values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn first_step_allocation_and_value() {
        let (a, b) = (1.3, 0.7);
        let m = Market::unlabeled(vec![vec![a, b], vec![1.0, 1.0]]).unwrap();
        let up = universal_portfolio(&m, &SamplerSpec::gauss_legendre(16)).unwrap();
        let u1 = up.allocations[1].weights();
        let d = 3.0 * (a + b);
        assert!(close(u1[0], (2.0 * a + b) / d, 1e-14));
        assert!(close(u1[1], (2.0 * b + a) / d, 1e-14));
        assert!(close(up.wealth.values()[1], (a + b) / 2.0, 1e-14));
        assert_eq!(up.std_error, 0.0);
    }

    #[test]
    fn table1_values() {
        let up = universal_portfolio(&table1(), &SamplerSpec::gauss_legendre(16)).unwrap();
        let v = up.wealth.values();
        assert_eq!(v[0], 1.0);
        assert!(close(v[1], 1.5, 1e-12));
        assert!(close(v[2], 13.0 / 6.0, 1e-12));
    }

    #[test]
    fn no_motion_market() {
        let m = Market::unlabeled(vec![vec![1.0, 1.0]; 5]).unwrap();
        let up = universal_portfolio(&m, &SamplerSpec::gauss_legendre(16)).unwrap();
        for (t, v) in up.wealth.values().iter().enumerate() {
            assert!(close(*v, 1.0, 1e-15), "t={t}");
        }
        for u in up.allocations.as_slice() {
            for w in u.weights() {
                assert!((w - 0.5).abs() < 1e-15);
            }
        }
        let m3 = Market::unlabeled(vec![vec![1.0; 3]; 5]).unwrap();
        let up = universal_portfolio(&m3, &SamplerSpec::monte_carlo(20_000, 9)).unwrap();
        assert!(up.wealth.values().iter().all(|v| close(*v, 1.0, 1e-14)));
        for u in up.allocations.as_slice() {
            for w in u.weights() {
                assert!((w - 1.0 / 3.0).abs() < 0.01);
            }
        }
    }

    #[test]
    fn mixture_identity_both_schemes() {
        let rows = (0..40)
            .map(|t| {
                let t = t as f64;
                vec![1.0 + 0.3 * t.sin(), 1.0, 1.0 + 0.2 * (1.7 * t).cos()]
            })
            .collect();
        let m = Market::unlabeled(rows).unwrap();
        let checks = [
            (toy_market(40).unwrap(), SamplerSpec::gauss_legendre(16)),
            (toy_market(40).unwrap(), SamplerSpec::monte_carlo(3000, 1)),
            (m, SamplerSpec::monte_carlo(3000, 2)),
        ];
        for (market, spec) in checks {
            let up = universal_portfolio(&market, &spec).unwrap();
            let v = up.wealth.values();
            for t in 0..market.steps() {
                let growth = up.allocations[t].dot(market.row(t));
                assert!(close(v[t + 1], v[t] * growth, 1e-9), "t={t}");
            }
        }
    }

    #[test]
    fn final_value_is_average_of_crp_values() {
        let m = toy_market(9).unwrap();
        let spec = SamplerSpec::monte_carlo(500, 4);
        let set = PointSet::new(2, &spec).unwrap();
        let up = universal_portfolio_on(&m, &set).unwrap();
        let direct: f64 = set
            .points()
            .map(|w| crp_value(&m, &SimplexPoint::from_raw(w.to_vec())).unwrap().final_value())
            .sum::<f64>()
            / set.len() as f64;
        assert!(close(up.wealth.final_value(), direct, 1e-13));
    }

    #[test]
    fn rescaling_survives_extreme_growth() {
        // per-point wealth passes the 1e150 rescaling threshold
        let m = Market::unlabeled(vec![vec![2.0, 1.5, 1.0]; 900]).unwrap();
        let up = universal_portfolio(&m, &SamplerSpec::monte_carlo(300, 3)).unwrap();
        assert!(up.wealth.final_value().is_finite());
        let v = up.wealth.values();
        for t in 0..m.steps() {
            let growth = up.allocations[t].dot(m.row(t));
            assert!(close(v[t + 1], v[t] * growth, 1e-9));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = toy_market(3).unwrap();
        let set = PointSet::new(3, &SamplerSpec::monte_carlo(10, 0)).unwrap();
        assert!(matches!(
            universal_portfolio_on(&m, &set),
            Err(Error::DimensionMismatch { .. })
        ));
        let m3 = Market::unlabeled(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(universal_portfolio(&m3, &SamplerSpec::gauss_legendre(16)).is_err());
    }

    #[test]
    fn bcrp_toy_market() {
        let m = toy_market(50).unwrap();
        let (w, path) = best_crp_hindsight(&m, 100).unwrap();
        assert!((w.weights()[0] - 0.5).abs() < 1e-4);
        assert!(close(path.final_value(), 1.125f64.powi(25), 1e-9));
    }

    #[test]
    fn bcrp_corner_cases() {
        let doubling = Market::unlabeled(vec![vec![2.0, 1.0]; 6]).unwrap();
        let (w, path) = best_crp_hindsight(&doubling, 10).unwrap();
        assert_eq!(w.weights(), &[1.0, 0.0]);
        assert_eq!(path.final_value(), 64.0);

        let one_step = Market::unlabeled(vec![vec![0.9, 1.2]]).unwrap();
        let (w, _) = best_crp_hindsight(&one_step, 10).unwrap();
        assert_eq!(w.weights(), &[0.0, 1.0]);

        let three = Market::unlabeled(vec![vec![1.0, 0.5, 2.0]; 4]).unwrap();
        let (w, path) = best_crp_hindsight(&three, 20).unwrap();
        assert_eq!(w.weights(), &[0.0, 0.0, 1.0]);
        assert_eq!(path.final_value(), 16.0);
    }

    #[test]
    fn grid_enumeration_count() {
        let mut n = 0;
        for_each_grid_point(3, 4, |w| {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            n += 1;
        });
        assert_eq!(n, 15); // C(6, 2)
    }
}
