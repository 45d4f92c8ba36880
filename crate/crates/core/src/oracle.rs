//! Exact evaluation of universal portfolios on small markets.
//!
//! `V(w)_t = prod_{s<=t} <w, f_s>` is a polynomial in `w`. Expanding it and
//! taking the exact Dirichlet(1, ..., 1) moment of every monomial gives
//! `E[V(w)_t]` as a rational number, with no quadrature and no sampling.
//! Monomials are collected by exponent histogram while multiplying the
//! factors in, which is the multilinear expansion over index tuples
//! `(k_1, ..., k_t)` with equal-histogram terms merged.

use std::collections::BTreeMap;
use std::io::Write;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{Market, Permutation};
use crate::simplex::exact_moment;

pub type Rational = num_rational::BigRational;

/// Largest admissible `K^t` for an exact evaluation.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// How simplex moments are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentRule {
    /// Exact moments of the uniform law.
    #[default]
    Dirichlet,
    /// Exchanges the all-distinct and all-equal third moments on `S_3`
    /// (`1/60 <-> 1/10`). Exists only to show that the verifier notices.
    SwappedThirdOrder,
}

impl MomentRule {
    pub fn moment(self, exponents: &[u32]) -> Rational {
        if self == MomentRule::SwappedThirdOrder && exponents.len() == 3 {
            let mut sorted = exponents.to_vec();
            sorted.sort_unstable();
            match sorted[..] {
                [1, 1, 1] => return rational(1, 10),
                [0, 0, 3] => return rational(1, 60),
                _ => {}
            }
        }
        exact_moment(exponents)
    }
}

/// A market of exact price relatives.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalMarket {
    labels: Vec<String>,
    rows: Vec<Vec<Rational>>,
}

impl RationalMarket {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<Rational>>) -> Result<Self> {
        let k = labels.len();
        if k == 0 {
            return Err(Error::invalid("a market needs at least one asset"));
        }
        for (t, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    actual: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|f| !f.is_positive()) {
                return Err(Error::BadCell {
                    row: t + 1,
                    column: j + 1,
                    message: format!("price relative {} is not strictly positive", row[j]),
                });
            }
        }
        Ok(RationalMarket { labels, rows })
    }

    /// Integer-valued rows, columns labelled `asset1`, `asset2`, ...
    pub fn from_integers(rows: &[&[i64]]) -> Result<Self> {
        let k = rows.first().map_or(0, |r| r.len());
        Self::new(
            (1..=k).map(|i| format!("asset{i}")).collect(),
            rows.iter()
                .map(|r| r.iter().map(|&x| Rational::from_integer(x.into())).collect())
                .collect(),
        )
    }

    /// Converts every `f64` relative to the rational it represents exactly.
    pub fn from_market(market: &Market) -> Self {
        RationalMarket {
            labels: market.labels().to_vec(),
            rows: market
                .rows()
                .map(|r| {
                    r.iter()
                        .map(|&f| Rational::from_float(f).expect("relatives are finite"))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_market(&self) -> Result<Market> {
        Market::new(
            self.labels.clone(),
            self.rows
                .iter()
                .map(|r| r.iter().map(|f| f.to_f64().unwrap_or(f64::NAN)).collect())
                .collect(),
        )
    }

    pub fn steps(&self) -> usize {
        self.rows.len()
    }

    pub fn assets(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn column(&self, asset: usize) -> Vec<Rational> {
        self.rows.iter().map(|r| r[asset].clone()).collect()
    }

    pub fn permute(&self, sigma: &Permutation) -> Result<Self> {
        if sigma.len() != self.steps() {
            return Err(Error::DimensionMismatch {
                expected: self.steps(),
                actual: sigma.len(),
            });
        }
        Ok(RationalMarket {
            labels: self.labels.clone(),
            rows: sigma.mapping().iter().map(|&s| self.rows[s].clone()).collect(),
        })
    }

    /// Reorders the assets: column `j` of the result is column `order[j]`.
    pub fn reorder_assets(&self, order: &[usize]) -> Self {
        RationalMarket {
            labels: order.iter().map(|&j| self.labels[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| order.iter().map(|&j| r[j].clone()).collect())
                .collect(),
        }
    }

    fn truncated(&self, t: usize) -> Self {
        RationalMarket {
            labels: self.labels.clone(),
            rows: self.rows[..t].to_vec(),
        }
    }

    fn augmented(&self, label: String, relatives: Vec<Rational>) -> Self {
        let mut labels = self.labels.clone();
        labels.push(label);
        RationalMarket {
            labels,
            rows: self
                .rows
                .iter()
                .zip(relatives)
                .map(|(r, c)| {
                    let mut r = r.clone();
                    r.push(c);
                    r
                })
                .collect(),
        }
    }
}

fn check_bound(assets: usize, t: usize) -> Result<()> {
    let count = (assets as u128).checked_pow(t as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBound {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

fn check_horizon(market: &RationalMarket, t: usize) -> Result<()> {
    if t > market.steps() {
        return Err(Error::invalid(format!(
            "time {t} is beyond the horizon {}",
            market.steps()
        )));
    }
    Ok(())
}

/// Coefficients of `prod_{s<t} <w, f_s>` keyed by exponent histogram.
type Expansion = BTreeMap<Vec<u32>, Rational>;

fn expand_step(poly: &Expansion, row: &[Rational]) -> Expansion {
    let mut next = Expansion::new();
    for (hist, coef) in poly {
        for (k, f) in row.iter().enumerate() {
            let mut h = hist.clone();
            h[k] += 1;
            let term = coef * f;
            next.entry(h)
                .and_modify(|c| *c += &term)
                .or_insert(term);
        }
    }
    next
}

fn expectation(poly: &Expansion, rule: MomentRule) -> Rational {
    poly.iter()
        .fold(Rational::zero(), |acc, (h, c)| acc + c * rule.moment(h))
}

/// Exact universal portfolio values at times `0..=t`.
pub fn exact_up_path(market: &RationalMarket, t: usize, rule: MomentRule) -> Result<Vec<Rational>> {
    check_horizon(market, t)?;
    check_bound(market.assets(), t)?;
    let mut poly = Expansion::new();
    poly.insert(vec![0; market.assets()], Rational::one());
    let mut out = vec![Rational::one()];
    for row in &market.rows[..t] {
        poly = expand_step(&poly, row);
        out.push(expectation(&poly, rule));
    }
    Ok(out)
}

/// Exact `UP_t = E_w[V(w)_t]`.
pub fn exact_up_value(market: &RationalMarket, t: usize) -> Result<Rational> {
    exact_up_value_with(market, t, MomentRule::Dirichlet)
}

pub fn exact_up_value_with(market: &RationalMarket, t: usize, rule: MomentRule) -> Result<Rational> {
    Ok(exact_up_path(market, t, rule)?
        .pop()
        .expect("path has at least one entry"))
}

/// Exact allocation `u_t = E[w V(w)_t] / E[V(w)_t]`.
pub fn exact_up_allocation(market: &RationalMarket, t: usize) -> Result<Vec<Rational>> {
    check_horizon(market, t)?;
    check_bound(market.assets(), t + 1)?;
    let k = market.assets();
    let mut poly = Expansion::new();
    poly.insert(vec![0; k], Rational::one());
    for row in &market.rows[..t] {
        poly = expand_step(&poly, row);
    }
    let denom = expectation(&poly, MomentRule::Dirichlet);
    Ok((0..k)
        .map(|i| {
            let num = poly.iter().fold(Rational::zero(), |acc, (h, c)| {
                let mut h = h.clone();
                h[i] += 1;
                acc + c * exact_moment(&h)
            });
            num / &denom
        })
        .collect())
}

/// The two-asset, three-step value
/// `((a1+b1)(a2+b2)(a3+b3) + 2 a1 a2 a3 + 2 b1 b2 b3) / 12`.
pub fn exact_up1_3_closed_form(a: &[Rational; 3], b: &[Rational; 3]) -> Rational {
    let two = Rational::from_integer(2.into());
    let sums = (&a[0] + &b[0]) * (&a[1] + &b[1]) * (&a[2] + &b[2]);
    let pa = &a[0] * &a[1] * &a[2];
    let pb = &b[0] * &b[1] * &b[2];
    (sums + &two * pa + &two * pb) / Rational::from_integer(12.into())
}

/// Two-asset, two-step value `(2 a1 a2 + 2 b1 b2 + a1 b2 + a2 b1) / 6`.
pub fn exact_up1_2_closed_form(a: &[Rational; 2], b: &[Rational; 2]) -> Rational {
    let two = Rational::from_integer(2.into());
    (&two * &a[0] * &a[1] + &two * &b[0] * &b[1] + &a[0] * &b[1] + &a[1] * &b[0])
        / Rational::from_integer(6.into())
}

/// Second-order value at `t = 2` on two assets:
/// `(23 a1 a2 + 23 b1 b2 + 13 a1 b2 + 13 a2 b1) / 72`.
pub fn exact_up2_2_closed_form(a: &[Rational; 2], b: &[Rational; 2]) -> Rational {
    let c23 = Rational::from_integer(23.into());
    let c13 = Rational::from_integer(13.into());
    (&c23 * &a[0] * &a[1] + &c23 * &b[0] * &b[1] + &c13 * &a[0] * &b[1] + &c13 * &a[1] * &b[0])
        / Rational::from_integer(72.into())
}

/// Exact high-order universal portfolio up to time `t`.
#[derive(Debug, Clone)]
pub struct ExactHoup {
    /// `values[l - 1][s]` is `UP^l_s`, `s = 0..=t`.
    pub values: Vec<Vec<Rational>>,
    /// Input market (truncated to `t` steps) with `UP^1 .. UP^{order-1}` appended.
    pub augmented: RationalMarket,
}

impl ExactHoup {
    /// Relatives `UP^l_s / UP^l_{s-1}` of level `l`.
    pub fn relatives(&self, level: usize) -> Vec<Rational> {
        self.values[level - 1]
            .windows(2)
            .map(|p| &p[1] / &p[0])
            .collect()
    }

    pub fn final_value(&self) -> &Rational {
        self.values
            .last()
            .and_then(|v| v.last())
            .expect("at least one level")
    }
}

pub fn exact_houp(
    market: &RationalMarket,
    order: usize,
    t: usize,
    rule: MomentRule,
) -> Result<ExactHoup> {
    if order == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    check_horizon(market, t)?;
    check_bound(market.assets() + order - 1, t)?;
    let mut current = market.truncated(t);
    let mut values = Vec::with_capacity(order);
    for level in 1..=order {
        let path = exact_up_path(&current, t, rule)?;
        if level < order {
            let rel = path.windows(2).map(|p| &p[1] / &p[0]).collect();
            current = current.augmented(format!("UP{level}"), rel);
        }
        values.push(path);
    }
    Ok(ExactHoup {
        values,
        augmented: current,
    })
}

/// Exact `UP^order_t`.
pub fn exact_houp_value(market: &RationalMarket, order: usize, t: usize) -> Result<Rational> {
    exact_houp_value_with(market, order, t, MomentRule::Dirichlet)
}

pub fn exact_houp_value_with(
    market: &RationalMarket,
    order: usize,
    t: usize,
    rule: MomentRule,
) -> Result<Rational> {
    Ok(exact_houp(market, order, t, rule)?.final_value().clone())
}

/// One identity checked by [`verify_paper`].
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(serialize_with = "ser_rational")]
    pub expected: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub computed: Rational,
    pub passed: bool,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn push(&mut self, name: impl Into<String>, expected: Rational, computed: Rational) {
        let passed = expected == computed;
        self.checks.push(Check {
            name: name.into(),
            expected,
            computed,
            passed,
        });
    }

    /// True when no check failed (vacuously true for an empty report).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn write_text<W: Write>(&self, mut out: W, verbose: bool) -> std::io::Result<()> {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            if verbose || !c.passed {
                writeln!(
                    out,
                    "{tag}  {}: expected {}, computed {}",
                    c.name, c.expected, c.computed
                )?;
            } else {
                writeln!(out, "{tag}  {}", c.name)?;
            }
        }
        writeln!(
            out,
            "{} of {} checks passed",
            self.checks.len() - self.failures(),
            self.checks.len()
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "passed": self.passed(),
            "total": self.checks.len(),
            "failures": self.failures(),
            "checks": self.checks,
        })
    }
}

/// Two assets, relatives (1,2), (2,1), (2,1).
pub fn counterexample_market() -> RationalMarket {
    RationalMarket::from_integers(&[&[1, 2], &[2, 1], &[2, 1]]).expect("valid market")
}

/// Runs every closed-form identity of the two-asset examples.
pub fn verify_paper(rule: MomentRule) -> Result<Report> {
    let mut report = Report::default();
    let r = rational;

    let moments: [(&str, [u32; 3], Rational); 5] = [
        ("S3 moment E[w1 w2]", [1, 1, 0], r(1, 12)),
        ("S3 moment E[w1^2]", [2, 0, 0], r(1, 6)),
        ("S3 moment E[w1 w2 w3]", [1, 1, 1], r(1, 60)),
        ("S3 moment E[w1^2 w2]", [2, 1, 0], r(1, 30)),
        ("S3 moment E[w1^3]", [3, 0, 0], r(1, 10)),
    ];
    for (name, exps, expected) in moments {
        report.push(name, expected, rule.moment(&exps));
    }

    let full = counterexample_market();
    let two_step = full.truncated(2);
    let a2 = [r(1, 1), r(2, 1)];
    let b2 = [r(2, 1), r(1, 1)];

    let alloc = exact_up_allocation(&two_step, 1)?;
    report.push("two-step market u1[asset1] = (2a1+b1)/(3(a1+b1))", r(4, 9), alloc[0].clone());
    report.push("two-step market u1[asset2] = (2b1+a1)/(3(a1+b1))", r(5, 9), alloc[1].clone());
    report.push(
        "two-step market UP1_2 closed form",
        r(13, 6),
        exact_up1_2_closed_form(&a2, &b2),
    );
    report.push(
        "two-step market UP1_2",
        r(13, 6),
        exact_up_value_with(&two_step, 2, rule)?,
    );
    report.push(
        "two-step market UP2_2 closed form",
        r(157, 72),
        exact_up2_2_closed_form(&a2, &b2),
    );
    report.push(
        "two-step market UP2_2",
        r(157, 72),
        exact_houp_value_with(&two_step, 2, 2, rule)?,
    );

    let swapped = full.permute(&Permutation::swap(3, 0, 2)?)?;
    let cases = [
        ("original", &full, [r(3, 2), r(13, 9), r(3, 2)], r(3533, 1080)),
        ("permuted", &swapped, [r(3, 2), r(14, 9), r(39, 28)], r(49457, 15120)),
    ];
    let mut second_order = Vec::new();
    for (tag, market, c, up2) in cases {
        let h = exact_houp(market, 2, 3, rule)?;
        for (s, (expected, computed)) in c.into_iter().zip(h.relatives(1)).enumerate() {
            report.push(format!("{tag} market c{}", s + 1), expected, computed);
        }
        report.push(format!("{tag} market UP1_3"), r(13, 4), h.values[0][3].clone());
        let col = |k: usize| -> [Rational; 3] {
            let v = market.column(k);
            [v[0].clone(), v[1].clone(), v[2].clone()]
        };
        report.push(
            format!("{tag} market UP1_3 closed form"),
            r(13, 4),
            exact_up1_3_closed_form(&col(0), &col(1)),
        );
        report.push(format!("{tag} market UP2_3"), up2, h.final_value().clone());
        second_order.push(h.final_value().clone());
    }
    report.push(
        "UP2_3 permutation gap",
        r(3533, 1080) - r(49457, 15120),
        &second_order[0] - &second_order[1],
    );
    Ok(report)
}
