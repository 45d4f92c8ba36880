//! High-order universal portfolios.
//!
//! `UP^1` is Cover's universal portfolio of the market `M^1 = M`. Level `l`
//! is the universal portfolio of `M^l = M^{l-1} + {UP^{l-1}}`, the previous
//! market with the previous level's wealth appended as a synthetic asset.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::Market;
use crate::portfolio::{universal_portfolio, UniversalPortfolio};
use crate::simplex::{SamplerSpec, Scheme};

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed used by level `level` (1-based). Level 1 keeps the base seed, so it
/// reproduces a plain [`universal_portfolio`] run; higher levels use
/// `splitmix64(seed ^ (level * 0x9E3779B97F4A7C15))`.
pub fn level_seed(seed: u64, level: usize) -> u64 {
    if level <= 1 {
        seed
    } else {
        splitmix64(seed ^ (level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Sampler used at `level`. Level 1 uses `base` unchanged; every higher
/// level is Monte Carlo with `base.samples` draws and a derived seed.
pub fn level_spec(base: &SamplerSpec, level: usize) -> SamplerSpec {
    if level <= 1 {
        *base
    } else {
        SamplerSpec {
            scheme: Scheme::MonteCarlo,
            seed: level_seed(base.seed, level),
            ..*base
        }
    }
}

/// Label of the synthetic asset holding `UP^level`.
pub fn level_label(level: usize) -> String {
    format!("UP{level}")
}

#[derive(Debug, Clone, Serialize)]
pub struct HoupResult {
    pub order: usize,
    /// `levels[l - 1]` is `UP^l`.
    pub levels: Vec<UniversalPortfolio>,
    /// Raw market with `UP^1 .. UP^{order-1}` appended.
    #[serde(skip)]
    pub market: Market,
    pub base_assets: usize,
}

impl HoupResult {
    pub fn level(&self, level: usize) -> Result<&UniversalPortfolio> {
        if level == 0 || level > self.order {
            return Err(Error::invalid(format!(
                "level {level} outside 1..={}",
                self.order
            )));
        }
        Ok(&self.levels[level - 1])
    }

    /// The market `M^level` that `UP^level` was computed on.
    pub fn level_market(&self, level: usize) -> Result<Market> {
        self.level(level)?;
        self.market.leading_assets(self.base_assets + level - 1)
    }

    pub fn final_values(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.wealth.final_value()).collect()
    }
}

/// Computes `UP^1 .. UP^max_order`.
pub fn houp(market: &Market, max_order: usize, spec: &SamplerSpec) -> Result<HoupResult> {
    if max_order == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    let base_assets = market.assets();
    let mut current = market.clone();
    let mut levels = Vec::with_capacity(max_order);
    for level in 1..=max_order {
        let up = universal_portfolio(&current, &level_spec(spec, level))?;
        if level < max_order {
            current = current.augment(&level_label(level), &up.wealth)?;
        }
        levels.push(up);
    }
    Ok(HoupResult {
        order: max_order,
        levels,
        market: current,
        base_assets,
    })
}

/// Relatives `c_t = UP^level_t / UP^level_{t-1}`.
pub fn houp_relatives(result: &HoupResult, level: usize) -> Result<Vec<f64>> {
    Ok(result.level(level)?.wealth.relatives())
}
