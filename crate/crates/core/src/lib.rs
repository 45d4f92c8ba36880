//! Cover's universal portfolio and its high-order recursion.
//!
//! The crate is split along the data flow of an experiment:
//!
//! * [`simplex`]: integration over the unit simplex (Gauss-Legendre for two
//!   assets, seeded Monte Carlo otherwise) and exact Dirichlet(1, ..., 1) moments.
//! * [`market`]: price-relative matrices, CSV ingestion and synthetic markets.
//! * [`portfolio`]: constant rebalanced portfolios, the universal portfolio
//!   engine and hindsight baselines.
//! * [`houp`]: the recursive construction that appends each level's universal
//!   portfolio to the market as a synthetic asset.
//! * [`oracle`]: an exact rational evaluator used to check the floating engine.

pub mod error;
pub mod houp;
pub mod market;
pub mod oracle;
pub mod portfolio;
pub mod simplex;

pub use error::{Error, Result};
pub use houp::{houp, houp_relatives, level_spec, HoupResult};
pub use market::{Market, Permutation};
pub use oracle::{Rational, RationalMarket};
pub use portfolio::{
    best_crp_hindsight, crp_value, split_and_forget, universal_portfolio, AllocationPath,
    UniversalPortfolio, WealthPath,
};
pub use simplex::{
    average_over_simplex, exact_moment, gauss_legendre_rule, sample_uniform, PointSet,
    QuadratureRule, SamplerSpec, Scheme, SimplexPoint,
};
