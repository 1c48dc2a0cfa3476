//! Realized hyperbolic GARCH(1,d,1) for joint modelling of daily returns and
//! a realized volatility measure.
//!
//! The model is
//!
//! ```text
//! r_t      = sqrt(h_t) z_t
//! log h_t  = omega + delta [1 - (1 - gamma L)/(1 - beta L) (1 - L)^d] log x_t
//! log x_t  = xi + phi log h_t + tau1 z_t + tau2 (z_t^2 - 1) + u_t
//! ```
//!
//! with `z_t` Gaussian or variance-standardized Student-t and `u_t ~ N(0, sigma_u^2)`.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command line and the
//! parallel Monte Carlo driver live in the `rhygarch` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dist;
pub mod error;
pub mod filter;
pub mod fit;
pub mod loglik;
pub mod model;
pub mod optim;
pub mod risk;
pub mod sim;

pub use dist::InnovationDist;
pub use error::{Error, Result};
pub use filter::{psi_weights, PsiWeights};
pub use fit::{fit, DistKind, FitOptions, FitResult};
pub use loglik::{filter_volatility, loglik, loglik_gg, loglik_tg, LikOptions, LikelihoodValue};
pub use model::{check_stationarity, implied_means, validate, RhygarchParams, StationarityReport};
pub use risk::{es_forecast, forecast_h, var_forecast, Convention, QuantileFlavor, RiskForecast};
pub use sim::{simulate, SeriesPair, SimOptions};

/// Default lag truncation of the fractional filter.
pub const DEFAULT_TRUNCATION: usize = 1000;
