//! Multi-way cointegration, Granger causality and quantile-VAR connectedness
//! for small multi-country annual panels.
//!
//! The crate is organised along the analysis workflow:
//!
//! * [`panel`] loads, aligns, transforms and describes panels.
//! * [`stationarity`] runs ADF and KPSS tests and combines their verdicts.
//! * [`regression`] holds OLS, rolling OLS and the pinball-loss quantile kernel.
//! * [`var`] estimates VARs, selects lags, tests Granger causality and computes
//!   impulse responses.
//! * [`johansen`] runs the Johansen trace test and pairwise grids.
//! * [`connectedness`] fits quantile VARs and computes GFEVD-based spillover
//!   reports.
//! * [`synth`] generates seeded processes with known ground truth.
//! * [`fixture`] checks the arithmetic of published connectedness tables.

pub mod connectedness;
pub mod error;
pub mod fixture;
pub mod johansen;
pub mod linalg;
pub mod panel;
pub mod regression;
pub mod report;
pub mod stationarity;
pub mod synth;
pub mod var;

pub use error::{Error, Result};
