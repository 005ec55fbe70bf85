//! Exact calibration audits, multicalibration boosting, and decision-ready
//! post-processing for predictors over finite discrete distributions.
//!
//! Everything here is exact: a distribution is an explicit table of points
//! with weights and conditional label means, a hypothesis is a value table,
//! and every reported metric is a finite sum — there is no sampling and no
//! estimation error. That makes the crate suitable as a ground-truth oracle
//! for calibration tooling, as a verification harness for boosting
//! implementations, and as a compact playground for the relationships
//! between calibration, multiaccuracy, and regret.
//!
//! # Auditing a predictor
//!
//! ```
//! use std::collections::BTreeMap;
//! use swapcal::distributions::{DiscreteJoint, Point, Predictor};
//! use swapcal::hypotheses::{Hypothesis, HypothesisClass};
//!
//! // Two kinds of points; the predictor says 0.5 everywhere, but the label
//! // mean differs by group — a correlation the audit must find.
//! let dist = DiscreteJoint::new(vec![
//!     Point { id: "a".into(), weight: 0.5, p_star: 0.8, features: None },
//!     Point { id: "b".into(), weight: 0.5, p_star: 0.2, features: None },
//! ])?;
//! let pred = Predictor::constant(&dist, 0.5)?;
//! let group = Hypothesis::new(
//!     "group",
//!     BTreeMap::from([("a".to_string(), 1.0), ("b".to_string(), -1.0)]),
//! )?;
//! let class = HypothesisClass::closure_completed(vec![group], true)?;
//!
//! let report = swapcal::audit::audit(&dist, &pred, &class)?;
//! assert!((report.smce - 0.3).abs() < 1e-12);
//! // The witness is the member (or its negation) carrying the correlation.
//! assert!(report.level_sets[0].witness.ends_with("group"));
//! # Ok::<(), swapcal::Error>(())
//! ```
//!
//! # Boosting until calibrated
//!
//! ```
//! use swapcal::boost::{mcboost, BoostConfig};
//! # use std::collections::BTreeMap;
//! # use swapcal::distributions::{DiscreteJoint, Point};
//! # use swapcal::hypotheses::{Hypothesis, HypothesisClass};
//! # let dist = DiscreteJoint::new(vec![
//! #     Point { id: "a".into(), weight: 0.5, p_star: 0.8, features: None },
//! #     Point { id: "b".into(), weight: 0.5, p_star: 0.2, features: None },
//! # ])?;
//! # let group = Hypothesis::new(
//! #     "group",
//! #     BTreeMap::from([("a".to_string(), 1.0), ("b".to_string(), -1.0)]),
//! # )?;
//! # let class = HypothesisClass::closure_completed(vec![group], true)?;
//! let (pred, trace) = mcboost(&dist, &class, &BoostConfig::new(0.05)?)?;
//! assert!(trace.converged && trace.final_smce <= 0.05);
//! # Ok::<(), swapcal::Error>(())
//! ```
//!
//! # Module map
//!
//! * [`distributions`] — joint distributions, predictors, level sets.
//! * [`losses`] — proper-loss specs, label differences, optimal actions.
//! * [`hypotheses`] — classes, closure completion, weight grids, the
//!   exhaustive weak learner.
//! * [`audit`] — calibration/multiaccuracy metrics, regrets, loss-OI
//!   violations, witness extraction.
//! * [`boost`] — multicalibration boosting, lattice coarsening, end-to-end
//!   swap-agnostic learning.
//! * [`separations`] — counterexample instances and the verification suite
//!   for every constant separating the notions above.
//! * [`synth`] — seeded random instances for property suites.
//! * [`jsonio`] — deterministic JSON emission (17-significant-digit floats).
//! * [`cli`] — the `swapcal` binary: `audit`, `boost`, `postprocess`,
//!   `separations`.
//!
//! The runnable examples in `examples/` walk each capability end to end;
//! `cargo run --example audit_basics` is a good starting point.

pub mod audit;
pub mod boost;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod hypotheses;
pub mod jsonio;
pub mod losses;
pub mod separations;
pub mod synth;

pub use error::{Error, Result};
