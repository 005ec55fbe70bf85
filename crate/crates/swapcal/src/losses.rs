//! Loss functions over binary outcomes and real-valued actions.
//!
//! A [`LossSpec`] carries the two per-label curves `t -> loss(0, t)` and
//! `t -> loss(1, t)`, an action interval, a bound on the label-difference
//! function `partial(t) = loss(1, t) - loss(0, t)`, and a convexity flag.
//! The *extended* loss blends the label curves linearly in the label mean:
//! `eval_extended(p, t) = p * loss(1, t) + (1 - p) * loss(0, t)`.
//!
//! Optimal actions (`k(p) = argmin_t eval_extended(p, t)`) are solved in
//! closed form for the built-in shapes; custom losses fall back to
//! golden-section search when convex and to a dense grid with local
//! refinement otherwise, with ties breaking toward the smallest minimizer.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on computed optimal actions. Closed-form built-ins
/// are exact to rounding; the numeric fallback for custom convex losses
/// drives its search bracket a decade below this.
pub const ACTION_TOLERANCE: f64 = 1e-9;

/// Tolerance used by [`LossSpec::check_nice`] grid verification.
pub const NICENESS_TOLERANCE: f64 = 1e-6;

/// Default truncation half-width for logistic and GLM losses.
pub const DEFAULT_TRUNCATION: f64 = 10.0;

type Curve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Built-in or custom loss shape. Built-ins are matched inline in the hot
/// evaluation paths; custom losses go through closures.
#[derive(Clone)]
enum LossKind {
    /// `(y - t)^2`
    Squared,
    /// `(y - t)^2 / 2`
    HalfSquared,
    /// `(y - t)^p` for even `p >= 2`
    PPower(i32),
    /// `log(1 + exp((1 - 2y) t))`, truncated to `[-T, T]`
    Logistic,
    /// `g(t) - y t` with `g(t) = t^2 / 2`, truncated to `[-T, T]`
    GlmSquare,
    /// `g(t) - y t` with `g(t) = log(1 + exp(t))`, truncated to `[-T, T]`
    GlmLogistic,
    /// `g(t) - y t` for a caller-supplied convex link `g`
    GlmCustom { g: Curve },
    /// Arbitrary per-label curves.
    Custom {
        eval0: Curve,
        eval1: Curve,
        partial: Option<Curve>,
    },
}

/// A loss specification: per-label curves, action interval, bound on the
/// label-difference function, and convexity flag.
#[derive(Clone)]
pub struct LossSpec {
    name: String,
    kind: LossKind,
    interval: (f64, f64),
    niceness_bound: f64,
    convex: bool,
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossSpec")
            .field("name", &self.name)
            .field("interval", &self.interval)
            .field("niceness_bound", &self.niceness_bound)
            .field("convex", &self.convex)
            .finish()
    }
}

#[inline]
fn softplus(u: f64) -> f64 {
    // Numerically stable log(1 + exp(u)).
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

impl LossSpec {
    /// Loss of action `t` when the outcome is `y = 0`.
    ///
    /// Truncated shapes (logistic and the GLM matching losses) extend beyond
    /// their interval by projection — an action outside `I` costs exactly
    /// what its clamped image costs — so clamping never hurts by
    /// construction. The `[0, 1]` polynomial losses use their closed forms
    /// everywhere; their curves already rise away from the interval.
    #[inline]
    pub fn eval0(&self, t: f64) -> f64 {
        match &self.kind {
            LossKind::Squared => t * t,
            LossKind::HalfSquared => 0.5 * t * t,
            LossKind::PPower(p) => t.powi(*p),
            LossKind::Logistic | LossKind::GlmLogistic => softplus(self.project(t)),
            LossKind::GlmSquare => {
                let t = self.project(t);
                0.5 * t * t
            }
            LossKind::GlmCustom { g } => g(self.project(t)),
            LossKind::Custom { eval0, .. } => eval0(t),
        }
    }

    /// Loss of action `t` when the outcome is `y = 1`.
    ///
    /// Extension semantics match [`eval0`](Self::eval0).
    #[inline]
    pub fn eval1(&self, t: f64) -> f64 {
        match &self.kind {
            LossKind::Squared => (1.0 - t) * (1.0 - t),
            LossKind::HalfSquared => 0.5 * (1.0 - t) * (1.0 - t),
            LossKind::PPower(p) => (1.0 - t).powi(*p),
            LossKind::Logistic | LossKind::GlmLogistic => softplus(-self.project(t)),
            LossKind::GlmSquare => {
                let t = self.project(t);
                0.5 * t * t - t
            }
            LossKind::GlmCustom { g } => {
                let t = self.project(t);
                g(t) - t
            }
            LossKind::Custom { eval1, .. } => eval1(t),
        }
    }

    /// Loss of action `t` under a binary outcome.
    #[inline]
    pub fn eval_label(&self, y: bool, t: f64) -> f64 {
        if y {
            self.eval1(t)
        } else {
            self.eval0(t)
        }
    }

    /// Extended loss: exact linear blend of the label curves at label mean
    /// `p`.
    #[inline]
    pub fn eval_extended(&self, p: f64, t: f64) -> f64 {
        p * self.eval1(t) + (1.0 - p) * self.eval0(t)
    }

    /// Label-difference function `partial(t) = eval1(t) - eval0(t)`.
    ///
    /// Built-ins use closed forms (all GLM-shaped losses have exactly `-t`,
    /// with no cancellation error). For the truncated shapes the closed form
    /// deliberately keeps the *untruncated* difference beyond the interval:
    /// class composition applies `partial` to hypothesis values in `[-1, 1]`
    /// whatever the loss interval is, and the label curves agree with that
    /// convention everywhere inside the interval.
    #[inline]
    pub fn partial(&self, t: f64) -> f64 {
        match &self.kind {
            LossKind::Squared => 1.0 - 2.0 * t,
            LossKind::HalfSquared => 0.5 - t,
            LossKind::PPower(p) => (1.0 - t).powi(*p) - t.powi(*p),
            LossKind::Logistic
            | LossKind::GlmSquare
            | LossKind::GlmLogistic
            | LossKind::GlmCustom { .. } => -t,
            LossKind::Custom {
                partial: Some(d), ..
            } => d(t),
            LossKind::Custom { .. } => self.eval1(t) - self.eval0(t),
        }
    }

    /// When the label-difference function is affine, `Some((a, b))` with
    /// `partial(t) = a + b*t` exactly — lets bulk scans replace per-action
    /// evaluation with one dot product.
    pub fn linear_partial(&self) -> Option<(f64, f64)> {
        match &self.kind {
            LossKind::Squared => Some((1.0, -2.0)),
            LossKind::HalfSquared => Some((0.5, -1.0)),
            LossKind::Logistic
            | LossKind::GlmSquare
            | LossKind::GlmLogistic
            | LossKind::GlmCustom { .. } => Some((0.0, -1.0)),
            LossKind::PPower(_) | LossKind::Custom { .. } => None,
        }
    }

    /// Clamp an action into the loss's interval.
    #[inline]
    pub fn project(&self, t: f64) -> f64 {
        t.clamp(self.interval.0, self.interval.1)
    }

    /// The action interval `[lo, hi]`.
    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    /// Bound `B` on `|partial|` over the interval.
    pub fn niceness_bound(&self) -> f64 {
        self.niceness_bound
    }

    /// Whether the extended loss is convex in the action.
    pub fn is_convex(&self) -> bool {
        self.convex
    }

    /// Canonical display name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Optimal action `argmin_t eval_extended(p, t)` over the interval.
    ///
    /// Built-in shapes solve the stationarity condition in closed form and
    /// project the result onto the interval — exact for a convex loss, and
    /// free of search noise. Custom convex losses use golden-section search
    /// to within [`ACTION_TOLERANCE`]; non-convex ones evaluate a 4096-cell
    /// dense grid and refine the best cell with the same search. Numeric
    /// ties break toward the smallest minimizer (the search keeps the left
    /// bracket on equal values).
    pub fn optimal_action(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let (lo, hi) = self.interval;
        let stationary = match &self.kind {
            // Blend derivative 2(t - p) (scaled): minimized at t = p.
            LossKind::Squared | LossKind::HalfSquared | LossKind::GlmSquare => Some(p),
            // Blend derivative sigmoid(t) - p: minimized at the logit.
            // p = 0 and p = 1 give the infinities, which clamp correctly.
            LossKind::Logistic | LossKind::GlmLogistic => Some((p / (1.0 - p)).ln()),
            LossKind::PPower(k) => Some(p_power_argmin(p, *k)),
            LossKind::GlmCustom { .. } | LossKind::Custom { .. } => None,
        };
        if let Some(t) = stationary {
            return t.clamp(lo, hi);
        }
        let f = |t: f64| self.eval_extended(p, t);
        if self.convex {
            golden_min(&f, lo, hi)
        } else {
            grid_refine_min(&f, lo, hi)
        }
    }

    /// Verify `B`-niceness on a grid: `|partial| <= bound`, 1-Lipschitz label
    /// curves, and projection optimality, each within [`NICENESS_TOLERANCE`].
    ///
    /// The action grid has step `grid_step` over the interval (and one unit
    /// beyond each end for the projection check); the label-mean grid for the
    /// projection check is the coarser of `grid_step` and 1/32. The report is
    /// empty exactly when all three conditions hold on the grid.
    pub fn check_nice(&self, bound: f64, grid_step: f64) -> NicenessReport {
        let (lo, hi) = self.interval;
        // Keep the grid finite even for degenerate steps.
        let step = grid_step.max((hi - lo) / 2_000_000.0).max(1e-12);
        let mut violations = Vec::new();
        let mut checked = 0usize;
        const MAX_VIOLATIONS: usize = 10_000;

        let n = ((hi - lo) / step).ceil() as usize;
        let t_at = |i: usize| (lo + i as f64 * step).min(hi);

        // Bounded label-difference on the interval grid.
        for i in 0..=n {
            let t = t_at(i);
            let d = self.partial(t);
            checked += 1;
            if d.abs() > bound + NICENESS_TOLERANCE && violations.len() < MAX_VIOLATIONS {
                violations.push(NicenessViolation::PartialBound {
                    t,
                    partial: d,
                    bound,
                });
            }
        }

        // 1-Lipschitz label curves between consecutive grid points.
        for y in [0u8, 1u8] {
            let mut prev_t = t_at(0);
            let mut prev_f = self.eval_label(y == 1, prev_t);
            for i in 1..=n {
                let t = t_at(i);
                if t <= prev_t {
                    continue;
                }
                let f = self.eval_label(y == 1, t);
                let slope = (f - prev_f).abs() / (t - prev_t);
                checked += 1;
                if slope > 1.0 + NICENESS_TOLERANCE && violations.len() < MAX_VIOLATIONS {
                    violations.push(NicenessViolation::LabelLipschitz {
                        y,
                        t0: prev_t,
                        t1: t,
                        slope,
                    });
                }
                prev_t = t;
                prev_f = f;
            }
        }

        // Projection optimality: clamping an out-of-interval action never
        // hurts, checked one unit beyond each end.
        let p_step = step.max(1.0 / 32.0);
        let proj_lo = lo - 1.0;
        let proj_hi = hi + 1.0;
        let m = ((proj_hi - proj_lo) / step).ceil() as usize;
        let p_count = (1.0 / p_step).ceil() as usize;
        for pi in 0..=p_count {
            let p = (pi as f64 * p_step).min(1.0);
            for i in 0..=m {
                let t = (proj_lo + i as f64 * step).min(proj_hi);
                let at_t = self.eval_extended(p, t);
                let at_proj = self.eval_extended(p, self.project(t));
                checked += 1;
                if at_proj > at_t + NICENESS_TOLERANCE && violations.len() < MAX_VIOLATIONS {
                    violations.push(NicenessViolation::ProjectionSuboptimal {
                        p,
                        t,
                        projected: self.project(t),
                        loss_at_projection: at_proj,
                        loss_at_t: at_t,
                    });
                }
            }
        }

        NicenessReport {
            checked_points: checked,
            violations,
        }
    }

    /// Build a fully custom loss from per-label curves.
    ///
    /// `partial` may supply a closed-form label-difference function;
    /// otherwise it is derived as `eval1 - eval0`.
    pub fn custom(
        name: impl Into<String>,
        interval: (f64, f64),
        niceness_bound: f64,
        convex: bool,
        eval0: Curve,
        eval1: Curve,
        partial: Option<Curve>,
    ) -> Result<Self> {
        let name = name.into();
        if !(interval.0.is_finite() && interval.1.is_finite() && interval.0 < interval.1) {
            return Err(Error::InvalidConfig(format!(
                "loss `{name}` has an invalid action interval [{}, {}]",
                interval.0, interval.1
            )));
        }
        if !(niceness_bound.is_finite() && niceness_bound >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "loss `{name}` has an invalid bound {niceness_bound}"
            )));
        }
        Ok(LossSpec {
            name,
            kind: LossKind::Custom {
                eval0,
                eval1,
                partial,
            },
            interval,
            niceness_bound,
            convex,
        })
    }

    /// Replace the action interval, re-deriving the partial bound by a dense
    /// probe over the new interval.
    pub fn with_interval(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "invalid action interval [{lo}, {hi}] for loss `{}`",
                self.name
            )));
        }
        self.interval = (lo, hi);
        let mut bound = 0.0f64;
        for i in 0..=4096 {
            let t = lo + (hi - lo) * i as f64 / 4096.0;
            bound = bound.max(self.partial(t).abs());
        }
        self.niceness_bound = bound;
        Ok(self)
    }
}

/// `(y - t)^2` on `[0, 1]`.
pub fn squared() -> LossSpec {
    LossSpec {
        name: "squared".into(),
        kind: LossKind::Squared,
        interval: (0.0, 1.0),
        niceness_bound: 1.0,
        convex: true,
    }
}

/// `(y - t)^2 / 2` on `[0, 1]` — 1/2-nice.
pub fn half_squared() -> LossSpec {
    LossSpec {
        name: "half_squared".into(),
        kind: LossKind::HalfSquared,
        interval: (0.0, 1.0),
        niceness_bound: 0.5,
        convex: true,
    }
}

/// `(y - t)^p` on `[0, 1]` for even `p >= 2`.
pub fn p_power(p: u32) -> Result<LossSpec> {
    if p < 2 || p % 2 != 0 || p > 512 {
        return Err(Error::UnknownLoss(format!(
            "p_power requires an even exponent in [2, 512], got {p}"
        )));
    }
    Ok(LossSpec {
        name: format!("p_power({p})"),
        kind: LossKind::PPower(p as i32),
        interval: (0.0, 1.0),
        niceness_bound: 1.0,
        convex: true,
    })
}

fn truncation_name(t_max: f64) -> String {
    // Deterministic, compact: integers print without a fraction.
    if t_max == t_max.trunc() {
        format!("{}", t_max as i64)
    } else {
        format!("{t_max}")
    }
}

fn validate_truncation(t_max: f64) -> Result<f64> {
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "truncation half-width {t_max} must be a finite positive number"
        )));
    }
    Ok(t_max)
}

/// Truncated logistic loss `log(1 + exp((1 - 2y) t))` on `[-t_max, t_max]`.
pub fn logistic(t_max: f64) -> Result<LossSpec> {
    let t_max = validate_truncation(t_max)?;
    Ok(LossSpec {
        name: format!("logistic({})", truncation_name(t_max)),
        kind: LossKind::Logistic,
        interval: (-t_max, t_max),
        niceness_bound: t_max,
        convex: true,
    })
}

/// Named links for [`glm`].
#[derive(Clone)]
pub enum GlmLink {
    /// `g(t) = t^2 / 2` (matching loss of the identity mean map).
    Square,
    /// `g(t) = log(1 + exp(t))` (matching loss of the sigmoid mean map).
    Logistic,
    /// Caller-supplied convex differentiable link.
    Custom { name: String, g: Curve },
}

/// Matching loss `loss(y, t) = g(t) - y t` of a GLM link, truncated to
/// `[-t_max, t_max]`.
///
/// Custom links are probed for convexity and for the mean-map range
/// condition `[0, 1]` within the image of `g'`; failures raise
/// [`Error::BadGlm`].
pub fn glm(link: GlmLink, t_max: f64) -> Result<LossSpec> {
    let t_max = validate_truncation(t_max)?;
    let (kind, link_name) = match link {
        GlmLink::Square => (LossKind::GlmSquare, "square".to_string()),
        GlmLink::Logistic => (LossKind::GlmLogistic, "logistic".to_string()),
        GlmLink::Custom { name, g } => {
            probe_glm_link(&name, &*g, t_max)?;
            (LossKind::GlmCustom { g }, name)
        }
    };
    Ok(LossSpec {
        name: format!("glm({},{})", link_name, truncation_name(t_max)),
        kind,
        interval: (-t_max, t_max),
        niceness_bound: t_max,
        convex: true,
    })
}

/// Grid probe of a custom GLM link: finite values, convexity (nondecreasing
/// chord slopes), and slope range covering `[0, 1]`.
fn probe_glm_link(name: &str, g: &(dyn Fn(f64) -> f64 + Send + Sync), t_max: f64) -> Result<()> {
    let span = t_max.max(32.0);
    const CELLS: usize = 1024;
    let h = 2.0 * span / CELLS as f64;
    let mut prev_value = g(-span);
    let mut prev_slope = f64::NEG_INFINITY;
    let mut min_slope = f64::INFINITY;
    let mut max_slope = f64::NEG_INFINITY;
    if !prev_value.is_finite() {
        return Err(Error::BadGlm(format!(
            "link `{name}` is not finite at {}",
            -span
        )));
    }
    for i in 1..=CELLS {
        let t = -span + i as f64 * h;
        let value = g(t);
        if !value.is_finite() {
            return Err(Error::BadGlm(format!("link `{name}` is not finite at {t}")));
        }
        let slope = (value - prev_value) / h;
        if slope < prev_slope - 1e-7 * (1.0 + slope.abs()) {
            return Err(Error::BadGlm(format!(
                "link `{name}` is not convex near t = {t} (chord slope decreased)"
            )));
        }
        min_slope = min_slope.min(slope);
        max_slope = max_slope.max(slope);
        prev_slope = slope;
        prev_value = value;
    }
    if min_slope > 1e-3 || max_slope < 1.0 - 1e-3 {
        return Err(Error::BadGlm(format!(
            "link `{name}` has derivative range [{min_slope:.6}, {max_slope:.6}], \
             which does not cover [0, 1]"
        )));
    }
    Ok(())
}

/// JSON descriptor for a loss, as used in files and on the command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossDescriptor {
    pub name: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

/// Build a loss from a descriptor: `squared`, `half_squared`,
/// `p_power` (param `p`), `logistic` (param `t_max`), or `glm` (params
/// `link` in {"square", "logistic"} and optional `t_max`).
pub fn from_descriptor(d: &LossDescriptor) -> Result<LossSpec> {
    let num = |key: &str| -> Option<f64> { d.params.get(key).and_then(|v| v.as_f64()) };
    let loss = match d.name.as_str() {
        "squared" => squared(),
        "half_squared" => half_squared(),
        "p_power" => {
            let p = num("p").ok_or_else(|| {
                Error::UnknownLoss("p_power requires a numeric `p` parameter".into())
            })?;
            if p.fract() != 0.0 || p < 0.0 {
                return Err(Error::UnknownLoss(format!(
                    "p_power exponent must be a nonnegative integer, got {p}"
                )));
            }
            p_power(p as u32)?
        }
        "logistic" => logistic(num("t_max").unwrap_or(DEFAULT_TRUNCATION))?,
        "glm" => {
            let link = match d.params.get("link").and_then(|v| v.as_str()) {
                Some("square") => GlmLink::Square,
                Some("logistic") => GlmLink::Logistic,
                Some(other) => {
                    return Err(Error::UnknownLoss(format!(
                        "unknown glm link `{other}` (expected `square` or `logistic`)"
                    )))
                }
                None => {
                    return Err(Error::UnknownLoss(
                        "glm requires a `link` parameter (`square` or `logistic`)".into(),
                    ))
                }
            };
            glm(link, num("t_max").unwrap_or(DEFAULT_TRUNCATION))?
        }
        other => return Err(Error::UnknownLoss(other.to_string())),
    };
    match d.interval {
        Some([lo, hi]) => loss.with_interval(lo, hi),
        None => Ok(loss),
    }
}

/// Parse a command-line loss argument: either inline JSON (a
/// [`LossDescriptor`]) or a compact `name[:arg[:arg]]` form, e.g.
/// `p_power:4`, `logistic:8`, `glm:square`, `glm:logistic:12`.
pub fn parse_loss_arg(s: &str) -> Result<LossSpec> {
    let s = s.trim();
    if s.starts_with('{') {
        let d: LossDescriptor =
            serde_json::from_str(s).map_err(|e| Error::parse("loss descriptor", e))?;
        return from_descriptor(&d);
    }
    let mut parts = s.split(':');
    let name = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    let parse_num = |a: &str| -> Result<f64> {
        a.parse::<f64>()
            .map_err(|e| Error::parse(format!("loss argument `{a}`"), e))
    };
    match (name, args.as_slice()) {
        ("squared", []) => Ok(squared()),
        ("half_squared", []) => Ok(half_squared()),
        ("p_power", [p]) => {
            let p = parse_num(p)?;
            if p.fract() != 0.0 || p < 0.0 {
                return Err(Error::UnknownLoss(format!(
                    "p_power exponent must be a nonnegative integer, got {p}"
                )));
            }
            p_power(p as u32)
        }
        ("logistic", []) => logistic(DEFAULT_TRUNCATION),
        ("logistic", [t]) => logistic(parse_num(t)?),
        ("glm", [link]) | ("glm", [link, _]) => {
            let t_max = match args.get(1) {
                Some(t) => parse_num(t)?,
                None => DEFAULT_TRUNCATION,
            };
            match *link {
                "square" => glm(GlmLink::Square, t_max),
                "logistic" => glm(GlmLink::Logistic, t_max),
                other => Err(Error::UnknownLoss(format!(
                    "unknown glm link `{other}` (expected `square` or `logistic`)"
                ))),
            }
        }
        _ => Err(Error::UnknownLoss(s.to_string())),
    }
}

/// A nonempty family of losses audited together.
#[derive(Debug, Clone)]
pub struct LossFamily {
    losses: Vec<LossSpec>,
}

impl LossFamily {
    pub fn new(losses: Vec<LossSpec>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(LossFamily { losses })
    }

    /// Member losses.
    pub fn losses(&self) -> &[LossSpec] {
        &self.losses
    }

    /// Family bound: the largest member niceness bound.
    pub fn bound(&self) -> f64 {
        self.losses
            .iter()
            .map(|l| l.niceness_bound)
            .fold(0.0, f64::max)
    }
}

/// Outcome of a niceness grid check; empty iff all conditions held.
#[derive(Debug, Clone, Serialize)]
pub struct NicenessReport {
    pub checked_points: usize,
    pub violations: Vec<NicenessViolation>,
}

impl NicenessReport {
    /// True when no violation was found.
    pub fn is_nice(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A single niceness-condition failure.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind")]
pub enum NicenessViolation {
    /// `|partial(t)|` exceeded the claimed bound.
    PartialBound { t: f64, partial: f64, bound: f64 },
    /// A label curve moved faster than slope 1 between grid points.
    LabelLipschitz { y: u8, t0: f64, t1: f64, slope: f64 },
    /// Clamping into the interval increased the loss.
    ProjectionSuboptimal {
        p: f64,
        t: f64,
        projected: f64,
        loss_at_projection: f64,
        loss_at_t: f64,
    },
}

/// Unconstrained minimizer of `p (1-t)^k + (1-p) t^k` for even `k`: the
/// stationarity condition is `(t / (1-t))^(k-1) = p / (1-p)`, mirrored
/// around 1/2 so both tails stay in the stable small-ratio regime.
fn p_power_argmin(p: f64, k: i32) -> f64 {
    let inv = 1.0 / f64::from(k - 1);
    if p <= 0.5 {
        let r = (p / (1.0 - p)).powf(inv);
        r / (1.0 + r)
    } else {
        let r = ((1.0 - p) / p).powf(inv);
        1.0 - r / (1.0 + r)
    }
}

/// Golden-section minimization on `[lo, hi]`, biased left on ties so that
/// plateaus resolve to their smallest minimizer.
fn golden_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let tol = (ACTION_TOLERANCE / 10.0).max(f64::EPSILON * (hi - lo).abs());
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Dense-grid minimization with local golden-section refinement, for losses
/// not declared convex. The grid has 4096 cells; ties keep the smallest
/// grid point, then refinement searches one cell to each side of it.
fn grid_refine_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const CELLS: usize = 4096;
    let h = (hi - lo) / CELLS as f64;
    let mut best_i = 0usize;
    let mut best = f(lo);
    for i in 1..=CELLS {
        let t = lo + i as f64 * h;
        let v = f(t);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let center = lo + best_i as f64 * h;
    let a = (center - h).max(lo);
    let b = (center + h).min(hi);
    let refined = golden_min(f, a, b);
    if f(refined) <= best {
        refined
    } else {
        center
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_loss_is_exact_blend() {
        let l = squared();
        // Dyadic inputs make every product exact in binary floating point:
        // 0.25 * (1 - 0.5)^2 + 0.75 * 0.5^2 = 0.0625 + 0.1875 = 0.25.
        assert_eq!(l.eval_extended(0.25, 0.5), 0.25);
        // Generic inputs agree with the hand-expanded blend
        // 0.3 * (1 - 0.2)^2 + 0.7 * 0.2^2 up to rounding of the literals.
        let expected = 0.3 * 0.64 + 0.7 * 0.04;
        assert!((l.eval_extended(0.3, 0.2) - expected).abs() < 1e-15);
    }

    #[test]
    fn partial_closed_forms_match_curve_difference() {
        for loss in [
            squared(),
            half_squared(),
            p_power(4).unwrap(),
            logistic(10.0).unwrap(),
            glm(GlmLink::Square, 10.0).unwrap(),
            glm(GlmLink::Logistic, 10.0).unwrap(),
        ] {
            let (lo, hi) = loss.interval();
            for i in 0..=64 {
                let t = lo + (hi - lo) * i as f64 / 64.0;
                let direct = loss.eval1(t) - loss.eval0(t);
                let diff = (loss.partial(t) - direct).abs();
                assert!(
                    diff <= 1e-12 * (1.0 + direct.abs()),
                    "{}: partial({t}) = {} but curves differ by {}",
                    loss.name(),
                    loss.partial(t),
                    direct
                );
            }
        }
    }

    #[test]
    fn glm_partial_is_exactly_negative_t() {
        let l = glm(GlmLink::Logistic, 10.0).unwrap();
        assert_eq!(l.partial(3.25), -3.25, "closed form, no cancellation");
        assert_eq!(l.partial(-7.5), 7.5);
    }

    #[test]
    fn half_squared_partial_examples() {
        let l = half_squared();
        assert_eq!(l.partial(0.0), 0.5);
        assert_eq!(l.partial(1.0), -0.5);
        assert_eq!(l.partial(0.5), 0.0);
    }

    #[test]
    fn fourth_power_partial_frozen_values() {
        // Oracle: partial(t) = (1-t)^4 - t^4 at hand-computed rationals.
        let l = p_power(4).unwrap();
        assert!((l.partial(1.0 / 3.0) - 5.0 / 27.0).abs() < 1e-15);
        assert_eq!(l.partial(0.5), 0.0);
        assert_eq!(l.partial(0.0), 1.0);
        assert_eq!(l.partial(1.0), -1.0);
    }

    #[test]
    fn optimal_action_half_squared_is_identity() {
        let l = half_squared();
        for p in [0.0, 0.3, 0.5, 0.875, 1.0] {
            let k = l.optimal_action(p);
            assert!(
                (k - p).abs() <= ACTION_TOLERANCE,
                "optimal action for p = {p} was {k}"
            );
        }
    }

    #[test]
    fn optimal_action_logistic_is_clamped_logit() {
        let l = logistic(10.0).unwrap();
        // Oracle: logit(0.75) = ln 3, computed independently.
        let expected = 3.0f64.ln();
        let k = l.optimal_action(0.75);
        assert!(
            (k - expected).abs() <= ACTION_TOLERANCE,
            "k(0.75) = {k}, expected ln 3 = {expected}"
        );
        // Extreme label means clamp to the truncation boundary.
        assert!((l.optimal_action(1.0) - 10.0).abs() <= ACTION_TOLERANCE);
        assert!((l.optimal_action(0.0) + 10.0).abs() <= ACTION_TOLERANCE);
        // logit(1e-9) is far below -10.
        assert!((l.optimal_action(1e-9) + 10.0).abs() <= 1e-6);
    }

    #[test]
    fn optimal_action_glm_square_is_clamped_identity() {
        let l = glm(GlmLink::Square, 10.0).unwrap();
        for p in [0.0, 0.25, 1.0] {
            let k = l.optimal_action(p);
            assert!(
                (k - p).abs() <= ACTION_TOLERANCE,
                "glm-square k({p}) = {k}"
            );
        }
    }

    #[test]
    fn optimal_action_fourth_power_midpoint() {
        // Symmetric loss at p = 1/2 has its unique minimizer at 1/2.
        let l = p_power(4).unwrap();
        let k = l.optimal_action(0.5);
        assert!((k - 0.5).abs() <= ACTION_TOLERANCE, "k(1/2) = {k}");
        // Boundary label means drive the action to the matching endpoint.
        assert!(l.optimal_action(0.0).abs() <= ACTION_TOLERANCE);
        assert!((l.optimal_action(1.0) - 1.0).abs() <= ACTION_TOLERANCE);
    }

    #[test]
    fn ties_break_toward_smallest_minimizer() {
        // Flat loss on [0.25, 0.75]: every point there is optimal; the
        // search must return the left edge.
        let shape = |t: f64| {
            if t < 0.25 {
                0.25 - t
            } else if t > 0.75 {
                t - 0.75
            } else {
                0.0
            }
        };
        let l = LossSpec::custom(
            "plateau",
            (0.0, 1.0),
            0.0,
            true,
            Arc::new(shape),
            Arc::new(shape),
            None,
        )
        .unwrap();
        let k = l.optimal_action(0.5);
        assert!(
            (k - 0.25).abs() <= 1e-6,
            "plateau must resolve to its left edge, got {k}"
        );
    }

    #[test]
    fn builtin_losses_are_nice_at_their_bounds() {
        // Half-squared curves have slope at most 1 on [0, 1]; the truncated
        // logistic curves have slope sigmoid < 1 and extend by projection,
        // so clamping is exactly free.
        for (loss, b) in [(half_squared(), 0.5), (logistic(10.0).unwrap(), 10.0)] {
            let report = loss.check_nice(b, 1e-3);
            assert!(
                report.is_nice(),
                "{} should be {b}-nice, found {:?}",
                loss.name(),
                report.violations.first()
            );
        }
    }

    #[test]
    fn glm_square_is_bounded_but_not_one_lipschitz() {
        // The square-link matching loss has label-curve slope |t - y|, which
        // reaches the truncation half-width: it honestly fails the
        // 1-Lipschitz condition for any half-width, while its
        // label-difference stays within the bound and projection stays free.
        let l = glm(GlmLink::Square, 10.0).unwrap();
        let report = l.check_nice(10.0, 1e-3);
        assert!(
            report
                .violations
                .iter()
                .any(|v| matches!(v, NicenessViolation::LabelLipschitz { .. })),
            "square-link curves must break slope 1"
        );
        assert!(
            report.violations.iter().all(|v| matches!(
                v,
                NicenessViolation::LabelLipschitz { .. }
            )),
            "bounded difference and projection must still hold, found {:?}",
            report
                .violations
                .iter()
                .find(|v| !matches!(v, NicenessViolation::LabelLipschitz { .. }))
        );
    }

    #[test]
    fn raw_squared_is_not_one_lipschitz() {
        // d/dt t^2 = 2 near t = 1, so the label-0 curve breaks slope 1.
        let report = squared().check_nice(1.0, 1e-3);
        assert!(
            report
                .violations
                .iter()
                .any(|v| matches!(v, NicenessViolation::LabelLipschitz { .. })),
            "raw squared loss must fail the Lipschitz check"
        );
    }

    #[test]
    fn steep_linear_loss_fails_lipschitz_check() {
        let line = |t: f64| 5.0 * t;
        let l = LossSpec::custom(
            "line5",
            (0.0, 1.0),
            0.0,
            true,
            Arc::new(line),
            Arc::new(line),
            None,
        )
        .unwrap();
        let report = l.check_nice(10.0, 1e-2);
        assert!(
            report
                .violations
                .iter()
                .any(|v| matches!(v, NicenessViolation::LabelLipschitz { slope, .. } if *slope > 4.9)),
            "slope-5 loss must produce a Lipschitz violation"
        );
    }

    #[test]
    fn partial_bound_violations_are_reported() {
        // half_squared has |partial| up to 0.5; claiming 0.1 must fail.
        let report = half_squared().check_nice(0.1, 1e-2);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, NicenessViolation::PartialBound { .. })));
    }

    #[test]
    fn custom_glm_link_validation() {
        // Valid: g(t) = t^2 / 2 as a custom closure.
        let ok = glm(
            GlmLink::Custom {
                name: "half_square".into(),
                g: Arc::new(|t| 0.5 * t * t),
            },
            10.0,
        );
        assert!(ok.is_ok(), "quadratic link must validate: {ok:?}");

        // Non-convex link.
        let bad = glm(
            GlmLink::Custom {
                name: "sine".into(),
                g: Arc::new(f64::sin),
            },
            10.0,
        );
        assert!(matches!(bad, Err(Error::BadGlm(_))), "sin link: {bad:?}");

        // Convex but derivative range misses [0, 1]: g'(t) = sigmoid(t)/2.
        let bad_range = glm(
            GlmLink::Custom {
                name: "half_logistic".into(),
                g: Arc::new(|t: f64| 0.5 * softplus(t)),
            },
            10.0,
        );
        assert!(
            matches!(bad_range, Err(Error::BadGlm(_))),
            "derivative range [0, 0.5] must be rejected: {bad_range:?}"
        );
    }

    #[test]
    fn glm_logistic_equals_logistic_loss() {
        let a = logistic(10.0).unwrap();
        let b = glm(GlmLink::Logistic, 10.0).unwrap();
        for i in 0..=40 {
            let t = -10.0 + i as f64 * 0.5;
            assert_eq!(a.eval0(t), b.eval0(t));
            assert_eq!(a.eval1(t), b.eval1(t));
        }
    }

    #[test]
    fn descriptor_round_trip_and_errors() {
        let d: LossDescriptor =
            serde_json::from_str(r#"{"name":"p_power","params":{"p":4},"interval":[0,1]}"#)
                .unwrap();
        let l = from_descriptor(&d).unwrap();
        assert_eq!(l.name(), "p_power(4)");
        assert_eq!(l.interval(), (0.0, 1.0));

        assert!(matches!(
            from_descriptor(&LossDescriptor {
                name: "hinge".into(),
                params: Default::default(),
                interval: None,
            }),
            Err(Error::UnknownLoss(_))
        ));
    }

    #[test]
    fn compact_loss_args_parse() {
        assert_eq!(parse_loss_arg("squared").unwrap().name(), "squared");
        assert_eq!(parse_loss_arg("p_power:4").unwrap().name(), "p_power(4)");
        assert_eq!(parse_loss_arg("logistic:8").unwrap().name(), "logistic(8)");
        assert_eq!(
            parse_loss_arg("glm:square").unwrap().name(),
            "glm(square,10)"
        );
        assert_eq!(
            parse_loss_arg(r#"{"name":"half_squared"}"#).unwrap().name(),
            "half_squared"
        );
        assert!(parse_loss_arg("p_power:3.5").is_err());
        assert!(matches!(
            parse_loss_arg("nope"),
            Err(Error::UnknownLoss(_))
        ));
    }

    #[test]
    fn odd_power_is_rejected() {
        assert!(matches!(p_power(3), Err(Error::UnknownLoss(_))));
        assert!(matches!(p_power(0), Err(Error::UnknownLoss(_))));
    }

    #[test]
    fn family_bound_is_member_max() {
        let fam = LossFamily::new(vec![
            half_squared(),
            p_power(4).unwrap(),
            logistic(10.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(fam.bound(), 10.0);
        assert!(matches!(LossFamily::new(vec![]), Err(Error::EmptyInput)));
    }
}
