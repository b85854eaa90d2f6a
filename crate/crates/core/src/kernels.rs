//! Probability primitives shared by the estimators: truncated binomial
//! moments, Mid-P binomial intervals, and logit-scale Wald intervals.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete, DiscreteCDF};

use crate::error::{Error, Result};

/// Absolute tolerance for the Mid-P bisection.
pub const MIDP_TOLERANCE: f64 = 1e-10;

/// How an interval was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Midp,
    LogitWald,
    /// The point sits on the boundary of the unit interval, or the logit
    /// variance is unusable. The bounds are whatever fallback the caller chose.
    Degenerate,
}

/// Provenance markers attached to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// Point estimate uses the half-count adjusted control row.
    AdjustedControls,
    /// Interval was built on half-count adjusted counts because the raw
    /// proportion was 0 or 1.
    AdjustedForInterval,
    /// Mid-P bounds were computed on raw integer counts while the point uses
    /// adjusted counts.
    RawCountInterval,
    /// Conditional disease shares were treated as fixed (registry mode).
    FixedIncidence,
    /// A proportion needed for the logit was 0 or 1.
    DegenerateProportion,
    /// The disease state had no cases.
    EmptyRow,
    /// The bounds were widened to include the reported point.
    BoundExtended,
    /// Stage-share and phi blocks treated as uncorrelated.
    BlockDiagonalCovariance,
}

/// A point estimate with a two-sided confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateInterval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    pub method: Method,
    #[serde(default)]
    pub flags: BTreeSet<Flag>,
}

impl EstimateInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn with_flag(mut self, flag: Flag) -> Self {
        self.flags.insert(flag);
        self
    }

    /// Moves `point` to `value` and widens the bounds to keep it inside.
    pub(crate) fn repoint(mut self, value: f64) -> Self {
        self.point = value;
        if value < self.lower || value > self.upper {
            self.lower = self.lower.min(value);
            self.upper = self.upper.max(value);
            self.flags.insert(Flag::BoundExtended);
        }
        self
    }

    /// Reflects the interval through `1 - x`.
    pub fn complement(&self) -> Self {
        EstimateInterval {
            point: 1.0 - self.point,
            lower: 1.0 - self.upper,
            upper: 1.0 - self.lower,
            alpha: self.alpha,
            method: self.method,
            flags: self.flags.clone(),
        }
    }
}

/// Moments of a Binomial(n, p) count conditioned on being positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedBinomialMoments {
    pub n_trials: u64,
    pub success_prob: f64,
    pub prob_positive: f64,
    pub mean_inverse_given_positive: f64,
    pub mean_given_positive: f64,
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")))
    }
}

// Coefficients from highest to lowest degree.
const AS241_A: [f64; 8] = [
    2509.0809287301227,
    33430.57558358813,
    67265.7709270087,
    45921.95393154987,
    13731.69376550946,
    1971.5909503065514,
    133.14166789178438,
    3.3871328727963666,
];
const AS241_B: [f64; 8] = [
    5226.495278852546,
    28729.085735721943,
    39307.89580009271,
    21213.794301586596,
    5394.196021424751,
    687.1870074920579,
    42.31333070160091,
    1.0,
];
const AS241_C: [f64; 8] = [
    7.745450142783414e-4,
    0.022723844989269184,
    0.2417807251774506,
    1.2704582524523684,
    3.6478483247632045,
    5.769497221460691,
    4.630337846156545,
    1.4234371107496835,
];
const AS241_D: [f64; 8] = [
    1.0507500716444169e-9,
    5.475938084995345e-4,
    0.015198666563616457,
    0.14810397642748008,
    0.6897673349851,
    1.6763848301838038,
    2.053191626637759,
    1.0,
];
const AS241_E: [f64; 8] = [
    2.010334399292288e-7,
    2.7115555687434876e-5,
    0.0012426609473880784,
    0.026532189526576124,
    0.2965605718285049,
    1.7848265399172913,
    5.463784911164114,
    6.657904643501103,
];
const AS241_F: [f64; 8] = [
    2.0442631033899398e-15,
    1.421511758316446e-7,
    1.8463183175100548e-5,
    7.868691311456133e-4,
    0.014875361290850615,
    0.1369298809227358,
    0.5998322065558879,
    1.0,
];

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Inverse of the standard normal CDF (Wichura's AS241, double precision).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(&AS241_A, r) / horner(&AS241_B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        horner(&AS241_C, r - 1.6) / horner(&AS241_D, r - 1.6)
    } else {
        horner(&AS241_E, r - 5.0) / horner(&AS241_F, r - 5.0)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Two-sided critical value `z_{1 - alpha/2}`.
pub fn z_critical(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha / 2.0)
}

/// `P(n > 0)` for `n ~ Binomial(n_trials, p)`.
pub fn prob_positive(n_trials: u64, p: f64) -> Result<f64> {
    check_prob(p)?;
    if n_trials == 0 {
        return Err(Error::Domain("n_trials must be at least 1".into()));
    }
    // 1 - (1-p)^n without cancellation for small p.
    Ok(-((n_trials as f64) * (-p).ln_1p()).exp_m1())
}

/// Moments of `n | n > 0` for `n ~ Binomial(n_trials, p)`.
///
/// `E(1/n | n > 0)` is an exact sum over the support. The pmf is built by the
/// ratio recurrence outward from the mode and normalised by its own total, so
/// nothing underflows near the mode for large `n_trials`.
pub fn truncated_moments(n_trials: u64, p: f64) -> Result<TruncatedBinomialMoments> {
    check_prob(p)?;
    if n_trials == 0 {
        return Err(Error::Domain("n_trials must be at least 1".into()));
    }
    if p == 0.0 {
        return Err(Error::Domain(
            "success probability 0: the event n > 0 has probability 0".into(),
        ));
    }
    let n = n_trials as usize;
    let prob_positive = prob_positive(n_trials, p)?;
    let nf = n as f64;
    let mean_inverse = if p == 1.0 {
        1.0 / nf
    } else {
        let odds = p / (1.0 - p);
        let mode = (((nf + 1.0) * p).floor() as usize).min(n);
        let mut weights = vec![0.0f64; n + 1];
        weights[mode] = 1.0;
        for x in mode..n {
            weights[x + 1] = weights[x] * ((nf - x as f64) / (x as f64 + 1.0)) * odds;
        }
        for x in (1..=mode).rev() {
            weights[x - 1] = weights[x] * (x as f64 / (nf - x as f64 + 1.0)) / odds;
        }
        let mut positive = 0.0;
        let mut inverse = 0.0;
        // Sum small terms first.
        for x in (1..=n).rev() {
            positive += weights[x];
            inverse += weights[x] / x as f64;
        }
        inverse / positive
    };
    Ok(TruncatedBinomialMoments {
        n_trials,
        success_prob: p,
        prob_positive,
        mean_inverse_given_positive: mean_inverse,
        mean_given_positive: nf * p / prob_positive,
    })
}

fn bisect(mut lo: f64, mut hi: f64, increasing: bool, f: impl Fn(f64) -> f64) -> f64 {
    // f is monotone on [lo, hi] and crosses zero.
    while hi - lo > MIDP_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn binomial(trials: u64, p: f64) -> Binomial {
    Binomial::new(p.clamp(0.0, 1.0), trials).expect("probability clamped to [0, 1]")
}

/// `P(X > x) + P(X = x)/2` under Binomial(trials, p).
pub fn midp_upper_tail(successes: u64, trials: u64, p: f64) -> f64 {
    let b = binomial(trials, p);
    b.sf(successes) + 0.5 * b.pmf(successes)
}

/// `P(X < x) + P(X = x)/2` under Binomial(trials, p).
pub fn midp_lower_tail(successes: u64, trials: u64, p: f64) -> f64 {
    let b = binomial(trials, p);
    let below = if successes == 0 { 0.0 } else { b.cdf(successes - 1) };
    below + 0.5 * b.pmf(successes)
}

/// Mid-P interval for a binomial proportion.
pub fn midp_interval(successes: u64, trials: u64, alpha: f64) -> Result<EstimateInterval> {
    check_alpha(alpha)?;
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    if successes > trials {
        return Err(Error::Domain(format!(
            "successes {successes} exceed trials {trials}"
        )));
    }
    let target = alpha / 2.0;
    let lower = if successes == 0 {
        0.0
    } else {
        bisect(0.0, 1.0, true, |p| {
            midp_upper_tail(successes, trials, p) - target
        })
    };
    let upper = if successes == trials {
        1.0
    } else {
        bisect(0.0, 1.0, false, |p| {
            midp_lower_tail(successes, trials, p) - target
        })
    };
    Ok(EstimateInterval {
        point: successes as f64 / trials as f64,
        lower,
        upper,
        alpha,
        method: Method::Midp,
        flags: BTreeSet::new(),
    })
}

/// Wald interval on the logit scale, mapped back to probabilities.
///
/// A point on the boundary, or a non-finite or negative variance, yields a
/// zero-width interval marked [`Method::Degenerate`].
pub fn wald_logit_interval(point: f64, variance_of_logit: f64, alpha: f64) -> EstimateInterval {
    let usable = point > 0.0
        && point < 1.0
        && variance_of_logit.is_finite()
        && variance_of_logit >= 0.0
        && alpha > 0.0
        && alpha < 1.0;
    if !usable {
        let mut flags = BTreeSet::new();
        flags.insert(Flag::DegenerateProportion);
        return EstimateInterval {
            point,
            lower: point,
            upper: point,
            alpha,
            method: Method::Degenerate,
            flags,
        };
    }
    let center = logit(point);
    let half = z_critical(alpha) * variance_of_logit.sqrt();
    EstimateInterval {
        point,
        lower: expit(center - half),
        upper: expit(center + half),
        alpha,
        method: Method::LogitWald,
        flags: BTreeSet::new(),
    }
}
