//! Failure-rate analytics over authentication-characteristic distributions:
//! window pass probabilities, the authentic/counterfeit failure-rate
//! decomposition, threshold optimization, and joint multi-characteristic
//! acceptance under correlation.
//!
//! Gaussian tail evaluation goes through the library's erf-based normal CDF,
//! whose absolute error is far below the 1e-7 documentation bound.

pub mod experiments;
pub mod quad;

use crate::error::{Error, Result};
use crate::rng::{Stream, StreamKey};
use quad::{bvn_rectangle, GaussLegendre};
use statrs::distribution::{ContinuousCDF, Normal};

/// A one-dimensional Gaussian with positive spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub std: f64,
}

impl Gaussian {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::invalid(format!(
                "Gaussian requires finite mean and std > 0, got N({mean}, {std})"
            )));
        }
        Ok(Gaussian { mean, std })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        Normal::new(self.mean, self.std).expect("validated").cdf(x)
    }

    /// Standardize a point: (x − μ)/σ, preserving infinities.
    pub fn z(&self, x: f64) -> f64 {
        if x.is_infinite() {
            x
        } else {
            (x - self.mean) / self.std
        }
    }
}

/// Acceptance window [t_l, t_u].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPair {
    pub t_l: f64,
    pub t_u: f64,
}

impl ThresholdPair {
    pub fn new(t_l: f64, t_u: f64) -> Result<Self> {
        if t_l.is_nan() || t_u.is_nan() || t_l > t_u {
            return Err(Error::invalid(format!(
                "thresholds must satisfy t_l <= t_u, got ({t_l}, {t_u})"
            )));
        }
        Ok(ThresholdPair { t_l, t_u })
    }
}

/// The statistical picture of one authentication characteristic: the
/// all-chips distribution, the authentic-only distribution, the authentic
/// prior, and (for joint multi-characteristic analysis) the correlation
/// between repeated characteristics on the same chip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcDistribution {
    pub f_ac: Gaussian,
    pub f_ac_given_a: Gaussian,
    pub p_a: f64,
    pub rho: f64,
}

impl AcDistribution {
    pub fn new(f_ac: Gaussian, f_ac_given_a: Gaussian, p_a: f64, rho: f64) -> Result<Self> {
        if !(p_a > 0.0 && p_a < 1.0) {
            return Err(Error::invalid(format!("prior must lie in (0,1), got {p_a}")));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::invalid(format!("|rho| must be < 1, got {rho}")));
        }
        Ok(AcDistribution {
            f_ac,
            f_ac_given_a,
            p_a,
            rho,
        })
    }

    pub fn p_c(&self) -> f64 {
        1.0 - self.p_a
    }
}

/// Probability that a draw from `g` lands inside the window.
pub fn pass_probability(g: &Gaussian, t: &ThresholdPair) -> f64 {
    (g.cdf(t.t_u) - g.cdf(t.t_l)).max(0.0)
}

/// Full decomposition behind one failure-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureReport {
    /// P(counterfeit accepted) + P(authentic rejected), prior-weighted.
    pub a_f: f64,
    pub p_pass: f64,
    pub p_pass_given_a: f64,
    pub p_pass_given_c: f64,
    /// False when the total-probability decomposition of P(Pass | C) left
    /// [0, 1], i.e. the declared f_ac is not a mixture actually containing
    /// p_a · f_ac_given_a. The counterfeit pass probability then falls back
    /// to the all-chips value (see below).
    pub mixture_consistent: bool,
}

fn failure_rate_inner(d: &AcDistribution, t: &ThresholdPair) -> FailureReport {
    let p_pass = pass_probability(&d.f_ac, t);
    let p_pass_a = pass_probability(&d.f_ac_given_a, t);
    let raw = (p_pass - d.p_a * p_pass_a) / d.p_c();
    // tolerate only floating-point dust outside [0,1]
    let consistent = (-1e-12..=1.0 + 1e-12).contains(&raw);
    // On an inconsistent mixture the decomposition is meaningless; the
    // all-chips distribution is the best available stand-in for the
    // counterfeit population. (Clamping raw into [0,1] instead would let a
    // threshold window claim zero counterfeit acceptance purely out of the
    // inconsistency, collapsing every downstream optimum to it.)
    let p_pass_c = if consistent { raw.clamp(0.0, 1.0) } else { p_pass };
    FailureReport {
        a_f: d.p_c() * p_pass_c + d.p_a * (1.0 - p_pass_a),
        p_pass,
        p_pass_given_a: p_pass_a,
        p_pass_given_c: p_pass_c,
        mixture_consistent: consistent,
    }
}

/// Failure rate under the window, tolerating inconsistent mixtures via the
/// documented fallback (flagged in the report).
pub fn failure_rate(d: &AcDistribution, t: &ThresholdPair) -> FailureReport {
    failure_rate_inner(d, t)
}

/// Like [`failure_rate`] but inconsistent mixtures are an error carrying the
/// out-of-range decomposition value.
pub fn failure_rate_strict(d: &AcDistribution, t: &ThresholdPair) -> Result<FailureReport> {
    let r = failure_rate_inner(d, t);
    if !r.mixture_consistent {
        let raw = (r.p_pass - d.p_a * r.p_pass_given_a) / d.p_c();
        return Err(Error::InconsistentMixture(raw));
    }
    Ok(r)
}

/// Grid-search the window minimizing the failure rate, then refine locally.
///
/// The search envelope spans μ ± 5σ of both distributions on a 400×400 grid
/// (t_l ≤ t_u half), followed by three rounds of 21×21 refinement around the
/// incumbent at shrinking scale.
pub fn optimize_thresholds(d: &AcDistribution) -> (ThresholdPair, f64) {
    let lo = (d.f_ac.mean - 5.0 * d.f_ac.std).min(d.f_ac_given_a.mean - 5.0 * d.f_ac_given_a.std);
    let hi = (d.f_ac.mean + 5.0 * d.f_ac.std).max(d.f_ac_given_a.mean + 5.0 * d.f_ac_given_a.std);
    let n = 400usize;
    let step = (hi - lo) / (n - 1) as f64;
    let at = |i: usize| lo + i as f64 * step;

    let mut best = (ThresholdPair { t_l: lo, t_u: lo }, f64::INFINITY);
    for i in 0..n {
        for j in i..n {
            let t = ThresholdPair { t_l: at(i), t_u: at(j) };
            let a_f = failure_rate_inner(d, &t).a_f;
            if a_f < best.1 {
                best = (t, a_f);
            }
        }
    }

    // local refinement: ±2 coarse cells re-gridded at 21×21, three times
    let mut span = 2.0 * step;
    for _ in 0..3 {
        let (center, _) = best;
        let fine = 21usize;
        let fstep = 2.0 * span / (fine - 1) as f64;
        for i in 0..fine {
            for j in 0..fine {
                let t_l = center.t_l - span + i as f64 * fstep;
                let t_u = center.t_u - span + j as f64 * fstep;
                if t_l > t_u {
                    continue;
                }
                let t = ThresholdPair { t_l, t_u };
                let a_f = failure_rate_inner(d, &t).a_f;
                if a_f < best.1 {
                    best = (t, a_f);
                }
            }
        }
        span /= 10.0;
    }
    best
}

/// Result of a joint multi-characteristic failure evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiAcReport {
    pub a_f: f64,
    pub accept_given_c: f64,
    pub accept_given_a: f64,
    /// Monte Carlo standard error of `a_f`; `None` for the analytic path.
    pub mc_standard_error: Option<f64>,
}

/// Failure rate when a chip carries `n = windows.len()` exchangeable copies
/// of the characteristic (equal marginals, pairwise correlation ρ) and is
/// accepted iff at least `m` of them pass their windows.
///
/// n = 2 is evaluated analytically through bivariate rectangle quadrature;
/// larger n falls back to Monte Carlo over the equicorrelated Gaussian
/// (requiring ρ ≥ 0) with the standard error reported.
///
/// Both populations are evaluated directly against their declared marginals
/// (authentic: f_ac_given_a, counterfeit: f_ac); no mixture decomposition is
/// attempted in the joint setting.
pub fn multi_ac_failure(
    d: &AcDistribution,
    m: usize,
    windows: &[ThresholdPair],
    mc_samples: u64,
    seed: u64,
) -> Result<MultiAcReport> {
    let n = windows.len();
    if n < 2 {
        return Err(Error::invalid("joint analysis needs at least 2 characteristics"));
    }
    if m == 0 || m > n {
        return Err(Error::invalid(format!("acceptance rule {m}-of-{n} is malformed")));
    }
    if n == 2 {
        let rule = GaussLegendre::new(64)?;
        let accept = |g: &Gaussian| -> Result<f64> {
            let (a1, b1) = (g.z(windows[0].t_l), g.z(windows[0].t_u));
            let (a2, b2) = (g.z(windows[1].t_l), g.z(windows[1].t_u));
            let p12 = bvn_rectangle(a1, b1, a2, b2, d.rho, &rule)?;
            let p1 = pass_probability(g, &windows[0]);
            let p2 = pass_probability(g, &windows[1]);
            Ok(match m {
                1 => (p1 + p2 - p12).clamp(0.0, 1.0),
                _ => p12,
            })
        };
        let accept_c = accept(&d.f_ac)?;
        let accept_a = accept(&d.f_ac_given_a)?;
        return Ok(MultiAcReport {
            a_f: d.p_c() * accept_c + d.p_a * (1.0 - accept_a),
            accept_given_c: accept_c,
            accept_given_a: accept_a,
            mc_standard_error: None,
        });
    }

    if d.rho < 0.0 {
        return Err(Error::invalid(
            "Monte Carlo joint analysis supports only nonnegative correlation",
        ));
    }
    if mc_samples == 0 {
        return Err(Error::invalid("Monte Carlo joint analysis needs samples > 0"));
    }
    let shared_w = d.rho.sqrt();
    let own_w = (1.0 - d.rho).sqrt();
    // draws indexed (sample, characteristic): n+1 normals per sample
    let stride = n as u64 + 1;
    let run = |g: &Gaussian, tag: u64| -> f64 {
        let mut stream = Stream::new(StreamKey::derive(seed, &[0x51, tag]));
        let mut hits = 0u64;
        for s in 0..mc_samples {
            let base = s * stride;
            let z = stream.normal_at(base);
            let mut passed = 0usize;
            for (k, w) in windows.iter().enumerate() {
                let x = g.mean + g.std * (shared_w * z + own_w * stream.normal_at(base + 1 + k as u64));
                if x >= w.t_l && x <= w.t_u {
                    passed += 1;
                }
            }
            hits += u64::from(passed >= m);
        }
        hits as f64 / mc_samples as f64
    };
    let accept_c = run(&d.f_ac, 0);
    let accept_a = run(&d.f_ac_given_a, 1);
    let a_f = d.p_c() * accept_c + d.p_a * (1.0 - accept_a);
    // a_f is a prior-weighted sum of two independent binomial estimates
    let var = d.p_c().powi(2) * accept_c * (1.0 - accept_c) / mc_samples as f64
        + d.p_a.powi(2) * accept_a * (1.0 - accept_a) / mc_samples as f64;
    Ok(MultiAcReport {
        a_f,
        accept_given_c: accept_c,
        accept_given_a: accept_a,
        mc_standard_error: Some(var.sqrt()),
    })
}

/// Sweep ρ and the window grid for the minimal joint failure rate under an
/// m-of-n rule with the same window applied to every characteristic.
pub fn optimize_joint_thresholds(
    d: &AcDistribution,
    m: usize,
    n: usize,
    grid_points: usize,
) -> Result<(ThresholdPair, f64)> {
    if n != 2 {
        return Err(Error::invalid("joint optimization is implemented for n = 2"));
    }
    let lo = (d.f_ac.mean - 5.0 * d.f_ac.std).min(d.f_ac_given_a.mean - 5.0 * d.f_ac_given_a.std);
    let hi = (d.f_ac.mean + 5.0 * d.f_ac.std).max(d.f_ac_given_a.mean + 5.0 * d.f_ac_given_a.std);
    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut best = (ThresholdPair { t_l: lo, t_u: lo }, f64::INFINITY);
    for i in 0..grid_points {
        for j in i..grid_points {
            let t = ThresholdPair {
                t_l: lo + i as f64 * step,
                t_u: lo + j as f64 * step,
            };
            let r = multi_ac_failure(d, m, &[t, t], 0, 0)?;
            if r.a_f < best.1 {
                best = (t, r.a_f);
            }
        }
    }
    Ok(best)
}
