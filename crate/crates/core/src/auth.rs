//! Authentication engine: condenses an enrollment population into a compact
//! card (average trace, per-point spread, weights, and a distance threshold)
//! and decides whether a device trace belongs to that population.
//!
//! The decision statistic is the weighted Euclidean distance between the
//! device's normalized trace and the enrollment average; the threshold is an
//! empirical quantile of the enrollment set's own distances. Per-point bound
//! violations (|deviation| > k_sigma · std) are reported as diagnostics but
//! do not decide the verdict.
//!
//! Cards serialize to a canonical JSON form — fixed key order, fixed float
//! formatting — so identical enrollments produce byte-identical files.

use crate::error::{Error, Result};
use crate::report::fmt_sci;
use crate::signature::{average_trace, SignatureTrace};
use serde::Deserialize;

/// Vendor-issued authentication card.
#[derive(Debug, Clone, PartialEq)]
pub struct ACCard {
    pub schema_version: u32,
    pub process_label: String,
    pub enrollment_size: usize,
    pub created_seed: u64,
    pub k_sigma: f64,
    pub d_threshold: f64,
    /// True when every enrollment trace was identical: std is zero
    /// everywhere and the threshold degenerates. Such a card only
    /// re-accepts exact copies; real populations never produce it.
    pub degenerate: bool,
    pub cof_over_cu: Vec<f64>,
    pub avg: Vec<f64>,
    pub std: Vec<f64>,
    /// Per-point weights, normalized to sum to the grid length.
    pub weights: Vec<f64>,
}

/// Outcome of authenticating one trace against a card.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthDecision {
    pub accept: bool,
    pub d_auth: f64,
    pub d_auth_weighted: f64,
    /// Grid points where |trace − avg| exceeds k_sigma · std.
    pub bound_violations: usize,
}

pub const CARD_SCHEMA_VERSION: u32 = 1;

fn check_grid(card: &ACCard, trace: &SignatureTrace) -> Result<()> {
    if card.cof_over_cu != trace.cof_over_cu {
        return Err(Error::GridMismatch(format!(
            "trace {} grid does not match the card's grid",
            trace.chip_id
        )));
    }
    Ok(())
}

/// Unweighted Euclidean distance between a trace and the card average.
pub fn d_auth(trace: &SignatureTrace, card: &ACCard) -> Result<f64> {
    check_grid(card, trace)?;
    Ok(trace
        .normalized
        .iter()
        .zip(&card.avg)
        .map(|(x, a)| (x - a) * (x - a))
        .sum::<f64>()
        .sqrt())
}

/// Weighted Euclidean distance √Σ ηⱼ·(xⱼ − avgⱼ)².
pub fn d_auth_weighted(trace: &SignatureTrace, card: &ACCard) -> Result<f64> {
    check_grid(card, trace)?;
    for &w in &card.weights {
        if w < 0.0 || !w.is_finite() {
            return Err(Error::invalid(format!("card carries invalid weight {w}")));
        }
    }
    Ok(trace
        .normalized
        .iter()
        .zip(&card.avg)
        .zip(&card.weights)
        .map(|((x, a), w)| w * (x - a) * (x - a))
        .sum::<f64>()
        .sqrt())
}

/// Turn per-point sensitivities into weights proportional to them,
/// normalized so they sum to the grid length (all-ones ⇔ uniform).
pub fn weight_assign(sensitivity: &[f64]) -> Result<Vec<f64>> {
    if sensitivity.is_empty() {
        return Err(Error::invalid("sensitivity profile must not be empty"));
    }
    let mut total = 0.0;
    for &s in sensitivity {
        if s < 0.0 || !s.is_finite() {
            return Err(Error::invalid(format!("sensitivity {s} must be finite and >= 0")));
        }
        total += s;
    }
    if total == 0.0 {
        return Err(Error::invalid("sensitivity profile is identically zero"));
    }
    let scale = sensitivity.len() as f64 / total;
    Ok(sensitivity.iter().map(|&s| s * scale).collect())
}

/// Build a card from an enrollment population.
///
/// `weights` may be `None` for uniform weighting. The threshold is the
/// `threshold_quantile` empirical quantile (rank ⌈q·n⌉) of the enrollment
/// traces' own weighted distances from the average.
pub fn enroll(
    traces: &[SignatureTrace],
    k_sigma: f64,
    weights: Option<&[f64]>,
    threshold_quantile: f64,
    process_label: &str,
) -> Result<ACCard> {
    if traces.len() < 10 {
        return Err(Error::invalid(format!(
            "enrollment needs at least 10 traces, got {}",
            traces.len()
        )));
    }
    if !(threshold_quantile > 0.5 && threshold_quantile < 1.0) {
        return Err(Error::invalid(format!(
            "threshold quantile must lie in (0.5, 1), got {threshold_quantile}"
        )));
    }
    if !(k_sigma > 0.0) || !k_sigma.is_finite() {
        return Err(Error::invalid(format!("k_sigma must be > 0, got {k_sigma}")));
    }
    let stats = average_trace(traces)?;
    let m = stats.avg.len();
    let weights = match weights {
        Some(w) => {
            if w.len() != m {
                return Err(Error::GridMismatch(format!(
                    "got {} weights for a {m}-point grid",
                    w.len()
                )));
            }
            weight_assign(w)?
        }
        None => vec![1.0; m],
    };

    let mut card = ACCard {
        schema_version: CARD_SCHEMA_VERSION,
        process_label: process_label.to_string(),
        enrollment_size: traces.len(),
        created_seed: traces[0].seed,
        k_sigma,
        d_threshold: 0.0,
        degenerate: stats.std.iter().all(|&s| s == 0.0),
        cof_over_cu: stats.cof_over_cu.clone(),
        avg: stats.avg.clone(),
        std: stats.std.clone(),
        weights,
    };

    let mut dists = traces
        .iter()
        .map(|t| d_auth_weighted(t, &card))
        .collect::<Result<Vec<f64>>>()?;
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let n = dists.len();
    let rank = ((threshold_quantile * n as f64).ceil() as usize).clamp(1, n);
    card.d_threshold = dists[rank - 1];
    Ok(card)
}

/// Decide one trace against a card.
pub fn authenticate(trace: &SignatureTrace, card: &ACCard) -> Result<AuthDecision> {
    let d = d_auth(trace, card)?;
    let dw = d_auth_weighted(trace, card)?;
    let viol = trace
        .normalized
        .iter()
        .zip(&card.avg)
        .zip(&card.std)
        .filter(|((x, a), s)| (**x - **a).abs() > card.k_sigma * **s)
        .count();
    Ok(AuthDecision {
        accept: dw <= card.d_threshold,
        d_auth: d,
        d_auth_weighted: dw,
        bound_violations: viol,
    })
}

// ---------------------------------------------------------------------------
// Canonical card serialization
// ---------------------------------------------------------------------------

fn push_float_array(out: &mut String, name: &str, values: &[f64]) {
    out.push_str(&format!("  \"{name}\": ["));
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('"');
        out.push_str(&fmt_sci(v));
        out.push('"');
    }
    out.push(']');
}

/// Canonical JSON encoding: fixed key order, floats as fixed-precision
/// scientific strings. Identical cards produce identical bytes.
pub fn card_to_json(card: &ACCard) -> String {
    let mut s = String::with_capacity(1024);
    s.push_str("{\n");
    s.push_str(&format!("  \"schema_version\": {},\n", card.schema_version));
    s.push_str(&format!(
        "  \"process_label\": {},\n",
        serde_json::to_string(&card.process_label).expect("string encodes")
    ));
    s.push_str(&format!("  \"enrollment_size\": {},\n", card.enrollment_size));
    s.push_str(&format!("  \"created_seed\": {},\n", card.created_seed));
    s.push_str(&format!("  \"k_sigma\": \"{}\",\n", fmt_sci(card.k_sigma)));
    s.push_str(&format!("  \"d_threshold\": \"{}\",\n", fmt_sci(card.d_threshold)));
    s.push_str(&format!("  \"degenerate\": {},\n", card.degenerate));
    push_float_array(&mut s, "cof_over_cu", &card.cof_over_cu);
    s.push_str(",\n");
    push_float_array(&mut s, "avg", &card.avg);
    s.push_str(",\n");
    push_float_array(&mut s, "std", &card.std);
    s.push_str(",\n");
    push_float_array(&mut s, "weights", &card.weights);
    s.push_str("\n}\n");
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CardWire {
    schema_version: u32,
    process_label: String,
    enrollment_size: usize,
    created_seed: u64,
    k_sigma: String,
    d_threshold: String,
    degenerate: bool,
    cof_over_cu: Vec<String>,
    avg: Vec<String>,
    std: Vec<String>,
    weights: Vec<String>,
}

fn parse_float(field: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::CardFormat(format!("{field}: bad float {s:?}: {e}")))
}

fn parse_floats(field: &str, v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| parse_float(field, s)).collect()
}

/// Strict parse of a canonical card; unknown fields, schema drift, or
/// mismatched array lengths are errors.
pub fn card_from_json(text: &str) -> Result<ACCard> {
    let wire: CardWire =
        serde_json::from_str(text).map_err(|e| Error::CardFormat(format!("card JSON: {e}")))?;
    if wire.schema_version != CARD_SCHEMA_VERSION {
        return Err(Error::CardFormat(format!(
            "unsupported card schema {} (supported: {CARD_SCHEMA_VERSION})",
            wire.schema_version
        )));
    }
    let card = ACCard {
        schema_version: wire.schema_version,
        process_label: wire.process_label,
        enrollment_size: wire.enrollment_size,
        created_seed: wire.created_seed,
        k_sigma: parse_float("k_sigma", &wire.k_sigma)?,
        d_threshold: parse_float("d_threshold", &wire.d_threshold)?,
        degenerate: wire.degenerate,
        cof_over_cu: parse_floats("cof_over_cu", &wire.cof_over_cu)?,
        avg: parse_floats("avg", &wire.avg)?,
        std: parse_floats("std", &wire.std)?,
        weights: parse_floats("weights", &wire.weights)?,
    };
    let m = card.cof_over_cu.len();
    if card.avg.len() != m || card.std.len() != m || card.weights.len() != m {
        return Err(Error::CardFormat(format!(
            "array lengths disagree: grid {m}, avg {}, std {}, weights {}",
            card.avg.len(),
            card.std.len(),
            card.weights.len()
        )));
    }
    if m == 0 {
        return Err(Error::CardFormat("card has an empty grid".into()));
    }
    Ok(card)
}
