//! Analog front end: the dynamic comparator and the programmable offset
//! capacitor bank, plus the directional mismatch comparison they implement
//! together.
//!
//! The comparator resolves v_p − v_n against its static offset with one fresh
//! input-referred noise draw per decision. The offset bank is a chain of
//! identical capacitors switched in series, so k stages present C_of/k — small
//! offsets come from more stages, not smaller (unmanufacturable) capacitors.
//!
//! A directional mismatch test attaches the bank to one side and asks whether
//! the other side's unit exceeds its counterpart by more than the offset:
//!
//!   side P:  (cu_p[i] + cof)·v_ref/(Σcu_p + cof) + v_os + n  <  cu_n[i]·v_ref/Σcu_n
//!   side N:  (cu_n[i] + cof)·v_ref/(Σcu_n + cof) − v_os + n  <  cu_p[i]·v_ref/Σcu_p
//!
//! Output is 1 iff the strict inequality holds; exact ties resolve to 0, which
//! keeps the noise-free P↔N swap symmetry intact. The static offset enters the
//! two directions with opposite signs because the bank moves to the opposite
//! comparator input between them.

use crate::error::{Error, Result};
use crate::process::{ChipInstance, FabProcess};
use crate::rng::{Stream, StreamKey};

/// Which comparator input the offset bank is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    AttachedToP,
    AttachedToN,
    Detached,
}

/// Programmable series-capacitor offset bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetCapBank {
    /// Capacitance of one series stage (farads).
    pub series_unit: f64,
    /// Number of stages currently in the chain.
    pub stages: u32,
    pub polarity: Polarity,
}

impl OffsetCapBank {
    pub fn new(series_unit: f64, stages: u32, polarity: Polarity) -> Result<Self> {
        if !(series_unit > 0.0) || !series_unit.is_finite() {
            return Err(Error::invalid(format!(
                "offset bank series_unit must be > 0, got {series_unit:e}"
            )));
        }
        Ok(OffsetCapBank {
            series_unit,
            stages,
            polarity,
        })
    }
}

/// Effective offset capacitance of the bank: k identical capacitors in series
/// present C/k. Errors on zero stages or a detached bank.
pub fn cof_value(bank: &OffsetCapBank) -> Result<f64> {
    if bank.polarity == Polarity::Detached {
        return Err(Error::invalid("offset bank is detached"));
    }
    if bank.stages == 0 {
        return Err(Error::invalid("offset bank needs at least one series stage"));
    }
    Ok(bank.series_unit / bank.stages as f64)
}

/// Comparator behavioral model: static offset, input-referred noise, and the
/// keyed stream its noise draws come from. Identical (sigma_n, v_offset, key)
/// reproduce the identical noise sequence.
#[derive(Debug, Clone)]
pub struct ComparatorModel {
    pub sigma_n: f64,
    pub v_offset: f64,
    key: StreamKey,
}

impl ComparatorModel {
    pub fn new(sigma_n: f64, v_offset: f64, key: StreamKey) -> Result<Self> {
        if sigma_n < 0.0 || !sigma_n.is_finite() {
            return Err(Error::invalid(format!("sigma_n must be >= 0, got {sigma_n}")));
        }
        if !v_offset.is_finite() {
            return Err(Error::invalid("v_offset must be finite"));
        }
        Ok(ComparatorModel {
            sigma_n,
            v_offset,
            key,
        })
    }

    /// Comparator for one chip: stream id derived from the chip's lineage so
    /// concurrent per-chip work never shares a noise sequence.
    pub fn for_chip(process: &FabProcess, chip: &ChipInstance, purpose_tag: u64) -> Result<Self> {
        let (global_seed, chip_index) = chip.seed_lineage;
        Self::new(
            process.sigma_n,
            process.v_offset,
            StreamKey::derive(global_seed, &[purpose_tag, chip_index]),
        )
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Noise draw `index` of this comparator's stream, in volts.
    pub fn noise_at(&self, index: u64) -> f64 {
        if self.sigma_n == 0.0 {
            return 0.0;
        }
        self.sigma_n * Stream::new(self.key).normal_at(index)
    }
}

/// Sequential decision view: each compare consumes exactly one noise draw.
pub struct CompareCursor<'a> {
    model: &'a ComparatorModel,
    stream: Stream,
    next: u64,
}

impl<'a> CompareCursor<'a> {
    /// Cursor starting at draw `origin` of the model's stream. Conversions
    /// that must be replayable start at a fixed origin.
    pub fn new(model: &'a ComparatorModel, origin: u64) -> Self {
        CompareCursor {
            model,
            stream: Stream::new(model.key()),
            next: origin,
        }
    }

    pub fn model(&self) -> &ComparatorModel {
        self.model
    }

    /// One comparator decision: 1 iff v_p + v_offset + noise > v_n (strict;
    /// an exact tie at zero noise resolves to 0).
    pub fn compare(&mut self, v_p: f64, v_n: f64) -> Result<bool> {
        if !v_p.is_finite() || !v_n.is_finite() {
            return Err(Error::invalid(format!("compare: non-finite inputs ({v_p}, {v_n})")));
        }
        let noise = if self.model.sigma_n == 0.0 {
            self.next += 1; // the draw is still consumed
            0.0
        } else {
            let z = self.stream.normal_at(self.next);
            self.next += 1;
            self.model.sigma_n * z
        };
        Ok(v_p + self.model.v_offset + noise > v_n)
    }
}

/// Direction of a mismatch test: which side the offset bank loads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CofSide {
    /// Bank on the P side: fires when the N unit out-grows its P partner.
    P,
    /// Bank on the N side: fires when the P unit out-grows its N partner.
    N,
}

/// Core inequality of a directional test, with the noise-plus-offset term
/// already combined into `disturb` (volts, added to the loaded side).
/// Shared by the public operation and bulk signature extraction.
#[inline]
pub fn eval_mismatch(
    chip: &ChipInstance,
    i: usize,
    cof: f64,
    side: CofSide,
    disturb: f64,
    v_ref: f64,
    sum_p: f64,
    sum_n: f64,
) -> bool {
    let (own, own_sum, other, other_sum) = match side {
        CofSide::P => (chip.cu_p[i], sum_p, chip.cu_n[i], sum_n),
        CofSide::N => (chip.cu_n[i], sum_n, chip.cu_p[i], sum_p),
    };
    let loaded = (own + cof) * v_ref / (own_sum + cof);
    let bare = other * v_ref / other_sum;
    loaded + disturb < bare
}

/// One directional mismatch decision for unit pair `i`, consuming one noise
/// draw from the cursor. Strict inequality; ties are 0.
pub fn mismatch_compare(
    chip: &ChipInstance,
    i: usize,
    cof: f64,
    side: CofSide,
    cmp: &mut CompareCursor<'_>,
    v_ref: f64,
) -> Result<bool> {
    if i >= chip.n_pairs() {
        return Err(Error::invalid(format!(
            "pair index {i} out of range (chip has {} pairs)",
            chip.n_pairs()
        )));
    }
    if cof < 0.0 || !cof.is_finite() {
        return Err(Error::invalid(format!("cof must be >= 0, got {cof:e}")));
    }
    if !(v_ref > 0.0) {
        return Err(Error::invalid(format!("v_ref must be > 0, got {v_ref}")));
    }
    let model = cmp.model;
    let noise = if model.sigma_n == 0.0 {
        cmp.next += 1;
        0.0
    } else {
        let z = cmp.stream.normal_at(cmp.next);
        cmp.next += 1;
        model.sigma_n * z
    };
    // The bank swaps comparator inputs between directions, so the static
    // offset flips sign while the (symmetric) noise does not.
    let disturb = match side {
        CofSide::P => model.v_offset + noise,
        CofSide::N => -model.v_offset + noise,
    };
    Ok(eval_mismatch(
        chip,
        i,
        cof,
        side,
        disturb,
        v_ref,
        chip.sum_p(),
        chip.sum_n(),
    ))
}
