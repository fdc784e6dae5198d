//! Behavioral monotonic-switching SAR ADC.
//!
//! Each side of the differential CDAC is built from binary-weighted groups of
//! unit capacitors: sizes 2^(bits−2), …, 2, 1 plus one final unit that is
//! never switched. The largest (MSB) group is the chip's actual mismatched
//! unit array — the same physical capacitors the signature protocol reads —
//! while the smaller groups are nominal-valued.
//!
//! Conversion samples the inputs on the top plates with every bottom plate at
//! v_ref, compares once, then repeatedly grounds the largest remaining group
//! on the higher side and compares again, down to the last decision. Top-plate
//! voltages follow from charge conservation:
//!
//!   V_X = v_inX − v_ref · (grounded capacitance on side X) / (side X total)
//!
//! The output code is the decision vector read MSB-first.

use crate::error::{Error, Result};
use crate::frontend::CompareCursor;
use crate::process::ChipInstance;

/// Static conversion setup: resolution, references, and the chip whose unit
/// array forms the MSB groups.
#[derive(Debug, Clone, Copy)]
pub struct AdcConfig<'a> {
    pub bits: u32,
    pub v_ref: f64,
    /// Common-mode voltage used when mapping a differential stimulus onto
    /// (v_ip, v_in); conversion itself consumes the two single-ended inputs.
    pub v_cm: f64,
    pub chip: &'a ChipInstance,
    /// Nominal unit value for the non-MSB groups.
    pub cu_nominal: f64,
}

impl<'a> AdcConfig<'a> {
    pub fn new(bits: u32, v_ref: f64, v_cm: f64, chip: &'a ChipInstance, cu_nominal: f64) -> Result<Self> {
        if !(2..=16).contains(&bits) {
            return Err(Error::invalid(format!("bits must be in 2..=16, got {bits}")));
        }
        if !(v_ref > 0.0) || !v_ref.is_finite() {
            return Err(Error::invalid(format!("v_ref must be > 0, got {v_ref}")));
        }
        if !(0.0..=v_ref).contains(&v_cm) {
            return Err(Error::invalid(format!("v_cm must lie in [0, v_ref], got {v_cm}")));
        }
        if !(cu_nominal > 0.0) {
            return Err(Error::invalid(format!("cu_nominal must be > 0, got {cu_nominal:e}")));
        }
        let msb_units = 1usize << (bits - 2);
        if chip.n_pairs() != msb_units {
            return Err(Error::invalid(format!(
                "chip has {} unit pairs but a {bits}-bit CDAC needs {msb_units} in its largest group",
                chip.n_pairs()
            )));
        }
        Ok(AdcConfig { bits, v_ref, v_cm, chip, cu_nominal })
    }

    /// Unit-count sizes of the switchable groups, largest first, followed by
    /// the never-switched terminating unit.
    pub fn group_units(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = (0..self.bits - 1).rev().map(|k| 1usize << k).collect();
        sizes.push(1); // terminating unit
        sizes
    }

    /// Actual group capacitances for one side: the largest group is the sum
    /// of that side's chip units, the rest are nominal multiples.
    fn side_groups(&self, p_side: bool) -> Vec<f64> {
        let units = self.group_units();
        let mut caps = Vec::with_capacity(units.len());
        for (g, &u) in units.iter().enumerate() {
            if g == 0 {
                caps.push(if p_side { self.chip.sum_p() } else { self.chip.sum_n() });
            } else {
                caps.push(u as f64 * self.cu_nominal);
            }
        }
        caps
    }

    /// Map a differential stimulus around the common mode onto the two
    /// single-ended inputs.
    pub fn differential_inputs(&self, v_diff: f64) -> (f64, f64) {
        (self.v_cm + v_diff / 2.0, self.v_cm - v_diff / 2.0)
    }

    /// Code of an ideal mid-rise quantizer over the same full-scale range —
    /// the reference the behavioral converter is checked against.
    pub fn ideal_code(&self, v_diff: f64) -> u32 {
        let levels = 1u64 << self.bits;
        let x = (v_diff + self.v_ref) / (2.0 * self.v_ref) * levels as f64;
        (x.floor() as i64).clamp(0, levels as i64 - 1) as u32
    }
}

/// Bottom-plate connection state of every group on both sides; `true` means
/// grounded, `false` means at v_ref. Groups are ordered largest-first with
/// the terminating unit last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DacState {
    pub p_grounded: Vec<bool>,
    pub n_grounded: Vec<bool>,
}

/// Full record of one conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversionRecord {
    pub bits: u32,
    pub code: u32,
    /// MSB-first comparator decisions, one per bit.
    pub decisions: Vec<bool>,
    /// DAC switch state at each comparison, starting with the sampling state.
    pub dac_state_sequence: Vec<DacState>,
}

/// Run one conversion. Each decision consumes exactly one comparator noise
/// draw from the cursor, so replaying with the same cursor origin reproduces
/// the record bit-for-bit.
pub fn convert(
    cfg: &AdcConfig<'_>,
    v_ip: f64,
    v_in: f64,
    cmp: &mut CompareCursor<'_>,
) -> Result<ConversionRecord> {
    for (name, v) in [("v_ip", v_ip), ("v_in", v_in)] {
        if !(0.0..=cfg.v_ref).contains(&v) {
            return Err(Error::invalid(format!(
                "{name} = {v} outside the sampling range [0, {}]",
                cfg.v_ref
            )));
        }
    }
    let groups_p = cfg.side_groups(true);
    let groups_n = cfg.side_groups(false);
    let tot_p: f64 = groups_p.iter().sum();
    let tot_n: f64 = groups_n.iter().sum();
    let n_groups = groups_p.len();

    let mut grounded_p = vec![false; n_groups];
    let mut grounded_n = vec![false; n_groups];
    let mut decisions = Vec::with_capacity(cfg.bits as usize);
    let mut sequence = Vec::with_capacity(cfg.bits as usize);

    // Top-plate voltage by charge balance over the currently grounded groups.
    let top = |v_sample: f64, grounded: &[bool], groups: &[f64], total: f64| {
        let switched: f64 = grounded
            .iter()
            .zip(groups)
            .filter_map(|(&g, &c)| g.then_some(c))
            .sum();
        v_sample - cfg.v_ref * switched / total
    };

    for step in 0..cfg.bits as usize {
        sequence.push(DacState {
            p_grounded: grounded_p.clone(),
            n_grounded: grounded_n.clone(),
        });
        let v_p = top(v_ip, &grounded_p, &groups_p, tot_p);
        let v_n = top(v_in, &grounded_n, &groups_n, tot_n);
        let d = cmp.compare(v_p, v_n)?;
        decisions.push(d);
        // After every decision but the last, ground the largest remaining
        // group on the higher side; the terminating unit never switches.
        if step + 1 < cfg.bits as usize {
            let side = if d { &mut grounded_p } else { &mut grounded_n };
            side[step] = true;
        }
    }

    let code = decisions
        .iter()
        .fold(0u32, |acc, &d| (acc << 1) | u32::from(d));
    Ok(ConversionRecord {
        bits: cfg.bits,
        code,
        decisions,
        dac_state_sequence: sequence,
    })
}

/// True iff two records describe the identical conversion: same width, same
/// decisions, same switch-state sequence element-wise.
pub fn switching_trace_equal(a: &ConversionRecord, b: &ConversionRecord) -> bool {
    a.bits == b.bits && a.decisions == b.decisions && a.dac_state_sequence == b.dac_state_sequence
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ComparatorModel;
    use crate::process::{sample_chip, ChipInstance};
    use crate::rng::{purpose, StreamKey};

    fn ideal_chip(n: usize, cu: f64) -> ChipInstance {
        ChipInstance {
            chip_id: 0,
            cu_p: vec![cu; n],
            cu_n: vec![cu; n],
            cof_series_unit: cu,
            seed_lineage: (0, 0),
            redraws: 0,
        }
    }

    fn quiet() -> ComparatorModel {
        ComparatorModel::new(0.0, 0.0, StreamKey::derive(0, &[purpose::NOISE_ADC, 0])).unwrap()
    }

    #[test]
    fn rejects_wrong_array_size_and_bad_inputs() {
        let chip = ideal_chip(8, 1e-15);
        assert!(AdcConfig::new(10, 1.0, 0.5, &chip, 1e-15).is_err()); // needs 256
        let cfg = AdcConfig::new(5, 1.0, 0.5, &chip, 1e-15).unwrap(); // 2^(5-2) = 8
        let m = quiet();
        let mut c = CompareCursor::new(&m, 0);
        assert!(convert(&cfg, 1.2, 0.5, &mut c).is_err());
        assert!(convert(&cfg, 0.5, -0.1, &mut c).is_err());
        assert!(AdcConfig::new(1, 1.0, 0.5, &chip, 1e-15).is_err());
    }

    #[test]
    fn group_layout_is_binary_with_terminator() {
        let chip = ideal_chip(256, 1e-15);
        let cfg = AdcConfig::new(10, 1.0, 0.5, &chip, 1e-15).unwrap();
        let units = cfg.group_units();
        assert_eq!(units[0], 256);
        assert_eq!(units.last(), Some(&1));
        assert_eq!(units.len(), 10); // 9 switchable + terminator
        assert_eq!(units.iter().sum::<usize>(), 512);
    }

    #[test]
    fn full_scale_positive_gives_all_ones() {
        let chip = ideal_chip(256, 1e-15);
        let cfg = AdcConfig::new(10, 1.0, 0.5, &chip, 1e-15).unwrap();
        let m = quiet();
        let mut c = CompareCursor::new(&m, 0);
        let rec = convert(&cfg, 1.0, 0.0, &mut c).unwrap();
        assert!(rec.decisions.iter().all(|&d| d));
        assert_eq!(rec.code, 1023);
    }

    #[test]
    fn tied_inputs_walk_the_hand_stepped_three_bit_trace() {
        // v_ip = v_in, ideal caps, no noise. First compare ties → 0; the
        // weight-2 group on N grounds (V_N −= v_ref/2); then P leads twice
        // while its weight-1 group grounds in between.
        let chip = ideal_chip(2, 1e-15);
        let cfg = AdcConfig::new(3, 1.0, 0.5, &chip, 1e-15).unwrap();
        let m = quiet();
        let mut c = CompareCursor::new(&m, 0);
        let rec = convert(&cfg, 0.5, 0.5, &mut c).unwrap();
        assert_eq!(rec.decisions, vec![false, true, true]);
        assert_eq!(rec.code, 3);
        let expect = vec![
            DacState {
                p_grounded: vec![false, false, false],
                n_grounded: vec![false, false, false],
            },
            DacState {
                p_grounded: vec![false, false, false],
                n_grounded: vec![true, false, false],
            },
            DacState {
                p_grounded: vec![false, true, false],
                n_grounded: vec![true, false, false],
            },
        ];
        assert_eq!(rec.dac_state_sequence, expect);
    }

    #[test]
    fn ideal_ramp_matches_quantizer_oracle_within_one_lsb() {
        let chip = ideal_chip(256, 1e-15);
        let cfg = AdcConfig::new(10, 1.0, 0.5, &chip, 1e-15).unwrap();
        let m = quiet();
        let points = 1024usize;
        for k in 0..points {
            // bin centers across the full differential scale
            let v_diff = -1.0 + (k as f64 + 0.5) * (2.0 / points as f64);
            let (v_ip, v_in) = cfg.differential_inputs(v_diff);
            let mut c = CompareCursor::new(&m, 0);
            let rec = convert(&cfg, v_ip, v_in, &mut c).unwrap();
            let ideal = cfg.ideal_code(v_diff);
            let err = (rec.code as i64 - ideal as i64).abs();
            assert!(err <= 1, "v_diff {v_diff}: code {} vs ideal {ideal}", rec.code);
        }
    }

    #[test]
    fn transfer_is_monotone_for_a_mismatched_chip() {
        let mut p = crate::config::default_authentic_process();
        p.sigma_cu = 0.05 * p.cu_nominal; // exaggerated mismatch
        let chip = sample_chip(&p, 16, 77, 0, false).unwrap(); // 6-bit CDAC
        let cfg = AdcConfig::new(6, 1.0, 0.5, &chip, p.cu_nominal).unwrap();
        let m = quiet();
        let mut prev = 0u32;
        for k in 0..2000 {
            let v_diff = -1.0 + k as f64 * (2.0 / 1999.0);
            let (v_ip, v_in) = cfg.differential_inputs(v_diff);
            let mut c = CompareCursor::new(&m, 0);
            let rec = convert(&cfg, v_ip, v_in, &mut c).unwrap();
            if k > 0 {
                assert!(rec.code >= prev, "code dropped {} -> {} at {v_diff}", prev, rec.code);
            }
            prev = rec.code;
        }
    }

    #[test]
    fn every_step_matches_the_divider_prediction() {
        // Incremental check: each grounding moves that side's top plate by
        // exactly v_ref · C_group / C_side_total.
        let mut p = crate::config::default_authentic_process();
        p.sigma_cu = 0.03 * p.cu_nominal;
        let chip = sample_chip(&p, 32, 11, 4, false).unwrap(); // 7-bit CDAC
        let cfg = AdcConfig::new(7, 1.0, 0.5, &chip, p.cu_nominal).unwrap();
        let m = quiet();
        let mut c = CompareCursor::new(&m, 0);
        let (v_ip, v_in) = cfg.differential_inputs(0.37);
        let rec = convert(&cfg, v_ip, v_in, &mut c).unwrap();

        let groups_p = cfg.side_groups(true);
        let groups_n = cfg.side_groups(false);
        let (tot_p, tot_n): (f64, f64) = (groups_p.iter().sum(), groups_n.iter().sum());
        let top = |v0: f64, g: &[bool], caps: &[f64], tot: f64| {
            let s: f64 = g.iter().zip(caps).filter_map(|(&b, &c)| b.then_some(c)).sum();
            v0 - cfg.v_ref * s / tot
        };
        for (step, win) in rec.dac_state_sequence.windows(2).enumerate() {
            let (before, after) = (&win[0], &win[1]);
            let vp0 = top(v_ip, &before.p_grounded, &groups_p, tot_p);
            let vp1 = top(v_ip, &after.p_grounded, &groups_p, tot_p);
            let vn0 = top(v_in, &before.n_grounded, &groups_n, tot_n);
            let vn1 = top(v_in, &after.n_grounded, &groups_n, tot_n);
            if rec.decisions[step] {
                let expect = cfg.v_ref * groups_p[step] / tot_p;
                assert!((vp0 - vp1 - expect).abs() < 1e-12, "P step {step}");
                assert_eq!(vn0, vn1, "N side must not move at step {step}");
            } else {
                let expect = cfg.v_ref * groups_n[step] / tot_n;
                assert!((vn0 - vn1 - expect).abs() < 1e-12, "N step {step}");
                assert_eq!(vp0, vp1, "P side must not move at step {step}");
            }
        }
    }

    #[test]
    fn trace_equality_is_exact_identity() {
        let chip = ideal_chip(4, 1e-15);
        let cfg = AdcConfig::new(4, 1.0, 0.5, &chip, 1e-15).unwrap();
        let m = quiet();
        let mut c1 = CompareCursor::new(&m, 0);
        let rec = convert(&cfg, 0.7, 0.3, &mut c1).unwrap();
        assert!(switching_trace_equal(&rec, &rec.clone()));

        // > 1 LSB apart → different code → different decision vector.
        let mut c2 = CompareCursor::new(&m, 0);
        let far = convert(&cfg, 0.3, 0.7, &mut c2).unwrap();
        assert_ne!(rec.code, far.code);
        assert!(!switching_trace_equal(&rec, &far));
    }

    #[test]
    fn replaying_the_same_cursor_origin_reproduces_the_record() {
        let mut p = crate::config::default_authentic_process();
        p.sigma_n = 5e-4; // loud comparator
        let chip = sample_chip(&p, 8, 21, 2, false).unwrap();
        let cfg = AdcConfig::new(5, 1.0, 0.5, &chip, p.cu_nominal).unwrap();
        let m = ComparatorModel::for_chip(&p, &chip, purpose::NOISE_ADC).unwrap();
        let run = |origin: u64| {
            let mut c = CompareCursor::new(&m, origin);
            convert(&cfg, 0.52, 0.48, &mut c).unwrap()
        };
        assert!(switching_trace_equal(&run(0), &run(0)));
        // A different noise window may legitimately differ near a threshold;
        // determinism only ties records to their origin.
        let _ = run(64);
    }
}
