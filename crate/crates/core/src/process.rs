//! Fabrication-process model: what a chip's capacitor arrays look like when
//! they come off the line, and how they move with temperature.
//!
//! A chip carries two matched arrays of N metal-oxide-metal unit capacitors
//! (the MSB group of a differential capacitive DAC) plus one series-stage unit
//! for the programmable offset bank. Unit values are Gaussian around the
//! process nominal; non-physical (≤ 0) draws are redrawn (truncated Gaussian)
//! and the redraw count is kept for auditing.

use serde::Deserialize;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{purpose, SeqStream, StreamKey};

/// Lateral / vertical dimensions of one finger pair of the MOM capacitor, in
/// meters: metal width, facing-edge spacing, metal thickness, and the length
/// the two edges run side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub width: f64,
    pub spacing: f64,
    pub thickness: f64,
    pub line_length: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width", self.width),
            ("spacing", self.spacing),
            ("thickness", self.thickness),
            ("line_length", self.line_length),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("geometry.{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Uniform layout scaling: spacing, width and run length grow together.
    pub fn scaled(&self, factor: f64) -> Geometry {
        Geometry {
            width: self.width * factor,
            spacing: self.spacing * factor,
            thickness: self.thickness,
            line_length: self.line_length * factor,
        }
    }
}

/// Process corner: nominal unit capacitance and its mismatch spread, line-edge
/// roughness parameters, temperature coefficient, and the comparator noise
/// environment chips from this process see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabProcess {
    /// Unit capacitance nominal (farads).
    pub cu_nominal: f64,
    /// Unit capacitance standard deviation (farads).
    pub sigma_cu: f64,
    /// Linear capacitance temperature coefficient (1/°C).
    pub tc: f64,
    /// Cross-edge correlation scale of line-edge roughness (meters): facing
    /// edges decorrelate as spacing grows past this length.
    pub eta_ler: f64,
    /// Edge roughness amplitude (meters, 1σ).
    pub sigma_ler: f64,
    /// Along-line roughness correlation scale (meters).
    pub ler_along: f64,
    pub geometry: Geometry,
    /// Comparator input-referred noise (volts, 1σ).
    pub sigma_n: f64,
    /// Comparator static offset (volts).
    pub v_offset: f64,
}

impl FabProcess {
    pub fn validate(&self) -> Result<()> {
        if !(self.cu_nominal > 0.0) {
            return Err(Error::invalid(format!(
                "cu_nominal must be > 0, got {}",
                self.cu_nominal
            )));
        }
        if self.sigma_cu < 0.0 {
            return Err(Error::invalid(format!(
                "sigma_cu must be >= 0, got {}",
                self.sigma_cu
            )));
        }
        if !(self.eta_ler > 0.0) {
            return Err(Error::invalid(format!(
                "eta_ler must be > 0, got {}",
                self.eta_ler
            )));
        }
        if self.sigma_ler < 0.0 {
            return Err(Error::invalid(format!(
                "sigma_ler must be >= 0, got {}",
                self.sigma_ler
            )));
        }
        if !(self.ler_along > 0.0) {
            return Err(Error::invalid(format!(
                "ler_along must be > 0, got {}",
                self.ler_along
            )));
        }
        if self.sigma_n < 0.0 {
            return Err(Error::invalid(format!(
                "sigma_n must be >= 0, got {}",
                self.sigma_n
            )));
        }
        if !self.v_offset.is_finite() {
            return Err(Error::invalid("v_offset must be finite"));
        }
        self.geometry.validate()
    }
}

/// One fabricated die: the two unit-capacitor arrays the signature reads, the
/// offset-bank series unit, and the seed lineage that regenerates all of it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipInstance {
    pub chip_id: u64,
    pub cu_p: Vec<f64>,
    pub cu_n: Vec<f64>,
    /// Capacitance of one series stage of the offset bank (farads).
    pub cof_series_unit: f64,
    /// (global_seed, chip_index): everything above is a pure function of this.
    pub seed_lineage: (u64, u64),
    /// Non-positive Gaussian draws rejected during sampling.
    pub redraws: u32,
}

impl ChipInstance {
    pub fn n_pairs(&self) -> usize {
        debug_assert_eq!(self.cu_p.len(), self.cu_n.len());
        self.cu_p.len()
    }

    pub fn sum_p(&self) -> f64 {
        self.cu_p.iter().sum()
    }

    pub fn sum_n(&self) -> f64 {
        self.cu_n.iter().sum()
    }
}

fn draw_positive(seq: &mut SeqStream, mean: f64, sigma: f64, redraws: &mut u32) -> f64 {
    loop {
        let v = mean + sigma * seq.next_normal();
        if v > 0.0 {
            return v;
        }
        *redraws += 1;
    }
}

/// Fabricate chip `chip_index` with `n` unit pairs.
///
/// Each array draws from its own keyed stream, so a chip sampled at n=32 is a
/// prefix of the same chip sampled at n=256 — sweeps over array size compare
/// the same silicon, extended. The offset-bank series unit is nominal unless
/// `cof_mismatch` asks for it to be drawn like any other unit.
pub fn sample_chip(
    process: &FabProcess,
    n: usize,
    global_seed: u64,
    chip_index: u64,
    cof_mismatch: bool,
) -> Result<ChipInstance> {
    process.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample_chip: n must be >= 1"));
    }
    let mut redraws = 0u32;
    let mut side = |tag: u64| -> Vec<f64> {
        let mut seq = SeqStream::new(StreamKey::derive(global_seed, &[tag, chip_index]));
        (0..n)
            .map(|_| draw_positive(&mut seq, process.cu_nominal, process.sigma_cu, &mut redraws))
            .collect()
    };
    let cu_p = side(purpose::CHIP_ARRAY_P);
    let cu_n = side(purpose::CHIP_ARRAY_N);
    let cof_series_unit = if cof_mismatch {
        let mut seq = SeqStream::new(StreamKey::derive(
            global_seed,
            &[purpose::CHIP_COF_UNIT, chip_index],
        ));
        draw_positive(&mut seq, process.cu_nominal, process.sigma_cu, &mut redraws)
    } else {
        process.cu_nominal
    };
    Ok(ChipInstance {
        chip_id: chip_index,
        cu_p,
        cu_n,
        cof_series_unit,
        seed_lineage: (global_seed, chip_index),
        redraws,
    })
}

/// Every capacitance on the die scales by 1 + tc·(t − t0); ratios are
/// preserved exactly, which is why a noise-free signature is temperature-flat.
pub fn apply_temperature(chip: &ChipInstance, process: &FabProcess, t: f64, t0: f64) -> Result<ChipInstance> {
    let scale = 1.0 + process.tc * (t - t0);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!(
            "temperature scale factor must be > 0, got {scale} at t={t}"
        )));
    }
    Ok(ChipInstance {
        chip_id: chip.chip_id,
        cu_p: chip.cu_p.iter().map(|c| c * scale).collect(),
        cu_n: chip.cu_n.iter().map(|c| c * scale).collect(),
        cof_series_unit: chip.cof_series_unit * scale,
        seed_lineage: chip.seed_lineage,
        redraws: chip.redraws,
    })
}
