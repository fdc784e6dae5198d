//! Experiment configuration: strict TOML with explicit units in every key
//! name, built-in defaults for everything, counterfeit process variants that
//! inherit the authentic block, and a canonical serialization whose SHA-256
//! identifies the fully-resolved configuration in all output artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::process::{FabProcess, Geometry};
use crate::signature::CofGrid;
use crate::stats::{AcDistribution, Gaussian, ThresholdPair};

/// Built-in authentic process corner: a ~1 fF metal-oxide-metal unit
/// (50 nm lines and spaces, 5.8 nm metal, 1 µm run) with 1% unit mismatch,
/// 30 ppm/°C, and a low-noise comparator.
pub fn default_authentic_process() -> FabProcess {
    FabProcess {
        cu_nominal: 1e-15,
        sigma_cu: 1e-17,
        tc: 30e-6,
        eta_ler: 16e-9,
        sigma_ler: 2e-9,
        ler_along: 20e-9,
        geometry: Geometry {
            width: 50e-9,
            spacing: 50e-9,
            thickness: 5.8e-9,
            line_length: 1e-6,
        },
        sigma_n: 250e-18_f64.sqrt(),
        v_offset: 0.0,
    }
}

/// Built-in counterfeit corners: the authentic process at half, double and
/// quadruple unit-mismatch spread.
pub fn default_counterfeits() -> BTreeMap<String, FabProcess> {
    let base = default_authentic_process();
    let mut m = BTreeMap::new();
    for (name, sigma) in [("sigma_half", 0.5e-17), ("sigma_2x", 2e-17), ("sigma_4x", 4e-17)] {
        let mut p = base.clone();
        p.sigma_cu = sigma;
        m.insert(name.to_string(), p);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcSettings {
    pub bits: u32,
    pub v_ref: f64,
    pub v_cm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionSettings {
    pub grid: CofGrid,
    pub repeats: u32,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    Sensitivity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrollmentSettings {
    pub size: usize,
    pub threshold_quantile: f64,
    pub k_sigma: f64,
    pub weighting: Weighting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub temperatures_c: Vec<f64>,
    pub t_ref_c: f64,
    pub offsets_v: Vec<f64>,
    /// Mismatch spreads for the sensitivity sweep (farads; first = reference).
    pub sigma_sweep_f: Vec<f64>,
    pub n_candidates: Vec<usize>,
    pub chips_per_point: usize,
    pub holdout_size: usize,
    pub counterfeit_size: usize,
    pub ler_samples: usize,
    pub ler_segments: usize,
    pub ler_geometry_scales: Vec<f64>,
    pub ler_etas_m: Vec<f64>,
    pub ler_sigmas_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureSettings {
    pub distribution: AcDistribution,
    pub window: ThresholdPair,
    pub mc_samples: u64,
    /// Authentic-spread sweep for the minimum-failure trend.
    pub sigma_a_sweep: Vec<f64>,
}

/// Fully resolved and validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub global_seed: u64,
    pub output_dir: String,
    pub authentic: FabProcess,
    pub counterfeits: BTreeMap<String, FabProcess>,
    pub adc: AdcSettings,
    pub extraction: ExtractionSettings,
    pub enrollment: EnrollmentSettings,
    pub analysis: AnalysisSettings,
    pub failure: FailureSettings,
    /// 0 = let the runtime pick.
    pub workers: usize,
}

// ---------------------------------------------------------------------------
// Raw (wire) representation: every field optional, unknown keys rejected.
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcess {
    #[serde(skip_serializing_if = "Option::is_none")]
    cu_nominal_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_cu_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tc_per_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_ler_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_ler_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ler_along_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    width_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thickness_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    line_length_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_n_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_offset_v: Option<f64>,
}

impl RawProcess {
    fn apply(&self, base: &FabProcess) -> FabProcess {
        FabProcess {
            cu_nominal: self.cu_nominal_f.unwrap_or(base.cu_nominal),
            sigma_cu: self.sigma_cu_f.unwrap_or(base.sigma_cu),
            tc: self.tc_per_c.unwrap_or(base.tc),
            eta_ler: self.eta_ler_m.unwrap_or(base.eta_ler),
            sigma_ler: self.sigma_ler_m.unwrap_or(base.sigma_ler),
            ler_along: self.ler_along_m.unwrap_or(base.ler_along),
            geometry: Geometry {
                width: self.width_m.unwrap_or(base.geometry.width),
                spacing: self.spacing_m.unwrap_or(base.geometry.spacing),
                thickness: self.thickness_m.unwrap_or(base.geometry.thickness),
                line_length: self.line_length_m.unwrap_or(base.geometry.line_length),
            },
            sigma_n: self.sigma_n_v.unwrap_or(base.sigma_n),
            v_offset: self.v_offset_v.unwrap_or(base.v_offset),
        }
    }

    fn from_process(p: &FabProcess) -> Self {
        RawProcess {
            cu_nominal_f: Some(p.cu_nominal),
            sigma_cu_f: Some(p.sigma_cu),
            tc_per_c: Some(p.tc),
            eta_ler_m: Some(p.eta_ler),
            sigma_ler_m: Some(p.sigma_ler),
            ler_along_m: Some(p.ler_along),
            width_m: Some(p.geometry.width),
            spacing_m: Some(p.geometry.spacing),
            thickness_m: Some(p.geometry.thickness),
            line_length_m: Some(p.geometry.line_length),
            sigma_n_v: Some(p.sigma_n),
            v_offset_v: Some(p.v_offset),
        }
    }
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProcessSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    authentic: Option<RawProcess>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterfeit: Option<BTreeMap<String, RawProcess>>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdc {
    #[serde(skip_serializing_if = "Option::is_none")]
    bits: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_ref_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_cm_v: Option<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExtraction {
    #[serde(skip_serializing_if = "Option::is_none")]
    cof_stages: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cof_farads: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repeats: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_pairs: Option<usize>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnrollment {
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold_quantile: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weighting: Option<Weighting>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    #[serde(skip_serializing_if = "Option::is_none")]
    temperatures_c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_ref_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    offsets_v: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_sweep_f: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_candidates: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chips_per_point: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterfeit_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ler_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ler_segments: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ler_geometry_scales: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ler_etas_m: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ler_sigmas_m: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFailure {
    #[serde(skip_serializing_if = "Option::is_none")]
    f_ac_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_ac_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_ac_a_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_ac_a_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc_samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_a_sweep: Option<Vec<f64>>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    global_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_dir: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    process: Option<RawProcessSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adc: Option<RawAdc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extraction: Option<RawExtraction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enrollment: Option<RawEnrollment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    analysis: Option<RawAnalysis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure_analysis: Option<RawFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<RawRun>,
}

impl ExperimentConfig {
    /// The all-defaults configuration (what an empty file resolves to).
    pub fn default_config() -> Self {
        Self::from_toml_str("").expect("empty config resolves")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))?;
        Self::resolve(raw)
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let base = default_authentic_process();
        let proc_section = raw.process.unwrap_or_default();
        let authentic = proc_section
            .authentic
            .as_ref()
            .map(|r| r.apply(&base))
            .unwrap_or_else(|| base.clone());
        authentic
            .validate()
            .map_err(|e| Error::config(format!("process.authentic: {e}")))?;

        let counterfeits: BTreeMap<String, FabProcess> = match proc_section.counterfeit {
            None => default_counterfeits(),
            Some(map) => {
                let mut out = BTreeMap::new();
                for (name, r) in map {
                    let p = r.apply(&authentic);
                    p.validate()
                        .map_err(|e| Error::config(format!("process.counterfeit.{name}: {e}")))?;
                    out.insert(name, p);
                }
                out
            }
        };

        let adc_raw = raw.adc.unwrap_or_default();
        let adc = AdcSettings {
            bits: adc_raw.bits.unwrap_or(10),
            v_ref: adc_raw.v_ref_v.unwrap_or(1.0),
            v_cm: adc_raw.v_cm_v.unwrap_or(0.5),
        };
        if !(2..=16).contains(&adc.bits) {
            return Err(Error::config(format!("adc.bits must be in 2..=16, got {}", adc.bits)));
        }
        if !(adc.v_ref > 0.0) {
            return Err(Error::config(format!("adc.v_ref_v must be > 0, got {}", adc.v_ref)));
        }
        if !(0.0..=adc.v_ref).contains(&adc.v_cm) {
            return Err(Error::config(format!(
                "adc.v_cm_v must lie in [0, v_ref], got {}",
                adc.v_cm
            )));
        }

        let ex_raw = raw.extraction.unwrap_or_default();
        let grid = match (&ex_raw.cof_stages, &ex_raw.cof_farads) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "extraction: give either cof_stages or cof_farads, not both",
                ))
            }
            (Some(stages), None) => CofGrid::from_stage_counts(stages)
                .map_err(|e| Error::config(format!("extraction.cof_stages: {e}")))?,
            (None, Some(farads)) => CofGrid::from_farads(farads)
                .map_err(|e| Error::config(format!("extraction.cof_farads: {e}")))?,
            (None, None) => CofGrid::default_grid(),
        };
        let extraction = ExtractionSettings {
            grid,
            repeats: ex_raw.repeats.unwrap_or(15),
            n_pairs: ex_raw.n_pairs.unwrap_or(256),
        };
        if extraction.repeats == 0 || extraction.repeats % 2 == 0 {
            return Err(Error::config(format!(
                "extraction.repeats must be odd, got {}",
                extraction.repeats
            )));
        }
        if extraction.n_pairs == 0 {
            return Err(Error::config("extraction.n_pairs must be >= 1"));
        }

        let en_raw = raw.enrollment.unwrap_or_default();
        let enrollment = EnrollmentSettings {
            size: en_raw.size.unwrap_or(100),
            threshold_quantile: en_raw.threshold_quantile.unwrap_or(0.99),
            k_sigma: en_raw.k_sigma.unwrap_or(3.0),
            weighting: en_raw.weighting.unwrap_or(Weighting::Sensitivity),
        };
        if enrollment.size < 10 {
            return Err(Error::config(format!(
                "enrollment.size must be >= 10, got {}",
                enrollment.size
            )));
        }
        if !(enrollment.threshold_quantile > 0.5 && enrollment.threshold_quantile < 1.0) {
            return Err(Error::config(format!(
                "enrollment.threshold_quantile must lie in (0.5, 1), got {}",
                enrollment.threshold_quantile
            )));
        }
        if !(enrollment.k_sigma > 0.0) {
            return Err(Error::config(format!(
                "enrollment.k_sigma must be > 0, got {}",
                enrollment.k_sigma
            )));
        }

        let an_raw = raw.analysis.unwrap_or_default();
        let analysis = AnalysisSettings {
            temperatures_c: an_raw.temperatures_c.unwrap_or_else(|| vec![-20.0, 27.0, 80.0]),
            t_ref_c: an_raw.t_ref_c.unwrap_or(27.0),
            offsets_v: an_raw
                .offsets_v
                .unwrap_or_else(|| vec![-2e-4, 0.0, 2e-4]),
            sigma_sweep_f: an_raw
                .sigma_sweep_f
                .unwrap_or_else(|| vec![authentic.sigma_cu, 1.5 * authentic.sigma_cu]),
            n_candidates: an_raw.n_candidates.unwrap_or_else(|| vec![32, 64, 128, 256]),
            chips_per_point: an_raw.chips_per_point.unwrap_or(100),
            holdout_size: an_raw.holdout_size.unwrap_or(200),
            counterfeit_size: an_raw.counterfeit_size.unwrap_or(200),
            ler_samples: an_raw.ler_samples.unwrap_or(1000),
            ler_segments: an_raw.ler_segments.unwrap_or(256),
            ler_geometry_scales: an_raw.ler_geometry_scales.unwrap_or_else(|| vec![1.0, 2.0, 4.0]),
            ler_etas_m: an_raw.ler_etas_m.unwrap_or_else(|| vec![8e-9, 16e-9, 32e-9]),
            ler_sigmas_m: an_raw.ler_sigmas_m.unwrap_or_else(|| vec![1e-9, 2e-9, 3e-9]),
        };
        if analysis.temperatures_c.len() < 2 {
            return Err(Error::config("analysis.temperatures_c needs at least two points"));
        }
        if analysis.offsets_v.len() < 2 {
            return Err(Error::config("analysis.offsets_v needs at least two points"));
        }
        if analysis.sigma_sweep_f.len() < 2 {
            return Err(Error::config("analysis.sigma_sweep_f needs at least two points"));
        }
        if analysis.chips_per_point < 50 {
            return Err(Error::config(format!(
                "analysis.chips_per_point must be >= 50, got {}",
                analysis.chips_per_point
            )));
        }

        let f_raw = raw.failure_analysis.unwrap_or_default();
        let f_ac = Gaussian::new(f_raw.f_ac_mean.unwrap_or(0.5), f_raw.f_ac_std.unwrap_or(0.1))
            .map_err(|e| Error::config(format!("failure_analysis.f_ac: {e}")))?;
        let f_ac_a = Gaussian::new(
            f_raw.f_ac_a_mean.unwrap_or(0.9),
            f_raw.f_ac_a_std.unwrap_or(0.05),
        )
        .map_err(|e| Error::config(format!("failure_analysis.f_ac_a: {e}")))?;
        let distribution = AcDistribution::new(
            f_ac,
            f_ac_a,
            f_raw.p_a.unwrap_or(0.5),
            f_raw.rho.unwrap_or(0.5),
        )
        .map_err(|e| Error::config(format!("failure_analysis: {e}")))?;
        let window = ThresholdPair::new(f_raw.t_l.unwrap_or(0.8), f_raw.t_u.unwrap_or(1.0))
            .map_err(|e| Error::config(format!("failure_analysis window: {e}")))?;
        let failure = FailureSettings {
            distribution,
            window,
            mc_samples: f_raw.mc_samples.unwrap_or(1_000_000),
            sigma_a_sweep: f_raw.sigma_a_sweep.unwrap_or_else(|| vec![0.025, 0.05, 0.10]),
        };
        if failure.mc_samples == 0 {
            return Err(Error::config("failure_analysis.mc_samples must be >= 1"));
        }

        Ok(ExperimentConfig {
            global_seed: raw.global_seed.unwrap_or(1),
            output_dir: raw.output_dir.unwrap_or_else(|| "out".to_string()),
            authentic,
            counterfeits,
            adc,
            extraction,
            enrollment,
            analysis,
            failure,
            workers: raw.run.unwrap_or_default().workers.unwrap_or(0),
        })
    }

    fn to_raw(&self) -> RawConfig {
        let counterfeit: BTreeMap<String, RawProcess> = self
            .counterfeits
            .iter()
            .map(|(k, v)| (k.clone(), RawProcess::from_process(v)))
            .collect();
        let (cof_stages, cof_farads) = match &self.extraction.grid {
            CofGrid::Stages(s) => (Some(s.clone()), None),
            CofGrid::Farads(v) => (None, Some(v.clone())),
        };
        RawConfig {
            global_seed: Some(self.global_seed),
            output_dir: Some(self.output_dir.clone()),
            process: Some(RawProcessSection {
                authentic: Some(RawProcess::from_process(&self.authentic)),
                counterfeit: Some(counterfeit),
            }),
            adc: Some(RawAdc {
                bits: Some(self.adc.bits),
                v_ref_v: Some(self.adc.v_ref),
                v_cm_v: Some(self.adc.v_cm),
            }),
            extraction: Some(RawExtraction {
                cof_stages,
                cof_farads,
                repeats: Some(self.extraction.repeats),
                n_pairs: Some(self.extraction.n_pairs),
            }),
            enrollment: Some(RawEnrollment {
                size: Some(self.enrollment.size),
                threshold_quantile: Some(self.enrollment.threshold_quantile),
                k_sigma: Some(self.enrollment.k_sigma),
                weighting: Some(self.enrollment.weighting),
            }),
            analysis: Some(RawAnalysis {
                temperatures_c: Some(self.analysis.temperatures_c.clone()),
                t_ref_c: Some(self.analysis.t_ref_c),
                offsets_v: Some(self.analysis.offsets_v.clone()),
                sigma_sweep_f: Some(self.analysis.sigma_sweep_f.clone()),
                n_candidates: Some(self.analysis.n_candidates.clone()),
                chips_per_point: Some(self.analysis.chips_per_point),
                holdout_size: Some(self.analysis.holdout_size),
                counterfeit_size: Some(self.analysis.counterfeit_size),
                ler_samples: Some(self.analysis.ler_samples),
                ler_segments: Some(self.analysis.ler_segments),
                ler_geometry_scales: Some(self.analysis.ler_geometry_scales.clone()),
                ler_etas_m: Some(self.analysis.ler_etas_m.clone()),
                ler_sigmas_m: Some(self.analysis.ler_sigmas_m.clone()),
            }),
            failure_analysis: Some(RawFailure {
                f_ac_mean: Some(self.failure.distribution.f_ac.mean),
                f_ac_std: Some(self.failure.distribution.f_ac.std),
                f_ac_a_mean: Some(self.failure.distribution.f_ac_given_a.mean),
                f_ac_a_std: Some(self.failure.distribution.f_ac_given_a.std),
                p_a: Some(self.failure.distribution.p_a),
                rho: Some(self.failure.distribution.rho),
                t_l: Some(self.failure.window.t_l),
                t_u: Some(self.failure.window.t_u),
                mc_samples: Some(self.failure.mc_samples),
                sigma_a_sweep: Some(self.failure.sigma_a_sweep.clone()),
            }),
            run: Some(RawRun {
                workers: Some(self.workers),
            }),
        }
    }

    /// Canonical serialization of the fully-resolved configuration: every
    /// field written explicitly, fixed order, counterfeit variants sorted by
    /// name. Identical resolved configs produce identical text.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("resolved config serializes")
    }

    /// SHA-256 (hex) of the canonical serialization. Note: the worker count
    /// participates in the hash as written, but never changes any numeric
    /// output; seeds and model parameters are what the hash is for.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_toml().as_bytes());
        let digest = h.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_defaults() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c.global_seed, 1);
        assert_eq!(c.authentic, default_authentic_process());
        assert_eq!(c.counterfeits.len(), 3);
        assert_eq!(c.extraction.n_pairs, 256);
        assert_eq!(c.extraction.repeats, 15);
        assert_eq!(c.extraction.grid.len(), 12);
        assert_eq!(c.adc.bits, 10);
        assert_eq!(c.enrollment.size, 100);
        assert_eq!(c.enrollment.weighting, Weighting::Sensitivity);
        assert_eq!(c.workers, 0);
        assert_eq!(c, ExperimentConfig::default_config());
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_name() {
        let err = ExperimentConfig::from_toml_str("frobnicate = 3\n").unwrap_err();
        assert!(err.to_string().contains("frobnicate"), "{err}");
        let err2 =
            ExperimentConfig::from_toml_str("[process.authentic]\nsigma_cu = 1.0\n").unwrap_err();
        assert!(err2.to_string().contains("sigma_cu"), "{err2}");
    }

    #[test]
    fn negative_spread_names_the_field() {
        let err = ExperimentConfig::from_toml_str(
            "[process.authentic]\nsigma_cu_f = -1e-18\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("process.authentic"), "{msg}");
        assert!(msg.contains("sigma_cu"), "{msg}");
    }

    #[test]
    fn counterfeit_inherits_authentic_with_overrides() {
        let text = r#"
[process.authentic]
cu_nominal_f = 2e-15
sigma_cu_f = 2e-17

[process.counterfeit.loose]
sigma_cu_f = 8e-17
"#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.counterfeits.len(), 1);
        let loose = &c.counterfeits["loose"];
        // override applied
        assert_eq!(loose.sigma_cu, 8e-17);
        // inherited from the customized authentic block, not the built-in
        assert_eq!(loose.cu_nominal, 2e-15);
        // everything else matches authentic exactly
        let mut expect = c.authentic.clone();
        expect.sigma_cu = 8e-17;
        assert_eq!(*loose, expect);
    }

    #[test]
    fn grid_spec_is_exclusive() {
        let both = "[extraction]\ncof_stages = [100, 50]\ncof_farads = [1e-18]\n";
        assert!(ExperimentConfig::from_toml_str(both).is_err());
        let stages = ExperimentConfig::from_toml_str("[extraction]\ncof_stages = [100, 50]\n").unwrap();
        assert_eq!(stages.extraction.grid.len(), 2);
        let farads =
            ExperimentConfig::from_toml_str("[extraction]\ncof_farads = [1e-18, 2e-18]\n").unwrap();
        assert_eq!(farads.extraction.grid.len(), 2);
    }

    #[test]
    fn invalid_settings_are_named() {
        for (text, needle) in [
            ("[extraction]\nrepeats = 4\n", "repeats"),
            ("[enrollment]\nthreshold_quantile = 0.4\n", "threshold_quantile"),
            ("[enrollment]\nsize = 5\n", "enrollment.size"),
            ("[adc]\nbits = 1\n", "bits"),
            ("[analysis]\nchips_per_point = 10\n", "chips_per_point"),
            ("[failure_analysis]\nf_ac_std = 0.0\n", "f_ac"),
            ("[failure_analysis]\nt_l = 1.5\nt_u = 1.0\n", "window"),
        ] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert!(err.to_string().contains(needle), "{text} -> {err}");
        }
    }

    #[test]
    fn canonical_form_is_stable_and_hash_matches_resolution() {
        let a = ExperimentConfig::default_config();
        let b = ExperimentConfig::from_toml_str("global_seed = 1\n").unwrap();
        assert_eq!(a.canonical_toml(), b.canonical_toml());
        assert_eq!(a.hash(), b.hash());
        // the canonical text itself re-parses to the same config
        let c = ExperimentConfig::from_toml_str(&a.canonical_toml()).unwrap();
        assert_eq!(a, c);
        // a changed seed changes the hash
        let d = ExperimentConfig::from_toml_str("global_seed = 2\n").unwrap();
        assert_ne!(a.hash(), d.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
