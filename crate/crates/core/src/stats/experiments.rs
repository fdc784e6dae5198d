//! Population-level experiment sweeps: array-size trade-off, per-offset
//! sensitivity of the mean trace to mismatch spread, and environmental
//! sensitivity (temperature, comparator offset).
//!
//! Sweeps reuse chip lineages across variants wherever the physics allows
//! (common random numbers), so reported differences reflect the swept
//! parameter rather than resampling noise.

use crate::auth::weight_assign;
use crate::error::{Error, Result};
use crate::frontend::ComparatorModel;
use crate::process::{apply_temperature, sample_chip, FabProcess};
use crate::rng::purpose;
use crate::signature::{
    average_trace, extract_signature, population_traces, CofGrid, SignatureTrace,
};
use rayon::prelude::*;

/// One candidate array size in the trade-off sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct NTradeoffRow {
    pub n_pairs: usize,
    /// Mean over chips of the distance from the population average trace.
    pub mean_d_auth: f64,
    /// Variance over chips of that distance.
    pub var_d_auth: f64,
    /// Gap between the average normalized counts at the two probe offsets.
    pub sensitivity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NTradeoff {
    pub rows: Vec<NTradeoffRow>,
    pub n_opt: usize,
}

/// Simulate the trade-off that picks the unit-array size: larger arrays
/// tighten the distance distribution (good) while the probe-offset response
/// stays put or shrinks. `cof_stage_pair` gives the two probe offsets as
/// descending series-stage counts, e.g. (100, 50).
///
/// The selection rule: among candidates whose distance variance is within
/// `1.5×` the sweep minimum AND whose sensitivity retains at least half the
/// sweep maximum, pick the smallest. If no candidate satisfies both, fall
/// back to the smallest candidate meeting the variance bound alone.
#[allow(clippy::too_many_arguments)]
pub fn optimize_n(
    process: &FabProcess,
    n_candidates: &[usize],
    cof_stage_pair: (u32, u32),
    chips_per_point: usize,
    repeats: u32,
    v_ref: f64,
    global_seed: u64,
) -> Result<NTradeoff> {
    if n_candidates.is_empty() {
        return Err(Error::invalid("need at least one array-size candidate"));
    }
    for w in n_candidates.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::invalid("array-size candidates must strictly ascend"));
        }
    }
    if chips_per_point < 50 {
        return Err(Error::invalid(format!(
            "need at least 50 chips per candidate, got {chips_per_point}"
        )));
    }
    let (k_small_cof, k_large_cof) = cof_stage_pair;
    let grid = CofGrid::from_stage_counts(&[k_small_cof, k_large_cof])?;

    let mut rows = Vec::with_capacity(n_candidates.len());
    for &n in n_candidates {
        let traces =
            population_traces(process, n, chips_per_point, 0, &grid, repeats, v_ref, global_seed)?;
        let stats = average_trace(&traces)?;
        let dists: Vec<f64> = traces
            .iter()
            .map(|t| {
                t.normalized
                    .iter()
                    .zip(&stats.avg)
                    .map(|(x, a)| (x - a) * (x - a))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mean = dists.iter().sum::<f64>() / dists.len() as f64;
        let var = dists.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / dists.len() as f64;
        rows.push(NTradeoffRow {
            n_pairs: n,
            mean_d_auth: mean,
            var_d_auth: var,
            sensitivity: (stats.avg[0] - stats.avg[1]).abs(),
        });
    }

    let var_floor = rows.iter().map(|r| r.var_d_auth).fold(f64::INFINITY, f64::min);
    let sens_max = rows.iter().map(|r| r.sensitivity).fold(0.0, f64::max);
    let feasible = |r: &NTradeoffRow| r.var_d_auth <= 1.5 * var_floor;
    let n_opt = rows
        .iter()
        .find(|r| feasible(r) && r.sensitivity >= 0.5 * sens_max)
        .or_else(|| rows.iter().find(|r| feasible(r)))
        .map(|r| r.n_pairs)
        .expect("the variance floor is always attained by some candidate");
    Ok(NTradeoff { rows, n_opt })
}

/// Per-offset response of the population to a change in mismatch spread.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityProfile {
    pub cof_over_cu: Vec<f64>,
    /// Mismatch spreads swept, in farads (first entry is the reference).
    pub sigma_values: Vec<f64>,
    /// mean_abs_dev[k][j]: mean over chips of |trace_j − reference avg_j|
    /// for the population fabricated at sigma_values[k].
    pub mean_abs_dev: Vec<Vec<f64>>,
    /// Finite-difference slope of that mean deviation w.r.t. relative
    /// mismatch (σ/Cu), endpoints of the sweep.
    pub slopes: Vec<f64>,
}

impl SensitivityProfile {
    /// Slopes floored at zero, ready for weight assignment.
    pub fn nonnegative_slopes(&self) -> Vec<f64> {
        self.slopes.iter().map(|&s| s.max(0.0)).collect()
    }
}

/// Sweep the unit-mismatch spread and measure, per grid offset, how fast the
/// mean absolute deviation from the reference average moves. Populations
/// share chip lineages (identical underlying draws, scaled by each σ), so
/// the finite difference is free of resampling noise.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_profile(
    process: &FabProcess,
    sigma_cu_values: &[f64],
    n_pairs: usize,
    chips: usize,
    grid: &CofGrid,
    repeats: u32,
    v_ref: f64,
    global_seed: u64,
) -> Result<SensitivityProfile> {
    if sigma_cu_values.len() < 2 {
        return Err(Error::invalid("sensitivity sweep needs at least two spread values"));
    }
    for &s in sigma_cu_values {
        if s < 0.0 || !s.is_finite() {
            return Err(Error::invalid(format!("invalid mismatch spread {s:e}")));
        }
    }
    let mut populations = Vec::with_capacity(sigma_cu_values.len());
    for &sigma in sigma_cu_values {
        let mut p = process.clone();
        p.sigma_cu = sigma;
        populations.push(population_traces(
            &p, n_pairs, chips, 0, grid, repeats, v_ref, global_seed,
        )?);
    }
    let reference = average_trace(&populations[0])?;
    let m = reference.avg.len();
    let mean_abs_dev: Vec<Vec<f64>> = populations
        .iter()
        .map(|pop| {
            (0..m)
                .map(|j| {
                    pop.iter().map(|t| (t.normalized[j] - reference.avg[j]).abs()).sum::<f64>()
                        / pop.len() as f64
                })
                .collect()
        })
        .collect();
    let d_rel =
        (sigma_cu_values[sigma_cu_values.len() - 1] - sigma_cu_values[0]) / process.cu_nominal;
    let slopes = (0..m)
        .map(|j| {
            if d_rel == 0.0 {
                0.0
            } else {
                (mean_abs_dev[mean_abs_dev.len() - 1][j] - mean_abs_dev[0][j]) / d_rel
            }
        })
        .collect();
    Ok(SensitivityProfile {
        cof_over_cu: reference.cof_over_cu,
        sigma_values: sigma_cu_values.to_vec(),
        mean_abs_dev,
        slopes,
    })
}

/// Scalar comparison of weighted vs unweighted discrimination between two
/// mismatch-spread populations.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingGain {
    pub weights: Vec<f64>,
    /// (mean distance of the alternate fleet − mean distance of a reference
    /// holdout fleet) / the latter, under uniform weighting…
    pub rel_change_unweighted: f64,
    /// …and under sensitivity weighting.
    pub rel_change_weighted: f64,
}

/// Enroll on a reference-spread fleet, derive sensitivity weights from a
/// spread sweep, and compare how strongly weighted vs unweighted mean
/// distances separate a fresh reference fleet from an alternate-spread
/// fleet. All three fleets are disjoint chip populations.
#[allow(clippy::too_many_arguments)]
pub fn weighting_gain(
    process: &FabProcess,
    sigma_alt: f64,
    n_pairs: usize,
    chips: usize,
    grid: &CofGrid,
    repeats: u32,
    v_ref: f64,
    global_seed: u64,
) -> Result<WeightingGain> {
    let profile = sensitivity_profile(
        process,
        &[process.sigma_cu, sigma_alt],
        n_pairs,
        chips,
        grid,
        repeats,
        v_ref,
        global_seed,
    )?;
    let sensitivities = profile.nonnegative_slopes();
    let weights = weight_assign(&sensitivities)?;

    let enrollment =
        population_traces(process, n_pairs, chips.max(10), 0, grid, repeats, v_ref, global_seed)?;
    let card_uniform = crate::auth::enroll(&enrollment, 3.0, None, 0.99, "reference")?;
    let card_weighted =
        crate::auth::enroll(&enrollment, 3.0, Some(sensitivities.as_slice()), 0.99, "reference")?;

    let holdout =
        population_traces(process, n_pairs, chips, 1_000_000, grid, repeats, v_ref, global_seed)?;
    let mut alt_process = process.clone();
    alt_process.sigma_cu = sigma_alt;
    let alt = population_traces(
        &alt_process, n_pairs, chips, 2_000_000, grid, repeats, v_ref, global_seed,
    )?;

    let mean_dist = |pop: &[SignatureTrace], weighted: bool| -> Result<f64> {
        let mut acc = 0.0;
        for t in pop {
            acc += if weighted {
                crate::auth::d_auth_weighted(t, &card_weighted)?
            } else {
                crate::auth::d_auth(t, &card_uniform)?
            };
        }
        Ok(acc / pop.len() as f64)
    };
    let ref_u = mean_dist(&holdout, false)?;
    let alt_u = mean_dist(&alt, false)?;
    let ref_w = mean_dist(&holdout, true)?;
    let alt_w = mean_dist(&alt, true)?;
    if ref_u == 0.0 || ref_w == 0.0 {
        return Err(Error::invalid("degenerate reference fleet: zero mean distance"));
    }
    Ok(WeightingGain {
        weights,
        rel_change_unweighted: (alt_u - ref_u) / ref_u,
        rel_change_weighted: (alt_w - ref_w) / ref_w,
    })
}

/// Average traces of one chip fleet re-extracted at several temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSensitivity {
    pub cof_over_cu: Vec<f64>,
    pub temperatures_c: Vec<f64>,
    /// avg_per_t[k][j]: average normalized count at temperatures_c[k].
    pub avg_per_t: Vec<Vec<f64>>,
    /// Per-offset slope between the sweep endpoints, in 1/°C.
    pub slopes: Vec<f64>,
}

/// Extract the same fleet at each temperature (unit values scale with the
/// temperature coefficient; comparator noise lineage is unchanged) and
/// report per-offset finite-difference slopes of the average trace.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_temperature(
    process: &FabProcess,
    temperatures_c: &[f64],
    t_ref_c: f64,
    n_pairs: usize,
    chips: usize,
    grid: &CofGrid,
    repeats: u32,
    v_ref: f64,
    global_seed: u64,
) -> Result<TemperatureSensitivity> {
    if temperatures_c.len() < 2 {
        return Err(Error::invalid("temperature sweep needs at least two points"));
    }
    let mut avg_per_t = Vec::with_capacity(temperatures_c.len());
    let mut cof_over_cu = Vec::new();
    for &t_c in temperatures_c {
        let traces: Vec<SignatureTrace> = (0..chips)
            .into_par_iter()
            .map(|i| {
                let chip = sample_chip(process, n_pairs, global_seed, i as u64, false)?;
                let warm = apply_temperature(&chip, process, t_c, t_ref_c)?;
                let model = ComparatorModel::for_chip(process, &warm, purpose::NOISE_EXTRACT)?;
                extract_signature(&warm, &model, grid, repeats, v_ref)
            })
            .collect::<Result<_>>()?;
        let stats = average_trace(&traces)?;
        cof_over_cu = stats.cof_over_cu;
        avg_per_t.push(stats.avg);
    }
    let dt = temperatures_c[temperatures_c.len() - 1] - temperatures_c[0];
    let m = cof_over_cu.len();
    let slopes = (0..m)
        .map(|j| {
            if dt == 0.0 {
                0.0
            } else {
                (avg_per_t[avg_per_t.len() - 1][j] - avg_per_t[0][j]) / dt
            }
        })
        .collect();
    Ok(TemperatureSensitivity {
        cof_over_cu,
        temperatures_c: temperatures_c.to_vec(),
        avg_per_t,
        slopes,
    })
}

/// Average traces of one chip fleet under several comparator static offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetSensitivity {
    pub cof_over_cu: Vec<f64>,
    pub offsets_v: Vec<f64>,
    pub avg_per_offset: Vec<Vec<f64>>,
    /// Directional averages (normalized), exposing the opposite shifts that
    /// cancel in the total.
    pub avg_dir_p: Vec<Vec<f64>>,
    pub avg_dir_n: Vec<Vec<f64>>,
    /// Per-offset slope of the total between sweep endpoints, in 1/V.
    pub slopes: Vec<f64>,
}

/// Re-extract the same fleet under each static comparator offset and report
/// the average trace, its directional components, and endpoint slopes.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_offset(
    process: &FabProcess,
    offsets_v: &[f64],
    n_pairs: usize,
    chips: usize,
    grid: &CofGrid,
    repeats: u32,
    v_ref: f64,
    global_seed: u64,
) -> Result<OffsetSensitivity> {
    if offsets_v.len() < 2 {
        return Err(Error::invalid("offset sweep needs at least two points"));
    }
    let mut avg_per_offset = Vec::with_capacity(offsets_v.len());
    let mut avg_dir_p = Vec::with_capacity(offsets_v.len());
    let mut avg_dir_n = Vec::with_capacity(offsets_v.len());
    let mut cof_over_cu = Vec::new();
    for &v_os in offsets_v {
        if !v_os.is_finite() {
            return Err(Error::invalid("offsets must be finite"));
        }
        let mut p = process.clone();
        p.v_offset = v_os;
        let traces = population_traces(&p, n_pairs, chips, 0, grid, repeats, v_ref, global_seed)?;
        let stats = average_trace(&traces)?;
        cof_over_cu = stats.cof_over_cu;
        avg_per_offset.push(stats.avg);
        let m = grid.len();
        let dir_avg = |pick: fn(&SignatureTrace) -> &Vec<u32>| -> Vec<f64> {
            (0..m)
                .map(|j| {
                    traces.iter().map(|t| pick(t)[j] as f64 / t.n_pairs as f64).sum::<f64>()
                        / traces.len() as f64
                })
                .collect()
        };
        avg_dir_p.push(dir_avg(|t| &t.counts_dir_p));
        avg_dir_n.push(dir_avg(|t| &t.counts_dir_n));
    }
    let dv = offsets_v[offsets_v.len() - 1] - offsets_v[0];
    let m = cof_over_cu.len();
    let slopes = (0..m)
        .map(|j| {
            if dv == 0.0 {
                0.0
            } else {
                (avg_per_offset[avg_per_offset.len() - 1][j] - avg_per_offset[0][j]) / dv
            }
        })
        .collect();
    Ok(OffsetSensitivity {
        cof_over_cu,
        offsets_v: offsets_v.to_vec(),
        avg_per_offset,
        avg_dir_p,
        avg_dir_n,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_authentic_process;

    #[test]
    fn single_candidate_is_chosen() {
        let p = default_authentic_process();
        let r = optimize_n(&p, &[64], (100, 50), 50, 1, 1.0, 7).unwrap();
        assert_eq!(r.n_opt, 64);
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].sensitivity > 0.0);
    }

    #[test]
    fn optimize_n_validates() {
        let p = default_authentic_process();
        assert!(optimize_n(&p, &[], (100, 50), 50, 1, 1.0, 7).is_err());
        assert!(optimize_n(&p, &[64, 64], (100, 50), 50, 1, 1.0, 7).is_err());
        assert!(optimize_n(&p, &[128, 64], (100, 50), 50, 1, 1.0, 7).is_err());
        assert!(optimize_n(&p, &[64], (100, 50), 10, 1, 1.0, 7).is_err());
        assert!(optimize_n(&p, &[64], (50, 100), 50, 1, 1.0, 7).is_err()); // ascending stage pair
    }

    #[test]
    fn distance_variance_tightens_with_array_size() {
        let p = default_authentic_process();
        let r = optimize_n(&p, &[32, 128], (100, 50), 60, 1, 1.0, 3).unwrap();
        assert!(
            r.rows[1].var_d_auth <= r.rows[0].var_d_auth,
            "variance should fall with N: {:?}",
            r.rows
        );
    }

    #[test]
    fn identical_spreads_have_zero_sensitivity() {
        let p = default_authentic_process();
        let prof = sensitivity_profile(
            &p,
            &[p.sigma_cu, p.sigma_cu],
            64,
            40,
            &CofGrid::default_grid(),
            1,
            1.0,
            5,
        )
        .unwrap();
        assert!(prof.slopes.iter().all(|&s| s == 0.0));
        assert_eq!(prof.mean_abs_dev[0], prof.mean_abs_dev[1]);
    }

    #[test]
    fn profile_requires_two_spreads() {
        let p = default_authentic_process();
        assert!(sensitivity_profile(&p, &[p.sigma_cu], 64, 40, &CofGrid::default_grid(), 1, 1.0, 5)
            .is_err());
    }

    #[test]
    fn response_peaks_in_the_mid_grid() {
        // The spread response is strongest where the trace is steepest;
        // the unit/50 point must out-respond the unit/100 point.
        let p = default_authentic_process();
        let sigma2 = 1.5 * p.sigma_cu;
        let prof = sensitivity_profile(
            &p,
            &[p.sigma_cu, sigma2],
            128,
            80,
            &CofGrid::default_grid(),
            1,
            1.0,
            11,
        )
        .unwrap();
        let j100 = prof.cof_over_cu.iter().position(|&c| (c - 0.01).abs() < 1e-12).unwrap();
        let j50 = prof.cof_over_cu.iter().position(|&c| (c - 0.02).abs() < 1e-12).unwrap();
        assert!(
            prof.slopes[j50] > prof.slopes[j100],
            "slope at unit/50 {} must exceed unit/100 {}",
            prof.slopes[j50],
            prof.slopes[j100]
        );
    }

    #[test]
    fn zero_tc_or_zero_dt_means_zero_slope() {
        let mut p = default_authentic_process();
        p.tc = 0.0;
        let g = CofGrid::default_grid();
        let r = sensitivity_temperature(&p, &[-20.0, 80.0], 27.0, 64, 20, &g, 1, 1.0, 9).unwrap();
        assert!(r.slopes.iter().all(|&s| s == 0.0));
        assert_eq!(r.avg_per_t[0], r.avg_per_t[1]);

        let p2 = default_authentic_process();
        let r2 = sensitivity_temperature(&p2, &[27.0, 27.0], 27.0, 64, 20, &g, 1, 1.0, 9).unwrap();
        assert!(r2.slopes.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn quiet_comparator_is_exactly_temperature_invariant() {
        // stage-derived offsets scale with the unit, so every voltage in the
        // comparison scales by the same factor and decisions are unchanged
        let mut p = default_authentic_process();
        p.sigma_n = 0.0;
        let g = CofGrid::default_grid();
        let r = sensitivity_temperature(&p, &[-20.0, 27.0, 80.0], 27.0, 64, 25, &g, 1, 1.0, 13).unwrap();
        assert!(r.slopes.iter().all(|&s| s == 0.0));
        assert_eq!(r.avg_per_t[0], r.avg_per_t[2]);
    }

    #[test]
    fn equal_offsets_give_zero_slope() {
        let p = default_authentic_process();
        let g = CofGrid::default_grid();
        let r = sensitivity_offset(&p, &[1e-5, 1e-5], 64, 20, &g, 3, 1.0, 17).unwrap();
        assert!(r.slopes.iter().all(|&s| s == 0.0));
        assert_eq!(r.avg_per_offset[0], r.avg_per_offset[1]);
        assert!(sensitivity_offset(&p, &[1e-5], 64, 20, &g, 3, 1.0, 17).is_err());
    }

    #[test]
    fn symmetric_offsets_shift_directions_oppositely() {
        let mut p = default_authentic_process();
        p.sigma_n = 0.0;
        let g = CofGrid::default_grid();
        // offset on the order of the mismatch-induced voltage scale
        let v = std::f64::consts::SQRT_2 * (p.sigma_cu / p.cu_nominal) / 64.0;
        let r = sensitivity_offset(&p, &[-v, v], 64, 30, &g, 1, 1.0, 19).unwrap();
        let sum = |xs: &[f64]| xs.iter().sum::<f64>();
        // positive offset quiets the P-side test and excites the N-side test
        assert!(sum(&r.avg_dir_p[1]) < sum(&r.avg_dir_p[0]));
        assert!(sum(&r.avg_dir_n[1]) > sum(&r.avg_dir_n[0]));
        // the union moves far less than either direction
        let dir_shift = (sum(&r.avg_dir_p[1]) - sum(&r.avg_dir_p[0])).abs();
        let tot_shift = (sum(&r.avg_per_offset[1]) - sum(&r.avg_per_offset[0])).abs();
        assert!(
            tot_shift < dir_shift,
            "total moved {tot_shift} vs directional {dir_shift}"
        );
    }

    #[test]
    fn huge_offset_saturates_the_trace() {
        let mut p = default_authentic_process();
        p.sigma_n = 0.0;
        let g = CofGrid::default_grid();
        let r = sensitivity_offset(&p, &[0.0, 1e-3], 64, 10, &g, 1, 1.0, 23).unwrap();
        // 1 mV dwarfs the µV mismatch signals: the N-side test always fires
        for j in 0..g.len() {
            assert_eq!(r.avg_per_offset[1][j], 1.0);
            assert_eq!(r.avg_dir_n[1][j], 1.0);
            assert_eq!(r.avg_dir_p[1][j], 0.0);
        }
    }
}
