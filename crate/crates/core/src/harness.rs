//! Preset experiment pipelines: each preset turns a configuration into a
//! directory of CSV tables plus a manifest. Output bytes depend only on the
//! configuration and seed — never on worker count or scheduling — because
//! every random quantity is addressed by a counter-based stream index.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::auth::weight_assign;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::report::{
    fmt_sci, write_labeled_stats_csv, write_lines_csv, write_traces_csv, RunManifest, StageTiming,
};
use crate::signature::{average_trace, mismatch_voltage_scale, population_traces};
use crate::stats::experiments::{
    optimize_n, sensitivity_offset, sensitivity_profile, sensitivity_temperature, weighting_gain,
};
use crate::stats::{
    failure_rate, multi_ac_failure, optimize_thresholds, AcDistribution, Gaussian,
};

/// Probe offsets (as descending series-stage counts) used by the array-size
/// trade-off: the two canonical grid anchors, unit/100 and unit/50.
pub const SIZE_TRADEOFF_PROBES: (u32, u32) = (100, 50);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Single- and two-characteristic acceptance-window failure rates,
    /// plus window optimization across authentic-spread values.
    FailureRates,
    /// Signature extraction with single-shot vs majority-vote comparisons,
    /// at comparator noise matching the mismatch voltage scale.
    RepeatAveraging,
    /// Distance spread and probe-offset response versus unit-array size.
    ArraySize,
    /// Per-offset sensitivity profile and weighted vs uniform distance
    /// discrimination between mismatch-spread populations.
    Weighting,
    /// Average signature versus operating temperature.
    Temperature,
    /// Average signature versus static comparator offset.
    Offset,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::FailureRates,
        Preset::RepeatAveraging,
        Preset::ArraySize,
        Preset::Weighting,
        Preset::Temperature,
        Preset::Offset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::FailureRates => "failure-rates",
            Preset::RepeatAveraging => "repeat-averaging",
            Preset::ArraySize => "array-size",
            Preset::Weighting => "weighting",
            Preset::Temperature => "temperature",
            Preset::Offset => "offset",
        }
    }

    pub fn from_name(s: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::config(format!("unknown preset {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Files written by one stage, recorded as they are created so a failing
/// stage still leaves an accurate manifest behind.
struct FileSink<'a> {
    out_dir: &'a Path,
    names: Vec<String>,
}

impl FileSink<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.out_dir.join(name)
    }
}

fn run_stage<T>(
    manifest: &mut RunManifest,
    out_dir: &Path,
    name: &str,
    f: impl FnOnce(&mut FileSink) -> Result<T>,
) -> Result<T> {
    let mut sink = FileSink { out_dir, names: Vec::new() };
    let start = Instant::now();
    let result = f(&mut sink);
    manifest.stages.push(StageTiming {
        name: name.to_string(),
        wall_ms: start.elapsed().as_millis() as u64,
    });
    manifest.files.extend(sink.names);
    match result {
        Ok(v) => Ok(v),
        Err(e) => {
            manifest.failed_stage = Some(name.to_string());
            Err(Error::Stage { stage: name.to_string(), message: e.to_string() })
        }
    }
}

/// Run one preset pipeline into `out_dir` (created if needed). `workers = 0`
/// uses the configured count, which itself defaults to the runtime's choice.
/// The manifest is written even when a stage fails; the error names the
/// failed stage and the manifest records the files that were produced.
pub fn run_preset(
    cfg: &ExperimentConfig,
    preset: Preset,
    out_dir: &Path,
    workers: usize,
) -> Result<RunManifest> {
    let workers = if workers > 0 { workers } else { cfg.workers };
    if workers == 0 {
        return run_preset_inner(cfg, preset, out_dir);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| run_preset_inner(cfg, preset, out_dir))
}

fn run_preset_inner(cfg: &ExperimentConfig, preset: Preset, out_dir: &Path) -> Result<RunManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut manifest = RunManifest::new(cfg.hash(), cfg.global_seed);
    manifest.files.push("manifest.json".to_string());

    let result = match preset {
        Preset::FailureRates => preset_failure_rates(cfg, &mut manifest, out_dir),
        Preset::RepeatAveraging => preset_repeat_averaging(cfg, &mut manifest, out_dir),
        Preset::ArraySize => preset_array_size(cfg, &mut manifest, out_dir),
        Preset::Weighting => preset_weighting(cfg, &mut manifest, out_dir),
        Preset::Temperature => preset_temperature(cfg, &mut manifest, out_dir),
        Preset::Offset => preset_offset(cfg, &mut manifest, out_dir),
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    result.map(|()| manifest)
}

fn preset_failure_rates(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
    out_dir: &Path,
) -> Result<()> {
    let d = &cfg.failure.distribution;
    let window = &cfg.failure.window;

    run_stage(manifest, out_dir, "window-report", |sink| {
        let r = failure_rate(d, window);
        write_lines_csv(
            &sink.path("window_report.csv"),
            &["t_l", "t_u", "a_f", "p_pass", "p_pass_given_a", "p_pass_given_c", "mixture_consistent"],
            &[vec![
                fmt_sci(window.t_l),
                fmt_sci(window.t_u),
                fmt_sci(r.a_f),
                fmt_sci(r.p_pass),
                fmt_sci(r.p_pass_given_a),
                fmt_sci(r.p_pass_given_c),
                u8::from(r.mixture_consistent).to_string(),
            ]],
        )
    })?;

    run_stage(manifest, out_dir, "window-optimize", |sink| {
        let mut rows = Vec::new();
        for &sigma in &cfg.failure.sigma_a_sweep {
            let swept = AcDistribution::new(
                d.f_ac,
                Gaussian::new(d.f_ac_given_a.mean, sigma)?,
                d.p_a,
                d.rho,
            )?;
            let (t, a_f) = optimize_thresholds(&swept);
            rows.push(vec![fmt_sci(sigma), fmt_sci(t.t_l), fmt_sci(t.t_u), fmt_sci(a_f)]);
        }
        write_lines_csv(
            &sink.path("window_optimized.csv"),
            &["sigma_ac_given_a", "t_l", "t_u", "a_f_min"],
            &rows,
        )
    })?;

    run_stage(manifest, out_dir, "joint-windows", |sink| {
        let windows = [*window, *window];
        let mut rows = Vec::new();
        for rho in [0.0, d.rho] {
            let correlated = AcDistribution::new(d.f_ac, d.f_ac_given_a, d.p_a, rho)?;
            for m in [1usize, 2] {
                let rep = multi_ac_failure(
                    &correlated,
                    m,
                    &windows,
                    cfg.failure.mc_samples,
                    cfg.global_seed,
                )?;
                rows.push(vec![
                    fmt_sci(rho),
                    format!("{m}-of-2"),
                    fmt_sci(rep.accept_given_c),
                    fmt_sci(rep.accept_given_a),
                    fmt_sci(rep.a_f),
                ]);
            }
        }
        write_lines_csv(
            &sink.path("joint_windows.csv"),
            &["rho", "rule", "accept_given_c", "accept_given_a", "a_f"],
            &rows,
        )
    })
}

fn preset_repeat_averaging(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
    out_dir: &Path,
) -> Result<()> {
    let ex = &cfg.extraction;
    let mut process = cfg.authentic.clone();
    // Put the comparator right where averaging matters: noise at the
    // mismatch voltage scale, derived from the configured process.
    process.sigma_n = mismatch_voltage_scale(&process, ex.n_pairs, cfg.adc.v_ref);

    let repeats_hi = ex.repeats.max(3) | 1;
    let mut blocks = Vec::new();
    for repeats in [1u32, repeats_hi] {
        let traces = run_stage(manifest, out_dir, &format!("extract-r{repeats}"), |sink| {
            let traces = population_traces(
                &process,
                ex.n_pairs,
                cfg.analysis.chips_per_point,
                0,
                &ex.grid,
                repeats,
                cfg.adc.v_ref,
                cfg.global_seed,
            )?;
            write_traces_csv(&sink.path(&format!("traces_r{repeats}.csv")), &traces)?;
            Ok(traces)
        })?;
        blocks.push((repeats.to_string(), traces));
    }

    run_stage(manifest, out_dir, "summarize", |sink| {
        let stats = blocks
            .iter()
            .map(|(label, traces)| Ok((label.clone(), average_trace(traces)?)))
            .collect::<Result<Vec<_>>>()?;
        write_labeled_stats_csv(&sink.path("stats_by_repeats.csv"), "repeats", &stats)
    })
}

fn preset_array_size(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
    out_dir: &Path,
) -> Result<()> {
    run_stage(manifest, out_dir, "size-tradeoff", |sink| {
        let tradeoff = optimize_n(
            &cfg.authentic,
            &cfg.analysis.n_candidates,
            SIZE_TRADEOFF_PROBES,
            cfg.analysis.chips_per_point,
            cfg.extraction.repeats,
            cfg.adc.v_ref,
            cfg.global_seed,
        )?;
        let rows = tradeoff
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.n_pairs.to_string(),
                    fmt_sci(r.mean_d_auth),
                    fmt_sci(r.var_d_auth),
                    fmt_sci(r.sensitivity),
                    u8::from(r.n_pairs == tradeoff.n_opt).to_string(),
                ]
            })
            .collect::<Vec<_>>();
        write_lines_csv(
            &sink.path("size_tradeoff.csv"),
            &["n_pairs", "mean_d_auth", "var_d_auth", "sensitivity", "is_optimal"],
            &rows,
        )
    })
}

fn preset_weighting(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
    out_dir: &Path,
) -> Result<()> {
    let ex = &cfg.extraction;
    let profile = run_stage(manifest, out_dir, "profile", |sink| {
        let profile = sensitivity_profile(
            &cfg.authentic,
            &cfg.analysis.sigma_sweep_f,
            ex.n_pairs,
            cfg.analysis.chips_per_point,
            &ex.grid,
            ex.repeats,
            cfg.adc.v_ref,
            cfg.global_seed,
        )?;
        let mut rows = Vec::new();
        for (k, &sigma) in profile.sigma_values.iter().enumerate() {
            for (j, &cof) in profile.cof_over_cu.iter().enumerate() {
                rows.push(vec![
                    fmt_sci(sigma / cfg.authentic.cu_nominal),
                    fmt_sci(cof),
                    fmt_sci(profile.mean_abs_dev[k][j]),
                ]);
            }
        }
        write_lines_csv(
            &sink.path("profile.csv"),
            &["sigma_over_cu", "cof_over_cu", "mean_abs_dev"],
            &rows,
        )?;
        Ok(profile)
    })?;

    run_stage(manifest, out_dir, "gain", |sink| {
        let sigma_alt = *cfg.analysis.sigma_sweep_f.last().expect("validated non-empty");
        let gain = weighting_gain(
            &cfg.authentic,
            sigma_alt,
            ex.n_pairs,
            cfg.analysis.chips_per_point,
            &ex.grid,
            ex.repeats,
            cfg.adc.v_ref,
            cfg.global_seed,
        )?;
        let weights = weight_assign(&profile.nonnegative_slopes())?;
        let slope_rows = profile
            .cof_over_cu
            .iter()
            .zip(&profile.slopes)
            .zip(&weights)
            .map(|((&cof, &slope), &w)| vec![fmt_sci(cof), fmt_sci(slope), fmt_sci(w)])
            .collect::<Vec<_>>();
        write_lines_csv(
            &sink.path("sensitivity_slopes.csv"),
            &["cof_over_cu", "slope", "weight"],
            &slope_rows,
        )?;
        write_lines_csv(
            &sink.path("weighting_gain.csv"),
            &["scheme", "rel_change"],
            &[
                vec!["uniform".to_string(), fmt_sci(gain.rel_change_unweighted)],
                vec!["sensitivity".to_string(), fmt_sci(gain.rel_change_weighted)],
            ],
        )
    })
}

fn preset_temperature(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
    out_dir: &Path,
) -> Result<()> {
    let ex = &cfg.extraction;
    run_stage(manifest, out_dir, "temperature-sweep", |sink| {
        let sweep = sensitivity_temperature(
            &cfg.authentic,
            &cfg.analysis.temperatures_c,
            cfg.analysis.t_ref_c,
            ex.n_pairs,
            cfg.analysis.chips_per_point,
            &ex.grid,
            ex.repeats,
            cfg.adc.v_ref,
            cfg.global_seed,
        )?;
        let mut rows = Vec::new();
        for (k, &t) in sweep.temperatures_c.iter().enumerate() {
            for (j, &cof) in sweep.cof_over_cu.iter().enumerate() {
                rows.push(vec![fmt_sci(t), fmt_sci(cof), fmt_sci(sweep.avg_per_t[k][j])]);
            }
        }
        write_lines_csv(
            &sink.path("temperature_avg.csv"),
            &["temperature_c", "cof_over_cu", "avg"],
            &rows,
        )?;
        let slope_rows = sweep
            .cof_over_cu
            .iter()
            .zip(&sweep.slopes)
            .map(|(&cof, &s)| vec![fmt_sci(cof), fmt_sci(s)])
            .collect::<Vec<_>>();
        write_lines_csv(
            &sink.path("temperature_slopes.csv"),
            &["cof_over_cu", "slope_per_c"],
            &slope_rows,
        )
    })
}

fn preset_offset(
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
    out_dir: &Path,
) -> Result<()> {
    let ex = &cfg.extraction;
    run_stage(manifest, out_dir, "offset-sweep", |sink| {
        let sweep = sensitivity_offset(
            &cfg.authentic,
            &cfg.analysis.offsets_v,
            ex.n_pairs,
            cfg.analysis.chips_per_point,
            &ex.grid,
            ex.repeats,
            cfg.adc.v_ref,
            cfg.global_seed,
        )?;
        let mut rows = Vec::new();
        for (k, &v) in sweep.offsets_v.iter().enumerate() {
            for (j, &cof) in sweep.cof_over_cu.iter().enumerate() {
                rows.push(vec![
                    fmt_sci(v),
                    fmt_sci(cof),
                    fmt_sci(sweep.avg_per_offset[k][j]),
                    fmt_sci(sweep.avg_dir_p[k][j]),
                    fmt_sci(sweep.avg_dir_n[k][j]),
                ]);
            }
        }
        write_lines_csv(
            &sink.path("offset_avg.csv"),
            &["offset_v", "cof_over_cu", "avg", "avg_dir_p", "avg_dir_n"],
            &rows,
        )?;
        let slope_rows = sweep
            .cof_over_cu
            .iter()
            .zip(&sweep.slopes)
            .map(|(&cof, &s)| vec![fmt_sci(cof), fmt_sci(s)])
            .collect::<Vec<_>>();
        write_lines_csv(
            &sink.path("offset_slopes.csv"),
            &["cof_over_cu", "slope_per_v"],
            &slope_rows,
        )
    })
}
