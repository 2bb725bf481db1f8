//! `poresim` — facial-pore simulation pipeline CLI.
//!
//! Subcommands cover the whole chain: synthetic data generation, pore
//! segmentation, clinical series cleaning, trend analysis, random-forest
//! training, simulation, and segmentation scoring.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on processing errors
//! (message on standard error).

mod config;
mod report;

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};

use config::PipelineConfig;
use poresim::{
    datapipe, deform, imagecore, poreseg, rfregress, synth, RandomForest, TimeWindow,
};
use report::RunReport;

#[derive(Parser)]
#[command(name = "poresim", version, about = "Short-term facial-pore change simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect pores in an image; write the mask PNG and a component CSV.
    Segment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        components: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        run_report: Option<PathBuf>,
    },
    /// Normalize an index series, aggregate to daily means, and remove
    /// sliding-window outliers. Output CSVs keep the input schema with
    /// values normalized to each subject's baseline.
    Clean {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        removed: PathBuf,
        /// Sliding window length in days.
        #[arg(long)]
        window: Option<usize>,
        /// Removal threshold in window standard deviations.
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        run_report: Option<PathBuf>,
    },
    /// Trend-fit each index on cleaned data and rank them; write a JSON
    /// report.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        run_report: Option<PathBuf>,
    },
    /// Train the random-forest area-ratio model from a cleaned series CSV.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Index used as the regression target.
        #[arg(long, default_value = "Pore_Area_total")]
        index: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        run_report: Option<PathBuf>,
    },
    /// Detect pores, predict the time-window area ratio, and warp the image.
    Simulate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// TW10, TW20, or TW30.
        #[arg(long)]
        window: String,
        #[arg(long)]
        out: PathBuf,
        /// Margin scaling each pore's enclosing circle.
        #[arg(long)]
        beta: Option<f64>,
        /// Optional flow-field sidecar (PSFF) for debugging.
        #[arg(long)]
        flow: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        run_report: Option<PathBuf>,
    },
    /// Generate a synthetic pore sheet with ground truth.
    GenSheet {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_mask: Option<PathBuf>,
        #[arg(long)]
        truth_components: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        width: usize,
        #[arg(long, default_value_t = 512)]
        height: usize,
        #[arg(long, default_value_t = 30)]
        pores: usize,
        #[arg(long, default_value_t = 2.0)]
        radius_min: f64,
        #[arg(long, default_value_t = 6.0)]
        radius_max: f64,
        #[arg(long, default_value_t = 0.25)]
        contrast_min: f64,
        #[arg(long, default_value_t = 0.4)]
        contrast_max: f64,
        #[arg(long, default_value_t = 0.03)]
        texture: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        run_report: Option<PathBuf>,
    },
    /// Generate a synthetic clinical cohort CSV with an outlier sidecar.
    GenCohort {
        #[arg(long)]
        out: PathBuf,
        /// Sidecar CSV of planted outliers.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        subjects: usize,
        #[arg(long, default_value_t = 30)]
        days: u32,
        /// Relative change per day; day d sits at (1 + trend)^d of baseline.
        #[arg(long, default_value_t = -0.01, allow_hyphen_values = true)]
        trend: f64,
        #[arg(long, default_value_t = 0.0125)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        outlier_rate: f64,
        /// Outlier amplitude in noise-sigma units.
        #[arg(long, default_value_t = 5.0)]
        outlier_sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        run_report: Option<PathBuf>,
    },
    /// Score a predicted mask against a truth mask (Dice, IoU, precision,
    /// accuracy).
    EvalSeg {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

/// `PORESIM_THREADS` caps the worker pool; 0 or unset means automatic.
fn configure_threads() {
    if let Ok(v) = std::env::var("PORESIM_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Segment {
            input,
            out,
            components,
            config,
            run_report,
        } => {
            let cfg = PipelineConfig::load_or_default(config.as_deref())?;
            let img = imagecore::read_png(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let (mask, comps) = poreseg::detect_pores(&img, &cfg.detection)?;
            report::save_atomic(&out, |p| Ok(mask.write_png(p)?))?;
            let mut buf = Vec::new();
            poreseg::write_components_csv(&mut buf, &comps)?;
            report::write_atomic(&components, &buf)?;
            let stats = poreseg::pore_stats(&comps);
            println!(
                "detected {} pores, total area {:.1} px",
                stats.pore_count, stats.pore_area_total
            );
            if let Some(path) = run_report {
                RunReport::new("segment", cfg.rng_seed, cfg.sha256()?)
                    .input("image", &input)
                    .output("mask", &out)
                    .output("components", &components)
                    .write(&path)?;
            }
            Ok(())
        }
        Command::Clean {
            input,
            out,
            removed,
            window,
            k,
            config,
            run_report,
        } => {
            let mut cfg = PipelineConfig::load_or_default(config.as_deref())?;
            if let Some(w) = window {
                cfg.clean.window_days = w;
            }
            if let Some(k) = k {
                cfg.clean.k_sigma = k;
            }
            cfg.clean.validate()?;

            let samples = read_series(&input)?;
            let normalized = datapipe::normalize_cohort(&samples)?;
            let daily = datapipe::daily_mean(&normalized);
            let outcome = datapipe::sliding_window_clean(&daily, &cfg.clean)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }

            // Map the day-level decisions back onto session rows so both
            // outputs keep the input schema.
            let removed_keys: std::collections::HashSet<(&str, &str, u32)> = outcome
                .removed
                .iter()
                .map(|d| (d.subject_id.as_str(), d.index_name.as_str(), d.day))
                .collect();
            let (removed_rows, kept_rows): (Vec<_>, Vec<_>) =
                normalized.iter().cloned().partition(|s| {
                    removed_keys.contains(&(s.subject_id.as_str(), s.index_name.as_str(), s.day))
                });
            write_series(&out, &kept_rows)?;
            write_series(&removed, &removed_rows)?;
            println!(
                "kept {} rows ({} days), removed {} rows ({} days)",
                kept_rows.len(),
                outcome.kept.len(),
                removed_rows.len(),
                outcome.removed.len()
            );
            if let Some(path) = run_report {
                RunReport::new("clean", cfg.rng_seed, cfg.sha256()?)
                    .input("series", &input)
                    .output("kept", &out)
                    .output("removed", &removed)
                    .write(&path)?;
            }
            Ok(())
        }
        Command::Analyze {
            input,
            report: report_path,
            run_report,
        } => {
            let samples = read_series(&input)?;
            let daily = datapipe::daily_mean(&samples);
            let ranking = datapipe::select_representative_index(&daily);
            report::write_atomic(&report_path, &serde_json::to_vec_pretty(&ranking)?)?;
            if let Some(top) = ranking.ranking.first() {
                println!(
                    "top index {} (slope {:+.5}/day, r2 {:.4})",
                    top.index_name, top.slope, top.r2
                );
            }
            if let Some(path) = run_report {
                let cfg = PipelineConfig::default();
                RunReport::new("analyze", cfg.rng_seed, cfg.sha256()?)
                    .input("series", &input)
                    .output("report", &report_path)
                    .write(&path)?;
            }
            Ok(())
        }
        Command::Train {
            input,
            model,
            seed,
            index,
            config,
            run_report,
        } => {
            let mut cfg = PipelineConfig::load_or_default(config.as_deref())?;
            if let Some(s) = seed {
                cfg.forest.rng_seed = s;
                cfg.rng_seed = s;
            }
            let samples = read_series(&input)?;
            let daily = datapipe::daily_mean(&samples);
            let rows = rfregress::build_training_samples(&daily, &index);
            anyhow::ensure!(
                rows.len() >= 2,
                "need at least 2 regression samples, got {} (is index {index:?} present?)",
                rows.len()
            );
            let forest = rfregress::fit_forest(&rows, &cfg.forest)?;
            report::save_atomic(&model, |p| Ok(forest.save_json(p)?))?;
            let preds: Vec<f64> = rows
                .iter()
                .map(|r| forest.predict(&r.features))
                .collect::<poresim::Result<_>>()?;
            let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
            let m = rfregress::regression_metrics(&preds, &targets)?;
            println!(
                "trained on {} samples: r2 {:.4}, mae {:.4} ± {:.4}",
                rows.len(),
                m.r2,
                m.mae,
                m.mae_std
            );
            if let Some(path) = run_report {
                RunReport::new("train", cfg.forest.rng_seed, cfg.sha256()?)
                    .input("series", &input)
                    .output("model", &model)
                    .write(&path)?;
            }
            Ok(())
        }
        Command::Simulate {
            input,
            model,
            window,
            out,
            beta,
            flow,
            config,
            run_report,
        } => {
            let mut cfg = PipelineConfig::load_or_default(config.as_deref())?;
            if let Some(b) = beta {
                cfg.beta = b;
            }
            anyhow::ensure!(cfg.beta >= 1.0, "beta must be >= 1, got {}", cfg.beta);
            let window = TimeWindow::parse(&window)?;
            let img = imagecore::read_png(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let forest = RandomForest::load_json(&model)
                .with_context(|| format!("loading model {}", model.display()))?;

            let (_, comps) = poreseg::detect_pores(&img, &cfg.detection)?;
            let rho = forest.predict(&rfregress::window_features(window, 1.0, 1.0))?;
            let strength = deform::solve_warp_strength(rho, cfg.beta)
                .map_err(|e| e.context(format!("ratio {rho:.4} for {window}")))?;
            let circles = deform::circles_for_components(&comps, cfg.beta, strength)?;
            let field = deform::build_flow_field(img.width(), img.height(), &circles)?;
            let warped = deform::apply_flow(&img, &field)?;

            report::save_atomic(&out, |p| Ok(imagecore::write_png(p, &warped)?))?;
            if let Some(flow_path) = flow {
                report::save_atomic(&flow_path, |p| {
                    let f = File::create(p)?;
                    Ok(field.write_psff(std::io::BufWriter::new(f))?)
                })?;
            }
            println!(
                "{window}: ratio {rho:.4}, strength {strength:.4}, {} pores warped",
                comps.len()
            );
            if let Some(path) = run_report {
                RunReport::new("simulate", cfg.rng_seed, cfg.sha256()?)
                    .input("image", &input)
                    .input("model", &model)
                    .output("simulated", &out)
                    .write(&path)?;
            }
            Ok(())
        }
        Command::GenSheet {
            out,
            truth_mask,
            truth_components,
            width,
            height,
            pores,
            radius_min,
            radius_max,
            contrast_min,
            contrast_max,
            texture,
            seed,
            run_report,
        } => {
            let spec = synth::SheetSpec {
                width,
                height,
                n_pores: pores,
                radius_min,
                radius_max,
                contrast_min,
                contrast_max,
                texture_amplitude: texture,
                rng_seed: seed,
            };
            let sheet = synth::gen_sheet(&spec)?;
            report::save_atomic(&out, |p| Ok(imagecore::write_png(p, &sheet.image)?))?;
            if let Some(path) = &truth_mask {
                report::save_atomic(path, |p| Ok(sheet.mask.write_png(p)?))?;
            }
            if let Some(path) = &truth_components {
                let mut buf = String::from("cx,cy,radius_x,radius_y,angle_rad,contrast,area\n");
                for p in &sheet.pores {
                    buf.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        p.center.0,
                        p.center.1,
                        p.radius_x,
                        p.radius_y,
                        p.angle_rad,
                        p.contrast,
                        p.area()
                    ));
                }
                report::write_atomic(path, buf.as_bytes())?;
            }
            println!("sheet {}x{} with {} pores", width, height, sheet.pores.len());
            if let Some(path) = run_report {
                let cfg = PipelineConfig {
                    rng_seed: seed,
                    ..PipelineConfig::default()
                };
                RunReport::new("gen-sheet", seed, cfg.sha256()?)
                    .output("image", &out)
                    .write(&path)?;
            }
            Ok(())
        }
        Command::GenCohort {
            out,
            truth,
            subjects,
            days,
            trend,
            noise,
            outlier_rate,
            outlier_sigma,
            seed,
            run_report,
        } => {
            let spec = synth::CohortSpec {
                n_subjects: subjects,
                days,
                trend_per_day: trend,
                noise_sigma: noise,
                outlier_rate,
                outlier_sigma,
                rng_seed: seed,
                index_name: "Pore_Area_total".to_string(),
            };
            let cohort = synth::gen_cohort(&spec)?;
            write_series(&out, &cohort.samples)?;
            if let Some(path) = &truth {
                let mut buf = String::from("subject_id,day,index_name,factor\n");
                for o in &cohort.outliers {
                    buf.push_str(&format!(
                        "{},{},{},{}\n",
                        o.subject_id, o.day, o.index_name, o.factor
                    ));
                }
                report::write_atomic(path, buf.as_bytes())?;
            }
            println!(
                "cohort: {} subjects x {} days, {} planted outliers",
                subjects,
                days + 1,
                cohort.outliers.len()
            );
            if let Some(path) = run_report {
                let cfg = PipelineConfig {
                    rng_seed: seed,
                    ..PipelineConfig::default()
                };
                RunReport::new("gen-cohort", seed, cfg.sha256()?)
                    .output("series", &out)
                    .write(&path)?;
            }
            Ok(())
        }
        Command::EvalSeg { pred, truth } => {
            let p = poreseg::Mask::read_png(&pred)
                .with_context(|| format!("reading {}", pred.display()))?;
            let t = poreseg::Mask::read_png(&truth)
                .with_context(|| format!("reading {}", truth.display()))?;
            let m = poreseg::mask_metrics(&p, &t)?;
            println!("dice: {:.4}", m.dice);
            println!("iou: {:.4}", m.iou);
            println!("precision: {:.4}", m.precision);
            println!("accuracy: {:.4}", m.accuracy);
            Ok(())
        }
    }
}

fn read_series(path: &Path) -> anyhow::Result<Vec<datapipe::IndexSample>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(datapipe::read_samples_csv(std::io::BufReader::new(f))?)
}

fn write_series(path: &Path, samples: &[datapipe::IndexSample]) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    datapipe::write_samples_csv(&mut buf, samples)?;
    report::write_atomic(path, &buf)
}
