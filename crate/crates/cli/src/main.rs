use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mimu_dr::config::KvConfig;
use mimu_dr::data::{
    build_split, imu_files, load_corpus, load_recording, write_corpus, ColumnMap, LoadReport, SplitId, SplitSpec,
};
use mimu_dr::eval::{
    ins_baseline, qdr_baseline, read_combination_table, read_scenario_table, run_experiment, write_combination_table,
    write_metrics_table, write_track, AraModels, EvalReport, ExperimentConfig, ReportRow, COMBINATION_HEADER,
    SCENARIO_HEADER,
};
use mimu_dr::fusion::{evaluate_combinations, FusionMode, ImuSubset, ModelSet, Regressor};
use mimu_dr::quadnet::{checkpoint, QuadNet};
use mimu_dr::synth::{gen_corpus, CorpusSpec};
use mimu_dr::{MimuRecording, Target, TrajectoryKind};

#[derive(Parser)]
#[command(name = "mimu-dr", version, about = "Quadrotor dead reckoning from multiple IMUs")]
struct Cli {
    /// key = value configuration file (column mapping, training, QDR and
    /// navigation settings). Unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus in the canonical CSV layout.
    Simulate {
        /// straight | horizontal-periodic | vertical-periodic
        #[arg(long)]
        spec: TrajectoryKind,
        #[arg(long, default_value_t = 4)]
        n_imus: usize,
        /// White-noise sigmas "accel,gyro" in m/s² and rad/s.
        #[arg(long, default_value = "0.05,0.002")]
        noise: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        n_trajectories: usize,
        /// Flight duration in seconds (default: the preset's).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Pure strapdown INS from the ground-truth initial state.
    InsBaseline {
        /// Trajectory directory holding imu<k>.csv and gt.csv.
        #[arg(long)]
        recording: PathBuf,
        /// Gravity magnitude, m/s² (default: nav.gravity or 9.794).
        #[arg(long)]
        g: Option<f64>,
        /// IMUs to average before integration, e.g. "1,2" (default: 1).
        #[arg(long, default_value = "1")]
        imus: String,
        #[arg(long)]
        kind: Option<TrajectoryKind>,
        /// Output directory for track.csv and metrics.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Model-based QDR: peak detection, Weinberg distance and gyro heading.
    QdrRun {
        #[arg(long)]
        recording: PathBuf,
        /// Weinberg gain (default: qdr.gain or 0.48).
        #[arg(long)]
        gain: Option<f64>,
        #[arg(long, default_value = "1")]
        imus: String,
        #[arg(long)]
        kind: Option<TrajectoryKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one QuadNet regressor on a split and save a checkpoint.
    Train {
        /// Corpus root with <kind>/<id>/ trajectory directories.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: SplitId,
        #[arg(long, default_value = "distance")]
        target: Target,
        /// Held-out trajectory id (default: the split's standard one).
        #[arg(long)]
        test_trajectory: Option<String>,
        /// Train only on windows of this IMU (per-IMU ARA models).
        #[arg(long)]
        imu: Option<usize>,
        #[arg(long)]
        out_model: PathBuf,
    },
    /// Score RDA or ARA fusion of trained models on one recording.
    Evaluate {
        #[arg(long)]
        mode: FusionMode,
        /// Subset size; omitted sweeps k = 1..=n-imus.
        #[arg(long)]
        k: Option<usize>,
        /// One checkpoint shared by every IMU, or one per IMU (ARA only),
        /// comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        recording: PathBuf,
        /// Nominal array size (default: IMU files found).
        #[arg(long)]
        n_imus: Option<usize>,
        #[arg(long)]
        kind: Option<TrajectoryKind>,
        /// Combination table CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train, sweep every k and write all tables and traces for a split.
    Experiment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: SplitId,
        #[arg(long, value_delimiter = ',', default_value = "rda,ara")]
        modes: Vec<FusionMode>,
        #[arg(long, default_value_t = 4)]
        n_imus: usize,
        #[arg(long)]
        test_trajectory: Option<String>,
        /// Skip the altitude network (height held constant).
        #[arg(long)]
        no_altitude: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Gather every table under a results directory into combined CSVs.
    Report {
        #[arg(long)]
        results_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::default(),
    };
    let map = ColumnMap::from_config(&cfg)?;
    match cli.command {
        Command::Simulate {
            spec,
            n_imus,
            noise,
            seed,
            n_trajectories,
            duration,
            out_dir,
        } => {
            let (a, g) = parse_noise(&noise)?;
            let mut cs = CorpusSpec::new(spec, n_trajectories, n_imus, seed);
            cs.accel_sigma = a;
            cs.gyro_sigma = g;
            cs.gravity = cfg.gravity()?;
            if let Some(d) = duration {
                cs.duration = d;
            }
            let corpus = gen_corpus(&cs)?;
            write_corpus(&out_dir, &corpus)?;
            log::info!("wrote {} trajectories to {}", corpus.len(), out_dir.join(spec.as_str()).display());
        }
        Command::InsBaseline {
            recording,
            g,
            imus,
            kind,
            out,
        } => {
            let (rec, _) = load_dir(&recording, &map, kind)?;
            let g = match g {
                Some(g) => g,
                None => cfg.gravity()?,
            };
            let (sol, report) = ins_baseline(&rec, &parse_subset(&imus)?, g)?;
            write_track(&out.join("track.csv"), &sol)?;
            write_metrics(&out.join("metrics.csv"), "ins", &report)?;
            print_report("ins", &report);
        }
        Command::QdrRun {
            recording,
            gain,
            imus,
            kind,
            out,
        } => {
            let (rec, _) = load_dir(&recording, &map, kind)?;
            let mut params = cfg.qdr_params()?;
            if let Some(k) = gain {
                params.gain = k;
            }
            let (run, report) = qdr_baseline(&rec, &parse_subset(&imus)?, &params)?;
            if let Some(d) = &run.diagnostic {
                log::warn!("{d}");
            }
            write_track(&out.join("track.csv"), &run.solution)?;
            match report {
                Some(r) => {
                    write_metrics(&out.join("metrics.csv"), "qdr", &r)?;
                    print_report("qdr", &r);
                }
                None => log::warn!("no QDR track produced; metrics.csv not written"),
            }
        }
        Command::Train {
            corpus,
            split,
            target,
            test_trajectory,
            imu,
            out_model,
        } => {
            let corpus = load_corpus(&corpus, &map)?;
            let spec = split_spec(split, test_trajectory, &cfg)?;
            let split_data = build_split(&spec, &corpus)?;
            let windows: Vec<_> = match imu {
                Some(i) => split_data.train.iter().filter(|w| w.origin.imu == i).cloned().collect(),
                None => split_data.train,
            };
            if windows.is_empty() {
                bail!("split {split} has no training windows{}", imu.map_or(String::new(), |i| format!(" for IMU {i}")));
            }
            let train = cfg.train_config()?;
            log::info!("training {target} network on {} windows", windows.len());
            let (model, hist) = QuadNet::fit(&windows, target, &cfg.arch()?, &train)?;
            log::info!("final epoch loss {:.6e}", hist.final_loss().unwrap_or(f64::NAN));
            checkpoint::save(&out_model, &model, &train, Some(&split.to_string()))?;
            log::info!("saved {}", out_model.display());
        }
        Command::Evaluate {
            mode,
            k,
            models,
            recording,
            n_imus,
            kind,
            out,
        } => {
            let (rec, _) = load_dir(&recording, &map, kind)?;
            let loaded = models
                .iter()
                .map(|p| checkpoint::load(p).map(|(m, _)| m).with_context(|| format!("loading {}", p.display())))
                .collect::<Result<Vec<QuadNet>>>()?;
            let target = loaded[0].target;
            if loaded.iter().any(|m| m.target != target) {
                bail!("all models must regress the same target");
            }
            let set = if loaded.len() == 1 {
                ModelSet::Shared(&loaded[0])
            } else {
                if mode != FusionMode::Ara {
                    bail!("RDA feeds one averaged stream and takes exactly one model, got {}", loaded.len());
                }
                ModelSet::PerImu(loaded.iter().map(|m| Some(m as &dyn Regressor)).collect())
            };
            let n = n_imus.unwrap_or(rec.n_imus());
            let ks: Vec<usize> = match k {
                Some(k) => vec![k],
                None => (1..=n).collect(),
            };
            let mut rows = Vec::new();
            for k in ks {
                let r = evaluate_combinations(mode, &set, &rec, n, k, target)?;
                for d in &r.diagnostics {
                    log::warn!("{d}");
                }
                println!(
                    "{mode} {target} k={} subsets={} rmse={:.4} max={:.4} std={:.4}",
                    r.row.k, r.row.n_subsets, r.row.rmse_m, r.row.max_m, r.row.std_m
                );
                rows.push(r.row);
            }
            write_combination_table(&out, &rows)?;
        }
        Command::Experiment {
            corpus,
            split,
            modes,
            n_imus,
            test_trajectory,
            no_altitude,
            out_dir,
        } => {
            let mut ec = ExperimentConfig::new(split_spec(split, test_trajectory, &cfg)?);
            ec.modes = modes;
            ec.n_imus = n_imus;
            ec.arch = cfg.arch()?;
            ec.train = cfg.train_config()?;
            ec.ara_models = cfg.get_parsed::<AraModels>("fusion.ara_models")?.unwrap_or(AraModels::Shared);
            ec.altitude = !no_altitude;
            ec.gravity = cfg.gravity()?;
            // Fail on contradictions before spending time on loading.
            ec.validate()?;
            let corpus = load_corpus(&corpus, &map)?;
            let out = run_experiment(&ec, &corpus, Some(&out_dir))?;
            for d in &out.diagnostics {
                log::warn!("{d}");
            }
            print_report("ins", &out.baseline);
            print_report("quadnet", &out.trajectory.report);
        }
        Command::Report { results_dir, out } => report(&results_dir, &out)?,
    }
    Ok(())
}

fn parse_noise(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, g] = parts[..] else {
        bail!("--noise expects \"accel_sigma,gyro_sigma\", got '{s}'");
    };
    Ok((a.parse().context("accel sigma")?, g.parse().context("gyro sigma")?))
}

fn parse_subset(s: &str) -> Result<ImuSubset> {
    let idx = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad IMU index '{p}'")))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImuSubset::new(idx)?)
}

fn split_spec(id: SplitId, test: Option<String>, cfg: &KvConfig) -> Result<SplitSpec> {
    let mut spec = SplitSpec::standard(id).with_train_stride(cfg.train_stride()?);
    if let Some(t) = test {
        spec = spec.with_test_trajectory(t);
    }
    Ok(spec)
}

/// A trajectory directory `<kind>/<id>/`; the kind comes from the parent
/// directory name unless given explicitly.
fn load_dir(dir: &Path, map: &ColumnMap, kind: Option<TrajectoryKind>) -> Result<(MimuRecording, LoadReport)> {
    let id = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .with_context(|| format!("{}: not a trajectory directory", dir.display()))?;
    let kind = match kind {
        Some(k) => k,
        None => {
            let parent = dir
                .canonicalize()
                .ok()
                .and_then(|p| p.parent().and_then(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()))
                .unwrap_or_default();
            parent
                .parse()
                .with_context(|| format!("cannot infer trajectory kind from '{parent}'; pass --kind"))?
        }
    };
    let (rec, report) = load_recording(&imu_files(dir)?, &dir.join("gt.csv"), map, &id, kind)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok((rec, report))
}

fn write_metrics(path: &Path, label: &str, r: &EvalReport) -> Result<()> {
    let mut rows = vec![ReportRow {
        label: label.to_owned(),
        stats: r.stats(),
        trajectory_length_m: Some(r.trajectory_length_m),
    }];
    if let Some(h) = r.horizontal {
        rows.push(ReportRow {
            label: format!("{label}-horizontal"),
            stats: h,
            trajectory_length_m: Some(r.trajectory_length_m),
        });
    }
    write_metrics_table(path, &rows)?;
    Ok(())
}

fn print_report(label: &str, r: &EvalReport) {
    println!(
        "{label}: rmse={:.3} m max={:.3} m std={:.3} m length={:.1} m",
        r.rmse_m, r.max_error_m, r.std_m, r.trajectory_length_m
    );
}

fn csv_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for e in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = e?.path();
        if p.is_dir() {
            csv_files(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push(p);
        }
    }
    Ok(())
}

fn header_of(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().next().unwrap_or("").trim().to_owned())
}

/// Concatenates every combination table into `combinations.csv` and every
/// scenario table into `scenarios.csv`, tagged with the source file.
fn report(results_dir: &Path, out: &Path) -> Result<()> {
    let mut files = Vec::new();
    csv_files(results_dir, &mut files)?;
    files.sort();
    let out_canon = out.canonicalize().ok();
    let mut combos = format!("source,{}\n", COMBINATION_HEADER.join(","));
    let mut scenarios = format!("source,{}\n", SCENARIO_HEADER.join(","));
    let (mut n_combo, mut n_scen) = (0, 0);
    for f in &files {
        if out_canon.is_some() && f.parent().and_then(|p| p.canonicalize().ok()) == out_canon {
            continue;
        }
        let source = f.strip_prefix(results_dir).unwrap_or(f).with_extension("").display().to_string();
        let header = header_of(f)?;
        if header == COMBINATION_HEADER.join(",") {
            for r in read_combination_table(f)? {
                combos.push_str(&format!("{source},{},{},{},{},{}\n", r.k, r.n_subsets, r.rmse_m, r.max_m, r.std_m));
            }
            n_combo += 1;
        } else if header == SCENARIO_HEADER.join(",") {
            for r in read_scenario_table(f)? {
                let len = r.trajectory_length_m.map_or_else(String::new, |l| l.to_string());
                scenarios.push_str(&format!(
                    "{source},{},{},{},{},{len}\n",
                    r.label, r.stats.rmse, r.stats.max, r.stats.std
                ));
            }
            n_scen += 1;
        }
    }
    if n_combo + n_scen == 0 {
        bail!("{}: no result tables found", results_dir.display());
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (name, body) in [("combinations.csv", combos), ("scenarios.csv", scenarios)] {
        let p = out.join(name);
        fs::File::create(&p)
            .and_then(|mut f| f.write_all(body.as_bytes()))
            .with_context(|| format!("writing {}", p.display()))?;
    }
    log::info!("aggregated {n_combo} combination and {n_scen} scenario tables");
    Ok(())
}
