use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sat_core::baselines::PolicyKind;
use sat_core::config::ScenarioConfig;
use sat_core::harness::{
    export, read_metrics_csv, run_episode, run_monte_carlo, welch_t_test, write_metrics_csv, MetricsRow, SummaryRow,
    Trace,
};
use sat_core::prediction::{
    ade_fde, cv_predict, gen_trajectories, load_trajectories, samples_from_trajectories, save_trajectories, train,
    windows_from_trajectories, CvConfig, LstmPredictor, Predictor, PredictorWeights, TrainConfig, TrajKind,
    INPUT_LEN, OUTPUT_LEN, TRAJ_LEN,
};
use sat_core::trace_tools::{extract_paths, replay_check, write_paths_csv};

#[derive(Parser)]
#[command(name = "sat", version, about = "Multi-agent search-and-track simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write trace.jsonl and metrics.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Disable the mission time cap.
        #[arg(long)]
        uncapped: bool,
    },
    /// Run every scenario in a directory over a seed range.
    Mc {
        #[arg(long)]
        config_dir: PathBuf,
        /// Inclusive range `a..b`, or a comma-separated list.
        #[arg(long, default_value = "1..20")]
        seeds: String,
        /// Override the policy of every scenario.
        #[arg(long)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        uncapped: bool,
    },
    /// Welch t-test between two metrics files.
    Stats {
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        metrics: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Metric::MissionTime)]
        metric: Metric,
    },
    /// Write synthetic trajectories as CSV files.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Kind::Linear, Kind::Turning, Kind::Sinusoidal])]
        kinds: Vec<Kind>,
        #[arg(long, default_value_t = TRAJ_LEN)]
        len: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the trajectory predictor.
    TrainPredictor {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON file with training hyperparameters.
        #[arg(long)]
        train_config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        hidden_dim: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print ADE/FDE of the predictor and the constant-velocity baseline as CSV.
    EvalPredictor {
        /// Bundled weights when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
    },
    /// Trace utilities.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Extract per-entity paths as CSV.
    Paths {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-simulate a trace and compare it event by event.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        uncapped: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    MissionTime,
    TrackedRatio,
    MeanTrackingTime,
    MeanTraveled,
}

impl Metric {
    fn get(self, r: &MetricsRow) -> f64 {
        match self {
            Metric::MissionTime => r.mission_time,
            Metric::TrackedRatio => r.tracked_ratio,
            Metric::MeanTrackingTime => r.mean_tracking_time,
            Metric::MeanTraveled => r.mean_traveled,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Linear,
    Turning,
    Sinusoidal,
}

impl From<Kind> for TrajKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Linear => TrajKind::Linear,
            Kind::Turning => TrajKind::Turning,
            Kind::Sinusoidal => TrajKind::Sinusoidal,
        }
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("seed range start")?;
        let b: u64 = b.trim_start_matches('=').trim().parse().context("seed range end")?;
        if b < a {
            bail!("empty seed range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse::<u64>().with_context(|| format!("bad seed {x:?}"))).collect()
}

fn load_config(path: &Path, uncapped: bool) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if uncapped {
        cfg.time_cap = 0.0;
    }
    Ok(cfg)
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no scenario files in {}", dir.display());
    }
    Ok(files)
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "config",
        "episodes",
        "mission_time_mean",
        "mission_time_std",
        "tracked_ratio_mean",
        "tracked_ratio_std",
        "mean_tracking_time_mean",
        "mean_tracking_time_std",
        "mean_traveled_mean",
        "mean_traveled_std",
    ])?;
    for r in rows {
        let mut rec = vec![r.config.clone(), r.episodes.to_string()];
        for m in [r.mission_time, r.tracked_ratio, r.mean_tracking_time, r.mean_traveled] {
            rec.push(format!("{:.4}", m.mean));
            rec.push(format!("{:.4}", m.std));
        }
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out, uncapped } => {
            let mut cfg = load_config(&config, uncapped)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let result = run_episode(&cfg)?;
            let row = MetricsRow::new(cfg.name.clone(), cfg.seed, &result.metrics);
            export(&result.trace, std::slice::from_ref(&row), &out)?;
            let m = &result.metrics;
            println!(
                "{} seed {}: mission_time {:.1} s, tracked_ratio {:.2}, mean_traveled {:.1} m",
                cfg.name, cfg.seed, m.mission_time, m.tracked_ratio, m.mean_traveled
            );
        }
        Command::Mc { config_dir, seeds, policy, out, uncapped } => {
            let seeds = parse_seeds(&seeds)?;
            let mut cfgs = Vec::new();
            for f in scenario_files(&config_dir)? {
                let mut cfg = load_config(&f, uncapped)?;
                if let Some(p) = policy {
                    cfg.policy = p;
                    cfg.name = format!("{}/{}", cfg.name, p);
                }
                cfgs.push(cfg);
            }
            let res = run_monte_carlo(&cfgs, &seeds)?;
            fs::create_dir_all(&out)?;
            write_metrics_csv(out.join("metrics.csv"), &res.rows)?;
            write_summary(&out.join("summary.csv"), &res.summary)?;
            println!("{:<32} {:>4} {:>16} {:>14}", "config", "n", "mission_time", "tracked_ratio");
            for r in &res.summary {
                println!(
                    "{:<32} {:>4} {:>8.2} / {:<6.2} {:>6.2} / {:<5.2}",
                    r.config, r.episodes, r.mission_time.mean, r.mission_time.std, r.tracked_ratio.mean, r.tracked_ratio.std
                );
            }
        }
        Command::Stats { metrics, metric } => {
            let a: Vec<f64> = read_metrics_csv(&metrics[0])?.iter().map(|r| metric.get(r)).collect();
            let b: Vec<f64> = read_metrics_csv(&metrics[1])?.iter().map(|r| metric.get(r)).collect();
            let r = welch_t_test(&a, &b)?;
            println!("n_a,n_b,mean_a,mean_b,t,dof,p");
            println!("{},{},{:.4},{:.4},{:.4},{:.2},{:.6}", a.len(), b.len(), r.mean_a, r.mean_b, r.t, r.dof, r.p);
        }
        Command::GenData { out, n, kinds, len, noise, seed } => {
            let kinds: Vec<TrajKind> = kinds.into_iter().map(Into::into).collect();
            let trajs = gen_trajectories(n, &kinds, len, noise, seed)?;
            save_trajectories(&out, &trajs)?;
            println!("wrote {n} trajectories to {}", out.display());
        }
        Command::TrainPredictor { data, out, train_config, epochs, hidden_dim, learning_rate, seed } => {
            let mut cfg: TrainConfig = match train_config {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => TrainConfig::default(),
            };
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.hidden_dim = hidden_dim.unwrap_or(cfg.hidden_dim);
            cfg.learning_rate = learning_rate.unwrap_or(cfg.learning_rate);
            let samples = samples_from_trajectories(&load_trajectories(&data)?);
            if samples.is_empty() {
                bail!("trajectories are shorter than {} points", INPUT_LEN + OUTPUT_LEN);
            }
            let report = train(&samples, &cfg, seed)?;
            report.weights.save(&out)?;
            println!(
                "{} samples, loss {:.5} -> {:.5}, weights written to {}",
                samples.len(),
                report.initial_loss,
                report.final_loss,
                out.display()
            );
        }
        Command::EvalPredictor { weights, data } => {
            let w = match weights {
                Some(p) => PredictorWeights::load(&p)?,
                None => PredictorWeights::default_trained(),
            };
            let lstm = LstmPredictor::new(w);
            let windows = windows_from_trajectories(&load_trajectories(&data)?, INPUT_LEN + OUTPUT_LEN);
            if windows.is_empty() {
                bail!("trajectories are shorter than {} points", INPUT_LEN + OUTPUT_LEN);
            }
            let mut sums = [[0.0; 2]; 2];
            for s in &windows {
                let l = ade_fde(&lstm.predict(&s.input), &s.target);
                let c = ade_fde(&cv_predict(&s.input, OUTPUT_LEN, &CvConfig::default()), &s.target);
                for (acc, v) in sums.iter_mut().zip([l, c]) {
                    acc[0] += v.0;
                    acc[1] += v.1;
                }
            }
            let n = windows.len() as f64;
            println!("model,windows,ade,fde");
            for (name, s) in ["lstm", "cv"].iter().zip(sums) {
                println!("{name},{},{:.6},{:.6}", windows.len(), s[0] / n, s[1] / n);
            }
        }
        Command::Trace { command } => match command {
            TraceCommand::Paths { input, out } => {
                let trace = Trace::load(&input)?;
                let rows = extract_paths(&trace);
                write_paths_csv(&rows, fs::File::create(&out)?)?;
                println!("{} rows written to {}", rows.len(), out.display());
            }
            TraceCommand::Verify { input, config, uncapped } => {
                let trace = Trace::load(&input)?;
                let cfg = load_config(&config, uncapped)?;
                if replay_check(&trace, &cfg)? {
                    println!("replay ok: {} events match", trace.events.len());
                } else {
                    println!("replay mismatch");
                    std::process::exit(1);
                }
            }
        },
    }
    Ok(())
}
