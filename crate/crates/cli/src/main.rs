mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::Context;
use clap::{ArgAction, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use emokin::cnn::{self, CnnArchitecture, TrainConfig};
use emokin::dtw::{select_templates, DtwModel};
use emokin::eval::{
    class_subset_sweep, default_subsets, emit_report, make_splits, run_protocol, CnnPipeline,
    DtwPipeline, EvalReport, Pipeline, Protocol, ReportFormat,
};
use emokin::features::{build_bundle, pca_fit, PcaOptions, KINEMATIC_CHANNEL_NAMES, SCALAR_NAMES};
use emokin::preprocess::prepare;
use emokin::raster::{image_file_name, rasterize, write_ppm, RasterStyle};
use emokin::synth::{gen_dataset, write_generated, GenerationManifest, Generator};
use emokin::telemetry::{load_dataset, Dataset};
use emokin::{par, EmotionLabel, TaskKind};

/// Environment fallback for `--threads`.
const THREADS_ENV: &str = "EMOKIN_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "emokin",
    version,
    about = "Emotion inference from robot-arm teleoperation telemetry",
    args_override_self = true
)]
struct Cli {
    /// Worker threads [default: $EMOKIN_THREADS, else all cores]
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// File of `key = value` lines using the long flag names; flags given on
    /// the command line win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Debug)]
struct TaskList(Vec<TaskKind>);

impl FromStr for TaskList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let tasks = s
            .split(',')
            .map(|t| t.trim().parse::<TaskKind>().map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        if tasks.is_empty() {
            return Err("empty task list".into());
        }
        Ok(TaskList(tasks))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProtocolArg {
    SubjectDependent,
    Loso,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::SubjectDependent => Protocol::SubjectDependent,
            ProtocolArg::Loso => Protocol::LeaveOneSubjectOut,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Classifier {
    Dtw,
    Cnn,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

#[derive(clap::Args, Debug, Clone)]
struct CnnArgs {
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    batch: u64,
    #[arg(long, default_value_t = 1e-4)]
    lr: f32,
    /// Dropout after the second convolution block
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    dropout: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled dataset
    Synth {
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        subjects: u64,
        /// Comma-separated task slugs
        #[arg(long, default_value = "lw_air,lw_trace")]
        tasks: TaskList,
        /// Repetitions per (subject, task, emotion)
        #[arg(long, default_value_t = 15, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Static kinematic features per instance and their 2-D principal projection
    Features {
        #[arg(long)]
        data: PathBuf,
        /// Feature CSV: 39 statics and 5 scalars per instance
        #[arg(long)]
        out: PathBuf,
        /// Projection CSV (x, y, label) [default: <out stem>_pca.csv]
        #[arg(long)]
        scatter: Option<PathBuf>,
        /// Scale features to unit variance before the projection
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        standardize: bool,
    },
    /// Polar joint-angle images, one PPM per instance
    Raster {
        #[arg(long)]
        data: PathBuf,
        /// Output image directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a DTW nearest-template model
    TrainDtw {
        #[arg(long)]
        data: PathBuf,
        /// Model JSON
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        templates_per_class: u64,
        /// Sakoe-Chiba band half-width [default: unconstrained]
        #[arg(long)]
        band: Option<usize>,
        /// Train on these tasks only [default: all]
        #[arg(long)]
        tasks: Option<TaskList>,
    },
    /// Train the polar-image CNN
    TrainCnn {
        #[arg(long)]
        data: PathBuf,
        /// Model file
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cnn: CnnArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Train on these tasks only [default: all]
        #[arg(long)]
        tasks: Option<TaskList>,
    },
    /// Run an evaluation protocol and write a report
    Eval {
        #[arg(long)]
        data: PathBuf,
        /// Report file
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Classifier::Dtw)]
        classifier: Classifier,
        #[arg(long, value_enum, default_value_t = ProtocolArg::SubjectDependent)]
        protocol: ProtocolArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Split and training seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also retrain on growing class subsets and report accuracy per class count
        #[arg(long, default_value_t = false, action = ArgAction::Set)]
        sweep: bool,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        templates_per_class: u64,
        /// Sakoe-Chiba band half-width [default: unconstrained]
        #[arg(long)]
        band: Option<usize>,
        #[command(flatten)]
        cnn: CnnArgs,
        /// Evaluate on these tasks only [default: all]
        #[arg(long)]
        tasks: Option<TaskList>,
    },
    /// Print the CNN architecture, parameter count and cost
    Describe {
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        classes: u64,
    },
}

/// Bad flags or configuration, reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_args(argv: Vec<OsString>) -> anyhow::Result<Cli> {
    let command = Cli::command();
    let matches = match command.clone().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => e.exit(),
    };
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    let pairs = config::read_config(path)?;
    let sub = matches.subcommand_name().expect("subcommand is required");
    let extra = config::config_args(&command, sub, &pairs).map_err(|e| usage(e.to_string()))?;
    let at = argv
        .iter()
        .position(|a| a.to_str() == Some(sub))
        .expect("subcommand appears in argv");
    let mut merged = argv[..=at].to_vec();
    merged.extend(extra.into_iter().map(OsString::from));
    merged.extend_from_slice(&argv[at + 1..]);
    let matches = match command.try_get_matches_from(merged) {
        Ok(m) => m,
        Err(e) => e.exit(),
    };
    Ok(Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit()))
}

fn configure_threads(flag: Option<u64>) -> anyhow::Result<usize> {
    let requested = match flag {
        Some(n) => Some(n as usize),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Some(n),
                _ => return Err(usage(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
            },
            Err(_) => None,
        },
    };
    #[cfg(feature = "parallel")]
    if let Some(n) = requested {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = requested;
    Ok(par::current_threads())
}

fn train_config(args: &CnnArgs, seed: u64) -> anyhow::Result<TrainConfig> {
    let cfg = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch as usize,
        epochs: args.epochs as usize,
        seed,
        dropout: args.dropout,
        parallel: par::current_threads() > 1,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn load(dir: &Path, tasks: Option<&TaskList>) -> anyhow::Result<Dataset> {
    let data = load_dataset(dir)?;
    Ok(match tasks {
        Some(TaskList(keep)) => data.filter(|i| keep.contains(&i.task)),
        None => data,
    })
}

fn labeled(data: &Dataset) -> anyhow::Result<Vec<(&emokin::telemetry::TaskInstance, EmotionLabel)>> {
    data.instances()
        .iter()
        .map(|i| {
            i.label
                .map(|l| (i, l))
                .with_context(|| format!("InsufficientData: {} has no label", i.file_stem()))
        })
        .collect()
}

fn thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn evaluate_with<P: Pipeline>(
    data: &Dataset,
    pipeline: &P,
    protocol: Protocol,
    seed: u64,
    sweep: bool,
) -> anyhow::Result<EvalReport> {
    let plan = make_splits(data, protocol, seed)?;
    eprintln!("{}: {} folds", protocol.slug(), plan.folds.len());
    let mut report = run_protocol(data, pipeline, &plan)?.report;
    if sweep {
        let (_, by_size) = class_subset_sweep(data, pipeline, &default_subsets(), protocol, seed)?;
        report.accuracy_by_class_count = by_size;
    }
    Ok(report)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = configure_threads(cli.threads)?;
    match cli.command {
        Command::Synth {
            subjects,
            tasks,
            reps,
            seed,
            out,
        } => {
            let (subjects, reps) = (subjects as usize, reps as usize);
            eprintln!("synth: generating on {threads} thread(s)");
            let data = gen_dataset(subjects, &tasks.0, reps, seed)?;
            let manifest = GenerationManifest::new(&Generator::default(), subjects, &tasks.0, reps, seed);
            write_generated(&data, &manifest, &out)?;
            println!("{}", manifest.summary());
        }
        Command::Features {
            data,
            out,
            scatter,
            standardize,
        } => {
            let data = load(&data, None)?;
            let bundles = par::try_map(data.instances(), |inst| -> emokin::Result<_> {
                let (segment, raw) = prepare(&inst.ee)?;
                Ok(build_bundle(&segment, raw)?)
            })?;
            let statics: Vec<Vec<f64>> = bundles.iter().map(|b| b.statics.clone()).collect();
            let pca = pca_fit(&statics, PcaOptions { standardize })?;
            let mut w = csv::Writer::from_path(&out)
                .with_context(|| format!("IoFailure: {}", out.display()))?;
            let mut header: Vec<String> = ["subject", "task", "label", "repetition"].map(String::from).to_vec();
            for name in KINEMATIC_CHANNEL_NAMES {
                for stat in ["mean", "var", "std"] {
                    header.push(format!("{name}_{stat}"));
                }
            }
            header.extend(SCALAR_NAMES.map(String::from));
            w.write_record(&header)?;
            let scatter = scatter.unwrap_or_else(|| {
                let stem = out.file_stem().map_or("features".into(), |s| s.to_string_lossy().into_owned());
                out.with_file_name(format!("{stem}_pca.csv"))
            });
            let mut sw = csv::Writer::from_path(&scatter)
                .with_context(|| format!("IoFailure: {}", scatter.display()))?;
            sw.write_record(["x", "y", "label"])?;
            for (inst, b) in data.instances().iter().zip(&bundles) {
                let label = inst.label.map_or(String::new(), |l| l.name().to_string());
                let mut row = vec![
                    inst.subject_id.clone(),
                    inst.task.slug(),
                    label.clone(),
                    inst.repetition.to_string(),
                ];
                row.extend(b.statics.iter().map(f64::to_string));
                row.extend(b.scalars().iter().map(f64::to_string));
                w.write_record(&row)?;
                let [x, y] = pca.project(&b.statics)?;
                sw.write_record([x.to_string(), y.to_string(), label])?;
            }
            w.flush().with_context(|| format!("IoFailure: {}", out.display()))?;
            sw.flush().with_context(|| format!("IoFailure: {}", scatter.display()))?;
            eprintln!(
                "features: {} instances -> {}, projection -> {}",
                data.len(),
                out.display(),
                scatter.display()
            );
        }
        Command::Raster { data, out } => {
            let data = load(&data, None)?;
            std::fs::create_dir_all(&out).with_context(|| format!("IoFailure: {}", out.display()))?;
            let style = RasterStyle::default();
            par::try_map(data.instances(), |inst| -> emokin::Result<()> {
                let image = rasterize(&inst.joints, &style)?;
                Ok(write_ppm(&image, &out.join(image_file_name(inst)))?)
            })?;
            eprintln!("raster: {} images -> {}", data.len(), out.display());
        }
        Command::TrainDtw {
            data,
            out,
            templates_per_class,
            band,
            tasks,
        } => {
            let data = load(&data, tasks.as_ref())?;
            let items = labeled(&data)?;
            let seqs = par::try_map(&items, |(inst, label)| {
                emokin::eval::dtw_sequence(inst).map(|s| (s, *label))
            })?;
            let model: DtwModel = select_templates(&seqs, templates_per_class as usize, band)?;
            model.save(&out)?;
            eprintln!(
                "train-dtw: {} templates over {} classes from {} instances -> {}",
                model.template_count(),
                model.classes().len(),
                seqs.len(),
                out.display()
            );
        }
        Command::TrainCnn {
            data,
            out,
            cnn: args,
            seed,
            tasks,
        } => {
            let cfg = train_config(&args, seed)?;
            eprintln!(
                "train-cnn: epochs={} batch={} lr={} seed={} dropout={}",
                cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.seed, cfg.dropout
            );
            let data = load(&data, tasks.as_ref())?;
            let items = labeled(&data)?;
            let style = RasterStyle::default();
            let images = par::try_map(&items, |(inst, label)| {
                rasterize(&inst.joints, &style).map(|im| (im, *label))
            })?;
            let mut labels: Vec<EmotionLabel> = images.iter().map(|(_, l)| *l).collect();
            labels.sort();
            labels.dedup();
            let arch = CnnArchitecture::standard(labels.len());
            let outcome = cnn::train(&images, arch, &labels, &cfg, |epoch, loss| {
                eprintln!("epoch {:>3}  loss {loss:.6}", epoch + 1);
            })?;
            cnn::save_model(&outcome.model, &out)?;
            eprintln!("train-cnn: {} instances -> {}", images.len(), out.display());
        }
        Command::Eval {
            data,
            out,
            classifier,
            protocol,
            format,
            seed,
            sweep,
            templates_per_class,
            band,
            cnn: args,
            tasks,
        } => {
            let cnn_config = train_config(&args, seed)?;
            let data = load(&data, tasks.as_ref())?;
            let protocol = Protocol::from(protocol);
            let report = match classifier {
                Classifier::Dtw => {
                    let pipeline = DtwPipeline {
                        k_per_class: templates_per_class as usize,
                        band,
                    };
                    evaluate_with(&data, &pipeline, protocol, seed, sweep)?
                }
                Classifier::Cnn => {
                    eprintln!(
                        "eval: cnn epochs={} batch={} lr={} dropout={}",
                        cnn_config.epochs, cnn_config.batch_size, cnn_config.learning_rate, cnn_config.dropout
                    );
                    let pipeline = CnnPipeline {
                        config: cnn_config,
                        log_epochs: true,
                        ..CnnPipeline::default()
                    };
                    evaluate_with(&data, &pipeline, protocol, seed, sweep)?
                }
            };
            let format = match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Markdown => ReportFormat::Markdown,
            };
            emit_report(&report, &out, format)?;
            eprintln!(
                "eval: accuracy {:.4} over {} predictions -> {}",
                report.accuracy_overall,
                report.total,
                out.display()
            );
        }
        Command::Describe { classes } => {
            let arch = CnnArchitecture::standard(classes as usize);
            let params = arch.param_count()? as u64;
            let macs = arch.forward_macs()?;
            let mut text = format!("{arch}");
            let _ = writeln!(text, "parameters       {}", thousands(params));
            let _ = writeln!(
                text,
                "forward MACs     {} (about {:.2} GFLOPs per image)",
                thousands(macs),
                2.0 * macs as f64 / 1e9
            );
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match parse_args(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => return report_error(e),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(e),
    }
}

fn report_error(e: anyhow::Error) -> ExitCode {
    if e.downcast_ref::<UsageError>().is_some() {
        eprintln!("error: {e}\n\n{}", Cli::command().render_usage());
        return ExitCode::from(2);
    }
    eprintln!("error: {e:#}");
    ExitCode::from(1)
}
