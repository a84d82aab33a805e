use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtdl_core::pipeline::{self, MethodName, PipelineConfig, RunSummary, SpectraRequest};
use mtdl_core::{BoundaryCondition, FlowDirection, Variant};

#[derive(Parser)]
#[command(
    name = "mtdl",
    version,
    about = "Topology-aware Hodge decomposition of image archives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose every image into curl-free, divergence-free and harmonic channels.
    Decompose {
        #[command(flatten)]
        common: Common,
    },
    /// Report Betti numbers of each thresholded image.
    Betti {
        #[command(flatten)]
        common: Common,
        /// Report only this degree.
        #[arg(long)]
        k: Option<usize>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Report the lowest Laplacian eigenvalues of each image.
    Spectra {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Boundary condition: normal or tangential.
        #[arg(long, default_value = "normal")]
        condition: BoundaryCondition,
        /// Directory for kernel eigenvector rasters.
        #[arg(long)]
        export_dir: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write component rasters (mid slices for volumes).
    ExportPlot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out_dir: PathBuf,
        /// Only the first N images.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// List the arrays of an archive.
    Inspect { path: PathBuf },
}

/// Flags mirroring the config file keys; flags win over the file.
#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Read `{split}_images` / `{split}_labels`.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    /// gradient, flow, channel-pair or patch.
    #[arg(long)]
    method: Option<MethodName>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    /// descend or ascend.
    #[arg(long)]
    direction: Option<FlowDirection>,
    #[arg(long)]
    patch_edge: Option<usize>,
    /// big or hodge.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter_factor: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Also write direction-as-hue rasters.
    #[arg(long)]
    hsv: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> mtdl_core::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        cfg.apply_env()?;
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        set!(
            input,
            output,
            s,
            t,
            method,
            direction,
            patch_edge,
            variant,
            tol,
            max_iter_factor,
            workers,
            seed
        );
        if self.split.is_some() {
            cfg.split = self.split.clone();
        }
        if self.threshold.is_some() {
            cfg.threshold = self.threshold;
        }
        cfg.hsv |= self.hsv;
        if cfg.input.as_os_str().is_empty() {
            return Err(mtdl_core::Error::Config("no input archive given".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(report: &serde_json::Value, path: Option<&Path>) -> mtdl_core::Result<()> {
    match path {
        Some(p) => pipeline::write_json(p, report),
        None => {
            println!(
                "{}",
                serde_json::to_string_pretty(report).expect("json value serializes")
            );
            Ok(())
        }
    }
}

fn finish(summary: &RunSummary) -> i32 {
    if !summary.skipped.is_empty() {
        eprintln!(
            "processed {}, skipped {}: {:?}",
            summary.processed,
            summary.skipped.len(),
            summary.skipped
        );
    }
    summary.exit_code()
}

fn run(cli: Cli) -> mtdl_core::Result<i32> {
    match cli.command {
        Command::Decompose { common } => {
            let cfg = common.resolve()?;
            if cfg.output.as_os_str().is_empty() {
                return Err(mtdl_core::Error::Config("no output archive given".into()));
            }
            Ok(finish(&pipeline::run_decompose(&cfg)?))
        }
        Command::Betti { common, k, report } => {
            let cfg = common.resolve()?;
            let (value, summary) = pipeline::run_betti(&cfg, k)?;
            emit(&value, report.as_deref())?;
            Ok(finish(&summary))
        }
        Command::Spectra {
            common,
            k,
            count,
            condition,
            export_dir,
            report,
        } => {
            let cfg = common.resolve()?;
            let req = SpectraRequest {
                degree: k,
                count,
                condition,
                export: export_dir,
            };
            let (value, summary) = pipeline::run_spectra(&cfg, &req)?;
            emit(&value, report.as_deref())?;
            Ok(finish(&summary))
        }
        Command::ExportPlot { common, out_dir, limit } => {
            let cfg = common.resolve()?;
            Ok(finish(&pipeline::run_export_plot(&cfg, &out_dir, limit)?))
        }
        Command::Inspect { path } => {
            let arrays = pipeline::inspect(&path)?;
            emit(&serde_json::to_value(arrays).expect("array info serializes"), None)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
