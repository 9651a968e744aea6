use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dpt_core::io::field_to_json;
use dpt_core::suite::{all_passed, emit_report, job_field, parse_config, parse_reports, run_suite, ReportFormat, SuiteConfig};
use log::{info, warn};

/// Checks for divergence-free positive symmetric tensor fields.
#[derive(Parser)]
#[command(name = "dpt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Suite configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long)]
    format: Option<ReportFormat>,
    /// Seed for jobs that do not set their own.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent jobs.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build fields and report their divergence.
    Construct {
        #[command(flatten)]
        common: Common,
        /// Also write each constructed field as JSON into this directory.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Check the determinant inequalities.
    Verify(Common),
    /// Run the transport-based prover.
    Prove(Common),
    /// Euler and related fluid bounds.
    Fluid(Common),
    /// Kinetic bounds and identities.
    Kinetic(Common),
    /// Homogenization checks.
    Homog(Common),
    /// Run every job of a suite, or convert an existing JSON report.
    Report {
        #[command(flatten)]
        common: Common,
        /// JSON report to convert instead of running a suite.
        #[arg(long, conflicts_with = "config")]
        input: Option<PathBuf>,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(common: &Common, module: Option<&str>) -> anyhow::Result<SuiteConfig> {
    let Some(path) = &common.config else {
        bail!("--config is required");
    };
    let mut config = parse_config(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(m) = module {
        let total = config.jobs.len();
        config.jobs.retain(|j| j.module == m);
        if config.jobs.is_empty() && total > 0 {
            bail!("{} has no `{m}` jobs", path.display());
        }
        if config.jobs.len() < total {
            warn!("skipping {} jobs of other modules", total - config.jobs.len());
        }
    }
    Ok(config)
}

fn write_output(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(common: &Common, config: SuiteConfig) -> anyhow::Result<bool> {
    let threads = common.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    info!("running {} jobs", config.jobs.len());
    let reports = pool.install(|| run_suite(&config));
    for r in &reports {
        info!("{}: lhs {:e}, rhs {:e}, pass {}", r.name, r.lhs, r.rhs, r.pass);
    }
    let format = common.format.or(config.format).unwrap_or_default();
    let out = common.out.clone().or(config.output.as_ref().map(PathBuf::from));
    write_output(&emit_report(&reports, format), out.as_deref())?;
    Ok(all_passed(&reports))
}

fn dump_fields(config: &SuiteConfig, dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, job) in config.jobs.iter().enumerate() {
        if let Some(field) = job_field(job) {
            let field = field.with_context(|| format!("building the field of job {i}"))?;
            let name = job.name.clone().unwrap_or_else(|| format!("job{i}_{}", field.tag));
            // job names come from the config; keep them inside `dir`
            let name: String = name
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
            std::fs::write(dir.join(format!("{name}.json")), field_to_json(&field))?;
        }
    }
    Ok(())
}

fn main_inner(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Construct { common, dump } => {
            let config = load(&common, Some("construct"))?;
            if let Some(dir) = dump {
                dump_fields(&config, &dir)?;
            }
            run(&common, config)
        }
        Command::Verify(c) => run(&c, load(&c, Some("verify"))?),
        Command::Prove(c) => run(&c, load(&c, Some("prove"))?),
        Command::Fluid(c) => run(&c, load(&c, Some("fluid"))?),
        Command::Kinetic(c) => run(&c, load(&c, Some("kinetic"))?),
        Command::Homog(c) => run(&c, load(&c, Some("homog"))?),
        Command::Report {
            common,
            input: Some(input),
        } => {
            let reports = parse_reports(&read(&input)?).with_context(|| format!("in {}", input.display()))?;
            let format = common.format.unwrap_or(ReportFormat::Csv);
            write_output(&emit_report(&reports, format), common.out.as_deref())?;
            Ok(all_passed(&reports))
        }
        Command::Report { common, input: None } => run(&common, load(&common, None)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DPT_LOG", "warn")).init();
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
