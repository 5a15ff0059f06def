use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dampwave::config::ExperimentConfig;
use dampwave::presets::list_presets;
use dampwave::runner::{self, Stage};
use dampwave::Error;

/// Damped wave laboratory: resolvent scans, damping certificates and energy
/// decay fits on truncated Fourier models.
///
/// Exit status: 0 all verdicts pass, 1 some verdict fails, 2 invalid
/// configuration, 3 runtime failure (I/O, numerics).
#[derive(Parser)]
#[command(name = "dampwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan, certify and simulate, writing every artifact.
    Run(Common),
    /// Print the preset table.
    ListPresets {
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Resolvent norm scan only.
    Scan(Common),
    /// Ellipticity and boundedness certificates only.
    Certify(Common),
    /// Time evolution and decay fit only.
    Simulate(Common),
    /// Refit existing scan.csv / trajectory.csv without recomputing.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Directory holding the CSVs; defaults to the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Toml,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; omitted sections take preset defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (overrides damping.variant).
    #[arg(long)]
    preset: Option<String>,
    /// Dotted override, e.g. --set geometry.K=256; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (overrides output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum concurrent evaluations.
    #[arg(long)]
    jobs: Option<usize>,
    /// Simulation seed (overrides sim.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut sets = self.sets.clone();
        if let Some(out) = &self.out {
            sets.push(format!("output.directory={}", toml_string(&out.display().to_string())));
        }
        if let Some(seed) = self.seed {
            sets.push(format!("sim.seed={seed}"));
        }
        if self.plots {
            sets.push("output.plots=true".into());
        }
        ExperimentConfig::load(self.config.as_deref(), self.preset.as_deref(), &sets)
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownPreset(_) | Error::Spec(_) => 2,
        _ => 3,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code_for(&e))
}

fn stages(cmd: &Command) -> &'static [Stage] {
    match cmd {
        Command::Scan(_) => &[Stage::Scan],
        Command::Certify(_) => &[Stage::Certify],
        Command::Simulate(_) => &[Stage::Simulate],
        _ => &Stage::ALL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::ListPresets { format } => {
            let table = list_presets();
            match format {
                Format::Toml => {
                    #[derive(serde::Serialize)]
                    struct Doc<'a> {
                        presets: &'a [dampwave::presets::PresetInfo],
                    }
                    print!("{}", toml::to_string(&Doc { presets: &table }).expect("preset table serializes"));
                }
                Format::Table => {
                    for p in &table {
                        println!("{}\n  {}\n  parameters: {}\n  resolvent:  {}\n  decay:      {}\n", p.name, p.description, p.parameters, p.predicted_resolvent, p.predicted_rate);
                    }
                }
            }
            return ExitCode::SUCCESS;
        }
        Command::Run(c) | Command::Scan(c) | Command::Certify(c) | Command::Simulate(c) => c,
        Command::Fit { common, .. } => common,
    };
    let cfg = match common.load() {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(n) = common.jobs {
        if n == 0 {
            return fail(Error::Config("--jobs: must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(Error::Argument(format!("--jobs: {e}")));
        }
    }

    if let Command::Fit { input, .. } = &cli.command {
        let dir = input.clone().unwrap_or_else(|| cfg.output.directory.clone());
        return match runner::refit(&cfg, &dir) {
            Ok(r) => {
                let text = toml::to_string(&r).expect("fit report serializes");
                print!("{text}");
                match runner::write_atomic(&dir, "fit.toml", text.as_bytes()) {
                    Ok(_) => ExitCode::SUCCESS,
                    Err(e) => fail(e),
                }
            }
            Err(e) => fail(e),
        };
    }

    match runner::run(&cfg, stages(&cli.command)) {
        Ok(out) => {
            for (name, v) in &out.manifest.verdicts {
                println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            }
            println!("artifacts in {}", out.directory.display());
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => fail(e),
    }
}
