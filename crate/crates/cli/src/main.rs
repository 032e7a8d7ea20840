use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latticetomo_cli::config::{HUSIMI_DEFAULT, WIGNER_DEFAULT};
use latticetomo_cli::sweep::{sweep_configs, write_sweep};
use latticetomo_cli::{
    compare, emit, load_bundle, parse_config, run, write_cross_sections, NoiseMode, RunConfig, RunError,
};

#[derive(Parser)]
#[command(name = "latticetomo", version, about = "Phase-space tomography simulations for atoms in an optical lattice")]
struct Cli {
    /// Worker threads for the scan (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment per config file and write its result files.
    Run {
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Output directory; defaults to `output.dir` of the config, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed of every config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<NoiseMode>,
    },
    /// Check emitted bundles against direct evaluation of the prepared state.
    Compare {
        /// Bundle directories (`<out>/<run_id>`).
        #[arg(long = "bundle")]
        bundles: Vec<PathBuf>,
        /// Locate bundles by config run id under `--out`.
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write one config per value of a key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key, e.g. `preparation.contamination`.
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Print (or write) the Husimi and Wigner default configs.
    ShowDefaults {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(RunError::io(path))?;
    parse_config(&text).map_err(|mut e| {
        e.message = format!("{}: {}", path.display(), e.message);
        RunError::Config(e)
    })
}

fn execute(cli: Cli) -> Result<bool, RunError> {
    match cli.command {
        Command::Run { configs, out, seed, mode } => {
            let mut parsed = Vec::new();
            for path in &configs {
                let mut c = read_config(path)?;
                if let Some(s) = seed {
                    c.seed = s;
                }
                if let Some(m) = mode {
                    c.noise.mode = m;
                }
                parsed.push(c);
            }
            let out = out.or_else(|| parsed[0].output.dir.clone().map(PathBuf::from)).unwrap_or_else(|| "out".into());
            let mut bundles = Vec::new();
            for c in &parsed {
                let bundle = run(c)?;
                let files = emit(&bundle, &out)?;
                println!("{}: {} points -> {}", c.run_id, bundle.samples.len(), files[0].parent().unwrap().display());
                for w in &bundle.warnings {
                    eprintln!("warning [{}]: {w}", c.run_id);
                }
                bundles.push(bundle);
            }
            let cuts = out.join("cross_sections.csv");
            write_cross_sections(&bundles.iter().collect::<Vec<_>>(), &cuts)?;
            Ok(true)
        }
        Command::Compare { mut bundles, configs, out } => {
            for path in &configs {
                bundles.push(out.join(read_config(path)?.run_id));
            }
            let mut all = true;
            for dir in &bundles {
                let report = compare(&load_bundle(dir)?)?;
                all &= report.passed;
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            }
            Ok(all)
        }
        Command::Sweep { config, key, values, out } => {
            let text = std::fs::read_to_string(&config).map_err(RunError::io(&config))?;
            let configs = sweep_configs(&text, &key, &values)?;
            for p in write_sweep(&configs, &out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::ShowDefaults { out: None } => {
            println!("{HUSIMI_DEFAULT}\n# ---\n\n{WIGNER_DEFAULT}");
            Ok(true)
        }
        Command::ShowDefaults { out: Some(dir) } => {
            std::fs::create_dir_all(&dir).map_err(RunError::io(&dir))?;
            for (name, text) in [("husimi.toml", HUSIMI_DEFAULT), ("wigner.toml", WIGNER_DEFAULT)] {
                let path = dir.join(name);
                std::fs::write(&path, text).map_err(RunError::io(&path))?;
                println!("{}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(2);
    }
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        // compare found deviations beyond tolerance
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
