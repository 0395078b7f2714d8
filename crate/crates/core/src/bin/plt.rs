use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plt_core::config::Config;
use plt_core::experiments::{run, OutputKind, RunSettings, Scenario};

/// Spectra, phase space and wave-packet dynamics in a parabolic optical lattice.
#[derive(Parser)]
#[command(name = "plt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, classification and pairs; eigenvector tables.
    Spectrum(Common),
    /// Separatrix and phase-portrait contours of the pendulum.
    Pendulum(Common),
    /// Husimi distributions of selected eigenstates.
    Husimi(HusimiArgs),
    /// Wave-packet propagation with real- and quasimomentum-space densities.
    Evolve(Common),
    /// Propagation plus tunneling-time and momentum-inversion analysis.
    Tunneling(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Built-in scenario (fig1 ... fig9); defaults to the config's own block.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct HusimiArgs {
    #[command(flatten)]
    common: Common,
    /// Eigenstate indices, comma separated.
    #[arg(long, value_delimiter = ',')]
    states: Vec<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, common, states) = match cli.command {
        Command::Spectrum(c) => (OutputKind::Spectrum, c, vec![]),
        Command::Pendulum(c) => (OutputKind::Pendulum, c, vec![]),
        Command::Husimi(h) => (OutputKind::Husimi, h.common, h.states),
        Command::Evolve(c) => (OutputKind::Evolve, c, vec![]),
        Command::Tunneling(c) => (OutputKind::Tunneling, c, vec![]),
    };
    let result = Config::load(&common.config).and_then(|config| {
        let mut scenario = Scenario::from_config(&config, common.scenario.as_deref())?;
        if !states.is_empty() {
            scenario.states = states;
        }
        let settings = RunSettings::from_config(&config);
        run(&[kind], &scenario, &settings, &common.out)
    });
    match result {
        Ok(manifest) => {
            for f in &manifest.files {
                log::info!("wrote {}", common.out.join(&f.name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("plt: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
