//! `zgkn` command-line front end.

mod commands;
mod config;
mod envelope;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use zgkn::ZgknError;

/// Worker count of the global thread pool.
pub const WORKERS_ENV: &str = "ZGKN_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(ZgknError),
    /// The run completed but a requested check failed; the artifact was written.
    #[error("check failed: {0}")]
    Check(String),
}

impl From<ZgknError> for CliError {
    fn from(e: ZgknError) -> Self {
        match e {
            ZgknError::InvalidParams(_)
            | ZgknError::InvalidQuantumNumbers(_)
            | ZgknError::NoGap { .. }
            | ZgknError::NonSeparable
            | ZgknError::RingPoint
            | ZgknError::CoincidentPoints => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) | CliError::Check(_) => 3,
        }
    }

    /// Machine-readable detail, including the shooting report where there is one.
    pub fn detail(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Numerical(_) => "numerical",
            CliError::Check(_) => "check",
        };
        let mut v = json!({ "kind": kind, "message": self.to_string(), "exit_code": self.exit_code() });
        if let CliError::Numerical(ZgknError::NoConvergence(report)) = self {
            v["shooting_report"] = serde_json::to_value(report.as_ref()).unwrap_or_default();
        }
        if let CliError::Numerical(ZgknError::QuadratureDivergence(msg)) = self {
            v["quadrature_divergence"] = json!(msg);
        }
        v
    }
}

#[derive(Debug, Parser)]
#[command(name = "zgkn", version, about = "Dirac equation on the zero-gravity Kerr-Newman spacetime")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the result envelope as JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the result envelope to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the loaded and merged configuration as TOML, then exit.
    #[arg(long, global = true)]
    pub save_config: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ParamFlags {
    /// Ring radius (units ħ/mc).
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Coupling QQ′; negative is attractive on the r > 0 sheet.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub q_prime: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub current: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate eigenvalues by winding number.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        kappa_list: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        branches: Option<Vec<i32>>,
        /// `lo,hi` strictly inside (−m, m).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        window: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        winding_range: Option<Vec<i64>>,
        /// Energy tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve the angular equation alone.
    Angular {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        am: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        ae: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        n: Option<i32>,
        /// Dense cross-check nodes per component; 0 skips it.
        #[arg(long)]
        dense: Option<usize>,
    },
    /// Solve one level; the envelope is a state file for `trajectory`.
    State {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long, allow_hyphen_values = true)]
        kappa: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        n: Option<i32>,
        #[arg(long)]
        level: Option<i32>,
        /// `r_min,r_max,count` of the CSV grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        r: Option<Vec<f64>>,
        #[arg(long)]
        n_theta: Option<usize>,
        /// Cayley–Klein parameters and frames on the grid.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Integrate a Bohmian worldline in a saved state.
    Trajectory {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        state_file: PathBuf,
        /// `t,r,theta,phi`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q0: Option<Vec<f64>>,
        /// Coordinate-time span.
        #[arg(long, alias = "t-span")]
        tau_span: Option<f64>,
        /// Number of emitted steps.
        #[arg(long)]
        cadence: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Excised interaction integrals for a point charge.
    Interaction {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamFlags,
        /// `xi,eta,phi[,sheet]` with xi = r/|a|, eta = cos(theta), sheet = ±1.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        qpt: Option<Vec<f64>>,
        /// Excision radii in units of |a|, decreasing.
        #[arg(long, value_delimiter = ',')]
        eps_ladder: Option<Vec<f64>>,
        #[arg(long)]
        order: Option<usize>,
        /// Exit 3 unless both extrapolants match the closed forms to 1%.
        #[arg(long)]
        target_check: bool,
    },
    /// Ring fields on a (xi, eta) grid as CSV.
    Fields {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xi: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eta: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the acceptance suite and print a pass/fail table.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Refuse to run if this state file's hash does not match its config.
        #[arg(long)]
        state_file: Option<PathBuf>,
    },
}

fn init_workers() -> Result<(), CliError> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().map_err(|_| CliError::Config(format!("{WORKERS_ENV}={v} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("{WORKERS_ENV}: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_out = commands::wants_json(&cli.command);
    let result = init_workers().and_then(|()| commands::run(cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json_out && !matches!(e, CliError::Check(_)) {
                println!("{}", serde_json::to_string_pretty(&json!({ "error": e.detail() })).unwrap_or_default());
            }
            eprintln!("zgkn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
