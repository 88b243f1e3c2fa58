use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geofence_decisions::run::{cmd_preprocess, cmd_simulate, cmd_sweep, cmd_synth, RunConfig, RunError};
use geofence_decisions::synth::{SynthKind, SynthSpec};

#[derive(Parser)]
#[command(name = "geofence", version, about = "Geofence activation from sparse location measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split raw `user_id,t,lat,lon` fixes into local-frame segment files.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic raw-fix corpus.
    Synth {
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Comma-separated: constant-velocity, turning, stop-and-go.
        #[arg(long, default_value = "constant-velocity,turning")]
        kinds: String,
        #[arg(long, default_value_t = 1200.0)]
        duration: f64,
        #[arg(long, default_value_t = 5.0)]
        tau: f64,
        #[arg(long, default_value_t = 3.0)]
        jitter: f64,
        #[arg(long, default_value_t = 10.0)]
        speed_min: f64,
        #[arg(long, default_value_t = 30.0)]
        speed_max: f64,
        /// Degrees counter-clockwise from east; random per track if omitted.
        #[arg(long)]
        heading: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Decision trace for one segment file against one fence.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        /// Fence center `x,y` in the segment's local frame.
        #[arg(long)]
        fence_center: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// One-parameter sweeps over a directory (or list) of segment files.
    Sweep {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        /// Comma-separated subset of lambda, epsilon, cell_size, lookback, sigma_m.
        #[arg(long)]
        sweep: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    cell_size: Option<f64>,
    #[arg(long)]
    lookback: Option<f64>,
    #[arg(long)]
    sigma_m: Option<f64>,
    /// advertising or alert-zone
    #[arg(long)]
    payoff: Option<String>,
    /// zero or linear
    #[arg(long)]
    mean_mode: Option<String>,
    /// pw, gp or gp+meanfunc
    #[arg(long)]
    method: Option<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig, RunError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags: [(&str, Option<String>); 11] = [
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("workers", self.workers.map(|v| v.to_string())),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("cell_size", self.cell_size.map(|v| v.to_string())),
            ("lookback", self.lookback.map(|v| v.to_string())),
            ("sigma_m", self.sigma_m.map(|v| v.to_string())),
            ("payoff", self.payoff.clone()),
            ("mean_mode", self.mean_mode.clone()),
            ("method", self.method.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, &v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Preprocess { input, common } => {
            let cfg = common.config()?;
            let report = cmd_preprocess(&input, &cfg.out, &cfg)?;
            println!("{} segments from {} users", report.total_segments, report.users.len());
        }
        Command::Synth { count, kinds, duration, tau, jitter, speed_min, speed_max, heading, common } => {
            let cfg = common.config()?;
            let kinds = kinds.split(',').map(|k| k.trim().parse::<SynthKind>()).collect::<Result<Vec<_>, _>>()?;
            let spec = SynthSpec {
                kinds,
                count,
                speed: (speed_min, speed_max),
                heading_deg: heading,
                duration,
                tau,
                jitter,
                seed: cfg.seed,
                ..SynthSpec::default()
            };
            let path = cmd_synth(&spec, &cfg.out, &cfg)?;
            println!("{}", path.display());
        }
        Command::Simulate { input, fence_center, common } => {
            let mut cfg = common.config()?;
            if let Some(c) = fence_center {
                cfg.set("fence_center", &c)?;
            }
            let rows = cmd_simulate(&input, &cfg)?;
            let v: f64 = rows.iter().map(|r| r.value).sum();
            println!("{} measurements, V = {v}", rows.len());
        }
        Command::Sweep { input, sweep, common } => {
            let mut cfg = common.config()?;
            cfg.inputs = input;
            if let Some(s) = sweep {
                cfg.set("sweep", &s)?;
            }
            for param in cmd_sweep(&cfg)?.keys() {
                println!("{}", cfg.out.join(format!("sweep_{}.csv", param.name())).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
