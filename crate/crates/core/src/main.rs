use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use liftwing::harness::output::{write_feedforward, write_summary, write_trace};
use liftwing::harness::{check_feasibility, condition_matrix, feedforward_table, HarnessError};
use liftwing::{run_experiment, Condition, ExperimentConfig};

#[derive(Parser)]
#[command(name = "liftwing", version, about = "Flatness-based tracking for a lifting-wing quadcopter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the flatness feedforward along the trajectory (no simulation).
    Flat(Opts),
    /// Run one closed-loop simulation and write its trace.
    Sim(Opts),
    /// Run all four controller conditions and the rate-feedforward ablation.
    Compare(Opts),
    /// Check the feedforward against the actuator limits.
    Check(Opts),
}

#[derive(Args)]
struct Opts {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated duration, s.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    condition: Option<Condition>,
}

impl Opts {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(dir) = &self.out {
            cfg.output_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(duration) = self.duration {
            cfg.duration = duration;
        }
        if let Some(c) = self.condition {
            cfg = cfg.with_condition(c);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Flat(opts) => {
            let cfg = opts.load()?;
            let rows = feedforward_table(&cfg);
            write_feedforward(create(&cfg.output_dir, "feedforward.csv")?, &rows)?;
            println!("wrote {} rows to {}", rows.len(), cfg.output_dir.join("feedforward.csv").display());
        }
        Command::Sim(opts) => {
            let cfg = opts.load()?;
            let result = run_experiment(&cfg)?;
            let name = format!("trace_{}.csv", result.condition);
            write_trace(create(&cfg.output_dir, &name)?, &result.rows)?;
            println!("condition {}  rmse {:.6} m  peak {:.6} m", result.condition, result.rmse, result.peak_error());
            println!("wrote {}", cfg.output_dir.join(name).display());
        }
        Command::Compare(opts) => {
            let cfg = opts.load()?;
            let matrix = condition_matrix(&cfg)?;
            println!("{:<10} {:>12} {:>12}", "condition", "rmse [m]", "peak [m]");
            for cell in &matrix.cells {
                match &cell.result {
                    Ok(r) => {
                        println!("{:<10} {:>12.6} {:>12.6}", cell.condition.name(), r.rmse, r.peak_error());
                        let name = format!("trace_{}.csv", cell.condition);
                        write_trace(create(&cfg.output_dir, &name)?, &r.rows)?;
                    }
                    Err(e) => println!("{:<10} {e}", cell.condition.name()),
                }
            }
            for (dfaf, df) in [(Condition::PidDfaf, Condition::PidDf), (Condition::PdDfaf, Condition::PdDf)] {
                if let (Some(a), Some(b)) = (matrix.rmse(dfaf), matrix.rmse(df)) {
                    println!("ratio {dfaf}/{df} = {:.3}", a / b);
                }
            }
            match &matrix.ablation {
                Ok(a) => println!(
                    "rate feedforward ablation (t <= {:.2} s): peak {:.4} m on, {:.4} m off ({:.1}x){}",
                    a.window_end,
                    a.baseline_peak,
                    a.ablated_peak,
                    a.ratio(),
                    match (a.diverged, a.deviation_speed) {
                        (true, Some(v)) => format!(", diverged at {v:.2} m/s"),
                        (false, Some(v)) => format!(", deviates at {v:.2} m/s"),
                        _ => String::new(),
                    }
                ),
                Err(e) => println!("rate feedforward ablation: {e}"),
            }
            write_summary(create(&cfg.output_dir, "summary.csv")?, &matrix)?;
            println!("wrote {}", cfg.output_dir.join("summary.csv").display());
        }
        Command::Check(opts) => {
            let cfg = opts.load()?;
            let report = check_feasibility(&cfg);
            let lim = cfg.controller.limits;
            println!("max |f_z| {:.4} N (limit {:.4})", report.max_thrust, lim.max_thrust);
            println!("max |w_i| {:.4} rad/s (limit {:.4})", report.max_rate, lim.max_rate);
            if let Some(t) = report.first_violation {
                println!("infeasible: first violation at t = {t:.3} s");
                return Ok(ExitCode::from(1));
            }
            println!("feasible");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                HarnessError::Config(_) => 2,
                HarnessError::Divergence { .. } => 3,
                _ => 1,
            })
        }
    }
}
