//! `jcsim`: Monte Carlo sweeps for MUSIC-based OFDM sensing and CSI enhancement.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use jcsim_core::config::{Metric, SimConfig};
use jcsim_core::emit::{write_plot_script, write_run_record, write_spectrum_csv, write_table};
use jcsim_core::par::Execution;
use jcsim_core::pipeline::sensing_frame;
use jcsim_core::rng::noise_rng;
use jcsim_core::spectrum::{spectrum_snapshot, Axis};
use jcsim_core::sweep::{self, RunHeader};
use jcsim_core::table::{ResultRow, ResultTable};

#[derive(Parser)]
#[command(name = "jcsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// AoA, range, velocity and location MSE against sensing SINR.
    SweepMse {
        #[command(flatten)]
        common: Common,
        /// Restrict the metrics (comma separated).
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<Metric>>,
    },
    /// BER of the four CSI cases against communication SINR.
    SweepBer {
        #[command(flatten)]
        common: Common,
    },
    /// Normalized range and velocity spectra of one frame, with PSLRs.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form Cramér-Rao bounds over the sensing grid.
    Crb {
        #[command(flatten)]
        common: Common,
    },
    /// Perturbation-theory MSEs against simulation on a fixed scenario.
    ValidateTheory {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration (schema "jcsim/v1"); built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Use c = 3e8 m/s.
    #[arg(long)]
    legacy_c: bool,
}

impl Common {
    fn load(&self) -> Result<SimConfig> {
        let mut cfg = match &self.config {
            Some(path) => SimConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => SimConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.sweep.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.sweep.trials = trials;
        }
        cfg.legacy_c |= self.legacy_c;
        cfg.validate()?;
        Ok(cfg)
    }

    fn prepare(&self, command: &str) -> Result<SimConfig> {
        let cfg = self.load()?;
        self.start(command, &cfg)?;
        Ok(cfg)
    }

    /// Prints the run header and writes `run.json` and `plot.py`.
    fn start(&self, command: &str, cfg: &SimConfig) -> Result<()> {
        let sys = cfg.system()?;
        let header = RunHeader::new(&sys, cfg.sweep.seed, cfg.sweep.trials);
        println!("{header}");
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        write_run_record(&self.out, command, &header, cfg)?;
        write_plot_script(&self.out)?;
        Ok(())
    }
}

fn report(out: &std::path::Path, stem: &str, table: &ResultTable, started: Instant) -> Result<()> {
    let path = write_table(out, stem, table)?;
    println!("{} rows -> {} ({:.1} s)", table.len(), path.display(), started.elapsed().as_secs_f64());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let exec = Execution::default();
    let started = Instant::now();
    match cli.command {
        Command::SweepMse { common, metrics } => {
            let mut cfg = common.load()?;
            if let Some(m) = metrics {
                if m.is_empty() {
                    bail!("no metric selected; available: {}", Metric::available());
                }
                cfg.sweep.metrics = m;
            }
            common.start("sweep-mse", &cfg)?;
            let table = sweep::sweep_mse(&cfg, exec)?;
            report(&common.out, "mse", &table, started)
        }
        Command::SweepBer { common } => {
            let cfg = common.prepare("sweep-ber")?;
            let table = sweep::sweep_ber(&cfg, exec)?;
            report(&common.out, "ber", &table, started)
        }
        Command::Spectrum { common } => {
            let cfg = common.prepare("spectrum")?;
            let sys = cfg.system()?;
            let sp = &cfg.spectrum;
            let (scenario, fading) = sweep::trial_scenario(&sys, cfg.sweep.seed, sp.scenario_trial)?;
            let mut rng = noise_rng(cfg.sweep.seed, 0, sp.scenario_trial);
            let frame = sensing_frame(&sys, scenario, &fading, sp.sinr_db, Some(sys.waveform.qam_order), &mut rng)?;
            let snap = spectrum_snapshot(&sys, &frame, sp.oversample, sp.fft_pad)?;
            let path = common.out.join("spectrum.csv");
            write_spectrum_csv(&snap, std::fs::File::create(&path)?)?;
            println!("spectrum -> {}", path.display());
            let mut table = ResultTable::new();
            for cut in &snap.cuts {
                let axis = match cut.axis {
                    Axis::Range => "range",
                    Axis::Velocity => "velocity",
                };
                println!("PSLR {} {axis}: {:.2} dB", cut.estimator, cut.pslr_db);
                table.push(ResultRow {
                    sinr_db: sp.sinr_db,
                    metric: Metric::Pslr,
                    series: format!("{}_{axis}", cut.estimator),
                    value: cut.pslr_db,
                    ci: 0.0,
                    trials: 1,
                    seed: cfg.sweep.seed,
                });
            }
            report(&common.out, "pslr", &table, started)
        }
        Command::Crb { common } => {
            let cfg = common.prepare("crb")?;
            let table = sweep::crb_table(&cfg)?;
            report(&common.out, "crb", &table, started)
        }
        Command::ValidateTheory { common } => {
            let cfg = common.prepare("validate-theory")?;
            let table = sweep::validate_theory(&cfg, exec)?;
            for metric in [Metric::RangeMse, Metric::VelocityMse] {
                for &s in &cfg.theory.sinr_db {
                    if let (Some(sim), Some(th)) = (table.get(s, metric, "music"), table.get(s, metric, "theory")) {
                        println!(
                            "{metric} at {s} dB: simulated {:.3e}, theory {:.3e} ({:+.2} dB)",
                            sim.value,
                            th.value,
                            10.0 * (th.value / sim.value).log10()
                        );
                    }
                }
            }
            report(&common.out, "theory", &table, started)
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
