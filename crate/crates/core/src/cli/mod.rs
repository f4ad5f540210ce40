//! Batch driver: config ingestion, staged FRC runs and dataset export.

mod config;
mod dataset;
mod run;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{Builder, Config, Stage, SystemFiles, SystemSource, TorusStage, VerifyStage, CONFIG_VERSION};
pub use dataset::{BranchInfo, Format, FrcDataset, Metadata, Row, SeedRef, Stability, Timings, Tolerances};
pub use run::{run_frc, Session, VerifyRecord};

use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "ssm", version, about = "SSM-reduced forced response curves of mechanical systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// JSON run config; Example 1 defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Restrict `all` to one stage (equilibrium, po, torus2).
    #[arg(long, global = true)]
    pub stage: Option<String>,
    #[arg(long, global = true)]
    pub order: Option<u32>,
    /// `A:B`
    #[arg(long = "omega-range", global = true)]
    pub omega_range: Option<String>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value = "csv")]
    pub format: String,
    /// Worker threads; rayon's default when absent.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Eigenvalues up to the highest master mode.
    Eig,
    /// Autonomous SSM and reduced dynamics.
    Reduce,
    /// Equilibria of the reduced dynamics (periodic orbits of the full system).
    FrcEq,
    /// Cycles of the reduced dynamics, seeded at HB points.
    FrcPo,
    /// Tori of the reduced dynamics, seeded at TR points.
    FrcTor,
    /// Lifted trajectories of reduced cycles at the given frequencies.
    Lift {
        #[arg(long, value_delimiter = ',', required = true)]
        omega: Vec<f64>,
    },
    /// Full-system integration near lifted tori (frequencies from `verify.omegas`).
    Verify {
        #[arg(long, value_delimiter = ',')]
        omega: Vec<f64>,
    },
    /// Every stage in the config, then verification when `verify.omegas` is set.
    All,
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Config(format!("omega range '{s}' is not A:B"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

impl GlobalOpts {
    /// The config file (or the Example-1 default) with flag overrides applied.
    pub fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::example1(),
        };
        if let Some(o) = self.order {
            cfg.order = o;
        }
        if let Some(r) = &self.omega_range {
            cfg.omega_range = parse_range(r)?;
        }
        if let Some(e) = self.eps {
            cfg.eps = e;
        }
        if let Some(s) = &self.stage {
            cfg.stages = vec![Stage::parse(s)?];
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct EigenRecord {
    index: usize,
    re: f64,
    im: f64,
    /// `|lambda|`
    frequency: f64,
    damping_ratio: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<PathBuf> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(path.to_path_buf())
}

fn write_lifted(path: &Path, outputs: &[usize], lifted: &[(crate::po::PoSolution, crate::lift::PhysicalTorus)]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["Omega".to_string(), "traj".into(), "t".into()];
    head.extend(outputs.iter().map(|d| format!("x_{d}")));
    w.write_record(&head)?;
    for (po, tor) in lifted {
        for (k, tr) in tor.trajectories.iter().enumerate() {
            for (t, z) in tr.t.iter().zip(&tr.z) {
                let mut rec = vec![po.params[0].to_string(), k.to_string(), t.to_string()];
                rec.extend(outputs.iter().map(|&d| z[d].to_string()));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(path.to_path_buf())
}

/// Run one parsed command; returns the files written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    let cfg = cli.opts.config()?;
    let format = Format::parse(&cli.opts.format)?;
    let out = &cli.opts.out;
    std::fs::create_dir_all(out)?;
    let job = || -> Result<Vec<PathBuf>> {
        let mut s = Session::new(cfg.clone())?;
        let stage = |s: &mut Session, st: Stage| -> Result<PathBuf> { s.dataset(st)?.export(out, format) };
        match &cli.command {
            Command::Eig => {
                let sp = s.spectrum()?;
                let recs: Vec<EigenRecord> = sp
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .map(|(index, l)| EigenRecord { index, re: l.re, im: l.im, frequency: l.norm(), damping_ratio: -l.re / l.norm() })
                    .collect();
                Ok(vec![write_json(&out.join("eigenvalues.json"), &recs)?])
            }
            Command::Reduce => {
                let text = s.reduced()?.to_json()?;
                let path = out.join("reduced_model.json");
                std::fs::write(&path, text)?;
                Ok(vec![path])
            }
            Command::FrcEq => Ok(vec![stage(&mut s, Stage::Equilibrium)?]),
            Command::FrcPo => Ok(vec![stage(&mut s, Stage::Po)?]),
            Command::FrcTor => Ok(vec![stage(&mut s, Stage::Torus2)?]),
            Command::Lift { omega } => {
                let lifted = s.lift_cycles(omega)?;
                Ok(vec![write_lifted(&out.join("lifted.csv"), &cfg.outputs, &lifted)?])
            }
            Command::Verify { omega } => {
                if !omega.is_empty() {
                    s.cfg.verify.omegas = omega.clone();
                }
                Ok(vec![write_json(&out.join("verify.json"), &s.verify()?)?])
            }
            Command::All => {
                let mut stages = cfg.stages.clone();
                stages.sort();
                let mut sets = stages.into_iter().map(|st| s.dataset(st)).collect::<Result<Vec<_>>>()?;
                let mut files = Vec::new();
                if !cfg.verify.omegas.is_empty() {
                    files.push(write_json(&out.join("verify.json"), &s.verify()?)?);
                }
                let t = s.timings();
                for d in &mut sets {
                    d.metadata.timings = t.clone();
                    files.push(d.export(out, format)?);
                }
                Ok(files)
            }
        }
    };
    match cli.opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

/// Entry point of the `ssm` binary.
pub fn main_with_args(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(files) => {
            let mut so = std::io::stdout().lock();
            for f in files {
                let _ = writeln!(so, "{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("ssm: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests;
