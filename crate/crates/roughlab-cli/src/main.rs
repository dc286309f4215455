//! `roughlab`: runs experiment scenarios and checks them against golden reports.

mod experiments;
mod output;
mod runner;
mod scenario;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use roughlab::presets::list_presets;
use runner::{RunArgs, EXIT_ERROR, EXIT_OK};
use scenario::Scenario;
use verify::Status;

#[derive(Parser)]
#[command(name = "roughlab", version, about = "Rough SDE and robust filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write report.json, CSV tables and manifest.json.
    Run {
        scenario: PathBuf,
        /// Replaces the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory for this run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory under which `<scenario name>/` is created when --out is absent.
        #[arg(long, env = "ROUGHLAB_OUT", default_value = "roughlab-out")]
        out_root: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
        /// Halve every mesh of the scenario N times.
        #[arg(long, value_name = "N", default_value_t = 0)]
        mesh_refine: u32,
    },
    /// List the bundled model presets and their parameters.
    ListPresets {
        #[arg(long)]
        json: bool,
    },
    /// Re-run every scenario in DIR and diff against the golden reports.
    Verify {
        dir: PathBuf,
        /// Golden report directory [default: DIR/golden].
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Write goldens for scenarios that have none.
        #[arg(long)]
        bless: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Print the diff report as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            threads,
            out,
            out_root,
            force,
            mesh_refine,
        } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            s.refine(mesh_refine);
            let args = RunArgs {
                out,
                out_root,
                force,
                threads,
                mesh_refine,
            };
            runner::run(&s, &args)
        }
        Command::ListPresets { json } => {
            if json {
                println!("{}", output::to_json17(list_presets())?);
            } else {
                for p in list_presets() {
                    let params: Vec<String> = p.params.iter().map(|(k, v)| format!("{}={}", k, v)).collect();
                    println!("{:<32} {:<7} {}", p.name, format!("{:?}", p.kind).to_lowercase(), params.join(" "));
                    println!("{:<32} {}", "", p.description);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Verify {
            dir,
            golden,
            bless,
            threads,
            json,
        } => {
            let golden = golden.unwrap_or_else(|| dir.join("golden"));
            let entries = verify::verify(&dir, &golden, bless, threads)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&entries)?);
            } else {
                for e in &entries {
                    let tag = match e.status {
                        Status::Match => "ok",
                        Status::Diff => "DIFF",
                        Status::New => "new",
                        Status::Error => "ERROR",
                    };
                    println!("{:<6} {}", tag, e.scenario);
                    for d in &e.diffs {
                        println!("         {}", d);
                    }
                }
                if entries.is_empty() {
                    println!("no scenarios in {}", dir.display());
                }
            }
            let failed = entries.iter().any(|e| matches!(e.status, Status::Diff | Status::Error));
            Ok(if failed { EXIT_ERROR } else { EXIT_OK })
        }
    }
}
