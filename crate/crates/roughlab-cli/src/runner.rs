use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use crate::experiments::{run_experiment, Outcome};
use crate::output::{to_json17, write_file};
use crate::scenario::Scenario;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_SKIPPED: u8 = 2;

/// The report as written to `report.json`: deterministic, no timing fields.
pub fn report_value(s: &Scenario, outcome: &Outcome) -> Value {
    json!({
        "scenario": s.name,
        "experiment": s.experiment.kind(),
        "config_hash": s.hash(),
        "seed": s.seed,
        "status": if outcome.skipped.is_some() { "skipped" } else { "ok" },
        "skip_reason": outcome.skipped,
        "result": outcome.result,
    })
}

pub struct RunArgs {
    pub out: Option<PathBuf>,
    pub out_root: PathBuf,
    pub force: bool,
    pub threads: Option<usize>,
    pub mesh_refine: u32,
}

/// Output directory: `--out`, else the scenario's `output`, else `<root>/<name>`.
pub fn output_dir(s: &Scenario, args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| s.output.clone())
        .unwrap_or_else(|| args.out_root.join(&s.name))
}

fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = std::fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if occupied && !force {
            bail!("output directory {} is not empty; pass --force to overwrite", dir.display());
        }
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Runs `s` and writes report, tables and manifest. Returns the exit code.
pub fn run(s: &Scenario, args: &RunArgs) -> Result<u8> {
    let dir = output_dir(s, args);
    prepare_dir(&dir, args.force)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let threads = args.threads.or(s.threads);
    let outcome = run_experiment(s, threads)?;
    let wall = clock.elapsed().as_secs_f64();

    let mut files = vec!["report.json".to_string()];
    write_file(&dir, "report.json", &to_json17(&report_value(s, &outcome))?)?;
    for t in &outcome.tables {
        let name = format!("{}.csv", t.name);
        write_file(&dir, &name, &t.to_csv()?)?;
        files.push(name);
    }
    for (name, contents) in &outcome.files {
        write_file(&dir, name, contents)?;
        files.push(name.clone());
    }
    let code = if outcome.skipped.is_some() { EXIT_SKIPPED } else { EXIT_OK };
    files.push("manifest.json".into());
    let manifest = json!({
        "scenario": s.name,
        "experiment": s.experiment.kind(),
        "config_hash": s.hash(),
        "canonical_config": s.canonical(),
        "seed": s.seed,
        "threads": threads,
        "mesh_refine": args.mesh_refine,
        "versions": {
            "roughlab": roughlab::VERSION,
            "roughlab-cli": env!("CARGO_PKG_VERSION"),
        },
        "status": if outcome.skipped.is_some() { "skipped" } else { "ok" },
        "exit_code": code,
        "files": files,
        "started_unix": started,
        "wall_time_seconds": wall,
    });
    write_file(&dir, "manifest.json", &to_json17(&manifest)?)?;
    match &outcome.skipped {
        Some(reason) => eprintln!("{}: skipped: {}", s.name, reason),
        None => eprintln!("{}: done in {:.2} s, wrote {}", s.name, wall, dir.display()),
    }
    Ok(code)
}
