//! `dgheat`: runs a refinement study (or a regularity probe) and writes a
//! CSV report plus a `<out>.cfg` echo of the resolved configuration.
//!
//! Exit codes: 0 success, 1 a level failed, 2 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dgheat::study::{self, StudyConfig};
use dgheat::Error;

#[derive(Debug, Parser)]
#[command(name = "dgheat", version, about = "cG(1)dG(0) refinement studies for semilinear heat equations")]
struct Args {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem preset (zero, eigen, cubic_mms, allen_cahn_mms, allen_cahn_time, regularity).
    #[arg(long)]
    problem: Option<String>,
    /// Number of rows in the study.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    base_level: Option<usize>,
    /// Exponent in the coupling k <= C h^sigma.
    #[arg(long)]
    sigma: Option<f64>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run the regularity probe instead of a convergence study.
    #[arg(long)]
    probe: bool,
    /// Any other configuration key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn collect_pairs(args: &Args) -> Result<Vec<(String, String)>, Error> {
    let mut pairs = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            StudyConfig::parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    let mut push = |k: &str, v: String| pairs.push((k.to_string(), v));
    if let Some(p) = &args.problem {
        push("problem", p.clone());
    }
    if let Some(v) = args.levels {
        push("levels", v.to_string());
    }
    if let Some(v) = args.base_level {
        push("base_level", v.to_string());
    }
    if let Some(v) = args.sigma {
        push("sigma", v.to_string());
    }
    if let Some(v) = &args.out {
        push("out", v.display().to_string());
    }
    if let Some(v) = args.seed {
        push("seed", v.to_string());
    }
    if args.probe {
        push("probe", "true".into());
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        push(k.trim(), v.trim().to_string());
    }
    Ok(pairs)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match collect_pairs(&args).and_then(|p| StudyConfig::from_pairs(&p)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dgheat: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = if cfg.probe {
        study::run_probe(&cfg).map(|r| (r.to_csv(), r.failed()))
    } else {
        study::run_convergence_study(&cfg).map(|r| (r.to_csv(), r.failed()))
    };
    let (csv, failed) = match outcome {
        Ok(o) => o,
        Err(e) => {
            eprintln!("dgheat: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = study::write_outputs(&cfg, &csv) {
        eprintln!("dgheat: {e}");
        return ExitCode::from(1);
    }
    print!("{csv}");
    eprintln!("wrote {} and {}", cfg.out.display(), cfg.echo_path().display());
    if failed {
        eprintln!("dgheat: at least one level failed; see the NaN row");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
