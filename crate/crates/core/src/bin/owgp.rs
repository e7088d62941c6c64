use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use owgp::cli::{batch_exit_code, emit_trace, exit_code, load_rules, run_batch, summary_table, Scenario};

/// Plans and executes belief-space goals in a simulated tabletop world.
#[derive(Parser, Debug)]
#[command(name = "owgp", version)]
struct Args {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Half-open seed range, e.g. `0..50`.
    #[arg(long, value_parser = parse_range)]
    seeds: Option<Range<u64>>,
    /// Trace output; with several seeds `{seed}` in the path is replaced,
    /// or the seed is appended to the file stem.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Print a per-seed status table.
    #[arg(long)]
    summary: bool,
    #[arg(long)]
    max_primitives: Option<usize>,
    #[arg(long)]
    max_replans: Option<usize>,
    /// Rule-library file overriding the scenario's rule parameters.
    #[arg(long)]
    rules: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a range like 0..50")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
    if b <= a {
        return Err("empty seed range".into());
    }
    Ok(a..b)
}

fn trace_path(template: &Path, seed: u64, many: bool) -> PathBuf {
    let s = template.to_string_lossy();
    if s.contains("{seed}") {
        return PathBuf::from(s.replace("{seed}", &seed.to_string()));
    }
    if !many {
        return template.to_path_buf();
    }
    let stem = template.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match template.extension() {
        Some(ext) => format!("{stem}-{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{seed}"),
    };
    template.with_file_name(name)
}

fn run(args: Args) -> Result<i32> {
    let mut scenario =
        Scenario::load(&args.scenario).with_context(|| format!("loading {}", args.scenario.display()))?;
    if let Some(p) = &args.rules {
        scenario.rules = load_rules(p).with_context(|| format!("loading rules {}", p.display()))?;
    }
    if let Some(n) = args.max_primitives {
        scenario.limits.max_primitives = n;
    }
    if let Some(n) = args.max_replans {
        scenario.limits.max_replans = n;
    }
    let seeds = match (args.seed, args.seeds) {
        (Some(s), None) => s..s + 1,
        (None, Some(r)) => r,
        (None, None) => 0..1,
        (Some(_), Some(_)) => bail!("--seed and --seeds are exclusive"),
    };
    let many = seeds.end - seeds.start > 1;
    let mut write_err = None;
    let reports = run_batch(&scenario, seeds, |seed, outcome| {
        log::info!("seed {seed}: {:?} after {} primitives", outcome.status, outcome.primitives);
        if let Some(t) = &args.trace {
            let path = trace_path(t, seed, many);
            if let Err(e) = emit_trace(&outcome.trace, &path) {
                write_err.get_or_insert(anyhow::Error::new(e).context(format!("writing {}", path.display())));
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    if args.summary {
        print!("{}", summary_table(&reports));
    }
    Ok(if many {
        batch_exit_code(reports.iter().map(|r| r.status))
    } else {
        exit_code(reports[0].status)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("OWGP_LOG")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 64 } else { 0 });
        }
    };
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("owgp: {e:#}");
            ExitCode::from(66)
        }
    }
}
