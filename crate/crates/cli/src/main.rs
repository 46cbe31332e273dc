//! Command-line entry point.
//!
//! Subcommands: prepare-data, train-dib, train-pp, train-baseline, eval,
//! sweep, export. Exit codes: 0 success, 2 config error, 3 missing
//! prerequisite, 4 runtime failure.

use std::path::Path;
use std::process::ExitCode;

use dibjscc_cli::config::ExperimentConfig;
use dibjscc_cli::runner::{self, SweepKind};
use dibjscc_cli::{CliError, CliResult};
use dibjscc_core::eval::BaselineMode;

const USAGE: &str = "usage: dibjscc <subcommand> [options]

subcommands:
  prepare-data     write or validate the IDX dataset files
  train-dib        two-step disentangling training -> dib.ckpt
  train-pp         password-protection training -> pp.ckpt (needs dib.ckpt)
  train-baseline   train a comparison baseline (--mode a|b|c)
  eval             metrics for the trained system (--table1 for the SNR table)
  sweep            --target psnr|eve|password
  export           codeword CSV + reconstruction image dumps (--protected)

options:
  --config PATH    key = value config file (defaults apply when omitted)
  --set KEY=VALUE  override one config key (repeatable; wins over the file)
  --force          overwrite existing stage artifacts
  --synthetic      prepare-data: fabricate the dataset files
  --mode a|b|c     baseline selector
  --table1         eval: also write per-SNR eavesdropping accuracies
  --target NAME    sweep selector: psnr, eve, password
  --grid SPEC      password sweep cells, e.g. 4x4,16x128
  --seeds N        password sweep seed count (default 3)
  --protected      export: protected subcodewords and pipeline

environment:
  DIBJSCC_OUTPUT_ROOT   relocates relative output_dir values
";

struct Args {
    subcommand: String,
    config_path: Option<String>,
    sets: Vec<(String, String)>,
    force: bool,
    synthetic: bool,
    table1: bool,
    protected: bool,
    mode: Option<String>,
    target: Option<String>,
    grid: Option<String>,
    seeds: usize,
}

fn parse_args(argv: &[String]) -> CliResult<Args> {
    if argv.is_empty() {
        return Err(CliError::Config(format!("missing subcommand\n\n{USAGE}")));
    }
    let mut args = Args {
        subcommand: argv[0].clone(),
        config_path: None,
        sets: Vec::new(),
        force: false,
        synthetic: false,
        table1: false,
        protected: false,
        mode: None,
        target: None,
        grid: None,
        seeds: 3,
    };
    let mut i = 1;
    let need_value = |i: usize, argv: &[String], flag: &str| -> CliResult<String> {
        argv.get(i + 1)
            .cloned()
            .ok_or_else(|| CliError::Config(format!("{flag} needs a value")))
    };
    while i < argv.len() {
        match argv[i].as_str() {
            "--config" => {
                args.config_path = Some(need_value(i, argv, "--config")?);
                i += 2;
            }
            "--set" => {
                let kv = need_value(i, argv, "--set")?;
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'"))
                })?;
                args.sets.push((k.trim().into(), v.trim().into()));
                i += 2;
            }
            "--force" => {
                args.force = true;
                i += 1;
            }
            "--synthetic" => {
                args.synthetic = true;
                i += 1;
            }
            "--table1" => {
                args.table1 = true;
                i += 1;
            }
            "--protected" => {
                args.protected = true;
                i += 1;
            }
            "--mode" => {
                args.mode = Some(need_value(i, argv, "--mode")?);
                i += 2;
            }
            "--target" => {
                args.target = Some(need_value(i, argv, "--target")?);
                i += 2;
            }
            "--grid" => {
                args.grid = Some(need_value(i, argv, "--grid")?);
                i += 2;
            }
            "--seeds" => {
                let v = need_value(i, argv, "--seeds")?;
                args.seeds = v
                    .parse()
                    .map_err(|_| CliError::Config(format!("--seeds expects a count, got '{v}'")))?;
                i += 2;
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown argument '{other}'\n\n{USAGE}"
                )))
            }
        }
    }
    Ok(args)
}

fn load_config(args: &Args) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config_path {
        Some(p) => ExperimentConfig::load(Path::new(p))?,
        None => ExperimentConfig::default(),
    };
    for (k, v) in &args.sets {
        cfg.set(k, v, 0)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_grid(spec: &str) -> CliResult<Vec<(usize, u32)>> {
    let mut grid = Vec::new();
    for cell in spec.split(',') {
        let (l, p) = cell
            .split_once('x')
            .ok_or_else(|| CliError::Config(format!("--grid cell '{cell}' is not LENxPLEVEL")))?;
        let len = l
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid length '{l}'")))?;
        let p_level = p
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad grid p_level '{p}'")))?;
        grid.push((len, p_level));
    }
    Ok(grid)
}

fn run(args: &Args) -> CliResult<()> {
    let cfg = load_config(args)?;
    let paths = runner::Paths::new(&cfg);
    let _lock = dibjscc_cli::io::RunLock::acquire(&paths.output_dir)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let report = match args.subcommand.as_str() {
        "prepare-data" => runner::prepare_data(&cfg, args.synthetic, args.force)?,
        "train-dib" => runner::train_dib_stage(&cfg, args.force)?,
        "train-pp" => runner::train_pp_stage(&cfg, args.force)?,
        "train-baseline" => {
            let mode = match args.mode.as_deref() {
                Some("a") => BaselineMode::RandomDiscard,
                Some("b") => BaselineMode::PrivateDiscard,
                Some("c") => BaselineMode::Adversarial,
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "unknown baseline mode '{other}' (expected a, b, or c)"
                    )))
                }
                None => {
                    return Err(CliError::Config(
                        "train-baseline needs --mode a|b|c".into(),
                    ))
                }
            };
            runner::train_baseline_stage(&cfg, mode, args.force)?
        }
        "eval" => runner::eval_stage(&cfg, args.table1)?,
        "sweep" => {
            let kind = match args.target.as_deref() {
                Some("psnr") => SweepKind::Psnr,
                Some("eve") => SweepKind::EveAccuracy,
                Some("password") => {
                    let grid = match &args.grid {
                        Some(spec) => parse_grid(spec)?,
                        None => vec![(4, 4), (16, 128)],
                    };
                    if args.seeds == 0 {
                        return Err(CliError::Config("--seeds must be ≥ 1".into()));
                    }
                    let seeds: Vec<u64> = (0..args.seeds as u64).map(|i| cfg.seed + i).collect();
                    SweepKind::Password { grid, seeds }
                }
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "unknown sweep target '{other}' (expected psnr, eve, or password)"
                    )))
                }
                None => {
                    return Err(CliError::Config(
                        "sweep needs --target psnr|eve|password".into(),
                    ))
                }
            };
            runner::sweep_stage(&cfg, kind)?
        }
        "export" => runner::export_stage(&cfg, args.protected)?,
        "help" | "--help" | "-h" => {
            print!("{USAGE}");
            return Ok(());
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown subcommand '{other}'\n\n{USAGE}"
            )))
        }
    };

    let manifest = runner::write_manifest(&cfg, std::slice::from_ref(&report))?;
    println!(
        "{}: {} ({} ms)\nmanifest: {}",
        report.stage,
        report.summary,
        report.duration_ms,
        manifest.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let args = match parse_args(&argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
