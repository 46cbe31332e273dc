//! Stage orchestration: each subcommand is a stage that reads its
//! prerequisites from the output directory, computes, and writes artifacts
//! under `output_dir/{checkpoints, metrics, images}`. A run manifest is
//! written last.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dibjscc_core::data::{build_colored_mnist, parse_idx_images, parse_idx_labels, ColoredDataset, RawMnist};
use dibjscc_core::dib;
use dibjscc_core::eval::{self, BaselineConfig, BaselineMode, EvePipeline, SweepTarget};
use dibjscc_core::pp;
use dibjscc_core::rng::{Rng, Stream};

use crate::config::ExperimentConfig;
use crate::io::{self, fmt_metric};
use crate::synth;
use crate::{CliError, CliResult};

/// Table of per-link SNRs used by the headline eavesdropping table.
pub const TABLE1_SNRS: [f32; 7] = [-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0];
/// Legitimate-link SNRs for the graceful-degradation sweep.
pub const PSNR_SWEEP_SNRS: [f32; 7] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

pub struct Paths {
    pub output_dir: PathBuf,
    pub checkpoints: PathBuf,
    pub metrics: PathBuf,
    pub images: PathBuf,
}

impl Paths {
    pub fn new(cfg: &ExperimentConfig) -> Paths {
        // The env var relocates relative output dirs (useful for tests and
        // shared machines).
        let base = match std::env::var("DIBJSCC_OUTPUT_ROOT") {
            Ok(root) if !root.is_empty() && Path::new(&cfg.output_dir).is_relative() => {
                Path::new(&root).join(&cfg.output_dir)
            }
            _ => PathBuf::from(&cfg.output_dir),
        };
        Paths {
            checkpoints: base.join("checkpoints"),
            metrics: base.join("metrics"),
            images: base.join("images"),
            output_dir: base,
        }
    }

    pub fn ensure(&self) -> CliResult<()> {
        fs::create_dir_all(&self.checkpoints)?;
        fs::create_dir_all(&self.metrics)?;
        fs::create_dir_all(&self.images)?;
        Ok(())
    }

    pub fn dib_ckpt(&self) -> PathBuf {
        self.checkpoints.join("dib.ckpt")
    }

    pub fn pp_ckpt(&self) -> PathBuf {
        self.checkpoints.join("pp.ckpt")
    }
}

fn require(path: &Path, produced_by: &str) -> CliResult<()> {
    if !path.exists() {
        return Err(CliError::Prerequisite(format!(
            "{} not found; run '{produced_by}' first",
            path.display()
        )));
    }
    Ok(())
}

fn refuse_overwrite(path: &Path, force: bool) -> CliResult<()> {
    if path.exists() && !force {
        return Err(CliError::Runtime(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

/// Load the IDX files named by the config, truncate to the desk-scale
/// limits, and colorize both splits with their own seeded streams.
pub fn load_datasets(cfg: &ExperimentConfig) -> CliResult<(ColoredDataset, ColoredDataset)> {
    let read = |path: &str| -> CliResult<Vec<u8>> {
        fs::read(path).map_err(|e| {
            CliError::Prerequisite(format!(
                "dataset file {path} not readable ({e}); run 'prepare-data' first or point the config at existing IDX files"
            ))
        })
    };
    let mut train_raw = RawMnist::new(
        parse_idx_images(&read(&cfg.train_images)?)?,
        parse_idx_labels(&read(&cfg.train_labels)?)?,
    )?;
    let mut test_raw = RawMnist::new(
        parse_idx_images(&read(&cfg.test_images)?)?,
        parse_idx_labels(&read(&cfg.test_labels)?)?,
    )?;
    train_raw.truncate(cfg.train_limit);
    test_raw.truncate(cfg.test_limit);
    let train = build_colored_mnist(&train_raw, &mut Rng::stream(cfg.seed, Stream::DataTrain))?;
    let test = build_colored_mnist(&test_raw, &mut Rng::stream(cfg.seed, Stream::DataTest))?;
    Ok((train, test))
}

pub struct StageReport {
    pub stage: String,
    pub duration_ms: u128,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

/// Write the four IDX files. With `synthetic`, fabricate them; otherwise
/// just validate that the configured files parse.
pub fn prepare_data(cfg: &ExperimentConfig, synthetic: bool, force: bool) -> CliResult<StageReport> {
    let t0 = Instant::now();
    let mut artifacts = Vec::new();
    if synthetic {
        for (path, count, seed_tag) in [
            (&cfg.train_images, cfg.train_limit, 0u64),
            (&cfg.test_images, cfg.test_limit, 1u64),
        ] {
            let images_path = Path::new(path);
            refuse_overwrite(images_path, force)?;
            let labels_path = if seed_tag == 0 {
                Path::new(&cfg.train_labels)
            } else {
                Path::new(&cfg.test_labels)
            };
            refuse_overwrite(labels_path, force)?;
            let (images, labels) = synth::synth_split(count, cfg.seed ^ (seed_tag << 17));
            io::atomic_write(images_path, &dibjscc_core::data::write_idx_images(&images))?;
            io::atomic_write(labels_path, &dibjscc_core::data::write_idx_labels(&labels))?;
            artifacts.push(images_path.to_path_buf());
            artifacts.push(labels_path.to_path_buf());
        }
    }
    // Either way the files must parse and colorize cleanly.
    let (train, test) = load_datasets(cfg)?;
    Ok(StageReport {
        stage: "prepare-data".into(),
        duration_ms: t0.elapsed().as_millis(),
        artifacts,
        summary: format!("train {} / test {} samples ready", train.len(), test.len()),
    })
}

pub fn train_dib_stage(cfg: &ExperimentConfig, force: bool) -> CliResult<StageReport> {
    let t0 = Instant::now();
    let paths = Paths::new(cfg);
    paths.ensure()?;
    refuse_overwrite(&paths.dib_ckpt(), force)?;
    let (train, test) = load_datasets(cfg)?;
    let outcome = dib::train_dib_with_dims(&train, &test, &cfg.dib(), cfg.seed, cfg.dims())?;
    let hash = cfg.hash();

    let step1_rows: Vec<Vec<String>> = outcome
        .step1
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                fmt_metric(r.l_c),
                fmt_metric(r.test_accuracy),
            ]
        })
        .collect();
    let step1_path = paths.metrics.join("dib_step1.csv");
    io::write_csv(&step1_path, hash, &["epoch", "l_c", "test_accuracy"], &step1_rows)?;

    let step2_rows: Vec<Vec<String>> = outcome
        .step2
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                fmt_metric(r.l_b),
                fmt_metric(r.l_a),
                fmt_metric(r.l_dis),
                fmt_metric(r.test_mse),
            ]
        })
        .collect();
    let step2_path = paths.metrics.join("dib_step2.csv");
    io::write_csv(
        &step2_path,
        hash,
        &["epoch", "l_b", "l_a", "l_dis", "test_mse"],
        &step2_rows,
    )?;

    io::save_checkpoint(&paths.dib_ckpt(), &outcome.bundle)?;
    let final_mse = outcome.step2.last().map(|r| r.test_mse).unwrap_or(f32::NAN);
    Ok(StageReport {
        stage: "train-dib".into(),
        duration_ms: t0.elapsed().as_millis(),
        artifacts: vec![step1_path, step2_path, paths.dib_ckpt()],
        summary: format!("final test mse {final_mse:.5}"),
    })
}

pub fn train_pp_stage(cfg: &ExperimentConfig, force: bool) -> CliResult<StageReport> {
    let t0 = Instant::now();
    let paths = Paths::new(cfg);
    paths.ensure()?;
    require(&paths.dib_ckpt(), "train-dib")?;
    refuse_overwrite(&paths.pp_ckpt(), force)?;
    let (train, test) = load_datasets(cfg)?;
    let dib_bundle = io::load_checkpoint(&paths.dib_ckpt())?;
    let outcome = pp::train_pp(&train, &test, &dib_bundle, &cfg.pp()?, cfg.seed)?;
    let hash = cfg.hash();

    let rows: Vec<Vec<String>> = outcome
        .rows
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                fmt_metric(r.l_b),
                fmt_metric(r.l_t),
                fmt_metric(r.l_e),
                fmt_metric(r.eve_acc_protected),
                fmt_metric(r.eve_acc_guess),
                fmt_metric(r.test_mse),
            ]
        })
        .collect();
    let pp_path = paths.metrics.join("pp.csv");
    io::write_csv(
        &pp_path,
        hash,
        &[
            "epoch",
            "l_b",
            "l_t",
            "l_e",
            "eve_acc_protected",
            "eve_acc_guess",
            "test_mse",
        ],
        &rows,
    )?;
    io::save_checkpoint(&paths.pp_ckpt(), &outcome.bundle)?;
    let last = outcome.rows.last();
    Ok(StageReport {
        stage: "train-pp".into(),
        duration_ms: t0.elapsed().as_millis(),
        artifacts: vec![pp_path, paths.pp_ckpt()],
        summary: format!(
            "eve acc {:.4}, test mse {:.5}",
            last.map(|r| r.eve_acc_protected).unwrap_or(f32::NAN),
            last.map(|r| r.test_mse).unwrap_or(f32::NAN)
        ),
    })
}

pub fn train_baseline_stage(
    cfg: &ExperimentConfig,
    mode: BaselineMode,
    force: bool,
) -> CliResult<StageReport> {
    let t0 = Instant::now();
    let paths = Paths::new(cfg);
    paths.ensure()?;
    let name = match mode {
        BaselineMode::RandomDiscard => "a_random_discard",
        BaselineMode::PrivateDiscard => "b_private_discard",
        BaselineMode::Adversarial => "c_adversarial",
    };
    let out_path = paths.metrics.join(format!("baseline_{name}.csv"));
    refuse_overwrite(&out_path, force)?;
    let (train, test) = load_datasets(cfg)?;
    let dib_bundle = if mode == BaselineMode::PrivateDiscard {
        require(&paths.dib_ckpt(), "train-dib")?;
        Some(io::load_checkpoint(&paths.dib_ckpt())?)
    } else {
        None
    };
    let bl_cfg = BaselineConfig {
        epochs: cfg.v_d2,
        batch_size: cfg.batch_size,
        snr_ab_db: cfg.snr_ab_db,
        snr_ae_db: cfg.snr_ae_db,
        m: cfg.m_s + cfg.m_t,
        m_s: cfg.m_s,
        alpha1: cfg.alpha1,
        adam: cfg.adam(),
    };
    let outcome = eval::run_baseline(mode, &train, &test, dib_bundle.as_ref(), &bl_cfg, cfg.seed)?;
    io::write_csv(
        &out_path,
        cfg.hash(),
        &["mode", "test_mse", "eve_accuracy", "snr_ae_db"],
        &[vec![
            name.to_string(),
            fmt_metric(outcome.test_mse),
            fmt_metric(outcome.eve_accuracy),
            fmt_metric(cfg.snr_ae_db),
        ]],
    )?;
    Ok(StageReport {
        stage: format!("train-baseline {name}"),
        duration_ms: t0.elapsed().as_millis(),
        artifacts: vec![out_path],
        summary: format!(
            "mse {:.5}, eve acc {:.4}",
            outcome.test_mse, outcome.eve_accuracy
        ),
    })
}

/// Headline evaluation. Always writes `eval.csv` (test MSE, PSNR, in-loop
/// Eve accuracy); with `table1`, also writes probe-measured eavesdropping
/// accuracy per eavesdropper SNR in the standard list.
pub fn eval_stage(cfg: &ExperimentConfig, table1: bool) -> CliResult<StageReport> {
    let t0 = Instant::now();
    let paths = Paths::new(cfg);
    paths.ensure()?;
    require(&paths.pp_ckpt(), "train-pp")?;
    let (train, test) = load_datasets(cfg)?;
    let bundle = io::load_checkpoint(&paths.pp_ckpt())?;
    let hash = cfg.hash();
    let password = cfg.pp()?.password;
    let mut artifacts = Vec::new();

    let mut rng = Rng::stream(cfg.seed, Stream::ChannelEval);
    let test_mse = pp::protected_mse(&bundle, &test, &password, cfg.snr_ab_db, &mut rng)?;
    let x = test.all_x();
    let (y_t, y_s) = dib::encode(&bundle, &x)?;
    let x_hat = {
        let p = pp::password_batch(&mut rng, &password, test.len());
        let y_s_p = pp::encrypt(&y_s, &p, &bundle.encryptor)?;
        let sent = pp::protected_transmit(&y_t, &y_s_p)?;
        let recv = dibjscc_core::channel::awgn(
            &sent,
            &dibjscc_core::channel::ChannelSpec::new(cfg.snr_ab_db),
            &mut rng,
        );
        let m_t = y_t.cols();
        let m_s = y_s.cols();
        let yt_b = dibjscc_core::tensor::slice_cols(&recv, 0, m_t)?;
        let ysp_b = dibjscc_core::tensor::slice_cols(&recv, m_t, m_s)?;
        let ys_bar = pp::decrypt(&ysp_b, &p, &bundle.decryptor)?;
        bundle
            .decoder
            .forward_pure(&dibjscc_core::tensor::hconcat(&yt_b, &ys_bar)?)?
    };
    let psnr_db = eval::psnr(&x, &x_hat, 8)?;
    let eve_acc = eval::eavesdrop_accuracy(
        &bundle.eve,
        &bundle,
        &test,
        EvePipeline::Protected,
        cfg.snr_ae_db,
        &password,
        &mut rng,
    )?;
    let eval_path = paths.metrics.join("eval.csv");
    io::write_csv(
        &eval_path,
        hash,
        &["test_mse", "psnr_db", "eve_acc_protected", "snr_ab_db", "snr_ae_db"],
        &[vec![
            fmt_metric(test_mse),
            fmt_metric(psnr_db),
            fmt_metric(eve_acc),
            fmt_metric(cfg.snr_ab_db),
            fmt_metric(cfg.snr_ae_db),
        ]],
    )?;
    artifacts.push(eval_path);

    if table1 {
        let mut rows = Vec::new();
        for (i, &snr) in TABLE1_SNRS.iter().enumerate() {
            let probe_seed = cfg.seed ^ ((i as u64 + 1) << 24);
            let protected = eval::probe_leakage(
                &bundle,
                &train,
                &test,
                EvePipeline::Protected,
                snr,
                &password,
                probe_seed,
            )?;
            let unprotected = eval::probe_leakage(
                &bundle,
                &train,
                &test,
                EvePipeline::Unprotected,
                snr,
                &password,
                probe_seed,
            )?;
            rows.push(vec![
                fmt_metric(snr),
                fmt_metric(protected),
                fmt_metric(unprotected),
            ]);
        }
        let table1_path = paths.metrics.join("table1.csv");
        io::write_csv(
            &table1_path,
            hash,
            &["snr_ae_db", "protected_acc", "unprotected_acc"],
            &rows,
        )?;
        artifacts.push(table1_path);
    }

    Ok(StageReport {
        stage: "eval".into(),
        duration_ms: t0.elapsed().as_millis(),
        artifacts,
        summary: format!("mse {test_mse:.5}, psnr {psnr_db:.2} dB, eve acc {eve_acc:.4}"),
    })
}

pub enum SweepKind {
    Psnr,
    EveAccuracy,
    Password { grid: Vec<(usize, u32)>, seeds: Vec<u64> },
}

pub fn sweep_stage(cfg: &ExperimentConfig, kind: SweepKind) -> CliResult<StageReport> {
    let t0 = Instant::now();
    let paths = Paths::new(cfg);
    paths.ensure()?;
    let (train, test) = load_datasets(cfg)?;
    let hash = cfg.hash();
    let password = cfg.pp()?.password;

    let (name, result) = match kind {
        SweepKind::Psnr => {
            require(&paths.pp_ckpt(), "train-pp")?;
            let bundle = io::load_checkpoint(&paths.pp_ckpt())?;
            (
                "psnr",
                eval::snr_sweep(
                    &bundle,
                    &train,
                    &test,
                    &PSNR_SWEEP_SNRS,
                    SweepTarget::Psnr,
                    &password,
                    cfg.seed,
                    hash,
                )?,
            )
        }
        SweepKind::EveAccuracy => {
            require(&paths.pp_ckpt(), "train-pp")?;
            let bundle = io::load_checkpoint(&paths.pp_ckpt())?;
            (
                "eve_accuracy",
                eval::snr_sweep(
                    &bundle,
                    &train,
                    &test,
                    &TABLE1_SNRS,
                    SweepTarget::EveAccuracy,
                    &password,
                    cfg.seed,
                    hash,
                )?,
            )
        }
        SweepKind::Password { grid, seeds } => {
            require(&paths.dib_ckpt(), "train-dib")?;
            let bundle = io::load_checkpoint(&paths.dib_ckpt())?;
            (
                "password",
                eval::password_sweep(&train, &test, &bundle, &cfg.pp()?, &grid, &seeds, hash)?,
            )
        }
    };

    let csv_path = paths.metrics.join(format!("sweep_{name}.csv"));
    let mut columns: Vec<&str> = vec!["axis"];
    let col_names: Vec<String> = result.columns.clone();
    columns.extend(col_names.iter().map(|s| s.as_str()));
    let rows: Vec<Vec<String>> = result
        .axis
        .iter()
        .zip(&result.rows)
        .map(|(&a, r)| {
            let mut row = vec![fmt_metric(a)];
            row.extend(r.iter().map(|&v| fmt_metric(v)));
            row
        })
        .collect();
    io::write_csv(&csv_path, hash, &columns, &rows)?;
    let json_path = paths.metrics.join(format!("sweep_{name}.json"));
    io::atomic_write(&json_path, io::sweep_json(&result).as_bytes())?;

    Ok(StageReport {
        stage: format!("sweep {name}"),
        duration_ms: t0.elapsed().as_millis(),
        artifacts: vec![csv_path, json_path],
        summary: format!("{} axis points", result.axis.len()),
    })
}

pub fn export_stage(cfg: &ExperimentConfig, protected: bool) -> CliResult<StageReport> {
    let t0 = Instant::now();
    let paths = Paths::new(cfg);
    paths.ensure()?;
    let ckpt = if protected {
        require(&paths.pp_ckpt(), "train-pp")?;
        paths.pp_ckpt()
    } else {
        require(&paths.dib_ckpt(), "train-dib")?;
        paths.dib_ckpt()
    };
    let (_, test) = load_datasets(cfg)?;
    let bundle = io::load_checkpoint(&ckpt)?;
    let hash = cfg.hash();
    let password = cfg.pp()?.password;

    let export = eval::export_codewords(&bundle, &test, protected, &password, cfg.seed)?;
    let csv_path = paths.metrics.join("codewords.csv");
    io::atomic_write(&csv_path, io::codeword_csv(&export, hash).as_bytes())?;

    // A handful of reconstructions for visual inspection.
    let x = test.all_x();
    let mut rng = Rng::stream(cfg.seed, Stream::ChannelEval);
    let recon = if protected {
        let (y_t, y_s) = dib::encode(&bundle, &x)?;
        let p = pp::password_batch(&mut rng, &password, test.len());
        let y_s_p = pp::encrypt(&y_s, &p, &bundle.encryptor)?;
        let sent = pp::protected_transmit(&y_t, &y_s_p)?;
        let recv = dibjscc_core::channel::awgn(
            &sent,
            &dibjscc_core::channel::ChannelSpec::new(cfg.snr_ab_db),
            &mut rng,
        );
        let yt_b = dibjscc_core::tensor::slice_cols(&recv, 0, y_t.cols())?;
        let ysp_b = dibjscc_core::tensor::slice_cols(&recv, y_t.cols(), y_s.cols())?;
        let ys_bar = pp::decrypt(&ysp_b, &p, &bundle.decryptor)?;
        bundle
            .decoder
            .forward_pure(&dibjscc_core::tensor::hconcat(&yt_b, &ys_bar)?)?
    } else {
        let (y_t, y_s) = dib::encode(&bundle, &x)?;
        let sent = dib::normalize_split(&y_t, &y_s)?;
        let recv = dibjscc_core::channel::awgn(
            &sent,
            &dibjscc_core::channel::ChannelSpec::new(cfg.snr_ab_db),
            &mut rng,
        );
        bundle.decoder.forward_pure(&recv)?
    };
    let dump_count = test.len().min(8);
    let indices: Vec<usize> = (0..dump_count).collect();
    let mut artifacts = vec![csv_path];
    artifacts.extend(io::dump_images(&paths.images, "orig", &x, &indices, hash)?);
    artifacts.extend(io::dump_images(&paths.images, "recon", &recon, &indices, hash)?);

    Ok(StageReport {
        stage: "export".into(),
        duration_ms: t0.elapsed().as_millis(),
        artifacts,
        summary: format!("{} codeword rows, {} image dumps", test.len(), 2 * dump_count),
    })
}

/// Write the run manifest: config hash, stage timings, artifact paths that
/// exist, and format versions. Written atomically, last.
pub fn write_manifest(cfg: &ExperimentConfig, reports: &[StageReport]) -> CliResult<PathBuf> {
    let paths = Paths::new(cfg);
    paths.ensure()?;
    let mut stages = Vec::new();
    for r in reports {
        let arts: Vec<String> = r
            .artifacts
            .iter()
            .filter(|p| p.exists())
            .map(|p| format!("\"{}\"", p.display().to_string().replace('\\', "/")))
            .collect();
        stages.push(format!(
            "    {{\"stage\": \"{}\", \"duration_ms\": {}, \"artifacts\": [{}]}}",
            r.stage,
            r.duration_ms,
            arts.join(", ")
        ));
    }
    let manifest = format!
        ("{{\n  \"config_hash\": \"{:016x}\",\n  \"checkpoint_format_version\": {},\n  \"crate_version\": \"{}\",\n  \"stages\": [\n{}\n  ]\n}}\n",
        cfg.hash(),
        dibjscc_core::model::CHECKPOINT_VERSION,
        env!("CARGO_PKG_VERSION"),
        stages.join(",\n")
    );
    let path = paths.output_dir.join("manifest.json");
    io::atomic_write(&path, manifest.as_bytes())?;
    Ok(path)
}
