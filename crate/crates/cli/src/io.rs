//! Artifact writers: atomic file replacement, metrics CSV, sweep JSON,
//! PPM image dumps, checkpoint files, and the run lock.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dibjscc_core::eval::SweepResult;
use dibjscc_core::tensor::Tensor;

use crate::{CliError, CliResult};

/// Write via a temp file in the same directory, then rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "artifact".into())
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Fixed-width float formatting so metric files are byte-reproducible.
pub fn fmt_metric(v: f32) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.6}")
    }
}

/// A metrics CSV: a config-hash header comment, a column header, then rows.
pub fn write_csv(
    path: &Path,
    config_hash: u64,
    columns: &[&str],
    rows: &[Vec<String>],
) -> CliResult<()> {
    let mut s = format!("# config_hash={config_hash:016x}\n");
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    atomic_write(path, s.as_bytes())
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

fn json_f32(v: f32) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

/// Sweep results as a JSON document: {axis, rows, metadata}.
pub fn sweep_json(sweep: &SweepResult) -> String {
    let axis: Vec<String> = sweep.axis.iter().map(|&v| json_f32(v)).collect();
    let rows: Vec<String> = sweep
        .rows
        .iter()
        .map(|r| {
            let vals: Vec<String> = r.iter().map(|&v| json_f32(v)).collect();
            format!("[{}]", vals.join(","))
        })
        .collect();
    let cols: Vec<String> = sweep
        .columns
        .iter()
        .map(|c| format!("\"{}\"", json_escape(c)))
        .collect();
    format!(
        "{{\n  \"target\": \"{}\",\n  \"axis\": [{}],\n  \"columns\": [{}],\n  \"rows\": [{}],\n  \"metadata\": {{\"seed\": {}, \"config_hash\": \"{:016x}\"}}\n}}\n",
        json_escape(&sweep.target),
        axis.join(","),
        cols.join(","),
        rows.join(","),
        sweep.seed,
        sweep.config_hash
    )
}

/// Save one [0,1]-valued 28×28×3 image row as an 8-bit binary PPM.
pub fn write_ppm(path: &Path, pixels: &[f32], config_hash: u64) -> CliResult<()> {
    let side = dibjscc_core::data::IMAGE_SIDE;
    if pixels.len() != side * side * 3 {
        return Err(CliError::Runtime(format!(
            "expected {} pixel values, got {}",
            side * side * 3,
            pixels.len()
        )));
    }
    let mut bytes = format!("P6\n# config_hash={config_hash:016x}\n{side} {side}\n255\n").into_bytes();
    // Same rounded-pixel pipeline the metrics use.
    bytes.extend(
        pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    atomic_write(path, &bytes)
}

pub fn save_checkpoint(path: &Path, bundle: &dibjscc_core::model::ModelBundle) -> CliResult<()> {
    atomic_write(path, &bundle.encode_checkpoint())
}

pub fn load_checkpoint(path: &Path) -> CliResult<dibjscc_core::model::ModelBundle> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    dibjscc_core::model::ModelBundle::from_checkpoint(&bytes).map_err(CliError::from)
}

/// Exclusive ownership of an output directory for the duration of a run.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(output_dir: &Path) -> CliResult<RunLock> {
        fs::create_dir_all(output_dir)?;
        let path = output_dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "pid {}", std::process::id());
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Runtime(
                format!(
                    "output directory {} is locked by another run (remove {} if stale)",
                    output_dir.display(),
                    path.display()
                ),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Rows of exported codewords as CSV text.
pub fn codeword_csv(export: &dibjscc_core::eval::CodewordExport, config_hash: u64) -> String {
    let m_t = export.y_t.cols();
    let m_s = export.y_s.cols();
    let mut s = format!("# config_hash={config_hash:016x}\n");
    let ys_name = if export.protected { "ysp" } else { "ys" };
    let mut cols: Vec<String> = (0..m_t).map(|i| format!("yt_{i}")).collect();
    cols.extend((0..m_s).map(|i| format!("{ys_name}_{i}")));
    cols.push("color".into());
    cols.push("digit".into());
    s.push_str(&cols.join(","));
    s.push('\n');
    for r in 0..export.y_t.rows() {
        let mut row: Vec<String> = export.y_t.row(r).iter().map(|&v| fmt_metric(v)).collect();
        row.extend(export.y_s.row(r).iter().map(|&v| fmt_metric(v)));
        row.push(export.colors[r].to_string());
        row.push(export.digits[r].to_string());
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Pull a named column of floats back out of a codeword CSV (test support
/// for the round-trip contract).
pub fn parse_csv_column(text: &str, column: &str) -> Option<Vec<f32>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next()?;
    let idx = header.split(',').position(|c| c == column)?;
    let mut out = Vec::new();
    for line in lines {
        let field = line.split(',').nth(idx)?;
        out.push(field.parse().ok()?);
    }
    Some(out)
}

/// First image row of a tensor rendered to PPM, one file per sample index.
pub fn dump_images(
    dir: &Path,
    prefix: &str,
    images: &Tensor,
    indices: &[usize],
    config_hash: u64,
) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for &i in indices {
        let path = dir.join(format!("{prefix}_{i:04}.ppm"));
        write_ppm(&path, images.row(i), config_hash)?;
        written.push(path);
    }
    Ok(written)
}
