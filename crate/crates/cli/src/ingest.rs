//! Sweep, profile, partition and ground-truth readers.
//!
//! Sweeps are either CSV rows `freq_hz,re,im` (one sweep per file, an
//! optional header row, `#` comment lines) or two-port Touchstone files, of
//! which the forward transmission S21 is kept.

use std::path::{Path, PathBuf};

use num_complex::Complex;
use pdpclust::partition::{ClusterPartition, Method};
use pdpclust::{Ctf, Grid, Pdp};

use crate::error::{CliError, CliResult, Stage};

/// Relative spacing deviation tolerated before a grid counts as non-uniform.
const GRID_TOL: f64 = 1e-6;

/// A parsed sweep plus any non-fatal remarks about it.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub ctf: Ctf,
    pub warnings: Vec<String>,
}

fn bad(name: &str, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::input(Stage::Ingest, format!("{name}:{line}: {msg}"))
}

fn read_text(path: &Path, stage: Stage) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::input(stage, format!("{} does not exist", path.display())),
        std::io::ErrorKind::InvalidData => CliError::input(stage, format!("{} is not UTF-8 text", path.display())),
        _ => CliError::io(stage, path, e),
    })
}

fn parse_f64(field: &str, name: &str, line: u64, what: &str) -> CliResult<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| bad(name, line, format!("{what} `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(bad(name, line, format!("{what} is not finite")));
    }
    Ok(v)
}

/// Validates ordering and uniform spacing, then builds the transfer function.
fn build(name: &str, freqs: &[f64], samples: Vec<Complex<f64>>, lines: &[u64]) -> CliResult<Sweep> {
    if freqs.is_empty() {
        return Err(CliError::input(Stage::Ingest, format!("{name}: no data rows")));
    }
    if freqs.len() < 2 {
        return Err(bad(name, lines[0], "a sweep needs at least two frequency points"));
    }
    for i in 1..freqs.len() {
        if freqs[i] <= freqs[i - 1] {
            return Err(bad(name, lines[i], format!("frequency {} Hz is out of order", freqs[i])));
        }
    }
    let step = freqs[1] - freqs[0];
    for i in 2..freqs.len() {
        if ((freqs[i] - freqs[i - 1]) - step).abs() > GRID_TOL * step {
            return Err(bad(
                name,
                lines[i],
                format!("non-uniform grid: spacing {} Hz, expected {step} Hz", freqs[i] - freqs[i - 1]),
            ));
        }
    }
    let grid = Grid::new(freqs[0], step, freqs.len()).map_err(|e| CliError::core(Stage::Ingest, e))?;
    let mut warnings = Vec::new();
    if !grid.is_default_measurement_grid() {
        warnings.push(format!(
            "{name}: grid {} points from {} Hz in {} Hz steps differs from the 55-65 GHz, 10 MHz default",
            grid.len, grid.f_start, grid.f_step
        ));
    }
    let ctf = Ctf::new(samples, grid, name).map_err(|e| CliError::core(Stage::Ingest, e))?;
    Ok(Sweep { ctf, warnings })
}

/// Parses `freq_hz,re,im` rows.
pub fn parse_csv(text: &str, name: &str) -> CliResult<Sweep> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let (mut freqs, mut samples, mut lines) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(name, line, e)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            if rec.iter().collect::<Vec<_>>() != ["freq_hz", "re", "im"] {
                return Err(bad(name, line, "expected header `freq_hz,re,im` or a data row"));
            }
            continue;
        }
        if rec.len() != 3 {
            return Err(bad(name, line, format!("expected 3 fields, found {}", rec.len())));
        }
        freqs.push(parse_f64(&rec[0], name, line, "frequency")?);
        let re = parse_f64(&rec[1], name, line, "real part")?;
        let im = parse_f64(&rec[2], name, line, "imaginary part")?;
        samples.push(Complex::new(re, im));
        lines.push(line);
    }
    build(name, &freqs, samples, &lines)
}

#[derive(Debug, Clone, Copy)]
enum Format {
    RealImag,
    MagAngle,
    DbAngle,
}

/// Parses a two-port Touchstone (version 1) file and keeps S21.
pub fn parse_touchstone(text: &str, name: &str) -> CliResult<Sweep> {
    let mut scale = 1e9;
    let mut format = Format::MagAngle;
    let mut seen_options = false;
    let mut values: Vec<f64> = Vec::new();
    // Line on which each group of nine values starts.
    let mut starts: Vec<u64> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        let content = raw.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(opts) = content.strip_prefix('#') {
            if seen_options {
                continue;
            }
            seen_options = true;
            let mut tokens = opts.split_whitespace().map(str::to_ascii_uppercase);
            while let Some(t) = tokens.next() {
                match t.as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "Y" | "Z" | "H" | "G" => return Err(bad(name, line, format!("{t}-parameters are not supported"))),
                    "RI" => format = Format::RealImag,
                    "MA" => format = Format::MagAngle,
                    "DB" => format = Format::DbAngle,
                    "R" => {
                        tokens.next();
                    }
                    other => return Err(bad(name, line, format!("unknown option `{other}`"))),
                }
            }
            continue;
        }
        if content.starts_with('[') {
            return Err(bad(name, line, "Touchstone 2 keywords are not supported"));
        }
        for tok in content.split_whitespace() {
            if values.len() % 9 == 0 {
                starts.push(line);
            }
            values.push(parse_f64(tok, name, line, "value")?);
        }
    }
    if values.len() % 9 != 0 {
        return Err(bad(
            name,
            *starts.last().unwrap_or(&0),
            "incomplete two-port record (expected frequency and eight values)",
        ));
    }
    let (mut freqs, mut samples) = (Vec::new(), Vec::new());
    for rec in values.chunks_exact(9) {
        freqs.push(rec[0] * scale);
        let (a, b) = (rec[3], rec[4]);
        samples.push(match format {
            Format::RealImag => Complex::new(a, b),
            Format::MagAngle => Complex::from_polar(a, b.to_radians()),
            Format::DbAngle => Complex::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        });
    }
    build(name, &freqs, samples, &starts)
}

/// Reads one sweep file, choosing the format by extension.
pub fn read_sweep(path: &Path) -> CliResult<Sweep> {
    let text = read_text(path, Stage::Ingest)?;
    let name = path.display().to_string();
    let touchstone = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("s2p"));
    if touchstone {
        parse_touchstone(&text, &name)
    } else {
        parse_csv(&text, &name)
    }
}

/// Expands directories to their `.csv` and `.s2p` files in name order.
pub fn sweep_files(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::io(Stage::Ingest, p, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| e.eq_ignore_ascii_case("csv") || e.eq_ignore_ascii_case("s2p"))
                })
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(CliError::input(Stage::Ingest, format!("{}: no sweep files", p.display())));
            }
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Reads every sweep under `paths`; all must share one grid.
pub fn ingest_sweeps(paths: &[PathBuf]) -> CliResult<Vec<Sweep>> {
    let files = sweep_files(paths)?;
    let sweeps = files.iter().map(|f| read_sweep(f)).collect::<CliResult<Vec<_>>>()?;
    if let Some(first) = sweeps.first() {
        for s in &sweeps[1..] {
            let (a, b) = (first.ctf.grid(), s.ctf.grid());
            let same = a.len == b.len
                && (a.f_start - b.f_start).abs() <= GRID_TOL * a.f_step
                && (a.f_step - b.f_step).abs() <= GRID_TOL * a.f_step;
            if !same {
                return Err(CliError::input(
                    Stage::Ingest,
                    format!("{} and {} lie on different grids", first.ctf.sweep_id, s.ctf.sweep_id),
                ));
            }
        }
    }
    Ok(sweeps)
}

/// Data rows of one of our own CSV artifacts, with their line numbers.
fn artifact_rows(path: &Path, stage: Stage, columns: &[&str]) -> CliResult<Vec<(u64, Vec<f64>)>> {
    let text = read_text(path, stage)?;
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| CliError::input(stage, format!("{name}: {e}")))?
        .clone();
    if header.iter().collect::<Vec<_>>() != columns {
        return Err(CliError::input(
            stage,
            format!("{name}: expected columns `{}`", columns.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(stage, format!("{name}:{line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| CliError::input(stage, format!("{name}:{line}: `{f}` is not a number")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push((line, vals));
    }
    if rows.is_empty() {
        return Err(CliError::input(stage, format!("{name}: no data rows")));
    }
    Ok(rows)
}

fn index(v: f64, stage: Stage, name: &str, line: u64) -> CliResult<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::input(stage, format!("{name}:{line}: `{v}` is not a bin index")))
    }
}

/// Reads `pdp.csv` (`delay_ns,power_db`) back into a profile. The delay of
/// the first row fixes its position on the delay grid.
pub fn read_pdp(path: &Path) -> CliResult<Pdp> {
    let rows = artifact_rows(path, Stage::Transform, &["delay_ns", "power_db"])?;
    let name = path.display().to_string();
    if rows.len() < 2 {
        return Err(CliError::input(Stage::Transform, format!("{name}: need at least two bins")));
    }
    let d0 = rows[0].1[0];
    let step_ns = (rows[rows.len() - 1].1[0] - d0) / (rows.len() - 1) as f64;
    if !(step_ns > 0.0) {
        return Err(CliError::input(Stage::Transform, format!("{name}: delays must increase")));
    }
    for (i, (line, r)) in rows.iter().enumerate() {
        if ((r[0] - d0) / step_ns - i as f64).abs() > 1e-3 {
            return Err(CliError::input(Stage::Transform, format!("{name}:{line}: delay is off the uniform grid")));
        }
    }
    let db: Vec<f64> = rows.iter().map(|(_, r)| r[1]).collect();
    let mut pdp = Pdp::from_db(&db, step_ns * 1e-9).map_err(|e| CliError::core(Stage::Transform, e))?;
    pdp.first_bin = (d0 / step_ns).round() as usize;
    Ok(pdp)
}

/// A partition file together with the grid bin of its first segment.
#[derive(Debug, Clone)]
pub struct PartitionFile {
    pub partition: ClusterPartition,
    pub first_bin: usize,
}

/// Reads `partition_*.csv` (`start_bin,end_bin,label`, grid bins, end
/// exclusive). Segments must be contiguous.
pub fn read_partition(path: &Path, method: Method) -> CliResult<PartitionFile> {
    let rows = artifact_rows(path, Stage::Eval, &["start_bin", "end_bin", "label"])?;
    let name = path.display().to_string();
    let mut bounds = Vec::with_capacity(rows.len());
    for (line, r) in &rows {
        let (s, e, l) = (
            index(r[0], Stage::Eval, &name, *line)?,
            index(r[1], Stage::Eval, &name, *line)?,
            index(r[2], Stage::Eval, &name, *line)?,
        );
        if e <= s || bounds.last().is_some_and(|&(_, pe, _, _)| pe != s) {
            return Err(CliError::input(Stage::Eval, format!("{name}:{line}: segments must be contiguous and non-empty")));
        }
        bounds.push((s, e, l, *line));
    }
    let first_bin = bounds[0].0;
    let len = bounds[bounds.len() - 1].1 - first_bin;
    let onsets: Vec<usize> = bounds.iter().map(|b| b.0 - first_bin).collect();
    let labels: Vec<usize> = bounds.iter().map(|b| b.2).collect();
    let partition = ClusterPartition::from_labeled_onsets(onsets, labels, len, method)
        .map_err(|e| CliError::core(Stage::Eval, e))?;
    Ok(PartitionFile { partition, first_bin })
}

/// Reads ground truth `bin_index,cluster_id` and returns the cluster onsets
/// as grid bins.
pub fn read_truth(path: &Path) -> CliResult<Vec<usize>> {
    let rows = artifact_rows(path, Stage::Eval, &["bin_index", "cluster_id"])?;
    let name = path.display().to_string();
    let mut onsets = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    for (line, r) in &rows {
        let bin = index(r[0], Stage::Eval, &name, *line)?;
        let id = index(r[1], Stage::Eval, &name, *line)?;
        match prev {
            Some((pb, _)) if bin <= pb => {
                return Err(CliError::input(Stage::Eval, format!("{name}:{line}: bin {bin} is out of order")));
            }
            Some((_, pid)) if pid == id => {}
            _ => onsets.push(bin),
        }
        prev = Some((bin, id));
    }
    Ok(onsets)
}

/// Maps grid-bin onsets onto a profile covering `first_bin..first_bin + len`.
/// The cluster in progress at the first bin starts the profile.
pub fn localize_truth(onsets: &[usize], first_bin: usize, len: usize) -> Vec<usize> {
    let mut local: Vec<usize> = onsets
        .iter()
        .filter(|&&b| b >= first_bin && b < first_bin + len)
        .map(|&b| b - first_bin)
        .collect();
    if onsets.iter().any(|&b| b <= first_bin) && local.first() != Some(&0) {
        local.insert(0, 0);
    }
    local
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_make_one_sweep() {
        let s = parse_csv("55e9,1,0\n55.01e9,0,1\n55.02e9,-1,0\n", "t").unwrap();
        assert_eq!(s.ctf.samples.len(), 3);
        assert_eq!(s.ctf.samples[1], Complex::new(0.0, 1.0));
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn header_and_comments_are_skipped() {
        let s = parse_csv("# a comment\nfreq_hz,re,im\n1e9,1,2\n2e9,3,4\n", "t").unwrap();
        assert_eq!(s.ctf.samples.len(), 2);
    }

    #[test]
    fn out_of_order_names_line() {
        let err = parse_csv("55e9,1,0\n55.02e9,0,1\n55.01e9,1,1\n", "sweep.csv").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("sweep.csv:3"), "{err}");
    }

    #[test]
    fn malformed_rows_name_line() {
        for text in ["1e9,1,0\n2e9,x,1\n", "1e9,1,0\n2e9,1\n", "1e9,1,0\n2e9,1,0,4\n"] {
            let err = parse_csv(text, "s").unwrap_err();
            assert!(err.to_string().contains("s:2"), "{err}");
        }
    }

    #[test]
    fn empty_and_single_row_rejected() {
        assert!(parse_csv("", "s").is_err());
        assert!(parse_csv("# only a comment\n", "s").is_err());
        assert!(parse_csv("1e9,1,0\n", "s").is_err());
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let err = parse_csv("1e9,1,0\n2e9,1,0\n3.5e9,1,0\n", "s").unwrap_err();
        assert!(err.to_string().contains("s:3"), "{err}");
    }

    #[test]
    fn default_grid_has_no_warning() {
        let text: String = (0..1001).map(|k| format!("{},1,0\n", 55e9 + k as f64 * 10e6)).collect();
        let s = parse_csv(&text, "s").unwrap();
        assert!(s.warnings.is_empty());
        assert_eq!(s.ctf.samples.len(), 1001);
    }

    #[test]
    fn touchstone_formats_take_s21() {
        let ri = "! two points\n# GHz S RI R 50\n55 0 0 0.5 -0.5 9 9 0 0\n55.01 0 0 1 0 9 9 0 0\n";
        let s = parse_touchstone(ri, "t").unwrap();
        assert_eq!(s.ctf.samples[0], Complex::new(0.5, -0.5));
        assert_eq!(s.ctf.grid().f_start, 55e9);
        assert!((s.ctf.grid().f_step - 10e6).abs() < 1e-3);
        let ma = "# MHZ S MA R 50\n1000 0 0 2 90 0 0 0 0\n1001 0 0\n2 180 0 0 0 0\n";
        let s = parse_touchstone(ma, "t").unwrap();
        assert!((s.ctf.samples[0] - Complex::new(0.0, 2.0)).norm() < 1e-12);
        assert!((s.ctf.samples[1] - Complex::new(-2.0, 0.0)).norm() < 1e-12);
        let db = "# HZ S DB R 50\n1 0 0 -20 0 0 0 0 0\n2 0 0 0 0 0 0 0 0\n";
        let s = parse_touchstone(db, "t").unwrap();
        assert!((s.ctf.samples[0].re - 0.1).abs() < 1e-12);
    }

    #[test]
    fn touchstone_errors() {
        assert!(parse_touchstone("# GHZ Z RI R 50\n1 0 0 0 0 0 0 0 0\n", "t").is_err());
        let err = parse_touchstone("# GHZ S RI R 50\n1 0 0 0 0 0 0 0 0\n2 0 0 0\n", "t").unwrap_err();
        assert!(err.to_string().contains("t:3"), "{err}");
        assert!(parse_touchstone("! nothing\n", "t").is_err());
    }

    #[test]
    fn truth_localization() {
        assert_eq!(localize_truth(&[10, 40, 90], 10, 50), vec![0, 30]);
        assert_eq!(localize_truth(&[10, 40, 90], 12, 100), vec![0, 28, 78]);
        assert_eq!(localize_truth(&[20], 10, 50), vec![10]);
    }
}
