//! Stages behind each subcommand. Drivers compute every artifact in memory
//! and return them; nothing touches the output directory until the whole
//! computation has succeeded.

use std::path::{Path, PathBuf};

use pdpclust::fit::{fit_sv, FitStatus};
use pdpclust::kmeans::{cluster_kmeans, kmeans_to_partition};
use pdpclust::partition::{evaluate_partition, ClusterPartition, Method, PartitionMetrics};
use pdpclust::sparse::{extract_clusters, reconstruct, ExtractConfig, OuterRecord};
use pdpclust::transform::{average_pdp, ctf_to_cir, prepare_profile, WindowKind};
use pdpclust::{Ctf, KmeansResult, Pdp, Reconstruction, Scenario, SvFit, SvRealization};
use serde::Serialize;

use crate::config::{Emit, InputSource, RunConfig};
use crate::emit::{self, row, Artifact, Header, Num};
use crate::error::{CliError, CliResult, Stage};
use crate::ingest;

/// Artifacts to write plus a human-readable report for the terminal.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub report: String,
}

pub fn header(cfg: &RunConfig) -> Header {
    Header::new(cfg.hash(), cfg.seed)
}

fn scenario(cfg: &RunConfig) -> Scenario {
    let mut sc = cfg.scenario.clone();
    sc.window = cfg.window;
    sc
}

/// Ensemble-averaged profile of the sweeps.
pub fn profile_from_sweeps(ctfs: &[Ctf], window: WindowKind) -> CliResult<Pdp> {
    let cirs = ctfs
        .iter()
        .map(|c| ctf_to_cir(c, window))
        .collect::<pdpclust::Result<Vec<_>>>()
        .map_err(|e| CliError::core(Stage::Transform, e))?;
    average_pdp(&cirs).map_err(|e| CliError::core(Stage::Transform, e))
}

/// Noise floor, alignment to the strongest bin and truncation.
pub fn prepare(pdp: &Pdp, cfg: &RunConfig) -> CliResult<Pdp> {
    prepare_profile(pdp, cfg.window, cfg.prepare.tail_fraction, cfg.prepare.margin_db)
        .map_err(|e| CliError::core(Stage::Transform, e))
}

/// Raw (untruncated) profile of the configured input, with ground truth
/// attached when known, and the realization for synthetic input.
pub fn acquire(cfg: &RunConfig) -> CliResult<(Pdp, Option<SvRealization>)> {
    match &cfg.input {
        InputSource::Synthetic => {
            if cfg.truth.is_some() {
                log::warn!("ignoring --truth: synthetic input carries its own ground truth");
            }
            let sc = scenario(cfg);
            let real = sc.realize(cfg.seed).map_err(|e| CliError::core(Stage::Synth, e))?;
            let pdp = sc.pdp(&real, cfg.seed).map_err(|e| CliError::core(Stage::Synth, e))?;
            Ok((pdp, Some(real)))
        }
        InputSource::Paths(paths) => {
            let sweeps = ingest::ingest_sweeps(paths)?;
            for w in sweeps.iter().flat_map(|s| &s.warnings) {
                log::warn!("{w}");
            }
            let ctfs: Vec<Ctf> = sweeps.into_iter().map(|s| s.ctf).collect();
            let mut pdp = profile_from_sweeps(&ctfs, cfg.window)?;
            if let Some(t) = &cfg.truth {
                pdp.truth_onsets = Some(ingest::localize_truth(&ingest::read_truth(t)?, 0, pdp.len()));
            }
            Ok((pdp, None))
        }
    }
}

pub struct Clustering {
    pub reconstruction: Reconstruction,
    pub sparse: ClusterPartition,
    pub kmeans: KmeansResult,
    pub kmeans_partition: ClusterPartition,
}

/// Both clusterings of a prepared profile.
pub fn cluster(pdp: &Pdp, cfg: &RunConfig) -> CliResult<Clustering> {
    let k = match (cfg.kmeans.k, &pdp.truth_onsets) {
        (Some(k), _) => k,
        (None, Some(t)) => t.len(),
        (None, None) => {
            return Err(CliError::input(
                Stage::Kmeans,
                "the number of clusters is unknown; pass --k",
            ))
        }
    };
    let kmeans = cluster_kmeans(pdp, &cfg.kmeans.features(k), cfg.seed).map_err(|e| CliError::core(Stage::Kmeans, e))?;
    let mut kmeans_partition = kmeans_to_partition(&kmeans);
    kmeans_partition.truth_onsets = pdp.truth_onsets.clone();
    let reconstruction = reconstruct(pdp, &cfg.sparse).map_err(|e| CliError::core(Stage::Sparse, e))?;
    if !reconstruction.converged {
        log::warn!(
            "sparse: weights still changing after {} reweighting iterations",
            reconstruction.outer_iterations
        );
    }
    let mut sparse = extract_clusters(&reconstruction, &ExtractConfig::from(&cfg.sparse));
    sparse.truth_onsets = pdp.truth_onsets.clone();
    Ok(Clustering {
        reconstruction,
        sparse,
        kmeans,
        kmeans_partition,
    })
}

pub fn fit(pdp: &Pdp, partition: &ClusterPartition, cfg: &RunConfig) -> CliResult<SvFit> {
    fit_sv(pdp, partition, &cfg.fit).map_err(|e| CliError::core(Stage::Fit, e))
}

pub fn pdp_csv(h: &Header, pdp: &Pdp) -> Artifact {
    let db = pdp.power_db();
    emit::csv(
        "pdp.csv",
        h,
        &["delay_ns", "power_db"],
        db.iter().enumerate().map(|(i, v)| row(&[&Num(pdp.delay_ns(i)), &Num(*v)])),
    )
}

pub fn phat_csv(h: &Header, pdp: &Pdp, rec: &Reconstruction) -> Artifact {
    let db = pdp.power_db();
    emit::csv(
        "phat.csv",
        h,
        &["delay_ns", "power_db", "phat_db"],
        (0..pdp.len()).map(|i| row(&[&Num(pdp.delay_ns(i)), &Num(db[i]), &Num(rec.p_hat[i])])),
    )
}

/// Φ at the centre bin of each curvature stencil, so an onset reported at
/// bin `b` is the row with `bin == b`.
pub fn phi_csv(h: &Header, pdp: &Pdp, rec: &Reconstruction, threshold: f64) -> Artifact {
    emit::csv(
        "phi.csv",
        h,
        &["bin", "value", "threshold"],
        rec.phi
            .iter()
            .enumerate()
            .map(|(j, v)| row(&[&(pdp.first_bin + j + 1), &Num(*v), &Num(threshold)])),
    )
}

pub fn partition_csv(h: &Header, name: &str, first_bin: usize, part: &ClusterPartition) -> Artifact {
    emit::csv(
        name,
        h,
        &["start_bin", "end_bin", "label"],
        part.segments
            .iter()
            .map(|s| row(&[&(first_bin + s.start), &(first_bin + s.end), &s.label])),
    )
}

#[derive(Serialize)]
struct FitReport<'a> {
    partition: &'a str,
    fit: &'a SvFit,
}

pub fn fit_json(h: &Header, partition: &str, fit: &SvFit) -> CliResult<Artifact> {
    emit::json("fit.json", h, &FitReport { partition, fit })
}

fn opt(v: Option<f64>, unit: &str) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}{unit}"))
}

/// Aligned text table of a fit.
pub fn fit_table(fit: &SvFit) -> String {
    let mut s = format!(
        "{:>7}  {:>10}  {:>12}  {:>7}  {}\n",
        "cluster", "onset_ns", "gamma_ns", "r2", "status"
    );
    for (i, onset) in fit.onset_delays_ns.iter().enumerate() {
        let status = match fit.statuses[i] {
            FitStatus::Ok => "ok",
            FitStatus::Unfittable => "unfittable",
            FitStatus::NonDecaying => "non-decaying",
        };
        s.push_str(&format!(
            "{:>7}  {:>10.3}  {:>12}  {:>7.4}  {status}\n",
            i,
            onset,
            opt(fit.gamma_ray_per_cluster[i], ""),
            fit.per_cluster_r2[i],
        ));
    }
    s.push_str(&format!("cluster decay Gamma: {}\n", opt(fit.gamma_cluster_hat, " ns")));
    s.push_str(&format!("pooled ray decay gamma: {}\n", opt(fit.gamma_ray_hat, " ns")));
    s.push_str(&format!("first-cluster power: {}\n", opt(fit.power_00_hat_db, " dB")));
    s.push_str(&format!("residual: {:.3} dB rms\n", fit.residual_db));
    if let Some(note) = &fit.cluster_fit_note {
        s.push_str(&format!("note: {note}\n"));
    }
    s
}

#[derive(Serialize)]
struct MethodSummary {
    segments: usize,
    /// Segment starts, grid bins.
    onsets: Vec<usize>,
    evaluation: Option<PartitionMetrics>,
}

fn summary(part: &ClusterPartition, first_bin: usize, truth: Option<&[usize]>, slack: usize) -> MethodSummary {
    MethodSummary {
        segments: part.num_segments(),
        onsets: part.onsets.iter().map(|&o| first_bin + o).collect(),
        evaluation: truth.map(|t| evaluate_partition(part, t, slack)),
    }
}

#[derive(Serialize)]
struct KmeansDiagnostics {
    k: usize,
    wcss: f64,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct SparseDiagnostics<'a> {
    outer_iterations: usize,
    converged: bool,
    objective: f64,
    non_monotone: bool,
    iterations: &'a [OuterRecord<f64>],
}

#[derive(Serialize)]
struct RunMetrics<'a> {
    bins: usize,
    first_bin: usize,
    delay_step_ns: f64,
    noise_floor_db: Option<f64>,
    slack: usize,
    truth_onsets: Option<Vec<usize>>,
    sparse: MethodSummary,
    kmeans: MethodSummary,
    sparse_solver: SparseDiagnostics<'a>,
    kmeans_solver: KmeansDiagnostics,
}

fn run_metrics(h: &Header, pdp: &Pdp, c: &Clustering, slack: usize) -> CliResult<Artifact> {
    let truth = pdp.truth_onsets.as_deref();
    let r = &c.reconstruction;
    let body = RunMetrics {
        bins: pdp.len(),
        first_bin: pdp.first_bin,
        delay_step_ns: pdp.delay_step_ns(),
        noise_floor_db: pdp.noise_floor_db,
        slack,
        truth_onsets: truth.map(|t| t.iter().map(|&b| pdp.first_bin + b).collect()),
        sparse: summary(&c.sparse, pdp.first_bin, truth, slack),
        kmeans: summary(&c.kmeans_partition, pdp.first_bin, truth, slack),
        sparse_solver: SparseDiagnostics {
            outer_iterations: r.outer_iterations,
            converged: r.converged,
            objective: r.objective,
            non_monotone: r.non_monotone,
            iterations: &r.inner_diagnostics,
        },
        kmeans_solver: KmeansDiagnostics {
            k: c.kmeans.centroids.len(),
            wcss: c.kmeans.wcss,
            iterations: c.kmeans.iterations,
            converged: c.kmeans.converged,
        },
    };
    emit::json("metrics.json", h, &body)
}

fn method_line(name: &str, part: &ClusterPartition, truth: Option<&[usize]>, slack: usize) -> String {
    let mut s = format!("{name}: {} segments", part.num_segments());
    if let Some(t) = truth {
        let m = evaluate_partition(part, t, slack);
        s.push_str(&format!(
            " (truth {}, precision {:.2}, recall {:.2} at slack {slack})",
            t.len(),
            m.precision,
            m.recall
        ));
    }
    s.push('\n');
    s
}

/// Full pipeline: input to profile, both clusterings, fit and evaluation.
pub fn run(cfg: &RunConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    let h = header(cfg);
    let (raw, _) = acquire(cfg)?;
    let pdp = prepare(&raw, cfg)?;
    let c = cluster(&pdp, cfg)?;
    let fitted = fit(&pdp, &c.sparse, cfg)?;

    let mut artifacts = Vec::new();
    for e in &cfg.emit {
        match e {
            Emit::Pdp => artifacts.push(pdp_csv(&h, &pdp)),
            Emit::Reconstruction => artifacts.push(phat_csv(&h, &pdp, &c.reconstruction)),
            Emit::Phi => artifacts.push(phi_csv(&h, &pdp, &c.reconstruction, cfg.sparse.threshold)),
            Emit::Partitions => {
                artifacts.push(partition_csv(&h, "partition_kmeans.csv", pdp.first_bin, &c.kmeans_partition));
                artifacts.push(partition_csv(&h, "partition_sparse.csv", pdp.first_bin, &c.sparse));
            }
            Emit::Fit => artifacts.push(fit_json(&h, "sparse", &fitted)?),
            Emit::Metrics => artifacts.push(run_metrics(&h, &pdp, &c, cfg.slack)?),
        }
    }
    let truth = pdp.truth_onsets.as_deref();
    let mut report = format!("profile: {} bins from grid bin {}\n", pdp.len(), pdp.first_bin);
    report.push_str(&method_line("sparse", &c.sparse, truth, cfg.slack));
    report.push_str(&method_line("kmeans", &c.kmeans_partition, truth, cfg.slack));
    if cfg.emit.contains(&Emit::Fit) {
        report.push_str(&fit_table(&fitted));
    }
    Ok(Outcome { artifacts, report })
}

/// Writes a synthetic realization: ground-truth labels, the realization
/// itself and its sweeps.
pub fn synth(cfg: &RunConfig) -> CliResult<Outcome> {
    cfg.scenario.validate().map_err(|e| CliError::core(Stage::Config, e))?;
    let h = header(cfg);
    let sc = scenario(cfg);
    let real = sc.realize(cfg.seed).map_err(|e| CliError::core(Stage::Synth, e))?;
    let sweeps = sc.sweeps(&real, cfg.seed).map_err(|e| CliError::core(Stage::Synth, e))?;

    let labels = real.bin_labels(&sc.grid);
    let mut artifacts = vec![emit::csv(
        "truth.csv",
        &h,
        &["bin_index", "cluster_id"],
        labels.iter().enumerate().map(|(b, l)| row(&[&b, l])),
    )];

    #[derive(Serialize)]
    struct Body<'a> {
        scenario: &'a Scenario,
        onset_bins: Vec<usize>,
        realization: &'a SvRealization,
    }
    artifacts.push(emit::json(
        "realization.json",
        &h,
        &Body {
            scenario: &sc,
            onset_bins: real.onset_bins(&sc.grid),
            realization: &real,
        },
    )?);
    let width = sweeps.len().saturating_sub(1).to_string().len().max(3);
    for (m, ctf) in sweeps.iter().enumerate() {
        let grid = ctf.grid();
        artifacts.push(emit::csv(
            PathBuf::from("sweeps").join(format!("sweep_{m:0width$}.csv")),
            &h,
            &["freq_hz", "re", "im"],
            ctf.samples
                .iter()
                .enumerate()
                .map(|(k, s)| row(&[&Num(grid.frequency(k)), &Num(s.re), &Num(s.im)])),
        ));
    }
    let report = format!(
        "{} clusters, onsets at bins {:?}; {} sweeps of {} points\n",
        real.cluster_onsets.len(),
        real.onset_bins(&sc.grid),
        sweeps.len(),
        sc.grid.len
    );
    Ok(Outcome { artifacts, report })
}

/// Sweeps (or a synthetic scenario) to the prepared profile.
pub fn pdp(cfg: &RunConfig) -> CliResult<Outcome> {
    cfg.validate()?;
    let h = header(cfg);
    let (raw, _) = acquire(cfg)?;
    let pdp = prepare(&raw, cfg)?;
    let report = format!(
        "{} bins from grid bin {}, noise floor {}\n",
        pdp.len(),
        pdp.first_bin,
        opt(pdp.noise_floor_db, " dB")
    );
    Ok(Outcome {
        artifacts: vec![pdp_csv(&h, &pdp)],
        report,
    })
}

fn load_truth(path: Option<&Path>, pdp: &Pdp) -> CliResult<Option<Vec<usize>>> {
    path.map(|p| Ok(ingest::localize_truth(&ingest::read_truth(p)?, pdp.first_bin, pdp.len())))
        .transpose()
}

/// A profile file to both clusterings.
pub fn cluster_file(cfg: &RunConfig, pdp_path: &Path, truth: Option<&Path>) -> CliResult<Outcome> {
    cfg.sparse.validate().map_err(|e| CliError::core(Stage::Config, e))?;
    let h = header(cfg);
    let mut pdp = ingest::read_pdp(pdp_path)?;
    pdp.truth_onsets = load_truth(truth, &pdp)?;
    let c = cluster(&pdp, cfg)?;
    let artifacts = vec![
        phat_csv(&h, &pdp, &c.reconstruction),
        phi_csv(&h, &pdp, &c.reconstruction, cfg.sparse.threshold),
        partition_csv(&h, "partition_kmeans.csv", pdp.first_bin, &c.kmeans_partition),
        partition_csv(&h, "partition_sparse.csv", pdp.first_bin, &c.sparse),
    ];
    let t = pdp.truth_onsets.as_deref();
    let report = method_line("sparse", &c.sparse, t, cfg.slack) + &method_line("kmeans", &c.kmeans_partition, t, cfg.slack);
    Ok(Outcome { artifacts, report })
}

fn method_of(path: &Path) -> Method {
    let name = path.file_name().map(|n| n.to_string_lossy().to_ascii_lowercase()).unwrap_or_default();
    if name.contains("kmeans") {
        Method::Kmeans
    } else {
        Method::Sparse
    }
}

/// Decay fit of a profile over a partition file.
pub fn fit_file(cfg: &RunConfig, pdp_path: &Path, partition_path: &Path) -> CliResult<Outcome> {
    let h = header(cfg);
    let pdp = ingest::read_pdp(pdp_path)?;
    let pf = ingest::read_partition(partition_path, method_of(partition_path))?;
    if pf.first_bin != pdp.first_bin || pf.partition.len() != pdp.len() {
        return Err(CliError::input(
            Stage::Fit,
            format!(
                "{} covers bins {}..{}, the profile covers {}..{}",
                partition_path.display(),
                pf.first_bin,
                pf.first_bin + pf.partition.len(),
                pdp.first_bin,
                pdp.first_bin + pdp.len()
            ),
        ));
    }
    let fitted = fit(&pdp, &pf.partition, cfg)?;
    let label = match pf.partition.method {
        Method::Kmeans => "kmeans",
        Method::Sparse => "sparse",
    };
    Ok(Outcome {
        artifacts: vec![fit_json(&h, label, &fitted)?],
        report: fit_table(&fitted),
    })
}

#[derive(Serialize)]
struct Evaluated {
    file: String,
    method: Method,
    summary: MethodSummary,
}

#[derive(Serialize)]
struct EvalMetrics {
    slack: usize,
    truth_onsets: Vec<usize>,
    partitions: Vec<Evaluated>,
}

/// Partition files scored against ground truth.
pub fn eval_files(cfg: &RunConfig, partitions: &[PathBuf], truth: &Path) -> CliResult<Outcome> {
    let h = header(cfg);
    let onsets = ingest::read_truth(truth)?;
    let mut out = Vec::new();
    let mut report = String::new();
    for p in partitions {
        let pf = ingest::read_partition(p, method_of(p))?;
        let local = ingest::localize_truth(&onsets, pf.first_bin, pf.partition.len());
        let s = summary(&pf.partition, pf.first_bin, Some(&local), cfg.slack);
        report.push_str(&method_line(&p.display().to_string(), &pf.partition, Some(&local), cfg.slack));
        out.push(Evaluated {
            file: p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            method: pf.partition.method,
            summary: s,
        });
    }
    let body = EvalMetrics {
        slack: cfg.slack,
        truth_onsets: onsets,
        partitions: out,
    };
    Ok(Outcome {
        artifacts: vec![emit::json("metrics.json", &h, &body)?],
        report,
    })
}
