//! Library side of the command-line entry points.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{GftBasis, Graph, StationTable};
use crate::harness::{
    compare_curves, run_with_setup, synthetic_stations, theory_curves, CaseSetup, DeviationStats,
};
use crate::io::cache::load_or_build;
use crate::io::config::{load_config, DataSource, Overrides, RawConfig, RunConfig};
use crate::io::results::{read_results, write_results, write_theory};
use crate::io::stations::{dataset_digest, digest_f64s, read_stations_csv};
use crate::noise::{build_cw, COVARIANCE_STREAM};

pub const SOFTWARE: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Execution knobs that never change results.
#[derive(Debug, Clone, Default)]
pub struct ExecOptions {
    pub threads: Option<usize>,
    pub cache_dir: Option<PathBuf>,
}

pub fn load_stations(source: &DataSource) -> Result<StationTable> {
    match source {
        DataSource::Csv { path } => read_stations_csv(path),
        DataSource::Synthetic { nodes, seed } => synthetic_stations(*nodes, *seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub n: usize,
    pub k: usize,
    pub edges: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
    /// Multiplicity of the zero Laplacian eigenvalue (connected components).
    pub components: usize,
    pub algebraic_connectivity: f64,
    pub dataset_digest: String,
    pub edge_weights: String,
    pub cached: bool,
}

fn summarize(stations: &StationTable, k: usize, graph: &Graph, basis: &GftBasis, cached: bool) -> GraphSummary {
    let degrees = graph.degrees();
    let n = graph.n();
    GraphSummary {
        n,
        k,
        edges: graph.edges().len(),
        min_degree: degrees.iter().copied().min().unwrap_or(0),
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        mean_degree: degrees.iter().sum::<usize>() as f64 / n as f64,
        components: basis.eigenvalues.iter().filter(|v| v.abs() < 1e-8).count(),
        algebraic_connectivity: if n > 1 { basis.eigenvalues[1] } else { 0.0 },
        dataset_digest: dataset_digest(stations),
        edge_weights: "binary".into(),
        cached,
    }
}

/// Builds the k-NN graph of a station file and, when `out_dir` is given,
/// writes `nodes.csv`, `edges.csv` and `graph.json` for plotting.
pub fn cmd_build_graph(
    csv_path: &Path,
    k: usize,
    out_dir: Option<&Path>,
    opts: &ExecOptions,
) -> Result<GraphSummary> {
    let stations = read_stations_csv(csv_path)?;
    let (graph, basis, cached) = load_or_build(&stations, k, opts.cache_dir.as_deref())?;
    let summary = summarize(&stations, k, &graph, &basis, cached);
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let degrees = graph.degrees();
        let mut nodes = csv::Writer::from_path(dir.join("nodes.csv"))?;
        nodes.write_record(["index", "id", "lat", "lon", "value", "degree"])?;
        for (i, degree) in degrees.iter().enumerate() {
            nodes.write_record([
                i.to_string(),
                stations.ids()[i].clone(),
                stations.coords()[i][0].to_string(),
                stations.coords()[i][1].to_string(),
                stations.signal()[i].to_string(),
                degree.to_string(),
            ])?;
        }
        nodes.flush()?;
        let mut edges = csv::Writer::from_path(dir.join("edges.csv"))?;
        edges.write_record(["source", "target"])?;
        for (i, j) in graph.edges() {
            edges.write_record([i.to_string(), j.to_string()])?;
        }
        edges.flush()?;
        serde_json::to_writer_pretty(File::create(dir.join("graph.json"))?, &summary)?;
    }
    Ok(summary)
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    /// Effective configuration; can be fed back to `run` as a config file.
    pub config: RawConfig,
    pub master_seed: u64,
    pub seed_scheme: String,
    pub data_source: DataSource,
    pub dataset_digest: String,
    pub sampling_indices: Vec<usize>,
    pub lambda_min: f64,
    pub mu_max: f64,
    pub s_f_norm2: f64,
    pub c_w_digest: String,
    pub metadata: BTreeMap<String, String>,
    pub deviation: Option<DeviationStats>,
    pub threads: Option<usize>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// `<stem>.manifest.json` next to an output CSV.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    csv_path.with_file_name(format!("{stem}.manifest.json"))
}

fn seed_scheme() -> String {
    format!(
        "ChaCha8(master_seed): stream {COVARIANCE_STREAM} draws C_w, stream r+1 drives run r"
    )
}

struct Prepared {
    cfg: RunConfig,
    stations: StationTable,
    setup: CaseSetup,
}

fn prepare(config_path: &Path, overrides: Overrides, opts: &ExecOptions) -> Result<Prepared> {
    let cfg = load_config(config_path, overrides)?;
    let stations = load_stations(&cfg.data)?;
    let exp = &cfg.experiment;
    let (graph, basis, _) = load_or_build(&stations, exp.case.k, opts.cache_dir.as_deref())?;
    let setup = CaseSetup::from_basis(
        &stations,
        graph,
        basis,
        exp.case,
        exp.sampling_strategy,
        exp.master_seed,
    )?;
    Ok(Prepared {
        cfg,
        stations,
        setup,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub deviation: DeviationStats,
}

/// Simulates and writes the results CSV plus its manifest.
pub fn cmd_run(
    config_path: &Path,
    overrides: Overrides,
    out_csv: &Path,
    opts: &ExecOptions,
) -> Result<RunOutputs> {
    let started = Instant::now();
    let p = prepare(config_path, overrides, opts)?;
    let exp = &p.cfg.experiment;
    let result = run_with_setup(exp, &p.setup, opts.threads)?;
    let deviation = compare_curves(
        &result.msd_mean,
        &result.theory_paper.values,
        &result.theory_exact.values,
        Some(&result.per_run),
        p.cfg.burn_in,
    )?;
    if let Some(parent) = out_csv.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_results(
        BufWriter::new(File::create(out_csv)?),
        &result.msd_mean,
        &result.theory_paper.values,
        &result.theory_exact.values,
    )?;
    let manifest = RunManifest {
        software: SOFTWARE.into(),
        config: p.cfg.resolved.clone(),
        master_seed: exp.master_seed,
        seed_scheme: seed_scheme(),
        data_source: p.cfg.data.clone(),
        dataset_digest: dataset_digest(&p.stations),
        sampling_indices: result.sampling_indices.clone(),
        lambda_min: p.setup.lambda_min,
        mu_max: p.setup.mu_max,
        s_f_norm2: p.setup.s_f.norm_squared(),
        c_w_digest: digest_f64s(&result.c_w),
        metadata: result.metadata.clone(),
        deviation: Some(deviation),
        threads: opts.threads,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let manifest_file = manifest_path(out_csv);
    manifest.write(&manifest_file)?;
    Ok(RunOutputs {
        csv: out_csv.to_path_buf(),
        manifest: manifest_file,
        deviation,
    })
}

/// Theory-only curves, no simulation.
pub fn cmd_theory(
    config_path: &Path,
    overrides: Overrides,
    out_csv: &Path,
    opts: &ExecOptions,
) -> Result<PathBuf> {
    let started = Instant::now();
    let p = prepare(config_path, overrides, opts)?;
    let exp = &p.cfg.experiment;
    let noise = build_cw(exp.n_a, exp.n_b, p.setup.band.n(), exp.master_seed)?;
    let c_w_digest = digest_f64s(noise.c_w());
    let model = p.setup.signal_model(noise)?;
    let (paper, exact) = theory_curves(&model, exp.algorithm, exp.param, exp.iterations)?;
    if let Some(parent) = out_csv.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_theory(BufWriter::new(File::create(out_csv)?), &paper.values, &exact.values)?;
    let mut metadata = exp.labels.clone();
    metadata.insert("mode".into(), "theory-only".into());
    let manifest = RunManifest {
        software: SOFTWARE.into(),
        config: p.cfg.resolved.clone(),
        master_seed: exp.master_seed,
        seed_scheme: seed_scheme(),
        data_source: p.cfg.data.clone(),
        dataset_digest: dataset_digest(&p.stations),
        sampling_indices: p.setup.sampling.indices().to_vec(),
        lambda_min: p.setup.lambda_min,
        mu_max: p.setup.mu_max,
        s_f_norm2: p.setup.s_f.norm_squared(),
        c_w_digest,
        metadata,
        deviation: None,
        threads: None,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    manifest.write(&manifest_path(out_csv))?;
    Ok(out_csv.to_path_buf())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareReport {
    pub source: PathBuf,
    pub rows: usize,
    pub deviation: DeviationStats,
}

impl CompareReport {
    pub fn to_text(&self) -> String {
        let d = &self.deviation;
        let mut s = format!(
            "{}: {} iterations, tail t >= {} ({} points, burn-in {})\n",
            self.source.display(),
            self.rows,
            d.tail_start_t,
            d.tail_len,
            d.burn_in_fraction
        );
        for (name, m) in [("paper-literal", &d.paper), ("exact", &d.exact)] {
            s.push_str(&format!(
                "  {name:<14} mean |dB| = {:.4}  max |dB| = {:.4}\n",
                m.mean_abs_db, m.max_abs_db
            ));
            if m.negative_points > 0 {
                s.push_str(&format!(
                    "  {name:<14} {} tail points are negative (no dB value)\n",
                    m.negative_points
                ));
            }
        }
        s
    }
}

/// Tail deviation of a results CSV. Standard errors need per-run data and are
/// NaN here; `run` records them in its manifest.
pub fn cmd_compare(results_csv: &Path, burn_in: f64) -> Result<CompareReport> {
    let table = read_results(results_csv)?;
    // NaN marks a negative theory point; any negative stand-in keeps it flagged
    let lin = |db: &[f64]| -> Vec<f64> {
        db.iter()
            .map(|v| if v.is_nan() { -1.0 } else { 10f64.powf(v / 10.0) })
            .collect()
    };
    let deviation = compare_curves(
        &lin(&table.emp_db),
        &lin(&table.paper_db),
        &lin(&table.exact_db),
        None,
        burn_in,
    )?;
    Ok(CompareReport {
        source: results_csv.to_path_buf(),
        rows: table.t.len(),
        deviation,
    })
}
