//! File-level pipeline: JSON-lines manifests of dataset records, labeling,
//! training and evaluation. The CLI is a thin layer over these functions.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::ParameterizedCircuit;
use crate::error::{Error, Result};
use crate::expressibility::{expressibility, EstimatorConfig};
use crate::generate::{generate_dataset, real_amplitudes_suite, RandomGenConfig, RealAmpDescriptor};
use crate::gnn::{rmse, split_indices, train, GnnModel, ModelConfig, TrainConfig, TrainHistory};
use crate::graph::{encode, CircuitGraph};
use crate::seed::derive_seed;
use crate::sim::Simulator;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CIRCUIT_DIR: &str = "circuits";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Random,
    RealAmplitudes,
}

/// Where a record's randomness came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub generator: Generator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_config: Option<RandomGenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<RealAmpDescriptor>,
    /// Per-circuit seed used for fidelity sampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub circuit_id: String,
    pub circuit: ParameterizedCircuit,
    pub label: Option<f64>,
    pub estimator: Option<EstimatorConfig>,
    pub seed_lineage: SeedLineage,
}

impl DatasetRecord {
    pub fn is_labeled(&self) -> bool {
        self.label.is_some() && self.estimator.is_some()
    }

    pub fn graph(&self) -> Result<CircuitGraph> {
        let mut g = encode(&self.circuit, &self.circuit_id)?;
        g.label = self.label;
        Ok(g)
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<DatasetRecord>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            location: format!("{}:{}", path.display(), i + 1),
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn manifest_text(records: &[DatasetRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

/// Replaces `path` via a sibling temporary file so readers never observe a
/// partial manifest.
pub fn write_manifest(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    write_atomic(path, manifest_text(records).as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_circuit_files(out: &Path, records: &[DatasetRecord]) -> Result<()> {
    let dir = out.join(CIRCUIT_DIR);
    create_dir(&dir)?;
    for r in records {
        let p = dir.join(format!("{}.json", r.circuit_id));
        fs::write(&p, r.circuit.to_json()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Summary written next to a generated manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub count: usize,
    pub max_qubits: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub depth_histogram: BTreeMap<usize, usize>,
    pub qubit_histogram: BTreeMap<usize, usize>,
}

/// Random circuits under `out/circuits/` plus an unlabeled manifest and a
/// `generation_summary.json`.
pub fn generate_to_dir(count: usize, max_qubits: usize, max_depth: usize, seed: u64, out: &Path) -> Result<GenerationSummary> {
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    create_dir(out)?;
    let generated = generate_dataset(count, max_qubits, max_depth, seed)?;
    let mut summary = GenerationSummary {
        count,
        max_qubits,
        max_depth,
        seed,
        depth_histogram: BTreeMap::new(),
        qubit_histogram: BTreeMap::new(),
    };
    let records: Vec<DatasetRecord> = generated
        .into_iter()
        .map(|g| {
            *summary.depth_histogram.entry(g.circuit.stats()?.depth).or_default() += 1;
            *summary.qubit_histogram.entry(g.circuit.num_qubits).or_default() += 1;
            Ok(DatasetRecord {
                circuit_id: g.id,
                circuit: g.circuit,
                label: None,
                estimator: None,
                seed_lineage: SeedLineage {
                    generator: Generator::Random,
                    master_seed: Some(seed),
                    circuit_seed: Some(g.config.seed),
                    gen_config: Some(g.config),
                    descriptor: None,
                    label_seed: None,
                },
            })
        })
        .collect::<Result<_>>()?;
    write_circuit_files(out, &records)?;
    write_manifest(&out.join(MANIFEST_FILE), &records)?;
    let p = out.join("generation_summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SuiteEntry {
    circuit_id: String,
    descriptor: RealAmpDescriptor,
    file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SuiteDocument {
    generation_rule: String,
    circular_convention: String,
    sca_convention: String,
    entries: Vec<SuiteEntry>,
}

/// The 64 RealAmplitudes validation circuits, a `suite.json` describing
/// them, and an unlabeled manifest.
pub fn realamp_to_dir(out: &Path) -> Result<usize> {
    create_dir(out)?;
    let suite = real_amplitudes_suite();
    let records: Vec<DatasetRecord> = suite
        .iter()
        .map(|(d, c)| DatasetRecord {
            circuit_id: d.id(),
            circuit: c.clone(),
            label: None,
            estimator: None,
            seed_lineage: SeedLineage {
                generator: Generator::RealAmplitudes,
                master_seed: None,
                circuit_seed: None,
                gen_config: None,
                descriptor: Some(*d),
                label_seed: None,
            },
        })
        .collect();
    write_circuit_files(out, &records)?;
    write_manifest(&out.join(MANIFEST_FILE), &records)?;
    let doc = SuiteDocument {
        generation_rule: "qubits {2,3,4} x reps {1,2,3,4} x entanglement {full,linear,circular,sca} \
                          with final RY layer (48), plus qubits 4 x reps {1,2,3,4} x the same patterns \
                          without the final RY layer (16)"
            .into(),
        circular_convention: "wrap-around pair (n-1, 0) first, then (i, i+1); no wrap pair for n = 2".into(),
        sca_convention: "circular list rotated right by the repetition index, control/target swapped on odd repetitions"
            .into(),
        entries: records
            .iter()
            .zip(&suite)
            .map(|(r, (d, _))| SuiteEntry {
                circuit_id: r.circuit_id.clone(),
                descriptor: *d,
                file: format!("{CIRCUIT_DIR}/{}.json", r.circuit_id),
            })
            .collect(),
    };
    let p = out.join("suite.json");
    fs::write(&p, serde_json::to_string_pretty(&doc).expect("suite serializes")).map_err(|e| Error::io(&p, e))?;
    Ok(records.len())
}

#[derive(Debug, Default)]
pub struct LabelSummary {
    pub labeled: usize,
    pub already_labeled: usize,
    pub failures: Vec<(String, Error)>,
}

/// Labels every unlabeled record in place. Per-record failures are collected
/// and the remaining records are still labeled. `jobs` threads are used; the
/// result does not depend on it.
pub fn label_records(records: &mut [DatasetRecord], config: &EstimatorConfig, jobs: usize, sim: &Simulator) -> Result<LabelSummary> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let already_labeled = records.iter().filter(|r| r.is_labeled()).count();
    let results: Vec<Option<Result<f64>>> = pool.install(|| {
        records
            .par_iter()
            .map(|r| {
                (!r.is_labeled()).then(|| {
                    expressibility(&r.circuit, &r.circuit_id, config, sim).map(|e| e.value)
                })
            })
            .collect()
    });
    let mut summary = LabelSummary {
        already_labeled,
        ..Default::default()
    };
    for (r, res) in records.iter_mut().zip(results) {
        match res {
            None => {}
            Some(Ok(value)) => {
                r.label = Some(value);
                r.estimator = Some(config.clone());
                r.seed_lineage.label_seed = Some(derive_seed(config.seed, &r.circuit_id));
                summary.labeled += 1;
            }
            Some(Err(e)) => summary.failures.push((r.circuit_id.clone(), e)),
        }
    }
    Ok(summary)
}

pub fn label_manifest(path: &Path, config: &EstimatorConfig, jobs: usize) -> Result<LabelSummary> {
    let mut records = read_manifest(path)?;
    let max_qubits = records.iter().map(|r| r.circuit.num_qubits).max().unwrap_or(1);
    let sim = Simulator::with_max_qubits(max_qubits.max(crate::sim::DEFAULT_MAX_QUBITS));
    let summary = label_records(&mut records, config, jobs, &sim)?;
    write_manifest(path, &records)?;
    Ok(summary)
}

/// Graphs for every record; fails listing the unlabeled ones.
pub fn labeled_graphs(records: &[DatasetRecord]) -> Result<Vec<CircuitGraph>> {
    let unlabeled: Vec<&str> = records
        .iter()
        .filter(|r| !r.is_labeled())
        .map(|r| r.circuit_id.as_str())
        .collect();
    if !unlabeled.is_empty() {
        let shown: Vec<&str> = unlabeled.iter().take(20).copied().collect();
        return Err(Error::Data(format!(
            "{} unlabeled record(s): {}{}",
            unlabeled.len(),
            shown.join(", "),
            if unlabeled.len() > shown.len() { ", ..." } else { "" }
        )));
    }
    records.iter().map(DatasetRecord::graph).collect()
}

pub fn train_from_manifest(
    manifest: &Path,
    train_config: &TrainConfig,
    model_config: &ModelConfig,
    out_model: &Path,
    out_history: &Path,
) -> Result<(GnnModel, TrainHistory)> {
    let graphs = labeled_graphs(&read_manifest(manifest)?)?;
    let (model, history) = train(&graphs, train_config, model_config)?;
    model.save_checkpoint(out_model)?;
    history.save_csv(out_history)?;
    Ok((model, history))
}

/// Which records of a dataset to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    All,
    /// The training part of the split recorded in the model.
    Train,
    /// The held-out part of the split recorded in the model.
    Validation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub circuit_id: String,
    pub truth: f64,
    pub predicted: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub rmse: f64,
    pub dataset: String,
}

impl EvalReport {
    pub fn from_pairs(dataset: &str, ids: Vec<String>, truth: &[f64], predicted: &[f64]) -> Result<Self> {
        let rmse = rmse(predicted, truth)?;
        let rows = ids
            .into_iter()
            .zip(truth.iter().zip(predicted))
            .map(|(circuit_id, (&t, &p))| EvalRow {
                circuit_id,
                truth: t,
                predicted: p,
                error: p - t,
            })
            .collect();
        Ok(EvalReport {
            rows,
            rmse,
            dataset: dataset.to_string(),
        })
    }

    /// `circuit_id,true,predicted,error`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["circuit_id", "true", "predicted", "error"])?;
        for r in &self.rows {
            w.write_record([
                r.circuit_id.clone(),
                r.truth.to_string(),
                r.predicted.to_string(),
                r.error.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("eval csv", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn truths(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.truth).collect()
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.predicted).collect()
    }
}

/// Reads `(true, predicted)` pairs back from an eval CSV.
pub fn read_eval_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Data(format!("bad number in column {i} of {}", path.display())))
        };
        out.push((parse(1)?, parse(2)?));
    }
    Ok(out)
}

pub fn evaluate_records(model: &GnnModel, records: &[DatasetRecord], subset: Subset, dataset: &str) -> Result<EvalReport> {
    let chosen: Vec<&DatasetRecord> = match subset {
        Subset::All => records.iter().collect(),
        Subset::Train | Subset::Validation => {
            let tc = model
                .train_config
                .as_ref()
                .ok_or_else(|| Error::Data("model carries no training split".into()))?;
            let (train_idx, val_idx) = split_indices(records.len(), tc.train_fraction, tc.seed);
            let idx = if subset == Subset::Train { train_idx } else { val_idx };
            idx.into_iter().map(|i| &records[i]).collect()
        }
    };
    let owned: Vec<DatasetRecord> = chosen.into_iter().cloned().collect();
    let graphs = labeled_graphs(&owned)?;
    let predicted = model.predict_graphs(&graphs, 1024)?;
    let truth: Vec<f64> = graphs.iter().map(|g| g.label.expect("labeled")).collect();
    EvalReport::from_pairs(dataset, owned.into_iter().map(|r| r.circuit_id).collect(), &truth, &predicted)
}

pub fn evaluate_manifest(model_path: &Path, manifest: &Path, subset: Subset, out: Option<&Path>) -> Result<EvalReport> {
    let model = GnnModel::load_checkpoint(model_path)?;
    let records = read_manifest(manifest)?;
    let report = evaluate_records(&model, &records, subset, &manifest.display().to_string())?;
    if let Some(out) = out {
        report.save_csv(out)?;
    }
    Ok(report)
}

pub fn predict_file(model_path: &Path, circuit_path: &Path) -> Result<f64> {
    let model = GnnModel::load_checkpoint(model_path)?;
    let text = fs::read_to_string(circuit_path).map_err(|e| Error::io(circuit_path, e))?;
    let circuit = ParameterizedCircuit::from_json(&text)?;
    crate::gnn::predict(&model, &circuit)
}

/// Ranks with ties averaged, 1-based.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of tie-averaged ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Shape("spearman needs two equal-length samples of size >= 2".into()));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Err(Error::Numeric("spearman of a constant sample".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Default file locations used by the CLI for a dataset directory.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}
