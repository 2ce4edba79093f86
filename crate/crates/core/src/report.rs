//! Experiment orchestration: sweeps, conjecture ratio tables and
//! deterministic JSON/CSV artifacts.
//!
//! All emitted JSON is canonicalized: stable key order and every float
//! rounded to 12 significant digits, so identical inputs produce
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{self, BoundReport};
use crate::covariance;
use crate::error::{Error, Result};
use crate::model::{build_block, model_from_json, MatrixModel};
use crate::moments::{self, EntryLaw};
use crate::rng::stream_rng;
use crate::sampler::{self, default_samples, MCEstimate};
use crate::structural::StructuralParams;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Derives an independent base seed for sweep/probe point `index`, so
/// per-sample streams never collide across points.
pub fn point_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, index).random()
}

fn round_sig12(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Recursively rounds every float in a JSON value to 12 significant
/// digits; integers and non-numeric values pass through unchanged.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                let r = round_sig12(n.as_f64().unwrap());
                serde_json::Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
            } else {
                Value::Number(n)
            }
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect())
        }
        other => other,
    }
}

/// Canonical pretty-printed JSON text for a report value.
pub fn to_canonical_json(value: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&canonicalize(v))
        .map_err(|e| Error::Numeric(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub samples: usize,
    pub version: String,
}

fn meta(seed: u64, samples: usize) -> ReportMeta {
    ReportMeta { seed, samples, version: VERSION.into() }
}

fn stripped(mut est: MCEstimate) -> MCEstimate {
    est.values = None;
    est
}

/// One sweep point: the evaluated bounds and the Monte Carlo estimate.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPointBundle {
    pub k: usize,
    pub bounds: BoundReport,
    pub mc: MCEstimate,
}

/// Sweep artifact: axis values, per-point bundles and ratio series
/// `MC mean / bound value` per bound name (null where inapplicable).
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub sweep_id: String,
    pub axis: Vec<usize>,
    pub points: Vec<SweepPointBundle>,
    pub ratios: IndexMap<String, Vec<Option<f64>>>,
}

impl SweepResult {
    /// Ratio table as CSV: one row per axis value, one column per bound.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,mc_mean,mc_std_error");
        for name in self.ratios.keys() {
            out.push_str(&format!(",ratio_{name}"));
        }
        out.push('\n');
        for (i, point) in self.points.iter().enumerate() {
            out.push_str(&format!("{},{},{}", point.k, point.mc.mean, point.mc.std_error));
            for series in self.ratios.values() {
                match series[i] {
                    Some(r) => out.push_str(&format!(",{r}")),
                    None => out.push_str(",na"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Sweeps block models of fixed dimension `n` over block sizes
/// `k_values`, recording all bound expressions, the Monte Carlo norm and
/// the ratio of the MC mean to `sqrt(k) + sqrt(log n)`.
pub fn benchmark_block_sweep(
    n: usize,
    k_values: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<SweepResult> {
    if k_values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one block size".into()));
    }
    if !k_values.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("block sizes must be strictly increasing".into()));
    }
    for &k in k_values {
        if k == 0 || n % k != 0 {
            return Err(Error::Divisibility(format!("k={k} does not divide n={n}")));
        }
    }
    let points: Vec<SweepPointBundle> = k_values
        .iter()
        .enumerate()
        .map(|(i, &k)| -> Result<SweepPointBundle> {
            let model = build_block(n, k)?;
            let ps = point_seed(seed, i as u64);
            let params = StructuralParams::compute(&model, ps)?;
            let bounds = bounds::full_report(&model, &params)?;
            let mc = stripped(sampler::mc_norm(&model, n_samples, ps)?);
            Ok(SweepPointBundle { k, bounds, mc })
        })
        .collect::<Result<_>>()?;

    let mut ratios: IndexMap<String, Vec<Option<f64>>> = IndexMap::new();
    for name in bounds::BOUND_NAMES {
        let series = points
            .iter()
            .map(|pt| {
                let e = pt.bounds.get(name).unwrap();
                if e.applicable && e.value > 0.0 {
                    Some(pt.mc.mean / e.value)
                } else {
                    None
                }
            })
            .collect();
        ratios.insert(name.to_string(), series);
    }
    let block_expr = points
        .iter()
        .map(|pt| {
            let expr = (pt.k as f64).sqrt() + (n as f64).ln().max(1.0).sqrt();
            Some(pt.mc.mean / expr)
        })
        .collect();
    ratios.insert("block_expr".into(), block_expr);

    Ok(SweepResult {
        sweep_id: format!("block_n{n}"),
        axis: k_values.to_vec(),
        points,
        ratios,
    })
}

/// One conjecture-probe row: Monte Carlo truth next to both conjectured
/// two-term expressions; ratio columns are null for degenerate models.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub model_id: String,
    pub n: usize,
    pub mc_norm: f64,
    pub mc_norm_se: f64,
    pub conj1_value: Option<f64>,
    pub conj2_expr: Option<f64>,
    pub row_norm_max: f64,
    pub conj1_ratio: Option<f64>,
    pub conj2_ratio: Option<f64>,
}

/// Evaluates the conjecture expressions against Monte Carlo truth for
/// each model; row `i` uses the base seed `point_seed(seed, i)`.
pub fn conjecture_probe(
    models: &[MatrixModel],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<ProbeRow>> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("probe needs at least one model".into()));
    }
    let mut rows = Vec::with_capacity(models.len());
    for (i, model) in models.iter().enumerate() {
        let ps = point_seed(seed, i as u64);
        let norm = sampler::mc_norm(model, n_samples, ps)?;
        let row_max = sampler::mc_row_norm_max(model, n_samples, ps)?;
        let (conj1_value, conj2_expr) = match model.pattern() {
            Some(vp) => {
                let c1 = bounds::eval_conjecture1(&vp);
                let params = StructuralParams::compute(model, ps)?;
                let max_entry = sampler::mc_max_entry(model, n_samples, ps)?;
                (
                    if c1 > 0.0 { Some(c1) } else { None },
                    Some(params.sigma + max_entry.mean),
                )
            }
            None => (None, None),
        };
        let ratio = |denom: Option<f64>| match denom {
            Some(d) if d > 0.0 => Some(norm.mean / d),
            _ => None,
        };
        rows.push(ProbeRow {
            model_id: format!("{}_{}", model.kind_name(), model.dim()),
            n: model.dim(),
            mc_norm: norm.mean,
            mc_norm_se: norm.std_error,
            conj1_value,
            conj2_expr,
            row_norm_max: row_max.mean,
            conj1_ratio: ratio(conj1_value),
            conj2_ratio: if row_max.mean > 0.0 { Some(norm.mean / row_max.mean) } else { None },
        });
    }
    Ok(rows)
}

/// Probe rows as CSV.
pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut out = String::from(
        "model_id,n,mc_norm,mc_norm_se,conj1_value,conj2_expr,row_norm_max,conj1_ratio,conj2_ratio\n",
    );
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "na".into());
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.model_id,
            r.n,
            r.mc_norm,
            r.mc_norm_se,
            fmt(r.conj1_value),
            fmt(r.conj2_expr),
            r.row_norm_max,
            fmt(r.conj1_ratio),
            fmt(r.conj2_ratio),
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bounds,
    Mc,
    Moments,
    Sweep,
    Covariance,
    Probe,
}

impl Command {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "bounds" => Ok(Command::Bounds),
            "mc" => Ok(Command::Mc),
            "moments" => Ok(Command::Moments),
            "sweep" => Ok(Command::Sweep),
            "covariance" => Ok(Command::Covariance),
            "probe" => Ok(Command::Probe),
            other => Err(Error::InvalidArgument(format!("unknown command {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub samples: Option<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub p: usize,
    pub bins: usize,
    pub k_values: Option<Vec<usize>>,
    pub n_values: Option<Vec<usize>>,
    pub dump_shapes: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            samples: None,
            seed: 0,
            out_dir: PathBuf::from("."),
            p: 2,
            bins: 60,
            k_values: None,
            n_values: None,
            dump_shapes: false,
        }
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Block sizes `4^j` dividing `n`, plus `n` itself.
fn default_k_values(n: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = 1usize;
    while k <= n {
        if n % k == 0 {
            ks.push(k);
        }
        match k.checked_mul(4) {
            Some(next) => k = next,
            None => break,
        }
    }
    if *ks.last().unwrap() != n {
        ks.push(n);
    }
    ks
}

/// Loads a model file, runs one command and writes its artifacts into the
/// output directory; returns the written paths.
pub fn run_from_file(path: &Path, command: Command, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let model = model_from_json(&text)?;
    let n = model.dim();
    let samples = opts.samples.unwrap_or_else(|| default_samples(n));
    let dir = opts.out_dir.as_path();
    let mut written = Vec::new();

    match command {
        Command::Bounds => {
            let params = StructuralParams::compute(&model, opts.seed)?;
            let bounds = bounds::full_report(&model, &params)?;
            let report = json!({
                "meta": meta(opts.seed, 0),
                "structural": params,
                "bounds": bounds,
                "mc": Value::Null,
            });
            written.push(write_artifact(dir, "bounds.json", &to_canonical_json(&report)?)?);
            written.push(write_artifact(dir, "bounds.csv", &bounds.to_csv())?);
        }
        Command::Mc => {
            let params = StructuralParams::compute(&model, opts.seed)?;
            let mut bounds = bounds::full_report(&model, &params)?;
            let norm = stripped(sampler::mc_norm(&model, samples, opts.seed)?);
            let row_max = stripped(sampler::mc_row_norm_max(&model, samples, opts.seed)?);
            let max_entry = stripped(sampler::mc_max_entry(&model, samples, opts.seed)?);
            if model.pattern().is_some() {
                bounds.set_conj2_proxy(row_max.mean, "Monte Carlo estimate of E max row norm");
            }
            let variance = if !model.is_rademacher() && samples >= 50 {
                Some(sampler::mc_variance_check(&model, samples, opts.seed)?)
            } else {
                None
            };
            let esd = sampler::esd_histogram(&model, samples.min(50), opts.bins, opts.seed)?;
            let report = json!({
                "meta": meta(opts.seed, samples),
                "structural": params,
                "bounds": bounds,
                "mc": {
                    "norm": norm,
                    "max_entry": max_entry,
                    "row_norm_max": row_max,
                    "variance_check": variance,
                },
            });
            written.push(write_artifact(dir, "mc.json", &to_canonical_json(&report)?)?);
            written.push(write_artifact(dir, "esd.csv", &esd.to_csv())?);
        }
        Command::Moments => {
            let vp = model.pattern().ok_or_else(|| {
                Error::InvalidArgument("moments command requires an entrywise model".into())
            })?;
            let law = if model.is_rademacher() { EntryLaw::Rademacher } else { EntryLaw::Gaussian };
            let direct = moments::direct_trace_moment(&vp, opts.p, law)?;
            let (shape, compression) = match &model {
                MatrixModel::SparseWigner(g) => {
                    let shape = moments::shape_trace_moment(g, opts.p, law)?;
                    let compression = if opts.p <= 2 {
                        Some(moments::compression_check(g, opts.p)?)
                    } else {
                        None
                    };
                    (Some(shape), compression)
                }
                _ => (None, None),
            };
            let nck = if !model.is_rademacher() {
                Some(moments::nck_moment_check(&model, opts.p)?)
            } else {
                None
            };
            let report = json!({
                "meta": meta(opts.seed, 0),
                "moments": {
                    "direct": direct,
                    "shape": shape,
                    "nck_check": nck,
                    "compression_check": compression,
                },
            });
            written.push(write_artifact(dir, "moments.json", &to_canonical_json(&report)?)?);
            if opts.dump_shapes {
                let csv = moments::shapes_csv(opts.p, true)?;
                written.push(write_artifact(dir, "shapes.csv", &csv)?);
            }
        }
        Command::Sweep => {
            let ks = opts.k_values.clone().unwrap_or_else(|| default_k_values(n));
            let sweep = benchmark_block_sweep(n, &ks, samples, opts.seed)?;
            let report = json!({
                "meta": meta(opts.seed, samples),
                "sweep": &sweep,
            });
            written.push(write_artifact(dir, "sweep.json", &to_canonical_json(&report)?)?);
            written.push(write_artifact(dir, "sweep.csv", &sweep.to_csv())?);
        }
        Command::Covariance => {
            let cm = match &model {
                MatrixModel::Covariance(cm) => cm,
                _ => {
                    return Err(Error::InvalidArgument(
                        "covariance command requires a covariance model".into(),
                    ))
                }
            };
            let n_values = opts.n_values.clone().unwrap_or_else(|| vec![cm.n_samples()]);
            let reps = opts.samples.unwrap_or(100);
            let points = covariance::kl_sweep(cm.sigma(), &n_values, reps, opts.seed)?;
            let report = json!({
                "meta": meta(opts.seed, reps),
                "covariance": &points,
            });
            written.push(write_artifact(dir, "covariance.json", &to_canonical_json(&report)?)?);
            written.push(write_artifact(dir, "covariance.csv", &covariance::sweep_csv(&points))?);
        }
        Command::Probe => {
            let rows = conjecture_probe(std::slice::from_ref(&model), samples, opts.seed)?;
            let report = json!({
                "meta": meta(opts.seed, samples),
                "probe": &rows,
            });
            written.push(write_artifact(dir, "probe.json", &to_canonical_json(&report)?)?);
            written.push(write_artifact(dir, "probe.csv", &probe_csv(&rows))?);
        }
    }
    Ok(written)
}
