use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Scheme};
use super::trial::{run_trial, CsChoice, TrialRecord};
use super::{write_atomic, Accumulator};
use crate::baselines::golden_section_min;
use crate::error::{Error, Result};
use crate::model::SparsityModel;
use crate::ratebound::{rate_threshold, RateQuery};
use crate::seed;

/// Version of the CSV layouts below, recorded in every `.meta.toml` sidecar.
pub const SCHEMA_VERSION: u32 = 1;
pub const TRIAL_HEADER: &str = "seed,scheme,R,b,l,epsilon,mse,status,ms";
pub const SUMMARY_HEADER: &str = "scheme,R,b,l,epsilon,trials,mean_mse,std_err,failure_fraction,a,lambda,status";
pub const RESOLUTION_HEADER: &str = "model,k,k_s,k_t,n,T,epsilon,l,R,u";

/// Aggregate of one `(scheme, R)` point. Infeasible points carry no numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    #[serde(rename = "R")]
    pub rate: f64,
    pub b: usize,
    pub l: Option<u64>,
    pub epsilon: f64,
    pub trials: usize,
    pub mean_mse: Option<f64>,
    pub std_err: Option<f64>,
    pub failure_fraction: Option<f64>,
    pub a: Option<usize>,
    pub lambda: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSweep {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SweepRow>,
}

impl RateSweep {
    pub fn row(&self, scheme: Scheme, rate: f64) -> Option<&SweepRow> {
        self.summary.iter().find(|r| r.scheme == scheme && r.rate == rate)
    }
}

/// Runs every scheme of `cfg.schemes` at every rate. Trials run in parallel
/// with seeds derived from `(master_seed, trial, scheme)`, so results do
/// not depend on scheduling. CS baselines pick `a` (and `λ` for FISTA) by
/// minimizing mean MSE over the first `cs.tune_trials` trials, unless fixed
/// in the config.
pub fn sweep_rate(cfg: &ExperimentConfig, rates: &[f64], trials: usize) -> Result<RateSweep> {
    if rates.is_empty() {
        return Err(Error::Param("rate grid is empty".into()));
    }
    if trials == 0 {
        return Err(Error::Param("need at least one trial per point".into()));
    }
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for &scheme in &cfg.schemes {
        let seeds: Vec<u64> =
            (0..trials as u64).map(|i| seed::trial_seed(cfg.master_seed, i, scheme.as_str())).collect();
        for &rate in rates {
            let mut point = cfg.at_rate(rate).with_scheme(scheme);
            point.validate()?;
            let b = match point.register_bits() {
                Ok(b) => b,
                Err(Error::Infeasible(_)) => {
                    summary.push(infeasible_row(&point, 0));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut choice = None;
            if scheme.is_cs() {
                match tune_cs(&point, &seeds)? {
                    Some(c) => {
                        point.cs.a = Some(c.a);
                        point.cs.lambda = Some(c.lambda);
                        choice = Some(c);
                    }
                    None => {
                        summary.push(infeasible_row(&point, b));
                        continue;
                    }
                }
            }
            let run: Result<Vec<TrialRecord>> = seeds.par_iter().map(|&s| run_trial(&point, s)).collect();
            let recs = match run {
                Ok(r) => r,
                Err(Error::Infeasible(_)) => {
                    summary.push(infeasible_row(&point, b));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let acc: Accumulator = recs.iter().map(|r| r.mse).collect();
            let failures = recs.iter().filter(|r| r.status.is_failure()).count();
            summary.push(SweepRow {
                scheme,
                rate,
                b,
                l: Some(recs[0].l),
                epsilon: point.epsilon,
                trials,
                mean_mse: Some(acc.mean()),
                std_err: Some(acc.std_err()),
                failure_fraction: Some(failures as f64 / trials as f64),
                a: choice.map(|c| c.a),
                lambda: choice.filter(|_| scheme == Scheme::CsFista).map(|c| c.lambda),
                status: "ok".into(),
            });
            records.extend(recs);
        }
    }
    Ok(RateSweep { records, summary })
}

fn infeasible_row(point: &ExperimentConfig, b: usize) -> SweepRow {
    SweepRow {
        scheme: point.scheme,
        rate: point.rate,
        b,
        l: None,
        epsilon: point.epsilon,
        trials: 0,
        mean_mse: None,
        std_err: None,
        failure_fraction: None,
        a: None,
        lambda: None,
        status: "infeasible".into(),
    }
}

fn mean_mse(point: &ExperimentConfig, seeds: &[u64], choice: CsChoice) -> Result<f64> {
    let mut cfg = point.clone();
    cfg.cs.a = Some(choice.a);
    cfg.cs.lambda = Some(choice.lambda);
    let run: Result<Vec<TrialRecord>> = seeds.par_iter().map(|&s| run_trial(&cfg, s)).collect();
    match run {
        Ok(recs) => Ok(recs.iter().map(|r| r.mse).collect::<Accumulator>().mean()),
        // a step that blows up simply loses the search
        Err(Error::Divergence(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Grid search over `a ∈ k..=5k` (feasible values only) and, for FISTA,
/// golden-section search over `log10 λ ∈ [-4, 0]`.
fn tune_cs(point: &ExperimentConfig, seeds: &[u64]) -> Result<Option<CsChoice>> {
    let k = point.model.k();
    let b = point.register_bits()?;
    let tune = match point.cs.tune_trials {
        0 => seeds,
        t => &seeds[..t.min(seeds.len())],
    };
    let grid: Vec<usize> = match point.cs.a {
        Some(a) => vec![a],
        None => (k..=5 * k).collect(),
    };
    let mut best: Option<(f64, CsChoice)> = None;
    for a in grid.into_iter().filter(|a| b / (point.n * a) >= 1) {
        let (lambda, score) = match (point.scheme, point.cs.lambda) {
            (Scheme::CsFista, None) => {
                let mut err = None;
                let (x, fx) = golden_section_min(
                    |x| match mean_mse(point, tune, CsChoice { a, lambda: 10f64.powf(x) }) {
                        Ok(v) => v,
                        Err(e) => {
                            err.get_or_insert(e);
                            f64::INFINITY
                        }
                    },
                    -4.0,
                    0.0,
                    point.cs.golden_iters,
                );
                if let Some(e) = err {
                    return Err(e);
                }
                (10f64.powf(x), fx)
            }
            (_, lambda) => {
                let lambda = lambda.unwrap_or(0.01);
                (lambda, mean_mse(point, tune, CsChoice { a, lambda })?)
            }
        };
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, CsChoice { a, lambda }));
        }
    }
    Ok(best.filter(|(s, _)| s.is_finite()).map(|(_, c)| c))
}

fn to_csv<T: Serialize>(header: &str, rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Trial-level CSV with the fixed header [`TRIAL_HEADER`].
pub fn trial_csv(records: &[TrialRecord]) -> Result<String> {
    to_csv(TRIAL_HEADER, records)
}

pub fn summary_csv(rows: &[SweepRow]) -> Result<String> {
    to_csv(SUMMARY_HEADER, rows)
}

pub fn read_trial_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRIAL_HEADER {
        return Err(Error::Format(format!("unexpected CSV header {:?}", header.join(","))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Schema sidecar describing a CSV file and the run that produced it.
pub(crate) fn meta_toml(kind: &str, header: &str, cfg: Option<&ExperimentConfig>, extra: toml::Table) -> String {
    let mut t = toml::Table::new();
    t.insert("schema_version".into(), (SCHEMA_VERSION as i64).into());
    t.insert("kind".into(), kind.into());
    t.insert("columns".into(), header.split(',').map(toml::Value::from).collect::<Vec<_>>().into());
    t.insert("generator".into(), concat!("dsq-core ", env!("CARGO_PKG_VERSION")).into());
    if let Some(cfg) = cfg {
        t.insert("master_seed".into(), toml::Value::String(cfg.master_seed.to_string()));
        t.insert("n".into(), (cfg.n as i64).into());
        t.insert("T".into(), (cfg.t as i64).into());
        t.insert("gamma".into(), cfg.gamma.into());
        t.insert("epsilon".into(), cfg.epsilon.into());
        t.insert("model".into(), cfg.model.label().into());
        t.insert("topology".into(), cfg.topology.describe().into());
        t.insert("failures".into(), format!("{:?}", cfg.failures).into());
        t.insert("codebook".into(), cfg.codebook.as_str().into());
    }
    t.extend(extra);
    toml::to_string(&t).expect("meta table serializes")
}

/// Writes `<path>` (trials), `<stem>.summary.csv` and `<stem>.meta.toml`,
/// each atomically. Returns the paths written.
pub fn write_sweep(sweep: &RateSweep, cfg: &ExperimentConfig, rates: &[f64], path: &Path) -> Result<Vec<PathBuf>> {
    let summary = sidecar(path, "summary.csv");
    let meta = sidecar(path, "meta.toml");
    let mut extra = toml::Table::new();
    extra.insert("rates".into(), rates.iter().map(|r| toml::Value::from(*r)).collect::<Vec<_>>().into());
    extra
        .insert("schemes".into(), cfg.schemes.iter().map(|s| toml::Value::from(s.as_str())).collect::<Vec<_>>().into());
    extra.insert("summary_columns".into(), SUMMARY_HEADER.split(',').map(toml::Value::from).collect::<Vec<_>>().into());
    write_atomic(path, trial_csv(&sweep.records)?.as_bytes())?;
    write_atomic(&summary, summary_csv(&sweep.summary)?.as_bytes())?;
    write_atomic(&meta, meta_toml("rate-sweep", TRIAL_HEADER, Some(cfg), extra).as_bytes())?;
    Ok(vec![path.to_path_buf(), summary, meta])
}

/// One point of a threshold curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionRow {
    pub model: &'static str,
    pub k: usize,
    pub k_s: Option<usize>,
    pub k_t: Option<usize>,
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub epsilon: f64,
    pub l: usize,
    #[serde(rename = "R")]
    pub rate: f64,
    pub u: usize,
}

/// Rate threshold for every `(model, l)` pair; pure formula evaluation.
pub fn sweep_resolution(
    n: usize,
    t: usize,
    models: &[SparsityModel],
    epsilon: f64,
    l_grid: &[usize],
) -> Result<Vec<ResolutionRow>> {
    if models.is_empty() || l_grid.is_empty() {
        return Err(Error::Param("model list and resolution grid must be nonempty".into()));
    }
    let mut rows = Vec::with_capacity(models.len() * l_grid.len());
    for model in models {
        let query = RateQuery::new(n, t, *model, epsilon)?;
        let (name, k_s, k_t) = match *model {
            SparsityModel::Overall { .. } => ("overall", None, None),
            SparsityModel::Structured { k_s, k_t } => ("structured", Some(k_s), Some(k_t)),
        };
        for &l in l_grid {
            let th = rate_threshold(&query, l)?;
            rows.push(ResolutionRow { model: name, k: model.k(), k_s, k_t, n, t, epsilon, l, rate: th.rate, u: th.u });
        }
    }
    Ok(rows)
}

pub fn resolution_csv(rows: &[ResolutionRow]) -> Result<String> {
    to_csv(RESOLUTION_HEADER, rows)
}

/// Writes a resolution sweep and its `.meta.toml` sidecar atomically.
pub fn write_resolution(rows: &[ResolutionRow], path: &Path) -> Result<Vec<PathBuf>> {
    let meta = sidecar(path, "meta.toml");
    write_atomic(path, resolution_csv(rows)?.as_bytes())?;
    write_atomic(&meta, meta_toml("resolution-sweep", RESOLUTION_HEADER, None, toml::Table::new()).as_bytes())?;
    Ok(vec![path.to_path_buf(), meta])
}
