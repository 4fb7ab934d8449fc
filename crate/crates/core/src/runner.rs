//! Parallel Monte Carlo over circuit realizations, aggregation, and the
//! CSV record / aggregate / plot-data formats.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{evolve_and_snapshot, purity_and_renyi2, reduced_density_matrix_a, CircuitConfig, PureState};
use crate::ensemble::{delta_k, frame_potential, moment_operator, project};
use crate::error::{Error, Result};
use crate::randmat::RngStream;
use crate::stats::Moments;
use crate::theory;

pub const RECORD_HEADER: &str = "realization,T,k,delta_k,frame_potential,purity,S2,discarded_mass";
pub const AGGREGATE_HEADER: &str =
    "T,k,mean_delta,rms_delta,stderr,n,theory_f_ratio,theory_haar_floor,theory_purity";
const MONOTONE_TOL: f64 = 1e-9;

/// One `(realization, T, k)` measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub realization: u64,
    #[serde(rename = "T")]
    pub t: usize,
    pub k: usize,
    pub delta_k: f64,
    pub frame_potential: f64,
    pub purity: f64,
    #[serde(rename = "S2")]
    pub s2: f64,
    pub discarded_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    #[serde(rename = "T")]
    pub t: usize,
    pub k: usize,
    pub mean_delta: f64,
    pub rms_delta: f64,
    pub stderr: f64,
    pub n: usize,
    pub theory_f_ratio: f64,
    pub theory_haar_floor: f64,
    pub theory_purity: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub realizations: usize,
    pub failed: usize,
    pub records: usize,
    /// Records where `Delta^(k) < Delta^(k-1) - 1e-9`.
    pub monotonicity_violations: usize,
}

/// Measures every `k = 1..=k_max` on one snapshot.
pub fn measure_snapshot(realization: u64, t: usize, state: &PureState, k_max: usize) -> Result<Vec<RunRecord>> {
    let rho = reduced_density_matrix_a(state);
    let (purity, s2) = purity_and_renyi2(&rho)?;
    let ens = project(state)?;
    (1..=k_max)
        .map(|k| {
            let mop = moment_operator(&ens, k)?;
            let f = frame_potential(&mop);
            Ok(RunRecord {
                realization,
                t,
                k,
                delta_k: delta_k(&mop)?,
                frame_potential: f,
                purity,
                s2,
                discarded_mass: ens.discarded_mass(),
            })
        })
        .collect()
}

/// Runs one realization on stream `realization` of the master seed.
pub fn run_realization(cfg: &CircuitConfig, realization: u64) -> Result<Vec<RunRecord>> {
    let mut rng = RngStream::new(cfg.master_seed, realization);
    let mut out = Vec::with_capacity((cfg.t_max + 1) * cfg.k_max);
    evolve_and_snapshot(cfg, &mut rng, |t, state| {
        out.extend(measure_snapshot(realization, t, state, cfg.k_max)?);
        Ok(())
    })?;
    Ok(out)
}

/// All realizations in parallel; records sorted by `(realization, T, k)`,
/// so output is independent of the worker count.
pub fn run_experiment(cfg: &CircuitConfig) -> Result<(Vec<RunRecord>, RunSummary)> {
    cfg.validate()?;
    let results: Vec<(u64, Result<Vec<RunRecord>>)> = (0..cfg.n_realizations as u64)
        .into_par_iter()
        .map(|r| (r, run_realization(cfg, r)))
        .collect();
    let mut records = Vec::with_capacity(cfg.n_realizations * (cfg.t_max + 1) * cfg.k_max);
    let mut failed = 0;
    for (r, res) in results {
        match res {
            Ok(recs) => records.extend(recs),
            Err(e) => {
                warn!("realization {r} failed: {e}");
                failed += 1;
            }
        }
    }
    if failed * 100 > cfg.n_realizations {
        return Err(Error::TooManyFailures { failed, total: cfg.n_realizations });
    }
    records.sort_by_key(|r| (r.realization, r.t, r.k));
    let summary = RunSummary {
        realizations: cfg.n_realizations,
        failed,
        records: records.len(),
        monotonicity_violations: count_monotonicity_violations(&records),
    };
    Ok((records, summary))
}

/// Counts `(realization, T, k)` records with `Delta^(k) < Delta^(k-1) - tol`;
/// expects records sorted by `(realization, T, k)`.
pub fn count_monotonicity_violations(records: &[RunRecord]) -> usize {
    records
        .windows(2)
        .filter(|w| {
            w[0].realization == w[1].realization
                && w[0].t == w[1].t
                && w[1].k == w[0].k + 1
                && w[1].delta_k < w[0].delta_k - MONOTONE_TOL
        })
        .count()
}

/// Per-depth purity statistics across realizations (one sample per
/// realization and depth).
pub fn purity_by_depth(records: &[RunRecord]) -> BTreeMap<usize, Moments> {
    let mut out: BTreeMap<usize, Moments> = BTreeMap::new();
    for r in records.iter().filter(|r| r.k == 1) {
        out.entry(r.t).or_default().push(r.purity);
    }
    out
}

/// Per-cell statistics of `Delta^(k)`.
pub fn delta_moments(records: &[RunRecord]) -> BTreeMap<(usize, usize), Moments> {
    let mut cells: BTreeMap<(usize, usize), Moments> = BTreeMap::new();
    for r in records {
        cells.entry((r.t, r.k)).or_default().push(r.delta_k);
    }
    cells
}

/// Mean / r.m.s. / standard error of `Delta^(k)` for every `(T, k)` cell
/// of `cfg`, with theory reference columns.
pub fn aggregate(records: &[RunRecord], cfg: &CircuitConfig) -> Result<Vec<AggregateRecord>> {
    let cells = delta_moments(records);
    let d_b = cfg.bath_dim()?;
    let mut out = Vec::with_capacity((cfg.t_max + 1) * cfg.k_max);
    let mut missing = Vec::new();
    for t in 0..=cfg.t_max {
        for k in 1..=cfg.k_max {
            match cells.get(&(t, k)) {
                Some(m) if m.n >= 2 => out.push(AggregateRecord {
                    t,
                    k,
                    mean_delta: m.mean(),
                    rms_delta: m.rms(),
                    stderr: m.stderr(),
                    n: m.n,
                    theory_f_ratio: theory::f_ratio(k, cfg.d_a),
                    theory_haar_floor: theory::haar_baseline_delta(k, cfg.d_a, d_b),
                    theory_purity: theory::purity_theory(t, cfg.d_a, cfg.d_b1),
                }),
                Some(m) => missing.push(format!("(T={t}, k={k}): {} realization(s)", m.n)),
                None => missing.push(format!("(T={t}, k={k}): empty")),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingData(missing.join("; ")));
    }
    Ok(out)
}

/// Run metadata written as `# key: value` comment lines ahead of a CSV body.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub config: CircuitConfig,
    pub git: String,
    pub extra: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(config: CircuitConfig) -> Self {
        Self { config, git: git_describe().to_string(), extra: Vec::new() }
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# config: {}", serde_json::to_string(&self.config)?)?;
        writeln!(w, "# git: {}", self.git)?;
        writeln!(w, "# seed: {}", self.config.master_seed)?;
        for (k, v) in &self.extra {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }

    fn parse(lines: &[String]) -> Result<Self> {
        let mut config = None;
        let mut git = String::new();
        let mut extra = Vec::new();
        for line in lines {
            let body = line.trim_start_matches('#').trim_start();
            let (key, value) = body
                .split_once(": ")
                .ok_or_else(|| Error::InvalidArgument(format!("malformed header line {line:?}")))?;
            match key {
                "config" => config = Some(serde_json::from_str(value)?),
                "git" => git = value.to_string(),
                "seed" => {}
                _ => extra.push((key.to_string(), value.to_string())),
            }
        }
        let config = config.ok_or_else(|| Error::MissingData("no '# config:' header".into()))?;
        Ok(Self { config, git, extra })
    }
}

pub fn git_describe() -> &'static str {
    option_env!("DEEPTHERMAL_GIT_DESCRIBE").unwrap_or("unknown")
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(rdr.headers()?, RECORD_HEADER)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn check_header(found: &csv::StringRecord, want: &str) -> Result<()> {
    let found = found.iter().collect::<Vec<_>>().join(",");
    if found != want {
        return Err(Error::InvalidArgument(format!("unexpected header {found:?}, want {want:?}")));
    }
    Ok(())
}

/// Splits leading `#` lines from the CSV body.
fn split_comments(path: &Path) -> Result<(Vec<String>, String)> {
    let f = BufReader::new(fs::File::open(path)?);
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in f.lines() {
        let line = line?;
        if body.is_empty() && line.starts_with('#') {
            comments.push(line);
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    Ok((comments, body))
}

pub fn write_aggregate(path: &Path, aggs: &[AggregateRecord], prov: &Provenance) -> Result<()> {
    let mut f = fs::File::create(path)?;
    prov.write_to(&mut f)?;
    let mut w = csv::Writer::from_writer(f);
    for a in aggs {
        w.serialize(a)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate(path: &Path) -> Result<(Provenance, Vec<AggregateRecord>)> {
    let (comments, body) = split_comments(path)?;
    let prov = Provenance::parse(&comments)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    check_header(rdr.headers()?, AGGREGATE_HEADER)?;
    let rows = rdr.deserialize().map(|r| r.map_err(Error::from)).collect::<Result<Vec<_>>>()?;
    Ok((prov, rows))
}

/// Plot panels: `a`-`c` are `Delta^(k)` against depth, `d`-`f` are
/// `Delta^(k) / Delta^(1)` against `k` at three chosen depths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Panel {
    /// Mean `Delta^(k)(T)`, one column per `k`.
    A,
    /// r.m.s. `Delta^(k)(T)` with the Haar-state floor per `k`.
    B,
    /// Long format `(T, k)` mean with standard error and `f(k) Delta^(1)`.
    C,
    D,
    E,
    F,
}

impl FromStr for Panel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "a" => Panel::A,
            "b" => Panel::B,
            "c" => Panel::C,
            "d" => Panel::D,
            "e" => Panel::E,
            "f" => Panel::F,
            other => return Err(Error::InvalidArgument(format!("unknown panel id {other:?}"))),
        })
    }
}

impl Panel {
    pub fn id(self) -> char {
        match self {
            Panel::A => 'a',
            Panel::B => 'b',
            Panel::C => 'c',
            Panel::D => 'd',
            Panel::E => 'e',
            Panel::F => 'f',
        }
    }

    fn ratio_slot(self) -> Option<usize> {
        match self {
            Panel::D => Some(0),
            Panel::E => Some(1),
            Panel::F => Some(2),
            _ => None,
        }
    }
}

pub fn parse_panels(list: &str) -> Result<Vec<Panel>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(Panel::from_str).collect()
}

/// Default ratio-panel depths, clipped to `t_max`.
pub fn default_ratio_times(t_max: usize) -> [usize; 3] {
    [2.min(t_max), 4.min(t_max), 8.min(t_max)]
}

/// A parsed plot-data file.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotTable {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn write_plot_table(path: &Path, table: &PlotTable) -> Result<()> {
    let mut f = fs::File::create(path)?;
    table.provenance.write_to(&mut f)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plot_table(path: &Path) -> Result<PlotTable> {
    let (comments, body) = split_comments(path)?;
    let provenance = Provenance::parse(&comments)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let columns = rdr.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(PlotTable { provenance, columns, rows })
}

/// Builds the table of one panel.
pub fn panel_table(
    panel: Panel,
    aggs: &[AggregateRecord],
    prov: &Provenance,
    ratio_times: &[usize; 3],
) -> Result<PlotTable> {
    if aggs.is_empty() {
        return Err(Error::MissingData("no aggregate rows".into()));
    }
    let cells: BTreeMap<(usize, usize), &AggregateRecord> = aggs.iter().map(|a| ((a.t, a.k), a)).collect();
    let ts: Vec<usize> = {
        let mut v: Vec<usize> = aggs.iter().map(|a| a.t).collect();
        v.dedup();
        v.sort_unstable();
        v.dedup();
        v
    };
    let k_max = aggs.iter().map(|a| a.k).max().unwrap_or(1);
    let get = |t: usize, k: usize| cells.get(&(t, k)).copied();
    let mut provenance = prov.clone();
    provenance.extra.push(("panel".into(), panel.id().to_string()));

    let (columns, rows): (Vec<String>, Vec<Vec<f64>>) = match panel {
        Panel::A => {
            let mut cols = vec!["T".to_string()];
            cols.extend((1..=k_max).map(|k| format!("mean_delta_k{k}")));
            let rows = ts
                .iter()
                .map(|&t| {
                    let mut r = vec![t as f64];
                    r.extend((1..=k_max).map(|k| get(t, k).map_or(f64::NAN, |a| a.mean_delta)));
                    r
                })
                .collect();
            (cols, rows)
        }
        Panel::B => {
            let mut cols = vec!["T".to_string()];
            cols.extend((1..=k_max).map(|k| format!("rms_delta_k{k}")));
            cols.extend((1..=k_max).map(|k| format!("haar_floor_k{k}")));
            let rows = ts
                .iter()
                .map(|&t| {
                    let mut r = vec![t as f64];
                    r.extend((1..=k_max).map(|k| get(t, k).map_or(f64::NAN, |a| a.rms_delta)));
                    r.extend((1..=k_max).map(|k| get(t, k).map_or(f64::NAN, |a| a.theory_haar_floor)));
                    r
                })
                .collect();
            (cols, rows)
        }
        Panel::C => {
            let cols = ["T", "k", "mean_delta", "stderr", "predicted_delta"].map(String::from).to_vec();
            let rows = aggs
                .iter()
                .map(|a| {
                    let d1 = get(a.t, 1).map_or(f64::NAN, |b| b.mean_delta);
                    vec![a.t as f64, a.k as f64, a.mean_delta, a.stderr, a.theory_f_ratio * d1]
                })
                .collect();
            (cols, rows)
        }
        Panel::D | Panel::E | Panel::F => {
            let t = ratio_times[panel.ratio_slot().expect("ratio panel")];
            let d1 = get(t, 1).ok_or_else(|| Error::MissingData(format!("no k = 1 cell at T = {t}")))?;
            provenance.extra.push(("T".into(), t.to_string()));
            let cols = ["k", "ratio", "theory_f_ratio", "haar_ratio"].map(String::from).to_vec();
            let rows = (1..=k_max)
                .filter_map(|k| get(t, k))
                .map(|a| {
                    vec![
                        a.k as f64,
                        a.mean_delta / d1.mean_delta,
                        a.theory_f_ratio,
                        a.theory_haar_floor / d1.theory_haar_floor,
                    ]
                })
                .collect();
            (cols, rows)
        }
    };
    Ok(PlotTable { provenance, columns, rows })
}

/// Writes `panel_<id>.csv` for every requested panel into `out_dir`.
pub fn emit_plot_data(
    aggs: &[AggregateRecord],
    prov: &Provenance,
    panels: &[Panel],
    ratio_times: &[usize; 3],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if aggs.is_empty() {
        return Err(Error::MissingData("no aggregate rows".into()));
    }
    fs::create_dir_all(out_dir)?;
    panels
        .iter()
        .map(|&p| {
            let table = panel_table(p, aggs, prov, ratio_times)?;
            let path = out_dir.join(format!("panel_{}.csv", p.id()));
            write_plot_table(&path, &table)?;
            Ok(path)
        })
        .collect()
}

/// File-level configuration mirroring the `run` flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFileConfig {
    #[serde(rename = "dA")]
    pub d_a: Option<usize>,
    #[serde(rename = "dB1")]
    pub d_b1: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<u32>,
    pub q: Option<usize>,
    pub tmax: Option<usize>,
    pub kmax: Option<usize>,
    pub realizations: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunFileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: RunFileConfig) -> Self {
        Self {
            d_a: over.d_a.or(self.d_a),
            d_b1: over.d_b1.or(self.d_b1),
            l: over.l.or(self.l),
            q: over.q.or(self.q),
            tmax: over.tmax.or(self.tmax),
            kmax: over.kmax.or(self.kmax),
            realizations: over.realizations.or(self.realizations),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
        }
    }

    /// Resolves to a circuit config; unset fields take the desk-scale
    /// defaults `d_a = d_b1 = 2`, `L = 12`, `T_max = 20`, `k_max = 7`,
    /// 500 realizations.
    pub fn resolve(&self) -> Result<CircuitConfig> {
        let d_a = self.d_a.unwrap_or(2);
        let d_b1 = self.d_b1.unwrap_or(2);
        let q = match (self.q, self.l) {
            (Some(_), Some(_)) => return Err(Error::InvalidArgument("give either L or q, not both".into())),
            (Some(q), None) => q,
            (None, l) => {
                let l = l.unwrap_or(12);
                if !(2..=62).contains(&l) {
                    return Err(Error::InvalidArgument(format!("L = {l} must lie in 2..=62")));
                }
                1usize << (l - 2)
            }
        };
        let cfg = CircuitConfig {
            d_a,
            d_b1,
            q,
            t_max: self.tmax.unwrap_or(20),
            k_max: self.kmax.unwrap_or(7),
            n_realizations: self.realizations.unwrap_or(500),
            master_seed: self.seed.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
