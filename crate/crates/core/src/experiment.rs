//! Configuration-driven runs: multi-seed simulation, averaging, sweeps,
//! offline verification and the CSV artifacts that tie them together.
//!
//! A config is flat `key = value` text. Every key has a default, so
//! `scheme = cdcrc` alone is a valid config. Recognized keys:
//!
//! ```text
//! scheme        dcrc | cdcrc | u-cdcrc          (cdcrc)
//! alpha         FNR target                      (0.15)
//! capacity      long-term budget C              (1)
//! sensors       K                               (length of `errors`)
//! labels        L                               (10000)
//! steps         T                               (913)
//! rho           D-CRC local step                (0.2)
//! gamma         CD-CRC local step               (0.2)
//! mu            CD-CRC global step              (0.2)
//! delta_offset  delta = mu (1 - alpha) + offset (0.01)
//! theta         D-CRC fixed global threshold    (0.5)
//! block_size    codec block size m              (10)
//! errors        per-sensor error levels         (0.1,0.3,0.5,0.5)
//! dropout       per-sensor dropout, or one value for all (0)
//! relevance     rate of relevant labels         (0.95)
//! scores        score file; replaces the synthetic stream
//! seeds         number of seeds                 (50)
//! seed_base     first seed                      (0)
//! feedback      exact | conservative:<bias>     (exact)
//! output        output directory                (out)
//! ```
//!
//! Numbers in every CSV are printed like C's `%.12g`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::analysis::{verify, BoundReport, Trajectory};
use crate::codec::BlockCodec;
use crate::control::{
    CdcrcController, CdcrcParams, DcrcController, DcrcParams, Scheme, StepOutput, StepRecord,
};
use crate::error::{Error, Result};
use crate::metrics::{HardPrediction, ScoreVector};
use crate::simnet::{ingest_scores, FeedbackChannel, Instance, SensorModel, StreamSpec, SyntheticStream};

/// Error levels of the default "one clearly best sensor" network.
pub const DEFAULT_ERRORS: [f64; 4] = [0.1, 0.3, 0.5, 0.5];

/// Largest block size the codec table tool will print.
pub const MAX_TABLE_BLOCK: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub alpha: f64,
    pub capacity: f64,
    pub labels: usize,
    pub steps: usize,
    pub rho: f64,
    pub gamma: f64,
    pub mu: f64,
    pub delta_offset: f64,
    pub theta: f64,
    pub block_size: usize,
    pub errors: Vec<f64>,
    pub dropout: Vec<f64>,
    pub relevance: f64,
    pub scores: Option<PathBuf>,
    pub seeds: usize,
    pub seed_base: u64,
    pub feedback: FeedbackChannel,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Cdcrc,
            alpha: 0.15,
            capacity: 1.0,
            labels: 10_000,
            steps: 913,
            rho: 0.2,
            gamma: 0.2,
            mu: 0.2,
            delta_offset: 0.01,
            theta: 0.5,
            block_size: 10,
            errors: DEFAULT_ERRORS.to_vec(),
            dropout: vec![0.0],
            relevance: 0.95,
            scores: None,
            seeds: 50,
            seed_base: 0,
            feedback: FeedbackChannel::Exact,
            output: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_num(key, v.trim()))
        .collect()
}

fn parse_feedback(value: &str) -> Result<FeedbackChannel> {
    match value.split_once(':') {
        None if value == "exact" => Ok(FeedbackChannel::Exact),
        Some(("conservative", b)) => Ok(FeedbackChannel::Conservative {
            bias: parse_num("feedback", b.trim())?,
        }),
        _ => Err(Error::config(
            "feedback",
            format!("{value:?} is neither `exact` nor `conservative:<bias>`"),
        )),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_g(v)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parses config text on top of the defaults. Blank lines and `#`
    /// comments are skipped, and values may be quoted.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut sensors = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected `key = value`, found {line:?}"),
            })?;
            let value = value.trim().trim_matches('"');
            match key.trim() {
                "sensors" | "K" => sensors = Some(parse_num::<usize>("sensors", value)?),
                k => cfg.set(k, value)?,
            }
        }
        if let Some(k) = sensors {
            cfg.set_sensors(k, text.lines().any(|l| l.trim_start().starts_with("errors")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, path)
    }

    /// Sets one key. Used by the parser and for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "scheme" => self.scheme = value.parse()?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "capacity" | "C" => self.capacity = parse_num("capacity", value)?,
            "labels" | "L" => self.labels = parse_num("labels", value)?,
            "steps" | "T" => self.steps = parse_num("steps", value)?,
            "rho" => self.rho = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "mu" => self.mu = parse_num(key, value)?,
            "delta_offset" => self.delta_offset = parse_num(key, value)?,
            "theta" => self.theta = parse_num(key, value)?,
            "block_size" | "m" => self.block_size = parse_num("block_size", value)?,
            "errors" => self.errors = parse_list(key, value)?,
            "dropout" => self.dropout = parse_list(key, value)?,
            "relevance" => self.relevance = parse_num(key, value)?,
            "scores" => self.scores = Some(PathBuf::from(value)),
            "seeds" => self.seeds = parse_num(key, value)?,
            "seed_base" => self.seed_base = parse_num(key, value)?,
            "feedback" => self.feedback = parse_feedback(value)?,
            "output" => self.output = PathBuf::from(value),
            "sensors" | "K" => self.set_sensors(parse_num("sensors", value)?, false)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Sizes the synthetic network. Without explicit error levels the first
    /// `k` entries of the default profile are used, padded with its last one.
    fn set_sensors(&mut self, k: usize, explicit_errors: bool) -> Result<()> {
        if k == 0 {
            return Err(Error::config("sensors", "must be positive"));
        }
        if explicit_errors {
            if self.errors.len() != k {
                return Err(Error::config(
                    "sensors",
                    format!("{k} disagrees with {} error levels", self.errors.len()),
                ));
            }
        } else {
            self.errors = (0..k).map(|i| DEFAULT_ERRORS[i.min(3)]).collect();
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.errors.len()
    }

    pub fn delta(&self) -> f64 {
        self.mu * (1.0 - self.alpha) + self.delta_offset
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::config("errors", "at least one sensor is required"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", format!("{} outside [0, 1]", self.alpha)));
        }
        if !(0.0..=k as f64).contains(&self.capacity) {
            return Err(Error::config("capacity", format!("{} outside [0, {k}]", self.capacity)));
        }
        if self.delta_offset.is_nan() || self.delta_offset <= 0.0 {
            return Err(Error::config("delta_offset", "must be positive"));
        }
        if self.steps == 0 {
            return Err(Error::config("steps", "must be positive"));
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds", "must be positive"));
        }
        if self.block_size == 0 || self.block_size > crate::codec::MAX_BLOCK_SIZE {
            return Err(Error::config(
                "block_size",
                format!("{} outside 1..={}", self.block_size, crate::codec::MAX_BLOCK_SIZE),
            ));
        }
        if self.scores.is_none() && !self.labels.is_multiple_of(self.block_size) {
            return Err(Error::config(
                "labels",
                format!("{} is not divisible by block_size {}", self.labels, self.block_size),
            ));
        }
        if self.dropout.len() != 1 && self.dropout.len() != k {
            return Err(Error::config(
                "dropout",
                format!("expected 1 or {k} values, found {}", self.dropout.len()),
            ));
        }
        if let FeedbackChannel::Conservative { bias } = self.feedback {
            if !(0.0..=1.0).contains(&bias) {
                return Err(Error::config("feedback", format!("bias {bias} outside [0, 1]")));
            }
        }
        self.dcrc_params().validate()?;
        self.cdcrc_params().validate(k)?;
        self.stream_spec(0).validate()
    }

    pub fn dcrc_params(&self) -> DcrcParams {
        DcrcParams {
            alpha: self.alpha,
            rho: self.rho,
            theta: self.theta,
            initial_lambda: 0.0,
        }
    }

    pub fn cdcrc_params(&self) -> CdcrcParams {
        CdcrcParams {
            gamma: self.gamma,
            mu: self.mu,
            delta: self.delta(),
            allocation: self.scheme.allocation(),
            ..CdcrcParams::new(self.alpha, self.capacity)
        }
    }

    pub fn stream_spec(&self, seed: u64) -> StreamSpec {
        let mut spec = StreamSpec::new(&self.errors, self.labels, self.steps, self.relevance, seed);
        for (i, s) in spec.sensors.iter_mut().enumerate() {
            *s = SensorModel {
                dropout: self.dropout[i.min(self.dropout.len() - 1)],
                ..*s
            };
        }
        spec
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.seed_base + i).collect()
    }

    /// Normalized `key = value` dump, readable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("scheme", self.scheme.to_string());
        kv("alpha", fmt_g(self.alpha));
        kv("capacity", fmt_g(self.capacity));
        kv("labels", self.labels.to_string());
        kv("steps", self.steps.to_string());
        kv("rho", fmt_g(self.rho));
        kv("gamma", fmt_g(self.gamma));
        kv("mu", fmt_g(self.mu));
        kv("delta_offset", fmt_g(self.delta_offset));
        kv("theta", fmt_g(self.theta));
        kv("block_size", self.block_size.to_string());
        kv("errors", join(&self.errors));
        kv("dropout", join(&self.dropout));
        kv("relevance", fmt_g(self.relevance));
        if let Some(p) = &self.scores {
            kv("scores", p.display().to_string());
        }
        kv("seeds", self.seeds.to_string());
        kv("seed_base", self.seed_base.to_string());
        kv(
            "feedback",
            match self.feedback {
                FeedbackChannel::Exact => "exact".into(),
                FeedbackChannel::Conservative { bias } => format!("conservative:{}", fmt_g(bias)),
            },
        );
        kv("output", self.output.display().to_string());
        s
    }
}

/// Either controller behind one interface.
#[derive(Debug, Clone)]
pub enum Controller {
    Dcrc(DcrcController),
    Cdcrc(CdcrcController),
}

impl Controller {
    pub fn new(cfg: &RunConfig, k: usize) -> Result<Self> {
        Ok(match cfg.scheme {
            Scheme::Dcrc => Controller::Dcrc(DcrcController::new(cfg.dcrc_params(), k)?),
            _ => Controller::Cdcrc(CdcrcController::new(cfg.cdcrc_params(), k)?),
        })
    }

    pub fn step<F>(&mut self, scores: &[ScoreVector], codec: &BlockCodec, feedback: F) -> Result<StepOutput>
    where
        F: FnOnce(&HardPrediction, &[HardPrediction]) -> crate::control::Feedback,
    {
        match self {
            Controller::Dcrc(c) => c.step(scores, codec, feedback),
            Controller::Cdcrc(c) => c.step(scores, codec, feedback),
        }
    }
}

/// Runs one controller over a stream of instances.
pub fn simulate(
    cfg: &RunConfig,
    k: usize,
    instances: impl IntoIterator<Item = Instance>,
) -> Result<Trajectory> {
    let codec = BlockCodec::new(cfg.block_size)?;
    let mut ctl = Controller::new(cfg, k)?;
    let mut records = Vec::with_capacity(cfg.steps);
    for inst in instances.into_iter().take(cfg.steps) {
        // the feedback closure cannot return errors, so lengths are checked first
        if let Some(s) = inst.scores.iter().find(|s| s.len() != inst.truth.len()) {
            return Err(Error::Dimension {
                expected: inst.truth.len(),
                found: s.len(),
            });
        }
        let channel = cfg.feedback;
        let out = ctl.step(&inst.scores, &codec, |v, u| {
            channel
                .feedback(&inst.truth, v, u)
                .expect("lengths checked above")
        })?;
        records.push(out.record);
    }
    Ok(trajectory(cfg, records))
}

fn trajectory(cfg: &RunConfig, records: Vec<StepRecord>) -> Trajectory {
    Trajectory {
        scheme: cfg.scheme,
        alpha: cfg.alpha,
        capacity: cfg.capacity,
        local_step: if cfg.scheme.is_constrained() { cfg.gamma } else { cfg.rho },
        mu: cfg.mu,
        delta: cfg.delta(),
        records,
    }
}

/// One seed of a synthetic run.
pub fn simulate_seed(cfg: &RunConfig, seed: u64) -> Result<Trajectory> {
    let stream = SyntheticStream::new(cfg.stream_spec(seed))?;
    simulate(cfg, cfg.k(), stream)
}

#[cfg(feature = "parallel")]
fn map_seeds<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| f(s)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_seeds<T>(seeds: &[u64], f: impl Fn(u64) -> Result<T>) -> Result<Vec<T>> {
    seeds.iter().map(|&s| f(s)).collect()
}

/// Runs every seed of the config. A score file is deterministic, so it is
/// replayed once and labelled with the first seed.
pub fn run_trajectories(cfg: &RunConfig) -> Result<Vec<(u64, Trajectory)>> {
    cfg.validate()?;
    if let Some(path) = &cfg.scores {
        let file = ingest_scores(path)?;
        if file.instances.len() < cfg.steps {
            log::info!(
                "score file holds {} steps, running all of them",
                file.instances.len()
            );
        }
        let cfg = RunConfig {
            steps: cfg.steps.min(file.instances.len()),
            errors: vec![0.0; file.k],
            ..cfg.clone()
        };
        return Ok(vec![(cfg.seed_base, simulate(&cfg, file.k, file.instances)?)]);
    }
    let seeds = cfg.seed_list();
    let trajs = map_seeds(&seeds, |s| simulate_seed(cfg, s))?;
    Ok(seeds.into_iter().zip(trajs).collect())
}

/// Seed-averaged series at one step. The FNR, load and FPR columns are
/// running time averages; thresholds and weights are instantaneous.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedRow {
    pub t: usize,
    pub avg_fnr: f64,
    pub avg_load: f64,
    pub avg_fpr: f64,
    pub theta: f64,
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn average<'a>(trajs: impl IntoIterator<Item = &'a Trajectory>) -> Result<Vec<AveragedRow>> {
    let trajs: Vec<&Trajectory> = trajs.into_iter().collect();
    let first = trajs.first().ok_or(Error::Empty("trajectory set"))?;
    let (steps, k) = (first.len(), first.k());
    if let Some(bad) = trajs.iter().find(|t| t.len() != steps) {
        return Err(Error::Dimension {
            expected: steps,
            found: bad.len(),
        });
    }
    let n = trajs.len() as f64;
    let mut sums = vec![(0.0, 0.0, 0.0); trajs.len()];
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let mut row = AveragedRow {
            t: i + 1,
            avg_fnr: 0.0,
            avg_load: 0.0,
            avg_fpr: 0.0,
            theta: 0.0,
            lambda: vec![0.0; k],
            beta: vec![0.0; k],
        };
        let t = (i + 1) as f64;
        for (traj, acc) in trajs.iter().zip(&mut sums) {
            let r = &traj.records[i];
            acc.0 += r.fnr;
            acc.1 += r.load();
            acc.2 += r.fpr;
            row.avg_fnr += acc.0 / t / n;
            row.avg_load += acc.1 / t / n;
            row.avg_fpr += acc.2 / t / n;
            row.theta += r.theta / n;
            for j in 0..k {
                row.lambda[j] += r.lambda[j] / n;
                row.beta[j] += r.weights[j] / n;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Formats like C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    const P: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn trajectory_header(k: usize) -> String {
    let mut h = String::from("t,fnr,fnr_feedback,fpr,theta,theta_corrected,eta");
    for name in ["lambda", "beta", "cost", "capacity", "local_fpr"] {
        for j in 1..=k {
            let _ = write!(h, ",{name}_{j}");
        }
    }
    h
}

pub fn write_trajectory(mut w: impl Write, traj: &Trajectory) -> Result<()> {
    writeln!(w, "{}", trajectory_header(traj.k()))?;
    for r in &traj.records {
        let mut line = format!(
            "{},{},{},{},{},{},{}",
            r.t,
            fmt_g(r.fnr),
            fmt_g(r.fnr_feedback),
            fmt_g(r.fpr),
            fmt_g(r.theta),
            fmt_g(r.theta_corrected),
            fmt_g(r.eta)
        );
        for col in [&r.lambda, &r.weights, &r.cost, &r.capacity, &r.local_fpr] {
            for v in col {
                line.push(',');
                line.push_str(&fmt_g(*v));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Reads a trajectory CSV written by [`write_trajectory`]; the run
/// parameters come from `cfg`.
pub fn read_trajectory(reader: impl BufRead, path: &Path, cfg: &RunConfig) -> Result<Trajectory> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| err(1, "missing header".into()))??;
    let cols = header.split(',').count();
    if cols < 7 || (cols - 7) % 5 != 0 {
        return Err(err(1, format!("unexpected header with {cols} columns")));
    }
    let k = (cols - 7) / 5;
    if header != trajectory_header(k) {
        return Err(err(1, "unexpected header".into()));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(n, format!("bad number: {e}")))?;
        if v.len() != cols {
            return Err(err(n, format!("expected {cols} fields, found {}", v.len())));
        }
        if v[0].fract() != 0.0 || v[0] < 1.0 {
            return Err(err(n, format!("bad step index {}", v[0])));
        }
        let block = |b: usize| v[7 + b * k..7 + (b + 1) * k].to_vec();
        records.push(StepRecord {
            t: v[0] as usize,
            fnr: v[1],
            fnr_feedback: v[2],
            fpr: v[3],
            theta: v[4],
            theta_corrected: v[5],
            eta: v[6],
            lambda: block(0),
            weights: block(1),
            cost: block(2),
            capacity: block(3),
            local_fpr: block(4),
        });
    }
    if records.is_empty() {
        return Err(err(1, "no data rows".into()));
    }
    Ok(trajectory(cfg, records))
}

pub fn write_average(mut w: impl Write, rows: &[AveragedRow]) -> Result<()> {
    let k = rows.first().map_or(0, |r| r.lambda.len());
    let mut header = String::from("t,avg_fnr,avg_load,avg_fpr,theta");
    for name in ["lambda", "beta"] {
        for j in 1..=k {
            let _ = write!(header, ",{name}_{j}");
        }
    }
    writeln!(w, "{header}")?;
    for r in rows {
        let mut line = format!(
            "{},{},{},{},{}",
            r.t,
            fmt_g(r.avg_fnr),
            fmt_g(r.avg_load),
            fmt_g(r.avg_fpr),
            fmt_g(r.theta)
        );
        for v in r.lambda.iter().chain(&r.beta) {
            line.push(',');
            line.push_str(&fmt_g(*v));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_bounds(mut w: impl Write, reports: &[(u64, BoundReport)]) -> Result<()> {
    writeln!(w, "seed,id,lhs,rhs,slack,satisfied,step,note")?;
    for (seed, report) in reports {
        for e in &report.entries {
            writeln!(
                w,
                "{seed},{},{},{},{},{},{},{}",
                e.id,
                fmt_g(e.lhs),
                fmt_g(e.rhs),
                fmt_g(e.slack()),
                e.satisfied,
                e.step.map(|s| s.to_string()).unwrap_or_default(),
                e.note.as_deref().unwrap_or("").replace(',', ";")
            )?;
        }
    }
    Ok(())
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<(u64, BoundReport)>,
    pub average: Vec<AveragedRow>,
}

impl RunSummary {
    pub fn all_satisfied(&self) -> bool {
        self.reports.iter().all(|(_, r)| r.all_satisfied())
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub const AVERAGE_FILE: &str = "average.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";
pub const CONFIG_FILE: &str = "run.cfg";

pub fn seed_file(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

/// Runs every seed and writes `run.cfg`, `seed_<s>.csv`, `average.csv` and
/// `bounds.csv` into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let trajs = run_trajectories(cfg)?;
    let dir = &cfg.output;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_text())?;
    let mut reports = Vec::with_capacity(trajs.len());
    for (seed, traj) in &trajs {
        let mut w = create(&dir.join(seed_file(*seed)))?;
        write_trajectory(&mut w, traj)?;
        w.flush()?;
        reports.push((*seed, verify(traj, cfg.theta)?));
    }
    let average = average(trajs.iter().map(|(_, t)| t))?;
    let mut w = create(&dir.join(AVERAGE_FILE))?;
    write_average(&mut w, &average)?;
    w.flush()?;
    let mut w = create(&dir.join(BOUNDS_FILE))?;
    write_bounds(&mut w, &reports)?;
    w.flush()?;
    Ok(RunSummary { reports, average })
}

/// Re-reads a run directory and re-evaluates every check.
pub fn verify_dir(dir: impl AsRef<Path>) -> Result<Vec<(u64, BoundReport)>> {
    let dir = dir.as_ref();
    let cfg = RunConfig::from_file(dir.join(CONFIG_FILE))?;
    let mut files: Vec<(u64, PathBuf)> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            let seed = name.strip_prefix("seed_")?.strip_suffix(".csv")?.parse().ok()?;
            Some((seed, e.path()))
        })
        .collect();
    if files.is_empty() {
        return Err(Error::Empty("trajectory files"));
    }
    files.sort();
    files
        .into_iter()
        .map(|(seed, path)| {
            let reader = BufReader::new(fs::File::open(&path)?);
            let traj = read_trajectory(reader, &path, &cfg)?;
            Ok((seed, verify(&traj, cfg.theta)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    Capacity,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepAxis::Alpha),
            "capacity" | "C" => Ok(SweepAxis::Capacity),
            other => Err(Error::config("axis", format!("{other:?} is neither alpha nor capacity"))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Capacity => "capacity",
        })
    }
}

/// Final time-averaged metrics of one (scheme, value) cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub value: f64,
    pub fnr: f64,
    pub load: f64,
    pub fpr: f64,
    pub bounds_ok: bool,
}

/// Runs every scheme at every value of the axis; the config's own scheme
/// is ignored.
pub fn sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("values", "at least one value is required"));
    }
    let mut rows = Vec::new();
    for &value in values {
        for scheme in Scheme::ALL {
            let mut c = cfg.clone();
            c.scheme = scheme;
            match axis {
                SweepAxis::Alpha => c.alpha = value,
                SweepAxis::Capacity => c.capacity = value,
            }
            let trajs = run_trajectories(&c)?;
            let bounds_ok = trajs
                .iter()
                .map(|(_, t)| verify(t, c.theta).map(|r| r.all_satisfied()))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .all(|ok| ok);
            let avg = average(trajs.iter().map(|(_, t)| t))?;
            let last = avg.last().expect("nonempty run");
            rows.push(SweepRow {
                scheme,
                value,
                fnr: last.avg_fnr,
                load: last.avg_load,
                fpr: last.avg_fpr,
                bounds_ok,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep(mut w: impl Write, axis: SweepAxis, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "scheme,{axis},fnr,load,fpr,bounds_ok")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.scheme,
            fmt_g(r.value),
            fmt_g(r.fnr),
            fmt_g(r.load),
            fmt_g(r.fpr),
            r.bounds_ok
        )?;
    }
    Ok(())
}

fn parse_block(bits: &str) -> Result<Vec<bool>> {
    bits.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::config("block", format!("unexpected character {other:?}"))),
        })
        .collect()
}

fn block_string(block: &[bool]) -> String {
    block.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Rank and codeword length of one block given as a 0/1 string.
pub fn codec_rank(bits: &str) -> Result<(u32, u32)> {
    let block = parse_block(bits.trim())?;
    let codec = BlockCodec::new(block.len())?;
    let rank = codec.rank_of_block(&block)?;
    Ok((rank, codec.codeword_length(rank)?))
}

/// Normalized cost of a decision vector, read as 0/1 characters with
/// whitespace and commas ignored.
pub fn codec_cost(text: &str, block_size: usize) -> Result<f64> {
    let bits: String = text.chars().filter(|c| !c.is_whitespace() && *c != ',').collect();
    let v = HardPrediction::new(parse_block(&bits)?);
    if v.is_empty() {
        return Err(Error::Empty("decision vector"));
    }
    BlockCodec::new(block_size)?.cost(&v)
}

/// `(block, rank, length)` for every block of size `m`, in rank order.
pub fn codec_table(m: usize) -> Result<Vec<(String, u32, u32)>> {
    if m > MAX_TABLE_BLOCK {
        return Err(Error::config(
            "m",
            format!("{m} exceeds the table limit of {MAX_TABLE_BLOCK}"),
        ));
    }
    let codec = BlockCodec::new(m)?;
    (0..codec.table_len() as u32)
        .map(|r| Ok((block_string(&codec.block_of_rank(r)?), r, codec.codeword_length(r)?)))
        .collect()
}
