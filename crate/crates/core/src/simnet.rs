//! Synthetic sensor-network streams, score-file ingestion and the feedback
//! channel.
//!
//! A sensor with error level `e` scores a relevant label `(1 - e) + e u` and an
//! irrelevant one `u` with probability `e`, else `0`, where `u` is uniform on
//! `[0, 1)` and drawn independently per label. A sensor with dropout fraction
//! `d` additionally misses a contiguous (cyclic) window of `round(d L)` labels
//! at a random offset per instance; those labels score plain `u`. Without
//! dropout and for `lambda` in `(0, 1)` the expected local FPR is
//! `e (1 - lambda)` and the expected local FNR is
//! `clamp((lambda - 1 + e) / e, 0, 1)`, which rises continuously from zero at
//! `lambda = 1 - e`.
//!
//! Score file format (UTF-8, LF, comma-separated):
//!
//! ```text
//! K,L,T
//! y_1,...,y_L          <- instance 1 truth, binary
//! s_11,...,s_1L        <- sensor 1 scores
//! ...
//! s_K1,...,s_KL        <- sensor K scores
//! y_1,...,y_L          <- instance 2
//! ...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::Feedback;
use crate::error::{Error, Result};
use crate::metrics::{fnr, fpr, local_fpr, HardPrediction, LabelVector, ScoreVector};

/// Quality model of one synthetic sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    /// Noise level: the probability that an irrelevant label scores uniform
    /// noise, and the spread of relevant scores below one.
    pub error_level: f64,
    /// Fraction of labels outside the sensor's field of view.
    pub dropout: f64,
}

impl SensorModel {
    pub fn new(error_level: f64) -> Self {
        Self {
            error_level,
            dropout: 0.0,
        }
    }

    /// Probability that an irrelevant label is scored as noise.
    pub fn noise_probability(&self) -> f64 {
        self.dropout + (1.0 - self.dropout) * self.error_level
    }

    /// Expected local FPR at threshold `lambda`, ignoring the score clamp.
    pub fn expected_local_fpr(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            1.0
        } else {
            self.noise_probability() * (1.0 - lambda.min(1.0))
        }
    }

    /// Expected local FNR at threshold `lambda`, ignoring the score clamp.
    pub fn expected_local_fnr(&self, lambda: f64) -> f64 {
        let lambda = lambda.clamp(0.0, 1.0);
        let e = self.error_level;
        let observed = if e == 0.0 {
            if lambda >= 1.0 { 1.0 } else { 0.0 }
        } else {
            ((lambda - 1.0 + e) / e).clamp(0.0, 1.0)
        };
        self.dropout * lambda + (1.0 - self.dropout) * observed
    }
}

/// Parameters of a synthetic stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub sensors: Vec<SensorModel>,
    pub labels: usize,
    pub steps: usize,
    /// Bernoulli rate of relevant labels.
    pub relevance: f64,
    pub seed: u64,
}

impl StreamSpec {
    pub fn new(error_levels: &[f64], labels: usize, steps: usize, relevance: f64, seed: u64) -> Self {
        Self {
            sensors: error_levels.iter().map(|&e| SensorModel::new(e)).collect(),
            labels,
            steps,
            relevance,
            seed,
        }
    }

    pub fn k(&self) -> usize {
        self.sensors.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors.is_empty() {
            return Err(Error::config("errors", "at least one sensor is required"));
        }
        if self.labels == 0 {
            return Err(Error::config("labels", "must be positive"));
        }
        if !(self.relevance > 0.0 && self.relevance < 1.0) {
            return Err(Error::config(
                "relevance",
                format!("{} outside (0, 1)", self.relevance),
            ));
        }
        for (k, s) in self.sensors.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.error_level) {
                return Err(Error::config(
                    "errors",
                    format!("sensor {} error level {} outside [0, 1]", k + 1, s.error_level),
                ));
            }
            if !(0.0..=1.0).contains(&s.dropout) {
                return Err(Error::config(
                    "dropout",
                    format!("sensor {} dropout {} outside [0, 1]", k + 1, s.dropout),
                ));
            }
        }
        Ok(())
    }
}

/// One time instant: ground truth plus every sensor's scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub truth: LabelVector,
    pub scores: Vec<ScoreVector>,
}

/// Independent random substreams: one for the labels and one per sensor, so
/// adding a sensor leaves the draws of the others unchanged.
#[derive(Debug, Clone)]
pub struct StreamRngs {
    labels: ChaCha8Rng,
    sensors: Vec<ChaCha8Rng>,
}

impl StreamRngs {
    pub fn new(seed: u64, k: usize) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            labels: stream(0),
            sensors: (1..=k as u64).map(stream).collect(),
        }
    }
}

/// Draws one instance.
pub fn generate_instance(rngs: &mut StreamRngs, spec: &StreamSpec) -> Instance {
    let len = spec.labels;
    let truth: Vec<bool> = (0..len)
        .map(|_| rngs.labels.gen::<f64>() < spec.relevance)
        .collect();
    let scores = spec
        .sensors
        .iter()
        .zip(&mut rngs.sensors)
        .map(|(model, rng)| {
            let window = (model.dropout * len as f64).round() as usize;
            let start = if window > 0 { rng.gen_range(0..len) } else { 0 };
            let hidden = |l: usize| window > 0 && (l + len - start) % len < window;
            let raw = truth
                .iter()
                .enumerate()
                .map(|(l, &y)| {
                    let flip: f64 = rng.gen();
                    let noise: f64 = rng.gen();
                    if hidden(l) {
                        noise
                    } else if y {
                        1.0 - model.error_level + model.error_level * noise
                    } else if flip < model.error_level {
                        noise
                    } else {
                        0.0
                    }
                })
                .collect();
            ScoreVector::clamped(raw)
        })
        .collect();
    Instance {
        truth: LabelVector::new(truth).expect("label count validated"),
        scores,
    }
}

/// Deterministic synthetic stream of `spec.steps` instances.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    spec: StreamSpec,
    rngs: StreamRngs,
    emitted: usize,
}

impl SyntheticStream {
    pub fn new(spec: StreamSpec) -> Result<Self> {
        spec.validate()?;
        let rngs = StreamRngs::new(spec.seed, spec.k());
        Ok(Self {
            spec,
            rngs,
            emitted: 0,
        })
    }

    pub fn spec(&self) -> &StreamSpec {
        &self.spec
    }
}

impl Iterator for SyntheticStream {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        if self.emitted >= self.spec.steps {
            return None;
        }
        self.emitted += 1;
        Some(generate_instance(&mut self.rngs, &self.spec))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.spec.steps - self.emitted;
        (left, Some(left))
    }
}

/// Contents of a score file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub k: usize,
    pub labels: usize,
    pub instances: Vec<Instance>,
}

/// Reads a score file from disk. Scores above `1 - SCORE_EPSILON` are clamped
/// and reported with a warning.
pub fn ingest_scores(path: impl AsRef<Path>) -> Result<ScoreFile> {
    let path = path.as_ref();
    read_scores(BufReader::new(File::open(path)?), path)
}

pub fn read_scores(reader: impl BufRead, path: &Path) -> Result<ScoreFile> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));

    let (n, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let header = header?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|f| f.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(n, format!("header must be `K,L,T`: {e}")))?;
    let &[k, len, steps] = dims.as_slice() else {
        return Err(err(n, format!("header must have 3 fields, found {}", dims.len())));
    };
    if k == 0 || len == 0 {
        return Err(err(n, "K and L must be positive".into()));
    }

    let mut row = |what: &str| -> Result<(usize, Vec<f64>)> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")))?;
        let line = line?;
        let values = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(n, format!("{what}: {e}")))?;
        if values.len() != len {
            return Err(err(
                n,
                format!("{what}: expected {len} values, found {}", values.len()),
            ));
        }
        Ok((n, values))
    };

    let mut instances = Vec::with_capacity(steps);
    for t in 1..=steps {
        let (n, raw) = row(&format!("truth row of instance {t}"))?;
        let bits = raw
            .iter()
            .map(|&v| {
                if v == 0.0 || v == 1.0 {
                    Ok(v == 1.0)
                } else {
                    Err(err(n, format!("truth value {v} is not binary")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let truth = LabelVector::new(bits)?;
        let mut scores = Vec::with_capacity(k);
        for sensor in 1..=k {
            let (n, raw) = row(&format!("scores of sensor {sensor}, instance {t}"))?;
            let (s, clamped) =
                ScoreVector::from_probabilities(raw).map_err(|e| err(n, e.to_string()))?;
            if clamped > 0 {
                log::warn!(
                    "{}:{n}: clamped {clamped} score(s) to 1 - {}",
                    path.display(),
                    crate::metrics::SCORE_EPSILON
                );
            }
            scores.push(s);
        }
        instances.push(Instance { truth, scores });
    }
    if let Some((n, _)) = lines.next() {
        return Err(err(n, format!("data beyond the declared {steps} instances")));
    }
    Ok(ScoreFile {
        k,
        labels: len,
        instances,
    })
}

pub fn write_scores(mut writer: impl Write, instances: &[Instance]) -> Result<()> {
    let first = instances
        .first()
        .ok_or(Error::Empty("score file needs at least one instance"))?;
    let k = first.scores.len();
    let len = first.truth.len();
    writeln!(writer, "{k},{len},{}", instances.len())?;
    for inst in instances {
        let truth: Vec<&str> = inst
            .truth
            .as_slice()
            .iter()
            .map(|&y| if y { "1" } else { "0" })
            .collect();
        writeln!(writer, "{}", truth.join(","))?;
        for s in &inst.scores {
            let row: Vec<String> = s.as_slice().iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Feedback channel from the ground truth to the server.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FeedbackChannel {
    #[default]
    Exact,
    /// Reports `min(1, N + bias)` in place of the exact FNR `N`.
    Conservative { bias: f64 },
}

impl FeedbackChannel {
    pub fn feedback(
        &self,
        truth: &LabelVector,
        decision: &HardPrediction,
        locals: &[HardPrediction],
    ) -> Result<Feedback> {
        let n = fnr(truth, decision)?;
        let estimate = match *self {
            FeedbackChannel::Exact => n,
            FeedbackChannel::Conservative { bias } => (n + bias).min(1.0),
        };
        Ok(Feedback {
            fnr: n,
            fnr_estimate: estimate,
            fpr: fpr(truth, decision)?,
            local_fpr: locals
                .iter()
                .map(|u| local_fpr(truth, u))
                .collect::<Result<_>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{local_predict, SCORE_EPSILON};
    use std::io::Cursor;

    fn parse(text: &str) -> Result<ScoreFile> {
        read_scores(Cursor::new(text.as_bytes()), Path::new("mem.csv"))
    }

    #[test]
    fn zero_noise_sensor_reports_truth() {
        let spec = StreamSpec::new(&[0.0], 200, 1, 0.4, 3);
        let inst = SyntheticStream::new(spec).unwrap().next().unwrap();
        for (&y, &s) in inst.truth.as_slice().iter().zip(inst.scores[0].as_slice()) {
            assert_eq!(s, if y { 1.0 - SCORE_EPSILON } else { 0.0 });
        }
    }

    #[test]
    fn pure_noise_sensor_ignores_truth() {
        let spec = StreamSpec::new(&[1.0], 100_000, 1, 0.3, 5);
        let inst = SyntheticStream::new(spec).unwrap().next().unwrap();
        let mean = |want: bool| {
            let v: Vec<f64> = inst
                .truth
                .as_slice()
                .iter()
                .zip(inst.scores[0].as_slice())
                .filter(|(&y, _)| y == want)
                .map(|(_, &s)| s)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((mean(true) - 0.5).abs() < 0.01);
        assert!((mean(false) - 0.5).abs() < 0.01);
    }

    #[test]
    fn mixture_fpr_matches_expectation() {
        let spec = StreamSpec::new(&[0.2], 100_000, 1, 0.3, 11);
        let model = spec.sensors[0];
        let inst = SyntheticStream::new(spec).unwrap().next().unwrap();
        let u = local_predict(&inst.scores[0], 0.5);
        let p = local_fpr(&inst.truth, &u).unwrap();
        assert!((p - 0.10).abs() < 0.01, "{p}");
        assert!((model.expected_local_fpr(0.5) - 0.10).abs() < 1e-12);
        let n = fnr(&inst.truth, &u).unwrap();
        assert!((n - model.expected_local_fnr(0.5)).abs() < 0.01, "{n}");
    }

    #[test]
    fn quality_ordering() {
        let spec = StreamSpec::new(&[0.1, 0.3, 0.5], 100_000, 1, 0.3, 17);
        let inst = SyntheticStream::new(spec).unwrap().next().unwrap();
        for lambda in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let p: Vec<f64> = inst
                .scores
                .iter()
                .map(|s| local_fpr(&inst.truth, &local_predict(s, lambda)).unwrap())
                .collect();
            assert!(p[0] <= p[1] + 0.01 && p[1] <= p[2] + 0.01, "{lambda}: {p:?}");
        }
    }

    #[test]
    fn dropout_window_is_noise() {
        let mut spec = StreamSpec::new(&[0.0], 1000, 1, 0.3, 2);
        spec.sensors[0].dropout = 0.25;
        let inst = SyntheticStream::new(spec).unwrap().next().unwrap();
        let off = inst
            .truth
            .as_slice()
            .iter()
            .zip(inst.scores[0].as_slice())
            .filter(|(&y, &s)| s != if y { 1.0 - SCORE_EPSILON } else { 0.0 })
            .count();
        assert!(off <= 250 && off > 200, "{off}");
    }

    #[test]
    fn streams_are_reproducible_and_independent_per_sensor() {
        let a: Vec<_> = SyntheticStream::new(StreamSpec::new(&[0.1, 0.3], 50, 5, 0.3, 9))
            .unwrap()
            .collect();
        let b: Vec<_> = SyntheticStream::new(StreamSpec::new(&[0.1, 0.3], 50, 5, 0.3, 9))
            .unwrap()
            .collect();
        assert_eq!(a, b);
        let c: Vec<_> = SyntheticStream::new(StreamSpec::new(&[0.1, 0.3, 0.5], 50, 5, 0.3, 9))
            .unwrap()
            .collect();
        for (x, y) in a.iter().zip(&c) {
            assert_eq!(x.truth, y.truth);
            assert_eq!(x.scores[..], y.scores[..2]);
        }
        let d: Vec<_> = SyntheticStream::new(StreamSpec::new(&[0.1, 0.3], 50, 5, 0.3, 10))
            .unwrap()
            .collect();
        assert_ne!(a, d);
    }

    #[test]
    fn spec_validation() {
        assert!(StreamSpec::new(&[], 10, 1, 0.3, 0).validate().is_err());
        assert!(StreamSpec::new(&[1.5], 10, 1, 0.3, 0).validate().is_err());
        assert!(StreamSpec::new(&[0.5], 10, 1, 1.0, 0).validate().is_err());
        assert!(StreamSpec::new(&[0.5], 0, 1, 0.3, 0).validate().is_err());
    }

    #[test]
    fn score_file_roundtrip() {
        let text = "1,2,2\n1,0\n0.75,0.125\n0,1\n0.5,0.25\n";
        let file = parse(text).unwrap();
        assert_eq!((file.k, file.labels, file.instances.len()), (1, 2, 2));
        assert_eq!(file.instances[0].scores[0].as_slice(), &[0.75, 0.125]);
        assert_eq!(file.instances[1].truth.as_slice(), &[false, true]);
        let mut out = Vec::new();
        write_scores(&mut out, &file.instances).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);

        let spec = StreamSpec::new(&[0.3, 0.6], 20, 3, 0.3, 4);
        let generated: Vec<_> = SyntheticStream::new(spec).unwrap().collect();
        let mut out = Vec::new();
        write_scores(&mut out, &generated).unwrap();
        let back = read_scores(Cursor::new(out), Path::new("x")).unwrap();
        assert_eq!(back.instances, generated);
    }

    #[test]
    fn score_file_clamps_one() {
        let file = parse("1,2,1\n1,0\n1.0,0.5\n").unwrap();
        assert_eq!(file.instances[0].scores[0].as_slice()[0], 1.0 - SCORE_EPSILON);
    }

    #[test]
    fn score_file_errors_name_the_line() {
        let e = parse("1,3,1\n1,0,1\n0.5,0.5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(e.to_string().contains("mem.csv:3"));

        let e = parse("1,2,1\n1,2\n0.5,0.5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));

        let e = parse("1,2,1\n1,0\n0.5,1.5\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));

        let e = parse("1,2,1\n1,0\n0.5,abc\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));

        assert!(parse("1,2\n").is_err());
        assert!(parse("1,2,2\n1,0\n0.5,0.5\n").is_err());
        let e = parse("1,2,1\n1,0\n0.5,0.5\n1,1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn feedback_modes() {
        let y = LabelVector::from_bits(&[1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0]).unwrap();
        let mut bits = vec![true; 12];
        bits[0] = false;
        let v = HardPrediction::new(bits);
        let locals = vec![v.clone(), HardPrediction::all_ones(12)];

        let exact = FeedbackChannel::Exact.feedback(&y, &v, &locals).unwrap();
        assert_eq!(exact.fnr, fnr(&y, &v).unwrap());
        assert_eq!(exact.fnr_estimate, exact.fnr);
        assert_eq!(exact.fpr, fpr(&y, &v).unwrap());
        assert_eq!(exact.local_fpr, vec![1.0, 1.0]);

        let cons = FeedbackChannel::Conservative { bias: 0.05 }
            .feedback(&y, &v, &locals)
            .unwrap();
        assert!((cons.fnr - 0.10).abs() < 1e-12);
        assert!((cons.fnr_estimate - 0.15).abs() < 1e-12);

        let mut bits = vec![false; 50];
        bits[10] = true;
        let y2 = LabelVector::from_bits(&[1; 50]).unwrap();
        let v2 = HardPrediction::new(bits);
        let high = FeedbackChannel::Conservative { bias: 0.05 }
            .feedback(&y2, &v2, std::slice::from_ref(&v2))
            .unwrap();
        assert!((high.fnr - 0.98).abs() < 1e-12);
        assert_eq!(high.fnr_estimate, 1.0);
    }
}
