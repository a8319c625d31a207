use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport};
use crate::textfmt::{format_f64, parse_f64};

/// Which model (or combination) produced a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Existing,
    GeneticLogistic,
    GeneticLogic,
    Composite,
    Averaged,
    TwoStageOracle,
    TwoStageGated,
}

impl Source {
    pub const ALL: [Source; 7] = [
        Source::Existing,
        Source::GeneticLogistic,
        Source::GeneticLogic,
        Source::Composite,
        Source::Averaged,
        Source::TwoStageOracle,
        Source::TwoStageGated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Existing => "existing",
            Source::GeneticLogistic => "genetic_logistic",
            Source::GeneticLogic => "genetic_logic",
            Source::Composite => "composite",
            Source::Averaged => "averaged",
            Source::TwoStageOracle => "two_stage_oracle",
            Source::TwoStageGated => "two_stage_gated",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| format!("unknown prediction source `{s}`"))
    }
}

/// One score per sample, tagged with the model that produced it.
///
/// Scores are probabilities, or 0/1 calls from classification models. For
/// routed predictions each sample carries the source it was routed to and
/// the gate's decision (+1 routes to the existing model).
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    kind: Source,
    ids: Vec<String>,
    scores: Vec<f64>,
    sources: Vec<Source>,
    gate: Vec<Option<i8>>,
}

impl PredictionSet {
    pub fn new(kind: Source, ids: Vec<String>, scores: Vec<f64>) -> Result<Self> {
        let n = ids.len();
        Self::with_routing(kind, ids, scores, vec![kind; n], vec![None; n])
    }

    pub fn with_routing(
        kind: Source,
        ids: Vec<String>,
        scores: Vec<f64>,
        sources: Vec<Source>,
        gate: Vec<Option<i8>>,
    ) -> Result<Self> {
        let n = ids.len();
        for len in [scores.len(), sources.len(), gate.len()] {
            if len != n {
                return Err(Error::ArityMismatch { expected: n, got: len });
            }
        }
        if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Precondition(format!(
                "score {s} of sample `{}` is not a probability",
                ids[i]
            )));
        }
        Ok(Self {
            kind,
            ids,
            scores,
            sources,
            gate,
        })
    }

    pub fn kind(&self) -> Source {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn gate(&self) -> &[Option<i8>] {
        &self.gate
    }

    /// Samples per source tag, in [`Source`] order.
    pub fn routing_counts(&self) -> Vec<(Source, usize)> {
        let mut out: Vec<(Source, usize)> = Vec::new();
        for s in Source::ALL {
            let c = self.sources.iter().filter(|&&v| v == s).count();
            if c > 0 {
                out.push((s, c));
            }
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            kind: self.kind,
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
            sources: indices.iter().map(|&i| self.sources[i]).collect(),
            gate: indices.iter().map(|&i| self.gate[i]).collect(),
        }
    }

    pub fn check_same_samples(&self, other: &PredictionSet) -> Result<()> {
        check_ids(&self.ids, &other.ids)
    }

    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        check_ids(&self.ids, &ds.ids())
    }

    /// Metrics against the dataset's labels at the 0.5 threshold.
    pub fn evaluate(&self, ds: &Dataset) -> Result<MetricsReport> {
        self.check_dataset(ds)?;
        metrics::evaluate(&self.scores, &ds.labels(), metrics::DEFAULT_THRESHOLD)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file)
    }

    pub fn write_to<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "score", "source", "gate"])?;
        for i in 0..self.len() {
            let gate = self.gate[i].map(|g| g.to_string()).unwrap_or_default();
            w.write_record([
                self.ids[i].as_str(),
                &format_f64(self.scores[i]),
                self.sources[i].as_str(),
                &gate,
            ])?;
        }
        w.flush().map_err(|e| Error::io("<prediction csv>", e))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file)
    }

    /// Inverse of [`PredictionSet::write_to`]. The set kind is the gated
    /// two-stage kind when any gate decision is present, otherwise the
    /// common source tag (the oracle kind when tags are mixed).
    pub fn read_from<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))
        };
        let (ci, cs, csrc) = (col("id")?, col("score")?, col("source")?);
        let cg = headers.iter().position(|h| h == "gate");
        let (mut ids, mut scores, mut sources, mut gate) = (vec![], vec![], vec![], vec![]);
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let bad = |message: String| Error::MalformedRow { line, message };
            ids.push(rec.get(ci).unwrap_or_default().to_string());
            scores.push(parse_f64(rec.get(cs).unwrap_or_default()).map_err(bad)?);
            sources.push(rec.get(csrc).unwrap_or_default().parse::<Source>().map_err(bad)?);
            let g = cg.and_then(|c| rec.get(c)).unwrap_or_default().trim();
            gate.push(match g {
                "" => None,
                "1" | "+1" => Some(1),
                "-1" => Some(-1),
                other => return Err(bad(format!("gate decision `{other}` is not +1/-1"))),
            });
        }
        let kind = if gate.iter().any(Option::is_some) {
            Source::TwoStageGated
        } else {
            match sources.first() {
                Some(&s) if sources.iter().all(|&v| v == s) => s,
                Some(_) => Source::TwoStageOracle,
                None => Source::Existing,
            }
        };
        Self::with_routing(kind, ids, scores, sources, gate)
    }
}

fn check_ids(a: &[String], b: &[String]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SampleMismatch(format!("{} samples vs {}", a.len(), b.len())));
    }
    if let Some(i) = (0..a.len()).find(|&i| a[i] != b[i]) {
        return Err(Error::SampleMismatch(format!(
            "sample {i} is `{}` in one set and `{}` in the other",
            a[i], b[i]
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_preserves_routing() {
        let set = PredictionSet::with_routing(
            Source::TwoStageGated,
            vec!["a".into(), "b".into(), "c".into()],
            vec![0.1, 1.0 / 3.0, 1.0],
            vec![Source::Existing, Source::GeneticLogic, Source::Existing],
            vec![Some(1), Some(-1), Some(1)],
        )
        .unwrap();
        let mut buf = Vec::new();
        set.write_to(&mut buf).unwrap();
        let back = PredictionSet::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, set);

        let plain = PredictionSet::new(Source::Composite, vec!["x".into()], vec![0.25]).unwrap();
        let mut buf = Vec::new();
        plain.write_to(&mut buf).unwrap();
        assert_eq!(PredictionSet::read_from(buf.as_slice()).unwrap(), plain);
    }

    #[test]
    fn rejects_non_probabilities_and_mismatches() {
        assert!(PredictionSet::new(Source::Existing, vec!["a".into()], vec![1.5]).is_err());
        assert!(PredictionSet::new(Source::Existing, vec!["a".into()], vec![]).is_err());
        let a = PredictionSet::new(Source::Existing, vec!["a".into()], vec![0.5]).unwrap();
        let b = PredictionSet::new(Source::Existing, vec!["b".into()], vec![0.5]).unwrap();
        assert!(matches!(a.check_same_samples(&b), Err(Error::SampleMismatch(_))));
        let bad = "id,score,source\na,0.5,nope\n";
        assert!(matches!(
            PredictionSet::read_from(bad.as_bytes()),
            Err(Error::MalformedRow { line: 2, .. })
        ));
    }
}
