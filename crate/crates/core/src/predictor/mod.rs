//! Probabilistic scorers: the built-in logistic learner and replayed
//! external scores.

pub mod logistic;
pub mod preprocess;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use crate::data::Window;
use crate::error::{Error, Result};

pub use logistic::{logistic_loss_and_grad, sigmoid, train_builtin, LogisticModel, TrainConfig};
pub use preprocess::Preprocessor;

pub const EXTERNAL_SCORES_HEADER: [&str; 3] = ["window_id", "row_index", "probability"];

/// Produces one probability in [0, 1] per row of a window.
#[derive(Debug, Clone)]
pub enum Scorer {
    Builtin(Arc<LogisticModel>),
    External(Arc<ExternalScores>),
}

impl Scorer {
    pub fn score(&self, window: &Window) -> Result<Vec<f64>> {
        match self {
            Scorer::Builtin(model) => Ok(model.predict(&window.rows)),
            Scorer::External(ext) => {
                let probs = ext.window(window.id).ok_or(Error::MissingWindow(window.id))?;
                if probs.len() != window.len() {
                    return Err(Error::invalid(format!(
                        "external scores for window {} have {} rows, the window has {}",
                        window.id,
                        probs.len(),
                        window.len()
                    )));
                }
                Ok(probs.to_vec())
            }
        }
    }
}

/// Stored per-window probabilities, row-aligned with each window's
/// chronological row order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalScores {
    windows: BTreeMap<i64, Vec<f64>>,
}

impl ExternalScores {
    pub fn from_windows(windows: BTreeMap<i64, Vec<f64>>) -> Result<Self> {
        if let Some((id, _)) = windows.iter().find(|(_, p)| p.iter().any(|v| !(0.0..=1.0).contains(v))) {
            return Err(Error::invalid(format!("window {id} has a probability outside [0, 1]")));
        }
        Ok(Self { windows })
    }

    pub fn window(&self, id: i64) -> Option<&[f64]> {
        self.windows.get(&id).map(Vec::as_slice)
    }

    pub fn window_ids(&self) -> impl Iterator<Item = i64> + '_ {
        self.windows.keys().copied()
    }

    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse { source_name: source_name.to_string(), line, message };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() {
            return Err(err(1, "empty file".into()));
        }
        if headers.iter().map(str::trim).ne(EXTERNAL_SCORES_HEADER) {
            return Err(err(1, format!("expected header `{}`", EXTERNAL_SCORES_HEADER.join(","))));
        }

        let mut windows: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        let mut current: Option<i64> = None;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != 3 {
                return Err(err(line, format!("expected 3 fields, found {}", record.len())));
            }
            let id: i64 = record[0].trim().parse().map_err(|_| err(line, format!("bad window_id `{}`", &record[0])))?;
            let row: usize =
                record[1].trim().parse().map_err(|_| err(line, format!("bad row_index `{}`", &record[1])))?;
            let p: f64 =
                record[2].trim().parse().map_err(|_| err(line, format!("bad probability `{}`", &record[2])))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(err(line, format!("probability {p} outside [0, 1]")));
            }
            if current != Some(id) {
                if windows.contains_key(&id) {
                    return Err(err(line, format!("window {id} is not contiguous")));
                }
                current = Some(id);
            }
            let probs = windows.entry(id).or_default();
            if row != probs.len() {
                return Err(err(line, format!("window {id}: expected row_index {}, found {row}", probs.len())));
            }
            probs.push(p);
        }
        if windows.is_empty() {
            return Err(err(1, "no score rows".into()));
        }
        Ok(Self { windows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(EXTERNAL_SCORES_HEADER)?;
        for (id, probs) in &self.windows {
            for (i, p) in probs.iter().enumerate() {
                wtr.write_record([id.to_string(), i.to_string(), p.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn load_external_scores(path: &Path) -> Result<Scorer> {
    Ok(Scorer::External(Arc::new(ExternalScores::load(path)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Cell;

    fn file(body: &str) -> String {
        format!("window_id,row_index,probability\n{body}")
    }

    #[test]
    fn nine_windows_served() {
        let mut body = String::new();
        for year in 2010..=2018 {
            body.push_str(&format!("{year},0,0.25\n{year},1,0.75\n"));
        }
        let ext = ExternalScores::from_reader(file(&body).as_bytes(), "mem").unwrap();
        assert_eq!(ext.n_windows(), 9);
        let w = Window { id: 2013, rows: vec![vec![Cell::Missing]; 2], labels: vec![0, 1] };
        let scorer = Scorer::External(Arc::new(ext));
        assert_eq!(scorer.score(&w).unwrap(), vec![0.25, 0.75]);
        let missing = Window { id: 2020, ..w };
        assert!(matches!(scorer.score(&missing), Err(Error::MissingWindow(2020))));
    }

    #[test]
    fn empty_file_rejected() {
        assert!(ExternalScores::from_reader("".as_bytes(), "mem").is_err());
        assert!(ExternalScores::from_reader(file("").as_bytes(), "mem").is_err());
    }

    #[test]
    fn out_of_range_cites_line() {
        let body = "1,0,0.1\n1,1,0.2\n1,2,0.3\n2,0,0.4\n2,1,0.5\n2,2,1.2\n";
        let err = ExternalScores::from_reader(file(body).as_bytes(), "scores.csv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 7, .. }), "{err}");
        assert!(err.to_string().contains("line 7"));
    }

    #[test]
    fn incomplete_or_split_windows_rejected() {
        assert!(ExternalScores::from_reader(file("1,0,0.1\n1,2,0.3\n").as_bytes(), "m").is_err());
        assert!(ExternalScores::from_reader(file("1,0,0.1\n2,0,0.3\n1,1,0.2\n").as_bytes(), "m").is_err());
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let ext =
            ExternalScores::from_windows([(3, vec![0.1, 0.123_456_789_012_345_6]), (4, vec![1.0])].into()).unwrap();
        ext.write(&path).unwrap();
        assert_eq!(ExternalScores::load(&path).unwrap(), ext);
    }
}
