//! Training-fitted feature encoding: median imputation and standardisation
//! for numeric features, one-hot indicators for categorical ones.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureKind, Row, Schema};
use crate::error::{Error, Result};

/// Maximum number of indicator columns per categorical feature before the
/// remaining training categories share an OTHER indicator.
pub const MAX_VOCABULARY: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnEncoder {
    Numeric {
        median: f64,
        mean: f64,
        scale: f64,
    },
    Categorical {
        vocabulary: HashMap<String, usize>,
        /// Indicator for training categories beyond the vocabulary cap.
        other: Option<usize>,
        /// Training categories that map to `other`.
        pooled: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    encoders: Vec<(usize, ColumnEncoder)>,
    width: usize,
}

impl Preprocessor {
    pub fn fit<'a>(schema: &Schema, rows: impl IntoIterator<Item = &'a Row>) -> Result<Self> {
        Self::fit_with_cap(schema, rows, MAX_VOCABULARY)
    }

    pub fn fit_with_cap<'a>(schema: &Schema, rows: impl IntoIterator<Item = &'a Row>, cap: usize) -> Result<Self> {
        let rows: Vec<&Row> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::Empty("preprocessor needs training rows"));
        }
        let mut encoders = Vec::with_capacity(schema.len());
        let mut width = 0;
        for (f, feature) in schema.features.iter().enumerate() {
            match feature.kind {
                FeatureKind::Numeric => {
                    let mut observed: Vec<f64> = rows.iter().filter_map(|r| r[f].as_num()).collect();
                    if observed.is_empty() {
                        return Err(Error::FeatureAllMissing(feature.name.clone()));
                    }
                    observed.sort_by(f64::total_cmp);
                    let median = median_sorted(&observed);
                    let n = rows.len() as f64;
                    let imputed = || rows.iter().map(|r| r[f].as_num().unwrap_or(median));
                    let mean = imputed().sum::<f64>() / n;
                    let var = imputed().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
                    encoders.push((f, ColumnEncoder::Numeric { median, mean, scale }));
                    width += 1;
                }
                FeatureKind::Categorical => {
                    let mut counts: HashMap<&str, u64> = HashMap::new();
                    for r in &rows {
                        *counts.entry(r[f].category()).or_insert(0) += 1;
                    }
                    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
                    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
                    let mut vocabulary = HashMap::new();
                    for (i, (c, _)) in ranked.iter().take(cap).enumerate() {
                        vocabulary.insert((*c).to_string(), width + i);
                    }
                    width += vocabulary.len();
                    let pooled: Vec<String> = ranked.iter().skip(cap).map(|(c, _)| (*c).to_string()).collect();
                    let other = if pooled.is_empty() {
                        None
                    } else {
                        width += 1;
                        Some(width - 1)
                    };
                    encoders.push((f, ColumnEncoder::Categorical { vocabulary, other, pooled }));
                }
            }
        }
        Ok(Self { encoders, width })
    }

    /// Number of design-matrix columns.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encoders(&self) -> &[(usize, ColumnEncoder)] {
        &self.encoders
    }

    /// Encodes one row into `out` (length `width`). Unseen categories encode as
    /// all zeros.
    pub fn transform_into(&self, row: &Row, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut col = 0;
        for (f, enc) in &self.encoders {
            match enc {
                ColumnEncoder::Numeric { median, mean, scale } => {
                    let v = row[*f].as_num().unwrap_or(*median);
                    out[col] = (v - mean) / scale;
                    col += 1;
                }
                ColumnEncoder::Categorical { vocabulary, other, pooled } => {
                    let c = row[*f].category();
                    if let Some(&idx) = vocabulary.get(c) {
                        out[idx] = 1.0;
                    } else if let Some(o) = other {
                        if pooled.iter().any(|p| p == c) {
                            out[*o] = 1.0;
                        }
                    }
                    col += vocabulary.len() + usize::from(other.is_some());
                }
            }
        }
    }

    /// Row-major design matrix.
    pub fn transform<'a>(&self, rows: impl IntoIterator<Item = &'a Row>) -> Vec<f64> {
        let rows = rows.into_iter();
        let mut out = Vec::with_capacity(rows.size_hint().0 * self.width);
        let mut buf = vec![0.0; self.width];
        for row in rows {
            self.transform_into(row, &mut buf);
            out.extend_from_slice(&buf);
        }
        out
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Cell, Feature};

    fn num_schema() -> Schema {
        Schema::new(vec![Feature { name: "x".into(), kind: FeatureKind::Numeric }])
    }

    fn cat_schema() -> Schema {
        Schema::new(vec![Feature { name: "c".into(), kind: FeatureKind::Categorical }])
    }

    #[test]
    fn median_imputation() {
        let rows = vec![vec![Cell::Num(1.0)], vec![Cell::Num(3.0)], vec![Cell::Missing]];
        let p = Preprocessor::fit(&num_schema(), &rows).unwrap();
        match &p.encoders()[0].1 {
            ColumnEncoder::Numeric { median, .. } => assert_eq!(*median, 2.0),
            other => panic!("{other:?}"),
        }
        // The imputed value sits at the column mean (1, 3, 2), so it encodes to 0.
        let x = p.transform(&rows);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn one_hot_and_unseen() {
        let rows = vec![vec![Cell::Cat("a".into())], vec![Cell::Cat("b".into())], vec![Cell::Cat("a".into())]];
        let p = Preprocessor::fit(&cat_schema(), &rows).unwrap();
        assert_eq!(p.width(), 2);
        assert_eq!(p.transform(&rows[..1]), vec![1.0, 0.0]);
        assert_eq!(p.transform(&[vec![Cell::Cat("c".into())]]), vec![0.0, 0.0]);
    }

    #[test]
    fn all_numeric_has_no_indicators() {
        let schema = Schema::new(vec![
            Feature { name: "x".into(), kind: FeatureKind::Numeric },
            Feature { name: "z".into(), kind: FeatureKind::Numeric },
        ]);
        let rows = vec![vec![Cell::Num(1.0), Cell::Num(2.0)]];
        assert_eq!(Preprocessor::fit(&schema, &rows).unwrap().width(), 2);
    }

    #[test]
    fn all_missing_feature_named_in_error() {
        let rows = vec![vec![Cell::Missing], vec![Cell::Missing]];
        let err = Preprocessor::fit(&num_schema(), &rows).unwrap_err();
        assert!(err.to_string().contains("`x`"));
        assert!(Preprocessor::fit(&num_schema(), std::iter::empty()).is_err());
    }

    #[test]
    fn vocabulary_cap_pools_rare_categories() {
        let rows: Vec<Row> = ["a", "a", "a", "b", "b", "c", "d"].iter().map(|c| vec![Cell::Cat((*c).into())]).collect();
        let p = Preprocessor::fit_with_cap(&cat_schema(), &rows, 2).unwrap();
        assert_eq!(p.width(), 3);
        assert_eq!(p.transform(&[vec![Cell::Cat("d".into())]]), vec![0.0, 0.0, 1.0]);
        assert_eq!(p.transform(&[vec![Cell::Cat("zzz".into())]]), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn transform_is_repeatable() {
        let rows = vec![vec![Cell::Num(1.0), Cell::Cat("a".into())], vec![Cell::Missing, Cell::Missing]];
        let schema = Schema::new(vec![
            Feature { name: "x".into(), kind: FeatureKind::Numeric },
            Feature { name: "c".into(), kind: FeatureKind::Categorical },
        ]);
        let p = Preprocessor::fit(&schema, &rows).unwrap();
        assert_eq!(p.transform(&rows), p.transform(&rows));
    }
}
