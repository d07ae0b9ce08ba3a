use ndarray::{Array2, ArrayViewMut1, Axis};
use serde::{Deserialize, Serialize};

use super::{encode_record, ColumnKind, DataError, Dataset, FeatureSchema, RawRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub kind: ColumnKind,
    pub mean: f64,
    /// Population standard deviation, forced to 1 for constant columns.
    pub scale: f64,
}

/// Train-set statistics for every encoded column.
///
/// One-hot columns keep their mean (used for ablation) but are never rescaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub schema: FeatureSchema,
    pub columns: Vec<ColumnScale>,
}

impl Scaler {
    pub fn fit(ds: &Dataset) -> Scaler {
        let columns = ds
            .schema
            .columns()
            .into_iter()
            .zip(ds.x.axis_iter(Axis(1)))
            .map(|((name, kind), col)| {
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let std = var.sqrt();
                let scale = if std > 1e-12 { std } else { 1.0 };
                ColumnScale { name, kind, mean, scale }
            })
            .collect();
        Scaler { schema: ds.schema.clone(), columns }
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    fn apply_row(&self, mut row: ArrayViewMut1<f64>) {
        for (v, c) in row.iter_mut().zip(&self.columns) {
            if c.kind == ColumnKind::Continuous {
                *v = (*v - c.mean) / c.scale;
            }
        }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>, DataError> {
        if x.ncols() != self.width() {
            return Err(DataError::SchemaMismatch(format!("{} columns, scaler expects {}", x.ncols(), self.width())));
        }
        let mut out = x.clone();
        for row in out.axis_iter_mut(Axis(0)) {
            self.apply_row(row);
        }
        Ok(out)
    }

    /// Encodes and standardizes one raw record.
    pub fn transform_record(&self, rec: &RawRecord) -> Result<Vec<f64>, DataError> {
        let raw = encode_record(rec, &self.schema)
            .map_err(|e| DataError::SchemaMismatch(e.to_string()))?;
        let mut row = ndarray::Array1::from(raw);
        self.apply_row(row.view_mut());
        Ok(row.to_vec())
    }

    /// Training mean of column `j` expressed in transformed units.
    pub fn transformed_mean(&self, j: usize) -> f64 {
        let c = &self.columns[j];
        match c.kind {
            ColumnKind::Continuous => 0.0,
            ColumnKind::OneHot => c.mean,
        }
    }
}

/// Z-scores continuous columns of both sets using train statistics only.
pub fn standardize_features(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Scaler), DataError> {
    if train.schema != test.schema || train.n_features() != test.n_features() {
        return Err(DataError::SchemaMismatch("train and test schemas differ".to_string()));
    }
    let scaler = Scaler::fit(train);
    let train_x = scaler.transform(&train.x)?;
    let test_x = scaler.transform(&test.x)?;
    Ok((Dataset { x: train_x, ..train.clone() }, Dataset { x: test_x, ..test.clone() }, scaler))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;
    use ndarray::array;

    fn dataset(x: Array2<f64>) -> Dataset {
        let n = x.nrows();
        let mut schema = FeatureSchema::default();
        // age, sex one-hot, priors
        schema.features.truncate(3);
        Dataset { x, y: vec![0; n], d: vec![0; n], compas_decile: vec![None; n], schema }
    }

    #[test]
    fn two_point_column() {
        let train = dataset(array![[0.0, 1.0, 0.0, 5.0], [2.0, 0.0, 1.0, 5.0]]);
        let (t, _, scaler) = standardize_features(&train, &train.clone()).unwrap();
        assert_eq!(t.x.column(0).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(scaler.columns[0].mean, 1.0);
        assert_eq!(scaler.columns[0].scale, 1.0);
        // one-hot untouched
        assert_eq!(t.x.column(1).to_vec(), vec![1.0, 0.0]);
        assert_eq!(scaler.columns[1].mean, 0.5);
        // constant column centered, scale forced to 1
        assert_eq!(t.x.column(3).to_vec(), vec![0.0, 0.0]);
        assert_eq!(scaler.columns[3].scale, 1.0);
    }

    #[test]
    fn test_uses_train_statistics() {
        let train = dataset(array![[20.0, 1.0, 0.0, 1.0], [30.0, 0.0, 1.0, 4.0], [46.0, 1.0, 0.0, 0.0]]);
        let test = dataset(array![[25.0, 0.0, 1.0, 10.0], [60.0, 1.0, 0.0, 2.0]]);
        let (_, t, _) = standardize_features(&train, &test).unwrap();

        // Welford one-pass oracle for each train column
        for j in [0usize, 3] {
            let (mut n, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
            for v in train.x.column(j) {
                n += 1.0;
                let delta = v - mean;
                mean += delta / n;
                m2 += delta * (v - mean);
            }
            let std = (m2 / n).sqrt();
            for (raw, got) in test.x.column(j).iter().zip(t.x.column(j)) {
                assert!((got - (raw - mean) / std).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn schema_mismatch() {
        let a = dataset(array![[0.0, 1.0, 0.0, 5.0]]);
        let mut b = a.clone();
        b.schema.features.pop();
        assert!(matches!(standardize_features(&a, &b), Err(DataError::SchemaMismatch(_))));
    }
}
