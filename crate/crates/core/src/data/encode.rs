use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{DataError, RawRecord};

/// Record fields that may become model inputs.
///
/// Race is deliberately absent: it can only ever reach the group vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureField {
    Age,
    Sex,
    PriorsCount,
    ChargeDegree,
    JuvFelCount,
    JuvMisdCount,
    JuvOtherCount,
    LengthOfStay,
}

impl FeatureField {
    pub fn name(self) -> &'static str {
        match self {
            FeatureField::Age => "age",
            FeatureField::Sex => "sex",
            FeatureField::PriorsCount => "priors_count",
            FeatureField::ChargeDegree => "charge_degree",
            FeatureField::JuvFelCount => "juv_fel_count",
            FeatureField::JuvMisdCount => "juv_misd_count",
            FeatureField::JuvOtherCount => "juv_other_count",
            FeatureField::LengthOfStay => "length_of_stay",
        }
    }

    fn numeric(self, rec: &RawRecord) -> Option<f64> {
        Some(match self {
            FeatureField::Age => rec.age as f64,
            FeatureField::PriorsCount => rec.priors_count as f64,
            FeatureField::JuvFelCount => rec.juv_fel_count as f64,
            FeatureField::JuvMisdCount => rec.juv_misd_count as f64,
            FeatureField::JuvOtherCount => rec.juv_other_count as f64,
            FeatureField::LengthOfStay => length_of_stay(rec),
            FeatureField::Sex | FeatureField::ChargeDegree => return None,
        })
    }

    fn category(self, rec: &RawRecord) -> Option<&str> {
        match self {
            FeatureField::Sex => Some(&rec.sex),
            FeatureField::ChargeDegree => Some(&rec.charge_degree),
            _ => None,
        }
    }
}

/// Days between jail entry and release; 0 when either date is missing.
fn length_of_stay(rec: &RawRecord) -> f64 {
    match (rec.jail_in, rec.jail_out) {
        (Some(a), Some(b)) => (b - a).num_days() as f64,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    Numeric { field: FeatureField },
    OneHot { field: FeatureField, levels: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    OneHot,
}

/// Ordered list of encoded inputs plus the race-to-group mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
    /// `group_levels[0]` maps to group 0 (white), `group_levels[1]` to 1 (black).
    pub group_levels: [String; 2],
}

impl Default for FeatureSchema {
    fn default() -> Self {
        let one_hot = |field, levels: &[&str]| FeatureSpec::OneHot {
            field,
            levels: levels.iter().map(|s| s.to_string()).collect(),
        };
        FeatureSchema {
            features: vec![
                FeatureSpec::Numeric { field: FeatureField::Age },
                one_hot(FeatureField::Sex, &["Male", "Female"]),
                FeatureSpec::Numeric { field: FeatureField::PriorsCount },
                one_hot(FeatureField::ChargeDegree, &["F", "M"]),
                FeatureSpec::Numeric { field: FeatureField::JuvFelCount },
                FeatureSpec::Numeric { field: FeatureField::JuvMisdCount },
                FeatureSpec::Numeric { field: FeatureField::JuvOtherCount },
                FeatureSpec::Numeric { field: FeatureField::LengthOfStay },
            ],
            group_levels: ["Caucasian".to_string(), "African-American".to_string()],
        }
    }
}

impl FeatureSchema {
    /// Encoded column names and kinds, in matrix order.
    pub fn columns(&self) -> Vec<(String, ColumnKind)> {
        let mut out = Vec::new();
        for spec in &self.features {
            match spec {
                FeatureSpec::Numeric { field } => out.push((field.name().to_string(), ColumnKind::Continuous)),
                FeatureSpec::OneHot { field, levels } => {
                    for level in levels {
                        out.push((format!("{}={}", field.name(), level), ColumnKind::OneHot));
                    }
                }
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.columns().len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns().into_iter().map(|(n, _)| n).collect()
    }

    pub fn group_of(&self, race: &str) -> Option<u8> {
        self.group_levels.iter().position(|g| g == race).map(|i| i as u8)
    }
}

/// Model-ready table: standardized or raw features, labels and groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub d: Vec<u8>,
    pub compas_decile: Vec<Option<u8>>,
    pub schema: FeatureSchema,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.schema.column_names()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.y.iter().map(|&v| v == 1).collect()
    }

    pub fn groups(&self) -> Vec<bool> {
        self.d.iter().map(|&v| v == 1).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            d: indices.iter().map(|&i| self.d[i]).collect(),
            compas_decile: indices.iter().map(|&i| self.compas_decile[i]).collect(),
            schema: self.schema.clone(),
        }
    }

    /// SHA-256 over the exact bits of every stored value.
    /// Encoded rows as CSV: feature columns, then `y`, `group`, `compas_decile`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.column_names();
        header.extend(["y", "group", "compas_decile"].map(String::from));
        out.write_record(&header)?;
        for (i, row) in self.x.outer_iter().enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(self.y[i].to_string());
            rec.push(self.d[i].to_string());
            rec.push(self.compas_decile[i].map(|d| d.to_string()).unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush().map_err(|source| DataError::Io { path: "<dataset csv>".into(), source })?;
        Ok(())
    }

    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.x.nrows() as u64).to_le_bytes());
        h.update((self.x.ncols() as u64).to_le_bytes());
        for v in self.x.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(&self.y);
        h.update(&self.d);
        for dec in &self.compas_decile {
            h.update([dec.unwrap_or(0)]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Encodes a single record into one feature row.
pub fn encode_record(rec: &RawRecord, schema: &FeatureSchema) -> Result<Vec<f64>, DataError> {
    let mut row = Vec::with_capacity(schema.width());
    for spec in &schema.features {
        match spec {
            FeatureSpec::Numeric { field } => {
                let v = field.numeric(rec).ok_or_else(|| {
                    DataError::SchemaMismatch(format!("{} is categorical, not numeric", field.name()))
                })?;
                row.push(v);
            }
            FeatureSpec::OneHot { field, levels } => {
                let value = field.category(rec).ok_or_else(|| {
                    DataError::SchemaMismatch(format!("{} is numeric, not categorical", field.name()))
                })?;
                let hit = levels.iter().position(|l| l == value).ok_or_else(|| DataError::UnknownCategory {
                    field: field.name(),
                    value: value.to_string(),
                })?;
                row.extend((0..levels.len()).map(|i| if i == hit { 1.0 } else { 0.0 }));
            }
        }
    }
    Ok(row)
}

/// One-hot encodes categoricals, derives length of stay and maps race to
/// the group vector.
pub fn encode_dataset(records: &[RawRecord], schema: &FeatureSchema) -> Result<Dataset, DataError> {
    if records.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let width = schema.width();
    let mut flat = Vec::with_capacity(records.len() * width);
    let mut d = Vec::with_capacity(records.len());
    for rec in records {
        flat.extend(encode_record(rec, schema)?);
        let group = schema.group_of(&rec.race).ok_or_else(|| DataError::UnknownCategory {
            field: "race",
            value: rec.race.clone(),
        })?;
        d.push(group);
    }
    let x = Array2::from_shape_vec((records.len(), width), flat).expect("row width matches schema");
    Ok(Dataset {
        x,
        y: records.iter().map(|r| r.recid_label).collect(),
        d,
        compas_decile: records.iter().map(|r| r.compas_decile).collect(),
        schema: schema.clone(),
    })
}
