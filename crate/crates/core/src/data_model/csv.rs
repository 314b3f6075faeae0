//! CSV ingestion and emission for the documented study schemas.
//!
//! All files are UTF-8 with a required header row. Rejections name the
//! offending file, line, and column.

use super::{
    CategoryAssignment, DataError, EffectEstimates, ForecastMatrix, ReplicationDataset, Sign,
    DEFAULT_ALPHA,
};
use csv::{ReaderBuilder, StringRecord, Trim};
use ndarray::{Array1, Array2};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

struct Table {
    file: String,
    headers: Vec<String>,
    records: Vec<StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, DataError> {
        let file_name = path.display().to_string();
        let file = File::open(path).map_err(|source| DataError::Io {
            path: file_name.clone(),
            source,
        })?;
        let mut reader = ReaderBuilder::new()
            .has_headers(true)
            .trim(Trim::All)
            .flexible(false)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|source| DataError::Csv {
                file: file_name.clone(),
                source: Box::new(source),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut records = Vec::new();
        for record in reader.records() {
            records.push(record.map_err(|source| DataError::Csv {
                file: file_name.clone(),
                source: Box::new(source),
            })?);
        }
        Ok(Self {
            file: file_name,
            headers,
            records,
        })
    }

    fn column(&self, name: &str) -> Result<usize, DataError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                file: self.file.clone(),
                column: name.to_string(),
            })
    }

    fn optional_column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn line(&self, record: &StringRecord) -> usize {
        record.position().map(|p| p.line() as usize).unwrap_or(0)
    }

    fn cell<'r>(&self, record: &'r StringRecord, column: usize, name: &str) -> Result<&'r str, DataError> {
        record.get(column).ok_or_else(|| DataError::InvalidCell {
            file: self.file.clone(),
            row: self.line(record),
            column: name.to_string(),
            message: "missing field".into(),
        })
    }

    fn parse_f64(&self, record: &StringRecord, column: usize, name: &str) -> Result<f64, DataError> {
        let raw = self.cell(record, column, name)?;
        raw.parse::<f64>().map_err(|_| DataError::InvalidCell {
            file: self.file.clone(),
            row: self.line(record),
            column: name.to_string(),
            message: format!("`{raw}` is not a number"),
        })
    }

    fn parse_u64(&self, record: &StringRecord, column: usize, name: &str) -> Result<u64, DataError> {
        let raw = self.cell(record, column, name)?;
        raw.parse::<u64>().map_err(|_| DataError::InvalidCell {
            file: self.file.clone(),
            row: self.line(record),
            column: name.to_string(),
            message: format!("`{raw}` is not a non-negative integer"),
        })
    }

    fn invalid(&self, record: &StringRecord, name: &str, message: String) -> DataError {
        DataError::InvalidCell {
            file: self.file.clone(),
            row: self.line(record),
            column: name.to_string(),
            message,
        }
    }
}

/// Load an effect study: `effects.csv` (`treatment_id,estimate,variance`)
/// plus long-format `forecasts.csv` (`treatment_id,forecaster_id,prediction[,group]`).
///
/// With `covariance_path` set, Σ is read from a K×K grid whose header lists
/// the treatment ids (rows follow the header order) and any variance column
/// in the effects file is ignored; otherwise the variance column is
/// required and Σ is diagonal.
pub fn load_effect_study<P: AsRef<Path>>(
    effects_path: P,
    forecasts_path: P,
    covariance_path: Option<P>,
) -> Result<(EffectEstimates, ForecastMatrix), DataError> {
    let table = Table::read(effects_path.as_ref())?;
    let id_col = table.column("treatment_id")?;
    let estimate_col = table.column("estimate")?;
    let variance_col = if covariance_path.is_some() {
        table.optional_column("variance")
    } else {
        Some(table.column("variance")?)
    };

    let mut treatment_ids = Vec::new();
    let mut estimates = Vec::new();
    let mut variances = Vec::new();
    for record in &table.records {
        let id = table.cell(record, id_col, "treatment_id")?;
        if id.is_empty() {
            return Err(table.invalid(record, "treatment_id", "empty id".into()));
        }
        if treatment_ids.contains(&id.to_string()) {
            return Err(DataError::Duplicate {
                file: table.file.clone(),
                row: table.line(record),
                what: format!("treatment `{id}`"),
            });
        }
        treatment_ids.push(id.to_string());
        estimates.push(table.parse_f64(record, estimate_col, "estimate")?);
        if covariance_path.is_none() {
            let variance = table.parse_f64(record, variance_col.unwrap(), "variance")?;
            if variance < 0.0 {
                return Err(DataError::NotPositiveSemiDefinite {
                    detail: format!(
                        "negative variance {variance} for treatment `{id}` ({} line {})",
                        table.file,
                        table.line(record)
                    ),
                });
            }
            variances.push(variance);
        }
    }
    if treatment_ids.is_empty() {
        return Err(DataError::Invalid {
            what: format!("{}: no data rows", table.file),
        });
    }

    let effects = match covariance_path {
        Some(path) => {
            let covariance = load_covariance_grid(path.as_ref(), &treatment_ids)?;
            EffectEstimates::new(treatment_ids, Array1::from(estimates), covariance)?
        }
        None => EffectEstimates::with_variances(
            treatment_ids,
            Array1::from(estimates),
            Array1::from(variances),
        )?,
    };

    let forecasts = load_forecast_matrix(forecasts_path.as_ref(), effects.treatment_ids())?;
    Ok((effects, forecasts))
}

fn load_covariance_grid(path: &Path, treatment_ids: &[String]) -> Result<Array2<f64>, DataError> {
    let table = Table::read(path)?;
    let k = treatment_ids.len();
    if table.headers.len() != k || table.records.len() != k {
        return Err(DataError::DimensionMismatch {
            what: format!(
                "{}: expected a {k}x{k} grid, found {} columns and {} rows",
                table.file,
                table.headers.len(),
                table.records.len()
            ),
        });
    }
    let mut order = Vec::with_capacity(k);
    for header in &table.headers {
        match treatment_ids.iter().position(|id| id == header) {
            Some(index) => order.push(index),
            None => {
                return Err(DataError::MisalignedTreatments {
                    unknown: vec![header.clone()],
                    unforecast: vec![],
                })
            }
        }
    }
    {
        let mut seen = vec![false; k];
        for &index in &order {
            seen[index] = true;
        }
        let missing: Vec<String> = seen
            .iter()
            .enumerate()
            .filter(|(_, present)| !**present)
            .map(|(i, _)| treatment_ids[i].clone())
            .collect();
        if !missing.is_empty() {
            return Err(DataError::MisalignedTreatments {
                unknown: vec![],
                unforecast: missing,
            });
        }
    }
    let mut covariance = Array2::zeros((k, k));
    for (row_pos, record) in table.records.iter().enumerate() {
        for col_pos in 0..k {
            let value = table.parse_f64(record, col_pos, &table.headers[col_pos].clone())?;
            covariance[[order[row_pos], order[col_pos]]] = value;
        }
    }
    Ok(covariance)
}

fn load_forecast_matrix(path: &Path, treatment_ids: &[String]) -> Result<ForecastMatrix, DataError> {
    let table = Table::read(path)?;
    let id_col = table.column("treatment_id")?;
    let forecaster_col = table.column("forecaster_id")?;
    let prediction_col = table.column("prediction")?;
    let group_col = table.optional_column("group");

    let k = treatment_ids.len();
    let index_of: BTreeMap<&str, usize> = treatment_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut forecaster_ids: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut groups: BTreeMap<String, String> = BTreeMap::new();
    let mut unknown: Vec<String> = Vec::new();
    let mut seen_treatment = vec![false; k];

    for record in &table.records {
        let treatment = table.cell(record, id_col, "treatment_id")?;
        let forecaster = table.cell(record, forecaster_col, "forecaster_id")?;
        if forecaster.is_empty() {
            return Err(table.invalid(record, "forecaster_id", "empty id".into()));
        }
        let prediction = table.parse_f64(record, prediction_col, "prediction")?;
        if !prediction.is_finite() {
            return Err(table.invalid(
                record,
                "prediction",
                format!("non-finite prediction {prediction}"),
            ));
        }
        let Some(&row) = index_of.get(treatment) else {
            if !unknown.iter().any(|u| u == treatment) {
                unknown.push(treatment.to_string());
            }
            continue;
        };
        seen_treatment[row] = true;
        let col = match forecaster_ids.iter().position(|f| f == forecaster) {
            Some(col) => col,
            None => {
                forecaster_ids.push(forecaster.to_string());
                forecaster_ids.len() - 1
            }
        };
        if cells.insert((row, col), prediction).is_some() {
            return Err(DataError::Duplicate {
                file: table.file.clone(),
                row: table.line(record),
                what: format!("prediction for treatment `{treatment}`, forecaster `{forecaster}`"),
            });
        }
        if let Some(group_col) = group_col {
            let label = table.cell(record, group_col, "group")?;
            if !label.is_empty() {
                match groups.get(forecaster) {
                    Some(existing) if existing != label => {
                        return Err(DataError::InconsistentGroup {
                            file: table.file.clone(),
                            row: table.line(record),
                            forecaster_id: forecaster.to_string(),
                        });
                    }
                    _ => {
                        groups.insert(forecaster.to_string(), label.to_string());
                    }
                }
            }
        }
    }

    let unforecast: Vec<String> = seen_treatment
        .iter()
        .enumerate()
        .filter(|(_, seen)| !**seen)
        .map(|(i, _)| treatment_ids[i].clone())
        .collect();
    if !unknown.is_empty() || !unforecast.is_empty() {
        return Err(DataError::MisalignedTreatments {
            unknown,
            unforecast,
        });
    }
    if forecaster_ids.is_empty() {
        return Err(DataError::Invalid {
            what: format!("{}: no forecasts", table.file),
        });
    }

    let f = forecaster_ids.len();
    let mut predictions = Array2::zeros((k, f));
    let mut missing = Array2::from_elem((k, f), true);
    for ((row, col), value) in cells {
        predictions[[row, col]] = value;
        missing[[row, col]] = false;
    }
    let matrix = ForecastMatrix::new(predictions, missing, forecaster_ids)?;
    if groups.is_empty() {
        Ok(matrix)
    } else {
        matrix.with_groups(&groups)
    }
}

/// Load `categories.csv` (`treatment_id,category,sign`) aligned against the
/// effect study's treatment ordering.
pub fn load_categories<P: AsRef<Path>>(
    path: P,
    treatment_ids: &[String],
) -> Result<Vec<Option<CategoryAssignment>>, DataError> {
    let table = Table::read(path.as_ref())?;
    let id_col = table.column("treatment_id")?;
    let category_col = table.column("category")?;
    let sign_col = table.column("sign")?;

    let mut assignments: Vec<Option<CategoryAssignment>> = vec![None; treatment_ids.len()];
    for record in &table.records {
        let id = table.cell(record, id_col, "treatment_id")?;
        let Some(row) = treatment_ids.iter().position(|t| t == id) else {
            return Err(DataError::MisalignedTreatments {
                unknown: vec![id.to_string()],
                unforecast: vec![],
            });
        };
        if assignments[row].is_some() {
            return Err(DataError::Duplicate {
                file: table.file.clone(),
                row: table.line(record),
                what: format!("category for treatment `{id}`"),
            });
        }
        let category = table.cell(record, category_col, "category")?;
        if category.is_empty() {
            return Err(table.invalid(record, "category", "empty category label".into()));
        }
        let sign_raw = table.cell(record, sign_col, "sign")?;
        let sign = Sign::parse(sign_raw).ok_or_else(|| {
            table.invalid(record, "sign", format!("`{sign_raw}` is not +1 or -1"))
        })?;
        assignments[row] = Some(CategoryAssignment {
            category: category.to_string(),
            sign,
        });
    }
    Ok(assignments)
}

/// Load a replication study: `replication.csv`
/// (`study_id,original_effect,replication_n,replication_p,replication_direction[,alpha]`)
/// plus long-format `replication_forecasts.csv`
/// (`study_id,forecaster_id,probability`). Alpha defaults to 0.05 when the
/// column is absent and must be constant when present.
pub fn load_replication_study<P: AsRef<Path>>(
    replication_path: P,
    forecasts_path: P,
) -> Result<ReplicationDataset, DataError> {
    let table = Table::read(replication_path.as_ref())?;
    let id_col = table.column("study_id")?;
    let effect_col = table.column("original_effect")?;
    let n_col = table.column("replication_n")?;
    let p_col = table.column("replication_p")?;
    let direction_col = table.column("replication_direction")?;
    let alpha_col = table.optional_column("alpha");

    let mut study_ids = Vec::new();
    let mut original_effect = Vec::new();
    let mut replication_n = Vec::new();
    let mut replication_p = Vec::new();
    let mut replication_direction = Vec::new();
    let mut alpha: Option<f64> = None;

    for record in &table.records {
        let id = table.cell(record, id_col, "study_id")?;
        if id.is_empty() {
            return Err(table.invalid(record, "study_id", "empty id".into()));
        }
        if study_ids.contains(&id.to_string()) {
            return Err(DataError::Duplicate {
                file: table.file.clone(),
                row: table.line(record),
                what: format!("study `{id}`"),
            });
        }
        study_ids.push(id.to_string());
        original_effect.push(table.parse_f64(record, effect_col, "original_effect")?);
        replication_n.push(table.parse_u64(record, n_col, "replication_n")?);
        let p = table.parse_f64(record, p_col, "replication_p")?;
        if !(p > 0.0 && p <= 1.0) {
            return Err(table.invalid(
                record,
                "replication_p",
                format!("p-value must be in (0, 1], got {p}"),
            ));
        }
        replication_p.push(p);
        let direction_raw = table.cell(record, direction_col, "replication_direction")?;
        let direction = Sign::parse(direction_raw).ok_or_else(|| {
            table.invalid(
                record,
                "replication_direction",
                format!("`{direction_raw}` is not +1 or -1"),
            )
        })?;
        replication_direction.push(direction);
        if let Some(alpha_col) = alpha_col {
            let value = table.parse_f64(record, alpha_col, "alpha")?;
            match alpha {
                None => alpha = Some(value),
                Some(existing) if (existing - value).abs() > 1e-12 => {
                    return Err(table.invalid(
                        record,
                        "alpha",
                        format!("alpha must be constant, saw {existing} and {value}"),
                    ));
                }
                _ => {}
            }
        }
    }
    if study_ids.is_empty() {
        return Err(DataError::Invalid {
            what: format!("{}: no data rows", table.file),
        });
    }

    let forecasts = load_probability_matrix(forecasts_path.as_ref(), &study_ids)?;
    ReplicationDataset::new(
        study_ids,
        Array1::from(original_effect),
        replication_n,
        Array1::from(replication_p),
        replication_direction,
        alpha.unwrap_or(DEFAULT_ALPHA),
        forecasts,
    )
}

fn load_probability_matrix(path: &Path, study_ids: &[String]) -> Result<ForecastMatrix, DataError> {
    let table = Table::read(path)?;
    let study_col = table.column("study_id")?;
    let forecaster_col = table.column("forecaster_id")?;
    let probability_col = table.column("probability")?;

    let k = study_ids.len();
    let mut forecaster_ids: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut unknown = Vec::new();
    let mut seen = vec![false; k];

    for record in &table.records {
        let study = table.cell(record, study_col, "study_id")?;
        let forecaster = table.cell(record, forecaster_col, "forecaster_id")?;
        let probability = table.parse_f64(record, probability_col, "probability")?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(table.invalid(
                record,
                "probability",
                format!("probability must be in [0, 1], got {probability}"),
            ));
        }
        let Some(row) = study_ids.iter().position(|s| s == study) else {
            if !unknown.iter().any(|u| u == study) {
                unknown.push(study.to_string());
            }
            continue;
        };
        seen[row] = true;
        let col = match forecaster_ids.iter().position(|f| f == forecaster) {
            Some(col) => col,
            None => {
                forecaster_ids.push(forecaster.to_string());
                forecaster_ids.len() - 1
            }
        };
        if cells.insert((row, col), probability).is_some() {
            return Err(DataError::Duplicate {
                file: table.file.clone(),
                row: table.line(record),
                what: format!("forecast for study `{study}`, forecaster `{forecaster}`"),
            });
        }
    }

    let unforecast: Vec<String> = seen
        .iter()
        .enumerate()
        .filter(|(_, s)| !**s)
        .map(|(i, _)| study_ids[i].clone())
        .collect();
    if !unknown.is_empty() || !unforecast.is_empty() {
        return Err(DataError::MisalignedStudies {
            unknown,
            unforecast,
        });
    }

    let f = forecaster_ids.len();
    let mut predictions = Array2::zeros((k, f));
    let mut missing = Array2::from_elem((k, f), true);
    for ((row, col), value) in cells {
        predictions[[row, col]] = value;
        missing[[row, col]] = false;
    }
    ForecastMatrix::new(predictions, missing, forecaster_ids)
}

fn create(path: &Path) -> Result<File, DataError> {
    File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_io(path: &Path, result: std::io::Result<()>) -> Result<(), DataError> {
    result.map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write `effects.csv` with a variance column. Requires diagonal Σ; values
/// use the shortest decimal representation that round-trips.
pub fn write_effects_csv<P: AsRef<Path>>(
    path: P,
    effects: &EffectEstimates,
) -> Result<(), DataError> {
    if !effects.is_diagonal() {
        return Err(DataError::Invalid {
            what: "cannot write a variance column for non-diagonal covariance".into(),
        });
    }
    let path = path.as_ref();
    let mut out = create(path)?;
    let mut buffer = String::from("treatment_id,estimate,variance\n");
    let variances = effects.variances();
    for (idx, id) in effects.treatment_ids().iter().enumerate() {
        buffer.push_str(&format!("{id},{},{}\n", effects.estimates()[idx], variances[idx]));
    }
    write_io(path, out.write_all(buffer.as_bytes()))
}

/// Write long-format `forecasts.csv`, skipping missing cells. A group
/// column is included when any forecaster carries a label.
pub fn write_forecasts_csv<P: AsRef<Path>>(
    path: P,
    treatment_ids: &[String],
    forecasts: &ForecastMatrix,
) -> Result<(), DataError> {
    if treatment_ids.len() != forecasts.num_treatments() {
        return Err(DataError::DimensionMismatch {
            what: format!(
                "{} treatment ids vs {} forecast rows",
                treatment_ids.len(),
                forecasts.num_treatments()
            ),
        });
    }
    let path = path.as_ref();
    let mut out = create(path)?;
    let with_groups = forecasts.has_groups();
    let mut buffer = String::from(if with_groups {
        "treatment_id,forecaster_id,prediction,group\n"
    } else {
        "treatment_id,forecaster_id,prediction\n"
    });
    for row in 0..forecasts.num_treatments() {
        for col in 0..forecasts.num_forecasters() {
            if let Some(value) = forecasts.prediction(row, col) {
                if with_groups {
                    buffer.push_str(&format!(
                        "{},{},{},{}\n",
                        treatment_ids[row],
                        forecasts.forecaster_ids()[col],
                        value,
                        forecasts.group_of(col).unwrap_or("")
                    ));
                } else {
                    buffer.push_str(&format!(
                        "{},{},{}\n",
                        treatment_ids[row],
                        forecasts.forecaster_ids()[col],
                        value
                    ));
                }
            }
        }
    }
    write_io(path, out.write_all(buffer.as_bytes()))
}

/// Write `replication.csv` and `replication_forecasts.csv` for a dataset.
pub fn write_replication_csvs<P: AsRef<Path>>(
    replication_path: P,
    forecasts_path: P,
    dataset: &ReplicationDataset,
) -> Result<(), DataError> {
    let path = replication_path.as_ref();
    let mut out = create(path)?;
    let mut buffer =
        String::from("study_id,original_effect,replication_n,replication_p,replication_direction,alpha\n");
    for idx in 0..dataset.len() {
        let direction = match dataset.replication_direction()[idx] {
            Sign::Positive => "1",
            Sign::Negative => "-1",
        };
        buffer.push_str(&format!(
            "{},{},{},{},{},{}\n",
            dataset.study_ids()[idx],
            dataset.original_effect()[idx],
            dataset.replication_n()[idx],
            dataset.replication_p()[idx],
            direction,
            dataset.alpha()
        ));
    }
    write_io(path, out.write_all(buffer.as_bytes()))?;

    let path = forecasts_path.as_ref();
    let mut out = create(path)?;
    let forecasts = dataset.forecasts();
    let mut buffer = String::from("study_id,forecaster_id,probability\n");
    for row in 0..forecasts.num_treatments() {
        for col in 0..forecasts.num_forecasters() {
            if let Some(value) = forecasts.prediction(row, col) {
                buffer.push_str(&format!(
                    "{},{},{}\n",
                    dataset.study_ids()[row],
                    forecasts.forecaster_ids()[col],
                    value
                ));
            }
        }
    }
    write_io(path, out.write_all(buffer.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::fs;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, contents).unwrap();
        path
    }

    #[test]
    fn loads_small_effect_study() {
        let dir = TempDir::new().unwrap();
        let effects = write(
            &dir,
            "effects.csv",
            "treatment_id,estimate,variance\nt1,0.5,0.04\nt2,-0.25,0.09\n",
        );
        let forecasts = write(
            &dir,
            "forecasts.csv",
            "treatment_id,forecaster_id,prediction\n\
             t1,a,1.0\nt1,b,2.0\nt1,c,0.0\nt2,a,0.5\nt2,b,0.25\nt2,c,-1.0\n",
        );
        let (effects, matrix) = load_effect_study(&effects, &forecasts, None).unwrap();
        assert_eq!(effects.len(), 2);
        assert!(effects.is_diagonal());
        assert_relative_eq!(effects.covariance()[[1, 1]], 0.09);
        assert_eq!(matrix.num_forecasters(), 3);
        assert_eq!(matrix.prediction(1, 2), Some(-1.0));
        assert_eq!(matrix.observed_count(), 6);
    }

    #[test]
    fn rejects_unknown_forecast_treatment() {
        let dir = TempDir::new().unwrap();
        let effects = write(&dir, "effects.csv", "treatment_id,estimate,variance\nt1,0.5,0.04\n");
        let forecasts = write(
            &dir,
            "forecasts.csv",
            "treatment_id,forecaster_id,prediction\nt1,a,1.0\nt9,a,1.0\n",
        );
        let err = load_effect_study(&effects, &forecasts, None).unwrap_err();
        match err {
            DataError::MisalignedTreatments { unknown, .. } => {
                assert_eq!(unknown, vec!["t9".to_string()])
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_variance_with_row() {
        let dir = TempDir::new().unwrap();
        let effects = write(
            &dir,
            "effects.csv",
            "treatment_id,estimate,variance\nt1,0.5,0.04\nt2,0.1,-0.01\n",
        );
        let forecasts = write(
            &dir,
            "forecasts.csv",
            "treatment_id,forecaster_id,prediction\nt1,a,1.0\nt2,a,1.0\n",
        );
        let err = load_effect_study(&effects, &forecasts, None).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("positive semi-definite"), "{message}");
        assert!(message.contains("line 3"), "{message}");
    }

    #[test]
    fn rejects_non_numeric_cell_with_location() {
        let dir = TempDir::new().unwrap();
        let effects = write(
            &dir,
            "effects.csv",
            "treatment_id,estimate,variance\nt1,abc,0.04\n",
        );
        let forecasts = write(
            &dir,
            "forecasts.csv",
            "treatment_id,forecaster_id,prediction\nt1,a,1.0\n",
        );
        let err = load_effect_study(&effects, &forecasts, None).unwrap_err();
        match err {
            DataError::InvalidCell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "estimate");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn loads_full_covariance_grid() {
        let dir = TempDir::new().unwrap();
        let effects = write(
            &dir,
            "effects.csv",
            "treatment_id,estimate\nt1,0.5\nt2,0.1\n",
        );
        let forecasts = write(
            &dir,
            "forecasts.csv",
            "treatment_id,forecaster_id,prediction\nt1,a,1.0\nt2,a,1.0\n",
        );
        let covariance = write(&dir, "covariance.csv", "t2,t1\n0.09,0.01\n0.01,0.04\n");
        let (effects, _) = load_effect_study(&effects, &forecasts, Some(&covariance)).unwrap();
        // Grid columns are permuted into effects order.
        assert_relative_eq!(effects.covariance()[[0, 0]], 0.04);
        assert_relative_eq!(effects.covariance()[[1, 1]], 0.09);
        assert_relative_eq!(effects.covariance()[[0, 1]], 0.01);
        assert!(!effects.is_diagonal());
    }

    #[test]
    fn forecast_groups_parse_and_conflict() {
        let dir = TempDir::new().unwrap();
        let effects = write(&dir, "effects.csv", "treatment_id,estimate,variance\nt1,0.5,0.04\n");
        let ok = write(
            &dir,
            "forecasts.csv",
            "treatment_id,forecaster_id,prediction,group\nt1,a,1.0,novice\nt1,b,2.0,\n",
        );
        let (_, matrix) = load_effect_study(&effects, &ok, None).unwrap();
        assert_eq!(matrix.group_of(0), Some("novice"));
        assert_eq!(matrix.group_of(1), None);

        let effects2 = write(
            &dir,
            "effects2.csv",
            "treatment_id,estimate,variance\nt1,0.5,0.04\nt2,0.1,0.04\n",
        );
        let conflict = write(
            &dir,
            "forecasts2.csv",
            "treatment_id,forecaster_id,prediction,group\nt1,a,1.0,novice\nt2,a,2.0,expert\n",
        );
        let err = load_effect_study(&effects2, &conflict, None).unwrap_err();
        assert!(matches!(err, DataError::InconsistentGroup { .. }));
    }

    #[test]
    fn loads_categories() {
        let dir = TempDir::new().unwrap();
        let path = write(
            &dir,
            "categories.csv",
            "treatment_id,category,sign\nt1,discounting,-1\nt2,social,+1\n",
        );
        let ids = vec!["t1".to_string(), "t2".to_string(), "t3".to_string()];
        let categories = load_categories(&path, &ids).unwrap();
        assert_eq!(categories[0].as_ref().unwrap().sign, Sign::Negative);
        assert_eq!(categories[1].as_ref().unwrap().category, "social");
        assert!(categories[2].is_none());
    }

    #[test]
    fn loads_replication_study() {
        let dir = TempDir::new().unwrap();
        let replication = write(
            &dir,
            "replication.csv",
            "study_id,original_effect,replication_n,replication_p,replication_direction\n\
             s1,0.4,100,0.04,1\ns2,0.2,250,0.5,-1\n",
        );
        let forecasts = write(
            &dir,
            "replication_forecasts.csv",
            "study_id,forecaster_id,probability\ns1,a,0.6\ns1,b,0.5\ns2,a,0.3\ns2,b,0.4\n",
        );
        let data = load_replication_study(&replication, &forecasts).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.alpha(), DEFAULT_ALPHA);
        assert_eq!(data.replication_n(), &[100, 250]);
        assert_eq!(data.forecasts().prediction(1, 1), Some(0.4));
    }

    #[test]
    fn replication_rejects_p_zero_and_bad_probability() {
        let dir = TempDir::new().unwrap();
        let bad_p = write(
            &dir,
            "replication.csv",
            "study_id,original_effect,replication_n,replication_p,replication_direction\n\
             s1,0.4,100,0.0,1\n",
        );
        let forecasts = write(
            &dir,
            "replication_forecasts.csv",
            "study_id,forecaster_id,probability\ns1,a,0.6\n",
        );
        let err = load_replication_study(&bad_p, &forecasts).unwrap_err();
        assert!(matches!(err, DataError::InvalidCell { .. }));

        let replication = write(
            &dir,
            "replication2.csv",
            "study_id,original_effect,replication_n,replication_p,replication_direction\n\
             s1,0.4,100,0.04,1\n",
        );
        let bad_prob = write(
            &dir,
            "replication_forecasts2.csv",
            "study_id,forecaster_id,probability\ns1,a,1.3\n",
        );
        let err = load_replication_study(&replication, &bad_prob).unwrap_err();
        match err {
            DataError::InvalidCell { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "probability");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = TempDir::new().unwrap();
        let effects = write(
            &dir,
            "effects.csv",
            "treatment_id,estimate,variance\nt1,0.1234567890123456,0.04\nt2,-3.5e-7,1.25\n",
        );
        let forecasts = write(
            &dir,
            "forecasts.csv",
            "treatment_id,forecaster_id,prediction\nt1,a,0.3333333333333333\nt2,a,2.0\nt2,b,7.125\nt1,b,0.1\n",
        );
        let (effects1, matrix1) = load_effect_study(&effects, &forecasts, None).unwrap();

        let effects_out = dir.path().join("effects_out.csv");
        let forecasts_out = dir.path().join("forecasts_out.csv");
        write_effects_csv(&effects_out, &effects1).unwrap();
        write_forecasts_csv(&forecasts_out, effects1.treatment_ids(), &matrix1).unwrap();
        let (effects2, matrix2) = load_effect_study(&effects_out, &forecasts_out, None).unwrap();

        assert_eq!(effects1.estimates(), effects2.estimates());
        assert_eq!(effects1.covariance(), effects2.covariance());
        assert_eq!(matrix1.predictions(), matrix2.predictions());
        assert_eq!(matrix1.missing_mask(), matrix2.missing_mask());
    }
}
