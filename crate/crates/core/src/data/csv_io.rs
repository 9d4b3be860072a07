//! CSV ingestion and export. Missing treatment / outcome cells are empty
//! strings; no numeric sentinels are recognised.

use std::io::{Read, Write};
use std::path::Path;

use super::spec::{Kind, ObservabilityMode, Role, TableSpec};
use super::table::{Columns, ObservationTable};
use crate::error::{Error, Result};

pub fn load_csv(path: impl AsRef<Path>, spec: &TableSpec, mode: ObservabilityMode) -> Result<ObservationTable> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, spec, mode)
}

pub fn read_csv<R: Read>(reader: R, spec: &TableSpec, mode: ObservabilityMode) -> Result<ObservationTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();

    // Position of each spec column in the file.
    let mut positions = Vec::with_capacity(spec.columns().len());
    for col in spec.columns() {
        let hits: Vec<_> = headers.iter().enumerate().filter(|(_, h)| *h == col.name).collect();
        match hits.len() {
            1 => positions.push(hits[0].0),
            0 => return Err(Error::Schema(format!("header is missing column `{}`", col.name))),
            _ => return Err(Error::Schema(format!("header repeats column `{}`", col.name))),
        }
    }

    let n_cov = spec.covariates().count();
    let mut cols = Columns { covariates: vec![Vec::new(); n_cov], ..Default::default() };

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let mut cov_idx = 0;
        for (col, &pos) in spec.columns().iter().zip(&positions) {
            let cell = record.get(pos).unwrap_or("");
            let parse_err = |reason: &str| Error::Parse {
                row,
                column: col.name.clone(),
                value: cell.to_string(),
                reason: reason.to_string(),
            };
            let missing = cell.is_empty();
            match col.role {
                Role::Source => {
                    let s = Kind::Binary.code(cell).ok_or_else(|| parse_err("source must be 0 or 1"))?;
                    cols.source.push(s as u8);
                }
                Role::Treatment => {
                    let a = if missing {
                        None
                    } else {
                        Some(col.kind.code(cell).ok_or_else(|| parse_err("unknown treatment level"))?)
                    };
                    cols.treatment.push(a);
                }
                Role::Exposure => {
                    if missing {
                        return Err(parse_err("exposure may not be missing"));
                    }
                    cols.exposure.push(col.kind.code(cell).ok_or_else(|| parse_err("unknown exposure level"))?);
                }
                Role::Outcome => {
                    let y = if missing { None } else { Some(parse_value(&col.kind, cell).ok_or_else(|| parse_err("invalid outcome"))?) };
                    cols.outcome.push(y);
                }
                Role::Covariate => {
                    if missing {
                        return Err(parse_err("covariates may not be missing"));
                    }
                    let v = parse_value(&col.kind, cell).ok_or_else(|| parse_err("invalid covariate value"))?;
                    cols.covariates[cov_idx].push(v);
                    cov_idx += 1;
                }
            }
        }
    }
    ObservationTable::from_columns(spec.clone(), mode, cols)
}

fn parse_value(kind: &Kind, cell: &str) -> Option<f64> {
    match kind {
        Kind::Continuous => cell.parse::<f64>().ok().filter(|v| v.is_finite()),
        _ => kind.code(cell).map(f64::from),
    }
}

fn format_value(kind: &Kind, v: f64) -> String {
    match kind {
        Kind::Continuous => format!("{v}"),
        _ => kind.label(v as u32),
    }
}

/// Write a table with the spec's column order; reloading under the same spec
/// and mode reproduces it exactly.
pub fn write_csv<W: Write>(table: &ObservationTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let spec = table.spec();
    wtr.write_record(spec.columns().iter().map(|c| c.name.as_str()))?;
    for i in 0..table.n() {
        let mut cov = table.covariates().iter();
        let mut record = Vec::with_capacity(spec.columns().len());
        for col in spec.columns() {
            record.push(match col.role {
                Role::Source => table.source()[i].to_string(),
                Role::Treatment => table.treatment()[i].map(|a| col.kind.label(a)).unwrap_or_default(),
                Role::Exposure => col.kind.label(table.exposure()[i]),
                Role::Outcome => table.outcome()[i].map(|y| format_value(&col.kind, y)).unwrap_or_default(),
                Role::Covariate => {
                    let c = cov.next().expect("covariates follow spec order");
                    format_value(&c.kind, c.values[i])
                }
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(table: &ObservationTable, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(table, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::spec::ColumnSpec;

    fn spec() -> TableSpec {
        TableSpec::new(vec![
            ColumnSpec::new("S", Role::Source, Kind::Binary),
            ColumnSpec::new("L1", Role::Covariate, Kind::Continuous),
            ColumnSpec::new("race", Role::Covariate, Kind::Categorical(vec!["w".into(), "b".into(), "o".into()])),
            ColumnSpec::new("A", Role::Treatment, Kind::Binary),
            ColumnSpec::new("M", Role::Exposure, Kind::Binary),
            ColumnSpec::new("Y", Role::Outcome, Kind::Binary),
        ])
        .unwrap()
    }

    #[test]
    fn two_row_file_loads() {
        let data = "S,L1,race,A,M,Y\n0,0.5,w,,1,1\n1,-1.25,o,1,0,\n";
        let t = read_csv(data.as_bytes(), &spec(), ObservabilityMode::TreatmentUnmeasured).unwrap();
        assert_eq!(t.n(), 2);
        assert_eq!(t.source_counts(), (1, 1));
        assert_eq!(t.covariates()[1].values, vec![0.0, 2.0]);
        assert_eq!(t.treatment(), &[None, Some(1)]);
    }

    #[test]
    fn observed_target_treatment_is_a_presence_error() {
        let data = "S,L1,race,A,M,Y\n0,0.5,w,1,1,1\n1,-1.25,o,1,0,\n";
        let err = read_csv(data.as_bytes(), &spec(), ObservabilityMode::TreatmentUnmeasured).unwrap_err();
        assert!(matches!(err, Error::Presence { row: 0, .. }), "{err}");
    }

    #[test]
    fn zero_support_constant_treatment_accepted() {
        let data = "S,L1,race,A,M,Y\n0,0.5,w,0,1,1\n0,0.1,b,0,0,0\n1,-1.25,o,1,0,\n";
        let t = read_csv(data.as_bytes(), &spec(), ObservabilityMode::TreatmentZeroSupport).unwrap();
        assert_eq!(t.source_counts(), (2, 1));
    }

    #[test]
    fn missing_header_and_bad_cells() {
        let data = "S,L1,A,M,Y\n0,0.5,,1,1\n";
        assert!(matches!(
            read_csv(data.as_bytes(), &spec(), ObservabilityMode::TreatmentUnmeasured),
            Err(Error::Schema(_))
        ));
        let data = "S,L1,race,A,M,Y\n0,abc,w,,1,1\n1,0,o,1,0,\n";
        let err = read_csv(data.as_bytes(), &spec(), ObservabilityMode::TreatmentUnmeasured).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 0, .. }));
        let data = "S,L1,race,A,M,Y\n0,1,purple,,1,1\n1,0,o,1,0,\n";
        assert!(matches!(
            read_csv(data.as_bytes(), &spec(), ObservabilityMode::TreatmentUnmeasured),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn extra_columns_are_ignored() {
        let data = "id,S,L1,race,A,M,Y\n7,0,0.5,w,,1,1\n8,1,-1.25,o,1,0,\n";
        let t = read_csv(data.as_bytes(), &spec(), ObservabilityMode::TreatmentUnmeasured).unwrap();
        assert_eq!(t.n(), 2);
    }

    #[test]
    fn round_trip_is_exact() {
        let data = "S,L1,race,A,M,Y\n0,0.1,w,,1,1\n1,-0.30000000000000004,o,1,0,\n0,1e-300,b,,0,0\n";
        let t = read_csv(data.as_bytes(), &spec(), ObservabilityMode::TreatmentUnmeasured).unwrap();
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &spec(), ObservabilityMode::TreatmentUnmeasured).unwrap();
        assert_eq!(t, back);
    }
}
