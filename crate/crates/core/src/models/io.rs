//! CSV ingestion and export. One file per dataset with a header row:
//! `y,delta,z1..zd` (cox-rc), `c,delta,z1..zd` (cox-cs), `y,w,z` (partly-linear).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::models::{
    CoxCsData, CoxCsObs, CoxRcData, CoxRcObs, Dataset, ModelKind, PartlyLinearData, PartlyLinearObs,
};

struct Columns {
    time: usize,
    second: usize,
    covariates: Vec<usize>,
}

fn expected_columns(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::CoxRc => "y,delta,z1..zd",
        ModelKind::CoxCs => "c,delta,z1..zd",
        ModelKind::PartlyLinear => "y,w,z",
    }
}

fn resolve_columns(kind: ModelKind, header: &csv::StringRecord) -> Result<Columns> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let find = |name: &str| names.iter().position(|h| *h == name);
    let schema_error = |what: String| {
        Error::Schema(format!(
            "{what}; {kind} expects columns {} but found [{}]",
            expected_columns(kind),
            names.join(",")
        ))
    };
    let (first, second) = match kind {
        ModelKind::CoxRc => ("y", "delta"),
        ModelKind::CoxCs => ("c", "delta"),
        ModelKind::PartlyLinear => ("y", "w"),
    };
    let time = find(first).ok_or_else(|| schema_error(format!("missing column `{first}`")))?;
    let second = find(second).ok_or_else(|| schema_error(format!("missing column `{second}`")))?;
    let covariates = match kind {
        ModelKind::PartlyLinear => vec![find("z").ok_or_else(|| schema_error("missing column `z`".into()))?],
        _ => {
            let cols: Vec<usize> = (1..).map_while(|j| find(&format!("z{j}"))).collect();
            if cols.is_empty() {
                return Err(schema_error("missing covariate column `z1`".into()));
            }
            cols
        }
    };
    let known = 2 + covariates.len();
    if names.len() != known {
        let extra: Vec<&str> = names
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != time && *i != second && !covariates.contains(i))
            .map(|(_, n)| *n)
            .collect();
        return Err(schema_error(format!("unexpected columns [{}]", extra.join(","))));
    }
    Ok(Columns {
        time,
        second,
        covariates,
    })
}

fn parse_field(record: &csv::StringRecord, col: usize, row: usize, name: &str) -> Result<f64> {
    let raw = record.get(col).unwrap_or("").trim();
    raw.parse::<f64>()
        .map_err(|_| Error::Schema(format!("row {}: column `{name}` has non-numeric value `{raw}`", row + 1)))
}

fn parse_delta(record: &csv::StringRecord, col: usize, row: usize) -> Result<bool> {
    match parse_field(record, col, row, "delta")? {
        0.0 => Ok(false),
        1.0 => Ok(true),
        v => Err(Error::Schema(format!("row {}: delta must be 0 or 1, got {v}", row + 1))),
    }
}

pub fn read_dataset<R: Read>(kind: ModelKind, reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = resolve_columns(kind, &header)?;
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::Schema("file has a header but no data rows".into()));
    }
    let covariates = |rec: &csv::StringRecord, row: usize| -> Result<Vec<f64>> {
        cols.covariates
            .iter()
            .enumerate()
            .map(|(j, &c)| parse_field(rec, c, row, &format!("z{}", j + 1)))
            .collect()
    };
    Ok(match kind {
        ModelKind::CoxRc => {
            let obs = records
                .iter()
                .enumerate()
                .map(|(row, rec)| {
                    Ok(CoxRcObs {
                        y: parse_field(rec, cols.time, row, "y")?,
                        delta: parse_delta(rec, cols.second, row)?,
                        z: covariates(rec, row)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Dataset::CoxRc(CoxRcData::new(obs)?)
        }
        ModelKind::CoxCs => {
            let obs = records
                .iter()
                .enumerate()
                .map(|(row, rec)| {
                    Ok(CoxCsObs {
                        c: parse_field(rec, cols.time, row, "c")?,
                        delta: parse_delta(rec, cols.second, row)?,
                        z: covariates(rec, row)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Dataset::CoxCs(CoxCsData::new(obs)?)
        }
        ModelKind::PartlyLinear => {
            let obs = records
                .iter()
                .enumerate()
                .map(|(row, rec)| {
                    Ok(PartlyLinearObs {
                        y: parse_field(rec, cols.time, row, "y")?,
                        w: parse_field(rec, cols.second, row, "w")?,
                        z: parse_field(rec, cols.covariates[0], row, "z")?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Dataset::PartlyLinear(PartlyLinearData::new(obs)?)
        }
    })
}

pub fn read_dataset_file(kind: ModelKind, path: &Path) -> Result<Dataset> {
    read_dataset(kind, std::fs::File::open(path)?)
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let zcols = |d: usize| (1..=d).map(|j| format!("z{j}")).collect::<Vec<_>>();
    let num = |v: f64| format!("{v:?}");
    match data {
        Dataset::CoxRc(d) => {
            let mut header = vec!["y".to_string(), "delta".to_string()];
            header.extend(zcols(d.dim()));
            wtr.write_record(&header)?;
            for o in d.observations() {
                let mut rec = vec![num(o.y), u8::from(o.delta).to_string()];
                rec.extend(o.z.iter().map(|&v| num(v)));
                wtr.write_record(&rec)?;
            }
        }
        Dataset::CoxCs(d) => {
            let mut header = vec!["c".to_string(), "delta".to_string()];
            header.extend(zcols(d.dim()));
            wtr.write_record(&header)?;
            for o in d.observations() {
                let mut rec = vec![num(o.c), u8::from(o.delta).to_string()];
                rec.extend(o.z.iter().map(|&v| num(v)));
                wtr.write_record(&rec)?;
            }
        }
        Dataset::PartlyLinear(d) => {
            wtr.write_record(["y", "w", "z"])?;
            for o in d.observations() {
                wtr.write_record([num(o.y), num(o.w), num(o.z)])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{generate_data, ModelConfig};

    #[test]
    fn missing_delta_is_schema_error() {
        let csv = "y,z1\n1.0,0.5\n";
        let err = read_dataset(ModelKind::CoxRc, csv.as_bytes()).unwrap_err();
        let Error::Schema(msg) = err else { panic!("wrong error") };
        assert!(msg.contains("delta"), "{msg}");
    }

    #[test]
    fn bad_delta_value() {
        let csv = "c,delta,z1\n1.0,2,0.5\n";
        assert!(matches!(read_dataset(ModelKind::CoxCs, csv.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn round_trip_preserves_rows() {
        for kind in [ModelKind::CoxRc, ModelKind::CoxCs, ModelKind::PartlyLinear] {
            let data = generate_data(&ModelConfig::new(kind), 25, 4).unwrap();
            let mut buf = Vec::new();
            write_dataset(&data, &mut buf).unwrap();
            assert_eq!(read_dataset(kind, buf.as_slice()).unwrap(), data);
        }
    }

    #[test]
    fn column_order_is_free() {
        let csv = "z,w,y\n0.5,0.1,2.0\n";
        let Dataset::PartlyLinear(d) = read_dataset(ModelKind::PartlyLinear, csv.as_bytes()).unwrap() else {
            unreachable!()
        };
        assert_eq!(d.observations()[0], PartlyLinearObs { y: 2.0, w: 0.1, z: 0.5 });
    }
}
