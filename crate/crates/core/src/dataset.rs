//! Long-format CSV datasets: `utility,industry,year,consumption`, one row per
//! grid cell.
//!
//! Utility and industry axes follow first appearance in the file; the year
//! axis is sorted and must be consecutive. Row numbers in errors are 1-based
//! file lines, the header being line 1.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::tensor::DemandTensor;

pub const HEADER: [&str; 4] = ["utility", "industry", "year", "consumption"];

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::DatasetFormat(e.to_string())
}

struct Row {
    line: usize,
    utility: usize,
    industry: usize,
    year: i32,
    value: f64,
}

fn index_of(labels: &mut Vec<String>, lookup: &mut HashMap<String, usize>, label: &str) -> usize {
    if let Some(&i) = lookup.get(label) {
        return i;
    }
    labels.push(label.to_string());
    lookup.insert(label.to_string(), labels.len() - 1);
    labels.len() - 1
}

pub fn read_csv<R: Read>(reader: R) -> Result<DemandTensor> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(format_err)?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Dataset {
            row: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut utilities = Vec::new();
    let mut industries = Vec::new();
    let mut utility_ix = HashMap::new();
    let mut industry_ix = HashMap::new();
    let mut rows = Vec::new();

    for record in rdr.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => Error::Dataset {
                row: pos.line() as usize,
                message: e.to_string(),
            },
            None => format_err(e),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |message: String| Error::Dataset { row: line, message };

        let year: i32 = record[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("year `{}` is not an integer", &record[2])))?;
        let value: f64 = record[3]
            .trim()
            .parse()
            .map_err(|_| bad(format!("consumption `{}` is not a number", &record[3])))?;
        if !value.is_finite() {
            return Err(bad(format!("consumption `{}` is not finite", &record[3])));
        }
        if value < 0.0 {
            return Err(bad(format!("consumption {value} is negative")));
        }
        rows.push(Row {
            line,
            utility: index_of(&mut utilities, &mut utility_ix, &record[0]),
            industry: index_of(&mut industries, &mut industry_ix, &record[1]),
            year,
            value,
        });
    }
    if rows.is_empty() {
        return Err(Error::DatasetFormat("dataset has no rows".into()));
    }

    let mut years: Vec<i32> = rows.iter().map(|r| r.year).collect();
    years.sort_unstable();
    years.dedup();
    if let Some(w) = years.windows(2).find(|w| w[1] != w[0] + 1) {
        let row = rows.iter().find(|r| r.year == w[1]).map(|r| r.line).unwrap_or(0);
        return Err(Error::Dataset {
            row,
            message: format!("years are not consecutive: {} is followed by {}", w[0], w[1]),
        });
    }
    let first_year = years[0];

    let dims = (utilities.len(), industries.len(), years.len());
    let mut values = Array3::<f64>::zeros(dims);
    let mut seen: Array3<usize> = Array3::zeros(dims);
    for r in &rows {
        let k = (r.year - first_year) as usize;
        let slot = &mut seen[[r.utility, r.industry, k]];
        if *slot != 0 {
            return Err(Error::Dataset {
                row: r.line,
                message: format!(
                    "duplicate (utility={}, industry={}, year={}), first seen at row {}",
                    utilities[r.utility], industries[r.industry], r.year, slot
                ),
            });
        }
        *slot = r.line;
        values[[r.utility, r.industry, k]] = r.value;
    }
    if let Some(((i, j, k), _)) = seen.indexed_iter().find(|(_, &line)| line == 0) {
        return Err(Error::IncompleteGrid {
            utility: utilities[i].clone(),
            industry: industries[j].clone(),
            year: years[k],
        });
    }

    DemandTensor::new(values, utilities, industries, years)
}

pub fn read_csv_path(path: &Path) -> Result<DemandTensor> {
    let file = File::open(path).map_err(|e| Error::DatasetFormat(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file)
}

/// Writes every cell in utility, industry, year order. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(t: &DemandTensor, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(HEADER).map_err(format_err)?;
    let (ni, nj, nk) = t.dims();
    for i in 0..ni {
        for j in 0..nj {
            for k in 0..nk {
                let year = t.year_labels()[k].to_string();
                let value = t.values()[[i, j, k]].to_string();
                wtr.write_record([
                    t.utility_labels()[i].as_str(),
                    t.industry_labels()[j].as_str(),
                    year.as_str(),
                    value.as_str(),
                ])
                .map_err(format_err)?;
            }
        }
    }
    wtr.flush().map_err(format_err)?;
    Ok(())
}
