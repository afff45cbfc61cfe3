//! CSV input and group-size sidecar files.

use std::path::Path;

use crate::design::{GroupPartition, GroupedDesign};
use crate::error::{GqrError, Result};
use crate::Matrix;

/// Numeric table read from CSV.
#[derive(Debug, Clone)]
pub struct Table {
    /// Column names when the file has a header row.
    pub names: Option<Vec<String>>,
    pub data: Matrix,
}

/// Which column holds the response.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseColumn {
    /// Header name, or a 1-based column number.
    Named(String),
    First,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column_index(&self, which: &ResponseColumn) -> Result<usize> {
        match which {
            ResponseColumn::First => Ok(0),
            ResponseColumn::Named(name) => {
                if let Some(i) = self.names.as_ref().and_then(|n| n.iter().position(|c| c == name)) {
                    return Ok(i);
                }
                match name.parse::<usize>() {
                    Ok(j) if j >= 1 && j <= self.ncols() => Ok(j - 1),
                    _ => Err(GqrError::Parse(format!("no column '{name}'"))),
                }
            }
        }
    }

    /// Response vector and the remaining columns, in file order.
    pub fn split_response(&self, which: &ResponseColumn) -> Result<(Vec<f64>, Matrix)> {
        let r = self.column_index(which)?;
        let y = self.data.column(r).iter().copied().collect();
        let keep: Vec<usize> = (0..self.ncols()).filter(|&j| j != r).collect();
        Ok((y, self.data.select_columns(&keep)))
    }
}

/// Reads a numeric CSV. With `header = None` the first record is a header
/// exactly when one of its fields does not parse as a number.
pub fn read_csv(path: &Path, header: Option<bool>) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = reader.records();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut names = None;
    if let Some(first) = records.next() {
        let first = first?;
        let parsed: std::result::Result<Vec<f64>, _> = first.iter().map(str::parse::<f64>).collect();
        let is_header = header.unwrap_or(parsed.is_err());
        if is_header {
            names = Some(first.iter().map(str::to_string).collect());
        } else {
            rows.push(parsed.map_err(|e| GqrError::Parse(format!("row 1: {e}")))?);
        }
    }
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| GqrError::Parse(format!("row {}: {e}", i + 2)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(GqrError::Parse("no data rows".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(GqrError::Parse("rows have different lengths".into()));
    }
    if names.as_ref().is_some_and(|n: &Vec<String>| n.len() != ncols) {
        return Err(GqrError::Parse("header and data widths differ".into()));
    }
    let data = Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    Ok(Table { names, data })
}

/// Parses group sizes separated by commas and/or whitespace, e.g. `1,5,5`.
pub fn parse_group_sizes(text: &str) -> Result<Vec<usize>> {
    let sizes = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| GqrError::Parse(format!("bad group size '{t}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    if sizes.is_empty() {
        return Err(GqrError::Parse("empty group file".into()));
    }
    Ok(sizes)
}

pub fn read_group_sizes(path: &Path) -> Result<Vec<usize>> {
    parse_group_sizes(&std::fs::read_to_string(path)?)
}

/// Builds a grouped design from covariate columns and group sizes whose first
/// entry is the intercept group. An intercept column is prepended when the
/// sizes cover one more column than given; otherwise the first column must
/// already be the intercept.
pub fn design_from_columns(covariates: &Matrix, sizes: &[usize]) -> Result<GroupedDesign> {
    let total: usize = sizes.iter().sum();
    let ncols = covariates.ncols();
    if sizes.first() != Some(&1) {
        return Err(GqrError::InvalidPartition(
            "the first group must be the intercept, of size 1".into(),
        ));
    }
    if total == ncols + 1 {
        GroupedDesign::with_intercept(covariates, sizes)
    } else if total == ncols {
        GroupedDesign::new(covariates.clone(), GroupPartition::from_sizes(sizes)?)
    } else {
        Err(GqrError::DimensionMismatch(format!(
            "group sizes cover {total} columns, data has {ncols} covariates"
        )))
    }
}

/// Group sizes as a comma-separated string.
pub fn format_group_sizes(partition: &GroupPartition) -> String {
    partition
        .sizes()
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
