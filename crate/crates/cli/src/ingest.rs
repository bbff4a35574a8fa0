//! CSV datasets. Headers: probit `z,m,w1..wp`; logistic `z,w1..wp`; gp `z,s1..sd`.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use perturb_core::gp::GPData;
use perturb_core::logistic::LogisticData;
use perturb_core::probit::ProbitData;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schema {
    Probit,
    Logistic,
    Gp,
}

impl Schema {
    fn fixed(self) -> &'static [&'static str] {
        match self {
            Schema::Probit => &["z", "m"],
            Schema::Logistic | Schema::Gp => &["z"],
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Schema::Gp => "s",
            _ => "w",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IngestError {
    pub source: String,
    /// 1-based data row, header excluded.
    pub row: Option<usize>,
    pub message: String,
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(r) => write!(f, "{}: row {r}: {}", self.source, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for IngestError {}

#[derive(Clone, Debug)]
pub enum Dataset {
    Probit(ProbitData),
    Logistic(LogisticData),
    Gp(GPData),
}

/// Parsed numeric table before conversion to a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub fixed: Vec<Vec<f64>>,
    pub columns: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path, schema: Schema) -> Result<Table, IngestError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| IngestError { source: name.clone(), row: None, message: format!("cannot open: {e}") })?;
    read_table_from(file, &name, schema)
}

pub fn read_table_from<R: std::io::Read>(reader: R, source: &str, schema: Schema) -> Result<Table, IngestError> {
    let err = |row: Option<usize>, message: String| IngestError { source: source.to_string(), row, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| err(None, format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(err(None, "no data rows".into()));
    }
    let fixed = schema.fixed();
    let extra = header.len().saturating_sub(fixed.len());
    let expected: Vec<String> = fixed
        .iter()
        .map(|s| s.to_string())
        .chain((1..=extra).map(|j| format!("{}{j}", schema.prefix())))
        .collect();
    if extra == 0 || header != expected {
        let want = format!("{},{}1,...", fixed.join(","), schema.prefix());
        return Err(err(None, format!("header must be {want}; found {}", header.join(","))));
    }
    let mut table = Table { fixed: vec![Vec::new(); fixed.len()], columns: vec![Vec::new(); extra] };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| err(Some(row), format!("{e}")))?;
        if rec.len() != header.len() {
            return Err(err(Some(row), format!("expected {} cells, found {}", header.len(), rec.len())));
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| err(Some(row), format!("column '{}': non-numeric cell '{cell}'", header[j])))?;
            if j < fixed.len() {
                table.fixed[j].push(v);
            } else {
                table.columns[j - fixed.len()].push(v);
            }
        }
    }
    if table.fixed[0].is_empty() {
        return Err(err(None, "no data rows".into()));
    }
    Ok(table)
}

fn count(v: f64) -> Option<u32> {
    (v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64).then_some(v as u32)
}

fn design(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cols[0].len();
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

pub fn probit_from_table(t: &Table, source: &str) -> Result<ProbitData, IngestError> {
    let err = |row: Option<usize>, message: String| IngestError { source: source.to_string(), row, message };
    let mut z = Vec::new();
    let mut m = Vec::new();
    for (i, (&zv, &mv)) in t.fixed[0].iter().zip(&t.fixed[1]).enumerate() {
        let row = Some(i + 1);
        let zi = count(zv).ok_or_else(|| err(row, format!("z = {zv} is not a nonnegative integer")))?;
        let mi = count(mv).ok_or_else(|| err(row, format!("m = {mv} is not a nonnegative integer")))?;
        if zi > mi {
            return Err(err(row, format!("z = {zi} exceeds m = {mi}")));
        }
        z.push(zi);
        m.push(mi);
    }
    ProbitData::new(design(&t.columns), z, m).map_err(|e| err(None, e.to_string()))
}

pub fn logistic_from_table(t: &Table, source: &str, prior_var: f64) -> Result<LogisticData, IngestError> {
    let err = |row: Option<usize>, message: String| IngestError { source: source.to_string(), row, message };
    let mut z = Vec::new();
    for (i, &zv) in t.fixed[0].iter().enumerate() {
        if zv != 0.0 && zv != 1.0 {
            return Err(err(Some(i + 1), format!("z = {zv} is not binary")));
        }
        z.push(zv as u8);
    }
    let p = t.columns.len();
    let cov = DMatrix::from_diagonal_element(p, p, prior_var);
    LogisticData::new(&design(&t.columns), &z, DVector::zeros(p), cov).map_err(|e| err(None, e.to_string()))
}

pub fn gp_from_table(t: &Table, source: &str) -> Result<GPData, IngestError> {
    let n = t.fixed[0].len();
    let locs: Vec<Vec<f64>> = (0..n).map(|i| t.columns.iter().map(|c| c[i]).collect()).collect();
    GPData::new(locs, t.fixed[0].clone())
        .map_err(|e| IngestError { source: source.to_string(), row: None, message: e.to_string() })
}

/// Reads a dataset; logistic data gets a Normal(0, 100·I) prior.
pub fn ingest_csv(path: &Path, schema: Schema) -> Result<Dataset, IngestError> {
    let name = path.display().to_string();
    let t = read_table(path, schema)?;
    Ok(match schema {
        Schema::Probit => Dataset::Probit(probit_from_table(&t, &name)?),
        Schema::Logistic => Dataset::Logistic(logistic_from_table(&t, &name, 100.0)?),
        Schema::Gp => Dataset::Gp(gp_from_table(&t, &name)?),
    })
}
