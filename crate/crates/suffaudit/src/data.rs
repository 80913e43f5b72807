//! Observational tables, causal-role bindings, and sufficiency indicators.
//!
//! A [`Dataset`] holds typed columns loaded from CSV: binary ({0,1}), real, or
//! categorical, any cell possibly missing. A [`RoleBinding`] names which
//! columns play which causal roles in an audit — the treatment indicator, the
//! pre/post macro condition, the pre/post wellbeing indicator, confounder
//! sets, an optional instrument, and the covariates used for heterogeneity.
//!
//! Continuous wellbeing measures are reduced to binary sufficiency indicators
//! with [`binarize_sufficiency`]: a unit counts as sufficient when its value
//! clears a context-supplied cutoff. "Clears" includes the cutoff itself
//! (`>=`, not `>`) so that a unit sitting exactly at the threshold has
//! reached it. Several indicators can be folded into one with
//! [`combine_indicators`].
//!
//! Missing data policy: nothing is imputed. Operations that need complete
//! rows drop incomplete ones listwise and report how many were dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by dataset construction and I/O.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("schema names column `{0}` but the file header does not contain it")]
    HeaderMismatch(String),
    #[error("column `{column}`, row {row}: `{value}` is not a binary cell (expected 0, 1, or empty)")]
    BadBinaryCell {
        column: String,
        row: usize,
        value: String,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` already exists")]
    DuplicateColumn(String),
    #[error("column `{0}` is not numeric (binary or real)")]
    NotNumeric(String),
    #[error("columns have inconsistent lengths")]
    RaggedColumns,
    #[error("unit id `{unit}` appears more than once{}", period_suffix(.period))]
    DuplicateUnitId { unit: String, period: Option<String> },
    #[error("cutoff must be finite, got {0}")]
    NonFiniteCutoff(f64),
    #[error("combine_indicators requires at least one input column")]
    EmptyCombination,
}

fn period_suffix(period: &Option<String>) -> String {
    match period {
        Some(p) => format!(" within period `{p}`"),
        None => String::new(),
    }
}

/// Declared kind of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Binary,
    Real,
    Categorical,
}

/// One typed column; every cell may be missing.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Binary(Vec<Option<u8>>),
    Real(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Binary(v) => v.len(),
            Column::Real(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Binary(_) => ColumnKind::Binary,
            Column::Real(_) => ColumnKind::Real,
            Column::Categorical(_) => ColumnKind::Categorical,
        }
    }

    /// Numeric view of a cell: binary as 0/1, real as-is, categorical `None`.
    pub fn numeric(&self, row: usize) -> Option<f64> {
        match self {
            Column::Binary(v) => v[row].map(f64::from),
            Column::Real(v) => v[row],
            Column::Categorical(_) => None,
        }
    }

    /// True when the cell holds a value.
    pub fn present(&self, row: usize) -> bool {
        match self {
            Column::Binary(v) => v[row].is_some(),
            Column::Real(v) => v[row].is_some(),
            Column::Categorical(v) => v[row].is_some(),
        }
    }

    /// Cell rendered for CSV output; missing renders as the empty string.
    fn render(&self, row: usize) -> String {
        match self {
            Column::Binary(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            // `{}` prints the shortest digits that round-trip the float.
            Column::Real(v) => v[row].map(|x| format!("{x}")).unwrap_or_default(),
            Column::Categorical(v) => v[row].clone().unwrap_or_default(),
        }
    }

    /// Key used to order rows canonically by content.
    fn sort_key(&self, row: usize) -> CellKey<'_> {
        match self {
            Column::Binary(v) => match v[row] {
                Some(x) => CellKey::Num(f64::from(x)),
                None => CellKey::Missing,
            },
            Column::Real(v) => match v[row] {
                Some(x) => CellKey::Num(x),
                None => CellKey::Missing,
            },
            Column::Categorical(v) => match &v[row] {
                Some(s) => CellKey::Text(s),
                None => CellKey::Missing,
            },
        }
    }
}

/// Orderable view of a cell: missing sorts before any value, numbers by
/// total order, then text.
#[derive(PartialEq)]
enum CellKey<'a> {
    Missing,
    Num(f64),
    Text(&'a str),
}

impl CellKey<'_> {
    fn rank(&self) -> u8 {
        match self {
            CellKey::Missing => 0,
            CellKey::Num(_) => 1,
            CellKey::Text(_) => 2,
        }
    }
}

impl Eq for CellKey<'_> {}

impl PartialOrd for CellKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellKey<'_> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (CellKey::Num(a), CellKey::Num(b)) => a.total_cmp(b),
            (CellKey::Text(a), CellKey::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

/// An immutable table of named, typed columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
    unit_id: Option<String>,
    period: Option<String>,
}

impl Dataset {
    /// Builds a dataset from `(name, column)` pairs of equal length.
    pub fn from_columns(cols: Vec<(String, Column)>) -> Result<Self, DataError> {
        let mut d = Dataset::default();
        let mut first = true;
        for (name, col) in cols {
            if first {
                d.n_rows = col.len();
                first = false;
            }
            d.push_column(name, col)?;
        }
        Ok(d)
    }

    /// Appends a column; its length must match the existing rows.
    pub fn push_column(&mut self, name: String, col: Column) -> Result<(), DataError> {
        if self.names.contains(&name) {
            return Err(DataError::DuplicateColumn(name));
        }
        if !self.columns.is_empty() && col.len() != self.n_rows {
            return Err(DataError::RaggedColumns);
        }
        if self.columns.is_empty() {
            self.n_rows = col.len();
        }
        self.names.push(name);
        self.columns.push(col);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Column names in declaration order.
    pub fn column_names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
    }

    /// Column lookup that reports the missing name.
    pub fn require(&self, name: &str) -> Result<&Column, DataError> {
        self.column(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn unit_id(&self) -> Option<&str> {
        self.unit_id.as_deref()
    }

    pub fn period(&self) -> Option<&str> {
        self.period.as_deref()
    }

    /// Declares the unit-id column (and optionally a period column), checking
    /// that unit ids are unique within each period.
    pub fn with_unit_id(
        mut self,
        unit_col: &str,
        period_col: Option<&str>,
    ) -> Result<Self, DataError> {
        let unit = self.require(unit_col)?;
        let mut seen: BTreeMap<(String, String), ()> = BTreeMap::new();
        for row in 0..self.n_rows {
            let uid = render_cell(unit, row);
            let per = match period_col {
                Some(p) => render_cell(self.require(p)?, row),
                None => String::new(),
            };
            if seen.insert((per.clone(), uid.clone()), ()).is_some() {
                return Err(DataError::DuplicateUnitId {
                    unit: uid,
                    period: period_col.map(|_| per),
                });
            }
        }
        self.unit_id = Some(unit_col.to_string());
        self.period = period_col.map(str::to_string);
        Ok(self)
    }

    /// Indices of rows with a value in every one of `cols`, in row order.
    pub fn complete_rows(&self, cols: &[&str]) -> Result<Vec<usize>, DataError> {
        let columns: Vec<&Column> = cols
            .iter()
            .map(|c| self.require(c))
            .collect::<Result<_, _>>()?;
        Ok((0..self.n_rows)
            .filter(|&r| columns.iter().all(|c| c.present(r)))
            .collect())
    }

    /// A new dataset holding the given rows (indices may repeat — this is the
    /// resampling primitive for the bootstrap).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|col| match col {
                Column::Binary(v) => Column::Binary(rows.iter().map(|&r| v[r]).collect()),
                Column::Real(v) => Column::Real(rows.iter().map(|&r| v[r]).collect()),
                Column::Categorical(v) => {
                    Column::Categorical(rows.iter().map(|&r| v[r].clone()).collect())
                }
            })
            .collect();
        Dataset {
            names: self.names.clone(),
            columns,
            n_rows: rows.len(),
            unit_id: self.unit_id.clone(),
            period: self.period.clone(),
        }
    }

    /// Row indices sorted by full row content (missing first, then numeric,
    /// then text; ties broken by original index). Reordering the input rows
    /// leaves the sorted sequence of row *contents* unchanged, which is what
    /// makes seeded resampling independent of row order.
    pub fn canonical_row_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_rows).collect();
        order.sort_by(|&a, &b| {
            for col in &self.columns {
                let cmp = col.sort_key(a).cmp(&col.sort_key(b));
                if cmp != std::cmp::Ordering::Equal {
                    return cmp;
                }
            }
            std::cmp::Ordering::Equal
        });
        order
    }
}

fn render_cell(col: &Column, row: usize) -> String {
    col.render(row)
}

/// Reads a CSV file into the columns named by `schema`.
///
/// The header row is required; columns in the file but absent from the schema
/// are ignored. Binary cells must be `0`, `1`, or empty; real cells that do
/// not parse as numbers become missing; empty cells are missing everywhere.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &BTreeMap<String, ColumnKind>,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let io_err = |e: &dyn fmt::Display| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(&e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| io_err(&e))?
        .iter()
        .map(str::to_string)
        .collect();

    // Schema order is canonical for the loaded dataset (BTreeMap: sorted).
    let mut positions = Vec::new();
    for (name, &kind) in schema {
        let pos = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::HeaderMismatch(name.clone()))?;
        positions.push((name.clone(), kind, pos));
    }

    let mut cols: Vec<Column> = positions
        .iter()
        .map(|&(_, kind, _)| match kind {
            ColumnKind::Binary => Column::Binary(Vec::new()),
            ColumnKind::Real => Column::Real(Vec::new()),
            ColumnKind::Categorical => Column::Categorical(Vec::new()),
        })
        .collect();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_err(&e))?;
        for ((name, kind, pos), col) in positions.iter().zip(cols.iter_mut()) {
            let raw = record.get(*pos).unwrap_or("").trim();
            match (kind, col) {
                (ColumnKind::Binary, Column::Binary(v)) => v.push(match raw {
                    "" => None,
                    "0" => Some(0),
                    "1" => Some(1),
                    other => {
                        return Err(DataError::BadBinaryCell {
                            column: name.clone(),
                            row: row_idx + 1,
                            value: other.to_string(),
                        })
                    }
                }),
                (ColumnKind::Real, Column::Real(v)) => {
                    v.push(if raw.is_empty() { None } else { raw.parse().ok() })
                }
                (ColumnKind::Categorical, Column::Categorical(v)) => {
                    v.push(if raw.is_empty() { None } else { Some(raw.to_string()) })
                }
                _ => unreachable!("columns were built from the same schema"),
            }
        }
    }
    Dataset::from_columns(
        positions
            .into_iter()
            .map(|(name, _, _)| name)
            .zip(cols)
            .collect(),
    )
}

/// Writes the dataset as CSV (header row, empty cell = missing). Real values
/// are printed with round-trip precision, so `load_csv` recovers them exactly.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |e: &dyn fmt::Display| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_err(&e))?;
    writer
        .write_record(data.column_names())
        .map_err(|e| io_err(&e))?;
    for row in 0..data.n_rows() {
        let record: Vec<String> = data.columns.iter().map(|c| c.render(row)).collect();
        writer.write_record(&record).map_err(|e| io_err(&e))?;
    }
    writer.flush().map_err(|e| io_err(&e))
}

/// Which side of the cutoff counts as sufficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Sufficient when value ≥ cutoff.
    AtOrAbove,
    /// Sufficient when value < cutoff.
    Below,
}

/// A sufficiency rule: column, cutoff, and which side counts as enough.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyThreshold {
    pub column: String,
    pub cutoff: f64,
    pub direction: Direction,
}

/// Appends a binary column `<column>_sufficient` recording whether each cell
/// clears the threshold. At-or-above uses `>=` so a unit exactly at the
/// cutoff counts as sufficient; missing input stays missing.
pub fn binarize_sufficiency(
    data: &Dataset,
    t: &SufficiencyThreshold,
) -> Result<Dataset, DataError> {
    if !t.cutoff.is_finite() {
        return Err(DataError::NonFiniteCutoff(t.cutoff));
    }
    let col = data.require(&t.column)?;
    if matches!(col, Column::Categorical(_)) {
        return Err(DataError::NotNumeric(t.column.clone()));
    }
    let values: Vec<Option<u8>> = (0..data.n_rows())
        .map(|row| {
            col.numeric(row).map(|v| {
                let sufficient = match t.direction {
                    Direction::AtOrAbove => v >= t.cutoff,
                    Direction::Below => v < t.cutoff,
                };
                u8::from(sufficient)
            })
        })
        .collect();
    let mut out = data.clone();
    out.push_column(format!("{}_sufficient", t.column), Column::Binary(values))?;
    Ok(out)
}

/// How several binary indicators fold into one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// 1 only when every input is 1.
    AllOf,
    /// 1 when any input is 1.
    AnyOf,
}

/// Combines several binary columns into a new one named `output`. A row with
/// any missing input is missing in the output.
pub fn combine_indicators(
    data: &Dataset,
    columns: &[String],
    mode: CombineMode,
    output: &str,
) -> Result<Dataset, DataError> {
    if columns.is_empty() {
        return Err(DataError::EmptyCombination);
    }
    let mut inputs = Vec::new();
    for name in columns {
        match data.require(name)? {
            Column::Binary(v) => inputs.push(v),
            _ => return Err(DataError::NotNumeric(name.clone())),
        }
    }
    let values: Vec<Option<u8>> = (0..data.n_rows())
        .map(|row| {
            let cells: Option<Vec<u8>> = inputs.iter().map(|v| v[row]).collect();
            cells.map(|cs| {
                let combined = match mode {
                    CombineMode::AllOf => cs.iter().all(|&c| c == 1),
                    CombineMode::AnyOf => cs.contains(&1),
                };
                u8::from(combined)
            })
        })
        .collect();
    let mut out = data.clone();
    out.push_column(output.to_string(), Column::Binary(values))?;
    Ok(out)
}

/// Named confounder sets, one per audit criterion that adjusts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfounderSets {
    /// Confounders of (macro_pre → treatment), the selection contrast.
    pub selection: Vec<String>,
    /// Controls entering both models of the selection-independence test.
    pub independence: Vec<String>,
    /// Confounders of (treatment → macro_post).
    pub macro_effect: Vec<String>,
    /// Confounders of (treatment → wellbeing_post).
    pub wellbeing_effect: Vec<String>,
}

/// Binds dataset columns to the causal roles the audits quantify over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleBinding {
    /// Binary indicator: did the unit receive the intervention?
    pub treatment: String,
    /// Binary macro condition before assignment.
    pub macro_pre: String,
    /// Binary macro condition after the intervention window.
    pub macro_post: String,
    /// Binary wellbeing sufficiency before assignment.
    pub wellbeing_pre: String,
    /// Binary wellbeing sufficiency after the intervention window.
    pub wellbeing_post: String,
    #[serde(default)]
    pub confounders: ConfounderSets,
    /// Optional instrument for the treatment.
    #[serde(default)]
    pub instrument: Option<String>,
    /// Covariates for heterogeneous-effect (CATE) estimation.
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl RoleBinding {
    /// Every column the binding references, deduplicated, in binding order.
    pub fn referenced_columns(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let mut cols: Vec<&str> = vec![
            &self.treatment,
            &self.macro_pre,
            &self.macro_post,
            &self.wellbeing_pre,
            &self.wellbeing_post,
        ];
        for set in [
            &self.confounders.selection,
            &self.confounders.independence,
            &self.confounders.macro_effect,
            &self.confounders.wellbeing_effect,
        ] {
            cols.extend(set.iter().map(String::as_str));
        }
        if let Some(z) = &self.instrument {
            cols.push(z);
        }
        cols.extend(self.covariates.iter().map(String::as_str));
        for c in cols {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    fn binary_roles(&self) -> Vec<(&'static str, &str)> {
        let mut roles = vec![
            ("treatment", self.treatment.as_str()),
            ("macro_pre", self.macro_pre.as_str()),
            ("macro_post", self.macro_post.as_str()),
            ("wellbeing_pre", self.wellbeing_pre.as_str()),
            ("wellbeing_post", self.wellbeing_post.as_str()),
        ];
        if let Some(z) = &self.instrument {
            roles.push(("instrument", z.as_str()));
        }
        roles
    }
}

/// One finding from [`validate_binding`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindingViolation {
    /// A bound column does not exist in the dataset.
    MissingColumn { role: String, column: String },
    /// A role that must be binary is bound to a non-binary column.
    NotBinary { role: String, column: String },
    /// The treatment column never varies ("no treated units" / "no control
    /// units"), so no contrast is estimable.
    ConstantTreatment { column: String, detail: String },
    /// Informational: rows with missing values in a bound column. Audits
    /// drop such rows listwise; this does not block an audit.
    MissingValues { column: String, rows: usize },
}

impl BindingViolation {
    /// True for findings that make an audit impossible (as opposed to
    /// missing-value counts, which are reported but survivable).
    pub fn is_fatal(&self) -> bool {
        !matches!(self, BindingViolation::MissingValues { .. })
    }
}

impl fmt::Display for BindingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BindingViolation::MissingColumn { role, column } => {
                write!(f, "{role}: column `{column}` not found")
            }
            BindingViolation::NotBinary { role, column } => {
                write!(f, "{role}: column `{column}` is not binary")
            }
            BindingViolation::ConstantTreatment { column, detail } => {
                write!(f, "treatment `{column}`: {detail}")
            }
            BindingViolation::MissingValues { column, rows } => {
                write!(f, "column `{column}`: {rows} rows with missing values")
            }
        }
    }
}

/// Checks a binding against a dataset: referenced columns exist, role columns
/// are binary, the treatment varies, and missing-value counts are reported.
/// An empty list means the binding is audit-ready.
pub fn validate_binding(data: &Dataset, b: &RoleBinding) -> Vec<BindingViolation> {
    let mut out = Vec::new();
    let confounder_sets = [
        ("selection confounders", &b.confounders.selection),
        ("independence controls", &b.confounders.independence),
        ("macro-effect confounders", &b.confounders.macro_effect),
        ("wellbeing-effect confounders", &b.confounders.wellbeing_effect),
    ];

    for (role, column) in b.binary_roles() {
        match data.column(column) {
            None => out.push(BindingViolation::MissingColumn {
                role: role.to_string(),
                column: column.to_string(),
            }),
            Some(Column::Binary(_)) => {}
            Some(_) => out.push(BindingViolation::NotBinary {
                role: role.to_string(),
                column: column.to_string(),
            }),
        }
    }
    for (role, set) in confounder_sets {
        for column in set {
            if data.column(column).is_none() {
                out.push(BindingViolation::MissingColumn {
                    role: role.to_string(),
                    column: column.clone(),
                });
            }
        }
    }
    for column in &b.covariates {
        if data.column(column).is_none() {
            out.push(BindingViolation::MissingColumn {
                role: "covariates".to_string(),
                column: column.clone(),
            });
        }
    }

    if let Some(Column::Binary(v)) = data.column(&b.treatment) {
        let ones = v.iter().flatten().filter(|&&x| x == 1).count();
        let zeros = v.iter().flatten().filter(|&&x| x == 0).count();
        if ones == 0 || zeros == 0 {
            let detail = if ones == 0 {
                "no treated units"
            } else {
                "no control units"
            };
            out.push(BindingViolation::ConstantTreatment {
                column: b.treatment.clone(),
                detail: detail.to_string(),
            });
        }
    }

    for column in b.referenced_columns() {
        if let Some(col) = data.column(column) {
            let missing = (0..data.n_rows()).filter(|&r| !col.present(r)).count();
            if missing > 0 {
                out.push(BindingViolation::MissingValues {
                    column: column.to_string(),
                    rows: missing,
                });
            }
        }
    }
    out
}
