use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

pub const INTERCEPT: &str = "(Intercept)";

/// Column-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    names: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(n_rows: usize) -> Self {
        DesignMatrix {
            n_rows,
            names: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
        }
    }

    /// Build from named columns. All columns must have the same length.
    pub fn from_columns<S, I>(columns: I) -> Result<Self>
    where
        S: Into<String>,
        I: IntoIterator<Item = (S, Vec<f64>)>,
    {
        let mut iter = columns.into_iter().peekable();
        let n_rows = iter.peek().map(|(_, c)| c.len()).unwrap_or(0);
        let mut design = DesignMatrix::new(n_rows);
        for (name, col) in iter {
            design.push_column(name, &col)?;
        }
        Ok(design)
    }

    pub fn push_intercept(&mut self) -> Result<()> {
        let ones = vec![1.0; self.n_rows];
        self.push_column(INTERCEPT, &ones)
    }

    pub fn push_column(&mut self, name: impl Into<String>, column: &[f64]) -> Result<()> {
        let name = name.into();
        if column.len() != self.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "column `{name}` has {} rows, design has {}",
                column.len(),
                self.n_rows
            )));
        }
        if let Some(i) = column.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(format!(
                "column `{name}` row {i} is {}",
                column[i]
            )));
        }
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateId(name));
        }
        self.push_unchecked(name, column);
        Ok(())
    }

    fn push_unchecked(&mut self, name: String, column: &[f64]) {
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.extend_from_slice(column);
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn has_intercept(&self) -> bool {
        self.column_index(INTERCEPT).is_some()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.n_rows + row]
    }

    /// Copy with column `j` removed.
    pub fn without_column(&self, j: usize) -> DesignMatrix {
        let mut out = DesignMatrix::new(self.n_rows);
        for k in (0..self.n_cols()).filter(|&k| k != j) {
            out.push_unchecked(self.names[k].clone(), self.column(k));
        }
        out
    }

    /// Copy restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for j in 0..self.n_cols() {
            let col = self.column(j);
            values.extend(rows.iter().map(|&r| col[r]));
        }
        DesignMatrix {
            n_rows: rows.len(),
            names: self.names.clone(),
            index: self.index.clone(),
            values,
        }
    }

    /// Copy restricted to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DesignMatrix {
        let mut out = DesignMatrix::new(self.n_rows);
        for &j in cols {
            out.push_unchecked(self.names[j].clone(), self.column(j));
        }
        out
    }

    pub(crate) fn name_set(&self) -> HashSet<&str> {
        self.names.iter().map(String::as_str).collect()
    }

    /// Xβ for a coefficient vector aligned with the columns.
    pub fn predict(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, x) in out.iter_mut().zip(self.column(j)) {
                    *o += b * x;
                }
            }
        }
        out
    }
}
