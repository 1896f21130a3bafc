use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use log::warn;

use crate::error::{Error, Result};

/// Dense tables above this many entries must use a sparse format.
pub const DENSE_ENTRY_LIMIT: usize = 10_000_000;

/// Sparse gene × cell expression, stored compressed by gene. Zero entries are
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    gene_ids: Vec<String>,
    cell_ids: Vec<String>,
    cell_subjects: Vec<String>,
    gene_ptr: Vec<usize>,
    cells: Vec<u32>,
    values: Vec<f64>,
    /// Number of (gene, cell) coordinates that appeared more than once and
    /// were summed.
    pub duplicate_entries: usize,
}

/// Accumulates (gene, cell, value) triplets. Values are validated by the
/// readers; this only drops zeros and sums duplicates.
#[derive(Debug, Default)]
pub(crate) struct TripletBuilder {
    entries: Vec<(u32, u32, f64)>,
}

impl TripletBuilder {
    pub(crate) fn push(&mut self, gene: usize, cell: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((gene as u32, cell as u32, value));
        }
    }

    pub(crate) fn build(
        mut self,
        gene_ids: Vec<String>,
        cell_ids: Vec<String>,
        cell_subjects: Vec<String>,
    ) -> Result<ExpressionMatrix> {
        check_unique(&gene_ids)?;
        check_unique(&cell_ids)?;
        if cell_ids.len() != cell_subjects.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cells but {} cell-subject assignments",
                cell_ids.len(),
                cell_subjects.len()
            )));
        }
        // Stable sort keeps duplicate coordinates in input order, so their sum
        // is reproducible.
        self.entries.sort_by_key(|&(g, c, _)| (g, c));
        let mut gene_ptr = vec![0usize; gene_ids.len() + 1];
        let mut cells = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut genes = Vec::with_capacity(self.entries.len());
        let mut duplicates = 0;
        for (g, c, v) in self.entries {
            if genes.last() == Some(&g) && cells.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
                duplicates += 1;
            } else {
                genes.push(g);
                cells.push(c);
                values.push(v);
            }
        }
        if duplicates > 0 {
            warn!("{duplicates} duplicate (gene, cell) entries were summed");
        }
        for &g in &genes {
            gene_ptr[g as usize + 1] += 1;
        }
        for i in 0..gene_ids.len() {
            gene_ptr[i + 1] += gene_ptr[i];
        }
        Ok(ExpressionMatrix {
            gene_ids,
            cell_ids,
            cell_subjects,
            gene_ptr,
            cells,
            values,
            duplicate_entries: duplicates,
        })
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

impl ExpressionMatrix {
    /// Build from dense gene-major rows (`rows[g][c]`).
    pub fn from_dense(
        gene_ids: Vec<String>,
        cell_ids: Vec<String>,
        cell_subjects: Vec<String>,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let mut b = TripletBuilder::default();
        for (g, row) in rows.iter().enumerate() {
            if row.len() != cell_ids.len() {
                return Err(Error::DimensionMismatch(format!(
                    "gene row {g} has {} values for {} cells",
                    row.len(),
                    cell_ids.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFiniteInput(format!("gene {g} cell {c} has value {v}")));
                }
                b.push(g, c, v);
            }
        }
        b.build(gene_ids, cell_ids, cell_subjects)
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn cell_subjects(&self) -> &[String] {
        &self.cell_subjects
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_ids.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        let total = self.n_genes() * self.n_cells();
        if total == 0 {
            0.0
        } else {
            self.nnz() as f64 / total as f64
        }
    }

    /// Stored (cell index, value) pairs of one gene, ordered by cell.
    pub fn gene_entries(&self, g: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.gene_ptr[g]..self.gene_ptr[g + 1];
        self.cells[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, g: usize, c: usize) -> f64 {
        self.gene_entries(g).find(|&(cc, _)| cc == c).map(|(_, v)| v).unwrap_or(0.0)
    }

    /// Keep the listed genes, in the given order.
    pub fn select_genes(&self, genes: &[usize]) -> ExpressionMatrix {
        let mut gene_ptr = Vec::with_capacity(genes.len() + 1);
        gene_ptr.push(0);
        let mut cells = Vec::new();
        let mut values = Vec::new();
        for &g in genes {
            let range = self.gene_ptr[g]..self.gene_ptr[g + 1];
            cells.extend_from_slice(&self.cells[range.clone()]);
            values.extend_from_slice(&self.values[range]);
            gene_ptr.push(cells.len());
        }
        ExpressionMatrix {
            gene_ids: genes.iter().map(|&g| self.gene_ids[g].clone()).collect(),
            cell_ids: self.cell_ids.clone(),
            cell_subjects: self.cell_subjects.clone(),
            gene_ptr,
            cells,
            values,
            duplicate_entries: self.duplicate_entries,
        }
    }

    /// Keep the listed cells, renumbered in the given order.
    pub fn select_cells(&self, keep: &[usize]) -> ExpressionMatrix {
        let mut remap = vec![u32::MAX; self.n_cells()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new as u32;
        }
        let mut gene_ptr = Vec::with_capacity(self.n_genes() + 1);
        gene_ptr.push(0);
        let mut cells = Vec::new();
        let mut values = Vec::new();
        for g in 0..self.n_genes() {
            let mut entries: Vec<(u32, f64)> = self
                .gene_entries(g)
                .filter(|&(c, _)| remap[c] != u32::MAX)
                .map(|(c, v)| (remap[c], v))
                .collect();
            entries.sort_by_key(|&(c, _)| c);
            for (c, v) in entries {
                cells.push(c);
                values.push(v);
            }
            gene_ptr.push(cells.len());
        }
        ExpressionMatrix {
            gene_ids: self.gene_ids.clone(),
            cell_ids: keep.iter().map(|&c| self.cell_ids[c].clone()).collect(),
            cell_subjects: keep.iter().map(|&c| self.cell_subjects[c].clone()).collect(),
            gene_ptr,
            cells,
            values,
            duplicate_entries: self.duplicate_entries,
        }
    }
}

/// Where to read cell-level expression from.
#[derive(Debug, Clone)]
pub enum ExpressionSource {
    /// Coordinate sparse matrix (genes × cells, 1-based) + gene list + cell map.
    Coordinate {
        matrix: PathBuf,
        features: PathBuf,
        cells: PathBuf,
    },
    /// Tab-separated `subject_id cell_id gene_id value` with a header.
    Long { table: PathBuf },
    /// Tab-separated genes × cells with a `gene_id` header row + cell map.
    Dense { table: PathBuf, cells: PathBuf },
}

pub fn load_expression(source: &ExpressionSource) -> Result<ExpressionMatrix> {
    match source {
        ExpressionSource::Coordinate { matrix, features, cells } => read_coordinate(matrix, features, cells),
        ExpressionSource::Long { table } => read_long(table),
        ExpressionSource::Dense { table, cells } => read_dense(table, cells),
    }
}

pub(crate) fn open_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>>> {
    let file = File::open(path).map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let owned = path.to_path_buf();
    Ok(BufReader::new(file).lines().enumerate().map(move |(i, line)| {
        line.map(|l| (i + 1, l.trim_end_matches('\r').to_string()))
            .map_err(|source| Error::Input {
                path: owned.clone(),
                source,
            })
    }))
}

pub(crate) fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_value(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("cannot parse `{field}` as a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(parse_error(path, line, format!("expression value {v} must be finite and nonnegative")));
    }
    Ok(v)
}

fn read_features(path: &Path) -> Result<Vec<String>> {
    let mut genes = Vec::new();
    for item in open_lines(path)? {
        let (_, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        genes.push(line.split('\t').next().unwrap_or("").trim().to_string());
    }
    Ok(genes)
}

fn read_cell_map(path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let mut cells = Vec::new();
    let mut subjects = Vec::new();
    for item in open_lines(path)? {
        let (no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if no == 1 && fields.len() >= 2 && fields[0] == "cell_id" && fields[1] == "subject_id" {
            continue;
        }
        if fields.len() < 2 || fields[1].trim().is_empty() {
            return Err(parse_error(path, no, "expected `cell_id<TAB>subject_id`"));
        }
        cells.push(fields[0].trim().to_string());
        subjects.push(fields[1].trim().to_string());
    }
    Ok((cells, subjects))
}

pub fn read_coordinate(matrix: &Path, features: &Path, cell_map: &Path) -> Result<ExpressionMatrix> {
    let genes = read_features(features)?;
    let (cells, subjects) = read_cell_map(cell_map)?;
    let mut builder = TripletBuilder::default();
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut seen = 0usize;
    for item in open_lines(matrix)? {
        let (no, line) = item?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_error(matrix, no, "expected three whitespace-separated fields"));
        }
        let int = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| parse_error(matrix, no, format!("cannot parse `{s}` as an index")))
        };
        match dims {
            None => {
                let d = (int(fields[0])?, int(fields[1])?, int(fields[2])?);
                if d.0 != genes.len() || d.1 != cells.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "{}: header says {} genes × {} cells, gene list has {} and cell map has {}",
                        matrix.display(),
                        d.0,
                        d.1,
                        genes.len(),
                        cells.len()
                    )));
                }
                dims = Some(d);
            }
            Some((rows, cols, _)) => {
                let (r, c) = (int(fields[0])?, int(fields[1])?);
                if r == 0 || r > rows || c == 0 || c > cols {
                    return Err(parse_error(matrix, no, format!("coordinate ({r}, {c}) outside {rows} × {cols}")));
                }
                let v = parse_value(matrix, no, fields[2])?;
                builder.push(r - 1, c - 1, v);
                seen += 1;
            }
        }
    }
    let Some((_, _, nnz)) = dims else {
        return Err(parse_error(matrix, 0, "missing dimension line"));
    };
    if seen != nnz {
        return Err(Error::DimensionMismatch(format!(
            "{}: header declares {nnz} entries, found {seen}",
            matrix.display()
        )));
    }
    builder.build(genes, cells, subjects)
}

pub fn read_long(path: &Path) -> Result<ExpressionMatrix> {
    let mut lines = open_lines(path)?;
    let header = match lines.next() {
        Some(h) => h?.1,
        None => return Err(parse_error(path, 1, "empty file")),
    };
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter().position(|c| *c == name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let (si, ci, gi, vi) = (find("subject_id")?, find("cell_id")?, find("gene_id")?, find("value")?);
    let width = cols.len();

    let mut gene_index: HashMap<String, usize> = HashMap::new();
    let mut cell_index: HashMap<String, usize> = HashMap::new();
    let mut genes = Vec::new();
    let mut cells = Vec::new();
    let mut subjects: Vec<String> = Vec::new();
    let mut builder = TripletBuilder::default();
    for item in lines {
        let (no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != width {
            return Err(parse_error(path, no, format!("expected {width} fields, found {}", f.len())));
        }
        let g = *gene_index.entry(f[gi].to_string()).or_insert_with(|| {
            genes.push(f[gi].to_string());
            genes.len() - 1
        });
        let c = match cell_index.get(f[ci]) {
            Some(&c) => {
                if subjects[c] != f[si] {
                    return Err(parse_error(
                        path,
                        no,
                        format!("cell `{}` assigned to both `{}` and `{}`", f[ci], subjects[c], f[si]),
                    ));
                }
                c
            }
            None => {
                cells.push(f[ci].to_string());
                subjects.push(f[si].to_string());
                cell_index.insert(f[ci].to_string(), cells.len() - 1);
                cells.len() - 1
            }
        };
        let v = parse_value(path, no, f[vi])?;
        builder.push(g, c, v);
    }
    builder.build(genes, cells, subjects)
}

pub fn read_dense(path: &Path, cell_map: &Path) -> Result<ExpressionMatrix> {
    let (map_cells, map_subjects) = read_cell_map(cell_map)?;
    let subject_of: HashMap<&str, &str> = map_cells
        .iter()
        .map(String::as_str)
        .zip(map_subjects.iter().map(String::as_str))
        .collect();
    let mut lines = open_lines(path)?;
    let header = match lines.next() {
        Some(h) => h?.1,
        None => return Err(parse_error(path, 1, "empty file")),
    };
    let cells: Vec<String> = header.split('\t').skip(1).map(|s| s.trim().to_string()).collect();
    let mut subjects = Vec::with_capacity(cells.len());
    for c in &cells {
        match subject_of.get(c.as_str()) {
            Some(s) => subjects.push(s.to_string()),
            None => return Err(parse_error(path, 1, format!("cell `{c}` missing from the cell map"))),
        }
    }
    let mut genes = Vec::new();
    let mut builder = TripletBuilder::default();
    for item in lines {
        let (no, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != cells.len() + 1 {
            return Err(parse_error(path, no, format!("expected {} fields, found {}", cells.len() + 1, f.len())));
        }
        if (genes.len() + 1) * cells.len() > DENSE_ENTRY_LIMIT {
            return Err(Error::ConfigInvalid(format!(
                "{}: dense input exceeds {DENSE_ENTRY_LIMIT} entries; use the coordinate or long format",
                path.display()
            )));
        }
        let g = genes.len();
        genes.push(f[0].trim().to_string());
        for (c, field) in f[1..].iter().enumerate() {
            builder.push(g, c, parse_value(path, no, field)?);
        }
    }
    builder.build(genes, cells, subjects)
}
