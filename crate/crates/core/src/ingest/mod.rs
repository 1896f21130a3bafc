//! Reading cell-level expression and phenotypes, subject and gene filters, and
//! aggregation into subject-level `M`/`F` summaries.

mod expression;
mod filter;
mod phenotype;
mod summaries;

pub use expression::{
    load_expression, read_coordinate, read_dense, read_long, ExpressionMatrix, ExpressionSource, DENSE_ENTRY_LIMIT,
};
pub use filter::{filter_genes, filter_subjects, FilterReport};
pub use phenotype::{read_phenotype, PhenotypeColumns, PhenotypeTable};
pub use summaries::{aggregate, cells_by_subject, summarize_cells, ClampBounds, GeneSummaries};
