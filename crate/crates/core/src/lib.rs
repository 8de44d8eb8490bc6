//! Field-normalized citation indicators.
//!
//! `citenorm` scores publications against reference sets built from a
//! publication-level classification scheme (field/subfield plus publication
//! year) or, for comparison runs, from individual journals. For every
//! publication in a set it computes tie-averaged citation percentiles,
//! percentile rank classes, the relative citation rate (citations divided by
//! the set mean), and fractionally counted citations (each citation weighted
//! by one over the citing paper's reference-list length).
//!
//! The pipeline is:
//!
//! 1. [`scheme::parse_scheme`] — load and validate the classification tree.
//! 2. [`corpus::ingest`] — load publication records and citation edges.
//! 3. [`refset::build_refsets`] — group publications into reference sets,
//!    with size-threshold fallback to the parent classification level.
//! 4. [`indicators::score_all`] — per-publication normalized scores.
//! 5. [`report`] — unit-level aggregation, per-year trends, file outputs.
//!
//! [`synth`] generates seeded synthetic corpora with controlled per-field
//! citation distributions, used by the test suites and handy for desk-scale
//! experiments.
//!
//! Classification grouping is the recommended mode; journal grouping exists
//! to quantify how much noisier journal baselines are (see
//! [`report::trend_variance`]).

pub mod corpus;
pub mod indicators;
pub mod numeric;
pub mod refset;
pub mod report;
pub mod scheme;
pub mod synth;

pub use corpus::{Corpus, CorpusError, IngestionReport, Publication};
pub use indicators::{IndicatorRecord, RankClassScheme};
pub use refset::{Grouping, RefSetPolicy, RefSetResult, ReferenceSet};
pub use scheme::{Level, Scheme, SchemeError, SchemeNode};
