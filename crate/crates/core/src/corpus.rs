//! Publication records and the citation graph.
//!
//! Publications arrive as line-delimited JSON objects with keys `id`, `year`
//! and optionally `code` (principal classification), `journal`, `citations`
//! (declared count), `refs` (declared reference-list length) and `xref`
//! (cross-reference codes, annotation only). Edges arrive as two-column
//! tab-separated `citing_id<TAB>cited_id` lines.
//!
//! Declared counts take precedence over graph-derived counts: real extracts
//! carry citation totals whose citing papers are only partially present.
//! Publications with a code the scheme does not know are kept (they still
//! cite and get cited) but flagged unclassifiable and never join a reference
//! set. Edges with a missing endpoint are kept as dangling and never scored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scheme::{Level, Scheme};

/// One publication record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub id: String,
    pub year: i32,
    /// Principal classification code; a publication has at most one.
    #[serde(rename = "code", skip_serializing_if = "Option::is_none")]
    pub principal_code: Option<String>,
    #[serde(rename = "journal", skip_serializing_if = "Option::is_none")]
    pub journal_id: Option<String>,
    #[serde(rename = "citations", skip_serializing_if = "Option::is_none")]
    pub declared_citation_count: Option<u64>,
    #[serde(rename = "refs", skip_serializing_if = "Option::is_none")]
    pub declared_ref_count: Option<u64>,
    /// Cross-reference codes. Annotation only: they never create
    /// reference-set membership.
    #[serde(rename = "xref", default, skip_serializing_if = "Vec::is_empty")]
    pub cross_ref_codes: Vec<String>,
}

/// A directed citing → cited link.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct CitationEdge {
    pub citing_id: String,
    pub cited_id: String,
}

/// Counts plus the first few offending items of one flag category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FlagList {
    pub count: usize,
    pub first: Vec<String>,
}

const FLAG_LIST_CAP: usize = 100;

impl FlagList {
    pub(crate) fn push(&mut self, item: String) {
        self.count += 1;
        if self.first.len() < FLAG_LIST_CAP {
            self.first.push(item);
        }
    }
}

/// What ingestion accepted, flagged and rejected.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestionReport {
    pub publications_accepted: usize,
    pub edges_accepted: usize,
    /// Publications kept but flagged unclassifiable: their principal code is
    /// not in the scheme.
    pub unknown_code: FlagList,
    /// Edges with a missing endpoint, kept but never scored.
    pub dangling_edges: FlagList,
    pub self_edges_rejected: FlagList,
    pub duplicate_edges_rejected: FlagList,
    /// Publications whose declared citation count disagrees with their
    /// inbound-edge count (declared value wins).
    pub citation_count_mismatches: FlagList,
}

impl IngestionReport {
    /// True when nothing was flagged or rejected.
    pub fn is_clean(&self) -> bool {
        self.unknown_code.count == 0
            && self.dangling_edges.count == 0
            && self.self_edges_rejected.count == 0
            && self.duplicate_edges_rejected.count == 0
            && self.citation_count_mismatches.count == 0
    }
}

/// Immutable publication store plus citation graph.
#[derive(Debug, Clone)]
pub struct Corpus {
    publications: BTreeMap<String, Publication>,
    edges: Vec<CitationEdge>,
    /// Free-text provenance of when the citation counts were observed.
    pub census_note: String,
    inbound: HashMap<String, u64>,
    outbound: HashMap<String, u64>,
    dangling_edges: usize,
    unclassifiable: HashSet<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("publication line {line}: {detail}")]
    MalformedPublication { line: usize, detail: String },
    #[error("publication line {line}: duplicate publication id {id}")]
    DuplicateId { id: String, line: usize },
    #[error("edge line {line}: {detail}")]
    MalformedEdge { line: usize, detail: String },
    #[error("unknown publication id {0}")]
    UnknownPublication(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Read publications (and optionally edges), validate, and build a [`Corpus`].
///
/// Hard errors abort: malformed records and duplicate publication ids.
/// Everything else is kept and flagged in the [`IngestionReport`]:
/// unknown codes, dangling edges, rejected self/duplicate edges, declared
/// citation counts that disagree with the graph.
pub fn ingest<P: BufRead, E: BufRead>(
    pub_source: P,
    edge_source: Option<E>,
    scheme: &Scheme,
    census_note: &str,
) -> Result<(Corpus, IngestionReport), CorpusError> {
    let mut report = IngestionReport::default();
    let mut publications: BTreeMap<String, Publication> = BTreeMap::new();

    for (idx, line) in pub_source.lines().enumerate() {
        let line_no = idx + 1;
        let raw = line?;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let record: Publication =
            serde_json::from_str(trimmed).map_err(|e| CorpusError::MalformedPublication {
                line: line_no,
                detail: e.to_string(),
            })?;
        if record.id.is_empty() {
            return Err(CorpusError::MalformedPublication {
                line: line_no,
                detail: "empty id".into(),
            });
        }
        if record.declared_ref_count == Some(0) {
            return Err(CorpusError::MalformedPublication {
                line: line_no,
                detail: "refs must be >= 1 when present".into(),
            });
        }
        if publications.contains_key(&record.id) {
            return Err(CorpusError::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        if let Some(code) = &record.principal_code {
            if !scheme.contains(code) {
                report.unknown_code.push(record.id.clone());
            }
        }
        publications.insert(record.id.clone(), record);
    }
    report.publications_accepted = publications.len();

    let mut edges: Vec<CitationEdge> = Vec::new();
    let mut seen_pairs: HashSet<(String, String)> = HashSet::new();
    let mut dangling = 0usize;
    if let Some(source) = edge_source {
        for (idx, line) in source.lines().enumerate() {
            let line_no = idx + 1;
            let raw = line?;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split('\t');
            let (citing, cited) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) if !a.trim().is_empty() && !b.trim().is_empty() => {
                    (a.trim().to_string(), b.trim().to_string())
                }
                _ => {
                    return Err(CorpusError::MalformedEdge {
                        line: line_no,
                        detail: "expected citing_id<TAB>cited_id".into(),
                    })
                }
            };
            if citing == cited {
                report.self_edges_rejected.push(citing);
                continue;
            }
            if !seen_pairs.insert((citing.clone(), cited.clone())) {
                report
                    .duplicate_edges_rejected
                    .push(format!("{citing} -> {cited}"));
                continue;
            }
            if !publications.contains_key(&citing) || !publications.contains_key(&cited) {
                report.dangling_edges.push(format!("{citing} -> {cited}"));
                dangling += 1;
            }
            edges.push(CitationEdge {
                citing_id: citing,
                cited_id: cited,
            });
        }
    }
    report.edges_accepted = edges.len();

    // Derived counts. Outbound counts the full reference list of a present
    // paper, dangling targets included; inbound counts only resolvable links.
    let mut inbound: HashMap<String, u64> = HashMap::new();
    let mut outbound: HashMap<String, u64> = HashMap::new();
    for edge in &edges {
        let citing_present = publications.contains_key(&edge.citing_id);
        let cited_present = publications.contains_key(&edge.cited_id);
        if citing_present {
            *outbound.entry(edge.citing_id.clone()).or_insert(0) += 1;
        }
        if citing_present && cited_present {
            *inbound.entry(edge.cited_id.clone()).or_insert(0) += 1;
        }
    }

    for (id, publication) in &publications {
        if let Some(declared) = publication.declared_citation_count {
            let from_graph = inbound.get(id).copied().unwrap_or(0);
            if from_graph > 0 && from_graph != declared {
                report.citation_count_mismatches.push(id.clone());
            }
        }
    }

    let unclassifiable = publications
        .values()
        .filter(|p| {
            p.principal_code
                .as_deref()
                .is_some_and(|code| !scheme.contains(code))
        })
        .map(|p| p.id.clone())
        .collect();

    let corpus = Corpus {
        publications,
        edges,
        census_note: census_note.to_string(),
        inbound,
        outbound,
        dangling_edges: dangling,
        unclassifiable,
    };
    Ok((corpus, report))
}

impl Corpus {
    pub fn publications(&self) -> impl Iterator<Item = &Publication> {
        self.publications.values()
    }

    pub fn get(&self, id: &str) -> Option<&Publication> {
        self.publications.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.publications.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.publications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publications.is_empty()
    }

    pub fn edges(&self) -> &[CitationEdge] {
        &self.edges
    }

    /// An edge is dangling when either endpoint is missing from the corpus.
    pub fn is_dangling(&self, edge: &CitationEdge) -> bool {
        !self.publications.contains_key(&edge.citing_id)
            || !self.publications.contains_key(&edge.cited_id)
    }

    pub fn dangling_edge_count(&self) -> usize {
        self.dangling_edges
    }

    /// Publications whose principal code the scheme did not recognize.
    pub fn is_unclassifiable(&self, id: &str) -> bool {
        self.unclassifiable.contains(id)
    }

    pub fn inbound_count(&self, id: &str) -> u64 {
        self.inbound.get(id).copied().unwrap_or(0)
    }

    pub fn outbound_count(&self, id: &str) -> u64 {
        self.outbound.get(id).copied().unwrap_or(0)
    }

    /// The citation count used for scoring: the declared count when present,
    /// otherwise the number of inbound non-dangling edges, otherwise zero.
    pub fn effective_citations(&self, pub_id: &str) -> Result<u64, CorpusError> {
        let publication = self
            .get(pub_id)
            .ok_or_else(|| CorpusError::UnknownPublication(pub_id.to_string()))?;
        Ok(publication
            .declared_citation_count
            .unwrap_or_else(|| self.inbound_count(pub_id)))
    }

    /// Reference-list length: declared when present, otherwise the outbound
    /// edge count, `None` when neither exists.
    pub fn effective_ref_count(&self, pub_id: &str) -> Result<Option<u64>, CorpusError> {
        let publication = self
            .get(pub_id)
            .ok_or_else(|| CorpusError::UnknownPublication(pub_id.to_string()))?;
        if let Some(declared) = publication.declared_ref_count {
            return Ok(Some(declared));
        }
        let outbound = self.outbound_count(pub_id);
        Ok((outbound > 0).then_some(outbound))
    }
}

/// One (code, year) cell of the coverage table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeYearCount {
    pub code: String,
    pub year: i32,
    pub count: usize,
}

/// Per-year spread of publication counts across codes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearSummary {
    pub year: i32,
    pub codes: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CorpusStats {
    pub rows: Vec<CodeYearCount>,
    pub yearly: Vec<YearSummary>,
    /// Publications without a usable code (absent or unknown), excluded from
    /// the table.
    pub unclassified: usize,
}

/// Publication counts per (code resolved at `level`, year), with per-year
/// min/max/mean across codes. Codes shallower than `level` count under
/// themselves.
pub fn corpus_stats(corpus: &Corpus, scheme: &Scheme, level: Level) -> CorpusStats {
    let mut cells: BTreeMap<(String, i32), usize> = BTreeMap::new();
    let mut unclassified = 0usize;
    for publication in corpus.publications() {
        let group = publication
            .principal_code
            .as_deref()
            .and_then(|code| scheme.resolve_at_most(code, level).ok());
        match group {
            Some(code) => {
                *cells.entry((code.to_string(), publication.year)).or_insert(0) += 1;
            }
            None => unclassified += 1,
        }
    }

    let mut per_year: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    let rows: Vec<CodeYearCount> = cells
        .into_iter()
        .map(|((code, year), count)| {
            per_year.entry(year).or_default().push(count);
            CodeYearCount { code, year, count }
        })
        .collect();

    let yearly = per_year
        .into_iter()
        .map(|(year, counts)| {
            let total: usize = counts.iter().sum();
            YearSummary {
                year,
                codes: counts.len(),
                min: *counts.iter().min().unwrap(),
                max: *counts.iter().max().unwrap(),
                mean: total as f64 / counts.len() as f64,
            }
        })
        .collect();

    CorpusStats {
        rows,
        yearly,
        unclassified,
    }
}
