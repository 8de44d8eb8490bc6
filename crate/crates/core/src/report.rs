//! Aggregation to evaluation units and machine-readable output files.
//!
//! A unit is any named collection of publication ids — an institution, a
//! journal's output, a research group. Aggregates are means of the members'
//! publication-level scores: mean percentile, the share of members at or
//! above the 90th percentile (`pp_top10`, same inclusive boundary as the
//! rank classes), and the mean of defined relative citation rates (`mncs`).
//! Members without an indicator record are reported excluded, never counted
//! as zeros, and undefined rcr values never enter the mncs numerator or
//! denominator.
//!
//! Every output table carries the baseline identity next to the score —
//! set key, resolved level, fallback status — because a normalized score
//! means nothing without knowing what it was normalized against.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusStats, IngestionReport};
use crate::indicators::{skewness_report, IndicatorRecord, SkewnessReport};
use crate::numeric::{population_variance, KahanSum};
use crate::refset::{RefSetPolicy, RefSetResult};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unit definition line {line}: {detail}")]
    MalformedUnitLine { line: usize, detail: String },
    #[error("unit {unit_id} has no members")]
    EmptyUnit { unit_id: String },
    #[error("unit {unit_id} lists {pub_id} twice")]
    DuplicateMember { unit_id: String, pub_id: String },
    #[error("duplicate unit id {0}")]
    DuplicateUnit(String),
    #[error("unit {unit_id} member {pub_id} is not in the corpus")]
    UnknownMember { unit_id: String, pub_id: String },
    #[error("unit {unit_id} spans fewer than two scored years")]
    SingleYear { unit_id: String },
    #[error("indicator record references set ({code}, {year}) absent from the reference sets")]
    MissingSet { code: String, year: i32 },
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("rendering table: {0}")]
    Csv(#[from] csv::Error),
}

/// A named collection of publications to aggregate over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitDefinition {
    pub unit_id: String,
    pub member_pub_ids: Vec<String>,
}

/// Parse unit definitions: one unit per line, the unit id followed by its
/// member publication ids, whitespace-delimited. `#` starts a comment.
pub fn parse_units(source: &str) -> Result<Vec<UnitDefinition>, ReportError> {
    let mut units = Vec::new();
    let mut seen_units = HashSet::new();
    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let unit_id = parts.next().expect("nonempty line").to_string();
        let member_pub_ids: Vec<String> = parts.map(str::to_string).collect();
        if member_pub_ids.is_empty() {
            return Err(ReportError::MalformedUnitLine {
                line: line_no,
                detail: format!("unit {unit_id} has no members"),
            });
        }
        let mut seen_members = HashSet::new();
        for id in &member_pub_ids {
            if !seen_members.insert(id.clone()) {
                return Err(ReportError::DuplicateMember {
                    unit_id,
                    pub_id: id.clone(),
                });
            }
        }
        if !seen_units.insert(unit_id.clone()) {
            return Err(ReportError::DuplicateUnit(unit_id));
        }
        units.push(UnitDefinition {
            unit_id,
            member_pub_ids,
        });
    }
    Ok(units)
}

/// Check that every unit member exists in the corpus. Members may still be
/// unscored (excluded from all sets); that is reported, not an error.
pub fn validate_units(units: &[UnitDefinition], corpus: &Corpus) -> Result<(), ReportError> {
    for unit in units {
        for id in &unit.member_pub_ids {
            if !corpus.contains(id) {
                return Err(ReportError::UnknownMember {
                    unit_id: unit.unit_id.clone(),
                    pub_id: id.clone(),
                });
            }
        }
    }
    Ok(())
}

/// One publication year's slice of a unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearAggregate {
    pub n: usize,
    pub mean_percentile: f64,
    /// `None` when no member of this year has a defined rcr.
    pub mncs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitReport {
    pub unit_id: String,
    pub n_scored: usize,
    /// Members with no indicator record (unclassified or dropped sets).
    pub n_excluded: usize,
    /// `None` only when nothing was scored.
    pub mean_percentile: Option<f64>,
    /// Share of scored members with percentile ≥ 90, inclusive boundary.
    pub pp_top10: Option<f64>,
    /// Mean rcr over members with a defined rcr; `None` when there are none.
    pub mncs: Option<f64>,
    pub per_year: BTreeMap<i32, YearAggregate>,
}

fn member_records<'a>(
    records: &'a [IndicatorRecord],
    unit: &UnitDefinition,
) -> (Vec<&'a IndicatorRecord>, usize) {
    let by_id: HashMap<&str, &IndicatorRecord> =
        records.iter().map(|r| (r.pub_id.as_str(), r)).collect();
    let found: Vec<&IndicatorRecord> = unit
        .member_pub_ids
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect();
    let excluded = unit.member_pub_ids.len() - found.len();
    (found, excluded)
}

fn year_aggregates(members: &[&IndicatorRecord]) -> BTreeMap<i32, YearAggregate> {
    let mut by_year: BTreeMap<i32, Vec<&IndicatorRecord>> = BTreeMap::new();
    for record in members {
        by_year.entry(record.set_key.year).or_default().push(record);
    }
    by_year
        .into_iter()
        .map(|(year, group)| {
            let mut percentiles = KahanSum::new();
            for r in &group {
                percentiles.add(r.percentile);
            }
            let mut rcr_sum = KahanSum::new();
            let mut rcr_n = 0usize;
            for r in &group {
                if let Some(rcr) = r.rcr {
                    rcr_sum.add(rcr);
                    rcr_n += 1;
                }
            }
            (
                year,
                YearAggregate {
                    n: group.len(),
                    mean_percentile: percentiles.value() / group.len() as f64,
                    mncs: (rcr_n > 0).then(|| rcr_sum.value() / rcr_n as f64),
                },
            )
        })
        .collect()
}

/// Aggregate one unit's indicator records.
pub fn unit_report(
    records: &[IndicatorRecord],
    unit: &UnitDefinition,
) -> Result<UnitReport, ReportError> {
    if unit.member_pub_ids.is_empty() {
        return Err(ReportError::EmptyUnit {
            unit_id: unit.unit_id.clone(),
        });
    }
    let (members, n_excluded) = member_records(records, unit);
    let n_scored = members.len();

    let mut percentile_sum = KahanSum::new();
    let mut top10 = 0usize;
    let mut rcr_sum = KahanSum::new();
    let mut rcr_n = 0usize;
    for record in &members {
        percentile_sum.add(record.percentile);
        if record.percentile >= 90.0 {
            top10 += 1;
        }
        if let Some(rcr) = record.rcr {
            rcr_sum.add(rcr);
            rcr_n += 1;
        }
    }

    Ok(UnitReport {
        unit_id: unit.unit_id.clone(),
        n_scored,
        n_excluded,
        mean_percentile: (n_scored > 0).then(|| percentile_sum.value() / n_scored as f64),
        pp_top10: (n_scored > 0).then(|| top10 as f64 / n_scored as f64),
        mncs: (rcr_n > 0).then(|| rcr_sum.value() / rcr_n as f64),
        per_year: year_aggregates(&members),
    })
}

/// Year-by-year series plus the spread of the yearly means.
///
/// The variance of the yearly mean scores is what separates stable baselines
/// from jumpy ones: the same unit scored against journal sets typically
/// swings far more across years than against field sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub unit_id: String,
    pub per_year: BTreeMap<i32, YearAggregate>,
    /// Population variance of the yearly mean percentiles.
    pub variance_mean_percentile: f64,
    /// Population variance of the yearly mncs values, over years where mncs
    /// is defined; `None` when fewer than two such years exist.
    pub variance_mncs: Option<f64>,
}

pub fn trend_variance(
    records: &[IndicatorRecord],
    unit: &UnitDefinition,
) -> Result<TrendReport, ReportError> {
    if unit.member_pub_ids.is_empty() {
        return Err(ReportError::EmptyUnit {
            unit_id: unit.unit_id.clone(),
        });
    }
    let (members, _) = member_records(records, unit);
    let per_year = year_aggregates(&members);
    if per_year.len() < 2 {
        return Err(ReportError::SingleYear {
            unit_id: unit.unit_id.clone(),
        });
    }
    let yearly_percentiles: Vec<f64> = per_year.values().map(|a| a.mean_percentile).collect();
    let yearly_mncs: Vec<f64> = per_year.values().filter_map(|a| a.mncs).collect();
    Ok(TrendReport {
        unit_id: unit.unit_id.clone(),
        variance_mean_percentile: population_variance(&yearly_percentiles)
            .expect("at least two years"),
        variance_mncs: (yearly_mncs.len() >= 2)
            .then(|| population_variance(&yearly_mncs).expect("two or more values")),
        per_year,
    })
}

/// Everything a reader needs to interpret a run: the policy, what ingestion
/// flagged, what grouping excluded, corpus coverage, and the shape of each
/// set's citation distribution.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub policy: RefSetPolicy,
    pub census_note: String,
    pub ingestion: IngestionReport,
    pub exclusions: crate::refset::ExclusionReport,
    pub coverage: CorpusStats,
    /// Keyed by "code/year".
    pub set_skewness: BTreeMap<String, SkewnessReport>,
    pub fractional_skipped_edges: usize,
}

pub fn build_diagnostics(
    corpus: &Corpus,
    refsets: &RefSetResult,
    policy: &RefSetPolicy,
    ingestion: &IngestionReport,
    coverage: CorpusStats,
    fractional_skipped_edges: usize,
) -> Diagnostics {
    let set_skewness = refsets
        .sets
        .values()
        .map(|set| {
            let counts: Vec<u64> = set
                .member_ids
                .iter()
                .map(|id| corpus.effective_citations(id).expect("set member present"))
                .collect();
            let skew = skewness_report(&counts).expect("sets are nonempty");
            (format!("{}/{}", set.key.code, set.key.year), skew)
        })
        .collect();
    Diagnostics {
        policy: *policy,
        census_note: corpus.census_note.clone(),
        ingestion: ingestion.clone(),
        exclusions: refsets.exclusions.clone(),
        coverage,
        set_skewness,
        fractional_skipped_edges,
    }
}

// Shortest round-trip decimal form; `None` renders empty (undefined ≠ 0).
fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| format!("{v}")).unwrap_or_default()
}

/// Render the per-publication indicator table.
///
/// Fixed header: pub_id, set_code, set_year, resolved_level, fallback,
/// n_set, citations, percentile, rank_class, rcr, rcr_defined, fractional.
pub fn render_indicator_table(
    records: &[IndicatorRecord],
    refsets: &RefSetResult,
) -> Result<String, ReportError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "pub_id",
        "set_code",
        "set_year",
        "resolved_level",
        "fallback",
        "n_set",
        "citations",
        "percentile",
        "rank_class",
        "rcr",
        "rcr_defined",
        "fractional",
    ])?;
    for record in records {
        let set = refsets
            .sets
            .get(&record.set_key)
            .ok_or_else(|| ReportError::MissingSet {
                code: record.set_key.code.clone(),
                year: record.set_key.year,
            })?;
        writer.write_record([
            record.pub_id.as_str(),
            record.set_key.code.as_str(),
            &record.set_key.year.to_string(),
            set.resolved_level.as_str(),
            set.fallback_label(),
            &record.n_set.to_string(),
            &record.citations.to_string(),
            &format!("{}", record.percentile),
            record.rank_class.as_str(),
            &fmt_opt(record.rcr),
            if record.rcr.is_some() { "true" } else { "false" },
            &format!("{}", record.fractional_citations),
        ])?;
    }
    let bytes = writer.into_inner().expect("vec writer never fails");
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per reference set: the baseline identity table.
pub fn render_refset_summary(refsets: &RefSetResult) -> Result<String, ReportError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["set_code", "set_year", "resolved_level", "size", "fallback"])?;
    for set in refsets.sets.values() {
        writer.write_record([
            set.key.code.as_str(),
            &set.key.year.to_string(),
            set.resolved_level.as_str(),
            &set.len().to_string(),
            set.fallback_label(),
        ])?;
    }
    let bytes = writer.into_inner().expect("vec writer never fails");
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub indicator_table: PathBuf,
    pub unit_reports: Option<PathBuf>,
    pub trends: Option<PathBuf>,
    pub diagnostics: PathBuf,
}

fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    fs::write(path, content).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Write the run's artifacts into `dir`: `indicators.csv`, `units.jsonl` and
/// `trends.jsonl` (one JSON document per unit, when units were given), and
/// `diagnostics.json`. Identical inputs produce byte-identical files.
pub fn write_outputs(
    dir: &Path,
    records: &[IndicatorRecord],
    refsets: &RefSetResult,
    units: &[UnitReport],
    trends: &[TrendReport],
    diagnostics: &Diagnostics,
) -> Result<OutputFiles, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;

    let indicator_table = dir.join("indicators.csv");
    write_file(&indicator_table, &render_indicator_table(records, refsets)?)?;

    let unit_reports = if units.is_empty() {
        None
    } else {
        let path = dir.join("units.jsonl");
        let mut body = String::new();
        for unit in units {
            body.push_str(&serde_json::to_string(unit).expect("unit report serializes"));
            body.push('\n');
        }
        write_file(&path, &body)?;
        Some(path)
    };

    let trends_path = if trends.is_empty() {
        None
    } else {
        let path = dir.join("trends.jsonl");
        let mut body = String::new();
        for trend in trends {
            body.push_str(&serde_json::to_string(trend).expect("trend report serializes"));
            body.push('\n');
        }
        write_file(&path, &body)?;
        Some(path)
    };

    let diagnostics_path = dir.join("diagnostics.json");
    let diag_body =
        serde_json::to_string_pretty(diagnostics).expect("diagnostics serialize") + "\n";
    write_file(&diagnostics_path, &diag_body)?;

    Ok(OutputFiles {
        indicator_table,
        unit_reports,
        trends: trends_path,
        diagnostics: diagnostics_path,
    })
}
