//! Per-publication normalized indicators.
//!
//! All scores are computed within a publication's reference set:
//!
//! * **percentile** — mean-rank percentile. For a paper with `L` set members
//!   strictly below it and `E` tied with it (itself included), the
//!   percentile is `100·(L + 0.5·E)/n`. 50 is the median; 90 means the
//!   paper sits at the top-10% threshold of its field and year.
//! * **rank class** — the interval between configured percentile cut points
//!   a paper falls into ("top 10%", "bottom 50%", …).
//! * **rcr** — relative citation rate `c/c₀` where `c₀` is the set's
//!   arithmetic mean; undefined exactly when `c₀ = 0`.
//! * **fractional citations** — every resolvable edge j→i gives paper i
//!   credit `1/N_j`, `N_j` being the citing paper's reference-list length,
//!   so each citing paper distributes one unit of influence in total.
//!
//! Percentiles depend only on ranks, which is what makes them robust to the
//! heavy right tail of citation counts; the skewness report quantifies that
//! tail so mean-based scores can be read with appropriate suspicion.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::numeric::{median_u64, KahanSum};
use crate::refset::{RefSetResult, SetKey};

#[derive(Debug, Error)]
pub enum IndicatorError {
    #[error("cannot score an empty reference set")]
    EmptySet,
    #[error("set ({code}, {year}) member {pub_id} is missing from the corpus")]
    UnknownMember {
        pub_id: String,
        code: String,
        year: i32,
    },
    #[error("thresholds must be strictly increasing and inside (0, 100): {0:?}")]
    InvalidThresholds(Vec<f64>),
}

/// Mean-rank percentiles for a whole set of counts, aligned with the input.
///
/// Ties share a percentile; strictly more citations always yields a strictly
/// greater percentile. Values live in [100·0.5/n, 100·(n−0.5)/n] — never
/// exactly 0 or 100.
pub fn percentile_of_counts(counts: &[u64]) -> Result<Vec<f64>, IndicatorError> {
    if counts.is_empty() {
        return Err(IndicatorError::EmptySet);
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = counts.len() as f64;
    Ok(counts
        .iter()
        .map(|&c| {
            let below = sorted.partition_point(|&x| x < c);
            let tied = sorted.partition_point(|&x| x <= c) - below;
            100.0 * (below as f64 + 0.5 * tied as f64) / n
        })
        .collect())
}

/// Percentiles keyed by publication id.
pub fn percentile_scores(
    set_citations: &[(String, u64)],
) -> Result<BTreeMap<String, f64>, IndicatorError> {
    let counts: Vec<u64> = set_citations.iter().map(|(_, c)| *c).collect();
    let percentiles = percentile_of_counts(&counts)?;
    Ok(set_citations
        .iter()
        .zip(percentiles)
        .map(|((id, _), p)| (id.clone(), p))
        .collect())
}

/// The set's arithmetic mean citation count (`c₀`), computed from an exact
/// integer sum.
pub fn set_mean(counts: &[u64]) -> Result<f64, IndicatorError> {
    if counts.is_empty() {
        return Err(IndicatorError::EmptySet);
    }
    let total: u128 = counts.iter().map(|&c| u128::from(c)).sum();
    Ok(total as f64 / counts.len() as f64)
}

/// Relative citation rates `c/c₀` keyed by publication id; `None` for every
/// member exactly when the set mean is zero.
pub fn rcr_scores(
    set_citations: &[(String, u64)],
) -> Result<BTreeMap<String, Option<f64>>, IndicatorError> {
    let counts: Vec<u64> = set_citations.iter().map(|(_, c)| *c).collect();
    let mean = set_mean(&counts)?;
    Ok(set_citations
        .iter()
        .map(|(id, c)| {
            let rcr = (mean > 0.0).then(|| *c as f64 / mean);
            (id.clone(), rcr)
        })
        .collect())
}

/// Percentile cut points and the interval labels they induce.
///
/// Thresholds `[50, 75, 90, 95, 99]` produce the classes `bottom 50%`,
/// `top 50%`, `top 25%`, `top 10%`, `top 5%`, `top 1%`. A percentile on a
/// boundary belongs to the upper class, so 90.0 is already "top 10%".
#[derive(Debug, Clone, PartialEq)]
pub struct RankClassScheme {
    thresholds: Vec<f64>,
    labels: Vec<String>,
}

impl RankClassScheme {
    pub fn new(thresholds: &[f64]) -> Result<Self, IndicatorError> {
        let increasing = thresholds.windows(2).all(|w| w[0] < w[1]);
        let in_range = thresholds.iter().all(|&t| t > 0.0 && t < 100.0);
        if thresholds.is_empty() || !increasing || !in_range {
            return Err(IndicatorError::InvalidThresholds(thresholds.to_vec()));
        }
        let mut labels = vec![format!("bottom {}%", fmt_pct(thresholds[0]))];
        for &t in thresholds {
            labels.push(format!("top {}%", fmt_pct(100.0 - t)));
        }
        Ok(RankClassScheme {
            thresholds: thresholds.to_vec(),
            labels,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl Default for RankClassScheme {
    fn default() -> Self {
        RankClassScheme::new(&[50.0, 75.0, 90.0, 95.0, 99.0]).expect("default thresholds valid")
    }
}

// 100−t without a trailing ".0" for whole numbers: 90 → "10", 87.5 → "12.5".
fn fmt_pct(value: f64) -> String {
    if value.fract() == 0.0 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

/// The label of the class interval containing `percentile`.
pub fn rank_class(percentile: f64, classes: &RankClassScheme) -> &str {
    let idx = classes
        .thresholds
        .iter()
        .rev()
        .position(|&t| percentile >= t)
        .map(|from_top| classes.thresholds.len() - from_top)
        .unwrap_or(0);
    &classes.labels[idx]
}

/// Fractional citation credit per publication, plus diagnostics.
#[derive(Debug, Clone, Default)]
pub struct FractionalScores {
    /// Every corpus publication appears, zeros included.
    pub scores: BTreeMap<String, f64>,
    /// Edges skipped because the citing paper had no reference count.
    pub skipped_no_ref_count: usize,
}

/// Distribute citation credit along edges: edge j→i adds `1/N_j` to i.
///
/// Dangling edges never contribute. A citing paper present in the corpus
/// always has a reference count (its outbound edges are at least one), so
/// the skip counter only guards declared-data corner cases.
pub fn fractional_scores(corpus: &Corpus) -> FractionalScores {
    let mut sums: BTreeMap<String, KahanSum> = corpus
        .publications()
        .map(|p| (p.id.clone(), KahanSum::new()))
        .collect();
    let mut skipped = 0usize;
    for edge in corpus.edges() {
        if corpus.is_dangling(edge) {
            continue;
        }
        let refs = corpus
            .effective_ref_count(&edge.citing_id)
            .expect("non-dangling edge has a present citing paper");
        match refs {
            Some(n) => {
                sums.get_mut(&edge.cited_id)
                    .expect("non-dangling edge has a present cited paper")
                    .add(1.0 / n as f64);
            }
            None => skipped += 1,
        }
    }
    FractionalScores {
        scores: sums.into_iter().map(|(id, s)| (id, s.value())).collect(),
        skipped_no_ref_count: skipped,
    }
}

/// Everything computed for one publication within its reference set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorRecord {
    pub pub_id: String,
    pub set_key: SetKey,
    pub n_set: usize,
    pub citations: u64,
    pub set_mean: f64,
    pub percentile: f64,
    pub rank_class: String,
    /// `None` when the set mean is zero.
    pub rcr: Option<f64>,
    pub fractional_citations: f64,
}

/// Score every reference-set member. Sets are scored in parallel; output is
/// sorted by (set key, pub id) regardless of thread count.
pub fn score_all(
    corpus: &Corpus,
    refsets: &RefSetResult,
    classes: &RankClassScheme,
) -> Result<Vec<IndicatorRecord>, IndicatorError> {
    let fractional = fractional_scores(corpus);
    let sets: Vec<_> = refsets.sets.values().collect();
    let per_set: Vec<Vec<IndicatorRecord>> = sets
        .par_iter()
        .map(|set| {
            let counts = set
                .member_ids
                .iter()
                .map(|id| {
                    corpus
                        .effective_citations(id)
                        .map_err(|_| IndicatorError::UnknownMember {
                            pub_id: id.clone(),
                            code: set.key.code.clone(),
                            year: set.key.year,
                        })
                })
                .collect::<Result<Vec<u64>, _>>()?;
            let percentiles = percentile_of_counts(&counts)?;
            let mean = set_mean(&counts)?;
            Ok(set
                .member_ids
                .iter()
                .zip(counts.iter().zip(percentiles))
                .map(|(id, (&c, percentile))| IndicatorRecord {
                    pub_id: id.clone(),
                    set_key: set.key.clone(),
                    n_set: set.member_ids.len(),
                    citations: c,
                    set_mean: mean,
                    percentile,
                    rank_class: rank_class(percentile, classes).to_string(),
                    rcr: (mean > 0.0).then(|| c as f64 / mean),
                    fractional_citations: fractional.scores.get(id).copied().unwrap_or(0.0),
                })
                .collect())
        })
        .collect::<Result<_, IndicatorError>>()?;
    Ok(per_set.into_iter().flatten().collect())
}

/// Citation-distribution shape of one set: how far the mean is dragged from
/// the median, and how much one paper dominates the total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewnessReport {
    pub mean: f64,
    pub median: f64,
    /// Set when mean > 1.5 × median.
    pub skew_flag: bool,
    /// Largest single paper's share of the set total; 0 for an uncited set.
    pub top_paper_share: f64,
}

pub fn skewness_report(counts: &[u64]) -> Result<SkewnessReport, IndicatorError> {
    if counts.is_empty() {
        return Err(IndicatorError::EmptySet);
    }
    let mean = set_mean(counts)?;
    let median = median_u64(counts).expect("nonempty");
    let total: u128 = counts.iter().map(|&c| u128::from(c)).sum();
    let top = *counts.iter().max().expect("nonempty");
    let top_paper_share = if total == 0 {
        0.0
    } else {
        top as f64 / total as f64
    };
    Ok(SkewnessReport {
        mean,
        median,
        skew_flag: mean > 1.5 * median,
        top_paper_share,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ingest;
    use crate::refset::{build_refsets, Fallback, Grouping, RefSetPolicy};
    use crate::scheme::{parse_scheme, Level, Scheme};
    use std::io::Cursor;

    const EPS: f64 = 1e-9;

    // Brute-force rank counting, quadratic on purpose: the independent
    // oracle for the sorted-scan implementation.
    fn percentile_oracle(counts: &[u64]) -> Vec<f64> {
        let n = counts.len() as f64;
        counts
            .iter()
            .map(|&c| {
                let below = counts.iter().filter(|&&x| x < c).count() as f64;
                let tied = counts.iter().filter(|&&x| x == c).count() as f64;
                100.0 * (below + 0.5 * tied) / n
            })
            .collect()
    }

    #[test]
    fn median_of_distinct_run_is_fifty() {
        let p = percentile_of_counts(&[1, 2, 3, 4, 5]).unwrap();
        assert!((p[2] - 50.0).abs() < EPS);
    }

    #[test]
    fn full_tie_scores_fifty_everywhere() {
        let p = percentile_of_counts(&[7, 7, 7, 7]).unwrap();
        assert!(p.iter().all(|&x| (x - 50.0).abs() < EPS));
    }

    #[test]
    fn largest_of_ten_distinct_is_ninety_five() {
        let counts: Vec<u64> = (0..10).map(|i| i * 3 + 1).collect();
        let p = percentile_of_counts(&counts).unwrap();
        assert!((p[9] - 95.0).abs() < EPS);
    }

    #[test]
    fn singleton_is_fifty() {
        let p = percentile_of_counts(&[42]).unwrap();
        assert_eq!(p, vec![50.0]);
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(
            percentile_of_counts(&[]).unwrap_err(),
            IndicatorError::EmptySet
        ));
    }

    #[test]
    fn matches_quadratic_oracle() {
        let counts = [0, 0, 5, 5, 5, 9, 12, 12, 40, 40, 40, 40, 41, 0, 3];
        let fast = percentile_of_counts(&counts).unwrap();
        let slow = percentile_oracle(&counts);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < EPS, "{a} vs {b}");
        }
    }

    #[test]
    fn more_citations_means_strictly_higher_percentile() {
        let counts = [3, 3, 8, 1, 8, 20];
        let p = percentile_of_counts(&counts).unwrap();
        assert!(p[0] > p[3] && p[2] > p[0] && p[5] > p[2]);
        assert_eq!(p[0], p[1]);
        assert_eq!(p[2], p[4]);
    }

    #[test]
    fn default_rank_class_labels() {
        let classes = RankClassScheme::default();
        assert_eq!(
            classes.labels(),
            &["bottom 50%", "top 50%", "top 25%", "top 10%", "top 5%", "top 1%"]
        );
    }

    #[test]
    fn boundary_belongs_to_upper_class() {
        let classes = RankClassScheme::default();
        assert_eq!(rank_class(90.0, &classes), "top 10%");
        assert_eq!(rank_class(89.999, &classes), "top 25%");
        assert_eq!(rank_class(0.0, &classes), "bottom 50%");
        assert_eq!(rank_class(100.0, &classes), "top 1%");
        assert_eq!(rank_class(50.0, &classes), "top 50%");
    }

    #[test]
    fn thresholds_must_increase_within_range() {
        assert!(RankClassScheme::new(&[90.0, 50.0]).is_err());
        assert!(RankClassScheme::new(&[50.0, 50.0]).is_err());
        assert!(RankClassScheme::new(&[0.0, 50.0]).is_err());
        assert!(RankClassScheme::new(&[50.0, 100.0]).is_err());
        assert!(RankClassScheme::new(&[]).is_err());
        let err = RankClassScheme::new(&[90.0, 50.0]).unwrap_err();
        assert!(err.to_string().contains("thresholds must be strictly increasing"));
    }

    #[test]
    fn fractional_threshold_labels() {
        let classes = RankClassScheme::new(&[87.5]).unwrap();
        assert_eq!(classes.labels(), &["bottom 87.5%", "top 12.5%"]);
    }

    #[test]
    fn rcr_against_mean_oracle() {
        let set = [("a".to_string(), 2u64), ("b".to_string(), 4), ("c".to_string(), 6)];
        let scores = rcr_scores(&set).unwrap();
        assert!((scores["c"].unwrap() - 1.5).abs() < EPS);
        assert!((scores["b"].unwrap() - 1.0).abs() < EPS);
        assert!((scores["a"].unwrap() - 0.5).abs() < EPS);
    }

    #[test]
    fn all_zero_set_has_undefined_rcr() {
        let set = [("a".to_string(), 0u64), ("b".to_string(), 0)];
        let scores = rcr_scores(&set).unwrap();
        assert!(scores.values().all(|v| v.is_none()));
    }

    #[test]
    fn mean_rcr_is_one() {
        let set: Vec<(String, u64)> = (0..1000).map(|i| (format!("p{i}"), i % 37)).collect();
        let scores = rcr_scores(&set).unwrap();
        let mut sum = KahanSum::new();
        for v in scores.values() {
            sum.add(v.unwrap());
        }
        assert!((sum.value() / set.len() as f64 - 1.0).abs() < EPS);
    }

    fn tiny_scheme() -> Scheme {
        parse_scheme("ORG|Organic|heading|\n25|Benzene|section|ORG\n", "t").unwrap()
    }

    fn scored(pubs: &str, edges: Option<&str>, min_size: usize) -> Vec<IndicatorRecord> {
        let scheme = tiny_scheme();
        let (corpus, _) = ingest(
            Cursor::new(pubs.to_string()),
            edges.map(|e| Cursor::new(e.to_string())),
            &scheme,
            "",
        )
        .unwrap();
        let refsets = build_refsets(
            &corpus,
            &scheme,
            &RefSetPolicy {
                grouping: Grouping::Classification,
                level: Level::Section,
                min_size,
                fallback: Fallback::ParentLevel,
            },
        )
        .unwrap();
        score_all(&corpus, &refsets, &RankClassScheme::default()).unwrap()
    }

    #[test]
    fn three_pub_set_hand_checked() {
        let pubs = r#"{"id":"a","year":2010,"code":"25","citations":0}
{"id":"b","year":2010,"code":"25","citations":5}
{"id":"c","year":2010,"code":"25","citations":10}
"#;
        let records = scored(pubs, None, 2);
        assert_eq!(records.len(), 3);
        let by_id: BTreeMap<&str, &IndicatorRecord> =
            records.iter().map(|r| (r.pub_id.as_str(), r)).collect();
        assert!((by_id["a"].percentile - 100.0 / 6.0).abs() < EPS);
        assert!((by_id["b"].percentile - 50.0).abs() < EPS);
        assert!((by_id["c"].percentile - 500.0 / 6.0).abs() < EPS);
        assert_eq!(by_id["b"].set_mean, 5.0);
        assert_eq!(by_id["a"].rcr, Some(0.0));
        assert_eq!(by_id["b"].rcr, Some(1.0));
        assert_eq!(by_id["c"].rcr, Some(2.0));
        assert_eq!(by_id["c"].rank_class, "top 25%");
    }

    #[test]
    fn singleton_flagged_set_scores_center() {
        // One classified pub, threshold far above: the set climbs to the
        // heading, stays a singleton, and is scored anyway.
        let cited = r#"{"id":"solo","year":2010,"code":"25","citations":4}"#;
        let records = scored(cited, None, 50);
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.set_key.code, "ORG");
        assert_eq!(r.percentile, 50.0);
        assert_eq!(r.rcr, Some(1.0));
        // And with zero citations the ratio is undefined instead.
        let uncited = r#"{"id":"solo","year":2010,"code":"25","citations":0}"#;
        assert_eq!(scored(uncited, None, 50)[0].rcr, None);
    }

    #[test]
    fn unclassifiable_pub_gets_no_record() {
        let pubs = r#"{"id":"a","year":2010,"code":"25","citations":1}
{"id":"b","year":2010,"code":"25","citations":2}
{"id":"x","year":2010,"code":"99","citations":9}
"#;
        let records = scored(pubs, None, 2);
        assert!(records.iter().all(|r| r.pub_id != "x"));
        assert_eq!(records.len(), 2);
    }

    #[test]
    fn fractional_hand_example() {
        // j1 cites {A,B} from 2 refs; j2 cites {A,C,D,E} from 4 refs.
        let pubs = r#"{"id":"A","year":2009}
{"id":"B","year":2009}
{"id":"C","year":2009}
{"id":"D","year":2009}
{"id":"E","year":2009}
{"id":"j1","year":2010}
{"id":"j2","year":2010}
"#;
        let edges = "j1\tA\nj1\tB\nj2\tA\nj2\tC\nj2\tD\nj2\tE\n";
        let scheme = tiny_scheme();
        let (corpus, _) = ingest(
            Cursor::new(pubs.to_string()),
            Some(Cursor::new(edges.to_string())),
            &scheme,
            "",
        )
        .unwrap();
        let f = fractional_scores(&corpus);
        assert!((f.scores["A"] - 0.75).abs() < EPS);
        assert!((f.scores["B"] - 0.5).abs() < EPS);
        assert!((f.scores["C"] - 0.25).abs() < EPS);
        assert_eq!(f.scores["j1"], 0.0);
        assert_eq!(f.skipped_no_ref_count, 0);
    }

    #[test]
    fn declared_ref_count_sets_the_weight() {
        // j declares a 4-long reference list; only 2 targets are covered.
        let pubs = r#"{"id":"A","year":2009}
{"id":"B","year":2009}
{"id":"j","year":2010,"refs":4}
"#;
        let edges = "j\tA\nj\tB\n";
        let scheme = tiny_scheme();
        let (corpus, _) = ingest(
            Cursor::new(pubs.to_string()),
            Some(Cursor::new(edges.to_string())),
            &scheme,
            "",
        )
        .unwrap();
        let f = fractional_scores(&corpus);
        assert!((f.scores["A"] - 0.25).abs() < EPS);
        assert!((f.scores["B"] - 0.25).abs() < EPS);
    }

    #[test]
    fn no_edges_means_all_zero() {
        let pubs = r#"{"id":"a","year":2010,"code":"25"}"#;
        let scheme = tiny_scheme();
        let (corpus, _) = ingest(
            Cursor::new(pubs.to_string()),
            None::<Cursor<String>>,
            &scheme,
            "",
        )
        .unwrap();
        let f = fractional_scores(&corpus);
        assert_eq!(f.scores["a"], 0.0);
    }

    #[test]
    fn output_is_sorted_by_set_then_id() {
        let mut pubs = String::new();
        for i in 0..3 {
            pubs.push_str(&format!("{{\"id\":\"b{i}\",\"year\":2011,\"code\":\"25\"}}\n"));
            pubs.push_str(&format!("{{\"id\":\"a{i}\",\"year\":2010,\"code\":\"25\"}}\n"));
        }
        let records = scored(&pubs, None, 2);
        let keys: Vec<(String, i32, String)> = records
            .iter()
            .map(|r| (r.set_key.code.clone(), r.set_key.year, r.pub_id.clone()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn skew_flag_on_heavy_tail() {
        let r = skewness_report(&[1, 1, 1, 1, 96]).unwrap();
        assert_eq!(r.mean, 20.0);
        assert_eq!(r.median, 1.0);
        assert!(r.skew_flag);
        assert!((r.top_paper_share - 0.96).abs() < EPS);
    }

    #[test]
    fn symmetric_set_not_flagged() {
        let r = skewness_report(&[3, 3, 3]).unwrap();
        assert_eq!(r.mean, 3.0);
        assert_eq!(r.median, 3.0);
        assert!(!r.skew_flag);
        assert!((r.top_paper_share - 1.0 / 3.0).abs() < EPS);
    }

    #[test]
    fn uncited_set_has_zero_top_share() {
        let r = skewness_report(&[0, 0, 0]).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.median, 0.0);
        assert!(!r.skew_flag);
        assert_eq!(r.top_paper_share, 0.0);
    }
}
