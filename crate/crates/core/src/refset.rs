//! Reference-set construction.
//!
//! A reference set is the comparison population for one publication: all
//! publications sharing a classification code (resolved at a chosen level)
//! and a publication year — or, for the journal-mode diagnostics, sharing a
//! journal and year.
//!
//! Sets smaller than `min_size` are unreliable rank baselines. Under the
//! default parent-level fallback, each undersized group is re-keyed one
//! level up (repeatedly, up to heading) until it reaches the threshold;
//! groups that are still undersized at heading level — or undersized journal
//! sets, which have no parent — are kept and scored but flagged exhausted.
//! Only undersized groups move: a well-sized sibling keeps its own set, so
//! the final sets always partition the classified publications.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, FlagList};
use crate::scheme::{Level, Scheme};

/// How publications are pooled into comparison sets.
///
/// Classification grouping is the recommended mode; journal grouping exists
/// for side-by-side diagnostics and inherits every weakness of the journal
/// as a field proxy (small sets, mixed subject scope).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    Classification,
    Journal,
}

/// What to do with groups below the size threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Re-key undersized groups at the parent level, repeatedly, up to
    /// heading; still-undersized heading-level sets are scored but flagged.
    ParentLevel,
    /// Drop undersized groups and report their members as excluded.
    Exclude,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RefSetPolicy {
    pub grouping: Grouping,
    /// Classification level to group at; ignored under journal grouping.
    pub level: Level,
    pub min_size: usize,
    pub fallback: Fallback,
}

impl Default for RefSetPolicy {
    fn default() -> Self {
        RefSetPolicy {
            grouping: Grouping::Classification,
            level: Level::Section,
            min_size: 50,
            fallback: Fallback::ParentLevel,
        }
    }
}

impl RefSetPolicy {
    /// A set of one cannot rank anything against anything.
    pub fn validate(&self) -> Result<(), RefSetError> {
        if self.min_size < 2 {
            return Err(RefSetError::MinSizeTooSmall(self.min_size));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RefSetError {
    #[error("min_size must be at least 2, got {0}")]
    MinSizeTooSmall(usize),
}

/// Identifies one reference set: a group code (classification code or
/// journal id) plus a publication year.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SetKey {
    pub code: String,
    pub year: i32,
}

/// The level a set's key ended up at after any fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolvedLevel {
    Heading,
    Section,
    Subsection,
    Journal,
}

impl From<Level> for ResolvedLevel {
    fn from(level: Level) -> Self {
        match level {
            Level::Heading => ResolvedLevel::Heading,
            Level::Section => ResolvedLevel::Section,
            Level::Subsection => ResolvedLevel::Subsection,
        }
    }
}

impl ResolvedLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResolvedLevel::Heading => "heading",
            ResolvedLevel::Section => "section",
            ResolvedLevel::Subsection => "subsection",
            ResolvedLevel::Journal => "journal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSet {
    pub key: SetKey,
    pub resolved_level: ResolvedLevel,
    /// Sorted publication ids; all share the key's year.
    pub member_ids: Vec<String>,
    /// True when any member arrived here by fallback from a deeper level.
    pub fallback_applied: bool,
    /// True when the set is still undersized with nowhere left to fall
    /// back to (heading level, or any journal set).
    pub fallback_exhausted: bool,
}

impl ReferenceSet {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    /// Single-word status for report tables.
    pub fn fallback_label(&self) -> &'static str {
        if self.fallback_exhausted {
            "exhausted"
        } else if self.fallback_applied {
            "applied"
        } else {
            "none"
        }
    }
}

/// Publications that could not join any reference set, by reason.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ExclusionReport {
    /// No principal code (classification grouping).
    pub no_code: FlagList,
    /// Principal code unknown to the scheme.
    pub unknown_code: FlagList,
    /// No journal id (journal grouping).
    pub no_journal: FlagList,
    /// Members of undersized groups dropped under fallback=exclude.
    pub undersized_dropped: FlagList,
}

impl ExclusionReport {
    pub fn total(&self) -> usize {
        self.no_code.count
            + self.unknown_code.count
            + self.no_journal.count
            + self.undersized_dropped.count
    }
}

#[derive(Debug, Clone)]
pub struct RefSetResult {
    /// Final sets, keyed and iterated in (code, year) order.
    pub sets: BTreeMap<SetKey, ReferenceSet>,
    /// pub_id → key of the set scoring it.
    pub assignment: BTreeMap<String, SetKey>,
    pub exclusions: ExclusionReport,
}

impl RefSetResult {
    pub fn set_for(&self, pub_id: &str) -> Option<&ReferenceSet> {
        self.assignment.get(pub_id).and_then(|key| self.sets.get(key))
    }
}

// A set under construction: final level is not known until fallback settles.
struct Draft {
    level: Level,
    members: Vec<String>,
    fallback_applied: bool,
}

/// Group the corpus into reference sets under `policy`.
///
/// Deterministic: iteration is over sorted ids and keys throughout, so the
/// result is a pure function of corpus content, scheme and policy.
pub fn build_refsets(
    corpus: &Corpus,
    scheme: &Scheme,
    policy: &RefSetPolicy,
) -> Result<RefSetResult, RefSetError> {
    policy.validate()?;
    match policy.grouping {
        Grouping::Classification => build_classification(corpus, scheme, policy),
        Grouping::Journal => build_journal(corpus, policy),
    }
}

fn build_classification(
    corpus: &Corpus,
    scheme: &Scheme,
    policy: &RefSetPolicy,
) -> Result<RefSetResult, RefSetError> {
    let mut exclusions = ExclusionReport::default();
    let mut drafts: BTreeMap<SetKey, Draft> = BTreeMap::new();

    for publication in corpus.publications() {
        let Some(code) = publication.principal_code.as_deref() else {
            exclusions.no_code.push(publication.id.clone());
            continue;
        };
        if !scheme.contains(code) {
            exclusions.unknown_code.push(publication.id.clone());
            continue;
        }
        // Codes shallower than the policy level group at their own level.
        let group = scheme
            .resolve_at_most(code, policy.level)
            .expect("known code resolves");
        let level = scheme.node(group).expect("resolved code exists").level;
        let key = SetKey {
            code: group.to_string(),
            year: publication.year,
        };
        drafts
            .entry(key)
            .or_insert_with(|| Draft {
                level,
                members: Vec::new(),
                fallback_applied: false,
            })
            .members
            .push(publication.id.clone());
    }

    match policy.fallback {
        Fallback::Exclude => {
            let (kept, dropped): (BTreeMap<_, _>, BTreeMap<_, _>) = drafts
                .into_iter()
                .partition(|(_, draft)| draft.members.len() >= policy.min_size);
            for (_, draft) in dropped {
                for id in draft.members {
                    exclusions.undersized_dropped.push(id);
                }
            }
            drafts = kept;
        }
        Fallback::ParentLevel => {
            // Each round moves every undersized non-heading set one level up,
            // simultaneously; well-sized sets never move. Terminates because
            // every move strictly reduces a set's depth.
            loop {
                let moving: Vec<SetKey> = drafts
                    .iter()
                    .filter(|(_, d)| {
                        d.members.len() < policy.min_size && d.level != Level::Heading
                    })
                    .map(|(k, _)| k.clone())
                    .collect();
                if moving.is_empty() {
                    break;
                }
                for key in moving {
                    let draft = drafts.remove(&key).expect("key collected above");
                    let parent_code = scheme
                        .node(&key.code)
                        .and_then(|n| n.parent_code.clone())
                        .expect("non-heading node has a parent");
                    let parent_level = scheme
                        .node(&parent_code)
                        .expect("parent exists in validated scheme")
                        .level;
                    let target = drafts
                        .entry(SetKey {
                            code: parent_code,
                            year: key.year,
                        })
                        .or_insert_with(|| Draft {
                            level: parent_level,
                            members: Vec::new(),
                            fallback_applied: false,
                        });
                    target.members.extend(draft.members);
                    target.fallback_applied = true;
                }
            }
        }
    }

    let mut result = finish(drafts, policy, |level| level == Level::Heading);
    result.exclusions = exclusions;
    Ok(result)
}

fn build_journal(corpus: &Corpus, policy: &RefSetPolicy) -> Result<RefSetResult, RefSetError> {
    let mut exclusions = ExclusionReport::default();
    let mut drafts: BTreeMap<SetKey, Draft> = BTreeMap::new();

    for publication in corpus.publications() {
        let Some(journal) = publication.journal_id.as_deref() else {
            exclusions.no_journal.push(publication.id.clone());
            continue;
        };
        let key = SetKey {
            code: journal.to_string(),
            year: publication.year,
        };
        drafts
            .entry(key)
            .or_insert_with(|| Draft {
                // A journal has no place in the scheme hierarchy; the level
                // field is unused on the journal path (see finish()).
                level: Level::Heading,
                members: Vec::new(),
                fallback_applied: false,
            })
            .members
            .push(publication.id.clone());
    }

    if policy.fallback == Fallback::Exclude {
        let (kept, dropped): (BTreeMap<_, _>, BTreeMap<_, _>) = drafts
            .into_iter()
            .partition(|(_, draft)| draft.members.len() >= policy.min_size);
        for (_, draft) in dropped {
            for id in draft.members {
                exclusions.undersized_dropped.push(id);
            }
        }
        drafts = kept;
    }

    let mut result = finish(drafts, policy, |_| true);
    for set in result.sets.values_mut() {
        set.resolved_level = ResolvedLevel::Journal;
    }
    result.exclusions = exclusions;
    Ok(result)
}

// Seal drafts into sets; `is_root` says whether a level has no parent, which
// is where an undersized set becomes exhausted rather than an invariant bug.
fn finish(
    drafts: BTreeMap<SetKey, Draft>,
    policy: &RefSetPolicy,
    is_root: impl Fn(Level) -> bool,
) -> RefSetResult {
    let mut sets: BTreeMap<SetKey, ReferenceSet> = BTreeMap::new();
    let mut assignment: BTreeMap<String, SetKey> = BTreeMap::new();
    for (key, draft) in drafts {
        let undersized = draft.members.len() < policy.min_size;
        debug_assert!(!undersized || is_root(draft.level) || policy.fallback == Fallback::Exclude);
        let mut member_ids = draft.members;
        member_ids.sort_unstable();
        for id in &member_ids {
            assignment.insert(id.clone(), key.clone());
        }
        sets.insert(
            key.clone(),
            ReferenceSet {
                key,
                resolved_level: draft.level.into(),
                member_ids,
                fallback_applied: draft.fallback_applied,
                fallback_exhausted: undersized,
            },
        );
    }
    RefSetResult {
        sets,
        assignment,
        exclusions: ExclusionReport::default(),
    }
}
