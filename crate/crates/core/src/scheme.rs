//! Hierarchical classification scheme: parsing, validation, level resolution.
//!
//! A scheme is a forest of heading → section → subsection trees. The file
//! format is one pipe-delimited record per line:
//!
//! ```text
//! code|label|level|parent
//! ```
//!
//! where `level` is `heading`, `section` or `subsection` and `parent` is
//! empty for headings. Lines starting with `#` are comments. Codes are
//! opaque strings; nothing is inferred from their lexical shape.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Depth of a node in the classification tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Heading,
    Section,
    Subsection,
}

impl Level {
    /// 0 for headings, increasing downwards.
    pub fn depth(self) -> u8 {
        match self {
            Level::Heading => 0,
            Level::Section => 1,
            Level::Subsection => 2,
        }
    }

    /// The level exactly one step above, `None` for headings.
    pub fn parent_level(self) -> Option<Level> {
        match self {
            Level::Heading => None,
            Level::Section => Some(Level::Heading),
            Level::Subsection => Some(Level::Section),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Heading => "heading",
            Level::Section => "section",
            Level::Subsection => "subsection",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heading" => Ok(Level::Heading),
            "section" => Ok(Level::Section),
            "subsection" => Ok(Level::Subsection),
            other => Err(format!(
                "unknown level {other:?} (expected heading, section or subsection)"
            )),
        }
    }
}

/// One node of the classification tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeNode {
    pub code: String,
    pub label: String,
    pub level: Level,
    pub parent_code: Option<String>,
    /// Child codes in source order.
    pub children: Vec<String>,
}

/// A validated classification scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    pub name: String,
    nodes: HashMap<String, SchemeNode>,
    /// Heading codes in source order.
    roots: Vec<String>,
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("line {line}: malformed record, expected code|label|level|parent: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("line {line}: duplicate code {code}")]
    DuplicateCode { code: String, line: usize },
    #[error("line {line}: node {code}: unknown parent {parent}")]
    UnknownParent {
        code: String,
        parent: String,
        line: usize,
    },
    #[error("line {line}: heading {code} must not name a parent")]
    HeadingWithParent { code: String, line: usize },
    #[error("line {line}: {level} {code} has no parent")]
    MissingParent {
        code: String,
        level: Level,
        line: usize,
    },
    #[error("line {line}: level skip: {level} {code} names {parent_level} {parent} as parent")]
    LevelSkip {
        code: String,
        level: Level,
        parent: String,
        parent_level: Level,
        line: usize,
    },
    #[error("scheme has no headings")]
    Empty,
    #[error("unknown code {0}")]
    UnknownCode(String),
    #[error("cannot resolve {code} ({level}) down to {target}")]
    TargetBelowNode {
        code: String,
        level: Level,
        target: Level,
    },
}

/// Parse and validate a scheme definition.
///
/// `name` labels the scheme in reports; the CLI uses the file stem.
pub fn parse_scheme(source: &str, name: &str) -> Result<Scheme, SchemeError> {
    let mut nodes: HashMap<String, SchemeNode> = HashMap::new();
    let mut order: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('|').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(SchemeError::Malformed {
                line,
                detail: format!("found {} fields", fields.len()),
            });
        }
        let (code, label, level_str, parent) = (fields[0], fields[1], fields[2], fields[3]);
        if code.is_empty() {
            return Err(SchemeError::Malformed {
                line,
                detail: "empty code".into(),
            });
        }
        let level = Level::from_str(level_str)
            .map_err(|detail| SchemeError::Malformed { line, detail })?;
        if nodes.contains_key(code) {
            return Err(SchemeError::DuplicateCode {
                code: code.to_string(),
                line,
            });
        }
        let parent_code = if parent.is_empty() {
            None
        } else {
            Some(parent.to_string())
        };
        nodes.insert(
            code.to_string(),
            SchemeNode {
                code: code.to_string(),
                label: label.to_string(),
                level,
                parent_code,
                children: Vec::new(),
            },
        );
        order.push((line, code.to_string()));
    }

    // Link children in source order and validate the parent structure. The
    // one-step level rule makes the graph a forest: parent chains strictly
    // ascend in level, so no cycle can form.
    let mut roots = Vec::new();
    for (line, code) in &order {
        let node = &nodes[code];
        let level = node.level;
        match (&node.parent_code, level.parent_level()) {
            (None, None) => roots.push(code.clone()),
            (Some(_), None) => {
                return Err(SchemeError::HeadingWithParent {
                    code: code.clone(),
                    line: *line,
                })
            }
            (None, Some(_)) => {
                return Err(SchemeError::MissingParent {
                    code: code.clone(),
                    level,
                    line: *line,
                })
            }
            (Some(parent), Some(expected)) => {
                let parent = parent.clone();
                let parent_level = match nodes.get(&parent) {
                    Some(p) => p.level,
                    None => {
                        return Err(SchemeError::UnknownParent {
                            code: code.clone(),
                            parent,
                            line: *line,
                        })
                    }
                };
                if parent_level != expected {
                    return Err(SchemeError::LevelSkip {
                        code: code.clone(),
                        level,
                        parent,
                        parent_level,
                        line: *line,
                    });
                }
                nodes.get_mut(&parent).unwrap().children.push(code.clone());
            }
        }
    }

    if roots.is_empty() {
        return Err(SchemeError::Empty);
    }

    Ok(Scheme {
        name: name.to_string(),
        nodes,
        roots,
    })
}

impl Scheme {
    pub fn node(&self, code: &str) -> Option<&SchemeNode> {
        self.nodes.get(code)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.nodes.contains_key(code)
    }

    /// Heading codes in source order.
    pub fn roots(&self) -> &[String] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node count per level: (headings, sections, subsections).
    pub fn level_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for node in self.nodes.values() {
            match node.level {
                Level::Heading => counts.0 += 1,
                Level::Section => counts.1 += 1,
                Level::Subsection => counts.2 += 1,
            }
        }
        counts
    }

    /// Walk up from `code` to its unique ancestor-or-self at `target_level`.
    ///
    /// Fails if `code` is unknown or `target_level` lies below the node.
    pub fn resolve_level(&self, code: &str, target_level: Level) -> Result<&str, SchemeError> {
        let mut node = self
            .node(code)
            .ok_or_else(|| SchemeError::UnknownCode(code.to_string()))?;
        if target_level.depth() > node.level.depth() {
            return Err(SchemeError::TargetBelowNode {
                code: code.to_string(),
                level: node.level,
                target: target_level,
            });
        }
        while node.level != target_level {
            let parent = node
                .parent_code
                .as_deref()
                .expect("validated non-heading node has a parent");
            node = self.node(parent).expect("validated parent exists");
        }
        Ok(&node.code)
    }

    /// Like [`Scheme::resolve_level`], but a node shallower than
    /// `target_level` resolves to itself instead of failing. Groupings use
    /// this so publications coded at, say, heading level still land in a set
    /// when sets are requested per section.
    pub fn resolve_at_most(&self, code: &str, target_level: Level) -> Result<&str, SchemeError> {
        let node = self
            .node(code)
            .ok_or_else(|| SchemeError::UnknownCode(code.to_string()))?;
        if node.level.depth() <= target_level.depth() {
            Ok(&node.code)
        } else {
            self.resolve_level(code, target_level)
        }
    }

    /// Serialize back to the pipe-delimited file format.
    ///
    /// Records are written root by root in source order, each subtree
    /// depth-first, so parsing the output reproduces the same structure.
    pub fn to_file_format(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<&str> = Vec::new();
        for root in self.roots.iter().rev() {
            stack.push(root);
        }
        while let Some(code) = stack.pop() {
            let node = &self.nodes[code];
            out.push_str(&format!(
                "{}|{}|{}|{}\n",
                node.code,
                node.label,
                node.level,
                node.parent_code.as_deref().unwrap_or("")
            ));
            for child in node.children.iter().rev() {
                stack.push(child);
            }
        }
        out
    }
}
