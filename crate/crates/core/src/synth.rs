//! Seeded synthetic corpora with controlled per-field citation behaviour.
//!
//! Real fields differ wildly in how much they cite; testing normalization
//! requires corpora where those differences are known by construction. A
//! synth spec (TOML) names field blocks — (code, year, size, distribution) —
//! and either draws declared citation counts per block (`counts_only`) or
//! emits an explicit citing population whose reference lists target the
//! field populations (`full_graph`), so fractional counting has a real
//! graph to work on.
//!
//! Counts come from a discretized lognormal (the stock right-skewed shape
//! of citation data), a negative binomial (drawn as a gamma–Poisson
//! mixture), or a constant. All randomness flows from one ChaCha12 stream
//! seeded with the spec's `seed`, so a spec reproduces byte-for-byte on any
//! platform.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};
use serde::Deserialize;
use thiserror::Error;

use crate::corpus::Publication;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("parsing synth spec: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid synth spec: {0}")]
    Invalid(String),
}

fn invalid(detail: impl Into<String>) -> SynthError {
    SynthError::Invalid(detail.into())
}

/// Citation-count distribution family for one field block.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum DistSpec {
    /// `round(exp(N(mu, sigma)))`.
    #[serde(rename = "lognormal")]
    Lognormal { mu: f64, sigma: f64 },
    /// Negative binomial with `r` failures and success probability `p`,
    /// drawn as Poisson(Gamma(r, (1−p)/p)).
    #[serde(rename = "negative_binomial")]
    NegativeBinomial { r: f64, p: f64 },
    #[serde(rename = "constant")]
    Constant { c: u64 },
}

impl DistSpec {
    fn validate(&self) -> Result<(), SynthError> {
        match self {
            DistSpec::Lognormal { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(invalid(format!(
                        "lognormal requires finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
                    )));
                }
            }
            DistSpec::NegativeBinomial { r, p } => {
                if !r.is_finite() || *r <= 0.0 || !(0.0..1.0).contains(p) || *p == 0.0 {
                    return Err(invalid(format!(
                        "negative_binomial requires r > 0 and 0 < p < 1, got r={r}, p={p}"
                    )));
                }
            }
            DistSpec::Constant { .. } => {}
        }
        Ok(())
    }

    fn sample_count(&self, rng: &mut ChaCha12Rng) -> u64 {
        self.sample_weight(rng).round() as u64
    }

    // Continuous draw; full_graph mode uses it as an attractiveness weight.
    fn sample_weight(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            DistSpec::Lognormal { mu, sigma } => LogNormal::new(*mu, *sigma)
                .expect("validated parameters")
                .sample(rng),
            DistSpec::NegativeBinomial { r, p } => {
                let scale = (1.0 - p) / p;
                let lambda = Gamma::new(*r, scale)
                    .expect("validated parameters")
                    .sample(rng);
                if lambda <= 0.0 {
                    0.0
                } else {
                    Poisson::new(lambda).expect("positive finite lambda").sample(rng)
                }
            }
            DistSpec::Constant { c } => *c as f64,
        }
    }
}

/// One block of same-field, same-year publications.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// Id prefix for the block's publications; defaults to `code-year`.
    pub label: Option<String>,
    pub code: String,
    pub year: i32,
    pub n_pubs: usize,
    pub journal: Option<String>,
    pub dist: DistSpec,
}

impl FieldSpec {
    fn effective_label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.code, self.year))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMode {
    /// Draw declared citation counts; no edge file.
    #[default]
    CountsOnly,
    /// Emit a citing population plus edges; counts derive from the graph.
    FullGraph,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    #[serde(default)]
    pub edge_mode: EdgeMode,
    /// Poisson mean of each citing paper's reference-list length
    /// (full_graph only; every list has at least one entry).
    pub mean_out_degree: Option<f64>,
    /// Size of the citing population (full_graph only).
    pub n_citing: Option<usize>,
    pub fields: Vec<FieldSpec>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.fields.is_empty() {
            return Err(invalid("at least one [[fields]] block is required"));
        }
        let mut labels = std::collections::HashSet::new();
        for field in &self.fields {
            if field.n_pubs == 0 {
                return Err(invalid(format!(
                    "field {} must have n_pubs >= 1",
                    field.effective_label()
                )));
            }
            field.dist.validate()?;
            if !labels.insert(field.effective_label()) {
                return Err(invalid(format!(
                    "duplicate field label {}",
                    field.effective_label()
                )));
            }
        }
        match self.edge_mode {
            EdgeMode::CountsOnly => {
                if self.mean_out_degree.is_some() || self.n_citing.is_some() {
                    return Err(invalid(
                        "mean_out_degree and n_citing require edge_mode = \"full_graph\"",
                    ));
                }
            }
            EdgeMode::FullGraph => {
                if labels.contains("citing") {
                    return Err(invalid("label \"citing\" is reserved in full_graph mode"));
                }
                match self.mean_out_degree {
                    Some(m) if m.is_finite() && m > 0.0 => {}
                    _ => return Err(invalid("full_graph requires mean_out_degree > 0")),
                }
                if !self.n_citing.is_some_and(|n| n > 0) {
                    return Err(invalid("full_graph requires n_citing >= 1"));
                }
            }
        }
        Ok(())
    }
}

/// Parse and validate a TOML synth spec.
pub fn parse_spec(source: &str) -> Result<SynthSpec, SynthError> {
    let spec: SynthSpec = toml::from_str(source)?;
    spec.validate()?;
    Ok(spec)
}

/// Generated corpus documents, ready for ingestion or for writing to disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthOutput {
    /// Publication records, one JSON object per line.
    pub publications: String,
    /// Edge lines (`citing<TAB>cited`); present only in full_graph mode.
    pub edges: Option<String>,
    /// Publication ids per field label (plus "citing" in full_graph mode),
    /// in generation order — handy for building unit definitions.
    pub ids_by_label: BTreeMap<String, Vec<String>>,
}

/// Generate a corpus from the spec. Deterministic given the seed.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    match spec.edge_mode {
        EdgeMode::CountsOnly => Ok(generate_counts_only(spec, &mut rng)),
        EdgeMode::FullGraph => Ok(generate_full_graph(spec, &mut rng)),
    }
}

fn pub_line(publication: &Publication) -> String {
    serde_json::to_string(publication).expect("publication serializes")
}

fn generate_counts_only(spec: &SynthSpec, rng: &mut ChaCha12Rng) -> SynthOutput {
    let mut publications = String::new();
    let mut ids_by_label: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for field in &spec.fields {
        let label = field.effective_label();
        let ids = ids_by_label.entry(label.clone()).or_default();
        for i in 0..field.n_pubs {
            let id = format!("{label}-{i}");
            let record = Publication {
                id: id.clone(),
                year: field.year,
                principal_code: Some(field.code.clone()),
                journal_id: field.journal.clone(),
                declared_citation_count: Some(field.dist.sample_count(rng)),
                declared_ref_count: None,
                cross_ref_codes: Vec::new(),
            };
            publications.push_str(&pub_line(&record));
            publications.push('\n');
            ids.push(id);
        }
    }
    SynthOutput {
        publications,
        edges: None,
        ids_by_label,
    }
}

fn generate_full_graph(spec: &SynthSpec, rng: &mut ChaCha12Rng) -> SynthOutput {
    let mut publications = String::new();
    let mut ids_by_label: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut cited_ids: Vec<String> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();

    // Cited field populations carry no declared counts: citations must
    // derive from the emitted edges alone.
    for field in &spec.fields {
        let label = field.effective_label();
        let ids = ids_by_label.entry(label.clone()).or_default();
        for i in 0..field.n_pubs {
            let id = format!("{label}-{i}");
            let record = Publication {
                id: id.clone(),
                year: field.year,
                principal_code: Some(field.code.clone()),
                journal_id: field.journal.clone(),
                declared_citation_count: None,
                declared_ref_count: None,
                cross_ref_codes: Vec::new(),
            };
            publications.push_str(&pub_line(&record));
            publications.push('\n');
            ids.push(id.clone());
            cited_ids.push(id);
            weights.push(field.dist.sample_weight(rng));
        }
    }

    let n_citing = spec.n_citing.expect("validated");
    let mean_out = spec.mean_out_degree.expect("validated");
    let out_degree_dist = Poisson::new(mean_out).expect("validated mean");
    // Citing papers sit one year after the newest field; they carry no code,
    // so they never enter a reference set themselves.
    let citing_year = spec.fields.iter().map(|f| f.year).max().expect("nonempty") + 1;

    let mut edges = String::new();
    let citing_ids = ids_by_label.entry("citing".to_string()).or_default();
    for i in 0..n_citing {
        let id = format!("citing-{i}");
        let record = Publication {
            id: id.clone(),
            year: citing_year,
            principal_code: None,
            journal_id: None,
            declared_citation_count: None,
            declared_ref_count: None,
            cross_ref_codes: Vec::new(),
        };
        publications.push_str(&pub_line(&record));
        publications.push('\n');
        citing_ids.push(id.clone());

        let drawn: f64 = out_degree_dist.sample(rng);
        let out_degree = (drawn as usize).clamp(1, cited_ids.len());
        // Distinct targets, preferring high-weight papers; a degenerate
        // all-zero weight vector falls back to uniform sampling.
        let picks = index::sample_weighted(rng, cited_ids.len(), |j| weights[j], out_degree)
            .unwrap_or_else(|_| index::sample(rng, cited_ids.len(), out_degree));
        for j in picks {
            edges.push_str(&id);
            edges.push('\t');
            edges.push_str(&cited_ids[j]);
            edges.push('\n');
        }
    }

    SynthOutput {
        publications,
        edges: Some(edges),
        ids_by_label,
    }
}
