//! Document model, label spaces and corpus readers.
//!
//! Every reader normalizes into [`Document`]: an ordered list of sentences
//! (each one a candidate argument) plus directed `(head, tail, label)`
//! relation triples. The canonical on-disk form is JSONL, one document per
//! line:
//!
//! ```json
//! {"doc_id":"d1","sentences":["a","b"],"relations":[[0,1,"support"]]}
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// A directed, labeled edge between two sentences of one document.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize, String)", into = "(usize, usize, String)")]
pub struct Relation {
    pub head: usize,
    pub tail: usize,
    pub label: String,
}

impl Relation {
    pub fn new(head: usize, tail: usize, label: impl Into<String>) -> Self {
        Relation {
            head,
            tail,
            label: label.into(),
        }
    }
}

impl From<(usize, usize, String)> for Relation {
    fn from((head, tail, label): (usize, usize, String)) -> Self {
        Relation { head, tail, label }
    }
}

impl From<Relation> for (usize, usize, String) {
    fn from(r: Relation) -> Self {
        (r.head, r.tail, r.label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<String>,
    pub relations: Vec<Relation>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Checks index bounds, self-pairs and duplicate pairs. Label membership
    /// is checked separately against a [`LabelSpace`].
    pub fn validate(&self) -> Result<()> {
        let n = self.sentences.len();
        let mut seen = HashSet::new();
        for r in &self.relations {
            ensure!(
                r.head < n && r.tail < n,
                "document {}: relation ({}, {}) out of range for {} sentences",
                self.doc_id,
                r.head,
                r.tail,
                n
            );
            ensure!(
                r.head != r.tail,
                "document {}: self relation on sentence {}",
                self.doc_id,
                r.head
            );
            ensure!(
                seen.insert((r.head, r.tail)),
                "document {}: duplicate relation ({}, {})",
                self.doc_id,
                r.head,
                r.tail
            );
        }
        Ok(())
    }

    pub fn validate_against(&self, space: &LabelSpace) -> Result<()> {
        self.validate()?;
        for r in &self.relations {
            ensure!(
                space.index_of(&r.label).is_some(),
                "document {}: label {:?} not in label space {:?}",
                self.doc_id,
                r.label,
                space.labels
            );
        }
        Ok(())
    }
}

/// Ordered class names, one of which is the default "no relation" class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    pub labels: Vec<String>,
    pub no_relation_index: usize,
}

pub const SUPPORT: &str = "support";
pub const ATTACK: &str = "attack";
pub const UNRELATED: &str = "unrelated";
pub const RELATED: &str = "related";

impl LabelSpace {
    pub fn new(labels: Vec<String>, no_relation_index: usize) -> Result<Self> {
        ensure!(!labels.is_empty(), "label space is empty");
        ensure!(
            no_relation_index < labels.len(),
            "no_relation_index {} out of range for {} labels",
            no_relation_index,
            labels.len()
        );
        let unique: HashSet<&String> = labels.iter().collect();
        ensure!(
            unique.len() == labels.len(),
            "duplicate labels in {:?}",
            labels
        );
        Ok(LabelSpace {
            labels,
            no_relation_index,
        })
    }

    /// support / attack / unrelated, the three-way scheme of the medical
    /// abstracts corpus.
    pub fn support_attack() -> Self {
        LabelSpace {
            labels: vec![SUPPORT.into(), ATTACK.into(), UNRELATED.into()],
            no_relation_index: 2,
        }
    }

    /// related / unrelated.
    pub fn binary() -> Self {
        LabelSpace {
            labels: vec![RELATED.into(), UNRELATED.into()],
            no_relation_index: 1,
        }
    }

    /// Collects the labels used by `docs` in sorted order and appends
    /// `no_relation` as the last class.
    pub fn from_documents(docs: &[Document], no_relation: &str) -> Result<Self> {
        let mut set: BTreeSet<&str> = BTreeSet::new();
        for doc in docs {
            for r in &doc.relations {
                set.insert(&r.label);
            }
        }
        ensure!(
            !set.contains(no_relation),
            "no-relation label {:?} used as an explicit relation",
            no_relation
        );
        let mut labels: Vec<String> = set.into_iter().map(String::from).collect();
        labels.push(no_relation.to_string());
        let idx = labels.len() - 1;
        LabelSpace::new(labels, idx)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn no_relation(&self) -> &str {
        &self.labels[self.no_relation_index]
    }
}

/// Dense `n × n` gold label grid. Row = head sentence, column = tail.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    pub n: usize,
    pub values: Vec<usize>,
}

impl LabelMatrix {
    pub fn filled(n: usize, value: usize) -> Self {
        LabelMatrix {
            n,
            values: vec![value; n * n],
        }
    }

    pub fn get(&self, head: usize, tail: usize) -> usize {
        self.values[head * self.n + tail]
    }

    pub fn set(&mut self, head: usize, tail: usize, value: usize) {
        self.values[head * self.n + tail] = value;
    }

    /// Recovers the `(head, tail, label)` triples of every off-diagonal
    /// cell not labeled `no_relation_index`, in row-major order.
    pub fn triples(&self, space: &LabelSpace) -> Vec<Relation> {
        let mut out = Vec::new();
        for h in 0..self.n {
            for t in 0..self.n {
                let v = self.get(h, t);
                if h != t && v != space.no_relation_index {
                    out.push(Relation::new(h, t, space.labels[v].clone()));
                }
            }
        }
        out
    }
}

pub fn build_label_matrix(doc: &Document, space: &LabelSpace) -> Result<LabelMatrix> {
    doc.validate()?;
    let mut m = LabelMatrix::filled(doc.len(), space.no_relation_index);
    for r in &doc.relations {
        let idx = space.index_of(&r.label).ok_or_else(|| {
            Error::Validation(format!(
                "document {}: label {:?} not in label space {:?}",
                doc.doc_id, r.label, space.labels
            ))
        })?;
        m.set(r.head, r.tail, idx);
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Jsonl,
    AbstrctLike,
    CdcpLike,
    ScidtbLike,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "abstrct_like" => Ok(CorpusFormat::AbstrctLike),
            "cdcp_like" => Ok(CorpusFormat::CdcpLike),
            "scidtb_like" => Ok(CorpusFormat::ScidtbLike),
            other => Err(Error::Validation(format!(
                "unknown corpus format {other:?}; expected jsonl, abstrct_like, cdcp_like or scidtb_like"
            ))),
        }
    }
}

pub fn parse_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>> {
    let docs = match format {
        CorpusFormat::Jsonl => parse_jsonl(path)?,
        CorpusFormat::AbstrctLike => read_dir_docs(path, "ann", parse_brat)?,
        CorpusFormat::CdcpLike => read_dir_docs(path, "txt", parse_cdcp)?,
        CorpusFormat::ScidtbLike => read_dir_docs(path, "dep", parse_scidtb)?,
    };
    for doc in &docs {
        doc.validate()?;
    }
    Ok(docs)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_jsonl(path: &Path) -> Result<Vec<Document>> {
    let text = read_to_string(path)?;
    let mut docs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), lineno + 1), e))?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Serializes documents as canonical JSONL (trailing newline included).
pub fn to_jsonl(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        // Document serialization cannot fail: all keys are strings.
        out.push_str(&serde_json::to_string(doc).expect("document serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(docs: &[Document], path: &Path) -> Result<()> {
    fs::write(path, to_jsonl(docs)).map_err(|e| Error::io(path, e))
}

/// Files with the given extension directly under `dir`, sorted by name.
fn read_dir_docs(
    dir: &Path,
    ext: &str,
    parse: fn(&Path) -> Result<Document>,
) -> Result<Vec<Document>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            files.push(path);
        }
    }
    files.sort();
    files.iter().map(|p| parse(p)).collect()
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string()
}

/// Brat standoff annotations (`.ann`), as distributed with the medical
/// abstracts corpus.
///
/// * `T<k>\t<Type> <start> <end>\t<text>` lines are argument components;
///   they become sentences ordered by start offset.
/// * `R<k>\t<Type> Arg1:T<a> Arg2:T<b>` lines are relations with head
///   `Arg1` and tail `Arg2`. `Support` maps to `support`; `Attack` and
///   `Partial-Attack` map to `attack`; other types are lower-cased.
/// * Any other line kind (`A`, `#`, ...) is ignored.
fn parse_brat(path: &Path) -> Result<Document> {
    let text = read_to_string(path)?;
    let loc = |line: usize| format!("{}:{}", path.display(), line + 1);
    let mut components: Vec<(usize, String, String)> = Vec::new();
    let mut raw_relations: Vec<(String, String, String)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let id = fields.next().unwrap_or_default();
        let body = fields
            .next()
            .ok_or_else(|| Error::parse(loc(lineno), "missing tab-separated body"))?;
        if id.starts_with('T') {
            let span_text = fields
                .next()
                .ok_or_else(|| Error::parse(loc(lineno), "component without text"))?;
            let start = body
                .split_whitespace()
                .nth(1)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::parse(loc(lineno), "component without start offset"))?;
            components.push((start, id.to_string(), span_text.trim().to_string()));
        } else if id.starts_with('R') {
            let parts: Vec<&str> = body.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::parse(
                    loc(lineno),
                    "expected `<Type> Arg1:T.. Arg2:T..`",
                ));
            }
            let arg = |s: &str, key: &str| {
                s.strip_prefix(key)
                    .map(String::from)
                    .ok_or_else(|| Error::parse(loc(lineno), format!("expected {key}<id>")))
            };
            let label = match parts[0] {
                "Support" | "support" => SUPPORT.to_string(),
                "Attack" | "attack" | "Partial-Attack" => ATTACK.to_string(),
                other => other.to_lowercase(),
            };
            raw_relations.push((arg(parts[1], "Arg1:")?, arg(parts[2], "Arg2:")?, label));
        }
    }
    components.sort_by_key(|(start, _, _)| *start);
    let index_of = |id: &str| components.iter().position(|(_, cid, _)| cid == id);
    let doc_id = file_stem(path);
    let mut relations = Vec::with_capacity(raw_relations.len());
    for (a, b, label) in raw_relations {
        let (h, t) = match (index_of(&a), index_of(&b)) {
            (Some(h), Some(t)) => (h, t),
            _ => {
                return Err(Error::Validation(format!(
                    "document {doc_id}: relation references unknown component {a} or {b}"
                )))
            }
        };
        relations.push(Relation::new(h, t, label));
    }
    Ok(Document {
        doc_id,
        sentences: components.into_iter().map(|(_, _, t)| t).collect(),
        relations,
    })
}

#[derive(Deserialize)]
struct CdcpAnnotation {
    prop_offsets: Vec<(usize, usize)>,
    #[serde(default)]
    reasons: Vec<((usize, usize), usize)>,
    #[serde(default)]
    evidences: Vec<((usize, usize), usize)>,
}

/// User-comment corpus layout: `<id>.txt` holds the raw comment and
/// `<id>.ann.json` holds `prop_offsets` (character spans of the
/// propositions) plus `reasons` / `evidences` lists of
/// `[[first_src, last_src], target]`. Every source proposition in the
/// inclusive range points at `target` with label `related`.
fn parse_cdcp(txt_path: &Path) -> Result<Document> {
    let text = read_to_string(txt_path)?;
    let ann_path = txt_path.with_extension("ann.json");
    let ann_text = read_to_string(&ann_path)?;
    let ann: CdcpAnnotation = serde_json::from_str(&ann_text)
        .map_err(|e| Error::parse(ann_path.display().to_string(), e))?;
    let doc_id = file_stem(txt_path);
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::with_capacity(ann.prop_offsets.len());
    for &(start, end) in &ann.prop_offsets {
        ensure!(
            start <= end && end <= chars.len(),
            "document {doc_id}: proposition span {start}..{end} outside text of {} chars",
            chars.len()
        );
        sentences.push(
            chars[start..end]
                .iter()
                .collect::<String>()
                .trim()
                .to_string(),
        );
    }
    let mut relations = Vec::new();
    let mut seen = HashSet::new();
    for &((first, last), target) in ann.reasons.iter().chain(&ann.evidences) {
        ensure!(
            first <= last,
            "document {doc_id}: empty source range {first}..{last}"
        );
        for src in first..=last {
            if seen.insert((src, target)) {
                relations.push(Relation::new(src, target, RELATED));
            }
        }
    }
    Ok(Document {
        doc_id,
        sentences,
        relations,
    })
}

#[derive(Deserialize)]
struct ScidtbFile {
    root: Vec<ScidtbUnit>,
}

#[derive(Deserialize)]
struct ScidtbUnit {
    id: i64,
    parent: i64,
    text: String,
    relation: String,
}

/// Discourse dependency trees (`.dep` JSON with a `root` list of units
/// `{id, parent, text, relation}`). Unit 0 is the artificial root and is
/// dropped; unit `k` becomes sentence `k - 1`. Each unit attached to a
/// non-root parent yields the relation `(child, parent, relation)`.
fn parse_scidtb(path: &Path) -> Result<Document> {
    let text = read_to_string(path)?;
    let file: ScidtbFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    let doc_id = file_stem(path);
    let mut units: Vec<&ScidtbUnit> = file.root.iter().filter(|u| u.id > 0).collect();
    units.sort_by_key(|u| u.id);
    for (k, u) in units.iter().enumerate() {
        ensure!(
            u.id as usize == k + 1,
            "document {doc_id}: unit ids are not contiguous (found {} at position {})",
            u.id,
            k + 1
        );
    }
    let n = units.len() as i64;
    let mut relations = Vec::new();
    for u in &units {
        if u.parent <= 0 {
            continue;
        }
        ensure!(
            u.parent <= n,
            "document {doc_id}: unit {} has parent {} beyond {} units",
            u.id,
            u.parent,
            n
        );
        relations.push(Relation::new(
            (u.id - 1) as usize,
            (u.parent - 1) as usize,
            u.relation.clone(),
        ));
    }
    Ok(Document {
        doc_id,
        sentences: units.iter().map(|u| u.text.trim().to_string()).collect(),
        relations,
    })
}

/// Relation pattern planted into synthetic documents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedRule {
    /// Sentence `i` relates to `i + 1`: `support` when both carry the same
    /// stance, `attack` otherwise. Sentence `i` additionally attacks `i + 2`
    /// exactly when it supports `i + 1`, so the label of a distance-two pair
    /// depends on a third sentence.
    Chain,
    /// Every sentence `i > 0` relates to sentence 0: `support` when the
    /// stances agree, `attack` otherwise.
    Star,
}

impl FromStr for PlantedRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain" => Ok(PlantedRule::Chain),
            "star" => Ok(PlantedRule::Star),
            other => Err(Error::Validation(format!(
                "unknown planted rule {other:?}; expected chain or star"
            ))),
        }
    }
}

impl PlantedRule {
    /// Expected `(support, attack, no_relation)` cell counts over the
    /// off-diagonal cells of an `n`-sentence document when stances are
    /// fair coin flips.
    pub fn nominal_counts(self, n: usize) -> (f64, f64, f64) {
        let off_diag = (n * n.saturating_sub(1)) as f64;
        let (s, a) = match self {
            PlantedRule::Chain => {
                let adj = n.saturating_sub(1) as f64;
                let skip = n.saturating_sub(2) as f64;
                (adj / 2.0, adj / 2.0 + skip / 2.0)
            }
            PlantedRule::Star => {
                let spokes = n.saturating_sub(1) as f64;
                (spokes / 2.0, spokes / 2.0)
            }
        };
        (s, a, off_diag - s - a)
    }
}

/// Parameters of the synthetic corpus generator. The label space must
/// contain `support` and `attack`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_docs: usize,
    /// Inclusive `[min, max]` number of sentences per document.
    pub sentences_per_doc: (usize, usize),
    pub label_space: LabelSpace,
    pub planted_rule: PlantedRule,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(num_docs: usize, sentences: (usize, usize), rule: PlantedRule, seed: u64) -> Self {
        SynthSpec {
            num_docs,
            sentences_per_doc: sentences,
            label_space: LabelSpace::support_attack(),
            planted_rule: rule,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.sentences_per_doc;
        ensure!(self.num_docs > 0, "num_docs must be positive");
        ensure!(lo >= 1 && lo <= hi, "sentence range [{lo}, {hi}] is empty");
        for label in [SUPPORT, ATTACK] {
            ensure!(
                self.label_space.index_of(label).is_some(),
                "label space {:?} lacks {label:?}",
                self.label_space.labels
            );
        }
        ensure!(
            self.label_space.no_relation() != SUPPORT && self.label_space.no_relation() != ATTACK,
            "no-relation class must differ from support and attack"
        );
        Ok(())
    }
}

const STANCES: [&str; 2] = ["pro", "con"];
const TOPICS: [&str; 4] = ["dosage", "outcome", "cohort", "safety"];

pub fn generate_synthetic_corpus(spec: &SynthSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.sentences_per_doc;
    let mut docs = Vec::with_capacity(spec.num_docs);
    for k in 0..spec.num_docs {
        let n = rng.gen_range(lo..=hi);
        let stances: Vec<usize> = (0..n).map(|_| rng.gen_range(0..STANCES.len())).collect();
        let sentences = stances
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let topic = TOPICS.choose(&mut rng).copied().unwrap_or("none");
                format!("claim {i} argues {} regarding {topic}", STANCES[s])
            })
            .collect();
        let label = |agree: bool| if agree { SUPPORT } else { ATTACK };
        let mut relations = Vec::new();
        match spec.planted_rule {
            PlantedRule::Chain => {
                for i in 0..n.saturating_sub(1) {
                    relations.push(Relation::new(i, i + 1, label(stances[i] == stances[i + 1])));
                }
                for i in 0..n.saturating_sub(2) {
                    if stances[i] == stances[i + 1] {
                        relations.push(Relation::new(i, i + 2, ATTACK));
                    }
                }
            }
            PlantedRule::Star => {
                for i in 1..n {
                    relations.push(Relation::new(i, 0, label(stances[i] == stances[0])));
                }
            }
        }
        let mut doc_id = String::new();
        let _ = write!(doc_id, "synth-{}-{k:05}", spec.seed);
        docs.push(Document {
            doc_id,
            sentences,
            relations,
        });
    }
    Ok(docs)
}
