//! Data model for bi-level knowledge graphs: interning, TSV ingestion,
//! split handling, indices, and dataset statistics.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: base triplet ({h}, {r}, {t}) not found in the base triple universe")]
    UnresolvedBase {
        path: PathBuf,
        line: usize,
        h: String,
        r: String,
        t: String,
    },
    #[error("splits overlap: {count} triples appear in more than one split, e.g. {example}")]
    SplitOverlap { count: usize, example: String },
}

pub type Result<T> = std::result::Result<T, KgError>;

/// Dense index into the entity interner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Dense index into the base relation interner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

/// Dense index into the higher-level relation interner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HigherRelationId(pub u32);

/// Dense index over the deduplicated base triple universe (all splits).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BaseTripletId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BaseTriplet {
    pub h: EntityId,
    pub r: RelationId,
    pub t: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HigherTriplet {
    pub ti: BaseTripletId,
    pub rhat: HigherRelationId,
    pub tj: BaseTripletId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Valid => write!(f, "valid"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Label <-> dense id bijection. Ids are assigned in first-occurrence order.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> &str {
        &self.labels[id as usize]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Parses one base-triple line: `head<TAB>relation<TAB>tail`.
fn parse_fields<'a>(
    path: &Path,
    line_no: usize,
    line: &'a str,
    expected: usize,
) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != expected {
        return Err(KgError::Parse {
            path: path.to_owned(),
            line: line_no,
            msg: format!("expected {expected} tab-separated fields, got {}", fields.len()),
        });
    }
    for f in &fields {
        if f.is_empty() {
            return Err(KgError::Parse {
                path: path.to_owned(),
                line: line_no,
                msg: "empty field".into(),
            });
        }
    }
    Ok(fields)
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| KgError::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l)))
}

/// Loads base triples from a TSV file in file order, extending the interners
/// deterministically in first-occurrence order. Duplicate lines are returned
/// as-is; deduplication happens at graph build.
pub fn load_base_triples(
    path: &Path,
    entities: &mut Interner,
    relations: &mut Interner,
) -> Result<Vec<BaseTriplet>> {
    let mut out = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| KgError::Io {
            path: path.to_owned(),
            source: e,
        })?;
        if line.is_empty() {
            continue;
        }
        let f = parse_fields(path, line_no, &line, 3)?;
        out.push(BaseTriplet {
            h: EntityId(entities.intern(f[0])),
            r: RelationId(relations.intern(f[1])),
            t: EntityId(entities.intern(f[2])),
        });
    }
    Ok(out)
}

/// Loads higher-level triples from a TSV file. Line format:
/// `h1<TAB>r1<TAB>t1<TAB>rhat<TAB>h2<TAB>r2<TAB>t2`.
///
/// Both embedded base triples must resolve against the base triple universe.
pub fn load_higher_triples(
    path: &Path,
    entities: &Interner,
    relations: &Interner,
    higher_relations: &mut Interner,
    base_index: &HashMap<BaseTriplet, BaseTripletId>,
) -> Result<Vec<HigherTriplet>> {
    let mut out = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| KgError::Io {
            path: path.to_owned(),
            source: e,
        })?;
        if line.is_empty() {
            continue;
        }
        let f = parse_fields(path, line_no, &line, 7)?;
        let resolve = |h: &str, r: &str, t: &str| -> Result<BaseTripletId> {
            let triple = match (entities.get(h), relations.get(r), entities.get(t)) {
                (Some(he), Some(re), Some(te)) => BaseTriplet {
                    h: EntityId(he),
                    r: RelationId(re),
                    t: EntityId(te),
                },
                _ => {
                    return Err(KgError::UnresolvedBase {
                        path: path.to_owned(),
                        line: line_no,
                        h: h.into(),
                        r: r.into(),
                        t: t.into(),
                    })
                }
            };
            base_index.get(&triple).copied().ok_or(KgError::UnresolvedBase {
                path: path.to_owned(),
                line: line_no,
                h: h.into(),
                r: r.into(),
                t: t.into(),
            })
        };
        let ti = resolve(f[0], f[1], f[2])?;
        let rhat = HigherRelationId(higher_relations.intern(f[3]));
        let tj = resolve(f[4], f[5], f[6])?;
        out.push(HigherTriplet { ti, rhat, tj });
    }
    Ok(out)
}

/// Six-integer dataset statistics report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    /// |V|: number of entities.
    #[serde(rename = "V")]
    pub entities: usize,
    /// |R|: number of base relations.
    #[serde(rename = "R")]
    pub relations: usize,
    /// |E|: number of distinct base triples over all splits.
    #[serde(rename = "E")]
    pub base_triplets: usize,
    /// |R_hat|: number of higher-level relations.
    #[serde(rename = "R_hat")]
    pub higher_relations: usize,
    /// |H|: number of distinct higher triples over all splits.
    #[serde(rename = "H")]
    pub higher_triplets: usize,
    /// |E_hat|: number of distinct base triples involved in a higher triple.
    #[serde(rename = "E_hat")]
    pub involved_base_triplets: usize,
}

/// An interned bi-level knowledge graph with split-disjoint triple sets and
/// the indices required by augmentation, training, and filtered evaluation.
///
/// Immutable after construction; safe to share across worker threads.
#[derive(Debug, Clone)]
pub struct BiLevelKG {
    pub entities: Interner,
    pub relations: Interner,
    pub higher_relations: Interner,

    /// Deduplicated base triples per split, in first-occurrence order.
    pub base: [Vec<BaseTriplet>; 3],
    /// Deduplicated higher triples per split, in first-occurrence order.
    pub higher: [Vec<HigherTriplet>; 3],

    /// Base triple universe over all splits; `triplets[id]` round-trips with
    /// `triplet_ids`.
    pub triplets: Vec<BaseTriplet>,
    pub triplet_ids: HashMap<BaseTriplet, BaseTripletId>,

    /// Membership sets for augmentation exclusion and filtered evaluation.
    pub train_base_set: HashSet<BaseTriplet>,
    pub all_base_set: HashSet<BaseTriplet>,
    pub all_higher_set: HashSet<HigherTriplet>,

    /// Build-time warnings (collapsed duplicates, cross-split higher
    /// references).
    pub warnings: Vec<String>,
}

impl BiLevelKG {
    pub fn base_split(&self, split: Split) -> &[BaseTriplet] {
        &self.base[split.index()]
    }

    pub fn higher_split(&self, split: Split) -> &[HigherTriplet] {
        &self.higher[split.index()]
    }

    pub fn triplet_id(&self, triple: &BaseTriplet) -> Option<BaseTripletId> {
        self.triplet_ids.get(triple).copied()
    }

    pub fn triplet(&self, id: BaseTripletId) -> BaseTriplet {
        self.triplets[id.0 as usize]
    }

    pub fn stats(&self) -> StatsReport {
        let involved: HashSet<BaseTripletId> = self
            .all_higher_set
            .iter()
            .flat_map(|ht| [ht.ti, ht.tj])
            .collect();
        StatsReport {
            entities: self.entities.len(),
            relations: self.relations.len(),
            base_triplets: self.base.iter().map(Vec::len).sum(),
            higher_relations: self.higher_relations.len(),
            higher_triplets: self.higher.iter().map(Vec::len).sum(),
            involved_base_triplets: involved.len(),
        }
    }

    /// Serializes the split triple sets back to label space, order-insensitive
    /// round-trip check against the input files.
    pub fn base_labels(&self, split: Split) -> Vec<(String, String, String)> {
        self.base_split(split)
            .iter()
            .map(|t| {
                (
                    self.entities.label(t.h.0).to_owned(),
                    self.relations.label(t.r.0).to_owned(),
                    self.entities.label(t.t.0).to_owned(),
                )
            })
            .collect()
    }
}

fn dedup_split<T: Copy + Eq + std::hash::Hash>(
    split: Split,
    kind: &str,
    items: &[T],
    warnings: &mut Vec<String>,
) -> Vec<T> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        if seen.insert(*item) {
            out.push(*item);
        }
    }
    let dropped = items.len() - out.len();
    if dropped > 0 {
        warnings.push(format!(
            "collapsed {dropped} duplicate {kind} triples within the {split} split"
        ));
    }
    out
}

fn check_disjoint<T, F>(splits: &[Vec<T>; 3], describe: F) -> Result<()>
where
    T: Copy + Eq + std::hash::Hash,
    F: Fn(T) -> String,
{
    let mut seen: HashMap<T, Split> = HashMap::new();
    let mut offending = Vec::new();
    for split in Split::ALL {
        for item in &splits[split.index()] {
            if let Some(prev) = seen.insert(*item, split) {
                offending.push(format!("{} (in {prev} and {split})", describe(*item)));
            }
        }
    }
    if offending.is_empty() {
        Ok(())
    } else {
        Err(KgError::SplitOverlap {
            count: offending.len(),
            example: offending[0].clone(),
        })
    }
}

/// Raw loaded splits before validation and indexing.
pub struct GraphBuilder {
    pub entities: Interner,
    pub relations: Interner,
    pub higher_relations: Interner,
    pub base: [Vec<BaseTriplet>; 3],
    pub higher: [Vec<HigherTriplet>; 3],
    pub triplets: Vec<BaseTriplet>,
    pub triplet_ids: HashMap<BaseTriplet, BaseTripletId>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder {
            entities: Interner::default(),
            relations: Interner::default(),
            higher_relations: Interner::default(),
            base: Default::default(),
            higher: Default::default(),
            triplets: Vec::new(),
            triplet_ids: HashMap::new(),
        }
    }

    pub fn add_base_split(&mut self, split: Split, triples: Vec<BaseTriplet>) {
        self.base[split.index()] = triples;
    }

    /// Assigns a `BaseTripletId` to every distinct base triple, in
    /// (train, valid, test) file order. Must run before higher splits resolve.
    pub fn index_base_universe(&mut self) {
        for split in Split::ALL {
            for triple in &self.base[split.index()] {
                let next = BaseTripletId(self.triplets.len() as u32);
                self.triplet_ids.entry(*triple).or_insert_with(|| {
                    self.triplets.push(*triple);
                    next
                });
            }
        }
    }

    pub fn add_higher_split(&mut self, split: Split, triples: Vec<HigherTriplet>) {
        self.higher[split.index()] = triples;
    }

    pub fn build(self) -> Result<BiLevelKG> {
        let mut warnings = Vec::new();
        let mut base: [Vec<BaseTriplet>; 3] = Default::default();
        let mut higher: [Vec<HigherTriplet>; 3] = Default::default();
        for split in Split::ALL {
            base[split.index()] = dedup_split(split, "base", &self.base[split.index()], &mut warnings);
            higher[split.index()] =
                dedup_split(split, "higher", &self.higher[split.index()], &mut warnings);
        }

        let entities = self.entities;
        let relations = self.relations;
        let triplets = self.triplets;
        check_disjoint(&base, |t: BaseTriplet| {
            format!(
                "({}, {}, {})",
                entities.label(t.h.0),
                relations.label(t.r.0),
                entities.label(t.t.0)
            )
        })?;
        check_disjoint(&higher, |t: HigherTriplet| format!("{t:?}"))?;

        let train_base_set: HashSet<BaseTriplet> = base[0].iter().copied().collect();
        let all_base_set: HashSet<BaseTriplet> =
            base.iter().flatten().copied().collect();
        let all_higher_set: HashSet<HigherTriplet> =
            higher.iter().flatten().copied().collect();

        // Higher triples may legally reference base triples from any split;
        // count the cross-split references instead of guessing intent.
        let train_ids: HashSet<BaseTripletId> = base[0]
            .iter()
            .map(|t| self.triplet_ids[t])
            .collect();
        let cross = all_higher_set
            .iter()
            .flat_map(|ht| [ht.ti, ht.tj])
            .filter(|id| !train_ids.contains(id))
            .count();
        if cross > 0 {
            warnings.push(format!(
                "{cross} higher-triple endpoints reference base triples outside the train split"
            ));
        }

        Ok(BiLevelKG {
            entities,
            relations,
            higher_relations: self.higher_relations,
            base,
            higher,
            triplets,
            triplet_ids: self.triplet_ids,
            train_base_set,
            all_base_set,
            all_higher_set,
            warnings,
        })
    }
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// File paths for the six split files of a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub base_train: PathBuf,
    pub base_valid: PathBuf,
    pub base_test: PathBuf,
    pub higher_train: PathBuf,
    pub higher_valid: PathBuf,
    pub higher_test: PathBuf,
}

impl DatasetPaths {
    /// Conventional layout: `train.tsv`, `valid.tsv`, `test.tsv`,
    /// `higher_train.tsv`, `higher_valid.tsv`, `higher_test.tsv` in one
    /// directory.
    pub fn from_dir(dir: &Path) -> Self {
        DatasetPaths {
            base_train: dir.join("train.tsv"),
            base_valid: dir.join("valid.tsv"),
            base_test: dir.join("test.tsv"),
            higher_train: dir.join("higher_train.tsv"),
            higher_valid: dir.join("higher_valid.tsv"),
            higher_test: dir.join("higher_test.tsv"),
        }
    }

    pub fn all(&self) -> [(&'static str, &Path); 6] {
        [
            ("base_train", &self.base_train),
            ("base_valid", &self.base_valid),
            ("base_test", &self.base_test),
            ("higher_train", &self.higher_train),
            ("higher_valid", &self.higher_valid),
            ("higher_test", &self.higher_test),
        ]
    }
}

/// Loads and validates a full bi-level dataset.
pub fn load_dataset(paths: &DatasetPaths) -> Result<BiLevelKG> {
    let mut b = GraphBuilder::new();
    let base_paths = [&paths.base_train, &paths.base_valid, &paths.base_test];
    for (split, path) in Split::ALL.into_iter().zip(base_paths) {
        let triples = load_base_triples(path, &mut b.entities, &mut b.relations)?;
        b.add_base_split(split, triples);
    }
    b.index_base_universe();
    let higher_paths = [&paths.higher_train, &paths.higher_valid, &paths.higher_test];
    for (split, path) in Split::ALL.into_iter().zip(higher_paths) {
        let mut hr = std::mem::take(&mut b.higher_relations);
        let triples =
            load_higher_triples(path, &b.entities, &b.relations, &mut hr, &b.triplet_ids)?;
        b.higher_relations = hr;
        b.add_higher_split(split, triples);
    }
    b.build()
}

/// Read-only reverse-closed overlay of the train split: every relation gains
/// an inverse and every train triple gains its reversed form, at both levels.
/// The overlay exists only for walk sampling and never leaks into the
/// training or evaluation triple sets.
#[derive(Debug)]
pub struct AugView<'a> {
    pub kg: &'a BiLevelKG,
    /// Per entity: outgoing view edges (relation, inverse flag, neighbor).
    base_adj: Vec<Vec<(RelationId, bool, EntityId)>>,
    /// Per entity: train base triples containing the entity.
    membership: Vec<Vec<BaseTripletId>>,
    /// Per base triple id: incident train higher edges
    /// (higher relation, traversed-against-direction flag, other side).
    higher_adj: HashMap<BaseTripletId, Vec<(HigherRelationId, bool, BaseTripletId)>>,
}

impl BiLevelKG {
    pub fn reverse_closure(&self) -> AugView<'_> {
        let n = self.entities.len();
        let mut base_adj = vec![Vec::new(); n];
        let mut membership = vec![Vec::new(); n];
        for triple in self.base_split(Split::Train) {
            base_adj[triple.h.0 as usize].push((triple.r, false, triple.t));
            base_adj[triple.t.0 as usize].push((triple.r, true, triple.h));
            let id = self.triplet_ids[triple];
            membership[triple.h.0 as usize].push(id);
            if triple.t != triple.h {
                membership[triple.t.0 as usize].push(id);
            }
        }
        let mut higher_adj: HashMap<BaseTripletId, Vec<(HigherRelationId, bool, BaseTripletId)>> =
            HashMap::new();
        for ht in self.higher_split(Split::Train) {
            higher_adj.entry(ht.ti).or_default().push((ht.rhat, false, ht.tj));
            higher_adj.entry(ht.tj).or_default().push((ht.rhat, true, ht.ti));
        }
        AugView {
            kg: self,
            base_adj,
            membership,
            higher_adj,
        }
    }
}

impl<'a> AugView<'a> {
    pub fn num_entities(&self) -> usize {
        self.base_adj.len()
    }

    /// Number of directed base edges in the view, 2 * |E_train|.
    pub fn num_base_edges(&self) -> usize {
        self.base_adj.iter().map(Vec::len).sum()
    }

    /// Number of relations in the view (forward + inverse).
    pub fn num_view_relations(&self) -> usize {
        2 * self.kg.relations.len()
    }

    pub fn num_view_higher_relations(&self) -> usize {
        2 * self.kg.higher_relations.len()
    }

    pub fn base_edges(&self, entity: EntityId) -> &[(RelationId, bool, EntityId)] {
        &self.base_adj[entity.0 as usize]
    }

    pub fn member_triplets(&self, entity: EntityId) -> &[BaseTripletId] {
        &self.membership[entity.0 as usize]
    }

    pub fn higher_edges(&self, id: BaseTripletId) -> &[(HigherRelationId, bool, BaseTripletId)] {
        self.higher_adj.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn fixture_paths(dir: &Path) -> DatasetPaths {
        write_file(
            dir,
            "train.tsv",
            "Sweden\tContains\tStockholm\nSweden\tCapitalIsLocatedIn\tStockholm\nStockholm\tContains\tGamla_Stan\n",
        );
        write_file(dir, "valid.tsv", "Sweden\tContains\tGamla_Stan\n");
        write_file(dir, "test.tsv", "Gamla_Stan\tContains\tRoyal_Palace\n");
        write_file(
            dir,
            "higher_train.tsv",
            "Sweden\tCapitalIsLocatedIn\tStockholm\tImpliesLocation\tSweden\tContains\tStockholm\n",
        );
        write_file(dir, "higher_valid.tsv", "");
        write_file(dir, "higher_test.tsv", "");
        DatasetPaths::from_dir(dir)
    }

    #[test]
    fn parses_base_line_and_interns_first_occurrence() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "t.tsv", "Sweden\tContains\tStockholm\n");
        let mut ents = Interner::default();
        let mut rels = Interner::default();
        let triples = load_base_triples(&path, &mut ents, &mut rels).unwrap();
        assert_eq!(triples.len(), 1);
        assert_eq!(triples[0].h, EntityId(0));
        assert_eq!(triples[0].r, RelationId(0));
        assert_eq!(triples[0].t, EntityId(1));
        assert_eq!(ents.label(0), "Sweden");
        assert_eq!(ents.label(1), "Stockholm");
        assert_eq!(rels.label(0), "Contains");
    }

    #[test]
    fn empty_file_yields_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "t.tsv", "");
        let mut ents = Interner::default();
        let mut rels = Interner::default();
        assert!(load_base_triples(&path, &mut ents, &mut rels).unwrap().is_empty());
    }

    #[test]
    fn duplicate_lines_kept_at_load_and_collapsed_at_build() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(
            dir.path(),
            "t.tsv",
            "a\tr\tb\na\tr\tb\nb\tr\tc\n",
        );
        let mut b = GraphBuilder::new();
        let triples = load_base_triples(&path, &mut b.entities, &mut b.relations).unwrap();
        assert_eq!(triples.len(), 3);
        let distinct: HashSet<_> = triples.iter().collect();
        assert_eq!(distinct.len(), 2);
        b.add_base_split(Split::Train, triples);
        b.index_base_universe();
        let kg = b.build().unwrap();
        assert_eq!(kg.base_split(Split::Train).len(), 2);
        assert_eq!(kg.warnings.len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "t.tsv", "a\tr\tb\na\tb\n");
        let mut ents = Interner::default();
        let mut rels = Interner::default();
        let err = load_base_triples(&path, &mut ents, &mut rels).unwrap_err();
        match err {
            KgError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_field_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(dir.path(), "t.tsv", "a\t\tb\n");
        let mut ents = Interner::default();
        let mut rels = Interner::default();
        assert!(load_base_triples(&path, &mut ents, &mut rels).is_err());
    }

    #[test]
    fn higher_triple_resolves_both_sides() {
        let dir = tempfile::tempdir().unwrap();
        let paths = fixture_paths(dir.path());
        let kg = load_dataset(&paths).unwrap();
        assert_eq!(kg.higher_split(Split::Train).len(), 1);
        let ht = kg.higher_split(Split::Train)[0];
        let ti = kg.triplet(ht.ti);
        assert_eq!(kg.relations.label(ti.r.0), "CapitalIsLocatedIn");
        let tj = kg.triplet(ht.tj);
        assert_eq!(kg.relations.label(tj.r.0), "Contains");
    }

    #[test]
    fn unresolvable_higher_reference_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = fixture_paths(dir.path());
        paths.higher_train = write_file(
            dir.path(),
            "bad_higher.tsv",
            "Nowhere\tContains\tStockholm\tImpliesLocation\tSweden\tContains\tStockholm\n",
        );
        match load_dataset(&paths) {
            Err(KgError::UnresolvedBase { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_referential_higher_triple_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = fixture_paths(dir.path());
        paths.higher_train = write_file(
            dir.path(),
            "loop_higher.tsv",
            "Sweden\tContains\tStockholm\tImpliesLocation\tSweden\tContains\tStockholm\n",
        );
        let kg = load_dataset(&paths).unwrap();
        let ht = kg.higher_split(Split::Train)[0];
        assert_eq!(ht.ti, ht.tj);
    }

    #[test]
    fn cross_split_overlap_is_a_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = fixture_paths(dir.path());
        paths.base_valid = write_file(dir.path(), "valid_dup.tsv", "Sweden\tContains\tStockholm\n");
        match load_dataset(&paths) {
            Err(KgError::SplitOverlap { count, .. }) => assert_eq!(count, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stats_counts_match_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let kg = load_dataset(&fixture_paths(dir.path())).unwrap();
        let s = kg.stats();
        assert_eq!(s.entities, 4);
        assert_eq!(s.relations, 2);
        assert_eq!(s.base_triplets, 5);
        assert_eq!(s.higher_relations, 1);
        assert_eq!(s.higher_triplets, 1);
        assert_eq!(s.involved_base_triplets, 2);
    }

    #[test]
    fn stats_empty_graph_is_all_zeros() {
        let kg = GraphBuilder::new().build().unwrap();
        let s = kg.stats();
        assert_eq!(
            s,
            StatsReport {
                entities: 0,
                relations: 0,
                base_triplets: 0,
                higher_relations: 0,
                higher_triplets: 0,
                involved_base_triplets: 0
            }
        );
    }

    #[test]
    fn stats_json_has_exactly_the_six_keys() {
        let kg = GraphBuilder::new().build().unwrap();
        let json = serde_json::to_string(&kg.stats()).unwrap();
        assert_eq!(json, r#"{"V":0,"R":0,"E":0,"R_hat":0,"H":0,"E_hat":0}"#);
    }

    #[test]
    fn reverse_closure_doubles_train_edges_and_leaves_kg_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let kg = load_dataset(&fixture_paths(dir.path())).unwrap();
        let view = kg.reverse_closure();
        assert_eq!(view.num_base_edges(), 2 * kg.base_split(Split::Train).len());
        assert_eq!(view.num_view_relations(), 2 * kg.relations.len());
        assert_eq!(view.num_view_higher_relations(), 2 * kg.higher_relations.len());
        // reversed edge reachable
        let t = kg.base_split(Split::Train)[0];
        assert!(view
            .base_edges(t.t)
            .iter()
            .any(|&(r, inv, next)| r == t.r && inv && next == t.h));
        // original split untouched
        assert_eq!(kg.base_split(Split::Train).len(), 3);
    }

    #[test]
    fn reverse_closure_of_empty_graph_is_empty() {
        let kg = GraphBuilder::new().build().unwrap();
        let view = kg.reverse_closure();
        assert_eq!(view.num_base_edges(), 0);
    }

    #[test]
    fn label_roundtrip_is_order_insensitive_set_equal() {
        let dir = tempfile::tempdir().unwrap();
        let paths = fixture_paths(dir.path());
        let kg = load_dataset(&paths).unwrap();
        let roundtrip: HashSet<_> = kg.base_labels(Split::Train).into_iter().collect();
        let expected: HashSet<_> = [
            ("Sweden", "Contains", "Stockholm"),
            ("Sweden", "CapitalIsLocatedIn", "Stockholm"),
            ("Stockholm", "Contains", "Gamla_Stan"),
        ]
        .into_iter()
        .map(|(a, b, c)| (a.to_owned(), b.to_owned(), c.to_owned()))
        .collect();
        assert_eq!(roundtrip, expected);
    }
}
