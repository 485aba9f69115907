//! Finite relational structures over a finite vocabulary, homomorphisms
//! between them, and the finite (co)limit constructions the rest of the
//! crate is built on.
//!
//! Element ids are opaque strings; their lexicographic order is the fixed
//! total order used for every deterministic tie-break (quotient
//! representatives, search ordering). All values are immutable: operations
//! return new structures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Reserved relation symbol for the equality expansion.
pub const IDENTITY_REL: &str = "I";

pub type Elem = String;
pub type Tuple = Vec<Elem>;

/// A finite relational vocabulary: relation names with positive arities.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vocabulary {
    arities: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut arities = BTreeMap::new();
        for (name, arity) in pairs {
            let name = name.into();
            if name.is_empty() {
                return Err(Error::Malformed("empty relation name".into()));
            }
            if arity == 0 {
                return Err(Error::Malformed(format!("relation {name} has arity 0")));
            }
            if arities.insert(name.clone(), arity).is_some() {
                return Err(Error::Malformed(format!("duplicate relation {name}")));
            }
        }
        Ok(Vocabulary { arities })
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.arities.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.arities.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arities.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.arities.iter().map(|(n, a)| (n.as_str(), *a))
    }

    pub fn len(&self) -> usize {
        self.arities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arities.is_empty()
    }

    /// A modal vocabulary has only unary (proposition) and binary
    /// (transition) relation symbols.
    pub fn is_modal(&self) -> bool {
        self.arities.values().all(|&a| a == 1 || a == 2)
    }

    /// Extends the vocabulary with the reserved binary symbol `I`.
    pub fn with_identity(&self) -> Result<Vocabulary> {
        if self.contains(IDENTITY_REL) {
            return Err(Error::Malformed(format!(
                "vocabulary already contains the reserved symbol {IDENTITY_REL}"
            )));
        }
        let mut arities = self.arities.clone();
        arities.insert(IDENTITY_REL.to_string(), 2);
        Ok(Vocabulary { arities })
    }

    /// Removes the reserved symbol `I`, recovering the base vocabulary.
    pub fn without_identity(&self) -> Result<Vocabulary> {
        if self.arity(IDENTITY_REL) != Some(2) {
            return Err(Error::Malformed(format!(
                "vocabulary does not contain binary {IDENTITY_REL}"
            )));
        }
        let mut arities = self.arities.clone();
        arities.remove(IDENTITY_REL);
        Ok(Vocabulary { arities })
    }
}

/// A finite structure: universe plus an interpretation for every relation
/// symbol of its vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Structure {
    vocab: Vocabulary,
    universe: BTreeSet<Elem>,
    interp: BTreeMap<String, BTreeSet<Tuple>>,
}

impl Structure {
    pub fn new<U, T>(vocab: Vocabulary, universe: U, relations: T) -> Result<Self>
    where
        U: IntoIterator<Item = Elem>,
        T: IntoIterator<Item = (String, Vec<Tuple>)>,
    {
        let universe: BTreeSet<Elem> = universe.into_iter().collect();
        if universe.iter().any(|e| e.is_empty()) {
            return Err(Error::Malformed("empty element id".into()));
        }
        let mut interp: BTreeMap<String, BTreeSet<Tuple>> =
            vocab.names().map(|n| (n.to_string(), BTreeSet::new())).collect();
        for (name, tuples) in relations {
            let arity = vocab
                .arity(&name)
                .ok_or_else(|| Error::Malformed(format!("unknown relation {name}")))?;
            let set = interp.get_mut(&name).expect("interp seeded from vocabulary");
            for t in tuples {
                if t.len() != arity {
                    return Err(Error::Malformed(format!(
                        "relation {name} expects arity {arity}, got tuple of length {}",
                        t.len()
                    )));
                }
                if let Some(e) = t.iter().find(|e| !universe.contains(*e)) {
                    return Err(Error::Malformed(format!(
                        "tuple component {e} of {name} is not in the universe"
                    )));
                }
                set.insert(t);
            }
        }
        Ok(Structure { vocab, universe, interp })
    }

    pub fn empty(vocab: Vocabulary) -> Self {
        let interp = vocab.names().map(|n| (n.to_string(), BTreeSet::new())).collect();
        Structure { vocab, universe: BTreeSet::new(), interp }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn universe(&self) -> impl Iterator<Item = &Elem> {
        self.universe.iter()
    }

    pub fn contains(&self, e: &str) -> bool {
        self.universe.contains(e)
    }

    pub fn size(&self) -> usize {
        self.universe.len()
    }

    pub fn is_empty(&self) -> bool {
        self.universe.is_empty()
    }

    pub fn tuples(&self, rel: &str) -> impl Iterator<Item = &Tuple> {
        self.interp.get(rel).into_iter().flatten()
    }

    pub fn has_tuple(&self, rel: &str, tuple: &[Elem]) -> bool {
        self.interp.get(rel).is_some_and(|s| s.contains(tuple))
    }

    /// Total number of tuples across all relations.
    pub fn tuple_count(&self) -> usize {
        self.interp.values().map(BTreeSet::len).sum()
    }

    /// The reduct to a sub-vocabulary: drops the interpretations of the
    /// symbols that were removed.
    pub fn reduct(&self, vocab: &Vocabulary) -> Result<Structure> {
        for (name, arity) in vocab.iter() {
            if self.vocab.arity(name) != Some(arity) {
                return Err(Error::VocabularyMismatch(format!(
                    "{name} is not a symbol of the original vocabulary with equal arity"
                )));
            }
        }
        let interp = vocab
            .names()
            .map(|n| (n.to_string(), self.interp[n].clone()))
            .collect();
        Ok(Structure { vocab: vocab.clone(), universe: self.universe.clone(), interp })
    }

    /// The induced substructure on a subset of the universe.
    pub fn induced(&self, subset: &BTreeSet<Elem>) -> Result<Structure> {
        if let Some(e) = subset.iter().find(|e| !self.universe.contains(*e)) {
            return Err(Error::Malformed(format!("{e} is not in the universe")));
        }
        let interp = self
            .interp
            .iter()
            .map(|(name, tuples)| {
                let kept = tuples
                    .iter()
                    .filter(|t| t.iter().all(|e| subset.contains(e)))
                    .cloned()
                    .collect();
                (name.clone(), kept)
            })
            .collect();
        Ok(Structure { vocab: self.vocab.clone(), universe: subset.clone(), interp })
    }

    /// Renames every element through an injective map defined on the whole
    /// universe.
    pub fn rename(&self, map: &BTreeMap<Elem, Elem>) -> Result<Structure> {
        let universe: BTreeSet<Elem> = self
            .universe
            .iter()
            .map(|e| {
                map.get(e)
                    .cloned()
                    .ok_or_else(|| Error::Malformed(format!("rename map misses {e}")))
            })
            .collect::<Result<_>>()?;
        if universe.len() != self.universe.len() {
            return Err(Error::Malformed("rename map is not injective".into()));
        }
        let interp = self
            .interp
            .iter()
            .map(|(name, tuples)| {
                let renamed = tuples
                    .iter()
                    .map(|t| t.iter().map(|e| map[e].clone()).collect())
                    .collect();
                (name.clone(), renamed)
            })
            .collect();
        Ok(Structure { vocab: self.vocab.clone(), universe, interp })
    }
}

/// A structure with a distinguished element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointedStructure {
    pub structure: Structure,
    pub point: Elem,
}

impl PointedStructure {
    pub fn new(structure: Structure, point: Elem) -> Result<Self> {
        if !structure.contains(&point) {
            return Err(Error::Malformed(format!("point {point} is not in the universe")));
        }
        Ok(PointedStructure { structure, point })
    }
}

/// A structure as read from input: the point is optional. Operations on
/// pointed structures require it; the rest ignore it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputStructure {
    pub structure: Structure,
    pub point: Option<Elem>,
}

impl InputStructure {
    pub fn plain(structure: Structure) -> Self {
        InputStructure { structure, point: None }
    }

    pub fn pointed(&self) -> Result<PointedStructure> {
        let point = self
            .point
            .clone()
            .ok_or_else(|| Error::Malformed("a distinguished element is required".into()))?;
        PointedStructure::new(self.structure.clone(), point)
    }
}

impl From<PointedStructure> for InputStructure {
    fn from(p: PointedStructure) -> Self {
        InputStructure { structure: p.structure, point: Some(p.point) }
    }
}

/// A total map between the universes of two structures over the same
/// vocabulary. Whether it actually preserves the relations is checked by
/// [`Homomorphism::is_homomorphism`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Homomorphism {
    pub source: Structure,
    pub target: Structure,
    pub map: BTreeMap<Elem, Elem>,
}

impl Homomorphism {
    pub fn new(source: Structure, target: Structure, map: BTreeMap<Elem, Elem>) -> Result<Self> {
        if source.vocabulary() != target.vocabulary() {
            return Err(Error::VocabularyMismatch(
                "homomorphism endpoints have different vocabularies".into(),
            ));
        }
        for e in source.universe() {
            match map.get(e) {
                None => return Err(Error::Malformed(format!("map is not defined on {e}"))),
                Some(v) if !target.contains(v) => {
                    return Err(Error::Malformed(format!("image {v} is not in the target")))
                }
                _ => {}
            }
        }
        if map.len() != source.size() {
            return Err(Error::Malformed("map is defined outside the source universe".into()));
        }
        Ok(Homomorphism { source, target, map })
    }

    pub fn identity(s: &Structure) -> Self {
        let map = s.universe().map(|e| (e.clone(), e.clone())).collect();
        Homomorphism { source: s.clone(), target: s.clone(), map }
    }

    pub fn apply(&self, e: &str) -> &Elem {
        &self.map[e]
    }

    fn apply_tuple(&self, t: &[Elem]) -> Tuple {
        t.iter().map(|e| self.map[e].clone()).collect()
    }

    /// Composition `other . self` (apply `self` first).
    pub fn then(&self, other: &Homomorphism) -> Result<Homomorphism> {
        if self.target != other.source {
            return Err(Error::Malformed("composition endpoints do not agree".into()));
        }
        let map = self
            .map
            .iter()
            .map(|(k, v)| (k.clone(), other.map[v].clone()))
            .collect();
        Homomorphism::new(self.source.clone(), other.target.clone(), map)
    }

    /// True iff every source tuple is mapped to a target tuple.
    pub fn is_homomorphism(&self) -> bool {
        self.source.vocab.names().all(|rel| {
            self.source
                .tuples(rel)
                .all(|t| self.target.has_tuple(rel, &self.apply_tuple(t)))
        })
    }

    pub fn is_injective(&self) -> bool {
        let image: BTreeSet<&Elem> = self.map.values().collect();
        image.len() == self.map.len()
    }

    pub fn is_surjective(&self) -> bool {
        let image: BTreeSet<&Elem> = self.map.values().collect();
        image.len() == self.target.size()
    }

    /// An embedding is an injective homomorphism that also reflects every
    /// relation: a target tuple inside the image must come from a source
    /// tuple.
    pub fn is_embedding(&self) -> bool {
        if !self.is_homomorphism() || !self.is_injective() {
            return false;
        }
        let inverse: BTreeMap<&Elem, &Elem> = self.map.iter().map(|(k, v)| (v, k)).collect();
        self.source.vocab.names().all(|rel| {
            self.target
                .tuples(rel)
                .filter(|t| t.iter().all(|e| inverse.contains_key(e)))
                .all(|t| {
                    let pre: Tuple = t.iter().map(|e| (*inverse[e]).clone()).collect();
                    self.source.has_tuple(rel, &pre)
                })
        })
    }

    pub fn is_isomorphism(&self) -> bool {
        self.is_embedding() && self.is_surjective()
    }
}

/// Backtracking homomorphism search with forward checking over the relation
/// tuples. Variables are the source elements in lexicographic order, values
/// are tried in lexicographic order, so the result is deterministic for a
/// fixed input. `constraints` pre-assigns part of the map.
pub fn find_homomorphism(
    source: &Structure,
    target: &Structure,
    constraints: &BTreeMap<Elem, Elem>,
) -> Result<Option<Homomorphism>> {
    if source.vocabulary() != target.vocabulary() {
        return Err(Error::VocabularyMismatch(
            "homomorphism endpoints have different vocabularies".into(),
        ));
    }
    for (k, v) in constraints {
        if !source.contains(k) {
            return Err(Error::Malformed(format!("constraint key {k} is not in the source")));
        }
        if !target.contains(v) {
            return Err(Error::Malformed(format!("constraint value {v} is not in the target")));
        }
    }
    Ok(search_hom(source, target, constraints, false))
}

/// Backtracking isomorphism search: an injective, surjective, relation
/// reflecting homomorphism. Deterministic like [`find_homomorphism`].
pub fn find_isomorphism(source: &Structure, target: &Structure) -> Result<Option<Homomorphism>> {
    if source.vocabulary() != target.vocabulary() {
        return Err(Error::VocabularyMismatch(
            "isomorphism endpoints have different vocabularies".into(),
        ));
    }
    if source.size() != target.size() || source.vocab.names().any(|r| {
        source.interp[r].len() != target.interp[r].len()
    }) {
        return Ok(None);
    }
    Ok(search_hom(source, target, &BTreeMap::new(), true))
}

fn search_hom(
    source: &Structure,
    target: &Structure,
    constraints: &BTreeMap<Elem, Elem>,
    iso: bool,
) -> Option<Homomorphism> {
    let vars: Vec<&Elem> = source.universe().collect();
    let values: Vec<&Elem> = target.universe().collect();
    if vars.is_empty() {
        let h = Homomorphism {
            source: source.clone(),
            target: target.clone(),
            map: BTreeMap::new(),
        };
        return (!iso || target.is_empty()).then_some(h);
    }
    if values.is_empty() {
        return None;
    }
    let var_index: BTreeMap<&Elem, usize> =
        vars.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    // Flatten the source tuples into (relation, positions-as-variable-ids).
    let mut tuples: Vec<(&str, Vec<usize>)> = Vec::new();
    for rel in source.vocab.names() {
        for t in source.tuples(rel) {
            tuples.push((rel, t.iter().map(|e| var_index[e]).collect()));
        }
    }
    let mut tuples_by_var: Vec<Vec<usize>> = vec![Vec::new(); vars.len()];
    for (ti, (_, positions)) in tuples.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for &p in positions {
            if seen.insert(p) {
                tuples_by_var[p].push(ti);
            }
        }
    }

    let mut domains: Vec<Vec<bool>> = vec![vec![true; values.len()]; vars.len()];
    for (k, v) in constraints {
        let vi = var_index[k];
        let wi = values.binary_search(&v).expect("validated above");
        for (j, slot) in domains[vi].iter_mut().enumerate() {
            *slot = j == wi;
        }
    }

    let mut assignment: Vec<Option<usize>> = vec![None; vars.len()];
    let ok = assign(
        0,
        &mut assignment,
        &mut domains,
        &SearchCtx { source, target, vars: &vars, values: &values, tuples: &tuples, tuples_by_var: &tuples_by_var, iso },
    );
    if !ok {
        return None;
    }
    let map = assignment
        .iter()
        .enumerate()
        .map(|(i, w)| (vars[i].clone(), values[w.expect("complete assignment")].clone()))
        .collect();
    let h = Homomorphism { source: source.clone(), target: target.clone(), map };
    debug_assert!(h.is_homomorphism());
    Some(h)
}

struct SearchCtx<'a> {
    source: &'a Structure,
    target: &'a Structure,
    vars: &'a [&'a Elem],
    values: &'a [&'a Elem],
    tuples: &'a [(&'a str, Vec<usize>)],
    tuples_by_var: &'a [Vec<usize>],
    iso: bool,
}

fn assign(
    pos: usize,
    assignment: &mut Vec<Option<usize>>,
    domains: &mut Vec<Vec<bool>>,
    ctx: &SearchCtx,
) -> bool {
    if pos == ctx.vars.len() {
        if ctx.iso {
            let map: BTreeMap<Elem, Elem> = assignment
                .iter()
                .enumerate()
                .map(|(i, w)| (ctx.vars[i].clone(), ctx.values[w.unwrap()].clone()))
                .collect();
            let h = Homomorphism {
                source: ctx.source.clone(),
                target: ctx.target.clone(),
                map,
            };
            return h.is_isomorphism();
        }
        return true;
    }
    for w in 0..ctx.values.len() {
        if !domains[pos][w] {
            continue;
        }
        if ctx.iso && assignment[..pos].iter().any(|a| *a == Some(w)) {
            continue;
        }
        assignment[pos] = Some(w);
        let saved = domains.clone();
        if propagate(pos, assignment, domains, ctx) && assign(pos + 1, assignment, domains, ctx) {
            return true;
        }
        *domains = saved;
        assignment[pos] = None;
    }
    false
}

/// Re-checks the tuples touching the just-assigned variable: fully assigned
/// tuples must map into the target relation, tuples with a single open
/// variable prune that variable's domain.
fn propagate(
    just: usize,
    assignment: &[Option<usize>],
    domains: &mut [Vec<bool>],
    ctx: &SearchCtx,
) -> bool {
    for &ti in &ctx.tuples_by_var[just] {
        let (rel, positions) = &ctx.tuples[ti];
        let open: BTreeSet<usize> =
            positions.iter().copied().filter(|&p| assignment[p].is_none()).collect();
        match open.len() {
            0 => {
                let image: Tuple = positions
                    .iter()
                    .map(|&p| ctx.values[assignment[p].unwrap()].clone())
                    .collect();
                if !ctx.target.has_tuple(rel, &image) {
                    return false;
                }
            }
            1 => {
                let u = *open.iter().next().unwrap();
                let mut any = false;
                for w in 0..ctx.values.len() {
                    if !domains[u][w] {
                        continue;
                    }
                    let image: Tuple = positions
                        .iter()
                        .map(|&p| {
                            if p == u {
                                ctx.values[w].clone()
                            } else {
                                ctx.values[assignment[p].unwrap()].clone()
                            }
                        })
                        .collect();
                    if ctx.target.has_tuple(rel, &image) {
                        any = true;
                    } else {
                        domains[u][w] = false;
                    }
                }
                if !any {
                    return false;
                }
            }
            _ => {}
        }
    }
    true
}

/// Factorizes `f` as a surjection onto the induced substructure on the image
/// followed by the inclusion embedding.
pub fn factorize(f: &Homomorphism) -> Result<(Homomorphism, Homomorphism)> {
    if !f.is_homomorphism() {
        return Err(Error::Malformed("factorize requires a homomorphism".into()));
    }
    let image: BTreeSet<Elem> = f.map.values().cloned().collect();
    let middle = f.target.induced(&image)?;
    let surj = Homomorphism::new(f.source.clone(), middle.clone(), f.map.clone())?;
    let incl = Homomorphism::identity(&middle);
    let emb = Homomorphism::new(middle, f.target.clone(), incl.map)?;
    Ok((surj, emb))
}

fn pair_name(x: &str, y: &str) -> Elem {
    format!("({x},{y})")
}

/// The categorical product: universe of pairs with componentwise relations,
/// together with the two projections.
pub fn product(a: &Structure, b: &Structure) -> Result<(Structure, Homomorphism, Homomorphism)> {
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::VocabularyMismatch("product factors differ".into()));
    }
    let mut universe = Vec::new();
    let mut proj_a = BTreeMap::new();
    let mut proj_b = BTreeMap::new();
    for x in a.universe() {
        for y in b.universe() {
            let name = pair_name(x, y);
            proj_a.insert(name.clone(), x.clone());
            proj_b.insert(name.clone(), y.clone());
            universe.push(name);
        }
    }
    let mut relations: Vec<(String, Vec<Tuple>)> = Vec::new();
    for rel in a.vocabulary().names() {
        let mut tuples = Vec::new();
        for s in a.tuples(rel) {
            for t in b.tuples(rel) {
                let joined: Tuple =
                    s.iter().zip(t.iter()).map(|(x, y)| pair_name(x, y)).collect();
                tuples.push(joined);
            }
        }
        relations.push((rel.to_string(), tuples));
    }
    let p = Structure::new(a.vocabulary().clone(), universe, relations)?;
    let pa = Homomorphism::new(p.clone(), a.clone(), proj_a)?;
    let pb = Homomorphism::new(p.clone(), b.clone(), proj_b)?;
    Ok((p, pa, pb))
}

fn tagged(tag: usize, e: &str) -> Elem {
    format!("{tag}.{e}")
}

/// Disjoint union with the two injections. Component elements are tagged
/// `0.` and `1.` to keep the union disjoint.
pub fn coproduct(a: &Structure, b: &Structure) -> Result<(Structure, Homomorphism, Homomorphism)> {
    let (c, mut injections) = coproduct_many(&[a, b])?;
    let inj_b = injections.pop().expect("two injections");
    let inj_a = injections.pop().expect("two injections");
    Ok((c, inj_a, inj_b))
}

fn coproduct_many(parts: &[&Structure]) -> Result<(Structure, Vec<Homomorphism>)> {
    let vocab = match parts {
        [] => return Err(Error::Malformed("coproduct of zero structures".into())),
        [first, rest @ ..] => {
            if let Some(other) = rest.iter().find(|p| p.vocabulary() != first.vocabulary()) {
                let _ = other;
                return Err(Error::VocabularyMismatch("coproduct components differ".into()));
            }
            first.vocabulary().clone()
        }
    };
    let mut universe = Vec::new();
    let mut relations: BTreeMap<String, Vec<Tuple>> =
        vocab.names().map(|n| (n.to_string(), Vec::new())).collect();
    for (i, part) in parts.iter().enumerate() {
        universe.extend(part.universe().map(|e| tagged(i, e)));
        for rel in vocab.names() {
            relations.get_mut(rel).unwrap().extend(
                part.tuples(rel)
                    .map(|t| t.iter().map(|e| tagged(i, e)).collect::<Tuple>()),
            );
        }
    }
    let c = Structure::new(vocab, universe, relations.into_iter().map(|(k, v)| (k, v)))?;
    let injections = parts
        .iter()
        .enumerate()
        .map(|(i, part)| {
            let map = part.universe().map(|e| (e.clone(), tagged(i, e))).collect();
            Homomorphism::new((*part).clone(), c.clone(), map)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((c, injections))
}

/// Quotients a structure by the equivalence generated by `pairs`. Each class
/// is named by its minimum member; relations are the images of the original
/// tuples. Returns the quotient together with the projection homomorphism.
pub fn quotient(s: &Structure, pairs: &[(Elem, Elem)]) -> Result<(Structure, Homomorphism)> {
    for (x, y) in pairs {
        if !s.contains(x) || !s.contains(y) {
            return Err(Error::Malformed("quotient pair outside the universe".into()));
        }
    }
    // Union-find keyed by element, with the minimum member as representative.
    let mut parent: BTreeMap<Elem, Elem> =
        s.universe().map(|e| (e.clone(), e.clone())).collect();
    fn find(parent: &mut BTreeMap<Elem, Elem>, e: &Elem) -> Elem {
        let p = parent[e].clone();
        if p == *e {
            return p;
        }
        let root = find(parent, &p);
        parent.insert(e.clone(), root.clone());
        root
    }
    for (x, y) in pairs {
        let rx = find(&mut parent, x);
        let ry = find(&mut parent, y);
        if rx != ry {
            let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
            parent.insert(hi, lo);
        }
    }
    let class: BTreeMap<Elem, Elem> = s
        .universe()
        .map(|e| {
            let r = find(&mut parent, e);
            (e.clone(), r)
        })
        .collect();
    let universe: BTreeSet<Elem> = class.values().cloned().collect();
    let relations: Vec<(String, Vec<Tuple>)> = s
        .vocabulary()
        .names()
        .map(|rel| {
            let tuples = s
                .tuples(rel)
                .map(|t| t.iter().map(|e| class[e].clone()).collect())
                .collect();
            (rel.to_string(), tuples)
        })
        .collect();
    let q = Structure::new(s.vocabulary().clone(), universe, relations)?;
    let proj = Homomorphism::new(s.clone(), q.clone(), class)?;
    Ok((q, proj))
}

/// Pushout of a span of embeddings `f: c -> a`, `g: c -> b`: the quotient of
/// the coproduct `a + b` identifying `f(x)` with `g(x)`. Returns the apex
/// with the two inclusion legs, which are again embeddings.
pub fn pushout(
    f: &Homomorphism,
    g: &Homomorphism,
) -> Result<(Structure, Homomorphism, Homomorphism)> {
    if f.source != g.source {
        return Err(Error::Malformed("pushout legs must share their source".into()));
    }
    if !f.is_embedding() || !g.is_embedding() {
        return Err(Error::Malformed("pushout requires embeddings".into()));
    }
    let (c, inj_a, inj_b) = coproduct(&f.target, &g.target)?;
    let pairs: Vec<(Elem, Elem)> = f
        .source
        .universe()
        .map(|x| (inj_a.map[&f.map[x]].clone(), inj_b.map[&g.map[x]].clone()))
        .collect();
    let (p, proj) = quotient(&c, &pairs)?;
    let leg_a = inj_a.then(&proj)?;
    let leg_b = inj_b.then(&proj)?;
    debug_assert!(leg_a.is_embedding() && leg_b.is_embedding());
    Ok((p, leg_a, leg_b))
}

/// Wide pushout of a family of embeddings with common source `a`: the
/// quotient of the coproduct of the codomains identifying all images of each
/// element of `a`. With no legs this is `a` itself. Returns the apex, the
/// inclusion of each codomain, and the common leg from `a`.
pub fn wide_pushout(
    a: &Structure,
    legs: &[Homomorphism],
) -> Result<(Structure, Vec<Homomorphism>, Homomorphism)> {
    for leg in legs {
        if leg.source != *a {
            return Err(Error::Malformed("wide pushout legs must share source".into()));
        }
        if !leg.is_embedding() {
            return Err(Error::Malformed("wide pushout requires embeddings".into()));
        }
    }
    if legs.is_empty() {
        let id = Homomorphism::identity(a);
        return Ok((a.clone(), Vec::new(), id));
    }
    let parts: Vec<&Structure> = legs.iter().map(|l| &l.target).collect();
    let (c, injections) = coproduct_many(&parts)?;
    let mut pairs = Vec::new();
    for x in a.universe() {
        let first = injections[0].map[&legs[0].map[x]].clone();
        for (leg, inj) in legs.iter().zip(&injections).skip(1) {
            pairs.push((first.clone(), inj.map[&leg.map[x]].clone()));
        }
    }
    let (p, proj) = quotient(&c, &pairs)?;
    let mut result_injections = Vec::with_capacity(legs.len());
    for inj in &injections {
        result_injections.push(inj.then(&proj)?);
    }
    let from_a = legs[0].then(&result_injections[0])?;
    debug_assert!(from_a.is_embedding());
    Ok((p, result_injections, from_a))
}

/// Expands a structure with the reserved binary symbol `I` interpreted as the
/// identity relation on the universe.
pub fn expand_identity(a: &Structure) -> Result<Structure> {
    let vocab = a.vocabulary().with_identity()?;
    let mut relations: Vec<(String, Vec<Tuple>)> = a
        .vocabulary()
        .names()
        .map(|rel| (rel.to_string(), a.tuples(rel).cloned().collect()))
        .collect();
    relations.push((
        IDENTITY_REL.to_string(),
        a.universe().map(|e| vec![e.clone(), e.clone()]).collect(),
    ));
    Structure::new(vocab, a.universe().cloned(), relations)
}

/// Collapses a structure interpreting `I`: quotients the reduct (without
/// `I`) by the equivalence generated by the interpretation of `I`. Returns
/// the quotient and the projection from the reduct.
pub fn collapse_identity(a: &Structure) -> Result<(Structure, Homomorphism)> {
    let vocab = a.vocabulary().without_identity()?;
    let reduct = a.reduct(&vocab)?;
    let pairs: Vec<(Elem, Elem)> = a
        .tuples(IDENTITY_REL)
        .map(|t| (t[0].clone(), t[1].clone()))
        .collect();
    quotient(&reduct, &pairs)
}

/// A canonical form for small structures: the minimum, over all orderings of
/// the universe, of the positional rendering. Two structures get equal codes
/// iff they are isomorphic. Exponential in the universe size, so guarded.
pub fn structure_canonical_code(s: &Structure) -> Result<String> {
    const MAX: usize = 8;
    if s.size() > MAX {
        return Err(Error::SizeCap(format!(
            "canonical code by enumeration is limited to {MAX} elements, got {}",
            s.size()
        )));
    }
    let elems: Vec<&Elem> = s.universe().collect();
    let n = elems.len();
    let mut best: Option<String> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |perm| {
        // perm[i] is the positional name given to elems[i].
        let position: BTreeMap<&Elem, usize> =
            elems.iter().enumerate().map(|(i, e)| (*e, perm[i])).collect();
        let mut out = String::new();
        let _ = write!(out, "n{n}");
        for rel in s.vocabulary().names() {
            let mut tuples: Vec<Vec<usize>> = s
                .tuples(rel)
                .map(|t| t.iter().map(|e| position[e]).collect())
                .collect();
            tuples.sort();
            let _ = write!(out, "|{rel}:{tuples:?}");
        }
        if best.as_ref().is_none_or(|b| out < *b) {
            best = Some(out);
        }
    });
    Ok(best.unwrap_or_else(|| "n0".to_string()))
}

fn permute(perm: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == perm.len() {
        visit(perm);
        return;
    }
    for i in k..perm.len() {
        perm.swap(k, i);
        permute(perm, k + 1, visit);
        perm.swap(k, i);
    }
    if perm.is_empty() {
        visit(perm);
    }
}
