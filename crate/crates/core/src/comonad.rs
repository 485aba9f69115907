//! The two game comonads: sequences-with-prefix-order over a structure
//! (round-indexed back-and-forth games) and labeled-paths-from-a-point over
//! a pointed structure (modal unravelling), together with their counit and
//! comultiplication, functorial action, the induced resource-graded
//! structures, and the transpose operations of the underlying adjunction.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Limits, Result};
use crate::forest::{is_forest_morphism, ForestStructure};
use crate::structure::{
    collapse_identity, expand_identity, Elem, Homomorphism, PointedStructure, Structure, Tuple,
    IDENTITY_REL,
};

/// Composite element names are bracketed comma-joined lists, so the parts
/// must contain balanced brackets and no top-level comma for the naming to
/// stay injective.
fn delimiter_safe(name: &str) -> bool {
    let mut depth: i32 = 0;
    for c in name.chars() {
        match c {
            '[' | '<' => depth += 1,
            ']' | '>' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            ',' if depth == 0 => return false,
            _ => {}
        }
    }
    depth == 0
}

fn check_names_sequencable(s: &Structure) -> Result<()> {
    for e in s.universe() {
        if !delimiter_safe(e) {
            return Err(Error::Unsupported(format!(
                "element id {e} contains a top-level comma or unbalanced brackets and cannot be used in composite names"
            )));
        }
    }
    for r in s.vocabulary().names() {
        if !delimiter_safe(r) {
            return Err(Error::Unsupported(format!(
                "relation name {r} contains a top-level comma or unbalanced brackets"
            )));
        }
    }
    Ok(())
}

/// The name of a sequence: `[a,b,c]`.
pub fn seq_name(seq: &[Elem]) -> Elem {
    format!("[{}]", seq.join(","))
}

/// The carrier of the sequence comonad at resource index `k`: all non-empty
/// sequences over the base of length at most `k`, ordered by prefix, with
/// every relation lifted to pairwise-comparable tuples whose last elements
/// are related in the base.
#[derive(Clone, Debug)]
pub struct EfCoalgebra {
    pub base: Structure,
    pub k: usize,
    pub carrier: ForestStructure,
    seq_of: BTreeMap<Elem, Vec<Elem>>,
}

impl EfCoalgebra {
    pub fn sequence(&self, name: &str) -> &[Elem] {
        &self.seq_of[name]
    }

    pub fn sequences(&self) -> impl Iterator<Item = (&Elem, &Vec<Elem>)> {
        self.seq_of.iter()
    }
}

/// Builds the forest structure on an explicit prefix-closed set of non-empty
/// sequences over `base`, with the relation lifting of the sequence comonad.
/// This is the full carrier when given all sequences of length `<= k`, and a
/// carrier fragment otherwise.
pub fn sequence_forest(
    base: &Structure,
    seqs: &BTreeSet<Vec<Elem>>,
) -> Result<(ForestStructure, BTreeMap<Elem, Vec<Elem>>)> {
    check_names_sequencable(base)?;
    for s in seqs {
        if s.is_empty() {
            return Err(Error::Malformed("sequences must be non-empty".into()));
        }
        if let Some(e) = s.iter().find(|e| !base.contains(e)) {
            return Err(Error::Malformed(format!("sequence component {e} is not in the base")));
        }
        if s.len() > 1 && !seqs.contains(&s[..s.len() - 1]) {
            return Err(Error::Malformed("sequence set is not prefix-closed".into()));
        }
    }
    let seq_of: BTreeMap<Elem, Vec<Elem>> =
        seqs.iter().map(|s| (seq_name(s), s.clone())).collect();
    let universe: Vec<Elem> = seq_of.keys().cloned().collect();
    let mut relations: Vec<(String, Vec<Tuple>)> = Vec::new();
    for (rel, arity) in base.vocabulary().iter() {
        let mut tuples = Vec::new();
        for s in seqs {
            // Tuples whose deepest component is exactly `s`: all components
            // are prefixes of `s` and at least one equals `s`.
            let prefixes: Vec<&[Elem]> = (1..=s.len()).map(|i| &s[..i]).collect();
            let mut pick = vec![0usize; arity];
            loop {
                if pick.iter().any(|&i| i == prefixes.len() - 1) {
                    let lasts: Tuple = pick
                        .iter()
                        .map(|&i| prefixes[i].last().expect("non-empty").clone())
                        .collect();
                    if base.has_tuple(rel, &lasts) {
                        tuples.push(pick.iter().map(|&i| seq_name(prefixes[i])).collect());
                    }
                }
                // Advance the odometer.
                let mut j = arity;
                loop {
                    if j == 0 {
                        break;
                    }
                    j -= 1;
                    pick[j] += 1;
                    if pick[j] < prefixes.len() {
                        break;
                    }
                    pick[j] = 0;
                }
                if pick.iter().all(|&i| i == 0) {
                    break;
                }
            }
        }
        relations.push((rel.to_string(), tuples));
    }
    let carrier_base = Structure::new(base.vocabulary().clone(), universe, relations)?;
    let parent: BTreeMap<Elem, Elem> = seqs
        .iter()
        .filter(|s| s.len() > 1)
        .map(|s| (seq_name(s), seq_name(&s[..s.len() - 1])))
        .collect();
    let carrier = ForestStructure::new(carrier_base, parent)?;
    Ok((carrier, seq_of))
}

/// The number of non-empty sequences of length at most `k` over an
/// `n`-element set, saturating.
pub fn sequence_count(n: usize, k: usize) -> u128 {
    let n = n as u128;
    let mut total: u128 = 0;
    let mut power: u128 = 1;
    for _ in 0..k {
        power = power.saturating_mul(n);
        total = total.saturating_add(power);
    }
    total
}

/// Materializes the sequence comonad carrier over `base` at index `k`.
pub fn ef_build(base: &Structure, k: usize, limits: &Limits) -> Result<EfCoalgebra> {
    if k == 0 {
        return Err(Error::Malformed("the resource index k must be at least 1".into()));
    }
    let count = sequence_count(base.size(), k);
    if count > limits.carrier_cap as u128 {
        return Err(Error::SizeCap(format!(
            "carrier would have {count} elements, above the cap of {}",
            limits.carrier_cap
        )));
    }
    let mut seqs: BTreeSet<Vec<Elem>> = BTreeSet::new();
    let mut frontier: Vec<Vec<Elem>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for s in frontier {
            for e in base.universe() {
                let mut t = s.clone();
                t.push(e.clone());
                next.push(t);
            }
        }
        seqs.extend(next.iter().cloned());
        frontier = next;
    }
    let (carrier, seq_of) = sequence_forest(base, &seqs)?;
    Ok(EfCoalgebra { base: base.clone(), k, carrier, seq_of })
}

/// The counit: a sequence goes to its last element.
pub fn ef_counit(c: &EfCoalgebra) -> Homomorphism {
    let map = c
        .seq_of
        .iter()
        .map(|(name, seq)| (name.clone(), seq.last().expect("non-empty").clone()))
        .collect();
    Homomorphism::new(c.carrier.base().clone(), c.base.clone(), map)
        .expect("counit is total by construction")
}

/// The comultiplication as a map of element names: a sequence goes to the
/// sequence of its prefixes. The codomain (the carrier over the carrier) is
/// not materialized; see [`ef_comult`] for the homomorphism form.
pub fn ef_comult_map(c: &EfCoalgebra) -> BTreeMap<Elem, Elem> {
    c.seq_of
        .iter()
        .map(|(name, seq)| {
            let prefixes: Vec<Elem> = (1..=seq.len()).map(|i| seq_name(&seq[..i])).collect();
            (name.clone(), seq_name(&prefixes))
        })
        .collect()
}

/// The comultiplication as a homomorphism into the materialized carrier over
/// the carrier. Fails with a size-cap error when that codomain is too large;
/// [`ef_comult_map`] stays available in that case.
pub fn ef_comult(c: &EfCoalgebra, limits: &Limits) -> Result<(Homomorphism, EfCoalgebra)> {
    let outer = ef_build(c.carrier.base(), c.k, limits)?;
    let h = Homomorphism::new(
        c.carrier.base().clone(),
        outer.carrier.base().clone(),
        ef_comult_map(c),
    )?;
    Ok((h, outer))
}

/// The functorial action on a homomorphism: pointwise image of sequences.
/// Returns the map between the two carriers' bases, which is also a forest
/// morphism for the prefix orders.
pub fn ef_map(f: &Homomorphism, ca: &EfCoalgebra, cb: &EfCoalgebra) -> Result<Homomorphism> {
    if ca.base != f.source || cb.base != f.target || ca.k != cb.k {
        return Err(Error::Malformed(
            "functorial action endpoints do not match the given carriers".into(),
        ));
    }
    let map = ca
        .seq_of
        .iter()
        .map(|(name, seq)| {
            let image: Vec<Elem> = seq.iter().map(|e| f.apply(e).clone()).collect();
            (name.clone(), seq_name(&image))
        })
        .collect();
    let h = Homomorphism::new(ca.carrier.base().clone(), cb.carrier.base().clone(), map)?;
    debug_assert!(is_forest_morphism(&h, &ca.carrier, &cb.carrier));
    Ok(h)
}

/// The resource-graded forest over a plain structure: the sequence carrier
/// over the identity expansion. Its paths are the positions of the
/// back-and-forth comparison.
pub fn ef_adjoint_r(a: &Structure, k: usize, limits: &Limits) -> Result<EfCoalgebra> {
    let ja = expand_identity(a)?;
    ef_build(&ja, k, limits)
}

/// The resource-graded companion structure: the carrier over the identity
/// expansion with the identity relation collapsed away. Returns the
/// companion and the quotient map from the carrier's reduct.
pub fn ef_adjoint_g(a: &Structure, k: usize, limits: &Limits) -> Result<(Structure, Homomorphism)> {
    let r = ef_adjoint_r(a, k, limits)?;
    collapse_identity(r.carrier.base())
}

/// A labeled path: a start element and a list of (relation, element) steps.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModalPath {
    pub start: Elem,
    pub steps: Vec<(String, Elem)>,
}

impl ModalPath {
    pub fn name(&self) -> Elem {
        let mut parts = vec![self.start.clone()];
        for (rel, e) in &self.steps {
            parts.push(rel.clone());
            parts.push(e.clone());
        }
        format!("<{}>", parts.join(","))
    }

    pub fn last(&self) -> &Elem {
        self.steps.last().map(|(_, e)| e).unwrap_or(&self.start)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn prefix(&self, steps: usize) -> ModalPath {
        ModalPath { start: self.start.clone(), steps: self.steps[..steps].to_vec() }
    }

    fn extended(&self, rel: &str, e: &Elem) -> ModalPath {
        let mut steps = self.steps.clone();
        steps.push((rel.to_string(), e.clone()));
        ModalPath { start: self.start.clone(), steps }
    }
}

/// The carrier of the modal comonad at index `k`: all relation-labeled paths
/// from the distinguished element of length at most `k`, tree-ordered by
/// prefix. Unary relations hold at a path iff they hold at its last element;
/// binary relations relate a path to its one-step extensions along them.
#[derive(Clone, Debug)]
pub struct ModalCoalgebra {
    pub base: PointedStructure,
    pub k: usize,
    pub carrier: ForestStructure,
    pub point: Elem,
    path_of: BTreeMap<Elem, ModalPath>,
}

impl ModalCoalgebra {
    pub fn path(&self, name: &str) -> &ModalPath {
        &self.path_of[name]
    }

    pub fn paths(&self) -> impl Iterator<Item = (&Elem, &ModalPath)> {
        self.path_of.iter()
    }

    pub fn pointed(&self) -> PointedStructure {
        PointedStructure::new(self.carrier.base().clone(), self.point.clone())
            .expect("point is in the carrier")
    }
}

/// Materializes the modal carrier by breadth-first extension of paths.
pub fn modal_build(p: &PointedStructure, k: usize, limits: &Limits) -> Result<ModalCoalgebra> {
    if k == 0 {
        return Err(Error::Malformed("the resource index k must be at least 1".into()));
    }
    let a = &p.structure;
    if !a.vocabulary().is_modal() {
        return Err(Error::Unsupported(
            "the modal comonad requires a vocabulary of arities 1 and 2 only".into(),
        ));
    }
    check_names_sequencable(a)?;
    let binary: Vec<&str> =
        a.vocabulary().iter().filter(|(_, ar)| *ar == 2).map(|(n, _)| n).collect();
    let unary: Vec<&str> =
        a.vocabulary().iter().filter(|(_, ar)| *ar == 1).map(|(n, _)| n).collect();

    let root = ModalPath { start: p.point.clone(), steps: Vec::new() };
    let mut paths: Vec<ModalPath> = vec![root.clone()];
    let mut queue: VecDeque<ModalPath> = VecDeque::from([root]);
    while let Some(path) = queue.pop_front() {
        if path.len() == k {
            continue;
        }
        for rel in &binary {
            for t in a.tuples(rel) {
                if &t[0] == path.last() {
                    let ext = path.extended(rel, &t[1]);
                    paths.push(ext.clone());
                    queue.push_back(ext);
                    if paths.len() > limits.carrier_cap {
                        return Err(Error::SizeCap(format!(
                            "modal carrier exceeds the cap of {}",
                            limits.carrier_cap
                        )));
                    }
                }
            }
        }
    }
    let path_of: BTreeMap<Elem, ModalPath> =
        paths.iter().map(|p| (p.name(), p.clone())).collect();
    let universe: Vec<Elem> = path_of.keys().cloned().collect();
    let mut relations: Vec<(String, Vec<Tuple>)> = Vec::new();
    for rel in &unary {
        let tuples = path_of
            .iter()
            .filter(|(_, path)| a.has_tuple(rel, std::slice::from_ref(path.last())))
            .map(|(name, _)| vec![name.clone()])
            .collect();
        relations.push((rel.to_string(), tuples));
    }
    for rel in &binary {
        let tuples = path_of
            .iter()
            .filter(|(_, path)| !path.is_empty())
            .filter(|(_, path)| path.steps.last().expect("non-empty").0 == **rel)
            .map(|(name, path)| vec![path.prefix(path.len() - 1).name(), name.clone()])
            .collect();
        relations.push((rel.to_string(), tuples));
    }
    let carrier_base = Structure::new(a.vocabulary().clone(), universe, relations)?;
    let parent: BTreeMap<Elem, Elem> = path_of
        .values()
        .filter(|path| !path.is_empty())
        .map(|path| (path.name(), path.prefix(path.len() - 1).name()))
        .collect();
    let carrier = ForestStructure::new(carrier_base, parent)?;
    let point = ModalPath { start: p.point.clone(), steps: Vec::new() }.name();
    Ok(ModalCoalgebra { base: p.clone(), k, carrier, point, path_of })
}

/// The modal counit: a path goes to its last element.
pub fn modal_counit(c: &ModalCoalgebra) -> Homomorphism {
    let map = c
        .path_of
        .iter()
        .map(|(name, path)| (name.clone(), path.last().clone()))
        .collect();
    Homomorphism::new(c.carrier.base().clone(), c.base.structure.clone(), map)
        .expect("counit is total by construction")
}

/// The modal comultiplication: a path goes to the path of its prefixes, with
/// the same step labels.
pub fn modal_comult(c: &ModalCoalgebra, limits: &Limits) -> Result<(Homomorphism, ModalCoalgebra)> {
    let outer = modal_build(&c.pointed(), c.k, limits)?;
    let map = modal_comult_map(c);
    let h = Homomorphism::new(c.carrier.base().clone(), outer.carrier.base().clone(), map)?;
    Ok((h, outer))
}

/// The comultiplication as a map of element names.
pub fn modal_comult_map(c: &ModalCoalgebra) -> BTreeMap<Elem, Elem> {
    c.path_of
        .iter()
        .map(|(name, path)| {
            let nested = ModalPath {
                start: path.prefix(0).name(),
                steps: path
                    .steps
                    .iter()
                    .enumerate()
                    .map(|(i, (rel, _))| (rel.clone(), path.prefix(i + 1).name()))
                    .collect(),
            };
            (name.clone(), nested.name())
        })
        .collect()
}

/// The functorial action of the modal comonad on a point-preserving
/// homomorphism.
pub fn modal_map(f: &Homomorphism, ca: &ModalCoalgebra, cb: &ModalCoalgebra) -> Result<Homomorphism> {
    if ca.base.structure != f.source || cb.base.structure != f.target || ca.k != cb.k {
        return Err(Error::Malformed(
            "functorial action endpoints do not match the given carriers".into(),
        ));
    }
    if f.apply(&ca.base.point) != &cb.base.point {
        return Err(Error::Malformed("the map does not preserve the distinguished element".into()));
    }
    let map = ca
        .path_of
        .iter()
        .map(|(name, path)| {
            let image = ModalPath {
                start: f.apply(&path.start).clone(),
                steps: path
                    .steps
                    .iter()
                    .map(|(rel, e)| (rel.clone(), f.apply(e).clone()))
                    .collect(),
            };
            (name.clone(), image.name())
        })
        .collect();
    let h = Homomorphism::new(ca.carrier.base().clone(), cb.carrier.base().clone(), map)?;
    debug_assert!(is_forest_morphism(&h, &ca.carrier, &cb.carrier));
    Ok(h)
}

/// The modal resource-graded companion: the carrier itself, pointed at the
/// trivial path, together with the counit.
pub fn modal_adjoint_g(
    p: &PointedStructure,
    k: usize,
    limits: &Limits,
) -> Result<(PointedStructure, Homomorphism)> {
    let c = modal_build(p, k, limits)?;
    let counit = modal_counit(&c);
    Ok((c.pointed(), counit))
}

/// True iff the identity relation of a forest over an identity-expanded
/// vocabulary is an equivalence and relation membership transports along it
/// componentwise (so identified elements are interchangeable in every
/// relation).
pub fn is_smooth(p: &ForestStructure) -> Result<bool> {
    let base = p.base();
    if base.vocabulary().arity(IDENTITY_REL) != Some(2) {
        return Err(Error::VocabularyMismatch(format!(
            "smoothness is about the reserved binary symbol {IDENTITY_REL}"
        )));
    }
    // Reflexive, symmetric, transitive.
    for e in base.universe() {
        if !base.has_tuple(IDENTITY_REL, &[e.clone(), e.clone()]) {
            return Ok(false);
        }
    }
    let pairs: Vec<&Tuple> = base.tuples(IDENTITY_REL).collect();
    for t in &pairs {
        if !base.has_tuple(IDENTITY_REL, &[t[1].clone(), t[0].clone()]) {
            return Ok(false);
        }
        for u in &pairs {
            if t[1] == u[0] && !base.has_tuple(IDENTITY_REL, &[t[0].clone(), u[1].clone()]) {
                return Ok(false);
            }
        }
    }
    // Componentwise transport.
    for (rel, arity) in base.vocabulary().iter() {
        for t in base.tuples(rel) {
            for i in 0..arity {
                for u in &pairs {
                    if u[0] == t[i] {
                        let mut moved = t.clone();
                        moved[i] = u[1].clone();
                        if !base.has_tuple(rel, &moved) {
                            return Ok(false);
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Transposes a homomorphism `f` from the identity-collapse of a chain
/// object `p` into `a` across the adjunction: the forest morphism
/// `p -> R_k(a)` sending an element to the sequence of `f`-images of the
/// identity classes along its down-chain.
pub fn transpose_flat(
    p: &ForestStructure,
    f: &Homomorphism,
    r: &EfCoalgebra,
) -> Result<Homomorphism> {
    if !p.is_chain() {
        return Err(Error::Malformed("transpose domain must be a chain object".into()));
    }
    let (collapsed, proj) = collapse_identity(p.base())?;
    if f.source != collapsed {
        return Err(Error::Malformed(
            "the map's source is not the identity-collapse of the chain".into(),
        ));
    }
    if expand_identity(&f.target)? != r.base {
        return Err(Error::VocabularyMismatch(
            "the carrier is not built over the identity expansion of the map's target".into(),
        ));
    }
    let map: BTreeMap<Elem, Elem> = p
        .base()
        .universe()
        .map(|x| {
            let seq: Vec<Elem> = p
                .down_chain(x)
                .iter()
                .map(|c| f.apply(proj.apply(c)).clone())
                .collect();
            (x.clone(), seq_name(&seq))
        })
        .collect();
    let h = Homomorphism::new(p.base().clone(), r.carrier.base().clone(), map)?;
    debug_assert!(is_forest_morphism(&h, p, &r.carrier));
    Ok(h)
}

/// Transposes a forest morphism `m: p -> R_k(a)` back: the homomorphism from
/// the identity-collapse of `p` into `a` sending a class to the last element
/// of the image sequence of any of its members.
pub fn transpose_sharp(
    p: &ForestStructure,
    m: &Homomorphism,
    r: &EfCoalgebra,
    a: &Structure,
) -> Result<Homomorphism> {
    if !p.is_chain() {
        return Err(Error::Malformed("transpose domain must be a chain object".into()));
    }
    if expand_identity(a)? != r.base {
        return Err(Error::VocabularyMismatch(
            "the carrier is not built over the identity expansion of the target".into(),
        ));
    }
    let (collapsed, proj) = collapse_identity(p.base())?;
    let mut map: BTreeMap<Elem, Elem> = BTreeMap::new();
    for x in p.base().universe() {
        let class = proj.apply(x).clone();
        let last = r.sequence(m.apply(x)).last().expect("sequences are non-empty").clone();
        if let Some(prev) = map.insert(class, last.clone()) {
            if prev != last {
                return Err(Error::Malformed(
                    "image sequences of identified elements end differently".into(),
                ));
            }
        }
    }
    Homomorphism::new(collapsed, a.clone(), map)
}
