//! First-order and modal formulas: abstract syntax, s-expression parsing and
//! printing with exact round-tripping, evaluation on finite structures,
//! resource accounting (quantifier rank, modal depth), fragment predicates,
//! existential-positive characteristic formulas, and a seeded random
//! formula sampler.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Limits, Result};
use crate::structure::{Elem, PointedStructure, Structure, Vocabulary};

/// First-order formulas. Conjunction and disjunction are n-ary; the empty
/// conjunction serves as truth and the empty disjunction as falsity.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FoFormula {
    Equal(String, String),
    Rel(String, Vec<String>),
    Not(Box<FoFormula>),
    And(Vec<FoFormula>),
    Or(Vec<FoFormula>),
    Implies(Box<FoFormula>, Box<FoFormula>),
    Exists(String, Box<FoFormula>),
    Forall(String, Box<FoFormula>),
}

/// Modal formulas over a modal vocabulary: unary symbols are propositions,
/// binary symbols index the modalities. A grade `Some(n)` on a diamond
/// means "at least n successors"; `None` is the plain modality.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModalFormula {
    Top,
    Bottom,
    Prop(String),
    Not(Box<ModalFormula>),
    And(Vec<ModalFormula>),
    Or(Vec<ModalFormula>),
    Dia(String, Option<u32>, Box<ModalFormula>),
    Box(String, Option<u32>, Box<ModalFormula>),
}

/// A formula of either kind, as read from input.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum AnyFormula {
    Fo(FoFormula),
    Modal(ModalFormula),
}

// ---------------------------------------------------------------------------
// Resource accounting and fragments
// ---------------------------------------------------------------------------

pub fn quantifier_rank(phi: &FoFormula) -> usize {
    match phi {
        FoFormula::Equal(..) | FoFormula::Rel(..) => 0,
        FoFormula::Not(f) => quantifier_rank(f),
        FoFormula::And(fs) | FoFormula::Or(fs) => {
            fs.iter().map(quantifier_rank).max().unwrap_or(0)
        }
        FoFormula::Implies(a, b) => quantifier_rank(a).max(quantifier_rank(b)),
        FoFormula::Exists(_, f) | FoFormula::Forall(_, f) => 1 + quantifier_rank(f),
    }
}

pub fn modal_depth(phi: &ModalFormula) -> usize {
    match phi {
        ModalFormula::Top | ModalFormula::Bottom | ModalFormula::Prop(_) => 0,
        ModalFormula::Not(f) => modal_depth(f),
        ModalFormula::And(fs) | ModalFormula::Or(fs) => {
            fs.iter().map(modal_depth).max().unwrap_or(0)
        }
        ModalFormula::Dia(_, _, f) | ModalFormula::Box(_, _, f) => 1 + modal_depth(f),
    }
}

/// The existential-positive first-order fragment: atoms, conjunction,
/// disjunction, and existential quantification only.
pub fn is_existential_positive(phi: &FoFormula) -> bool {
    match phi {
        FoFormula::Equal(..) | FoFormula::Rel(..) => true,
        FoFormula::And(fs) | FoFormula::Or(fs) => fs.iter().all(is_existential_positive),
        FoFormula::Exists(_, f) => is_existential_positive(f),
        _ => false,
    }
}

/// The existential-positive modal fragment: propositions, constants,
/// conjunction, disjunction, and ungraded diamonds only.
pub fn is_existential_positive_modal(phi: &ModalFormula) -> bool {
    match phi {
        ModalFormula::Top | ModalFormula::Bottom | ModalFormula::Prop(_) => true,
        ModalFormula::And(fs) | ModalFormula::Or(fs) => {
            fs.iter().all(is_existential_positive_modal)
        }
        ModalFormula::Dia(_, None, f) => is_existential_positive_modal(f),
        _ => false,
    }
}

/// Negative first-order formulas: negated atoms combined with conjunction,
/// disjunction, and both quantifiers.
pub fn is_negative(phi: &FoFormula) -> bool {
    match phi {
        FoFormula::Not(inner) => {
            matches!(**inner, FoFormula::Equal(..) | FoFormula::Rel(..))
        }
        FoFormula::And(fs) | FoFormula::Or(fs) => fs.iter().all(is_negative),
        FoFormula::Exists(_, f) | FoFormula::Forall(_, f) => is_negative(f),
        _ => false,
    }
}

/// Negative modal formulas: negated propositions and constants combined
/// with conjunction, disjunction, diamonds, and boxes.
pub fn is_negative_modal(phi: &ModalFormula) -> bool {
    match phi {
        ModalFormula::Top | ModalFormula::Bottom => true,
        ModalFormula::Not(inner) => matches!(**inner, ModalFormula::Prop(_)),
        ModalFormula::And(fs) | ModalFormula::Or(fs) => fs.iter().all(is_negative_modal),
        ModalFormula::Dia(_, _, f) | ModalFormula::Box(_, _, f) => is_negative_modal(f),
        _ => false,
    }
}

pub fn fo_node_count(phi: &FoFormula) -> usize {
    match phi {
        FoFormula::Equal(..) | FoFormula::Rel(..) => 1,
        FoFormula::Not(f) => 1 + fo_node_count(f),
        FoFormula::And(fs) | FoFormula::Or(fs) => {
            1 + fs.iter().map(fo_node_count).sum::<usize>()
        }
        FoFormula::Implies(a, b) => 1 + fo_node_count(a) + fo_node_count(b),
        FoFormula::Exists(_, f) | FoFormula::Forall(_, f) => 1 + fo_node_count(f),
    }
}

pub fn modal_node_count(phi: &ModalFormula) -> usize {
    match phi {
        ModalFormula::Top | ModalFormula::Bottom | ModalFormula::Prop(_) => 1,
        ModalFormula::Not(f) => 1 + modal_node_count(f),
        ModalFormula::And(fs) | ModalFormula::Or(fs) => {
            1 + fs.iter().map(modal_node_count).sum::<usize>()
        }
        ModalFormula::Dia(_, _, f) | ModalFormula::Box(_, _, f) => 1 + modal_node_count(f),
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Evaluates a first-order formula under a (possibly partial) assignment.
/// Every free variable must be assigned; relation symbols must belong to the
/// structure's vocabulary with matching arity.
pub fn eval_fo(
    phi: &FoFormula,
    a: &Structure,
    assignment: &BTreeMap<String, Elem>,
) -> Result<bool> {
    for (v, e) in assignment {
        if !a.contains(e) {
            return Err(Error::Malformed(format!(
                "assignment maps {v} to {e}, which is not in the universe"
            )));
        }
    }
    let mut env: BTreeMap<String, Elem> = assignment.clone();
    eval_fo_rec(phi, a, &mut env)
}

fn eval_fo_rec(
    phi: &FoFormula,
    a: &Structure,
    env: &mut BTreeMap<String, Elem>,
) -> Result<bool> {
    match phi {
        FoFormula::Equal(x, y) => {
            let vx = lookup(env, x)?;
            let vy = lookup(env, y)?;
            Ok(vx == vy)
        }
        FoFormula::Rel(name, vars) => {
            let arity = a.vocabulary().arity(name).ok_or_else(|| {
                Error::VocabularyMismatch(format!("unknown relation symbol {name}"))
            })?;
            if vars.len() != arity {
                return Err(Error::VocabularyMismatch(format!(
                    "relation {name} has arity {arity}, atom has {} arguments",
                    vars.len()
                )));
            }
            let tuple: Vec<Elem> = vars
                .iter()
                .map(|v| lookup(env, v).cloned())
                .collect::<Result<_>>()?;
            Ok(a.has_tuple(name, &tuple))
        }
        FoFormula::Not(f) => Ok(!eval_fo_rec(f, a, env)?),
        FoFormula::And(fs) => {
            for f in fs {
                if !eval_fo_rec(f, a, env)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        FoFormula::Or(fs) => {
            for f in fs {
                if eval_fo_rec(f, a, env)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        FoFormula::Implies(p, q) => Ok(!eval_fo_rec(p, a, env)? || eval_fo_rec(q, a, env)?),
        FoFormula::Exists(x, f) | FoFormula::Forall(x, f) => {
            let want = matches!(phi, FoFormula::Forall(..));
            let saved = env.get(x).cloned();
            let mut result = want;
            for e in a.universe() {
                env.insert(x.clone(), e.clone());
                let v = eval_fo_rec(f, a, env)?;
                if v != want {
                    result = !want;
                    break;
                }
            }
            match saved {
                Some(old) => env.insert(x.clone(), old),
                None => env.remove(x),
            };
            Ok(result)
        }
    }
}

fn lookup<'e>(env: &'e BTreeMap<String, Elem>, var: &str) -> Result<&'e Elem> {
    env.get(var)
        .ok_or_else(|| Error::Malformed(format!("unassigned free variable {var}")))
}

/// Evaluates a modal formula at the distinguished element of a pointed
/// structure over a modal vocabulary.
pub fn eval_modal(phi: &ModalFormula, p: &PointedStructure) -> Result<bool> {
    if !p.structure.vocabulary().is_modal() {
        return Err(Error::Unsupported(
            "modal evaluation requires a vocabulary of arities 1 and 2 only".into(),
        ));
    }
    eval_modal_at(phi, &p.structure, &p.point)
}

fn eval_modal_at(phi: &ModalFormula, a: &Structure, at: &Elem) -> Result<bool> {
    match phi {
        ModalFormula::Top => Ok(true),
        ModalFormula::Bottom => Ok(false),
        ModalFormula::Prop(name) => match a.vocabulary().arity(name) {
            Some(1) => Ok(a.has_tuple(name, std::slice::from_ref(at))),
            Some(n) => Err(Error::VocabularyMismatch(format!(
                "proposition {name} must be unary, found arity {n}"
            ))),
            None => Err(Error::VocabularyMismatch(format!("unknown proposition {name}"))),
        },
        ModalFormula::Not(f) => Ok(!eval_modal_at(f, a, at)?),
        ModalFormula::And(fs) => {
            for f in fs {
                if !eval_modal_at(f, a, at)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        ModalFormula::Or(fs) => {
            for f in fs {
                if eval_modal_at(f, a, at)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        ModalFormula::Dia(rel, grade, f) => {
            let needed = grade.unwrap_or(1) as usize;
            if needed == 0 {
                return Ok(true);
            }
            let mut count = 0;
            for b in successors(a, rel, at)? {
                if eval_modal_at(f, a, &b)? {
                    count += 1;
                    if count >= needed {
                        return Ok(true);
                    }
                }
            }
            Ok(false)
        }
        ModalFormula::Box(rel, grade, f) => {
            // At most grade-1 successors may fail f; the plain box means all
            // successors satisfy f.
            let dual = ModalFormula::Dia(
                rel.clone(),
                *grade,
                Box::new(ModalFormula::Not(f.clone())),
            );
            Ok(!eval_modal_at(&dual, a, at)?)
        }
    }
}

fn successors(a: &Structure, rel: &str, from: &Elem) -> Result<Vec<Elem>> {
    match a.vocabulary().arity(rel) {
        Some(2) => Ok(a
            .tuples(rel)
            .filter(|t| &t[0] == from)
            .map(|t| t[1].clone())
            .collect()),
        Some(n) => Err(Error::VocabularyMismatch(format!(
            "modality over {rel} requires a binary symbol, found arity {n}"
        ))),
        None => Err(Error::VocabularyMismatch(format!("unknown relation symbol {rel}"))),
    }
}

/// Evaluates either kind of formula on an input structure; modal formulas
/// require the distinguished element to be present.
pub fn eval_any(phi: &AnyFormula, input: &crate::structure::InputStructure) -> Result<bool> {
    match phi {
        AnyFormula::Fo(f) => eval_fo(f, &input.structure, &BTreeMap::new()),
        AnyFormula::Modal(m) => eval_modal(m, &input.pointed()?),
    }
}

// ---------------------------------------------------------------------------
// S-expression syntax
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

fn tokenize(text: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        match c {
            '(' | ')' => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            c => current.push(c),
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    if tokens.is_empty() {
        return Err(Error::Malformed("empty formula text".into()));
    }
    Ok(tokens)
}

fn parse_sexpr(tokens: &[String], pos: &mut usize) -> Result<SExpr> {
    if *pos >= tokens.len() {
        return Err(Error::Malformed("unexpected end of formula text".into()));
    }
    let tok = &tokens[*pos];
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                if *pos >= tokens.len() {
                    return Err(Error::Malformed("unbalanced parenthesis".into()));
                }
                if tokens[*pos] == ")" {
                    *pos += 1;
                    return Ok(SExpr::List(items));
                }
                items.push(parse_sexpr(tokens, pos)?);
            }
        }
        ")" => Err(Error::Malformed("unexpected closing parenthesis".into())),
        atom => Ok(SExpr::Atom(atom.to_string())),
    }
}

fn parse_single(text: &str) -> Result<SExpr> {
    let tokens = tokenize(text)?;
    let mut pos = 0;
    let expr = parse_sexpr(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(Error::Malformed("trailing tokens after the formula".into()));
    }
    Ok(expr)
}

fn expect_var(e: &SExpr) -> Result<String> {
    match e {
        SExpr::Atom(s) => Ok(s.clone()),
        SExpr::List(_) => Err(Error::Malformed("expected a name, found a list".into())),
    }
}

fn fo_from_sexpr(e: &SExpr) -> Result<FoFormula> {
    let items = match e {
        SExpr::Atom(a) => {
            return Err(Error::Malformed(format!("bare atom {a} is not a formula")))
        }
        SExpr::List(items) => items,
    };
    let head = match items.first() {
        Some(SExpr::Atom(h)) => h.as_str(),
        Some(SExpr::List(_)) => {
            return Err(Error::Malformed("formula head must be a name".into()))
        }
        None => return Err(Error::Malformed("empty list is not a formula".into())),
    };
    let args = &items[1..];
    let unary = |args: &[SExpr]| -> Result<Box<FoFormula>> {
        match args {
            [f] => Ok(Box::new(fo_from_sexpr(f)?)),
            _ => Err(Error::Malformed(format!("{head} takes exactly one formula"))),
        }
    };
    match head {
        "=" => match args {
            [x, y] => Ok(FoFormula::Equal(expect_var(x)?, expect_var(y)?)),
            _ => Err(Error::Malformed("= takes exactly two variables".into())),
        },
        "not" => Ok(FoFormula::Not(unary(args)?)),
        "and" | "or" => {
            let fs = args.iter().map(fo_from_sexpr).collect::<Result<Vec<_>>>()?;
            Ok(if head == "and" { FoFormula::And(fs) } else { FoFormula::Or(fs) })
        }
        "implies" => match args {
            [p, q] => Ok(FoFormula::Implies(
                Box::new(fo_from_sexpr(p)?),
                Box::new(fo_from_sexpr(q)?),
            )),
            _ => Err(Error::Malformed("implies takes exactly two formulas".into())),
        },
        "exists" | "forall" => match args {
            [v, f] => {
                let var = expect_var(v)?;
                let body = Box::new(fo_from_sexpr(f)?);
                Ok(if head == "exists" {
                    FoFormula::Exists(var, body)
                } else {
                    FoFormula::Forall(var, body)
                })
            }
            _ => Err(Error::Malformed(format!("{head} takes a variable and a formula"))),
        },
        "dia" | "box" | "prop" | "top" | "bot" => Err(Error::Malformed(format!(
            "{head} is a modal connective; this position expects a first-order formula"
        ))),
        rel => {
            let vars = args.iter().map(expect_var).collect::<Result<Vec<_>>>()?;
            Ok(FoFormula::Rel(rel.to_string(), vars))
        }
    }
}

fn modal_from_sexpr(e: &SExpr) -> Result<ModalFormula> {
    let items = match e {
        SExpr::Atom(a) => {
            return Err(Error::Malformed(format!("bare atom {a} is not a formula")))
        }
        SExpr::List(items) => items,
    };
    let head = match items.first() {
        Some(SExpr::Atom(h)) => h.as_str(),
        Some(SExpr::List(_)) => {
            return Err(Error::Malformed("formula head must be a name".into()))
        }
        None => return Err(Error::Malformed("empty list is not a formula".into())),
    };
    let args = &items[1..];
    match head {
        "top" if args.is_empty() => Ok(ModalFormula::Top),
        "bot" if args.is_empty() => Ok(ModalFormula::Bottom),
        "top" | "bot" => Err(Error::Malformed(format!("{head} takes no arguments"))),
        "prop" => match args {
            [p] => Ok(ModalFormula::Prop(expect_var(p)?)),
            _ => Err(Error::Malformed("prop takes exactly one name".into())),
        },
        "not" => match args {
            [f] => Ok(ModalFormula::Not(Box::new(modal_from_sexpr(f)?))),
            _ => Err(Error::Malformed("not takes exactly one formula".into())),
        },
        "and" | "or" => {
            let fs = args.iter().map(modal_from_sexpr).collect::<Result<Vec<_>>>()?;
            Ok(if head == "and" { ModalFormula::And(fs) } else { ModalFormula::Or(fs) })
        }
        "dia" | "box" => {
            let (rel, grade, body) = match args {
                [r, f] => (expect_var(r)?, None, f),
                [r, SExpr::Atom(n), f] if n.chars().all(|c| c.is_ascii_digit()) => {
                    let grade: u32 = n.parse().map_err(|_| {
                        Error::Malformed(format!("grade {n} is out of range"))
                    })?;
                    (expect_var(r)?, Some(grade), f)
                }
                _ => {
                    return Err(Error::Malformed(format!(
                        "{head} takes a relation, an optional grade, and a formula"
                    )))
                }
            };
            let body = Box::new(modal_from_sexpr(body)?);
            Ok(if head == "dia" {
                ModalFormula::Dia(rel, grade, body)
            } else {
                ModalFormula::Box(rel, grade, body)
            })
        }
        other => Err(Error::Malformed(format!(
            "{other} is not a modal connective (relation atoms belong to first-order formulas)"
        ))),
    }
}

fn sexpr_mentions_modal(e: &SExpr) -> bool {
    match e {
        SExpr::Atom(_) => false,
        SExpr::List(items) => {
            if let Some(SExpr::Atom(h)) = items.first() {
                if matches!(h.as_str(), "dia" | "box" | "prop" | "top" | "bot") {
                    return true;
                }
            }
            items.iter().any(sexpr_mentions_modal)
        }
    }
}

pub fn parse_fo(text: &str) -> Result<FoFormula> {
    fo_from_sexpr(&parse_single(text)?)
}

pub fn parse_modal(text: &str) -> Result<ModalFormula> {
    modal_from_sexpr(&parse_single(text)?)
}

/// Parses either kind of formula, deciding by the connectives that appear:
/// anything mentioning `dia`, `box`, `prop`, `top`, or `bot` is modal, the
/// rest is first-order.
pub fn parse_any(text: &str) -> Result<AnyFormula> {
    let e = parse_single(text)?;
    if sexpr_mentions_modal(&e) {
        Ok(AnyFormula::Modal(modal_from_sexpr(&e)?))
    } else {
        Ok(AnyFormula::Fo(fo_from_sexpr(&e)?))
    }
}

impl fmt::Display for FoFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoFormula::Equal(x, y) => write!(f, "(= {x} {y})"),
            FoFormula::Rel(r, vars) => {
                write!(f, "({r}")?;
                for v in vars {
                    write!(f, " {v}")?;
                }
                write!(f, ")")
            }
            FoFormula::Not(g) => write!(f, "(not {g})"),
            FoFormula::And(fs) | FoFormula::Or(fs) => {
                let name = if matches!(self, FoFormula::And(_)) { "and" } else { "or" };
                write!(f, "({name}")?;
                for g in fs {
                    write!(f, " {g}")?;
                }
                write!(f, ")")
            }
            FoFormula::Implies(p, q) => write!(f, "(implies {p} {q})"),
            FoFormula::Exists(x, g) => write!(f, "(exists {x} {g})"),
            FoFormula::Forall(x, g) => write!(f, "(forall {x} {g})"),
        }
    }
}

impl fmt::Display for ModalFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModalFormula::Top => write!(f, "(top)"),
            ModalFormula::Bottom => write!(f, "(bot)"),
            ModalFormula::Prop(p) => write!(f, "(prop {p})"),
            ModalFormula::Not(g) => write!(f, "(not {g})"),
            ModalFormula::And(fs) | ModalFormula::Or(fs) => {
                let name = if matches!(self, ModalFormula::And(_)) { "and" } else { "or" };
                write!(f, "({name}")?;
                for g in fs {
                    write!(f, " {g}")?;
                }
                write!(f, ")")
            }
            ModalFormula::Dia(r, grade, g) | ModalFormula::Box(r, grade, g) => {
                let name = if matches!(self, ModalFormula::Dia(..)) { "dia" } else { "box" };
                match grade {
                    Some(n) => write!(f, "({name} {r} {n} {g})"),
                    None => write!(f, "({name} {r} {g})"),
                }
            }
        }
    }
}

impl fmt::Display for AnyFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnyFormula::Fo(g) => g.fmt(f),
            AnyFormula::Modal(g) => g.fmt(f),
        }
    }
}

// ---------------------------------------------------------------------------
// Characteristic formulas
// ---------------------------------------------------------------------------

/// An existential-positive sentence of quantifier rank at most `k` that holds
/// in exactly the structures reachable from `a` in the k-round one-sided
/// game: the positive diagram of the chosen tuple, extended by one
/// existential per element of `a` at each round.
pub fn ep_characteristic_fo(a: &Structure, k: usize, limits: &Limits) -> Result<FoFormula> {
    let mut budget = limits.formula_cap;
    let chosen: Vec<&Elem> = Vec::new();
    chi_fo(a, &chosen, k, &mut budget)
}

fn var_name(i: usize) -> String {
    format!("v{}", i + 1)
}

fn chi_fo(a: &Structure, chosen: &[&Elem], r: usize, budget: &mut usize) -> Result<FoFormula> {
    let mut conjuncts: BTreeSet<FoFormula> = BTreeSet::new();
    // Positive diagram of the chosen tuple: repeated choices give equality
    // atoms, and every relation tuple over chosen elements gives a relation
    // atom through the first position realizing each component.
    let first_pos: BTreeMap<&Elem, usize> = chosen
        .iter()
        .enumerate()
        .rev()
        .map(|(i, e)| (*e, i))
        .collect();
    for (i, e) in chosen.iter().enumerate() {
        let j = first_pos[*e];
        if j < i {
            conjuncts.insert(FoFormula::Equal(var_name(j), var_name(i)));
        }
    }
    for rel in a.vocabulary().names() {
        for t in a.tuples(rel) {
            if t.iter().all(|e| first_pos.contains_key(e)) {
                let vars = t.iter().map(|e| var_name(first_pos[e])).collect();
                conjuncts.insert(FoFormula::Rel(rel.to_string(), vars));
            }
        }
    }
    if r > 0 {
        let next = var_name(chosen.len());
        for e in a.universe() {
            let mut extended: Vec<&Elem> = chosen.to_vec();
            extended.push(e);
            let inner = chi_fo(a, &extended, r - 1, budget)?;
            conjuncts.insert(FoFormula::Exists(next.clone(), Box::new(inner)));
        }
    }
    let mut list: Vec<FoFormula> = conjuncts.into_iter().collect();
    let formula = if list.len() == 1 { list.pop().expect("non-empty") } else { FoFormula::And(list) };
    let nodes = fo_node_count(&formula);
    if nodes > *budget {
        return Err(Error::SizeCap(format!(
            "characteristic sentence exceeds the formula node cap"
        )));
    }
    *budget -= nodes;
    Ok(formula)
}

/// The modal analogue: an existential-positive modal formula of depth at
/// most `k` describing the propositions at the point and, recursively, one
/// diamond per successor.
pub fn ep_characteristic_modal(
    p: &PointedStructure,
    k: usize,
    limits: &Limits,
) -> Result<ModalFormula> {
    if !p.structure.vocabulary().is_modal() {
        return Err(Error::Unsupported(
            "the modal characteristic formula requires a modal vocabulary".into(),
        ));
    }
    let mut budget = limits.formula_cap;
    chi_modal(&p.structure, &p.point, k, &mut budget)
}

fn chi_modal(a: &Structure, at: &Elem, r: usize, budget: &mut usize) -> Result<ModalFormula> {
    let mut conjuncts: BTreeSet<ModalFormula> = BTreeSet::new();
    for (rel, arity) in a.vocabulary().iter() {
        if arity == 1 && a.has_tuple(rel, std::slice::from_ref(at)) {
            conjuncts.insert(ModalFormula::Prop(rel.to_string()));
        }
    }
    if r > 0 {
        for (rel, arity) in a.vocabulary().iter() {
            if arity != 2 {
                continue;
            }
            let succs: BTreeSet<&Elem> = a
                .tuples(rel)
                .filter(|t| t[0] == *at)
                .map(|t| &t[1])
                .collect();
            for b in succs {
                let inner = chi_modal(a, b, r - 1, budget)?;
                conjuncts.insert(ModalFormula::Dia(rel.to_string(), None, Box::new(inner)));
            }
        }
    }
    let mut list: Vec<ModalFormula> = conjuncts.into_iter().collect();
    let formula = if list.len() == 1 {
        list.pop().expect("non-empty")
    } else {
        ModalFormula::And(list)
    };
    let nodes = modal_node_count(&formula);
    if nodes > *budget {
        return Err(Error::SizeCap(
            "characteristic formula exceeds the formula node cap".into(),
        ));
    }
    *budget -= nodes;
    Ok(formula)
}

// ---------------------------------------------------------------------------
// Random sampling
// ---------------------------------------------------------------------------

/// The formula fragments the sampler can draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fragment {
    /// Full first-order logic of quantifier rank at most k.
    Fo,
    /// Existential-positive first-order, quantifier rank at most k.
    EpFo,
    /// Plain modal logic of depth at most k.
    Ml,
    /// Existential-positive modal logic, depth at most k.
    EpMl,
    /// Modal logic with graded modalities up to the given grade.
    GradedMl { max_grade: u32 },
}

/// Deterministic pseudo-random formulas within a fragment and resource
/// bound. The same arguments always produce the same list.
pub fn sample_formulas(
    vocab: &Vocabulary,
    k: usize,
    fragment: Fragment,
    count: usize,
    seed: u64,
) -> Result<Vec<AnyFormula>> {
    let modal_fragment = matches!(
        fragment,
        Fragment::Ml | Fragment::EpMl | Fragment::GradedMl { .. }
    );
    if modal_fragment && !vocab.is_modal() {
        return Err(Error::Unsupported(
            "modal fragments require a vocabulary of arities 1 and 2 only".into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let f = if modal_fragment {
            AnyFormula::Modal(gen_modal(&mut rng, vocab, k, fragment, 12))
        } else {
            AnyFormula::Fo(gen_fo(&mut rng, vocab, k, fragment, &mut Vec::new(), 12))
        };
        out.push(f);
    }
    Ok(out)
}

fn gen_fo(
    rng: &mut StdRng,
    vocab: &Vocabulary,
    qr_budget: usize,
    fragment: Fragment,
    vars: &mut Vec<String>,
    size: usize,
) -> FoFormula {
    let ep = matches!(fragment, Fragment::EpFo);
    let leaf_only = size == 0 || (qr_budget == 0 && vars.is_empty());
    if leaf_only {
        return fo_leaf(rng, vocab, vars);
    }
    // Encourage quantifiers while no variable is bound yet.
    let roll = if vars.is_empty() { 0 } else { rng.gen_range(0u32..10) };
    match roll {
        0..=2 if qr_budget > 0 => {
            let var = format!("x{}", vars.len() + 1);
            vars.push(var.clone());
            let body = gen_fo(rng, vocab, qr_budget - 1, fragment, vars, size - 1);
            vars.pop();
            if !ep && rng.gen_bool(0.4) {
                FoFormula::Forall(var, Box::new(body))
            } else {
                FoFormula::Exists(var, Box::new(body))
            }
        }
        3..=4 => {
            let parts = (0..2)
                .map(|_| gen_fo(rng, vocab, qr_budget, fragment, vars, size / 2))
                .collect();
            FoFormula::And(parts)
        }
        5..=6 => {
            let parts = (0..2)
                .map(|_| gen_fo(rng, vocab, qr_budget, fragment, vars, size / 2))
                .collect();
            FoFormula::Or(parts)
        }
        7 if !ep => FoFormula::Not(Box::new(gen_fo(
            rng,
            vocab,
            qr_budget,
            fragment,
            vars,
            size - 1,
        ))),
        8 if !ep => FoFormula::Implies(
            Box::new(gen_fo(rng, vocab, qr_budget, fragment, vars, size / 2)),
            Box::new(gen_fo(rng, vocab, qr_budget, fragment, vars, size / 2)),
        ),
        _ => fo_leaf(rng, vocab, vars),
    }
}

fn fo_leaf(rng: &mut StdRng, vocab: &Vocabulary, vars: &[String]) -> FoFormula {
    if vars.is_empty() {
        return FoFormula::And(Vec::new());
    }
    let pick_var = |rng: &mut StdRng| vars[rng.gen_range(0..vars.len())].clone();
    let symbols: Vec<(&str, usize)> = vocab.iter().collect();
    if symbols.is_empty() || rng.gen_bool(0.3) {
        FoFormula::Equal(pick_var(rng), pick_var(rng))
    } else {
        let (name, arity) = symbols[rng.gen_range(0..symbols.len())];
        let args = (0..arity).map(|_| pick_var(rng)).collect();
        FoFormula::Rel(name.to_string(), args)
    }
}

fn gen_modal(
    rng: &mut StdRng,
    vocab: &Vocabulary,
    depth_budget: usize,
    fragment: Fragment,
    size: usize,
) -> ModalFormula {
    let ep = matches!(fragment, Fragment::EpMl);
    let graded = matches!(fragment, Fragment::GradedMl { .. });
    let props: Vec<&str> =
        vocab.iter().filter(|(_, a)| *a == 1).map(|(n, _)| n).collect();
    let rels: Vec<&str> = vocab.iter().filter(|(_, a)| *a == 2).map(|(n, _)| n).collect();
    let leaf = |rng: &mut StdRng| {
        if props.is_empty() || rng.gen_bool(0.2) {
            if !ep && rng.gen_bool(0.3) {
                ModalFormula::Bottom
            } else {
                ModalFormula::Top
            }
        } else {
            ModalFormula::Prop(props[rng.gen_range(0..props.len())].to_string())
        }
    };
    if size == 0 {
        return leaf(rng);
    }
    match rng.gen_range(0u32..10) {
        0..=3 if depth_budget > 0 && !rels.is_empty() => {
            let rel = rels[rng.gen_range(0..rels.len())].to_string();
            let grade = match fragment {
                Fragment::GradedMl { max_grade } if rng.gen_bool(0.7) => {
                    Some(rng.gen_range(0..=max_grade))
                }
                _ => None,
            };
            let body = Box::new(gen_modal(rng, vocab, depth_budget - 1, fragment, size - 1));
            if !ep && rng.gen_bool(0.35) {
                ModalFormula::Box(rel, grade, body)
            } else {
                ModalFormula::Dia(rel, grade, body)
            }
        }
        4..=5 => ModalFormula::And(
            (0..2)
                .map(|_| gen_modal(rng, vocab, depth_budget, fragment, size / 2))
                .collect(),
        ),
        6..=7 => ModalFormula::Or(
            (0..2)
                .map(|_| gen_modal(rng, vocab, depth_budget, fragment, size / 2))
                .collect(),
        ),
        8 if !ep && !graded => {
            ModalFormula::Not(Box::new(gen_modal(rng, vocab, depth_budget, fragment, size - 1)))
        }
        _ => leaf(rng),
    }
}
