//! Parser for the `.fol` transition-system surface language.

use std::sync::Arc;

use thiserror::Error;

use super::sexpr::{read_all, Pos, SExpr, SExprError};
use crate::logic::{
    sort_check_env, Binder, Formula, Mutability, QuantKind, Signature, SignatureError,
    SortError, SortId, SymbolRef, Term, TwoVocab,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{0}")]
    Lex(#[from] SExprError),
    #[error("{pos}: {msg}")]
    Malformed { pos: Pos, msg: String },
    #[error("{pos}: undeclared sort `{name}`")]
    UndeclaredSort { pos: Pos, name: String },
    #[error("{pos}: unknown symbol `{name}`")]
    UnknownSymbol { pos: Pos, name: String },
    #[error("{pos}: primed symbol `{name}` is only allowed inside transitions")]
    PrimedOutsideTransition { pos: Pos, name: String },
    #[error("{pos}: {err}")]
    Sort { pos: Pos, err: SortError },
    #[error("{pos}: {err}")]
    Signature { pos: Pos, err: SignatureError },
}

fn malformed(pos: Pos, msg: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        pos,
        msg: msg.into(),
    }
}

/// A parsed transition system: signature, axioms, initial-state and safety
/// formulas, named two-vocabulary transition formulas, and declared EPR sort
/// edges.
#[derive(Debug, Clone)]
pub struct TransitionSystem {
    pub sig: Arc<Signature>,
    pub vocab: Arc<TwoVocab>,
    pub axioms: Vec<Formula>,
    pub inits: Vec<Formula>,
    pub transitions: Vec<(String, Formula)>,
    pub safeties: Vec<Formula>,
    pub epr_edges: Vec<(SortId, SortId)>,
    pub name: Option<String>,
}

impl TransitionSystem {
    /// The transition relation: disjunction of all named transitions.
    pub fn transition_disjunction(&self) -> Formula {
        Formula::Or(self.transitions.iter().map(|(_, f)| f.clone()).collect())
    }
}

/// Parse a complete `.fol` transition system. Declarations may appear in any
/// order; the signature is collected first.
pub fn parse_system(text: &str) -> Result<TransitionSystem, ParseError> {
    let forms = read_all(text)?;

    // pass 1: signature declarations
    let mut sig = Signature::new();
    for form in &forms {
        let items = form
            .as_list()
            .ok_or_else(|| malformed(form.pos(), "expected a parenthesized declaration"))?;
        let head = items
            .first()
            .and_then(|h| h.as_atom())
            .ok_or_else(|| malformed(form.pos(), "expected a declaration keyword"))?;
        if head == "sort" {
            let name = expect_atom(items, 1, form.pos(), "sort name")?;
            check_arity(items, 2, form.pos())?;
            sig.add_sort(name).map_err(|err| ParseError::Signature {
                pos: form.pos(),
                err,
            })?;
        }
    }
    for form in &forms {
        let items = form.as_list().unwrap();
        let head = items[0].as_atom().unwrap_or_default();
        match head {
            "constant" => {
                let name = expect_atom(items, 1, form.pos(), "constant name")?;
                let sort = parse_sort(&sig, &items[2..].first().cloned(), form.pos())?;
                let m = parse_mutability(items, 3, form.pos())?;
                check_arity(items, 4, form.pos())?;
                sig.add_const(name, sort, m).map_err(|err| ParseError::Signature {
                    pos: form.pos(),
                    err,
                })?;
            }
            "relation" => {
                let name = expect_atom(items, 1, form.pos(), "relation name")?;
                let args = parse_sort_list(&sig, items.get(2), form.pos())?;
                let m = parse_mutability(items, 3, form.pos())?;
                check_arity(items, 4, form.pos())?;
                sig.add_rel(name, args, m).map_err(|err| ParseError::Signature {
                    pos: form.pos(),
                    err,
                })?;
            }
            "function" => {
                let name = expect_atom(items, 1, form.pos(), "function name")?;
                let args = parse_sort_list(&sig, items.get(2), form.pos())?;
                if args.is_empty() {
                    return Err(malformed(form.pos(), "function needs at least one argument sort"));
                }
                let ret_name = expect_atom(items, 3, form.pos(), "result sort")?;
                let ret = sig.sort_id(ret_name).ok_or_else(|| ParseError::UndeclaredSort {
                    pos: form.pos(),
                    name: ret_name.to_string(),
                })?;
                let m = parse_mutability(items, 4, form.pos())?;
                check_arity(items, 5, form.pos())?;
                sig.add_func(name, args, ret, m).map_err(|err| ParseError::Signature {
                    pos: form.pos(),
                    err,
                })?;
            }
            "sort" | "axiom" | "init" | "transition" | "safety" | "epr-edge" => {}
            other => {
                return Err(malformed(
                    form.pos(),
                    format!("unknown declaration `{other}`"),
                ))
            }
        }
    }

    let sig = Arc::new(sig);
    let vocab = Arc::new(TwoVocab::new(sig.clone()));

    // pass 2: formulas and edges
    let mut system = TransitionSystem {
        sig: sig.clone(),
        vocab: vocab.clone(),
        axioms: Vec::new(),
        inits: Vec::new(),
        transitions: Vec::new(),
        safeties: Vec::new(),
        epr_edges: Vec::new(),
        name: None,
    };
    for form in &forms {
        let items = form.as_list().unwrap();
        let head = items[0].as_atom().unwrap_or_default();
        match head {
            "axiom" | "init" | "safety" => {
                check_arity(items, 2, form.pos())?;
                let f = parse_formula_sexpr(&items[1], &sig, &vocab, false)?;
                sort_checked(&f, &sig, items[1].pos())?;
                match head {
                    "axiom" => system.axioms.push(f),
                    "init" => system.inits.push(f),
                    _ => system.safeties.push(f),
                }
            }
            "transition" => {
                check_arity(items, 3, form.pos())?;
                let name = expect_atom(items, 1, form.pos(), "transition name")?;
                let f = parse_formula_sexpr(&items[2], vocab.doubled(), &vocab, true)?;
                sort_checked(&f, vocab.doubled(), items[2].pos())?;
                system.transitions.push((name.to_string(), f));
            }
            "epr-edge" => {
                check_arity(items, 3, form.pos())?;
                let from = expect_atom(items, 1, form.pos(), "sort name")?;
                let to = expect_atom(items, 2, form.pos(), "sort name")?;
                let f = sig.sort_id(from).ok_or_else(|| ParseError::UndeclaredSort {
                    pos: form.pos(),
                    name: from.to_string(),
                })?;
                let t = sig.sort_id(to).ok_or_else(|| ParseError::UndeclaredSort {
                    pos: form.pos(),
                    name: to.to_string(),
                })?;
                system.epr_edges.push((f, t));
            }
            _ => {}
        }
    }
    Ok(system)
}

/// Parse a single-vocabulary formula under an existing signature.
pub fn parse_formula(text: &str, sig: &Arc<Signature>) -> Result<Formula, ParseError> {
    let vocab = TwoVocab::new(sig.clone());
    parse_formula_with_vocab(text, sig, &vocab)
}

/// As [`parse_formula`], reusing a prebuilt vocabulary (for primed-symbol
/// diagnostics).
pub fn parse_formula_with_vocab(
    text: &str,
    sig: &Signature,
    vocab: &TwoVocab,
) -> Result<Formula, ParseError> {
    let forms = read_all(text)?;
    if forms.len() != 1 {
        let pos = forms.get(1).map(|f| f.pos()).unwrap_or(Pos { line: 1, col: 1 });
        return Err(malformed(pos, "expected exactly one formula"));
    }
    let f = parse_formula_sexpr(&forms[0], sig, vocab, false)?;
    sort_checked(&f, sig, forms[0].pos())?;
    Ok(f)
}

fn sort_checked(f: &Formula, sig: &Signature, pos: Pos) -> Result<(), ParseError> {
    sort_check_env(f, sig, &mut Vec::new()).map_err(|err| ParseError::Sort { pos, err })
}

fn check_arity(items: &[SExpr], want: usize, pos: Pos) -> Result<(), ParseError> {
    if items.len() != want {
        return Err(malformed(
            pos,
            format!("expected {} items in form, got {}", want, items.len()),
        ));
    }
    Ok(())
}

fn expect_atom<'a>(
    items: &'a [SExpr],
    idx: usize,
    pos: Pos,
    what: &str,
) -> Result<&'a str, ParseError> {
    items
        .get(idx)
        .and_then(|i| i.as_atom())
        .ok_or_else(|| malformed(pos, format!("expected {what}")))
}

fn parse_sort(sig: &Signature, item: &Option<SExpr>, pos: Pos) -> Result<SortId, ParseError> {
    let name = item
        .as_ref()
        .and_then(|i| i.as_atom())
        .ok_or_else(|| malformed(pos, "expected sort name"))?;
    sig.sort_id(name).ok_or_else(|| ParseError::UndeclaredSort {
        pos,
        name: name.to_string(),
    })
}

fn parse_sort_list(
    sig: &Signature,
    item: Option<&SExpr>,
    pos: Pos,
) -> Result<Vec<SortId>, ParseError> {
    let list = item
        .and_then(|i| i.as_list())
        .ok_or_else(|| malformed(pos, "expected argument sort list"))?;
    list.iter()
        .map(|s| {
            let name = s
                .as_atom()
                .ok_or_else(|| malformed(s.pos(), "expected sort name"))?;
            sig.sort_id(name).ok_or_else(|| ParseError::UndeclaredSort {
                pos: s.pos(),
                name: name.to_string(),
            })
        })
        .collect()
}

fn parse_mutability(items: &[SExpr], idx: usize, pos: Pos) -> Result<Mutability, ParseError> {
    match expect_atom(items, idx, pos, "mutable|immutable")? {
        "mutable" => Ok(Mutability::Mutable),
        "immutable" => Ok(Mutability::Immutable),
        other => Err(malformed(pos, format!("expected mutable|immutable, got `{other}`"))),
    }
}

/// Either side of an `=` form: a term or a formula, decided by symbol kinds.
enum TermOrFormula {
    T(Term),
    F(Formula),
}

struct FormulaCx<'a> {
    sig: &'a Signature,
    vocab: &'a TwoVocab,
    allow_primed: bool,
    scope: Vec<Binder>,
}

impl FormulaCx<'_> {
    fn unknown_symbol(&self, name: &str, pos: Pos) -> ParseError {
        // a primed name whose unprimed form exists gets a targeted message
        if let Some(base) = name.strip_suffix('\'') {
            if !self.allow_primed && self.vocab.single().resolve(base).is_some() {
                return ParseError::PrimedOutsideTransition {
                    pos,
                    name: name.to_string(),
                };
            }
        }
        ParseError::UnknownSymbol {
            pos,
            name: name.to_string(),
        }
    }
}

fn parse_formula_sexpr(
    sexpr: &SExpr,
    sig: &Signature,
    vocab: &TwoVocab,
    allow_primed: bool,
) -> Result<Formula, ParseError> {
    let mut cx = FormulaCx {
        sig,
        vocab,
        allow_primed,
        scope: Vec::new(),
    };
    parse_f(sexpr, &mut cx)
}

fn parse_f(sexpr: &SExpr, cx: &mut FormulaCx) -> Result<Formula, ParseError> {
    match parse_term_or_formula(sexpr, cx)? {
        TermOrFormula::F(f) => Ok(f),
        TermOrFormula::T(_) => Err(malformed(sexpr.pos(), "expected a formula, found a term")),
    }
}

fn parse_t(sexpr: &SExpr, cx: &mut FormulaCx) -> Result<Term, ParseError> {
    match parse_term_or_formula(sexpr, cx)? {
        TermOrFormula::T(t) => Ok(t),
        TermOrFormula::F(_) => Err(malformed(sexpr.pos(), "expected a term, found a formula")),
    }
}

fn parse_term_or_formula(sexpr: &SExpr, cx: &mut FormulaCx) -> Result<TermOrFormula, ParseError> {
    match sexpr {
        SExpr::Atom(name, pos) => match name.as_str() {
            "true" => Ok(TermOrFormula::F(Formula::tt())),
            "false" => Ok(TermOrFormula::F(Formula::ff())),
            _ => {
                if cx.scope.iter().rev().any(|b| &b.name == name) {
                    return Ok(TermOrFormula::T(Term::Var(name.clone())));
                }
                match cx.sig.resolve(name) {
                    Some(SymbolRef::Const(c)) => Ok(TermOrFormula::T(Term::Const(c))),
                    Some(SymbolRef::Rel(r)) if cx.sig.rel_decl(r).args.is_empty() => {
                        Ok(TermOrFormula::F(Formula::Rel(r, vec![])))
                    }
                    Some(_) => Err(malformed(
                        *pos,
                        format!("symbol `{name}` cannot appear bare here"),
                    )),
                    None => Err(cx.unknown_symbol(name, *pos)),
                }
            }
        },
        SExpr::List(items, pos) => {
            let head = match items.first() {
                Some(h) => h,
                None => return Err(malformed(*pos, "empty form")),
            };
            let head_name = head
                .as_atom()
                .ok_or_else(|| malformed(head.pos(), "expected an operator or symbol"))?;
            match head_name {
                "and" | "or" => {
                    let parts = items[1..]
                        .iter()
                        .map(|i| parse_f(i, cx))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(TermOrFormula::F(if head_name == "and" {
                        Formula::And(parts)
                    } else {
                        Formula::Or(parts)
                    }))
                }
                "not" => {
                    check_arity(items, 2, *pos)?;
                    Ok(TermOrFormula::F(Formula::not(parse_f(&items[1], cx)?)))
                }
                "=>" => {
                    check_arity(items, 3, *pos)?;
                    Ok(TermOrFormula::F(Formula::implies(
                        parse_f(&items[1], cx)?,
                        parse_f(&items[2], cx)?,
                    )))
                }
                "=" => {
                    check_arity(items, 3, *pos)?;
                    let a = parse_term_or_formula(&items[1], cx)?;
                    let b = parse_term_or_formula(&items[2], cx)?;
                    match (a, b) {
                        (TermOrFormula::T(a), TermOrFormula::T(b)) => {
                            Ok(TermOrFormula::F(Formula::Eq(a, b)))
                        }
                        (TermOrFormula::F(a), TermOrFormula::F(b)) => {
                            Ok(TermOrFormula::F(Formula::iff(a, b)))
                        }
                        _ => Err(malformed(*pos, "`=` cannot mix a term with a formula")),
                    }
                }
                "forall" | "exists" => {
                    check_arity(items, 3, *pos)?;
                    let kind = if head_name == "forall" {
                        QuantKind::Forall
                    } else {
                        QuantKind::Exists
                    };
                    let binders = items[1]
                        .as_list()
                        .ok_or_else(|| malformed(items[1].pos(), "expected binder list"))?;
                    if binders.is_empty() {
                        return Err(malformed(items[1].pos(), "empty binder list"));
                    }
                    let mut parsed = Vec::new();
                    for b in binders {
                        let pair = b
                            .as_list()
                            .ok_or_else(|| malformed(b.pos(), "expected (var sort) binder"))?;
                        if pair.len() != 2 {
                            return Err(malformed(b.pos(), "expected (var sort) binder"));
                        }
                        let var = pair[0]
                            .as_atom()
                            .ok_or_else(|| malformed(pair[0].pos(), "expected variable name"))?;
                        let sort_name = pair[1]
                            .as_atom()
                            .ok_or_else(|| malformed(pair[1].pos(), "expected sort name"))?;
                        let sort =
                            cx.sig
                                .sort_id(sort_name)
                                .ok_or_else(|| ParseError::UndeclaredSort {
                                    pos: pair[1].pos(),
                                    name: sort_name.to_string(),
                                })?;
                        parsed.push(Binder {
                            name: var.to_string(),
                            sort,
                        });
                    }
                    for b in &parsed {
                        cx.scope.push(b.clone());
                    }
                    let body = parse_f(&items[2], cx);
                    for _ in &parsed {
                        cx.scope.pop();
                    }
                    let mut f = body?;
                    for b in parsed.into_iter().rev() {
                        f = Formula::Quant(kind, b, Box::new(f));
                    }
                    Ok(TermOrFormula::F(f))
                }
                _ => {
                    // relation atom or function application
                    match cx.sig.resolve(head_name) {
                        Some(SymbolRef::Rel(r)) => {
                            let args = items[1..]
                                .iter()
                                .map(|i| parse_t(i, cx))
                                .collect::<Result<Vec<_>, _>>()?;
                            Ok(TermOrFormula::F(Formula::Rel(r, args)))
                        }
                        Some(SymbolRef::Func(f)) => {
                            let args = items[1..]
                                .iter()
                                .map(|i| parse_t(i, cx))
                                .collect::<Result<Vec<_>, _>>()?;
                            Ok(TermOrFormula::T(Term::App(f, args)))
                        }
                        Some(SymbolRef::Const(_)) => Err(malformed(
                            head.pos(),
                            format!("constant `{head_name}` takes no arguments"),
                        )),
                        None => Err(cx.unknown_symbol(head_name, head.pos())),
                    }
                }
            }
        }
    }
}
