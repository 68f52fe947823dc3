//! External solver backend: emits bounded queries in SMT-LIB2 text over
//! subprocess stdin/stdout, runs a small portfolio with periodic restarts,
//! and parses models back by querying ground equalities.
//!
//! The universe bound is encoded with per-sort element constants and a
//! closure axiom (elements may collapse), so SAT/UNSAT agrees with the
//! built-in bounded solver at the same bounds.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::logic::{
    eval_closed, Binder, Element, Formula, QuantKind, Signature, SortId, Structure, Term,
    TwoStateStructure,
};

use super::{OracleModel, OracleResult, Query, QueryKind};

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    /// Solver command line; must speak SMT-LIB2 on stdin/stdout.
    pub command: Vec<String>,
    /// Number of parallel solver processes.
    pub portfolio: usize,
    /// Kill and restart processes after this many seconds.
    pub restart_secs: u64,
    /// Restart attempts before giving up with `Unknown("external-timeout")`.
    pub max_restarts: u32,
}

impl ExternalConfig {
    pub fn from_command(cmd: &str) -> ExternalConfig {
        ExternalConfig {
            command: cmd.split_whitespace().map(str::to_string).collect(),
            portfolio: 2,
            restart_secs: 30,
            max_restarts: 2,
        }
    }
}

/// Check `q` with the external backend; first definitive answer wins.
pub fn external_check(q: &Query, sig: &Arc<Signature>, cfg: &ExternalConfig) -> OracleResult {
    if cfg.command.is_empty() {
        return OracleResult::Unknown("external-unconfigured".to_string());
    }
    for _attempt in 0..=cfg.max_restarts {
        let (tx, rx) = mpsc::channel::<OracleResult>();
        let mut children: Vec<Arc<Mutex<Option<Child>>>> = Vec::new();
        let mut handles = Vec::new();
        for _ in 0..cfg.portfolio.max(1) {
            let slot: Arc<Mutex<Option<Child>>> = Arc::new(Mutex::new(None));
            children.push(slot.clone());
            let tx = tx.clone();
            let q = q.clone();
            let sig = sig.clone();
            let cmd = cfg.command.clone();
            handles.push(std::thread::spawn(move || {
                let r = run_one(&q, &sig, &cmd, &slot);
                let _ = tx.send(r);
            }));
        }
        drop(tx);
        let deadline = Instant::now() + Duration::from_secs(cfg.restart_secs);
        let mut outcome = None;
        let mut received = 0;
        while received < cfg.portfolio.max(1) {
            let left = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok(r) => {
                    received += 1;
                    if !matches!(r, OracleResult::Unknown(_)) {
                        outcome = Some(r);
                        break;
                    }
                }
                Err(_) => break, // timeout or all senders gone
            }
        }
        for slot in &children {
            if let Some(child) = slot.lock().unwrap().as_mut() {
                let _ = child.kill();
            }
        }
        for h in handles {
            let _ = h.join();
        }
        if let Some(r) = outcome {
            return r;
        }
    }
    OracleResult::Unknown("external-timeout".to_string())
}

fn run_one(
    q: &Query,
    sig: &Arc<Signature>,
    command: &[String],
    slot: &Arc<Mutex<Option<Child>>>,
) -> OracleResult {
    let mut child = match Command::new(&command[0])
        .args(&command[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return OracleResult::Unknown(format!("external-spawn: {e}")),
    };
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    *slot.lock().unwrap() = Some(child);
    let mut reader = BufReader::new(stdout);

    let script = emit_query(q, sig);
    if stdin.write_all(script.as_bytes()).is_err() {
        return OracleResult::Unknown("external-io".to_string());
    }
    let _ = stdin.flush();
    let verdict = match read_balanced(&mut reader) {
        Some(v) => v,
        None => return OracleResult::Unknown("external-io".to_string()),
    };
    match verdict.trim() {
        "unsat" => OracleResult::UnsatAtBound(q.bounds.clone()),
        "sat" => match extract_model(q, sig, &mut stdin, &mut reader) {
            Some(m) => {
                // re-validate against every assertion
                for f in &q.assertions {
                    if !eval_closed(&m, f).unwrap_or(false) {
                        return OracleResult::Unknown("model-parse".to_string());
                    }
                }
                let model = match q.kind {
                    QueryKind::OneState => OracleModel::One(m),
                    QueryKind::TwoState => OracleModel::Two(TwoStateStructure::new(m)),
                };
                OracleResult::Model(model)
            }
            None => OracleResult::Unknown("model-parse".to_string()),
        },
        other => OracleResult::Unknown(format!("external: {other}")),
    }
}

fn elem_name(sig: &Signature, s: SortId, e: usize) -> String {
    format!("{}!{}", sig.sort_name(s), e)
}

fn quote(name: &str) -> String {
    let simple = name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_+=<>.?/-".contains(c));
    if simple && !name.is_empty() {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn emit_query(q: &Query, sig: &Signature) -> String {
    let mut out = String::new();
    out.push_str("(set-option :print-success false)\n(set-logic ALL)\n");
    for (sid, name) in sig.sorts() {
        out.push_str(&format!("(declare-sort {} 0)\n", quote(name)));
        let b = q.bounds[sid.0];
        for e in 0..b {
            out.push_str(&format!(
                "(declare-fun {} () {})\n",
                quote(&elem_name(sig, sid, e)),
                quote(name)
            ));
        }
        let eqs: Vec<String> = (0..b)
            .map(|e| format!("(= x {})", quote(&elem_name(sig, sid, e))))
            .collect();
        out.push_str(&format!(
            "(assert (forall ((x {})) (or {})))\n",
            quote(name),
            eqs.join(" ")
        ));
    }
    for c in sig.const_ids() {
        let d = sig.const_decl(c);
        out.push_str(&format!(
            "(declare-fun {} () {})\n",
            quote(&d.name),
            quote(sig.sort_name(d.sort))
        ));
    }
    for r in sig.rel_ids() {
        let d = sig.rel_decl(r);
        let args: Vec<String> = d.args.iter().map(|&s| quote(sig.sort_name(s))).collect();
        out.push_str(&format!(
            "(declare-fun {} ({}) Bool)\n",
            quote(&d.name),
            args.join(" ")
        ));
    }
    for f in sig.func_ids() {
        let d = sig.func_decl(f);
        let args: Vec<String> = d.args.iter().map(|&s| quote(sig.sort_name(s))).collect();
        out.push_str(&format!(
            "(declare-fun {} ({}) {})\n",
            quote(&d.name),
            args.join(" "),
            quote(sig.sort_name(d.ret))
        ));
    }
    for f in &q.assertions {
        out.push_str("(assert ");
        write_smt(f, sig, &mut out);
        out.push_str(")\n");
    }
    out.push_str("(check-sat)\n");
    out
}

fn write_smt_term(t: &Term, sig: &Signature, out: &mut String) {
    match t {
        Term::Var(v) => out.push_str(&quote(v)),
        Term::Const(c) => out.push_str(&quote(&sig.const_decl(*c).name)),
        Term::App(f, args) => {
            out.push('(');
            out.push_str(&quote(&sig.func_decl(*f).name));
            for a in args {
                out.push(' ');
                write_smt_term(a, sig, out);
            }
            out.push(')');
        }
    }
}

fn write_smt(f: &Formula, sig: &Signature, out: &mut String) {
    match f {
        Formula::And(fs) if fs.is_empty() => out.push_str("true"),
        Formula::Or(fs) if fs.is_empty() => out.push_str("false"),
        Formula::And(fs) | Formula::Or(fs) => {
            out.push('(');
            out.push_str(if matches!(f, Formula::And(_)) { "and" } else { "or" });
            for g in fs {
                out.push(' ');
                write_smt(g, sig, out);
            }
            out.push(')');
        }
        Formula::Not(g) => {
            out.push_str("(not ");
            write_smt(g, sig, out);
            out.push(')');
        }
        Formula::Implies(a, b) => {
            out.push_str("(=> ");
            write_smt(a, sig, out);
            out.push(' ');
            write_smt(b, sig, out);
            out.push(')');
        }
        Formula::Iff(a, b) => {
            out.push_str("(= ");
            write_smt(a, sig, out);
            out.push(' ');
            write_smt(b, sig, out);
            out.push(')');
        }
        Formula::Eq(a, b) => {
            out.push_str("(= ");
            write_smt_term(a, sig, out);
            out.push(' ');
            write_smt_term(b, sig, out);
            out.push(')');
        }
        Formula::Rel(r, args) => {
            let name = quote(&sig.rel_decl(*r).name);
            if args.is_empty() {
                out.push_str(&name);
            } else {
                out.push('(');
                out.push_str(&name);
                for a in args {
                    out.push(' ');
                    write_smt_term(a, sig, out);
                }
                out.push(')');
            }
        }
        Formula::Quant(kind, Binder { name, sort }, body) => {
            out.push('(');
            out.push_str(match kind {
                QuantKind::Forall => "forall",
                QuantKind::Exists => "exists",
            });
            out.push_str(&format!(" (({} {})) ", quote(name), quote(sig.sort_name(*sort))));
            write_smt(body, sig, out);
            out.push(')');
        }
    }
}

/// Read one complete response: a bare atom line or a balanced s-expression
/// possibly spanning lines.
fn read_balanced(reader: &mut impl BufRead) -> Option<String> {
    let mut buf = String::new();
    let mut depth: i64 = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        for c in line.chars() {
            match c {
                '(' => depth += 1,
                ')' => depth -= 1,
                _ => {}
            }
        }
        buf.push_str(&line);
        if depth <= 0 && !buf.trim().is_empty() {
            return Some(buf);
        }
    }
}

/// Ask the solver for a boolean value of a ground SMT expression.
fn get_bool(
    expr: &str,
    stdin: &mut impl Write,
    reader: &mut impl BufRead,
) -> Option<bool> {
    writeln!(stdin, "(get-value ({expr}))").ok()?;
    stdin.flush().ok()?;
    let resp = read_balanced(reader)?;
    let forms = crate::syntax::read_all(&resp).ok()?;
    let pair = forms.first()?.as_list()?.first()?.as_list()?;
    match pair.last()?.as_atom()? {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// Rebuild a bounded structure by querying equalities between the element
/// constants (the closure axiom lets them collapse) and then the atoms over
/// class representatives.
fn extract_model(
    q: &Query,
    sig: &Arc<Signature>,
    stdin: &mut impl Write,
    reader: &mut impl BufRead,
) -> Option<Structure> {
    // per sort: classes of equal element constants
    let mut reps: Vec<Vec<usize>> = Vec::new(); // representative indices per sort
    let mut class_of: Vec<Vec<usize>> = Vec::new(); // element const -> class
    for (sid, _) in sig.sorts() {
        let b = q.bounds[sid.0];
        let mut class = vec![usize::MAX; b];
        let mut rep_list = Vec::new();
        for e in 0..b {
            let mut found = None;
            for (ci, &r) in rep_list.iter().enumerate() {
                let expr = format!(
                    "(= {} {})",
                    quote(&elem_name(sig, sid, e)),
                    quote(&elem_name(sig, sid, r))
                );
                if get_bool(&expr, stdin, reader)? {
                    found = Some(ci);
                    break;
                }
            }
            match found {
                Some(ci) => class[e] = ci,
                None => {
                    class[e] = rep_list.len();
                    rep_list.push(e);
                }
            }
        }
        reps.push(rep_list);
        class_of.push(class);
    }
    let universe: Vec<usize> = reps.iter().map(|r| r.len()).collect();
    let mut m = Structure::new(sig.clone(), universe.clone());
    let rep_name =
        |s: SortId, class: usize| -> String { quote(&elem_name(sig, s, reps[s.0][class])) };
    for c in sig.const_ids() {
        let sort = sig.const_decl(c).sort;
        let mut value = None;
        for class in 0..universe[sort.0] {
            let expr = format!("(= {} {})", quote(&sig.const_decl(c).name), rep_name(sort, class));
            if get_bool(&expr, stdin, reader)? {
                value = Some(class);
                break;
            }
        }
        m.set_const(c, value?);
    }
    for r in sig.rel_ids() {
        let args = sig.rel_decl(r).args.clone();
        let tuples: Vec<Vec<Element>> = crate::logic::tuples(&universe, &args).collect();
        for tuple in tuples {
            let name = quote(&sig.rel_decl(r).name);
            let expr = if tuple.is_empty() {
                name
            } else {
                let parts: Vec<String> = tuple
                    .iter()
                    .zip(&args)
                    .map(|(&cl, &s)| rep_name(s, cl))
                    .collect();
                format!("({} {})", name, parts.join(" "))
            };
            let v = get_bool(&expr, stdin, reader)?;
            m.set_rel(r, &tuple, v);
        }
    }
    for f in sig.func_ids() {
        let decl = sig.func_decl(f).clone();
        let tuples: Vec<Vec<Element>> = crate::logic::tuples(&universe, &decl.args).collect();
        for tuple in tuples {
            let parts: Vec<String> = tuple
                .iter()
                .zip(&decl.args)
                .map(|(&cl, &s)| rep_name(s, cl))
                .collect();
            let app = format!("({} {})", quote(&decl.name), parts.join(" "));
            let mut value = None;
            for class in 0..universe[decl.ret.0] {
                let expr = format!("(= {} {})", app, rep_name(decl.ret, class));
                if get_bool(&expr, stdin, reader)? {
                    value = Some(class);
                    break;
                }
            }
            m.set_func(f, &tuple, value?);
        }
    }
    Some(m)
}
