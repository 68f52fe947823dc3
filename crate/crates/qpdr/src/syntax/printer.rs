//! Canonical formula printing. `parse_formula(print_formula(f))` yields a
//! structurally equal formula.

use crate::logic::{Formula, QuantKind, Signature, Term};

pub fn print_formula(f: &Formula, sig: &Signature) -> String {
    let mut out = String::new();
    write_formula(f, sig, &mut out);
    out
}

pub fn print_term(t: &Term, sig: &Signature) -> String {
    let mut out = String::new();
    write_term(t, sig, &mut out);
    out
}

fn write_term(t: &Term, sig: &Signature, out: &mut String) {
    match t {
        Term::Var(v) => out.push_str(v),
        Term::Const(c) => out.push_str(&sig.const_decl(*c).name),
        Term::App(f, args) => {
            out.push('(');
            out.push_str(&sig.func_decl(*f).name);
            for a in args {
                out.push(' ');
                write_term(a, sig, out);
            }
            out.push(')');
        }
    }
}

fn write_formula(f: &Formula, sig: &Signature, out: &mut String) {
    match f {
        Formula::And(fs) | Formula::Or(fs) => {
            out.push('(');
            out.push_str(if matches!(f, Formula::And(_)) {
                "and"
            } else {
                "or"
            });
            for g in fs {
                out.push(' ');
                write_formula(g, sig, out);
            }
            out.push(')');
        }
        Formula::Not(g) => {
            out.push_str("(not ");
            write_formula(g, sig, out);
            out.push(')');
        }
        Formula::Implies(a, b) => {
            out.push_str("(=> ");
            write_formula(a, sig, out);
            out.push(' ');
            write_formula(b, sig, out);
            out.push(')');
        }
        Formula::Iff(a, b) => {
            out.push_str("(= ");
            write_formula(a, sig, out);
            out.push(' ');
            write_formula(b, sig, out);
            out.push(')');
        }
        Formula::Eq(a, b) => {
            out.push_str("(= ");
            write_term(a, sig, out);
            out.push(' ');
            write_term(b, sig, out);
            out.push(')');
        }
        Formula::Rel(r, args) => {
            let name = &sig.rel_decl(*r).name;
            if args.is_empty() {
                out.push_str(name);
            } else {
                out.push('(');
                out.push_str(name);
                for a in args {
                    out.push(' ');
                    write_term(a, sig, out);
                }
                out.push(')');
            }
        }
        Formula::Quant(kind, _, _) => {
            // group consecutive binders of the same kind
            let mut binders = Vec::new();
            let mut body = f;
            while let Formula::Quant(k, b, inner) = body {
                if k != kind {
                    break;
                }
                binders.push(b);
                body = inner;
            }
            out.push('(');
            out.push_str(match kind {
                QuantKind::Forall => "forall",
                QuantKind::Exists => "exists",
            });
            out.push_str(" (");
            for (i, b) in binders.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push('(');
                out.push_str(&b.name);
                out.push(' ');
                out.push_str(sig.sort_name(b.sort));
                out.push(')');
            }
            out.push_str(") ");
            write_formula(body, sig, out);
            out.push(')');
        }
    }
}
