//! Grounding closed first-order formulas over a fixed finite universe into
//! propositional SAT: one variable per relation instance, one-hot cells for
//! constant and function values, Tseitin auxiliaries for the connective and
//! quantifier expansion tree.

use std::sync::Arc;

use crate::logic::{Element, Formula, QuantKind, Signature, Structure, Term};
use crate::sat::{circuit_and, circuit_or, Budget, CVal as GV, Lit, SatInterface, SatResult, Solver, Var};

/// One SAT instance for a fixed signature and universe. Assertions can be
/// added incrementally; a model decodes back into a [`Structure`].
pub struct Grounder {
    sig: Arc<Signature>,
    universe: Vec<usize>,
    solver: Solver,
    rel_vars: Vec<Vec<Var>>,
    const_vars: Vec<Vec<Var>>,
    func_vars: Vec<Vec<Vec<Var>>>,
}

fn tuples_of(universe: &[usize], args: &[crate::logic::SortId]) -> Vec<Vec<Element>> {
    crate::logic::tuples(universe, args).collect()
}

impl Grounder {
    pub fn new(sig: Arc<Signature>, universe: Vec<usize>, budget: Budget) -> Grounder {
        let mut solver = Solver::with_budget(budget);
        let mut rel_vars = Vec::new();
        for r in sig.rel_ids() {
            let n = tuples_of(&universe, &sig.rel_decl(r).args).len();
            rel_vars.push((0..n).map(|_| solver.new_var()).collect());
        }
        // one-hot value cells for constants; symmetry reduction pins the
        // i-th constant of each sort to elements <= i
        let mut const_vars: Vec<Vec<Var>> = Vec::new();
        let mut sort_const_count = vec![0usize; sig.num_sorts()];
        for c in sig.const_ids() {
            let sort = sig.const_decl(c).sort;
            let n = universe[sort.0];
            let cells: Vec<Var> = (0..n).map(|_| solver.new_var()).collect();
            exactly_one(&mut solver, &cells);
            let rank = sort_const_count[sort.0];
            sort_const_count[sort.0] += 1;
            for (e, &cell) in cells.iter().enumerate() {
                if e > rank {
                    solver.add_clause(&[Lit::neg(cell)]);
                }
            }
            const_vars.push(cells);
        }
        let mut func_vars = Vec::new();
        for f in sig.func_ids() {
            let decl = sig.func_decl(f);
            let n_ret = universe[decl.ret.0];
            let mut per_tuple = Vec::new();
            for _ in tuples_of(&universe, &decl.args) {
                let cells: Vec<Var> = (0..n_ret).map(|_| solver.new_var()).collect();
                exactly_one(&mut solver, &cells);
                per_tuple.push(cells);
            }
            func_vars.push(per_tuple);
        }
        Grounder {
            sig,
            universe,
            solver,
            rel_vars,
            const_vars,
            func_vars,
        }
    }

    pub fn universe(&self) -> &[usize] {
        &self.universe
    }

    /// Ground a closed formula and assert it.
    pub fn assert_formula(&mut self, f: &Formula) {
        let mut env: Vec<(String, crate::logic::SortId, Element)> = Vec::new();
        match self.ground(f, &mut env) {
            GV::True => {}
            GV::False => self.solver.add_clause(&[]),
            GV::Lit(l) => self.solver.add_clause(&[l]),
        }
    }

    pub fn solve(&mut self) -> SatResult {
        self.solver.solve()
    }

    pub fn dump_dimacs(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        self.solver.dump_dimacs(w)
    }

    /// Decode the last model into a structure.
    pub fn decode(&self) -> Structure {
        let mut m = Structure::new(self.sig.clone(), self.universe.clone());
        for r in self.sig.rel_ids() {
            let args = self.sig.rel_decl(r).args.clone();
            for (i, tuple) in tuples_of(&self.universe, &args).iter().enumerate() {
                m.set_rel(r, tuple, self.solver.model_value(self.rel_vars[r.0][i]));
            }
        }
        for c in self.sig.const_ids() {
            let e = self.const_vars[c.0]
                .iter()
                .position(|&v| self.solver.model_value(v))
                .expect("one-hot constant cell");
            m.set_const(c, e);
        }
        for f in self.sig.func_ids() {
            let args = self.sig.func_decl(f).args.clone();
            for (i, tuple) in tuples_of(&self.universe, &args).iter().enumerate() {
                let e = self.func_vars[f.0][i]
                    .iter()
                    .position(|&v| self.solver.model_value(v))
                    .expect("one-hot function cell");
                m.set_func(f, tuple, e);
            }
        }
        m
    }

    fn and_gv(&mut self, parts: Vec<GV>) -> GV {
        circuit_and(&mut self.solver, parts)
    }

    fn or_gv(&mut self, parts: Vec<GV>) -> GV {
        circuit_or(&mut self.solver, parts)
    }

    fn ground(&mut self, f: &Formula, env: &mut Vec<(String, crate::logic::SortId, Element)>) -> GV {
        match f {
            Formula::And(fs) => {
                let parts = fs.iter().map(|g| self.ground(g, env)).collect();
                self.and_gv(parts)
            }
            Formula::Or(fs) => {
                let parts = fs.iter().map(|g| self.ground(g, env)).collect();
                self.or_gv(parts)
            }
            Formula::Not(g) => self.ground(g, env).negate(),
            Formula::Implies(a, b) => {
                let ga = self.ground(a, env).negate();
                let gb = self.ground(b, env);
                self.or_gv(vec![ga, gb])
            }
            Formula::Iff(a, b) => {
                let ga = self.ground(a, env);
                let gb = self.ground(b, env);
                let both = self.and_gv(vec![ga, gb]);
                let neither = self.and_gv(vec![ga.negate(), gb.negate()]);
                self.or_gv(vec![both, neither])
            }
            Formula::Eq(a, b) => {
                let va = self.term_values(a, env);
                let vb = self.term_values(b, env);
                let parts = va
                    .iter()
                    .zip(&vb)
                    .map(|(&x, &y)| self.and_gv(vec![x, y]))
                    .collect();
                self.or_gv(parts)
            }
            Formula::Rel(r, args) => {
                let arg_sorts = self.sig.rel_decl(*r).args.clone();
                let arg_vals: Vec<Vec<GV>> =
                    args.iter().map(|t| self.term_values(t, env)).collect();
                let tuples = tuples_of(&self.universe, &arg_sorts);
                let mut parts = Vec::with_capacity(tuples.len());
                for (i, tuple) in tuples.iter().enumerate() {
                    let mut cone: Vec<GV> = tuple
                        .iter()
                        .enumerate()
                        .map(|(k, &e)| arg_vals[k][e])
                        .collect();
                    cone.push(GV::Lit(Lit::pos(self.rel_vars[r.0][i])));
                    parts.push(self.and_gv(cone));
                }
                self.or_gv(parts)
            }
            Formula::Quant(kind, binder, body) => {
                let n = self.universe[binder.sort.0];
                let mut parts = Vec::with_capacity(n);
                for e in 0..n {
                    env.push((binder.name.clone(), binder.sort, e));
                    parts.push(self.ground(body, env));
                    env.pop();
                }
                match kind {
                    QuantKind::Forall => self.and_gv(parts),
                    QuantKind::Exists => self.or_gv(parts),
                }
            }
        }
    }

    /// `values[e]` is the truth of `t = e` over the term's sort.
    fn term_values(&mut self, t: &Term, env: &[(String, crate::logic::SortId, Element)]) -> Vec<GV> {
        match t {
            Term::Var(name) => {
                let (sort, val) = env
                    .iter()
                    .rev()
                    .find(|(n, _, _)| n == name)
                    .map(|(_, s, e)| (*s, *e))
                    .unwrap_or_else(|| panic!("unbound variable `{name}` in grounding"));
                (0..self.universe[sort.0])
                    .map(|e| if e == val { GV::True } else { GV::False })
                    .collect()
            }
            Term::Const(c) => self.const_vars[c.0]
                .iter()
                .map(|&v| GV::Lit(Lit::pos(v)))
                .collect(),
            Term::App(f, args) => {
                let decl = self.sig.func_decl(*f).clone();
                let arg_vals: Vec<Vec<GV>> =
                    args.iter().map(|a| self.term_values(a, env)).collect();
                let tuples = tuples_of(&self.universe, &decl.args);
                let n_ret = self.universe[decl.ret.0];
                (0..n_ret)
                    .map(|e| {
                        let mut parts = Vec::with_capacity(tuples.len());
                        for (i, tuple) in tuples.iter().enumerate() {
                            let mut cone: Vec<GV> = tuple
                                .iter()
                                .enumerate()
                                .map(|(k, &el)| arg_vals[k][el])
                                .collect();
                            cone.push(GV::Lit(Lit::pos(self.func_vars[f.0][i][e])));
                            parts.push(self.and_gv(cone));
                        }
                        self.or_gv(parts)
                    })
                    .collect()
            }
        }
    }
}

fn exactly_one(solver: &mut Solver, cells: &[Var]) {
    let all: Vec<Lit> = cells.iter().map(|&v| Lit::pos(v)).collect();
    solver.add_clause(&all);
    for i in 0..cells.len() {
        for j in (i + 1)..cells.len() {
            solver.add_clause(&[Lit::neg(cells[i]), Lit::neg(cells[j])]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{eval_closed, Mutability};
    use crate::syntax::{parse_formula, parse_system};

    #[test]
    fn grounds_and_decodes_simple_exists() {
        let sys = parse_system("(sort s)(relation r (s) mutable)").unwrap();
        let f = parse_formula("(exists ((x s)) (r x))", &sys.sig).unwrap();
        let mut g = Grounder::new(sys.sig.clone(), vec![2], Budget::default());
        g.assert_formula(&f);
        assert_eq!(g.solve(), SatResult::Sat);
        let m = g.decode();
        assert_eq!(eval_closed(&m, &f), Ok(true));
    }

    #[test]
    fn contradiction_is_unsat() {
        let sys = parse_system("(sort s)(relation r (s) mutable)").unwrap();
        let f = parse_formula("(exists ((x s)) (and (r x) (not (r x))))", &sys.sig).unwrap();
        let mut g = Grounder::new(sys.sig.clone(), vec![3], Budget::default());
        g.assert_formula(&f);
        assert_eq!(g.solve(), SatResult::Unsat);
    }

    #[test]
    fn functions_and_constants_decode_consistently() {
        let mut sig = crate::logic::Signature::new();
        let s = sig.add_sort("s").unwrap();
        let a = sig.add_const("a", s, Mutability::Immutable).unwrap();
        let fsym = sig.add_func("f", vec![s], s, Mutability::Immutable).unwrap();
        let sig = Arc::new(sig);
        // f(f(a)) = a and f(a) != a forces a 2-cycle
        let f = Formula::And(vec![
            Formula::Eq(
                Term::App(fsym, vec![Term::App(fsym, vec![Term::Const(a)])]),
                Term::Const(a),
            ),
            Formula::not(Formula::Eq(Term::App(fsym, vec![Term::Const(a)]), Term::Const(a))),
        ]);
        let mut g = Grounder::new(sig.clone(), vec![1], Budget::default());
        g.assert_formula(&f);
        assert_eq!(g.solve(), SatResult::Unsat);
        let mut g = Grounder::new(sig, vec![2], Budget::default());
        g.assert_formula(&f);
        assert_eq!(g.solve(), SatResult::Sat);
        let m = g.decode();
        assert_eq!(eval_closed(&m, &f), Ok(true));
    }

    #[test]
    fn symmetry_pinning_keeps_satisfiability() {
        // a != b is satisfiable at size 2 even with both constants pinned
        let sys =
            parse_system("(sort s)(constant a s immutable)(constant b s immutable)").unwrap();
        let f = parse_formula("(not (= a b))", &sys.sig).unwrap();
        let mut g = Grounder::new(sys.sig.clone(), vec![2], Budget::default());
        g.assert_formula(&f);
        assert_eq!(g.solve(), SatResult::Sat);
        let m = g.decode();
        // pinned: a = 0, and then b = 1
        assert_eq!(m.const_value(crate::logic::ConstId(0)), 0);
        assert_eq!(m.const_value(crate::logic::ConstId(1)), 1);
    }
}
