use extvar::chain::{ChainSolver, SolverFlags};
use extvar::family::FamilySolver;
use extvar::types::{Pred, TypeExpr};
use std::time::Instant;

fn trees(n: usize, atoms: &[TypeExpr], memo: &mut Vec<Vec<TypeExpr>>) -> Vec<TypeExpr> {
    if memo.len() >= n {
        return memo[n - 1].clone();
    }
    let out = if n == 1 {
        atoms.to_vec()
    } else {
        let mut out = Vec::new();
        for k in 1..n {
            let ls = trees(k, atoms, memo);
            let rs = trees(n - k, atoms, memo);
            for l in &ls {
                for r in &rs {
                    out.push(TypeExpr::coprod(l.clone(), r.clone()));
                }
            }
        }
        out
    };
    memo.push(out.clone());
    out
}

fn main() {
    let atoms: Vec<TypeExpr> = ["A", "B", "C", "D"].iter().map(|s| TypeExpr::atom(s)).collect();
    let mut memo = Vec::new();
    for n in 1..=6 {
        trees(n, &atoms, &mut memo);
    }
    let total = 6usize;
    for which in ["chain", "family"] {
        let chain = ChainSolver::new(SolverFlags::default());
        let fam = FamilySolver::new();
        let start = Instant::now();
        let mut count = 0u64;
        for a in 1..total {
            let b = total - a;
            for f in &memo[a - 1] {
                for g in &memo[b - 1] {
                    for pred in [
                        Pred::In(f.clone(), g.clone()),
                        Pred::Leq(f.clone(), g.clone()),
                        Pred::Minus(f.clone(), g.clone(), TypeExpr::var("h")),
                    ] {
                        count += 1;
                        if which == "chain" {
                            let _ = chain.solve(&pred, &[]).unwrap();
                        } else {
                            let _ = fam.solve(&pred).unwrap();
                        }
                    }
                }
            }
        }
        println!("{}: n={} elapsed={:?}", which, count, start.elapsed());
    }
}
