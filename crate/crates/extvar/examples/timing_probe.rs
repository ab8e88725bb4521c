// quick probe: enumerate trees and time chain+family solving
use extvar::chain::{ChainSolver, SolverFlags};
use extvar::family::FamilySolver;
use extvar::types::{Pred, TypeExpr};
use std::time::Instant;

fn trees(n: usize, atoms: &[TypeExpr]) -> Vec<TypeExpr> {
    if n == 1 { return atoms.to_vec(); }
    let mut out = Vec::new();
    for k in 1..n {
        for l in trees(k, atoms) {
            for r in trees(n - k, atoms) {
                out.push(TypeExpr::coprod(l.clone(), r.clone()));
            }
        }
    }
    out
}

fn main() {
    let atoms: Vec<TypeExpr> = ["A", "B", "C", "D"].iter().map(|s| TypeExpr::atom(s)).collect();
    let by_size: Vec<Vec<TypeExpr>> = (1..=6).map(|n| trees(n, &atoms)).collect();
    let chain = ChainSolver::new(SolverFlags::default());
    let fam = FamilySolver::new();
    let start = Instant::now();
    let mut count = 0u64;
    let mut agree = 0u64;
    for a in 1..=6usize {
        let b_max = 7 - a;
        for f in &by_size[a - 1] {
            for bs in 1..=b_max {
                for g in &by_size[bs - 1] {
                    for pred in [
                        Pred::In(f.clone(), g.clone()),
                        Pred::Leq(f.clone(), g.clone()),
                        Pred::Minus(f.clone(), g.clone(), TypeExpr::var("h")),
                    ] {
                        let c = chain.solve(&pred, &[]).unwrap();
                        let t = fam.solve(&pred).unwrap();
                        count += 1;
                        if c == t { agree += 1; }
                    }
                }
            }
        }
    }
    println!("pairs*preds={} agree={} elapsed={:?}", count, agree, start.elapsed());
}
