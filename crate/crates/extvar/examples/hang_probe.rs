use extvar::chain::{ChainSolver, SolverFlags};
use extvar::family::FamilySolver;
use extvar::types::{Pred, TypeExpr};

fn main() {
    let a = TypeExpr::atom("A");
    let b = TypeExpr::atom("B");
    let chain = ChainSolver::new(SolverFlags::default());
    let fam = FamilySolver::new();
    println!("start");
    let p = Pred::In(a.clone(), b.clone());
    println!("chain In A B = {:?}", chain.solve(&p, &[]));
    println!("fam In A B = {:?}", fam.solve(&p));
    let p = Pred::Minus(TypeExpr::coprod(a.clone(), b.clone()), a.clone(), TypeExpr::var("h"));
    println!("chain minus = {:?}", chain.solve(&p, &[]));
    println!("fam minus = {:?}", fam.solve(&p));
    println!("done");
}
