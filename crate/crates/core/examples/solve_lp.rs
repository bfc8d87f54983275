//! Solves a small LP and shows the infeasible and unbounded statuses.

use ndarray::array;
use regionlab::lp::{solve_lp, LinearProgram};

fn main() -> regionlab::Result<()> {
    // maximize 3a + 2b  s.t.  a + b <= 4,  a + 3b <= 6,  a, b >= 0
    let lp = LinearProgram::new(
        array![3.0, 2.0],
        array![[1.0, 1.0], [1.0, 3.0]],
        array![4.0, 6.0],
        vec![(0.0, f64::INFINITY); 2],
    )?;
    let sol = solve_lp(&lp)?;
    println!("{:?}: y = {:?}, value = {}", sol.status, sol.y.unwrap().to_vec(), sol.objective_value);

    let infeasible = LinearProgram::new(array![1.0], array![[1.0], [-1.0]], array![-1.0, -1.0], vec![(0.0, 10.0)])?;
    println!("contradictory rows: {:?}", solve_lp(&infeasible)?.status);

    let unbounded = LinearProgram::free(array![1.0, -1.0]);
    println!("free variables: {:?}", solve_lp(&unbounded)?.status);
    Ok(())
}
