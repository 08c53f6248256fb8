//! Finite-difference check of the full objective on random small models.

use langsep::gradcheck::{grad_check_suite, Problem};

fn main() -> langsep::Result<()> {
    let p = Problem::random(11);
    println!(
        "one problem: {} rows, {} parameters, margin mode {:?}",
        p.labels.len(),
        p.params.num_parameters(),
        p.hp.margin_mode
    );
    let single = p.check(1e-4)?;
    println!("  max relative error {:.2e} at {}[{}]", single.max_rel_error, single.worst_tensor, single.worst_index);

    for step in [1e-3, 1e-4, 1e-5, 1e-6] {
        let r = grad_check_suite(1, 20, step)?;
        println!("step {step:e}: max relative error {:.2e} over {} coordinates", r.max_rel_error, r.coordinates);
    }
    Ok(())
}
