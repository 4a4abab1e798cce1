//! Per-taxel LCG seeds and the weight patterns they clock out.

use spts::firmware::{assign_seeds, generate_sensing_matrix, lcg_step, unipolar_voltage};

fn main() -> spts::Result<()> {
    let master = 1;
    let supply = 3.3;
    let table = assign_seeds(master, 100)?;
    let phi = generate_sensing_matrix(&table, 20, supply)?;

    let s = lcg_step(master);
    println!("first LCG iterate from seed {master}: {s}");
    println!("unipolar voltage {:.6} V", unipolar_voltage(s, supply));

    println!("first 3 rows, first 8 taxels (volts):");
    for i in 0..3 {
        let row: Vec<String> = phi.row(i)[..8].iter().map(|w| format!("{w:+.3}")).collect();
        println!("  row {i}: {}", row.join(" "));
    }

    let w = phi.weights();
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let max = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    println!("{}x{} matrix, mean weight {mean:+.4} V, max |w| {max:.4} V", phi.m(), phi.n());
    Ok(())
}
