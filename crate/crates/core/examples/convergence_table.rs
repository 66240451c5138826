//! Error table over refinement levels for a built-in example.
//!
//! `cargo run --release --example convergence_table -- 2 1,2,3`
use fpstar::kkt::{SolverConfig, SolverKind};
use fpstar::report::table_sweep;

fn main() -> fpstar::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let levels: Vec<u32> = args
        .next()
        .map(|s| s.split(',').filter_map(|v| v.parse().ok()).collect())
        .unwrap_or_else(|| vec![1, 2]);
    let table = table_sweep(id, &levels, 4, SolverKind::Sweep, &SolverConfig::default())?;
    print!("{}", table.render());
    println!();
    print!("{}", table.to_csv());
    Ok(())
}
