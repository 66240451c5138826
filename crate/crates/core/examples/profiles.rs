//! Writes state and control profiles of the Example 1 solution as CSV files.
use fpstar::kkt::{SolverConfig, SolverKind};
use fpstar::report::{emit_profiles, run_example, Resolution};

fn main() -> fpstar::Result<()> {
    let run = run_example(1, Resolution::new(2, 2, 4, 4), SolverKind::Newton, &SolverConfig::default())?;
    let dir = std::env::temp_dir().join("fpstar_profiles");
    let files = emit_profiles(&run.collocation, &run.solution, &[0.25, 0.75], &dir)?;
    for f in &files {
        let text = std::fs::read_to_string(f)?;
        let mid = text.lines().nth(101).unwrap_or_default();
        println!("{}: {} rows, x=0.5 row {mid}", f.display(), text.lines().count() - 1);
    }
    Ok(())
}
