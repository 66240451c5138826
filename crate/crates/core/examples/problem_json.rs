//! Round trip of a star problem through the JSON schema and normalization.
use fpstar::{builtin_example, StarProblem};

fn main() -> fpstar::Result<()> {
    let p = builtin_example(2)?;
    let json = p.to_json()?;
    println!("{json}");

    let back = StarProblem::from_json(&json)?;
    back.validate()?;
    let n = back.normalize();
    println!("edges {}, horizon {}", n.num_edges(), n.horizon());
    for i in 0..n.num_edges() {
        let (x, t) = n.to_physical(i, 0.5, 0.5);
        println!("edge {}: normalized (0.5, 0.5) -> physical ({x}, {t})", i + 1);
    }

    let broken = r#"{"edges": [{"l": -1, "D": 1, "alpha": 1}], "T": 1,
        "data": {"rho0": ["0"], "rho_d": ["0"], "rho_T": ["0"], "f": ["0"]}}"#;
    if let Err(e) = StarProblem::from_json(broken).and_then(|p| p.validate()) {
        println!("rejected: {e}");
    }
    Ok(())
}
