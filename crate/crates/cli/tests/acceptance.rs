use hodograph_cli::acceptance::{run_criterion, TITLES};

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for id in 1..=TITLES.len() as u32 {
        let c = run_criterion(id, 0);
        println!("{}", c.line());
        if !c.passed {
            failed.push(c.line());
        }
    }
    assert!(failed.is_empty(), "failed:\n{}", failed.join("\n"));
}
