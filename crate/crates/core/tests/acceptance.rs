use blowup_core::acceptance::CRITERIA;

fn main() {
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let outcome = c.run();
        println!("{}", outcome.line());
        if !outcome.passed {
            failed.push(outcome.id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: {} failing criteria: {failed:?}", failed.len());
        std::process::exit(1);
    }
    println!("acceptance: all criteria pass");
}
