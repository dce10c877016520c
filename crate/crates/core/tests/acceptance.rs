use lockstep::suite;

#[test]
fn acceptance_criteria() {
    let reports = suite::run_all();
    for rep in &reports {
        println!("{}", rep.line());
        for d in &rep.details {
            println!("    {d}");
        }
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.number).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
