use shrinker::exec::Execution;
use shrinker_cli::acceptance;

#[test]
fn all_criteria() {
    let outcomes = acceptance::run_all(&[], Execution::default_policy());
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed()).map(|o| o.id).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
