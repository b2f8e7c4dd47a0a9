//! Random instances checked by sweep, LMI, falsifier and sufficiency runs.
//! Usage: `equivalence_suite [count] [seed]`.

use gkyp::harness::{run_equivalence_suite, SuiteConfig};

fn main() -> gkyp::Result<()> {
    let mut args = std::env::args().skip(1);
    let count = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let card = run_equivalence_suite(&SuiteConfig {
        count,
        seed,
        ..SuiteConfig::default()
    })?;
    for r in &card.records {
        println!(
            "{:3} n{} m{} {:?} {:?}: fdi {:+.3e}, t_star {:+.3e}{}",
            r.index,
            r.n,
            r.m,
            r.field,
            r.outcome,
            r.fdi_worst_eig,
            r.lmi_t_star,
            r.reason.as_deref().map(|s| format!(" ({s})")).unwrap_or_default()
        );
    }
    println!(
        "agree_holds {} agree_fails {} marginal {} anomalies {}; falsified {}, {} sufficiency trials with {} violations",
        card.agree_holds,
        card.agree_fails,
        card.marginal_skipped,
        card.anomalies,
        card.falsified,
        card.sufficiency_trials,
        card.sufficiency_violations
    );
    Ok(())
}
