//! Fits duration tolerances and shows how the mismatch moves the fused score.

use cagop::balance::{delta, fit_balance_table, BalanceConfig, DurationRecord};
use cagop::detector::{cagop, DEFAULT_BETA};

fn main() -> cagop::Result<()> {
    // Aligned vs predicted frames for phones 1 and 2 in two utterances.
    let records = [
        DurationRecord::new(
            vec![1, 1, 1, 2, 1, 1],
            vec![4.0, 5.0, 4.0, 3.0, 6.0, 4.0],
            vec![4.4, 4.1, 4.3, 2.8, 5.0, 4.5],
        )?,
        DurationRecord::new(vec![2, 2, 1], vec![2.0, 3.0, 5.0], vec![2.6, 2.2, 4.1])?,
    ];
    let table = fit_balance_table(
        &records,
        BalanceConfig {
            min_count: 5,
            ..BalanceConfig::default()
        },
    )?;
    println!("cells {:?}", table.entries);
    println!("per phone {:?}, global {:.3}", table.phone_backoff, table.global_backoff);

    let tascore = -0.8;
    for aligned in [4.0, 6.0, 12.0] {
        let t = table.lookup(1, 4.5);
        let d = delta(aligned, 4.2, t);
        println!(
            "aligned {aligned:>4} vs predicted 4.2, T {t:.3}: delta {d:+.3}, CaGOP {:.4}",
            cagop(tascore, d, DEFAULT_BETA)
        );
    }
    Ok(())
}
