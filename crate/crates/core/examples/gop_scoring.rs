//! Segment scores on a hand-made posteriorgram with a blurred transition.

use cagop::gop::{center_gop, entropy_profile, gop, tascore};
use cagop::model::{PhoneSegment, Posteriorgram};

fn main() -> cagop::Result<()> {
    // Phones: 0 = SIL, 1 = AA, 2 = B. Frames 3-4 are a B-to-AA transition.
    let pg = Posteriorgram::from_rows(
        &[
            vec![0.05, 0.05, 0.90],
            vec![0.05, 0.05, 0.90],
            vec![0.05, 0.10, 0.85],
            vec![0.20, 0.40, 0.40],
            vec![0.10, 0.60, 0.30],
            vec![0.05, 0.90, 0.05],
            vec![0.02, 0.95, 0.03],
        ],
        30.0,
    )?;
    println!("frame entropies (nats): {:.3?}", entropy_profile(&pg));

    let seg = PhoneSegment::new(1, 3, 4);
    let (ta, frames) = tascore(&pg, &seg)?;
    println!("AA over frames 3..7");
    println!("  GOP         {:.4}", gop(&pg, &seg)?);
    println!("  center GOP  {:.4}", center_gop(&pg, &seg)?);
    println!("  TAScore     {ta:.4}");
    println!("  weights     {:.3?}", frames.weights);
    Ok(())
}
