//! Aligns a synthetic utterance and compares against its true segmentation.

use cagop::align::{align, alignment_log_score, AlignConfig};
use cagop::synth::{generate, SynthConfig, SynthInventory};

fn main() -> cagop::Result<()> {
    let inv = SynthInventory::new();
    let corpus = generate(&inv, &SynthConfig::native(1, 42));
    let utt = &corpus.utterances[0];
    let label = |p: usize| inv.phone_set.label(p).unwrap_or("?");

    let cfg = AlignConfig::for_phone_set(&inv.phone_set);
    let found = align(&utt.posteriorgram, &utt.reference, &cfg)?;
    println!("{} words: {}", utt.id, utt.words.join(" "));
    println!("{:>6} {:>12} {:>12}", "phone", "true", "aligned");
    for (truth, seg) in utt.alignment.segments.iter().zip(&found.segments) {
        println!(
            "{:>6} {:>5}+{:<6} {:>5}+{:<6}",
            label(seg.phone),
            truth.start,
            truth.length,
            seg.start,
            seg.length
        );
    }
    println!(
        "path log score: true {:.3}, aligned {:.3}",
        alignment_log_score(&utt.posteriorgram, &utt.alignment)?,
        alignment_log_score(&utt.posteriorgram, &found)?
    );
    Ok(())
}
