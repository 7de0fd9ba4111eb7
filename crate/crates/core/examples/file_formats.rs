//! Writes a small synthetic corpus to disk and reads every file back.

use cagop::io;

fn main() -> cagop::Result<()> {
    let dir = std::env::temp_dir().join("cagop-example-corpus");
    cagop::cli::write_synth_corpus(&dir, 4, 4, 11)?;

    let phones = io::parse_phone_set(&io::read_text(&dir.join("phones.txt"))?, "phones.txt")?;
    let lexicon = io::parse_lexicon(&io::read_text(&dir.join("lexicon.txt"))?, &phones, "lexicon.txt")?;
    println!("{} phones, {} words", phones.len(), lexicon.entries.len());

    let capt = dir.join("capt");
    let transcripts = io::parse_transcripts(&io::read_text(&capt.join("text.txt"))?, "text.txt")?;
    let alignments = io::parse_alignments(&io::read_text(&capt.join("alignments.txt"))?, &phones, "alignments.txt")?;
    let annotations = io::parse_annotations(&io::read_text(&capt.join("annotations.txt"))?, "annotations.txt")?;
    for ((utt, text), al) in transcripts.iter().zip(&alignments) {
        let pg = io::read_posteriorgram(&capt.join("posteriors").join(format!("{utt}.cagpg")))?;
        let reference = io::text_to_phones(text, &lexicon)?;
        let flagged = annotations.phone_labels[utt].iter().filter(|&&m| m).count();
        println!(
            "{utt}: {} frames, {} reference phones, {} segments, {flagged} mispronounced, '{text}'",
            pg.num_frames(),
            reference.len(),
            al.alignment.segments.len()
        );
    }
    println!("raters: {:?}", annotations.raters());
    Ok(())
}
