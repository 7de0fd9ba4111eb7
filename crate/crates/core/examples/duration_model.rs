//! Trains the duration network on rule-generated durations, saves a
//! checkpoint and predicts durations at two speaking speeds.

use std::fs::File;
use std::io::BufWriter;

use cagop::duration::{read_checkpoint, train, write_checkpoint, DurationNetConfig};
use cagop::pipeline::DurationModel;
use cagop::synth::{duration_corpus, SynthInventory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inv = SynthInventory::new();
    let train_set = duration_corpus(&inv, 300, 1);
    let validation = duration_corpus(&inv, 60, 2);
    let cfg = DurationNetConfig {
        epochs: 15,
        ..DurationNetConfig::desk()
    };
    let (params, log) = train(&train_set, &validation, &cfg, inv.phone_set.len())?;
    for e in &log.epochs {
        println!("epoch {:>2}  train L1 {:.3}  validation MAE {:.3}", e.epoch, e.train_loss, e.validation_mae);
    }

    let path = std::env::temp_dir().join("cagop-example.ckpt");
    write_checkpoint(&mut BufWriter::new(File::create(&path)?), &params, &cfg)?;
    let (params, cfg) = read_checkpoint(&mut File::open(&path)?)?;
    let model = DurationModel::new(params, cfg);

    let word = inv.lexicon.keys().next().expect("lexicon is not empty");
    let phones = &inv.lexicon[word];
    for speed in [2.5, 5.0] {
        let frames = model.predict(phones, speed)?;
        println!("{word} at speed {speed}: {frames:.2?} frames");
    }
    Ok(())
}
