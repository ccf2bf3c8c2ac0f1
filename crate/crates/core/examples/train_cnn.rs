//! Train one network on a synthetic corpus, save the checkpoint, reload it
//! and check that the reloaded model scores the same.
//!
//! `cargo run --release --example train_cnn -- ["conv(4,3x3), pool(4x4,4), fc(16)"] [epochs]`

use std::error::Error;

use eegline::nn::{evaluate, infer_shapes, load_checkpoint, save_checkpoint, train, ModelConfig, TrainSettings};
use eegline::pipeline::{prepare_split, FEATURE_SHAPE};
use eegline::synth::{write_corpus, SynthSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let layers = args.next().unwrap_or_else(|| "conv(4,3x3), pool(4x4,4), fc(16)".into());
    let epochs = args.next().map(|e| e.parse()).transpose()?.unwrap_or(8);
    let config = ModelConfig::parse_layers(&layers, 0.01)?;
    let shapes = infer_shapes(&config, FEATURE_SHAPE)?;
    println!("{} on {FEATURE_SHAPE}", config.render());
    for s in &shapes {
        println!("  -> {s}");
    }

    let dir = tempfile::tempdir()?;
    let spec = SynthSpec { subjects: 4, ..Default::default() };
    write_corpus(&spec, &dir.path().join("edf"))?;
    let (_, train_set, test_set) = prepare_split(&dir.path().join("edf"), &dir.path().join("f.eegt"), 0.7, 1)?;
    println!("{} train / {} test trials", train_set.len(), test_set.len());

    let settings = TrainSettings { epochs, batch_size: 16, seed: 5, normalize: true };
    let (model, report) = train(&config, &train_set, &test_set, &settings)?;
    for e in &report.epochs {
        println!("epoch {:>2}  loss {:.4}  train {:.3}  val {:.3}", e.epoch, e.train_loss, e.train_acc, e.val_acc);
    }
    println!("best val {:.3} at epoch {:?}, {} parameters", report.best_val_acc, report.best_epoch, model.num_parameters());

    let path = dir.path().join("model.eegm");
    save_checkpoint(&model, &path)?;
    let reloaded = load_checkpoint(&path)?;
    println!(
        "checkpoint {} bytes, reloaded val {:.3}",
        std::fs::metadata(&path)?.len(),
        evaluate(&reloaded, &test_set)?
    );
    Ok(())
}
