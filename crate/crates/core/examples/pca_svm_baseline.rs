//! PCA followed by a linear SVM on flattened feature tensors.
//!
//! `cargo run --release --example pca_svm_baseline -- [k]`

use std::error::Error;

use eegline::baseline::{run_pca_svm, BaselineOptions, SvmSettings};
use eegline::pipeline::prepare_split;
use eegline::synth::{write_corpus, SynthSpec};

fn main() -> Result<(), Box<dyn Error>> {
    let k = std::env::args().nth(1).map(|k| k.parse()).transpose()?.unwrap_or(50);
    let dir = tempfile::tempdir()?;
    let spec = SynthSpec { subjects: 6, ..Default::default() };
    write_corpus(&spec, &dir.path().join("edf"))?;
    let (manifest, train_set, test_set) = prepare_split(&dir.path().join("edf"), &dir.path().join("f.eegt"), 0.7, 1)?;
    println!("{} train / {} test, {} features each", train_set.len(), test_set.len(), train_set.sample_shape().size());

    for reg in [1e-2, 1e-4] {
        let options = BaselineOptions { k, svm: SvmSettings { regularization: reg, ..Default::default() }, ..Default::default() };
        let report = run_pca_svm(&train_set, &test_set, &manifest.id, &options)?;
        println!(
            "k {} (kept {}{}), lambda {reg:e}: train {:.3}, test {:.3}",
            report.k,
            report.components,
            if report.rank_deficient { ", rank deficient" } else { "" },
            report.train_accuracy,
            report.test_accuracy
        );
    }
    Ok(())
}
