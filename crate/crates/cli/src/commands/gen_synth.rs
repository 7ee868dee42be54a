//! Generate a synthetic corpus plus its sidecars and a covering embedding
//! file.

use std::path::Path;

use mmslu_core::data::save_corpus;
use mmslu_core::generator::{generate_synthetic, GeneratorConfig};
use mmslu_core::sidecar;
use mmslu_core::{Error, Result};

use super::shared::ensure_out_dir;

pub fn run(config_path: &Path, out_dir: &Path) -> Result<()> {
    let bytes = std::fs::read(config_path)
        .map_err(|e| Error::io(config_path.display().to_string(), e))?;
    let config: GeneratorConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Config(format!("{}: {}", config_path.display(), e)))?;
    run_with(&config, out_dir)
}

pub fn run_with(config: &GeneratorConfig, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let out = generate_synthetic(config)?;

    save_corpus(out_dir.join("corpus.jsonl"), &out.corpus)?;
    sidecar::write_utterance_rows(out_dir.join("acoustic.tsv"), &out.acoustic)?;
    sidecar::write_frame_rows(out_dir.join("visual_cabin.tsv"), &out.visual_cabin)?;
    sidecar::write_frame_rows(out_dir.join("visual_road.tsv"), &out.visual_road)?;

    let embeddings_path = out_dir.join("embeddings.txt");
    let mut text = String::new();
    for (token, vector) in &out.embedding_rows {
        text.push_str(token);
        for v in vector {
            text.push(' ');
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    std::fs::write(&embeddings_path, text)
        .map_err(|e| Error::io(embeddings_path.display().to_string(), e))?;

    let stats = out.corpus.stats();
    println!(
        "generated {} utterances ({} ambiguous) into {}",
        stats.n_utterances,
        out.ambiguous_ids.len(),
        out_dir.display()
    );
    println!("per-intent counts:");
    for (intent, count) in &stats.intent_counts {
        println!("  {:<16} {}", intent, count);
    }
    Ok(())
}
