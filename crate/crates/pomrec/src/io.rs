//! Dataset files, id maps and synthetic-world sidecars.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use pomrec_core::data::{parse_interactions, FilterConfig, LoadReport, TextFormat};
use pomrec_core::synth::SynthWorld;
use pomrec_core::InteractionStore;
use serde::Serialize;

pub fn load_dataset(path: &Path, format: &TextFormat, filter: &FilterConfig) -> Result<(InteractionStore, LoadReport)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading dataset {}", path.display()))?;
    parse_interactions(&text, format, filter).with_context(|| format!("parsing {}", path.display()))
}

/// `original_id<TAB>dense_id` lines, one per user or item.
pub fn id_map_text(labels: &[String]) -> String {
    let mut out = String::from("original_id\tdense_id\n");
    for (dense, original) in labels.iter().enumerate() {
        let _ = writeln!(out, "{original}\t{dense}");
    }
    out
}

pub fn write_id_maps(dir: &Path, store: &InteractionStore) -> Result<()> {
    fs::write(dir.join("user_ids.tsv"), id_map_text(store.user_labels()))?;
    fs::write(dir.join("item_ids.tsv"), id_map_text(store.item_labels()))?;
    Ok(())
}

/// The store as `user::item::1::timestamp` records, timestamps counting up
/// within each sequence, so loading the text back restores the order.
pub fn dataset_text(store: &InteractionStore) -> String {
    let mut out = String::new();
    for u in store.users() {
        for (t, &item) in store.sequence(u).iter().enumerate() {
            let _ = writeln!(out, "{}::{}::1::{t}", store.user_label(u), store.item_label(item));
        }
    }
    out
}

#[derive(Serialize)]
struct TruthDoc<'a> {
    num_interests: usize,
    /// Original item ids of every pool, in ring order.
    pools: Vec<Vec<&'a str>>,
    user_mixtures: &'a [Vec<f64>],
    user_centers: &'a [Vec<usize>],
    user_interests: &'a [Vec<usize>],
    spec: &'a pomrec_core::synth::SynthSpec,
}

pub fn ground_truth_json(world: &SynthWorld) -> Result<String> {
    let t = &world.truth;
    let doc = TruthDoc {
        num_interests: t.num_interests,
        pools: t
            .pools
            .iter()
            .map(|p| p.iter().map(|&i| world.store.item_label(i)).collect())
            .collect(),
        user_mixtures: &t.user_mixtures,
        user_centers: &t.user_centers,
        user_interests: &t.user_interests,
        spec: &world.spec,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}
