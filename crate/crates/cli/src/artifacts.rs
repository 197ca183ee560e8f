use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hott_core::embeddings::load_embeddings_path;
use hott_core::{Container, Corpus, DistanceMatrix, EmbeddingTable, TopicCostMatrix, TopicModel};
use serde_json::{json, Value};

/// Settings that produced an artifact, stored alongside it as
/// `config.<key>` entries. Output paths and worker counts are left out so
/// reruns elsewhere produce identical bytes.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    entries: Vec<(String, String)>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        let mut c = RunConfig::default();
        c.set("command", command);
        c
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn set_path(&mut self, key: &str, path: &Path) -> &mut Self {
        self.set(key, path.display())
    }

    pub fn set_opt<T: Display>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        match value {
            Some(v) => self.set(key, v),
            None => self.set(key, "none"),
        }
    }

    pub fn apply(&self, c: &mut Container) {
        for (k, v) in &self.entries {
            c.push(&format!("config.{k}"), v);
        }
    }

    pub fn to_json(&self) -> Value {
        Value::Object(
            self.entries
                .iter()
                .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                .collect(),
        )
    }

    pub fn kv(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("config.{k}={v}\n")).collect()
    }
}

pub fn save_corpus(path: &Path, corpus: &Corpus, config: &RunConfig, dropped: &[String]) -> Result<()> {
    let doc = json!({
        "format": "hott-corpus",
        "version": 1,
        "config": config.to_json(),
        "dropped": dropped,
        "corpus": corpus,
    });
    let text = serde_json::to_string(&doc)?;
    fs::write(path, text).with_context(|| format!("writing corpus to {}", path.display()))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading corpus {} (create it with `hott ingest`)", path.display()))?;
    let mut doc: Value =
        serde_json::from_str(&text).with_context(|| format!("{} is not a corpus file", path.display()))?;
    if doc.get("format").and_then(Value::as_str) != Some("hott-corpus") {
        bail!("{} is not a corpus file written by `hott ingest`", path.display());
    }
    let corpus = doc
        .get_mut("corpus")
        .map(Value::take)
        .with_context(|| format!("{} has no corpus section", path.display()))?;
    let c: Corpus = serde_json::from_value(corpus).with_context(|| format!("corrupt corpus in {}", path.display()))?;
    // revalidate invariants that serde does not check
    Ok(Corpus::new(c.vocabulary, c.ids, c.documents, c.labels)?)
}

pub fn save_container(path: &Path, mut c: Container, config: &RunConfig) -> Result<()> {
    config.apply(&mut c);
    c.save(path).with_context(|| format!("writing {}", path.display()))
}

fn load_container(path: &Path, what: &str, producer: &str) -> Result<Container> {
    Container::load(path).with_context(|| format!("reading {what} {} (create it with `hott {producer}`)", path.display()))
}

pub fn load_model(path: &Path) -> Result<TopicModel> {
    Ok(TopicModel::from_container(load_container(path, "topic model", "fit-lda")?)?)
}

pub fn load_topic_costs(path: &Path) -> Result<TopicCostMatrix> {
    Ok(TopicCostMatrix::from_container(load_container(path, "topic costs", "topic-costs")?)?)
}

pub fn load_matrix(path: &Path) -> Result<DistanceMatrix> {
    Ok(DistanceMatrix::from_container(load_container(path, "distance matrix", "dist")?)?)
}

pub fn load_table(path: &Path, corpus: &Corpus) -> Result<EmbeddingTable> {
    let table = load_embeddings_path(path, &corpus.vocabulary)
        .with_context(|| format!("loading embeddings from {}", path.display()))?;
    eprintln!(
        "embeddings: dimension {}, vocabulary coverage {:.4}",
        table.dimension(),
        table.coverage()
    );
    Ok(table)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
