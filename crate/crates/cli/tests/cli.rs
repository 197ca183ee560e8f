use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hott_core::synthetic::{corpus_to_tsv, embeddings_to_text, planted_corpus, PlantedConfig};

struct Workspace {
    dir: tempfile::TempDir,
    used_words: usize,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let planted = planted_corpus(&PlantedConfig {
            docs_per_group: 8,
            words_per_group: 10,
            doc_length: 25,
            seed: 3,
            ..PlantedConfig::default()
        })
        .unwrap();
        fs::write(dir.path().join("corpus.tsv"), corpus_to_tsv(&planted.corpus)).unwrap();
        fs::write(
            dir.path().join("vectors.txt"),
            embeddings_to_text(&planted.table, &planted.corpus.vocabulary),
        )
        .unwrap();
        let used: std::collections::BTreeSet<usize> =
            planted.corpus.documents.iter().flat_map(|d| d.support.iter().copied()).collect();
        Workspace { dir, used_words: used.len() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_hott"))
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn prepare(&self) {
        self.ok(&[
            "ingest",
            "--input",
            "corpus.tsv",
            "--output",
            "corpus.json",
            "--train-fraction",
            "0.75",
            "--split-seed",
            "1",
            "--train-output",
            "train.json",
            "--test-output",
            "test.json",
            "--vocab-output",
            "vocab.txt",
        ]);
        self.ok(&[
            "fit-lda", "--corpus", "corpus.json", "--output", "model.bin", "--topics", "4", "--iterations", "50",
            "--seed", "2",
        ]);
        self.ok(&[
            "topic-costs",
            "--model",
            "model.bin",
            "--embeddings",
            "vectors.txt",
            "--corpus",
            "corpus.json",
            "--output",
            "costs.bin",
            "--topic-words",
            "5",
        ]);
    }
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn full_pipeline() {
    let w = Workspace::new();
    w.prepare();
    assert_eq!(fs::read_to_string(w.path("vocab.txt")).unwrap().lines().count(), w.used_words);

    w.ok(&[
        "dist", "--corpus", "corpus.json", "--metric", "hott", "--model", "model.bin", "--topic-costs", "costs.bin",
        "--output", "hott.bin", "--csv", "hott.csv",
    ]);
    w.ok(&[
        "dist", "--corpus", "corpus.json", "--metric", "wmd", "--embeddings", "vectors.txt", "--output", "wmd.bin",
    ]);
    let csv = fs::read_to_string(w.path("hott.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33);

    let m = w.ok(&["mantel", "--a", "hott.bin", "--b", "wmd.bin", "--permutations", "99"]);
    assert!(m.contains("mantel_r=") && m.contains("frobenius="), "{m}");

    for metric in ["hott", "nbow", "lsi", "lda", "wmd-t", "rwmd", "tfidf"] {
        let report = w.ok(&[
            "knn", "--train", "train.json", "--test", "test.json", "--metric", metric, "--model", "model.bin",
            "--topic-costs", "costs.bin", "--embeddings", "vectors.txt", "--lsi-dim", "4", "--k", "1..5", "odd",
        ]);
        assert!(report.contains("error_k5="), "{report}");
        assert!(report.contains("config.command=knn"), "{report}");
    }

    let b = w.ok(&[
        "bounds", "--corpus", "corpus.json", "--model", "model.bin", "--embeddings", "vectors.txt", "--pairs", "20",
        "--csv", "bounds.csv",
    ]);
    assert!(b.contains("all_hold_1e-6=true"), "{b}");
    assert_eq!(fs::read_to_string(w.path("bounds.csv")).unwrap().lines().count(), 21);

    let bench = w.ok(&[
        "bench", "--corpus", "corpus.json", "--metric", "rwmd", "--embeddings", "vectors.txt", "--pairs", "10",
    ]);
    assert!(bench.contains("pairs_per_second=") && bench.contains("machine="), "{bench}");
}

#[test]
fn artifacts_record_configuration_and_are_reproducible() {
    let w = Workspace::new();
    w.prepare();
    let args = |out: &'static str, workers: &'static str| {
        vec![
            "--workers", workers, "dist", "--corpus", "test.json", "--metric", "hoftt", "--model", "model.bin",
            "--topic-costs", "costs.bin", "--output", out,
        ]
    };
    w.ok(&args("a.bin", "1"));
    w.ok(&args("b.bin", "4"));
    let a = read(&w.path("a.bin"));
    assert_eq!(a, read(&w.path("b.bin")));
    let header = String::from_utf8_lossy(&a[..a.len().min(4000)]).to_string();
    for key in ["config.command=dist", "config.metric=hoftt", "config.seed=0", "config.infer_iterations=50"] {
        assert!(header.contains(key), "missing {key}");
    }
    let model = read(&w.path("model.bin"));
    assert!(String::from_utf8_lossy(&model[..2000]).contains("config.seed=2"));
}

#[test]
fn missing_prerequisites_are_named() {
    let w = Workspace::new();
    w.prepare();
    let out = w.run(&["dist", "--corpus", "corpus.json", "--metric", "hott", "--model", "model.bin", "--output", "x.bin"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--topic-costs") && err.contains("hott topic-costs"), "{err}");
    assert_eq!(err.lines().count(), 1, "{err}");

    let out = w.run(&["dist", "--corpus", "corpus.json", "--metric", "wmd", "--output", "x.bin"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--embeddings"));

    let out = w.run(&["dist", "--corpus", "nope.json", "--metric", "nbow", "--output", "x.bin"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("hott ingest"));

    let out = w.run(&["dist", "--bogus"]);
    assert!(!out.status.success());
}
