use std::fs::File;
use std::io::{BufReader, BufWriter};

use anyhow::{anyhow, bail, ensure, Context, Result};
use hott_core::corpus::{build_vocabulary, read_corpus, split_corpus};
use hott_core::distances::cross_distances;
use hott_core::eval::{benchmark_throughput, frobenius_diff, knn_evaluate, mantel, sample_pairs, BoundSummary};
use hott_core::topics::corpus_proportions;
use hott_core::{
    fit_lda, pairwise_matrix, topic_cost_matrix, BoundChecker, BoundReport, Corpus, EmbeddingTable, GroundPower,
    LdaConfig, Metric, PreparedMetric, SplitMode, TopicCostMatrix, TopicModel, VectorKind, VectorMethod, VectorModel,
};
use ndarray::{concatenate, Array2, Axis};

use crate::artifacts::{
    load_corpus, load_matrix, load_model, load_table, load_topic_costs, save_container, save_corpus, write_text,
    RunConfig,
};
use crate::{
    BenchArgs, BoundsArgs, Command, DistArgs, FitLdaArgs, IngestArgs, KnnArgs, MantelArgs, MetricArgs, MetricName,
    TopicCostsArgs, VectorDistance,
};

const DEFAULT_LSI_DIM: usize = 70;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::FitLda(a) => fit(a),
        Command::TopicCosts(a) => topic_costs(a),
        Command::Dist(a) => dist(a),
        Command::Knn(a) => knn(a),
        Command::Mantel(a) => mantel_cmd(a),
        Command::Bounds(a) => bounds(a),
        Command::Bench(a) => bench(a),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let raw = read_corpus(BufReader::new(file), !a.keep_case)?;
    let vocab = build_vocabulary(&raw, a.min_doc_freq, a.max_vocab.unwrap_or(usize::MAX))?;
    let (corpus, dropped) = Corpus::from_raw(&raw, vocab)?;
    for id in &dropped {
        eprintln!("dropped {id}: no in-vocabulary tokens");
    }
    ensure!(!corpus.is_empty(), "every document was empty after vocabulary filtering");

    let mut cfg = RunConfig::new("ingest");
    cfg.set_path("input", &a.input)
        .set("min_doc_freq", a.min_doc_freq)
        .set_opt("max_vocab", a.max_vocab)
        .set("lowercase", !a.keep_case);
    save_corpus(&a.output, &corpus, &cfg, &dropped)?;
    if let Some(path) = &a.vocab_output {
        write_text(path, &corpus.vocabulary.export())?;
    }
    eprintln!(
        "ingested {} documents, {} words, {} classes",
        corpus.len(),
        corpus.vocabulary.len(),
        corpus.class_set.len()
    );

    if let (Some(f), Some(train_path), Some(test_path)) = (a.train_fraction, &a.train_output, &a.test_output) {
        let mode = match a.split_seed {
            Some(seed) => SplitMode::Shuffled { seed },
            None => SplitMode::InOrder,
        };
        let (train, test) = split_corpus(&corpus, f, mode)?;
        cfg.set("train_fraction", f).set_opt("split_seed", a.split_seed);
        let mut train_cfg = cfg.clone();
        train_cfg.set("split", "train");
        let mut test_cfg = cfg;
        test_cfg.set("split", "test");
        save_corpus(train_path, &train, &train_cfg, &dropped)?;
        save_corpus(test_path, &test, &test_cfg, &dropped)?;
        eprintln!("split into {} train and {} test documents", train.len(), test.len());
    }
    Ok(())
}

fn fit(a: FitLdaArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let mut lda = LdaConfig::new(a.topics);
    if let Some(alpha) = a.alpha {
        lda.alpha = alpha;
    }
    lda.beta = a.beta;
    lda.iterations = a.iterations;
    lda.seed = a.seed;
    let model = fit_lda(&corpus, &lda)?;
    let mut cfg = RunConfig::new("fit-lda");
    cfg.set_path("corpus", &a.corpus)
        .set("topics", a.topics)
        .set("alpha", format!("{:?}", lda.alpha))
        .set("beta", format!("{:?}", lda.beta))
        .set("iterations", lda.iterations)
        .set("seed", lda.seed);
    save_container(&a.output, model.to_container(), &cfg)?;
    eprintln!("fitted {} topics on {} documents", model.num_topics, corpus.len());
    Ok(())
}

fn check_model_matches(model: &TopicModel, corpus: &Corpus) -> Result<()> {
    ensure!(
        model.vocab_size == corpus.vocabulary.len(),
        "topic model covers {} words but the corpus vocabulary has {}; fit the model on a corpus from the same ingest run",
        model.vocab_size,
        corpus.vocabulary.len()
    );
    Ok(())
}

fn topic_costs(a: TopicCostsArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let corpus = load_corpus(&a.corpus)?;
    check_model_matches(&model, &corpus)?;
    let table = load_table(&a.embeddings, &corpus)?;
    let power = GroundPower::from_int(a.ground_power)?;
    let costs = topic_cost_matrix(&model, &table, a.topic_words, power)?;
    let mut cfg = RunConfig::new("topic-costs");
    cfg.set_path("model", &a.model)
        .set_path("embeddings", &a.embeddings)
        .set_path("corpus", &a.corpus)
        .set("topic_words", a.topic_words)
        .set("ground_power", a.ground_power);
    save_container(&a.output, costs.to_container(), &cfg)?;
    eprintln!("topic costs for {} topics written", costs.num_topics());
    Ok(())
}

/// Inputs a metric needs, loaded once and borrowed by the prepared metric.
struct MetricInputs {
    metric: Metric,
    table: Option<EmbeddingTable>,
    model: Option<TopicModel>,
    costs: Option<TopicCostMatrix>,
}

fn resolve_metric(args: &MetricArgs, model: Option<&TopicModel>) -> Result<Metric> {
    let power = GroundPower::from_int(args.ground_power)?;
    let kind = match args.vector_distance {
        VectorDistance::Euclidean => VectorKind::Euclidean,
        VectorDistance::Cosine => VectorKind::Cosine,
    };
    let vector = |method| Metric::Vector { method, kind };
    Ok(match args.metric {
        MetricName::Wmd => Metric::Wmd { power },
        MetricName::WmdT => Metric::WmdTruncated {
            k: args.doc_words,
            power,
        },
        MetricName::Rwmd => Metric::Rwmd { power },
        MetricName::Hott => Metric::Hott,
        MetricName::Hoftt => Metric::Hoftt,
        MetricName::Nbow => vector(VectorMethod::Nbow),
        MetricName::Tfidf => vector(VectorMethod::Tfidf),
        MetricName::Lda => vector(VectorMethod::Lda),
        MetricName::Lsi => vector(VectorMethod::Lsi {
            dim: args
                .lsi_dim
                .or(model.map(|m| m.num_topics))
                .unwrap_or(DEFAULT_LSI_DIM),
        }),
    })
}

fn metric_label(name: MetricName) -> &'static str {
    match name {
        MetricName::Wmd => "wmd",
        MetricName::WmdT => "wmd-t",
        MetricName::Rwmd => "rwmd",
        MetricName::Hott => "hott",
        MetricName::Hoftt => "hoftt",
        MetricName::Nbow => "nbow",
        MetricName::Tfidf => "tfidf",
        MetricName::Lsi => "lsi",
        MetricName::Lda => "lda",
    }
}

fn load_metric_inputs(args: &MetricArgs, corpus: &Corpus) -> Result<MetricInputs> {
    let name = metric_label(args.metric);
    let needs_model = matches!(args.metric, MetricName::Hott | MetricName::Hoftt | MetricName::Lda);
    let model = match (&args.model, needs_model) {
        (Some(path), _) => Some(load_model(path)?),
        (None, true) => bail!("metric {name} needs a topic model: pass --model <file> (create it with `hott fit-lda`)"),
        (None, false) => None,
    };
    if let Some(m) = &model {
        check_model_matches(m, corpus)?;
    }
    let metric = resolve_metric(args, model.as_ref())?;

    let table = if metric.needs_embeddings() {
        let path = args.embeddings.as_ref().ok_or_else(|| {
            anyhow!("metric {name} needs word vectors: pass --embeddings <file> (`word v1 v2 ...` per line)")
        })?;
        Some(load_table(path, corpus)?)
    } else {
        None
    };
    let costs = if metric.needs_topic_costs() {
        let path = args.topic_costs.as_ref().ok_or_else(|| {
            anyhow!("metric {name} needs a topic cost matrix: pass --topic-costs <file> (create it with `hott topic-costs`)")
        })?;
        let costs = load_topic_costs(path)?;
        let t = model.as_ref().map(|m| m.num_topics).unwrap_or(0);
        ensure!(
            costs.num_topics() == t,
            "topic cost matrix has {} topics but the model has {t}; recompute it with `hott topic-costs`",
            costs.num_topics()
        );
        Some(costs)
    } else {
        None
    };
    Ok(MetricInputs {
        metric,
        table,
        model,
        costs,
    })
}

fn record_metric(cfg: &mut RunConfig, args: &MetricArgs, metric: Metric, costs: Option<&TopicCostMatrix>) {
    cfg.set("metric", metric)
        .set_opt("embeddings", args.embeddings.as_ref().map(|p| p.display()))
        .set_opt("model", args.model.as_ref().map(|p| p.display()))
        .set_opt("topic_costs", args.topic_costs.as_ref().map(|p| p.display()))
        .set("ground_power", args.ground_power)
        .set("doc_words", args.doc_words)
        .set_opt("lsi_dim", args.lsi_dim)
        .set("vector_distance", format!("{:?}", args.vector_distance).to_lowercase())
        .set("infer_iterations", args.infer_iterations)
        .set("seed", args.seed);
    if let Some(c) = costs {
        cfg.set("topic_words", c.truncation_k)
            .set("topic_ground_power", c.ground_power.as_int());
    }
}

/// Proportions of every document, stacked in corpus order. Documents of the
/// model's training corpus reuse the fitted rows.
fn stacked_proportions(corpora: &[&Corpus], model: &TopicModel, args: &MetricArgs) -> Result<Array2<f64>> {
    let parts = corpora
        .iter()
        .enumerate()
        .map(|(i, c)| corpus_proportions(c, model, args.infer_iterations, args.seed.wrapping_add(i as u64)))
        .collect::<hott_core::Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views)?)
}

/// Binds the metric to the concatenation of `corpora`. Vector
/// representations are fitted on the first corpus.
fn prepare<'a>(inputs: &'a MetricInputs, args: &MetricArgs, corpora: &[&Corpus]) -> Result<PreparedMetric<'a>> {
    let ids: Vec<String> = corpora.iter().flat_map(|c| c.ids.iter().cloned()).collect();
    let prepared = match inputs.metric {
        Metric::Wmd { .. } | Metric::WmdTruncated { .. } | Metric::Rwmd { .. } => {
            PreparedMetric::words(inputs.metric, inputs.table.as_ref().expect("loaded"), corpora)?
        }
        Metric::Hott | Metric::Hoftt => {
            let model = inputs.model.as_ref().expect("loaded");
            let props = stacked_proportions(corpora, model, args)?;
            PreparedMetric::topics(
                inputs.metric == Metric::Hott,
                inputs.costs.as_ref().expect("loaded"),
                ids,
                props,
            )?
        }
        Metric::Vector {
            method: VectorMethod::Lda,
            kind,
        } => {
            let props = stacked_proportions(corpora, inputs.model.as_ref().expect("loaded"), args)?;
            PreparedMetric::vectors(VectorMethod::Lda, kind, ids, props)?
        }
        Metric::Vector { method, kind } => {
            let fitted = VectorModel::fit(corpora[0], method)?;
            let parts = corpora
                .iter()
                .map(|c| fitted.transform(c).map(|r| r.vectors))
                .collect::<hott_core::Result<Vec<_>>>()?;
            let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
            PreparedMetric::vectors(method, kind, ids, concatenate(Axis(0), &views)?)?
        }
    };
    Ok(prepared)
}

fn dist(a: DistArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let inputs = load_metric_inputs(&a.metric, &corpus)?;
    let prepared = prepare(&inputs, &a.metric, &[&corpus])?;
    let (matrix, throughput) = pairwise_matrix(&prepared, &corpus.labels)?;

    let mut cfg = RunConfig::new("dist");
    cfg.set_path("corpus", &a.corpus);
    record_metric(&mut cfg, &a.metric, inputs.metric, inputs.costs.as_ref());
    save_container(&a.output, matrix.to_container(), &cfg)?;
    if let Some(path) = &a.csv {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        matrix.write_csv(BufWriter::new(file))?;
    }
    eprintln!(
        "metric={} documents={} pairs={} seconds={:.6} pairs_per_second={:.3}",
        matrix.metric,
        matrix.len(),
        throughput.pairs,
        throughput.seconds,
        throughput.pairs_per_second
    );
    Ok(())
}

/// Parses `K`, `A,B,C` or `A..B`, with an optional `odd` filter.
pub fn parse_ks(values: &[String]) -> Result<Vec<usize>> {
    let first = values.first().ok_or_else(|| anyhow!("--k needs a value"))?;
    let mut ks: Vec<usize> = if let Some((lo, hi)) = first.split_once("..") {
        let lo: usize = lo.trim().parse().with_context(|| format!("bad range start in {first:?}"))?;
        let hi: usize = hi.trim().parse().with_context(|| format!("bad range end in {first:?}"))?;
        ensure!(lo <= hi, "empty k range {first:?}");
        (lo..=hi).collect()
    } else {
        first
            .split(',')
            .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad k value {s:?}")))
            .collect::<Result<_>>()?
    };
    match values.get(1).map(String::as_str) {
        None | Some("all") => {}
        Some("odd") => ks.retain(|k| k % 2 == 1),
        Some(other) => bail!("unknown k filter {other:?}; expected `odd` or `all`"),
    }
    ks.sort_unstable();
    ks.dedup();
    ensure!(!ks.is_empty() && ks[0] >= 1, "k values must be at least 1");
    Ok(ks)
}

fn knn(a: KnnArgs) -> Result<()> {
    let train = load_corpus(&a.train)?;
    let test = load_corpus(&a.test)?;
    ensure!(
        train.vocabulary == test.vocabulary,
        "train and test corpora use different vocabularies; produce both with one `hott ingest --train-fraction` run"
    );
    let ks = parse_ks(&a.k)?;
    let inputs = load_metric_inputs(&a.metric, &train)?;
    let prepared = prepare(&inputs, &a.metric, &[&train, &test])?;
    let (n_train, n_test) = (train.len(), test.len());
    let distances = cross_distances(&prepared, n_train..n_train + n_test, 0..n_train)?;
    let report = knn_evaluate(
        distances.view(),
        &train.labels,
        &test.labels,
        &ks,
        &inputs.metric.to_string(),
    )?;

    let mut cfg = RunConfig::new("knn");
    cfg.set_path("train", &a.train)
        .set_path("test", &a.test)
        .set("k", a.k.join(" "));
    record_metric(&mut cfg, &a.metric, inputs.metric, inputs.costs.as_ref());
    let text = format!("{}{}", report.to_kv(), cfg.kv());
    print!("{text}");
    if let Some(path) = &a.output {
        write_text(path, &text)?;
    }
    if let Some(path) = &a.csv {
        write_text(path, &report.to_csv())?;
    }
    Ok(())
}

fn mantel_cmd(a: MantelArgs) -> Result<()> {
    let x = load_matrix(&a.a)?;
    let y = load_matrix(&a.b)?;
    ensure!(
        x.ids == y.ids,
        "matrices cover different documents; compute both with `hott dist` on the same corpus"
    );
    let m = mantel(x.values.view(), y.values.view(), a.permutations, a.seed)?;
    let frob = frobenius_diff(x.values.view(), y.values.view())?;
    let mut cfg = RunConfig::new("mantel");
    cfg.set_path("a", &a.a)
        .set_path("b", &a.b)
        .set("permutations", a.permutations)
        .set("seed", a.seed);
    let text = format!(
        "metric_a={}\nmetric_b={}\n{}frobenius={}\n{}",
        x.metric,
        y.metric,
        m.to_kv(),
        frob,
        cfg.kv()
    );
    print!("{text}");
    if let Some(path) = &a.output {
        write_text(path, &text)?;
    }
    Ok(())
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let model = load_model(&a.model)?;
    check_model_matches(&model, &corpus)?;
    let table = load_table(&a.embeddings, &corpus)?;
    ensure!(corpus.len() >= 2, "bound checks need at least 2 documents");
    let props = corpus_proportions(&corpus, &model, a.infer_iterations, a.seed)?;
    let checker = BoundChecker::new(&model, &table)?;
    let pairs = sample_pairs(corpus.len(), a.pairs, a.seed);
    let reports = pairs
        .iter()
        .map(|&(i, j)| {
            let (pi, pj) = (props.row(i).to_vec(), props.row(j).to_vec());
            checker
                .check(&corpus.documents[i], &corpus.documents[j], &pi, &pj)
                .with_context(|| format!("documents {} and {}", corpus.ids[i], corpus.ids[j]))
        })
        .collect::<Result<Vec<BoundReport>>>()?;
    let summary = BoundSummary::from_reports(&reports);

    let mut cfg = RunConfig::new("bounds");
    cfg.set_path("corpus", &a.corpus)
        .set_path("model", &a.model)
        .set_path("embeddings", &a.embeddings)
        .set("pairs", a.pairs)
        .set("seed", a.seed)
        .set("infer_iterations", a.infer_iterations);
    let text = format!(
        "{}diameter={}\nall_hold_1e-6={}\n{}",
        summary.to_kv(),
        checker.diameter(),
        summary.holds(1e-6),
        cfg.kv()
    );
    print!("{text}");
    if let Some(path) = &a.output {
        write_text(path, &text)?;
    }
    if let Some(path) = &a.csv {
        let mut csv = format!("doc_a,doc_b,{}\n", BoundReport::CSV_HEADER);
        for (&(i, j), r) in pairs.iter().zip(&reports) {
            csv.push_str(&format!("{},{},{}\n", corpus.ids[i], corpus.ids[j], r.csv_row()));
        }
        write_text(path, &csv)?;
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let inputs = load_metric_inputs(&a.metric, &corpus)?;
    let prepared = prepare(&inputs, &a.metric, &[&corpus])?;
    let report = benchmark_throughput(&prepared, a.pairs, a.warmup, a.metric.seed)?;
    let mut cfg = RunConfig::new("bench");
    cfg.set_path("corpus", &a.corpus)
        .set("pairs", a.pairs)
        .set("warmup", a.warmup);
    record_metric(&mut cfg, &a.metric, inputs.metric, inputs.costs.as_ref());
    let text = format!("{}{}", report.to_kv(), cfg.kv());
    print!("{text}");
    if let Some(path) = &a.output {
        write_text(path, &text)?;
    }
    Ok(())
}
