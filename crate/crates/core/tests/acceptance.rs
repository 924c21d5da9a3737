//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every line is printed; the process
//! exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use docseg::baselines::{baseline_punct, baseline_sentence};
use docseg::data::{
    build_vocab, encode_document, generate_synthetic, load_embeddings, read_corpus, split_corpus,
    write_corpus, BoundaryRule, Document, SyntheticSpec, Token, Vocab,
};
use docseg::eval::{boundary_f1, Metrics};
use docseg::kernel::grad_check;
use docseg::model::{build_model, decode_model, encode_model, load_model, predict, save_model};
use docseg::training::{sgd_step, TaskRole, TaskSpec, TrainingConfig, TrainingSetup};
use docseg::{Label, ModelParams};

use Label::{B, I};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synthetic(n: usize, seed: u64, prefix: &str, rule: BoundaryRule) -> Vec<Document> {
    generate_synthetic(&SyntheticSpec {
        n_docs: n,
        rules: vec![rule],
        seed,
        word_prefix: prefix.into(),
        id_prefix: format!("{prefix}{seed}"),
        ..Default::default()
    })
    .expect("valid generator settings")
}

fn test_f1(model: &ModelParams, vocab: &Vocab, head: &str, test: &[Document]) -> f64 {
    let pred: Vec<Document> = test
        .iter()
        .map(|d| d.with_labels(&predict(model, d, vocab, head).unwrap()).unwrap())
        .collect();
    boundary_f1(test, &pred).unwrap().f1
}

fn bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_docseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Gradient fidelity: V=20, d=8, h=8, n=2, two heads, 6 tokens, eps=1e-4.
fn gradient_fidelity() -> Outcome {
    let mut vocab = Vocab::new();
    let words: Vec<String> = (0..13).map(|i| format!("w{i}")).collect();
    let tags = ["NOUN", "VERB", "ADJ", "ADP", "PUNCT", "CCONJ"];
    for w in &words {
        vocab.add_word(w);
    }
    for t in tags {
        vocab.add_tag(t);
    }
    assert_eq!(vocab.len(), 20);
    let labels = [B, I, I, B, I, B];
    let doc = Document::new(
        "g",
        (0..6)
            .map(|i| Token::labeled(words[i * 2].clone(), tags[i], labels[i]))
            .collect(),
    );
    let config = TrainingConfig {
        dim: 8,
        hidden: 8,
        layers: 2,
        seed: 7,
        tasks: vec!["A".into(), "B".into()],
        target_task: "A".into(),
        ..Default::default()
    };
    let model = build_model(&config, &vocab, None).unwrap();
    let seq = encode_document(&doc, &vocab).unwrap();
    assert_eq!(seq.ids.len(), 12);
    let mut worst: f64 = 0.0;
    for head in ["A", "B"] {
        let r = grad_check(&model, &seq, head, 1e-4).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_rel_error);
    }
    check(worst <= 1e-3, format!("max relative error {worst:.3e} (limit 1e-3)"))
}

/// Head isolation over 100 seeds.
fn head_isolation() -> Outcome {
    let docs = synthetic(3, 5, "w", BoundaryRule::Connective);
    let vocab = build_vocab(&docs).unwrap();
    for seed in 0..100u64 {
        let config = TrainingConfig {
            dim: 6,
            hidden: 5,
            seed,
            tasks: vec!["A".into(), "B".into()],
            target_task: "A".into(),
            ..Default::default()
        };
        let mut model = build_model(&config, &vocab, None).unwrap();
        let before = model.clone();
        let seq = encode_document(&docs[seed as usize % 3], &vocab).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sgd_step(&mut model, &seq, "A", &config, &mut rng).unwrap();
        if model.heads["B"] != before.heads["B"] {
            return Err(format!("seed {seed}: head B changed"));
        }
        if model.layers == before.layers && model.embeddings == before.embeddings {
            return Err(format!("seed {seed}: trunk unchanged"));
        }
    }
    Ok("100 seeds".into())
}

/// Rule-(b) learnability: 200/20/20, d=50, h=50, n=2, i=30, sigma=0.1, eta=0.1, seed 1.
fn learnability() -> Outcome {
    let docs = synthetic(240, 1, "w", BoundaryRule::Connective);
    let split = split_corpus(&docs, 20, 20, 1).unwrap();
    let vocab = build_vocab(&split.train).unwrap();
    let config = TrainingConfig {
        iterations: 30,
        noise: 0.1,
        dim: 50,
        hidden: 50,
        layers: 2,
        learning_rate: 0.1,
        seed: 1,
        ..TrainingConfig::mono("main")
    };
    let tasks = [TaskSpec::new("main", split.train, TaskRole::Target)];
    let setup = TrainingSetup { vocab: &vocab, pretrained: None, tasks: &tasks, dev: &split.dev };
    let (model, report) = setup.train(&config).map_err(|e| e.to_string())?;
    let f1 = test_f1(&model, &vocab, "main", &split.test);
    check(
        f1 >= 0.95,
        format!("test F1 {f1:.4} (limit 0.95), dev F1 {:.4}", report.final_dev_f1),
    )
}

/// Multi-task gain with 10 target documents and 2x200 auxiliary documents.
fn multitask_gain() -> Outcome {
    let target = synthetic(10, 21, "t", BoundaryRule::Connective);
    let dev = synthetic(20, 22, "t", BoundaryRule::Connective);
    let test = synthetic(50, 23, "t", BoundaryRule::Connective);
    let aux_a = synthetic(200, 24, "a", BoundaryRule::Connective);
    let aux_b = synthetic(200, 25, "b", BoundaryRule::Connective);
    let multi_tasks = vec![
        TaskSpec::new("tgt", target.clone(), TaskRole::Target),
        TaskSpec::new("a", aux_a, TaskRole::Auxiliary),
        TaskSpec::new("b", aux_b, TaskRole::Auxiliary),
    ];
    let mono_tasks = vec![TaskSpec::new("tgt", target, TaskRole::Target)];
    let all: Vec<Document> = multi_tasks.iter().flat_map(|t| t.train.clone()).collect();
    let vocab = build_vocab(&all).unwrap();
    let (mut multi_sum, mut mono_sum) = (0.0, 0.0);
    for seed in 1..=3 {
        let base = TrainingConfig {
            iterations: 15,
            noise: 0.1,
            dim: 32,
            hidden: 32,
            learning_rate: 0.5,
            seed,
            ..TrainingConfig::mono("tgt")
        };
        let multi_config = TrainingConfig {
            tasks: vec!["tgt".into(), "a".into(), "b".into()],
            ..base.clone()
        };
        let run = |tasks: &[TaskSpec], config: &TrainingConfig| {
            let setup = TrainingSetup { vocab: &vocab, pretrained: None, tasks, dev: &dev };
            let (model, _) = setup.train(config).map_err(|e| e.to_string())?;
            Ok::<f64, String>(test_f1(&model, &vocab, "tgt", &test))
        };
        multi_sum += run(&multi_tasks, &multi_config)?;
        mono_sum += run(&mono_tasks, &base)?;
    }
    let (multi, mono) = (multi_sum / 3.0, mono_sum / 3.0);
    let gain = 100.0 * (multi - mono);
    check(
        gain >= 5.0,
        format!("multi {:.2} vs mono {:.2}: +{gain:.2} F1 points (limit +5)", 100.0 * multi, 100.0 * mono),
    )
}

fn random_corpora(rng: &mut ChaCha8Rng) -> (Vec<Document>, Vec<Document>) {
    let n_docs = rng.random_range(1..6);
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for d in 0..n_docs {
        let len = rng.random_range(1..15);
        let mut g = Vec::new();
        let mut p = Vec::new();
        for i in 0..len {
            let gl = if i == 0 || rng.random_bool(0.3) { B } else { I };
            let pl = if i == 0 || rng.random_bool(0.3) { B } else { I };
            g.push(Token::labeled(format!("w{i}"), "X", gl));
            p.push(Token::labeled(format!("w{i}"), "X", pl));
        }
        gold.push(Document::new(format!("d{d}"), g));
        pred.push(Document::new(format!("d{d}"), p));
    }
    (gold, pred)
}

fn boundary_set(docs: &[Document]) -> HashSet<(usize, usize)> {
    let mut set = HashSet::new();
    for (d, doc) in docs.iter().enumerate() {
        for (i, t) in doc.tokens.iter().enumerate().skip(1) {
            if t.gold_label == Some(B) {
                set.insert((d, i));
            }
        }
    }
    set
}

/// Scorer against a brute-force set oracle, plus the worked fixture.
fn scorer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for round in 0..100 {
        let (gold, pred) = random_corpora(&mut rng);
        let m = boundary_f1(&gold, &pred).unwrap();
        let (g, p) = (boundary_set(&gold), boundary_set(&pred));
        let tp = g.intersection(&p).count();
        let oracle = Metrics::from_counts(tp, p.len() - tp, g.len() - tp);
        if m != oracle {
            return Err(format!("corpus {round}: {m} vs oracle {oracle}"));
        }
    }
    let doc = |labels: &[Label]| {
        Document::new(
            "f",
            labels.iter().map(|&l| Token::labeled("w", "X", l)).collect(),
        )
    };
    let m = boundary_f1(&[doc(&[B, I, I, B, I, B])], &[doc(&[B, I, B, B, I, I])]).unwrap();
    check(
        m.precision == 0.5 && m.recall == 0.5 && m.f1 == 0.5,
        format!("100 corpora exact; fixture {m}"),
    )
}

/// Flipping the first token's label never changes the metrics.
fn first_word_exclusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let flip = |docs: &mut [Document], k: usize| {
        let t = &mut docs[k].tokens[0];
        t.gold_label = Some(if t.gold_label == Some(B) { I } else { B });
    };
    for round in 0..100 {
        let (gold, pred) = random_corpora(&mut rng);
        let base = boundary_f1(&gold, &pred).unwrap();
        let k = rng.random_range(0..gold.len());
        let (mut g2, mut p2) = (gold.clone(), pred.clone());
        flip(&mut g2, k);
        flip(&mut p2, k);
        for (g, p) in [(&g2, &pred), (&gold, &p2), (&g2, &p2)] {
            if boundary_f1(g, p).unwrap() != base {
                return Err(format!("corpus {round}: metrics changed"));
            }
        }
    }
    Ok("100 corpora".into())
}

/// Baseline exactness.
fn baseline_exactness() -> Outcome {
    let fixture = Document::new(
        "p",
        [("He", "PRON"), ("said", "VERB"), (",", "PUNCT"), ("yes", "INTJ"), (".", "PUNCT")]
            .iter()
            .map(|&(w, t)| Token::new(w, t))
            .collect(),
    );
    if baseline_punct(&fixture) != vec![B, I, I, B, I] {
        return Err("punct fixture labels differ".into());
    }
    let mut gold = synthetic(20, 8, "w", BoundaryRule::SentenceStart);
    let score = |gold: &[Document]| {
        let pred: Vec<Document> = gold
            .iter()
            .map(|d| d.with_labels(&baseline_sentence(d).unwrap()).unwrap())
            .collect();
        boundary_f1(gold, &pred).unwrap()
    };
    let exact = score(&gold);
    for d in &mut gold {
        let extra = (1..d.len())
            .find(|&i| !d.tokens[i].sent_start)
            .expect("a non-initial token inside a sentence");
        d.tokens[extra].gold_label = Some(B);
    }
    let extra = score(&gold);
    check(
        exact.f1 == 1.0 && extra.precision == 1.0 && extra.recall < 1.0,
        format!("sentence-start F1 {:.4}; with extra boundaries P {:.4} R {:.4}", exact.f1, extra.precision, extra.recall),
    )
}

/// Byte-identical models from identical training runs, bit-identical
/// predictions after a save/load round trip.
fn determinism_and_persistence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    write_corpus(&synthetic(30, 9, "w", BoundaryRule::Connective), d("train.docseg")).unwrap();
    write_corpus(&synthetic(5, 10, "w", BoundaryRule::Connective), d("dev.docseg")).unwrap();
    for m in ["m1.bin", "m2.bin"] {
        let out = bin(&[
            "train", "--train", s(&d("train.docseg")), "--dev", s(&d("dev.docseg")), "--dim", "12",
            "--hidden", "10", "--iters", "3", "--seed", "4", "--model", s(&d(m)),
        ]);
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
    }
    let (a, b) = (fs::read(d("m1.bin")).unwrap(), fs::read(d("m2.bin")).unwrap());
    if a != b {
        return Err("model files differ".into());
    }

    let train = read_corpus(d("train.docseg")).unwrap();
    let dev = read_corpus(d("dev.docseg")).unwrap();
    let vocab = build_vocab(&train).unwrap();
    let config = TrainingConfig { iterations: 2, dim: 12, hidden: 10, ..TrainingConfig::mono("main") };
    let tasks = [TaskSpec::new("main", train, TaskRole::Target)];
    let setup = TrainingSetup { vocab: &vocab, pretrained: None, tasks: &tasks, dev: &dev };
    let (model, _) = setup.train(&config).unwrap();
    save_model(&model, &vocab, &config, d("m3.bin")).unwrap();
    let (loaded, loaded_vocab, loaded_config) = load_model(d("m3.bin")).unwrap();
    let same_predictions = dev.iter().all(|doc| {
        let x = model.infer(&encode_document(doc, &vocab).unwrap(), "main").unwrap();
        let y = loaded.infer(&encode_document(doc, &loaded_vocab).unwrap(), "main").unwrap();
        x.probs
            .iter()
            .zip(&y.probs)
            .all(|(p, q)| p[0].to_bits() == q[0].to_bits() && p[1].to_bits() == q[1].to_bits())
    });
    let reencoded = encode_model(&loaded, &loaded_vocab, &loaded_config).unwrap() == fs::read(d("m3.bin")).unwrap();
    let decoded = decode_model(&a).is_ok();
    check(
        same_predictions && reencoded && decoded && loaded_config == config,
        format!("{} byte model files identical; reload bit-identical", a.len()),
    )
}

/// Truncating 500-dimensional vectors to 50 keeps exact prefixes.
fn embedding_truncation() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.txt");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let words = ["and", "but", "w1", "w2", "w3"];
    let vectors: Vec<Vec<f64>> = words
        .iter()
        .map(|_| (0..500).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut text = format!("{} 500\n", words.len());
    for (w, v) in words.iter().zip(&vectors) {
        let cols: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        text.push_str(&format!("{w} {}\n", cols.join(" ")));
    }
    fs::write(&path, text).unwrap();
    let full = load_embeddings(&path, None).unwrap();
    let cut = load_embeddings(&path, Some(50)).unwrap();
    if full.dim() != 500 || cut.dim() != 50 {
        return Err(format!("dims {} / {}", full.dim(), cut.dim()));
    }
    for (w, v) in words.iter().zip(&vectors) {
        if full.get(w).unwrap() != &v[..] || cut.get(w).unwrap() != &v[..50] {
            return Err(format!("`{w}` is not an exact prefix"));
        }
    }
    // the prefixes also land verbatim in the embedding matrix
    let doc = Document::new("e", vec![Token::labeled("and", "CCONJ", B), Token::labeled("w2", "NOUN", I)]);
    let vocab = build_vocab(&[doc]).unwrap();
    let config = TrainingConfig { dim: 50, hidden: 4, ..TrainingConfig::mono("t") };
    let model = build_model(&config, &vocab, Some(&cut)).unwrap();
    let row = model.embeddings.row(vocab.word("w2").unwrap());
    check(row == &vectors[3][..50], "5 vectors, 500 -> 50 exact".into())
}

/// Transfer protocol plumbing through the command line.
fn transfer_plumbing() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let write = |name: &str, docs: Vec<Document>| write_corpus(&docs, d(name)).unwrap();
    let small_grid = ["--hidden", "16", "--lr", "1.0", "--grid-iters", "10", "--grid-noise", "0.1", "--grid-dims", "16"];

    // cross-lingual: two source languages, tuned on one of them, target unseen
    write("en.docseg", synthetic(60, 31, "en", BoundaryRule::Connective));
    write("pt.docseg", synthetic(60, 32, "pt", BoundaryRule::Connective));
    write("en_dev.docseg", synthetic(10, 33, "en", BoundaryRule::Connective));
    write("nl_test.docseg", synthetic(20, 34, "nl", BoundaryRule::Connective));
    let mut args = vec![
        "transfer", "--mode", "cross-lingual", "--task", "", "--task", "", "--target-task", "nl", "--dev-task",
        "en", "--dev", "", "--test", "",
    ];
    let (en, pt) = (format!("en={}", s(&d("en.docseg"))), format!("pt={}", s(&d("pt.docseg"))));
    args[4] = &en;
    args[6] = &pt;
    let (dev, test) = (d("en_dev.docseg"), d("nl_test.docseg"));
    args[12] = s(&dev);
    args[14] = s(&test);
    args.extend(small_grid);
    let out = bin(&args);
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    if !out.status.success() || !stdout.contains("\nf1 ") {
        return Err(format!("cross-lingual run failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let lingual_f1 = stdout.lines().find_map(|l| l.strip_prefix("f1 ")).unwrap_or("?").to_string();

    // cross-domain: three source domains, 25 target dev documents
    let mut args: Vec<String> = ["transfer", "--mode", "cross-domain", "--target-task", "tgt"]
        .map(String::from)
        .to_vec();
    for (k, name) in ["a", "b", "c"].iter().enumerate() {
        write(&format!("{name}.docseg"), synthetic(100, 40 + k as u64, name, BoundaryRule::AfterPunct));
        args.push("--task".into());
        args.push(format!("{name}={}", s(&d(&format!("{name}.docseg")))));
    }
    write("tgt_dev.docseg", synthetic(25, 44, "t", BoundaryRule::AfterPunct));
    write("tgt_test.docseg", synthetic(50, 45, "t", BoundaryRule::AfterPunct));
    for (flag, file) in [("--dev", "tgt_dev.docseg"), ("--test", "tgt_test.docseg")] {
        args.push(flag.into());
        args.push(s(&d(file)).into());
    }
    args.extend(small_grid.map(String::from));
    let out = bin(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let f1: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("f1 "))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("cross-domain run failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    check(
        f1 >= 0.9,
        format!("cross-lingual emitted F1 {lingual_f1}; cross-domain test F1 {f1:.4} (limit 0.9)"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 gradient fidelity", Duration::from_secs(60), gradient_fidelity),
        ("2 head isolation", Duration::from_secs(30), head_isolation),
        ("3 synthetic learnability", Duration::from_secs(600), learnability),
        ("4 multi-task transfer gain", Duration::from_secs(1200), multitask_gain),
        ("5 scorer oracle equivalence", Duration::from_secs(60), scorer_oracle),
        ("6 first-word exclusion", Duration::from_secs(60), first_word_exclusion),
        ("7 baseline exactness", Duration::from_secs(60), baseline_exactness),
        ("8 determinism and persistence", Duration::from_secs(120), determinism_and_persistence),
        ("9 embedding truncation", Duration::from_secs(60), embedding_truncation),
        ("10 protocol plumbing", Duration::from_secs(600), transfer_plumbing),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Ok(d) if elapsed <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {elapsed:.1?}, limit {limit:?}")),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} criterion {name}: {detail} [{:.1}s]", elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
