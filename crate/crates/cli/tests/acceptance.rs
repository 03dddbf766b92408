//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest harness so the
//! lines are always printed; exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hijackmap::corpus::{generate_synthetic_corpus, Dataset};
use hijackmap::eval::{
    metrics_from_confusion, run_experiment, select_preferred, ComparisonRow, ComparisonTable, ConfusionMatrix, Experiment,
    RowMetrics, SelectionRule,
};
use hijackmap::geomap::{
    build_map, emit_geojson, extract_locations, haversine_km, parse_geojson, Gazetteer, GazetteerEntry, LatLon, MapDocument,
    Resolver,
};
use hijackmap::models::{ArchitectureId, Family};
use hijackmap::textprep::{fit_tfidf, Stoplist, TokenSeq};
use nnkit::gradcheck::{central_difference, layer_gradient_check, max_relative_error, FD_STEP};
use nnkit::init::{self, SeededRng};
use nnkit::layers::{
    scaled_dot_attention, scaled_dot_attention_backward, Activation, Conv1d, Dense, Layer, MaxPool1d, MultiHeadAttention,
};
use nnkit::loss::{bce_loss, mse_loss, LossKind};
use nnkit::{Tensor, TrainConfig};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---- published figures ----

/// (id, val_acc, val_loss, precision, recall, f1, tp, fp, fn) with 130 test posts, 29 relevant.
type Published = (&'static str, f64, f64, f64, f64, f64, usize, usize, usize);

const PUBLISHED: [Published; 10] = [
    ("cnn-1", 0.9500, 0.2140, 0.9545, 0.7241, 0.8235, 21, 1, 8),
    ("cnn-2", 0.9833, 0.1800, 0.9565, 0.7586, 0.8462, 22, 1, 7),
    ("cnn-3", 0.9167, 0.3404, 0.9231, 0.8276, 0.8727, 24, 2, 5),
    ("mlfnn-2", 0.9333, 0.4598, 1.0, 0.7241, 0.8400, 21, 0, 8),
    ("mlfnn-3", 0.9500, 0.2303, 0.9524, 0.6897, 0.8000, 20, 1, 9),
    ("mlfnn-4", 0.9500, 0.1858, 0.9546, 0.7241, 0.8235, 21, 1, 8),
    ("tinyformer-2e-5", 0.8500, 0.5771, 0.2857, 0.0699, 0.1111, 2, 5, 27),
    ("tinyformer-3e-5", 0.9000, 0.4742, 0.0, 0.0, 0.0, 0, 0, 29),
    ("tinyformer-4e-5", 0.9000, 0.4659, 0.1667, 0.0345, 0.0571, 1, 5, 28),
    ("tinyformer-5e-5", 0.9000, 0.4517, 0.0, 0.0, 0.0, 0, 0, 29),
];

fn counts(r: &Published) -> ConfusionMatrix {
    ConfusionMatrix::new(r.6, r.7, r.8, 130 - r.6 - r.7 - r.8)
}

fn metrics_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for r in &PUBLISHED {
        let m = metrics_from_confusion(&counts(r), 0.0);
        let recall_tol = if r.0 == "tinyformer-2e-5" { 0.001 } else { 0.0005 };
        for (what, got, want, tol) in [
            ("precision", m.precision, r.3, 0.0005),
            ("recall", m.recall, r.4, recall_tol),
            ("f1", m.f1, r.5, 0.0005),
        ] {
            let err = (got - want).abs();
            worst = worst.max(err);
            if err > tol {
                failures.push(format!("{} {what} {got:.4} vs {want}", r.0));
            }
        }
    }
    check(
        failures.is_empty(),
        format!("{} rows, max abs deviation {worst:.5} {}", PUBLISHED.len(), failures.join("; ")),
    )
}

fn fixture_table(family: Family) -> ComparisonTable {
    let rows = PUBLISHED
        .iter()
        .filter(|r| r.0.parse::<ArchitectureId>().unwrap().family() == family)
        .map(|r| ComparisonRow {
            id: r.0.parse().unwrap(),
            outcome: Ok(RowMetrics {
                train_acc: 0.0,
                train_loss: 0.0,
                val_acc: Some(r.1),
                val_loss: Some(r.2),
                precision: r.3,
                recall: r.4,
                f1: r.5,
                test: None,
            }),
        })
        .collect();
    ComparisonTable { family, rows }
}

fn selection_oracle() -> Outcome {
    let picks: Vec<String> = [
        (Family::Cnn, SelectionRule::ValFirst),
        (Family::Mlfnn, SelectionRule::ValFirst),
        (Family::Tinyformer, SelectionRule::F1First),
    ]
    .into_iter()
    .map(|(f, rule)| select_preferred(&fixture_table(f), rule).map_or_else(|e| e.to_string(), |id| id.to_string()))
    .collect();
    check(picks == ["cnn-2", "mlfnn-4", "tinyformer-2e-5"], format!("selected {}", picks.join(", ")))
}

// ---- gradients ----

const PROBES: u64 = 20;
const GRAD_TOL: f64 = 1e-4;

fn random(rng: &mut SeededRng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn layer_worst(mut layer: Layer, shape: &[usize]) -> f64 {
    (0..PROBES)
        .map(|probe| {
            let x = random(&mut init::rng(7000 + probe), shape);
            layer_gradient_check(&mut layer, &x, probe, GRAD_TOL).unwrap().max_rel_error
        })
        .fold(0.0, f64::max)
}

fn mha_worst() -> f64 {
    let mut rng = init::rng(11);
    let mut mha = MultiHeadAttention::new("a", 8, 4, &mut rng).unwrap();
    for p in [&mut mha.bq, &mut mha.bv, &mut mha.bo] {
        p.value = random(&mut rng, &[8]);
    }
    let mut worst: f64 = 0.0;
    for probe in 0..PROBES {
        let mut r = init::rng(7100 + probe);
        let x = random(&mut r, &[5, 8]);
        let probe_out = random(&mut r, &[5, 8]);
        let objective = |m: &MultiHeadAttention, input: &Tensor| -> f64 {
            m.forward(input).unwrap().data().iter().zip(probe_out.data()).map(|(a, b)| a * b).sum()
        };
        let mut m = mha.clone();
        for p in m.params_mut() {
            p.zero_grad();
        }
        let dx = m.backward(&x, &probe_out).unwrap();
        let nx = central_difference(|v| objective(&m, &Tensor::new(vec![5, 8], v.to_vec()).unwrap()), x.data(), FD_STEP);
        worst = worst.max(max_relative_error(dx.data(), &nx));
        for pi in 0..m.params().len() {
            let analytic = m.params()[pi].grad.data().to_vec();
            let values = m.params()[pi].value.data().to_vec();
            let numeric = central_difference(
                |v| {
                    let mut shifted = m.clone();
                    shifted.params_mut()[pi].value.data_mut().copy_from_slice(v);
                    objective(&shifted, &x)
                },
                &values,
                FD_STEP,
            );
            worst = worst.max(max_relative_error(&analytic, &numeric));
        }
    }
    worst
}

fn attention_worst() -> f64 {
    let (n, dk, dv) = (4, 3, 2);
    let mut worst: f64 = 0.0;
    for probe in 0..PROBES {
        let mut rng = init::rng(7200 + probe);
        let (q, k, v, r) = (
            random(&mut rng, &[n, dk]),
            random(&mut rng, &[n, dk]),
            random(&mut rng, &[n, dv]),
            random(&mut rng, &[n, dv]),
        );
        let obj = |q: &Tensor, k: &Tensor, v: &Tensor| -> f64 {
            scaled_dot_attention(q, k, v).unwrap().data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
        };
        let (gq, gk, gv) = scaled_dot_attention_backward(&q, &k, &v, &r).unwrap();
        let t = |shape: [usize; 2], x: &[f64]| Tensor::new(shape.to_vec(), x.to_vec()).unwrap();
        let nq = central_difference(|x| obj(&t([n, dk], x), &k, &v), q.data(), FD_STEP);
        let nk = central_difference(|x| obj(&q, &t([n, dk], x), &v), k.data(), FD_STEP);
        let nv = central_difference(|x| obj(&q, &k, &t([n, dv], x)), v.data(), FD_STEP);
        worst = worst
            .max(max_relative_error(gq.data(), &nq))
            .max(max_relative_error(gk.data(), &nk))
            .max(max_relative_error(gv.data(), &nv));
    }
    worst
}

fn loss_worst(kind: LossKind) -> f64 {
    let f: fn(&[f64], &[f64]) -> nnkit::Result<f64> = match kind {
        LossKind::Bce => bce_loss,
        LossKind::Mse => mse_loss,
    };
    (0..PROBES)
        .map(|probe| {
            let mut rng = init::rng(7300 + probe);
            let p: Vec<f64> = (0..6).map(|_| rng.random_range(0.05..0.95)).collect();
            let y: Vec<f64> = (0..6).map(|_| f64::from(rng.random_range(0..2u8))).collect();
            let numeric = central_difference(|x| f(x, &y).unwrap(), &p, FD_STEP);
            max_relative_error(&kind.gradient(&p, &y).unwrap(), &numeric)
        })
        .fold(0.0, f64::max)
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = init::rng(10);
    let results = [
        ("dense", layer_worst(Layer::Dense(Dense::new("d", 6, 4, Activation::Sigmoid, &mut rng)), &[6])),
        ("dense-relu", layer_worst(Layer::Dense(Dense::new("d", 6, 4, Activation::Relu, &mut rng)), &[6])),
        ("conv1d", layer_worst(Layer::Conv1d(Conv1d::new("c", 2, 3, 5, &mut rng)), &[12, 2])),
        ("maxpool1d", layer_worst(Layer::MaxPool1d(MaxPool1d { window: 2, stride: 2 }), &[10, 3])),
        ("attention", attention_worst()),
        ("multi-head", mha_worst()),
        ("bce", loss_worst(LossKind::Bce)),
        ("mse", loss_worst(LossKind::Mse)),
    ];
    let elapsed = start.elapsed();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let detail: Vec<String> = results.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    check(
        worst < GRAD_TOL && elapsed < Duration::from_secs(30),
        format!("{PROBES} probes each; max rel err: {} ({:.1?})", detail.join(", "), elapsed),
    )
}

// ---- tf-idf ----

fn tfidf_oracle(corpus: &[Vec<String>], doc: &[String]) -> Vec<f64> {
    let mut vocab: Vec<&String> = corpus.iter().flatten().collect();
    vocab.sort();
    vocab.dedup();
    let n = corpus.len() as f64;
    let mut w: Vec<f64> = vocab
        .iter()
        .map(|term| {
            let df = corpus.iter().filter(|d| d.contains(term)).count() as f64;
            let idf = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
            doc.iter().filter(|t| t == term).count() as f64 * idf
        })
        .collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        w.iter_mut().for_each(|x| *x /= norm);
    }
    w
}

fn tfidf_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = init::rng(2024);
    let mut worst: f64 = 0.0;
    let mut corpora = 0;
    while corpora < 100 {
        let n_docs = rng.random_range(1..=10);
        let n_terms = rng.random_range(1..=15);
        let corpus: Vec<Vec<String>> = (0..n_docs)
            .map(|_| (0..rng.random_range(0..8)).map(|_| format!("w{}", rng.random_range(0..n_terms))).collect())
            .collect();
        if corpus.iter().all(Vec::is_empty) {
            continue;
        }
        corpora += 1;
        let model = fit_tfidf(&corpus.iter().map(|d| TokenSeq::new(d.clone())).collect::<Vec<_>>()).unwrap();
        let probe: Vec<String> = (0..rng.random_range(0..8)).map(|_| format!("w{}", rng.random_range(0..n_terms + 3))).collect();
        for doc in corpus.iter().chain([&probe]) {
            let got = model.transform(&TokenSeq::new(doc.clone()));
            let want = tfidf_oracle(&corpus, doc);
            if got.len() != want.len() {
                return Err(format!("length {} vs {}", got.len(), want.len()));
            }
            for (g, w) in got.values().iter().zip(&want) {
                worst = worst.max((g - w).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-9 && elapsed < Duration::from_secs(5),
        format!("100 corpora, max abs diff {worst:.1e} ({elapsed:.1?})"),
    )
}

// ---- training on synthetic corpora ----

struct Trained {
    cnn: Experiment,
    mlfnn: Experiment,
    elapsed: Duration,
}

fn corpora() -> (Dataset, Dataset) {
    (generate_synthetic_corpus(7, 76, 220), generate_synthetic_corpus(8, 29, 101))
}

fn row<'a>(e: &'a Experiment, id: &str) -> Option<&'a RowMetrics> {
    e.table.rows.iter().find(|r| r.id.to_string() == id)?.outcome.as_ref().ok()
}

fn preferred_f1(e: &Experiment) -> Option<(ArchitectureId, f64)> {
    let id = select_preferred(&e.table, SelectionRule::ValFirst).ok()?;
    Some((id, row(e, &id.to_string())?.f1))
}

fn train_cnn_mlfnn() -> Result<Trained, String> {
    let (train, test) = corpora();
    let start = Instant::now();
    let cfg = TrainConfig::default();
    let stop = Stoplist::english();
    let cnn = run_experiment(&train, &test, Family::Cnn, &cfg, &stop).map_err(|e| e.to_string())?;
    let mlfnn = run_experiment(&train, &test, Family::Mlfnn, &cfg, &stop).map_err(|e| e.to_string())?;
    Ok(Trained {
        cnn,
        mlfnn,
        elapsed: start.elapsed(),
    })
}

fn overfit(t: &Trained) -> Outcome {
    let mut ok = t.elapsed < Duration::from_secs(120);
    let mut parts = Vec::new();
    for (e, id) in [(&t.cnn, "cnn-2"), (&t.mlfnn, "mlfnn-4")] {
        match row(e, id) {
            Some(m) => {
                ok &= m.train_acc >= 0.99 && m.f1 >= 0.80;
                parts.push(format!("{id} train_acc {:.4} test F1 {:.4}", m.train_acc, m.f1));
            }
            None => {
                ok = false;
                parts.push(format!("{id} failed"));
            }
        }
    }
    check(ok, format!("{} ({:.1?})", parts.join("; "), t.elapsed))
}

fn transformer_direction(t: &Trained) -> Outcome {
    let (train, test) = corpora();
    let start = Instant::now();
    let tf = run_experiment(&train, &test, Family::Tinyformer, &TrainConfig::default(), &Stoplist::english())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed() + t.elapsed;
    let best = tf
        .table
        .rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r.id, m.f1)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or("every tinyformer row failed")?;
    let cnn = preferred_f1(&t.cnn).ok_or("no preferred cnn")?;
    let mlfnn = preferred_f1(&t.mlfnn).ok_or("no preferred mlfnn")?;
    check(
        best.1 < cnn.1 && best.1 < mlfnn.1 && elapsed < Duration::from_secs(600),
        format!(
            "best {} F1 {:.4} vs {} {:.4}, {} {:.4} ({elapsed:.1?} incl. cnn/mlfnn)",
            best.0, best.1, cnn.0, cnn.1, mlfnn.0, mlfnn.1
        ),
    )
}

// ---- command line ----

fn hijackmap(dir: &Path, args: &[&str]) -> Result<String, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_hijackmap"))
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(format!("`{}` exited {:?}: {}", args.join(" "), o.status.code(), String::from_utf8_lossy(&o.stderr)))
    }
}

fn full_run(dir: &Path, out: &str) -> Result<(), String> {
    hijackmap(dir, &["--seed", "7", "--out", out, "synth"])?;
    hijackmap(dir, &["--seed", "7", "--out", out, "experiment", "all", "--dataset", &format!("{out}/corpus.jsonl")])?;
    Ok(())
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".kv") || n.ends_with(".txt") || n.ends_with(".hjnn") || n.ends_with(".tsv"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), fs::read(dir.join(&n)).unwrap())).collect()
}

fn determinism(work: &Path) -> Outcome {
    full_run(work, "a")?;
    full_run(work, "b")?;
    let (a, b) = (artifacts(&work.join("a")), artifacts(&work.join("b")));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let has_checkpoint = names.iter().any(|n| n.ends_with(".hjnn"));
    let has_kv = names.contains(&"report.kv");
    check(
        a == b && has_checkpoint && has_kv,
        format!("{} files byte-identical across runs: {}", a.len(), names.join(", ")),
    )
}

fn geo_invariants() -> Outcome {
    let spot = haversine_km(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0));
    let mut rng = init::rng(99);
    let mut points = 0;
    for case in 0..1000 {
        let center = LatLon::new(rng.random_range(-80.0..80.0), rng.random_range(-179.0..179.0));
        let spread = rng.random_range(0.1..5.0);
        let entries: Vec<GazetteerEntry> = (0..rng.random_range(1..15))
            .map(|i| GazetteerEntry {
                name: format!("site{i}"),
                lat: (center.lat + rng.random_range(-spread..spread)).clamp(-90.0, 90.0),
                lon: (center.lon + rng.random_range(-spread..spread)).clamp(-180.0, 180.0),
            })
            .collect();
        let n = entries.len();
        let resolver = Resolver::new(Gazetteer::from_entries(entries).unwrap(), None);
        let tweets: Vec<_> = (0..rng.random_range(0..20))
            .map(|t| hijackmap::corpus::TweetRecord {
                id: format!("{case}-{t}"),
                text: format!("hijacking at site{} and site{}", rng.random_range(0..n + 2), rng.random_range(0..n)),
                created_at: "2022-03-01T08:00:00Z".into(),
                label: Some(1),
            })
            .collect();
        let radius = rng.random_range(1.0..300.0);
        let (map, _) = build_map(&tweets, &resolver, center, radius);
        for p in &map.points {
            let d = haversine_km(center, LatLon::new(p.lat, p.lon));
            if d > radius {
                return Err(format!("case {case}: {} at {d:.3} km exceeds radius {radius:.3}", p.name));
            }
        }
        points += map.points.len();
    }
    check(
        (spot - 111.195).abs() <= 0.001,
        format!("1000 maps, {points} points all inside radius; (0,0)-(0,1) = {spot:.4} km"),
    )
}

fn end_to_end(work: &Path) -> Outcome {
    let dir = work.join("a");
    if !dir.join("model.hjnn").exists() {
        full_run(work, "a")?;
    }
    hijackmap(work, &["--out", "a", "classify", "a/corpus.jsonl", "a/classified.jsonl"])?;
    let summary = hijackmap(work, &["--out", "a", "map", "a/classified.jsonl"])?;
    let bytes = fs::read(dir.join("points.geojson")).map_err(|e| e.to_string())?;
    let points = parse_geojson(&bytes).map_err(|e| e.to_string())?;

    let gazetteer = Gazetteer::bundled();
    let corpus = fs::read_to_string(dir.join("corpus.jsonl")).map_err(|e| e.to_string())?;
    let named: BTreeSet<String> = hijackmap::corpus::ingest_records(corpus.as_bytes(), "corpus", false)
        .map_err(|e| e.to_string())?
        .dataset
        .iter()
        .filter(|r| r.is_relevant())
        .flat_map(|r| extract_locations(&r.text, &gazetteer))
        .collect();
    let strays: Vec<&str> = points
        .iter()
        .filter(|p| {
            !named.contains(&p.name)
                || gazetteer.get(&p.name).is_none_or(|g| (g.lat, g.lon) != (p.lat, p.lon))
        })
        .map(|p| p.name.as_str())
        .collect();
    let doc = MapDocument {
        center: LatLon::new(0.0, 0.0),
        radius_km: 1.0,
        points: points.clone(),
    };
    let round_trip = emit_geojson(&doc) == bytes;
    check(
        strays.is_empty() && round_trip && !points.is_empty(),
        format!(
            "{} features, unmatched {:?}, round-trip {}; {}",
            points.len(),
            strays,
            if round_trip { "identical" } else { "DIFFERS" },
            summary.trim()
        ),
    )
}

fn run(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} [{n}] {name}: {detail}");
    outcome.is_ok()
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temporary directory");
    let mut ok = true;
    ok &= run(1, "metrics oracle", metrics_oracle);
    ok &= run(2, "selection oracle", selection_oracle);
    ok &= run(3, "gradient suite", gradient_suite);
    ok &= run(4, "tf-idf oracle equivalence", tfidf_equivalence);
    let trained = train_cnn_mlfnn();
    match &trained {
        Ok(t) => {
            ok &= run(5, "overfit capability", || overfit(t));
            ok &= run(6, "transformer underperforms", || transformer_direction(t));
        }
        Err(e) => {
            ok &= run(5, "overfit capability", || Err(e.clone()));
            ok &= run(6, "transformer underperforms", || Err(e.clone()));
        }
    }
    ok &= run(7, "determinism", || determinism(work.path()));
    ok &= run(8, "geo invariants", geo_invariants);
    ok &= run(9, "end to end", || end_to_end(work.path()));
    if ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
