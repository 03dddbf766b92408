use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use hijackmap::corpus::{generate_synthetic_corpus, ingest_records, split_dataset, Dataset, TweetRecord};
use hijackmap::eval::{render_kv, render_table, run_experiment, select_from, select_preferred, ComparisonRow, SelectionRule};
use hijackmap::geomap::{build_map, emit_geojson, emit_html_map, load_gazetteer, Gazetteer, RemoteGeocoder, Resolver};
use hijackmap::models::{classify, Family, Featurizer, ModelInstance};
use hijackmap::textprep::{manifest_hash, preprocess, Stoplist, TfidfModel};
use nnkit::checkpoint::Checkpoint;
use serde::{Deserialize, Serialize};

use crate::config::{require_exists, RunConfig};
use crate::error::{CliError, CliResult};

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    let msg = format!("{what} {}: {e}", path.display());
    if e.kind() == std::io::ErrorKind::NotFound {
        CliError::Input(msg)
    } else {
        CliError::Internal(msg)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err("cannot create directory", dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err("cannot write", path, e))
}

/// Strictly parsed records; any malformed line is an input error.
fn load_dataset(path: &Path) -> CliResult<Dataset> {
    require_exists("dataset", path)?;
    let file = File::open(path).map_err(|e| io_err("cannot open", path, e))?;
    let report = ingest_records(BufReader::new(file), &path.display().to_string(), false)
        .map_err(|e| CliError::from_core(&path.display().to_string(), e))?;
    Ok(report.dataset)
}

fn load_stoplist(cfg: &RunConfig) -> CliResult<Stoplist> {
    match &cfg.stoplist {
        None => Ok(Stoplist::english()),
        Some(p) => {
            require_exists("stoplist", p)?;
            let file = File::open(p).map_err(|e| io_err("cannot open", p, e))?;
            Stoplist::from_reader(BufReader::new(file)).map_err(|e| CliError::from_core(&p.display().to_string(), e))
        }
    }
}

pub fn ingest(input: &Path, store: &Path, lenient: bool) -> CliResult<()> {
    require_exists("input", input)?;
    let existing = if store.exists() {
        load_dataset(store)?
    } else {
        Dataset::new(store.display().to_string())
    };
    let file = File::open(input).map_err(|e| io_err("cannot open", input, e))?;
    let report = ingest_records(BufReader::new(file), &input.display().to_string(), lenient)
        .map_err(|e| CliError::from_core(&input.display().to_string(), e))?;
    for err in &report.errors {
        eprintln!("skipped line {}: {}", err.line, err.message);
    }

    let fresh: Vec<&TweetRecord> = report.dataset.iter().filter(|r| !existing.contains(&r.id)).collect();
    let deduped = report.deduped + (report.dataset.len() - fresh.len());
    if let Some(dir) = store.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err("cannot create directory", dir, e))?;
    }
    let out = OpenOptions::new()
        .create(true)
        .append(true)
        .open(store)
        .map_err(|e| io_err("cannot open store", store, e))?;
    let mut out = BufWriter::new(out);
    for r in &fresh {
        serde_json::to_writer(&mut out, r).map_err(|e| CliError::Internal(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| io_err("cannot append to", store, e))?;
    }
    out.flush().map_err(|e| io_err("cannot append to", store, e))?;

    print!("read {} added {} deduped {deduped}", report.read, fresh.len());
    if !report.errors.is_empty() {
        print!(" skipped {}", report.errors.len());
    }
    println!();
    Ok(())
}

pub fn synth(cfg: &RunConfig, relevant: usize, irrelevant: usize, output: Option<&Path>) -> CliResult<()> {
    let ds = generate_synthetic_corpus(cfg.seed, relevant, irrelevant);
    let default = cfg.out_dir.join("corpus.jsonl");
    let path = output.unwrap_or(&default);
    write_file(path, ds.to_jsonl().as_bytes())?;
    println!("wrote {} records ({relevant} relevant, {irrelevant} irrelevant) to {}", ds.len(), path.display());
    Ok(())
}

pub fn experiment(cfg: &RunConfig, families: &[Family]) -> CliResult<()> {
    let dataset_path = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| CliError::input("no dataset given (use --dataset or `dataset = ...` in the config)"))?;
    if let Some(t) = &cfg.test_dataset {
        require_exists("test dataset", t)?;
    }
    let stoplist = load_stoplist(cfg)?;
    let data = load_dataset(dataset_path)?;
    let (train, test) = match &cfg.test_dataset {
        Some(t) => (data, load_dataset(t)?),
        None => split_dataset(&data, &cfg.split_spec()).map_err(|e| {
            CliError::input(format!("cannot make the stratified train/test split of {}: {e}", dataset_path.display()))
        })?,
    };
    let (neg, pos) = train.class_counts();
    if neg == 0 || pos == 0 {
        return Err(CliError::input(format!(
            "training data needs both classes for stratified training, found {pos} relevant and {neg} irrelevant"
        )));
    }

    let train_cfg = cfg.train_config();
    let mut report = String::new();
    let mut kv = String::new();
    let _ = writeln!(
        report,
        "train {} records ({pos} relevant), test {} records; seed {}; metrics are final-epoch values\n",
        train.len(),
        test.len(),
        cfg.seed
    );
    let mut featurizer: Option<Featurizer> = None;
    let mut preferred: Vec<(ComparisonRow, ModelInstance)> = Vec::new();
    let mut missing = Vec::new();
    for &family in families {
        log::info!("training {family} variants");
        let exp = run_experiment(&train, &test, family, &train_cfg, &stoplist)
            .map_err(|e| CliError::from_core(&format!("{family} experiment"), e))?;
        let rule = cfg.selection_for(family);
        report.push_str(&render_table(&exp.table));
        kv.push_str(&render_kv(&exp.table));
        let _ = writeln!(kv, "{family}.rule={rule}");
        match select_preferred(&exp.table, rule) {
            Ok(id) => {
                let _ = writeln!(report, "preferred {family}: {id} ({rule})\n");
                let _ = writeln!(kv, "{family}.preferred={id}");
                let row = exp.table.rows.iter().find(|r| r.id == id).expect("selected from this table").clone();
                let model = exp.model(id).expect("successful rows keep their model").clone();
                preferred.push((row, model));
            }
            Err(_) => {
                let _ = writeln!(report, "preferred {family}: none (every variant failed)\n");
                missing.push(family);
            }
        }
        featurizer.get_or_insert(exp.featurizer);
    }

    let featurizer = featurizer.ok_or_else(|| CliError::input("no family selected"))?;
    let manifest = featurizer.tfidf().manifest();
    let hash = manifest_hash(&manifest);
    let _ = writeln!(kv, "vectorizer.hash={hash}");
    let out = &cfg.out_dir;
    write_file(&cfg.vectorizer_path(), manifest.as_bytes())?;
    for (_, model) in &preferred {
        let path = out.join(format!("model-{}.hjnn", model.id.family()));
        write_file(&path, &model.to_checkpoint(&hash).to_bytes())?;
    }
    if let Ok(winner) = select_from(preferred.iter().map(|(r, _)| r), SelectionRule::F1First) {
        let _ = writeln!(report, "winner: {winner} (f1_first across preferred models)");
        let _ = writeln!(kv, "winner={winner}");
        let (_, model) = preferred.iter().find(|(r, _)| r.id == winner).expect("winner is a preferred row");
        write_file(&cfg.checkpoint_path(), &model.to_checkpoint(&hash).to_bytes())?;
    }
    write_file(&out.join("report.txt"), report.as_bytes())?;
    write_file(&out.join("report.kv"), kv.as_bytes())?;
    print!("{report}");

    if missing.is_empty() {
        Ok(())
    } else {
        let names: Vec<&str> = missing.iter().map(|f| f.as_str()).collect();
        Err(CliError::Internal(format!("no variant trained successfully for: {}", names.join(", "))))
    }
}

/// A record annotated by `classify`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ClassifiedRecord {
    #[serde(flatten)]
    pub record: TweetRecord,
    pub probability: f64,
    pub predicted_label: u8,
}

pub fn classify_file(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    vectorizer: Option<&Path>,
    input: &Path,
    output: &Path,
) -> CliResult<()> {
    let ckpt_path = checkpoint.map_or_else(|| cfg.checkpoint_path(), Path::to_path_buf);
    let vec_path = vectorizer.map_or_else(|| cfg.vectorizer_path(), Path::to_path_buf);
    require_exists("checkpoint", &ckpt_path)?;
    require_exists("vectorizer manifest", &vec_path)?;
    require_exists("input", input)?;
    let stoplist = load_stoplist(cfg)?;

    let ckpt = Checkpoint::load(&ckpt_path).map_err(|e| CliError::input(format!("{}: {e}", ckpt_path.display())))?;
    let manifest = fs::read_to_string(&vec_path).map_err(|e| io_err("cannot read", &vec_path, e))?;
    let hash = manifest_hash(&manifest);
    if ckpt.manifest_hash != hash {
        return Err(CliError::Consistency(format!(
            "checkpoint {} was trained with vectorizer {}, but {} has hash {hash}",
            ckpt_path.display(),
            ckpt.manifest_hash,
            vec_path.display()
        )));
    }
    let tfidf = TfidfModel::from_manifest(&manifest).map_err(|e| CliError::from_core(&vec_path.display().to_string(), e))?;
    let featurizer = Featurizer::new(tfidf);
    let id: hijackmap::models::ArchitectureId =
        ckpt.architecture.parse().map_err(|e| CliError::from_core(&ckpt_path.display().to_string(), e))?;
    let model = ModelInstance::from_checkpoint(&ckpt, featurizer.contract(id.family()))
        .map_err(|e| CliError::Consistency(format!("{}: {e}", ckpt_path.display())))?;

    let records = load_dataset(input)?;
    let mut out = Vec::new();
    let mut relevant = 0;
    for r in records.iter() {
        let doc = preprocess(&r.text, &stoplist);
        let (probability, predicted_label) = classify(&model, &featurizer.input(id.family(), &doc))
            .map_err(|e| CliError::from_core(&format!("record {}", r.id), e))?;
        relevant += usize::from(predicted_label);
        let line = ClassifiedRecord {
            record: r.clone(),
            probability,
            predicted_label,
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| CliError::Internal(e.to_string()))?;
        out.push(b'\n');
    }
    write_file(output, &out)?;
    println!("classified {} records with {id}: {relevant} relevant", records.len());
    Ok(())
}

fn load_classified(path: &Path) -> CliResult<Vec<ClassifiedRecord>> {
    require_exists("classified file", path)?;
    let file = File::open(path).map_err(|e| io_err("cannot open", path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err("cannot read", path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ClassifiedRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::input(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn map(cfg: &RunConfig, classified: &Path, gazetteer: Option<&Path>) -> CliResult<()> {
    let records = load_classified(classified)?;
    let gazetteer = match gazetteer.or(cfg.gazetteer.as_deref()) {
        None => Gazetteer::bundled(),
        Some(p) => {
            require_exists("gazetteer", p)?;
            let file = File::open(p).map_err(|e| io_err("cannot open", p, e))?;
            load_gazetteer(file).map_err(|e| CliError::from_core(&p.display().to_string(), e))?
        }
    };
    let remote = cfg
        .geocoder_url
        .as_ref()
        .map(|url| RemoteGeocoder::with_min_interval(url.clone(), Duration::from_millis(cfg.geocoder_interval_ms)));
    let resolver = Resolver::new(gazetteer, remote);
    let relevant: Vec<TweetRecord> = records
        .into_iter()
        .filter(|r| r.predicted_label == 1)
        .map(|r| r.record)
        .collect();
    let (doc, summary) = build_map(&relevant, &resolver, cfg.center, cfg.radius_km);
    write_file(&cfg.out_dir.join("points.geojson"), &emit_geojson(&doc))?;
    write_file(&cfg.out_dir.join("map.html"), &emit_html_map(&doc))?;
    println!(
        "relevant {} resolved {} within-radius {} unresolved-dropped {} outside-dropped {} places {}",
        summary.relevant,
        summary.resolved,
        summary.within_radius,
        summary.unresolved_dropped,
        summary.outside_dropped,
        doc.points.len()
    );
    Ok(())
}
