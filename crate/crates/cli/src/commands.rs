//! One function per subcommand.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use asymgauge::convert::{convert_eat, convert_fa, convert_swow, write_canonical, CountRows, NativeFormat};
use asymgauge::corpus::{read_corpus, IndexConfig, ParagraphSplit, DEFAULT_CONTEXT_CAP, DEFAULT_MAX_PARAGRAPH_CHARS};
use asymgauge::embedding::{load_vectors, resolve_support, DualVectorTable, ProjectionSpace, StaticConditionals, VectorTable};
use asymgauge::evocation::{self, clean_pair_filter, ingest_evocation, EvocationDataset};
use asymgauge::lm::{
    self, emit_all_tasks, lm_conditional_table, pairs_from_sets, wire, write_factor_log, ClosedFormMock,
    ConstantScorer, FileScorer, LmRunConfig, ProcessScorer, ScoreOutcome, ScoreResult, Scorer,
};
use asymgauge::metrics::{
    self, bin_analysis, read_gold, scores_from_table, similarity_eval, write_bins_csv, write_lar_csv, LarMap,
    MetricReport, DEFAULT_GAMMAS,
};
use asymgauge::relations::{build_pair_sets, intersect_vocabularies, parse_conceptnet_file, RelationPairSet};
use asymgauge::{build_index, ConditionalTable, ParagraphStore, Real, WordPair};

use sha2::{Digest, Sha256};

use crate::artifacts::{checksum, header, require, tsv_stems, write_atomic, write_header, Layout};
use crate::config::{check_name, RunConfig};
use crate::error::CliError;

fn layout(cfg: &RunConfig) -> Result<Layout, CliError> {
    Ok(Layout::new(cfg.out_dir()?))
}

fn seed(cfg: &RunConfig) -> Result<u64, CliError> {
    cfg.parse_or("seed", 0)
}

fn cap(cfg: &RunConfig) -> Result<usize, CliError> {
    let cap = cfg.parse_or("cap", DEFAULT_CONTEXT_CAP)?;
    if cap == 0 {
        return Err(CliError::invalid("cap must be at least 1"));
    }
    Ok(cap)
}

fn datasets(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let names: Vec<String> = cfg.named("evocation.").into_keys().collect();
    if names.is_empty() {
        return Err(CliError::invalid("no evocation.<name> entries configured"));
    }
    for n in &names {
        check_name(n)?;
    }
    Ok(names)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn load_dataset(l: &Layout, name: &str) -> Result<EvocationDataset, CliError> {
    let path = require(l.evocation(name), "ingest")?;
    ingest_evocation(open(&path)?, name).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn load_pair_sets(l: &Layout, dataset: &str) -> Result<BTreeMap<String, RelationPairSet>, CliError> {
    let dir = require(l.pairs_dir(dataset), "annotate")?;
    let mut sets = BTreeMap::new();
    for rel in tsv_stems(&dir)? {
        let path = dir.join(format!("{rel}.tsv"));
        let set = RelationPairSet::read_tsv(open(&path)?, &rel).map_err(CliError::invalid)?;
        sets.insert(rel, set);
    }
    Ok(sets)
}

/// Unordered pairs over every dataset's relation sets.
fn all_pairs(cfg: &RunConfig, l: &Layout) -> Result<Vec<WordPair>, CliError> {
    let mut sets = Vec::new();
    for d in datasets(cfg)? {
        sets.extend(load_pair_sets(l, &d)?.into_values());
    }
    let mut pairs = pairs_from_sets(&sets);
    pairs.sort();
    Ok(pairs)
}

fn pairs_inputs(cfg: &RunConfig, l: &Layout) -> Result<Vec<(String, PathBuf)>, CliError> {
    datasets(cfg)?.into_iter().map(|d| Ok((format!("pairs.{d}"), require(l.pairs_dir(&d), "annotate")?))).collect()
}

fn write_table<T: Real>(path: &Path, table: &ConditionalTable<T>, hdr: &[String]) -> Result<(), CliError> {
    write_atomic(path, |w| table.write_tsv(w, hdr))
}

fn read_table(path: &Path, resource: &str) -> Result<ConditionalTable<f64>, CliError> {
    ConditionalTable::read_tsv(open(path)?, resource).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let l = layout(cfg)?;
    let inputs = cfg.named_inputs("evocation.")?;
    if inputs.is_empty() {
        return Err(CliError::invalid("no evocation.<name> entries configured"));
    }
    for (name, path) in &inputs {
        let format: NativeFormat = cfg
            .get(&format!("evocation_format.{name}"))
            .unwrap_or("canonical")
            .parse()
            .map_err(CliError::invalid)?;
        let bad = |e: &dyn std::fmt::Display| CliError::invalid(format!("{}: {e}", path.display()));
        let rows: CountRows = match format {
            NativeFormat::Canonical => {
                let d = ingest_evocation(open(path)?, name).map_err(|e| bad(&e))?;
                d.cues()
                    .flat_map(|c| d.responses(c).map(move |(r, n)| ((c.to_string(), r.to_string()), n)))
                    .collect()
            }
            NativeFormat::Swow => convert_swow(open(path)?).map_err(|e| bad(&e))?,
            NativeFormat::Fa => convert_fa(open(path)?).map_err(|e| bad(&e))?,
            NativeFormat::Eat => convert_eat(open(path)?).map_err(|e| bad(&e))?,
        };
        let hdr = header(cfg, "ingest", &[(format!("evocation.{name}"), path.clone())])?;
        write_atomic(&l.evocation(name), |w| {
            write_header(w, &hdr)?;
            write_canonical(&rows, w)
        })?;
        let d = load_dataset(&l, name)?;
        log::info!("{name}: {} cues, {} rows, {} clean pairs", d.cues().count(), rows.len(), clean_pair_filter(&d).len());
    }
    Ok(())
}

/// Words of a vector file (first field per line, optional count/dim header
/// skipped) or of a plain word list.
fn read_vocabulary(path: &Path) -> Result<HashSet<String>, CliError> {
    let mut out = HashSet::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let mut f = line.split_whitespace();
        let Some(w) = f.next() else { continue };
        if i == 0 {
            let rest: Vec<&str> = f.collect();
            if rest.len() == 1 && w.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
                continue;
            }
        }
        out.insert(w.to_lowercase());
    }
    Ok(out)
}

pub fn annotate(cfg: &RunConfig) -> Result<(), CliError> {
    let l = layout(cfg)?;
    let names = datasets(cfg)?;
    let kg = cfg.input_path("conceptnet")?;
    let language = cfg.get("language").unwrap_or("en");
    let mut vocab_paths: Vec<(String, PathBuf)> = Vec::new();
    for prefix in ["vectors.", "context_vectors.", "vocab."] {
        for (n, p) in cfg.named_inputs(prefix)? {
            vocab_paths.push((format!("{prefix}{n}"), p));
        }
    }
    let mut dsets = Vec::new();
    for n in &names {
        dsets.push(load_dataset(&l, n)?);
    }
    let (edges, stats) = parse_conceptnet_file(&kg, language).map_err(|e| CliError::invalid(format!("{}: {e}", kg.display())))?;
    log::info!("conceptnet: {} rows, {} edges kept, {} malformed, sha256 {}", stats.rows, stats.kept, stats.malformed, stats.sha256);
    let vocabularies = vocab_paths.iter().map(|(_, p)| read_vocabulary(p)).collect::<Result<Vec<_>, _>>()?;

    for d in &dsets {
        let mut lists = vocabularies.clone();
        lists.push(d.vocabulary().into_iter().collect());
        let v = intersect_vocabularies(&lists).map_err(CliError::invalid)?;
        let clean = clean_pair_filter(d);
        let sets = build_pair_sets(&clean, &edges, &v).map_err(CliError::invalid)?;
        let mut inputs = vec![(format!("evocation.{}", d.name()), l.evocation(d.name())), ("conceptnet".to_string(), kg.clone())];
        inputs.extend(vocab_paths.iter().cloned());
        let hdr = header(cfg, "annotate", &inputs)?;
        let dir = l.pairs_dir(d.name());
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        for (rel, set) in &sets {
            check_name(rel)?;
            let mut h = hdr.clone();
            h.push(format!("relation={rel}"));
            write_atomic(&dir.join(format!("{rel}.tsv")), |w| {
                write_header(w, &h)?;
                set.write_tsv(w)
            })?;
        }
        let total: usize = sets.values().map(RelationPairSet::len).sum();
        log::info!("{}: {} clean pairs, |V| = {}, {} relation entries in {} sets", d.name(), clean.len(), v.len(), total, sets.len());
    }
    Ok(())
}

pub fn index(cfg: &RunConfig) -> Result<(), CliError> {
    let l = layout(cfg)?;
    let corpus = cfg.input_path("corpus")?;
    let split = match cfg.get("paragraph_split").unwrap_or("blank") {
        "blank" => ParagraphSplit::BlankLine,
        "line" => ParagraphSplit::Line,
        other => return Err(CliError::invalid(format!("paragraph_split must be blank or line, got {other:?}"))),
    };
    let config = IndexConfig { split, max_paragraph_chars: cfg.parse_or("max_paragraph_chars", DEFAULT_MAX_PARAGRAPH_CHARS)? };
    let docs = read_corpus(&corpus).map_err(|e| CliError::invalid(format!("{}: {e}", corpus.display())))?;
    let store = build_index(docs, &config);
    let stats = store.stats();
    let path = l.index();
    write_atomic(&path, |w| store.write_to(w))?;
    let hdr = header(cfg, "index", &[("corpus".into(), corpus)])?;
    write_atomic(&l.index_meta(), |w| {
        write_header(w, &hdr)?;
        writeln!(w, "paragraphs\t{}", store.paragraphs().len())?;
        writeln!(w, "documents\t{}", stats.documents)?;
        writeln!(w, "skipped_documents\t{}", stats.skipped_documents)?;
        writeln!(w, "truncated_paragraphs\t{}", stats.truncated_paragraphs)?;
        writeln!(w, "vocabulary\t{}", store.vocabulary().count())
    })?;
    log::info!("indexed {} paragraphs from {} documents", store.paragraphs().len(), stats.documents);
    Ok(())
}

pub fn cond_evoc(cfg: &RunConfig) -> Result<(), CliError> {
    let l = layout(cfg)?;
    for name in datasets(cfg)? {
        let sets = load_pair_sets(&l, &name)?;
        let d = load_dataset(&l, &name)?;
        let pairs = pairs_from_sets(sets.values());
        let table = evocation::conditionals::<f64>(&d, &pairs).map_err(CliError::invalid)?;
        let hdr = header(
            cfg,
            "cond-evoc",
            &[(format!("evocation.{name}"), l.evocation(&name)), (format!("pairs.{name}"), l.pairs_dir(&name))],
        )?;
        write_table(&l.evoc_table(&name), &table, &hdr)?;
    }
    Ok(())
}

fn static_table<T: Real, S: ProjectionSpace<T>>(
    space: &S,
    all_words: impl Iterator<Item = String>,
    resource: &str,
    pairs: &[WordPair],
    policy: &str,
) -> Result<ConditionalTable<T>, CliError> {
    let support = match policy {
        "pairs" => {
            let words: Vec<String> = pairs.iter().flat_map(|p| [p.first().to_string(), p.second().to_string()]).collect();
            resolve_support(space, words)
        }
        "vocabulary" => resolve_support(space, all_words),
        other => return Err(CliError::invalid(format!("support must be pairs or vocabulary, got {other:?}"))),
    };
    log::info!("{resource}: support of {} words", support.len());
    let est = StaticConditionals::new(space, support).map_err(CliError::invalid)?;
    est.table(resource, pairs).map_err(CliError::internal)
}

fn load_table_vectors<T: Real>(path: &Path) -> Result<VectorTable<T>, CliError> {
    let (t, stats) = load_vectors::<T, _>(open(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    log::info!("{}: {} vectors of dim {}", path.display(), t.len(), t.dim());
    if stats.zero_vectors > 0 {
        log::warn!("{}: {} all-zero vectors skipped", path.display(), stats.zero_vectors);
    }
    Ok(t)
}

fn cond_static_typed<T: Real>(cfg: &RunConfig, l: &Layout) -> Result<(), CliError> {
    let vectors = cfg.named_inputs("vectors.")?;
    if vectors.is_empty() {
        return Err(CliError::invalid("no vectors.<name> entries configured"));
    }
    let contexts = cfg.named_inputs("context_vectors.")?;
    let policy = cfg.get("support").unwrap_or("pairs");
    let pairs = all_pairs(cfg, l)?;
    let pair_inputs = pairs_inputs(cfg, l)?;
    for (name, path) in &vectors {
        let words = load_table_vectors::<T>(path)?;
        let mut inputs = pair_inputs.clone();
        inputs.push((format!("vectors.{name}"), path.clone()));
        let table = static_table(&words, words.words().iter().cloned(), name, &pairs, policy)?;
        write_table(&l.model_table(name), &table, &header(cfg, "cond-static", &inputs)?)?;

        if let Some(cpath) = contexts.get(name) {
            let resource = format!("{name}.cxt");
            let dual = DualVectorTable::new(words, load_table_vectors::<T>(cpath)?).map_err(CliError::invalid)?;
            let all = dual.word_vectors.words().to_vec().into_iter();
            let table = static_table(&dual, all, &resource, &pairs, policy)?;
            inputs.push((format!("context_vectors.{name}"), cpath.clone()));
            write_table(&l.model_table(&resource), &table, &header(cfg, "cond-static", &inputs)?)?;
        }
    }
    Ok(())
}

pub fn cond_static(cfg: &RunConfig) -> Result<(), CliError> {
    let l = layout(cfg)?;
    match cfg.get("precision").unwrap_or("f64") {
        "f64" => cond_static_typed::<f64>(cfg, &l),
        "f32" => cond_static_typed::<f32>(cfg, &l),
        other => Err(CliError::invalid(format!("precision must be f32 or f64, got {other:?}"))),
    }
}

/// Builds the scorer named by the `scorer` key: `mock`, `const:<q>` or
/// `cmd:<shell command>`.
pub fn scorer_from_spec(spec: &str, model_id: &str) -> Result<Box<dyn Scorer>, CliError> {
    if spec == "mock" {
        return Ok(Box::new(ClosedFormMock));
    }
    if let Some(q) = spec.strip_prefix("const:") {
        let q: f64 = q.parse().map_err(|e| CliError::invalid(format!("scorer {spec:?}: {e}")))?;
        if !(0.0..=1.0).contains(&q) {
            return Err(CliError::invalid(format!("scorer {spec:?}: probability outside [0, 1]")));
        }
        return Ok(Box::new(ConstantScorer(q)));
    }
    if let Some(cmd) = spec.strip_prefix("cmd:") {
        return Ok(Box::new(ProcessScorer::new(cmd.trim(), model_id)));
    }
    Err(CliError::invalid(format!("unknown scorer {spec:?} (expected mock, const:<q> or cmd:<command>)")))
}

#[derive(Debug, Default, Clone)]
pub struct LmOptions {
    pub emit_tasks: Option<PathBuf>,
    pub consume_scores: Option<PathBuf>,
}

pub fn cond_lm(cfg: &RunConfig, opts: &LmOptions) -> Result<(), CliError> {
    let l = layout(cfg)?;
    let name = cfg.get("lm_name").unwrap_or("lm").to_string();
    check_name(&name)?;
    let (cap, seed) = (cap(cfg)?, seed(cfg)?);
    let index_path = require(l.index(), "index")?;
    let pairs = all_pairs(cfg, &l)?;
    let store = ParagraphStore::load(&index_path).map_err(|e| CliError::invalid(format!("{}: {e}", index_path.display())))?;
    let mut inputs = pairs_inputs(cfg, &l)?;
    inputs.push(("index".into(), index_path.clone()));

    if let Some(out) = &opts.emit_tasks {
        let tasks = emit_all_tasks(&pairs, &store, cap, seed);
        let hdr = header(cfg, "cond-lm --emit-tasks", &inputs)?;
        write_atomic(out, |w| {
            write_header(w, &hdr)?;
            wire::write_batch(w, &tasks)
        })?;
        log::info!("{} tasks for {} pairs", tasks.len(), pairs.len());
        return Ok(());
    }

    let mode = match cfg.get("occurrence_aggregation").unwrap_or("mean") {
        "mean" => lm::OccurrenceAggregation::Mean,
        "sum" => lm::OccurrenceAggregation::Sum,
        other => return Err(CliError::invalid(format!("occurrence_aggregation must be mean or sum, got {other:?}"))),
    };
    let floor: f64 = cfg.parse_or("prob_floor", lm::DEFAULT_PROB_FLOOR)?;
    if !(floor > 0.0 && floor < 1.0) {
        return Err(CliError::invalid("prob_floor must lie in (0, 1)"));
    }
    let mut scorer: Box<dyn Scorer> = match &opts.consume_scores {
        Some(p) => {
            let results = wire::read_all(open(p)?, &name).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
            inputs.push(("scores".into(), p.clone()));
            Box::new(FileScorer::new(name.clone(), results))
        }
        None => scorer_from_spec(cfg.require("scorer")?, &name)?,
    };
    // The scorer command may change between attempts; everything that shapes
    // the estimates may not.
    let index_sum = checksum(&index_path)?;
    let pair_key: Vec<String> = pairs.iter().map(|p| format!("{}\t{}", p.first(), p.second())).collect();
    let run_key = {
        let keyed = cfg.hash_keys(|k| matches!(k, "cap" | "seed" | "lm_name" | "occurrence_aggregation"));
        let mut h = Sha256::new();
        h.update(format!("{keyed}\n{index_sum}\n{}", pair_key.join("\n")).as_bytes());
        hex::encode(h.finalize())
    };
    let checkpoint = l.checkpoint(&name);
    fs::create_dir_all(checkpoint.parent().expect("checkpoint has a parent"))?;
    let run_cfg = LmRunConfig {
        resource_id: name.clone(),
        cap,
        seed,
        floor,
        retries: cfg.parse_or("scorer_retries", 2)?,
        mode,
        run_key,
        checkpoint: Some(checkpoint.clone()),
    };
    let run = lm_conditional_table(&pairs, &store, scorer.as_mut(), &run_cfg)?;
    let refused: Vec<String> = run.refused().map(|(p, r)| format!("{p} ({r})")).collect();
    if !refused.is_empty() {
        log::warn!("{} pair(s) dropped after refusals: {}", refused.len(), refused.join(", "));
    }
    let mut hdr = header(cfg, "cond-lm", &inputs)?;
    hdr.push(format!("model={}", scorer.model_id()));
    hdr.push(format!("prob_floor={floor}"));
    write_table(&l.model_table(&name), &run.table, &hdr)?;
    write_atomic(&l.factors(&name), |w| write_factor_log(w, &run.factors, &hdr))?;
    match fs::remove_file(&checkpoint) {
        Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e.into()),
        _ => {}
    }
    Ok(())
}

fn gammas(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let g: Vec<f64> = cfg.list("gammas", &DEFAULT_GAMMAS)?;
    if g.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(CliError::invalid("gammas must be non-negative"));
    }
    Ok(g)
}

fn report_resources(cfg: &RunConfig, l: &Layout) -> Result<Vec<String>, CliError> {
    let names: Vec<String> = match cfg.get("resources") {
        Some(_) => cfg.list("resources", &[])?,
        None => {
            let dir = require(l.models_dir(), "cond-static")?;
            tsv_stems(&dir)?
        }
    };
    if names.is_empty() {
        return Err(CliError::Dependency { artifact: l.models_dir(), subcommand: "cond-static" });
    }
    for n in &names {
        check_name(n)?;
    }
    Ok(names)
}

pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    let l = layout(cfg)?;
    let gammas = gammas(cfg)?;
    let bin_size: usize = cfg.parse_or("bin_size", 200)?;
    if bin_size == 0 {
        return Err(CliError::invalid("bin_size must be at least 1"));
    }
    let plot_scale: Option<f64> = match cfg.get("lar_plot_scale") {
        None => None,
        Some(_) => Some(cfg.parse_or("lar_plot_scale", 1000.0)?),
    };
    let names = datasets(cfg)?;
    for d in &names {
        require(l.pairs_dir(d), "annotate")?;
    }
    for d in &names {
        require(l.evoc_table(d), "cond-evoc")?;
    }
    let resources = report_resources(cfg, &l)?;
    let mut maps = Vec::new();
    for r in &resources {
        let path = require(l.model_table(r), if r.starts_with(cfg.get("lm_name").unwrap_or("lm")) { "cond-lm" } else { "cond-static" })?;
        maps.push(LarMap::from_table(&read_table(&path, r)?).map_err(CliError::invalid)?);
    }
    let out = l.report_dir();
    for d in &names {
        let sets = load_pair_sets(&l, d)?;
        let data = LarMap::from_table(&read_table(&l.evoc_table(d), d)?).map_err(CliError::invalid)?;
        let mut inputs = vec![(format!("pairs.{d}"), l.pairs_dir(d)), (format!("conditionals.{d}"), l.evoc_table(d))];
        inputs.extend(resources.iter().map(|r| (format!("conditionals.{r}"), l.model_table(r))));
        let hdr = header(cfg, "report", &inputs)?;
        let rep = MetricReport::build(&data, &maps, &sets, &gammas);
        write_atomic(&out.join(format!("{d}.tsv")), |w| rep.write_tsv(w, &hdr))?;
        write_atomic(&out.join(format!("{d}.txt")), |w| rep.write_text(w, &hdr))?;
        let mut all: Vec<&LarMap<f64>> = vec![&data];
        all.extend(maps.iter());
        let mut lar_hdr = hdr.clone();
        lar_hdr.push(match plot_scale {
            Some(s) => format!("values=sign(x)*ln(1+{s}*|x|)"),
            None => "values=lar".into(),
        });
        write_atomic(&out.join(format!("{d}.lar.csv")), |w| write_lar_csv(w, &sets, &all, plot_scale, &lar_hdr))?;
        for (r, m) in resources.iter().zip(&maps) {
            let fpath = l.factors(r);
            if fpath.exists() {
                write_bins(&out, d, r, &fpath, &data, m, &sets, &gammas, bin_size, &hdr)?;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn write_bins(
    out: &Path,
    dataset: &str,
    resource: &str,
    factors_path: &Path,
    data: &LarMap<f64>,
    res: &LarMap<f64>,
    sets: &BTreeMap<String, RelationPairSet>,
    gammas: &[f64],
    bin_size: usize,
    hdr: &[String],
) -> Result<(), CliError> {
    let factors = lm::read_factor_log(open(factors_path)?).map_err(CliError::invalid)?;
    let in_sets: HashSet<WordPair> =
        sets.values().flat_map(|s| s.pairs.iter().map(|(a, b)| WordPair::new(a.as_str(), b.as_str()))).collect();
    let usable: Vec<_> = factors
        .iter()
        .filter(|f| f.population > 0 && in_sets.contains(&WordPair::new(f.a.as_str(), f.b.as_str())))
        .filter(|f| data.get(&f.a, &f.b).is_some() && res.get(&f.a, &f.b).is_some())
        .collect();
    let by_population: Vec<_> = usable.iter().map(|f| ((f.a.clone(), f.b.clone()), f.population as f64)).collect();
    let by_distance: Vec<_> =
        usable.iter().filter_map(|f| f.mean_char_distance.map(|d| ((f.a.clone(), f.b.clone()), d))).collect();
    let mut h = hdr.to_vec();
    h.push(format!("factors={}", factors_path.display()));
    for &g in gammas {
        let acc = |p: &(String, String)| {
            let (x, y) = (data.get(&p.0, &p.1).unwrap_or(0.0), res.get(&p.0, &p.1).unwrap_or(0.0));
            f64::from(u8::from(metrics::direction(x, g) == metrics::direction(y, g)))
        };
        for (factor, log) in [("contexts", &by_population), ("char_distance", &by_distance)] {
            let bins = bin_analysis(log, acc, bin_size).map_err(CliError::invalid)?;
            let mut hg = h.clone();
            hg.push(format!("gamma={g}"));
            let path = out.join("bins").join(format!("{dataset}.{resource}.{factor}.g{g}.csv"));
            write_atomic(&path, |w| write_bins_csv(w, &bins, factor, &hg))?;
        }
    }
    Ok(())
}

pub fn simeval(cfg: &RunConfig) -> Result<(), CliError> {
    let l = layout(cfg)?;
    let golds = cfg.named_inputs("similarity.")?;
    if golds.is_empty() {
        return Err(CliError::invalid("no similarity.<name> entries configured"));
    }
    let vectors = cfg.named_inputs("vectors.")?;
    let mut inputs: Vec<(String, PathBuf)> = golds.iter().map(|(n, p)| (format!("similarity.{n}"), p.clone())).collect();
    inputs.extend(vectors.iter().map(|(n, p)| (format!("vectors.{n}"), p.clone())));
    let tables: Vec<String> = if l.models_dir().exists() { tsv_stems(&l.models_dir())? } else { Vec::new() };
    inputs.extend(tables.iter().map(|r| (format!("conditionals.{r}"), l.model_table(r))));

    let mut scored: Vec<(String, &'static str, BTreeMap<WordPair, f64>)> = Vec::new();
    let gold_data: BTreeMap<String, Vec<metrics::GoldRating>> = golds
        .iter()
        .map(|(n, p)| Ok((n.clone(), read_gold(open(p)?).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?)))
        .collect::<Result<_, CliError>>()?;
    for (name, path) in &vectors {
        let t = load_table_vectors::<f64>(path)?;
        let mut s = BTreeMap::new();
        for g in gold_data.values().flatten() {
            if let Ok(c) = asymgauge::embedding::cosine(&t, &g.a, &g.b) {
                s.insert(WordPair::new(g.a.as_str(), g.b.as_str()), c);
            }
        }
        scored.push((name.clone(), "cosine", s));
    }
    for r in &tables {
        scored.push((r.clone(), "geometric_mean", scores_from_table(&read_table(&l.model_table(r), r)?)));
    }
    if scored.is_empty() {
        return Err(CliError::invalid("simeval needs vectors.<name> entries or conditional tables"));
    }
    let hdr = header(cfg, "simeval", &inputs)?;
    let fmt = |v: f64| asymgauge::scalar::fmt_sig17(v);
    write_atomic(&l.simeval(), |w| {
        write_header(w, &hdr)?;
        writeln!(w, "gold\tresource\tmeasure\trho\tp_value\tused\texcluded")?;
        for (gname, gold) in &gold_data {
            for (res, measure, scores) in &scored {
                match similarity_eval(scores, gold) {
                    Ok(e) => writeln!(w, "{gname}\t{res}\t{measure}\t{}\t{}\t{}\t{}", fmt(e.rho), fmt(e.p_value), e.used, e.excluded)?,
                    Err(e) => {
                        log::warn!("{gname} / {res}: {e}");
                        writeln!(w, "{gname}\t{res}\t{measure}\tNA\tNA\t0\t{}", gold.len())?
                    }
                }
            }
        }
        Ok(())
    })
}

/// Wire-protocol scorer returning the closed-form mock probability. With
/// `fail_after`, exits without answering once that many batches are served.
pub fn mock_scorer(fail_after: Option<usize>) -> Result<(), CliError> {
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut served = 0;
    loop {
        let mut batch = String::new();
        let mut eof = false;
        loop {
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                eof = true;
                break;
            }
            if line.trim().is_empty() {
                break;
            }
            batch.push_str(&line);
        }
        if batch.is_empty() && eof {
            return Ok(());
        }
        if fail_after.is_some_and(|n| served >= n) {
            return Err(CliError::Scorer(format!("mock scorer stopping after {served} batch(es)")));
        }
        let requests = wire::read_requests(batch.as_bytes()).map_err(CliError::invalid)?;
        let results: Vec<ScoreResult> = requests
            .iter()
            .map(|r| ScoreResult {
                task_id: r.id.clone(),
                outcome: ScoreOutcome::Prob(ClosedFormMock::probability(r.offset)),
                model_id: ClosedFormMock.model_id().to_string(),
            })
            .collect();
        wire::write_responses(&mut out, &results)?;
        served += 1;
        if eof {
            return Ok(());
        }
    }
}
