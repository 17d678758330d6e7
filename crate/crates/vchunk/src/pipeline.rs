//! Experiment orchestration behind the CLI: dataset generation, candidate
//! growing, imitation training, list prediction, evaluation, and plotting.
//! Every step reads/writes plain text files so runs are diffable and
//! byte-reproducible.

use crate::assignment::{greedy_list, ratio_to_f64};
use crate::features::{theta, FeatureContext};
use crate::grower::{
    grid_seeds, grow_multi, GrowScorer, OracleScorer, PerturbedScorer, DEFAULT_MAX_CHUNK_SIZE,
};
use crate::imitation::{
    collect_grower_data, collect_list_data, predict_list, ForestListScorer, GreedyOracleScorer,
    TrainingScene,
};
use crate::learner::{fit_forest, ForestConfig, RegressionForest};
use crate::metrics::{abo, instance_accuracy, slot_scores};
use crate::report::{
    abo_bar_chart, manifest_line, parse_results_csv, results_csv, slot_line_chart, summary_csv,
    ResultRow,
};
use crate::scene::{iou, Chunk, Scene, Superpixel};
use crate::synth::{
    baseline_boxes, baseline_cc, baseline_intersection, stream_rng, synthetic_detector, Purpose,
    SemanticChannel, SynthConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 3,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub n_scenes: u32,
    pub list_budget: usize,
    pub seed_interval: u32,
    pub max_chunk_size: usize,
    pub target_class: u32,
    /// Perturbation level for the `perturbed` grow mode.
    pub eps: f64,
    pub synth: SynthConfig,
    pub forest: ForestConfig,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig::defaults()
    }
}

impl RunConfig {
    pub fn defaults() -> RunConfig {
        RunConfig {
            n_scenes: 20,
            list_budget: 5,
            seed_interval: 8,
            max_chunk_size: DEFAULT_MAX_CHUNK_SIZE,
            target_class: 1,
            eps: 0.05,
            synth: SynthConfig::default(),
            forest: ForestConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.n_scenes == 0 {
            return Err(PipelineError::Config("n_scenes must be positive".into()));
        }
        if self.list_budget == 0 {
            return Err(PipelineError::Config("list_budget must be positive".into()));
        }
        if self.seed_interval == 0 || self.max_chunk_size == 0 {
            return Err(PipelineError::Config(
                "seed_interval and max_chunk_size must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.synth.adjacency_pressure) {
            return Err(PipelineError::Config(
                "adjacency_pressure must be in [0,1]".into(),
            ));
        }
        if self.eps < 0.0 {
            return Err(PipelineError::Config("eps must be non-negative".into()));
        }
        Ok(())
    }

    pub fn load(path: Option<&Path>) -> Result<RunConfig, PipelineError> {
        // Keys missing from the file fall back to `defaults()` via serde.
        let mut config = RunConfig::defaults();
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            config = toml::from_str(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?;
        }
        Ok(config)
    }

    /// Every step echoes the effective config into its output directory.
    pub fn echo(&self, dir: &Path) -> Result<(), PipelineError> {
        let text =
            toml::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))?;
        let path = dir.join("effective_config.toml");
        fs::write(&path, text).map_err(io_err(&path))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn scene_path(data: &Path, index: u32) -> PathBuf {
    data.join("scenes").join(format!("scene_{index:04}.txt"))
}

fn channel_path(data: &Path, index: u32) -> PathBuf {
    data.join("channels").join(format!("channel_{index:04}.txt"))
}

pub fn load_scene(data: &Path, index: u32) -> Result<(Scene, SemanticChannel), PipelineError> {
    let scene = Scene::parse(&read_file(&scene_path(data, index))?)
        .map_err(|e| PipelineError::Other(format!("scene {index}: {e}")))?;
    let channel = SemanticChannel::parse(&read_file(&channel_path(data, index))?)
        .map_err(|e| PipelineError::Other(format!("channel {index}: {e}")))?;
    Ok((scene, channel))
}

/// Scene indices present in a dataset directory, sorted.
pub fn scene_indices(data: &Path) -> Result<Vec<u32>, PipelineError> {
    let dir = data.join("scenes");
    let mut out = Vec::new();
    for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
        let entry = entry.map_err(io_err(&dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(num) = name
            .strip_prefix("scene_")
            .and_then(|s| s.strip_suffix(".txt"))
        {
            if let Ok(i) = num.parse() {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

pub fn run_gen(config: &RunConfig, out: &Path) -> Result<(), PipelineError> {
    config.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let scenes: Vec<(u32, String, String)> = (0..config.n_scenes)
        .into_par_iter()
        .map(|i| {
            let (scene, channel) = crate::synth::generate_scene(&config.synth, i)
                .map_err(|e| PipelineError::Other(format!("scene {i}: {e}")))?;
            Ok((i, scene.serialize(), channel.serialize()))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut manifest = String::new();
    for (i, scene_text, channel_text) in &scenes {
        let sp = scene_path(out, *i);
        write_file(&sp, scene_text)?;
        write_file(&channel_path(out, *i), channel_text)?;
        manifest.push_str(&manifest_line(
            *i,
            config.synth.master_seed,
            &format!("scenes/scene_{i:04}.txt"),
            scene_text.as_bytes(),
        ));
    }
    write_file(&out.join("manifest.txt"), &manifest)?;
    config.echo(out)
}

// ---------------------------------------------------------------------------
// grow
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowMode {
    Oracle,
    Perturbed,
    Learned,
}

impl std::str::FromStr for GrowMode {
    type Err = String;
    fn from_str(s: &str) -> Result<GrowMode, String> {
        match s {
            "oracle" => Ok(GrowMode::Oracle),
            "perturbed" => Ok(GrowMode::Perturbed),
            "learned" => Ok(GrowMode::Learned),
            other => Err(format!("unknown grow mode `{other}`")),
        }
    }
}

/// Learned region-growing predictor 𝒢: forest over θ(s,c).
pub struct ForestGrowScorer<'a> {
    pub ctx: &'a FeatureContext<'a>,
    pub forest: &'a RegressionForest,
}

impl GrowScorer for ForestGrowScorer<'_> {
    fn score(&self, _scene: &Scene, sp: &Superpixel, chunk: &Chunk) -> f64 {
        let row = theta(self.ctx, sp, chunk).expect("grower never rescans members");
        self.forest.predict(&row).expect("dimensionality checked at load")
    }
}

pub fn candidate_file(dir: &Path, index: u32) -> PathBuf {
    dir.join(format!("cand_{index:04}.txt"))
}

/// `chunk <scene_id> <seed|-> <superpixel ids…>` per line.
pub fn serialize_chunks(scene_id: u32, chunks: &[(Option<u32>, &Chunk)]) -> String {
    let mut out = String::new();
    for (seed, c) in chunks {
        let ids: Vec<String> = c.ids.iter().map(u32::to_string).collect();
        let seed = seed.map_or("-".to_string(), |s| s.to_string());
        let _ = writeln!(out, "chunk {scene_id} {seed} {}", ids.join(" "));
    }
    out
}

pub fn parse_chunks(text: &str, scene: &Scene) -> Result<Vec<Chunk>, PipelineError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let mut parts = line.split_whitespace();
            if parts.next() != Some("chunk") {
                return Err(PipelineError::Other(format!("bad chunk line: {line}")));
            }
            let _scene_id = parts.next();
            let _seed = parts.next();
            let ids: Result<Vec<u32>, _> = parts.map(str::parse).collect();
            let ids = ids.map_err(|e| PipelineError::Other(format!("bad chunk ids: {e}")))?;
            Ok(Chunk::from_ids(scene, ids))
        })
        .collect()
}

pub fn grow_candidates(
    scene: &Scene,
    channel: &SemanticChannel,
    scene_index: u32,
    config: &RunConfig,
    mode: GrowMode,
    forest: Option<&RegressionForest>,
) -> Result<Vec<Chunk>, PipelineError> {
    let seeds = grid_seeds(scene, config.seed_interval);
    let mut out: Vec<Chunk> = Vec::new();
    let mut seen: std::collections::HashSet<Vec<u32>> = Default::default();
    let mut push_all = |chunks: Vec<Chunk>, out: &mut Vec<Chunk>| {
        for c in chunks {
            if seen.insert(c.ids.clone()) {
                out.push(c);
            }
        }
    };
    match mode {
        GrowMode::Oracle => {
            for g in &scene.instances {
                let chunks = grow_multi(
                    scene,
                    &OracleScorer { instance: g.id },
                    &seeds,
                    config.max_chunk_size,
                )
                .map_err(|e| PipelineError::Other(e.to_string()))?;
                push_all(chunks, &mut out);
            }
        }
        GrowMode::Perturbed => {
            let mut rng = stream_rng(config.synth.master_seed, scene_index, Purpose::Detector, 1);
            for g in &scene.instances {
                let scorer = PerturbedScorer::new(scene, g.id, config.eps, &mut rng);
                let chunks = grow_multi(scene, &scorer, &seeds, config.max_chunk_size)
                    .map_err(|e| PipelineError::Other(e.to_string()))?;
                push_all(chunks, &mut out);
            }
        }
        GrowMode::Learned => {
            let forest = forest.ok_or_else(|| {
                PipelineError::Config("learned grow mode requires --forest".into())
            })?;
            let ctx = FeatureContext::new(scene, channel);
            if forest.dim != ctx.theta_len() {
                return Err(PipelineError::Config(format!(
                    "grower forest expects {} features, scene yields {}",
                    forest.dim,
                    ctx.theta_len()
                )));
            }
            let scorer = ForestGrowScorer {
                ctx: &ctx,
                forest,
            };
            let chunks = grow_multi(scene, &scorer, &seeds, config.max_chunk_size)
                .map_err(|e| PipelineError::Other(e.to_string()))?;
            push_all(chunks, &mut out);
        }
    }
    Ok(out)
}

pub fn run_grow(
    config: &RunConfig,
    data: &Path,
    out: &Path,
    mode: GrowMode,
    forest_path: Option<&Path>,
) -> Result<(), PipelineError> {
    config.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let forest = forest_path
        .map(|p| RegressionForest::parse(&read_file(p)?).map_err(|e| PipelineError::Config(e.to_string())))
        .transpose()?;
    for i in scene_indices(data)? {
        let (scene, channel) = load_scene(data, i)?;
        let chunks = grow_candidates(&scene, &channel, i, config, mode, forest.as_ref())?;
        let rows: Vec<(Option<u32>, &Chunk)> = chunks.iter().map(|c| (None, c)).collect();
        write_file(&candidate_file(out, i), &serialize_chunks(i, &rows))?;
    }
    config.echo(out)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

pub fn run_train_grower(
    config: &RunConfig,
    data: &Path,
    out_forest: &Path,
    dump_csv: Option<&Path>,
) -> Result<(), PipelineError> {
    config.validate()?;
    let indices = scene_indices(data)?;
    let loaded: Vec<(u32, Scene, SemanticChannel)> = indices
        .iter()
        .map(|&i| load_scene(data, i).map(|(s, c)| (i, s, c)))
        .collect::<Result<_, _>>()?;
    let ctxs: Vec<(u32, FeatureContext)> = loaded
        .iter()
        .map(|(i, s, c)| (*i, FeatureContext::new(s, c)))
        .collect();
    let scenes: Vec<TrainingScene> = ctxs
        .iter()
        .map(|(i, ctx)| TrainingScene {
            scene_id: *i,
            ctx,
        })
        .collect();
    let data_set = collect_grower_data(&scenes, config.max_chunk_size)
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    if let Some(csv) = dump_csv {
        let names = crate::features::theta_column_names(config.synth.n_classes.max(2) as usize);
        write_file(csv, &data_set.to_csv(&names))?;
    }
    let forest =
        fit_forest(&data_set, &config.forest).map_err(|e| PipelineError::Other(e.to_string()))?;
    write_file(out_forest, &forest.serialize())
}

pub fn run_train_list(
    config: &RunConfig,
    data: &Path,
    candidates_dir: &Path,
    out_forest: &Path,
    dump_csv: Option<&Path>,
) -> Result<(), PipelineError> {
    config.validate()?;
    let indices = scene_indices(data)?;
    let loaded: Vec<(u32, Scene, SemanticChannel, String)> = indices
        .iter()
        .map(|&i| {
            let (s, c) = load_scene(data, i)?;
            let text = read_file(&candidate_file(candidates_dir, i))?;
            Ok((i, s, c, text))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut ctxs = Vec::new();
    let mut candidate_sets = Vec::new();
    for (i, s, c, text) in &loaded {
        candidate_sets.push(parse_chunks(text, s)?);
        ctxs.push((*i, FeatureContext::new(s, c)));
    }
    let scenes: Vec<TrainingScene> = ctxs
        .iter()
        .map(|(i, ctx)| TrainingScene {
            scene_id: *i,
            ctx,
        })
        .collect();
    let data_set = collect_list_data(&scenes, &candidate_sets, config.list_budget)
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    if let Some(csv) = dump_csv {
        let names = crate::features::phi_column_names(config.synth.n_classes.max(2) as usize);
        write_file(csv, &data_set.to_csv(&names))?;
    }
    let forest =
        fit_forest(&data_set, &config.forest).map_err(|e| PipelineError::Other(e.to_string()))?;
    write_file(out_forest, &forest.serialize())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictMode {
    Learned,
    Oracle,
}

impl std::str::FromStr for PredictMode {
    type Err = String;
    fn from_str(s: &str) -> Result<PredictMode, String> {
        match s {
            "learned" => Ok(PredictMode::Learned),
            "oracle" => Ok(PredictMode::Oracle),
            other => Err(format!("unknown predict mode `{other}`")),
        }
    }
}

pub fn list_file(dir: &Path, index: u32) -> PathBuf {
    dir.join(format!("list_{index:04}.txt"))
}

pub fn run_predict(
    config: &RunConfig,
    data: &Path,
    candidates_dir: &Path,
    out: &Path,
    mode: PredictMode,
    forest_path: Option<&Path>,
) -> Result<(), PipelineError> {
    config.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let forest = forest_path
        .map(|p| RegressionForest::parse(&read_file(p)?).map_err(|e| PipelineError::Config(e.to_string())))
        .transpose()?;
    if mode == PredictMode::Learned && forest.is_none() {
        return Err(PipelineError::Config(
            "learned predict mode requires --forest".into(),
        ));
    }
    for i in scene_indices(data)? {
        let (scene, channel) = load_scene(data, i)?;
        let candidates = parse_chunks(&read_file(&candidate_file(candidates_dir, i))?, &scene)?;
        if candidates.is_empty() {
            write_file(&list_file(out, i), "")?;
            continue;
        }
        let ctx = FeatureContext::new(&scene, &channel);
        let list = match mode {
            PredictMode::Learned => {
                let scorer = ForestListScorer {
                    forest: forest.as_ref().unwrap(),
                };
                predict_list(&ctx, &candidates, &scorer, config.list_budget)
                    .map_err(|e| PipelineError::Other(e.to_string()))?
            }
            PredictMode::Oracle => {
                let scorer = GreedyOracleScorer {
                    instances: &scene.instances,
                };
                predict_list(&ctx, &candidates, &scorer, config.list_budget)
                    .map_err(|e| PipelineError::Other(e.to_string()))?
            }
        };
        let rows: Vec<(Option<u32>, &Chunk)> =
            list.entries.iter().map(|e| (None, &e.chunk)).collect();
        write_file(&list_file(out, i), &serialize_chunks(i, &rows))?;
    }
    config.echo(out)
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

pub struct SceneEval {
    pub scene_index: u32,
    pub rows: Vec<ResultRow>,
    /// Number of chunks the CC baseline produced vs. instance count.
    pub cc_chunks: usize,
    pub n_instances: usize,
}

/// Per-scene metric rows for every method: slot_1..slot_k prefix scores, ABO
/// over the method's own chunks, and instance accuracy. The `pool` method
/// reports candidate-pool ABO and the pool-restricted oracle ceiling.
pub fn eval_scene(
    scene: &Scene,
    channel: &SemanticChannel,
    scene_index: u32,
    config: &RunConfig,
    candidates: &[Chunk],
    vc_list: &[Chunk],
) -> SceneEval {
    let k = config.list_budget;
    let boxes = synthetic_detector(scene, &config.synth, scene_index);
    let cc = baseline_cc(scene, channel, config.target_class);
    let box_chunks = baseline_boxes(scene, &boxes);
    let inter = baseline_intersection(scene, channel, &boxes, config.target_class);
    let cc_chunks = cc.len();

    let mut rows = Vec::new();
    let methods: [(&str, &[Chunk]); 4] = [
        ("vc", vc_list),
        ("cc", &cc),
        ("boxes", &box_chunks),
        ("intersection", &inter),
    ];
    for (name, chunks) in methods {
        let refs: Vec<&Chunk> = chunks.iter().collect();
        for (i, v) in slot_scores(&refs, &scene.instances, k).iter().enumerate() {
            rows.push(ResultRow {
                method: name.to_string(),
                scene: scene_index,
                slot: format!("slot_{}", i + 1),
                score: ratio_to_f64(v),
            });
        }
        rows.push(ResultRow {
            method: name.to_string(),
            scene: scene_index,
            slot: "abo".to_string(),
            score: ratio_to_f64(&abo(chunks, &scene.instances)),
        });
        rows.push(ResultRow {
            method: name.to_string(),
            scene: scene_index,
            slot: "inst_acc".to_string(),
            score: ratio_to_f64(&instance_accuracy(&refs, &scene.instances)),
        });
    }
    rows.push(ResultRow {
        method: "pool".to_string(),
        scene: scene_index,
        slot: "abo".to_string(),
        score: ratio_to_f64(&abo(candidates, &scene.instances)),
    });
    // Pool-restricted oracle ceiling R̄(c_G*): mean best IoU over instances.
    let pool_best: f64 = scene
        .instances
        .iter()
        .map(|g| {
            candidates
                .iter()
                .map(|c| iou(c, g))
                .max()
                .map_or(0.0, |r| r.to_f64())
        })
        .sum::<f64>()
        / scene.n_instances() as f64;
    rows.push(ResultRow {
        method: "pool".to_string(),
        scene: scene_index,
        slot: "r_star_pool".to_string(),
        score: pool_best,
    });
    SceneEval {
        scene_index,
        rows,
        cc_chunks,
        n_instances: scene.n_instances(),
    }
}

pub fn run_eval(
    config: &RunConfig,
    data: &Path,
    candidates_dir: &Path,
    lists_dir: &Path,
    out: &Path,
) -> Result<(), PipelineError> {
    config.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut rows = Vec::new();
    let mut merged = 0usize;
    let mut adjacent_total = 0usize;
    for i in scene_indices(data)? {
        let (scene, channel) = load_scene(data, i)?;
        let candidates = parse_chunks(&read_file(&candidate_file(candidates_dir, i))?, &scene)?;
        let vc_list = parse_chunks(&read_file(&list_file(lists_dir, i))?, &scene)?;
        let eval = eval_scene(&scene, &channel, i, config, &candidates, &vc_list);
        if eval.n_instances >= 2 {
            adjacent_total += 1;
            if eval.cc_chunks < eval.n_instances {
                merged += 1;
            }
        }
        rows.extend(eval.rows);
    }
    let results = results_csv(&rows);
    write_file(&out.join("results.csv"), &results)?;
    let mut summary = summary_csv(&rows);
    if adjacent_total > 0 {
        let _ = writeln!(
            summary,
            "cc,merged_component_rate,{}",
            merged as f64 / adjacent_total as f64
        );
    }
    write_file(&out.join("summary.csv"), &summary)?;
    config.echo(out)
}

/// End-to-end identity check: the oracle-predictor pipeline must reproduce
/// greedy_list values per scene.
pub fn oracle_eval_matches_greedy(
    scene: &Scene,
    channel: &SemanticChannel,
    candidates: &[Chunk],
    k: usize,
) -> bool {
    if candidates.is_empty() {
        return true;
    }
    let ctx = FeatureContext::new(scene, channel);
    let scorer = GreedyOracleScorer {
        instances: &scene.instances,
    };
    let predicted = match predict_list(&ctx, candidates, &scorer, k) {
        Ok(l) => l,
        Err(_) => return false,
    };
    let reference = greedy_list(candidates, &scene.instances, k);
    predicted.chunk_indices() == reference.chunk_indices()
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

pub fn run_plot(results_path: &Path, out: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let rows = parse_results_csv(&read_file(results_path)?);
    if rows.is_empty() {
        return Err(PipelineError::Other(format!(
            "no result rows in {}",
            results_path.display()
        )));
    }
    // Mean slot scores per method.
    let mut acc: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    let mut abo_acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in &rows {
        if let Some(slot) = r.slot.strip_prefix("slot_") {
            if let Ok(i) = slot.parse::<usize>() {
                let e = acc.entry((r.method.clone(), i)).or_insert((0.0, 0));
                e.0 += r.score;
                e.1 += 1;
            }
        } else if r.slot == "abo" {
            let e = abo_acc.entry(r.method.clone()).or_insert((0.0, 0));
            e.0 += r.score;
            e.1 += 1;
        }
    }
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((method, slot), (sum, n)) in acc {
        let v = series.entry(method).or_default();
        assert_eq!(v.len() + 1, slot, "slots are contiguous from 1");
        v.push(sum / n as f64);
    }
    let bars: BTreeMap<String, f64> = abo_acc
        .into_iter()
        .map(|(m, (sum, n))| (m, sum / n as f64))
        .collect();
    write_file(&out.join("slot_scores.svg"), &slot_line_chart(&series))?;
    write_file(&out.join("abo.svg"), &abo_bar_chart(&bars))
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

pub struct VerifySizes {
    pub hungarian_cases: usize,
    pub half_approx_cases: usize,
    pub chain_optimality_cases: usize,
    pub perturbation_scenes: usize,
    pub perturbation_trials: usize,
    pub violation_rate_scenes: usize,
    pub violation_rate_trials: usize,
    pub incremental_cases: usize,
}

impl VerifySizes {
    pub fn full() -> VerifySizes {
        VerifySizes {
            hungarian_cases: 1000,
            half_approx_cases: 1000,
            chain_optimality_cases: 200,
            perturbation_scenes: 500,
            perturbation_trials: 20,
            violation_rate_scenes: 50,
            violation_rate_trials: 20,
            incremental_cases: 100_000,
        }
    }

    pub fn fast() -> VerifySizes {
        VerifySizes {
            hungarian_cases: 100,
            half_approx_cases: 50,
            chain_optimality_cases: 50,
            perturbation_scenes: 25,
            perturbation_trials: 5,
            violation_rate_scenes: 10,
            violation_rate_trials: 10,
            incremental_cases: 2000,
        }
    }
}

pub fn run_verify(sizes: &VerifySizes, seed: u64, out: Option<&Path>) -> Result<bool, PipelineError> {
    use crate::verify::*;
    let mut lines = Vec::new();
    let mut all_ok = true;
    let push = |r: SuiteReport, lines: &mut Vec<String>, all_ok: &mut bool| {
        println!("{}", r.line());
        lines.push(r.line());
        *all_ok &= r.ok();
    };
    push(hungarian_suite(sizes.hungarian_cases, seed), &mut lines, &mut all_ok);
    push(
        half_approx_suite(sizes.half_approx_cases, seed.wrapping_add(1))
            .map_err(|e| PipelineError::Other(e.to_string()))?,
        &mut lines,
        &mut all_ok,
    );
    push(chain_optimality_suite(sizes.chain_optimality_cases, seed.wrapping_add(2)), &mut lines, &mut all_ok);
    push(
        perturbation_floor_suite(
            sizes.perturbation_scenes,
            sizes.perturbation_trials,
            &[0.01, 0.05, 0.1],
            seed.wrapping_add(3),
        ),
        &mut lines,
        &mut all_ok,
    );
    let (reports, suite) = violation_rate_suite(
        sizes.violation_rate_scenes,
        sizes.violation_rate_trials,
        0.05,
        &[0.5, 0.25],
        seed.wrapping_add(4),
    );
    for r in &reports {
        let line = format!(
            "  violation rate eta {}: rate {:.4}, mean δ̂ {:.6}",
            r.eta, r.violation_rate, r.mean_delta_hat
        );
        println!("{line}");
        lines.push(line);
    }
    push(suite, &mut lines, &mut all_ok);
    push(
        incremental_iou_suite(sizes.incremental_cases, seed.wrapping_add(5)),
        &mut lines,
        &mut all_ok,
    );
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_file(&dir.join("verify_report.txt"), &(lines.join("\n") + "\n"))?;
    }
    Ok(all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_config() -> RunConfig {
        let mut config = RunConfig::defaults();
        config.n_scenes = 3;
        config.synth.width = 32;
        config.synth.height = 32;
        config.synth.n_superpixels = 24;
        config.list_budget = 3;
        config.forest.n_trees = 5;
        config.max_chunk_size = 10;
        config
    }

    #[test]
    fn gen_grow_predict_eval_round_trip() {
        let dir = tempdir().unwrap();
        let data = dir.path().join("data");
        let cands = dir.path().join("cands");
        let lists = dir.path().join("lists");
        let report = dir.path().join("report");
        let config = small_config();
        run_gen(&config, &data).unwrap();
        assert!(data.join("manifest.txt").exists());
        assert!(data.join("effective_config.toml").exists());
        assert_eq!(scene_indices(&data).unwrap(), vec![0, 1, 2]);

        run_grow(&config, &data, &cands, GrowMode::Oracle, None).unwrap();
        run_predict(&config, &data, &cands, &lists, PredictMode::Oracle, None).unwrap();
        run_eval(&config, &data, &cands, &lists, &report).unwrap();
        let results = read_file(&report.join("results.csv")).unwrap();
        assert!(results.starts_with("method,scene,slot,score\n"));
        assert!(results.contains("vc,0,slot_1,"));
        assert!(results.contains("cc,"));
        run_plot(&report.join("results.csv"), &report).unwrap();
        assert!(report.join("slot_scores.svg").exists());
        assert!(report.join("abo.svg").exists());
    }

    #[test]
    fn chunk_file_round_trip() {
        let config = small_config();
        let (scene, _) = crate::synth::generate_scene(&config.synth, 0).unwrap();
        let a = Chunk::from_ids(&scene, vec![0, 3]);
        let b = Chunk::from_ids(&scene, vec![1]);
        let text = serialize_chunks(0, &[(Some(3), &a), (None, &b)]);
        let back = parse_chunks(&text, &scene).unwrap();
        assert_eq!(back[0].ids, a.ids);
        assert_eq!(back[1].ids, b.ids);
    }

    #[test]
    fn invalid_config_is_config_error() {
        let mut config = small_config();
        config.n_scenes = 0;
        let err = run_gen(&config, Path::new("/nonexistent")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn train_and_learned_pipeline_smoke() {
        let dir = tempdir().unwrap();
        let data = dir.path().join("data");
        let cands = dir.path().join("cands");
        let lists = dir.path().join("lists");
        let config = small_config();
        run_gen(&config, &data).unwrap();
        run_grow(&config, &data, &cands, GrowMode::Oracle, None).unwrap();

        let gf = dir.path().join("grower.forest");
        run_train_grower(&config, &data, &gf, None).unwrap();
        let lf = dir.path().join("list.forest");
        run_train_list(&config, &data, &cands, &lf, None).unwrap();

        let learned_cands = dir.path().join("learned_cands");
        run_grow(&config, &data, &learned_cands, GrowMode::Learned, Some(&gf)).unwrap();
        run_predict(
            &config,
            &data,
            &learned_cands,
            &lists,
            PredictMode::Learned,
            Some(&lf),
        )
        .unwrap();
        let text = read_file(&list_file(&lists, 0)).unwrap();
        assert!(!text.trim().is_empty());
    }

    #[test]
    fn verify_fast_passes() {
        assert!(run_verify(&VerifySizes::fast(), 17, None).unwrap());
    }
}
