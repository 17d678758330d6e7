//! Deterministic synthetic scene generation: Voronoi superpixels, multi
//! instance layouts with controllable adjacency, a noisy per-superpixel
//! semantic channel and per-pixel colors, plus the detector stand-in and the
//! three comparison baselines.
//!
//! RNG discipline: every random decision draws from a ChaCha stream derived
//! from `(master_seed, scene_index, purpose, attempt)`, so adding features
//! never perturbs existing streams and scenes regenerate bit-identically.

use crate::scene::{build_scene, Chunk, InstanceSpec, PixelGrid, Scene, SceneError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scene {scene_index}: instance placement failed after {attempts} attempts")]
    PlacementFailed { scene_index: u32, attempts: u32 },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("channel parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFamily {
    Rectangles,
    Ellipses,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: u32,
    pub height: u32,
    pub n_superpixels: u32,
    pub n_instances_min: u32,
    pub n_instances_max: u32,
    pub shape: ShapeFamily,
    /// Probability that each instance after the first is placed touching an
    /// earlier one.
    pub adjacency_pressure: f64,
    /// Classes including background 0; instances carry class 1.
    pub n_classes: u32,
    /// Dirichlet concentration added on the majority class; higher is cleaner.
    pub semantic_concentration: f64,
    /// Uniform per-pixel color noise half-width.
    pub color_noise_spread: f64,
    /// Detector box center jitter, as a fraction of the image side.
    pub detector_jitter_sigma: f64,
    pub detector_drop_prob: f64,
    pub detector_dup_prob: f64,
    pub master_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> SynthConfig {
        SynthConfig {
            width: 64,
            height: 64,
            n_superpixels: 96,
            n_instances_min: 2,
            n_instances_max: 3,
            shape: ShapeFamily::Rectangles,
            adjacency_pressure: 0.5,
            n_classes: 2,
            semantic_concentration: 8.0,
            color_noise_spread: 0.08,
            detector_jitter_sigma: 0.05,
            detector_drop_prob: 0.1,
            detector_dup_prob: 0.05,
            master_seed: 42,
        }
    }
}

/// Stream purposes; combined with the scene index and retry attempt into a
/// ChaCha stream id.
#[derive(Clone, Copy, Debug)]
pub enum Purpose {
    Sites = 0,
    Instances = 1,
    Semantic = 2,
    Color = 3,
    Detector = 4,
}

pub fn stream_rng(master_seed: u64, scene_index: u32, purpose: Purpose, attempt: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((scene_index as u64) << 12) | ((attempt as u64) << 4) | purpose as u64);
    rng
}

/// Per-superpixel class score vectors (on the simplex) and per-pixel colors.
/// Colors are quantized to u8 so serialization is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticChannel {
    pub class_scores: Vec<Vec<f64>>,
    pub colors: Vec<[u8; 3]>,
}

impl SemanticChannel {
    pub fn n_classes(&self) -> usize {
        self.class_scores.first().map_or(0, |s| s.len())
    }

    pub fn argmax_class(&self, superpixel: u32) -> u32 {
        let scores = &self.class_scores[superpixel as usize];
        let mut best = 0usize;
        for (i, v) in scores.iter().enumerate() {
            if *v > scores[best] {
                best = i;
            }
        }
        best as u32
    }
}

const MAX_ATTEMPTS: u32 = 32;

/// Fully deterministic in `(config, scene_index)`.
pub fn generate_scene(
    config: &SynthConfig,
    scene_index: u32,
) -> Result<(Scene, SemanticChannel), SynthError> {
    let grid = voronoi_grid(config, scene_index);
    let masks = place_instances(config, scene_index, &grid)?;
    let specs = masks
        .into_iter()
        .map(|mask| InstanceSpec {
            class_label: 1,
            mask,
        })
        .collect();
    let scene = build_scene(grid, specs)?;
    let channel = make_channel(config, scene_index, &scene);
    Ok((scene, channel))
}

fn voronoi_grid(config: &SynthConfig, scene_index: u32) -> PixelGrid {
    let mut rng = stream_rng(config.master_seed, scene_index, Purpose::Sites, 0);
    let n_pixels = (config.width * config.height) as usize;
    let n = (config.n_superpixels as usize).min(n_pixels);
    // Distinct site pixels: each site claims its own pixel, so no cell is empty.
    let mut taken = vec![false; n_pixels];
    let mut sites: Vec<(i64, i64)> = Vec::with_capacity(n);
    while sites.len() < n {
        let p = rng.gen_range(0..n_pixels);
        if !taken[p] {
            taken[p] = true;
            sites.push(((p as u32 / config.width) as i64, (p as u32 % config.width) as i64));
        }
    }
    let mut ids = vec![0u32; n_pixels];
    for r in 0..config.height as i64 {
        for c in 0..config.width as i64 {
            let mut best = 0usize;
            let mut best_d = i64::MAX;
            for (i, (sr, sc)) in sites.iter().enumerate() {
                let d = (r - sr) * (r - sr) + (c - sc) * (c - sc);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            ids[(r as u32 * config.width + c as u32) as usize] = best as u32;
        }
    }
    PixelGrid::new(config.width, config.height, ids)
}

#[derive(Clone, Copy, Debug)]
struct Shape {
    /// Center (row, col) and half extents.
    cr: i64,
    cc: i64,
    hr: i64,
    hc: i64,
}

impl Shape {
    fn mask(&self, family: ShapeFamily, width: u32, height: u32) -> Vec<u32> {
        let mut px = Vec::new();
        for r in (self.cr - self.hr).max(0)..=(self.cr + self.hr).min(height as i64 - 1) {
            for c in (self.cc - self.hc).max(0)..=(self.cc + self.hc).min(width as i64 - 1) {
                let inside = match family {
                    ShapeFamily::Rectangles => true,
                    ShapeFamily::Ellipses => {
                        let dr = (r - self.cr) as f64 / (self.hr as f64 + 0.5);
                        let dc = (c - self.cc) as f64 / (self.hc as f64 + 0.5);
                        dr * dr + dc * dc <= 1.0
                    }
                };
                if inside {
                    px.push(r as u32 * width + c as u32);
                }
            }
        }
        px
    }
}

fn place_instances(
    config: &SynthConfig,
    scene_index: u32,
    grid: &PixelGrid,
) -> Result<Vec<Vec<u32>>, SynthError> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(config.master_seed, scene_index, Purpose::Instances, attempt);
        let n = rng.gen_range(config.n_instances_min..=config.n_instances_max) as usize;
        let side = config.width.min(config.height) as i64;
        let min_h = (side / 10).max(2);
        let max_h = (side / 4).max(min_h + 1);
        let mut shapes: Vec<Shape> = Vec::with_capacity(n);
        for i in 0..n {
            let hr = rng.gen_range(min_h..=max_h);
            let hc = rng.gen_range(min_h..=max_h);
            let adjacent = i > 0 && rng.gen_bool(config.adjacency_pressure);
            let (cr, cc) = if adjacent {
                let prev = shapes[rng.gen_range(0..shapes.len())];
                // Abut a random side of the neighbor with overlapping extent.
                match rng.gen_range(0..4) {
                    0 => (prev.cr, prev.cc + prev.hc + hc + 1), // right
                    1 => (prev.cr, prev.cc - prev.hc - hc - 1), // left
                    2 => (prev.cr + prev.hr + hr + 1, prev.cc), // below
                    _ => (prev.cr - prev.hr - hr - 1, prev.cc), // above
                }
            } else {
                (
                    rng.gen_range(0..config.height as i64),
                    rng.gen_range(0..config.width as i64),
                )
            };
            shapes.push(Shape { cr, cc, hr, hc });
        }

        // Later instance loses contested pixels so masks stay disjoint.
        let mut owner: Vec<i32> = vec![-1; grid.n_pixels() as usize];
        let mut masks: Vec<Vec<u32>> = Vec::with_capacity(n);
        let mut ok = true;
        for (i, shape) in shapes.iter().enumerate() {
            let mut mask = Vec::new();
            for p in shape.mask(config.shape, config.width, config.height) {
                if owner[p as usize] < 0 {
                    owner[p as usize] = i as i32;
                    mask.push(p);
                }
            }
            if mask.is_empty() {
                ok = false;
                break;
            }
            masks.push(mask);
        }
        if !ok {
            continue;
        }
        if config.adjacency_pressure >= 1.0 && masks.len() >= 2 && !all_adjacent(&masks, grid) {
            continue;
        }
        return Ok(masks);
    }
    Err(SynthError::PlacementFailed {
        scene_index,
        attempts: MAX_ATTEMPTS,
    })
}

/// Every instance after the first shares a 4-adjacent pixel boundary with
/// some other instance.
fn all_adjacent(masks: &[Vec<u32>], grid: &PixelGrid) -> bool {
    let mut owner: Vec<i32> = vec![-1; grid.n_pixels() as usize];
    for (i, mask) in masks.iter().enumerate() {
        for &p in mask {
            owner[p as usize] = i as i32;
        }
    }
    let w = grid.width as usize;
    let mut touches = vec![false; masks.len()];
    for p in 0..grid.n_pixels() as usize {
        if owner[p] < 0 {
            continue;
        }
        let r = p / w;
        let c = p % w;
        let mut check = |q: usize| {
            if owner[q] >= 0 && owner[q] != owner[p] {
                touches[owner[p] as usize] = true;
                touches[owner[q] as usize] = true;
            }
        };
        if c + 1 < w {
            check(p + 1);
        }
        if r + 1 < grid.height as usize {
            check(p + w);
        }
    }
    touches.iter().all(|&t| t)
}

fn make_channel(config: &SynthConfig, scene_index: u32, scene: &Scene) -> SemanticChannel {
    let n_classes = config.n_classes.max(2) as usize;
    let mut sem_rng = stream_rng(config.master_seed, scene_index, Purpose::Semantic, 0);
    let mut owner: Vec<u32> = vec![0; scene.grid.n_pixels() as usize];
    for g in &scene.instances {
        for &p in &g.mask {
            owner[p as usize] = g.class_label;
        }
    }
    let class_scores = scene
        .superpixels
        .iter()
        .map(|sp| {
            let mut counts = vec![0u64; n_classes];
            for &p in &sp.pixels {
                counts[owner[p as usize] as usize] += 1;
            }
            let majority = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            dirichlet_onehot(n_classes, majority, config.semantic_concentration, &mut sem_rng)
        })
        .collect();

    let mut color_rng = stream_rng(config.master_seed, scene_index, Purpose::Color, 0);
    let bg_base = [0.45f64, 0.45, 0.45];
    let instance_base: Vec<[f64; 3]> = scene
        .instances
        .iter()
        .map(|_| {
            [
                color_rng.gen_range(0.0..1.0),
                color_rng.gen_range(0.0..1.0),
                color_rng.gen_range(0.0..1.0),
            ]
        })
        .collect();
    let mut inst_owner: Vec<i32> = vec![-1; scene.grid.n_pixels() as usize];
    for g in &scene.instances {
        for &p in &g.mask {
            inst_owner[p as usize] = g.id as i32;
        }
    }
    let spread = config.color_noise_spread;
    let colors = (0..scene.grid.n_pixels())
        .map(|p| {
            let base = match inst_owner[p as usize] {
                -1 => bg_base,
                i => instance_base[i as usize],
            };
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let v = (base[ch] + color_rng.gen_range(-spread..=spread)).clamp(0.0, 1.0);
                px[ch] = (v * 255.0).round() as u8;
            }
            px
        })
        .collect();

    SemanticChannel {
        class_scores,
        colors,
    }
}

/// Sample Dirichlet(α) with α_j = 1 + concentration·[j = majority], via
/// normalized Gamma draws.
fn dirichlet_onehot(
    n_classes: usize,
    majority: usize,
    concentration: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n_classes)
        .map(|j| {
            let alpha = if j == majority {
                1.0 + concentration
            } else {
                1.0
            };
            Gamma::new(alpha, 1.0).expect("valid gamma").sample(rng)
        })
        .collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

// ---------------------------------------------------------------------------
// Synthetic detector and baselines
// ---------------------------------------------------------------------------

/// Axis-aligned pixel box, inclusive bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DetectorBox {
    pub r0: i64,
    pub c0: i64,
    pub r1: i64,
    pub c1: i64,
}

impl DetectorBox {
    pub fn contains(&self, r: i64, c: i64) -> bool {
        r >= self.r0 && r <= self.r1 && c >= self.c0 && c <= self.c1
    }
}

fn instance_bbox(scene: &Scene, g: u32) -> DetectorBox {
    let w = scene.grid.width as i64;
    let mut b = DetectorBox {
        r0: i64::MAX,
        c0: i64::MAX,
        r1: i64::MIN,
        c1: i64::MIN,
    };
    for &p in &scene.instances[g as usize].mask {
        let (r, c) = ((p as i64) / w, (p as i64) % w);
        b.r0 = b.r0.min(r);
        b.c0 = b.c0.min(c);
        b.r1 = b.r1.max(r);
        b.c1 = b.c1.max(c);
    }
    b
}

/// Noisy ground-truth boxes: jittered centers, occasional drops and
/// duplicates, in instance order.
pub fn synthetic_detector(scene: &Scene, config: &SynthConfig, scene_index: u32) -> Vec<DetectorBox> {
    let mut rng = stream_rng(config.master_seed, scene_index, Purpose::Detector, 0);
    let side = scene.grid.width.min(scene.grid.height) as f64;
    let sigma = config.detector_jitter_sigma * side;
    let normal = rand_distr::Normal::new(0.0, sigma.max(1e-9)).expect("valid normal");
    let mut out = Vec::new();
    for g in 0..scene.n_instances() as u32 {
        let emit_jittered = |rng: &mut ChaCha8Rng| {
            let b = instance_bbox(scene, g);
            let (dr, dc) = if sigma > 0.0 {
                (
                    normal.sample(rng).round() as i64,
                    normal.sample(rng).round() as i64,
                )
            } else {
                (0, 0)
            };
            DetectorBox {
                r0: b.r0 + dr,
                c0: b.c0 + dc,
                r1: b.r1 + dr,
                c1: b.c1 + dc,
            }
        };
        if rng.gen_bool(config.detector_drop_prob) {
            continue;
        }
        out.push(emit_jittered(&mut rng));
        if rng.gen_bool(config.detector_dup_prob) {
            out.push(emit_jittered(&mut rng));
        }
    }
    out
}

/// Connected components of the argmax semantic labeling, restricted to the
/// target class; components are chunks ordered by area descending.
pub fn baseline_cc(scene: &Scene, channel: &SemanticChannel, target_class: u32) -> Vec<Chunk> {
    let n = scene.n_superpixels();
    let labels: Vec<u32> = (0..n as u32).map(|i| channel.argmax_class(i)).collect();

    // Union-find over target-class superpixels joined by pixel 4-adjacency.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let w = scene.grid.width as usize;
    let h = scene.grid.height as usize;
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let a = scene.grid.superpixel_id[p] as usize;
            if labels[a] != target_class {
                continue;
            }
            let join = |q: usize, parent: &mut Vec<usize>| {
                let b = scene.grid.superpixel_id[q] as usize;
                if b != a && labels[b] == target_class {
                    let (ra, rb) = (find(parent, a), find(parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            };
            if c + 1 < w {
                join(p + 1, &mut parent);
            }
            if r + 1 < h {
                join(p + w, &mut parent);
            }
        }
    }

    let mut components: std::collections::BTreeMap<usize, Vec<u32>> = Default::default();
    for i in 0..n {
        if labels[i] == target_class {
            let root = find(&mut parent, i);
            components.entry(root).or_default().push(i as u32);
        }
    }
    let mut chunks: Vec<Chunk> = components
        .into_values()
        .map(|ids| Chunk::from_ids(scene, ids))
        .collect();
    chunks.sort_by(|a, b| b.area.cmp(&a.area).then(a.ids.cmp(&b.ids)));
    chunks
}

/// Each detector box becomes the chunk of superpixels whose majority area
/// lies inside the box. Empty chunks are dropped.
pub fn baseline_boxes(scene: &Scene, boxes: &[DetectorBox]) -> Vec<Chunk> {
    boxes
        .iter()
        .filter_map(|b| {
            let ids = superpixels_majority_inside(scene, b, None);
            if ids.is_empty() {
                None
            } else {
                Some(Chunk::from_ids(scene, ids))
            }
        })
        .collect()
}

/// For each box, the chunk of target-class superpixels with majority area
/// inside it; empty results dropped.
pub fn baseline_intersection(
    scene: &Scene,
    channel: &SemanticChannel,
    boxes: &[DetectorBox],
    target_class: u32,
) -> Vec<Chunk> {
    boxes
        .iter()
        .filter_map(|b| {
            let ids = superpixels_majority_inside(scene, b, Some((channel, target_class)));
            if ids.is_empty() {
                None
            } else {
                Some(Chunk::from_ids(scene, ids))
            }
        })
        .collect()
}

fn superpixels_majority_inside(
    scene: &Scene,
    b: &DetectorBox,
    class_filter: Option<(&SemanticChannel, u32)>,
) -> Vec<u32> {
    let w = scene.grid.width as i64;
    scene
        .superpixels
        .iter()
        .filter(|sp| {
            if let Some((channel, target)) = class_filter {
                if channel.argmax_class(sp.id) != target {
                    return false;
                }
            }
            let inside = sp
                .pixels
                .iter()
                .filter(|&&p| b.contains(p as i64 / w, p as i64 % w))
                .count() as u64;
            2 * inside > sp.area
        })
        .map(|sp| sp.id)
        .collect()
}

// ---------------------------------------------------------------------------
// Channel serialization
// ---------------------------------------------------------------------------

impl SemanticChannel {
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "channel {} {}",
            self.class_scores.len(),
            self.n_classes()
        );
        for scores in &self.class_scores {
            let row: Vec<String> = scores.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        let _ = writeln!(out, "colors {}", self.colors.len());
        for px in &self.colors {
            let _ = writeln!(out, "{} {} {}", px[0], px[1], px[2]);
        }
        out
    }

    pub fn parse(text: &str) -> Result<SemanticChannel, SynthError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, msg: &str| SynthError::Parse {
            line,
            msg: msg.to_string(),
        };
        let (_, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "channel" {
            return Err(err(1, "expected `channel <n_sp> <n_classes>`"));
        }
        let n_sp: usize = parts[1].parse().map_err(|_| err(1, "bad count"))?;
        let mut class_scores = Vec::with_capacity(n_sp);
        for _ in 0..n_sp {
            let (ln, line) = lines.next().ok_or_else(|| err(0, "missing scores"))?;
            let scores: Result<Vec<f64>, _> =
                line.split_whitespace().map(|t| t.parse()).collect();
            class_scores.push(scores.map_err(|_| err(ln + 1, "bad score"))?);
        }
        let (ln, header) = lines.next().ok_or_else(|| err(0, "missing colors header"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 2 || parts[0] != "colors" {
            return Err(err(ln + 1, "expected `colors <n_pixels>`"));
        }
        let n_px: usize = parts[1].parse().map_err(|_| err(ln + 1, "bad count"))?;
        let mut colors = Vec::with_capacity(n_px);
        for _ in 0..n_px {
            let (ln, line) = lines.next().ok_or_else(|| err(0, "missing color row"))?;
            let vals: Result<Vec<u8>, _> = line.split_whitespace().map(|t| t.parse()).collect();
            let vals = vals.map_err(|_| err(ln + 1, "bad color"))?;
            if vals.len() != 3 {
                return Err(err(ln + 1, "expected 3 color components"));
            }
            colors.push([vals[0], vals[1], vals[2]]);
        }
        Ok(SemanticChannel {
            class_scores,
            colors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig::default();
        let (a, ca) = generate_scene(&config, 3).unwrap();
        let (b, cb) = generate_scene(&config, 3).unwrap();
        assert_eq!(a.serialize(), b.serialize());
        assert_eq!(ca.serialize(), cb.serialize());
        let (c, _) = generate_scene(&config, 4).unwrap();
        assert_ne!(a.serialize(), c.serialize());
    }

    #[test]
    fn adjacency_pressure_one_touches() {
        let config = SynthConfig {
            adjacency_pressure: 1.0,
            n_instances_min: 2,
            n_instances_max: 2,
            ..SynthConfig::default()
        };
        for i in 0..10 {
            let (scene, _) = generate_scene(&config, i).unwrap();
            assert_eq!(scene.n_instances(), 2);
            let masks: Vec<Vec<u32>> = scene.instances.iter().map(|g| g.mask.clone()).collect();
            assert!(all_adjacent(&masks, &scene.grid), "scene {i} not adjacent");
        }
    }

    #[test]
    fn semantic_argmax_mostly_correct_at_default() {
        let config = SynthConfig::default();
        let mut correct = 0usize;
        let mut total = 0usize;
        for i in 0..20 {
            let (scene, channel) = generate_scene(&config, i).unwrap();
            let mut owner: Vec<u32> = vec![0; scene.grid.n_pixels() as usize];
            for g in &scene.instances {
                for &p in &g.mask {
                    owner[p as usize] = g.class_label;
                }
            }
            for sp in &scene.superpixels {
                let mut counts = vec![0u64; config.n_classes as usize];
                for &p in &sp.pixels {
                    counts[owner[p as usize] as usize] += 1;
                }
                let majority = counts
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i as u32)
                    .unwrap();
                if channel.argmax_class(sp.id) == majority {
                    correct += 1;
                }
                total += 1;
            }
        }
        let rate = correct as f64 / total as f64;
        assert!(rate >= 0.9, "argmax accuracy {rate} below 0.9");
    }

    #[test]
    fn channel_round_trip() {
        let config = SynthConfig::default();
        let (_, channel) = generate_scene(&config, 0).unwrap();
        let text = channel.serialize();
        let back = SemanticChannel::parse(&text).unwrap();
        assert_eq!(back.serialize(), text);
    }

    /// Constructed scene with two same-class blobs: separated → two CC
    /// components matching the supports; touching → one merged component.
    #[test]
    fn cc_separates_and_merges() {
        // 8×4 grid, superpixel per column pair: ids = col / 2 → 4 superpixels.
        let width = 8u32;
        let height = 4u32;
        let ids: Vec<u32> = (0..width * height).map(|p| (p % width) / 2).collect();
        let grid = PixelGrid::new(width, height, ids);
        // Separated: instances on sp0 and sp3 (columns 0-1 and 6-7).
        let mask_a: Vec<u32> = (0..height).flat_map(|r| vec![r * width, r * width + 1]).collect();
        let mask_b: Vec<u32> = (0..height)
            .flat_map(|r| vec![r * width + 6, r * width + 7])
            .collect();
        let scene = build_scene(
            grid.clone(),
            vec![
                InstanceSpec {
                    class_label: 1,
                    mask: mask_a.clone(),
                },
                InstanceSpec {
                    class_label: 1,
                    mask: mask_b.clone(),
                },
            ],
        )
        .unwrap();
        // Clean channel: exact one-hot per majority class.
        let channel = SemanticChannel {
            class_scores: vec![
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 0.0],
                vec![0.0, 1.0],
            ],
            colors: vec![[0; 3]; (width * height) as usize],
        };
        let comps = baseline_cc(&scene, &channel, 1);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].ids, vec![0]);
        assert_eq!(comps[1].ids, vec![3]);

        // Touching: instances on sp0..sp1 and sp2..sp3 share a column border.
        let channel_merged = SemanticChannel {
            class_scores: vec![vec![0.0, 1.0]; 4],
            colors: vec![[0; 3]; (width * height) as usize],
        };
        let comps = baseline_cc(&scene, &channel_merged, 1);
        assert_eq!(comps.len(), 1, "adjacent same-class regions merge");
        assert_eq!(comps[0].ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn cc_empty_when_no_target_class() {
        let config = SynthConfig::default();
        let (scene, _) = generate_scene(&config, 0).unwrap();
        let channel = SemanticChannel {
            class_scores: vec![vec![1.0, 0.0]; scene.n_superpixels()],
            colors: vec![[0; 3]; scene.grid.n_pixels() as usize],
        };
        assert!(baseline_cc(&scene, &channel, 1).is_empty());
    }

    #[test]
    fn degenerate_detector_covers_instances() {
        let config = SynthConfig {
            detector_jitter_sigma: 0.0,
            detector_drop_prob: 0.0,
            detector_dup_prob: 0.0,
            ..SynthConfig::default()
        };
        let (scene, _) = generate_scene(&config, 1).unwrap();
        let boxes = synthetic_detector(&scene, &config, 1);
        assert_eq!(boxes.len(), scene.n_instances());
        let chunks = baseline_boxes(&scene, &boxes);
        // Every instance's own superpixel support is inside its exact bbox
        // chunk, so chunk ∩ g = the instance's full overlap with those sps.
        assert_eq!(chunks.len(), scene.n_instances());
        for (g, chunk) in scene.instances.iter().zip(&chunks) {
            let covered = chunk.per_instance_intersection[g.id as usize];
            assert!(covered > 0);
        }
    }

    #[test]
    fn intersection_baseline_splits_merged_component() {
        // Same touching layout as above: one CC component, two boxes.
        let width = 8u32;
        let height = 4u32;
        let ids: Vec<u32> = (0..width * height).map(|p| (p % width) / 2).collect();
        let grid = PixelGrid::new(width, height, ids);
        let mask_a: Vec<u32> = (0..height)
            .flat_map(|r| (0..4).map(move |c| r * width + c))
            .collect();
        let mask_b: Vec<u32> = (0..height)
            .flat_map(|r| (4..8).map(move |c| r * width + c))
            .collect();
        let scene = build_scene(
            grid,
            vec![
                InstanceSpec {
                    class_label: 1,
                    mask: mask_a,
                },
                InstanceSpec {
                    class_label: 1,
                    mask: mask_b,
                },
            ],
        )
        .unwrap();
        let channel = SemanticChannel {
            class_scores: vec![vec![0.0, 1.0]; 4],
            colors: vec![[0; 3]; (width * height) as usize],
        };
        assert_eq!(baseline_cc(&scene, &channel, 1).len(), 1);
        let boxes = vec![
            DetectorBox {
                r0: 0,
                c0: 0,
                r1: 3,
                c1: 3,
            },
            DetectorBox {
                r0: 0,
                c0: 4,
                r1: 3,
                c1: 7,
            },
        ];
        let chunks = baseline_intersection(&scene, &channel, &boxes, 1);
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].ids, vec![0, 1]);
        assert_eq!(chunks[1].ids, vec![2, 3]);
    }
}
