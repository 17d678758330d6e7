//! Scenes: a pixel grid partitioned into superpixels, plus ground-truth
//! instance masks. All set algebra is exact integer pixel counting; the
//! non-overlap of superpixels makes chunk IoU updates O(1).

use crate::rational::{GrowthRatio, PixelRatio};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("instance {instance} mask pixel {pixel} is out of grid bounds")]
    OutOfBounds { instance: usize, pixel: u32 },
    #[error("instances {a} and {b} overlap at pixel {pixel}")]
    OverlappingInstances { a: usize, b: usize, pixel: u32 },
    #[error("superpixel id {id} out of range [0, {n})")]
    SuperpixelIdOutOfRange { id: u32, n: u32 },
    #[error("superpixel {id} owns no pixels")]
    EmptySuperpixel { id: u32 },
    #[error("instance {instance} has an empty mask")]
    EmptyInstance { instance: usize },
    #[error("superpixel {id} already in chunk")]
    AlreadyInChunk { id: u32 },
    #[error("scene parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Dense row-major grid of superpixel ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelGrid {
    pub width: u32,
    pub height: u32,
    pub superpixel_id: Vec<u32>,
}

impl PixelGrid {
    pub fn new(width: u32, height: u32, superpixel_id: Vec<u32>) -> PixelGrid {
        assert_eq!(superpixel_id.len(), (width * height) as usize);
        PixelGrid {
            width,
            height,
            superpixel_id,
        }
    }

    pub fn n_pixels(&self) -> u32 {
        self.width * self.height
    }

    pub fn id_at(&self, pixel: u32) -> u32 {
        self.superpixel_id[pixel as usize]
    }
}

#[derive(Clone, Debug)]
pub struct Superpixel {
    pub id: u32,
    pub area: u64,
    /// Row-major pixel indices, sorted ascending.
    pub pixels: Vec<u32>,
    /// Mean (row, col) of member pixels.
    pub centroid: (f64, f64),
    /// `|s ∩ g_j|` for every instance j.
    pub per_instance_intersection: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct GroundTruthInstance {
    pub id: u32,
    pub class_label: u32,
    pub area: u64,
    /// Row-major pixel indices, sorted ascending.
    pub mask: Vec<u32>,
}

/// Immutable scene: grid, superpixels (with cached instance intersections),
/// and pairwise-disjoint ground-truth instances.
#[derive(Clone, Debug)]
pub struct Scene {
    pub grid: PixelGrid,
    pub superpixels: Vec<Superpixel>,
    pub instances: Vec<GroundTruthInstance>,
}

/// Raw instance description used to build a scene.
#[derive(Clone, Debug)]
pub struct InstanceSpec {
    pub class_label: u32,
    pub mask: Vec<u32>,
}

pub fn build_scene(grid: PixelGrid, instances: Vec<InstanceSpec>) -> Result<Scene, SceneError> {
    let n_pixels = grid.n_pixels();
    let n_sp = match grid.superpixel_id.iter().max() {
        Some(&m) => m + 1,
        None => 0,
    };

    // Validate instance masks: in bounds, pairwise disjoint, nonempty.
    let mut owner: Vec<i32> = vec![-1; n_pixels as usize];
    for (j, spec) in instances.iter().enumerate() {
        if spec.mask.is_empty() {
            return Err(SceneError::EmptyInstance { instance: j });
        }
        for &p in &spec.mask {
            if p >= n_pixels {
                return Err(SceneError::OutOfBounds {
                    instance: j,
                    pixel: p,
                });
            }
            if owner[p as usize] >= 0 {
                return Err(SceneError::OverlappingInstances {
                    a: owner[p as usize] as usize,
                    b: j,
                    pixel: p,
                });
            }
            owner[p as usize] = j as i32;
        }
    }

    let mut pixels: Vec<Vec<u32>> = vec![Vec::new(); n_sp as usize];
    for p in 0..n_pixels {
        let id = grid.id_at(p);
        pixels[id as usize].push(p);
    }

    let mut superpixels = Vec::with_capacity(n_sp as usize);
    for (id, px) in pixels.into_iter().enumerate() {
        if px.is_empty() {
            return Err(SceneError::EmptySuperpixel { id: id as u32 });
        }
        let mut sum_r = 0u64;
        let mut sum_c = 0u64;
        let mut inter = vec![0u64; instances.len()];
        for &p in &px {
            sum_r += (p / grid.width) as u64;
            sum_c += (p % grid.width) as u64;
            let o = owner[p as usize];
            if o >= 0 {
                inter[o as usize] += 1;
            }
        }
        let area = px.len() as u64;
        superpixels.push(Superpixel {
            id: id as u32,
            area,
            centroid: (sum_r as f64 / area as f64, sum_c as f64 / area as f64),
            pixels: px,
            per_instance_intersection: inter,
        });
    }

    let instances = instances
        .into_iter()
        .enumerate()
        .map(|(j, spec)| {
            let mut mask = spec.mask;
            mask.sort_unstable();
            GroundTruthInstance {
                id: j as u32,
                class_label: spec.class_label,
                area: mask.len() as u64,
                mask,
            }
        })
        .collect();

    Ok(Scene {
        grid,
        superpixels,
        instances,
    })
}

impl Scene {
    pub fn n_superpixels(&self) -> usize {
        self.superpixels.len()
    }

    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    /// Pixel overlap of two chunks; exact since superpixels never overlap.
    pub fn chunk_overlap_area(&self, a: &Chunk, b: &Chunk) -> u64 {
        let (small, big) = if a.ids.len() <= b.ids.len() {
            (a, b)
        } else {
            (b, a)
        };
        small
            .ids
            .iter()
            .filter(|id| big.contains(**id))
            .map(|&id| self.superpixels[id as usize].area)
            .sum()
    }

    pub fn chunk_iou_chunk(&self, a: &Chunk, b: &Chunk) -> PixelRatio {
        let inter = self.chunk_overlap_area(a, b);
        let union = a.area + b.area - inter;
        if union == 0 {
            return PixelRatio::ZERO;
        }
        PixelRatio::new(inter, union)
    }
}

/// A union of superpixels with cached area and per-instance intersections.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    /// Sorted superpixel ids.
    pub ids: Vec<u32>,
    pub area: u64,
    pub per_instance_intersection: Vec<u64>,
}

impl Chunk {
    pub fn empty(scene: &Scene) -> Chunk {
        Chunk {
            ids: Vec::new(),
            area: 0,
            per_instance_intersection: vec![0; scene.n_instances()],
        }
    }

    pub fn from_ids(scene: &Scene, mut ids: Vec<u32>) -> Chunk {
        ids.sort_unstable();
        ids.dedup();
        let mut area = 0u64;
        let mut inter = vec![0u64; scene.n_instances()];
        for &id in &ids {
            let s = &scene.superpixels[id as usize];
            area += s.area;
            for (j, v) in s.per_instance_intersection.iter().enumerate() {
                inter[j] += v;
            }
        }
        Chunk {
            ids,
            area,
            per_instance_intersection: inter,
        }
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// New chunk with superpixel `id` added; counts update in O(instances).
    pub fn add(&self, scene: &Scene, id: u32) -> Result<Chunk, SceneError> {
        if self.contains(id) {
            return Err(SceneError::AlreadyInChunk { id });
        }
        let s = &scene.superpixels[id as usize];
        let mut ids = self.ids.clone();
        let pos = ids.partition_point(|&x| x < id);
        ids.insert(pos, id);
        let mut inter = self.per_instance_intersection.clone();
        for (j, v) in s.per_instance_intersection.iter().enumerate() {
            inter[j] += v;
        }
        Ok(Chunk {
            ids,
            area: self.area + s.area,
            per_instance_intersection: inter,
        })
    }
}

/// IoU of a chunk with an instance. Exact; dummy (area-0) instances and the
/// empty-vs-empty case evaluate to 0.
pub fn iou(c: &Chunk, g: &GroundTruthInstance) -> PixelRatio {
    let inter = c.per_instance_intersection[g.id as usize];
    let union = c.area + g.area - inter;
    if union == 0 {
        return PixelRatio::ZERO;
    }
    PixelRatio::new(inter, union)
}

/// IoU of `c ∪ {s}` with `g` in O(1) from cached counts.
pub fn iou_extend(
    c: &Chunk,
    s: &Superpixel,
    g: &GroundTruthInstance,
) -> Result<PixelRatio, SceneError> {
    if c.contains(s.id) {
        return Err(SceneError::AlreadyInChunk { id: s.id });
    }
    let dx = s.per_instance_intersection[g.id as usize];
    let dy = s.area - dx;
    let inter = c.per_instance_intersection[g.id as usize] + dx;
    let union = (c.area + g.area - c.per_instance_intersection[g.id as usize]) + dy;
    if union == 0 {
        return Ok(PixelRatio::ZERO);
    }
    Ok(PixelRatio::new(inter, union))
}

/// Per-superpixel growth quantities against one instance.
#[derive(Clone, Debug)]
pub struct GrowthRatios {
    pub instance: u32,
    /// Per superpixel i: α_i = |s_i ∩ g| / |s_i|.
    pub alpha: Vec<PixelRatio>,
    /// Δx_i = |s_i ∩ g|.
    pub delta_x: Vec<u64>,
    /// Δy_i = |s_i| − |s_i ∩ g|.
    pub delta_y: Vec<u64>,
    /// r_i = Δx_i / Δy_i.
    pub ratio: Vec<GrowthRatio>,
}

impl GrowthRatios {
    /// Superpixel ids sorted by decreasing ratio; +∞ entries first, ordered by
    /// Δx descending then id ascending; finite ties by id ascending.
    pub fn order_by_ratio(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..self.alpha.len() as u32).collect();
        ids.sort_by(|&a, &b| {
            let (a, b) = (a as usize, b as usize);
            self.ratio[b]
                .cmp(&self.ratio[a])
                .then_with(|| self.delta_x[b].cmp(&self.delta_x[a]))
                .then_with(|| a.cmp(&b))
        });
        ids
    }
}

pub fn growth_ratios(scene: &Scene, g: &GroundTruthInstance) -> GrowthRatios {
    let n = scene.n_superpixels();
    let mut alpha = Vec::with_capacity(n);
    let mut delta_x = Vec::with_capacity(n);
    let mut delta_y = Vec::with_capacity(n);
    let mut ratio = Vec::with_capacity(n);
    for s in &scene.superpixels {
        let dx = s.per_instance_intersection[g.id as usize];
        let dy = s.area - dx;
        alpha.push(PixelRatio::new(dx, s.area));
        delta_x.push(dx);
        delta_y.push(dy);
        ratio.push(GrowthRatio::new(dx, dy));
    }
    GrowthRatios {
        instance: g.id,
        alpha,
        delta_x,
        delta_y,
        ratio,
    }
}

// ---------------------------------------------------------------------------
// Text serialization
// ---------------------------------------------------------------------------

/// Encode a sorted pixel-index set as `start,len` runs.
fn encode_rle(mask: &[u32]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < mask.len() {
        let start = mask[i];
        let mut len = 1u32;
        while i + (len as usize) < mask.len() && mask[i + len as usize] == start + len {
            len += 1;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        let _ = write!(out, "{},{}", start, len);
        i += len as usize;
    }
    out
}

fn decode_rle(s: &str, line: usize) -> Result<Vec<u32>, SceneError> {
    let mut mask = Vec::new();
    for tok in s.split_whitespace() {
        let (a, b) = tok.split_once(',').ok_or_else(|| SceneError::Parse {
            line,
            msg: format!("bad run `{tok}`"),
        })?;
        let start: u32 = a.parse().map_err(|_| SceneError::Parse {
            line,
            msg: format!("bad run start `{a}`"),
        })?;
        let len: u32 = b.parse().map_err(|_| SceneError::Parse {
            line,
            msg: format!("bad run length `{b}`"),
        })?;
        mask.extend(start..start + len);
    }
    Ok(mask)
}

impl Scene {
    /// Canonical text form; round-trips bit-exactly through [`Scene::parse`].
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scene {} {} {} {}",
            self.grid.width,
            self.grid.height,
            self.n_superpixels(),
            self.n_instances()
        );
        for r in 0..self.grid.height {
            let row: Vec<String> = (0..self.grid.width)
                .map(|c| self.grid.id_at(r * self.grid.width + c).to_string())
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        for g in &self.instances {
            let _ = writeln!(
                out,
                "instance {} {} {}",
                g.id,
                g.class_label,
                encode_rle(&g.mask)
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Scene, SceneError> {
        let mut lines = text.lines().enumerate();
        let (ln, header) = lines.next().ok_or(SceneError::Parse {
            line: 0,
            msg: "empty input".into(),
        })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "scene" {
            return Err(SceneError::Parse {
                line: ln + 1,
                msg: "expected `scene <w> <h> <n_sp> <n_inst>`".into(),
            });
        }
        let parse_u32 = |s: &str, line: usize| -> Result<u32, SceneError> {
            s.parse().map_err(|_| SceneError::Parse {
                line,
                msg: format!("bad integer `{s}`"),
            })
        };
        let width = parse_u32(parts[1], ln + 1)?;
        let height = parse_u32(parts[2], ln + 1)?;
        let n_sp = parse_u32(parts[3], ln + 1)?;
        let n_inst = parse_u32(parts[4], ln + 1)? as usize;

        let mut ids = Vec::with_capacity((width * height) as usize);
        for _ in 0..height {
            let (ln, row) = lines.next().ok_or(SceneError::Parse {
                line: 0,
                msg: "missing grid row".into(),
            })?;
            for tok in row.split_whitespace() {
                let id = parse_u32(tok, ln + 1)?;
                if id >= n_sp {
                    return Err(SceneError::SuperpixelIdOutOfRange { id, n: n_sp });
                }
                ids.push(id);
            }
        }
        if ids.len() != (width * height) as usize {
            return Err(SceneError::Parse {
                line: 0,
                msg: format!(
                    "grid has {} ids, expected {}",
                    ids.len(),
                    width * height
                ),
            });
        }

        let mut specs = Vec::with_capacity(n_inst);
        for _ in 0..n_inst {
            let (ln, line) = lines.next().ok_or(SceneError::Parse {
                line: 0,
                msg: "missing instance line".into(),
            })?;
            let rest = line.strip_prefix("instance ").ok_or(SceneError::Parse {
                line: ln + 1,
                msg: "expected `instance <id> <class> <runs>`".into(),
            })?;
            let mut it = rest.splitn(3, ' ');
            let _id = it.next().unwrap_or("");
            let class = parse_u32(it.next().unwrap_or(""), ln + 1)?;
            let mask = decode_rle(it.next().unwrap_or(""), ln + 1)?;
            specs.push(InstanceSpec {
                class_label: class,
                mask,
            });
        }

        build_scene(PixelGrid::new(width, height, ids), specs)
    }
}
