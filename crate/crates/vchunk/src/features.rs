//! Feature vectors for the two learners: Φ(c,L) scores a candidate chunk in
//! the context of the list built so far; θ(s,c) scores adding superpixel s to
//! a growing chunk. All geometry is accumulated per superpixel once and then
//! combined per chunk in O(|c|).

use crate::assignment::PredictionList;
use crate::scene::{Chunk, Scene, SceneError, Superpixel};
use crate::synth::SemanticChannel;

pub const COLOR_BINS_PER_CHANNEL: usize = 8;
pub const COLOR_BINS: usize = COLOR_BINS_PER_CHANNEL * 3;
/// above/below/left/right/overlapping/near/far.
pub const SPATIAL_BINS: usize = 7;
/// Near/far threshold as a fraction of the image diagonal.
pub const NEAR_FAR_FRACTION: f64 = 0.1;

/// Per-superpixel accumulators shared by both feature maps: color histogram
/// counts, raw coordinate moment sums, and bounding boxes.
pub struct FeatureContext<'a> {
    pub scene: &'a Scene,
    pub channel: &'a SemanticChannel,
    color_hist: Vec<[u64; COLOR_BINS]>,
    /// (Σr, Σc, Σr², Σc², Σrc) per superpixel, pixel coords.
    moments: Vec<[u64; 5]>,
    /// (r0, c0, r1, c1) inclusive.
    bbox: Vec<[u32; 4]>,
    n_classes: usize,
}

impl<'a> FeatureContext<'a> {
    pub fn new(scene: &'a Scene, channel: &'a SemanticChannel) -> FeatureContext<'a> {
        let w = scene.grid.width;
        let n = scene.n_superpixels();
        let mut color_hist = vec![[0u64; COLOR_BINS]; n];
        let mut moments = vec![[0u64; 5]; n];
        let mut bbox = vec![[u32::MAX, u32::MAX, 0, 0]; n];
        for sp in &scene.superpixels {
            let i = sp.id as usize;
            for &p in &sp.pixels {
                let (r, c) = (p / w, p % w);
                let px = channel.colors[p as usize];
                for ch in 0..3 {
                    let bin = px[ch] as usize * COLOR_BINS_PER_CHANNEL / 256;
                    color_hist[i][ch * COLOR_BINS_PER_CHANNEL + bin] += 1;
                }
                let m = &mut moments[i];
                m[0] += r as u64;
                m[1] += c as u64;
                m[2] += (r as u64) * (r as u64);
                m[3] += (c as u64) * (c as u64);
                m[4] += (r as u64) * (c as u64);
                let b = &mut bbox[i];
                b[0] = b[0].min(r);
                b[1] = b[1].min(c);
                b[2] = b[2].max(r);
                b[3] = b[3].max(c);
            }
        }
        FeatureContext {
            scene,
            channel,
            color_hist,
            moments,
            bbox,
            n_classes: channel.n_classes(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn phi_len(&self) -> usize {
        quality_len(self.n_classes) + 2 + SPATIAL_BINS + 1
    }

    pub fn theta_len(&self) -> usize {
        quality_len(self.n_classes) + 2 + self.n_classes + 1
    }

    fn chunk_geometry(&self, ids: &[u32]) -> ChunkGeometry {
        let mut area = 0u64;
        let mut m = [0u64; 5];
        let mut b = [u32::MAX, u32::MAX, 0, 0];
        for &id in ids {
            let i = id as usize;
            area += self.scene.superpixels[i].area;
            for k in 0..5 {
                m[k] += self.moments[i][k];
            }
            b[0] = b[0].min(self.bbox[i][0]);
            b[1] = b[1].min(self.bbox[i][1]);
            b[2] = b[2].max(self.bbox[i][2]);
            b[3] = b[3].max(self.bbox[i][3]);
        }
        ChunkGeometry { area, m, bbox: b }
    }

    fn chunk_color_hist(&self, ids: &[u32]) -> [u64; COLOR_BINS] {
        let mut h = [0u64; COLOR_BINS];
        for &id in ids {
            for (k, v) in self.color_hist[id as usize].iter().enumerate() {
                h[k] += v;
            }
        }
        h
    }

    /// Mass-weighted mean class scores over member superpixels, plus
    /// normalized central moments, area fraction, and scale.
    fn quality_block(&self, ids: &[u32], out: &mut Vec<f64>) {
        let geo = self.chunk_geometry(ids);
        let area = geo.area as f64;
        let mut class = vec![0.0f64; self.n_classes];
        for &id in ids {
            let w = self.scene.superpixels[id as usize].area as f64;
            for (k, s) in self.channel.class_scores[id as usize].iter().enumerate() {
                class[k] += w * s;
            }
        }
        for v in &mut class {
            *v /= area;
        }
        out.extend_from_slice(&class);
        // Central moments from raw sums: μ20 = Σr² − (Σr)²/A, scale-free via /A².
        let m = geo.m;
        let mu20 = m[2] as f64 - (m[0] as f64) * (m[0] as f64) / area;
        let mu02 = m[3] as f64 - (m[1] as f64) * (m[1] as f64) / area;
        let mu11 = m[4] as f64 - (m[0] as f64) * (m[1] as f64) / area;
        let a2 = area * area;
        out.push(mu20 / a2);
        out.push(mu02 / a2);
        out.push(mu11 / a2);
        let n_pixels = self.scene.grid.n_pixels() as f64;
        out.push(area / n_pixels);
        out.push(area.sqrt() / n_pixels.sqrt());
    }

    fn centroid(&self, ids: &[u32]) -> (f64, f64) {
        let geo = self.chunk_geometry(ids);
        (
            geo.m[0] as f64 / geo.area as f64,
            geo.m[1] as f64 / geo.area as f64,
        )
    }

    /// Seven-bin relation of c to one prior chunk: overlapping gets the whole
    /// mass; otherwise the dominant direction and the near/far side split it.
    fn spatial_relation(&self, c: &Chunk, prior: &Chunk) -> [f64; SPATIAL_BINS] {
        let mut row = [0.0f64; SPATIAL_BINS];
        if self.scene.chunk_overlap_area(c, prior) > 0 {
            row[4] = 1.0; // overlapping
            return row;
        }
        let (cr, cc) = self.centroid(&c.ids);
        let (pr, pc) = self.centroid(&prior.ids);
        let (dr, dc) = (cr - pr, cc - pc);
        // above/below/left/right from the dominant displacement axis.
        let dir = if dr.abs() >= dc.abs() {
            if dr <= 0.0 {
                0 // above
            } else {
                1 // below
            }
        } else if dc <= 0.0 {
            2 // left
        } else {
            3 // right
        };
        row[dir] = 0.5;
        let diag = ((self.scene.grid.width as f64).powi(2)
            + (self.scene.grid.height as f64).powi(2))
        .sqrt();
        let dist = (dr * dr + dc * dc).sqrt();
        if dist <= NEAR_FAR_FRACTION * diag {
            row[5] = 0.5; // near
        } else {
            row[6] = 0.5; // far
        }
        row
    }
}

struct ChunkGeometry {
    area: u64,
    m: [u64; 5],
    bbox: [u32; 4],
}

fn quality_len(n_classes: usize) -> usize {
    n_classes + 3 + 2
}

/// Φ(c,L): quality block of c, then max/mean IoU against prior predictions,
/// the mean spatial-relation row, and the list length.
pub fn phi(ctx: &FeatureContext, c: &Chunk, list: &PredictionList) -> Vec<f64> {
    let mut out = Vec::with_capacity(ctx.phi_len());
    ctx.quality_block(&c.ids, &mut out);
    let prior: Vec<&Chunk> = list.entries.iter().map(|e| &e.chunk).collect();
    if prior.is_empty() {
        out.extend_from_slice(&[0.0; 2 + SPATIAL_BINS]);
        out.push(0.0);
        debug_assert_eq!(out.len(), ctx.phi_len());
        return out;
    }
    let ious: Vec<f64> = prior
        .iter()
        .map(|p| ctx.scene.chunk_iou_chunk(c, p).to_f64())
        .collect();
    let max_iou = ious.iter().cloned().fold(0.0f64, f64::max);
    let mean_iou = ious.iter().sum::<f64>() / ious.len() as f64;
    out.push(max_iou);
    out.push(mean_iou);
    let mut spatial = [0.0f64; SPATIAL_BINS];
    for p in &prior {
        let row = ctx.spatial_relation(c, p);
        for k in 0..SPATIAL_BINS {
            spatial[k] += row[k];
        }
    }
    for v in &mut spatial {
        *v /= prior.len() as f64;
    }
    out.extend_from_slice(&spatial);
    out.push(prior.len() as f64);
    debug_assert_eq!(out.len(), ctx.phi_len());
    out
}

/// θ(s,c): quality block of c′ = c ∪ {s}, color-histogram intersection of s
/// against c, region fill of c′, s's own class scores and area fraction.
pub fn theta(ctx: &FeatureContext, s: &Superpixel, c: &Chunk) -> Result<Vec<f64>, SceneError> {
    if c.contains(s.id) {
        return Err(SceneError::AlreadyInChunk { id: s.id });
    }
    let mut out = Vec::with_capacity(ctx.theta_len());
    let mut prime_ids = c.ids.clone();
    prime_ids.push(s.id);
    prime_ids.sort_unstable();
    ctx.quality_block(&prime_ids, &mut out);

    let color_sim = if c.ids.is_empty() {
        1.0
    } else {
        let hs = &ctx.color_hist[s.id as usize];
        let hc = ctx.chunk_color_hist(&c.ids);
        let (ns, nc) = (s.area as f64, c.area as f64);
        // Counts replicate per channel, so each channel block sums to area;
        // the intersection of the normalized histograms lands in [0,3]/3.
        let mut sim = 0.0;
        for k in 0..COLOR_BINS {
            sim += (hs[k] as f64 / ns).min(hc[k] as f64 / nc);
        }
        sim / 3.0
    };
    out.push(color_sim);

    let geo = ctx.chunk_geometry(&prime_ids);
    let bbox_area =
        (geo.bbox[2] - geo.bbox[0] + 1) as u64 * (geo.bbox[3] - geo.bbox[1] + 1) as u64;
    out.push(geo.area as f64 / bbox_area as f64);

    out.extend_from_slice(&ctx.channel.class_scores[s.id as usize]);
    out.push(s.area as f64 / ctx.scene.grid.n_pixels() as f64);
    debug_assert_eq!(out.len(), ctx.theta_len());
    Ok(out)
}

pub fn region_fill(ctx: &FeatureContext, ids: &[u32]) -> f64 {
    let geo = ctx.chunk_geometry(ids);
    let bbox_area =
        (geo.bbox[2] - geo.bbox[0] + 1) as u64 * (geo.bbox[3] - geo.bbox[1] + 1) as u64;
    geo.area as f64 / bbox_area as f64
}

pub fn phi_column_names(n_classes: usize) -> Vec<String> {
    let mut names = quality_names(n_classes);
    names.push("iou_max".into());
    names.push("iou_mean".into());
    for rel in ["above", "below", "left", "right", "overlap", "near", "far"] {
        names.push(format!("rel_{rel}"));
    }
    names.push("list_len".into());
    names
}

pub fn theta_column_names(n_classes: usize) -> Vec<String> {
    let mut names = quality_names(n_classes);
    names.push("color_sim".into());
    names.push("region_fill".into());
    for k in 0..n_classes {
        names.push(format!("sp_class_{k}"));
    }
    names.push("sp_area_frac".into());
    names
}

fn quality_names(n_classes: usize) -> Vec<String> {
    let mut names: Vec<String> = (0..n_classes).map(|k| format!("class_{k}")).collect();
    names.extend(["mu20", "mu02", "mu11", "area_frac", "scale"].map(String::from));
    names
}
