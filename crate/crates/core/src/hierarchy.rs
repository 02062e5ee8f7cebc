//! Two-level coarse-to-fine fingertip detection: a global network maps
//! whole-image jets to all ten tip coordinates, then per-finger local
//! networks refine each tip inside a focus region cut around the global
//! estimate, at a halved filter length scale. A three-stream
//! multiplicative fusion (confidence bump x edge map x tip-template
//! correlation) yields best and alternative position candidates.

use std::io::Read as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gabor::{extract_jets, GaborBank, JetGrid};
use crate::hand::{DatasetRecord, Fingertip, FingertipSet, FINGER_COUNT};
use crate::imaging::{correlate_at, edge_map, BorderMode, Image, Kernel};
use crate::llm::{eval_llm, train_llm, LLMNetwork, TrainConfig};

const HIER_MAGIC: &[u8; 4] = b"NHHM";
const HIER_VERSION: u32 = 1;

/// Square subwindow around one finger's coarse estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FocusRegion {
    pub finger: usize,
    pub x0: usize,
    pub y0: usize,
    pub size: usize,
}

impl FocusRegion {
    pub fn center(&self) -> (f64, f64) {
        (
            self.x0 as f64 + (self.size - 1) as f64 / 2.0,
            self.y0 as f64 + (self.size - 1) as f64 / 2.0,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 as f64
            && y >= self.y0 as f64
            && x <= (self.x0 + self.size - 1) as f64
            && y <= (self.y0 + self.size - 1) as f64
    }

    /// Clamp a point into the region rectangle.
    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x.clamp(self.x0 as f64, (self.x0 + self.size - 1) as f64),
            y.clamp(self.y0 as f64, (self.y0 + self.size - 1) as f64),
        )
    }
}

/// Place a region of side `2*half_size` around `(cx, cy)`, shifted to lie
/// fully inside a `width` x `height` image.
pub fn make_region(
    finger: usize,
    cx: f64,
    cy: f64,
    half_size: usize,
    width: usize,
    height: usize,
) -> Result<FocusRegion> {
    let size = 2 * half_size;
    if size == 0 || size > width || size > height {
        return Err(Error::invalid(format!(
            "focus region size {} does not fit a {}x{} image",
            size, width, height
        )));
    }
    let place = |c: f64, limit: usize| -> usize {
        let ideal = c.round() as i64 - half_size as i64;
        ideal.clamp(0, (limit - size) as i64) as usize
    };
    Ok(FocusRegion {
        finger,
        x0: place(cx, width),
        y0: place(cy, height),
        size,
    })
}

/// Training settings for the two-level detector.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    pub width: usize,
    pub height: usize,
    /// Jet lattice of the global stage (nx, ny).
    pub global_grid: (usize, usize),
    /// Jet lattice inside each focus region.
    pub local_grid: (usize, usize),
    pub half_size: usize,
    pub global_train: TrainConfig,
    pub local_train: TrainConfig,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            width: 64,
            height: 64,
            global_grid: (8, 8),
            local_grid: (4, 4),
            half_size: 12,
            // Single well-regularized affine map per stage generalizes best
            // at the few-hundred-image scale these defaults target.
            global_train: TrainConfig {
                k: 1,
                ridge: 3e-2,
                ..TrainConfig::default()
            },
            local_train: TrainConfig {
                k: 1,
                ridge: 1e-1,
                ..TrainConfig::default()
            },
        }
    }
}

/// Trained two-level detector.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyModel {
    pub width: usize,
    pub height: usize,
    pub half_size: usize,
    pub global_bank: GaborBank,
    pub local_bank: GaborBank,
    pub global_grid: JetGrid,
    pub local_grid: JetGrid,
    pub global_net: LLMNetwork,
    pub local_nets: Vec<LLMNetwork>,
}

/// Coarse and refined tips plus the regions connecting the two stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub global: FingertipSet,
    pub regions: [FocusRegion; FINGER_COUNT],
    pub refined: FingertipSet,
}

fn check_dataset(records: &[DatasetRecord], width: usize, height: usize) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("empty training dataset"));
    }
    for (i, r) in records.iter().enumerate() {
        if r.image.width() != width || r.image.height() != height {
            return Err(Error::invalid(format!(
                "record {}: image {}x{} does not match configured {}x{}",
                i,
                r.image.width(),
                r.image.height(),
                width,
                height
            )));
        }
    }
    Ok(())
}

fn tips_to_labels(tips: &FingertipSet) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * FINGER_COUNT);
    for t in &tips.tips {
        out.push(t.x);
        out.push(t.y);
    }
    out
}

/// Train the global stage, then cut regions around the trained global
/// net's own predictions and train one local refinement net per finger
/// on region jets at the halved length scale.
pub fn train_hierarchy(records: &[DatasetRecord], cfg: &HierarchyConfig) -> Result<HierarchyModel> {
    check_dataset(records, cfg.width, cfg.height)?;
    let global_bank = GaborBank::default_global();
    let local_bank = global_bank.halved()?;
    let global_grid = JetGrid::regular(cfg.width, cfg.height, cfg.global_grid.0, cfg.global_grid.1)?;
    let region_size = 2 * cfg.half_size;
    let local_grid = JetGrid::regular(region_size, region_size, cfg.local_grid.0, cfg.local_grid.1)?;

    let mut global_samples = Vec::with_capacity(records.len());
    for r in records {
        let jets = extract_jets(&r.image, &global_bank, &global_grid)?;
        global_samples.push((jets.values().to_vec(), tips_to_labels(&r.tips)));
    }
    let global_net = train_llm(&global_samples, &cfg.global_train)?;

    // the local stage sees exactly the regions the global stage will
    // produce at detection time, so train it on those same cut-outs
    let mut local_samples: Vec<Vec<(Vec<f64>, Vec<f64>)>> = vec![Vec::new(); FINGER_COUNT];
    for (jets, _) in &global_samples {
        // re-predict to locate each record's regions
        let coarse = eval_llm(&global_net, &DVector::from_column_slice(jets))?;
        let record = &records[local_samples[0].len()];
        for f in 0..FINGER_COUNT {
            let region = make_region(
                f,
                coarse[2 * f],
                coarse[2 * f + 1],
                cfg.half_size,
                cfg.width,
                cfg.height,
            )?;
            let crop = record
                .image
                .crop(region.x0, region.y0, region.size, region.size)?;
            let local_jets = extract_jets(&crop, &local_bank, &local_grid)?;
            let (ccx, ccy) = region.center();
            let label = vec![record.tips.tips[f].x - ccx, record.tips.tips[f].y - ccy];
            local_samples[f].push((local_jets.values().to_vec(), label));
        }
    }
    let mut local_nets = Vec::with_capacity(FINGER_COUNT);
    for (f, samples) in local_samples.iter().enumerate() {
        let mut tc = cfg.local_train.clone();
        tc.seed = cfg
            .local_train
            .seed
            .wrapping_add((f as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15));
        local_nets.push(train_llm(samples, &tc)?);
    }
    Ok(HierarchyModel {
        width: cfg.width,
        height: cfg.height,
        half_size: cfg.half_size,
        global_bank,
        local_bank,
        global_grid,
        local_grid,
        global_net,
        local_nets,
    })
}

/// Run both stages on one image.
pub fn detect(model: &HierarchyModel, img: &Image) -> Result<Detection> {
    if img.width() != model.width || img.height() != model.height {
        return Err(Error::invalid(format!(
            "image {}x{} does not match model {}x{}",
            img.width(),
            img.height(),
            model.width,
            model.height
        )));
    }
    let jets = extract_jets(img, &model.global_bank, &model.global_grid)?;
    let coarse = eval_llm(&model.global_net, &DVector::from_column_slice(jets.values()))?;
    let mut global_tips = [Fingertip::default(); FINGER_COUNT];
    let mut refined_tips = [Fingertip::default(); FINGER_COUNT];
    let mut regions = Vec::with_capacity(FINGER_COUNT);
    for f in 0..FINGER_COUNT {
        let (gx, gy) = (coarse[2 * f], coarse[2 * f + 1]);
        global_tips[f] = Fingertip {
            x: gx,
            y: gy,
            z: 0.0,
            valid: true,
        };
        let region = make_region(f, gx, gy, model.half_size, model.width, model.height)?;
        // input outside the region is clipped: the local net sees the
        // cut-out only
        let crop = img.crop(region.x0, region.y0, region.size, region.size)?;
        let local_jets = extract_jets(&crop, &model.local_bank, &model.local_grid)?;
        let delta = eval_llm(
            &model.local_nets[f],
            &DVector::from_column_slice(local_jets.values()),
        )?;
        let (ccx, ccy) = region.center();
        let (rx, ry) = region.clamp(ccx + delta[0], ccy + delta[1]);
        refined_tips[f] = Fingertip {
            x: rx,
            y: ry,
            z: 0.0,
            valid: true,
        };
        regions.push(region);
    }
    Ok(Detection {
        global: FingertipSet { tips: global_tips },
        regions: regions.try_into().expect("five regions"),
        refined: FingertipSet { tips: refined_tips },
    })
}

/// Fixed 5x5 fingertip-edge template: a two-sided rounded end, the
/// superposition of left- and right-pointing tip outlines, DC-corrected
/// and L2-normalized.
pub fn fingertip_template() -> Kernel {
    let taps = vec![
        0.0, 0.0, 2.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 1.0, 0.0, //
        0.0, 1.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 2.0, 0.0, 0.0,
    ];
    Kernel::new(5, taps)
        .expect("fixed template")
        .dc_corrected()
        .l2_normalized()
}

/// Exclusion radius separating the best and alternative candidates.
pub const EXCLUSION_RADIUS: f64 = 3.0;

/// Best and alternative candidates with the fused confidence map.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    /// Image-frame coordinates of the two candidates.
    pub best: (usize, usize),
    pub alternative: (usize, usize),
    pub best_confidence: f64,
    pub alternative_confidence: f64,
    /// Fused map over the region, region-local coordinates.
    pub map: Image,
}

fn max_normalized(img: &Image) -> Image {
    let max = img.max_value();
    if max <= 0.0 {
        return Image::new(img.width(), img.height());
    }
    let data = img.data().iter().map(|v| v / max).collect();
    Image::from_vec(img.width(), img.height(), data).expect("same shape")
}

/// The three normalized streams of the fusion stage, region-local.
pub fn fusion_streams(
    img: &Image,
    region: &FocusRegion,
    estimate: (f64, f64),
    sigma_conf: f64,
) -> Result<[Image; 3]> {
    if region.size == 0 {
        return Err(Error::invalid("empty fusion region"));
    }
    if !region.contains(estimate.0, estimate.1) {
        return Err(Error::invalid(format!(
            "estimate ({}, {}) outside focus region",
            estimate.0, estimate.1
        )));
    }
    let crop = img.crop(region.x0, region.y0, region.size, region.size)?;
    let mut bump = Image::new(region.size, region.size);
    if !(sigma_conf > 0.0) {
        return Err(Error::invalid("sigma_conf must be positive"));
    }
    let (ex, ey) = (estimate.0 - region.x0 as f64, estimate.1 - region.y0 as f64);
    for y in 0..region.size {
        for x in 0..region.size {
            let d2 = (x as f64 - ex).powi(2) + (y as f64 - ey).powi(2);
            bump.set(x, y, (-d2 / (2.0 * sigma_conf * sigma_conf)).exp());
        }
    }
    let edges = max_normalized(&edge_map(&crop));
    let template = fingertip_template();
    let mut corr = Image::new(region.size, region.size);
    for y in 0..region.size {
        for x in 0..region.size {
            let c = correlate_at(&crop, &template, x as i64, y as i64, BorderMode::Clamp);
            corr.set(x, y, c.max(0.0));
        }
    }
    Ok([max_normalized(&bump), edges, max_normalized(&corr)])
}

/// Multiply the three streams pixel-wise and pick the two candidates:
/// the argmax, and the argmax at least `EXCLUSION_RADIUS` away from it.
pub fn fuse_streams(
    img: &Image,
    region: &FocusRegion,
    estimate: (f64, f64),
    sigma_conf: f64,
) -> Result<FusionResult> {
    let [bump, edges, corr] = fusion_streams(img, region, estimate, sigma_conf)?;
    let fused = bump.pointwise_mul(&edges)?.pointwise_mul(&corr)?;
    let (bx, by) = fused.argmax();
    let mut alt = None;
    let mut alt_val = f64::NEG_INFINITY;
    for y in 0..fused.height() {
        for x in 0..fused.width() {
            let d = ((x as f64 - bx as f64).powi(2) + (y as f64 - by as f64).powi(2)).sqrt();
            if d >= EXCLUSION_RADIUS && fused.get(x, y) > alt_val {
                alt = Some((x, y));
                alt_val = fused.get(x, y);
            }
        }
    }
    let (ax, ay) = alt.ok_or_else(|| Error::invalid("region too small for two candidates"))?;
    Ok(FusionResult {
        best: (bx + region.x0, by + region.y0),
        alternative: (ax + region.x0, ay + region.y0),
        best_confidence: fused.get(bx, by),
        alternative_confidence: alt_val,
        map: fused,
    })
}

/// Per-finger and aggregate pixel errors of both stages on a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub global_mean: [f64; FINGER_COUNT],
    pub global_median: [f64; FINGER_COUNT],
    pub refined_mean: [f64; FINGER_COUNT],
    pub refined_median: [f64; FINGER_COUNT],
    pub overall_global_mean: f64,
    pub overall_refined_mean: f64,
    /// Fraction of images whose mean tip error improved after refinement.
    pub improved_fraction: f64,
    pub images: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Run the detector over a labeled set and aggregate errors.
pub fn evaluate_hierarchy(model: &HierarchyModel, records: &[DatasetRecord]) -> Result<EvaluationReport> {
    check_dataset(records, model.width, model.height)?;
    let mut global_err: [Vec<f64>; FINGER_COUNT] = Default::default();
    let mut refined_err: [Vec<f64>; FINGER_COUNT] = Default::default();
    let mut improved = 0usize;
    for r in records {
        let det = detect(model, &r.image)?;
        let mut gsum = 0.0;
        let mut rsum = 0.0;
        for f in 0..FINGER_COUNT {
            let truth = &r.tips.tips[f];
            let ge = ((det.global.tips[f].x - truth.x).powi(2)
                + (det.global.tips[f].y - truth.y).powi(2))
            .sqrt();
            let re = ((det.refined.tips[f].x - truth.x).powi(2)
                + (det.refined.tips[f].y - truth.y).powi(2))
            .sqrt();
            global_err[f].push(ge);
            refined_err[f].push(re);
            gsum += ge;
            rsum += re;
        }
        if rsum < gsum {
            improved += 1;
        }
    }
    let n = records.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut report = EvaluationReport {
        global_mean: [0.0; FINGER_COUNT],
        global_median: [0.0; FINGER_COUNT],
        refined_mean: [0.0; FINGER_COUNT],
        refined_median: [0.0; FINGER_COUNT],
        overall_global_mean: 0.0,
        overall_refined_mean: 0.0,
        improved_fraction: improved as f64 / n,
        images: records.len(),
    };
    for f in 0..FINGER_COUNT {
        report.global_mean[f] = mean(&global_err[f]);
        report.refined_mean[f] = mean(&refined_err[f]);
        report.global_median[f] = median(&mut global_err[f]);
        report.refined_median[f] = median(&mut refined_err[f]);
    }
    report.overall_global_mean = report.global_mean.iter().sum::<f64>() / FINGER_COUNT as f64;
    report.overall_refined_mean = report.refined_mean.iter().sum::<f64>() / FINGER_COUNT as f64;
    Ok(report)
}

impl EvaluationReport {
    /// Plain-text table, one row per finger plus aggregates.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("images: {}\n", self.images));
        out.push_str("finger  global-mean  global-median  refined-mean  refined-median\n");
        for f in 0..FINGER_COUNT {
            out.push_str(&format!(
                "{:6}  {:11.3}  {:13.3}  {:12.3}  {:14.3}\n",
                f,
                self.global_mean[f],
                self.global_median[f],
                self.refined_mean[f],
                self.refined_median[f]
            ));
        }
        out.push_str(&format!(
            "overall global mean {:.3} px, refined mean {:.3} px, improved {:.1}%\n",
            self.overall_global_mean,
            self.overall_refined_mean,
            100.0 * self.improved_fraction
        ));
        out
    }
}

/// Draw a hollow square of the given half-width into `img`.
pub fn draw_square(img: &mut Image, cx: i64, cy: i64, half: i64, value: f64) {
    for d in -half..=half {
        for (x, y) in [
            (cx + d, cy - half),
            (cx + d, cy + half),
            (cx - half, cy + d),
            (cx + half, cy + d),
        ] {
            if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
                img.set(x as usize, y as usize, value);
            }
        }
    }
}

/// Color overlay of one detection: green squares at refined tips,
/// red squares at global estimates, written as a PPM triplet.
pub fn annotate_detection(img: &Image, det: &Detection) -> (Image, Image, Image) {
    let mut r = img.clone();
    let mut g = img.clone();
    let mut b = img.clone();
    for f in 0..FINGER_COUNT {
        let gt = &det.global.tips[f];
        draw_square(&mut r, gt.x.round() as i64, gt.y.round() as i64, 2, 1.0);
        draw_square(&mut g, gt.x.round() as i64, gt.y.round() as i64, 2, 0.0);
        draw_square(&mut b, gt.x.round() as i64, gt.y.round() as i64, 2, 0.0);
        let rt = &det.refined.tips[f];
        draw_square(&mut g, rt.x.round() as i64, rt.y.round() as i64, 2, 1.0);
        draw_square(&mut r, rt.x.round() as i64, rt.y.round() as i64, 2, 0.0);
        draw_square(&mut b, rt.x.round() as i64, rt.y.round() as i64, 2, 0.0);
    }
    (r, g, b)
}

impl HierarchyModel {
    /// Serialize the whole two-level model into one versioned blob.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(HIER_MAGIC);
        bytes.extend_from_slice(&HIER_VERSION.to_le_bytes());
        for v in [
            self.width as u32,
            self.height as u32,
            self.half_size as u32,
            self.global_bank.orientations() as u32,
            self.global_bank.wavelengths().len() as u32,
        ] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for &w in self.global_bank.wavelengths() {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        bytes.extend_from_slice(&self.global_bank.sigma_ratio().to_le_bytes());
        let (gnx, gny) = grid_shape(&self.global_grid);
        let (lnx, lny) = grid_shape(&self.local_grid);
        for v in [gnx as u32, gny as u32, lnx as u32, lny as u32] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut nets = vec![self.global_net.to_bytes()];
        for n in &self.local_nets {
            nets.push(n.to_bytes());
        }
        bytes.extend_from_slice(&(nets.len() as u32).to_le_bytes());
        for blob in nets {
            bytes.extend_from_slice(&(blob.len() as u32).to_le_bytes());
            bytes.extend_from_slice(&blob);
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8], location: &str) -> Result<Self> {
        let fail = |msg: &str| Error::parse(location.to_string(), msg.to_string());
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::parse(
                    location.to_string(),
                    "truncated hierarchy model".to_string(),
                ));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 4)? != HIER_MAGIC {
            return Err(fail("bad hierarchy model magic"));
        }
        let read_u32 = |pos: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
        };
        if read_u32(&mut pos)? != HIER_VERSION {
            return Err(fail("unsupported hierarchy model version"));
        }
        let width = read_u32(&mut pos)? as usize;
        let height = read_u32(&mut pos)? as usize;
        let half_size = read_u32(&mut pos)? as usize;
        let orientations = read_u32(&mut pos)? as usize;
        let n_wavelengths = read_u32(&mut pos)? as usize;
        let read_f64 = |pos: &mut usize| -> Result<f64> {
            Ok(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
        };
        let mut wavelengths = Vec::with_capacity(n_wavelengths);
        for _ in 0..n_wavelengths {
            wavelengths.push(read_f64(&mut pos)?);
        }
        let sigma_ratio = read_f64(&mut pos)?;
        let read_u32 = |pos: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
        };
        let gnx = read_u32(&mut pos)? as usize;
        let gny = read_u32(&mut pos)? as usize;
        let lnx = read_u32(&mut pos)? as usize;
        let lny = read_u32(&mut pos)? as usize;
        let n_nets = read_u32(&mut pos)? as usize;
        if n_nets != 1 + FINGER_COUNT {
            return Err(fail("hierarchy model must hold six networks"));
        }
        let mut nets = Vec::with_capacity(n_nets);
        for _ in 0..n_nets {
            let len = read_u32(&mut pos)? as usize;
            let blob = take(&mut pos, len)?;
            nets.push(LLMNetwork::from_bytes(blob, location)?);
        }
        if pos != bytes.len() {
            return Err(fail("trailing bytes after hierarchy model"));
        }
        let global_bank = GaborBank::new(orientations, &wavelengths, sigma_ratio)?;
        let local_bank = global_bank.halved()?;
        let global_grid = JetGrid::regular(width, height, gnx, gny)?;
        let local_grid = JetGrid::regular(2 * half_size, 2 * half_size, lnx, lny)?;
        let global_net = nets.remove(0);
        Ok(HierarchyModel {
            width,
            height,
            half_size,
            global_bank,
            local_bank,
            global_grid,
            local_grid,
            global_net,
            local_nets: nets,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

fn grid_shape(grid: &JetGrid) -> (usize, usize) {
    // recover (nx, ny) from the lattice: positions are row-major with
    // x repeating every nx entries
    let positions = grid.positions();
    let first_x = positions[0].0;
    let nx = positions
        .iter()
        .skip(1)
        .position(|p| p.0 == first_x)
        .map_or(positions.len(), |i| i + 1);
    (nx, positions.len() / nx)
}
