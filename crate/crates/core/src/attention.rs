//! Saccadic attention engine: per-frame feature maps (edges, HSI color,
//! motion, skin), weighted integration with multiplicative manipulation
//! and fade-out maps, winner-take-all fixation selection with
//! inhibition of return, plus top-down modulation via a pointing cone
//! and verbally boosted map weights.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{edge_map, gaussian_smooth, Image};

pub const MAP_COUNT: usize = 6;

/// Feature-map identifiers, in stack order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapId {
    Edges = 0,
    Saturation = 1,
    Intensity = 2,
    Motion = 3,
    Skin = 4,
    MovingSkin = 5,
}

impl MapId {
    pub const ALL: [MapId; MAP_COUNT] = [
        MapId::Edges,
        MapId::Saturation,
        MapId::Intensity,
        MapId::Motion,
        MapId::Skin,
        MapId::MovingSkin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MapId::Edges => "edges",
            MapId::Saturation => "saturation",
            MapId::Intensity => "intensity",
            MapId::Motion => "motion",
            MapId::Skin => "skin",
            MapId::MovingSkin => "moving_skin",
        }
    }

    pub fn parse(s: &str) -> Result<MapId> {
        MapId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature map {:?}", s)))
    }
}

/// One RGB input frame, channel values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub r: Image,
    pub g: Image,
    pub b: Image,
    pub index: usize,
}

impl Frame {
    pub fn new(r: Image, g: Image, b: Image, index: usize) -> Result<Self> {
        let (w, h) = (r.width(), r.height());
        for (name, c) in [("g", &g), ("b", &b)] {
            if c.width() != w || c.height() != h {
                return Err(Error::invalid(format!(
                    "frame channel {} size mismatch",
                    name
                )));
            }
        }
        for c in [&r, &g, &b] {
            if c.data().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::invalid("frame values must lie in [0,1]"));
            }
        }
        Ok(Frame { r, g, b, index })
    }

    pub fn black(width: usize, height: usize, index: usize) -> Frame {
        Frame {
            r: Image::new(width, height),
            g: Image::new(width, height),
            b: Image::new(width, height),
            index,
        }
    }

    pub fn size(&self) -> (usize, usize) {
        (self.r.width(), self.r.height())
    }
}

/// Skin segmentation box in HSI space: hue range (degrees, wrapping)
/// with a minimum saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinBox {
    pub hue_lo: f64,
    pub hue_hi: f64,
    pub sat_min: f64,
}

impl Default for SkinBox {
    fn default() -> Self {
        SkinBox {
            hue_lo: 330.0,
            hue_hi: 50.0,
            sat_min: 0.3,
        }
    }
}

impl SkinBox {
    fn contains(&self, hue: f64, sat: f64) -> bool {
        if sat < self.sat_min {
            return false;
        }
        if self.hue_lo <= self.hue_hi {
            hue >= self.hue_lo && hue <= self.hue_hi
        } else {
            hue >= self.hue_lo || hue <= self.hue_hi
        }
    }
}

/// The six feature maps with their integration weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub maps: [Image; MAP_COUNT],
    pub weights: [f64; MAP_COUNT],
}

impl FeatureStack {
    pub fn map(&self, id: MapId) -> &Image {
        &self.maps[id as usize]
    }
}

/// HSI decomposition of an RGB pixel; hue in degrees, 0 for gray.
fn hsi(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let i = (r + g + b) / 3.0;
    let min = r.min(g).min(b);
    let s = if i > 0.0 { 1.0 - min / i } else { 0.0 };
    let num = 0.5 * ((r - g) + (r - b));
    let den = ((r - g) * (r - g) + (r - b) * (g - b)).sqrt();
    let h = if den > 1e-12 {
        let theta = (num / den).clamp(-1.0, 1.0).acos().to_degrees();
        if b <= g {
            theta
        } else {
            360.0 - theta
        }
    } else {
        0.0
    };
    (h, s, i)
}

fn max_normalized(img: &Image) -> Image {
    let max = img.max_value();
    if max <= 0.0 {
        return Image::new(img.width(), img.height());
    }
    Image::from_vec(
        img.width(),
        img.height(),
        img.data().iter().map(|v| v / max).collect(),
    )
    .expect("same shape")
}

/// Compute the feature stack for one frame; `prev` supplies the motion
/// reference (no motion on the first frame).
pub fn compute_features(
    frame: &Frame,
    prev: Option<&Frame>,
    skin: &SkinBox,
    weights: [f64; MAP_COUNT],
) -> Result<FeatureStack> {
    let (w, h) = frame.size();
    if let Some(p) = prev {
        if p.size() != (w, h) {
            return Err(Error::invalid("consecutive frames differ in size"));
        }
    }
    let mut saturation = Image::new(w, h);
    let mut intensity = Image::new(w, h);
    let mut skin_map = Image::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (hue, s, i) = hsi(frame.r.get(x, y), frame.g.get(x, y), frame.b.get(x, y));
            saturation.set(x, y, s);
            intensity.set(x, y, i);
            skin_map.set(x, y, if skin.contains(hue, s) { 1.0 } else { 0.0 });
        }
    }
    let edges = edge_map(&intensity);
    let motion = match prev {
        Some(p) => {
            let mut diff = Image::new(w, h);
            for y in 0..h {
                for x in 0..w {
                    let prev_i = (p.r.get(x, y) + p.g.get(x, y) + p.b.get(x, y)) / 3.0;
                    diff.set(x, y, (intensity.get(x, y) - prev_i).abs());
                }
            }
            max_normalized(&diff)
        }
        None => Image::new(w, h),
    };
    let moving_skin = motion.pointwise_mul(&skin_map)?;
    Ok(FeatureStack {
        maps: [edges, saturation, intensity, motion, skin_map, moving_skin],
        weights,
    })
}

/// One selected fixation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixation {
    pub x: f64,
    pub y: f64,
    /// Argmax pixel before the component-centroid snap.
    pub raw: (usize, usize),
    pub snapped: bool,
}

/// Mutable attention state carried across steps of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    /// Manipulation map M, multiplicative top-down gate.
    pub manipulation: Image,
    /// Fade-out map Phi, inhibition of return.
    pub fadeout: Image,
    pub history: Vec<Fixation>,
    pub weights: [f64; MAP_COUNT],
    pub default_weights: [f64; MAP_COUNT],
    /// Geometric decay rate of boosted weights.
    pub lambda_decay: f64,
}

impl AttentionState {
    pub fn new(width: usize, height: usize, weights: [f64; MAP_COUNT], lambda_decay: f64) -> Result<Self> {
        if !(lambda_decay > 0.0 && lambda_decay < 1.0) {
            return Err(Error::invalid("lambda_decay must lie in (0,1)"));
        }
        Ok(AttentionState {
            manipulation: Image::constant(width, height, 1.0),
            fadeout: Image::constant(width, height, 1.0),
            history: Vec::new(),
            weights,
            default_weights: weights,
            lambda_decay,
        })
    }
}

/// A = gaussian_smooth((sum_i w_i F_i) * M * Phi, sigma); not re-normalized.
pub fn integrate(stack: &FeatureStack, state: &AttentionState, sigma: f64) -> Result<Image> {
    let (w, h) = (state.manipulation.width(), state.manipulation.height());
    let mut sum = Image::new(w, h);
    for (m, &wt) in stack.maps.iter().zip(&stack.weights) {
        if m.width() != w || m.height() != h {
            return Err(Error::invalid("feature map size mismatch"));
        }
        for (acc, v) in sum.data_mut().iter_mut().zip(m.data()) {
            *acc += wt * v;
        }
    }
    let gated = sum
        .pointwise_mul(&state.manipulation)?
        .pointwise_mul(&state.fadeout)?;
    gaussian_smooth(&gated, sigma)
}

/// Pick the most active location, snap it to the centroid of its
/// thresholded connected component, and carve the inhibition bump into
/// the fade-out map. Returns `None` when the map is all-zero.
pub fn select_fixation(
    a: &Image,
    state: &mut AttentionState,
    threshold: f64,
    amplitude: f64,
    sigma_f: f64,
) -> Result<Option<Fixation>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid("snap threshold must lie in [0,1]"));
    }
    let max = a.max_value();
    if max <= 0.0 {
        return Ok(None);
    }
    let raw = a.argmax();
    // centroid of the connected component of {A >= threshold * max}
    // containing the raw argmax (4-connected flood fill)
    let (w, h) = (a.width(), a.height());
    let cut = threshold * max;
    let mut seen = vec![false; w * h];
    let mut queue = vec![raw];
    seen[raw.1 * w + raw.0] = true;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    while let Some((x, y)) = queue.pop() {
        sx += x as f64;
        sy += y as f64;
        n += 1;
        let mut push = |nx: usize, ny: usize| {
            if !seen[ny * w + nx] && a.get(nx, ny) >= cut {
                seen[ny * w + nx] = true;
                queue.push((nx, ny));
            }
        };
        if x > 0 {
            push(x - 1, y);
        }
        if x + 1 < w {
            push(x + 1, y);
        }
        if y > 0 {
            push(x, y - 1);
        }
        if y + 1 < h {
            push(x, y + 1);
        }
    }
    let fix = Fixation {
        x: sx / n as f64,
        y: sy / n as f64,
        raw,
        snapped: n > 1,
    };
    // inhibition of return: subtract a Gaussian bump at the fixation
    for y in 0..h {
        for x in 0..w {
            let d2 = (x as f64 - fix.x).powi(2) + (y as f64 - fix.y).powi(2);
            let inh = amplitude * (-d2 / (2.0 * sigma_f * sigma_f)).exp();
            let v = (state.fadeout.get(x, y) - inh).clamp(0.0, 1.0);
            state.fadeout.set(x, y, v);
        }
    }
    state.history.push(fix);
    Ok(Some(fix))
}

/// Phi <- clamp(Phi + rho*(1 - Phi) + moving_skin, 0, 1): relaxation
/// toward 1 plus additive reinjection of moving skin.
pub fn step_fadeout(state: &mut AttentionState, stack: &FeatureStack, rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid("recovery rate must lie in [0,1]"));
    }
    let moving = stack.map(MapId::MovingSkin);
    if moving.width() != state.fadeout.width() || moving.height() != state.fadeout.height() {
        return Err(Error::invalid("moving-skin map size mismatch"));
    }
    for (phi, m) in state.fadeout.data_mut().iter_mut().zip(moving.data()) {
        *phi = (*phi + rho * (1.0 - *phi) + m).clamp(0.0, 1.0);
    }
    Ok(())
}

/// Binary manipulation map: 1 inside the forward sector from `origin`
/// along `direction` with the given half-angle aperture (pixels within
/// half a pixel of the ray count as inside; the origin pixel is 1).
pub fn pointing_cone(
    width: usize,
    height: usize,
    origin: (f64, f64),
    direction: (f64, f64),
    aperture: f64,
) -> Result<Image> {
    let norm = (direction.0 * direction.0 + direction.1 * direction.1).sqrt();
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::invalid("pointing direction must be nonzero"));
    }
    if !(0.0..=std::f64::consts::PI).contains(&aperture) {
        return Err(Error::invalid("cone aperture must lie in [0, pi]"));
    }
    let (dx, dy) = (direction.0 / norm, direction.1 / norm);
    let mut m = Image::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64 - origin.0, y as f64 - origin.1);
            let r = (px * px + py * py).sqrt();
            let along = px * dx + py * dy;
            let perp = (px * dy - py * dx).abs();
            let inside = if r <= 0.5 {
                true
            } else if along < 0.0 {
                false
            } else {
                let angle = (along / r).clamp(-1.0, 1.0).acos();
                angle <= aperture || perp <= 0.5
            };
            m.set(x, y, if inside { 1.0 } else { 0.0 });
        }
    }
    Ok(m)
}

/// Verbal boost: set the map's weight to its default plus `boost`.
pub fn apply_color_bias(state: &mut AttentionState, map: MapId, boost: f64) -> Result<()> {
    if !(boost >= 0.0) {
        return Err(Error::invalid("bias boost must be >= 0"));
    }
    state.weights[map as usize] = state.default_weights[map as usize] + boost;
    Ok(())
}

/// One decay step: every weight relaxes geometrically to its default.
pub fn decay_bias(state: &mut AttentionState) {
    for (w, d) in state.weights.iter_mut().zip(&state.default_weights) {
        *w = d + state.lambda_decay * (*w - d);
    }
}

// ---------------------------------------------------------------------------
// scripted scenarios

/// A colored disc appearing at step `t`, optionally drifting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobEvent {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub color: [f64; 3],
    pub vx: f64,
    pub vy: f64,
}

/// Pointing gesture installing a cone manipulation map at step `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEvent {
    pub t: usize,
    pub origin: (f64, f64),
    pub direction: (f64, f64),
    pub aperture: f64,
}

/// Verbal color cue boosting the saturation map at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SayEvent {
    pub t: usize,
    pub colorname: String,
    pub boost: f64,
}

/// Parsed scripted scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub width: usize,
    pub height: usize,
    pub steps: usize,
    pub blobs: Vec<BlobEvent>,
    pub points: Vec<PointEvent>,
    pub says: Vec<SayEvent>,
}

const COLOR_NAMES: &[&str] = &[
    "red", "green", "blue", "yellow", "cyan", "magenta", "orange", "purple",
];

/// Parse the line-oriented scenario format; errors carry line numbers.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut width = None;
    let mut steps = None;
    let mut scenario = Scenario {
        width: 0,
        height: 0,
        steps: 0,
        blobs: Vec::new(),
        points: Vec::new(),
        says: Vec::new(),
    };
    for (ln, line) in text.lines().enumerate() {
        let loc = format!("scenario line {}", ln + 1);
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let kind = tok.next().unwrap();
        let rest: Vec<&str> = tok.collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(loc.clone(), format!("bad number {:?}", s)))
        };
        let idx = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::parse(loc.clone(), format!("bad count {:?}", s)))
        };
        match kind {
            "size" => {
                if rest.len() != 2 {
                    return Err(Error::parse(loc, "size takes W H".to_string()));
                }
                width = Some((idx(rest[0])?, idx(rest[1])?));
            }
            "steps" => {
                if rest.len() != 1 {
                    return Err(Error::parse(loc, "steps takes N".to_string()));
                }
                steps = Some(idx(rest[0])?);
            }
            "blob" => {
                if rest.len() != 5 && rest.len() != 7 {
                    return Err(Error::parse(
                        loc,
                        "blob takes t x y r colorR,G,B [vx vy]".to_string(),
                    ));
                }
                let color: Vec<f64> = rest[4]
                    .split(',')
                    .map(num)
                    .collect::<Result<Vec<_>>>()?;
                if color.len() != 3 || color.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
                    return Err(Error::parse(loc, "blob color must be R,G,B in [0,1]".to_string()));
                }
                scenario.blobs.push(BlobEvent {
                    t: idx(rest[0])?,
                    x: num(rest[1])?,
                    y: num(rest[2])?,
                    radius: num(rest[3])?,
                    color: [color[0], color[1], color[2]],
                    vx: if rest.len() == 7 { num(rest[5])? } else { 0.0 },
                    vy: if rest.len() == 7 { num(rest[6])? } else { 0.0 },
                });
            }
            "point" => {
                if rest.len() != 6 {
                    return Err(Error::parse(
                        loc,
                        "point takes t ox oy dx dy aperture".to_string(),
                    ));
                }
                scenario.points.push(PointEvent {
                    t: idx(rest[0])?,
                    origin: (num(rest[1])?, num(rest[2])?),
                    direction: (num(rest[3])?, num(rest[4])?),
                    aperture: num(rest[5])?,
                });
            }
            "say" => {
                if rest.len() != 3 {
                    return Err(Error::parse(loc, "say takes t colorname boost".to_string()));
                }
                if !COLOR_NAMES.contains(&rest[1]) {
                    return Err(Error::parse(loc, format!("unknown color {:?}", rest[1])));
                }
                scenario.says.push(SayEvent {
                    t: idx(rest[0])?,
                    colorname: rest[1].to_string(),
                    boost: num(rest[2])?,
                });
            }
            other => {
                return Err(Error::parse(loc, format!("unknown directive {:?}", other)));
            }
        }
    }
    let (w, h) = width.ok_or_else(|| Error::parse("scenario", "missing size directive"))?;
    scenario.width = w;
    scenario.height = h;
    scenario.steps = steps.ok_or_else(|| Error::parse("scenario", "missing steps directive"))?;
    if w == 0 || h == 0 {
        return Err(Error::parse("scenario", "size must be positive"));
    }
    Ok(scenario)
}

/// Render the scripted frame for one step: black background plus the
/// blobs active at that step.
pub fn render_scenario_frame(scenario: &Scenario, step: usize) -> Frame {
    let mut frame = Frame::black(scenario.width, scenario.height, step);
    for blob in &scenario.blobs {
        if step < blob.t {
            continue;
        }
        let age = (step - blob.t) as f64;
        let (cx, cy) = (blob.x + age * blob.vx, blob.y + age * blob.vy);
        for y in 0..scenario.height {
            for x in 0..scenario.width {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                if d2 <= blob.radius * blob.radius {
                    frame.r.set(x, y, blob.color[0]);
                    frame.g.set(x, y, blob.color[1]);
                    frame.b.set(x, y, blob.color[2]);
                }
            }
        }
    }
    frame
}

/// Tunable constants of the attention loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionConfig {
    pub weights: [f64; MAP_COUNT],
    /// Smoothing of the integrated map, pixels.
    pub sigma: f64,
    /// Inhibition bump amplitude and radius.
    pub amplitude: f64,
    pub sigma_f: f64,
    /// Fade-out recovery rate per step.
    pub rho: f64,
    /// Weight-boost decay rate.
    pub lambda_decay: f64,
    /// Component-snap threshold, fraction of the map maximum.
    pub snap_threshold: f64,
    pub skin: SkinBox,
    /// Width of the border strip zeroed in Phi at episode start.
    pub border_margin: usize,
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig {
            weights: [1.0; MAP_COUNT],
            sigma: 2.0,
            amplitude: 1.0,
            sigma_f: 6.0,
            rho: 0.05,
            lambda_decay: 0.9,
            snap_threshold: 0.5,
            skin: SkinBox::default(),
            border_margin: 2,
        }
    }
}

/// Per-step record of an episode run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub step: usize,
    pub fixation: Option<Fixation>,
}

/// Episode outcome: the fixation trace and per-step attention maps.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub trace: Vec<EpisodeStep>,
    pub attention_maps: Vec<Image>,
    pub final_state: AttentionState,
}

/// Run the scripted loop: features -> integrate -> fixate -> fade-out,
/// applying point/say events at their steps. Deterministic.
pub fn run_episode(scenario: &Scenario, cfg: &AttentionConfig) -> Result<EpisodeResult> {
    let mut state = AttentionState::new(
        scenario.width,
        scenario.height,
        cfg.weights,
        cfg.lambda_decay,
    )?;
    // camera joint limits as a static border mask folded into Phi once
    let m = cfg.border_margin;
    if 2 * m < scenario.width && 2 * m < scenario.height {
        for y in 0..scenario.height {
            for x in 0..scenario.width {
                if x < m || y < m || x >= scenario.width - m || y >= scenario.height - m {
                    state.fadeout.set(x, y, 0.0);
                }
            }
        }
    }
    let mut prev_frame: Option<Frame> = None;
    let mut trace = Vec::with_capacity(scenario.steps);
    let mut maps = Vec::with_capacity(scenario.steps);
    for step in 0..scenario.steps {
        for p in scenario.points.iter().filter(|p| p.t == step) {
            state.manipulation = pointing_cone(
                scenario.width,
                scenario.height,
                p.origin,
                p.direction,
                p.aperture,
            )?;
        }
        for s in scenario.says.iter().filter(|s| s.t == step) {
            // verbal color cues all land on the one chromatic map we keep
            apply_color_bias(&mut state, MapId::Saturation, s.boost)?;
        }
        let frame = render_scenario_frame(scenario, step);
        let stack = compute_features(&frame, prev_frame.as_ref(), &cfg.skin, state.weights)?;
        let a = integrate(&stack, &state, cfg.sigma)?;
        let fixation = select_fixation(
            &a,
            &mut state,
            cfg.snap_threshold,
            cfg.amplitude,
            cfg.sigma_f,
        )?;
        step_fadeout(&mut state, &stack, cfg.rho)?;
        decay_bias(&mut state);
        trace.push(EpisodeStep { step, fixation });
        maps.push(a);
        prev_frame = Some(frame);
    }
    Ok(EpisodeResult {
        trace,
        attention_maps: maps,
        final_state: state,
    })
}

/// CSV rendering of a fixation trace: `step,x,y,snapped`, empty fields
/// on no-fixation steps.
pub fn trace_csv(result: &EpisodeResult) -> String {
    let mut out = String::from("step,x,y,snapped\n");
    for s in &result.trace {
        match s.fixation {
            Some(f) => out.push_str(&format!("{},{:?},{:?},{}\n", s.step, f.x, f.y, f.snapped)),
            None => out.push_str(&format!("{},,,\n", s.step)),
        }
    }
    out
}

/// Read and parse a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}
