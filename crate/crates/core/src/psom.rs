//! Parameterized self-organizing maps over a 4x4 lattice of
//! forward-kinematics samples, one manifold per finger.
//!
//! The manifold interpolates node embeddings `(x, y, z, phi, theta2)`
//! with product Lagrange polynomials over lattice coordinates
//! `s in [0,3]^2`. Inverting the map on the observed `(x, y)` subspace
//! recovers joint parameters and depth from 2D fingertips.

use std::io::Read as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hand::{
    finger_chain, Camera, FingerPose, FingertipSet, HandGeometry, HandPose, PoseLimits,
    FINGER_COUNT,
};

const PSOM_MAGIC: &[u8; 4] = b"NHPS";
const PSOM_VERSION: u32 = 1;

pub const EMBED_DIM: usize = 5;
pub const LATTICE: usize = 4;

/// Boolean selection of observed embedding components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectionMask {
    pub selected: [bool; EMBED_DIM],
}

impl ProjectionMask {
    pub fn new(selected: [bool; EMBED_DIM]) -> Result<Self> {
        if !selected.iter().any(|&s| s) {
            return Err(Error::invalid("projection mask selects no component"));
        }
        Ok(ProjectionMask { selected })
    }

    /// Observe the image-plane coordinates only.
    pub fn xy() -> Self {
        ProjectionMask {
            selected: [true, true, false, false, false],
        }
    }

    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }
}

/// 4-point Lagrange basis weights at lattice nodes {0,1,2,3}.
pub fn lagrange_weights(t: f64) -> [f64; LATTICE] {
    let mut w = [0.0; LATTICE];
    for (i, wi) in w.iter_mut().enumerate() {
        let mut v = 1.0;
        for j in 0..LATTICE {
            if j != i {
                v *= (t - j as f64) / (i as f64 - j as f64);
            }
        }
        *wi = v;
    }
    w
}

/// Derivatives of the 4-point Lagrange basis.
pub fn lagrange_derivatives(t: f64) -> [f64; LATTICE] {
    let mut d = [0.0; LATTICE];
    for (i, di) in d.iter_mut().enumerate() {
        let mut sum = 0.0;
        for k in 0..LATTICE {
            if k == i {
                continue;
            }
            let mut prod = 1.0 / (i as f64 - k as f64);
            for j in 0..LATTICE {
                if j != i && j != k {
                    prod *= (t - j as f64) / (i as f64 - j as f64);
                }
            }
            sum += prod;
        }
        *di = sum;
    }
    d
}

/// Per-finger continuous manifold through 16 embedded training points.
#[derive(Debug, Clone, PartialEq)]
pub struct PSOMManifold {
    pub finger: usize,
    /// Node embeddings, index = phi_index * 4 + theta_index.
    embeddings: [[f64; EMBED_DIM]; LATTICE * LATTICE],
    /// Per-component scaling to unit ranges: scaled = (v - offset) * scale.
    scale: [f64; EMBED_DIM],
    offset: [f64; EMBED_DIM],
}

/// Best lattice point found by an inversion run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionResult {
    pub s: [f64; 2],
    pub embedding: [f64; EMBED_DIM],
    /// Scaled least-squares objective at `s`.
    pub objective: f64,
}

/// Inversion outcome: the best point plus whether any start converged.
/// A non-converged report is the "convergence failure carrying the best
/// found" case; callers decide whether that is fatal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionReport {
    pub result: InversionResult,
    pub converged: bool,
}

/// Projected-gradient-descent settings for `psom_inverse`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvertConfig {
    pub max_iters: usize,
    /// Convergence threshold on the projected gradient step norm.
    pub grad_tol: f64,
}

impl Default for InvertConfig {
    fn default() -> Self {
        InvertConfig {
            max_iters: 500,
            grad_tol: 1e-10,
        }
    }
}

impl PSOMManifold {
    pub fn node(&self, phi_index: usize, theta_index: usize) -> &[f64; EMBED_DIM] {
        &self.embeddings[phi_index * LATTICE + theta_index]
    }

    pub fn scaling(&self) -> ([f64; EMBED_DIM], [f64; EMBED_DIM]) {
        (self.scale, self.offset)
    }

    fn check_domain(s: [f64; 2]) -> Result<()> {
        if s.iter().any(|&v| !v.is_finite() || v < 0.0 || v > 3.0) {
            return Err(Error::invalid(format!(
                "lattice coordinate ({}, {}) outside [0,3]^2",
                s[0], s[1]
            )));
        }
        Ok(())
    }

    /// Evaluate the manifold at lattice coordinates `s` (no extrapolation).
    pub fn forward(&self, s: [f64; 2]) -> Result<[f64; EMBED_DIM]> {
        Self::check_domain(s)?;
        let wu = lagrange_weights(s[0]);
        let wv = lagrange_weights(s[1]);
        let mut out = [0.0; EMBED_DIM];
        for i in 0..LATTICE {
            for j in 0..LATTICE {
                let w = wu[i] * wv[j];
                let e = &self.embeddings[i * LATTICE + j];
                for c in 0..EMBED_DIM {
                    out[c] += w * e[c];
                }
            }
        }
        Ok(out)
    }

    /// Scaled least-squares objective of the masked residual at `s`.
    /// `observed` holds one value per selected component, in order.
    pub fn objective(&self, s: [f64; 2], observed: &[f64], mask: &ProjectionMask) -> Result<f64> {
        let e = self.forward(s)?;
        Ok(self.residual_from_embedding(&e, observed, mask))
    }

    fn residual_from_embedding(
        &self,
        e: &[f64; EMBED_DIM],
        observed: &[f64],
        mask: &ProjectionMask,
    ) -> f64 {
        let mut obj = 0.0;
        let mut oi = 0;
        for c in 0..EMBED_DIM {
            if mask.selected[c] {
                let r = (e[c] - observed[oi]) * self.scale[c];
                obj += r * r;
                oi += 1;
            }
        }
        obj
    }

    /// Gradient of `objective` with respect to `s`.
    fn objective_gradient(
        &self,
        s: [f64; 2],
        observed: &[f64],
        mask: &ProjectionMask,
    ) -> [f64; 2] {
        let wu = lagrange_weights(s[0]);
        let wv = lagrange_weights(s[1]);
        let du = lagrange_derivatives(s[0]);
        let dv = lagrange_derivatives(s[1]);
        let mut e = [0.0; EMBED_DIM];
        let mut de_du = [0.0; EMBED_DIM];
        let mut de_dv = [0.0; EMBED_DIM];
        for i in 0..LATTICE {
            for j in 0..LATTICE {
                let node = &self.embeddings[i * LATTICE + j];
                for c in 0..EMBED_DIM {
                    e[c] += wu[i] * wv[j] * node[c];
                    de_du[c] += du[i] * wv[j] * node[c];
                    de_dv[c] += wu[i] * dv[j] * node[c];
                }
            }
        }
        let mut g = [0.0; 2];
        let mut oi = 0;
        for c in 0..EMBED_DIM {
            if mask.selected[c] {
                let r = (e[c] - observed[oi]) * self.scale[c];
                g[0] += 2.0 * r * self.scale[c] * de_du[c];
                g[1] += 2.0 * r * self.scale[c] * de_dv[c];
                oi += 1;
            }
        }
        g
    }
}

/// Build one finger's manifold by sampling `(phi, theta2)` on a 4x4 grid
/// spanning the joint limits and embedding the projected fingertips.
pub fn fit_psom(
    finger: usize,
    geom: &HandGeometry,
    limits: &PoseLimits,
    camera: &Camera,
) -> Result<PSOMManifold> {
    if finger >= FINGER_COUNT {
        return Err(Error::invalid(format!("finger index {} out of range", finger)));
    }
    geom.validate()?;
    let mut embeddings = [[0.0; EMBED_DIM]; LATTICE * LATTICE];
    for i in 0..LATTICE {
        let phi = -limits.phi_max + 2.0 * limits.phi_max * i as f64 / (LATTICE - 1) as f64;
        for j in 0..LATTICE {
            let theta = limits.theta_max * j as f64 / (LATTICE - 1) as f64;
            let pose = FingerPose {
                abduction: phi,
                flexion: theta,
            };
            let tip = finger_chain(&geom.fingers[finger], &pose)[3];
            let (x, y, z) = camera.project_point(tip);
            embeddings[i * LATTICE + j] = [x, y, z, phi, theta];
        }
    }
    // per-component unit-range scaling so pixels and radians are commensurate
    let mut scale = [1.0; EMBED_DIM];
    let mut offset = [0.0; EMBED_DIM];
    for c in 0..EMBED_DIM {
        let min = embeddings.iter().map(|e| e[c]).fold(f64::INFINITY, f64::min);
        let max = embeddings
            .iter()
            .map(|e| e[c])
            .fold(f64::NEG_INFINITY, f64::max);
        offset[c] = min;
        scale[c] = if max > min { 1.0 / (max - min) } else { 1.0 };
    }
    Ok(PSOMManifold {
        finger,
        embeddings,
        scale,
        offset,
    })
}

fn project_box(s: [f64; 2]) -> [f64; 2] {
    [s[0].clamp(0.0, 3.0), s[1].clamp(0.0, 3.0)]
}

/// Invert the manifold on the observed subspace: multi-start projected
/// gradient descent with backtracking line search from all 16 lattice
/// nodes. The report carries the best point even when no start converged.
pub fn psom_inverse(
    m: &PSOMManifold,
    observed: &[f64],
    mask: &ProjectionMask,
    cfg: &InvertConfig,
) -> Result<InversionReport> {
    if observed.len() != mask.count() {
        return Err(Error::invalid(format!(
            "{} observed values for a mask selecting {}",
            observed.len(),
            mask.count()
        )));
    }
    if observed.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("observed values must be finite"));
    }
    let mut best: Option<InversionResult> = None;
    let mut any_converged = false;
    for i in 0..LATTICE {
        for j in 0..LATTICE {
            let mut s = [i as f64, j as f64];
            let mut f = m.objective(s, observed, mask)?;
            let mut converged = false;
            let mut prev: Option<([f64; 2], [f64; 2])> = None;
            for _ in 0..cfg.max_iters {
                let g = m.objective_gradient(s, observed, mask);
                // projected-gradient convergence measure
                let probe = project_box([s[0] - g[0], s[1] - g[1]]);
                let pg = ((probe[0] - s[0]).powi(2) + (probe[1] - s[1]).powi(2)).sqrt();
                if pg < cfg.grad_tol {
                    converged = true;
                    break;
                }
                // Barzilai-Borwein initial step, safeguarded by backtracking
                let mut alpha = match prev {
                    Some((ps, pgr)) => {
                        let ds = [s[0] - ps[0], s[1] - ps[1]];
                        let dg = [g[0] - pgr[0], g[1] - pgr[1]];
                        let num = ds[0] * dg[0] + ds[1] * dg[1];
                        let den = dg[0] * dg[0] + dg[1] * dg[1];
                        if den > 0.0 && num > 0.0 {
                            (num / den).clamp(1e-8, 1e8)
                        } else {
                            1.0
                        }
                    }
                    None => 1.0,
                };
                prev = Some((s, g));
                let mut accepted = false;
                while alpha > 1e-16 {
                    let cand = project_box([s[0] - alpha * g[0], s[1] - alpha * g[1]]);
                    let fc = m.objective(cand, observed, mask)?;
                    let step2 = (cand[0] - s[0]).powi(2) + (cand[1] - s[1]).powi(2);
                    if fc <= f - 1e-4 / alpha * step2 && step2 > 0.0 {
                        s = cand;
                        f = fc;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    // no descent step representable: stationary point
                    converged = true;
                    break;
                }
            }
            any_converged |= converged;
            if best.map_or(true, |b| f < b.objective) {
                best = Some(InversionResult {
                    s,
                    embedding: m.forward(s)?,
                    objective: f,
                });
            }
        }
    }
    Ok(InversionReport {
        result: best.expect("at least one start"),
        converged: any_converged,
    })
}

/// Full-hand posture recovered from five independent inversions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostureResult {
    pub pose: HandPose,
    /// Depth estimate per finger (model units).
    pub depths: [f64; FINGER_COUNT],
    /// False where the input tip was invalid or inversion failed.
    pub finger_ok: [bool; FINGER_COUNT],
    pub residuals: [f64; FINGER_COUNT],
}

/// Invert each finger's manifold on its observed tip and assemble the
/// 10-parameter posture (clamped to the joint limits).
pub fn reconstruct_posture(
    manifolds: &[PSOMManifold; FINGER_COUNT],
    tips: &FingertipSet,
    limits: &PoseLimits,
    cfg: &InvertConfig,
) -> Result<PostureResult> {
    let mask = ProjectionMask::xy();
    let mut pose = HandPose::default();
    let mut depths = [0.0; FINGER_COUNT];
    let mut finger_ok = [false; FINGER_COUNT];
    let mut residuals = [f64::NAN; FINGER_COUNT];
    for f in 0..FINGER_COUNT {
        let tip = &tips.tips[f];
        if !tip.valid {
            continue;
        }
        let report = psom_inverse(&manifolds[f], &[tip.x, tip.y], &mask, cfg)?;
        let e = report.result.embedding;
        pose.fingers[f] = FingerPose {
            abduction: e[3],
            flexion: e[4],
        };
        depths[f] = e[2];
        residuals[f] = report.result.objective;
        finger_ok[f] = report.converged;
    }
    Ok(PostureResult {
        pose: pose.clamped(limits),
        depths,
        finger_ok,
        residuals,
    })
}

/// Fit all five per-finger manifolds.
pub fn fit_all(
    geom: &HandGeometry,
    limits: &PoseLimits,
    camera: &Camera,
) -> Result<[PSOMManifold; FINGER_COUNT]> {
    let mut out = Vec::with_capacity(FINGER_COUNT);
    for f in 0..FINGER_COUNT {
        out.push(fit_psom(f, geom, limits, camera)?);
    }
    Ok(out.try_into().expect("five manifolds"))
}

/// Write manifolds as a versioned binary blob.
pub fn save_manifolds(path: &Path, manifolds: &[PSOMManifold]) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(PSOM_MAGIC);
    bytes.extend_from_slice(&PSOM_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(manifolds.len() as u32).to_le_bytes());
    for m in manifolds {
        bytes.extend_from_slice(&(m.finger as u32).to_le_bytes());
        for e in &m.embeddings {
            for &v in e {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        for &v in &m.scale {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &m.offset {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_manifolds(path: &Path) -> Result<Vec<PSOMManifold>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let fail = |msg: &str| Error::parse(path.display().to_string(), msg.to_string());
    if bytes.len() < 12 || &bytes[0..4] != PSOM_MAGIC {
        return Err(fail("bad manifold magic"));
    }
    if u32::from_le_bytes(bytes[4..8].try_into().unwrap()) != PSOM_VERSION {
        return Err(fail("unsupported manifold version"));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let per = 4 + 8 * (LATTICE * LATTICE * EMBED_DIM + 2 * EMBED_DIM);
    if bytes.len() != 12 + count * per {
        return Err(fail("manifold payload length mismatch"));
    }
    let mut pos = 12;
    let read_f64 = |bytes: &[u8], pos: &mut usize| {
        let v = f64::from_le_bytes(bytes[*pos..*pos + 8].try_into().unwrap());
        *pos += 8;
        v
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let finger = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        let mut embeddings = [[0.0; EMBED_DIM]; LATTICE * LATTICE];
        for e in embeddings.iter_mut() {
            for v in e.iter_mut() {
                *v = read_f64(&bytes, &mut pos);
            }
        }
        let mut scale = [0.0; EMBED_DIM];
        let mut offset = [0.0; EMBED_DIM];
        for v in scale.iter_mut() {
            *v = read_f64(&bytes, &mut pos);
        }
        for v in offset.iter_mut() {
            *v = read_f64(&bytes, &mut pos);
        }
        out.push(PSOMManifold {
            finger,
            embeddings,
            scale,
            offset,
        });
    }
    Ok(out)
}
