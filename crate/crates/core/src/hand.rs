//! Articulated hand model: coupled joint kinematics, an orthographic
//! silhouette renderer, and labeled synthetic dataset generation.
//!
//! Each finger is a planar three-segment chain with two free parameters,
//! one abduction angle and one flexion parameter; the remaining joint
//! angles follow the tendon coupling theta1 = theta2 and
//! theta3 = (2/3) theta2, so a full hand posture has 10 free parameters.

use std::io::Read as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{gaussian_smooth, read_pgm, write_pgm, Image};

pub const FINGER_COUNT: usize = 5;

/// One finger: base placement in the palm frame plus segment shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerGeometry {
    /// Base joint position in the palm frame (model units).
    pub base: [f64; 3],
    /// Rest direction of the finger in the palm plane, radians from +y.
    pub base_angle: f64,
    /// Proximal, middle, distal segment lengths (model units).
    pub lengths: [f64; 3],
    /// Capsule radius used by the renderer (model units).
    pub radius: f64,
}

/// Full hand: five fingers ordered thumb..little plus a palm disc.
#[derive(Debug, Clone, PartialEq)]
pub struct HandGeometry {
    pub fingers: [FingerGeometry; FINGER_COUNT],
    pub palm_center: [f64; 2],
    pub palm_radius: f64,
}

impl HandGeometry {
    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.fingers.iter().enumerate() {
            if f.lengths.iter().any(|&l| l < 0.0) || f.radius <= 0.0 {
                return Err(Error::invalid(format!(
                    "finger {}: segment lengths must be >= 0 and radius > 0",
                    i
                )));
            }
        }
        if self.palm_radius <= 0.0 {
            return Err(Error::invalid("palm radius must be positive"));
        }
        Ok(())
    }
}

impl Default for HandGeometry {
    fn default() -> Self {
        let fan: [f64; 5] = [-0.5, -0.25, 0.0, 0.25, 0.5];
        // proportions keep the tip's planar radius strictly decreasing in
        // flexion over the joint range, so image-plane tips determine the
        // pose uniquely (no fold-over at deep flexion)
        let lengths = [
            [0.80, 0.40, 0.22],
            [1.00, 0.50, 0.27],
            [1.10, 0.55, 0.30],
            [1.00, 0.50, 0.27],
            [0.85, 0.42, 0.23],
        ];
        let fingers = std::array::from_fn(|i| FingerGeometry {
            base: [0.85 * fan[i].sin(), 0.85 * fan[i].cos(), 0.0],
            base_angle: fan[i],
            lengths: lengths[i],
            radius: 0.16,
        });
        HandGeometry {
            fingers,
            palm_center: [0.0, 0.0],
            palm_radius: 0.9,
        }
    }
}

/// Joint-range limits for the two free parameters per finger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseLimits {
    pub theta_max: f64,
    pub phi_max: f64,
}

impl Default for PoseLimits {
    fn default() -> Self {
        PoseLimits {
            theta_max: 1.6,
            phi_max: 0.25,
        }
    }
}

/// Free parameters of one finger.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FingerPose {
    /// Sideways rotation of the finger plane, radians.
    pub abduction: f64,
    /// Flexion parameter theta2, radians; theta1 and theta3 are derived.
    pub flexion: f64,
}

/// Ten free parameters: (abduction, flexion) per finger, thumb..little.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HandPose {
    pub fingers: [FingerPose; FINGER_COUNT],
}

impl HandPose {
    pub fn from_params(p: &[f64; 10]) -> Self {
        HandPose {
            fingers: std::array::from_fn(|i| FingerPose {
                abduction: p[2 * i],
                flexion: p[2 * i + 1],
            }),
        }
    }

    pub fn params(&self) -> [f64; 10] {
        let mut p = [0.0; 10];
        for (i, f) in self.fingers.iter().enumerate() {
            p[2 * i] = f.abduction;
            p[2 * i + 1] = f.flexion;
        }
        p
    }

    pub fn check_limits(&self, limits: &PoseLimits) -> Result<()> {
        for (i, f) in self.fingers.iter().enumerate() {
            if !f.flexion.is_finite() || !f.abduction.is_finite() {
                return Err(Error::invalid(format!("finger {}: non-finite pose", i)));
            }
            if f.flexion < 0.0 || f.flexion > limits.theta_max {
                return Err(Error::invalid(format!(
                    "finger {}: flexion {} outside [0, {}]",
                    i, f.flexion, limits.theta_max
                )));
            }
            if f.abduction.abs() > limits.phi_max {
                return Err(Error::invalid(format!(
                    "finger {}: abduction {} outside +-{}",
                    i, f.abduction, limits.phi_max
                )));
            }
        }
        Ok(())
    }

    pub fn clamped(&self, limits: &PoseLimits) -> HandPose {
        HandPose {
            fingers: std::array::from_fn(|i| FingerPose {
                abduction: self.fingers[i]
                    .abduction
                    .clamp(-limits.phi_max, limits.phi_max),
                flexion: self.fingers[i].flexion.clamp(0.0, limits.theta_max),
            }),
        }
    }
}

/// Tendon coupling: `(theta1, theta2, theta3) = (t, t, (2/3) t)`.
pub fn apply_coupling(theta2: f64) -> (f64, f64, f64) {
    (theta2, theta2, 2.0 / 3.0 * theta2)
}

/// Orthographic camera: pixel = scale * model + offset, depth untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub scale: f64,
    pub offset: [f64; 2],
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            scale: 9.0,
            offset: [32.0, 16.0],
        }
    }
}

impl Camera {
    pub fn project_point(&self, p: [f64; 3]) -> (f64, f64, f64) {
        (
            self.scale * p[0] + self.offset[0],
            self.scale * p[1] + self.offset[1],
            p[2],
        )
    }
}

/// One detected or projected fingertip in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Fingertip {
    pub x: f64,
    pub y: f64,
    /// Depth in model units (orthographic pass-through).
    pub z: f64,
    pub valid: bool,
}

/// Five fingertips, thumb..little.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingertipSet {
    pub tips: [Fingertip; FINGER_COUNT],
}

/// Joint chain of one finger: base, two knuckles, tip (model units).
pub fn finger_chain(finger: &FingerGeometry, pose: &FingerPose) -> [[f64; 3]; 4] {
    let (t1, t2, t3) = apply_coupling(pose.flexion);
    let dir_angle = finger.base_angle + pose.abduction;
    let (dx, dy) = (dir_angle.sin(), dir_angle.cos());
    let mut points = [[0.0; 3]; 4];
    points[0] = finger.base;
    let mut cumulative = 0.0;
    let bend = [t1, t2, t3];
    for s in 0..3 {
        cumulative += bend[s];
        let (c, sn) = (cumulative.cos(), cumulative.sin());
        let step = [
            finger.lengths[s] * c * dx,
            finger.lengths[s] * c * dy,
            -finger.lengths[s] * sn,
        ];
        points[s + 1] = [
            points[s][0] + step[0],
            points[s][1] + step[1],
            points[s][2] + step[2],
        ];
    }
    points
}

/// Fingertip positions in the palm frame for a full hand posture.
pub fn forward_kinematics(
    geom: &HandGeometry,
    pose: &HandPose,
    limits: &PoseLimits,
) -> Result<[[f64; 3]; FINGER_COUNT]> {
    geom.validate()?;
    pose.check_limits(limits)?;
    Ok(std::array::from_fn(|i| {
        finger_chain(&geom.fingers[i], &pose.fingers[i])[3]
    }))
}

/// Orthographic projection of five 3D points into image coordinates.
pub fn project(points: &[[f64; 3]; FINGER_COUNT], camera: &Camera) -> FingertipSet {
    FingertipSet {
        tips: std::array::from_fn(|i| {
            let (x, y, z) = camera.project_point(points[i]);
            Fingertip {
                x,
                y,
                z,
                valid: true,
            }
        }),
    }
}

fn dist_to_segment(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.0) * abx + (py - a.1) * aby) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * abx, a.1 + t * aby);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Render the hand silhouette: a palm disc plus capsule strokes for every
/// finger segment, foreground 1 over background 0. `blur_sigma > 0` adds
/// a Gaussian blur to emulate lighting variability.
pub fn render_hand(
    geom: &HandGeometry,
    pose: &HandPose,
    limits: &PoseLimits,
    camera: &Camera,
    width: usize,
    height: usize,
    blur_sigma: f64,
) -> Result<Image> {
    geom.validate()?;
    pose.check_limits(limits)?;
    let palm_px = (
        camera.scale * geom.palm_center[0] + camera.offset[0],
        camera.scale * geom.palm_center[1] + camera.offset[1],
    );
    let palm_r = geom.palm_radius * camera.scale;
    // projected segment endpoints and radii, per finger
    let mut segments: Vec<((f64, f64), (f64, f64), f64)> = Vec::new();
    for i in 0..FINGER_COUNT {
        let chain = finger_chain(&geom.fingers[i], &pose.fingers[i]);
        let radius = geom.fingers[i].radius * camera.scale;
        for s in 0..3 {
            let (ax, ay, _) = camera.project_point(chain[s]);
            let (bx, by, _) = camera.project_point(chain[s + 1]);
            segments.push(((ax, ay), (bx, by), radius));
        }
    }
    let mut img = Image::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64, y as f64);
            let dpalm =
                ((px - palm_px.0).powi(2) + (py - palm_px.1).powi(2)).sqrt();
            let mut fg = dpalm <= palm_r;
            if !fg {
                for &(a, b, r) in &segments {
                    if dist_to_segment(px, py, a, b) <= r {
                        fg = true;
                        break;
                    }
                }
            }
            if fg {
                img.set(x, y, 1.0);
            }
        }
    }
    if blur_sigma > 0.0 {
        img = gaussian_smooth(&img, blur_sigma)?;
    }
    Ok(img)
}

/// One labeled training record.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub image: Image,
    pub tips: FingertipSet,
    pub pose: HandPose,
}

/// Everything needed to render and label hands reproducibly.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub geometry: HandGeometry,
    pub limits: PoseLimits,
    pub camera: Camera,
    pub width: usize,
    pub height: usize,
    pub blur_sigma: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            geometry: HandGeometry::default(),
            limits: PoseLimits::default(),
            camera: Camera::default(),
            width: 64,
            height: 64,
            blur_sigma: 0.8,
        }
    }
}

impl DatasetSpec {
    /// Render one pose and compute its fingertip labels.
    pub fn render_record(&self, pose: &HandPose) -> Result<DatasetRecord> {
        let tips3d = forward_kinematics(&self.geometry, pose, &self.limits)?;
        let tips = project(&tips3d, &self.camera);
        let image = render_hand(
            &self.geometry,
            pose,
            &self.limits,
            &self.camera,
            self.width,
            self.height,
            self.blur_sigma,
        )?;
        Ok(DatasetRecord {
            image,
            tips,
            pose: *pose,
        })
    }
}

/// Uniform pose sampler within the configured limits.
pub fn sample_pose(rng: &mut ChaCha8Rng, limits: &PoseLimits) -> HandPose {
    HandPose {
        fingers: std::array::from_fn(|_| FingerPose {
            abduction: rng.random_range(-limits.phi_max..=limits.phi_max),
            flexion: rng.random_range(0.0..=limits.theta_max),
        }),
    }
}

/// Seeded labeled dataset; each record uses a seed derived from the
/// global seed and the record index so records are order-independent.
pub fn generate_dataset<F>(
    n: usize,
    spec: &DatasetSpec,
    seed: u64,
    sampler: F,
) -> Result<Vec<DatasetRecord>>
where
    F: Fn(&mut ChaCha8Rng, &PoseLimits) -> HandPose,
{
    if n == 0 {
        return Err(Error::invalid("dataset size must be >= 1"));
    }
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let record_seed = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
        let pose = sampler(&mut rng, &spec.limits);
        records.push(spec.render_record(&pose)?);
    }
    Ok(records)
}

fn format_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{:?}", v))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_floats(s: &str, location: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(location.to_string(), format!("bad float {:?}", tok)))
        })
        .collect()
}

/// Write a dataset: one PGM plus one sidecar label file per record and a
/// manifest listing the records and generator seed.
pub fn save_dataset(dir: &Path, records: &[DatasetRecord], seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("neurohand-dataset v1\n");
    manifest.push_str(&format!("seed {}\n", seed));
    manifest.push_str(&format!("count {}\n", records.len()));
    if let Some(first) = records.first() {
        manifest.push_str(&format!(
            "size {} {}\n",
            first.image.width(),
            first.image.height()
        ));
    }
    for (i, rec) in records.iter().enumerate() {
        let img_name = format!("img_{:04}.pgm", i);
        let label_name = format!("img_{:04}.txt", i);
        write_pgm(&dir.join(&img_name), &rec.image)?;
        let mut label = String::from("tips:");
        for t in &rec.tips.tips {
            label.push_str(&format!(" {:?} {:?} {:?}", t.x, t.y, t.z));
        }
        label.push_str("\npose: ");
        label.push_str(&format_floats(&rec.pose.params()));
        label.push('\n');
        let label_path = dir.join(&label_name);
        std::fs::write(&label_path, label).map_err(|e| Error::io(&label_path, e))?;
        manifest.push_str(&format!("record {} {}\n", img_name, label_name));
    }
    let manifest_path = dir.join("manifest.txt");
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))
}

/// Read a dataset written by `save_dataset`. Returns the records and the
/// generator seed recorded in the manifest.
pub fn load_dataset(dir: &Path) -> Result<(Vec<DatasetRecord>, u64)> {
    let manifest_path = dir.join("manifest.txt");
    let mut text = String::new();
    std::fs::File::open(&manifest_path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(&manifest_path, e))?;
    let mut lines = text.lines().enumerate();
    let loc = |line: usize| format!("{}:{}", manifest_path.display(), line + 1);
    match lines.next() {
        Some((_, "neurohand-dataset v1")) => {}
        _ => return Err(Error::parse(loc(0), "bad manifest header")),
    }
    let mut seed = 0u64;
    let mut files: Vec<(PathBuf, PathBuf)> = Vec::new();
    for (ln, line) in lines {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("seed") => {
                seed = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::parse(loc(ln), "bad seed line"))?;
            }
            Some("count") | Some("size") => {}
            Some("record") => {
                let img = parts
                    .next()
                    .ok_or_else(|| Error::parse(loc(ln), "record missing image"))?;
                let label = parts
                    .next()
                    .ok_or_else(|| Error::parse(loc(ln), "record missing label"))?;
                files.push((dir.join(img), dir.join(label)));
            }
            Some(other) => {
                return Err(Error::parse(loc(ln), format!("unknown key {:?}", other)))
            }
            None => {}
        }
    }
    let mut records = Vec::with_capacity(files.len());
    for (img_path, label_path) in files {
        let image = read_pgm(&img_path)?;
        let mut label_text = String::new();
        std::fs::File::open(&label_path)
            .and_then(|mut f| f.read_to_string(&mut label_text))
            .map_err(|e| Error::io(&label_path, e))?;
        let mut tips_vals: Option<Vec<f64>> = None;
        let mut pose_vals: Option<Vec<f64>> = None;
        for (ln, line) in label_text.lines().enumerate() {
            let loc = format!("{}:{}", label_path.display(), ln + 1);
            if let Some(rest) = line.strip_prefix("tips:") {
                tips_vals = Some(parse_floats(rest, &loc)?);
            } else if let Some(rest) = line.strip_prefix("pose:") {
                pose_vals = Some(parse_floats(rest, &loc)?);
            }
        }
        let loc = format!("{}", label_path.display());
        let tips_vals = tips_vals.ok_or_else(|| Error::parse(loc.clone(), "missing tips line"))?;
        let pose_vals = pose_vals.ok_or_else(|| Error::parse(loc.clone(), "missing pose line"))?;
        if tips_vals.len() != 15 || pose_vals.len() != 10 {
            return Err(Error::parse(loc, "label arity mismatch"));
        }
        let tips = FingertipSet {
            tips: std::array::from_fn(|i| Fingertip {
                x: tips_vals[3 * i],
                y: tips_vals[3 * i + 1],
                z: tips_vals[3 * i + 2],
                valid: true,
            }),
        };
        let mut p = [0.0; 10];
        p.copy_from_slice(&pose_vals);
        records.push(DatasetRecord {
            image,
            tips,
            pose: HandPose::from_params(&p),
        });
    }
    Ok((records, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_follows_tendon_rule() {
        let (t1, t2, t3) = apply_coupling(0.3);
        assert_eq!((t1, t2), (0.3, 0.3));
        assert!((t3 - 0.2).abs() < 1e-15);
        assert_eq!(apply_coupling(0.0), (0.0, 0.0, 0.0));
        let (t1, t2, t3) = apply_coupling(0.9);
        assert_eq!((t1, t2), (0.9, 0.9));
        assert!((t3 - 0.6).abs() < 1e-15);
    }

    #[test]
    fn coupling_exact_on_expanded_poses() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let limits = PoseLimits::default();
        for _ in 0..1000 {
            let pose = sample_pose(&mut rng, &limits);
            for f in &pose.fingers {
                let (t1, t2, t3) = apply_coupling(f.flexion);
                assert_eq!(t1, t2);
                assert_eq!(t3, 2.0 / 3.0 * f.flexion);
            }
        }
    }

    #[test]
    fn straight_chain_points_along_axis() {
        let geom = HandGeometry::default();
        let pose = HandPose::default();
        let tips = forward_kinematics(&geom, &pose, &PoseLimits::default()).unwrap();
        for i in 0..FINGER_COUNT {
            let f = &geom.fingers[i];
            let total: f64 = f.lengths.iter().sum();
            let expected = [
                f.base[0] + total * f.base_angle.sin(),
                f.base[1] + total * f.base_angle.cos(),
                0.0,
            ];
            for a in 0..3 {
                assert!((tips[i][a] - expected[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flexed_finger_matches_rotation_oracle() {
        // single finger, unit segments, theta2 = pi/2 => joints 90, 90, 60 deg
        let finger = FingerGeometry {
            base: [0.0, 0.0, 0.0],
            base_angle: 0.0,
            lengths: [1.0, 1.0, 1.0],
            radius: 0.1,
        };
        let pose = FingerPose {
            abduction: 0.0,
            flexion: std::f64::consts::FRAC_PI_2,
        };
        let chain = finger_chain(&finger, &pose);
        // 2D rotation-matrix oracle in the (forward, depth) plane
        let angles = [
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2 * 2.0 / 3.0,
        ];
        let mut cum = 0.0;
        let mut pos = (0.0f64, 0.0f64); // (forward, depth)
        for s in 0..3 {
            cum += angles[s];
            pos.0 += cum.cos();
            pos.1 -= cum.sin();
        }
        assert!((chain[3][1] - pos.0).abs() < 1e-12); // forward = +y
        assert!((chain[3][2] - pos.1).abs() < 1e-12);
        assert!(chain[3][0].abs() < 1e-12);
    }

    #[test]
    fn abduction_preserves_distance_from_base() {
        let geom = HandGeometry::default();
        let limits = PoseLimits::default();
        let base = geom.fingers[1].base;
        let dist = |pose: &HandPose| {
            let tips = forward_kinematics(&geom, pose, &limits).unwrap();
            ((tips[1][0] - base[0]).powi(2)
                + (tips[1][1] - base[1]).powi(2)
                + (tips[1][2] - base[2]).powi(2))
            .sqrt()
        };
        let mut pose = HandPose::default();
        let d0 = dist(&pose);
        for &phi in &[-0.25, -0.1, 0.1, 0.25] {
            pose.fingers[1].abduction = phi;
            assert!((dist(&pose) - d0).abs() < 1e-12);
        }
    }

    #[test]
    fn pose_outside_limits_rejected() {
        let geom = HandGeometry::default();
        let mut pose = HandPose::default();
        pose.fingers[0].flexion = 2.0;
        assert!(forward_kinematics(&geom, &pose, &PoseLimits::default()).is_err());
        pose.fingers[0].flexion = 0.0;
        pose.fingers[0].abduction = 0.5;
        assert!(forward_kinematics(&geom, &pose, &PoseLimits::default()).is_err());
    }

    #[test]
    fn jacobian_finite_difference_consistency() {
        let geom = HandGeometry::default();
        let limits = PoseLimits::default();
        let pose = HandPose::from_params(&[0.1, 0.8, -0.1, 0.5, 0.0, 1.0, 0.05, 0.3, -0.05, 1.2]);
        // central differences at two step sizes must agree
        for p in 0..10 {
            for h in [1e-4] {
                let tip = |delta: f64| {
                    let mut params = pose.params();
                    params[p] += delta;
                    let pose2 = HandPose::from_params(&params);
                    forward_kinematics(&geom, &pose2, &limits).unwrap()
                };
                let plus = tip(h);
                let minus = tip(-h);
                let plus2 = tip(h / 10.0);
                let minus2 = tip(-h / 10.0);
                for f in 0..FINGER_COUNT {
                    for a in 0..3 {
                        let d1 = (plus[f][a] - minus[f][a]) / (2.0 * h);
                        let d2 = (plus2[f][a] - minus2[f][a]) / (2.0 * h / 10.0);
                        let scale = d1.abs().max(d2.abs()).max(1e-6);
                        assert!(
                            (d1 - d2).abs() / scale < 1e-4,
                            "param {} finger {} axis {}: {} vs {}",
                            p,
                            f,
                            a,
                            d1,
                            d2
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn projection_identity_linearity_depth() {
        let cam = Camera {
            scale: 1.0,
            offset: [0.0, 0.0],
        };
        let pts = [[1.0, 2.0, 3.0]; 5];
        let tips = project(&pts, &cam);
        assert_eq!((tips.tips[0].x, tips.tips[0].y, tips.tips[0].z), (1.0, 2.0, 3.0));

        let cam_s = Camera {
            scale: 2.5,
            offset: [1.0, -1.0],
        };
        let mut moved = pts;
        moved[0][0] += 1.0;
        let a = project(&pts, &cam_s);
        let b = project(&moved, &cam_s);
        assert!((b.tips[0].x - a.tips[0].x - 2.5).abs() < 1e-12);
        assert_eq!(b.tips[0].y, a.tips[0].y);

        let mut deeper = pts;
        deeper[0][2] += 4.0;
        let c = project(&deeper, &cam_s);
        assert_eq!((c.tips[0].x, c.tips[0].y), (a.tips[0].x, a.tips[0].y));
        assert_eq!(c.tips[0].z, pts[0][2] + 4.0);
    }

    #[test]
    fn rendering_is_deterministic() {
        let spec = DatasetSpec::default();
        let pose = HandPose::from_params(&[0.1, 0.5, 0.0, 0.2, -0.1, 1.0, 0.2, 0.8, 0.0, 0.0]);
        let a = spec.render_record(&pose).unwrap();
        let b = spec.render_record(&pose).unwrap();
        assert_eq!(a.image, b.image);
    }

    #[test]
    fn rendered_tips_lie_on_foreground_near_projection() {
        // geometry check on the raw silhouette, so no smoothing
        let mut spec = DatasetSpec::default();
        spec.blur_sigma = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let pose = sample_pose(&mut rng, &spec.limits);
            let rec = spec.render_record(&pose).unwrap();
            let tip_r = spec.geometry.fingers[0].radius * spec.camera.scale;
            for t in &rec.tips.tips {
                let (xi, yi) = (t.x.round() as usize, t.y.round() as usize);
                assert_eq!(rec.image.get(xi, yi), 1.0, "tip pixel not foreground");
                // centroid of foreground inside the tip capsule end
                let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
                for y in 0..rec.image.height() {
                    for x in 0..rec.image.width() {
                        let d = ((x as f64 - t.x).powi(2) + (y as f64 - t.y).powi(2)).sqrt();
                        if d <= tip_r && rec.image.get(x, y) > 0.5 {
                            sx += x as f64;
                            sy += y as f64;
                            n += 1.0;
                        }
                    }
                }
                let (cx, cy) = (sx / n, sy / n);
                let err = ((cx - t.x).powi(2) + (cy - t.y).powi(2)).sqrt();
                assert!(err <= 1.5, "tip centroid {} px from projection", err);
            }
        }
    }

    #[test]
    fn zero_lengths_render_palm_disc_only() {
        let mut spec = DatasetSpec::default();
        for f in &mut spec.geometry.fingers {
            f.lengths = [0.0; 3];
            f.base = [0.0, 0.0, 0.0];
            f.radius = 0.05;
        }
        // finger stubs hidden inside the palm disc
        let rec = spec.render_record(&HandPose::default()).unwrap();
        let count = rec.image.data().iter().filter(|&&v| v > 0.5).count() as f64;
        let r = spec.geometry.palm_radius * spec.camera.scale;
        // disc rasterization oracle: area within a one-pixel boundary ring
        let lo = std::f64::consts::PI * (r - 1.0).powi(2);
        let hi = std::f64::consts::PI * (r + 1.0).powi(2);
        assert!(count >= lo && count <= hi, "count {} not in [{}, {}]", count, lo, hi);
    }

    #[test]
    fn rendering_translation_covariant_with_camera_offset() {
        let mut spec = DatasetSpec::default();
        let pose = HandPose::from_params(&[0.0, 0.4, 0.1, 0.9, 0.0, 1.3, -0.1, 0.2, 0.0, 0.7]);
        let a = spec.render_record(&pose).unwrap().image;
        spec.camera.offset = [35.0, 18.0]; // +3, +2 pixels
        let b = spec.render_record(&pose).unwrap().image;
        for y in 0..62 {
            for x in 0..61 {
                assert_eq!(a.get(x, y), b.get(x + 3, y + 2));
            }
        }
    }

    #[test]
    fn dataset_is_reproducible_and_in_bounds() {
        let spec = DatasetSpec::default();
        let a = generate_dataset(40, &spec, 7, sample_pose).unwrap();
        let b = generate_dataset(40, &spec, 7, sample_pose).unwrap();
        assert_eq!(a, b);
        for rec in &a {
            for t in &rec.tips.tips {
                assert!(t.x >= 0.0 && t.x < 64.0 && t.y >= 0.0 && t.y < 64.0,
                    "label ({}, {}) outside image", t.x, t.y);
            }
        }
    }

    #[test]
    fn degenerate_sampler_repeats_one_record() {
        let spec = DatasetSpec::default();
        let fixed = HandPose::from_params(&[0.0, 0.3, 0.0, 0.3, 0.0, 0.3, 0.0, 0.3, 0.0, 0.3]);
        let records = generate_dataset(5, &spec, 1, |_, _| fixed).unwrap();
        for rec in &records {
            assert_eq!(rec, &records[0]);
        }
    }

    #[test]
    fn empty_dataset_rejected() {
        let spec = DatasetSpec::default();
        assert!(generate_dataset(0, &spec, 1, sample_pose).is_err());
    }

    #[test]
    fn dataset_disk_round_trip() {
        let spec = DatasetSpec::default();
        let records = generate_dataset(4, &spec, 11, sample_pose).unwrap();
        let dir = std::env::temp_dir().join("neurohand_hand_test_ds");
        let _ = std::fs::remove_dir_all(&dir);
        save_dataset(&dir, &records, 11).unwrap();
        let (back, seed) = load_dataset(&dir).unwrap();
        assert_eq!(seed, 11);
        assert_eq!(back.len(), 4);
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.pose, b.pose);
            for (ta, tb) in a.tips.tips.iter().zip(&b.tips.tips) {
                assert_eq!((ta.x, ta.y, ta.z), (tb.x, tb.y, tb.z));
            }
            for i in 0..a.image.data().len() {
                assert!((a.image.data()[i] - b.image.data()[i]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }
}
