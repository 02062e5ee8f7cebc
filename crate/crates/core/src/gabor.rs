//! Gabor filter banks and jet extraction on a coarse grid of positions.
//!
//! A jet is the vector of responses of all bank kernels centered at one
//! grid position; concatenating the jets of every grid position yields the
//! holistic feature vector consumed by the LLM networks.

use std::io::Read as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{correlate_at, BorderMode, Image, Kernel};

const JET_MAGIC: &[u8; 4] = b"NHJ1";

/// Quadrature phase of a Gabor kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Cosine carrier (symmetric).
    Even,
    /// Sine carrier (antisymmetric).
    Odd,
}

/// Gaussian envelope times an oriented sinusoid, DC-corrected so constant
/// input yields zero response, then L2-normalized.
pub fn make_gabor_kernel(
    orientation: f64,
    wavelength: f64,
    phase: Phase,
    sigma_ratio: f64,
    size: usize,
) -> Result<Kernel> {
    if !(wavelength > 0.0) {
        return Err(Error::invalid(format!(
            "gabor wavelength {} must be positive",
            wavelength
        )));
    }
    let min_size = min_kernel_size(wavelength, sigma_ratio);
    if size % 2 == 0 || size < min_size {
        return Err(Error::invalid(format!(
            "gabor kernel size {} must be odd and >= {}",
            size, min_size
        )));
    }
    let sigma = sigma_ratio * wavelength;
    let r = (size / 2) as i64;
    let (c, s) = (orientation.cos(), orientation.sin());
    let mut taps = Vec::with_capacity(size * size);
    for y in -r..=r {
        for x in -r..=r {
            let (xf, yf) = (x as f64, y as f64);
            let along = xf * c + yf * s;
            let envelope = (-(xf * xf + yf * yf) / (2.0 * sigma * sigma)).exp();
            let carrier = match phase {
                Phase::Even => (2.0 * std::f64::consts::PI * along / wavelength).cos(),
                Phase::Odd => (2.0 * std::f64::consts::PI * along / wavelength).sin(),
            };
            taps.push(envelope * carrier);
        }
    }
    Ok(Kernel::new(size, taps)?.dc_corrected().l2_normalized())
}

/// Smallest odd kernel side covering ±2σ of the envelope.
pub fn min_kernel_size(wavelength: f64, sigma_ratio: f64) -> usize {
    let mut n = (4.0 * sigma_ratio * wavelength).ceil() as usize;
    if n % 2 == 0 {
        n += 1;
    }
    n.max(3)
}

/// Immutable bank of Gabor kernels over orientations × scales × phases.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborBank {
    orientations: usize,
    wavelengths: Vec<f64>,
    sigma_ratio: f64,
    /// kernels[scale][orientation][phase]
    kernels: Vec<Vec<[Kernel; 2]>>,
}

impl GaborBank {
    pub fn new(orientations: usize, wavelengths: &[f64], sigma_ratio: f64) -> Result<Self> {
        if orientations == 0 || wavelengths.is_empty() {
            return Err(Error::invalid("gabor bank needs >= 1 orientation and scale"));
        }
        let mut kernels = Vec::with_capacity(wavelengths.len());
        for &lambda in wavelengths {
            let size = min_kernel_size(lambda, sigma_ratio);
            let mut per_orient = Vec::with_capacity(orientations);
            for o in 0..orientations {
                let theta = o as f64 * std::f64::consts::PI / orientations as f64;
                per_orient.push([
                    make_gabor_kernel(theta, lambda, Phase::Even, sigma_ratio, size)?,
                    make_gabor_kernel(theta, lambda, Phase::Odd, sigma_ratio, size)?,
                ]);
            }
            kernels.push(per_orient);
        }
        Ok(GaborBank {
            orientations,
            wavelengths: wavelengths.to_vec(),
            sigma_ratio,
            kernels,
        })
    }

    /// Default bank: 4 orientations x 2 scales x 2 phases.
    pub fn default_global() -> Self {
        GaborBank::new(4, &[4.0, 8.0], 0.5).expect("static bank")
    }

    /// Same bank at half the wavelengths, for focus-region processing.
    pub fn halved(&self) -> Result<Self> {
        let wl: Vec<f64> = self.wavelengths.iter().map(|w| w / 2.0).collect();
        GaborBank::new(self.orientations, &wl, self.sigma_ratio)
    }

    pub fn orientations(&self) -> usize {
        self.orientations
    }

    pub fn scales(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn sigma_ratio(&self) -> f64 {
        self.sigma_ratio
    }

    pub fn phases(&self) -> usize {
        2
    }

    pub fn kernel(&self, scale: usize, orientation: usize, phase: usize) -> &Kernel {
        &self.kernels[scale][orientation][phase]
    }

    /// Responses per grid position.
    pub fn channels(&self) -> usize {
        self.scales() * self.orientations * self.phases()
    }
}

/// Regular lattice of jet positions inside an image.
#[derive(Debug, Clone, PartialEq)]
pub struct JetGrid {
    positions: Vec<(usize, usize)>,
    margin: usize,
    image_width: usize,
    image_height: usize,
}

impl JetGrid {
    /// `nx` x `ny` cell-centered lattice on a `width` x `height` image.
    pub fn regular(width: usize, height: usize, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nx > width || ny > height {
            return Err(Error::invalid(format!(
                "jet grid {}x{} does not fit a {}x{} image",
                nx, ny, width, height
            )));
        }
        let mut positions = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = ((i as f64 + 0.5) * width as f64 / nx as f64).floor() as usize;
                let y = ((j as f64 + 0.5) * height as f64 / ny as f64).floor() as usize;
                positions.push((x.min(width - 1), y.min(height - 1)));
            }
        }
        let margin = (width / nx).min(height / ny) / 2;
        Ok(JetGrid {
            positions,
            margin,
            image_width: width,
            image_height: height,
        })
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.image_width, self.image_height)
    }
}

/// Concatenated jet responses; layout is position-major, then scale, then
/// orientation, then phase (phase fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    positions: usize,
    channels: usize,
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The jet (all channels) of one grid position.
    pub fn jet(&self, position: usize) -> &[f64] {
        let base = position * self.channels;
        &self.values[base..base + self.channels]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(16 + 4 * self.values.len());
        bytes.extend_from_slice(JET_MAGIC);
        bytes.extend_from_slice(&(self.positions as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.channels as u32).to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        for &v in &self.values {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 16 || &bytes[0..4] != JET_MAGIC {
            return Err(Error::parse(
                format!("{}: byte 0", path.display()),
                "bad feature vector magic",
            ));
        }
        let positions = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let channels = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let n = positions * channels;
        if bytes.len() != 16 + 4 * n {
            return Err(Error::parse(
                format!("{}: byte {}", path.display(), bytes.len()),
                format!("expected {} payload floats", n),
            ));
        }
        let values = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(FeatureVector {
            values,
            positions,
            channels,
        })
    }
}

/// Correlate every bank kernel at every grid position (clamp border).
pub fn extract_jets(img: &Image, bank: &GaborBank, grid: &JetGrid) -> Result<FeatureVector> {
    let (gw, gh) = grid.image_size();
    if img.width() != gw || img.height() != gh {
        return Err(Error::invalid(format!(
            "jet grid built for {}x{} but image is {}x{}",
            gw,
            gh,
            img.width(),
            img.height()
        )));
    }
    let mut values = Vec::with_capacity(grid.len() * bank.channels());
    for &(px, py) in grid.positions() {
        for s in 0..bank.scales() {
            for o in 0..bank.orientations() {
                for p in 0..2 {
                    values.push(correlate_at(
                        img,
                        bank.kernel(s, o, p),
                        px as i64,
                        py as i64,
                        BorderMode::Clamp,
                    ));
                }
            }
        }
    }
    Ok(FeatureVector {
        values,
        positions: grid.len(),
        channels: bank.channels(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grating(n: usize, wavelength: f64, theta: f64, phase: f64) -> Image {
        let mut img = Image::new(n, n);
        let (c, s) = (theta.cos(), theta.sin());
        for y in 0..n {
            for x in 0..n {
                let along = x as f64 * c + y as f64 * s;
                let v = 0.5
                    + 0.5 * (2.0 * std::f64::consts::PI * along / wavelength + phase).sin();
                img.set(x, y, v);
            }
        }
        img
    }

    #[test]
    fn odd_phase_sums_to_zero() {
        let k = make_gabor_kernel(0.7, 5.0, Phase::Odd, 0.5, 11).unwrap();
        let sum: f64 = k.taps().iter().sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn even_phase_pi_periodic() {
        let a = make_gabor_kernel(0.3, 6.0, Phase::Even, 0.5, 13).unwrap();
        let b = make_gabor_kernel(0.3 + std::f64::consts::PI, 6.0, Phase::Even, 0.5, 13).unwrap();
        for (ta, tb) in a.taps().iter().zip(b.taps()) {
            assert!((ta - tb).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_image_response_is_zero() {
        let img = Image::constant(32, 32, 0.6);
        let k = make_gabor_kernel(1.1, 4.0, Phase::Even, 0.5, 9).unwrap();
        let r = correlate_at(&img, &k, 16, 16, BorderMode::Clamp);
        assert!(r.abs() < 1e-9);
    }

    #[test]
    fn non_positive_wavelength_rejected() {
        assert!(make_gabor_kernel(0.0, 0.0, Phase::Even, 0.5, 9).is_err());
        assert!(make_gabor_kernel(0.0, -2.0, Phase::Even, 0.5, 9).is_err());
    }

    #[test]
    fn constant_image_gives_zero_vector() {
        let bank = GaborBank::default_global();
        let grid = JetGrid::regular(64, 64, 8, 8).unwrap();
        let img = Image::constant(64, 64, 0.3);
        let fv = extract_jets(&img, &bank, &grid).unwrap();
        assert!(fv.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn vector_length_dimensional() {
        let bank = GaborBank::default_global(); // O=4, S=2, P=2
        let grid = JetGrid::regular(64, 64, 4, 4).unwrap(); // G=16
        let img = Image::new(64, 64);
        let fv = extract_jets(&img, &bank, &grid).unwrap();
        assert_eq!(fv.len(), 256);
        assert_eq!(fv.positions(), 16);
        assert_eq!(fv.channels(), 16);
    }

    #[test]
    fn grating_energy_peaks_at_matching_channel() {
        let bank = GaborBank::default_global();
        let grid = JetGrid::regular(64, 64, 1, 1).unwrap();
        // target channel: wavelength 8 (scale index 1), orientation index 2 (pi/2)
        let theta0 = 2.0 * std::f64::consts::PI / 4.0;
        let img = grating(64, 8.0, theta0, 0.4);
        let fv = extract_jets(&img, &bank, &grid).unwrap();
        // evaluate the energy of every channel and take the argmax
        let mut best = (0usize, 0usize);
        let mut best_e = f64::NEG_INFINITY;
        let jet = fv.jet(0);
        for s in 0..bank.scales() {
            for o in 0..bank.orientations() {
                let base = (s * bank.orientations() + o) * 2;
                let e = jet[base] * jet[base] + jet[base + 1] * jet[base + 1];
                if e > best_e {
                    best_e = e;
                    best = (s, o);
                }
            }
        }
        assert_eq!(best, (1, 2));
    }

    #[test]
    fn grating_energy_phase_invariant() {
        let bank = GaborBank::default_global();
        let grid = JetGrid::regular(64, 64, 1, 1).unwrap();
        let theta0 = std::f64::consts::PI / 4.0;
        let energy = |phase: f64| {
            let img = grating(64, 8.0, theta0, phase);
            let fv = extract_jets(&img, &bank, &grid).unwrap();
            let jet = fv.jet(0);
            let base = (1 * bank.orientations() + 1) * 2;
            jet[base] * jet[base] + jet[base + 1] * jet[base + 1]
        };
        let e0 = energy(0.0);
        for k in 1..8 {
            let e = energy(k as f64 * 0.7);
            assert!((e - e0).abs() / e0 < 0.02, "phase {} energy drift", k);
        }
    }

    #[test]
    fn translation_covariance_permutes_position_blocks() {
        let bank = GaborBank::default_global();
        let grid = JetGrid::regular(64, 64, 8, 8).unwrap();
        let spacing = 8usize;
        // interior-supported blob pattern
        let mut img = Image::new(64, 64);
        for y in 20..36 {
            for x in 20..36 {
                let v = ((x as f64 * 0.9).sin() * (y as f64 * 0.7).cos()).abs();
                img.set(x, y, v);
            }
        }
        let mut shifted = Image::new(64, 64);
        for y in 0..64 {
            for x in spacing..64 {
                shifted.set(x, y, img.get(x - spacing, y));
            }
        }
        let a = extract_jets(&img, &bank, &grid).unwrap();
        let b = extract_jets(&shifted, &bank, &grid).unwrap();
        // interior positions: block (i, j) of the original appears at (i+1, j)
        for j in 2..6 {
            for i in 2..5 {
                let src = j * 8 + i;
                let dst = j * 8 + i + 1;
                for c in 0..bank.channels() {
                    assert!(
                        (a.jet(src)[c] - b.jet(dst)[c]).abs() < 1e-6,
                        "block ({}, {}) channel {}",
                        i,
                        j,
                        c
                    );
                }
            }
        }
    }

    #[test]
    fn extract_jets_linear_in_image() {
        let bank = GaborBank::default_global();
        let grid = JetGrid::regular(32, 32, 4, 4).unwrap();
        let a = grating(32, 6.0, 0.5, 0.0);
        let b = grating(32, 10.0, 1.2, 0.3);
        let mixed_data: Vec<f64> = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| 0.3 * x + 0.6 * y)
            .collect();
        let mixed = Image::from_vec(32, 32, mixed_data).unwrap();
        let fa = extract_jets(&a, &bank, &grid).unwrap();
        let fb = extract_jets(&b, &bank, &grid).unwrap();
        let fm = extract_jets(&mixed, &bank, &grid).unwrap();
        for i in 0..fm.len() {
            let rhs = 0.3 * fa.values()[i] + 0.6 * fb.values()[i];
            assert!((fm.values()[i] - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn feature_vector_round_trip() {
        let bank = GaborBank::default_global();
        let grid = JetGrid::regular(32, 32, 4, 4).unwrap();
        let fv = extract_jets(&grating(32, 6.0, 0.5, 0.0), &bank, &grid).unwrap();
        let dir = std::env::temp_dir().join("neurohand_gabor_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("jets.bin");
        fv.save(&path).unwrap();
        let back = FeatureVector::load(&path).unwrap();
        assert_eq!(back.positions(), fv.positions());
        assert_eq!(back.channels(), fv.channels());
        for i in 0..fv.len() {
            assert!((fv.values()[i] - back.values()[i]).abs() < 1e-6);
        }
    }
}
