//! Image container, convolution, smoothing, edge maps, and PNM file I/O.
//!
//! All pixel data lives in `[0,1]`-normalized `f64` scalars; quantization
//! to bytes happens only at file I/O. Convolution uses correlation
//! semantics throughout (no kernel flip).

use std::fmt::Write as _;
use std::io::Read as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 2D scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Border handling for convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BorderMode {
    /// Repeat the edge pixel (default everywhere in this crate).
    Clamp,
    /// Treat pixels outside the image as zero.
    Zero,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "image data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Image {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with signed coordinates under a border rule.
    #[inline]
    pub fn sample(&self, x: i64, y: i64, border: BorderMode) -> f64 {
        match border {
            BorderMode::Clamp => {
                let xc = x.clamp(0, self.width as i64 - 1) as usize;
                let yc = y.clamp(0, self.height as i64 - 1) as usize;
                self.get(xc, yc)
            }
            BorderMode::Zero => {
                if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
                    0.0
                } else {
                    self.get(x as usize, y as usize)
                }
            }
        }
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Pixel with the maximal value; ties resolved in scanline order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.get(x, y);
                if v > best_v {
                    best_v = v;
                    best = (x, y);
                }
            }
        }
        best
    }

    /// Copy a sub-rectangle; the rectangle must lie inside the image.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
        if x0 + w > self.width || y0 + h > self.height || w == 0 || h == 0 {
            return Err(Error::invalid(format!(
                "crop {}x{}+{}+{} outside {}x{} image",
                w, h, x0, y0, self.width, self.height
            )));
        }
        let mut out = Image::new(w, h);
        for y in 0..h {
            for x in 0..w {
                out.set(x, y, self.get(x0 + x, y0 + y));
            }
        }
        Ok(out)
    }

    /// Pointwise product with another image of identical dimensions.
    pub fn pointwise_mul(&self, other: &Image) -> Result<Image> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::invalid("pointwise_mul: dimension mismatch"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Image {
            width: self.width,
            height: self.height,
            data,
        })
    }
}

/// Square odd-sized filter kernel, correlation orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 || size == 0 {
            return Err(Error::invalid(format!("kernel size {} must be odd", size)));
        }
        if taps.len() != size * size {
            return Err(Error::invalid(format!(
                "kernel taps length {} does not match {0}x{0}",
                size
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("kernel taps must be finite"));
        }
        Ok(Kernel { size, taps })
    }

    pub fn identity(size: usize) -> Result<Self> {
        let mut taps = vec![0.0; size * size];
        taps[(size / 2) * size + size / 2] = 1.0;
        Kernel::new(size, taps)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn tap(&self, x: usize, y: usize) -> f64 {
        self.taps[y * self.size + x]
    }

    /// Subtract the tap mean so responses to constant input vanish.
    pub fn dc_corrected(&self) -> Kernel {
        let mean = self.taps.iter().sum::<f64>() / self.taps.len() as f64;
        Kernel {
            size: self.size,
            taps: self.taps.iter().map(|t| t - mean).collect(),
        }
    }

    /// Scale taps so their squares sum to one. A zero kernel stays zero.
    pub fn l2_normalized(&self) -> Kernel {
        let norm = self.taps.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            return self.clone();
        }
        Kernel {
            size: self.size,
            taps: self.taps.iter().map(|t| t / norm).collect(),
        }
    }
}

/// Correlate `img` with kernel `k` under the given border rule.
/// Output has the same dimensions as the input.
pub fn convolve(img: &Image, k: &Kernel, border: BorderMode) -> Image {
    let r = (k.size / 2) as i64;
    let mut out = Image::new(img.width, img.height);
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let mut acc = 0.0;
            for ky in -r..=r {
                for kx in -r..=r {
                    let tap = k.tap((kx + r) as usize, (ky + r) as usize);
                    acc += tap * img.sample(x + kx, y + ky, border);
                }
            }
            out.set(x as usize, y as usize, acc);
        }
    }
    out
}

/// Correlate the kernel with the patch centered at `(cx, cy)`.
pub fn correlate_at(img: &Image, k: &Kernel, cx: i64, cy: i64, border: BorderMode) -> f64 {
    let r = (k.size / 2) as i64;
    let mut acc = 0.0;
    for ky in -r..=r {
        for kx in -r..=r {
            let tap = k.tap((kx + r) as usize, (ky + r) as usize);
            acc += tap * img.sample(cx + kx, cy + ky, border);
        }
    }
    acc
}

/// 1D Gaussian taps truncated at ±3σ and renormalized to sum one.
fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable Gaussian blur; `sigma = 0` returns a copy.
pub fn gaussian_smooth(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("sigma {} must be >= 0", sigma)));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as i64;
    // horizontal pass
    let mut tmp = Image::new(img.width, img.height);
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * img.sample(x + i as i64 - r, y, BorderMode::Clamp);
            }
            tmp.set(x as usize, y as usize, acc);
        }
    }
    // vertical pass
    let mut out = Image::new(img.width, img.height);
    for y in 0..img.height as i64 {
        for x in 0..img.width as i64 {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * tmp.sample(x, y + i as i64 - r, BorderMode::Clamp);
            }
            out.set(x as usize, y as usize, acc);
        }
    }
    Ok(out)
}

/// Sobel gradient magnitude, normalized so the maximum is 1.
/// A flat input yields an all-zero map.
pub fn edge_map(img: &Image) -> Image {
    let gx = Kernel::new(
        3,
        vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0],
    )
    .expect("static kernel");
    let gy = Kernel::new(
        3,
        vec![-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0],
    )
    .expect("static kernel");
    let dx = convolve(img, &gx, BorderMode::Clamp);
    let dy = convolve(img, &gy, BorderMode::Clamp);
    let mut out = Image::new(img.width, img.height);
    for i in 0..out.data.len() {
        out.data[i] = (dx.data[i] * dx.data[i] + dy.data[i] * dy.data[i]).sqrt();
    }
    let max = out.max_value();
    if max > 0.0 {
        for v in &mut out.data {
            *v /= max;
        }
    }
    out
}

/// Affine rescale of `[min,max]` to `[0,1]`. A constant image maps to
/// all-zero so a featureless stream carries no confidence.
pub fn normalize(img: &Image) -> Result<Image> {
    if img.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("normalize: non-finite pixel value"));
    }
    let min = img.min_value();
    let max = img.max_value();
    let mut out = img.clone();
    if max > min {
        let span = max - min;
        for v in &mut out.data {
            *v = (*v - min) / span;
        }
    } else {
        for v in &mut out.data {
            *v = 0.0;
        }
    }
    Ok(out)
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Write a binary P5 PGM, maxval 255.
pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    bytes.extend(img.data.iter().map(|&v| quantize(v)));
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write a binary P6 PPM from three equally sized channel images.
pub fn write_ppm(path: &Path, r: &Image, g: &Image, b: &Image) -> Result<()> {
    if r.width != g.width || r.width != b.width || r.height != g.height || r.height != b.height {
        return Err(Error::invalid("write_ppm: channel dimension mismatch"));
    }
    let mut bytes = format!("P6\n{} {}\n255\n", r.width, r.height).into_bytes();
    for i in 0..r.data.len() {
        bytes.push(quantize(r.data[i]));
        bytes.push(quantize(g.data[i]));
        bytes.push(quantize(b.data[i]));
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Pull one whitespace-delimited ASCII token starting at `*pos`.
fn next_token(bytes: &[u8], pos: &mut usize, path: &Path) -> Result<String> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::parse(
            format!("{}: byte {}", path.display(), start),
            "unexpected end of header",
        ));
    }
    String::from_utf8(bytes[start..*pos].to_vec()).map_err(|_| {
        Error::parse(
            format!("{}: byte {}", path.display(), start),
            "non-ASCII header token",
        )
    })
}

/// Read a binary P5 PGM with maxval 255.
pub fn read_pgm(path: &Path) -> Result<Image> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let magic = next_token(&bytes, &mut pos, path)?;
    if magic != "P5" {
        return Err(Error::parse(
            format!("{}: byte 0", path.display()),
            format!("expected magic P5, found {:?}", magic),
        ));
    }
    let mut dims = [0usize; 3];
    for slot in dims.iter_mut() {
        let at = pos;
        let tok = next_token(&bytes, &mut pos, path)?;
        *slot = tok.parse().map_err(|_| {
            Error::parse(
                format!("{}: byte {}", path.display(), at),
                format!("invalid header number {:?}", tok),
            )
        })?;
    }
    let (width, height, maxval) = (dims[0], dims[1], dims[2]);
    if maxval != 255 {
        return Err(Error::parse(
            format!("{}: byte {}", path.display(), pos),
            format!("unsupported maxval {}", maxval),
        ));
    }
    // exactly one whitespace byte separates header from payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::parse(
            format!("{}: byte {}", path.display(), pos),
            "missing whitespace after maxval",
        ));
    }
    pos += 1;
    let expected = width * height;
    if bytes.len() - pos < expected {
        return Err(Error::parse(
            format!("{}: byte {}", path.display(), bytes.len()),
            format!(
                "truncated payload: expected {} bytes, found {}",
                expected,
                bytes.len() - pos
            ),
        ));
    }
    let data = bytes[pos..pos + expected]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Image::from_vec(width, height, data)
}

/// Render an image as a compact ASCII table, mainly for error messages.
pub fn dump_ascii(img: &Image) -> String {
    let mut s = String::new();
    for y in 0..img.height {
        for x in 0..img.width {
            let _ = write!(s, "{:6.3} ", img.get(x, y));
        }
        s.push('\n');
    }
    s
}
