//! 2D slices of input space colored by linear region or predicted class,
//! histograms, and matrix heat maps, as binary PPM or SVG.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{argmax, NetworkModel};

/// Affine 2D plane `origin + s u + t v` sampled on a pixel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicePlane {
    pub origin: Array1<f64>,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    /// `(u_min, u_max, v_min, v_max)`.
    pub extent: (f64, f64, f64, f64),
    /// `(width, height)` in pixels.
    pub resolution: (usize, usize),
}

fn normalize(v: Array1<f64>) -> Result<Array1<f64>> {
    let n = v.dot(&v).sqrt();
    if n <= 1e-12 {
        return Err(Error::Numeric("degenerate slice direction".into()));
    }
    Ok(v / n)
}

fn orthogonalize(v: &Array1<f64>, u: &Array1<f64>) -> Array1<f64> {
    let mut w = v - &(u * u.dot(v));
    w = &w - &(u * u.dot(&w));
    w
}

impl SlicePlane {
    /// The input axes of a 2D model over `[lo, hi]^2`.
    pub fn toy2d(bounds: (f64, f64), resolution: (usize, usize)) -> Self {
        SlicePlane {
            origin: Array1::zeros(2),
            u: ndarray::array![1.0, 0.0],
            v: ndarray::array![0.0, 1.0],
            extent: (bounds.0, bounds.1, bounds.0, bounds.1),
            resolution,
        }
    }

    /// Plane through three points: origin at `a`, `u` toward `b`, `v` from the
    /// Gram-Schmidt residual of `c - a`. The extent covers all three points
    /// with `margin` times the larger span added on each side.
    pub fn through_points(
        a: ArrayView1<f64>,
        b: ArrayView1<f64>,
        c: ArrayView1<f64>,
        margin: f64,
        resolution: (usize, usize),
    ) -> Result<Self> {
        let u = normalize(&b - &a)?;
        let v = normalize(orthogonalize(&(&c - &a), &u))?;
        let pts = [(0.0, 0.0), (u.dot(&(&b - &a)), 0.0), (u.dot(&(&c - &a)), v.dot(&(&c - &a)))];
        let (mut u0, mut u1, mut v0, mut v1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for (s, t) in pts {
            u0 = u0.min(s);
            u1 = u1.max(s);
            v0 = v0.min(t);
            v1 = v1.max(t);
        }
        let pad = margin * (u1 - u0).max(v1 - v0);
        Ok(SlicePlane {
            origin: a.to_owned(),
            u,
            v,
            extent: (u0 - pad, u1 + pad, v0 - pad, v1 + pad),
            resolution,
        })
    }

    /// Seeded random orthonormal pair through `origin`, covering `[-half, half]^2`.
    pub fn random(origin: ArrayView1<f64>, half: f64, seed: u64, resolution: (usize, usize)) -> Result<Self> {
        let d = origin.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut rng));
        let u = normalize(draw())?;
        let v = normalize(orthogonalize(&draw(), &u))?;
        Ok(SlicePlane {
            origin: origin.to_owned(),
            u,
            v,
            extent: (-half, half, -half, half),
            resolution,
        })
    }

    /// Plane coordinates of pixel `(col, row)`'s center; row 0 is the top edge.
    pub fn pixel_coords(&self, col: usize, row: usize) -> (f64, f64) {
        let (u0, u1, v0, v1) = self.extent;
        let (w, h) = self.resolution;
        let s = u0 + (col as f64 + 0.5) * (u1 - u0) / w as f64;
        let t = v1 - (row as f64 + 0.5) * (v1 - v0) / h as f64;
        (s, t)
    }

    pub fn point(&self, s: f64, t: f64) -> Array1<f64> {
        &self.origin + &(&self.u * s) + &(&self.v * t)
    }
}

/// Per-pixel region and class data of a slice, row-major from the top-left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRaster {
    pub width: usize,
    pub height: usize,
    pub pattern_hash: Vec<u64>,
    /// Fraction of active hidden nodes.
    pub activation_rate: Vec<f64>,
    pub predicted_class: Vec<usize>,
    /// Some 4-neighbor lies in a different region.
    pub boundary_mask: Vec<bool>,
    pub in_bounds: Vec<bool>,
}

impl SliceRaster {
    /// Builds a raster from per-pixel data and derives the boundary mask.
    pub fn from_parts(
        width: usize,
        height: usize,
        pattern_hash: Vec<u64>,
        activation_rate: Vec<f64>,
        predicted_class: Vec<usize>,
        in_bounds: Vec<bool>,
    ) -> Self {
        let n = width * height;
        assert!(pattern_hash.len() == n && activation_rate.len() == n);
        assert!(predicted_class.len() == n && in_bounds.len() == n);
        let mut boundary_mask = vec![false; n];
        for r in 0..height {
            for c in 0..width {
                let h = pattern_hash[r * width + c];
                let differs = |rr: usize, cc: usize| pattern_hash[rr * width + cc] != h;
                boundary_mask[r * width + c] = (c > 0 && differs(r, c - 1))
                    || (c + 1 < width && differs(r, c + 1))
                    || (r > 0 && differs(r - 1, c))
                    || (r + 1 < height && differs(r + 1, c));
            }
        }
        SliceRaster {
            width,
            height,
            pattern_hash,
            activation_rate,
            predicted_class,
            boundary_mask,
            in_bounds,
        }
    }

    /// Distinct region hashes among in-bounds pixels.
    pub fn unique_regions(&self) -> usize {
        self.pattern_hash
            .iter()
            .zip(&self.in_bounds)
            .filter(|(_, &ok)| ok)
            .map(|(h, _)| *h)
            .collect::<HashSet<_>>()
            .len()
    }
}

/// Evaluates the model at every pixel center of the plane.
pub fn rasterize(model: &NetworkModel, plane: &SlicePlane) -> Result<SliceRaster> {
    let (w, h) = plane.resolution;
    let total = model.hidden_node_count();
    let rows: Vec<Result<Vec<(u64, f64, usize, bool)>>> = (0..h)
        .into_par_iter()
        .map(|r| {
            let mut xs = Array2::zeros((w, model.input_dim()));
            for c in 0..w {
                let (s, t) = plane.pixel_coords(c, r);
                xs.row_mut(c).assign(&plane.point(s, t));
            }
            let (logits, patterns) = model.forward_batch(xs.view())?;
            Ok((0..w)
                .map(|c| {
                    let p = &patterns[c];
                    let rate = if total == 0 { 1.0 } else { p.count_ones() as f64 / total as f64 };
                    (p.hash64(), rate, argmax(logits.row(c)), model.in_bounds(xs.row(c), 0.0))
                })
                .collect())
        })
        .collect();
    let mut hashes = Vec::with_capacity(w * h);
    let mut rates = Vec::with_capacity(w * h);
    let mut classes = Vec::with_capacity(w * h);
    let mut inside = Vec::with_capacity(w * h);
    for row in rows {
        for (hash, rate, class, ok) in row? {
            hashes.push(hash);
            rates.push(rate);
            classes.push(class);
            inside.push(ok);
        }
    }
    Ok(SliceRaster::from_parts(w, h, hashes, rates, classes, inside))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderStyle {
    /// Activation-rate colors with gray region boundaries.
    Regions,
    /// Categorical colors by predicted class.
    Classes,
}

impl FromStr for RenderStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regions" | "top" => Ok(RenderStyle::Regions),
            "classes" | "bottom" => Ok(RenderStyle::Classes),
            other => Err(Error::UnsupportedStyle(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Ppm,
    Svg,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Svg => "svg",
        }
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppm" => Ok(ImageFormat::Ppm),
            "svg" => Ok(ImageFormat::Svg),
            other => Err(Error::UnsupportedStyle(format!("image format {other}"))),
        }
    }
}

pub type Rgb = [u8; 3];

pub const BOUNDARY_GRAY: Rgb = [128, 128, 128];
pub const OUT_OF_BOUNDS: Rgb = [255, 255, 255];

/// Anchors at 0, 1/4, 1/2, 3/4 and 1 of the viridis map; luminance rises monotonically.
const RATE_ANCHORS: [Rgb; 5] = [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]];

const CLASS_COLORS: [Rgb; 10] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
];

/// Piecewise-linear interpolation between the anchors, rounded to the nearest integer.
pub fn rate_color(rate: f64) -> Rgb {
    let x = rate.clamp(0.0, 1.0) * 4.0;
    let i = (x.floor() as usize).min(3);
    let f = x - i as f64;
    let (a, b) = (RATE_ANCHORS[i], RATE_ANCHORS[i + 1]);
    let mix = |k: usize| (a[k] as f64 + f * (b[k] as f64 - a[k] as f64)).round() as u8;
    [mix(0), mix(1), mix(2)]
}

pub fn class_color(class: usize) -> Rgb {
    CLASS_COLORS[class % CLASS_COLORS.len()]
}

fn pixel_colors(raster: &SliceRaster, style: RenderStyle) -> Vec<Option<Rgb>> {
    (0..raster.width * raster.height)
        .map(|i| {
            if !raster.in_bounds[i] {
                return None;
            }
            Some(match style {
                RenderStyle::Regions if raster.boundary_mask[i] => BOUNDARY_GRAY,
                RenderStyle::Regions => rate_color(raster.activation_rate[i]),
                RenderStyle::Classes => class_color(raster.predicted_class[i]),
            })
        })
        .collect()
}

/// Binary PPM (P6, maxval 255); out-of-bounds pixels are white.
pub fn encode_ppm(width: usize, height: usize, colors: &[Option<Rgb>]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for c in colors {
        out.extend_from_slice(&c.unwrap_or(OUT_OF_BOUNDS));
    }
    out
}

/// SVG 1.1 with one rectangle per horizontal run of equal color; out-of-bounds pixels are left transparent.
pub fn encode_svg(width: usize, height: usize, colors: &[Option<Rgb>]) -> Vec<u8> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" shape-rendering=\"crispEdges\">"
    );
    for r in 0..height {
        let mut c = 0;
        while c < width {
            let color = colors[r * width + c];
            let mut end = c + 1;
            while end < width && colors[r * width + end] == color {
                end += 1;
            }
            if let Some([red, green, blue]) = color {
                let _ = writeln!(
                    s,
                    "<rect x=\"{c}\" y=\"{r}\" width=\"{}\" height=\"1\" fill=\"#{red:02x}{green:02x}{blue:02x}\"/>",
                    end - c
                );
            }
            c = end;
        }
    }
    s.push_str("</svg>\n");
    s.into_bytes()
}

pub fn render(raster: &SliceRaster, style: RenderStyle, format: ImageFormat) -> Vec<u8> {
    let colors = pixel_colors(raster, style);
    match format {
        ImageFormat::Ppm => encode_ppm(raster.width, raster.height, &colors),
        ImageFormat::Svg => encode_svg(raster.width, raster.height, &colors),
    }
}

/// Heat map of a square matrix on `[vmin, vmax]` with the rate colormap; NaN entries are gray.
pub fn render_matrix(m: &Array2<f64>, vmin: f64, vmax: f64, format: ImageFormat) -> Vec<u8> {
    let (h, w) = m.dim();
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    let colors: Vec<Option<Rgb>> = m
        .iter()
        .map(|&v| Some(if v.is_nan() { BOUNDARY_GRAY } else { rate_color((v - vmin) / span) }))
        .collect();
    match format {
        ImageFormat::Ppm => encode_ppm(w, h, &colors),
        ImageFormat::Svg => encode_svg(w, h, &colors),
    }
}

/// Counts over `bins` uniform bins of `[lo, hi]`; values outside the range are
/// clamped into the end bins and NaN is skipped.
pub fn bin_counts(values: &[f64], bins: usize, range: (f64, f64)) -> Vec<usize> {
    let bins = bins.max(1);
    let mut counts = vec![0; bins];
    let (lo, hi) = range;
    let width = (hi - lo) / bins as f64;
    for &v in values.iter().filter(|v| !v.is_nan()) {
        let idx = if width > 0.0 { ((v - lo) / width).floor() } else { 0.0 };
        counts[(idx.max(0.0) as usize).min(bins - 1)] += 1;
    }
    counts
}

/// Range spanning every finite value; a single distinct value gets a unit-wide range around it.
pub fn auto_range<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values.into_iter().filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        None
    } else if lo == hi {
        Some((lo - 0.5, hi + 0.5))
    } else {
        Some((lo, hi))
    }
}

#[derive(Debug, Clone)]
pub struct HistogramSeries {
    pub label: String,
    pub values: Vec<f64>,
}

/// Overlaid step-outline histograms as SVG. With `density`, bars show
/// `count / (n * bin_width)` instead of counts.
pub fn histogram(series: &[HistogramSeries], bins: usize, range: Option<(f64, f64)>, density: bool) -> Vec<u8> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;
    let range = range.or_else(|| auto_range(series.iter().flat_map(|s| s.values.iter())));
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>");
    let Some((lo, hi)) = range.filter(|_| series.iter().any(|x| x.values.iter().any(|v| !v.is_nan()))) else {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">no data</text>",
            W / 2.0,
            H / 2.0
        );
        s.push_str("</svg>\n");
        return s.into_bytes();
    };
    let bins = bins.max(1);
    let bin_w = (hi - lo) / bins as f64;
    let heights: Vec<Vec<f64>> = series
        .iter()
        .map(|x| {
            let counts = bin_counts(&x.values, bins, (lo, hi));
            let n: usize = counts.iter().sum();
            counts
                .iter()
                .map(|&c| if density && n > 0 { c as f64 / (n as f64 * bin_w) } else { c as f64 })
                .collect()
        })
        .collect();
    let top = heights.iter().flatten().cloned().fold(0.0, f64::max).max(1e-300);
    let sx = |v: f64| PAD + (v - lo) / (hi - lo) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - v / top * (H - 2.0 * PAD);
    let _ = writeln!(
        s,
        "<path d=\"M{PAD} {PAD} L{PAD} {} L{} {}\" stroke=\"#000000\" fill=\"none\"/>",
        H - PAD,
        W - PAD,
        H - PAD
    );
    for (k, (x, hs)) in series.iter().zip(&heights).enumerate() {
        let [r, g, b] = class_color(k);
        let mut d = format!("M{:.2} {:.2}", sx(lo), sy(0.0));
        for (i, &v) in hs.iter().enumerate() {
            let x0 = lo + i as f64 * bin_w;
            let _ = write!(d, " L{:.2} {:.2} L{:.2} {:.2}", sx(x0), sy(v), sx(x0 + bin_w), sy(v));
        }
        let _ = write!(d, " L{:.2} {:.2}", sx(hi), sy(0.0));
        let _ = writeln!(s, "<path d=\"{d}\" stroke=\"#{r:02x}{g:02x}{b:02x}\" stroke-width=\"1.5\" fill=\"none\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#{r:02x}{g:02x}{b:02x}\">{}</text>",
            W - PAD - 120.0,
            PAD + 16.0 * k as f64,
            xml_escape(&x.label)
        );
    }
    for (v, anchor) in [(lo, "start"), (hi, "end")] {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"11\">{v:.4}</text>",
            sx(v),
            H - PAD + 16.0
        );
    }
    s.push_str("</svg>\n");
    s.into_bytes()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
