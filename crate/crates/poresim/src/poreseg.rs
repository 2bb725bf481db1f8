//! Pore detection with the classical pseudo-label pipeline and mask scoring.
//!
//! Detection runs gray → DoG → negative-response threshold → morphological
//! closing/opening → connected components → area/shape filters, then computes
//! per-component statistics (moments ellipse, exact minimum enclosing circle,
//! mean CIELAB). Detection is deterministic: components come out ordered by
//! their top-left pixel in row-major order.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{self, LabPixel, Raster};

/// Binary segmentation mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Mask {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Write as an 8-bit gray PNG with values 0/255.
    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("mask length invariant");
        buf.save(path.as_ref())?;
        Ok(())
    }

    /// Read a 0/255 gray PNG; any value above 127 counts as set.
    pub fn read_png(path: impl AsRef<Path>) -> Result<Mask> {
        let img = imagecore::read_png(path)?;
        if !img.is_gray() {
            return Err(Error::InvalidInput(
                "mask PNG must be 8-bit gray".to_string(),
            ));
        }
        let data = img.data().iter().map(|&v| v > 0.5).collect();
        Ok(Mask {
            width: img.width(),
            height: img.height(),
            data,
        })
    }
}

/// A circle by center and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: (f64, f64),
    pub radius: f64,
}

impl Circle {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let dx = p.0 - self.center.0;
        let dy = p.1 - self.center.1;
        dx.hypot(dy) <= self.radius + 1e-10
    }
}

/// One detected pore.
#[derive(Debug, Clone)]
pub struct PoreComponent {
    /// Member pixels as `(x, y)`, sorted row-major.
    pub pixels: Vec<(u32, u32)>,
    pub centroid: (f64, f64),
    pub area_px: usize,
    /// Moments-ellipse eccentricity in `[0, 1)`.
    pub eccentricity: f64,
    /// Major-axis direction in degrees, `[0, 180)`.
    pub orientation_deg: f64,
    /// Exact minimum enclosing circle of the pixel centers.
    pub enclosing_circle: Circle,
    /// Mean CIELAB of the member pixels in the source image.
    pub mean_lab: LabPixel,
}

/// Aggregate pore statistics for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoreStats {
    pub pore_count: usize,
    pub pore_area_total: f64,
    pub pore_area_mean: f64,
    pub mean_eccentricity: f64,
    pub mean_orientation_deg: f64,
    pub mean_l: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Detection parameters. Defaults are pixel-space values validated on the
/// synthetic sheet generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    pub sigma1: f64,
    pub sigma2: f64,
    /// DoG magnitude threshold tau; candidate pixels satisfy response <= -tau.
    pub response_threshold: f64,
    pub morph_radius: usize,
    pub min_area_px: usize,
    pub max_area_px: usize,
    pub max_aspect_ratio: f64,
    /// 4 or 8; pores are frequently elongated, so 8 keeps diagonal chains.
    pub connectivity: u8,
}

impl Default for DetectionConfig {
    fn default() -> DetectionConfig {
        DetectionConfig {
            sigma1: 1.0,
            sigma2: 3.0,
            response_threshold: 0.02,
            morph_radius: 1,
            min_area_px: 4,
            max_area_px: 400,
            max_aspect_ratio: 4.0,
            connectivity: 8,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 0.0 && self.sigma1 < self.sigma2) {
            return Err(Error::InvalidParameter(format!(
                "detection requires 0 < sigma1 < sigma2, got {}, {}",
                self.sigma1, self.sigma2
            )));
        }
        if !(self.response_threshold > 0.0) {
            return Err(Error::InvalidParameter(
                "response_threshold must be > 0".to_string(),
            ));
        }
        if self.min_area_px > self.max_area_px {
            return Err(Error::InvalidParameter(format!(
                "min_area_px {} exceeds max_area_px {}",
                self.min_area_px, self.max_area_px
            )));
        }
        if !(self.max_aspect_ratio >= 1.0) {
            return Err(Error::InvalidParameter(
                "max_aspect_ratio must be >= 1".to_string(),
            ));
        }
        if self.connectivity != 4 && self.connectivity != 8 {
            return Err(Error::InvalidParameter(format!(
                "connectivity must be 4 or 8, got {}",
                self.connectivity
            )));
        }
        Ok(())
    }
}

fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

fn dilate(mask: &Mask, offsets: &[(isize, isize)]) -> Mask {
    let (w, h) = (mask.width as isize, mask.height as isize);
    let mut out = Mask::new(mask.width, mask.height);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                continue;
            }
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && nx < w && ny >= 0 && ny < h {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
    }
    out
}

fn erode(mask: &Mask, offsets: &[(isize, isize)]) -> Mask {
    let (w, h) = (mask.width as isize, mask.height as isize);
    let mut out = Mask::new(mask.width, mask.height);
    for y in 0..h {
        'pixel: for x in 0..w {
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || nx >= w || ny < 0 || ny >= h {
                    continue 'pixel;
                }
                if !mask.get(nx as usize, ny as usize) {
                    continue 'pixel;
                }
            }
            out.set(x as usize, y as usize, true);
        }
    }
    out
}

/// Row-major scan + flood fill, so components come out ordered by their
/// first (top-left) pixel and labeling is deterministic.
fn connected_components(mask: &Mask, connectivity: u8) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (mask.width, mask.height);
    let neighbors: &[(isize, isize)] = if connectivity == 8 {
        &[
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ]
    } else {
        &[(0, -1), (-1, 0), (1, 0), (0, 1)]
    };
    let mut visited = vec![false; w * h];
    let mut components = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || visited[y * w + x] {
                continue;
            }
            let mut pixels = Vec::new();
            let mut stack = vec![(x, y)];
            visited[y * w + x] = true;
            while let Some((px, py)) = stack.pop() {
                pixels.push((px as u32, py as u32));
                for &(dx, dy) in neighbors {
                    let nx = px as isize + dx;
                    let ny = py as isize + dy;
                    if nx < 0 || nx >= w as isize || ny < 0 || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.get(nx, ny) && !visited[ny * w + nx] {
                        visited[ny * w + nx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            pixels.sort_unstable_by_key(|&(px, py)| (py, px));
            components.push(pixels);
        }
    }
    components
}

struct MomentShape {
    centroid: (f64, f64),
    eccentricity: f64,
    orientation_deg: f64,
    aspect: f64,
}

/// Second-central-moment ellipse fit. Each pixel contributes the moment of a
/// unit square (the 1/12 diagonal term), which keeps single-pixel and
/// one-row components well defined.
fn moment_shape(pixels: &[(u32, u32)]) -> MomentShape {
    let n = pixels.len() as f64;
    let cx = pixels.iter().map(|&(x, _)| x as f64).sum::<f64>() / n;
    let cy = pixels.iter().map(|&(_, y)| y as f64).sum::<f64>() / n;
    let mut mu20 = 0.0;
    let mut mu02 = 0.0;
    let mut mu11 = 0.0;
    for &(x, y) in pixels {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        mu20 += dx * dx;
        mu02 += dy * dy;
        mu11 += dx * dy;
    }
    mu20 = mu20 / n + 1.0 / 12.0;
    mu02 = mu02 / n + 1.0 / 12.0;
    mu11 /= n;

    let mean = 0.5 * (mu20 + mu02);
    let diff = 0.5 * (mu20 - mu02);
    let root = (diff * diff + mu11 * mu11).sqrt();
    let lambda1 = mean + root;
    let lambda2 = (mean - root).max(f64::MIN_POSITIVE);

    let mut orientation = 0.5 * (2.0 * mu11).atan2(mu20 - mu02).to_degrees();
    if orientation < 0.0 {
        orientation += 180.0;
    }
    if orientation >= 180.0 {
        orientation -= 180.0;
    }

    MomentShape {
        centroid: (cx, cy),
        eccentricity: (1.0 - lambda2 / lambda1).max(0.0).sqrt().min(1.0 - 1e-12),
        orientation_deg: orientation,
        aspect: (lambda1 / lambda2).sqrt(),
    }
}

fn circle_from_diameter(a: (f64, f64), b: (f64, f64)) -> Circle {
    let center = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    let r = ((a.0 - center.0).hypot(a.1 - center.1)).max((b.0 - center.0).hypot(b.1 - center.1));
    Circle { center, radius: r }
}

/// Circumcircle of three points; `None` when collinear.
fn circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<Circle> {
    // Shift the coordinate origin into the triangle's bounding box before
    // solving; this keeps the determinant well conditioned.
    let ox = (a.0.min(b.0).min(c.0) + a.0.max(b.0).max(c.0)) / 2.0;
    let oy = (a.1.min(b.1).min(c.1) + a.1.max(b.1).max(c.1)) / 2.0;
    let (ax, ay) = (a.0 - ox, a.1 - oy);
    let (bx, by) = (b.0 - ox, b.1 - oy);
    let (cx, cy) = (c.0 - ox, c.1 - oy);
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    if d == 0.0 {
        return None;
    }
    let x = ox
        + ((ax * ax + ay * ay) * (by - cy)
            + (bx * bx + by * by) * (cy - ay)
            + (cx * cx + cy * cy) * (ay - by))
            / d;
    let y = oy
        + ((ax * ax + ay * ay) * (cx - bx)
            + (bx * bx + by * by) * (ax - cx)
            + (cx * cx + cy * cy) * (bx - ax))
            / d;
    let radius = (a.0 - x)
        .hypot(a.1 - y)
        .max((b.0 - x).hypot(b.1 - y))
        .max((c.0 - x).hypot(c.1 - y));
    Some(Circle {
        center: (x, y),
        radius,
    })
}

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

fn circle_two_boundary(points: &[(f64, f64)], p: (f64, f64), q: (f64, f64)) -> Circle {
    let base = circle_from_diameter(p, q);
    let mut left: Option<Circle> = None;
    let mut right: Option<Circle> = None;
    let (pqx, pqy) = (q.0 - p.0, q.1 - p.1);
    for &r in points {
        if base.contains(r) {
            continue;
        }
        let side = cross(pqx, pqy, r.0 - p.0, r.1 - p.1);
        let Some(c) = circumcircle(p, q, r) else {
            continue;
        };
        let c_side = cross(pqx, pqy, c.center.0 - p.0, c.center.1 - p.1);
        if side > 0.0 {
            let better = match left {
                None => true,
                Some(l) => c_side > cross(pqx, pqy, l.center.0 - p.0, l.center.1 - p.1),
            };
            if better {
                left = Some(c);
            }
        } else if side < 0.0 {
            let better = match right {
                None => true,
                Some(r2) => c_side < cross(pqx, pqy, r2.center.0 - p.0, r2.center.1 - p.1),
            };
            if better {
                right = Some(c);
            }
        }
    }
    match (left, right) {
        (None, None) => base,
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (Some(l), Some(r)) => {
            if l.radius <= r.radius {
                l
            } else {
                r
            }
        }
    }
}

fn circle_one_boundary(points: &[(f64, f64)], p: (f64, f64)) -> Circle {
    let mut c = Circle {
        center: p,
        radius: 0.0,
    };
    for (i, &q) in points.iter().enumerate() {
        if c.contains(q) {
            continue;
        }
        c = if c.radius == 0.0 {
            circle_from_diameter(p, q)
        } else {
            circle_two_boundary(&points[..=i], p, q)
        };
    }
    c
}

/// Exact minimum enclosing circle (Welzl move-to-front, expected linear
/// time). The internal shuffle is fixed-seed so identical inputs give
/// identical output bits.
pub fn min_enclosing_circle(points: &[(f64, f64)]) -> Result<Circle> {
    if points.is_empty() {
        return Err(Error::InvalidInput(
            "minimum enclosing circle of an empty point set".to_string(),
        ));
    }
    let mut pts = points.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(0x706f_7265);
    pts.shuffle(&mut rng);

    let mut circle = Circle {
        center: pts[0],
        radius: 0.0,
    };
    for i in 1..pts.len() {
        if !circle.contains(pts[i]) {
            circle = circle_one_boundary(&pts[..=i], pts[i]);
        }
    }
    Ok(circle)
}

fn component_from_pixels(pixels: Vec<(u32, u32)>, source: &Raster) -> Result<PoreComponent> {
    let shape = moment_shape(&pixels);
    let pts: Vec<(f64, f64)> = pixels.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    let circle = min_enclosing_circle(&pts)?;
    let mut lab_sum = (0.0, 0.0, 0.0);
    for &(x, y) in &pixels {
        let lab = imagecore::pixel_lab(source, x as usize, y as usize)?;
        lab_sum.0 += lab.l;
        lab_sum.1 += lab.a;
        lab_sum.2 += lab.b;
    }
    let n = pixels.len() as f64;
    Ok(PoreComponent {
        area_px: pixels.len(),
        centroid: shape.centroid,
        eccentricity: shape.eccentricity,
        orientation_deg: shape.orientation_deg,
        enclosing_circle: circle,
        mean_lab: LabPixel {
            l: lab_sum.0 / n,
            a: lab_sum.1 / n,
            b: lab_sum.2 / n,
        },
        pixels,
    })
}

/// Detect pores: DoG response threshold, closing then opening, connected
/// components, area and aspect filters. The returned mask is the union of
/// the surviving components.
pub fn detect_pores(img: &Raster, cfg: &DetectionConfig) -> Result<(Mask, Vec<PoreComponent>)> {
    cfg.validate()?;
    if img.width() < 64 || img.height() < 64 {
        return Err(Error::InvalidInput(format!(
            "detection needs at least 64x64 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let gray = if img.is_gray() {
        img.clone()
    } else {
        imagecore::to_gray(img)?
    };
    let response = imagecore::dog_filter(&gray, cfg.sigma1, cfg.sigma2)?;

    let mut candidates = Mask::new(img.width(), img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            if response.get(x, y, 0) <= -cfg.response_threshold {
                candidates.set(x, y, true);
            }
        }
    }

    let offsets = disk_offsets(cfg.morph_radius);
    let closed = erode(&dilate(&candidates, &offsets), &offsets);
    let opened = dilate(&erode(&closed, &offsets), &offsets);

    let mut mask = Mask::new(img.width(), img.height());
    let mut components = Vec::new();
    for pixels in connected_components(&opened, cfg.connectivity) {
        if pixels.len() < cfg.min_area_px || pixels.len() > cfg.max_area_px {
            continue;
        }
        if moment_shape(&pixels).aspect > cfg.max_aspect_ratio {
            continue;
        }
        for &(x, y) in &pixels {
            mask.set(x as usize, y as usize, true);
        }
        components.push(component_from_pixels(pixels, img)?);
    }
    Ok((mask, components))
}

/// Aggregate per-component statistics; an empty list yields all zeros.
pub fn pore_stats(components: &[PoreComponent]) -> PoreStats {
    if components.is_empty() {
        return PoreStats {
            pore_count: 0,
            pore_area_total: 0.0,
            pore_area_mean: 0.0,
            mean_eccentricity: 0.0,
            mean_orientation_deg: 0.0,
            mean_l: 0.0,
            mean_a: 0.0,
            mean_b: 0.0,
        };
    }
    let n = components.len() as f64;
    let total: f64 = components.iter().map(|c| c.area_px as f64).sum();
    PoreStats {
        pore_count: components.len(),
        pore_area_total: total,
        pore_area_mean: total / n,
        mean_eccentricity: components.iter().map(|c| c.eccentricity).sum::<f64>() / n,
        mean_orientation_deg: components.iter().map(|c| c.orientation_deg).sum::<f64>() / n,
        mean_l: components.iter().map(|c| c.mean_lab.l).sum::<f64>() / n,
        mean_a: components.iter().map(|c| c.mean_lab.a).sum::<f64>() / n,
        mean_b: components.iter().map(|c| c.mean_lab.b).sum::<f64>() / n,
    }
}

/// Pixel-overlap metrics between a predicted and a truth mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskMetrics {
    pub dice: f64,
    pub iou: f64,
    pub precision: f64,
    pub accuracy: f64,
}

/// Dice, IoU, precision, and pixel accuracy. Zero-denominator convention:
/// the metric is 1 when both masks are empty, otherwise 0.
pub fn mask_metrics(pred: &Mask, truth: &Mask) -> Result<MaskMetrics> {
    if pred.width != truth.width || pred.height != truth.height {
        return Err(Error::InvalidInput(format!(
            "mask dimensions differ: {}x{} vs {}x{}",
            pred.width, pred.height, truth.width, truth.height
        )));
    }
    let mut inter = 0usize;
    let mut p = 0usize;
    let mut t = 0usize;
    let mut correct = 0usize;
    for (a, b) in pred.data.iter().zip(&truth.data) {
        if *a {
            p += 1;
        }
        if *b {
            t += 1;
        }
        if *a && *b {
            inter += 1;
        }
        if a == b {
            correct += 1;
        }
    }
    let both_empty = p == 0 && t == 0;
    let ratio = |num: f64, den: f64| {
        if den > 0.0 {
            num / den
        } else if both_empty {
            1.0
        } else {
            0.0
        }
    };
    let union = p + t - inter;
    let total = pred.data.len();
    Ok(MaskMetrics {
        dice: ratio(2.0 * inter as f64, (p + t) as f64),
        iou: ratio(inter as f64, union as f64),
        precision: ratio(inter as f64, p as f64),
        accuracy: if total > 0 {
            correct as f64 / total as f64
        } else {
            1.0
        },
    })
}

/// Export components as CSV: `id,cx,cy,area,ecc,orient,circle_x,circle_y,radius`.
pub fn write_components_csv<W: Write>(writer: W, components: &[PoreComponent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "id", "cx", "cy", "area", "ecc", "orient", "circle_x", "circle_y", "radius",
    ])?;
    for (id, c) in components.iter().enumerate() {
        w.write_record([
            id.to_string(),
            c.centroid.0.to_string(),
            c.centroid.1.to_string(),
            c.area_px.to_string(),
            c.eccentricity.to_string(),
            c.orientation_deg.to_string(),
            c.enclosing_circle.center.0.to_string(),
            c.enclosing_circle.center.1.to_string(),
            c.enclosing_circle.radius.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
