//! The warp engine: local scaling circles around detected pores, flow-field
//! construction, and bilinear resampling.
//!
//! The radial map `f_s(r) = (1 - (r/r_max - 1)^2 a) r` is used as a backward
//! mapping: an output pixel at radius `r` from a circle center samples the
//! source at radius `f_s(r)`. Negative `a` therefore shrinks pore content
//! (the output near the center reaches farther out into surrounding skin),
//! positive `a` enlarges it. The center and the circle boundary are fixed
//! points, so pixels outside every circle stay bit-identical.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::datapipe::TimeWindow;
use crate::error::{Error, Result};
use crate::imagecore::{self, Raster};
use crate::poreseg::PoreComponent;
use crate::rfregress::{window_features, RandomForest};

/// Default margin multiplying each pore's enclosing-circle radius. With the
/// circle exactly at the pore boundary the boundary would be a fixed point
/// and the rim could not move; the margin lets surrounding skin flow.
pub const DEFAULT_BETA: f64 = 1.5;

/// Strengths outside this open interval break monotonicity of the radial
/// map (the derivative `1 - a (u-1)(3u-1)` changes sign on [0, 1]).
pub const STRENGTH_RANGE: (f64, f64) = (-3.0, 1.0);

/// One warp circle: center, working radius (enclosing radius times the
/// margin), and shared strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpCircle {
    pub center: (f64, f64),
    pub r_max: f64,
    pub strength: f64,
}

impl WarpCircle {
    pub fn new(center: (f64, f64), r_max: f64, strength: f64) -> Result<WarpCircle> {
        if !(r_max > 0.0) || !r_max.is_finite() || !center.0.is_finite() || !center.1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "warp circle needs a finite center and r_max > 0, got {center:?}, {r_max}"
            )));
        }
        check_strength(strength)?;
        Ok(WarpCircle {
            center,
            r_max,
            strength,
        })
    }
}

fn check_strength(a: f64) -> Result<()> {
    if !a.is_finite() || a <= STRENGTH_RANGE.0 || a >= STRENGTH_RANGE.1 {
        return Err(Error::InvalidParameter(format!(
            "warp strength must lie strictly in (-3, 1), got {a}"
        )));
    }
    Ok(())
}

/// The local scaling map `f_s(r) = (1 - (r/r_max - 1)^2 a) r`.
///
/// `f_s(0) = 0` and `f_s(r_max) = r_max` exactly; strictly increasing on
/// `[0, r_max]` for every admissible strength.
pub fn radial_map(r: f64, r_max: f64, a: f64) -> Result<f64> {
    if !(r_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "r_max must be > 0, got {r_max}"
        )));
    }
    if !(0.0..=r_max).contains(&r) {
        return Err(Error::InvalidInput(format!(
            "radius {r} outside [0, {r_max}]"
        )));
    }
    check_strength(a)?;
    let u = r / r_max - 1.0;
    Ok((1.0 - u * u * a) * r)
}

/// Admissible area-ratio interval for a margin: the ratios whose solved
/// strength stays inside (-3, 1). Used for error reporting.
fn admissible_rho(beta: f64) -> (f64, f64) {
    let strength = |s: f64| (1.0 - 1.0 / s) / ((s / beta - 1.0) * (s / beta - 1.0));
    // strength(s) grows from -inf (s -> 0) through 0 (s = 1) to +inf
    // (s -> beta); bisect for the two boundary crossings.
    let bisect = |target: f64, mut lo: f64, mut hi: f64| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if strength(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let s_lo = bisect(STRENGTH_RANGE.0, 1e-12, 1.0);
    let s_hi = bisect(STRENGTH_RANGE.1, 1.0, beta * (1.0 - 1e-12));
    (s_lo * s_lo, s_hi * s_hi)
}

/// Solve for the strength that makes the warped pore area `rho` times the
/// original: with `f_s` mapping destination radius to source radius, the
/// destination boundary at radius `sqrt(rho) * r_p` must sample the source
/// boundary at `r_p = r_max / beta`, giving
/// `a = (1 - 1/sqrt(rho)) / (sqrt(rho)/beta - 1)^2`.
pub fn solve_warp_strength(rho: f64, beta: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target area ratio must be > 0, got {rho}"
        )));
    }
    if rho == 1.0 {
        return Ok(0.0);
    }
    if !(beta > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "margin beta must be > 1, got {beta}"
        )));
    }
    let s = rho.sqrt();
    if s >= beta {
        return Err(Error::UnsatisfiableTarget(format!(
            "area ratio {rho} needs the pore boundary at {s:.4} r_p, outside the beta = {beta} margin circle"
        )));
    }
    let a = (1.0 - 1.0 / s) / ((s / beta - 1.0) * (s / beta - 1.0));
    if check_strength(a).is_err() {
        let (rho_min, rho_max) = admissible_rho(beta);
        return Err(Error::StrengthOutOfRange {
            strength: a,
            beta,
            rho_min,
            rho_max,
        });
    }
    Ok(a)
}

/// Per-pixel source coordinates, absolute, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    grid: Vec<(f64, f64)>,
}

impl FlowField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        self.grid[y * self.width + x]
    }

    /// Debug sidecar: magic `PSFF`, u32 width, u32 height, then row-major
    /// f32 `(x_src, y_src)` pairs, all little-endian.
    pub fn write_psff<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(b"PSFF")?;
        writer.write_all(&(self.width as u32).to_le_bytes())?;
        writer.write_all(&(self.height as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.grid.len() * 8);
        for &(x, y) in &self.grid {
            buf.extend_from_slice(&(x as f32).to_le_bytes());
            buf.extend_from_slice(&(y as f32).to_le_bytes());
        }
        writer.write_all(&buf)?;
        Ok(())
    }

    pub fn read_psff<R: Read>(mut reader: R) -> Result<FlowField> {
        let mut magic = [0u8; 4];
        reader.read_exact(&mut magic)?;
        if &magic != b"PSFF" {
            return Err(Error::InvalidInput(format!(
                "bad flow-field magic {magic:?}"
            )));
        }
        let mut word = [0u8; 4];
        reader.read_exact(&mut word)?;
        let width = u32::from_le_bytes(word) as usize;
        reader.read_exact(&mut word)?;
        let height = u32::from_le_bytes(word) as usize;
        let mut grid = Vec::with_capacity(width * height);
        let mut pair = [0u8; 8];
        for _ in 0..width * height {
            reader.read_exact(&mut pair)?;
            let x = f32::from_le_bytes(pair[0..4].try_into().unwrap());
            let y = f32::from_le_bytes(pair[4..8].try_into().unwrap());
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidInput(
                    "flow field contains non-finite entries".to_string(),
                ));
            }
            grid.push((x as f64, y as f64));
        }
        Ok(FlowField {
            width,
            height,
            grid,
        })
    }
}

/// Build the flow field: identity everywhere, plus, inside each circle, the
/// radial displacement that moves the sample point from radius `r` to
/// `f_s(r)`. Overlapping circles add their displacements; each contribution
/// vanishes at its own boundary, so the sum stays continuous. Pixels outside
/// all circles keep the exact identity.
///
/// Circles are gathered in a canonical sorted order internally, so any
/// permutation of `circles` produces a bit-identical field.
pub fn build_flow_field(width: usize, height: usize, circles: &[WarpCircle]) -> Result<FlowField> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput(format!(
            "flow field needs positive dimensions, got {width}x{height}"
        )));
    }
    for c in circles {
        WarpCircle::new(c.center, c.r_max, c.strength)?;
    }
    let mut ordered: Vec<&WarpCircle> = circles.iter().filter(|c| c.strength != 0.0).collect();
    ordered.sort_by(|a, b| {
        (a.center.1, a.center.0, a.r_max, a.strength)
            .partial_cmp(&(b.center.1, b.center.0, b.r_max, b.strength))
            .expect("finite circle parameters")
    });

    let mut grid: Vec<(f64, f64)> = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            grid.push((x as f64, y as f64));
        }
    }

    grid.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let yf = y as f64;
        for c in &ordered {
            let dy = yf - c.center.1;
            if dy.abs() >= c.r_max {
                continue;
            }
            let span = (c.r_max * c.r_max - dy * dy).sqrt();
            let x_lo = ((c.center.0 - span).ceil().max(0.0)) as usize;
            let x_hi = ((c.center.0 + span).floor().min((width - 1) as f64)) as usize;
            for x in x_lo..=x_hi {
                let dx = x as f64 - c.center.0;
                let r = (dx * dx + dy * dy).sqrt();
                if r >= c.r_max {
                    continue;
                }
                // source - pixel = -a (r/r_max - 1)^2 (dx, dy)
                let u = r / c.r_max - 1.0;
                let scale = -c.strength * u * u;
                row[x].0 += scale * dx;
                row[x].1 += scale * dy;
            }
        }
    });

    Ok(FlowField {
        width,
        height,
        grid,
    })
}

/// Resample the image through the field with bilinear interpolation and
/// border clamping. An identity field reproduces the input bit-exactly.
pub fn apply_flow(img: &Raster, field: &FlowField) -> Result<Raster> {
    if img.width() != field.width || img.height() != field.height {
        return Err(Error::InvalidInput(format!(
            "flow field {}x{} does not match image {}x{}",
            field.width,
            field.height,
            img.width(),
            img.height()
        )));
    }
    let ch = img.channels();
    let mut out = vec![0.0; img.data().len()];
    out.par_chunks_mut(field.width * ch)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..field.width {
                let (sx, sy) = field.get(x, y);
                for c in 0..ch {
                    row[x * ch + c] = imagecore::bilinear_sample(img, sx, sy, c);
                }
            }
        });
    Raster::from_data(img.width(), img.height(), ch, out)
}

/// Warp circles for a component list: each pore's enclosing circle scaled by
/// the margin, sharing one strength. Radii are floored at half a pixel so
/// single-pixel pores still carry a valid circle.
pub fn circles_for_components(
    components: &[PoreComponent],
    beta: f64,
    strength: f64,
) -> Result<Vec<WarpCircle>> {
    components
        .iter()
        .enumerate()
        .map(|(id, c)| {
            WarpCircle::new(
                c.enclosing_circle.center,
                beta * c.enclosing_circle.radius.max(0.5),
                strength,
            )
            .map_err(|e| e.context(format!("pore {id}")))
        })
        .collect()
}

/// A resolved simulation: detected pores, the predicted area ratio per time
/// window, and the margin. Construction validates that every ratio is
/// solvable for the margin.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub pores: Vec<PoreComponent>,
    pub ratios: BTreeMap<TimeWindow, f64>,
    pub beta: f64,
}

impl SimulationPlan {
    pub fn from_model(
        pores: Vec<PoreComponent>,
        model: &RandomForest,
        beta: f64,
    ) -> Result<SimulationPlan> {
        if !(beta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "margin beta must be >= 1, got {beta}"
            )));
        }
        let mut ratios = BTreeMap::new();
        for window in TimeWindow::ALL {
            let rho = model
                .predict(&window_features(window, 1.0, 1.0))
                .map_err(|e| e.context(format!("predicting ratio for {window}")))?;
            solve_warp_strength(rho, beta)
                .map_err(|e| e.context(format!("ratio {rho:.4} for {window}")))?;
            ratios.insert(window, rho);
        }
        Ok(SimulationPlan {
            pores,
            ratios,
            beta,
        })
    }

    /// Warp the image for one window of the plan.
    pub fn simulate(&self, img: &Raster, window: TimeWindow) -> Result<Raster> {
        let rho = *self
            .ratios
            .get(&window)
            .ok_or_else(|| Error::InvalidInput(format!("plan has no ratio for {window}")))?;
        simulate_with_ratio(img, &self.pores, rho, self.beta)
            .map_err(|e| e.context(format!("simulating {window}")))
    }
}

fn simulate_with_ratio(
    img: &Raster,
    components: &[PoreComponent],
    rho: f64,
    beta: f64,
) -> Result<Raster> {
    let strength = solve_warp_strength(rho, beta)?;
    let circles = circles_for_components(components, beta, strength)?;
    let field = build_flow_field(img.width(), img.height(), &circles)?;
    apply_flow(img, &field)
}

/// End-to-end warp for one time window: predict the area ratio with the
/// model, solve the shared strength, and resample. Every pixel outside all
/// margin circles stays bit-identical to the input.
pub fn simulate(
    img: &Raster,
    components: &[PoreComponent],
    model: &RandomForest,
    window: TimeWindow,
    beta: f64,
) -> Result<Raster> {
    if !(beta >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "margin beta must be >= 1, got {beta}"
        )));
    }
    let rho = model
        .predict(&window_features(window, 1.0, 1.0))
        .map_err(|e| e.context(format!("predicting ratio for {window}")))?;
    simulate_with_ratio(img, components, rho, beta)
        .map_err(|e| e.context(format!("simulating {window}")))
}
