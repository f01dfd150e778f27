//! Lobe tracking on recorded component densities: centroids, widths,
//! speeds and detector arrival times.

use serde::{Deserialize, Serialize};

use crate::lattice::{Boundary, LatticeSpec};

/// Signed offset `x - origin`, wrapped onto `(-N/2, N/2]` on a ring.
pub fn offset(lattice: &LatticeSpec<f64>, x: f64, origin: f64) -> f64 {
    let d = x - origin;
    match lattice.boundary {
        Boundary::Open => d,
        Boundary::Ring => {
            let n = lattice.n_sites as f64;
            let mut d = d.rem_euclid(n);
            if d > 0.5 * n {
                d -= n;
            }
            d
        }
    }
}

/// A window that follows the straight trajectory
/// `x(t) = origin + velocity (t - t_origin)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobeWindow {
    pub origin: f64,
    pub t_origin: f64,
    pub velocity: f64,
    pub half_width: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Region `[lo, hi]` the window may not touch (the emitter).
    pub excluded: (f64, f64),
}

impl LobeWindow {
    pub fn position(&self, t: f64) -> f64 {
        self.origin + self.velocity * (t - self.t_origin)
    }

    fn clear_of_exclusion(&self, lattice: &LatticeSpec<f64>, t: f64) -> bool {
        let c = 0.5 * (self.excluded.0 + self.excluded.1);
        let half = 0.5 * (self.excluded.1 - self.excluded.0);
        offset(lattice, self.position(t), c).abs() > half + self.half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobeSample {
    pub time: f64,
    pub predicted: f64,
    pub centroid: f64,
    pub width: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobeTrack {
    pub samples: Vec<LobeSample>,
    /// Least-squares slope of centroid versus time.
    pub speed: Option<f64>,
    /// Mean standard deviation over the samples.
    pub width: Option<f64>,
}

impl LobeTrack {
    /// Relative deviation of the centroid displacement from the predicted
    /// one at the last tracked frame, measured from the window origin.
    pub fn center_deviation(&self, window: &LobeWindow) -> Option<f64> {
        let s = self.samples.last()?;
        let travelled = s.predicted - window.origin;
        (travelled != 0.0).then(|| ((s.centroid - s.predicted) / travelled).abs())
    }
}

/// Intensity-weighted centroid and standard deviation of `density` (bins
/// of `1 / bins_per_site` sites) inside `center +- half_width`.
pub fn windowed_moments(
    lattice: &LatticeSpec<f64>,
    density: &[f64],
    bins_per_site: usize,
    center: f64,
    half_width: f64,
) -> (f64, f64, f64) {
    let scale = bins_per_site as f64;
    let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (b, &rho) in density.iter().enumerate() {
        if rho == 0.0 {
            continue;
        }
        let d = offset(lattice, b as f64 / scale, center);
        if d.abs() <= half_width {
            w += rho;
            m1 += rho * d;
            m2 += rho * d * d;
        }
    }
    if w <= 0.0 {
        return (0.0, center, 0.0);
    }
    let mean = m1 / w;
    (w, center + mean, (m2 / w - mean * mean).max(0.0).sqrt())
}

/// Follows a lobe through the frames `(time, density)` while its window is
/// clear of the excluded region and carries at least `min_weight`.
pub fn track_lobe<'a>(
    lattice: &LatticeSpec<f64>,
    frames: impl IntoIterator<Item = (f64, &'a [f64])>,
    bins_per_site: usize,
    window: &LobeWindow,
    min_weight: f64,
) -> LobeTrack {
    let mut samples = Vec::new();
    for (t, density) in frames {
        if t < window.t_min || t > window.t_max || !window.clear_of_exclusion(lattice, t) {
            continue;
        }
        let predicted = window.position(t);
        let (w, c, s) = windowed_moments(lattice, density, bins_per_site, predicted, window.half_width);
        if w < min_weight {
            continue;
        }
        // Centroid relative to the prediction, kept on the unwrapped line.
        let centroid = predicted + offset(lattice, c, predicted);
        samples.push(LobeSample {
            time: t,
            predicted,
            centroid,
            width: s,
            weight: w,
        });
    }
    let speed = if samples.len() >= 3 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = samples.iter().map(|s| (s.time, s.centroid)).unzip();
        Some(linear_fit(&xs, &ys).0)
    } else {
        None
    };
    let width = (!samples.is_empty())
        .then(|| samples.iter().map(|s| s.width).sum::<f64>() / samples.len() as f64);
    LobeTrack {
        samples,
        speed,
        width,
    }
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Weight of `density` strictly beyond `detector` in the direction of
/// travel (right). On a ring, "beyond" is the half-ring ahead.
pub fn weight_beyond(
    lattice: &LatticeSpec<f64>,
    density: &[f64],
    bins_per_site: usize,
    detector: f64,
) -> f64 {
    let scale = bins_per_site as f64;
    density
        .iter()
        .enumerate()
        .filter(|(b, _)| offset(lattice, *b as f64 / scale, detector) > 0.0)
        .map(|(_, w)| w)
        .sum()
}

/// Centroid of `density` beyond `from` (ring: within the half-ring ahead).
pub fn centroid_beyond(
    lattice: &LatticeSpec<f64>,
    density: &[f64],
    bins_per_site: usize,
    from: f64,
) -> Option<f64> {
    let scale = bins_per_site as f64;
    let (mut w, mut m) = (0.0, 0.0);
    for (b, &rho) in density.iter().enumerate() {
        let d = offset(lattice, b as f64 / scale, from);
        if d > 0.0 {
            w += rho;
            m += rho * d;
        }
    }
    (w > 1e-9).then(|| from + m / w)
}

/// First time the weight past a detector reaches half of its maximum,
/// linearly interpolated between frames: the moment the lobe's centre of
/// weight crosses the detector. `None` if nothing ever arrives.
pub fn arrival_time(times: &[f64], weights: &[f64], min_weight: f64) -> Option<f64> {
    let peak = weights.iter().cloned().fold(0.0, f64::max);
    if peak < min_weight {
        return None;
    }
    let half = 0.5 * peak;
    for i in 0..weights.len() {
        if weights[i] >= half {
            if i == 0 {
                return Some(times[0]);
            }
            let (w0, w1) = (weights[i - 1], weights[i]);
            let f = (half - w0) / (w1 - w0);
            return Some(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    None
}
