//! Point sets over a hyperrectangle: i.i.d. uniform draws and θ-regular
//! cell-center lattices, with a checker for θ-regularity.
//!
//! A set `{t_1, …, t_M}` is θ-regular when every pair is at L1 distance at
//! least θ and every point of the domain is within L1 distance 2θ of the set.
//! A cell-center lattice with per-axis pitch `h_k` has minimum separation
//! `min_k h_k` (over axes with two or more cells) and covering radius
//! `Σ_k h_k / 2`, so it is θ-regular exactly when `θ ≤ h_k ≤ 4θ/d` on every
//! axis. [`regular_grid`] aims for `h_k ≈ 2θ/d` inside that window.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Domain;
use crate::rng::StreamRng;

/// Relative slack for the separation test, absorbing rounding in `lower + (k + ½)·h`.
const SEPARATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Explicit,
    /// Drawn uniformly; records the ChaCha stream and word position the
    /// draw started from.
    UniformRandom { stream: u64, word_pos: u128 },
    /// Cell-center lattice with `counts[k]` cells along axis `k`.
    Lattice { counts: Vec<usize>, theta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dimension: usize,
    coords: Vec<f64>,
    provenance: Provenance,
}

impl PointSet {
    /// Points given as a flat coordinate list, `dimension` values per point.
    pub fn explicit(dimension: usize, coords: Vec<f64>) -> Result<Self> {
        if dimension == 0 || coords.is_empty() || coords.len() % dimension != 0 {
            return Err(Error::Argument(format!(
                "{} coordinates do not form a non-empty set of {dimension}-dimensional points",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Argument("point coordinates must be finite".into()));
        }
        Ok(Self {
            dimension,
            coords,
            provenance: Provenance::Explicit,
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dimension = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dimension) {
            return Err(Error::Argument("points have mixed dimensions".into()));
        }
        Self::explicit(dimension, points.concat())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dimension)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Subset of points by index, keeping order. Provenance becomes explicit.
    pub fn select(&self, indices: &[usize]) -> Self {
        let coords = indices.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        Self {
            dimension: self.dimension,
            coords,
            provenance: Provenance::Explicit,
        }
    }
}

pub fn l1_distance(s: &[f64], t: &[f64]) -> f64 {
    s.iter().zip(t).map(|(a, b)| (a - b).abs()).sum()
}

/// `m` i.i.d. uniform points over the domain.
pub fn uniform_points(domain: &Domain, m: usize, rng: &mut StreamRng) -> Result<PointSet> {
    if m == 0 {
        return Err(Error::Argument("need at least one point".into()));
    }
    let provenance = Provenance::UniformRandom {
        stream: rng.get_stream(),
        word_pos: rng.get_word_pos(),
    };
    let coords = fill_uniform(domain, m, rng);
    Ok(PointSet {
        dimension: domain.dimension(),
        coords,
        provenance,
    })
}

pub(crate) fn fill_uniform<R: Rng + ?Sized>(domain: &Domain, m: usize, rng: &mut R) -> Vec<f64> {
    let d = domain.dimension();
    let mut coords = Vec::with_capacity(m * d);
    for _ in 0..m {
        for k in 0..d {
            let u: f64 = rng.random();
            // u ∈ [0, 1) keeps the point inside the closed box.
            coords.push((domain.lower()[k] + u * domain.edge(k)).min(domain.upper()[k]));
        }
    }
    coords
}

/// Cell counts admissible for a θ-regular lattice on an axis of length `edge`
/// in dimension `d`: pitch `edge/n` within `[θ, 4θ/d]`, or a single cell.
fn admissible_counts(edge: f64, d: usize, theta: f64) -> Option<(usize, usize)> {
    let hi = ((edge / theta) * (1.0 + SEPARATION_SLACK)).floor().max(1.0) as usize;
    let lo = ((d as f64 * edge / (4.0 * theta)) * (1.0 - SEPARATION_SLACK)).ceil().max(1.0) as usize;
    (lo <= hi).then_some((lo, hi))
}

fn check_theta(domain: &Domain, theta: f64) -> Result<()> {
    let shortest = domain.edges().fold(f64::INFINITY, f64::min);
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::Argument(format!("theta must be positive, got {theta}")));
    }
    if theta > shortest {
        return Err(Error::Argument(format!(
            "theta {theta} exceeds the shortest domain edge {shortest}"
        )));
    }
    Ok(())
}

/// Per-axis cell counts of the lattice [`regular_grid`] builds.
pub fn lattice_counts(domain: &Domain, theta: f64) -> Result<Vec<usize>> {
    check_theta(domain, theta)?;
    let d = domain.dimension();
    let target = 2.0 * theta / d as f64;
    domain
        .edges()
        .map(|edge| {
            let (lo, hi) = admissible_counts(edge, d, theta).ok_or_else(|| {
                Error::Argument(format!(
                    "no cubic lattice is {theta}-regular in dimension {d} on an edge of length {edge}"
                ))
            })?;
            Ok(((edge / target).round() as usize).clamp(lo, hi))
        })
        .collect()
}

/// Like [`lattice_counts`] but every count is odd, so that a lattice whose
/// counts are odd multiples of these contains it as a subset.
pub fn odd_lattice_counts(domain: &Domain, theta: f64) -> Result<Vec<usize>> {
    check_theta(domain, theta)?;
    let d = domain.dimension();
    let target = 2.0 * theta / d as f64;
    domain
        .edges()
        .map(|edge| {
            let (lo, hi) = admissible_counts(edge, d, theta).ok_or_else(|| {
                Error::Argument(format!("no lattice is {theta}-regular in dimension {d}"))
            })?;
            let ideal = edge / target;
            (lo..=hi)
                .filter(|n| n % 2 == 1)
                .min_by(|a, b| (*a as f64 - ideal).abs().total_cmp(&(*b as f64 - ideal).abs()))
                .ok_or_else(|| Error::Argument(format!("no odd lattice count is {theta}-regular on edge {edge}")))
        })
        .collect()
}

/// Cell-center lattice with the given per-axis counts; the first axis varies
/// slowest. `theta` is recorded as provenance only.
pub fn lattice(domain: &Domain, counts: &[usize], theta: f64) -> Result<PointSet> {
    let d = domain.dimension();
    if counts.len() != d || counts.iter().any(|&n| n == 0) {
        return Err(Error::Argument(format!("lattice needs {d} positive counts, got {counts:?}")));
    }
    let total: usize = counts.iter().product();
    let mut coords = Vec::with_capacity(total * d);
    let mut index = vec![0usize; d];
    for _ in 0..total {
        for k in 0..d {
            let pitch = domain.edge(k) / counts[k] as f64;
            let x = domain.lower()[k] + (index[k] as f64 + 0.5) * pitch;
            coords.push(x.min(domain.upper()[k]));
        }
        for k in (0..d).rev() {
            index[k] += 1;
            if index[k] < counts[k] {
                break;
            }
            index[k] = 0;
        }
    }
    Ok(PointSet {
        dimension: d,
        coords,
        provenance: Provenance::Lattice {
            counts: counts.to_vec(),
            theta,
        },
    })
}

/// θ-regular cell-center lattice over the domain.
pub fn regular_grid(domain: &Domain, theta: f64) -> Result<PointSet> {
    let counts = lattice_counts(domain, theta)?;
    lattice(domain, &counts, theta)
}

/// Positions, within the fine lattice, of the points of a coarse lattice
/// nested in it. Requires each fine count to be an odd multiple of the
/// corresponding coarse count.
pub fn nested_indices(fine: &[usize], coarse: &[usize]) -> Result<Vec<usize>> {
    if fine.len() != coarse.len() {
        return Err(Error::Argument("lattices have different dimensions".into()));
    }
    let mut ratios = Vec::with_capacity(fine.len());
    for (&f, &c) in fine.iter().zip(coarse) {
        if c == 0 || f % c != 0 || (f / c) % 2 == 0 {
            return Err(Error::Argument(format!(
                "lattice with {c} cells is not nested in one with {f} cells"
            )));
        }
        ratios.push(f / c);
    }
    let total: usize = coarse.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut index = vec![0usize; coarse.len()];
    for _ in 0..total {
        let mut flat = 0;
        for k in 0..coarse.len() {
            let fine_k = index[k] * ratios[k] + ratios[k] / 2;
            flat = flat * fine[k] + fine_k;
        }
        out.push(flat);
        for k in (0..coarse.len()).rev() {
            index[k] += 1;
            if index[k] < coarse[k] {
                break;
            }
            index[k] = 0;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegularityViolation {
    OutsideDomain { index: usize },
    TooClose { i: usize, j: usize, distance: f64 },
    Uncovered { witness: Vec<f64>, distance: f64 },
}

/// Checks both θ-regularity clauses in the L1 norm.
///
/// Lattice provenance is checked by exact cell geometry (the farthest domain
/// point from the lattice is a domain corner). Other sets are probed on a
/// grid of per-axis pitch at most θ/10 including the boundary, which misses
/// no covering violation larger than θ/5.
pub fn verify_theta_regular(pts: &PointSet, domain: &Domain, theta: f64) -> Result<(), RegularityViolation> {
    for (index, p) in pts.iter().enumerate() {
        if !domain.contains(p) {
            return Err(RegularityViolation::OutsideDomain { index });
        }
    }
    let floor = theta * (1.0 - SEPARATION_SLACK);
    for i in 0..pts.len() {
        for j in 0..i {
            let distance = l1_distance(pts.point(i), pts.point(j));
            if distance < floor {
                return Err(RegularityViolation::TooClose { i: j, j: i, distance });
            }
        }
    }
    let nearest = |t: &[f64]| pts.iter().map(|p| l1_distance(p, t)).fold(f64::INFINITY, f64::min);
    let ceiling = 2.0 * theta * (1.0 + SEPARATION_SLACK);
    let lattice_counts = match pts.provenance() {
        Provenance::Lattice { counts, .. } if counts.iter().product::<usize>() == pts.len() => Some(counts),
        _ => None,
    };
    if let Some(counts) = lattice_counts {
        let witness = domain.lower().to_vec();
        let radius: f64 = counts.iter().enumerate().map(|(k, &n)| domain.edge(k) / (2.0 * n as f64)).sum();
        let distance = radius.max(nearest(&witness));
        if distance > ceiling {
            return Err(RegularityViolation::Uncovered { witness, distance });
        }
        return Ok(());
    }
    let d = domain.dimension();
    let probe_pitch = (theta / 10.0).min(2.0 * theta / (5.0 * d as f64));
    let steps: Vec<usize> = domain.edges().map(|e| (e / probe_pitch).ceil() as usize).collect();
    let mut index = vec![0usize; d];
    let mut probe = vec![0.0; d];
    let mut worst: Option<(Vec<f64>, f64)> = None;
    loop {
        for k in 0..d {
            probe[k] = if index[k] == steps[k] {
                domain.upper()[k]
            } else {
                domain.lower()[k] + index[k] as f64 * domain.edge(k) / steps[k] as f64
            };
        }
        let distance = nearest(&probe);
        if distance > ceiling && worst.as_ref().is_none_or(|(_, w)| distance > *w) {
            worst = Some((probe.clone(), distance));
        }
        let mut k = d;
        loop {
            if k == 0 {
                return match worst {
                    Some((witness, distance)) => Err(RegularityViolation::Uncovered { witness, distance }),
                    None => Ok(()),
                };
            }
            k -= 1;
            index[k] += 1;
            if index[k] <= steps[k] {
                break;
            }
            index[k] = 0;
        }
    }
}
