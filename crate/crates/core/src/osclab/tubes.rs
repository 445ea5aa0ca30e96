use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::oscillatory::csv_err;
use crate::conditions::PhaseField;
use crate::error::{Error, Result};
use crate::geodesics::{rk4, transport_rhs, unit_velocity};
use crate::linalg::singular_values;
use crate::riemann::MetricField;

/// Half-width of the chart box `[−½, ½]ⁿ` the tubes live in.
pub const BOX_HALF: f64 = 0.5;

pub enum TubeSource<'a> {
    /// Curved tubes `|∇_yφ(x′, t′; y) − ∇_yφ(ω, 0; y)| < δ`.
    Phase(&'a PhaseField),
    /// δ-neighborhoods (chart distance) of geodesics.
    Metric(&'a MetricField),
}

/// One tube: `key` is `y` for phase tubes and the direction for geodesic tubes;
/// `omega` is the placement `ω ∈ Rⁿ⁻¹` (at `t = 0`) or the anchor point in `Rⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeSpec {
    pub key: Vec<f64>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    /// Sorted linear voxel indices, last axis fastest.
    pub voxels: Vec<u32>,
    /// Part of the tube's core left the box or could not be followed.
    pub clipped: bool,
}

#[derive(Debug, Clone)]
pub struct TubeFamily {
    pub dim: usize,
    pub delta: f64,
    /// Voxel edge, `δ/4` rounded so the box holds a whole number of voxels.
    pub voxel: f64,
    pub per_axis: usize,
    pub lambda: Option<f64>,
    pub source: String,
    pub tubes: Vec<Tube>,
}

impl TubeFamily {
    pub fn voxel_volume(&self) -> f64 {
        self.voxel.powi(self.dim as i32)
    }

    pub fn tube_volume(&self, i: usize) -> f64 {
        self.tubes[i].voxels.len() as f64 * self.voxel_volume()
    }

    pub fn contains(&self, i: usize, p: &[f64]) -> bool {
        match self.voxel_of(p) {
            Some(v) => self.tubes[i].voxels.binary_search(&v).is_ok(),
            None => false,
        }
    }

    pub fn voxel_of(&self, p: &[f64]) -> Option<u32> {
        let mut idx = 0u64;
        for &x in p {
            let k = ((x + BOX_HALF) / self.voxel).floor();
            if k < 0.0 || k >= self.per_axis as f64 {
                return None;
            }
            idx = idx * self.per_axis as u64 + k as u64;
        }
        Some(idx as u32)
    }
}

struct Lattice {
    dim: usize,
    h: f64,
    m: usize,
}

impl Lattice {
    fn center(&self, k: i64) -> f64 {
        -BOX_HALF + (k as f64 + 0.5) * self.h
    }

    fn index_of(&self, x: f64) -> i64 {
        ((x + BOX_HALF) / self.h).floor() as i64
    }

    fn linear(&self, ks: &[i64]) -> u32 {
        ks.iter().fold(0u64, |acc, &k| acc * self.m as u64 + k as u64) as u32
    }

    /// Calls `f` on every in-box multi-index of the box `lo..=hi`.
    fn for_each(&self, lo: &[i64], hi: &[i64], mut f: impl FnMut(&[i64])) {
        let lo: Vec<i64> = lo.iter().map(|k| (*k).max(0)).collect();
        let hi: Vec<i64> = hi.iter().map(|k| (*k).min(self.m as i64 - 1)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return;
        }
        let mut cur = lo.clone();
        loop {
            f(&cur);
            let mut d = cur.len();
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                cur[d] += 1;
                if cur[d] <= hi[d] {
                    break;
                }
                cur[d] = lo[d];
            }
        }
    }
}

fn curved_tube(phi: &PhaseField, lat: &Lattice, delta: f64, spec: &TubeSpec) -> Result<Tube> {
    let n = lat.dim;
    let base: Vec<f64> = spec.omega.iter().copied().chain([0.0]).collect();
    let target = phi.grad_y(&base, &spec.key)?;
    let mut out = Vec::new();
    let mut clipped = false;
    let k0 = lat.index_of(0.0).clamp(0, lat.m as i64 - 1);
    let slices: [Vec<i64>; 2] = [(k0..lat.m as i64).collect(), (0..k0).rev().collect()];
    for ks in slices {
        let mut guess = spec.omega.clone();
        for k in ks {
            let t = lat.center(k);
            let Ok((pt, _)) = phi.core_point(&base, &spec.key, t, &guess) else {
                clipped = true;
                break;
            };
            guess = pt[..n - 1].to_vec();
            let jac = phi.mixed(&pt, &spec.key)?.rows(0, n - 1).transpose();
            let smin = *singular_values(&jac).last().unwrap_or(&0.0);
            if !(smin > 0.0) {
                clipped = true;
                break;
            }
            let r = 1.25 * delta / smin + 2.0 * lat.h;
            if guess.iter().any(|c| (c.abs() + r) > BOX_HALF) {
                clipped = true;
            }
            let lo: Vec<i64> = guess.iter().map(|c| lat.index_of(c - r)).collect();
            let hi: Vec<i64> = guess.iter().map(|c| lat.index_of(c + r)).collect();
            let mut err = None;
            lat.for_each(&lo, &hi, |idx| {
                if err.is_some() {
                    return;
                }
                let mut x: Vec<f64> = idx.iter().map(|&i| lat.center(i)).collect();
                x.push(t);
                match phi.grad_y(&x, &spec.key) {
                    Ok(g) => {
                        let d2: f64 = g.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
                        if d2 < delta * delta {
                            let mut full = idx.to_vec();
                            full.push(k);
                            out.push(lat.linear(&full));
                        }
                    }
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(Tube { voxels: out, clipped })
}

// polyline of the geodesic through the anchor, with signed arclength from it
fn trace_geodesic(
    m: &MetricField,
    anchor: &[f64],
    dir: &[f64],
    step: f64,
    margin: f64,
) -> Result<(Vec<(f64, Vec<f64>)>, bool)> {
    let n = m.dim();
    let v0 = unit_velocity(m, anchor, dir)?;
    let inside = |p: &[f64]| p.iter().all(|x| x.abs() <= BOX_HALF + margin);
    let max_steps = (8.0 / step).ceil() as usize;
    let mut pts = vec![(0.0, anchor.to_vec())];
    let mut clipped = false;
    for sign in [1.0, -1.0] {
        let mut y: Vec<f64> = anchor.iter().copied().chain(v0.iter().map(|v| sign * v)).collect();
        let mut f = |z: &[f64]| transport_rhs(m, z);
        let mut branch = Vec::new();
        let mut s = 0.0;
        for i in 0..max_steps {
            match rk4(&mut f, &y, step) {
                Ok(next) if next.iter().all(|x| x.is_finite()) => y = next,
                _ => {
                    clipped = true;
                    break;
                }
            }
            s += step;
            let p = y[..n].to_vec();
            let out = !inside(&p);
            branch.push((sign * s, p));
            if out {
                break;
            }
            if i + 1 == max_steps {
                clipped = true;
            }
        }
        if sign > 0.0 {
            pts.extend(branch);
        } else {
            branch.reverse();
            branch.extend(pts);
            pts = branch;
        }
    }
    Ok((pts, clipped))
}

fn segment_distance2(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let (mut l2, mut dot) = (0.0, 0.0);
    for k in 0..p.len() {
        let ab = b[k] - a[k];
        l2 += ab * ab;
        dot += (p[k] - a[k]) * ab;
    }
    let s = if l2 > 0.0 { (dot / l2).clamp(0.0, 1.0) } else { 0.0 };
    (0..p.len()).map(|k| (p[k] - a[k] - s * (b[k] - a[k])).powi(2)).sum()
}

fn geodesic_tube(m: &MetricField, lat: &Lattice, delta: f64, lambda: Option<f64>, spec: &TubeSpec) -> Result<Tube> {
    let (pts, clipped) = trace_geodesic(m, &spec.omega, &spec.key, delta, delta)?;
    let keep = |s: f64| lambda.map_or(true, |l| s.abs() >= 1.0 - l);
    let mut out = Vec::new();
    // chords between RK4 nodes δ apart in arclength
    for w in pts.windows(2) {
        if keep(w[0].0) && keep(w[1].0) {
            let (a, b) = (&w[0].1, &w[1].1);
            let lo: Vec<i64> = a.iter().zip(b).map(|(x, y)| lat.index_of(x.min(*y) - delta)).collect();
            let hi: Vec<i64> = a.iter().zip(b).map(|(x, y)| lat.index_of(x.max(*y) + delta)).collect();
            let mut x = vec![0.0; lat.dim];
            lat.for_each(&lo, &hi, |idx| {
                for (xi, &k) in x.iter_mut().zip(idx) {
                    *xi = lat.center(k);
                }
                if segment_distance2(&x, a, b) < delta * delta {
                    out.push(lat.linear(idx));
                }
            });
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(Tube { voxels: out, clipped })
}

/// Voxelizes one tube per spec at edge `δ/4` over the box `[−½, ½]ⁿ`.
/// `lambda` truncates geodesic tubes to arclength `≥ 1 − λ` from the anchor.
pub fn tube_rasterize(source: TubeSource, specs: &[TubeSpec], delta: f64, lambda: Option<f64>) -> Result<TubeFamily> {
    if !(1.0 / 64.0 - 1e-12..=0.25 + 1e-12).contains(&delta) {
        return Err(Error::Invalid("δ must lie in [1/64, 1/4]".into()));
    }
    let (dim, label) = match &source {
        TubeSource::Phase(p) => (p.dim(), p.label().to_string()),
        TubeSource::Metric(m) => (m.dim(), m.label().to_string()),
    };
    if let Some(l) = lambda {
        if !(l > 0.0 && l < 1.0) || matches!(source, TubeSource::Phase(_)) {
            return Err(Error::Invalid("λ-truncation needs λ ∈ (0, 1) and a geodesic source".into()));
        }
    }
    let per_axis = (2.0 * BOX_HALF / (delta / 4.0)).ceil() as usize;
    if (per_axis as f64).powi(dim as i32) > u32::MAX as f64 {
        return Err(Error::Resolution(format!("{per_axis}^{dim} voxels do not fit 32-bit indices")));
    }
    let lat = Lattice { dim, h: 2.0 * BOX_HALF / per_axis as f64, m: per_axis };
    for s in specs {
        let (kl, ol) = match source {
            TubeSource::Phase(_) => (dim - 1, dim - 1),
            TubeSource::Metric(_) => (dim, dim),
        };
        if s.key.len() != kl || s.omega.len() != ol {
            return Err(Error::Invalid(format!("tube spec needs a {kl}-component key and {ol}-component placement")));
        }
    }
    let tubes: Vec<Result<Tube>> = specs
        .par_iter()
        .map(|s| match source {
            TubeSource::Phase(p) => curved_tube(p, &lat, delta, s),
            TubeSource::Metric(m) => geodesic_tube(m, &lat, delta, lambda, s),
        })
        .collect();
    Ok(TubeFamily {
        dim,
        delta,
        voxel: lat.h,
        per_axis,
        lambda,
        source: label,
        tubes: tubes.into_iter().collect::<Result<_>>()?,
    })
}

/// Volume of the voxel union, merged through per-worker bitsets.
pub fn union_volume(tf: &TubeFamily) -> f64 {
    let total = tf.per_axis.pow(tf.dim as u32);
    let words = total.div_ceil(64);
    let bits = tf
        .tubes
        .par_iter()
        .fold(
            || vec![0u64; words],
            |mut acc, t| {
                for &v in &t.voxels {
                    acc[v as usize / 64] |= 1 << (v % 64);
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; words],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x |= y;
                }
                a
            },
        );
    bits.iter().map(|w| w.count_ones() as f64).sum::<f64>() * tf.voxel_volume()
}

/// `(δ, union volume)` pairs from a family builder.
pub fn union_sweep<F>(deltas: &[f64], build: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<TubeFamily>,
{
    deltas.iter().map(|&d| Ok((d, union_volume(&build(d)?)))).collect()
}

/// CSV with columns `delta, volume`.
pub fn write_sweep_csv<W: Write>(w: W, sweep: &[(f64, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["delta", "volume"]).map_err(csv_err)?;
    for (d, v) in sweep {
        out.write_record([format!("{d}"), format!("{v:e}")]).map_err(csv_err)?;
    }
    out.flush().map_err(|e| Error::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paraboloid() -> PhaseField {
        PhaseField::named("paraboloid").unwrap()
    }

    #[test]
    fn single_tube_matches_cylinder() {
        let phi = paraboloid();
        let delta = 1.0 / 16.0;
        let tf = tube_rasterize(
            TubeSource::Phase(&phi),
            &[TubeSpec { key: vec![0.1, -0.2], omega: vec![0.0, 0.0] }],
            delta,
            None,
        )
        .unwrap();
        // {|x + 2ty − ω| < δ}: a disc of radius δ in every t-slice
        let want = std::f64::consts::PI * delta * delta;
        let got = tf.tube_volume(0);
        assert!((got / want - 1.0).abs() < 0.25, "{got} vs {want}");
        assert!(!tf.tubes[0].clipped);
    }

    #[test]
    fn separated_parallel_tubes_are_disjoint() {
        let phi = paraboloid();
        let delta = 1.0 / 32.0;
        let specs: Vec<TubeSpec> = (0..4)
            .flat_map(|i| {
                (0..4).map(move |j| TubeSpec {
                    key: vec![0.0, 0.0],
                    omega: vec![-0.3 + 0.2 * i as f64, -0.3 + 0.2 * j as f64],
                })
            })
            .collect();
        let tf = tube_rasterize(TubeSource::Phase(&phi), &specs, delta, None).unwrap();
        let sum: f64 = (0..specs.len()).map(|i| tf.tube_volume(i)).sum();
        assert_eq!(union_volume(&tf), sum);
        let twice =
            tube_rasterize(TubeSource::Phase(&phi), &[specs[0].clone(), specs[0].clone()], delta, None).unwrap();
        assert_eq!(union_volume(&twice), twice.tube_volume(0));
    }

    #[test]
    fn bush_shares_base_voxel() {
        let phi = PhaseField::named("bourgain").unwrap();
        let specs: Vec<TubeSpec> = (0..6)
            .map(|i| TubeSpec { key: vec![0.3 * (i as f64).cos(), 0.3 * (i as f64).sin()], omega: vec![0.01, 0.02] })
            .collect();
        let tf = tube_rasterize(TubeSource::Phase(&phi), &specs, 1.0 / 32.0, None).unwrap();
        for i in 0..specs.len() {
            assert!(tf.contains(i, &[0.01, 0.02, 0.0]));
        }
    }

    #[test]
    fn geodesic_tubes() {
        let m = MetricField::euclidean(3).unwrap();
        let delta = 1.0 / 16.0;
        let spec = TubeSpec { key: vec![0.0, 0.0, 1.0], omega: vec![0.0; 3] };
        let tf = tube_rasterize(TubeSource::Metric(&m), &[spec.clone()], delta, None).unwrap();
        let want = std::f64::consts::PI * delta * delta;
        assert!((tf.tube_volume(0) / want - 1.0).abs() < 0.25, "{}", tf.tube_volume(0));
        let tr = tube_rasterize(TubeSource::Metric(&m), &[spec], delta, Some(0.7)).unwrap();
        // only arclength ≥ 0.3 from the anchor survives, 0.2 on each side
        assert!(tr.tube_volume(0) < 0.55 * tf.tube_volume(0));
        assert!(!tr.contains(0, &[0.0, 0.0, 0.0]));
    }
}
