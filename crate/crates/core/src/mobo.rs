//! Multi-objective decision layer: Pareto bookkeeping, exact hypervolume,
//! Monte-Carlo log-EHVI and the acquisition optimizers.
//!
//! All objective vectors follow the maximization convention.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::gp::{PosteriorGaussian, Standardization};
use crate::linalg::psd_factor;
use crate::seeding::{derive_seed, purpose, rng_for};

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionConfig {
    pub mc_samples: usize,
    pub base_seed: u64,
    pub continuous_restarts: usize,
    pub init_samples: usize,
    pub interleave_rounds: usize,
    pub discrete_candidates: usize,
    pub log_floor: f64,
    /// Initial pattern-search step as a fraction of each coordinate's range.
    pub pattern_step: f64,
    pub pattern_halvings: usize,
    pub reference_fraction: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            mc_samples: 128,
            base_seed: 0,
            continuous_restarts: 2,
            init_samples: 512,
            interleave_rounds: 5,
            discrete_candidates: 1 << 14,
            log_floor: 1e-12,
            pattern_step: 0.1,
            pattern_halvings: 8,
            reference_fraction: 0.1,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.mc_samples,
            self.continuous_restarts,
            self.init_samples,
            self.interleave_rounds,
            self.discrete_candidates,
        ];
        if counts.contains(&0) {
            return invalid("acquisition counts must be positive");
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return invalid("log_floor must be positive");
        }
        if !(self.pattern_step > 0.0 && self.pattern_step <= 1.0) {
            return invalid("pattern_step must lie in (0, 1]");
        }
        if !(self.reference_fraction >= 0.0 && self.reference_fraction.is_finite()) {
            return invalid("reference_fraction must be non-negative");
        }
        Ok(())
    }
}

/// Per-column standardization with the sample (N-1) standard deviation.
pub fn standardize(y: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Standardization)> {
    let Some(first) = y.first() else {
        return invalid("cannot standardize zero rows");
    };
    let o = first.len();
    if y.iter().any(|r| r.len() != o || r.iter().any(|v| !v.is_finite())) {
        return invalid("standardize needs finite rows of equal length");
    }
    let t = Standardization::fit(y, o);
    Ok((y.iter().map(|r| t.apply(r)).collect(), t))
}

/// `a` dominates `b`: at least as good everywhere and not equal.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a != b
}

/// Non-dominated subset in first-occurrence order, exact duplicates removed.
pub fn pareto_front(y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut front: Vec<Vec<f64>> = Vec::new();
    for (i, p) in y.iter().enumerate() {
        if y.iter().any(|q| dominates(q, p)) || y[..i].contains(p) {
            continue;
        }
        front.push(p.clone());
    }
    front
}

pub fn infer_reference_point(front: &[Vec<f64>], fraction: f64) -> Result<Vec<f64>> {
    let Some(first) = front.first() else {
        return invalid("reference point needs a nonempty front");
    };
    Ok((0..first.len())
        .map(|o| {
            let nadir = front.iter().map(|p| p[o]).fold(f64::INFINITY, f64::min);
            let ideal = front.iter().map(|p| p[o]).fold(f64::NEG_INFINITY, f64::max);
            let range = ideal - nadir;
            if range > 0.0 {
                nadir - fraction * range
            } else {
                nadir - fraction * nadir.abs().max(1.0)
            }
        })
        .collect())
}

/// Exact hypervolume dominated by `points` above `reference`, for 1 to 4 objectives.
///
/// Points are clipped to the reference first, so any point below it contributes nothing.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    let o = reference.len();
    if !(1..=4).contains(&o) {
        return invalid(format!("hypervolume supports 1 to 4 objectives, got {o}"));
    }
    if points.iter().any(|p| p.len() != o) {
        return invalid("point and reference lengths differ");
    }
    let clipped: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(reference).map(|(v, r)| v.max(*r)).collect::<Vec<f64>>())
        .filter(|p: &Vec<f64>| p.iter().zip(reference).all(|(v, r)| v > r))
        .collect();
    let mut front = pareto_front(&clipped);
    Ok(hv_sweep(&mut front, reference, o))
}

fn hv_sweep(pts: &mut [Vec<f64>], r: &[f64], d: usize) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    let k = d - 1;
    if d == 1 {
        return pts.iter().map(|p| p[0]).fold(r[0], f64::max) - r[0];
    }
    pts.sort_by(|a, b| b[k].total_cmp(&a[k]));
    if d == 2 {
        let mut best = r[0];
        let mut area = 0.0;
        for i in 0..pts.len() {
            best = best.max(pts[i][0]);
            let next = pts.get(i + 1).map_or(r[1], |p| p[1]);
            area += (pts[i][1] - next) * (best - r[0]);
        }
        return area;
    }
    let mut vol = 0.0;
    for i in 0..pts.len() {
        let next = pts.get(i + 1).map_or(r[k], |p| p[k]);
        let h = pts[i][k] - next;
        if h > 0.0 {
            let mut slice: Vec<Vec<f64>> = pts[..=i].iter().map(|p| p[..k].to_vec()).collect();
            vol += h * hv_sweep(&mut slice, r, k);
        }
    }
    vol
}

pub fn hv_gap(hv: f64, best_hv: f64) -> f64 {
    (best_hv - hv).max(0.0)
}

/// Front, reference and cached hypervolume.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoState {
    points: Vec<Vec<f64>>,
    reference: Vec<f64>,
    hypervolume: f64,
}

impl ParetoState {
    /// Front of `y` against an explicit reference.
    pub fn new(y: &[Vec<f64>], reference: Vec<f64>) -> Result<Self> {
        let points = pareto_front(y);
        let hypervolume = hypervolume(&points, &reference)?;
        Ok(Self { points, reference, hypervolume })
    }

    /// Front of `y` with the reference inferred by backing off from the nadir.
    pub fn inferred(y: &[Vec<f64>], fraction: f64) -> Result<Self> {
        let points = pareto_front(y);
        let reference = infer_reference_point(&points, fraction)?;
        let hypervolume = hypervolume(&points, &reference)?;
        Ok(Self { points, reference, hypervolume })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn hypervolume(&self) -> f64 {
        self.hypervolume
    }

    pub fn objectives(&self) -> usize {
        self.reference.len()
    }

    /// Exact hypervolume gained by adding `y`.
    pub fn improvement(&self, y: &[f64]) -> f64 {
        let r = &self.reference;
        let y: Vec<f64> = y.iter().zip(r).map(|(v, r)| v.max(*r)).collect();
        if y.iter().zip(r).any(|(v, r)| v <= r) || self.points.iter().any(|p| p.iter().zip(&y).all(|(a, b)| a >= b)) {
            return 0.0;
        }
        let boxvol: f64 = y.iter().zip(r).map(|(v, r)| v - r).product();
        let mut capped: Vec<Vec<f64>> =
            self.points.iter().map(|p| p.iter().zip(&y).map(|(a, b)| a.min(*b)).collect()).collect();
        capped.retain(|p: &Vec<f64>| p.iter().zip(r).all(|(v, r)| v > r));
        let mut capped = pareto_front(&capped);
        (boxvol - hv_sweep(&mut capped, r, r.len())).max(0.0)
    }
}

/// Fixed standard-normal draws reused across candidates (common random numbers).
#[derive(Debug, Clone)]
pub struct McBase {
    z: DMatrix<f64>,
}

impl McBase {
    pub fn new(samples: usize, objectives: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[purpose::MC_BASE, objectives as u64]);
        let z = DMatrix::from_fn(objectives, samples, |_, _| StandardNormal.sample(&mut rng));
        Self { z }
    }

    pub fn for_config(cfg: &AcquisitionConfig, objectives: usize) -> Self {
        Self::new(cfg.mc_samples, objectives, cfg.base_seed)
    }

    pub fn samples(&self) -> usize {
        self.z.ncols()
    }
}

/// Mean hypervolume improvement over the base draws and its Monte-Carlo standard error.
pub fn ehvi_stats(post: &PosteriorGaussian, state: &ParetoState, base: &McBase) -> Result<(f64, f64)> {
    let o = state.objectives();
    if post.len() != o || base.z.nrows() != o {
        return invalid(format!("posterior has {} entries, front has {o} objectives", post.len()));
    }
    let l = psd_factor(&post.covariance, 1e-10)?;
    let s = base.samples();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut y = DVector::zeros(o);
    for k in 0..s {
        y.copy_from(&post.mean);
        y.gemv(1.0, &l, &base.z.column(k), 1.0);
        let v = state.improvement(y.as_slice());
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / s as f64;
    let se = if s > 1 { ((sumsq / s as f64 - mean * mean).max(0.0) * s as f64 / (s - 1) as f64 / s as f64).sqrt() } else { 0.0 };
    Ok((mean, se))
}

pub fn log_ehvi_with_base(post: &PosteriorGaussian, state: &ParetoState, base: &McBase, log_floor: f64) -> Result<f64> {
    let (mean, _) = ehvi_stats(post, state, base)?;
    Ok(mean.max(log_floor).ln())
}

/// `log(max(MC mean HVI, log_floor))` for a single candidate's joint posterior over objectives.
pub fn log_ehvi(post: &PosteriorGaussian, state: &ParetoState, cfg: &AcquisitionConfig) -> Result<f64> {
    log_ehvi_with_base(post, state, &McBase::for_config(cfg, state.objectives()), cfg.log_floor)
}

fn clean(v: f64) -> f64 {
    if v.is_nan() { f64::NEG_INFINITY } else { v }
}

#[cfg(feature = "parallel")]
fn eval_all(af: &(dyn Fn(&[f64]) -> f64 + Sync), pts: &[Vec<f64>]) -> Vec<f64> {
    use rayon::prelude::*;
    pts.par_iter().map(|p| clean(af(p))).collect()
}

#[cfg(not(feature = "parallel"))]
fn eval_all(af: &(dyn Fn(&[f64]) -> f64 + Sync), pts: &[Vec<f64>]) -> Vec<f64> {
    pts.iter().map(|p| clean(af(p))).collect()
}

fn pattern_search(
    af: &(dyn Fn(&[f64]) -> f64 + Sync),
    bounds: &[(f64, f64)],
    mut x: Vec<f64>,
    mut fx: f64,
    cfg: &AcquisitionConfig,
) -> (Vec<f64>, f64) {
    let mut step: Vec<f64> = bounds.iter().map(|(lo, hi)| cfg.pattern_step * (hi - lo)).collect();
    let mut halvings = 0;
    while halvings <= cfg.pattern_halvings {
        let mut moved = false;
        for d in 0..x.len() {
            for dir in [1.0, -1.0] {
                let cand = (x[d] + dir * step[d]).clamp(bounds[d].0, bounds[d].1);
                if cand == x[d] {
                    continue;
                }
                let old = std::mem::replace(&mut x[d], cand);
                let v = clean(af(&x));
                if v > fx {
                    fx = v;
                    moved = true;
                    break;
                }
                x[d] = old;
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s *= 0.5);
            halvings += 1;
        }
    }
    (x, fx)
}

/// Random sampling followed by pattern-search refinement of the best few samples.
///
/// Returns the best point with its value. Non-finite values count as `-inf`.
pub fn optimize_acquisition_continuous(
    af: &(dyn Fn(&[f64]) -> f64 + Sync),
    bounds: &[(f64, f64)],
    cfg: &AcquisitionConfig,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return invalid("acquisition bounds must be a nonempty finite box");
    }
    let mut rng = rng_for(seed, &[purpose::ACQ_INIT]);
    let samples: Vec<Vec<f64>> = (0..cfg.init_samples)
        .map(|_| bounds.iter().map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..hi) }).collect())
        .collect();
    let values = eval_all(af, &samples);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut best = (samples[order[0]].clone(), values[order[0]]);
    for &i in order.iter().take(cfg.continuous_restarts) {
        if values[i] == f64::NEG_INFINITY {
            break;
        }
        let (x, v) = pattern_search(af, bounds, samples[i].clone(), values[i], cfg);
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedSpace {
    pub cardinalities: Vec<usize>,
    pub continuous: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedResult {
    pub discrete: Vec<usize>,
    pub continuous: Vec<f64>,
    pub value: f64,
    /// Incumbent value after each round.
    pub history: Vec<f64>,
}

/// Alternates discrete candidate search and continuous refinement for a fixed number of rounds.
pub fn optimize_acquisition_mixed(
    af: &(dyn Fn(&[usize], &[f64]) -> f64 + Sync),
    space: &MixedSpace,
    cfg: &AcquisitionConfig,
    seed: u64,
) -> Result<MixedResult> {
    cfg.validate()?;
    if space.continuous.is_empty() {
        return invalid("mixed space needs at least one continuous dimension");
    }
    if space.cardinalities.contains(&0) {
        return invalid("discrete cardinalities must be positive");
    }
    if space.cardinalities.is_empty() {
        let (x, v) = optimize_acquisition_continuous(&|x: &[f64]| af(&[], x), &space.continuous, cfg, derive_seed(seed, &[0]))?;
        return Ok(MixedResult { discrete: vec![], continuous: x, value: v, history: vec![v] });
    }

    let mut rng = rng_for(seed, &[purpose::ACQ_INIT]);
    let mut cont: Vec<f64> = space.continuous.iter().map(|&(lo, hi)| if lo == hi { lo } else { rng.random_range(lo..hi) }).collect();
    let mut disc = vec![0usize; space.cardinalities.len()];
    let mut value = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(cfg.interleave_rounds);

    let total: Option<usize> = space.cardinalities.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
    let enumerate = total.is_some_and(|t| t <= cfg.discrete_candidates);

    for round in 0..cfg.interleave_rounds {
        let consider = |cand: &[usize], cont: &[f64], disc: &mut Vec<usize>, value: &mut f64| {
            let v = clean(af(cand, cont));
            if v > *value {
                *value = v;
                disc.copy_from_slice(cand);
            }
        };
        if enumerate {
            let mut cand = vec![0usize; space.cardinalities.len()];
            'outer: loop {
                consider(&cand, &cont, &mut disc, &mut value);
                for d in (0..cand.len()).rev() {
                    cand[d] += 1;
                    if cand[d] < space.cardinalities[d] {
                        continue 'outer;
                    }
                    cand[d] = 0;
                }
                break;
            }
        } else {
            let mut drng = rng_for(seed, &[purpose::ACQ_DISCRETE, round as u64]);
            for _ in 0..cfg.discrete_candidates {
                let cand: Vec<usize> = space.cardinalities.iter().map(|&c| drng.random_range(0..c)).collect();
                consider(&cand, &cont, &mut disc, &mut value);
            }
        }
        let fixed = disc.clone();
        let (x, v) = optimize_acquisition_continuous(&|x: &[f64]| af(&fixed, x), &space.continuous, cfg, derive_seed(seed, &[round as u64]))?;
        if v > value {
            value = v;
            cont = x;
        }
        history.push(value);
    }
    Ok(MixedResult { discrete: disc, continuous: cont, value, history })
}
