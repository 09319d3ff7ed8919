//! Exact sampling from the quenched Gibbs measure.
//!
//! Sampling is exact, never Markov chain: the return skeleton is drawn
//! backward through the same renewal sums the partition engine computed (so
//! its law is exactly the Gibbs marginal on return times), and conditional
//! on the skeleton the excursions are uniform, filled by rejection.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::excursions::{sample_avoiding_segment, sample_excursion};
use crate::kernel::WalkKernel;
use crate::model::{Disorder, ModelParams};
use crate::numerics::{logsumexp2, mean_stderr};
use crate::partition::PartitionTables;
use crate::rng::{derive_seed, rng_stream, tag};

/// Skeleton attempts allowed when excursion fills keep exhausting their
/// rejection budget (only reachable for d <= 2 with very long gaps).
pub const SKELETON_RESAMPLE_CAP: usize = 100;

/// One polymer path with its return skeleton and observables.
#[derive(Debug, Clone)]
pub struct PathSample {
    d: u32,
    n: usize,
    returns: Vec<usize>,
    path: Vec<i32>,
    /// skeletons discarded due to fill rejection before this sample
    pub resamples: u32,
}

impl PathSample {
    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted even times in (0, n] at which the walk sits at the origin.
    pub fn returns(&self) -> &[usize] {
        &self.returns
    }

    pub fn n_returns(&self) -> usize {
        self.returns.len()
    }

    /// Last hitting time of the axis (0 if the walk never comes back).
    pub fn last_hit(&self) -> usize {
        self.returns.last().copied().unwrap_or(0)
    }

    #[inline]
    pub fn coord(&self, t: usize, c: usize) -> i32 {
        self.path[t * self.d as usize + c]
    }

    pub fn endpoint(&self) -> &[i32] {
        let d = self.d as usize;
        &self.path[self.n * d..(self.n + 1) * d]
    }

    pub fn at_origin(&self, t: usize) -> bool {
        let d = self.d as usize;
        self.path[t * d..(t + 1) * d].iter().all(|&x| x == 0)
    }

    /// Euclidean endpoint norm |w(n)|.
    pub fn endpoint_radius(&self) -> f64 {
        self.endpoint()
            .iter()
            .map(|&x| (x as f64) * (x as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Step constraint and skeleton consistency; checked on every sample in
    /// debug builds.
    pub fn validate(&self) -> bool {
        let d = self.d as usize;
        if self.path.len() != (self.n + 1) * d || !self.at_origin(0) {
            return false;
        }
        for t in 1..=self.n {
            for c in 0..d {
                if (self.coord(t, c) - self.coord(t - 1, c)).abs() != 1 {
                    return false;
                }
            }
        }
        let actual: Vec<usize> = (1..=self.n).filter(|&t| self.at_origin(t)).collect();
        actual == self.returns
    }
}

/// Draw the return skeleton with exactly the Gibbs marginal law. The last
/// return is drawn from the last-return decomposition of Z, then each
/// preceding return from the pinned renewal terms; all normalizers are the
/// computed sums, so no approximation enters.
pub fn sample_return_skeleton<R: Rng>(
    tables: &PartitionTables,
    disorder: &Disorder,
    params: &ModelParams,
    kernel: &WalkKernel,
    rng: &mut R,
) -> Vec<usize> {
    let n = params.n;
    let psihat = &tables.psihat;
    let a = kernel.a_slice();
    let b = kernel.b_slice();
    let lambda = params.lambda;
    let h = params.h;

    let mut returns = Vec::new();

    // last return L = 2j with mass psihat_j * a_{n-2j} (common scale and
    // field factors cancel)
    let denom: f64 = (0..=n / 2).map(|j| psihat[j] * a[n - 2 * j]).sum();
    let mut target = rng.random::<f64>() * denom;
    let mut cur = 0usize;
    for j in (0..=n / 2).rev() {
        let w = psihat[j] * a[n - 2 * j];
        if target <= w {
            cur = j;
            break;
        }
        target -= w;
    }

    // walk the renewal backward: predecessor of a return at 2k has mass
    // psihat_j * b_{k-j} * c_{2k}, which sums to exactly psihat_k
    while cur > 0 {
        returns.push(2 * cur);
        let k = cur;
        let c = if disorder.eta(2 * k) == 1 {
            (-2.0 * lambda * (disorder.omega(2 * k) as f64 + h)).exp()
        } else {
            1.0
        };
        let mut target = rng.random::<f64>() * psihat[k];
        let mut prev = 0usize;
        for j in (0..k).rev() {
            let w = psihat[j] * b[k - j] * c;
            if target <= w {
                prev = j;
                break;
            }
            target -= w;
        }
        cur = prev;
    }
    returns.reverse();
    returns
}

/// Fill a skeleton into a full path: uniform excursions between consecutive
/// returns, a uniform avoiding segment after the last one.
pub fn fill_path<R: Rng>(
    skeleton: &[usize],
    kernel: &WalkKernel,
    n: usize,
    rng: &mut R,
) -> Result<PathSample, Error> {
    let d = kernel.d() as usize;
    let mut path = vec![0i32; (n + 1) * d];
    let mut prev = 0usize;
    for &ret in skeleton {
        let gap = ret - prev;
        let exc = sample_excursion(kernel, gap, rng)?;
        for t in 1..=gap {
            for c in 0..d {
                path[(prev + t) * d + c] = exc.coord(t, c);
            }
        }
        prev = ret;
    }
    if prev < n {
        let seg = sample_avoiding_segment(kernel, n - prev, rng)?;
        for t in 1..=n - prev {
            for c in 0..d {
                path[(prev + t) * d + c] = seg.coord(t, c);
            }
        }
    }
    let sample = PathSample {
        d: kernel.d(),
        n,
        returns: skeleton.to_vec(),
        path,
        resamples: 0,
    };
    debug_assert!(sample.validate(), "fill_path produced an invalid sample");
    Ok(sample)
}

/// Draw one full path from the Gibbs measure: skeleton plus fill, resampling
/// the skeleton (up to [`SKELETON_RESAMPLE_CAP`] times) if a fill exhausts
/// its rejection budget.
pub fn sample_path<R: Rng>(
    tables: &PartitionTables,
    disorder: &Disorder,
    params: &ModelParams,
    kernel: &WalkKernel,
    rng: &mut R,
) -> Result<PathSample, Error> {
    let mut resamples = 0u32;
    for _ in 0..SKELETON_RESAMPLE_CAP {
        let skeleton = sample_return_skeleton(tables, disorder, params, kernel, rng);
        match fill_path(&skeleton, kernel, params.n, rng) {
            Ok(mut sample) => {
                sample.resamples = resamples;
                return Ok(sample);
            }
            Err(Error::RejectionBudget { .. }) => {
                resamples += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::SkeletonResampleCap {
        cap: SKELETON_RESAMPLE_CAP,
        attempts: resamples as usize,
    })
}

/// Exact endpoint law for d = 1 by spatial dynamic programming over (time,
/// position) in log space. Independent of the renewal engine; the sampler's
/// validation oracle.
#[derive(Debug, Clone)]
pub struct EndpointLaw1d {
    /// probability of endpoint z = idx - n, idx = 0..=2n
    pub probs: Vec<f64>,
    pub log_z: f64,
    pub n: usize,
}

impl EndpointLaw1d {
    pub fn prob_at(&self, z: i64) -> f64 {
        let idx = z + self.n as i64;
        if idx < 0 || idx > 2 * self.n as i64 {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }
}

pub fn exact_endpoint_law_1d(
    disorder: &Disorder,
    params: &ModelParams,
) -> Result<EndpointLaw1d, Error> {
    if params.d != 1 {
        return Err(Error::NotOneDimensional(params.d));
    }
    let n = params.n;
    if n > 4000 {
        return Err(Error::HorizonCap { n, cap: 4000 });
    }
    if disorder.len() < n {
        return Err(Error::HorizonMismatch {
            disorder: disorder.len(),
            requested: n,
        });
    }
    let width = 2 * n + 1;
    let origin = n as i64;
    let mut cur = vec![f64::NEG_INFINITY; width];
    let mut next = vec![f64::NEG_INFINITY; width];
    cur[origin as usize] = 0.0;
    let half_log = 0.5f64.ln();
    for t in 1..=n {
        let field = params.lambda * (disorder.omega(t) as f64 + params.h);
        let droplet = disorder.eta(t) == 1;
        for x in next.iter_mut() {
            *x = f64::NEG_INFINITY;
        }
        let lo = origin - t as i64;
        let hi = origin + t as i64;
        let mut idx = lo;
        while idx <= hi {
            let i = idx as usize;
            let from_left = if i > 0 { cur[i - 1] } else { f64::NEG_INFINITY };
            let from_right = if i + 1 < width { cur[i + 1] } else { f64::NEG_INFINITY };
            let base = logsumexp2(from_left, from_right);
            if base != f64::NEG_INFINITY {
                let delta = if idx == origin && droplet { -1.0 } else { 1.0 };
                next[i] = base + half_log + delta * field;
            }
            idx += 2;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut total = crate::numerics::LogSumExp::new();
    for &v in &cur {
        total.add(v);
    }
    let log_z = total.value();
    let probs = cur.iter().map(|&v| (v - log_z).exp()).collect();
    Ok(EndpointLaw1d { probs, log_z, n })
}

/// Quenched (fixed disorder) or annealed (fresh disorder per replica)
/// endpoint histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramMode {
    Quenched,
    Annealed,
}

/// Pooled endpoint histogram. For d = 1 the bins are signed endpoint
/// positions; for d >= 2 they are shells of |w(n)|/sqrt(n) with width 0.1.
#[derive(Debug, Clone)]
pub struct EndpointHistogram {
    pub mode: HistogramMode,
    pub d: u32,
    pub n: usize,
    pub samples: u64,
    pub bins: BTreeMap<i64, u64>,
    pub skeleton_resamples: u64,
    /// Reversed-time endpoint laws are realized through the forward
    /// measure (the partition sum is distribution-invariant under swapping
    /// the roles of origin and endpoint); this flag records the
    /// convention in exported metadata.
    pub forward_time_convention: bool,
}

pub const SHELL_WIDTH: f64 = 0.1;

impl EndpointHistogram {
    /// Fraction of samples with |z| strictly greater than `m` (d = 1).
    pub fn tail_mass_beyond(&self, m: i64) -> f64 {
        assert_eq!(self.d, 1, "position tails are d = 1 only");
        let cnt: u64 = self
            .bins
            .iter()
            .filter(|(&z, _)| z.abs() > m)
            .map(|(_, &c)| c)
            .sum();
        cnt as f64 / self.samples as f64
    }

    /// Counts folded over the sign of the position (d = 1).
    pub fn abs_counts(&self) -> BTreeMap<i64, u64> {
        assert_eq!(self.d, 1);
        let mut out = BTreeMap::new();
        for (&z, &c) in &self.bins {
            *out.entry(z.abs()).or_insert(0) += c;
        }
        out
    }

    /// Fraction of samples with |w(n)| > r * sqrt(n) (d >= 2 shells).
    pub fn shell_mass_beyond(&self, r: f64) -> f64 {
        assert!(self.d >= 2, "shell tails are d >= 2 only");
        let cutoff = (r / SHELL_WIDTH).floor() as i64;
        let cnt: u64 = self
            .bins
            .iter()
            .filter(|(&shell, _)| shell > cutoff)
            .map(|(_, &c)| c)
            .sum();
        cnt as f64 / self.samples as f64
    }
}

fn bin_key(sample: &PathSample, n: usize, d: u32) -> i64 {
    if d == 1 {
        sample.endpoint()[0] as i64
    } else {
        let r = sample.endpoint_radius() / (n as f64).sqrt();
        (r / SHELL_WIDTH).floor() as i64
    }
}

/// Pooled endpoint histogram over `replicas x samples_per_replica` exact
/// Gibbs samples. In quenched mode every replica samples the same disorder
/// realization (seeded from `(base_seed, 0)`); in annealed mode each replica
/// gets a fresh one.
pub fn endpoint_distribution(
    params: &ModelParams,
    kernel: &WalkKernel,
    replicas: usize,
    samples_per_replica: usize,
    mode: HistogramMode,
    base_seed: u64,
) -> Result<EndpointHistogram, Error> {
    if replicas == 0 {
        return Err(Error::InvalidParams("replicas must be >= 1".into()));
    }
    let quenched = match mode {
        HistogramMode::Quenched => {
            let disorder = Disorder::sample(params, derive_seed(base_seed, 0));
            let tables = PartitionTables::build(&disorder, params, kernel)?;
            Some((disorder, tables))
        }
        HistogramMode::Annealed => None,
    };

    type ReplicaBins = (BTreeMap<i64, u64>, u64);
    let per_replica: Result<Vec<ReplicaBins>, Error> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(base_seed, r as u64);
            let (disorder, tables);
            let (dis_ref, tab_ref) = match &quenched {
                Some((d, t)) => (d, t),
                None => {
                    disorder = Disorder::sample(params, seed);
                    tables = PartitionTables::build(&disorder, params, kernel)?;
                    (&disorder, &tables)
                }
            };
            let mut rng = rng_stream(seed, &[tag::SKELETON]);
            let mut bins = BTreeMap::new();
            let mut resamples = 0u64;
            for _ in 0..samples_per_replica {
                let sample = sample_path(tab_ref, dis_ref, params, kernel, &mut rng)?;
                resamples += sample.resamples as u64;
                *bins.entry(bin_key(&sample, params.n, params.d)).or_insert(0) += 1;
            }
            Ok((bins, resamples))
        })
        .collect();

    let mut bins = BTreeMap::new();
    let mut resamples = 0u64;
    for (local, res) in per_replica? {
        for (k, c) in local {
            *bins.entry(k).or_insert(0) += c;
        }
        resamples += res;
    }
    Ok(EndpointHistogram {
        mode,
        d: params.d,
        n: params.n,
        samples: (replicas * samples_per_replica) as u64,
        bins,
        skeleton_resamples: resamples,
        forward_time_convention: true,
    })
}

/// Mean return count with a confidence band, per horizon.
#[derive(Debug, Clone, Copy)]
pub struct ReturnCountStat {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Estimate the Gibbs-mean return count for each horizon in `n_list`,
/// pooling `replicas` disorder realizations with `samples` exact paths
/// each.
pub fn return_count_stats(
    params: &ModelParams,
    kernel: &WalkKernel,
    n_list: &[usize],
    replicas: usize,
    samples: usize,
    base_seed: u64,
) -> Result<Vec<ReturnCountStat>, Error> {
    let mut out = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let params_n = params.with_n(n);
        let per_replica: Result<Vec<Vec<f64>>, Error> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(base_seed, ((idx as u64) << 32) | r as u64);
                let disorder = Disorder::sample(&params_n, seed);
                let tables = PartitionTables::build(&disorder, &params_n, kernel)?;
                let mut rng = rng_stream(seed, &[tag::SKELETON]);
                let mut counts = Vec::with_capacity(samples);
                for _ in 0..samples {
                    let sample = sample_path(&tables, &disorder, &params_n, kernel, &mut rng)?;
                    counts.push(sample.n_returns() as f64);
                }
                Ok(counts)
            })
            .collect();
        let pooled: Vec<f64> = per_replica?.into_iter().flatten().collect();
        let (mean, stderr) = mean_stderr(&pooled);
        out.push(ReturnCountStat { n, mean, stderr });
    }
    Ok(out)
}

/// Exact Gibbs probability that the walk stays off the axis for the whole
/// horizon: `a_n / Ψ^n` (survival mass with the field factored out).
pub fn no_return_probability(tables: &PartitionTables, kernel: &WalkKernel) -> f64 {
    let n = tables.n();
    (kernel.a(n).ln() - tables.log_psi()[n]).exp()
}
