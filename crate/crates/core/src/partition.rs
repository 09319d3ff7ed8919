//! Exact log-space partition sums over the renewal structure.
//!
//! The droplet interaction differs from the free weight only on the axis, so
//! between returns the Gibbs factor is a deterministic function of the field
//! prefix sums and the spatial DP collapses to a one-dimensional recursion
//! over return times. In scaled variables `ψ̂_k = Ẑ^{2k} e^{-F(2k)}` (with
//! `F(m) = λ Σ_{i<=m}(ω_i + h)`):
//!
//! ```text
//! ψ̂_k = c_k Σ_{j<k} ψ̂_j b_{k-j},   c_k = exp{-2λ(ω_{2k}+h)} on droplets, else 1
//! Ψ^m = Σ_{2j<=m} ψ̂_j a_{m-2j}
//! ```
//!
//! The recursion runs in linear space with exact power-of-two rescaling
//! (`Z` grows like `e^{Φn}` and would overflow near n ≈ 700 otherwise);
//! logarithms are captured as each entry is produced, so every output is a
//! full-precision log value.

use rayon::prelude::*;

use crate::error::Error;
use crate::kernel::WalkKernel;
use crate::model::{Disorder, ModelParams};
use crate::numerics::mean_stderr;
use crate::rng::derive_seed;

/// Quadratic cost cap: a single table build is O(n^2).
pub const MAX_HORIZON: usize = 100_000;

const RESCALE_TRIGGER: f64 = 8.906874754309568e150; // 2^501.5
const RESCALE_FACTOR: f64 = 7.458340731200207e-155; // 2^-512
const RESCALE_SHIFT: i64 = 512;
const LN_2: f64 = std::f64::consts::LN_2;

/// Which free-endpoint sums a pass should evaluate.
enum FreeEval<'a> {
    None,
    All,
    At(&'a [usize]),
}

struct PassOutput {
    /// log Ẑ^{2k}, k = 0..=len/2
    log_zhat: Vec<f64>,
    /// scaled pinned values ψ̂_k * 2^{-shift}
    psihat: Vec<f64>,
    shift: i64,
    /// (m, log Z^m, log Ψ^m) at each requested m
    free: Vec<(usize, f64, f64)>,
    /// λ Σ (ω_i + h) over the window, index 0..=len
    cum_field: Vec<f64>,
}

/// One renewal pass over the disorder window `(start, start+len]`.
fn renewal_pass(
    disorder: &Disorder,
    params: &ModelParams,
    kernel: &WalkKernel,
    start: usize,
    len: usize,
    eval: FreeEval<'_>,
) -> Result<PassOutput, Error> {
    params.validate()?;
    if len > MAX_HORIZON {
        return Err(Error::HorizonCap {
            n: len,
            cap: MAX_HORIZON,
        });
    }
    if start + len > disorder.len() {
        return Err(Error::HorizonMismatch {
            disorder: disorder.len(),
            requested: start + len,
        });
    }
    kernel.require_steps(len)?;
    let lambda = params.lambda;
    let h = params.h;

    let mut cum_field = Vec::with_capacity(len + 1);
    cum_field.push(0.0);
    for i in 1..=len {
        let w = disorder.omega(start + i) as f64;
        cum_field.push(cum_field[i - 1] + lambda * (w + h));
    }

    let half = len / 2;
    let mut psihat = vec![0.0f64; half + 1];
    psihat[0] = 1.0;
    let mut shift: i64 = 0;
    let mut log_zhat = Vec::with_capacity(half + 1);
    log_zhat.push(0.0);

    let mut wanted: Vec<usize> = match eval {
        FreeEval::None => Vec::new(),
        FreeEval::All => (0..=len).collect(),
        FreeEval::At(ms) => ms.to_vec(),
    };
    wanted.sort_unstable();
    wanted.dedup();
    if let Some(&max) = wanted.last() {
        if max > len {
            return Err(Error::HorizonMismatch {
                disorder: len,
                requested: max,
            });
        }
    }
    let mut free = Vec::with_capacity(wanted.len());
    let mut next_wanted = wanted.iter().copied().peekable();
    if next_wanted.peek() == Some(&0) {
        free.push((0, 0.0, 0.0));
        next_wanted.next();
    }

    let b = kernel.b_slice();
    let a = kernel.a_slice();
    for m in 1..=len {
        if m % 2 == 0 {
            let k = m / 2;
            let mut dot = 0.0f64;
            for j in 0..k {
                dot += psihat[j] * b[k - j];
            }
            let c = if disorder.eta(start + m) == 1 {
                let w = disorder.omega(start + m) as f64;
                (-2.0 * lambda * (w + h)).exp()
            } else {
                1.0
            };
            let v = c * dot;
            debug_assert!(v > 0.0, "pinned mass vanished at k = {k}");
            psihat[k] = v;
            log_zhat.push(v.ln() + shift as f64 * LN_2 + cum_field[m]);
            if v > RESCALE_TRIGGER {
                // exact exponent shift, no rounding
                for x in psihat[..=k].iter_mut() {
                    *x *= RESCALE_FACTOR;
                }
                shift += RESCALE_SHIFT;
            }
        }
        if next_wanted.peek() == Some(&m) {
            next_wanted.next();
            let mut dot = 0.0f64;
            for j in 0..=m / 2 {
                dot += psihat[j] * a[m - 2 * j];
            }
            let log_psi = dot.ln() + shift as f64 * LN_2;
            free.push((m, log_psi + cum_field[m], log_psi));
        }
    }

    Ok(PassOutput {
        log_zhat,
        psihat,
        shift,
        free,
        cum_field,
    })
}

/// Log-space partition sums for one disorder realization: the pinned sums
/// `Ẑ^{2k}`, free sums `Z^m`, normalized sums `Ψ^m` and the field prefix,
/// all over the horizon `params.n`. Immutable once built.
#[derive(Debug, Clone)]
pub struct PartitionTables {
    params: ModelParams,
    log_zhat: Vec<f64>,
    log_z: Vec<f64>,
    log_psi: Vec<f64>,
    cum_field: Vec<f64>,
    pub(crate) psihat: Vec<f64>,
    pub(crate) shift: i64,
}

impl PartitionTables {
    /// Build all tables for `params.n` steps of the given disorder.
    pub fn build(
        disorder: &Disorder,
        params: &ModelParams,
        kernel: &WalkKernel,
    ) -> Result<PartitionTables, Error> {
        let n = params.n;
        let out = renewal_pass(disorder, params, kernel, 0, n, FreeEval::All)?;
        let mut log_z = Vec::with_capacity(n + 1);
        let mut log_psi = Vec::with_capacity(n + 1);
        for &(_, z, psi) in &out.free {
            log_z.push(z);
            log_psi.push(psi);
        }
        Ok(PartitionTables {
            params: *params,
            log_zhat: out.log_zhat,
            log_z,
            log_psi,
            cum_field: out.cum_field,
            psihat: out.psihat,
            shift: out.shift,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Accumulated power-of-two rescale exponent; nonzero exactly when the
    /// partition sums outgrew the linear f64 range during the build.
    pub fn rescale_exponent(&self) -> i64 {
        self.shift
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// log Ẑ^{2k} by first-return index k.
    pub fn log_zhat(&self) -> &[f64] {
        &self.log_zhat
    }

    /// log Ẑ at an even time.
    pub fn log_zhat_at(&self, time: usize) -> f64 {
        assert!(time.is_multiple_of(2), "pinned sums exist at even times only");
        self.log_zhat[time / 2]
    }

    /// log Z^m for m = 0..=n.
    pub fn log_z(&self) -> &[f64] {
        &self.log_z
    }

    /// log Ψ^m = log Z^m − F(m) for m = 0..=n.
    pub fn log_psi(&self) -> &[f64] {
        &self.log_psi
    }

    /// Field prefix F(m) = λ Σ_{i<=m}(ω_i + h).
    pub fn cum_field(&self) -> &[f64] {
        &self.cum_field
    }
}

/// log Ψ^m at selected horizons only (pinned pass plus one dot per entry);
/// far cheaper than a full build when only a few horizons are needed.
pub fn log_psi_at(
    disorder: &Disorder,
    params: &ModelParams,
    kernel: &WalkKernel,
    ms: &[usize],
) -> Result<Vec<(usize, f64)>, Error> {
    let out = renewal_pass(disorder, params, kernel, 0, params.n, FreeEval::At(ms))?;
    Ok(out.free.into_iter().map(|(m, _, psi)| (m, psi)).collect())
}

/// Pinned log partition sum over the window `(start, start+len]` with the
/// walk tied to the origin at both window ends.
pub fn pinned_window_log(
    disorder: &Disorder,
    params: &ModelParams,
    kernel: &WalkKernel,
    start: usize,
    len: usize,
) -> Result<f64, Error> {
    if !len.is_multiple_of(2) || len == 0 {
        return Err(Error::InvalidParams(format!(
            "pinned window length must be even and positive, got {len}"
        )));
    }
    let out = renewal_pass(disorder, params, kernel, start, len, FreeEval::None)?;
    Ok(*out.log_zhat.last().unwrap())
}

/// Result of the block superadditivity check: the full-horizon sums must
/// dominate the product of pinned blocks, exactly, on computed values.
#[derive(Debug, Clone, Copy)]
pub struct SuperadditivityCheck {
    /// log Ẑ^{kN} − Σ_j log Ẑ(block j)
    pub pinned_slack: f64,
    /// log Z^{kN} − Σ_j log Ẑ(block j)
    pub free_slack: f64,
}

impl SuperadditivityCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.pinned_slack >= -tol && self.free_slack >= -tol
    }
}

/// Check `Z` over horizon `blocks * block_len` against the product of
/// `blocks` pinned blocks (adding hitting points of the axis only shrinks
/// the path set, so both slacks are nonnegative up to rounding).
pub fn superadditivity_check(
    disorder: &Disorder,
    params: &ModelParams,
    kernel: &WalkKernel,
    block_len: usize,
    blocks: usize,
) -> Result<SuperadditivityCheck, Error> {
    if block_len == 0 || !block_len.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!(
            "block length must be even and positive, got {block_len}"
        )));
    }
    if blocks == 0 {
        return Err(Error::InvalidParams("need at least one block".into()));
    }
    let total = block_len * blocks;
    if total > params.n {
        return Err(Error::InvalidParams(format!(
            "blocks * block_len = {total} exceeds horizon n = {}",
            params.n
        )));
    }
    let out = renewal_pass(disorder, params, kernel, 0, total, FreeEval::At(&[total]))?;
    let log_z = out.free[0].1;
    let log_zhat = *out.log_zhat.last().unwrap();
    let mut product = 0.0;
    for j in 0..blocks {
        product += pinned_window_log(disorder, params, kernel, j * block_len, block_len)?;
    }
    Ok(SuperadditivityCheck {
        pinned_slack: log_zhat - product,
        free_slack: log_z - product,
    })
}

/// Closed form for the conditional one-step expectation of the normalized
/// sum: given the weighted probability `origin_arrival` of stepping onto the
/// axis, the disorder mean multiplies Ψ by
/// `1 − q·p·(1 − ½(e^{−2λ(1+h)} + e^{2λ(1−h)}))`, which is ≤ 1 exactly when
/// `e^{−2λ(1+h)} + e^{2λ(1−h)} ≤ 2`.
pub fn supermartingale_step_factor(params: &ModelParams, origin_arrival: f64) -> f64 {
    let lambda = params.lambda;
    let h = params.h;
    let bracket = 1.0 - 0.5 * ((-2.0 * lambda * (1.0 + h)).exp() + (2.0 * lambda * (1.0 - h)).exp());
    1.0 - origin_arrival * params.p * bracket
}

/// Headline numbers for one disorder replica at full horizon.
#[derive(Debug, Clone, Copy)]
pub struct ReplicaSummary {
    pub seed: u64,
    /// log Z^n
    pub log_z: f64,
    /// log Ẑ at the largest even time <= n
    pub log_zhat: f64,
    /// log Ψ^n
    pub log_psi: f64,
    /// (1/n) log Z^n
    pub phi: f64,
    /// (1/n') log Ẑ^{n'}
    pub phi_pinned: f64,
}

/// One fast pass per replica: seeds derive from `(base_seed, index)`.
pub fn replica_summaries(
    params: &ModelParams,
    kernel: &WalkKernel,
    replicas: usize,
    base_seed: u64,
) -> Result<Vec<ReplicaSummary>, Error> {
    if replicas == 0 {
        return Err(Error::InvalidParams("replicas must be >= 1".into()));
    }
    let n = params.n;
    let n_even = n - n % 2;
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(base_seed, r as u64);
            let disorder = Disorder::sample(params, seed);
            let out = renewal_pass(&disorder, params, kernel, 0, n, FreeEval::At(&[n]))?;
            let (_, log_z, log_psi) = out.free[0];
            let log_zhat = out.log_zhat[n_even / 2];
            Ok(ReplicaSummary {
                seed,
                log_z,
                log_zhat,
                log_psi,
                phi: log_z / n as f64,
                phi_pinned: log_zhat / n_even.max(1) as f64,
            })
        })
        .collect()
}

/// Free-energy estimate pooled over disorder replicas.
#[derive(Debug, Clone)]
pub struct FreeEnergyEstimate {
    /// mean of (1/n) log Z^n over replicas
    pub phi_hat: f64,
    pub stderr: f64,
    /// excess free energy estimate, identically phi_hat − λh
    pub psi_p_hat: f64,
    /// pinned cross-check: mean of (1/n') log Ẑ^{n'} at the largest even
    /// n' <= n
    pub phi_pinned_hat: f64,
    pub n: usize,
    pub replicas: usize,
    pub per_replica: Vec<f64>,
}

/// Estimate the free energy at `params` by averaging `(1/n) log Z^n` over
/// independent disorder replicas. Replica seeds come from
/// `(base_seed, replica_index)`, so results are independent of execution
/// order and worker count.
pub fn free_energy_estimate(
    params: &ModelParams,
    kernel: &WalkKernel,
    replicas: usize,
    base_seed: u64,
) -> Result<FreeEnergyEstimate, Error> {
    let rows = replica_summaries(params, kernel, replicas, base_seed)?;
    let per_replica: Vec<f64> = rows.iter().map(|r| r.phi).collect();
    let pinned: Vec<f64> = rows.iter().map(|r| r.phi_pinned).collect();
    let (phi_hat, stderr) = mean_stderr(&per_replica);
    let (phi_pinned_hat, _) = mean_stderr(&pinned);
    Ok(FreeEnergyEstimate {
        phi_hat,
        stderr,
        psi_p_hat: phi_hat - params.lambda * params.h,
        phi_pinned_hat,
        n: params.n,
        replicas,
        per_replica,
    })
}
