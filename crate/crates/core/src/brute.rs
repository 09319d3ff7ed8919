//! Exhaustive path-enumeration oracle, independent of the renewal engine.
//!
//! Sums the Gibbs weight over all `(2^d)^n` paths directly. Only feasible
//! for tiny instances (the precondition caps the path count at 2^24), which
//! is exactly its role: an independent ground truth for the dynamic
//! programming engine and the samplers.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::model::{Disorder, ModelParams};

/// Exact sums and path laws from full enumeration.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Partition sum Z over horizon n.
    pub z: f64,
    /// Pinned sum (paths ending at the origin); zero at odd horizons by
    /// parity.
    pub zhat: f64,
    /// Gibbs law of the endpoint w(n).
    pub endpoint_law: BTreeMap<Vec<i32>, f64>,
    /// Gibbs mean of the return count N_n.
    pub mean_returns: f64,
    /// Gibbs law of the full return skeleton (the set of times with
    /// w(i) = 0).
    pub skeleton_law: BTreeMap<Vec<usize>, f64>,
}

/// Enumerate every path of the directed walk and evaluate the partition
/// sums exactly. Requires `2^(d*n) <= 2^24`.
pub fn brute_force_partition(
    disorder: &Disorder,
    params: &ModelParams,
) -> Result<BruteForceResult, Error> {
    params.validate()?;
    let n = params.n;
    let d = params.d as usize;
    if disorder.len() < n {
        return Err(Error::HorizonMismatch {
            disorder: disorder.len(),
            requested: n,
        });
    }
    let bits = params.d * n as u32;
    if bits > 24 {
        return Err(Error::InstanceTooLarge { bits });
    }

    // Per-time weight factors, shared by all paths.
    let mut f_plus = Vec::with_capacity(n + 1);
    let mut f_minus = Vec::with_capacity(n + 1);
    f_plus.push(1.0);
    f_minus.push(1.0);
    for i in 1..=n {
        let x = params.lambda * (disorder.omega(i) as f64 + params.h);
        f_plus.push(x.exp());
        f_minus.push((-x).exp());
    }

    let path_prob = (0.5f64).powi(bits as i32);
    let mut acc = Accumulator {
        z: 0.0,
        zhat: 0.0,
        endpoint: BTreeMap::new(),
        returns_weighted: 0.0,
        skeleton: BTreeMap::new(),
    };
    let mut pos = vec![0i32; d];
    let mut returns = Vec::new();
    recurse(
        disorder,
        params,
        &f_plus,
        &f_minus,
        path_prob,
        1,
        &mut pos,
        1.0,
        &mut returns,
        &mut acc,
    );

    let z = acc.z;
    let endpoint_law = acc
        .endpoint
        .into_iter()
        .map(|(k, w)| (k, w / z))
        .collect();
    let skeleton_law = acc
        .skeleton
        .into_iter()
        .map(|(k, w)| (k, w / z))
        .collect();
    Ok(BruteForceResult {
        z,
        zhat: acc.zhat,
        endpoint_law,
        mean_returns: acc.returns_weighted / z,
        skeleton_law,
    })
}

struct Accumulator {
    z: f64,
    zhat: f64,
    endpoint: BTreeMap<Vec<i32>, f64>,
    returns_weighted: f64,
    skeleton: BTreeMap<Vec<usize>, f64>,
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    disorder: &Disorder,
    params: &ModelParams,
    f_plus: &[f64],
    f_minus: &[f64],
    path_prob: f64,
    t: usize,
    pos: &mut Vec<i32>,
    weight: f64,
    returns: &mut Vec<usize>,
    acc: &mut Accumulator,
) {
    let d = params.d as usize;
    for mask in 0u32..(1 << d) {
        for (c, x) in pos.iter_mut().enumerate() {
            *x += if (mask >> c) & 1 == 1 { 1 } else { -1 };
        }
        let at_origin = pos.iter().all(|&x| x == 0);
        let factor = if at_origin && disorder.eta(t) == 1 {
            f_minus[t]
        } else {
            f_plus[t]
        };
        let w = weight * factor;
        if at_origin {
            returns.push(t);
        }
        if t == params.n {
            let contrib = w * path_prob;
            acc.z += contrib;
            if at_origin {
                acc.zhat += contrib;
            }
            *acc.endpoint.entry(pos.clone()).or_insert(0.0) += contrib;
            acc.returns_weighted += contrib * returns.len() as f64;
            *acc.skeleton.entry(returns.clone()).or_insert(0.0) += contrib;
        } else {
            recurse(
                disorder, params, f_plus, f_minus, path_prob, t + 1, pos, w, returns, acc,
            );
        }
        if at_origin {
            returns.pop();
        }
        for (c, x) in pos.iter_mut().enumerate() {
            *x -= if (mask >> c) & 1 == 1 { 1 } else { -1 };
        }
    }
}
