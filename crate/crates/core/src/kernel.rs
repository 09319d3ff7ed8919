//! Disorder-free combinatorics of the directed walk.
//!
//! Each of the `d` transverse coordinates steps ±1 per time unit, so the
//! position is a product of independent simple walks and the probability of
//! being back at the origin after `2k` steps is `(C(2k,k)/4^k)^d`. First
//! returns (`b`), survival probabilities (`a`) and the escape probability
//! all derive from that single sequence through the renewal equation.

use crate::error::Error;
use crate::rng::{rng_stream, tag};
use rand::RngCore;

/// below this, first-return masses are clamped to zero (subnormal noise
/// otherwise pollutes the skeleton sampler)
const B_CLAMP: f64 = 1e-300;

/// Precomputed return / first-return / survival tables for one dimension
/// count. Immutable once built; share read-only across workers.
#[derive(Debug, Clone)]
pub struct WalkKernel {
    d: u32,
    n_max: usize,
    /// p[k] = P[walk at origin at time 2k], k = 0..=n_max
    p_tab: Vec<f64>,
    /// b[k] = P[first return to origin at time 2k], b[0] = 0
    b_tab: Vec<f64>,
    /// a[m] = P[no return within m steps], all integer m = 0..=2*n_max
    a_tab: Vec<f64>,
    alpha: f64,
    alpha_error: f64,
    clamped: usize,
}

/// Escape probability estimate with its reported error bound.
#[derive(Debug, Clone, Copy)]
pub struct EscapeEstimate {
    pub alpha: f64,
    /// Certified bound on the truncation error (the true value lies in
    /// `[alpha - error, alpha]`). Never silently dropped: callers compare it
    /// against their tolerance.
    pub error: f64,
    pub terms: usize,
    pub within_tolerance: bool,
}

/// Ratio table a_{2k}/b_k with a fitted growth exponent and the smallest
/// polynomial constant valid on the table.
#[derive(Debug, Clone)]
pub struct RatioGrowth {
    pub ratios: Vec<f64>,
    /// least-squares slope of log(ratio) against log(k)
    pub slope: f64,
    /// smallest c1 with a_{2k}/b_k <= c1 * k^d at every tabulated k
    pub c1: f64,
}

impl WalkKernel {
    /// Build all tables up to first-return index `n_max` (survival table up
    /// to `2*n_max` steps). The escape probability is refined past `n_max`
    /// with a cheap series extension.
    pub fn build(d: u32, n_max: usize) -> WalkKernel {
        assert!(d >= 1 && n_max >= 1);
        let mut p_tab = Vec::with_capacity(n_max + 1);
        // r_k = C(2k,k)/4^k by the multiplicative recurrence; factorials
        // would overflow past k ~ 500.
        let mut r = 1.0f64;
        for k in 0..=n_max {
            if k > 0 {
                r *= (2.0 * k as f64 - 1.0) / (2.0 * k as f64);
            }
            p_tab.push(r.powi(d as i32));
        }

        // Renewal inversion: b_k = p_k - sum_{j<k} b_j p_{k-j}.
        let mut b_tab = vec![0.0f64; n_max + 1];
        let mut clamped = 0usize;
        for k in 1..=n_max {
            let mut acc = p_tab[k];
            for j in 1..k {
                acc -= b_tab[j] * p_tab[k - j];
            }
            if acc < B_CLAMP {
                b_tab[k] = 0.0;
                clamped += 1;
            } else {
                b_tab[k] = acc;
            }
        }

        // a[m] = 1 - sum of first-return mass at even times <= m; returns
        // only happen at even times, so odd m repeats the previous value.
        let mut a_tab = Vec::with_capacity(2 * n_max + 1);
        a_tab.push(1.0);
        for m in 1..=2 * n_max {
            let prev = *a_tab.last().unwrap();
            let val = if m % 2 == 0 { prev - b_tab[m / 2] } else { prev };
            a_tab.push(val);
        }

        let esc = escape_probability(d, n_max.max(1_000_000), 1e-4);
        WalkKernel {
            d,
            n_max,
            p_tab,
            b_tab,
            a_tab,
            alpha: esc.alpha,
            alpha_error: esc.error,
            clamped,
        }
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Largest tabulated first-return index.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Largest walk horizon (in steps) the survival table covers.
    pub fn max_steps(&self) -> usize {
        2 * self.n_max
    }

    #[inline]
    pub fn p(&self, k: usize) -> f64 {
        self.p_tab[k]
    }

    #[inline]
    pub fn b(&self, k: usize) -> f64 {
        self.b_tab[k]
    }

    #[inline]
    pub fn a(&self, m: usize) -> f64 {
        self.a_tab[m]
    }

    pub fn p_slice(&self) -> &[f64] {
        &self.p_tab
    }

    pub fn b_slice(&self) -> &[f64] {
        &self.b_tab
    }

    pub fn a_slice(&self) -> &[f64] {
        &self.a_tab
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_error(&self) -> f64 {
        self.alpha_error
    }

    /// Number of first-return entries clamped to zero.
    pub fn clamped_entries(&self) -> usize {
        self.clamped
    }

    pub fn require_steps(&self, steps: usize) -> Result<(), Error> {
        if self.max_steps() < steps {
            Err(Error::KernelHorizon {
                have: self.max_steps(),
                need: steps,
            })
        } else {
            Ok(())
        }
    }

    /// Rebuild p from b through the renewal identity and report the largest
    /// relative deviation over 1..=k_max.
    pub fn renewal_reconstruction_error(&self, k_max: usize) -> f64 {
        let k_max = k_max.min(self.n_max);
        let mut worst = 0.0f64;
        for k in 1..=k_max {
            let mut rebuilt = 0.0;
            for j in 1..=k {
                rebuilt += self.b_tab[j] * self.p_tab[k - j];
            }
            let rel = (rebuilt - self.p_tab[k]).abs() / self.p_tab[k];
            if rel > worst {
                worst = rel;
            }
        }
        worst
    }
}

/// Escape probability `alpha(d)`: the chance the walk never revisits the
/// origin. Recurrent dimensions (d <= 2) return 0 by definition; for d >= 3
/// the value is `1 / sum_k p_k` with the series tail bounded by integral
/// comparison against `sum (pi k)^(-d/2)`.
pub fn escape_probability(d: u32, n_max: usize, tail_tol: f64) -> EscapeEstimate {
    if d <= 2 {
        return EscapeEstimate {
            alpha: 0.0,
            error: 0.0,
            terms: 0,
            within_tolerance: true,
        };
    }
    let mut partial = 0.0f64;
    let mut r = 1.0f64;
    for k in 0..=n_max {
        if k > 0 {
            r *= (2.0 * k as f64 - 1.0) / (2.0 * k as f64);
        }
        partial += r.powi(d as i32);
    }
    // C(2k,k)/4^k <= 1/sqrt(pi k), so the tail past K is at most
    // pi^(-d/2) * K^(1-d/2) / (d/2 - 1).
    let half_d = d as f64 / 2.0;
    let tail = std::f64::consts::PI.powf(-half_d) * (n_max as f64).powf(1.0 - half_d)
        / (half_d - 1.0);
    let alpha = 1.0 / partial;
    let error = tail / (partial * (partial + tail));
    EscapeEstimate {
        alpha,
        error,
        terms: n_max + 1,
        within_tolerance: error <= tail_tol,
    }
}

/// Monte Carlo cross-check of the escape probability: the fraction of
/// `walks` independent walks of `steps` steps that never revisit the origin.
/// Returns `(fraction, standard_error)`.
pub fn mc_escape_probability(d: u32, walks: usize, steps: usize, seed: u64) -> (f64, f64) {
    assert!((1..=21).contains(&d), "bit-buffer sampler supports d <= 21");
    let mut rng = rng_stream(seed, &[tag::MONTE_CARLO]);
    let mut survived = 0usize;
    let mut pos = vec![0i64; d as usize];
    let steps_per_word = 64 / d as usize;
    for _ in 0..walks {
        pos.iter_mut().for_each(|x| *x = 0);
        let mut alive = true;
        let mut t = 0usize;
        'walk: while t < steps {
            let mut bits = rng.next_u64();
            let batch = steps_per_word.min(steps - t);
            for _ in 0..batch {
                t += 1;
                let mut any_nonzero = false;
                for x in pos.iter_mut() {
                    *x += if bits & 1 == 1 { 1 } else { -1 };
                    bits >>= 1;
                    any_nonzero |= *x != 0;
                }
                if !any_nonzero {
                    alive = false;
                    break 'walk;
                }
            }
        }
        if alive {
            survived += 1;
        }
    }
    let frac = survived as f64 / walks as f64;
    let se = (frac * (1.0 - frac) / walks as f64).sqrt();
    (frac, se)
}

/// Growth of the survival/first-return ratio, fitted on `k = 1..=k_max`.
pub fn ratio_growth_check(kernel: &WalkKernel, k_max: usize) -> RatioGrowth {
    let k_max = k_max.min(kernel.n_max());
    let mut ratios = Vec::with_capacity(k_max);
    let mut c1 = 0.0f64;
    let mut log_k = Vec::new();
    let mut log_ratio = Vec::new();
    for k in 1..=k_max {
        let b = kernel.b(k);
        let ratio = if b > 0.0 { kernel.a(2 * k) / b } else { f64::INFINITY };
        ratios.push(ratio);
        if ratio.is_finite() {
            c1 = c1.max(ratio / (k as f64).powi(kernel.d() as i32));
            log_k.push((k as f64).ln());
            log_ratio.push(ratio.ln());
        }
    }
    let slope = if log_k.len() >= 2 {
        let ws = vec![1.0; log_k.len()];
        crate::numerics::weighted_line_fit(&log_k, &log_ratio, &ws).slope
    } else {
        f64::NAN
    };
    RatioGrowth { ratios, slope, c1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustively enumerate all (2^d)^steps walks and return the first
    /// return law: probs[k] = P[first origin return at time 2k]. A path
    /// whose first return happens at 2k is counted once per continuation,
    /// so counts[k] / (2^d)^steps equals b_k exactly.
    fn enumerate_first_returns(d: u32, steps: usize) -> Vec<f64> {
        let choices = 1usize << d;
        let total = (choices as f64).powi(steps as i32);
        let mut counts = vec![0u64; steps / 2 + 1];
        let mut path = vec![0usize; steps];
        'paths: loop {
            let mut pos = vec![0i64; d as usize];
            for (t, &step) in path.iter().enumerate() {
                for (c, x) in pos.iter_mut().enumerate() {
                    *x += if (step >> c) & 1 == 1 { 1 } else { -1 };
                }
                if pos.iter().all(|&x| x == 0) {
                    counts[t.div_ceil(2)] += 1;
                    break;
                }
            }
            let mut i = 0;
            loop {
                if i == path.len() {
                    break 'paths;
                }
                path[i] += 1;
                if path[i] == choices {
                    path[i] = 0;
                    i += 1;
                } else {
                    break;
                }
            }
        }
        counts.iter().map(|&c| c as f64 / total).collect()
    }

    #[test]
    fn p_table_small_values() {
        let k1 = WalkKernel::build(1, 8);
        assert_eq!(k1.p(0), 1.0);
        assert!((k1.p(1) - 0.5).abs() < 1e-15);
        assert!((k1.p(2) - 0.375).abs() < 1e-15);
        assert!((k1.p(3) - 5.0 / 16.0).abs() < 1e-15);
        let k3 = WalkKernel::build(3, 4);
        assert!((k3.p(1) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn first_return_values_match_enumeration() {
        // b1 = 1/2 = p1, b2 = 1/8, b3 = 1/16 in d = 1.
        let kernel = WalkKernel::build(1, 8);
        assert_eq!(kernel.b(1), kernel.p(1));
        assert!((kernel.b(1) - 0.5).abs() < 1e-15);
        assert!((kernel.b(2) - 0.125).abs() < 1e-15);
        assert!((kernel.b(3) - 0.0625).abs() < 1e-15);

        // Independent oracle: exhaustive enumeration of all paths.
        let steps = 8;
        let probs = enumerate_first_returns(1, steps);
        for k in 1..=steps / 2 {
            assert!(
                (probs[k] - kernel.b(k)).abs() < 1e-12,
                "b_{k}: enum {} vs table {}",
                probs[k],
                kernel.b(k)
            );
        }
    }

    #[test]
    fn first_return_values_match_enumeration_d2() {
        let kernel = WalkKernel::build(2, 3);
        let probs = enumerate_first_returns(2, 6);
        for k in 1..=3 {
            assert!((probs[k] - kernel.b(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_recurrence_matches_closed_form() {
        // Exact oracle where one exists: C(2k,k) fits f64 exactly up to
        // k = 25 and 4^k is a power of two, so the quotient is exact.
        let kernel = WalkKernel::build(1, 5000);
        for k in 1usize..=25 {
            let mut c = 1u128;
            for i in 0..k {
                c = c * (2 * k - i) as u128 / (i + 1) as u128;
            }
            let expect = c as f64 / 4f64.powi(k as i32);
            let rel = (kernel.p(k) - expect).abs() / expect;
            assert!(rel <= 1e-14, "k={k}: rel {rel:.2e}");
        }
        // Far past factorial range the only independent route is ln-gamma,
        // whose own cancellation limits the comparison to ~1e-9.
        use statrs::function::gamma::ln_gamma;
        for d in [1u32, 3] {
            let kd = WalkKernel::build(d, 5000);
            for k in [100usize, 1000, 5000] {
                let kf = k as f64;
                let log_c = ln_gamma(2.0 * kf + 1.0)
                    - 2.0 * ln_gamma(kf + 1.0)
                    - 2.0 * kf * std::f64::consts::LN_2;
                let expect = (d as f64 * log_c).exp();
                let rel = (kd.p(k) - expect).abs() / expect;
                assert!(rel <= 1e-9, "d={d} k={k}: rel {rel:.2e}");
            }
        }
    }

    #[test]
    fn renewal_identity_reconstructs_p() {
        for d in [1u32, 2, 3] {
            let kernel = WalkKernel::build(d, 512);
            assert!(
                kernel.renewal_reconstruction_error(512) <= 1e-12,
                "d = {d}"
            );
        }
    }

    #[test]
    fn survival_table_is_monotone_and_consistent() {
        let kernel = WalkKernel::build(1, 256);
        for m in 1..=kernel.max_steps() {
            assert!(kernel.a(m) <= kernel.a(m - 1) + 1e-15);
        }
        // a_4 = 1 - b1 - b2 = 3/8 in d = 1
        assert!((kernel.a(4) - 0.375).abs() < 1e-15);
        assert_eq!(kernel.a(1), 1.0);
        // b <= p pointwise, a bounded below by alpha
        for k in 1..=256 {
            assert!(kernel.b(k) <= kernel.p(k) + 1e-15);
        }
        let k3 = WalkKernel::build(3, 256);
        assert!(k3.a(k3.max_steps()) >= k3.alpha() - k3.alpha_error() - 1e-12);
    }

    #[test]
    fn escape_probability_by_dimension() {
        assert_eq!(escape_probability(1, 1000, 1e-3).alpha, 0.0);
        assert_eq!(escape_probability(2, 1000, 1e-3).alpha, 0.0);
        let est = escape_probability(3, 1_000_000, 1e-3);
        assert!(est.within_tolerance);
        assert!(
            (est.alpha - 0.7178).abs() < 3e-4,
            "alpha(3) = {}",
            est.alpha
        );
        // unachievable tolerance is reported, never silently dropped
        let coarse = escape_probability(3, 100, 1e-9);
        assert!(!coarse.within_tolerance);
        assert!(coarse.error > 1e-9);
    }

    #[test]
    fn escape_estimate_brackets_truth() {
        // The reported interval [alpha - error, alpha] at a coarse horizon
        // must contain the refined value.
        let coarse = escape_probability(3, 2_000, 1.0);
        let fine = escape_probability(3, 2_000_000, 1.0);
        assert!(fine.alpha <= coarse.alpha + 1e-15);
        assert!(fine.alpha >= coarse.alpha - coarse.error - 1e-15);
    }

    #[test]
    fn mc_escape_agrees_with_series() {
        // MC measures survival within a finite horizon; compare against the
        // exact finite-horizon value and against alpha with the horizon gap
        // added back, keeping the comparison unbiased.
        let kernel = WalkKernel::build(3, 2_000);
        let (frac, se) = mc_escape_probability(3, 20_000, 4_000, 11);
        assert!(
            (frac - kernel.a(4_000)).abs() <= 3.0 * se,
            "mc {frac} +- {se} vs a_4000 {}",
            kernel.a(4_000)
        );
        let est = escape_probability(3, 1_000_000, 1e-3);
        let horizon_gap = kernel.a(4_000) - est.alpha;
        assert!(horizon_gap >= -est.error);
        assert!((frac - est.alpha).abs() <= 3.0 * se + horizon_gap + est.error);
    }

    #[test]
    fn recurrent_first_return_mass_approaches_one() {
        let k500 = WalkKernel::build(1, 500);
        let k5000 = WalkKernel::build(1, 5000);
        let mass = |k: &WalkKernel, n: usize| k.b_slice()[1..=n].iter().sum::<f64>();
        let m500 = mass(&k500, 500);
        let m5000 = mass(&k5000, 5000);
        assert!(m5000 > m500);
        assert!(1.0 - m5000 < 0.02);
        let q500 = WalkKernel::build(2, 500);
        let q5000 = WalkKernel::build(2, 5000);
        assert!(mass(&q5000, 5000) > mass(&q500, 500));
    }

    #[test]
    fn ratio_growth_slopes() {
        let k1 = WalkKernel::build(1, 2000);
        let growth = ratio_growth_check(&k1, 2000);
        assert!(
            (growth.slope - 1.0).abs() <= 0.15,
            "d=1 slope {}",
            growth.slope
        );
        assert!(growth.c1.is_finite() && growth.c1 > 0.0);
        for (i, r) in growth.ratios.iter().enumerate() {
            let k = (i + 1) as f64;
            assert!(*r <= growth.c1 * k + 1e-9);
        }

        let k3 = WalkKernel::build(3, 2000);
        let growth3 = ratio_growth_check(&k3, 2000);
        assert!(growth3.slope <= 3.0 + 0.15, "d=3 slope {}", growth3.slope);
        assert!(growth3.c1.is_finite());
    }

    #[test]
    fn axis_avoidance_log_decay_vanishes() {
        // P[all coordinates nonzero up to n] = (a^(1)_n)^d decays
        // polynomially, so |log prob| / n <= C log(n)/n on the table.
        let k1 = WalkKernel::build(1, 2000);
        for d in [1u32, 2, 3] {
            for n in [16usize, 64, 256, 1024, 4000] {
                let log_prob = d as f64 * k1.a(n).ln();
                assert!(
                    log_prob.abs() <= 2.0 * d as f64 * (n as f64).ln(),
                    "d={d} n={n}"
                );
            }
        }
        // measured exponent (reported, not asserted against any stronger
        // rate): slope of log a_n vs log n should be near -1/2 for d = 1
        let xs: Vec<f64> = (1..=2000).map(|k| ((2 * k) as f64).ln()).collect();
        let ys: Vec<f64> = (1..=2000).map(|k| k1.a(2 * k).ln()).collect();
        let ws = vec![1.0; xs.len()];
        let fit = crate::numerics::weighted_line_fit(&xs, &ys, &ws);
        assert!(fit.slope < 0.0, "avoidance decays, slope {}", fit.slope);
    }
}
