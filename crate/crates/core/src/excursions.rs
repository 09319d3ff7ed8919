//! Rejection samplers for the two conditioned walk pieces the path sampler
//! needs: excursions (origin to origin, strictly off-axis in between) and
//! avoiding segments (never back on the axis).
//!
//! Both are uniform over their path sets, which is exactly the Gibbs
//! conditional law between skeleton points: off the axis the weight factor
//! is path-independent.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Error;
use crate::kernel::WalkKernel;

/// Attempts allowed per excursion/segment before the caller is told to
/// resample its skeleton. Acceptance decays polynomially for d <= 2 and long
/// gaps; the budget turns a hang into a diagnosable event.
pub const REJECTION_BUDGET: usize = 1_000_000;

/// A walk piece anchored at the origin: `pos[t * d + c]` is coordinate `c`
/// after `t` steps, `t = 0..=len`.
#[derive(Debug, Clone)]
pub struct Segment {
    pub d: u32,
    pub len: usize,
    pub pos: Vec<i32>,
}

impl Segment {
    fn with_capacity(d: u32, len: usize) -> Segment {
        Segment {
            d,
            len,
            pos: vec![0; (len + 1) * d as usize],
        }
    }

    #[inline]
    pub fn coord(&self, t: usize, c: usize) -> i32 {
        self.pos[t * self.d as usize + c]
    }

    #[inline]
    pub fn at_origin(&self, t: usize) -> bool {
        let d = self.d as usize;
        self.pos[t * d..(t + 1) * d].iter().all(|&x| x == 0)
    }
}

/// Uniform ±1 bridge of length `2m` in one coordinate: a random shuffle of
/// m up-steps and m down-steps.
fn shuffle_bridge<R: Rng>(steps: &mut [i32], rng: &mut R) {
    let m = steps.len() / 2;
    for (i, s) in steps.iter_mut().enumerate() {
        *s = if i < m { 1 } else { -1 };
    }
    steps.shuffle(rng);
}

/// Sample a uniform excursion of even length `len = 2m`: starts and ends at
/// the origin and avoids it strictly in between. Sampling draws d
/// independent lattice bridges and rejects unless the joint position stays
/// off the origin; for `len = 2` the unique excursion shape is emitted
/// directly.
pub fn sample_excursion<R: Rng>(
    kernel: &WalkKernel,
    len: usize,
    rng: &mut R,
) -> Result<Segment, Error> {
    assert!(len >= 2 && len.is_multiple_of(2), "excursion length must be even and >= 2");
    let d = kernel.d() as usize;
    let mut seg = Segment::with_capacity(kernel.d(), len);
    if len == 2 {
        for c in 0..d {
            let step = if rng.random::<bool>() { 1 } else { -1 };
            seg.pos[d + c] = step;
        }
        return Ok(seg);
    }

    let mut steps: Vec<i32> = vec![0; len * d];
    'attempt: for attempt in 1..=REJECTION_BUDGET {
        for c in 0..d {
            shuffle_bridge(&mut steps[c * len..(c + 1) * len], rng);
        }
        // positions; joint origin visits can only happen at even times
        for t in 1..=len {
            for c in 0..d {
                seg.pos[t * d + c] = seg.pos[(t - 1) * d + c] + steps[c * len + t - 1];
            }
            if t % 2 == 0 && t < len && seg.at_origin(t) {
                continue 'attempt;
            }
        }
        debug_assert!(seg.at_origin(len));
        let _ = attempt;
        return Ok(seg);
    }
    Err(Error::RejectionBudget {
        attempts: REJECTION_BUDGET,
        len,
    })
}

/// Sample a uniform walk piece of `len` steps that never revisits the origin
/// after step 0. Rejection from the free walk; the acceptance rate is the
/// survival probability `a_len`.
pub fn sample_avoiding_segment<R: Rng>(
    kernel: &WalkKernel,
    len: usize,
    rng: &mut R,
) -> Result<Segment, Error> {
    assert!(len >= 1);
    let d = kernel.d() as usize;
    let mut seg = Segment::with_capacity(kernel.d(), len);
    'attempt: for attempt in 1..=REJECTION_BUDGET {
        for t in 1..=len {
            for c in 0..d {
                let step = if rng.random::<bool>() { 1 } else { -1 };
                seg.pos[t * d + c] = seg.pos[(t - 1) * d + c] + step;
            }
            if t % 2 == 0 && seg.at_origin(t) {
                continue 'attempt;
            }
        }
        let _ = attempt;
        return Ok(seg);
    }
    Err(Error::RejectionBudget {
        attempts: REJECTION_BUDGET,
        len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;
    use std::collections::HashMap;

    /// All 1-D excursion shapes of length `len`, by exhaustive enumeration.
    fn enumerate_excursions_1d(len: usize) -> Vec<Vec<i32>> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << len) {
            let mut pos = 0i32;
            let mut path = Vec::with_capacity(len);
            let mut ok = true;
            for t in 0..len {
                pos += if (mask >> t) & 1 == 1 { 1 } else { -1 };
                path.push(pos);
                if pos == 0 && t + 1 < len {
                    ok = false;
                    break;
                }
            }
            if ok && pos == 0 {
                out.push(path);
            }
        }
        out
    }

    #[test]
    fn length_two_excursion_is_fair() {
        let kernel = WalkKernel::build(1, 4);
        let mut rng = rng_stream(5, &[1]);
        let mut up = 0usize;
        let draws = 20_000;
        for _ in 0..draws {
            let seg = sample_excursion(&kernel, 2, &mut rng).unwrap();
            assert_eq!(seg.coord(0, 0), 0);
            assert_eq!(seg.coord(2, 0), 0);
            match seg.coord(1, 0) {
                1 => up += 1,
                -1 => {}
                other => panic!("impossible midpoint {other}"),
            }
        }
        let frac = up as f64 / draws as f64;
        assert!((frac - 0.5).abs() < 4.0 * 0.5 / (draws as f64).sqrt());
    }

    #[test]
    fn length_four_excursions_avoid_origin() {
        let kernel = WalkKernel::build(1, 4);
        let mut rng = rng_stream(6, &[1]);
        for _ in 0..2_000 {
            let seg = sample_excursion(&kernel, 4, &mut rng).unwrap();
            assert_ne!(seg.coord(2, 0), 0, "internal origin visit");
            assert_eq!(seg.coord(1, 0).abs(), 1);
            assert_eq!(seg.coord(2, 0).abs(), 2);
            assert_eq!(seg.coord(3, 0).abs(), 1);
            assert_eq!(seg.coord(4, 0), 0);
        }
        // exactly 2 of the 6 bridges avoid zero internally
        let shapes = enumerate_excursions_1d(4);
        assert_eq!(shapes.len(), 2);
    }

    #[test]
    fn excursion_shapes_are_uniform() {
        // Empirical shape frequencies against the enumerated uniform law
        // on every enumerable length, 4 sigma multinomial bands.
        let kernel = WalkKernel::build(1, 8);
        for (len, expect_shapes) in [(4usize, 2usize), (6, 4), (8, 10)] {
            let shapes = enumerate_excursions_1d(len);
            assert_eq!(shapes.len(), expect_shapes, "len {len}");
            let mut rng = rng_stream(7 + len as u64, &[1]);
            let draws = 100_000usize;
            let mut counts: HashMap<Vec<i32>, usize> = HashMap::new();
            for _ in 0..draws {
                let seg = sample_excursion(&kernel, len, &mut rng).unwrap();
                let path: Vec<i32> = (1..=len).map(|t| seg.coord(t, 0)).collect();
                *counts.entry(path).or_insert(0) += 1;
            }
            assert_eq!(counts.len(), shapes.len());
            let p = 1.0 / shapes.len() as f64;
            let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
            for shape in &shapes {
                let c = counts.get(shape).copied().unwrap_or(0) as f64;
                assert!(
                    (c - draws as f64 * p).abs() <= 4.0 * sigma,
                    "len {len} shape {shape:?} count {c}"
                );
            }
        }
    }

    #[test]
    fn avoiding_segment_never_returns() {
        let kernel = WalkKernel::build(2, 64);
        let mut rng = rng_stream(8, &[1]);
        for _ in 0..500 {
            let seg = sample_avoiding_segment(&kernel, 30, &mut rng).unwrap();
            for t in 1..=30 {
                assert!(!seg.at_origin(t));
            }
        }
    }

    #[test]
    fn one_step_segment_always_accepts() {
        let kernel = WalkKernel::build(3, 4);
        let mut rng = rng_stream(9, &[1]);
        let seg = sample_avoiding_segment(&kernel, 1, &mut rng).unwrap();
        assert!(!seg.at_origin(1));
    }

    #[test]
    fn acceptance_rate_tracks_survival_probability() {
        // d = 1, m = 4: acceptance = a_4 = 3/8; count attempts by hand.
        let kernel = WalkKernel::build(1, 16);
        let mut rng = rng_stream(10, &[1]);
        let trials = 40_000usize;
        let mut accepted = 0usize;
        for _ in 0..trials {
            let mut pos = 0i32;
            let mut ok = true;
            for t in 1..=4 {
                pos += if rng.random::<bool>() { 1 } else { -1 };
                if t % 2 == 0 && pos == 0 {
                    ok = false;
                    break;
                }
            }
            if ok {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / trials as f64;
        let expect = kernel.a(4);
        assert!((expect - 0.375).abs() < 1e-15);
        let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
        assert!((rate - expect).abs() <= 4.0 * sigma);

        // d = 3, long segments: acceptance stays near alpha(3). Counted on
        // raw attempts since sample_avoiding_segment retries internally.
        let k3 = WalkKernel::build(3, 512);
        let attempts = 10_000usize;
        let mut accepted3 = 0usize;
        let m = 512;
        let mut rng_raw = rng_stream(12, &[1]);
        for _ in 0..attempts {
            let mut pos = [0i32; 3];
            let mut ok = true;
            for t in 1..=m {
                for x in pos.iter_mut() {
                    *x += if rng_raw.random::<bool>() { 1 } else { -1 };
                }
                if t % 2 == 0 && pos.iter().all(|&x| x == 0) {
                    ok = false;
                    break;
                }
            }
            if ok {
                accepted3 += 1;
            }
        }
        let rate3 = accepted3 as f64 / attempts as f64;
        let expect3 = k3.a(m);
        let sigma3 = (expect3 * (1.0 - expect3) / attempts as f64).sqrt();
        assert!(
            (rate3 - expect3).abs() <= 4.0 * sigma3,
            "rate {rate3} vs a_{m} = {expect3}"
        );
        assert!(expect3 >= k3.alpha() - k3.alpha_error() - 1e-12);
    }
}
