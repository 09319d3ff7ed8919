//! Model parameters, quenched disorder and the droplet sign field.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::{rng_stream, tag};
use rand::Rng;

/// Coupling constants and the horizon of a run.
///
/// `lambda` is the overall interaction strength (inverse temperature), `h`
/// the asymmetry between the two monomer types, `p` the droplet density on
/// the axis, `d` the number of transverse coordinates and `n` the polymer
/// length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub h: f64,
    pub p: f64,
    pub d: u32,
    pub n: usize,
}

impl ModelParams {
    pub fn new(lambda: f64, h: f64, p: f64, d: u32, n: usize) -> Result<Self, Error> {
        let params = ModelParams { lambda, h, p, d, n };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::InvalidParams(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !self.h.is_finite() {
            return Err(Error::InvalidParams(format!("h must be finite, got {}", self.h)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParams(format!("p must be in [0,1], got {}", self.p)));
        }
        if self.d < 1 {
            return Err(Error::InvalidParams("d must be >= 1".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidParams("n must be >= 1".into()));
        }
        Ok(())
    }

    /// Same parameters at a different horizon.
    pub fn with_n(&self, n: usize) -> ModelParams {
        ModelParams { n, ..*self }
    }
}

/// One quenched realization of the monomer signs `ω` and droplet indicators
/// `η`, indexed 1..=n. Regeneration from the same seed is bit-identical, and
/// values are immutable after construction, so a `Disorder` can be shared
/// freely across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Disorder {
    omega: Vec<i8>,
    eta: Vec<i8>,
    seed: u64,
    p: f64,
}

/// Serialization schema for dumping/reloading a disorder realization.
#[derive(Serialize, Deserialize)]
struct DisorderDump {
    seed: u64,
    n: usize,
    p: f64,
    omega: Vec<i8>,
    eta: Vec<i8>,
}

impl Disorder {
    /// Draw a fresh realization: `ω_i` uniform on {±1}, `η_i = +1` with
    /// probability `p`, all entries independent. Deterministic in
    /// `(params.n, params.p, seed)`.
    pub fn sample(params: &ModelParams, seed: u64) -> Disorder {
        let mut rng = rng_stream(seed, &[tag::DISORDER]);
        let n = params.n;
        let mut omega = Vec::with_capacity(n);
        let mut eta = Vec::with_capacity(n);
        for _ in 0..n {
            omega.push(if rng.random::<bool>() { 1 } else { -1 });
        }
        for _ in 0..n {
            // p = 1 and p = 0 must be exact, not subject to float compare
            // artifacts; random::<f64>() lies in [0,1).
            eta.push(if rng.random::<f64>() < params.p { 1 } else { -1 });
        }
        Disorder {
            omega,
            eta,
            seed,
            p: params.p,
        }
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn droplet_density(&self) -> f64 {
        self.p
    }

    /// Monomer sign at time `i` (1-based).
    #[inline]
    pub fn omega(&self, i: usize) -> i8 {
        self.omega[i - 1]
    }

    /// Droplet indicator at time `i` (1-based).
    #[inline]
    pub fn eta(&self, i: usize) -> i8 {
        self.eta[i - 1]
    }

    pub fn omega_slice(&self) -> &[i8] {
        &self.omega
    }

    pub fn eta_slice(&self) -> &[i8] {
        &self.eta
    }

    /// Sign field at `(i, position)`: −1 exactly when the site is on the
    /// axis and carries a droplet, +1 otherwise.
    pub fn delta(&self, i: usize, at_origin: bool) -> Result<i8, Error> {
        if i < 1 || i > self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.len(),
            });
        }
        Ok(if at_origin && self.eta(i) == 1 { -1 } else { 1 })
    }

    /// JSON dump `{seed, n, p, omega, eta}` for replaying failures.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&DisorderDump {
            seed: self.seed,
            n: self.len(),
            p: self.p,
            omega: self.omega.clone(),
            eta: self.eta.clone(),
        })
        .expect("disorder dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Disorder, Error> {
        let dump: DisorderDump =
            serde_json::from_str(text).map_err(|e| Error::DisorderDump(e.to_string()))?;
        if dump.omega.len() != dump.n || dump.eta.len() != dump.n {
            return Err(Error::DisorderDump(format!(
                "array lengths {}/{} do not match n = {}",
                dump.omega.len(),
                dump.eta.len(),
                dump.n
            )));
        }
        if dump
            .omega
            .iter()
            .chain(dump.eta.iter())
            .any(|&v| v != 1 && v != -1)
        {
            return Err(Error::DisorderDump("entries must be exactly +/-1".into()));
        }
        Ok(Disorder {
            omega: dump.omega,
            eta: dump.eta,
            seed: dump.seed,
            p: dump.p,
        })
    }

    /// Construct directly from sign arrays (mainly for worked examples and
    /// oracle tests).
    pub fn from_signs(omega: Vec<i8>, eta: Vec<i8>) -> Result<Disorder, Error> {
        if omega.len() != eta.len() {
            return Err(Error::DisorderDump("omega/eta length mismatch".into()));
        }
        if omega.iter().chain(eta.iter()).any(|&v| v != 1 && v != -1) {
            return Err(Error::DisorderDump("entries must be exactly +/-1".into()));
        }
        let p = eta.iter().filter(|&&e| e == 1).count() as f64 / eta.len().max(1) as f64;
        Ok(Disorder {
            omega,
            eta,
            seed: 0,
            p,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, n: usize) -> ModelParams {
        ModelParams::new(1.0, 0.0, p, 1, n).unwrap()
    }

    #[test]
    fn degenerate_densities() {
        let all = Disorder::sample(&params(1.0, 500), 3);
        assert!(all.eta_slice().iter().all(|&e| e == 1));
        let none = Disorder::sample(&params(0.0, 500), 3);
        assert!(none.eta_slice().iter().all(|&e| e == -1));
    }

    #[test]
    fn eta_mean_within_binomial_band() {
        // E[eta] = 2p - 1; 3 sigma band with sd(eta) = 2 sqrt(p(1-p)).
        let n = 1_000_000;
        let p = 0.3;
        let dis = Disorder::sample(&params(p, n), 12345);
        let mean = dis.eta_slice().iter().map(|&e| e as f64).sum::<f64>() / n as f64;
        let sigma = 2.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (mean - (2.0 * p - 1.0)).abs() <= 3.0 * sigma,
            "mean {mean} outside band around {}",
            2.0 * p - 1.0
        );
    }

    #[test]
    fn plus_fraction_within_four_sigma() {
        let n = 1_000_000;
        let p = 0.3;
        let dis = Disorder::sample(&params(p, n), 999);
        let frac = dis.eta_slice().iter().filter(|&&e| e == 1).count() as f64 / n as f64;
        assert!((frac - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn omega_is_balanced() {
        let n = 1_000_000;
        let dis = Disorder::sample(&params(0.5, n), 7);
        let mean = dis.omega_slice().iter().map(|&w| w as f64).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = Disorder::sample(&params(0.4, 2000), 77);
        let b = Disorder::sample(&params(0.4, 2000), 77);
        assert_eq!(a, b);
        let c = Disorder::sample(&params(0.4, 2000), 78);
        assert_ne!(a, c);
    }

    #[test]
    fn delta_cases() {
        let dis = Disorder::from_signs(vec![1, -1], vec![1, -1]).unwrap();
        // droplet + on-axis -> -1
        assert_eq!(dis.delta(1, true).unwrap(), -1);
        // droplet + off-axis -> +1
        assert_eq!(dis.delta(1, false).unwrap(), 1);
        // no droplet -> +1 either way
        assert_eq!(dis.delta(2, true).unwrap(), 1);
        assert_eq!(dis.delta(2, false).unwrap(), 1);
        assert!(dis.delta(3, true).is_err());
        assert!(dis.delta(0, true).is_err());
    }

    #[test]
    fn off_axis_delta_is_always_plus_one() {
        let dis = Disorder::sample(&params(0.7, 300), 5);
        for i in 1..=300 {
            assert_eq!(dis.delta(i, false).unwrap(), 1);
        }
    }

    #[test]
    fn json_round_trip() {
        let dis = Disorder::sample(&params(0.5, 64), 21);
        let text = dis.to_json();
        let back = Disorder::from_json(&text).unwrap();
        assert_eq!(dis, back);
    }

    #[test]
    fn json_rejects_bad_entries() {
        assert!(Disorder::from_json(r#"{"seed":0,"n":2,"p":0.5,"omega":[1,2],"eta":[1,-1]}"#).is_err());
        assert!(Disorder::from_json(r#"{"seed":0,"n":3,"p":0.5,"omega":[1,1],"eta":[1,-1]}"#).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(-0.1, 0.0, 0.5, 1, 10).is_err());
        assert!(ModelParams::new(1.0, 0.0, 1.5, 1, 10).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.5, 0, 10).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.5, 1, 0).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, 0.5, 1, 10).is_err());
    }
}
