//! Command execution. Every command writes `results.csv`, `aggregate.json`
//! and `manifest.json` into the output directory; failures carry the
//! offending job's seed and parameters.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use dropoly::brute::brute_force_partition;
use dropoly::kernel::{escape_probability, mc_escape_probability, ratio_growth_check, WalkKernel};
use dropoly::model::{Disorder, ModelParams};
use dropoly::partition::{
    free_energy_estimate, replica_summaries, superadditivity_check, supermartingale_step_factor,
    PartitionTables,
};
use dropoly::phase::{bound_delocalized, classify_point, critical_h};
use dropoly::rng::{derive_seed, rng_stream, tag};
use dropoly::sampler::{
    endpoint_distribution, no_return_probability, return_count_stats, sample_path, HistogramMode,
};

use crate::artifacts::{fmt_f64, RunDir};
use crate::config::{Command, RunConfig};

pub fn run(config: &RunConfig) -> Result<(), String> {
    let started = Instant::now();
    let mut out = RunDir::create(config).map_err(|e| format!("cannot create output dir: {e}"))?;
    let result = match config.command {
        Command::Kernel => run_kernel(config, &mut out),
        Command::FreeEnergy => run_free_energy(config, &mut out),
        Command::PhaseScan => run_phase_scan(config, &mut out),
        Command::CriticalCurve => run_critical_curve(config, &mut out),
        Command::SamplePaths => run_sample_paths(config, &mut out),
        Command::Observables => run_observables(config, &mut out),
        Command::Verify => run_verify(config, &mut out),
    };
    out.write_manifest(config, started.elapsed().as_millis())
        .map_err(|e| format!("cannot write manifest: {e}"))?;
    result
}

fn io_err(e: std::io::Error) -> String {
    format!("artifact write failed: {e}")
}

fn kernel_for(config: &RunConfig, steps: usize) -> WalkKernel {
    WalkKernel::build(config.d, steps.div_ceil(2).max(1))
}

fn point_params(config: &RunConfig, lambda: f64, h: f64) -> Result<ModelParams, String> {
    ModelParams::new(lambda, h, config.p, config.d, config.n).map_err(|e| e.to_string())
}

fn run_kernel(config: &RunConfig, out: &mut RunDir) -> Result<(), String> {
    let kernel = WalkKernel::build(config.d, config.n_max);
    let rows: Vec<String> = (0..=config.n_max)
        .map(|k| {
            format!(
                "{k},{},{},{}",
                fmt_f64(kernel.p(k)),
                fmt_f64(kernel.b(k)),
                fmt_f64(kernel.a(2 * k))
            )
        })
        .collect();
    out.write_csv("results.csv", "k,p_k,b_k,a_2k", &rows)
        .map_err(io_err)?;

    #[derive(Serialize)]
    struct KernelAggregate {
        d: u32,
        n_max: usize,
        alpha: f64,
        alpha_error: f64,
        clamped_entries: usize,
    }
    out.write_json(
        "aggregate.json",
        &KernelAggregate {
            d: config.d,
            n_max: config.n_max,
            alpha: kernel.alpha(),
            alpha_error: kernel.alpha_error(),
            clamped_entries: kernel.clamped_entries(),
        },
    )
    .map_err(io_err)
}

fn run_free_energy(config: &RunConfig, out: &mut RunDir) -> Result<(), String> {
    let params = point_params(config, config.lambda[0], config.h[0])?;
    let kernel = kernel_for(config, params.n);
    let rows = replica_summaries(&params, &kernel, config.replicas, config.base_seed)
        .map_err(|e| format!("free-energy at {params:?}, base seed {}: {e}", config.base_seed))?;
    let csv: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                params.n,
                fmt_f64(params.lambda),
                fmt_f64(params.h),
                fmt_f64(params.p),
                params.d,
                fmt_f64(r.log_z),
                fmt_f64(r.log_zhat),
                fmt_f64(r.log_psi),
                fmt_f64(r.phi)
            )
        })
        .collect();
    out.write_csv(
        "results.csv",
        "seed,n,lambda,h,p,d,log_z_n,log_zhat_n,psi_n,phi_per_replica",
        &csv,
    )
    .map_err(io_err)?;

    let est = free_energy_estimate(&params, &kernel, config.replicas, config.base_seed)
        .map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct FreeEnergyAggregate {
        phi_hat: f64,
        stderr: f64,
        psi_p_hat: f64,
        phi_pinned_hat: f64,
        replicas: usize,
        n: usize,
    }
    out.write_json(
        "aggregate.json",
        &FreeEnergyAggregate {
            phi_hat: est.phi_hat,
            stderr: est.stderr,
            psi_p_hat: est.psi_p_hat,
            phi_pinned_hat: est.phi_pinned_hat,
            replicas: est.replicas,
            n: est.n,
        },
    )
    .map_err(io_err)
}

fn run_phase_scan(config: &RunConfig, out: &mut RunDir) -> Result<(), String> {
    // classification doubles the horizon internally
    let kernel = kernel_for(config, 2 * config.n);
    let grid: Vec<(usize, f64, f64)> = config
        .lambda
        .iter()
        .flat_map(|&l| config.h.iter().map(move |&h| (l, h)))
        .enumerate()
        .map(|(i, (l, h))| (i, l, h))
        .collect();
    let points: Result<Vec<_>, String> = grid
        .par_iter()
        .map(|&(idx, lambda, h)| {
            let params = point_params(config, lambda, h)?;
            let seed = derive_seed(config.base_seed, idx as u64);
            classify_point(&params, &kernel, config.replicas, config.kappa, seed)
                .map_err(|e| format!("phase point (lambda {lambda}, h {h}), seed {seed}: {e}"))
        })
        .collect();
    let points = points?;
    let rows: Vec<String> = points
        .iter()
        .map(|pt| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                fmt_f64(pt.lambda),
                fmt_f64(pt.h),
                fmt_f64(pt.p),
                pt.d,
                pt.n,
                pt.replicas,
                fmt_f64(pt.psi_p_hat),
                fmt_f64(pt.stderr),
                pt.verdict
            )
        })
        .collect();
    out.write_csv(
        "results.csv",
        "lambda,h,p,d,n,replicas,psi_p_hat,stderr,verdict",
        &rows,
    )
    .map_err(io_err)?;

    #[derive(Serialize)]
    struct ScanAggregate {
        points: usize,
        localized: usize,
        delocalized: usize,
        uncertain: usize,
        kappa: f64,
    }
    use dropoly::phase::Verdict;
    out.write_json(
        "aggregate.json",
        &ScanAggregate {
            points: points.len(),
            localized: points.iter().filter(|p| p.verdict == Verdict::Localized).count(),
            delocalized: points
                .iter()
                .filter(|p| p.verdict == Verdict::Delocalized)
                .count(),
            uncertain: points.iter().filter(|p| p.verdict == Verdict::Uncertain).count(),
            kappa: config.kappa,
        },
    )
    .map_err(io_err)
}

fn run_critical_curve(config: &RunConfig, out: &mut RunDir) -> Result<(), String> {
    let kernel = kernel_for(config, 2 * config.n);
    let points: Result<Vec<_>, String> = config
        .lambda
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let params = ModelParams::new(lambda, 0.0, config.p, config.d, config.n)
                .map_err(|e| e.to_string())?;
            let seed = derive_seed(config.base_seed, i as u64);
            critical_h(&params, &kernel, config.replicas, config.tol, config.kappa, seed)
                .map_err(|e| format!("critical curve at lambda {lambda}, seed {seed}: {e}"))
        })
        .collect();
    let points = points?;
    let rows: Vec<String> = points
        .iter()
        .map(|pt| {
            format!(
                "{},{},{},{},{}",
                fmt_f64(pt.lambda),
                fmt_f64(pt.h_lo),
                fmt_f64(pt.h_hi),
                fmt_f64(pt.bound_loc),
                fmt_f64(pt.bound_deloc)
            )
        })
        .collect();
    out.write_csv(
        "results.csv",
        "lambda,h_c_low,h_c_high,bound_localized,bound_delocalized",
        &rows,
    )
    .map_err(io_err)?;

    #[derive(Serialize)]
    struct CurveAggregate {
        tol: f64,
        converged: usize,
        points: usize,
    }
    out.write_json(
        "aggregate.json",
        &CurveAggregate {
            tol: config.tol,
            converged: points.iter().filter(|p| p.converged).count(),
            points: points.len(),
        },
    )
    .map_err(io_err)
}

fn run_sample_paths(config: &RunConfig, out: &mut RunDir) -> Result<(), String> {
    let params = point_params(config, config.lambda[0], config.h[0])?;
    let kernel = kernel_for(config, params.n);
    let disorder_seed = derive_seed(config.base_seed, 0);
    let disorder = Disorder::sample(&params, disorder_seed);
    let tables = PartitionTables::build(&disorder, &params, &kernel)
        .map_err(|e| format!("tables at {params:?}, seed {disorder_seed}: {e}"))?;

    let mut rng = rng_stream(config.base_seed, &[tag::SKELETON]);
    let mut rows = Vec::new();
    let mut returns_total = 0usize;
    let mut last_hits = 0usize;
    let mut resamples = 0u64;
    let d = params.d as usize;
    for s in 0..config.samples {
        let sample = sample_path(&tables, &disorder, &params, &kernel, &mut rng)
            .map_err(|e| format!("sample {s} at {params:?}, seed {disorder_seed}: {e}"))?;
        returns_total += sample.n_returns();
        last_hits += sample.last_hit();
        resamples += sample.resamples as u64;
        for t in 0..=params.n {
            let coords: Vec<String> = (0..d).map(|c| sample.coord(t, c).to_string()).collect();
            rows.push(format!("{s},{t},{}", coords.join(",")));
        }
    }
    let coord_header: Vec<String> = (1..=d).map(|c| format!("x{c}")).collect();
    out.write_csv(
        "results.csv",
        &format!("sample,t,{}", coord_header.join(",")),
        &rows,
    )
    .map_err(io_err)?;
    std::fs::write(out.dir.join("disorder.json"), disorder.to_json() + "\n").map_err(io_err)?;

    #[derive(Serialize)]
    struct PathAggregate {
        samples: usize,
        mean_returns: f64,
        mean_last_hit: f64,
        no_return_probability: f64,
        skeleton_resamples: u64,
        disorder_seed: u64,
    }
    out.write_json(
        "aggregate.json",
        &PathAggregate {
            samples: config.samples,
            mean_returns: returns_total as f64 / config.samples.max(1) as f64,
            mean_last_hit: last_hits as f64 / config.samples.max(1) as f64,
            no_return_probability: no_return_probability(&tables, &kernel),
            skeleton_resamples: resamples,
            disorder_seed,
        },
    )
    .map_err(io_err)
}

fn run_observables(config: &RunConfig, out: &mut RunDir) -> Result<(), String> {
    let params = point_params(config, config.lambda[0], config.h[0])?;
    let steps = params.n.max(config.n_list.iter().copied().max().unwrap_or(0));
    let kernel = kernel_for(config, steps);
    let mode = if config.mode == "annealed" {
        HistogramMode::Annealed
    } else {
        HistogramMode::Quenched
    };
    let hist = endpoint_distribution(
        &params,
        &kernel,
        config.replicas,
        config.samples,
        mode,
        config.base_seed,
    )
    .map_err(|e| format!("observables at {params:?}, base seed {}: {e}", config.base_seed))?;
    let rows: Vec<String> = hist
        .bins
        .iter()
        .map(|(&bin, &count)| {
            let (lo, hi) = dropoly::numerics::wilson_interval(count, hist.samples, 1.96);
            format!("{bin},{count},{},{}", fmt_f64(lo), fmt_f64(hi))
        })
        .collect();
    out.write_csv("results.csv", "bin,count,lower_ci,upper_ci", &rows)
        .map_err(io_err)?;

    if !config.n_list.is_empty() {
        let stats = return_count_stats(
            &params,
            &kernel,
            &config.n_list,
            config.replicas,
            config.samples,
            derive_seed(config.base_seed, 1),
        )
        .map_err(|e| format!("return counts: {e}"))?;
        let rows: Vec<String> = stats
            .iter()
            .map(|s| format!("{},{},{}", s.n, fmt_f64(s.mean), fmt_f64(s.stderr)))
            .collect();
        out.write_csv("returns.csv", "n,mean_returns,stderr", &rows)
            .map_err(io_err)?;
    }

    #[derive(Serialize)]
    struct ObservablesAggregate {
        mode: String,
        d: u32,
        n: usize,
        samples: u64,
        skeleton_resamples: u64,
        bins: usize,
        forward_time_convention: bool,
    }
    out.write_json(
        "aggregate.json",
        &ObservablesAggregate {
            mode: config.mode.clone(),
            d: hist.d,
            n: hist.n,
            samples: hist.samples,
            skeleton_resamples: hist.skeleton_resamples,
            bins: hist.bins.len(),
            forward_time_convention: hist.forward_time_convention,
        },
    )
    .map_err(io_err)
}

struct PropertyResult {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn run_verify(config: &RunConfig, out: &mut RunDir) -> Result<(), String> {
    use rand::Rng;
    let mut results: Vec<PropertyResult> = Vec::new();

    // exhaustive-enumeration equivalence on small random instances
    {
        let kernel1 = WalkKernel::build(1, 8);
        let kernel2 = WalkKernel::build(2, 8);
        let mut rng = rng_stream(config.base_seed, &[tag::MONTE_CARLO, 1]);
        let mut worst = 0.0f64;
        for case in 0..60u64 {
            let d = if case % 2 == 0 { 1 } else { 2 };
            let n = if d == 1 {
                2 + (rng.random::<u32>() % 11) as usize
            } else {
                2 + (rng.random::<u32>() % 7) as usize
            };
            let lambda = rng.random::<f64>() * 2.0;
            let h = rng.random::<f64>() * 3.0 - 1.5;
            let p = [0.0, 0.5, 1.0][(rng.random::<u32>() % 3) as usize];
            let params = ModelParams::new(lambda, h, p, d, n).unwrap();
            let disorder = Disorder::sample(&params, derive_seed(config.base_seed, 100 + case));
            let kernel = if d == 1 { &kernel1 } else { &kernel2 };
            let tables = PartitionTables::build(&disorder, &params, kernel)
                .map_err(|e| e.to_string())?;
            let brute = brute_force_partition(&disorder, &params).map_err(|e| e.to_string())?;
            let rel = (tables.log_z()[n] - brute.z.ln()).abs() / brute.z.ln().abs().max(1.0);
            worst = worst.max(rel);
            if n % 2 == 0 {
                let rel = (tables.log_zhat()[n / 2] - brute.zhat.ln()).abs()
                    / brute.zhat.ln().abs().max(1.0);
                worst = worst.max(rel);
            }
        }
        results.push(PropertyResult {
            name: "brute-force-equivalence",
            passed: worst <= 1e-10,
            detail: format!("60 instances, max relative error {worst:.3e}"),
        });
    }

    // renewal reconstruction
    {
        let mut worst = 0.0f64;
        for d in [1u32, 2, 3] {
            let kernel = WalkKernel::build(d, 2000);
            worst = worst.max(kernel.renewal_reconstruction_error(2000));
        }
        results.push(PropertyResult {
            name: "renewal-reconstruction",
            passed: worst <= 1e-12,
            detail: format!("d in 1..=3, k <= 2000, max relative error {worst:.3e}"),
        });
    }

    // block superadditivity
    {
        let kernel = WalkKernel::build(1, 128);
        let mut rng = rng_stream(config.base_seed, &[tag::MONTE_CARLO, 2]);
        let mut min_slack = f64::INFINITY;
        for case in 0..100u64 {
            let lambda = rng.random::<f64>() * 2.0;
            let h = rng.random::<f64>() * 3.0 - 1.5;
            let p = [0.25, 0.5, 1.0][(rng.random::<u32>() % 3) as usize];
            let params = ModelParams::new(lambda, h, p, 1, 192).unwrap();
            let disorder = Disorder::sample(&params, derive_seed(config.base_seed, 300 + case));
            let check = superadditivity_check(&disorder, &params, &kernel, 16, 12)
                .map_err(|e| e.to_string())?;
            min_slack = min_slack.min(check.pinned_slack).min(check.free_slack);
        }
        results.push(PropertyResult {
            name: "block-superadditivity",
            passed: min_slack >= -1e-9,
            detail: format!("100 instances, minimum slack {min_slack:.3e}"),
        });
    }

    // supermartingale one-step factor
    {
        let mut ok = true;
        let mut detail = String::new();
        for lambda in [0.5f64, 1.0, 2.0] {
            let h_boundary = bound_delocalized(lambda).h;
            let params = ModelParams::new(lambda, h_boundary, 1.0, 3, 4).unwrap();
            let at_boundary = supermartingale_step_factor(&params, 1.0);
            if (at_boundary - 1.0).abs() > 1e-12 {
                ok = false;
                detail = format!("boundary factor {at_boundary} at lambda {lambda}");
                break;
            }
            let above = ModelParams::new(lambda, h_boundary + 0.1, 1.0, 3, 4).unwrap();
            if supermartingale_step_factor(&above, 1.0) > 1.0 {
                ok = false;
                detail = format!("factor above 1 past the bound at lambda {lambda}");
                break;
            }
        }
        if ok {
            detail = "boundary factor 1, above-bound factor <= 1, lambda in {0.5,1,2}".into();
        }
        results.push(PropertyResult {
            name: "supermartingale-step",
            passed: ok,
            detail,
        });
    }

    // closed forms: p = 0 and lambda = 0
    {
        let kernel = WalkKernel::build(1, 256);
        let p0 = ModelParams::new(1.3, 0.4, 0.0, 1, 500).unwrap();
        let rows = replica_summaries(&p0, &kernel, 8, config.base_seed).map_err(|e| e.to_string())?;
        let worst_psi = rows.iter().map(|r| r.log_psi.abs()).fold(0.0, f64::max);
        let l0 = ModelParams::new(0.0, -0.7, 0.6, 1, 500).unwrap();
        let rows0 = replica_summaries(&l0, &kernel, 8, config.base_seed).map_err(|e| e.to_string())?;
        let worst_z = rows0.iter().map(|r| r.log_z.abs()).fold(0.0, f64::max);
        let passed = worst_psi <= 1e-12 && worst_z <= 1e-12;
        results.push(PropertyResult {
            name: "closed-form-limits",
            passed,
            detail: format!("p=0 max |log psi| {worst_psi:.3e}; lambda=0 max |log Z| {worst_z:.3e}"),
        });
    }

    // escape probability: series against Monte Carlo
    {
        let est = escape_probability(3, 1_000_000, 1e-3);
        let kernel = WalkKernel::build(3, 1_000);
        let (frac, se) = mc_escape_probability(3, 20_000, 2_000, derive_seed(config.base_seed, 9));
        let gap = kernel.a(2_000) - est.alpha;
        let passed = (frac - est.alpha).abs() <= 3.0 * se + gap + est.error;
        results.push(PropertyResult {
            name: "escape-probability-mc",
            passed,
            detail: format!("series {:.5} mc {frac:.5} (3se {:.5})", est.alpha, 3.0 * se),
        });
    }

    // ratio growth: polynomial bound with finite constant
    {
        let kernel = WalkKernel::build(1, 2000);
        let growth = ratio_growth_check(&kernel, 2000);
        let passed = growth.c1.is_finite() && (growth.slope - 1.0).abs() <= 0.15;
        results.push(PropertyResult {
            name: "ratio-growth",
            passed,
            detail: format!("c1 {:.4}, slope {:.4}", growth.c1, growth.slope),
        });
    }

    let mut rows = Vec::new();
    let mut all_passed = true;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("PROPERTY {}: {status} ({})", r.name, r.detail);
        rows.push(format!("{},{status},\"{}\"", r.name, r.detail));
        all_passed &= r.passed;
    }
    out.write_csv("results.csv", "property,status,detail", &rows)
        .map_err(io_err)?;
    #[derive(Serialize)]
    struct VerifyAggregate {
        properties: usize,
        all_passed: bool,
    }
    out.write_json(
        "aggregate.json",
        &VerifyAggregate {
            properties: results.len(),
            all_passed,
        },
    )
    .map_err(io_err)?;
    if all_passed {
        Ok(())
    } else {
        Err("verification properties failed".into())
    }
}
