//! `dropoly` — seeded, replayable batch runs for the droplet-polymer
//! engine. Exit codes: 0 success, 1 job failure, 2 config error.

mod artifacts;
mod config;
mod runner;

use config::RunConfig;

const USAGE: &str = "\
usage: dropoly <command> [--config FILE] [--key value ...]

commands:
  kernel          walk tables p_k / b_k / a_m and the escape probability
                  (requires --d, --n-max)
  free-energy     replica free-energy estimate at one (lambda, h) point
  phase-scan      classify a lambda x h grid as Localized / Delocalized
  critical-curve  bisection bracket for the critical h per lambda
  sample-paths    exact Gibbs path samples at a fixed disorder
  observables     endpoint histograms and return-count statistics
  verify          run the oracle and invariant suite, print pass/fail

keys (file `key = value` lines or `--key value` flags; flags win;
repeated lambda / h values form grids):
  lambda, h, p, d, n, replicas, samples, base-seed (mandatory), workers,
  out (output directory), tol, kappa, n-max, n-list, mode

artifacts per run: results.csv, aggregate.json, manifest.json. Identical
configs produce byte-identical CSV/JSON data regardless of worker count.
";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print!("{USAGE}");
        std::process::exit(if args.is_empty() { 2 } else { 0 });
    }
    let config = match RunConfig::parse(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(config.effective_workers())
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot build worker pool: {e}");
            std::process::exit(1);
        }
    };
    match pool.install(|| runner::run(&config)) {
        Ok(()) => {}
        Err(msg) => {
            eprintln!("job failed: {msg}");
            std::process::exit(1);
        }
    }
}
