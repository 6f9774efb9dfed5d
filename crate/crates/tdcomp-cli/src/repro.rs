//! The `repro` command: run the built-in reference scenarios and print one
//! line per check.

use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Result;

use tdcomp::catalog::{self, Check};
use tdcomp::sdp::SolverConfig;

pub fn run(filter: Option<&str>, jobs: usize, max_iterations: Option<usize>) -> Result<ExitCode> {
    let mut cfg = SolverConfig::default();
    if let Some(iters) = max_iterations {
        cfg.max_iterations = iters;
    }
    let names: Vec<&'static str> = catalog::scenario_names()
        .into_iter()
        .filter(|n| filter.is_none_or(|f| n.contains(f)))
        .collect();
    if names.is_empty() {
        eprintln!("no scenario matches the filter");
        return Ok(ExitCode::from(2));
    }

    let checks = run_scenarios(&names, &cfg, jobs.max(1));
    let mut passed = 0usize;
    let mut failed = 0usize;
    for check in &checks {
        println!("{check}");
        if check.passed {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    println!("{passed} passed, {failed} failed ({} scenarios)", names.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

/// Scenarios are independent; spread them over `jobs` worker threads and
/// stitch the results back in scenario order.
fn run_scenarios(names: &[&'static str], cfg: &SolverConfig, jobs: usize) -> Vec<Check> {
    if jobs <= 1 || names.len() <= 1 {
        return names.iter().flat_map(|n| catalog::run_scenario(n, cfg)).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Vec<Check>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(names.len()) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= names.len() {
                    break;
                }
                let checks = catalog::run_scenario(names[idx], cfg);
                results.lock().expect("poisoned").push((idx, checks));
            });
        }
    });
    let mut collected = results.into_inner().expect("poisoned");
    collected.sort_by_key(|(idx, _)| *idx);
    collected.into_iter().flat_map(|(_, checks)| checks).collect()
}
