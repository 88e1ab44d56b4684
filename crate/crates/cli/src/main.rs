use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavelab::analyzer::{pulse_response, resolution_report, tap_sparsity};
use wavelab::channel::{effective_channel, spread_factor};
use wavelab::experiments::{
    draw_channel, oracle_suite, run_scenario_with, ExperimentResult, RunOptions, Scenario,
};
use wavelab::{Domain, Error};

/// Largest grid for which `analyze` builds dense effective channels.
const DENSE_LIMIT: usize = 2048;

#[derive(Parser)]
#[command(name = "wavelab", version, about = "Multicarrier waveform lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its result record.
    Run {
        scenario: PathBuf,
        /// Result record path (default: results/<scenario stem>.json).
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write the tabular export here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Worker threads (default: WAVELAB_WORKERS, else all cores).
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Print resolution, sparsity and pulse reports for a scenario's systems.
    Analyze { scenario: PathBuf },
    /// Run the brute-force equivalence suite.
    OracleCheck,
    /// List scenario files in a directory.
    ListScenarios {
        #[arg(default_value = "scenarios")]
        dir: PathBuf,
    },
    /// Convert a result record to plot-ready CSV.
    ExportPlotdata { result: PathBuf, out: PathBuf },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Input files that are missing or malformed are usage errors.
fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure::Usage(e.to_string()))
}

fn run(scenario: &Path, out: Option<PathBuf>, csv: Option<PathBuf>, workers: Option<usize>) -> Result<(), Failure> {
    let s = load_scenario(scenario)?;
    let opts = RunOptions { workers };
    let res = run_scenario_with(&s, &opts)?;
    let out = out.unwrap_or_else(|| {
        let stem = scenario.file_stem().map_or("result".into(), |v| v.to_string_lossy().into_owned());
        PathBuf::from("results").join(format!("{stem}.json"))
    });
    res.write(&out)?;
    if let Some(path) = csv {
        write_text(&path, &res.to_csv()?)?;
    }
    print!("{}", res.summary_table());
    println!(
        "wrote {} ({} workers, {:.1} s)",
        out.display(),
        res.run_info.workers,
        res.run_info.wall_clock_s
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn analyze(scenario: &Path) -> Result<(), Failure> {
    let s = load_scenario(scenario)?;
    for sys in &s.systems {
        let cfg = sys.config()?;
        println!("== {} ({}, M={}, N={})", sys.label, cfg.waveform(), cfg.m(), cfg.n());
        let r = resolution_report(&cfg);
        println!("delay resolution      {:.3e} s", r.delay_res_s);
        for (d, hz) in &r.doppler_res_hz {
            println!("Doppler resolution    {hz:.3} Hz ({d})");
        }
        println!("DD / frequency ratio  {}", r.ratio);

        let ch = draw_channel(&s.channel, &cfg, s.seed, 0)?;
        println!("trial-0 channel       {} paths, spread factor {:.3}", ch.paths().len(), spread_factor(&ch, &cfg));
        if cfg.grid_len() <= DENSE_LIMIT {
            for d in domains(&cfg) {
                let h = effective_channel(&ch, &cfg, d)?;
                let sp = tap_sparsity(&h, 1e-3);
                let max = sp.counts.iter().max().copied().unwrap_or(0);
                println!("sparsity {d:<13} {:.4} (max {max} taps per row)", sp.sparsity);
            }
        } else {
            println!("sparsity              skipped (grid {} > {DENSE_LIMIT})", cfg.grid_len());
        }

        let mux = cfg.waveform().multiplexing_domain();
        for (fd, fk) in [(0.0, 0.0), (0.0, 0.5), (0.5, 0.0)] {
            match pulse_response(&cfg, mux, fd, fk) {
                Ok(p) => println!(
                    "pulse delay+{fd} Doppler+{fk}: peak {:.3} (pilot {}), -3 dB width {:.2}, lobe spacing {}",
                    p.peak,
                    p.pilot,
                    p.mainlobe_width,
                    p.lobe_spacing.map_or("-".into(), |v| v.to_string())
                ),
                Err(e) => println!("pulse delay+{fd} Doppler+{fk}: {e}"),
            }
        }
    }
    Ok(())
}

fn domains(cfg: &wavelab::ValidatedConfig) -> Vec<Domain> {
    let mut out = vec![Domain::Time, Domain::Frequency, Domain::DelayDoppler];
    if cfg.has_affine() {
        out.push(Domain::Affine);
    }
    out
}

fn oracle_check() -> Result<(), Failure> {
    let checks = oracle_suite()?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "ok  " } else { "FAIL" };
        println!("{tag} {:<48} max err {:.3e} (tol {:.0e})", c.name, c.max_err, c.tol);
        failed += usize::from(!c.passed);
    }
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} oracle checks failed")));
    }
    Ok(())
}

fn list_scenarios(dir: &Path) -> Result<(), Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "scn"))
        .collect();
    files.sort();
    for f in files {
        match Scenario::load(&f) {
            Ok(s) => {
                let labels: Vec<&str> = s.systems.iter().map(|v| v.label.as_str()).collect();
                println!(
                    "{:<24} {:<12} {:?} trials={} snr={:?} systems={}",
                    f.file_name().unwrap_or_default().to_string_lossy(),
                    s.name,
                    s.kind,
                    s.trials,
                    s.snr_db,
                    labels.join(",")
                );
            }
            Err(e) => println!("{:<24} invalid: {e}", f.display()),
        }
    }
    Ok(())
}

fn export_plotdata(result: &Path, out: &Path) -> Result<(), Failure> {
    let res = ExperimentResult::read(result).map_err(|e| Failure::Usage(e.to_string()))?;
    write_text(out, &res.to_csv()?)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match cli.command {
        Command::Run {
            scenario,
            out,
            csv,
            workers,
        } => run(&scenario, out, csv, workers),
        Command::Analyze { scenario } => analyze(&scenario),
        Command::OracleCheck => oracle_check(),
        Command::ListScenarios { dir } => list_scenarios(&dir),
        Command::ExportPlotdata { result, out } => export_plotdata(&result, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
