use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use delay_bandits::harness::output::{
    write_reports_csv, write_run_json, write_sweep_csv, write_trace_file,
};
use delay_bandits::harness::sweep::{parse_axis, run_sweep, SweepSpec};
use delay_bandits::harness::verify::{run_suite, verify_config, CheckOutcome, SuiteOptions};
use delay_bandits::harness::{aggregate, for_each_seed, RunConfig, Summary};

const EXIT_INVALID_CONFIG: u8 = 1;
const EXIT_VERIFY_FAILED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "delay-bandits",
    version,
    about = "Delay-adaptive Exp3 experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over many seeds.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a cartesian grid over config fields.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `FIELD=v1,v2,...`; may be repeated.
        #[arg(long = "grid", value_name = "FIELD=VALUES")]
        grid: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Randomized self-checks; with `--config`, also checks that config's runs.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed of the randomized suite.
        #[arg(long = "suite-seed")]
        suite_seed: Option<u64>,
        /// Number of random DeDa oracle instances.
        #[arg(long)]
        instances: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// One flag per config field.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    delays: Option<String>,
    #[arg(long = "K", visible_alias = "k")]
    arms: Option<usize>,
    #[arg(long = "T", visible_alias = "t")]
    rounds: Option<usize>,
    /// A seed count, or a comma-separated seed list.
    #[arg(long)]
    seeds: Option<String>,
    /// First seed when `--seeds` is a count.
    #[arg(long = "seed-base", alias = "seed_base")]
    seed_base: Option<u64>,
    #[arg(long = "instance-seed", alias = "instance_seed")]
    instance_seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long = "trace-dir", alias = "trace_dir")]
    trace_dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, map: &mut Map<String, Value>) -> Result<(), String> {
        let mut set = |key: &str, value: Option<Value>| {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        };
        set("algo", self.algo.clone().map(Value::from));
        set("adversary", self.adversary.clone().map(Value::from));
        set("delays", self.delays.clone().map(Value::from));
        set("K", self.arms.map(Value::from));
        set("T", self.rounds.map(Value::from));
        set("instance_seed", self.instance_seed.map(Value::from));
        set("delta", self.delta.map(Value::from));
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| Value::from(p.to_string_lossy().into_owned()))
        };
        set("csv", path(&self.csv));
        set("json", path(&self.json));
        set("trace_dir", path(&self.trace_dir));
        if map.contains_key("k") && map.contains_key("K") {
            map.remove("k");
        }
        if map.contains_key("t") && map.contains_key("T") {
            map.remove("t");
        }

        let existing_base = map
            .get("seeds")
            .and_then(|s| s.get("base"))
            .and_then(Value::as_u64)
            .unwrap_or(0);
        match (&self.seeds, self.seed_base) {
            (Some(text), base) => {
                let seeds = if text.contains(',') || text.trim_start().starts_with('[') {
                    let list = text
                        .trim_matches(|c| c == '[' || c == ']')
                        .split(',')
                        .map(|s| s.trim().parse::<u64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| format!("--seeds {text:?} is not a count or seed list"))?;
                    json!(list)
                } else {
                    let count: u64 = text
                        .trim()
                        .parse()
                        .map_err(|_| format!("--seeds {text:?} is not a count or seed list"))?;
                    json!({"count": count, "base": base.unwrap_or(existing_base)})
                };
                map.insert("seeds".into(), seeds);
            }
            (None, Some(base)) => {
                let count = map
                    .get("seeds")
                    .and_then(|s| s.get("count"))
                    .and_then(Value::as_u64)
                    .unwrap_or(1);
                map.insert("seeds".into(), json!({"count": count, "base": base}));
            }
            (None, None) => {}
        }
        Ok(())
    }
}

fn load_object(path: Option<&Path>) -> Result<Map<String, Value>, String> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    match serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))? {
        Value::Object(map) => Ok(map),
        _ => Err(format!("{}: expected a JSON object", path.display())),
    }
}

fn open_output(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn print_summary(label: &str, s: &Summary) {
    let mut line = format!(
        "{label}runs={} mean={:.4} se={:.4} median={:.4} q{}={:.4} max={:.4}",
        s.runs,
        s.mean,
        s.std_err,
        s.median,
        1.0 - s.delta,
        s.q_delta,
        s.max
    );
    let b = &s.mean_bounds;
    let v = &s.violations;
    for (name, mean, frac) in [
        ("cor1", b.cor1, v.cor1),
        ("cor2", b.cor2, v.cor2),
        ("skip", b.skip, v.skip),
        ("thm4_worst", b.thm4_worst, v.thm4_worst),
        ("thm4_bestarm", b.thm4_bestarm, v.thm4_bestarm),
    ] {
        if let (Some(mean), Some(frac)) = (mean, frac) {
            line.push_str(&format!(" bound_{name}={mean:.4} (exceeded by {frac:.3})"));
        }
    }
    eprintln!("{line}");
}

fn cmd_run(config: Option<PathBuf>, overrides: &Overrides) -> Result<(), (u8, String)> {
    let invalid = |e: String| (EXIT_INVALID_CONFIG, e);
    let mut map = load_object(config.as_deref()).map_err(invalid)?;
    overrides.apply(&mut map).map_err(invalid)?;
    let config = RunConfig::from_value(Value::Object(map)).map_err(|e| invalid(e.to_string()))?;
    let failed = |e: String| (EXIT_INVALID_CONFIG, e);

    let trace_dir = config.trace_dir.clone();
    let results = for_each_seed(&config, trace_dir.is_some(), |ep| {
        if let (Some(dir), Some(trace)) = (&trace_dir, &ep.trace) {
            write_trace_file(dir, ep.report.seed, trace).map_err(|e| format!("trace: {e}"))?;
        }
        Ok::<_, String>(ep.report)
    })
    .map_err(|e| failed(e.to_string()))?;
    let reports = results
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(failed)?;
    let summary = aggregate(&reports, config.delta).map_err(|e| failed(e.to_string()))?;

    let io_err = |e: &dyn std::fmt::Display| failed(e.to_string());
    match &config.csv {
        Some(path) => {
            let file = open_output(path).map_err(|e| io_err(&e))?;
            write_reports_csv(file, &reports).map_err(|e| io_err(&e))?;
        }
        None => write_reports_csv(io::stdout().lock(), &reports).map_err(|e| io_err(&e))?,
    }
    if let Some(path) = &config.json {
        let mut file = open_output(path).map_err(|e| io_err(&e))?;
        write_run_json(&mut file, &config, &summary, &reports).map_err(|e| io_err(&e))?;
        file.flush().map_err(|e| io_err(&e))?;
    }
    print_summary("", &summary);
    Ok(())
}

fn cmd_sweep(
    config: Option<PathBuf>,
    grid: &[String],
    overrides: &Overrides,
) -> Result<(), (u8, String)> {
    let invalid = |e: String| (EXIT_INVALID_CONFIG, e);
    let mut map = load_object(config.as_deref()).map_err(invalid)?;
    overrides.apply(&mut map).map_err(invalid)?;
    // output paths belong to the sweep, not to each grid point
    let csv = map
        .remove("csv")
        .and_then(|v| v.as_str().map(PathBuf::from));
    let json_path = map
        .remove("json")
        .and_then(|v| v.as_str().map(PathBuf::from));
    map.remove("trace_dir");
    let mut spec = SweepSpec::from_value(Value::Object(map)).map_err(|e| invalid(e.to_string()))?;
    for arg in grid {
        let (field, values) = parse_axis(arg).map_err(|e| invalid(e.to_string()))?;
        spec.set_axis(field, values);
    }
    // every point is validated before the first run
    spec.configs().map_err(|e| invalid(e.to_string()))?;
    let points = run_sweep(&spec).map_err(|e| invalid(e.to_string()))?;

    let failed = |e: &dyn std::fmt::Display| (EXIT_INVALID_CONFIG, e.to_string());
    let rows: Vec<_> = points
        .iter()
        .map(|p| (p.point, p.reports.clone()))
        .collect();
    match &csv {
        Some(path) => {
            let file = open_output(path).map_err(|e| failed(&e))?;
            write_sweep_csv(file, &rows).map_err(|e| failed(&e))?;
        }
        None => write_sweep_csv(io::stdout().lock(), &rows).map_err(|e| failed(&e))?,
    }
    if let Some(path) = &json_path {
        let mut file = open_output(path).map_err(|e| failed(&e))?;
        serde_json::to_writer_pretty(&mut file, &points).map_err(|e| failed(&e))?;
        file.flush().map_err(|e| failed(&e))?;
    }
    for p in &points {
        print_summary(
            &format!("point {} {} ", p.point, Value::Object(p.assignment.clone())),
            &p.summary,
        );
    }
    Ok(())
}

fn cmd_verify(
    config: Option<PathBuf>,
    suite_seed: Option<u64>,
    instances: Option<usize>,
    overrides: &Overrides,
) -> Result<(), (u8, String)> {
    let invalid = |e: String| (EXIT_INVALID_CONFIG, e);
    let mut map = load_object(config.as_deref()).map_err(invalid)?;
    overrides.apply(&mut map).map_err(invalid)?;
    let user_config = if map.is_empty() {
        None
    } else {
        Some(RunConfig::from_value(Value::Object(map)).map_err(|e| invalid(e.to_string()))?)
    };

    let mut options = SuiteOptions::default();
    if let Some(seed) = suite_seed {
        options.seed = seed;
    }
    if let Some(n) = instances {
        options.deda_instances = n;
    }
    let mut outcomes: Vec<CheckOutcome> = run_suite(&options);
    if let Some(cfg) = &user_config {
        outcomes.extend(verify_config(cfg).map_err(|e| invalid(e.to_string()))?);
    }
    let mut out = io::stdout().lock();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{status} {}: {}", o.name, o.detail);
    }
    if let Some(path) = user_config.as_ref().and_then(|c| c.json.as_ref()) {
        let file = open_output(path).map_err(|e| invalid(e.to_string()))?;
        serde_json::to_writer_pretty(file, &outcomes).map_err(|e| invalid(e.to_string()))?;
    }
    let failures = outcomes.iter().filter(|o| !o.passed).count();
    if failures > 0 {
        return Err((EXIT_VERIFY_FAILED, format!("{failures} check(s) failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID_CONFIG
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { config, overrides } => cmd_run(config, &overrides),
        Command::Sweep {
            config,
            grid,
            overrides,
        } => cmd_sweep(config, &grid, &overrides),
        Command::Verify {
            config,
            suite_seed,
            instances,
            overrides,
        } => cmd_verify(config, suite_seed, instances, &overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
