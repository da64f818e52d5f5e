use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use flattop::asymptotics::{deficiency_exact, deficiency_rate, edf_deficiency};
use flattop::bandwidth::{
    cv_bandwidth_gaussian_measure, default_frequency_max, ecf_of_measure, mass_measure, select_cutoff,
    threshold_level, uniform_frequency_grid, DEFAULT_FREQ_POINTS,
};
use flattop::cdf::{iqr, smoothed_cdf_steps};
use flattop::io::{parse_grid, read_sample};
use flattop::kernel::kernel_cross_moment;
use flattop::sim::{run_scenario, zero_bias_experiment, EstimatorKind, HarnessConfig, HARNESS_TABLE_TOL};
use flattop::survival::{kaplan_meier, smoothed_survival_steps};
use flattop::{
    AssumptionTag, BandwidthRule, CensoredSample, EcfCurve, EstimatorConfig, KernelTable, MseExpansion, Scenario,
    SecondOrderKind, SmoothingKernel, StepEstimate,
};
use serde::Serialize;

use crate::args::{BandwidthArgs, BandwidthOpts, Command, DeficiencyArgs, EstimateArgs, KernelTableArgs, SimulateArgs};
use crate::config::*;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Points on the default estimation grid.
const DEFAULT_GRID_POINTS: usize = 201;

pub fn resolve(cmd: &Command) -> Result<Resolved> {
    match cmd {
        Command::Estimate(a) => Ok(Resolved::Estimate(resolve_estimate(a, false)?)),
        Command::Survival(a) => Ok(Resolved::Survival(resolve_estimate(a, true)?)),
        Command::Bandwidth(a) => Ok(Resolved::Bandwidth(resolve_bandwidth_cmd(a)?)),
        Command::Deficiency(a) => Ok(Resolved::Deficiency(resolve_deficiency(a)?)),
        Command::Simulate(a) if a.zero_bias => Ok(Resolved::ZeroBias(resolve_zero_bias(a)?)),
        Command::Simulate(a) => Ok(Resolved::Simulate(resolve_simulate(a)?)),
        Command::KernelTable(a) => Ok(Resolved::KernelTable(resolve_kernel_table(a)?)),
    }
}

pub fn execute(run: &Resolved) -> Result<()> {
    match run {
        Resolved::Estimate(c) => run_estimate(c, false),
        Resolved::Survival(c) => run_estimate(c, true),
        Resolved::Bandwidth(c) => run_bandwidth(c),
        Resolved::Deficiency(c) => run_deficiency(c),
        Resolved::Simulate(c) => run_simulate(c),
        Resolved::ZeroBias(c) => run_zero_bias(c),
        Resolved::KernelTable(c) => run_kernel_table(c),
    }
}

fn measure_of(sample: &CensoredSample, survival: bool) -> Result<StepEstimate> {
    Ok(if survival {
        kaplan_meier(sample)?
    } else {
        mass_measure(sample)?
    })
}

fn resolve_bandwidth(
    opts: &BandwidthOpts,
    kernel: &KernelConfig,
    measure: &StepEstimate,
    n: usize,
) -> Result<BandwidthChoice> {
    let flat = kernel.flat_top()?;
    match opts.bandwidth.as_str() {
        "auto" => {
            let (spec, _, _) = flat.ok_or_else(|| {
                CliError::usage("--bandwidth auto needs a flat-top kernel; use cv or a value with --kernel gaussian")
            })?;
            let mut rule = BandwidthRule::for_mode(mode(opts.bw_mode), n, spec.effective_c);
            if let Some(c) = opts.bw_c {
                rule.c_const = c;
            }
            if let Some(e) = opts.bw_eps {
                rule.epsilon = e;
            }
            rule.validate()?;
            let freq_max = match opts.freq_max {
                Some(f) => f,
                None => default_frequency_max(measure.jump_locations())?,
            };
            Ok(BandwidthChoice::Auto {
                rule,
                freq_max,
                freq_points: opts.freq_points.unwrap_or(DEFAULT_FREQ_POINTS),
            })
        }
        "cv" => {
            if flat.is_some() {
                return Err(CliError::usage("--bandwidth cv applies to --kernel gaussian only"));
            }
            let scale = iqr(measure.jump_locations()) / 1.349;
            let scale = if scale > 0.0 { scale } else { 1.0 };
            Ok(BandwidthChoice::Cv {
                h_min: 0.05 * scale,
                h_max: 2.0 * scale,
                points: 30,
            })
        }
        v => {
            let h: f64 = v
                .parse()
                .map_err(|_| CliError::usage(format!("--bandwidth must be auto, cv or a number, got `{v}`")))?;
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::usage(format!("--bandwidth must be positive, got {h}")));
            }
            Ok(BandwidthChoice::Fixed { h })
        }
    }
}

fn resolve_estimate(a: &EstimateArgs, survival: bool) -> Result<EstimateConfig> {
    let kernel = KernelConfig::resolve(&a.kernel)?;
    let sample = read_sample(&a.input)?;
    let measure = measure_of(&sample, survival)?;
    let bandwidth = resolve_bandwidth(&a.bw, &kernel, &measure, sample.len())?;
    let grid = match &a.grid {
        Some(g) => {
            parse_grid(g)?;
            g.clone()
        }
        None => {
            let xs = sample.times();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.1 * (hi - lo).max(1e-12);
            let start = a.boundary.unwrap_or(lo - pad);
            format!("{}:{}:{}", start, (hi + pad).max(start), DEFAULT_GRID_POINTS)
        }
    };
    Ok(EstimateConfig {
        input: a.input.clone(),
        output: a.output.clone(),
        kernel,
        bandwidth,
        boundary: a.boundary,
        standardize: a.standardize,
        grid,
        json: a.json,
        ecf_out: a.bw.ecf_out.clone(),
    })
}

fn resolve_bandwidth_cmd(a: &BandwidthArgs) -> Result<BandwidthConfig> {
    let kernel = KernelConfig::resolve(&a.kernel)?;
    let sample = read_sample(&a.input)?;
    let measure = mass_measure(&sample)?;
    let bandwidth = resolve_bandwidth(&a.bw, &kernel, &measure, sample.len())?;
    Ok(BandwidthConfig {
        input: a.input.clone(),
        output: a.output.clone(),
        kernel,
        bandwidth,
        ecf_out: a.bw.ecf_out.clone(),
    })
}

fn parse_kind(s: &str) -> Result<SecondOrderKind> {
    if s == "log" {
        return Ok(SecondOrderKind::LogFactor);
    }
    if let Some(d) = s.strip_prefix("power:") {
        let delta = d
            .parse()
            .map_err(|_| CliError::usage(format!("--kind power:<delta> needs a number, got `{d}`")))?;
        return Ok(SecondOrderKind::Power { delta });
    }
    Err(CliError::usage(format!("--kind must be power:<delta> or log, got `{s}`")))
}

fn resolve_deficiency(a: &DeficiencyArgs) -> Result<DeficiencyConfig> {
    if let Some(tag) = &a.assumption {
        let assumption: AssumptionTag = tag.parse()?;
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::usage(format!("{flag} is required with --assumption")));
        let scale = match assumption {
            AssumptionTag::C { .. } => a.scale.unwrap_or(1.0),
            _ => need(a.scale, "--scale")?,
        };
        if !(a.n >= 2.0 && a.n.fract() == 0.0) {
            return Err(CliError::usage("--n must be an integer of at least 2 for the EDF comparison"));
        }
        return Ok(DeficiencyConfig::Edf {
            assumption,
            cdf: need(a.cdf, "--cdf")?,
            density: need(a.density, "--density")?,
            scale,
            n: a.n as usize,
            kernel: KernelConfig::resolve(&a.kernel)?,
            output: a.output.clone(),
        });
    }
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::usage(format!("{flag} is required")));
    let kind = parse_kind(a.kind.as_deref().ok_or_else(|| CliError::usage("--kind is required"))?)?;
    let lead = need(a.lead, "--lead")?;
    let rate = need(a.rate, "--rate")?;
    Ok(DeficiencyConfig::Expansions {
        s: MseExpansion::new(lead, rate, need(a.second_s, "--second-s")?, kind)?,
        t: MseExpansion::new(lead, rate, need(a.second_t, "--second-t")?, kind)?,
        n: a.n,
        output: a.output.clone(),
    })
}

fn resolve_simulate(a: &SimulateArgs) -> Result<SimulateConfig> {
    let scenario = Scenario::preset(&a.scenario, a.n.clone(), a.reps, a.seed)?;
    scenario.validate()?;
    let estimators = match &a.estimators {
        None => EstimatorKind::ALL.to_vec(),
        Some(list) => {
            let mut v = list.iter().map(|s| s.parse()).collect::<flattop::Result<Vec<EstimatorKind>>>()?;
            v.sort();
            v.dedup();
            v
        }
    };
    let bw_mode = mode(a.bw_mode);
    let bw_c = a.bw_c.unwrap_or(BandwidthRule::for_mode(bw_mode, 2, 1.0).c_const);
    let mut cfg = SimulateConfig {
        scenario,
        estimators,
        bw_mode,
        bw_c,
        bw_eps: a.bw_eps,
        table_tol: HARNESS_TABLE_TOL,
        path_points: 256,
        cv_points: 30,
        max_attempts: 50,
        trace: a.trace,
        output: a.output.clone(),
        json: a.json,
        rules: Vec::new(),
    };
    if let Some(t) = a.table_tol {
        cfg.table_tol = t;
    }
    Ok(cfg)
}

fn resolve_zero_bias(a: &SimulateArgs) -> Result<ZeroBiasConfig> {
    let n = match a.n.as_slice() {
        [n] => *n,
        _ => return Err(CliError::usage("--zero-bias takes exactly one --n")),
    };
    Ok(ZeroBiasConfig {
        kernel: KernelConfig::Trapezoid {
            c: 0.75,
            effective_c: 0.75,
            table_tol: a.table_tol.unwrap_or(DEFAULT_TABLE_TOL),
            cache_dir: None,
        },
        n,
        h: a.h.unwrap_or(0.5),
        reps: a.reps,
        seed: a.seed,
        eval_points: a.eval_points.clone().unwrap_or_else(|| vec![0.0, 2.0, 5.0]),
        output: a.output.clone(),
        json: a.json,
    })
}

fn resolve_kernel_table(a: &KernelTableArgs) -> Result<KernelTableConfig> {
    let kernel = KernelConfig::resolve(&a.kernel)?;
    if kernel.flat_top()?.is_none() {
        return Err(CliError::usage("kernel-table needs a flat-top kernel"));
    }
    if let Some(g) = &a.grid {
        parse_grid(g)?;
    }
    Ok(KernelTableConfig {
        kernel,
        output: a.output.clone(),
        grid: a.grid.clone(),
        csv_out: a.csv_out.clone(),
    })
}

/// Echo per-sample-size rules into a simulate config.
pub fn annotate(run: &mut Resolved) {
    if let Resolved::Simulate(c) = run {
        c.rules.clear();
        for &n in &c.scenario.sample_sizes {
            for &kind in &c.estimators {
                let effective_c = match kind {
                    EstimatorKind::Trapezoid => 0.75,
                    EstimatorKind::SmoothTrapezoid => 0.5,
                    _ => continue,
                };
                let mut rule = BandwidthRule::for_mode(c.bw_mode, n, effective_c);
                rule.c_const = c.bw_c;
                if let Some(e) = c.bw_eps {
                    rule.epsilon = e;
                }
                c.rules.push(RuleEcho {
                    n,
                    estimator: kind,
                    rule,
                });
            }
        }
    }
}

fn load_table(kernel: &KernelConfig) -> Result<Option<KernelTable>> {
    Ok(match kernel.flat_top()? {
        None => None,
        Some((spec, tol, None)) => Some(KernelTable::build(spec, tol)?),
        Some((spec, tol, Some(dir))) => Some(KernelTable::load_or_build(&dir, spec, tol)?),
    })
}

/// Destination for an artifact: a file, or stdout when `None`.
fn sink(path: &Option<std::path::PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: &Option<std::path::PathBuf>, value: &T) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_ecf(path: &Path, curve: &EcfCurve, threshold: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "freq,magnitude,threshold")?;
    for (f, m) in curve.freqs.iter().zip(&curve.magnitudes) {
        writeln!(w, "{f},{m},{threshold}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Selection {
    method: &'static str,
    h: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
}

fn select(
    choice: &BandwidthChoice,
    measure: &StepEstimate,
    n: usize,
    ecf_out: &Option<std::path::PathBuf>,
) -> Result<Selection> {
    match choice {
        BandwidthChoice::Fixed { h } => Ok(Selection {
            method: "fixed",
            h: *h,
            cutoff: None,
            threshold: None,
        }),
        BandwidthChoice::Cv { .. } => {
            let grid = choice.cv_grid().expect("cv grid");
            Ok(Selection {
                method: "cv",
                h: cv_bandwidth_gaussian_measure(measure, &grid)?,
                cutoff: None,
                threshold: None,
            })
        }
        BandwidthChoice::Auto {
            rule,
            freq_max,
            freq_points,
        } => {
            let freqs = uniform_frequency_grid(*freq_max, *freq_points)?;
            let curve = ecf_of_measure(measure, n, &freqs)?;
            let threshold = threshold_level(rule.c_const, n);
            if let Some(p) = ecf_out {
                write_ecf(p, &curve, threshold)?;
            }
            let cutoff = select_cutoff(&curve, rule)?;
            Ok(Selection {
                method: "auto",
                h: rule.effective_c / cutoff,
                cutoff: Some(cutoff),
                threshold: Some(threshold),
            })
        }
    }
}

fn run_estimate(c: &EstimateConfig, survival: bool) -> Result<()> {
    let sample = read_sample(&c.input)?;
    let measure = measure_of(&sample, survival)?;
    let table = load_table(&c.kernel)?;
    let kernel = match &table {
        Some(t) => SmoothingKernel::FlatTop(t),
        None => SmoothingKernel::Gaussian,
    };
    let sel = select(&c.bandwidth, &measure, sample.len(), &c.ecf_out)?;
    let mut est = EstimatorConfig::new(kernel, sel.h).standardized(c.standardize);
    est.boundary = c.boundary;
    let grid = parse_grid(&c.grid)?;
    let values = if survival {
        smoothed_survival_steps(&measure, &est, &grid)?
    } else {
        smoothed_cdf_steps(&measure, &est, &grid)?
    };
    eprintln!("{}", serde_json::to_string(&sel)?);
    if c.json {
        #[derive(Serialize)]
        struct Out<'a> {
            schema: u32,
            bandwidth: &'a Selection,
            t: &'a [f64],
            value: &'a [f64],
        }
        return write_json(
            &c.output,
            &Out {
                schema: SCHEMA,
                bandwidth: &sel,
                t: &grid,
                value: &values,
            },
        );
    }
    let mut w = sink(&c.output)?;
    writeln!(w, "t,value")?;
    for (t, v) in grid.iter().zip(&values) {
        writeln!(w, "{t},{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn run_bandwidth(c: &BandwidthConfig) -> Result<()> {
    let sample = read_sample(&c.input)?;
    let measure = mass_measure(&sample)?;
    let sel = select(&c.bandwidth, &measure, sample.len(), &c.ecf_out)?;
    #[derive(Serialize)]
    struct Out<'a> {
        schema: u32,
        n: usize,
        #[serde(flatten)]
        selection: &'a Selection,
    }
    write_json(
        &c.output,
        &Out {
            schema: SCHEMA,
            n: sample.len(),
            selection: &sel,
        },
    )
}

fn run_deficiency(c: &DeficiencyConfig) -> Result<()> {
    match c {
        DeficiencyConfig::Expansions { s, t, n, output } => {
            let (limit, rate) = deficiency_rate(s, t)?;
            let d = deficiency_exact(s, t, *n)?;
            #[derive(Serialize)]
            struct Out {
                schema: u32,
                n: f64,
                limit: f64,
                rate: String,
                deficiency: f64,
                scaled: f64,
            }
            write_json(
                output,
                &Out {
                    schema: SCHEMA,
                    n: *n,
                    limit,
                    rate: rate.to_string(),
                    deficiency: d,
                    scaled: d / rate.at(*n),
                },
            )
        }
        DeficiencyConfig::Edf {
            assumption,
            cdf,
            density,
            scale,
            n,
            kernel,
            output,
        } => {
            let table = load_table(kernel)?;
            let k = match &table {
                Some(t) => SmoothingKernel::FlatTop(t),
                None => SmoothingKernel::Gaussian,
            };
            let cm = kernel_cross_moment(k)?;
            let d = edf_deficiency(assumption, *cdf, *density, cm.value, *n, *scale)?;
            #[derive(Serialize)]
            struct Out {
                schema: u32,
                n: usize,
                cross_moment: f64,
                deficiency: f64,
            }
            write_json(
                output,
                &Out {
                    schema: SCHEMA,
                    n: *n,
                    cross_moment: cm.value,
                    deficiency: d,
                },
            )
        }
    }
}

fn run_simulate(c: &SimulateConfig) -> Result<()> {
    let mut cfg = HarnessConfig::new(c.table_tol)?;
    cfg.bw_mode = c.bw_mode;
    cfg.bw_c = Some(c.bw_c);
    cfg.bw_eps = c.bw_eps;
    cfg.path_points = c.path_points;
    cfg.cv_points = c.cv_points;
    cfg.max_attempts = c.max_attempts;
    cfg.trace = c.trace;
    let report = run_scenario(&c.scenario, &c.estimators, &cfg)?;
    if c.json {
        return write_json(&c.output, &report);
    }
    let mut w = sink(&c.output)?;
    w.write_all(report.to_csv().as_bytes())?;
    w.flush()?;
    Ok(())
}

fn run_zero_bias(c: &ZeroBiasConfig) -> Result<()> {
    let table = load_table(&c.kernel)?.ok_or_else(|| CliError::usage("zero-bias experiment needs a flat-top kernel"))?;
    let report = zero_bias_experiment(&table, c.n, c.h, c.reps, c.seed, &c.eval_points)?;
    if c.json {
        return write_json(&c.output, &report);
    }
    let mut w = sink(&c.output)?;
    writeln!(w, "t,truth,mean,bias,se")?;
    for p in &report.points {
        let se = p.se.map(|v| v.to_string()).unwrap_or_else(|| "NaN".into());
        writeln!(w, "{},{},{},{},{}", p.t, p.truth, p.mean, p.bias, se)?;
    }
    w.flush()?;
    Ok(())
}

fn run_kernel_table(c: &KernelTableConfig) -> Result<()> {
    let table = Arc::new(load_table(&c.kernel)?.ok_or_else(|| CliError::usage("kernel-table needs a flat-top kernel"))?);
    if let Some(p) = &c.output {
        let mut w = BufWriter::new(File::create(p)?);
        table.write_binary(&mut w)?;
        w.flush()?;
    }
    if let Some(g) = &c.grid {
        let xs = parse_grid(g)?;
        let mut w = sink(&c.csv_out)?;
        writeln!(w, "x,K,Kbar,Kbar_rectified")?;
        for x in xs {
            writeln!(w, "{x},{},{},{}", table.kernel(x), table.kbar(x), table.kbar_rectified(x))?;
        }
        w.flush()?;
    }
    #[derive(Serialize)]
    struct Summary {
        schema: u32,
        tol: f64,
        tail_cutoff: f64,
        step: f64,
        points: usize,
        kernel_mass: f64,
    }
    let summary = Summary {
        schema: SCHEMA,
        tol: table.tol(),
        tail_cutoff: table.tail_cutoff(),
        step: table.step(),
        points: table.len(),
        kernel_mass: table.kernel_mass(),
    };
    eprintln!("{}", serde_json::to_string(&summary)?);
    Ok(())
}
