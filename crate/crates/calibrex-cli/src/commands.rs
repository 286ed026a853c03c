//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use calibrex::bench::{
    run_benchmark, BandwidthHeuristic, BandwidthPolicy, BenchConfig, BenchmarkReport, BinHeuristic,
    BinPolicy, EstimatorConfig, RunOptions,
};
use calibrex::binned::{
    binned_mce, diagram_points, write_diagram_csv, AffectationMapping, BinningScheme,
};
use calibrex::core::{aggregate_classwise, CalibrationSetting, EceEstimate, LabeledScores};
use calibrex::density::{
    bootstrap_reliability, estimate_lce, silverman_bandwidth, write_curve_csv, Grid,
    ReliabilityCurve,
};
use calibrex::io::read_scores_file;
use calibrex::synth::{sample_dataset, MixtureSpec};

use crate::svg;
use crate::{
    BenchmarkArgs, CliError, CliResult, DiagramArgs, EvalArgs, ReliabilityArgs, SynthArgs,
};

pub fn parse_setting(text: &str) -> CliResult<CalibrationSetting> {
    match text {
        "confidence" => Ok(CalibrationSetting::Confidence),
        "class-wise" | "class_wise" | "classwise" => Ok(CalibrationSetting::ClassWise),
        other => {
            if let Some(idx) = other.strip_prefix("class:") {
                let class: usize = idx.parse().map_err(|_| {
                    CliError::Usage(format!("bad class index in setting {other:?}"))
                })?;
                Ok(CalibrationSetting::ClassSpecific(class))
            } else {
                Err(CliError::Usage(format!(
                    "unknown setting {other:?}; use confidence, class-wise, or class:<index>"
                )))
            }
        }
    }
}

fn parse_bins(text: &str) -> CliResult<BinPolicy> {
    if text == "sqrt" {
        return Ok(BinPolicy::Heuristic(BinHeuristic::Sqrt));
    }
    let bins: usize = text
        .parse()
        .map_err(|_| CliError::Usage(format!("bad bin count {text:?}; use a number or sqrt")))?;
    if bins == 0 {
        return Err(CliError::Usage("bin count must be positive".into()));
    }
    Ok(BinPolicy::Fixed(bins))
}

fn parse_bandwidth(text: &str) -> CliResult<BandwidthPolicy> {
    if text == "auto" || text == "silverman" {
        return Ok(BandwidthPolicy::Heuristic(BandwidthHeuristic::Silverman));
    }
    let h: f64 = text.parse().map_err(|_| {
        CliError::Usage(format!("bad bandwidth {text:?}; use a number or auto"))
    })?;
    if !h.is_finite() || h <= 0.0 {
        return Err(CliError::Usage("bandwidth must be positive".into()));
    }
    Ok(BandwidthPolicy::Fixed(h))
}

fn check_setting_in_range(setting: CalibrationSetting, data: &LabeledScores) -> CliResult<()> {
    if let CalibrationSetting::ClassSpecific(c) = setting {
        if c >= data.n_classes() {
            return Err(CliError::Usage(format!(
                "class index {c} out of range for {} classes",
                data.n_classes()
            )));
        }
    }
    Ok(())
}

fn mce_for_setting(
    data: &LabeledScores,
    setting: CalibrationSetting,
    bins: BinPolicy,
) -> CliResult<EceEstimate> {
    let apply = |setting: CalibrationSetting| -> CliResult<EceEstimate> {
        let events = data.extract_events(setting)?;
        let binning = BinningScheme::uniform(bins.resolve(events.len()))?;
        let mapping = AffectationMapping::one_bin(events.scores(), &binning)?;
        Ok(binned_mce(&events, &mapping)?)
    };
    match setting {
        CalibrationSetting::ClassWise => {
            let per_class: CliResult<Vec<EceEstimate>> = (0..data.n_classes())
                .map(|c| apply(CalibrationSetting::ClassSpecific(c)))
                .collect();
            Ok(aggregate_classwise(&per_class?)?)
        }
        other => apply(other),
    }
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let setting = parse_setting(&args.setting)?;
    let binned_kinds = ["legacy", "adaptive", "convex", "adaptive-convex", "adaptive_convex", "mce"];
    if binned_kinds.contains(&args.estimator.as_str()) && args.bandwidth.is_some() {
        return Err(CliError::Usage(format!(
            "--bandwidth does not apply to the {} estimator",
            args.estimator
        )));
    }
    if args.estimator == "kde" && args.bins.is_some() {
        return Err(CliError::Usage("--bins does not apply to the kde estimator".into()));
    }

    let data = read_scores_file(&args.scores)?;
    check_setting_in_range(setting, &data)?;

    let estimate = if args.estimator == "mce" {
        let bins = parse_bins(args.bins.as_deref().unwrap_or("sqrt"))?;
        mce_for_setting(&data, setting, bins)?
    } else {
        let estimator = match args.estimator.as_str() {
            "legacy" => EstimatorConfig::Legacy {
                bins: parse_bins(args.bins.as_deref().unwrap_or("sqrt"))?,
            },
            "adaptive" => EstimatorConfig::Adaptive {
                bins: parse_bins(args.bins.as_deref().unwrap_or("sqrt"))?,
            },
            "convex" => EstimatorConfig::Convex {
                bins: parse_bins(args.bins.as_deref().unwrap_or("sqrt"))?,
            },
            "adaptive-convex" | "adaptive_convex" => EstimatorConfig::AdaptiveConvex {
                bins: parse_bins(args.bins.as_deref().unwrap_or("sqrt"))?,
            },
            "kde" => EstimatorConfig::Kde {
                bandwidth: parse_bandwidth(args.bandwidth.as_deref().unwrap_or("auto"))?,
            },
            other => {
                return Err(CliError::Usage(format!(
                    "unknown estimator {other:?}; use legacy, adaptive, convex, adaptive-convex, kde, or mce"
                )))
            }
        };
        calibrex::bench::estimate_for_setting(&estimator, &data, setting)?
    };

    if args.json {
        println!("{}", serde_json::to_string(&estimate).map_err(calibrex::Error::from)?);
    } else {
        println!("estimator: {}", estimate.estimator_id);
        println!("setting: {}", estimate.setting);
        for (key, value) in &estimate.hyperparams {
            println!("{key}: {value}");
        }
        println!("value: {}", estimate.value);
    }
    Ok(())
}

fn resolve_curve(args: &ReliabilityArgs, data: &LabeledScores) -> CliResult<ReliabilityCurve> {
    let setting = parse_setting(&args.setting)?;
    if setting == CalibrationSetting::ClassWise {
        return Err(CliError::Usage(
            "reliability curves are defined for the confidence and class-specific settings; \
             pick class:<index> or confidence"
                .into(),
        ));
    }
    check_setting_in_range(setting, data)?;
    let events = data.extract_events(setting)?;
    let bandwidth = match parse_bandwidth(&args.bandwidth)? {
        BandwidthPolicy::Fixed(h) => h,
        BandwidthPolicy::Heuristic(BandwidthHeuristic::Silverman) => {
            silverman_bandwidth(events.scores())?
        }
    };
    let grid = Grid::default();
    let curve = if args.bootstrap == 0 {
        estimate_lce(&events, bandwidth, &grid)?
    } else {
        let (low, high) = parse_band(&args.band)?;
        bootstrap_reliability(&events, bandwidth, &grid, args.bootstrap, (low, high), args.seed)?
    };
    Ok(curve)
}

fn parse_band(text: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("bad band {text:?}; use low,high")));
    }
    let low: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad band percentile {:?}", parts[0])))?;
    let high: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad band percentile {:?}", parts[1])))?;
    Ok((low, high))
}

pub fn cmd_reliability(args: &ReliabilityArgs) -> CliResult<()> {
    let data = read_scores_file(&args.scores)?;
    let curve = resolve_curve(args, &data)?;
    let mut comments = vec![
        format!("setting: {}", parse_setting(&args.setting)?),
        format!("bandwidth: {}", curve.bandwidth()),
    ];
    if args.bootstrap > 0 {
        comments.push(format!("bootstrap: {} band: {}", args.bootstrap, args.band));
        comments.push(format!("seed: {}", args.seed));
    }
    let mut out = BufWriter::new(File::create(&args.out).map_err(calibrex::Error::from)?);
    write_curve_csv(&mut out, &curve, args.every, &comments)?;
    out.flush().map_err(calibrex::Error::from)?;
    if let Some(svg_path) = &args.svg {
        let title = format!("Reliability curve (h={:.4})", curve.bandwidth());
        std::fs::write(svg_path, svg::reliability_svg(&curve, &title))
            .map_err(calibrex::Error::from)?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn cmd_diagram(args: &DiagramArgs) -> CliResult<()> {
    let setting = parse_setting(&args.setting)?;
    if setting == CalibrationSetting::ClassWise {
        return Err(CliError::Usage(
            "reliability diagrams are drawn per event stream; pick class:<index> or confidence"
                .into(),
        ));
    }
    let data = read_scores_file(&args.scores)?;
    check_setting_in_range(setting, &data)?;
    let events = data.extract_events(setting)?;
    let bins = parse_bins(&args.bins)?.resolve(events.len());
    let binning = match args.binning.as_str() {
        "uniform" => BinningScheme::uniform(bins)?,
        "adaptive" => BinningScheme::adaptive(events.scores(), bins.min(events.len()))?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown binning {other:?}; use uniform or adaptive"
            )))
        }
    };
    let mut comments = vec![
        format!("setting: {setting}"),
        format!("binning: {} requested_bins: {bins}", args.binning),
    ];
    if binning.n_bins() != bins {
        comments.push(format!(
            "merged: duplicate adaptive thresholds collapsed to {} bins",
            binning.n_bins()
        ));
    }
    let mapping = AffectationMapping::one_bin(events.scores(), &binning)?;
    let points = diagram_points(&events, &mapping)?;
    let mut out = BufWriter::new(File::create(&args.out).map_err(calibrex::Error::from)?);
    write_diagram_csv(&mut out, &points, &comments)?;
    out.flush().map_err(calibrex::Error::from)?;
    if let Some(svg_path) = &args.svg {
        let title = format!("Reliability diagram ({} bins)", binning.n_bins());
        std::fs::write(svg_path, svg::diagram_svg(&points, &title))
            .map_err(calibrex::Error::from)?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let spec = MixtureSpec::sample_with_modes(args.classes, args.dims, args.modes, args.seed)?;
    let dataset = sample_dataset(&spec, args.n, args.seed)?;
    let mut out = BufWriter::new(File::create(&args.out).map_err(calibrex::Error::from)?);
    dataset.write_csv(&mut out)?;
    out.flush().map_err(calibrex::Error::from)?;
    let spec_json = serde_json::to_string_pretty(&spec).map_err(calibrex::Error::from)?;
    std::fs::write(&args.spec_out, spec_json + "\n").map_err(calibrex::Error::from)?;
    println!(
        "wrote {} ({} samples) and {}",
        args.out.display(),
        args.n,
        args.spec_out.display()
    );
    Ok(())
}

fn write_benchmark_plots(report: &BenchmarkReport, out_dir: &Path) -> CliResult<()> {
    let mut settings: Vec<String> = report.rows.iter().map(|r| r.setting.to_string()).collect();
    settings.sort();
    settings.dedup();
    for setting in settings {
        let mut series: Vec<svg::BenchSeries> = Vec::new();
        for row in report.rows.iter().filter(|r| r.setting.to_string() == setting) {
            let label = format!("{} ({})", row.estimator_id, row.hyperparams);
            let point = (row.eval_size as f64, row.median_p95_error);
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push(point),
                None => series.push(svg::BenchSeries {
                    label,
                    points: vec![point],
                }),
            }
        }
        let title = format!("Estimator approximation error, {setting} setting");
        let path = out_dir.join(format!("plot_{setting}.svg"));
        std::fs::write(path, svg::benchmark_svg(&series, &title))
            .map_err(calibrex::Error::from)?;
    }
    Ok(())
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config).map_err(calibrex::Error::from)?;
    let config: BenchConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("bad benchmark config: {e}")))?;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    std::fs::create_dir_all(&args.out).map_err(calibrex::Error::from)?;
    let workers = args.workers.or_else(|| {
        std::env::var("CALIBREX_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let opts = RunOptions {
        out_dir: Some(args.out.clone()),
        resume: args.resume,
        workers,
    };
    let report = run_benchmark(&config, &opts)?;

    let report_path = args.out.join("report.csv");
    std::fs::write(&report_path, report.to_csv_string()).map_err(calibrex::Error::from)?;
    let provenance = serde_json::to_string_pretty(&report.provenance).map_err(calibrex::Error::from)?;
    std::fs::write(args.out.join("provenance.json"), provenance + "\n")
        .map_err(calibrex::Error::from)?;
    write_benchmark_plots(&report, &args.out)?;

    println!(
        "wrote {} ({} rows, {} cells, {} failed)",
        report_path.display(),
        report.rows.len(),
        report.provenance.n_cells,
        report.provenance.failed_cells.len()
    );
    Ok(())
}

