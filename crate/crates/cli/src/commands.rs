use std::fs;
use std::path::{Path, PathBuf};

use dyspn::bench::{bench_all, bench_variant, render};
use dyspn::gradcheck::{check_gradients, random_problem, GradcheckOptions};
use dyspn::io::{self, write_atomic, RawTensor, RunConfig};
use dyspn::metrics::{evaluate, rmse_curve};
use dyspn::oracle::oracle_propagate;
use dyspn::synth::{
    default_sigma, edge_affinity, edge_strength, generate_scene, nearest_fill, radial_offsets, random_bundle,
    schedule_attention, schedule_by_name, sparsify, RandomBundleOptions, SceneSpec,
};
use dyspn::{build_neighborhood, DepthGrid, Error, Precision, PropagationConfig, Result, Variant};

use crate::inputs::{config_dir, load_bundle, read_grid, resolve};
use crate::{BenchArgs, EvalArgs, GradcheckArgs, OracleArgs, Outcome, PropagateArgs, SynthArgs};

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn outcome(pass: bool) -> Outcome {
    if pass {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

fn canonical(base: &Path, p: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    p.as_ref()
        .map(|p| {
            let full = resolve(base, p);
            fs::canonicalize(&full).map_err(|e| Error::Config(format!("{}: {e}", full.display())))
        })
        .transpose()
}

fn read_config(path: &Path) -> Result<(String, RunConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((text, cfg))
}

pub fn propagate(args: &PropagateArgs, threads_given: bool) -> Result<Outcome> {
    let (text, cfg) = read_config(&args.config)?;
    let base = config_dir(&args.config);
    let run = || run_propagation(&cfg, &base, args.output.clone().unwrap_or_else(|| base.join("out")));
    match RunConfig::threads(&text).filter(|_| !threads_given) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

fn run_propagation(cfg: &RunConfig, base: &Path, out_dir: PathBuf) -> Result<Outcome> {
    let bundle = load_bundle(cfg, base)?;
    let pcfg = cfg.propagation();
    let (out, tape) = dyspn::propagate(
        &bundle.initial,
        &bundle.affinity,
        &bundle.attention,
        &bundle.spec,
        &pcfg,
    )?;
    let gt = cfg.gt.as_ref().map(|p| io::read_depth(&resolve(base, p))).transpose()?;

    create_dir(&out_dir)?;
    let (depth, clamped) = DepthGrid::from_grid_clamped(out.clone());
    if clamped > 0 {
        eprintln!("warning: {clamped} negative depths clamped to 0 in depth.pgm (depth.dyt keeps raw values)");
    }
    io::write_depth(&out_dir.join("depth.pgm"), &depth)?;
    io::write_tensor(&out_dir.join("depth.dyt"), &RawTensor::from(&out))?;
    if cfg.tape {
        let (h, w) = out.dims();
        let values = tape.states().iter().flat_map(|s| s.values().iter().copied()).collect();
        io::write_tensor(
            &out_dir.join("tape.dyt"),
            &RawTensor::f64(vec![tape.states().len(), h, w], values)?,
        )?;
    }

    let recorded = RunConfig {
        depth: canonical(base, &cfg.depth)?,
        affinity: canonical(base, &cfg.affinity)?,
        attention: canonical(base, &cfg.attention)?,
        offsets: canonical(base, &cfg.offsets)?,
        gt: canonical(base, &cfg.gt)?,
        ..cfg.clone()
    };
    write_atomic(&out_dir.join("run.cfg"), recorded.serialize().as_bytes())?;

    let (h, w) = out.dims();
    println!(
        "propagated {h}x{w} {} for {} steps ({}), output in {}",
        cfg.variant,
        pcfg.steps,
        pcfg.precision,
        out_dir.display()
    );
    if let Some(gt) = gt {
        let report = evaluate(&out, &gt)?;
        write_atomic(&out_dir.join("metrics.txt"), report.to_text().as_bytes())?;
        write_atomic(&out_dir.join("metrics.csv"), report.to_csv().as_bytes())?;
        let mut curve = String::from("step,rmse_mm\n");
        for (t, r) in rmse_curve(&tape, &gt)?.iter().enumerate() {
            curve.push_str(&format!("{t},{r}\n"));
        }
        write_atomic(&out_dir.join("rmse_curve.csv"), curve.as_bytes())?;
        print!("{}", report.to_text());
    }
    Ok(Outcome::Ok)
}

pub fn oracle_check(args: &OracleArgs) -> Result<Outcome> {
    let (bundle, cfg) = match &args.config {
        Some(path) => {
            let (_, cfg) = read_config(path)?;
            (load_bundle(&cfg, &config_dir(path))?, cfg.propagation())
        }
        None => {
            let mut opts = RandomBundleOptions::new(args.variant, args.size, args.size, args.steps);
            opts.integer_offsets = true;
            let cfg = PropagationConfig {
                steps: args.steps,
                precision: args.precision,
                ..PropagationConfig::default()
            };
            cfg.validate()?;
            (random_bundle(&opts, args.seed), cfg)
        }
    };
    let reference = oracle_propagate(&bundle.initial, &bundle.affinity, &bundle.attention, &bundle.spec, &cfg)?;
    let (fast, _) = dyspn::propagate(&bundle.initial, &bundle.affinity, &bundle.attention, &bundle.spec, &cfg)?;
    let (h, w) = fast.dims();
    let max_abs = fast.max_abs_diff(&reference);
    let (measure, value, tolerance) = match cfg.precision {
        Precision::F64 => ("max-abs-diff", max_abs, args.tolerance.unwrap_or(1e-10)),
        Precision::F32 => {
            let rel = fast
                .values()
                .iter()
                .zip(reference.values())
                .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                .fold(0.0, f64::max);
            ("max-rel-diff", rel, args.tolerance.unwrap_or(1e-4))
        }
    };
    let pass = value <= tolerance;
    println!(
        "oracle-check {} {h}x{w} steps={} precision={}: max-abs-diff {max_abs:.3e}",
        bundle.spec.variant(),
        cfg.steps,
        cfg.precision
    );
    println!("{measure} {value:.3e} tolerance {tolerance:.1e} {}", verdict(pass));
    Ok(outcome(pass))
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<Outcome> {
    let (bundle, gt) = random_problem(args.variant, args.size, args.steps, args.seed);
    let cfg = PropagationConfig::with_steps(args.steps);
    cfg.validate()?;
    let opts = GradcheckOptions {
        tolerance: args.tolerance,
        ..GradcheckOptions::default()
    };
    let report = check_gradients(&bundle, &gt, &cfg, &opts)?;
    println!(
        "gradcheck {} {}x{} steps={} seed={}",
        args.variant, args.size, args.size, args.steps, args.seed
    );
    for c in &report.classes {
        println!(
            "{:<10} checked {:>6} skipped {:>4} max-rel-error {:.3e}",
            c.name, c.checked, c.skipped, c.max_rel_error
        );
    }
    println!("tolerance {:.1e} {}", report.tolerance, verdict(report.passed()));
    Ok(outcome(report.passed()))
}

pub fn synth(args: &SynthArgs) -> Result<Outcome> {
    let (h, w) = (args.height, args.width);
    let scene = generate_scene(&SceneSpec::new(args.scene, h, w, args.seed))?;
    let sparse = sparsify(&scene.ground_truth, args.sparsity, args.seed)?;
    let init = nearest_fill(&sparse)?;
    let offsets = (args.variant == Variant::Deformable).then(|| radial_offsets(h, w, 0.25, args.seed));
    let spec = build_neighborhood(args.variant, h, w, offsets.clone())?;
    let sigma = args.sigma.unwrap_or_else(|| default_sigma(&scene.guidance));
    let affinity = edge_affinity(&scene.guidance, &spec, sigma)?;
    let mut schedule = schedule_by_name(&args.schedule, spec.ring_count())?;
    if args.edge_gain > 0.0 {
        schedule = schedule.with_edges(edge_strength(&scene.guidance), args.edge_gain);
    }
    let attention = schedule_attention(&schedule, args.steps, &spec)?;

    let dir = &args.output;
    create_dir(dir)?;
    io::write_depth(&dir.join("gt.pgm"), &scene.ground_truth)?;
    io::write_depth(&dir.join("sparse.pgm"), &sparse)?;
    io::write_depth(&dir.join("init.pgm"), &init)?;
    io::write_tensor(&dir.join("guidance.dyt"), &RawTensor::from(&scene.guidance))?;
    io::write_tensor(&dir.join("affinity.dyt"), &RawTensor::from(&affinity))?;
    io::write_tensor(&dir.join("attention.dyt"), &RawTensor::from(&attention))?;
    if let Some(o) = &offsets {
        io::write_tensor(&dir.join("offsets.dyt"), &RawTensor::from(o))?;
    }

    let cfg = RunConfig {
        variant: args.variant,
        steps: args.steps,
        depth: Some("init.pgm".into()),
        affinity: Some("affinity.dyt".into()),
        attention: Some("attention.dyt".into()),
        offsets: offsets.as_ref().map(|_| "offsets.dyt".into()),
        gt: Some("gt.pgm".into()),
        seed: args.seed,
        scene: args.scene,
        height: h,
        width: w,
        sparsity: args.sparsity,
        sigma: Some(sigma),
        schedule: args.schedule.clone(),
        edge_gain: args.edge_gain,
        ..RunConfig::default()
    };
    cfg.propagation().validate()?;
    write_atomic(&dir.join("run.cfg"), cfg.serialize().as_bytes())?;
    println!(
        "synth {} {h}x{w} seed={} sparsity={} ({} valid samples), {} inputs in {}",
        args.scene,
        args.seed,
        args.sparsity,
        sparse.valid_count(),
        args.variant,
        dir.display()
    );
    Ok(Outcome::Ok)
}

pub fn eval(args: &EvalArgs) -> Result<Outcome> {
    let pred = read_grid(&args.pred)?;
    let gt = io::read_depth(&args.gt)?;
    let report = evaluate(&pred, &gt).map_err(|e| match e {
        Error::Shape { .. } => Error::Config(format!("{} vs {}: {e}", args.pred.display(), args.gt.display())),
        other => other,
    })?;
    print!("{}", report.to_text());
    println!();
    print!("{}", report.to_csv());
    if let Some(p) = &args.csv {
        write_atomic(p, report.to_csv().as_bytes())?;
    }
    Ok(Outcome::Ok)
}

pub fn bench(args: &BenchArgs) -> Result<Outcome> {
    let cfg = PropagationConfig::with_steps(args.steps);
    cfg.validate()?;
    if args.size == 0 {
        return Err(Error::Config("--size must be at least 1".into()));
    }
    let results = match args.variant {
        Some(v) => vec![bench_variant(v, args.size, args.size, &cfg, args.reps, args.seed)?],
        None => bench_all(args.size, args.size, &cfg, args.reps, args.seed)?,
    };
    println!(
        "bench {0}x{0}, {1} steps, best of {2} ({3} threads)",
        args.size,
        args.steps,
        args.reps.max(1),
        rayon::current_num_threads()
    );
    print!("{}", render(&results));
    Ok(Outcome::Ok)
}
