use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use stvo_esn::bench::plot::sweep_chart;
use stvo_esn::bench::results::ResultFormat;
use stvo_esn::bench::sweep::load_jsonl;
use stvo_esn::bench::{
    apply_override, calibrate, export_results, import_results_json, linear_baseline, prepare, sweep, CalibrationGrid,
    CalibrationSettings, Evaluation, ExperimentRecord, ModelArtifact,
};
use stvo_esn::{ActivationKind, Dataset, DatasetKind, ExperimentConfig, Split};

use crate::args::{CalibrateArgs, EvalArgs, ExperimentArgs, FetchArgs, InspectArgs, PlotArgs, SweepArgs, TrainArgs};
use crate::errors::UsageError;
use crate::fetch;
use crate::manifest::Manifest;

const DEFAULT_DATA_DIR: &str = "data";

/// Parses "0..10", "1,4,7" or "3".
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || UsageError(format!("invalid seed list '{text}'"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b <= a {
            return Err(bad().into());
        }
        return Ok((a..b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| bad().into()))
        .collect()
}

fn usage(e: stvo_esn::Error) -> anyhow::Error {
    match e {
        stvo_esn::Error::InvalidConfig(msg) => UsageError(msg).into(),
        other => other.into(),
    }
}

/// Builds the experiment configuration: file, then flags, then `--set`.
pub fn resolve_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut doc: toml::Table = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            text.parse()
                .map_err(|e: toml::de::Error| UsageError(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    doc.entry("dataset").or_insert_with(|| "mnist".into());
    doc.entry("n_theta").or_insert(toml::Value::Integer(500));
    doc.entry("activation").or_insert_with(|| "stvo".into());

    let mut flags: Vec<(String, String)> = Vec::new();
    if let Some(d) = &args.dataset {
        let kind: DatasetKind = d.parse().map_err(usage)?;
        flags.push(("dataset".into(), format!("\"{}\"", kind.name())));
    }
    if let Some(n) = args.n_theta {
        flags.push(("n_theta".into(), n.to_string()));
    }
    if let Some(a) = &args.activation {
        let kind: ActivationKind = a.parse().map_err(usage)?;
        flags.push(("activation".into(), format!("\"{}\"", kind.name())));
    }
    if let Some(s) = &args.seeds {
        let seeds = parse_seeds(s)?;
        let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
        flags.push(("mask_seeds".into(), format!("[{}]", list.join(", "))));
    }
    if let Some(v) = args.amplitude {
        flags.push(("stvo.amplitude".into(), format!("{v:?}")));
    }
    if let Some(v) = args.j_dc {
        flags.push(("stvo.j_dc".into(), format!("{v:?}")));
    }
    if let Some(v) = args.d_t {
        flags.push(("stvo.d_t".into(), format!("{v:?}")));
    }
    if let Some(v) = args.ridge {
        flags.push(("ridge_lambda".into(), format!("{v:?}")));
    }
    if let Some(v) = args.n_f {
        flags.push(("n_f".into(), v.to_string()));
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        flags.push((k.trim().to_string(), v.trim().to_string()));
    }
    for (k, v) in &flags {
        apply_override(&mut doc, k, v).map_err(usage)?;
    }
    ExperimentConfig::from_table(doc).map_err(usage)
}

pub fn data_root(flag: Option<&Path>, config: Option<&ExperimentConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.and_then(|c| c.data_dir.clone()))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
}

fn load(kind: DatasetKind, root: &Path, split: Split, manifest: &mut Manifest) -> Result<Dataset> {
    let (img, lbl) = kind.paths(root, split)?;
    manifest.add_input(&img)?;
    manifest.add_input(&lbl)?;
    let ds = kind.load(root, split)?;
    info!("loaded {} ({} images)", ds.name, ds.len());
    Ok(ds)
}

fn print_metrics(eval: &Evaluation) {
    println!("accuracy: {}", eval.accuracy);
    println!("nrmse: {}", eval.nrmse);
}

pub fn fetch_cmd(args: &FetchArgs) -> Result<()> {
    let text = match &args.mirrors {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => fetch::BUILTIN_MIRRORS.to_string(),
    };
    let list = fetch::parse_mirrors(&text)?;
    let dataset = match &args.dataset {
        Some(d) => Some(d.parse::<DatasetKind>().map_err(usage)?.name().to_string()),
        None => None,
    };
    let root = data_root(args.data_dir.as_deref(), None);
    fetch::fetch(&list, dataset.as_deref(), &root)
}

pub fn calibrate_cmd(args: &CalibrateArgs) -> Result<()> {
    let config = resolve_config(&args.experiment)?;
    let root = data_root(args.experiment.data_dir.as_deref(), Some(&config));
    let mut manifest = Manifest::new("calibrate", Some(&config));
    let train = load(config.dataset, &root, Split::Train, &mut manifest)?;
    let defaults = CalibrationGrid::default();
    let grid = CalibrationGrid {
        j_dc: args.grid_j_dc.clone().unwrap_or(defaults.j_dc),
        amplitude: args.grid_amplitude.clone().unwrap_or(defaults.amplitude),
        d_t: args.grid_d_t.clone().unwrap_or(defaults.d_t),
    };
    let settings = CalibrationSettings {
        n_theta: args.calib_n_theta,
        validation: args.validation,
        seed: config.seeds()[0],
        max_fit: args.max_fit,
        block_rows: config.block_rows,
    };
    let result = calibrate(&train, config.pca_target(), &grid, &config.stvo, &settings)?;

    println!("j_dc\tamplitude\td_t\tvalidation_accuracy");
    for s in &result.scores {
        println!("{}\t{}\t{:e}\t{:.4}", s.j_dc, s.amplitude, s.d_t, s.accuracy);
    }
    println!(
        "best: j_dc = {}, amplitude = {}, d_t = {:e} (validation accuracy {:.4})",
        result.best.j_dc, result.best.amplitude, result.best.d_t, result.best_accuracy
    );

    let out = &args.experiment.out;
    fs::create_dir_all(out)?;
    let cal_path = out.join("calibration.json");
    fs::write(&cal_path, serde_json::to_string_pretty(&result)?)?;
    let mut calibrated = config.clone();
    calibrated.stvo = result.best;
    let cfg_path = out.join("calibrated.toml");
    fs::write(&cfg_path, calibrated.to_toml()?)?;
    manifest.add_artifact(&cal_path)?;
    manifest.add_artifact(&cfg_path)?;
    manifest.write(out)?;
    println!("wrote {} and {}", cal_path.display(), cfg_path.display());
    Ok(())
}

pub fn train_cmd(args: &TrainArgs) -> Result<()> {
    let config = resolve_config(&args.experiment)?;
    let root = data_root(args.experiment.data_dir.as_deref(), Some(&config));
    let seed = args.seed.unwrap_or(config.seeds()[0]);
    let mut manifest = Manifest::new("train", Some(&config));
    manifest.seeds = vec![seed];
    let train = load(config.dataset, &root, Split::Train, &mut manifest)?;
    let model = ModelArtifact::train(&config, &train, seed)?;
    let out = &args.experiment.out;
    let path = out.join(&args.model_name);
    model.save(&path)?;
    manifest.add_artifact(&path)?;
    manifest.write(out)?;
    println!(
        "wrote {} ({} {} n_theta={} n_f={} seed={})",
        path.display(),
        config.dataset,
        config.activation,
        config.n_theta,
        model.n_f(),
        seed
    );
    Ok(())
}

pub fn eval_cmd(args: &EvalArgs) -> Result<()> {
    let model = ModelArtifact::load(&args.model)?;
    let root = data_root(args.data_dir.as_deref(), Some(&model.config));
    let test = model.config.dataset.load(&root, Split::Test)?;
    let eval = model.evaluate(&test)?;
    print_metrics(&eval);
    if let Some(path) = &args.predictions {
        let text: String = eval.predictions.iter().map(|p| format!("{p}\n")).collect();
        fs::write(path, text)?;
    }
    Ok(())
}

pub fn baseline_cmd(args: &ExperimentArgs) -> Result<()> {
    let config = resolve_config(args)?;
    let root = data_root(args.data_dir.as_deref(), Some(&config));
    let mut manifest = Manifest::new("baseline", Some(&config));
    let train = load(config.dataset, &root, Split::Train, &mut manifest)?;
    let test = load(config.dataset, &root, Split::Test, &mut manifest)?;
    let prepared = prepare(&train, &test, config.pca_target())?;
    let eval = linear_baseline(&prepared)?;
    print_metrics(&eval);
    Ok(())
}

fn write_charts(records: &[ExperimentRecord], out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut paths = Vec::new();
    for metric in ["accuracy", "nrmse"] {
        let path = out.join(format!("{metric}.svg"));
        fs::write(&path, sweep_chart(records, metric).to_svg())?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let config = resolve_config(&args.experiment)?;
    let root = data_root(args.experiment.data_dir.as_deref(), Some(&config));
    let activations: Vec<ActivationKind> = match &args.activations {
        Some(list) => list.iter().map(|a| a.parse().map_err(usage)).collect::<Result<_>>()?,
        None => ActivationKind::ALL.to_vec(),
    };
    let mut manifest = Manifest::new("sweep", Some(&config));
    let train = load(config.dataset, &root, Split::Train, &mut manifest)?;
    let test = load(config.dataset, &root, Split::Test, &mut manifest)?;
    let prepared = prepare(&train, &test, config.pca_target())?;
    let out = &args.experiment.out;
    fs::create_dir_all(out)?;
    let store = out.join("sweep.jsonl");
    let records = sweep(&config, &args.n_theta_values, &activations, &prepared, Some(&store)).map_err(usage)?;

    println!("activation\tn_theta\taccuracy_mean\taccuracy_std\tnrmse_mean");
    for r in &records {
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}",
            r.config.activation, r.config.n_theta, r.accuracy_mean, r.accuracy_std, r.nrmse_mean
        );
    }
    let csv = out.join("results.csv");
    let json = out.join("results.json");
    export_results(&records, &csv, ResultFormat::Csv)?;
    export_results(&records, &json, ResultFormat::Json)?;
    for p in [&store, &csv, &json] {
        manifest.add_artifact(p)?;
    }
    for p in write_charts(&records, out)? {
        manifest.add_artifact(&p)?;
    }
    manifest.write(out)?;
    println!("wrote results to {}", out.display());
    Ok(())
}

pub fn plot_cmd(args: &PlotArgs) -> Result<()> {
    let records = if args.input.extension().and_then(|e| e.to_str()) == Some("jsonl") {
        load_jsonl(&args.input)?
    } else {
        import_results_json(&args.input)?
    };
    for p in write_charts(&records, &args.out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn inspect_cmd(args: &InspectArgs) -> Result<()> {
    let m = ModelArtifact::load(&args.model)?;
    let enc = &m.readout.encoder;
    println!("dataset: {}", m.config.dataset);
    println!("classes: {}", m.n_classes);
    println!("activation: {}", enc.activation);
    println!("n_theta: {}", enc.n_theta());
    println!("n_f: {}", m.n_f());
    println!("explained_variance: {:.4}", m.pca.cumulative_ratio());
    println!("mask_seed: {}", m.seed);
    println!("mask_generator: {}", enc.mask.spec().generator);
    println!("j_dc: {}", enc.stvo.j_dc);
    println!("amplitude: {}", enc.stvo.amplitude);
    println!("d_t: {:e}", enc.stvo.d_t);
    println!(
        "state_reset: {}",
        if enc.stvo.reset_per_sample_block {
            "per-image"
        } else {
            "continuous"
        }
    );
    println!("ridge_lambda: {}", m.readout.weights.ridge_lambda);
    match m.readout.deflation {
        Some(d) => println!("common_mode_shrink: {d:e}"),
        None => println!("common_mode_shrink: none"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> ExperimentArgs {
        ExperimentArgs {
            config: None,
            dataset: None,
            n_theta: None,
            activation: None,
            seeds: None,
            amplitude: None,
            j_dc: None,
            d_t: None,
            ridge: None,
            n_f: None,
            data_dir: None,
            out: PathBuf::from("out"),
            set: vec![],
        }
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 1,9").unwrap(), vec![4, 1, 9]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn flags_override_file_and_set_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(
            &path,
            "dataset = \"fashion-mnist\"\nn_theta = 100\nactivation = \"relu\"\n[stvo]\nj_dc = 7.5\n",
        )
        .unwrap();
        let mut a = args();
        a.config = Some(path);
        a.n_theta = Some(300);
        a.seeds = Some("0..3".into());
        a.set = vec!["n_theta=400".into(), "stvo.amplitude=1".into()];
        let c = resolve_config(&a).unwrap();
        assert_eq!(c.dataset, DatasetKind::FashionMnist);
        assert_eq!(c.activation, ActivationKind::Relu);
        assert_eq!(c.n_theta, 400);
        assert_eq!(c.mask_seeds, vec![0, 1, 2]);
        assert_eq!(c.stvo, stvo_esn::StvoConfig::with_default_interval(7.5, 1.0));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let mut a = args();
        a.activation = Some("tanh".into());
        let err = resolve_config(&a).unwrap_err();
        assert_eq!(crate::errors::exit_code(&err), crate::errors::EXIT_USAGE);
        let mut a = args();
        a.set = vec!["bogus_key=1".into()];
        let err = resolve_config(&a).unwrap_err();
        assert_eq!(crate::errors::exit_code(&err), crate::errors::EXIT_USAGE);
    }

    #[test]
    fn data_root_precedence() {
        let mut c = ExperimentConfig::new(DatasetKind::Mnist, 1, ActivationKind::Stvo);
        assert_eq!(data_root(None, Some(&c)), PathBuf::from("data"));
        c.data_dir = Some(PathBuf::from("/cfg"));
        assert_eq!(data_root(None, Some(&c)), PathBuf::from("/cfg"));
        assert_eq!(data_root(Some(Path::new("/flag")), Some(&c)), PathBuf::from("/flag"));
    }
}
