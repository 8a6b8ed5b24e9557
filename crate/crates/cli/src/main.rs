use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use flowsurrogate::cnn::save_weights_files;
use flowsurrogate::gbm::GbmModel;
use flowsurrogate::harness::{
    benchmark, crossvalidate, export_dataset, load_dataset, read_fields_csv, synth_generate, write_fields_csv,
    CvOutcome, SynthConfig,
};
use flowsurrogate::mesh::{load_gates, load_mesh};
use flowsurrogate::pipeline::{
    project_field, run, train_deflection, train_fill_time, training_item, Models, PipelineConfig, DEFLECTION_STEM,
    FILL_TIME_MODEL_FILE,
};
use flowsurrogate::projection::export_debug;
use flowsurrogate_service::{AppState, ServiceConfig, DEFAULT_CAPACITY, DEFAULT_UPLOAD_LIMIT};

#[derive(Parser)]
#[command(name = "flowsurrogate", version, about = "Fill-time and deflection surrogate for injection moulding")]
struct Cli {
    /// TOML file with pipeline settings (sampling, smoothing, GBM, CNN).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        samples: usize,
        #[arg(long, default_value_t = 2_000)]
        min_vertices: usize,
        #[arg(long, default_value_t = 10_000)]
        max_vertices: usize,
    },
    /// Fit the fill-time regressor on a dataset.
    TrainFilltime {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Train the deflection network; needs the fill-time model in `--models`.
    TrainDeflection {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Predict per-vertex fields for a mesh and gates file (CSV output).
    Predict {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        gates: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_deflection: bool,
    },
    /// K-fold cross-validation of the whole chain.
    Crossvalidate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        seed: u64,
        /// Report JSON.
        #[arg(long)]
        out: PathBuf,
        /// Per-vertex predictions of every test sample.
        #[arg(long)]
        points: Option<PathBuf>,
    },
    /// Time the three pipeline stages on one sample.
    Benchmark {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        gates: PathBuf,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = DEFAULT_CAPACITY)]
        capacity: usize,
    },
    /// Write the projection raster of a per-vertex fill-time field.
    ExportDebug {
        #[arg(long)]
        mesh: PathBuf,
        /// Fields CSV; its fill_time column is rasterised.
        #[arg(long)]
        fields: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "raster")]
        stem: String,
    },
}

fn pipeline_config(path: Option<&Path>, seed: u64) -> Result<PipelineConfig> {
    let mut cfg: PipelineConfig = match path {
        Some(p) => toml::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    cfg.seed = seed;
    cfg.gbm.seed = seed;
    cfg.cnn.seed = seed;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn load_training_set(data: &Path) -> Result<Vec<flowsurrogate::Sample>> {
    let samples = load_dataset(data).with_context(|| format!("loading dataset {}", data.display()))?;
    if let Some(s) = samples.iter().find(|s| !s.has_truth()) {
        bail!("sample {} has no reference fields; training needs both fill time and deflection", s.name);
    }
    Ok(samples)
}

fn write_points(path: &Path, out: &CvOutcome) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "sample,fold,vertex_id,fill_time_pred,fill_time_true,deflection_pred,deflection_true")?;
    for p in &out.points {
        for v in 0..p.fill_time_true.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.name, p.fold, v, p.fill_time_pred[v], p.fill_time_true[v], p.deflection_pred[v], p.deflection_true[v]
            )?;
        }
    }
    Ok(w.flush()?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Synth { out, seed, samples, min_vertices, max_vertices } => {
            let cfg = SynthConfig { samples, min_vertices, max_vertices, seed, ..Default::default() };
            let data = synth_generate(&cfg)?;
            let manifest = export_dataset(&data, &out, Some(&cfg))?;
            println!("name,vertices,faces");
            for e in manifest.samples {
                println!("{},{},{}", e.name, e.vertex_count, e.face_count);
            }
        }
        Command::TrainFilltime { data, models, seed } => {
            let cfg = pipeline_config(cfg_path, seed)?;
            let samples = load_training_set(&data)?;
            let items = samples.iter().enumerate().map(|(i, s)| training_item(s, i, &cfg)).collect::<Result<Vec<_>, _>>()?;
            let gbm = train_fill_time(&items.iter().collect::<Vec<_>>(), &cfg)?;
            std::fs::create_dir_all(&models)?;
            std::fs::write(models.join(FILL_TIME_MODEL_FILE), gbm.to_json())?;
            println!("samples,trees,nodes");
            println!("{},{},{}", samples.len(), gbm.trees.len(), gbm.node_count());
        }
        Command::TrainDeflection { data, models, seed, epochs } => {
            let mut cfg = pipeline_config(cfg_path, seed)?;
            if let Some(e) = epochs {
                cfg.cnn.epochs = e;
            }
            let gbm_path = models.join(FILL_TIME_MODEL_FILE);
            let gbm = GbmModel::<f64>::from_json(
                &std::fs::read_to_string(&gbm_path).with_context(|| format!("reading {}", gbm_path.display()))?,
            )?;
            let samples = load_training_set(&data)?;
            let items = samples.iter().enumerate().map(|(i, s)| training_item(s, i, &cfg)).collect::<Result<Vec<_>, _>>()?;
            let (net, report) = train_deflection(&items.iter().collect::<Vec<_>>(), &gbm, &cfg)?;
            save_weights_files(&net, &models, DEFLECTION_STEM)?;
            std::fs::write(models.join("deflection_loss.csv"), report.to_csv())?;
            print!("{}", report.to_csv());
        }
        Command::Predict { mesh, gates, models, seed, out, no_deflection } => {
            let cfg = pipeline_config(cfg_path, seed)?;
            let loaded = load_mesh::<f64>(&mesh).with_context(|| format!("loading {}", mesh.display()))?;
            let doc = load_gates(&gates).with_context(|| format!("loading {}", gates.display()))?;
            let resolved = loaded.resolve_gates(&doc)?;
            let params = doc.parameters.clone().unwrap_or_default();
            let models = Models::load_dir(&models)?;
            let pred = run(loaded.mesh, &resolved, &params, &models, &cfg, !no_deflection)?;
            write_fields_csv(output(out.as_deref())?, &pred.fill_time, pred.deflection.as_deref())?;
            let t = pred.timings;
            eprintln!(
                "preprocessing {:.3}s, fill time {:.3}s, deflection {:.3}s, total {:.3}s",
                t.preprocessing, t.fill_time, t.deflection, t.total
            );
        }
        Command::Crossvalidate { data, folds, seed, out, points } => {
            let cfg = pipeline_config(cfg_path, seed)?;
            let samples = load_training_set(&data)?;
            let result = crossvalidate(&samples, folds, &cfg, seed)?;
            std::fs::write(&out, serde_json::to_vec_pretty(&result.report)?)?;
            if let Some(p) = points {
                write_points(&p, &result)?;
            }
            let r = &result.report;
            println!("fold,fill_time_rmse,fill_time_mae,deflection_rmse,deflection_mae,baseline_deflection_rmse");
            for f in &r.per_fold {
                println!(
                    "{},{},{},{},{},{}",
                    f.fold,
                    f.fill_time.pooled_rmse,
                    f.fill_time.pooled_mae,
                    f.deflection.pooled_rmse,
                    f.deflection.pooled_mae,
                    f.baseline_deflection.pooled_rmse
                );
            }
        }
        Command::Benchmark { mesh, gates, models, seed, out } => {
            let cfg = pipeline_config(cfg_path, seed)?;
            let mesh_text = std::fs::read_to_string(&mesh).with_context(|| format!("reading {}", mesh.display()))?;
            let gates_text = std::fs::read_to_string(&gates).with_context(|| format!("reading {}", gates.display()))?;
            let models = Models::load_dir(&models)?;
            let rec = benchmark(&mesh_text, &gates_text, &models, &cfg)?;
            if let Some(p) = out {
                std::fs::write(p, serde_json::to_vec_pretty(&rec)?)?;
            }
            let t = rec.timings;
            println!("stage,seconds");
            println!("preprocessing,{}", t.preprocessing);
            println!("fill_time,{}", t.fill_time);
            println!("deflection,{}", t.deflection);
            println!("total,{}", t.total);
        }
        Command::Serve { models, seed, addr, capacity } => {
            let cfg = pipeline_config(cfg_path, seed)?;
            let models = Models::load_dir(&models)?;
            let state = AppState::new(models, ServiceConfig { pipeline: cfg, capacity, upload_limit: DEFAULT_UPLOAD_LIMIT });
            eprintln!("listening on http://{addr}");
            tokio::runtime::Runtime::new()?.block_on(flowsurrogate_service::serve(addr, state))?;
        }
        Command::ExportDebug { mesh, fields, out, stem } => {
            let loaded = load_mesh::<f64>(&mesh)?;
            let (fill, _) = read_fields_csv(File::open(&fields)?, &fields.display().to_string())?;
            let projected = project_field(&loaded.mesh, &fill)?;
            let sidecar = export_debug(&projected.raster, &out, &stem)?;
            println!("{}", serde_json::to_string_pretty(&sidecar)?);
        }
    }
    Ok(())
}
