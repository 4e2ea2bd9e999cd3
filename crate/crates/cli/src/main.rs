use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qaexplain_core::bench::{
    build_training_set, label_distribution, load_dataset, report, run_components, write_report,
};
use qaexplain_core::bench::{BenchContext, ReportOptions};
use qaexplain_core::components::{parse_synonyms, Components, Task};
use qaexplain_core::explain::TemplateRepository;
use qaexplain_core::kg::{read_store, write_snapshot, Graph, Iri, PrefixTable, Snapshot};
use qaexplain_core::outcome::{train, ClassifierKind, TrainOptions};
use qaexplain_core::pipeline::{PipelineConfig, PipelineTrace, StageModels};
use qaexplain_service::feedback::FeedbackLog;
use qaexplain_service::survey::{default_questions, parse_questions};
use qaexplain_service::AppState;

#[derive(Parser)]
#[command(name = "qaexplain", version, about = "Explainable question answering over a knowledge graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse N-Triples and write a reloadable store snapshot.
    Ingest {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Relation synonym lexicon (surface TAB <iri>) to bundle.
        #[arg(long)]
        synonyms: Option<PathBuf>,
    },
    /// Train the outcome classifier for one pipeline stage.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        kg: PathBuf,
        #[arg(long, value_parser = parse_task)]
        component: Task,
        #[arg(long, default_value = "lr", value_parser = parse_kind)]
        kind: ClassifierKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight examples inversely to class frequency.
        #[arg(long)]
        balanced: bool,
    },
    /// Answer one question.
    Ask {
        #[arg(long)]
        kg: PathBuf,
        /// Directory holding ned.json, rl.json and qb.json.
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
        question: String,
        /// Print the per-stage explanations.
        #[arg(long)]
        explain: bool,
        /// Write the trace as JSON.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        synonyms: Option<PathBuf>,
    },
    /// Score the components and cross-validate every classifier kind.
    Evaluate {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Comma-separated kinds (lr, svm, rf, nb, dt); all by default.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        kinds: Vec<ClassifierKind>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        balanced: bool,
    },
    /// Run the HTTP API and serve the survey UI.
    Serve {
        /// Without --kg and --models, /api/ask answers 503.
        #[arg(long, requires = "models")]
        kg: Option<PathBuf>,
        #[arg(long, requires = "kg")]
        models: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
        #[arg(long)]
        synonyms: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// 0 picks a free port.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// JSON question set; the bundled ten questions by default.
        #[arg(long)]
        survey_questions: Option<PathBuf>,
        #[arg(long, default_value = "feedback.jsonl")]
        feedback_log: PathBuf,
        /// Directory with the built web UI.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<ClassifierKind, String> {
    s.parse()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// A snapshot or N-Triples file, with `--synonyms` added to any bundled ones.
fn load_store(kg: &Path, synonyms: Option<&Path>) -> Result<Snapshot> {
    let mut store = read_store(&read(kg)?).with_context(|| format!("loading {}", kg.display()))?;
    if let Some(path) = synonyms {
        let extra = parse_synonyms(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
        store.relation_synonyms.extend(extra);
    }
    Ok(store)
}

fn load_templates(path: Option<&Path>) -> Result<TemplateRepository> {
    match path {
        Some(p) => TemplateRepository::load(p).with_context(|| format!("loading templates {}", p.display())),
        None => Ok(TemplateRepository::shipped()),
    }
}

fn split(store: Snapshot) -> (Graph, Vec<(String, Iri)>) {
    (store.graph, store.relation_synonyms)
}

fn load_pipeline(
    kg: &Path,
    models: &Path,
    templates: Option<&Path>,
    synonyms: Option<&Path>,
) -> Result<PipelineConfig> {
    let (graph, synonyms) = split(load_store(kg, synonyms)?);
    let models = StageModels::load_dir(models).with_context(|| format!("loading models from {}", models.display()))?;
    Ok(PipelineConfig {
        graph: Arc::new(graph),
        components: Arc::new(Components::standard(synonyms)),
        models,
        templates: Arc::new(load_templates(templates)?),
        prefixes: PrefixTable::well_known(),
    })
}

fn print_trace(trace: &PipelineTrace, prefixes: &PrefixTable) {
    println!("Question: {}", trace.question.text);
    for stage in &trace.stages {
        let p = stage.prediction.probabilities[stage.outcome_class.index()];
        let flag = if stage.mismatch { "  (prediction overruled)" } else { "" };
        println!("[{}] {} p={p:.2}{flag}", stage.task, stage.outcome_class);
        for e in &stage.explanations {
            println!("    {}", e.text);
        }
    }
    match (&trace.final_answer, trace.stage(Task::Qb).output.built_query()) {
        (Some(answer), Some(query)) => {
            println!("Query: {}", prefixes.render_query(query));
            println!("Answer: {answer}");
        }
        _ => println!("Answer: none (no query was built)"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { kg, out, synonyms } => {
            let store = load_store(&kg, synonyms.as_deref())?;
            std::fs::write(&out, write_snapshot(&store)).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "wrote {} triples and {} synonyms to {}",
                store.graph.len(),
                store.relation_synonyms.len(),
                out.display()
            );
        }
        Command::Train { dataset, kg, component, kind, out, synonyms, seed, balanced } => {
            let (graph, synonyms) = split(load_store(&kg, synonyms.as_deref())?);
            let data = load_dataset(&dataset, &graph, &PrefixTable::well_known())?;
            let runs = run_components(&data.records, &graph, &Components::standard(synonyms));
            let examples = build_training_set(&data.records, &runs, component);
            let counts = label_distribution(&examples);
            eprintln!("{component}: {} examples, labels {counts:?}", examples.len());
            let model = train(kind, component, &examples, &kind.default_grid(), TrainOptions { seed, balanced })?;
            model.save(&out)?;
            eprintln!("wrote {} model ({}) to {}", kind.display_name(), model.hyperparameters, out.display());
        }
        Command::Ask { kg, models, templates, question, explain, trace_out, synonyms } => {
            let config = load_pipeline(&kg, &models, templates.as_deref(), synonyms.as_deref())?;
            let mut trace = config.answer_question(&question)?;
            if !explain {
                trace.strip_explanations();
            }
            print_trace(&trace, &config.prefixes);
            if let Some(path) = trace_out {
                let json = serde_json::to_string_pretty(&trace)? + "\n";
                std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Evaluate { kg, dataset, templates, kinds, out, synonyms, seed, folds, balanced } => {
            let (graph, synonyms) = split(load_store(&kg, synonyms.as_deref())?);
            let data = load_dataset(&dataset, &graph, &PrefixTable::well_known())?;
            let ctx = BenchContext {
                graph: Arc::new(graph),
                components: Arc::new(Components::standard(synonyms)),
                prefixes: PrefixTable::well_known(),
            };
            let templates = Arc::new(load_templates(templates.as_deref())?);
            let kinds = if kinds.is_empty() { ClassifierKind::ALL.to_vec() } else { kinds };
            let options = ReportOptions { kinds, train: TrainOptions { seed, balanced }, folds };
            let result = report(&data, &ctx, Some(&templates), &options)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_report(&result, &out)?;
            print!("{}", result.to_text());
        }
        Command::Serve { kg, models, templates, synonyms, host, port, survey_questions, feedback_log, static_dir } => {
            let pipeline = match (kg, models) {
                (Some(kg), Some(models)) => {
                    Some(load_pipeline(&kg, &models, templates.as_deref(), synonyms.as_deref())?)
                }
                _ => {
                    eprintln!("no --kg/--models given; /api/ask will answer 503");
                    None
                }
            };
            let templates = match &pipeline {
                Some(p) => Arc::clone(&p.templates),
                None => Arc::new(load_templates(templates.as_deref())?),
            };
            let questions = match survey_questions {
                Some(path) => parse_questions(&read(&path)?)?,
                None => default_questions(),
            };
            if let Some(dir) = &static_dir {
                if !dir.is_dir() {
                    bail!("static directory {} does not exist", dir.display());
                }
            }
            let log = FeedbackLog::open(&feedback_log)?;
            let state = AppState::new(pipeline, templates, questions, log);
            let app = qaexplain_service::router(state, static_dir.as_deref());
            tokio::runtime::Runtime::new()?.block_on(async {
                let listener = tokio::net::TcpListener::bind(SocketAddr::new(host, port)).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                qaexplain_service::serve(listener, app).await
            })?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
