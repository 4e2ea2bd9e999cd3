//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line
//! followed by indented details; the binary exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use qaexplain_core::bench::{build_training_set, explanation_stats, load_dataset, run_components, train_stage_models};
use qaexplain_core::components::{parse_synonyms, Components, Task};
use qaexplain_core::explain::{has_unresolved_placeholder, TemplateRepository};
use qaexplain_core::kg::{
    evaluate, AnswerSet, Graph, GraphOptions, Iri, Literal, PatternTerm, PrefixTable, Query, Term, Triple,
    TriplePattern, Variable,
};
use qaexplain_core::outcome::{
    cross_validate, fit, fold_assignment, label_example, train, ClassifierKind, Dataset, Hyperparameters, OutcomeClass,
    SoftmaxObjective, TrainOptions,
};
use qaexplain_core::pipeline::{explanation_flow, PipelineConfig};
use qaexplain_core::question::FeatureSchema;
use qaexplain_service::survey::default_questions;
use qaexplain_service::{router, AppState, FeedbackLog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

type Outcome = Result<Vec<String>, Vec<String>>;
type Criterion = (&'static str, fn() -> Outcome);

/// Collects detail lines and remembers whether any check failed.
#[derive(Default)]
struct Checks {
    lines: Vec<String>,
    failed: bool,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.lines.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
        self.failed |= !ok;
    }

    fn note(&mut self, what: impl Into<String>) {
        self.lines.push(format!("     {}", what.into()));
    }

    fn finish(self) -> Outcome {
        if self.failed {
            Err(self.lines)
        } else {
            Ok(self.lines)
        }
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

fn desk_graph() -> Graph {
    Graph::load_ntriples(&read("desk_kg.nt")).unwrap()
}

fn desk_components() -> Components {
    Components::standard(parse_synonyms(&read("relation_synonyms.tsv")).unwrap())
}

fn desk_config() -> &'static PipelineConfig {
    static CONFIG: OnceLock<PipelineConfig> = OnceLock::new();
    CONFIG.get_or_init(|| {
        let graph = desk_graph();
        let components = desk_components();
        let data = load_dataset(&fixture("desk_dataset.json"), &graph, &PrefixTable::well_known()).unwrap();
        let runs = run_components(&data.records, &graph, &components);
        let models =
            train_stage_models(&data.records, &runs, ClassifierKind::LogisticRegression, TrainOptions::default())
                .unwrap();
        PipelineConfig {
            graph: Arc::new(graph),
            components: Arc::new(components),
            models,
            templates: Arc::new(TemplateRepository::shipped()),
            prefixes: PrefixTable::well_known(),
        }
    })
}

// ---------------------------------------------------------------- SPARQL

const EX: &str = "http://example.org/";

fn ex(kind: &str, n: usize) -> Iri {
    Iri::new(format!("{EX}{kind}{n}")).unwrap()
}

fn object(n: usize) -> Term {
    if n < 6 {
        ex("e", n).into()
    } else {
        Literal::simple(format!("v{}", n - 6)).into()
    }
}

fn random_term(rng: &mut ChaCha8Rng, constant: impl FnOnce(&mut ChaCha8Rng) -> PatternTerm) -> PatternTerm {
    if rng.random_bool(0.5) {
        PatternTerm::Variable(Variable::new(["a", "b", "c"][rng.random_range(0..3)]).unwrap())
    } else {
        constant(rng)
    }
}

fn random_case(rng: &mut ChaCha8Rng) -> (BTreeSet<Triple>, Query) {
    let n = rng.random_range(0..=200);
    let triples: BTreeSet<Triple> = (0..n)
        .map(|_| {
            Triple::new(
                ex("e", rng.random_range(0..6)),
                ex("p", rng.random_range(0..3)),
                object(rng.random_range(0..9)),
            )
        })
        .collect();
    let patterns: Vec<TriplePattern> = (0..rng.random_range(1..=3))
        .map(|_| {
            // Constants range one past the graph's vocabulary so some never match.
            let s = random_term(rng, |r| PatternTerm::Iri(ex("e", r.random_range(0..7))));
            let p = random_term(rng, |r| PatternTerm::Iri(ex("p", r.random_range(0..4))));
            let o = random_term(rng, |r| object(r.random_range(0..10)).into());
            TriplePattern::new(s, p, o)
        })
        .collect();
    let ask = Query::ask(patterns.clone()).unwrap();
    let vars = ask.variables();
    let query = if vars.is_empty() || rng.random_bool(0.3) {
        ask
    } else {
        let k = rng.random_range(1..=vars.len());
        Query::select(vars[..k].to_vec(), patterns).unwrap()
    };
    (triples, query)
}

/// Every assignment of graph terms to the query's variables, checked
/// directly against the triple set.
fn brute_force(triples: &BTreeSet<Triple>, query: &Query) -> AnswerSet {
    let vars = query.variables();
    let universe: Vec<Term> = triples
        .iter()
        .flat_map(|t| [Term::from(t.subject.clone()), Term::from(t.predicate.clone()), t.object.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let ground = |p: &PatternTerm, a: &BTreeMap<&Variable, &Term>| -> Term {
        match p {
            PatternTerm::Variable(v) => a[v].clone(),
            PatternTerm::Iri(i) => i.clone().into(),
            PatternTerm::Literal(l) => l.clone().into(),
        }
    };
    let mut rows = BTreeSet::new();
    let mut any = false;
    for mut code in 0..universe.len().pow(vars.len() as u32) {
        let mut a = BTreeMap::new();
        for v in &vars {
            a.insert(v, &universe[code % universe.len()]);
            code /= universe.len();
        }
        let holds = query.patterns().iter().all(|p| match (ground(&p.subject, &a), ground(&p.predicate, &a)) {
            (Term::Iri { value: s }, Term::Iri { value: pr }) => {
                triples.contains(&Triple::new(s, pr, ground(&p.object, &a)))
            }
            _ => false,
        });
        if holds {
            any = true;
            rows.insert(query.projection().iter().map(|v| a[v].clone()).collect::<Vec<_>>());
        }
    }
    if query.projection().is_empty() {
        AnswerSet::Ask { value: any }
    } else {
        AnswerSet::Select { variables: query.projection().to_vec(), rows }
    }
}

fn sparql_oracle() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = Instant::now();
    let mut mismatches = 0;
    let mut non_empty = 0;
    for case in 0..1000 {
        let (triples, query) = random_case(&mut rng);
        let graph = Graph::from_triples(triples.iter().cloned(), GraphOptions::default());
        let got = evaluate(&graph, &query);
        let want = brute_force(&triples, &query);
        if got != want {
            mismatches += 1;
            if mismatches <= 3 {
                c.note(format!("case {case}: {query:?}"));
            }
        }
        non_empty += usize::from(!want.is_empty() && want != AnswerSet::Ask { value: false });
    }
    let elapsed = start.elapsed();
    c.check(mismatches == 0, format!("1000 cases, {mismatches} mismatches ({non_empty} with answers)"));
    c.check(elapsed < Duration::from_secs(30), format!("runtime {:.2} s < 30 s", elapsed.as_secs_f64()));
    c.finish()
}

// ------------------------------------------------------- worked examples

const TESLA: &str = "Did Tesla win a nobel prize in physics?";
const CANADA: &str = "What is the population of Canada?";

fn tesla() -> Outcome {
    let mut c = Checks::default();
    let config = desk_config();
    let trace = config.answer_question(TESLA).map_err(|e| vec![e.to_string()])?;
    let entities: BTreeSet<String> =
        trace.stage(Task::Ned).output.entity_links().iter().map(|l| config.prefixes.compact(&l.entity)).collect();
    c.check(
        entities == BTreeSet::from(["dbr:Nikola_Tesla".to_string(), "dbr:Nobel_Prize_in_Physics".to_string()]),
        format!("entities {entities:?}"),
    );
    let relations: Vec<String> =
        trace.stage(Task::Rl).output.relation_links().iter().map(|l| config.prefixes.compact(&l.predicate)).collect();
    c.check(relations == ["dbo:award"], format!("relations {relations:?}"));
    let query = trace.stage(Task::Qb).output.built_query().map(|q| config.prefixes.render_query(q));
    c.check(
        query.as_deref() == Some("ASK { dbr:Nikola_Tesla dbo:award dbr:Nobel_Prize_in_Physics . }"),
        format!("query {query:?}"),
    );
    c.check(trace.final_answer == Some(AnswerSet::Ask { value: true }), format!("answer {:?}", trace.final_answer));
    let flow: Vec<Task> = explanation_flow(&trace).iter().map(|e| e.task).collect();
    c.check(flow == [Task::Ned, Task::Ned, Task::Rl, Task::Qb], format!("explanation flow {flow:?}"));
    c.finish()
}

fn canada() -> Outcome {
    let mut c = Checks::default();
    let base = desk_config();
    let is_population = |t: &Triple| t.subject.local_name() == "Canada" && t.predicate.local_name() == "population";
    let ablated = Graph::from_triples(base.graph.triples().filter(|t| !is_population(t)), base.graph.options().clone());
    c.check(ablated.len() + 1 == base.graph.len(), "ablation removes exactly one triple");

    let run = |graph: Graph| PipelineConfig { graph: Arc::new(graph), ..base.clone() }.answer_question(CANADA).unwrap();
    let without = run(ablated.clone());
    let qb = without.stage(Task::Qb);
    c.check(
        qb.outcome_class == OutcomeClass::NoAnswer
            && qb.explanations.iter().all(|e| e.outcome_class == OutcomeClass::NoAnswer),
        format!("without the triple: QB {} with {} NoAnswer explanation(s)", qb.outcome_class, qb.explanations.len()),
    );
    if let Some(e) = qb.explanations.first() {
        c.note(e.text.clone());
    }

    let restored = Graph::from_triples(
        ablated.triples().chain(base.graph.triples().filter(is_population)),
        ablated.options().clone(),
    );
    let with = run(restored);
    let classes: Vec<OutcomeClass> = with.stages.iter().map(|s| s.outcome_class).collect();
    c.check(classes == [OutcomeClass::Success; 3], format!("with the triple restored: {classes:?}"));
    c.check(with.final_answer.as_ref().is_some_and(|a| !a.is_empty()), "restored run returns the population");
    c.finish()
}

// ------------------------------------------------------------ classifiers

fn gradient_check() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let width = rng.random_range(1..=8);
        let n = rng.random_range(1..=40);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let obj = SoftmaxObjective::new(&x, &y, &w, rng.random_range(0.0..2.0), width);
        let params: Vec<f64> = (0..obj.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, analytic) = obj.loss_and_gradient(&params);
        let numeric: Vec<f64> = (0..params.len())
            .map(|i| {
                let h = 1e-5;
                let (mut plus, mut minus) = (params.clone(), params.clone());
                plus[i] += h;
                minus[i] -= h;
                (obj.loss(&plus) - obj.loss(&minus)) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12));
    }
    c.check(worst < 1e-5, format!("100 instances, worst relative error {worst:.2e} < 1e-5"));
    c.finish()
}

fn synthetic(x: Vec<Vec<f64>>, y: Vec<OutcomeClass>) -> Dataset {
    let width = x[0].len();
    let schema = Arc::new(FeatureSchema { version: 0, names: (0..width).map(|i| format!("x{i}")).collect() });
    Dataset { task: Task::Ned, schema, x, y }
}

fn cv_laws() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    let mut partition_ok = true;
    for trial in 0..50 {
        let n = rng.random_range(10..=300);
        let k = rng.random_range(2..=10);
        let labels: Vec<OutcomeClass> = (0..n).map(|_| OutcomeClass::ALL[rng.random_range(0..3)]).collect();
        let folds = fold_assignment(&labels, k, trial).unwrap();
        let mut seen: Vec<usize> = folds.iter().flatten().copied().collect();
        seen.sort_unstable();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
        partition_ok &= folds.len() == k && seen == (0..n).collect::<Vec<_>>() && spread <= 1;
    }
    c.check(partition_ok, "folds partition the rows with sizes differing by at most one (50 random splits)");

    let centres = [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0)];
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (class, &(cx, cy)) in OutcomeClass::ALL.iter().zip(&centres) {
        for _ in 0..100 {
            x.push(vec![cx + rng.random_range(-1.0..1.0), cy + rng.random_range(-1.0..1.0)]);
            y.push(*class);
        }
    }
    let blobs = synthetic(x, y);
    let lr = ClassifierKind::LogisticRegression;
    let cv = cross_validate(lr, &blobs, 10, &lr.default_grid(), TrainOptions::default()).unwrap();
    c.check(cv.mean_accuracy >= 0.95, format!("separable n=300: LR 10-fold accuracy {:.4} >= 0.95", cv.mean_accuracy));

    let graph = desk_graph();
    let data = load_dataset(&fixture("desk_dataset.json"), &graph, &PrefixTable::well_known()).unwrap();
    let runs = run_components(&data.records, &graph, &desk_components());
    for task in Task::ALL {
        let examples = build_training_set(&data.records, &runs, task);
        let counts = OutcomeClass::ALL.map(|k| examples.iter().filter(|e| e.label == k).count());
        let baseline = *counts.iter().max().unwrap() as f64 / examples.len() as f64;
        for kind in ClassifierKind::ALL {
            let model = train(kind, task, &examples, &kind.default_grid(), TrainOptions::default()).unwrap();
            let hits = examples.iter().filter(|e| model.predict(&e.features).unwrap().class == e.label).count();
            let acc = hits as f64 / examples.len() as f64;
            c.check(
                acc >= baseline,
                format!(
                    "{task} {:<20} training accuracy {acc:.4} vs majority baseline {baseline:.4}",
                    kind.display_name()
                ),
            );
        }
    }
    c.finish()
}

fn forest_equals_tree() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let width = 8;
    let bit = |r: &mut ChaCha8Rng| f64::from(u8::from(r.random_bool(0.5)));
    let x: Vec<Vec<f64>> = (0..150).map(|_| (0..width).map(|_| bit(&mut rng)).collect()).collect();
    let y = (0..150).map(|_| OutcomeClass::ALL[rng.random_range(0..3)]).collect();
    let data = synthetic(x, y);
    let probes: Vec<Vec<f64>> = (0..500).map(|_| (0..width).map(|_| bit(&mut rng)).collect()).collect();
    for depth in [Some(3), None] {
        let options = TrainOptions { seed: 42, balanced: false };
        let dt = fit(ClassifierKind::DecisionTree, &Hyperparameters::MaxDepth(depth), &data, options).unwrap();
        let forest =
            Hyperparameters::Forest { trees: 1, max_depth: depth, max_features: Some(width), bootstrap: false };
        let rf = fit(ClassifierKind::RandomForest, &forest, &data, options).unwrap();
        let differing = probes.iter().filter(|p| dt.predict_values(p).class != rf.predict_values(p).class).count();
        c.check(differing == 0, format!("depth {depth:?}: {differing} of 500 predictions differ"));
    }
    c.finish()
}

// -------------------------------------------------------------- templates

fn templates() -> Outcome {
    let mut c = Checks::default();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/templates/default.txt");
    let repo = TemplateRepository::load(&path).map_err(|e| vec![e.to_string()])?;
    c.check(repo.len() >= 11, format!("{} templates loaded (>= 11)", repo.len()));
    let cells: BTreeSet<(Task, OutcomeClass)> = repo.templates().iter().map(|t| (t.task, t.outcome_class)).collect();
    c.check(cells.len() == 9, format!("{} of 9 task x class cells covered", cells.len()));

    let config = PipelineConfig { templates: Arc::new(repo), ..desk_config().clone() };
    let data = load_dataset(&fixture("desk_dataset.json"), &config.graph, &config.prefixes).unwrap();
    let stats = explanation_stats(&data.records, &config).unwrap();
    let mut leftover = 0;
    let mut silent = 0;
    for record in &data.records {
        let trace = config.answer_question(&record.question).unwrap();
        silent += trace.stages.iter().filter(|s| s.explanations.is_empty()).count();
        leftover += explanation_flow(&trace).iter().filter(|e| has_unresolved_placeholder(&e.text)).count();
    }
    c.check(
        leftover == 0 && stats.unresolved_placeholders == 0,
        format!("{} questions, {leftover} unresolved placeholders", data.records.len()),
    );
    c.check(silent == 0 && stats.stages_without_explanation == 0, format!("{silent} stages without an explanation"));
    c.finish()
}

// ------------------------------------------------------------- benchmark

fn labeling() -> Outcome {
    let mut c = Checks::default();
    let gold: BTreeSet<&str> = ["x"].into();
    for empty in [true, false] {
        for f in [0.0, 0.5, 1.0] {
            let expected = if empty {
                OutcomeClass::NoAnswer
            } else if f == 1.0 {
                OutcomeClass::Success
            } else {
                OutcomeClass::WrongAnswer
            };
            let got = label_example(empty, Some(&gold), f);
            c.check(got == Ok(expected), format!("empty={empty:<5} F={f:.1} -> {got:?}"));
        }
    }
    c.finish()
}

fn filtering() -> Outcome {
    let mut c = Checks::default();
    let data = load_dataset(&fixture("filter_dataset.json"), &desk_graph(), &PrefixTable::well_known())
        .map_err(|e| vec![e.to_string()])?;
    c.check(data.total() == 10, format!("{} records read", data.total()));
    c.check(data.records.len() == 7, format!("{} loaded", data.records.len()));
    let dropped: Vec<&str> = data.dropped_empty.iter().map(|d| d.id.as_str()).collect();
    c.check(dropped.len() == 3, format!("dropped for an empty gold answer: {dropped:?}"));
    c.finish()
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qaexplain")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("qaexplain {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn determinism() -> Outcome {
    let mut c = Checks::default();
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let kg = fixture("desk_kg.nt");
    let synonyms = fixture("relation_synonyms.tsv");
    let dataset = fixture("desk_dataset.json");
    let s = |path: &Path| path.to_str().unwrap().to_string();
    let store = p("desk.snapshot");
    run_cli(&["ingest", "--kg", &s(&kg), "--synonyms", &s(&synonyms), "--out", &store]).map_err(|e| vec![e])?;
    for out in ["run1", "run2"] {
        let started = Instant::now();
        run_cli(&["evaluate", "--kg", &store, "--dataset", &s(&dataset), "--seed", "7", "--out", &p(out)])
            .map_err(|e| vec![e])?;
        c.note(format!("{out}: evaluate took {:.1} s", started.elapsed().as_secs_f64()));
    }
    for name in ["report.txt", "report.json"] {
        let a = std::fs::read(dir.path().join("run1").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("run2").join(name)).unwrap();
        c.check(!a.is_empty() && a == b, format!("{name}: {} bytes, identical across runs", a.len()));
    }
    c.finish()
}

// ---------------------------------------------------------------- service

const DIMS: [&str; 4] = ["justification", "education", "involvement", "acceptance"];
const MODES: [&str; 2] = ["with_explanation", "without_explanation"];

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn open_app(log: &Path) -> axum::Router {
    let state = AppState::new(
        Some(desk_config().clone()),
        Arc::new(TemplateRepository::shipped()),
        default_questions(),
        FeedbackLog::open(log).unwrap(),
    );
    router(state, None)
}

/// Histogram, count and mean per dimension and mode, folded from the raw
/// log lines.
fn fold_log(path: &Path) -> Value {
    let lines: Vec<Value> =
        std::fs::read_to_string(path).unwrap_or_default().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let mut dimensions = serde_json::Map::new();
    for dim in DIMS {
        let mut modes = serde_json::Map::new();
        for mode in MODES {
            let mut histogram = [0u64; 5];
            for r in lines.iter().filter(|r| r["mode"] == mode) {
                histogram[r["ratings"][dim].as_u64().unwrap() as usize - 1] += 1;
            }
            let count: u64 = histogram.iter().sum();
            let sum: u64 = histogram.iter().zip(1..).map(|(c, k)| c * k).sum();
            let mean = if count == 0 { Value::Null } else { json!(sum as f64 / count as f64) };
            modes.insert(mode.into(), json!({ "histogram": histogram, "count": count, "mean": mean }));
        }
        dimensions.insert(dim.into(), Value::Object(modes));
    }
    json!({ "records": lines.len(), "dimensions": dimensions })
}

fn feedback() -> Outcome {
    let mut c = Checks::default();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("feedback.jsonl");
    let runtime = tokio_runtime();
    runtime.block_on(async {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut acknowledged = Vec::new();
        {
            let app = open_app(&log);
            for i in 0..50 {
                let ratings: serde_json::Map<String, Value> =
                    DIMS.iter().map(|d| (d.to_string(), json!(rng.random_range(1..=5)))).collect();
                let body = json!({
                    "session_id": format!("participant-{}", i / 10),
                    "question_id": format!("s{:02}", i % 10 + 1),
                    "mode": MODES[rng.random_range(0..2)],
                    "ratings": ratings,
                });
                let (status, reply) = call(&app, "POST", "/api/feedback", Some(body)).await;
                if status == StatusCode::OK {
                    acknowledged.push(reply["id"].as_u64().unwrap());
                }
            }
            let (_, summary) = call(&app, "GET", "/api/survey/summary", None).await;
            c.check(summary == fold_log(&log), "summary equals the fold over the raw log (50 records)");
        }
        c.check(
            acknowledged == (1..=50).collect::<Vec<_>>(),
            format!("{} of 50 records acknowledged", acknowledged.len()),
        );

        // Restart: a new service instance over the same log.
        let app = open_app(&log);
        let (_, summary) = call(&app, "GET", "/api/survey/summary", None).await;
        c.check(summary["records"] == 50, format!("after restart the summary holds {} records", summary["records"]));
        c.check(summary == fold_log(&log), "after restart the summary still equals the fold over the log");
        let lines = std::fs::read_to_string(&log).unwrap();
        let ids: Vec<u64> =
            lines.lines().map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_u64().unwrap()).collect();
        c.check(ids == acknowledged, "every acknowledged id is in the log");
    });
    c.finish()
}

fn tokio_runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap()
}

// ------------------------------------------------------------------ main

fn main() {
    let criteria: [Criterion; 11] = [
        ("SPARQL-subset oracle equivalence", sparql_oracle),
        ("Worked-example fidelity (Tesla)", tesla),
        ("Failure-explanation fidelity (Canada)", canada),
        ("Gradient check", gradient_check),
        ("CV laws", cv_laws),
        ("Degenerate-model equivalence (RF = DT)", forest_equals_tree),
        ("Template coverage and totality", templates),
        ("Labeling trichotomy", labeling),
        ("Dataset filtering", filtering),
        ("Determinism", determinism),
        ("Feedback durability and summary oracle", feedback),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, criterion) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(vec![format!("panicked: {msg}")])
        });
        let secs = started.elapsed().as_secs_f64();
        let (verdict, lines) = match outcome {
            Ok(lines) => ("PASS", lines),
            Err(lines) => {
                failed += 1;
                ("FAIL", lines)
            }
        };
        println!("{verdict} {name} ({secs:.1} s)");
        for l in lines {
            println!("       {l}");
        }
    }
    println!("\n{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
