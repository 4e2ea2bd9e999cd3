#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use qaexplain_core::bench::{load_dataset, run_components, train_stage_models, BenchContext, LoadedDataset};
use qaexplain_core::components::{parse_synonyms, Components};
use qaexplain_core::explain::TemplateRepository;
use qaexplain_core::kg::{Graph, PrefixTable};
use qaexplain_core::outcome::{ClassifierKind, TrainOptions};
use qaexplain_core::pipeline::PipelineConfig;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn desk_graph() -> Graph {
    Graph::load_ntriples(&read("desk_kg.nt")).unwrap()
}

pub fn desk_components() -> Components {
    Components::standard(parse_synonyms(&read("relation_synonyms.tsv")).unwrap())
}

pub fn desk_context(graph: Graph) -> BenchContext {
    BenchContext {
        graph: Arc::new(graph),
        components: Arc::new(desk_components()),
        prefixes: PrefixTable::well_known(),
    }
}

pub fn desk_dataset(graph: &Graph) -> LoadedDataset {
    load_dataset(&fixture("desk_dataset.json"), graph, &PrefixTable::well_known()).unwrap()
}

/// Logistic-regression stage models trained on the full desk dataset.
pub fn desk_config(graph: Graph) -> PipelineConfig {
    let data = desk_dataset(&graph);
    let components = desk_components();
    let runs = run_components(&data.records, &graph, &components);
    let models =
        train_stage_models(&data.records, &runs, ClassifierKind::LogisticRegression, TrainOptions::default()).unwrap();
    PipelineConfig {
        graph: Arc::new(graph),
        components: Arc::new(components),
        models,
        templates: Arc::new(TemplateRepository::shipped()),
        prefixes: PrefixTable::well_known(),
    }
}
