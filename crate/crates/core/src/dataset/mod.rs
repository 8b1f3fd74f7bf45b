//! Deterministic evaluation universe: company fleets, synthetic questions
//! and templated query instances with their expected tool calls.

mod fleet;
mod market;
mod queries;
mod questions;
mod roster;

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fleet::{check_arguments, generate_fleet, CompanyServer, CompanyService, ToolTemplate, TOOL_TEMPLATES};
pub use market::{fnv1a64, splitmix64, unit, SyntheticMarket, HISTORY_LEN, TARGET_TYPES, TIMELINES};
pub use queries::{
    average_hops, bundled_base_queries, generate_query_instances, load_base_queries, validate_base_queries, BaseCall,
    BaseQuery, ExpectedCall, QueryInstance,
};
pub use questions::{attach_synthetic_questions, bundled_question_bank, load_question_bank, sidecar, QuestionBank, SQ_COUNTS};
pub use roster::{
    bundled_roster, load_csv, parse_csv, slugify, standard_roster, to_csv, validate_roster, CompanyRecord, SurfaceForm,
};

use crate::mcp::Sidecar;
use crate::tool_model::ToolDocument;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("the company roster is empty")]
    EmptyRoster,
    #[error("company `{0}` appears more than once")]
    DuplicateCompany(String),
    #[error("invalid company: {0}")]
    InvalidCompany(String),
    #[error("synthetic question count must be one of 0, 5, 10 (got {0})")]
    InvalidSqCount(usize),
    #[error("question bank has {available} templates for `{template}`, {needed} needed")]
    InsufficientBank { template: String, needed: usize, available: usize },
    #[error("base query {template}: {reason}")]
    PlaceholderMismatch { template: usize, reason: String },
    #[error("base query {template}: unknown tool `{tool}`")]
    UnknownTool { template: usize, tool: String },
    #[error("base query {template}: {reason}")]
    InvalidCall { template: usize, reason: String },
    #[error("{0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
}

pub const FLEET_FILE: &str = "fleet.jsonl";
pub const QUESTIONS_FILE: &str = "questions.json";
pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const COMPANIES_FILE: &str = "companies.csv";
pub const MANIFEST_FILE: &str = "dataset.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub sq: usize,
    pub max_per_template: usize,
    pub companies: usize,
    pub tools: usize,
    pub instances: usize,
    pub average_hops: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    pub seed: u64,
    pub sq: usize,
    pub max_per_template: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { seed: 7, sq: 10, max_per_template: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub companies: Vec<CompanyRecord>,
    pub fleet: Vec<CompanyServer>,
    pub instances: Vec<QueryInstance>,
}

impl Dataset {
    pub fn generate(
        companies: Vec<CompanyRecord>,
        bank: &QuestionBank,
        base: &[BaseQuery],
        options: GenerateOptions,
    ) -> Result<Self, DatasetError> {
        let mut fleet = generate_fleet(&companies)?;
        attach_synthetic_questions(&mut fleet, options.sq, bank)?;
        let instances = generate_query_instances(base, &companies, options.max_per_template, options.seed)?;
        let manifest = DatasetManifest {
            seed: options.seed,
            sq: options.sq,
            max_per_template: options.max_per_template,
            companies: companies.len(),
            tools: fleet.iter().map(|s| s.tools.len()).sum(),
            instances: instances.len(),
            average_hops: average_hops(&instances),
        };
        Ok(Self { manifest, companies, fleet, instances })
    }

    /// Generates from the bundled roster, question bank and base queries.
    pub fn standard(n_companies: usize, options: GenerateOptions) -> Result<Self, DatasetError> {
        Self::generate(
            standard_roster(n_companies, options.seed),
            &bundled_question_bank(),
            &bundled_base_queries(),
            options,
        )
    }

    pub fn tools(&self) -> impl Iterator<Item = &ToolDocument> {
        self.fleet.iter().flat_map(|s| &s.tools)
    }

    pub fn sidecar(&self) -> Sidecar {
        sidecar(&self.fleet)
    }

    /// A service per company, answering from data seeded with the manifest seed.
    pub fn services(&self) -> Vec<CompanyService> {
        self.fleet.iter().map(|s| CompanyService::new(s.clone(), self.manifest.seed)).collect()
    }

    /// Fails if any expected call names a tool outside the fleet.
    pub fn check_references(&self) -> Result<(), DatasetError> {
        let names: HashSet<&str> = self.tools().map(|t| t.name.as_str()).collect();
        for inst in &self.instances {
            if let Some(c) = inst.expected_calls.iter().find(|c| !names.contains(c.tool.as_str())) {
                return Err(DatasetError::UnknownTool { template: inst.template, tool: c.tool.clone() });
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), DatasetError> {
        let io = |e: std::io::Error| DatasetError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join(COMPANIES_FILE), to_csv(&self.companies)?).map_err(io)?;
        let bare: Vec<ToolDocument> =
            self.tools().map(|t| ToolDocument { synthetic_questions: vec![], ..t.clone() }).collect();
        write_jsonl(&dir.join(FLEET_FILE), &bare)?;
        self.sidecar().save(&dir.join(QUESTIONS_FILE)).map_err(io)?;
        write_jsonl(&dir.join(INSTANCES_FILE), &self.instances)?;
        let manifest = serde_json::to_string_pretty(&self.manifest).map_err(|e| DatasetError::Json(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), manifest + "\n").map_err(io)
    }

    pub fn load(dir: &Path) -> Result<Self, DatasetError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| DatasetError::Io(format!("{}: {e}", dir.join(name).display())))
        };
        let json = |e: serde_json::Error| DatasetError::Json(e.to_string());
        let manifest: DatasetManifest = serde_json::from_str(&read(MANIFEST_FILE)?).map_err(json)?;
        let companies = parse_csv(&read(COMPANIES_FILE)?)?;
        validate_roster(&companies)?;
        let tools: Vec<ToolDocument> = read_jsonl(&read(FLEET_FILE)?)?;
        let questions = Sidecar::load(&dir.join(QUESTIONS_FILE))
            .map_err(|e| DatasetError::Io(format!("{QUESTIONS_FILE}: {e}")))?;
        let mut fleet: Vec<CompanyServer> = companies
            .iter()
            .map(|c| CompanyServer { server_id: c.slug(), company: c.clone(), tools: vec![] })
            .collect();
        for mut tool in tools {
            let server = fleet.iter_mut().find(|s| s.server_id == tool.origin_server).ok_or_else(|| {
                DatasetError::InvalidCompany(format!("tool `{}` names unknown server `{}`", tool.name, tool.origin_server))
            })?;
            tool.synthetic_questions = questions.questions(&tool.name).to_vec();
            server.tools.push(tool);
        }
        let instances = read_jsonl(&read(INSTANCES_FILE)?)?;
        Ok(Self { manifest, companies, fleet, instances })
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let io = |e: std::io::Error| DatasetError::Io(format!("{}: {e}", path.display()));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| DatasetError::Json(e.to_string()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, DatasetError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| DatasetError::Json(format!("line {}: {e}", i + 1))))
        .collect()
}
