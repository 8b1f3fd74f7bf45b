use std::collections::BTreeMap;
use std::path::Path;

use super::fleet::CompanyServer;
use super::roster::SurfaceForm;
use super::DatasetError;
use crate::mcp::Sidecar;

pub const SQ_COUNTS: [usize; 3] = [0, 5, 10];

const BUNDLED: &str = include_str!("../../data/question_bank.json");

/// Question templates keyed by tool template suffix.
pub type QuestionBank = BTreeMap<String, Vec<String>>;

pub fn bundled_question_bank() -> QuestionBank {
    serde_json::from_str(BUNDLED).expect("bundled question bank parses")
}

pub fn load_question_bank(path: &Path) -> Result<QuestionBank, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json(e.to_string()))
}

/// Gives every tool `sq_count` questions. Question `j` fills `{company}`
/// with the name, ticker or alias, cycling in that order.
pub fn attach_synthetic_questions(
    fleet: &mut [CompanyServer],
    sq_count: usize,
    bank: &QuestionBank,
) -> Result<(), DatasetError> {
    if !SQ_COUNTS.contains(&sq_count) {
        return Err(DatasetError::InvalidSqCount(sq_count));
    }
    for server in fleet.iter_mut() {
        for tool in server.tools.iter_mut() {
            let suffix = &tool.name[format!("get_{}_", server.server_id).len()..];
            let templates = bank.get(suffix).map(Vec::as_slice).unwrap_or_default();
            if templates.len() < sq_count {
                return Err(DatasetError::InsufficientBank {
                    template: suffix.to_owned(),
                    needed: sq_count,
                    available: templates.len(),
                });
            }
            tool.synthetic_questions = templates[..sq_count]
                .iter()
                .enumerate()
                .map(|(j, q)| q.replace("{company}", server.company.surface(SurfaceForm::CYCLE[j % 3])))
                .collect();
        }
    }
    Ok(())
}

/// The `questions.json` sidecar: tool name to its questions.
pub fn sidecar(fleet: &[CompanyServer]) -> Sidecar {
    Sidecar(
        fleet
            .iter()
            .flat_map(|s| &s.tools)
            .filter(|t| !t.synthetic_questions.is_empty())
            .map(|t| (t.name.clone(), t.synthetic_questions.clone()))
            .collect(),
    )
}
