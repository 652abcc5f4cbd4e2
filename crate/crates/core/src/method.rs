//! Guided modelling sessions over a block's method steps.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{compile_predicate, Predicate};
use crate::docgen::describe_completion;
use crate::meta::MethodStep;
use crate::model::Model;
use crate::registry::EffectiveBlock;
use crate::validate::{validate, Diagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Pending,
    Current,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepState {
    pub step_id: String,
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Session {
    pub id: String,
    pub model_id: String,
    pub block_name: String,
    pub step_states: Vec<StepState>,
    /// Milliseconds since the Unix epoch.
    pub started_at: u64,
    pub updated_at: u64,
}

impl Session {
    pub fn current(&self) -> Option<&StepState> {
        self.step_states.iter().find(|s| s.status == StepStatus::Current)
    }

    pub fn done_count(&self) -> usize {
        self.step_states.iter().filter(|s| s.status == StepStatus::Done).count()
    }

    pub fn is_finished(&self) -> bool {
        self.step_states.iter().all(|s| s.status == StepStatus::Done)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("block '{0}' has no method steps")]
    EmptyMethod(String),
    #[error("session is already finished")]
    Finished,
    #[error("session belongs to model '{expected}', not '{found}'")]
    WrongModel { expected: String, found: String },
    #[error("block '{block}' has no step '{step}'")]
    UnknownStep { block: String, step: String },
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("model '{model}' is at version {current}, not {requested}")]
    StaleModel { model: String, requested: u64, current: u64 },
}

fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// A fresh session with a new id: first step current, the rest pending.
pub fn start_session(model: &Model, block: &EffectiveBlock) -> Result<Session, SessionError> {
    if block.method.steps.is_empty() {
        return Err(SessionError::EmptyMethod(block.name.clone()));
    }
    let now = now_millis();
    let step_states = block
        .method
        .steps
        .iter()
        .enumerate()
        .map(|(i, s)| StepState {
            step_id: s.id.clone(),
            status: if i == 0 { StepStatus::Current } else { StepStatus::Pending },
        })
        .collect();
    Ok(Session {
        id: uuid::Uuid::new_v4().to_string(),
        model_id: model.id.clone(),
        block_name: block.name.clone(),
        step_states,
        started_at: now,
        updated_at: now,
    })
}

/// Why the current step cannot be completed yet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredicateReport {
    pub step_id: String,
    /// The unmet completion criterion, in words.
    pub predicate: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub found: Option<u64>,
    /// Elements that keep the predicate from holding.
    #[serde(default)]
    pub elements: Vec<String>,
    /// Blocking diagnostics, for model-valid steps.
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Advance {
    Advanced { session: Session },
    Unmet { report: PredicateReport },
}

/// Evaluates `step`'s completion predicate; `None` means it holds.
pub fn check_step(step: &MethodStep, model: &Model, block: &EffectiveBlock, confirmed: bool) -> Option<PredicateReport> {
    let mut report = PredicateReport {
        step_id: step.id.clone(),
        predicate: describe_completion(step, block),
        message: String::new(),
        required: None,
        found: None,
        elements: Vec::new(),
        diagnostics: Vec::new(),
    };
    let predicate = match compile_predicate(step.completion.kind, &step.completion.params, Some(&block.elements)) {
        Ok(p) => p,
        Err(errs) => {
            report.message = format!("the completion predicate is malformed: {}", errs.join("; "));
            return Some(report);
        }
    };
    match predicate {
        Predicate::ElementCountAtLeast { kind, n } => {
            let found = model.of_kind(&kind).count() as u64;
            if found >= n {
                return None;
            }
            report.message = format!("requires \u{2265}{n}, found {found}");
            report.required = Some(n);
            report.found = Some(found);
        }
        Predicate::AllOfKindHaveAttribute { kind, attr } => {
            let missing: Vec<String> = model
                .of_kind(&kind)
                .filter(|e| e.attr_text(&attr).is_none_or(|v| v.trim().is_empty()))
                .map(|e| e.name.clone())
                .collect();
            if missing.is_empty() {
                return None;
            }
            report.message = format!("{} [{kind}] element(s) lack '{attr}': {}", missing.len(), missing.join(", "));
            report.found = Some(missing.len() as u64);
            report.elements = missing;
        }
        Predicate::ModelValid { threshold } => {
            let blocking: Vec<Diagnostic> =
                validate(model, block).into_iter().filter(|d| d.severity >= threshold).collect();
            if blocking.is_empty() {
                return None;
            }
            report.message = format!("{} diagnostic(s) at severity {threshold} or above", blocking.len());
            report.found = Some(blocking.len() as u64);
            let mut names: Vec<String> = blocking.iter().flat_map(|d| d.targets.iter().cloned()).collect();
            names.sort();
            names.dedup();
            report.elements = names;
            report.diagnostics = blocking;
        }
        Predicate::ManualConfirm => {
            if confirmed {
                return None;
            }
            report.message = "requires confirmation by the user".to_string();
        }
    }
    Some(report)
}

/// Completes the current step if its predicate holds on `model`, making
/// the next step current. Neither the session nor the model is modified.
pub fn advance(
    session: &Session,
    model: &Model,
    block: &EffectiveBlock,
    confirmed: bool,
) -> Result<Advance, SessionError> {
    if session.model_id != model.id {
        return Err(SessionError::WrongModel { expected: session.model_id.clone(), found: model.id.clone() });
    }
    let idx = session
        .step_states
        .iter()
        .position(|s| s.status == StepStatus::Current)
        .ok_or(SessionError::Finished)?;
    let step_id = &session.step_states[idx].step_id;
    let step = block
        .step(step_id)
        .ok_or_else(|| SessionError::UnknownStep { block: block.name.clone(), step: step_id.clone() })?;
    if let Some(report) = check_step(step, model, block, confirmed) {
        return Ok(Advance::Unmet { report });
    }
    let mut next = session.clone();
    next.step_states[idx].status = StepStatus::Done;
    if let Some(following) = next.step_states.get_mut(idx + 1) {
        following.status = StepStatus::Current;
    }
    next.updated_at = now_millis().max(session.updated_at);
    Ok(Advance::Advanced { session: next })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurrentStep {
    pub id: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionStatus {
    pub session_id: String,
    pub done: usize,
    pub total: usize,
    pub finished: bool,
    pub current_step: Option<CurrentStep>,
    pub guidance: String,
    pub steps: Vec<StepState>,
}

/// Progress summary with guidance text for the current step.
pub fn session_status(session: &Session, block: &EffectiveBlock) -> SessionStatus {
    let current = session.current().and_then(|s| block.step(&s.step_id));
    let guidance = match current {
        None => "All steps are done.".to_string(),
        Some(step) => {
            let mut text = step.title.clone();
            if !step.description.is_empty() {
                text.push_str(": ");
                text.push_str(&step.description);
            }
            format!("{text}\nDone when: {}.", describe_completion(step, block))
        }
    };
    SessionStatus {
        session_id: session.id.clone(),
        done: session.done_count(),
        total: session.step_states.len(),
        finished: session.is_finished(),
        current_step: current.map(|s| CurrentStep { id: s.id.clone(), title: s.title.clone() }),
        guidance,
        steps: session.step_states.clone(),
    }
}
