use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blockbench_core::docgen::describe_completion;
use blockbench_core::validate::format_lines;
use blockbench_core::{
    advance, generate_docs, generate_method_doc, instantiate, render_model, session_status, start_session, validate,
    Advance, ChangeSet, EffectiveBlock, Model, ModelElement, Session, SessionError, SessionStatus,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{ApiError, AppState};

type AppResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

pub(crate) fn routes() -> Router<Arc<AppState>> {
    Router::new()
        .route("/blocks", get(list_blocks))
        .route("/blocks/{name}", get(get_block))
        .route("/blocks/{name}/docs", get(block_docs))
        .route("/blocks/{name}/method", get(block_method))
        .route("/models", get(list_models).post(create_model))
        .route("/models/{id}", get(get_model).put(replace_model).patch(patch_model))
        .route("/models/{id}/validate", post(validate_model))
        .route("/models/{id}/render.svg", get(render))
        .route("/models/{id}/session", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/advance", post(advance_session))
}

fn text(content_type: &'static str, body: String) -> Response {
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}

fn blocking<T>(f: impl FnOnce() -> T) -> T {
    // file I/O is small and bounded; keep it off the async workers anyway
    match tokio::runtime::Handle::try_current().map(|h| h.runtime_flavor()) {
        Ok(tokio::runtime::RuntimeFlavor::MultiThread) => tokio::task::block_in_place(f),
        _ => f(),
    }
}

#[derive(Debug, Default, Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

impl FormatQuery {
    fn wants(&self, name: &str) -> bool {
        self.format.as_deref() == Some(name)
    }
}

async fn list_blocks(State(s): Shared) -> impl IntoResponse {
    Json(s.workspace.list_blocks())
}

async fn get_block(State(s): Shared, Path(name): Path<String>) -> AppResult<Json<EffectiveBlock>> {
    Ok(Json(s.workspace.resolve(&name)?))
}

async fn block_docs(State(s): Shared, Path(name): Path<String>) -> AppResult<Response> {
    let block = s.workspace.resolve(&name)?;
    Ok(text("text/markdown; charset=utf-8", generate_docs(&block)))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct StepView {
    id: String,
    title: String,
    description: String,
    done_when: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConstraintView {
    id: String,
    severity: String,
    checks: Vec<String>,
    message: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct MethodView {
    block: String,
    constraints: Vec<ConstraintView>,
    steps: Vec<StepView>,
}

/// JSON by default; `?format=markdown` gives the method guide document.
async fn block_method(State(s): Shared, Path(name): Path<String>, Query(q): Query<FormatQuery>) -> AppResult<Response> {
    let block = s.workspace.resolve(&name)?;
    if q.wants("markdown") {
        return Ok(text("text/markdown; charset=utf-8", generate_method_doc(&block)));
    }
    let view = MethodView {
        block: block.name.clone(),
        constraints: block
            .constraints
            .iter()
            .map(|c| ConstraintView {
                id: c.id.clone(),
                severity: c.severity.to_string(),
                checks: c.clauses.iter().map(|cl| cl.kind.to_string()).collect(),
                message: c.message.clone(),
            })
            .collect(),
        steps: block
            .method
            .steps
            .iter()
            .map(|st| StepView {
                id: st.id.clone(),
                title: st.title.clone(),
                description: st.description.clone(),
                done_when: describe_completion(st, &block),
            })
            .collect(),
    };
    Ok(Json(view).into_response())
}

async fn list_models(State(s): Shared) -> impl IntoResponse {
    Json(blocking(|| s.models.list()))
}

#[derive(Deserialize)]
struct CreateModel {
    block: String,
    name: String,
}

async fn create_model(State(s): Shared, Json(body): Json<CreateModel>) -> AppResult<Response> {
    let block = s.workspace.resolve(&body.block)?;
    let model = instantiate(&block, &body.name)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "instantiate", e.to_string()))?;
    blocking(|| s.models.create(&model))?;
    Ok((StatusCode::CREATED, Json(model)).into_response())
}

/// The stored model and its effective block.
fn load(s: &AppState, id: &str) -> AppResult<(Model, EffectiveBlock)> {
    let model = blocking(|| s.models.get(id))?;
    let block = s.workspace.resolve(&model.block_name).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown-block", e.to_string())
            .with_details(json!({ "block": model.block_name }))
    })?;
    Ok((model, block))
}

/// JSON by default; `?format=text` gives the `.dslm` source.
async fn get_model(State(s): Shared, Path(id): Path<String>, Query(q): Query<FormatQuery>) -> AppResult<Response> {
    let model = blocking(|| s.models.get(&id))?;
    if q.wants("text") {
        return Ok(text("text/plain; charset=utf-8", blockbench_core::serialize_model(&model)));
    }
    Ok(Json(model).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ReplaceModel {
    base_version: u64,
    elements: Vec<ModelElement>,
}

async fn replace_model(State(s): Shared, Path(id): Path<String>, Json(body): Json<ReplaceModel>) -> AppResult<Response> {
    let (current, block) = load(&s, &id)?;
    let incoming = Model { elements: body.elements, ..current };
    let next = blocking(|| s.models.replace(&id, body.base_version, &incoming, &block))?;
    Ok(Json(next).into_response())
}

async fn patch_model(State(s): Shared, Path(id): Path<String>, Json(change): Json<ChangeSet>) -> AppResult<Response> {
    let (_, block) = load(&s, &id)?;
    let next = blocking(|| s.models.apply(&id, &block, &change))?;
    Ok(Json(next).into_response())
}

/// JSON by default; `?format=text` gives the CLI's diagnostic lines. A
/// model that does not bind to its block is a 422 either way.
async fn validate_model(State(s): Shared, Path(id): Path<String>, Query(q): Query<FormatQuery>) -> AppResult<Response> {
    let (model, block) = load(&s, &id)?;
    let diagnostics = validate(&model, &block);
    if let Some(d) = diagnostics.iter().find(|d| d.is_binding_failure()) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "binding", d.message.clone())
            .with_details(json!({ "diagnostics": diagnostics, "version": model.version })));
    }
    if q.wants("text") {
        return Ok(text("text/plain; charset=utf-8", format_lines(&diagnostics)));
    }
    Ok(Json(json!({ "modelId": model.id, "version": model.version, "diagnostics": diagnostics })).into_response())
}

async fn render(State(s): Shared, Path(id): Path<String>) -> AppResult<Response> {
    let (model, block) = load(&s, &id)?;
    let svg = render_model(&model, &block).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "binding", e.to_string())
            .with_details(json!({ "element": e.element() }))
    })?;
    let mut response = text("image/svg+xml", svg);
    if let Ok(v) = model.version.to_string().parse() {
        response.headers_mut().insert("x-model-version", v);
    }
    Ok(response)
}

#[derive(Serialize)]
struct SessionView {
    session: Session,
    status: SessionStatus,
}

fn session_view(session: Session, block: &EffectiveBlock) -> SessionView {
    let status = session_status(&session, block);
    SessionView { session, status }
}

async fn create_session(State(s): Shared, Path(id): Path<String>) -> AppResult<Response> {
    let (model, block) = load(&s, &id)?;
    let session = start_session(&model, &block)?;
    blocking(|| s.sessions.put(&session))?;
    Ok((StatusCode::CREATED, Json(session_view(session, &block))).into_response())
}

fn session_block(s: &AppState, session: &Session) -> AppResult<EffectiveBlock> {
    s.workspace.resolve(&session.block_name).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown-block", e.to_string())
    })
}

async fn get_session(State(s): Shared, Path(id): Path<String>) -> AppResult<Response> {
    let session = blocking(|| s.sessions.get(&id))?;
    let block = session_block(&s, &session)?;
    Ok(Json(session_view(session, &block)).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct AdvanceRequest {
    /// The model version the client looked at; stale versions are refused.
    model_version: Option<u64>,
    #[serde(default)]
    confirmed: bool,
}

/// Checks the current step against the latest committed model. The body
/// is optional.
async fn advance_session(
    State(s): Shared,
    Path(id): Path<String>,
    body: Option<Json<AdvanceRequest>>,
) -> AppResult<Response> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let session = blocking(|| s.sessions.get(&id))?;
    let block = session_block(&s, &session)?;
    let model = blocking(|| s.models.get(&session.model_id))?;
    if let Some(requested) = req.model_version {
        if requested != model.version {
            return Err(SessionError::StaleModel { model: model.id, requested, current: model.version }.into());
        }
    }
    let outcome = blocking(|| {
        s.sessions.update(&id, |current| {
            let outcome = advance(current, &model, &block, req.confirmed)?;
            let next = match &outcome {
                Advance::Advanced { session } => Some(session.clone()),
                Advance::Unmet { .. } => None,
            };
            Ok::<_, SessionError>((next, outcome))
        })
    })??;
    Ok(Json(outcome).into_response())
}
