//! `/v1` JSON API.

use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use onlc_core::scoring::PenaltyLookup;
use onlc_core::{DailyRecord, Group, PatientProfile};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::service::{boundaries, ScoreRequest, Service, ServiceError};
use crate::state::ItemStatus;

pub type Shared = Arc<Service>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Precondition(_) => StatusCode::PRECONDITION_FAILED,
            ServiceError::Store(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.kind(), "message": self.to_string() }))).into_response()
    }
}

fn bad_request(message: impl Into<String>) -> ServiceError {
    ServiceError::Validation(message.into())
}

/// Runs a command off the async workers; training and optimisation block.
async fn blocking<T, F>(svc: Shared, f: F) -> Result<T, ServiceError>
where
    F: FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

fn group_param(slug: &str) -> Result<Group, ServiceError> {
    slug.parse().map_err(|e: onlc_core::DataError| ServiceError::NotFound(e.to_string()))
}

pub fn router(svc: Shared) -> Router {
    let v1 = Router::new()
        .route("/patients", post(register).get(list_patients))
        .route("/patients/{id}", get(get_patient))
        .route("/patients/{id}/records", post(ingest).get(list_records))
        .route("/patients/{id}/suggestions", post(suggest))
        .route("/patients/{id}/messages/{date}", get(message))
        .route("/review-queue", get(queue))
        .route("/review-items/{id}", get(get_item))
        .route("/review-items/{id}/score", post(score))
        .route("/groups/{group}/retrain", post(retrain))
        .route("/groups/{group}/metrics", get(metrics))
        .route("/config/lookup", get(get_lookup).put(put_lookup))
        .route("/config/boundaries", get(get_boundaries))
        .route_layer(middleware::from_fn_with_state(svc.clone(), auth));
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .nest("/v1", v1)
        .with_state(svc)
}

async fn auth(State(svc): State<Shared>, request: Request, next: Next) -> Response {
    if let Some(token) = &svc.config().token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return (
                StatusCode::UNAUTHORIZED,
                Json(json!({ "error": "unauthorized", "message": "missing or wrong bearer token" })),
            )
                .into_response();
        }
    }
    next.run(request).await
}

async fn register(State(svc): State<Shared>, Json(profile): Json<PatientProfile>) -> Result<Response, ServiceError> {
    let p = blocking(svc, move |s| s.register_patient(profile)).await?;
    Ok((StatusCode::CREATED, Json(p)).into_response())
}

async fn list_patients(State(svc): State<Shared>) -> Json<Vec<PatientProfile>> {
    Json(svc.state().patients.values().map(|p| p.profile.clone()).collect())
}

async fn get_patient(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<PatientProfile>, ServiceError> {
    svc.state()
        .patients
        .get(&id)
        .map(|p| Json(p.profile.clone()))
        .ok_or_else(|| ServiceError::NotFound(format!("no patient {id}")))
}

async fn ingest(
    State(svc): State<Shared>,
    Path(id): Path<String>,
    Json(record): Json<DailyRecord>,
) -> Result<Response, ServiceError> {
    let ack = blocking(svc, move |s| s.ingest_record(&id, record)).await?;
    Ok((StatusCode::CREATED, Json(ack)).into_response())
}

async fn list_records(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Json<Vec<DailyRecord>>, ServiceError> {
    blocking(svc, move |s| s.records(&id)).await.map(Json)
}

async fn suggest(State(svc): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let item = blocking(svc, move |s| s.suggest(&id)).await?;
    Ok((StatusCode::CREATED, Json(item)).into_response())
}

async fn message(
    State(svc): State<Shared>,
    Path((id, date)): Path<(String, String)>,
) -> Result<Response, ServiceError> {
    let date: NaiveDate = date.parse().map_err(|_| bad_request(format!("bad date `{date}`")))?;
    let m = blocking(svc, move |s| s.daily_message(&id, date)).await?;
    Ok(Json(m).into_response())
}

#[derive(Deserialize)]
struct QueueQuery {
    status: Option<String>,
    patient: Option<String>,
}

async fn queue(State(svc): State<Shared>, Query(q): Query<QueueQuery>) -> Result<Response, ServiceError> {
    let status = match q.status.as_deref() {
        None | Some("all") => None,
        Some(s) => Some(
            [ItemStatus::PendingReview, ItemStatus::Scored, ItemStatus::Dispatched]
                .into_iter()
                .find(|st| st.slug() == s)
                .ok_or_else(|| bad_request(format!("unknown status `{s}`")))?,
        ),
    };
    Ok(Json(svc.review_queue(status, q.patient.as_deref())).into_response())
}

async fn get_item(State(svc): State<Shared>, Path(id): Path<u64>) -> Result<Response, ServiceError> {
    Ok(Json(svc.item(id)?).into_response())
}

async fn score(
    State(svc): State<Shared>,
    Path(id): Path<u64>,
    Json(request): Json<ScoreRequest>,
) -> Result<Response, ServiceError> {
    let item = blocking(svc, move |s| s.score_item(id, &request)).await?;
    Ok(Json(item).into_response())
}

#[derive(Default, Deserialize)]
struct RetrainBody {
    week_end: Option<NaiveDate>,
}

async fn retrain(
    State(svc): State<Shared>,
    Path(group): Path<String>,
    body: Option<Json<RetrainBody>>,
) -> Result<Response, ServiceError> {
    let group = group_param(&group)?;
    let week_end = body.map(|Json(b)| b).unwrap_or_default().week_end;
    let r = blocking(svc, move |s| s.retrain(group, week_end)).await?;
    let status = if r.cached { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(r)).into_response())
}

#[derive(Serialize)]
struct Metrics {
    group: Group,
    zones: onlc_core::evaluation::ZoneReport,
    zone_a: f64,
}

async fn metrics(State(svc): State<Shared>, Path(group): Path<String>) -> Result<Response, ServiceError> {
    let group = group_param(&group)?;
    let zones = svc.metrics(group)?;
    let zone_a = zones.fraction(onlc_core::evaluation::Zone::A);
    Ok(Json(Metrics { group, zones, zone_a }).into_response())
}

async fn get_lookup(State(svc): State<Shared>) -> Response {
    Json(svc.lookup()).into_response()
}

async fn put_lookup(State(svc): State<Shared>, Json(lookup): Json<PenaltyLookup>) -> Result<Response, ServiceError> {
    Ok(Json(blocking(svc, move |s| s.update_lookup(lookup)).await?).into_response())
}

async fn get_boundaries() -> Response {
    Json(boundaries()).into_response()
}
