use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use provchain_core::{Address, BatchId};
use serde_json::Value;
use tokio::net::TcpListener;

use crate::error::ApiError;
use crate::service::Gateway;
use crate::views::{self, EventQuery, GasQuery};

type Shared = State<Arc<Gateway>>;
type ApiResult = Result<Json<Value>, ApiError>;

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn parse<T: std::str::FromStr>(what: &str, s: &str) -> Result<T, ApiError>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e| ApiError::bad_request(format!("{what}: {e}")))
}

async fn submit(gateway: Arc<Gateway>, op: &'static str, body: Bytes) -> ApiResult {
    let body: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON: {e}")))?;
    let (caller, timestamp, op) = views::parse_op(op, body)?;
    // the writer fsyncs, so keep it off the async workers
    let submitted = tokio::task::spawn_blocking(move || gateway.submit(caller, timestamp, op))
        .await
        .map_err(|e| ApiError::new(500, "Internal", e.to_string()))??;
    views::submitted(&submitted).map(Json)
}

macro_rules! write_route {
    ($op:literal) => {
        post(|State(g): Shared, body: Bytes| submit(g, $op, body))
    };
}

async fn balances(State(g): Shared, Path(owner): Path<String>) -> ApiResult {
    let owner: Address = parse("owner", &owner)?;
    Ok(Json(views::balances(&g.snapshot(), owner)))
}

fn batch_path(contract: &str, batch: &str) -> Result<(Address, BatchId), ApiError> {
    Ok((parse("contract", contract)?, parse("batch", batch)?))
}

async fn provenance(State(g): Shared, Path((c, b)): Path<(String, String)>) -> ApiResult {
    let (c, b) = batch_path(&c, &b)?;
    views::provenance(&g.snapshot(), c, b).map(Json)
}

async fn track(State(g): Shared, Path((c, b)): Path<(String, String)>) -> ApiResult {
    let (c, b) = batch_path(&c, &b)?;
    views::track(&g.snapshot(), c, b).map(Json)
}

async fn custody(State(g): Shared, Path((c, b)): Path<(String, String)>) -> ApiResult {
    let (c, b) = batch_path(&c, &b)?;
    views::custody(&g.snapshot(), c, b).map(Json)
}

async fn events(State(g): Shared, query: Result<Query<EventQuery>, axum::extract::rejection::QueryRejection>) -> ApiResult {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    views::events(&g.snapshot(), &q).map(Json)
}

async fn gas_estimate(State(g): Shared, query: Result<Query<GasQuery>, axum::extract::rejection::QueryRejection>) -> ApiResult {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    views::gas_estimate(&g.snapshot(), &q).map(Json)
}

async fn digest(State(g): Shared) -> Json<Value> {
    Json(views::digest(&g.snapshot()))
}

async fn participants(State(g): Shared) -> Json<Value> {
    Json(views::participants(&g.snapshot()))
}

async fn contracts(State(g): Shared) -> Json<Value> {
    Json(views::contracts(&g.snapshot()))
}

async fn not_found() -> ApiError {
    ApiError::new(404, "NotFound", "no such endpoint")
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/contracts/token", write_route!("deploy_token"))
        .route("/contracts/certificate", write_route!("deploy_certificate"))
        .route("/certify", write_route!("certify"))
        .route("/revoke", write_route!("revoke"))
        .route("/batches", write_route!("add_batch"))
        .route("/batches/split", write_route!("split_batch"))
        .route("/batches/merge", write_route!("merge_batch"))
        .route("/batches/transfer", write_route!("transfer_batch"))
        .route("/batches/consume", write_route!("consume_batch"))
        .route("/balances/{owner}", get(balances))
        .route("/provenance/{contract}/{batch}", get(provenance))
        .route("/track/{contract}/{batch}", get(track))
        .route("/custody/{contract}/{batch}", get(custody))
        .route("/events", get(events))
        .route("/gas/estimate", get(gas_estimate))
        .route("/state/digest", get(digest))
        .route("/participants", get(participants))
        .route("/contracts", get(contracts))
        .fallback(not_found)
        .with_state(gateway)
}

/// Serves until the listener fails or the process is stopped.
pub async fn serve(gateway: Arc<Gateway>, listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(gateway)).await
}
