//! `/v1` endpoints.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use maia_core::delphi::{
    Acknowledgment, FeedbackPacket, RawPayload, Round, RoundKind, RoundState, Submission,
};
use maia_core::io::archive::StudyArchive;
use maia_core::io::parse_versioned;
use maia_core::io::StudyDocument;
use maia_core::model::{Finding, Respondent, ScaleDef, StudyDefinition};
use maia_core::plot::{emit_plot_data, PlotBundle};
use maia_core::report::AnalysisReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::Service;
use crate::tokens::{IssuedToken, Role, TokenRecord};

type AppState = Arc<Service>;
type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/studies", post(create_study))
        .route("/v1/studies/{sid}", get(get_study))
        .route("/v1/studies/{sid}/respondents", post(register_respondent))
        .route(
            "/v1/studies/{sid}/respondents/{id}/tokens",
            post(reissue_token),
        )
        .route(
            "/v1/studies/{sid}/rounds",
            get(list_rounds).post(create_round),
        )
        .route("/v1/studies/{sid}/rounds/{rid}", get(get_round))
        .route("/v1/studies/{sid}/rounds/{rid}/open", post(open_round))
        .route("/v1/studies/{sid}/rounds/{rid}/close", post(close_round))
        .route("/v1/studies/{sid}/rounds/{rid}/brief", post(brief_round))
        .route("/v1/studies/{sid}/rounds/{rid}/submissions", post(submit))
        .route(
            "/v1/studies/{sid}/rounds/{rid}/submissions/me",
            get(own_submission).delete(retract),
        )
        .route("/v1/studies/{sid}/rounds/{rid}/feedback", get(feedback))
        .route("/v1/studies/{sid}/report", get(report))
        .route("/v1/studies/{sid}/report/plots", get(plots))
        .route("/v1/studies/{sid}/reports", post(record_report))
        .route("/v1/studies/{sid}/archive", get(archive))
        .fallback(|| async { ApiError::not_found("NOT_FOUND", "no such endpoint") })
        .with_state(service)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
}

fn facilitator(s: &Service, sid: &str, headers: &HeaderMap) -> Result<TokenRecord, ApiError> {
    let t = s.authenticate(sid, bearer(headers))?;
    if t.role != Role::Facilitator {
        return Err(ApiError::forbidden("facilitator token required"));
    }
    Ok(t)
}

fn respondent(s: &Service, sid: &str, headers: &HeaderMap) -> Result<String, ApiError> {
    let t = s.authenticate(sid, bearer(headers))?;
    match (t.role, t.respondent_id) {
        (Role::Respondent, Some(id)) => Ok(id),
        _ => Err(ApiError::forbidden("respondent token required")),
    }
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "MALFORMED_DOCUMENT",
            e.to_string(),
        )
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreatedStudy {
    pub study: StudyDefinition,
    pub facilitator: IssuedToken,
}

async fn create_study(State(s): State<AppState>, headers: HeaderMap, bytes: Bytes) -> Response {
    let run = || -> Result<CreatedStudy, ApiError> {
        s.check_admin(bearer(&headers))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| {
            ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "MALFORMED_DOCUMENT",
                e.to_string(),
            )
        })?;
        let doc: StudyDocument = parse_versioned(text)?;
        let (study, facilitator) = s.create_study(doc.study)?;
        Ok(CreatedStudy { study, facilitator })
    };
    match run() {
        Ok(created) => (StatusCode::CREATED, Json(created)).into_response(),
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StudyView {
    pub study: StudyDefinition,
    /// Present for facilitators only.
    pub roster: Option<Vec<Respondent>>,
    pub rounds: Vec<Round>,
}

async fn get_study(
    State(s): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> ApiResult<StudyView> {
    let token = s.authenticate(&sid, bearer(&headers))?;
    let view = s.with_study(&sid, |e| {
        Ok(StudyView {
            study: e.study().clone(),
            roster: (token.role == Role::Facilitator)
                .then(|| e.roster().values().cloned().collect()),
            rounds: e.rounds().cloned().collect(),
        })
    })?;
    Ok(Json(view))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub id: String,
    pub display_alias: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Registered {
    pub respondent: Respondent,
    pub token: IssuedToken,
    pub warnings: Vec<Finding>,
}

async fn register_respondent(
    State(s): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
    bytes: Bytes,
) -> Result<Response, ApiError> {
    facilitator(&s, &sid, &headers)?;
    let req: RegisterRequest = body(&bytes)?;
    let respondent = Respondent::new(req.id, req.display_alias);
    let ((respondent, warnings), token) = s.with_study_tokens(
        &sid,
        |e| {
            let warnings = e.register_respondent(respondent.clone())?;
            Ok((respondent, warnings))
        },
        |(r, _)| Some(r.id.clone()),
    )?;
    let token = token.ok_or_else(|| ApiError::internal("token not issued"))?;
    Ok((
        StatusCode::CREATED,
        Json(Registered {
            respondent,
            token,
            warnings,
        }),
    )
        .into_response())
}

async fn reissue_token(
    State(s): State<AppState>,
    Path((sid, id)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<IssuedToken> {
    facilitator(&s, &sid, &headers)?;
    Ok(Json(s.reissue(&sid, &id)?))
}

async fn list_rounds(
    State(s): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Vec<Round>> {
    s.authenticate(&sid, bearer(&headers))?;
    Ok(Json(
        s.with_study(&sid, |e| Ok(e.rounds().cloned().collect()))?,
    ))
}

async fn get_round(
    State(s): State<AppState>,
    Path((sid, rid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Round> {
    s.authenticate(&sid, bearer(&headers))?;
    Ok(Json(s.with_study(&sid, |e| e.round(&rid).cloned())?))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRoundRequest {
    pub kind: RoundKind,
    /// Defaults to the next wave of this kind.
    #[serde(default)]
    pub wave_number: Option<u32>,
    #[serde(default)]
    pub scale: Option<ScaleDef>,
    /// Open immediately after creation.
    #[serde(default)]
    pub open: bool,
}

async fn create_round(
    State(s): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
    bytes: Bytes,
) -> Result<Response, ApiError> {
    facilitator(&s, &sid, &headers)?;
    let req: CreateRoundRequest = body(&bytes)?;
    let round = s.with_study(&sid, |e| {
        let wave = req
            .wave_number
            .unwrap_or_else(|| e.rounds().filter(|r| r.kind == req.kind).count() as u32 + 1);
        if req.open {
            e.open_round(req.kind, wave, req.scale)
        } else {
            e.create_round(req.kind, wave, req.scale)
        }
    })?;
    Ok((StatusCode::CREATED, Json(round)).into_response())
}

async fn open_round(
    State(s): State<AppState>,
    Path((sid, rid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Round> {
    facilitator(&s, &sid, &headers)?;
    Ok(Json(s.with_study(&sid, |e| e.open(&rid))?))
}

async fn close_round(
    State(s): State<AppState>,
    Path((sid, rid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Round> {
    facilitator(&s, &sid, &headers)?;
    Ok(Json(s.with_study(&sid, |e| {
        e.close(&rid)?;
        e.round(&rid).cloned()
    })?))
}

async fn brief_round(
    State(s): State<AppState>,
    Path((sid, rid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Round> {
    facilitator(&s, &sid, &headers)?;
    Ok(Json(s.with_study(&sid, |e| e.mark_briefed(&rid))?))
}

async fn submit(
    State(s): State<AppState>,
    Path((sid, rid)): Path<(String, String)>,
    headers: HeaderMap,
    bytes: Bytes,
) -> ApiResult<Acknowledgment> {
    let who = respondent(&s, &sid, &headers)?;
    let payload: RawPayload = body(&bytes)?;
    Ok(Json(s.with_study(&sid, |e| e.submit(&rid, &who, payload))?))
}

async fn own_submission(
    State(s): State<AppState>,
    Path((sid, rid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Submission> {
    let who = respondent(&s, &sid, &headers)?;
    Ok(Json(
        s.with_study(&sid, |e| e.submission(&rid, &who).cloned())?,
    ))
}

async fn retract(
    State(s): State<AppState>,
    Path((sid, rid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Round> {
    let who = respondent(&s, &sid, &headers)?;
    Ok(Json(s.with_study(&sid, |e| {
        e.retract(&rid, &who)?;
        e.round(&rid).cloned()
    })?))
}

/// Facilitators may read feedback once a round is closed; respondents only
/// after it has been briefed.
async fn feedback(
    State(s): State<AppState>,
    Path((sid, rid)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<FeedbackPacket> {
    let token = s.authenticate(&sid, bearer(&headers))?;
    let packet = match token.role {
        Role::Facilitator => s.with_study(&sid, |e| e.feedback(&rid).cloned())?,
        Role::Respondent => {
            let result = s.with_study(&sid, |e| {
                let round = e.round(&rid)?;
                Ok((round.state == RoundState::Briefed).then(|| e.peek_feedback(&rid).cloned()))
            })?;
            match result {
                Some(packet) => packet?,
                None => {
                    return Err(ApiError::forbidden(
                        "feedback is released once the round is briefed",
                    ))
                }
            }
        }
    };
    Ok(Json(packet))
}

async fn report(
    State(s): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> ApiResult<AnalysisReport> {
    facilitator(&s, &sid, &headers)?;
    Ok(Json(s.with_study(&sid, |e| e.analysis_report())?))
}

async fn plots(
    State(s): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> ApiResult<PlotBundle> {
    facilitator(&s, &sid, &headers)?;
    let report = s.with_study(&sid, |e| e.analysis_report())?;
    Ok(Json(emit_plot_data(&report)?))
}

async fn record_report(
    State(s): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    facilitator(&s, &sid, &headers)?;
    let report = s.with_study(&sid, |e| e.record_report())?;
    Ok((StatusCode::CREATED, Json(report)).into_response())
}

async fn archive(
    State(s): State<AppState>,
    Path(sid): Path<String>,
    headers: HeaderMap,
) -> ApiResult<StudyArchive> {
    facilitator(&s, &sid, &headers)?;
    Ok(Json(s.with_study(&sid, |e| Ok(e.archive()))?))
}
