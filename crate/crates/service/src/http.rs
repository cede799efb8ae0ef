use std::collections::BTreeMap;
use std::net::SocketAddr;

use axum::extract::multipart::MultipartRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Query};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;

use crate::{handle_with_limit, ApiRequest, ApiResponse, Endpoint, Upload, MAX_PAYLOAD};

impl IntoResponse for ApiResponse {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut response = (
            status,
            [(header::CONTENT_TYPE, self.content_type)],
            self.body,
        )
            .into_response();
        if let Some(name) = self.file_name {
            if let Ok(value) = format!("attachment; filename=\"{name}\"").parse() {
                response
                    .headers_mut()
                    .insert(header::CONTENT_DISPOSITION, value);
            }
        }
        response
    }
}

async fn read_uploads(
    multipart: Result<Multipart, MultipartRejection>,
) -> Result<Vec<Upload>, ApiResponse> {
    let mut multipart =
        multipart.map_err(|e| ApiResponse::error(e.status().as_u16(), &e.body_text()))?;
    let mut uploads = Vec::new();
    loop {
        let field = multipart
            .next_field()
            .await
            .map_err(|e| ApiResponse::error(e.status().as_u16(), &e.body_text()))?;
        let Some(field) = field else { break };
        let name = field.name().unwrap_or("file").to_string();
        let file_name = field.file_name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiResponse::error(e.status().as_u16(), &e.body_text()))?;
        uploads.push(Upload {
            field: name,
            file_name,
            bytes: bytes.to_vec(),
        });
    }
    Ok(uploads)
}

async fn dispatch(
    endpoint: Endpoint,
    limit: usize,
    options: BTreeMap<String, String>,
    multipart: Result<Multipart, MultipartRejection>,
) -> ApiResponse {
    let uploads = match read_uploads(multipart).await {
        Ok(uploads) => uploads,
        Err(response) => return response,
    };
    let request = ApiRequest {
        endpoint,
        uploads,
        options,
    };
    // Decoding is CPU-bound; keep it off the async workers.
    tokio::task::spawn_blocking(move || handle_with_limit(request, limit))
        .await
        .unwrap_or_else(|e| ApiResponse::error(500, &e.to_string()))
}

pub fn router() -> Router {
    router_with_limit(MAX_PAYLOAD)
}

/// The service routes with a custom body cap.
pub fn router_with_limit(limit: usize) -> Router {
    let route = |endpoint: Endpoint| {
        post(
            move |Query(options): Query<BTreeMap<String, String>>,
                  multipart: Result<Multipart, MultipartRejection>| {
                dispatch(endpoint, limit, options, multipart)
            },
        )
    };
    Router::new()
        .route("/validate", route(Endpoint::Validate))
        .route("/convert", route(Endpoint::Convert))
        .route("/diff", route(Endpoint::Diff))
        .route("/merge", route(Endpoint::Merge))
        .route(
            "/version",
            get(|| async {
                handle_with_limit(
                    ApiRequest {
                        endpoint: Endpoint::Version,
                        uploads: Vec::new(),
                        options: BTreeMap::new(),
                    },
                    0,
                )
            }),
        )
        .layer(DefaultBodyLimit::max(limit))
}

pub async fn serve(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router()).await
}
