use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use flowsurrogate::cnn::build_network;
use flowsurrogate::gbm::GbmConfig;
use flowsurrogate::harness::{synth_generate, SynthConfig};
use flowsurrogate::mesh::{write_obj, GateRecord, GatesDocument, Mesh};
use flowsurrogate::pipeline::{run, train_fill_time, training_item, Models, PipelineConfig};
use flowsurrogate_service::{router, AppState, Health, MeshInfo, PredictResponse, ServiceConfig};
use http_body_util::BodyExt;
use tower::ServiceExt;

const TRI_OBJ: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";

fn pipeline_config() -> PipelineConfig {
    let mut cfg = PipelineConfig { seed: 3, ..Default::default() };
    cfg.gbm = GbmConfig { n_estimators: 30, max_depth: 5, ..Default::default() };
    cfg
}

fn fixture() -> (Vec<flowsurrogate::Sample>, Models) {
    let data = synth_generate(&SynthConfig { samples: 3, min_vertices: 800, max_vertices: 1500, seed: 31, ..Default::default() }).unwrap();
    let cfg = pipeline_config();
    let items: Vec<_> = data.iter().enumerate().map(|(i, s)| training_item(s, i, &cfg).unwrap()).collect();
    let gbm = train_fill_time(&items.iter().collect::<Vec<_>>(), &cfg).unwrap();
    let mut net = build_network::<f32>(4);
    net.set_scales(5.0, 0.5).unwrap();
    (data, Models { fill_time: Some(gbm), deflection: Some(net) })
}

fn state(models: Models, capacity: usize) -> Arc<AppState> {
    AppState::new(models, ServiceConfig { pipeline: pipeline_config(), capacity, ..Default::default() })
}

async fn call(state: &Arc<AppState>, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn post(path: &str, body: impl Into<Body>) -> Request<Body> {
    Request::post(path).header("content-type", "application/json").body(body.into()).unwrap()
}

async fn upload(state: &Arc<AppState>, text: &str) -> MeshInfo {
    let (status, body) = call(state, post("/meshes", text.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    serde_json::from_slice(&body).unwrap()
}

fn obj_text(mesh: &Mesh<f64>) -> String {
    let mut buf = Vec::new();
    write_obj(mesh, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn predict_body(handle: &str, gates: &[GateRecord]) -> String {
    serde_json::json!({ "handle": handle, "gates": gates }).to_string()
}

#[tokio::test]
async fn minimal_upload_and_bad_body() {
    let st = state(Models::default(), 4);
    let info = upload(&st, TRI_OBJ).await;
    assert_eq!((info.vertex_count, info.face_count), (3, 1));
    assert_eq!(info.bounding_box.max, [1.0, 1.0, 0.0]);
    let (status, _) = call(&st, post("/meshes", "v 0 0\nf 1 2 3\n")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(st.handles().len(), 1);
}

#[tokio::test]
async fn synthetic_upload_counts_match_generator() {
    let (data, _) = fixture();
    let st = state(Models::default(), 4);
    let info = upload(&st, &obj_text(&data[0].mesh)).await;
    assert_eq!(info.vertex_count, data[0].mesh.vertex_count());
    assert_eq!(info.face_count, data[0].mesh.face_count());
}

#[tokio::test]
async fn health_reports_missing_models() {
    let (_, models) = fixture();
    let (status, body) = call(&state(models.clone(), 2), Request::get("/health").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let h: Health = serde_json::from_slice(&body).unwrap();
    assert_eq!(h.status, "ok");
    assert!(h.models.fill_time.is_some() && h.models.deflection.is_some());

    let partial = Models { fill_time: models.fill_time, deflection: None };
    let (_, body) = call(&state(partial, 2), Request::get("/health").body(Body::empty()).unwrap()).await;
    let h: Health = serde_json::from_slice(&body).unwrap();
    assert_eq!(h.status, "degraded");
    assert_eq!(h.missing, vec!["deflection weights".to_string()]);
}

#[tokio::test]
async fn predict_errors() {
    let (data, models) = fixture();
    let fill_only = Models { fill_time: models.fill_time.clone(), deflection: None };
    let st = state(fill_only, 4);
    let info = upload(&st, &obj_text(&data[0].mesh)).await;
    let gates = vec![GateRecord { node_id: 0, opening_time: 0.0 }, GateRecord { node_id: 1 << 40, opening_time: 0.0 }];
    let (status, _) = call(&st, post("/predict", predict_body("nope", &gates))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = call(&st, post("/predict", predict_body(&info.handle, &gates))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(String::from_utf8_lossy(&body).contains("gate 1"));
    let (status, _) = call(&st, post("/predict", predict_body(&info.handle, &gates[..1]))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let body = serde_json::json!({ "handle": info.handle, "gates": &gates[..1], "deflection": false }).to_string();
    let (status, _) = call(&st, post("/predict", body)).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn predictions_are_repeatable_and_match_library_run() {
    let (data, models) = fixture();
    let st = state(models.clone(), 4);
    let s = &data[1];
    let info = upload(&st, &obj_text(&s.mesh)).await;
    let doc = GatesDocument::from_gates(&s.gates, None);
    let (status, first) = call(&st, post("/predict", predict_body(&info.handle, &doc.gates))).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = call(&st, post("/predict", predict_body(&info.handle, &doc.gates))).await;
    assert_eq!(first, second);
    assert_eq!(st.session(&info.handle).unwrap().cached_gates(), s.gates.len());
    let resp: PredictResponse = serde_json::from_slice(&first).unwrap();
    let direct = run(s.mesh.clone(), &s.gates, &Default::default(), &models, &pipeline_config(), true).unwrap();
    assert_eq!(resp.fill_time, direct.fill_time);
    assert_eq!(resp.deflection, direct.deflection);
}

#[tokio::test]
async fn least_recently_used_mesh_is_evicted() {
    let st = state(Models::default(), 2);
    let a = upload(&st, TRI_OBJ).await.handle;
    let b = upload(&st, TRI_OBJ).await.handle;
    assert!(st.session(&a).is_some());
    let c = upload(&st, TRI_OBJ).await.handle;
    let mut held = st.handles();
    held.sort();
    let mut want = vec![a, c];
    want.sort();
    assert_eq!(held, want);
    assert!(st.session(&b).is_none());
}

#[tokio::test]
async fn concurrent_predictions_equal_serial_ones() {
    let (data, models) = fixture();
    let st = state(models, 4);
    let mut handles = Vec::new();
    for s in &data {
        handles.push(upload(&st, &obj_text(&s.mesh)).await.handle);
    }
    let bodies: Vec<String> = data
        .iter()
        .zip(&handles)
        .map(|(s, h)| predict_body(h, &GatesDocument::from_gates(&s.gates, None).gates))
        .collect();
    let mut serial = Vec::new();
    for b in &bodies {
        serial.push(call(&st, post("/predict", b.clone())).await.1);
    }
    let tasks: Vec<_> = bodies
        .iter()
        .map(|b| {
            let st = st.clone();
            let b = b.clone();
            tokio::spawn(async move { call(&st, post("/predict", b)).await.1 })
        })
        .collect();
    for (t, want) in tasks.into_iter().zip(serial) {
        assert_eq!(t.await.unwrap(), want);
    }
}
