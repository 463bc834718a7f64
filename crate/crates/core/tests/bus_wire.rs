mod common;

use common::wire::json_value;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::time::{Duration, Instant};

use manipbench_core::bus::frame::{decode_body, ERROR_OP};
use manipbench_core::bus::*;
use manipbench_core::components::{reference_components, CentroidRect, TopSurface};
use manipbench_core::conformance::{run_conformance, Endpoint, GoldenFixtures};
use manipbench_core::engine::{
    BehaviorDef, BehaviorLibrary, ComputeRegistry, Executor, PreemptHandle, StateDef, StateKind,
    Userdata, ABORTED,
};
use manipbench_core::types::{rect_to_pose, Value};
use proptest::prelude::*;
use serde_json::{json, Map, Value as Json};

const GOLDEN_PING: &[u8] = include_bytes!("golden/ping.frame");

#[test]
fn golden_ping_frame() {
    // {"id":1,"op":"ping","payload":{}} is 33 bytes: 1 + 7 + 12 + 12 + 1
    assert_eq!(&GOLDEN_PING[..4], &[0, 0, 0, 33]);
    assert_eq!(GOLDEN_PING.len(), 37);
    let e = Envelope::new(1, "ping", Map::new());
    assert_eq!(encode_frame(&e).unwrap(), GOLDEN_PING);
    let (back, used) = decode_frame(GOLDEN_PING).unwrap();
    assert_eq!((back, used), (e, 37));
}

#[test]
fn frame_errors() {
    assert!(matches!(
        decode_frame(&[0, 0, 1]),
        Err(FrameError::Incomplete { have: 3, need: 4 })
    ));
    assert!(matches!(
        decode_frame(&GOLDEN_PING[..20]),
        Err(FrameError::Incomplete { have: 20, need: 37 })
    ));
    let huge = ((MAX_FRAME_LEN + 1) as u32).to_be_bytes();
    assert!(matches!(decode_frame(&huge), Err(FrameError::TooLarge(_))));
    let mut bad = vec![0, 0, 0, 2];
    bad.extend_from_slice(&[0xff, 0xfe]);
    assert!(matches!(decode_frame(&bad), Err(FrameError::Malformed(_))));
    assert!(matches!(
        decode_body(br#"{"id":1,"op":"x","payload":[]}"#),
        Err(FrameError::Malformed(_))
    ));
    assert!(matches!(
        decode_body(br#"{"id":1,"op":"x","payload":{},"extra":0}"#),
        Err(FrameError::Malformed(_))
    ));
    // key order does not matter
    let (e, _) = decode_frame(&{
        let body = br#"{"payload":{},"op":"ping","id":1}"#;
        let mut f = (body.len() as u32).to_be_bytes().to_vec();
        f.extend_from_slice(body);
        f
    })
    .unwrap();
    assert_eq!(e, Envelope::new(1, "ping", Map::new()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn frames_round_trip(
        id in any::<u64>(),
        op in "\\PC{0,16}",
        payload in proptest::collection::btree_map("\\PC{0,8}", json_value(), 0..5),
    ) {
        let e = Envelope::new(id, op, payload.into_iter().collect());
        let bytes = encode_frame(&e).unwrap();
        prop_assert_eq!(u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize, bytes.len() - 4);
        let (back, used) = decode_frame(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(back, e);
    }
}

#[test]
fn reference_components_pass_conformance_in_process() {
    for c in reference_components() {
        let report = run_conformance(c.descriptor(), &Endpoint::InProcess(c.clone()));
        assert!(report.passed(), "{report}");
    }
}

#[test]
fn planners_pass_conformance_over_a_socket() {
    for c in [
        Arc::new(TopSurface::default()) as Arc<dyn Component>,
        Arc::new(CentroidRect::default()),
    ] {
        let server = ComponentServer::bind("127.0.0.1:0", c.clone())
            .unwrap()
            .spawn()
            .unwrap();
        let d = c.descriptor().clone().with_transport(Transport::Socket {
            endpoint: server.endpoint(),
        });
        let report = run_conformance(&d, &Endpoint::Socket(server.endpoint()));
        assert!(report.passed(), "{report}");
        assert!(report.check("id_match").is_some());
    }
}

/// Claims candidates but answers with an unknown field.
struct WrongSchema(ComponentDescriptor);

impl Component for WrongSchema {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.0
    }
    fn handle(&self, _: &str, _: &Message) -> Result<Message, ComponentError> {
        unreachable!()
    }
    fn handle_json(&self, op: &str, _: &Json) -> Result<Json, ComponentError> {
        if op == "describe" {
            return Ok(self.0.contract());
        }
        Ok(json!({ "poses": [] }))
    }
}

/// Declares point clouds only but plans on anything.
struct Overeager(ComponentDescriptor);

impl Component for Overeager {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.0
    }
    fn handle(&self, _: &str, _: &Message) -> Result<Message, ComponentError> {
        unreachable!()
    }
    fn handle_json(&self, op: &str, payload: &Json) -> Result<Json, ComponentError> {
        if op == "describe" {
            return Ok(self.0.contract());
        }
        if payload.as_object().is_some_and(|m| m.is_empty()) {
            return Err(ComponentError::new("no input"));
        }
        Ok(json!({ "candidates": [] }))
    }
}

#[test]
fn wrong_schema_fails_only_the_schema_checks() {
    let d = ComponentDescriptor::grasp_planner(
        "bad_schema",
        &[InputKind::PointCloud],
        OutputKind::Pose,
    );
    let report = run_conformance(&d, &Endpoint::InProcess(Arc::new(WrongSchema(d.clone()))));
    assert!(!report.passed());
    assert!(!report.check("schema[point_cloud]").unwrap().passed);
    assert!(!report.check("empty_input[point_cloud]").unwrap().passed);
    assert!(report.check("describe").unwrap().passed);
    assert!(report.check("timeout[point_cloud]").unwrap().passed);
    assert!(report.check("rejects_undeclared[depth_image]").is_some());
}

#[test]
fn undeclared_input_is_a_declaration_mismatch() {
    let d =
        ComponentDescriptor::grasp_planner("overeager", &[InputKind::PointCloud], OutputKind::Pose);
    let report = run_conformance(&d, &Endpoint::InProcess(Arc::new(Overeager(d.clone()))));
    let c = report.check("rejects_undeclared[depth_image]").unwrap();
    assert!(!c.passed);
    assert!(c.detail.contains("declaration mismatch"));
    assert!(report.check("schema[point_cloud]").unwrap().passed);
}

#[test]
fn describe_mismatch_is_reported() {
    let real = TopSurface::default();
    let mut claimed = real.descriptor().clone();
    claimed.output_kind = Some(OutputKind::Pose);
    let report = run_conformance(&claimed, &Endpoint::InProcess(Arc::new(real)));
    assert!(!report.check("describe").unwrap().passed);
    assert!(!report.check("output_kind[point_cloud]").unwrap().passed);
}

#[test]
fn rectangle_output_is_normalized_through_deprojection() {
    let registry = Registry::new();
    registry
        .register(Arc::new(CentroidRect::default()))
        .unwrap();
    let fx = GoldenFixtures::new();
    let request = fx.grasp_request(InputKind::DepthImage, false);
    let raw = registry
        .call_raw(
            "centroid_rect",
            "plan_grasps",
            &request,
            DEFAULT_TIMEOUT,
            None,
        )
        .unwrap();
    let rects: Vec<manipbench_core::types::ScoredRectangle> =
        serde_json::from_value(raw["rectangles"].clone()).unwrap();
    let out = registry
        .call(
            "centroid_rect",
            "plan_grasps",
            &request,
            DEFAULT_TIMEOUT,
            None,
        )
        .unwrap();
    let Some(Value::Candidates(c)) = out.get("candidates") else {
        panic!("{out:?}")
    };
    assert_eq!(c.len(), rects.len());
    let e = &fx.embodiment;
    let expected = rect_to_pose(
        rects[0].rectangle(),
        &fx.depth,
        &e.intrinsics,
        &e.camera_pose,
    )
    .unwrap();
    assert_eq!(*c[0].pose(), expected);
    assert_eq!(c[0].quality(), rects[0].quality());
    assert!(!out.contains_key("rectangles"));
}

#[test]
fn empty_cloud_gives_empty_candidate_list() {
    let registry = Registry::new();
    registry.register(Arc::new(TopSurface::default())).unwrap();
    let out = registry
        .call(
            "top_surface",
            "plan_grasps",
            &json!({"point_cloud": {"frame": "world", "points": []}}),
            DEFAULT_TIMEOUT,
            None,
        )
        .unwrap();
    assert_eq!(out.get("candidates"), Some(&Value::Candidates(vec![])));
}

#[test]
fn registry_resolution_and_schema_errors() {
    let registry = Registry::new();
    let d = registry.register(Arc::new(TopSurface::default())).unwrap();
    assert_eq!(registry.resolve("top_surface"), Some(d));
    assert!(matches!(
        registry.register(Arc::new(TopSurface::default())),
        Err(BusError::DuplicateId(_))
    ));
    let e = registry
        .call(
            "top_surface",
            "plan_grasps",
            &json!({"point_cloud": 3}),
            DEFAULT_TIMEOUT,
            None,
        )
        .unwrap_err();
    assert!(
        matches!(&e, CallError::Protocol(p) if p.to_string().contains("point_cloud")),
        "{e}"
    );
    assert!(matches!(
        registry.call("nope", "plan_grasps", &json!({}), DEFAULT_TIMEOUT, None),
        Err(CallError::UnknownComponent(_))
    ));
}

fn free_port() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().to_string()
}

#[test]
fn closed_port_aborts_the_behavior() {
    let endpoint = free_port();
    let registry = Registry::new();
    let d =
        ComponentDescriptor::grasp_planner("remote", &[InputKind::PointCloud], OutputKind::Pose)
            .with_transport(Transport::Socket {
                endpoint: endpoint.clone(),
            });
    registry.register_endpoint(d).unwrap();
    let services = BoundServices::new(&registry).bind("grasp_planner", Binding::new("remote"));
    let def = BehaviorDef::new("plan", "plan")
        .state(
            StateDef::new("plan", StateKind::ServiceCall, "grasp_planner")
                .inputs(["point_cloud"])
                .outputs(["candidates"])
                .on_error("failed")
                .outcomes(["succeeded", "failed"]),
        )
        .transition("plan", "succeeded", "done")
        .transition("plan", "failed", "failed")
        .terminals(["done", "failed"]);
    let lib = BehaviorLibrary::new();
    let compute = ComputeRegistry::with_builtins();
    let ud = Userdata::new().with(
        "point_cloud",
        Value::PointCloud(manipbench_core::types::PointCloud::empty("world")),
    );
    let run = Executor::new(&lib, &services, &compute).execute_def(&def, ud, &PreemptHandle::new());
    assert_eq!(run.outcome, ABORTED);
    assert!(
        run.diagnostics.iter().any(|d| d.contains(&endpoint)),
        "{:?}",
        run.diagnostics
    );
}

/// A raw peer answering every request with id + 1000.
fn lying_server() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap().to_string();
    std::thread::spawn(move || {
        let (mut s, _) = l.accept().unwrap();
        while let Ok(req) = read_frame(&mut s) {
            let reply = Envelope::new(req.id + 1000, req.op, Map::new());
            if write_frame(&mut s, &reply).is_err() {
                break;
            }
        }
    });
    addr
}

#[test]
fn id_mismatch_poisons_the_client() {
    let mut client = SocketClient::new(lying_server());
    let e = client
        .call("describe", &json!({}), Duration::from_secs(5), None)
        .unwrap_err();
    assert!(matches!(e, CallError::Poisoned(_)));
    assert!(client.is_poisoned());
    let started = Instant::now();
    assert!(matches!(
        client.call("describe", &json!({}), Duration::from_secs(5), None),
        Err(CallError::Poisoned(_))
    ));
    assert!(started.elapsed() < Duration::from_millis(50));
}

struct Slow(ComponentDescriptor, Duration);

impl Component for Slow {
    fn descriptor(&self) -> &ComponentDescriptor {
        &self.0
    }
    fn handle(&self, _: &str, _: &Message) -> Result<Message, ComponentError> {
        std::thread::sleep(self.1);
        Ok(Message::from([(
            "candidates".to_owned(),
            Value::Candidates(vec![]),
        )]))
    }
}

#[test]
fn socket_timeout_then_recovery() {
    let d = ComponentDescriptor::grasp_planner("slow", &[InputKind::PointCloud], OutputKind::Pose);
    let server =
        ComponentServer::bind("127.0.0.1:0", Arc::new(Slow(d, Duration::from_millis(400))))
            .unwrap()
            .spawn()
            .unwrap();
    let mut client = SocketClient::new(server.endpoint());
    let req = json!({"point_cloud": {"frame": "world", "points": []}});
    let started = Instant::now();
    let e = client
        .call("plan_grasps", &req, Duration::from_millis(100), None)
        .unwrap_err();
    assert!(matches!(e, CallError::Timeout { .. }), "{e}");
    assert!(started.elapsed() < Duration::from_millis(350));
    // the stale connection was dropped; the next call reconnects once the server is free
    let out = client
        .call("plan_grasps", &req, Duration::from_secs(5), None)
        .unwrap();
    assert_eq!(out, json!({"candidates": []}));
    assert!(!client.is_poisoned());
}

#[test]
fn cancellation_interrupts_a_socket_wait() {
    let d = ComponentDescriptor::grasp_planner("slow", &[InputKind::PointCloud], OutputKind::Pose);
    let server =
        ComponentServer::bind("127.0.0.1:0", Arc::new(Slow(d, Duration::from_millis(600))))
            .unwrap()
            .spawn()
            .unwrap();
    let mut client = SocketClient::new(server.endpoint());
    let cancel = PreemptHandle::new();
    let c2 = cancel.clone();
    std::thread::spawn(move || {
        std::thread::sleep(Duration::from_millis(100));
        c2.preempt();
    });
    let req = json!({"point_cloud": {"frame": "world", "points": []}});
    let started = Instant::now();
    assert_eq!(
        client.call("plan_grasps", &req, Duration::from_secs(5), Some(&cancel)),
        Err(CallError::Cancelled)
    );
    assert!(started.elapsed() < Duration::from_millis(500));
}

#[test]
fn in_process_timeout_discards_late_answers() {
    let d = ComponentDescriptor::grasp_planner("slow", &[InputKind::PointCloud], OutputKind::Pose);
    let registry = Registry::new();
    registry
        .register(Arc::new(Slow(d, Duration::from_millis(60))))
        .unwrap();
    let req = json!({"point_cloud": {"frame": "world", "points": []}});
    let e = registry
        .call("slow", "plan_grasps", &req, Duration::from_millis(10), None)
        .unwrap_err();
    assert!(matches!(e, CallError::Timeout { .. }));
}

#[test]
fn server_answers_malformed_frames_and_keeps_the_connection() {
    let server = ComponentServer::bind("127.0.0.1:0", Arc::new(TopSurface::default()))
        .unwrap()
        .spawn()
        .unwrap();
    let mut s = TcpStream::connect(server.addr()).unwrap();
    s.write_all(&[0, 0, 0, 5]).unwrap();
    s.write_all(b"{oops").unwrap();
    let reply = read_frame(&mut s).unwrap();
    assert_eq!((reply.id, reply.op.as_str()), (0, ERROR_OP));
    assert!(reply.error_message().unwrap().contains("malformed"));
    write_frame(&mut s, &Envelope::new(9, "describe", Map::new())).unwrap();
    let reply = read_frame(&mut s).unwrap();
    assert_eq!(reply.id, 9);
    assert_eq!(reply.payload_json()["id"], json!("top_surface"));
    // unknown operations come back as error envelopes with the request id
    write_frame(&mut s, &Envelope::new(10, "fly", Map::new())).unwrap();
    let reply = read_frame(&mut s).unwrap();
    assert!(reply.id == 10 && reply.is_error());
}

#[test]
fn server_closes_on_oversized_frames() {
    let server = ComponentServer::bind("127.0.0.1:0", Arc::new(TopSurface::default()))
        .unwrap()
        .spawn()
        .unwrap();
    let mut s = TcpStream::connect(server.addr()).unwrap();
    s.write_all(&((MAX_FRAME_LEN + 1) as u32).to_be_bytes())
        .unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let mut buf = [0u8; 1];
    assert_eq!(s.read(&mut buf).unwrap_or(0), 0);
}
