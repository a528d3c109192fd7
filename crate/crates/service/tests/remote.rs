use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};

use roomescape::agent::{AgentEndpoint, Observation, Role, Turn};
use roomescape::catalog::Style;
use roomescape::episode::{run_episode, EpisodeOptions};
use roomescape::judge::{JudgeClient, JudgeError};
use roomescape::log::Outcome;
use roomescape::oracle::oracle_policy;
use roomescape::scenegen::generate;
use roomescape_service::remote::{CompletionRequest, CompletionResponse};
use roomescape_service::{RemoteAgent, RemoteConfig, RemoteJudge};

#[derive(Clone, Default)]
struct Mock {
    replies: Arc<Vec<String>>,
    fail_first: usize,
    calls: Arc<AtomicUsize>,
    seen: Arc<Mutex<Vec<CompletionRequest>>>,
}

async fn complete(
    State(m): State<Mock>,
    Json(req): Json<CompletionRequest>,
) -> Result<Json<CompletionResponse>, StatusCode> {
    let n = m.calls.fetch_add(1, Ordering::SeqCst);
    if n < m.fail_first {
        return Err(StatusCode::SERVICE_UNAVAILABLE);
    }
    let k = m.seen.lock().unwrap().len();
    m.seen.lock().unwrap().push(req);
    let text = m.replies.get(k).cloned().unwrap_or_else(|| "{}".into());
    Ok(Json(CompletionResponse { text }))
}

fn spawn_mock(mock: Mock) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = Router::new().route("/v1/complete", post(complete)).with_state(mock);
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}/v1/complete", rx.recv().unwrap())
}

fn fast(url: String) -> RemoteConfig {
    RemoteConfig {
        timeout: Duration::from_secs(10),
        backoff: Duration::from_millis(10),
        ..RemoteConfig::new(url)
    }
}

#[test]
fn remote_agent_plays_a_scripted_backend() {
    let scene = generate("d1", Style::Bathroom, 21).unwrap();
    let plan = oracle_policy(&scene).unwrap().raw_actions();
    let mock = Mock {
        replies: Arc::new(plan.clone()),
        ..Mock::default()
    };
    let url = spawn_mock(mock.clone());
    let mut agent = RemoteAgent::new("mock-model", fast(url)).unwrap().with_frames(true);
    let opts = EpisodeOptions {
        frame_size: 32,
        ..EpisodeOptions::default()
    };
    let log = run_episode(&scene, &mut agent, &opts).unwrap();
    assert_eq!(log.outcome, Outcome::Escaped);
    assert_eq!(log.header.agent, "mock-model");

    let seen = mock.seen.lock().unwrap();
    assert_eq!(seen.len(), plan.len());
    let last = seen.last().unwrap();
    assert_eq!(last.temperature, 0.0);
    assert!(last.system.contains("room escape game"));
    assert_eq!(last.messages.len(), 2 * plan.len() - 1);
    assert_eq!(last.messages[1].content, plan[0]);
    assert!(last.messages.last().unwrap().image_png_base64.is_some());
    assert!(last.messages[0].image_png_base64.is_none());
}

#[test]
fn remote_agent_windows_history_and_retries() {
    let mock = Mock {
        replies: Arc::new(vec!["a".into(), "b".into(), "c".into()]),
        fail_first: 2,
        ..Mock::default()
    };
    let url = spawn_mock(mock.clone());
    let mut agent = RemoteAgent::new("m", fast(url)).unwrap().with_max_turns(Some(3));
    agent
        .start_episode("sys", &[Turn::user("u0"), Turn::assistant("x0")])
        .unwrap();
    let obs = |p: &'static str| Observation {
        step_index: 1,
        feedback: "",
        bag: "None",
        step_prompt: p,
        frame: None,
    };
    assert_eq!(agent.act(&obs("u1")).unwrap(), "a");
    assert_eq!(mock.calls.load(Ordering::SeqCst), 3);
    assert_eq!(agent.act(&obs("u2")).unwrap(), "b");
    assert_eq!(agent.ask("story?").unwrap(), "c");

    let seen = mock.seen.lock().unwrap();
    let roles: Vec<Role> = seen[2].messages.iter().map(|m| m.role).collect();
    assert_eq!(roles, vec![Role::User, Role::Assistant, Role::User]);
    assert_eq!(seen[2].messages[2].content, "story?");
    assert_eq!(agent.conversation.turns.len(), 8);
}

#[test]
fn remote_agent_failure_aborts_the_episode() {
    let mock = Mock {
        fail_first: usize::MAX,
        ..Mock::default()
    };
    let url = spawn_mock(mock);
    let mut agent = RemoteAgent::new("down", fast(url)).unwrap();
    let scene = generate("d1", Style::Bathroom, 2).unwrap();
    let log = run_episode(&scene, &mut agent, &EpisodeOptions::default()).unwrap();
    assert_eq!(log.outcome, Outcome::Aborted);
    assert_eq!(log.total_steps, 0);
    assert!(log.abort_reason.unwrap().contains("503"));
}

#[test]
fn remote_judge_sends_single_turn_prompts() {
    let mock = Mock {
        replies: Arc::new(vec![r#"{"Consistency": 1}"#.into()]),
        ..Mock::default()
    };
    let url = spawn_mock(mock.clone());
    let judge = RemoteJudge::new(fast(url)).unwrap();
    assert_eq!(judge.complete("prompt").unwrap(), r#"{"Consistency": 1}"#);
    let seen = mock.seen.lock().unwrap();
    assert_eq!(seen[0].messages.len(), 1);
    assert_eq!(seen[0].messages[0].content, "prompt");

    let dead = RemoteJudge::new(fast("http://127.0.0.1:9/none".into())).unwrap();
    assert!(matches!(dead.complete("p"), Err(JudgeError::Unavailable(_))));
}
