use std::net::SocketAddr;

use roomescape_service::{serve, AppState, ServiceConfig};

/// Starts a service on an ephemeral port in a background runtime.
pub fn spawn_service(config: ServiceConfig) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            serve(listener, AppState::new(config)).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}
