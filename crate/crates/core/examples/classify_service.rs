//! Start the HTTP service on a local port, upload a recording for
//! classification, then run a small search job and read its leaderboard.
//!
//! `cargo run --release --example classify_service`
//!
//! The requests are plain HTTP/1.1 over a socket, the same thing
//! `curl --data-binary @S001R04.edf 'localhost:8080/v1/classify?run=4'` sends.

use std::error::Error;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::time::Duration;

use eegline::hyperopt::{LayerKind, SearchSpace};
use eegline::nn::{train, ModelConfig, TrainSettings};
use eegline::pipeline::prepare_split;
use eegline::service::{router, SearchBackend, ServiceConfig};
use eegline::synth::{synth_edf, write_corpus, SynthSpec};

fn request(addr: SocketAddr, method: &str, path: &str, content_type: &str, body: &[u8]) -> std::io::Result<String> {
    let mut stream = TcpStream::connect(addr)?;
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    )?;
    stream.write_all(body)?;
    let mut response = String::new();
    stream.read_to_string(&mut response)?;
    Ok(response)
}

fn status_and_body(response: &str) -> (&str, &str) {
    let status = response.lines().next().unwrap_or_default();
    let body = response.split_once("\r\n\r\n").map_or("", |(_, b)| b);
    (status, body)
}

fn main() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let spec = SynthSpec { subjects: 5, ..Default::default() };
    write_corpus(&spec, &dir.path().join("edf"))?;
    let (_, train_set, test_set) = prepare_split(&dir.path().join("edf"), &dir.path().join("f.eegt"), 0.7, 1)?;
    let config = ModelConfig::parse_layers("conv(4,3x3), pool(4x4,4), fc(16)", 0.01)?;
    let settings = TrainSettings { epochs: 20, batch_size: 16, ..Default::default() };
    let (model, report) = train(&config, &train_set, &test_set, &settings)?;
    println!("model {} trained, val {:.3}", config.render(), report.best_val_acc);

    let search = SearchBackend {
        train: Arc::new(train_set),
        val: Arc::new(test_set),
        train_settings: TrainSettings { epochs: 2, batch_size: 16, ..Default::default() },
        max_parameters: Some(500_000),
        ledger_dir: dir.path().join("ledgers"),
    };
    let runtime = tokio::runtime::Runtime::new()?;
    let addr = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let app = router(ServiceConfig { model: Some(model), model_id: "demo".into(), search: Some(search), body_limit: None });
        tokio::spawn(async move { axum::serve(listener, app).await });
        Ok::<_, std::io::Error>(addr)
    })?;
    println!("listening on {addr}");

    // a subject the model never saw
    let upload = synth_edf(&spec, 7, 4)?;
    let response = request(addr, "POST", "/v1/classify?run=4", "application/octet-stream", &upload)?;
    let (status, body) = status_and_body(&response);
    println!("{status}");
    let report: serde_json::Value = serde_json::from_str(body)?;
    println!("real {} imagined {} (true class: imagined)", report["real"], report["imagined"]);
    for t in report["trials"].as_array().into_iter().flatten().take(4) {
        println!("  trial {} at {} s: {} {}", t["index"], t["onset"], t["predicted"], t["probabilities"]);
    }

    let truncated = request(addr, "POST", "/v1/classify?run=4", "application/octet-stream", &upload[..1000])?;
    println!("truncated upload: {}", status_and_body(&truncated).1);
    let baseline = request(addr, "POST", "/v1/classify?run=1", "application/octet-stream", &synth_edf(&spec, 0, 1)?)?;
    println!("baseline run: {}", status_and_body(&baseline).0);

    let space = SearchSpace {
        num_layers: [1, 2],
        layer_type_choices: vec![LayerKind::Pool, LayerKind::Fc, LayerKind::Dropout],
        pool_size: [2, 4],
        pool_stride: [2, 4],
        fc_units: [2, 16],
        ..SearchSpace::default()
    };
    let job = serde_json::json!({ "id": "demo", "budget": 4, "seed": 3, "space": space });
    let submitted = request(addr, "POST", "/v1/search", "application/json", job.to_string().as_bytes())?;
    println!("submit: {}", status_and_body(&submitted).0);
    loop {
        let polled = request(addr, "GET", "/v1/search/demo", "text/plain", b"")?;
        let status: serde_json::Value = serde_json::from_str(status_and_body(&polled).1)?;
        println!("  {} {}/{}", status["state"], status["completed"], status["budget"]);
        if status["state"] == "Done" || status["state"] == "Failed" {
            break;
        }
        std::thread::sleep(Duration::from_millis(500));
    }
    let board = request(addr, "GET", "/v1/search/demo/leaderboard?k=3", "text/plain", b"")?;
    println!("leaderboard: {}", status_and_body(&board).1);
    Ok(())
}
