//! A hardware-backend run driven over the operator HTTP API. A scripted
//! operator polls `/api/pending`, downloads both STL files and posts a
//! made-up rpm for each request.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};

use serde_json::Value;
use vawt_mine::session::{serve, Backend, RunConfig, Session};

fn http(addr: SocketAddr, method: &str, path: &str, body: &str) -> (u16, Vec<u8>) {
    let mut s = TcpStream::connect(addr).expect("service is up");
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: x\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut reply = Vec::new();
    s.read_to_end(&mut reply).unwrap();
    let split = reply.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
    let status = std::str::from_utf8(&reply[9..12]).unwrap().parse().unwrap();
    (status, reply[split + 4..].to_vec())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig {
        run_id: Some("bench-top".into()),
        backend: Backend::Hardware,
        output_dir: Some(dir.path().to_path_buf()),
        smooth_steps: 5,
        ..RunConfig::default()
    };
    cfg.strategy.population = 4;
    cfg.strategy.budget = 12;

    let mut session = Session::create(&cfg)?;
    let handle = serve(session.service_state(), "127.0.0.1:0")?;
    let addr = handle.addr();
    println!("serving: http://{addr}");
    let engine = std::thread::spawn(move || {
        let mut eval = session.hardware_evaluator();
        session.run_with(&mut eval).map(|o| o.result.fittest)
    });

    let mut answered = 0;
    while answered < cfg.strategy.budget {
        let (_, body) = http(addr, "GET", "/api/pending", "");
        let v: Value = serde_json::from_slice(&body)?;
        let Some(id) = v["pending"]["request_id"].as_u64() else {
            std::thread::sleep(std::time::Duration::from_millis(10));
            continue;
        };
        let (_, a) = http(addr, "GET", "/api/pending/A.stl", "");
        let (_, b) = http(addr, "GET", "/api/pending/B.stl", "");
        let rpm = 1800.0 + ((a.len() + b.len()) % 500) as f64;
        let (status, _) = http(
            addr,
            "POST",
            "/api/measurement",
            &format!(r#"{{"request_id":{id},"rpm":{rpm}}}"#),
        );
        println!(
            "request {id}: {} + {} STL bytes, measured {rpm} rpm -> {status}",
            a.len(),
            b.len()
        );
        answered += 1;
        // Wait for the engine to move past this request.
        while http(addr, "GET", "/api/pending", "").1 == body {
            std::thread::sleep(std::time::Duration::from_millis(5));
        }
    }
    let fittest = engine.join().expect("engine thread")?;
    let (_, run) = http(addr, "GET", "/api/run", "");
    let run: Value = serde_json::from_slice(&run)?;
    println!(
        "status {}, best so far {}",
        run["status"], run["best_so_far"]
    );
    println!("fittest {fittest:?}");
    handle.shutdown();
    Ok(())
}
