use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use racestack::telemetry::bridge::JsonBridge;
use racestack::telemetry::{loopback_pair, BasestationFrame, DashboardFrame, Link, Stamp, UdpLink};

fn wait(mut ok: impl FnMut() -> bool) {
    let t = Instant::now();
    while !ok() {
        assert!(t.elapsed() < Duration::from_secs(5), "timed out");
        std::thread::sleep(Duration::from_millis(5));
    }
}

#[test]
fn console_sees_json_and_commands_reach_the_car() {
    let bridge = JsonBridge::bind("127.0.0.1:0".parse().unwrap()).unwrap();
    let mut console = TcpStream::connect(bridge.local_addr()).unwrap();
    console.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    wait(|| bridge.clients() == 1);

    let (mut car, mut base_side) = loopback_pair();
    let frame =
        DashboardFrame { stamp: Stamp::from_secs(3.5), cross_track_error: 3.6, status: 0, ..Default::default() };
    car.send(&frame.encode()).unwrap();
    car.send(&[1, 2, 3]).unwrap();
    assert_eq!(bridge.relay(&mut base_side).unwrap(), 1);

    let mut line = String::new();
    BufReader::new(console.try_clone().unwrap()).read_line(&mut line).unwrap();
    let v: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert_eq!(v["cross_track_error"].as_f64().unwrap() as f32, 3.6f32);
    assert!(v.get("purepursuit_lookahead_distance").is_some());

    let cmd = BasestationFrame { stamp: Stamp::from_secs(4.0), v_max: 35.0, track_flag: 1, ..Default::default() };
    writeln!(console, "not json").unwrap();
    writeln!(console, "{}", serde_json::to_string(&cmd).unwrap()).unwrap();
    let mut got = None;
    wait(|| {
        bridge.relay(&mut base_side).unwrap();
        if let Some(b) = car.recv().unwrap() {
            got = Some(BasestationFrame::decode(&b).unwrap());
        }
        got.is_some()
    });
    assert_eq!(got.unwrap(), cmd);
    assert_eq!(*bridge.rejected.lock().unwrap(), 1);
}

#[test]
fn binary_frames_cross_udp() {
    let any = "127.0.0.1:0".parse().unwrap();
    let mut a = UdpLink::bind(any, any).unwrap();
    let mut b = UdpLink::bind(any, a.local_addr().unwrap()).unwrap();
    a.set_peer(b.local_addr().unwrap());
    let cmd =
        BasestationFrame { stamp: Stamp::from_secs(1.0), v_max: 45.0, enable_driving: true, ..Default::default() };
    b.send(&cmd.encode()).unwrap();
    let mut got = None;
    wait(|| {
        got = a.recv().unwrap();
        got.is_some()
    });
    assert_eq!(BasestationFrame::decode(&got.unwrap()).unwrap(), cmd);
}
