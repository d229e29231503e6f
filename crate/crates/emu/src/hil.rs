//! Wall-clock pacing and UDP emission of decoded HV packets.
//!
//! The engine runs on a producer thread and hands one batch per measured
//! subframe to the emitter over a bounded channel. The emitter releases a
//! batch once the wall clock reaches `start + rx_time_ms / factor`.

use std::fmt::Write as _;
use std::net::{ToSocketAddrs, UdpSocket};
use std::sync::mpsc::{self, Receiver, SyncSender};
use std::time::{Duration, Instant};

use cv2x_core::engine::{HvReception, Observer};
use cv2x_core::{Engine, MetricsReport};
use serde::{Deserialize, Deserializer, Serialize};

use crate::config::PacingConfig;
use crate::error::{Error, Result};

/// Batches buffered between engine and emitter, one per busy subframe.
pub const CHANNEL_CAPACITY: usize = 1000;

/// How far, in simulated ms, a paced engine may run ahead of the wall clock.
pub const ENGINE_LEAD_MS: u64 = 100;

/// Timer sleeps stop this far before a target; the rest is spent yielding.
const SPIN_MARGIN: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmittedBsm {
    pub rx_time_ms: u64,
    pub tx_id: u32,
    pub seq: u32,
    #[serde(deserialize_with = "nullable")]
    pub x_m: f64,
    #[serde(deserialize_with = "nullable")]
    pub y_m: f64,
    #[serde(deserialize_with = "nullable")]
    pub speed_mps: f64,
    #[serde(deserialize_with = "nullable")]
    pub heading_deg: f64,
    #[serde(deserialize_with = "nullable")]
    pub rssi_dbm: f64,
    #[serde(deserialize_with = "nullable")]
    pub sinr_db: f64,
}

fn nullable<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl EmittedBsm {
    /// `None` for packets the HV failed to decode.
    pub fn from_reception(r: &HvReception) -> Option<Self> {
        r.outcome.decoded.then(|| EmittedBsm {
            rx_time_ms: r.outcome.subframe,
            tx_id: r.outcome.tx_id,
            seq: r.seq,
            x_m: r.snapshot.x_m,
            y_m: r.snapshot.y_m,
            speed_mps: r.snapshot.speed_mps,
            heading_deg: r.snapshot.heading_deg,
            rssi_dbm: r.outcome.rx_power_dbm,
            sinr_db: r.outcome.sinr_db,
        })
    }
}

fn push_num(out: &mut String, x: f64) {
    if !x.is_finite() {
        out.push_str("null");
        return;
    }
    let r = (x * 1000.0).round() / 1000.0;
    let r = if r == 0.0 { 0.0 } else { r };
    let start = out.len();
    let _ = write!(out, "{r:.3}");
    while out.ends_with('0') && !out[start..].ends_with(".0") {
        out.pop();
    }
}

/// One JSON object in fixed key order, newline-terminated.
pub fn encode_record(e: &EmittedBsm) -> Vec<u8> {
    let mut s = String::with_capacity(160);
    let _ = write!(s, "{{\"rx_time_ms\":{},\"tx_id\":{},\"seq\":{}", e.rx_time_ms, e.tx_id, e.seq);
    for (key, v) in [
        ("x_m", e.x_m),
        ("y_m", e.y_m),
        ("speed_mps", e.speed_mps),
        ("heading_deg", e.heading_deg),
        ("rssi_dbm", e.rssi_dbm),
        ("sinr_db", e.sinr_db),
    ] {
        let _ = write!(s, ",\"{key}\":");
        push_num(&mut s, v);
    }
    s.push_str("}\n");
    s.into_bytes()
}

pub fn decode_record(bytes: &[u8]) -> Result<EmittedBsm> {
    serde_json::from_slice(bytes).map_err(|e| Error::Net(format!("bad datagram: {e}")))
}

/// Decodes and also checks that the bytes are exactly what
/// [`encode_record`] produces for the decoded value.
pub fn decode_strict(bytes: &[u8]) -> Result<EmittedBsm> {
    let e = decode_record(bytes)?;
    if encode_record(&e) != bytes {
        return Err(Error::Net(format!(
            "datagram not in canonical form: {}",
            String::from_utf8_lossy(bytes).trim_end()
        )));
    }
    Ok(e)
}

pub trait DatagramSink {
    fn send(&mut self, datagram: &[u8]) -> std::io::Result<()>;
}

impl DatagramSink for Vec<Vec<u8>> {
    fn send(&mut self, datagram: &[u8]) -> std::io::Result<()> {
        self.push(datagram.to_vec());
        Ok(())
    }
}

/// Discards everything; used to time the pacing path alone.
pub struct NullSink;

impl DatagramSink for NullSink {
    fn send(&mut self, _datagram: &[u8]) -> std::io::Result<()> {
        Ok(())
    }
}

pub struct UdpSink {
    socket: UdpSocket,
    refused: u64,
}

/// `udp://host:port` or plain `host:port`.
pub fn parse_endpoint(endpoint: &str) -> Result<std::net::SocketAddr> {
    let hostport = endpoint.strip_prefix("udp://").unwrap_or(endpoint);
    if hostport.contains("://") {
        return Err(Error::Config(format!("unsupported endpoint scheme in `{endpoint}`")));
    }
    let addr = hostport
        .to_socket_addrs()
        .map_err(|e| Error::Net(format!("cannot resolve `{endpoint}`: {e}")))?
        .next()
        .ok_or_else(|| Error::Net(format!("`{endpoint}` resolves to no address")))?;
    if addr.port() == 0 {
        return Err(Error::Net(format!("`{endpoint}`: port 0 is not a destination")));
    }
    Ok(addr)
}

impl UdpSink {
    pub fn connect(endpoint: &str) -> Result<Self> {
        let addr = parse_endpoint(endpoint)?;
        let bind = if addr.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" };
        let socket = UdpSocket::bind(bind).map_err(|e| Error::Net(format!("bind: {e}")))?;
        socket
            .connect(addr)
            .map_err(|e| Error::Net(format!("connect {addr}: {e}")))?;
        Ok(UdpSink { socket, refused: 0 })
    }

    /// Sends rejected with ICMP port-unreachable so far.
    pub fn refused(&self) -> u64 {
        self.refused
    }
}

impl DatagramSink for UdpSink {
    fn send(&mut self, datagram: &[u8]) -> std::io::Result<()> {
        match self.socket.send(datagram) {
            Ok(_) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::ConnectionRefused => {
                self.refused += 1;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PacingStats {
    pub emitted: u64,
    pub batches: u64,
    /// Per-record emission lag behind its wall-clock target, in ms. Empty
    /// when unpaced.
    pub lags_ms: Vec<f64>,
    pub wall_ms: f64,
}

impl PacingStats {
    pub fn lag_quantile_ms(&self, q: f64) -> Option<f64> {
        if self.lags_ms.is_empty() {
            return None;
        }
        let mut v = self.lags_ms.clone();
        v.sort_by(f64::total_cmp);
        let rank = (q * v.len() as f64).ceil() as usize;
        Some(v[rank.clamp(1, v.len()) - 1])
    }

    pub fn max_lag_ms(&self) -> Option<f64> {
        self.lags_ms.iter().copied().reduce(f64::max)
    }
}

enum Msg {
    /// The engine reached measured time zero; anchors the wall clock.
    Start,
    Batch {
        rx_time_ms: u64,
        datagrams: Vec<Vec<u8>>,
    },
}

struct Producer {
    tx: SyncSender<Msg>,
    current: Vec<Vec<u8>>,
    /// Wall-clock anchor and real-time factor; `None` until started or when
    /// unpaced.
    pace: Option<(Instant, f64)>,
    rtf: Option<f64>,
    started: bool,
    closed: bool,
}

impl Producer {
    fn send(&mut self, m: Msg) {
        if !self.closed && self.tx.send(m).is_err() {
            self.closed = true;
        }
    }
}

impl Observer for Producer {
    fn on_hv_reception(&mut self, r: &HvReception) {
        if let Some(e) = EmittedBsm::from_reception(r) {
            self.current.push(encode_record(&e));
        }
    }

    fn on_subframe_committed(&mut self, subframe: u64) {
        if !self.started {
            self.started = true;
            self.pace = self.rtf.map(|f| (Instant::now(), f));
            self.send(Msg::Start);
        }
        if !self.current.is_empty() {
            let datagrams = std::mem::take(&mut self.current);
            self.send(Msg::Batch {
                rx_time_ms: subframe,
                datagrams,
            });
        }
        // keep the CPU free for the emitter instead of racing ahead
        if let Some((start, f)) = self.pace {
            if let Some(ahead) = subframe.checked_sub(ENGINE_LEAD_MS) {
                let t = start + Duration::from_secs_f64(ahead as f64 / 1000.0 / f);
                let now = Instant::now();
                if t > now {
                    std::thread::sleep(t - now);
                }
            }
        }
    }

    fn should_stop(&self) -> bool {
        self.closed
    }
}

fn wait_until(target: Instant) {
    loop {
        let now = Instant::now();
        if now >= target {
            return;
        }
        let left = target - now;
        if left > SPIN_MARGIN {
            std::thread::sleep(left - SPIN_MARGIN);
        } else {
            std::thread::yield_now();
        }
    }
}

fn emit_loop(rx: Receiver<Msg>, cfg: &PacingConfig, sink: &mut dyn DatagramSink) -> Result<PacingStats> {
    let mut stats = PacingStats::default();
    let mut start = Instant::now();
    let mut late_since: Option<u64> = None;
    for msg in rx {
        let (rx_time_ms, datagrams) = match msg {
            Msg::Start => {
                start = Instant::now();
                continue;
            }
            Msg::Batch { rx_time_ms, datagrams } => (rx_time_ms, datagrams),
        };
        let target = cfg
            .real_time_factor
            .map(|f| start + Duration::from_secs_f64(rx_time_ms as f64 / 1000.0 / f));
        if let Some(t) = target {
            wait_until(t);
        }
        let mut worst = 0.0f64;
        for d in &datagrams {
            if let Some(t) = target {
                let lag = Instant::now().saturating_duration_since(t).as_secs_f64() * 1000.0;
                worst = worst.max(lag);
                stats.lags_ms.push(lag);
            }
            sink.send(d).map_err(|e| Error::Net(format!("send: {e}")))?;
            stats.emitted += 1;
        }
        stats.batches += 1;
        if target.is_some() {
            if worst > cfg.max_lag_ms as f64 {
                let since = *late_since.get_or_insert(rx_time_ms);
                if rx_time_ms - since >= cfg.violation_window_ms {
                    return Err(Error::RealTime {
                        subframe: since,
                        lag_ms: worst,
                        max_lag_ms: cfg.max_lag_ms as f64,
                        window_ms: cfg.violation_window_ms,
                    });
                }
            } else {
                late_since = None;
            }
        }
    }
    stats.wall_ms = start.elapsed().as_secs_f64() * 1000.0;
    Ok(stats)
}

/// Runs `engine` on a worker thread and emits every decoded HV packet to
/// `sink`, paced by `cfg.real_time_factor` when set.
pub fn pace_and_emit(
    engine: Engine,
    cfg: &PacingConfig,
    sink: &mut dyn DatagramSink,
) -> Result<(MetricsReport, PacingStats)> {
    cfg.validate()?;
    let (tx, rx) = mpsc::sync_channel(CHANNEL_CAPACITY);
    let rtf = cfg.real_time_factor;
    std::thread::scope(|s| {
        let worker = s.spawn(move || {
            let mut p = Producer {
                tx,
                current: Vec::new(),
                pace: None,
                rtf,
                started: false,
                closed: false,
            };
            engine.run(&mut p)
        });
        let emitted = emit_loop(rx, cfg, sink);
        let report = worker.join().expect("engine thread panicked");
        let stats = emitted?;
        Ok((report?, stats))
    })
}
