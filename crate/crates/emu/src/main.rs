use std::net::UdpSocket;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use cv2x_emu::bench::{self, BenchMatrix};
use cv2x_emu::hil::{self, DatagramSink, NullSink, UdpSink};
use cv2x_emu::{run, Error, RunConfig};

const EXIT_FAILURE: u8 = 1;
const EXIT_REAL_TIME: u8 = 3;
const EXIT_INVALID_STREAM: u8 = 4;

#[derive(Parser)]
#[command(name = "cv2x", version, about = "C-V2X mode 4 sidelink emulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and export its metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the engine seed and the scenario placement seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the config's `output_dir`, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pace emission to the wall clock (factor 1 unless --rtf is given).
        #[arg(long)]
        real_time: bool,
        /// Simulated seconds per wall-clock second.
        #[arg(long, value_name = "factor")]
        rtf: Option<f64>,
        /// Stream decoded HV packets as JSON datagrams, e.g. udp://127.0.0.1:9000.
        #[arg(long, value_name = "udp://host:port")]
        emit: Option<String>,
        #[arg(long)]
        max_lag_ms: Option<u64>,
    },
    /// Time a matrix of scenarios.
    Bench {
        /// JSON matrix; the 100/200/500 x 10/20 MHz x both models default otherwise.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<u32>,
        #[arg(long)]
        duration_ms: Option<u64>,
    },
    /// Listen for emitted datagrams, validate and print them.
    ReceiveStub {
        #[arg(long, default_value = "127.0.0.1:9000")]
        listen: String,
        /// Stop after this many datagrams.
        #[arg(long)]
        count: Option<u64>,
        /// Stop after this long without traffic.
        #[arg(long, default_value_t = 5000)]
        idle_timeout_ms: u64,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            real_time,
            rtf,
            emit,
            max_lag_ms,
        } => cmd_run(config, seed, out, real_time, rtf, emit, max_lag_ms),
        Command::Bench {
            matrix,
            out,
            repetitions,
            duration_ms,
        } => cmd_bench(matrix, out, repetitions, duration_ms),
        Command::ReceiveStub {
            listen,
            count,
            idle_timeout_ms,
            quiet,
        } => cmd_receive(&listen, count, idle_timeout_ms, quiet),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::RealTime { .. }) => ExitCode::from(EXIT_REAL_TIME),
                _ => ExitCode::from(EXIT_FAILURE),
            }
        }
    }
}

fn cmd_run(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    real_time: bool,
    rtf: Option<f64>,
    emit: Option<String>,
    max_lag_ms: Option<u64>,
) -> anyhow::Result<ExitCode> {
    let mut cfg = RunConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.apply_seed(s);
    }
    let out_dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| "out".into());
    cfg.output_dir = Some(std::path::absolute(&out_dir)?);

    let mut pacing = cfg.pacing.clone().unwrap_or_default();
    if let Some(f) = rtf {
        pacing.real_time_factor = Some(f);
    } else if real_time {
        pacing.real_time_factor = Some(pacing.real_time_factor.unwrap_or(1.0));
    }
    if let Some(e) = emit {
        pacing.endpoint = Some(e);
    }
    if let Some(l) = max_lag_ms {
        pacing.max_lag_ms = l;
    }
    let active = pacing.endpoint.is_some() || pacing.real_time_factor.is_some();
    cfg.pacing = active.then_some(pacing.clone());
    cfg.validate()?;

    let mut udp = match &pacing.endpoint {
        Some(ep) => Some(UdpSink::connect(ep)?),
        None => None,
    };
    let mut null = NullSink;
    let sink: Option<&mut dyn DatagramSink> = match (&mut udp, active) {
        (Some(u), _) => Some(u),
        (None, true) => Some(&mut null),
        (None, false) => None,
    };
    let output = run::run(&cfg, sink)?;
    run::write_outputs(&cfg, &output, &out_dir).with_context(|| format!("writing {}", out_dir.display()))?;
    println!("{}", run::summary(&output));
    if let Some(u) = &udp {
        if u.refused() > 0 {
            eprintln!("warning: {} datagrams refused by the receiver", u.refused());
        }
    }
    println!("results in {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(
    matrix: Option<PathBuf>,
    out: Option<PathBuf>,
    repetitions: Option<u32>,
    duration_ms: Option<u64>,
) -> anyhow::Result<ExitCode> {
    let mut m = match &matrix {
        Some(p) => BenchMatrix::load(p)?,
        None => BenchMatrix::default(),
    };
    if let Some(r) = repetitions {
        anyhow::ensure!(r > 0, "--repetitions must be at least 1");
        m.repetitions = r;
    }
    if let Some(d) = duration_ms {
        m.base.sim.sim_duration_ms = d;
    }
    let rows = bench::run_bench(&m, |r| {
        eprintln!(
            "{} {} vehicles {} MHz: {:.3} s",
            r.channel_model.name(),
            r.n_vehicles,
            r.bandwidth_mhz.mhz(),
            r.mean_wall_ms / 1000.0
        )
    })?;
    let csv = bench::bench_csv(&rows);
    print!("{csv}");
    if let Some(p) = out {
        std::fs::write(&p, &csv).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_receive(listen: &str, count: Option<u64>, idle_timeout_ms: u64, quiet: bool) -> anyhow::Result<ExitCode> {
    let addr = hil::parse_endpoint(listen)?;
    let socket = UdpSocket::bind(addr).with_context(|| format!("binding {addr}"))?;
    socket.set_read_timeout(Some(Duration::from_millis(idle_timeout_ms.max(1))))?;
    eprintln!("listening on {}", socket.local_addr()?);
    let mut buf = vec![0u8; 65536];
    let (mut received, mut invalid, mut out_of_order) = (0u64, 0u64, 0u64);
    let mut last_rx = None;
    while count.is_none_or(|c| received < c) {
        let n = match socket.recv(&mut buf) {
            Ok(n) => n,
            Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => break,
            Err(e) => return Err(e.into()),
        };
        received += 1;
        match hil::decode_strict(&buf[..n]) {
            Ok(rec) => {
                if last_rx.is_some_and(|t| rec.rx_time_ms < t) {
                    out_of_order += 1;
                }
                last_rx = Some(rec.rx_time_ms);
                if !quiet {
                    print!("{}", String::from_utf8_lossy(&buf[..n]));
                }
            }
            Err(e) => {
                invalid += 1;
                eprintln!("{e}");
            }
        }
    }
    eprintln!("received {received} datagrams, {invalid} invalid, {out_of_order} out of order");
    Ok(if invalid > 0 || out_of_order > 0 {
        ExitCode::from(EXIT_INVALID_STREAM)
    } else {
        ExitCode::SUCCESS
    })
}
