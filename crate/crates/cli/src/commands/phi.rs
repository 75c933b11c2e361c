use crate::error::CliError;
use vatts_core::align::StreamClock;

pub fn run(fps: f64, latency_ms: f64) -> Result<(), CliError> {
    if !(fps > 0.0) {
        return Err(CliError::Usage(format!("--fps must be positive, got {fps}")));
    }
    if !(latency_ms >= 0.0) {
        return Err(CliError::Usage(format!(
            "--latency-ms must be non-negative, got {latency_ms}"
        )));
    }
    println!("phi: fps={fps} latency_ms={latency_ms}");
    let clock = StreamClock::derive(fps, latency_ms / 1000.0)?;
    let margin_ms = clock.phi as f64 * clock.tau_s * 1000.0 - latency_ms;
    println!("phi = {}", clock.phi);
    println!("margin_ms = {margin_ms:.4}");
    Ok(())
}
