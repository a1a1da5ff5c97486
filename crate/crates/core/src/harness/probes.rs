use std::path::{Path, PathBuf};

use crate::acdl::{agc_tune, AcdlChain};
use crate::error::Result;
use crate::harness::config::SimConfig;
use crate::harness::point::derive_seed;
use crate::noise::{NoiseConfig, NoiseRealization};
use crate::ofdm::{assign_carriers, map_bits, ofdm_modulate, BitFrame};
use crate::signal::{estimate_psd, write_psd_csv, write_trace_csv, SignalBuffer};

/// PSD segment length for dumped spectra.
const PSD_SEGMENT: usize = 4096;

/// Writes `buf` restricted to the time window `[t0, t0 + span)` and the PSD
/// of the whole buffer.
fn dump(buf: &SignalBuffer, name: &str, t0: f64, span: f64, dir: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let rate = buf.sample_rate();
    let start = ((t0 * rate).round() as usize).min(buf.len());
    let len = ((span * rate).round() as usize).min(buf.len() - start);
    let trace = dir.join(format!("trace_{name}.csv"));
    write_trace_csv(&buf.slice(start, len)?, &trace)?;
    written.push(trace);
    if buf.len() >= PSD_SEGMENT {
        let psd = dir.join(format!("psd_{name}.csv"));
        write_psd_csv(&estimate_psd(buf, PSD_SEGMENT)?, &psd)?;
        written.push(psd);
    }
    Ok(())
}

/// Runs one trial at the configured operating point with all probes
/// recorded and writes them to `dir`: traces over the first data symbol and
/// PSDs over the whole trial.
pub fn dump_probes(cfg: &SimConfig, seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    let ofdm = &cfg.ofdm;
    let frame = BitFrame::for_symbols(ofdm, cfg.sweep.trial_symbols, derive_seed(seed, 0));
    let s = ofdm_modulate(&assign_carriers(&map_bits(&frame, ofdm.modulation)?, ofdm)?, ofdm)?;
    let noise_cfg = NoiseConfig {
        seed: derive_seed(seed, 1),
        ..cfg.noise.clone()
    };
    let signal_power = ofdm.n_data_carriers() as f64 / ofdm.fft_size as f64;
    let noise = NoiseRealization::generate(s.len(), s.sample_rate(), &noise_cfg, ofdm, signal_power)?;
    let r = s.add(&noise.total()?)?;
    let per_analog = ofdm.adc_samples_per_symbol() * ofdm.oversample_factor;
    let gains = agc_tune(&r.slice(0, cfg.sweep.preamble_symbols * per_analog)?, &cfg.acdl, ofdm)?;
    let chain = AcdlChain::new(&cfg.acdl, ofdm, gains)?;
    let x = chain.front_end(&r)?;
    let acdl = chain.process_front(&x, true)?;
    let linear = chain.linear_front(&x, true)?;

    let t0 = cfg.sweep.preamble_symbols as f64 * ofdm.symbol_duration();
    let span = ofdm.symbol_duration();
    let mut written = Vec::new();
    for (buf, name) in [
        (&s, "tx"),
        (&r, "channel"),
        (&noise.thermal, "noise_thermal"),
        (&noise.cyclostationary, "noise_cyclostationary"),
        (&noise.asynchronous, "noise_asynchronous"),
    ] {
        dump(buf, name, t0, span, dir, &mut written)?;
    }
    for p in acdl.probes.iter().chain(&linear.probes) {
        dump(p, p.origin().label(), t0, span, dir, &mut written)?;
    }
    Ok(written)
}
