//! Pulse-sequence representation, validation, and execution against the spin
//! and wire models: ODMR sweeps, Rabi, Ramsey, Hahn echo, and the
//! synchronized echo magnetometry protocol with its asynchronous controls.

use crate::error::{Error, Result};
use crate::gmi::{self, GmiWire, NoiseParams};
use crate::rng::Stream;
use crate::spin::{
    self, DecayModel, EvolutionContext, FieldAtNv, NvParams, SpinSegment, SpinState,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

/// Default optical initialization window, s. Does not enter the spin physics;
/// only the duty-cycle bookkeeping.
pub const LASER_INIT_DURATION: f64 = 3e-6;
/// Default fluorescence readout window, s.
pub const READOUT_DURATION: f64 = 300e-9;

/// One entry of a pulse timeline. `MwPulse` rotations are instantaneous; the
/// Rabi protocol alone maps a physical pulse duration onto the angle through
/// the configured Rabi frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SegmentSpec {
    LaserInit {
        duration: f64,
    },
    MwPulse {
        /// Rotation angle, rad.
        angle: f64,
        /// Rotation axis phase in the equatorial plane, rad.
        phase: f64,
        /// Carrier frequency, Hz.
        carrier: f64,
    },
    FreeEvolve {
        duration: f64,
    },
    /// RF drive of the wire. The window is absolute sequence time; the drive
    /// may span MW and free-evolution segments.
    RfDrive {
        window: (f64, f64),
        v_ac: f64,
        f_ac: f64,
        phase: f64,
    },
    Readout {
        duration: f64,
    },
}

/// Synchronization class of a sequence, fully determined by its segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyncTag {
    Synchronized,
    AsyncFrequency,
    AsyncPhase,
    NoRf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseSequence {
    pub segments: Vec<SegmentSpec>,
    pub total_duration: f64,
    pub sync_tag: SyncTag,
}

const SYNC_REL_TOL: f64 = 1e-9;

impl PulseSequence {
    /// Assemble and validate a sequence, deriving `total_duration` and
    /// `sync_tag` from the segments.
    pub fn new(segments: Vec<SegmentSpec>) -> Result<Self> {
        let total_duration = Self::timeline_duration(&segments)?;
        let sync_tag = Self::compute_sync_tag(&segments)?;
        let seq = PulseSequence {
            segments,
            total_duration,
            sync_tag,
        };
        seq.validate()?;
        Ok(seq)
    }

    fn timeline_duration(segments: &[SegmentSpec]) -> Result<f64> {
        let mut t = 0.0;
        for (i, seg) in segments.iter().enumerate() {
            let d = match seg {
                SegmentSpec::LaserInit { duration }
                | SegmentSpec::FreeEvolve { duration }
                | SegmentSpec::Readout { duration } => *duration,
                SegmentSpec::MwPulse { .. } => 0.0,
                SegmentSpec::RfDrive { .. } => 0.0,
            };
            if d < 0.0 || !d.is_finite() {
                return Err(Error::Protocol {
                    segment: i,
                    reason: format!("negative or non-finite duration {d}"),
                });
            }
            t += d;
        }
        Ok(t)
    }

    /// Total free-evolution time of the sequence.
    pub fn free_evolution_time(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match s {
                SegmentSpec::FreeEvolve { duration } => *duration,
                _ => 0.0,
            })
            .sum()
    }

    /// The RF drive overlay, if one is present with nonzero amplitude.
    pub fn rf_drive(&self) -> Option<(f64, f64, f64, f64, f64)> {
        self.segments.iter().find_map(|s| match s {
            SegmentSpec::RfDrive {
                window,
                v_ac,
                f_ac,
                phase,
            } if *v_ac > 0.0 => Some((window.0, window.1, *v_ac, *f_ac, *phase)),
            _ => None,
        })
    }

    fn compute_sync_tag(segments: &[SegmentSpec]) -> Result<SyncTag> {
        let two_tau: f64 = segments
            .iter()
            .map(|s| match s {
                SegmentSpec::FreeEvolve { duration } => *duration,
                _ => 0.0,
            })
            .sum();
        let rf = segments.iter().find_map(|s| match s {
            SegmentSpec::RfDrive {
                v_ac, f_ac, phase, ..
            } if *v_ac > 0.0 => Some((*f_ac, *phase)),
            _ => None,
        });
        Ok(match rf {
            None => SyncTag::NoRf,
            Some((f_ac, phase)) => {
                let period_matched = two_tau > 0.0 && (f_ac * two_tau - 1.0).abs() < SYNC_REL_TOL;
                if !period_matched {
                    SyncTag::AsyncFrequency
                } else if phase.abs() > SYNC_REL_TOL {
                    SyncTag::AsyncPhase
                } else {
                    SyncTag::Synchronized
                }
            }
        })
    }

    /// Structural validation. Every violation names the offending segment.
    pub fn validate(&self) -> Result<()> {
        let n = self.segments.len();
        if n == 0 {
            return Err(Error::Protocol {
                segment: 0,
                reason: "empty sequence".into(),
            });
        }

        let mut rf_seen = false;
        let mut laser_index: Option<usize> = None;
        let mut first_mw: Option<usize> = None;
        let mut readout_index: Option<usize> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            match seg {
                SegmentSpec::LaserInit { .. } => {
                    if laser_index.is_some() {
                        return Err(Error::Protocol {
                            segment: i,
                            reason: "multiple laser-init segments".into(),
                        });
                    }
                    laser_index = Some(i);
                }
                SegmentSpec::MwPulse {
                    angle,
                    phase,
                    carrier,
                } => {
                    if first_mw.is_none() {
                        first_mw = Some(i);
                    }
                    if !angle.is_finite() || !phase.is_finite() || !(*carrier > 0.0) {
                        return Err(Error::Protocol {
                            segment: i,
                            reason: "MW pulse parameters must be finite with carrier > 0".into(),
                        });
                    }
                }
                SegmentSpec::Readout { .. } => {
                    if readout_index.is_some() {
                        return Err(Error::Protocol {
                            segment: i,
                            reason: "multiple readout segments".into(),
                        });
                    }
                    readout_index = Some(i);
                }
                SegmentSpec::RfDrive {
                    window, v_ac, f_ac, ..
                } => {
                    if rf_seen {
                        return Err(Error::Protocol {
                            segment: i,
                            reason: "multiple RF drive overlays".into(),
                        });
                    }
                    rf_seen = true;
                    if window.1 < window.0 || window.0 < 0.0 {
                        return Err(Error::Protocol {
                            segment: i,
                            reason: format!("invalid RF window {window:?}"),
                        });
                    }
                    if *v_ac < 0.0 || (*v_ac > 0.0 && !(*f_ac > 0.0)) {
                        return Err(Error::Protocol {
                            segment: i,
                            reason: "RF drive needs v_ac >= 0 and f_ac > 0 when driven".into(),
                        });
                    }
                }
                SegmentSpec::FreeEvolve { .. } => {}
            }
        }

        let laser = laser_index.ok_or(Error::Protocol {
            segment: 0,
            reason: "missing laser-init segment".into(),
        })?;
        if let Some(mw) = first_mw {
            if laser > mw {
                return Err(Error::Protocol {
                    segment: laser,
                    reason: "laser init must precede the first MW pulse".into(),
                });
            }
        }
        let readout = readout_index.ok_or(Error::Protocol {
            segment: n - 1,
            reason: "missing readout segment".into(),
        })?;
        if readout != n - 1 {
            return Err(Error::Protocol {
                segment: readout,
                reason: "readout must be the final segment".into(),
            });
        }

        // sync tag must match what the segments imply (no stale metadata)
        let computed = Self::compute_sync_tag(&self.segments)?;
        if computed != self.sync_tag {
            return Err(Error::Protocol {
                segment: 0,
                reason: format!(
                    "declared sync tag {:?} does not match computed {:?}",
                    self.sync_tag, computed
                ),
            });
        }
        Ok(())
    }

    /// Canonical structured-text form with stable field order, so traces can
    /// cite the exact protocol by hash.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        out.push_str("pulse-sequence v1\n");
        out.push_str(&format!("total_duration_s: {:e}\n", self.total_duration));
        out.push_str(&format!("sync_tag: {:?}\n", self.sync_tag));
        for (i, seg) in self.segments.iter().enumerate() {
            match seg {
                SegmentSpec::LaserInit { duration } => {
                    out.push_str(&format!("{i}: laser_init duration_s={duration:e}\n"));
                }
                SegmentSpec::MwPulse {
                    angle,
                    phase,
                    carrier,
                } => {
                    out.push_str(&format!(
                        "{i}: mw_pulse angle_rad={angle:e} phase_rad={phase:e} carrier_hz={carrier:e}\n"
                    ));
                }
                SegmentSpec::FreeEvolve { duration } => {
                    out.push_str(&format!("{i}: free_evolve duration_s={duration:e}\n"));
                }
                SegmentSpec::RfDrive {
                    window,
                    v_ac,
                    f_ac,
                    phase,
                } => {
                    out.push_str(&format!(
                        "{i}: rf_drive t0_s={:e} t1_s={:e} v_ac_v={v_ac:e} f_ac_hz={f_ac:e} phase_rad={phase:e}\n",
                        window.0, window.1
                    ));
                }
                SegmentSpec::Readout { duration } => {
                    out.push_str(&format!("{i}: readout duration_s={duration:e}\n"));
                }
            }
        }
        out
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        hex::encode(digest)
    }
}

/// The quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    MwFrequency,
    MwDuration,
    /// Total free-evolution time (tau for Ramsey, 2 tau for the echo).
    Tau,
    BDc,
    VAc,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::MwFrequency => "mw_frequency_hz",
            SweepVariable::MwDuration => "mw_duration_s",
            SweepVariable::Tau => "free_time_s",
            SweepVariable::BDc => "b_dc_t",
            SweepVariable::VAc => "v_ac_v",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPlan {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub shots_per_point: u64,
    pub master_seed: u64,
    /// Disable shot noise: the trace carries the analytic means.
    pub noiseless: bool,
    /// Keep per-shot photon counts in the trace.
    pub record_raw: bool,
}

impl SweepPlan {
    pub fn new(variable: SweepVariable, values: Vec<f64>, shots: u64, seed: u64) -> Result<Self> {
        let plan = SweepPlan {
            variable,
            values,
            shots_per_point: shots,
            master_seed: seed,
            noiseless: false,
            record_raw: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep has no values"));
        }
        if self.shots_per_point == 0 {
            return Err(Error::invalid("shots_per_point must be >= 1"));
        }
        let ascending = self.values.windows(2).all(|w| w[1] > w[0]);
        let descending = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(ascending || descending) {
            return Err(Error::invalid("sweep values must be strictly monotone"));
        }
        Ok(())
    }

    /// Canonical structured-text form with stable field order, hashed into
    /// the trace metadata alongside the sequence.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        out.push_str("sweep-plan v1\n");
        out.push_str(&format!("variable: {}\n", self.variable.name()));
        out.push_str(&format!("shots_per_point: {}\n", self.shots_per_point));
        out.push_str(&format!("master_seed: {}\n", self.master_seed));
        out.push_str(&format!("noiseless: {}\n", self.noiseless));
        out.push_str(&format!("record_raw: {}\n", self.record_raw));
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i}: {v:e}\n"));
        }
        out
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        hex::encode(digest)
    }
}

/// Everything an execution needs besides the sequence itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Models {
    pub nv: NvParams,
    pub wire: GmiWire,
    pub noise: NoiseParams,
    /// Static field projection on the NV axis from the wire's domains, T.
    pub bias_b_parallel: f64,
    /// ODMR dip full width at half maximum, Hz (independent parameter; the
    /// power-broadening vs T2* split is not modeled).
    pub odmr_fwhm: f64,
    /// Identifier of the NV preset these parameters came from.
    pub nv_preset: String,
    /// Identifier of the wire preset.
    pub wire_preset: String,
}

impl Models {
    pub fn validate(&self) -> Result<()> {
        self.nv.validate()?;
        self.wire.validate()?;
        self.noise.validate()?;
        if !(self.odmr_fwhm > 0.0) {
            return Err(Error::invalid("odmr_fwhm must be > 0"));
        }
        if !self.bias_b_parallel.is_finite() {
            return Err(Error::invalid("bias_b_parallel must be finite"));
        }
        Ok(())
    }
}

/// A sampled experimental record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    /// Mean signal per sweep point, photons per shot.
    pub mean_signal: Vec<f64>,
    /// Per-point standard deviation of the mean, photons per shot.
    pub sigma: Vec<f64>,
    /// Per-shot counts, when requested.
    pub raw_counts: Option<Vec<Vec<u64>>>,
    pub metadata: TraceMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub sequence_hash: String,
    pub plan_hash: String,
    pub sync_tag: SyncTag,
    pub master_seed: u64,
    pub shots_per_point: u64,
    pub nv_preset: String,
    pub wire_preset: String,
    /// Total free-evolution time of the (template) sequence, s.
    pub free_evolution_time: f64,
    /// Wall-clock-equivalent duration of one shot of the sequence, s.
    pub shot_duration: f64,
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

/// Carrier resonant with the centroid of the m_s = 0 -> -1 hyperfine pair at
/// the given bias, offset by `detuning`.
fn carrier_for(params: &NvParams, bias_b_parallel: f64, detuning: f64) -> f64 {
    params.zero_field_splitting_d - params.gyro_e * bias_b_parallel.abs() - detuning
}

/// CW-equivalent ODMR sweep: the MW carrier is the swept variable.
pub fn build_odmr(
    freq_start: f64,
    freq_stop: f64,
    points: usize,
    shots: u64,
    seed: u64,
    models: &Models,
) -> Result<(PulseSequence, SweepPlan)> {
    if points < 2 || !(freq_stop > freq_start) {
        return Err(Error::invalid(
            "ODMR needs a non-empty ascending frequency range",
        ));
    }
    let d = models.nv.zero_field_splitting_d;
    if !(freq_start < d && d < freq_stop) {
        return Err(Error::invalid(format!(
            "ODMR range [{freq_start:e}, {freq_stop:e}] must bracket the zero-field line {d:e}"
        )));
    }
    let sequence = PulseSequence::new(vec![
        SegmentSpec::LaserInit {
            duration: LASER_INIT_DURATION,
        },
        SegmentSpec::MwPulse {
            angle: PI,
            phase: 0.0,
            carrier: d,
        },
        SegmentSpec::Readout {
            duration: READOUT_DURATION,
        },
    ])?;
    let values: Vec<f64> = (0..points)
        .map(|i| freq_start + (freq_stop - freq_start) * i as f64 / (points - 1) as f64)
        .collect();
    let plan = SweepPlan::new(SweepVariable::MwFrequency, values, shots, seed)?;
    Ok((sequence, plan))
}

/// Rabi: MW pulse duration is swept; rotation angle = 2 pi Omega_R t.
pub fn build_rabi(
    durations: Vec<f64>,
    shots: u64,
    seed: u64,
    models: &Models,
) -> Result<(PulseSequence, SweepPlan)> {
    let carrier = carrier_for(&models.nv, models.bias_b_parallel, 0.0);
    let sequence = PulseSequence::new(vec![
        SegmentSpec::LaserInit {
            duration: LASER_INIT_DURATION,
        },
        SegmentSpec::MwPulse {
            angle: 0.0,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::Readout {
            duration: READOUT_DURATION,
        },
    ])?;
    let plan = SweepPlan::new(SweepVariable::MwDuration, durations, shots, seed)?;
    Ok((sequence, plan))
}

/// Ramsey pi/2 - tau - pi/2 at a carrier detuned by `detuning` from the
/// hyperfine pair centroid. The sweep variable is tau.
pub fn build_ramsey(
    taus: Vec<f64>,
    detuning: f64,
    shots: u64,
    seed: u64,
    models: &Models,
) -> Result<(PulseSequence, SweepPlan)> {
    let plan = SweepPlan::new(SweepVariable::Tau, taus, shots, seed)?;
    let nominal = plan.values.iter().cloned().fold(0.0f64, f64::max);
    let carrier = carrier_for(&models.nv, models.bias_b_parallel, detuning);
    let sequence = PulseSequence::new(vec![
        SegmentSpec::LaserInit {
            duration: LASER_INIT_DURATION,
        },
        SegmentSpec::MwPulse {
            angle: PI / 2.0,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::FreeEvolve { duration: nominal },
        SegmentSpec::MwPulse {
            angle: PI / 2.0,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::Readout {
            duration: READOUT_DURATION,
        },
    ])?;
    Ok((sequence, plan))
}

/// Hahn echo pi/2 - tau - pi - tau - pi/2. The sweep variable is the total
/// free time 2 tau. `flip_readout_phase` shifts the final pi/2 by 180 degrees
/// producing the inverted trace.
pub fn build_hahn(
    two_taus: Vec<f64>,
    flip_readout_phase: bool,
    shots: u64,
    seed: u64,
    models: &Models,
) -> Result<(PulseSequence, SweepPlan)> {
    let plan = SweepPlan::new(SweepVariable::Tau, two_taus, shots, seed)?;
    let nominal = plan.values.iter().cloned().fold(0.0f64, f64::max);
    let carrier = carrier_for(&models.nv, models.bias_b_parallel, 0.0);
    let final_phase = if flip_readout_phase { PI } else { 0.0 };
    let sequence = PulseSequence::new(vec![
        SegmentSpec::LaserInit {
            duration: LASER_INIT_DURATION,
        },
        SegmentSpec::MwPulse {
            angle: PI / 2.0,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::FreeEvolve {
            duration: nominal / 2.0,
        },
        SegmentSpec::MwPulse {
            angle: PI,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::FreeEvolve {
            duration: nominal / 2.0,
        },
        SegmentSpec::MwPulse {
            angle: PI / 2.0,
            phase: final_phase,
            carrier,
        },
        SegmentSpec::Readout {
            duration: READOUT_DURATION,
        },
    ])?;
    Ok((sequence, plan))
}

/// Synchronized Hahn-echo magnetometry: fixed 2 tau, the external DC field is
/// swept, and the wire is driven at f_ac (default 1 / 2 tau) with phase
/// `phi_prime`. Controls: v_ac = 0 (no RF), f_ac != 1/2tau (async frequency),
/// phi_prime != 0 (async phase).
#[allow(clippy::too_many_arguments)]
pub fn build_sync_magnetometry(
    two_tau: f64,
    v_ac: f64,
    phi_prime: f64,
    f_ac_override: Option<f64>,
    b_dc_values: Vec<f64>,
    flip_readout_phase: bool,
    shots: u64,
    seed: u64,
    models: &Models,
) -> Result<(PulseSequence, SweepPlan)> {
    if !(two_tau > 0.0) {
        return Err(Error::invalid(format!(
            "two_tau must be > 0, got {two_tau}"
        )));
    }
    if b_dc_values.is_empty() {
        return Err(Error::invalid("b_dc sweep must not be empty"));
    }
    let f_ac = f_ac_override.unwrap_or(1.0 / two_tau);
    let carrier = carrier_for(&models.nv, models.bias_b_parallel, 0.0);
    let tau = two_tau / 2.0;
    let rf_start = LASER_INIT_DURATION;
    let final_phase = if flip_readout_phase { PI } else { 0.0 };
    let sequence = PulseSequence::new(vec![
        SegmentSpec::LaserInit {
            duration: LASER_INIT_DURATION,
        },
        SegmentSpec::RfDrive {
            window: (rf_start, rf_start + two_tau),
            v_ac,
            f_ac,
            phase: phi_prime,
        },
        SegmentSpec::MwPulse {
            angle: PI / 2.0,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::FreeEvolve { duration: tau },
        SegmentSpec::MwPulse {
            angle: PI,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::FreeEvolve { duration: tau },
        SegmentSpec::MwPulse {
            angle: PI / 2.0,
            phase: final_phase,
            carrier,
        },
        SegmentSpec::Readout {
            duration: READOUT_DURATION,
        },
    ])?;
    let plan = SweepPlan::new(SweepVariable::BDc, b_dc_values, shots, seed)?;
    Ok((sequence, plan))
}

/// RF-amplitude sweep at fixed 2 tau (the drive-response measurement). The
/// fixed external field is supplied through [`RunContext`] at execution time.
/// The template's unit drive amplitude is replaced by the sweep value.
pub fn build_drive_sweep(
    two_tau: f64,
    v_ac_values: Vec<f64>,
    shots: u64,
    seed: u64,
    models: &Models,
) -> Result<(PulseSequence, SweepPlan)> {
    if !(two_tau > 0.0) {
        return Err(Error::invalid("two_tau must be > 0"));
    }
    let carrier = carrier_for(&models.nv, models.bias_b_parallel, 0.0);
    let tau = two_tau / 2.0;
    let rf_start = LASER_INIT_DURATION;
    let sequence = PulseSequence::new(vec![
        SegmentSpec::LaserInit {
            duration: LASER_INIT_DURATION,
        },
        SegmentSpec::RfDrive {
            window: (rf_start, rf_start + two_tau),
            v_ac: 1.0,
            f_ac: 1.0 / two_tau,
            phase: 0.0,
        },
        SegmentSpec::MwPulse {
            angle: PI / 2.0,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::FreeEvolve { duration: tau },
        SegmentSpec::MwPulse {
            angle: PI,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::FreeEvolve { duration: tau },
        SegmentSpec::MwPulse {
            angle: PI / 2.0,
            phase: 0.0,
            carrier,
        },
        SegmentSpec::Readout {
            duration: READOUT_DURATION,
        },
    ])?;
    let plan = SweepPlan::new(SweepVariable::VAc, v_ac_values, shots, seed)?;
    Ok((sequence, plan))
}

// ---------------------------------------------------------------------------
// execution
// ---------------------------------------------------------------------------

/// Fixed execution context for sweeps whose variable does not cover it.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunContext {
    /// External DC field for Tau / MwDuration / VAc sweeps, T.
    pub b_dc: f64,
}

/// Execute a plan against the models. Each sweep point draws from an
/// independent substream of (master_seed, index), so the trace is
/// byte-identical under any evaluation order or thread count.
pub fn run(
    sequence: &PulseSequence,
    plan: &SweepPlan,
    models: &Models,
    ctx: RunContext,
) -> Result<Trace> {
    sequence.validate()?;
    plan.validate()?;
    models.validate()?;

    type SweepPoint = (f64, f64, Option<Vec<u64>>);
    let points: Result<Vec<SweepPoint>> = plan
        .values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| -> Result<SweepPoint> {
            let mut stream = Stream::substream(plan.master_seed, index as u64);
            let lambda = point_mean(sequence, plan.variable, value, models, ctx)?;
            if plan.noiseless {
                return Ok((lambda, 0.0, None));
            }
            if plan.record_raw {
                let counts: Vec<u64> = (0..plan.shots_per_point)
                    .map(|_| stream.poisson(lambda))
                    .collect();
                let total: u64 = counts.iter().sum();
                let shots = plan.shots_per_point as f64;
                let mean = total as f64 / shots;
                let sigma = (total.max(1) as f64).sqrt() / shots;
                Ok((mean, sigma, Some(counts)))
            } else {
                let shots = plan.shots_per_point as f64;
                let total = stream.poisson(lambda * shots);
                let mean = total as f64 / shots;
                let sigma = (total.max(1) as f64).sqrt() / shots;
                Ok((mean, sigma, None))
            }
        })
        .collect();
    let points = points?;

    let mut mean_signal = Vec::with_capacity(points.len());
    let mut sigma = Vec::with_capacity(points.len());
    let mut raw = if plan.record_raw {
        Some(Vec::with_capacity(points.len()))
    } else {
        None
    };
    for (m, s, counts) in points {
        mean_signal.push(m);
        sigma.push(s);
        if let (Some(store), Some(c)) = (raw.as_mut(), counts) {
            store.push(c);
        }
    }

    Ok(Trace {
        sweep_variable: plan.variable,
        sweep_values: plan.values.clone(),
        mean_signal,
        sigma,
        raw_counts: raw,
        metadata: TraceMetadata {
            sequence_hash: sequence.hash(),
            plan_hash: plan.hash(),
            sync_tag: sequence.sync_tag,
            master_seed: plan.master_seed,
            shots_per_point: plan.shots_per_point,
            nv_preset: models.nv_preset.clone(),
            wire_preset: models.wire_preset.clone(),
            free_evolution_time: sequence.free_evolution_time(),
            shot_duration: sequence.total_duration,
        },
    })
}

/// Analytic mean photons/shot at one sweep point.
fn point_mean(
    sequence: &PulseSequence,
    variable: SweepVariable,
    value: f64,
    models: &Models,
    ctx: RunContext,
) -> Result<f64> {
    match variable {
        SweepVariable::MwFrequency => odmr_mean(value, models),
        _ => {
            let materialized = materialize(sequence, variable, value, models, ctx)?;
            let state = evolve_timeline(&materialized, models)?;
            Ok(spin::readout_mean(&state, &models.nv))
        }
    }
}

/// Analytic CW ODMR synthesis: unit-peak Lorentzian dips at the four
/// transition frequencies, each weighted by one unpolarized nuclear branch,
/// on the bright baseline.
fn odmr_mean(mw_frequency: f64, models: &Models) -> Result<f64> {
    let lines = spin::transition_frequencies(&models.nv, models.bias_b_parallel)?;
    let half_width_sq = (models.odmr_fwhm / 2.0) * (models.odmr_fwhm / 2.0);
    let mut p_dark = 0.0;
    for center in lines {
        let dx = mw_frequency - center;
        p_dark += 0.5 * half_width_sq / (dx * dx + half_width_sq);
    }
    Ok(spin::mean_from_dark_population(p_dark, &models.nv))
}

/// A concrete timeline entry: a spin segment plus the field in effect.
struct TimelineStep {
    segment: SpinSegment,
    field: FieldAtNv,
}

struct MaterializedSequence {
    steps: Vec<TimelineStep>,
    detuning: f64,
    decay: DecayModel,
}

/// Expand the sequence template at one sweep value into spin segments with
/// absolute times, splitting free evolution at the RF window edges.
fn materialize(
    sequence: &PulseSequence,
    variable: SweepVariable,
    value: f64,
    models: &Models,
    ctx: RunContext,
) -> Result<MaterializedSequence> {
    // totals for scaling the free-evolution template fractions
    let template_free: f64 = sequence.free_evolution_time();
    let free_total = match variable {
        SweepVariable::Tau => value,
        _ => template_free,
    };
    if free_total < 0.0 {
        return Err(Error::invalid(format!(
            "free evolution time must be >= 0, got {free_total}"
        )));
    }

    // RF drive parameters at this sweep point
    let rf = sequence.rf_drive();
    let (v_ac, f_ac, rf_phase) = match (variable, rf) {
        (SweepVariable::VAc, Some((_, _, _, f, p))) => (value, f, p),
        (_, Some((_, _, v, f, p))) => (v, f, p),
        (SweepVariable::VAc, None) => (value, 1.0 / free_total.max(1e-12), 0.0),
        (_, None) => (0.0, 0.0, 0.0),
    };
    let b_dc = match variable {
        SweepVariable::BDc => value,
        _ => ctx.b_dc,
    };
    let b_ac = if v_ac > 0.0 {
        gmi::ac_field_at_nv(&models.wire, v_ac, f_ac, b_dc)?
    } else {
        0.0
    };

    // carrier detuning from the hyperfine centroid at the static bias
    let line_centroid =
        models.nv.zero_field_splitting_d - models.nv.gyro_e * models.bias_b_parallel.abs();
    let mut detuning = 0.0;

    // echo classification: an interior pi pulse flanked by free evolution
    let mut interior_pi = false;
    {
        let mw_indices: Vec<usize> = sequence
            .segments
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, SegmentSpec::MwPulse { .. }))
            .map(|(i, _)| i)
            .collect();
        if mw_indices.len() >= 3 {
            for &i in &mw_indices[1..mw_indices.len() - 1] {
                if let SegmentSpec::MwPulse { angle, .. } = &sequence.segments[i] {
                    if (angle - PI).abs() < 1e-9 {
                        interior_pi = true;
                    }
                }
            }
        }
    }
    let decay = if free_total == 0.0 {
        DecayModel::None
    } else if interior_pi {
        DecayModel::echo(&models.nv)
    } else {
        DecayModel::ramsey(&models.nv)
    };

    // walk the template, assigning absolute times
    let mut steps = Vec::new();
    let mut t = 0.0;
    let mut rf_window = (0.0, 0.0);
    let mut free_start: Option<f64> = None;
    // first pass computes where free evolution begins so the RF window can be
    // re-anchored when tau is the swept variable
    let mut probe_t = 0.0;
    for seg in &sequence.segments {
        match seg {
            SegmentSpec::LaserInit { duration } | SegmentSpec::Readout { duration } => {
                probe_t += duration;
            }
            SegmentSpec::FreeEvolve { .. } if free_start.is_none() => {
                free_start = Some(probe_t);
            }
            _ => {}
        }
    }
    if v_ac > 0.0 {
        let start = free_start.unwrap_or(LASER_INIT_DURATION);
        rf_window = (start, start + free_total);
    }

    for (i, seg) in sequence.segments.iter().enumerate() {
        match seg {
            SegmentSpec::LaserInit { duration } => {
                steps.push(TimelineStep {
                    segment: SpinSegment::LaserReset,
                    field: FieldAtNv::static_parallel(models.bias_b_parallel),
                });
                t += duration;
            }
            SegmentSpec::MwPulse {
                angle,
                phase,
                carrier,
            } => {
                let mut rotation = *angle;
                if variable == SweepVariable::MwDuration {
                    rotation = 2.0 * PI * models.nv.rabi_freq * value;
                }
                detuning = line_centroid - carrier;
                steps.push(TimelineStep {
                    segment: SpinSegment::MwRotation {
                        angle: rotation,
                        axis_phase: *phase,
                    },
                    field: FieldAtNv::static_parallel(models.bias_b_parallel),
                });
            }
            SegmentSpec::FreeEvolve { duration } => {
                let frac = if template_free > 0.0 {
                    duration / template_free
                } else {
                    0.0
                };
                let seg_duration = match variable {
                    SweepVariable::Tau => frac * value,
                    _ => *duration,
                };
                if seg_duration < 0.0 {
                    return Err(Error::Protocol {
                        segment: i,
                        reason: "negative materialized free evolution".into(),
                    });
                }
                push_free_steps(
                    &mut steps,
                    t,
                    seg_duration,
                    rf_window,
                    b_ac,
                    f_ac,
                    rf_phase,
                    models,
                );
                t += seg_duration;
            }
            SegmentSpec::RfDrive { .. } => {}
            SegmentSpec::Readout { duration } => {
                t += duration;
            }
        }
    }

    Ok(MaterializedSequence {
        steps,
        detuning,
        decay,
    })
}

/// Split one free-evolution interval at the RF window edges; the AC field is
/// live only inside the window, with its phase referenced to the window start.
#[allow(clippy::too_many_arguments)]
fn push_free_steps(
    steps: &mut Vec<TimelineStep>,
    t0: f64,
    duration: f64,
    rf_window: (f64, f64),
    b_ac: f64,
    f_ac: f64,
    rf_phase: f64,
    models: &Models,
) {
    if duration == 0.0 {
        return;
    }
    let t1 = t0 + duration;
    let mut cuts = vec![t0, t1];
    for edge in [rf_window.0, rf_window.1] {
        if edge > t0 && edge < t1 {
            cuts.push(edge);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let inside_rf = b_ac > 0.0 && a >= rf_window.0 - 1e-15 && b <= rf_window.1 + 1e-15;
        let mut field = FieldAtNv::static_parallel(models.bias_b_parallel);
        if inside_rf {
            // phase referenced to the RF window start: v(t') ~ sin(2 pi f t' + phi')
            let phase_offset = rf_phase - 2.0 * PI * f_ac * rf_window.0;
            field = field.with_ac(b_ac, f_ac, phase_offset);
        }
        steps.push(TimelineStep {
            // segment times are window-relative so the AC integral lands on
            // t' = t - window_start
            segment: SpinSegment::FreeEvolution {
                t_start: a,
                duration: b - a,
            },
            field,
        });
    }
}

fn evolve_timeline(seq: &MaterializedSequence, models: &Models) -> Result<SpinState> {
    let mut state = SpinState::polarized();
    for step in &seq.steps {
        let ctx = EvolutionContext {
            field: &step.field,
            params: &models.nv,
            detuning: seq.detuning,
            decay: seq.decay,
        };
        state = spin::evolve(&state, &step.segment, &ctx)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_models() -> Models {
        Models {
            nv: NvParams::default(),
            wire: GmiWire {
                transduction_gain_g: 18.0,
                ..GmiWire::default()
            },
            noise: NoiseParams::default(),
            bias_b_parallel: 0.5e-3,
            odmr_fwhm: 0.9e6,
            nv_preset: "test-nv".into(),
            wire_preset: "test-wire".into(),
        }
    }

    #[test]
    fn sync_tag_classification() {
        let m = test_models();
        let two_tau = 10e-6;
        let bs: Vec<f64> = (0..11).map(|i| 160e-6 + i as f64 * 7e-6).collect();
        let (seq, _) =
            build_sync_magnetometry(two_tau, 1.0, 0.0, None, bs.clone(), false, 100, 1, &m)
                .unwrap();
        assert_eq!(seq.sync_tag, SyncTag::Synchronized);

        let (seq, _) = build_sync_magnetometry(
            two_tau,
            1.0,
            0.0,
            Some(2.0 / two_tau),
            bs.clone(),
            false,
            100,
            1,
            &m,
        )
        .unwrap();
        assert_eq!(seq.sync_tag, SyncTag::AsyncFrequency);

        let (seq, _) =
            build_sync_magnetometry(two_tau, 1.0, PI / 2.0, None, bs.clone(), false, 100, 1, &m)
                .unwrap();
        assert_eq!(seq.sync_tag, SyncTag::AsyncPhase);

        let (seq, _) =
            build_sync_magnetometry(two_tau, 0.0, 0.0, None, bs, false, 100, 1, &m).unwrap();
        assert_eq!(seq.sync_tag, SyncTag::NoRf);
    }

    #[test]
    fn stale_sync_tag_rejected() {
        let m = test_models();
        let bs: Vec<f64> = (0..11).map(|i| 160e-6 + i as f64 * 7e-6).collect();
        let (mut seq, _) =
            build_sync_magnetometry(10e-6, 1.0, 0.0, None, bs, false, 100, 1, &m).unwrap();
        seq.sync_tag = SyncTag::NoRf;
        let err = seq.validate();
        assert!(matches!(err, Err(Error::Protocol { .. })), "{err:?}");
    }

    #[test]
    fn structural_validation_errors() {
        // missing readout
        let r = PulseSequence::new(vec![SegmentSpec::LaserInit { duration: 1e-6 }]);
        assert!(matches!(r, Err(Error::Protocol { .. })));
        // readout not last
        let r = PulseSequence::new(vec![
            SegmentSpec::LaserInit { duration: 1e-6 },
            SegmentSpec::Readout { duration: 1e-7 },
            SegmentSpec::FreeEvolve { duration: 1e-6 },
        ]);
        assert!(matches!(r, Err(Error::Protocol { segment: 1, .. })));
        // laser after first MW pulse
        let r = PulseSequence::new(vec![
            SegmentSpec::MwPulse {
                angle: PI,
                phase: 0.0,
                carrier: 2.87e9,
            },
            SegmentSpec::LaserInit { duration: 1e-6 },
            SegmentSpec::Readout { duration: 1e-7 },
        ]);
        assert!(matches!(r, Err(Error::Protocol { .. })));
        // negative duration carries the segment index
        let r = PulseSequence::new(vec![
            SegmentSpec::LaserInit { duration: 1e-6 },
            SegmentSpec::FreeEvolve { duration: -1e-6 },
            SegmentSpec::Readout { duration: 1e-7 },
        ]);
        assert!(matches!(r, Err(Error::Protocol { segment: 1, .. })));
    }

    #[test]
    fn plan_validation() {
        assert!(SweepPlan::new(SweepVariable::Tau, vec![], 10, 0).is_err());
        assert!(SweepPlan::new(SweepVariable::Tau, vec![1.0, 1.0], 10, 0).is_err());
        assert!(SweepPlan::new(SweepVariable::Tau, vec![1.0, 2.0], 0, 0).is_err());
        assert!(SweepPlan::new(SweepVariable::Tau, vec![2.0, 1.0], 10, 0).is_ok());
    }

    #[test]
    fn same_seed_gives_identical_traces() {
        let m = test_models();
        let (seq, plan) = build_odmr(2.84e9, 2.90e9, 101, 2000, 77, &m).unwrap();
        let a = run(&seq, &plan, &m, RunContext::default()).unwrap();
        let b = run(&seq, &plan, &m, RunContext::default()).unwrap();
        assert_eq!(a.mean_signal, b.mean_signal);
        assert_eq!(a.sigma, b.sigma);
        assert_eq!(a.metadata.sequence_hash, b.metadata.sequence_hash);
    }

    #[test]
    fn serial_and_parallel_traces_identical() {
        let m = test_models();
        let bs: Vec<f64> = (0..41)
            .map(|i| 163e-6 + i as f64 * (67e-6 / 40.0))
            .collect();
        let (seq, plan) =
            build_sync_magnetometry(10e-6, 1.0, 0.0, None, bs, false, 5000, 99, &m).unwrap();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run(&seq, &plan, &m, RunContext::default()))
            .unwrap();
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| run(&seq, &plan, &m, RunContext::default()))
            .unwrap();
        assert_eq!(serial.mean_signal, parallel.mean_signal);
        assert_eq!(serial.sigma, parallel.sigma);
    }

    #[test]
    fn rabi_pi_time_inverts_population() {
        let m = test_models();
        // 10 MHz Rabi frequency: pi pulse at 50 ns
        let durations: Vec<f64> = (0..101).map(|i| i as f64 * 1e-9).collect();
        let (seq, mut plan) = build_rabi(durations, 1, 5, &m).unwrap();
        plan.noiseless = true;
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        let bright = m.nv.photons_bright;
        let dark = bright * (1.0 - m.nv.contrast_c);
        assert!((trace.mean_signal[0] - bright).abs() < 1e-12, "t=0 bright");
        assert!(
            (trace.mean_signal[50] - dark).abs() < 1e-12,
            "t=50ns inverted"
        );
        // cos(2 pi Omega t) shape at a quarter period
        let mid = bright * (1.0 - m.nv.contrast_c / 2.0);
        assert!((trace.mean_signal[25] - mid).abs() < 1e-12);
    }

    #[test]
    fn ramsey_noiseless_matches_two_branch_fringe() {
        let mut m = test_models();
        m.nv.hyperfine_a = 3.0e6;
        let detuning = 6.0e6;
        let taus: Vec<f64> = (1..=200).map(|i| i as f64 * 10e-9).collect();
        let (seq, mut plan) = build_ramsey(taus.clone(), detuning, 1, 3, &m).unwrap();
        plan.noiseless = true;
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        for (i, &tau) in taus.iter().enumerate() {
            let env = (-tau / m.nv.t2_star).exp();
            let p_dark = 0.5
                * ((PI * (detuning - 1.5e6) * tau).cos().powi(2)
                    + (PI * (detuning + 1.5e6) * tau).cos().powi(2));
            // envelope acts on the coherent part only
            let p_dark_env = 0.5 + env * (p_dark - 0.5);
            let expected = m.nv.photons_bright * (1.0 - m.nv.contrast_c * p_dark_env);
            assert!(
                (trace.mean_signal[i] - expected).abs() < 1e-9,
                "tau {tau}: got {}, want {expected}",
                trace.mean_signal[i]
            );
        }
    }

    #[test]
    fn hahn_refocuses_and_decays_with_stretch() {
        let m = test_models();
        let two_taus: Vec<f64> = (1..=60).map(|i| i as f64 * 1e-6).collect();
        let (seq, mut plan) = build_hahn(two_taus.clone(), false, 1, 4, &m).unwrap();
        plan.noiseless = true;
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        for (i, &tt) in two_taus.iter().enumerate() {
            let env = (-(tt / m.nv.t2).powf(m.nv.stretch_p)).exp();
            // refocused: dark population (1 - env)/2
            let expected = m.nv.photons_bright * (1.0 - m.nv.contrast_c * (1.0 - env) / 2.0);
            assert!(
                (trace.mean_signal[i] - expected).abs() < 1e-9,
                "2tau {tt}: got {}, want {expected}",
                trace.mean_signal[i]
            );
        }
    }

    #[test]
    fn hahn_phase_flip_mirrors_about_mid_level() {
        let m = test_models();
        let two_taus: Vec<f64> = (1..=40).map(|i| i as f64 * 1e-6).collect();
        let (seq_a, mut plan_a) = build_hahn(two_taus.clone(), false, 1, 4, &m).unwrap();
        let (seq_b, mut plan_b) = build_hahn(two_taus, true, 1, 4, &m).unwrap();
        plan_a.noiseless = true;
        plan_b.noiseless = true;
        let up = run(&seq_a, &plan_a, &m, RunContext::default()).unwrap();
        let down = run(&seq_b, &plan_b, &m, RunContext::default()).unwrap();
        let mid = m.nv.photons_bright * (1.0 - m.nv.contrast_c / 2.0);
        for (a, b) in up.mean_signal.iter().zip(&down.mean_signal) {
            assert!((a - mid) + (b - mid) < 1e-9, "not mirrored: {a} vs {b}");
        }
    }

    #[test]
    fn odmr_trace_has_four_dips_at_transitions() {
        let m = test_models();
        let (seq, mut plan) = build_odmr(2.845e9, 2.895e9, 501, 1, 11, &m).unwrap();
        plan.noiseless = true;
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        let lines = spin::transition_frequencies(&m.nv, m.bias_b_parallel).unwrap();
        for line in lines {
            // signal at a transition must dip by ~half the contrast
            let idx = trace
                .sweep_values
                .iter()
                .position(|f| (f - line).abs() < 5e4)
                .unwrap();
            let dip = 1.0 - trace.mean_signal[idx] / m.nv.photons_bright;
            assert!(dip > 0.4 * m.nv.contrast_c, "line {line:.3e}: dip {dip:.3}");
        }
    }

    #[test]
    fn odmr_requires_bracketing_range() {
        let m = test_models();
        assert!(build_odmr(2.9e9, 3.0e9, 10, 1, 0, &m).is_err());
        assert!(build_odmr(2.8e9, 2.8e9, 10, 1, 0, &m).is_err());
    }

    #[test]
    fn async_phase_control_trace_is_flat() {
        let m = test_models();
        let bs: Vec<f64> = (0..41)
            .map(|i| 163e-6 + i as f64 * (67e-6 / 40.0))
            .collect();
        let (seq, mut plan) =
            build_sync_magnetometry(10e-6, 1.0, PI / 2.0, None, bs, false, 1, 8, &m).unwrap();
        plan.noiseless = true;
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        let lo = trace
            .mean_signal
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = trace
            .mean_signal
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        // refocused level with the echo envelope, no AC pickup at all
        assert!(hi - lo < 1e-12, "async-phase trace varies by {}", hi - lo);
    }

    #[test]
    fn synchronized_trace_shows_fringes() {
        let m = test_models();
        let bs: Vec<f64> = (0..81)
            .map(|i| 163e-6 + i as f64 * (67e-6 / 80.0))
            .collect();
        let (seq, mut plan) =
            build_sync_magnetometry(10e-6, 1.0, 0.0, None, bs, false, 1, 8, &m).unwrap();
        plan.noiseless = true;
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        let lo = trace
            .mean_signal
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = trace
            .mean_signal
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let env = (-(10e-6 / m.nv.t2).powf(2.0)).exp();
        let full_swing = m.nv.photons_bright * m.nv.contrast_c * env;
        assert!(
            hi - lo > 0.9 * full_swing,
            "fringe swing {} vs full {}",
            hi - lo,
            full_swing
        );
    }

    #[test]
    fn raw_counts_recorded_when_requested() {
        let m = test_models();
        let (seq, mut plan) = build_odmr(2.86e9, 2.88e9, 11, 500, 3, &m).unwrap();
        plan.record_raw = true;
        let trace = run(&seq, &plan, &m, RunContext::default()).unwrap();
        let raw = trace.raw_counts.as_ref().unwrap();
        assert_eq!(raw.len(), 11);
        for (counts, mean) in raw.iter().zip(&trace.mean_signal) {
            assert_eq!(counts.len(), 500);
            let total: u64 = counts.iter().sum();
            assert!((total as f64 / 500.0 - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_text_is_stable_and_hashable() {
        let m = test_models();
        let (seq, _) = build_odmr(2.84e9, 2.90e9, 11, 1, 0, &m).unwrap();
        let h1 = seq.hash();
        let h2 = seq.hash();
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        let text = seq.canonical_text();
        assert!(text.contains("laser_init"));
        assert!(text.contains("readout"));
    }

    #[test]
    fn plan_hash_tracks_every_field() {
        let base = SweepPlan::new(SweepVariable::BDc, vec![1e-4, 2e-4], 100, 7).unwrap();
        let h = base.hash();
        assert_eq!(h, base.hash());
        let mut other = base.clone();
        other.master_seed = 8;
        assert_ne!(h, other.hash());
        let mut other = base.clone();
        other.values[1] = 3e-4;
        assert_ne!(h, other.hash());
        let mut other = base.clone();
        other.noiseless = true;
        assert_ne!(h, other.hash());
    }
}
