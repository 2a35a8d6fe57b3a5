//! Two-timescale simulation driver.
//!
//! A trial runs `superframes` super frames. Each super frame draws fresh path
//! angles and contains `frames` frames; each frame draws fresh path gains and
//! contains `slots` slots over which the gains rotate with the Doppler shift.
//! Digital precoders and the offloading ratio are solved per slot from delayed
//! effective CSI; the analog phases take one SSCA step per frame from one
//! delayed full CSI sample.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{effective_channel, ChannelProcess, ChannelTriple, LinkGeometry, PathProfile};
use crate::error::{invalid, Error, Result};
use crate::latency::{delay_coeffs, total_latency, Case, ComputeParams};
use crate::offload::{binary_rho, optimal_rho, Branch};
use crate::pa::PaParams;
use crate::pcccp::{pcccp_solve, waterfilling_heuristic, wmmse_rate_nats, LinkRole, PcccpConfig, SolveStatus};
use crate::rate::{link_rate, LinkParams};
use crate::ssca::{ssca_iterate, weighted_capacity, AnalogMatrices, AnalogSet, StepSchedule, SurrogateState, Weights};
use crate::system::{validate_dims, ComplexMatrix, Purpose, RngStream, SystemDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Penalty-CCCP precoders, optimal offloading ratio.
    Pcccp,
    /// Water-filling precoders, optimal offloading ratio.
    Heuristic,
    /// Penalty-CCCP precoders, best of full-local and full-edge execution.
    BinaryOffload,
    /// Analog phases re-optimized every slot from full CSI delayed by the
    /// single-timescale feedback delay.
    IdealCsi,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Pcccp,
        Algorithm::Heuristic,
        Algorithm::BinaryOffload,
        Algorithm::IdealCsi,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Pcccp => "pcccp",
            Algorithm::Heuristic => "heuristic",
            Algorithm::BinaryOffload => "binary",
            Algorithm::IdealCsi => "ideal-csi",
        }
    }

    pub fn is_two_timescale(self) -> bool {
        self != Algorithm::IdealCsi
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcccp" => Ok(Algorithm::Pcccp),
            "heuristic" => Ok(Algorithm::Heuristic),
            "binary" | "binary-offload" => Ok(Algorithm::BinaryOffload),
            "ideal-csi" => Ok(Algorithm::IdealCsi),
            _ => Err(invalid(format!(
                "unknown algorithm `{s}` (expected pcccp, heuristic, binary or ideal-csi)"
            ))),
        }
    }
}

/// Multipath power profile shared by the three links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathModel {
    pub num_paths: usize,
    pub los_variance: f64,
    pub nlos_variance: f64,
    /// Rician factor; overrides the two variances when set.
    pub rician: Option<f64>,
}

impl PathModel {
    /// One LOS path of unit power and 15 scattered paths of power 0.1.
    pub fn reference() -> Self {
        Self {
            num_paths: 16,
            los_variance: 1.0,
            nlos_variance: 0.1,
            rician: None,
        }
    }

    pub fn profile(&self) -> PathProfile {
        match self.rician {
            Some(psi) => PathProfile::rician(self.num_paths, psi),
            None => PathProfile::los_nlos(self.num_paths, self.los_variance, self.nlos_variance),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SscaParams {
    pub schedule: StepSchedule,
    /// Proximal weight `ϖ` of the surrogate.
    pub prox_weight: f64,
}

impl Default for SscaParams {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::default(),
            prox_weight: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub dims: SystemDims,
    pub geometry: LinkGeometry,
    pub pa: PaParams,
    /// Transmit budget of user A (watt of PA consumption).
    pub p_ua: f64,
    /// Transmit budget of the BS (watt of PA consumption).
    pub p_bs: f64,
    /// Uplink, downlink and D2D.
    pub links: [LinkParams; 3],
    pub compute: ComputeParams,
    pub paths: PathModel,
    pub doppler_hz: f64,
    /// Feedback delay of full CSI (seconds); two-timescale arms see the
    /// delay scaled by their smaller per-slot CSI size.
    pub csi_delay: f64,
    pub slot_duration: f64,
    pub superframes: usize,
    /// Frames per super frame.
    pub frames: usize,
    /// Slots per frame.
    pub slots: usize,
    /// Quantization bits per CSI element.
    pub csi_bits: u32,
    /// Quantization of the analog phases applied in slots; `None` keeps them continuous.
    pub phase_bits: Option<u32>,
    pub algorithm: Algorithm,
    pub trials: usize,
    pub seed: u64,
    pub ssca: SscaParams,
    pub pcccp: PcccpConfig,
}

impl ScenarioConfig {
    /// Full-size reference scenario.
    pub fn reference() -> Self {
        let link = LinkParams {
            bandwidth: 100e6,
            noise: 1e-12,
        };
        Self {
            dims: SystemDims::reference(),
            geometry: LinkGeometry::reference(),
            pa: PaParams { p_max: 1.0 },
            p_ua: 0.1,
            p_bs: 10.0,
            links: [link; 3],
            compute: ComputeParams {
                task_bits: 1e6,
                compression: 0.01,
                f_local: 200e6,
                f_edge: 1600e6,
            },
            paths: PathModel::reference(),
            doppler_hz: 70.0,
            csi_delay: 4e-3,
            slot_duration: 1e-3,
            superframes: 1,
            frames: 100,
            slots: 100,
            csi_bits: 8,
            phase_bits: None,
            algorithm: Algorithm::Pcccp,
            trials: 1,
            seed: 0,
            ssca: SscaParams::default(),
            pcccp: PcccpConfig::default(),
        }
    }

    /// Reference scenario at reduced dimensions with 20 trials.
    pub fn desk_scale() -> Self {
        Self {
            dims: SystemDims::desk_scale(),
            trials: 20,
            ..Self::reference()
        }
    }

    /// Every violated invariant, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = validate_dims(&self.dims).iter().map(|v| format!("dims: {v}")).collect();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                out.push(msg.to_string());
            }
        };
        check(self.pa.p_max > 0.0 && self.pa.p_max.is_finite(), "P_max must be positive");
        check(self.p_ua > 0.0 && self.p_ua.is_finite(), "P_UA must be positive");
        check(self.p_bs > 0.0 && self.p_bs.is_finite(), "P_BS must be positive");
        for (name, l) in ["uplink", "downlink", "D2D"].iter().zip(&self.links) {
            if !(l.bandwidth > 0.0 && l.bandwidth.is_finite() && l.noise > 0.0 && l.noise.is_finite()) {
                out.push(format!("{name} bandwidth and noise must be positive"));
            }
        }
        if let Err(e) = self.compute.validate() {
            out.push(e.to_string());
        }
        if let Err(e) = self.paths.profile().validate() {
            out.push(e.to_string());
        }
        if let Some(psi) = self.paths.rician {
            if !(psi > 0.0 && psi.is_finite()) {
                out.push("Rician factor must be positive".into());
            }
        }
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                out.push(msg.to_string());
            }
        };
        check(self.doppler_hz >= 0.0 && self.doppler_hz.is_finite(), "Doppler shift must be non-negative");
        check(self.csi_delay >= 0.0 && self.csi_delay.is_finite(), "CSI delay must be non-negative");
        check(self.slot_duration > 0.0 && self.slot_duration.is_finite(), "slot duration must be positive");
        check(self.superframes >= 1, "super frames must be at least 1");
        check(self.frames >= 1, "frames per super frame must be at least 1");
        check(self.slots >= 1, "slots per frame must be at least 1");
        check(self.csi_bits >= 1, "CSI quantization bits must be at least 1");
        check(self.phase_bits.is_none_or(|b| (1..=32).contains(&b)), "phase bits must be in 1..=32");
        check(self.trials >= 1, "trials must be at least 1");
        check(self.ssca.prox_weight > 0.0 && self.ssca.prox_weight.is_finite(), "proximal weight must be positive");
        if let Err(e) = self.ssca.schedule.validate() {
            out.push(e.to_string());
        }
        if let Err(e) = self.pcccp.validate() {
            out.push(e.to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(invalid(v.join("; ")))
        }
    }

    pub fn noise(&self) -> [f64; 3] {
        [self.links[0].noise, self.links[1].noise, self.links[2].noise]
    }

    /// CSI delay seen by `algorithm`.
    pub fn delay_for(&self, algorithm: Algorithm) -> f64 {
        if algorithm.is_two_timescale() {
            two_timescale_delay(&self.dims, self.csi_delay)
        } else {
            self.csi_delay
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiScheme {
    TwoTimescale,
    SingleTimescale,
}

/// CSI feedback bits per frame.
pub fn csi_overhead(dims: &SystemDims, slots: u64, bits: u64, scheme: CsiScheme) -> Result<u64> {
    if bits == 0 {
        return Err(invalid("CSI quantization needs at least one bit"));
    }
    let (n, na, nb) = (dims.n_bs as u64, dims.n_a as u64, dims.n_b as u64);
    let full = n * nb + na * nb;
    let effective = dims.n_rf as u64 * dims.n_rfb as u64 + dims.n_rfa as u64 * dims.n_rfb as u64;
    Ok(bits
        * match scheme {
            CsiScheme::TwoTimescale => full + slots * effective,
            CsiScheme::SingleTimescale => slots * full,
        })
}

/// Delay of the effective CSI, proportional to its size relative to the full CSI.
pub fn two_timescale_delay(dims: &SystemDims, full_delay: f64) -> f64 {
    (dims.n_rfb * dims.n_rf) as f64 / (dims.n_b * dims.n_bs) as f64 * full_delay
}

/// Per-slot status bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Flags(u8);

impl Flags {
    pub const NONE: Flags = Flags(0);
    /// A penalty-CCCP solve hit its iteration limit.
    pub const NOT_CONVERGED: Flags = Flags(1);
    /// A penalty-CCCP solve returned its starting precoder.
    pub const KEPT_INITIAL: Flags = Flags(2);
    /// Some link had zero rate.
    pub const DEGENERATE: Flags = Flags(4);
    /// The offloading ratio came from the grid search.
    pub const GRID_FALLBACK: Flags = Flags(8);
    /// The slot could not be evaluated.
    pub const FAILED: Flags = Flags(16);

    const NAMES: [(Flags, &'static str); 5] = [
        (Flags::NOT_CONVERGED, "not-converged"),
        (Flags::KEPT_INITIAL, "kept-initial"),
        (Flags::DEGENERATE, "degenerate"),
        (Flags::GRID_FALLBACK, "grid-fallback"),
        (Flags::FAILED, "failed"),
    ];

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, other: Flags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: Flags) {
        self.0 |= other.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl std::ops::BitOr for Flags {
    type Output = Flags;

    fn bitor(self, rhs: Flags) -> Flags {
        Flags(self.0 | rhs.0)
    }
}

/// `none`, or the set names joined by `|`.
impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        let mut first = true;
        for (flag, name) in Flags::NAMES {
            if self.contains(flag) {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

impl FromStr for Flags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(Flags::NONE);
        }
        let mut out = Flags::NONE;
        for part in s.split('|') {
            let (flag, _) = Flags::NAMES
                .iter()
                .find(|(_, name)| *name == part)
                .ok_or_else(|| invalid(format!("unknown flag `{part}`")))?;
            if out.contains(*flag) {
                return Err(invalid(format!("repeated flag `{part}`")));
            }
            out.insert(*flag);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SlotIndex {
    pub trial: usize,
    pub superframe: usize,
    pub frame: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub index: SlotIndex,
    pub algorithm: Algorithm,
    pub rho: f64,
    /// Achieved uplink, downlink and D2D rates (bits/s).
    pub rates: [f64; 3],
    pub total_latency: f64,
    pub case: Option<Case>,
    /// Largest terminal penalty over the three precoder solves.
    pub penalty: f64,
    /// Weighted-MSE objective `tr(ZE) − ln det Z` of each returned precoder on its CSI.
    pub objectives: [f64; 3],
    pub branch: Option<Branch>,
    pub flags: Flags,
}

impl SlotRecord {
    fn failed(index: SlotIndex, algorithm: Algorithm, flags: Flags) -> Self {
        Self {
            index,
            algorithm,
            rho: f64::NAN,
            rates: [f64::NAN; 3],
            total_latency: f64::NAN,
            case: None,
            penalty: f64::NAN,
            objectives: [f64::NAN; 3],
            branch: None,
            flags: flags | Flags::FAILED,
        }
    }

    /// Whether the slot enters aggregates.
    pub fn is_usable(&self) -> bool {
        !self.flags.contains(Flags::FAILED) && !self.flags.contains(Flags::NOT_CONVERGED)
    }

    /// Bits carried by the uplink, downlink and D2D link.
    pub fn transmitted_bits(&self, compute: &ComputeParams) -> [f64; 3] {
        let l = compute.task_bits;
        let a = compute.compression;
        [self.rho * l, self.rho * a * l, (1.0 - self.rho) * a * l]
    }
}

/// Receive analog, channel, transmit analog, budget and streams of link `k`.
fn link_view<'a>(
    k: usize,
    analog: &'a AnalogMatrices,
    ch: &'a ChannelTriple,
    config: &ScenarioConfig,
) -> (&'a ComplexMatrix, &'a ComplexMatrix, &'a ComplexMatrix, f64, usize) {
    let d = &config.dims;
    match k {
        0 => (&analog.bs_rx, &ch.h1, &analog.user_a, config.p_ua, d.d1),
        1 => (&analog.user_b, &ch.h2, &analog.bs_tx, config.p_bs, d.d2),
        _ => (&analog.user_b, &ch.h3, &analog.user_a, config.p_ua, d.d3),
    }
}

/// One slot: precoders designed on `csi`, rates achieved on `channels`.
pub fn run_slot(
    index: SlotIndex,
    analog: &AnalogMatrices,
    csi: &ChannelTriple,
    channels: &ChannelTriple,
    config: &ScenarioConfig,
) -> SlotRecord {
    let mut flags = Flags::NONE;
    match solve_slot(index, analog, csi, channels, config, &mut flags) {
        Ok(r) => r,
        Err(_) => SlotRecord::failed(index, config.algorithm, flags),
    }
}

fn solve_slot(
    index: SlotIndex,
    analog: &AnalogMatrices,
    csi: &ChannelTriple,
    channels: &ChannelTriple,
    config: &ScenarioConfig,
    flags: &mut Flags,
) -> Result<SlotRecord> {
    let algorithm = config.algorithm;
    let mut rates = [0.0; 3];
    let mut objectives = [0.0; 3];
    let mut penalty: f64 = 0.0;
    for k in 0..3 {
        let (rx, h_csi, tx, budget, streams) = link_view(k, analog, csi, config);
        let h = link_view(k, analog, channels, config).1;
        let noise = config.links[k].noise;
        let h_ef = effective_channel(rx, h_csi, tx)?;
        let role = LinkRole {
            tx_analog: tx,
            rx_analog: rx,
            noise,
            budget,
            p_max: config.pa.p_max,
            streams,
        };
        let w = if algorithm == Algorithm::Heuristic {
            waterfilling_heuristic(&h_ef, &role)?
        } else {
            let sol = pcccp_solve(&role, &h_ef, &config.pcccp, None)?;
            if sol.status == SolveStatus::MaxIterations {
                flags.insert(Flags::NOT_CONVERGED);
            }
            if sol.kept_initial {
                flags.insert(Flags::KEPT_INITIAL);
            }
            penalty = penalty.max(sol.penalty);
            sol.w
        };
        rates[k] = link_rate(rx, h, tx, &w, &config.links[k])?;
        objectives[k] = streams as f64 - wmmse_rate_nats(&h_ef, &w, rx, noise)?;
    }
    let coeffs = delay_coeffs(&config.compute, rates)?;
    if coeffs.is_degenerate() {
        flags.insert(Flags::DEGENERATE);
    }
    let choice = if algorithm == Algorithm::BinaryOffload {
        binary_rho(&coeffs)?
    } else {
        optimal_rho(&coeffs)?
    };
    if choice.fallback {
        flags.insert(Flags::GRID_FALLBACK);
    }
    let latency = total_latency(choice.rho, &coeffs)?;
    if !latency.total.is_finite() {
        return Err(Error::Degenerate("no finite-latency offloading ratio".into()));
    }
    Ok(SlotRecord {
        index,
        algorithm,
        rho: choice.rho,
        rates,
        total_latency: latency.total,
        case: Some(latency.case),
        penalty,
        objectives,
        branch: Some(choice.branch),
        flags: *flags,
    })
}

/// Analog update at the end of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrace {
    pub trial: usize,
    pub superframe: usize,
    pub frame: usize,
    /// Weighted capacity of the CSI sample the update used (bits/s/Hz).
    pub sampled_capacity: f64,
    pub weights: Weights,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub records: Vec<SlotRecord>,
    pub frames: Vec<FrameTrace>,
}

impl RunOutput {
    fn extend(&mut self, other: RunOutput) {
        self.records.extend(other.records);
        self.frames.extend(other.frames);
    }
}

/// State carried across the super frames of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialState {
    pub trial: usize,
    pub analog: AnalogSet,
    pub weights: Weights,
}

impl TrialState {
    /// Random initial phases and uniform weights.
    pub fn new(config: &ScenarioConfig, trial: usize) -> Self {
        let mut rng = stream(config, &[trial as u64, Purpose::AnalogInit as u64]).rng();
        Self {
            trial,
            analog: AnalogSet::random(&mut rng, &config.dims),
            weights: Weights::uniform(),
        }
    }
}

fn stream(config: &ScenarioConfig, path: &[u64]) -> RngStream {
    RngStream::derive(config.seed, path)
}

fn applied(analog: &AnalogSet, config: &ScenarioConfig) -> Result<AnalogMatrices> {
    Ok(match config.phase_bits {
        Some(b) => analog.quantized(b)?.matrices(),
        None => analog.matrices(),
    })
}

/// Channel process of one super frame: fresh angles, gains not yet drawn.
pub fn superframe_channels(config: &ScenarioConfig, trial: usize, superframe: usize) -> Result<ChannelProcess> {
    let mut rng = stream(config, &[trial as u64, superframe as u64, Purpose::Angles as u64]).rng();
    ChannelProcess::draw(
        &mut rng,
        &config.dims,
        &config.paths.profile(),
        config.geometry.path_losses()?,
        config.doppler_hz,
    )
}

/// Runs one super frame, updating the trial's analog phases and weights.
pub fn run_superframe(config: &ScenarioConfig, state: &mut TrialState, superframe: usize) -> Result<RunOutput> {
    config.validate()?;
    let trial = state.trial;
    let noise = config.noise();
    let delay = config.delay_for(config.algorithm);
    let mut process = superframe_channels(config, trial, superframe)?;
    let mut surrogate = SurrogateState::new(&config.dims, config.ssca.prox_weight)?;
    let mut bits = [0.0; 3];
    let mut out = RunOutput::default();
    for frame in 0..config.frames {
        let mut rng = stream(config, &[trial as u64, superframe as u64, frame as u64, Purpose::Gains as u64]).rng();
        process.redraw_gains(&mut rng);
        let mut used = applied(&state.analog, config)?;
        for slot in 0..config.slots {
            let measured = process.evolve(slot as f64 * config.slot_duration)?;
            let csi = measured.channels()?;
            let channels = measured.evolve(delay)?.channels()?;
            if !config.algorithm.is_two_timescale() {
                let (next, s, _) =
                    ssca_iterate(&state.analog, &surrogate, &csi, &state.weights, noise, &config.ssca.schedule)?;
                state.analog = next;
                surrogate = s;
                used = applied(&state.analog, config)?;
            }
            let index = SlotIndex {
                trial,
                superframe,
                frame,
                slot,
            };
            let record = run_slot(index, &used, &csi, &channels, config);
            if record.is_usable() {
                for (b, x) in bits.iter_mut().zip(record.transmitted_bits(&config.compute)) {
                    *b += x;
                }
            }
            out.records.push(record);
        }
        if config.algorithm.is_two_timescale() {
            let at = (config.slots as f64 * config.slot_duration - delay).max(0.0);
            let sample = process.evolve(at)?.channels()?;
            let (next, s, g) =
                ssca_iterate(&state.analog, &surrogate, &sample, &state.weights, noise, &config.ssca.schedule)?;
            state.analog = next;
            surrogate = s;
            out.frames.push(FrameTrace {
                trial,
                superframe,
                frame,
                sampled_capacity: g,
                weights: state.weights,
            });
        }
    }
    state.weights = Weights::from_bits(bits);
    Ok(out)
}

pub fn run_trial(config: &ScenarioConfig, trial: usize) -> Result<RunOutput> {
    let mut state = TrialState::new(config, trial);
    let mut out = RunOutput::default();
    for s in 0..config.superframes {
        out.extend(run_superframe(config, &mut state, s)?);
    }
    Ok(out)
}

/// All trials in order.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut out = RunOutput::default();
    for t in 0..config.trials {
        out.extend(run_trial(config, t)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// User A budget (watt).
    PUa,
    /// Distance of the users from the BS along y (meters).
    Dy,
    /// Edge-to-local computing ratio `F_E / F_L`.
    Eta,
    /// Rician factor of the path profile.
    Rician,
    /// Full-CSI feedback delay (seconds).
    CsiDelay,
    /// Analog phase bits; 0 means unquantized.
    PhaseBits,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::PUa,
        SweepAxis::Dy,
        SweepAxis::Eta,
        SweepAxis::Rician,
        SweepAxis::CsiDelay,
        SweepAxis::PhaseBits,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::PUa => "p_ua",
            SweepAxis::Dy => "d_y",
            SweepAxis::Eta => "eta",
            SweepAxis::Rician => "rician",
            SweepAxis::CsiDelay => "csi_delay",
            SweepAxis::PhaseBits => "phase_bits",
        }
    }

    /// `config` with the axis set to `value`.
    pub fn apply(self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        if !value.is_finite() {
            return Err(invalid(format!("sweep value {value} is not finite")));
        }
        let mut c = config.clone();
        match self {
            SweepAxis::PUa => c.p_ua = value,
            SweepAxis::Dy => {
                c.geometry.user_a[1] = value;
                c.geometry.user_b[1] = value;
            }
            SweepAxis::Eta => c.compute.f_edge = value * c.compute.f_local,
            SweepAxis::Rician => c.paths.rician = Some(value),
            SweepAxis::CsiDelay => c.csi_delay = value,
            SweepAxis::PhaseBits => {
                if value < 0.0 || value.fract() != 0.0 || value > 32.0 {
                    return Err(invalid(format!("phase bits must be an integer in 0..=32, got {value}")));
                }
                c.phase_bits = (value > 0.0).then_some(value as u32);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| invalid(format!("unknown sweep axis `{s}`")))
    }
}

/// Aggregate of usable slots; the standard error is taken over per-trial means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean_latency: f64,
    pub stderr_latency: f64,
    pub mean_rho: f64,
    pub usable: usize,
    pub failed: usize,
}

impl Summary {
    pub fn failure_rate(&self) -> f64 {
        let n = self.usable + self.failed;
        if n == 0 {
            0.0
        } else {
            self.failed as f64 / n as f64
        }
    }
}

pub fn summarize(records: &[SlotRecord]) -> Summary {
    let mut per_trial: Vec<(usize, f64, usize)> = Vec::new();
    let (mut sum_t, mut sum_rho, mut usable, mut failed) = (0.0, 0.0, 0, 0);
    for r in records {
        if !r.is_usable() {
            failed += 1;
            continue;
        }
        usable += 1;
        sum_t += r.total_latency;
        sum_rho += r.rho;
        match per_trial.iter_mut().find(|(t, _, _)| *t == r.index.trial) {
            Some(e) => {
                e.1 += r.total_latency;
                e.2 += 1;
            }
            None => per_trial.push((r.index.trial, r.total_latency, 1)),
        }
    }
    let means: Vec<f64> = per_trial.iter().map(|(_, s, n)| s / *n as f64).collect();
    let stderr = if means.len() > 1 {
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        (var / means.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    let n = usable as f64;
    Summary {
        mean_latency: sum_t / n,
        stderr_latency: stderr,
        mean_rho: sum_rho / n,
        usable,
        failed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub algorithm: Algorithm,
    pub summary: Summary,
}

/// One row per `(value, algorithm)`, values in the given order.
pub fn run_sweep(
    config: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    algorithms: &[Algorithm],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len() * algorithms.len());
    for &value in values {
        let base = axis.apply(config, value)?;
        for &algorithm in algorithms {
            let c = ScenarioConfig {
                algorithm,
                ..base.clone()
            };
            let out = run(&c)?;
            rows.push(SweepRow {
                axis,
                value,
                algorithm,
                summary: summarize(&out.records),
            });
        }
    }
    Ok(rows)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("rank correlation needs two equal-length series of at least two points"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(invalid("rank correlation of NaN values"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(invalid("rank correlation of a constant series"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            out[o] = rank;
        }
        i = j + 1;
    }
    out
}

/// Weighted capacity averaged over `samples` fresh gain draws of `process`.
pub fn monte_carlo_capacity(
    analog: &AnalogSet,
    process: &ChannelProcess,
    weights: &Weights,
    noise: [f64; 3],
    samples: usize,
    rng: RngStream,
) -> Result<f64> {
    if samples == 0 {
        return Err(invalid("Monte-Carlo average needs at least one sample"));
    }
    let mut rng = rng.rng();
    let mut p = process.clone();
    let mut sum = 0.0;
    for _ in 0..samples {
        p.redraw_gains(&mut rng);
        sum += weighted_capacity(analog, &p.channels()?, weights, noise)?;
    }
    Ok(sum / samples as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    /// Monte-Carlo weighted capacity at the random initial phases.
    pub initial: f64,
    /// Monte-Carlo weighted capacity after the last update.
    pub last: f64,
    /// Sampled weighted capacity seen by each update.
    pub sampled: Vec<f64>,
    pub analog: AnalogSet,
}

/// `frames` SSCA updates on the first super frame's channel statistics with
/// uniform weights, one fresh CSI sample per update. Both Monte-Carlo
/// estimates use the same `samples` gain draws.
pub fn ssca_learning(config: &ScenarioConfig, trial: usize, frames: usize, samples: usize) -> Result<LearningCurve> {
    config.validate()?;
    let noise = config.noise();
    let weights = Weights::uniform();
    let mut process = superframe_channels(config, trial, 0)?;
    let mut state = TrialState::new(config, trial);
    let mc = stream(config, &[trial as u64, Purpose::Instance as u64]);
    let initial = monte_carlo_capacity(&state.analog, &process, &weights, noise, samples, mc)?;
    let mut surrogate = SurrogateState::new(&config.dims, config.ssca.prox_weight)?;
    let mut sampled = Vec::with_capacity(frames);
    for frame in 0..frames {
        let mut rng = stream(config, &[trial as u64, 0, frame as u64, Purpose::Gains as u64]).rng();
        process.redraw_gains(&mut rng);
        let (next, s, g) = ssca_iterate(
            &state.analog,
            &surrogate,
            &process.channels()?,
            &weights,
            noise,
            &config.ssca.schedule,
        )?;
        state.analog = next;
        surrogate = s;
        sampled.push(g);
    }
    let last = monte_carlo_capacity(&state.analog, &process, &weights, noise, samples, mc)?;
    Ok(LearningCurve {
        initial,
        last,
        sampled,
        analog: state.analog,
    })
}

/// Penalty-CCCP solve of link `link` (0 uplink, 1 downlink, 2 D2D) on the
/// first slot of trial `trial` with the trial's initial analog phases, with
/// block tracking enabled.
pub fn pcccp_convergence(config: &ScenarioConfig, trial: usize, link: usize) -> Result<crate::pcccp::PcccpSolution> {
    config.validate()?;
    if link > 2 {
        return Err(invalid(format!("link index {link} outside 0..=2")));
    }
    let state = TrialState::new(config, trial);
    let mut process = superframe_channels(config, trial, 0)?;
    let mut rng = stream(config, &[trial as u64, 0, 0, Purpose::Gains as u64]).rng();
    process.redraw_gains(&mut rng);
    let ch = process.channels()?;
    let analog = applied(&state.analog, config)?;
    let (rx, h, tx, budget, streams) = link_view(link, &analog, &ch, config);
    let role = LinkRole {
        tx_analog: tx,
        rx_analog: rx,
        noise: config.links[link].noise,
        budget,
        p_max: config.pa.p_max,
        streams,
    };
    let cfg = PcccpConfig {
        track_blocks: true,
        ..config.pcccp
    };
    pcccp_solve(&role, &effective_channel(rx, h, tx)?, &cfg, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            frames: 3,
            slots: 2,
            trials: 1,
            ..ScenarioConfig::desk_scale()
        }
    }

    #[test]
    fn reference_overhead() {
        let d = SystemDims::reference();
        assert_eq!(csi_overhead(&d, 100, 1, CsiScheme::TwoTimescale).unwrap(), 1776);
        assert_eq!(csi_overhead(&d, 100, 1, CsiScheme::SingleTimescale).unwrap(), 57600);
        assert_eq!(csi_overhead(&d, 100, 4, CsiScheme::TwoTimescale).unwrap(), 4 * 1776);
        assert!(csi_overhead(&d, 100, 0, CsiScheme::TwoTimescale).is_err());
    }

    #[test]
    fn single_slot_overhead_structure() {
        let d = SystemDims::reference();
        let full = (64 * 8 + 8 * 8) as u64;
        let eff = (4 * 2 + 2 * 2) as u64;
        assert_eq!(csi_overhead(&d, 1, 3, CsiScheme::TwoTimescale).unwrap(), 3 * (full + eff));
    }

    #[test]
    fn overhead_ratio_linear_in_n() {
        let ratio = |n: usize| {
            let d = SystemDims::new(n, 8, 8, 4, 2, 2);
            let two = csi_overhead(&d, 100, 1, CsiScheme::TwoTimescale).unwrap() as f64;
            let single = csi_overhead(&d, 100, 1, CsiScheme::SingleTimescale).unwrap() as f64;
            single / two
        };
        // ratio = 100(8n + 64) / (8n + 64 + 1200): compare against the closed form
        for n in [16, 64, 256] {
            let nf = n as f64;
            assert!((ratio(n) - 100.0 * (8.0 * nf + 64.0) / (8.0 * nf + 1264.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_timescale_delay_formula() {
        let tau = two_timescale_delay(&SystemDims::reference(), 4e-3);
        assert!((tau - 0.0625e-3).abs() < 1e-18);
    }

    #[test]
    fn flags_round_trip() {
        for bits in 0..32u8 {
            let f = Flags(bits);
            assert_eq!(f.to_string().parse::<Flags>().unwrap(), f);
        }
        assert_eq!(Flags::NONE.to_string(), "none");
        assert_eq!((Flags::DEGENERATE | Flags::FAILED).to_string(), "degenerate|failed");
        assert!("bogus".parse::<Flags>().is_err());
        assert!("failed|failed".parse::<Flags>().is_err());
        assert!("".parse::<Flags>().is_err());
    }

    #[test]
    fn algorithm_labels() {
        for a in Algorithm::ALL {
            assert_eq!(a.label().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("binary-offload".parse::<Algorithm>().unwrap(), Algorithm::BinaryOffload);
        assert!("omp".parse::<Algorithm>().is_err());
    }

    #[test]
    fn config_violations_are_aggregated() {
        let mut c = ScenarioConfig::reference();
        c.p_ua = -1.0;
        c.slots = 0;
        c.dims.n_rf = 100;
        let v = c.violations();
        assert!(v.len() >= 3, "{v:?}");
        assert!(ScenarioConfig::reference().violations().is_empty());
        assert!(ScenarioConfig::desk_scale().violations().is_empty());
    }

    #[test]
    fn zero_channels_are_degenerate() {
        let c = tiny();
        let mut rng = RngStream::new(1, 1).rng();
        let analog = AnalogSet::random(&mut rng, &c.dims).matrices();
        let zero = ChannelTriple::zeros(&c.dims);
        for algorithm in [Algorithm::Pcccp, Algorithm::Heuristic] {
            let cfg = ScenarioConfig { algorithm, ..c.clone() };
            let r = run_slot(SlotIndex::default(), &analog, &zero, &zero, &cfg);
            assert!(r.flags.contains(Flags::DEGENERATE), "{r:?}");
            assert!(r.flags.contains(Flags::FAILED));
            assert!(!r.is_usable());
        }
    }

    #[test]
    fn record_accounting_identity() {
        let c = tiny();
        for algorithm in Algorithm::ALL {
            let out = run(&ScenarioConfig { algorithm, ..c.clone() }).unwrap();
            assert_eq!(out.records.len(), 6);
            for r in &out.records {
                assert!(r.is_usable(), "{r:?}");
                let k = delay_coeffs(&c.compute, r.rates).unwrap();
                let t = total_latency(r.rho, &k).unwrap();
                assert_eq!(t.total, r.total_latency);
                assert_eq!(Some(t.case), r.case);
                if algorithm == Algorithm::BinaryOffload {
                    assert!(r.rho == 0.0 || r.rho == 1.0);
                }
            }
        }
    }

    #[test]
    fn static_channel_ignores_delay() {
        let c = ScenarioConfig {
            doppler_hz: 0.0,
            algorithm: Algorithm::Heuristic,
            ..tiny()
        };
        let a = run(&c).unwrap();
        let b = run(&ScenarioConfig { csi_delay: 7e-3, ..c }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn runs_are_deterministic() {
        let c = ScenarioConfig {
            superframes: 2,
            ..tiny()
        };
        assert_eq!(run(&c).unwrap(), run(&c).unwrap());
        let other = run(&ScenarioConfig { seed: 1, ..c.clone() }).unwrap();
        assert_ne!(run(&c).unwrap().records, other.records);
    }

    #[test]
    fn weights_follow_transmitted_bits() {
        let c = ScenarioConfig {
            superframes: 2,
            algorithm: Algorithm::Heuristic,
            ..tiny()
        };
        let mut state = TrialState::new(&c, 0);
        assert_eq!(state.weights, Weights::uniform());
        let out = run_superframe(&c, &mut state, 0).unwrap();
        let mut bits = [0.0; 3];
        for r in &out.records {
            for (b, x) in bits.iter_mut().zip(r.transmitted_bits(&c.compute)) {
                *b += x;
            }
        }
        let total: f64 = bits.iter().sum();
        for k in 0..3 {
            assert!((state.weights.0[k] - bits[k] / total).abs() < 1e-12);
        }
    }

    #[test]
    fn pcccp_never_worse_than_heuristic_per_slot() {
        let c = ScenarioConfig {
            doppler_hz: 0.0,
            ..tiny()
        };
        let p = run(&c).unwrap();
        let h = run(&ScenarioConfig {
            algorithm: Algorithm::Heuristic,
            ..c.clone()
        })
        .unwrap();
        for (a, b) in p.records.iter().zip(&h.records) {
            assert!(a.total_latency <= b.total_latency + 1e-6, "{a:?} {b:?}");
        }
    }

    #[test]
    fn optimal_offloading_beats_binary_per_slot() {
        let c = tiny();
        let p = run(&c).unwrap();
        let b = run(&ScenarioConfig {
            algorithm: Algorithm::BinaryOffload,
            ..c.clone()
        })
        .unwrap();
        for (x, y) in p.records.iter().zip(&b.records) {
            assert_eq!(x.rates, y.rates);
            assert!(x.total_latency <= y.total_latency);
        }
    }

    #[test]
    fn sweep_emits_one_row_per_value_and_algorithm() {
        let c = ScenarioConfig { frames: 1, ..tiny() };
        let values = [0.01, 0.1];
        let algs = [Algorithm::Heuristic, Algorithm::BinaryOffload];
        let rows = run_sweep(&c, SweepAxis::PUa, &values, &algs).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[1].value, rows[1].algorithm), (0.01, Algorithm::BinaryOffload));
        assert!(SweepAxis::PhaseBits.apply(&c, 2.5).is_err());
        assert_eq!(SweepAxis::PhaseBits.apply(&c, 0.0).unwrap().phase_bits, None);
        assert_eq!(SweepAxis::Eta.apply(&c, 4.0).unwrap().compute.f_edge, 800e6);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]).unwrap(), 1.0);
        // one adjacent swap over five points: 1 − 6·2/(5·24)
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
        assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn summary_excludes_failed_slots() {
        let c = tiny();
        let mut recs = run(&ScenarioConfig {
            algorithm: Algorithm::Heuristic,
            ..c
        })
        .unwrap()
        .records;
        let mean: f64 = recs.iter().map(|r| r.total_latency).sum::<f64>() / recs.len() as f64;
        recs.push(SlotRecord::failed(SlotIndex::default(), Algorithm::Heuristic, Flags::NONE));
        let s = summarize(&recs);
        assert_eq!((s.usable, s.failed), (6, 1));
        assert!((s.mean_latency - mean).abs() < 1e-15);
        assert!((s.failure_rate() - 1.0 / 7.0).abs() < 1e-15);
    }
}
