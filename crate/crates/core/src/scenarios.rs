//! Reference signals: synthetic sine/step/multi-event waves and recorded
//! track traces.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::model::SpecificForce;

type Result<T> = std::result::Result<T, ScenarioError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScenarioKind {
    Sine,
    Step,
    MultiEvent,
    Trace,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Sine => "sine",
            ScenarioKind::Step => "step",
            ScenarioKind::MultiEvent => "multi-event",
            ScenarioKind::Trace => "trace",
        }
    }
}

/// Which specific-force channel(s) receive the signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisRouting {
    Long,
    Lat,
    Both,
}

impl AxisRouting {
    pub fn name(self) -> &'static str {
        match self {
            AxisRouting::Long => "long",
            AxisRouting::Lat => "lat",
            AxisRouting::Both => "both",
        }
    }

    fn route(self, v: f64) -> SpecificForce {
        match self {
            AxisRouting::Long => SpecificForce::new(v, 0.0),
            AxisRouting::Lat => SpecificForce::new(0.0, v),
            AxisRouting::Both => SpecificForce::new(v, v),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// m/s².
    #[serde(default)]
    pub amplitude: f64,
    /// Hz, sine part only.
    #[serde(default)]
    pub frequency: f64,
    /// s.
    #[serde(default)]
    pub duration: f64,
    pub axis: AxisRouting,
    /// Start of the step, s.
    #[serde(default = "default_onset")]
    pub onset: f64,
    /// Step length, s. The step returns to zero afterwards (STEP) or hands
    /// over to the sine (MULTI_EVENT).
    #[serde(default = "default_hold")]
    pub hold: f64,
    /// CSV file for TRACE scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// Gain and saturation applied to a trace.
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default = "default_sat")]
    pub saturation: f64,
}

fn default_onset() -> f64 {
    1.0
}

fn default_hold() -> f64 {
    5.0
}

fn default_gain() -> f64 {
    0.4
}

fn default_sat() -> f64 {
    5.0
}

impl Scenario {
    pub fn synthetic(
        kind: ScenarioKind,
        amplitude: f64,
        frequency: f64,
        duration: f64,
        axis: AxisRouting,
    ) -> Self {
        Self {
            kind,
            amplitude,
            frequency,
            duration,
            axis,
            onset: default_onset(),
            hold: default_hold(),
            trace: None,
            gain: default_gain(),
            saturation: default_sat(),
        }
    }

    pub fn trace(path: impl Into<PathBuf>, axis: AxisRouting) -> Self {
        Self {
            trace: Some(path.into()),
            ..Self::synthetic(ScenarioKind::Trace, 1.0, 1.0, 1.0, axis)
        }
    }

    /// Short identifier, stable across runs.
    pub fn name(&self) -> String {
        match self.kind {
            ScenarioKind::Trace => {
                let stem = self
                    .trace
                    .as_deref()
                    .and_then(Path::file_stem)
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                format!("trace-{stem}")
            }
            ScenarioKind::Step => format!("step-a{}-{}", self.amplitude, self.axis.name()),
            kind => format!(
                "{}-a{}-f{}-{}",
                kind.name(),
                self.amplitude,
                self.frequency,
                self.axis.name()
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ScenarioKind::Trace {
            if self.trace.is_none() {
                return Err(ScenarioError::Invalid(
                    "trace scenario without a file".into(),
                ));
            }
            if !(self.gain.is_finite() && self.gain >= 0.0 && self.saturation > 0.0) {
                return Err(ScenarioError::Invalid(format!(
                    "gain {} / saturation {} out of range",
                    self.gain, self.saturation
                )));
            }
            return Ok(());
        }
        for (name, v) in [
            ("amplitude", self.amplitude),
            ("frequency", self.frequency),
            ("duration", self.duration),
        ] {
            if name == "frequency" && self.kind == ScenarioKind::Step {
                continue;
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(ScenarioError::Invalid(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.onset.is_finite()
            && self.onset >= 0.0
            && self.hold.is_finite()
            && self.hold >= 0.0)
        {
            return Err(ScenarioError::Invalid("onset and hold must be >= 0".into()));
        }
        Ok(())
    }

    /// Scalar signal of a synthetic scenario at time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let a = self.amplitude;
        let sine = |t0: f64| a * (std::f64::consts::TAU * self.frequency * (t - t0)).sin();
        let end = self.onset + self.hold;
        match self.kind {
            ScenarioKind::Sine => sine(0.0),
            ScenarioKind::Step if t >= self.onset && t < end => a,
            ScenarioKind::Step => 0.0,
            ScenarioKind::MultiEvent if t < self.onset => 0.0,
            ScenarioKind::MultiEvent if t < end => a,
            ScenarioKind::MultiEvent => sine(end),
            ScenarioKind::Trace => 0.0,
        }
    }
}

/// Number of `dt` steps in `duration`; errors when `dt` does not divide it.
fn steps(duration: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ScenarioError::Grid(format!("dt must be > 0, got {dt}")));
    }
    let n = (duration / dt).round();
    if n < 1.0 || (n * dt - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(ScenarioError::Grid(format!(
            "dt {dt} does not divide duration {duration}"
        )));
    }
    Ok(n as usize)
}

/// Samples at `t = k·dt`, `k = 0..=duration/dt`.
pub fn generate_reference(sc: &Scenario, dt: f64) -> Result<Vec<SpecificForce>> {
    sc.validate()?;
    if sc.kind == ScenarioKind::Trace {
        let path = sc.trace.as_deref().unwrap();
        let tr = scale_reference(&load_trace(path, dt)?, sc.gain, sc.saturation);
        return Ok(tr.forces(sc.axis));
    }
    let n = steps(sc.duration, dt)?;
    Ok((0..=n)
        .map(|k| sc.axis.route(sc.value_at(k as f64 * dt)))
        .collect())
}

/// Uniformly sampled recorded accelerations.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackTrace {
    pub dt: f64,
    pub t: Vec<f64>,
    pub a_long: Vec<f64>,
    pub a_lat: Vec<f64>,
}

impl TrackTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0) - self.t.first().copied().unwrap_or(0.0)
    }

    /// Specific-force samples. `Long`/`Lat` keep only that channel.
    pub fn forces(&self, routing: AxisRouting) -> Vec<SpecificForce> {
        self.a_long
            .iter()
            .zip(&self.a_lat)
            .map(|(&l, &t)| match routing {
                AxisRouting::Both => SpecificForce::new(l, t),
                AxisRouting::Long => SpecificForce::new(l, 0.0),
                AxisRouting::Lat => SpecificForce::new(0.0, t),
            })
            .collect()
    }
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    t: f64,
    a_long: f64,
    a_lat: f64,
}

fn interp(t: &[f64], v: &[f64], at: f64) -> f64 {
    let i = t.partition_point(|x| *x <= at).clamp(1, t.len() - 1);
    let (t0, t1) = (t[i - 1], t[i]);
    let w = ((at - t0) / (t1 - t0)).clamp(0.0, 1.0);
    v[i - 1] + w * (v[i] - v[i - 1])
}

/// Reads a `t,a_long,a_lat` CSV and resamples it to `dt`.
pub fn load_trace(path: &Path, dt: f64) -> Result<TrackTrace> {
    let io = |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let parse = |line: usize, msg: String| ScenarioError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = rd.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["t", "a_long", "a_lat"] {
        return Err(parse(
            1,
            format!(
                "expected header t,a_long,a_lat, got {:?}",
                header.as_slice()
            ),
        ));
    }

    let (mut t, mut a_long, mut a_lat) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rd.deserialize::<TraceRow>() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse(line, e.to_string())
        })?;
        let line = t.len() + 2;
        if ![row.t, row.a_long, row.a_lat].iter().all(|v| v.is_finite()) {
            return Err(parse(line, "non-finite value".into()));
        }
        if let Some(&prev) = t.last() {
            if row.t <= prev {
                return Err(parse(
                    line,
                    format!("time {} does not increase (previous {prev})", row.t),
                ));
            }
        }
        t.push(row.t);
        a_long.push(row.a_long);
        a_lat.push(row.a_lat);
    }
    if t.is_empty() {
        return Err(ScenarioError::Empty(path.to_path_buf()));
    }
    if t.len() == 1 {
        return Ok(TrackTrace {
            dt,
            t,
            a_long,
            a_lat,
        });
    }

    let uniform = t.windows(2).all(|w| (w[1] - w[0] - dt).abs() <= 1e-6);
    if uniform {
        let t0 = t[0];
        let t = (0..t.len()).map(|k| t0 + k as f64 * dt).collect();
        return Ok(TrackTrace {
            dt,
            t,
            a_long,
            a_lat,
        });
    }
    let span = t[t.len() - 1] - t[0];
    let n = (span / dt + 1e-9).floor() as usize;
    if t.windows(2)
        .any(|w| (w[1] - w[0] - (t[1] - t[0])).abs() > 1e-6)
    {
        log::warn!(
            "{}: non-uniform time step, resampling to {dt} s",
            path.display()
        );
    }
    let grid: Vec<f64> = (0..=n).map(|k| t[0] + k as f64 * dt).collect();
    Ok(TrackTrace {
        dt,
        a_long: grid.iter().map(|&g| interp(&t, &a_long, g)).collect(),
        a_lat: grid.iter().map(|&g| interp(&t, &a_lat, g)).collect(),
        t: grid,
    })
}

/// Gain, then symmetric saturation at `±sat`.
pub fn scale_reference(tr: &TrackTrace, gain: f64, sat: f64) -> TrackTrace {
    let f = |v: &f64| (gain * v).clamp(-sat, sat);
    TrackTrace {
        dt: tr.dt,
        t: tr.t.clone(),
        a_long: tr.a_long.iter().map(f).collect(),
        a_lat: tr.a_lat.iter().map(f).collect(),
    }
}

/// Product grid of synthetic scenarios. STEP ignores the frequency, so it
/// contributes one scenario per amplitude and routing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGrid {
    pub kinds: Vec<ScenarioKind>,
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub axes: Vec<AxisRouting>,
    pub duration: f64,
    pub onset: f64,
    pub hold: f64,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        Self {
            kinds: vec![
                ScenarioKind::Sine,
                ScenarioKind::Step,
                ScenarioKind::MultiEvent,
            ],
            amplitudes: vec![0.5, 1.0, 2.0],
            frequencies: vec![0.1, 0.2, 0.4, 0.8],
            axes: vec![AxisRouting::Long, AxisRouting::Lat, AxisRouting::Both],
            duration: 20.0,
            onset: default_onset(),
            hold: default_hold(),
        }
    }
}

impl ScenarioGrid {
    pub fn expand(&self) -> Result<Vec<Scenario>> {
        if self.kinds.contains(&ScenarioKind::Trace) {
            return Err(ScenarioError::Invalid("TRACE is not a grid kind".into()));
        }
        let mut out = Vec::new();
        for &kind in &self.kinds {
            for &amplitude in &self.amplitudes {
                let freqs: &[f64] = if kind == ScenarioKind::Step {
                    &self.frequencies[..self.frequencies.len().min(1)]
                } else {
                    &self.frequencies
                };
                for &frequency in freqs {
                    for &axis in &self.axes {
                        let mut sc =
                            Scenario::synthetic(kind, amplitude, frequency, self.duration, axis);
                        sc.onset = self.onset;
                        sc.hold = self.hold;
                        sc.validate()?;
                        out.push(sc);
                    }
                }
            }
        }
        Ok(out)
    }
}
