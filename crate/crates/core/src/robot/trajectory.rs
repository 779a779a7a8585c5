//! Control policies, trajectory frames and the line-delimited trajectory
//! file format (the ingestion path for external trajectories as well).

use serde::{Deserialize, Serialize};

use crate::autodiff::Scalar;
use crate::error::{Error, Result};
use crate::math::{Vec3, V3};

use super::description::PidGains;

/// Per-cable control direction over one policy step, derived from
/// consecutive policy targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    Retract,
    Hold,
    Extend,
}

impl Dir {
    pub fn from_delta(prev: f64, next: f64) -> Dir {
        let d = next - prev;
        if d > 1e-9 {
            Dir::Extend
        } else if d < -1e-9 {
            Dir::Retract
        } else {
            Dir::Hold
        }
    }

    pub fn code(self) -> char {
        match self {
            Dir::Retract => 'r',
            Dir::Hold => 'h',
            Dir::Extend => 'e',
        }
    }

    pub fn from_code(c: char) -> Option<Dir> {
        match c {
            'r' => Some(Dir::Retract),
            'h' => Some(Dir::Hold),
            'e' => Some(Dir::Extend),
            _ => None,
        }
    }
}

/// A list of target cable-length vectors in [0, 1] plus the low-level
/// controller configuration used to chase them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlPolicy {
    pub steps: Vec<[f64; 6]>,
    /// "Target reached" band in normalized units.
    pub tolerance: f64,
    pub gains: PidGains,
    /// Per-step timeout in seconds.
    pub timeout: f64,
}

impl ControlPolicy {
    pub fn new(steps: Vec<[f64; 6]>, tolerance: f64, gains: PidGains, timeout: f64) -> Result<Self> {
        let policy = ControlPolicy { steps, tolerance, gains, timeout };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout > 0.0) {
            return Err(Error::InvalidDescription("policy timeout must be > 0".into()));
        }
        for (i, s) in self.steps.iter().enumerate() {
            for (c, &v) in s.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidDescription(format!(
                        "policy step {i} cable {c}: target {v} outside [0,1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Direction codes of step `idx` given the previous step's targets
    /// (the rest state, all extended, precedes step 0).
    pub fn directions(&self, idx: usize) -> [Dir; 6] {
        let prev = if idx == 0 { [1.0; 6] } else { self.steps[idx - 1] };
        let mut dirs = [Dir::Hold; 6];
        for c in 0..6 {
            dirs[c] = Dir::from_delta(prev[c], self.steps[idx][c]);
        }
        dirs
    }

    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let policy: ControlPolicy = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn save(&self, path: &str) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// One recorded observation.
#[derive(Clone, Copy, Debug)]
pub struct Frame<S> {
    pub t: f64,
    /// Cap centers in order rod0cap0, rod0cap1, rod1cap0, ...
    pub caps: [Vec3<S>; 6],
    /// Nine sensed cable lengths (actuated 0..5, passive 6..8).
    pub lengths: [S; 9],
    /// Active policy step.
    pub step: usize,
    pub dirs: [Dir; 6],
}

impl<S: Scalar> Frame<S> {
    pub fn val(&self) -> Frame<f64> {
        let mut caps = [V3::v(0.0, 0.0, 0.0); 6];
        for (o, c) in caps.iter_mut().zip(self.caps.iter()) {
            *o = c.val();
        }
        let mut lengths = [0.0; 9];
        for (o, l) in lengths.iter_mut().zip(self.lengths.iter()) {
            *o = l.val();
        }
        Frame { t: self.t, caps, lengths, step: self.step, dirs: self.dirs }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrajectoryMeta {
    pub robot_hash: String,
    pub seed: Option<u64>,
    pub dt: f64,
    pub sensor_rate: f64,
    /// A policy step hit its timeout and execution stopped early.
    pub truncated: bool,
}

/// A timestamped sequence of frames.
#[derive(Clone, Debug)]
pub struct Trajectory<S> {
    pub meta: TrajectoryMeta,
    pub frames: Vec<Frame<S>>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn val(&self) -> Trajectory<f64> {
        Trajectory { meta: self.meta.clone(), frames: self.frames.iter().map(Frame::val).collect() }
    }
}

pub const TRAJECTORY_SCHEMA: &str = "tgsim-trajectory v1";

impl Trajectory<f64> {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {TRAJECTORY_SCHEMA}\n"));
        out.push_str(&format!("# robot {}\n", self.meta.robot_hash));
        match self.meta.seed {
            Some(s) => out.push_str(&format!("# seed {s}\n")),
            None => out.push_str("# seed -\n"),
        }
        out.push_str(&format!("# dt {:.9e}\n", self.meta.dt));
        out.push_str(&format!("# sensor_rate {:.9e}\n", self.meta.sensor_rate));
        out.push_str(&format!("# truncated {}\n", self.meta.truncated));
        out.push_str("# columns: t cap0x cap0y cap0z ... cap5z len0..len8 step dirs\n");
        for f in &self.frames {
            out.push_str(&format!("{:.9e}", f.t));
            for c in &f.caps {
                out.push_str(&format!(" {:.9e} {:.9e} {:.9e}", c.x, c.y, c.z));
            }
            for l in &f.lengths {
                out.push_str(&format!(" {:.9e}", l));
            }
            out.push_str(&format!(" {}", f.step));
            out.push(' ');
            for d in &f.dirs {
                out.push(d.code());
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &str) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn from_text(path: &str, text: &str) -> Result<Self> {
        let mut meta = TrajectoryMeta::default();
        let mut frames = Vec::new();
        let mut saw_schema = false;
        for (lineno, line) in text.lines().enumerate() {
            let line_num = lineno + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if rest == TRAJECTORY_SCHEMA {
                    saw_schema = true;
                } else if let Some(v) = rest.strip_prefix("robot ") {
                    meta.robot_hash = v.trim().to_string();
                } else if let Some(v) = rest.strip_prefix("seed ") {
                    let v = v.trim();
                    meta.seed = if v == "-" {
                        None
                    } else {
                        Some(v.parse().map_err(|_| {
                            Error::parse(path, line_num, format!("bad seed: {v}"))
                        })?)
                    };
                } else if let Some(v) = rest.strip_prefix("dt ") {
                    meta.dt = parse_f64(path, line_num, v)?;
                } else if let Some(v) = rest.strip_prefix("sensor_rate ") {
                    meta.sensor_rate = parse_f64(path, line_num, v)?;
                } else if let Some(v) = rest.strip_prefix("truncated ") {
                    meta.truncated = v.trim() == "true";
                }
                continue;
            }
            if !saw_schema {
                return Err(Error::parse(path, line_num, "missing schema header line"));
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 1 + 18 + 9 + 1 + 1 {
                return Err(Error::parse(
                    path,
                    line_num,
                    format!("expected 30 fields, got {}", tokens.len()),
                ));
            }
            let t = parse_f64(path, line_num, tokens[0])?;
            let mut caps = [V3::v(0.0, 0.0, 0.0); 6];
            for (i, cap) in caps.iter_mut().enumerate() {
                cap.x = parse_f64(path, line_num, tokens[1 + 3 * i])?;
                cap.y = parse_f64(path, line_num, tokens[2 + 3 * i])?;
                cap.z = parse_f64(path, line_num, tokens[3 + 3 * i])?;
            }
            let mut lengths = [0.0; 9];
            for (i, l) in lengths.iter_mut().enumerate() {
                *l = parse_f64(path, line_num, tokens[19 + i])?;
            }
            let step: usize = tokens[28]
                .parse()
                .map_err(|_| Error::parse(path, line_num, format!("bad step index: {}", tokens[28])))?;
            let dir_tok = tokens[29];
            if dir_tok.chars().count() != 6 {
                return Err(Error::parse(path, line_num, "direction token must have 6 codes"));
            }
            let mut dirs = [Dir::Hold; 6];
            for (i, ch) in dir_tok.chars().enumerate() {
                dirs[i] = Dir::from_code(ch)
                    .ok_or_else(|| Error::parse(path, line_num, format!("bad direction code '{ch}'")))?;
            }
            if let Some(last) = frames.last() {
                let last: &Frame<f64> = last;
                if t <= last.t {
                    return Err(Error::parse(path, line_num, "timestamps must strictly increase"));
                }
            }
            frames.push(Frame { t, caps, lengths, step, dirs });
        }
        if frames.is_empty() {
            return Err(Error::parse(path, 0, "no frames"));
        }
        Ok(Trajectory { meta, frames })
    }

    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(path, &text)
    }

    /// Adds zero-mean Gaussian noise to the cap positions (observation
    /// noise of the pseudo-real pipeline). Lengths and timing untouched.
    pub fn with_position_noise(&self, sigma: f64, rng: &mut impl rand::Rng) -> Trajectory<f64> {
        use rand_distr_normal::sample_normal;
        let mut out = self.clone();
        for f in &mut out.frames {
            for c in &mut f.caps {
                c.x += sigma * sample_normal(rng);
                c.y += sigma * sample_normal(rng);
                c.z += sigma * sample_normal(rng);
            }
        }
        out
    }

    /// Every `n`-th frame (sampling-rate reduction for invariance tests).
    pub fn subsample(&self, n: usize) -> Trajectory<f64> {
        let mut out = self.clone();
        out.meta.sensor_rate /= n as f64;
        out.frames = self.frames.iter().step_by(n).cloned().collect();
        out
    }
}

/// Box-Muller sampling, enough for observation noise without an extra
/// dependency on a distributions crate.
mod rand_distr_normal {
    pub fn sample_normal(rng: &mut impl rand::Rng) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

fn parse_f64(path: &str, line: usize, tok: &str) -> Result<f64> {
    tok.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad float: {tok}")))
}
