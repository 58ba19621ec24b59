//! Run configuration in a flat `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `scenario` | `static`, `mobile_iid` or `mobile_rw` | `static` |
//! | `n` | primary density | 100 |
//! | `beta` | `m = n^beta` | 2 |
//! | `a_p` | `minimal` or an explicit primary cell area | `minimal` |
//! | `a_p_scale` | multiplier applied to `a_p` | 1 |
//! | `s_rw` | RW-cell area (`mobile_rw` only) | unset |
//! | `queues` | relay queues per pair; default 1 (iid) or `tau` (walk) | auto |
//! | `p` | primary packet probability per source per active slot | 0.1 |
//! | `p_s` | static secondary packet probability per own subframe | 0.5 |
//! | `own_lambda` | mobile secondary packet probability per slot | 0.001 |
//! | `n_split` | relays a primary packet is split across | `ceil(sqrt(m / ln m))` |
//! | `tagged_flows` | static secondary pairs simulated packet by packet | 2000 |
//! | `warmup`, `measure` | window in primary slots | 640, 10000 |
//! | `seed` | master seed | 1 |
//! | `audit`, `trace` | invariant monitors, event trace | true, false |
//! | `relax_preconditions` | accept `a_p` below the occupancy floor | false |
//! | `fixed_count` | exact node counts instead of Poisson | false |
//! | `interference_slots` | slots of interference sampling per run | 0 |
//! | `mobility_trace_slots` | slots of (slot, node, cell) samples kept | 0 |
//! | `alpha`, `n0`, `power` | channel constants | 3, 1, 1 |
//! | `output` | directory for CSV/JSON outputs | unset |

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::minimal_ap;
use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::geometry::FRAME_SLOTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Static,
    MobileIid,
    MobileRw,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Static => "static",
            ScenarioKind::MobileIid => "mobile_iid",
            ScenarioKind::MobileRw => "mobile_rw",
        }
    }

    pub fn is_mobile(&self) -> bool {
        *self != ScenarioKind::Static
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(ScenarioKind::Static),
            "mobile_iid" | "iid" => Ok(ScenarioKind::MobileIid),
            "mobile_rw" | "rw" => Ok(ScenarioKind::MobileRw),
            _ => Err(Error::InvalidParameter(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApRule {
    Minimal,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub n: f64,
    pub beta: f64,
    pub a_p: ApRule,
    pub a_p_scale: f64,
    pub s_rw: Option<f64>,
    pub queues: Option<usize>,
    pub p: f64,
    pub p_s: f64,
    pub own_lambda: f64,
    pub n_split: Option<usize>,
    pub tagged_flows: usize,
    pub warmup: u64,
    pub measure: u64,
    pub seed: u64,
    pub audit: bool,
    pub trace: bool,
    pub relax_preconditions: bool,
    pub fixed_count: bool,
    pub interference_slots: u64,
    pub mobility_trace_slots: u64,
    pub alpha: f64,
    pub n0: f64,
    pub power: f64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Static,
            n: 100.0,
            beta: 2.0,
            a_p: ApRule::Minimal,
            a_p_scale: 1.0,
            s_rw: None,
            queues: None,
            p: 0.1,
            p_s: 0.5,
            own_lambda: 1e-3,
            n_split: None,
            tagged_flows: 2000,
            warmup: 10 * FRAME_SLOTS as u64,
            measure: 10_000,
            seed: 1,
            audit: true,
            trace: false,
            relax_preconditions: false,
            fixed_count: false,
            interference_slots: 0,
            mobility_trace_slots: 0,
            alpha: 3.0,
            n0: 1.0,
            power: 1.0,
            output: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidParameter(format!("`{key}`: cannot parse `{v}`")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidParameter(format!("`{key}`: expected true/false, got `{v}`"))),
    }
}

fn opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v == "auto" || v.is_empty() {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

impl RunConfig {
    /// Parse, apply to defaults and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = v.parse()?,
            "n" => self.n = num(key, v)?,
            "beta" => self.beta = num(key, v)?,
            "a_p" => {
                self.a_p = if v == "minimal" {
                    ApRule::Minimal
                } else {
                    ApRule::Explicit(num(key, v)?)
                }
            }
            "a_p_scale" => self.a_p_scale = num(key, v)?,
            "s_rw" => self.s_rw = opt(key, v)?,
            "queues" => self.queues = opt(key, v)?,
            "p" => self.p = num(key, v)?,
            "p_s" => self.p_s = num(key, v)?,
            "own_lambda" => self.own_lambda = num(key, v)?,
            "n_split" => self.n_split = opt(key, v)?,
            "tagged_flows" => self.tagged_flows = num(key, v)?,
            "warmup" => self.warmup = num(key, v)?,
            "measure" => self.measure = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "audit" => self.audit = flag(key, v)?,
            "trace" => self.trace = flag(key, v)?,
            "relax_preconditions" => self.relax_preconditions = flag(key, v)?,
            "fixed_count" => self.fixed_count = flag(key, v)?,
            "interference_slots" => self.interference_slots = num(key, v)?,
            "mobility_trace_slots" => self.mobility_trace_slots = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "n0" => self.n0 = num(key, v)?,
            "power" => self.power = num(key, v)?,
            "output" => self.output = (!v.is_empty()).then(|| PathBuf::from(v)),
            _ => return Err(Error::InvalidParameter(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Primary cell area requested before grid fitting.
    pub fn target_ap(&self) -> f64 {
        let base = match self.a_p {
            ApRule::Minimal => minimal_ap(self.n, self.beta),
            ApRule::Explicit(a) => a,
        };
        base * self.a_p_scale
    }

    pub fn m(&self) -> f64 {
        self.n.powf(self.beta)
    }

    pub fn channel(&self) -> Result<ChannelParams> {
        ChannelParams::new(self.alpha, self.n0, self.power)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return Err(Error::InvalidParameter(format!("n = {} must be >= 1", self.n)));
        }
        if !(self.beta >= 2.0) {
            return Err(Error::Precondition {
                hypothesis: "beta >= 2",
                detail: format!("beta = {}", self.beta),
            });
        }
        if self.warmup < FRAME_SLOTS as u64 {
            return Err(Error::Config(format!(
                "warmup {} shorter than one {FRAME_SLOTS}-slot frame",
                self.warmup
            )));
        }
        if self.measure == 0 {
            return Err(Error::Config("measure window is empty".into()));
        }
        for (k, v) in [("p", self.p), ("p_s", self.p_s)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!("{k} = {v} outside (0, 1]")));
            }
        }
        if !(self.own_lambda >= 0.0 && self.own_lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("own_lambda = {} outside [0, 1]", self.own_lambda)));
        }
        if !(self.a_p_scale > 0.0) {
            return Err(Error::InvalidParameter("a_p_scale must be positive".into()));
        }
        let a_p = self.target_ap();
        if !(a_p > 0.0 && a_p <= 1.0) {
            return Err(Error::InvalidParameter(format!("a_p = {a_p} outside (0, 1]")));
        }
        let floor = minimal_ap(self.n, self.beta);
        if a_p < floor * (1.0 - 1e-12) && !self.relax_preconditions {
            return Err(Error::Precondition {
                hypothesis: "a_p >= sqrt(2) beta ln n / n",
                detail: format!("a_p = {a_p:.4e} < {floor:.4e}; set relax_preconditions = true to run anyway"),
            });
        }
        if self.scenario == ScenarioKind::MobileRw {
            let s = self.s_rw.ok_or_else(|| Error::Config("mobile_rw needs `s_rw`".into()))?;
            if s < a_p * (1.0 - 1e-9) {
                return Err(Error::Precondition {
                    hypothesis: "S >= a_p",
                    detail: format!("S = {s}, a_p = {a_p}"),
                });
            }
        }
        if self.queues == Some(0) || self.n_split == Some(0) {
            return Err(Error::InvalidParameter("queues and n_split must be positive".into()));
        }
        self.channel()?;
        Ok(())
    }

    /// Serialise back to the text format (round-trips through `parse`).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let o = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let _ = writeln!(s, "scenario = {}", self.scenario.name());
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "beta = {}", self.beta);
        match self.a_p {
            ApRule::Minimal => {
                let _ = writeln!(s, "a_p = minimal");
            }
            ApRule::Explicit(a) => {
                let _ = writeln!(s, "a_p = {a}");
            }
        }
        let _ = writeln!(s, "a_p_scale = {}", self.a_p_scale);
        let _ = writeln!(s, "s_rw = {}", o(self.s_rw.map(|v| v.to_string())));
        let _ = writeln!(s, "queues = {}", o(self.queues.map(|v| v.to_string())));
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "p_s = {}", self.p_s);
        let _ = writeln!(s, "own_lambda = {}", self.own_lambda);
        let _ = writeln!(s, "n_split = {}", o(self.n_split.map(|v| v.to_string())));
        let _ = writeln!(s, "tagged_flows = {}", self.tagged_flows);
        let _ = writeln!(s, "warmup = {}", self.warmup);
        let _ = writeln!(s, "measure = {}", self.measure);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "audit = {}", self.audit);
        let _ = writeln!(s, "trace = {}", self.trace);
        let _ = writeln!(s, "relax_preconditions = {}", self.relax_preconditions);
        let _ = writeln!(s, "fixed_count = {}", self.fixed_count);
        let _ = writeln!(s, "interference_slots = {}", self.interference_slots);
        let _ = writeln!(s, "mobility_trace_slots = {}", self.mobility_trace_slots);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "n0 = {}", self.n0);
        let _ = writeln!(s, "power = {}", self.power);
        if let Some(p) = &self.output {
            let _ = writeln!(s, "output = {}", p.display());
        }
        s
    }
}
