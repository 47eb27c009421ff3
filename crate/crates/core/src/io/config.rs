use std::path::Path;

use crate::error::{Error, Result};
use crate::gp::{KernelKind, N_HYPER};
use crate::spatial::{CarConfig, CouplingMode};
use crate::volume::{ModelSpec, ScoreMap};

/// Settings read from a `key=value` run file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub spec: ModelSpec,
    pub score_map: ScoreMap,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spec: ModelSpec::new(KernelKind::SquaredExponential),
            score_map: ScoreMap::unit(),
        }
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("line {line}: `{value}` is not a valid value for {key}")))
}

impl RunConfig {
    /// Parse `key=value` lines; blank lines and `#` comments are skipped and
    /// unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut rho = cfg.spec.car.rho();
        let mut t = cfg.spec.car.t();
        let (mut lo, mut hi) = (cfg.score_map.raw_min, cfg.score_map.raw_max);
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {line}: expected key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(Error::invalid(format!("line {line}: duplicate key {key}")));
            }
            seen.push(key);
            let gp = &mut cfg.spec.gp;
            let car = &mut cfg.spec.car;
            match key {
                "kernel" => gp.kind = value.parse()?,
                "rho1" | "rho2" | "rho3" => rho[key.as_bytes()[3] as usize - b'1' as usize] = number(key, value, line)?,
                "t1" | "t2" | "t3" => t[key.as_bytes()[1] as usize - b'1' as usize] = number(key, value, line)?,
                "sweeps" => car.sweeps = number(key, value, line)?,
                "seed" => car.seed = number(key, value, line)?,
                "jitter" => gp.jitter = number(key, value, line)?,
                "coupling" => {
                    car.coupling = match value {
                        "diagonal" => CouplingMode::Diagonal,
                        "fullrow" => CouplingMode::FullRowConstant,
                        _ => return Err(Error::invalid(format!("line {line}: unknown coupling `{value}`"))),
                    }
                }
                "mean" => gp.prior_mean = number(key, value, line)?,
                "opt_max_iter" => gp.optimizer.max_iter = number(key, value, line)?,
                "opt_tol" => gp.optimizer.grad_tol = number(key, value, line)?,
                "score_min" => lo = number(key, value, line)?,
                "score_max" => hi = number(key, value, line)?,
                _ => return Err(Error::invalid(format!("line {line}: unknown key `{key}`"))),
            }
        }
        let gp = &cfg.spec.gp;
        if !(gp.jitter.is_finite() && gp.jitter >= 0.0) {
            return Err(Error::invalid("jitter must be finite and nonnegative"));
        }
        if !gp.prior_mean.is_finite() || !(gp.optimizer.grad_tol.is_finite() && gp.optimizer.grad_tol > 0.0) {
            return Err(Error::invalid("mean and opt_tol must be finite, opt_tol positive"));
        }
        let car = cfg.spec.car;
        cfg.spec.car = CarConfig::new(rho, t)?
            .with_sweeps(car.sweeps)
            .with_seed(car.seed)
            .with_coupling(car.coupling)
            .with_schedule(car.schedule);
        cfg.score_map = ScoreMap::new(lo, hi)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form accepted by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let gp = &self.spec.gp;
        let car = &self.spec.car;
        let mut out = format!("kernel={}\n", gp.kind);
        for c in 0..N_HYPER {
            out += &format!("rho{}={}\n", c + 1, car.rho()[c]);
        }
        for c in 0..N_HYPER {
            out += &format!("t{}={}\n", c + 1, car.t()[c]);
        }
        let coupling = match car.coupling {
            CouplingMode::Diagonal => "diagonal",
            CouplingMode::FullRowConstant => "fullrow",
        };
        out += &format!(
            "sweeps={}\nseed={}\njitter={}\ncoupling={coupling}\nmean={}\nopt_max_iter={}\nopt_tol={}\nscore_min={}\nscore_max={}\n",
            car.sweeps,
            car.seed,
            gp.jitter,
            gp.prior_mean,
            gp.optimizer.max_iter,
            gp.optimizer.grad_tol,
            self.score_map.raw_min,
            self.score_map.raw_max
        );
        out
    }
}
