//! Plain-text network descriptions and experiment configs.
//!
//! A network file holds one stanza per line:
//!
//! ```text
//! node 1
//! noise 1 num=[1] den=[1] lambda=0.1
//! edge 2 1 num=[0.32] den=[1,-0.6] delay=1   # G_12, from w2 into w1
//! excite 1 white power=0.1
//! ```
//!
//! An experiment config is a network description followed by an
//! `[experiment]` stanza of `key = value` lines and keyword lines:
//!
//! ```text
//! [experiment]
//! N = 10000
//! runs = 100
//! target output=2 input=1
//! setup full predictors=[1,3,4] orders=[1:1:1,1:0:2,1:0:1] noise=0:0
//! sweep edge=4,2 gains=[0.005,0.05,0.5,1]
//! ```

use std::fmt::Write as _;

use netvar_core::transfer::{key_values, parse_list};
use netvar_core::{Excitation, InputOrders, NetworkModel, NoiseShape, RationalTransfer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SetupConfig {
    pub name: String,
    /// Predictor node ids in the order listed; `orders` is aligned with it.
    pub predictors: Vec<usize>,
    /// `None` derives orders from the true (possibly lumped) transfers.
    pub orders: Option<Vec<InputOrders>>,
    pub nc: usize,
    pub nd: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub from: usize,
    pub to: usize,
    /// Target static gains of `G_{to,from}`.
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub network: NetworkModel,
    /// `(j, k)`: identify `G_jk`.
    pub target: Option<(usize, usize)>,
    pub setups: Vec<SetupConfig>,
    pub n_samples: usize,
    pub sample_time: f64,
    pub burn_in: usize,
    pub runs: usize,
    pub seed: u64,
    pub grid: usize,
    pub workers: usize,
    pub restarts: usize,
    pub sweep: Option<Sweep>,
    /// File name prefix of the sample-covariance comparison CSVs.
    pub sample_prefix: String,
    /// File name prefix of the condition CSVs.
    pub condition_prefix: String,
}

impl ExperimentConfig {
    pub fn new(network: NetworkModel) -> Self {
        ExperimentConfig {
            network,
            target: None,
            setups: Vec::new(),
            n_samples: 10_000,
            sample_time: 1.0,
            burn_in: netvar_core::network::DEFAULT_BURN_IN,
            runs: 100,
            seed: 0,
            grid: netvar_core::grid::DEFAULT_GRID_POINTS,
            workers: 1,
            restarts: 5,
            sweep: None,
            sample_prefix: "sample_cov".into(),
            condition_prefix: "condition".into(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut net_lines = Vec::new();
        let mut exp_lines = Vec::new();
        let mut in_experiment = false;
        for (no, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            if line == "[experiment]" {
                if in_experiment {
                    return Err(cfg_err(no + 1, "duplicate [experiment] stanza"));
                }
                in_experiment = true;
            } else if in_experiment {
                exp_lines.push((no + 1, line));
            } else {
                net_lines.push((no + 1, line));
            }
        }
        let mut cfg = ExperimentConfig::new(network_from_lines(&net_lines)?);
        for (no, line) in exp_lines {
            cfg.apply_line(no, line)?;
        }
        cfg.check().map_err(|e| match e {
            Error::Invalid(msg) => cfg_err(0, &msg),
            other => other,
        })?;
        Ok(cfg)
    }

    fn apply_line(&mut self, no: usize, line: &str) -> Result<()> {
        let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        if let Some(value) = rest.strip_prefix('=') {
            let v = value.trim();
            let bad = |_| cfg_err(no, &format!("bad value `{v}` for {word}"));
            match word {
                "N" => self.n_samples = v.parse().map_err(bad)?,
                "Ts" => self.sample_time = v.parse().map_err(|_| cfg_err(no, &format!("bad Ts `{v}`")))?,
                "burn_in" => self.burn_in = v.parse().map_err(bad)?,
                "runs" => self.runs = v.parse().map_err(bad)?,
                "seed" => self.seed = v.parse().map_err(|_| cfg_err(no, &format!("bad seed `{v}`")))?,
                "grid" => self.grid = v.parse().map_err(bad)?,
                "workers" => self.workers = v.parse().map_err(bad)?,
                "restarts" => self.restarts = v.parse().map_err(bad)?,
                "sample_prefix" => self.sample_prefix = v.to_string(),
                "condition_prefix" => self.condition_prefix = v.to_string(),
                _ => return Err(cfg_err(no, &format!("unknown key `{word}`"))),
            }
            return Ok(());
        }
        let kv = || key_values(rest).map_err(|e| cfg_err(no, &e.to_string()));
        match word {
            "target" => {
                let kv = kv()?;
                let output = required(&kv, "output", no)?;
                let input = required(&kv, "input", no)?;
                self.target = Some((parse_id(&output, no)?, parse_id(&input, no)?));
            }
            "setup" => {
                // `setup <name> key=value ...`
                let (name, tail) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                if name.is_empty() || name.contains('=') {
                    return Err(cfg_err(no, "setup needs a name"));
                }
                let kv = key_values(tail).map_err(|e| cfg_err(no, &e.to_string()))?;
                self.setups.push(parse_setup(name, &kv, no)?);
            }
            "sweep" => {
                let kv = kv()?;
                let edge = required(&kv, "edge", no)?;
                let (from, to) = edge
                    .split_once(',')
                    .ok_or_else(|| cfg_err(no, "sweep edge must be `from,to`"))?;
                let gains = parse_list(&required(&kv, "gains", no)?).map_err(|e| cfg_err(no, &e.to_string()))?;
                self.sweep = Some(Sweep { from: parse_id(from, no)?, to: parse_id(to, no)?, gains });
            }
            _ => return Err(cfg_err(no, &format!("unknown experiment entry `{word}`"))),
        }
        Ok(())
    }

    /// Invariant checks shared by parsing and programmatic construction.
    pub fn check(&self) -> Result<()> {
        let l = self.network.node_count();
        let invalid = |m: String| Err(Error::Invalid(m));
        if self.runs == 0 {
            return invalid("runs must be at least 1".into());
        }
        if self.n_samples == 0 || self.grid == 0 {
            return invalid("N and grid must be positive".into());
        }
        if !(self.sample_time > 0.0) {
            return invalid("Ts must be positive".into());
        }
        if let Some((j, k)) = self.target {
            if self.network.module(j, k).is_none() {
                return invalid(format!("target module G_{j}{k} does not exist"));
            }
        }
        if !self.setups.is_empty() && self.target.is_none() {
            return invalid("setups require a target".into());
        }
        for s in &self.setups {
            if s.predictors.iter().any(|&p| p == 0 || p > l) {
                return invalid(format!("setup {}: predictor out of range", s.name));
            }
            if let Some(o) = &s.orders {
                if o.len() != s.predictors.len() {
                    return invalid(format!("setup {}: {} orders for {} predictors", s.name, o.len(), s.predictors.len()));
                }
            }
        }
        for (i, a) in self.setups.iter().enumerate() {
            if self.setups[..i].iter().any(|b| b.name == a.name) {
                return invalid(format!("duplicate setup name {}", a.name));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.gains.is_empty() {
                return invalid("sweep gains must be nonempty".into());
            }
            if self.network.module(sw.to, sw.from).is_none() {
                return invalid(format!("sweep edge {},{} does not exist", sw.from, sw.to));
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = network_to_text(&self.network);
        s.push_str("\n[experiment]\n");
        let _ = writeln!(s, "N = {}", self.n_samples);
        let _ = writeln!(s, "Ts = {}", self.sample_time);
        let _ = writeln!(s, "burn_in = {}", self.burn_in);
        let _ = writeln!(s, "runs = {}", self.runs);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "grid = {}", self.grid);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "restarts = {}", self.restarts);
        let _ = writeln!(s, "sample_prefix = {}", self.sample_prefix);
        let _ = writeln!(s, "condition_prefix = {}", self.condition_prefix);
        if let Some((j, k)) = self.target {
            let _ = writeln!(s, "target output={j} input={k}");
        }
        for su in &self.setups {
            let _ = write!(s, "setup {} predictors=[{}]", su.name, join(su.predictors.iter()));
            if let Some(o) = &su.orders {
                let items: Vec<String> = o.iter().map(|o| format!("{}:{}:{}", o.nb, o.nf, o.delay)).collect();
                let _ = write!(s, " orders=[{}]", items.join(","));
            }
            let _ = writeln!(s, " noise={}:{}", su.nc, su.nd);
        }
        if let Some(sw) = &self.sweep {
            let _ = writeln!(s, "sweep edge={},{} gains=[{}]", sw.from, sw.to, join(sw.gains.iter()));
        }
        s
    }

    /// The network with the swept edge rescaled to static gain `gain`.
    pub fn network_at(&self, gain: Option<f64>) -> Result<NetworkModel> {
        let (Some(g), Some(sw)) = (gain, &self.sweep) else {
            return Ok(self.network.clone());
        };
        let tf = self
            .network
            .module(sw.to, sw.from)
            .ok_or_else(|| Error::Invalid(format!("sweep edge {},{} does not exist", sw.from, sw.to)))?;
        let dc = tf.dc_gain()?;
        if dc == 0.0 || !dc.is_finite() {
            return Err(Error::Invalid(format!("swept edge has static gain {dc}")));
        }
        let mut m = self.network.clone();
        m.set_module(sw.to, sw.from, tf.scale(g / dc))?;
        Ok(m)
    }
}

fn join<T: std::fmt::Display>(it: impl Iterator<Item = T>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn cfg_err(line: usize, msg: &str) -> Error {
    Error::Config { line, msg: msg.to_string() }
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn parse_id(s: &str, no: usize) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(cfg_err(no, &format!("bad node id `{s}`"))),
    }
}

fn lookup<'a>(kv: &'a [(String, String)], key: &str) -> Option<&'a str> {
    kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn required(kv: &[(String, String)], key: &str, no: usize) -> Result<String> {
    lookup(kv, key)
        .map(str::to_string)
        .ok_or_else(|| cfg_err(no, &format!("missing `{key}=`")))
}

fn check_keys(kv: &[(String, String)], allowed: &[&str], no: usize) -> Result<()> {
    for (k, _) in kv {
        if !allowed.contains(&k.as_str()) {
            return Err(cfg_err(no, &format!("unknown key `{k}`")));
        }
    }
    Ok(())
}

fn parse_setup(name: &str, kv: &[(String, String)], no: usize) -> Result<SetupConfig> {
    check_keys(kv, &["predictors", "orders", "noise"], no)?;
    let preds = required(kv, "predictors", no)?;
    let inner = preds
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| cfg_err(no, "predictors must be a [..] list"))?;
    let predictors = inner
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_id(s, no))
        .collect::<Result<Vec<_>>>()?;
    let orders = match lookup(kv, "orders") {
        None => None,
        Some(o) => {
            let inner = o
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| cfg_err(no, "orders must be a [..] list"))?;
            Some(
                inner
                    .split(',')
                    .map(|item| {
                        let f = parse_counts(item, 3, no)?;
                        Ok(InputOrders::new(f[0], f[1], f[2]))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        }
    };
    let (nc, nd) = match lookup(kv, "noise") {
        None => (0, 0),
        Some(n) => {
            let f = parse_counts(n, 2, no)?;
            (f[0], f[1])
        }
    };
    Ok(SetupConfig { name: name.to_string(), predictors, orders, nc, nd })
}

fn parse_counts(s: &str, count: usize, no: usize) -> Result<Vec<usize>> {
    let f: Vec<usize> = s
        .trim()
        .split(':')
        .map(|v| v.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| cfg_err(no, &format!("bad order spec `{s}`")))?;
    if f.len() != count {
        return Err(cfg_err(no, &format!("order spec `{s}` needs {count} fields")));
    }
    Ok(f)
}

/// Parses a network description (no `[experiment]` stanza).
pub fn parse_network(text: &str) -> Result<NetworkModel> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l)))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    network_from_lines(&lines)
}

fn network_from_lines(lines: &[(usize, &str)]) -> Result<NetworkModel> {
    let mut nodes = Vec::new();
    for &(no, line) in lines {
        let mut it = line.split_whitespace();
        if it.next() == Some("node") {
            let id = parse_id(it.next().unwrap_or(""), no)?;
            if it.next().is_some() {
                return Err(cfg_err(no, "trailing tokens after node id"));
            }
            if nodes.contains(&id) {
                return Err(cfg_err(no, &format!("node {id} declared twice")));
            }
            nodes.push(id);
        }
    }
    let l = nodes.len();
    if l == 0 {
        return Err(cfg_err(0, "no nodes declared"));
    }
    if nodes.iter().any(|&n| n > l) {
        return Err(cfg_err(0, &format!("node ids must be 1..={l}")));
    }
    let mut model = NetworkModel::new(l);
    let node = |s: Option<&str>, no: usize| -> Result<usize> {
        let id = parse_id(s.unwrap_or(""), no)?;
        if id > l {
            return Err(cfg_err(no, &format!("undeclared node {id}")));
        }
        Ok(id)
    };
    let core = |no: usize| move |e: netvar_core::Error| cfg_err(no, &e.to_string());
    let mut seen_edges = Vec::new();
    for &(no, line) in lines {
        let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match word {
            "node" => {}
            "noise" => {
                let (id, tail) = split_ids(rest, 1);
                let id = node(id.first().copied(), no)?;
                let kv = key_values(tail).map_err(core(no))?;
                check_keys(&kv, &["num", "den", "lambda"], no)?;
                let num = lookup(&kv, "num").map(parse_list).transpose().map_err(core(no))?;
                let den = lookup(&kv, "den").map(parse_list).transpose().map_err(core(no))?;
                let lambda: f64 = required(&kv, "lambda", no)?
                    .parse()
                    .map_err(|_| cfg_err(no, "bad lambda"))?;
                let shaper = RationalTransfer::new(num.unwrap_or(vec![1.0]), den.unwrap_or(vec![1.0]), 0).map_err(core(no))?;
                model
                    .set_noise(id, NoiseShape::new(shaper, lambda).map_err(core(no))?)
                    .map_err(core(no))?;
            }
            "edge" => {
                let (ids, tail) = split_ids(rest, 2);
                if ids.len() != 2 {
                    return Err(cfg_err(no, "edge needs `<from> <to>`"));
                }
                let from = node(Some(ids[0]), no)?;
                let to = node(Some(ids[1]), no)?;
                if seen_edges.contains(&(from, to)) {
                    return Err(cfg_err(no, &format!("edge {from} {to} declared twice")));
                }
                seen_edges.push((from, to));
                let kv = key_values(tail).map_err(core(no))?;
                check_keys(&kv, &["num", "den", "delay"], no)?;
                let num = parse_list(&required(&kv, "num", no)?).map_err(core(no))?;
                let den = lookup(&kv, "den").map(parse_list).transpose().map_err(core(no))?;
                let delay = match lookup(&kv, "delay") {
                    Some(d) => d.parse().map_err(|_| cfg_err(no, "bad delay"))?,
                    None => 0,
                };
                let tf = RationalTransfer::new(num, den.unwrap_or(vec![1.0]), delay).map_err(core(no))?;
                model.set_module(to, from, tf).map_err(core(no))?;
            }
            "excite" => {
                let mut it = rest.split_whitespace();
                let id = node(it.next(), no)?;
                let exc = match it.next() {
                    Some("none") => Excitation::None,
                    Some("white") => {
                        let kv = key_values(&it.collect::<Vec<_>>().join(" ")).map_err(core(no))?;
                        check_keys(&kv, &["power"], no)?;
                        let power: f64 = required(&kv, "power", no)?
                            .parse()
                            .map_err(|_| cfg_err(no, "bad power"))?;
                        if !(power >= 0.0) {
                            return Err(cfg_err(no, "power must be nonnegative"));
                        }
                        Excitation::White { power }
                    }
                    _ => return Err(cfg_err(no, "excite needs `white power=<v>` or `none`")),
                };
                model.set_excitation(id, exc).map_err(core(no))?;
            }
            _ => return Err(cfg_err(no, &format!("unknown stanza `{word}`"))),
        }
    }
    Ok(model)
}

/// Leading whitespace-separated tokens without `=` (up to `max`), and the rest.
fn split_ids(rest: &str, max: usize) -> (Vec<&str>, &str) {
    let mut ids = Vec::new();
    let mut tail = rest.trim_start();
    while ids.len() < max {
        let end = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let tok = &tail[..end];
        if tok.is_empty() || tok.contains('=') {
            break;
        }
        ids.push(tok);
        tail = tail[end..].trim_start();
    }
    (ids, tail)
}

/// Canonical network text; external excitations are not representable and are omitted.
pub fn network_to_text(model: &NetworkModel) -> String {
    let mut s = String::new();
    let l = model.node_count();
    for j in 1..=l {
        let _ = writeln!(s, "node {j}");
    }
    for j in 1..=l {
        let n = model.noise(j);
        let h = n.shaper();
        let _ = writeln!(
            s,
            "noise {j} num=[{}] den=[{}] lambda={}",
            join(h.num().coeffs().iter()),
            join(h.den().coeffs().iter()),
            n.variance()
        );
    }
    let mut edges: Vec<_> = model.modules().collect();
    edges.sort_by_key(|((out, inp), _)| (*inp, *out));
    for ((out, inp), tf) in edges {
        let _ = writeln!(s, "edge {inp} {out} {tf}");
    }
    for j in 1..=l {
        if let Excitation::White { power } = model.excitation(j) {
            let _ = writeln!(s, "excite {j} white power={power}");
        }
    }
    s
}
