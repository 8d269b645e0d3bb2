//! Subcommand bodies. Each returns the files to write; the caller writes
//! them from a single thread.

use std::fmt;
use std::sync::Arc;

use serde_json::{Map, Value};

use qldp_core::exact::ExactSystem;
use qldp_core::ldp::{self, GeneratingFunction, CONVEXITY_TOL};
use qldp_core::level2::Level2;
use qldp_core::model::LatticeBox;
use qldp_core::opalg::psi_norm;
use qldp_core::polymer::SignConvention;
use qldp_core::{Certificate, ClusterExpansion, Error, C64};

use crate::config::{RunConfig, Sign};
use crate::output::{certificate_json, csv, json, json_num, num, Header};

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Resource(String),
    Invariant(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Parse(_) => 1,
            Failure::Resource(_) => 2,
            Failure::Invariant(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Parse(m) => write!(f, "config error: {}", m),
            Failure::Resource(m) => write!(f, "resource or feasibility error: {}", m),
            Failure::Invariant(m) => write!(f, "invariant violation: {}", m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Parse { .. } => Failure::Parse(m),
            Error::Invariant(_)
            | Error::Monotonicity(_)
            | Error::NotDensity(_)
            | Error::NotHermitian(_)
            | Error::UndefinedFunction(_)
            | Error::Shape(_) => Failure::Invariant(m),
            _ => Failure::Resource(m),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Exact,
    Expand,
    Rate,
    Level2,
    GtGap,
    PsiNorm,
    Clt,
}

/// A named output file and its contents.
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub config_sha256: String,
    pub uncertified: bool,
}

impl Context<'_> {
    fn stem(&self, pipeline: &str) -> String {
        match &self.config.prefix {
            Some(p) => format!("{}_{}", p, pipeline),
            None => pipeline.to_string(),
        }
    }

    fn certificate(&self) -> Option<Certificate> {
        let c = self.config;
        c.model.certify(&c.a_grid, c.delta, c.beta_max).ok()
    }

    fn header(&self, pipeline: &str, cert: Option<Certificate>, order: Option<usize>, tail: Option<f64>) -> Header {
        Header {
            pipeline: pipeline.into(),
            config_sha256: self.config_sha256.clone(),
            certificate: cert,
            order,
            tail_bound: tail,
            extra: Vec::new(),
        }
    }

    fn volumes(&self) -> Result<&[LatticeBox], Failure> {
        if self.config.volumes.is_empty() {
            return Err(Failure::Parse("this pipeline needs `volumes` in [run]".into()));
        }
        Ok(&self.config.volumes)
    }

    /// Builds the expansion engine, enforcing the certified-only gate.
    fn engine(&self) -> Result<(Arc<ClusterExpansion>, Option<Certificate>), Failure> {
        let c = self.config;
        let cert = self.certificate();
        let covered = cert.map_or(false, |k| c.beta < k.beta0);
        if c.certified_only && !covered && !self.uncertified {
            return Err(Failure::Resource(match cert {
                Some(k) => format!(
                    "β = {} is not below the certified β₀ = {}; pass --uncertified to run anyway",
                    c.beta, k.beta0
                ),
                None => "no certificate on the a grid; pass --uncertified to run anyway".into(),
            }));
        }
        let mut engine = ClusterExpansion::new(&c.model, c.order, &c.caps)?;
        if let Some(k) = cert {
            engine = engine.with_certificate(k);
        }
        Ok((Arc::new(engine), cert))
    }
}

/// Second differences of a tabulated F; reports the first violating triple.
fn check_convex(label: &str, f: &GeneratingFunction) -> Result<(), Failure> {
    if f.is_convex() {
        return Ok(());
    }
    let (ts, vs) = (&f.t_grid, &f.f_values);
    for k in 1..ts.len() - 1 {
        let s1 = (vs[k] - vs[k - 1]) / (ts[k] - ts[k - 1]);
        let s2 = (vs[k + 1] - vs[k]) / (ts[k + 1] - ts[k]);
        let curv = (s2 - s1) / (0.5 * (ts[k + 1] - ts[k - 1]));
        if curv < -CONVEXITY_TOL {
            return Err(Failure::Invariant(format!(
                "{} is not convex; offending record t = {}, F = {}, second difference = {}",
                label,
                num(ts[k]),
                num(vs[k]),
                num(curv)
            )));
        }
    }
    Err(Failure::Invariant(format!("{} is not convex", label)))
}

fn exact(ctx: &Context) -> Result<Vec<Artifact>, Failure> {
    let c = ctx.config;
    let mut rows = Vec::new();
    for v in ctx.volumes()? {
        let sys = Arc::new(ExactSystem::new(&c.model, v, &c.caps)?);
        let f = ldp::exact_generating_function(sys, c.t_grid.clone(), c.beta);
        check_convex(&format!("F at |Λ| = {}", v.len()), &f)?;
        for (t, val) in f.t_grid.iter().zip(&f.f_values) {
            rows.push(vec![v.len().to_string(), num(*t), num(*val)]);
        }
    }
    let header = ctx.header("exact", ctx.certificate(), None, None);
    Ok(vec![Artifact {
        name: format!("{}.csv", ctx.stem("exact")),
        contents: csv(&header, &["volume", "t", "f"], &rows),
    }])
}

fn expand(ctx: &Context) -> Result<Vec<Artifact>, Failure> {
    let c = ctx.config;
    let (engine, cert) = ctx.engine()?;
    let gf = ldp::cluster_generating_function(engine.clone(), c.t_grid.clone(), c.beta)?;
    check_convex("cluster F", &gf)?;
    let tail = engine.tail_bound(C64::new(0.0, 0.0), C64::new(c.beta, 0.0));
    let header = ctx.header("expand", cert, Some(c.order), tail);
    let rows: Vec<Vec<String>> = gf
        .t_grid
        .iter()
        .zip(&gf.f_values)
        .map(|(t, f)| vec![num(*t), num(*f)])
        .collect();
    let mut out = vec![Artifact {
        name: format!("{}.csv", ctx.stem("expand")),
        contents: csv(&header, &["t", "f"], &rows),
    }];
    if !c.volumes.is_empty() {
        let sign = match c.sign {
            Sign::Standard => SignConvention::Standard,
            Sign::Literal => SignConvention::Literal,
        };
        let pad = c.order as i32 * c.model.potential.range();
        let mut rows = Vec::new();
        for v in &c.volumes {
            let origin: Vec<i32> = v.origin()[..v.dim()].iter().map(|o| o - pad).collect();
            let lengths: Vec<usize> = v.lengths().iter().map(|l| l + 2 * pad as usize).collect();
            let outer = LatticeBox::with_origin(&origin, &lengths)?;
            for &t in &c.t_grid {
                let s = engine.boundary_cluster_sum(
                    v.sites(),
                    outer.sites(),
                    C64::new(t, 0.0),
                    C64::new(c.beta, 0.0),
                    sign,
                )?;
                rows.push(vec![
                    v.len().to_string(),
                    v.boundary_sites(c.model.potential.range().max(1) as usize).len().to_string(),
                    num(t),
                    num(s.value.re),
                    num(s.value.im),
                ]);
            }
        }
        let mut header = ctx.header("expand", cert, Some(c.order), tail);
        header.extra.push((
            "sign".into(),
            match c.sign {
                Sign::Standard => "standard".into(),
                Sign::Literal => "literal".into(),
            },
        ));
        out.push(Artifact {
            name: format!("{}_boundary.csv", ctx.stem("expand")),
            contents: csv(&header, &["volume", "boundary", "t", "sum_re", "sum_im"], &rows),
        });
    }
    Ok(out)
}

fn rate(ctx: &Context) -> Result<Vec<Artifact>, Failure> {
    let c = ctx.config;
    let (engine, cert) = ctx.engine()?;
    let gf = ldp::cluster_generating_function(engine.clone(), c.t_grid.clone(), c.beta)?;
    check_convex("cluster F", &gf)?;
    let rate = ldp::legendre(&gf, &c.x_grid)?;
    if !rate.is_convex() {
        return Err(Failure::Invariant("rate function is not convex on the x grid".into()));
    }
    let tail = engine.tail_bound(C64::new(0.0, 0.0), C64::new(c.beta, 0.0));
    let header = ctx.header("rate", cert, Some(c.order), tail);
    let rows: Vec<Vec<String>> = rate
        .x_grid
        .iter()
        .zip(&rate.i_values)
        .map(|(x, i)| vec![num(*x), num(*i)])
        .collect();
    Ok(vec![Artifact {
        name: format!("{}.csv", ctx.stem("rate")),
        contents: csv(&header, &["x", "i"], &rows),
    }])
}

fn level2(ctx: &Context) -> Result<Vec<Artifact>, Failure> {
    let c = ctx.config;
    let (engine, cert) = ctx.engine()?;
    let tail = engine.tail_bound(C64::new(0.0, 0.0), C64::new(c.beta, 0.0));
    let l2 = Level2::new(engine, c.beta)?;
    let (lo, hi) = (l2.spectrum().atoms[0], *l2.spectrum().atoms.last().unwrap());
    let mut rows = Vec::new();
    for &x in &c.x_grid {
        let level1 = l2.level1(x)?;
        let contracted = if x >= lo && x <= hi { l2.contracted(x)? } else { f64::INFINITY };
        rows.push(vec![num(x), num(level1), num(contracted)]);
    }
    let header = ctx.header("level2", cert, Some(c.order), tail);
    Ok(vec![Artifact {
        name: format!("{}.csv", ctx.stem("level2")),
        contents: csv(&header, &["x", "level1", "contracted"], &rows),
    }])
}

fn gtgap(ctx: &Context) -> Result<Vec<Artifact>, Failure> {
    let c = ctx.config;
    let mut rows = Vec::new();
    for v in ctx.volumes()? {
        let sys = ExactSystem::new(&c.model, v, &c.caps)?;
        for &t in &c.t_grid {
            let g = sys.golden_thompson_gap(t, c.beta);
            if g.gap < -1e-10 {
                return Err(Failure::Invariant(format!(
                    "negative Golden-Thompson gap; offending record volume = {}, t = {}, gap = {}",
                    v.len(),
                    num(t),
                    num(g.gap)
                )));
            }
            rows.push(vec![v.len().to_string(), num(t), num(g.tilde_f), num(g.f), num(g.gap)]);
        }
    }
    let header = ctx.header("gtgap", ctx.certificate(), None, None);
    Ok(vec![Artifact {
        name: format!("{}.csv", ctx.stem("gtgap")),
        contents: csv(&header, &["volume", "t", "tilde_f", "f", "gap"], &rows),
    }])
}

fn psinorm(ctx: &Context) -> Result<Vec<Artifact>, Failure> {
    let x = &ctx.config.model.observable;
    let p = psi_norm(x)?;
    let tr = x.trace();
    let mut body = Map::new();
    body.insert("norm".into(), json_num(p.norm));
    body.insert("attained".into(), json_num(p.attained));
    body.insert("trace_re".into(), json_num(tr.re));
    body.insert("trace_im".into(), json_num(tr.im));
    let header = ctx.header("psinorm", ctx.certificate(), None, None);
    Ok(vec![Artifact {
        name: format!("{}.json", ctx.stem("psinorm")),
        contents: json(&header, body),
    }])
}

fn clt(ctx: &Context) -> Result<Vec<Artifact>, Failure> {
    let c = ctx.config;
    let volumes = ctx.volumes()?;
    let (engine, cert) = ctx.engine()?;
    let sigma2 = ldp::sigma2_series(&engine, c.beta)?;
    if sigma2 <= 0.0 {
        return Err(Failure::Invariant(format!("σ² = {} is not positive", num(sigma2))));
    }
    let report = ldp::clt_compare(&c.model, volumes, &c.t_grid, c.beta, sigma2, &c.caps)?;
    let tail = engine.tail_bound(C64::new(0.0, 0.0), C64::new(c.beta, 0.0));
    let mut header = ctx.header("clt", cert, Some(c.order), tail);
    header.extra.push(("sigma2".into(), num(sigma2)));
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|(n, t, d)| vec![n.to_string(), num(*t), num(*d)])
        .collect();
    Ok(vec![Artifact {
        name: format!("{}.csv", ctx.stem("clt")),
        contents: csv(&header, &["volume", "t", "deviation"], &rows),
    }])
}

pub fn run(ctx: &Context, pipeline: Pipeline) -> Result<Vec<Artifact>, Failure> {
    match pipeline {
        Pipeline::Exact => exact(ctx),
        Pipeline::Expand => expand(ctx),
        Pipeline::Rate => rate(ctx),
        Pipeline::Level2 => level2(ctx),
        Pipeline::GtGap => gtgap(ctx),
        Pipeline::PsiNorm => psinorm(ctx),
        Pipeline::Clt => clt(ctx),
    }
}

/// Certificate report: the best certificate plus one entry per a.
pub fn certify(ctx: &Context) -> Result<(Artifact, bool), Failure> {
    let c = ctx.config;
    let best = c.model.certify(&c.a_grid, c.delta, c.beta_max);
    let margins: Vec<Value> = c
        .a_grid
        .iter()
        .map(|&a| match c.model.certify(&[a], c.delta, c.beta_max) {
            Ok(k) => certificate_json(&k),
            Err(_) => {
                let mut m = Map::new();
                m.insert("a".into(), json_num(a));
                m.insert("beta0".into(), Value::Null);
                Value::Object(m)
            }
        })
        .collect();
    let mut body = Map::new();
    let feasible = best.is_ok();
    match &best {
        Ok(k) => {
            body.insert("a".into(), json_num(k.a));
            body.insert("beta0".into(), json_num(k.beta0));
            body.insert("delta".into(), json_num(k.delta));
            body.insert("margin".into(), json_num(k.margin));
        }
        Err(e) => {
            body.insert("error".into(), Value::from(e.to_string()));
            body.insert("delta".into(), json_num(c.delta));
        }
    }
    body.insert("beta_max".into(), json_num(c.beta_max));
    body.insert("feasible".into(), Value::from(feasible));
    body.insert("margins".into(), Value::Array(margins));
    let header = ctx.header("certify", best.ok(), None, None);
    Ok((
        Artifact {
            name: format!("{}.json", ctx.stem("certify")),
            contents: json(&header, body),
        },
        feasible,
    ))
}
