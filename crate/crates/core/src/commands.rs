//! Run orchestration, CSV artifacts and the report behind the command-line subcommands.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::{RunConfig, Stream};
use crate::error::{domain, FlowError, Result};
use crate::gas::{FlowState, GasModel};
use crate::glimm::{audit_monotonicity, AuditReport, GlimmObserver, GlimmRow, WeakResidual};
use crate::oracle::{background_slice, sample_background, solve_background};
use crate::riemann::solve_riemann;
use crate::tracker::{initialize, run_into, sample_slice, EventKind, EventRecord, Observer, RunLog, SimulationState, Slice};

pub const EVENTS_SCHEMA: &str = "steady-front/events/v1";
pub const SLICES_SCHEMA: &str = "steady-front/slices/v1";
pub const GLIMM_SCHEMA: &str = "steady-front/glimm/v1";
pub const REPORT_SCHEMA: &str = "steady-front/report/v1";

/// 17 significant digits.
pub fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{:.16e}", v + 0.0)
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub lines: usize,
    pub ok: bool,
    /// max over lines of sup Z(kh+) / (‖Z̄‖∞ e^{−L_meas kh}).
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OracleCheck {
    Compared { x: f64, max_theta_error: f64, max_p_rel_error: f64, samples: usize },
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub final_tv: f64,
    pub c0: f64,
    pub c3: f64,
    pub c_np: f64,
    pub l_meas: Option<f64>,
    pub envelope: Option<EnvelopeCheck>,
    pub oracle: Option<OracleCheck>,
    pub residuals: Vec<f64>,
}

pub struct RunOutput {
    pub config_hash: String,
    pub state: SimulationState,
    pub log: RunLog,
    pub glimm: GlimmObserver,
    pub audit: AuditReport,
    pub slices: Vec<Slice>,
    pub summary: Summary,
}

/// Run a validated configuration to x_max.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    let mesh = cfg.mesh()?;
    let (mut st, init) = initialize(&cfg.inflow, mesh, &cfg.gas, &cfg.tracker_params())?;
    let mut log = RunLog::default();
    for mut r in init {
        r.index = log.events.len();
        log.diagnostics.events += 1;
        log.diagnostics.corner_events += 1;
        log.events.push(r);
    }
    let mut glimm = GlimmObserver::new(&st, cfg.glimm);
    let mut residuals = cfg
        .outputs
        .test_functions
        .iter()
        .map(|tf| WeakResidual::new(*tf, 1.0, &st.mesh, &cfg.gas))
        .collect::<Result<Vec<_>>>()?;
    let mut stations: Vec<f64> = cfg.outputs.slices.clone();
    stations.push(cfg.numerics.x_max);
    stations.sort_by(f64::total_cmp);
    stations.dedup();
    let mut slices = Vec::with_capacity(stations.len());
    for xs in stations {
        {
            let mut obs: Vec<&mut dyn Observer> = vec![&mut glimm];
            for r in residuals.iter_mut() {
                obs.push(r);
            }
            run_into(&mut st, xs, &mut obs, &mut log)?;
        }
        slices.push(sample_slice(&st, xs)?);
    }
    let audit = audit_monotonicity(&glimm.rows);
    let last = slices.last().expect("x_max slice");
    let l_meas = log.reaction.iter().map(|r| r.min_rate_over_u).reduce(f64::min);
    let envelope = match (cfg.is_inert(), l_meas) {
        (false, Some(l)) => {
            let z0 = st.z_bar;
            let mut worst: f64 = 0.0;
            for r in &log.reaction {
                let bound = z0 * (-l * r.x).exp();
                worst = worst.max(if bound > 0.0 { r.sup_z_after / bound } else { 0.0 });
            }
            Some(EnvelopeCheck { lines: log.reaction.len(), ok: worst <= 1.0 + 1e-9, worst_ratio: worst })
        }
        _ => None,
    };
    let oracle = oracle_check(cfg, &st, last)?;
    let summary = Summary {
        final_tv: last.tv(),
        c0: glimm.c0(),
        c3: log.diagnostics.c3,
        c_np: log.diagnostics.np_max * 2f64.powi(cfg.numerics.nu as i32),
        l_meas,
        envelope,
        oracle,
        residuals: residuals.iter().map(|r| r.value()).collect::<Result<_>>()?,
    };
    Ok(RunOutput { config_hash: cfg.hash(), state: st, log, glimm, audit, slices, summary })
}

fn oracle_check(cfg: &RunConfig, st: &SimulationState, last: &Slice) -> Result<Option<OracleCheck>> {
    let convex = st.mesh.turning_angles.iter().all(|w| *w <= 0.0);
    if !cfg.is_inert() || !convex {
        return Ok(None);
    }
    if cfg.inflow.windows(2).any(|w| w[0].state != w[1].state) {
        return Ok(Some(OracleCheck::Skipped("non-uniform inflow".into())));
    }
    let u_inf = cfg.inflow[0].state;
    let fans = solve_background(&u_inf, &st.mesh, &cfg.gas)?;
    let x = last.x;
    let top = fans
        .iter()
        .filter(|f| f.corner[0] < x)
        .map(|f| f.corner[1] + f.head_slope * (x - f.corner[0]))
        .fold(last.wall_y, f64::max);
    let n = 400;
    let (mut et, mut ep) = (0.0f64, 0.0f64);
    for i in 0..=n {
        let y = last.wall_y + (top + 0.25 - last.wall_y) * i as f64 / n as f64;
        let a = last.state_at(y);
        let b = sample_background(&u_inf, &fans, &st.mesh, x, y, &cfg.gas)?;
        et = et.max((a.angle() - b.angle()).abs());
        ep = ep.max(((a.p - b.p) / b.p).abs());
    }
    Ok(Some(OracleCheck::Compared { x, max_theta_error: et, max_p_rel_error: ep, samples: n + 1 }))
}

fn header(schema: &str, hash: &str, seed: u64) -> String {
    format!("# schema={schema} config_sha256={hash} seed={seed}\n")
}

pub fn events_csv(out: &RunOutput) -> String {
    let mut s = header(EVENTS_SCHEMA, &out.config_hash, out.state.seed);
    s.push_str("event,x,kind,y,role,id,family,order,strength,slope,np_strength,omega,triple\n");
    for r in &out.log.events {
        write_event_rows(&mut s, r);
    }
    s
}

fn write_event_rows(s: &mut String, r: &EventRecord) {
    let base = |s: &mut String| {
        let _ = write!(s, "{},{},{},{},", r.index, fmt_f(r.x), r.kind.label(), fmt_f(r.y));
    };
    let tail = format!("{},{},{}", fmt_f(r.np_total), fmt_f(r.omega), r.triple as u8);
    if r.incoming.is_empty() && r.outgoing.is_empty() {
        base(s);
        let _ = writeln!(s, "none,,,,,,{tail}");
        return;
    }
    for (role, list) in [("in", &r.incoming), ("out", &r.outgoing)] {
        for f in list.iter() {
            base(s);
            let fam = if f.class == 6 { "NP".to_string() } else { f.class.to_string() };
            let _ = writeln!(s, "{role},{},{fam},{},{},{},{tail}", f.id, f.order, fmt_f(f.strength), fmt_f(f.slope));
        }
    }
}

fn state_cols(u: &FlowState) -> String {
    format!("{},{},{},{},{},{}", fmt_f(u.u), fmt_f(u.v), fmt_f(u.p), fmt_f(u.rho), fmt_f(u.z), fmt_f(u.angle()))
}

const SLICE_COLUMNS: &str = "x,y_lo,y_hi,u,v,p,rho,Z,theta,source\n";

pub fn slices_csv(out: &RunOutput) -> String {
    let mut s = header(SLICES_SCHEMA, &out.config_hash, out.state.seed);
    s.push_str(SLICE_COLUMNS);
    for sl in &out.slices {
        for (i, u) in sl.states.iter().enumerate() {
            let lo = if i == 0 { sl.wall_y } else { sl.ys[i - 1] };
            let hi = sl.ys.get(i).copied().unwrap_or(f64::INFINITY);
            let src = if sl.shifted { "tracker-shifted" } else { "tracker" };
            let _ = writeln!(s, "{},{},{},{},{src}", fmt_f(sl.x), fmt_f(lo), fmt_f(hi), state_cols(u));
        }
    }
    s
}

pub fn glimm_csv(out: &RunOutput) -> String {
    let mut s = header(GLIMM_SCHEMA, &out.config_hash, out.state.seed);
    s.push_str("event,kind,x,L_w,Q,F1,F0,F,script_F,E,TV\n");
    for r in &out.glimm.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.event.map_or("-".to_string(), |e| e.to_string()),
            r.kind.map_or("initial", |k| k.label()),
            fmt_f(r.x),
            fmt_f(r.l_w),
            fmt_f(r.q),
            fmt_f(r.f1),
            fmt_f(r.f0),
            fmt_f(r.f),
            fmt_f(r.script_f),
            fmt_f(r.e),
            fmt_f(r.tv)
        );
    }
    s
}

pub fn report(out: &RunOutput, cfg: &RunConfig) -> String {
    let mut s = header(REPORT_SCHEMA, &out.config_hash, out.state.seed);
    let d = &out.log.diagnostics;
    let sm = &out.summary;
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("x_max", fmt_f(cfg.numerics.x_max));
    kv("nu", cfg.numerics.nu.to_string());
    kv("h", fmt_f(cfg.numerics.h));
    kv("lambda_hat", fmt_f(out.state.lambda_hat));
    kv("events", d.events.to_string());
    kv("front_front_events", d.pair_events.to_string());
    kv("front_wall_events", d.wall_events.to_string());
    kv("corner_events", d.corner_events.to_string());
    kv("reaction_lines", d.reaction_lines.to_string());
    kv("triple_points", d.triple_points.to_string());
    kv("max_fronts", d.max_fronts.to_string());
    kv("final_fronts", out.state.fronts.len().to_string());
    kv("near_limit_reaction_steps", d.near_limit_steps.to_string());
    kv("max_tangency_error", fmt_f(d.max_tangency_error));
    kv("final_tv", fmt_f(sm.final_tv));
    kv("C0", fmt_f(sm.c0));
    kv("C3", fmt_f(sm.c3));
    kv("C_np", fmt_f(sm.c_np));
    kv("L_meas", sm.l_meas.map_or("n/a".into(), fmt_f));
    kv("glimm_L", fmt_f(out.glimm.l));
    kv("initial_script_F", fmt_f(out.glimm.initial.script_f));
    kv("final_script_F", fmt_f(out.glimm.last.script_f));
    match &sm.envelope {
        Some(e) => {
            kv("envelope", if e.ok { "PASS".into() } else { "FAIL".into() });
            kv("envelope_worst_ratio", fmt_f(e.worst_ratio));
        }
        None => kv("envelope", "n/a".into()),
    }
    kv("audit_checked_events", out.audit.checked_events.to_string());
    kv("audit_checked_reaction_lines", out.audit.checked_lines.to_string());
    kv("audit_violations", out.audit.violations.len().to_string());
    kv("audit_sum_E", fmt_f(out.audit.sum_e));
    kv("audit_unclassified", out.glimm.unclassified.len().to_string());
    for (i, r) in sm.residuals.iter().enumerate() {
        kv(&format!("weak_residual[{i}]"), fmt_f(*r));
    }
    if let Some(o) = &sm.oracle {
        s.push_str("[oracle]\n");
        match o {
            OracleCheck::Compared { x, max_theta_error, max_p_rel_error, samples } => {
                let _ = writeln!(s, "x = {}", fmt_f(*x));
                let _ = writeln!(s, "samples = {samples}");
                let _ = writeln!(s, "max_theta_error = {}", fmt_f(*max_theta_error));
                let _ = writeln!(s, "max_p_rel_error = {}", fmt_f(*max_p_rel_error));
            }
            OracleCheck::Skipped(why) => {
                let _ = writeln!(s, "status = skipped ({why})");
            }
        }
    }
    if !out.audit.violations.is_empty() {
        s.push_str("[audit]\n");
        s.push_str(&out.audit.render());
    }
    s
}

/// Run and write the requested artifacts into `dir`.
pub fn cmd_simulate(cfg: &RunConfig, dir: &Path) -> Result<RunOutput> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let out = execute(cfg)?;
    let write = |name: &str, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| io_err(&p, e))
    };
    if cfg.wants(Stream::Events) {
        write("events.csv", events_csv(&out))?;
    }
    if cfg.wants(Stream::Slices) {
        write("slices.csv", slices_csv(&out))?;
    }
    if cfg.wants(Stream::Glimm) {
        write("glimm.csv", glimm_csv(&out))?;
    }
    if cfg.wants(Stream::Report) {
        write("report.txt", report(&out, cfg))?;
    }
    Ok(out)
}

fn io_err(p: &Path, e: std::io::Error) -> FlowError {
    FlowError::Domain(format!("{}: {e}", p.display()))
}

/// One Riemann solve as text: strengths, then the six states bottom to top.
pub fn cmd_riemann(below: [f64; 5], above: [f64; 5], gas: &GasModel) -> Result<String> {
    let (ub, ua) = (FlowState::from_array(below), FlowState::from_array(above));
    let sol = solve_riemann(&ub, &ua, gas)?;
    let mut s = String::from("alpha_1,alpha_2,alpha_3,alpha_4,alpha_5\n");
    let a: Vec<String> = sol.alphas.iter().map(|v| fmt_f(*v)).collect();
    s.push_str(&a.join(","));
    s.push_str("\nstate,u,v,p,rho,Z,theta\n");
    for (i, u) in sol.states.iter().enumerate() {
        let name = match i {
            0 => "below".to_string(),
            5 => "above".to_string(),
            k => format!("middle_{k}"),
        };
        let _ = writeln!(s, "{name},{}", state_cols(u));
    }
    Ok(s)
}

/// Background solution along x = const, in the slice schema.
pub fn cmd_oracle(cfg: &RunConfig, x: f64) -> Result<String> {
    if cfg.inflow.windows(2).any(|w| w[0].state != w[1].state) {
        return domain("the background oracle needs a uniform inflow");
    }
    if !cfg.is_inert() {
        return domain("the background oracle needs Z = 0");
    }
    if !(x >= 0.0 && x <= cfg.numerics.x_max) {
        return domain(format!("x = {x} outside [0, x_max]"));
    }
    let mesh = cfg.mesh()?;
    let u_inf = cfg.inflow[0].state;
    let fans = solve_background(&u_inf, &mesh, &cfg.gas)?;
    let top = fans
        .iter()
        .filter(|f| f.corner[0] < x)
        .map(|f| f.corner[1] + f.head_slope * (x - f.corner[0]))
        .fold(mesh.gh(x), f64::max)
        + 0.5;
    let pts = background_slice(&u_inf, &fans, &mesh, x, top, 32, &cfg.gas)?;
    let mut s = header(SLICES_SCHEMA, &cfg.hash(), cfg.numerics.seed);
    s.push_str(SLICE_COLUMNS);
    for (i, (y, u)) in pts.iter().enumerate() {
        let hi = pts.get(i + 1).map_or(f64::INFINITY, |p| p.0);
        let _ = writeln!(s, "{},{},{},{},oracle", fmt_f(x), fmt_f(*y), fmt_f(hi), state_cols(u));
    }
    Ok(s)
}

fn parse_f(s: &str, what: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| FlowError::Domain(format!("bad number `{s}` in {what}"))),
    }
}

fn data_lines<'a>(text: &'a str, schema: &str, what: &str) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut it = text.lines().enumerate();
    match it.next() {
        Some((_, l)) if l.starts_with('#') && l.contains(&format!("schema={schema}")) => {}
        _ => return domain(format!("{what}: first row must declare schema={schema}")),
    }
    it.next().ok_or_else(|| FlowError::Domain(format!("{what}: missing column header")))?;
    Ok(it.filter(|(_, l)| !l.trim().is_empty()))
}

/// Parse glimm.csv rows.
pub fn parse_glimm_csv(text: &str) -> Result<Vec<GlimmRow>> {
    let mut rows = Vec::new();
    for (n, line) in data_lines(text, GLIMM_SCHEMA, "glimm.csv")? {
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 11 {
            return domain(format!("glimm.csv line {}: expected 11 columns, got {}", n + 1, c.len()));
        }
        let event = if c[0] == "-" {
            None
        } else {
            Some(c[0].parse().map_err(|_| FlowError::Domain(format!("glimm.csv line {}: bad event id", n + 1)))?)
        };
        let kind = if c[1] == "initial" {
            None
        } else {
            Some(EventKind::parse(c[1]).ok_or_else(|| FlowError::Domain(format!("glimm.csv line {}: unknown kind {}", n + 1, c[1])))?)
        };
        let f = |i: usize| parse_f(c[i], "glimm.csv");
        rows.push(GlimmRow {
            event,
            kind,
            x: f(2)?,
            l_w: f(3)?,
            q: f(4)?,
            f1: f(5)?,
            f0: f(6)?,
            f: f(7)?,
            script_f: f(8)?,
            e: f(9)?,
            tv: f(10)?,
        });
    }
    Ok(rows)
}

/// Re-run the monotonicity audit on an events/glimm pair.
pub fn cmd_audit(events_text: &str, glimm_text: &str) -> Result<AuditReport> {
    let mut ids = BTreeSet::new();
    for (n, line) in data_lines(events_text, EVENTS_SCHEMA, "events.csv")? {
        let id = line.split(',').next().unwrap_or("");
        ids.insert(id.parse::<usize>().map_err(|_| FlowError::Domain(format!("events.csv line {}: bad event id", n + 1)))?);
    }
    let rows = parse_glimm_csv(glimm_text)?;
    for r in &rows {
        if let Some(e) = r.event {
            if !ids.contains(&e) {
                return domain(format!("glimm.csv refers to event {e} missing from events.csv"));
            }
        }
    }
    Ok(audit_monotonicity(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const PM: &str = r#"{
        "gas": {"gamma": 1.4, "R": 1.0},
        "inflow": [{"y": 0.0, "state": {"u": 2.0, "v": 0.0, "p": 0.7142857142857143, "rho": 1.0, "Z": 0.0}}],
        "wall": {"vertices": [[0.0, 0.0], [0.2, 0.0], [1.2, -0.17632698070846498]]},
        "numerics": {"h": 0.1, "nu": 8, "x_max": 1.0, "seed": 3},
        "outputs": {"slices": [0.5]}
    }"#;

    #[test]
    fn simulate_is_deterministic_and_has_oracle_block() {
        let cfg = parse_config(PM).unwrap();
        let d1 = tempdir("a");
        let d2 = tempdir("b");
        cmd_simulate(&cfg, &d1).unwrap();
        cmd_simulate(&cfg, &d2).unwrap();
        for f in ["events.csv", "slices.csv", "glimm.csv", "report.txt"] {
            let a = std::fs::read(d1.join(f)).unwrap();
            assert_eq!(a, std::fs::read(d2.join(f)).unwrap(), "{f}");
            let text = String::from_utf8(a).unwrap();
            assert!(text.starts_with("# schema=steady-front/"));
            assert!(text.lines().next().unwrap().contains(&cfg.hash()));
        }
        let rep = std::fs::read_to_string(d1.join("report.txt")).unwrap();
        assert!(rep.contains("[oracle]") && rep.contains("max_theta_error"));
        let a = cmd_audit(
            &std::fs::read_to_string(d1.join("events.csv")).unwrap(),
            &std::fs::read_to_string(d1.join("glimm.csv")).unwrap(),
        )
        .unwrap();
        assert!(a.checked_events > 0);
    }

    fn tempdir(tag: &str) -> std::path::PathBuf {
        let p = std::env::temp_dir().join(format!("steady-front-unit-{}-{tag}", std::process::id()));
        let _ = std::fs::remove_dir_all(&p);
        p
    }

    #[test]
    fn riemann_identical_states() {
        let u = [2.0, 0.1, 0.7, 1.0, 0.2];
        let s = cmd_riemann(u, u, &GasModel::ideal(1.4)).unwrap();
        let alphas: Vec<f64> = s.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(alphas, vec![0.0; 5]);
    }

    #[test]
    fn oracle_csv_matches_sampler() {
        let cfg = parse_config(PM).unwrap();
        let csv = cmd_oracle(&cfg, 0.8).unwrap();
        let mesh = cfg.mesh().unwrap();
        let fans = solve_background(&cfg.inflow[0].state, &mesh, &cfg.gas).unwrap();
        let mut n = 0;
        for line in csv.lines().skip(2) {
            let c: Vec<f64> = line.split(',').take(9).map(|v| parse_f(v, "t").unwrap()).collect();
            let want = sample_background(&cfg.inflow[0].state, &fans, &mesh, 0.8, c[1], &cfg.gas).unwrap();
            assert!((c[5] - want.p).abs() <= 1e-15 * want.p);
            n += 1;
        }
        assert!(n > 30);
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            assert_eq!(fmt_f(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f(f64::INFINITY), "inf");
    }
}
