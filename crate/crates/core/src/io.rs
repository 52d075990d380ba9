//! File formats: schedule CSV, sample and trajectory CSV, PGM images, and
//! MLP checkpoints.
//!
//! Floats are written with 17 significant digits so every value reads back
//! bit-for-bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::predictors::{Heads, Mlp, MlpConfig, MlpPredictor, Outputs, TimeCondition, PARAM_NAMES};
use crate::schedules::{CoefficientSchedule, VarianceMode};

pub const SCHEDULE_HEADER: [&str; 5] = ["t", "alpha", "beta_sq", "alpha_bar", "beta_bar_sq"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format(format!("{what}: cannot parse `{s}` as a number")))
}

/// Splits `# key=value;key=value` metadata off the front of `text`.
fn split_meta(text: &str) -> (Vec<(String, String)>, &str) {
    let mut meta = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let (head, tail) = line.split_once('\n').unwrap_or((line, ""));
        for kv in head.trim().split(';') {
            if let Some((k, v)) = kv.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
        rest = tail;
    }
    (meta, rest)
}

fn meta_get<'a>(meta: &'a [(String, String)], key: &str) -> Result<&'a str> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::Format(format!("missing `{key}` in metadata line")))
}

/// Schedule rows `t = 0..=T` (rates at `t = 0` are written as 0).
pub fn schedule_to_csv(s: &CoefficientSchedule) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCHEDULE_HEADER)?;
    for t in 0..=s.total_steps() {
        let (a, b) = if t == 0 { (0.0, 0.0) } else { (s.alpha(t)?, s.beta_sq(t)?) };
        w.write_record([t.to_string(), fmt_f64(a), fmt_f64(b), fmt_f64(s.alpha_bar(t)?), fmt_f64(s.beta_bar_sq(t)?)])?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(format!("# eta={};variance_mode={}\n{body}", fmt_f64(s.eta()), s.variance_mode()))
}

pub fn schedule_from_csv(text: &str) -> Result<CoefficientSchedule> {
    let (meta, body) = split_meta(text);
    let eta = parse_f64(meta_get(&meta, "eta")?, "eta")?;
    let mode: VarianceMode = meta_get(&meta, "variance_mode")?.parse()?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    if r.headers()?.iter().collect::<Vec<_>>() != SCHEDULE_HEADER {
        return Err(Error::Format(format!("schedule header must be {}", SCHEDULE_HEADER.join(","))));
    }
    let (mut alpha, mut beta_sq, mut alpha_bar, mut beta_bar_sq) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::Format(format!("schedule row {row} has {} fields", rec.len())));
        }
        let t: usize = rec[0].parse().map_err(|_| Error::Format(format!("bad t `{}`", &rec[0])))?;
        if t != row {
            return Err(Error::Format(format!("schedule rows must run t = 0, 1, ...; found {t} at row {row}")));
        }
        if t > 0 {
            alpha.push(parse_f64(&rec[1], "alpha")?);
            beta_sq.push(parse_f64(&rec[2], "beta_sq")?);
        }
        alpha_bar.push(parse_f64(&rec[3], "alpha_bar")?);
        beta_bar_sq.push(parse_f64(&rec[4], "beta_bar_sq")?);
    }
    CoefficientSchedule::from_parts(alpha, beta_sq, alpha_bar, beta_bar_sq, eta, mode)
}

fn dim_header(prefix: &[&str], d: usize) -> Vec<String> {
    prefix.iter().map(|s| s.to_string()).chain((0..d).map(|k| format!("dim_{k}"))).collect()
}

/// One row per sample: `sample_id, dim_0, ...`.
pub fn samples_to_csv(x: &Tensor) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(dim_header(&["sample_id"], x.row_len()))?;
    for r in 0..x.rows() {
        w.write_record(std::iter::once(r.to_string()).chain(x.row(r).iter().map(|v| fmt_f64(*v))))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
}

pub fn samples_from_csv(text: &str) -> Result<Tensor> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let d = r.headers()?.len().saturating_sub(1);
    let mut data = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        for f in rec.iter().skip(1) {
            data.push(parse_f64(f, "sample")?);
        }
        n += 1;
    }
    Tensor::new(vec![n, d], data)
}

/// Collects sampler states for a trajectory CSV
/// (`sample_id, step_index, t, dim_0, ...`).
#[derive(Clone, Debug, Default)]
pub struct TrajectoryWriter {
    rows: Vec<(usize, usize, usize, Vec<f64>)>,
    dim: usize,
}

impl TrajectoryWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, step_index: usize, t: usize, x: &Tensor) {
        self.dim = x.row_len();
        for r in 0..x.rows() {
            self.rows.push((r, step_index, t, x.row(r).to_vec()));
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(dim_header(&["sample_id", "step_index", "t"], self.dim))?;
        let mut rows: Vec<_> = self.rows.iter().collect();
        rows.sort_by_key(|(id, step, _, _)| (*id, *step));
        for (id, step, t, v) in rows {
            w.write_record(
                [id.to_string(), step.to_string(), t.to_string()].into_iter().chain(v.iter().map(|x| fmt_f64(*x))),
            )?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Linear `[-1, 1] -> [0, 255]`, clamped.
pub fn quantize(v: f64) -> u8 {
    (((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round()) as u8
}

/// Binary 8-bit PGM (P5) of a `side x side` image.
pub fn pgm_bytes(image: &[f64], side: usize) -> Result<Vec<u8>> {
    if image.len() != side * side {
        return Err(Error::ShapeMismatch { left: vec![image.len()], right: vec![side * side] });
    }
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(image.iter().map(|v| quantize(*v)));
    Ok(out)
}

pub const CHECKPOINT_FORMAT: &str = "rddm-mlp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Checkpoint text: a metadata line with the format tag, version and
/// architecture, then `name,rows,cols,index,value` rows.
pub fn checkpoint_to_string(p: &MlpPredictor) -> Result<String> {
    let c = p.model.config();
    let heads = if c.heads == Heads::Double { "double" } else { "single" };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "rows", "cols", "index", "value"])?;
    for (name, t) in PARAM_NAMES.iter().zip(p.model.params()) {
        let (rows, cols) = (t.shape()[0], t.shape().get(1).copied().unwrap_or(1));
        for (i, v) in t.data().iter().enumerate() {
            w.write_record([name.to_string(), rows.to_string(), cols.to_string(), i.to_string(), fmt_f64(*v)])?;
        }
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(format!(
        "# format={CHECKPOINT_FORMAT};version={CHECKPOINT_VERSION};data_dim={};embed_dim={};hidden={};heads={heads};outputs={};time={}\n{body}",
        c.data_dim,
        c.embed_dim,
        c.hidden,
        p.outputs,
        p.time.name()
    ))
}

pub fn checkpoint_from_str(text: &str) -> Result<MlpPredictor> {
    let (meta, body) = split_meta(text);
    if meta_get(&meta, "format")? != CHECKPOINT_FORMAT {
        return Err(Error::Format("not an MLP checkpoint".into()));
    }
    let version: u32 = meta_get(&meta, "version")?.parse().map_err(|_| Error::Format("bad version".into()))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let num = |k: &str| -> Result<usize> {
        meta_get(&meta, k)?.parse().map_err(|_| Error::Format(format!("bad `{k}` in checkpoint")))
    };
    let heads = match meta_get(&meta, "heads")? {
        "single" => Heads::Single,
        "double" => Heads::Double,
        other => return Err(Error::Format(format!("unknown heads `{other}`"))),
    };
    let config = MlpConfig { data_dim: num("data_dim")?, embed_dim: num("embed_dim")?, hidden: num("hidden")?, heads };
    let outputs = meta_get(&meta, "outputs")?.parse::<Outputs>().map_err(|e| Error::Format(e.to_string()))?;
    let time = TimeCondition::parse(meta_get(&meta, "time")?)?;
    let mut tensors: Vec<(String, usize, usize, Vec<f64>)> = Vec::new();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::Format("checkpoint rows need 5 fields".into()));
        }
        let rows: usize = rec[1].parse().map_err(|_| Error::Format("bad rows".into()))?;
        let cols: usize = rec[2].parse().map_err(|_| Error::Format("bad cols".into()))?;
        let index: usize = rec[3].parse().map_err(|_| Error::Format("bad index".into()))?;
        if tensors.last().map(|t| t.0.as_str()) != Some(&rec[0]) {
            tensors.push((rec[0].to_string(), rows, cols, Vec::with_capacity(rows * cols)));
        }
        let cur = tensors.last_mut().expect("pushed above");
        if index != cur.3.len() {
            return Err(Error::Format(format!("{}: index {index} out of order", cur.0)));
        }
        cur.3.push(parse_f64(&rec[4], &cur.0)?);
    }
    if tensors.len() != PARAM_NAMES.len() || tensors.iter().zip(PARAM_NAMES).any(|(t, n)| t.0 != n) {
        return Err(Error::Format(format!("checkpoint must list {}", PARAM_NAMES.join(", "))));
    }
    let params = tensors
        .into_iter()
        .map(|(name, rows, cols, data)| {
            let shape = if name.ends_with("bias") { vec![rows] } else { vec![rows, cols] };
            Tensor::new(shape, data)
        })
        .collect::<Result<Vec<_>>>()?;
    MlpPredictor::new(Mlp::from_params(config, params)?, outputs, time)
}

pub fn save_checkpoint(p: &MlpPredictor, path: &Path) -> Result<()> {
    write_text(path, &checkpoint_to_string(p)?)
}

pub fn load_checkpoint(path: &Path) -> Result<MlpPredictor> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("cannot read checkpoint {}: {e}", path.display())))?;
    checkpoint_from_str(&text)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    #[test]
    fn schedule_round_trip_is_bitwise() {
        let s = CoefficientSchedule::power(50, 1.0, 2.0, 0.01, 0.5, VarianceMode::Ddim).unwrap();
        let a = schedule_to_csv(&s).unwrap();
        let back = schedule_from_csv(&a).unwrap();
        assert_eq!(back, s);
        assert_eq!(schedule_to_csv(&back).unwrap(), a);
        assert!(a.starts_with("# eta=5.0000000000000000e-1;variance_mode=ddim\nt,alpha,"));
    }

    #[test]
    fn tampered_schedule_rejected() {
        let s = CoefficientSchedule::power(5, 1.0, 1.0, 1.0, 0.0, VarianceMode::Rddm).unwrap();
        let text = schedule_to_csv(&s).unwrap().replace("\n3,", "\n4,");
        assert!(matches!(schedule_from_csv(&text), Err(Error::Format(_))));
        assert!(schedule_from_csv("t,alpha\n").is_err());
    }

    #[test]
    fn samples_round_trip() {
        let x = RandomStream::new(1).gaussian(&[7, 3]).unwrap();
        assert_eq!(samples_from_csv(&samples_to_csv(&x).unwrap()).unwrap(), x);
    }

    #[test]
    fn trajectory_rows_sorted_by_sample() {
        let mut tw = TrajectoryWriter::new();
        tw.record(0, 10, &Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap());
        tw.record(1, 5, &Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap());
        let text = tw.to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sample_id,step_index,t,dim_0");
        assert!(lines[1].starts_with("0,0,10,1.0"));
        assert!(lines[2].starts_with("0,1,5,3.0"));
        assert!(lines[3].starts_with("1,0,10,2.0"));
    }

    #[test]
    fn pgm_layout() {
        let b = pgm_bytes(&[-1.0, 0.0, 1.0, 5.0], 2).unwrap();
        assert_eq!(&b[..11], b"P5\n2 2\n255\n");
        assert_eq!(&b[11..], &[0, 128, 255, 255]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = MlpConfig { data_dim: 2, embed_dim: 4, hidden: 5, heads: Heads::Double };
        let p = MlpPredictor::new(Mlp::new(cfg, 3).unwrap(), Outputs::Both, TimeCondition::Step).unwrap();
        let text = checkpoint_to_string(&p).unwrap();
        let q = checkpoint_from_str(&text).unwrap();
        assert_eq!(q.model, p.model);
        assert_eq!((q.outputs, q.time), (p.outputs, p.time));
        assert!(checkpoint_from_str(&text.replace("version=1", "version=2")).is_err());
    }

    #[test]
    fn missing_checkpoint_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_checkpoint(&dir.path().join("none.csv")).is_err());
    }
}
