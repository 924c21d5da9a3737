//! Versioned model container.
//!
//! A plain-text header followed by a binary payload:
//!
//! ```text
//! docseg-model
//! version 1
//! config <key>=<value> ...
//! tasks <n>
//! task <name>            (n lines, head order)
//! target <name>
//! vocab <V>
//! unk | word <s> | pos <s> (V lines, index order)
//! tensors <k>
//! tensor <name> <rows> <cols>   (k lines)
//! payload <bytes>
//! <rows*cols little-endian f64 per tensor, row-major, header order>
//! ```
//!
//! Strings in the header escape `\`, newline and tab as `\\`, `\n`, `\t`.

use std::fs;
use std::path::Path;

use super::ModelParams;
use crate::data::{Symbol, Vocab};
use crate::error::{Error, Result};
use crate::training::TrainingConfig;

pub const MODEL_MAGIC: &str = "docseg-model";
pub const MODEL_VERSION: u32 = 1;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            other => return Err(Error::Format(format!("bad escape `\\{}`", other.unwrap_or(' ')))),
        }
    }
    Ok(out)
}

/// Serializes a model, its vocabulary and its configuration.
pub fn encode_model(model: &ModelParams, vocab: &Vocab, config: &TrainingConfig) -> Result<Vec<u8>> {
    if model.vocab_size() != vocab.len() {
        return Err(Error::Shape(format!(
            "embedding table has {} rows but the vocabulary has {} entries",
            model.vocab_size(),
            vocab.len()
        )));
    }
    let mut header = String::new();
    header.push_str(MODEL_MAGIC);
    header.push('\n');
    header.push_str(&format!("version {MODEL_VERSION}\n"));
    header.push_str(&format!(
        "config iterations={} noise={} dim={} layers={} hidden={} learning_rate={} seed={}\n",
        config.iterations,
        config.noise,
        config.dim,
        config.layers,
        config.hidden,
        config.learning_rate,
        config.seed
    ));
    header.push_str(&format!("tasks {}\n", model.heads.len()));
    for task in model.tasks() {
        header.push_str(&format!("task {}\n", escape(task)));
    }
    header.push_str(&format!("target {}\n", escape(&config.target_task)));
    header.push_str(&format!("vocab {}\n", vocab.len()));
    for sym in vocab.symbols() {
        match sym {
            Symbol::Unk => header.push_str("unk\n"),
            Symbol::Word(w) => header.push_str(&format!("word {}\n", escape(w))),
            Symbol::Pos(p) => header.push_str(&format!("pos {}\n", escape(p))),
        }
    }
    let shapes = model.tensor_shapes();
    header.push_str(&format!("tensors {}\n", shapes.len()));
    let mut payload_len = 0;
    for (name, r, c) in &shapes {
        header.push_str(&format!("tensor {} {r} {c}\n", escape(name)));
        payload_len += r * c * 8;
    }
    header.push_str(&format!("payload {payload_len}\n"));

    let mut bytes = header.into_bytes();
    bytes.reserve(payload_len);
    model.visit_tensors(|_, t| {
        for v in t {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    });
    Ok(bytes)
}

pub fn save_model(
    model: &ModelParams,
    vocab: &Vocab,
    config: &TrainingConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(model, vocab, config)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(ModelParams, Vocab, TrainingConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("model header is truncated".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::Format("model header is not UTF-8".into()))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let line = self.line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v),
            _ if line == key => Ok(""),
            _ => Err(Error::Format(format!("expected `{key}` line, found `{line}`"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| Error::Format(format!("`{key}` expects a count, found `{v}`")))
    }
}

fn parse_config(line: &str) -> Result<TrainingConfig> {
    let mut config = TrainingConfig::default();
    for field in line.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad config field `{field}`")))?;
        let bad = || Error::Format(format!("bad value for config `{k}`: `{v}`"));
        match k {
            "iterations" => config.iterations = v.parse().map_err(|_| bad())?,
            "noise" => config.noise = v.parse().map_err(|_| bad())?,
            "dim" => config.dim = v.parse().map_err(|_| bad())?,
            "layers" => config.layers = v.parse().map_err(|_| bad())?,
            "hidden" => config.hidden = v.parse().map_err(|_| bad())?,
            "learning_rate" => config.learning_rate = v.parse().map_err(|_| bad())?,
            "seed" => config.seed = v.parse().map_err(|_| bad())?,
            _ => return Err(Error::Format(format!("unknown config key `{k}`"))),
        }
    }
    Ok(config)
}

pub fn decode_model(bytes: &[u8]) -> Result<(ModelParams, Vocab, TrainingConfig)> {
    let mut r = HeaderReader { bytes, pos: 0 };
    let magic = r.line()?;
    if magic != MODEL_MAGIC {
        return Err(Error::Format(format!(
            "not a model file: expected `{MODEL_MAGIC}`, found `{magic}`"
        )));
    }
    let version = r.count("version")?;
    if version != MODEL_VERSION as usize {
        return Err(Error::Format(format!(
            "model version mismatch: expected {MODEL_VERSION}, found {version}"
        )));
    }
    let mut config = parse_config(r.keyed("config")?)?;
    let n_tasks = r.count("tasks")?;
    config.tasks = (0..n_tasks)
        .map(|_| unescape(r.keyed("task")?))
        .collect::<Result<_>>()?;
    config.target_task = unescape(r.keyed("target")?)?;

    let v = r.count("vocab")?;
    let mut symbols = Vec::with_capacity(v);
    for _ in 0..v {
        let line = r.line()?;
        let sym = match line.split_once(' ') {
            None if line == "unk" => Symbol::Unk,
            Some(("word", w)) => Symbol::Word(unescape(w)?),
            Some(("pos", p)) => Symbol::Pos(unescape(p)?),
            _ => return Err(Error::Format(format!("bad vocabulary line `{line}`"))),
        };
        symbols.push(sym);
    }
    let vocab = Vocab::from_symbols(symbols)?;
    config.validate_shape().map_err(|e| Error::Format(e.to_string()))?;

    let mut model = ModelParams::zeros(vocab.len(), config.dim, config.hidden, config.layers, &config.tasks);
    let expected = model.tensor_shapes();
    let k = r.count("tensors")?;
    if k != expected.len() {
        return Err(Error::Format(format!(
            "tensor count mismatch: expected {}, found {k}",
            expected.len()
        )));
    }
    for (name, rows, cols) in &expected {
        let line = r.keyed("tensor")?;
        let parts: Vec<&str> = line.rsplitn(3, ' ').collect();
        let [c, rr, n] = parts.as_slice() else {
            return Err(Error::Format(format!("bad tensor line `{line}`")));
        };
        let found_name = unescape(n)?;
        if &found_name != name {
            return Err(Error::Format(format!(
                "tensor order mismatch: expected `{name}`, found `{found_name}`"
            )));
        }
        let shape = (rr.parse::<usize>(), c.parse::<usize>());
        if shape != (Ok(*rows), Ok(*cols)) {
            return Err(Error::Format(format!(
                "shape mismatch for tensor `{name}`: expected {rows}x{cols}, found {rr}x{c}"
            )));
        }
    }
    let payload = r.count("payload")?;
    let data = &bytes[r.pos..];
    let needed: usize = expected.iter().map(|(_, r, c)| r * c * 8).sum();
    if payload != needed {
        return Err(Error::Format(format!(
            "payload size mismatch: expected {needed} bytes, header says {payload}"
        )));
    }
    if data.len() != needed {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {needed} (file truncated or padded)",
            data.len()
        )));
    }
    let mut chunks = data.chunks_exact(8);
    model.visit_tensors_mut(|_, t| {
        for v in t.iter_mut() {
            let chunk = chunks.next().expect("length checked above");
            *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
    });
    Ok((model, vocab, config))
}
