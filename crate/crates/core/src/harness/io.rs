use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::MetricsRow;
use crate::nn::{MaskedLayer, MaskedMlp, Mat};
use crate::ppo::{Head, Policy};
use crate::pruning::PruneEvent;

pub const METRICS_HEADER: &str = "episode,return,neurons,weights,flops,p_t,psi_t,wall_time_ms";
pub const PRUNE_LOG_HEADER: &str = "episode,strategy,p_t,psi_t,pruned,survivors,guarded_layers";
pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_MAGIC: &str = "rlprune-model";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn semicolon_list(items: &[usize]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.episode, r.ret, r.neurons, r.weights, r.flops, r.p_t, r.psi_t, r.wall_time_ms
        );
    }
    s
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write(path, &metrics_csv(rows))
}

pub fn prune_log_csv(events: &[PruneEvent]) -> String {
    let mut s = String::from(PRUNE_LOG_HEADER);
    s.push('\n');
    for e in events {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            e.episode,
            e.strategy,
            e.p_t,
            e.psi_t,
            e.pruned,
            semicolon_list(&e.survivors),
            semicolon_list(&e.guarded_layers)
        );
    }
    s
}

pub fn write_prune_log(path: &Path, events: &[PruneEvent]) -> Result<()> {
    write(path, &prune_log_csv(events))
}

/// `|W|` of one layer as CSV: one line per output neuron, one column per input.
pub fn heatmap_csv(net: &MaskedMlp, layer: usize) -> Result<String> {
    let l = net.layers().get(layer).ok_or_else(|| {
        Error::Config(format!(
            "layer {layer} out of range (network has {})",
            net.num_layers()
        ))
    })?;
    Ok(l.weights()
        .to_rows()
        .iter()
        .map(|row| {
            row.iter()
                .map(|w| w.abs().to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n"))
}

pub fn export_heatmap(net: &MaskedMlp, layer: usize, path: &Path) -> Result<()> {
    write(path, &heatmap_csv(net, layer)?)
}

/// Serialises a policy as versioned text. Floats use the shortest representation that
/// parses back to the same bits.
pub fn model_to_string(policy: &Policy) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}");
    match &policy.head {
        Head::Categorical => s.push_str("head categorical\n"),
        Head::Gaussian { log_std } => {
            let vals: Vec<String> = log_std.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "head gaussian {}", vals.join(" "));
        }
    }
    let net = &policy.actor;
    let _ = writeln!(s, "layers {}", net.num_layers());
    for layer in net.layers() {
        let (o, i) = layer.weights().shape();
        let _ = writeln!(s, "layer {o} {i} {}", layer.activation().name());
        let mask: Vec<&str> = layer
            .mask()
            .iter()
            .map(|&m| if m { "1" } else { "0" })
            .collect();
        let _ = writeln!(s, "mask {}", mask.join(" "));
        for row in layer.weights().to_rows() {
            let vals: Vec<String> = row.iter().map(f64::to_string).collect();
            let _ = writeln!(s, "w {}", vals.join(" "));
        }
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next line split into its tag and the remaining fields.
    fn next(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let (n, line) = self
            .inner
            .next()
            .ok_or_else(|| Error::Checkpoint(format!("truncated: expected `{tag}`")))?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(t) if t == tag => Ok(parts.collect()),
            other => Err(Error::Checkpoint(format!(
                "line {}: expected `{tag}`, found `{}`",
                n + 1,
                other.unwrap_or("")
            ))),
        }
    }
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Checkpoint(format!("cannot parse `{s}`")))
}

pub fn model_from_str(text: &str) -> Result<Policy> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let version = lines.next(CHECKPOINT_MAGIC)?;
    let found: u32 = match version.as_slice() {
        [v] if v.starts_with('v') => num(&v[1..])?,
        _ => return Err(Error::Checkpoint("missing version".into())),
    };
    if found != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found,
            expected: CHECKPOINT_VERSION,
        });
    }
    let head_fields = lines.next("head")?;
    let head = match head_fields.split_first() {
        Some((&"categorical", [])) => Head::Categorical,
        Some((&"gaussian", rest)) => Head::Gaussian {
            log_std: rest.iter().map(|v| num(v)).collect::<Result<_>>()?,
        },
        _ => return Err(Error::Checkpoint("unknown head".into())),
    };
    let count: usize = match lines.next("layers")?.as_slice() {
        [n] => num(n)?,
        _ => return Err(Error::Checkpoint("bad `layers` line".into())),
    };
    let mut layers = Vec::with_capacity(count);
    for l in 0..count {
        let (o, i, act) = match lines.next("layer")?.as_slice() {
            [o, i, a] => (num::<usize>(o)?, num::<usize>(i)?, a.parse()?),
            _ => return Err(Error::Checkpoint(format!("bad header for layer {l}"))),
        };
        let mask: Vec<bool> = lines
            .next("mask")?
            .iter()
            .map(|m| match *m {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(Error::Checkpoint(format!("bad mask entry `{other}`"))),
            })
            .collect::<Result<_>>()?;
        if mask.len() != o {
            return Err(Error::Checkpoint(format!(
                "layer {l}: mask has {} entries, expected {o}",
                mask.len()
            )));
        }
        let mut data = Vec::with_capacity(o * i);
        for r in 0..o {
            let row = lines.next("w")?;
            if row.len() != i {
                return Err(Error::Checkpoint(format!(
                    "layer {l} row {r}: {} weights, expected {i}",
                    row.len()
                )));
            }
            for v in row {
                data.push(num(v)?);
            }
        }
        layers.push(MaskedLayer::new(Mat::from_vec(o, i, data)?, mask, act)?);
    }
    lines.next("end")?;
    Policy::new(MaskedMlp::new(layers)?, head)
}

pub fn save_model(policy: &Policy, path: &Path) -> Result<()> {
    write(path, &model_to_string(policy))
}

pub fn load_model(path: &Path) -> Result<Policy> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy(head: Head) -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = MaskedMlp::random(
            &[3, 6, 5, 2],
            Activation::Tanh,
            Activation::Identity,
            &mut rng,
        )
        .unwrap();
        net.set_mask(0, 2, false).unwrap();
        net.zero_neuron_weights(0, 2);
        Policy::new(net, head).unwrap()
    }

    #[test]
    fn heatmap_example() {
        let net = MaskedMlp::new(vec![MaskedLayer::dense(
            Mat::from_rows(&[vec![1.0, -2.0], vec![0.0, 3.0]]).unwrap(),
            Activation::Identity,
        )])
        .unwrap();
        assert_eq!(heatmap_csv(&net, 0).unwrap(), "1,2\n0,3");
        assert!(heatmap_csv(&net, 1).is_err());
    }

    #[test]
    fn metrics_header_and_rows() {
        let rows = vec![MetricsRow {
            episode: 3,
            ret: 500.0,
            neurons: 256,
            weights: 17152,
            flops: 34046.0,
            p_t: 0.5,
            psi_t: 0.25,
            wall_time_ms: 0.0,
        }];
        assert_eq!(
            metrics_csv(&rows),
            format!("{METRICS_HEADER}\n3,500,256,17152,34046,0.5,0.25,0\n")
        );
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        for head in [
            Head::Categorical,
            Head::Gaussian {
                log_std: vec![-0.5, 0.1 + 0.2],
            },
        ] {
            let p = policy(head);
            let back = model_from_str(&model_to_string(&p)).unwrap();
            assert_eq!(back.actor, p.actor);
            assert_eq!(back.head, p.head);
        }
    }

    #[test]
    fn checkpoint_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/model.txt");
        let p = policy(Head::Categorical);
        save_model(&p, &path).unwrap();
        assert_eq!(load_model(&path).unwrap().actor, p.actor);
        assert!(matches!(
            load_model(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let text = model_to_string(&policy(Head::Categorical));
        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            model_from_str(truncated),
            Err(Error::Checkpoint(_))
        ));
        let no_end = text.trim_end().strip_suffix("end").unwrap();
        assert!(model_from_str(no_end).is_err());
        let future = text.replacen("v1", "v2", 1);
        assert!(matches!(
            model_from_str(&future),
            Err(Error::Version {
                found: 2,
                expected: 1
            })
        ));
        let bad_dims = text.replacen("layer 6 3", "layer 6 4", 1);
        assert!(model_from_str(&bad_dims).is_err());
        let bad_mask = text.replacen("mask 1 1 0", "mask 1 0", 1);
        assert!(model_from_str(&bad_mask).is_err());
    }
}
