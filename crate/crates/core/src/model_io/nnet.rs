//! NNET text format.
//!
//! Layout: `//` comments, a header `numLayers,inputSize,outputSize,maxLayerSize`,
//! the layer sizes, an unused flag line, four normalization lines (mins, maxes,
//! means, ranges) and then for every layer its weight rows followed by one bias
//! per line. Hidden layers are ReLU and the output layer is linear unless a
//! comment of the form `// activation <layer> <kind> <params...>` says otherwise.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::ActivationKind;
use crate::network::{Layer, Network, NetworkError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnetError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("cannot normalize: {0}")]
    Normalize(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> NnetError {
    NnetError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnetMetadata {
    pub input_mins: Vec<f64>,
    pub input_maxes: Vec<f64>,
    pub input_means: Vec<f64>,
    pub input_ranges: Vec<f64>,
    pub output_mean: f64,
    pub output_range: f64,
    pub layer_sizes: Vec<usize>,
}

impl NnetMetadata {
    /// Metadata with no clamping and identity normalization.
    pub fn unnormalized(net: &Network) -> Self {
        let n = net.input_dim();
        let mut layer_sizes = vec![n];
        layer_sizes.extend(net.layers().iter().map(|l| l.output_dim()));
        Self {
            input_mins: vec![f64::NEG_INFINITY; n],
            input_maxes: vec![f64::INFINITY; n],
            input_means: vec![0.0; n],
            input_ranges: vec![1.0; n],
            output_mean: 0.0,
            output_range: 1.0,
            layer_sizes,
        }
    }
}

/// Maps a raw input box into the network's normalized coordinates:
/// `(clamp(x, min, max) - mean) / range`.
pub fn normalize_input_box(
    meta: &NnetMetadata,
    lower: &[f64],
    upper: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NnetError> {
    let n = meta.input_means.len();
    if lower.len() != n || upper.len() != n {
        return Err(NnetError::Normalize(format!(
            "box has {}/{} entries, network has {n} inputs",
            lower.len(),
            upper.len()
        )));
    }
    let map = |i: usize, x: f64| -> Result<f64, NnetError> {
        let range = meta.input_ranges[i];
        if range.is_nan() || range <= 0.0 {
            return Err(NnetError::Normalize(format!("input {i} has range {range}")));
        }
        let clamped = x.max(meta.input_mins[i]).min(meta.input_maxes[i]);
        Ok((clamped - meta.input_means[i]) / range)
    };
    let lo = (0..n).map(|i| map(i, lower[i])).collect::<Result<Vec<_>, _>>()?;
    let hi = (0..n).map(|i| map(i, upper[i])).collect::<Result<Vec<_>, _>>()?;
    Ok((lo, hi))
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
    directives: Vec<(usize, Vec<&'a str>)>,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            last: 0,
            directives: Vec::new(),
        }
    }

    /// Next non-blank, non-comment line as `(line_number, text)`.
    fn next(&mut self, what: &str) -> Result<(usize, &'a str), NnetError> {
        for (i, raw) in self.lines.by_ref() {
            self.last = i + 1;
            let line = raw.trim();
            if let Some(comment) = line.strip_prefix("//") {
                let words: Vec<&str> = comment.split_whitespace().collect();
                if words.first() == Some(&"activation") {
                    self.directives.push((i + 1, words[1..].to_vec()));
                }
                continue;
            }
            if !line.is_empty() {
                return Ok((i + 1, line));
            }
        }
        Err(parse_err(self.last + 1, format!("unexpected end of file, expected {what}")))
    }

    fn numbers(&mut self, what: &str, expected: usize) -> Result<(usize, Vec<f64>), NnetError> {
        let (line, text) = self.next(what)?;
        let values = text
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("{what}: `{t}` is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() != expected {
            return Err(parse_err(
                line,
                format!("{what}: expected {expected} values, found {}", values.len()),
            ));
        }
        Ok((line, values))
    }

    fn counts(&mut self, what: &str, expected: usize) -> Result<(usize, Vec<usize>), NnetError> {
        let (line, values) = self.numbers(what, expected)?;
        let counts = values
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(v as usize)
                } else {
                    Err(parse_err(line, format!("{what}: `{v}` is not a count")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((line, counts))
    }
}

fn parse_directive(line: usize, words: &[&str], num_layers: usize) -> Result<(usize, ActivationKind), NnetError> {
    let bad = |msg: String| parse_err(line, msg);
    let (idx, kind, params) = match words {
        [idx, kind, params @ ..] => (idx, kind, params),
        _ => return Err(bad("activation directive needs a layer index and a kind".into())),
    };
    let layer: usize = idx
        .parse()
        .map_err(|_| bad(format!("activation directive: bad layer index `{idx}`")))?;
    if layer >= num_layers {
        return Err(bad(format!(
            "activation directive: layer {layer} out of range (network has {num_layers})"
        )));
    }
    let p = params
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| bad(format!("activation directive: `{t}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let kind = match (kind.to_ascii_lowercase().as_str(), p.as_slice()) {
        ("relu", []) => ActivationKind::Relu,
        ("identity" | "linear", []) => ActivationKind::Identity,
        ("leaky", &[gamma]) => ActivationKind::LeakyRelu { gamma },
        ("hardtanh", []) => ActivationKind::hard_tanh_default(),
        ("hardtanh", &[v_min, v_max]) => ActivationKind::HardTanh { v_min, v_max },
        ("hardsigmoid", &[v_min, v_max]) => ActivationKind::HardSigmoid { v_min, v_max },
        ("unitstep", []) => ActivationKind::unit_step_default(),
        ("unitstep", &[val, r_min, r_max]) => ActivationKind::UnitStep { val, r_min, r_max },
        (k, ps) => {
            return Err(bad(format!(
                "activation directive: unknown kind `{k}` with {} parameters",
                ps.len()
            )))
        }
    };
    kind.validate().map_err(|e| bad(e.to_string()))?;
    Ok((layer, kind))
}

pub fn parse_nnet(text: &str) -> Result<(Network, NnetMetadata), NnetError> {
    let mut r = Reader::new(text);
    let (header_line, header) = r.counts("header", 4)?;
    let [num_layers, input_size, output_size, _max_size] = header[..] else {
        unreachable!()
    };
    if num_layers == 0 {
        return Err(parse_err(header_line, "network must have at least one layer"));
    }
    let (sizes_line, sizes) = r.counts("layer sizes", num_layers + 1)?;
    if sizes[0] != input_size || sizes[num_layers] != output_size {
        return Err(parse_err(
            sizes_line,
            format!(
                "layer sizes start with {} and end with {}, header declares {input_size} inputs and {output_size} outputs",
                sizes[0], sizes[num_layers]
            ),
        ));
    }
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(parse_err(sizes_line, format!("layer size {k} is zero")));
    }
    r.next("flag line")?;
    let (_, mins) = r.numbers("input minimums", input_size)?;
    let (_, maxes) = r.numbers("input maximums", input_size)?;
    let (_, means) = r.numbers("means", input_size + 1)?;
    let (ranges_line, ranges) = r.numbers("ranges", input_size + 1)?;
    if let Some(i) = ranges.iter().position(|&v| v.is_nan() || v <= 0.0) {
        return Err(parse_err(ranges_line, format!("range {i} is not positive")));
    }

    let mut weights = Vec::with_capacity(num_layers);
    let mut biases = Vec::with_capacity(num_layers);
    for k in 0..num_layers {
        let (rows, cols) = (sizes[k + 1], sizes[k]);
        let mut w = Array2::zeros((rows, cols));
        for i in 0..rows {
            let (_, row) = r.numbers(&format!("layer {k} weight row {i}"), cols)?;
            w.row_mut(i).assign(&Array1::from(row));
        }
        let mut b = Array1::zeros(rows);
        for i in 0..rows {
            let (_, v) = r.numbers(&format!("layer {k} bias {i}"), 1)?;
            b[i] = v[0];
        }
        weights.push(w);
        biases.push(b);
    }
    if let Ok((line, _)) = r.next("") {
        return Err(parse_err(line, "unexpected data after the last layer"));
    }

    let mut activations: Vec<ActivationKind> = (0..num_layers)
        .map(|k| {
            if k + 1 == num_layers {
                ActivationKind::Identity
            } else {
                ActivationKind::Relu
            }
        })
        .collect();
    for (line, words) in &r.directives {
        let (layer, kind) = parse_directive(*line, words, num_layers)?;
        activations[layer] = kind;
    }
    let layers = weights
        .into_iter()
        .zip(biases)
        .zip(activations)
        .map(|((w, b), a)| Layer::new(w, b, a))
        .collect();
    let net = Network::new(layers)?;
    let meta = NnetMetadata {
        input_mins: mins,
        input_maxes: maxes,
        input_means: means[..input_size].to_vec(),
        input_ranges: ranges[..input_size].to_vec(),
        output_mean: means[input_size],
        output_range: ranges[input_size],
        layer_sizes: sizes,
    };
    Ok((net, meta))
}

fn directive(kind: &ActivationKind) -> String {
    match *kind {
        ActivationKind::Identity => "identity".into(),
        ActivationKind::Relu => "relu".into(),
        ActivationKind::LeakyRelu { gamma } => format!("leaky {gamma:e}"),
        ActivationKind::HardTanh { v_min, v_max } => format!("hardtanh {v_min:e} {v_max:e}"),
        ActivationKind::HardSigmoid { v_min, v_max } => format!("hardsigmoid {v_min:e} {v_max:e}"),
        ActivationKind::UnitStep { val, r_min, r_max } => format!("unitstep {val:e} {r_min:e} {r_max:e}"),
    }
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::new();
    for v in values {
        let _ = write!(s, "{v:.16e},");
    }
    s
}

/// Serializes `net` so that `parse_nnet` reproduces it bit for bit.
pub fn write_nnet(net: &Network, meta: &NnetMetadata) -> String {
    let layers = net.layers();
    let n = layers.len();
    let mut sizes = vec![net.input_dim()];
    sizes.extend(layers.iter().map(|l| l.output_dim()));
    let mut out = String::from("// written by starreach\n");
    for (k, layer) in layers.iter().enumerate() {
        let default = if k + 1 == n {
            ActivationKind::Identity
        } else {
            ActivationKind::Relu
        };
        if layer.activation != default {
            let _ = writeln!(out, "// activation {k} {}", directive(&layer.activation));
        }
    }
    let max = sizes.iter().copied().max().unwrap_or(0);
    let _ = writeln!(out, "{n},{},{},{max},", net.input_dim(), net.output_dim());
    let _ = writeln!(
        out,
        "{}",
        sizes.iter().map(|s| format!("{s},")).collect::<String>()
    );
    out.push_str("0,\n");
    let _ = writeln!(out, "{}", join(meta.input_mins.iter().copied()));
    let _ = writeln!(out, "{}", join(meta.input_maxes.iter().copied()));
    let _ = writeln!(out, "{}", join(meta.input_means.iter().copied().chain([meta.output_mean])));
    let _ = writeln!(out, "{}", join(meta.input_ranges.iter().copied().chain([meta.output_range])));
    for layer in layers {
        for row in layer.weights.rows() {
            let _ = writeln!(out, "{}", join(row.iter().copied()));
        }
        for &b in &layer.bias {
            let _ = writeln!(out, "{b:.16e},");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;
    use proptest::prelude::*;

    const IDENTITY: &str = "\
// identity network
1,2,2,2,
2,2,
0,
-10,-10,
10,10,
0,0,0,
1,1,1,
1,0,
0,1,
0,
0,
";

    const SMALL: &str = "\
// 2-3-1
2,2,1,3,
2,3,1,
0,
0.0,0.0,
1.0,1.0,
0.0,0.0,0.0,
1.0,1.0,1.0,
1.0,-1.0,
0.5,0.5,
-1.0,2.0,
0.0,
0.1,
-0.1,
1.0,1.0,1.0,
0.0,
";

    #[test]
    fn identity_file() {
        let (net, meta) = parse_nnet(IDENTITY).unwrap();
        assert_eq!(net.layers().len(), 1);
        assert_eq!(net.layers()[0].activation, ActivationKind::Identity);
        for x in [[0.5, 2.0], [3.0, 0.25]] {
            assert_eq!(net.eval(arr1(&x).view()).unwrap(), arr1(&x));
        }
        assert_eq!(meta.input_mins, vec![-10.0, -10.0]);
        assert_eq!(meta.output_range, 1.0);
        assert_eq!(meta.layer_sizes, vec![2, 2]);
    }

    #[test]
    fn small_file_shapes_and_round_trip() {
        let (net, meta) = parse_nnet(SMALL).unwrap();
        let shapes: Vec<_> = net.layers().iter().map(|l| l.weights.dim()).collect();
        assert_eq!(shapes, vec![(3, 2), (1, 3)]);
        assert_eq!(net.layers()[0].activation, ActivationKind::Relu);
        assert_eq!(net.layers()[1].activation, ActivationKind::Identity);
        let text = write_nnet(&net, &meta);
        assert_eq!(parse_nnet(&text).unwrap(), (net, meta));
    }

    #[test]
    fn mismatched_sizes_name_their_line() {
        let bad = SMALL.replace("2,3,1,", "3,3,1,");
        assert_eq!(
            parse_nnet(&bad).unwrap_err(),
            parse_err(
                3,
                "layer sizes start with 3 and end with 1, header declares 2 inputs and 1 outputs"
            )
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = SMALL.replace("0.5,0.5,", "0.5,abc,");
        assert!(matches!(parse_nnet(&bad), Err(NnetError::Parse { line: 10, .. })));
        let short = SMALL.replace("0.5,0.5,", "0.5,");
        assert!(matches!(parse_nnet(&short), Err(NnetError::Parse { line: 10, .. })));
        let truncated: String = SMALL.lines().take(14).map(|l| format!("{l}\n")).collect();
        match parse_nnet(&truncated) {
            Err(NnetError::Parse { line: 15, message }) => assert!(message.contains("end of file")),
            other => panic!("{other:?}"),
        }
        let extra = format!("{SMALL}1.0\n");
        assert!(matches!(parse_nnet(&extra), Err(NnetError::Parse { line: 17, .. })));
        let zero_range = SMALL.replace("1.0,1.0,1.0,\n1.0,-1.0", "1.0,0.0,1.0,\n1.0,-1.0");
        assert!(matches!(parse_nnet(&zero_range), Err(NnetError::Parse { line: 8, .. })));
    }

    #[test]
    fn activation_directives() {
        let text = format!("// activation 0 hardsigmoid -2.5 2.5\n// activation 1 unitstep 0.5 0 1\n{SMALL}");
        let (net, meta) = parse_nnet(&text).unwrap();
        assert_eq!(net.layers()[0].activation, ActivationKind::HardSigmoid { v_min: -2.5, v_max: 2.5 });
        assert_eq!(
            net.layers()[1].activation,
            ActivationKind::UnitStep {
                val: 0.5,
                r_min: 0.0,
                r_max: 1.0
            }
        );
        assert_eq!(parse_nnet(&write_nnet(&net, &meta)).unwrap().0, net);

        for bad in ["// activation 2 relu", "// activation 0 leaky 1.5", "// activation 0 swish", "// activation x relu"] {
            let text = format!("{bad}\n{SMALL}");
            assert!(matches!(parse_nnet(&text), Err(NnetError::Parse { line: 1, .. })), "{bad}");
        }
    }

    #[test]
    fn trailing_commas_and_spaces_are_optional() {
        let plain: String = SMALL
            .lines()
            .map(|l| format!("{}\n", l.trim_end_matches(',').replace(',', ", ")))
            .collect();
        assert_eq!(parse_nnet(&plain).unwrap(), parse_nnet(SMALL).unwrap());
    }

    #[test]
    fn normalization_examples() {
        let (_, mut meta) = parse_nnet(IDENTITY).unwrap();
        let (lo, hi) = normalize_input_box(&meta, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_eq!((lo, hi), (vec![-1.0, -1.0], vec![1.0, 1.0]));
        let (lo, hi) = normalize_input_box(&meta, &[-20.0, 0.0], &[0.0, 30.0]).unwrap();
        assert_eq!((lo, hi), (vec![-10.0, 0.0], vec![0.0, 10.0]));
        meta.input_means = vec![5.0, 5.0];
        meta.input_ranges = vec![2.0, 2.0];
        let (lo, hi) = normalize_input_box(&meta, &[5.0, 5.0], &[9.0, 9.0]).unwrap();
        assert_eq!((lo, hi), (vec![0.0, 0.0], vec![2.0, 2.0]));
        meta.input_ranges[1] = 0.0;
        assert!(matches!(
            normalize_input_box(&meta, &[5.0, 5.0], &[9.0, 9.0]),
            Err(NnetError::Normalize(_))
        ));
    }

    fn any_network() -> impl Strategy<Value = Network> {
        (1usize..4, 1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(a, b, c, depth)| {
            let sizes = [a, b, c, b, a];
            let sizes = sizes[..=depth].to_vec();
            let shapes: Vec<(usize, usize)> = sizes.windows(2).map(|w| (w[1], w[0])).collect();
            shapes
                .into_iter()
                .map(|(r, c)| {
                    (
                        proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, r * c),
                        proptest::collection::vec(-1e6f64..1e6, r),
                    )
                        .prop_map(move |(w, b)| {
                            Layer::new(
                                Array2::from_shape_vec((r, c), w).unwrap(),
                                Array1::from(b),
                                ActivationKind::LeakyRelu { gamma: 0.1 },
                            )
                        })
                })
                .collect::<Vec<_>>()
                .prop_map(|layers| Network::new(layers).unwrap())
        })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(net in any_network()) {
            let meta = NnetMetadata::unnormalized(&net);
            let text = write_nnet(&net, &meta);
            let (back, back_meta) = parse_nnet(&text).unwrap();
            prop_assert_eq!(back, net);
            prop_assert_eq!(back_meta, meta);
        }

        #[test]
        fn normalization_is_monotone(
            a in -50.0f64..50.0, b in -50.0f64..50.0,
            mean in -5.0f64..5.0, range in 0.1f64..10.0,
        ) {
            let meta = NnetMetadata {
                input_mins: vec![-20.0],
                input_maxes: vec![20.0],
                input_means: vec![mean],
                input_ranges: vec![range],
                output_mean: 0.0,
                output_range: 1.0,
                layer_sizes: vec![1, 1],
            };
            let (lo, hi) = normalize_input_box(&meta, &[a.min(b)], &[a.max(b)]).unwrap();
            prop_assert!(lo[0] <= hi[0]);
        }
    }
}
