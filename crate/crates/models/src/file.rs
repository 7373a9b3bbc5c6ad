//! Self-describing model container: one JSON header line (kind tag,
//! hyperparameters, shapes) followed by the parameters as little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cnn::{Cnn1d, CnnConfig, Tensor};
use crate::error::{ModelError, Result};
use crate::forest::{ForestModel, Node, Tree};
use crate::knn::KnnModel;
use crate::labels::{from_index, to_index, Label};
use crate::svm::SvmModel;

const FORMAT: &str = "earpipe-model";

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Svm(SvmModel),
    Knn(KnnModel),
    Forest(ForestModel),
    Cnn(Cnn1d),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Svm(_) => "svm",
            Model::Knn(_) => "knn",
            Model::Forest(_) => "rfc",
            Model::Cnn(_) => "cnn",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Header {
    Svm {
        gamma: f64,
        c: f64,
        bias: f64,
        n_support: usize,
        dim: usize,
        iterations: usize,
        converged: bool,
    },
    Knn {
        k: usize,
        n: usize,
        dim: usize,
    },
    Rfc {
        dim: usize,
        /// Node count per tree.
        nodes: Vec<usize>,
    },
    Cnn {
        config: CnnConfig,
        tensors: Vec<(String, Vec<usize>)>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    #[serde(flatten)]
    header: Header,
}

struct Payload(Vec<u8>);

impl Payload {
    fn push(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: usize,
}

impl Reader<'_> {
    fn next(&mut self) -> Result<f64> {
        let end = self.pos + 8;
        if end > self.bytes.len() {
            return Err(ModelError::Format {
                location: format!("byte {}", self.base + self.pos),
                message: "payload ends early".into(),
            });
        }
        let v = f64::from_le_bytes(self.bytes[self.pos..end].try_into().expect("8 bytes"));
        self.pos = end;
        Ok(v)
    }

    fn take(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.next()).collect()
    }

    fn index(&mut self) -> Result<usize> {
        let v = self.next()?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(ModelError::Format {
                location: format!("byte {}", self.base + self.pos - 8),
                message: format!("expected an index, found {v}"),
            });
        }
        Ok(v as usize)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(ModelError::Format {
                location: format!("byte {}", self.base + self.pos),
                message: format!("{} trailing bytes", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    let mut p = Payload(Vec::new());
    let header = match model {
        Model::Svm(m) => {
            for (sv, a) in m.support_vectors.iter().zip(&m.dual_coef) {
                p.push(*a);
                sv.iter().for_each(|v| p.push(*v));
            }
            Header::Svm {
                gamma: m.gamma,
                c: m.c,
                bias: m.bias,
                n_support: m.support_vectors.len(),
                dim: m.dim(),
                iterations: m.iterations,
                converged: m.converged,
            }
        }
        Model::Knn(m) => {
            for (row, l) in m.x.iter().zip(&m.y) {
                p.push(to_index(*l) as f64);
                row.iter().for_each(|v| p.push(*v));
            }
            Header::Knn {
                k: m.k,
                n: m.x.len(),
                dim: m.dim(),
            }
        }
        Model::Forest(f) => {
            // Leaf: 0, count0, count1. Split: 1, feature, threshold, left, right.
            for t in &f.trees {
                for node in &t.nodes {
                    match node {
                        Node::Leaf { counts } => {
                            p.push(0.0);
                            p.push(counts[0] as f64);
                            p.push(counts[1] as f64);
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            p.push(1.0);
                            p.push(*feature as f64);
                            p.push(*threshold);
                            p.push(*left as f64);
                            p.push(*right as f64);
                        }
                    }
                }
            }
            Header::Rfc {
                dim: f.dim,
                nodes: f.trees.iter().map(|t| t.nodes.len()).collect(),
            }
        }
        Model::Cnn(net) => {
            for t in &net.params {
                t.data.iter().for_each(|v| p.push(*v));
            }
            Header::Cnn {
                config: net.cfg.clone(),
                tensors: net.params.iter().map(|t| (t.name.clone(), t.shape.clone())).collect(),
            }
        }
    };
    let env = Envelope {
        format: FORMAT.into(),
        version: 1,
        header,
    };
    let mut bytes = serde_json::to_vec(&env)?;
    bytes.push(b'\n');
    bytes.extend(p.0);
    Ok(bytes)
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| ModelError::Format {
        location: "header".into(),
        message: "missing header line".into(),
    })?;
    let env: Envelope = serde_json::from_slice(&bytes[..nl]).map_err(|e| ModelError::Format {
        location: format!("header column {}", e.column()),
        message: e.to_string(),
    })?;
    if env.format != FORMAT || env.version != 1 {
        return Err(ModelError::Format {
            location: "header".into(),
            message: format!("unsupported format {} v{}", env.format, env.version),
        });
    }
    let mut r = Reader {
        bytes: &bytes[nl + 1..],
        pos: 0,
        base: nl + 1,
    };
    let model = match env.header {
        Header::Svm {
            gamma,
            c,
            bias,
            n_support,
            dim,
            iterations,
            converged,
        } => {
            let mut support_vectors = Vec::with_capacity(n_support);
            let mut dual_coef = Vec::with_capacity(n_support);
            for _ in 0..n_support {
                dual_coef.push(r.next()?);
                support_vectors.push(r.take(dim)?);
            }
            Model::Svm(SvmModel {
                gamma,
                c,
                support_vectors,
                dual_coef,
                bias,
                iterations,
                converged,
            })
        }
        Header::Knn { k, n, dim } => {
            let mut x = Vec::with_capacity(n);
            let mut y: Vec<Label> = Vec::with_capacity(n);
            for _ in 0..n {
                y.push(from_index(r.index()?));
                x.push(r.take(dim)?);
            }
            Model::Knn(KnnModel { k, x, y })
        }
        Header::Rfc { dim, nodes } => {
            let mut trees = Vec::with_capacity(nodes.len());
            for count in nodes {
                let mut list = Vec::with_capacity(count);
                for _ in 0..count {
                    let tag = r.index()?;
                    list.push(if tag == 0 {
                        Node::Leaf {
                            counts: [r.index()?, r.index()?],
                        }
                    } else {
                        let feature = r.index()?;
                        let threshold = r.next()?;
                        let left = r.index()?;
                        let right = r.index()?;
                        if left >= count || right >= count || feature >= dim {
                            return Err(ModelError::Format {
                                location: format!("byte {}", r.base + r.pos),
                                message: "split refers outside its tree".into(),
                            });
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        }
                    });
                }
                trees.push(Tree { nodes: list });
            }
            Model::Forest(ForestModel { trees, dim })
        }
        Header::Cnn { config, tensors } => {
            let mut params = Vec::with_capacity(tensors.len());
            for (name, shape) in tensors {
                let n = shape.iter().product();
                params.push(Tensor {
                    name,
                    shape,
                    data: r.take(n)?,
                });
            }
            Model::Cnn(Cnn1d::from_params(config, params)?)
        }
    };
    r.finish()?;
    Ok(model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, encode(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    decode(&fs::read(path)?)
}
