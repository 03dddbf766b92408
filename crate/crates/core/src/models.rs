//! Architecture catalog, builders, input encoding and thresholded classification.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nnkit::checkpoint::Checkpoint;
use nnkit::init::{rng, SeededRng};
use nnkit::layers::{Activation, ClsPool, Conv1d, Dense, Embedding, EncoderBlock, Flatten, Layer, MaxPool1d};
use nnkit::train::predict;
use nnkit::{Network, Tensor};

use crate::error::{Error, Result};
use crate::textprep::{FeatureVector, TfidfModel, TokenSeq};

pub const CNN_FILTERS: usize = 32;
pub const CNN_KERNEL: usize = 5;
pub const POOL_WINDOW: usize = 2;
pub const HIDDEN_WIDTH: usize = 64;
pub const D_MODEL: usize = 32;
pub const HEADS: usize = 4;
pub const ENCODER_LAYERS: usize = 2;
pub const FF_WIDTH: usize = 64;
pub const MAX_LEN: usize = 48;
pub const DEFAULT_LR: f64 = 1e-3;
pub const THRESHOLD: f64 = 0.5;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
const RESERVED_IDS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Cnn,
    Mlfnn,
    Tinyformer,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Cnn, Family::Mlfnn, Family::Tinyformer];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Cnn => "cnn",
            Family::Mlfnn => "mlfnn",
            Family::Tinyformer => "tinyformer",
        }
    }

    /// Variants in catalog order.
    pub fn variants(self) -> Vec<ArchitectureId> {
        match self {
            Family::Cnn => (1..=3).map(ArchitectureId::Cnn).collect(),
            Family::Mlfnn => (2..=4).map(ArchitectureId::Mlfnn).collect(),
            Family::Tinyformer => (2..=5).map(ArchitectureId::Tinyformer).collect(),
        }
    }

    pub fn uses_tokens(self) -> bool {
        self == Family::Tinyformer
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownArchitecture(s.to_owned()))
    }
}

/// A catalog entry.
///
/// `Cnn(k)`: k conv/pool blocks, k in 1..=3. `Mlfnn(k)`: k dense layers, k in 2..=4.
/// `Tinyformer(r)`: learning rate r·1e-5, r in 2..=5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchitectureId {
    Cnn(u8),
    Mlfnn(u8),
    Tinyformer(u8),
}

impl ArchitectureId {
    pub fn catalog() -> Vec<ArchitectureId> {
        Family::ALL.into_iter().flat_map(Family::variants).collect()
    }

    pub fn family(self) -> Family {
        match self {
            ArchitectureId::Cnn(_) => Family::Cnn,
            ArchitectureId::Mlfnn(_) => Family::Mlfnn,
            ArchitectureId::Tinyformer(_) => Family::Tinyformer,
        }
    }

    /// Position in [`ArchitectureId::catalog`].
    pub fn catalog_index(self) -> usize {
        Self::catalog().iter().position(|&a| a == self).expect("ids are constructed from the catalog")
    }

    pub fn learning_rate(self) -> f64 {
        match self {
            ArchitectureId::Tinyformer(r) => f64::from(r) * 1e-5,
            _ => DEFAULT_LR,
        }
    }

    fn is_valid(self) -> bool {
        match self {
            ArchitectureId::Cnn(k) => (1..=3).contains(&k),
            ArchitectureId::Mlfnn(k) => (2..=4).contains(&k),
            ArchitectureId::Tinyformer(r) => (2..=5).contains(&r),
        }
    }
}

impl fmt::Display for ArchitectureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchitectureId::Cnn(k) => write!(f, "cnn-{k}"),
            ArchitectureId::Mlfnn(k) => write!(f, "mlfnn-{k}"),
            ArchitectureId::Tinyformer(r) => write!(f, "tinyformer-{r}e-5"),
        }
    }
}

impl FromStr for ArchitectureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownArchitecture(s.to_owned());
        let (family, variant) = s.split_once('-').ok_or_else(unknown)?;
        let id = match family {
            "cnn" => ArchitectureId::Cnn(variant.parse().map_err(|_| unknown())?),
            "mlfnn" => ArchitectureId::Mlfnn(variant.parse().map_err(|_| unknown())?),
            "tinyformer" => {
                let r = variant.strip_suffix("e-5").ok_or_else(unknown)?;
                ArchitectureId::Tinyformer(r.parse().map_err(|_| unknown())?)
            }
            _ => return Err(unknown()),
        };
        if id.is_valid() {
            Ok(id)
        } else {
            Err(unknown())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputContract {
    /// A TF-IDF vector of length `dim`.
    TfidfVector { dim: usize },
    /// Exactly `max_len` ids below `vocab_size`.
    TokenIds { vocab_size: usize, max_len: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelInput {
    Features(FeatureVector),
    Tokens(Vec<u32>),
}

impl ModelInput {
    /// Checks the input against `contract` and converts it to the network's input tensor.
    pub fn to_tensor(&self, contract: InputContract) -> Result<Tensor> {
        match (self, contract) {
            (ModelInput::Features(v), InputContract::TfidfVector { dim }) => {
                if v.len() != dim {
                    return Err(Error::Contract(format!("feature vector has length {}, model expects {dim}", v.len())));
                }
                Ok(Tensor::vector(v.values().to_vec()))
            }
            (ModelInput::Tokens(ids), InputContract::TokenIds { vocab_size, max_len }) => {
                if ids.len() != max_len {
                    return Err(Error::Contract(format!("token sequence has length {}, model expects {max_len}", ids.len())));
                }
                if let Some(&bad) = ids.iter().find(|&&id| id as usize >= vocab_size) {
                    return Err(Error::Contract(format!("token id {bad} outside vocabulary of {vocab_size}")));
                }
                Ok(Tensor::vector(ids.iter().map(|&id| f64::from(id)).collect()))
            }
            (ModelInput::Features(_), InputContract::TokenIds { .. }) => {
                Err(Error::Contract("model consumes token ids, got a feature vector".into()))
            }
            (ModelInput::Tokens(_), InputContract::TfidfVector { .. }) => {
                Err(Error::Contract("model consumes a TF-IDF vector, got token ids".into()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInstance {
    pub id: ArchitectureId,
    pub network: Network,
    pub input: InputContract,
}

/// Sequence length after `blocks` conv/pool blocks, or `None` if some block has nothing to pool.
pub fn cnn_output_len(input_len: usize, blocks: usize) -> Option<usize> {
    let mut len = input_len;
    for _ in 0..blocks {
        let conv = len.checked_sub(CNN_KERNEL - 1)?;
        if conv < POOL_WINDOW {
            return None;
        }
        len = (conv - POOL_WINDOW) / POOL_WINDOW + 1;
    }
    Some(len)
}

/// Smallest TF-IDF dimension a `blocks`-deep CNN accepts.
pub fn cnn_min_input(blocks: usize) -> usize {
    (1..).find(|&v| cnn_output_len(v, blocks).is_some()).expect("some length always fits")
}

/// Builds an initialized model. All parameters derive from `seed`.
pub fn build_architecture(id: ArchitectureId, input: InputContract, seed: u64) -> Result<ModelInstance> {
    if !id.is_valid() {
        return Err(Error::UnknownArchitecture(id.to_string()));
    }
    let mut r = rng(seed);
    let layers = match (id, input) {
        (ArchitectureId::Cnn(k), InputContract::TfidfVector { dim }) => cnn_layers(id, usize::from(k), dim, &mut r)?,
        (ArchitectureId::Mlfnn(k), InputContract::TfidfVector { dim }) => {
            if dim == 0 {
                return Err(Error::InputTooShort { id: id.to_string(), minimum: 1, got: 0 });
            }
            mlfnn_layers(usize::from(k), dim, &mut r)
        }
        (ArchitectureId::Tinyformer(_), InputContract::TokenIds { vocab_size, max_len }) => {
            if max_len == 0 || vocab_size <= RESERVED_IDS as usize {
                return Err(Error::Contract(format!(
                    "tinyformer needs max_len >= 1 and a non-empty vocabulary, got max_len {max_len}, vocab {vocab_size}"
                )));
            }
            tinyformer_layers(vocab_size, max_len, &mut r)?
        }
        (ArchitectureId::Tinyformer(_), _) => return Err(Error::Contract(format!("{id} requires token-id input"))),
        (_, _) => return Err(Error::Contract(format!("{id} requires TF-IDF vector input"))),
    };
    Ok(ModelInstance {
        id,
        network: Network::new(layers),
        input,
    })
}

fn cnn_layers(id: ArchitectureId, blocks: usize, dim: usize, r: &mut SeededRng) -> Result<Vec<Layer>> {
    let out_len = cnn_output_len(dim, blocks).ok_or_else(|| Error::InputTooShort {
        id: id.to_string(),
        minimum: cnn_min_input(blocks),
        got: dim,
    })?;
    let mut layers = Vec::new();
    let mut channels = 1;
    for b in 1..=blocks {
        layers.push(Layer::Conv1d(Conv1d::new(&format!("conv{b}"), channels, CNN_FILTERS, CNN_KERNEL, r)));
        layers.push(Layer::MaxPool1d(MaxPool1d {
            window: POOL_WINDOW,
            stride: POOL_WINDOW,
        }));
        channels = CNN_FILTERS;
    }
    layers.push(Layer::Flatten(Flatten));
    layers.push(Layer::Dense(Dense::new("hidden1", out_len * CNN_FILTERS, HIDDEN_WIDTH, Activation::Relu, r)));
    layers.push(Layer::Dense(Dense::new("output", HIDDEN_WIDTH, 1, Activation::Sigmoid, r)));
    Ok(layers)
}

fn mlfnn_layers(dense: usize, dim: usize, r: &mut SeededRng) -> Vec<Layer> {
    let mut layers = Vec::new();
    let mut width = dim;
    for h in 1..dense {
        layers.push(Layer::Dense(Dense::new(&format!("hidden{h}"), width, HIDDEN_WIDTH, Activation::Relu, r)));
        width = HIDDEN_WIDTH;
    }
    layers.push(Layer::Dense(Dense::new("output", width, 1, Activation::Sigmoid, r)));
    layers
}

fn tinyformer_layers(vocab: usize, max_len: usize, r: &mut SeededRng) -> Result<Vec<Layer>> {
    let mut layers = vec![Layer::Embedding(Embedding::new("embed", vocab, max_len, D_MODEL, r).with_pad_id(PAD_ID as usize))];
    for e in 1..=ENCODER_LAYERS {
        layers.push(Layer::Encoder(EncoderBlock::new(&format!("enc{e}"), D_MODEL, HEADS, FF_WIDTH, r)?));
    }
    layers.push(Layer::ClsPool(ClsPool));
    layers.push(Layer::Dense(Dense::new("output", D_MODEL, 1, Activation::Sigmoid, r)));
    Ok(layers)
}

pub fn label_for(probability: f64) -> u8 {
    u8::from(probability >= THRESHOLD)
}

/// Probability of the relevant class and the thresholded label.
pub fn classify(model: &ModelInstance, input: &ModelInput) -> Result<(f64, u8)> {
    let x = input.to_tensor(model.input)?;
    let p = predict(&model.network, &x)?;
    Ok((p, label_for(p)))
}

impl ModelInstance {
    pub fn to_checkpoint(&self, manifest_hash: &str) -> Checkpoint {
        Checkpoint {
            architecture: self.id.to_string(),
            manifest_hash: manifest_hash.to_owned(),
            tensors: self.network.named_tensors(),
        }
    }

    /// Rebuilds the architecture named in `ckpt` for `input` and loads its tensors.
    pub fn from_checkpoint(ckpt: &Checkpoint, input: InputContract) -> Result<Self> {
        let id: ArchitectureId = ckpt.architecture.parse()?;
        let mut model = build_architecture(id, input, 0)?;
        model.network.load_tensors(&ckpt.tensors)?;
        Ok(model)
    }
}

/// Token ids for the transformer, derived from the TF-IDF vocabulary of the fit split.
///
/// Ids 0, 1 and 2 are PAD, UNK and CLS; term `t` gets `index_of(t) + 3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocab {
    ids: HashMap<String, u32>,
}

impl TokenVocab {
    pub fn from_terms<'a>(terms: impl IntoIterator<Item = &'a str>) -> Self {
        let ids = terms
            .into_iter()
            .zip(RESERVED_IDS..)
            .map(|(t, id)| (t.to_owned(), id))
            .collect();
        Self { ids }
    }

    pub fn from_tfidf(model: &TfidfModel) -> Self {
        Self::from_terms(model.terms())
    }

    /// Including the reserved ids.
    pub fn size(&self) -> usize {
        self.ids.len() + RESERVED_IDS as usize
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }
}

/// `[CLS, ids of the first max_len - 1 tokens, PAD...]`, always `max_len` long.
pub fn encode_tokens(doc: &TokenSeq, vocab: &TokenVocab, max_len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(max_len);
    if max_len == 0 {
        return out;
    }
    out.push(CLS_ID);
    out.extend(doc.tokens.iter().take(max_len - 1).map(|t| vocab.id(t)));
    out.resize(max_len, PAD_ID);
    out
}

/// Maps preprocessed documents to the input each family consumes.
#[derive(Debug, Clone)]
pub struct Featurizer {
    tfidf: TfidfModel,
    vocab: TokenVocab,
}

impl Featurizer {
    pub fn new(tfidf: TfidfModel) -> Self {
        let vocab = TokenVocab::from_tfidf(&tfidf);
        Self { tfidf, vocab }
    }

    pub fn tfidf(&self) -> &TfidfModel {
        &self.tfidf
    }

    pub fn vocab(&self) -> &TokenVocab {
        &self.vocab
    }

    pub fn contract(&self, family: Family) -> InputContract {
        if family.uses_tokens() {
            InputContract::TokenIds {
                vocab_size: self.vocab.size(),
                max_len: MAX_LEN,
            }
        } else {
            InputContract::TfidfVector {
                dim: self.tfidf.vocab_size(),
            }
        }
    }

    pub fn input(&self, family: Family, doc: &TokenSeq) -> ModelInput {
        if family.uses_tokens() {
            ModelInput::Tokens(encode_tokens(doc, &self.vocab, MAX_LEN))
        } else {
            ModelInput::Features(self.tfidf.transform(doc))
        }
    }
}
