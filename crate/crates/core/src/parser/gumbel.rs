use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

const U_MIN: f64 = 1e-12;
const U_MAX: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    /// Gumbel-perturbed sampling with a straight-through gradient.
    Train,
    /// Noise-free argmax; no gradient reaches the scores.
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GumbelConfig {
    pub temperature: f64,
    pub mode: SelectMode,
    /// Perturb the probabilities themselves instead of their logarithms.
    pub perturb_probs: bool,
    /// Draw one noise vector per sentence instead of one per layer.
    pub noise_per_sentence: bool,
}

impl Default for GumbelConfig {
    fn default() -> Self {
        GumbelConfig {
            temperature: 1.0,
            mode: SelectMode::Train,
            perturb_probs: false,
            noise_per_sentence: false,
        }
    }
}

impl GumbelConfig {
    pub fn infer() -> Self {
        GumbelConfig {
            mode: SelectMode::Infer,
            ..GumbelConfig::default()
        }
    }

    pub fn with_mode(self, mode: SelectMode) -> Self {
        GumbelConfig { mode, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature > 0.0 && self.temperature.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)))
        }
    }
}

/// `-ln(-ln u)` with `u` clamped away from 0 and 1.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(U_MIN, U_MAX);
    -(-u.ln()).ln()
}

/// `count` standard Gumbel draws.
pub fn gumbel_noise(count: usize, rng: &mut (impl RngCore + ?Sized)) -> Vec<f64> {
    (0..count).map(|_| gumbel_from_uniform(rng.gen::<f64>())).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        // strict comparison keeps the lowest index on ties
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Outcome of one merge selection.
#[derive(Debug, Clone)]
pub struct Selection {
    pub index: usize,
    /// One-hot forward value carrying the relaxed gradient; absent in
    /// inference mode.
    pub weights: Option<Var>,
    /// Relaxed distribution `softmax((base + noise) / τ)`; empty in
    /// inference mode.
    pub relaxed: Vec<f64>,
    pub noise: Vec<f64>,
}

/// Selects over `base` (log-scores, or raw scores with `perturb_probs`)
/// using the given noise.
///
/// `replay` pins the chosen index and the straight-through anchor recorded
/// by an earlier pass; see [`Tape::straight_through`].
pub fn select_with_noise(
    tape: &mut Tape,
    base: Var,
    config: &GumbelConfig,
    noise: &[f64],
    replay: Option<(usize, &[f64])>,
) -> Result<Selection> {
    config.validate()?;
    let m = tape.value(base).len();
    if config.mode == SelectMode::Infer {
        return Ok(Selection {
            index: argmax(tape.value(base)),
            weights: None,
            relaxed: Vec::new(),
            noise: Vec::new(),
        });
    }
    if noise.len() != m {
        return Err(Error::ShapeMismatch {
            op: "gumbel_select",
            left: vec![m],
            right: vec![noise.len()],
        });
    }
    let eps = tape.constant_vec(noise.to_vec())?;
    let perturbed = tape.add(base, eps)?;
    let logits = tape.scale(perturbed, 1.0 / config.temperature)?;
    let p = tape.softmax(logits)?;
    let index = match replay {
        Some((index, _)) => index,
        None => argmax(tape.value(logits)),
    };
    let mut hard = vec![0.0; m];
    hard[index] = 1.0;
    let relaxed = tape.value(p).to_vec();
    let weights = tape.straight_through(p, &hard, replay.map(|(_, anchor)| anchor))?;
    Ok(Selection {
        index,
        weights: Some(weights),
        relaxed,
        noise: noise.to_vec(),
    })
}

/// Straight-through Gumbel selection over a probability vector.
///
/// Train mode: forward value is one-hot at `argmax((ln v + ε) / τ)`, the
/// backward pass uses `softmax((ln v + ε) / τ)`. Infer mode: `argmax(v)`.
pub fn st_gumbel_select(
    tape: &mut Tape,
    scores: Var,
    config: &GumbelConfig,
    rng: &mut (impl RngCore + ?Sized),
) -> Result<Selection> {
    config.validate()?;
    if config.mode == SelectMode::Infer {
        return select_with_noise(tape, scores, config, &[], None);
    }
    let base = if config.perturb_probs { scores } else { tape.log(scores)? };
    let noise = gumbel_noise(tape.value(scores).len(), rng);
    select_with_noise(tape, base, config, &noise, None)
}

/// Noise draws, choices and relaxed distributions of every selection made
/// while encoding, in order. Replaying a trace freezes all randomness and
/// discrete decisions of a forward pass.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub noise: Vec<Vec<f64>>,
    pub choices: Vec<usize>,
    pub relaxed: Vec<Vec<f64>>,
}

enum Source<'a> {
    Sample(&'a mut dyn RngCore),
    Replay { trace: &'a SelectionTrace, cursor: usize },
    None,
}

/// Stateful source of merge decisions for one or more sentences.
pub struct Selector<'a> {
    config: GumbelConfig,
    source: Source<'a>,
    sentence_noise: Option<Vec<f64>>,
    trace: SelectionTrace,
}

impl<'a> Selector<'a> {
    /// Samples fresh noise from `rng` (train mode) or takes the argmax
    /// (infer mode).
    pub fn sampling(config: GumbelConfig, rng: &'a mut dyn RngCore) -> Self {
        Selector {
            config,
            source: Source::Sample(rng),
            sentence_noise: None,
            trace: SelectionTrace::default(),
        }
    }

    /// Deterministic argmax selection.
    pub fn inference() -> Self {
        Selector {
            config: GumbelConfig::infer(),
            source: Source::None,
            sentence_noise: None,
            trace: SelectionTrace::default(),
        }
    }

    /// Re-runs the selections recorded in `trace`, turning each
    /// straight-through node into a smooth surrogate around the recorded
    /// point.
    pub fn replay(config: GumbelConfig, trace: &'a SelectionTrace) -> Self {
        Selector {
            config,
            source: Source::Replay { trace, cursor: 0 },
            sentence_noise: None,
            trace: SelectionTrace::default(),
        }
    }

    pub fn config(&self) -> &GumbelConfig {
        &self.config
    }

    /// Called before each sentence with its first-layer candidate count.
    pub fn begin_sentence(&mut self, candidates: usize) {
        self.sentence_noise = None;
        if self.config.mode == SelectMode::Train && self.config.noise_per_sentence {
            if let Source::Sample(rng) = &mut self.source {
                self.sentence_noise = Some(gumbel_noise(candidates, &mut **rng));
            }
        }
    }

    /// Picks one candidate given its validity logits `q · h`.
    pub fn select(&mut self, tape: &mut Tape, logits: Var) -> Result<Selection> {
        self.config.validate()?;
        let m = tape.value(logits).len();
        if self.config.mode == SelectMode::Infer {
            return select_with_noise(tape, logits, &self.config, &[], None);
        }
        let base = if self.config.perturb_probs {
            tape.softmax(logits)?
        } else {
            tape.log_softmax(logits)?
        };
        let selection = match &mut self.source {
            Source::Sample(rng) => {
                let noise = match &self.sentence_noise {
                    Some(n) if n.len() >= m => n[..m].to_vec(),
                    _ => gumbel_noise(m, &mut **rng),
                };
                select_with_noise(tape, base, &self.config, &noise, None)?
            }
            Source::Replay { trace, cursor } => {
                let k = *cursor;
                *cursor += 1;
                let (noise, choice, anchor) = match (trace.noise.get(k), trace.choices.get(k), trace.relaxed.get(k)) {
                    (Some(n), Some(c), Some(a)) => (n, *c, a),
                    _ => return Err(Error::Input(format!("selection trace exhausted at step {k}"))),
                };
                select_with_noise(tape, base, &self.config, noise, Some((choice, anchor)))?
            }
            Source::None => {
                let zero = vec![0.0; m];
                select_with_noise(tape, base, &self.config, &zero, None)?
            }
        };
        self.trace.noise.push(selection.noise.clone());
        self.trace.choices.push(selection.index);
        self.trace.relaxed.push(selection.relaxed.clone());
        Ok(selection)
    }

    pub fn trace(&self) -> &SelectionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SelectionTrace {
        self.trace
    }
}
