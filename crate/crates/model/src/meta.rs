//! Language-conditioned weight generation.
//!
//! A language id is embedded, projected, and fed through per-slot factorized
//! generators W = M' diag(P) M that emit d x d attention projections. Which
//! slots are generated depends on the active scheme; the rest fall back to
//! the static weights.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{AttentionWeightSet, Slot, WeightTag};
use crate::error::{ModelError, Result};
use crate::params::{Bindings, ParamId, ParamStore};
use crate::tape::{Tape, VarId};

/// Weight generation scheme. `None` is the static-weight baseline mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    None,
    Alpha,
    Beta,
    Gamma,
}

impl Scheme {
    /// The slot set whose weights are generated under this scheme.
    pub fn generated_slots(self) -> &'static [Slot] {
        match self {
            Scheme::None => &[],
            Scheme::Alpha => &[Slot::Q, Slot::K, Slot::V],
            Scheme::Beta => &[Slot::RelK, Slot::RelV, Slot::AbsQ, Slot::AbsK],
            Scheme::Gamma => Slot::ALL,
        }
    }

    pub fn generates(self, slot: Slot) -> bool {
        self.generated_slots().contains(&slot)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::Alpha => "alpha",
            Scheme::Beta => "beta",
            Scheme::Gamma => "gamma",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scheme::None),
            "alpha" => Ok(Scheme::Alpha),
            "beta" => Ok(Scheme::Beta),
            "gamma" => Ok(Scheme::Gamma),
            other => Err(ModelError::ConfigError(format!("unknown scheme {other:?}"))),
        }
    }
}

/// The factorized pair (M, M') producing one d x d matrix from a projected
/// language embedding. Parameter count is exactly 2 * d * d_p.
pub struct FactorizedGenerator {
    pub m: ParamId,
    pub m_prime: ParamId,
    pub target_slot: Slot,
    pub d: usize,
    pub d_p: usize,
}

impl FactorizedGenerator {
    pub fn init(
        prefix: &str,
        slot: Slot,
        d: usize,
        d_p: usize,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let m = store.add_glorot(&format!("{prefix}.m"), d_p, d, rng);
        let m_prime = store.add_glorot(&format!("{prefix}.m_prime"), d, d_p, rng);
        FactorizedGenerator { m, m_prime, target_slot: slot, d, d_p }
    }

    pub fn param_count(&self) -> usize {
        2 * self.d * self.d_p
    }

    /// W = M' diag(P) M, realized by scaling the rows of M by P.
    pub fn generate(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
        projected: VarId,
    ) -> Result<VarId> {
        if tape.value(projected).len() != self.d_p {
            return Err(ModelError::DimensionMismatch(format!(
                "projected language embedding has {} entries, generator expects {}",
                tape.value(projected).len(),
                self.d_p
            )));
        }
        let m = bind.bind(tape, store, self.m);
        let mp = bind.bind(tape, store, self.m_prime);
        let p = tape.reshape(projected, &[self.d_p]);
        let scaled = tape.scale_rows(m, p);
        Ok(tape.matmul(mp, scaled))
    }
}

/// Per-layer map from slot to generator, populated according to the scheme.
pub struct GeneratorBank {
    pub generators: Vec<FactorizedGenerator>,
}

impl GeneratorBank {
    pub fn generator_for(&self, slot: Slot) -> Option<&FactorizedGenerator> {
        self.generators.iter().find(|g| g.target_slot == slot)
    }
}

pub struct MetaLearner {
    pub scheme: Scheme,
    pub lang_emb: ParamId,
    pub proj_w: ParamId,
    pub proj_b: ParamId,
    pub banks: Vec<GeneratorBank>,
    pub n_languages: usize,
    pub d_t: usize,
    pub d_p: usize,
    pub d: usize,
}

impl MetaLearner {
    pub fn init(
        scheme: Scheme,
        layers: usize,
        n_languages: usize,
        d_t: usize,
        d_p: usize,
        d: usize,
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let lang_emb = store.add_uniform("meta.lang_emb", &[n_languages, d_t], 0.1, rng);
        let proj_w = store.add_glorot("meta.proj_w", d_t, d_p, rng);
        let proj_b = store.add_zeros("meta.proj_b", &[d_p]);
        let banks = (0..layers)
            .map(|layer| GeneratorBank {
                generators: scheme
                    .generated_slots()
                    .iter()
                    .map(|&slot| {
                        FactorizedGenerator::init(
                            &format!("meta.layer{layer}.{}", slot.key()),
                            slot,
                            d,
                            d_p,
                            store,
                            rng,
                        )
                    })
                    .collect(),
            })
            .collect();
        MetaLearner { scheme, lang_emb, proj_w, proj_b, banks, n_languages, d_t, d_p, d }
    }

    /// P = Projection(T(t)); a (1, d_p) row vector on the tape.
    pub fn project_language(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
        language: usize,
    ) -> Result<VarId> {
        if language >= self.n_languages {
            return Err(ModelError::UnknownLanguage(language));
        }
        let emb = bind.bind(tape, store, self.lang_emb);
        let t = tape.gather_rows(emb, vec![language]);
        let w = bind.bind(tape, store, self.proj_w);
        let b = bind.bind(tape, store, self.proj_b);
        let p = tape.matmul(t, w);
        Ok(tape.add_bias(p, b))
    }

    /// Build the full seven-slot weight set for one layer: generated where
    /// the bank populates the slot, otherwise the provided static weight.
    pub fn weight_set_for(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
        layer: usize,
        projected: VarId,
        static_set: &AttentionWeightSet,
    ) -> Result<AttentionWeightSet> {
        let bank = &self.banks[layer];
        let mut out = static_set.clone();
        for slot in Slot::ALL {
            if let Some(generator) = bank.generator_for(*slot) {
                let w = generator.generate(tape, bind, store, projected)?;
                out.set(*slot, w, WeightTag::Generated);
            }
        }
        Ok(out)
    }
}
