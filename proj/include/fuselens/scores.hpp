#pragma once

// In-distribution (ID) scores. Larger values mean a sample looks more like
// the distribution the classifier was tuned on.

#include <optional>
#include <string_view>

#include "fuselens/core.hpp"

namespace fuselens {

enum class ScoreMethod { MSP, MaxLogit, Energy, Entropy };

// How the log-sum-exp score is normalized.
//   Literal:   tau * lse(o) / (log N + 1/tau), range about [-tau, tau]
//   UnitRange: tau * lse(o) / (tau * log N + 1), range within [-1, 1]
enum class EnergyNormalization { Literal, UnitRange };

std::string_view to_string(ScoreMethod method);
// Case-insensitive: "msp", "maxlogit", "energy", "entropy".
std::optional<ScoreMethod> parse_score_method(std::string_view text);

std::string_view to_string(EnergyNormalization norm);
std::optional<EnergyNormalization> parse_energy_normalization(std::string_view text);

struct IdScore {
    double value = 0.0;
    ScoreMethod method = ScoreMethod::Entropy;
    ClassifierKind classifier_kind = ClassifierKind::FewShot;
};

// max_i p_i, in [1/N, 1].
IdScore msp_score(const Posterior& p, ClassifierKind kind = ClassifierKind::FewShot);

// tau * max_i o_i, i.e. the largest cosine; in [-1, 1].
IdScore maxlogit_score(const LogitVector& o, double temperature,
                       ClassifierKind kind = ClassifierKind::FewShot);

// Negative free energy, tau * log sum_i exp(o_i), normalized per `norm`.
IdScore energy_score(const LogitVector& o, double temperature,
                     EnergyNormalization norm = EnergyNormalization::Literal,
                     ClassifierKind kind = ClassifierKind::FewShot);

// Negative entropy divided by log N; in [-1, 0].
IdScore entropy_score(const Posterior& p, ClassifierKind kind = ClassifierKind::FewShot);

// Score from precomputed logits (the posterior is derived only if needed).
IdScore id_score_from_logits(const LogitVector& o, double temperature, ScoreMethod method,
                             ClassifierKind kind,
                             EnergyNormalization norm = EnergyNormalization::Literal);

IdScore id_score(const Embedding& x, const ClassifierWeights& weights, ScoreMethod method,
                 EnergyNormalization norm = EnergyNormalization::Literal);

// Stable log(sum exp(v)).
double log_sum_exp(std::span<const double> values);

}  // namespace fuselens
