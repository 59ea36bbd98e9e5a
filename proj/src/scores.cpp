#include "fuselens/scores.hpp"

#include <algorithm>
#include <cmath>

#include "detail/strings.hpp"
#include "fuselens/error.hpp"

namespace fuselens {

std::string_view to_string(ScoreMethod method) {
    switch (method) {
        case ScoreMethod::MSP: return "msp";
        case ScoreMethod::MaxLogit: return "maxlogit";
        case ScoreMethod::Energy: return "energy";
        case ScoreMethod::Entropy: return "entropy";
    }
    return "entropy";
}

std::optional<ScoreMethod> parse_score_method(std::string_view text) {
    const std::string t = detail::lower(text);
    if (t == "msp") return ScoreMethod::MSP;
    if (t == "maxlogit") return ScoreMethod::MaxLogit;
    if (t == "energy") return ScoreMethod::Energy;
    if (t == "entropy") return ScoreMethod::Entropy;
    return std::nullopt;
}

std::string_view to_string(EnergyNormalization norm) {
    return norm == EnergyNormalization::Literal ? "literal" : "unit-range";
}

std::optional<EnergyNormalization> parse_energy_normalization(std::string_view text) {
    const std::string t = detail::lower(text);
    if (t == "literal") return EnergyNormalization::Literal;
    if (t == "unit-range") return EnergyNormalization::UnitRange;
    return std::nullopt;
}

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) throw InvariantError("log_sum_exp: empty input");
    const double m = *std::max_element(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - m);
    return m + std::log(acc);
}

IdScore msp_score(const Posterior& p, ClassifierKind kind) {
    const auto probs = p.probs();
    return {*std::max_element(probs.begin(), probs.end()), ScoreMethod::MSP, kind};
}

IdScore maxlogit_score(const LogitVector& o, double temperature, ClassifierKind kind) {
    if (o.values.empty()) throw InvariantError("maxlogit_score: empty logits");
    const double m = *std::max_element(o.values.begin(), o.values.end());
    // tau * (c / tau) can round one ulp past the cosine bound
    const double v = std::clamp(temperature * m, -1.0, 1.0);
    return {v, ScoreMethod::MaxLogit, kind};
}

IdScore energy_score(const LogitVector& o, double temperature, EnergyNormalization norm,
                     ClassifierKind kind) {
    const double n = static_cast<double>(o.values.size());
    const double lse = log_sum_exp(o.values);
    double v = 0.0;
    if (norm == EnergyNormalization::Literal) {
        v = temperature * lse / (std::log(n) + 1.0 / temperature);
    } else {
        v = temperature * lse / (temperature * std::log(n) + 1.0);
    }
    return {v, ScoreMethod::Energy, kind};
}

IdScore entropy_score(const Posterior& p, ClassifierKind kind) {
    if (p.size() < 2) throw InvariantError("entropy_score: needs at least 2 classes");
    double acc = 0.0;
    for (double pi : p.probs()) {
        if (pi >= 1e-300) acc += pi * std::log(pi);
    }
    const double v = std::clamp(acc / std::log(static_cast<double>(p.size())), -1.0, 0.0);
    return {v, ScoreMethod::Entropy, kind};
}

IdScore id_score_from_logits(const LogitVector& o, double temperature, ScoreMethod method,
                             ClassifierKind kind, EnergyNormalization norm) {
    switch (method) {
        case ScoreMethod::MSP: return msp_score(softmax_posterior(o), kind);
        case ScoreMethod::MaxLogit: return maxlogit_score(o, temperature, kind);
        case ScoreMethod::Energy: return energy_score(o, temperature, norm, kind);
        case ScoreMethod::Entropy: return entropy_score(softmax_posterior(o), kind);
    }
    throw InvariantError("unknown score method");
}

IdScore id_score(const Embedding& x, const ClassifierWeights& weights, ScoreMethod method,
                 EnergyNormalization norm) {
    return id_score_from_logits(logits(x, weights), weights.temperature(), method, weights.kind(),
                                norm);
}

}  // namespace fuselens
