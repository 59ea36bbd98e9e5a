#include "fuselens/core.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "detail/strings.hpp"
#include "fuselens/error.hpp"

namespace fuselens {

std::string_view to_string(ClassifierKind kind) {
    return kind == ClassifierKind::ZeroShot ? "zero_shot" : "few_shot";
}

std::optional<ClassifierKind> parse_classifier_kind(std::string_view text) {
    const std::string t = detail::lower(text);
    if (t == "zero_shot" || t == "zeroshot" || t == "zs") return ClassifierKind::ZeroShot;
    if (t == "few_shot" || t == "fewshot" || t == "fs") return ClassifierKind::FewShot;
    return std::nullopt;
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Base: return "base";
        case Split::Novel: return "novel";
        case Split::Unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

std::optional<Split> parse_split(std::string_view text) {
    const std::string t = detail::lower(text);
    if (t == "base") return Split::Base;
    if (t == "novel") return Split::Novel;
    if (t == "unlabeled") return Split::Unlabeled;
    return std::nullopt;
}

Embedding::Embedding(std::vector<double> values, std::optional<std::uint32_t> label,
                     std::optional<Split> split, std::optional<std::string> sample_id)
    : values_(std::move(values)),
      label_(label),
      split_(split),
      sample_id_(std::move(sample_id)) {
    if (values_.empty()) throw InvariantError("embedding has dimension 0");
    for (double v : values_) {
        if (!std::isfinite(v)) throw InvariantError("embedding contains a non-finite value");
    }
    norm_ = l2_norm(values_);
    if (!(norm_ > 0.0)) throw InvariantError("embedding has zero norm");
}

ClassifierWeights::ClassifierWeights(std::size_t num_classes, std::size_t dim,
                                     std::vector<double> weights,
                                     std::vector<std::string> class_names, double temperature,
                                     ClassifierKind kind)
    : num_classes_(num_classes),
      dim_(dim),
      weights_(std::move(weights)),
      class_names_(std::move(class_names)),
      temperature_(temperature),
      kind_(kind) {
    if (num_classes_ < 2) throw InvariantError("classifier needs at least 2 classes");
    if (dim_ < 1) throw InvariantError("classifier has dimension 0");
    if (weights_.size() != num_classes_ * dim_) {
        throw InvariantError("classifier matrix size does not match num_classes x dim");
    }
    if (class_names_.size() != num_classes_) {
        throw InvariantError("classifier has " + std::to_string(class_names_.size()) +
                             " class names for " + std::to_string(num_classes_) + " rows");
    }
    if (!(temperature_ > 0.0) || !std::isfinite(temperature_)) {
        throw InvariantError("classifier temperature must be positive and finite");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : class_names_) {
        if (!seen.insert(name).second) throw InvariantError("duplicate class name '" + name + "'");
    }
    for (double v : weights_) {
        if (!std::isfinite(v)) throw InvariantError("classifier contains a non-finite weight");
    }
    row_norms_.resize(num_classes_);
    for (std::size_t i = 0; i < num_classes_; ++i) {
        row_norms_[i] = l2_norm(row(i));
        if (!(row_norms_[i] > 0.0)) {
            throw InvariantError("classifier row " + std::to_string(i) + " has zero norm");
        }
    }
}

ClassifierWeights ClassifierWeights::from_rows(const std::vector<std::vector<double>>& rows,
                                               std::vector<std::string> class_names,
                                               double temperature, ClassifierKind kind) {
    const std::size_t n = rows.size();
    const std::size_t d = n == 0 ? 0 : rows.front().size();
    std::vector<double> flat;
    flat.reserve(n * d);
    for (const auto& r : rows) {
        if (r.size() != d) throw InvariantError("classifier rows have unequal lengths");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return ClassifierWeights(n, d, std::move(flat), std::move(class_names), temperature, kind);
}

std::span<const double> ClassifierWeights::row(std::size_t i) const {
    return std::span<const double>(weights_).subspan(i * dim_, dim_);
}

Posterior::Posterior(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InvariantError("posterior is empty");
    double sum = 0.0;
    for (double p : probs_) {
        if (!std::isfinite(p) || p < 0.0) throw InvariantError("posterior entry outside [0, 1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvariantError("posterior does not sum to 1");
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvariantError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) +
                             " vs " + std::to_string(b.size()) + ")");
    }
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw InvariantError("cosine_similarity: zero-norm input");
    return cosine_from_parts(dot(a, b), na, nb);
}

LogitVector logits(const Embedding& x, const ClassifierWeights& weights) {
    if (x.dim() != weights.dim()) {
        throw InvariantError("logits: embedding dimension " + std::to_string(x.dim()) +
                             " does not match classifier dimension " +
                             std::to_string(weights.dim()));
    }
    LogitVector out;
    out.values.resize(weights.num_classes());
    const double tau = weights.temperature();
    for (std::size_t i = 0; i < weights.num_classes(); ++i) {
        const double c =
            cosine_from_parts(dot(x.values(), weights.row(i)), x.norm(), weights.row_norm(i));
        out.values[i] = c / tau;
    }
    return out;
}

Posterior softmax_posterior(const LogitVector& logits) {
    const auto& o = logits.values;
    if (o.empty()) throw InvariantError("softmax_posterior: empty logits");
    for (double v : o) {
        if (!std::isfinite(v)) throw InvariantError("softmax_posterior: non-finite logit");
    }
    const double m = *std::max_element(o.begin(), o.end());
    std::vector<double> p(o.size());
    double z = 0.0;
    for (std::size_t i = 0; i < o.size(); ++i) {
        p[i] = std::exp(o[i] - m);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return Posterior(std::move(p));
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

}  // namespace fuselens
