#pragma once

// Domain types and the cosine/temperature classifier shared by the rest of
// the library. All arithmetic is carried out in double precision.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fuselens {

// Logit scale used when a classifier document does not carry a temperature.
inline constexpr double kDefaultTemperature = 0.01;

enum class ClassifierKind { ZeroShot, FewShot };

enum class Split : std::uint8_t { Base = 0, Novel = 1, Unlabeled = 2 };

std::string_view to_string(ClassifierKind kind);
std::optional<ClassifierKind> parse_classifier_kind(std::string_view text);
std::string_view to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

// One encoded sample. Values are finite and the vector has non-zero norm;
// both are checked on construction.
class Embedding {
public:
    explicit Embedding(std::vector<double> values,
                       std::optional<std::uint32_t> label = std::nullopt,
                       std::optional<Split> split = std::nullopt,
                       std::optional<std::string> sample_id = std::nullopt);

    std::span<const double> values() const { return values_; }
    std::size_t dim() const { return values_.size(); }
    double norm() const { return norm_; }

    const std::optional<std::uint32_t>& label() const { return label_; }
    const std::optional<Split>& split() const { return split_; }
    const std::optional<std::string>& sample_id() const { return sample_id_; }

    bool operator==(const Embedding&) const = default;

private:
    std::vector<double> values_;
    double norm_ = 0.0;
    std::optional<std::uint32_t> label_;
    std::optional<Split> split_;
    std::optional<std::string> sample_id_;
};

// N x D weight matrix (row-major, one row per class) plus class names and
// temperature. Row norms are cached at construction.
class ClassifierWeights {
public:
    ClassifierWeights(std::size_t num_classes, std::size_t dim, std::vector<double> weights,
                      std::vector<std::string> class_names, double temperature, ClassifierKind kind);

    static ClassifierWeights from_rows(const std::vector<std::vector<double>>& rows,
                                       std::vector<std::string> class_names, double temperature,
                                       ClassifierKind kind);

    std::size_t num_classes() const { return num_classes_; }
    std::size_t dim() const { return dim_; }
    std::span<const double> row(std::size_t i) const;
    std::span<const double> data() const { return weights_; }
    double row_norm(std::size_t i) const { return row_norms_[i]; }
    const std::vector<std::string>& class_names() const { return class_names_; }
    double temperature() const { return temperature_; }
    ClassifierKind kind() const { return kind_; }

    bool operator==(const ClassifierWeights&) const = default;

private:
    std::size_t num_classes_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> weights_;
    std::vector<double> row_norms_;
    std::vector<std::string> class_names_;
    double temperature_ = kDefaultTemperature;
    ClassifierKind kind_ = ClassifierKind::ZeroShot;
};

// o_i = cos(x, w_i) / tau
struct LogitVector {
    std::vector<double> values;
};

// Probability vector over classes; non-negative and summing to one (1e-9).
class Posterior {
public:
    explicit Posterior(std::vector<double> probs);

    std::span<const double> probs() const { return probs_; }
    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }

private:
    std::vector<double> probs_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

// dot / (norm_a * norm_b) clamped to [-1, 1]. Every cosine in the library
// goes through this so that cached and direct paths agree bit for bit.
inline double cosine_from_parts(double dot_ab, double norm_a, double norm_b) {
    const double c = dot_ab / (norm_a * norm_b);
    return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b);

LogitVector logits(const Embedding& x, const ClassifierWeights& weights);

Posterior softmax_posterior(const LogitVector& logits);

// Index of the largest value; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace fuselens
