#pragma once

// Competition-based weighting of a few-shot and a zero-shot classifier and
// the per-sample fusion built on it.

#include <optional>
#include <string>
#include <variant>

#include "fuselens/core.hpp"
#include "fuselens/scores.hpp"

namespace fuselens {

// Sigmoid scaling factor. Infinite turns the sigmoid into a step function.
class Alpha {
public:
    explicit Alpha(double value);
    static Alpha infinite();

    bool is_infinite() const { return infinite_; }
    // +inf when infinite.
    double value() const;

    // "inf" or a positive decimal.
    static std::optional<Alpha> parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const Alpha&) const = default;

private:
    Alpha() = default;
    double value_ = 0.0;
    bool infinite_ = true;
};

// Fusion weight s(x) in [0, 1].
class FusionWeight {
public:
    explicit FusionWeight(double value);
    double value() const { return value_; }
    bool operator==(const FusionWeight&) const = default;

private:
    double value_;
};

enum class FusionTarget { Weights, Posteriors };

// Use a single classifier's MSP directly as the fusion weight.
enum class SingleClassifierOverride { UseFsMsp, UseOneMinusZsMsp };

struct DynamicMode {
    bool operator==(const DynamicMode&) const = default;
};
struct StaticMode {
    FusionWeight weight;
    bool operator==(const StaticMode&) const = default;
};
using FusionMode = std::variant<DynamicMode, StaticMode>;

struct FusionConfig {
    ScoreMethod method = ScoreMethod::Entropy;
    Alpha alpha = Alpha(64.0);
    FusionTarget target = FusionTarget::Weights;
    FusionMode mode = DynamicMode{};
    std::optional<SingleClassifierOverride> single_classifier_override;
    EnergyNormalization energy_normalization = EnergyNormalization::Literal;
    // Blend unit-norm rows instead of the raw matrices.
    bool prenormalize_rows = false;
};

std::string_view to_string(FusionTarget target);
std::optional<FusionTarget> parse_fusion_target(std::string_view text);
std::string_view to_string(SingleClassifierOverride o);
std::optional<SingleClassifierOverride> parse_single_classifier_override(std::string_view text);

// Compact one-token description, e.g. "mode=dynamic;method=entropy;alpha=64;target=weights".
std::string describe(const FusionConfig& cfg);

// sigma(alpha * (fs - zs)); with infinite alpha: 1, 0, or 0.5 on an exact tie.
FusionWeight competition_score(const IdScore& ids_fs, const IdScore& ids_zs, Alpha alpha);

FusionWeight single_classifier_weight(const Embedding& x, const ClassifierWeights& few_shot,
                                      const ClassifierWeights& zero_shot,
                                      SingleClassifierOverride mode);

// s * W_fs + (1 - s) * W_zs on the raw matrices (or unit-norm rows when
// `prenormalize_rows`). Both inputs must share shape, class order and tau.
ClassifierWeights fuse_weights(const ClassifierWeights& few_shot,
                               const ClassifierWeights& zero_shot, FusionWeight s,
                               bool prenormalize_rows = false);

Posterior fuse_posteriors(const Posterior& p_fs, const Posterior& p_zs, FusionWeight s);

struct FusedPrediction {
    std::size_t predicted;
    FusionWeight weight;
    Posterior posterior;
};

// Throws InvariantError unless the two classifiers can be fused.
void check_fusable(const ClassifierWeights& few_shot, const ClassifierWeights& zero_shot);

// Reference path: materializes the fused matrix for the sample.
FusedPrediction classify_fused(const Embedding& x, const ClassifierWeights& few_shot,
                               const ClassifierWeights& zero_shot, const FusionConfig& cfg);

// Batch path. Caches per-row norms and fs/zs cross products so the fused
// logits follow from the two source logit vectors in O(N) per sample,
// without building the N x D fused matrix. Agrees with classify_fused.
class FusedClassifierPair {
public:
    FusedClassifierPair(ClassifierWeights few_shot, ClassifierWeights zero_shot,
                        bool prenormalize_rows = false);

    const ClassifierWeights& few_shot() const { return few_shot_; }
    const ClassifierWeights& zero_shot() const { return zero_shot_; }
    std::size_t num_classes() const { return few_shot_.num_classes(); }
    std::size_t dim() const { return few_shot_.dim(); }
    const std::vector<std::string>& class_names() const { return few_shot_.class_names(); }

    FusedPrediction classify(const Embedding& x, const FusionConfig& cfg) const;

private:
    ClassifierWeights few_shot_;
    ClassifierWeights zero_shot_;
    bool prenormalize_rows_;
    std::vector<double> fs_scale_;   // 1 or 1/|w_fs| per row
    std::vector<double> zs_scale_;
    std::vector<double> fs_sq_;      // |scaled w_fs|^2
    std::vector<double> zs_sq_;
    std::vector<double> cross_;      // <scaled w_fs, scaled w_zs>
};

}  // namespace fuselens
