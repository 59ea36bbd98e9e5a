#include "fuselens/fusion.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "detail/strings.hpp"
#include "fuselens/error.hpp"

namespace fuselens {

Alpha::Alpha(double value) : value_(value), infinite_(false) {
    if (std::isinf(value) && value > 0.0) {
        infinite_ = true;
        value_ = 0.0;
        return;
    }
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw InvariantError("alpha must be positive (or infinite)");
    }
}

Alpha Alpha::infinite() { return Alpha(); }

double Alpha::value() const {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
}

std::optional<Alpha> Alpha::parse(std::string_view text) {
    const std::string t = detail::lower(text);
    if (t == "inf" || t == "infinite" || t == "infinity") return Alpha::infinite();
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
    if (!(v > 0.0) || !std::isfinite(v)) return std::nullopt;
    return Alpha(v);
}

std::string Alpha::to_string() const {
    if (infinite_) return "inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value_);
    return std::string(buf, res.ptr);
}

FusionWeight::FusionWeight(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) throw InvariantError("fusion weight must lie in [0, 1]");
}

std::string_view to_string(FusionTarget target) {
    return target == FusionTarget::Weights ? "weights" : "posteriors";
}

std::optional<FusionTarget> parse_fusion_target(std::string_view text) {
    const std::string t = detail::lower(text);
    if (t == "weights") return FusionTarget::Weights;
    if (t == "posteriors") return FusionTarget::Posteriors;
    return std::nullopt;
}

std::string_view to_string(SingleClassifierOverride o) {
    return o == SingleClassifierOverride::UseFsMsp ? "fs-msp" : "one-minus-zs-msp";
}

std::optional<SingleClassifierOverride> parse_single_classifier_override(std::string_view text) {
    const std::string t = detail::lower(text);
    if (t == "fs-msp") return SingleClassifierOverride::UseFsMsp;
    if (t == "one-minus-zs-msp") return SingleClassifierOverride::UseOneMinusZsMsp;
    return std::nullopt;
}

std::string describe(const FusionConfig& cfg) {
    std::string out;
    if (const auto* st = std::get_if<StaticMode>(&cfg.mode)) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), st->weight.value());
        out = "mode=static;s=" + std::string(buf, res.ptr);
    } else if (cfg.single_classifier_override) {
        out = "mode=single;override=" + std::string(to_string(*cfg.single_classifier_override));
    } else {
        out = "mode=dynamic;method=" + std::string(to_string(cfg.method)) +
              ";alpha=" + cfg.alpha.to_string();
        if (cfg.method == ScoreMethod::Energy) {
            out += ";energy=" + std::string(to_string(cfg.energy_normalization));
        }
    }
    out += ";target=" + std::string(to_string(cfg.target));
    if (cfg.prenormalize_rows) out += ";prenormalize";
    return out;
}

FusionWeight competition_score(const IdScore& ids_fs, const IdScore& ids_zs, Alpha alpha) {
    if (ids_fs.method != ids_zs.method) {
        throw InvariantError("competition_score: ID scores come from different methods");
    }
    const double diff = ids_fs.value - ids_zs.value;
    if (alpha.is_infinite()) {
        if (diff > 0.0) return FusionWeight(1.0);
        if (diff < 0.0) return FusionWeight(0.0);
        return FusionWeight(0.5);
    }
    const double z = alpha.value() * diff;
    if (z >= 0.0) return FusionWeight(1.0 / (1.0 + std::exp(-z)));
    const double e = std::exp(z);
    return FusionWeight(e / (1.0 + e));
}

FusionWeight single_classifier_weight(const Embedding& x, const ClassifierWeights& few_shot,
                                      const ClassifierWeights& zero_shot,
                                      SingleClassifierOverride mode) {
    if (mode == SingleClassifierOverride::UseFsMsp) {
        return FusionWeight(msp_score(softmax_posterior(logits(x, few_shot))).value);
    }
    return FusionWeight(1.0 - msp_score(softmax_posterior(logits(x, zero_shot))).value);
}

void check_fusable(const ClassifierWeights& few_shot, const ClassifierWeights& zero_shot) {
    if (few_shot.num_classes() != zero_shot.num_classes() || few_shot.dim() != zero_shot.dim()) {
        throw InvariantError("cannot fuse classifiers of shape " +
                             std::to_string(few_shot.num_classes()) + "x" +
                             std::to_string(few_shot.dim()) + " and " +
                             std::to_string(zero_shot.num_classes()) + "x" +
                             std::to_string(zero_shot.dim()));
    }
    if (few_shot.class_names() != zero_shot.class_names()) {
        throw InvariantError("cannot fuse classifiers with different class order");
    }
    if (few_shot.temperature() != zero_shot.temperature()) {
        throw InvariantError("cannot fuse classifiers with different temperatures");
    }
}

ClassifierWeights fuse_weights(const ClassifierWeights& few_shot,
                               const ClassifierWeights& zero_shot, FusionWeight s,
                               bool prenormalize_rows) {
    check_fusable(few_shot, zero_shot);
    const double a = s.value();
    const double b = 1.0 - a;
    const std::size_t n = few_shot.num_classes();
    const std::size_t d = few_shot.dim();
    std::vector<double> fused(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto fs = few_shot.row(i);
        const auto zs = zero_shot.row(i);
        const double fs_scale = prenormalize_rows ? 1.0 / few_shot.row_norm(i) : 1.0;
        const double zs_scale = prenormalize_rows ? 1.0 / zero_shot.row_norm(i) : 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            fused[i * d + j] = a * (fs[j] * fs_scale) + b * (zs[j] * zs_scale);
        }
    }
    return ClassifierWeights(n, d, std::move(fused), few_shot.class_names(),
                             few_shot.temperature(), ClassifierKind::FewShot);
}

Posterior fuse_posteriors(const Posterior& p_fs, const Posterior& p_zs, FusionWeight s) {
    if (p_fs.size() != p_zs.size()) throw InvariantError("fuse_posteriors: length mismatch");
    const double a = s.value();
    std::vector<double> out(p_fs.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * p_fs[i] + (1.0 - a) * p_zs[i];
    return Posterior(std::move(out));
}

namespace {

// Shared weight selection for both classification paths.
FusionWeight select_weight(const FusionConfig& cfg, const LogitVector& fs_logits,
                           const LogitVector& zs_logits, double temperature) {
    if (const auto* st = std::get_if<StaticMode>(&cfg.mode)) return st->weight;
    if (cfg.single_classifier_override) {
        if (*cfg.single_classifier_override == SingleClassifierOverride::UseFsMsp) {
            return FusionWeight(msp_score(softmax_posterior(fs_logits)).value);
        }
        return FusionWeight(1.0 - msp_score(softmax_posterior(zs_logits)).value);
    }
    const IdScore fs = id_score_from_logits(fs_logits, temperature, cfg.method,
                                            ClassifierKind::FewShot, cfg.energy_normalization);
    const IdScore zs = id_score_from_logits(zs_logits, temperature, cfg.method,
                                            ClassifierKind::ZeroShot, cfg.energy_normalization);
    return competition_score(fs, zs, cfg.alpha);
}

FusedPrediction predict_from_posterior(Posterior posterior, FusionWeight s) {
    const std::size_t k = argmax(posterior.probs());
    return FusedPrediction{k, s, std::move(posterior)};
}

}  // namespace

FusedPrediction classify_fused(const Embedding& x, const ClassifierWeights& few_shot,
                               const ClassifierWeights& zero_shot, const FusionConfig& cfg) {
    check_fusable(few_shot, zero_shot);
    const LogitVector fs_logits = logits(x, few_shot);
    const LogitVector zs_logits = logits(x, zero_shot);
    const FusionWeight s = select_weight(cfg, fs_logits, zs_logits, few_shot.temperature());
    if (cfg.target == FusionTarget::Posteriors) {
        return predict_from_posterior(
            fuse_posteriors(softmax_posterior(fs_logits), softmax_posterior(zs_logits), s), s);
    }
    const ClassifierWeights fused = fuse_weights(few_shot, zero_shot, s, cfg.prenormalize_rows);
    return predict_from_posterior(softmax_posterior(logits(x, fused)), s);
}

FusedClassifierPair::FusedClassifierPair(ClassifierWeights few_shot, ClassifierWeights zero_shot,
                                         bool prenormalize_rows)
    : few_shot_(std::move(few_shot)),
      zero_shot_(std::move(zero_shot)),
      prenormalize_rows_(prenormalize_rows) {
    check_fusable(few_shot_, zero_shot_);
    const std::size_t n = few_shot_.num_classes();
    fs_scale_.resize(n);
    zs_scale_.resize(n);
    fs_sq_.resize(n);
    zs_sq_.resize(n);
    cross_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto fs = few_shot_.row(i);
        const auto zs = zero_shot_.row(i);
        fs_scale_[i] = prenormalize_rows_ ? 1.0 / few_shot_.row_norm(i) : 1.0;
        zs_scale_[i] = prenormalize_rows_ ? 1.0 / zero_shot_.row_norm(i) : 1.0;
        double ff = 0.0, zz = 0.0, fz = 0.0;
        for (std::size_t j = 0; j < fs.size(); ++j) {
            const double a = fs[j] * fs_scale_[i];
            const double b = zs[j] * zs_scale_[i];
            ff += a * a;
            zz += b * b;
            fz += a * b;
        }
        fs_sq_[i] = ff;
        zs_sq_[i] = zz;
        cross_[i] = fz;
    }
}

FusedPrediction FusedClassifierPair::classify(const Embedding& x, const FusionConfig& cfg) const {
    if (x.dim() != dim()) {
        throw InvariantError("embedding dimension " + std::to_string(x.dim()) +
                             " does not match classifier dimension " + std::to_string(dim()));
    }
    if (cfg.prenormalize_rows != prenormalize_rows_) {
        throw InvariantError("classifier pair was built with a different prenormalize setting");
    }
    const std::size_t n = num_classes();
    const double tau = few_shot_.temperature();
    std::vector<double> fs_dot(n), zs_dot(n);
    LogitVector fs_logits, zs_logits;
    fs_logits.values.resize(n);
    zs_logits.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        fs_dot[i] = dot(x.values(), few_shot_.row(i));
        zs_dot[i] = dot(x.values(), zero_shot_.row(i));
        fs_logits.values[i] = cosine_from_parts(fs_dot[i], x.norm(), few_shot_.row_norm(i)) / tau;
        zs_logits.values[i] = cosine_from_parts(zs_dot[i], x.norm(), zero_shot_.row_norm(i)) / tau;
    }
    const FusionWeight s = select_weight(cfg, fs_logits, zs_logits, tau);
    if (cfg.target == FusionTarget::Posteriors) {
        return predict_from_posterior(
            fuse_posteriors(softmax_posterior(fs_logits), softmax_posterior(zs_logits), s), s);
    }
    const double a = s.value();
    const double b = 1.0 - a;
    LogitVector fused;
    fused.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a * (fs_dot[i] * fs_scale_[i]) + b * (zs_dot[i] * zs_scale_[i]);
        const double sq = a * a * fs_sq_[i] + 2.0 * a * b * cross_[i] + b * b * zs_sq_[i];
        if (!(sq > 0.0)) throw InvariantError("fused classifier row has zero norm");
        fused.values[i] = cosine_from_parts(d, x.norm(), std::sqrt(sq)) / tau;
    }
    return predict_from_posterior(softmax_posterior(fused), s);
}

}  // namespace fuselens
