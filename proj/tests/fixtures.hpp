#pragma once

// Separable-oracle fixture.
//
// K base classes and K novel classes live on orthogonal axes of a 4K-dim
// space; samples are axis vectors plus small Gaussian noise. On each split
// one classifier is "good" (rows are the class axes) and the other is "bad":
//
//   bad row i = bad_norm * (cos_t * e_target(i) + sin_t * u_i)
//
// where u_i is a private axis and target(i) swaps the classes of every other
// pair: (0,1) kept, (2,3) swapped, (4,5) kept, .... The bad classifier is right on the
// unswapped pairs only, and its max cosine (~cos_t) stays below the good
// one's (~1), so MaxLogit scores separate the splits. Under a static weight w
// a swapped class is recovered only when w > bad_norm * cos_t * (1 - w).
//
// Base: few-shot good, zero-shot bad. Novel: the reverse.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "fuselens/core.hpp"
#include "fuselens/eval.hpp"
#include "fuselens/fusion.hpp"

namespace fuselens::testing {

struct SeparableFixture {
    EvalSet base;
    EvalSet novel;
    ClassifierWeights fs_base;
    ClassifierWeights zs_base;
    ClassifierWeights fs_novel;
    ClassifierWeights zs_novel;

    FusedClassifierPair base_pair() const { return FusedClassifierPair(fs_base, zs_base); }
    FusedClassifierPair novel_pair() const { return FusedClassifierPair(fs_novel, zs_novel); }
};

struct SeparableParams {
    std::size_t classes = 10;
    std::size_t per_class = 20;
    double noise = 0.02;
    double cos_t = 0.9;
    double bad_norm = 3.0;
    double tau = kDefaultTemperature;
    std::uint64_t seed = 3;
};

inline std::size_t swapped_target(std::size_t i) {
    const bool swapped = (i / 2) % 2 == 1;
    if (!swapped) return i;
    return i % 2 == 0 ? i + 1 : i - 1;
}

inline SeparableFixture make_separable_fixture(const SeparableParams& p = {}) {
    const std::size_t k = p.classes;
    const std::size_t dim = 4 * k;
    const double sin_t = std::sqrt(1.0 - p.cos_t * p.cos_t);

    auto axis = [&](std::size_t a, double scale = 1.0) {
        std::vector<double> v(dim, 0.0);
        v[a] = scale;
        return v;
    };
    auto good_rows = [&](std::size_t offset) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < k; ++i) rows.push_back(axis(offset + i));
        return rows;
    };
    auto bad_rows = [&](std::size_t offset, std::size_t private_offset) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<double> r(dim, 0.0);
            const std::size_t t = swapped_target(i) < k ? swapped_target(i) : i;
            r[offset + t] = p.bad_norm * p.cos_t;
            r[private_offset + i] = p.bad_norm * sin_t;
            rows.push_back(std::move(r));
        }
        return rows;
    };
    auto names = [&](const std::string& prefix) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < k; ++i) out.push_back(prefix + std::to_string(i));
        return out;
    };

    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> noise(0.0, p.noise);
    auto samples = [&](std::size_t offset, Split split, const std::string& tag) {
        std::vector<Embedding> out;
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t j = 0; j < p.per_class; ++j) {
                std::vector<double> v = axis(offset + c);
                for (double& x : v) x += noise(rng);
                out.emplace_back(std::move(v), static_cast<std::uint32_t>(c), split,
                                 tag + "-" + std::to_string(c * p.per_class + j));
            }
        }
        return out;
    };

    const auto base_names = names("base");
    const auto novel_names = names("novel");
    SeparableFixture f{
        EvalSet{samples(0, Split::Base, "base"), base_names},
        EvalSet{samples(k, Split::Novel, "novel"), novel_names},
        ClassifierWeights::from_rows(good_rows(0), base_names, p.tau, ClassifierKind::FewShot),
        ClassifierWeights::from_rows(bad_rows(0, 2 * k), base_names, p.tau, ClassifierKind::ZeroShot),
        ClassifierWeights::from_rows(bad_rows(k, 3 * k), novel_names, p.tau, ClassifierKind::FewShot),
        ClassifierWeights::from_rows(good_rows(k), novel_names, p.tau, ClassifierKind::ZeroShot),
    };
    return f;
}

}  // namespace fuselens::testing
