#pragma once

// Evaluation protocols over labeled embedding sets: base-to-novel,
// domain generalization, and alpha / static-weight sweeps.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "fuselens/core.hpp"
#include "fuselens/fusion.hpp"

namespace fuselens {

struct EvalSet {
    std::vector<Embedding> samples;
    std::vector<std::string> class_names;

    // Non-empty, every sample labeled, every label in range.
    void validate() const;
};

struct SampleTrace {
    std::string sample_id;
    Split split = Split::Unlabeled;
    double weight = 0.0;
    std::size_t predicted = 0;
    std::size_t label = 0;
    bool correct = false;
};

struct SplitResult {
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
    std::vector<std::size_t> predictions;
    std::vector<SampleTrace> trace;
};

struct EvalReport {
    double base_accuracy = 0.0;
    double novel_accuracy = 0.0;
    double harmonic_mean = 0.0;
    std::size_t base_correct = 0;
    std::size_t base_total = 0;
    std::size_t novel_correct = 0;
    std::size_t novel_total = 0;
    std::vector<SampleTrace> per_sample;
    FusionConfig config;
};

struct EvalOptions {
    bool trace = false;
    // Per-sample work is split into contiguous chunks; results do not depend
    // on the thread count.
    unsigned threads = 1;
};

// Fraction of exact matches. Throws on empty input or length mismatch.
double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

double arithmetic_mean(std::span<const double> values);

SplitResult evaluate_split(const EvalSet& set, const FusedClassifierPair& classifiers,
                           const FusionConfig& cfg, Split tag, const EvalOptions& opts = {});

// Base samples are classified over the base label space with `base_pair`,
// novel samples over the novel label space with `novel_pair` (whose few-shot
// side is the learned context applied to the novel class names).
EvalReport base_to_novel_eval(const EvalSet& base, const EvalSet& novel,
                              const FusedClassifierPair& base_pair,
                              const FusedClassifierPair& novel_pair, const FusionConfig& cfg,
                              const EvalOptions& opts = {});

struct DomainReport {
    double source_accuracy = 0.0;
    std::vector<double> target_accuracies;
    double target_mean = 0.0;
    FusionConfig config;
};

DomainReport domain_generalization_eval(const EvalSet& source, const std::vector<EvalSet>& targets,
                                        const FusedClassifierPair& classifiers,
                                        const FusionConfig& cfg, const EvalOptions& opts = {});

struct SweepResult {
    std::vector<EvalReport> reports;
    // First report with the largest H.
    std::size_t best_index = 0;
};

// {0.5, 1, 2, 4, 8, 16, 32, 64, 128, inf}
std::vector<Alpha> default_alpha_grid();
// {0.05, 0.25, 0.5, 0.75, 0.95}
std::vector<double> default_static_weights();

SweepResult alpha_sweep(const EvalSet& base, const EvalSet& novel,
                        const FusedClassifierPair& base_pair, const FusedClassifierPair& novel_pair,
                        const FusionConfig& tmpl, const std::vector<Alpha>& alphas,
                        const EvalOptions& opts = {});

SweepResult static_sweep(const EvalSet& base, const EvalSet& novel,
                         const FusedClassifierPair& base_pair, const FusedClassifierPair& novel_pair,
                         const FusionConfig& tmpl, const std::vector<double>& weights,
                         const EvalOptions& opts = {});

// Output. Accuracies in CSV are percentages with two decimals.
void write_eval_csv(std::ostream& out, const std::vector<EvalReport>& reports);
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
void write_eval_json(std::ostream& out, const std::vector<EvalReport>& reports);
void write_sweep_json(std::ostream& out, const SweepResult& sweep, std::string_view kind);
void write_trace_csv(std::ostream& out, const std::vector<SampleTrace>& trace);
void write_domain_csv(std::ostream& out, const DomainReport& report,
                      const std::vector<std::string>& target_names);
void write_domain_json(std::ostream& out, const DomainReport& report,
                       const std::vector<std::string>& target_names);

}  // namespace fuselens
