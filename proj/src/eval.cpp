#include "fuselens/eval.hpp"

#include <algorithm>
#include <exception>
#include <ostream>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "fuselens/analysis.hpp"
#include "fuselens/error.hpp"

namespace fuselens {

using ordered_json = nlohmann::ordered_json;

void EvalSet::validate() const {
    if (samples.empty()) throw InvariantError("evaluation set is empty");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& label = samples[i].label();
        if (!label) throw InvariantError(fmt::format("sample {} has no label", i));
        if (*label >= class_names.size()) {
            throw InvariantError(fmt::format("sample {} has label {} but only {} classes", i,
                                             *label, class_names.size()));
        }
    }
}

double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
    if (predictions.size() != labels.size()) throw InvariantError("accuracy: length mismatch");
    if (predictions.empty()) throw InvariantError("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double arithmetic_mean(std::span<const double> values) {
    if (values.empty()) throw InvariantError("arithmetic_mean: empty input");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

SplitResult evaluate_split(const EvalSet& set, const FusedClassifierPair& classifiers,
                           const FusionConfig& cfg, Split tag, const EvalOptions& opts) {
    set.validate();
    if (set.class_names != classifiers.class_names()) {
        throw InvariantError(fmt::format("{} set label space does not match its classifiers",
                                         to_string(tag)));
    }
    const std::size_t n = set.samples.size();
    std::vector<std::size_t> predicted(n);
    std::vector<double> weights(n);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const FusedPrediction p = classifiers.classify(set.samples[i], cfg);
            predicted[i] = p.predicted;
            weights[i] = p.weight.value();
        }
    };

    const std::size_t threads = std::clamp<std::size_t>(opts.threads, 1, std::max<std::size_t>(n, 1));
    if (threads == 1) {
        work(0, n);
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t begin = std::min(n, t * chunk);
            const std::size_t end = std::min(n, begin + chunk);
            pool.emplace_back([&, t, begin, end] {
                try {
                    work(begin, end);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    SplitResult out;
    out.total = n;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = *set.samples[i].label();
        const bool ok = predicted[i] == label;
        out.correct += ok;
        if (opts.trace) {
            const auto& id = set.samples[i].sample_id();
            out.trace.push_back({id ? *id : fmt::format("{}-{:06d}", to_string(tag), i), tag,
                                 weights[i], predicted[i], label, ok});
        }
    }
    out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.total);
    out.predictions = std::move(predicted);
    return out;
}

namespace {

std::unordered_set<std::string> used_class_names(const EvalSet& set) {
    std::unordered_set<std::string> names;
    for (const auto& s : set.samples) names.insert(set.class_names.at(*s.label()));
    return names;
}

}  // namespace

EvalReport base_to_novel_eval(const EvalSet& base, const EvalSet& novel,
                              const FusedClassifierPair& base_pair,
                              const FusedClassifierPair& novel_pair, const FusionConfig& cfg,
                              const EvalOptions& opts) {
    base.validate();
    novel.validate();
    const auto base_names = used_class_names(base);
    for (const auto& name : used_class_names(novel)) {
        if (base_names.count(name)) {
            throw InvariantError("class '" + name + "' appears in both the base and novel sets");
        }
    }
    SplitResult b = evaluate_split(base, base_pair, cfg, Split::Base, opts);
    SplitResult n = evaluate_split(novel, novel_pair, cfg, Split::Novel, opts);

    EvalReport r;
    r.base_correct = b.correct;
    r.base_total = b.total;
    r.novel_correct = n.correct;
    r.novel_total = n.total;
    r.base_accuracy = b.accuracy;
    r.novel_accuracy = n.accuracy;
    r.harmonic_mean = harmonic_mean(r.base_accuracy, r.novel_accuracy);
    r.config = cfg;
    if (opts.trace) {
        r.per_sample = std::move(b.trace);
        r.per_sample.insert(r.per_sample.end(), std::make_move_iterator(n.trace.begin()),
                            std::make_move_iterator(n.trace.end()));
    }
    return r;
}

DomainReport domain_generalization_eval(const EvalSet& source, const std::vector<EvalSet>& targets,
                                        const FusedClassifierPair& classifiers,
                                        const FusionConfig& cfg, const EvalOptions& opts) {
    if (targets.empty()) throw InvariantError("domain generalization needs at least one target set");
    EvalOptions quiet = opts;
    quiet.trace = false;
    DomainReport r;
    r.config = cfg;
    r.source_accuracy = evaluate_split(source, classifiers, cfg, Split::Base, quiet).accuracy;
    for (const auto& t : targets) {
        if (t.class_names != source.class_names) {
            throw InvariantError("target set label space differs from the source set");
        }
        r.target_accuracies.push_back(
            evaluate_split(t, classifiers, cfg, Split::Novel, quiet).accuracy);
    }
    r.target_mean = arithmetic_mean(r.target_accuracies);
    return r;
}

std::vector<Alpha> default_alpha_grid() {
    std::vector<Alpha> out;
    for (double a : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) out.emplace_back(a);
    out.push_back(Alpha::infinite());
    return out;
}

std::vector<double> default_static_weights() { return {0.05, 0.25, 0.5, 0.75, 0.95}; }

namespace {

std::size_t best_of(const std::vector<EvalReport>& reports) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].harmonic_mean > reports[best].harmonic_mean) best = i;
    }
    return best;
}

}  // namespace

SweepResult alpha_sweep(const EvalSet& base, const EvalSet& novel,
                        const FusedClassifierPair& base_pair, const FusedClassifierPair& novel_pair,
                        const FusionConfig& tmpl, const std::vector<Alpha>& alphas,
                        const EvalOptions& opts) {
    if (alphas.empty()) throw InvariantError("alpha_sweep: empty alpha list");
    SweepResult out;
    for (const Alpha& a : alphas) {
        FusionConfig cfg = tmpl;
        cfg.alpha = a;
        cfg.mode = DynamicMode{};
        cfg.single_classifier_override.reset();
        out.reports.push_back(base_to_novel_eval(base, novel, base_pair, novel_pair, cfg, opts));
    }
    out.best_index = best_of(out.reports);
    return out;
}

SweepResult static_sweep(const EvalSet& base, const EvalSet& novel,
                         const FusedClassifierPair& base_pair, const FusedClassifierPair& novel_pair,
                         const FusionConfig& tmpl, const std::vector<double>& weights,
                         const EvalOptions& opts) {
    if (weights.empty()) throw InvariantError("static_sweep: empty weight list");
    SweepResult out;
    for (double w : weights) {
        FusionConfig cfg = tmpl;
        cfg.mode = StaticMode{FusionWeight(w)};
        out.reports.push_back(base_to_novel_eval(base, novel, base_pair, novel_pair, cfg, opts));
    }
    out.best_index = best_of(out.reports);
    return out;
}

namespace {

std::string pct(double fraction) { return fmt::format("{:.2f}", 100.0 * fraction); }

void csv_row(std::ostream& out, const EvalReport& r) {
    out << describe(r.config) << ',' << pct(r.base_accuracy) << ',' << pct(r.novel_accuracy) << ','
        << pct(r.harmonic_mean);
}

ordered_json report_json(const EvalReport& r) {
    ordered_json j{{"config", describe(r.config)},
                   {"base_accuracy", r.base_accuracy},
                   {"novel_accuracy", r.novel_accuracy},
                   {"harmonic_mean", r.harmonic_mean},
                   {"base_correct", r.base_correct},
                   {"base_total", r.base_total},
                   {"novel_correct", r.novel_correct},
                   {"novel_total", r.novel_total}};
    return j;
}

}  // namespace

void write_eval_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
    out << "config,base_acc,novel_acc,H\n";
    for (const auto& r : reports) {
        csv_row(out, r);
        out << '\n';
    }
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
    out << "config,base_acc,novel_acc,H,best\n";
    for (std::size_t i = 0; i < sweep.reports.size(); ++i) {
        csv_row(out, sweep.reports[i]);
        out << ',' << (i == sweep.best_index ? 1 : 0) << '\n';
    }
}

void write_eval_json(std::ostream& out, const std::vector<EvalReport>& reports) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    ordered_json doc{{"kind", "evaluation"}, {"reports", std::move(arr)}};
    out << doc.dump(2) << '\n';
}

void write_sweep_json(std::ostream& out, const SweepResult& sweep, std::string_view kind) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : sweep.reports) arr.push_back(report_json(r));
    ordered_json doc{{"kind", kind},
                     {"best_index", sweep.best_index},
                     {"best_config", describe(sweep.reports.at(sweep.best_index).config)},
                     {"reports", std::move(arr)}};
    out << doc.dump(2) << '\n';
}

void write_trace_csv(std::ostream& out, const std::vector<SampleTrace>& trace) {
    out << "sample_id,split,s,predicted,label,correct\n";
    for (const auto& t : trace) {
        out << fmt::format("{},{},{:.17g},{},{},{}\n", t.sample_id, to_string(t.split), t.weight,
                           t.predicted, t.label, t.correct ? 1 : 0);
    }
}

void write_domain_csv(std::ostream& out, const DomainReport& r,
                      const std::vector<std::string>& target_names) {
    const std::string cfg = describe(r.config);
    out << "config,set,accuracy\n";
    out << cfg << ",source," << pct(r.source_accuracy) << '\n';
    for (std::size_t i = 0; i < r.target_accuracies.size(); ++i) {
        const std::string name = i < target_names.size() ? target_names[i] : fmt::format("target{}", i);
        out << cfg << ',' << name << ',' << pct(r.target_accuracies[i]) << '\n';
    }
    out << cfg << ",target_mean," << pct(r.target_mean) << '\n';
}

void write_domain_json(std::ostream& out, const DomainReport& r,
                       const std::vector<std::string>& target_names) {
    ordered_json targets = ordered_json::array();
    for (std::size_t i = 0; i < r.target_accuracies.size(); ++i) {
        targets.push_back({{"name", i < target_names.size() ? target_names[i] : fmt::format("target{}", i)},
                           {"accuracy", r.target_accuracies[i]}});
    }
    ordered_json doc{{"kind", "domain_generalization"},
                     {"config", describe(r.config)},
                     {"source_accuracy", r.source_accuracy},
                     {"targets", std::move(targets)},
                     {"target_mean", r.target_mean}};
    out << doc.dump(2) << '\n';
}

}  // namespace fuselens
