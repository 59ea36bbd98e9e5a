#include "fuselens/cli.hpp"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "fuselens/analysis.hpp"
#include "fuselens/data.hpp"
#include "fuselens/error.hpp"
#include "fuselens/eval.hpp"
#include "fuselens/fusion.hpp"

namespace fuselens::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

std::string one_line(std::string text) {
    for (char& c : text) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return text;
}

void report_error(std::ostream& err, std::string_view kind, const std::string& message) {
    err << "fuselens: error[" << kind << "]: " << one_line(message) << '\n';
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw UsageError("empty element in list '" + text + "'");
        out.push_back(item.substr(b, e - b + 1));
    }
    if (out.empty()) throw UsageError("empty list");
    return out;
}

double parse_double(const std::string& text, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw UsageError(fmt::format("invalid {} '{}'", what, text));
    }
}

// Options shared by every command that classifies samples.
struct FusionArgs {
    std::string method = "entropy";
    std::string alpha = "64";
    std::string target = "weights";
    std::string energy = "literal";
    std::string override_mode;
    std::optional<double> static_weight;
    std::optional<double> temperature;
    bool prenormalize = false;
    unsigned threads = 0;
    std::string format = "csv";

    FusionConfig config() const {
        FusionConfig cfg;
        const auto m = parse_score_method(method);
        if (!m) throw UsageError("unknown score method '" + method + "'");
        cfg.method = *m;
        const auto a = Alpha::parse(alpha);
        if (!a) throw UsageError("invalid alpha '" + alpha + "' (positive number or inf)");
        cfg.alpha = *a;
        const auto t = parse_fusion_target(target);
        if (!t) throw UsageError("unknown fusion target '" + target + "'");
        cfg.target = *t;
        const auto e = parse_energy_normalization(energy);
        if (!e) throw UsageError("unknown energy normalization '" + energy + "'");
        cfg.energy_normalization = *e;
        if (!override_mode.empty()) {
            const auto o = parse_single_classifier_override(override_mode);
            if (!o) throw UsageError("unknown override '" + override_mode + "'");
            cfg.single_classifier_override = *o;
        }
        if (static_weight) cfg.mode = StaticMode{FusionWeight(*static_weight)};
        cfg.prenormalize_rows = prenormalize;
        return cfg;
    }

    EvalOptions options() const {
        EvalOptions opts;
        opts.threads = threads;
        if (opts.threads == 0) {
            opts.threads = 1;
            if (const char* env = std::getenv("FUSELENS_THREADS")) {
                const long n = std::strtol(env, nullptr, 10);
                if (n > 0) opts.threads = static_cast<unsigned>(n);
            }
        }
        return opts;
    }

    bool json() const { return format == "json-doc"; }
};

void add_fusion_options(CLI::App* sub, FusionArgs& a) {
    sub->add_option("--method", a.method, "ID score: msp|maxlogit|energy|entropy")
        ->capture_default_str();
    sub->add_option("--alpha", a.alpha, "sigmoid scaling factor, or inf")->capture_default_str();
    sub->add_option("--target", a.target, "fuse weights|posteriors")->capture_default_str();
    sub->add_option("--static", a.static_weight, "fixed fusion weight in [0, 1]");
    sub->add_option("--override", a.override_mode,
                    "single-classifier weight: fs-msp|one-minus-zs-msp");
    sub->add_option("--energy-normalization", a.energy, "literal|unit-range")
        ->capture_default_str();
    sub->add_flag("--prenormalize-rows", a.prenormalize, "blend unit-norm rows");
    sub->add_option("--temperature", a.temperature, "override every classifier's temperature");
    sub->add_option("--threads", a.threads, "worker threads (default: FUSELENS_THREADS or 1)");
    sub->add_option("--format", a.format, "csv|json-doc")
        ->check(CLI::IsMember({"csv", "json-doc"}))
        ->capture_default_str();
}

struct Loader {
    std::ostream& err;
    std::optional<double> temperature;

    ClassifierWeights classifier(const std::string& path) {
        LoadedClassifier loaded = read_classifier(path);
        if (temperature) {
            const auto& w = loaded.weights;
            return ClassifierWeights(w.num_classes(), w.dim(),
                                     std::vector<double>(w.data().begin(), w.data().end()),
                                     w.class_names(), *temperature, w.kind());
        }
        if (loaded.temperature_defaulted) {
            err << "fuselens: warning: '" << path << "' has no temperature; using "
                << kDefaultTemperature << '\n';
        }
        return std::move(loaded.weights);
    }

    EvalSet set(const std::string& path, const std::vector<std::string>& names) {
        return EvalSet{read_embedding_file(path), names};
    }
};

struct SplitArgs {
    std::string base_emb, novel_emb, fs_weights, zs_weights, novel_fs_weights, novel_zs_weights;
};

void add_split_options(CLI::App* sub, SplitArgs& a) {
    sub->add_option("--base-emb", a.base_emb, "base-split embedding file")->required();
    sub->add_option("--novel-emb", a.novel_emb, "novel-split embedding file")->required();
    sub->add_option("--fs-weights", a.fs_weights, "few-shot classifier (base classes)")->required();
    sub->add_option("--zs-weights", a.zs_weights, "zero-shot classifier (base classes)")->required();
    sub->add_option("--novel-fs-weights", a.novel_fs_weights,
                    "few-shot classifier over novel classes (default: --fs-weights)");
    sub->add_option("--novel-zs-weights", a.novel_zs_weights,
                    "zero-shot classifier over novel classes (default: --zs-weights)");
}

struct LoadedSplits {
    EvalSet base, novel;
    FusedClassifierPair base_pair, novel_pair;
};

LoadedSplits load_splits(const SplitArgs& a, const FusionArgs& f, std::ostream& err) {
    if (a.novel_fs_weights.empty() != a.novel_zs_weights.empty()) {
        throw UsageError("--novel-fs-weights and --novel-zs-weights must be given together");
    }
    Loader load{err, f.temperature};
    FusedClassifierPair base_pair(load.classifier(a.fs_weights), load.classifier(a.zs_weights),
                                  f.prenormalize);
    const bool shared = a.novel_fs_weights.empty();
    FusedClassifierPair novel_pair =
        shared ? base_pair
               : FusedClassifierPair(load.classifier(a.novel_fs_weights),
                                     load.classifier(a.novel_zs_weights), f.prenormalize);
    EvalSet base = load.set(a.base_emb, base_pair.class_names());
    EvalSet novel = load.set(a.novel_emb, novel_pair.class_names());
    return {std::move(base), std::move(novel), std::move(base_pair), std::move(novel_pair)};
}

struct OperatingArgs {
    double p0 = 0, p1 = 0, q0 = 0, q1 = 0, rb = 0, rn = 0;
};

void add_accuracy_options(CLI::App* sub, OperatingArgs& a) {
    sub->add_option("--p0", a.p0, "zero-shot accuracy on base")->required();
    sub->add_option("--p1", a.p1, "few-shot accuracy on base")->required();
    sub->add_option("--q0", a.q0, "zero-shot accuracy on novel")->required();
    sub->add_option("--q1", a.q1, "few-shot accuracy on novel")->required();
}

void add_routing_options(CLI::App* sub, OperatingArgs& a) {
    sub->add_option("--rb", a.rb, "P(base sample routed to few-shot)")->required();
    sub->add_option("--rn", a.rn, "P(novel sample routed to few-shot)")->required();
}

void inspect_file(const std::string& path, std::ostream& out) {
    char magic[8] = {};
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw FormatError("cannot open '" + path + "'");
        in.read(magic, 8);
    }
    out << "field,value\n";
    if (std::memcmp(magic, kEmbeddingMagic, 8) == 0) {
        const auto h = read_embedding_header(path);
        const auto records = read_embeddings(path);
        std::map<std::uint32_t, std::size_t> labels;
        std::map<std::string_view, std::size_t> splits;
        for (const auto& r : records) {
            if (r.label()) ++labels[*r.label()];
            if (r.split()) ++splits[to_string(*r.split())];
        }
        out << "format,binary-embeddings\n";
        out << "dim," << h.dim << "\ncount," << h.count << "\nflags," << h.flags << '\n';
        out << "labels," << ((h.flags & kFlagLabels) ? "yes" : "no") << '\n';
        out << "splits," << ((h.flags & kFlagSplits) ? "yes" : "no") << '\n';
        out << "distinct_labels," << labels.size() << '\n';
        for (const auto& [name, n] : splits) out << "split_" << name << ',' << n << '\n';
        return;
    }
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (!doc.is_discarded() && doc.is_object() && doc.contains("weights")) {
        const LoadedClassifier c = parse_classifier(text);
        const auto& w = c.weights;
        out << "format,classifier\n";
        out << "kind," << to_string(w.kind()) << '\n';
        out << fmt::format("temperature,{:.17g}\n", w.temperature());
        out << "temperature_defaulted," << (c.temperature_defaulted ? "yes" : "no") << '\n';
        out << "num_classes," << w.num_classes() << "\ndim," << w.dim() << '\n';
        return;
    }
    const auto records = read_embeddings_jsonl(path);
    out << "format,jsonl-embeddings\n";
    out << "dim," << records.front().dim() << "\ncount," << records.size() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic fusion of zero-shot and few-shot embedding classifiers", "fuselens"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "expand all help");

    SplitArgs split_args;
    FusionArgs fusion_args;
    std::string trace_path;
    auto* evaluate = app.add_subcommand("evaluate", "base-to-novel evaluation");
    add_split_options(evaluate, split_args);
    add_fusion_options(evaluate, fusion_args);
    evaluate->add_option("--trace", trace_path, "write per-sample trace CSV to this path");

    std::string source_emb;
    std::vector<std::string> target_embs;
    std::string dg_fs, dg_zs;
    auto* domain = app.add_subcommand("domain-eval", "domain generalization evaluation");
    domain->add_option("--source-emb", source_emb, "source-domain embeddings")->required();
    domain->add_option("--target-emb", target_embs, "target-domain embeddings (repeatable)")
        ->required()
        ->take_all();
    domain->add_option("--fs-weights", dg_fs, "few-shot classifier")->required();
    domain->add_option("--zs-weights", dg_zs, "zero-shot classifier")->required();
    add_fusion_options(domain, fusion_args);

    std::string alphas = "0.5,1,2,4,8,16,32,64,128,inf";
    auto* sweep_alpha = app.add_subcommand("sweep-alpha", "evaluate over a list of alphas");
    add_split_options(sweep_alpha, split_args);
    add_fusion_options(sweep_alpha, fusion_args);
    sweep_alpha->add_option("--alphas", alphas, "comma-separated alphas")->capture_default_str();

    std::string weights = "0.05,0.25,0.5,0.75,0.95";
    auto* sweep_static = app.add_subcommand("sweep-static", "evaluate over fixed fusion weights");
    add_split_options(sweep_static, split_args);
    add_fusion_options(sweep_static, fusion_args);
    sweep_static->add_option("--weights", weights, "comma-separated weights")->capture_default_str();

    OperatingArgs op;
    std::string analysis_format = "csv";
    auto add_format = [&](CLI::App* sub) {
        sub->add_option("--format", analysis_format, "csv|json-doc")
            ->check(CLI::IsMember({"csv", "json-doc"}))
            ->capture_default_str();
    };
    auto* analyze = app.add_subcommand("analyze-hmean", "closed-form harmonic mean of a routing classifier");
    add_accuracy_options(analyze, op);
    add_routing_options(analyze, op);
    add_format(analyze);

    std::size_t resolution = 101;
    auto* contour = app.add_subcommand("contour", "harmonic-mean grid over (rb, rn)");
    add_accuracy_options(contour, op);
    contour->add_option("--resolution", resolution, "grid points per axis")->capture_default_str();
    add_format(contour);

    std::uint64_t n_base = 1000000, n_novel = 1000000, seed = 0;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of the harmonic mean");
    add_accuracy_options(simulate, op);
    add_routing_options(simulate, op);
    simulate->add_option("--n-base", n_base, "simulated base samples")->capture_default_str();
    simulate->add_option("--n-novel", n_novel, "simulated novel samples")->capture_default_str();
    simulate->add_option("--seed", seed, "generator seed")->capture_default_str();
    add_format(simulate);

    std::string spec_path, out_dir;
    SyntheticSpec spec;
    auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic base/novel fixture");
    gen->add_option("--spec", spec_path, "JSON synthetic spec (flags override its fields)");
    gen->add_option("--out-dir", out_dir, "output directory")->required();
    gen->add_option("--n-base-classes", spec.n_base_classes);
    gen->add_option("--n-novel-classes", spec.n_novel_classes);
    gen->add_option("--dim", spec.dim);
    gen->add_option("--per-class-count", spec.per_class_count);
    gen->add_option("--class-center-scale", spec.class_center_scale);
    gen->add_option("--noise-scale", spec.noise_scale);
    gen->add_option("--fs-advantage-base", spec.fs_advantage_base);
    gen->add_option("--zs-advantage-novel", spec.zs_advantage_novel);
    gen->add_option("--temperature", spec.temperature);
    gen->add_option("--seed", spec.seed);

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect", "summarize an embedding or classifier file");
    inspect->add_option("file", inspect_path, "file to inspect")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        report_error(err, "usage", e.what());
        return kUsage;
    }

    try {
        if (evaluate->parsed()) {
            const FusionConfig cfg = fusion_args.config();
            EvalOptions opts = fusion_args.options();
            opts.trace = !trace_path.empty();
            LoadedSplits s = load_splits(split_args, fusion_args, err);
            const EvalReport report =
                base_to_novel_eval(s.base, s.novel, s.base_pair, s.novel_pair, cfg, opts);
            if (opts.trace) {
                std::ofstream trace(trace_path);
                if (!trace) throw FormatError("cannot open '" + trace_path + "' for writing");
                write_trace_csv(trace, report.per_sample);
            }
            if (fusion_args.json()) {
                write_eval_json(out, {report});
            } else {
                write_eval_csv(out, {report});
            }
        } else if (domain->parsed()) {
            const FusionConfig cfg = fusion_args.config();
            Loader load{err, fusion_args.temperature};
            FusedClassifierPair pair(load.classifier(dg_fs), load.classifier(dg_zs),
                                     fusion_args.prenormalize);
            EvalSet source = load.set(source_emb, pair.class_names());
            std::vector<EvalSet> targets;
            std::vector<std::string> names;
            for (const auto& p : target_embs) {
                targets.push_back(load.set(p, pair.class_names()));
                names.push_back(fs::path(p).stem().string());
            }
            const DomainReport report =
                domain_generalization_eval(source, targets, pair, cfg, fusion_args.options());
            if (fusion_args.json()) {
                write_domain_json(out, report, names);
            } else {
                write_domain_csv(out, report, names);
            }
        } else if (sweep_alpha->parsed()) {
            const FusionConfig cfg = fusion_args.config();
            std::vector<Alpha> list;
            for (const auto& t : split_list(alphas)) {
                const auto a = Alpha::parse(t);
                if (!a) throw UsageError("invalid alpha '" + t + "'");
                list.push_back(*a);
            }
            LoadedSplits s = load_splits(split_args, fusion_args, err);
            const SweepResult sweep = alpha_sweep(s.base, s.novel, s.base_pair, s.novel_pair, cfg,
                                                  list, fusion_args.options());
            if (fusion_args.json()) {
                write_sweep_json(out, sweep, "alpha_sweep");
            } else {
                write_sweep_csv(out, sweep);
            }
        } else if (sweep_static->parsed()) {
            const FusionConfig cfg = fusion_args.config();
            std::vector<double> list;
            for (const auto& t : split_list(weights)) list.push_back(parse_double(t, "weight"));
            LoadedSplits s = load_splits(split_args, fusion_args, err);
            const SweepResult sweep = static_sweep(s.base, s.novel, s.base_pair, s.novel_pair, cfg,
                                                   list, fusion_args.options());
            if (fusion_args.json()) {
                write_sweep_json(out, sweep, "static_sweep");
            } else {
                write_sweep_csv(out, sweep);
            }
        } else if (analyze->parsed()) {
            const OperatingPoint point{op.p0, op.p1, op.q0, op.q1, op.rb, op.rn};
            const HMeanReport r = proposition_hmean(point);
            if (analysis_format == "json-doc") {
                write_hmean_json(out, point, r);
            } else {
                write_hmean_csv(out, point, r);
            }
        } else if (contour->parsed()) {
            const ContourGrid grid = contour_grid(op.p0, op.p1, op.q0, op.q1, resolution);
            if (analysis_format == "json-doc") {
                write_contour_json(out, grid);
            } else {
                write_contour_csv(out, grid);
            }
        } else if (simulate->parsed()) {
            const OperatingPoint point{op.p0, op.p1, op.q0, op.q1, op.rb, op.rn};
            const MonteCarloReport r = monte_carlo_hmean(point, n_base, n_novel, seed);
            if (analysis_format == "json-doc") {
                write_monte_carlo_json(out, r);
            } else {
                write_monte_carlo_csv(out, r);
            }
        } else if (gen->parsed()) {
            SyntheticSpec effective = spec;
            if (!spec_path.empty()) {
                std::ifstream in(spec_path);
                if (!in) throw FormatError("cannot open '" + spec_path + "'");
                std::stringstream ss;
                ss << in.rdbuf();
                effective = spec_from_json(ss.str());
                // explicit flags win over the file
                auto given = [&](const char* flag) { return gen->count(flag) > 0; };
                if (given("--n-base-classes")) effective.n_base_classes = spec.n_base_classes;
                if (given("--n-novel-classes")) effective.n_novel_classes = spec.n_novel_classes;
                if (given("--dim")) effective.dim = spec.dim;
                if (given("--per-class-count")) effective.per_class_count = spec.per_class_count;
                if (given("--class-center-scale")) effective.class_center_scale = spec.class_center_scale;
                if (given("--noise-scale")) effective.noise_scale = spec.noise_scale;
                if (given("--fs-advantage-base")) effective.fs_advantage_base = spec.fs_advantage_base;
                if (given("--zs-advantage-novel")) effective.zs_advantage_novel = spec.zs_advantage_novel;
                if (given("--temperature")) effective.temperature = spec.temperature;
                if (given("--seed")) effective.seed = spec.seed;
            }
            const SyntheticData data = generate_synthetic(effective);
            const auto paths = write_synthetic(data, out_dir);
            {
                std::ofstream echo(fs::path(out_dir) / "spec.json");
                echo << spec_to_json(effective);
            }
            out << "file,records\n";
            out << paths[0].filename().string() << ',' << data.base.size() << '\n';
            out << paths[1].filename().string() << ',' << data.novel.size() << '\n';
            out << paths[2].filename().string() << ',' << data.fs_base.num_classes() << '\n';
            out << paths[3].filename().string() << ',' << data.zs_base.num_classes() << '\n';
            out << paths[4].filename().string() << ',' << data.fs_novel.num_classes() << '\n';
            out << paths[5].filename().string() << ',' << data.zs_novel.num_classes() << '\n';
            out << "spec.json,1\n";
        } else if (inspect->parsed()) {
            inspect_file(inspect_path, out);
        }
    } catch (const UsageError& e) {
        report_error(err, "usage", e.what());
        return kUsage;
    } catch (const FormatError& e) {
        report_error(err, "format", e.what());
        return kFormat;
    } catch (const InvariantError& e) {
        report_error(err, "invariant", e.what());
        return kInvariant;
    } catch (const fs::filesystem_error& e) {
        report_error(err, "format", e.what());
        return kFormat;
    } catch (const std::exception& e) {
        report_error(err, "runtime", e.what());
        return kRuntime;
    }
    return kOk;
}

}  // namespace fuselens::cli
