#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fuselens/analysis.hpp"
#include "fuselens/core.hpp"
#include "fuselens/data.hpp"
#include "fuselens/error.hpp"
#include "fuselens/eval.hpp"
#include "fuselens/fusion.hpp"
#include "fuselens/scores.hpp"

namespace py = pybind11;
using namespace fuselens;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <class E, class Parse>
E enum_arg(const std::string& text, Parse parse, const char* what) {
    const auto v = parse(text);
    if (!v) throw py::value_error(std::string("unknown ") + what + " '" + text + "'");
    return *v;
}

std::vector<double> to_vector(const DoubleArray& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

py::array_t<double> to_array(std::span<const double> v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

ClassifierWeights make_classifier(const DoubleArray& w, std::vector<std::string> names,
                                  double temperature, const std::string& kind) {
    if (w.ndim() != 2) throw py::value_error("weights must be a 2-d array (classes x dim)");
    return ClassifierWeights(static_cast<std::size_t>(w.shape(0)), static_cast<std::size_t>(w.shape(1)),
                             std::vector<double>(w.data(), w.data() + w.size()), std::move(names),
                             temperature, enum_arg<ClassifierKind>(kind, parse_classifier_kind, "kind"));
}

Alpha alpha_arg(const py::object& a) {
    if (py::isinstance<py::str>(a)) {
        const auto parsed = Alpha::parse(a.cast<std::string>());
        if (!parsed) throw py::value_error("alpha must be positive or 'inf'");
        return *parsed;
    }
    return Alpha(a.cast<double>());
}

FusionConfig make_config(const std::string& method, const py::object& alpha, const std::string& target,
                         std::optional<double> static_weight, std::optional<std::string> override_mode,
                         const std::string& energy_normalization, bool prenormalize_rows) {
    FusionConfig cfg;
    cfg.method = enum_arg<ScoreMethod>(method, parse_score_method, "method");
    cfg.alpha = alpha_arg(alpha);
    cfg.target = enum_arg<FusionTarget>(target, parse_fusion_target, "target");
    if (static_weight) cfg.mode = StaticMode{FusionWeight(*static_weight)};
    if (override_mode) {
        cfg.single_classifier_override = enum_arg<SingleClassifierOverride>(
            *override_mode, parse_single_classifier_override, "override");
    }
    cfg.energy_normalization =
        enum_arg<EnergyNormalization>(energy_normalization, parse_energy_normalization, "energy normalization");
    cfg.prenormalize_rows = prenormalize_rows;
    return cfg;
}

py::dict hmean_dict(const HMeanReport& r) {
    py::dict d;
    d["base_accuracy"] = r.base_accuracy;
    d["novel_accuracy"] = r.novel_accuracy;
    d["harmonic_mean"] = r.harmonic_mean;
    return d;
}

py::dict report_dict(const EvalReport& r) {
    py::dict d = hmean_dict({r.base_accuracy, r.novel_accuracy, r.harmonic_mean});
    d["base_correct"] = r.base_correct;
    d["base_total"] = r.base_total;
    d["novel_correct"] = r.novel_correct;
    d["novel_total"] = r.novel_total;
    d["config"] = describe(r.config);
    return d;
}

EvalSet make_set(std::vector<Embedding> samples, const ClassifierWeights& w) {
    return EvalSet{std::move(samples), w.class_names()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dynamic fusion of zero-shot and few-shot embedding classifiers";

    auto base_error = py::register_exception<Error>(m, "Error", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", base_error.ptr());
    py::register_exception<InvariantError>(m, "InvariantError", base_error.ptr());

    m.attr("DEFAULT_TEMPERATURE") = kDefaultTemperature;

    py::class_<Embedding>(m, "Embedding")
        .def(py::init([](const DoubleArray& values, std::optional<std::uint32_t> label,
                         std::optional<std::string> split, std::optional<std::string> sample_id) {
                 std::optional<Split> s;
                 if (split) s = enum_arg<Split>(*split, parse_split, "split");
                 return Embedding(to_vector(values), label, s, std::move(sample_id));
             }),
             py::arg("values"), py::arg("label") = py::none(), py::arg("split") = py::none(),
             py::arg("sample_id") = py::none())
        .def_property_readonly("values", [](const Embedding& e) { return to_array(e.values()); })
        .def_property_readonly("dim", &Embedding::dim)
        .def_property_readonly("norm", &Embedding::norm)
        .def_property_readonly("label", [](const Embedding& e) { return e.label(); })
        .def_property_readonly("split", [](const Embedding& e) -> std::optional<std::string> {
            if (!e.split()) return std::nullopt;
            return std::string(to_string(*e.split()));
        })
        .def_property_readonly("sample_id", [](const Embedding& e) { return e.sample_id(); })
        .def("__eq__", [](const Embedding& a, const Embedding& b) { return a == b; })
        .def("__repr__", [](const Embedding& e) { return "<Embedding dim=" + std::to_string(e.dim()) + ">"; });

    py::class_<ClassifierWeights>(m, "ClassifierWeights")
        .def(py::init(&make_classifier), py::arg("weights"), py::arg("class_names"),
             py::arg("temperature") = kDefaultTemperature, py::arg("kind") = "few_shot")
        .def_property_readonly("weights", [](const ClassifierWeights& w) {
            py::array_t<double> out({static_cast<py::ssize_t>(w.num_classes()), static_cast<py::ssize_t>(w.dim())});
            std::copy(w.data().begin(), w.data().end(), out.mutable_data());
            return out;
        })
        .def_property_readonly("num_classes", &ClassifierWeights::num_classes)
        .def_property_readonly("dim", &ClassifierWeights::dim)
        .def_property_readonly("class_names", &ClassifierWeights::class_names)
        .def_property_readonly("temperature", &ClassifierWeights::temperature)
        .def_property_readonly("kind", [](const ClassifierWeights& w) { return std::string(to_string(w.kind())); })
        .def("__eq__", [](const ClassifierWeights& a, const ClassifierWeights& b) { return a == b; });

    py::class_<FusionConfig>(m, "FusionConfig")
        .def(py::init(&make_config), py::arg("method") = "entropy", py::arg("alpha") = py::float_(64.0),
             py::arg("target") = "weights", py::arg("static_weight") = py::none(),
             py::arg("override") = py::none(), py::arg("energy_normalization") = "literal",
             py::arg("prenormalize_rows") = false)
        .def("describe", &describe)
        .def("__repr__", [](const FusionConfig& c) { return "<FusionConfig " + describe(c) + ">"; });

    m.def("cosine_similarity", [](const DoubleArray& a, const DoubleArray& b) {
        return cosine_similarity(to_vector(a), to_vector(b));
    });
    m.def("logits", [](const Embedding& x, const ClassifierWeights& w) { return to_array(logits(x, w).values); });
    m.def("posterior", [](const Embedding& x, const ClassifierWeights& w) {
        return to_array(softmax_posterior(logits(x, w)).probs());
    });
    m.def("softmax", [](const DoubleArray& o) { return to_array(softmax_posterior({to_vector(o)}).probs()); });
    m.def(
        "id_score",
        [](const Embedding& x, const ClassifierWeights& w, const std::string& method, const std::string& norm) {
            return id_score(x, w, enum_arg<ScoreMethod>(method, parse_score_method, "method"),
                            enum_arg<EnergyNormalization>(norm, parse_energy_normalization, "energy normalization"))
                .value;
        },
        py::arg("x"), py::arg("weights"), py::arg("method") = "entropy", py::arg("energy_normalization") = "literal");
    m.def(
        "competition_score",
        [](double ids_fs, double ids_zs, const py::object& alpha) {
            return competition_score({ids_fs, ScoreMethod::Entropy, ClassifierKind::FewShot},
                                     {ids_zs, ScoreMethod::Entropy, ClassifierKind::ZeroShot}, alpha_arg(alpha))
                .value();
        },
        py::arg("ids_fs"), py::arg("ids_zs"), py::arg("alpha") = py::float_(64.0));
    m.def(
        "fuse_weights",
        [](const ClassifierWeights& fs, const ClassifierWeights& zs, double s, bool pre) {
            return fuse_weights(fs, zs, FusionWeight(s), pre);
        },
        py::arg("few_shot"), py::arg("zero_shot"), py::arg("s"), py::arg("prenormalize_rows") = false);

    py::class_<FusedClassifierPair>(m, "FusedClassifierPair")
        .def(py::init<ClassifierWeights, ClassifierWeights, bool>(), py::arg("few_shot"), py::arg("zero_shot"),
             py::arg("prenormalize_rows") = false)
        .def_property_readonly("class_names", &FusedClassifierPair::class_names)
        .def(
            "classify",
            [](const FusedClassifierPair& p, const Embedding& x, const FusionConfig& cfg) {
                const auto r = p.classify(x, cfg);
                py::dict d;
                d["predicted"] = r.predicted;
                d["weight"] = r.weight.value();
                d["posterior"] = to_array(r.posterior.probs());
                return d;
            },
            py::arg("x"), py::arg("config") = FusionConfig{});

    m.def("harmonic_mean", &harmonic_mean);
    m.def(
        "proposition_hmean",
        [](double p0, double p1, double q0, double q1, double rb, double rn) {
            return hmean_dict(proposition_hmean({p0, p1, q0, q1, rb, rn}));
        },
        py::arg("p0"), py::arg("p1"), py::arg("q0"), py::arg("q1"), py::arg("rb"), py::arg("rn"));
    m.def(
        "contour_grid",
        [](double p0, double p1, double q0, double q1, std::size_t resolution) {
            const auto g = contour_grid(p0, p1, q0, q1, resolution);
            const auto n = static_cast<py::ssize_t>(resolution);
            py::array_t<double> h({n, n});
            auto* out = h.mutable_data();
            for (std::size_t i = 0; i < g.cells.size(); ++i) out[i] = g.cells[i].report.harmonic_mean;
            return h;
        },
        py::arg("p0"), py::arg("p1"), py::arg("q0"), py::arg("q1"), py::arg("resolution") = 101,
        "H over the grid; rows index rb, columns rn.");
    m.def(
        "monte_carlo_hmean",
        [](double p0, double p1, double q0, double q1, double rb, double rn, std::uint64_t n_base,
           std::uint64_t n_novel, std::uint64_t seed) {
            const auto r = monte_carlo_hmean({p0, p1, q0, q1, rb, rn}, n_base, n_novel, seed);
            py::dict d = hmean_dict(r.estimate);
            d["base_correct"] = r.base_correct;
            d["novel_correct"] = r.novel_correct;
            d["n_base"] = r.n_base;
            d["n_novel"] = r.n_novel;
            d["seed"] = r.seed;
            d["generator"] = kMonteCarloGenerator;
            return d;
        },
        py::arg("p0"), py::arg("p1"), py::arg("q0"), py::arg("q1"), py::arg("rb"), py::arg("rn"),
        py::arg("n_base") = 1000000, py::arg("n_novel") = 1000000, py::arg("seed") = 0);

    m.def("read_embeddings", &read_embedding_file, py::arg("path"));
    m.def(
        "write_embeddings",
        [](const std::filesystem::path& path, const std::vector<Embedding>& records) {
            write_embeddings(path, records);
        },
        py::arg("path"), py::arg("records"));
    m.def("write_embeddings_jsonl", &write_embeddings_jsonl, py::arg("path"), py::arg("records"));
    m.def(
        "read_classifier",
        [](const std::filesystem::path& path) {
            auto c = read_classifier(path);
            return py::make_tuple(std::move(c.weights), c.temperature_defaulted);
        },
        py::arg("path"), "Returns (weights, temperature_defaulted).");
    m.def("write_classifier", &write_classifier, py::arg("path"), py::arg("weights"));

    m.def(
        "generate_synthetic",
        [](std::size_t n_base_classes, std::size_t n_novel_classes, std::size_t dim, std::size_t per_class_count,
           double class_center_scale, double noise_scale, double fs_advantage_base, double zs_advantage_novel,
           double temperature, std::uint64_t seed) {
            SyntheticSpec s{n_base_classes, n_novel_classes, dim, per_class_count, class_center_scale,
                            noise_scale, fs_advantage_base, zs_advantage_novel, temperature, seed};
            auto d = generate_synthetic(s);
            py::dict out;
            out["base"] = std::move(d.base);
            out["novel"] = std::move(d.novel);
            out["fs_base"] = std::move(d.fs_base);
            out["zs_base"] = std::move(d.zs_base);
            out["fs_novel"] = std::move(d.fs_novel);
            out["zs_novel"] = std::move(d.zs_novel);
            return out;
        },
        py::arg("n_base_classes") = SyntheticSpec{}.n_base_classes,
        py::arg("n_novel_classes") = SyntheticSpec{}.n_novel_classes, py::arg("dim") = SyntheticSpec{}.dim,
        py::arg("per_class_count") = SyntheticSpec{}.per_class_count,
        py::arg("class_center_scale") = SyntheticSpec{}.class_center_scale,
        py::arg("noise_scale") = SyntheticSpec{}.noise_scale,
        py::arg("fs_advantage_base") = SyntheticSpec{}.fs_advantage_base,
        py::arg("zs_advantage_novel") = SyntheticSpec{}.zs_advantage_novel,
        py::arg("temperature") = SyntheticSpec{}.temperature, py::arg("seed") = SyntheticSpec{}.seed);

    m.def(
        "base_to_novel_eval",
        [](std::vector<Embedding> base, std::vector<Embedding> novel, const ClassifierWeights& fs_base,
           const ClassifierWeights& zs_base, const ClassifierWeights& fs_novel, const ClassifierWeights& zs_novel,
           const FusionConfig& cfg, unsigned threads) {
            const EvalSet b = make_set(std::move(base), fs_base);
            const EvalSet n = make_set(std::move(novel), fs_novel);
            const FusedClassifierPair bp(fs_base, zs_base, cfg.prenormalize_rows);
            const FusedClassifierPair np(fs_novel, zs_novel, cfg.prenormalize_rows);
            EvalOptions opts;
            opts.threads = threads;
            EvalReport r;
            {
                py::gil_scoped_release release;
                r = base_to_novel_eval(b, n, bp, np, cfg, opts);
            }
            return report_dict(r);
        },
        py::arg("base"), py::arg("novel"), py::arg("fs_base"), py::arg("zs_base"), py::arg("fs_novel"),
        py::arg("zs_novel"), py::arg("config") = FusionConfig{}, py::arg("threads") = 1);
}
