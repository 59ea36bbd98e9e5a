#include "fuselens/data.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "fuselens/error.hpp"

namespace fuselens {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kHeaderSize = 24;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::size_t record_size(std::uint32_t dim, std::uint32_t flags) {
    return static_cast<std::size_t>(dim) * 4 + ((flags & kFlagLabels) ? 4 : 0) +
           ((flags & kFlagSplits) ? 1 : 0);
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = {}) {
    std::ofstream out(path, mode | std::ios::out | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = {}) {
    std::ifstream in(path, mode | std::ios::in);
    if (!in) throw FormatError("cannot open '" + path.string() + "'");
    return in;
}

std::string slurp(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string num17(double v) { return fmt::format("{:.17g}", v); }

EmbeddingFileHeader parse_header(const unsigned char* p, const fs::path& path) {
    if (std::memcmp(p, kEmbeddingMagic, 8) != 0) {
        throw FormatError("'" + path.string() + "' is not an embedding file (bad magic)");
    }
    EmbeddingFileHeader h;
    h.dim = get_u32(p + 8);
    h.count = get_u64(p + 12);
    h.flags = get_u32(p + 20);
    if (h.dim < 1) throw FormatError("'" + path.string() + "': header dim is 0");
    if (h.count < 1) throw FormatError("'" + path.string() + "': header count is 0");
    if (h.flags & ~(kFlagLabels | kFlagSplits)) {
        throw FormatError("'" + path.string() + "': unknown header flags");
    }
    return h;
}

// Wraps an InvariantError from a loaded record into a FormatError naming the file.
template <typename F>
auto at_record(const fs::path& path, std::size_t index, F&& make) {
    try {
        return make();
    } catch (const InvariantError& e) {
        throw FormatError(fmt::format("'{}': record {}: {}", path.string(), index, e.what()));
    }
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<unsigned char> encode_record(const Embedding& e, std::uint32_t flags) {
    std::vector<unsigned char> out;
    out.reserve(record_size(static_cast<std::uint32_t>(e.dim()), flags));
    for (double v : e.values()) {
        const float f = static_cast<float>(v);
        if (!std::isfinite(f)) throw InvariantError("value does not fit in 32-bit float");
        put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
    if (flags & kFlagLabels) put_u32(out, *e.label());
    if (flags & kFlagSplits) out.push_back(static_cast<unsigned char>(*e.split()));
    return out;
}

EmbeddingWriteLog write_embeddings(const fs::path& path, const std::vector<Embedding>& records) {
    if (records.empty()) throw InvariantError("write_embeddings: no records");
    EmbeddingWriteLog log;
    log.header.dim = static_cast<std::uint32_t>(records.front().dim());
    log.header.count = records.size();
    const bool labels = records.front().label().has_value();
    const bool splits = records.front().split().has_value();
    log.header.flags = (labels ? kFlagLabels : 0u) | (splits ? kFlagSplits : 0u);
    for (const auto& r : records) {
        if (r.dim() != log.header.dim) throw InvariantError("write_embeddings: mixed dimensions");
        if (r.label().has_value() != labels || r.split().has_value() != splits) {
            throw InvariantError("write_embeddings: labels/splits must be present on all records or none");
        }
    }

    std::vector<unsigned char> header(kEmbeddingMagic, kEmbeddingMagic + 8);
    put_u32(header, log.header.dim);
    put_u64(header, log.header.count);
    put_u32(header, log.header.flags);

    auto out = open_out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
    log.record_checksums.reserve(records.size());
    for (const auto& r : records) {
        const auto bytes = encode_record(r, log.header.flags);
        log.record_checksums.push_back(fnv1a64(bytes));
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
    return log;
}

EmbeddingFileHeader read_embedding_header(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    unsigned char buf[kHeaderSize];
    if (!in.read(reinterpret_cast<char*>(buf), kHeaderSize)) {
        throw FormatError("'" + path.string() + "' is truncated (incomplete header)");
    }
    return parse_header(buf, path);
}

std::vector<Embedding> read_embeddings(const fs::path& path) {
    const EmbeddingFileHeader h = read_embedding_header(path);
    const std::size_t rec = record_size(h.dim, h.flags);
    const std::uintmax_t expected = kHeaderSize + static_cast<std::uintmax_t>(rec) * h.count;
    const std::uintmax_t actual = fs::file_size(path);
    if (actual < expected) {
        throw FormatError(fmt::format("'{}' is truncated: {} bytes, header implies {}",
                                      path.string(), actual, expected));
    }
    if (actual > expected) {
        throw FormatError(fmt::format("'{}' has {} trailing bytes", path.string(), actual - expected));
    }

    auto in = open_in(path, std::ios::binary);
    in.seekg(kHeaderSize);
    std::vector<Embedding> out;
    out.reserve(h.count);
    std::vector<unsigned char> buf(rec);
    for (std::uint64_t k = 0; k < h.count; ++k) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(rec))) {
            throw FormatError("'" + path.string() + "' is truncated");
        }
        std::vector<double> values(h.dim);
        for (std::uint32_t j = 0; j < h.dim; ++j) {
            values[j] = std::bit_cast<float>(get_u32(buf.data() + 4 * j));
        }
        std::size_t off = static_cast<std::size_t>(h.dim) * 4;
        std::optional<std::uint32_t> label;
        std::optional<Split> split;
        if (h.flags & kFlagLabels) {
            label = get_u32(buf.data() + off);
            off += 4;
        }
        if (h.flags & kFlagSplits) {
            const unsigned char tag = buf[off];
            if (tag > 2) throw FormatError(fmt::format("'{}': record {}: bad split tag {}", path.string(), k, tag));
            split = static_cast<Split>(tag);
        }
        out.push_back(at_record(path, k, [&] { return Embedding(std::move(values), label, split); }));
    }
    return out;
}

void write_embeddings_jsonl(const fs::path& path, const std::vector<Embedding>& records) {
    auto out = open_out(path);
    for (const auto& r : records) {
        std::string line = "{";
        if (r.sample_id()) line += "\"id\":" + json(*r.sample_id()).dump() + ",";
        if (r.label()) line += fmt::format("\"label\":{},", *r.label());
        if (r.split()) line += fmt::format("\"split\":\"{}\",", to_string(*r.split()));
        line += "\"values\":[";
        const auto v = r.values();
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (j) line += ',';
            line += num17(v[j]);
        }
        line += "]}\n";
        out << line;
    }
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

std::vector<Embedding> read_embeddings_jsonl(const fs::path& path) {
    auto in = open_in(path);
    std::vector<Embedding> out;
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::size_t> dim;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError(fmt::format("'{}': line {}: {}", path.string(), line_no, e.what()));
        }
        try {
            if (!doc.is_object() || !doc.contains("values")) {
                throw FormatError(fmt::format("'{}': line {}: missing \"values\"", path.string(), line_no));
            }
            auto values = doc.at("values").get<std::vector<double>>();
            if (dim && values.size() != *dim) {
                throw FormatError(fmt::format("'{}': line {}: dimension {} differs from {}",
                                              path.string(), line_no, values.size(), *dim));
            }
            dim = values.size();
            std::optional<std::uint32_t> label;
            std::optional<Split> split;
            std::optional<std::string> id;
            if (doc.contains("label") && !doc["label"].is_null()) label = doc["label"].get<std::uint32_t>();
            if (doc.contains("split") && !doc["split"].is_null()) {
                split = parse_split(doc["split"].get<std::string>());
                if (!split) {
                    throw FormatError(fmt::format("'{}': line {}: unknown split", path.string(), line_no));
                }
            }
            if (doc.contains("id") && !doc["id"].is_null()) id = doc["id"].get<std::string>();
            out.push_back(at_record(path, line_no,
                                    [&] { return Embedding(std::move(values), label, split, id); }));
        } catch (const json::exception& e) {
            throw FormatError(fmt::format("'{}': line {}: {}", path.string(), line_no, e.what()));
        }
    }
    if (out.empty()) throw FormatError("'" + path.string() + "' contains no records");
    return out;
}

std::vector<Embedding> read_embedding_file(const fs::path& path) {
    char magic[8] = {};
    {
        auto in = open_in(path, std::ios::binary);
        in.read(magic, 8);
        if (in.gcount() == 8 && std::memcmp(magic, kEmbeddingMagic, 8) == 0) {
            return read_embeddings(path);
        }
    }
    const auto first = static_cast<unsigned char>(magic[0]);
    if (first == '{' || first == ' ' || first == '\n' || first == '\t' || first == '\r') {
        return read_embeddings_jsonl(path);
    }
    throw FormatError("'" + path.string() + "' is not an embedding file (bad magic)");
}

std::string classifier_to_string(const ClassifierWeights& w) {
    std::string out = "{\n";
    out += fmt::format("  \"format_version\": {},\n", kClassifierFormatVersion);
    out += fmt::format("  \"kind\": \"{}\",\n", to_string(w.kind()));
    out += fmt::format("  \"temperature\": {},\n", num17(w.temperature()));
    out += fmt::format("  \"num_classes\": {},\n  \"dim\": {},\n", w.num_classes(), w.dim());
    out += "  \"class_names\": [";
    for (std::size_t i = 0; i < w.num_classes(); ++i) {
        if (i) out += ", ";
        out += json(w.class_names()[i]).dump();
    }
    out += "],\n  \"weights\": [\n";
    for (std::size_t i = 0; i < w.num_classes(); ++i) {
        out += "    [";
        const auto row = w.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ", ";
            out += num17(row[j]);
        }
        out += i + 1 < w.num_classes() ? "],\n" : "]\n";
    }
    out += "  ]\n}\n";
    return out;
}

void write_classifier(const fs::path& path, const ClassifierWeights& weights) {
    auto out = open_out(path);
    out << classifier_to_string(weights);
    if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

LoadedClassifier parse_classifier(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("classifier document is not valid JSON: ") + e.what());
    }
    try {
        if (!doc.is_object()) throw FormatError("classifier document must be a JSON object");
        const int version = doc.value("format_version", kClassifierFormatVersion);
        if (version != kClassifierFormatVersion) {
            throw FormatError(fmt::format("unsupported classifier format_version {}", version));
        }
        const auto kind_text = doc.at("kind").get<std::string>();
        const auto kind = parse_classifier_kind(kind_text);
        if (!kind) throw FormatError("unknown classifier kind '" + kind_text + "'");
        bool defaulted = false;
        double tau = kDefaultTemperature;
        if (doc.contains("temperature") && !doc["temperature"].is_null()) {
            tau = doc["temperature"].get<double>();
        } else {
            defaulted = true;
        }
        auto names = doc.at("class_names").get<std::vector<std::string>>();
        const auto rows = doc.at("weights").get<std::vector<std::vector<double>>>();
        if (rows.size() != names.size()) {
            throw InvariantError(fmt::format("{} weight rows for {} class names", rows.size(), names.size()));
        }
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].size() != rows[0].size()) {
                throw InvariantError(fmt::format("weight row {} has length {}, expected {}", i,
                                                 rows[i].size(), rows[0].size()));
            }
        }
        if (doc.contains("dim") && !rows.empty() && doc["dim"].get<std::size_t>() != rows[0].size()) {
            throw InvariantError("declared dim does not match weight rows");
        }
        return {ClassifierWeights::from_rows(rows, std::move(names), tau, *kind), defaulted};
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed classifier document: ") + e.what());
    }
}

LoadedClassifier read_classifier(const fs::path& path) {
    const std::string text = slurp(path);
    try {
        return parse_classifier(text);
    } catch (const FormatError& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    } catch (const InvariantError& e) {
        throw InvariantError("'" + path.string() + "': " + e.what());
    }
}

void SyntheticSpec::validate() const {
    if (n_base_classes < 2 || n_novel_classes < 2) {
        throw InvariantError("synthetic spec: each split needs at least 2 classes");
    }
    if (dim < 2) throw InvariantError("synthetic spec: dim must be at least 2");
    if (per_class_count < 1) throw InvariantError("synthetic spec: per_class_count must be >= 1");
    if (!(class_center_scale > 0.0)) throw InvariantError("synthetic spec: class_center_scale must be positive");
    if (!(noise_scale >= 0.0)) throw InvariantError("synthetic spec: noise_scale must be >= 0");
    if (!(fs_advantage_base >= 0.0 && fs_advantage_base <= 1.0) ||
        !(zs_advantage_novel >= 0.0 && zs_advantage_novel <= 1.0)) {
        throw InvariantError("synthetic spec: advantages must lie in [0, 1]");
    }
    if (!(temperature > 0.0)) throw InvariantError("synthetic spec: temperature must be positive");
}

namespace {

class SyntheticSampler {
public:
    SyntheticSampler(std::uint64_t seed, std::size_t dim) : rng_(seed), dim_(dim) {}

    std::vector<double> unit() {
        std::vector<double> v(dim_);
        double n = 0.0;
        do {
            for (double& x : v) x = normal_(rng_);
            n = l2_norm(v);
        } while (!(n > 0.0));
        for (double& x : v) x /= n;
        return v;
    }

    double gaussian() { return normal_(rng_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::size_t dim_;
};

void normalize(std::vector<double>& v) {
    const double n = l2_norm(v);
    for (double& x : v) x /= n;
}

ClassifierWeights perturbed_classifier(SyntheticSampler& rng,
                                       const std::vector<std::vector<double>>& centers,
                                       const std::vector<std::string>& names, double eps,
                                       double temperature, ClassifierKind kind) {
    std::vector<std::vector<double>> rows;
    rows.reserve(centers.size());
    for (const auto& c : centers) {
        const auto r = rng.unit();
        const double scale = rng.uniform(0.5, 1.5);
        std::vector<double> row(c.size());
        for (std::size_t j = 0; j < c.size(); ++j) row[j] = (1.0 - eps) * c[j] + eps * r[j];
        if (!(l2_norm(row) > 0.0)) row = r;
        normalize(row);
        for (double& x : row) x *= scale;
        rows.push_back(std::move(row));
    }
    return ClassifierWeights::from_rows(rows, names, temperature, kind);
}

std::vector<Embedding> sample_split(SyntheticSampler& rng, const std::vector<std::vector<double>>& centers,
                                    const SyntheticSpec& spec, Split split) {
    std::vector<Embedding> out;
    out.reserve(centers.size() * spec.per_class_count);
    const std::string_view prefix = to_string(split);
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (std::size_t k = 0; k < spec.per_class_count; ++k) {
            std::vector<double> v(spec.dim);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                v[j] = spec.class_center_scale * centers[c][j] + spec.noise_scale * rng.gaussian();
            }
            normalize(v);
            out.emplace_back(std::move(v), static_cast<std::uint32_t>(c), split,
                             fmt::format("{}-{:06d}", prefix, out.size()));
        }
    }
    return out;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticSampler rng(spec.seed, spec.dim);
    std::vector<std::vector<double>> base_centers, novel_centers;
    std::vector<std::string> base_names, novel_names;
    for (std::size_t i = 0; i < spec.n_base_classes; ++i) {
        base_centers.push_back(rng.unit());
        base_names.push_back(fmt::format("base_class_{}", i));
    }
    for (std::size_t i = 0; i < spec.n_novel_classes; ++i) {
        novel_centers.push_back(rng.unit());
        novel_names.push_back(fmt::format("novel_class_{}", i));
    }
    const double tau = spec.temperature;
    auto fs_base = perturbed_classifier(rng, base_centers, base_names, 1.0 - spec.fs_advantage_base,
                                        tau, ClassifierKind::FewShot);
    auto zs_base = perturbed_classifier(rng, base_centers, base_names, spec.fs_advantage_base, tau,
                                        ClassifierKind::ZeroShot);
    auto fs_novel = perturbed_classifier(rng, novel_centers, novel_names, spec.zs_advantage_novel,
                                         tau, ClassifierKind::FewShot);
    auto zs_novel = perturbed_classifier(rng, novel_centers, novel_names,
                                         1.0 - spec.zs_advantage_novel, tau, ClassifierKind::ZeroShot);
    auto base = sample_split(rng, base_centers, spec, Split::Base);
    auto novel = sample_split(rng, novel_centers, spec, Split::Novel);
    return SyntheticData{std::move(base),     std::move(novel),    std::move(fs_base),
                         std::move(zs_base),  std::move(fs_novel), std::move(zs_novel)};
}

std::vector<fs::path> write_synthetic(const SyntheticData& data, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<fs::path> paths{dir / "base.emb",      dir / "novel.emb",     dir / "fs_base.json",
                                dir / "zs_base.json",  dir / "fs_novel.json", dir / "zs_novel.json"};
    write_embeddings(paths[0], data.base);
    write_embeddings(paths[1], data.novel);
    write_classifier(paths[2], data.fs_base);
    write_classifier(paths[3], data.zs_base);
    write_classifier(paths[4], data.fs_novel);
    write_classifier(paths[5], data.zs_novel);
    return paths;
}

std::string spec_to_json(const SyntheticSpec& s) {
    nlohmann::ordered_json doc{{"n_base_classes", s.n_base_classes},
                               {"n_novel_classes", s.n_novel_classes},
                               {"dim", s.dim},
                               {"per_class_count", s.per_class_count},
                               {"class_center_scale", s.class_center_scale},
                               {"noise_scale", s.noise_scale},
                               {"fs_advantage_base", s.fs_advantage_base},
                               {"zs_advantage_novel", s.zs_advantage_novel},
                               {"temperature", s.temperature},
                               {"seed", s.seed}};
    return doc.dump(2) + "\n";
}

SyntheticSpec spec_from_json(const std::string& text) {
    SyntheticSpec s;
    try {
        const json doc = json::parse(text);
        s.n_base_classes = doc.value("n_base_classes", s.n_base_classes);
        s.n_novel_classes = doc.value("n_novel_classes", s.n_novel_classes);
        s.dim = doc.value("dim", s.dim);
        s.per_class_count = doc.value("per_class_count", s.per_class_count);
        s.class_center_scale = doc.value("class_center_scale", s.class_center_scale);
        s.noise_scale = doc.value("noise_scale", s.noise_scale);
        s.fs_advantage_base = doc.value("fs_advantage_base", s.fs_advantage_base);
        s.zs_advantage_novel = doc.value("zs_advantage_novel", s.zs_advantage_novel);
        s.temperature = doc.value("temperature", s.temperature);
        s.seed = doc.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed synthetic spec: ") + e.what());
    }
    s.validate();
    return s;
}

}  // namespace fuselens
