#pragma once

// File formats and the synthetic fixture generator.
//
// Binary embedding file (little-endian throughout):
//
//   offset  size  field
//   0       8     magic "FUSLENS1"
//   8       4     dim    (u32, >= 1)
//   12      8     count  (u64, >= 1)
//   20      4     flags  (u32; bit 0 labels present, bit 1 split tags present)
//   24      ...   count records: dim x f32, [u32 label], [u8 split 0/1/2]
//
// JSON-lines embedding file: one object per line,
//   {"id": "...", "label": 3, "split": "base", "values": [..]}
// where every key but "values" is optional.
//
// Classifier document (JSON):
//   {"format_version": 1, "kind": "few_shot", "temperature": 0.01,
//    "class_names": [...], "weights": [[...], ...]}
// Numbers are written with 17 significant digits so doubles round-trip.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fuselens/core.hpp"

namespace fuselens {

inline constexpr char kEmbeddingMagic[8] = {'F', 'U', 'S', 'L', 'E', 'N', 'S', '1'};
inline constexpr std::uint32_t kFlagLabels = 1u << 0;
inline constexpr std::uint32_t kFlagSplits = 1u << 1;
inline constexpr int kClassifierFormatVersion = 1;

struct EmbeddingFileHeader {
    std::uint32_t dim = 0;
    std::uint64_t count = 0;
    std::uint32_t flags = 0;
};

// FNV-1a over the serialized bytes of one record.
struct EmbeddingWriteLog {
    EmbeddingFileHeader header;
    std::vector<std::uint64_t> record_checksums;
};

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

// Serialized bytes of one record (as stored in the binary file).
std::vector<unsigned char> encode_record(const Embedding& e, std::uint32_t flags);

EmbeddingWriteLog write_embeddings(const std::filesystem::path& path,
                                   const std::vector<Embedding>& records);
std::vector<Embedding> read_embeddings(const std::filesystem::path& path);
EmbeddingFileHeader read_embedding_header(const std::filesystem::path& path);

void write_embeddings_jsonl(const std::filesystem::path& path,
                            const std::vector<Embedding>& records);
std::vector<Embedding> read_embeddings_jsonl(const std::filesystem::path& path);

// Dispatches on the leading magic bytes: binary if present, JSON lines otherwise.
std::vector<Embedding> read_embedding_file(const std::filesystem::path& path);

struct LoadedClassifier {
    ClassifierWeights weights;
    // Set when the document had no temperature and the default was applied.
    bool temperature_defaulted = false;
};

void write_classifier(const std::filesystem::path& path, const ClassifierWeights& weights);
std::string classifier_to_string(const ClassifierWeights& weights);
LoadedClassifier read_classifier(const std::filesystem::path& path);
LoadedClassifier parse_classifier(const std::string& text);

// Synthetic base/novel fixture.
//
// Class centers are random unit vectors scaled by class_center_scale.
// Samples are center + N(0, noise_scale^2 I), renormalized to unit length.
// Classifier rows are normalize((1 - eps) * unit_center + eps * random_unit),
// then scaled by a random factor in [0.5, 1.5] so rows are not unit norm:
//
//   few-shot  base  eps = 1 - fs_advantage_base     novel eps = zs_advantage_novel
//   zero-shot base  eps = fs_advantage_base         novel eps = 1 - zs_advantage_novel
//
// so the few-shot classifier is accurate on base classes and the zero-shot
// one on novel classes.
struct SyntheticSpec {
    std::size_t n_base_classes = 10;
    std::size_t n_novel_classes = 10;
    std::size_t dim = 64;
    std::size_t per_class_count = 50;
    double class_center_scale = 1.0;
    double noise_scale = 0.12;
    double fs_advantage_base = 0.85;
    double zs_advantage_novel = 0.85;
    double temperature = kDefaultTemperature;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SyntheticData {
    std::vector<Embedding> base;
    std::vector<Embedding> novel;
    ClassifierWeights fs_base;
    ClassifierWeights zs_base;
    ClassifierWeights fs_novel;
    ClassifierWeights zs_novel;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Writes base.emb, novel.emb, fs_base.json, zs_base.json, fs_novel.json,
// zs_novel.json into `dir` and returns the written paths.
std::vector<std::filesystem::path> write_synthetic(const SyntheticData& data,
                                                   const std::filesystem::path& dir);

std::string spec_to_json(const SyntheticSpec& spec);
SyntheticSpec spec_from_json(const std::string& text);

}  // namespace fuselens
