#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "autofeedback/core_model.hpp"

namespace autofeedback::data {

enum class CorpusFormat { Csv, Jsonl };

std::string_view to_string(CorpusFormat format);
/// ".csv" or ".jsonl"/".ndjson"; nullopt otherwise.
std::optional<CorpusFormat> format_from_path(const std::filesystem::path& path);

/// An immutable set of student responses with unique ids. The digest covers
/// ids, texts and labels in corpus order, not the file bytes.
class Corpus {
 public:
  Corpus() : Corpus(std::vector<StudentResponse>{}) {}
  /// Throws InputError on a duplicate id.
  explicit Corpus(std::vector<StudentResponse> responses);

  const std::vector<StudentResponse>& responses() const { return responses_; }
  std::size_t size() const { return responses_.size(); }
  bool empty() const { return responses_.empty(); }
  std::size_t count(ScoreLevel level) const;
  bool contains(const std::string& id) const;
  const std::string& digest() const { return digest_; }

 private:
  std::vector<StudentResponse> responses_;
  std::string digest_;
};

/// Required columns/fields: id, text, score_level (labels matched
/// case-insensitively, surrounding spaces ignored). Errors name the line.
Corpus parse_corpus(std::string_view content, CorpusFormat format, const std::string& source_name = "<input>");
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus load_corpus(const std::filesystem::path& path);  // format from extension

std::string serialize_corpus(const Corpus& corpus, CorpusFormat format);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

/// Identifier written into manifests so samples can be reproduced elsewhere.
inline constexpr std::string_view kSamplerAlgorithm = "mt19937_64/fisher-yates-rejection-v1";

/// Uniform integer in [0, bound) from raw engine output (rejection sampling;
/// identical on every platform, unlike std::uniform_int_distribution).
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound);

/// `k` distinct ids chosen uniformly from `ids` (sorted first), returned sorted.
std::vector<std::string> sample_ids(std::vector<std::string> ids, std::size_t k, std::uint64_t seed);

/// Exactly `n_per_class` responses per score level, ordered by id. Throws
/// InputError naming the class and the shortfall when a class is too small.
Corpus balanced_sample(const Corpus& corpus, std::size_t n_per_class, std::uint64_t seed);

/// `corpus` without the pilot's ids. Throws InputError when a pilot id is not in `corpus`.
Corpus split_disjoint(const Corpus& corpus, const Corpus& pilot);

struct SampleManifest {
  std::string source_path;
  std::string source_digest;
  std::size_t n_per_class = 0;
  std::uint64_t seed = 0;
  std::string sample_digest;
  std::size_t sample_size = 0;
  std::optional<std::string> excluded_digest;  // pilot removed before sampling

  nlohmann::json to_json() const;
};

}  // namespace autofeedback::data
