#include "autofeedback/datasetio.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "autofeedback/digest.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback::data {

using nlohmann::json;

std::string_view to_string(CorpusFormat format) { return format == CorpusFormat::Csv ? "csv" : "jsonl"; }

std::optional<CorpusFormat> format_from_path(const std::filesystem::path& path) {
  auto ext = text::to_lower_ascii(path.extension().string());
  if (ext == ".csv") return CorpusFormat::Csv;
  if (ext == ".jsonl" || ext == ".ndjson") return CorpusFormat::Jsonl;
  return std::nullopt;
}

Corpus::Corpus(std::vector<StudentResponse> responses) : responses_(std::move(responses)) {
  std::set<std::string_view> ids;
  json canonical = json::array();
  for (const auto& r : responses_) {
    if (r.id.empty()) throw InputError("corpus: response with empty id");
    if (!ids.insert(r.id).second) throw InputError("corpus: duplicate id '" + r.id + "'");
    canonical.push_back({r.id, r.text, to_string(r.score_level)});
  }
  digest_ = sha256_hex(canonical.dump());
}

std::size_t Corpus::count(ScoreLevel level) const {
  return static_cast<std::size_t>(std::count_if(responses_.begin(), responses_.end(),
                                                [&](const StudentResponse& r) { return r.score_level == level; }));
}

bool Corpus::contains(const std::string& id) const {
  return std::any_of(responses_.begin(), responses_.end(), [&](const StudentResponse& r) { return r.id == id; });
}

namespace {

struct CsvRow {
  std::size_t line;
  std::vector<std::string> fields;
};

// RFC 4180: quoted fields may hold commas, doubled quotes and line breaks.
std::vector<CsvRow> parse_csv(std::string_view s, const std::string& source) {
  if (s.substr(0, 3) == "\xEF\xBB\xBF") s.remove_prefix(3);
  std::vector<CsvRow> rows;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < s.size()) {
    CsvRow row{line, {}};
    std::string field;
    bool row_done = false;
    while (!row_done) {
      if (i < s.size() && s[i] == '"') {
        ++i;
        std::size_t open_line = line;
        for (;;) {
          if (i >= s.size()) throw InputError(source + ":" + std::to_string(open_line) + ": unterminated quoted field");
          if (s[i] == '"') {
            if (i + 1 < s.size() && s[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (s[i] == '\n') ++line;
          field.push_back(s[i++]);
        }
        if (i < s.size() && s[i] != ',' && s[i] != '\n' && s[i] != '\r') {
          throw InputError(source + ":" + std::to_string(line) + ": text after closing quote");
        }
      } else {
        while (i < s.size() && s[i] != ',' && s[i] != '\n' && s[i] != '\r') {
          if (s[i] == '"') throw InputError(source + ":" + std::to_string(line) + ": stray quote in unquoted field");
          field.push_back(s[i++]);
        }
      }
      row.fields.push_back(std::move(field));
      field.clear();
      if (i >= s.size()) {
        row_done = true;
      } else if (s[i] == ',') {
        ++i;
      } else {
        if (s[i] == '\r') ++i;
        if (i < s.size() && s[i] == '\n') ++i;
        ++line;
        row_done = true;
      }
    }
    bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
  }
  return rows;
}

StudentResponse make_response(std::string id, std::string text, const std::string& label, const std::string& where) {
  auto level = parse_score_level(label);
  if (!level) throw InputError(where + ": unknown score label '" + label + "'");
  if (text::trim(id).empty()) throw InputError(where + ": empty id");
  return StudentResponse{std::move(id), std::move(text), *level};
}

Corpus parse_csv_corpus(std::string_view content, const std::string& source) {
  auto rows = parse_csv(content, source);
  if (rows.empty()) throw InputError(source + ": missing header row (id,text,score_level)");
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < rows[0].fields.size(); ++c) {
    col[text::to_lower_ascii(text::trim(rows[0].fields[c]))] = c;
  }
  for (const char* required : {"id", "text", "score_level"}) {
    if (!col.count(required)) throw InputError(source + ":1: header lacks column '" + required + "'");
  }
  std::vector<StudentResponse> out;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::string where = source + ":" + std::to_string(row.line);
    if (row.fields.size() != rows[0].fields.size()) {
      throw InputError(where + ": expected " + std::to_string(rows[0].fields.size()) + " fields, found " +
                       std::to_string(row.fields.size()));
    }
    auto resp = make_response(row.fields[col["id"]], row.fields[col["text"]], row.fields[col["score_level"]], where);
    if (!seen.insert(resp.id).second) throw InputError(where + ": duplicate id '" + resp.id + "'");
    out.push_back(std::move(resp));
  }
  return Corpus(std::move(out));
}

Corpus parse_jsonl_corpus(std::string_view content, const std::string& source) {
  std::vector<StudentResponse> out;
  std::set<std::string> seen;
  auto lines = text::split_lines(content);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    if (text::trim(lines[l].text).empty()) continue;
    std::string where = source + ":" + std::to_string(l + 1);
    json j;
    try {
      j = json::parse(lines[l].text);
      if (!j.is_object()) throw InputError(where + ": expected a JSON object");
      auto id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      auto resp = make_response(std::move(id), j.at("text").get<std::string>(), j.at("score_level").get<std::string>(), where);
      if (!seen.insert(resp.id).second) throw InputError(where + ": duplicate id '" + resp.id + "'");
      out.push_back(std::move(resp));
    } catch (const json::exception& e) {
      throw InputError(where + ": malformed record: " + e.what());
    }
  }
  return Corpus(std::move(out));
}

std::string csv_field(std::string_view f) {
  bool quote = f.find_first_of(",\"\r\n") != std::string_view::npos || f.empty() || text::trim(f).size() != f.size();
  if (!quote) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace

Corpus parse_corpus(std::string_view content, CorpusFormat format, const std::string& source_name) {
  return format == CorpusFormat::Csv ? parse_csv_corpus(content, source_name) : parse_jsonl_corpus(content, source_name);
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  return parse_corpus(text::read_file(path), format, path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
  auto format = format_from_path(path);
  if (!format) throw InputError("cannot tell corpus format from extension: " + path.string());
  return load_corpus(path, *format);
}

std::string serialize_corpus(const Corpus& corpus, CorpusFormat format) {
  std::string out;
  if (format == CorpusFormat::Csv) {
    out = "id,text,score_level\n";
    for (const auto& r : corpus.responses()) {
      out += csv_field(r.id) + "," + csv_field(r.text) + "," + std::string(to_string(r.score_level)) + "\n";
    }
  } else {
    for (const auto& r : corpus.responses()) {
      json j;
      j["id"] = r.id;
      j["text"] = r.text;
      j["score_level"] = to_string(r.score_level);
      out += j.dump() + "\n";
    }
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
  text::write_file(path, serialize_corpus(corpus, format));
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw InputError("bounded_draw: empty range");
  // Reject the low (2^64 mod bound) values so every residue is equally likely.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t x = rng();
    if (x >= threshold) return x % bound;
  }
}

namespace {

// Partial Fisher-Yates over `items`; the first k positions hold the pick.
template <typename T>
std::vector<T> pick(std::vector<T> items, std::size_t k, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(bounded_draw(rng, items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

}  // namespace

std::vector<std::string> sample_ids(std::vector<std::string> ids, std::size_t k, std::uint64_t seed) {
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw InputError("sample_ids: duplicate ids");
  if (k > ids.size()) {
    throw InputError("cannot sample " + std::to_string(k) + " of " + std::to_string(ids.size()) + " ids");
  }
  std::mt19937_64 rng(seed);
  auto chosen = pick(std::move(ids), k, rng);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Corpus balanced_sample(const Corpus& corpus, std::size_t n_per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<StudentResponse> out;
  for (ScoreLevel level : {ScoreLevel::Beginning, ScoreLevel::Proficient}) {
    std::vector<StudentResponse> members;
    for (const auto& r : corpus.responses()) {
      if (r.score_level == level) members.push_back(r);
    }
    if (members.size() < n_per_class) {
      throw InputError("class " + std::string(to_string(level)) + " has " + std::to_string(members.size()) +
                       " responses but " + std::to_string(n_per_class) + " were requested (short by " +
                       std::to_string(n_per_class - members.size()) + ")");
    }
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    auto chosen = pick(std::move(members), n_per_class, rng);
    out.insert(out.end(), std::make_move_iterator(chosen.begin()), std::make_move_iterator(chosen.end()));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return Corpus(std::move(out));
}

Corpus split_disjoint(const Corpus& corpus, const Corpus& pilot) {
  std::set<std::string> corpus_ids;
  for (const auto& r : corpus.responses()) corpus_ids.insert(r.id);
  std::set<std::string> pilot_ids;
  for (const auto& r : pilot.responses()) {
    if (!corpus_ids.count(r.id)) throw InputError("pilot id '" + r.id + "' is not in the corpus");
    pilot_ids.insert(r.id);
  }
  std::vector<StudentResponse> rest;
  for (const auto& r : corpus.responses()) {
    if (!pilot_ids.count(r.id)) rest.push_back(r);
  }
  return Corpus(std::move(rest));
}

json SampleManifest::to_json() const {
  json j = {{"algorithm", kSamplerAlgorithm},
            {"n_per_class", n_per_class},
            {"sample_digest", sample_digest},
            {"sample_size", sample_size},
            {"seed", seed},
            {"source_digest", source_digest},
            {"source_path", source_path}};
  if (excluded_digest) j["excluded_digest"] = *excluded_digest;
  return j;
}

}  // namespace autofeedback::data
