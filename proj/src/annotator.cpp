#include "autofeedback/annotator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "autofeedback/datasetio.hpp"
#include "autofeedback/digest.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/orchestrator.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback::annotate {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::map<std::string, const AnnotationLabel*> index_labels(const std::vector<AnnotationLabel>& labels,
                                                           const char* which) {
  std::map<std::string, const AnnotationLabel*> out;
  for (const auto& l : labels) {
    if (!out.emplace(l.record_id, &l).second) {
      throw InputError(std::string(which) + " has two labels for record '" + l.record_id + "'");
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& ids) {
  std::string s;
  for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
  return s;
}

std::optional<double> cohen_kappa(std::size_t n, std::size_t matches, std::size_t a_yes, std::size_t b_yes) {
  if (n == 0) return std::nullopt;
  const double dn = static_cast<double>(n);
  const double po = static_cast<double>(matches) / dn;
  const double pa = static_cast<double>(a_yes) / dn;
  const double pb = static_cast<double>(b_yes) / dn;
  const double pe = pa * pb + (1 - pa) * (1 - pb);
  if (std::abs(1 - pe) < 1e-12) return std::nullopt;
  return (po - pe) / (1 - pe);
}

std::optional<bool> parse_yes_no(std::string_view answer) {
  auto a = text::to_lower_ascii(text::trim(answer));
  if (a == "y" || a == "yes") return true;
  if (a == "n" || a == "no") return false;
  return std::nullopt;
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream f(path, std::ios::app | std::ios::binary);
  if (!f) throw InputError("cannot append to " + path.string());
  f << line << '\n';
  f.flush();
  if (!f) throw InputError("write failed on " + path.string());
}

}  // namespace

// --- file formats -----------------------------------------------------------

ordered_json AnnotationLabel::to_json() const {
  ordered_json j;
  j["type"] = "label";
  j["record_id"] = record_id;
  j["rater_id"] = rater_id;
  j["over_praise"] = over_praise;
  j["over_inference"] = over_inference;
  j["note"] = note;
  j["timestamp"] = timestamp;
  if (!provenance.empty()) j["provenance"] = provenance;
  return j;
}

AnnotationLabel AnnotationLabel::from_json(const json& j) {
  AnnotationLabel l;
  l.record_id = j.at("record_id").get<std::string>();
  l.rater_id = j.at("rater_id").get<std::string>();
  l.over_praise = j.at("over_praise").get<bool>();
  l.over_inference = j.at("over_inference").get<bool>();
  l.note = j.value("note", "");
  l.timestamp = j.value("timestamp", "");
  l.provenance = j.value("provenance", "");
  if (l.record_id.empty()) throw InputError("label without record id");
  return l;
}

ordered_json LabelFileHeader::to_json() const {
  ordered_json j;
  j["type"] = "header";
  j["run_file"] = run_file;
  j["run_digest"] = run_digest;
  j["rater_id"] = rater_id;
  j["blind"] = blind;
  j["subset_seed"] = subset_seed ? ordered_json(*subset_seed) : ordered_json(nullptr);
  j["subset_fraction"] = subset_fraction ? ordered_json(*subset_fraction) : ordered_json(nullptr);
  j["record_ids"] = record_ids;
  return j;
}

LabelFileHeader LabelFileHeader::from_json(const json& j) {
  LabelFileHeader h;
  h.run_file = j.value("run_file", "");
  h.run_digest = j.value("run_digest", "");
  h.rater_id = j.at("rater_id").get<std::string>();
  h.blind = j.value("blind", true);
  if (j.contains("subset_seed") && !j["subset_seed"].is_null()) h.subset_seed = j["subset_seed"].get<std::uint64_t>();
  if (j.contains("subset_fraction") && !j["subset_fraction"].is_null()) {
    h.subset_fraction = j["subset_fraction"].get<double>();
  }
  h.record_ids = j.at("record_ids").get<std::vector<std::string>>();
  return h;
}

bool LabelFile::complete() const { return labels.size() == header.record_ids.size(); }

const AnnotationLabel* LabelFile::find(const std::string& record_id) const {
  for (const auto& l : labels) {
    if (l.record_id == record_id) return &l;
  }
  return nullptr;
}

LabelFile read_label_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw InputError("label file not found: " + path.string());
  const std::string content = text::read_file(path);
  LabelFile out;
  bool have_header = false;
  std::map<std::string, AnnotationLabel> latest;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line.text).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    try {
      auto j = json::parse(line.text);
      const std::string type = j.value("type", "label");
      if (type == "header") {
        if (have_header) throw InputError(where + ": second header line");
        out.header = LabelFileHeader::from_json(j);
        have_header = true;
      } else {
        if (!have_header) throw InputError(where + ": label before header");
        auto l = AnnotationLabel::from_json(j);
        latest.insert_or_assign(l.record_id, std::move(l));
      }
    } catch (const json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (!have_header) throw InputError(path.string() + ": missing header line");
  const std::set<std::string> known(out.header.record_ids.begin(), out.header.record_ids.end());
  for (const auto& [id, _] : latest) {
    if (!known.count(id)) throw InputError(path.string() + ": label for record '" + id + "' outside the header's ids");
  }
  for (const auto& id : out.header.record_ids) {
    auto it = latest.find(id);
    if (it != latest.end()) out.labels.push_back(it->second);
  }
  return out;
}

void write_label_file(const std::filesystem::path& path, const LabelFileHeader& header,
                      const std::vector<AnnotationLabel>& labels) {
  std::string content = header.to_json().dump() + "\n";
  for (const auto& l : labels) content += l.to_json().dump() + "\n";
  text::write_file(path, content);
}

std::vector<stats::IssueObservation> to_observations(const std::vector<AnnotationLabel>& labels) {
  index_labels(labels, "label set");
  std::vector<stats::IssueObservation> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back({l.record_id, l.over_praise, l.over_inference});
  return out;
}

std::vector<std::string> select_overlap(const std::vector<std::string>& record_ids, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InputError("overlap fraction must lie in [0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(record_ids.size()) + 0.5));
  return data::sample_ids(record_ids, k, seed);
}

// --- session ----------------------------------------------------------------

std::string render_card(const RunRecord& record, std::size_t position, std::size_t total, bool blind) {
  std::string out;
  out += "==== Case " + std::to_string(position) + " of " + std::to_string(total) + " ====\n";
  out += "Record: " + record.response_id + "\n";
  if (!blind) out += "System: " + std::string(record.mode == RunMode::Single ? "single agent" : "multi-agent") + "\n";
  out += "\n-- Student response --\n" + record.response_text + "\n";
  out += "\n-- Feedback --\n" + record.final_feedback.raw_text() + "\n\n";
  return out;
}

SessionResult run_session(const std::vector<RunRecord>& records, const SessionOptions& options, std::istream& in,
                          std::ostream& out) {
  if (options.rater_id.empty()) throw InputError("rater id is required");
  if (options.label_file.empty()) throw InputError("label file path is required");

  std::map<std::string, const RunRecord*> by_id;
  for (const auto& r : records) by_id[r.response_id] = &r;

  std::vector<std::string> ids;
  if (options.subset) {
    std::vector<std::string> unknown;
    for (const auto& id : *options.subset) {
      if (!by_id.count(id)) unknown.push_back(id);
    }
    if (!unknown.empty()) throw InputError("unknown record id(s) in subset: " + join(unknown));
    ids = *options.subset;
  } else {
    for (const auto& r : records) ids.push_back(r.response_id);
  }

  const auto run_path = std::filesystem::is_directory(options.run_file)
                            ? options.run_file / pipeline::kRecordsFileName
                            : options.run_file;
  LabelFileHeader header;
  header.run_file = run_path.string();
  header.run_digest = std::filesystem::is_regular_file(run_path) ? sha256_file(run_path) : "";
  header.rater_id = options.rater_id;
  header.blind = options.blind;
  header.subset_seed = options.subset_seed;
  header.subset_fraction = options.subset_fraction;
  header.record_ids = ids;

  std::set<std::string> done;
  if (std::filesystem::exists(options.label_file)) {
    LabelFile existing = read_label_file(options.label_file);
    if (existing.header.rater_id != header.rater_id || existing.header.run_digest != header.run_digest ||
        existing.header.record_ids != header.record_ids) {
      throw InputError("label file " + options.label_file.string() + " belongs to a different run, rater or subset");
    }
    if (existing.complete() && !options.amend) {
      throw InputError("label file " + options.label_file.string() + " is already complete for rater '" +
                       options.rater_id + "'; pass --amend to revise it");
    }
    if (!options.amend) {
      for (const auto& l : existing.labels) done.insert(l.record_id);
    }
  } else {
    text::write_file(options.label_file, header.to_json().dump() + "\n");
  }

  std::function<std::string()> clock = options.clock ? options.clock : std::function<std::string()>(utc_now);
  SessionResult result;
  result.total = ids.size();

  auto ask = [&](const std::string& question) -> std::optional<bool> {
    for (;;) {
      out << question << " [y/n]: " << std::flush;
      std::string answer;
      if (!std::getline(in, answer)) return std::nullopt;
      if (auto v = parse_yes_no(answer)) return v;
      out << "Please answer y or n.\n";
    }
  };

  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (done.count(ids[i])) continue;
    const RunRecord& rec = *by_id.at(ids[i]);
    out << render_card(rec, i + 1, ids.size(), options.blind);
    ++result.presented;
    auto op = ask("Over-praise?");
    if (!op) break;
    auto oi = ask("Over-inference?");
    if (!oi) break;
    out << "Note (Enter to skip): " << std::flush;
    std::string note;
    if (!std::getline(in, note)) break;

    AnnotationLabel label{rec.response_id, options.rater_id, *op, *oi, std::string(text::trim(note)), clock(), ""};
    append_line(options.label_file, label.to_json().dump());
    out << "\n";
  }
  result.labeled = read_label_file(options.label_file).labels.size();
  result.complete = result.labeled == result.total;
  out << (result.complete ? "All " : "Saved ") << result.labeled << " of " << result.total << " labels to "
      << options.label_file.string() << "\n";
  return result;
}

// --- agreement and resolution -----------------------------------------------

ordered_json Agreement::to_json() const {
  auto dim = [](const DimensionAgreement& d) {
    ordered_json j;
    j["matches"] = d.matches;
    j["percent"] = d.percent.str();
    j["kappa"] = d.kappa ? ordered_json(*d.kappa) : ordered_json(nullptr);
    return j;
  };
  ordered_json j;
  j["total"] = total;
  j["over_praise"] = dim(over_praise);
  j["over_inference"] = dim(over_inference);
  j["overall"] = dim(overall);
  j["disagreements"] = disagreements;
  return j;
}

Agreement agreement(const std::vector<AnnotationLabel>& a, const std::vector<AnnotationLabel>& b) {
  auto ia = index_labels(a, "first label set");
  auto ib = index_labels(b, "second label set");
  std::vector<std::string> only;
  for (const auto& [id, _] : ia) {
    if (!ib.count(id)) only.push_back(id);
  }
  for (const auto& [id, _] : ib) {
    if (!ia.count(id)) only.push_back(id);
  }
  if (!only.empty()) {
    std::sort(only.begin(), only.end());
    throw InputError("label sets cover different records; symmetric difference: " + join(only));
  }

  Agreement g;
  g.total = ia.size();
  std::size_t a_op = 0, b_op = 0, a_oi = 0, b_oi = 0, a_both = 0, b_both = 0;
  for (const auto& [id, la] : ia) {
    const AnnotationLabel* lb = ib.at(id);
    const bool op = la->over_praise == lb->over_praise;
    const bool oi = la->over_inference == lb->over_inference;
    g.over_praise.matches += op;
    g.over_inference.matches += oi;
    g.overall.matches += op && oi;
    if (!(op && oi)) g.disagreements.push_back(id);
    a_op += la->over_praise;
    b_op += lb->over_praise;
    a_oi += la->over_inference;
    b_oi += lb->over_inference;
    a_both += la->over_praise && la->over_inference;
    b_both += lb->over_praise && lb->over_inference;
  }
  const auto n = static_cast<std::int64_t>(g.total);
  auto pct = [&](std::size_t m) {
    return n == 0 ? stats::Percent2::from_hundredths(10000) : stats::Percent2::of(static_cast<std::int64_t>(m), n);
  };
  g.over_praise.percent = pct(g.over_praise.matches);
  g.over_inference.percent = pct(g.over_inference.matches);
  g.overall.percent = pct(g.overall.matches);
  g.over_praise.kappa = cohen_kappa(g.total, g.over_praise.matches, a_op, b_op);
  g.over_inference.kappa = cohen_kappa(g.total, g.over_inference.matches, a_oi, b_oi);
  return g;
}

std::vector<ResolutionDecision> read_decisions(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw InputError("decisions file not found: " + path.string());
  std::vector<ResolutionDecision> out;
  std::size_t line_no = 0;
  const std::string content = text::read_file(path);
  for (const auto& line : text::split_lines(content)) {
    ++line_no;
    if (text::trim(line.text).empty()) continue;
    try {
      auto j = json::parse(line.text);
      out.push_back({j.at("record_id").get<std::string>(), j.at("over_praise").get<bool>(),
                     j.at("over_inference").get<bool>(), j.value("note", "")});
    } catch (const json::exception& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotationLabel> resolve(const std::vector<AnnotationLabel>& a, const std::vector<AnnotationLabel>& b,
                                     const std::vector<ResolutionDecision>& decisions, const std::string& rater_id) {
  const Agreement g = agreement(a, b);
  const std::set<std::string> open(g.disagreements.begin(), g.disagreements.end());
  std::map<std::string, const ResolutionDecision*> decided;
  for (const auto& d : decisions) {
    if (!open.count(d.record_id)) {
      throw InputError("decision for record '" + d.record_id + "' which the raters did not disagree on");
    }
    if (!decided.emplace(d.record_id, &d).second) {
      throw InputError("two decisions for record '" + d.record_id + "'");
    }
  }
  std::vector<std::string> missing;
  for (const auto& id : g.disagreements) {
    if (!decided.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) throw InputError("no decision for disagreement(s): " + join(missing));

  std::vector<AnnotationLabel> out;
  out.reserve(a.size());
  for (const auto& la : a) {
    AnnotationLabel l;
    l.record_id = la.record_id;
    l.rater_id = rater_id;
    if (auto it = decided.find(la.record_id); it != decided.end()) {
      l.over_praise = it->second->over_praise;
      l.over_inference = it->second->over_inference;
      l.note = it->second->note;
      l.provenance = "adjudicated";
    } else {
      l.over_praise = la.over_praise;
      l.over_inference = la.over_inference;
      l.note = la.note;
      l.provenance = "agreed";
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<AnnotationLabel> merge_with_remainder(const std::vector<AnnotationLabel>& consolidated,
                                                  const std::vector<AnnotationLabel>& remainder) {
  auto overlap = index_labels(consolidated, "consolidated label set");
  index_labels(remainder, "remainder label set");
  std::vector<AnnotationLabel> out = consolidated;
  for (const auto& l : remainder) {
    if (overlap.count(l.record_id)) continue;
    AnnotationLabel copy = l;
    copy.provenance = "single-rater";
    out.push_back(std::move(copy));
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.record_id < y.record_id; });
  return out;
}

}  // namespace autofeedback::annotate
