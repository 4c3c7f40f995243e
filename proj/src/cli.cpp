#include "autofeedback/cli.hpp"

#include <chrono>
#include <ctime>
#include <iostream>
#include <memory>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "autofeedback/annotator.hpp"
#include "autofeedback/datasetio.hpp"
#include "autofeedback/digest.hpp"
#include "autofeedback/orchestrator.hpp"
#include "autofeedback/report.hpp"
#include "autofeedback/statlab.hpp"
#include "autofeedback/synthetic_backend.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Common {
  std::string config_file;
  std::string output_root;
};

struct SampleArgs {
  std::string corpus;
  std::optional<int> n;
  std::optional<int> pilot;
  std::optional<std::uint64_t> seed;
  bool allow_overlap = false;
  std::string name = "sample";
  std::string format;
};

struct RunArgs {
  std::string mode;
  std::string dataset;
  std::string backend = "live";
  bool replay = false;
  bool record = false;
  std::string cache;
  std::optional<int> concurrency;
  std::string out;
  std::string context;
  std::string templates;
  std::optional<int> rounds;
  std::string model;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::optional<std::uint64_t> seed;
  bool split_role_system = false;
  std::string fixtures;
  bool quiet = false;
};

struct AnnotateArgs {
  std::string run;
  std::string rater;
  std::string labels;
  std::string subset_file;
  bool overlap = false;
  bool remainder = false;
  std::optional<double> fraction;
  std::optional<std::uint64_t> subset_seed;
  bool no_blind = false;
  bool amend = false;
};

struct AgreeArgs {
  std::string a, b;
  std::string name = "agreement";
};

struct ResolveArgs {
  std::string a, b, decisions, remainder;
  std::string name = "consolidated";
};

struct StatsArgs {
  std::string single_labels, multi_labels, single_run, multi_run;
  std::string published;
  std::string name = "comparison";
  std::string format = "both";
  bool cases = false;
};

fs::path under_root(const config::AppConfig& cfg, const fs::path& rel) {
  if (rel.is_absolute() || rel.lexically_normal().string().rfind("..", 0) == 0) {
    throw InputError("output name '" + rel.string() + "' must stay inside the output root");
  }
  return cfg.paths.output_root / rel;
}

data::CorpusFormat format_for(const std::string& requested, const fs::path& input) {
  if (requested.empty()) {
    auto f = data::format_from_path(input);
    if (!f) throw InputError("cannot tell the format of " + input.string() + "; pass --format");
    return *f;
  }
  if (requested == "csv") return data::CorpusFormat::Csv;
  if (requested == "jsonl") return data::CorpusFormat::Jsonl;
  throw InputError("unknown format '" + requested + "'");
}

// --- sample -----------------------------------------------------------------

int cmd_sample(const config::AppConfig& cfg, const SampleArgs& a, std::ostream& out) {
  const fs::path source = a.corpus;
  const data::Corpus corpus = data::load_corpus(source);
  const auto fmt = format_for(a.format, source);
  const std::string ext = fmt == data::CorpusFormat::Csv ? ".csv" : ".jsonl";
  const int n = a.n.value_or(cfg.sampling.n_per_class);
  const int pilot_n = a.pilot.value_or(cfg.sampling.pilot_per_class);
  const std::uint64_t seed = a.seed.value_or(cfg.sampling.seed);
  const bool overlap = a.allow_overlap || cfg.sampling.allow_pilot_overlap;
  if (n < 0 || pilot_n < 0) throw InputError("sample sizes must be non-negative");

  const fs::path dir = under_root(cfg, a.name);
  json manifest = {{"algorithm", data::kSamplerAlgorithm},
                   {"source_path", source.string()},
                   {"source_digest", corpus.digest()},
                   {"source_size", corpus.size()},
                   {"seed", seed},
                   {"pilot_overlap_allowed", overlap}};

  data::Corpus pool = corpus;
  if (pilot_n > 0) {
    const data::Corpus pilot = data::balanced_sample(corpus, static_cast<std::size_t>(pilot_n), seed);
    data::save_corpus(pilot, dir / ("pilot" + ext), fmt);
    data::SampleManifest pm{source.string(), corpus.digest(), static_cast<std::size_t>(pilot_n), seed,
                            pilot.digest(), pilot.size(), std::nullopt};
    manifest["pilot"] = pm.to_json();
    manifest["pilot"]["file"] = "pilot" + ext;
    if (!overlap) pool = data::split_disjoint(corpus, pilot);
    out << "pilot: " << pilot.size() << " responses -> " << (dir / ("pilot" + ext)).string() << "\n";
  }
  const std::uint64_t test_seed = pilot_n > 0 ? seed + 1 : seed;
  const data::Corpus test = data::balanced_sample(pool, static_cast<std::size_t>(n), test_seed);
  data::save_corpus(test, dir / ("test" + ext), fmt);
  data::SampleManifest tm{source.string(), corpus.digest(), static_cast<std::size_t>(n), test_seed, test.digest(),
                          test.size(), std::nullopt};
  if (pilot_n > 0 && !overlap) tm.excluded_digest = manifest["pilot"]["sample_digest"].get<std::string>();
  manifest["test"] = tm.to_json();
  manifest["test"]["file"] = "test" + ext;
  text::write_file(dir / "sample_manifest.json", manifest.dump(2) + "\n");
  out << "test: " << test.size() << " responses -> " << (dir / ("test" + ext)).string() << "\n";
  return kExitOk;
}

// --- run --------------------------------------------------------------------

int cmd_run(config::AppConfig cfg, const RunArgs& a, std::ostream& out, std::ostream& err,
            const config::EnvLookup& env) {
  if (a.replay && a.record) throw InputError("--replay and --record are mutually exclusive");
  auto mode = parse_run_mode(a.mode);
  if (!mode) throw InputError("--mode must be single or multi");
  if (a.backend != "live" && a.backend != "mock") throw InputError("--backend must be live or mock");

  if (!a.model.empty()) cfg.backend.model = a.model;
  if (a.temperature) cfg.backend.temperature = *a.temperature;
  if (a.max_tokens) cfg.backend.max_tokens = *a.max_tokens;
  if (a.split_role_system) cfg.backend.split_role_system = true;
  if (a.concurrency) cfg.run.concurrency = *a.concurrency;
  if (a.rounds) cfg.run.max_validation_rounds = *a.rounds;
  if (!a.cache.empty()) cfg.paths.cache = a.cache;
  if (!a.context.empty()) cfg.paths.context = a.context;
  if (!a.templates.empty()) cfg.paths.templates = a.templates;
  if (!a.fixtures.empty()) cfg.paths.mock_fixtures = a.fixtures;
  cfg.validate();

  pipeline::RunConfig rc;
  rc.mode = *mode;
  rc.dataset = a.dataset;
  rc.context = cfg.paths.context;
  rc.agent1_template = cfg.paths.templates / "agent1.tmpl";
  rc.agent2_template = cfg.paths.templates / "agent2.tmpl";
  if (cfg.run.max_validation_rounds > 1) rc.loopback_template = cfg.paths.templates / "agent1_loopback.tmpl";
  rc.output_dir = a.out.empty() ? cfg.paths.output_root / "runs" / std::string(to_string(*mode)) : fs::path(a.out);
  rc.model = cfg.backend.model;
  rc.temperature = cfg.backend.temperature;
  rc.max_output_tokens = cfg.backend.max_tokens;
  rc.split_role_system = cfg.backend.split_role_system;
  rc.concurrency = cfg.run.concurrency;
  rc.seed = a.seed.value_or(cfg.sampling.seed);
  rc.max_validation_rounds = cfg.run.max_validation_rounds;
  rc.validate();

  const llm::CacheMode cache_mode =
      a.replay ? llm::CacheMode::Replay : a.record ? llm::CacheMode::Record : llm::CacheMode::Off;
  json snapshot = {{"kind", a.replay ? "cache" : a.backend}, {"cache_mode", to_string(cache_mode)}};
  if (cache_mode != llm::CacheMode::Off) snapshot["cache_dir"] = cfg.paths.cache.string();

  std::shared_ptr<llm::ChatBackend> inner;
  if (cache_mode != llm::CacheMode::Replay) {
    if (a.backend == "mock") {
      std::map<std::string, std::string> fixtures;
      if (!cfg.paths.mock_fixtures.empty()) {
        fixtures = llm::MockBackend::load_fixtures(cfg.paths.mock_fixtures);
        snapshot["mock_fixtures"] = cfg.paths.mock_fixtures.string();
      }
      inner = std::make_shared<llm::MockBackend>(std::move(fixtures), std::make_shared<llm::SyntheticBackend>());
    } else {
      auto key = env(cfg.backend.api_key_env);
      if (!key || key->empty()) {
        throw InputError("environment variable " + cfg.backend.api_key_env + " holds no API key");
      }
      llm::HttpBackendOptions opts;
      opts.path = cfg.backend.path;
      opts.api_key = *key;
      opts.max_tokens_field = cfg.backend.max_tokens_field;
      opts.retry.max_attempts = cfg.backend.max_attempts;
      opts.retry.base_delay = std::chrono::milliseconds(cfg.backend.base_delay_ms);
      opts.retry.max_delay = std::chrono::milliseconds(cfg.backend.max_delay_ms);
      opts.max_in_flight = cfg.backend.max_in_flight;
      opts.jitter_seed = rc.seed;
      inner = std::make_shared<llm::HttpChatBackend>(
          llm::make_http_transport(cfg.backend.base_url, cfg.backend.timeout_s), std::move(opts));
      snapshot["base_url"] = cfg.backend.base_url;
      snapshot["path"] = cfg.backend.path;
      snapshot["api_key_env"] = cfg.backend.api_key_env;
      snapshot["max_in_flight"] = cfg.backend.max_in_flight;
      snapshot["max_attempts"] = cfg.backend.max_attempts;
    }
  }
  std::shared_ptr<llm::ChatBackend> backend = inner;
  if (cache_mode != llm::CacheMode::Off) {
    if (cache_mode == llm::CacheMode::Replay && !fs::is_directory(cfg.paths.cache)) {
      throw InputError("replay cache not found: " + cfg.paths.cache.string());
    }
    backend = std::make_shared<llm::CachingBackend>(std::make_shared<llm::ReplayCache>(cfg.paths.cache), cache_mode,
                                                    inner);
  }
  rc.backend_snapshot = snapshot;

  const auto result = pipeline::run(rc, *backend, a.quiet ? nullptr : &err);
  const auto& m = result.manifest;
  out << "run " << to_string(*mode) << ": " << m.succeeded << " of " << m.inputs << " succeeded, " << m.failed
      << " failed -> " << rc.output_dir.string() << "\n";
  for (const auto& f : m.failures) err << "failed " << f.response_id << " [" << f.stage << "]: " << f.error << "\n";
  return m.failed == 0 ? kExitOk : kExitRuntime;
}

// --- annotate ---------------------------------------------------------------

std::vector<std::string> read_id_list(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw InputError("subset file not found: " + path.string());
  std::vector<std::string> ids;
  const std::string content = text::read_file(path);
  for (const auto& line : text::split_lines(content)) {
    auto t = text::trim(line.text);
    if (!t.empty() && t.front() != '#') ids.emplace_back(t);
  }
  return ids;
}

int cmd_annotate(const config::AppConfig& cfg, const AnnotateArgs& a, std::ostream& out, std::istream& in) {
  const auto records = pipeline::read_run_file(a.run);
  std::vector<std::string> all_ids;
  for (const auto& r : records) all_ids.push_back(r.response_id);

  annotate::SessionOptions opt;
  opt.run_file = a.run;
  opt.rater_id = a.rater;
  opt.blind = cfg.annotation.blind && !a.no_blind;
  opt.amend = a.amend;
  opt.label_file = a.labels.empty() ? cfg.paths.output_root / "labels" / (a.rater + ".jsonl") : fs::path(a.labels);

  if (a.overlap || a.remainder) {
    if (!a.subset_file.empty()) throw InputError("--subset cannot be combined with --overlap/--remainder");
    if (a.overlap && a.remainder) throw InputError("--overlap and --remainder are mutually exclusive");
    const double fraction = a.fraction.value_or(cfg.annotation.overlap_fraction);
    const std::uint64_t seed = a.subset_seed.value_or(cfg.annotation.overlap_seed);
    auto overlap = annotate::select_overlap(all_ids, fraction, seed);
    if (a.overlap) {
      opt.subset = overlap;
    } else {
      const std::set<std::string> in_overlap(overlap.begin(), overlap.end());
      std::vector<std::string> rest;
      for (const auto& id : all_ids) {
        if (!in_overlap.count(id)) rest.push_back(id);
      }
      opt.subset = rest;
    }
    opt.subset_seed = seed;
    opt.subset_fraction = fraction;
  } else if (!a.subset_file.empty()) {
    opt.subset = read_id_list(a.subset_file);
  }
  annotate::run_session(records, opt, in, out);
  return kExitOk;
}

// --- agree / resolve --------------------------------------------------------

std::vector<annotate::AnnotationLabel> labels_of(const std::string& path) {
  return annotate::read_label_file(path).labels;
}

int cmd_agree(const config::AppConfig& cfg, const AgreeArgs& a, std::ostream& out) {
  const auto g = annotate::agreement(labels_of(a.a), labels_of(a.b));
  out << "records: " << g.total << "\n";
  out << "over_praise agreement: " << g.over_praise.percent.str() << "% (" << g.over_praise.matches << "/" << g.total
      << ")\n";
  out << "over_inference agreement: " << g.over_inference.percent.str() << "% (" << g.over_inference.matches << "/"
      << g.total << ")\n";
  out << "overall agreement: " << g.overall.percent.str() << "% (" << g.overall.matches << "/" << g.total << ")\n";
  out << "disagreements: " << g.disagreements.size() << "\n";
  for (const auto& id : g.disagreements) out << "  " << id << "\n";
  auto j = g.to_json();
  j["labels_a"] = a.a;
  j["labels_b"] = a.b;
  const fs::path path = under_root(cfg, fs::path(a.name + ".json"));
  text::write_file(path, j.dump(2) + "\n");
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_resolve(const config::AppConfig& cfg, const ResolveArgs& a, std::ostream& out) {
  const auto fa = annotate::read_label_file(a.a);
  const auto fb = annotate::read_label_file(a.b);
  const auto decisions = a.decisions.empty() ? std::vector<annotate::ResolutionDecision>{}
                                             : annotate::read_decisions(a.decisions);
  auto labels = annotate::resolve(fa.labels, fb.labels, decisions);
  std::size_t adjudicated = 0;
  for (const auto& l : labels) adjudicated += l.provenance == "adjudicated";
  if (!a.remainder.empty()) labels = annotate::merge_with_remainder(labels, labels_of(a.remainder));

  annotate::LabelFileHeader h;
  h.run_file = fa.header.run_file;
  h.run_digest = fa.header.run_digest;
  h.rater_id = "consensus";
  h.blind = fa.header.blind && fb.header.blind;
  h.subset_seed = fa.header.subset_seed;
  h.subset_fraction = fa.header.subset_fraction;
  for (const auto& l : labels) h.record_ids.push_back(l.record_id);
  const fs::path path = under_root(cfg, fs::path(a.name + ".jsonl"));
  annotate::write_label_file(path, h, labels);
  out << "consolidated " << labels.size() << " labels (" << adjudicated << " adjudicated) -> " << path.string()
      << "\n";
  return kExitOk;
}

// --- stats / report ---------------------------------------------------------

struct LoadedRun {
  std::vector<RunRecord> records;
  std::string id;  // manifest digest, or records digest without a manifest
};

LoadedRun load_run(const std::string& path_str) {
  const fs::path path = path_str;
  LoadedRun run;
  run.records = pipeline::read_run_file(path);
  const fs::path dir = fs::is_directory(path) ? path : path.parent_path();
  const fs::path manifest = dir / pipeline::kManifestFileName;
  run.id = fs::is_regular_file(manifest) ? "manifest:" + sha256_file(manifest).substr(0, 16)
                                         : "records:" + sha256_file(fs::is_directory(path) ? path / pipeline::kRecordsFileName : path).substr(0, 16);
  return run;
}

stats::IssueRates rates_for(const LoadedRun& run, const std::string& label_path, const char* which) {
  const auto labels = labels_of(label_path);
  std::set<std::string> ids;
  for (const auto& r : run.records) ids.insert(r.response_id);
  std::vector<std::string> stray;
  for (const auto& l : labels) {
    if (!ids.count(l.record_id)) stray.push_back(l.record_id);
  }
  if (!stray.empty()) {
    throw InputError(std::string(which) + " labels name records missing from the run: " + stray.front() +
                     (stray.size() > 1 ? " (+" + std::to_string(stray.size() - 1) + " more)" : ""));
  }
  const auto obs = annotate::to_observations(labels);
  return stats::tally(obs, static_cast<std::int64_t>(run.records.size()));
}

int cmd_stats(const config::AppConfig& cfg, const StatsArgs& a, std::ostream& out, bool full_report) {
  const LoadedRun single = load_run(a.single_run);
  const LoadedRun multi = load_run(a.multi_run);
  const auto cmp = stats::compare_runs(rates_for(single, a.single_labels, "single-agent"),
                                       rates_for(multi, a.multi_labels, "multi-agent"));
  if (!full_report) {
    const fs::path path = under_root(cfg, fs::path(a.name + ".json"));
    json j = cmp.to_json();
    j["single_run"] = single.id;
    j["multi_run"] = multi.id;
    text::write_file(path, j.dump(2) + "\n");
    out << report::render_table(cmp, report::TableFormat::Markdown);
    out << "wrote " << path.string() << "\n";
    return kExitOk;
  }

  report::ComparisonReport rep{cmp, single.id, multi.id, {}, utc_now()};
  if (!a.published.empty()) rep.footnotes = report::discrepancy_footnotes(cmp, report::PublishedTable::load(a.published));
  const fs::path dir = under_root(cfg, a.name);
  std::vector<report::TableFormat> formats;
  if (a.format == "both") formats = {report::TableFormat::Markdown, report::TableFormat::Csv};
  else if (auto f = report::parse_table_format(a.format)) formats = {*f};
  else throw InputError("--format must be markdown, csv or both");
  for (auto f : formats) {
    const fs::path path = dir / (f == report::TableFormat::Markdown ? "report.md" : "report.csv");
    text::write_file(path, report::render_report(rep, f));
    out << "wrote " << path.string() << "\n";
  }
  text::write_file(dir / "comparison.json", cmp.to_json().dump(2) + "\n");
  if (a.cases) {
    const auto single_labels = labels_of(a.single_labels);
    const auto multi_labels = labels_of(a.multi_labels);
    for (const auto& r : single.records) {
      text::write_file(dir / "cases" / "single" / (r.response_id + ".md"), report::render_case(r, &single_labels));
    }
    for (const auto& r : multi.records) {
      text::write_file(dir / "cases" / "multi" / (r.response_id + ".md"), report::render_case(r, &multi_labels));
    }
    out << "wrote " << single.records.size() + multi.records.size() << " case exhibits under "
        << (dir / "cases").string() << "\n";
  }
  out << report::render_table(cmp, report::TableFormat::Markdown);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in,
            const config::EnvLookup& env) {
  CLI::App app{"Generate, validate and evaluate formative feedback with chat models", "autofeedback"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_file, "YAML configuration file");
  app.add_option("--output-root", common.output_root, "Directory for generated artifacts");

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Draw a balanced pilot and test sample from a corpus");
  sample->add_option("--corpus", sa.corpus, "CSV or JSONL corpus")->required();
  sample->add_option("--n", sa.n, "Responses per score level in the test sample");
  sample->add_option("--pilot", sa.pilot, "Responses per score level in the pilot (0 for none)");
  sample->add_option("--seed", sa.seed, "Sampler seed");
  sample->add_flag("--allow-overlap", sa.allow_overlap, "Let the test sample reuse pilot responses");
  sample->add_option("--name", sa.name, "Output directory under the output root");
  sample->add_option("--format", sa.format, "csv or jsonl (default: same as the corpus)");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Generate feedback for every response of a dataset");
  run->add_option("--mode", ra.mode, "single or multi")->required();
  run->add_option("--dataset", ra.dataset, "CSV or JSONL dataset")->required();
  run->add_option("--backend", ra.backend, "live or mock");
  run->add_flag("--replay", ra.replay, "Serve every call from the cache; a miss fails the response");
  run->add_flag("--record", ra.record, "Store every exchange in the cache");
  run->add_option("--cache", ra.cache, "Cache directory");
  run->add_option("--concurrency", ra.concurrency, "Responses processed in parallel");
  run->add_option("--out", ra.out, "Run directory (default: <output root>/runs/<mode>)");
  run->add_option("--context", ra.context, "Assessment context JSON");
  run->add_option("--templates", ra.templates, "Directory holding the prompt templates");
  run->add_option("--rounds", ra.rounds, "Maximum validation rounds (multi mode)");
  run->add_option("--model", ra.model, "Model name");
  run->add_option("--temperature", ra.temperature, "Sampling temperature");
  run->add_option("--max-tokens", ra.max_tokens, "Completion token limit");
  run->add_option("--seed", ra.seed, "Seed recorded in the manifest and used for retry jitter");
  run->add_flag("--split-role-system", ra.split_role_system, "Send the Role block as a system message");
  run->add_option("--fixtures", ra.fixtures, "Mock fixture table (digest -> completion)");
  run->add_flag("--quiet", ra.quiet, "No progress lines");

  AnnotateArgs aa;
  auto* ann = app.add_subcommand("annotate", "Label final feedback for over-praise and over-inference");
  ann->add_option("--run", aa.run, "Run directory or records file")->required();
  ann->add_option("--rater", aa.rater, "Rater id")->required();
  ann->add_option("--labels", aa.labels, "Label file (default: <output root>/labels/<rater>.jsonl)");
  ann->add_option("--subset", aa.subset_file, "File with one record id per line");
  ann->add_flag("--overlap", aa.overlap, "Label the seeded dual-rater overlap subset");
  ann->add_flag("--remainder", aa.remainder, "Label every record outside the overlap subset");
  ann->add_option("--fraction", aa.fraction, "Overlap fraction");
  ann->add_option("--subset-seed", aa.subset_seed, "Overlap sampler seed");
  ann->add_flag("--no-blind", aa.no_blind, "Show which system produced the feedback");
  ann->add_flag("--amend", aa.amend, "Revise a complete label file");

  AgreeArgs ga;
  auto* agree = app.add_subcommand("agree", "Percent agreement between two raters");
  agree->add_option("--a", ga.a, "First rater's label file")->required();
  agree->add_option("--b", ga.b, "Second rater's label file")->required();
  agree->add_option("--name", ga.name, "Output file stem under the output root");

  ResolveArgs rsa;
  auto* resolve = app.add_subcommand("resolve", "Merge two raters' labels with adjudicated decisions");
  resolve->add_option("--a", rsa.a, "First rater's label file")->required();
  resolve->add_option("--b", rsa.b, "Second rater's label file")->required();
  resolve->add_option("--decisions", rsa.decisions, "JSONL decisions for every disagreement");
  resolve->add_option("--remainder", rsa.remainder, "Single-rater labels for the records outside the overlap");
  resolve->add_option("--name", rsa.name, "Output file stem under the output root");

  StatsArgs st;
  auto add_stats_options = [&](CLI::App* c) {
    c->add_option("--single-labels", st.single_labels, "Consolidated labels for the single-agent run")->required();
    c->add_option("--multi-labels", st.multi_labels, "Consolidated labels for the multi-agent run")->required();
    c->add_option("--single-run", st.single_run, "Single-agent run directory or records file")->required();
    c->add_option("--multi-run", st.multi_run, "Multi-agent run directory or records file")->required();
    c->add_option("--name", st.name, "Output name under the output root");
  };
  auto* stats_cmd = app.add_subcommand("stats", "Issue rates, chi-square tests and deltas");
  add_stats_options(stats_cmd);
  auto* report_cmd = app.add_subcommand("report", "Comparison table and case exhibits");
  add_stats_options(report_cmd);
  report_cmd->add_option("--published", st.published, "Published table to check count-derived numbers against");
  report_cmd->add_option("--format", st.format, "markdown, csv or both");
  report_cmd->add_flag("--cases", st.cases, "Also write one exhibit per record");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    config::AppConfig cfg = config::load_config(
        common.config_file.empty() ? std::nullopt : std::optional<fs::path>(common.config_file), env);
    if (!common.output_root.empty()) cfg.paths.output_root = common.output_root;
    if (*sample) return cmd_sample(cfg, sa, out);
    if (*run) return cmd_run(cfg, ra, out, err, env);
    if (*ann) return cmd_annotate(cfg, aa, out, in);
    if (*agree) return cmd_agree(cfg, ga, out);
    if (*resolve) return cmd_resolve(cfg, rsa, out);
    if (*stats_cmd) return cmd_stats(cfg, st, out, false);
    if (*report_cmd) return cmd_stats(cfg, st, out, true);
  } catch (const llm::BackendError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IntegrityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace autofeedback::cli
