#include "autofeedback/promptkit.hpp"

#include <algorithm>
#include <set>
#include <span>

#include "autofeedback/digest.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback::prompt {

using nlohmann::json;

std::string_view to_string(AgentKind kind) { return kind == AgentKind::Agent1 ? "Agent1" : "Agent2"; }

namespace {

std::span<const std::string_view> canonical_sections(AgentKind kind) {
  if (kind == AgentKind::Agent1) return kAgent1Sections;
  return kAgent2Sections;
}

bool is_bracket_header(std::string_view line) {
  return line.size() > 4 && line.substr(0, 2) == "<<" && line.substr(line.size() - 2) == ">>" &&
         line.substr(2, line.size() - 4).find_first_of("<>") == std::string_view::npos;
}

bool is_known_source(std::string_view source) {
  static const std::set<std::string_view> kSources = {
      "context.item_id",          "context.problem_statement", "context.question",
      "context.rubric_rules",     "context.proficiency_logic", "context.teaching_context",
      "context.learning_goals",   "context.feedback_criteria", "context.possible_problems",
      "response.id",              "response.text",             "feedback.text",
      "critique.text"};
  if (kSources.count(source)) return true;
  constexpr std::string_view kExt = "context.extensions.";
  return source.size() > kExt.size() && source.substr(0, kExt.size()) == kExt;
}

std::string strip_blank_edges(std::string_view s) {
  while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view body, std::string_view manifest_text) {
  try {
    return parse_checked(body, manifest_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("template manifest: ") + e.what());
  }
}

PromptTemplate PromptTemplate::parse_checked(std::string_view body, std::string_view manifest_text) {
  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("template manifest is not valid JSON: ") + e.what());
  }

  PromptTemplate t;
  const std::string name = manifest.value("name", "");
  if (name == "Agent1") {
    t.name_ = AgentKind::Agent1;
  } else if (name == "Agent2") {
    t.name_ = AgentKind::Agent2;
  } else {
    throw InputError("template manifest: name must be Agent1 or Agent2, got '" + name + "'");
  }

  auto canonical = canonical_sections(t.name_);
  std::set<std::string> seen;
  for (const auto& s : manifest.at("sections")) {
    SectionSpec spec;
    spec.tag = s.at("tag").get<std::string>();
    spec.header = s.value("header", "<<" + spec.tag + ">>");
    spec.extension = s.value("extension", false);
    if (!seen.insert(spec.tag).second) throw InputError("template: duplicate section '" + spec.tag + "'");
    bool is_canonical = std::find(canonical.begin(), canonical.end(), spec.tag) != canonical.end();
    if (!is_canonical && !spec.extension) throw InputError("template: unknown section tag '" + spec.tag + "'");
    if (is_canonical && spec.extension) throw InputError("template: section '" + spec.tag + "' is not an extension");
    t.sections_.push_back(std::move(spec));
  }
  // Canonical sections first, in canonical order; extensions after them.
  std::size_t ci = 0;
  for (const auto& spec : t.sections_) {
    if (spec.extension) continue;
    if (ci >= canonical.size() || canonical[ci] != spec.tag) {
      throw InputError("template: section '" + spec.tag + "' out of order (expected '" +
                       std::string(ci < canonical.size() ? canonical[ci] : "") + "')");
    }
    ++ci;
  }
  if (ci != canonical.size()) {
    throw InputError("template: missing section '" + std::string(canonical[ci]) + "'");
  }
  bool saw_extension = false;
  for (const auto& spec : t.sections_) {
    if (spec.extension) saw_extension = true;
    else if (saw_extension) throw InputError("template: extension sections must follow '" + std::string(canonical.back()) + "'");
  }

  if (manifest.contains("placeholders")) {
    for (const auto& [key, value] : manifest.at("placeholders").items()) {
      auto source = value.get<std::string>();
      if (!is_known_source(source)) throw InputError("template: placeholder '" + key + "' maps to unknown source '" + source + "'");
      t.placeholders_[key] = source;
    }
  }

  // Walk the body: header lines open sections; everything else is content.
  std::map<std::string, std::string, std::less<>> header_to_tag;
  for (const auto& spec : t.sections_) header_to_tag[spec.header] = spec.tag;
  std::vector<std::string> found;
  std::map<std::string, std::pair<std::size_t, std::size_t>> spans;  // tag -> [begin,end) of content
  std::string current;
  std::size_t content_begin = 0;
  auto lines = text::split_lines(body);
  for (const auto& line : lines) {
    auto trimmed = text::trim(line.text);
    auto it = header_to_tag.find(trimmed);
    if (it == header_to_tag.end()) {
      if (is_bracket_header(trimmed)) {
        throw InputError("template: unknown section tag '" + std::string(trimmed) + "'");
      }
      continue;
    }
    if (std::find(found.begin(), found.end(), it->second) != found.end()) {
      throw InputError("template: duplicate section '" + it->second + "'");
    }
    if (!current.empty()) spans[current] = {content_begin, line.offset};
    found.push_back(it->second);
    current = it->second;
    content_begin = std::min(body.size(), line.offset + line.text.size() + 1);
  }
  if (!current.empty()) spans[current] = {content_begin, body.size()};
  if (found != t.section_order()) {
    std::string want;
    for (const auto& s : t.section_order()) want += (want.empty() ? "" : ", ") + s;
    throw InputError("template body sections do not match manifest order [" + want + "]");
  }
  auto section_of = [&](std::size_t offset) -> std::string {
    for (const auto& [name, span] : spans) {
      if (span.first <= offset && offset < span.second) return name;
    }
    return "";
  };

  if (spans.count("Role")) {
    auto [b, e] = spans["Role"];
    t.role_block_ = std::string(text::trim(body.substr(b, e - b)));
  }
  if (spans.count("Task")) {
    auto [b, e] = spans["Task"];
    t.task_block_ = std::string(text::trim(body.substr(b, e - b)));
  }

  // Split into literal and placeholder segments.
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t open = body.find("{{", pos);
    std::size_t close = open == std::string_view::npos ? open : body.find("}}", open + 2);
    if (open == std::string_view::npos || close == std::string_view::npos) {
      t.segments_.push_back({false, std::string(body.substr(pos)), section_of(pos)});
      break;
    }
    if (open > pos) t.segments_.push_back({false, std::string(body.substr(pos, open - pos)), section_of(pos)});
    std::string key(text::trim(body.substr(open + 2, close - open - 2)));
    std::string section = section_of(open);
    if (!t.placeholders_.count(key)) {
      throw InputError("template: placeholder '{{" + key + "}}' in section '" + section + "' has no mapping");
    }
    t.segments_.push_back({true, key, section});
    pos = close + 2;
  }

  t.digest_ = sha256_hex(std::string(body) + '\0' + std::string(manifest_text));
  return t;
}

std::vector<std::string> PromptTemplate::section_order() const {
  std::vector<std::string> order;
  for (const auto& s : sections_) order.push_back(s.tag);
  return order;
}

std::string fence_untrusted(std::string_view value, const PromptTemplate& tmpl) {
  bool fence = value.find("<<") != std::string_view::npos || value.find(">>") != std::string_view::npos;
  auto lines = text::split_lines(value);
  for (const auto& line : lines) {
    if (fence) break;
    auto trimmed = text::trim(line.text);
    if (!trimmed.empty() && trimmed.front() == '>') fence = true;
    for (const auto& s : tmpl.sections()) {
      if (trimmed == s.header) fence = true;
    }
  }
  if (!fence) return std::string(value);
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += "> ";
    out += lines[i].text;
  }
  return out;
}

std::string PromptTemplate::render(const Inputs& in) const {
  auto require = [](const std::string& value, const std::string& section, const std::string& what) -> const std::string& {
    if (text::trim(value).empty()) {
      throw InputError("cannot fill section '" + section + "': " + what + " is empty");
    }
    return value;
  };

  std::string out;
  for (const auto& seg : segments_) {
    if (!seg.placeholder) {
      out += seg.text;
      continue;
    }
    const std::string& source = placeholders_.at(seg.text);
    const auto& ctx = in.context;
    std::string value;
    if (source == "context.item_id") value = require(ctx.item_id, seg.section, source);
    else if (source == "context.problem_statement") value = require(ctx.problem_statement, seg.section, source);
    else if (source == "context.question") value = require(ctx.question, seg.section, source);
    else if (source == "context.proficiency_logic") value = require(ctx.proficiency_logic, seg.section, source);
    else if (source == "context.teaching_context") value = require(ctx.teaching_context, seg.section, source);
    else if (source == "context.feedback_criteria") value = require(ctx.feedback_criteria, seg.section, source);
    else if (source == "context.possible_problems") value = require(ctx.possible_problems, seg.section, source);
    else if (source == "context.rubric_rules") {
      if (ctx.rubric_rules.empty()) throw InputError("cannot fill section '" + seg.section + "': no rubric rules");
      for (std::size_t i = 0; i < ctx.rubric_rules.size(); ++i) {
        if (i > 0) value += '\n';
        value += "-[" + ctx.rubric_rules[i].label + "]: " + ctx.rubric_rules[i].text;
      }
    } else if (source == "context.learning_goals") {
      for (std::size_t i = 0; i < ctx.learning_goals.size(); ++i) {
        const auto& g = ctx.learning_goals[i];
        if (text::trim(g.text).empty()) throw InputError("cannot fill section '" + seg.section + "': learning goal '" + g.label + "' is empty");
        if (i > 0) value += '\n';
        value += "-" + g.label + ": " + g.text;
      }
    } else if (source.rfind("context.extensions.", 0) == 0) {
      auto key = source.substr(std::string_view("context.extensions.").size());
      auto it = ctx.extensions.find(key);
      if (it == ctx.extensions.end()) throw InputError("cannot fill section '" + seg.section + "': context has no extension '" + key + "'");
      value = require(it->second, seg.section, source);
    } else if (source == "response.id") {
      value = in.response.id;
    } else if (source == "response.text") {
      value = fence_untrusted(in.response.text, *this);
    } else if (source == "feedback.text") {
      if (in.feedback == nullptr || in.feedback->empty()) {
        throw InputError("cannot fill section '" + seg.section + "': Agent 1 feedback is empty, nothing to validate");
      }
      value = fence_untrusted(in.feedback->raw_text(), *this);
    } else if (source == "critique.text") {
      if (in.critique == nullptr || text::trim(*in.critique).empty()) {
        throw InputError("cannot fill section '" + seg.section + "': no critique to forward");
      }
      value = fence_untrusted(*in.critique, *this);
    }
    out += value;
  }
  return out;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  auto manifest_path = path;
  manifest_path.replace_extension(".manifest.json");
  return PromptTemplate::parse(text::read_file(path), text::read_file(manifest_path));
}

std::string assemble_agent1(const AssessmentContext& ctx, const StudentResponse& resp, const PromptTemplate& tmpl) {
  if (tmpl.name() != AgentKind::Agent1) throw InputError("assemble_agent1 needs an Agent1 template");
  ctx.validate();
  return tmpl.render({ctx, resp});
}

std::string assemble_agent2(const AssessmentContext& ctx, const StudentResponse& resp,
                            const FeedbackDocument& agent1_feedback, const PromptTemplate& tmpl) {
  if (tmpl.name() != AgentKind::Agent2) throw InputError("assemble_agent2 needs an Agent2 template");
  if (agent1_feedback.empty()) throw InputError("Agent 1 feedback is empty, nothing to validate");
  ctx.validate();
  return tmpl.render({ctx, resp, &agent1_feedback});
}

std::string assemble_agent1_with_critique(const AssessmentContext& ctx, const StudentResponse& resp,
                                          const std::string& critique, const PromptTemplate& tmpl) {
  if (tmpl.name() != AgentKind::Agent1) throw InputError("critique forwarding needs an Agent1 template");
  ctx.validate();
  return tmpl.render({ctx, resp, nullptr, &critique});
}

std::vector<PromptSection> scan_sections(std::string_view prompt, const PromptTemplate& tmpl) {
  std::vector<PromptSection> out;
  std::size_t body_begin = 0;
  for (const auto& line : text::split_lines(prompt)) {
    auto trimmed = text::trim(line.text);
    auto it = std::find_if(tmpl.sections().begin(), tmpl.sections().end(),
                           [&](const SectionSpec& s) { return s.header == trimmed; });
    if (it == tmpl.sections().end()) continue;
    if (!out.empty()) out.back().body = strip_blank_edges(prompt.substr(body_begin, line.offset - body_begin));
    out.push_back({it->tag, ""});
    body_begin = std::min(prompt.size(), line.offset + line.text.size() + 1);
  }
  if (!out.empty()) out.back().body = strip_blank_edges(prompt.substr(body_begin));
  return out;
}

AssessmentContext context_from_json(const json& j) {
  try {
    AssessmentContext ctx;
    ctx.item_id = j.value("item_id", "");
    ctx.problem_statement = j.at("problem_statement").get<std::string>();
    ctx.question = j.at("question").get<std::string>();
    for (const auto& r : j.at("rubric_rules")) {
      ctx.rubric_rules.push_back({r.at("label").get<std::string>(), r.at("text").get<std::string>()});
    }
    ctx.proficiency_logic = j.value("proficiency_logic", "");
    if (j.contains("proficiency_rule")) {
      const auto& pr = j.at("proficiency_rule");
      ctx.proficiency_rule.any_of = pr.value("any_of", std::vector<std::string>{});
      ctx.proficiency_rule.all_of = pr.value("all_of", std::vector<std::string>{});
    }
    ctx.teaching_context = j.value("teaching_context", "");
    const auto& goals = j.at("learning_goals");
    if (!goals.is_array() || goals.size() != 3) throw InputError("context: learning_goals must have exactly three entries");
    for (std::size_t i = 0; i < 3; ++i) {
      ctx.learning_goals[i] = {goals[i].at("label").get<std::string>(), goals[i].at("text").get<std::string>()};
    }
    ctx.feedback_criteria = j.value("feedback_criteria", "");
    ctx.possible_problems = j.value("possible_problems", "");
    if (j.contains("extensions")) ctx.extensions = j.at("extensions").get<std::map<std::string, std::string>>();
    ctx.validate();
    return ctx;
  } catch (const json::exception& e) {
    throw InputError(std::string("context: ") + e.what());
  }
}

json context_to_json(const AssessmentContext& ctx) {
  json rules = json::array();
  for (const auto& r : ctx.rubric_rules) rules.push_back({{"label", r.label}, {"text", r.text}});
  json goals = json::array();
  for (const auto& g : ctx.learning_goals) goals.push_back({{"label", g.label}, {"text", g.text}});
  return {{"item_id", ctx.item_id},
          {"problem_statement", ctx.problem_statement},
          {"question", ctx.question},
          {"rubric_rules", rules},
          {"proficiency_logic", ctx.proficiency_logic},
          {"proficiency_rule", {{"any_of", ctx.proficiency_rule.any_of}, {"all_of", ctx.proficiency_rule.all_of}}},
          {"teaching_context", ctx.teaching_context},
          {"learning_goals", goals},
          {"feedback_criteria", ctx.feedback_criteria},
          {"possible_problems", ctx.possible_problems},
          {"extensions", ctx.extensions}};
}

AssessmentContext load_context(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw InputError("context file " + path.string() + ": " + e.what());
  }
  return context_from_json(j);
}

}  // namespace autofeedback::prompt
