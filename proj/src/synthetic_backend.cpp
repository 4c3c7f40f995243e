#include "autofeedback/synthetic_backend.hpp"

#include <array>

#include "autofeedback/text_util.hpp"

namespace autofeedback::llm {

namespace {

std::uint64_t variant_of(const std::string& digest) { return std::stoull(digest.substr(0, 15), nullptr, 16); }

std::string joined_prompt(const ChatRequest& req) {
  std::string all;
  for (const auto& m : req.messages()) {
    all += m.content;
    all += '\n';
  }
  return all;
}

bool mentions_particles(std::string_view response) {
  const std::string lower = text::to_lower_ascii(response);
  for (std::string_view w : {"particle", "molecule", "faster", "speed", "move", "energy"}) {
    if (lower.find(w) != std::string::npos) return true;
  }
  return false;
}

constexpr std::array<std::string_view, 6> kOpenings = {
    "You're on the right path! ", "Great job working on this question! ", "", "", "", ""};

std::string excerpt_words(std::string_view s, std::size_t max_words) {
  std::string out;
  std::size_t words = 0;
  bool in_word = false;
  for (char c : s) {
    const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_word && ++words > max_words) {
      out += "...";
      return out;
    }
    in_word = !space;
    out += space ? ' ' : c;
  }
  return std::string(text::trim(out));
}

}  // namespace

std::string prompt_block(std::string_view prompt, std::string_view tag) {
  const std::string header = "<<" + std::string(tag) + ">>";
  auto lines = text::split_lines(prompt);
  std::size_t begin = std::string_view::npos;
  std::size_t end = prompt.size();
  for (const auto& line : lines) {
    auto t = text::trim(line.text);
    if (begin == std::string_view::npos) {
      if (t == header) begin = line.offset + line.text.size();
    } else if (t.size() > 4 && t.substr(0, 2) == "<<" && t.substr(t.size() - 2) == ">>") {
      end = line.offset;
      break;
    }
  }
  if (begin == std::string_view::npos) return {};
  return std::string(text::trim(prompt.substr(begin, end - begin)));
}

std::string SyntheticBackend::feedback_for(std::string_view prompt, std::uint64_t variant) {
  const std::string response = prompt_block(prompt, "STUDENT RESPONSE");
  const bool revising = !prompt_block(prompt, "REVIEW FROM AGENT2").empty();
  const bool on_topic = mentions_particles(response);
  const std::string_view opening = revising ? "" : kOpenings[variant % kOpenings.size()];

  std::string out;
  out += "**Aim of the Item:** This item asks you to use a model to explain how adding or removing thermal energy "
         "changes the motion of particles in water.\n\n";
  out += "**Your Performance:** ";
  out += opening;
  if (on_topic) {
    out += "You wrote: \"" + excerpt_words(response, 25) + "\". You connected temperature with how the particles behave.\n\n";
  } else {
    out += "Your answer does not yet describe what happens to the particles in the three dishes.\n\n";
  }
  out += "**Strength:** ";
  if (on_topic) {
    out += (variant / 6) % 4 == 0 && !revising
               ? "You clearly understand kinetic energy and how heat spreads through every state of matter.\n\n"
               : "You linked a change in temperature to a change in the water.\n\n";
  } else {
    out += revising || (variant / 6) % 2 == 1 ? "You made an attempt to answer the question.\n\n"
                                              : "You are curious about the experiment and ready to learn more.\n\n";
  }
  out += "**Area for improvement:** Think about how fast the particles move in the cold, middle and warm dishes, "
         "and what that means for the candy coating.\n\n";
  out += "**Suggestions for further learning:** Drop food coloring into cold and warm water and draw a particle "
         "model of what you observe in each cup.";
  return out;
}

std::string SyntheticBackend::validation_for(std::string_view prompt, std::uint64_t variant) {
  const std::string feedback = prompt_block(prompt, "FEEDBACK FROM AGENT1");
  const std::string lower = text::to_lower_ascii(feedback);
  const bool praise = lower.find("right path") != std::string::npos || lower.find("great job") != std::string::npos ||
                      lower.find("curious about") != std::string::npos;
  const bool inference = lower.find("clearly understand") != std::string::npos;

  if (variant % 37 == 5) {
    return "The praise is a bit strong for this answer; I would soften the opening and keep the rest.";
  }
  if (!praise && !inference) {
    return "STEP 1: The feedback matches the response and the rubric, and it does not claim anything the student "
           "did not write.\nSTEP 2: The feedback now is good enough.";
  }

  std::string reasons = "STEP 1: The feedback should be revised.";
  if (praise) reasons += " It over-praised the response with an encouraging opening the answer does not support.";
  if (inference) reasons += " It over-inferred understanding of kinetic energy that the response does not show.";

  std::string revised;
  for (const auto& line : text::split_lines(feedback)) {
    std::string l(line.text);
    for (std::string_view phrase : kOpenings) {
      if (phrase.empty()) continue;
      auto pos = l.find(phrase);
      if (pos != std::string::npos) l.erase(pos, phrase.size());
    }
    auto swap = [&](std::string_view from, std::string_view to) {
      auto pos = l.find(from);
      if (pos != std::string::npos) l.replace(pos, from.size(), to);
    };
    swap("You clearly understand kinetic energy and how heat spreads through every state of matter.",
         "You linked a change in temperature to a change in the water.");
    swap("You are curious about the experiment and ready to learn more.", "You made an attempt to answer the question.");
    revised += l;
    revised += '\n';
  }
  return reasons + "\nSTEP 2: Revised feedback:\n\n" + std::string(text::trim(revised));
}

ChatResponse SyntheticBackend::complete(const ChatRequest& req) {
  const std::string prompt = joined_prompt(req);
  const std::uint64_t variant = variant_of(req.digest());
  ChatResponse r;
  if (prompt.find("<<FEEDBACK FROM AGENT1>>") != std::string::npos) {
    r.text = validation_for(prompt, variant);
  } else if (prompt.find("<<CRITERIA FOR THE FEEDBACK>>") != std::string::npos) {
    r.text = feedback_for(prompt, variant);
  } else {
    throw BackendError(BackendErrorKind::NoFixture, 0, "synthetic backend does not recognize the prompt");
  }
  return r;
}

}  // namespace autofeedback::llm
