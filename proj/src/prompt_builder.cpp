#include "flowdet/prompt_builder.hpp"

#include <array>
#include <cctype>
#include <istream>
#include <map>

#include "flowdet/errors.hpp"

namespace flowdet {

std::string_view to_string(PromptMode mode) {
  return mode == PromptMode::Detect ? "Detect" : "Reason";
}

namespace {

constexpr std::array<std::string_view, 5> kPlaceholderNames = {"preamble", "examples", "separator",
                                                               "test", "instruction"};

bool known_placeholder(std::string_view name) {
  for (auto candidate : kPlaceholderNames)
    if (name == candidate) return true;
  return false;
}

struct Sections {
  std::string_view preamble;
  std::string_view examples;
  std::string_view separator;
  std::string_view test;
  std::string_view instruction;

  std::string_view value(std::string_view name) const {
    if (name == "preamble") return preamble;
    if (name == "examples") return examples;
    if (name == "separator") return separator;
    if (name == "test") return test;
    return instruction;
  }
};

struct LineExpansion {
  std::string text;
  bool has_placeholder = false;
  bool any_payload = false;
  bool literal_visible = false;
  std::ptrdiff_t test_at = -1;
  std::size_t test_len = 0;
  std::ptrdiff_t separator_at = -1;
  std::size_t separator_len = 0;
};

LineExpansion expand_line(std::string_view line, const Sections& sections) {
  LineExpansion out;
  std::size_t i = 0;
  while (i < line.size()) {
    std::size_t close;
    if (line[i] == '{' && (close = line.find('}', i)) != std::string_view::npos &&
        known_placeholder(line.substr(i + 1, close - i - 1))) {
      auto name = line.substr(i + 1, close - i - 1);
      auto payload = sections.value(name);
      out.has_placeholder = true;
      if (!payload.empty()) {
        out.any_payload = true;
        if (name == "test") {
          out.test_at = static_cast<std::ptrdiff_t>(out.text.size());
          out.test_len = payload.size();
        } else if (name == "separator") {
          out.separator_at = static_cast<std::ptrdiff_t>(out.text.size());
          out.separator_len = payload.size();
        }
        out.text += payload;
      }
      i = close + 1;
    } else {
      if (!std::isspace(static_cast<unsigned char>(line[i]))) out.literal_visible = true;
      out.text += line[i];
      ++i;
    }
  }
  return out;
}

void expand_layout(const std::string& layout, const Sections& sections, PromptDocument& doc) {
  std::size_t pos = 0;
  bool first = true;
  while (pos <= layout.size()) {
    auto eol = layout.find('\n', pos);
    auto line = std::string_view(layout).substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos);
    auto expanded = expand_line(line, sections);
    bool keep = !expanded.has_placeholder || expanded.any_payload || expanded.literal_visible;
    if (keep) {
      if (!first) doc.text += '\n';
      first = false;
      auto base = doc.text.size();
      if (expanded.test_at >= 0) {
        auto start = base + static_cast<std::size_t>(expanded.test_at);
        doc.test_row_span = {start, start + expanded.test_len};
      }
      if (expanded.separator_at >= 0) {
        auto start = base + static_cast<std::size_t>(expanded.separator_at);
        doc.separator_span = {start, start + expanded.separator_len};
      }
      doc.text += expanded.text;
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
}

}  // namespace

PromptTemplate PromptTemplate::detect_default() {
  PromptTemplate tmpl;
  tmpl.mode = PromptMode::Detect;
  tmpl.name = "detect-default";
  tmpl.preamble =
      "You are a network traffic analyst. Flow records are listed below, one per line. "
      "Each flow is written as feature name and value pairs in the form Name: value. "
      "Features within a flow are separated by a pipe symbol. Flows are separated by "
      "newlines. A line of three consecutive # symbols separates the labeled example "
      "flows from the unlabeled flow to classify. Classify the unlabeled flow as either "
      "Benign or DDOS.";
  tmpl.output_instruction =
      "Respond with the predicted label for the unlabeled flow. Surround the predicted "
      "label with $$$ on each side.";
  return tmpl;
}

PromptTemplate PromptTemplate::reason_default(bool include_label) {
  PromptTemplate tmpl;
  tmpl.mode = PromptMode::Reason;
  tmpl.name = include_label ? "reason-default-labeled" : "reason-default";
  tmpl.preamble =
      "You are a network traffic analyst. One flow record is written below as feature "
      "name and value pairs in the form Name: value, with features separated by a pipe "
      "symbol.";
  tmpl.output_instruction =
      include_label
          ? "Explain why this flow has the label shown, using only the feature values."
          : "Decide whether this flow is Benign or DDOS. Explain your reasoning using "
            "only the feature values shown, then state your conclusion.";
  return tmpl;
}

void PromptTemplate::validate() const {
  if (block_separator.find("###") == std::string::npos ||
      block_separator.find("####") != std::string::npos) {
    throw PromptError(PromptError::Kind::BadSeparator,
                      "block separator must contain exactly three consecutive '#'");
  }
  if (field_separator.empty() || row_separator.empty()) {
    throw PromptError(PromptError::Kind::BadSeparator, "separators must be nonempty");
  }
  if (mode == PromptMode::Detect && output_instruction.find("$$$") == std::string::npos) {
    throw PromptError(PromptError::Kind::BadInstruction,
                      "detection instruction must mention the $$$ delimiter");
  }
  if (preamble.find(block_separator) != std::string::npos ||
      output_instruction.find(block_separator) != std::string::npos) {
    throw PromptError(PromptError::Kind::BadLayout,
                      "preamble and instruction must not contain the block separator");
  }

  std::map<std::string, int> counts;
  std::size_t i = 0;
  while ((i = layout.find('{', i)) != std::string::npos) {
    auto close = layout.find('}', i);
    if (close == std::string::npos) {
      throw PromptError(PromptError::Kind::BadLayout, "unterminated '{' in layout");
    }
    auto name = layout.substr(i + 1, close - i - 1);
    if (!known_placeholder(name)) {
      throw PromptError(PromptError::Kind::BadLayout, "unknown placeholder {" + name + "}");
    }
    ++counts[name];
    i = close + 1;
  }
  for (const auto& [name, count] : counts) {
    if (count > 1) {
      throw PromptError(PromptError::Kind::BadLayout,
                        "placeholder {" + name + "} appears more than once");
    }
  }
  if (counts["test"] != 1) {
    throw PromptError(PromptError::Kind::BadLayout, "layout must contain {test} exactly once");
  }
}

std::string load_layout(std::istream& in) {
  std::string layout{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) {
    throw PromptError(PromptError::Kind::BadTemplateFile, "failed reading template file");
  }
  if (!layout.empty() && layout.back() == '\n') layout.pop_back();
  if (!layout.empty() && layout.back() == '\r') layout.pop_back();
  if (layout.empty()) {
    throw PromptError(PromptError::Kind::BadTemplateFile, "template file is empty");
  }
  return layout;
}

std::string render_row(const LabeledExample& example, bool with_label,
                       const PromptTemplate& tmpl) {
  std::string row;
  for (std::size_t i = 0; i < example.pairs.size(); ++i) {
    if (i) row += tmpl.field_separator;
    row += example.pairs[i].name;
    row += ": ";
    row += example.pairs[i].value;
  }
  if (with_label) {
    row += tmpl.field_separator;
    row += "Label: ";
    row += to_string(example.label);
  }
  return row;
}

PromptDocument build_detection_prompt(std::span<const LabeledExample> examples,
                                      const LabeledExample& test_case,
                                      const PromptTemplate& tmpl) {
  tmpl.validate();
  std::string rows;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i) rows += tmpl.row_separator;
    rows += render_row(examples[i], true, tmpl);
  }
  std::string test_text = render_row(test_case, false, tmpl);
  Sections sections{tmpl.preamble, rows,
                    examples.empty() ? std::string_view{} : std::string_view(tmpl.block_separator),
                    test_text, tmpl.output_instruction};

  PromptDocument doc;
  doc.example_count = examples.size();
  doc.template_id = tmpl.name;
  doc.mode = tmpl.mode;
  expand_layout(tmpl.layout, sections, doc);
  return doc;
}

PromptDocument build_reasoning_prompt(const LabeledExample& test_case, const PromptTemplate& tmpl,
                                      bool include_label) {
  if (tmpl.mode != PromptMode::Reason) {
    throw PromptError(PromptError::Kind::BadInstruction,
                      "reasoning prompts require a Reason-mode template");
  }
  tmpl.validate();
  PromptDocument doc;
  doc.template_id = tmpl.name;
  doc.mode = tmpl.mode;
  doc.label_shown = include_label;
  std::string test_text = render_row(test_case, include_label, tmpl);
  Sections sections{tmpl.preamble, {}, {}, test_text, tmpl.output_instruction};
  expand_layout(tmpl.layout, sections, doc);
  return doc;
}

}  // namespace flowdet
