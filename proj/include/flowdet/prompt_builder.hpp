#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>

#include "flowdet/types.hpp"

namespace flowdet {

enum class PromptMode { Detect, Reason };

std::string_view to_string(PromptMode mode);

/// Everything that shapes rendered prompt text. The separators and the
/// canonical preamble/instruction wording are frozen as defaults; goldens
/// pin them down.
struct PromptTemplate {
  PromptMode mode = PromptMode::Detect;
  std::string name = "detect-default";  // surfaces as PromptDocument::template_id
  std::string preamble;
  std::string field_separator = " | ";
  std::string row_separator = "\n";
  std::string block_separator = "###";
  std::string output_instruction;
  /// Placeholder layout, one section per line. A line whose placeholders all
  /// expand empty (and carries no other visible text) is dropped, which is
  /// how zero-shot prompts lose the example block and separator lines.
  std::string layout = std::string(kDefaultLayout);

  static constexpr std::string_view kDefaultLayout =
      "{preamble}\n{examples}\n{separator}\n{test}\n{instruction}";

  static PromptTemplate detect_default();
  /// Reasoning variants differ only in instruction wording: without a label
  /// the model must both decide and explain, with one it explains the shown
  /// label.
  static PromptTemplate reason_default(bool include_label);

  /// Throws PromptError when separators, instruction, or layout break the
  /// formatting rules (block separator must contain exactly three
  /// consecutive '#', Detect instructions must mention "$$$", placeholders
  /// must be known and non-repeating with {test} mandatory, preamble and
  /// instruction must not contain the block separator).
  void validate() const;
};

/// Reads a placeholder layout from a plain-text template file. The file body
/// becomes PromptTemplate::layout verbatim, minus one trailing newline.
std::string load_layout(std::istream& in);

struct PromptDocument {
  std::string text;
  std::size_t example_count = 0;
  /// [start, end) offsets into text; (0,0) when the section is absent.
  std::pair<std::size_t, std::size_t> test_row_span{0, 0};
  std::pair<std::size_t, std::size_t> separator_span{0, 0};
  std::string template_id;
  PromptMode mode = PromptMode::Detect;
  bool label_shown = false;

  std::string_view test_row() const {
    return std::string_view(text).substr(test_row_span.first,
                                         test_row_span.second - test_row_span.first);
  }
};

/// "Name: value" pairs joined by the field separator, with "Label: <label>"
/// appended as a final field iff with_label. Values pass through verbatim.
std::string render_row(const LabeledExample& example, bool with_label,
                       const PromptTemplate& tmpl);

/// Few-shot detection prompt: labeled example rows, block separator, then the
/// unlabeled test row. Example order is preserved exactly as given. With zero
/// examples the separator disappears along with the example block.
PromptDocument build_detection_prompt(std::span<const LabeledExample> examples,
                                      const LabeledExample& test_case,
                                      const PromptTemplate& tmpl);

/// Single-flow reasoning prompt. include_label controls whether the label is
/// rendered into the flow row, and is recorded on the document.
PromptDocument build_reasoning_prompt(const LabeledExample& test_case, const PromptTemplate& tmpl,
                                      bool include_label);

}  // namespace flowdet
