#pragma once

// Incremental sentence-boundary detection over streamed thinking text.
// Boundaries are a function of the character stream, not the tokenization:
// feeding the same text in different chunks yields the same boundary offsets.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace thinkbrake {

struct BoundaryConfig {
  bool newline_is_boundary = true;
  std::vector<std::string> sentence_punct{".", "!", "?"};
  bool require_following_whitespace = true;

  void validate() const;  // punct must be non-empty when newlines are off
  bool operator==(const BoundaryConfig&) const = default;
};

struct BoundaryStatus {
  bool at_boundary = false;
  int boundary_index = 0;  // count of boundary reports so far (1-based)
};

/// Streaming detector. Rules, applied per character:
///  - a newline ends the sentence at its own offset;
///  - a sentence_punct character ends the sentence at its own offset once the
///    following character confirms it: whitespace when
///    require_following_whitespace is set, any non-digit otherwise (so "3.14"
///    never splits). Confirmation by the next token's first character means
///    the boundary is reported on that later feed_token call.
/// A boundary fires only if the sentence accumulated since the previous one
/// contains a non-whitespace character, so ".\n" yields one boundary, not two.
class BoundaryDetector {
 public:
  explicit BoundaryDetector(BoundaryConfig cfg = {});

  BoundaryStatus feed_token(std::string_view token_text);

  size_t chars_fed() const { return chars_fed_; }
  int boundaries_reported() const { return reported_; }

  /// Character offsets of every boundary detected so far, in order.
  const std::vector<size_t>& boundary_offsets() const { return offsets_; }

 private:
  void feed_char(char c);
  void fire(size_t offset);
  bool is_punct_tail() const;

  BoundaryConfig cfg_;
  std::string tail_;  // last max_punct_len_ chars, for multi-char punct
  size_t max_punct_len_ = 1;
  size_t chars_fed_ = 0;
  int reported_ = 0;
  bool pending_punct_ = false;
  size_t pending_offset_ = 0;
  bool has_content_ = false;
  std::vector<size_t> offsets_;
};

/// One-shot scan: boundary offsets of a complete text under `cfg`. Matches
/// what a BoundaryDetector reports for any chunking of the same text.
std::vector<size_t> scan_boundaries(std::string_view text,
                                    const BoundaryConfig& cfg = {});

}  // namespace thinkbrake
