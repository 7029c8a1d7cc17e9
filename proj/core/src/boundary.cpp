#include "thinkbrake/boundary.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace thinkbrake {

namespace {
inline bool is_ws(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}
inline bool is_digit(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) != 0;
}
}  // namespace

void BoundaryConfig::validate() const {
  if (!newline_is_boundary && sentence_punct.empty())
    throw std::runtime_error(
        "boundary config: sentence_punct must be non-empty when "
        "newline_is_boundary is false");
  for (const auto& p : sentence_punct)
    if (p.empty())
      throw std::runtime_error("boundary config: empty punctuation string");
}

BoundaryDetector::BoundaryDetector(BoundaryConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (const auto& p : cfg_.sentence_punct)
    max_punct_len_ = std::max(max_punct_len_, p.size());
}

bool BoundaryDetector::is_punct_tail() const {
  for (const auto& p : cfg_.sentence_punct) {
    if (tail_.size() >= p.size() &&
        tail_.compare(tail_.size() - p.size(), p.size(), p) == 0)
      return true;
  }
  return false;
}

void BoundaryDetector::fire(size_t offset) {
  if (!has_content_) return;  // suppress boundaries of whitespace-only spans
  offsets_.push_back(offset);
  has_content_ = false;
}

void BoundaryDetector::feed_char(char c) {
  const size_t offset = chars_fed_;

  if (pending_punct_) {
    const bool confirmed =
        cfg_.require_following_whitespace ? is_ws(c) : !is_digit(c);
    if (confirmed) fire(pending_offset_);
    pending_punct_ = false;
  }

  if (c == '\n' && cfg_.newline_is_boundary) {
    fire(offset);
  } else if (!is_ws(c)) {
    has_content_ = true;
  }

  tail_.push_back(c);
  if (tail_.size() > max_punct_len_) tail_.erase(0, tail_.size() - max_punct_len_);
  if (c != '\n' && is_punct_tail()) {
    pending_punct_ = true;
    pending_offset_ = offset;
  }

  ++chars_fed_;
}

BoundaryStatus BoundaryDetector::feed_token(std::string_view token_text) {
  const size_t before = offsets_.size();
  for (char c : token_text) feed_char(c);
  BoundaryStatus st;
  st.at_boundary = offsets_.size() > before;
  if (st.at_boundary) ++reported_;
  st.boundary_index = reported_;
  return st;
}

std::vector<size_t> scan_boundaries(std::string_view text,
                                    const BoundaryConfig& cfg) {
  BoundaryDetector det(cfg);
  det.feed_token(text);
  return det.boundary_offsets();
}

}  // namespace thinkbrake
