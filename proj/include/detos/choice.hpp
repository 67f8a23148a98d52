#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace detos {

// One nondeterministic decision: `chosen` out of `arity` options.
struct Choice {
  std::uint32_t arity = 1;
  std::uint32_t chosen = 0;

  friend bool operator==(const Choice&, const Choice&) = default;
  friend auto operator<=>(const Choice&, const Choice&) = default;
};

/// The complete record of the decisions taken by one execution. Two
/// executions with equal logs (and equal inputs) are the same execution.
///
/// Text form: one `arity chosen` pair per line; blank lines and lines
/// starting with `#` are ignored.
class ChoiceLog {
 public:
  ChoiceLog() = default;
  ChoiceLog(std::initializer_list<Choice> entries);

  // Throws std::invalid_argument unless 0 <= chosen < arity.
  void append(Choice c);

  const std::vector<Choice>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Choice& operator[](std::size_t i) const { return entries_[i]; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  ChoiceLog prefix(std::size_t n) const;

  std::string to_text() const;
  static ChoiceLog parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ChoiceLog load(const std::filesystem::path& path);

  friend bool operator==(const ChoiceLog&, const ChoiceLog&) = default;
  friend auto operator<=>(const ChoiceLog&, const ChoiceLog&) = default;

 private:
  std::vector<Choice> entries_;
};

// Which sibling an explorer-driven source takes first past its prefix.
enum class SiblingOrder { ascending, descending };

/// Supplies decisions to `choose`. Every decision taken is appended to
/// `log()`, whatever the mode.
///  - scripted: replays a log left to right; exhaustion or an arity mismatch
///    throws DivergenceError.
///  - random: seeded mt19937_64; smoke testing only.
///  - explorer: replays a prefix, then extends with the first sibling in
///    `order`.
class ChoiceSource {
 public:
  enum class Mode { scripted, random, explorer };

  static ChoiceSource scripted(ChoiceLog script);
  static ChoiceSource random(std::uint64_t seed);
  static ChoiceSource explorer(ChoiceLog prefix, SiblingOrder order = SiblingOrder::ascending);

  std::uint32_t next(std::uint32_t arity);

  Mode mode() const noexcept { return mode_; }
  const ChoiceLog& log() const noexcept { return taken_; }
  // Scripted entries not consumed yet (always 0 for other modes).
  std::size_t unconsumed() const noexcept;

 private:
  explicit ChoiceSource(Mode mode) : mode_(mode) {}

  Mode mode_;
  ChoiceLog script_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
  SiblingOrder order_ = SiblingOrder::ascending;
  ChoiceLog taken_;
};

}  // namespace detos
