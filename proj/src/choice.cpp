#include "detos/choice.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "detos/error.hpp"

namespace detos {

ChoiceLog::ChoiceLog(std::initializer_list<Choice> entries) {
  for (const auto& c : entries) append(c);
}

void ChoiceLog::append(Choice c) {
  if (c.arity == 0 || c.chosen >= c.arity)
    throw std::invalid_argument("choice " + std::to_string(c.chosen) + " out of range for arity " +
                                std::to_string(c.arity));
  entries_.push_back(c);
}

ChoiceLog ChoiceLog::prefix(std::size_t n) const {
  ChoiceLog out;
  out.entries_.assign(entries_.begin(), entries_.begin() + std::min(n, entries_.size()));
  return out;
}

std::string ChoiceLog::to_text() const {
  std::string out;
  for (const auto& c : entries_) {
    out += std::to_string(c.arity);
    out += ' ';
    out += std::to_string(c.chosen);
    out += '\n';
  }
  return out;
}

namespace {

bool parse_u32(std::string_view s, std::uint32_t& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

ChoiceLog ChoiceLog::parse(std::string_view text) {
  ChoiceLog log;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    auto sp = line.find_first_of(" \t");
    std::uint32_t arity = 0, chosen = 0;
    if (sp == std::string_view::npos || !parse_u32(line.substr(0, sp), arity) ||
        !parse_u32(trim(line.substr(sp)), chosen) || arity == 0 || chosen >= arity)
      throw Error("choice log line " + std::to_string(line_no) + ": expected `arity chosen` with chosen < arity");
    log.entries_.push_back({arity, chosen});
  }
  return log;
}

void ChoiceLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write choice log " + path.string());
  out << to_text();
}

ChoiceLog ChoiceLog::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read choice log " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ChoiceSource ChoiceSource::scripted(ChoiceLog script) {
  ChoiceSource s(Mode::scripted);
  s.script_ = std::move(script);
  return s;
}

ChoiceSource ChoiceSource::random(std::uint64_t seed) {
  ChoiceSource s(Mode::random);
  s.rng_.seed(seed);
  return s;
}

ChoiceSource ChoiceSource::explorer(ChoiceLog prefix, SiblingOrder order) {
  ChoiceSource s(Mode::explorer);
  s.script_ = std::move(prefix);
  s.order_ = order;
  return s;
}

std::uint32_t ChoiceSource::next(std::uint32_t arity) {
  if (arity == 0) throw std::invalid_argument("choose: arity must be positive");

  std::uint32_t chosen = 0;
  if (mode_ == Mode::random) {
    chosen = static_cast<std::uint32_t>(rng_() % arity);
  } else if (cursor_ < script_.size()) {
    const auto& expected = script_[cursor_];
    if (expected.arity != arity)
      throw DivergenceError("choice " + std::to_string(cursor_) + ": recorded arity " +
                            std::to_string(expected.arity) + ", requested " + std::to_string(arity));
    chosen = expected.chosen;
    ++cursor_;
  } else if (mode_ == Mode::scripted) {
    throw DivergenceError("choice log exhausted after " + std::to_string(script_.size()) + " entries");
  } else {
    chosen = order_ == SiblingOrder::ascending ? 0 : arity - 1;
  }
  taken_.append({arity, chosen});
  return chosen;
}

std::size_t ChoiceSource::unconsumed() const noexcept {
  return mode_ == Mode::scripted ? script_.size() - cursor_ : 0;
}

}  // namespace detos
