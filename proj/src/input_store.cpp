#include "detos/input_store.hpp"

#include "detos/error.hpp"

namespace detos {

const Bytes& InputStore::at(const std::string& label) const {
  auto it = blobs_.find(label);
  if (it == blobs_.end()) throw InputError("no input bound to label '" + label + "'");
  return it->second;
}

IndeterminateInputs::IndeterminateInputs(const InputStore& store, InputPolicy policy, Bytes alphabet)
    : store_(store), policy_(policy), alphabet_(std::move(alphabet)) {
  if (policy_ == InputPolicy::enumerate && alphabet_.empty())
    throw InputError("enumerated input policy needs a non-empty alphabet");
}

Bytes IndeterminateInputs::get(const std::string& label, std::size_t length, const Chooser& choose) {
  auto [it, fresh] = produced_.try_emplace(label);
  Bytes& have = it->second;
  if (fresh && store_.contains(label)) have = store_.at(label);

  if (have.size() < length) {
    switch (policy_) {
      case InputPolicy::strict:
        if (!store_.contains(label)) throw InputError("no input bound to label '" + label + "'");
        throw InputError("input '" + label + "' has " + std::to_string(have.size()) + " bytes, " +
                         std::to_string(length) + " requested");
      case InputPolicy::zero_fill:
        have.resize(length, 0);
        break;
      case InputPolicy::enumerate:
        while (have.size() < length)
          have.push_back(alphabet_[choose(static_cast<std::uint32_t>(alphabet_.size()))]);
        break;
    }
  }
  return Bytes(have.begin(), have.begin() + length);
}

}  // namespace detos
