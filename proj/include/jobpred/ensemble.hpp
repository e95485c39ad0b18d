#pragma once

// Plurality voting over an ordered list of member classifiers.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jobpred/checkpoint.hpp"
#include "jobpred/models.hpp"

namespace jobpred {

/// The unique label with the most votes; without a unique winner,
/// votes[fallback_index].
inline std::size_t majority_vote(std::span<const std::size_t> votes, std::size_t fallback_index) {
  if (votes.empty()) throw InputError("majority_vote: no votes");
  if (fallback_index >= votes.size()) {
    throw InputError("majority_vote: fallback index " + std::to_string(fallback_index) + " with " +
                     std::to_string(votes.size()) + " votes");
  }
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t v : votes) ++counts[v];
  std::size_t best = 0, best_count = 0;
  bool unique = false;
  for (const auto& [label, n] : counts) {
    if (n > best_count) {
      best = label, best_count = n, unique = true;
    } else if (n == best_count) {
      unique = false;
    }
  }
  return unique ? best : votes[fallback_index];
}

struct Prediction {
  std::size_t label_id = 0;
  std::vector<double> probabilities;      // mean of member distributions
  std::vector<std::size_t> member_votes;  // in member order
};

struct EnsembleSpec {
  std::vector<std::shared_ptr<const ModelBundle>> members;
  std::size_t fallback_member_index = 0;

  /// Members in order; the fallback defaults to the last one.
  static EnsembleSpec of(std::vector<std::shared_ptr<const ModelBundle>> members,
                         std::optional<std::size_t> fallback = std::nullopt) {
    EnsembleSpec s;
    s.fallback_member_index = fallback.value_or(members.empty() ? 0 : members.size() - 1);
    s.members = std::move(members);
    s.validate();
    return s;
  }

  void validate() const {
    if (members.empty()) throw ConfigError("ensemble needs at least one member");
    if (fallback_member_index >= members.size()) throw ConfigError("fallback_member_index out of range");
    for (const auto& m : members) {
      if (!m) throw ConfigError("null ensemble member");
      if (m->label_hash() != members[0]->label_hash()) {
        throw CompatibilityError("ensemble members use different label registries");
      }
    }
  }

  const LabelRegistry& labels() const { return *members.front()->labels; }
  std::size_t size() const { return members.size(); }
};

namespace detail {

inline Prediction combine(const EnsembleSpec& spec, const std::vector<Tensor>& distributions) {
  Prediction p;
  p.probabilities.assign(spec.labels().size(), 0.0);
  for (const auto& d : distributions) {
    p.member_votes.push_back(argmax(d.values()));
    for (std::size_t i = 0; i < d.size(); ++i) p.probabilities[i] += d[i] / double(distributions.size());
  }
  p.label_id = majority_vote(p.member_votes, spec.fallback_member_index);
  return p;
}

}  // namespace detail

inline Prediction ensemble_predict(const EnsembleSpec& spec, const EncodedDocument& doc) {
  spec.validate();
  std::vector<Tensor> dists;
  for (const auto& m : spec.members) dists.push_back(predict_proba(*m, doc));
  return detail::combine(spec, dists);
}

/// Encodes the preprocessed tokens with each member's own vocabulary.
inline Prediction ensemble_predict_tokens(const EnsembleSpec& spec, const std::vector<std::string>& tokens) {
  spec.validate();
  std::vector<Tensor> dists;
  for (const auto& m : spec.members) dists.push_back(predict_proba(*m, encode(tokens, *m->vocabulary, m->config.max_len)));
  return detail::combine(spec, dists);
}

// Manifest: {"members": ["rel/path", ...], "fallback_member_index": k}
// with paths relative to the manifest's directory.

inline void save_ensemble_manifest(const fs::path& path, const std::vector<fs::path>& member_dirs,
                                   std::optional<std::size_t> fallback = std::nullopt) {
  if (member_dirs.empty()) throw ConfigError("ensemble needs at least one member");
  const std::size_t fb = fallback.value_or(member_dirs.size() - 1);
  if (fb >= member_dirs.size()) throw ConfigError("fallback_member_index out of range");
  const fs::path base = fs::absolute(path).parent_path();
  nlohmann::json members = nlohmann::json::array();
  for (const auto& d : member_dirs) members.push_back(fs::absolute(d).lexically_relative(base).generic_string());
  write_file(path, nlohmann::json{{"members", members}, {"fallback_member_index", fb}}.dump(2) + "\n");
}

inline bool is_ensemble_manifest(const fs::path& path) { return fs::is_regular_file(path); }

inline EnsembleSpec load_ensemble(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  std::vector<std::shared_ptr<const ModelBundle>> members;
  std::optional<std::size_t> fb;
  try {
    for (const auto& m : j.at("members"))
      members.push_back(std::make_shared<const ModelBundle>(load_checkpoint(path.parent_path() / m.get<std::string>())));
    if (j.contains("fallback_member_index")) fb = j.at("fallback_member_index").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return EnsembleSpec::of(std::move(members), fb);
}

}  // namespace jobpred
