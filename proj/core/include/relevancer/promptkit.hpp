#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relevancer/core.hpp"
#include "relevancer/dataset.hpp"
#include "relevancer/embed.hpp"
#include "relevancer/vectorstore.hpp"

namespace relevancer {

enum class Strategy { kZeroShot, kRandomFewShot, kRagFewShot, kRagMmrFewShot };

std::string_view to_string(Strategy s);
// zero_shot | random_fs | rag_fs | rag_mmr_fs
Strategy parse_strategy(std::string_view text);

inline constexpr std::string_view kCotCue = "Let's think step by step";

struct PromptConfig {
  Strategy strategy = Strategy::kZeroShot;
  std::size_t k = 0;
  std::optional<double> lambda;  // rag_mmr_fs only
  bool cot = false;
  std::uint64_t seed = 0;        // random_fs only
  LabelScheme scheme;
  std::size_t mmr_pool = 0;      // 0 -> default_mmr_pool(k)
  bool reverse = false;          // render examples least-relevant first

  void validate() const;
  // k in {0, 8, 16}.
  bool is_grid() const noexcept;
  bool uses_store() const noexcept {
    return strategy == Strategy::kRagFewShot || strategy == Strategy::kRagMmrFewShot;
  }
};

struct SelectedExample {
  std::size_t id = 0;  // pool index == store id
  LabeledExample example;
};

struct AssembledPrompt {
  std::string text;
  std::vector<std::size_t> example_ids;
  std::string config_id;
};

/// Picks the demonstrations for one question pair, most relevant first.
/// `store` and `embedder` may be null for zero_shot and random_fs. The
/// question's own pair key is never returned.
std::vector<SelectedExample> select_examples(const PromptConfig& config, const QPPair& question,
                                             const Dataset& pool, const Store* store, Embedder* embedder);

// Instruction paragraph: task sentence, one "Label : definition" line per
// label, and the output-format sentence (plus the reasoning cue when cot).
std::string instruction_block(const LabelScheme& scheme, bool cot = false);
std::string rating_line(std::string_view label);

AssembledPrompt assemble(const PromptConfig& config, const QPPair& question,
                         const std::vector<SelectedExample>& examples, std::string config_id = {});

}  // namespace relevancer
