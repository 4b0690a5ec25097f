#include "relevancer/promptkit.hpp"

#include <algorithm>
#include <numeric>

#include "relevancer/rng.hpp"

namespace relevancer {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kZeroShot: return "zero_shot";
    case Strategy::kRandomFewShot: return "random_fs";
    case Strategy::kRagFewShot: return "rag_fs";
    case Strategy::kRagMmrFewShot: return "rag_mmr_fs";
  }
  return "zero_shot";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "zero_shot" || text == "vanilla") return Strategy::kZeroShot;
  if (text == "random_fs" || text == "fs") return Strategy::kRandomFewShot;
  if (text == "rag_fs") return Strategy::kRagFewShot;
  if (text == "rag_mmr_fs") return Strategy::kRagMmrFewShot;
  throw Error(Errc::kInvalidConfig, "unknown strategy '" + std::string(text) + "'");
}

void PromptConfig::validate() const {
  scheme.validate();
  if ((strategy == Strategy::kZeroShot) != (k == 0)) {
    throw Error(Errc::kInvalidConfig, "k must be 0 exactly when the strategy is zero_shot");
  }
  if ((strategy == Strategy::kRagMmrFewShot) != lambda.has_value()) {
    throw Error(Errc::kInvalidConfig, "lambda is required for rag_mmr_fs and only for it");
  }
  if (lambda && !(*lambda >= 0.0 && *lambda <= 1.0)) {
    throw Error(Errc::kBadLambda, "lambda must lie in [0, 1]");
  }
  if (cot && strategy == Strategy::kZeroShot) {
    throw Error(Errc::kInvalidConfig, "chain-of-thought needs few-shot examples with rationales");
  }
  if (mmr_pool != 0 && mmr_pool < k) {
    throw Error(Errc::kInvalidConfig, "mmr_pool must be >= k");
  }
}

bool PromptConfig::is_grid() const noexcept { return k == 0 || k == 8 || k == 16; }

std::vector<SelectedExample> select_examples(const PromptConfig& config, const QPPair& question,
                                             const Dataset& pool, const Store* store, Embedder* embedder) {
  config.validate();
  std::vector<SelectedExample> out;
  if (config.strategy == Strategy::kZeroShot) return out;

  const std::string question_key = pair_key(question);
  if (config.strategy == Strategy::kRandomFewShot) {
    std::vector<std::size_t> eligible;
    eligible.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (pair_key(pool.examples[i].pair) != question_key) eligible.push_back(i);
    }
    if (eligible.size() < config.k) {
      throw Error(Errc::kPoolTooSmall, "pool has " + std::to_string(eligible.size()) +
                                           " usable examples, need " + std::to_string(config.k));
    }
    // One stream per question so results do not depend on batch order.
    Rng rng(derive_seed(config.seed, question_key));
    for (std::size_t i = 0; i < config.k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.uniform(eligible.size() - i));
      std::swap(eligible[i], eligible[j]);
      out.push_back({eligible[i], pool.examples[eligible[i]]});
    }
  } else {
    if (store == nullptr || embedder == nullptr) {
      throw Error(Errc::kInvalidConfig, "retrieval strategies need a store and an embedder");
    }
    if (embedder->spec().dim != store->dim()) {
      throw Error(Errc::kDimensionMismatch, "embedder dim differs from store dim");
    }
    PairKeySet exclude{question_key};
    auto qvec = embed_pair(question, *embedder);
    auto hits = config.strategy == Strategy::kRagFewShot
                    ? store->top_k(qvec, config.k, exclude)
                    : store->mmr_select(qvec, config.k, *config.lambda, config.mmr_pool, exclude);
    if (hits.size() < config.k) {
      throw Error(Errc::kPoolTooSmall, "store returned " + std::to_string(hits.size()) +
                                           " examples, need " + std::to_string(config.k));
    }
    for (const auto& h : hits) out.push_back({h.id, store->example(h.id)});
  }

  if (config.cot) {
    for (const auto& s : out) {
      if (!s.example.rationale) {
        throw Error(Errc::kMissingRationale,
                    "example " + std::to_string(s.id) + " has no rationale but cot is enabled");
      }
    }
  }
  return out;
}

namespace {

std::string quoted_list(const std::vector<std::string>& labels, bool with_or) {
  if (with_or && labels.size() == 2) return "'" + labels[0] + "' or '" + labels[1] + "'";
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += ", ";
    if (with_or && labels.size() > 1 && i + 1 == labels.size()) out += "or ";
    out += "'" + labels[i] + "'";
  }
  return out;
}

std::string rationale_line(const std::string& rationale) {
  if (rationale.starts_with(kCotCue)) return rationale;
  return std::string(kCotCue) + ": " + rationale;
}

}  // namespace

std::string instruction_block(const LabelScheme& scheme, bool cot) {
  std::string out =
      "You are a search engine in an eCommerce website. For a given customer query and a product "
      "title, please annotate each product title in the list as one of these options: " +
      quoted_list(scheme.labels, false) + ".\n";
  for (std::size_t i = 0; i < scheme.labels.size(); ++i) {
    out += scheme.labels[i] + " : " + scheme.definitions[i] + "\n";
  }
  out += "The response should be in a python dictionary format {\"rating\":label}, where label which is "
         "either " +
         quoted_list(scheme.labels, true) + ".";
  if (cot) {
    out += "\nBefore the rating, explain your reasoning in one line that starts with \"";
    out += kCotCue;
    out += "\".";
  }
  return out;
}

std::string rating_line(std::string_view label) { return "{'rating': '" + std::string(label) + "'}"; }

AssembledPrompt assemble(const PromptConfig& config, const QPPair& question,
                         const std::vector<SelectedExample>& examples, std::string config_id) {
  if (examples.size() != config.k) {
    throw Error(Errc::kExampleCountMismatch, "got " + std::to_string(examples.size()) + " examples, config k = " +
                                                 std::to_string(config.k));
  }
  AssembledPrompt prompt;
  prompt.config_id = std::move(config_id);
  std::string& text = prompt.text;
  text = instruction_block(config.scheme, config.cot);
  text += "\n\n";

  if (!examples.empty()) {
    text += "#### Here are some examples:\n\n";
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    if (config.reverse) std::reverse(order.begin(), order.end());
    for (auto i : order) {
      const auto& ex = examples[i].example;
      if (config.cot && !ex.rationale) {
        throw Error(Errc::kMissingRationale, "example " + std::to_string(examples[i].id) + " has no rationale");
      }
      text += render_pair_line(ex.pair) + "\n";
      if (config.cot) text += rationale_line(*ex.rationale) + "\n";
      text += rating_line(ex.label) + "\n\n";
      prompt.example_ids.push_back(examples[i].id);
    }
  }

  text += "Now rate the relevance of this pair:\n";
  text += render_pair_line(question);
  text += "\n";
  return prompt;
}

}  // namespace relevancer
